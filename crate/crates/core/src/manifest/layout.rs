//! Image file layout: `<images_root>/<owner_id>/<NNNN>.<ext>`, one directory
//! per attribute prompt or target id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::Manifest;
use crate::scores::Side;

pub const IMAGE_EXTENSIONS: [&str; 8] = ["png", "jpg", "jpeg", "gif", "bmp", "webp", "tif", "tiff"];

/// One image file, addressed relative to the images root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ImageRef {
    pub owner_id: String,
    pub index: u32,
    /// `owner_id/NNNN.ext`, relative to the images root.
    pub path: String,
}

impl ImageRef {
    pub fn new(owner_id: impl Into<String>, index: u32, extension: &str) -> Self {
        let owner_id = owner_id.into();
        let path = format!("{owner_id}/{index:04}.{extension}");
        Self {
            owner_id,
            index,
            path,
        }
    }

    /// Parses `owner/NNNN.ext`. Returns `None` for anything that does not
    /// follow the layout.
    pub fn parse(relative: &str) -> Option<Self> {
        let (owner, file) = relative.rsplit_once('/')?;
        if owner.is_empty() || owner.contains('/') {
            return None;
        }
        let (stem, ext) = file.rsplit_once('.')?;
        if stem.len() < 4 || !stem.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !IMAGE_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
            return None;
        }
        Some(Self {
            owner_id: owner.to_owned(),
            index: stem.parse().ok()?,
            path: relative.to_owned(),
        })
    }
}

/// Lists every conforming image file two levels below `root`, sorted by path.
/// Files that do not follow the layout are skipped with a warning.
pub fn scan_images(root: &Path) -> io::Result<Vec<ImageRef>> {
    let mut out = Vec::new();
    for owner in std::fs::read_dir(root)? {
        let owner = owner?;
        if !owner.file_type()?.is_dir() {
            continue;
        }
        let owner_name = owner.file_name().to_string_lossy().into_owned();
        for file in std::fs::read_dir(owner.path())? {
            let file = file?;
            if !file.file_type()?.is_file() {
                continue;
            }
            let rel = format!("{owner_name}/{}", file.file_name().to_string_lossy());
            match ImageRef::parse(&rel) {
                Some(r) => out.push(r),
                None => log::warn!("ignoring {rel}: not an indexed image file"),
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum ProblemKind {
    MissingImage { owner_id: String, index: u32 },
    /// An image beyond the owner's declared count.
    ExtraImage { owner_id: String, index: u32, path: String },
    /// A directory that matches no attribute prompt or target id.
    UnknownOwner { owner_id: String, files: usize },
    /// Two files share an index, e.g. `0001.png` and `0001.jpg`.
    DuplicateImage { owner_id: String, index: u32, paths: Vec<String> },
    DuplicateOwner { owner_id: String },
    DuplicateTargetId { id: String },
    EmptyAttributeSide { side: Side },
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingImage { owner_id, index } => {
                write!(f, "MissingImage {owner_id}/{index:04}")
            }
            Self::ExtraImage { path, .. } => write!(f, "ExtraImage {path}"),
            Self::UnknownOwner { owner_id, files } => {
                write!(f, "UnknownOwner {owner_id} ({files} files)")
            }
            Self::DuplicateImage { paths, .. } => write!(f, "DuplicateImage {}", paths.join(", ")),
            Self::DuplicateOwner { owner_id } => write!(f, "DuplicateOwner {owner_id}"),
            Self::DuplicateTargetId { id } => write!(f, "DuplicateTargetId {id}"),
            Self::EmptyAttributeSide { side } => write!(f, "EmptyAttributeSide {side}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Problem {
    pub severity: Severity,
    #[serde(flatten)]
    pub kind: ProblemKind,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub problems: Vec<Problem>,
    pub declared_images: u64,
    pub found_images: u64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Problem> {
        self.problems.iter().filter(|p| p.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Problem> {
        self.problems.iter().filter(|p| p.severity == Severity::Warning)
    }

    fn push(&mut self, severity: Severity, kind: ProblemKind) {
        self.problems.push(Problem { severity, kind });
    }
}

/// Compares the manifest's declared images against a file listing.
///
/// Missing images and structural defects are errors; surplus files are
/// warnings, so a tree holding more than the manifest needs still passes.
pub fn validate_manifest(m: &Manifest, listing: &[ImageRef]) -> ValidationReport {
    let mut report = ValidationReport {
        declared_images: m.total_images(),
        ..Default::default()
    };

    for side in [Side::SideA, Side::SideB] {
        if m.attributes.text(side).is_empty() {
            report.push(Severity::Error, ProblemKind::EmptyAttributeSide { side });
        }
    }
    let mut ids = HashSet::new();
    for t in &m.targets {
        if !ids.insert(t.id.as_str()) {
            report.push(Severity::Error, ProblemKind::DuplicateTargetId { id: t.id.clone() });
        }
    }

    let mut declared: BTreeMap<&str, u32> = BTreeMap::new();
    let mut owner_order = Vec::new();
    for (owner, count) in m.image_owners() {
        if declared.insert(owner, count).is_some() {
            report.push(
                Severity::Error,
                ProblemKind::DuplicateOwner {
                    owner_id: owner.to_owned(),
                },
            );
        } else {
            owner_order.push(owner);
        }
    }

    let mut found: HashMap<(&str, u32), Vec<&str>> = HashMap::new();
    let mut unknown: BTreeMap<&str, usize> = BTreeMap::new();
    for r in listing {
        match declared.get(r.owner_id.as_str()) {
            None => *unknown.entry(&r.owner_id).or_default() += 1,
            Some(&count) if r.index >= count => report.push(
                Severity::Warning,
                ProblemKind::ExtraImage {
                    owner_id: r.owner_id.clone(),
                    index: r.index,
                    path: r.path.clone(),
                },
            ),
            Some(_) => found.entry((&r.owner_id, r.index)).or_default().push(&r.path),
        }
    }

    for owner in owner_order {
        for index in 0..declared[owner] {
            match found.get(&(owner, index)) {
                None => report.push(
                    Severity::Error,
                    ProblemKind::MissingImage {
                        owner_id: owner.to_owned(),
                        index,
                    },
                ),
                Some(paths) => {
                    report.found_images += 1;
                    if paths.len() > 1 {
                        let mut paths: Vec<String> = paths.iter().map(|p| p.to_string()).collect();
                        paths.sort();
                        report.push(
                            Severity::Warning,
                            ProblemKind::DuplicateImage {
                                owner_id: owner.to_owned(),
                                index,
                                paths,
                            },
                        );
                    }
                }
            }
        }
    }
    for (owner, files) in unknown {
        report.push(
            Severity::Warning,
            ProblemKind::UnknownOwner {
                owner_id: owner.to_owned(),
                files,
            },
        );
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::builtin_catalogue;

    fn complete_listing(m: &Manifest) -> Vec<ImageRef> {
        m.image_owners()
            .flat_map(|(owner, n)| (0..n).map(move |i| ImageRef::new(owner, i, "png")))
            .collect()
    }

    #[test]
    fn parse_layout() {
        let r = ImageRef::parse("an image of a man/0007.png").unwrap();
        assert_eq!(r.owner_id, "an image of a man");
        assert_eq!(r.index, 7);
        assert_eq!(ImageRef::parse("doctor/12345.JPG").unwrap().index, 12345);
        assert!(ImageRef::parse("doctor/7.png").is_none());
        assert!(ImageRef::parse("doctor/0007.txt").is_none());
        assert!(ImageRef::parse("0007.png").is_none());
        assert!(ImageRef::parse("a/b/0007.png").is_none());
        assert_eq!(ImageRef::new("doctor", 3, "jpg").path, "doctor/0003.jpg");
    }

    #[test]
    fn complete_catalogue_listing_passes() {
        let m = builtin_catalogue();
        let listing = complete_listing(&m);
        assert_eq!(listing.len(), 688);
        let report = validate_manifest(&m, &listing);
        assert!(report.passed());
        assert!(report.problems.is_empty(), "{:?}", report.problems);
        assert_eq!(report.found_images, 688);
    }

    #[test]
    fn one_missing_file_fails() {
        let m = builtin_catalogue();
        let mut listing = complete_listing(&m);
        listing.retain(|r| !(r.owner_id == "doctor" && r.index == 5));
        let report = validate_manifest(&m, &listing);
        assert!(!report.passed());
        assert_eq!(report.problems.len(), 1);
        assert_eq!(
            report.problems[0].kind,
            ProblemKind::MissingImage {
                owner_id: "doctor".into(),
                index: 5
            }
        );
    }

    #[test]
    fn surplus_files_are_warnings() {
        let m = builtin_catalogue();
        let mut listing = complete_listing(&m);
        listing.push(ImageRef::new("doctor", 20, "png"));
        listing.push(ImageRef::new("astronaut", 0, "png"));
        listing.push(ImageRef::new("doctor", 0, "jpg"));
        let report = validate_manifest(&m, &listing);
        assert!(report.passed());
        assert_eq!(report.warnings().count(), 3);
    }

    #[test]
    fn owner_collisions_are_errors() {
        let mut m = builtin_catalogue();
        m.targets[1].id = m.targets[0].id.clone();
        let report = validate_manifest(&m, &complete_listing(&m));
        assert!(!report.passed());
        assert!(report
            .errors()
            .any(|p| matches!(p.kind, ProblemKind::DuplicateTargetId { .. })));
        assert!(report
            .errors()
            .any(|p| matches!(p.kind, ProblemKind::DuplicateOwner { .. })));
    }

    #[test]
    fn scan_reads_tree() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("doctor")).unwrap();
        std::fs::write(dir.path().join("doctor/0001.png"), b"x").unwrap();
        std::fs::write(dir.path().join("doctor/0000.jpg"), b"y").unwrap();
        std::fs::write(dir.path().join("doctor/notes.txt"), b"z").unwrap();
        std::fs::write(dir.path().join("stray.png"), b"z").unwrap();
        let listing = scan_images(dir.path()).unwrap();
        assert_eq!(
            listing,
            vec![ImageRef::new("doctor", 0, "jpg"), ImageRef::new("doctor", 1, "png")]
        );
    }
}
