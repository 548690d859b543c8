//! JSON loading with a field-by-field schema check.
//!
//! The document is first parsed into a `serde_json::Value` so that every
//! structural problem can be reported at once, not only the first one serde
//! would stop at.

use std::collections::HashSet;
use std::fmt;

use serde_json::{Map, Value};

use super::{Category, Manifest, ManifestError, MANIFEST_VERSION};

/// One failing field, addressed by a JSON-pointer-like path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn field<'a>(&mut self, obj: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.fail(format!("{path}/{key}"), "missing required field");
        }
        v
    }

    fn string<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a str> {
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.fail(path, "expected a string");
                None
            }
        }
    }

    fn nonempty_string<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a str> {
        let s = self.string(v, path)?;
        if s.trim().is_empty() {
            self.fail(path, "must not be empty");
            return None;
        }
        Some(s)
    }

    fn count(&mut self, v: &Value, path: &str, min: u64) -> Option<u64> {
        match v.as_u64() {
            Some(n) if n > u64::from(u32::MAX) => {
                self.fail(path, "integer out of range");
                None
            }
            Some(n) if n < min => {
                self.fail(path, format!("must be at least {min}"));
                None
            }
            Some(n) => Some(n),
            None => {
                self.fail(path, "expected a non-negative integer");
                None
            }
        }
    }

    fn unknown_keys(&mut self, obj: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.fail(format!("{path}/{key}"), "unknown field");
            }
        }
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        let obj = v.as_object();
        if obj.is_none() {
            self.fail(path, "expected an object");
        }
        obj
    }

    fn array<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Vec<Value>> {
        let arr = v.as_array();
        if arr.is_none() {
            self.fail(path, "expected an array");
        }
        arr
    }

    fn words(&mut self, obj: &Map<String, Value>, path: &str, key: &str) {
        let path_key = format!("{path}/{key}");
        let Some(arr) = self.field(obj, path, key).and_then(|v| self.array(v, &path_key)) else {
            return;
        };
        if arr.is_empty() {
            self.fail(&path_key, "must list at least one phrase");
        }
        let mut seen = HashSet::new();
        for (i, w) in arr.iter().enumerate() {
            let p = format!("{path_key}/{i}");
            if let Some(s) = self.nonempty_string(w, &p) {
                if !seen.insert(s) {
                    self.fail(p, format!("duplicate phrase `{s}`"));
                }
            }
        }
    }

    fn image_prompts(&mut self, obj: &Map<String, Value>, path: &str, key: &str) {
        let path_key = format!("{path}/{key}");
        let Some(arr) = self.field(obj, path, key).and_then(|v| self.array(v, &path_key)) else {
            return;
        };
        let mut seen = HashSet::new();
        for (i, item) in arr.iter().enumerate() {
            let p = format!("{path_key}/{i}");
            let Some(o) = self.object(item, &p) else {
                continue;
            };
            self.unknown_keys(o, &p, &["prompt", "image_count"]);
            if let Some(s) = self
                .field(o, &p, "prompt")
                .and_then(|v| self.nonempty_string(v, &format!("{p}/prompt")))
            {
                if !seen.insert(s) {
                    self.fail(format!("{p}/prompt"), format!("duplicate prompt `{s}`"));
                }
            }
            if let Some(v) = self.field(o, &p, "image_count") {
                self.count(v, &format!("{p}/image_count"), 1);
            }
        }
    }

    fn target(&mut self, item: &Value, p: &str, ids: &mut HashSet<String>) {
        let Some(o) = self.object(item, p) else {
            return;
        };
        self.unknown_keys(o, p, &["id", "category", "prompt", "expected", "image_count"]);
        if let Some(id) = self
            .field(o, p, "id")
            .and_then(|v| self.nonempty_string(v, &format!("{p}/id")))
        {
            if !ids.insert(id.to_owned()) {
                self.fail(format!("{p}/id"), format!("duplicate target id `{id}`"));
            }
        }
        if let Some(c) = self
            .field(o, p, "category")
            .and_then(|v| self.string(v, &format!("{p}/category")))
        {
            if Category::parse(c).is_none() {
                self.fail(
                    format!("{p}/category"),
                    format!("`{c}` is not one of occupations, sports, objects, scenes"),
                );
            }
        }
        if let Some(v) = self.field(o, p, "prompt") {
            self.nonempty_string(v, &format!("{p}/prompt"));
        }
        if let Some(e) = self
            .field(o, p, "expected")
            .and_then(|v| self.string(v, &format!("{p}/expected")))
        {
            if e != "side_a" && e != "side_b" {
                self.fail(format!("{p}/expected"), format!("`{e}` is not side_a or side_b"));
            }
        }
        if let Some(v) = self.field(o, p, "image_count") {
            // Zero is allowed: a text-only target still has a TT score.
            self.count(v, &format!("{p}/image_count"), 0);
        }
    }

    fn manifest(&mut self, doc: &Value) {
        let Some(root) = self.object(doc, "") else {
            return;
        };
        self.unknown_keys(
            root,
            "",
            &["version", "model_hint", "attributes", "targets", "images_root"],
        );
        if let Some(v) = self.field(root, "", "version") {
            if v.as_u64() != Some(u64::from(MANIFEST_VERSION)) {
                self.fail("/version", format!("must be {MANIFEST_VERSION}"));
            }
        }
        if let Some(v) = root.get("model_hint") {
            if !v.is_null() {
                self.string(v, "/model_hint");
            }
        }
        if let Some(v) = self.field(root, "", "images_root") {
            self.string(v, "/images_root");
        }
        if let Some(attrs) = self
            .field(root, "", "attributes")
            .and_then(|v| self.object(v, "/attributes"))
        {
            self.unknown_keys(
                attrs,
                "/attributes",
                &["text_a", "text_b", "image_prompts_a", "image_prompts_b"],
            );
            self.words(attrs, "/attributes", "text_a");
            self.words(attrs, "/attributes", "text_b");
            self.image_prompts(attrs, "/attributes", "image_prompts_a");
            self.image_prompts(attrs, "/attributes", "image_prompts_b");
        }
        if let Some(targets) = self
            .field(root, "", "targets")
            .and_then(|v| self.array(v, "/targets"))
        {
            if targets.is_empty() {
                self.fail("/targets", "must list at least one target");
            }
            let mut ids = HashSet::new();
            for (i, t) in targets.iter().enumerate() {
                self.target(t, &format!("/targets/{i}"), &mut ids);
            }
        }
    }
}

/// Parses and validates a manifest document.
///
/// Syntax errors carry a line and column; schema problems are collected and
/// reported together.
pub fn load_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ManifestError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut checker = Checker::default();
    checker.manifest(&doc);
    if !checker.errors.is_empty() {
        return Err(ManifestError::SchemaViolation(checker.errors));
    }
    serde_json::from_value(doc).map_err(|e| {
        ManifestError::SchemaViolation(vec![FieldError {
            path: String::new(),
            message: e.to_string(),
        }])
    })
}
