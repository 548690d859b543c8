//! Report rendering. JSON carries full precision with sorted keys; CSV and
//! Markdown print four decimals.

use std::fmt::Write as _;

use super::{AuditResult, CategoryStats, Stat};
use crate::scores::ComponentKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            "md" | "markdown" => Some(Self::Markdown),
            _ => None,
        }
    }
}

fn fixed(x: f64) -> String {
    format!("{x:.4}")
}

pub fn render(result: &AuditResult, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => render_json(result),
        ReportFormat::Csv => render_csv(result),
        ReportFormat::Markdown => render_markdown(result).into_bytes(),
    }
}

fn render_json(result: &AuditResult) -> Vec<u8> {
    // Round-tripping through Value sorts every object's keys.
    let value = serde_json::to_value(result).expect("audit result serializes");
    let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
    out.push(b'\n');
    out
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn stat_fields(stat: Option<Stat>) -> [String; 3] {
    match stat {
        Some(s) => [fixed(s.avg_bias), fixed(s.stddev), s.n.to_string()],
        None => [String::new(), String::new(), "0".to_owned()],
    }
}

fn render_csv(result: &AuditResult) -> Vec<u8> {
    let mut targets = csv_writer();
    targets
        .write_record(["target_id", "category", "expected", "II", "ITP", "ITA", "TT", "MCAS"])
        .expect("write to memory");
    for t in &result.per_target {
        let c = &t.score.components;
        let mut row = vec![
            t.score.target_id.clone(),
            t.category.to_string(),
            t.expected.to_string(),
        ];
        row.extend(ComponentKind::ALL.iter().map(|&k| fixed(c.get(k))));
        row.push(fixed(t.score.mcas));
        targets.write_record(&row).expect("write to memory");
    }

    let mut stats = csv_writer();
    stats
        .write_record(["category", "partition", "avg_bias", "stddev", "n"])
        .expect("write to memory");
    let rows = result
        .per_category
        .iter()
        .map(|(c, s)| (c.as_str(), s))
        .chain([("all categories", &result.overall)]);
    for (name, s) in rows {
        for (partition, stat) in [
            ("male_expected", s.male_expected),
            ("female_expected", s.female_expected),
            ("all_terms", s.all_terms),
        ] {
            let [avg, sd, n] = stat_fields(stat);
            stats
                .write_record([name, partition, &avg, &sd, &n])
                .expect("write to memory");
        }
    }

    let mut out = targets.into_inner().expect("flush to memory");
    out.push(b'\n');
    out.extend(stats.into_inner().expect("flush to memory"));
    out
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Category statistics as a Markdown table: standard deviation then average
/// bias for male-expected terms, female-expected terms and all terms.
pub fn render_category_table(rows: &[(String, CategoryStats)]) -> String {
    let mut out = String::new();
    out.push_str(
        "| Category | Male-bias terms: Std. Dev. | Male-bias terms: Avg. Bias \
         | Female-bias terms: Std. Dev. | Female-bias terms: Avg. Bias \
         | All terms: Std. Dev. | All terms: Avg. Bias |\n",
    );
    out.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
    for (name, s) in rows {
        write!(out, "| {} ", md_escape(name)).expect("write to String");
        for stat in [s.male_expected, s.female_expected, s.all_terms] {
            match stat {
                Some(st) => write!(out, "| {} | {} ", fixed(st.stddev), fixed(st.avg_bias)),
                None => write!(out, "| - | - "),
            }
            .expect("write to String");
        }
        out.push_str("|\n");
    }
    out
}

fn render_markdown(result: &AuditResult) -> String {
    let mut out = String::new();
    out.push_str("# MCAS audit report\n\n");
    writeln!(out, "- Embedding model: `{}`", result.model_id).expect("write to String");
    writeln!(out, "- Manifest: `{}`", result.manifest_digest).expect("write to String");
    writeln!(out, "- Targets: {}\n", result.per_target.len()).expect("write to String");
    out.push_str(
        "Positive scores lean towards attribute side A, negative towards side B.\n\n",
    );

    out.push_str("## Per-target scores\n\n");
    out.push_str("| Target | Category | Expected | II | ITP | ITA | TT | MCAS |\n");
    out.push_str("|---|---|---|---:|---:|---:|---:|---:|\n");
    for t in &result.per_target {
        let c = &t.score.components;
        write!(
            out,
            "| {} | {} | {} ",
            md_escape(&t.score.target_id),
            t.category,
            t.expected
        )
        .expect("write to String");
        for k in ComponentKind::ALL {
            write!(out, "| {} ", fixed(c.get(k))).expect("write to String");
        }
        writeln!(out, "| {} |", fixed(t.score.mcas)).expect("write to String");
    }

    out.push_str("\n## Category statistics\n\n");
    let rows: Vec<(String, CategoryStats)> = result
        .per_category
        .iter()
        .map(|(c, s)| (capitalize(c.as_str()), *s))
        .chain([("All categories".to_owned(), result.overall)])
        .collect();
    out.push_str(&render_category_table(&rows));
    out
}

/// Bar-chart source data: `category,target_id,mcas`, sorted by category and
/// then by descending MCAS.
pub fn emit_chart_data(result: &AuditResult) -> Vec<u8> {
    let mut rows: Vec<_> = result.per_target.iter().collect();
    rows.sort_by(|a, b| {
        a.category
            .cmp(&b.category)
            .then(b.score.mcas.total_cmp(&a.score.mcas))
            .then_with(|| a.score.target_id.cmp(&b.score.target_id))
    });
    let mut w = csv_writer();
    w.write_record(["category", "target_id", "mcas"])
        .expect("write to memory");
    for t in rows {
        w.write_record([t.category.as_str(), &t.score.target_id, &fixed(t.score.mcas)])
            .expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}
