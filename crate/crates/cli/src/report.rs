//! Report assembly and rendering (table, JSON, CSV).

use factshap::approx::{Estimate, TrialRecord};
use serde::Serialize;

use crate::run::ClassificationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

/// Shortest-roundtrip double rendering capped at 15 significant digits.
pub fn render_double(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        return format!("{x:.0}");
    }
    let s = format!("{x:.15e}");
    // prettify plain magnitudes, keep scientific for extremes
    if x.abs() >= 1e-4 && x.abs() < 1e15 {
        let mut plain = format!("{x:.15}");
        while plain.ends_with('0') {
            plain.pop();
        }
        if plain.ends_with('.') {
            plain.pop();
        }
        plain
    } else {
        s
    }
}

#[derive(Serialize)]
pub struct ConfigBlock {
    pub method_requested: String,
    pub method_resolved: String,
    pub fallback: bool,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials_override: Option<u64>,
    pub prefer_exact: bool,
}

#[derive(Serialize)]
pub struct FactRow {
    pub fact: String,
    pub index: usize,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rational: Option<String>,
    pub double: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<Estimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trials_log: Vec<TrialRecord>,
}

#[derive(Serialize)]
pub struct ClassificationBlock {
    pub kind: String,
    pub boolean: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_join_free: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchical: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<usize>>>,
    pub exact_available: bool,
    pub methods: Vec<String>,
}

impl From<ClassificationReport> for ClassificationBlock {
    fn from(r: ClassificationReport) -> Self {
        ClassificationBlock {
            kind: r.kind,
            boolean: r.boolean,
            self_join_free: r.classification.as_ref().map(|c| c.self_join_free),
            hierarchical: r.classification.as_ref().map(|c| c.hierarchical),
            components: r.classification.map(|c| c.components),
            exact_available: r.exact_available,
            methods: r.methods,
        }
    }
}

#[derive(Serialize)]
pub struct RunReport {
    pub query: String,
    pub measure: String,
    pub classification: ClassificationBlock,
    pub config: ConfigBlock,
    pub facts: Vec<FactRow>,
    pub timing_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<serde_json::Value>,
}

impl RunReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serializes"),
            Format::Csv => self.render_csv(),
            Format::Table => self.render_table(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::from("fact,index,method,rational,double,trials,epsilon,delta,seed\n");
        for row in &self.facts {
            let (trials, eps, delta, seed) = match &row.estimate {
                Some(e) => (
                    e.trials.to_string(),
                    e.epsilon.to_string(),
                    e.delta.to_string(),
                    e.seed.to_string(),
                ),
                None => (String::new(), String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                csv_quote(&row.fact),
                row.index,
                row.method,
                row.rational.clone().unwrap_or_default(),
                render_double(row.double),
                trials,
                eps,
                delta,
                seed,
            ));
        }
        out
    }

    fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("query:   {}\n", self.query));
        out.push_str(&format!("measure: {}\n", self.measure));
        out.push_str(&format!(
            "class:   {}\n",
            classification_line(&self.classification)
        ));
        out.push_str(&format!(
            "method:  {} (requested {}{})\n",
            self.config.method_resolved,
            self.config.method_requested,
            if self.config.fallback {
                ", fallback"
            } else {
                ""
            },
        ));
        if self.facts.iter().any(|r| r.estimate.is_some()) {
            out.push_str(&format!(
                "sampler: epsilon={} delta={} seed={}\n",
                self.config.epsilon, self.config.delta, self.config.seed
            ));
        }
        let widths = (
            self.facts
                .iter()
                .map(|r| r.fact.len())
                .max()
                .unwrap_or(4)
                .max(4),
            self.facts
                .iter()
                .map(|r| r.method.len())
                .max()
                .unwrap_or(6)
                .max(6),
            self.facts
                .iter()
                .map(|r| r.rational.as_deref().unwrap_or("-").len())
                .max()
                .unwrap_or(5)
                .max(5),
        );
        out.push_str(&format!(
            "{:<w0$}  {:<w1$}  {:<w2$}  {}\n",
            "FACT",
            "METHOD",
            "VALUE",
            "DOUBLE",
            w0 = widths.0,
            w1 = widths.1,
            w2 = widths.2,
        ));
        for row in &self.facts {
            out.push_str(&format!(
                "{:<w0$}  {:<w1$}  {:<w2$}  {}\n",
                row.fact,
                row.method,
                row.rational.as_deref().unwrap_or("-"),
                render_double(row.double),
                w0 = widths.0,
                w1 = widths.1,
                w2 = widths.2,
            ));
        }
        for row in &self.facts {
            if let Some(e) = &row.estimate {
                out.push_str(&format!(
                    "estimate {}: point={} trials={} (epsilon={}, delta={}, seed={}, {})\n",
                    row.fact,
                    render_double(e.point),
                    e.trials,
                    e.epsilon,
                    e.delta,
                    e.seed,
                    row.method,
                ));
            }
            if !row.trials_log.is_empty() {
                out.push_str(&format!(
                    "  first {} trials: {}\n",
                    row.trials_log.len(),
                    row.trials_log
                        .iter()
                        .map(|t| match (t.success, t.marginal) {
                            (Some(true), _) => "S".to_string(),
                            (Some(false), _) => "f".to_string(),
                            (_, Some(m)) => render_double(m),
                            _ => "?".to_string(),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                ));
            }
        }
        if let Some(trace) = &self.trace {
            out.push_str("trace:\n");
            out.push_str(&serde_json::to_string_pretty(trace).expect("trace serializes"));
            out.push('\n');
        }
        out.push_str(&format!("elapsed: {:.3} ms\n", self.timing_ms));
        out
    }
}

pub fn classification_line(c: &ClassificationBlock) -> String {
    let mut parts = vec![c.kind.clone()];
    if let Some(sjf) = c.self_join_free {
        parts.push(if sjf {
            "self-join-free".into()
        } else {
            "self-joins".into()
        });
    }
    if let Some(h) = c.hierarchical {
        parts.push(if h {
            "hierarchical".into()
        } else {
            "non-hierarchical".into()
        });
    }
    if !c.exact_available {
        parts.push("exact unavailable".into());
    }
    format!("{}; methods: {}", parts.join(", "), c.methods.join(", "))
}

fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// --- compare ---

#[derive(Serialize)]
pub struct CompareColumn {
    pub token: String,
    pub measure: String,
    pub method: String,
}

#[derive(Serialize)]
pub struct CompareRow {
    pub fact: String,
    pub index: usize,
    pub doubles: Vec<f64>,
    pub rationals: Vec<Option<String>>,
    /// absolute deviation from the first (reference) column
    pub deviations: Vec<f64>,
}

#[derive(Serialize)]
pub struct CompareReport {
    pub query: String,
    pub columns: Vec<CompareColumn>,
    pub rows: Vec<CompareRow>,
    pub max_deviation: Vec<f64>,
    pub timing_ms: f64,
}

impl CompareReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serializes"),
            Format::Csv => {
                let mut out = String::from("fact");
                for c in &self.columns {
                    out.push_str(&format!(",{}", c.token));
                }
                for c in &self.columns[1..] {
                    out.push_str(&format!(",dev:{}", c.token));
                }
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&csv_quote(&row.fact));
                    for v in &row.doubles {
                        out.push_str(&format!(",{}", render_double(*v)));
                    }
                    for d in &row.deviations[1..] {
                        out.push_str(&format!(",{}", render_double(*d)));
                    }
                    out.push('\n');
                }
                out
            }
            Format::Table => {
                let mut out = String::new();
                out.push_str(&format!("query: {}\n", self.query));
                let w = self
                    .rows
                    .iter()
                    .map(|r| r.fact.len())
                    .max()
                    .unwrap_or(4)
                    .max(4);
                out.push_str(&format!("{:<w$}", "FACT"));
                for c in &self.columns {
                    out.push_str(&format!("  {:>18}", c.token));
                }
                for c in &self.columns[1..] {
                    out.push_str(&format!("  {:>14}", format!("dev:{}", c.token)));
                }
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&format!("{:<w$}", row.fact));
                    for (i, v) in row.doubles.iter().enumerate() {
                        let shown = match &row.rationals[i] {
                            Some(r) => r.clone(),
                            None => render_double(*v),
                        };
                        out.push_str(&format!("  {shown:>18}"));
                    }
                    for d in &row.deviations[1..] {
                        out.push_str(&format!("  {:>14}", render_double(*d)));
                    }
                    out.push('\n');
                }
                out.push_str(&format!(
                    "max deviation per column: {}\n",
                    self.max_deviation
                        .iter()
                        .map(|d| render_double(*d))
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
                out.push_str(&format!("elapsed: {:.3} ms\n", self.timing_ms));
                out
            }
        }
    }
}
