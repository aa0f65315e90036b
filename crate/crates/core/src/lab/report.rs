//! Report rows and their CSV/JSON renderings.
//!
//! CSV layout: `#`-prefixed header lines (`command`, `version`, `seed`,
//! `config`), then the fixed column row
//! `name,operation,anchor,relation,claimed,measured,margin,pass,detail`,
//! then one line per row and a trailing `# summary` line. Floats use 17
//! significant digits. The JSON object carries the same rows in order.

use std::fmt::Write as _;

use serde::Serialize;

pub const CSV_COLUMNS: &str = "name,operation,anchor,relation,claimed,measured,margin,pass,detail";

/// Direction of a check. `margin` is positive on the good side; a check
/// passes when `margin ≥ -slack`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured ≤ claimed`.
    AtMost,
    /// `measured ≥ claimed`.
    AtLeast,
    /// `measured < claimed`.
    Below,
    /// `measured > claimed`.
    Above,
    /// A yes/no outcome: measured is 1 or 0, claimed is 1.
    Holds,
    /// Recorded value, not a check.
    Info,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
            Relation::Above => ">",
            Relation::Holds => "holds",
            Relation::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    /// Library operation that produced the value.
    pub operation: String,
    /// Mathematical statement the row checks.
    pub anchor: String,
    pub relation: Relation,
    pub claimed: f64,
    pub measured: f64,
    pub margin: f64,
    pub pass: bool,
    pub detail: String,
}

impl Row {
    fn base(name: impl Into<String>, operation: &str, anchor: &str, relation: Relation) -> Self {
        Row {
            name: name.into(),
            operation: operation.into(),
            anchor: anchor.into(),
            relation,
            claimed: 0.0,
            measured: 0.0,
            margin: 0.0,
            pass: true,
            detail: String::new(),
        }
    }

    fn compared(name: impl Into<String>, op: &str, anchor: &str, rel: Relation, measured: f64, claimed: f64, slack: f64) -> Self {
        let margin = match rel {
            Relation::AtMost | Relation::Below => claimed - measured,
            _ => measured - claimed,
        };
        let pass = match rel {
            Relation::AtMost | Relation::AtLeast => margin >= -slack,
            _ => margin > slack,
        };
        Row { claimed, measured, margin, pass, ..Self::base(name, op, anchor, rel) }
    }

    pub fn at_most(name: impl Into<String>, op: &str, anchor: &str, measured: f64, claimed: f64, slack: f64) -> Self {
        Self::compared(name, op, anchor, Relation::AtMost, measured, claimed, slack)
    }

    pub fn at_least(name: impl Into<String>, op: &str, anchor: &str, measured: f64, claimed: f64, slack: f64) -> Self {
        Self::compared(name, op, anchor, Relation::AtLeast, measured, claimed, slack)
    }

    /// Strict `measured < claimed` with the gap required to exceed `slack`.
    pub fn below(name: impl Into<String>, op: &str, anchor: &str, measured: f64, claimed: f64, slack: f64) -> Self {
        Self::compared(name, op, anchor, Relation::Below, measured, claimed, slack)
    }

    pub fn above(name: impl Into<String>, op: &str, anchor: &str, measured: f64, claimed: f64, slack: f64) -> Self {
        Self::compared(name, op, anchor, Relation::Above, measured, claimed, slack)
    }

    pub fn holds(name: impl Into<String>, op: &str, anchor: &str, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Row { claimed: 1.0, measured: v, margin: v - 1.0, pass: ok, ..Self::base(name, op, anchor, Relation::Holds) }
    }

    pub fn info(name: impl Into<String>, op: &str, anchor: &str, measured: f64) -> Self {
        Row { measured, claimed: measured, ..Self::base(name, op, anchor, Relation::Info) }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Forces a failure, e.g. when a dependent computation errored.
    pub fn failed(mut self) -> Self {
        self.pass = false;
        self
    }

    pub fn is_check(&self) -> bool {
        self.relation != Relation::Info
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Canonical JSON of the effective configuration.
    pub config: String,
    pub rows: Vec<Row>,
    pub summary: Summary,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: String, rows: Vec<Row>) -> Self {
        let checks = rows.iter().filter(|r| r.is_check()).count();
        let passed = rows.iter().filter(|r| r.is_check() && r.pass).count();
        Report {
            command: command.into(),
            version: crate::VERSION.into(),
            seed,
            config,
            summary: Summary { rows: rows.len(), checks, passed, failed: checks - passed },
            rows,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# version: {}", self.version);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# config: {}", self.config);
        out.push_str(CSV_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                csv_field(&r.name),
                csv_field(&r.operation),
                csv_field(&r.anchor),
                r.relation.symbol(),
                num(r.claimed),
                num(r.measured),
                num(r.margin),
                r.pass,
                csv_field(&r.detail)
            );
        }
        let s = &self.summary;
        let _ = writeln!(out, "# summary: rows={} checks={} passed={} failed={}", s.rows, s.checks, s.passed, s.failed);
        out
    }
}

/// 17 significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
