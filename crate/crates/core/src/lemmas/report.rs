use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

/// Version of the NDJSON check-report schema.
pub const REPORT_SCHEMA: u32 = 1;

/// Slack granted to inequalities that hold exactly on every instance.
pub const THEOREM_TOL: f64 = 1e-9;

/// One measured constant with the formula that defines it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measured {
    pub name: String,
    /// Non-finite values serialise as `null`.
    pub value: f64,
    pub formula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub schema: u32,
    pub check: String,
    pub params: Map<String, Value>,
    pub measured: Vec<Measured>,
    pub pass: bool,
    /// Signed distance to failure in the check's own units; negative on
    /// failure.
    pub margin: f64,
    pub samples: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(check: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            check: check.to_string(),
            params: Map::new(),
            measured: Vec::new(),
            pass: false,
            margin: f64::NAN,
            samples: 0,
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).expect("parameters serialise"),
        );
        self
    }

    pub fn measure(&mut self, name: &str, value: f64, formula: &str) {
        self.measured.push(Measured {
            name: name.to_string(),
            value,
            formula: formula.to_string(),
        });
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn verdict(mut self, pass: bool, margin: f64) -> Self {
        self.pass = pass;
        self.margin = margin;
        self
    }

    /// Value of a measured quantity by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.measured
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.value)
    }
}

/// Write reports as newline-delimited JSON. Returns whether all passed.
pub fn write_ndjson<W: Write>(reports: &[CheckReport], mut w: W) -> std::io::Result<bool> {
    for r in reports {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(reports.iter().all(|r| r.pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_one_line_per_report() {
        let mut a = CheckReport::new("a").param("r", 8.0);
        a.measure("c", f64::INFINITY, "sup / inf");
        let a = a.verdict(false, -1.0);
        let b = CheckReport::new("b").verdict(true, 0.5);
        let mut out = Vec::new();
        let all = write_ndjson(&[a, b], &mut out).unwrap();
        assert!(!all);
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["check"], "a");
        assert!(v["measured"][0]["value"].is_null());
        assert_eq!(v["schema"], REPORT_SCHEMA);
    }
}
