use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use stoqlift::RMatrix;

/// One pass/fail entry. `residual` is the quantity compared against `limit`.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Rows of `m`, columns named `c0`, `c1`, ...
    pub fn matrix(m: &RMatrix<f64>) -> Self {
        Self {
            columns: (0..m.ncols()).map(|c| format!("c{c}")).collect(),
            rows: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// How `seed` drives the random draws.
    pub rng: String,
    /// SHA-256 of each input file, keyed by the flag that named it.
    pub inputs: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub tables: BTreeMap<String, Table>,
    pub artifacts: BTreeMap<String, Value>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            rng: "ChaCha8 stream seeded with seed_from_u64(seed)".to_string(),
            inputs: BTreeMap::new(),
            verdicts: Vec::new(),
            tables: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn verdict(&mut self, name: &str, pass: bool) -> &mut Verdict {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            pass,
            residual: None,
            limit: None,
            detail: None,
        });
        self.verdicts.last_mut().expect("just pushed")
    }

    pub fn check(&mut self, name: &str, residual: f64, limit: f64) -> bool {
        let pass = residual <= limit;
        let v = self.verdict(name, pass);
        v.residual = Some(residual);
        v.limit = Some(limit);
        pass
    }

    pub fn note(&mut self, name: &str, pass: bool, detail: impl Into<String>) -> bool {
        self.verdict(name, pass).detail = Some(detail.into());
        pass
    }

    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.to_string(), table);
    }

    pub fn artifact<S: Serialize>(&mut self, name: &str, value: &S) {
        let value = serde_json::to_value(value).expect("plain data serializes");
        self.artifacts.insert(name.to_string(), value);
    }

    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{}: {}\n", self.command, if self.pass() { "PASS" } else { "FAIL" });
        for v in &self.verdicts {
            out.push_str(&format!("  [{}] {}", if v.pass { "ok" } else { "FAIL" }, v.name));
            if let Some(r) = v.residual {
                out.push_str(&format!(" residual={r:.3e}"));
            }
            if let Some(l) = v.limit {
                out.push_str(&format!(" limit={l:.1e}"));
            }
            if let Some(d) = &v.detail {
                out.push_str(&format!(" ({d})"));
            }
            out.push('\n');
        }
        out
    }
}
