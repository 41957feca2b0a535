use serde::{Deserialize, Serialize};

/// One reduced-model versus 2D comparison at a sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub kappa: f64,
    /// `1d` or `mapdd`.
    pub method: String,
    pub max_diff: f64,
    pub l2_diff: f64,
    /// `max_diff` over the port concentration range.
    pub relative_max: f64,
    pub peclet_2d: f64,
    pub dof_2d: usize,
    pub dof_reduced: usize,
    pub runtime_2d_s: f64,
    pub runtime_reduced_s: f64,
    /// Whether the agreement band applies to this row.
    pub checked: bool,
    pub within_band: bool,
}

/// Named pass/fail quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value >= limit }
    }

    /// Boolean check reported as 1/0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, limit: 1.0, pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub band: f64,
    pub rows: Vec<ComparisonRow>,
    pub checks: Vec<Check>,
    /// Scenario-specific tables (convergence errors, cell constants, ...).
    pub details: serde_json::Value,
    pub runtime_s: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| !r.checked || r.within_band) && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .rows
            .iter()
            .filter(|r| r.checked && !r.within_band)
            .map(|r| format!("{} at kappa {}: {:.3e} of range exceeds band {:.3e}", r.method, r.kappa, r.relative_max, self.band))
            .collect();
        out.extend(self.checks.iter().filter(|c| !c.pass).map(|c| format!("{}: {:.6e} (limit {:.6e})", c.name, c.value, c.limit)));
        out
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ComparisonRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
