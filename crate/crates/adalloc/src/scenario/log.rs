//! Time-indexed run records and their CSV export.

use std::io::Write;
use std::path::Path;

use super::config::PlantKind;

/// One record per control step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
    pub x_r: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub lambda: Vec<f64>,
    pub w_hat: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub e_s: Vec<f64>,
    pub foo_u_norm: f64,
    pub foo_lambda_norm: f64,
    pub slacks: Vec<f64>,
    /// Levenberg shift used this step (zero when the solve was clean).
    pub reg_mu: f64,
}

impl LogRow {
    fn values(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.z);
        v.extend_from_slice(&self.x_hat);
        v.extend_from_slice(&self.z_hat);
        v.extend_from_slice(&self.x_r);
        v.extend_from_slice(&self.u_bar);
        v.extend_from_slice(&self.lambda);
        v.extend_from_slice(&self.w_hat);
        v.extend_from_slice(&self.w_tilde);
        v.extend_from_slice(&self.e_s);
        v.push(self.foo_u_norm);
        v.push(self.foo_lambda_norm);
        v.extend_from_slice(&self.slacks);
        v.push(self.reg_mu);
        v
    }
}

/// A complete run: uniform time grid, no missing steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub plant: PlantKind,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn new(plant: PlantKind) -> Self {
        Self {
            plant,
            rows: Vec::new(),
        }
    }

    /// Column names, fixed per plant. State columns first, then predictor,
    /// reference, input, multiplier, parameter, and diagnostic columns.
    pub fn header(&self) -> Vec<String> {
        let (state, inputs, n_w, n_lambda, n_slack): (&[&str], &[&str], usize, usize, usize) =
            match self.plant {
                PlantKind::Quadplane => (
                    &["px", "pz", "vx", "vz", "theta", "omega"],
                    &["u_f", "u_r", "u_p", "u_e", "vartheta"],
                    9,
                    3,
                    10,
                ),
                PlantKind::Quadrotor => (
                    &["px", "py", "vx", "vy", "theta", "omega"],
                    &["u_1", "u_2", "u_3", "vartheta"],
                    0,
                    3,
                    8,
                ),
            };
        let mut h: Vec<String> = vec!["t".into()];
        h.extend(state.iter().map(|s| s.to_string()));
        let slow: Vec<&&str> = state.iter().take(4).collect();
        h.extend(slow.iter().map(|s| format!("xhat_{s}")));
        h.extend(state.iter().skip(4).map(|s| format!("zhat_{s}")));
        h.extend(slow.iter().map(|s| format!("xr_{s}")));
        h.extend(inputs.iter().map(|s| s.to_string()));
        h.extend((1..=n_lambda).map(|i| format!("lambda_{i}")));
        h.extend((1..=n_w).map(|i| format!("what_{i}")));
        h.extend((1..=n_w).map(|i| format!("wtilde_{i}")));
        h.extend((1..=6).map(|i| format!("es_{i}")));
        h.push("foo_u_norm".into());
        h.push("foo_lambda_norm".into());
        h.extend((1..=n_slack).map(|i| format!("slack_{i}")));
        h.push("reg_mu".into());
        h
    }

    /// Serialize to CSV with floats at 17 significant digits (bit-exact
    /// round trips).
    pub fn to_csv(&self) -> String {
        let header = self.header();
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.rows {
            let vals = row.values();
            assert_eq!(
                vals.len(),
                header.len(),
                "log row width {} does not match header {}",
                vals.len(),
                header.len()
            );
            let mut first = true;
            for v in vals {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format!("{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Write the run log to `path`, surfacing the path in any I/O failure.
pub fn export_csv(log: &RunLog, path: &Path) -> Result<(), String> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    file.write_all(log.to_csv().as_bytes())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Parse a CSV produced by [`export_csv`] back into raw columns.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| "empty CSV".to_string())?
        .split(',')
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| format!("row {i}: {e}")))
            .collect::<Result<Vec<f64>, _>>()?;
        if row.len() != header.len() {
            return Err(format!("row {i} has {} fields, expected {}", row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
