//! CSV emission and parsing. Reals are written with 17 significant digits
//! in scientific notation ('.' decimal, locale-free), so identical runs
//! produce byte-identical files and values round-trip exactly.

use std::fs;
use std::path::Path;

use dmfw::metrics::MetricsSeries;

pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_metrics_csv(path: &Path, series: &MetricsSeries<f64>) -> std::io::Result<()> {
    let mut out = String::from(
        "t,mean_loss,mean_loss_running,mean_gap,mean_gap_running,max_gap_agents,oracle_regret\n",
    );
    for r in &series.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t,
            fmt_real(r.mean_loss),
            fmt_real(r.mean_loss_running),
            fmt_real(r.mean_gap),
            fmt_real(r.mean_gap_running),
            fmt_real(r.max_gap_agents),
            fmt_real(r.oracle_regret_snapshot),
        ));
    }
    fs::write(path, out)
}

/// Per-inner-iteration diagnostics aggregated over rounds: consensus and
/// tracking envelopes (max over t) and the mean variance-reduction error.
pub fn write_diagnostics_csv(path: &Path, series: &MetricsSeries<f64>) -> std::io::Result<()> {
    let dp = series.delta_p_envelope();
    let dd = series.delta_d_envelope();
    let vr = series.vr_error_mean();
    let mut out = String::from("ell,delta_p,delta_d,vr_error\n");
    for (k, &p) in dp.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            k + 1,
            fmt_real(p),
            fmt_real(dd.get(k).copied().unwrap_or(f64::NAN)),
            fmt_real(vr.get(k).copied().unwrap_or(f64::NAN)),
        ));
    }
    fs::write(path, out)
}

pub fn write_constants_csv(path: &Path, series: &MetricsSeries<f64>) -> std::io::Result<()> {
    let c = &series.constants;
    let out = format!(
        "diameter,beta,g_lip,lambda2,cp_fit,cd_fit,b_bound,q_bound\n{},{},{},{},{},{},{},{}\n",
        fmt_real(c.diameter),
        fmt_real(c.beta),
        fmt_real(c.g_lip),
        fmt_real(c.lambda2),
        fmt_real(c.cp_fit),
        fmt_real(c.cd_fit),
        fmt_real(c.b_bound),
        fmt_real(c.q_bound),
    );
    fs::write(path, out)
}

/// A parsed CSV with named columns of f64 values.
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, String> {
        let text =
            fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut lines = text.lines();
        let headers: Vec<String> = lines
            .next()
            .ok_or_else(|| format!("{} is empty", path.display()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| format!("{} line {}: {e}", path.display(), lineno + 2))?;
            if row.len() != headers.len() {
                return Err(format!(
                    "{} line {}: {} fields, expected {}",
                    path.display(),
                    lineno + 2,
                    row.len(),
                    headers.len()
                ));
            }
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, String> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column {name:?}"))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, 1e-17, 123456.789, -0.0, f64::MIN_POSITIVE] {
            let s = fmt_real(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v, back, "{s}");
        }
        assert_eq!(fmt_real(f64::NAN), "nan");
        assert!("nan".parse::<f64>().unwrap().is_nan());
    }
}
