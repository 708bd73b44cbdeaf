//! Convergence reports and the verdict rule.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Monte Carlo bookkeeping carried in a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub seed: u64,
    pub replicates: usize,
    pub sample_sizes: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub index_values: Vec<f64>,
    pub metric: String,
    pub values: Vec<f64>,
    pub mc: McRecord,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub notes: String,
}

/// How a trace must behave along the index ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceRule {
    /// Exact evaluation: strictly decreasing, no inversions.
    Exact,
    /// Monte Carlo trace: at most one rise, smaller than `band`.
    Noisy { band: f64 },
}

/// Standard deviation of the Kolmogorov limit law, used to size the noise band
/// of a KS statistic over `R` replicates as `KS_SD / √R`.
pub const KS_SD: f64 = 0.2603;

/// Applies the trace rule and the final-value tolerance.
pub fn verdict(values: &[f64], tolerance: f64, rule: TraceRule) -> Verdict {
    let Some(&last) = values.last() else {
        return Verdict::Fail;
    };
    if !(last <= tolerance) {
        return Verdict::Fail;
    }
    let mut inversions = 0;
    for w in values.windows(2) {
        let ok = match rule {
            TraceRule::Exact => w[1] < w[0],
            TraceRule::Noisy { .. } => w[1] <= w[0],
        };
        if ok {
            continue;
        }
        match rule {
            TraceRule::Exact => return Verdict::Fail,
            TraceRule::Noisy { band } => {
                inversions += 1;
                if inversions > 1 || w[1] - w[0] >= band {
                    return Verdict::Fail;
                }
            }
        }
    }
    Verdict::Pass
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One `(index, value)` row per index value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", self.metric.as_str()])?;
        for (i, v) in self.index_values.iter().zip(&self.values) {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Points `(index, x, F_n(x), F(x))` for overlay plots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CdfOverlay {
    pub rows: Vec<[f64; 4]>,
}

impl CdfOverlay {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "x", "F_n", "F"])?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rule_needs_strict_decrease() {
        assert_eq!(
            verdict(&[0.3, 0.2, 0.1], 0.1, TraceRule::Exact),
            Verdict::Pass
        );
        assert_eq!(
            verdict(&[0.3, 0.3, 0.1], 0.1, TraceRule::Exact),
            Verdict::Fail
        );
        assert_eq!(
            verdict(&[0.3, 0.2, 0.11], 0.1, TraceRule::Exact),
            Verdict::Fail
        );
        assert_eq!(verdict(&[], 0.1, TraceRule::Exact), Verdict::Fail);
    }

    #[test]
    fn noisy_rule_allows_one_small_rise() {
        let rule = TraceRule::Noisy { band: 0.01 };
        assert_eq!(verdict(&[0.3, 0.05, 0.055], 0.1, rule), Verdict::Pass);
        assert_eq!(verdict(&[0.3, 0.05, 0.07], 0.1, rule), Verdict::Fail);
        assert_eq!(
            verdict(&[0.05, 0.055, 0.05, 0.052], 0.1, rule),
            Verdict::Fail
        );
        assert_eq!(verdict(&[0.3, 0.2, f64::NAN], 0.1, rule), Verdict::Fail);
    }

    #[test]
    fn report_serializes_with_lowercase_verdict() {
        let r = ConvergenceReport {
            scenario: "X".into(),
            index_values: vec![1.0, 2.0],
            metric: "tv".into(),
            values: vec![0.5, 0.25],
            mc: McRecord {
                seed: 7,
                replicates: 0,
                sample_sizes: vec![],
            },
            tolerance: 0.3,
            verdict: Verdict::Pass,
            notes: String::new(),
        };
        let js = r.to_json().unwrap();
        assert!(js.contains("\"verdict\": \"pass\""));
        let back: ConvergenceReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,tv\n1,0.5\n2,0.25\n");
    }
}
