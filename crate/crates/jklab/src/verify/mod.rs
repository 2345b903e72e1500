//! Numerical checkers for heat-kernel bounds and the conditions of the
//! stability theory.
//!
//! Every checker returns a [`ConditionVerdict`]: the fitted constants, a
//! worst-case statistic and a pass flag decided only by the threshold passed
//! in. Scalar conditions are checked for stability across scales: a
//! normalized quantity `q(r)` is computed over a set of radii and the
//! statistic is `max q / min q`.

mod conditions;
mod corridor;
mod harnack;

pub use conditions::{
    check_capacity_scaling, check_cutoff_energy, check_exit_monte_carlo, check_exit_probability, check_exit_scaling,
    check_faber_krahn, check_laplace_exponent, check_poincare, check_tail_integral, check_ujs, laplace_reference,
    poincare_constant, ujs_counterexample, volume_verdicts, PoincareConstant,
};
pub use corridor::{
    corridor_profile, corridor_samples, dilation_grid, fit_corridor, CorridorReport, CorridorSample,
};
pub use harnack::{check_phi_harnack, HarnackCylinder, HarnackScale};

use crate::space::FiniteMetricMeasureSpace;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

/// Default worst-ratio threshold for heat-kernel corridors.
pub const CORRIDOR_THRESHOLD: f64 = 100.0;

/// Default `max/min` threshold for scalar constants across scales.
pub const STABILITY_THRESHOLD: f64 = 10.0;

/// One scale of a stability scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleSample {
    pub radius: f64,
    pub value: f64,
}

/// Outcome of one condition check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub constants: BTreeMap<String, f64>,
    pub worst_ratio: f64,
    pub domain: String,
    pub pass: bool,
    pub seed: Option<u64>,
    pub threshold: f64,
    pub samples: Vec<ScaleSample>,
    pub notes: Vec<String>,
}

impl ConditionVerdict {
    /// Verdict for a normalized scan: the statistic is `max/min` of the
    /// sample values and the constants are their extremes.
    pub fn from_scan(condition: &str, domain: String, samples: Vec<ScaleSample>, threshold: f64) -> Self {
        let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let worst_ratio = spread(&values);
        let mut constants = BTreeMap::new();
        constants.insert("c_min".to_string(), values.iter().copied().fold(f64::INFINITY, f64::min));
        constants.insert("c_max".to_string(), values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        Self {
            condition: condition.to_string(),
            constants,
            worst_ratio,
            domain,
            pass: worst_ratio <= threshold,
            seed: None,
            threshold,
            samples,
            notes: Vec::new(),
        }
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Force a failure, recording why.
    pub fn failed(mut self, note: impl Into<String>) -> Self {
        self.pass = false;
        self.notes.push(note.into());
        self
    }
}

/// `max/min` of positive finite values; infinite otherwise.
pub fn spread(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return f64::INFINITY;
    }
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Error unless every radius (times `factor`) is within the diameter/4 guard.
pub(crate) fn guard_all(space: &FiniteMetricMeasureSpace, radii: &[f64], factor: f64) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Invalid("no radii to scan".into()));
    }
    for &r in radii {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Invalid(format!("radius must be positive, got {r}")));
        }
        space.check_guard(r * factor)?;
    }
    Ok(())
}

pub(crate) fn radii_label(radii: &[f64]) -> String {
    let parts: Vec<String> = radii.iter().map(|r| format!("{r}")).collect();
    format!("r in {{{}}}", parts.join(","))
}

/// CSV summary with one row per verdict:
/// `condition,worst_ratio,threshold,pass,seed,domain`.
pub fn write_verdicts_csv<W: Write>(verdicts: &[ConditionVerdict], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(["condition", "worst_ratio", "threshold", "pass", "seed", "domain"])
        .map_err(csv_err)?;
    for v in verdicts {
        w.write_record([
            v.condition.clone(),
            v.worst_ratio.to_string(),
            v.threshold.to_string(),
            v.pass.to_string(),
            v.seed.map(|s| s.to_string()).unwrap_or_default(),
            v.domain.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_of_constants() {
        assert_eq!(spread(&[2.0, 4.0, 3.0]), 2.0);
        assert!(spread(&[1.0, 0.0]).is_infinite());
        assert!(spread(&[]).is_infinite());
    }

    #[test]
    fn slope_of_power() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((log_log_slope(&x, &y) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn scan_verdict_thresholds() {
        let s = vec![
            ScaleSample { radius: 1.0, value: 1.0 },
            ScaleSample { radius: 2.0, value: 5.0 },
        ];
        assert!(ConditionVerdict::from_scan("FK", "x".into(), s.clone(), 10.0).pass);
        assert!(!ConditionVerdict::from_scan("FK", "x".into(), s, 4.0).pass);
    }
}
