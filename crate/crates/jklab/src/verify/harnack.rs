//! Parabolic Harnack ratios of exact caloric functions.
//!
//! On a finite space every `u(t, x) = Σ_y p(t, x, y) f(y) μ_y` with `f ≥ 0`
//! is a nonnegative caloric function, so the test family consists of the
//! point masses `f = δ_y/μ_y` (giving `u = p(·, ·, y)`) for every `y`, plus
//! seeded random nonnegative vectors. For a ball `B = B(x₀, R)` the ratio is
//!
//! ```text
//! sup_{Q₋} u / inf_{Q₊} u,   Q₋ = [φ(C₁R), φ(C₂R)] × B,   Q₊ = [φ(C₃R), φ(C₄R)] × B
//! ```
//!
//! with the time intervals sampled at `time_samples` points.

use super::{guard_all, radii_label, spread, ConditionVerdict, ScaleSample};
use crate::process::{heat_kernel_rows, Generator};
use crate::rng::stream;
use crate::scale::ScaleFunction;
use crate::space::FiniteMetricMeasureSpace;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Space-time cylinder multipliers and the size of the test family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnackCylinder {
    /// `C₁ < C₂ ≤ C₃ < C₄`.
    pub c: [f64; 4],
    /// `C₅ ≥ C₄`; `C₅R` must be within the guard.
    pub c5: f64,
    pub time_samples: usize,
    pub random_functions: usize,
    pub seed: u64,
}

impl Default for HarnackCylinder {
    fn default() -> Self {
        Self {
            c: [0.5, 1.0, 1.5, 2.0],
            c5: 4.0,
            time_samples: 4,
            random_functions: 8,
            seed: 0,
        }
    }
}

impl HarnackCylinder {
    pub fn validate(&self) -> Result<()> {
        let [c1, c2, c3, c4] = self.c;
        if !(c1 > 0.0 && c1 < c2 && c2 <= c3 && c3 < c4 && c4 <= self.c5) {
            return Err(Error::Invalid(format!(
                "cylinder multipliers must satisfy 0 < C1 < C2 <= C3 < C4 <= C5, got {:?} and {}",
                self.c, self.c5
            )));
        }
        if self.time_samples == 0 {
            return Err(Error::Invalid("at least one time sample is needed".into()));
        }
        Ok(())
    }
}

/// Worst ratio at one radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackScale {
    pub radius: f64,
    pub worst_ratio: f64,
    /// `point:y` or `random:k`.
    pub worst_function: String,
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![a];
    }
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

/// Worst Harnack ratio at every radius, then the `max/min` of those ratios
/// across radii as the stability statistic.
pub fn check_phi_harnack(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    phi: &ScaleFunction,
    cylinder: &HarnackCylinder,
    threshold: f64,
) -> Result<(ConditionVerdict, Vec<HarnackScale>)> {
    cylinder.validate()?;
    guard_all(space, radii, cylinder.c5)?;
    let n = space.len();
    let mu = gen.measure();
    let [c1, c2, c3, c4] = cylinder.c;
    let mut scales = Vec::new();
    let mut anomalies = Vec::new();
    let mut rng = stream(cylinder.seed, 0);
    let functions: Vec<Vec<f64>> = (0..cylinder.random_functions)
        .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
        .collect();
    for &r in radii {
        let ball = space.ball(x0, r);
        let minus = linspace(phi.eval(c1 * r), phi.eval(c2 * r), cylinder.time_samples);
        let plus = linspace(phi.eval(c3 * r), phi.eval(c4 * r), cylinder.time_samples);
        let times: Vec<f64> = minus.iter().chain(&plus).copied().collect();
        let kernels = heat_kernel_rows(gen, &ball, &times)?;
        let (k_minus, k_plus) = kernels.split_at(minus.len());

        let mut sup = vec![0.0f64; n];
        let mut inf = vec![f64::INFINITY; n];
        for k in k_minus {
            for i in 0..ball.len() {
                for (s, &p) in sup.iter_mut().zip(k.row(i)) {
                    *s = s.max(p);
                }
            }
        }
        for k in k_plus {
            for i in 0..ball.len() {
                for (s, &p) in inf.iter_mut().zip(k.row(i)) {
                    *s = s.min(p);
                }
            }
        }
        let mut worst = (0.0f64, String::new());
        for y in 0..n {
            let ratio = if inf[y] > 0.0 { sup[y] / inf[y] } else { f64::INFINITY };
            if ratio > worst.0 {
                worst = (ratio, format!("point:{y}"));
            }
        }
        for (k, f) in functions.iter().enumerate() {
            let eval = |kern: &[crate::process::HeatKernelMatrix], pick: fn(f64, f64) -> f64, start: f64| {
                kern.iter().fold(start, |acc, h| {
                    (0..ball.len()).fold(acc, |acc2, i| {
                        let u: f64 = h.row(i).iter().zip(f).zip(mu).map(|((p, v), m)| p * v * m).sum();
                        pick(acc2, u)
                    })
                })
            };
            let s = eval(k_minus, f64::max, 0.0);
            let i = eval(k_plus, f64::min, f64::INFINITY);
            let ratio = if i > 0.0 { s / i } else { f64::INFINITY };
            if ratio > worst.0 {
                worst = (ratio, format!("random:{k}"));
            }
        }
        if !worst.0.is_finite() {
            anomalies.push(r);
        }
        scales.push(HarnackScale {
            radius: r,
            worst_ratio: worst.0,
            worst_function: worst.1,
        });
    }
    let values: Vec<f64> = scales.iter().map(|s| s.worst_ratio).collect();
    let stability = spread(&values);
    let mut constants = BTreeMap::new();
    constants.insert(
        "max_harnack_ratio".to_string(),
        values.iter().copied().fold(0.0, f64::max),
    );
    constants.insert(
        "min_harnack_ratio".to_string(),
        values.iter().copied().fold(f64::INFINITY, f64::min),
    );
    let mut notes = vec![format!(
        "caloric family: p(t,.,y) for every y and {} seeded random nonnegative f",
        cylinder.random_functions
    )];
    if !anomalies.is_empty() {
        notes.push(format!("infimum over the later cylinder vanished at R = {anomalies:?}"));
    }
    let verdict = ConditionVerdict {
        condition: "PHI".to_string(),
        constants,
        worst_ratio: stability,
        domain: format!("B(x0={x0}, R), C = {:?}, {}", cylinder.c, radii_label(radii)),
        pass: stability <= threshold && anomalies.is_empty(),
        seed: Some(cylinder.seed),
        threshold,
        samples: scales
            .iter()
            .map(|s| ScaleSample {
                radius: s.radius,
                value: s.worst_ratio,
            })
            .collect(),
        notes,
    };
    Ok((verdict, scales))
}
