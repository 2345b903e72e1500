//! Two-sided corridor fits `c₁ f(c₂t, d) ≤ p(t, x, y) ≤ c₃ f(c₄t, d)`.

use crate::process::HeatKernelMatrix;
use crate::space::FiniteMetricMeasureSpace;
use crate::{Error, Result};
use serde::Serialize;

/// One exact value `p(t, x, y)` with `d = d(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorridorSample {
    pub t: f64,
    pub x: usize,
    pub d: f64,
    pub p: f64,
}

/// Fitted corridor constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorridorReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `c₃/c₁`.
    pub worst_ratio: f64,
    pub domain: String,
    pub threshold: f64,
    pub pass: bool,
    /// Dilations skipped because the envelope vanished where `p > 0`.
    pub skipped_dilations: usize,
}

/// Time dilations `2^{−3}, …, 2^3` on 25 log-spaced points (including 1).
pub fn dilation_grid() -> Vec<f64> {
    (0..25)
        .map(|k| if k == 12 { 1.0 } else { 2f64.powf(-3.0 + 0.25 * k as f64) })
        .collect()
}

/// Exact values from every stored row, restricted to `d(x, y) ≤ max_distance`.
pub fn corridor_samples(
    space: &FiniteMetricMeasureSpace,
    kernels: &[HeatKernelMatrix],
    max_distance: f64,
) -> Result<Vec<CorridorSample>> {
    space.check_guard(max_distance)?;
    let mut out = Vec::new();
    for k in kernels {
        for (i, &x) in k.sources.iter().enumerate() {
            for (y, &p) in k.row(i).iter().enumerate() {
                let d = space.distance(x, y);
                if d <= max_distance * (1.0 + 1e-12) {
                    out.push(CorridorSample { t: k.t, x, d, p });
                }
            }
        }
    }
    Ok(out)
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    v.len()
}

/// Grid-search the dilations and fit the corridor.
///
/// `env(t, x, d)` is the envelope shape. For each dilation `c` the lower
/// constant is `min p/env(ct)` and the upper constant `max p/env(ct)`; `c₂`
/// maximizes the former, `c₄` minimizes the latter. Needs at least three
/// times and ten distinct distances.
pub fn fit_corridor(
    samples: &[CorridorSample],
    env: &dyn Fn(f64, usize, f64) -> f64,
    dilations: &[f64],
    threshold: f64,
) -> Result<CorridorReport> {
    if samples.is_empty() {
        return Err(Error::Invalid("corridor domain is empty".into()));
    }
    let times = distinct(samples.iter().map(|s| s.t));
    let dists = distinct(samples.iter().map(|s| s.d));
    if times < 3 || dists < 10 {
        return Err(Error::Invalid(format!(
            "corridor needs at least 3 times and 10 distances, got {times} and {dists}"
        )));
    }
    if dilations.is_empty() || dilations.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Invalid("dilations must be positive".into()));
    }
    let mut best_low = (f64::NEG_INFINITY, f64::NAN);
    let mut best_up = (f64::INFINITY, f64::NAN);
    let mut skipped = 0;
    for &c in dilations {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut feasible = true;
        for s in samples {
            let e = env(c * s.t, s.x, s.d);
            if !(e > 0.0 && e.is_finite()) {
                if s.p > 0.0 {
                    feasible = false;
                    break;
                }
                continue;
            }
            let q = s.p / e;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if !feasible {
            skipped += 1;
            continue;
        }
        if lo > best_low.0 {
            best_low = (lo, c);
        }
        if hi < best_up.0 {
            best_up = (hi, c);
        }
    }
    if skipped == dilations.len() {
        return Err(Error::Invalid(
            "envelope vanishes where the heat kernel is positive at every dilation".into(),
        ));
    }
    let worst_ratio = best_up.0 / best_low.0;
    let max_d = samples.iter().map(|s| s.d).fold(0.0, f64::max);
    Ok(CorridorReport {
        c1: best_low.0,
        c2: best_low.1,
        c3: best_up.0,
        c4: best_up.1,
        worst_ratio,
        domain: format!("{times} times, {dists} distances, d <= {max_d}"),
        threshold,
        pass: worst_ratio <= threshold,
        skipped_dilations: skipped,
    })
}

/// Worst ratio of the corridor fitted on `d ≤ R` for each cutoff `R`.
pub fn corridor_profile(
    samples: &[CorridorSample],
    env: &dyn Fn(f64, usize, f64) -> f64,
    dilations: &[f64],
    cutoffs: &[f64],
) -> Result<Vec<(f64, f64)>> {
    cutoffs
        .iter()
        .map(|&r| {
            let sub: Vec<CorridorSample> = samples.iter().copied().filter(|s| s.d <= r * (1.0 + 1e-12)).collect();
            Ok((r, fit_corridor(&sub, env, dilations, f64::INFINITY)?.worst_ratio))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(t: f64, _x: usize, d: f64) -> f64 {
        (1.0 / t.sqrt()).min(t / (1.0 + d * d * d))
    }

    fn synthetic(scale: f64) -> Vec<CorridorSample> {
        let mut v = Vec::new();
        for t in [1.0, 4.0, 16.0] {
            for d in 0..20 {
                let d = d as f64;
                v.push(CorridorSample {
                    t,
                    x: 0,
                    d,
                    p: scale * shape(t, 0, d),
                });
            }
        }
        v
    }

    #[test]
    fn envelope_against_itself() {
        let r = fit_corridor(&synthetic(1.0), &shape, &dilation_grid(), 100.0).unwrap();
        assert!((r.c1 - 1.0).abs() < 1e-12 && (r.c3 - 1.0).abs() < 1e-12);
        assert!((r.worst_ratio - 1.0).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn too_few_times_rejected() {
        let s: Vec<CorridorSample> = synthetic(1.0).into_iter().filter(|s| s.t < 10.0).collect();
        assert!(fit_corridor(&s, &shape, &dilation_grid(), 100.0).is_err());
        assert!(fit_corridor(&[], &shape, &dilation_grid(), 100.0).is_err());
    }

    #[test]
    fn vanishing_envelope_rejected() {
        let zero = |_t: f64, _x: usize, _d: f64| 0.0;
        assert!(fit_corridor(&synthetic(1.0), &zero, &dilation_grid(), 100.0).is_err());
    }
}
