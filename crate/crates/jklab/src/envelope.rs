//! Analytic heat-kernel bound functions.
//!
//! ```text
//! p^(j)(t,x,y) = 1/V(x, φ_j⁻¹(t)) ∧ t / (V(x,d) φ_j(d))
//! p^(c)(t,x,y) = exp(−d / φ̄_c⁻¹(t/d)) / V(x, φ_c⁻¹(t))
//! ```
//!
//! The two-sided envelope uses `p^(j)` on a time range where the lower index
//! of φ_j is at most 1 and `1/V(x, φ_c⁻¹(t)) ∧ (p^(c) + p^(j))` otherwise, the
//! time ranges being `t ≤ T` and `t > T`.
//!
//! Volumes are supplied by the caller as a closure `r ↦ V(x, r)` for the
//! fixed base point, so these formulas work for any space.

use crate::scale::{Crossover, CrossoverConstants, ScaleFunction, ScaleTriple};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// `p^(j)` given `V(x, d)` and `V(x, φ_j⁻¹(t))`.
pub fn p_j_envelope(t: f64, d: f64, vol_at_d: f64, vol_at_scale: f64, phi_j: &ScaleFunction) -> f64 {
    let near = 1.0 / vol_at_scale;
    if d <= 0.0 {
        return near;
    }
    near.min(t / (vol_at_d * phi_j.eval(d)))
}

/// `p^(c)` given `V(x, φ_c⁻¹(t))`. Returns 0 once the exponent exceeds 700.
pub fn p_c_envelope(t: f64, d: f64, vol_at_scale: f64, bar_phi_c: &ScaleFunction) -> f64 {
    if d <= 0.0 {
        return 1.0 / vol_at_scale;
    }
    let e = d / bar_phi_c.invert(t / d);
    if e > 700.0 {
        0.0
    } else {
        (-e).exp() / vol_at_scale
    }
}

/// `1/V(x, φ⁻¹(t)) ∧ t/(V(x,d) φ(d))`.
pub fn coarse_upper(t: f64, d: f64, phi: &ScaleFunction, vol: &dyn Fn(f64) -> f64) -> f64 {
    let near = 1.0 / vol(phi.invert(t));
    if d <= 0.0 {
        return near;
    }
    near.min(t / (vol(d) * phi.eval(d)))
}

/// `1 ∧ c·t/φ(r)`.
pub fn tail_probability_bound(t: f64, r: f64, phi: &ScaleFunction, c: f64) -> f64 {
    (c * t / phi.eval(r)).min(1.0)
}

/// Constants of the two-sided comparison
/// `lower_scale·f(lower_dilation·t) ≤ p(t) ≤ upper_scale·f(upper_dilation·t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeConstants {
    /// Multiplier of the lower bound (c₁).
    pub lower_scale: f64,
    /// Time dilation of the lower bound (c₂).
    pub lower_dilation: f64,
    /// Multiplier of the upper bound (c₃).
    pub upper_scale: f64,
    /// Time dilation of the upper bound (c₄).
    pub upper_dilation: f64,
    /// Radius factor of the near-diagonal case of the lower bound, also used
    /// for the `NearDiagonal` label.
    pub near_radius: f64,
    /// Time cutoff `T` separating the small-time and large-time branches.
    pub time_cutoff: f64,
}

impl Default for EnvelopeConstants {
    fn default() -> Self {
        Self {
            lower_scale: 0.25,
            lower_dilation: 1.0,
            upper_scale: 1.0,
            upper_dilation: 1.0,
            near_radius: 1.0,
            time_cutoff: 1.0,
        }
    }
}

impl EnvelopeConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lower_scale,
            self.lower_dilation,
            self.upper_scale,
            self.upper_dilation,
            self.near_radius,
            self.time_cutoff,
        ];
        if all.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Invalid("envelope constants must be positive and finite".into()));
        }
        if self.lower_dilation > self.upper_dilation {
            return Err(Error::Invalid(format!(
                "lower dilation {} exceeds upper dilation {}",
                self.lower_dilation, self.upper_dilation
            )));
        }
        Ok(())
    }
}

/// Dominant term of the heat kernel at `(t, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    NearDiagonal,
    SubGaussianTail,
    JumpTail,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::NearDiagonal => "NearDiagonal",
            Regime::SubGaussianTail => "SubGaussianTail",
            Regime::JumpTail => "JumpTail",
        }
    }
}

/// A regime together with the boundaries used to decide it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLabel {
    pub regime: Regime,
    /// `near_radius·φ⁻¹(t)`.
    pub near_boundary: f64,
    /// Crossover radius `t_*`, when the sub-Gaussian band exists.
    pub crossover: Option<f64>,
}

/// Regime boundaries at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBoundaries {
    pub t: f64,
    pub near_boundary: f64,
    pub crossover: Option<f64>,
}

/// Value of the envelope at one `(t, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeValue {
    pub lower: f64,
    pub upper: f64,
    pub label: RegimeLabel,
}

/// The two-sided heat-kernel envelope of a scale triple.
#[derive(Debug, Clone)]
pub struct HkEnvelope {
    pub triple: ScaleTriple,
    pub consts: EnvelopeConstants,
    pub crossover: CrossoverConstants,
}

impl HkEnvelope {
    pub fn new(triple: ScaleTriple, consts: EnvelopeConstants, crossover: CrossoverConstants) -> Result<Self> {
        consts.validate()?;
        Ok(Self {
            triple,
            consts,
            crossover,
        })
    }

    fn sub_gaussian_at(&self, t: f64) -> bool {
        if t <= self.consts.time_cutoff {
            self.triple.sub_gaussian_small()
        } else {
            self.triple.sub_gaussian_large()
        }
    }

    /// Undilated upper shape: the branch selected by `t` versus `T` and the
    /// relevant index versus 1.
    pub fn upper_shape(&self, t: f64, d: f64, vol: &dyn Fn(f64) -> f64) -> f64 {
        let tr = &self.triple;
        let pj = p_j_envelope(t, d, vol(d), vol(tr.phi_j.invert(t)), &tr.phi_j);
        if !self.sub_gaussian_at(t) {
            return pj;
        }
        let v_c = vol(tr.phi_c.invert(t));
        let pc = p_c_envelope(t, d, v_c, &tr.bar_phi_c);
        (1.0 / v_c).min(pc + pj)
    }

    /// Undilated, unscaled lower shape. On a time range using φ_j this is
    /// `p^(j)`; otherwise the near-diagonal / jump two-case form with φ.
    pub fn lower_shape(&self, t: f64, d: f64, vol: &dyn Fn(f64) -> f64) -> f64 {
        let tr = &self.triple;
        if !self.sub_gaussian_at(t) {
            return p_j_envelope(t, d, vol(d), vol(tr.phi_j.invert(t)), &tr.phi_j);
        }
        let scale = tr.phi.invert(t);
        if d <= self.consts.near_radius * scale {
            1.0 / vol(scale)
        } else {
            t / (vol(d) * tr.phi_j.eval(d))
        }
    }

    pub fn upper(&self, t: f64, d: f64, vol: &dyn Fn(f64) -> f64) -> f64 {
        self.consts.upper_scale * self.upper_shape(self.consts.upper_dilation * t, d, vol)
    }

    pub fn lower(&self, t: f64, d: f64, vol: &dyn Fn(f64) -> f64) -> f64 {
        self.consts.lower_scale * self.lower_shape(self.consts.lower_dilation * t, d, vol)
    }

    /// Boundaries of the regime labels at time `t`.
    pub fn boundaries(&self, t: f64) -> Result<RegimeBoundaries> {
        let near_boundary = self.consts.near_radius * self.triple.phi.invert(t);
        let crossover = if self.sub_gaussian_at(t) && t >= 1.0 {
            match self.triple.crossover_radius(t, self.crossover)? {
                Crossover::Radius { r_star, .. } => Some(r_star),
                Crossover::NoCrossover { .. } => None,
            }
        } else {
            None
        };
        Ok(RegimeBoundaries {
            t,
            near_boundary,
            crossover,
        })
    }

    /// Label `(t, d)` given precomputed boundaries for the same `t`.
    pub fn label_with(&self, b: &RegimeBoundaries, d: f64, vol: &dyn Fn(f64) -> f64) -> RegimeLabel {
        let regime = if d <= b.near_boundary {
            Regime::NearDiagonal
        } else if let Some(r_star) = b.crossover {
            if d < r_star {
                Regime::SubGaussianTail
            } else {
                Regime::JumpTail
            }
        } else if self.sub_gaussian_at(b.t) {
            // small times with a sub-Gaussian branch: compare the two terms
            let tr = &self.triple;
            let pc = p_c_envelope(b.t, d, vol(tr.phi_c.invert(b.t)), &tr.bar_phi_c);
            let pj = p_j_envelope(b.t, d, vol(d), vol(tr.phi_j.invert(b.t)), &tr.phi_j);
            if pc > pj {
                Regime::SubGaussianTail
            } else {
                Regime::JumpTail
            }
        } else {
            Regime::JumpTail
        };
        RegimeLabel {
            regime,
            near_boundary: b.near_boundary,
            crossover: b.crossover,
        }
    }

    /// Lower bound, upper bound and regime label at `(t, d)`.
    pub fn eval(&self, t: f64, d: f64, vol: &dyn Fn(f64) -> f64) -> Result<EnvelopeValue> {
        if !(t > 0.0) || !(d >= 0.0) {
            return Err(Error::Domain(format!("envelope needs t > 0 and d >= 0, got t={t}, d={d}")));
        }
        let b = self.boundaries(t)?;
        Ok(self.eval_with(&b, d, vol))
    }

    pub fn eval_with(&self, b: &RegimeBoundaries, d: f64, vol: &dyn Fn(f64) -> f64) -> EnvelopeValue {
        EnvelopeValue {
            lower: self.lower(b.t, d, vol),
            upper: self.upper(b.t, d, vol),
            label: self.label_with(b, d, vol),
        }
    }

    /// Fail if `lower > upper` anywhere on the grid.
    pub fn check_ordering(&self, times: &[f64], dists: &[f64], vol: &dyn Fn(f64) -> f64) -> Result<()> {
        for &t in times {
            for &d in dists {
                let (lower, upper) = (self.lower(t, d, vol), self.upper(t, d, vol));
                if lower > upper * (1.0 + 1e-12) {
                    return Err(Error::Calibration { t, d, lower, upper });
                }
            }
        }
        Ok(())
    }

    /// Shrink `lower_scale` until `lower ≤ upper` on the grid; returns the new
    /// value.
    pub fn calibrate(&mut self, times: &[f64], dists: &[f64], vol: &dyn Fn(f64) -> f64) -> f64 {
        let mut worst = 1.0f64;
        for &t in times {
            for &d in dists {
                let (lower, upper) = (self.lower(t, d, vol), self.upper(t, d, vol));
                if lower > 0.0 {
                    worst = worst.min(upper / lower);
                }
            }
        }
        if worst < 1.0 {
            self.consts.lower_scale *= worst;
        }
        self.consts.lower_scale
    }
}

/// One row of an exported envelope table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub t: f64,
    pub d: f64,
    pub lower: f64,
    pub upper: f64,
    pub regime: &'static str,
}

/// Evaluate the envelope over a `(t, d)` grid.
pub fn envelope_table(
    env: &HkEnvelope,
    times: &[f64],
    dists: &[f64],
    vol: &dyn Fn(f64) -> f64,
) -> Result<Vec<EnvelopeRow>> {
    let mut rows = Vec::with_capacity(times.len() * dists.len());
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("envelope table time {t} is not positive")));
        }
        let b = env.boundaries(t)?;
        for &d in dists {
            let v = env.eval_with(&b, d, vol);
            rows.push(EnvelopeRow {
                t,
                d,
                lower: v.lower,
                upper: v.upper,
                regime: v.label.regime.name(),
            });
        }
    }
    Ok(rows)
}

/// Write rows as CSV with header `t,d,lower,upper,regime`.
pub fn write_envelope_csv<W: Write>(rows: &[EnvelopeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_1_1() -> HkEnvelope {
        let triple = ScaleTriple::new(
            ScaleFunction::two_power(1.0, 3.0).unwrap(),
            ScaleFunction::power(2.0).unwrap(),
        )
        .unwrap();
        HkEnvelope::new(triple, EnvelopeConstants::default(), CrossoverConstants::default()).unwrap()
    }

    fn line(r: f64) -> f64 {
        2.0 * r.floor() + 1.0
    }

    #[test]
    fn p_j_on_diagonal_and_tail() {
        let j = ScaleFunction::two_power(1.0, 3.0).unwrap();
        assert_eq!(p_j_envelope(2.0, 0.0, 1.0, 5.0, &j), 0.2);
        // t=1, d=10 on the line: min(1/V(1), 1/(21·1000))
        let v = p_j_envelope(1.0, 10.0, line(10.0), line(j.invert(1.0)), &j);
        assert_eq!(v, 1.0 / 21_000.0);
    }

    #[test]
    fn p_c_on_diagonal() {
        let bar = ScaleFunction::power(1.0).unwrap();
        assert_eq!(p_c_envelope(4.0, 0.0, 5.0, &bar), 0.2);
        assert_eq!(p_c_envelope(1e-3, 10.0, 5.0, &bar), 0.0);
    }

    #[test]
    fn tail_bound_arithmetic() {
        let phi = ScaleFunction::power(2.0).unwrap();
        assert!((tail_probability_bound(1.0, 10.0, &phi, 1.0) - 0.01).abs() < 1e-15);
        assert_eq!(tail_probability_bound(1e3, 1.0, &phi, 1.0), 1.0);
    }

    #[test]
    fn regimes_of_example_1_1() {
        let env = example_1_1();
        let b = env.boundaries(100.0).unwrap();
        let r_star = b.crossover.expect("crossover exists at t=100");
        assert!(r_star > 10.0);
        let near = env.eval(100.0, 5.0, &line).unwrap();
        assert_eq!(near.label.regime, Regime::NearDiagonal);
        let mid = env.eval(100.0, 0.5 * (10.0 + r_star), &line).unwrap();
        assert_eq!(mid.label.regime, Regime::SubGaussianTail);
        let far = env.eval(100.0, 2.0 * r_star, &line).unwrap();
        assert_eq!(far.label.regime, Regime::JumpTail);
        let small = env.eval(0.5, 3.0, &line).unwrap();
        assert_eq!(small.label.regime, Regime::JumpTail);
    }

    #[test]
    fn csv_header() {
        let env = example_1_1();
        let rows = envelope_table(&env, &[1.0, 4.0], &[0.0, 2.0], &line).unwrap();
        let mut buf = Vec::new();
        write_envelope_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,d,lower,upper,regime");
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn bad_constants_rejected() {
        let consts = EnvelopeConstants {
            lower_dilation: 4.0,
            upper_dilation: 1.0,
            ..Default::default()
        };
        assert!(consts.validate().is_err());
    }
}
