//! The two-regime stable-like subordinator.
//!
//! Lévy density `ν(s) = s^{−1−γ₁}` on `(0, 1]` and `s^{−1−γ₂}` on `(1, ∞)`.
//! Jumps below the cutoff `ε` are replaced by their mean drift
//! `b(ε) = ∫₀^ε s ν(s) ds`; larger jumps form a compound Poisson process.

use crate::quad::{gauss_kronrod, tanh_sinh, Quadrature};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Relative agreement required between the two quadrature rules.
const RULE_AGREEMENT: f64 = 1e-8;

/// Target for the neglected small-jump variance, per unit of time.
const SMALL_JUMP_VARIANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubordinatorSpec {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Small-jump cutoff; chosen from the time step when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl SubordinatorSpec {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        let s = Self {
            gamma1,
            gamma2,
            epsilon: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = Some(epsilon);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (g1, g2) = (self.gamma1, self.gamma2);
        if !(g1 > 0.0 && g1 < 1.0) {
            return Err(Error::Invalid(format!("gamma1 must lie in (0, 1), got {g1}")));
        }
        if !(g2 > 1.0 && g2.is_finite()) {
            return Err(Error::Invalid(format!("gamma2 must lie in (1, ∞), got {g2}")));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Invalid(format!("epsilon must lie in (0, 1], got {e}")));
            }
        }
        Ok(())
    }

    /// `ν(s)`.
    pub fn levy_density(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s <= 1.0 {
            s.powf(-1.0 - self.gamma1)
        } else {
            s.powf(-1.0 - self.gamma2)
        }
    }

    /// `b(ε) = ε^{1−γ₁}/(1−γ₁)` for `ε ≤ 1`.
    pub fn drift(&self, epsilon: f64) -> f64 {
        epsilon.powf(1.0 - self.gamma1) / (1.0 - self.gamma1)
    }

    /// Total rate of jumps larger than `ε`.
    pub fn jump_rate(&self, epsilon: f64) -> f64 {
        self.small_mass(epsilon) + 1.0 / self.gamma2
    }

    /// `∫₀^ε s² ν(s) ds`.
    pub fn neglected_variance(&self, epsilon: f64) -> f64 {
        epsilon.powf(2.0 - self.gamma1) / (2.0 - self.gamma1)
    }

    /// `E[S_1] = ∫₀^∞ s ν(s) ds`.
    pub fn mean_rate(&self) -> f64 {
        1.0 / (1.0 - self.gamma1) + 1.0 / (self.gamma2 - 1.0)
    }

    /// Cutoff in use for a time step `dt`: the configured value, or the
    /// largest `ε ≤ 1` whose neglected variance is at most `10⁻⁶·dt`.
    pub fn epsilon_for(&self, dt: f64) -> f64 {
        self.epsilon.unwrap_or_else(|| {
            ((2.0 - self.gamma1) * SMALL_JUMP_VARIANCE * dt)
                .powf(1.0 / (2.0 - self.gamma1))
                .min(1.0)
        })
    }

    fn small_mass(&self, epsilon: f64) -> f64 {
        (epsilon.powf(-self.gamma1) - 1.0) / self.gamma1
    }

    /// One jump drawn from `ν` restricted to `(ε, ∞)`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, epsilon: f64, rng: &mut R) -> f64 {
        let a = self.small_mass(epsilon);
        let b = 1.0 / self.gamma2;
        let u: f64 = rng.random::<f64>() * (a + b);
        if u < a {
            // ∫_s^1 ν = (s^{−γ₁} − 1)/γ₁ = u
            (1.0 + self.gamma1 * u).powf(-1.0 / self.gamma1).clamp(epsilon, 1.0)
        } else {
            // ∫_s^∞ ν = s^{−γ₂}/γ₂ = u − a
            let v = (u - a).max(f64::MIN_POSITIVE);
            (self.gamma2 * v).powf(-1.0 / self.gamma2).max(1.0)
        }
    }

    /// Increment `S_{t+dt} − S_t`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let eps = self.epsilon_for(dt);
        let rate = self.jump_rate(eps) * dt;
        let mut total = self.drift(eps) * dt;
        if rate > 0.0 {
            let poisson = Poisson::new(rate).map_err(|e| Error::Numeric(format!("Poisson rate {rate}: {e}")))?;
            let count = poisson.sample(rng) as u64;
            for _ in 0..count {
                total += self.sample_jump(eps, rng);
            }
        }
        Ok(total)
    }

    /// `S` at each time of the nondecreasing `grid` (starting from `S_0 = 0`).
    pub fn sample_path<R: Rng + ?Sized>(&self, grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut s = 0.0;
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(grid.len());
        for &t in grid {
            if t < prev {
                return Err(Error::Invalid("time grid must be nondecreasing".into()));
            }
            if t > prev {
                s += self.sample_increment(t - prev, rng)?;
            }
            prev = t;
            out.push(s);
        }
        Ok(out)
    }

    /// Laplace exponent `f(r) = ∫₀^∞ (1 − e^{−rs}) ν(s) ds`.
    ///
    /// The integral is split at `s = 1` and `s = 1/r` and evaluated with both
    /// Gauss–Kronrod and tanh–sinh; a disagreement beyond `1e−8` relative is an
    /// error.
    pub fn laplace_exponent(&self, r: f64) -> Result<f64> {
        self.validate()?;
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("Laplace exponent needs r ≥ 0, got {r}")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let gk = self.laplace_pieces(r, |f, a, b| gauss_kronrod(f, a, b, 1e-12))?;
        let ts = self.laplace_pieces(r, |f, a, b| tanh_sinh(f, a, b, 1e-12))?;
        if (gk - ts).abs() > RULE_AGREEMENT * gk.abs() {
            return Err(Error::Numeric(format!(
                "quadrature rules disagree for f({r}): {gk} vs {ts}"
            )));
        }
        Ok(gk)
    }

    fn laplace_pieces<Q>(&self, r: f64, rule: Q) -> Result<f64>
    where
        Q: Fn(&dyn Fn(f64) -> f64, f64, f64) -> Result<Quadrature>,
    {
        let g1 = self.gamma1;
        let lo = (1.0 / r).min(1.0);
        let hi = (1.0 / r).max(1.0);
        let integrand = |s: f64| -(-r * s).exp_m1() * self.levy_density(s);

        // (0, lo] with s = lo·w^p, which makes the integrand smooth at w = 0
        let p = 2.0 / (1.0 - g1);
        // with lo ≤ 1 the transformed integrand is r lo^{1−γ₁} p w (1 − e^{−rs})/(rs)
        let scale = r * lo.powf(1.0 - g1) * p;
        let near = |w: f64| {
            let x = r * lo * w.powf(p);
            let damped = if x > 0.0 { -(-x).exp_m1() / x } else { 1.0 };
            scale * w * damped
        };
        let mut total = rule(&near, 0.0, 1.0)?.value;

        if hi > lo {
            total += rule(&integrand, lo, hi)?.value;
        }

        // [hi, ∞) with s = hi/u
        let far = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let s = hi / u;
            integrand(s) * hi / (u * u)
        };
        total += rule(&far, 0.0, 1.0)?.value;
        Ok(total)
    }
}
