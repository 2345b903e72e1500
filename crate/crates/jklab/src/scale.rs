//! Scale functions r ↦ φ(r).
//!
//! A [`ScaleFunction`] is strictly increasing on `(0, ∞)`, vanishes at `0`
//! and is normalized so that `φ(1) = 1`. It is stored either as a continuous
//! piecewise power (breakpoints plus one exponent per segment) or as a table
//! of samples interpolated linearly in log-log coordinates. Composites that
//! switch between two functions at `r = 1` are kept as a splice of the two.
//!
//! The module also builds the scale triple `(φ_j, φ_c, φ)` with its lower
//! scaling indices, the function `φ̄_c(r) = φ_c(r)/r`, the Φ constructor
//!
//! ```text
//! Φ(r) = r² / (2 ∫₀^r s/φ_j(s) ds)
//! ```
//!
//! and the crossover radius separating the sub-Gaussian and jump regimes of
//! the heat kernel.

use crate::quad;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Serialized form of a scale function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleDoc {
    PiecewisePower { breaks: Vec<f64>, exponents: Vec<f64> },
    Table { r: Vec<f64>, v: Vec<f64> },
}

/// Declared two-sided power window: `c1 (R/r)^β1 ≤ s(R)/s(r) ≤ c2 (R/r)^β2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub beta1: f64,
    pub beta2: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Power {
        breaks: Vec<f64>,
        exps: Vec<f64>,
        coef: Vec<f64>,
    },
    Table {
        lr: Vec<f64>,
        lv: Vec<f64>,
    },
    Spliced {
        below: Box<ScaleFunction>,
        above: Box<ScaleFunction>,
    },
}

/// A strictly increasing scale function with `φ(0) = 0` and `φ(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScaleDoc", into = "ScaleDoc")]
pub struct ScaleFunction {
    repr: Repr,
    window: Window,
}

/// Which half-line a scaling index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleRange {
    /// `[2⁻²⁰, 1]`
    Small,
    /// `[1, 2²⁰]`
    Large,
}

/// Dyadic radii `2^lo, …, 2^hi`.
pub fn dyadic_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

fn pow(r: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        r.powi(e as i32)
    } else {
        r.powf(e)
    }
}

fn slope_window(slopes: impl Iterator<Item = f64>) -> Window {
    let (lo, hi) = slopes.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s), b.max(s)));
    Window {
        beta1: lo,
        beta2: hi,
        c1: 1.0,
        c2: 1.0,
    }
}

impl ScaleFunction {
    /// Continuous piecewise power with the given breakpoints and one exponent
    /// per segment (`exponents.len() == breaks.len() + 1`).
    pub fn piecewise_power(breaks: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        if exponents.len() != breaks.len() + 1 {
            return Err(Error::InvalidScale(format!(
                "{} breakpoints need {} exponents, got {}",
                breaks.len(),
                breaks.len() + 1,
                exponents.len()
            )));
        }
        if breaks.iter().any(|b| !(b.is_finite() && *b > 0.0)) || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScale("breakpoints must be positive and strictly increasing".into()));
        }
        if let Some(e) = exponents.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::InvalidScale(format!("segment exponent {e} is not positive")));
        }
        let seg_one = breaks.iter().position(|&b| 1.0 <= b).unwrap_or(breaks.len());
        let mut coef = vec![1.0; exponents.len()];
        for i in seg_one..breaks.len() {
            coef[i + 1] = coef[i] * breaks[i].powf(exponents[i] - exponents[i + 1]);
        }
        for i in (0..seg_one).rev() {
            coef[i] = coef[i + 1] * breaks[i].powf(exponents[i + 1] - exponents[i]);
        }
        let window = slope_window(exponents.iter().copied());
        Ok(Self {
            repr: Repr::Power {
                breaks,
                exps: exponents,
                coef,
            },
            window,
        })
    }

    /// The pure power `r^α`.
    pub fn power(alpha: f64) -> Result<Self> {
        Self::piecewise_power(vec![], vec![alpha])
    }

    /// `r^a ∨ r^b`, i.e. `r^a` on `(0, 1]` and `r^b` on `(1, ∞)`.
    pub fn two_power(a: f64, b: f64) -> Result<Self> {
        Self::piecewise_power(vec![1.0], vec![a, b])
    }

    /// Tabulated samples interpolated in log-log coordinates and extended
    /// beyond the table by the end slopes. Values are rescaled so that the
    /// interpolant equals 1 at `r = 1`.
    pub fn table(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() != v.len() || r.len() < 2 {
            return Err(Error::InvalidScale("a table needs at least two (r, v) pairs of equal length".into()));
        }
        if r.iter().chain(v.iter()).any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidScale("table entries must be positive and finite".into()));
        }
        if let Some(i) = r.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScale(format!("table radii not increasing at index {i}")));
        }
        if let Some(i) = v.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::NotMonotone {
                what: "table".into(),
                r: r[i],
                big_r: r[i + 1],
            });
        }
        let lr: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let mut lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let at_one = interp(&lr, &lv, 0.0);
        for x in &mut lv {
            *x -= at_one;
        }
        let window = slope_window(lr.windows(2).zip(lv.windows(2)).map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0])));
        Ok(Self {
            repr: Repr::Table { lr, lv },
            window,
        })
    }

    /// Tabulate `f` on the given increasing grid of radii.
    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::table(grid.to_vec(), grid.iter().map(|&r| f(r)).collect())
    }

    /// `below` on `(0, 1]`, `above` on `(1, ∞)`. Both are normalized at 1, so
    /// the result is continuous.
    pub fn splice(below: ScaleFunction, above: ScaleFunction) -> Self {
        let (lo_b, hi_b) = half_window(&below, ScaleRange::Small);
        let (lo_a, hi_a) = half_window(&above, ScaleRange::Large);
        let window = Window {
            beta1: lo_b.min(lo_a),
            beta2: hi_b.max(hi_a),
            c1: below.window.c1.min(above.window.c1),
            c2: below.window.c2.max(above.window.c2),
        };
        Self {
            repr: Repr::Spliced {
                below: Box::new(below),
                above: Box::new(above),
            },
            window,
        }
    }

    /// Declared power window.
    pub fn window(&self) -> Window {
        self.window
    }

    /// Override the declared window; it is checked on the dyadic grid.
    pub fn with_window(mut self, window: Window) -> Result<Self> {
        self.window = window;
        self.check_window()?;
        Ok(self)
    }

    /// Evaluate at `r ≥ 0`. Negative radii give `NaN`; see [`Self::try_eval`].
    pub fn eval(&self, r: f64) -> f64 {
        if r < 0.0 || r.is_nan() {
            return f64::NAN;
        }
        if r == 0.0 {
            return 0.0;
        }
        if r == 1.0 {
            return 1.0;
        }
        match &self.repr {
            Repr::Power { breaks, exps, coef } => {
                let i = breaks.iter().position(|&b| r <= b).unwrap_or(breaks.len());
                coef[i] * pow(r, exps[i])
            }
            Repr::Table { lr, lv } => interp(lr, lv, r.ln()).exp(),
            Repr::Spliced { below, above } => {
                if r <= 1.0 {
                    below.eval(r)
                } else {
                    above.eval(r)
                }
            }
        }
    }

    /// Evaluate, rejecting negative radii.
    pub fn try_eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("scale function evaluated at r = {r}")));
        }
        Ok(self.eval(r))
    }

    /// Inverse function at `t > 0`. Non-positive values give `NaN`; see
    /// [`Self::try_invert`].
    pub fn invert(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return f64::NAN;
        }
        if t == 1.0 {
            return 1.0;
        }
        match &self.repr {
            Repr::Power { breaks, exps, coef } => {
                let i = breaks
                    .iter()
                    .enumerate()
                    .position(|(k, &b)| t <= coef[k] * pow(b, exps[k]))
                    .unwrap_or(breaks.len());
                let x = t / coef[i];
                if exps[i] == 1.0 {
                    x
                } else if exps[i] == 2.0 {
                    x.sqrt()
                } else {
                    x.powf(1.0 / exps[i])
                }
            }
            Repr::Table { lr, lv } => interp(lv, lr, t.ln()).exp(),
            Repr::Spliced { below, above } => {
                if t <= 1.0 {
                    below.invert(t)
                } else {
                    above.invert(t)
                }
            }
        }
    }

    /// Inverse, rejecting non-positive values.
    pub fn try_invert(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("scale function inverted at t = {t}")));
        }
        Ok(self.invert(t))
    }

    /// Inverse by bisection on `log r` (at most 200 steps, relative tolerance
    /// `1e-10`); used as an independent check of [`Self::invert`].
    pub fn invert_bisect(&self, t: f64) -> Result<f64> {
        let t = self.try_invert(t).map(|_| t)?;
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        while self.eval(lo.exp()) > t {
            lo *= 2.0;
            if lo < -1e4 {
                return Err(Error::Numeric(format!("no lower bracket for inversion at {t}")));
            }
        }
        while self.eval(hi.exp()) < t {
            hi *= 2.0;
            if hi > 1e4 {
                return Err(Error::Numeric(format!("no upper bracket for inversion at {t}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = self.eval(mid.exp());
            if (v - t).abs() <= 1e-10 * t {
                return Ok(mid.exp());
            }
            if v < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    /// Radii where the representation changes formula.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Power { breaks, .. } => breaks.clone(),
            Repr::Table { lr, .. } => lr.iter().map(|x| x.exp()).collect(),
            Repr::Spliced { below, above } => {
                let mut k: Vec<f64> = below.kinks().into_iter().filter(|&r| r < 1.0).collect();
                k.push(1.0);
                k.extend(above.kinks().into_iter().filter(|&r| r > 1.0));
                k
            }
        }
    }

    /// Check the declared window on the dyadic grid `2⁻²⁰ … 2²⁰`.
    pub fn check_window(&self) -> Result<()> {
        let grid = dyadic_grid(-20, 20);
        let w = self.window;
        for (i, &r) in grid.iter().enumerate() {
            for &big in &grid[i + 1..] {
                let ratio = self.eval(big) / self.eval(r);
                let x = big / r;
                let lo = w.c1 * x.powf(w.beta1);
                let hi = w.c2 * x.powf(w.beta2);
                if ratio < lo * (1.0 - 1e-9) || ratio > hi * (1.0 + 1e-9) {
                    return Err(Error::InvalidScale(format!(
                        "window [{}, {}] violated between r={r} and R={big}: ratio {ratio}",
                        w.beta1, w.beta2
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serializable description. Splices of two piecewise powers collapse to
    /// one piecewise power; any other splice is written as a table.
    pub fn to_doc(&self) -> ScaleDoc {
        match &self.repr {
            Repr::Power { breaks, exps, .. } => ScaleDoc::PiecewisePower {
                breaks: breaks.clone(),
                exponents: exps.clone(),
            },
            Repr::Table { lr, lv } => ScaleDoc::Table {
                r: lr.iter().map(|x| x.exp()).collect(),
                v: lv.iter().map(|x| x.exp()).collect(),
            },
            Repr::Spliced { below, above } => {
                if let (Repr::Power { breaks: b1, exps: e1, .. }, Repr::Power { breaks: b2, exps: e2, .. }) =
                    (&below.repr, &above.repr)
                {
                    let mut breaks: Vec<f64> = b1.iter().copied().filter(|&b| b < 1.0).collect();
                    let mut exps: Vec<f64> = e1[..=breaks.len()].to_vec();
                    breaks.push(1.0);
                    let skip = b2.iter().take_while(|&&b| b <= 1.0).count();
                    exps.extend_from_slice(&e2[skip..]);
                    breaks.extend_from_slice(&b2[skip..]);
                    return ScaleDoc::PiecewisePower { breaks, exponents: exps };
                }
                let mut r: Vec<f64> = dyadic_grid(-20, 0)
                    .into_iter()
                    .chain(below.kinks().into_iter().filter(|&x| x > 0.0 && x < 1.0))
                    .collect();
                r.extend(dyadic_grid(1, 20));
                r.extend(above.kinks().into_iter().filter(|&x| x > 1.0));
                r.sort_by(f64::total_cmp);
                r.dedup();
                let v = r.iter().map(|&x| self.eval(x)).collect();
                ScaleDoc::Table { r, v }
            }
        }
    }
}

impl TryFrom<ScaleDoc> for ScaleFunction {
    type Error = Error;
    fn try_from(doc: ScaleDoc) -> Result<Self> {
        match doc {
            ScaleDoc::PiecewisePower { breaks, exponents } => Self::piecewise_power(breaks, exponents),
            ScaleDoc::Table { r, v } => Self::table(r, v),
        }
    }
}

impl From<ScaleFunction> for ScaleDoc {
    fn from(s: ScaleFunction) -> Self {
        s.to_doc()
    }
}

/// Piecewise-linear interpolation of `ys` over increasing `xs`, extended
/// linearly beyond both ends.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let i = match xs.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i.clamp(1, n - 1),
    };
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

fn range_grid(range: ScaleRange) -> Vec<f64> {
    match range {
        ScaleRange::Small => dyadic_grid(-20, 0),
        ScaleRange::Large => dyadic_grid(0, 20),
    }
}

/// Extreme exponents of `s` on one half-line.
fn half_window(s: &ScaleFunction, range: ScaleRange) -> (f64, f64) {
    match &s.repr {
        Repr::Power { breaks, exps, .. } => {
            let active = exps.iter().enumerate().filter(|&(i, _)| {
                let left = if i == 0 { 0.0 } else { breaks[i - 1] };
                let right = breaks.get(i).copied().unwrap_or(f64::INFINITY);
                match range {
                    ScaleRange::Small => left < 1.0,
                    ScaleRange::Large => right > 1.0,
                }
            });
            active.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &e)| (lo.min(e), hi.max(e)))
        }
        Repr::Spliced { below, above } => match range {
            ScaleRange::Small => half_window(below, range),
            ScaleRange::Large => half_window(above, range),
        },
        Repr::Table { .. } => (lower_scaling_index(s, range), upper_scaling_index(s, range)),
    }
}

fn pair_slopes(s: &ScaleFunction, range: ScaleRange) -> impl Iterator<Item = f64> + '_ {
    let grid = range_grid(range);
    let vals: Vec<f64> = grid.iter().map(|&r| s.eval(r).ln()).collect();
    let n = grid.len();
    (0..n).flat_map(move |i| {
        let grid = grid.clone();
        let vals = vals.clone();
        (i + 1..n).map(move |j| (vals[j] - vals[i]) / (grid[j] / grid[i]).ln())
    })
}

/// Minimum dyadic log-log slope of `s` over the chosen range; equals `α` for
/// a pure power `r^α`.
pub fn lower_scaling_index(s: &ScaleFunction, range: ScaleRange) -> f64 {
    pair_slopes(s, range).fold(f64::INFINITY, f64::min)
}

/// Maximum dyadic log-log slope of `s` over the chosen range.
pub fn upper_scaling_index(s: &ScaleFunction, range: ScaleRange) -> f64 {
    pair_slopes(s, range).fold(f64::NEG_INFINITY, f64::max)
}

fn check_strictly_increasing(s: &ScaleFunction, what: &str) -> Result<()> {
    let grid: Vec<f64> = (-160..=160).map(|k| 2f64.powf(k as f64 / 8.0)).collect();
    let vals: Vec<f64> = grid.iter().map(|&r| s.eval(r)).collect();
    for i in 0..grid.len() - 1 {
        if !(vals[i + 1] > vals[i]) {
            return Err(Error::NotMonotone {
                what: what.into(),
                r: grid[i],
                big_r: grid[i + 1],
            });
        }
    }
    Ok(())
}

/// The composite φ: `φ_j` or `φ_c` on `[0, 1]` according to `β_* ≤ 1` or
/// `β_* > 1`, and likewise on `(1, ∞)` according to `β^*`.
pub fn compose_phi(
    phi_j: &ScaleFunction,
    phi_c: &ScaleFunction,
    beta_star_small: f64,
    beta_star_large: f64,
) -> Result<ScaleFunction> {
    let below = if beta_star_small <= 1.0 { phi_j } else { phi_c };
    let above = if beta_star_large <= 1.0 { phi_j } else { phi_c };
    let phi = if below == above {
        below.clone()
    } else {
        ScaleFunction::splice(below.clone(), above.clone())
    };
    check_strictly_increasing(&phi, "composite phi")?;
    Ok(phi)
}

/// `φ̄_c(r) = φ_c(r)/r`, required to be strictly increasing.
pub fn make_bar_phi_c(phi_c: &ScaleFunction) -> Result<ScaleFunction> {
    let bar = match &phi_c.repr {
        Repr::Power { breaks, exps, .. } => {
            if let Some(i) = exps.iter().position(|&e| e <= 1.0) {
                let lo = if i == 0 { 0.0 } else { breaks[i - 1] };
                let hi = breaks.get(i).copied().unwrap_or(f64::INFINITY);
                return Err(Error::NotMonotone {
                    what: "phi_c(r)/r".into(),
                    r: lo,
                    big_r: hi,
                });
            }
            ScaleFunction::piecewise_power(breaks.clone(), exps.iter().map(|e| e - 1.0).collect())?
        }
        Repr::Table { lr, lv } => {
            let r: Vec<f64> = lr.iter().map(|x| x.exp()).collect();
            let v: Vec<f64> = lr.iter().zip(lv).map(|(a, b)| (b - a).exp()).collect();
            ScaleFunction::table(r, v).map_err(|e| match e {
                Error::NotMonotone { r, big_r, .. } => Error::NotMonotone {
                    what: "phi_c(r)/r".into(),
                    r,
                    big_r,
                },
                other => other,
            })?
        }
        Repr::Spliced { below, above } => ScaleFunction::splice(make_bar_phi_c(below)?, make_bar_phi_c(above)?),
    };
    check_strictly_increasing(&bar, "phi_c(r)/r")?;
    Ok(bar)
}

/// `Φ(r) = r² / (2 ∫₀^r s/φ_j(s) ds)` by adaptive quadrature at each radius
/// of `radii` (which must be increasing). The integral is accumulated piece
/// by piece, splitting at every kink of `φ_j`.
pub fn big_phi_values(phi_j: &ScaleFunction, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("radii for the Φ quadrature must be positive and increasing".into()));
    }
    let Some(&last) = radii.last() else {
        return Ok(vec![]);
    };
    let integrand = |s: f64| if s <= 0.0 { 0.0 } else { s / phi_j.eval(s) };
    let mut nodes: Vec<f64> = phi_j.kinks().into_iter().filter(|&k| k > 0.0 && k < last).collect();
    nodes.extend_from_slice(radii);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let tol = 1e-13;
    let mut acc = quad::gauss_kronrod_from_zero(integrand, nodes[0], tol)?.value;
    let mut out = Vec::with_capacity(radii.len());
    let mut next = 0;
    let mut prev = nodes[0];
    if radii[0] == prev {
        out.push(prev * prev / (2.0 * acc));
        next = 1;
    }
    for &node in &nodes[1..] {
        acc += quad::gauss_kronrod(integrand, prev, node, tol)?.value;
        prev = node;
        if next < radii.len() && radii[next] == node {
            out.push(node * node / (2.0 * acc));
            next += 1;
        }
    }
    if out.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Numeric("Φ quadrature produced a non-positive value".into()));
    }
    Ok(out)
}

/// Result of the Φ construction.
#[derive(Debug, Clone)]
pub struct PhiFromJump {
    /// `r²` on `[0, 1]`, `Φ(r)/Φ(1)` on `[1, ∞)` (tabulated on `[1, 2²⁰]`).
    pub phi_c: ScaleFunction,
    /// Unnormalized `Φ(1)`.
    pub big_phi_at_one: f64,
}

/// Build `φ_c` from `φ_j` through `Φ`. Requires the upper index of `φ_j` on
/// `(0, 1]` to be below 2.
pub fn phi_c_from_phi_j(phi_j: &ScaleFunction) -> Result<PhiFromJump> {
    let beta2_small = upper_scaling_index(phi_j, ScaleRange::Small);
    if beta2_small >= 2.0 {
        return Err(Error::Domain(format!(
            "phi_j must have upper index below 2 on (0, 1], found {beta2_small}"
        )));
    }
    let grid: Vec<f64> = (0..=160).map(|k| 2f64.powf(k as f64 / 8.0)).collect();
    let values = big_phi_values(phi_j, &grid)?;
    let at_one = values[0];
    let above = ScaleFunction::table(grid, values.iter().map(|v| v / at_one).collect()).map_err(|e| match e {
        Error::NotMonotone { r, big_r, .. } => Error::NotMonotone {
            what: "Φ".into(),
            r,
            big_r,
        },
        other => other,
    })?;
    let phi_c = ScaleFunction::splice(ScaleFunction::power(2.0)?, above);
    Ok(PhiFromJump {
        phi_c,
        big_phi_at_one: at_one,
    })
}

/// Estimated indices closer than this to 1 produce a warning.
pub const NEAR_ONE: f64 = 0.05;

/// `(φ_j, φ_c, φ, φ̄_c)` together with the lower scaling indices of `φ_j`.
#[derive(Debug, Clone)]
pub struct ScaleTriple {
    pub phi_j: ScaleFunction,
    pub phi_c: ScaleFunction,
    pub phi: ScaleFunction,
    pub bar_phi_c: ScaleFunction,
    /// β_*: lower index of φ_j on `(0, 1]`.
    pub beta_star_small: f64,
    /// β^*: lower index of φ_j on `[1, ∞)`.
    pub beta_star_large: f64,
    /// `max φ/φ_j` on the dyadic grid.
    pub c0: f64,
    pub warnings: Vec<String>,
}

impl ScaleTriple {
    pub fn new(phi_j: ScaleFunction, phi_c: ScaleFunction) -> Result<Self> {
        let beta_star_small = lower_scaling_index(&phi_j, ScaleRange::Small);
        let beta_star_large = lower_scaling_index(&phi_j, ScaleRange::Large);
        let bc = lower_scaling_index(&phi_c, ScaleRange::Small).min(lower_scaling_index(&phi_c, ScaleRange::Large));
        if bc <= 1.0 {
            return Err(Error::InvalidScale(format!("phi_c must have lower index above 1, found {bc}")));
        }
        let mut warnings = Vec::new();
        for (name, b) in [("beta_*", beta_star_small), ("beta^*", beta_star_large)] {
            if (b - 1.0).abs() < NEAR_ONE {
                let branch = if b <= 1.0 { "phi_j" } else { "phi_c" };
                warnings.push(format!("{name} = {b:.6} is within {NEAR_ONE} of 1; branch {branch} selected"));
            }
        }
        let phi = compose_phi(&phi_j, &phi_c, beta_star_small, beta_star_large)?;
        let bar_phi_c = make_bar_phi_c(&phi_c)?;
        let grid = dyadic_grid(-20, 20);
        let c0 = grid.iter().map(|&r| phi.eval(r) / phi_j.eval(r)).fold(0.0, f64::max);
        Ok(Self {
            phi_j,
            phi_c,
            phi,
            bar_phi_c,
            beta_star_small,
            beta_star_large,
            c0,
            warnings,
        })
    }

    /// Whether the heat kernel uses φ_c for small times.
    pub fn sub_gaussian_small(&self) -> bool {
        self.beta_star_small > 1.0
    }

    /// Whether the heat kernel uses φ_c for large times.
    pub fn sub_gaussian_large(&self) -> bool {
        self.beta_star_large > 1.0
    }

    /// Crossover radius at time `t` using the cached `φ̄_c`.
    pub fn crossover_radius(&self, t: f64, consts: CrossoverConstants) -> Result<Crossover> {
        crossover_with_bar(&self.phi_j, &self.phi_c, &self.bar_phi_c, t, consts)
    }
}

/// Constants `(C_*, C₀, C^*)` of the crossover functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverConstants {
    pub c_star: f64,
    pub c0: f64,
    pub c_upper: f64,
}

impl Default for CrossoverConstants {
    fn default() -> Self {
        Self {
            c_star: 1.0,
            c0: 1.0,
            c_upper: 4.0,
        }
    }
}

/// Outcome of [`crossover_radius`].
#[derive(Debug, Clone, PartialEq)]
pub enum Crossover {
    Radius {
        r_star: f64,
        bracket: (f64, f64),
    },
    NoCrossover {
        reason: String,
    },
}

impl Crossover {
    pub fn radius(&self) -> Option<f64> {
        match self {
            Crossover::Radius { r_star, .. } => Some(*r_star),
            Crossover::NoCrossover { .. } => None,
        }
    }
}

/// The two crossover functions at a fixed time, in logarithmic form:
///
/// ```text
/// F₁(r) = exp(C_* s) / s,  s = r / φ̄_c⁻¹(t/r)
/// F₂(r) = C^* φ̄_c⁻¹(t/r) / φ_j⁻¹(t)
/// ```
#[derive(Debug, Clone)]
pub struct CrossoverFunctions<'a> {
    bar_phi_c: &'a ScaleFunction,
    t: f64,
    inv_j: f64,
    consts: CrossoverConstants,
}

impl<'a> CrossoverFunctions<'a> {
    pub fn new(phi_j: &ScaleFunction, bar_phi_c: &'a ScaleFunction, t: f64, consts: CrossoverConstants) -> Self {
        Self {
            bar_phi_c,
            t,
            inv_j: phi_j.invert(t),
            consts,
        }
    }

    pub fn log_f1(&self, r: f64) -> f64 {
        let s = r / self.bar_phi_c.invert(self.t / r);
        self.consts.c_star * s - s.ln()
    }

    pub fn log_f2(&self, r: f64) -> f64 {
        (self.consts.c_upper * self.bar_phi_c.invert(self.t / r) / self.inv_j).ln()
    }
}

/// The radius where `F₁ = F₂` beyond `C₀ φ_c⁻¹(t)`.
pub fn crossover_radius(
    phi_j: &ScaleFunction,
    phi_c: &ScaleFunction,
    t: f64,
    consts: CrossoverConstants,
) -> Result<Crossover> {
    let bar = make_bar_phi_c(phi_c)?;
    crossover_with_bar(phi_j, phi_c, &bar, t, consts)
}

fn crossover_with_bar(
    phi_j: &ScaleFunction,
    phi_c: &ScaleFunction,
    bar: &ScaleFunction,
    t: f64,
    consts: CrossoverConstants,
) -> Result<Crossover> {
    if !(t >= 1.0) {
        return Err(Error::Domain(format!("crossover radius needs t >= 1, got {t}")));
    }
    let inv_c = phi_c.invert(t);
    let inv_j = phi_j.invert(t);
    let gap = (inv_c / inv_j).ln();
    if gap < -1e-9 {
        return Err(Error::Domain(format!(
            "crossover radius needs phi_c^-1(t) >= phi_j^-1(t); got {inv_c} < {inv_j}"
        )));
    }
    if gap <= 1e-9 {
        return Ok(Crossover::NoCrossover {
            reason: format!("phi_c^-1({t}) = phi_j^-1({t}); the sub-Gaussian band is empty"),
        });
    }
    let f = CrossoverFunctions::new(phi_j, bar, t, consts);
    let g = |r: f64| f.log_f1(r) - f.log_f2(r);
    let lo = consts.c0 * inv_c;
    if g(lo) >= 0.0 {
        return Ok(Crossover::NoCrossover {
            reason: format!("F1 >= F2 already at r = {lo}"),
        });
    }
    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 || !hi.is_finite() {
            return Ok(Crossover::NoCrossover {
                reason: "no sign change of F1 - F2 found".into(),
            });
        }
    }
    let samples: Vec<f64> = (0..=64).map(|k| lo * (hi / lo).powf(k as f64 / 64.0)).collect();
    for w in samples.windows(2) {
        if !(f.log_f1(w[1]) > f.log_f1(w[0])) {
            return Err(Error::NotMonotone {
                what: "crossover function F1".into(),
                r: w[0],
                big_r: w[1],
            });
        }
        if !(f.log_f2(w[1]) < f.log_f2(w[0])) {
            return Err(Error::Numeric(format!(
                "crossover function F2 is not decreasing between {} and {}",
                w[0], w[1]
            )));
        }
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        if (b - a) <= 1e-8 * b {
            break;
        }
        let m = 0.5 * (a + b);
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Crossover::Radius {
        r_star: 0.5 * (a + b),
        bracket: (lo, hi),
    })
}

/// The log-power shapes bounding the crossover radius:
/// `φ_c⁻¹(t)·L^{(β₁−1)/β₂}` and `φ_c⁻¹(t)·L^{(β₂−1)/β₁}` with
/// `L = log(φ_c⁻¹(t)/φ_j⁻¹(t))` and `(β₁, β₂)` the window of φ_c.
pub fn crossover_shape_bounds(phi_j: &ScaleFunction, phi_c: &ScaleFunction, t: f64) -> (f64, f64) {
    let inv_c = phi_c.invert(t);
    let l = (inv_c / phi_j.invert(t)).ln();
    let w = phi_c.window();
    (
        inv_c * l.powf((w.beta1 - 1.0) / w.beta2),
        inv_c * l.powf((w.beta2 - 1.0) / w.beta1),
    )
}
