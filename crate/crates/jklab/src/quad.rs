//! One-dimensional quadrature.
//!
//! Two unrelated rules are provided so that results can be cross-checked:
//! a globally adaptive Gauss–Kronrod (7, 15) rule and a tanh–sinh
//! (double-exponential) rule. Both accept integrable endpoint singularities at
//! the left end of the interval; Gauss–Kronrod handles them by geometric
//! splitting towards the singular point.

use crate::{Error, Result};
use std::collections::BinaryHeap;

/// A quadrature value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Which rule to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    GaussKronrod,
    TanhSinh,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quadrature {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        kron += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Quadrature {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

struct Piece {
    a: f64,
    b: f64,
    q: Quadrature,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature on a finite interval.
///
/// Stops when the summed error estimate falls below `rel_tol·|I|` (or an
/// absolute floor of `1e-300`).
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let first = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    let mut total = first.value;
    let mut err = first.error;
    heap.push(Piece { a, b, q: first });
    let mut splits = 0usize;
    while err > rel_tol * total.abs() && err > 1e-300 {
        if splits >= 5000 {
            return Err(Error::Numeric(format!(
                "Gauss-Kronrod did not converge on [{a}, {b}]: value {total}, error {err}"
            )));
        }
        let piece = heap.pop().expect("heap is never empty");
        let m = 0.5 * (piece.a + piece.b);
        if m <= piece.a || m >= piece.b {
            break;
        }
        let left = gk15(&f, piece.a, m);
        let right = gk15(&f, m, piece.b);
        total += left.value + right.value - piece.q.value;
        err += left.error + right.error - piece.q.error;
        heap.push(Piece { a: piece.a, b: m, q: left });
        heap.push(Piece { a: m, b: piece.b, q: right });
        splits += 1;
        if splits.is_multiple_of(64) {
            err = heap.iter().map(|p| p.q.error).sum();
            total = heap.iter().map(|p| p.q.value).sum();
        }
    }
    Ok(Quadrature { value: total, error: err })
}

/// Gauss–Kronrod on `(0, b]` for integrands with an integrable singularity or
/// power behaviour at `0`.
///
/// The interval is split into dyadic pieces `[b/2^{k+1}, b/2^k]`; once the
/// pieces shrink geometrically the remainder is summed as a geometric tail.
pub fn gauss_kronrod_from_zero<F: Fn(f64) -> f64>(f: F, b: f64, rel_tol: f64) -> Result<Quadrature> {
    if b <= 0.0 {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let mut total = 0.0;
    let mut err = 0.0;
    let mut hi = b;
    let mut prev: Option<f64> = None;
    let mut small_run = 0;
    for _ in 0..2000 {
        let lo = 0.5 * hi;
        let q = gauss_kronrod(&f, lo, hi, rel_tol * 0.1)?;
        total += q.value;
        err += q.error;
        if let Some(p) = prev {
            let ratio = if p != 0.0 { q.value / p } else { 0.0 };
            let tail_small = q.value.abs() <= rel_tol * 1e-3 * total.abs();
            if ratio.abs() < 0.95 && ratio >= 0.0 {
                let tail = q.value * ratio / (1.0 - ratio);
                if tail.abs() <= rel_tol * 0.1 * total.abs() || tail_small {
                    small_run += 1;
                    if small_run >= 3 {
                        total += tail;
                        err += tail.abs() * 0.5;
                        return Ok(Quadrature { value: total, error: err });
                    }
                } else {
                    small_run = 0;
                }
            } else if q.value == 0.0 && total != 0.0 {
                return Ok(Quadrature { value: total, error: err });
            } else {
                small_run = 0;
            }
        }
        prev = Some(q.value);
        hi = lo;
        if hi == 0.0 {
            break;
        }
    }
    Err(Error::Numeric(format!(
        "dyadic splitting towards 0 did not converge on (0, {b}]: partial value {total}"
    )))
}

/// Tanh–sinh quadrature on `[a, b]`; endpoint singularities are allowed.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let half = 0.5 * (b - a);
    let t_max = 4.5_f64;
    let pi2 = std::f64::consts::FRAC_PI_2;
    // contribution of abscissa t > 0 (both sides) with weight w(t)
    let pair = |t: f64| -> f64 {
        let u = pi2 * t.sinh();
        let cu = u.cosh();
        let w = pi2 * t.cosh() / (cu * cu);
        // distance from the endpoints in units of `half`: 1 - tanh(u)
        let gap = 2.0 / ((2.0 * u).exp() + 1.0);
        let dx = half * gap;
        let mut s = 0.0;
        let xl = a + dx;
        let xr = b - dx;
        if xl > a && xl < b {
            s += f(xl);
        }
        if xr > a && xr < b {
            s += f(xr);
        }
        w * s
    };
    let mut h = 1.0_f64;
    let mut sum = pi2 * f(a + half);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        sum += pair(t);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _level in 0..14 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            add += pair(t);
            k += 2;
        }
        sum += add;
        let next = sum * h * half;
        let diff = (next - estimate).abs();
        estimate = next;
        if !next.is_finite() {
            break;
        }
        if diff <= rel_tol * next.abs() * 0.1 || diff < 1e-300 {
            return Ok(Quadrature { value: next, error: diff });
        }
    }
    Err(Error::Numeric(format!(
        "tanh-sinh did not converge on [{a}, {b}]: estimate {estimate}"
    )))
}

/// Integrate over `(0, b]` with the requested rule (singularity at 0 allowed).
pub fn integrate_from_zero<F: Fn(f64) -> f64>(rule: Rule, f: F, b: f64, rel_tol: f64) -> Result<Quadrature> {
    match rule {
        Rule::GaussKronrod => gauss_kronrod_from_zero(f, b, rel_tol),
        Rule::TanhSinh => tanh_sinh(f, 0.0, b, rel_tol),
    }
}

/// Integrate over a finite interval with the requested rule.
pub fn integrate<F: Fn(f64) -> f64>(rule: Rule, f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature> {
    match rule {
        Rule::GaussKronrod => gauss_kronrod(f, a, b, rel_tol),
        Rule::TanhSinh => tanh_sinh(f, a, b, rel_tol),
    }
}

/// Integrate over `[a, ∞)` through the substitution `s = a/u`, `u ∈ (0, 1]`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(rule: Rule, f: F, a: f64, rel_tol: f64) -> Result<Quadrature> {
    if a <= 0.0 {
        return Err(Error::Domain(format!("semi-infinite quadrature needs a > 0, got {a}")));
    }
    let g = |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            f(a / u) * a / (u * u)
        }
    };
    integrate_from_zero(rule, g, 1.0, rel_tol)
}
