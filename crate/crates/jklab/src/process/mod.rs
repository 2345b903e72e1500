//! Symmetric jump processes on finite spaces.
//!
//! A jump kernel `J(x, y)` and a measure `μ` give the generator
//! `q_xy = J(x, y) μ_y` for `x ≠ y` and `q_xx = −Σ_y q_xy`. The associated
//! Dirichlet form is
//!
//! ```text
//! ℰ(f, f) = Σ_{x ≠ y} (f(x) − f(y))² J(x, y) μ_x μ_y
//! ```
//!
//! summed over ordered pairs.

mod heat;
mod paths;
mod solve;
mod subordinator;

pub use heat::{
    dirichlet_heat_kernel, dirichlet_heat_kernel_rows, exact_heat_kernel, exact_heat_kernels, heat_kernel_rows,
    read_hkm1, HeatKernelMatrix, KernelSource, DEFAULT_MATRIX_CAP, POISSON_TAIL,
};
pub use paths::{
    mc_mean_exit_time, monte_carlo_heat_kernel, simulate_jump_path, simulate_subordinate_path, write_paths_csv,
    McEstimate, PathSample, PathSimulator,
};
pub use solve::{
    capacity, capacity_with_potential, dense_dirichlet_eigenvalues, dirichlet_eigenvalue, energy, exit_times, mean_exit_time,
    subordinate_generator, CG_TOL,
};
pub use subordinator::SubordinatorSpec;

use crate::scale::ScaleFunction;
use crate::space::FiniteMetricMeasureSpace;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Symmetric modulation `a(x, y)` of the scale-form kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Modulation {
    Constant { value: f64 },
    /// Independent uniform values in `[low, high]`, one per unordered pair,
    /// determined by `seed`.
    Random { low: f64, high: f64, seed: u64 },
}

impl Default for Modulation {
    fn default() -> Self {
        Modulation::Constant { value: 1.0 }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Modulation {
    pub fn value(&self, x: usize, y: usize) -> f64 {
        match *self {
            Modulation::Constant { value } => value,
            Modulation::Random { low, high, seed } => {
                let (a, b) = if x < y { (x, y) } else { (y, x) };
                let h = splitmix(seed ^ splitmix(((a as u64) << 32) ^ b as u64));
                low + (high - low) * ((h >> 11) as f64 / (1u64 << 53) as f64)
            }
        }
    }

    /// `(κ_low, κ_up)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Modulation::Constant { value } => (value, value),
            Modulation::Random { low, high, .. } => (low, high),
        }
    }
}

/// A jump kernel: `a(x,y) / (V(x,d) φ_j(d))` or an explicit symmetric matrix,
/// optionally truncated at a radius.
///
/// On spaces where `V(x, ·)` depends on `x`, the scale form uses the
/// geometric mean `sqrt(V(x,d) V(y,d))` so that the kernel is exactly
/// symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpKernelSpec {
    Scale {
        phi_j: ScaleFunction,
        #[serde(default)]
        modulation: Modulation,
        #[serde(default)]
        cutoff: Option<f64>,
    },
    Explicit {
        n: usize,
        values: Vec<f64>,
        #[serde(default)]
        cutoff: Option<f64>,
    },
}

impl JumpKernelSpec {
    /// `1/(V(x,d) φ_j(d))`.
    pub fn scale_form(phi_j: ScaleFunction) -> Self {
        JumpKernelSpec::Scale {
            phi_j,
            modulation: Modulation::default(),
            cutoff: None,
        }
    }

    /// Explicit symmetric nonnegative matrix (diagonal ignored).
    pub fn explicit(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidKernel(format!("{} values for {n} points", values.len())));
        }
        for x in 0..n {
            for y in 0..x {
                let (a, b) = (values[x * n + y], values[y * n + x]);
                if !(a.is_finite() && a >= 0.0) || (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(Error::InvalidKernel(format!("entry ({x},{y}) = {a} vs ({y},{x}) = {b}")));
                }
            }
        }
        Ok(JumpKernelSpec::Explicit {
            n,
            values,
            cutoff: None,
        })
    }

    /// Nearest-neighbour kernel: every pair at the minimal distance from `x`
    /// jumps at rate `edge_rate` (for equal weights).
    pub fn nearest_neighbour(space: &FiniteMetricMeasureSpace, edge_rate: f64) -> Result<Self> {
        let n = space.len();
        let mut values = vec![0.0; n * n];
        for x in 0..n {
            let step = space.min_step(x);
            for y in 0..n {
                if x != y && space.distance(x, y) <= step * (1.0 + 1e-9) {
                    let w = edge_rate / (space.measure(x) * space.measure(y)).sqrt();
                    values[x * n + y] = w;
                    values[y * n + x] = w;
                }
            }
        }
        Self::explicit(n, values)
    }

    /// `J^(ρ)(x, y) = J(x, y) 1{d(x, y) ≤ ρ}`.
    pub fn truncate(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Invalid(format!("truncation radius must be positive, got {rho}")));
        }
        let mut out = self.clone();
        match &mut out {
            JumpKernelSpec::Scale { cutoff, .. } | JumpKernelSpec::Explicit { cutoff, .. } => {
                *cutoff = Some(cutoff.map_or(rho, |c| c.min(rho)));
            }
        }
        Ok(out)
    }

    pub fn cutoff(&self) -> Option<f64> {
        match self {
            JumpKernelSpec::Scale { cutoff, .. } | JumpKernelSpec::Explicit { cutoff, .. } => *cutoff,
        }
    }

    /// `J(x, y)`; zero on the diagonal.
    pub fn density(&self, space: &FiniteMetricMeasureSpace, x: usize, y: usize) -> f64 {
        if x == y {
            return 0.0;
        }
        let d = space.distance(x, y);
        if let Some(rho) = self.cutoff() {
            if d > rho * (1.0 + 1e-9) {
                return 0.0;
            }
        }
        match self {
            JumpKernelSpec::Scale { phi_j, modulation, .. } => {
                let v = if space.is_transitive() {
                    space.volume(x, d)
                } else {
                    (space.volume(x, d) * space.volume(y, d)).sqrt()
                };
                modulation.value(x, y) / (v * phi_j.eval(d))
            }
            JumpKernelSpec::Explicit { n, values, .. } => values[x * n + y],
        }
    }

    /// Dense `J` on `space`, checked for symmetry and nonnegativity.
    pub fn materialize(&self, space: &FiniteMetricMeasureSpace) -> Result<Vec<f64>> {
        let n = space.len();
        if let JumpKernelSpec::Explicit { n: k, .. } = self {
            if *k != n {
                return Err(Error::InvalidKernel(format!("kernel has {k} points, space has {n}")));
            }
        }
        let mut j = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                j[x * n + y] = self.density(space, x, y);
            }
        }
        Ok(j)
    }
}

/// The generator `Q` of the jump process.
#[derive(Debug, Clone)]
pub struct Generator {
    n: usize,
    q: Vec<f64>,
    measure: Vec<f64>,
    lambda: f64,
}

/// Build the generator of `kernel` on `space`, capped at
/// [`DEFAULT_MATRIX_CAP`] points.
pub fn build_generator(space: &FiniteMetricMeasureSpace, kernel: &JumpKernelSpec) -> Result<Generator> {
    Generator::build(space, kernel, DEFAULT_MATRIX_CAP)
}

impl Generator {
    pub fn build(space: &FiniteMetricMeasureSpace, kernel: &JumpKernelSpec, cap: usize) -> Result<Self> {
        if space.len() > cap {
            return Err(Error::SizeCap {
                what: "generator".into(),
                requested: space.len(),
                cap,
            });
        }
        let j = kernel.materialize(space)?;
        Self::from_jump_matrix(&j, space.measures())
    }

    /// From a dense jump matrix `J` and measure `μ`.
    pub fn from_jump_matrix(j: &[f64], measure: &[f64]) -> Result<Self> {
        let n = measure.len();
        if j.len() != n * n {
            return Err(Error::InvalidKernel("jump matrix has the wrong size".into()));
        }
        let mut q = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    q[x * n + y] = j[x * n + y] * measure[y];
                }
            }
        }
        Self::from_rates(n, q, measure.to_vec())
    }

    /// From off-diagonal rates (the diagonal is recomputed), checking
    /// nonnegativity and detailed balance `μ_x q_xy = μ_y q_yx`.
    pub fn from_rates(n: usize, mut q: Vec<f64>, measure: Vec<f64>) -> Result<Self> {
        if q.len() != n * n || measure.len() != n {
            return Err(Error::InvalidKernel("rate matrix has the wrong size".into()));
        }
        if let Some(i) = measure.iter().position(|m| !(*m > 0.0)) {
            return Err(Error::InvalidKernel(format!("measure of point {i} is not positive")));
        }
        for x in 0..n {
            for y in 0..n {
                if x == y {
                    continue;
                }
                let r = q[x * n + y];
                if !(r.is_finite() && r >= 0.0) {
                    return Err(Error::InvalidKernel(format!("rate q({x},{y}) = {r}")));
                }
                if y < x {
                    let (a, b) = (measure[x] * r, measure[y] * q[y * n + x]);
                    if (a - b).abs() > 1e-12 * a.max(b) {
                        return Err(Error::InvalidKernel(format!(
                            "detailed balance fails at ({x},{y}): {a} vs {b}"
                        )));
                    }
                }
            }
        }
        let mut lambda = 0.0f64;
        for x in 0..n {
            q[x * n + x] = 0.0;
            let s: f64 = q[x * n..(x + 1) * n].iter().sum();
            q[x * n + x] = -s;
            lambda = lambda.max(s);
        }
        Ok(Self { n, q, measure, lambda })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.q[x * self.n + y]
    }

    /// `−q_xx`.
    pub fn escape_rate(&self, x: usize) -> f64 {
        -self.q[x * self.n + x]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.q[x * self.n..(x + 1) * self.n]
    }

    /// Row-major rates including the diagonal.
    pub fn rates(&self) -> &[f64] {
        &self.q
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Uniformization rate `Λ = max_x |q_xx|`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `J(x, y) = q_xy / μ_y`.
    pub fn jump_density(&self, x: usize, y: usize) -> f64 {
        if x == y {
            0.0
        } else {
            self.rate(x, y) / self.measure[y]
        }
    }

    /// Largest row-sum residual `|Σ_y q_xy|`.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.n)
            .map(|x| self.row(x).iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative detailed-balance residual.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.n {
            for y in 0..x {
                let a = self.measure[x] * self.rate(x, y);
                let b = self.measure[y] * self.rate(y, x);
                if a.max(b) > 0.0 {
                    worst = worst.max((a - b).abs() / a.max(b));
                }
            }
        }
        worst
    }

    /// Generator with the rate of every listed pair multiplied by `factor`
    /// in both directions.
    pub fn scaled_pairs(&self, pairs: &[(usize, usize)], factor: f64) -> Result<Self> {
        let mut q = self.q.clone();
        for &(x, y) in pairs {
            if x != y {
                q[x * self.n + y] *= factor;
                q[y * self.n + x] *= factor;
            }
        }
        Self::from_rates(self.n, q, self.measure.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_generator() {
        let j = JumpKernelSpec::explicit(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let s = FiniteMetricMeasureSpace::from_metric(2, vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = build_generator(&s, &j).unwrap();
        assert_eq!(g.rates(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(g.lambda(), 1.0);
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        assert!(JumpKernelSpec::explicit(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(JumpKernelSpec::explicit(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn example_kernel_escape_rate() {
        let s = FiniteMetricMeasureSpace::lattice_torus(1, 256, 1.0).unwrap();
        let k = JumpKernelSpec::scale_form(ScaleFunction::two_power(1.0, 3.0).unwrap());
        let g = build_generator(&s, &k).unwrap();
        // Σ_{d≥1} 2 / ((2d+1) φ_j(d)) over the torus
        let mut direct = 0.0;
        for d in 1..=128usize {
            let mult = if d == 128 { 1.0 } else { 2.0 };
            let v = (2 * d + 1).min(256) as f64;
            let phi = if d == 1 { 1.0 } else { (d as f64).powi(3) };
            direct += mult / (v * phi);
        }
        assert!((g.escape_rate(17) - direct).abs() < 1e-14);
        assert!(g.row_sum_residual() < 1e-12);
    }

    #[test]
    fn modulation_is_symmetric_and_bounded() {
        let m = Modulation::Random {
            low: 0.5,
            high: 2.0,
            seed: 9,
        };
        for x in 0..20 {
            for y in 0..20 {
                let v = m.value(x, y);
                assert_eq!(v, m.value(y, x));
                assert!((0.5..=2.0).contains(&v));
            }
        }
    }
}
