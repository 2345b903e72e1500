//! Exact heat kernels by uniformization.
//!
//! With `Λ ≥ max_x |q_xx|` and the stochastic matrix `P = I + Q/Λ`,
//!
//! ```text
//! e^{tQ} = Σ_k e^{−Λt} (Λt)^k / k! · P^k
//! ```
//!
//! and `p(t, x, y) = [e^{tQ}]_xy / μ_y`. The series is cut once the
//! remaining Poisson mass drops below [`POISSON_TAIL`]. Only the rows that are
//! asked for are propagated, and the powers are shared across all requested
//! times.

use super::Generator;
use crate::linalg::matmul;
use crate::{Error, Result};
use serde::Serialize;
use std::io::{Read, Write};
use std::path::Path;

/// Truncation level of the Poisson series.
pub const POISSON_TAIL: f64 = 1e-12;

/// Largest space on which full matrices are built by default.
pub const DEFAULT_MATRIX_CAP: usize = 4096;

const MAX_TERMS: usize = 50_000_000;

/// Origin of a heat-kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSource {
    Exact,
    MonteCarlo,
}

/// Heat-kernel densities `p(t, x, y)` for the source points `x ∈ sources`
/// and every `y`, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelMatrix {
    pub t: f64,
    pub sources: Vec<usize>,
    pub points: usize,
    pub density: Vec<f64>,
    /// Per-cell standard error (Monte-Carlo only).
    pub std_err: Option<Vec<f64>>,
    pub source: KernelSource,
}

impl HeatKernelMatrix {
    /// Row `i` of the stored block (the row of `sources[i]`).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.density[i * self.points..(i + 1) * self.points]
    }

    /// Row of the point `x`, if `x` is a stored source.
    pub fn row_of(&self, x: usize) -> Option<&[f64]> {
        self.sources.iter().position(|&s| s == x).map(|i| self.row(i))
    }

    /// `p(t, x, y)` for a stored source `x`.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.row_of(x).map(|r| r[y])
    }

    /// True when every point is a source, in order.
    pub fn is_square(&self) -> bool {
        self.sources.len() == self.points && self.sources.iter().enumerate().all(|(i, &s)| i == s)
    }

    /// `max_{x,y} |p(t,x,y) − p(t,y,x)|`; needs a square matrix.
    pub fn symmetry_residual(&self) -> Result<f64> {
        self.require_square("symmetry residual")?;
        let n = self.points;
        let mut worst = 0.0f64;
        for x in 0..n {
            for y in 0..x {
                worst = worst.max((self.density[x * n + y] - self.density[y * n + x]).abs());
            }
        }
        Ok(worst)
    }

    /// `max_x |Σ_y p(t,x,y) μ_y − 1|`.
    pub fn mass_residual(&self, measure: &[f64]) -> f64 {
        (0..self.sources.len())
            .map(|i| {
                let s: f64 = self.row(i).iter().zip(measure).map(|(p, m)| p * m).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |p(s+t,x,z) − Σ_y p(s,x,y) p(t,y,z) μ_y|` for `self = p(s)`,
    /// `other = p(t)` and `sum = p(s+t)`, all square.
    pub fn chapman_kolmogorov_residual(&self, other: &Self, sum: &Self, measure: &[f64]) -> Result<f64> {
        self.require_square("Chapman-Kolmogorov residual")?;
        other.require_square("Chapman-Kolmogorov residual")?;
        sum.require_square("Chapman-Kolmogorov residual")?;
        let n = self.points;
        let mut left = self.density.clone();
        for x in 0..n {
            for y in 0..n {
                left[x * n + y] *= measure[y];
            }
        }
        let prod = matmul(&left, &other.density, n, n, n);
        Ok(prod
            .iter()
            .zip(&sum.density)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest value of `self − other` over common cells (positive when
    /// `self` exceeds `other` somewhere).
    pub fn max_excess_over(&self, other: &Self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, &x) in self.sources.iter().enumerate() {
            if let Some(o) = other.row_of(x) {
                for (a, b) in self.row(i).iter().zip(o) {
                    worst = worst.max(a - b);
                }
            }
        }
        worst
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Invalid(format!("{what} needs the full matrix")))
        }
    }

    /// CSV with header `t,x,y,p` (plus `se` for Monte-Carlo estimates).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        match &self.std_err {
            Some(_) => w.write_record(["t", "x", "y", "p", "se"]).map_err(csv_err)?,
            None => w.write_record(["t", "x", "y", "p"]).map_err(csv_err)?,
        }
        for (i, &x) in self.sources.iter().enumerate() {
            for y in 0..self.points {
                let p = self.density[i * self.points + y];
                let mut rec = vec![self.t.to_string(), x.to_string(), y.to_string(), p.to_string()];
                if let Some(se) = &self.std_err {
                    rec.push(se[i * self.points + y].to_string());
                }
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary layout: magic `HKM1`, `u32` N, `u64` reserved (zero), then
    /// `N·N` little-endian `f64` values in row-major order.
    pub fn write_hkm1<W: Write>(&self, mut out: W) -> Result<()> {
        self.require_square("HKM1 export")?;
        let n = u32::try_from(self.points)
            .map_err(|_| Error::Invalid(format!("{} points do not fit the HKM1 header", self.points)))?;
        out.write_all(b"HKM1")?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&0u64.to_le_bytes())?;
        for v in &self.density {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_hkm1(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_hkm1(std::io::BufWriter::new(f))
    }
}

/// Read an HKM1 matrix; returns `(N, values)`.
pub fn read_hkm1<R: Read>(mut input: R) -> Result<(usize, Vec<f64>)> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..4] != b"HKM1" {
        return Err(Error::Invalid("not an HKM1 file".into()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != n * n * 8 {
        return Err(Error::Invalid(format!(
            "HKM1 body has {} bytes, expected {}",
            bytes.len(),
            n * n * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((n, values))
}

/// Poisson weights `e^{−a} a^k / k!` for `k = 0..K` with tail `< POISSON_TAIL`.
fn poisson_weights(a: f64) -> Result<Vec<f64>> {
    if a == 0.0 {
        return Ok(vec![1.0]);
    }
    let la = a.ln();
    let mut lw = -a;
    let mut w = vec![lw.exp()];
    let mut cum = w[0];
    let mut k = 0usize;
    while !((k as f64) >= a && 1.0 - cum < POISSON_TAIL) {
        k += 1;
        if k > MAX_TERMS {
            return Err(Error::Numeric(format!("Poisson series for Λt = {a} needs too many terms")));
        }
        lw += la - (k as f64).ln();
        let v = lw.exp();
        w.push(v);
        cum += v;
        if (k as f64) > a && v < 1e-300 {
            break;
        }
    }
    Ok(w)
}

/// Propagate the rows `init` (`s × m`) through `P = I + Q/Λ` and return
/// `init · e^{tQ}` for each time.
fn propagate(q: &[f64], m: usize, lambda: f64, init: Vec<f64>, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let s = init.len() / m.max(1);
    if lambda <= 0.0 || times.iter().all(|&t| t == 0.0) {
        return Ok(times.iter().map(|_| init.clone()).collect());
    }
    let mut p = vec![0.0; m * m];
    for (i, v) in q.iter().enumerate() {
        p[i] = v / lambda;
    }
    for x in 0..m {
        p[x * m + x] += 1.0;
    }
    let weights = times
        .iter()
        .map(|&t| poisson_weights(lambda * t))
        .collect::<Result<Vec<_>>>()?;
    let kmax = weights.iter().map(Vec::len).max().unwrap_or(1);
    let mut acc: Vec<Vec<f64>> = times.iter().map(|_| vec![0.0; s * m]).collect();
    let mut b = init;
    for k in 0..kmax {
        for (a, w) in acc.iter_mut().zip(&weights) {
            if let Some(&wk) = w.get(k) {
                if wk > 0.0 {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += wk * y;
                    }
                }
            }
        }
        if k + 1 < kmax {
            b = matmul(&b, &p, s, m, m);
        }
    }
    Ok(acc)
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Domain(format!("heat kernel time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

fn check_sources(sources: &[usize], n: usize) -> Result<()> {
    if let Some(x) = sources.iter().find(|&&x| x >= n) {
        return Err(Error::Invalid(format!("source {x} is outside a space of {n} points")));
    }
    Ok(())
}

/// Exact rows `p(t, x, ·)` for every `x ∈ sources` and every time.
pub fn heat_kernel_rows(gen: &Generator, sources: &[usize], times: &[f64]) -> Result<Vec<HeatKernelMatrix>> {
    check_times(times)?;
    let n = gen.len();
    check_sources(sources, n)?;
    let mut init = vec![0.0; sources.len() * n];
    for (i, &x) in sources.iter().enumerate() {
        init[i * n + x] = 1.0;
    }
    let blocks = propagate(gen.rates(), n, gen.lambda(), init, times)?;
    let mu = gen.measure();
    Ok(blocks
        .into_iter()
        .zip(times)
        .map(|(mut block, &t)| {
            for row in block.chunks_mut(n.max(1)) {
                for (v, m) in row.iter_mut().zip(mu) {
                    *v /= m;
                }
            }
            HeatKernelMatrix {
                t,
                sources: sources.to_vec(),
                points: n,
                density: block,
                std_err: None,
                source: KernelSource::Exact,
            }
        })
        .collect())
}

/// Full exact heat kernel at several times.
pub fn exact_heat_kernels(gen: &Generator, times: &[f64]) -> Result<Vec<HeatKernelMatrix>> {
    if gen.len() > DEFAULT_MATRIX_CAP {
        return Err(Error::SizeCap {
            what: "heat kernel matrix".into(),
            requested: gen.len(),
            cap: DEFAULT_MATRIX_CAP,
        });
    }
    let all: Vec<usize> = (0..gen.len()).collect();
    heat_kernel_rows(gen, &all, times)
}

/// Full exact heat kernel `p(t, ·, ·)`.
pub fn exact_heat_kernel(gen: &Generator, t: f64) -> Result<HeatKernelMatrix> {
    Ok(exact_heat_kernels(gen, &[t])?.remove(0))
}

/// Rows of the Dirichlet heat kernel `p^D(t, x, ·)` of the process killed on
/// leaving `domain`; entries outside `domain` are zero.
pub fn dirichlet_heat_kernel_rows(
    gen: &Generator,
    domain: &[usize],
    sources: &[usize],
    times: &[f64],
) -> Result<Vec<HeatKernelMatrix>> {
    check_times(times)?;
    let n = gen.len();
    if domain.is_empty() {
        return Err(Error::Invalid("Dirichlet domain is empty".into()));
    }
    check_sources(domain, n)?;
    let mut local = vec![usize::MAX; n];
    for (i, &x) in domain.iter().enumerate() {
        if local[x] != usize::MAX {
            return Err(Error::Invalid(format!("point {x} repeated in the Dirichlet domain")));
        }
        local[x] = i;
    }
    check_sources(sources, n)?;
    if let Some(x) = sources.iter().find(|&&x| local[x] == usize::MAX) {
        return Err(Error::Invalid(format!("source {x} is outside the Dirichlet domain")));
    }
    let m = domain.len();
    let mut q = vec![0.0; m * m];
    let mut lambda = 0.0f64;
    for (i, &x) in domain.iter().enumerate() {
        for (j, &y) in domain.iter().enumerate() {
            q[i * m + j] = gen.rate(x, y);
        }
        lambda = lambda.max(gen.escape_rate(x));
    }
    let mut init = vec![0.0; sources.len() * m];
    for (i, &x) in sources.iter().enumerate() {
        init[i * m + local[x]] = 1.0;
    }
    let blocks = propagate(&q, m, lambda, init, times)?;
    let mu = gen.measure();
    Ok(blocks
        .into_iter()
        .zip(times)
        .map(|(block, &t)| {
            let mut density = vec![0.0; sources.len() * n];
            for i in 0..sources.len() {
                for (j, &y) in domain.iter().enumerate() {
                    density[i * n + y] = block[i * m + j] / mu[y];
                }
            }
            HeatKernelMatrix {
                t,
                sources: sources.to_vec(),
                points: n,
                density,
                std_err: None,
                source: KernelSource::Exact,
            }
        })
        .collect())
}

/// Dirichlet heat kernel `p^D(t, ·, ·)` with every point of `domain` as a
/// source, embedded in the full index space.
pub fn dirichlet_heat_kernel(gen: &Generator, domain: &[usize], t: f64) -> Result<HeatKernelMatrix> {
    Ok(dirichlet_heat_kernel_rows(gen, domain, domain, &[t])?.remove(0))
}
