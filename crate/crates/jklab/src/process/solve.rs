//! Linear solves on subsets: exit times, capacities, Dirichlet eigenvalues,
//! and spectral subordination.

use super::Generator;
use crate::linalg::{conjugate_gradient, dot};
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Relative residual for the conjugate-gradient solves.
pub const CG_TOL: f64 = 1e-10;

const EIGEN_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 500;
const DENSE_CAP: usize = 4096;

fn index_set(gen: &Generator, set: &[usize], what: &str) -> Result<Vec<bool>> {
    let n = gen.len();
    let mut mark = vec![false; n];
    for &x in set {
        if x >= n {
            return Err(Error::Invalid(format!("{what} contains {x}, outside a space of {n} points")));
        }
        if mark[x] {
            return Err(Error::Invalid(format!("{what} contains {x} twice")));
        }
        mark[x] = true;
    }
    Ok(mark)
}

/// `out = diag(μ)(−Q_DD) v` on the index list `dom`.
fn apply_killed(gen: &Generator, dom: &[usize], v: &[f64], out: &mut [f64]) {
    let mu = gen.measure();
    for (i, &x) in dom.iter().enumerate() {
        let row = gen.row(x);
        let mut s = 0.0;
        for (j, &y) in dom.iter().enumerate() {
            s += row[y] * v[j];
        }
        out[i] = -mu[x] * s;
    }
}

fn killed_diag(gen: &Generator, dom: &[usize]) -> Vec<f64> {
    dom.iter().map(|&x| gen.measure()[x] * gen.escape_rate(x)).collect()
}

/// Mean exit times `E^x[τ_B]` for every `x ∈ ball`, in the order of `ball`.
///
/// Solves `−Q_BB u = 1` (symmetrized by `μ`) with preconditioned conjugate
/// gradients.
pub fn exit_times(gen: &Generator, ball: &[usize]) -> Result<Vec<f64>> {
    index_set(gen, ball, "ball")?;
    if ball.is_empty() {
        return Err(Error::Invalid("ball is empty".into()));
    }
    if ball.len() == gen.len() {
        return Err(Error::Numeric("the exit time from the whole space is infinite".into()));
    }
    let rhs: Vec<f64> = ball.iter().map(|&x| gen.measure()[x]).collect();
    conjugate_gradient(
        |v, out| apply_killed(gen, ball, v, out),
        &killed_diag(gen, ball),
        &rhs,
        CG_TOL,
    )
}

/// `E^x[τ_B]`.
pub fn mean_exit_time(gen: &Generator, ball: &[usize], x: usize) -> Result<f64> {
    let i = ball
        .iter()
        .position(|&y| y == x)
        .ok_or_else(|| Error::Invalid(format!("start {x} is not in the ball")))?;
    Ok(exit_times(gen, ball)?[i])
}

/// `ℰ(f, f) = Σ_{x ≠ y} (f(x) − f(y))² μ_x q_xy`.
pub fn energy(gen: &Generator, f: &[f64]) -> Result<f64> {
    let n = gen.len();
    if f.len() != n {
        return Err(Error::Invalid(format!("function has {} values for {n} points", f.len())));
    }
    let mu = gen.measure();
    let mut e = 0.0;
    for x in 0..n {
        let row = gen.row(x);
        for y in 0..n {
            if y != x {
                let d = f[x] - f[y];
                e += d * d * mu[x] * row[y];
            }
        }
    }
    Ok(e)
}

/// Relative capacity `cap(A, B)`: the minimal energy of `φ` with `φ = 1` on
/// `A` and `φ = 0` off `B`. Returns the value and the minimizer.
pub fn capacity_with_potential(gen: &Generator, a: &[usize], b: &[usize]) -> Result<(f64, Vec<f64>)> {
    let n = gen.len();
    let in_a = index_set(gen, a, "A")?;
    let in_b = index_set(gen, b, "B")?;
    if a.is_empty() {
        return Err(Error::Invalid("capacity needs a nonempty A".into()));
    }
    if let Some(x) = a.iter().find(|&&x| !in_b[x]) {
        return Err(Error::Invalid(format!("A is not contained in B: {x}")));
    }
    if a.len() == n {
        return Err(Error::Invalid("capacity is undefined when A is the whole space".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&x| in_b[x] && !in_a[x]).collect();
    let mut phi: Vec<f64> = in_a.iter().map(|&i| if i { 1.0 } else { 0.0 }).collect();
    if !free.is_empty() {
        let mu = gen.measure();
        let rhs: Vec<f64> = free
            .iter()
            .map(|&x| a.iter().map(|&y| mu[x] * gen.rate(x, y)).sum())
            .collect();
        let sol = conjugate_gradient(
            |v, out| apply_killed(gen, &free, v, out),
            &killed_diag(gen, &free),
            &rhs,
            CG_TOL,
        )?;
        for (&x, v) in free.iter().zip(sol) {
            phi[x] = v;
        }
    }
    Ok((energy(gen, &phi)?, phi))
}

/// Relative capacity `cap(A, B)`.
pub fn capacity(gen: &Generator, a: &[usize], b: &[usize]) -> Result<f64> {
    Ok(capacity_with_potential(gen, a, b)?.0)
}

/// Smallest eigenvalue of `−Q` killed outside `domain`, by inverse iteration.
pub fn dirichlet_eigenvalue(gen: &Generator, domain: &[usize]) -> Result<f64> {
    index_set(gen, domain, "domain")?;
    if domain.is_empty() {
        return Err(Error::Invalid("domain is empty".into()));
    }
    if domain.len() == gen.len() {
        return Err(Error::Invalid("the Dirichlet problem needs a proper subset".into()));
    }
    let mu: Vec<f64> = domain.iter().map(|&x| gen.measure()[x]).collect();
    let diag = killed_diag(gen, domain);
    let m_norm = |v: &[f64]| v.iter().zip(&mu).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
    let mut v = vec![1.0; domain.len()];
    let nv = m_norm(&v);
    v.iter_mut().for_each(|a| *a /= nv);
    let mut av = vec![0.0; v.len()];
    let mut lambda = f64::INFINITY;
    for _ in 0..EIGEN_MAX_ITER {
        let rhs: Vec<f64> = v.iter().zip(&mu).map(|(a, m)| a * m).collect();
        let mut w = conjugate_gradient(|x, out| apply_killed(gen, domain, x, out), &diag, &rhs, EIGEN_TOL)?;
        let nw = m_norm(&w);
        w.iter_mut().for_each(|a| *a /= nw);
        apply_killed(gen, domain, &w, &mut av);
        let next = dot(&w, &av);
        v = w;
        if (next - lambda).abs() <= EIGEN_TOL * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numeric(format!(
        "inverse iteration did not converge in {EIGEN_MAX_ITER} steps (last value {lambda})"
    )))
}

/// `M^{1/2}(−Q_DD)M^{−1/2}` as a dense symmetric matrix.
fn symmetric_block(gen: &Generator, dom: &[usize]) -> DMatrix<f64> {
    let mu = gen.measure();
    let m = dom.len();
    let mut s = DMatrix::zeros(m, m);
    for (i, &x) in dom.iter().enumerate() {
        for (j, &y) in dom.iter().enumerate() {
            s[(i, j)] = -gen.rate(x, y) * (mu[x] / mu[y]).sqrt();
        }
    }
    s.clone() * 0.5 + s.transpose() * 0.5
}

/// All eigenvalues of `−Q` killed outside `domain`, ascending, from a dense
/// symmetric eigendecomposition.
pub fn dense_dirichlet_eigenvalues(gen: &Generator, domain: &[usize]) -> Result<Vec<f64>> {
    index_set(gen, domain, "domain")?;
    if domain.len() > DENSE_CAP {
        return Err(Error::SizeCap {
            what: "dense eigendecomposition".into(),
            requested: domain.len(),
            cap: DENSE_CAP,
        });
    }
    let eig = SymmetricEigen::new(symmetric_block(gen, domain));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Generator of the subordinate process: `−Q_Y = f(−Q)` for a Bernstein
/// function `f` (e.g. a Laplace exponent), by spectral decomposition.
pub fn subordinate_generator(gen: &Generator, f: &dyn Fn(f64) -> Result<f64>) -> Result<Generator> {
    let n = gen.len();
    if n > DENSE_CAP {
        return Err(Error::SizeCap {
            what: "subordinate generator".into(),
            requested: n,
            cap: DENSE_CAP,
        });
    }
    let all: Vec<usize> = (0..n).collect();
    let eig = SymmetricEigen::new(symmetric_block(gen, &all));
    let fl = eig
        .eigenvalues
        .iter()
        .map(|&l| f(l.max(0.0)))
        .collect::<Result<Vec<f64>>>()?;
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, &v) in fl.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    let fs = &scaled * u.transpose();
    let fs = (&fs + fs.transpose()) * 0.5;
    let scale = fs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mu = gen.measure();
    let mut q = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let mut r = -fs[(x, y)] * (mu[y] / mu[x]).sqrt();
            if r < 0.0 {
                if -r > 1e-9 * scale {
                    return Err(Error::Numeric(format!("subordinate rate ({x},{y}) is negative: {r}")));
                }
                r = 0.0;
            }
            q[x * n + y] = r;
        }
    }
    Generator::from_rates(n, q, mu.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(j: f64, ma: f64, mb: f64) -> Generator {
        Generator::from_rates(2, vec![0.0, j * mb, j * ma, 0.0], vec![ma, mb]).unwrap()
    }

    #[test]
    fn two_state_exit_time() {
        let g = two_point(1.5, 1.0, 2.0);
        assert!((mean_exit_time(&g, &[0], 0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_capacity() {
        let g = two_point(1.5, 1.0, 2.0);
        let c = capacity(&g, &[0], &[0]).unwrap();
        assert!((c - 2.0 * 1.5 * 1.0 * 2.0).abs() < 1e-12);
        assert!(capacity(&g, &[0, 1], &[0, 1]).is_err());
        assert!(capacity(&g, &[], &[0]).is_err());
        assert!(capacity(&g, &[1], &[0]).is_err());
    }

    #[test]
    fn inverse_iteration_matches_dense() {
        let n = 12;
        let mut q = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    q[x * n + y] = 1.0 / (1.0 + (x as f64 - y as f64).abs());
                }
            }
        }
        let g = Generator::from_rates(n, q, vec![1.0; n]).unwrap();
        let dom: Vec<usize> = (2..9).collect();
        let a = dirichlet_eigenvalue(&g, &dom).unwrap();
        let b = dense_dirichlet_eigenvalues(&g, &dom).unwrap()[0];
        assert!((a - b).abs() < 1e-10 * b);
    }

    #[test]
    fn identity_subordination_returns_the_generator() {
        let g = two_point(1.0, 1.0, 3.0);
        let s = subordinate_generator(&g, &|l| Ok(l)).unwrap();
        for (a, b) in s.rates().iter().zip(g.rates()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
