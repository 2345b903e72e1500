//! Scalar conditions checked across scales.

use super::{guard_all, radii_label, ConditionVerdict, ScaleSample};
use crate::process::{
    capacity, dense_dirichlet_eigenvalues, dirichlet_eigenvalue, dirichlet_heat_kernel_rows, exit_times,
    mc_mean_exit_time, Generator, JumpKernelSpec, PathSimulator, SubordinatorSpec,
};
use crate::scale::ScaleFunction;
use crate::space::{check_vd_rvd, FiniteMetricMeasureSpace};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Balls larger than this skip the dense eigenvalue cross-check.
const DENSE_ORACLE_MAX: usize = 200;

/// VD and RVD verdicts from the pooled volume fit. The statistics are
/// `C_μ` and `1/c_μ`.
pub fn volume_verdicts(
    space: &FiniteMetricMeasureSpace,
    radii: &[f64],
    threshold: f64,
) -> Result<(ConditionVerdict, ConditionVerdict)> {
    let fit = check_vd_rvd(space, radii)?;
    let domain = format!("all points, {}", radii_label(radii));
    let make = |name: &str, exponent_name: &str, exponent: f64, const_name: &str, c: f64, worst: f64| {
        let mut constants = BTreeMap::new();
        constants.insert(exponent_name.to_string(), exponent);
        constants.insert(const_name.to_string(), c);
        ConditionVerdict {
            condition: name.to_string(),
            constants,
            worst_ratio: worst,
            domain: domain.clone(),
            pass: fit.pass && worst <= threshold,
            seed: None,
            threshold,
            samples: Vec::new(),
            notes: if fit.x_independent {
                vec!["volume profile identical at every point".to_string()]
            } else {
                Vec::new()
            },
        }
    };
    Ok((
        make("VD", "d2", fit.d2, "C_mu", fit.c_upper, fit.c_upper),
        make("RVD", "d1", fit.d1, "c_mu", fit.c_lower, 1.0 / fit.c_lower),
    ))
}

/// Jump-tail integral: `φ_j(r) · max_x Σ_{d(x,y) ≥ r} J(x,y) μ_y` across `r`.
pub fn check_tail_integral(
    space: &FiniteMetricMeasureSpace,
    kernel: &JumpKernelSpec,
    phi_j: &ScaleFunction,
    radii: &[f64],
    threshold: f64,
) -> Result<ConditionVerdict> {
    guard_all(space, radii, 1.0)?;
    let n = space.len();
    if let JumpKernelSpec::Explicit { n: k, .. } = kernel {
        if *k != n {
            return Err(Error::InvalidKernel(format!("kernel has {k} points, space has {n}")));
        }
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tails: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut acc = vec![0.0; sorted.len()];
            for y in 0..n {
                if y == x {
                    continue;
                }
                let d = space.distance(x, y);
                let w = kernel.density(space, x, y) * space.measure(y);
                for (a, &r) in acc.iter_mut().zip(&sorted) {
                    if d >= r * (1.0 - 1e-12) {
                        *a += w;
                    }
                }
            }
            acc
        })
        .collect();
    let samples: Vec<ScaleSample> = sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| ScaleSample {
            radius: r,
            value: phi_j.eval(r) * tails.iter().map(|t| t[i]).fold(0.0, f64::max),
        })
        .collect();
    Ok(ConditionVerdict::from_scan(
        "J_phi",
        format!("all x, {}", radii_label(&sorted)),
        samples,
        threshold,
    ))
}

/// Faber–Krahn: `λ₁(B(x₀, r)) · φ(r)` across `r`. Balls of at most 200
/// points are cross-checked against a dense eigendecomposition.
pub fn check_faber_krahn(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    phi: &ScaleFunction,
    threshold: f64,
) -> Result<ConditionVerdict> {
    guard_all(space, radii, 1.0)?;
    let mut samples = Vec::new();
    let mut oracle_diff = 0.0f64;
    let mut oracle_used = false;
    for &r in radii {
        let ball = space.ball(x0, r);
        let lambda = dirichlet_eigenvalue(gen, &ball)?;
        if ball.len() <= DENSE_ORACLE_MAX {
            let dense = dense_dirichlet_eigenvalues(gen, &ball)?[0];
            oracle_diff = oracle_diff.max((lambda - dense).abs() / dense.abs());
            oracle_used = true;
        }
        samples.push(ScaleSample {
            radius: r,
            value: lambda * phi.eval(r),
        });
    }
    let mut v = ConditionVerdict::from_scan("FK", format!("B(x0={x0}, r), {}", radii_label(radii)), samples, threshold);
    if oracle_used {
        v = v.with_constant("dense_oracle_rel_diff", oracle_diff);
    }
    Ok(v)
}

/// Optimal Poincaré constant of a ball pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoincareConstant {
    Optimal(f64),
    /// The restricted energy vanishes on a non-constant function.
    Degenerate,
}

/// `sup_f Var_B(f) / ℰ_K(f)` with `ℰ_K` the energy over `K × K`, as the
/// reciprocal of the smallest nonzero eigenvalue of the Schur-reduced
/// energy on `B` relative to `μ`.
pub fn poincare_constant(gen: &Generator, ball: &[usize], outer: &[usize]) -> Result<PoincareConstant> {
    let n = gen.len();
    let mut in_ball = vec![false; n];
    for &x in ball {
        if x >= n {
            return Err(Error::Invalid(format!("point {x} outside the space")));
        }
        in_ball[x] = true;
    }
    let mut in_outer = vec![false; n];
    for &x in outer {
        if x >= n {
            return Err(Error::Invalid(format!("point {x} outside the space")));
        }
        in_outer[x] = true;
    }
    if let Some(x) = ball.iter().find(|&&x| !in_outer[x]) {
        return Err(Error::Invalid(format!("ball point {x} is not in the outer ball")));
    }
    if ball.len() < 2 {
        return Ok(PoincareConstant::Optimal(0.0));
    }
    let rest: Vec<usize> = outer.iter().copied().filter(|&x| !in_ball[x]).collect();
    let mu = gen.measure();
    let w = |x: usize, y: usize| if x == y { 0.0 } else { mu[x] * gen.rate(x, y) };
    let degree = |x: usize| outer.iter().map(|&y| w(x, y)).sum::<f64>();
    let block = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let (x, y) = (rows[i], cols[j]);
            2.0 * (if x == y { degree(x) } else { 0.0 } - w(x, y))
        })
    };
    let mut s = block(ball, ball);
    if !rest.is_empty() {
        let l_oo = block(&rest, &rest);
        let l_ob = block(&rest, ball);
        let Some(chol) = Cholesky::new(l_oo) else {
            return Ok(PoincareConstant::Degenerate);
        };
        let solved = chol.solve(&l_ob);
        s -= l_ob.transpose() * solved;
    }
    let m = ball.len();
    let root: Vec<f64> = ball.iter().map(|&x| mu[x].sqrt()).collect();
    let a = DMatrix::from_fn(m, m, |i, j| s[(i, j)] / (root[i] * root[j]));
    let a = (&a + a.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    let scale = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !(vals[1] > 1e-10 * scale) {
        return Ok(PoincareConstant::Degenerate);
    }
    Ok(PoincareConstant::Optimal(1.0 / vals[1]))
}

/// Poincaré inequality: optimal constant on `(B(x₀,r), B(x₀,κr))` divided by
/// `φ(r)`, across `r`. A degenerate restricted form fails the verdict.
pub fn check_poincare(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    phi: &ScaleFunction,
    kappa: f64,
    threshold: f64,
) -> Result<ConditionVerdict> {
    if !(kappa >= 1.0) {
        return Err(Error::Invalid(format!("kappa must be at least 1, got {kappa}")));
    }
    guard_all(space, radii, kappa)?;
    let mut samples = Vec::new();
    let mut degenerate = Vec::new();
    for &r in radii {
        let ball = space.ball(x0, r);
        let outer = space.ball(x0, kappa * r);
        match poincare_constant(gen, &ball, &outer)? {
            PoincareConstant::Optimal(c) => samples.push(ScaleSample {
                radius: r,
                value: c / phi.eval(r),
            }),
            PoincareConstant::Degenerate => {
                degenerate.push(r);
                samples.push(ScaleSample {
                    radius: r,
                    value: f64::INFINITY,
                });
            }
        }
    }
    let v = ConditionVerdict::from_scan(
        "PI",
        format!("B(x0={x0}, r) in B(x0, {kappa}r), {}", radii_label(radii)),
        samples,
        threshold,
    )
    .with_constant("kappa", kappa);
    Ok(if degenerate.is_empty() {
        v
    } else {
        v.failed(format!("restricted energy degenerate at r = {degenerate:?}"))
    })
}

/// Cutoff energy: with the ramp `φ(x) = 1 ∧ 0 ∨ (R + r − d(x₀, x))/r` and
/// `R = outer_factor · r`, the scan value is `φ(r) · sup_x Γ(φ, φ)(x)` where
/// `Γ(φ, φ)(x) = Σ_y (φ(x) − φ(y))² J(x, y) μ_y`.
pub fn check_cutoff_energy(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    phi: &ScaleFunction,
    outer_factor: f64,
    threshold: f64,
) -> Result<ConditionVerdict> {
    if !(outer_factor > 0.0) {
        return Err(Error::Invalid(format!("outer factor must be positive, got {outer_factor}")));
    }
    guard_all(space, radii, outer_factor + 1.0)?;
    let n = space.len();
    let mut samples = Vec::new();
    for &r in radii {
        let big_r = outer_factor * r;
        let ramp: Vec<f64> = (0..n)
            .map(|x| ((big_r + r - space.distance(x0, x)) / r).clamp(0.0, 1.0))
            .collect();
        let sup = (0..n)
            .into_par_iter()
            .map(|x| {
                let row = gen.row(x);
                (0..n)
                    .filter(|&y| y != x)
                    .map(|y| (ramp[x] - ramp[y]).powi(2) * row[y])
                    .sum::<f64>()
            })
            .reduce(|| 0.0, f64::max);
        samples.push(ScaleSample {
            radius: r,
            value: sup * phi.eval(r),
        });
    }
    Ok(ConditionVerdict::from_scan(
        "CSJ-energy",
        format!("ramp around x0={x0} with R = {outer_factor}r, {}", radii_label(radii)),
        samples,
        threshold,
    )
    .with_constant("outer_factor", outer_factor))
}

/// UJS: the largest `J(x,y) V(x,r) / Σ_{z ∈ B(x,r)} J(z,y) μ_z` over
/// `x ∈ {0, stride, 2·stride, …}`, all `y` with `d(x, y) ≥ 2r`, and the
/// given radii (`r = 0` allowed).
pub fn check_ujs(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    radii: &[f64],
    x_stride: usize,
    threshold: f64,
) -> Result<ConditionVerdict> {
    if x_stride == 0 {
        return Err(Error::Invalid("x stride must be positive".into()));
    }
    if radii.is_empty() {
        return Err(Error::Invalid("no radii to scan".into()));
    }
    let n = space.len();
    let mu = gen.measure();
    let xs: Vec<usize> = (0..n).step_by(x_stride).collect();
    let mut samples = Vec::new();
    let mut worst_pair = (0, 0, 0.0);
    let mut worst = 0.0f64;
    for &r in radii {
        if !(r >= 0.0) {
            return Err(Error::Invalid(format!("radius must be nonnegative, got {r}")));
        }
        let per_x: Vec<(f64, usize, usize)> = xs
            .par_iter()
            .map(|&x| {
                let ball = space.ball(x, r);
                let v = space.volume(x, r);
                let mut best = (0.0f64, x, x);
                for y in 0..n {
                    let d = space.distance(x, y);
                    if d < 2.0 * r * (1.0 - 1e-12) || y == x {
                        continue;
                    }
                    let j = gen.jump_density(x, y);
                    if j == 0.0 {
                        continue;
                    }
                    let avg: f64 = ball.iter().map(|&z| gen.jump_density(z, y) * mu[z]).sum();
                    let ratio = if avg > 0.0 { j * v / avg } else { f64::INFINITY };
                    if ratio > best.0 {
                        best = (ratio, x, y);
                    }
                }
                best
            })
            .collect();
        let best = per_x
            .into_iter()
            .fold((0.0f64, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
        if best.0 > worst {
            worst = best.0;
            worst_pair = (best.1, best.2, r);
        }
        samples.push(ScaleSample {
            radius: r,
            value: best.0,
        });
    }
    let mut constants = BTreeMap::new();
    constants.insert("c_ujs".to_string(), worst);
    Ok(ConditionVerdict {
        condition: "UJS".to_string(),
        constants,
        worst_ratio: worst,
        domain: format!("x stride {x_stride}, d(x,y) >= 2r, {}", radii_label(radii)),
        pass: worst <= threshold,
        seed: None,
        threshold,
        samples,
        notes: vec![format!(
            "worst at x={}, y={}, r={}",
            worst_pair.0, worst_pair.1, worst_pair.2
        )],
    })
}

/// A kernel violating UJS at `x₀`: every jump longer than the minimal step
/// from the points of `B(x₀, ρ) ∖ {x₀}` is removed, while `x₀` keeps all of
/// its jumps.
pub fn ujs_counterexample(
    space: &FiniteMetricMeasureSpace,
    kernel: &JumpKernelSpec,
    x0: usize,
    rho: f64,
) -> Result<JumpKernelSpec> {
    let n = space.len();
    let mut j = kernel.materialize(space)?;
    for z in space.ball(x0, rho) {
        if z == x0 {
            continue;
        }
        let step = space.min_step(z) * (1.0 + 1e-9);
        for y in 0..n {
            if space.distance(z, y) > step {
                j[z * n + y] = 0.0;
                j[y * n + z] = 0.0;
            }
        }
    }
    JumpKernelSpec::explicit(n, j)
}

/// `E^{x₀}[τ_{B(x₀,r)}] / φ(r)` across `r`; the log-log slope of the exit
/// times is recorded as `slope`.
pub fn check_exit_scaling(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    phi: &ScaleFunction,
    threshold: f64,
) -> Result<ConditionVerdict> {
    guard_all(space, radii, 1.0)?;
    let mut samples = Vec::new();
    let mut means = Vec::new();
    for &r in radii {
        let ball = space.ball(x0, r);
        let i = ball.iter().position(|&y| y == x0).expect("the centre is in its ball");
        let e = exit_times(gen, &ball)?[i];
        means.push(e);
        samples.push(ScaleSample {
            radius: r,
            value: e / phi.eval(r),
        });
    }
    let slope = if radii.len() >= 2 {
        super::log_log_slope(radii, &means)
    } else {
        f64::NAN
    };
    Ok(ConditionVerdict::from_scan(
        "E_phi",
        format!("B(x0={x0}, r), {}", radii_label(radii)),
        samples,
        threshold,
    )
    .with_constant("slope", slope))
}

/// `P^{x₀}(τ_{B(x₀,r)} ≤ t)` at `t = φ(r)/2` from Dirichlet heat-kernel
/// row sums; the fitted constant is `c(r) = P · φ(r)/t` and the verdict
/// passes iff `max c ≤ threshold`.
pub fn check_exit_probability(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    phi: &ScaleFunction,
    threshold: f64,
) -> Result<ConditionVerdict> {
    guard_all(space, radii, 1.0)?;
    let mu = gen.measure();
    let mut samples = Vec::new();
    for &r in radii {
        let ball = space.ball(x0, r);
        let t = 0.5 * phi.eval(r);
        let h = dirichlet_heat_kernel_rows(gen, &ball, &[x0], &[t])?.remove(0);
        let survival: f64 = h.row(0).iter().zip(mu).map(|(p, m)| p * m).sum();
        let exit = (1.0 - survival).max(0.0);
        samples.push(ScaleSample {
            radius: r,
            value: exit * phi.eval(r) / t,
        });
    }
    let c_max = samples.iter().map(|s| s.value).fold(0.0, f64::max);
    let mut constants = BTreeMap::new();
    constants.insert("c".to_string(), c_max);
    Ok(ConditionVerdict {
        condition: "EP".to_string(),
        constants,
        worst_ratio: c_max,
        domain: format!("B(x0={x0}, r) at t = phi(r)/2, {}", radii_label(radii)),
        pass: c_max.is_finite() && c_max <= threshold,
        seed: None,
        threshold,
        samples,
        notes: Vec::new(),
    })
}

/// `cap(B(x₀,r), B(x₀,2r)) · φ(r) / V(x₀, r)` across `r`.
pub fn check_capacity_scaling(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    phi: &ScaleFunction,
    threshold: f64,
) -> Result<ConditionVerdict> {
    guard_all(space, radii, 2.0)?;
    let mut samples = Vec::new();
    for &r in radii {
        let inner = space.ball(x0, r);
        let outer = space.ball(x0, 2.0 * r);
        let c = capacity(gen, &inner, &outer)?;
        samples.push(ScaleSample {
            radius: r,
            value: c * phi.eval(r) / space.volume(x0, r),
        });
    }
    Ok(ConditionVerdict::from_scan(
        "capacity",
        format!("cap(B(x0={x0}, r), B(x0, 2r)), {}", radii_label(radii)),
        samples,
        threshold,
    ))
}

/// `r^{γ₁} ∧ r`, the profile of the Laplace exponent of a subordinator
/// whose Lévy density behaves like `s^{−1−γ₁}` near 0 and has a finite mean.
pub fn laplace_reference(gamma1: f64, r: f64) -> f64 {
    r.powf(gamma1).min(r)
}

/// `f(r) / reference(r)` on a log-spaced grid of `points` radii in
/// `[r_min, r_max]`; the statistic is the `max/min` of the ratios.
pub fn check_laplace_exponent(
    spec: &SubordinatorSpec,
    r_min: f64,
    r_max: f64,
    points: usize,
    threshold: f64,
) -> Result<ConditionVerdict> {
    if points < 2 || !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::Invalid("Laplace scan needs points >= 2 and 0 < r_min < r_max".into()));
    }
    let (a, b) = (r_min.ln(), r_max.ln());
    let samples = (0..points)
        .map(|k| {
            let r = (a + (b - a) * k as f64 / (points - 1) as f64).exp();
            Ok(ScaleSample {
                radius: r,
                value: spec.laplace_exponent(r)? / laplace_reference(spec.gamma1, r),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionVerdict::from_scan(
        "Laplace",
        format!(
            "gamma = ({}, {}), {points} log points on [{r_min}, {r_max}]",
            spec.gamma1, spec.gamma2
        ),
        samples,
        threshold,
    ))
}

/// Monte-Carlo mean exit times against the exact solve: the sample value at
/// each radius is `|mc − exact| / se`, and the verdict passes iff every
/// value is at most `threshold`.
pub fn check_exit_monte_carlo(
    gen: &Generator,
    space: &FiniteMetricMeasureSpace,
    x0: usize,
    radii: &[f64],
    paths: usize,
    seed: u64,
    threshold: f64,
) -> Result<ConditionVerdict> {
    guard_all(space, radii, 1.0)?;
    if paths < 2 {
        return Err(Error::Invalid("Monte-Carlo exit check needs at least two paths".into()));
    }
    let sim = PathSimulator::new(gen)?;
    let mut samples = Vec::new();
    let mut constants = BTreeMap::new();
    for (k, &r) in radii.iter().enumerate() {
        let ball = space.ball(x0, r);
        let i = ball.iter().position(|&y| y == x0).expect("the centre is in its ball");
        let exact = exit_times(gen, &ball)?[i];
        let mc = mc_mean_exit_time(&sim, &ball, x0, paths, seed.wrapping_add(k as u64))?;
        let z = if mc.std_err > 0.0 {
            (mc.mean - exact).abs() / mc.std_err
        } else if mc.mean == exact {
            0.0
        } else {
            f64::INFINITY
        };
        constants.insert(format!("exact_r{r}"), exact);
        constants.insert(format!("mc_r{r}"), mc.mean);
        constants.insert(format!("se_r{r}"), mc.std_err);
        samples.push(ScaleSample { radius: r, value: z });
    }
    let worst = samples.iter().map(|s| s.value).fold(0.0, f64::max);
    Ok(ConditionVerdict {
        condition: "E_phi-mc".to_string(),
        constants,
        worst_ratio: worst,
        domain: format!("B(x0={x0}, r), {paths} paths, {}", radii_label(radii)),
        pass: worst <= threshold,
        seed: Some(seed),
        threshold,
        samples,
        notes: vec!["value per radius: |mc - exact| in standard errors".to_string()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::build_generator;

    fn two_point(j: f64, ma: f64, mb: f64) -> Generator {
        Generator::from_rates(2, vec![0.0, j * mb, j * ma, 0.0], vec![ma, mb]).unwrap()
    }

    #[test]
    fn two_point_poincare_constant() {
        let (j, ma, mb) = (0.7, 1.5, 0.5);
        let g = two_point(j, ma, mb);
        let PoincareConstant::Optimal(c) = poincare_constant(&g, &[0, 1], &[0, 1]).unwrap() else {
            panic!("degenerate");
        };
        assert!((c - 1.0 / (2.0 * j * (ma + mb))).abs() < 1e-12);
    }

    #[test]
    fn disconnected_ball_is_degenerate() {
        let g = Generator::from_rates(2, vec![0.0; 4], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            poincare_constant(&g, &[0, 1], &[0, 1]).unwrap(),
            PoincareConstant::Degenerate
        );
    }

    #[test]
    fn single_point_faber_krahn() {
        let s = FiniteMetricMeasureSpace::lattice_torus(1, 64, 1.0).unwrap();
        let k = JumpKernelSpec::scale_form(ScaleFunction::two_power(1.0, 3.0).unwrap());
        let g = build_generator(&s, &k).unwrap();
        let l = dirichlet_eigenvalue(&g, &[5]).unwrap();
        assert!((l - g.escape_rate(5)).abs() < 1e-12);
    }

    #[test]
    fn ujs_at_radius_zero_is_one() {
        let s = FiniteMetricMeasureSpace::lattice_torus(1, 64, 1.0).unwrap();
        let k = JumpKernelSpec::scale_form(ScaleFunction::two_power(1.0, 3.0).unwrap());
        let g = build_generator(&s, &k).unwrap();
        let v = check_ujs(&g, &s, &[0.0], 1, 2.0).unwrap();
        assert!((v.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_scan_of_example_kernel_is_stable() {
        let s = FiniteMetricMeasureSpace::lattice_torus(1, 256, 1.0).unwrap();
        let phi = ScaleFunction::two_power(1.0, 3.0).unwrap();
        let k = JumpKernelSpec::scale_form(phi.clone());
        let v = check_tail_integral(&s, &k, &phi, &[2.0, 4.0, 8.0, 16.0], 10.0).unwrap();
        assert!(v.pass, "{v:?}");
        assert!(check_tail_integral(&s, &k, &phi, &[128.0], 10.0).is_err());
    }

    #[test]
    fn laplace_reference_branches() {
        assert_eq!(laplace_reference(0.5, 0.25), 0.25);
        assert_eq!(laplace_reference(0.5, 1.0), 1.0);
        assert_eq!(laplace_reference(0.5, 16.0), 4.0);
    }

    #[test]
    fn exit_monte_carlo_agrees_on_small_ball() {
        let s = FiniteMetricMeasureSpace::lattice_torus(1, 64, 1.0).unwrap();
        let k = JumpKernelSpec::scale_form(ScaleFunction::two_power(1.0, 3.0).unwrap());
        let g = build_generator(&s, &k).unwrap();
        let v = check_exit_monte_carlo(&g, &s, 0, &[2.0], 4000, 7, 4.0).unwrap();
        assert!(v.pass, "{v:?}");
    }
}
