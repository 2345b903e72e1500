use jklab::process::{
    build_generator, capacity, dirichlet_eigenvalue, dirichlet_heat_kernel, energy, exact_heat_kernels,
    monte_carlo_heat_kernel, Generator, JumpKernelSpec, PathSimulator, SubordinatorSpec,
};
use jklab::rng::stream;
use jklab::scale::ScaleFunction;
use jklab::space::FiniteMetricMeasureSpace;
use proptest::prelude::*;

/// 50 points on a line with random gaps and random weights.
fn random_space() -> impl Strategy<Value = FiniteMetricMeasureSpace> {
    (
        prop::collection::vec(0.2f64..3.0, 49),
        prop::collection::vec(0.5f64..2.0, 50),
    )
        .prop_map(|(gaps, mu)| {
            let mut pos = vec![0.0];
            for g in gaps {
                pos.push(pos.last().unwrap() + g);
            }
            let n = pos.len();
            let d: Vec<f64> = (0..n * n).map(|k| (pos[k / n] - pos[k % n]).abs()).collect();
            FiniteMetricMeasureSpace::from_metric(n, d, mu).unwrap()
        })
}

fn kernel() -> JumpKernelSpec {
    JumpKernelSpec::scale_form(ScaleFunction::two_power(1.0, 3.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generator_rows_and_detailed_balance(space in random_space()) {
        let g = build_generator(&space, &kernel()).unwrap();
        prop_assert!(g.row_sum_residual() <= 1e-12);
        prop_assert!(g.detailed_balance_residual() <= 1e-12);
    }

    #[test]
    fn exact_kernels_are_symmetric_markov_semigroups(space in random_space(), s in 0.1f64..2.0, t in 0.1f64..2.0) {
        let g = build_generator(&space, &kernel()).unwrap();
        let k = exact_heat_kernels(&g, &[s, t, s + t]).unwrap();
        for m in &k {
            prop_assert!(m.symmetry_residual().unwrap() <= 1e-12);
            prop_assert!(m.mass_residual(g.measure()) <= 1e-10);
        }
        prop_assert!(k[0].chapman_kolmogorov_residual(&k[1], &k[2], g.measure()).unwrap() <= 1e-10);
    }

    #[test]
    fn dirichlet_kernel_below_full(space in random_space(), lo in 0usize..20, len in 1usize..30, t in 0.1f64..5.0) {
        let g = build_generator(&space, &kernel()).unwrap();
        let domain: Vec<usize> = (lo..(lo + len).min(50)).collect();
        let full = exact_heat_kernels(&g, &[t]).unwrap().remove(0);
        let killed = dirichlet_heat_kernel(&g, &domain, t).unwrap();
        prop_assert!(killed.max_excess_over(&full) <= 1e-14);
    }

    #[test]
    fn truncation_lowers_energy(space in random_space(), f in prop::collection::vec(-1.0f64..1.0, 50), rho in 0.5f64..20.0) {
        let g = build_generator(&space, &kernel()).unwrap();
        let gt = build_generator(&space, &kernel().truncate(rho).unwrap()).unwrap();
        prop_assert!(energy(&gt, &f).unwrap() <= energy(&g, &f).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn capacity_decreases_as_outer_set_grows(space in random_space(), x in 10usize..40, r in 1.0f64..5.0, extra in 1.0f64..10.0) {
        let g = build_generator(&space, &kernel()).unwrap();
        let inner = space.ball(x, r);
        let outer = space.ball(x, r + extra);
        prop_assume!(outer.len() > inner.len());
        let a = [x];
        prop_assert!(capacity(&g, &a, &outer).unwrap() <= capacity(&g, &a, &inner).unwrap() * (1.0 + 1e-8));
    }

    #[test]
    fn first_eigenvalue_decreases_with_domain(space in random_space(), x in 10usize..40, r in 1.0f64..5.0, extra in 1.0f64..10.0) {
        let g = build_generator(&space, &kernel()).unwrap();
        let small = dirichlet_eigenvalue(&g, &space.ball(x, r)).unwrap();
        let large = dirichlet_eigenvalue(&g, &space.ball(x, r + extra)).unwrap();
        prop_assert!(large <= small * (1.0 + 1e-8));
    }

    #[test]
    fn laplace_exponent_is_concave_and_increasing(g1 in 0.1f64..0.9, g2 in 1.05f64..3.0, a in -3.0f64..3.0, b in -3.0f64..3.0, lam in 0.05f64..0.95) {
        let spec = SubordinatorSpec::new(g1, g2).unwrap();
        let (r1, r2) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        prop_assume!(r2 > r1 * 1.01);
        let f = |r: f64| spec.laplace_exponent(r).unwrap();
        let mid = lam * r1 + (1.0 - lam) * r2;
        prop_assert!(f(mid) >= (lam * f(r1) + (1.0 - lam) * f(r2)) * (1.0 - 1e-9));
        prop_assert!(f(r2) > f(r1));
    }
}

#[test]
fn subordinator_mean_matches_levy_measure() {
    let spec = SubordinatorSpec::new(0.5, 2.5).unwrap();
    let mut rng = stream(31, 0);
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|_| spec.sample_increment(1.0, &mut rng).unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let exact = spec.mean_rate();
    assert!((mean - exact).abs() <= 5.0 * se, "mean {mean} vs {exact}, se {se}");
}

fn example_torus(n: usize) -> (FiniteMetricMeasureSpace, Generator) {
    let s = FiniteMetricMeasureSpace::lattice_torus(1, n, 1.0).unwrap();
    let g = build_generator(&s, &kernel()).unwrap();
    (s, g)
}

#[test]
fn monte_carlo_cells_agree_with_exact_kernel() {
    let (_, g) = example_torus(256);
    let sim = PathSimulator::new(&g).unwrap();
    let t = 4.0;
    let mc = monte_carlo_heat_kernel(&sim, g.measure(), 0, t, 20_000, 99).unwrap();
    let exact = exact_heat_kernels(&g, &[t]).unwrap().remove(0);
    let se = mc.std_err.as_ref().expect("standard errors");
    let mut within = 0;
    let mut cells = 0;
    for (y, &se_y) in se.iter().enumerate() {
        let p = exact.get(0, y).unwrap();
        if p * 20_000.0 < 5.0 {
            continue;
        }
        cells += 1;
        if (mc.row(0)[y] - p).abs() <= 5.0 * se_y {
            within += 1;
        }
    }
    assert!(cells >= 10);
    assert!(within as f64 >= 0.95 * cells as f64, "{within} of {cells}");
}

#[test]
fn holding_times_are_exponential() {
    let (_, g) = example_torus(128);
    let sim = PathSimulator::new(&g).unwrap();
    let rate = g.escape_rate(0);
    let mut rng = stream(5, 0);
    let n = 20_000;
    let mut hold: Vec<f64> = (0..n).map(|_| sim.step(0, &mut rng).unwrap().0).collect();
    hold.sort_by(f64::total_cmp);
    let ks = hold
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let cdf = 1.0 - (-rate * h).exp();
            (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks <= 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
}
