//! Building an experiment, running its checkers and writing the reports.

use crate::config::{CheckSpec, ExperimentConfig};
use crate::CliError;
use jklab::envelope::{envelope_table, write_envelope_csv, HkEnvelope};
use jklab::process::{Generator, SubordinatorSpec};
use jklab::scale::{dyadic_grid, phi_c_from_phi_j, CrossoverConstants, ScaleFunction, ScaleTriple};
use jklab::space::FiniteMetricMeasureSpace;
use jklab::verify::{self, ConditionVerdict, CorridorReport, CORRIDOR_THRESHOLD, STABILITY_THRESHOLD};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "JKLAB_SEED";

/// Default for the Monte-Carlo exit-time agreement, in standard errors.
pub const MC_THRESHOLD: f64 = 3.0;

/// Default for the Laplace-exponent sandwich.
pub const LAPLACE_THRESHOLD: f64 = 20.0;

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Flag, then `JKLAB_SEED`, then the config.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        _ => Ok(config),
    }
}

/// Status of one requested checker.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub check: String,
    /// Position in the config's `checks` list.
    pub index: usize,
    /// `pass`, `fail` or `error`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Conditions reported by this checker.
    pub conditions: Vec<String>,
}

/// A corridor fit together with the checker that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct CorridorEntry {
    pub index: usize,
    pub source: usize,
    pub report: CorridorReport,
}

/// Deterministic run summary (`summary.json`).
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub space_points: usize,
    pub checks: Vec<CheckRecord>,
    pub verdicts: Vec<ConditionVerdict>,
    pub corridors: Vec<CorridorEntry>,
    pub warnings: Vec<String>,
    pub all_pass: bool,
}

/// Wall-clock seconds per stage (`timings.json`).
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub stages: BTreeMap<String, f64>,
}

/// Everything a run produced; nothing is written until [`write_outputs`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub timings: Timings,
    /// Per-checker CSV files `(file name, contents)`.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl RunOutcome {
    /// 0 when every checker passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.all_pass {
            0
        } else {
            1
        }
    }
}

/// Space, generator and scale triple of a configuration.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub space: FiniteMetricMeasureSpace,
    pub envelope: HkEnvelope,
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn phi(&self) -> &ScaleFunction {
        &self.envelope.triple.phi
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Load a config from a file path or a built-in name.
pub fn load_config(spec: &str) -> Result<(ExperimentConfig, String), CliError> {
    let path = Path::new(spec);
    let text = if path.is_file() {
        std::fs::read_to_string(path)?
    } else if let Some(t) = crate::builtin::lookup(spec) {
        t.to_string()
    } else {
        return Err(CliError::UnknownExperiment(spec.to_string()));
    };
    let config = ExperimentConfig::parse(&text)?;
    Ok((config, text))
}

/// Build the space and scale triple and validate the grids.
pub fn prepare(config: ExperimentConfig, text: &str) -> Result<Prepared, CliError> {
    let space = FiniteMetricMeasureSpace::from_doc(&config.space, config.limits.space_limits())
        .map_err(CliError::from_setup)?;
    config.validate_grids(space.guard_radius())?;
    let phi_j = config.phi_j();
    let phi_c = match &config.scales.phi_c {
        Some(p) => p.clone(),
        None => phi_c_from_phi_j(&phi_j).map_err(CliError::from_setup)?.phi_c,
    };
    let triple = ScaleTriple::new(phi_j, phi_c).map_err(CliError::from_setup)?;
    let warnings = triple.warnings.clone();
    let envelope = HkEnvelope::new(triple, config.envelope, CrossoverConstants::default())
        .map_err(CliError::from_setup)?;
    Ok(Prepared {
        config_sha256: sha256_hex(text.as_bytes()),
        config,
        space,
        envelope,
        warnings,
    })
}

fn needs_generator(check: &CheckSpec) -> bool {
    !matches!(
        check,
        CheckSpec::Volume { .. } | CheckSpec::TailIntegral { .. } | CheckSpec::LaplaceExponent { .. }
    )
}

struct CheckOutput {
    verdicts: Vec<ConditionVerdict>,
    corridors: Vec<CorridorEntry>,
    artifacts: Vec<(String, Vec<u8>)>,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, jklab::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| jklab::Error::Invalid(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| jklab::Error::Invalid(format!("csv: {e}")))
}

fn file_stem(check: &str, index: usize, condition: &str) -> String {
    let cond: String = condition
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{check}_{index}_{cond}")
}

#[derive(Serialize)]
struct CorridorRow {
    t: f64,
    x: usize,
    d: f64,
    p: f64,
    envelope: f64,
}

fn run_check(
    prep: &Prepared,
    gen: Option<&Generator>,
    check: &CheckSpec,
    index: usize,
    seed: u64,
) -> Result<CheckOutput, jklab::Error> {
    let space = &prep.space;
    let phi = prep.phi();
    let need = || gen.expect("generator is built for this checker");
    let mut corridors = Vec::new();
    let mut artifacts = Vec::new();
    let verdicts = match check {
        CheckSpec::Volume { radii, threshold } => {
            let (vd, rvd) = verify::volume_verdicts(space, radii, threshold.unwrap_or(STABILITY_THRESHOLD))?;
            vec![vd, rvd]
        }
        CheckSpec::HkCorridor {
            times,
            max_distance,
            sources,
            threshold,
        } => {
            let threshold = threshold.unwrap_or(CORRIDOR_THRESHOLD);
            let sources = if sources.is_empty() { vec![0] } else { sources.clone() };
            let env = |t: f64, x: usize, d: f64| prep.envelope.upper_shape(t, d, &|r| space.volume(x, r));
            let kernels = jklab::process::heat_kernel_rows(need(), &sources, times)?;
            let samples = verify::corridor_samples(space, &kernels, *max_distance)?;
            let report = verify::fit_corridor(&samples, &env, &verify::dilation_grid(), threshold)?;
            let rows: Vec<CorridorRow> = samples
                .iter()
                .map(|s| CorridorRow {
                    t: s.t,
                    x: s.x,
                    d: s.d,
                    p: s.p,
                    envelope: env(s.t, s.x, s.d),
                })
                .collect();
            artifacts.push((format!("{}_samples.csv", file_stem("hk_corridor", index, "HK")), csv_bytes(&rows)?));
            let mut constants = BTreeMap::new();
            for (k, v) in [("c1", report.c1), ("c2", report.c2), ("c3", report.c3), ("c4", report.c4)] {
                constants.insert(k.to_string(), v);
            }
            let verdict = ConditionVerdict {
                condition: "HK".to_string(),
                constants,
                worst_ratio: report.worst_ratio,
                domain: format!("sources {sources:?}, {}", report.domain),
                pass: report.pass,
                seed: None,
                threshold,
                samples: Vec::new(),
                notes: vec![format!("{} dilations skipped", report.skipped_dilations)],
            };
            corridors.push(CorridorEntry {
                index,
                source: sources[0],
                report,
            });
            vec![verdict]
        }
        CheckSpec::TailIntegral { radii, threshold } => vec![verify::check_tail_integral(
            space,
            &prep.config.kernel,
            &prep.envelope.triple.phi_j,
            radii,
            threshold.unwrap_or(STABILITY_THRESHOLD),
        )?],
        CheckSpec::FaberKrahn { radii, x0, threshold } => vec![verify::check_faber_krahn(
            need(),
            space,
            *x0,
            radii,
            phi,
            threshold.unwrap_or(STABILITY_THRESHOLD),
        )?],
        CheckSpec::Poincare {
            radii,
            x0,
            kappa,
            threshold,
        } => vec![verify::check_poincare(
            need(),
            space,
            *x0,
            radii,
            phi,
            *kappa,
            threshold.unwrap_or(STABILITY_THRESHOLD),
        )?],
        CheckSpec::CutoffEnergy {
            radii,
            x0,
            outer_factor,
            threshold,
        } => vec![verify::check_cutoff_energy(
            need(),
            space,
            *x0,
            radii,
            phi,
            *outer_factor,
            threshold.unwrap_or(STABILITY_THRESHOLD),
        )?],
        CheckSpec::ExitScaling {
            radii,
            x0,
            mc_paths,
            mc_radii,
            threshold,
        } => {
            let mut v = vec![verify::check_exit_scaling(
                need(),
                space,
                *x0,
                radii,
                phi,
                threshold.unwrap_or(STABILITY_THRESHOLD),
            )?];
            if *mc_paths > 0 {
                let mc_radii = if mc_radii.is_empty() { radii } else { mc_radii };
                v.push(verify::check_exit_monte_carlo(
                    need(),
                    space,
                    *x0,
                    mc_radii,
                    *mc_paths,
                    seed,
                    MC_THRESHOLD,
                )?);
            }
            v
        }
        CheckSpec::ExitProbability { radii, x0, threshold } => vec![verify::check_exit_probability(
            need(),
            space,
            *x0,
            radii,
            phi,
            threshold.unwrap_or(STABILITY_THRESHOLD),
        )?],
        CheckSpec::Capacity { radii, x0, threshold } => vec![verify::check_capacity_scaling(
            need(),
            space,
            *x0,
            radii,
            phi,
            threshold.unwrap_or(STABILITY_THRESHOLD),
        )?],
        CheckSpec::Ujs {
            radii,
            x_stride,
            threshold,
        } => vec![verify::check_ujs(
            need(),
            space,
            radii,
            *x_stride,
            threshold.unwrap_or(STABILITY_THRESHOLD),
        )?],
        CheckSpec::PhiHarnack {
            radii,
            x0,
            cylinder,
            threshold,
        } => {
            let cylinder = verify::HarnackCylinder { seed, ..*cylinder };
            let (v, scales) = verify::check_phi_harnack(
                need(),
                space,
                *x0,
                radii,
                phi,
                &cylinder,
                threshold.unwrap_or(STABILITY_THRESHOLD),
            )?;
            artifacts.push((format!("{}_scales.csv", file_stem("phi_harnack", index, "PHI")), csv_bytes(&scales)?));
            vec![v]
        }
        CheckSpec::LaplaceExponent {
            gamma1,
            gamma2,
            points,
            r_min,
            r_max,
            threshold,
        } => {
            let spec = SubordinatorSpec::new(*gamma1, *gamma2)?;
            vec![verify::check_laplace_exponent(
                &spec,
                *r_min,
                *r_max,
                *points,
                threshold.unwrap_or(LAPLACE_THRESHOLD),
            )?]
        }
    };
    for v in &verdicts {
        if !v.samples.is_empty() {
            artifacts.push((
                format!("{}.csv", file_stem(check.name(), index, &v.condition)),
                csv_bytes(&v.samples)?,
            ));
        }
    }
    Ok(CheckOutput {
        verdicts,
        corridors,
        artifacts,
    })
}

/// Build everything, run the checkers on up to `workers` threads and
/// assemble the report in checker-name order.
pub fn run_experiment(prep: &Prepared, seed: u64, workers: Option<usize>) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::default();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Timings| {
        timings.stages.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let gen = if prep.config.checks.iter().any(needs_generator) {
        Some(
            Generator::build(&prep.space, &prep.config.kernel, prep.config.limits.max_dense_points)
                .map_err(CliError::from_setup)?,
        )
    } else {
        None
    };
    lap("generator", &mut timings);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<(Result<CheckOutput, jklab::Error>, f64)> = pool.install(|| {
        prep.config
            .checks
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let start = Instant::now();
                let r = run_check(prep, gen.as_ref(), c, i, seed);
                (r, start.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by_key(|&i| (prep.config.checks[i].name(), i));
    let mut checks = Vec::new();
    let mut verdicts = Vec::new();
    let mut corridors = Vec::new();
    let mut artifacts = Vec::new();
    let mut results: Vec<Option<(Result<CheckOutput, jklab::Error>, f64)>> = results.into_iter().map(Some).collect();
    for i in order {
        let name = prep.config.checks[i].name();
        let (result, secs) = results[i].take().expect("each result is consumed once");
        timings.stages.insert(format!("check:{name}#{i}"), secs);
        match result {
            Ok(out) => {
                let pass = out.verdicts.iter().all(|v| v.pass);
                checks.push(CheckRecord {
                    check: name.to_string(),
                    index: i,
                    status: if pass { "pass" } else { "fail" }.to_string(),
                    error: None,
                    conditions: out.verdicts.iter().map(|v| v.condition.clone()).collect(),
                });
                verdicts.extend(out.verdicts);
                corridors.extend(out.corridors);
                artifacts.extend(out.artifacts);
            }
            Err(jklab::Error::SizeCap { what, requested, cap }) => {
                return Err(CliError::Cap(format!("{name}: {what} needs {requested}, cap is {cap}")));
            }
            Err(e) => checks.push(CheckRecord {
                check: name.to_string(),
                index: i,
                status: "error".to_string(),
                error: Some(e.to_string()),
                conditions: Vec::new(),
            }),
        }
    }
    verdicts.sort_by(|a, b| a.condition.cmp(&b.condition));
    let all_pass = checks.iter().all(|c| c.status == "pass");
    let report = RunReport {
        name: prep.config.name.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: prep.config_sha256.clone(),
        seed,
        space_points: prep.space.len(),
        checks,
        verdicts,
        corridors,
        warnings: prep.warnings.clone(),
        all_pass,
    };
    Ok(RunOutcome {
        report,
        timings,
        artifacts,
    })
}

/// `--out`, then the config's `output`, then `runs/<name>`.
pub fn output_dir(opts: &RunOptions, config: &ExperimentConfig) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("runs").join(&config.name))
}

/// Write `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| CliError::Io(e.error))?;
    Ok(target)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// `summary.json`, `timings.json`, `verdicts.csv` and the per-checker CSVs.
pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> Result<(), CliError> {
    write_atomic(dir, "summary.json", &json_bytes(&outcome.report)?)?;
    write_atomic(dir, "timings.json", &json_bytes(&outcome.timings)?)?;
    let mut csv = Vec::new();
    verify::write_verdicts_csv(&outcome.report.verdicts, &mut csv).map_err(CliError::Library)?;
    write_atomic(dir, "verdicts.csv", &csv)?;
    for (name, bytes) in &outcome.artifacts {
        write_atomic(dir, name, bytes)?;
    }
    Ok(())
}

/// The `t,d,lower,upper,regime` table of the configured envelope.
pub fn envelope_csv(prep: &Prepared) -> Result<Vec<u8>, CliError> {
    let (times, dists, x) = match &prep.config.envelope_grid {
        Some(g) => (g.times.clone(), g.distances.clone(), g.base_point),
        None => {
            let guard = prep.space.guard_radius();
            let mut d = vec![0.0];
            d.extend(dyadic_grid(0, 20).into_iter().filter(|r| *r <= guard));
            (dyadic_grid(-2, 6), d, 0)
        }
    };
    if x >= prep.space.len() {
        return Err(CliError::Config(format!("envelope base point {x} is outside the space")));
    }
    let vol = |r: f64| prep.space.volume(x, r);
    let rows = envelope_table(&prep.envelope, &times, &dists, &vol).map_err(CliError::from_setup)?;
    let mut out = Vec::new();
    write_envelope_csv(&rows, &mut out).map_err(CliError::Library)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), 3).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, 3).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(""), 3).unwrap(), 3);
        assert!(resolve_seed(None, Some("x"), 3).is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn unknown_name_is_exit_two() {
        let e = load_config("no_such_experiment").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
