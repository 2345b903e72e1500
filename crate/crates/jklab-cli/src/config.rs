//! Experiment configuration (TOML).
//!
//! Unknown keys are rejected everywhere. See `experiments/*.toml` for the
//! built-in examples and the README for the schema.

use crate::CliError;
use jklab::envelope::EnvelopeConstants;
use jklab::process::JumpKernelSpec;
use jklab::scale::ScaleFunction;
use jklab::space::{SpaceDoc, SpaceLimits};
use jklab::verify::HarnackCylinder;
use serde::Deserialize;

/// A complete experiment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub limits: Limits,
    pub space: SpaceDoc,
    pub kernel: JumpKernelSpec,
    pub scales: ScalesConfig,
    #[serde(default)]
    pub envelope: EnvelopeConstants,
    #[serde(default)]
    pub envelope_grid: Option<EnvelopeGrid>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

/// Resource caps.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub max_points: usize,
    pub max_dense_points: usize,
    pub max_paths: usize,
}

impl Default for Limits {
    fn default() -> Self {
        let s = SpaceLimits::default();
        Self {
            max_points: s.max_points,
            max_dense_points: s.max_dense_points,
            max_paths: 1_000_000,
        }
    }
}

impl Limits {
    pub fn space_limits(&self) -> SpaceLimits {
        SpaceLimits {
            max_points: self.max_points,
            max_dense_points: self.max_dense_points,
        }
    }
}

/// `φ_j` (defaults to the kernel's) and either an explicit `φ_c` or the
/// construction of `φ_c` from `φ_j`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesConfig {
    #[serde(default)]
    pub phi_j: Option<ScaleFunction>,
    #[serde(default)]
    pub phi_c: Option<ScaleFunction>,
    #[serde(default)]
    pub phi_c_from_phi_j: bool,
}

/// Grid for the `envelope` subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeGrid {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    #[serde(default)]
    pub base_point: usize,
}

fn default_kappa() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// One requested checker. `threshold` overrides the checker's default.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Volume {
        radii: Vec<f64>,
        #[serde(default)]
        threshold: Option<f64>,
    },
    HkCorridor {
        times: Vec<f64>,
        max_distance: f64,
        #[serde(default)]
        sources: Vec<usize>,
        #[serde(default)]
        threshold: Option<f64>,
    },
    TailIntegral {
        radii: Vec<f64>,
        #[serde(default)]
        threshold: Option<f64>,
    },
    FaberKrahn {
        radii: Vec<f64>,
        #[serde(default)]
        x0: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
    Poincare {
        radii: Vec<f64>,
        #[serde(default)]
        x0: usize,
        #[serde(default = "default_kappa")]
        kappa: f64,
        #[serde(default)]
        threshold: Option<f64>,
    },
    CutoffEnergy {
        radii: Vec<f64>,
        #[serde(default)]
        x0: usize,
        #[serde(default = "one")]
        outer_factor: f64,
        #[serde(default)]
        threshold: Option<f64>,
    },
    ExitScaling {
        radii: Vec<f64>,
        #[serde(default)]
        x0: usize,
        /// Monte-Carlo cross-validation paths per radius (0 = off).
        #[serde(default)]
        mc_paths: usize,
        /// Radii for the Monte-Carlo cross-check (defaults to `radii`).
        #[serde(default)]
        mc_radii: Vec<f64>,
        #[serde(default)]
        threshold: Option<f64>,
    },
    ExitProbability {
        radii: Vec<f64>,
        #[serde(default)]
        x0: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
    Capacity {
        radii: Vec<f64>,
        #[serde(default)]
        x0: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
    Ujs {
        radii: Vec<f64>,
        #[serde(default = "one_usize")]
        x_stride: usize,
        #[serde(default)]
        threshold: Option<f64>,
    },
    PhiHarnack {
        radii: Vec<f64>,
        #[serde(default)]
        x0: usize,
        #[serde(default)]
        cylinder: HarnackCylinder,
        #[serde(default)]
        threshold: Option<f64>,
    },
    LaplaceExponent {
        gamma1: f64,
        gamma2: f64,
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default = "default_r_min")]
        r_min: f64,
        #[serde(default = "default_r_max")]
        r_max: f64,
        #[serde(default)]
        threshold: Option<f64>,
    },
}

fn default_points() -> usize {
    60
}

fn default_r_min() -> f64 {
    1e-3
}

fn default_r_max() -> f64 {
    1e3
}

impl CheckSpec {
    /// Name used in reports and output file names.
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Volume { .. } => "volume",
            CheckSpec::HkCorridor { .. } => "hk_corridor",
            CheckSpec::TailIntegral { .. } => "tail_integral",
            CheckSpec::FaberKrahn { .. } => "faber_krahn",
            CheckSpec::Poincare { .. } => "poincare",
            CheckSpec::CutoffEnergy { .. } => "cutoff_energy",
            CheckSpec::ExitScaling { .. } => "exit_scaling",
            CheckSpec::ExitProbability { .. } => "exit_probability",
            CheckSpec::Capacity { .. } => "capacity",
            CheckSpec::Ujs { .. } => "ujs",
            CheckSpec::PhiHarnack { .. } => "phi_harnack",
            CheckSpec::LaplaceExponent { .. } => "laplace_exponent",
        }
    }

    fn radii(&self) -> Option<&[f64]> {
        match self {
            CheckSpec::Volume { radii, .. }
            | CheckSpec::TailIntegral { radii, .. }
            | CheckSpec::FaberKrahn { radii, .. }
            | CheckSpec::Poincare { radii, .. }
            | CheckSpec::CutoffEnergy { radii, .. }
            | CheckSpec::ExitScaling { radii, .. }
            | CheckSpec::ExitProbability { radii, .. }
            | CheckSpec::Capacity { radii, .. }
            | CheckSpec::Ujs { radii, .. }
            | CheckSpec::PhiHarnack { radii, .. } => Some(radii),
            CheckSpec::HkCorridor { .. } | CheckSpec::LaplaceExponent { .. } => None,
        }
    }

    /// Largest multiple of a radius the checker probes.
    fn reach(&self) -> f64 {
        match self {
            CheckSpec::Poincare { kappa, .. } => *kappa,
            CheckSpec::CutoffEnergy { outer_factor, .. } => outer_factor + 1.0,
            CheckSpec::Capacity { .. } => 2.0,
            CheckSpec::PhiHarnack { cylinder, .. } => cylinder.c5,
            CheckSpec::Ujs { .. } => 0.0,
            _ => 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate_static()?;
        Ok(cfg)
    }

    /// Checks that do not need the built space.
    fn validate_static(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.trim().is_empty() {
            return bad("experiment name is empty".into());
        }
        if self.scales.phi_c.is_some() == self.scales.phi_c_from_phi_j {
            return bad("set exactly one of scales.phi_c and scales.phi_c_from_phi_j".into());
        }
        if self.scales.phi_j.is_none() && !matches!(self.kernel, JumpKernelSpec::Scale { .. }) {
            return bad("scales.phi_j is required with an explicit kernel".into());
        }
        self.envelope.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for c in &self.checks {
            if let Some(r) = c.radii() {
                if r.is_empty() || r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad(format!("{}: radii must be a nonempty list of nonnegative numbers", c.name()));
                }
            }
            match c {
                CheckSpec::HkCorridor { times, max_distance, .. } => {
                    if times.len() < 3 || times.iter().any(|t| !(*t > 0.0)) {
                        return bad("hk_corridor needs at least three positive times".into());
                    }
                    if !(*max_distance > 0.0) {
                        return bad("hk_corridor max_distance must be positive".into());
                    }
                }
                CheckSpec::PhiHarnack { cylinder, .. } => {
                    cylinder.validate().map_err(|e| CliError::Config(e.to_string()))?;
                }
                CheckSpec::LaplaceExponent { points, r_min, r_max, .. } => {
                    if *points < 2 || !(*r_min > 0.0 && r_max > r_min) {
                        return bad("laplace_exponent needs points >= 2 and 0 < r_min < r_max".into());
                    }
                }
                CheckSpec::ExitScaling { mc_paths, .. } if *mc_paths > self.limits.max_paths => {
                    return Err(CliError::Cap(format!(
                        "exit_scaling requests {mc_paths} paths, limit is {}",
                        self.limits.max_paths
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Grid checks against the diameter/4 guard of the built space.
    pub fn validate_grids(&self, guard: f64) -> Result<(), CliError> {
        let tol = 1.0 + 1e-9;
        for c in &self.checks {
            if let Some(r) = c.radii() {
                let worst = r.iter().copied().fold(0.0, f64::max) * c.reach();
                if worst > guard * tol {
                    return Err(CliError::Config(format!(
                        "{}: probes radius {worst}, beyond the guard {guard}",
                        c.name()
                    )));
                }
            }
            if let CheckSpec::HkCorridor { max_distance, .. } = c {
                if *max_distance > guard * tol {
                    return Err(CliError::Config(format!(
                        "hk_corridor: max_distance {max_distance} is beyond the guard {guard}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `φ_j` for the envelope: explicit, or the scale-form kernel's.
    pub fn phi_j(&self) -> ScaleFunction {
        match (&self.scales.phi_j, &self.kernel) {
            (Some(p), _) => p.clone(),
            (None, JumpKernelSpec::Scale { phi_j, .. }) => phi_j.clone(),
            (None, JumpKernelSpec::Explicit { .. }) => unreachable!("rejected by validation"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
seed = 1
[space]
builder = "lattice_torus"
dim = 1
side = 64
spacing = 1.0
[kernel]
form = "scale"
phi_j = { kind = "piecewise_power", breaks = [1.0], exponents = [1.0, 3.0] }
[scales]
phi_c = { kind = "piecewise_power", breaks = [], exponents = [2.0] }
"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.seed, 1);
        assert!(c.checks.is_empty());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("seed = 1", "seed = 1\nsed = 2");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_seed_rejected() {
        let text = MINIMAL.replace("seed = 1\n", "");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn guard_is_enforced() {
        let text = format!("{MINIMAL}\n[[checks]]\nkind = \"faber_krahn\"\nradii = [4.0, 32.0]\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert!(c.validate_grids(16.0).is_err());
        assert!(c.validate_grids(32.0).is_ok());
    }
}
