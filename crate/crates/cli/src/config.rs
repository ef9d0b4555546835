//! Plain-text experiment configuration: `key = value` lines, `#` comments.
//!
//! ```text
//! experiment = perimeter_sweep
//! dimension = 2
//! family = perturbed:B
//! t_values = 0, 0.1, 0.2
//! resolution = 256
//! seed = 7
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use periso_core::noise_stability::Variant;
use periso_core::periodic_sets::HalfSpaceSpec;
use periso_core::FamilySpec;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    KernelCert,
    PerimeterSweep,
    StabilitySweep,
    LimitCheck,
    DivergenceCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::KernelCert,
        Experiment::PerimeterSweep,
        Experiment::StabilitySweep,
        Experiment::LimitCheck,
        Experiment::DivergenceCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::KernelCert => "kernel_cert",
            Self::PerimeterSweep => "perimeter_sweep",
            Self::StabilitySweep => "stability_sweep",
            Self::LimitCheck => "limit_check",
            Self::DivergenceCheck => "divergence_check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dimension: usize,
    pub family: FamilySpec,
    pub t_values: Vec<f64>,
    pub rho_or_eps_values: Vec<f64>,
    pub resolution: usize,
    pub samples: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Noise model of the stability sweep.
    pub variant: Variant,
    /// Scan points per fiber for the multiplicity refinement; 0 skips it.
    pub fiber_samples: usize,
    /// Cosine-series order of the kernel under certification.
    pub kernel_order: usize,
    /// Grid size of the kernel sup-norm scan.
    pub grid_points: usize,
}

impl ExperimentConfig {
    /// The desk-scale profile: n = 2, resolution 256, 10^6 samples.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            dimension: 2,
            family: FamilySpec::HalfSpace(HalfSpaceSpec::positive(2)),
            t_values: vec![0.0],
            rho_or_eps_values: Vec::new(),
            resolution: 256,
            samples: 1_000_000,
            seed: 0,
            output_path: None,
            variant: Variant::GaussianOu,
            fiber_samples: 128,
            kernel_order: periso_core::theta_kernel::DEFAULT_ORDER,
            grid_points: 100_000,
        }
    }

    /// Parses a config file. `experiment` may be omitted when the caller
    /// supplies it (the CLI subcommand); if both are present they must agree.
    pub fn parse(text: &str, experiment: Option<Experiment>) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }

        let declared = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .map(|(_, v)| v.parse::<Experiment>())
            .transpose()?;
        let experiment = match (declared, experiment) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!(
                    "config declares experiment `{a}` but `{b}` was requested"
                )))
            }
            (Some(e), _) | (None, Some(e)) => e,
            (None, None) => return Err(CliError::Config("missing `experiment`".into())),
        };

        let mut cfg = Self::new(experiment);
        let mut family = None;
        for (key, value) in &pairs {
            let bad = |what: &str| CliError::Config(format!("`{key}`: {what} `{value}`"));
            match key.as_str() {
                "experiment" => {}
                "dimension" => cfg.dimension = value.parse().map_err(|_| bad("invalid integer"))?,
                "family" => family = Some(value.parse::<FamilySpec>()?),
                "t_values" => {
                    cfg.t_values = parse_list(value).ok_or_else(|| bad("invalid list"))?
                }
                "rho_or_eps_values" => {
                    cfg.rho_or_eps_values = parse_list(value).ok_or_else(|| bad("invalid list"))?
                }
                "resolution" => {
                    cfg.resolution = value.parse().map_err(|_| bad("invalid integer"))?
                }
                "samples" => cfg.samples = value.parse().map_err(|_| bad("invalid integer"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("invalid integer"))?,
                "output_path" => {
                    cfg.output_path = (!value.is_empty()).then(|| PathBuf::from(value))
                }
                "variant" => {
                    cfg.variant = match value.as_str() {
                        "gaussian_ou" => Variant::GaussianOu,
                        "uniform_heat" => Variant::UniformHeat,
                        _ => return Err(bad("unknown variant")),
                    }
                }
                "fiber_samples" => {
                    cfg.fiber_samples = value.parse().map_err(|_| bad("invalid integer"))?
                }
                "kernel_order" => {
                    cfg.kernel_order = value.parse().map_err(|_| bad("invalid integer"))?
                }
                "grid_points" => {
                    cfg.grid_points = value.parse().map_err(|_| bad("invalid integer"))?
                }
                _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
            }
        }
        cfg.family =
            family.unwrap_or_else(|| FamilySpec::HalfSpace(HalfSpaceSpec::positive(cfg.dimension)));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the fields against the preconditions of the operations they
    /// feed. Called by [`parse`](Self::parse); call again after overrides.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if !(2..=3).contains(&self.dimension) {
            return fail(format!("dimension {} not in {{2, 3}}", self.dimension));
        }
        if self.resolution < 8 {
            return fail(format!("resolution {} below 8", self.resolution));
        }
        if self.samples < 10_000 {
            return fail(format!("samples {} below 1e4", self.samples));
        }
        if self.fiber_samples != 0 && self.fiber_samples < 64 {
            return fail(format!(
                "fiber_samples {} must be 0 or at least 64",
                self.fiber_samples
            ));
        }
        if self.grid_points < 1000 {
            return fail(format!("grid_points {} below 1000", self.grid_points));
        }
        if let Some(&t) = self.t_values.iter().find(|t| t.is_nan() || t.abs() > 1.0) {
            return fail(format!("t = {t} outside [-1, 1]"));
        }
        // Catches dimension mismatches and invalid family/dimension pairs.
        self.family.build(self.dimension, None)?;
        Ok(())
    }

    /// Canonical `key = value` rendering of every field that affects the
    /// output. The output path is excluded.
    pub fn canonical(&self) -> String {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        format!(
            "experiment = {}\ndimension = {}\nfamily = {}\nt_values = {}\nrho_or_eps_values = {}\n\
             resolution = {}\nsamples = {}\nseed = {}\nvariant = {}\nfiber_samples = {}\n\
             kernel_order = {}\ngrid_points = {}\n",
            self.experiment,
            self.dimension,
            self.family,
            list(&self.t_values),
            list(&self.rho_or_eps_values),
            self.resolution,
            self.samples,
            self.seed,
            self.variant,
            self.fiber_samples,
            self.kernel_order,
            self.grid_points,
        )
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().ok())
        .collect()
}
