//! Per-subcommand options. Every option can come from a flag or from the
//! matching section of the TOML config file; flags win.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

macro_rules! options {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(clap::Args, Deserialize, Serialize, Debug, Clone, Default, PartialEq)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name {
            $($(#[$fm])* pub $field: Option<$ty>,)*
        }

        impl $name {
            /// Fills every unset field from `file`.
            pub fn or(self, file: Self) -> Self {
                $name { $($field: self.$field.or(file.$field),)* }
            }
        }
    };
}

options!(EvolveOpts {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    j: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    dt_out: f64,
    #[arg(long)]
    tol: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    degrees: bool,
    #[arg(long)]
    out: PathBuf,
});

options!(SoeScanOpts {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    j: f64,
    #[arg(long)]
    gamma_min: f64,
    #[arg(long)]
    gamma_max: f64,
    #[arg(long)]
    gamma_steps: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
});

options!(K3Opts {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    j: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    theta_m: f64,
    #[arg(long)]
    phi_m: f64,
    #[arg(long)]
    t2: f64,
    #[arg(long)]
    t3: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    degrees: bool,
    #[arg(long)]
    out: PathBuf,
});

options!(K3ScanOpts {
    #[arg(long = "J")] #[serde(rename = "J")] j: f64,
    /// Explicit list; overrides the min/max/steps grid.
    #[arg(long, value_delimiter = ',')] gammas: Vec<f64>,
    #[arg(long)] gamma_min: f64,
    #[arg(long)] gamma_max: f64,
    #[arg(long)] gamma_steps: usize,
    #[arg(long)] seed: u64,
    #[arg(long)] n_starts: usize,
    #[arg(long)] n_starts_broken: usize,
    #[arg(long)] max_evals: usize,
    #[arg(long)] simplex_tol: f64,
    /// Time window in units of 1/J.
    #[arg(long)] t_max: f64,
    #[arg(long)] out: PathBuf,
});

options!(FixedScanOpts {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    j: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    theta_m: f64,
    #[arg(long)]
    phi_m: f64,
    #[arg(long)]
    n_theta: usize,
    #[arg(long)]
    n_phi: usize,
    #[arg(long)]
    seed: u64,
    /// Time-only starts per grid cell.
    #[arg(long)]
    n_starts: usize,
    #[arg(long)]
    max_evals: usize,
    #[arg(long)]
    t_max: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    degrees: bool,
    #[arg(long)]
    out: PathBuf,
});

#[derive(ValueEnum, Deserialize, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    E15,
    Parametric,
    Equivalence,
}

options!(LindbladOpts {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    j: f64,
    #[arg(long)]
    gamma1: f64,
    #[arg(long)]
    eps_g: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    dt_out: f64,
    /// Initial qubit angles; without them the trajectory starts from ½(|f⟩+i|e⟩)(⟨f|−i⟨e|).
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    tol: f64,
    #[arg(long, value_enum)]
    check: Check,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    degrees: bool,
    #[arg(long)]
    out: PathBuf,
});

options!(VerifyOpts {
    /// Print the per-criterion results as JSON.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")] json: bool,
    #[arg(long)] seed: u64,
    /// Comma-separated criterion ids to run.
    #[arg(long, value_delimiter = ',')] only: Vec<String>,
    #[arg(long)] out: PathBuf,
});

/// Layout of the config file: one optional section per subcommand.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    #[serde(default)]
    pub evolve: EvolveOpts,
    #[serde(default)]
    pub soe_scan: SoeScanOpts,
    #[serde(default)]
    pub k3: K3Opts,
    #[serde(default)]
    pub k3_scan: K3ScanOpts,
    #[serde(default)]
    pub fixed_scan: FixedScanOpts,
    #[serde(default)]
    pub lindblad: LindbladOpts,
    #[serde(default)]
    pub verify: VerifyOpts,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn required<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::Config(format!(
            "missing required option `{name}` (flag or config key)"
        ))
    })
}

/// Converts an angle given on the command line to radians.
pub fn angle(value: f64, degrees: bool) -> f64 {
    if degrees {
        value * PI / 180.0
    } else {
        value
    }
}

/// `steps` points from `lo` to `hi`, both included.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    match steps {
        0 => Err(CliError::Config("gamma-steps must be at least 1".into())),
        1 => Ok(vec![lo]),
        n => Ok((0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()),
    }
}
