//! Command-line flags and the JSON config file that mirrors them, merged into one run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use twisted_rfh::orbits::{JacobianMode, ShootOptions};
use twisted_rfh::symplectic::{ModelFile, PhasePoint, RotationTwist, StarShapedModel};

use crate::error::CliError;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "twisted-rfh",
    version,
    about = "Twisted Reeb orbits, Conley-Zehnder indices and equivariant Floer homology over GF(2)"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Each can also be given in the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file with the same keys as the long flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// JSON model file (`{"kind", "n", "twist", "profile"}`).
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Order of the rotation.
    #[arg(long, global = true)]
    pub m: Option<u32>,
    /// Exponents, comma separated; a single value is used for every coordinate.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub k: Option<Vec<i64>>,
    /// Complex dimension.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Branch window `lo:hi` (inclusive).
    #[arg(long, global = true, value_parser = parse_range, allow_hyphen_values = true)]
    pub window: Option<(i64, i64)>,
    /// Residual tolerance for the orbit solver.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Relative tolerance of the ODE integrator.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the ODE integrator.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub atol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file; defaults to `$TWISTED_RFH_OUT_DIR/<command>.<ext>` or stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Number of samples along an orbit.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OrbitArgs {
    /// Branch `l` of the period `π(ml - k)/m` (defaults to the first positive period).
    #[arg(long, allow_hyphen_values = true)]
    pub branch: Option<i64>,
    /// Initial guess for the period (defaults to the branch period).
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Starting point as 2n comma-separated reals (defaults to the first axis).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub seed: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum, default_value = "finite-difference")]
    pub jacobian: Jacobian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Closed-form orbit (round sphere only).
    Analytic,
    /// Newton shooting.
    Shoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Jacobian {
    FiniteDifference,
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepTask {
    Homology,
    Certify,
    Spectrum,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the twisted spectrum with dimensions and indices.
    Spectrum,
    /// Find one twisted orbit.
    Orbit(OrbitArgs),
    /// Action of a twisted orbit against its period.
    Action(OrbitArgs),
    /// Conley-Zehnder indices over the branch window.
    CzIndex,
    /// Build the pearl chain complex.
    Complex {
        /// Pass to the quotient by the rotation action.
        #[arg(long)]
        quotient: bool,
    },
    /// Homology of the quotient pearl complex against Tate homology.
    Homology,
    /// Tate homology of the cyclic group.
    Tate {
        /// Degree range `lo:hi`.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-3:3")]
        degrees: (i64, i64),
    },
    /// Lift a sampled loop in the lens space and report its deck element.
    Lift {
        /// JSON loop file (`{"twist", "samples"}`).
        #[arg(long = "loop", value_name = "FILE")]
        loop_file: PathBuf,
        #[arg(long, default_value_t = 0)]
        basepoint: usize,
    },
    /// Orbit, action, index and noncontractibility certificate.
    Certify(OrbitArgs),
    /// Run a task over a parameter grid.
    Sweep {
        /// Grid axis such as `m=2..8` or `n=2,3`; repeatable.
        #[arg(long = "sweep", value_parser = parse_axis)]
        axes: Vec<(String, Vec<i64>)>,
        #[arg(long, value_enum, default_value = "homology")]
        task: SweepTask,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Orbit(_) => "orbit",
            Command::Action(_) => "action",
            Command::CzIndex => "cz-index",
            Command::Complex { .. } => "complex",
            Command::Homology => "homology",
            Command::Tate { .. } => "tate",
            Command::Lift { .. } => "lift",
            Command::Certify(_) => "certify",
            Command::Sweep { .. } => "sweep",
        }
    }
}

pub fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `lo:hi`, got `{s}`"))?;
    let lo = a.trim().parse::<i64>().map_err(|e| format!("`{a}`: {e}"))?;
    let hi = b.trim().parse::<i64>().map_err(|e| format!("`{b}`: {e}"))?;
    if hi < lo {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// `name=a..b` (inclusive) or `name=a,b,c`.
pub fn parse_axis(s: &str) -> Result<(String, Vec<i64>), String> {
    let (name, values) = s.split_once('=').ok_or_else(|| format!("expected `name=values`, got `{s}`"))?;
    let name = name.trim().to_string();
    let parse = |t: &str| t.trim().parse::<i64>().map_err(|e| format!("`{t}`: {e}"));
    let values = match values.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if b < a {
                return Err(format!("empty range in `{s}`"));
            }
            (a..=b).collect()
        }
        None => values.split(',').map(parse).collect::<Result<_, _>>()?,
    };
    Ok((name, values))
}

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<PathBuf>,
    pub m: Option<u32>,
    pub k: Option<Vec<i64>>,
    pub n: Option<usize>,
    pub window: Option<(i64, i64)>,
    pub tol: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub sweep: Option<BTreeMap<String, Vec<i64>>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: ConfigFile =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        // paths inside the config are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.model = cfg.model.map(|p| base.join(p));
        cfg.out = cfg.out.map(|p| base.join(p));
        Ok(cfg)
    }
}

/// Effective settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_path: Option<PathBuf>,
    pub m: Option<u32>,
    pub k: Option<Vec<i64>>,
    pub n: Option<usize>,
    pub window: Option<(i64, i64)>,
    pub tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub sweep: BTreeMap<String, Vec<i64>>,
}

impl RunConfig {
    pub fn merge(flags: &CommonArgs, file: ConfigFile) -> Result<Self, CliError> {
        let defaults = ShootOptions::default();
        let cfg = RunConfig {
            model_path: flags.model.clone().or(file.model),
            m: flags.m.or(file.m),
            k: flags.k.clone().or(file.k),
            n: flags.n.or(file.n),
            window: flags.window.or(file.window),
            tol: flags.tol.or(file.tol).unwrap_or(defaults.residual_tol),
            rtol: flags.rtol.or(file.rtol).unwrap_or(defaults.flow.ode.rtol),
            atol: flags.atol.or(file.atol).unwrap_or(defaults.flow.ode.atol),
            format: flags.format.or(file.format).unwrap_or_default(),
            out: flags.out.clone().or(file.out),
            samples: flags.samples.or(file.samples),
            sweep: file.sweep.unwrap_or_default(),
        };
        for (name, v) in [("tol", cfg.tol), ("rtol", cfg.rtol), ("atol", cfg.atol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some((lo, hi)) = cfg.window {
            if hi < lo {
                return Err(CliError::config(format!("empty window {lo}:{hi}")));
            }
        }
        if cfg.samples == Some(0) {
            return Err(CliError::config("samples must be positive"));
        }
        Ok(cfg)
    }

    pub fn shoot_options(&self, jacobian: Jacobian) -> ShootOptions {
        let mut opts = ShootOptions { residual_tol: self.tol, ..ShootOptions::default() };
        opts.flow.ode.rtol = self.rtol;
        opts.flow.ode.atol = self.atol;
        opts.jacobian = match jacobian {
            Jacobian::FiniteDifference => JacobianMode::FiniteDifference,
            Jacobian::Variational => JacobianMode::Variational,
        };
        opts
    }

    pub fn tolerances_json(&self) -> Value {
        json!({"residual": self.tol, "ode_rtol": self.rtol, "ode_atol": self.atol})
    }

    pub fn window_or(&self, default: (i64, i64)) -> (i64, i64) {
        self.window.unwrap_or(default)
    }

    pub fn require_m(&self) -> Result<u32, CliError> {
        match self.m {
            Some(0) => Err(CliError::config("m must be at least 1")),
            Some(m) => Ok(m),
            None => Err(CliError::config("missing --m")),
        }
    }

    /// The model and twist: from `--model` when given (with `--m`/`--k` overriding
    /// its twist), otherwise the round sphere of dimension `--n`.
    pub fn model_and_twist(&self) -> Result<(StarShapedModel, RotationTwist), CliError> {
        let from_file = match &self.model_path {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                let file = ModelFile::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                Some(file.into_parts().map_err(CliError::config)?)
            }
            None => None,
        };
        let n = match (&from_file, self.n) {
            (Some((model, _)), Some(n)) if model.n() != n => {
                return Err(CliError::config(format!("--n {n} conflicts with model dimension {}", model.n())))
            }
            (Some((model, _)), _) => model.n(),
            (None, Some(n)) => n,
            (None, None) => return Err(CliError::config("missing --n (or --model)")),
        };
        if n == 0 {
            return Err(CliError::config("n must be at least 1"));
        }
        let twist = match (&from_file, self.m) {
            (Some((_, t)), None) if self.k.is_none() => t.clone(),
            (from, m) => {
                let m = m.or(from.as_ref().map(|(_, t)| t.m())).ok_or_else(|| CliError::config("missing --m"))?;
                let k = match &self.k {
                    None => vec![1; n],
                    Some(k) if k.len() == 1 => vec![k[0]; n],
                    Some(k) if k.len() == n => k.clone(),
                    Some(k) => return Err(CliError::config(format!("--k has {} entries, expected 1 or {n}", k.len()))),
                };
                RotationTwist::new(m, k).map_err(CliError::config)?
            }
        };
        let model = from_file.map(|(model, _)| model).unwrap_or_else(|| StarShapedModel::round_sphere(n));
        Ok((model, twist))
    }

    pub fn parameters_json(&self, twist: Option<&RotationTwist>) -> Value {
        let mut v = json!({"tolerances": self.tolerances_json()});
        if let Some(t) = twist {
            v["m"] = json!(t.m());
            v["k"] = json!(t.exponents());
            v["n"] = json!(t.n());
        }
        if let Some(p) = &self.model_path {
            v["model"] = json!(p.display().to_string());
        }
        v
    }
}

pub fn seed_point(seed: &Option<Vec<f64>>, n: usize) -> Result<PhasePoint, CliError> {
    match seed {
        None => Ok(PhasePoint::axis(n, 0)),
        Some(v) if v.len() == 2 * n => {
            let p = PhasePoint::from_real(v).map_err(CliError::config)?;
            if p.norm() == 0.0 {
                return Err(CliError::config("seed must be nonzero"));
            }
            Ok(p)
        }
        Some(v) => Err(CliError::config(format!("--seed has {} entries, expected {}", v.len(), 2 * n))),
    }
}
