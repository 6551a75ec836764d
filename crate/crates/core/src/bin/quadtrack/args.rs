//! Command-line flags, config-file merging and defaults.
//!
//! Every option is optional at parse time. A config file supplies a base,
//! flags given on the command line replace its keys, and the remaining gaps
//! are filled with defaults before the command runs. The resolved structure
//! is what the manifest records.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use quadtrack::gauge::Gauge;
use quadtrack::integrators::{Method, DEFAULT_FP_MAX, DEFAULT_FP_TOL};
use quadtrack::profile::StepGeometry;
use quadtrack::sampling::InterpMode;
use quadtrack::scenarios;
use quadtrack::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "quadtrack", version, about = "Quadrupole vector potentials and symplectic tracking")]
pub struct Cli {
    /// TOML file with base settings; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Invert harmonics into generalized gradients.
    Gradients(GradientsArgs),
    /// Build a potential table in one gauge.
    Build(BuildArgs),
    /// Track one particle through a magnet or a FODO lattice.
    Track(TrackArgs),
    /// Error against a fine reference versus step, with fitted orders.
    Converge(ConvergeArgs),
    /// Error, wall-clock and evaluation counts per gauge, with timing ratios.
    Efficiency(EfficiencyArgs),
    /// Horizontal kinetic energy over a long FODO run.
    Energy(EnergyArgs),
    /// Curl-curl residual versus truncation order per gauge.
    Maxwell(MaxwellArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads for independent jobs.
    #[arg(long, env = "QUADTRACK_JOBS")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Seed for randomized probe points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct FieldArgs {
    /// Harmonics CSV (`z,B2,B6,...,A2,...`).
    #[arg(long, conflicts_with_all = ["gradients", "analytic", "realistic"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Gradient dump written by `gradients`.
    #[arg(long, conflicts_with_all = ["analytic", "realistic"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradients: Option<PathBuf>,
    /// Analytic step profile (the default source).
    #[arg(long, num_args = 0, default_missing_value = "true", conflicts_with = "realistic")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<bool>,
    /// Synthetic realistic quadrupole (7 TeV protons, m = 2, 6, 10, 14).
    #[arg(long, num_args = 0, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realistic: Option<bool>,
    /// Radius of analysis; overrides the sidecar of `--input`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Zero padding added at each end of the harmonic data.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pad: Option<f64>,
    /// Accept harmonic orders not allowed for a quadrupole.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub any_order: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zmax: Option<f64>,
    /// Sampling step of the analytic profile.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dz: Option<f64>,
    /// Truncation order of the potential series.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nd: Option<usize>,
    /// Factor applied to every coefficient (e.g. `Q L / p0`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<Gauge>,
    /// Coefficient interpolation: exact, spline, interval, nearest, previous.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<InterpMode>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct StateArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub px0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub py0: Option<f64>,
    /// Relative momentum deviation.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Fixed-point tolerance of the implicit methods.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_max: Option<u32>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct GradientsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct BuildArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Focusing/defocusing couples; 0 tracks through a single magnet.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    /// Record every `every`-th couple exit (lattices) instead of every couple.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub every: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConvergeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_method: Option<Method>,
    /// Reference step; at most a tenth of the smallest step.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_step: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_fp_tol: Option<f64>,
    /// Errors at or below this are treated as round-off in the order fit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EfficiencyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    /// Gauges to compare; ratios are taken against the first.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauges: Option<Vec<Gauge>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_step: Option<f64>,
    /// Traversals per timing sample.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passes: Option<usize>,
    /// Timing samples; the median is reported.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnergyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Method>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    /// Couples per block of the envelope fit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct MaxwellArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    /// Inclusive range of truncation orders, `lo..hi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nd_range: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauges: Option<Vec<Gauge>>,
    /// Random points at which the curl is compared across gauges.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
}

/// Reads a flat TOML config.
pub fn load_config(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse::<toml::Table>().map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
            .unwrap_or(1);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.message().to_string(),
        }
    })
}

/// `config` with every key set in `flags` replaced.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&toml::Table>) -> Result<T> {
    let mut table = config.cloned().unwrap_or_default();
    let given = toml::Table::try_from(flags).map_err(|e| Error::Invalid(format!("cannot encode flags: {e}")))?;
    table.extend(given);
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Invalid(format!("config: {}", e.message())))
}

/// Where the magnet comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Analytic,
    Realistic,
    Harmonics,
    Gradients,
}

impl CommonArgs {
    pub fn fill(&mut self) {
        self.out.get_or_insert_with(|| PathBuf::from("out"));
        self.jobs.get_or_insert(1);
        self.seed.get_or_insert(0);
    }
}

impl FieldArgs {
    pub fn source(&self) -> Source {
        if self.input.is_some() {
            Source::Harmonics
        } else if self.gradients.is_some() {
            Source::Gradients
        } else if self.realistic == Some(true) {
            Source::Realistic
        } else {
            Source::Analytic
        }
    }

    /// Fills unset keys; `mode` and `gauge` fall back to the given defaults.
    pub fn fill(&mut self, gauge: Gauge, mode: InterpMode) {
        let source = self.source();
        self.analytic = Some(source == Source::Analytic);
        self.realistic = Some(source == Source::Realistic);
        self.gauge.get_or_insert(gauge);
        self.mode.get_or_insert(mode);
        match source {
            Source::Analytic => {
                let g = StepGeometry::REFERENCE;
                self.alpha.get_or_insert(g.alpha);
                self.l1.get_or_insert(g.l1);
                self.l2.get_or_insert(g.l2);
                self.z2.get_or_insert(g.z2);
                self.zmax.get_or_insert(g.zmax);
                self.dz.get_or_insert(scenarios::BENCH_DATA_DZ);
                self.nd.get_or_insert(scenarios::BENCH_ND);
                self.scale.get_or_insert(1.0);
            }
            Source::Realistic => {
                self.dz = Some(scenarios::REALISTIC_DATA_DZ);
                self.nd.get_or_insert(scenarios::REALISTIC_ND);
                if self.scale.is_none() {
                    self.scale = scenarios::reference_potential_scale().ok();
                }
            }
            Source::Harmonics => {
                self.pad.get_or_insert(0.0);
                self.any_order.get_or_insert(false);
                self.nd.get_or_insert(scenarios::BENCH_ND);
                self.scale.get_or_insert(1.0);
            }
            Source::Gradients => {
                self.nd.get_or_insert(scenarios::BENCH_ND);
                self.scale.get_or_insert(1.0);
            }
        }
    }

    pub fn geometry(&self) -> StepGeometry {
        let g = StepGeometry::REFERENCE;
        StepGeometry {
            alpha: self.alpha.unwrap_or(g.alpha),
            l1: self.l1.unwrap_or(g.l1),
            l2: self.l2.unwrap_or(g.l2),
            z2: self.z2.unwrap_or(g.z2),
            zmax: self.zmax.unwrap_or(g.zmax),
        }
    }
}

impl StateArgs {
    pub fn fill(&mut self) {
        let w = scenarios::BENCH_INITIAL;
        self.x0.get_or_insert(w[0]);
        self.y0.get_or_insert(w[1]);
        self.px0.get_or_insert(w[2]);
        self.py0.get_or_insert(w[3]);
        self.delta.get_or_insert(0.0);
    }
}

impl SolverArgs {
    pub fn fill(&mut self) {
        self.fp_tol.get_or_insert(DEFAULT_FP_TOL);
        self.fp_max.get_or_insert(DEFAULT_FP_MAX);
    }
}

/// Parses `lo..hi` (inclusive) or a single order.
pub fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Invalid(format!("bad order range `{s}`; expected lo..hi"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let config: toml::Table = "nd = 8\ngauge = \"coulomb\"\nmethods = [\"rk4\", \"lie4\"]\nstep = 0.04\n".parse().unwrap();
        let flags = TrackArgs {
            step: Some(0.02),
            ..Default::default()
        };
        let m: TrackArgs = merge(&flags, Some(&config)).unwrap();
        assert_eq!(m.step, Some(0.02));
        assert_eq!(m.field.nd, Some(8));
        assert_eq!(m.field.gauge, Some(Gauge::Coulomb));
        let c: ConvergeArgs = merge(&ConvergeArgs::default(), Some(&config)).unwrap();
        assert_eq!(c.methods, Some(vec![Method::Rk4, Method::Lie4]));
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..16").unwrap(), (2, 16));
        assert_eq!(parse_range("2..=4").unwrap(), (2, 4));
        assert_eq!(parse_range("6").unwrap(), (6, 6));
        assert!(parse_range("8..2").is_err());
        assert!(parse_range("a..b").is_err());
    }
}
