//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [coefficients]
//! a = 1.0
//! b = 0.2
//! p = 4.0
//!
//! [kernel]
//! family = "exponential"   # zero | exponential | polynomial | tabulated
//! g0 = 0.25
//! mu = 1.0
//!
//! [initial]
//! u0 = "0.5*sin(pi*x/2)"
//! u1 = "0.2*x"
//!
//! [numerics]
//! dt = 1e-3
//! t_final = 10.0
//! ```
//!
//! Every table and key is optional; omitted values take the library defaults.
//! Table paths (`[kernel] table`, `[rate] table`) are relative to the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use viscowave_core::analysis::AnalysisOptions;
use viscowave_core::kernels::{uniform_grid, RateFunction, RelaxationKernel};
use viscowave_core::problem::{HistoryChoice, InitialData, ProblemConfig};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    coefficients: Coefficients,
    #[serde(default)]
    kernel: KernelSection,
    rate: Option<RateSection>,
    #[serde(default)]
    domain: Domain,
    #[serde(default)]
    initial: Initial,
    #[serde(default)]
    numerics: Numerics,
    #[serde(default)]
    analysis: Analysis,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Coefficients {
    a: Option<f64>,
    b: Option<f64>,
    sigma: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    m: Option<f64>,
    p: Option<f64>,
    source: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    family: String,
    g0: Option<f64>,
    mu: Option<f64>,
    nu: Option<f64>,
    table: Option<PathBuf>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            family: "zero".into(),
            g0: None,
            mu: None,
            nu: None,
            table: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateSection {
    form: String,
    c: Option<f64>,
    nu: Option<f64>,
    table: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Domain {
    length: Option<f64>,
    n_elems: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Initial {
    u0: Option<String>,
    u1: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Numerics {
    dt: Option<f64>,
    t_final: Option<f64>,
    output_stride: Option<usize>,
    blowup_threshold: Option<f64>,
    history: Option<HistoryChoice>,
    snapshot_budget: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Analysis {
    eps1: Option<f64>,
    eps2: Option<f64>,
    t0_fraction: Option<f64>,
    n_starts: Option<usize>,
    n_samples: Option<usize>,
    d1: Option<f64>,
    waive_residual_check: Option<bool>,
    kernel_check_horizon: Option<f64>,
    kernel_check_points: Option<usize>,
}

/// A parsed configuration file. The problem is not validated here, so that
/// `validate-kernel` can report on kernels the simulator would reject.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub analysis: AnalysisOptions,
    pub kernel_grid: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
        let kernel = build_kernel(&raw.kernel, base)?;
        let xi = raw.rate.as_ref().map(|r| build_rate(r, base)).transpose()?;

        let d = ProblemConfig::default();
        let c = &raw.coefficients;
        let n = &raw.numerics;
        let problem = ProblemConfig {
            a: c.a.unwrap_or(d.a),
            b: c.b.unwrap_or(d.b),
            sigma: c.sigma.unwrap_or(d.sigma),
            alpha: c.alpha.unwrap_or(d.alpha),
            beta: c.beta.unwrap_or(d.beta),
            gamma: c.gamma.unwrap_or(d.gamma),
            m: c.m.unwrap_or(d.m),
            p: c.p.unwrap_or(d.p),
            source_on: c.source.unwrap_or(d.source_on),
            length: raw.domain.length.unwrap_or(d.length),
            n_elems: raw.domain.n_elems.unwrap_or(d.n_elems),
            kernel,
            xi,
            u0: raw
                .initial
                .u0
                .clone()
                .map(InitialData::Expression)
                .unwrap_or(d.u0),
            u1: raw
                .initial
                .u1
                .clone()
                .map(InitialData::Expression)
                .unwrap_or(d.u1),
            dt: n.dt.unwrap_or(d.dt),
            t_final: n.t_final.unwrap_or(d.t_final),
            output_stride: n.output_stride.unwrap_or(d.output_stride),
            blowup_threshold: n.blowup_threshold.unwrap_or(d.blowup_threshold),
            history: n.history.unwrap_or(d.history),
            snapshot_budget: n.snapshot_budget.unwrap_or(d.snapshot_budget),
            waive_residual_check: raw.analysis.waive_residual_check.unwrap_or(false),
            keep_states: false,
        };

        let o = AnalysisOptions::default();
        let a = &raw.analysis;
        let analysis = AnalysisOptions {
            eps1: a.eps1.unwrap_or(o.eps1),
            eps2: a.eps2.unwrap_or(o.eps2),
            t0_fraction: a.t0_fraction.unwrap_or(o.t0_fraction),
            n_starts: a.n_starts.unwrap_or(o.n_starts),
            n_samples: a.n_samples.unwrap_or(o.n_samples),
            d1: a.d1.or(o.d1),
            seed: raw.seed.unwrap_or(o.seed),
        };
        if !(analysis.t0_fraction >= 0.0 && analysis.t0_fraction < 1.0) {
            return cfg_err("analysis.t0_fraction must lie in [0, 1)");
        }

        let horizon = a
            .kernel_check_horizon
            .unwrap_or_else(|| match &problem.kernel {
                RelaxationKernel::Tabulated { samples } => samples.last().map_or(1.0, |s| s.0),
                _ => problem.t_final.max(20.0),
            });
        if !(horizon > 0.0 && horizon.is_finite()) {
            return cfg_err("analysis.kernel_check_horizon must be positive");
        }
        let kernel_grid = uniform_grid(horizon, a.kernel_check_points.unwrap_or(2001));
        Ok(Self {
            problem,
            analysis,
            kernel_grid,
        })
    }
}

fn need(v: Option<f64>, family: &str, key: &str) -> Result<f64, ConfigError> {
    v.ok_or_else(|| ConfigError(format!("{family} needs '{key}'")))
}

fn build_kernel(k: &KernelSection, base: &Path) -> Result<RelaxationKernel, ConfigError> {
    let fam = k.family.as_str();
    let kernel = match fam {
        "zero" => Ok(RelaxationKernel::Zero),
        "exponential" => {
            RelaxationKernel::exponential(need(k.g0, fam, "g0")?, need(k.mu, fam, "mu")?)
        }
        "polynomial" => {
            RelaxationKernel::polynomial(need(k.g0, fam, "g0")?, need(k.nu, fam, "nu")?)
        }
        "tabulated" => {
            let path = k
                .table
                .as_ref()
                .ok_or_else(|| ConfigError("tabulated kernel needs 'table'".into()))?;
            RelaxationKernel::tabulated(read_table(&base.join(path))?)
        }
        other => return cfg_err(format!("unknown kernel family '{other}'")),
    };
    kernel.map_err(|e| ConfigError(e.to_string()))
}

fn build_rate(r: &RateSection, base: &Path) -> Result<RateFunction, ConfigError> {
    let form = r.form.as_str();
    let rate = match form {
        "constant" => RateFunction::Constant {
            c: need(r.c, form, "c")?,
        },
        "hyperbolic" => RateFunction::Hyperbolic {
            nu: need(r.nu, form, "nu")?,
        },
        "tabulated" => {
            let path = r
                .table
                .as_ref()
                .ok_or_else(|| ConfigError("tabulated rate needs 'table'".into()))?;
            RateFunction::Tabulated {
                samples: read_table(&base.join(path))?,
            }
        }
        other => return cfg_err(format!("unknown rate form '{other}'")),
    };
    rate.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(rate)
}

/// Two-column `(s, value)` CSV; a non-numeric first row is taken as a header.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, ConfigError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ConfigError(format!("cannot read table {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        if rec.len() != 2 {
            return cfg_err(format!(
                "{}: row {} needs two columns",
                path.display(),
                i + 1
            ));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(s), Ok(v)) => out.push((s, v)),
            _ if i == 0 => continue,
            _ => return cfg_err(format!("{}: row {} is not numeric", path.display(), i + 1)),
        }
    }
    Ok(out)
}
