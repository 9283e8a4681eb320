//! Relaxation kernels `g`, rate functions `ξ`, and the admissibility checks
//!
//! * (G1): `g` nonincreasing, `g(0) > 0`, residual stiffness `l = a − ∫₀^∞ g > 0`;
//! * (G2): `g'(s) ≤ −ξ(s) g(s)` for a positive nonincreasing `ξ`.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Tolerance on `g' + ξ g` for kernels with a closed-form derivative.
pub const G2_TOL_CLOSED_FORM: f64 = 1e-10;
/// Tolerance on `g' + ξ g` for sampled kernels (finite-difference `g'`).
pub const G2_TOL_TABULATED: f64 = 1e-6;

/// The memory kernel `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RelaxationKernel {
    /// `g ≡ 0`; disables the memory term.
    Zero,
    /// `g(s) = g0·exp(−μ s)`
    Exponential { g0: f64, mu: f64 },
    /// `g(s) = g0·(1+s)^(−ν)`, `ν > 1`
    Polynomial { g0: f64, nu: f64 },
    /// Piecewise-linear interpolant of `(s, g)` samples starting at `s = 0`,
    /// extended by zero past the last sample.
    Tabulated { samples: Vec<(f64, f64)> },
}

fn check_samples(samples: &[(f64, f64)], what: &str) -> Result<()> {
    if samples.len() < 2 {
        return arg(format!("{what} table needs at least two samples"));
    }
    if samples[0].0 != 0.0 {
        return arg(format!("{what} table must start at s = 0"));
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return arg(format!(
                "{what} table abscissae must be strictly increasing"
            ));
        }
    }
    if samples
        .iter()
        .any(|(s, v)| !s.is_finite() || !v.is_finite())
    {
        return arg(format!("{what} table contains non-finite values"));
    }
    Ok(())
}

/// Linear interpolation on a sorted table; `None` past the last abscissa.
fn interpolate(samples: &[(f64, f64)], s: f64) -> Option<f64> {
    let last = samples.last()?;
    if s > last.0 {
        return None;
    }
    let idx = samples.partition_point(|(x, _)| *x <= s);
    if idx == 0 {
        return Some(samples[0].1);
    }
    if idx >= samples.len() {
        return Some(last.1);
    }
    let (x0, y0) = samples[idx - 1];
    let (x1, y1) = samples[idx];
    Some(y0 + (y1 - y0) * (s - x0) / (x1 - x0))
}

/// Exact integral of the piecewise-linear interpolant over `[0, min(t, s_last)]`.
fn integrate_table(samples: &[(f64, f64)], t: f64) -> f64 {
    let mut acc = 0.0;
    for w in samples.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if t <= x0 {
            break;
        }
        if t >= x1 {
            acc += 0.5 * (y0 + y1) * (x1 - x0);
        } else {
            let yt = y0 + (y1 - y0) * (t - x0) / (x1 - x0);
            acc += 0.5 * (y0 + yt) * (t - x0);
            break;
        }
    }
    acc
}

fn check_time(s: f64) -> Result<()> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("kernel evaluated at s = {s} < 0")));
    }
    Ok(())
}

impl RelaxationKernel {
    pub fn exponential(g0: f64, mu: f64) -> Result<Self> {
        let k = Self::Exponential { g0, mu };
        k.validate()?;
        Ok(k)
    }

    pub fn polynomial(g0: f64, nu: f64) -> Result<Self> {
        let k = Self::Polynomial { g0, nu };
        k.validate()?;
        Ok(k)
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        let k = Self::Tabulated { samples };
        k.validate()?;
        Ok(k)
    }

    /// Checks the family's parameter constraints. Monotonicity and sign of
    /// tabulated data are required here because non-monotone kernels are
    /// outside the model.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Exponential { g0, mu } => {
                if !(*g0 > 0.0 && g0.is_finite()) {
                    return arg("exponential kernel needs g0 > 0");
                }
                if !(*mu > 0.0 && mu.is_finite()) {
                    return arg("exponential kernel needs mu > 0");
                }
                Ok(())
            }
            Self::Polynomial { g0, nu } => {
                if !(*g0 > 0.0 && g0.is_finite()) {
                    return arg("polynomial kernel needs g0 > 0");
                }
                if !(*nu > 1.0 && nu.is_finite()) {
                    return arg("polynomial kernel needs nu > 1");
                }
                Ok(())
            }
            Self::Tabulated { samples } => {
                check_samples(samples, "kernel")?;
                if samples.iter().any(|(_, g)| *g < 0.0) {
                    return arg("tabulated kernel has negative values");
                }
                if samples.windows(2).any(|w| w[1].1 > w[0].1) {
                    return arg("tabulated kernel is not nonincreasing");
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Exponential { .. } => "exponential",
            Self::Polynomial { .. } => "polynomial",
            Self::Tabulated { .. } => "tabulated",
        }
    }

    /// `g(s)`; errors for `s < 0`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        check_time(s)?;
        Ok(self.value(s))
    }

    /// `g(s)` without the domain check.
    pub(crate) fn value(&self, s: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { g0, mu } => g0 * (-mu * s).exp(),
            Self::Polynomial { g0, nu } => g0 * (1.0 + s).powf(-nu),
            Self::Tabulated { samples } => interpolate(samples, s).unwrap_or(0.0),
        }
    }

    /// `g'(s)`: closed form where available, centered differences of the
    /// interpolant for tabulated kernels (one-sided at `s = 0`).
    pub fn derivative(&self, s: f64) -> Result<f64> {
        check_time(s)?;
        Ok(self.derivative_value(s))
    }

    pub(crate) fn derivative_value(&self, s: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { g0, mu } => -mu * g0 * (-mu * s).exp(),
            Self::Polynomial { g0, nu } => -nu * g0 * (1.0 + s).powf(-nu - 1.0),
            Self::Tabulated { .. } => {
                let h = 1e-6 * s.max(1.0);
                if s < h {
                    (self.value(s + h) - self.value(s)) / h
                } else {
                    (self.value(s + h) - self.value(s - h)) / (2.0 * h)
                }
            }
        }
    }

    /// `∫₀ᵗ g(s) ds`
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cumulative_value(t))
    }

    pub(crate) fn cumulative_value(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return self.mass();
        }
        match self {
            Self::Zero => 0.0,
            Self::Exponential { g0, mu } => -g0 / mu * (-mu * t).exp_m1(),
            Self::Polynomial { g0, nu } => g0 / (nu - 1.0) * (1.0 - (1.0 + t).powf(1.0 - nu)),
            Self::Tabulated { samples } => integrate_table(samples, t),
        }
    }

    /// `∫₀^∞ g(s) ds`
    pub fn mass(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { g0, mu } => g0 / mu,
            Self::Polynomial { g0, nu } => g0 / (nu - 1.0),
            Self::Tabulated { samples } => integrate_table(samples, f64::INFINITY),
        }
    }

    /// The rate function that realizes (G2) with equality, where one exists.
    pub fn natural_rate(&self) -> Option<RateFunction> {
        match self {
            Self::Zero => Some(RateFunction::Constant { c: 1.0 }),
            Self::Exponential { mu, .. } => Some(RateFunction::Constant { c: *mu }),
            Self::Polynomial { nu, .. } => Some(RateFunction::Hyperbolic { nu: *nu }),
            Self::Tabulated { .. } => None,
        }
    }

    fn g2_tolerance(&self) -> f64 {
        match self {
            Self::Tabulated { .. } => G2_TOL_TABULATED,
            _ => G2_TOL_CLOSED_FORM,
        }
    }
}

/// `l = a − ∫₀^∞ g`; may be nonpositive, the caller decides admissibility.
pub fn residual_l(kernel: &RelaxationKernel, a: f64) -> f64 {
    a - kernel.mass()
}

/// The rate function `ξ` of (G2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RateFunction {
    /// `ξ ≡ c`
    Constant { c: f64 },
    /// `ξ(s) = ν/(1+s)`
    Hyperbolic { nu: f64 },
    /// Piecewise-linear samples from `s = 0`, held constant past the last one.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl RateFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { c } if !(*c > 0.0 && c.is_finite()) => {
                arg("constant rate needs c > 0")
            }
            Self::Hyperbolic { nu } if !(*nu > 0.0 && nu.is_finite()) => {
                arg("hyperbolic rate needs nu > 0")
            }
            Self::Tabulated { samples } => check_samples(samples, "rate"),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        check_time(s)?;
        Ok(self.value(s))
    }

    pub(crate) fn value(&self, s: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Hyperbolic { nu } => nu / (1.0 + s),
            Self::Tabulated { samples } => {
                interpolate(samples, s).unwrap_or_else(|| samples.last().map_or(0.0, |p| p.1))
            }
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match self {
            Self::Constant { c } => c * t,
            Self::Hyperbolic { nu } => nu * t.ln_1p(),
            Self::Tabulated { samples } => {
                let last = samples[samples.len() - 1];
                let inner = integrate_table(samples, t);
                if t > last.0 {
                    inner + last.1 * (t - last.0)
                } else {
                    inner
                }
            }
        }
    }
}

/// `∫_{t0}^{t} ξ(s) ds`
pub fn xi_integral(xi: &RateFunction, t0: f64, t: f64) -> Result<f64> {
    check_time(t0)?;
    if t < t0 {
        return arg(format!("xi_integral needs t0 <= t (t0 = {t0}, t = {t})"));
    }
    if t == t0 {
        return Ok(0.0);
    }
    Ok(match xi {
        RateFunction::Constant { c } => c * (t - t0),
        RateFunction::Hyperbolic { nu } => nu * ((1.0 + t) / (1.0 + t0)).ln(),
        RateFunction::Tabulated { .. } => xi.antiderivative(t) - xi.antiderivative(t0),
    })
}

/// Outcome of the (G1)/(G2) checks on a sample grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub l: f64,
    pub g1_ok: bool,
    pub g2_ok: bool,
    pub max_violation: f64,
    pub mass: f64,
    pub notes: Vec<String>,
}

impl KernelReport {
    pub fn admissible(&self) -> bool {
        self.g1_ok && self.g2_ok
    }
}

/// Evaluates (G1) and (G2) on `grid`.
pub fn check_hypotheses(
    kernel: &RelaxationKernel,
    xi: &RateFunction,
    a: f64,
    grid: &[f64],
) -> Result<KernelReport> {
    if grid.is_empty() {
        return arg("hypothesis check grid is empty");
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return arg("hypothesis check grid must be nonnegative and increasing");
    }
    kernel.validate()?;
    xi.validate()?;
    let mass = kernel.mass();
    let l = a - mass;
    let mut notes = Vec::new();

    let values: Vec<f64> = grid.iter().map(|&s| kernel.value(s)).collect();
    let monotone = values.windows(2).all(|w| w[1] <= w[0]) && values.iter().all(|v| *v >= 0.0);
    let g1_ok = if kernel.is_zero() {
        notes.push(
            "zero kernel: g(0) > 0 fails formally; admitted as the memoryless case with l = a"
                .to_string(),
        );
        a > 0.0
    } else {
        let g0 = kernel.value(0.0);
        if !(g0 > 0.0) {
            notes.push("g(0) is not positive".into());
        }
        if !(l > 0.0) {
            notes.push(format!("residual stiffness l = {l} is not positive"));
        }
        if !monotone {
            notes.push("g is not nonincreasing and nonnegative on the grid".into());
        }
        g0 > 0.0 && l > 0.0 && monotone
    };

    let rates: Vec<f64> = grid.iter().map(|&s| xi.value(s)).collect();
    let xi_ok = rates.iter().all(|r| *r > 0.0) && rates.windows(2).all(|w| w[1] <= w[0]);
    if !xi_ok {
        notes.push("xi is not positive and nonincreasing on the grid".into());
    }
    let max_violation = grid
        .iter()
        .zip(&values)
        .zip(&rates)
        .map(|((&s, &g), &r)| kernel.derivative_value(s) + r * g)
        .fold(f64::NEG_INFINITY, f64::max);
    let g2_ok = xi_ok && max_violation <= kernel.g2_tolerance();
    if max_violation > kernel.g2_tolerance() {
        notes.push(format!("g' + xi g reaches {max_violation:e} on the grid"));
    }
    Ok(KernelReport {
        l,
        g1_ok,
        g2_ok,
        max_violation,
        mass,
        notes,
    })
}

/// Uniform grid `0, T/(n-1), …, T` used by the CLI and run reports.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| horizon * i as f64 / (n - 1) as f64)
        .collect()
}
