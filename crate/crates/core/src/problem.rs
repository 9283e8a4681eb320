//! Problem configuration: coefficients, kernel, mesh size, initial data, numerics.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::expr::Expr;
use crate::kernels::{residual_l, RateFunction, RelaxationKernel};
use crate::memory::{HistoryMode, DEFAULT_SNAPSHOT_BUDGET};
use crate::mesh::SpatialMesh;

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;
pub const DEFAULT_OUTPUT_STRIDE: usize = 10;

/// Initial displacement or velocity: an expression in `x`, or values on the
/// free nodes `h, 2h, …, L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialData {
    Expression(String),
    Nodal(Vec<f64>),
}

impl InitialData {
    pub fn zero() -> Self {
        Self::Expression("0".into())
    }

    pub fn expr(s: impl Into<String>) -> Self {
        Self::Expression(s.into())
    }

    /// Nodal interpolant on the free dofs of `mesh`.
    pub fn sample(&self, mesh: &SpatialMesh) -> Result<Vec<f64>> {
        match self {
            Self::Expression(src) => {
                let e = Expr::parse(src)?;
                let vals = mesh.interpolate(|x| e.eval(x));
                if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                    return arg(format!(
                        "initial data '{src}' is not finite at x = {}",
                        mesh.free_nodes()[i]
                    ));
                }
                Ok(vals)
            }
            Self::Nodal(v) => {
                if v.len() != mesh.n_free() {
                    return arg(format!(
                        "nodal initial data has {} values, mesh has {} free nodes",
                        v.len(),
                        mesh.n_free()
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryChoice {
    /// Fast recurrences for exponential kernels, stored snapshots otherwise.
    #[default]
    Auto,
    Direct,
    Fast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m: f64,
    pub p: f64,
    pub source_on: bool,
    pub length: f64,
    pub n_elems: usize,
    pub kernel: RelaxationKernel,
    /// Decay rate in `g' ≤ −ξ g`; the kernel's natural rate when absent.
    pub xi: Option<RateFunction>,
    pub u0: InitialData,
    pub u1: InitialData,
    pub dt: f64,
    pub t_final: f64,
    pub output_stride: usize,
    pub blowup_threshold: f64,
    pub history: HistoryChoice,
    pub snapshot_budget: usize,
    /// Allow `l = a − ∫g ≤ 0`, for blow-up experiments only.
    pub waive_residual_check: bool,
    /// Keep `(u, v)` at every record, for offline recomputation.
    pub keep_states: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            sigma: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            m: 2.0,
            p: 4.0,
            source_on: true,
            length: 1.0,
            n_elems: 64,
            kernel: RelaxationKernel::Zero,
            xi: None,
            u0: InitialData::zero(),
            u1: InitialData::zero(),
            dt: 1e-3,
            t_final: 1.0,
            output_stride: DEFAULT_OUTPUT_STRIDE,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            history: HistoryChoice::Auto,
            snapshot_budget: DEFAULT_SNAPSHOT_BUDGET,
            waive_residual_check: false,
            keep_states: false,
        }
    }
}

impl ProblemConfig {
    /// Number of steps to reach `t_final`.
    pub fn n_steps(&self) -> usize {
        let n = self.t_final / self.dt;
        // tolerate representation error in t_final/dt
        (n - 1e-9 * n.max(1.0)).ceil().max(0.0) as usize
    }

    pub fn rate(&self) -> RateFunction {
        self.xi
            .clone()
            .or_else(|| self.kernel.natural_rate())
            .unwrap_or(RateFunction::Constant { c: 1.0 })
    }

    pub fn history_mode(&self) -> HistoryMode {
        match self.history {
            HistoryChoice::Direct => HistoryMode::Direct,
            HistoryChoice::Fast => HistoryMode::FastExponential,
            HistoryChoice::Auto => match self.kernel {
                RelaxationKernel::Exponential { .. } => HistoryMode::FastExponential,
                _ => HistoryMode::Direct,
            },
        }
    }

    pub fn residual_l(&self) -> f64 {
        residual_l(&self.kernel, self.a)
    }

    /// Checks every invariant; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let nonneg = [
            ("b", self.b),
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return arg(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return arg(format!("a must be positive, got {}", self.a));
        }
        if !(self.p > 2.0 && self.p.is_finite()) {
            return arg(format!("p must exceed 2, got {}", self.p));
        }
        if !(self.m >= 2.0 && self.m.is_finite()) {
            return arg(format!("m must be at least 2, got {}", self.m));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return arg(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return arg(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.output_stride == 0 {
            return arg("output_stride must be at least 1");
        }
        if !(self.blowup_threshold > 0.0) {
            return arg("blowup_threshold must be positive");
        }
        let mesh = SpatialMesh::uniform(self.length, self.n_elems)?;
        self.kernel.validate()?;
        if let Some(xi) = &self.xi {
            xi.validate()?;
        }
        let l = self.residual_l();
        if !(l > 0.0) && !self.waive_residual_check {
            return arg(format!(
                "residual stiffness l = a - int g = {l} must be positive (set waive_residual_check for blow-up experiments)"
            ));
        }
        if self.history_mode() == HistoryMode::FastExponential
            && !matches!(self.kernel, RelaxationKernel::Exponential { .. })
        {
            return arg("fast history requires an exponential kernel");
        }
        if self.history_mode() == HistoryMode::Direct {
            crate::memory::History::check_budget(
                HistoryMode::Direct,
                self.n_steps() + 1,
                mesh.n_free(),
                self.snapshot_budget,
            )?;
        }
        self.u0.sample(&mesh)?;
        self.u1.sample(&mesh)?;

        let mut warnings = Vec::new();
        if self.kernel.is_zero() {
            warnings.push("zero kernel: memory term disabled (g(0) > 0 formally violated)".into());
        }
        if self.p > 6.0 || self.m > 4.0 {
            warnings.push(format!(
                "p = {}, m = {} lie outside the embedding range the theory assumes in three dimensions; \
                 admissible on the interval",
                self.p, self.m
            ));
        }
        if !(l > 0.0) {
            warnings.push(format!(
                "residual stiffness l = {l} is not positive; waived"
            ));
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        assert!(ProblemConfig::default().validate().unwrap().len() == 1);
    }

    #[test]
    fn invariant_violations() {
        let bad = [
            ProblemConfig {
                a: 0.0,
                ..Default::default()
            },
            ProblemConfig {
                p: 2.0,
                ..Default::default()
            },
            ProblemConfig {
                m: 1.5,
                ..Default::default()
            },
            ProblemConfig {
                dt: 0.0,
                ..Default::default()
            },
            ProblemConfig {
                t_final: -1.0,
                ..Default::default()
            },
            ProblemConfig {
                alpha: -1.0,
                ..Default::default()
            },
            ProblemConfig {
                n_elems: 1,
                ..Default::default()
            },
            ProblemConfig {
                kernel: RelaxationKernel::Exponential { g0: 2.0, mu: 1.0 },
                ..Default::default()
            },
            ProblemConfig {
                u0: InitialData::expr("sin("),
                ..Default::default()
            },
            ProblemConfig {
                u0: InitialData::Nodal(vec![0.0; 3]),
                ..Default::default()
            },
            ProblemConfig {
                history: HistoryChoice::Fast,
                ..Default::default()
            },
            ProblemConfig {
                kernel: RelaxationKernel::Polynomial { g0: 0.2, nu: 2.0 },
                n_elems: 1000,
                t_final: 10.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let waived = ProblemConfig {
            kernel: RelaxationKernel::Exponential { g0: 2.0, mu: 1.0 },
            waive_residual_check: true,
            ..Default::default()
        };
        assert!(waived.validate().is_ok());
    }

    #[test]
    fn step_count_and_modes() {
        let c = ProblemConfig {
            dt: 1e-3,
            t_final: 10.0,
            ..Default::default()
        };
        assert_eq!(c.n_steps(), 10_000);
        let c = ProblemConfig {
            dt: 0.3,
            t_final: 1.0,
            ..Default::default()
        };
        assert_eq!(c.n_steps(), 4);
        let c = ProblemConfig {
            kernel: RelaxationKernel::Exponential { g0: 0.25, mu: 1.0 },
            ..Default::default()
        };
        assert_eq!(c.history_mode(), HistoryMode::FastExponential);
        assert_eq!(c.rate(), RateFunction::Constant { c: 1.0 });
    }

    #[test]
    fn initial_data_sampling() {
        let mesh = SpatialMesh::uniform(1.0, 4).unwrap();
        assert_eq!(
            InitialData::expr("2*x").sample(&mesh).unwrap(),
            vec![0.5, 1.0, 1.5, 2.0]
        );
        assert!(InitialData::expr("1/x - 1/x").sample(&mesh).is_ok());
        assert!(InitialData::expr("ln(x - 1)").sample(&mesh).is_err());
    }
}
