//! Energy, potential, Lyapunov and blow-up functionals.
//!
//! Everything here is a pure function of measured scalars or of a state and
//! its history. The integrator calls [`measure`] once per step and derives
//! the ledger from the resulting [`Measures`].

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::integrator::Model;
use crate::linalg::dot;
use crate::memory::History;
use crate::problem::ProblemConfig;

/// Scalar measurements of one state `(u, v)` at time `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub t: f64,
    /// `‖∇u‖²`
    pub grad_sq: f64,
    /// `‖u‖_p^p`
    pub lp: f64,
    /// `‖u‖²`
    pub u_sq: f64,
    /// `u(L)`
    pub u_bdry: f64,
    /// `‖v‖²`
    pub v_sq: f64,
    /// `v(L)`
    pub v_bdry: f64,
    /// `∫∇u·∇v`
    pub grad_uv: f64,
    /// `‖∇v‖²`
    pub grad_v_sq: f64,
    /// `∫uv + u(L)v(L)`
    pub uv_inertia: f64,
    /// `(g∘∇u)(t)`
    pub g_circ: f64,
    /// `(g'∘∇u)(t)`
    pub g_prime_circ: f64,
    /// `g(t)`
    pub g_t: f64,
    /// `∫₀ᵗ g`
    pub kernel_cum: f64,
    /// `∫|u|^{p−2}u v`
    pub source_power: f64,
}

/// Measures a state against its history, which must end at `t`.
pub fn measure(model: &Model, t: f64, u: &[f64], v: &[f64], hist: &History) -> Result<Measures> {
    let ops = &model.ops;
    let ku = ops.stiffness.mul(u);
    let mu = ops.mass.mul(u);
    let p = model.cfg.p;
    let (g_circ, g_prime_circ) = hist.circ_functionals(u, t)?;
    let n = u.len();
    Ok(Measures {
        t,
        grad_sq: dot(u, &ku),
        lp: model.quad.lp_pow(u, p),
        u_sq: dot(u, &mu),
        u_bdry: u[n - 1],
        v_sq: ops.mass.quad_form(v),
        v_bdry: v[n - 1],
        grad_uv: dot(&ku, v),
        grad_v_sq: ops.stiffness.quad_form(v),
        uv_inertia: dot(&mu, v) + u[n - 1] * v[n - 1],
        g_circ,
        g_prime_circ,
        g_t: model.cfg.kernel.value(t),
        kernel_cum: model.cfg.kernel.cumulative_value(t),
        source_power: if model.cfg.source_on {
            dot(&model.quad.power_load(u, p), v)
        } else {
            0.0
        },
    })
}

fn source_lp(cfg: &ProblemConfig, m: &Measures) -> f64 {
    if cfg.source_on {
        m.lp
    } else {
        0.0
    }
}

/// `(a − ∫g)‖∇u‖² + g∘∇u + b/2‖∇u‖⁴`, the part of `I` and `J` that is
/// nonnegative whenever `l > 0`.
pub fn quadratic_part(cfg: &ProblemConfig, m: &Measures) -> f64 {
    (cfg.a - m.kernel_cum) * m.grad_sq + m.g_circ + 0.5 * cfg.b * m.grad_sq * m.grad_sq
}

pub fn functional_i(cfg: &ProblemConfig, m: &Measures) -> f64 {
    quadratic_part(cfg, m) - source_lp(cfg, m)
}

pub fn functional_j(cfg: &ProblemConfig, m: &Measures) -> f64 {
    0.5 * quadratic_part(cfg, m) - source_lp(cfg, m) / cfg.p
}

pub fn functional_e(cfg: &ProblemConfig, m: &Measures) -> f64 {
    functional_j(cfg, m) + 0.5 * m.v_sq + 0.5 * m.v_bdry * m.v_bdry
}

/// Right-hand side of the energy dissipation law; `≤ 0` for admissible data.
pub fn dissipation_rate(cfg: &ProblemConfig, m: &Measures) -> f64 {
    0.5 * m.g_prime_circ
        - 0.5 * m.g_t * m.grad_sq
        - cfg.sigma * m.grad_uv * m.grad_uv
        - cfg.alpha * m.v_sq
        - cfg.beta * m.grad_v_sq
        - cfg.gamma * m.v_bdry.abs().powf(cfg.m)
}

/// `M(t) = a + b‖∇u‖² + σ∫∇u·∇v`
pub fn kirchhoff_from(cfg: &ProblemConfig, m: &Measures) -> f64 {
    cfg.a + cfg.b * m.grad_sq + cfg.sigma * m.grad_uv
}

pub fn functional_g(cfg: &ProblemConfig, m: &Measures) -> f64 {
    m.uv_inertia
        + 0.5 * cfg.alpha * m.u_sq
        + 0.5 * cfg.beta * m.grad_sq
        + 0.25 * cfg.sigma * m.grad_sq * m.grad_sq
}

/// `H(t) = −∫_Ω v·∫₀ᵗg(t−s)(u(t)−u(s))ds − v(L)·∫₀ᵗg(t−s)(u(t,L)−u(s,L))ds`
pub fn functional_h(model: &Model, t: f64, u: &[f64], v: &[f64], hist: &History) -> Result<f64> {
    let rel = hist.relative_integral(u, t)?;
    let n = u.len();
    Ok(-(model.ops.mass.bilinear(&rel, v) + rel[n - 1] * v[n - 1]))
}

pub fn lyapunov_l(e: f64, g: f64, h: f64, eps1: f64, eps2: f64) -> f64 {
    e + eps1 * g + eps2 * h
}

/// One row of the energy ledger.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub t: f64,
    pub e: f64,
    pub i: f64,
    pub j: f64,
    pub g_circ: f64,
    pub g_prime_circ: f64,
    pub grad_sq: f64,
    pub grad_4: f64,
    pub lp: f64,
    pub u_sq: f64,
    pub u_bdry_sq: f64,
    pub v_sq: f64,
    pub v_bdry_sq: f64,
    pub uv_inertia: f64,
    pub m_coeff: f64,
    pub diss_rate: f64,
    /// Blow-up functional; filled in after the run, NaN until then.
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub kernel_cum: f64,
    /// `∫‖v‖²`
    pub cum_v_sq: f64,
    /// `∫‖∇v‖²`
    pub cum_grad_v_sq: f64,
    /// `∫|v(L)|^m`
    pub cum_v_bdry_m: f64,
    /// `∫(∫∇u·∇v)²`
    pub cum_grad_uv_sq: f64,
    /// `∫(½g‖∇u‖² − ½g'∘∇u)`
    pub cum_memory: f64,
    /// `∫∫|u|^{p−2}u v`
    pub cum_source: f64,
    /// `∫‖∇u‖⁴`
    pub cum_grad_4: f64,
    /// `∫‖u‖²`
    pub cum_u_sq: f64,
    /// `∫‖∇u‖²`
    pub cum_grad_sq: f64,
    /// `∫u(L)²`
    pub cum_u_bdry_sq: f64,
}

impl LedgerRecord {
    /// Everything except the time integrals, `F` and `H`.
    pub fn from_measures(cfg: &ProblemConfig, m: &Measures) -> Self {
        Self {
            t: m.t,
            e: functional_e(cfg, m),
            i: functional_i(cfg, m),
            j: functional_j(cfg, m),
            g_circ: m.g_circ,
            g_prime_circ: m.g_prime_circ,
            grad_sq: m.grad_sq,
            grad_4: m.grad_sq * m.grad_sq,
            lp: m.lp,
            u_sq: m.u_sq,
            u_bdry_sq: m.u_bdry * m.u_bdry,
            v_sq: m.v_sq,
            v_bdry_sq: m.v_bdry * m.v_bdry,
            uv_inertia: m.uv_inertia,
            m_coeff: kirchhoff_from(cfg, m),
            diss_rate: dissipation_rate(cfg, m),
            f: f64::NAN,
            g: functional_g(cfg, m),
            h: 0.0,
            kernel_cum: m.kernel_cum,
            ..Default::default()
        }
    }

    /// `[E + ‖u‖_p^p/p]₀ᵗ + dissipation integrals − source work`, which
    /// vanishes for exact solutions.
    pub fn energy_residual(&self, first: &LedgerRecord, cfg: &ProblemConfig) -> f64 {
        let src = |r: &LedgerRecord| if cfg.source_on { r.lp / cfg.p } else { 0.0 };
        (self.e + src(self)) - (first.e + src(first))
            + cfg.alpha * self.cum_v_sq
            + cfg.beta * self.cum_grad_v_sq
            + cfg.gamma * self.cum_v_bdry_m
            + cfg.sigma * self.cum_grad_uv_sq
            + self.cum_memory
            - self.cum_source
    }
}

/// Running trapezoid integrals of the dissipation and blow-up integrands.
#[derive(Clone, Debug, Default)]
pub struct CumulativeIntegrals {
    prev: Option<[f64; 10]>,
    prev_t: f64,
    pub totals: [f64; 10],
}

impl CumulativeIntegrals {
    fn integrands(cfg: &ProblemConfig, m: &Measures) -> [f64; 10] {
        [
            m.v_sq,
            m.grad_v_sq,
            m.v_bdry.abs().powf(cfg.m),
            m.grad_uv * m.grad_uv,
            0.5 * m.g_t * m.grad_sq - 0.5 * m.g_prime_circ,
            m.source_power,
            m.grad_sq * m.grad_sq,
            m.u_sq,
            m.grad_sq,
            m.u_bdry * m.u_bdry,
        ]
    }

    pub fn add(&mut self, cfg: &ProblemConfig, m: &Measures) {
        let f = Self::integrands(cfg, m);
        if let Some(prev) = self.prev {
            let h = m.t - self.prev_t;
            for k in 0..10 {
                self.totals[k] += 0.5 * h * (prev[k] + f[k]);
            }
        }
        self.prev = Some(f);
        self.prev_t = m.t;
    }

    pub fn write_into(&self, r: &mut LedgerRecord) {
        let c = &self.totals;
        r.cum_v_sq = c[0];
        r.cum_grad_v_sq = c[1];
        r.cum_v_bdry_m = c[2];
        r.cum_grad_uv_sq = c[3];
        r.cum_memory = c[4];
        r.cum_source = c[5];
        r.cum_grad_4 = c[6];
        r.cum_u_sq = c[7];
        r.cum_grad_sq = c[8];
        r.cum_u_bdry_sq = c[9];
    }
}

/// Time series of ledger records, one per output step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub records: Vec<LedgerRecord>,
}

impl EnergyLedger {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&LedgerRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn energy_residuals(&self, cfg: &ProblemConfig) -> Vec<f64> {
        match self.records.first() {
            Some(first) => self
                .records
                .iter()
                .map(|r| r.energy_residual(first, cfg))
                .collect(),
            None => Vec::new(),
        }
    }
}

/// `κ = (p − 2)/4`
pub fn kappa(p: f64) -> f64 {
    (p - 2.0) / 4.0
}

/// `T* ≤ F(0) / (κ F'(0))`
pub fn blowup_time_bound(f0: f64, fp0: f64, kappa: f64) -> Result<f64> {
    if !(fp0 > 0.0) {
        return Err(Error::Precondition(format!(
            "F'(0) = {fp0} must be positive"
        )));
    }
    if !(f0 > 0.0) || !(kappa > 0.0) {
        return Err(Error::Precondition(format!(
            "F(0) = {f0} and kappa = {kappa} must be positive"
        )));
    }
    Ok(f0 / (kappa * fp0))
}

/// Constants entering the blow-up functional, chosen to minimise the
/// concavity bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupParams {
    pub kappa: f64,
    /// `b` in `b(t + T₀)²`: `−2E(0)` when `E(0) < 0`, else 0.
    pub b: f64,
    pub t0: f64,
    /// `α‖u₀‖² + β‖∇u₀‖² + γu₀(L)² + σ/2‖∇u₀‖⁴`
    pub bracket: f64,
    /// `F(0)/(κF'(0))` evaluated with `T` equal to the bound itself.
    pub bound: Option<f64>,
}

/// Picks `b`, `T₀` and `T` for the initial record.
///
/// With `T` free, `F(0)/(κF'(0)) = T` has the solution
/// `T = (c₀ + bT₀²)/(2κm₀ − B + 2κbT₀)`, where `c₀ = ‖u₀‖² + u₀(L)²`,
/// `m₀ = ∫u₀u₁ + u₀(L)u₁(L)` and `B` is the bracket; `T₀` minimises it.
pub fn blowup_parameters(cfg: &ProblemConfig, first: &LedgerRecord) -> BlowupParams {
    let kappa = kappa(cfg.p);
    let bracket = cfg.alpha * first.u_sq
        + cfg.beta * first.grad_sq
        + cfg.gamma * first.u_bdry_sq
        + 0.5 * cfg.sigma * first.grad_4;
    let c0 = first.u_sq + first.u_bdry_sq;
    let m0 = first.uv_inertia;
    let d = 2.0 * kappa * m0 - bracket;
    if first.e < 0.0 {
        let b = -2.0 * first.e;
        let t0 = (-d + (d * d + 4.0 * kappa * kappa * b * c0).sqrt()) / (2.0 * kappa * b);
        let denom = d + 2.0 * kappa * b * t0;
        let bound = if denom > 0.0 && t0 > 0.0 {
            Some((c0 + b * t0 * t0) / denom)
        } else {
            None
        };
        BlowupParams {
            kappa,
            b,
            t0,
            bracket,
            bound,
        }
    } else {
        let bound = if d > 0.0 && c0 > 0.0 {
            Some(c0 / d)
        } else {
            None
        };
        BlowupParams {
            kappa,
            b: 0.0,
            t0: 0.0,
            bracket,
            bound,
        }
    }
}

/// `F(t)` at every record, with horizon `T` and shift `T₀`.
pub fn blowup_f(
    records: &[LedgerRecord],
    cfg: &ProblemConfig,
    horizon: f64,
    t0: f64,
    b_const: f64,
) -> Result<Vec<f64>> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Ok(Vec::new()),
    };
    if horizon < last.t {
        return arg(format!(
            "horizon {horizon} ends before the series ({})",
            last.t
        ));
    }
    let bracket = cfg.alpha * first.u_sq
        + cfg.beta * first.grad_sq
        + cfg.gamma * first.u_bdry_sq
        + 0.5 * cfg.sigma * first.grad_4;
    Ok(records
        .iter()
        .map(|r| {
            r.u_sq
                + r.u_bdry_sq
                + 0.5 * cfg.sigma * r.cum_grad_4
                + cfg.alpha * r.cum_u_sq
                + cfg.beta * r.cum_grad_sq
                + cfg.gamma * r.cum_u_bdry_sq
                + (horizon - r.t) * bracket
                + b_const * (r.t + t0) * (r.t + t0)
        })
        .collect())
}

/// `F F'' − (1 + κ) F'²` by centered differences on a uniform grid; the
/// first and last entries are `None`.
pub fn concavity_margin(times: &[f64], f: &[f64], kappa: f64) -> Result<Vec<Option<f64>>> {
    if times.len() != f.len() {
        return arg("times and F differ in length");
    }
    let n = f.len();
    let mut out = vec![None; n];
    for k in 1..n.saturating_sub(1) {
        let h1 = times[k] - times[k - 1];
        let h2 = times[k + 1] - times[k];
        if !(h1 > 0.0) || (h1 - h2).abs() > 1e-9 * h1 {
            return arg("concavity margin needs a uniform time grid");
        }
        let fp = (f[k + 1] - f[k - 1]) / (2.0 * h1);
        let fpp = (f[k + 1] - 2.0 * f[k] + f[k - 1]) / (h1 * h1);
        out[k] = Some(f[k] * fpp - (1.0 + kappa) * fp * fp);
    }
    Ok(out)
}
