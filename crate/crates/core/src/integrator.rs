//! Time stepping of the semi-discrete system
//!
//! ```text
//! A v̇ + M(t) K u − K q + α M v + β K v + γ|v_L|^{m−2}v_L e_L = F(u),
//! A = M + e_L e_Lᵀ,   q(t) = ∫₀ᵗ g(t−s) u(s) ds.
//! ```
//!
//! Each step is a midpoint rule in `(u, v)`: the Kirchhoff coefficient is
//! `a + b·avg(‖∇u‖²) + σ·Δ‖∇u‖²/(2dt)`, the memory load is averaged between
//! `t_n` and `t_{n+1}`, and boundary damping acts on the midpoint velocity.
//! The source is evaluated at the predictor `u_n + dt/2·v_n`. The unknown
//! `v_{n+1}` solves a nonlinear system handled by damped Newton; its
//! Jacobian is tridiagonal plus a rank-one term from the Kirchhoff
//! coefficient, inverted with Sherman-Morrison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    blowup_f, blowup_parameters, functional_h, measure, BlowupParams, CumulativeIntegrals,
    EnergyLedger, LedgerRecord, Measures,
};
use crate::linalg::{dot, norm_inf, SymTridiagonal};
use crate::memory::History;
use crate::mesh::{assemble, AssembledOperators, ElementQuadrature, SpatialMesh};
use crate::problem::ProblemConfig;

pub const NEWTON_MAX_ITERS: usize = 50;
pub const NEWTON_RTOL: f64 = 1e-12;
/// Abort when the midpoint Kirchhoff coefficient falls to this fraction of `a`.
pub const KIRCHHOFF_GUARD: f64 = 0.01;

/// A validated configuration together with its mesh and operators.
#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ProblemConfig,
    pub mesh: SpatialMesh,
    pub ops: AssembledOperators,
    pub quad: ElementQuadrature,
    pub warnings: Vec<String>,
}

impl Model {
    pub fn new(cfg: ProblemConfig) -> Result<Self> {
        let warnings = cfg.validate()?;
        let mesh = SpatialMesh::uniform(cfg.length, cfg.n_elems)?;
        let ops = assemble(&mesh);
        let quad = ElementQuadrature::for_exponent(&mesh, cfg.p);
        Ok(Self {
            cfg,
            mesh,
            ops,
            quad,
            warnings,
        })
    }

    pub fn initial_data(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((
            self.cfg.u0.sample(&self.mesh)?,
            self.cfg.u1.sample(&self.mesh)?,
        ))
    }

    pub fn new_history(&self) -> Result<History> {
        History::new(
            self.cfg.history_mode(),
            self.cfg.dt,
            &self.cfg.kernel,
            &self.ops,
            self.cfg.snapshot_budget,
        )
    }

    /// Measures of `(u, v)` at `t` against `hist`.
    pub fn measure(&self, t: f64, u: &[f64], v: &[f64], hist: &History) -> Result<Measures> {
        measure(self, t, u, v, hist)
    }
}

/// `M = a + b·uᵀKu + σ·uᵀKv`
pub fn kirchhoff_coeff(ops: &AssembledOperators, u: &[f64], v: &[f64], cfg: &ProblemConfig) -> f64 {
    let ku = ops.stiffness.mul(u);
    cfg.a + cfg.b * dot(u, &ku) + cfg.sigma * dot(&ku, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    BlowupThreshold,
    NumericFailure,
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Memory integral `q(t)`.
    pub q: Vec<f64>,
    pub hist: History,
}

/// Diagnostics of one accepted step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub newton_iters: usize,
    pub residual: f64,
    /// Midpoint Kirchhoff coefficient.
    pub kirchhoff: f64,
}

/// A running simulation: state, running integrals and ledger.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub model: Model,
    pub state: SimState,
    pub ledger: EnergyLedger,
    /// `(u, v)` at every record when `keep_states` is set.
    pub kept_states: Vec<(Vec<f64>, Vec<f64>)>,
    inertia: SymTridiagonal,
    damping: SymTridiagonal,
    cum: CumulativeIntegrals,
    current: Measures,
}

struct Eval {
    r: Vec<f64>,
    norm: f64,
    scale: f64,
    u_new: Vec<f64>,
    u_mid: Vec<f64>,
    v_mid_l: f64,
    s_new: f64,
    c: f64,
    q_new: Vec<f64>,
}

impl Simulation {
    pub fn new(model: Model) -> Result<Self> {
        let (u, v) = model.initial_data()?;
        let mut hist = model.new_history()?;
        hist.push_state(0.0, &u)?;
        let inertia = model.ops.inertia();
        let damping = model
            .ops
            .mass
            .scaled(model.cfg.alpha)
            .add_scaled(model.cfg.beta, &model.ops.stiffness);
        let n = u.len();
        let state = SimState {
            t: 0.0,
            step: 0,
            q: vec![0.0; n],
            u,
            v,
            hist,
        };
        let mut sim = Self {
            current: Measures::default(),
            model,
            state,
            ledger: EnergyLedger::default(),
            kept_states: Vec::new(),
            inertia,
            damping,
            cum: CumulativeIntegrals::default(),
        };
        sim.current = sim
            .model
            .measure(0.0, &sim.state.u, &sim.state.v, &sim.state.hist)?;
        sim.cum.add(&sim.model.cfg, &sim.current);
        sim.record()?;
        Ok(sim)
    }

    pub fn measures(&self) -> &Measures {
        &self.current
    }

    fn record(&mut self) -> Result<()> {
        let s = &self.state;
        let mut r = LedgerRecord::from_measures(&self.model.cfg, &self.current);
        self.cum.write_into(&mut r);
        r.h = functional_h(&self.model, s.t, &s.u, &s.v, &s.hist)?;
        self.ledger.records.push(r);
        if self.model.cfg.keep_states {
            self.kept_states.push((s.u.clone(), s.v.clone()));
        }
        Ok(())
    }

    fn evaluate(&self, w: &[f64], qh: &[f64], f_src: &[f64], g0: f64, av: &[f64]) -> Eval {
        let cfg = &self.model.cfg;
        let k = &self.model.ops.stiffness;
        let s = &self.state;
        let dt = cfg.dt;
        let n = w.len();
        let s_old = self.current.grad_sq;
        let u_new: Vec<f64> = (0..n)
            .map(|i| s.u[i] + 0.5 * dt * (s.v[i] + w[i]))
            .collect();
        let u_mid: Vec<f64> = (0..n).map(|i| 0.5 * (s.u[i] + u_new[i])).collect();
        let v_mid: Vec<f64> = (0..n).map(|i| 0.5 * (s.v[i] + w[i])).collect();
        let s_new = k.quad_form(&u_new);
        let c = cfg.a + 0.5 * cfg.b * (s_old + s_new) + cfg.sigma * (s_new - s_old) / (2.0 * dt);
        let gq = 0.5 * dt * g0;
        let q_new: Vec<f64> = (0..n).map(|i| qh[i] + gq * u_new[i]).collect();
        // c·u_mid − q_mid, then the stiffness acts once
        let elastic_arg: Vec<f64> = (0..n)
            .map(|i| c * u_mid[i] - 0.5 * (s.q[i] + q_new[i]))
            .collect();
        let elastic = k.mul(&elastic_arg);
        let damp = self.damping.mul(&v_mid);
        let aw = self.inertia.mul(w);
        let v_mid_l = v_mid[n - 1];
        let bdry = cfg.gamma * v_mid_l.abs().powf(cfg.m - 2.0) * v_mid_l;
        let mut r = vec![0.0; n];
        for i in 0..n {
            r[i] = aw[i] - av[i] + dt * (elastic[i] + damp[i] - f_src[i]);
        }
        r[n - 1] += dt * bdry;
        let scale = norm_inf(&aw)
            + norm_inf(av)
            + dt * (norm_inf(&elastic) + norm_inf(&damp) + norm_inf(f_src) + bdry.abs());
        Eval {
            norm: norm_inf(&r),
            r,
            scale,
            u_new,
            u_mid,
            v_mid_l,
            s_new,
            c,
            q_new,
        }
    }

    /// Newton correction `J⁻¹ R` at `ev`.
    fn newton_direction(&self, ev: &Eval, g0: f64) -> Result<Vec<f64>> {
        let cfg = &self.model.cfg;
        let k = &self.model.ops.stiffness;
        let dt = cfg.dt;
        let n = ev.r.len();
        let mut t = self
            .inertia
            .add_scaled(0.25 * dt * dt * (ev.c - 0.5 * g0 * dt), k)
            .add_scaled(0.5 * dt, &self.damping);
        if cfg.gamma > 0.0 {
            let slope = if cfg.m == 2.0 {
                1.0
            } else {
                (cfg.m - 1.0) * ev.v_mid_l.abs().powf(cfg.m - 2.0)
            };
            t.diag[n - 1] += 0.5 * dt * cfg.gamma * slope;
        }
        let fac = t.factor()?;
        let z = fac.solve(&ev.r);
        let coef = (0.5 * cfg.b + 0.5 * cfg.sigma / dt) * dt;
        if coef == 0.0 {
            return Ok(z);
        }
        let x: Vec<f64> = k.mul(&ev.u_mid).iter().map(|v| dt * v).collect();
        let y: Vec<f64> = k.mul(&ev.u_new).iter().map(|v| coef * v).collect();
        let tx = fac.solve(&x);
        let denom = 1.0 + dot(&y, &tx);
        if denom.abs() < 1e-14 || !denom.is_finite() {
            return Err(Error::Numeric("singular Newton matrix".into()));
        }
        let proj = dot(&y, &z) / denom;
        Ok(z.iter().zip(&tx).map(|(zi, ti)| zi - proj * ti).collect())
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self) -> Result<StepInfo> {
        let cfg = &self.model.cfg;
        let dt = cfg.dt;
        let n = self.state.u.len();
        let g0 = cfg.kernel.value(0.0);
        let qh = self.state.hist.next_partial()?;
        let f_src = if cfg.source_on {
            let pred: Vec<f64> = (0..n)
                .map(|i| self.state.u[i] + 0.5 * dt * self.state.v[i])
                .collect();
            self.model.quad.power_load(&pred, cfg.p)
        } else {
            vec![0.0; n]
        };
        let av = self.inertia.mul(&self.state.v);

        let mut w = self.state.v.clone();
        let mut ev = self.evaluate(&w, &qh, &f_src, g0, &av);
        let mut iters = 0;
        loop {
            if !ev.norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite residual at t = {}",
                    self.state.t
                )));
            }
            if iters > 0 && ev.norm <= NEWTON_RTOL * ev.scale {
                break;
            }
            if iters == NEWTON_MAX_ITERS {
                return Err(Error::Numeric(format!(
                    "Newton did not converge in {NEWTON_MAX_ITERS} iterations at t = {} (residual {:e}, scale {:e})",
                    self.state.t, ev.norm, ev.scale
                )));
            }
            iters += 1;
            let delta = self.newton_direction(&ev, g0)?;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial: Vec<f64> = w
                    .iter()
                    .zip(&delta)
                    .map(|(wi, di)| wi - lambda * di)
                    .collect();
                let tev = self.evaluate(&trial, &qh, &f_src, g0, &av);
                if tev.norm.is_finite()
                    && (tev.norm <= ev.norm || tev.norm <= NEWTON_RTOL * tev.scale)
                {
                    accepted = Some((trial, tev));
                    break;
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((trial, tev)) => {
                    w = trial;
                    ev = tev;
                }
                None => {
                    return Err(Error::Numeric(format!(
                        "Newton line search stalled at t = {}",
                        self.state.t
                    )))
                }
            }
        }
        if ev.c <= KIRCHHOFF_GUARD * cfg.a {
            return Err(Error::Numeric(format!(
                "Kirchhoff coefficient {} fell below {} a at t = {}",
                ev.c, KIRCHHOFF_GUARD, self.state.t
            )));
        }
        if w.iter().chain(&ev.u_new).any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite state at t = {}",
                self.state.t
            )));
        }

        let step = self.state.step + 1;
        let t = step as f64 * dt;
        self.state.hist.push_state(t, &ev.u_new)?;
        self.state.u = ev.u_new;
        self.state.v = w;
        self.state.q = ev.q_new;
        self.state.t = t;
        self.state.step = step;
        self.current = self
            .model
            .measure(t, &self.state.u, &self.state.v, &self.state.hist)?;
        debug_assert!((self.current.grad_sq - ev.s_new).abs() <= 1e-10 * (1.0 + ev.s_new));
        self.cum.add(&self.model.cfg, &self.current);
        if step.is_multiple_of(self.model.cfg.output_stride) {
            self.record()?;
        }
        Ok(StepInfo {
            newton_iters: iters,
            residual: ev.norm,
            kirchhoff: ev.c,
        })
    }
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub termination: Termination,
    /// Set when the run ended in a numeric failure.
    pub failure: Option<String>,
    pub step_count: usize,
    /// Time of the last accepted step.
    pub t_end: f64,
    pub ledger: EnergyLedger,
    pub blowup_params: BlowupParams,
    /// Horizon `T` used for the `F` column.
    pub f_horizon: f64,
    pub kept_states: Vec<(Vec<f64>, Vec<f64>)>,
    pub history: History,
    pub final_u: Vec<f64>,
    pub final_v: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Integrates `cfg` to its horizon, the blow-up threshold, or a numeric failure.
pub fn run(cfg: &ProblemConfig) -> Result<RunOutput> {
    let model = Model::new(cfg.clone())?;
    let mut sim = Simulation::new(model)?;
    let n_steps = sim.model.cfg.n_steps();
    let mut termination = Termination::Horizon;
    let mut failure = None;
    if !sim.current.grad_sq.is_finite() {
        termination = Termination::NumericFailure;
        failure = Some("non-finite initial data".into());
    }
    while termination == Termination::Horizon && sim.state.step < n_steps {
        match sim.step() {
            Ok(_) => {
                if sim.current.grad_sq > sim.model.cfg.blowup_threshold {
                    termination = Termination::BlowupThreshold;
                }
            }
            Err(Error::Numeric(msg)) => {
                termination = Termination::NumericFailure;
                failure = Some(msg);
            }
            Err(e) => return Err(e),
        }
    }

    let cfg = &sim.model.cfg;
    let first = sim.ledger.records[0].clone();
    let params = blowup_parameters(cfg, &first);
    let f_horizon = sim.state.t.max(params.bound.unwrap_or(0.0));
    let f = blowup_f(&sim.ledger.records, cfg, f_horizon, params.t0, params.b)?;
    for (r, fv) in sim.ledger.records.iter_mut().zip(f) {
        r.f = fv;
    }
    Ok(RunOutput {
        termination,
        failure,
        step_count: sim.state.step,
        t_end: sim.state.t,
        ledger: sim.ledger,
        blowup_params: params,
        f_horizon,
        kept_states: sim.kept_states,
        history: sim.state.hist,
        final_u: sim.state.u,
        final_v: sim.state.v,
        warnings: sim.model.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RelaxationKernel;
    use crate::problem::InitialData;

    #[test]
    fn kirchhoff_examples() {
        let ops = assemble(&SpatialMesh::uniform(1.0, 4).unwrap());
        let zero = vec![0.0; 4];
        let v = vec![1.0, -2.0, 3.0, 0.5];
        let cfg = ProblemConfig {
            a: 1.0,
            b: 2.0,
            sigma: 0.5,
            ..Default::default()
        };
        assert_eq!(kirchhoff_coeff(&ops, &zero, &v, &cfg), 1.0);
        let x = vec![0.25, 0.5, 0.75, 1.0];
        let cfg = ProblemConfig {
            a: 1.0,
            b: 2.0,
            sigma: 0.0,
            ..Default::default()
        };
        assert!((kirchhoff_coeff(&ops, &x, &v, &cfg) - 3.0).abs() < 1e-14);
        // uᵀKv = 0.25 with u = x, v = x/4
        let quarter: Vec<f64> = x.iter().map(|a| a / 4.0).collect();
        let cfg = ProblemConfig {
            a: 1.0,
            b: 0.0,
            sigma: 2.0,
            ..Default::default()
        };
        assert!((kirchhoff_coeff(&ops, &x, &quarter, &cfg) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn zero_data_stays_zero() {
        let cfg = ProblemConfig {
            t_final: 0.1,
            dt: 1e-2,
            n_elems: 8,
            kernel: RelaxationKernel::exponential(0.25, 1.0).unwrap(),
            alpha: 0.1,
            gamma: 0.2,
            sigma: 0.3,
            b: 0.4,
            output_stride: 1,
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.termination, Termination::Horizon);
        assert_eq!(out.ledger.len(), 11);
        assert!(out.final_u.iter().chain(&out.final_v).all(|x| *x == 0.0));
        for r in &out.ledger.records {
            assert_eq!(r.e, 0.0);
            assert_eq!(r.f, 0.0);
        }
    }

    #[test]
    fn linear_case_converges_in_one_iteration() {
        let cfg = ProblemConfig {
            n_elems: 16,
            kernel: RelaxationKernel::exponential(0.25, 1.0).unwrap(),
            alpha: 0.1,
            beta: 0.05,
            gamma: 0.3,
            m: 2.0,
            source_on: false,
            u0: InitialData::expr("sin(pi*x/2)"),
            ..Default::default()
        };
        let mut sim = Simulation::new(Model::new(cfg).unwrap()).unwrap();
        for _ in 0..20 {
            assert_eq!(sim.step().unwrap().newton_iters, 1);
        }
    }

    #[test]
    fn record_count_matches_stride() {
        let cfg = ProblemConfig {
            n_elems: 8,
            t_final: 0.095,
            dt: 1e-3,
            output_stride: 10,
            u0: InitialData::expr("0.1*x"),
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.step_count, 95);
        assert_eq!(out.ledger.len(), 95 / 10 + 1);
    }

    #[test]
    fn deterministic_steps() {
        let cfg = ProblemConfig {
            n_elems: 12,
            t_final: 0.2,
            b: 0.5,
            sigma: 0.2,
            gamma: 0.1,
            m: 3.0,
            kernel: RelaxationKernel::polynomial(0.2, 2.0).unwrap(),
            u0: InitialData::expr("x*(2-x)"),
            u1: InitialData::expr("sin(x)"),
            ..Default::default()
        };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.final_u, b.final_u);
        assert_eq!(a.final_v, b.final_v);
    }
}
