//! Solution history and the Volterra memory terms.
//!
//! All convolutions use the composite trapezoid rule on the step grid
//! `t_j = j·dt`. With snapshots `u_0, …, u_n` the memory integral at `t_n` is
//!
//! ```text
//! q(t_n) = dt·[½ g(t_n) u_0 + Σ_{0<j<n} g(t_n − t_j) u_j + ½ g(0) u_n]
//! ```
//!
//! `Direct` keeps every snapshot. `FastExponential` is restricted to
//! `g(s) = g0·e^{−μs}` and carries the same sums through recurrences, so it
//! stores O(n_dofs) numbers regardless of run length.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::kernels::RelaxationKernel;
use crate::linalg::{dot, SymTridiagonal};
use crate::mesh::AssembledOperators;

pub const DEFAULT_SNAPSHOT_BUDGET: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryMode {
    Direct,
    FastExponential,
}

#[derive(Clone, Debug)]
enum Store {
    Direct {
        /// Row-major, one row of `n_dofs` per snapshot.
        snaps: Vec<f64>,
        /// `uⱼᵀ K uⱼ` for every snapshot.
        energy: Vec<f64>,
        /// `g(k·dt)` and `g'(k·dt)`, grown on demand.
        g_tab: Vec<f64>,
        gp_tab: Vec<f64>,
    },
    Fast {
        g0: f64,
        mu: f64,
        decay: f64,
        /// Trapezoid sum of `g(t − s) u(s)`.
        q: Vec<f64>,
        /// Trapezoid sum of `g(t − s)`.
        mass: f64,
        /// Trapezoid sum of `g(t − s)·u(s)ᵀ K u(s)`.
        r: f64,
        last: Vec<f64>,
        last_energy: f64,
    },
}

/// History of one simulation. See the module docs for the quadrature.
#[derive(Clone, Debug)]
pub struct History {
    mode: HistoryMode,
    dt: f64,
    n_dofs: usize,
    count: usize,
    budget: usize,
    kernel: RelaxationKernel,
    stiffness: SymTridiagonal,
    store: Store,
}

impl History {
    pub fn new(
        mode: HistoryMode,
        dt: f64,
        kernel: &RelaxationKernel,
        ops: &AssembledOperators,
        budget: usize,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return arg(format!("history step must be positive, got {dt}"));
        }
        kernel.validate()?;
        let n_dofs = ops.n();
        let store = match mode {
            HistoryMode::Direct => Store::Direct {
                snaps: Vec::new(),
                energy: Vec::new(),
                g_tab: Vec::new(),
                gp_tab: Vec::new(),
            },
            HistoryMode::FastExponential => match *kernel {
                RelaxationKernel::Exponential { g0, mu } => Store::Fast {
                    g0,
                    mu,
                    decay: (-mu * dt).exp(),
                    q: vec![0.0; n_dofs],
                    mass: 0.0,
                    r: 0.0,
                    last: vec![0.0; n_dofs],
                    last_energy: 0.0,
                },
                _ => {
                    return arg(format!(
                        "fast history requires an exponential kernel, got {}",
                        kernel.family_name()
                    ))
                }
            },
        };
        Ok(Self {
            mode,
            dt,
            n_dofs,
            count: 0,
            budget,
            kernel: kernel.clone(),
            stiffness: ops.stiffness.clone(),
            store,
        })
    }

    /// Fails if storing `snapshots` states would exceed the entry budget.
    pub fn check_budget(
        mode: HistoryMode,
        snapshots: usize,
        n_dofs: usize,
        budget: usize,
    ) -> Result<()> {
        if mode == HistoryMode::Direct && snapshots.saturating_mul(n_dofs) > budget {
            return arg(format!(
                "direct history needs {snapshots} snapshots x {n_dofs} dofs = {} entries, budget is {budget}; \
                 coarsen the mesh, shorten the run, or use the fast history with an exponential kernel",
                snapshots.saturating_mul(n_dofs)
            ));
        }
        Ok(())
    }

    pub fn mode(&self) -> HistoryMode {
        self.mode
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn kernel(&self) -> &RelaxationKernel {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Time of the latest snapshot.
    pub fn latest_time(&self) -> Option<f64> {
        self.count.checked_sub(1).map(|k| k as f64 * self.dt)
    }

    /// Stored snapshot `j` (Direct only).
    pub fn snapshot(&self, j: usize) -> Option<&[f64]> {
        match &self.store {
            Store::Direct { snaps, .. } if j < self.count => {
                Some(&snaps[j * self.n_dofs..(j + 1) * self.n_dofs])
            }
            _ => None,
        }
    }

    fn grid_index(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt).round();
        if k < 0.0 || (t - k * self.dt).abs() > 1e-6 * self.dt {
            return None;
        }
        Some(k as usize)
    }

    /// Appends `u` as the state at `t`, which must be the next grid time.
    pub fn push_state(&mut self, t: f64, u: &[f64]) -> Result<()> {
        if u.len() != self.n_dofs {
            return arg(format!(
                "snapshot has {} entries, expected {}",
                u.len(),
                self.n_dofs
            ));
        }
        if self.grid_index(t) != Some(self.count) {
            return Err(Error::State(format!(
                "push at t={t} but the next grid time is {}",
                self.count as f64 * self.dt
            )));
        }
        let e = self.stiffness.quad_form(u);
        match &mut self.store {
            Store::Direct { snaps, energy, .. } => {
                if (self.count + 1).saturating_mul(self.n_dofs) > self.budget {
                    return Err(Error::State(format!(
                        "snapshot budget of {} entries exhausted",
                        self.budget
                    )));
                }
                snaps.extend_from_slice(u);
                energy.push(e);
            }
            Store::Fast {
                g0,
                decay,
                q,
                mass,
                r,
                last,
                last_energy,
                ..
            } => {
                if self.count > 0 {
                    let w = *g0 * self.dt * 0.5;
                    for ((qi, li), ui) in q.iter_mut().zip(last.iter()).zip(u) {
                        *qi = *decay * *qi + w * (*decay * li + ui);
                    }
                    *mass = *decay * *mass + w * (*decay + 1.0);
                    *r = *decay * *r + w * (*decay * *last_energy + e);
                }
                last.copy_from_slice(u);
                *last_energy = e;
            }
        }
        self.count += 1;
        self.ensure_tables(self.count + 1);
        Ok(())
    }

    fn ensure_tables(&mut self, len: usize) {
        if let Store::Direct { g_tab, gp_tab, .. } = &mut self.store {
            while g_tab.len() < len {
                let s = g_tab.len() as f64 * self.dt;
                g_tab.push(self.kernel.value(s));
                gp_tab.push(self.kernel.derivative_value(s));
            }
        }
    }

    fn index_for(&self, t: f64) -> Result<usize> {
        let k = self
            .grid_index(t)
            .ok_or_else(|| Error::State(format!("t={t} is not on the history grid")))?;
        if k >= self.count {
            return Err(Error::State(format!(
                "history covers {} snapshots, t={t} needs {}",
                self.count,
                k + 1
            )));
        }
        if self.mode == HistoryMode::FastExponential && k + 1 != self.count {
            return Err(Error::State(
                "fast history only evaluates at its latest time".into(),
            ));
        }
        Ok(k)
    }

    /// Trapezoid weight times `dt` for snapshot `j` in an integral ending at `k`.
    #[inline]
    fn weight(&self, j: usize, k: usize) -> f64 {
        if j == 0 || j == k {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// `q(t) ≈ ∫₀ᵗ g(t−s) u(s) ds`.
    pub fn memory_integral(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.index_for(t)?;
        let mut q = vec![0.0; self.n_dofs];
        if k == 0 || self.kernel.is_zero() {
            return Ok(q);
        }
        match &self.store {
            Store::Direct { snaps, g_tab, .. } => {
                for j in 0..=k {
                    let c = self.weight(j, k) * g_tab[k - j];
                    if c != 0.0 {
                        let row = &snaps[j * self.n_dofs..(j + 1) * self.n_dofs];
                        for (qi, ui) in q.iter_mut().zip(row) {
                            *qi += c * ui;
                        }
                    }
                }
            }
            Store::Fast { q: fq, .. } => q.copy_from_slice(fq),
        }
        Ok(q)
    }

    /// Part of `q(t_{n+1})` that does not involve the unknown `u_{n+1}`:
    /// `q(t_{n+1}) = partial + ½·dt·g(0)·u_{n+1}`.
    pub fn next_partial(&self) -> Result<Vec<f64>> {
        let n = self
            .count
            .checked_sub(1)
            .ok_or_else(|| Error::State("history is empty".into()))?;
        let mut out = vec![0.0; self.n_dofs];
        if self.kernel.is_zero() {
            return Ok(out);
        }
        match &self.store {
            Store::Direct { snaps, g_tab, .. } => {
                let k = n + 1;
                for j in 0..=n {
                    let c = self.weight(j, k) * g_tab[k - j];
                    if c != 0.0 {
                        let row = &snaps[j * self.n_dofs..(j + 1) * self.n_dofs];
                        for (oi, ui) in out.iter_mut().zip(row) {
                            *oi += c * ui;
                        }
                    }
                }
            }
            Store::Fast {
                g0, decay, q, last, ..
            } => {
                let w = g0 * self.dt * 0.5 * decay;
                for ((oi, qi), li) in out.iter_mut().zip(q).zip(last) {
                    *oi = decay * qi + w * li;
                }
            }
        }
        Ok(out)
    }

    /// `K q(t)`, the discrete `∫₀ᵗ g(t−s) Δu(s) ds` up to sign convention.
    pub fn convolved_load(&self, ops: &AssembledOperators, t: f64) -> Result<Vec<f64>> {
        Ok(ops.stiffness.mul(&self.memory_integral(t)?))
    }

    /// Trapezoid sums `Σ w·k(t−tⱼ)·‖∇(u_now − uⱼ)‖²` for `k = g` and `k = g'`.
    fn circ_pair(&self, u_now: &[f64], t: f64) -> Result<(f64, f64)> {
        if u_now.len() != self.n_dofs {
            return arg(format!(
                "state has {} entries, expected {}",
                u_now.len(),
                self.n_dofs
            ));
        }
        let k = self.index_for(t)?;
        if k == 0 || self.kernel.is_zero() {
            return Ok((0.0, 0.0));
        }
        let ku = self.stiffness.mul(u_now);
        let s = dot(u_now, &ku);
        match &self.store {
            Store::Direct {
                snaps,
                energy,
                g_tab,
                gp_tab,
            } => {
                let (mut acc, mut accp) = (0.0, 0.0);
                for j in 0..=k {
                    let row = &snaps[j * self.n_dofs..(j + 1) * self.n_dofs];
                    let d = (s - 2.0 * dot(row, &ku) + energy[j]).max(0.0);
                    let w = self.weight(j, k);
                    acc += w * g_tab[k - j] * d;
                    accp += w * gp_tab[k - j] * d;
                }
                Ok((acc, accp))
            }
            Store::Fast { mu, q, mass, r, .. } => {
                let v = (s * mass - 2.0 * dot(&ku, q) + r).max(0.0);
                Ok((v, -mu * v))
            }
        }
    }

    /// `(g∘∇u)(t) = ∫₀ᵗ g(t−s)‖∇u_now − ∇u(s)‖² ds`, always `≥ 0`.
    pub fn g_circ_grad(&self, u_now: &[f64], t: f64) -> Result<f64> {
        Ok(self.circ_pair(u_now, t)?.0)
    }

    /// `(g'∘∇u)(t)`, always `≤ 0` for nonincreasing kernels.
    pub fn g_prime_circ_grad(&self, u_now: &[f64], t: f64) -> Result<f64> {
        Ok(self.circ_pair(u_now, t)?.1)
    }

    /// Both circle functionals in one pass.
    pub fn circ_functionals(&self, u_now: &[f64], t: f64) -> Result<(f64, f64)> {
        self.circ_pair(u_now, t)
    }

    /// `∫₀ᵗ g(t−s)(u_now − u(s)) ds` as a nodal vector.
    pub fn relative_integral(&self, u_now: &[f64], t: f64) -> Result<Vec<f64>> {
        if u_now.len() != self.n_dofs {
            return arg(format!(
                "state has {} entries, expected {}",
                u_now.len(),
                self.n_dofs
            ));
        }
        let k = self.index_for(t)?;
        let q = self.memory_integral(t)?;
        let mass = match &self.store {
            Store::Fast { mass, .. } => *mass,
            Store::Direct { g_tab, .. } => (0..=k).map(|j| self.weight(j, k) * g_tab[k - j]).sum(),
        };
        let mass = if k == 0 { 0.0 } else { mass };
        Ok(u_now.iter().zip(&q).map(|(u, qi)| mass * u - qi).collect())
    }
}
