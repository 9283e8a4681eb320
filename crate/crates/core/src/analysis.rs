//! Regime classification, embedding and depth estimates, decay fits and
//! blow-up detection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::functionals::{
    blowup_f, blowup_time_bound, concavity_margin, functional_e, functional_i, BlowupParams,
    EnergyLedger, LedgerRecord, Measures,
};
use crate::integrator::{Model, Termination};
use crate::kernels::{xi_integral, RateFunction};
use crate::memory::{History, HistoryMode};
use crate::mesh::{AssembledOperators, ElementQuadrature, SpatialMesh};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub eps1: f64,
    pub eps2: f64,
    /// Decay fits start at this fraction of the horizon.
    pub t0_fraction: f64,
    pub n_starts: usize,
    /// Random functions for the sampled embedding cross-check; 0 disables it.
    pub n_samples: usize,
    /// Overrides the estimated depth lower bound `d₁`.
    pub d1: Option<f64>,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            eps1: 0.01,
            eps2: 0.01,
            t0_fraction: 0.2,
            n_starts: 20,
            n_samples: 100_000,
            d1: None,
            seed: 0,
        }
    }
}

/// Maximiser of `‖u‖_p / ‖∇u‖₂` found from one start.
#[derive(Clone, Debug)]
pub struct EmbeddingEstimate {
    pub c_star: f64,
    /// Normalised so that `uᵀKu = 1`; best direction first.
    pub directions: Vec<Vec<f64>>,
    /// Random starting directions, unnormalised.
    pub starts: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn ratio(quad: &ElementQuadrature, ops: &AssembledOperators, u: &[f64], p: f64) -> f64 {
    let s = ops.stiffness.quad_form(u);
    if s <= 0.0 {
        return 0.0;
    }
    quad.lp_pow(u, p).powf(1.0 / p) / s.sqrt()
}

fn random_starts(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        })
        .collect()
}

/// `C* = sup ‖u‖_p/‖∇u‖₂` over the finite element space.
///
/// Each start runs the ascent `u ← K⁻¹ ∇(‖u‖_p^p/p)`, renormalised to
/// `uᵀKu = 1`. For a convex `p`-homogeneous objective this never decreases
/// the ratio, and for `p = 2` it is inverse iteration.
pub fn estimate_embedding_constant(
    mesh: &SpatialMesh,
    ops: &AssembledOperators,
    p: f64,
    n_starts: usize,
    seed: u64,
) -> Result<EmbeddingEstimate> {
    if !(p >= 2.0) {
        return arg(format!("embedding exponent must be >= 2, got {p}"));
    }
    let quad = ElementQuadrature::for_exponent(mesh, p);
    let fac = ops.stiffness.factor()?;
    let n = ops.n();
    let starts = random_starts(n, n_starts.max(1), seed);
    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut iterations = 0;
    for start in &starts {
        let mut u = start.clone();
        normalise(ops, &mut u);
        let mut r = ratio(&quad, ops, &u, p);
        for _ in 0..20_000 {
            iterations += 1;
            let mut next = fac.solve(&quad.power_load(&u, p));
            if !normalise(ops, &mut next) {
                break;
            }
            let r_next = ratio(&quad, ops, &next, p);
            u = next;
            let change = (r_next - r).abs() / r_next.max(f64::MIN_POSITIVE);
            r = r_next;
            if change < 1e-8 {
                // one more sweep past the tolerance keeps the error well below it
                let mut extra = fac.solve(&quad.power_load(&u, p));
                if normalise(ops, &mut extra) {
                    let r_extra = ratio(&quad, ops, &extra, p);
                    if r_extra >= r {
                        u = extra;
                        r = r_extra;
                    }
                }
                break;
            }
        }
        found.push((r, u));
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(EmbeddingEstimate {
        c_star: found[0].0,
        directions: found.into_iter().map(|(_, u)| u).collect(),
        starts,
        iterations,
    })
}

fn normalise(ops: &AssembledOperators, u: &mut [f64]) -> bool {
    let s = ops.stiffness.quad_form(u);
    if !(s > 0.0) || !s.is_finite() {
        return false;
    }
    let inv = 1.0 / s.sqrt();
    u.iter_mut().for_each(|x| *x *= inv);
    true
}

/// Largest `‖u‖_p/‖∇u‖₂` among random nodal vectors, a lower bound on `C*`.
pub fn sampled_embedding_ratio(
    mesh: &SpatialMesh,
    ops: &AssembledOperators,
    p: f64,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let quad = ElementQuadrature::for_exponent(mesh, p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ops.n();
    let mut best = 0.0f64;
    let mut u = vec![0.0; n];
    let x = mesh.free_nodes();
    for k in 0..n_samples {
        match k % 3 {
            0 => u.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0)),
            1 => {
                let mut acc = 0.0;
                for v in u.iter_mut() {
                    acc += rng.gen_range(-1.0..1.0);
                    *v = acc;
                }
            }
            _ => {
                // a few low modes sin((j − ½)πx/L), sharpened by a random power
                let modes = rng.gen_range(1..=6usize);
                let c: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let sharpen = rng.gen_range(1.0..8.0);
                for (v, &xi) in u.iter_mut().zip(x) {
                    let z = xi / mesh.length;
                    let s: f64 = c
                        .iter()
                        .enumerate()
                        .map(|(j, cj)| cj * ((j as f64 + 0.5) * std::f64::consts::PI * z).sin())
                        .sum();
                    *v = s * z.powf(sharpen);
                }
            }
        }
        best = best.max(ratio(&quad, ops, &u, p));
    }
    best
}

/// `sup_{λ≥0} [½aλ²s + ¼bλ⁴s² − λ^p L/p]` for a direction with `s = ‖∇u‖²`,
/// `L = ‖u‖_p^p`; `None` when the supremum is infinite or the direction degenerate.
pub fn directional_depth(a: f64, b: f64, p: f64, s: f64, l: f64) -> Option<f64> {
    if !(s > 0.0) || !(l > 0.0) || !(p > 2.0) {
        return None;
    }
    if b > 0.0 && (p < 4.0 || (p == 4.0 && b * s * s >= l)) {
        return None;
    }
    let phi = |x: f64| 0.5 * a * s * x * x + 0.25 * b * s * s * x.powi(4) - l / p * x.powf(p);
    let dphi = |x: f64| a * s * x + b * s * s * x.powi(3) - l * x.powf(p - 1.0);
    let mut hi = 1.0;
    while dphi(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e150 {
            return None;
        }
    }
    let mut lo = 0.0;
    // the derivative has a single sign change on (0, ∞); narrow by bisection
    // first so golden-section sees a unimodal bracket around the peak
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (lo, hi) = (lo * 0.5, (hi * 2.0).max(lo + f64::EPSILON));
    let x = golden_max(phi, lo, hi, 1e-14);
    Some(phi(x))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rtol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= rtol * (a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Estimate of `d₁`: the minimum over trial directions of `sup_λ J(λu)` at
/// `t = 0`. `None` when no direction has a finite supremum.
pub fn estimate_depth_d1(model: &Model, directions: &[Vec<f64>]) -> Option<f64> {
    let cfg = &model.cfg;
    if !cfg.source_on {
        return None;
    }
    directions
        .iter()
        .filter_map(|u| {
            let s = model.ops.stiffness.quad_form(u);
            let l = model.quad.lp_pow(u, cfg.p);
            directional_depth(cfg.a, cfg.b, cfg.p, s, l)
        })
        .min_by(|a, b| a.total_cmp(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StableSet,
    UnstableNegativeEnergy,
    UnstableSubDepth,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub e0: f64,
    pub i0: f64,
    /// `C*^p/l · (2p/(l(p−2))·E(0))^{(p−2)/2}`; stable-set condition is `< 1`.
    pub stable_set_lhs: f64,
    pub c_star: f64,
    /// Largest ratio among random samples, a lower bound on `c_star`.
    pub c_star_sampled: Option<f64>,
    pub d1_estimate: Option<f64>,
    pub d1_from_config: bool,
    /// `E(0)/d₁`
    pub delta: Option<f64>,
    /// Kernel mass bound for the sub-depth unstable case.
    pub kernel_mass_ok: bool,
    pub kernel_mass_bound: Option<f64>,
    /// `∫u₀u₁ + u₀(L)u₁(L)`
    pub initial_momentum: f64,
    pub l: f64,
    pub notes: Vec<String>,
}

/// Measures `(u₀, u₁)` at `t = 0`.
pub fn initial_measures(model: &Model) -> Result<Measures> {
    let (u0, u1) = model.initial_data()?;
    let mut hist = History::new(
        HistoryMode::Direct,
        model.cfg.dt,
        &model.cfg.kernel,
        &model.ops,
        usize::MAX,
    )?;
    hist.push_state(0.0, &u0)?;
    model.measure(0.0, &u0, &u1, &hist)
}

/// `(p−2)/[a(p−2) + 1/((1−δ̃)²p + 2δ̃(1−δ̃))]` with `δ̃ = max(0, δ)`.
pub fn kernel_mass_bound(a: f64, p: f64, delta: f64) -> f64 {
    let dt = delta.max(0.0);
    let inner = (1.0 - dt) * (1.0 - dt) * p + 2.0 * dt * (1.0 - dt);
    if !(inner > 0.0) {
        return 0.0;
    }
    (p - 2.0) / (a * (p - 2.0) + 1.0 / inner)
}

pub fn classify(model: &Model, consts: &AnalysisConstants) -> Result<Classification> {
    let cfg = &model.cfg;
    let m0 = initial_measures(model)?;
    let e0 = functional_e(cfg, &m0);
    let i0 = functional_i(cfg, &m0);
    let l = cfg.residual_l();
    let p = cfg.p;
    let c_star = consts.embedding.c_star;
    let stable_set_lhs = if l > 0.0 {
        c_star.powf(p) / l * (2.0 * p / (l * (p - 2.0)) * e0.max(0.0)).powf((p - 2.0) / 2.0)
    } else {
        f64::INFINITY
    };
    let d1 = consts.d1;
    let delta = d1.filter(|d| *d > 0.0).map(|d| e0 / d);
    let mass = cfg.kernel.mass();
    let bound = delta.map(|d| kernel_mass_bound(cfg.a, p, d));
    let kernel_mass_ok = bound.map(|b| mass <= b).unwrap_or(false);
    let momentum = m0.uv_inertia;
    let mut notes = Vec::new();

    let verdict = if i0 > 0.0 && stable_set_lhs < 1.0 {
        Verdict::StableSet
    } else if e0 < 0.0 {
        Verdict::UnstableNegativeEnergy
    } else if matches!(d1, Some(d) if e0 < d) && i0 <= 0.0 && kernel_mass_ok && momentum > 0.0 {
        notes.push(format!(
            "sub-depth verdict is conditional on d1 = {:e}; the condition I(0) = 0 is applied as I(0) <= 0",
            d1.unwrap_or(f64::NAN)
        ));
        Verdict::UnstableSubDepth
    } else {
        Verdict::Indeterminate
    };
    if m0.grad_sq == 0.0 && m0.v_sq == 0.0 && m0.v_bdry == 0.0 {
        notes.push(
            "zero initial data: I(0) = 0 degenerately and the zero solution is global".into(),
        );
    }
    if !cfg.source_on {
        notes.push("source off: no finite potential depth".into());
    }
    if cfg.kernel.is_zero() {
        notes.push("zero kernel: memoryless case".into());
    }
    Ok(Classification {
        verdict,
        e0,
        i0,
        stable_set_lhs,
        c_star,
        c_star_sampled: consts.c_star_sampled,
        d1_estimate: d1,
        d1_from_config: consts.d1_from_config,
        delta,
        kernel_mass_ok,
        kernel_mass_bound: bound,
        initial_momentum: momentum,
        l,
        notes,
    })
}

/// Mesh-dependent constants shared by classification and reporting.
#[derive(Clone, Debug)]
pub struct AnalysisConstants {
    pub embedding: EmbeddingEstimate,
    pub c_star_sampled: Option<f64>,
    pub d1: Option<f64>,
    pub d1_from_config: bool,
}

impl AnalysisConstants {
    pub fn new(model: &Model, opts: &AnalysisOptions) -> Result<Self> {
        let embedding = estimate_embedding_constant(
            &model.mesh,
            &model.ops,
            model.cfg.p,
            opts.n_starts,
            opts.seed,
        )?;
        let c_star_sampled = (opts.n_samples > 0).then(|| {
            sampled_embedding_ratio(
                &model.mesh,
                &model.ops,
                model.cfg.p,
                opts.n_samples,
                opts.seed,
            )
        });
        let (d1, from_cfg) = match opts.d1 {
            Some(d) => (Some(d), true),
            None => {
                let mut dirs = embedding.directions.clone();
                dirs.extend(embedding.starts.iter().cloned());
                (estimate_depth_d1(model, &dirs), false)
            }
        };
        Ok(Self {
            embedding,
            c_star_sampled,
            d1,
            d1_from_config: from_cfg,
        })
    }
}

/// Convenience wrapper: estimate constants with `opts`, then classify.
pub fn classify_with(model: &Model, opts: &AnalysisOptions) -> Result<Classification> {
    classify(model, &AnalysisConstants::new(model, opts)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub big_k_fit: f64,
    pub k_fit: f64,
    pub t0: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Time at which a nonpositive energy cut the window short.
    pub truncated_at: Option<f64>,
}

/// Least-squares fit of `ln E(t) = ln K − k ∫_{t0}^t ξ` over records with `t ≥ t0`.
pub fn fit_decay(times: &[f64], energy: &[f64], xi: &RateFunction, t0: f64) -> Result<DecayFit> {
    if times.len() != energy.len() {
        return arg("times and energies differ in length");
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut truncated_at = None;
    for (&t, &e) in times.iter().zip(energy) {
        if t < t0 {
            continue;
        }
        if !(e > 0.0) || !e.is_finite() {
            truncated_at = Some(t);
            break;
        }
        xs.push(xi_integral(xi, t0, t)?);
        ys.push(e.ln());
    }
    if xs.len() < 10 {
        return Err(Error::Fit(format!(
            "{} usable records with t >= {t0} and E > 0; need at least 10",
            xs.len()
        )));
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::Fit("degenerate abscissae in decay fit".into()))?;
    Ok(DecayFit {
        big_k_fit: intercept.exp(),
        k_fit: -slope,
        t0,
        r_squared: r2,
        n_points: xs.len(),
        truncated_at,
    })
}

/// Ordinary least squares `y ≈ intercept + slope·x`; returns `(slope, intercept, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Some((slope, intercept, r2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupSummary {
    pub detected: bool,
    pub message: String,
    pub termination: Termination,
    /// Time at which the run stopped.
    pub t_cross: Option<f64>,
    /// Root of the best linear fit of `‖∇u‖^{−q}` near the end.
    pub t_sing: Option<f64>,
    pub fit_exponent: Option<f64>,
    pub fit_r_squared: Option<f64>,
    pub kappa: f64,
    pub f0: Option<f64>,
    pub fp0: Option<f64>,
    /// `F(0)/(κF'(0))`
    pub time_bound: Option<f64>,
    pub concavity_margin: Vec<Option<f64>>,
}

/// Singularity time from `‖∇u‖^{−q} → 0`, trying `q ∈ {1, 2, 4}`.
/// Returns `(t_sing, q, r²)`.
pub fn fit_singularity(times: &[f64], grad_sq: &[f64]) -> Option<(f64, f64, f64)> {
    let n = times.len();
    let tail = (n / 4).max(5).min(n);
    if tail < 3 {
        return None;
    }
    let ts = &times[n - tail..];
    let gs = &grad_sq[n - tail..];
    if gs.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return None;
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for q in [1.0, 2.0, 4.0] {
        let y: Vec<f64> = gs.iter().map(|g| g.powf(-q / 2.0)).collect();
        if let Some((slope, intercept, r2)) = linear_fit(ts, &y) {
            if slope < 0.0 && best.is_none_or(|b| r2 > b.2) {
                best = Some((-intercept / slope, q, r2));
            }
        }
    }
    best
}

pub fn detect_blowup(
    ledger: &EnergyLedger,
    cfg: &crate::problem::ProblemConfig,
    termination: Termination,
    t_end: f64,
    params: &BlowupParams,
) -> Result<BlowupSummary> {
    let mut s = BlowupSummary {
        detected: false,
        message: "no blow-up detected".into(),
        termination,
        t_cross: None,
        t_sing: None,
        fit_exponent: None,
        fit_r_squared: None,
        kappa: params.kappa,
        f0: None,
        fp0: None,
        time_bound: None,
        concavity_margin: Vec::new(),
    };
    let first: &LedgerRecord = match ledger.records.first() {
        Some(r) => r,
        None => return Ok(s),
    };
    if let Some(bound) = params.bound {
        let f0 = blowup_f(std::slice::from_ref(first), cfg, bound, params.t0, params.b)?[0];
        let fp0 = 2.0 * first.uv_inertia + 2.0 * params.b * params.t0;
        s.f0 = Some(f0);
        s.fp0 = Some(fp0);
        s.time_bound = blowup_time_bound(f0, fp0, params.kappa).ok();
    }
    if termination == Termination::Horizon {
        return Ok(s);
    }
    s.detected = true;
    s.t_cross = Some(t_end);
    s.message = match termination {
        Termination::BlowupThreshold => format!(
            "gradient norm crossed the threshold {:e} at t = {t_end}",
            cfg.blowup_threshold
        ),
        _ => format!("numeric failure at t = {t_end}"),
    };
    let times = ledger.times();
    let grad = ledger.column(|r| r.grad_sq);
    if let Some((ts, q, r2)) = fit_singularity(&times, &grad) {
        s.t_sing = Some(ts);
        s.fit_exponent = Some(q);
        s.fit_r_squared = Some(r2);
    }
    let f = ledger.column(|r| r.f);
    if f.iter().all(|x| x.is_finite()) {
        s.concavity_margin = concavity_margin(&times, &f, params.kappa)?;
    }
    Ok(s)
}

/// Band `α₁ ≤ E/L ≤ α₂` over records with `L > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovBand {
    pub eps1: f64,
    pub eps2: f64,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

pub fn lyapunov_band(ledger: &EnergyLedger, eps1: f64, eps2: f64) -> LyapunovBand {
    let ratios: Vec<f64> = ledger
        .records
        .iter()
        .filter_map(|r| {
            let l = crate::functionals::lyapunov_l(r.e, r.g, r.h, eps1, eps2);
            (l > 0.0 && r.e.is_finite()).then(|| r.e / l)
        })
        .collect();
    LyapunovBand {
        eps1,
        eps2,
        alpha1: ratios.iter().cloned().reduce(f64::min),
        alpha2: ratios.iter().cloned().reduce(f64::max),
    }
}

/// `λ₁` of `K x = λ M x`, the first eigenvalue of `−Δ` with the mixed boundary conditions.
pub fn first_eigenvalue(ops: &AssembledOperators) -> Result<f64> {
    let fac = ops.stiffness.factor()?;
    let mut x = vec![1.0; ops.n()];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let y = fac.solve(&ops.mass.mul(&x));
        let norm = ops.mass.quad_form(&y).sqrt();
        let next: Vec<f64> = y.iter().map(|v| v / norm).collect();
        let l_new = ops.stiffness.quad_form(&next) / ops.mass.quad_form(&next);
        x = next;
        if (l_new - lambda).abs() <= 1e-14 * l_new {
            lambda = l_new;
            break;
        }
        lambda = l_new;
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble, build_mesh};

    #[test]
    fn depth_closed_form_without_b() {
        for (a, p, s, l) in [
            (1.0, 4.0, 1.0, 0.2),
            (2.0, 6.0, 0.5, 0.3),
            (0.7, 3.0, 2.0, 1.1),
        ] {
            let got = directional_depth(a, 0.0, p, s, l).unwrap();
            let exact = (0.5 - 1.0 / p) * (a * s).powf(p / (p - 2.0)) / l.powf(2.0 / (p - 2.0));
            assert!((got - exact).abs() <= 1e-8 * exact, "{got} {exact}");
        }
    }

    #[test]
    fn depth_is_scale_invariant() {
        let mesh = build_mesh(1.0, 16).unwrap();
        let quad = ElementQuadrature::for_exponent(&mesh, 5.0);
        let ops = assemble(&mesh);
        let u: Vec<f64> = mesh.free_nodes().iter().map(|x| x * (1.5 - x)).collect();
        let u3: Vec<f64> = u.iter().map(|x| 3.0 * x).collect();
        let d = |v: &[f64]| {
            directional_depth(
                1.0,
                0.3,
                5.0,
                ops.stiffness.quad_form(v),
                quad.lp_pow(v, 5.0),
            )
            .unwrap()
        };
        assert!((d(&u) - d(&u3)).abs() <= 1e-10 * d(&u));
    }

    #[test]
    fn depth_infinite_cases() {
        assert!(directional_depth(1.0, 1.0, 3.0, 1.0, 1.0).is_none());
        assert!(directional_depth(1.0, 1.0, 4.0, 1.0, 1.0).is_none());
        assert!(directional_depth(1.0, 1.0, 4.0, 1.0, 2.0).is_some());
        assert!(directional_depth(1.0, 0.0, 4.0, 1.0, 0.0).is_none());
    }

    #[test]
    fn p2_embedding_constant() {
        let mesh = build_mesh(1.0, 64).unwrap();
        let ops = assemble(&mesh);
        let est = estimate_embedding_constant(&mesh, &ops, 2.0, 4, 7).unwrap();
        assert!((est.c_star - 2.0 / std::f64::consts::PI).abs() < 1e-3);
        assert!(est.c_star <= 2.0 / std::f64::consts::PI);
    }

    #[test]
    fn first_eigenvalue_close_to_quarter_pi_squared() {
        let ops = assemble(&build_mesh(1.0, 128).unwrap());
        let l = first_eigenvalue(&ops).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 4.0;
        assert!((l - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn decay_fit_synthetic_exponential() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|x| 3.0 * (-2.0 * x).exp()).collect();
        let fit = fit_decay(&t, &e, &RateFunction::Constant { c: 1.0 }, 0.0).unwrap();
        assert!((fit.big_k_fit - 3.0).abs() < 1e-6);
        assert!((fit.k_fit - 2.0).abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-10);
    }

    #[test]
    fn decay_fit_synthetic_polynomial() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.3).collect();
        let e: Vec<f64> = t.iter().map(|x| (1.0 + x).powi(-3)).collect();
        let fit = fit_decay(&t, &e, &RateFunction::Hyperbolic { nu: 1.0 }, 0.0).unwrap();
        assert!((fit.k_fit - 3.0).abs() < 1e-6);
        assert!((fit.big_k_fit - 1.0).abs() < 1e-6);
    }

    #[test]
    fn decay_fit_window_rules() {
        let t: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let e = vec![1.0; 9];
        assert!(matches!(
            fit_decay(&t, &e, &RateFunction::Constant { c: 1.0 }, 0.0),
            Err(Error::Fit(_))
        ));
        let t: Vec<f64> = (0..30).map(|k| k as f64).collect();
        let mut e: Vec<f64> = t.iter().map(|x| (-x / 10.0).exp()).collect();
        e[20] = -1.0;
        let fit = fit_decay(&t, &e, &RateFunction::Constant { c: 1.0 }, 0.0).unwrap();
        assert_eq!(fit.n_points, 20);
        assert_eq!(fit.truncated_at, Some(20.0));
    }

    #[test]
    fn singularity_fit_on_reciprocal_data() {
        let t: Vec<f64> = (0..=99).map(|k| k as f64 * 0.01).collect();
        let g: Vec<f64> = t.iter().map(|x| 1.0 / (1.0 - x)).collect();
        let (ts, q, _) = fit_singularity(&t, &g).unwrap();
        assert!((ts - 1.0).abs() < 1e-3);
        assert_eq!(q, 2.0);
    }

    #[test]
    fn mass_bound_formula() {
        // δ̃ = 0: (p−2)/(a(p−2) + 1/p)
        assert!((kernel_mass_bound(1.0, 4.0, -3.0) - 2.0 / 2.25).abs() < 1e-15);
        assert_eq!(kernel_mass_bound(1.0, 4.0, 1.0), 0.0);
    }
}
