//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscowave_core::analysis::{
    classify_with, detect_blowup, estimate_embedding_constant, fit_decay, AnalysisOptions, Verdict,
};
use viscowave_core::integrator::{run, Model, Termination};
use viscowave_core::kernels::RelaxationKernel;
use viscowave_core::memory::{History, HistoryMode};
use viscowave_core::mesh::{assemble, build_mesh};
use viscowave_core::problem::{HistoryChoice, InitialData, ProblemConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn exp_kernel() -> RelaxationKernel {
    RelaxationKernel::exponential(0.25, 1.0).unwrap()
}

fn poly_kernel() -> RelaxationKernel {
    RelaxationKernel::polynomial(0.25, 2.0).unwrap()
}

fn smooth_data() -> (InitialData, InitialData) {
    (
        InitialData::expr("0.5*sin(pi*x/2)"),
        InitialData::expr("0.2*x"),
    )
}

fn dissipation() -> Outcome {
    let dampings = [
        ("none", 0.0, 0.0, 0.0, 0.0),
        ("alpha", 0.1, 0.0, 0.0, 0.0),
        ("beta", 0.0, 0.05, 0.0, 0.0),
        ("gamma", 0.0, 0.0, 0.2, 0.0),
        ("sigma", 0.0, 0.0, 0.0, 0.1),
        ("all", 0.1, 0.05, 0.2, 0.1),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut slowest = 0.0f64;
    for kernel in [exp_kernel(), poly_kernel()] {
        for (name, alpha, beta, gamma, sigma) in dampings {
            let (u0, u1) = smooth_data();
            let cfg = ProblemConfig {
                n_elems: 128,
                dt: 1e-3,
                t_final: 10.0,
                b: 0.2,
                alpha,
                beta,
                gamma,
                sigma,
                m: if name == "gamma" { 3.0 } else { 2.0 },
                kernel: kernel.clone(),
                u0,
                u1,
                ..Default::default()
            };
            let start = Instant::now();
            let out = run(&cfg).map_err(|e| e.to_string())?;
            let secs = start.elapsed().as_secs_f64();
            slowest = slowest.max(secs);
            if out.termination != Termination::Horizon {
                return Err(format!(
                    "{} / {name}: ended with {:?}",
                    kernel.family_name(),
                    out.termination
                ));
            }
            let e = out.ledger.column(|r| r.e);
            let inc = e
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(inc);
            if inc > 1e-8 {
                return Err(format!(
                    "{} / {name}: E increased by {inc:e}",
                    kernel.family_name()
                ));
            }
            if secs > 60.0 {
                return Err(format!(
                    "{} / {name}: took {secs:.1} s",
                    kernel.family_name()
                ));
            }
        }
    }
    Ok(format!(
        "12 runs, max E increment {worst:.3e}, slowest run {slowest:.1} s"
    ))
}

fn energy_identity() -> Outcome {
    let mut residuals = Vec::new();
    for (dt, stride) in [(4e-3, 10), (2e-3, 20), (1e-3, 40)] {
        let (u0, u1) = smooth_data();
        let cfg = ProblemConfig {
            n_elems: 64,
            dt,
            t_final: 4.0,
            output_stride: stride,
            b: 0.3,
            alpha: 0.1,
            beta: 0.01,
            gamma: 0.2,
            sigma: 0.1,
            kernel: exp_kernel(),
            u0,
            u1,
            ..Default::default()
        };
        let out = run(&cfg).map_err(|e| e.to_string())?;
        let res = out.ledger.energy_residuals(&cfg);
        residuals.push(res.iter().fold(0.0f64, |m, r| m.max(r.abs())));
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let shown: Vec<String> = residuals.iter().map(|r| format!("{r:.3e}")).collect();
    let msg = format!("residuals [{}], ratios {ratios:.3?}", shown.join(", "));
    if ratios.iter().all(|r| *r >= 3.5) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn conservative_limit() -> Outcome {
    let cfg = ProblemConfig {
        n_elems: 128,
        dt: 1e-3,
        t_final: 10.0,
        source_on: false,
        kernel: RelaxationKernel::Zero,
        u0: InitialData::expr("sin(pi*x/2)"),
        ..Default::default()
    };
    let out = run(&cfg).map_err(|e| e.to_string())?;
    let e = out.ledger.column(|r| r.e);
    let drift = e.iter().map(|x| (x - e[0]).abs()).fold(0.0, f64::max) / e[0];
    let msg = format!("relative drift {drift:.3e}");
    if drift < 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn stable_set() -> Outcome {
    let configs = vec![
        ProblemConfig {
            kernel: exp_kernel(),
            u0: InitialData::expr("1e-3*x"),
            ..Default::default()
        },
        ProblemConfig {
            kernel: exp_kernel(),
            b: 0.2,
            u0: InitialData::expr("0.5*sin(pi*x/2)"),
            u1: InitialData::expr("0.2*x"),
            ..Default::default()
        },
        ProblemConfig {
            kernel: RelaxationKernel::polynomial(0.3, 3.0).unwrap(),
            alpha: 0.2,
            u0: InitialData::expr("0.4*x*(2-x)"),
            u1: InitialData::expr("-0.1*sin(pi*x)"),
            ..Default::default()
        },
        ProblemConfig {
            kernel: exp_kernel(),
            p: 6.0,
            sigma: 0.2,
            beta: 0.02,
            u0: InitialData::expr("0.6*sin(pi*x/2)"),
            u1: InitialData::expr("0.3*x"),
            ..Default::default()
        },
        ProblemConfig {
            kernel: RelaxationKernel::exponential(0.5, 2.0).unwrap(),
            gamma: 0.5,
            m: 3.0,
            a: 2.0,
            u0: InitialData::expr("0.5*x"),
            u1: InitialData::expr("0.5*x"),
            ..Default::default()
        },
    ];
    let opts = AnalysisOptions {
        n_samples: 0,
        ..Default::default()
    };
    let mut min_i = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    for (k, base) in configs.into_iter().enumerate() {
        let cfg = ProblemConfig {
            n_elems: 64,
            dt: 2e-3,
            t_final: 5.0,
            ..base
        };
        let model = Model::new(cfg.clone()).map_err(|e| e.to_string())?;
        let c = classify_with(&model, &opts).map_err(|e| e.to_string())?;
        if c.verdict != Verdict::StableSet {
            return Err(format!("config {k} classified {:?}", c.verdict));
        }
        let out = run(&cfg).map_err(|e| e.to_string())?;
        let l = cfg.residual_l();
        let cap = 2.0 * cfg.p / (cfg.p - 2.0) * c.e0;
        for r in &out.ledger.records {
            if r.i.is_nan() || r.i <= 0.0 {
                return Err(format!("config {k}: I = {:e} at t = {}", r.i, r.t));
            }
            if l * r.grad_sq > cap * (1.0 + 1e-6) {
                return Err(format!(
                    "config {k}: l|grad u|^2 = {:e} exceeds {cap:e} at t = {}",
                    l * r.grad_sq,
                    r.t
                ));
            }
            min_i = min_i.min(r.i);
            max_ratio = max_ratio.max(l * r.grad_sq / cap);
        }
    }
    Ok(format!(
        "5 configs, min I {min_i:.3e}, max l|grad u|^2 / bound {max_ratio:.4}"
    ))
}

fn general_decay() -> Outcome {
    let mut parts = Vec::new();
    for (label, kernel, t_final, n) in [
        ("exponential", exp_kernel(), 20.0, 64),
        ("polynomial", poly_kernel(), 40.0, 32),
    ] {
        let mut ks = Vec::new();
        for dt in [4e-3, 2e-3] {
            let (u0, u1) = smooth_data();
            let cfg = ProblemConfig {
                n_elems: n,
                dt,
                t_final,
                output_stride: (0.04 / dt).round() as usize,
                kernel: kernel.clone(),
                u0,
                u1,
                ..Default::default()
            };
            let out = run(&cfg).map_err(|e| e.to_string())?;
            let fit = fit_decay(
                &out.ledger.times(),
                &out.ledger.column(|r| r.e),
                &cfg.rate(),
                0.2 * t_final,
            )
            .map_err(|e| e.to_string())?;
            if !(fit.r_squared > 0.95 && fit.k_fit > 0.0) {
                return Err(format!(
                    "{label} dt={dt}: k = {}, r2 = {}",
                    fit.k_fit, fit.r_squared
                ));
            }
            ks.push((fit.k_fit, fit.r_squared));
        }
        let rel = (ks[0].0 - ks[1].0).abs() / ks[1].0;
        if rel > 0.1 {
            return Err(format!("{label}: k changes by {rel:.3} under dt halving"));
        }
        parts.push(format!(
            "{label} k {:.4} r2 {:.4} dk {rel:.1e}",
            ks[1].0, ks[1].1
        ));
    }
    Ok(parts.join("; "))
}

fn blowup() -> Outcome {
    let mut crossings = Vec::new();
    let mut worst = 0.0f64;
    for (n, dt) in [(16usize, 2e-3), (32, 1e-3), (64, 5e-4)] {
        let cfg = ProblemConfig {
            n_elems: n,
            dt,
            t_final: 5.0,
            output_stride: 1,
            p: 4.0,
            m: 2.0,
            kernel: exp_kernel(),
            u0: InitialData::expr("6*x"),
            u1: InitialData::expr("6*x"),
            ..Default::default()
        };
        let out = run(&cfg).map_err(|e| e.to_string())?;
        if out.ledger.records[0].e >= 0.0 {
            return Err(format!(
                "n={n}: E(0) = {} is not negative",
                out.ledger.records[0].e
            ));
        }
        if out.termination != Termination::BlowupThreshold {
            return Err(format!("n={n}: ended with {:?}", out.termination));
        }
        let s = detect_blowup(
            &out.ledger,
            &cfg,
            out.termination,
            out.t_end,
            &out.blowup_params,
        )
        .map_err(|e| e.to_string())?;
        let bound = s.time_bound.ok_or("no blow-up time bound")?;
        let t_sing = s.t_sing.ok_or("no singularity fit")?;
        if t_sing > 1.1 * bound {
            return Err(format!("n={n}: t_sing {t_sing} > 1.1 x bound {bound}"));
        }
        worst = worst.max(t_sing / bound);
        crossings.push(out.t_end);
    }
    let change = (crossings[1] - crossings[2]).abs() / crossings[2];
    let msg = format!(
        "crossing times {crossings:.4?}, finest change {change:.2e}, max t_sing/bound {worst:.3}"
    );
    if change < 0.2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fast_path() -> Outcome {
    let (u0, u1) = smooth_data();
    let cfg = ProblemConfig {
        n_elems: 16,
        dt: 1e-3,
        t_final: 10.0,
        b: 0.2,
        alpha: 0.05,
        kernel: exp_kernel(),
        history: HistoryChoice::Direct,
        u0,
        u1,
        ..Default::default()
    };
    let out = run(&cfg).map_err(|e| e.to_string())?;
    let traj = &out.history;
    if traj.len() != 10_001 {
        return Err(format!("trajectory has {} states", traj.len()));
    }
    let ops = assemble(&build_mesh(cfg.length, cfg.n_elems).unwrap());
    let mut direct =
        History::new(HistoryMode::Direct, cfg.dt, &cfg.kernel, &ops, usize::MAX).unwrap();
    let mut fast =
        History::new(HistoryMode::FastExponential, cfg.dt, &cfg.kernel, &ops, 0).unwrap();
    let mut worst = 0.0f64;
    for j in 0..traj.len() {
        let t = j as f64 * cfg.dt;
        let u = traj.snapshot(j).unwrap();
        direct.push_state(t, u).unwrap();
        fast.push_state(t, u).unwrap();
        let d = direct.convolved_load(&ops, t).unwrap();
        let f = fast.convolved_load(&ops, t).unwrap();
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            continue;
        }
        let err = d
            .iter()
            .zip(&f)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        worst = worst.max(err);
    }
    let msg = format!("10^4 steps, max relative difference {worst:.3e}");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn embedding_constant() -> Outcome {
    let mesh = build_mesh(1.0, 256).unwrap();
    let ops = assemble(&mesh);
    let est = estimate_embedding_constant(&mesh, &ops, 2.0, 20, 0).map_err(|e| e.to_string())?;
    let err = (est.c_star - 2.0 / std::f64::consts::PI).abs();
    let msg = format!("C* = {:.8}, error {err:.3e}", est.c_star);
    if err < 1e-3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Recomputation from raw nodal vectors, sharing no code with the crate.
mod oracle {
    pub struct Grid {
        pub h: f64,
    }

    impl Grid {
        fn full(u: &[f64]) -> Vec<f64> {
            std::iter::once(0.0).chain(u.iter().copied()).collect()
        }

        pub fn grad_dot(&self, u: &[f64], v: &[f64]) -> f64 {
            let (u, v) = (Self::full(u), Self::full(v));
            (1..u.len())
                .map(|e| (u[e] - u[e - 1]) * (v[e] - v[e - 1]))
                .sum::<f64>()
                / self.h
        }

        pub fn l2_dot(&self, u: &[f64], v: &[f64]) -> f64 {
            let (u, v) = (Self::full(u), Self::full(v));
            (1..u.len())
                .map(|e| {
                    let (a, b, c, d) = (u[e - 1], u[e], v[e - 1], v[e]);
                    self.h / 6.0 * (2.0 * a * c + a * d + b * c + 2.0 * b * d)
                })
                .sum()
        }

        /// `∫|u|^p` by 3-point Gauss per element, exact for `p = 4`.
        pub fn lp(&self, u: &[f64], p: f64) -> f64 {
            let u = Self::full(u);
            let r = (0.6f64).sqrt();
            let pts = [(-r, 5.0 / 9.0), (0.0, 8.0 / 9.0), (r, 5.0 / 9.0)];
            (1..u.len())
                .map(|e| {
                    pts.iter()
                        .map(|(xi, w)| {
                            let val = 0.5 * (1.0 - xi) * u[e - 1] + 0.5 * (1.0 + xi) * u[e];
                            w * 0.5 * self.h * val.abs().powf(p)
                        })
                        .sum::<f64>()
                })
                .sum()
        }
    }
}

fn oracle_recomputation() -> Outcome {
    let g0 = 0.3;
    let nu = 2.5;
    let cfg = ProblemConfig {
        n_elems: 32,
        dt: 2e-3,
        t_final: 2.0,
        output_stride: 5,
        p: 4.0,
        m: 3.0,
        b: 0.4,
        sigma: 0.2,
        alpha: 0.1,
        beta: 0.03,
        gamma: 0.25,
        kernel: RelaxationKernel::polynomial(g0, nu).unwrap(),
        history: HistoryChoice::Direct,
        keep_states: true,
        u0: InitialData::expr("0.7*sin(pi*x/2)"),
        u1: InitialData::expr("0.4*x*(1-x)"),
        ..Default::default()
    };
    let out = run(&cfg).map_err(|e| e.to_string())?;
    let grid = oracle::Grid {
        h: cfg.length / cfg.n_elems as f64,
    };
    let g = |s: f64| g0 * (1.0 + s).powf(-nu);
    let gp = |s: f64| -nu * g0 * (1.0 + s).powf(-nu - 1.0);
    let big_g = |t: f64| g0 / (nu - 1.0) * (1.0 - (1.0 + t).powf(1.0 - nu));
    let first = &out.ledger.records[0];
    let bracket = cfg.alpha * first.u_sq
        + cfg.beta * first.grad_sq
        + cfg.gamma * first.u_bdry_sq
        + 0.5 * cfg.sigma * first.grad_4;
    let bp = out.blowup_params;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut worst_name = "";
    for _ in 0..20 {
        let k = rng.gen_range(1..out.ledger.len());
        let rec = &out.ledger.records[k];
        let (u, v) = &out.kept_states[k];
        let step = k * cfg.output_stride;
        let t = step as f64 * cfg.dt;
        let n = u.len();
        let s = grid.grad_dot(u, u);
        let lp = grid.lp(u, cfg.p);
        let v_sq = grid.l2_dot(v, v);
        let uv = grid.grad_dot(u, v);
        let (mut gc, mut gpc) = (0.0, 0.0);
        let mut rel = vec![0.0; n];
        for j in 0..=step {
            let w = if j == 0 || j == step {
                0.5 * cfg.dt
            } else {
                cfg.dt
            };
            let uj = out.history.snapshot(j).unwrap();
            let d: Vec<f64> = u.iter().zip(uj).map(|(a, b)| a - b).collect();
            let dd = grid.grad_dot(&d, &d);
            let lag = (step - j) as f64 * cfg.dt;
            gc += w * g(lag) * dd;
            gpc += w * gp(lag) * dd;
            for i in 0..n {
                rel[i] += w * g(lag) * d[i];
            }
        }
        let quad = (cfg.a - big_g(t)) * s + gc + 0.5 * cfg.b * s * s;
        let i_val = quad - lp;
        let j_val = 0.5 * quad - lp / cfg.p;
        let e_val = j_val + 0.5 * v_sq + 0.5 * v[n - 1] * v[n - 1];
        let diss = 0.5 * gpc
            - 0.5 * g(t) * s
            - cfg.sigma * uv * uv
            - cfg.alpha * v_sq
            - cfg.beta * grid.grad_dot(v, v)
            - cfg.gamma * v[n - 1].abs().powf(cfg.m);
        let u_sq = grid.l2_dot(u, u);
        let g_val = grid.l2_dot(u, v)
            + u[n - 1] * v[n - 1]
            + 0.5 * cfg.alpha * u_sq
            + 0.5 * cfg.beta * s
            + 0.25 * cfg.sigma * s * s;
        let h_val = -(grid.l2_dot(&rel, v) + rel[n - 1] * v[n - 1]);
        let f_val = u_sq
            + u[n - 1] * u[n - 1]
            + 0.5 * cfg.sigma * rec.cum_grad_4
            + cfg.alpha * rec.cum_u_sq
            + cfg.beta * rec.cum_grad_sq
            + cfg.gamma * rec.cum_u_bdry_sq
            + (out.f_horizon - t) * bracket
            + bp.b * (t + bp.t0) * (t + bp.t0);
        let checks = [
            ("t", rec.t, t),
            ("E", rec.e, e_val),
            ("I", rec.i, i_val),
            ("J", rec.j, j_val),
            ("g_circ", rec.g_circ, gc),
            ("grad_sq", rec.grad_sq, s),
            ("grad_4", rec.grad_4, s * s),
            ("lp", rec.lp, lp),
            ("v_sq", rec.v_sq, v_sq),
            ("v_bdry_sq", rec.v_bdry_sq, v[n - 1] * v[n - 1]),
            ("M_coeff", rec.m_coeff, cfg.a + cfg.b * s + cfg.sigma * uv),
            ("diss_rate", rec.diss_rate, diss),
            ("F", rec.f, f_val),
            ("G", rec.g, g_val),
            ("H", rec.h, h_val),
        ];
        for (name, got, want) in checks {
            let err = (got - want).abs() / want.abs().max(1.0);
            if err > worst {
                worst = err;
                worst_name = name;
            }
        }
    }
    let msg = format!("20 records, worst relative mismatch {worst:.3e} ({worst_name})");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("discrete dissipation", dissipation),
        ("energy identity order 2", energy_identity),
        ("conservative limit", conservative_limit),
        ("stable-set invariance", stable_set),
        ("general decay", general_decay),
        ("finite-time blow-up", blowup),
        ("fast memory equivalence", fast_path),
        ("embedding constant", embedding_constant),
        ("oracle recomputation", oracle_recomputation),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {} {name}: PASS ({msg}) [{secs:.1} s]", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({msg}) [{secs:.1} s]", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
