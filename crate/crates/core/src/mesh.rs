//! Uniform P1 finite elements on `Ω = (0, L)`.
//!
//! Node 0 sits on the Dirichlet end `x = 0` and is eliminated; the free
//! unknowns are nodes `1..=n`, the last of which is the dynamic boundary
//! point `x = L`. In one dimension every boundary integral over `Γ₁` is a
//! point evaluation with unit measure.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::linalg::SymTridiagonal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialMesh {
    pub length: f64,
    pub n_elems: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl SpatialMesh {
    pub fn uniform(length: f64, n_elems: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return arg(format!("domain length must be positive, got {length}"));
        }
        if n_elems < 2 {
            return arg(format!("need at least 2 elements, got {n_elems}"));
        }
        let h = length / n_elems as f64;
        let mut nodes: Vec<f64> = (0..=n_elems).map(|i| i as f64 * h).collect();
        nodes[n_elems] = length;
        Ok(Self {
            length,
            n_elems,
            h,
            nodes,
        })
    }

    /// Number of unknowns (all nodes but the Dirichlet one).
    pub fn n_free(&self) -> usize {
        self.n_elems
    }

    /// Coordinates of the free nodes, `h, 2h, …, L`.
    pub fn free_nodes(&self) -> &[f64] {
        &self.nodes[1..]
    }

    /// Nodal interpolant of `f` on the free nodes.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.free_nodes().iter().map(|&x| f(x)).collect()
    }

    /// Free-dof vector padded with the pinned zero at `x = 0`.
    pub fn with_dirichlet(&self, u: &[f64]) -> Vec<f64> {
        let mut full = Vec::with_capacity(u.len() + 1);
        full.push(0.0);
        full.extend_from_slice(u);
        full
    }
}

/// Consistent mass and stiffness over the free dofs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembledOperators {
    pub mass: SymTridiagonal,
    pub stiffness: SymTridiagonal,
    /// Measure attached to the node at `x = L`.
    pub boundary_mass: f64,
}

impl AssembledOperators {
    pub fn n(&self) -> usize {
        self.mass.dim()
    }

    /// `M + boundary_mass · e_L e_Lᵀ`, the inertia of the coupled
    /// interior/boundary system.
    pub fn inertia(&self) -> SymTridiagonal {
        let mut a = self.mass.clone();
        let n = a.dim();
        a.diag[n - 1] += self.boundary_mass;
        a
    }

    /// `∫_Ω x y + x(L) y(L)`
    pub fn inertia_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n();
        self.mass.bilinear(x, y) + self.boundary_mass * x[n - 1] * y[n - 1]
    }
}

pub fn build_mesh(length: f64, n_elems: usize) -> Result<SpatialMesh> {
    SpatialMesh::uniform(length, n_elems)
}

/// Assembles the P1 consistent mass and stiffness, restricted to free dofs.
pub fn assemble(mesh: &SpatialMesh) -> AssembledOperators {
    let n = mesh.n_free();
    let h = mesh.h;
    let mut md = vec![4.0 * h / 6.0; n];
    md[n - 1] = 2.0 * h / 6.0;
    let mo = vec![h / 6.0; n - 1];
    let mut kd = vec![2.0 / h; n];
    kd[n - 1] = 1.0 / h;
    let ko = vec![-1.0 / h; n - 1];
    AssembledOperators {
        mass: SymTridiagonal { diag: md, off: mo },
        stiffness: SymTridiagonal { diag: kd, off: ko },
        boundary_mass: 1.0,
    }
}

/// Consistent mass over all nodes, including the Dirichlet one.
pub fn full_mass(mesh: &SpatialMesh) -> SymTridiagonal {
    let n = mesh.n_elems + 1;
    let h = mesh.h;
    let mut d = vec![4.0 * h / 6.0; n];
    d[0] = 2.0 * h / 6.0;
    d[n - 1] = 2.0 * h / 6.0;
    SymTridiagonal {
        diag: d,
        off: vec![h / 6.0; n - 1],
    }
}

fn check_len(ops: &AssembledOperators, u: &[f64]) -> Result<()> {
    if u.len() != ops.n() {
        return arg(format!(
            "vector has {} entries, mesh has {} free dofs",
            u.len(),
            ops.n()
        ));
    }
    Ok(())
}

/// `‖∇u‖₂² = uᵀ K u`
pub fn grad_norm_sq(ops: &AssembledOperators, u: &[f64]) -> Result<f64> {
    check_len(ops, u)?;
    Ok(ops.stiffness.quad_form(u))
}

/// Value at the dynamic boundary node `x = L`.
pub fn boundary_trace(u: &[f64]) -> f64 {
    u.last().copied().unwrap_or(0.0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        w[0] = 2.0;
    }
    (x, w)
}

/// Per-element Gauss rule for integrands built from `|u|^p` on the P1 interpolant.
#[derive(Clone, Debug)]
pub struct ElementQuadrature {
    /// Left/right shape function values at each point.
    shape: Vec<(f64, f64)>,
    /// Weights already scaled by `h/2`.
    weights: Vec<f64>,
}

impl ElementQuadrature {
    /// At least `ceil((p+1)/2)` points, so `|u|^p` is integrated exactly
    /// for even integer `p` on sign-definite elements.
    pub fn for_exponent(mesh: &SpatialMesh, p: f64) -> Self {
        let order = (((p + 1.0) / 2.0).ceil() as usize).clamp(2, 16);
        Self::with_points(mesh, order)
    }

    pub fn with_points(mesh: &SpatialMesh, points: usize) -> Self {
        let (x, w) = gauss_legendre(points);
        Self {
            shape: x
                .iter()
                .map(|&xi| (0.5 * (1.0 - xi), 0.5 * (1.0 + xi)))
                .collect(),
            weights: w.iter().map(|wi| wi * 0.5 * mesh.h).collect(),
        }
    }

    /// `∫_Ω φ(u)` for the P1 interpolant of nodal values `full` (all nodes).
    fn integrate(&self, full: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for e in 0..full.len() - 1 {
            let (ul, ur) = (full[e], full[e + 1]);
            for (&(nl, nr), &w) in self.shape.iter().zip(&self.weights) {
                acc += w * phi(nl * ul + nr * ur);
            }
        }
        acc
    }

    /// `∫_Ω |u|^p` with `u` given on all nodes.
    pub fn lp_pow_nodal(&self, full: &[f64], p: f64) -> f64 {
        self.integrate(full, |v| v.abs().powf(p))
    }

    /// `∫_Ω |u|^p` with `u` on free dofs.
    pub fn lp_pow(&self, u: &[f64], p: f64) -> f64 {
        let mut acc = 0.0;
        let mut left = 0.0;
        for &right in u {
            for (&(nl, nr), &w) in self.shape.iter().zip(&self.weights) {
                acc += w * (nl * left + nr * right).abs().powf(p);
            }
            left = right;
        }
        acc
    }

    /// Consistent load `F_i = ∫_Ω |u|^{p−2} u φ_i` over free dofs.
    pub fn power_load(&self, u: &[f64], p: f64) -> Vec<f64> {
        let n = u.len();
        let mut load = vec![0.0; n];
        let mut left = 0.0;
        for e in 0..n {
            let right = u[e];
            let (mut fl, mut fr) = (0.0, 0.0);
            for (&(nl, nr), &w) in self.shape.iter().zip(&self.weights) {
                let v = nl * left + nr * right;
                let f = w * v.abs().powf(p - 2.0) * v;
                fl += f * nl;
                fr += f * nr;
            }
            // element e spans nodes e and e+1; free dof i is node i+1
            if e > 0 {
                load[e - 1] += fl;
            }
            load[e] += fr;
            left = right;
        }
        load
    }
}

/// `‖u‖_p^p` for `u` on free dofs (the pinned zero at `x = 0` is implied).
pub fn lp_norm_p(mesh: &SpatialMesh, u: &[f64], p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return arg(format!("Lp exponent must be >= 2, got {p}"));
    }
    if u.len() != mesh.n_free() {
        return Err(Error::Argument(format!(
            "vector has {} entries, mesh has {} free dofs",
            u.len(),
            mesh.n_free()
        )));
    }
    Ok(ElementQuadrature::for_exponent(mesh, p).lp_pow(u, p))
}

/// `‖u‖_p^p` for `u` given on every node, boundary condition not enforced.
pub fn lp_norm_p_nodal(mesh: &SpatialMesh, full: &[f64], p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return arg(format!("Lp exponent must be >= 2, got {p}"));
    }
    if full.len() != mesh.n_elems + 1 {
        return arg(format!(
            "expected {} nodal values, got {}",
            mesh.n_elems + 1,
            full.len()
        ));
    }
    Ok(ElementQuadrature::for_exponent(mesh, p).lp_pow_nodal(full, p))
}
