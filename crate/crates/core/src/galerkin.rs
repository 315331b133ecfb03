//! Galerkin discretisation with the iso-geometric G¹ space as a C¹ basis.
//!
//! Integrals are pulled back to parameter space, so no map inversion is
//! needed during assembly. Matrices live in space coordinates:
//! `M = Bᵀ M_net B` where `B` is the orthonormal basis of the space and
//! `M_net` the block-diagonal Bernstein mass matrix of the control nets.
//!
//! Dirichlet data is imposed weakly with symmetric Nitsche terms and
//! penalty weight [`PENALTY`]:
//!
//! ```text
//! A = K + cM − N − Nᵀ + P·G,     N_ij = ∫_Γ ∂ₙb_j b_i,  G_ij = ∫_Γ b_i b_j
//! r = ∫ f b − ∫_Γ g ∂ₙb + P ∫_Γ g b
//! ```
//!
//! which is consistent, so members of the space are recovered exactly.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::isogeo::IsoGeoElement;
use crate::patch::{bernstein_all, TensorPatch};
use crate::space::GSmoothSpace;

/// Weight of the boundary penalty term.
pub const PENALTY: f64 = 1e6;

/// A quadrature or sample point, located both in parameter and physical space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub patch: usize,
    pub param: [f64; 2],
    pub x: [f64; 2],
}

#[derive(Debug, Clone)]
struct InteriorNode {
    point: Point,
    /// Gauss weight times `det Jφ`.
    weight: f64,
    values: Vec<f64>,
    /// Physical gradients of the local Bernstein functions.
    grads: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
struct BoundaryNode {
    point: Point,
    /// Gauss weight times the arc-length factor.
    weight: f64,
    values: Vec<f64>,
    /// Outward normal derivatives of the local Bernstein functions.
    normal_derivs: Vec<f64>,
}

/// Assembled mass and stiffness matrices of a space with geometry.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub space: GSmoothSpace,
    pub quadrature_order: usize,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Right-hand side of the last solve.
    pub load: DVector<f64>,
    /// Boundary Gram matrix `G`.
    pub boundary_mass: DMatrix<f64>,
    /// Boundary flux matrix `N`.
    pub boundary_flux: DMatrix<f64>,
    interior: Vec<InteriorNode>,
    boundary: Vec<BoundaryNode>,
}

fn gauss_rule(order: usize) -> Result<Vec<(f64, f64)>> {
    let n = NonZeroUsize::new(order).ok_or_else(|| Error::Contract("quadrature order must be positive".into()))?;
    let rule = GaussLegendre::new(n);
    // map [-1, 1] to [0, 1]
    Ok(rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect())
}

/// Values and parameter gradients of all `(p+1)(q+1)` Bernstein products.
fn local_basis(p: usize, q: usize, uv: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let (bu, bv) = (bernstein_all(p, uv[0]), bernstein_all(q, uv[1]));
    let deriv = |deg: usize, x: f64| -> Vec<f64> {
        let lower = bernstein_all(deg - 1, x);
        (0..=deg)
            .map(|i| {
                let left = if i > 0 { lower[i - 1] } else { 0.0 };
                let right = if i < deg { lower[i] } else { 0.0 };
                deg as f64 * (left - right)
            })
            .collect()
    };
    let (du, dv) = (deriv(p, uv[0]), deriv(q, uv[1]));
    let mut vals = Vec::with_capacity((p + 1) * (q + 1));
    let mut grads = Vec::with_capacity((p + 1) * (q + 1));
    for i in 0..=p {
        for j in 0..=q {
            vals.push(bu[i] * bv[j]);
            grads.push([du[i] * bv[j], bu[i] * dv[j]]);
        }
    }
    (vals, grads)
}

/// `Jφ⁻ᵀ g` for the row-major Jacobian `j`.
fn physical_gradient(j: &[f64], det: f64, g: [f64; 2]) -> [f64; 2] {
    [(j[3] * g[0] - j[2] * g[1]) / det, (-j[1] * g[0] + j[0] * g[1]) / det]
}

fn jacobian(phi: &TensorPatch, uv: [f64; 2]) -> Result<([f64; 2], Vec<f64>)> {
    let jet = phi.jet_at(uv, 1)?;
    let v = jet.value();
    Ok(([v[0], v[1]], jet.jacobian()))
}

/// Assembles mass and stiffness with a `g × g` Gauss rule per patch.
pub fn assemble(space: &GSmoothSpace, quadrature_order: usize) -> Result<DiscreteProblem> {
    let (p, q) = space.complex.bidegree;
    if quadrature_order < p.max(q) + 1 {
        return Err(Error::Contract(format!(
            "quadrature order {quadrature_order} below bidegree + 1"
        )));
    }
    let geometry = space.geometry()?.to_vec();
    let rule = gauss_rule(quadrature_order)?;
    let npp = space.complex.controls_per_patch();
    let ndof = space.dof_count();

    let mut interior = Vec::with_capacity(geometry.len() * rule.len() * rule.len());
    for (pi, phi) in geometry.iter().enumerate() {
        for &(u, wu) in &rule {
            for &(v, wv) in &rule {
                let uv = [u, v];
                let (x, j) = jacobian(phi, uv)?;
                let det = j[0] * j[3] - j[1] * j[2];
                if !(det > 0.0) {
                    return Err(Error::Fold { patch: pi, min_det: det });
                }
                let (values, pgrads) = local_basis(p, q, uv);
                let grads = pgrads.into_iter().map(|g| physical_gradient(&j, det, g)).collect();
                interior.push(InteriorNode { point: Point { patch: pi, param: uv, x }, weight: wu * wv * det, values, grads });
            }
        }
    }

    let mut boundary = Vec::new();
    for &(pi, edge) in &space.complex.boundary_edges {
        let phi = &geometry[pi];
        for &(s, w) in &rule {
            let uv = edge.point(s);
            let (x, j) = jacobian(phi, uv)?;
            let det = j[0] * j[3] - j[1] * j[2];
            // tangent along the edge parameter and inward parameter direction
            let (tp, ip) = (edge.tangent(), edge.inward());
            let tan = [j[0] * tp[0] + j[1] * tp[1], j[2] * tp[0] + j[3] * tp[1]];
            let inw = [j[0] * ip[0] + j[1] * ip[1], j[2] * ip[0] + j[3] * ip[1]];
            let len = tan[0].hypot(tan[1]);
            let mut nrm = [tan[1] / len, -tan[0] / len];
            if nrm[0] * inw[0] + nrm[1] * inw[1] > 0.0 {
                nrm = [-nrm[0], -nrm[1]];
            }
            let (values, pgrads) = local_basis(p, q, uv);
            let normal_derivs = pgrads
                .into_iter()
                .map(|g| {
                    let pg = physical_gradient(&j, det, g);
                    pg[0] * nrm[0] + pg[1] * nrm[1]
                })
                .collect();
            boundary.push(BoundaryNode { point: Point { patch: pi, param: uv, x }, weight: w * len, values, normal_derivs });
        }
    }

    let mut m_net = DMatrix::zeros(ndof, ndof);
    let mut k_net = DMatrix::zeros(ndof, ndof);
    for node in &interior {
        let off = node.point.patch * npp;
        for a in 0..npp {
            for b in 0..npp {
                m_net[(off + a, off + b)] += node.weight * node.values[a] * node.values[b];
                let (ga, gb) = (node.grads[a], node.grads[b]);
                k_net[(off + a, off + b)] += node.weight * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
        }
    }
    let mut g_net = DMatrix::zeros(ndof, ndof);
    let mut n_net = DMatrix::zeros(ndof, ndof);
    for node in &boundary {
        let off = node.point.patch * npp;
        for a in 0..npp {
            for b in 0..npp {
                g_net[(off + a, off + b)] += node.weight * node.values[a] * node.values[b];
                n_net[(off + a, off + b)] += node.weight * node.values[a] * node.normal_derivs[b];
            }
        }
    }
    let basis = &space.basis;
    let project = |m: &DMatrix<f64>| basis.transpose() * m * basis;
    let dim = space.dimension();
    Ok(DiscreteProblem {
        space: space.clone(),
        quadrature_order,
        mass: project(&m_net),
        stiffness: project(&k_net),
        load: DVector::zeros(dim),
        boundary_mass: project(&g_net),
        boundary_flux: project(&n_net),
        interior,
        boundary,
    })
}

/// Default Gauss order `3·max(p, q) + 1`. The mass integrand has degree
/// `4p − 1` per direction; the stiffness integrand carries `Jφ⁻¹` and is
/// rational, so it needs headroom beyond polynomial exactness.
pub fn default_quadrature(space: &GSmoothSpace) -> usize {
    let (p, q) = space.complex.bidegree;
    3 * p.max(q) + 1
}

impl DiscreteProblem {
    pub fn dimension(&self) -> usize {
        self.mass.nrows()
    }

    /// Area of the physical domain by quadrature of `det Jφ`.
    pub fn area(&self) -> f64 {
        self.interior.iter().map(|n| n.weight).sum()
    }

    /// Interior quadrature points.
    pub fn quadrature_points(&self) -> impl Iterator<Item = &Point> {
        self.interior.iter().map(|n| &n.point)
    }

    /// Boundary quadrature points.
    pub fn boundary_points(&self) -> impl Iterator<Item = &Point> {
        self.boundary.iter().map(|n| &n.point)
    }

    /// Maps a net-level vector to space coordinates (`Bᵀ v`).
    fn reduce(&self, v: DVector<f64>) -> DVector<f64> {
        self.space.basis.transpose() * v
    }

    fn interior_load(&self, mut f: impl FnMut(&Point) -> f64) -> DVector<f64> {
        let npp = self.space.complex.controls_per_patch();
        let mut v = DVector::zeros(self.space.dof_count());
        for node in &self.interior {
            let fx = f(&node.point) * node.weight;
            let off = node.point.patch * npp;
            for (a, b) in node.values.iter().enumerate() {
                v[off + a] += fx * b;
            }
        }
        self.reduce(v)
    }

    /// `−∫ g ∂ₙb + P ∫ g b` over the boundary.
    fn nitsche_load(&self, mut g: impl FnMut(&Point) -> f64) -> DVector<f64> {
        let npp = self.space.complex.controls_per_patch();
        let mut v = DVector::zeros(self.space.dof_count());
        for node in &self.boundary {
            let gx = g(&node.point) * node.weight;
            let off = node.point.patch * npp;
            for a in 0..npp {
                v[off + a] += gx * (PENALTY * node.values[a] - node.normal_derivs[a]);
            }
        }
        self.reduce(v)
    }

    /// L² projection: solves `M c = (∫ target·b_i)_i`.
    pub fn l2_project(&mut self, target: impl FnMut(&Point) -> f64) -> Result<Vec<f64>> {
        self.load = self.interior_load(target);
        let chol = self
            .mass
            .clone()
            .cholesky()
            .ok_or_else(|| Error::LinearAlgebra("mass matrix is not positive definite".into()))?;
        Ok(chol.solve(&self.load).iter().copied().collect())
    }

    fn solve_weak(&mut self, reaction: f64, rhs: impl FnMut(&Point) -> f64, boundary: impl FnMut(&Point) -> f64) -> Result<Vec<f64>> {
        let a = &self.stiffness + reaction * &self.mass - &self.boundary_flux - self.boundary_flux.transpose()
            + PENALTY * &self.boundary_mass;
        self.load = self.interior_load(rhs) + self.nitsche_load(boundary);
        let lu = a.lu();
        let sol = lu
            .solve(&self.load)
            .ok_or_else(|| Error::LinearAlgebra("system matrix is singular".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearAlgebra("solve produced non-finite values".into()));
        }
        Ok(sol.iter().copied().collect())
    }

    /// `−Δu = f` with `u = g` on the boundary.
    pub fn solve_poisson(&mut self, rhs: impl FnMut(&Point) -> f64, boundary: impl FnMut(&Point) -> f64) -> Result<Vec<f64>> {
        self.solve_weak(0.0, rhs, boundary)
    }

    /// `−Δu + u = f` with `u = g` on the boundary.
    pub fn solve_reaction(&mut self, rhs: impl FnMut(&Point) -> f64, boundary: impl FnMut(&Point) -> f64) -> Result<Vec<f64>> {
        self.solve_weak(1.0, rhs, boundary)
    }

    /// Value of the member with coefficients `coeffs` at a point.
    pub fn eval(&self, coeffs: &[f64], point: &Point) -> Result<f64> {
        let fields = self.space.sample_field(coeffs)?;
        Ok(fields[point.patch].eval(point.param)?[0])
    }

    /// `‖u_h − exact‖_{L²}` by interior quadrature.
    pub fn l2_error(&self, coeffs: &[f64], mut exact: impl FnMut(&Point) -> f64) -> Result<f64> {
        let fields = self.space.sample_field(coeffs)?;
        let mut acc = 0.0;
        for node in &self.interior {
            let f = &fields[node.point.patch];
            let npp = node.values.len();
            let c = f.control();
            let uh: f64 = (0..npp).map(|a| c[a] * node.values[a]).sum();
            let d = uh - exact(&node.point);
            acc += node.weight * d * d;
        }
        Ok(acc.sqrt())
    }

    /// Value and physical Laplacian of a member at a parameter point.
    pub fn value_and_laplacian(&self, fields: &[TensorPatch], point: &Point) -> Result<(f64, f64)> {
        let geometry = self.space.geometry()?;
        let el = IsoGeoElement::new(geometry[point.patch].clone(), fields[point.patch].clone(), point.patch)?;
        let jet = el.physical_jet(point.param, 2)?;
        let c = jet.component(0);
        // Taylor coefficients are ∂^α/α!
        Ok((c[0], 2.0 * (c[3] + c[5])))
    }

    /// Source `−Δu* + reaction·u*` for a member `u*`, evaluated at a point.
    pub fn manufactured_source(&self, fields: &[TensorPatch], reaction: f64) -> impl Fn(&Point) -> f64 + '_ {
        let fields = fields.to_vec();
        move |pt: &Point| {
            let (v, lap) = self.value_and_laplacian(&fields, pt).expect("point inside the patch");
            -lap + reaction * v
        }
    }
}

/// Free-function form of [`DiscreteProblem::l2_project`].
pub fn l2_project(problem: &mut DiscreteProblem, target: impl FnMut(&Point) -> f64) -> Result<Vec<f64>> {
    problem.l2_project(target)
}

/// Free-function form of [`DiscreteProblem::solve_poisson`].
pub fn solve_poisson(
    problem: &mut DiscreteProblem,
    rhs: impl FnMut(&Point) -> f64,
    boundary: impl FnMut(&Point) -> f64,
) -> Result<Vec<f64>> {
    problem.solve_poisson(rhs, boundary)
}

/// Free-function form of [`DiscreteProblem::solve_reaction`].
pub fn solve_reaction(
    problem: &mut DiscreteProblem,
    rhs: impl FnMut(&Point) -> f64,
    boundary: impl FnMut(&Point) -> f64,
) -> Result<Vec<f64>> {
    problem.solve_reaction(rhs, boundary)
}

/// Physical points of every patch on a `res × res` parameter grid.
pub fn sample_points(space: &GSmoothSpace, resolution: usize) -> Result<Vec<Point>> {
    if resolution < 2 {
        return Err(Error::Contract("resolution must be at least 2".into()));
    }
    let geometry = space.geometry()?;
    let mut pts = Vec::with_capacity(geometry.len() * resolution * resolution);
    for (pi, phi) in geometry.iter().enumerate() {
        for i in 0..resolution {
            for j in 0..resolution {
                let uv = [i as f64 / (resolution - 1) as f64, j as f64 / (resolution - 1) as f64];
                let x = phi.eval(uv)?;
                pts.push(Point { patch: pi, param: uv, x: [x[0], x[1]] });
            }
        }
    }
    Ok(pts)
}
