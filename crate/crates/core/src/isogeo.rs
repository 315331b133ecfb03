//! Iso-geometric elements `f ∘ φ⁻¹` and verification of their smoothness
//! across patch interfaces.
//!
//! Two independent verifiers are provided. [`lemma_check`] compares the
//! interface k-jets of `f₁ ∘ φ₁⁻¹` and `f₂ ∘ φ₂⁻¹` exactly in parameter
//! space with jet algebra; [`crosscheck_fd`] compares one-sided
//! finite-difference gradients in physical space and looks for the O(h²)
//! decay of a C¹ function.

use crate::error::{Error, Result};
use crate::gluing::{uniform_samples, Reparameterization, SmoothnessReport};
use crate::jet::{Jet, BASE_POINT_TOL};
use crate::patch::{EdgeId, TensorPatch};
use crate::space::GSmoothSpace;

/// Residual at which Newton inversion counts as converged.
pub const INVERSION_TOL: f64 = 1e-12;
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Tolerance of the jet-based check.
pub const LEMMA_TOL: f64 = 1e-8;
/// Accepted band for the step-halving ratio of a C¹ function.
pub const DECAY_BAND: (f64, f64) = (3.0, 5.0);
/// Finite-difference mismatch treated as exact (affine data).
pub const FD_EXACT_TOL: f64 = 1e-10;
/// Side of the seed grid used to start Newton iterations.
pub const SEED_GRID: usize = 20;
/// Edge-parameter range sampled by the finite-difference check.
const FD_RANGE: (f64, f64) = (0.1, 0.9);
const NEWTON_SINGULAR: f64 = 1e-14;

/// Whether `f` and `φ` were drawn from one G^k space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SameSpace,
    Unverified,
}

/// Precomputed grid of patch points used to seed Newton.
#[derive(Debug, Clone)]
pub struct SeedGrid {
    params: Vec<[f64; 2]>,
    points: Vec<[f64; 2]>,
}

impl SeedGrid {
    pub fn new(phi: &TensorPatch) -> Self {
        let mut params = Vec::with_capacity(SEED_GRID * SEED_GRID);
        let mut points = Vec::with_capacity(SEED_GRID * SEED_GRID);
        for i in 0..SEED_GRID {
            for j in 0..SEED_GRID {
                let uv = [i as f64 / (SEED_GRID - 1) as f64, j as f64 / (SEED_GRID - 1) as f64];
                let x = phi.eval_raw(uv);
                params.push(uv);
                points.push([x[0], x[1]]);
            }
        }
        SeedGrid { params, points }
    }

    pub fn nearest(&self, x: [f64; 2]) -> [f64; 2] {
        let mut best = (f64::INFINITY, [0.5, 0.5]);
        for (uv, p) in self.params.iter().zip(&self.points) {
            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
            if d < best.0 {
                best = (d, *uv);
            }
        }
        best.1
    }
}

fn clamp01(u: [f64; 2]) -> [f64; 2] {
    [u[0].clamp(0.0, 1.0), u[1].clamp(0.0, 1.0)]
}

fn residual(phi: &TensorPatch, u: [f64; 2], x: [f64; 2]) -> ([f64; 2], f64) {
    let y = phi.eval_raw(u);
    let r = [y[0] - x[0], y[1] - x[1]];
    (r, r[0].hypot(r[1]))
}

fn newton_step(phi: &TensorPatch, u: [f64; 2], r: [f64; 2]) -> Result<[f64; 2]> {
    let j = phi.jet_at(u, 1)?.jacobian();
    let det = j[0] * j[3] - j[1] * j[2];
    if !(det.abs() > NEWTON_SINGULAR) {
        return Err(Error::Singular { det: det.abs() });
    }
    let du = [(j[3] * r[0] - j[1] * r[1]) / det, (-j[2] * r[0] + j[0] * r[1]) / det];
    Ok(clamp01([u[0] - du[0], u[1] - du[1]]))
}

/// Preimage of `x` under a planar patch by projected Newton iteration.
pub fn invert_map(phi: &TensorPatch, x: [f64; 2], guess: [f64; 2]) -> Result<[f64; 2]> {
    if phi.out_dim() != 2 {
        return Err(Error::Contract("inversion needs a planar patch".into()));
    }
    let mut u = clamp01(guess);
    let mut last = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let (r, res) = residual(phi, u, x);
        last = res;
        if res < INVERSION_TOL {
            // one more step usually lands on rounding level
            if let Ok(next) = newton_step(phi, u, r) {
                if residual(phi, next, x).1 < res {
                    return Ok(next);
                }
            }
            return Ok(u);
        }
        u = newton_step(phi, u, r)?;
    }
    Err(Error::InversionFailed { residual: last })
}

/// A scalar field `f` on one patch together with that patch's geometry `φ`.
#[derive(Debug, Clone)]
pub struct IsoGeoElement {
    pub geometry: TensorPatch,
    pub field: TensorPatch,
    pub patch_index: usize,
    pub provenance: Provenance,
    seeds: SeedGrid,
}

impl IsoGeoElement {
    pub fn new(geometry: TensorPatch, field: TensorPatch, patch_index: usize) -> Result<Self> {
        if geometry.out_dim() != 2 || field.out_dim() != 1 {
            return Err(Error::Contract("element needs planar geometry and a scalar field".into()));
        }
        let seeds = SeedGrid::new(&geometry);
        Ok(IsoGeoElement { geometry, field, patch_index, provenance: Provenance::Unverified, seeds })
    }

    /// One element per patch, with geometry and field both taken from `space`.
    pub fn from_space(space: &GSmoothSpace, field_coeffs: &[f64]) -> Result<Vec<Self>> {
        let geometry = space.geometry()?;
        let fields = space.sample_field(field_coeffs)?;
        geometry
            .iter()
            .zip(fields)
            .enumerate()
            .map(|(i, (g, f))| {
                let mut e = IsoGeoElement::new(g.clone(), f, i)?;
                e.provenance = Provenance::SameSpace;
                Ok(e)
            })
            .collect()
    }

    pub fn with_field(&self, field: TensorPatch) -> Result<Self> {
        if field.out_dim() != 1 {
            return Err(Error::Contract("field must be scalar".into()));
        }
        Ok(IsoGeoElement { field, provenance: Provenance::Unverified, ..self.clone() })
    }

    pub fn with_geometry(&self, geometry: TensorPatch) -> Result<Self> {
        let mut e = IsoGeoElement::new(geometry, self.field.clone(), self.patch_index)?;
        e.provenance = Provenance::Unverified;
        Ok(e)
    }

    pub fn seed(&self, x: [f64; 2]) -> [f64; 2] {
        self.seeds.nearest(x)
    }

    pub fn preimage(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        invert_map(&self.geometry, x, self.seed(x))
    }

    /// `(f ∘ φ⁻¹)(x)`.
    pub fn eval(&self, x: [f64; 2]) -> Result<f64> {
        let u = self.preimage(x)?;
        Ok(self.field.eval_raw(u)[0])
    }

    /// k-jet of `f ∘ φ⁻¹` at `φ(u)`, computed in parameter space.
    pub fn physical_jet(&self, u: [f64; 2], k: usize) -> Result<Jet> {
        let jf = self.field.jet_at(u, k)?;
        let jphi = self.geometry.jet_at(u, k)?;
        jf.compose(&jphi.invert()?)
    }
}

/// Free-function form of [`IsoGeoElement::eval`].
pub fn eval_element(elem: &IsoGeoElement, x: [f64; 2]) -> Result<f64> {
    elem.eval(x)
}

/// Evaluates at `x` using the lowest-indexed element whose patch contains
/// it; points on an interface therefore go to the lower patch index.
pub fn eval_on_elements(elements: &[IsoGeoElement], x: [f64; 2]) -> Result<(usize, f64)> {
    let mut order: Vec<&IsoGeoElement> = elements.iter().collect();
    order.sort_by_key(|e| e.patch_index);
    let mut last = Error::Sampling(format!("point ({}, {}) outside all patch images", x[0], x[1]));
    for e in order {
        match e.eval(x) {
            Ok(v) => return Ok((e.patch_index, v)),
            Err(err) => last = err,
        }
    }
    Err(last)
}

fn jet_mismatch(a: &Jet, b: &Jet) -> Result<f64> {
    let dev = a.base_deviation(b);
    if dev <= BASE_POINT_TOL {
        a.distance(b)
    } else {
        // interface curves themselves disagree
        Ok(dev.max(a.coefficient_gap(b)?))
    }
}

fn abs_det(j: &Jet) -> f64 {
    let m = j.jacobian();
    (m[0] * m[3] - m[1] * m[2]).abs()
}

/// Compares the interface k-jets of `f₁ ∘ φ₁⁻¹` and `f₂ ∘ φ₂⁻¹` at
/// `n_samples` interface points.
pub fn lemma_check(
    elem1: &IsoGeoElement,
    elem2: &IsoGeoElement,
    rho: &Reparameterization,
    k: usize,
    n_samples: usize,
) -> Result<SmoothnessReport> {
    let params = uniform_samples(n_samples);
    let mut mismatch = Vec::with_capacity(params.len());
    let mut min_det = f64::INFINITY;
    // inversion needs the Jacobian even when only values are compared
    let kj = k.max(1);
    for &s in &params {
        let u1 = rho.edge_from.point(s);
        let u2 = rho.map(u1);
        let phi1 = elem1.geometry.jet_at(u1, kj)?;
        let phi2 = elem2.geometry.jet_at(u2, kj)?;
        min_det = min_det.min(abs_det(&phi1)).min(abs_det(&phi2));
        let j1 = elem1.field.jet_at(u1, kj)?.compose(&phi1.invert()?)?.truncate(k);
        let j2 = elem2.field.jet_at(u2, kj)?.compose(&phi2.invert()?)?.truncate(k);
        mismatch.push(jet_mismatch(&j1, &j2)?);
    }
    let mut rep = SmoothnessReport::from_samples(k, params, mismatch, LEMMA_TOL);
    rep.min_abs_det = Some(min_det);
    Ok(rep)
}

/// Compares `j f₁ ∘ (j φ₁)⁻¹` with `(j f₂ ∘ j ρ) ∘ (j φ₁)⁻¹`, i.e. the
/// interface jet of side 1 with the same jet routed through ρ.
pub fn proof_chain_check(
    elem1: &IsoGeoElement,
    elem2: &IsoGeoElement,
    rho: &Reparameterization,
    k: usize,
    n_samples: usize,
) -> Result<SmoothnessReport> {
    let params = uniform_samples(n_samples);
    let mut mismatch = Vec::with_capacity(params.len());
    let kj = k.max(1);
    for &s in &params {
        let u1 = rho.edge_from.point(s);
        let u2 = rho.map(u1);
        let phi1_inv = elem1.geometry.jet_at(u1, kj)?.invert()?;
        let direct = elem1.field.jet_at(u1, kj)?.compose(&phi1_inv)?.truncate(k);
        let routed = elem2
            .field
            .jet_at(u2, kj)?
            .compose(&rho.jet_at(u1, kj)?)?
            .compose(&phi1_inv)?
            .truncate(k);
        mismatch.push(jet_mismatch(&direct, &routed)?);
    }
    Ok(SmoothnessReport::from_samples(k, params, mismatch, LEMMA_TOL))
}

/// Gradient of `f ∘ φ⁻¹` at `φ(u)` from one-sided second-order differences
/// along two physical directions pointing into the patch.
fn one_sided_gradient(elem: &IsoGeoElement, edge: EdgeId, u: [f64; 2], h: f64) -> Result<[f64; 2]> {
    let jphi = elem.geometry.jet_at(u, 1)?;
    let x0 = jphi.value();
    let jac = jphi.jacobian();
    let f0 = elem.field.eval_raw(u)[0];
    let (n, t) = (edge.inward(), edge.tangent());
    let dirs_param = [n, [n[0] + t[0], n[1] + t[1]]];
    let mut rows = [[0.0; 2]; 2];
    let mut rhs = [0.0; 2];
    for (r, pd) in dirs_param.iter().enumerate() {
        let d = [jac[0] * pd[0] + jac[1] * pd[1], jac[2] * pd[0] + jac[3] * pd[1]];
        let mut vals = [0.0; 2];
        for (m, val) in vals.iter_mut().enumerate() {
            let step = (m + 1) as f64 * h;
            let x = [x0[0] + step * d[0], x0[1] + step * d[1]];
            let seed = [u[0] + step * pd[0], u[1] + step * pd[1]];
            let pre = invert_map(&elem.geometry, x, seed).map_err(|e| {
                Error::Sampling(format!(
                    "finite-difference point left patch {} ({e})",
                    elem.patch_index
                ))
            })?;
            *val = elem.field.eval_raw(pre)[0];
        }
        rows[r] = d;
        rhs[r] = (-3.0 * f0 + 4.0 * vals[0] - vals[1]) / (2.0 * h);
    }
    let det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
    if !(det.abs() > NEWTON_SINGULAR) {
        return Err(Error::Singular { det: det.abs() });
    }
    Ok([
        (rhs[0] * rows[1][1] - rows[0][1] * rhs[1]) / det,
        (rows[0][0] * rhs[1] - rows[1][0] * rhs[0]) / det,
    ])
}

fn fd_mismatches(
    elem1: &IsoGeoElement,
    elem2: &IsoGeoElement,
    rho: &Reparameterization,
    params: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    params
        .iter()
        .map(|&s| {
            let u1 = rho.edge_from.point(s);
            let u2 = rho.map(u1);
            let g1 = one_sided_gradient(elem1, rho.edge_from, u1, h)?;
            let g2 = one_sided_gradient(elem2, rho.edge_to, u2, h)?;
            Ok((g1[0] - g2[0]).abs().max((g1[1] - g2[1]).abs()))
        })
        .collect()
}

/// Physical-space gradient comparison across the interface at steps `h`
/// and `h/2`. Passes when the mismatch is exact (below [`FD_EXACT_TOL`]) or
/// decays by a factor inside [`DECAY_BAND`] under step halving.
pub fn crosscheck_fd(
    elem1: &IsoGeoElement,
    elem2: &IsoGeoElement,
    rho: &Reparameterization,
    n_samples: usize,
    h: f64,
) -> Result<SmoothnessReport> {
    if !(h > 0.0) {
        return Err(Error::Contract("finite-difference step must be positive".into()));
    }
    let params: Vec<f64> = uniform_samples(n_samples)
        .into_iter()
        .map(|s| FD_RANGE.0 + (FD_RANGE.1 - FD_RANGE.0) * s)
        .collect();
    let coarse = fd_mismatches(elem1, elem2, rho, &params, h)?;
    let fine = fd_mismatches(elem1, elem2, rho, &params, 0.5 * h)?;
    let mut rep = SmoothnessReport::from_samples(1, params, coarse, FD_EXACT_TOL);
    let fine_max = fine.iter().copied().fold(0.0, f64::max);
    let ratio = if fine_max > 0.0 { rep.max_mismatch / fine_max } else { f64::NAN };
    rep.decay_ratio = Some(ratio);
    rep.pass = rep.max_mismatch < FD_EXACT_TOL || (DECAY_BAND.0..=DECAY_BAND.1).contains(&ratio);
    Ok(rep)
}
