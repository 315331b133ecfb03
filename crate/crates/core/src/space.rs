//! Patch complexes around an extraordinary vertex and the linear space of
//! G^k-continuous scalar patch tuples on them.
//!
//! The space is the nullspace of the sampled jet-matching constraints of all
//! interior edges. Sites are Chebyshev points, as many as the degree of the
//! constraint polynomials along the edge plus one, so the sampled system is
//! equivalent to the continuous one.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gluing::{chebyshev_sites, check_gk, Reparameterization, VERIFY_TOL};
use crate::patch::{EdgeId, TensorPatch};

/// Relative singular-value cutoff for the nullspace.
pub const RANK_CUTOFF: f64 = 1e-9;
/// Resolution of the per-patch Jacobian audit grid.
pub const AUDIT_GRID: usize = 20;
/// Samples per interior edge used when recording the constraint residual.
const RESIDUAL_SAMPLES: usize = 25;

/// Shared edge between `patch_a` and `patch_b`, with ρ from a to b.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorEdge {
    pub patch_a: usize,
    pub edge_a: EdgeId,
    pub patch_b: usize,
    pub edge_b: EdgeId,
    pub rho: Reparameterization,
}

/// `n` unit squares arranged cyclically around one central vertex.
///
/// Patch `i` has the vertex at its `(0, 0)` corner; its `u0` side is glued
/// to the `v0` side of patch `i + 1 (mod n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchComplex {
    pub n: usize,
    pub bidegree: (usize, usize),
    pub edges: Vec<InteriorEdge>,
    pub boundary_edges: Vec<(usize, EdgeId)>,
    /// One coefficient vector per physical coordinate, relative to the
    /// space basis the geometry was selected from.
    pub geometry_coeffs: Option<Vec<Vec<f64>>>,
    /// Materialized geometry patches φ_i.
    pub geometry: Option<Vec<TensorPatch>>,
}

pub fn build_complex(n: usize, bidegree: (usize, usize)) -> Result<PatchComplex> {
    if n < 3 {
        return Err(Error::Contract(format!("vertex valence {n} < 3")));
    }
    if bidegree.0 < 3 || bidegree.1 < 3 {
        return Err(Error::Contract(format!(
            "bidegree ({}, {}) below (3, 3)",
            bidegree.0, bidegree.1
        )));
    }
    let rho = Reparameterization::standard(n)?;
    let edges = (0..n)
        .map(|i| InteriorEdge {
            patch_a: i,
            edge_a: rho.edge_from,
            patch_b: (i + 1) % n,
            edge_b: rho.edge_to,
            rho: rho.clone(),
        })
        .collect();
    let boundary_edges = (0..n).flat_map(|i| [(i, EdgeId::U1), (i, EdgeId::V1)]).collect();
    Ok(PatchComplex { n, bidegree, edges, boundary_edges, geometry_coeffs: None, geometry: None })
}

impl PatchComplex {
    pub fn controls_per_patch(&self) -> usize {
        (self.bidegree.0 + 1) * (self.bidegree.1 + 1)
    }

    pub fn dof_count(&self) -> usize {
        self.n * self.controls_per_patch()
    }

    pub fn dof(&self, patch: usize, iu: usize, iv: usize) -> usize {
        patch * self.controls_per_patch() + iu * (self.bidegree.1 + 1) + iv
    }

    /// Same complex with patch `i` renamed `(i + shift) mod n`.
    pub fn relabeled(&self, shift: usize) -> PatchComplex {
        let r = |i: usize| (i + shift) % self.n;
        let mut edges: Vec<InteriorEdge> = self
            .edges
            .iter()
            .map(|e| InteriorEdge { patch_a: r(e.patch_a), patch_b: r(e.patch_b), ..e.clone() })
            .collect();
        edges.sort_by_key(|e| e.patch_a);
        let mut boundary_edges: Vec<(usize, EdgeId)> =
            self.boundary_edges.iter().map(|&(p, e)| (r(p), e)).collect();
        boundary_edges.sort();
        PatchComplex { edges, boundary_edges, geometry_coeffs: None, geometry: None, ..self.clone() }
    }

    /// Checks the structural invariants (and G⁰ of the geometry, if set).
    pub fn validate(&self) -> Result<()> {
        let mut incidence = vec![[0usize; 4]; self.n];
        let slot = |e: EdgeId| EdgeId::ALL.iter().position(|&x| x == e).unwrap();
        for e in &self.edges {
            if e.patch_a >= self.n || e.patch_b >= self.n || e.patch_a == e.patch_b {
                return Err(Error::Contract(format!(
                    "interior edge {}-{} has invalid patches",
                    e.patch_a, e.patch_b
                )));
            }
            if e.rho.edge_from != e.edge_a || e.rho.edge_to != e.edge_b {
                return Err(Error::Contract(format!(
                    "interior edge {}-{}: reparameterization sides disagree with the edge record",
                    e.patch_a, e.patch_b
                )));
            }
            incidence[e.patch_a][slot(e.edge_a)] += 1;
            incidence[e.patch_b][slot(e.edge_b)] += 1;
        }
        for &(p, e) in &self.boundary_edges {
            if p >= self.n {
                return Err(Error::Contract(format!("boundary edge on missing patch {p}")));
            }
            incidence[p][slot(e)] += 1;
        }
        for (p, sides) in incidence.iter().enumerate() {
            if sides.iter().any(|&c| c != 1) {
                return Err(Error::Contract(format!(
                    "patch {p}: every side must be exactly one interior or boundary edge"
                )));
            }
        }
        // walking the cycle from patch 0 must visit every patch once
        let mut seen = vec![false; self.n];
        let mut cur = 0;
        for _ in 0..self.n {
            if seen[cur] {
                return Err(Error::Contract("cyclic order around the vertex is inconsistent".into()));
            }
            seen[cur] = true;
            cur = self
                .edges
                .iter()
                .find(|e| e.patch_a == cur)
                .map(|e| e.patch_b)
                .ok_or_else(|| Error::Contract(format!("patch {cur} has no outgoing interior edge")))?;
        }
        if cur != 0 {
            return Err(Error::Contract("cyclic order around the vertex does not close".into()));
        }
        if let Some(geom) = &self.geometry {
            if geom.len() != self.n {
                return Err(Error::Contract("geometry patch count differs from n".into()));
            }
            let dev = self.interface_deviation(geom, 50)?;
            if dev >= 1e-10 {
                return Err(Error::Contract(format!("geometry interfaces deviate by {dev:e}")));
            }
        }
        Ok(())
    }

    /// Largest pointwise gap between the two images of any interface curve.
    pub fn interface_deviation(&self, patches: &[TensorPatch], samples: usize) -> Result<f64> {
        let mut dev = 0.0f64;
        for e in &self.edges {
            for s in crate::gluing::uniform_samples(samples) {
                let a = patches[e.patch_a].edge_trace(e.edge_a, s)?;
                let b = patches[e.patch_b].edge_trace(e.edge_b, s)?;
                for (x, y) in a.iter().zip(&b) {
                    dev = dev.max((x - y).abs());
                }
            }
        }
        Ok(dev)
    }
}

/// Sampled jet-matching constraints, one row per (edge, site, output
/// monomial), one column per scalar control value.
pub fn constraint_matrix(complex: &PatchComplex, k: usize) -> Result<DMatrix<f64>> {
    let (p, q) = complex.bidegree;
    let npp = complex.controls_per_patch();
    let units: Vec<TensorPatch> = (0..npp)
        .map(|idx| {
            let mut net = vec![0.0; npp];
            net[idx] = 1.0;
            TensorPatch::new(p, q, 1, net)
        })
        .collect::<Result<_>>()?;
    let nm = crate::jet::monomial_count(2, k);

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for e in &complex.edges {
        let sites = chebyshev_sites(p.max(q) + k * e.rho.shear_degree() + 1);
        for &s in &sites {
            let uv_a = e.edge_a.point(s);
            let uv_b = e.rho.map(uv_a);
            let rho_jet = e.rho.jet_at(uv_a, k)?;
            let own: Vec<_> = units.iter().map(|u| u.jet_at(uv_a, k)).collect::<Result<_>>()?;
            let routed: Vec<_> = units
                .iter()
                .map(|u| u.jet_at(uv_b, k)?.compose(&rho_jet))
                .collect::<Result<_>>()?;
            for m in 0..nm {
                let mut row = Vec::with_capacity(2 * npp);
                for idx in 0..npp {
                    row.push((e.patch_a * npp + idx, own[idx].coefficients()[m]));
                    row.push((e.patch_b * npp + idx, -routed[idx].coefficients()[m]));
                }
                rows.push(row);
            }
        }
    }
    let mut a = DMatrix::zeros(rows.len(), complex.dof_count());
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            a[(r, c)] += v;
        }
    }
    Ok(a)
}

/// Orthonormal basis of the G^k patch tuples of a complex.
#[derive(Debug, Clone)]
pub struct GSmoothSpace {
    pub complex: PatchComplex,
    pub k: usize,
    /// `dof_count × dimension`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Largest check_gk mismatch over basis vectors and interior edges.
    pub constraint_residual: f64,
    pub singular_values: Vec<f64>,
}

pub fn build_gsmooth_space(complex: &PatchComplex, k: usize) -> Result<GSmoothSpace> {
    if k > 2 {
        return Err(Error::Contract(format!("continuity order {k} > 2 is not supported")));
    }
    complex.validate()?;
    let a = constraint_matrix(complex, k)?;
    let ndof = complex.dof_count();
    // pad to at least square so the SVD returns a full right factor
    let padded = if a.nrows() < ndof {
        let mut m = DMatrix::zeros(ndof, ndof);
        m.view_mut((0, 0), (a.nrows(), ndof)).copy_from(&a);
        m
    } else {
        a
    };
    let svd = padded.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::LinearAlgebra("SVD did not return right singular vectors".into()))?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_CUTOFF * smax;
    let null_rows: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] <= cutoff).collect();
    if null_rows.is_empty() {
        return Err(Error::DegenerateSpace(format!(
            "constraint system of {ndof} unknowns has full rank"
        )));
    }
    let mut basis = DMatrix::zeros(ndof, null_rows.len());
    for (c, &r) in null_rows.iter().enumerate() {
        // fix the sign so the largest entry is positive
        let row = v_t.row(r);
        let (imax, _) = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv + 1e-12 { (i, v.abs()) } else { (bi, bv) });
        let sign = if row[imax] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..ndof {
            basis[(i, c)] = sign * row[i];
        }
    }
    let mut space = GSmoothSpace {
        complex: complex.clone(),
        k,
        basis,
        constraint_residual: 0.0,
        singular_values: sigma,
    };
    let mut residual = 0.0f64;
    for c in 0..space.dimension() {
        let patches = space.patches_from_vector(space.basis.column(c).iter().copied().collect::<Vec<_>>().as_slice())?;
        residual = residual.max(space.max_edge_mismatch(&patches, RESIDUAL_SAMPLES)?);
    }
    space.constraint_residual = residual;
    Ok(space)
}

/// Target for geometry selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    /// Patch `i` approximates the bilinear sector spanned by the rays at
    /// angles `2πi/n` and `2π(i+1)/n`, scaled by `radius`.
    RegularSectors { radius: f64 },
}

impl Default for Layout {
    fn default() -> Self {
        Layout::RegularSectors { radius: 1.0 }
    }
}

/// Result of the numerical injectivity audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectivityAudit {
    pub min_det: f64,
    pub max_det: f64,
}

impl GSmoothSpace {
    pub fn dimension(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dof_count(&self) -> usize {
        self.basis.nrows()
    }

    /// Control-value vector `B·c` of a coefficient vector.
    pub fn member(&self, coeffs: &[f64]) -> Result<DVector<f64>> {
        if coeffs.len() != self.dimension() {
            return Err(Error::Contract(format!(
                "expected {} coefficients, got {}",
                self.dimension(),
                coeffs.len()
            )));
        }
        Ok(&self.basis * DVector::from_column_slice(coeffs))
    }

    /// Coefficients of the orthogonal projection of a control-value vector.
    pub fn coefficients_of(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dof_count() {
            return Err(Error::Contract("control vector has wrong length".into()));
        }
        Ok((self.basis.transpose() * DVector::from_column_slice(values)).iter().copied().collect())
    }

    /// Distance from a control-value vector to the span.
    pub fn projection_residual(&self, values: &[f64]) -> Result<f64> {
        let c = self.coefficients_of(values)?;
        let back = self.member(&c)?;
        Ok(back
            .iter()
            .zip(values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Coefficients representing the constant function 1.
    pub fn constant_coeffs(&self) -> Vec<f64> {
        self.coefficients_of(&vec![1.0; self.dof_count()]).expect("matching length")
    }

    /// Splits a control-value vector into per-patch scalar patches.
    pub fn patches_from_vector(&self, values: &[f64]) -> Result<Vec<TensorPatch>> {
        let (p, q) = self.complex.bidegree;
        let npp = self.complex.controls_per_patch();
        if values.len() != self.dof_count() {
            return Err(Error::Contract("control vector has wrong length".into()));
        }
        (0..self.complex.n)
            .map(|i| TensorPatch::new(p, q, 1, values[i * npp..(i + 1) * npp].to_vec()))
            .collect()
    }

    /// Per-patch scalar patches of the member with the given coefficients.
    pub fn sample_field(&self, coeffs: &[f64]) -> Result<Vec<TensorPatch>> {
        let v = self.member(coeffs)?;
        self.patches_from_vector(v.as_slice())
    }

    /// Largest check_gk mismatch over all interior edges.
    pub fn max_edge_mismatch(&self, patches: &[TensorPatch], samples: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for e in &self.complex.edges {
            let rep = check_gk(&patches[e.patch_a], &patches[e.patch_b], &e.rho, self.k, samples, VERIFY_TOL)?;
            worst = worst.max(rep.max_mismatch);
        }
        Ok(worst)
    }

    /// Selects an injective planar geometry φ from the space by fitting the
    /// layout, audits it, and stores it on the complex.
    pub fn make_geometry(&mut self, layout: Layout) -> Result<InjectivityAudit> {
        if self.dimension() < 3 {
            return Err(Error::Contract(format!(
                "space of dimension {} cannot carry a planar geometry",
                self.dimension()
            )));
        }
        let (p, q) = self.complex.bidegree;
        let n = self.complex.n;
        let Layout::RegularSectors { radius } = layout;
        let ray = |i: usize| {
            let a = 2.0 * PI * (i % n) as f64 / n as f64;
            [radius * a.cos(), radius * a.sin()]
        };
        let mut coords = [Vec::with_capacity(self.dof_count()), Vec::with_capacity(self.dof_count())];
        for i in 0..n {
            let (r0, r1) = (ray(i), ray(i + 1));
            for iu in 0..=p {
                for iv in 0..=q {
                    let (a, b) = (iu as f64 / p as f64, iv as f64 / q as f64);
                    for c in 0..2 {
                        coords[c].push(a * r0[c] + b * r1[c]);
                    }
                }
            }
        }
        let cx = self.coefficients_of(&coords[0])?;
        let cy = self.coefficients_of(&coords[1])?;
        let geometry = self.geometry_from_coeffs(&[cx.clone(), cy.clone()])?;
        let audit = audit_injectivity(&geometry)?;
        self.complex.geometry_coeffs = Some(vec![cx, cy]);
        self.complex.geometry = Some(geometry);
        self.complex.validate()?;
        Ok(audit)
    }

    /// Planar geometry patches for per-coordinate coefficient vectors.
    pub fn geometry_from_coeffs(&self, coeffs: &[Vec<f64>]) -> Result<Vec<TensorPatch>> {
        let comps: Vec<Vec<TensorPatch>> = coeffs.iter().map(|c| self.sample_field(c)).collect::<Result<_>>()?;
        (0..self.complex.n)
            .map(|i| {
                let refs: Vec<&TensorPatch> = comps.iter().map(|c| &c[i]).collect();
                TensorPatch::stack(&refs)
            })
            .collect()
    }

    pub fn geometry(&self) -> Result<&[TensorPatch]> {
        self.complex
            .geometry
            .as_deref()
            .ok_or_else(|| Error::Contract("complex has no geometry".into()))
    }
}

/// Free-function form of [`GSmoothSpace::make_geometry`], returning the
/// complex with its geometry set.
pub fn make_geometry(space: &mut GSmoothSpace, layout: Layout) -> Result<&PatchComplex> {
    space.make_geometry(layout)?;
    Ok(&space.complex)
}

/// Free-function form of [`GSmoothSpace::sample_field`].
pub fn sample_field(space: &GSmoothSpace, coeffs: &[f64]) -> Result<Vec<TensorPatch>> {
    space.sample_field(coeffs)
}

fn grid(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Closed polygon approximating the image of the boundary of □,
/// counterclockwise in parameter space.
fn boundary_polygon(patch: &TensorPatch, per_side: usize) -> Vec<[f64; 2]> {
    let mut poly = Vec::with_capacity(4 * per_side);
    let ts: Vec<f64> = (0..per_side).map(|i| i as f64 / per_side as f64).collect();
    for &t in &ts {
        poly.push([t, 0.0]);
    }
    for &t in &ts {
        poly.push([1.0, t]);
    }
    for &t in &ts {
        poly.push([1.0 - t, 1.0]);
    }
    for &t in &ts {
        poly.push([0.0, 1.0 - t]);
    }
    poly.into_iter()
        .map(|uv| {
            let x = patch.eval_raw(uv);
            [x[0], x[1]]
        })
        .collect()
}

fn inside_polygon(poly: &[[f64; 2]], x: [f64; 2]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let xc = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x[0] < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Numerical injectivity audit of a planar geometry: the Jacobian
/// determinant is positive on an [`AUDIT_GRID`]² grid of every patch, and
/// sampled interiors of distinct patches do not overlap.
pub fn audit_injectivity(geometry: &[TensorPatch]) -> Result<InjectivityAudit> {
    let mut min_det = f64::INFINITY;
    let mut max_det = f64::NEG_INFINITY;
    let g = grid(AUDIT_GRID, 0.0, 1.0);
    for (i, phi) in geometry.iter().enumerate() {
        let mut pmin = f64::INFINITY;
        for &u in &g {
            for &v in &g {
                let det = phi.jacobian_det([u, v])?;
                pmin = pmin.min(det);
                max_det = max_det.max(det);
            }
        }
        if !(pmin > 0.0) {
            return Err(Error::Fold { patch: i, min_det: pmin });
        }
        min_det = min_det.min(pmin);
    }
    let polys: Vec<_> = geometry.iter().map(|p| boundary_polygon(p, 48)).collect();
    let interior = grid(12, 0.04, 0.96);
    for (a, phi) in geometry.iter().enumerate() {
        for &u in &interior {
            for &v in &interior {
                let x = phi.eval_raw([u, v]);
                for (b, poly) in polys.iter().enumerate() {
                    if a != b && inside_polygon(poly, [x[0], x[1]]) {
                        return Err(Error::Overlap { a: a.min(b), b: a.max(b) });
                    }
                }
            }
        }
    }
    Ok(InjectivityAudit { min_det, max_det })
}
