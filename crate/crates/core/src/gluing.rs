//! Reparameterizations across shared edges and G^k jet matching.
//!
//! Two patches `f1`, `f2` join G^k along an edge when, at every point
//! `e1(s)` of `f1`'s edge, the k-jet of `f1` equals the k-jet of `f2 ∘ ρ`.
//! [`check_gk`] measures that directly; [`enforce_gk`] builds an `f1` that
//! satisfies it for a given `f2`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{binomial, Jet, Term};
use crate::patch::{bernstein_all, EdgeId, TensorPatch};

/// Residual a constructed G^k pair must reach.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Default tolerance of the verifier.
pub const VERIFY_TOL: f64 = 1e-8;

/// Change of coordinates from a neighbourhood of `edge_from` on □₁ to a
/// neighbourhood of `edge_to` on □₂.
///
/// In edge-adapted coordinates `(t, s)` (inward normal offset and edge
/// parameter) it reads `ρ(t, s) = (−λ·t, s + β(s)·t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparameterization {
    pub edge_from: EdgeId,
    pub edge_to: EdgeId,
    /// Monomial coefficients of β, lowest degree first (at most 3 entries).
    pub shear_coeffs: Vec<f64>,
    pub normal_scale: f64,
}

impl Reparameterization {
    pub fn new(edge_from: EdgeId, edge_to: EdgeId, shear_coeffs: Vec<f64>, normal_scale: f64) -> Result<Self> {
        if shear_coeffs.len() > 3 {
            return Err(Error::Contract("shear polynomial degree must be at most 2".into()));
        }
        if normal_scale == 0.0 || !normal_scale.is_finite() || shear_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("normal scale must be finite and nonzero; shear finite".into()));
        }
        Ok(Reparameterization { edge_from, edge_to, shear_coeffs, normal_scale })
    }

    /// Symmetric vertex reparameterization for `n` patches around a vertex:
    /// `λ = 1`, `β(s) = 2cos(2π/n)(1 − s)`, glueing `u0` of one patch to `v0`
    /// of the next.
    pub fn standard(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Contract(format!("vertex valence {n} < 3")));
        }
        let c = if n == 4 { 0.0 } else { 2.0 * (2.0 * PI / n as f64).cos() };
        Reparameterization::new(EdgeId::U0, EdgeId::V0, vec![c, -c], 1.0)
    }

    pub fn beta(&self, s: f64) -> f64 {
        self.shear_coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    /// Degree of β after dropping zero leading coefficients (0 for β ≡ 0).
    pub fn shear_degree(&self) -> usize {
        self.shear_coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    pub fn map_local(&self, t: f64, s: f64) -> [f64; 2] {
        [-self.normal_scale * t, s + self.beta(s) * t]
    }

    /// ρ in patch parameters: □₁ coordinates to □₂ coordinates.
    pub fn map(&self, uv: [f64; 2]) -> [f64; 2] {
        let [t, s] = self.edge_from.unchart(uv);
        let [t2, s2] = self.map_local(t, s);
        self.edge_to.chart(t2, s2)
    }

    /// Exact k-jet of ρ (in patch parameters) at `uv`.
    pub fn jet_at(&self, uv: [f64; 2], k: usize) -> Result<Jet> {
        let local = self.edge_from.unchart(uv);
        let mut terms = vec![Term::new(0, -self.normal_scale, &[1, 0]), Term::new(1, 1.0, &[0, 1])];
        for (i, &b) in self.shear_coeffs.iter().enumerate() {
            if b != 0.0 {
                terms.push(Term::new(1, b, &[1, i]));
            }
        }
        let rho_local = Jet::from_terms(2, 2, k, &local, &terms)?;
        let unchart = affine_inverse_jet(self.edge_from, uv, k)?;
        let target = rho_local.value();
        let chart_to = Jet::affine(
            &target,
            &self.edge_to.chart(target[0], target[1]),
            &self.edge_to.chart_jacobian(),
            k,
        )?;
        chart_to.compose(&rho_local.compose(&unchart)?)
    }

    pub fn jacobian_det(&self, uv: [f64; 2]) -> Result<f64> {
        let j = self.jet_at(uv, 1)?.jacobian();
        Ok(j[0] * j[3] - j[1] * j[2])
    }

    /// Largest `|ρ(e₁(s)) − e₂(s)|` over `samples` uniform edge parameters.
    pub fn edge_fixing_deviation(&self, samples: usize) -> f64 {
        uniform_samples(samples)
            .into_iter()
            .map(|s| {
                let a = self.map(self.edge_from.point(s));
                let b = self.edge_to.point(s);
                (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Smallest `|det Jρ|` along the edge.
    pub fn min_edge_det(&self, samples: usize) -> Result<f64> {
        let mut m = f64::INFINITY;
        for s in uniform_samples(samples) {
            m = m.min(self.jacobian_det(self.edge_from.point(s))?.abs());
        }
        Ok(m)
    }

    /// Whether points just inside □₁ land just outside □₂.
    pub fn orientation_ok(&self, samples: usize) -> bool {
        let t = 1e-3;
        uniform_samples(samples).into_iter().all(|s| {
            let [t2, _] = self.map_local(t, s);
            t2 < 0.0
        })
    }
}

fn affine_inverse_jet(edge: EdgeId, uv: [f64; 2], k: usize) -> Result<Jet> {
    let j = edge.chart_jacobian();
    let det = j[0] * j[3] - j[1] * j[2];
    let inv = [j[3] / det, -j[1] / det, -j[2] / det, j[0] / det];
    Jet::affine(&uv, &edge.unchart(uv), &inv, k)
}

/// `n` uniform parameters on `[0, 1]`, endpoints included.
pub fn uniform_samples(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` Chebyshev nodes of the first kind mapped to `(0, 1)`.
pub fn chebyshev_sites(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - ((2 * i + 1) as f64 * PI / (2 * n) as f64).cos()))
        .collect()
}

/// Result of a sampled smoothness check.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessReport {
    pub k: usize,
    pub sample_params: Vec<f64>,
    pub per_sample_mismatch: Vec<f64>,
    pub max_mismatch: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Smallest sampled `|det Jφ|`, for checks that invert geometry.
    pub min_abs_det: Option<f64>,
    /// Ratio of mismatches at steps `h` and `h/2` (finite-difference check).
    pub decay_ratio: Option<f64>,
}

impl SmoothnessReport {
    pub fn from_samples(k: usize, sample_params: Vec<f64>, per_sample_mismatch: Vec<f64>, tolerance: f64) -> Self {
        // NaN counts as failure
        let max_mismatch = per_sample_mismatch
            .iter()
            .fold(0.0f64, |m, &x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) });
        let pass = max_mismatch < tolerance;
        SmoothnessReport {
            k,
            sample_params,
            per_sample_mismatch,
            max_mismatch,
            tolerance,
            pass,
            min_abs_det: None,
            decay_ratio: None,
        }
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "pass"
        } else {
            "fail"
        }
    }

    /// One `s,mismatch` row per sample followed by a `#` summary line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,mismatch\n");
        for (s, m) in self.sample_params.iter().zip(&self.per_sample_mismatch) {
            let _ = writeln!(out, "{s:?},{m:e}");
        }
        let _ = writeln!(out, "# {}", self.summary());
        out
    }

    pub fn summary(&self) -> String {
        let mut line = format!(
            "k={} samples={} max_mismatch={:e} tol={:e} verdict={}",
            self.k,
            self.sample_params.len(),
            self.max_mismatch,
            self.tolerance,
            self.verdict()
        );
        if let Some(d) = self.min_abs_det {
            let _ = write!(line, " min_abs_det={d:e}");
        }
        if let Some(r) = self.decay_ratio {
            let _ = write!(line, " decay_ratio={r:.6}");
        }
        line
    }
}

/// Measures `max_s |j^k f1 − j^k (f2 ∘ ρ)|` at `n_samples` points `e₁(s)`.
pub fn check_gk(
    f1: &TensorPatch,
    f2: &TensorPatch,
    rho: &Reparameterization,
    k: usize,
    n_samples: usize,
    tol: f64,
) -> Result<SmoothnessReport> {
    if f1.out_dim() != f2.out_dim() {
        return Err(Error::Contract(format!(
            "patch dimensions differ: {} vs {}",
            f1.out_dim(),
            f2.out_dim()
        )));
    }
    let params = uniform_samples(n_samples);
    let mut mismatch = Vec::with_capacity(params.len());
    for &s in &params {
        let uv = rho.edge_from.point(s);
        let own = f1.jet_at(uv, k)?;
        let routed = f2.jet_at(rho.map(uv), k)?.compose(&rho.jet_at(uv, k)?)?;
        mismatch.push(own.distance(&routed)?);
    }
    Ok(SmoothnessReport::from_samples(k, params, mismatch, tol))
}

/// Maps local row/column `(j, l)` (row `j` = j-th control row away from
/// `edge`, `l` along it) to net indices `(i_u, i_v)`.
pub fn local_to_net(edge: EdgeId, j: usize, l: usize, p: usize, q: usize) -> (usize, usize) {
    match edge {
        EdgeId::U0 => (j, l),
        EdgeId::U1 => (p - j, l),
        EdgeId::V0 => (l, j),
        EdgeId::V1 => (l, q - j),
    }
}

/// `(cross degree, along degree)` of a patch relative to `edge`.
pub fn local_degrees(edge: EdgeId, p: usize, q: usize) -> (usize, usize) {
    if edge.runs_along_u() {
        (q, p)
    } else {
        (p, q)
    }
}

/// Builds `f1` whose control rows `0..=k` next to `rho.edge_from` make it
/// join `f2` G^k; all other control points are copied from `free_data`.
pub fn enforce_gk(f2: &TensorPatch, rho: &Reparameterization, k: usize, free_data: &TensorPatch) -> Result<TensorPatch> {
    if f2.out_dim() != free_data.out_dim() {
        return Err(Error::Contract("free data and f2 differ in dimension".into()));
    }
    let (p2, q2) = f2.bidegree();
    let required = p2.max(q2) + k * rho.shear_degree();
    let (p1, q1) = free_data.bidegree();
    if p1 < required || q1 < required {
        return Err(Error::Contract(format!(
            "output bidegree ({p1}, {q1}) too low; need at least ({required}, {required})"
        )));
    }
    let edge = rho.edge_from;
    let (deg_t, deg_s) = local_degrees(edge, p1, q1);
    if deg_t < k {
        return Err(Error::Contract(format!("cross degree {deg_t} cannot carry {} rows", k + 1)));
    }
    let d = f2.out_dim();
    let sites = chebyshev_sites(deg_s + 1);

    // rows[j][m] = control row curve L_j evaluated at sites[m]
    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(sites.len()); k + 1];
    for &s in &sites {
        let uv = edge.point(s);
        let chart = Jet::affine(&[0.0, s], &uv, &edge.chart_jacobian(), k)?;
        let routed = f2.jet_at(rho.map(uv), k)?.compose(&rho.jet_at(uv, k)?.compose(&chart)?)?;
        let mut done: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let scale = binomial(deg_t, j) as f64;
            let mut lj: Vec<f64> = (0..d).map(|c| routed.coefficient(c, &[j, 0]) / scale).collect();
            for (i, li) in done.iter().enumerate() {
                let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                let w = sign * binomial(j, i) as f64;
                for c in 0..d {
                    lj[c] -= w * li[c];
                }
            }
            done.push(lj);
        }
        for (j, lj) in done.into_iter().enumerate() {
            rows[j].push(lj);
        }
    }

    let colloc = DMatrix::from_fn(sites.len(), deg_s + 1, |m, l| bernstein_all(deg_s, sites[m])[l]);
    let lu = colloc.lu();
    let mut out = free_data.clone();
    for (j, row) in rows.iter().enumerate() {
        for c in 0..d {
            let rhs = DVector::from_iterator(sites.len(), row.iter().map(|v| v[c]));
            let coeffs = lu
                .solve(&rhs)
                .ok_or_else(|| Error::LinearAlgebra("singular edge interpolation".into()))?;
            for l in 0..=deg_s {
                let (iu, iv) = local_to_net(edge, j, l, p1, q1);
                let mut pt = out.control_point(iu, iv).to_vec();
                pt[c] = coeffs[l];
                out.set_control_point(iu, iv, &pt);
            }
        }
    }
    Ok(out)
}
