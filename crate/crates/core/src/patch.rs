//! Tensor-product Bézier patches over the unit square.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{binomial, multi_indices, Jet, MAX_ORDER};

/// Parameters may overshoot the unit square by this much (rounding from
/// chart maps) before evaluation is refused.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// One side of the unit square.
///
/// Each side is parameterized linearly by `s ∈ [0, 1]`, increasing along
/// the free coordinate: `U0(s) = (0, s)`, `U1(s) = (1, s)`, `V0(s) = (s, 0)`,
/// `V1(s) = (s, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeId {
    U0,
    U1,
    V0,
    V1,
}

impl EdgeId {
    pub const ALL: [EdgeId; 4] = [EdgeId::U0, EdgeId::U1, EdgeId::V0, EdgeId::V1];

    pub fn name(self) -> &'static str {
        match self {
            EdgeId::U0 => "u0",
            EdgeId::U1 => "u1",
            EdgeId::V0 => "v0",
            EdgeId::V1 => "v1",
        }
    }

    pub fn parse(s: &str) -> Option<EdgeId> {
        EdgeId::ALL.into_iter().find(|e| e.name() == s)
    }

    /// `e(s)` in patch parameters.
    pub fn point(self, s: f64) -> [f64; 2] {
        self.chart(0.0, s)
    }

    /// Edge-adapted chart: `t` is the inward normal offset, `s` the edge
    /// parameter.
    pub fn chart(self, t: f64, s: f64) -> [f64; 2] {
        match self {
            EdgeId::U0 => [t, s],
            EdgeId::U1 => [1.0 - t, s],
            EdgeId::V0 => [s, t],
            EdgeId::V1 => [s, 1.0 - t],
        }
    }

    /// Inverse of [`EdgeId::chart`].
    pub fn unchart(self, uv: [f64; 2]) -> [f64; 2] {
        match self {
            EdgeId::U0 => [uv[0], uv[1]],
            EdgeId::U1 => [1.0 - uv[0], uv[1]],
            EdgeId::V0 => [uv[1], uv[0]],
            EdgeId::V1 => [1.0 - uv[1], uv[0]],
        }
    }

    /// Row-major Jacobian of `(t, s) ↦ (u, v)`.
    pub fn chart_jacobian(self) -> [f64; 4] {
        match self {
            EdgeId::U0 => [1.0, 0.0, 0.0, 1.0],
            EdgeId::U1 => [-1.0, 0.0, 0.0, 1.0],
            EdgeId::V0 => [0.0, 1.0, 1.0, 0.0],
            EdgeId::V1 => [0.0, 1.0, -1.0, 0.0],
        }
    }

    /// Unit inward normal in parameter space.
    pub fn inward(self) -> [f64; 2] {
        let j = self.chart_jacobian();
        [j[0], j[2]]
    }

    /// Unit tangent `de/ds` in parameter space.
    pub fn tangent(self) -> [f64; 2] {
        let j = self.chart_jacobian();
        [j[1], j[3]]
    }

    /// True when the edge runs along `u` (so the cross direction is `v`).
    pub fn runs_along_u(self) -> bool {
        matches!(self, EdgeId::V0 | EdgeId::V1)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bernstein polynomials `B_i^n(x)`, `i = 0..=n`.
pub fn bernstein_all(n: usize, x: f64) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    let y = 1.0 - x;
    for j in 1..=n {
        let mut saved = 0.0;
        for bi in b.iter_mut().take(j) {
            let tmp = *bi;
            *bi = saved + y * tmp;
            saved = x * tmp;
        }
        b[j] = saved;
    }
    b
}

fn de_casteljau(points: &mut [f64], count: usize, dim: usize, x: f64) {
    let y = 1.0 - x;
    for r in 1..count {
        for i in 0..count - r {
            for c in 0..dim {
                let (a, b) = (points[i * dim + c], points[(i + 1) * dim + c]);
                // equal neighbours stay bit-exact, so constant nets evaluate exactly
                if a != b {
                    points[i * dim + c] = y * a + x * b;
                }
            }
        }
    }
}

fn check_domain(u: [f64; 2]) -> Result<()> {
    for (i, &x) in u.iter().enumerate() {
        if !x.is_finite() || !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
            return Err(Error::Domain(format!(
                "parameter {} = {x} outside [0, 1]",
                if i == 0 { "u" } else { "v" }
            )));
        }
    }
    Ok(())
}

/// Bézier patch of bidegree `(p, q)` mapping `[0,1]²` into `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorPatch {
    degree_u: usize,
    degree_v: usize,
    out_dim: usize,
    /// `control[((i * (q + 1)) + j) * d + c]`, `i` along `u`.
    control: Vec<f64>,
}

impl TensorPatch {
    pub fn new(degree_u: usize, degree_v: usize, out_dim: usize, control: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&out_dim) {
            return Err(Error::Contract(format!("patch output dimension {out_dim} not in 1..=3")));
        }
        let expected = (degree_u + 1) * (degree_v + 1) * out_dim;
        if control.len() != expected {
            return Err(Error::Contract(format!(
                "control net of bidegree ({degree_u}, {degree_v}) needs {expected} values, got {}",
                control.len()
            )));
        }
        if control.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("control points must be finite".into()));
        }
        Ok(TensorPatch { degree_u, degree_v, out_dim, control })
    }

    /// Builds the net from a callback `(i, j) -> point`.
    pub fn from_fn(degree_u: usize, degree_v: usize, out_dim: usize, mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Result<Self> {
        let mut control = Vec::with_capacity((degree_u + 1) * (degree_v + 1) * out_dim);
        for i in 0..=degree_u {
            for j in 0..=degree_v {
                let p = f(i, j);
                if p.len() != out_dim {
                    return Err(Error::Contract("control point has wrong dimension".into()));
                }
                control.extend(p);
            }
        }
        TensorPatch::new(degree_u, degree_v, out_dim, control)
    }

    pub fn constant(degree_u: usize, degree_v: usize, value: &[f64]) -> Result<Self> {
        TensorPatch::from_fn(degree_u, degree_v, value.len(), |_, _| value.to_vec())
    }

    pub fn zero(degree_u: usize, degree_v: usize, out_dim: usize) -> Result<Self> {
        TensorPatch::constant(degree_u, degree_v, &vec![0.0; out_dim])
    }

    /// Bilinear patch through four corners `p00, p10, p01, p11`
    /// (`p10` is the image of `(u, v) = (1, 0)`).
    pub fn bilinear(p00: &[f64], p10: &[f64], p01: &[f64], p11: &[f64]) -> Result<Self> {
        let corners = [p00, p01, p10, p11];
        TensorPatch::from_fn(1, 1, p00.len(), |i, j| corners[i * 2 + j].to_vec())
    }

    /// The identity map of the unit square.
    pub fn identity() -> Self {
        TensorPatch::bilinear(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]).expect("valid identity net")
    }

    pub fn degree_u(&self) -> usize {
        self.degree_u
    }

    pub fn degree_v(&self) -> usize {
        self.degree_v
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.degree_u, self.degree_v)
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn control(&self) -> &[f64] {
        &self.control
    }

    pub fn control_count(&self) -> usize {
        (self.degree_u + 1) * (self.degree_v + 1)
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        (i * (self.degree_v + 1) + j) * self.out_dim
    }

    pub fn control_point(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.control[o..o + self.out_dim]
    }

    pub fn set_control_point(&mut self, i: usize, j: usize, p: &[f64]) {
        assert_eq!(p.len(), self.out_dim);
        let o = self.offset(i, j);
        self.control[o..o + self.out_dim].copy_from_slice(p);
    }

    /// Maps every control point through `f` (affine maps commute with
    /// evaluation).
    pub fn map_points(&self, out_dim: usize, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        TensorPatch::from_fn(self.degree_u, self.degree_v, out_dim, |i, j| f(self.control_point(i, j)))
    }

    /// Scalar patch holding one output coordinate.
    pub fn component(&self, c: usize) -> TensorPatch {
        self.map_points(1, |p| vec![p[c]]).expect("component of a valid patch")
    }

    /// Stacks scalar patches of a common bidegree into one vector patch.
    pub fn stack(components: &[&TensorPatch]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Contract("no components to stack".into()))?;
        let (p, q) = first.bidegree();
        if components.iter().any(|c| c.bidegree() != (p, q) || c.out_dim != 1) {
            return Err(Error::Contract("stacked components must be scalar and share a bidegree".into()));
        }
        TensorPatch::from_fn(p, q, components.len(), |i, j| {
            components.iter().map(|c| c.control_point(i, j)[0]).collect()
        })
    }

    /// Evaluates by de Casteljau without a domain check.
    pub(crate) fn eval_raw(&self, u: [f64; 2]) -> Vec<f64> {
        let (p, q, d) = (self.degree_u, self.degree_v, self.out_dim);
        let mut rows = vec![0.0; (p + 1) * d];
        let mut scratch = vec![0.0; (q + 1) * d];
        for i in 0..=p {
            let o = self.offset(i, 0);
            scratch.copy_from_slice(&self.control[o..o + (q + 1) * d]);
            de_casteljau(&mut scratch, q + 1, d, u[1]);
            rows[i * d..(i + 1) * d].copy_from_slice(&scratch[..d]);
        }
        de_casteljau(&mut rows, p + 1, d, u[0]);
        rows.truncate(d);
        rows
    }

    /// Point on the patch at parameters `u`.
    pub fn eval(&self, u: [f64; 2]) -> Result<Vec<f64>> {
        check_domain(u)?;
        Ok(self.eval_raw(u))
    }

    /// Forward differences `Δ_u^du Δ_v^dv` of the net (no degree factors).
    fn differenced(&self, du: usize, dv: usize) -> TensorPatch {
        let d = self.out_dim;
        let mut net = self.clone();
        for _ in 0..du {
            let (p, q) = net.bidegree();
            net = TensorPatch::from_fn(p - 1, q, d, |i, j| {
                let a = net.control_point(i + 1, j);
                let b = net.control_point(i, j);
                a.iter().zip(b).map(|(x, y)| x - y).collect()
            })
            .expect("difference of valid net");
        }
        for _ in 0..dv {
            let (p, q) = net.bidegree();
            net = TensorPatch::from_fn(p, q - 1, d, |i, j| {
                let a = net.control_point(i, j + 1);
                let b = net.control_point(i, j);
                a.iter().zip(b).map(|(x, y)| x - y).collect()
            })
            .expect("difference of valid net");
        }
        net
    }

    /// Exact derivative patch `∂_u^du ∂_v^dv`. Differentiating past the
    /// degree yields the zero patch of bidegree (0, 0).
    pub fn partial_derivative_patch(&self, du: usize, dv: usize) -> TensorPatch {
        if du > self.degree_u || dv > self.degree_v {
            return TensorPatch::zero(0, 0, self.out_dim).expect("zero patch");
        }
        let scale = falling(self.degree_u, du) * falling(self.degree_v, dv);
        let net = self.differenced(du, dv);
        net.map_points(self.out_dim, |p| p.iter().map(|x| x * scale).collect())
            .expect("scaled net")
    }

    /// Degree elevation to `(p_new, q_new)`; the map is unchanged.
    pub fn elevate(&self, p_new: usize, q_new: usize) -> Result<TensorPatch> {
        if p_new < self.degree_u || q_new < self.degree_v {
            return Err(Error::Contract(format!(
                "cannot elevate bidegree ({}, {}) to ({p_new}, {q_new})",
                self.degree_u, self.degree_v
            )));
        }
        let d = self.out_dim;
        let mut net = self.clone();
        while net.degree_u < p_new {
            let (p, q) = net.bidegree();
            let n = (p + 1) as f64;
            net = TensorPatch::from_fn(p + 1, q, d, |i, j| {
                let a = i as f64 / n;
                (0..d)
                    .map(|c| {
                        let lo = if i > 0 { net.control_point(i - 1, j)[c] } else { 0.0 };
                        let hi = if i <= p { net.control_point(i, j)[c] } else { 0.0 };
                        a * lo + (1.0 - a) * hi
                    })
                    .collect()
            })?;
        }
        while net.degree_v < q_new {
            let (p, q) = net.bidegree();
            let n = (q + 1) as f64;
            net = TensorPatch::from_fn(p, q + 1, d, |i, j| {
                let a = j as f64 / n;
                (0..d)
                    .map(|c| {
                        let lo = if j > 0 { net.control_point(i, j - 1)[c] } else { 0.0 };
                        let hi = if j <= q { net.control_point(i, j)[c] } else { 0.0 };
                        a * lo + (1.0 - a) * hi
                    })
                    .collect()
            })?;
        }
        Ok(net)
    }

    /// Value along a side, `patch(edge.point(s))`.
    pub fn edge_trace(&self, edge: EdgeId, s: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("edge parameter {s} outside [0, 1]")));
        }
        Ok(self.eval_raw(edge.point(s)))
    }

    /// Exact `k`-jet at `u` (Taylor coefficients `∂^α / α!`).
    pub fn jet_at(&self, u: [f64; 2], k: usize) -> Result<Jet> {
        if k > MAX_ORDER {
            return Err(Error::UnsupportedOrder { order: k, max: MAX_ORDER });
        }
        check_domain(u)?;
        let d = self.out_dim;
        let exps = multi_indices(2, k);
        let nm = exps.len();
        let mut coeffs = vec![0.0; d * nm];
        for (idx, e) in exps.iter().enumerate() {
            let (a, b) = (e[0], e[1]);
            if a > self.degree_u || b > self.degree_v {
                continue;
            }
            let scale = (binomial(self.degree_u, a) * binomial(self.degree_v, b)) as f64;
            let value = self.differenced(a, b).eval_raw(u);
            for c in 0..d {
                coeffs[c * nm + idx] = scale * value[c];
            }
        }
        Jet::new(k, 2, d, u.to_vec(), coeffs)
    }

    /// Jacobian determinant of a planar patch.
    pub fn jacobian_det(&self, u: [f64; 2]) -> Result<f64> {
        if self.out_dim != 2 {
            return Err(Error::Contract("jacobian determinant needs a planar patch".into()));
        }
        let j = self.jet_at(u, 1)?.jacobian();
        Ok(j[0] * j[3] - j[1] * j[2])
    }
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Free-function form of [`TensorPatch::jet_at`].
pub fn jet_extract(patch: &TensorPatch, u: [f64; 2], k: usize) -> Result<Jet> {
    patch.jet_at(u, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_net() -> TensorPatch {
        TensorPatch::from_fn(3, 2, 2, |i, j| {
            vec![(i * 7 + j * 3) as f64 % 5.0 - 2.0, (i * j) as f64 + 0.5 * j as f64]
        })
        .unwrap()
    }

    #[test]
    fn constant_patch_everywhere_constant() {
        let c = TensorPatch::constant(3, 3, &[2.5, -1.0]).unwrap();
        for &u in &[[0.0, 0.0], [0.3, 0.8], [1.0, 0.5]] {
            assert_eq!(c.eval(u).unwrap(), vec![2.5, -1.0]);
        }
        let j = c.jet_at([0.4, 0.4], 2).unwrap();
        assert_eq!(j.value(), vec![2.5, -1.0]);
        assert!(j.coefficients().iter().enumerate().all(|(i, &x)| i % 6 == 0 || x == 0.0));
    }

    #[test]
    fn identity_patch() {
        let id = TensorPatch::identity();
        assert_eq!(id.eval([0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        let j = id.jet_at([0.3, 0.7], 1).unwrap();
        assert_eq!(j.value(), vec![0.3, 0.7]);
        assert_eq!(j.jacobian(), vec![1.0, 0.0, 0.0, 1.0]);
        let du = id.partial_derivative_patch(1, 0);
        assert_eq!(du.bidegree(), (0, 1));
        assert_eq!(du.eval([0.2, 0.9]).unwrap(), vec![1.0, 0.0]);
        for s in [0.0, 0.25, 1.0] {
            assert_eq!(id.edge_trace(EdgeId::V1, s).unwrap(), vec![s, 1.0]);
        }
    }

    #[test]
    fn corners_reproduce_control_points() {
        let p = cubic_net();
        assert_eq!(p.eval([0.0, 0.0]).unwrap(), p.control_point(0, 0));
        assert_eq!(p.eval([1.0, 0.0]).unwrap(), p.control_point(3, 0));
        assert_eq!(p.eval([0.0, 1.0]).unwrap(), p.control_point(0, 2));
        assert_eq!(p.eval([1.0, 1.0]).unwrap(), p.control_point(3, 2));
        assert_eq!(p.edge_trace(EdgeId::U0, 0.0).unwrap(), p.control_point(0, 0));
    }

    #[test]
    fn domain_errors() {
        let p = cubic_net();
        assert!(matches!(p.eval([1.1, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(p.eval([0.5, -0.01]), Err(Error::Domain(_))));
        assert!(matches!(p.jet_at([0.5, 2.0], 1), Err(Error::Domain(_))));
        assert!(matches!(p.jet_at([0.5, 0.5], 5), Err(Error::UnsupportedOrder { .. })));
        assert!(p.edge_trace(EdgeId::U1, 1.5).is_err());
        assert!(TensorPatch::new(1, 1, 2, vec![0.0; 7]).is_err());
        assert!(TensorPatch::new(1, 1, 4, vec![0.0; 16]).is_err());
    }

    #[test]
    fn over_differentiation_is_zero() {
        let p = cubic_net();
        let z = p.partial_derivative_patch(4, 0);
        assert_eq!(z.bidegree(), (0, 0));
        assert_eq!(z.eval([0.3, 0.3]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.partial_derivative_patch(0, 0), p);
    }

    #[test]
    fn derivative_order_interchange() {
        let p = cubic_net();
        let a = p.partial_derivative_patch(1, 0).partial_derivative_patch(0, 1);
        let b = p.partial_derivative_patch(0, 1).partial_derivative_patch(1, 0);
        let c = p.partial_derivative_patch(1, 1);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn elevation_rejects_reduction() {
        let p = cubic_net();
        assert!(p.elevate(2, 2).is_err());
        assert_eq!(p.elevate(3, 2).unwrap(), p);
    }

    #[test]
    fn chart_round_trip() {
        for e in EdgeId::ALL {
            let back = e.unchart(e.chart(0.3, 0.6));
            assert!((back[0] - 0.3).abs() < 1e-15 && (back[1] - 0.6).abs() < 1e-15);
            assert_eq!(e.chart(0.0, 0.6), e.point(0.6));
            assert_eq!(EdgeId::parse(e.name()), Some(e));
        }
    }

    #[test]
    fn bernstein_partition_of_unity() {
        for n in 0..6 {
            let s: f64 = bernstein_all(n, 0.37).iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }
}
