//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] of order `k` stores, for every output component, the Taylor
//! coefficients `∂^α f(y) / α!` of a map `ℝ^m → ℝ^d` at a base point `y`, for
//! all multi-indices `|α| ≤ k`. Multi-indices are laid out densely in
//! graded-lexicographic order: by total degree, then lexicographically
//! descending in the exponent tuple. For `m = 2, k = 2` that is
//! `1, x, y, x², xy, y²`.
//!
//! Composition is truncated power-series substitution and inversion is a
//! fixed-point (Newton) iteration on jets, so neither needs factorial
//! bookkeeping.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Highest jet order supported anywhere in the crate.
pub const MAX_ORDER: usize = 4;

/// Tolerance on base-point agreement when composing or comparing jets.
pub const BASE_POINT_TOL: f64 = 1e-9;

/// Jacobian determinant threshold below which a jet is not inverted.
pub const SINGULAR_DET: f64 = 1e-12;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Number of monomials in `dim` variables of total degree at most `order`.
pub fn monomial_count(dim: usize, order: usize) -> usize {
    binomial(dim + order, order)
}

fn monomials_of_degree(dim: usize, degree: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(prefix: &mut Vec<usize>, remaining_vars: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
        if remaining_vars == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(prefix, remaining_vars - 1, remaining - e, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(dim), dim, degree, out);
}

/// All exponent tuples of `dim` variables with total degree `≤ order`, in
/// graded-lexicographic order.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(monomial_count(dim, order));
    for d in 0..=order {
        monomials_of_degree(dim, d, &mut out);
    }
    out
}

/// Position of an exponent tuple in the graded-lexicographic layout.
pub fn monomial_index(exps: &[usize]) -> usize {
    let dim = exps.len();
    let total: usize = exps.iter().sum();
    let mut idx = if total == 0 { 0 } else { monomial_count(dim, total - 1) };
    let mut remaining = total;
    for (i, &e) in exps.iter().enumerate().take(dim.saturating_sub(1)) {
        let vars_left = dim - 1 - i;
        for j in (e + 1)..=remaining {
            // tuples of the remaining variables summing to remaining - j
            idx += binomial(remaining - j + vars_left - 1, vars_left - 1);
        }
        remaining -= e;
    }
    idx
}

/// Monomial table with a precomputed truncated product map.
#[derive(Debug, Clone)]
struct Monomials {
    exps: Vec<Vec<usize>>,
    products: Vec<(usize, usize, usize)>,
}

impl Monomials {
    fn new(dim: usize, order: usize) -> Self {
        let exps = multi_indices(dim, order);
        let degrees: Vec<usize> = exps.iter().map(|e| e.iter().sum()).collect();
        let mut products = Vec::new();
        let mut sum = vec![0usize; dim];
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                for l in 0..dim {
                    sum[l] = a[l] + b[l];
                }
                products.push((i, j, monomial_index(&sum)));
            }
        }
        Monomials { exps, products }
    }

    fn len(&self) -> usize {
        self.exps.len()
    }

    fn mul(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for &(i, j, k) in &self.products {
            out[k] += a[i] * b[j];
        }
        out
    }

    fn one(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v[0] = 1.0;
        v
    }
}

/// One monomial term `coeff · Π x_l^{exps_l}` of a polynomial map, attached
/// to an output component.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub component: usize,
    pub coeff: f64,
    pub exps: Vec<usize>,
}

impl Term {
    pub fn new(component: usize, coeff: f64, exps: &[usize]) -> Self {
        Term { component, coeff, exps: exps.to_vec() }
    }
}

/// Order-`k` Taylor jet of a map `ℝ^m → ℝ^d` at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    order: usize,
    in_dim: usize,
    out_dim: usize,
    base: Vec<f64>,
    /// `coeffs[c * monomial_count + idx]`
    coeffs: Vec<f64>,
}

impl Jet {
    /// Builds a jet from a dense coefficient table (component-major,
    /// graded-lexicographic within each component).
    pub fn new(order: usize, in_dim: usize, out_dim: usize, base: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder { order, max: MAX_ORDER });
        }
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Contract("jet dimensions must be positive".into()));
        }
        if base.len() != in_dim {
            return Err(Error::Contract(format!(
                "base point has {} coordinates, expected {in_dim}",
                base.len()
            )));
        }
        let expected = out_dim * monomial_count(in_dim, order);
        if coeffs.len() != expected {
            return Err(Error::Contract(format!(
                "jet needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if base.iter().chain(coeffs.iter()).any(|c| !c.is_finite()) {
            return Err(Error::Contract("jet entries must be finite".into()));
        }
        Ok(Jet { order, in_dim, out_dim, base, coeffs })
    }

    pub fn zero(order: usize, in_dim: usize, out_dim: usize, base: Vec<f64>) -> Result<Self> {
        let len = out_dim * monomial_count(in_dim, order);
        Jet::new(order, in_dim, out_dim, base, vec![0.0; len])
    }

    /// Identity map `ℝ^m → ℝ^m` at `base`.
    pub fn identity(base: &[f64], order: usize) -> Result<Self> {
        let m = base.len();
        let mut id = vec![0.0; m * m];
        for i in 0..m {
            id[i * m + i] = 1.0;
        }
        Jet::affine(base, base, &id, order)
    }

    /// Affine map with the given value at `base` and row-major
    /// `out_dim × in_dim` Jacobian.
    pub fn affine(base: &[f64], value: &[f64], jacobian: &[f64], order: usize) -> Result<Self> {
        let m = base.len();
        let d = value.len();
        if jacobian.len() != m * d {
            return Err(Error::Contract("jacobian shape does not match dimensions".into()));
        }
        let mut jet = Jet::zero(order, m, d, base.to_vec())?;
        let nm = jet.monomials_per_component();
        for c in 0..d {
            jet.coeffs[c * nm] = value[c];
            if order >= 1 {
                for l in 0..m {
                    // degree-one monomials x_0, x_1, ... occupy slots 1..=m
                    jet.coeffs[c * nm + 1 + l] = jacobian[c * m + l];
                }
            }
        }
        Ok(jet)
    }

    /// Taylor-expands a polynomial map, given as a list of monomial terms in
    /// global coordinates, around `base`.
    pub fn from_terms(in_dim: usize, out_dim: usize, order: usize, base: &[f64], terms: &[Term]) -> Result<Self> {
        let mut jet = Jet::zero(order, in_dim, out_dim, base.to_vec())?;
        let mons = Monomials::new(in_dim, order);
        let nm = mons.len();
        // shifted[l][e] = (base_l + δ_l)^e as a truncated polynomial in δ
        let mut shifted: Vec<Vec<Vec<f64>>> = Vec::with_capacity(in_dim);
        let max_exp = terms.iter().flat_map(|t| t.exps.iter().copied()).max().unwrap_or(0);
        for (l, &b) in base.iter().enumerate() {
            let mut lin = vec![0.0; nm];
            lin[0] = b;
            if order >= 1 {
                lin[1 + l] = 1.0;
            }
            let mut pows = vec![mons.one()];
            for e in 1..=max_exp {
                let next = mons.mul(&pows[e - 1], &lin);
                pows.push(next);
            }
            shifted.push(pows);
        }
        for term in terms {
            if term.component >= out_dim || term.exps.len() != in_dim {
                return Err(Error::Contract("polynomial term does not match jet shape".into()));
            }
            let mut prod = mons.one();
            for (l, &e) in term.exps.iter().enumerate() {
                if e > 0 {
                    prod = mons.mul(&prod, &shifted[l][e]);
                }
            }
            let off = term.component * nm;
            for (i, p) in prod.iter().enumerate() {
                jet.coeffs[off + i] += term.coeff * p;
            }
        }
        if jet.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("jet entries must be finite".into()));
        }
        Ok(jet)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base
    }

    pub fn monomials_per_component(&self) -> usize {
        monomial_count(self.in_dim, self.order)
    }

    /// Dense coefficient table, component-major.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let nm = self.monomials_per_component();
        &self.coeffs[c * nm..(c + 1) * nm]
    }

    /// Taylor coefficient of `component` for the exponent tuple `exps`
    /// (zero when `|exps|` exceeds the order).
    pub fn coefficient(&self, component: usize, exps: &[usize]) -> f64 {
        assert_eq!(exps.len(), self.in_dim, "exponent tuple has wrong length");
        if exps.iter().sum::<usize>() > self.order {
            return 0.0;
        }
        self.coeffs[component * self.monomials_per_component() + monomial_index(exps)]
    }

    pub fn set_coefficient(&mut self, component: usize, exps: &[usize], value: f64) {
        let nm = self.monomials_per_component();
        self.coeffs[component * nm + monomial_index(exps)] = value;
    }

    /// Order-0 part: the map's value at the base point.
    pub fn value(&self) -> Vec<f64> {
        let nm = self.monomials_per_component();
        (0..self.out_dim).map(|c| self.coeffs[c * nm]).collect()
    }

    /// Row-major `out_dim × in_dim` Jacobian (zero for order-0 jets).
    pub fn jacobian(&self) -> Vec<f64> {
        let nm = self.monomials_per_component();
        let mut jac = vec![0.0; self.out_dim * self.in_dim];
        if self.order == 0 {
            return jac;
        }
        for c in 0..self.out_dim {
            for l in 0..self.in_dim {
                jac[c * self.in_dim + l] = self.coeffs[c * nm + 1 + l];
            }
        }
        jac
    }

    /// Drops all terms above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        let nm_new = monomial_count(self.in_dim, order);
        let nm = self.monomials_per_component();
        let mut coeffs = Vec::with_capacity(self.out_dim * nm_new);
        for c in 0..self.out_dim {
            coeffs.extend_from_slice(&self.coeffs[c * nm..c * nm + nm_new]);
        }
        Jet { order, in_dim: self.in_dim, out_dim: self.out_dim, base: self.base.clone(), coeffs }
    }

    /// Keeps only the listed output components.
    pub fn select_components(&self, comps: &[usize]) -> Jet {
        let nm = self.monomials_per_component();
        let mut coeffs = Vec::with_capacity(comps.len() * nm);
        for &c in comps {
            coeffs.extend_from_slice(&self.coeffs[c * nm..(c + 1) * nm]);
        }
        Jet { order: self.order, in_dim: self.in_dim, out_dim: comps.len(), base: self.base.clone(), coeffs }
    }

    /// Max-norm distance between base points.
    pub fn base_deviation(&self, other: &Jet) -> f64 {
        self.base
            .iter()
            .zip(&other.base)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_shape(&self, other: &Jet) -> Result<()> {
        if self.order != other.order || self.in_dim != other.in_dim || self.out_dim != other.out_dim {
            return Err(Error::Contract(format!(
                "jet shapes differ: (k={}, m={}, d={}) vs (k={}, m={}, d={})",
                self.order, self.in_dim, self.out_dim, other.order, other.in_dim, other.out_dim
            )));
        }
        Ok(())
    }

    /// Largest absolute coefficient difference. Base points must agree to
    /// [`BASE_POINT_TOL`].
    pub fn distance(&self, other: &Jet) -> Result<f64> {
        self.check_shape(other)?;
        let dev = self.base_deviation(other);
        if dev > BASE_POINT_TOL {
            return Err(Error::Contract(format!("jet base points differ by {dev:e}")));
        }
        self.coefficient_gap(other)
    }

    /// Largest absolute coefficient difference, ignoring base points.
    pub fn coefficient_gap(&self, other: &Jet) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Jet of `self ∘ inner` at `inner`'s base point.
    pub fn compose(&self, inner: &Jet) -> Result<Jet> {
        if inner.out_dim != self.in_dim {
            return Err(Error::Contract(format!(
                "cannot compose: inner maps to ℝ^{}, outer expects ℝ^{}",
                inner.out_dim, self.in_dim
            )));
        }
        if inner.order != self.order {
            return Err(Error::Contract(format!(
                "cannot compose jets of orders {} and {}",
                self.order, inner.order
            )));
        }
        let inner_value = inner.value();
        let dev = inner_value
            .iter()
            .zip(&self.base)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > BASE_POINT_TOL {
            return Err(Error::Contract(format!(
                "outer base point misses inner value by {dev:e}"
            )));
        }
        let k = self.order;
        let mons = Monomials::new(inner.in_dim, k);
        let nm_in = mons.len();
        let nm_out = self.monomials_per_component();

        // δ_l = inner_l − outer.base_l, keeping the (tiny) constant offset
        let mut powers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.in_dim);
        for l in 0..self.in_dim {
            let mut delta = inner.component(l).to_vec();
            delta[0] -= self.base[l];
            let mut pows = vec![mons.one()];
            for e in 1..=k {
                let next = mons.mul(&pows[e - 1], &delta);
                pows.push(next);
            }
            powers.push(pows);
        }

        let outer_exps = multi_indices(self.in_dim, k);
        let mut coeffs = vec![0.0; self.out_dim * nm_in];
        for (bi, beta) in outer_exps.iter().enumerate() {
            if (0..self.out_dim).all(|c| self.coeffs[c * nm_out + bi] == 0.0) {
                continue;
            }
            let mut term = mons.one();
            for (l, &e) in beta.iter().enumerate() {
                if e > 0 {
                    term = mons.mul(&term, &powers[l][e]);
                }
            }
            for c in 0..self.out_dim {
                let w = self.coeffs[c * nm_out + bi];
                if w == 0.0 {
                    continue;
                }
                for (i, t) in term.iter().enumerate() {
                    coeffs[c * nm_in + i] += w * t;
                }
            }
        }
        Jet::new(k, inner.in_dim, self.out_dim, inner.base.clone(), coeffs)
    }

    /// Jet of the local inverse map, based at this jet's value.
    pub fn invert(&self) -> Result<Jet> {
        if self.in_dim != self.out_dim {
            return Err(Error::Contract(format!(
                "cannot invert a jet from ℝ^{} to ℝ^{}",
                self.in_dim, self.out_dim
            )));
        }
        let m = self.in_dim;
        let jac = DMatrix::from_row_slice(m, m, &self.jacobian());
        let det = jac.determinant();
        if !(det.abs() > SINGULAR_DET) {
            return Err(Error::Singular { det: det.abs() });
        }
        let jac_inv = jac
            .try_inverse()
            .ok_or(Error::Singular { det: det.abs() })?;
        let inv_rows: Vec<f64> = (0..m)
            .flat_map(|r| (0..m).map(move |c| (r, c)))
            .map(|(r, c)| jac_inv[(r, c)])
            .collect();

        let y0 = self.value();
        let mut g = Jet::affine(&y0, &self.base, &inv_rows, self.order)?;
        let id = Jet::identity(&y0, self.order)?;
        let nm = g.monomials_per_component();
        // Each sweep fixes one more order of the residual.
        for _ in 1..self.order.max(1) + 1 {
            let fg = self.compose(&g)?;
            let mut residual = fg.coeffs.clone();
            for (r, i) in residual.iter_mut().zip(&id.coeffs) {
                *r -= i;
            }
            for idx in 0..nm {
                for r in 0..m {
                    let mut corr = 0.0;
                    for c in 0..m {
                        corr += jac_inv[(r, c)] * residual[c * nm + idx];
                    }
                    g.coeffs[r * nm + idx] -= corr;
                }
            }
        }
        // value and base are exact by construction
        for r in 0..m {
            g.coeffs[r * nm] = self.base[r];
        }
        Ok(g)
    }
}

/// Free-function form of [`Jet::compose`].
pub fn jet_compose(outer: &Jet, inner: &Jet) -> Result<Jet> {
    outer.compose(inner)
}

/// Free-function form of [`Jet::invert`].
pub fn jet_invert(j: &Jet) -> Result<Jet> {
    j.invert()
}

/// Free-function form of [`Jet::distance`].
pub fn jet_distance(a: &Jet, b: &Jet) -> Result<f64> {
    a.distance(b)
}
