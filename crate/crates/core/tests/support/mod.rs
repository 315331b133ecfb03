//! Independent oracles shared by the integration tests: exact bivariate
//! polynomial arithmetic, Bernstein-to-monomial expansion, a full-pivot
//! rank oracle and finite differences. None of this goes through the
//! library's jet engine or de Casteljau code.
#![allow(dead_code)]

pub mod cases;

use std::collections::BTreeMap;

use gkiso::{Jet, TensorPatch};
use rand::Rng;

/// Bivariate polynomial, keyed by exponent pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly {
    pub terms: BTreeMap<(u32, u32), f64>,
}

impl Poly {
    pub fn constant(c: f64) -> Poly {
        Poly::monomial(c, 0, 0)
    }

    pub fn monomial(c: f64, i: u32, j: u32) -> Poly {
        let mut terms = BTreeMap::new();
        terms.insert((i, j), c);
        Poly { terms }
    }

    pub fn x() -> Poly {
        Poly::monomial(1.0, 1, 0)
    }

    pub fn y() -> Poly {
        Poly::monomial(1.0, 0, 1)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            *r.terms.entry(*e).or_insert(0.0) += c;
        }
        r
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly { terms: self.terms.iter().map(|(e, c)| (*e, c * s)).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::default();
        for ((a, b), c) in &self.terms {
            for ((d, e), f) in &o.terms {
                *r.terms.entry((a + d, b + e)).or_insert(0.0) += c * f;
            }
        }
        r
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::constant(1.0), |acc, _| acc.mul(self))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|((i, j), c)| c * x.powi(*i as i32) * y.powi(*j as i32)).sum()
    }

    /// `self(gx, gy)`.
    pub fn substitute(&self, gx: &Poly, gy: &Poly) -> Poly {
        let mut r = Poly::default();
        for ((i, j), c) in &self.terms {
            r = r.add(&gx.pow(*i).mul(&gy.pow(*j)).scale(*c));
        }
        r
    }

    /// `self(a + h)` as a polynomial in `h`.
    pub fn shifted(&self, a: [f64; 2]) -> Poly {
        self.substitute(&Poly::x().add(&Poly::constant(a[0])), &Poly::y().add(&Poly::constant(a[1])))
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    /// `∂^a_x ∂^b_y`.
    pub fn derivative(&self, a: u32, b: u32) -> Poly {
        let mut r = Poly::default();
        for ((i, j), c) in &self.terms {
            if *i >= a && *j >= b {
                let f = falling(*i, a) * falling(*j, b);
                *r.terms.entry((i - a, j - b)).or_insert(0.0) += c * f;
            }
        }
        r
    }
}

fn falling(n: u32, k: u32) -> f64 {
    (0..k).map(|m| (n - m) as f64).product()
}

pub fn binom(n: u32, k: u32) -> f64 {
    falling(n, k) / falling(k, k)
}

/// Random polynomial of total degree ≤ `deg` with coefficients in [-1, 1].
pub fn random_poly(rng: &mut impl Rng, deg: u32) -> Poly {
    let mut p = Poly::default();
    for d in 0..=deg {
        for i in 0..=d {
            p.terms.insert((i, d - i), rng.gen_range(-1.0..1.0));
        }
    }
    p
}

/// Taylor coefficients of a polynomial map at `a`, in the jet layout
/// `1, x, y, x², xy, y², …`, computed from the symbolically shifted map.
pub fn taylor_jet(map: &[Poly], a: [f64; 2], k: usize) -> Jet {
    let mut coeffs = Vec::new();
    for p in map {
        let s = p.shifted(a);
        for d in 0..=k as u32 {
            for i in (0..=d).rev() {
                coeffs.push(s.coeff(i, d - i));
            }
        }
    }
    Jet::new(k, 2, map.len(), a.to_vec(), coeffs).expect("well-formed jet")
}

/// Monomial form of one component of a Bézier patch.
pub fn bernstein_to_poly(patch: &TensorPatch, comp: usize) -> Poly {
    let (p, q) = patch.bidegree();
    let basis = |n: u32, i: u32, var: Poly| -> Poly {
        // C(n,i) t^i (1-t)^(n-i)
        let one_minus = Poly::constant(1.0).add(&var.scale(-1.0));
        var.pow(i).mul(&one_minus.pow(n - i)).scale(binom(n, i))
    };
    let mut r = Poly::default();
    for i in 0..=p {
        for j in 0..=q {
            let c = patch.control_point(i, j)[comp];
            let term = basis(p as u32, i as u32, Poly::x()).mul(&basis(q as u32, j as u32, Poly::y()));
            r = r.add(&term.scale(c));
        }
    }
    r
}

pub fn patch_polys(patch: &TensorPatch) -> Vec<Poly> {
    (0..patch.out_dim()).map(|c| bernstein_to_poly(patch, c)).collect()
}

/// Direct Bernstein-sum evaluation.
pub fn bernstein_sum(patch: &TensorPatch, u: [f64; 2]) -> Vec<f64> {
    let (p, q) = patch.bidegree();
    let b = |n: usize, i: usize, t: f64| binom(n as u32, i as u32) * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32);
    let mut out = vec![0.0; patch.out_dim()];
    for i in 0..=p {
        for j in 0..=q {
            let w = b(p, i, u[0]) * b(q, j, u[1]);
            for (o, c) in out.iter_mut().zip(patch.control_point(i, j)) {
                *o += w * c;
            }
        }
    }
    out
}

pub fn random_patch(rng: &mut impl Rng, p: usize, q: usize, d: usize) -> TensorPatch {
    TensorPatch::from_fn(p, q, d, |_, _| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn integer_patch(rng: &mut impl Rng, p: usize, q: usize, d: usize) -> TensorPatch {
    TensorPatch::from_fn(p, q, d, |_, _| (0..d).map(|_| rng.gen_range(-5..=5) as f64).collect()).unwrap()
}

/// Planar patch close to the identity, injective for small `amp`.
pub fn wobbly_patch(rng: &mut impl Rng, p: usize, q: usize, amp: f64) -> TensorPatch {
    TensorPatch::from_fn(p, q, 2, |i, j| {
        vec![
            i as f64 / p as f64 + rng.gen_range(-amp..amp),
            j as f64 / q as f64 + rng.gen_range(-amp..amp),
        ]
    })
    .unwrap()
}

/// Rank by Gaussian elimination with full pivoting; pivots below
/// `rel_tol · (largest first pivot)` count as zero.
pub fn rank_full_pivot(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> f64, rel_tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = (0..rows).map(|r| (0..cols).map(|c| entry(r, c)).collect()).collect();
    let mut rank = 0;
    let mut scale = 0.0f64;
    for step in 0..rows.min(cols) {
        let (mut pr, mut pc, mut pv) = (step, step, 0.0f64);
        for (r, row) in a.iter().enumerate().skip(step) {
            for (c, v) in row.iter().enumerate().skip(step) {
                if v.abs() > pv {
                    (pr, pc, pv) = (r, c, v.abs());
                }
            }
        }
        if step == 0 {
            scale = pv;
        }
        if pv <= rel_tol * scale || pv == 0.0 {
            break;
        }
        a.swap(step, pr);
        for row in a.iter_mut() {
            row.swap(step, pc);
        }
        let pivot_row = a[step].clone();
        for row in a.iter_mut().skip(step + 1) {
            let f = row[step] / pivot_row[step];
            if f != 0.0 {
                for c in step..cols {
                    row[c] -= f * pivot_row[c];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Exact area: `det Jφ` expanded symbolically and integrated monomial by
/// monomial over the unit square.
pub fn exact_area(space: &gkiso::space::GSmoothSpace) -> f64 {
    space
        .geometry()
        .unwrap()
        .iter()
        .map(|phi| {
            let (x, y) = (bernstein_to_poly(phi, 0), bernstein_to_poly(phi, 1));
            let det = x.derivative(1, 0).mul(&y.derivative(0, 1)).add(&x.derivative(0, 1).mul(&y.derivative(1, 0)).scale(-1.0));
            det.terms.iter().map(|((i, j), c)| c / ((*i as f64 + 1.0) * (*j as f64 + 1.0))).sum::<f64>()
        })
        .sum()
}

/// Central difference of `f` along coordinate `axis`.
pub fn central_diff(f: impl Fn([f64; 2]) -> f64, u: [f64; 2], axis: usize, h: f64) -> f64 {
    let (mut a, mut b) = (u, u);
    a[axis] += h;
    b[axis] -= h;
    (f(a) - f(b)) / (2.0 * h)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest singular value of a row-major 2×2 matrix.
pub fn smin2(m: &[f64]) -> f64 {
    let det = (m[0] * m[3] - m[1] * m[2]).abs();
    let fro2 = m.iter().map(|v| v * v).sum::<f64>();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    det / ((fro2 + disc) / 2.0).sqrt()
}
