//! Positive and negative (φ, f) cases over a G¹ cap, shared by the
//! isogeo and acceptance targets.

use gkiso::isogeo::{IsoGeoElement, Provenance};
use gkiso::space::{audit_injectivity, build_complex, build_gsmooth_space, GSmoothSpace, Layout};
use gkiso::TensorPatch;
use rand::Rng;

pub fn cap(n: usize) -> GSmoothSpace {
    let mut s = build_gsmooth_space(&build_complex(n, (3, 3)).unwrap(), 1).unwrap();
    s.make_geometry(Layout::default()).unwrap();
    s
}

fn draw(r: &mut impl Rng, len: usize, amp: f64) -> Vec<f64> {
    (0..len).map(|_| r.gen_range(-amp..amp)).collect()
}

/// One element per patch with φ = layout + small random member of the
/// space and f a random member. The perturbed geometry is audited.
pub fn random_elements(space: &GSmoothSpace, r: &mut impl Rng) -> Vec<IsoGeoElement> {
    let dim = space.dimension();
    let base = space.complex.geometry_coeffs.clone().unwrap();
    let coords: Vec<Vec<f64>> = base
        .iter()
        .map(|c| c.iter().zip(draw(r, dim, 0.02)).map(|(a, b)| a + b).collect())
        .collect();
    let geometry = space.geometry_from_coeffs(&coords).unwrap();
    audit_injectivity(&geometry).expect("perturbed geometry stays injective");
    let field = space.sample_field(&draw(r, dim, 1.0)).unwrap();
    geometry
        .into_iter()
        .zip(field)
        .enumerate()
        .map(|(i, (g, f))| {
            let mut e = IsoGeoElement::new(g, f, i).unwrap();
            e.provenance = Provenance::SameSpace;
            e
        })
        .collect()
}

/// Moves control point (1, 2) by `delta` in component `comp`. For the
/// standard gluing this point is constrained only by the U0 edge at k = 1.
pub fn bump(patch: &TensorPatch, comp: usize, delta: f64) -> TensorPatch {
    let mut out = patch.clone();
    let mut pt = out.control_point(1, 2).to_vec();
    pt[comp] += delta;
    out.set_control_point(1, 2, &pt);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Break {
    None,
    Field,
    Geometry,
}

/// The element pair across interior edge `edge`, optionally with G¹ broken
/// on side a.
pub fn pair(space: &GSmoothSpace, elems: &[IsoGeoElement], edge: usize, brk: Break) -> (IsoGeoElement, IsoGeoElement) {
    let e = &space.complex.edges[edge];
    let a = &elems[e.patch_a];
    let a = match brk {
        Break::None => a.clone(),
        Break::Field => a.with_field(bump(&a.field, 0, 1e-2)).unwrap(),
        Break::Geometry => a.with_geometry(bump(&a.geometry, 0, 1e-2)).unwrap(),
    };
    (a, elems[e.patch_b].clone())
}
