mod support;

use gkiso::{EdgeId, Error, TensorPatch};
use proptest::prelude::*;
use rand::Rng;
use support::*;

#[test]
fn eval_matches_bernstein_sum() {
    let mut r = rng(21);
    for _ in 0..10 {
        let patch = random_patch(&mut r, 3, 3, 3);
        let u = [0.2, 0.9];
        assert!(max_abs_diff(&patch.eval(u).unwrap(), &bernstein_sum(&patch, u)) < 1e-13);
    }
}

#[test]
fn identity_patch_midpoint_and_constants() {
    let id = TensorPatch::bilinear(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]).unwrap();
    assert_eq!(id.eval([0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
    let c = TensorPatch::constant(4, 2, &[1.5, -2.0]).unwrap();
    let mut r = rng(1);
    for _ in 0..20 {
        let u = [r.gen_range(0.0..=1.0), r.gen_range(0.0..=1.0)];
        assert_eq!(c.eval(u).unwrap(), vec![1.5, -2.0]);
    }
    assert!(matches!(id.eval([-0.1, 0.5]), Err(Error::Domain(_))));
}

#[test]
fn derivative_patch_against_central_differences() {
    let mut r = rng(22);
    let patch = random_patch(&mut r, 3, 2, 1);
    let d = patch.partial_derivative_patch(2, 1);
    assert_eq!(d.bidegree(), (1, 1));
    // ∂²/∂u² ∂/∂v from the monomial oracle, and from nested central differences
    let oracle = bernstein_to_poly(&patch, 0).derivative(2, 1);
    let h = 1e-5;
    let f = |u: [f64; 2]| bernstein_sum(&patch, u)[0];
    let fv = |u: [f64; 2]| central_diff(f, u, 1, h);
    for _ in 0..20 {
        let u = [r.gen_range(0.1..0.9), r.gen_range(0.1..0.9)];
        let got = d.eval(u).unwrap()[0];
        assert!((got - oracle.eval(u[0], u[1])).abs() < 1e-11);
        // second difference along u of the v-derivative, step 1e-3 keeps rounding small
        let hu = 1e-3;
        let fd = (fv([u[0] + hu, u[1]]) - 2.0 * fv(u) + fv([u[0] - hu, u[1]])) / (hu * hu);
        assert!((got - fd).abs() < 1e-3, "{got} vs {fd}");
    }
}

#[test]
fn first_derivative_central_difference_is_second_order() {
    let mut r = rng(23);
    let patch = random_patch(&mut r, 3, 2, 2);
    let d = patch.partial_derivative_patch(1, 0);
    for _ in 0..20 {
        let u = [r.gen_range(0.1..0.9), r.gen_range(0.1..0.9)];
        for c in 0..2 {
            let fd = central_diff(|x| bernstein_sum(&patch, x)[c], u, 0, 1e-5);
            assert!((d.eval(u).unwrap()[c] - fd).abs() < 1e-6);
        }
    }
}

#[test]
fn derivative_edge_cases() {
    let id = TensorPatch::identity();
    assert_eq!(id.partial_derivative_patch(0, 0), id);
    let du = id.partial_derivative_patch(1, 0);
    assert_eq!(du.eval([0.3, 0.4]).unwrap(), vec![1.0, 0.0]);
    let over = id.partial_derivative_patch(2, 0);
    assert_eq!(over.bidegree(), (0, 0));
    assert_eq!(over.control(), &[0.0, 0.0]);
}

#[test]
fn elevation_preserves_the_map() {
    let mut r = rng(24);
    let patch = random_patch(&mut r, 2, 2, 3);
    let up = patch.elevate(4, 3).unwrap();
    assert_eq!(up.bidegree(), (4, 3));
    for _ in 0..50 {
        let u = [r.gen_range(0.0..=1.0), r.gen_range(0.0..=1.0)];
        assert!(max_abs_diff(&patch.eval(u).unwrap(), &up.eval(u).unwrap()) < 1e-13);
    }
    assert_eq!(patch.elevate(2, 2).unwrap(), patch);
    let lin = TensorPatch::identity().elevate(3, 3).unwrap();
    assert!(max_abs_diff(&lin.eval([0.25, 0.8]).unwrap(), &[0.25, 0.8]) < 1e-15);
    assert!(matches!(patch.elevate(1, 3), Err(Error::Contract(_))));
}

#[test]
fn edge_traces_follow_the_edge_parameterization() {
    let mut r = rng(25);
    let patch = random_patch(&mut r, 3, 3, 2);
    assert_eq!(patch.edge_trace(EdgeId::U0, 0.0).unwrap(), patch.control_point(0, 0));
    let id = TensorPatch::identity();
    assert_eq!(id.edge_trace(EdgeId::V1, 0.3).unwrap(), vec![0.3, 1.0]);
    for e in EdgeId::ALL {
        for i in 0..20 {
            let s = i as f64 / 19.0;
            assert_eq!(patch.edge_trace(e, s).unwrap(), patch.eval(e.point(s)).unwrap());
        }
    }
    assert!(patch.edge_trace(EdgeId::U1, 1.5).is_err());
}

#[test]
fn order_of_differentiation_interchanges() {
    let mut r = rng(26);
    // integer nets keep every difference exact, so coefficients must match bit for bit
    let patch = integer_patch(&mut r, 4, 3, 2);
    let a = patch.partial_derivative_patch(1, 0).partial_derivative_patch(0, 1);
    let b = patch.partial_derivative_patch(0, 1).partial_derivative_patch(1, 0);
    let c = patch.partial_derivative_patch(1, 1);
    assert_eq!(a.control(), c.control());
    assert_eq!(b.control(), c.control());
    let real = random_patch(&mut r, 4, 3, 2);
    let a = real.partial_derivative_patch(2, 0).partial_derivative_patch(0, 1);
    let b = real.partial_derivative_patch(0, 1).partial_derivative_patch(2, 0);
    assert!(max_abs_diff(a.control(), b.control()) < 1e-12);
}

proptest! {
    #[test]
    fn corners_reproduce_control_points(seed in any::<u64>(), p in 1usize..6, q in 1usize..6) {
        let patch = random_patch(&mut rng(seed), p, q, 3);
        for (u, i) in [(0.0, 0), (1.0, p)] {
            for (v, j) in [(0.0, 0), (1.0, q)] {
                prop_assert_eq!(&patch.eval([u, v]).unwrap()[..], patch.control_point(i, j));
            }
        }
    }

    #[test]
    fn affine_invariance(seed in any::<u64>(), a in prop::array::uniform4(-2.0..2.0f64),
                         b in prop::array::uniform2(-3.0..3.0f64), u in prop::array::uniform2(0.0..=1.0f64)) {
        let patch = random_patch(&mut rng(seed), 3, 3, 2);
        let map = |x: &[f64]| vec![a[0] * x[0] + a[1] * x[1] + b[0], a[2] * x[0] + a[3] * x[1] + b[1]];
        let moved = patch.map_points(2, map).unwrap();
        let expect = map(&patch.eval(u).unwrap());
        prop_assert!(max_abs_diff(&moved.eval(u).unwrap(), &expect) < 1e-12);
    }

    #[test]
    fn partition_of_unity(p in 0usize..8, q in 0usize..8, u in prop::array::uniform2(0.0..=1.0f64)) {
        let ones = TensorPatch::constant(p, q, &[1.0]).unwrap();
        prop_assert!((ones.eval(u).unwrap()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_commutes_with_evaluation(seed in any::<u64>(), du in 0usize..4, dv in 0usize..4,
                                           u in prop::array::uniform2(0.0..=1.0f64)) {
        let patch = random_patch(&mut rng(seed), 3, 3, 1);
        let d = patch.partial_derivative_patch(du, dv);
        let oracle = bernstein_to_poly(&patch, 0).derivative(du as u32, dv as u32);
        prop_assert!((d.eval(u).unwrap()[0] - oracle.eval(u[0], u[1])).abs() < 1e-10);
    }
}
