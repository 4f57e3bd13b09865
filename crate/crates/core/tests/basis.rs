use dglab::basis::*;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn gauss_n1() {
    let b = build_basis(1, NodeFamily::Gauss).unwrap();
    let r = 1.0 / 3f64.sqrt();
    assert!(close(b.nodes[0], -r, 1e-15) && close(b.nodes[1], r, 1e-15));
    assert!(close(b.weights[0], 1.0, 1e-15) && close(b.weights[1], 1.0, 1e-15));
}

#[test]
fn lobatto_n1_n2() {
    let b = build_basis(1, NodeFamily::GaussLobatto).unwrap();
    assert_eq!(b.nodes, vec![-1.0, 1.0]);
    assert!(close(b.weights[0], 1.0, 1e-15) && close(b.weights[1], 1.0, 1e-15));

    // moment conditions for 1, x^2 on {-1, 0, 1}: 2w0 + w1 = 2, 2w0 = 2/3
    let b = build_basis(2, NodeFamily::GaussLobatto).unwrap();
    for (x, e) in b.nodes.iter().zip([-1.0, 0.0, 1.0]) {
        assert!(close(*x, e, 1e-15));
    }
    for (w, e) in b.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
        assert!(close(*w, e, 1e-14));
    }
}

#[test]
fn rejects_invalid_degree() {
    assert_eq!(build_basis(-1, NodeFamily::Gauss).unwrap_err(), BasisError::InvalidDegree(-1));
    assert_eq!(build_basis(0, NodeFamily::GaussLobatto).unwrap_err(), BasisError::LobattoDegreeZero);
    assert!(build_basis(0, NodeFamily::Gauss).is_ok());
}

#[test]
fn lobatto_traces_are_selectors() {
    for n in 1..=12 {
        let b = build_basis(n, NodeFamily::GaussLobatto).unwrap();
        let np = b.np();
        for j in 0..np {
            assert_eq!(b.l_left[j], if j == 0 { 1.0 } else { 0.0 });
            assert_eq!(b.l_right[j], if j == np - 1 { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn gauss_traces_interpolate() {
    let b = build_basis(5, NodeFamily::Gauss).unwrap();
    // l_right . x^3 = 1, l_left . x^3 = -1
    let r: f64 = b.l_right.iter().zip(&b.nodes).map(|(l, x)| l * x.powi(3)).sum();
    let l: f64 = b.l_left.iter().zip(&b.nodes).map(|(l, x)| l * x.powi(3)).sum();
    assert!(close(r, 1.0, 1e-13) && close(l, -1.0, 1e-13));
}

#[test]
fn power_kernel_examples() {
    let k = svv_kernel(4, KernelSpec::Power { p: 1.0 }).unwrap();
    assert_eq!(k.q, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let k = svv_kernel(4, KernelSpec::Power { p: 0.0 }).unwrap();
    assert_eq!(k.q, vec![1.0; 5]);
    let k = svv_kernel(4, KernelSpec::Power { p: 1000.0 }).unwrap();
    for q in &k.q[..4] {
        assert!(*q < 1e-12);
    }
    assert_eq!(k.q[4], 1.0);
    assert_eq!(svv_kernel(0, KernelSpec::Power { p: 1.0 }).unwrap_err(), BasisError::PowerKernelDegreeZero);
}

#[test]
fn exponential_kernel() {
    let k = svv_kernel(8, KernelSpec::Exponential { m: 3 }).unwrap();
    for q in &k.q[..=3] {
        assert_eq!(*q, 0.0);
    }
    assert_eq!(k.q[8], 1.0);
    assert!(k.q.iter().all(|&q| (0.0..=1.0).contains(&q)));
    assert!(k.q.windows(2).all(|w| w[1] >= w[0]));
    assert!(svv_kernel(4, KernelSpec::Exponential { m: 4 }).is_err());
}

#[test]
fn filter_identity_and_constant_removal() {
    let b = build_basis(5, NodeFamily::GaussLobatto).unwrap();
    let one = svv_kernel(5, KernelSpec::Power { p: 0.0 }).unwrap();
    let v: Vec<f64> = b.nodes.iter().map(|x| x.sin() + 0.3).collect();
    let out = apply_modal_filter(&b, &one, &v).unwrap();
    for (a, c) in out.iter().zip(&v) {
        assert!(close(*a, *c, 1e-13));
    }

    // N=2, Q = {0,1,1}: explicit 3x3 product V diag(Q) Vinv on the constant
    let b = build_basis(2, NodeFamily::GaussLobatto).unwrap();
    let k = SvvKernel { spec: KernelSpec::Power { p: 1.0 }, q: vec![0.0, 1.0, 1.0] };
    let f = b.filter_matrix(&k).unwrap();
    for i in 0..3 {
        let row: f64 = (0..3).map(|j| f[(i, j)]).sum();
        assert!(row.abs() < 1e-14);
    }
    let out = apply_modal_filter(&b, &k, &[1.0, 1.0, 1.0]).unwrap();
    assert!(out.iter().all(|x| x.abs() < 1e-14));
    assert!(matches!(apply_modal_filter(&b, &k, &[1.0]), Err(BasisError::DimensionMismatch { .. })));
}

#[test]
fn filter_scales_single_mode() {
    let n = 6;
    for fam in [NodeFamily::Gauss, NodeFamily::GaussLobatto] {
        let b = build_basis(n as i64, fam).unwrap();
        let k = svv_kernel(n, KernelSpec::Power { p: 1.5 }).unwrap();
        for mode in 0..=n {
            let v: Vec<f64> = b.nodes.iter().map(|&x| orthonormal_legendre(mode, x)).collect();
            let out = apply_modal_filter(&b, &k, &v).unwrap();
            for (a, c) in out.iter().zip(&v) {
                assert!(close(*a, k.q[mode] * c, 1e-12));
            }
        }
    }
}

#[test]
fn zero_one_filter_is_idempotent() {
    let b = build_basis(4, NodeFamily::GaussLobatto).unwrap();
    let k = SvvKernel { spec: KernelSpec::Power { p: 1.0 }, q: vec![0.0, 1.0, 0.0, 1.0, 1.0] };
    let v = [0.3, -1.0, 2.0, 0.5, 0.1];
    let once = apply_modal_filter(&b, &k, &v).unwrap();
    let twice = apply_modal_filter(&b, &k, &once).unwrap();
    for (a, c) in once.iter().zip(&twice) {
        assert!(close(*a, *c, 1e-13));
    }
}

proptest! {
    #[test]
    fn basis_invariants(n in 1i64..=20, lobatto in any::<bool>()) {
        let fam = if lobatto { NodeFamily::GaussLobatto } else { NodeFamily::Gauss };
        let b = build_basis(n, fam).unwrap();
        let np = b.np();
        prop_assert!(close(b.weights.iter().sum::<f64>(), 2.0, 1e-13));
        prop_assert!(b.weights.iter().all(|&w| w > 0.0));
        prop_assert!(b.nodes.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(b.nodes.iter().all(|x| (-1.0..=1.0).contains(x)));
        for i in 0..np {
            let s0: f64 = (0..np).map(|j| b.d[(i, j)]).sum();
            let s1: f64 = (0..np).map(|j| b.d[(i, j)] * b.nodes[j]).sum();
            prop_assert!(s0.abs() < 1e-10);
            prop_assert!(close(s1, 1.0, 1e-10));
        }
        let id = &b.vinv * &b.v;
        for i in 0..np {
            for j in 0..np {
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!(close(id[(i, j)], e, 1e-12));
            }
        }
    }

    #[test]
    fn differentiation_exact_for_monomials(n in 1i64..=14, lobatto in any::<bool>()) {
        let fam = if lobatto { NodeFamily::GaussLobatto } else { NodeFamily::Gauss };
        let b = build_basis(n, fam).unwrap();
        let np = b.np();
        for j in 0..=n as i32 {
            for i in 0..np {
                let du: f64 = (0..np).map(|m| b.d[(i, m)] * b.nodes[m].powi(j)).sum();
                let exact = if j == 0 { 0.0 } else { j as f64 * b.nodes[i].powi(j - 1) };
                prop_assert!((du - exact).abs() < 1e-10, "j={} err={:e}", j, du - exact);
            }
        }
    }

    #[test]
    fn quadrature_exactness(n in 1i64..=16, lobatto in any::<bool>()) {
        let fam = if lobatto { NodeFamily::GaussLobatto } else { NodeFamily::Gauss };
        let b = build_basis(n, fam).unwrap();
        let top = if lobatto { 2 * n - 1 } else { 2 * n + 1 };
        for j in 0..=top as i32 {
            let q: f64 = b.weights.iter().zip(&b.nodes).map(|(w, x)| w * x.powi(j)).sum();
            let exact = if j % 2 == 1 { 0.0 } else { 2.0 / (j as f64 + 1.0) };
            let scale = exact.abs().max(1.0);
            prop_assert!((q - exact).abs() / scale < 1e-12, "j={} err={:e}", j, q - exact);
        }
    }

    #[test]
    fn filter_self_adjoint(n in 1usize..=12, p in 0.0f64..8.0,
                           u in proptest::collection::vec(-1.0f64..1.0, 13),
                           v in proptest::collection::vec(-1.0f64..1.0, 13)) {
        let b = build_basis(n as i64, NodeFamily::GaussLobatto).unwrap();
        let k = svv_kernel(n, KernelSpec::Power { p }).unwrap();
        let (u, v) = (&u[..=n], &v[..=n]);
        let fu = apply_modal_filter(&b, &k, u).unwrap();
        let fv = apply_modal_filter(&b, &k, v).unwrap();
        let ip = |a: &[f64], c: &[f64]| -> f64 { a.iter().zip(c).zip(&b.weights).map(|((x, y), w)| x * y * w).sum() };
        prop_assert!((ip(&fu, v) - ip(u, &fv)).abs() < 1e-12);
    }

    #[test]
    fn power_kernel_monotone(n in 1usize..=20, p in 0.0f64..50.0) {
        let k = svv_kernel(n, KernelSpec::Power { p }).unwrap();
        prop_assert!(k.q.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(k.q[n], 1.0);
    }
}
