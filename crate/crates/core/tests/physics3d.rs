use dglab::physics3d::*;
use proptest::prelude::*;

fn gas() -> GasModel {
    GasModel::default()
}

fn prim(rho: f64, v: [f64; 3], p: f64) -> ConsState {
    ConsState::from_primitive(rho, v, p, &gas())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn normal_flux(q: &ConsState, n: &[f64; 3]) -> [f64; 5] {
    let f = euler_flux(q, &gas()).unwrap();
    let mut out = [0.0; 5];
    for r in 0..5 {
        out[r] = (0..3).map(|d| f.0[r][d] * n[d]).sum();
    }
    out
}

fn entropy_variables(q: &ConsState) -> [f64; 5] {
    let g = gas().gamma;
    let w = q.primitive(&gas()).unwrap();
    let s = (w.p * w.rho.powf(-g)).ln();
    let beta = w.rho / w.p;
    let v2 = w.v.iter().map(|x| x * x).sum::<f64>();
    [(g - s) / (g - 1.0) - 0.5 * beta * v2, beta * w.v[0], beta * w.v[1], beta * w.v[2], -beta]
}

#[test]
fn quiescent_flux_is_pressure_only() {
    let g = gas();
    let q = prim(1.0, [0.0; 3], g.p0());
    let f = euler_flux(&q, &g).unwrap();
    for d in 0..3 {
        assert_eq!(f.0[0][d], 0.0);
        assert_eq!(f.0[4][d], 0.0);
        for i in 0..3 {
            let e = if i == d { g.p0() } else { 0.0 };
            assert!((f.0[1 + i][d] - e).abs() < 1e-12);
        }
    }
    assert!((g.p0() - 1.0 / (1.4 * 0.01)).abs() < 1e-12);
}

#[test]
fn mass_flux_is_momentum() {
    let q = prim(1.3, [1.0, 0.0, 0.0], 50.0);
    let f = euler_flux(&q, &gas()).unwrap();
    assert!((f.0[0][0] - 1.3).abs() < 1e-14);
    assert_eq!(f.0[0][1], 0.0);
}

#[test]
fn non_physical_states_rejected() {
    let g = gas();
    assert!(matches!(euler_flux(&ConsState([-1.0, 0.0, 0.0, 0.0, 1.0]), &g), Err(PhysicsError::NonPhysical { .. })));
    assert!(matches!(euler_flux(&ConsState([1.0, 2.0, 0.0, 0.0, 1.0]), &g), Err(PhysicsError::NonPhysical { .. })));
    let bad = ConsState([1.0, 0.0, 0.0, 0.0, -1.0]);
    assert!(riemann_flux(&bad, &prim(1.0, [0.0; 3], 1.0), &[1.0, 0.0, 0.0], 1.0, &g).is_err());
}

#[test]
fn pirozzoli_pressure_only_jump_by_hand() {
    // rho = 1.2, v = (0.5, -0.2, 0.1), p_L = 60, p_R = 70, direction x
    let g = gas();
    let (ql, qr) = (prim(1.2, [0.5, -0.2, 0.1], 60.0), prim(1.2, [0.5, -0.2, 0.1], 70.0));
    let f = two_point_flux(&ql, &qr, 0, &g).unwrap();
    let ke = 0.5 * (0.25 + 0.04 + 0.01);
    let hl = 3.5 * 60.0 / 1.2 + ke;
    let hr = 3.5 * 70.0 / 1.2 + ke;
    assert!((f[0] - 0.6).abs() < 1e-14);
    assert!((f[1] - (0.6 * 0.5 + 65.0)).abs() < 1e-12);
    assert!((f[2] - 0.6 * -0.2).abs() < 1e-14);
    assert!((f[3] - 0.6 * 0.1).abs() < 1e-14);
    assert!((f[4] - 0.6 * 0.5 * (hl + hr)).abs() < 1e-11);
}

#[test]
fn roe_zero_without_jump() {
    let q = prim(0.9, [0.3, 0.1, -0.4], 70.0);
    let d = roe_dissipation(&q, &q, &[0.0, 0.6, 0.8], &gas()).unwrap();
    assert!(d.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn roe_supersonic_is_upwind() {
    let g = gas();
    let n = [0.6, 0.0, 0.8];
    // c ~ sqrt(1.4 * 1 / 1) ~ 1.18, normal speed ~ 3
    let ql = prim(1.0, [1.8, 0.3, 2.4], 1.0);
    let qr = prim(1.1, [1.7, 0.2, 2.5], 0.9);
    let f = riemann_flux(&ql, &qr, &n, 1.0, &g).unwrap();
    let exact = normal_flux(&ql, &n);
    assert!(max_diff(&f, &exact) < 1e-12 * exact.iter().map(|x| x.abs()).fold(1.0, f64::max));

    // reversed flow takes the right state
    let n = [-0.6, 0.0, -0.8];
    let f = riemann_flux(&ql, &qr, &n, 1.0, &g).unwrap();
    let exact = normal_flux(&qr, &n);
    assert!(max_diff(&f, &exact) < 1e-12 * exact.iter().map(|x| x.abs()).fold(1.0, f64::max));
}

#[test]
fn roe_density_jump_is_entropy_wave() {
    // equal pressure and velocity: only the entropy wave carries the jump,
    // diss = 1/2 |u.n| drho (1, u, |u|^2 / 2)
    let g = gas();
    let u = [0.4, -0.1, 0.2];
    let n = [1.0, 0.0, 0.0];
    let d = roe_dissipation(&prim(1.0, u, 71.4), &prim(1.25, u, 71.4), &n, &g).unwrap();
    let k = 0.5 * 0.4 * 0.25;
    let ke = 0.5 * (0.16 + 0.01 + 0.04);
    let expect = [k, k * u[0], k * u[1], k * u[2], k * ke];
    assert!(max_diff(&d, &expect) < 1e-12, "{d:?}");

    // at rest the entropy wave does not move and nothing is dissipated
    let d = roe_dissipation(&prim(1.0, [0.0; 3], 71.4), &prim(1.25, [0.0; 3], 71.4), &n, &g).unwrap();
    assert!(d.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn riemann_lambda_limits() {
    let g = gas();
    let n = [0.0, 1.0, 0.0];
    let ql = prim(1.0, [0.1, 0.2, 0.3], 71.0);
    let qr = prim(1.1, [-0.1, 0.4, 0.0], 72.0);
    let f0 = riemann_flux(&ql, &qr, &n, 0.0, &g).unwrap();
    let avg: Vec<f64> = normal_flux(&ql, &n).iter().zip(normal_flux(&qr, &n)).map(|(a, b)| 0.5 * (a + b)).collect();
    assert!(max_diff(&f0, &avg) < 1e-12);
    let f1 = riemann_flux(&ql, &ql, &n, 1.0, &g).unwrap();
    assert!(max_diff(&f1, &normal_flux(&ql, &n)) < 1e-12);
    // linear in lambda
    let fa = riemann_flux(&ql, &qr, &n, 0.1, &g).unwrap();
    let fb = riemann_flux(&ql, &qr, &n, 1.0, &g).unwrap();
    for r in 0..5 {
        assert!((fa[r] - (f0[r] + 0.1 * (fb[r] - f0[r]))).abs() < 1e-10);
    }
}

#[test]
fn viscous_flux_examples() {
    let z = viscous_flux(0.3, 0.5, &[1.0, 2.0, 3.0], &[[0.0; 3]; 3], &[0.0; 3]);
    assert_eq!(z, FluxTensor::zero());

    let s = 2.5;
    let mut gv = [[0.0; 3]; 3];
    gv[0][1] = s;
    let t = viscous_flux(0.1, 0.0, &[0.0; 3], &gv, &[0.0; 3]);
    assert!((t.0[1][1] - 0.1 * s).abs() < 1e-15);
    assert!((t.0[2][0] - 0.1 * s).abs() < 1e-15);
    for i in 0..3 {
        assert_eq!(t.0[1 + i][i], 0.0);
    }

    let d = 0.9;
    let gv = [[d / 3.0, 0.0, 0.0], [0.0, d / 3.0, 0.0], [0.0, 0.0, d / 3.0]];
    let t = viscous_flux(0.7, 0.0, &[0.0; 3], &gv, &[0.0; 3]);
    for i in 0..3 {
        for j in 0..3 {
            assert!(t.0[1 + i][j].abs() < 1e-15);
        }
    }

    // energy row v.tau + kappa grad T
    let mut gv = [[0.0; 3]; 3];
    gv[1][0] = 1.0;
    let t = viscous_flux(0.2, 0.4, &[0.0, 3.0, 0.0], &gv, &[1.0, 0.0, -2.0]);
    assert!((t.0[4][0] - (3.0 * 0.2 + 0.4)).abs() < 1e-14);
    assert!((t.0[4][2] + 0.8).abs() < 1e-14);
    assert_eq!(t.0[0], [0.0; 3]);
}

#[test]
fn svv_flux_examples() {
    // divergence-free field: identity filter reproduces the viscous flux
    let gv = [[0.3, 0.1, 0.0], [-0.2, -0.1, 0.4], [0.5, 0.0, -0.2]];
    let v = [0.2, -0.4, 0.1];
    let gt = [0.1, 0.2, 0.3];
    assert_eq!(svv_flux(0.01, 0.02, &v, &gv, &gt), viscous_flux(0.01, 0.02, &v, &gv, &gt));
    assert_eq!(svv_flux(0.01, 0.02, &v, &[[0.0; 3]; 3], &[0.0; 3]), FluxTensor::zero());
}

#[test]
fn smagorinsky_examples() {
    assert_eq!(smagorinsky_viscosity(&[[0.0; 3]; 3], 1.0), 0.0);
    let s = 1.7;
    let mut gv = [[0.0; 3]; 3];
    gv[0][1] = s;
    assert!((strain_magnitude(&gv) - s).abs() < 1e-14);
    assert!((smagorinsky_viscosity(&gv, 0.3) - 0.04 * 0.09 * s).abs() < 1e-15);
    let rot = [[0.0, 1.0, -2.0], [-1.0, 0.0, 0.5], [2.0, -0.5, 0.0]];
    assert!(smagorinsky_viscosity(&rot, 1.0).abs() < 1e-15);
}

#[test]
fn filter_width_examples() {
    assert!((filter_width(8.0, 1) - 1.0).abs() < 1e-15);
    let h = 2.0 * std::f64::consts::PI / 8.0;
    assert!((filter_width(h * h * h, 3) - h / 4.0).abs() < 1e-14);
    assert!((filter_width(1.0, 0) - 1.0).abs() < 1e-15);
}

#[test]
fn gas_validation() {
    assert!(GasModel { gamma: 1.0, ..gas() }.validate().is_err());
    assert!(GasModel { pr_t: 0.0, ..gas() }.validate().is_err());
    assert!(GasModel { re: Some(-1.0), ..gas() }.validate().is_err());
    assert!(gas().validate().is_ok());
}

#[test]
fn roe_drains_entropy_for_small_jumps() {
    use proptest::test_runner::{Config, TestRunner};
    let mut runner = TestRunner::new(Config { cases: 1000, ..Config::default() });
    let g = gas();
    let strat = (
        (0.8f64..1.2, -0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5, 60.0f64..80.0),
        proptest::array::uniform5(-1e-3f64..1e-3),
        proptest::array::uniform3(-1.0f64..1.0),
    );
    runner
        .run(&strat, |((rho, u, v, w, p), dq, n)| {
            let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            prop_assume!(nn > 0.1);
            let n = [n[0] / nn, n[1] / nn, n[2] / nn];
            let ql = prim(rho, [u, v, w], p);
            let qr = prim(rho * (1.0 + dq[0]), [u + dq[1], v + dq[2], w + dq[3]], p * (1.0 + dq[4]));
            let d = roe_dissipation(&ql, &qr, &n, &g).unwrap();
            let (el, er) = (entropy_variables(&ql), entropy_variables(&qr));
            let drain: f64 = (0..5).map(|r| (er[r] - el[r]) * d[r]).sum();
            prop_assert!(drain > 0.0, "drain {drain:e}");
            Ok(())
        })
        .unwrap();
}

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]];
    let mul = |x: [[f64; 3]; 3], y: [[f64; 3]; 3]| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        m
    };
    mul(rz, mul(ry, rx))
}

fn rot(r: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|j| r[i][j] * v[j]).sum())
}

proptest! {
    #[test]
    fn riemann_rotational_invariance(
        a in 0.0f64..6.3, b in 0.0f64..6.3, c in 0.0f64..6.3, lambda in 0.0f64..10.0,
        vl in proptest::array::uniform3(-1.0f64..1.0), vr in proptest::array::uniform3(-1.0f64..1.0),
        rl in 0.5f64..1.5, rr in 0.5f64..1.5, pl in 50.0f64..90.0, pr in 50.0f64..90.0,
    ) {
        let g = gas();
        let r = rotation(a, b, c);
        let n = [1.0, 0.0, 0.0];
        let f = riemann_flux(&prim(rl, vl, pl), &prim(rr, vr, pr), &n, lambda, &g).unwrap();
        let fr = riemann_flux(&prim(rl, rot(&r, &vl), pl), &prim(rr, rot(&r, &vr), pr), &rot(&r, &n), lambda, &g).unwrap();
        let m = rot(&r, &[f[1], f[2], f[3]]);
        let scale = f.iter().map(|x| x.abs()).fold(1.0, f64::max);
        prop_assert!((fr[0] - f[0]).abs() < 1e-12 * scale);
        prop_assert!((fr[4] - f[4]).abs() < 1e-12 * scale);
        for i in 0..3 {
            prop_assert!((fr[1 + i] - m[i]).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn two_point_flux_symmetric_and_consistent(
        vl in proptest::array::uniform3(-1.0f64..1.0), vr in proptest::array::uniform3(-1.0f64..1.0),
        rl in 0.5f64..1.5, rr in 0.5f64..1.5, pl in 50.0f64..90.0, pr in 50.0f64..90.0, d in 0usize..3,
    ) {
        let g = gas();
        let (ql, qr) = (prim(rl, vl, pl), prim(rr, vr, pr));
        let a = two_point_flux(&ql, &qr, d, &g).unwrap();
        let b = two_point_flux(&qr, &ql, d, &g).unwrap();
        prop_assert!(max_diff(&a, &b) < 1e-14 * a.iter().map(|x| x.abs()).fold(1.0, f64::max));
        let s = two_point_flux(&ql, &ql, d, &g).unwrap();
        let e = euler_flux(&ql, &g).unwrap().column(d);
        prop_assert!(max_diff(&s, &e) < 1e-12 * e.iter().map(|x| x.abs()).fold(1.0, f64::max));
    }

    #[test]
    fn roe_vanishes_only_without_jump(
        v in proptest::array::uniform3(-1.0f64..1.0), rho in 0.5f64..1.5, p in 50.0f64..90.0,
        dq in proptest::array::uniform5(-0.05f64..0.05),
    ) {
        let g = gas();
        let ql = prim(rho, v, p);
        let d0 = roe_dissipation(&ql, &ql, &[0.0, 0.0, 1.0], &g).unwrap();
        prop_assert!(d0.iter().all(|x| *x == 0.0));
        prop_assume!(dq.iter().map(|x| x.abs()).fold(0.0, f64::max) > 1e-3);
        let qr = ConsState([0, 1, 2, 3, 4].map(|r| ql.0[r] + dq[r] * if r == 4 { p } else { 1.0 }));
        let d = roe_dissipation(&ql, &qr, &[0.0, 0.0, 1.0], &g).unwrap();
        prop_assert!(d.iter().map(|x| x.abs()).fold(0.0, f64::max) > 0.0);
    }

    #[test]
    fn smagorinsky_ignores_rotation(
        gv in proptest::array::uniform3(proptest::array::uniform3(-2.0f64..2.0)),
        w in proptest::array::uniform3(-2.0f64..2.0), delta in 0.01f64..1.0,
    ) {
        let skew = [[0.0, w[0], w[1]], [-w[0], 0.0, w[2]], [-w[1], -w[2], 0.0]];
        let mut g2 = gv;
        for i in 0..3 {
            for j in 0..3 {
                g2[i][j] += skew[i][j];
            }
        }
        let a = smagorinsky_viscosity(&gv, delta);
        prop_assert!(a >= 0.0);
        prop_assert!((a - smagorinsky_viscosity(&g2, delta)).abs() < 1e-13 * a.max(1e-300) + 1e-15);
    }
}
