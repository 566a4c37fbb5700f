use holonomy_lab::geom::{check_riemann_symmetries, ricci_contract, split_plane, Covectors, HessTerm, GradTerm, FrameIndexSet};
use holonomy_lab::stenzel::{spherical_gauge, Stenzel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graphical_plane(frame: FrameIndexSet, tilt: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..frame.n)
        .map(|i| {
            let mut v = vec![0.0; frame.dim()];
            v[i] = 1.0;
            for a in 0..frame.dim() {
                v[a] += tilt * rng.gen_range(-1.0..1.0);
            }
            v
        })
        .collect()
}

#[test]
fn ricci_flat_for_small_n() {
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        for &r in &[0.05, 0.3, 0.5, 0.9, 1.7, 3.0] {
            let s = st.radial_state(r).unwrap();
            let rm = st.curvature(&s).unwrap();
            let ric = ricci_contract(&rm);
            assert!(ric.amax() < 1e-9, "n={n} r={r} ric={}", ric.amax());
            assert!(check_riemann_symmetries(&rm, Some(&st.complex_structure())).max() < 1e-10);
        }
    }
}

#[test]
fn engine_matches_series_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        let s = st.radial_state(0.6).unwrap();
        let conn = st.connection(&s);
        let table: Covectors = st.covectors();
        let grad = st.grad_omega_terms(&s);
        let hess = st.hess_omega_terms(&s);
        for _ in 0..5 {
            let plane = random_graphical_plane(st.frame(), 0.4, &mut rng);
            let sp = split_plane(&plane, st.frame()).unwrap();
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let refs: Vec<&[f64]> = sp.e.iter().map(|v| v.as_slice()).collect();
            let g1 = conn.grad_omega(&x, &refs);
            let g2 = GradTerm::sum_eval(&grad, &table, &x, &sp.e).re;
            let h1 = conn.hess_trace(&sp.e);
            let h2 = HessTerm::sum_trace(&hess, &table, &sp.e).re;
            assert!((g1 - g2).abs() < 1e-12);
            assert!((h1 - h2).abs() < 1e-10);
        }
    }
}

#[test]
fn series_and_quadrature_agree() {
    for n in 2..=5 {
        let st = Stenzel::new(n).unwrap();
        for &r in &[1e-3, 0.1, 0.49, 0.5, 0.51, 1.0, 2.0, 5.0] {
            let (hp, _, _) = st.hprime(r).unwrap();
            let q = st.hprime_by_quadrature(r).unwrap();
            assert!((hp - q).abs() < 1e-11 * hp, "n={n} r={r} {hp} {q}");
        }
    }
}

fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

#[test]
fn hprime_reference_values() {
    let s2 = Stenzel::new(2).unwrap();
    assert_eq!(s2.hprime(0.0).unwrap().0, 0.0);
    // (h')² = 16 ∫ sinh 2u = 8 (cosh 2 - 1) = 16 sinh² 1
    let (hp, hpp, _) = s2.hprime(1.0).unwrap();
    assert!((hp - 4.0 * 1f64.sinh()).abs() < 1e-13);
    assert!((hpp - 4.0 * 1f64.cosh()).abs() < 1e-13);
    for n in 2..=5 {
        let st = Stenzel::new(n).unwrap();
        let nf = n as f64;
        let r = 1e-3;
        let hp = st.hprime(r).unwrap().0;
        let series = 4.0 * r * (1.0 + 2.0 * (nf - 1.0) * r * r / (3.0 * (nf + 2.0)));
        assert!((hp - series).abs() < 1e-11 * r, "n={n}");
    }
    assert!(s2.hprime(-0.1).is_err());
}

#[test]
fn radial_state_limits() {
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        let nf = n as f64;
        let zero = st.radial_state(0.0).unwrap();
        assert!(zero.on_zero_section && zero.a == 1.0 && zero.c == 1.0 && zero.b == 0.0);
        let r = 1e-4;
        let s = st.radial_state(r).unwrap();
        assert!((s.a - 1.0).abs() < 1e-7 && (s.c - 1.0).abs() < 1e-7);
        assert!((s.b / r - 1.0).abs() < 1e-7);
        assert!((s.conn_a / r + nf / (nf + 2.0)).abs() < 1e-6);
        assert!((s.conn_c / r + 2.0 / (nf + 2.0)).abs() < 1e-6);
        assert!((s.conn_b * r + 1.0).abs() < 1e-6);
    }
}

#[test]
fn coefficient_identities_on_log_grid() {
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        for r in log_grid(1e-4, 3.0, 120) {
            let res = st.identity_residual(&st.radial_state(r).unwrap()).unwrap();
            assert!(res.max() < 1e-10, "n={n} r={r} {res:?}");
        }
    }
    assert!(Stenzel::new(2).unwrap().identity_residual(&Stenzel::new(2).unwrap().radial_state(0.0).unwrap()).is_err());
}

#[test]
fn derivative_formulas_match_differences() {
    for (n, r) in [(2, 0.7), (4, 1.5), (3, 0.9)] {
        let st = Stenzel::new(n).unwrap();
        let s = st.radial_state(r).unwrap();
        let res = st.derivative_residual(&s, 1e-4).unwrap();
        assert!(res.max() < 1e-6 && !res.step_warning, "n={n} {res:?}");
    }
    let st = Stenzel::new(2).unwrap();
    let near = st.radial_state(1e-3).unwrap();
    assert!(st.derivative_residual(&near, 1e-2).is_err());
    assert!(st.derivative_residual(&st.radial_state(0.7).unwrap(), 1e-8).unwrap().step_warning);
    let zero = st.radial_state(0.0).unwrap();
    assert_eq!(zero.conn_a_dot, -0.5);
    // −nBC + A(A+B+C) at small ρ
    let s = st.radial_state(1e-5).unwrap();
    assert!((s.conn_a_dot + 0.5).abs() < 1e-4);
}

#[test]
fn coefficient_ratios() {
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        let nf = n as f64;
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 101.0).collect();
        let rep = st.coefficient_sweep(&grid).unwrap();
        assert!(rep.all_negative);
        assert!(rep.k_empirical.is_finite() && rep.k_empirical < 10.0);
        let s = st.radial_state_at_rho(1e-3).unwrap();
        assert!((s.conn_a.abs() / s.rho / (nf / (nf + 2.0)) - 1.0).abs() < 0.01);
        assert!((s.conn_c.abs() / s.rho / (2.0 / (nf + 2.0)) - 1.0).abs() < 0.01);
        assert!((s.conn_b.abs() * s.rho - 1.0).abs() < 0.01);
    }
    assert!(Stenzel::new(2).unwrap().coefficient_sweep(&[0.5, 1.0]).is_err());
}

#[test]
fn curvature_on_approach_to_zero_section() {
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        let rm = st.curvature(&st.radial_state(1e-5).unwrap()).unwrap();
        assert!((rm.get(0, 1, 0, 1) - 1.0).abs() < 1e-4, "n={n}");
        // no 𝓗𝓥𝓥𝓥 components
        for a in 0..n {
            for b in n..2 * n {
                for c in n..2 * n {
                    for d in n..2 * n {
                        assert_eq!(rm.get(a, b, c, d), 0.0);
                    }
                }
            }
        }
    }
    assert!(Stenzel::new(2).unwrap().curvature(&Stenzel::new(2).unwrap().radial_state(0.0).unwrap()).is_err());
}

#[test]
fn hessian_of_psi_is_positive() {
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        for i in 1..=100 {
            let r = 2.0 * i as f64 / 100.0;
            let h = st.hessian_psi(&st.radial_state(r).unwrap());
            assert_eq!(h.diag[n], 2.0);
            assert!(h.min() > 0.0, "n={n} r={r}");
        }
        let h = st.hessian_psi(&st.radial_state_at_rho(1e-4).unwrap());
        assert!((h.diag[n + 1] - 2.0).abs() < 1e-6);
        let z = st.hessian_psi(&st.radial_state(0.0).unwrap());
        assert!(z.limit && z.diag[0] == 0.0 && z.diag[n + 1] == 2.0);
    }
}

#[test]
fn gradient_vanishes_on_zero_section_and_along_radial_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        let s = st.radial_state(0.5).unwrap();
        let conn = st.connection(&s);
        let mut x = vec![0.0; 2 * n];
        x[n] = 1.0;
        for _ in 0..5 {
            let plane = random_graphical_plane(st.frame(), 0.5, &mut rng);
            let refs: Vec<&[f64]> = plane.iter().map(|v| v.as_slice()).collect();
            assert!(conn.grad_omega(&x, &refs).abs() < 1e-14);
        }
        let terms = st.grad_omega_terms(&st.radial_state(1e-12).unwrap());
        let y: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plane = random_graphical_plane(st.frame(), 0.5, &mut rng);
        assert!(GradTerm::sum_eval(&terms, &st.covectors(), &y, &plane).norm() < 1e-10);
    }
}

#[test]
fn horizontal_plane_trace_is_negative() {
    for n in 2..=4 {
        let st = Stenzel::new(n).unwrap();
        for r in [0.05, 0.3, 0.8] {
            let conn = st.connection(&st.radial_state(r).unwrap());
            let plane: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut v = vec![0.0; 2 * n];
                    v[i] = 1.0;
                    v
                })
                .collect();
            assert!(conn.hess_trace(&plane) < 0.0, "n={n} r={r}");
        }
    }
}

#[test]
fn spherical_gauge_is_orthogonal_with_radial_first_row() {
    let t = spherical_gauge(&[2.5, 0.0, 0.0]).unwrap();
    assert!((t - nalgebra::DMatrix::identity(3, 3)).amax() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 2..=5 {
        for _ in 0..20 {
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let t = spherical_gauge(&y).unwrap();
            assert!((&t * t.transpose() - nalgebra::DMatrix::identity(n, n)).amax() < 1e-14);
            for (k, v) in y.iter().enumerate() {
                assert!((t[(0, k)] - v / r).abs() < 1e-15);
            }
        }
    }
    assert!(spherical_gauge(&[0.0, 0.0]).is_err());
}
