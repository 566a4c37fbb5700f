use holonomy_lab::bryant_salamon::{BSRadialState, BSSpace, BSSpaceId, HessCoefficients};
use holonomy_lab::geom::{check_riemann_symmetries, ricci_contract, GradTerm, HessTerm};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KAPPAS: [f64; 3] = [0.5, 1.0, 2.0];

fn spaces() -> impl Iterator<Item = BSSpace> {
    KAPPAS
        .into_iter()
        .flat_map(|k| BSSpaceId::ALL.into_iter().map(move |id| BSSpace::new(id, k).unwrap()))
}

fn random_fiber(m: usize, max_s: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = rng.gen_range(0.0..max_s).sqrt();
    y.iter().map(|v| v * target / r).collect()
}

fn tilted_plane(d: usize, n: usize, tilt: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            for x in v.iter_mut() {
                *x += tilt * rng.gen_range(-1.0..1.0);
            }
            v
        })
        .collect()
}

#[test]
fn spinor_values_at_zero_section() {
    let sp = BSSpace::new(BSSpaceId::SpinorS3, 1.0).unwrap();
    let st = sp.alpha_beta(0.0).unwrap();
    assert!((st.alpha - 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(st.beta, 2.0);
    for k in KAPPAS {
        let sp = BSSpace::new(BSSpaceId::SpinorS3, k).unwrap();
        for s in [0.0, 0.7, 3.0] {
            let st = sp.alpha_beta(s).unwrap();
            let ratio = (st.alpha / st.beta).powi(2);
            assert!((ratio - 0.75 * k * (1.0 + s)).abs() < 1e-13 * ratio);
        }
        assert!((2.0 * (sp.kappa1 + sp.kappa2) - 0.75 * k).abs() < 1e-15);
    }
}

#[test]
fn dimensions_and_constants() {
    let k = 1.7;
    let want = [
        (BSSpaceId::SpinorS3, 3, 4, k / 4.0, k / 8.0),
        (BSSpaceId::AsdS4, 4, 3, k / 2.0, k / 2.0),
        (BSSpaceId::AsdCP2, 4, 3, k / 2.0, k / 2.0),
        (BSSpaceId::NegSpinorS4, 4, 4, 3.0 * k / 8.0, k / 4.0),
    ];
    for (id, n, m, k1, k2) in want {
        let sp = BSSpace::new(id, k).unwrap();
        assert_eq!((sp.n, sp.m), (n, m));
        assert_eq!((sp.kappa1, sp.kappa2), (k1, k2));
        assert_eq!(BSSpaceId::parse(id.name()).unwrap(), id);
    }
    assert!(BSSpace::new(BSSpaceId::AsdS4, 0.0).is_err());
    assert!(BSSpace::new(BSSpaceId::AsdS4, 1.0).unwrap().alpha_beta(-1e-3).is_err());
}

#[test]
fn ode_and_relations() {
    let grid: Vec<f64> = (0..=100).map(|i| 0.05 * i as f64).collect();
    for sp in spaces() {
        let rep = sp.relation_checks(&grid, 1e-5).unwrap();
        assert!(rep.ode_alpha < 1e-12 && rep.ode_beta < 1e-12, "{:?} {rep:?}", sp.id);
        assert!(rep.ratio_identity < 1e-12, "{:?} {rep:?}", sp.id);
        assert!(rep.beta_over_alpha2_fd < 1e-8, "{:?} {rep:?}", sp.id);
        assert!(rep.hessian_condition_holds(), "{:?} {rep:?}", sp.id);
    }
}

#[test]
fn curvature_tables_of_bundles() {
    for sp in spaces() {
        let f = sp.f_matrix();
        assert_eq!(f.skew_defect(), 0.0);
        let k = sp.kappa;
        for mu in 0..sp.m {
            for nu in 0..sp.m {
                for i in 0..sp.n {
                    for j in 0..sp.n {
                        let v = f.get(mu, nu, i, j);
                        let allowed = [0.0, k / 2.0, -k / 2.0, k, -k];
                        assert!(allowed.contains(&v), "{:?} entry {v}", sp.id);
                    }
                }
            }
        }
        if sp.id == BSSpaceId::SpinorS3 {
            assert_eq!(f.get(1, 3, 0, 2), k / 2.0);
        }
        if matches!(sp.id, BSSpaceId::AsdS4 | BSSpaceId::AsdCP2) {
            assert_eq!(f.get(0, 1, 0, 3), -k);
            assert_eq!(f.get(0, 1, 1, 2), k);
            // anti-self-dual: F_{12} = −F_{34}, F_{13} = F_{24}, F_{14} = −F_{23}
            for mu in 0..3 {
                for nu in 0..3 {
                    let g = |i, j| f.get(mu, nu, i, j);
                    assert_eq!(g(0, 1), -g(2, 3));
                    assert_eq!(g(0, 2), g(1, 3));
                    assert_eq!(g(0, 3), -g(1, 2));
                }
            }
        }
    }
}

#[test]
fn bundle_curvature_is_parallel() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sp in spaces() {
        assert_eq!(sp.nabla_af_residual(), 0.0);
        let n = sp.n;
        for _ in 0..5 {
            let mut w = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = rng.gen_range(-1.0..1.0);
                    w[(i, j)] = v;
                    w[(j, i)] = -v;
                }
            }
            let f = sp.f_matrix();
            assert!(sp.nabla_af_residual_with(&f, &w) < 1e-14);
            // a flipped fiber action is not a homomorphism
            let mut r_flip = 0.0;
            let a = sp.fiber_action(&w);
            for mu in 0..sp.m {
                for nu in 0..sp.m {
                    for j in 0..n {
                        for k in 0..n {
                            let mut v = 0.0;
                            for g in 0..sp.m {
                                v -= a[(mu, g)] * f.get(g, nu, j, k) - f.get(mu, g, j, k) * a[(g, nu)];
                            }
                            for i in 0..n {
                                v -= f.get(mu, nu, i, k) * w[(i, j)] + f.get(mu, nu, j, i) * w[(i, k)];
                            }
                            r_flip = f64::max(r_flip, v.abs());
                        }
                    }
                }
            }
            assert!(r_flip > 1e-3);

            let perturbed = |delta: f64| {
                let mut g = f.clone();
                g.set_raw(0, 1, 0, 1, f.get(0, 1, 0, 1) + delta);
                sp.nabla_af_residual_with(&g, &w)
            };
            let (r1, r2) = (perturbed(1e-3), perturbed(2e-3));
            assert!(r1 > 0.0);
            assert!((r2 / r1 - 2.0).abs() < 1e-6, "{:?} {r1} {r2}", sp.id);
        }
    }
}

#[test]
fn ricci_flat_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sp in spaces() {
        for s in [0.0f64, 0.3, 1.0] {
            let y = random_fiber(sp.m, 1.0, &mut rng);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y: Vec<f64> = if s == 0.0 {
                vec![0.0; sp.m]
            } else {
                y.iter().map(|v| v * s.sqrt() / norm).collect()
            };
            let r = sp.curvature(&y).unwrap();
            let ric = ricci_contract(&r).amax();
            assert!(ric < 1e-12, "{:?} κ={} s={s} ric={ric}", sp.id, sp.kappa);
            assert!(check_riemann_symmetries(&r, None).max() < 1e-12);
            assert_eq!(sp.odd_type_max(&r), 0.0);
        }
    }
}

#[test]
fn vertical_curvature_on_zero_section() {
    for k in KAPPAS {
        let sp = BSSpace::new(BSSpaceId::AsdS4, k).unwrap();
        let r = sp.curvature(&[0.0; 3]).unwrap();
        let a = sp.alpha0;
        let n = sp.n;
        let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
        for mu in 0..3 {
            for nu in 0..3 {
                for g in 0..3 {
                    for e in 0..3 {
                        let want = 4.0 * sp.kappa2 / (a * a) * (d(mu, g) * d(nu, e) - d(mu, e) * d(nu, g));
                        assert!((r.get(n + mu, n + nu, n + g, n + e) - want).abs() < 1e-14);
                    }
                }
            }
        }
    }
}

#[test]
fn connection_at_zero_section_and_skew() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for sp in spaces() {
        let g = sp.connection_sample(&vec![0.0; sp.m]).unwrap();
        let n = sp.n;
        for mu in 0..sp.m {
            for i in 0..n {
                for c in 0..n + sp.m {
                    assert_eq!(g.gamma(i, n + mu, c), 0.0);
                }
            }
        }
        let y = random_fiber(sp.m, 1.0, &mut rng);
        assert_eq!(sp.connection_sample(&y).unwrap().skew_defect(), 0.0);
        assert!(sp.grad_omega_terms(&vec![0.0; sp.m]).unwrap().is_empty());
    }
}

#[test]
fn hessian_of_s() {
    for sp in spaces() {
        let h0 = sp.hessian_s(&vec![0.0; sp.m]).unwrap();
        let b0 = sp.beta0;
        for a in 0..sp.n + sp.m {
            for b in 0..sp.n + sp.m {
                let want = if a == b && a >= sp.n { 2.0 / (b0 * b0) } else { 0.0 };
                assert!((h0.matrix[a][b] - want).abs() < 1e-15);
            }
        }
        for i in 1..=100 {
            let s = 0.05 * i as f64;
            let mut y = vec![0.0; sp.m];
            y[0] = (0.6 * s).sqrt();
            y[sp.m - 1] = (0.4 * s).sqrt();
            let h = sp.hessian_s(&y).unwrap();
            let min = h.min_eigenvalue();
            assert!(min > 0.0, "{:?} s={s}", sp.id);
            assert!(min >= h.bound * (1.0 - 1e-12), "{:?} s={s} {min} {}", sp.id, h.bound);
        }
    }
}

#[test]
fn horizontal_bound_with_beta_over_alpha_cubed_fails_for_spinor_bundle() {
    let sp = BSSpace::new(BSSpaceId::SpinorS3, 1.0).unwrap();
    let y = [0.3, 0.0, 0.0, 0.0];
    let h = sp.hessian_s(&y).unwrap();
    assert!(h.bound_beta_alpha3 > h.min_eigenvalue());
    assert!(h.bound <= h.min_eigenvalue() * (1.0 + 1e-12));
}

#[test]
fn rank_one_block_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in [3, 4] {
        let y = random_fiber(m, 2.0, &mut rng);
        let s: f64 = y.iter().map(|v| v * v).sum();
        let yy = DMatrix::from_fn(m, m, |a, b| y[a] * y[b]);
        let mut e: Vec<f64> = yy.symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        assert!((e[m - 1] - s).abs() < 1e-14);
        assert!(e[..m - 1].iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn violating_profile_loses_convexity() {
    let sp = BSSpace::new(BSSpaceId::AsdS4, 1.0).unwrap();
    let y = [0.5, 0.5, 0.0];
    let s = 0.5;
    let st = BSRadialState {
        s,
        alpha: 1.0,
        beta: 1.0,
        dalpha: 0.2,
        dbeta: -1.2,
        ddalpha: 0.0,
        ddbeta: 0.0,
    };
    assert!(st.beta <= 2.0 * s * st.dbeta.abs());
    assert!(sp.hessian_s_from(&st, &y).min_eigenvalue() <= 0.0);
    let flat = BSRadialState { dalpha: 0.0, dbeta: 0.0, ..st };
    assert!(sp.hessian_s_from(&flat, &y).min_eigenvalue() <= 0.0);
}

#[test]
fn engine_matches_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for sp in spaces() {
        let d = sp.n + sp.m;
        let table = sp.covectors();
        for _ in 0..3 {
            let y = random_fiber(sp.m, 1.0, &mut rng);
            let conn = sp.connection_sample(&y).unwrap();
            let vs = tilted_plane(d, sp.n, 0.4, &mut rng);
            let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g1 = conn.grad_omega(&x, &refs);
            let g2 = GradTerm::sum_eval(&sp.grad_omega_terms(&y).unwrap(), &table, &x, &vs);
            assert!((g1 - g2.re).abs() < 1e-13 && g2.im == 0.0);
            let h1 = conn.hess_trace(&vs);
            let h2 = HessTerm::sum_trace(&sp.hess_omega_terms(&y).unwrap(), &table, &vs).re;
            assert!((h1 - h2).abs() < 1e-12 * (1.0 + h1.abs()), "{:?} {h1} {h2}", sp.id);
        }
    }
}

#[test]
fn other_coefficients_disagree_with_engine() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for id in BSSpaceId::ALL {
        let sp = BSSpace::new(id, 1.0).unwrap();
        let y = random_fiber(sp.m, 1.0, &mut rng);
        let st = sp.state_at(&y).unwrap();
        let vs = tilted_plane(sp.n + sp.m, sp.n, 0.4, &mut rng);
        let engine = sp.connection_sample(&y).unwrap().hess_trace(&vs);
        let alt = HessCoefficients {
            ff: st.beta * st.beta / (4.0 * st.alpha * st.alpha),
            yf: st.dalpha / (st.alpha * st.alpha),
        };
        let other = HessTerm::sum_trace(&sp.hess_omega_terms_with(&st, &y, alt), &sp.covectors(), &vs).re;
        assert!((engine - other).abs() > 1e-4, "{id:?}");
    }
}

#[test]
fn first_block_nonpositive_and_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for sp in spaces() {
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..20 {
            let y = random_fiber(sp.m, 1.0, &mut rng);
            let s: f64 = y.iter().map(|v| v * v).sum();
            let b = sp.hess_first_block(&y).unwrap();
            let e = b.clone().symmetric_eigen().eigenvalues;
            assert!(e.max() < 1e-14);
            worst_ratio = worst_ratio.max(b.amax() / s);
        }
        assert!(worst_ratio < 10.0 * sp.kappa.max(1.0));
    }
}

#[test]
fn gradient_of_omega_is_order_sqrt_s() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for sp in spaces() {
        let d = sp.n + sp.m;
        let mut k_emp: f64 = 0.0;
        for _ in 0..50 {
            let y = random_fiber(sp.m, 1.0, &mut rng);
            let s: f64 = y.iter().map(|v| v * v).sum();
            let conn = sp.connection_sample(&y).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            k_emp = k_emp.max(conn.grad_omega_norm(&x) / (s.sqrt() * xn));
        }
        assert!(k_emp.is_finite() && k_emp < 10.0, "{:?} {k_emp}", sp.id);
    }
}
