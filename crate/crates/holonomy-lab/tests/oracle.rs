use holonomy_lab::bryant_salamon::{BSSpace, BSSpaceId};
use holonomy_lab::calabi::Calabi;
use holonomy_lab::geom::{ricci_contract, ConnectionSample, RiemannSample};
use holonomy_lab::oracle::*;
use holonomy_lab::stenzel::Stenzel;
use holonomy_lab::LabError;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: &RiemannSample, b: &RiemannSample) -> f64 {
    a.max_diff(b) / b.max_abs()
}

#[test]
fn flat_space_has_no_curvature() {
    let e = Euclidean { dim: 3 };
    let x = [0.3, -1.0, 2.0];
    let g = christoffel_fd(&e, &x, DEFAULT_STEP).unwrap();
    assert!(g.data.iter().all(|v| *v == 0.0));
    assert_eq!(riemann_fd(&e, &x, DEFAULT_STEP).unwrap().max_abs(), 0.0);
}

#[test]
fn sphere_christoffel_symbol() {
    let s2 = FnMetric {
        dim: 2,
        f: |x: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0].sin().powi(2)]),
    };
    for th in [0.4, 1.0, 2.2] {
        let g = christoffel_fd(&s2, &[th, 0.7], DEFAULT_STEP).unwrap();
        assert!((g.get(0, 1, 1) + th.sin() * th.cos()).abs() < 1e-6);
        let d = g.get(1, 0, 1) - th.cos() / th.sin();
        assert!(d.abs() < 1e-6, "{th} {d}");
    }
}

#[test]
fn round_three_sphere_curvature() {
    for kappa in [0.5, 1.0, 2.0] {
        let s3 = RoundSphere { n: 3, kappa };
        let r = riemann_in_frame(&s3, &[1.0, 1.2, 0.3], 1e-3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert!((r.sectional(&unit(3, a), &unit(3, b)) - kappa).abs() < 1e-5);
                }
            }
        }
        let ric = ricci_contract(&r);
        assert!((ric - DMatrix::identity(3, 3) * (2.0 * kappa)).amax() < 1e-5);
    }
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

#[test]
fn step_and_chart_limits() {
    let s3 = RoundSphere { n: 3, kappa: 1.0 };
    assert!(matches!(christoffel_fd(&s3, &[1.0, 1.0, 1.0], 1e-1), Err(LabError::Domain(_))));
    assert!(matches!(s3.coframe(&[0.0, 1.0, 1.0]), Err(LabError::Domain(_))));
    let ch = StenzelChart::new(2).unwrap();
    assert!(ch.coframe(&[1.0, 1.0, 1e-3, 0.0]).is_err());
    assert!(CalabiChart.coframe(&[1.0, 1.0, 0.0, 0.0]).is_err());
    assert!(BSChart::new(BSSpace::new(BSSpaceId::AsdCP2, 1.0).unwrap()).is_err());
}

fn charts() -> Vec<(&'static str, Box<dyn CoframeField>, Vec<f64>)> {
    let bs = BSSpace::new(BSSpaceId::SpinorS3, 1.0).unwrap();
    vec![
        ("stenzel2", Box::new(StenzelChart::new(2).unwrap()), vec![1.1, 0.4, 0.5, 0.3]),
        ("stenzel3", Box::new(StenzelChart::new(3).unwrap()), vec![1.1, 1.4, 0.4, 0.5, 0.3, -0.2]),
        ("calabi1", Box::new(CalabiChart), vec![1.1, 0.4, 0.3, 0.2]),
        ("spinor_s3", Box::new(BSChart::new(bs).unwrap()), vec![1.1, 1.3, 0.4, 0.2, 0.1, -0.3, 0.2]),
    ]
}

fn closed_form(name: &str, x: &[f64]) -> (RiemannSample, ConnectionSample, usize) {
    match name {
        "stenzel2" | "stenzel3" => {
            let n = x.len() / 2;
            let s = Stenzel::new(n).unwrap();
            let r = x[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
            let st = s.radial_state(r).unwrap();
            (s.curvature(&st).unwrap(), s.connection(&st), n)
        }
        "calabi1" => {
            let c = Calabi::new(1).unwrap();
            let st = c.radial_state((x[2] * x[2] + x[3] * x[3]).sqrt()).unwrap();
            (c.curvature(&st), c.connection(&st).unwrap(), 2)
        }
        _ => {
            let sp = BSSpace::new(BSSpaceId::SpinorS3, 1.0).unwrap();
            (sp.curvature(&x[3..]).unwrap(), sp.connection_sample(&x[3..]).unwrap(), 3)
        }
    }
}

#[test]
fn vielbein_round_trip() {
    for (name, field, x) in charts() {
        assert!(vielbein_defect(field.as_ref(), &x).unwrap() < 1e-10, "{name}");
    }
}

#[test]
fn closed_form_curvature_matches_finite_differences() {
    for (name, field, x) in charts() {
        let (closed, _, _) = closed_form(name, &x);
        let rc = riemann_richardson(field.as_ref(), &x, 1e-2).unwrap();
        assert!((3.5..=4.5).contains(&rc.ratio), "{name} ratio {}", rc.ratio);
        assert!(rel(&rc.extrapolated, &closed) < 1e-4, "{name}");
        assert!(rel(&rc.fine, &closed) < 1e-4, "{name}");
    }
}

#[test]
fn covariant_derivatives_of_omega_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (name, field, x) in charts() {
        let (_, conn, n) = closed_form(name, &x);
        let d = field.dim();
        let vs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut v = unit(d, i);
                for a in v.iter_mut() {
                    *a += 0.3 * rng.gen_range(-1.0..1.0);
                }
                v
            })
            .collect();
        let xf: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        let vc: Vec<Vec<f64>> = vs.iter().map(|v| frame_to_coords(field.as_ref(), &x, v).unwrap()).collect();
        let xc = frame_to_coords(field.as_ref(), &x, &xf).unwrap();
        let g1 = conn.grad_omega(&xf, &refs);
        let g2 = grad_omega_fd(field.as_ref(), n, &x, &xc, &vc, 1e-3).unwrap();
        assert!((g1 - g2).abs() < 1e-3 * g1.abs().max(1e-2), "{name} {g1} {g2}");
        let h1 = conn.hess_trace(&vs);
        let h2: f64 = vc
            .iter()
            .map(|v| hess_omega_fd(field.as_ref(), n, &x, v, v, &vc, 1e-3).unwrap())
            .sum();
        assert!((h1 - h2).abs() < 1e-3 * h1.abs().max(1e-2), "{name} {h1} {h2}");
    }
}

#[test]
fn parallel_form_in_flat_space() {
    let e = Euclidean { dim: 3 };
    let vs = vec![vec![1.0, 0.2, 0.0], vec![0.0, 1.0, 0.5]];
    assert_eq!(grad_omega_fd(&e, 2, &[0.1, 0.2, 0.3], &[1.0, -1.0, 0.5], &vs, 1e-3).unwrap(), 0.0);
}

#[test]
fn hessians_of_distance_functions() {
    let h = 1e-3;
    let frame_hessian = |field: &dyn CoframeField, f: &dyn Fn(&[f64]) -> holonomy_lab::Result<f64>, x: &[f64]| {
        let p = frame_vectors(&field.coframe(x).unwrap()).unwrap();
        p.transpose() * hessian_fd(field, f, x, h).unwrap() * &p
    };

    let s = Stenzel::new(2).unwrap();
    let ch = StenzelChart::new(2).unwrap();
    let x = [1.1, 0.4, 0.5, 0.3];
    let hf = frame_hessian(&ch, &|p| s.rho_of_r((p[2] * p[2] + p[3] * p[3]).sqrt()).map(|r| r * r), &x);
    let diag = s.hessian_psi(&s.radial_state(ch.radius(&x)).unwrap()).diag;
    assert!((hf - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))).amax() < 1e-5);

    let c = Calabi::new(1).unwrap();
    let x = [1.1, 0.4, 0.3, 0.2];
    let hf = frame_hessian(&CalabiChart, &|p| Calabi::rho_of_r((p[2] * p[2] + p[3] * p[3]).sqrt()).map(|r| r * r), &x);
    let diag = c.hessian_psi(&c.radial_state(0.13f64.sqrt()).unwrap()).unwrap().diag;
    assert!((hf - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))).amax() < 1e-5);

    let sp = BSSpace::new(BSSpaceId::SpinorS3, 1.0).unwrap();
    let bc = BSChart::new(sp).unwrap();
    let x = [1.1, 1.3, 0.4, 0.2, 0.1, -0.3, 0.2];
    let hf = frame_hessian(&bc, &|p| Ok(p[3..].iter().map(|v| v * v).sum()), &x);
    let hc = sp.hessian_s(&x[3..]).unwrap();
    let hc = DMatrix::from_fn(7, 7, |a, b| hc.matrix[a][b]);
    assert!((hf - hc).amax() < 1e-5);
}

fn block_gauge(y: &[f64]) -> DMatrix<f64> {
    let t = holonomy_lab::stenzel::spherical_gauge(y).unwrap();
    let mut b = DMatrix::zeros(4, 4);
    b.view_mut((0, 0), (2, 2)).copy_from(&t);
    b.view_mut((2, 2), (2, 2)).copy_from(&t);
    b
}

#[test]
fn stereographic_stenzel_chart_matches_closed_form() {
    let s = Stenzel::new(2).unwrap();
    let ch = StenzelStereoChart;
    for x in [[0.3f64, -0.2, 0.4, 0.1], [1.2, 0.5, -0.05, 0.02], [0.1, 0.0, 0.8, -0.6]] {
        let r = (x[2] * x[2] + x[3] * x[3]).sqrt();
        let closed = s.curvature(&s.radial_state(r).unwrap()).unwrap();
        let closed = closed.change_frame(&block_gauge(&x[2..]).transpose());
        let rc = riemann_richardson(&ch, &x, 1e-2).unwrap();
        assert!(rel(&rc.extrapolated, &closed) < 1e-4, "{x:?} {}", rel(&rc.extrapolated, &closed));
        assert!(vielbein_defect(&ch, &x).unwrap() < 1e-12);
    }
}

#[test]
fn stereographic_chart_is_smooth_on_the_zero_section() {
    let s = Stenzel::new(2).unwrap();
    let closed = s.curvature(&s.radial_state(1e-6).unwrap()).unwrap();
    for x in [[0.3, -0.2, 0.0, 0.0], [0.0, 0.0, 1e-4, 0.0]] {
        let rc = riemann_richardson(&StenzelStereoChart, &x, 1e-2).unwrap();
        assert!(ricci_contract(&rc.extrapolated).amax() < 1e-6);
        // curvature on the zero section is invariant under the fiber rotation
        let a = rc.extrapolated.max_abs();
        assert!((a - closed.max_abs()).abs() < 1e-5 * a);
    }
}
