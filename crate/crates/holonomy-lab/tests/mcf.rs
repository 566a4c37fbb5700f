use holonomy_lab::mcf::*;
use holonomy_lab::oracle::{MetricField, StenzelStereoChart};
use holonomy_lab::stenzel::Stenzel;
use holonomy_lab::LabError;
use nalgebra::Matrix4;

fn norm(p: &Point) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn icosphere_counts_and_euler_characteristic() {
    for level in 0..4 {
        let ico = icosphere(level).unwrap();
        let k = 4usize.pow(level as u32);
        assert_eq!(ico.vertices.len(), 10 * k + 2);
        assert_eq!(ico.faces.len(), 20 * k);
        let edges = 3 * ico.faces.len() / 2;
        assert_eq!(ico.vertices.len() + ico.faces.len() - edges, 2);
    }
    assert!(matches!(icosphere(MAX_LEVEL + 1), Err(LabError::Config(_))));
}

#[test]
fn chart_transition_is_an_isometry() {
    let g = StenzelStereoChart;
    for p in [[0.7, -0.4, 0.2, 0.1], [1.1, 0.9, -0.3, 0.05], [0.5, 0.5, 0.0, 0.0]] {
        let q = switch_chart(&p);
        let back = switch_chart(&q);
        assert!(p.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-14));
        let h = 1e-6;
        let jac = Matrix4::from_fn(|i, j| {
            let mut a = p;
            let mut b = p;
            a[j] += h;
            b[j] -= h;
            (switch_chart(&a)[i] - switch_chart(&b)[i]) / (2.0 * h)
        });
        let gp = Matrix4::from_iterator(g.metric(&p).unwrap().iter().copied());
        let gq = Matrix4::from_iterator(g.metric(&q).unwrap().iter().copied());
        assert!((jac.transpose() * gq * jac - gp).amax() < 1e-8);
    }
}

#[test]
fn zero_section_is_a_fixed_point() {
    let mesh = SurfaceMesh::zero_section(2).unwrap();
    for e in evaluate(&mesh, 1e-4).unwrap() {
        assert_eq!(e.velocity, [0.0; 4]);
        assert!(e.h[2] == 0.0 && e.h[3] == 0.0);
        assert!((e.star_omega - 1.0).abs() < 1e-12);
        assert_eq!(e.a2, 0.0);
    }
    let mut state = FlowState::new(mesh.clone(), 10.0, 1e-4).unwrap();
    let dt = 0.5 * state.max_stable_dt();
    state.step(dt).unwrap();
    assert_eq!(state.mesh.positions, mesh.positions);
    assert_eq!(state.monitors.rows.len(), 2);
}

#[test]
fn zero_section_area_converges_under_refinement() {
    let errs: Vec<f64> = (1..4)
        .map(|l| {
            let ev = evaluate(&SurfaceMesh::zero_section(l).unwrap(), 1e-4).unwrap();
            (ev.iter().map(|e| e.area).sum::<f64>() - 4.0 * std::f64::consts::PI).abs()
        })
        .collect();
    for w in errs.windows(2) {
        // halving the edge length at least halves the error
        assert!(w[1] < 0.5 * w[0], "{errs:?}");
    }
}

#[test]
fn round_sphere_mean_curvature() {
    for radius in [0.5, 1.0, 2.0] {
        let s = SurfaceMesh::sphere(3, radius).unwrap();
        for (e, p) in evaluate(&s, 1e-4).unwrap().iter().zip(&s.positions) {
            assert!((norm(&e.h) - 2.0 / radius).abs() < 0.01 * 2.0 / radius);
            // pointing inward
            let dot: f64 = e.h.iter().zip(p).map(|(a, b)| a * b).sum();
            assert!(dot < 0.0);
            assert!((e.a2 - 2.0 / (radius * radius)).abs() < 0.05 / (radius * radius));
        }
    }
}

#[test]
fn shrinking_sphere_follows_the_exact_law() {
    let rep = shrinking_sphere(2, 1.0, 0.1).unwrap();
    assert!(rep.max_radius_error < 0.01, "{rep:?}");
    assert!((rep.final_radius - 0.6f64.sqrt()).abs() < 0.01);
    assert!(shrinking_sphere(2, 1.0, 0.3).is_err());
}

#[test]
fn section_mean_curvature_is_linear_in_eps() {
    let zero = SurfaceMesh::zero_section(2).unwrap();
    let hmax = |eps: f64| {
        let (m, _) = initial_section(&zero, eps, SectionMode::LowHarmonic, 0).unwrap();
        mean_curvature(&m, 1e-4).unwrap().iter().map(|h| (h[2] * h[2] + h[3] * h[3]).sqrt()).fold(0.0, f64::max)
    };
    let (a, b) = (hmax(0.01), hmax(0.02));
    assert!(a > 0.0 && a < 0.1);
    assert!((b / a - 2.0).abs() < 0.01, "{a} {b}");
}

#[test]
fn initial_sections() {
    let zero = SurfaceMesh::zero_section(2).unwrap();
    let (m, rep) = initial_section(&zero, 0.0, SectionMode::UniformFrameField, 0).unwrap();
    assert_eq!(m, zero);
    assert_eq!(rep.psi_max, 0.0);
    assert!((rep.star_omega_min - 1.0).abs() < 1e-12);

    let (m, rep) = initial_section(&zero, 0.05, SectionMode::LowHarmonic, 0).unwrap();
    assert!(rep.margin < 0.1);
    let rho = Stenzel::new(2).unwrap().rho_of_r(0.05).unwrap();
    assert!((rep.psi_max - rho * rho).abs() < 1e-15);
    let rmax = m.positions.iter().map(|p| (p[2] * p[2] + p[3] * p[3]).sqrt()).fold(0.0, f64::max);
    assert!((rmax - 0.05).abs() < 1e-15);

    let a = initial_section(&zero, 0.05, SectionMode::RandomSeeded, 7).unwrap().0;
    let b = initial_section(&zero, 0.05, SectionMode::RandomSeeded, 7).unwrap().0;
    let c = initial_section(&zero, 0.05, SectionMode::RandomSeeded, 8).unwrap().0;
    assert!(a.positions.iter().zip(&b.positions).all(|(p, q)| p.iter().zip(q).all(|(x, y)| x.to_bits() == y.to_bits())));
    assert_ne!(a.positions, c.positions);

    assert!(matches!(
        initial_section(&zero, 5.0, SectionMode::LowHarmonic, 0),
        Err(LabError::NotGraphical { omega }) if omega < 0.0
    ));
    assert!(initial_section(&zero, -1.0, SectionMode::LowHarmonic, 0).is_err());
    assert!(initial_section(&SurfaceMesh::sphere(1, 1.0).unwrap(), 0.1, SectionMode::LowHarmonic, 0).is_err());
    assert_eq!(SectionMode::parse("random_seeded").unwrap(), SectionMode::RandomSeeded);
    assert!(SectionMode::parse("dipole").is_err());
}

fn small_config() -> FlowConfig {
    FlowConfig {
        mesh_level: 2,
        ..Default::default()
    }
}

#[test]
fn small_flow_converges_monotonically() {
    let rep = run_stability_experiment(&small_config()).unwrap();
    assert!(rep.passed(), "{rep:?}");
    let psi: Vec<f64> = rep.monitors.rows.iter().map(|r| r.psi_max).collect();
    assert!(psi.windows(2).all(|w| w[1] < w[0]));
    assert!(rep.volume_worst_increase == 0.0);
    let rows = &rep.monitors.rows;
    assert!(rows.windows(2).all(|w| w[1].t > w[0].t && w[1].step == w[0].step + 1));
    let fit = rep.decay.unwrap();
    assert!(fit.rate > 0.0 && fit.r_squared > 0.99);
    let csv = rep.monitors.to_csv();
    assert_eq!(csv.lines().next().unwrap(), MONITOR_HEADER);
    assert_eq!(csv.lines().count(), rep.steps + 2);
}

#[test]
fn flow_is_independent_of_thread_count() {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let cfg = FlowConfig {
            mode: SectionMode::RandomSeeded,
            seed: 3,
            t_end: 0.05,
            ..small_config()
        };
        pool.install(|| run_stability_experiment(&cfg).unwrap().monitors.to_csv())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn trivial_and_rejected_runs() {
    let rep = run_stability_experiment(&FlowConfig { eps: 0.0, ..small_config() }).unwrap();
    assert!(rep.converged && rep.steps == 0 && rep.t_final == 0.0);

    let err = run_stability_experiment(&FlowConfig { eps: 5.0, ..small_config() }).unwrap_err();
    assert!(matches!(err, LabError::NotGraphical { .. }));

    let err = run_stability_experiment(&FlowConfig { dt: Some(1.0), ..small_config() }).unwrap_err();
    assert!(matches!(err, LabError::Config(_)));
    for bad in [
        FlowConfig { eps: f64::NAN, ..small_config() },
        FlowConfig { k0: -1.0, ..small_config() },
        FlowConfig { fd_step: 1.0, ..small_config() },
        FlowConfig { psi_threshold: 0.0, ..small_config() },
    ] {
        assert!(matches!(run_stability_experiment(&bad), Err(LabError::Config(_))));
    }
}

#[test]
fn exponential_fit_recovers_rate() {
    let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
    let y: Vec<f64> = t.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
    let f = exponential_fit(&t, &y).unwrap();
    assert!((f.rate - 2.5).abs() < 1e-12 && (f.log_amplitude - 3f64.ln()).abs() < 1e-12);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!(exponential_fit(&t[..2], &y[..2]).is_none());
}
