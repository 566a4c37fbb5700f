use holonomy_lab::bryant_salamon::BSSpaceId;
use holonomy_lab::suite::*;
use holonomy_lab::LabError;

fn small() -> SuiteOptions {
    SuiteOptions {
        samples: 400,
        ..Default::default()
    }
}

#[test]
fn grid_parsing() {
    let g = Grid::parse("0:2:4").unwrap();
    assert_eq!(g.points(), vec![0.5, 1.0, 1.5, 2.0]);
    for bad in ["0:2", "a:1:3", "1:0:3", "0:1:0", "0:inf:3"] {
        assert!(matches!(Grid::parse(bad), Err(LabError::Config(_))), "{bad}");
    }
}

#[test]
fn quantity_names_round_trip() {
    for q in Quantity::ALL {
        assert_eq!(Quantity::parse(q.name()).unwrap(), q);
        assert!(!sweep_columns(q).is_empty());
    }
    assert!(matches!(Quantity::parse("torsion"), Err(LabError::Config(_))));
}

#[test]
fn abc_sweep_has_the_documented_shape() {
    let t = sweep(&Family::stenzel(2).unwrap(), Quantity::Abc, None).unwrap();
    assert_eq!(t.header.join(","), sweep_columns(Quantity::Abc));
    assert_eq!(t.rows.len(), 200);
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 201);
    let (a, b, c) = (t.column("A").unwrap(), t.column("B").unwrap(), t.column("C").unwrap());
    assert!(a.iter().chain(&b).all(|v| *v < 0.0));
    // n = 2: A and C coincide
    assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-14));
}

#[test]
fn sweeps_follow_the_grid() {
    let g = Grid::parse("0:1:10").unwrap();
    let cal = Family::calabi(1).unwrap();
    let t = sweep(&cal, Quantity::Hessian, Some(g)).unwrap();
    assert_eq!(t.rows.len(), 10);
    assert!(t.column("min").unwrap().iter().all(|m| *m > 0.0));
    let bs = Family::bryant_salamon(BSSpaceId::SpinorS3, 1.0).unwrap();
    let t = sweep(&bs, Quantity::Relation, Some(g)).unwrap();
    assert_eq!(t.header.join(","), sweep_columns(Quantity::Relation));
    assert!(t.column("ratio_residual").unwrap().iter().all(|r| r.abs() < 1e-10));
    let t = sweep(&Family::stenzel(3).unwrap(), Quantity::Identities, Some(g)).unwrap();
    assert!(t.column("closed_form").unwrap().iter().all(|r| *r < 1e-10));
}

#[test]
fn unsupported_sweeps_are_config_errors() {
    let bs = Family::bryant_salamon(BSSpaceId::AsdS4, 1.0).unwrap();
    assert!(matches!(sweep(&bs, Quantity::Abc, None), Err(LabError::Config(_))));
    let cal = Family::calabi(2).unwrap();
    assert!(matches!(sweep(&cal, Quantity::Relation, None), Err(LabError::Config(_))));
}

#[test]
fn options_are_validated() {
    let mut o = small();
    o.samples = 1;
    assert!(o.validate().is_err());
    let o = SuiteOptions { fd_step: 0.0, ..small() };
    assert!(matches!(verify(&Family::stenzel(2).unwrap(), &o), Err(LabError::Config(_))));
}

#[test]
fn small_families_verify() {
    for fam in [
        Family::stenzel(2).unwrap(),
        Family::calabi(1).unwrap(),
        Family::bryant_salamon(BSSpaceId::SpinorS3, 1.0).unwrap(),
    ] {
        let rep = verify(&fam, &small()).unwrap();
        assert!(rep.passed(), "{}", rep.to_text());
        let k = rep.constant("K_tilt").unwrap();
        assert!(k.is_finite() && k > 0.0);
    }
}

#[test]
fn a_tight_tolerance_is_reported_as_failure() {
    let o = SuiteOptions { tol: 1e-18, ..small() };
    let rep = verify(&Family::stenzel(2).unwrap(), &o).unwrap();
    assert!(!rep.passed());
    assert!(rep.failures().iter().all(|c| c.value > c.bound));
}

#[test]
fn bound_samples_are_reproducible() {
    let fam = Family::stenzel(2).unwrap();
    let a = bound_samples(&fam, 50, 3).unwrap();
    let b = bound_samples(&fam, 50, 3).unwrap();
    assert_eq!(a, b);
    let s = summarize_bounds(&a);
    assert!(a.iter().all(|x| x.satisfies(s.k_emp + 1e-12)));
}
