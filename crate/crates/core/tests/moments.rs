use lamperti_core::error_lab::MomentEstimate;
use lamperti_core::schemes::SchemeId;
use lamperti_core::{moment_monitor, CirParams, GridSpec, Model, ModelSpec, SchemeConfig, Serial};

fn cir() -> ModelSpec {
    // 2 kappa theta / sigma^2 = 2
    ModelSpec::new(Model::Cir(CirParams::new(2.0, 0.125, 0.5)), 0.125)
}

fn moment(q: f64, scheme: SchemeId, dt: f64, n_paths: usize) -> MomentEstimate {
    let grid = GridSpec::new(1.0, dt).unwrap();
    moment_monitor(
        &cir(),
        scheme,
        &grid,
        &[q],
        n_paths,
        3,
        &SchemeConfig::default(),
        &Serial,
    )
    .unwrap()[0]
}

#[test]
fn transformed_inverse_square_moment_is_stable_under_refinement() {
    let coarse = moment(-2.0, SchemeId::BemTransformed, 1.0 / 64.0, 2000);
    let fine = moment(-2.0, SchemeId::BemTransformed, 1.0 / 256.0, 2000);
    assert!(!coarse.outside_regime);
    let (coarse, fine) = (coarse.sup_mean, fine.sup_mean);
    assert!(coarse.is_finite() && fine.is_finite());
    let ratio = fine / coarse;
    assert!((0.8..=1.25).contains(&ratio), "{coarse} vs {fine}");
}

#[test]
fn fourth_moment_is_stable_under_path_doubling() {
    let a = moment(4.0, SchemeId::Lbe, 1.0 / 64.0, 2000).value;
    let b = moment(4.0, SchemeId::Lbe, 1.0 / 64.0, 4000).value;
    let ratio = b / a;
    assert!((0.8..=1.25).contains(&ratio), "{a} vs {b}");
}

#[test]
fn zeroth_moment_is_exactly_one() {
    for scheme in [
        SchemeId::BemTransformed,
        SchemeId::Lbe,
        SchemeId::MilsteinCir,
    ] {
        let m = moment(0.0, scheme, 1.0 / 32.0, 10);
        assert_eq!((m.value, m.sup_mean), (1.0, 1.0));
    }
}
