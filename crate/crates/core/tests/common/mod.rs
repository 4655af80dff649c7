#![allow(dead_code)]

use lamperti_core::{
    AitSahaliaParams, CevParams, CirParams, Heston32Params, Model, ModelSpec, WrightFisherParams,
};

pub fn cir() -> ModelSpec {
    ModelSpec::new(Model::Cir(CirParams::new(2.0, 0.125, 0.5)), 0.125)
}

pub fn cev() -> ModelSpec {
    ModelSpec::new(
        Model::Cev(CevParams {
            kappa: 2.0,
            theta: 0.1,
            sigma: 0.3,
            alpha: 0.75,
        }),
        0.1,
    )
}

pub fn heston() -> ModelSpec {
    ModelSpec::new(
        Model::Heston32(Heston32Params {
            c1: 2.0,
            c2: 1.0,
            c3: 0.5,
        }),
        1.0,
    )
}

pub fn wright_fisher() -> ModelSpec {
    ModelSpec::new(
        Model::WrightFisher(WrightFisherParams {
            a: 1.0,
            b: 2.0,
            gamma: 1.0,
        }),
        0.5,
    )
}

pub fn ait_sahalia(r: f64, rho: f64) -> ModelSpec {
    ModelSpec::new(
        Model::AitSahalia(AitSahaliaParams {
            alpha_m1: 1.0,
            alpha_0: 1.0,
            alpha_1: 1.0,
            alpha_2: 1.0,
            sigma: 1.0,
            r,
            rho,
        }),
        1.0,
    )
}

/// One valid configuration per model, plus a non-critical Ait-Sahalia.
pub fn all_models() -> Vec<ModelSpec> {
    vec![
        cir(),
        cev(),
        heston(),
        wright_fisher(),
        ait_sahalia(2.0, 1.5),
        ait_sahalia(3.0, 1.5),
    ]
}

/// Original-coordinate drift and diffusion written out from the model definitions.
pub fn coefficients(spec: &ModelSpec, y: f64) -> (f64, f64) {
    match spec.model {
        Model::Cir(p) => (p.kappa * (p.theta - y), p.sigma * y.sqrt()),
        Model::Cev(p) => (p.kappa * (p.theta - y), p.sigma * y.powf(p.alpha)),
        Model::Heston32(p) => (p.c1 * y * (p.c2 - y), p.c3 * y.powf(1.5)),
        Model::WrightFisher(p) => (p.a - p.b * y, p.gamma * (y * (1.0 - y)).sqrt()),
        Model::AitSahalia(p) => (
            p.alpha_m1 / y - p.alpha_0 + p.alpha_1 * y - p.alpha_2 * y.powf(p.r),
            p.sigma * y.powf(p.rho),
        ),
    }
}

/// A few points spread over the original domain.
pub fn sample_points(spec: &ModelSpec) -> Vec<f64> {
    match spec.model {
        Model::WrightFisher(_) => vec![1e-4, 0.01, 0.2, 0.5, 0.7, 0.99, 0.9999],
        _ => vec![1e-4, 0.01, 0.1, 0.5, 1.0, 3.0, 20.0],
    }
}
