//! Ready-made experiment configurations.

use crate::config::{
    ExperimentConfig, GridSection, ModelSection, MonteCarloSection, OutputSection, SchemeSection,
};
use lamperti_core::{
    AitSahaliaParams, CevParams, CirParams, Heston32Params, Model, ModelSpec, WrightFisherParams,
};

pub const NAMES: [&str; 7] = [
    "cir-ladder",
    "cir-compare",
    "cev",
    "heston32",
    "wright-fisher",
    "ait-sahalia",
    "cir-feller-violated",
];

fn steps(exponents: &[i32]) -> Vec<f64> {
    exponents.iter().map(|&k| 2f64.powi(-k)).collect()
}

fn ladder_config(spec: ModelSpec, metric: &str) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelSection::from_spec(&spec),
        grid: GridSection {
            horizon: 1.0,
            dt: 2f64.powi(-8),
            dt_reference: Some(2f64.powi(-15)),
            ladder: steps(&[11, 10, 9, 8]),
        },
        scheme: SchemeSection::default(),
        monte_carlo: MonteCarloSection {
            metric: metric.to_string(),
            ..Default::default()
        },
        output: OutputSection::default(),
    }
}

pub fn cir_ladder() -> ModelSpec {
    ModelSpec::new(Model::Cir(CirParams::new(2.0, 0.125, 0.5)), 0.125)
}

/// CIR with `kappa theta / sigma^2 = 2`.
pub fn cir_compare() -> ModelSpec {
    ModelSpec::new(
        Model::Cir(CirParams::new(2.0, 0.125, 0.125f64.sqrt())),
        0.125,
    )
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

pub fn heston32() -> ModelSpec {
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

/// Critical case `r = 2, rho = 3/2`.
pub fn ait_sahalia() -> ModelSpec {
    ModelSpec::new(
        Model::AitSahalia(AitSahaliaParams {
            alpha_m1: 1.0,
            alpha_0: 1.0,
            alpha_1: 1.0,
            alpha_2: 1.0,
            sigma: 1.0,
            r: 2.0,
            rho: 1.5,
        }),
        1.0,
    )
}

/// The five models with valid parameters.
pub fn all_models() -> [ModelSpec; 5] {
    [
        cir_ladder(),
        cev(),
        heston32(),
        wright_fisher(),
        ait_sahalia(),
    ]
}

pub fn by_name(name: &str) -> Option<ExperimentConfig> {
    Some(match name {
        "cir-ladder" => ladder_config(cir_ladder(), "endpoint-lp"),
        "cir-compare" => {
            let mut c = ladder_config(cir_compare(), "endpoint-lp");
            c.grid.ladder = steps(&[9, 8, 7, 6]);
            c.grid.dt_reference = Some(2f64.powi(-12));
            c.monte_carlo.n_paths = 10_000;
            c
        }
        "cev" => ladder_config(cev(), "max-grid-lp"),
        "heston32" => ladder_config(heston32(), "max-grid-lp"),
        "wright-fisher" => ladder_config(wright_fisher(), "max-grid-lp"),
        "ait-sahalia" => ladder_config(ait_sahalia(), "max-grid-lp"),
        "cir-feller-violated" => ladder_config(
            ModelSpec::new(Model::Cir(CirParams::new(2.0, 0.125, 1.0)), 0.125),
            "endpoint-lp",
        ),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds() {
        for name in NAMES {
            let cfg = by_name(name).unwrap();
            cfg.spec().unwrap();
            cfg.ladder().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
        assert!(by_name("nope").is_none());
    }
}
