//! The supported SDE models, their parameter conditions and strong-order thresholds.
//!
//! | model         | drift `a(y)`                                  | diffusion `b(y)`      | domain   |
//! |---------------|-----------------------------------------------|-----------------------|----------|
//! | CIR           | `kappa (theta - y)`                           | `sigma sqrt(y)`       | (0, inf) |
//! | CEV           | `kappa (theta - y)`                           | `sigma y^alpha`       | (0, inf) |
//! | Heston-3/2    | `c1 y (c2 - y)`                               | `c3 y^{3/2}`          | (0, inf) |
//! | Wright-Fisher | `a - b y`                                     | `gamma sqrt(y(1-y))`  | (0, 1)   |
//! | Ait-Sahalia   | `a_{-1}/y - a_0 + a_1 y - a_2 y^r`            | `sigma y^rho`         | (0, inf) |

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::{pow, sqrt};

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn check(&self, x: f64) -> Result<f64> {
        if self.contains(x) {
            Ok(x)
        } else {
            Err(Error::Domain {
                value: x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    Cir,
    Cev,
    Heston32,
    WrightFisher,
    AitSahalia,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [
        ModelId::Cir,
        ModelId::Cev,
        ModelId::Heston32,
        ModelId::WrightFisher,
        ModelId::AitSahalia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Cir => "cir",
            ModelId::Cev => "cev",
            ModelId::Heston32 => "heston32",
            ModelId::WrightFisher => "wright-fisher",
            ModelId::AitSahalia => "ait-sahalia",
        }
    }

    pub fn from_name(name: &str) -> Option<ModelId> {
        ModelId::ALL.into_iter().find(|id| id.name() == name)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cox-Ingersoll-Ross: `dy = kappa (theta - y) dt + sigma sqrt(y) dw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl CirParams {
    pub const fn new(kappa: f64, theta: f64, sigma: f64) -> Self {
        CirParams {
            kappa,
            theta,
            sigma,
        }
    }

    /// Mean level of the square-root process, `theta - sigma^2 / (4 kappa)`.
    pub fn theta_v(&self) -> f64 {
        self.theta - self.sigma * self.sigma / (4.0 * self.kappa)
    }

    /// `2 kappa theta / sigma^2`.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.kappa * self.theta / (self.sigma * self.sigma)
    }
}

/// Mean-reverting constant elasticity of variance: `dy = kappa (theta - y) dt + sigma y^alpha dw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CevParams {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub alpha: f64,
}

/// Heston 3/2-volatility: `dy = c1 y (c2 - y) dt + c3 y^{3/2} dw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heston32Params {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Heston32Params {
    /// `1 / y` is a CIR process with these parameters (driven by `-w`).
    pub fn induced_cir(&self) -> CirParams {
        CirParams {
            kappa: self.c1 * self.c2,
            theta: 1.0 / self.c2 + self.c3 * self.c3 / (self.c1 * self.c2),
            sigma: self.c3,
        }
    }
}

/// Wright-Fisher: `dy = (a - b y) dt + gamma sqrt(y (1 - y)) dw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrightFisherParams {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

/// Ait-Sahalia: `dy = (a_{-1}/y - a_0 + a_1 y - a_2 y^r) dt + sigma y^rho dw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AitSahaliaParams {
    pub alpha_m1: f64,
    pub alpha_0: f64,
    pub alpha_1: f64,
    pub alpha_2: f64,
    pub sigma: f64,
    pub r: f64,
    pub rho: f64,
}

impl AitSahaliaParams {
    /// `r = 2, rho = 3/2`.
    pub fn is_critical(&self) -> bool {
        self.r == 2.0 && self.rho == 1.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Cir(CirParams),
    Cev(CevParams),
    Heston32(Heston32Params),
    WrightFisher(WrightFisherParams),
    AitSahalia(AitSahaliaParams),
}

impl Model {
    pub fn id(&self) -> ModelId {
        match self {
            Model::Cir(_) => ModelId::Cir,
            Model::Cev(_) => ModelId::Cev,
            Model::Heston32(_) => ModelId::Heston32,
            Model::WrightFisher(_) => ModelId::WrightFisher,
            Model::AitSahalia(_) => ModelId::AitSahalia,
        }
    }

    pub fn domain(&self) -> Interval {
        match self {
            Model::WrightFisher(_) => Interval::new(0.0, 1.0),
            _ => Interval::POSITIVE,
        }
    }

    /// Parameter values in declaration order, with their names.
    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Model::Cir(p) => {
                alloc::vec![("kappa", p.kappa), ("theta", p.theta), ("sigma", p.sigma)]
            }
            Model::Cev(p) => alloc::vec![
                ("kappa", p.kappa),
                ("theta", p.theta),
                ("sigma", p.sigma),
                ("alpha", p.alpha)
            ],
            Model::Heston32(p) => alloc::vec![("c1", p.c1), ("c2", p.c2), ("c3", p.c3)],
            Model::WrightFisher(p) => alloc::vec![("a", p.a), ("b", p.b), ("gamma", p.gamma)],
            Model::AitSahalia(p) => alloc::vec![
                ("alpha_m1", p.alpha_m1),
                ("alpha_0", p.alpha_0),
                ("alpha_1", p.alpha_1),
                ("alpha_2", p.alpha_2),
                ("sigma", p.sigma),
                ("r", p.r),
                ("rho", p.rho)
            ],
        }
    }

    fn drift_unchecked(&self, y: f64) -> f64 {
        match *self {
            Model::Cir(p) => p.kappa * (p.theta - y),
            Model::Cev(p) => p.kappa * (p.theta - y),
            Model::Heston32(p) => p.c1 * y * (p.c2 - y),
            Model::WrightFisher(p) => p.a - p.b * y,
            Model::AitSahalia(p) => {
                p.alpha_m1 / y - p.alpha_0 + p.alpha_1 * y - p.alpha_2 * pow(y, p.r)
            }
        }
    }

    fn diffusion_unchecked(&self, y: f64) -> f64 {
        match *self {
            Model::Cir(p) => p.sigma * sqrt(y),
            Model::Cev(p) => p.sigma * pow(y, p.alpha),
            Model::Heston32(p) => p.c3 * y * sqrt(y),
            Model::WrightFisher(p) => p.gamma * sqrt(y * (1.0 - y)),
            Model::AitSahalia(p) => p.sigma * pow(y, p.rho),
        }
    }
}

/// A model together with its initial value `y(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub model: Model,
    pub initial: f64,
}

impl ModelSpec {
    pub const fn new(model: Model, initial: f64) -> Self {
        ModelSpec { model, initial }
    }

    pub fn id(&self) -> ModelId {
        self.model.id()
    }

    pub fn domain(&self) -> Interval {
        self.model.domain()
    }

    /// `a(y)`; errors outside the open domain.
    pub fn drift(&self, y: f64) -> Result<f64> {
        self.domain()
            .check(y)
            .map(|y| self.model.drift_unchecked(y))
    }

    /// `b(y)`; errors outside the open domain.
    pub fn diffusion(&self, y: f64) -> Result<f64> {
        self.domain()
            .check(y)
            .map(|y| self.model.diffusion_unchecked(y))
    }

    /// Fails with [`Error::InvalidParams`] listing every violated condition.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_params(self);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidParams(report.violation_summary()))
        }
    }
}

/// One checked inequality. `slack` is `lhs - rhs`; for strict conditions it must be
/// positive, otherwise non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub holds: bool,
}

impl Condition {
    fn compare(description: String, lhs: f64, rhs: f64, strict: bool) -> Self {
        let holds = if strict { lhs > rhs } else { lhs >= rhs };
        Condition {
            description,
            lhs,
            rhs,
            strict,
            holds,
        }
    }

    fn positive(name: &str, value: f64) -> Self {
        Condition::compare(format!("{name} > 0"), value, 0.0, true)
    }

    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Outcome of [`validate_params`]. Invalid parameters are a normal result, not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub model: ModelId,
    pub conditions: Vec<Condition>,
    pub notes: Vec<String>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.holds)
    }

    pub fn violation_summary(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.violations().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            out.push_str(&format!(
                "{} (lhs {}, rhs {}, slack {})",
                c.description,
                c.lhs,
                c.rhs,
                c.slack()
            ));
        }
        out
    }
}

/// Checks finiteness, positivity and the model's boundary-attainment conditions, plus
/// that the initial value is strictly inside the domain.
pub fn validate_params(spec: &ModelSpec) -> ValidityReport {
    let mut conditions = Vec::new();
    let mut notes = Vec::new();
    let params = spec.model.parameters();

    let non_finite: Vec<&str> = params
        .iter()
        .filter(|(_, v)| !v.is_finite())
        .map(|(n, _)| *n)
        .collect();
    conditions.push(Condition {
        description: if non_finite.is_empty() {
            String::from("all parameters finite")
        } else {
            format!("all parameters finite (not: {})", non_finite.join(", "))
        },
        lhs: if non_finite.is_empty() { 0.0 } else { f64::NAN },
        rhs: 0.0,
        strict: false,
        holds: non_finite.is_empty(),
    });

    match spec.model {
        Model::Cir(p) => {
            for (n, v) in &params {
                conditions.push(Condition::positive(n, *v));
            }
            conditions.push(Condition::compare(
                String::from("2*kappa*theta >= sigma^2"),
                2.0 * p.kappa * p.theta,
                p.sigma * p.sigma,
                false,
            ));
        }
        Model::Cev(p) => {
            for (n, v) in &params[..3] {
                conditions.push(Condition::positive(n, *v));
            }
            conditions.push(Condition::compare(
                String::from("alpha > 0.5"),
                p.alpha,
                0.5,
                true,
            ));
            conditions.push(Condition::compare(
                String::from("alpha < 1"),
                1.0,
                p.alpha,
                true,
            ));
        }
        Model::Heston32(_) => {
            for (n, v) in &params {
                conditions.push(Condition::positive(n, *v));
            }
        }
        Model::WrightFisher(p) => {
            for (n, v) in &params {
                conditions.push(Condition::positive(n, *v));
            }
            let g2 = p.gamma * p.gamma;
            conditions.push(Condition::compare(
                String::from("2*a/gamma^2 >= 1"),
                2.0 * p.a / g2,
                1.0,
                false,
            ));
            conditions.push(Condition::compare(
                String::from("2*(b-a)/gamma^2 >= 1"),
                2.0 * (p.b - p.a) / g2,
                1.0,
                false,
            ));
        }
        Model::AitSahalia(p) => {
            for (n, v) in &params[..5] {
                conditions.push(Condition::positive(n, *v));
            }
            conditions.push(Condition::compare(String::from("r > 1"), p.r, 1.0, true));
            conditions.push(Condition::compare(
                String::from("rho > 1"),
                p.rho,
                1.0,
                true,
            ));
            let critical = p.is_critical();
            let mut c = Condition::compare(
                String::from("r + 1 > 2*rho, or the critical case r = 2, rho = 1.5"),
                p.r + 1.0,
                2.0 * p.rho,
                true,
            );
            c.holds |= critical;
            conditions.push(c);
            if critical {
                notes.push(String::from("critical case r = 2, rho = 1.5"));
            }
        }
    }

    let domain = spec.domain();
    let inside = domain.contains(spec.initial);
    let slack = (spec.initial - domain.lo).min(domain.hi - spec.initial);
    conditions.push(Condition {
        description: format!("initial value inside ({}, {})", domain.lo, domain.hi),
        lhs: slack,
        rhs: 0.0,
        strict: true,
        holds: inside && slack > 0.0,
    });

    ValidityReport {
        model: spec.id(),
        conditions,
        notes,
    }
}

/// Supremum of the exponents `p` for which the back-transformed scheme is proven
/// `p`-strongly convergent with order one. The bound is open (`p < bound`);
/// `f64::INFINITY` when every `p >= 1` is covered.
pub fn max_strong_order_p(spec: &ModelSpec) -> Result<f64> {
    spec.ensure_valid()?;
    Ok(match spec.model {
        Model::Cir(p) => 4.0 / 3.0 * p.kappa * p.theta / (p.sigma * p.sigma),
        Model::Cev(_) => f64::INFINITY,
        Model::Heston32(p) => 1.0 / 3.0 + p.c1 / (3.0 * p.c3 * p.c3),
        Model::WrightFisher(p) => 4.0 / (3.0 * p.gamma * p.gamma) * p.a.min(p.b - p.a),
        Model::AitSahalia(p) if p.is_critical() => {
            1.0 / 3.0 + p.alpha_2 / (3.0 * p.sigma * p.sigma)
        }
        Model::AitSahalia(_) => f64::INFINITY,
    })
}

/// Which coordinates a trajectory lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    Original,
    Transformed,
}

impl ModelSpec {
    /// Open range of exponents `q` for which moments `E sup_k |state_k|^q` are expected
    /// to be finite, from the known moment bounds of each model.
    pub fn finite_moment_range(&self, coords: Coordinates) -> (f64, f64) {
        const ALL: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
        // x = y^{1/2} (or y^{-1/2} for the inverse models) turns a y-exponent s into 2s.
        let scale = match coords {
            Coordinates::Original => 1.0,
            Coordinates::Transformed => 2.0,
        };
        match self.model {
            Model::Cir(p) => (-scale * p.feller_ratio(), f64::INFINITY),
            Model::Heston32(p) => {
                let ratio = p.induced_cir().feller_ratio();
                match coords {
                    Coordinates::Original => (f64::NEG_INFINITY, ratio),
                    Coordinates::Transformed => (-2.0 * ratio, f64::INFINITY),
                }
            }
            Model::Cev(_) => ALL,
            Model::WrightFisher(p) => (-scale * 2.0 * p.a / (p.gamma * p.gamma), f64::INFINITY),
            Model::AitSahalia(p) if p.is_critical() => {
                let ratio = 2.0 * (1.0 + p.alpha_2 / (p.sigma * p.sigma));
                match coords {
                    Coordinates::Original => (f64::NEG_INFINITY, ratio),
                    Coordinates::Transformed => (-2.0 * ratio, f64::INFINITY),
                }
            }
            Model::AitSahalia(_) => ALL,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cir(kappa: f64, theta: f64, sigma: f64) -> ModelSpec {
        ModelSpec::new(Model::Cir(CirParams::new(kappa, theta, sigma)), theta)
    }

    #[test]
    fn cir_reference_parameters_valid() {
        let spec = cir(2.0, 0.125, 0.5);
        let report = validate_params(&spec);
        assert!(report.is_valid(), "{report:?}");
        let p = match spec.model {
            Model::Cir(p) => p,
            _ => unreachable!(),
        };
        assert_eq!(p.feller_ratio(), 2.0);
    }

    #[test]
    fn cir_feller_violation_reports_slack() {
        let report = validate_params(&cir(1.0, 0.1, 1.0));
        assert!(!report.is_valid());
        let v: Vec<_> = report.violations().collect();
        assert_eq!(v.len(), 1);
        assert!(v[0].description.contains("2*kappa*theta"));
        assert!((v[0].lhs - 0.2).abs() < 1e-15);
        assert_eq!(v[0].rhs, 1.0);
        assert!((v[0].slack() + 0.8).abs() < 1e-15);
    }

    #[test]
    fn wright_fisher_boundary_equality_is_valid() {
        let spec = ModelSpec::new(
            Model::WrightFisher(WrightFisherParams {
                a: 1.0,
                b: 1.5,
                gamma: 1.0,
            }),
            0.5,
        );
        let report = validate_params(&spec);
        assert!(report.is_valid(), "{report:?}");
        let slack: Vec<f64> = report.conditions.iter().map(Condition::slack).collect();
        assert!(slack.contains(&0.0));
    }

    #[test]
    fn non_finite_parameters_fail() {
        let report = validate_params(&cir(f64::NAN, 0.1, 0.1));
        assert!(!report.is_valid());
        let report = validate_params(&cir(1.0, f64::INFINITY, 0.1));
        assert!(!report.is_valid());
    }

    #[test]
    fn initial_value_must_be_interior() {
        let mut spec = cir(2.0, 0.125, 0.5);
        spec.initial = 0.0;
        assert!(!validate_params(&spec).is_valid());
        spec.initial = -1.0;
        assert!(!validate_params(&spec).is_valid());
    }

    #[test]
    fn ait_sahalia_critical_case_noted() {
        let p = AitSahaliaParams {
            alpha_m1: 1.0,
            alpha_0: 1.0,
            alpha_1: 1.0,
            alpha_2: 1.0,
            sigma: 1.0,
            r: 2.0,
            rho: 1.5,
        };
        let report = validate_params(&ModelSpec::new(Model::AitSahalia(p), 1.0));
        assert!(report.is_valid());
        assert!(report.notes.iter().any(|n| n.contains("critical")));

        let off = AitSahaliaParams { rho: 1.6, ..p };
        assert!(!validate_params(&ModelSpec::new(Model::AitSahalia(off), 1.0)).is_valid());
        let noncritical = AitSahaliaParams { r: 3.0, ..p };
        assert!(validate_params(&ModelSpec::new(Model::AitSahalia(noncritical), 1.0)).is_valid());
    }

    #[test]
    fn cev_alpha_range() {
        let mk = |alpha| {
            ModelSpec::new(
                Model::Cev(CevParams {
                    kappa: 2.0,
                    theta: 0.1,
                    sigma: 0.3,
                    alpha,
                }),
                0.1,
            )
        };
        assert!(validate_params(&mk(0.75)).is_valid());
        assert!(!validate_params(&mk(0.5)).is_valid());
        assert!(!validate_params(&mk(1.0)).is_valid());
    }

    #[test]
    fn thresholds() {
        assert!((max_strong_order_p(&cir(2.0, 0.125, 0.5)).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let cev = ModelSpec::new(
            Model::Cev(CevParams {
                kappa: 2.0,
                theta: 0.1,
                sigma: 0.3,
                alpha: 0.75,
            }),
            0.1,
        );
        assert_eq!(max_strong_order_p(&cev).unwrap(), f64::INFINITY);
        let heston = ModelSpec::new(
            Model::Heston32(Heston32Params {
                c1: 1.0,
                c2: 1.0,
                c3: 1.0,
            }),
            1.0,
        );
        assert!((max_strong_order_p(&heston).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            max_strong_order_p(&cir(1.0, 0.1, 1.0)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn drift_and_diffusion_values() {
        let spec = cir(2.0, 0.125, 0.5);
        assert_eq!(spec.drift(0.125).unwrap(), 0.0);
        assert_eq!(spec.diffusion(0.25).unwrap(), 0.25);
        assert!(spec.diffusion(-0.1).is_err());
        assert!(spec.drift(0.0).is_err());

        let wf = ModelSpec::new(
            Model::WrightFisher(WrightFisherParams {
                a: 1.0,
                b: 2.0,
                gamma: 1.0,
            }),
            0.5,
        );
        assert_eq!(wf.diffusion(0.5).unwrap(), 0.5);
        assert!(wf.diffusion(1.0).is_err());
        assert!(wf.diffusion(1.5).is_err());
    }

    #[test]
    fn induced_cir_of_heston() {
        let h = Heston32Params {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        };
        let c = h.induced_cir();
        assert_eq!((c.kappa, c.theta, c.sigma), (1.0, 2.0, 1.0));
        // kappa theta / sigma^2 = 1 + c1/c3^2
        assert!((c.kappa * c.theta / (c.sigma * c.sigma) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn model_names_round_trip() {
        for id in ModelId::ALL {
            assert_eq!(ModelId::from_name(id.name()), Some(id));
        }
    }
}
