//! Lamperti transformation to additive noise.
//!
//! For `dy = a(y) dt + b(y) dw` and `F' = lambda / b`, Ito's formula gives
//! `dx = f(x) dt + lambda dw` with
//! `f(x) = lambda (a(y)/b(y) - b'(y)/2)` evaluated at `y = F^{-1}(x)`.
//!
//! Every power-diffusion model (`b(y) = sigma y^rho`) uses `F(y) = y^{1-rho}`, which
//! turns a polynomial-type drift into a finite sum of powers of `x`. Wright-Fisher uses
//! `F(y) = 2 arcsin(sqrt(y))`. When `1 - rho < 0` the transform is decreasing and the
//! noise coefficient `(1 - rho) sigma` is negative; the model then stores a positive
//! noise level and feeds negated increments to the scheme (the reflected motion `-w` is
//! again a Brownian motion).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, pow, sqrt};
use crate::model::{Interval, Model, ModelSpec};

/// `coef * x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransformedDrift {
    /// `sum coef_i x^{exponent_i}`, exponents distinct.
    PowerSum(Vec<PowerTerm>),
    /// `cot_coef * cot(x/2) - tan_coef * tan(x/2)` on `(0, pi)`.
    HalfAngle { cot_coef: f64, tan_coef: f64 },
}

impl TransformedDrift {
    fn value(&self, x: f64) -> f64 {
        match self {
            TransformedDrift::PowerSum(terms) => {
                terms.iter().map(|t| t.coef * pow(x, t.exponent)).sum()
            }
            TransformedDrift::HalfAngle { cot_coef, tan_coef } => {
                let (s, c) = libm::sincos(0.5 * x);
                cot_coef * c / s - tan_coef * s / c
            }
        }
    }

    fn d1(&self, x: f64) -> f64 {
        match self {
            TransformedDrift::PowerSum(terms) => terms
                .iter()
                .filter(|t| t.exponent != 0.0)
                .map(|t| t.coef * t.exponent * pow(x, t.exponent - 1.0))
                .sum(),
            TransformedDrift::HalfAngle { cot_coef, tan_coef } => {
                let (s, c) = libm::sincos(0.5 * x);
                let (cot, tan) = (c / s, s / c);
                -0.5 * cot_coef * (1.0 + cot * cot) - 0.5 * tan_coef * (1.0 + tan * tan)
            }
        }
    }

    fn d2(&self, x: f64) -> f64 {
        match self {
            TransformedDrift::PowerSum(terms) => terms
                .iter()
                .filter(|t| t.exponent != 0.0 && t.exponent != 1.0)
                .map(|t| t.coef * t.exponent * (t.exponent - 1.0) * pow(x, t.exponent - 2.0))
                .sum(),
            TransformedDrift::HalfAngle { cot_coef, tan_coef } => {
                let (s, c) = libm::sincos(0.5 * x);
                let (cot, tan) = (c / s, s / c);
                0.5 * cot_coef * cot * (1.0 + cot * cot) - 0.5 * tan_coef * tan * (1.0 + tan * tan)
            }
        }
    }
}

/// The change of variables `x = F(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// `F(y) = sqrt(y)`.
    Sqrt,
    /// `F(y) = y^{-1/2}`.
    InverseSqrt,
    /// `F(y) = y^e`, `e != 0`.
    Power(f64),
    /// `F(y) = 2 arcsin(sqrt(y))`.
    Arcsine,
}

impl Transform {
    fn forward(self, y: f64) -> f64 {
        match self {
            Transform::Sqrt => sqrt(y),
            Transform::InverseSqrt => 1.0 / sqrt(y),
            Transform::Power(e) => pow(y, e),
            Transform::Arcsine => 2.0 * libm::asin(sqrt(y)),
        }
    }

    fn inverse(self, x: f64) -> f64 {
        match self {
            Transform::Sqrt => x * x,
            Transform::InverseSqrt => 1.0 / (x * x),
            Transform::Power(e) => pow(x, 1.0 / e),
            Transform::Arcsine => {
                let s = libm::sin(0.5 * x);
                s * s
            }
        }
    }
}

/// Drift of the form `c1 x^{-m1} + h(x)` with `|h(x)| <= c2 (1 + |x|^{m2})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDriftStructure {
    pub c1: f64,
    pub m1: f64,
    pub m2: f64,
    pub c2: f64,
}

/// An additive-noise SDE `dx = f(x) dt + noise_level dw` on `(alpha, beta)`, together
/// with the transform back to the original model.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedModel {
    source: ModelSpec,
    drift: TransformedDrift,
    transform: Transform,
    noise_level: f64,
    flip_noise: bool,
    domain: Interval,
    one_sided_lipschitz: f64,
    inverse_drift: Option<InverseDriftStructure>,
}

impl TransformedModel {
    pub fn source(&self) -> &ModelSpec {
        &self.source
    }

    pub fn drift_form(&self) -> &TransformedDrift {
        &self.drift
    }

    pub fn transform_kind(&self) -> Transform {
        self.transform
    }

    /// `f(x)`.
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        self.drift.value(x)
    }

    /// `f'(x)`.
    pub fn drift_d1(&self, x: f64) -> f64 {
        self.drift.d1(x)
    }

    /// `f''(x)`.
    pub fn drift_d2(&self, x: f64) -> f64 {
        self.drift.d2(x)
    }

    /// Constant diffusion of the transformed equation; always positive.
    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    /// Whether the transformed equation is driven by `-w`.
    pub fn flips_noise(&self) -> bool {
        self.flip_noise
    }

    /// Coefficient multiplying the original increment `dw` in the scheme.
    #[inline]
    pub fn signed_noise(&self) -> f64 {
        if self.flip_noise {
            -self.noise_level
        } else {
            self.noise_level
        }
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// `K` with `(x - y)(f(x) - f(y)) <= K (x - y)^2` on the domain.
    pub fn one_sided_lipschitz(&self) -> f64 {
        self.one_sided_lipschitz
    }

    pub fn inverse_drift_structure(&self) -> Option<InverseDriftStructure> {
        self.inverse_drift
    }

    /// `F(y)`.
    pub fn forward(&self, y: f64) -> Result<f64> {
        let y = self.source.domain().check(y)?;
        Ok(self.transform.forward(y))
    }

    /// `F^{-1}(x)`.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        let x = self.domain.check(x)?;
        let y = self.transform.inverse(x);
        self.source.domain().check(y)
    }

    /// `F(y(0))`.
    pub fn initial(&self) -> f64 {
        self.transform.forward(self.source.initial)
    }

    /// Copy with another original-coordinate initial value.
    pub fn with_initial(&self, y0: f64) -> Result<TransformedModel> {
        self.source.domain().check(y0)?;
        let mut tm = self.clone();
        tm.source.initial = y0;
        Ok(tm)
    }

    /// `(A, B)` when `f(x) = A/x - B x` with `A > 0`; the implicit step is then a quadratic.
    pub fn reciprocal_linear_drift(&self) -> Option<(f64, f64)> {
        let TransformedDrift::PowerSum(terms) = &self.drift else {
            return None;
        };
        let mut a = 0.0;
        let mut b = 0.0;
        for t in terms {
            match t.exponent {
                -1.0 => a = t.coef,
                1.0 => b = -t.coef,
                _ => return None,
            }
        }
        (a > 0.0 && b >= 0.0).then_some((a, b))
    }
}

/// `F(y) = y^{1-rho}` applied to `dy = sum a_i y^{s_i} dt + sigma y^rho dw`.
///
/// Returns the transformed drift terms `(1-rho) a_i x^{(s_i - rho)/(1-rho)}` plus the Ito
/// correction `-rho (1-rho) sigma^2 / 2 * x^{-1}`, and the signed noise `(1-rho) sigma`.
pub fn power_lamperti(drift: &[(f64, f64)], sigma: f64, rho: f64) -> (Vec<PowerTerm>, f64) {
    let e = 1.0 - rho;
    let mut terms: Vec<PowerTerm> = Vec::with_capacity(drift.len() + 1);
    let mut push = |coef: f64, exponent: f64| {
        if coef == 0.0 {
            return;
        }
        if let Some(t) = terms.iter_mut().find(|t| t.exponent == exponent) {
            t.coef += coef;
        } else {
            terms.push(PowerTerm { coef, exponent });
        }
    };
    for &(a, s) in drift {
        push(e * a, (s - rho) / e);
    }
    push(-0.5 * rho * e * sigma * sigma, -1.0);
    terms.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
    (terms, e * sigma)
}

/// Number of log-spaced points used to bound `sup f'` when no closed form is known.
pub const LIPSCHITZ_GRID_POINTS: usize = 100_000;
const LIPSCHITZ_GRID_LO: f64 = 1e-8;
const LIPSCHITZ_GRID_HI: f64 = 1e8;
const LIPSCHITZ_MARGIN: f64 = 1.01;

/// `max(0, max_i f'(x_i)) * 1.01` over a log-spaced grid on `[1e-8, 1e8]`.
fn numeric_lipschitz(drift: &TransformedDrift) -> f64 {
    let lo = libm::log10(LIPSCHITZ_GRID_LO);
    let hi = libm::log10(LIPSCHITZ_GRID_HI);
    let n = LIPSCHITZ_GRID_POINTS;
    let sup = (0..n)
        .map(|i| libm::pow(10.0, lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .map(|x| drift.d1(x))
        .filter(|d| d.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    sup.max(0.0) * LIPSCHITZ_MARGIN
}

/// Registers `c1 x^{-m1} + h(x)` when exactly one term is singular at zero, its coefficient
/// is positive, and every other exponent lies in `[0, m2]`.
fn inverse_structure(terms: &[PowerTerm]) -> Option<InverseDriftStructure> {
    let mut singular = terms.iter().filter(|t| t.exponent < 0.0);
    let lead = singular.next()?;
    if singular.next().is_some() || lead.coef <= 0.0 {
        return None;
    }
    let rest: Vec<&PowerTerm> = terms.iter().filter(|t| t.exponent >= 0.0).collect();
    let m2 = rest.iter().map(|t| t.exponent).fold(0.0, f64::max);
    if m2 <= 0.0 {
        return None;
    }
    Some(InverseDriftStructure {
        c1: lead.coef,
        m1: -lead.exponent,
        m2,
        // |x^p| <= 1 + |x|^{m2} for 0 <= p <= m2
        c2: rest.iter().map(|t| abs(t.coef)).sum(),
    })
}

/// Builds the transformed model for a valid specification.
pub fn transform(spec: &ModelSpec) -> Result<TransformedModel> {
    spec.ensure_valid()?;
    let positive = Interval::POSITIVE;
    let tm = match spec.model {
        Model::Cir(p) => {
            let terms = alloc::vec![
                PowerTerm {
                    coef: 0.5 * p.kappa * p.theta_v(),
                    exponent: -1.0
                },
                PowerTerm {
                    coef: -0.5 * p.kappa,
                    exponent: 1.0
                },
            ];
            let inverse_drift = inverse_structure(&terms);
            TransformedModel {
                source: *spec,
                drift: TransformedDrift::PowerSum(terms),
                transform: Transform::Sqrt,
                noise_level: 0.5 * p.sigma,
                flip_noise: false,
                domain: positive,
                one_sided_lipschitz: -0.5 * p.kappa,
                inverse_drift,
            }
        }
        Model::Heston32(p) => {
            let terms = alloc::vec![
                PowerTerm {
                    coef: 0.5 * p.c1 + 0.375 * p.c3 * p.c3,
                    exponent: -1.0
                },
                PowerTerm {
                    coef: -0.5 * p.c1 * p.c2,
                    exponent: 1.0
                },
            ];
            let inverse_drift = inverse_structure(&terms);
            TransformedModel {
                source: *spec,
                drift: TransformedDrift::PowerSum(terms),
                transform: Transform::InverseSqrt,
                noise_level: 0.5 * p.c3,
                flip_noise: true,
                domain: positive,
                one_sided_lipschitz: -0.5 * p.c1 * p.c2,
                inverse_drift,
            }
        }
        Model::Cev(p) => {
            let (terms, noise) = power_lamperti(
                &[(p.kappa * p.theta, 0.0), (-p.kappa, 1.0)],
                p.sigma,
                p.alpha,
            );
            let drift = TransformedDrift::PowerSum(terms);
            let k = numeric_lipschitz(&drift);
            TransformedModel {
                source: *spec,
                drift,
                transform: Transform::Power(1.0 - p.alpha),
                noise_level: noise,
                flip_noise: false,
                domain: positive,
                one_sided_lipschitz: k,
                // two singular terms; see `inverse_structure`
                inverse_drift: None,
            }
        }
        Model::AitSahalia(p) => {
            let (terms, noise) = power_lamperti(
                &[
                    (p.alpha_m1, -1.0),
                    (-p.alpha_0, 0.0),
                    (p.alpha_1, 1.0),
                    (-p.alpha_2, p.r),
                ],
                p.sigma,
                p.rho,
            );
            let inverse_drift = inverse_structure(&terms);
            let drift = TransformedDrift::PowerSum(terms);
            let k = numeric_lipschitz(&drift);
            TransformedModel {
                source: *spec,
                drift,
                transform: if p.rho == 1.5 {
                    Transform::InverseSqrt
                } else {
                    Transform::Power(1.0 - p.rho)
                },
                noise_level: abs(noise),
                flip_noise: noise < 0.0,
                domain: positive,
                one_sided_lipschitz: k,
                inverse_drift,
            }
        }
        Model::WrightFisher(p) => {
            let g2 = p.gamma * p.gamma;
            TransformedModel {
                source: *spec,
                drift: TransformedDrift::HalfAngle {
                    cot_coef: p.a - 0.25 * g2,
                    tan_coef: p.b - p.a - 0.25 * g2,
                },
                transform: Transform::Arcsine,
                noise_level: p.gamma,
                flip_noise: false,
                domain: Interval::new(0.0, core::f64::consts::PI),
                one_sided_lipschitz: 0.0,
                inverse_drift: None,
            }
        }
    };
    Ok(tm)
}

/// Elementwise `F^{-1}`; fails on the first element outside the transformed domain.
pub fn back_transform_path(tm: &TransformedModel, xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter()
        .enumerate()
        .map(|(index, &x)| {
            tm.inverse(x)
                .map_err(|_| Error::DomainAt { index, value: x })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        AitSahaliaParams, CevParams, CirParams, Heston32Params, WrightFisherParams,
    };
    use core::f64::consts::PI;

    fn cir() -> ModelSpec {
        ModelSpec::new(Model::Cir(CirParams::new(2.0, 0.125, 0.5)), 0.125)
    }

    #[test]
    fn cir_transformed_drift() {
        let tm = transform(&cir()).unwrap();
        let theta_v = 0.125 - 0.25 / 8.0;
        assert_eq!(theta_v, 0.093_75);
        for &x in &[0.1, 0.3, 1.0, 2.5] {
            let expected = theta_v / x - x;
            assert!((tm.drift(x) - expected).abs() < 1e-15 * (1.0 + expected.abs()));
        }
        assert!(tm.drift(sqrt(theta_v)).abs() < 1e-16);
        assert_eq!(tm.noise_level(), 0.25);
        assert_eq!(tm.one_sided_lipschitz(), -1.0);
        assert!(!tm.flips_noise());
        assert_eq!(tm.reciprocal_linear_drift(), Some((theta_v, 1.0)));
    }

    #[test]
    fn wright_fisher_drift_vanishes_at_midpoint() {
        let spec = ModelSpec::new(
            Model::WrightFisher(WrightFisherParams {
                a: 1.0,
                b: 2.0,
                gamma: 1.0,
            }),
            0.5,
        );
        let tm = transform(&spec).unwrap();
        assert!(tm.drift(PI / 2.0).abs() < 1e-15);
        assert_eq!(tm.domain(), Interval::new(0.0, PI));
        assert_eq!(tm.one_sided_lipschitz(), 0.0);
    }

    #[test]
    fn heston_matches_flipped_cir_form() {
        let spec = ModelSpec::new(
            Model::Heston32(Heston32Params {
                c1: 1.0,
                c2: 1.0,
                c3: 1.0,
            }),
            1.0,
        );
        let tm = transform(&spec).unwrap();
        assert_eq!(tm.reciprocal_linear_drift(), Some((0.875, 0.5)));
        assert_eq!(tm.noise_level(), 0.5);
        assert!(tm.flips_noise());

        // CIR with kappa = 1, theta = 2, sigma = 1 has the same transformed drift.
        let induced = transform(&ModelSpec::new(
            Model::Cir(CirParams::new(1.0, 2.0, 1.0)),
            1.0,
        ))
        .unwrap();
        for &x in &[0.2, 1.0, 3.0] {
            assert!((tm.drift(x) - induced.drift(x)).abs() < 1e-15);
        }
        assert_eq!(tm.noise_level(), induced.noise_level());
    }

    #[test]
    fn back_transform_examples() {
        let tm = transform(&cir()).unwrap();
        assert_eq!(
            back_transform_path(&tm, &[0.5, 0.25]).unwrap(),
            [0.25, 0.0625]
        );

        let wf = transform(&ModelSpec::new(
            Model::WrightFisher(WrightFisherParams {
                a: 1.0,
                b: 2.0,
                gamma: 1.0,
            }),
            0.5,
        ))
        .unwrap();
        let y = back_transform_path(&wf, &[PI / 2.0]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15);

        let heston = transform(&ModelSpec::new(
            Model::Heston32(Heston32Params {
                c1: 1.0,
                c2: 1.0,
                c3: 1.0,
            }),
            1.0,
        ))
        .unwrap();
        assert_eq!(back_transform_path(&heston, &[2.0]).unwrap(), [0.25]);
    }

    #[test]
    fn back_transform_reports_first_bad_index() {
        let tm = transform(&cir()).unwrap();
        let err = back_transform_path(&tm, &[0.5, -0.1, -0.2]).unwrap_err();
        assert_eq!(
            err,
            Error::DomainAt {
                index: 1,
                value: -0.1
            }
        );
    }

    #[test]
    fn ait_critical_terms() {
        let p = AitSahaliaParams {
            alpha_m1: 1.0,
            alpha_0: 2.0,
            alpha_1: 3.0,
            alpha_2: 4.0,
            sigma: 0.5,
            r: 2.0,
            rho: 1.5,
        };
        let tm = transform(&ModelSpec::new(Model::AitSahalia(p), 1.0)).unwrap();
        let TransformedDrift::PowerSum(terms) = tm.drift_form() else {
            panic!()
        };
        let exps: Vec<f64> = terms.iter().map(|t| t.exponent).collect();
        assert_eq!(exps, [-1.0, 1.0, 3.0, 5.0]);
        assert_eq!(tm.transform_kind(), Transform::InverseSqrt);
        assert!(tm.flips_noise());
        assert_eq!(tm.noise_level(), 0.25);
        let s = tm.inverse_drift_structure().unwrap();
        assert_eq!((s.m1, s.m2), (1.0, 5.0));
        assert!((s.c1 - (2.0 + 0.375 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn cev_has_no_inverse_structure() {
        let spec = ModelSpec::new(
            Model::Cev(CevParams {
                kappa: 2.0,
                theta: 0.1,
                sigma: 0.3,
                alpha: 0.75,
            }),
            0.1,
        );
        let tm = transform(&spec).unwrap();
        assert!(tm.inverse_drift_structure().is_none());
        assert!(tm.one_sided_lipschitz() >= 0.0);
        assert!((tm.noise_level() - 0.075).abs() < 1e-16);
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let spec = ModelSpec::new(Model::Cir(CirParams::new(1.0, 0.1, 1.0)), 0.1);
        assert!(matches!(transform(&spec), Err(Error::InvalidParams(_))));
    }
}
