//! The drift-implicit step `x - f(x) dt = c` on the open domain.
//!
//! With `(x - y)(f(x) - f(y)) <= K (x - y)^2` and `K dt < 1` the map
//! `G(x) = x - f(x) dt` is strictly increasing, and since `f` blows up towards the
//! boundaries with the inward sign, `G` runs from `-inf` to `+inf` across the domain.
//! Every right-hand side therefore has exactly one root strictly inside.

use crate::error::{Error, Result};
use crate::lamperti::TransformedModel;
use crate::math::{abs, sqrt};
use crate::model::{CirParams, Interval};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSolverConfig {
    /// Bound on `|G(x) - c| / max(1, |c|)`.
    pub residual_tol: f64,
    pub max_iterations: u32,
    /// Steps must satisfy `2 max(0, K) dt < eta`.
    pub eta: f64,
}

impl Default for StepSolverConfig {
    fn default() -> Self {
        StepSolverConfig {
            residual_tol: 1e-12,
            max_iterations: 100,
            eta: 0.5,
        }
    }
}

impl StepSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::SolverConfig("residual_tol must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::SolverConfig("eta must lie in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::SolverConfig("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// `2 max(0, K) dt < eta`. Non-positive `K` never restricts the step.
pub fn admissible_step(k: f64, dt: f64, eta: f64) -> bool {
    2.0 * k.max(0.0) * dt < eta
}

fn check_admissible(k: f64, dt: f64, eta: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() && admissible_step(k, dt, eta) {
        Ok(())
    } else {
        Err(Error::InadmissibleStep {
            k,
            dt,
            eta,
            lhs: 2.0 * k.max(0.0) * dt,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitSolution {
    pub x: f64,
    pub iterations: u32,
    /// The bracket collapsed to a few ulps before the residual test passed.
    pub at_precision_limit: bool,
}

/// Solves `x - f(x) dt = c` for `x` strictly inside the transformed domain.
///
/// Newton's method from `guess`, safeguarded by a bracket. The bracket is grown from the
/// guess: by doubling steps towards an infinite end, and by geometrically shrinking the
/// distance towards a finite end, so the boundary itself is never evaluated.
pub fn solve_implicit(
    tm: &TransformedModel,
    dt: f64,
    c: f64,
    guess: f64,
    cfg: &StepSolverConfig,
) -> Result<ImplicitSolution> {
    cfg.validate()?;
    check_admissible(tm.one_sided_lipschitz(), dt, cfg.eta)?;
    solve_monotone(
        |x| x - tm.drift(x) * dt - c,
        |x| 1.0 - tm.drift_d1(x) * dt,
        tm.domain(),
        c,
        guess,
        cfg,
    )
}

/// Root of a strictly increasing `g` on `domain` with `g -> -inf` at the lower end and
/// `g -> +inf` at the upper end. `scale` sets the residual tolerance
/// `cfg.residual_tol * max(1, |scale|)`.
pub fn solve_monotone(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    domain: Interval,
    scale: f64,
    guess: f64,
    cfg: &StepSolverConfig,
) -> Result<ImplicitSolution> {
    if !scale.is_finite() {
        return Err(Error::Domain {
            value: scale,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        });
    }
    let guess = domain.check(guess)?;
    let tol = cfg.residual_tol * scale.abs().max(1.0);

    let r0 = g(guess);
    if abs(r0) <= tol {
        return Ok(ImplicitSolution {
            x: guess,
            iterations: 0,
            at_precision_limit: false,
        });
    }

    // Bracket [lo, hi] with g(lo) < 0 < g(hi).
    let (mut lo, mut hi) = if r0 < 0.0 {
        match expand(&g, guess, domain.hi, true, tol) {
            Expansion::Bracket(inner, outer) => (inner, outer),
            Expansion::Root(x) => return Ok(found(x, 0, false)),
            Expansion::Limit(x) => return Ok(found(x, 0, true)),
        }
    } else {
        match expand(&g, guess, domain.lo, false, tol) {
            Expansion::Bracket(inner, outer) => (outer, inner),
            Expansion::Root(x) => return Ok(found(x, 0, false)),
            Expansion::Limit(x) => return Ok(found(x, 0, true)),
        }
    };

    let first = guess - r0 / dg(guess);
    let mut x = if first > lo && first < hi {
        first
    } else {
        split(lo, hi)
    };
    // bracket widths after the previous two iterations
    let mut widths = [f64::INFINITY; 2];
    for it in 1..=cfg.max_iterations {
        let r = g(x);
        if abs(r) <= tol {
            return Ok(found(x, it, false));
        }
        if r.is_nan() {
            return Err(Error::NoConvergence {
                iterations: it,
                lo,
                hi,
            });
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * ulp(0.5 * (lo + hi)) {
            return Ok(found(midpoint(lo, hi), it, true));
        }
        let newton = x - r / dg(x);
        let width = hi - lo;
        // Newton must land inside the bracket and halve it at least every two iterations.
        let stalled = width > 0.5 * widths[0];
        widths = [widths[1], width];
        x = if newton > lo && newton < hi && !stalled {
            newton
        } else {
            split(lo, hi)
        };
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        lo,
        hi,
    })
}

fn found(x: f64, iterations: u32, at_precision_limit: bool) -> ImplicitSolution {
    ImplicitSolution {
        x,
        iterations,
        at_precision_limit,
    }
}

enum Expansion {
    /// `(inner, outer)`: the last point on the guess side and the first point past the root.
    Bracket(f64, f64),
    Root(f64),
    /// The root sits closer to the boundary than any representable point we can reach.
    Limit(f64),
}

/// Walks from `start` towards `boundary` until `g` changes sign.
fn expand(g: &impl Fn(f64) -> f64, start: f64, boundary: f64, upward: bool, tol: f64) -> Expansion {
    let mut inner = start;
    if boundary.is_finite() {
        // distance to the boundary shrinks by 1/2, 1/4, 1/16, 1/256, ...
        let mut ratio = 0.5_f64;
        loop {
            let dist = abs(boundary - start) * ratio;
            let mut probe = if upward {
                boundary - dist
            } else {
                boundary + dist
            };
            let at_edge = !(if upward {
                probe < boundary
            } else {
                probe > boundary
            });
            if at_edge || dist == 0.0 {
                probe = next_toward(boundary, start);
            }
            let r = g(probe);
            if abs(r) <= tol {
                return Expansion::Root(probe);
            }
            let crossed = if upward { r > 0.0 } else { r < 0.0 };
            if crossed {
                return Expansion::Bracket(inner, probe);
            }
            if probe == next_toward(boundary, start) {
                return Expansion::Limit(probe);
            }
            inner = probe;
            ratio *= ratio;
            if ratio == 0.0 {
                ratio = f64::MIN_POSITIVE;
            }
        }
    } else {
        let mut step = abs(start).max(1.0);
        loop {
            let probe = if upward { inner + step } else { inner - step };
            if !probe.is_finite() {
                return Expansion::Limit(inner);
            }
            let r = g(probe);
            if abs(r) <= tol {
                return Expansion::Root(probe);
            }
            let crossed = if upward { r > 0.0 } else { r < 0.0 };
            if crossed {
                return Expansion::Bracket(inner, probe);
            }
            inner = probe;
            step *= 2.0;
        }
    }
}

/// Bisection point: geometric mean for wide positive brackets, arithmetic otherwise.
fn split(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 4.0 * lo {
        let m = sqrt(lo) * sqrt(hi);
        if m > lo && m < hi {
            return m;
        }
    }
    midpoint(lo, hi)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    lo + 0.5 * (hi - lo)
}

fn ulp(x: f64) -> f64 {
    let x = abs(x);
    if x == 0.0 || !x.is_finite() {
        return f64::MIN_POSITIVE * f64::EPSILON;
    }
    let bits = x.to_bits();
    f64::from_bits(bits + 1) - x
}

/// The representable number adjacent to `boundary` on the side of `toward`.
fn next_toward(boundary: f64, toward: f64) -> f64 {
    if toward > boundary {
        next_up(boundary)
    } else {
        -next_up(-boundary)
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Positive root of `(1 + b dt) x^2 - c x - a dt = 0`, i.e. the implicit step for the
/// drift `f(x) = a/x - b x`. Cancellation-free for both signs of `c`.
pub fn reciprocal_linear_step(a: f64, b: f64, dt: f64, c: f64) -> f64 {
    let lead = 1.0 + b * dt;
    let disc = sqrt(c * c + 4.0 * lead * a * dt);
    if c >= 0.0 {
        (c + disc) / (2.0 * lead)
    } else {
        2.0 * a * dt / (disc - c)
    }
}

/// One backward Euler step for the square-root CIR process:
/// `X_{k+1} = (c + sqrt(c^2 + (2 + kappa dt) kappa theta_v dt)) / (2 + kappa dt)`
/// with `c = X_k + sigma dw / 2`.
pub fn cir_step_closed_form(params: &CirParams, dt: f64, xk: f64, dw: f64) -> f64 {
    let c = xk + 0.5 * params.sigma * dw;
    reciprocal_linear_step(
        0.5 * params.kappa * params.theta_v(),
        0.5 * params.kappa,
        dt,
        c,
    )
}

/// Drift-implicit Milstein step for CIR,
/// `Z_{k+1} = (Z_k + kappa theta dt + sigma sqrt(Z_k) dw + sigma^2/4 (dw^2 - dt)) / (1 + kappa dt)`,
/// evaluated as `((sqrt(Z_k) + sigma dw / 2)^2 + (kappa theta - sigma^2/4) dt) / (1 + kappa dt)`.
pub fn milstein_cir_step(params: &CirParams, dt: f64, zk: f64, dw: f64) -> Result<f64> {
    Interval::POSITIVE.check(zk)?;
    let s = sqrt(zk) + 0.5 * params.sigma * dw;
    let shift = (params.kappa * params.theta - 0.25 * params.sigma * params.sigma) * dt;
    Ok((s * s + shift) / (1.0 + params.kappa * dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility() {
        assert!(admissible_step(-1.0, 0.5, 0.5));
        assert!(admissible_step(1.0, 0.2, 0.5));
        assert!(!admissible_step(1.0, 0.3, 0.5));
        assert!(admissible_step(0.0, 1e9, 0.5));
    }

    #[test]
    fn config_validation() {
        let mut cfg = StepSolverConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.eta = 1.0;
        assert!(cfg.validate().is_err());
        cfg.eta = 0.5;
        cfg.residual_tol = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn monotone_solver_on_cubic() {
        let cfg = StepSolverConfig::default();
        let sol = solve_monotone(
            |x| x * x * x - 8.0,
            |x| 3.0 * x * x,
            Interval::new(f64::NEG_INFINITY, f64::INFINITY),
            8.0,
            -5.0,
            &cfg,
        )
        .unwrap();
        assert!((sol.x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn root_near_finite_boundary() {
        // g(x) = x - 1e-300/x on (0, inf): root at 1e-150
        let cfg = StepSolverConfig::default();
        let sol = solve_monotone(
            |x| x - 1e-300 / x,
            |x| 1.0 + 1e-300 / (x * x),
            Interval::POSITIVE,
            0.0,
            1.0,
            &cfg,
        )
        .unwrap();
        assert!(sol.x > 0.0);
        assert!((sol.x - 1e-300 / sol.x).abs() <= cfg.residual_tol);
        // a tight tolerance forces the root itself
        let cfg = StepSolverConfig {
            residual_tol: 1e-200,
            ..cfg
        };
        let sol = solve_monotone(
            |x| x - 1e-300 / x,
            |x| 1.0 + 1e-300 / (x * x),
            Interval::POSITIVE,
            0.0,
            1.0,
            &cfg,
        )
        .unwrap();
        assert!((sol.x / 1e-150 - 1.0).abs() < 1e-12, "{}", sol.x);
    }

    #[test]
    fn quadratic_step_both_branches() {
        for &c in &[-50.0, -1.0, -1e-3, 0.0, 1e-3, 1.0, 50.0] {
            let (a, b, dt) = (0.09375, 1.0, 0.0625);
            let x = reciprocal_linear_step(a, b, dt, c);
            assert!(x > 0.0);
            let resid = x - (a / x - b * x) * dt - c;
            assert!(
                resid.abs() <= 1e-14 * (1.0 + c.abs()),
                "c={c} resid={resid}"
            );
        }
    }

    #[test]
    fn milstein_rejects_non_positive_state() {
        let p = CirParams::new(2.0, 0.125, 0.5);
        assert!(milstein_cir_step(&p, 0.01, 0.0, 0.1).is_err());
        assert!(milstein_cir_step(&p, 0.01, -1.0, 0.1).is_err());
    }

    #[test]
    fn milstein_without_noise() {
        let p = CirParams::new(2.0, 0.125, 0.5);
        let dt = 1.0 / 256.0;
        let z = 0.3;
        let got = milstein_cir_step(&p, dt, z, 0.0).unwrap();
        let expected =
            (z + p.kappa * p.theta * dt - p.sigma * p.sigma * dt / 4.0) / (1.0 + p.kappa * dt);
        assert!((got - expected).abs() < 1e-16);
    }
}
