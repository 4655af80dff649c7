//! Monte Carlo strong errors over coupled fine/coarse paths, log-log order fits and
//! moment monitors.
//!
//! All metrics are `E|.|^p` without the `p`-th root, so the fitted slope of an order-one
//! scheme is close to `p`.
//!
//! Paths are evaluated through a [`PathMap`], which may run them in parallel but must
//! return results in path-index order. Every mean is accumulated in that order with
//! compensated summation, so estimates do not depend on how many workers ran them.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::brownian::{coarsen, dyadic_ratio, sample_path, BrownianPath, GridSpec, SeedId};
use crate::error::{Error, Result};
use crate::implicit::admissible_step;
use crate::lamperti::{transform, TransformedModel};
use crate::math::{abs, ln, mean_and_std_error, pow, sqrt, KahanSum};
use crate::model::{max_strong_order_p, CirParams, Coordinates, Model, ModelSpec};
use crate::schemes::{
    run_bem, run_explicit_em, run_lbe_transformed, run_milstein_cir, Record, SchemeConfig,
    SchemeId, SchemeRun,
};

/// Evaluates `f` on every index of a range, returning results in index order.
pub trait PathMap {
    fn map_range<T, F>(&self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs paths one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl PathMap for Serial {
    fn map_range<T, F>(&self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        range.map(f).collect()
    }
}

/// Paths per batch when per-grid-point statistics are accumulated.
const BATCH: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// `E|ref(T) - approx(T)|^p`.
    EndpointLp,
    /// `E max_k |ref(t_k) - approx(t_k)|^p` over the coarse grid.
    MaxGridLp,
    /// `max_k E|Z_k - Y_k|` between Milstein and LBE on the same grid.
    MilsteinL1Grid,
    /// `E max_k |y_ref(t_k) - Z_k|^2` between a fine LBE reference and Milstein.
    MilsteinSupL2,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::EndpointLp,
        Metric::MaxGridLp,
        Metric::MilsteinL1Grid,
        Metric::MilsteinSupL2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::EndpointLp => "endpoint-lp",
            Metric::MaxGridLp => "max-grid-lp",
            Metric::MilsteinL1Grid => "milstein-l1-grid",
            Metric::MilsteinSupL2 => "milstein-sup-l2",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub dt: f64,
    pub metric: Metric,
    pub p: f64,
    pub value: f64,
    pub n_paths: usize,
    pub std_error: f64,
    /// `p` exceeds the model's proven convergence threshold.
    pub outside_guaranteed_regime: bool,
}

/// A strong-error experiment: one scheme compared against itself on a fine reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorStudy {
    pub spec: ModelSpec,
    pub scheme: SchemeId,
    pub horizon: f64,
    pub dt_reference: f64,
    pub metric: Metric,
    pub p: f64,
    pub n_paths: usize,
    pub stream: u64,
    /// Solver settings; the record mode is chosen by the study.
    pub config: SchemeConfig,
}

impl StrongErrorStudy {
    /// BEM in transformed coordinates with the endpoint squared error and 1000 paths.
    pub fn new(spec: ModelSpec, horizon: f64, dt_reference: f64) -> Self {
        StrongErrorStudy {
            spec,
            scheme: SchemeId::BemTransformed,
            horizon,
            dt_reference,
            metric: Metric::EndpointLp,
            p: 2.0,
            n_paths: 1000,
            stream: 0,
            config: SchemeConfig::default(),
        }
    }
}

/// A prepared study: validated model, transform and admissibility of every step size.
struct Runner<'a> {
    study: &'a StrongErrorStudy,
    tm: Option<TransformedModel>,
    cir: Option<CirParams>,
}

impl<'a> Runner<'a> {
    fn new(study: &'a StrongErrorStudy, dts: &[f64]) -> Result<Self> {
        study.spec.ensure_valid()?;
        study.config.solver.validate()?;
        if !(study.p >= 1.0 && study.p.is_finite()) {
            return Err(Error::InvalidParams(alloc::format!(
                "error exponent p must be finite and at least 1, got {}",
                study.p
            )));
        }
        if !matches!(study.metric, Metric::EndpointLp | Metric::MaxGridLp) {
            return Err(Error::Unsupported(
                "strong-error studies use the endpoint or max-grid metric",
            ));
        }
        if study.n_paths == 0 {
            return Err(Error::InvalidParams("at least one path is needed".into()));
        }
        let mut runner = Runner {
            study,
            tm: None,
            cir: None,
        };
        match study.scheme {
            SchemeId::BemTransformed | SchemeId::Lbe => {
                let tm = transform(&study.spec)?;
                let k = tm.one_sided_lipschitz();
                let eta = study.config.solver.eta;
                for &dt in dts.iter().chain([study.dt_reference].iter()) {
                    if !admissible_step(k, dt, eta) {
                        return Err(Error::InadmissibleStep {
                            k,
                            dt,
                            eta,
                            lhs: 2.0 * k.max(0.0) * dt,
                        });
                    }
                }
                runner.tm = Some(tm);
            }
            SchemeId::MilsteinCir => match study.spec.model {
                Model::Cir(p) => runner.cir = Some(p),
                _ => {
                    return Err(Error::Unsupported(
                        "the Milstein scheme is implemented for CIR only",
                    ))
                }
            },
            SchemeId::ExplicitEm => {}
        }
        Ok(runner)
    }

    fn run(&self, path: &BrownianPath, record: Record) -> Result<SchemeRun> {
        let cfg = SchemeConfig {
            record,
            ..self.study.config
        };
        match self.study.scheme {
            SchemeId::BemTransformed => run_bem(self.tm.as_ref().unwrap(), path, &cfg),
            SchemeId::Lbe => run_lbe_transformed(self.tm.as_ref().unwrap(), path, &cfg),
            SchemeId::MilsteinCir => run_milstein_cir(
                self.cir.as_ref().unwrap(),
                self.study.spec.initial,
                path,
                record,
            ),
            SchemeId::ExplicitEm => run_explicit_em(&self.study.spec, path, record),
        }
    }

    fn outside_regime(&self) -> Result<bool> {
        Ok(self.study.p > max_strong_order_p(&self.study.spec)?)
    }
}

/// Per-path error samples for every coarse step, all driven by one fine path.
fn path_errors(runner: &Runner<'_>, fine: &BrownianPath, factors: &[usize]) -> Result<Vec<f64>> {
    let study = runner.study;
    let min_factor = factors.iter().copied().min().unwrap_or(1);
    let (record, ref_stride) = match study.metric {
        Metric::EndpointLp => (Record::Endpoint, fine.len()),
        _ => (Record::Stride(min_factor), min_factor),
    };
    let reference = runner.run(fine, record)?;
    let mut out = Vec::with_capacity(factors.len());
    for &factor in factors {
        let path = coarsen(fine, factor)?;
        let sample = match study.metric {
            Metric::EndpointLp => {
                let approx = runner.run(&path, Record::Endpoint)?;
                pow(abs(reference.endpoint() - approx.endpoint()), study.p)
            }
            _ => {
                let approx = runner.run(&path, Record::Full)?;
                let step = factor / ref_stride;
                approx
                    .states
                    .iter()
                    .enumerate()
                    .map(|(k, z)| pow(abs(reference.states[k * step] - z), study.p))
                    .fold(0.0, f64::max)
            }
        };
        out.push(sample);
    }
    Ok(out)
}

/// Strong-error estimates for each step in `dts`, every one coupled to the same fine
/// reference paths. Estimates come back in the order of `dts`.
pub fn estimate_ladder<M: PathMap>(
    study: &StrongErrorStudy,
    dts: &[f64],
    map: &M,
) -> Result<Vec<ErrorEstimate>> {
    let fine_grid = GridSpec::new(study.horizon, study.dt_reference)?;
    let factors = dts
        .iter()
        .map(|&dt| {
            let factor = dyadic_ratio(dt, study.dt_reference)?;
            fine_grid.coarsen(factor)?;
            Ok(factor)
        })
        .collect::<Result<Vec<_>>>()?;
    let runner = Runner::new(study, dts)?;
    let outside = runner.outside_regime()?;

    let samples = map.map_range(0..study.n_paths, |i| {
        let fine = sample_path(&fine_grid, SeedId::new(study.stream, i as u64));
        path_errors(&runner, &fine, &factors)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(dts
        .iter()
        .enumerate()
        .map(|(j, &dt)| {
            let (value, std_error) = mean_and_std_error(samples.iter().map(|s| s[j]));
            ErrorEstimate {
                dt,
                metric: study.metric,
                p: study.p,
                value,
                n_paths: study.n_paths,
                std_error,
                outside_guaranteed_regime: outside,
            }
        })
        .collect())
}

/// Strong error of the scheme at `dt_coarse` against the study's reference step.
pub fn estimate_strong_error<M: PathMap>(
    study: &StrongErrorStudy,
    dt_coarse: f64,
    map: &M,
) -> Result<ErrorEstimate> {
    Ok(estimate_ladder(study, &[dt_coarse], map)?[0])
}

/// Least-squares line `ln e = log_c + slope ln dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub log_c: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    /// `sqrt(residual / n)`.
    pub residual_rms: f64,
}

/// Ordinary least squares on `(ln dt, ln e)`.
pub fn fit_power_law(dts: &[f64], values: &[f64]) -> Result<PowerLawFit> {
    if dts.len() != values.len() {
        return Err(Error::DegenerateFit(
            "step and error lists differ in length",
        ));
    }
    if dts.len() < 3 {
        return Err(Error::DegenerateFit("at least three step sizes are needed"));
    }
    if dts.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::DegenerateFit(
            "step sizes must be positive and finite",
        ));
    }
    if values.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit("errors must be positive and finite"));
    }
    let n = dts.len() as f64;
    let xs: Vec<f64> = dts.iter().map(|&d| ln(d)).collect();
    let ys: Vec<f64> = values.iter().map(|&e| ln(e)).collect();
    let mean = |v: &[f64]| {
        let mut s = KahanSum::default();
        v.iter().for_each(|&x| s.add(x));
        s.total() / n
    };
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut sxx = KahanSum::default();
    let mut sxy = KahanSum::default();
    for (x, y) in xs.iter().zip(&ys) {
        sxx.add((x - mx) * (x - mx));
        sxy.add((x - mx) * (y - my));
    }
    if !(sxx.total() > 0.0) {
        return Err(Error::DegenerateFit("step sizes must not all be equal"));
    }
    let slope = sxy.total() / sxx.total();
    let log_c = my - slope * mx;
    let mut rss = KahanSum::default();
    for (x, y) in xs.iter().zip(&ys) {
        let r = y - (log_c + slope * x);
        rss.add(r * r);
    }
    let residual = rss.total();
    Ok(PowerLawFit {
        slope,
        log_c,
        residual,
        residual_rms: sqrt(residual / n),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Sorted by increasing `dt`.
    pub estimates: Vec<ErrorEstimate>,
    pub slope: f64,
    pub log_c: f64,
    /// Sum of squared residuals of the log-log fit.
    pub residual: f64,
    pub residual_rms: f64,
}

/// Fits `e = C dt^q` to the estimates.
pub fn fit_convergence(estimates: &[ErrorEstimate]) -> Result<ConvergenceReport> {
    let mut estimates = estimates.to_vec();
    estimates.sort_by(|a, b| a.dt.total_cmp(&b.dt));
    let dts: Vec<f64> = estimates.iter().map(|e| e.dt).collect();
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let fit = fit_power_law(&dts, &values)?;
    Ok(ConvergenceReport {
        estimates,
        slope: fit.slope,
        log_c: fit.log_c,
        residual: fit.residual,
        residual_rms: fit.residual_rms,
    })
}

/// [`estimate_ladder`] followed by [`fit_convergence`].
pub fn convergence_study<M: PathMap>(
    study: &StrongErrorStudy,
    dts: &[f64],
    map: &M,
) -> Result<ConvergenceReport> {
    fit_convergence(&estimate_ladder(study, dts, map)?)
}

/// Milstein against LBE for CIR on a ladder of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MilsteinComparisonSetup {
    pub params: CirParams,
    pub initial: f64,
    pub horizon: f64,
    pub dts: Vec<f64>,
    /// Fine LBE reference for the sup-L2 gap; `None` skips that metric.
    pub dt_reference: Option<f64>,
    pub n_paths: usize,
    pub stream: u64,
    pub config: SchemeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub dt: f64,
    pub l1_grid_gap: ErrorEstimate,
    pub sup_l2_gap: Option<ErrorEstimate>,
    /// Grid points with `Z_k < Y_k` beyond a 4-ulp slack, over all paths.
    pub domination_violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilsteinComparison {
    /// `kappa theta / sigma^2`.
    pub regime_ratio: f64,
    /// `kappa theta / sigma^2 > 3/2`, the hypothesis of the O(dt) gap bound.
    pub in_guaranteed_regime: bool,
    pub rows: Vec<ComparisonRow>,
    pub l1_fit: Option<PowerLawFit>,
    pub sup_l2_fit: Option<PowerLawFit>,
}

/// `z < y` by more than four units in the last place of `y`.
pub fn below_with_slack(z: f64, y: f64) -> bool {
    z < y - 4.0 * ulp(y)
}

fn ulp(x: f64) -> f64 {
    let x = abs(x);
    if !x.is_finite() {
        return f64::NAN;
    }
    f64::from_bits(x.to_bits() + 1) - x
}

struct PathGaps {
    /// `|Z_k - Y_k|` per grid point, one vector per step size.
    l1: Vec<Vec<f64>>,
    sup_l2: Vec<f64>,
    violations: Vec<u64>,
}

/// Gaps between Milstein `Z` and LBE `Y = X^2` for CIR, plus the sup-L2 distance of `Z` to
/// a fine LBE reference.
pub fn compare_milstein_lbe<M: PathMap>(
    setup: &MilsteinComparisonSetup,
    map: &M,
) -> Result<MilsteinComparison> {
    let spec = ModelSpec::new(Model::Cir(setup.params), setup.initial);
    spec.ensure_valid()?;
    let p = setup.params;
    if !(2.0 * p.kappa * p.theta >= p.sigma * p.sigma) {
        return Err(Error::InvalidParams(
            "the Milstein comparison needs 2*kappa*theta >= sigma^2".into(),
        ));
    }
    if setup.dts.is_empty() || setup.n_paths == 0 {
        return Err(Error::InvalidParams(
            "empty comparison ladder or no paths".into(),
        ));
    }
    let dt_fine = match setup.dt_reference {
        Some(r) => r,
        None => setup.dts.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let fine_grid = GridSpec::new(setup.horizon, dt_fine)?;
    let factors = setup
        .dts
        .iter()
        .map(|&dt| {
            let f = dyadic_ratio(dt, dt_fine)?;
            fine_grid.coarsen(f)?;
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    let min_factor = factors.iter().copied().min().unwrap();
    let tm = transform(&spec)?;
    let lbe_cfg = SchemeConfig {
        record: Record::Full,
        ..setup.config
    };

    let one_path = |i: usize| -> Result<PathGaps> {
        let fine = sample_path(&fine_grid, SeedId::new(setup.stream, i as u64));
        let reference = match setup.dt_reference {
            Some(_) => Some(run_lbe_transformed(
                &tm,
                &fine,
                &SchemeConfig {
                    record: Record::Stride(min_factor),
                    ..setup.config
                },
            )?),
            None => None,
        };
        let mut gaps = PathGaps {
            l1: Vec::with_capacity(factors.len()),
            sup_l2: Vec::with_capacity(factors.len()),
            violations: Vec::with_capacity(factors.len()),
        };
        for &factor in &factors {
            let path = coarsen(&fine, factor)?;
            let y = run_lbe_transformed(&tm, &path, &lbe_cfg)?;
            let z = run_milstein_cir(&p, setup.initial, &path, Record::Full)?;
            let mut violations = 0;
            let l1 = z
                .states
                .iter()
                .zip(&y.states)
                .map(|(&zk, &yk)| {
                    violations += u64::from(below_with_slack(zk, yk));
                    abs(zk - yk)
                })
                .collect();
            gaps.l1.push(l1);
            gaps.violations.push(violations);
            if let Some(r) = &reference {
                let step = factor / min_factor;
                let sup = z
                    .states
                    .iter()
                    .enumerate()
                    .map(|(k, zk)| {
                        let d = r.states[k * step] - zk;
                        d * d
                    })
                    .fold(0.0, f64::max);
                gaps.sup_l2.push(sup);
            }
        }
        Ok(gaps)
    };

    // Per-grid-point sums, accumulated batch by batch in path order.
    let mut l1_sums: Vec<Vec<KahanSum>> = factors
        .iter()
        .map(|&f| vec![KahanSum::default(); fine_grid.n_steps() / f + 1])
        .collect();
    let mut l1_sq_sums = l1_sums.clone();
    let mut sup_samples: Vec<Vec<f64>> = vec![Vec::with_capacity(setup.n_paths); factors.len()];
    let mut violations = vec![0u64; factors.len()];
    let mut start = 0;
    while start < setup.n_paths {
        let end = (start + BATCH).min(setup.n_paths);
        for gaps in map.map_range(start..end, one_path) {
            let gaps = gaps?;
            for j in 0..factors.len() {
                for (k, &g) in gaps.l1[j].iter().enumerate() {
                    l1_sums[j][k].add(g);
                    l1_sq_sums[j][k].add(g * g);
                }
                violations[j] += gaps.violations[j];
                if let Some(&s) = gaps.sup_l2.get(j) {
                    sup_samples[j].push(s);
                }
            }
        }
        start = end;
    }

    let n = setup.n_paths as f64;
    let outside = 1.0 > max_strong_order_p(&spec)?;
    let mut rows = Vec::with_capacity(factors.len());
    for (j, &dt) in setup.dts.iter().enumerate() {
        let (k_max, mean) = l1_sums[j].iter().map(|s| s.total() / n).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, m)| if m > acc.1 { (k, m) } else { acc },
        );
        let var = if setup.n_paths > 1 {
            ((l1_sq_sums[j][k_max].total() - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let l1_grid_gap = ErrorEstimate {
            dt,
            metric: Metric::MilsteinL1Grid,
            p: 1.0,
            value: mean,
            n_paths: setup.n_paths,
            std_error: sqrt(var / n),
            outside_guaranteed_regime: outside,
        };
        let sup_l2_gap = setup.dt_reference.map(|_| {
            let (value, std_error) = mean_and_std_error(sup_samples[j].iter().copied());
            ErrorEstimate {
                dt,
                metric: Metric::MilsteinSupL2,
                p: 2.0,
                value,
                n_paths: setup.n_paths,
                std_error,
                outside_guaranteed_regime: 2.0 > max_strong_order_p(&spec).unwrap_or(f64::INFINITY),
            }
        });
        rows.push(ComparisonRow {
            dt,
            l1_grid_gap,
            sup_l2_gap,
            domination_violations: violations[j],
        });
    }
    rows.sort_by(|a, b| a.dt.total_cmp(&b.dt));

    let fit = |values: Vec<f64>| {
        let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
        fit_power_law(&dts, &values).ok()
    };
    let l1_fit = fit(rows.iter().map(|r| r.l1_grid_gap.value).collect());
    let sup_l2_fit = if setup.dt_reference.is_some() {
        fit(rows.iter().map(|r| r.sup_l2_gap.unwrap().value).collect())
    } else {
        None
    };
    let regime_ratio = p.kappa * p.theta / (p.sigma * p.sigma);
    Ok(MilsteinComparison {
        regime_ratio,
        in_guaranteed_regime: regime_ratio > 1.5,
        rows,
        l1_fit,
        sup_l2_fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub q: f64,
    /// Empirical `E max_k |state_k|^q`.
    pub value: f64,
    pub std_error: f64,
    /// Empirical `max_k E|state_k|^q`, the grid version of `sup_t E|state(t)|^q`.
    pub sup_mean: f64,
    /// `q` lies outside the range where the moment is known to be finite.
    pub outside_regime: bool,
}

fn abs_pow(x: f64, q: f64) -> f64 {
    if q == 0.0 {
        1.0
    } else {
        pow(abs(x), q)
    }
}

/// Empirical `E max_k |state_k|^q` and `max_k E|state_k|^q` for each `q`. Negative `q`
/// weighs the state closest to zero. States are in transformed coordinates for BEM and
/// original ones otherwise.
#[allow(clippy::too_many_arguments)]
pub fn moment_monitor<M: PathMap>(
    spec: &ModelSpec,
    scheme: SchemeId,
    grid: &GridSpec,
    qs: &[f64],
    n_paths: usize,
    stream: u64,
    config: &SchemeConfig,
    map: &M,
) -> Result<Vec<MomentEstimate>> {
    let study = StrongErrorStudy {
        scheme,
        n_paths: n_paths.max(1),
        stream,
        config: *config,
        ..StrongErrorStudy::new(*spec, grid.horizon(), grid.dt())
    };
    let runner = Runner::new(&study, &[])?;
    let n_points = grid.n_steps() + 1;
    let mut extremes: Vec<(f64, f64)> = Vec::with_capacity(n_paths);
    let mut sums: Vec<Vec<KahanSum>> = qs
        .iter()
        .map(|_| vec![KahanSum::default(); n_points])
        .collect();
    let mut start = 0;
    while start < n_paths {
        let end = (start + BATCH).min(n_paths);
        let runs = map.map_range(start..end, |i| {
            let path = sample_path(grid, SeedId::new(stream, i as u64));
            Ok(runner.run(&path, Record::Full)?.states)
        });
        for states in runs {
            let states: Vec<f64> = states?;
            let (mut smallest, mut largest) = (f64::INFINITY, 0f64);
            for &x in &states {
                smallest = smallest.min(abs(x));
                largest = largest.max(abs(x));
            }
            extremes.push((smallest, largest));
            for (acc, &q) in sums.iter_mut().zip(qs) {
                for (a, &x) in acc.iter_mut().zip(&states) {
                    a.add(abs_pow(x, q));
                }
            }
        }
        start = end;
    }
    let coords = match scheme {
        SchemeId::BemTransformed => Coordinates::Transformed,
        _ => Coordinates::Original,
    };
    let (lo, hi) = spec.finite_moment_range(coords);
    let n = n_paths.max(1) as f64;
    Ok(qs
        .iter()
        .zip(&sums)
        .map(|(&q, acc)| {
            let (value, std_error) = if q == 0.0 {
                (1.0, 0.0)
            } else {
                mean_and_std_error(
                    extremes
                        .iter()
                        .map(|&(s, l)| if q > 0.0 { pow(l, q) } else { pow(s, q) }),
                )
            };
            let sup_mean = if q == 0.0 {
                1.0
            } else {
                acc.iter()
                    .map(|a| a.total() / n)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            MomentEstimate {
                q,
                value,
                std_error,
                sup_mean,
                outside_regime: !(q > lo && q < hi),
            }
        })
        .collect())
}
