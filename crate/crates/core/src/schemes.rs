//! Time stepping over a Brownian path.

use alloc::vec::Vec;
use core::fmt;

use crate::brownian::{BrownianPath, GridSpec};
use crate::error::{Error, Result};
use crate::implicit::{
    milstein_cir_step, reciprocal_linear_step, solve_implicit, StepSolverConfig,
};
use crate::lamperti::{transform, TransformedModel};
use crate::model::{CirParams, Interval, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    /// Backward Euler on the transformed equation; states in transformed coordinates.
    BemTransformed,
    /// Lamperti-backward Euler: BEM mapped back with `F^{-1}`.
    Lbe,
    /// Drift-implicit Milstein for CIR.
    MilsteinCir,
    /// Explicit Euler-Maruyama in original coordinates.
    ExplicitEm,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::BemTransformed,
        SchemeId::Lbe,
        SchemeId::MilsteinCir,
        SchemeId::ExplicitEm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::BemTransformed => "bem-transformed",
            SchemeId::Lbe => "lbe",
            SchemeId::MilsteinCir => "milstein-cir",
            SchemeId::ExplicitEm => "explicit-em",
        }
    }

    pub fn from_name(name: &str) -> Option<SchemeId> {
        SchemeId::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Closed-form quadratic step when the drift is `a/x - b x`, iterative otherwise.
    #[default]
    Auto,
    Iterative,
}

/// Which grid states a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Record {
    #[default]
    Full,
    /// Every `n`-th state (`n` must divide the step count).
    Stride(usize),
    /// Initial and final state only.
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SchemeConfig {
    pub solver: StepSolverConfig,
    pub choice: SolverChoice,
    pub record: Record,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub solver_iterations: u64,
    /// Extremes over every grid state, recorded or not.
    pub min_state: f64,
    pub max_state: f64,
    pub precision_limit_hits: u64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            solver_iterations: 0,
            min_state: f64::INFINITY,
            max_state: f64::NEG_INFINITY,
            precision_limit_hits: 0,
        }
    }
}

impl Diagnostics {
    fn observe(&mut self, y: f64) {
        self.min_state = self.min_state.min(y);
        self.max_state = self.max_state.max(y);
    }
}

/// A trajectory. `states[j]` sits at grid index `j * stride`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub scheme: SchemeId,
    pub grid: GridSpec,
    pub stride: usize,
    pub states: Vec<f64>,
    /// Transformed-coordinate states for LBE runs.
    pub transformed: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl SchemeRun {
    pub fn endpoint(&self) -> f64 {
        *self
            .states
            .last()
            .expect("a run has at least its initial state")
    }

    /// Time of recorded state `j`.
    pub fn time(&self, j: usize) -> f64 {
        self.grid.time(j * self.stride)
    }
}

fn stride_for(record: Record, grid: &GridSpec) -> Result<usize> {
    let n = grid.n_steps();
    match record {
        Record::Full => Ok(1),
        Record::Endpoint => Ok(n),
        Record::Stride(s) if s >= 1 && n.is_multiple_of(s) => Ok(s),
        Record::Stride(s) => Err(Error::NonDivisible { len: n, factor: s }),
    }
}

struct Recorder {
    stride: usize,
    states: Vec<f64>,
    transformed: Option<Vec<f64>>,
}

impl Recorder {
    fn new(stride: usize, n_steps: usize, keep_transformed: bool) -> Self {
        let cap = n_steps / stride + 1;
        Recorder {
            stride,
            states: Vec::with_capacity(cap),
            transformed: keep_transformed.then(|| Vec::with_capacity(cap)),
        }
    }

    #[inline]
    fn push(&mut self, k: usize, state: f64, transformed: f64) {
        if k.is_multiple_of(self.stride) {
            self.states.push(state);
            if let Some(t) = &mut self.transformed {
                t.push(transformed);
            }
        }
    }
}

/// BEM loop shared by [`run_bem`] and [`run_lbe`]; `to_output` maps each transformed state
/// to the recorded coordinate.
fn bem_loop(
    tm: &TransformedModel,
    path: &BrownianPath,
    cfg: &SchemeConfig,
    scheme: SchemeId,
    to_output: impl Fn(f64) -> Result<f64>,
) -> Result<SchemeRun> {
    let grid = *path.grid();
    let dt = grid.dt();
    cfg.solver.validate()?;
    let k_lip = tm.one_sided_lipschitz();
    if !crate::implicit::admissible_step(k_lip, dt, cfg.solver.eta) {
        return Err(Error::InadmissibleStep {
            k: k_lip,
            dt,
            eta: cfg.solver.eta,
            lhs: 2.0 * k_lip.max(0.0) * dt,
        });
    }
    let stride = stride_for(cfg.record, &grid)?;
    let closed = match cfg.choice {
        SolverChoice::Auto => tm.reciprocal_linear_drift(),
        SolverChoice::Iterative => None,
    };
    let noise = tm.signed_noise();
    let domain = tm.domain();

    let mut diagnostics = Diagnostics::default();
    let mut rec = Recorder::new(stride, grid.n_steps(), scheme == SchemeId::Lbe);
    let mut x = domain.check(tm.initial())?;
    let y0 = match scheme {
        // exact initial value rather than F^{-1}(F(y0))
        SchemeId::Lbe => tm.source().initial,
        _ => to_output(x)?,
    };
    diagnostics.observe(y0);
    rec.push(0, y0, x);

    for (k, dw) in path.increments().enumerate() {
        let c = x + noise * dw;
        let next = match closed {
            Some((a, b)) => reciprocal_linear_step(a, b, dt, c),
            None => {
                let sol = solve_implicit(tm, dt, c, x, &cfg.solver)
                    .map_err(|e| Error::at_step(k + 1, e))?;
                diagnostics.solver_iterations += u64::from(sol.iterations);
                diagnostics.precision_limit_hits += u64::from(sol.at_precision_limit);
                sol.x
            }
        };
        x = domain.check(next).map_err(|e| Error::at_step(k + 1, e))?;
        let y = to_output(x).map_err(|e| Error::at_step(k + 1, e))?;
        diagnostics.observe(y);
        rec.push(k + 1, y, x);
    }

    Ok(SchemeRun {
        scheme,
        grid,
        stride,
        states: rec.states,
        transformed: rec.transformed,
        diagnostics,
    })
}

/// Backward Euler-Maruyama `X_{k+1} = X_k + f(X_{k+1}) dt + lambda dw_{k+1}` on the
/// transformed equation, started at `F(y(0))`. Models driven by `-w` see negated increments.
pub fn run_bem(
    tm: &TransformedModel,
    path: &BrownianPath,
    cfg: &SchemeConfig,
) -> Result<SchemeRun> {
    bem_loop(tm, path, cfg, SchemeId::BemTransformed, Ok)
}

/// `Y_k = F^{-1}(X_k)` with `X_k` from [`run_bem`].
pub fn run_lbe_transformed(
    tm: &TransformedModel,
    path: &BrownianPath,
    cfg: &SchemeConfig,
) -> Result<SchemeRun> {
    bem_loop(tm, path, cfg, SchemeId::Lbe, |x| tm.inverse(x))
}

/// Transforms `spec` and runs [`run_lbe_transformed`]. The transform is rebuilt on every
/// call, so loops over many paths should transform once and call the latter directly.
pub fn run_lbe(spec: &ModelSpec, path: &BrownianPath, cfg: &SchemeConfig) -> Result<SchemeRun> {
    let tm = transform(spec)?;
    run_lbe_transformed(&tm, path, cfg)
}

/// Drift-implicit Milstein for CIR started at `y0 > 0`.
pub fn run_milstein_cir(
    params: &CirParams,
    y0: f64,
    path: &BrownianPath,
    record: Record,
) -> Result<SchemeRun> {
    if !(2.0 * params.kappa * params.theta >= params.sigma * params.sigma) {
        return Err(Error::InvalidParams(alloc::format!(
            "drift-implicit Milstein needs 2*kappa*theta >= sigma^2 (got {} < {})",
            2.0 * params.kappa * params.theta,
            params.sigma * params.sigma
        )));
    }
    let grid = *path.grid();
    let dt = grid.dt();
    let stride = stride_for(record, &grid)?;
    let mut rec = Recorder::new(stride, grid.n_steps(), false);
    let mut diagnostics = Diagnostics::default();
    let mut z = Interval::POSITIVE.check(y0)?;
    diagnostics.observe(z);
    rec.push(0, z, z);
    for (k, dw) in path.increments().enumerate() {
        let next = milstein_cir_step(params, dt, z, dw).map_err(|e| Error::at_step(k, e))?;
        z = Interval::POSITIVE
            .check(next)
            .map_err(|e| Error::at_step(k + 1, e))?;
        diagnostics.observe(z);
        rec.push(k + 1, z, z);
    }
    Ok(SchemeRun {
        scheme: SchemeId::MilsteinCir,
        grid,
        stride,
        states: rec.states,
        transformed: None,
        diagnostics,
    })
}

/// Explicit Euler-Maruyama `y_{k+1} = y_k + a(y_k) dt + b(y_k) dw_{k+1}`. Halts with
/// [`Error::DomainViolation`] at the first state outside the domain.
pub fn run_explicit_em(spec: &ModelSpec, path: &BrownianPath, record: Record) -> Result<SchemeRun> {
    spec.ensure_valid()?;
    let grid = *path.grid();
    let dt = grid.dt();
    let stride = stride_for(record, &grid)?;
    let mut rec = Recorder::new(stride, grid.n_steps(), false);
    let mut diagnostics = Diagnostics::default();
    let mut y = spec.initial;
    diagnostics.observe(y);
    rec.push(0, y, y);
    for (k, dw) in path.increments().enumerate() {
        let drift = spec
            .drift(y)
            .map_err(|_| Error::DomainViolation { step: k, value: y })?;
        let diffusion = spec
            .diffusion(y)
            .map_err(|_| Error::DomainViolation { step: k, value: y })?;
        y += drift * dt + diffusion * dw;
        if !spec.domain().contains(y) {
            return Err(Error::DomainViolation {
                step: k + 1,
                value: y,
            });
        }
        diagnostics.observe(y);
        rec.push(k + 1, y, y);
    }
    Ok(SchemeRun {
        scheme: SchemeId::ExplicitEm,
        grid,
        stride,
        states: rec.states,
        transformed: None,
        diagnostics,
    })
}

/// Piecewise-linear interpolation of the recorded states at time `t`.
pub fn interpolate_linear(run: &SchemeRun, t: f64) -> Result<f64> {
    let last = run.states.len() - 1;
    let t_end = run.time(last).max(run.grid.horizon());
    if !(t >= 0.0 && t <= t_end) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: run.grid.horizon(),
        });
    }
    if last == 0 {
        return Ok(run.states[0]);
    }
    let delta = run.grid.dt() * run.stride as f64;
    let j = ((t / delta) as usize).min(last - 1);
    let (a, b) = (run.states[j], run.states[j + 1]);
    let w = (t - run.time(j)) / delta;
    if w <= 0.0 {
        return Ok(a);
    }
    if w >= 1.0 {
        return Ok(b);
    }
    Ok((a + w * (b - a)).clamp(a.min(b), a.max(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::{sample_path, SeedId};
    use crate::model::Model;

    fn cir_spec(y0: f64) -> ModelSpec {
        ModelSpec::new(Model::Cir(CirParams::new(2.0, 0.125, 0.5)), y0)
    }

    fn zero_path(n: usize, dt: f64) -> BrownianPath {
        let grid = GridSpec::new(n as f64 * dt, dt).unwrap();
        BrownianPath::from_ticks(grid, SeedId::default(), alloc::vec![0; n]).unwrap()
    }

    #[test]
    fn bem_fixed_point_without_noise() {
        let theta_v = 0.093_75_f64;
        let tm = transform(&cir_spec(theta_v)).unwrap();
        let run = run_bem(&tm, &zero_path(64, 1.0 / 64.0), &SchemeConfig::default()).unwrap();
        assert_eq!(run.states.len(), 65);
        for s in &run.states {
            assert!((s - theta_v.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn lbe_is_bem_squared_for_cir() {
        let spec = cir_spec(0.1);
        let tm = transform(&spec).unwrap();
        let grid = GridSpec::new(1.0, 1.0 / 256.0).unwrap();
        let path = sample_path(&grid, SeedId::new(3, 0));
        let bem = run_bem(&tm, &path, &SchemeConfig::default()).unwrap();
        let lbe = run_lbe(&spec, &path, &SchemeConfig::default()).unwrap();
        for (x, y) in bem.states.iter().zip(&lbe.states) {
            assert_eq!(x * x, *y);
        }
        assert_eq!(lbe.transformed.as_deref(), Some(bem.states.as_slice()));
    }

    #[test]
    fn recording_modes() {
        let tm = transform(&cir_spec(0.1)).unwrap();
        let grid = GridSpec::new(1.0, 1.0 / 64.0).unwrap();
        let path = sample_path(&grid, SeedId::new(1, 2));
        let full = run_bem(&tm, &path, &SchemeConfig::default()).unwrap();
        let cfg = SchemeConfig {
            record: Record::Stride(8),
            ..Default::default()
        };
        let strided = run_bem(&tm, &path, &cfg).unwrap();
        assert_eq!(strided.states.len(), 9);
        for (j, s) in strided.states.iter().enumerate() {
            assert_eq!(*s, full.states[8 * j]);
        }
        let cfg = SchemeConfig {
            record: Record::Endpoint,
            ..Default::default()
        };
        let end = run_bem(&tm, &path, &cfg).unwrap();
        assert_eq!(end.states, [full.states[0], full.endpoint()]);
        let cfg = SchemeConfig {
            record: Record::Stride(7),
            ..Default::default()
        };
        assert!(run_bem(&tm, &path, &cfg).is_err());
    }

    #[test]
    fn milstein_without_noise_converges_to_fixed_point() {
        let p = CirParams::new(2.0, 0.125, 0.5);
        let dt = 1.0 / 16.0;
        let run = run_milstein_cir(&p, 0.5, &zero_path(400, dt), Record::Full).unwrap();
        let fixed = p.theta - p.sigma * p.sigma / (4.0 * p.kappa);
        for w in run.states.windows(2) {
            let expected = (w[0] + p.kappa * p.theta * dt - p.sigma * p.sigma * dt / 4.0)
                / (1.0 + p.kappa * dt);
            assert!((w[1] - expected).abs() < 1e-15);
        }
        assert!((run.endpoint() - fixed).abs() < 1e-12);
    }

    #[test]
    fn explicit_em_without_noise_is_forward_euler() {
        let spec = cir_spec(0.5);
        let dt = 1.0 / 32.0;
        let run = run_explicit_em(&spec, &zero_path(32, dt), Record::Full).unwrap();
        let mut y = 0.5;
        for s in &run.states[1..] {
            y += 2.0 * (0.125 - y) * dt;
            assert_eq!(*s, y);
        }
    }

    #[test]
    fn explicit_em_reports_violation() {
        let spec = cir_spec(0.01);
        let grid = GridSpec::new(1.0, 1.0).unwrap();
        let path = BrownianPath::from_increments(grid, SeedId::default(), &[-10.0]).unwrap();
        match run_explicit_em(&spec, &path, Record::Full) {
            Err(Error::DomainViolation { step: 1, value }) => assert!(value < 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interpolation() {
        let run = SchemeRun {
            scheme: SchemeId::MilsteinCir,
            grid: GridSpec::new(1.0, 0.25).unwrap(),
            stride: 1,
            states: alloc::vec![1.0, 3.0, 2.0, 2.0, 5.0],
            transformed: None,
            diagnostics: Diagnostics::default(),
        };
        assert_eq!(interpolate_linear(&run, 0.25).unwrap(), 3.0);
        assert_eq!(interpolate_linear(&run, 1.0).unwrap(), 5.0);
        assert_eq!(interpolate_linear(&run, 0.125).unwrap(), 2.0);
        assert_eq!(interpolate_linear(&run, 0.375).unwrap(), 2.5);
        assert!(interpolate_linear(&run, -0.1).is_err());
        assert!(interpolate_linear(&run, 1.1).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeId::ALL {
            assert_eq!(SchemeId::from_name(s.name()), Some(s));
        }
    }
}
