//! The CLI commands. Each writes its human-readable output to `out` and its files under
//! the output directory.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use lamperti_core::error_lab::{
    compare_milstein_lbe, estimate_ladder, fit_power_law, MilsteinComparisonSetup,
};
use lamperti_core::schemes::{run_lbe_transformed, Record};
use lamperti_core::{
    admissible_step, fit_convergence, max_strong_order_p, milstein_cir_step, run_bem,
    run_explicit_em, run_milstein_cir, sample_path, transform, validate_params, CirParams, Error,
    GridSpec, Model, ModelSpec, SchemeConfig, SchemeId, SchemeRun, SeedId, TransformedModel,
    WrightFisherParams,
};

use crate::config::{ConfigError, ExperimentConfig};
use crate::io as fmt_io;
use crate::parallel::Rayon;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_INADMISSIBLE: u8 = 4;
pub const EXIT_SOLVER: u8 = 5;
pub const EXIT_IO: u8 = 6;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Inadmissible(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Inadmissible(_) => EXIT_INADMISSIBLE,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Inadmissible(m) => CliError::Inadmissible(format!("{what}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Inadmissible(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::InadmissibleStep { .. } => CliError::Inadmissible(m),
            Error::NoConvergence { .. }
            | Error::Step { .. }
            | Error::DomainAt { .. }
            | Error::DomainViolation { .. }
            | Error::DegenerateFit(_) => CliError::Solver(m),
            _ => CliError::Config(m),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Settings shared by the commands that come from flags rather than the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    /// Overrides the config's output directory.
    pub out_dir: Option<PathBuf>,
}

impl RunOptions {
    fn mapper(&self) -> CliResult<Rayon> {
        Rayon::new(self.workers).map_err(|e| CliError::Config(format!("--workers: {e}")))
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> CliResult<PathBuf> {
        let dir = self.out_dir.clone().unwrap_or_else(|| cfg.out_dir());
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn describe(spec: &ModelSpec) -> String {
    let params: Vec<String> = spec
        .model
        .parameters()
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    format!(
        "{} ({}), initial value {}",
        spec.id(),
        params.join(", "),
        spec.initial
    )
}

/// Prints every validity condition with its slack, the order threshold and step
/// admissibility. Returns `Ok(true)` iff everything holds.
pub fn cmd_check(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<bool> {
    let spec = cfg.spec()?;
    let report = validate_params(&spec);
    writeln!(out, "model: {}", describe(&spec))?;
    for c in &report.conditions {
        let status = if c.holds { "ok  " } else { "FAIL" };
        writeln!(
            out,
            "  [{status}] {}: lhs {} {} rhs {} (slack {})",
            c.description,
            c.lhs,
            if c.strict { ">" } else { ">=" },
            c.rhs,
            c.slack()
        )?;
    }
    for n in &report.notes {
        writeln!(out, "  note: {n}")?;
    }
    match spec.model {
        Model::Cir(p) => writeln!(out, "  2*kappa*theta/sigma^2 = {}", p.feller_ratio())?,
        Model::Heston32(p) => writeln!(
            out,
            "  induced CIR 2*kappa*theta/sigma^2 = {}",
            p.induced_cir().feller_ratio()
        )?,
        _ => {}
    }
    if !report.is_valid() {
        writeln!(out, "invalid: {}", report.violation_summary())?;
        return Ok(false);
    }
    let bound = max_strong_order_p(&spec)?;
    if bound.is_finite() {
        writeln!(out, "  order-one strong convergence proven for p < {bound}")?;
    } else {
        writeln!(
            out,
            "  order-one strong convergence proven for every p >= 1"
        )?;
    }
    if cfg.monte_carlo.p >= bound {
        writeln!(
            out,
            "  warning: monte_carlo.p = {} is outside the guaranteed regime",
            cfg.monte_carlo.p
        )?;
    }
    let tm = transform(&spec)?;
    writeln!(
        out,
        "  transformed: one-sided Lipschitz K = {}, noise level {}{}",
        tm.one_sided_lipschitz(),
        tm.noise_level(),
        if tm.flips_noise() {
            " (driven by -w)"
        } else {
            ""
        }
    )?;
    let eta = cfg.scheme.eta;
    let mut steps = vec![("grid.dt", cfg.grid.dt)];
    if let Some(r) = cfg.grid.dt_reference {
        steps.push(("grid.dt_reference", r));
    }
    steps.extend(cfg.grid.ladder.iter().map(|&d| ("grid.ladder", d)));
    let mut all_ok = true;
    let k = tm.one_sided_lipschitz();
    for (name, dt) in steps {
        let ok = admissible_step(k, dt, eta);
        all_ok &= ok;
        writeln!(
            out,
            "  [{}] {name} = {dt}: 2*max(0,K)*dt = {} < eta = {eta}",
            if ok { "ok  " } else { "FAIL" },
            2.0 * k.max(0.0) * dt
        )?;
    }
    if cfg.grid.dt_reference.is_some() && !cfg.grid.ladder.is_empty() {
        cfg.ladder()?;
    }
    writeln!(
        out,
        "{}",
        if all_ok {
            "valid"
        } else {
            "inadmissible step size"
        }
    )?;
    Ok(all_ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub paths: Option<usize>,
    /// Defaults to the config's scheme.
    pub schemes: Vec<SchemeId>,
    pub dump: Option<DumpFormat>,
}

fn run_scheme(
    scheme: SchemeId,
    spec: &ModelSpec,
    tm: &TransformedModel,
    path: &lamperti_core::BrownianPath,
    cfg: &SchemeConfig,
) -> lamperti_core::Result<SchemeRun> {
    match scheme {
        SchemeId::BemTransformed => run_bem(tm, path, cfg),
        SchemeId::Lbe => run_lbe_transformed(tm, path, cfg),
        SchemeId::MilsteinCir => match spec.model {
            Model::Cir(p) => run_milstein_cir(&p, spec.initial, path, cfg.record),
            _ => Err(Error::Unsupported("milstein-cir needs a CIR model")),
        },
        SchemeId::ExplicitEm => run_explicit_em(spec, path, cfg.record),
    }
}

/// Writes `trajectory_NNNNN.csv` per path. Returns the files written.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    opts: &SimulateOptions,
    run: &RunOptions,
    out: &mut dyn Write,
) -> CliResult<Vec<PathBuf>> {
    let spec = cfg.spec()?;
    spec.ensure_valid()?;
    let schemes = if opts.schemes.is_empty() {
        vec![cfg.scheme.scheme()?]
    } else {
        opts.schemes.clone()
    };
    let scheme_cfg = cfg.scheme.config(Record::Full)?;
    let grid = GridSpec::new(cfg.grid.horizon, cfg.grid.dt)?;
    let n_paths = opts.paths.unwrap_or(1);
    let dir = run.out_dir(cfg)?;
    let map = run.mapper()?;
    let stream = cfg.monte_carlo.stream;
    let tm = transform(&spec)?;

    let results = lamperti_core::PathMap::map_range(&map, 0..n_paths, |i| {
        let path = sample_path(&grid, SeedId::new(stream, i as u64));
        let runs = schemes
            .iter()
            .map(|&s| {
                run_scheme(s, &spec, &tm, &path, &scheme_cfg)
                    .map_err(|e| CliError::from(e).context(format!("path {i}, scheme {s}")))
            })
            .collect::<CliResult<Vec<_>>>();
        (path, runs)
    });

    let mut written = Vec::new();
    for (i, (path, runs)) in results.into_iter().enumerate() {
        let runs = runs?;
        let file = dir.join(format!("trajectory_{i:05}.csv"));
        let labelled: Vec<(&str, &SchemeRun)> =
            schemes.iter().map(|s| s.name()).zip(runs.iter()).collect();
        let mut w = create(&file)?;
        fmt_io::write_trajectories(&mut w, &labelled)?;
        w.flush()?;
        written.push(file);
        match opts.dump {
            Some(DumpFormat::Binary) => {
                let f = dir.join(format!("brownian_{i:05}.bin"));
                let mut w = create(&f)?;
                fmt_io::write_brownian_binary(&mut w, &path)?;
                written.push(f);
            }
            Some(DumpFormat::Csv) => {
                let f = dir.join(format!("brownian_{i:05}.csv"));
                let mut w = create(&f)?;
                fmt_io::write_brownian_csv(&mut w, &path)?;
                written.push(f);
            }
            None => {}
        }
        for (s, r) in schemes.iter().zip(&runs) {
            writeln!(
                out,
                "path {i} {s}: {} states, end {}, min {}, max {}, solver iterations {}",
                r.states.len(),
                r.endpoint(),
                r.diagnostics.min_state,
                r.diagnostics.max_state,
                r.diagnostics.solver_iterations
            )?;
        }
    }
    writeln!(out, "wrote {} file(s) to {}", written.len(), dir.display())?;
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeOutcome {
    pub estimates: Vec<lamperti_core::ErrorEstimate>,
    pub report: Option<lamperti_core::ConvergenceReport>,
    pub files: Vec<PathBuf>,
}

/// Strong errors over the ladder, the log-log fit, and the CSV/JSON reports.
pub fn cmd_converge(
    cfg: &ExperimentConfig,
    run: &RunOptions,
    out: &mut dyn Write,
) -> CliResult<ConvergeOutcome> {
    let study = cfg.study()?;
    let ladder = cfg.ladder()?;
    let map = run.mapper()?;
    let estimates = estimate_ladder(&study, &ladder, &map)?;
    let report = if estimates.len() >= 3 {
        Some(fit_convergence(&estimates)?)
    } else {
        None
    };
    let sorted = report
        .as_ref()
        .map(|r| r.estimates.clone())
        .unwrap_or_else(|| estimates.clone());

    writeln!(
        out,
        "{} with {} against dt_reference = {}, {} paths, metric {} (p = {})",
        describe(&study.spec),
        study.scheme,
        study.dt_reference,
        study.n_paths,
        study.metric,
        study.p
    )?;
    writeln!(out, "{:>24} {:>24} {:>24}", "dt", "value", "std_error")?;
    for e in &sorted {
        writeln!(out, "{:>24} {:>24} {:>24}", e.dt, e.value, e.std_error)?;
    }
    if sorted.iter().any(|e| e.outside_guaranteed_regime) {
        writeln!(
            out,
            "warning: p is outside the guaranteed regime for this model"
        )?;
    }
    if let Some(r) = &report {
        writeln!(
            out,
            "slope q = {}, log C = {}, residual (sum of squares) = {}, residual (rms) = {}",
            r.slope, r.log_c, r.residual, r.residual_rms
        )?;
    }

    let dir = run.out_dir(cfg)?;
    let mut files = Vec::new();
    if cfg.wants("csv") {
        let f = dir.join("convergence.csv");
        fmt_io::write_estimates_csv(create(&f)?, &sorted)?;
        files.push(f);
        let f = dir.join("loglog.csv");
        let fit = report
            .as_ref()
            .map(|r| lamperti_core::error_lab::PowerLawFit {
                slope: r.slope,
                log_c: r.log_c,
                residual: r.residual,
                residual_rms: r.residual_rms,
            });
        fmt_io::write_loglog_csv(create(&f)?, &sorted, fit.as_ref())?;
        files.push(f);
    }
    if cfg.wants("json") {
        let f = dir.join("convergence.json");
        let mut doc = fmt_io::ConvergenceDoc::new(
            study.spec.id().name(),
            study.scheme.name(),
            study.dt_reference,
            &sorted,
        );
        if let Some(r) = &report {
            doc = doc.with_report(r);
        }
        fmt_io::write_json(create(&f)?, &doc)?;
        files.push(f);
    }
    for f in &files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(ConvergeOutcome {
        estimates,
        report,
        files,
    })
}

/// Milstein against LBE for a CIR model over the ladder.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    run: &RunOptions,
    out: &mut dyn Write,
) -> CliResult<lamperti_core::error_lab::MilsteinComparison> {
    let spec = cfg.spec()?;
    let Model::Cir(params) = spec.model else {
        return Err(CliError::Config(format!(
            "model.id: compare needs a cir model, got {}",
            spec.id()
        )));
    };
    let setup = MilsteinComparisonSetup {
        params,
        initial: spec.initial,
        horizon: cfg.grid.horizon,
        dts: cfg.ladder()?,
        dt_reference: cfg.grid.dt_reference,
        n_paths: cfg.monte_carlo.n_paths,
        stream: cfg.monte_carlo.stream,
        config: cfg.scheme.config(Record::Full)?,
    };
    let c = compare_milstein_lbe(&setup, &run.mapper()?)?;
    writeln!(out, "{}, {} paths", describe(&spec), setup.n_paths)?;
    if c.in_guaranteed_regime {
        writeln!(
            out,
            "kappa*theta/sigma^2 = {} > 3/2: O(dt) gap bound applies",
            c.regime_ratio
        )?;
    } else {
        writeln!(
            out,
            "warning: kappa*theta/sigma^2 = {} <= 3/2: outside the regime of the O(dt) gap bound",
            c.regime_ratio
        )?;
    }
    writeln!(
        out,
        "{:>24} {:>24} {:>24} {:>10}",
        "dt", "max_k E|Z-Y|", "E max_k |y_ref-Z|^2", "Z<Y"
    )?;
    for r in &c.rows {
        writeln!(
            out,
            "{:>24} {:>24} {:>24} {:>10}",
            r.dt,
            r.l1_grid_gap.value,
            r.sup_l2_gap
                .map(|e| e.value.to_string())
                .unwrap_or_else(|| "-".into()),
            r.domination_violations
        )?;
    }
    if let Some(f) = &c.l1_fit {
        writeln!(out, "L1 grid gap slope {}", f.slope)?;
    }
    if let Some(f) = &c.sup_l2_fit {
        writeln!(out, "sup-L2 gap slope {}", f.slope)?;
    }
    let dir = run.out_dir(cfg)?;
    if cfg.wants("csv") {
        let f = dir.join("compare.csv");
        fmt_io::write_comparison_csv(create(&f)?, &c)?;
        writeln!(out, "wrote {}", f.display())?;
    }
    if cfg.wants("json") {
        let f = dir.join("compare.json");
        fmt_io::write_json(create(&f)?, &fmt_io::ComparisonDoc::from(&c))?;
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(c)
}

/// Synthetic power-law fits and zero-noise fixed points. No Monte Carlo.
pub fn cmd_self_test(out: &mut dyn Write) -> CliResult<bool> {
    let mut all = true;
    let mut check = |name: &str, ok: bool, out: &mut dyn Write| -> io::Result<()> {
        all &= ok;
        writeln!(out, "{} {name}", if ok { "PASS" } else { "FAIL" })
    };

    let dts: Vec<f64> = (4..10).map(|k| 2f64.powi(-k)).collect();
    for (c, q) in [(1.0, 2.0), (3.0, 1.0), (0.25, 1.5)] {
        let values: Vec<f64> = dts.iter().map(|d| c * d.powf(q)).collect();
        let ok = fit_power_law(&dts, &values)
            .map(|f| {
                (f.slope - q).abs() < 1e-12
                    && (f.log_c - c.ln()).abs() < 1e-12
                    && f.residual < 1e-12
            })
            .unwrap_or(false);
        check(&format!("power-law fit recovers e = {c} dt^{q}"), ok, out)?;
    }

    let p = CirParams::new(2.0, 0.125, 0.5);
    let spec = ModelSpec::new(Model::Cir(p), p.theta_v());
    let grid = GridSpec::new(1.0, 1.0 / 64.0)?;
    let still = lamperti_core::BrownianPath::from_ticks(grid, SeedId::default(), vec![0; 64])?;
    let fixed = p.theta_v().sqrt();
    let ok = run_bem(&transform(&spec)?, &still, &SchemeConfig::default())
        .map(|r| r.states.iter().all(|x| (x - fixed).abs() < 1e-14))
        .unwrap_or(false);
    check("cir bem without noise stays at sqrt(theta_v)", ok, out)?;

    let target = p.theta - p.sigma * p.sigma / (4.0 * p.kappa);
    let dt = 1.0 / 16.0;
    let mut z: f64 = 1.0;
    let mut ok = true;
    for _ in 0..2000 {
        let next = milstein_cir_step(&p, dt, z, 0.0)?;
        let affine =
            (z + p.kappa * p.theta * dt - p.sigma * p.sigma * dt / 4.0) / (1.0 + p.kappa * dt);
        ok &= (next - affine).abs() <= 1e-15 * affine.abs().max(1.0);
        z = next;
    }
    ok &= (z - target).abs() < 1e-12;
    check(
        "cir milstein without noise converges to theta - sigma^2/(4 kappa)",
        ok,
        out,
    )?;

    let wf = ModelSpec::new(
        Model::WrightFisher(WrightFisherParams {
            a: 1.0,
            b: 2.0,
            gamma: 1.0,
        }),
        0.5,
    );
    let ok = run_bem(&transform(&wf)?, &still, &SchemeConfig::default())
        .map(|r| {
            r.states
                .iter()
                .all(|x| (x - std::f64::consts::FRAC_PI_2).abs() < 1e-12)
        })
        .unwrap_or(false);
    check("wright-fisher bem without noise stays at pi/2", ok, out)?;

    writeln!(
        out,
        "{}",
        if all {
            "self-test passed"
        } else {
            "self-test FAILED"
        }
    )?;
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_test_passes() {
        let mut buf = Vec::new();
        assert!(cmd_self_test(&mut buf).unwrap());
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains("FAIL"), "{text}");
    }

    #[test]
    fn error_codes_are_distinct() {
        let codes = [
            EXIT_OK,
            EXIT_USAGE,
            EXIT_CONFIG,
            EXIT_INADMISSIBLE,
            EXIT_SOLVER,
            EXIT_IO,
        ];
        for (i, a) in codes.iter().enumerate() {
            for b in &codes[i + 1..] {
                assert_ne!(a, b);
            }
        }
        let e: CliError = Error::InadmissibleStep {
            k: 1.0,
            dt: 1.0,
            eta: 0.5,
            lhs: 2.0,
        }
        .into();
        assert_eq!(e.exit_code(), EXIT_INADMISSIBLE);
        let e: CliError = Error::NoConvergence {
            iterations: 3,
            lo: 0.0,
            hi: 1.0,
        }
        .into();
        assert_eq!(e.exit_code(), EXIT_SOLVER);
        let e: CliError = Error::InvalidParams("x".into()).into();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }
}
