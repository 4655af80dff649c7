//! File formats: trajectory and report CSV, JSON reports, Brownian path dumps.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use lamperti_core::error_lab::{ComparisonRow, MilsteinComparison, PowerLawFit};
use lamperti_core::{BrownianPath, ConvergenceReport, ErrorEstimate, GridSpec, SchemeRun, SeedId};

/// 17 significant digits: parsing the text gives back the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// `k, t, state[, transformed]` for one run, or `k, t` followed by one column per run
/// (named after `labels`) when several runs share a grid.
pub fn write_trajectories<W: Write>(out: W, runs: &[(&str, &SchemeRun)]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let first = runs
        .first()
        .ok_or_else(|| io::Error::other("no runs to write"))?
        .1;
    let single = runs.len() == 1;
    let mut header = vec!["k".to_string(), "t".to_string()];
    for (label, run) in runs {
        if run.states.len() != first.states.len() || run.stride != first.stride {
            return Err(io::Error::other("runs are recorded on different grids"));
        }
        header.push(if single {
            "state".to_string()
        } else {
            label.to_string()
        });
        if run.transformed.is_some() {
            header.push(if single {
                "transformed".to_string()
            } else {
                format!("{label}_transformed")
            });
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for j in 0..first.states.len() {
        let mut row = vec![(j * first.stride).to_string(), fmt_f64(first.time(j))];
        for (_, run) in runs {
            row.push(fmt_f64(run.states[j]));
            if let Some(t) = &run.transformed {
                row.push(fmt_f64(t[j]));
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

/// `dt, metric, p, value, std_error`.
pub fn write_estimates_csv<W: Write>(out: W, estimates: &[ErrorEstimate]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dt", "metric", "p", "value", "std_error"])
        .map_err(csv_err)?;
    for e in estimates {
        w.write_record([
            fmt_f64(e.dt),
            e.metric.name().to_string(),
            fmt_f64(e.p),
            fmt_f64(e.value),
            fmt_f64(e.std_error),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// `dt, log_dt, log_error, log_fit` for a log-log plot with the fitted line.
pub fn write_loglog_csv<W: Write>(
    out: W,
    estimates: &[ErrorEstimate],
    fit: Option<&PowerLawFit>,
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dt", "log_dt", "log_error", "log_fit"])
        .map_err(csv_err)?;
    for e in estimates {
        let x = e.dt.ln();
        let fitted = fit
            .map(|f| fmt_f64(f.log_c + f.slope * x))
            .unwrap_or_default();
        w.write_record([fmt_f64(e.dt), fmt_f64(x), fmt_f64(e.value.ln()), fitted])
            .map_err(csv_err)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub dt: f64,
    pub metric: String,
    pub p: f64,
    pub value: f64,
    pub n_paths: usize,
    pub std_error: f64,
    pub outside_guaranteed_regime: bool,
}

impl From<&ErrorEstimate> for EstimateDoc {
    fn from(e: &ErrorEstimate) -> Self {
        EstimateDoc {
            dt: e.dt,
            metric: e.metric.name().to_string(),
            p: e.p,
            value: e.value,
            n_paths: e.n_paths,
            std_error: e.std_error,
            outside_guaranteed_regime: e.outside_guaranteed_regime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDoc {
    pub slope: f64,
    pub log_c: f64,
    pub residual: f64,
    pub residual_rms: f64,
}

impl From<&PowerLawFit> for FitDoc {
    fn from(f: &PowerLawFit) -> Self {
        FitDoc {
            slope: f.slope,
            log_c: f.log_c,
            residual: f.residual,
            residual_rms: f.residual_rms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDoc {
    pub model: String,
    pub scheme: String,
    pub dt_reference: f64,
    pub estimates: Vec<EstimateDoc>,
    /// Absent when fewer than three step sizes were run.
    pub fit: Option<FitDoc>,
}

impl ConvergenceDoc {
    pub fn new(model: &str, scheme: &str, dt_reference: f64, estimates: &[ErrorEstimate]) -> Self {
        ConvergenceDoc {
            model: model.to_string(),
            scheme: scheme.to_string(),
            dt_reference,
            estimates: estimates.iter().map(EstimateDoc::from).collect(),
            fit: None,
        }
    }

    pub fn with_report(mut self, report: &ConvergenceReport) -> Self {
        self.estimates = report.estimates.iter().map(EstimateDoc::from).collect();
        self.fit = Some(FitDoc {
            slope: report.slope,
            log_c: report.log_c,
            residual: report.residual,
            residual_rms: report.residual_rms,
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRowDoc {
    pub dt: f64,
    pub l1_grid_gap: EstimateDoc,
    pub sup_l2_gap: Option<EstimateDoc>,
    pub domination_violations: u64,
}

impl From<&ComparisonRow> for ComparisonRowDoc {
    fn from(r: &ComparisonRow) -> Self {
        ComparisonRowDoc {
            dt: r.dt,
            l1_grid_gap: (&r.l1_grid_gap).into(),
            sup_l2_gap: r.sup_l2_gap.as_ref().map(EstimateDoc::from),
            domination_violations: r.domination_violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub regime_ratio: f64,
    pub in_guaranteed_regime: bool,
    pub rows: Vec<ComparisonRowDoc>,
    pub l1_fit: Option<FitDoc>,
    pub sup_l2_fit: Option<FitDoc>,
}

impl From<&MilsteinComparison> for ComparisonDoc {
    fn from(c: &MilsteinComparison) -> Self {
        ComparisonDoc {
            regime_ratio: c.regime_ratio,
            in_guaranteed_regime: c.in_guaranteed_regime,
            rows: c.rows.iter().map(ComparisonRowDoc::from).collect(),
            l1_fit: c.l1_fit.as_ref().map(FitDoc::from),
            sup_l2_fit: c.sup_l2_fit.as_ref().map(FitDoc::from),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(out: W, doc: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(out, doc).map_err(io::Error::other)
}

/// `dt, l1_grid_gap, l1_std_error, sup_l2_gap, sup_l2_std_error, domination_violations`.
pub fn write_comparison_csv<W: Write>(out: W, c: &MilsteinComparison) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dt",
        "l1_grid_gap",
        "l1_std_error",
        "sup_l2_gap",
        "sup_l2_std_error",
        "domination_violations",
    ])
    .map_err(csv_err)?;
    for r in &c.rows {
        let (s, se) = r
            .sup_l2_gap
            .map(|e| (fmt_f64(e.value), fmt_f64(e.std_error)))
            .unwrap_or_default();
        w.write_record([
            fmt_f64(r.dt),
            fmt_f64(r.l1_grid_gap.value),
            fmt_f64(r.l1_grid_gap.std_error),
            s,
            se,
            r.domination_violations.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

const BROWNIAN_MAGIC: &[u8; 8] = b"LBRWNv1\0";

/// Binary dump: magic, then little-endian `u64 n_steps, f64 horizon, f64 dt,
/// u64 stream, u64 path`, then `n_steps` little-endian `f64` increments.
pub fn write_brownian_binary<W: Write>(mut out: W, path: &BrownianPath) -> io::Result<()> {
    let g = path.grid();
    out.write_all(BROWNIAN_MAGIC)?;
    out.write_all(&(g.n_steps() as u64).to_le_bytes())?;
    out.write_all(&g.horizon().to_le_bytes())?;
    out.write_all(&g.dt().to_le_bytes())?;
    out.write_all(&path.seed().stream.to_le_bytes())?;
    out.write_all(&path.seed().path.to_le_bytes())?;
    for dw in path.increments() {
        out.write_all(&dw.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_brownian_binary<R: Read>(mut input: R) -> io::Result<BrownianPath> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != BROWNIAN_MAGIC {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "not a Brownian path dump",
        ));
    }
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> io::Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    let horizon = f64::from_le_bytes(next(&mut input)?);
    let dt = f64::from_le_bytes(next(&mut input)?);
    let stream = u64::from_le_bytes(next(&mut input)?);
    let path = u64::from_le_bytes(next(&mut input)?);
    let mut increments = Vec::with_capacity(n);
    for _ in 0..n {
        increments.push(f64::from_le_bytes(next(&mut input)?));
    }
    let invalid =
        |e: lamperti_core::Error| io::Error::new(io::ErrorKind::InvalidData, e.to_string());
    let grid = GridSpec::new(horizon, dt).map_err(invalid)?;
    BrownianPath::from_increments(grid, SeedId::new(stream, path), &increments).map_err(invalid)
}

/// `k, t, dw` with the grid and seed in a leading comment line.
pub fn write_brownian_csv<W: Write>(mut out: W, path: &BrownianPath) -> io::Result<()> {
    let g = path.grid();
    writeln!(
        out,
        "# horizon={} dt={} n_steps={} stream={} path={}",
        fmt_f64(g.horizon()),
        fmt_f64(g.dt()),
        g.n_steps(),
        path.seed().stream,
        path.seed().path
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "t", "dw"]).map_err(csv_err)?;
    for (k, dw) in path.increments().enumerate() {
        w.write_record([(k + 1).to_string(), fmt_f64(g.time(k + 1)), fmt_f64(dw)])
            .map_err(csv_err)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use lamperti_core::sample_path;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[
            0.1,
            1.0 / 3.0,
            2f64.powi(-15),
            1e-300,
            -123456.789,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn brownian_binary_round_trip() {
        let grid = GridSpec::new(1.0, 1.0 / 64.0).unwrap();
        let path = sample_path(&grid, SeedId::new(3, 9));
        let mut buf = Vec::new();
        write_brownian_binary(&mut buf, &path).unwrap();
        assert_eq!(buf.len(), 8 + 40 + 64 * 8);
        assert_eq!(read_brownian_binary(buf.as_slice()).unwrap(), path);
        buf[0] = b'X';
        assert!(read_brownian_binary(buf.as_slice()).is_err());
    }
}
