use std::io::Cursor;

use lamperti::core::error_lab::{fit_convergence, StrongErrorStudy};
use lamperti::core::{
    estimate_strong_error, run_lbe, sample_path, GridSpec, SchemeConfig, SeedId, Serial,
};
use lamperti::io::{
    read_brownian_binary, write_brownian_binary, write_brownian_csv, write_estimates_csv,
    write_json, write_trajectories, ConvergenceDoc,
};
use lamperti::presets;

#[test]
fn trajectory_csv_round_trips_every_state() {
    let grid = GridSpec::new(1.0, 1.0 / 64.0).unwrap();
    let path = sample_path(&grid, SeedId::new(5, 0));
    let run = run_lbe(&presets::wright_fisher(), &path, &SchemeConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &[("lbe", &run)]).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let mut n = 0;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.unwrap();
        assert_eq!(rec[0].parse::<usize>().unwrap(), k);
        assert_eq!(rec[1].parse::<f64>().unwrap(), grid.time(k));
        assert_eq!(
            rec[2].parse::<f64>().unwrap().to_bits(),
            run.states[k].to_bits()
        );
        assert_eq!(
            rec[3].parse::<f64>().unwrap().to_bits(),
            run.transformed.as_ref().unwrap()[k].to_bits()
        );
        n += 1;
    }
    assert_eq!(n, 65);
}

#[test]
fn brownian_dumps_reproduce_the_path() {
    let grid = GridSpec::new(2.0, 1.0 / 128.0).unwrap();
    let path = sample_path(&grid, SeedId::new(9, 4));
    let mut bin = Vec::new();
    write_brownian_binary(&mut bin, &path).unwrap();
    assert_eq!(bin.len(), 48 + 8 * 256);
    assert_eq!(read_brownian_binary(Cursor::new(&bin)).unwrap(), path);
    assert!(read_brownian_binary(Cursor::new(&bin[..40])).is_err());
    assert!(read_brownian_binary(Cursor::new(b"garbage!".to_vec())).is_err());

    let mut text = Vec::new();
    write_brownian_csv(&mut text, &path).unwrap();
    let text = String::from_utf8(text).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# horizon="));
    assert_eq!(lines.next().unwrap(), "k,t,dw");
    let increments: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(increments, path.increments().collect::<Vec<_>>());
}

#[test]
fn convergence_reports_parse_back() {
    let study = StrongErrorStudy {
        n_paths: 20,
        ..StrongErrorStudy::new(presets::cir_ladder(), 1.0, 1.0 / 1024.0)
    };
    let estimates: Vec<_> = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
        .iter()
        .map(|&dt| estimate_strong_error(&study, dt, &Serial).unwrap())
        .collect();
    let report = fit_convergence(&estimates).unwrap();

    let mut csv_buf = Vec::new();
    write_estimates_csv(&mut csv_buf, &report.estimates).unwrap();
    let mut reader = csv::Reader::from_reader(csv_buf.as_slice());
    assert_eq!(
        reader.headers().unwrap(),
        vec!["dt", "metric", "p", "value", "std_error"]
    );
    for (rec, e) in reader.records().zip(&report.estimates) {
        let rec = rec.unwrap();
        assert_eq!(rec[0].parse::<f64>().unwrap(), e.dt);
        assert_eq!(&rec[1], "endpoint-lp");
        assert_eq!(rec[3].parse::<f64>().unwrap(), e.value);
    }

    let doc = ConvergenceDoc::new("cir", "bem-transformed", study.dt_reference, &estimates)
        .with_report(&report);
    let mut json = Vec::new();
    write_json(&mut json, &doc).unwrap();
    let back: ConvergenceDoc = serde_json::from_slice(&json).unwrap();
    assert_eq!(back, doc);
    assert_eq!(back.fit.unwrap().slope, report.slope);
}
