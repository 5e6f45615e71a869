//! CSV files. Floats are written with 17 significant digits so that parsing
//! the file recovers every value bit for bit; undefined bounds are empty fields.

use std::path::Path;

use crate::bounds::{BoundCurve, BoundKind};
use crate::error::{Error, Result};

use super::experiment::ExperimentResult;

pub const EXPERIMENT_HEADER: [&str; 11] = [
    "t",
    "algorithm",
    "mean_err",
    "mean_err_ratio",
    "mean_sq_err",
    "stderr_sq",
    "bound_thm1",
    "bound_cor5a",
    "bound_cor5b",
    "bound_cor5c",
    "bound_thm9",
];
pub const BOUNDS_HEADER: [&str; 3] = ["t", "name", "value"];
pub const DISTANCE_HEADER: [&str; 5] = [
    "t",
    "algorithm",
    "mean_dist_avg",
    "stderr_dist_avg",
    "delta_m",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub t: usize,
    pub algorithm: String,
    pub mean_err: f64,
    pub mean_err_ratio: f64,
    pub mean_sq_err: f64,
    pub stderr_sq: f64,
    /// In [`BoundKind::GAP_BOUNDS`] order.
    pub bounds: [Option<f64>; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub name: String,
    pub value: Option<f64>,
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn curve_value(curve: &BoundCurve, t: usize) -> Option<f64> {
    curve
        .grid
        .binary_search(&t)
        .ok()
        .and_then(|j| curve.values[j])
}

/// Rows grouped by algorithm, then time.
pub fn experiment_rows(result: &ExperimentResult) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    for a in &result.algorithms {
        let s = &a.stats;
        for (k, &t) in s.times.iter().enumerate() {
            let mut bounds = [None; 5];
            for (slot, kind) in bounds.iter_mut().zip(BoundKind::GAP_BOUNDS) {
                *slot = result
                    .curves
                    .iter()
                    .find(|c| c.name == kind.name())
                    .and_then(|c| curve_value(c, t));
            }
            rows.push(ExperimentRow {
                t,
                algorithm: s.algorithm.clone(),
                mean_err: s.mean_err[k],
                mean_err_ratio: s.mean_ratio[k],
                mean_sq_err: s.mean_sq[k],
                stderr_sq: s.stderr_sq[k],
                bounds,
            });
        }
    }
    rows
}

fn render<const N: usize>(
    header: [&str; N],
    records: impl Iterator<Item = [String; N]>,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |source| Error::Csv {
        path: "<memory>".into(),
        source,
    };
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

fn write_all<const N: usize>(
    path: &Path,
    header: [&str; N],
    records: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    std::fs::write(path, render(header, records)?).map_err(|e| Error::io(path, e))
}

fn experiment_records(rows: &[ExperimentRow]) -> impl Iterator<Item = [String; 11]> + '_ {
    rows.iter().map(|r| {
        [
            r.t.to_string(),
            r.algorithm.clone(),
            fmt_float(r.mean_err),
            fmt_float(r.mean_err_ratio),
            fmt_float(r.mean_sq_err),
            fmt_float(r.stderr_sq),
            fmt_opt(r.bounds[0]),
            fmt_opt(r.bounds[1]),
            fmt_opt(r.bounds[2]),
            fmt_opt(r.bounds[3]),
            fmt_opt(r.bounds[4]),
        ]
    })
}

/// The experiment CSV as bytes, exactly as [`write_experiment_csv`] writes it.
pub fn render_experiment_csv(rows: &[ExperimentRow]) -> Result<Vec<u8>> {
    render(EXPERIMENT_HEADER, experiment_records(rows))
}

pub fn write_experiment_csv(rows: &[ExperimentRow], path: impl AsRef<Path>) -> Result<()> {
    write_all(path.as_ref(), EXPERIMENT_HEADER, experiment_records(rows))
}

/// `t,name,value`, one row per curve point.
pub fn write_bounds_csv(curves: &[BoundCurve], path: impl AsRef<Path>) -> Result<()> {
    let rows = curves.iter().flat_map(|c| {
        c.grid
            .iter()
            .zip(&c.values)
            .map(move |(t, v)| [t.to_string(), c.name.clone(), fmt_opt(*v)])
    });
    write_all(path.as_ref(), BOUNDS_HEADER, rows)
}

/// Mean distance to the legitimate average per algorithm, with the δ_M envelope.
pub fn write_distance_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let rows = result.algorithms.iter().flat_map(|a| {
        let s = &a.stats;
        s.times.iter().enumerate().map(move |(k, &t)| {
            [
                t.to_string(),
                s.algorithm.clone(),
                fmt_float(s.mean_dist_avg[k]),
                fmt_float(s.stderr_dist_avg[k]),
                fmt_opt(curve_value(&result.delta_m, t)),
            ]
        })
    });
    write_all(path.as_ref(), DISTANCE_HEADER, rows)
}

/// Writes `experiment.csv`, `bounds.csv` and `distance.csv` into `dir`.
pub fn write_outputs(
    result: &ExperimentResult,
    dir: impl AsRef<Path>,
) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = [
        dir.join("experiment.csv"),
        dir.join("bounds.csv"),
        dir.join("distance.csv"),
    ];
    write_experiment_csv(&experiment_rows(result), &paths[0])?;
    let mut curves = result.curves.clone();
    curves.push(result.delta_m.clone());
    write_bounds_csv(&curves, &paths[1])?;
    write_distance_csv(result, &paths[2])?;
    Ok(paths.to_vec())
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = reader(path)?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::parse(
            path.display().to_string(),
            1,
            format!("unexpected header {found:?}"),
        ));
    }
    r.records()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    k: usize,
    origin: &Path,
    line: usize,
) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(origin.display().to_string(), line, format!("bad field {k}")))
}

fn opt_field(rec: &csv::StringRecord, k: usize, origin: &Path, line: usize) -> Result<Option<f64>> {
    match rec.get(k) {
        Some("") => Ok(None),
        _ => field(rec, k, origin, line).map(Some),
    }
}

pub fn read_experiment_csv(path: impl AsRef<Path>) -> Result<Vec<ExperimentRow>> {
    let path = path.as_ref();
    records(path, &EXPERIMENT_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let line = i + 2;
            let mut bounds = [None; 5];
            for (j, b) in bounds.iter_mut().enumerate() {
                *b = opt_field(rec, 6 + j, path, line)?;
            }
            Ok(ExperimentRow {
                t: field(rec, 0, path, line)?,
                algorithm: field(rec, 1, path, line)?,
                mean_err: field(rec, 2, path, line)?,
                mean_err_ratio: field(rec, 3, path, line)?,
                mean_sq_err: field(rec, 4, path, line)?,
                stderr_sq: field(rec, 5, path, line)?,
                bounds,
            })
        })
        .collect()
}

pub fn read_bounds_csv(path: impl AsRef<Path>) -> Result<Vec<BoundRow>> {
    let path = path.as_ref();
    records(path, &BOUNDS_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            Ok(BoundRow {
                t: field(rec, 0, path, i + 2)?,
                name: field(rec, 1, path, i + 2)?,
                value: opt_field(rec, 2, path, i + 2)?,
            })
        })
        .collect()
}

/// A gnuplot script plotting mean ē(t)/ē(0) per algorithm from `csv_name`.
pub fn gnuplot_script(csv_name: &str, algorithms: &[&str]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\nset xlabel 't'\nset ylabel 'mean error ratio'\n",
    );
    s.push_str("set terminal pngcairo size 900,600\nset output 'ratio.png'\nplot ");
    let plots: Vec<String> = algorithms
        .iter()
        .map(|a| format!("'{csv_name}' using ($1 > 0 && strcol(2) eq '{a}' ? $1 : 1/0):4 with linespoints title '{a}'"))
        .collect();
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(t: usize, x: f64) -> ExperimentRow {
        ExperimentRow {
            t,
            algorithm: "resilient".into(),
            mean_err: x,
            mean_err_ratio: 1.0,
            mean_sq_err: x * x,
            stderr_sq: 0.1 * x,
            bounds: [
                Some(1e4),
                None,
                Some(x / 3.0),
                None,
                Some(std::f64::consts::PI),
            ],
        }
    }

    #[test]
    fn empty_grid_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_experiment_csv(&[], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, format!("{}\n", EXPERIMENT_HEADER.join(",")));
        assert!(read_experiment_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn one_row_two_lines_with_empty_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_experiment_csv(&[row(3, 0.5)], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("3,resilient,5.0000000000000000e-1,"));
        assert!(lines[1].contains(",,"));
    }

    #[test]
    fn bounds_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let c = BoundCurve {
            name: "bound_thm9".into(),
            grid: vec![0, 5],
            values: vec![None, Some(0.1 + 0.2)],
        };
        write_bounds_csv(std::slice::from_ref(&c), &p).unwrap();
        let back = read_bounds_csv(&p).unwrap();
        assert_eq!(
            back[0],
            BoundRow {
                t: 0,
                name: "bound_thm9".into(),
                value: None
            }
        );
        assert_eq!(back[1].value, Some(0.1 + 0.2));
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_experiment_csv(&p), Err(Error::Parse { .. })));
        assert!(matches!(
            read_bounds_csv(dir.path().join("missing.csv")),
            Err(Error::Csv { .. })
        ));
    }

    proptest! {
        #[test]
        fn experiment_csv_round_trips(values in prop::collection::vec((0usize..100_000, -1e300f64..1e300), 0..30)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("e.csv");
            let rows: Vec<ExperimentRow> = values.iter().map(|&(t, x)| row(t, x)).collect();
            write_experiment_csv(&rows, &p).unwrap();
            prop_assert_eq!(read_experiment_csv(&p).unwrap(), rows);
        }
    }
}
