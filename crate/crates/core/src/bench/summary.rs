use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, Mode};
use crate::synth::{TaskFamily, TransformPair};

use super::record::{read_rows, write_rows, RecordFormat};
use super::EstimateRecord;

/// Aggregate over the seeds of one (task, transform, d, rho, n, estimator,
/// mode) group. Statistics cover successful rows only and are empty when
/// every row failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: TaskFamily,
    pub transform: TransformPair,
    pub d: usize,
    pub rho: f64,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub mode: Mode,
    pub mi_true: f64,
    pub runs: usize,
    pub failed: usize,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub std: Option<f64>,
    /// Median of `|estimate - truth|` over seeds.
    pub median_abs_error: Option<f64>,
    /// `|median estimate - truth|`.
    pub median_error: Option<f64>,
}

const SUMMARY_HEADER: [&str; 15] = [
    "task",
    "transform",
    "d",
    "rho",
    "n",
    "estimator",
    "mode",
    "mi_true",
    "runs",
    "failed",
    "median",
    "mean",
    "std",
    "median_abs_error",
    "median_error",
];

/// Median of a non-empty slice; even lengths average the middle pair.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// One row per group, in order of first appearance.
pub fn summarize(records: &[EstimateRecord]) -> Result<Vec<Summary>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut groups: Vec<(&EstimateRecord, Vec<&EstimateRecord>)> = Vec::new();
    for r in records {
        let same = |g: &EstimateRecord| {
            (g.task, g.transform, g.d, g.rho.to_bits(), g.n, g.estimator, g.mode)
                == (r.task, r.transform, r.d, r.rho.to_bits(), r.n, r.estimator, r.mode)
        };
        match groups.iter_mut().find(|(head, _)| same(head)) {
            Some((_, rows)) => rows.push(r),
            None => groups.push((r, vec![r])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(head, rows)| {
            let truth = head.mi_true;
            let ests: Vec<f64> = rows.iter().filter(|r| r.is_ok()).filter_map(|r| r.mi_est).collect();
            let stats = (!ests.is_empty()).then(|| {
                let k = ests.len() as f64;
                let mean = ests.iter().sum::<f64>() / k;
                let var = ests.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
                let med = median(&ests);
                let abs: Vec<f64> = ests.iter().map(|v| (v - truth).abs()).collect();
                (med, mean, var.sqrt(), median(&abs), (med - truth).abs())
            });
            Summary {
                task: head.task,
                transform: head.transform,
                d: head.d,
                rho: head.rho,
                n: head.n,
                estimator: head.estimator,
                mode: head.mode,
                mi_true: truth,
                runs: rows.len(),
                failed: rows.len() - ests.len(),
                median: stats.map(|s| s.0),
                mean: stats.map(|s| s.1),
                std: stats.map(|s| s.2),
                median_abs_error: stats.map(|s| s.3),
                median_error: stats.map(|s| s.4),
            }
        })
        .collect())
}

pub fn write_summaries(rows: &[Summary], path: impl AsRef<Path>, format: RecordFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_summaries_to(rows, &mut w, format)?;
    w.flush()?;
    Ok(())
}

pub fn write_summaries_to<W: Write>(rows: &[Summary], w: W, format: RecordFormat) -> Result<()> {
    write_rows(rows, &SUMMARY_HEADER, format, w)
}

pub fn read_summaries(path: impl AsRef<Path>, format: RecordFormat) -> Result<Vec<Summary>> {
    read_rows(format, BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::STATUS_OK;
    use crate::synth::Transform;
    use proptest::prelude::*;

    fn rec(d: usize, est: Option<f64>, truth: f64) -> EstimateRecord {
        EstimateRecord {
            task: TaskFamily::Gauss,
            transform: TransformPair::both(Transform::Identity),
            d,
            rho: 0.5,
            n: 100,
            seed: 0,
            estimator: EstimatorKind::Mime,
            mi_true: truth,
            mi_true_stderr: 0.0,
            mi_est: est,
            mode: Mode::Ratio,
            wall_time_seconds: 1.0,
            status: if est.is_some() { STATUS_OK.into() } else { "error: x".into() },
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn single_record() {
        let s = &summarize(&[rec(1, Some(0.3), 0.1)]).unwrap()[0];
        assert_eq!((s.median, s.mean, s.std, s.runs), (Some(0.3), Some(0.3), Some(0.0), 1));
    }

    #[test]
    fn hand_computed_cell() {
        let rows: Vec<_> = [1.0, 3.0, 2.0].iter().map(|&v| rec(1, Some(v), 2.6)).collect();
        let s = &summarize(&rows).unwrap()[0];
        assert_eq!((s.median, s.mean), (Some(2.0), Some(2.0)));
        // |1 - 2.6|, |3 - 2.6|, |2 - 2.6| = 1.6, 0.4, 0.6.
        assert!((s.median_abs_error.unwrap() - 0.6).abs() < 1e-12);
        assert!((s.median_error.unwrap() - 0.6).abs() < 1e-12);
        assert!((s.std.unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn groups_and_failures() {
        let rows = vec![rec(1, Some(1.0), 0.0), rec(2, None, 0.0), rec(1, None, 0.0), rec(1, Some(2.0), 0.0)];
        let s = summarize(&rows).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].d, s[0].runs, s[0].failed, s[0].median), (1, 3, 1, Some(1.5)));
        assert_eq!((s[1].d, s[1].failed, s[1].median), (2, 1, None));
    }

    proptest! {
        #[test]
        fn summary_survives_emit_and_parse(vals in prop::collection::vec(prop::option::of(-5.0f64..5.0), 1..20)) {
            let rows: Vec<_> = vals.iter().enumerate().map(|(i, v)| rec(1 + i % 3, *v, 0.7)).collect();
            for format in [RecordFormat::Csv, RecordFormat::Json] {
                let mut buf = Vec::new();
                write_rows(&rows, &super::super::record::RECORD_HEADER, format, &mut buf).unwrap();
                let back: Vec<EstimateRecord> = read_rows(format, buf.as_slice()).unwrap();
                prop_assert_eq!(summarize(&back).unwrap(), summarize(&rows).unwrap());
            }
        }
    }
}
