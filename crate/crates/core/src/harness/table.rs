use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "k,r,m,n,trial,seed,err_fro,err_norm_sq,stage1_iters,stage2_iters,wall_ms,failed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub k: usize,
    pub r: usize,
    pub m: usize,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub err_fro: f64,
    /// `err_fro² / σ²`, or `err_fro²` when `σ = 0`.
    pub err_norm_sq: f64,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub wall_ms: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Sorted by `(k, r, trial)`.
    pub rows: Vec<TrialResult>,
    /// Median `err_norm_sq` per `(k, r)` over all rows of the cell,
    /// failed ones included; non-finite values are skipped.
    pub medians: BTreeMap<(usize, usize), f64>,
    /// The grid had `σ = 0`, so `err_norm_sq` is the raw squared error.
    pub unit_sigma: bool,
}

/// Median of the finite values, `NaN` when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Sample correlation; `NaN` for fewer than two points or zero spread.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n != y.len() || n < 2 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

impl ResultTable {
    pub fn new(mut rows: Vec<TrialResult>, unit_sigma: bool) -> Self {
        rows.sort_by_key(|r| (r.k, r.r, r.trial));
        let medians = Self::compute_medians(&rows);
        ResultTable {
            rows,
            medians,
            unit_sigma,
        }
    }

    fn compute_medians(rows: &[TrialResult]) -> BTreeMap<(usize, usize), f64> {
        let mut cells: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for row in rows {
            cells.entry((row.k, row.r)).or_default().push(row.err_norm_sq);
        }
        cells.into_iter().map(|(key, v)| (key, median(&v))).collect()
    }

    /// Recomputes the medians from the rows and compares bit for bit.
    pub fn check_medians(&self) -> Result<()> {
        let fresh = Self::compute_medians(&self.rows);
        let same = fresh.len() == self.medians.len()
            && fresh
                .iter()
                .zip(&self.medians)
                .all(|((ka, a), (kb, b))| ka == kb && a.to_bits() == b.to_bits());
        if same {
            Ok(())
        } else {
            Err(Error::Numerical("stored medians differ from the rows".into()))
        }
    }

    pub fn failed_count(&self) -> usize {
        self.rows.iter().filter(|r| r.failed).count()
    }

    pub fn median(&self, k: usize, r: usize) -> Option<f64> {
        self.medians.get(&(k, r)).copied()
    }

    /// Correlation of the cell medians with `r` at fixed `k`.
    pub fn trend_vs_r(&self, k: usize) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .medians
            .iter()
            .filter(|((kk, _), _)| *kk == k)
            .map(|((_, r), m)| (*r as f64, *m))
            .unzip();
        pearson(&x, &y)
    }

    /// Correlation of the cell medians with `k` at fixed `r`.
    pub fn trend_vs_k(&self, r: usize) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .medians
            .iter()
            .filter(|((_, rr), _)| *rr == r)
            .map(|((k, _), m)| (*k as f64, *m))
            .unzip();
        pearson(&x, &y)
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// CSV with [`CSV_HEADER`], LF line endings, floats at 17 significant digits.
pub fn write_csv<W: Write>(out: W, rows: &[TrialResult]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.r.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_f64(r.err_fro),
            fmt_f64(r.err_norm_sq),
            r.stage1_iters.to_string(),
            r.stage2_iters.to_string(),
            fmt_f64(r.wall_ms),
            r.failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    write_csv(std::io::BufWriter::new(std::fs::File::create(path)?), &table.rows)
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<TrialResult>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {:?}", header.join(","))));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    parse_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(k: usize, r: usize, trial: usize, e: f64) -> TrialResult {
        TrialResult {
            k,
            r,
            m: 3,
            n: 4,
            trial,
            seed: u64::MAX - trial as u64,
            err_fro: e.sqrt(),
            err_norm_sq: e,
            stage1_iters: 7,
            stage2_iters: 9,
            wall_ms: 0.1 + e,
            failed: trial == 1,
        }
    }

    #[test]
    fn median_and_pearson() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[f64::NAN, 1.0]), 1.0);
        assert!(median(&[]).is_nan());
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0], &[1.0]).is_nan());
    }

    #[test]
    fn table_sorts_and_checks_medians() {
        let rows = vec![
            row(2, 1, 1, 5.0),
            row(1, 1, 0, 1.0),
            row(1, 1, 1, 3.0),
            row(2, 1, 0, 7.0),
        ];
        let mut t = ResultTable::new(rows, false);
        assert_eq!(t.rows[0].k, 1);
        assert_eq!(t.median(1, 1), Some(2.0));
        assert_eq!(t.median(2, 1), Some(6.0));
        assert_eq!(t.failed_count(), 2);
        t.check_medians().unwrap();
        t.medians.insert((1, 1), 2.5);
        assert!(t.check_medians().is_err());
        assert!((t.trend_vs_k(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut out = Vec::new();
        write_csv(&mut out, &[]).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&out[..]).unwrap().is_empty());
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(parse_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec((1e-300f64..1e300, 0.0f64..1e9), 0..20)) {
            let rows: Vec<TrialResult> = vals.iter().enumerate().map(|(i, &(e, w))| {
                let mut r = row(i % 3 + 1, i % 2 + 1, i, e);
                r.wall_ms = w;
                r
            }).collect();
            let mut out = Vec::new();
            write_csv(&mut out, &rows).unwrap();
            let text = String::from_utf8(out.clone()).unwrap();
            prop_assert_eq!(text.lines().count(), rows.len() + 1);
            prop_assert!(!text.contains('\r'));
            prop_assert_eq!(parse_csv(&out[..]).unwrap(), rows);
        }
    }
}
