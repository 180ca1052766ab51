//! Per-run convergence records and their CSV/JSON forms.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{AlgorithmId, RunTrace};

pub const CSV_HEADER: [&str; 7] = [
    "algo",
    "seed",
    "epoch",
    "oracle_calls",
    "loss",
    "grad_norm",
    "step_size",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}`, expected csv|json"
            ))),
        }
    }
}

/// One measurement at the start of a full data pass (and at the end of the
/// run).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecordRow {
    /// Charged oracle calls divided by `n`.
    pub epoch: f64,
    pub oracle_calls: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub algo: AlgorithmId,
    pub seed: u64,
    /// Ordered by oracle calls. A diverged run ends with a row whose loss
    /// and gradient norm are infinite.
    pub rows: Vec<RecordRow>,
}

impl RunRecord {
    pub fn from_trace(trace: &RunTrace, seed: u64) -> Self {
        let n = trace.num_components as f64;
        let mut rows: Vec<RecordRow> = trace
            .passes
            .iter()
            .map(|p| RecordRow {
                epoch: p.oracle_calls as f64 / n,
                oracle_calls: p.oracle_calls,
                loss: p.loss,
                grad_norm: p.grad_norm,
                step_size: p.step_size,
            })
            .collect();
        if trace.is_diverged() {
            let calls = trace.oracle_calls();
            rows.push(RecordRow {
                epoch: calls as f64 / n,
                oracle_calls: calls,
                loss: f64::INFINITY,
                grad_norm: f64::INFINITY,
                step_size: trace.steps.last().map_or(f64::NAN, |s| s.step_size),
            });
        }
        RunRecord {
            algo: trace.algorithm,
            seed,
            rows,
        }
    }

    pub fn is_diverged(&self) -> bool {
        self.rows.last().is_some_and(|r| r.grad_norm == f64::INFINITY)
    }

    /// Last measured true gradient norm; infinite for diverged or NaN runs.
    pub fn final_grad_norm(&self) -> f64 {
        match self.rows.last() {
            Some(r) if !r.grad_norm.is_nan() => r.grad_norm,
            _ => f64::INFINITY,
        }
    }

    pub fn oracle_calls(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.oracle_calls)
    }

    /// Oracle calls of the first row with gradient norm at most `target`.
    pub fn calls_to_reach(&self, target: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.grad_norm <= target)
            .map(|r| r.oracle_calls)
    }
}

/// Flat row as it appears in both output formats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatRow {
    algo: AlgorithmId,
    seed: u64,
    #[serde(with = "lenient_f64")]
    epoch: f64,
    oracle_calls: u64,
    #[serde(with = "lenient_f64")]
    loss: f64,
    #[serde(with = "lenient_f64")]
    grad_norm: f64,
    #[serde(with = "lenient_f64")]
    step_size: f64,
}

/// JSON numbers for finite values, the strings `inf`, `-inf` and `NaN`
/// otherwise.
mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&format!("{v:?}"))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => s
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("not a number: `{s}`"))),
        }
    }
}

fn flatten(records: &[RunRecord]) -> Vec<FlatRow> {
    records
        .iter()
        .flat_map(|r| {
            r.rows.iter().map(|row| FlatRow {
                algo: r.algo,
                seed: r.seed,
                epoch: row.epoch,
                oracle_calls: row.oracle_calls,
                loss: row.loss,
                grad_norm: row.grad_norm,
                step_size: row.step_size,
            })
        })
        .collect()
}

/// Regroups flat rows; a new record starts when `(algo, seed)` changes or
/// the oracle count stops increasing.
fn group(rows: Vec<FlatRow>) -> Vec<RunRecord> {
    let mut records: Vec<RunRecord> = Vec::new();
    for f in rows {
        let row = RecordRow {
            epoch: f.epoch,
            oracle_calls: f.oracle_calls,
            loss: f.loss,
            grad_norm: f.grad_norm,
            step_size: f.step_size,
        };
        match records.last_mut() {
            Some(r) if r.algo == f.algo && r.seed == f.seed && r.oracle_calls() < f.oracle_calls => {
                r.rows.push(row)
            }
            _ => records.push(RunRecord {
                algo: f.algo,
                seed: f.seed,
                rows: vec![row],
            }),
        }
    }
    records
}

/// `{:?}` prints the shortest string that parses back to the same `f64`.
fn float(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_records<W: Write>(records: &[RunRecord], format: Format, out: W) -> Result<()> {
    if records.iter().all(|r| r.rows.is_empty()) {
        return Err(Error::invalid("records", "nothing to write"));
    }
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for f in flatten(records) {
                w.write_record([
                    f.algo.as_str().to_string(),
                    f.seed.to_string(),
                    float(f.epoch),
                    f.oracle_calls.to_string(),
                    float(f.loss),
                    float(f.grad_norm),
                    float(f.step_size),
                ])?;
            }
            w.flush().map_err(|e| Error::io("writing csv", e))
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &flatten(records))?;
            writeln!(out).map_err(|e| Error::io("writing json", e))
        }
    }
}

/// Writes `records` to `path`, creating missing parent directories.
pub fn emit_records(records: &[RunRecord], format: Format, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    write_records(records, format, &mut w)?;
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_field<T: FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} `{field}`"),
    })
}

pub fn parse_records<R: Read>(input: R, format: Format) -> Result<Vec<RunRecord>> {
    let rows = match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(input);
            if r.headers()?.iter().ne(CSV_HEADER) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{}`", CSV_HEADER.join(",")),
                });
            }
            let mut rows = Vec::new();
            for (k, rec) in r.records().enumerate() {
                let rec = rec?;
                let line = k + 2;
                rows.push(FlatRow {
                    algo: parse_field(&rec[0], "algo", line)?,
                    seed: parse_field(&rec[1], "seed", line)?,
                    epoch: parse_field(&rec[2], "epoch", line)?,
                    oracle_calls: parse_field(&rec[3], "oracle_calls", line)?,
                    loss: parse_field(&rec[4], "loss", line)?,
                    grad_norm: parse_field(&rec[5], "grad_norm", line)?,
                    step_size: parse_field(&rec[6], "step_size", line)?,
                });
            }
            rows
        }
        Format::Json => serde_json::from_reader(input)?,
    };
    Ok(group(rows))
}

pub fn read_records(path: &Path, format: Format) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_records(BufReader::new(file), format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(calls: u64, g: f64) -> RecordRow {
        RecordRow {
            epoch: calls as f64 / 3.0,
            oracle_calls: calls,
            loss: 0.5,
            grad_norm: g,
            step_size: 0.1,
        }
    }

    fn render(records: &[RunRecord], format: Format) -> String {
        let mut buf = Vec::new();
        write_records(records, format, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn one_row_is_two_lines() {
        let rec = RunRecord {
            algo: AlgorithmId::Sgd,
            seed: 4,
            rows: vec![row(0, 1.0)],
        };
        let text = render(&[rec], Format::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            [
                "algo,seed,epoch,oracle_calls,loss,grad_norm,step_size",
                "sgd,4,0.0,0,0.5,1.0,0.1"
            ]
        );
    }

    #[test]
    fn third_round_trips() {
        let rec = RunRecord {
            algo: AlgorithmId::AdaSpider,
            seed: 0,
            rows: vec![row(1, 1.0 / 3.0)],
        };
        for format in [Format::Csv, Format::Json] {
            let back = parse_records(render(std::slice::from_ref(&rec), format).as_bytes(), format).unwrap();
            assert_eq!(back[0].rows[0].grad_norm, 1.0 / 3.0);
        }
    }

    #[test]
    fn non_finite_values_survive() {
        let rec = RunRecord {
            algo: AlgorithmId::Svrg,
            seed: 1,
            rows: vec![
                RecordRow {
                    step_size: f64::NAN,
                    ..row(0, 2.0)
                },
                RecordRow {
                    loss: f64::NEG_INFINITY,
                    ..row(5, f64::INFINITY)
                },
            ],
        };
        for format in [Format::Csv, Format::Json] {
            let back = parse_records(render(std::slice::from_ref(&rec), format).as_bytes(), format).unwrap();
            assert!(back[0].rows[0].step_size.is_nan());
            assert_eq!(back[0].rows[1].loss, f64::NEG_INFINITY);
            assert!(back[0].is_diverged());
        }
    }

    #[test]
    fn same_key_records_split_on_calls() {
        let a = RunRecord {
            algo: AlgorithmId::Sgd,
            seed: 0,
            rows: vec![row(0, 1.0), row(3, 0.5)],
        };
        let records = vec![a.clone(), a];
        let back = parse_records(render(&records, Format::Csv).as_bytes(), Format::Csv).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn empty_records_rejected() {
        assert!(write_records(&[], Format::Csv, Vec::new()).is_err());
    }

    #[test]
    fn bad_header_rejected() {
        let text = "algo,seed,epoch\nsgd,0,0.0\n";
        assert!(matches!(
            parse_records(text.as_bytes(), Format::Csv),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_field_names_line() {
        let text = "algo,seed,epoch,oracle_calls,loss,grad_norm,step_size\nsgd,0,0.0,x,1,1,1\n";
        assert!(matches!(
            parse_records(text.as_bytes(), Format::Csv),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn json_field_names() {
        let rec = RunRecord {
            algo: AlgorithmId::Spider,
            seed: 2,
            rows: vec![row(0, 1.0)],
        };
        let v: serde_json::Value = serde_json::from_str(&render(&[rec], Format::Json)).unwrap();
        let keys: Vec<&String> = v[0].as_object().unwrap().keys().collect();
        let mut expected = CSV_HEADER.to_vec();
        expected.sort();
        assert_eq!(keys, expected);
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(any::<f64>(), 1..20), seed in any::<u64>()) {
            let rows = values
                .iter()
                .enumerate()
                .map(|(k, &v)| RecordRow {
                    epoch: v,
                    oracle_calls: k as u64 * 7,
                    loss: -v,
                    grad_norm: v.abs(),
                    step_size: v * 1e-300,
                })
                .collect();
            let records = vec![RunRecord { algo: AlgorithmId::AdaGradNorm, seed, rows }];
            for format in [Format::Csv, Format::Json] {
                let back = parse_records(render(&records, format).as_bytes(), format).unwrap();
                prop_assert_eq!(back.len(), 1);
                for (a, b) in back[0].rows.iter().zip(&records[0].rows) {
                    for (x, y) in [(a.epoch, b.epoch), (a.loss, b.loss), (a.grad_norm, b.grad_norm), (a.step_size, b.step_size)] {
                        prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
                    }
                }
            }
        }
    }
}
