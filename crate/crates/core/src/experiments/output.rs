//! CSV and manifest I/O.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! finite `f64`; empty fields mean "not available".

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::envelope::EnvelopeRow;
use super::ExperimentError;
use crate::solvers::SolverTrace;

pub const TRACE_HEADER: &str = "trial,iter,objective,residual,rel_error,oracle_calls,wall_ns";
pub const ENVELOPE_HEADER: &str =
    "function,t,delta,delta2,x,f,u_exact,u_mc,u_quad,prox_exact,prox_hj,abs_err";

pub const SUMMARY_HEADER: &str = "iter,mean,q10,median,q90";

/// Per-iteration mean and quantiles across trials; `values[k]` holds the
/// trial values at iteration `k`.
pub fn write_summary_csv(path: &Path, values: &[Vec<f64>]) -> Result<(), ExperimentError> {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for (k, v) in values.iter().enumerate() {
        if v.is_empty() {
            continue;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        writeln!(
            s,
            "{k},{},{},{},{}",
            format_float(mean),
            format_float(super::quantile(v, 0.1)),
            format_float(super::median(v)),
            format_float(super::quantile(v, 0.9))
        )
        .unwrap();
    }
    write_file(path, &s)
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `(trial, trace)` pairs, one row per iterate.
pub fn write_trace_csv<'a>(
    path: &Path,
    traces: impl IntoIterator<Item = (usize, &'a SolverTrace)>,
) -> Result<(), ExperimentError> {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for (trial, tr) in traces {
        for k in 0..tr.objective.len() {
            let rel = tr.rel_error.as_ref().map(|r| r[k]);
            writeln!(
                s,
                "{trial},{k},{},{},{},{},{}",
                format_float(tr.objective[k]),
                format_float(tr.residual[k]),
                opt(rel),
                tr.oracle_calls[k],
                tr.wall_ns[k]
            )
            .unwrap();
        }
    }
    write_file(path, &s)
}

struct Fields<'a> {
    path: &'a Path,
    line: usize,
    cells: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn err(&self, reason: String) -> ExperimentError {
        ExperimentError::Csv {
            path: self.path.to_path_buf(),
            line: self.line,
            reason,
        }
    }

    fn float(&self, i: usize) -> Result<f64, ExperimentError> {
        self.cells[i]
            .parse()
            .map_err(|_| self.err(format!("column {} is not a number: {:?}", i + 1, self.cells[i])))
    }

    fn opt_float(&self, i: usize) -> Result<Option<f64>, ExperimentError> {
        if self.cells[i].is_empty() {
            Ok(None)
        } else {
            self.float(i).map(Some)
        }
    }

    fn int<T: std::str::FromStr>(&self, i: usize) -> Result<T, ExperimentError> {
        self.cells[i]
            .parse()
            .map_err(|_| self.err(format!("column {} is not an integer: {:?}", i + 1, self.cells[i])))
    }
}

fn rows<'a>(
    path: &'a Path,
    text: &'a str,
    header: &str,
) -> Result<Vec<Fields<'a>>, ExperimentError> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(ExperimentError::Csv {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header {header:?}"),
        });
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for (i, l) in lines.enumerate() {
        if l.is_empty() {
            continue;
        }
        let f = Fields {
            path,
            line: i + 2,
            cells: l.split(',').collect(),
        };
        if f.cells.len() != width {
            return Err(f.err(format!("expected {width} fields, found {}", f.cells.len())));
        }
        out.push(f);
    }
    Ok(out)
}

/// Reads a trace CSV back into `(trial, trace)` pairs in file order.
pub fn parse_trace_csv(path: &Path) -> Result<Vec<(usize, SolverTrace)>, ExperimentError> {
    let text = read_file(path)?;
    let mut out: Vec<(usize, SolverTrace)> = Vec::new();
    for f in rows(path, &text, TRACE_HEADER)? {
        let trial: usize = f.int(0)?;
        let iter: usize = f.int(1)?;
        if out.last().map(|(t, _)| *t) != Some(trial) {
            out.push((trial, SolverTrace::default()));
        }
        let tr = &mut out.last_mut().unwrap().1;
        if iter != tr.objective.len() {
            return Err(f.err(format!("iteration {iter} out of sequence")));
        }
        tr.objective.push(f.float(2)?);
        tr.residual.push(f.float(3)?);
        match (f.opt_float(4)?, iter) {
            (Some(r), 0) => tr.rel_error = Some(vec![r]),
            (Some(r), _) => match tr.rel_error.as_mut() {
                Some(v) => v.push(r),
                None => return Err(f.err("rel_error appears mid-trace".into())),
            },
            (None, _) if tr.rel_error.is_some() => {
                return Err(f.err("rel_error missing mid-trace".into()))
            }
            (None, _) => {}
        }
        tr.oracle_calls.push(f.int(5)?);
        tr.wall_ns.push(f.int(6)?);
    }
    Ok(out)
}

pub fn write_envelope_csv(path: &Path, rows: &[EnvelopeRow]) -> Result<(), ExperimentError> {
    let mut s = String::from(ENVELOPE_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.function,
            format_float(r.t),
            format_float(r.delta),
            opt(r.delta2),
            format_float(r.x),
            format_float(r.f),
            opt(r.u_exact),
            opt(r.u_mc),
            opt(r.u_quad),
            opt(r.prox_exact),
            opt(r.prox_hj),
            opt(r.abs_err)
        )
        .unwrap();
    }
    write_file(path, &s)
}

pub fn parse_envelope_csv(path: &Path) -> Result<Vec<EnvelopeRow>, ExperimentError> {
    let text = read_file(path)?;
    rows(path, &text, ENVELOPE_HEADER)?
        .iter()
        .map(|f| {
            Ok(EnvelopeRow {
                function: f.cells[0].to_string(),
                t: f.float(1)?,
                delta: f.float(2)?,
                delta2: f.opt_float(3)?,
                x: f.float(4)?,
                f: f.float(5)?,
                u_exact: f.opt_float(6)?,
                u_mc: f.opt_float(7)?,
                u_quad: f.opt_float(8)?,
                prox_exact: f.opt_float(9)?,
                prox_hj: f.opt_float(10)?,
                abs_err: f.opt_float(11)?,
            })
        })
        .collect()
}

/// Ordered `key=value` metadata of one output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.txt";

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, ExperimentError> {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k}={v}").unwrap();
        }
        let path = dir.join(Self::FILE_NAME);
        write_file(&path, &s)?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, ExperimentError> {
    let text = read_file(path)?;
    let mut m = Manifest::default();
    for (i, line) in text.lines().enumerate() {
        let (k, v) = line.split_once('=').ok_or_else(|| ExperimentError::Csv {
            path: path.to_path_buf(),
            line: i + 1,
            reason: "expected key=value".into(),
        })?;
        m.entries.push((k.to_string(), v.to_string()));
    }
    Ok(m)
}
