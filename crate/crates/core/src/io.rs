//! CSV forms of distributions, profiles, kernels and result tables.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit. Lines starting with `#` are
//! comments on input.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::chains::TransitionKernel;
use crate::deviations::DecayRow;
use crate::error::{Error, Result};
use crate::inference::{EstimationResult, TestOutcome};
use crate::models::{EquilibriumRow, TimeRow};
use crate::space::{Distribution, SpecificityProfile, StateSpace};

pub const VALUE_HEADER: [&str; 3] = ["index", "label", "value"];
pub const KERNEL_HEADER: [&str; 3] = ["from", "to", "prob"];
pub const ESTIMATION_HEADER: [&str; 9] = ["estimator", "estimate", "variance", "n", "n0", "ci_low", "ci_high", "reject", "i_min"];
pub const DECAY_HEADER: [&str; 4] = ["n", "log_level", "normalized_rate", "target_C"];
pub const EQUILIBRIUM_HEADER: [&str; 3] = ["theta", "iplus", "ifo"];
pub const TIME_HEADER: [&str; 5] = ["t", "iplus", "iplus_stopped", "iplus_eq", "ifo"];

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

/// Writes `header` and `rows` as CSV text.
pub fn write_table<R, I>(header: &[&str], rows: R) -> Result<String>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator,
    I::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(parse_err)?;
    for row in rows {
        w.write_record(row).map_err(parse_err)?;
    }
    let bytes = w.into_inner().map_err(parse_err)?;
    String::from_utf8(bytes).map_err(parse_err)
}

/// Reads a CSV table, checks its header, and returns the data rows.
pub fn read_table(text: &str, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let found: Vec<String> = r.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Parse(format!("expected header {header:?}, found {found:?}")));
    }
    r.records().map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()).map_err(parse_err)).collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

fn parse_index(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

fn values_csv(space: &StateSpace, values: &[f64]) -> Result<String> {
    write_table(&VALUE_HEADER, values.iter().enumerate().map(|(i, v)| [i.to_string(), space.label(i).to_string(), v.to_string()]))
}

/// Reads `index,label,value` rows. Indices must run `0..m` in order. With a
/// `space`, labels must match it; otherwise a space is built from them.
fn values_from_csv(text: &str, space: Option<Arc<StateSpace>>) -> Result<(Arc<StateSpace>, Vec<f64>)> {
    let rows = read_table(text, &VALUE_HEADER)?;
    let mut labels = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if parse_index(&row[0])? != k {
            return Err(Error::Parse(format!("row {k} has index {}", row[0])));
        }
        labels.push(row[1].clone());
        values.push(parse_f64(&row[2])?);
    }
    let space = match space {
        Some(s) => {
            if s.labels() != labels.as_slice() {
                return Err(Error::SpaceMismatch);
            }
            s
        }
        None => StateSpace::new(labels)?,
    };
    Ok((space, values))
}

pub fn distribution_to_csv(p: &Distribution) -> Result<String> {
    values_csv(p.space(), p.mass())
}

pub fn distribution_from_csv(text: &str, space: Option<Arc<StateSpace>>) -> Result<Distribution> {
    let (space, values) = values_from_csv(text, space)?;
    Distribution::new(space, values)
}

/// Profile values as rows, preceded by a `# threshold=<f0>` comment.
pub fn profile_to_csv(f: &SpecificityProfile) -> Result<String> {
    Ok(format!("# threshold={}\n{}", f.threshold(), values_csv(f.space(), f.values())?))
}

/// Reads a profile; without a `# threshold=` line the threshold is the
/// maximum value.
pub fn profile_from_csv(text: &str, space: Option<Arc<StateSpace>>) -> Result<SpecificityProfile> {
    let threshold = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|l| l.trim().strip_prefix("threshold="))
        .map(parse_f64)
        .transpose()?;
    let (space, values) = values_from_csv(text, space)?;
    match threshold {
        Some(t) => SpecificityProfile::new(space, values, t),
        None => SpecificityProfile::stringent(space, values),
    }
}

/// Nonzero entries as `from,to,prob` triplets.
pub fn kernel_to_csv(kernel: &TransitionKernel) -> Result<String> {
    matrix_to_csv(kernel.rows())
}

pub fn matrix_to_csv(rows: &DMatrix<f64>) -> Result<String> {
    let m = rows.nrows();
    write_table(
        &KERNEL_HEADER,
        (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| rows[(i, j)] != 0.0)
            .map(|(i, j)| [i.to_string(), j.to_string(), rows[(i, j)].to_string()]),
    )
}

/// Reads triplets into a row-stochastic kernel on `space`. Missing entries
/// are zero; repeated entries are rejected.
pub fn kernel_from_csv(text: &str, space: Arc<StateSpace>) -> Result<TransitionKernel> {
    let m = space.size();
    let mut rows = DMatrix::<f64>::zeros(m, m);
    let mut seen = DMatrix::<u8>::zeros(m, m);
    for row in read_table(text, &KERNEL_HEADER)? {
        let (i, j, p) = (parse_index(&row[0])?, parse_index(&row[1])?, parse_f64(&row[2])?);
        if i >= m || j >= m {
            return Err(Error::OutOfRange { value: i.max(j) as f64, range: format!("[0, {m})") });
        }
        if seen[(i, j)] == 1 {
            return Err(Error::Parse(format!("duplicate entry ({i}, {j})")));
        }
        seen[(i, j)] = 1;
        rows[(i, j)] = p;
    }
    TransitionKernel::from_matrix(space, rows)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// One row under [`ESTIMATION_HEADER`]; `reject` and `i_min` are blank
/// without a test.
pub fn estimation_row(r: &EstimationResult, test: Option<&TestOutcome>) -> [String; 9] {
    [
        r.kind.to_string(),
        r.estimate.to_string(),
        r.variance.to_string(),
        r.n.to_string(),
        fmt_opt(r.n0),
        r.ci_low.to_string(),
        r.ci_high.to_string(),
        fmt_opt(test.map(|t| t.reject)),
        fmt_opt(test.map(|t| t.i_min)),
    ]
}

pub fn decay_row(row: &DecayRow, target_c: f64) -> [String; 4] {
    [row.n.to_string(), row.log_level.to_string(), row.normalized_rate.to_string(), target_c.to_string()]
}

pub fn equilibrium_row(row: &EquilibriumRow) -> [String; 3] {
    [row.theta.to_string(), row.iplus.to_string(), row.ifo.to_string()]
}

pub fn time_row(row: &TimeRow) -> [String; 5] {
    [row.t.to_string(), row.iplus.to_string(), row.iplus_stopped.to_string(), row.iplus_eq.to_string(), row.ifo.to_string()]
}
