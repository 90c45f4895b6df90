//! CSV and JSON writers. Every number is printed with 15 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::asymptotics::{BranchTable, Prediction, VerificationReport};
use crate::secular::SpectrumResult;

/// `x` in scientific notation with 15 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.14e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// JSON formatter printing floats as [`fmt_num`] does; non-finite values become `null`.
struct SciFormatter;

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_num(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

/// Serialize to JSON with 15-significant-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_spectrum_csv<W: Write>(out: W, spectrum: &SpectrumResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "multiplicity", "residual"])?;
    for e in &spectrum.eigenvalues {
        w.write_record([fmt_num(e.lambda), e.multiplicity.to_string(), fmt_num(e.residual)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_branches_csv<W: Write>(out: W, table: &BranchTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["branch_id", "epsilon", "lambda"])?;
    for b in &table.branches {
        for &(eps, lambda) in &b.samples {
            w.write_record([b.id.to_string(), fmt_num(eps), fmt_num(lambda)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, table: &BranchTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["branch_id", "class", "alpha", "coefficient", "limit"])?;
    for b in &table.branches {
        let class = b.class.map(|c| c.as_str()).unwrap_or("");
        w.write_record([
            b.id.to_string(),
            class.to_string(),
            fmt_opt(b.alpha),
            fmt_opt(b.coefficient),
            fmt_opt(b.limit),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PredictionJson<'a> {
    m0: usize,
    n_minus: usize,
    n_zero: usize,
    n_plus: usize,
    slow_slopes: &'a [f64],
    fast_coefficients: &'a [f64],
    form_eigenvalues: &'a [f64],
}

pub fn prediction_json(p: &Prediction) -> String {
    to_json(&PredictionJson {
        m0: p.m0,
        n_minus: p.n_minus,
        n_zero: p.n_zero,
        n_plus: p.n_plus,
        slow_slopes: &p.slow_slopes,
        fast_coefficients: &p.fast_coefficients,
        form_eigenvalues: &p.form.eigenvalues,
    })
}

#[derive(Serialize)]
struct Counts {
    n_minus: usize,
    n_zero: usize,
    n_plus: usize,
}

#[derive(Serialize)]
struct Observed {
    fast: usize,
    slow_negative: usize,
    exotic: usize,
    slow_positive: usize,
    unclassified: usize,
}

#[derive(Serialize)]
struct Check<'a> {
    name: &'a str,
    passed: bool,
    detail: &'a str,
}

#[derive(Serialize)]
struct Ambiguity {
    epsilon: f64,
    branches: [usize; 2],
    lambda: f64,
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    passed: bool,
    predicted: Counts,
    observed: Observed,
    checks: Vec<Check<'a>>,
    ambiguities: Vec<Ambiguity>,
}

pub fn verdict_json(report: &VerificationReport, table: &BranchTable) -> String {
    let [fast, slow_negative, exotic, slow_positive, unclassified] = report.observed;
    let (n_minus, n_zero, n_plus) = report.predicted;
    to_json(&VerdictJson {
        passed: report.passed(),
        predicted: Counts {
            n_minus,
            n_zero,
            n_plus,
        },
        observed: Observed {
            fast,
            slow_negative,
            exotic,
            slow_positive,
            unclassified,
        },
        checks: report
            .items
            .iter()
            .map(|i| Check {
                name: &i.name,
                passed: i.passed,
                detail: &i.detail,
            })
            .collect(),
        ambiguities: table
            .ambiguities
            .iter()
            .map(|a| Ambiguity {
                epsilon: a.epsilon,
                branches: [a.branches.0, a.branches.1],
                lambda: a.lambda,
            })
            .collect(),
    })
}

/// `nrc_dimension=<d> n_zero=<n> MATCH|MISMATCH`.
pub fn nrc_line(nrc_dimension: usize, n_zero: usize) -> String {
    format!(
        "nrc_dimension={nrc_dimension} n_zero={n_zero} {}",
        if nrc_dimension == n_zero { "MATCH" } else { "MISMATCH" }
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secular::{Eigenvalue, Window};

    #[test]
    fn numbers_have_fifteen_digits() {
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265358979e0");
        assert_eq!(fmt_num(-0.001), "-1.00000000000000e-3");
    }

    #[test]
    fn json_floats_reparse() {
        let s = to_json(&vec![1.5f64, -2.0e-7, f64::NAN]);
        let v: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(v, vec![Some(1.5), Some(-2.0e-7), None]);
    }

    #[test]
    fn spectrum_csv_layout() {
        let spec = SpectrumResult {
            eigenvalues: vec![Eigenvalue {
                lambda: 9.869604401089358,
                multiplicity: 2,
                residual: 1e-15,
            }],
            window: Window::new(0.0, 50.0),
            scan_resolution: 0.1,
            median_sigma: 0.5,
            warnings: vec![],
        };
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &spec).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda,multiplicity,residual\n9.86960440108936e0,2,1.00000000000000e-15\n"
        );
    }
}
