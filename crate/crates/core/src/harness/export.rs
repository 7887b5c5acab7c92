use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::montecarlo::TrialOutcome;
use crate::engine::DiagnosticPoint;
use crate::error::Result;

/// Column order of the time-series CSV.
pub const TIMESERIES_COLUMNS: [&str; 12] = [
    "t",
    "lambda_min",
    "lambda_bar",
    "lambda_top",
    "c_t",
    "benchmark",
    "ratio_2d",
    "align_star",
    "align_hat",
    "weighted_err",
    "plain_err",
    "regret_so_far",
];

/// Seventeen significant digits in scientific notation, which round-trips
/// every finite `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_timeseries_csv<W: Write>(points: &[DiagnosticPoint], out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", TIMESERIES_COLUMNS.join(","))?;
    for p in points {
        let s = &p.snapshot;
        let row = [
            s.lambda_min,
            s.lambda_bar,
            s.lambda_top,
            s.c_t,
            s.benchmark,
            s.ratio_2d,
            s.align_star,
            s.align_hat,
            s.weighted_err,
            s.plain_err,
            p.regret_so_far,
        ];
        write!(out, "{}", s.t)?;
        for v in row {
            write!(out, ",{}", format_f64(v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Pooled CLT samples: trial index, `σ̂²`, and the raw statistic coordinates.
pub fn write_clt_csv<W: Write>(outcomes: &[TrialOutcome], out: &mut W) -> io::Result<()> {
    let k = outcomes.first().map_or(0, |o| o.clt.len());
    let mut header = vec!["trial_index".to_string(), "sigma2_hat".to_string()];
    header.extend((1..=k).map(|j| format!("clt_{j}")));
    writeln!(out, "{}", header.join(","))?;
    let mut sorted: Vec<&TrialOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.trial_index);
    for o in sorted {
        write!(out, "{},{}", o.trial_index, format_f64(o.sigma2_hat))?;
        for v in &o.clt {
            write!(out, ",{}", format_f64(*v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// JSON formatter writing floats with 17 significant digits.
struct Float17;

impl serde_json::ser::Formatter for Float17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as single-line JSON with 17-digit floats and a trailing
/// newline. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Float17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json_str(&std::fs::read_to_string(path)?)
}

pub fn write_timeseries_file(points: &[DiagnosticPoint], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_timeseries_csv(points, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_clt_file(outcomes: &[TrialOutcome], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_clt_csv(outcomes, &mut out)?;
    out.flush()?;
    Ok(())
}
