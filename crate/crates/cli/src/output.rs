use std::io::Write;
use std::path::Path;

use csrange::experiment::ExperimentConfig;
use csrange::{Error, Result};
use serde::Serialize;

use crate::commands::write_bytes;

/// Destination of a table or record: a file, or stdout.
pub enum Sink<'a> {
    Stdout,
    File(&'a Path),
}

impl<'a> From<Option<&'a Path>> for Sink<'a> {
    fn from(p: Option<&'a Path>) -> Self {
        p.map_or(Sink::Stdout, Sink::File)
    }
}

impl Sink<'_> {
    fn emit(&self, bytes: &[u8]) -> Result<()> {
        match self {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
            Sink::File(p) => write_bytes(p, bytes),
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("CSV serialization failed: {e}"))
}

/// Serializes `rows` as CSV, preceded by an optional `#` comment line.
pub fn write_csv<T: Serialize>(sink: Sink<'_>, comment: Option<&str>, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    if let Some(c) = comment {
        writeln!(buf, "{c}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
    }
    sink.emit(&buf)
}

pub fn write_json<T: Serialize>(sink: Sink<'_>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    sink.emit(text.as_bytes())
}

/// Gnuplot script drawing median relative error against α, one curve per
/// (method, SNR bucket), from the summary CSV.
pub fn write_gnuplot(script: &Path, summary: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key outside right\n");
    s.push_str("set xlabel 'compression factor alpha'\n");
    s.push_str("set ylabel 'median relative error (m)'\n");
    s.push_str("set logscale y\n");
    // Summary columns: preset,snr_lo,snr_hi,alpha,method,trials,failures,mean_m,std_m,median_m
    let mut curves = Vec::new();
    for preset in &cfg.presets {
        for b in &cfg.snr_buckets {
            for m in &cfg.methods {
                curves.push(format!(
                    "'{}' skip 1 using ((strcol(1) eq '{preset}' && $2 == {} && $3 == {} && strcol(5) eq '{m}') ? $4 : 1/0):10 \
                     with linespoints title '{m} {preset} {}'",
                    summary.display(),
                    b.lo,
                    b.hi,
                    b.label()
                ));
            }
        }
    }
    s.push_str("plot ");
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    write_bytes(script, s.as_bytes())
}
