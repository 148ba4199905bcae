//! Number formatting and output sinks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const JSON_DIGITS: usize = 12;
pub const CSV_DIGITS: usize = 6;

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest rendering of `x` rounded to `digits` significant digits, in
/// exponent notation outside `[1e-5, 1e15)`.
pub fn format_sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    let magnitude = r.abs();
    if r == 0.0 || (1e-5..1e15).contains(&magnitude) {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

/// Serializes `value` to JSON with every float rounded to 12 significant
/// digits.
pub fn to_rounded_json<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("output types serialize to JSON");
    round_floats(&mut v);
    v
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = serde_json::Number::from_f64(round_sig(x, JSON_DIGITS)) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Destination for a command's main output: a file or standard output.
pub enum Sink {
    Stdout(io::Stdout),
    File { path: PathBuf, writer: BufWriter<File> },
}

impl Sink {
    pub fn open(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Sink::Stdout(io::stdout())),
            Some(p) => {
                let file = File::create(p).map_err(|e| CliError::io(p, e))?;
                Ok(Sink::File {
                    path: p.to_path_buf(),
                    writer: BufWriter::new(file),
                })
            }
        }
    }

    fn path(&self) -> PathBuf {
        match self {
            Sink::Stdout(_) => PathBuf::from("<stdout>"),
            Sink::File { path, .. } => path.clone(),
        }
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.flush().map_err(|e| CliError::io(self.path(), e))
    }

    pub fn write_json(mut self, value: &Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.write_all(text.as_bytes())
            .map_err(|e| CliError::io(self.path(), e))?;
        self.finish()
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Sink::Stdout(s) => s.write(buf),
            Sink::File { writer, .. } => writer.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Sink::Stdout(s) => s.flush(),
            Sink::File { writer, .. } => writer.flush(),
        }
    }
}

/// Maps a CSV writer error to an I/O error on `path`.
pub fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Numeric(format!("{}: CSV encoding failed: {other:?}", path.display())),
    }
}
