//! CSV/JSON writers. Floats use 17 significant digits and `\n` line endings
//! so that identical inputs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::CliError;
use crate::moments::SignConvention;

pub const NULL_NOTE: &str = "empty field = inf, no correlations or not computed";

/// `x` with 17 significant digits; `None` and non-finite values become "".
pub fn fmt_float(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        _ => String::new(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub(crate) struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    /// Creates the file and writes the `#` provenance line and column names.
    pub fn create(
        path: PathBuf,
        convention: Option<SignConvention>,
        columns: &[&str],
    ) -> Result<Self, CliError> {
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = Self {
            path,
            out: BufWriter::new(file),
        };
        let sign = convention.map_or_else(|| "unresolved".to_string(), |c| c.to_string());
        w.line(&format!(
            "# {}; sigma_pq_sign={sign}; {NULL_NOTE}",
            crate::TOOL_VERSION
        ))?;
        w.line(&columns.join(","))?;
        Ok(w)
    }

    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(io_err(&self.path))
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.line(&fields.join(","))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(io_err(&self.path))
    }
}

pub(crate) fn write_json(path: PathBuf, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        let x = 0.1 + 0.2;
        let s = fmt_float(Some(x));
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(fmt_float(None), "");
        assert_eq!(fmt_float(Some(f64::INFINITY)), "");
    }
}
