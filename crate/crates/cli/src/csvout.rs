//! CSV emission: a header row naming every column, doubles at 17
//! significant digits, `\n` record ends, quoting only where required.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::config::CliError;

pub struct Sink {
    w: csv::Writer<Box<dyn Write>>,
}

impl Sink {
    pub fn open(out: Option<&Path>) -> Result<Self, CliError> {
        let raw: Box<dyn Write> = match out {
            Some(path) => Box::new(File::create(path).map_err(|e| {
                CliError::usage(format!("cannot create {}: {e}", path.display()))
            })?),
            None => Box::new(std::io::stdout()),
        };
        let w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(raw);
        Ok(Sink { w })
    }

    pub fn row<I, S>(&mut self, record: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w
            .write_record(record)
            .map_err(|e| CliError::usage(format!("csv write failed: {e}")))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w
            .flush()
            .map_err(|e| CliError::usage(format!("csv flush failed: {e}")))
    }
}

/// 17 significant digits round-trip every finite double exactly.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn truth(b: bool) -> String {
    b.to_string()
}
