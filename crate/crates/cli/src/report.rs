//! CSV output with a leading `#` line recording the run configuration.

use std::fs::File;
use std::io::{self, Write};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub struct CsvSink {
    inner: csv::Writer<Box<dyn Write>>,
}

impl CsvSink {
    /// Writes to `cfg.output`, or stdout when unset.
    pub fn open(cfg: &RunConfig, command: &str, header: &[&str]) -> CliResult<Self> {
        let mut out: Box<dyn Write> = match &cfg.output {
            Some(path) => Box::new(File::create(path).map_err(|e| CliError::io(path, e))?),
            None => Box::new(io::stdout()),
        };
        let path = cfg.output.clone().unwrap_or_else(|| "<stdout>".into());
        writeln!(out, "# relflex {command} {}", cfg.to_json_line()).map_err(|e| CliError::io(&path, e))?;
        let mut inner = csv::WriterBuilder::new().flexible(true).from_writer(out);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.inner.write_record(fields)?)
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| CliError::io("<csv>", e))
    }
}
