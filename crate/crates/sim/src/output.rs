//! CSV output.
//!
//! The first line is a comment `# rofmimo experiment=<kind> config_hash=<hex>
//! seed=<n> trials=<n>`; the second is the header, whose column names are
//! the fields of [`SweepRecord`]. Empty fields are absent values. Rows are
//! flushed one sweep cell at a time, so an interrupted run leaves every
//! completed cell on disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{io_err, SimResult};
use crate::experiments::SweepRecord;

pub struct CsvOut<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvOut<W> {
    pub fn new(mut inner: W, metadata: &str) -> SimResult<Self> {
        writeln!(inner, "# {metadata}").map_err(io_err("<csv>"))?;
        Ok(Self {
            writer: csv::Writer::from_writer(inner),
        })
    }

    pub fn write(&mut self, rows: &[SweepRecord]) -> SimResult<()> {
        for r in rows {
            self.writer.serialize(r)?;
        }
        self.writer.flush().map_err(io_err("<csv>"))?;
        Ok(())
    }

    pub fn finish(self) -> SimResult<W> {
        self.writer.into_inner().map_err(|e| crate::error::SimError::Io {
            path: "<csv>".into(),
            source: std::io::Error::other(e.to_string()),
        })
    }
}

pub fn create(path: &Path, metadata: &str) -> SimResult<CsvOut<BufWriter<File>>> {
    let f = File::create(path).map_err(io_err(path))?;
    CsvOut::new(BufWriter::new(f), metadata)
}

/// Renders rows to a string, header included.
pub fn to_string(rows: &[SweepRecord], metadata: &str) -> SimResult<String> {
    let mut out = CsvOut::new(Vec::new(), metadata)?;
    out.write(rows)?;
    Ok(String::from_utf8(out.finish()?).expect("csv output is utf-8"))
}
