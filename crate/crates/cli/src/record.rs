use std::io::Write;

use serde::Serialize;

use crate::{CliError, Format};

pub const CSV_HEADER: &str = "t,observable,site,value_re,value_im,lambda_abs,bond,trunc_error,wall_ms,method,config_hash";

/// One output row. `lambda_abs` is NaN for methods without a transfer
/// matrix (written as `NaN` in CSV and `null` in JSON).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub t: f64,
    pub observable: String,
    pub site: i64,
    pub value_re: f64,
    pub value_im: f64,
    pub lambda_abs: f64,
    pub bond: usize,
    pub trunc_error: f64,
    pub wall_ms: f64,
    pub method: String,
    pub config_hash: String,
}

#[allow(clippy::large_enum_variant)]
pub enum RecordSink<W: Write> {
    Csv(csv::Writer<W>),
    Jsonl(W),
}

fn out_err(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

impl<W: Write> RecordSink<W> {
    /// A sink that has already written the CSV header, so an empty run
    /// still produces a well-formed table.
    pub fn new(format: Format, w: W) -> Result<Self, CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(w);
                w.write_record(CSV_HEADER.split(',')).map_err(out_err)?;
                w.flush()?;
                Ok(RecordSink::Csv(w))
            }
            Format::Jsonl => Ok(RecordSink::Jsonl(w)),
        }
    }

    pub fn write(&mut self, r: &ResultRecord) -> Result<(), CliError> {
        match self {
            RecordSink::Csv(w) => {
                w.serialize(r).map_err(out_err)?;
                w.flush()?;
            }
            RecordSink::Jsonl(w) => {
                serde_json::to_writer(&mut *w, r).map_err(out_err)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
        }
        Ok(())
    }
}
