//! CSV reports. Every report starts with a header row and ends each row with
//! a `config_hash` column tying it to the parameters that produced it.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// First 16 hex digits of the SHA-256 of the value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().fold(String::with_capacity(16), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub struct CsvReport<W: Write> {
    inner: csv::Writer<W>,
    hash: String,
}

impl<W: Write> CsvReport<W> {
    pub fn new(w: W, header: &[&str], hash: impl Into<String>) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        inner.write_record(header.iter().copied().chain(std::iter::once("config_hash")))?;
        Ok(CsvReport {
            inner,
            hash: hash.into(),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut rec = csv::ByteRecord::new();
        for f in fields {
            rec.push_field(f.as_ref());
        }
        rec.push_field(self.hash.as_bytes());
        self.inner.write_byte_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| crate::Error::Io(std::io::Error::other(e.to_string())))
    }
}
