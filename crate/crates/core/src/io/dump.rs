//! Binary activation dump.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic       4 bytes  "L2EA"
//! version     u32      1
//! n_neurons   u32
//! n_features  u32
//! names       n_features x (u32 byte length, UTF-8 bytes)
//! records     repeated (label u32, n_neurons x f32)
//! ```
//!
//! The record count is not stored; it follows from the file size.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::analysis::NeuronMajor;
use crate::error::{invalid, Error, Result};

pub const MAGIC: &[u8; 4] = b"L2EA";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DumpHeader {
    pub n_neurons: usize,
    pub feature_names: Vec<String>,
}

impl DumpHeader {
    pub fn new(n_neurons: usize, feature_names: Vec<String>) -> Result<Self> {
        if n_neurons == 0 || n_neurons > u32::MAX as usize {
            return Err(invalid(format!("n_neurons {n_neurons} out of range")));
        }
        if feature_names.is_empty() || feature_names.len() > u32::MAX as usize {
            return Err(invalid("a dump needs at least one feature"));
        }
        Ok(DumpHeader {
            n_neurons,
            feature_names,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn record_size(&self) -> usize {
        4 + 4 * self.n_neurons
    }

    pub fn encoded_len(&self) -> usize {
        16 + self.feature_names.iter().map(|n| 4 + n.len()).sum::<usize>()
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n_neurons as u32).to_le_bytes())?;
        w.write_all(&(self.n_features() as u32).to_le_bytes())?;
        for name in &self.feature_names {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("file too short for header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic \"{}\"", magic.escape_ascii())));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n_neurons = read_u32(r)? as usize;
        let n_features = read_u32(r)? as usize;
        if n_neurons == 0 || n_features == 0 {
            return Err(Error::Format("zero neurons or features".into()));
        }
        let mut names = Vec::with_capacity(n_features.min(1 << 16));
        for _ in 0..n_features {
            let len = read_u32(r)? as usize;
            let mut buf = Vec::new();
            r.take(len as u64).read_to_end(&mut buf)?;
            if buf.len() != len {
                return Err(Error::Format("truncated feature name table".into()));
            }
            names.push(String::from_utf8(buf).map_err(|_| Error::Format("feature name is not UTF-8".into()))?);
        }
        Ok(DumpHeader {
            n_neurons,
            feature_names: names,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub struct DumpWriter<W: Write> {
    w: W,
    header: DumpHeader,
    buf: Vec<u8>,
    records: u64,
}

impl DumpWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: DumpHeader) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> DumpWriter<W> {
    pub fn new(mut w: W, header: DumpHeader) -> Result<Self> {
        header.write_to(&mut w)?;
        let buf = Vec::with_capacity(header.record_size());
        Ok(DumpWriter {
            w,
            header,
            buf,
            records: 0,
        })
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    pub fn write_record(&mut self, label: usize, values: &[f32]) -> Result<()> {
        if label >= self.header.n_features() {
            return Err(Error::Validation(format!(
                "label {label} out of range for {} features",
                self.header.n_features()
            )));
        }
        if values.len() != self.header.n_neurons {
            return Err(invalid(format!(
                "record has {} values, dump has {} neurons",
                values.len(),
                self.header.n_neurons
            )));
        }
        self.buf.clear();
        self.buf.extend_from_slice(&(label as u32).to_le_bytes());
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.w.write_all(&self.buf)?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<W> {
        self.w.flush()?;
        Ok(self.w)
    }
}

/// Streaming reader: holds one record in memory at a time.
pub struct DumpReader<R: Read> {
    r: R,
    header: DumpHeader,
    buf: Vec<u8>,
    record_count: Option<u64>,
    next: u64,
    failed: bool,
}

/// Opens a dump file for streaming.
pub fn read_dump(path: impl AsRef<Path>) -> Result<DumpReader<BufReader<File>>> {
    DumpReader::open(path)
}

impl DumpReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        let size = file.metadata()?.len();
        let mut r = DumpReader::new(BufReader::with_capacity(1 << 16, file))?;
        let body = size.saturating_sub(r.header.encoded_len() as u64);
        r.record_count = Some(body / r.header.record_size() as u64);
        Ok(r)
    }
}

impl<R: Read> DumpReader<R> {
    pub fn new(mut r: R) -> Result<Self> {
        let header = DumpHeader::read_from(&mut r)?;
        let buf = vec![0u8; header.record_size()];
        Ok(DumpReader {
            r,
            header,
            buf,
            record_count: None,
            next: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    /// Number of complete records, known when reading from a file.
    pub fn record_count(&self) -> Option<u64> {
        self.record_count
    }

    /// Reads the next record into `values`; `Ok(None)` at a clean end.
    pub fn next_into(&mut self, values: &mut Vec<f32>) -> Result<Option<usize>> {
        if self.failed {
            return Ok(None);
        }
        let got = read_full(&mut self.r, &mut self.buf)?;
        if got == 0 {
            return Ok(None);
        }
        if got < self.buf.len() {
            self.failed = true;
            return Err(Error::Truncation {
                record: self.next,
                expected: self.buf.len(),
                found: got,
            });
        }
        let label = u32::from_le_bytes(self.buf[..4].try_into().unwrap()) as usize;
        if label >= self.header.n_features() {
            self.failed = true;
            return Err(Error::Validation(format!(
                "record {}: label {label} out of range for {} features",
                self.next,
                self.header.n_features()
            )));
        }
        values.clear();
        values.extend(
            self.buf[4..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
        );
        self.next += 1;
        Ok(Some(label))
    }
}

impl<R: Read> Iterator for DumpReader<R> {
    type Item = Result<(usize, Vec<f32>)>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut v = Vec::with_capacity(self.header.n_neurons);
        match self.next_into(&mut v) {
            Ok(Some(label)) => Some(Ok((label, v))),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// A dump fully loaded for retrospective analysis.
#[derive(Debug, Clone)]
pub struct LoadedDump {
    pub header: DumpHeader,
    pub labels: Vec<usize>,
    pub activations: NeuronMajor,
}

impl LoadedDump {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = read_dump(path)?;
        let n = r.header.n_neurons;
        let mut labels = Vec::new();
        let mut rows: Vec<f32> = Vec::new();
        let mut v = Vec::with_capacity(n);
        while let Some(label) = r.next_into(&mut v)? {
            labels.push(label);
            rows.extend_from_slice(&v);
        }
        let activations = NeuronMajor::from_rows(n, rows.chunks_exact(n))?;
        Ok(LoadedDump {
            header: r.header,
            labels,
            activations,
        })
    }
}
