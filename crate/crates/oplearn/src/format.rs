//! Binary dataset files.
//!
//! Little-endian layout: magic `COPL`, `u32` version (bit 16 set for test
//! files), `u32` n_basis, `u32` n_x, `n_x × f64` grid, `u64` n_records,
//! `u64` seed, `u32` n_steps, `f64` t, `f64` T, then packed `f64` records.
//! Training records are `coeffs | targets`; test records are
//! `coeffs | truths | std_errors`.

use std::path::Path;

use oplearn_core::dataset::{SampleRecord, TestRecord};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"COPL";
pub const FORMAT_VERSION: u32 = 1;
pub const TEST_FLAG: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub kind: DatasetKind,
    pub n_basis: usize,
    pub x_grid: Vec<f64>,
    pub n_records: usize,
    pub seed: u64,
    pub n_steps: usize,
    pub t: f64,
    pub horizon: f64,
}

impl DatasetHeader {
    pub fn n_x(&self) -> usize {
        self.x_grid.len()
    }

    /// Doubles per record.
    pub fn record_len(&self) -> usize {
        match self.kind {
            DatasetKind::Train => self.n_basis + self.n_x(),
            DatasetKind::Test => self.n_basis + 2 * self.n_x(),
        }
    }

    pub fn byte_len(&self) -> usize {
        4 + 4 + 4 + 4 + 8 * self.n_x() + 8 + 8 + 4 + 8 + 8
    }
}

/// A materialized dataset; `values` holds targets or truths, row-major `n × n_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub coeffs: Vec<f64>,
    pub values: Vec<f64>,
    /// Present for test files only.
    pub std_errors: Option<Vec<f64>>,
}

impl Dataset {
    pub fn from_training(header: DatasetHeader, records: &[SampleRecord]) -> Self {
        Self {
            coeffs: records.iter().flat_map(|r| r.coeffs.iter().copied()).collect(),
            values: records.iter().flat_map(|r| r.targets.iter().copied()).collect(),
            std_errors: None,
            header,
        }
    }

    pub fn from_test(header: DatasetHeader, records: &[TestRecord]) -> Self {
        Self {
            coeffs: records.iter().flat_map(|r| r.coeffs.iter().copied()).collect(),
            values: records.iter().flat_map(|r| r.truths.iter().copied()).collect(),
            std_errors: Some(records.iter().flat_map(|r| r.std_errors.iter().copied()).collect()),
            header,
        }
    }

    pub fn len(&self) -> usize {
        self.header.n_records
    }

    pub fn is_empty(&self) -> bool {
        self.header.n_records == 0
    }

    pub fn coeffs(&self, i: usize) -> &[f64] {
        let n = self.header.n_basis;
        &self.coeffs[i * n..(i + 1) * n]
    }

    pub fn values(&self, i: usize) -> &[f64] {
        let x = self.header.n_x();
        &self.values[i * x..(i + 1) * x]
    }

    /// Column `x_index` of `values`.
    pub fn value_column(&self, x_index: usize) -> Vec<f64> {
        let x = self.header.n_x();
        self.values.iter().skip(x_index).step_by(x).copied().collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(h.byte_len() + 8 * h.n_records * h.record_len());
        out.extend_from_slice(MAGIC);
        let version = match h.kind {
            DatasetKind::Train => FORMAT_VERSION,
            DatasetKind::Test => FORMAT_VERSION | TEST_FLAG,
        };
        out.extend_from_slice(&version.to_le_bytes());
        out.extend_from_slice(&(h.n_basis as u32).to_le_bytes());
        out.extend_from_slice(&(h.n_x() as u32).to_le_bytes());
        for x in &h.x_grid {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&(h.n_records as u64).to_le_bytes());
        out.extend_from_slice(&h.seed.to_le_bytes());
        out.extend_from_slice(&(h.n_steps as u32).to_le_bytes());
        out.extend_from_slice(&h.t.to_le_bytes());
        out.extend_from_slice(&h.horizon.to_le_bytes());
        let (nb, nx) = (h.n_basis, h.n_x());
        for i in 0..h.n_records {
            let mut push = |v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
            push(&self.coeffs[i * nb..(i + 1) * nb]);
            push(&self.values[i * nx..(i + 1) * nx]);
            if let Some(se) = &self.std_errors {
                push(&se[i * nx..(i + 1) * nx]);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(r.error(0, "bad magic"));
        }
        let version = r.u32()?;
        let kind = match version {
            v if v == FORMAT_VERSION => DatasetKind::Train,
            v if v == FORMAT_VERSION | TEST_FLAG => DatasetKind::Test,
            v => return Err(r.error(4, &format!("unsupported version {v:#x}"))),
        };
        let n_basis = r.u32()? as usize;
        let n_x_at = r.pos;
        let n_x = r.u32()? as usize;
        if n_basis == 0 {
            return Err(r.error(8, "n_basis is zero"));
        }
        if n_x == 0 || n_x > bytes.len() / 8 {
            return Err(r.error(n_x_at, &format!("implausible grid size {n_x}")));
        }
        let grid_at = r.pos;
        let x_grid = (0..n_x).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if let Err(e) = oplearn_core::dataset::validate_x_grid(&x_grid) {
            return Err(r.error(grid_at, &e.to_string()));
        }
        let n_records_at = r.pos;
        let n_records = r.u64()? as usize;
        let seed = r.u64()?;
        let n_steps = r.u32()? as usize;
        let t = r.f64()?;
        let horizon = r.f64()?;
        let header = DatasetHeader {
            kind,
            n_basis,
            x_grid,
            n_records,
            seed,
            n_steps,
            t,
            horizon,
        };
        if n_records == 0 {
            return Err(r.error(n_records_at, "no records"));
        }
        let expected = (header.record_len() as u128) * (n_records as u128) * 8;
        let remaining = (bytes.len() - r.pos) as u128;
        if remaining != expected {
            return Err(r.error(
                r.pos,
                &format!("expected {expected} bytes of records, found {remaining}"),
            ));
        }
        let mut coeffs = Vec::with_capacity(n_records * n_basis);
        let mut values = Vec::with_capacity(n_records * n_x);
        let mut std_errors = (kind == DatasetKind::Test).then(|| Vec::with_capacity(n_records * n_x));
        for _ in 0..n_records {
            for _ in 0..n_basis {
                coeffs.push(r.finite()?);
            }
            for _ in 0..n_x {
                values.push(r.finite()?);
            }
            if let Some(se) = std_errors.as_mut() {
                for _ in 0..n_x {
                    let at = r.pos;
                    let v = r.finite()?;
                    if !(v > 0.0) {
                        return Err(r.error(at, "standard error must be positive"));
                    }
                    se.push(v);
                }
            }
        }
        Ok(Self {
            header,
            coeffs,
            values,
            std_errors,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(HarnessError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(HarnessError::io(path))?;
        Self::decode(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn error(&self, offset: usize, msg: &str) -> HarnessError {
        HarnessError::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            msg: msg.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(self.pos, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finite(&mut self) -> Result<f64> {
        let at = self.pos;
        let v = self.f64()?;
        if !v.is_finite() {
            return Err(self.error(at, "non-finite value"));
        }
        Ok(v)
    }
}
