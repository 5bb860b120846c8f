//! Binary block container.
//!
//! A file is a sequence of blocks, each starting with a four-byte magic:
//!
//! | magic  | layout after the magic                                      |
//! |--------|-------------------------------------------------------------|
//! | `EMB1` | `u32` rows, `u32` cols, rows·cols `f32`, all little-endian   |
//! | `EMD1` | `u32` rows, `u32` cols, rows·cols `f64`, all little-endian   |
//! | `JSN1` | `u32` byte length, then that many bytes of UTF-8 JSON        |
//!
//! Matrices are row-major. An embeddings file is exactly one `EMB1` block;
//! eraser and probe artifacts chain `EMD1` blocks and a trailing `JSN1`
//! metadata block.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MAGIC_F32: &[u8; 4] = b"EMB1";
pub const MAGIC_F64: &[u8; 4] = b"EMD1";
pub const MAGIC_JSON: &[u8; 4] = b"JSN1";

const HEADER_LEN: usize = 12;

/// Appends blocks to an in-memory buffer.
#[derive(Default)]
pub struct BlockWriter {
    buf: Vec<u8>,
}

impl BlockWriter {
    pub fn new() -> Self {
        Self::default()
    }

    fn header(&mut self, magic: &[u8; 4], m: &Matrix) -> Result<()> {
        let rows = u32::try_from(m.rows())
            .map_err(|_| Error::InvalidInput(format!("{} rows exceed u32", m.rows())))?;
        let cols = u32::try_from(m.cols())
            .map_err(|_| Error::InvalidInput(format!("{} columns exceed u32", m.cols())))?;
        self.buf.extend_from_slice(magic);
        self.buf.extend_from_slice(&rows.to_le_bytes());
        self.buf.extend_from_slice(&cols.to_le_bytes());
        Ok(())
    }

    /// Stores at 32-bit precision. Values outside the `f32` range are rejected.
    pub fn f32_matrix(&mut self, m: &Matrix) -> Result<&mut Self> {
        self.header(MAGIC_F32, m)?;
        for (i, &v) in m.as_slice().iter().enumerate() {
            let f = v as f32;
            if !f.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "value {v} at flat index {i} does not fit in f32"
                )));
            }
            self.buf.extend_from_slice(&f.to_le_bytes());
        }
        Ok(self)
    }

    pub fn f64_matrix(&mut self, m: &Matrix) -> Result<&mut Self> {
        self.header(MAGIC_F64, m)?;
        for v in m.as_slice() {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        Ok(self)
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> Result<&mut Self> {
        let bytes = serde_json::to_vec(value)?;
        let len = u32::try_from(bytes.len())
            .map_err(|_| Error::InvalidInput("metadata block exceeds 4 GiB".into()))?;
        self.buf.extend_from_slice(MAGIC_JSON);
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(&bytes);
        Ok(self)
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(self, path: &Path) -> Result<()> {
        fs::write(path, self.buf).map_err(|e| Error::io(path, e))
    }
}

/// Sequential reader over container bytes. Errors carry the byte offset.
pub struct BlockReader<'a> {
    path: PathBuf,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BlockReader<'a> {
    pub fn new(path: impl Into<PathBuf>, bytes: &'a [u8]) -> Self {
        BlockReader {
            path: path.into(),
            bytes,
            pos: 0,
        }
    }

    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.fail(
                self.pos,
                format!("{} trailing bytes after last block", self.bytes.len() - self.pos),
            ))
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(self.fail(
                self.pos,
                format!("truncated {what}: need {n} bytes, {available} available"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self) -> Result<[u8; 4]> {
        let start = self.pos;
        let b = self.take(4, "magic")?;
        let magic = [b[0], b[1], b[2], b[3]];
        if &magic != MAGIC_F32 && &magic != MAGIC_F64 && &magic != MAGIC_JSON {
            return Err(self.fail(
                start,
                format!("bad magic {:?}", String::from_utf8_lossy(&magic)),
            ));
        }
        Ok(magic)
    }

    /// Reads an `EMB1` or `EMD1` block.
    pub fn matrix(&mut self) -> Result<Matrix> {
        let start = self.pos;
        let magic = self.magic()?;
        let width = match &magic {
            m if m == MAGIC_F32 => 4,
            m if m == MAGIC_F64 => 8,
            _ => return Err(self.fail(start, "expected a matrix block, found metadata")),
        };
        let rows = self.u32("header")? as usize;
        let cols = self.u32("header")? as usize;
        let payload_start = self.pos;
        let need = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| self.fail(start + 4, "header dimensions overflow"))?;
        let payload = self.take(need, &format!("payload for {rows}x{cols} matrix"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for (i, chunk) in payload.chunks_exact(width).enumerate() {
            let v = if width == 4 {
                f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64
            } else {
                let mut b = [0u8; 8];
                b.copy_from_slice(chunk);
                f64::from_le_bytes(b)
            };
            if !v.is_finite() {
                return Err(self.fail(
                    payload_start + i * width,
                    format!("non-finite value at row {}, column {}", i / cols, i % cols),
                ));
            }
            data.push(v);
        }
        debug_assert!(start + HEADER_LEN + need == self.pos);
        Matrix::new(rows, cols, data)
    }

    pub fn json<T: DeserializeOwned>(&mut self) -> Result<T> {
        let start = self.pos;
        let magic = self.magic()?;
        if &magic != MAGIC_JSON {
            return Err(self.fail(start, "expected a metadata block, found a matrix"));
        }
        let len = self.u32("metadata length")? as usize;
        let body_start = self.pos;
        let body = self.take(len, "metadata")?;
        serde_json::from_slice(body).map_err(|e| self.fail(body_start, format!("metadata: {e}")))
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Encodes a matrix as a single `EMB1` block.
pub fn encode_embeddings(x: &Matrix) -> Result<Vec<u8>> {
    let mut w = BlockWriter::new();
    w.f32_matrix(x)?;
    Ok(w.into_bytes())
}

/// Decodes a single-block `EMB1` buffer. `path` only labels error messages.
pub fn decode_embeddings(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let mut r = BlockReader::new(path, bytes);
    if bytes.len() >= 4 && &bytes[..4] != MAGIC_F32 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4])),
        });
    }
    let m = r.matrix()?;
    r.expect_end()?;
    Ok(m)
}

pub fn save_embeddings(path: &Path, x: &Matrix) -> Result<()> {
    let bytes = encode_embeddings(x)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<Matrix> {
    let bytes = read_file(path)?;
    decode_embeddings(path, &bytes)
}
