//! Index persistence: a versioned binary file with a trailing checksum.
//!
//! Layout (all integers little-endian):
//! magic `TBRETIVF` · version u32 · dim u32 · nlist u32 · centroids
//! (nlist × dim × f32) · per list: count u64, then entries (id length u32,
//! id bytes, dim × f32) · SHA-256 of everything before it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::embed::DenseVector;

use super::{DenseIndex, IndexError};

const MAGIC: &[u8; 8] = b"TBRETIVF";
const VERSION: u32 = 1;

pub fn save_index(index: &DenseIndex, path: &Path) -> Result<(), IndexError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(index.dim as u32).to_le_bytes());
    bytes.extend_from_slice(&(index.nlist as u32).to_le_bytes());
    for centroid in &index.centroids {
        for &x in centroid.as_slice() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    for posting in &index.postings {
        bytes.extend_from_slice(&(posting.len() as u64).to_le_bytes());
        for (id, vector) in posting {
            bytes.extend_from_slice(&(id.len() as u32).to_le_bytes());
            bytes.extend_from_slice(id.as_bytes());
            for &x in vector.as_slice() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    fs::write(path, bytes)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        if self.pos + n > self.bytes.len() {
            return Err(IndexError::InvalidFile("truncated".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn vector(&mut self, dim: usize) -> Result<DenseVector, IndexError> {
        let raw = self.take(dim * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(DenseVector::new(values))
    }
}

pub fn load_index(path: &Path) -> Result<DenseIndex, IndexError> {
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() + 12 + 32 {
        return Err(IndexError::InvalidFile("file too short".into()));
    }
    let (body, stored_digest) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_digest {
        return Err(IndexError::InvalidFile("checksum mismatch".into()));
    }

    let mut reader = Reader {
        bytes: body,
        pos: 0,
    };
    if reader.take(MAGIC.len())? != MAGIC {
        return Err(IndexError::InvalidFile("bad magic".into()));
    }
    let version = reader.u32()?;
    if version != VERSION {
        return Err(IndexError::InvalidFile(format!(
            "unsupported version {version}"
        )));
    }
    let dim = reader.u32()? as usize;
    let nlist = reader.u32()? as usize;
    if dim == 0 || nlist == 0 {
        return Err(IndexError::InvalidFile("zero dim or nlist".into()));
    }

    let mut centroids = Vec::with_capacity(nlist);
    for _ in 0..nlist {
        centroids.push(reader.vector(dim)?);
    }
    let mut postings = Vec::with_capacity(nlist);
    for _ in 0..nlist {
        let count = reader.u64()? as usize;
        let mut posting = Vec::with_capacity(count);
        for _ in 0..count {
            let id_len = reader.u32()? as usize;
            let id = String::from_utf8(reader.take(id_len)?.to_vec())
                .map_err(|_| IndexError::InvalidFile("non-utf8 id".into()))?;
            posting.push((id, reader.vector(dim)?));
        }
        postings.push(posting);
    }
    if reader.pos != body.len() {
        return Err(IndexError::InvalidFile("trailing bytes".into()));
    }
    Ok(DenseIndex {
        dim,
        nlist,
        centroids,
        postings,
    })
}
