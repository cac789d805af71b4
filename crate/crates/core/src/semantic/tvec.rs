//! TVEC vector file: `"TVEC"`, version byte `0x01`, then little-endian
//! `u32 dim`, `u64 count` and `count` records of
//! `[u32 id_byte_len][id UTF-8][dim × f32]`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use tracing::warn;

use super::VectorIndex;
use crate::{Error, Result};

pub const TVEC_MAGIC: &[u8; 4] = b"TVEC";
pub const TVEC_VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq)]
pub struct TvecFile {
    pub dim: usize,
    pub rows: Vec<(String, Vec<f32>)>,
}

pub fn write_tvec<W: Write>(mut out: W, dim: usize, rows: &[(String, Vec<f32>)]) -> std::io::Result<()> {
    out.write_all(TVEC_MAGIC)?;
    out.write_all(&[TVEC_VERSION])?;
    out.write_all(&(dim as u32).to_le_bytes())?;
    out.write_all(&(rows.len() as u64).to_le_bytes())?;
    for (id, values) in rows {
        assert_eq!(values.len(), dim, "row {id:?} has wrong dim");
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Format("truncated TVEC file".into()),
        _ => Error::io("<tvec>", e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Parses a TVEC stream. Duplicate ids are a data error.
pub fn read_tvec<R: Read>(mut r: R) -> Result<TvecFile> {
    let mut header = [0u8; 5];
    read_exact(&mut r, &mut header)?;
    if &header[..4] != TVEC_MAGIC {
        return Err(Error::Format("bad TVEC magic".into()));
    }
    if header[4] != TVEC_VERSION {
        return Err(Error::Format(format!("unsupported TVEC version {}", header[4])));
    }
    let dim = read_u32(&mut r)? as usize;
    if dim == 0 {
        return Err(Error::Format("TVEC dim is 0".into()));
    }
    let mut count = [0u8; 8];
    read_exact(&mut r, &mut count)?;
    let count = u64::from_le_bytes(count);

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    let mut vbuf = vec![0u8; dim * 4];
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut idb = vec![0u8; len];
        read_exact(&mut r, &mut idb)?;
        let id = String::from_utf8(idb).map_err(|_| Error::Format("TVEC id is not UTF-8".into()))?;
        read_exact(&mut r, &mut vbuf)?;
        let values = vbuf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if !seen.insert(id.clone()) {
            return Err(Error::Data(format!("duplicate TVEC id {id:?}")));
        }
        rows.push((id, values));
    }
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Format("trailing bytes after TVEC records".into())),
        Err(e) => return Err(Error::io("<tvec>", e)),
    }
    Ok(TvecFile { dim, rows })
}

/// Loads a TVEC file into an index. Rows off unit norm by more than 1e-3
/// are renormalized and reported in the returned warnings.
pub fn load_vectors(path: &Path) -> Result<(VectorIndex, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = read_tvec(BufReader::new(file))?;
    let (index, fixed) = VectorIndex::from_rows(parsed.dim, parsed.rows)?;
    let warnings: Vec<String> = fixed
        .iter()
        .map(|id| format!("{}: vector {id:?} was not unit-norm; renormalized", path.display()))
        .collect();
    for w in &warnings {
        warn!("{w}");
    }
    Ok((index, warnings))
}

/// Writes a TVEC file at `path`.
pub fn save_vectors(path: &Path, dim: usize, rows: &[(String, Vec<f32>)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_tvec(BufWriter::new(file), dim, rows).map_err(|e| Error::io(path, e))
}
