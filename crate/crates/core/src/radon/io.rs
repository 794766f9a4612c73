use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridField, RadonError};

pub const GRID_FORMAT: &str = "radonlab-grid";

/// JSON header of a grid file. The file layout is: header length as a
/// little-endian u64, the header bytes, then the values as little-endian f64
/// in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub format: String,
    pub version: u32,
    pub dims: Vec<usize>,
    pub extents: Vec<[f64; 2]>,
    pub dtype: String,
    pub order: String,
}

impl GridHeader {
    pub fn for_field(f: &GridField) -> Self {
        GridHeader {
            format: GRID_FORMAT.into(),
            version: 1,
            dims: f.dims().to_vec(),
            extents: f.extents().iter().map(|&(a, b)| [a, b]).collect(),
            dtype: "float64".into(),
            order: "row-major".into(),
        }
    }
}

pub fn write_grid<W: Write>(mut out: W, f: &GridField) -> Result<(), RadonError> {
    let header = serde_json::to_vec(&GridHeader::for_field(f)).map_err(|e| RadonError::Format(e.to_string()))?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    for v in f.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_grid<R: Read>(mut input: R) -> Result<GridField, RadonError> {
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 24 {
        return Err(RadonError::Format(format!("header length {len} is implausible")));
    }
    let mut header = vec![0u8; len as usize];
    input.read_exact(&mut header)?;
    let header: GridHeader = serde_json::from_slice(&header).map_err(|e| RadonError::Format(e.to_string()))?;
    if header.format != GRID_FORMAT || header.version != 1 {
        return Err(RadonError::Format(format!("unsupported format {} version {}", header.format, header.version)));
    }
    if header.dtype != "float64" || header.order != "row-major" {
        return Err(RadonError::Format(format!("unsupported layout {} / {}", header.dtype, header.order)));
    }
    let count: usize = header.dims.iter().product();
    let mut bytes = vec![0u8; count * 8];
    input.read_exact(&mut bytes)?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(RadonError::Format("trailing bytes after grid values".into()));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let extents: Vec<(f64, f64)> = header.extents.iter().map(|e| (e[0], e[1])).collect();
    GridField::from_values(&header.dims, &extents, values)
}

pub fn write_grid_file(path: impl AsRef<Path>, f: &GridField) -> Result<(), RadonError> {
    write_grid(BufWriter::new(File::create(path)?), f)
}

pub fn read_grid_file(path: impl AsRef<Path>) -> Result<GridField, RadonError> {
    read_grid(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_roundtrip() {
        let f = GridField::from_fn(&[7, 5, 3], &[(-1.1, 0.3), (0.1, 1.0 / 3.0), (-2.0, 2.0)], |x| {
            (x[0] * 1e3).sin() / 7.0 + x[1].exp() * 1e-300 + x[2] * f64::EPSILON
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.grid");
        write_grid_file(&path, &f).unwrap();
        let g = read_grid_file(&path).unwrap();
        assert_eq!(f.dims(), g.dims());
        for (a, b) in f.extents().iter().zip(g.extents()) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_layout() {
        let f = GridField::zeros(&[2, 3], &[(0.0, 1.0), (0.0, 1.5)]).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &f).unwrap();
        let len = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&buf[8..8 + len]).unwrap();
        assert_eq!(header["format"], "radonlab-grid");
        assert_eq!(header["dtype"], "float64");
        assert_eq!(header["order"], "row-major");
        assert_eq!(buf.len(), 8 + len + 6 * 8);
    }

    #[test]
    fn truncated_or_padded_files_are_rejected() {
        let f = GridField::zeros(&[2, 2], &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &f).unwrap();
        assert!(read_grid(&buf[..buf.len() - 1]).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(read_grid(&longer[..]).is_err());
    }
}
