//! GridField serialization.
//!
//! Binary layout: a 24-byte header of three little-endian `u64` words
//! (`dim`, `n`, rank code 0/1/2 for scalar/vector/matrix) followed by the
//! cell-major values as little-endian `f64`.
//!
//! CSV layout: one row per cell, the cell multi-index columns `i0..` first,
//! then component columns `c0..`.

use std::fmt::Write as _;
use std::path::Path;

use super::{Grid, GridField, Rank};
use crate::error::{Error, Result};

pub const HEADER_BYTES: usize = 24;

pub fn encode_binary(u: &GridField) -> Vec<u8> {
    let g = u.grid();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * u.data().len());
    out.extend_from_slice(&(g.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(g.n() as u64).to_le_bytes());
    out.extend_from_slice(&u.rank().code().to_le_bytes());
    for v in u.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn word(bytes: &[u8], k: usize) -> u64 {
    let mut w = [0u8; 8];
    w.copy_from_slice(&bytes[8 * k..8 * k + 8]);
    u64::from_le_bytes(w)
}

pub fn decode_binary(bytes: &[u8]) -> Result<GridField> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format(format!("truncated header: {} bytes", bytes.len())));
    }
    let dim = word(bytes, 0);
    let n = word(bytes, 1);
    let code = word(bytes, 2);
    let dim = usize::try_from(dim).map_err(|_| Error::InvalidDimension(usize::MAX))?;
    let n = usize::try_from(n).map_err(|_| Error::InvalidResolution(usize::MAX))?;
    let grid = Grid::new(dim, n)?;
    let rank = Rank::from_code(code).ok_or_else(|| Error::Format(format!("unknown rank code {code}")))?;
    let count = grid.cells() * rank.components(dim);
    let body = &bytes[HEADER_BYTES..];
    if body.len() != 8 * count {
        return Err(Error::Format(format!("expected {} payload bytes, found {}", 8 * count, body.len())));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| {
            let mut w = [0u8; 8];
            w.copy_from_slice(c);
            f64::from_le_bytes(w)
        })
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decoded grid field".into()));
    }
    GridField::from_data(grid, rank, data)
}

pub fn write_binary(u: &GridField, path: &Path) -> Result<()> {
    std::fs::write(path, encode_binary(u))?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<GridField> {
    decode_binary(&std::fs::read(path)?)
}

pub fn encode_csv(u: &GridField) -> String {
    let g = u.grid();
    let d = g.dim();
    let mut s = String::new();
    let mut cols: Vec<String> = (0..d).map(|a| format!("i{a}")).collect();
    cols.extend((0..u.ncomp()).map(|k| format!("c{k}")));
    s.push_str(&cols.join(","));
    s.push('\n');
    for c in 0..g.cells() {
        let m = g.multi_index(c);
        for a in 0..d {
            let _ = write!(s, "{},", m[a]);
        }
        let vals: Vec<String> = u.cell(c).iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&vals.join(","));
        s.push('\n');
    }
    s
}

/// Parse the CSV layout back. The rank is inferred from the component count;
/// a single component is read as a scalar field.
pub fn decode_csv(text: &str) -> Result<GridField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty csv".into()))?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let d = cols.iter().take_while(|c| c.starts_with('i')).count();
    let nc = cols.len() - d;
    for (a, c) in cols.iter().take(d).enumerate() {
        if *c != format!("i{a}") {
            return Err(Error::Format(format!("unexpected index column {c}")));
        }
    }
    for (k, c) in cols.iter().skip(d).enumerate() {
        if *c != format!("c{k}") {
            return Err(Error::Format(format!("unexpected component column {c}")));
        }
    }
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    let rank = if nc == 1 {
        Rank::Scalar
    } else if nc == d {
        Rank::Vector
    } else if nc == d * d {
        Rank::Matrix
    } else {
        return Err(Error::Format(format!("{nc} components do not match dimension {d}")));
    };
    let mut rows: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if fields.len() != d + nc {
            return Err(Error::Format(format!("row {} has {} columns", ln + 2, fields.len())));
        }
        let idx = fields[..d]
            .iter()
            .map(|f| f.parse::<usize>().map_err(|_| Error::Format(format!("bad index {f}"))))
            .collect::<Result<Vec<_>>>()?;
        let vals = fields[d..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Format(format!("bad value {f}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((idx, vals));
        if rows.len() > 4096 * 4096 {
            return Err(Error::Format("too many rows".into()));
        }
    }
    let count = rows.len();
    let n = (count as f64).powf(1.0 / d as f64).round() as usize;
    if n.checked_pow(d as u32) != Some(count) {
        return Err(Error::Format(format!("{count} rows do not form a {d}-dimensional grid")));
    }
    let grid = Grid::new(d, n)?;
    let mut out = GridField::zeros(grid, rank);
    let mut seen = vec![false; grid.cells()];
    for (idx, vals) in rows {
        if idx.iter().any(|&i| i >= n) {
            return Err(Error::Format("cell index out of range".into()));
        }
        let c = grid.linear_index(&idx);
        if seen[c] {
            return Err(Error::Format("duplicate cell".into()));
        }
        seen[c] = true;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("csv value".into()));
        }
        out.cell_mut(c).copy_from_slice(&vals);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    #[test]
    fn binary_header_is_24_bytes() {
        let g = make_grid(2, 4).unwrap();
        let u = GridField::zeros(g, Rank::Matrix);
        let b = encode_binary(&u);
        assert_eq!(b.len(), HEADER_BYTES + 8 * 16 * 4);
        assert_eq!(&b[0..8], &2u64.to_le_bytes());
        assert_eq!(&b[8..16], &4u64.to_le_bytes());
        assert_eq!(&b[16..24], &2u64.to_le_bytes());
    }

    #[test]
    fn decode_rejects_bad_input() {
        assert!(decode_binary(&[0u8; 10]).is_err());
        let g = make_grid(1, 4).unwrap();
        let mut b = encode_binary(&GridField::zeros(g, Rank::Scalar));
        b.pop();
        assert!(decode_binary(&b).is_err());
        let mut b = encode_binary(&GridField::zeros(g, Rank::Scalar));
        b[16] = 9;
        assert!(decode_binary(&b).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let g = make_grid(2, 4).unwrap();
        let u = GridField::from_fn(g, Rank::Vector, |x, o| {
            o[0] = x[0] * 3.0;
            o[1] = -x[1] / 7.0;
        });
        let back = decode_csv(&encode_csv(&u)).unwrap();
        assert_eq!(back, u);
    }
}
