use super::{Atom, EmpiricalYoungMeasure, Subspace};
use crate::error::{Error, Result};
use crate::fields::Grid;

/// Atom table: a header line `eym,v1,dim,<d>,n,<n>,subspace,<full|f-eta>`,
/// then one `cell,c_1,...,c_m,weight` row per atom, cells in order.
pub fn encode_eym_csv(nu: &EmpiricalYoungMeasure) -> String {
    let mut out = format!("eym,v1,dim,{},n,{},subspace,{}\n", nu.grid.dim(), nu.grid.n(), nu.subspace.as_str());
    for (c, cell) in nu.atoms.iter().enumerate() {
        for a in cell {
            out.push_str(&c.to_string());
            for x in &a.point {
                out.push(',');
                out.push_str(&format!("{x:e}"));
            }
            out.push_str(&format!(",{:e}\n", a.weight));
        }
    }
    out
}

pub fn decode_eym_csv(text: &str) -> Result<EmpiricalYoungMeasure> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty atom table".into()))?;
    let h: Vec<&str> = header.trim().split(',').collect();
    if h.len() != 8 || h[0] != "eym" || h[2] != "dim" || h[4] != "n" || h[6] != "subspace" {
        return Err(Error::Format("bad atom table header".into()));
    }
    if h[1] != "v1" {
        let found = h[1].strip_prefix('v').and_then(|v| v.parse().ok()).unwrap_or(0);
        return Err(Error::FormatVersion { found, expected: 1 });
    }
    let d: usize = h[3].parse().map_err(|_| Error::Format("bad dim".into()))?;
    let n: usize = h[5].parse().map_err(|_| Error::Format("bad n".into()))?;
    let subspace = Subspace::parse(h[7]).ok_or_else(|| Error::Format("bad subspace".into()))?;
    let grid = Grid::new(d, n)?;
    let m = subspace.point_dim(d);
    let mut atoms: Vec<Vec<Atom>> = vec![Vec::new(); grid.cells()];
    let mut prev = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != m + 2 {
            return Err(Error::Format(format!("row {} has {} fields, expected {}", i + 2, parts.len(), m + 2)));
        }
        let c: usize = parts[0].parse().map_err(|_| Error::Format(format!("bad cell index in row {}", i + 2)))?;
        if c >= grid.cells() || c < prev {
            return Err(Error::Format(format!("cell index {c} out of order or range")));
        }
        prev = c;
        let vals: Vec<f64> = parts[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number in row {}", i + 2))))
            .collect::<Result<_>>()?;
        atoms[c].push(Atom { point: vals[..m].to_vec(), weight: vals[m] });
    }
    let nu = EmpiricalYoungMeasure { grid, subspace, atoms };
    nu.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(nu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let g = Grid::new(1, 4).unwrap();
        let nu = EmpiricalYoungMeasure {
            grid: g,
            subspace: Subspace::FEta,
            atoms: vec![
                vec![Atom { point: vec![0.1, -2.0], weight: 0.25 }, Atom { point: vec![1.0 / 3.0, 0.0], weight: 0.75 }],
                vec![Atom { point: vec![1e-300, 5.0], weight: 1.0 }],
                vec![Atom { point: vec![0.0, 0.0], weight: 1.0 }],
                vec![Atom { point: vec![-7.5, 1e10], weight: 1.0 }],
            ],
        };
        assert_eq!(decode_eym_csv(&encode_eym_csv(&nu)).unwrap(), nu);
    }

    #[test]
    fn rejects_bad_weights() {
        let ok = "eym,v1,dim,1,n,4,subspace,f-eta\n0,1,2,1\n1,1,2,1\n2,1,2,1\n3,1,2,1\n";
        assert!(decode_eym_csv(ok).is_ok());
        assert!(matches!(decode_eym_csv(&ok.replacen("0,1,2,1", "0,1,2,0.5", 1)), Err(Error::Format(_))));
        assert!(matches!(decode_eym_csv(&ok.replace("v1", "v2")), Err(Error::FormatVersion { found: 2, expected: 1 })));
    }
}
