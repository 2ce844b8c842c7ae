//! Periodic cell-centered grids on the unit torus and the fields that live on
//! them, together with spectral calculus, the auxiliary function `V_i` and
//! midpoint quadrature.
//!
//! Cells are indexed lexicographically with the first axis fastest. Cell
//! centers sit at `(i + 1/2) / n`. Field values are stored cell-major: the
//! components of one cell are contiguous, matrix components row-major.

mod io;
mod spectral;
mod test_field;

pub use io::{decode_binary, decode_csv, encode_binary, encode_csv, read_binary, write_binary, HEADER_BYTES};
pub use spectral::{
    curl_residual, divergence, helmholtz_curl_free, recover_potential, spectral_derivative,
    spectral_gradient,
};
pub use test_field::{divergence_with_mode, gradient_with_mode, zero_trace_mask, BoundaryMode, TestField};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
}

/// Build a grid, validating `dim ∈ {1,2,3}` and `n` a power of two in `[4, 4096]`.
pub fn make_grid(dim: usize, n: usize) -> Result<Grid> {
    Grid::new(dim, n)
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Grid> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if !(4..=4096).contains(&n) || !n.is_power_of_two() {
            return Err(Error::InvalidResolution(n));
        }
        Ok(Grid { dim, n })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    /// Multi-index of a linear cell index. Unused axes are zero.
    #[inline]
    pub fn multi_index(&self, mut c: usize) -> [usize; 3] {
        let mut m = [0usize; 3];
        for slot in m.iter_mut().take(self.dim) {
            *slot = c % self.n;
            c /= self.n;
        }
        m
    }

    #[inline]
    pub fn linear_index(&self, m: &[usize]) -> usize {
        let mut c = 0;
        for a in (0..self.dim).rev() {
            c = c * self.n + m[a];
        }
        c
    }

    /// Neighbor of cell `c` shifted by `s` along `axis`, periodically wrapped.
    #[inline]
    pub fn shift(&self, c: usize, axis: usize, s: isize) -> usize {
        let stride = self.n.pow(axis as u32);
        let i = (c / stride) % self.n;
        let j = (i as isize + s).rem_euclid(self.n as isize) as usize;
        c + j * stride - i * stride
    }

    pub fn center(&self, c: usize) -> [f64; 3] {
        let m = self.multi_index(c);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (m[a] as f64 + 0.5) * h;
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
}

impl Rank {
    pub fn components(self, dim: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => dim,
            Rank::Matrix => dim * dim,
        }
    }

    pub fn code(self) -> u64 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector => 1,
            Rank::Matrix => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<Rank> {
        match code {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::Matrix),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    rank: Rank,
    data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, rank: Rank) -> Self {
        let len = grid.cells() * rank.components(grid.dim());
        GridField { grid, rank, data: vec![0.0; len] }
    }

    pub fn from_data(grid: Grid, rank: Rank, data: Vec<f64>) -> Result<Self> {
        let want = grid.cells() * rank.components(grid.dim());
        if data.len() != want {
            return Err(Error::GridMismatch(format!("expected {want} values, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value {i} is {}", data[i])));
        }
        Ok(GridField { grid, rank, data })
    }

    pub(crate) fn from_raw(grid: Grid, rank: Rank, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.cells() * rank.components(grid.dim()));
        GridField { grid, rank, data }
    }

    /// Fill from a function of the cell center writing the cell's components.
    pub fn from_fn<F>(grid: Grid, rank: Rank, mut f: F) -> Self
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut out = GridField::zeros(grid, rank);
        let nc = out.ncomp();
        let d = grid.dim();
        for c in 0..grid.cells() {
            let x = grid.center(c);
            f(&x[..d], &mut out.data[c * nc..(c + 1) * nc]);
        }
        out
    }

    pub fn scalar_from_fn<F: FnMut(&[f64]) -> f64>(grid: Grid, mut f: F) -> Self {
        Self::from_fn(grid, Rank::Scalar, |x, out| out[0] = f(x))
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn rank(&self) -> Rank {
        self.rank
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.rank.components(self.grid.dim())
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn cell(&self, c: usize) -> &[f64] {
        let nc = self.ncomp();
        &self.data[c * nc..(c + 1) * nc]
    }

    #[inline]
    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        let nc = self.ncomp();
        &mut self.data[c * nc..(c + 1) * nc]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        let nc = self.ncomp();
        self.data.iter().skip(k).step_by(nc).copied().collect()
    }

    pub fn set_component(&mut self, k: usize, values: &[f64]) {
        let nc = self.ncomp();
        for (c, v) in values.iter().enumerate() {
            self.data[c * nc + k] = *v;
        }
    }

    /// Cell-averaged mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        let nc = self.ncomp();
        let mut m = vec![0.0; nc];
        for c in 0..self.grid.cells() {
            for k in 0..nc {
                m[k] += self.data[c * nc + k];
            }
        }
        let inv = 1.0 / self.grid.cells() as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        let nc = self.ncomp();
        for (i, v) in self.data.iter_mut().enumerate() {
            *v -= m[i % nc];
        }
    }

    pub fn check_compatible(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch("fields have different ranks".into()));
        }
        Ok(())
    }

    pub fn axpy(&mut self, a: f64, x: &GridField) -> Result<()> {
        self.check_compatible(x)?;
        for (y, xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Mean of the sum of squares over components, i.e. the squared L2 norm on
    /// the unit torus.
    pub fn l2_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() / self.grid.cells() as f64
    }

    /// L2 inner product on the unit torus.
    pub fn inner(&self, other: &GridField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() / self.grid.cells() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Auxiliary function `V_i(z) = (|z|^i + |z|^2)^{1/2}` with `|z|` the Euclidean
/// (Frobenius) norm.
pub fn v_aux(z: &[f64], i: f64) -> f64 {
    v_aux_sq(z, i).sqrt()
}

/// `|V_i(z)|^2 = |z|^i + |z|^2`.
pub fn v_aux_sq(z: &[f64], i: f64) -> f64 {
    let r2: f64 = z.iter().map(|v| v * v).sum();
    v_aux_sq_from_norm(r2.sqrt(), i)
}

#[inline]
pub fn v_aux_sq_from_norm(r: f64, i: f64) -> f64 {
    r.powf(i) + r * r
}

/// `∫ |V_i(u)|^2` over the unit torus by midpoint quadrature.
pub fn vp_norm_sq(u: &GridField, i: f64) -> f64 {
    let cells = u.grid().cells();
    let s: f64 = (0..cells).map(|c| v_aux_sq(u.cell(c), i)).sum();
    s / cells as f64
}

/// Radial truncation `τ_n(z)`: identity inside the ball of radius `n`, radial
/// projection onto its boundary outside.
pub fn tau(z: &[f64], n: f64) -> Vec<f64> {
    let r = crate::tensor::vec_norm(z);
    if r <= n {
        z.to_vec()
    } else {
        z.iter().map(|v| n * v / r).collect()
    }
}

/// Apply `τ_n` to each of the two slots of a state pair.
pub fn truncate_tau(z1: &[f64], z2: &[f64], n: f64) -> (Vec<f64>, Vec<f64>) {
    (tau(z1, n), tau(z2, n))
}

/// Cellwise `τ_n` of a field.
pub fn truncate_field(u: &GridField, n: f64) -> GridField {
    let mut out = u.clone();
    for c in 0..u.grid().cells() {
        let t = tau(u.cell(c), n);
        out.cell_mut(c).copy_from_slice(&t);
    }
    out
}

/// Midpoint quadrature of a scalar field over the unit torus.
pub fn quadrature(f: &GridField) -> Result<f64> {
    if f.rank() != Rank::Scalar {
        return Err(Error::RankMismatch("quadrature expects a scalar field".into()));
    }
    Ok(f.data().iter().sum::<f64>() / f.grid().cells() as f64)
}

/// Midpoint quadrature of a function of the cell center.
pub fn integrate<F: FnMut(&[f64]) -> f64>(grid: Grid, mut f: F) -> f64 {
    let d = grid.dim();
    let mut s = 0.0;
    for c in 0..grid.cells() {
        let x = grid.center(c);
        s += f(&x[..d]);
    }
    s / grid.cells() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_validation() {
        assert_eq!(make_grid(3, 3), Err(Error::InvalidResolution(3)));
        assert_eq!(make_grid(4, 8), Err(Error::InvalidDimension(4)));
        assert_eq!(make_grid(2, 8192), Err(Error::InvalidResolution(8192)));
        assert!(make_grid(2, 4).is_ok());
    }

    #[test]
    fn index_roundtrip_and_shift() {
        let g = make_grid(3, 8).unwrap();
        for c in [0, 1, 17, 300, 511] {
            let m = g.multi_index(c);
            assert_eq!(g.linear_index(&m), c);
        }
        let c = g.linear_index(&[7, 0, 3]);
        assert_eq!(g.shift(c, 0, 1), g.linear_index(&[0, 0, 3]));
        assert_eq!(g.shift(c, 1, -1), g.linear_index(&[7, 7, 3]));
        assert_eq!(g.shift(c, 2, 2), g.linear_index(&[7, 0, 5]));
    }

    #[test]
    fn vp_norm_of_sine() {
        let g = make_grid(1, 64).unwrap();
        let u = GridField::scalar_from_fn(g, |x| (2.0 * PI * x[0]).sin());
        assert!((vp_norm_sq(&u, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_rule_of_sine_squared() {
        let g = make_grid(1, 16).unwrap();
        let f = GridField::scalar_from_fn(g, |x| (2.0 * PI * x[0]).sin().powi(2));
        assert!((quadrature(&f).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        let t = tau(&[3.0, 4.0], 1.0);
        assert!((t[0] - 0.6).abs() < 1e-15 && (t[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn v_aux_values() {
        assert_eq!(v_aux(&[0.0, 0.0], 4.0), 0.0);
        assert!((v_aux_sq(&[2.0], 3.0) - 12.0).abs() < 1e-14);
    }
}
