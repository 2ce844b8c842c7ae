//! Test-function pairs `(φ, ψ)` used by the quasiconvexity and Garding
//! machinery.

use std::f64::consts::PI;

use super::{spectral, Grid, GridField, Rank};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    /// Periodic `φ`, gradient computed spectrally.
    Periodic,
    /// `φ` vanishes on a one-cell collar and is ramped in over four cells;
    /// gradient computed by centered differences.
    ZeroTrace,
}

impl BoundaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMode::Periodic => "periodic",
            BoundaryMode::ZeroTrace => "zero_trace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "periodic" => Some(BoundaryMode::Periodic),
            "zero_trace" => Some(BoundaryMode::ZeroTrace),
            _ => None,
        }
    }
}

/// Cutoff that is zero on the boundary collar and rises smoothly to one over
/// the next four cells along every axis.
pub fn zero_trace_mask(grid: Grid) -> Vec<f64> {
    let n = grid.n();
    let ramp = |i: usize| -> f64 {
        let dist = i.min(n - 1 - i);
        if dist == 0 {
            0.0
        } else if dist >= 5 {
            1.0
        } else {
            0.5 * (1.0 - (PI * dist as f64 / 5.0).cos())
        }
    };
    (0..grid.cells())
        .map(|c| {
            let m = grid.multi_index(c);
            (0..grid.dim()).map(|a| ramp(m[a])).product()
        })
        .collect()
}

fn centered_derivative(grid: Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let inv = 0.5 * grid.n() as f64;
    (0..grid.cells())
        .map(|c| (values[grid.shift(c, axis, 1)] - values[grid.shift(c, axis, -1)]) * inv)
        .collect()
}

/// Gradient of a vector field with the differencing rule of `mode`.
pub fn gradient_with_mode(u: &GridField, mode: BoundaryMode) -> Result<GridField> {
    match mode {
        BoundaryMode::Periodic => spectral::spectral_gradient(u),
        BoundaryMode::ZeroTrace => {
            let grid = u.grid();
            let d = grid.dim();
            let rows = match u.rank() {
                Rank::Scalar => 1,
                Rank::Vector => d,
                Rank::Matrix => return Err(Error::RankMismatch("gradient of a matrix field".into())),
            };
            let rank = if rows == 1 && u.rank() == Rank::Scalar { Rank::Vector } else { Rank::Matrix };
            let mut out = GridField::zeros(grid, rank);
            for i in 0..rows {
                let comp = u.component(i);
                for a in 0..d {
                    out.set_component(i * d + a, &centered_derivative(grid, &comp, a));
                }
            }
            Ok(out)
        }
    }
}

/// Row-wise divergence matching `gradient_with_mode`, so that
/// `<∇u, M> = -<u, div M>` holds exactly on the grid.
pub fn divergence_with_mode(m: &GridField, mode: BoundaryMode) -> Result<GridField> {
    match mode {
        BoundaryMode::Periodic => spectral::divergence(m),
        BoundaryMode::ZeroTrace => {
            let grid = m.grid();
            let d = grid.dim();
            let (rows, rank) = match m.rank() {
                Rank::Vector => (1, Rank::Scalar),
                Rank::Matrix => (d, Rank::Vector),
                Rank::Scalar => return Err(Error::RankMismatch("divergence of a scalar field".into())),
            };
            let mut out = GridField::zeros(grid, rank);
            for i in 0..rows {
                let mut acc = vec![0.0; grid.cells()];
                for a in 0..d {
                    let dv = centered_derivative(grid, &m.component(i * d + a), a);
                    acc.iter_mut().zip(dv).for_each(|(s, v)| *s += v);
                }
                out.set_component(i, &acc);
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestField {
    pub phi: GridField,
    pub psi: GridField,
    pub mode: BoundaryMode,
}

impl TestField {
    /// Validated pair. Periodic `φ` is shifted to zero mean.
    pub fn new(phi: GridField, psi: GridField, mode: BoundaryMode) -> Result<Self> {
        let mut phi = phi;
        if mode == BoundaryMode::Periodic && phi.is_finite() {
            // only the gradient of φ enters; fix the free constant
            phi.subtract_mean();
        }
        Self::from_parts(phi, psi, mode)
    }

    /// Validated pair taken as is (used when decoding stored fields).
    pub fn from_parts(phi: GridField, psi: GridField, mode: BoundaryMode) -> Result<Self> {
        if phi.rank() != Rank::Vector || psi.rank() != Rank::Scalar {
            return Err(Error::RankMismatch("test field needs vector phi and scalar psi".into()));
        }
        if phi.grid() != psi.grid() {
            return Err(Error::GridMismatch("phi and psi on different grids".into()));
        }
        if !phi.is_finite() || !psi.is_finite() {
            return Err(Error::NonFinite("test field".into()));
        }
        if mode == BoundaryMode::ZeroTrace {
            let mask = zero_trace_mask(phi.grid());
            for (c, m) in mask.iter().enumerate() {
                if *m == 0.0 && phi.cell(c).iter().any(|v| *v != 0.0) {
                    return Err(Error::InvalidParameter("zero-trace phi is nonzero on the boundary collar".into()));
                }
            }
        }
        Ok(TestField { phi, psi, mode })
    }

    pub fn zeros(grid: Grid, mode: BoundaryMode) -> Self {
        TestField { phi: GridField::zeros(grid, Rank::Vector), psi: GridField::zeros(grid, Rank::Scalar), mode }
    }

    pub fn grid(&self) -> Grid {
        self.phi.grid()
    }

    pub fn grad_phi(&self) -> Result<GridField> {
        gradient_with_mode(&self.phi, self.mode)
    }

    /// Multiply `φ` by the zero-trace mask (no-op for periodic fields).
    pub fn apply_mask(&mut self) {
        if self.mode == BoundaryMode::ZeroTrace {
            let mask = zero_trace_mask(self.grid());
            let d = self.grid().dim();
            for (c, m) in mask.iter().enumerate() {
                for k in 0..d {
                    self.phi.cell_mut(c)[k] *= m;
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.phi.scale(s);
        self.psi.scale(s);
    }

    pub fn is_zero(&self) -> bool {
        self.phi.max_abs() == 0.0 && self.psi.max_abs() == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    #[test]
    fn mask_vanishes_on_collar() {
        let g = make_grid(2, 16).unwrap();
        let m = zero_trace_mask(g);
        for c in 0..g.cells() {
            let idx = g.multi_index(c);
            if idx[0] == 0 || idx[0] == 15 || idx[1] == 0 || idx[1] == 15 {
                assert_eq!(m[c], 0.0);
            }
            if (5..=10).contains(&idx[0]) && (5..=10).contains(&idx[1]) {
                assert_eq!(m[c], 1.0);
            }
        }
    }

    #[test]
    fn centered_pair_is_adjoint() {
        let g = make_grid(2, 16).unwrap();
        let mut u = GridField::from_fn(g, Rank::Vector, |x, o| {
            o[0] = (3.0 * x[0]).sin() * x[1];
            o[1] = (x[0] - x[1]).cos();
        });
        let mask = zero_trace_mask(g);
        for c in 0..g.cells() {
            u.cell_mut(c).iter_mut().for_each(|v| *v *= mask[c]);
        }
        let w = GridField::from_fn(g, Rank::Matrix, |x, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = (x[0] * (k + 1) as f64 + x[1]).sin();
            }
        });
        let lhs = gradient_with_mode(&u, BoundaryMode::ZeroTrace).unwrap().inner(&w).unwrap();
        let rhs = -u.inner(&divergence_with_mode(&w, BoundaryMode::ZeroTrace).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonzero_collar() {
        let g = make_grid(1, 16).unwrap();
        let phi = GridField::from_fn(g, Rank::Vector, |_, o| o[0] = 1.0);
        let psi = GridField::zeros(g, Rank::Scalar);
        assert!(TestField::new(phi, psi, BoundaryMode::ZeroTrace).is_err());
    }
}
