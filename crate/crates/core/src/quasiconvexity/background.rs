use std::f64::consts::PI;

use crate::constitutive::EnergyModel;
use crate::error::{Error, Result};
use crate::fields::{Grid, GridField, Rank};
use crate::tensor::Mat;

/// Background state `(F̄, η̄)` on a grid with its sup bound `K` and a
/// Lipschitz constant describing its modulus of continuity.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundField {
    pub fbar: GridField,
    pub etabar: GridField,
    pub k: f64,
    pub lipschitz: f64,
}

impl BackgroundField {
    /// Build from sampled fields; `K` and the Lipschitz constant (largest
    /// one-cell difference quotient) are measured.
    pub fn from_fields(fbar: GridField, etabar: GridField) -> Result<Self> {
        if fbar.rank() != Rank::Matrix || etabar.rank() != Rank::Scalar {
            return Err(Error::RankMismatch("background needs matrix F and scalar eta".into()));
        }
        if fbar.grid() != etabar.grid() {
            return Err(Error::GridMismatch("background fields on different grids".into()));
        }
        if !fbar.is_finite() || !etabar.is_finite() {
            return Err(Error::NonFinite("background".into()));
        }
        let grid = fbar.grid();
        let norm = |c: usize| fbar.cell(c).iter().map(|x| x * x).sum::<f64>().sqrt();
        let sup_f = (0..grid.cells()).map(norm).fold(0.0_f64, f64::max);
        let sup_e = etabar.max_abs();
        let mut lip = 0.0_f64;
        let inv_h = grid.n() as f64;
        for c in 0..grid.cells() {
            for a in 0..grid.dim() {
                let cp = grid.shift(c, a, 1);
                let df: f64 = fbar.cell(c).iter().zip(fbar.cell(cp)).map(|(x, y)| (x - y) * (x - y)).sum();
                let de = etabar.cell(c)[0] - etabar.cell(cp)[0];
                lip = lip.max((df + de * de).sqrt() * inv_h);
            }
        }
        Ok(BackgroundField { fbar, etabar, k: sup_f + sup_e, lipschitz: lip })
    }

    pub fn constant(grid: Grid, f: &Mat, eta: f64) -> Result<Self> {
        let fbar = GridField::from_fn(grid, Rank::Matrix, |_, out| out.copy_from_slice(&f.as_slice()[..out.len()]));
        let etabar = GridField::scalar_from_fn(grid, |_| eta);
        Self::from_fields(fbar, etabar)
    }

    /// `F̄ = F₀ + A sin(2πk x₁) B`, `η̄ = η₀ + A sin(2πk x₁)`.
    pub fn oscillatory(grid: Grid, f0: &Mat, b: &Mat, eta0: f64, amplitude: f64, wavenumber: f64) -> Result<Self> {
        let s = move |x: &[f64]| amplitude * (2.0 * PI * wavenumber * x[0]).sin();
        let fbar = GridField::from_fn(grid, Rank::Matrix, |x, out| {
            let v = s(x);
            for (k, o) in out.iter_mut().enumerate() {
                *o = f0.as_slice()[k] + v * b.as_slice()[k];
            }
        });
        let etabar = GridField::scalar_from_fn(grid, |x| eta0 + s(x));
        Self::from_fields(fbar, etabar)
    }

    pub fn grid(&self) -> Grid {
        self.fbar.grid()
    }

    pub fn state(&self, c: usize) -> (Mat, f64) {
        let d = self.grid().dim();
        (Mat::from_slice(d, self.fbar.cell(c)), self.etabar.cell(c)[0])
    }

    /// Every cell admissible for `model`.
    pub fn validate(&self, model: &EnergyModel) -> Result<()> {
        if model.dim() != self.grid().dim() {
            return Err(Error::InvalidParameter("model and background dimensions differ".into()));
        }
        for c in 0..self.grid().cells() {
            let (f, eta) = self.state(c);
            model.temperature(&f, eta).map_err(|e| Error::InadmissibleState(format!("background cell {c}: {e}")))?;
        }
        Ok(())
    }
}
