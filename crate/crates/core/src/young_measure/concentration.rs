use rayon::prelude::*;

use super::{split, ym_pair, EmpiricalYoungMeasure, Generator, Observable, SequenceSpec};
use crate::constitutive::EnergyModel;
use crate::error::{Error, Result};
use crate::fields::{Grid, GridField, Rank};

/// Negative per-cell masses above `-CLAMP_TOL` are set to zero silently.
pub const CLAMP_TOL: f64 = 1e-9;
/// Largest number of quadrature points over the whole grid.
const MAX_POINTS: f64 = 5e7;
/// Relative change of the total energy between the finest two scales above
/// which the sequence is flagged as non-Cauchy.
const CAUCHY_TOL: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct ConcentrationReport {
    pub gamma: GridField,
    pub total: f64,
    /// Cells whose raw estimate fell below zero and was set to zero.
    pub clamped: usize,
    /// Most negative raw cell value.
    pub min_raw: f64,
    /// Total energy of each scale, in the order of `spec.scales`.
    pub energies: Vec<f64>,
    /// Extrapolated total energy.
    pub limit_energy: f64,
    /// `⟨ν, ½|v|² + e⟩` integrated over the torus.
    pub measure_energy: f64,
    pub cauchy: bool,
}

fn cell_energies(spec: &SequenceSpec, model: &EnergyModel, grid: Grid, k: usize) -> Result<Vec<f64>> {
    let d = grid.dim();
    let per_axis = match spec.generator {
        Generator::Tabulated { .. } => spec.subgrid,
        _ => spec.subgrid.max((8.0 * grid.spacing() / spec.scales[k]).ceil() as usize),
    };
    if (per_axis as f64).powi(d as i32) * grid.cells() as f64 > MAX_POINTS {
        return Err(Error::UnresolvableScale(format!("{per_axis} quadrature points per axis and cell exceed the budget")));
    }
    let vol = grid.cell_volume();
    (0..grid.cells())
        .into_par_iter()
        .map(|c| {
            let samples = spec.cell_samples(grid, k, c, per_axis);
            let mut acc = 0.0;
            for p in &samples {
                let s = split(p, d, spec.subspace);
                let kin = s.v.map_or(0.0, |v| 0.5 * v.iter().map(|x| x * x).sum::<f64>());
                acc += kin + model.energy(&s.f, s.eta)?;
            }
            Ok(acc / samples.len() as f64 * vol)
        })
        .collect()
}

/// Per-cell concentration mass: the energy of the sequence extrapolated to
/// zero scale minus the energy of the Young measure.
pub fn concentration_mass(spec: &SequenceSpec, nu: &EmpiricalYoungMeasure, model: &EnergyModel) -> Result<ConcentrationReport> {
    let grid = nu.grid;
    spec.validate(grid)?;
    if spec.subspace != nu.subspace {
        return Err(Error::InvalidParameter("sequence and measure live in different subspaces".into()));
    }
    let per_scale: Vec<Vec<f64>> = (0..spec.scales.len()).map(|k| cell_energies(spec, model, grid, k)).collect::<Result<_>>()?;
    let energies: Vec<f64> = per_scale.iter().map(|e| e.iter().sum()).collect();
    let kf = spec.scales.len() - 1;
    let limit: Vec<f64> = if kf == 0 {
        per_scale[0].clone()
    } else {
        let (ec, ef) = (spec.scales[kf - 1], spec.scales[kf]);
        per_scale[kf - 1]
            .iter()
            .zip(&per_scale[kf])
            .map(|(c, f)| (ec * f - ef * c) / (ec - ef))
            .collect()
    };
    let cauchy = kf == 0 || {
        let (c, f) = (energies[kf - 1], energies[kf]);
        (f - c).abs() <= CAUCHY_TOL * f.abs().max(c.abs()).max(1e-12)
    };
    let measure = ym_pair(nu, &Observable::TotalEnergy(model.clone()))?;
    let vol = grid.cell_volume();
    let mut gamma = GridField::zeros(grid, Rank::Scalar);
    let mut clamped = 0;
    let mut min_raw = f64::INFINITY;
    let mut measure_energy = 0.0;
    for c in 0..grid.cells() {
        let m = measure.cell(c)[0] * vol;
        measure_energy += m;
        let raw = limit[c] - m;
        min_raw = min_raw.min(raw);
        let g = if raw < 0.0 {
            if raw < -CLAMP_TOL {
                clamped += 1;
            }
            0.0
        } else {
            raw
        };
        gamma.data_mut()[c] = g;
    }
    let total = gamma.data().iter().sum();
    Ok(ConcentrationReport {
        gamma,
        total,
        clamped,
        min_raw,
        energies,
        limit_energy: limit.iter().sum(),
        measure_energy,
        cauchy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Quadratic;
    use crate::fields::make_grid;
    use crate::young_measure::{empirical_young_measure, Subspace};

    #[test]
    fn spike_concentrates_half_in_first_cell() {
        let g = make_grid(1, 16).unwrap();
        let spec = SequenceSpec {
            generator: Generator::Concentrator { base: vec![0.0, 0.0, 0.0], mass: 0.5 },
            scales: vec![1.0 / 256.0, 1.0 / 512.0, 1.0 / 1024.0],
            subgrid: 8,
            subspace: Subspace::Full,
        };
        let nu = empirical_young_measure(&spec, g).unwrap();
        let model = Quadratic::model(1, 1.0);
        let r = concentration_mass(&spec, &nu, &model).unwrap();
        assert!((r.total - 0.5).abs() < 0.05, "{}", r.total);
        assert!((r.gamma.data()[0] - r.total).abs() < 1e-12);
        assert!(r.cauchy);
    }
}
