//! Empirical Young measures generated by scale-indexed sequences: pairings,
//! concentration mass, measure-valued residuals and time localization.

mod concentration;
mod csv;
mod localize;
mod residuals;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

pub use concentration::{concentration_mass, ConcentrationReport};
pub use csv::{decode_eym_csv, encode_eym_csv};
pub use localize::{time_localize, LocalizeOptions, LocalizeReport, Localized, SpaceTimeInput};
pub use residuals::{mv_residuals, MvResidualReport};

use crate::constitutive::EnergyModel;
use crate::error::{Error, Result};
use crate::fields::{v_aux_sq, Grid, GridField, Rank};
use crate::solver::FlowState;
use crate::tensor::Mat;

/// Atoms closer than this in the max norm are merged.
pub const MERGE_TOLERANCE: f64 = 1e-6;

/// Coordinates of an atom: `(F, v, η)` or `(F, η)`, `F` row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subspace {
    Full,
    FEta,
}

impl Subspace {
    pub fn as_str(self) -> &'static str {
        match self {
            Subspace::Full => "full",
            Subspace::FEta => "f-eta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Subspace::Full),
            "f-eta" => Some(Subspace::FEta),
            _ => None,
        }
    }

    pub fn point_dim(self, d: usize) -> usize {
        match self {
            Subspace::Full => d * d + d + 1,
            Subspace::FEta => d * d + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalYoungMeasure {
    pub grid: Grid,
    pub subspace: Subspace,
    pub atoms: Vec<Vec<Atom>>,
}

impl EmpiricalYoungMeasure {
    pub fn point_dim(&self) -> usize {
        self.subspace.point_dim(self.grid.dim())
    }

    /// Weights nonnegative and summing to one per cell; points of the right
    /// length and finite.
    pub fn validate(&self) -> Result<()> {
        if self.atoms.len() != self.grid.cells() {
            return Err(Error::GridMismatch("atom table length".into()));
        }
        let m = self.point_dim();
        for (c, cell) in self.atoms.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::InvalidParameter(format!("cell {c} has no atoms")));
            }
            let mut s = 0.0;
            for a in cell {
                if a.point.len() != m || a.point.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter(format!("bad atom in cell {c}")));
                }
                if !(a.weight >= 0.0) {
                    return Err(Error::InvalidParameter(format!("negative weight in cell {c}")));
                }
                s += a.weight;
            }
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("weights in cell {c} sum to {s}")));
            }
        }
        Ok(())
    }

    /// One Dirac atom per cell from a flow state.
    pub fn atomic(s: &FlowState, subspace: Subspace) -> Self {
        let atoms = (0..s.grid.cells()).map(|c| vec![Atom { point: flow_point(s, c, subspace), weight: 1.0 }]).collect();
        EmpiricalYoungMeasure { grid: s.grid, subspace, atoms }
    }

    pub fn dirac(grid: Grid, subspace: Subspace, point: &[f64]) -> Self {
        let atoms = (0..grid.cells()).map(|_| vec![Atom { point: point.to_vec(), weight: 1.0 }]).collect();
        EmpiricalYoungMeasure { grid, subspace, atoms }
    }
}

fn flow_point(s: &FlowState, c: usize, subspace: Subspace) -> Vec<f64> {
    let d = s.grid.dim();
    let w = s.cell(c);
    let mut p = w[..d * d].to_vec();
    if subspace == Subspace::Full {
        p.extend_from_slice(&w[d * d..d * d + d]);
    }
    p.push(s.eta[c]);
    p
}

pub type PointFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// Sequence generators, indexed by a scale `ε`.
#[derive(Clone)]
pub enum Generator {
    /// `a` where `frac(m·x/ε) < fraction`, else `b`.
    Laminate { a: Vec<f64>, b: Vec<f64>, lattice: Vec<i64>, fraction: f64 },
    /// `base` plus a velocity spike `(2 mass/ε)^{1/2}` in `v₁` on `0 ≤ x₁ < ε`.
    Concentrator { base: Vec<f64>, mass: f64 },
    /// Arbitrary `(ε, x) ↦ point`.
    Function(PointFn),
    /// Values tabulated on an internal grid, one table per scale; each table
    /// holds `layers` stacked copies of the grid (e.g. time samples).
    Tabulated { grid: Grid, layers: usize, tables: Vec<Vec<f64>> },
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Laminate { a, b, lattice, fraction } => {
                write!(f, "Laminate {{ a: {a:?}, b: {b:?}, lattice: {lattice:?}, fraction: {fraction} }}")
            }
            Generator::Concentrator { base, mass } => write!(f, "Concentrator {{ base: {base:?}, mass: {mass} }}"),
            Generator::Function(_) => write!(f, "Function"),
            Generator::Tabulated { grid, layers, tables } => {
                write!(f, "Tabulated {{ n: {}, layers: {layers}, scales: {} }}", grid.n(), tables.len())
            }
        }
    }
}

impl Generator {
    /// Tabulate one flow state per scale (a custom trajectory list).
    pub fn from_states(states: &[FlowState], subspace: Subspace) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::InvalidParameter("empty state list".into()))?;
        let grid = first.grid;
        let mut tables = Vec::new();
        for s in states {
            if s.grid != grid {
                return Err(Error::GridMismatch("states on different grids".into()));
            }
            tables.push((0..grid.cells()).flat_map(|c| flow_point(s, c, subspace)).collect());
        }
        Ok(Generator::Tabulated { grid, layers: 1, tables })
    }
}

#[derive(Clone, Debug)]
pub struct SequenceSpec {
    pub generator: Generator,
    /// Strictly descending; the last entry is the finest.
    pub scales: Vec<f64>,
    /// Samples per macro cell per dimension.
    pub subgrid: usize,
    pub subspace: Subspace,
}

impl SequenceSpec {
    pub fn validate(&self, target: Grid) -> Result<()> {
        if self.scales.is_empty() || self.scales.windows(2).any(|w| w[1] >= w[0]) || self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("scales must be positive and strictly descending".into()));
        }
        if self.subgrid < 4 {
            return Err(Error::InvalidParameter("subgrid must be at least 4".into()));
        }
        let d = target.dim();
        let m = self.subspace.point_dim(d);
        match &self.generator {
            Generator::Laminate { a, b, lattice, fraction } => {
                if a.len() != m || b.len() != m || lattice.len() != d || lattice.iter().all(|x| *x == 0) {
                    return Err(Error::InvalidParameter("laminate states or lattice have the wrong length".into()));
                }
                if !(*fraction > 0.0 && *fraction < 1.0) {
                    return Err(Error::InvalidParameter("fraction must lie in (0, 1)".into()));
                }
                let eps = *self.scales.last().unwrap();
                let mmax = lattice.iter().map(|x| x.abs()).max().unwrap() as f64;
                let spacing = 1.0 / (target.n() * self.subgrid) as f64;
                if eps / (mmax * spacing) < 8.0 - 1e-9 {
                    return Err(Error::UnresolvableScale(format!("laminate scale {eps} with {} samples per period", eps / (mmax * spacing))));
                }
            }
            Generator::Concentrator { base, mass } => {
                if self.subspace != Subspace::Full || base.len() != m {
                    return Err(Error::InvalidParameter("concentrator needs full-space states".into()));
                }
                if !(*mass >= 0.0) {
                    return Err(Error::InvalidParameter("mass must be nonnegative".into()));
                }
            }
            Generator::Function(_) => {}
            Generator::Tabulated { grid, layers, tables } => {
                if grid.dim() != d || grid.n() != target.n() * self.subgrid {
                    return Err(Error::UnresolvableScale(format!(
                        "tabulated grid n={} must equal target n={} times subgrid {}",
                        grid.n(),
                        target.n(),
                        self.subgrid
                    )));
                }
                if tables.len() != self.scales.len() || tables.iter().any(|t| t.len() != grid.cells() * layers * m) || *layers == 0 {
                    return Err(Error::InvalidParameter("tabulated data does not match scales and grid".into()));
                }
            }
        }
        Ok(())
    }

    /// Value at scale index `k` and point `x`.
    pub(crate) fn point(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let eps = self.scales[k];
        let d = x.len();
        match &self.generator {
            Generator::Laminate { a, b, lattice, fraction } => {
                let s: f64 = (0..d).map(|i| lattice[i] as f64 * x[i]).sum::<f64>() / eps;
                if s.rem_euclid(1.0) < *fraction {
                    a.clone()
                } else {
                    b.clone()
                }
            }
            Generator::Concentrator { base, mass } => {
                let mut p = base.clone();
                if x[0].rem_euclid(1.0) < eps {
                    p[d * d] += (2.0 * mass / eps).sqrt();
                }
                p
            }
            Generator::Function(f) => f(eps, x),
            Generator::Tabulated { .. } => unreachable!("tabulated sequences are read cellwise"),
        }
    }

    /// Sample points of macro cell `c` at scale `k`: `subgrid^d` sub-cell
    /// centers (all layers for tabulated data).
    pub(crate) fn cell_samples(&self, target: Grid, k: usize, c: usize, per_axis: usize) -> Vec<Vec<f64>> {
        let d = target.dim();
        let m = self.subspace.point_dim(d);
        if let Generator::Tabulated { grid, layers, tables } = &self.generator {
            let r = grid.n() / target.n();
            let base = target.multi_index(c);
            let mut out = Vec::with_capacity(layers * r.pow(d as u32));
            for layer in 0..*layers {
                for j in 0..r.pow(d as u32) {
                    let mut rem = j;
                    let mut idx = [0usize; 3];
                    for a in 0..d {
                        idx[a] = base[a] * r + rem % r;
                        rem /= r;
                    }
                    let fc = grid.linear_index(&idx[..d]);
                    let off = (layer * grid.cells() + fc) * m;
                    out.push(tables[k][off..off + m].to_vec());
                }
            }
            return out;
        }
        let h = target.spacing();
        let base = target.multi_index(c);
        let mut out = Vec::with_capacity(per_axis.pow(d as u32));
        let mut x = vec![0.0; d];
        for j in 0..per_axis.pow(d as u32) {
            let mut rem = j;
            for a in 0..d {
                x[a] = (base[a] as f64 + ((rem % per_axis) as f64 + 0.5) / per_axis as f64) * h;
                rem /= per_axis;
            }
            out.push(self.point(k, &x));
        }
        out
    }
}

/// Merge samples into weighted atoms (greedy, in sample order).
pub(crate) fn histogram(samples: &[Vec<f64>]) -> Vec<Atom> {
    let total = samples.len() as f64;
    let mut atoms: Vec<Atom> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for s in samples {
        let hit = atoms
            .iter()
            .position(|a| a.point.iter().zip(s).all(|(x, y)| (x - y).abs() <= MERGE_TOLERANCE));
        match hit {
            Some(i) => counts[i] += 1,
            None => {
                atoms.push(Atom { point: s.clone(), weight: 0.0 });
                counts.push(1);
            }
        }
    }
    for (a, n) in atoms.iter_mut().zip(counts) {
        a.weight = n as f64 / total;
    }
    atoms
}

/// Per-cell histogram of the finest-scale samples.
pub fn empirical_young_measure(spec: &SequenceSpec, target: Grid) -> Result<EmpiricalYoungMeasure> {
    spec.validate(target)?;
    let k = spec.scales.len() - 1;
    let atoms: Vec<Vec<Atom>> = (0..target.cells())
        .into_par_iter()
        .map(|c| {
            let samples = spec.cell_samples(target, k, c, spec.subgrid);
            if samples.iter().any(|s| s.iter().any(|x| !x.is_finite())) {
                return Err(Error::NonFinite(format!("sample in cell {c}")));
            }
            Ok(histogram(&samples))
        })
        .collect::<Result<_>>()?;
    let nu = EmpiricalYoungMeasure { grid: target, subspace: spec.subspace, atoms };
    nu.validate()?;
    Ok(nu)
}

/// Functions that can be paired with a Young measure.
#[derive(Clone, Debug)]
pub enum Observable {
    Identity,
    Component(usize),
    /// `|λ|²` over all coordinates.
    NormSq,
    /// `½|v|²`.
    Kinetic,
    Energy(EnergyModel),
    /// `½|v|² + e(F, η)` (no kinetic part in the `(F, η)` subspace).
    TotalEnergy(EnergyModel),
    Stress(EnergyModel),
    Temperature(EnergyModel),
    /// `|V_p(F)|²`.
    VpF(f64),
    /// `|V_q(η)|²`.
    VqEta(f64),
    Sum(Box<Observable>, Box<Observable>),
    Scaled(f64, Box<Observable>),
}

pub(crate) struct Split<'a> {
    pub f: Mat,
    pub v: Option<&'a [f64]>,
    pub eta: f64,
}

pub(crate) fn split(p: &[f64], d: usize, subspace: Subspace) -> Split<'_> {
    let f = Mat::from_slice(d, &p[..d * d]);
    match subspace {
        Subspace::Full => Split { f, v: Some(&p[d * d..d * d + d]), eta: p[d * d + d] },
        Subspace::FEta => Split { f, v: None, eta: p[d * d] },
    }
}

impl Observable {
    pub fn output_dim(&self, d: usize, subspace: Subspace) -> usize {
        match self {
            Observable::Identity => subspace.point_dim(d),
            Observable::Stress(_) => d * d,
            Observable::Sum(a, _) => a.output_dim(d, subspace),
            Observable::Scaled(_, a) => a.output_dim(d, subspace),
            _ => 1,
        }
    }

    pub(crate) fn eval(&self, p: &[f64], d: usize, subspace: Subspace) -> Result<Vec<f64>> {
        let s = || split(p, d, subspace);
        Ok(match self {
            Observable::Identity => p.to_vec(),
            Observable::Component(k) => {
                vec![*p.get(*k).ok_or_else(|| Error::InvalidParameter(format!("component {k} out of range")))?]
            }
            Observable::NormSq => vec![p.iter().map(|x| x * x).sum()],
            Observable::Kinetic => {
                let v = s().v.ok_or_else(|| Error::InvalidParameter("no velocity in the (F, eta) subspace".into()))?;
                vec![0.5 * v.iter().map(|x| x * x).sum::<f64>()]
            }
            Observable::Energy(m) => {
                let s = s();
                vec![m.energy(&s.f, s.eta)?]
            }
            Observable::TotalEnergy(m) => {
                let s = s();
                let kin = s.v.map_or(0.0, |v| 0.5 * v.iter().map(|x| x * x).sum::<f64>());
                vec![kin + m.energy(&s.f, s.eta)?]
            }
            Observable::Stress(m) => {
                let s = s();
                m.stress(&s.f, s.eta)?.as_slice()[..d * d].to_vec()
            }
            Observable::Temperature(m) => {
                let s = s();
                vec![m.temperature(&s.f, s.eta)?]
            }
            Observable::VpF(pe) => vec![v_aux_sq(&p[..d * d], *pe)],
            Observable::VqEta(q) => vec![v_aux_sq(&[s().eta], *q)],
            Observable::Sum(a, b) => {
                let (x, y) = (a.eval(p, d, subspace)?, b.eval(p, d, subspace)?);
                if x.len() != y.len() {
                    return Err(Error::InvalidParameter("summands have different output dimensions".into()));
                }
                x.iter().zip(&y).map(|(u, v)| u + v).collect()
            }
            Observable::Scaled(a, b) => b.eval(p, d, subspace)?.iter().map(|x| a * x).collect(),
        })
    }
}

/// Per-cell values with an arbitrary component count.
#[derive(Clone, Debug, PartialEq)]
pub struct CellValues {
    pub grid: Grid,
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl CellValues {
    pub fn cell(&self, c: usize) -> &[f64] {
        &self.data[c * self.ncomp..(c + 1) * self.ncomp]
    }

    /// As a grid field when the component count matches a rank.
    pub fn to_grid_field(&self) -> Result<GridField> {
        let d = self.grid.dim();
        let rank = if self.ncomp == 1 {
            Rank::Scalar
        } else if self.ncomp == d {
            Rank::Vector
        } else if self.ncomp == d * d {
            Rank::Matrix
        } else {
            return Err(Error::RankMismatch(format!("{} components", self.ncomp)));
        };
        GridField::from_data(self.grid, rank, self.data.clone())
    }

    /// Components `from..` as a grid field of the given rank.
    pub fn slice(&self, from: usize, rank: Rank) -> Result<GridField> {
        let count = rank.components(self.grid.dim());
        if from + count > self.ncomp {
            return Err(Error::RankMismatch(format!("components {from}..{} of {}", from + count, self.ncomp)));
        }
        let data = (0..self.grid.cells()).flat_map(|c| self.cell(c)[from..from + count].to_vec()).collect();
        GridField::from_data(self.grid, rank, data)
    }
}

/// `⟨ν_x, g⟩` per cell.
pub fn ym_pair(nu: &EmpiricalYoungMeasure, g: &Observable) -> Result<CellValues> {
    let d = nu.grid.dim();
    let m = g.output_dim(d, nu.subspace);
    let rows: Vec<Vec<f64>> = nu
        .atoms
        .par_iter()
        .enumerate()
        .map(|(c, cell)| {
            let mut acc = vec![0.0; m];
            for a in cell {
                let v = g.eval(&a.point, d, nu.subspace).map_err(|e| match e {
                    Error::InadmissibleState(s) => Error::InadmissibleState(format!("atom in cell {c}: {s}")),
                    other => other,
                })?;
                for (x, y) in acc.iter_mut().zip(v) {
                    *x += a.weight * y;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(CellValues { grid: nu.grid, ncomp: m, data: rows.concat() })
}

/// Barycenter split into its slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Barycenter {
    pub f: GridField,
    pub v: Option<GridField>,
    pub eta: GridField,
}

pub fn barycenter(nu: &EmpiricalYoungMeasure) -> Result<Barycenter> {
    let d = nu.grid.dim();
    let b = ym_pair(nu, &Observable::Identity)?;
    let f = b.slice(0, Rank::Matrix)?;
    let (v, eta) = match nu.subspace {
        Subspace::Full => (Some(b.slice(d * d, Rank::Vector)?), b.slice(d * d + d, Rank::Scalar)?),
        Subspace::FEta => (None, b.slice(d * d, Rank::Scalar)?),
    };
    Ok(Barycenter { f, v, eta })
}

/// Per-component 1D Wasserstein-1 distance between two weighted atom sets,
/// maximized over components.
pub fn wasserstein1(a: &[Atom], b: &[Atom]) -> f64 {
    let m = a.first().or(b.first()).map_or(0, |x| x.point.len());
    let mut worst = 0.0_f64;
    for k in 0..m {
        let mut ev: Vec<(f64, f64)> = a.iter().map(|x| (x.point[k], x.weight)).collect();
        ev.extend(b.iter().map(|x| (x.point[k], -x.weight)));
        ev.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut cdf = 0.0;
        let mut w = 0.0;
        for i in 0..ev.len() {
            cdf += ev[i].1;
            if i + 1 < ev.len() {
                w += cdf.abs() * (ev[i + 1].0 - ev[i].0);
            }
        }
        worst = worst.max(w);
    }
    worst
}

/// Largest per-cell Wasserstein-1 distance.
pub fn max_cell_wasserstein(a: &EmpiricalYoungMeasure, b: &EmpiricalYoungMeasure) -> Result<f64> {
    if a.grid != b.grid || a.subspace != b.subspace {
        return Err(Error::GridMismatch("measures on different grids or subspaces".into()));
    }
    Ok(a.atoms.par_iter().zip(&b.atoms).map(|(x, y)| wasserstein1(x, y)).reduce(|| 0.0, f64::max))
}

/// Largest per-cell gap between the weights of `b` and the weights of `a`
/// aggregated onto their nearest atom of `b`.
pub fn max_weight_gap(a: &EmpiricalYoungMeasure, b: &EmpiricalYoungMeasure) -> Result<f64> {
    if a.grid != b.grid || a.subspace != b.subspace {
        return Err(Error::GridMismatch("measures on different grids or subspaces".into()));
    }
    let gap = a
        .atoms
        .par_iter()
        .zip(&b.atoms)
        .map(|(x, y)| {
            let mut agg = vec![0.0; y.len()];
            for atom in x {
                let mut best = (f64::INFINITY, 0);
                for (j, t) in y.iter().enumerate() {
                    let dist = atom.point.iter().zip(&t.point).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                    if dist < best.0 {
                        best = (dist, j);
                    }
                }
                agg[best.1] += atom.weight;
            }
            agg.iter().zip(y).map(|(w, t)| (w - t.weight).abs()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Quadratic;
    use crate::fields::make_grid;

    fn laminate_spec(fraction: f64) -> SequenceSpec {
        SequenceSpec {
            generator: Generator::Laminate { a: vec![1.0, 0.0], b: vec![-1.0, 0.5], lattice: vec![1], fraction },
            scales: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
            subgrid: 32,
            subspace: Subspace::FEta,
        }
    }

    #[test]
    fn laminate_atoms_and_weights() {
        let g = make_grid(1, 8).unwrap();
        let nu = empirical_young_measure(&laminate_spec(0.25), g).unwrap();
        for cell in &nu.atoms {
            assert_eq!(cell.len(), 2);
            assert!((cell[0].weight - 0.25).abs() < 2.0 / 32.0);
        }
        let b = barycenter(&nu).unwrap();
        assert!((b.f.cell(0)[0] - (-0.5)).abs() < 2.0 / 32.0 * 2.0);
    }

    #[test]
    fn jensen_gap_and_quadratic_energy() {
        let g = make_grid(1, 4).unwrap();
        let mut nu = EmpiricalYoungMeasure::dirac(g, Subspace::FEta, &[0.0, 0.0]);
        for cell in nu.atoms.iter_mut() {
            *cell = vec![Atom { point: vec![1.0, 0.0], weight: 0.5 }, Atom { point: vec![-1.0, 0.0], weight: 0.5 }];
        }
        let sq = ym_pair(&nu, &Observable::NormSq).unwrap();
        let bar = ym_pair(&nu, &Observable::Identity).unwrap();
        assert_eq!(sq.cell(0)[0], 1.0);
        assert_eq!(bar.cell(0)[0], 0.0);
        let e = ym_pair(&nu, &Observable::Energy(Quadratic::model(1, 1.0))).unwrap();
        assert!((e.cell(0)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unresolved_laminate_is_rejected() {
        let g = make_grid(1, 8).unwrap();
        let mut s = laminate_spec(0.5);
        s.subgrid = 8;
        assert!(matches!(empirical_young_measure(&s, g), Err(Error::UnresolvableScale(_))));
    }

    #[test]
    fn wasserstein_of_shifted_dirac() {
        let a = vec![Atom { point: vec![0.0, 1.0], weight: 1.0 }];
        let b = vec![Atom { point: vec![0.5, 1.0], weight: 1.0 }];
        assert!((wasserstein1(&a, &b) - 0.5).abs() < 1e-15);
    }
}
