use proptest::prelude::*;
use thermoqc_core::constitutive::Quadratic;
use thermoqc_core::fields::Grid;
use thermoqc_core::tensor::Mat;
use thermoqc_core::young_measure::{
    concentration_mass, decode_eym_csv, empirical_young_measure, encode_eym_csv, time_localize, ym_pair, Atom,
    EmpiricalYoungMeasure, Generator, LocalizeOptions, Observable, SequenceSpec, SpaceTimeInput, Subspace,
};

fn laminate(d: usize) -> SequenceSpec {
    let m = Subspace::FEta.point_dim(d);
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    for i in 0..d {
        a[i * d + i] = 1.2;
        b[i * d + i] = 0.9;
    }
    a[0] += 0.1;
    a[m - 1] = 0.3;
    b[m - 1] = 0.5;
    let mut lattice = vec![0; d];
    lattice[0] = 1;
    SequenceSpec {
        generator: Generator::Laminate { a, b, lattice, fraction: 0.25 },
        scales: vec![0.125, 0.0625, 0.03125],
        subgrid: 64,
        subspace: Subspace::FEta,
    }
}

fn concentrator(d: usize) -> SequenceSpec {
    let m = Subspace::Full.point_dim(d);
    let mut base = vec![0.0; m];
    for i in 0..d {
        base[i * d + i] = 1.0;
    }
    SequenceSpec {
        generator: Generator::Concentrator { base, mass: 0.5 },
        scales: vec![0.05, 0.025, 0.0125],
        subgrid: 8,
        subspace: Subspace::Full,
    }
}

fn random_measure(seed: u64, cells: usize, m: usize) -> EmpiricalYoungMeasure {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::new(1, cells).unwrap();
    let atoms = (0..cells)
        .map(|_| {
            let k = r.gen_range(1..5);
            let w: Vec<f64> = (0..k).map(|_| r.gen_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| Atom { point: (0..m).map(|_| r.gen_range(-2.0..2.0)).collect(), weight: x / s }).collect()
        })
        .collect();
    EmpiricalYoungMeasure { grid, subspace: Subspace::FEta, atoms }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let nu = random_measure(seed, 8, 2);
        let g = Observable::Component(0);
        let h = Observable::NormSq;
        let combo = Observable::Sum(
            Box::new(Observable::Scaled(a, Box::new(g.clone()))),
            Box::new(Observable::Scaled(b, Box::new(h.clone()))),
        );
        let pg = ym_pair(&nu, &g).unwrap();
        let ph = ym_pair(&nu, &h).unwrap();
        let pc = ym_pair(&nu, &combo).unwrap();
        for c in 0..8 {
            let expect = a * pg.cell(c)[0] + b * ph.cell(c)[0];
            prop_assert!((pc.cell(c)[0] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn jensen_gap_is_the_variance(seed in 0u64..1000) {
        let nu = random_measure(seed, 8, 2);
        let sq = ym_pair(&nu, &Observable::NormSq).unwrap();
        let mean = ym_pair(&nu, &Observable::Identity).unwrap();
        for c in 0..8 {
            let m = mean.cell(c);
            let gap = sq.cell(c)[0] - m.iter().map(|x| x * x).sum::<f64>();
            let var: f64 = nu.atoms[c]
                .iter()
                .map(|a| a.weight * a.point.iter().zip(m).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                .sum();
            prop_assert!(gap >= var - 1e-12, "{gap} < {var}");
            prop_assert!((gap - var).abs() <= 1e-10);
        }
    }

    #[test]
    fn csv_roundtrip(seed in 0u64..1000) {
        let nu = random_measure(seed, 8, 3);
        let nu = EmpiricalYoungMeasure { subspace: Subspace::Full, ..nu };
        let back = decode_eym_csv(&encode_eym_csv(&nu)).unwrap();
        prop_assert_eq!(back, nu);
    }
}

#[test]
fn laminate_measures_are_probability_measures() {
    for d in [1, 2] {
        let nu = empirical_young_measure(&laminate(d), Grid::new(d, 8).unwrap()).unwrap();
        nu.validate().unwrap();
        for cell in &nu.atoms {
            let w: Vec<f64> = cell.iter().map(|a| a.weight).collect();
            assert_eq!(w.len(), 2, "d={d}");
            assert!((w.iter().cloned().fold(0.0, f64::max) - 0.75).abs() <= 1e-12);
        }
    }
}

#[test]
fn concentration_mass_is_nonnegative() {
    for d in [1, 2] {
        let g = Grid::new(d, 8).unwrap();
        let model = Quadratic::model(d, 1.0);
        for spec in [laminate(d), concentrator(d)] {
            let nu = empirical_young_measure(&spec, g).unwrap();
            let rep = concentration_mass(&spec, &nu, &model).unwrap();
            assert!(rep.total >= -1e-6, "d={d}: {:e}", rep.total);
            assert!(rep.gamma.data().iter().all(|x| *x >= -1e-6));
        }
    }
}

struct Frozen {
    dim: usize,
}

impl SpaceTimeInput for Frozen {
    fn dim(&self) -> usize {
        self.dim
    }

    fn window(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn gradient(&self, k: usize, _t: f64, x: &[f64]) -> Option<Mat> {
        let delta = [0.25, 0.125, 0.0625][k];
        let chi = if (x[0] / delta).rem_euclid(1.0) < 0.25 { 1.0 } else { 0.0 };
        let mut f = Mat::identity(self.dim);
        for i in 0..self.dim {
            f.set(i, 0, f.get(i, 0) + [0.5, -0.3, 0.2][i] * (chi - 0.25));
        }
        Some(f)
    }

    fn entropy(&self, _k: usize, _t: f64, _x: &[f64]) -> Option<f64> {
        Some(0.5)
    }
}

#[test]
fn time_constant_input_localizes_to_its_slice() {
    for d in [1, 2] {
        let mut o = LocalizeOptions::new(0.5, Grid::new(d, 8).unwrap(), vec![0.25, 0.125, 0.0625]);
        o.subgrid = 16;
        let l = time_localize(&Frozen { dim: d }, &o).unwrap();
        assert!(l.report.w1_max <= 1e-12, "d={d}: {:e}", l.report.w1_max);
        assert_eq!(l.report.weight_gap, 0.0, "d={d}");
        assert!(l.report.curl_max <= 1e-10, "d={d}: {:e}", l.report.curl_max);
    }
}
