//! Seeded random streams and low-discrepancy point sets.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a label.
pub fn substream(seed: u64, label: u64) -> SeededRng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Point `i` (1-based offset applied internally) of the Halton sequence in `[0,1)^dim`.
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton dimension too large");
    (0..dim).map(|k| radical_inverse(i + 1, PRIMES[k])).collect()
}

/// Map a point of `[0,1)^(m-1)` onto the unit sphere in `R^m` via inverse normal
/// transforms, which keeps low-discrepancy inputs well spread.
pub fn sphere_point(u: &[f64], m: usize) -> Vec<f64> {
    assert!(u.len() >= m);
    let mut x: Vec<f64> = u[..m].iter().map(|&t| inv_normal_cdf(t.clamp(1e-12, 1.0 - 1e-12))).collect();
    let n = crate::tensor::vec_norm(&x);
    if n < 1e-300 {
        x = vec![0.0; m];
        x[0] = 1.0;
        return x;
    }
    x.iter_mut().for_each(|v| *v /= n);
    x
}

/// Random unit vector in `R^m`.
pub fn random_unit<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..m).map(|_| standard_normal(rng)).collect();
        let n = crate::tensor::vec_norm(&x);
        if n > 1e-12 {
            return x.into_iter().map(|v| v / n).collect();
        }
    }
}

pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Quantile function of the standard normal distribution.
pub fn inv_normal_cdf(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two_prefix() {
        let xs: Vec<f64> = (0..4).map(|i| halton(i, 1)[0]).collect();
        assert_eq!(xs, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn sphere_points_are_unit() {
        for i in 0..50 {
            let u = halton(i, 4);
            let s = sphere_point(&u, 4);
            assert!((crate::tensor::vec_norm(&s) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inv_normal_symmetry() {
        for &p in &[0.01, 0.1, 0.3, 0.45] {
            assert!((inv_normal_cdf(p) + inv_normal_cdf(1.0 - p)).abs() < 1e-6);
        }
        assert!(inv_normal_cdf(0.5).abs() < 1e-9);
    }
}
