use crate::constitutive::EnergyModel;
use crate::error::{Error, Result};
use crate::tensor::Mat;

const MAX_EXPAND: usize = 80;
const MAX_ITER: usize = 200;

/// The entropy `η` with `e(F, η) = E - ½|v|²`.
pub fn recover_entropy(model: &EnergyModel, f: &Mat, v: &[f64], e_total: f64) -> Result<f64> {
    recover_entropy_from(model, f, v, e_total, None)
}

/// As [`recover_entropy`], starting the bracket search at `guess`.
pub fn recover_entropy_from(model: &EnergyModel, f: &Mat, v: &[f64], e_total: f64, guess: Option<f64>) -> Result<f64> {
    if !e_total.is_finite() || !f.is_finite() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::RecoveryFailure("non-finite conservative data".into()));
    }
    let target = e_total - 0.5 * v.iter().map(|x| x * x).sum::<f64>();
    let dens = model.density();
    let eta_min = model.eta_min();
    let ok = |eta: f64| eta > eta_min && dens.temperature(f, eta) > 0.0 && dens.energy(f, eta).is_finite();
    let g = |eta: f64| dens.energy(f, eta) - target;

    let mut x0 = guess.filter(|x| x.is_finite()).unwrap_or(0.0);
    if !ok(x0) {
        x0 = if eta_min.is_finite() { eta_min + 1.0 } else { 0.0 };
        let mut step = 1.0;
        let mut k = 0;
        while !ok(x0) {
            x0 += step;
            step *= 2.0;
            k += 1;
            if k > MAX_EXPAND {
                return Err(Error::RecoveryFailure("no admissible entropy for this F".into()));
            }
        }
    }
    let tol = 1e-13 * target.abs().max(1.0);
    let g0 = g(x0);
    if g0.abs() <= tol {
        return Ok(x0);
    }

    // Bracket [lo, hi] with g(lo) < 0 < g(hi); lo stays admissible.
    let (mut lo, mut hi);
    if g0 < 0.0 {
        lo = x0;
        let mut step = 1.0_f64.max(x0.abs() * 0.5);
        let mut k = 0;
        loop {
            let x = lo + step;
            if !ok(x) {
                return Err(Error::RecoveryFailure(format!("energy {target} above admissible range")));
            }
            if g(x) >= 0.0 {
                hi = x;
                break;
            }
            lo = x;
            step *= 2.0;
            k += 1;
            if k > MAX_EXPAND {
                return Err(Error::RecoveryFailure(format!("energy {target} out of range")));
            }
        }
    } else {
        hi = x0;
        let mut step = 1.0_f64.max(x0.abs() * 0.5);
        let mut k = 0;
        loop {
            let x = hi - step;
            if !ok(x) {
                // bisect toward the edge of the admissible region
                let (mut bad, mut good) = (x, hi);
                while good - bad > 1e-15 * good.abs().max(1.0) {
                    let m = 0.5 * (bad + good);
                    if ok(m) {
                        good = m;
                    } else {
                        bad = m;
                    }
                }
                if g(good) <= 0.0 {
                    lo = good;
                    break;
                }
                return Err(Error::RecoveryFailure(format!("energy {target} below the admissible range")));
            }
            if g(x) <= 0.0 {
                lo = x;
                break;
            }
            hi = x;
            step *= 2.0;
            k += 1;
            if k > MAX_EXPAND {
                return Err(Error::RecoveryFailure(format!("energy {target} out of range")));
            }
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let gx = g(x);
        if gx.abs() <= tol {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let th = dens.temperature(f, x);
        let mut next = if th > 0.0 { x - gx / th } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::RecoveryFailure("Newton iteration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Quadratic;

    #[test]
    fn quadratic_examples() {
        let m = Quadratic::model(1, 1.0);
        let f = Mat::zeros(1);
        assert_eq!(recover_entropy(&m, &f, &[0.0], 0.0).unwrap(), 0.0);
        assert!((recover_entropy(&m, &f, &[0.0], 1.5).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(recover_entropy(&m, &f, &[0.0], -0.6), Err(Error::RecoveryFailure(_))));
    }
}
