//! Sampling-plus-refinement estimates of suprema of scalar functions over
//! boxed domains. Used to fit the empirical constants of the model audits.

use rayon::prelude::*;

use crate::sampling::{rng, SeededRng};

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub samples: usize,
    pub seed: u64,
    /// Number of best samples polished by pattern search.
    pub starts: usize,
    /// Maximum pattern-search sweeps per start.
    pub sweeps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { samples: 2000, seed: 1, starts: 6, sweeps: 80 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub feasible_samples: usize,
}

/// Draw `samples` points, evaluate `objective` (None marks an infeasible or
/// excluded point), then polish the best `starts` points with a coordinate
/// pattern search whose steps are scaled by `scale`. `project` maps a trial
/// point back into the domain.
pub fn maximize<S, F, P>(opts: &SearchOptions, scale: &[f64], mut sample: S, objective: F, project: P) -> SearchResult
where
    S: FnMut(&mut SeededRng) -> Vec<f64>,
    F: Fn(&[f64]) -> Option<f64> + Sync,
    P: Fn(&mut [f64]) + Sync,
{
    let mut r = rng(opts.seed);
    let points: Vec<Vec<f64>> = (0..opts.samples).map(|_| sample(&mut r)).collect();
    let values: Vec<Option<f64>> = points.par_iter().map(|x| objective(x).filter(|v| v.is_finite())).collect();
    let mut ranked: Vec<(usize, f64)> =
        values.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    let feasible = ranked.len();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    if ranked.is_empty() {
        return SearchResult { value: f64::NEG_INFINITY, argmax: Vec::new(), feasible_samples: 0 };
    }
    let starts: Vec<(Vec<f64>, f64)> =
        ranked.iter().take(opts.starts.max(1)).map(|(i, v)| (points[*i].clone(), *v)).collect();
    let polished: Vec<(Vec<f64>, f64)> = starts
        .into_par_iter()
        .map(|(x, v)| pattern_search(x, v, scale, opts.sweeps, &objective, &project))
        .collect();
    let mut best = polished[0].clone();
    for p in polished.into_iter().skip(1) {
        if p.1 > best.1 {
            best = p;
        }
    }
    SearchResult { value: best.1, argmax: best.0, feasible_samples: feasible }
}

fn pattern_search<F, P>(mut x: Vec<f64>, mut fx: f64, scale: &[f64], sweeps: usize, objective: &F, project: &P) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Option<f64>,
    P: Fn(&mut [f64]),
{
    let mut step = 0.25;
    let mut trial = x.clone();
    for _ in 0..sweeps {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[i] += sign * step * scale[i];
                project(&mut trial);
                if let Some(v) = objective(&trial) {
                    if v.is_finite() && v > fx {
                        fx = v;
                        x.copy_from_slice(&trial);
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-7 {
                break;
            }
        }
    }
    (x, fx)
}

/// Largest objective value over a fresh sample set (no refinement).
pub fn sample_max<S, F>(samples: usize, seed: u64, mut sample: S, objective: F) -> (f64, Option<Vec<f64>>)
where
    S: FnMut(&mut SeededRng) -> Vec<f64>,
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let mut r = rng(seed);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| sample(&mut r)).collect();
    let values: Vec<Option<f64>> = points.par_iter().map(|x| objective(x).filter(|v| v.is_finite())).collect();
    let mut best = f64::NEG_INFINITY;
    let mut arg = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if *v > best {
                best = *v;
                arg = Some(points[i].clone());
            }
        }
    }
    (best, arg)
}
