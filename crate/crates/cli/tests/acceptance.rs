//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use thermoqc_cli::commands::DriftingLaminate;
use thermoqc_core::constitutive::{
    appendix_a_check, build_model, lemma41_bounds_report, AuditOptions, ModelSpec, Quadratic, RankOneDefective, State,
};
use thermoqc_core::diagnostics::weak_strong_experiment;
use thermoqc_core::fields::Grid;
use thermoqc_core::quasiconvexity::{
    delocalized_hessian_check, garding_batch, garding_check, garding_estimate_constants, minimize_qc_quotient, BackgroundField,
    GardingOptions, QcOptions, QcStatus,
};
use thermoqc_core::solver::{clausius_duhem_residual, manufactured_solution, simulate, FlowState, ManufacturedKind, SolverConfig};
use thermoqc_core::symmetrizer::{check_symmetrizability, entropy_pair_residual, symmetrizer_matrix, SymmetrizerMode};
use thermoqc_core::tensor::Mat;
use thermoqc_core::witness::{replay, Witness, WitnessData};
use thermoqc_core::young_measure::{
    concentration_mass, empirical_young_measure, mv_residuals, time_localize, EmpiricalYoungMeasure, Generator, LocalizeOptions,
    SequenceSpec, Subspace,
};

type Checks = Vec<(bool, String)>;
type Outcome = Result<Checks, Box<dyn std::error::Error>>;

const CATALOGUE: [&str; 4] = ["quadratic", "powerlaw", "polyconvex", "rank1defective"];

fn check(cond: bool, msg: String) -> (bool, String) {
    (cond, msg)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c1_symmetrizer() -> Outcome {
    let q = Quadratic::model(2, 1.0);
    let s = symmetrizer_matrix(&q, &Mat::zeros(2), 0.0)?;
    let mut dev = 0.0f64;
    for i in 0..s.size {
        for j in 0..s.size {
            dev = dev.max((s.at(i, j) - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let mut out = vec![check(dev <= 1e-10, format!("quadratic symmetrizer - I = {dev:.1e}"))];
    for name in CATALOGUE {
        let m = build_model(&ModelSpec::new(name))?;
        let r = entropy_pair_residual(&m, 100, 11)?;
        out.push(check(r.max_residual <= 1e-5, format!("{name} pair residual {:.1e}", r.max_residual)));
    }
    Ok(out)
}

fn c2_wave_cone() -> Outcome {
    let mut out = Vec::new();
    for (beta, positive) in [(0.5, true), (2.0, false)] {
        let m = RankOneDefective::model(2, beta, &[1.0, 0.0], &[0.0, 1.0], 1.0)?;
        let spec = m.spec();
        let rest = State::rest(2);
        let r = check_symmetrizability(&m, &rest, SymmetrizerMode::WaveCone, 256, 0)?;
        let cone = r.min_quotient_cone;
        let ok = if positive { cone >= 0.2 / r.theta } else { cone <= -0.4 / r.theta };
        let w = Witness { model: spec.expect("catalogue model"), data: WitnessData::WaveCone { f: rest.f, eta: rest.eta, direction: r.witness.clone() }, recorded: cone };
        let gap = (w.evaluate()? - cone).abs();
        out.push(check(ok && gap <= 1e-8, format!("beta={beta}: cone min {cone:.4} (theta {:.2}), witness gap {gap:.1e}", r.theta)));
    }
    Ok(out)
}

fn c3_quasiconvexity() -> Outcome {
    let grid = Grid::new(2, 64)?;
    let opts = QcOptions::new(grid);
    let q = Quadratic::model(2, 1.0);
    let rq = minimize_qc_quotient(&q, &Mat::identity(2), 0.5, &opts)?;
    let mut out = vec![check((rq.c0_estimate - 0.25).abs() <= 5e-3, format!("quadratic c0 {:.5}", rq.c0_estimate))];
    let bad = build_model(&ModelSpec::new("rank1defective").with("beta", 2.0))?;
    let rb = minimize_qc_quotient(&bad, &Mat::identity(2), 0.5, &opts)?;
    let w = Witness {
        model: bad.spec().expect("catalogue model"),
        data: WitnessData::QcQuotient { lambda1: rb.lambda1, lambda2: rb.lambda2, field: rb.witness.clone() },
        recorded: rb.c0_estimate,
    };
    let dir = tempfile::tempdir()?;
    w.write(dir.path())?;
    let v = replay(dir.path())?;
    out.push(check(
        rb.status == QcStatus::Counterexample && rb.c0_estimate <= -0.2 && v.confirmed && v.recomputed == v.recorded,
        format!("rank1defective(2) quotient {:.4}, replay {}", rb.c0_estimate, v.recomputed),
    ));
    Ok(out)
}

fn c4_garding() -> Outcome {
    let q = Quadratic::model(2, 1.0);
    let grid = Grid::new(2, 32)?;
    let backgrounds = [
        BackgroundField::constant(grid, &Mat::identity(2), 0.5)?,
        BackgroundField::oscillatory(grid, &Mat::identity(2), &Mat::identity(2), 0.5, 0.3, 1.0)?,
        BackgroundField::oscillatory(grid, &Mat::zeros(2), &Mat::identity(2), 1.0, 0.8, 2.0)?,
    ];
    let fresh = garding_batch(grid, 200, 4242)?;
    let mut out = Vec::new();
    for (i, bg) in backgrounds.iter().enumerate() {
        let r = garding_check(&q, bg, 4.0, 0.0, &fresh)?;
        out.push(check(r.min_margin >= -1e-8, format!("bg{i} (4,0) min margin {:.1e}", r.min_margin)));
    }
    let est = garding_estimate_constants(&q, &backgrounds[1], &GardingOptions::default())?;
    out.push(check(est.verified && est.c0 <= 4.5, format!("estimated C0 {:.3} C1 {} verified {}", est.c0, est.c1, est.verified)));
    Ok(out)
}

fn c5_delocalized() -> Outcome {
    let grid = Grid::new(2, 32)?;
    let ladder: Vec<f64> = (0..=40).map(|i| if i == 0 { 0.0 } else { 1e-2 * 1.3f64.powi(i) }).collect();
    let mut out = Vec::new();
    let q = Quadratic::model(2, 1.0);
    let bg = BackgroundField::oscillatory(grid, &Mat::identity(2), &Mat::identity(2), 0.5, 0.3, 2.0)?;
    let r = delocalized_hessian_check(&q, &bg, &ladder, 16, 1)?;
    out.push(check(r.smallest_feasible == Some(0.0), format!("quadratic C_pen {:?}", r.smallest_feasible)));
    let pl = build_model(&ModelSpec::new("powerlaw"))?;
    let mut feas = Vec::new();
    let mut lips = Vec::new();
    for k in [1.0, 2.0, 3.0] {
        let bg = BackgroundField::oscillatory(grid, &Mat::identity(2), &Mat::identity(2), 0.5, 0.2, k)?;
        let r = delocalized_hessian_check(&pl, &bg, &ladder, 16, 1)?;
        lips.push(bg.lipschitz);
        feas.push(r.smallest_feasible.unwrap_or(f64::INFINITY));
    }
    let monotone = lips.windows(2).all(|w| w[1] > w[0]) && feas.windows(2).all(|w| w[1] >= w[0]) && feas.iter().all(|c| c.is_finite());
    out.push(check(monotone, format!("powerlaw C_pen {feas:?} at Lipschitz {lips:.2?}")));
    Ok(out)
}

fn c6_solver() -> Outcome {
    let m = Quadratic::model(1, 1.0);
    let wave = manufactured_solution(ManufacturedKind::LinearWave, &m, 0.1, 0.0)?;
    let ns = [64usize, 128, 256, 512];
    let (mut errs, mut cds, mut drift, mut steps) = (Vec::new(), Vec::new(), 0.0f64, 0);
    for &n in &ns {
        let g = Grid::new(1, n)?;
        let mut cfg = SolverConfig::new(g, 1.0);
        cfg.record_every = usize::MAX;
        let init = wave.sample(g, 0.0)?;
        let tr = simulate(&m, &init, &cfg)?;
        let ex = wave.sample(g, 1.0)?;
        errs.push(tr.last().w.iter().zip(&ex.w).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64);
        cds.push(clausius_duhem_residual(&m, &tr, None)?.average_mean().abs());
        if n == 512 {
            steps = tr.steps;
            drift = init.means().iter().zip(tr.last().means()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        }
    }
    let hs: Vec<f64> = ns.iter().map(|n| 1.0 / *n as f64).collect();
    let order = loglog_slope(&hs, &errs);
    let cd_order = loglog_slope(&hs, &cds);
    let pl = build_model(&ModelSpec::new("powerlaw").with("dim", 1))?;
    let g = Grid::new(1, 256)?;
    let init = FlowState::from_primitive(&pl, g, |x| State::new(Mat::from_slice(1, &[1.0 + 0.5 * (2.0 * PI * x[0]).sin()]), vec![0.0], 0.5))?;
    let tr = simulate(&pl, &init, &SolverConfig::new(g, 0.5))?;
    let shock = clausius_duhem_residual(&pl, &tr, None)?;
    Ok(vec![
        check(order >= 0.9, format!("L1 order {order:.3} (errors {})", sci(&errs))),
        check(steps >= 1000 && drift <= 1e-10, format!("cell-mean drift {drift:.1e} over {steps} steps")),
        check(cd_order >= 0.8 && cds.windows(2).all(|w| w[1] < w[0]), format!("CD mean residual order {cd_order:.2}")),
        check(shock.worst_mean() > 0.0, format!("shock entropy production min mean {:.3e}", shock.worst_mean())),
    ])
}

fn c7_weak_strong() -> Outcome {
    let m = Quadratic::model(1, 1.0);
    let r = weak_strong_experiment(&m, ManufacturedKind::LinearWave, &[0.0, 1e-3, 1e-2, 1e-1], &[128, 256, 512], 0.5, 1)?;
    let at256 = r.unperturbed_sup.iter().find(|x| x.0 == 256).map_or(f64::INFINITY, |x| x.1);
    let decreasing = r.unperturbed_sup.windows(2).all(|w| w[1].1 < w[0].1);
    let expo = r.delta_exponent.unwrap_or(f64::NAN);
    let spread = r.c_spread.iter().map(|x| x.1).fold(0.0, f64::max);
    Ok(vec![
        check(at256 <= 1e-4 && decreasing, format!("delta=0 sup I {at256:.2e} at n=256, decreasing {decreasing}")),
        check((expo - 2.0).abs() <= 0.05, format!("I(0) ~ delta^{expo:.3}")),
        check(spread <= 0.2, format!("Gronwall constant spread {spread:.3}")),
        check(r.validation_ratio <= 1.1, format!("validation ratio {:.3}", r.validation_ratio)),
    ])
}

fn c8_audit() -> Outcome {
    let opts = AuditOptions::default();
    let mut out = Vec::new();
    for name in CATALOGUE {
        let m = build_model(&ModelSpec::new(name))?;
        let l = lemma41_bounds_report(&m, &opts);
        let a = appendix_a_check(&m, &opts);
        let fits: Vec<_> = l.constants().into_iter().chain(a.fits()).collect();
        let bad: Vec<String> = fits.iter().filter(|c| !(c.stable && c.holdout_ok)).map(|c| c.name.clone()).collect();
        let worst = fits.iter().map(|c| c.relative_change).fold(0.0, f64::max);
        out.push(check(bad.is_empty(), format!("{name}: {} constants, worst change {worst:.3}, failing {bad:?}", fits.len())));
    }
    Ok(out)
}

fn c9_young() -> Outcome {
    let grid = Grid::new(1, 16)?;
    let subgrid = 32;
    let lam = SequenceSpec {
        generator: Generator::Laminate { a: vec![1.0, 0.5], b: vec![-1.0, 0.5], lattice: vec![1], fraction: 0.25 },
        scales: vec![0.125, 0.0625, 0.03125],
        subgrid,
        subspace: Subspace::FEta,
    };
    let nu = empirical_young_measure(&lam, grid)?;
    let mut gap = 0.0f64;
    for cell in &nu.atoms {
        for (p, w) in [(1.0, 0.25), (-1.0, 0.75)] {
            let got = cell.iter().filter(|a| (a.point[0] - p).abs() < 1e-9).map(|a| a.weight).sum::<f64>();
            gap = gap.max((got - w).abs());
        }
    }
    let mut out = vec![check(gap <= 2.0 / subgrid as f64, format!("laminate weight gap {gap:.1e}"))];

    let conc = SequenceSpec {
        generator: Generator::Concentrator { base: vec![0.0, 0.0, 0.0], mass: 0.5 },
        scales: vec![1.0 / 256.0, 1.0 / 512.0, 1.0 / 1024.0],
        subgrid: 8,
        subspace: Subspace::Full,
    };
    let q = Quadratic::model(1, 1.0);
    let nu = empirical_young_measure(&conc, grid)?;
    let c = concentration_mass(&conc, &nu, &q)?;
    let in_first = c.gamma.data()[0];
    out.push(check((c.total - 0.5).abs() <= 0.05 && (in_first - c.total).abs() <= 1e-9, format!("concentration total {:.4}, cell 0 {:.4}", c.total, in_first)));

    let wave = manufactured_solution(ManufacturedKind::LinearWave, &q, 0.1, 0.0)?;
    let mut res = Vec::new();
    let mut drift_mom = 0.0;
    for n in [64usize, 128, 256] {
        let g = Grid::new(1, n)?;
        let mut cfg = SolverConfig::new(g, 0.5);
        cfg.record_every = usize::MAX;
        cfg.record_interval = Some(0.01);
        let tr = simulate(&q, &wave.sample(g, 0.0)?, &cfg)?;
        let series: Vec<(f64, EmpiricalYoungMeasure)> =
            tr.times.iter().zip(&tr.states).map(|(t, s)| (*t, EmpiricalYoungMeasure::atomic(s, Subspace::Full))).collect();
        let r = mv_residuals(&series, None, &q, None, 16)?;
        res.push((n, r.max_equality().max(r.max_violation())));
        if n == 256 {
            let mut drift = series.clone();
            for (t, nu) in drift.iter_mut() {
                for cell in nu.atoms.iter_mut() {
                    cell[0].point[1] += 0.01 * *t;
                }
            }
            drift_mom = mv_residuals(&drift, None, &q, None, 16)?.momentum;
        }
    }
    let c_dx = res.iter().map(|(n, r)| r * *n as f64).fold(0.0, f64::max);
    let bounded = res.iter().all(|(n, r)| *r <= c_dx / *n as f64) && res.windows(2).all(|w| w[1].1 < w[0].1);
    out.push(check(bounded, format!("atomic residuals {}, C = {c_dx:.3}", sci(&res.iter().map(|x| x.1).collect::<Vec<_>>()))));
    let clean = res.last().unwrap().1;
    out.push(check(drift_mom > 2.0 * clean, format!("momentum violation {drift_mom:.2e} vs clean {clean:.2e}")));
    Ok(out)
}

fn c10_localize() -> Outcome {
    let scales = vec![0.25, 0.125, 0.0625];
    let input = DriftingLaminate { dim: 2, fraction: 0.25, rate: 0.2, t0: 0.5, periods: scales.clone() };
    let mut opts = LocalizeOptions::new(0.5, Grid::new(2, 16)?, scales);
    opts.subgrid = 16;
    let loc = time_localize(&input, &opts)?;
    let r = &loc.report;
    Ok(vec![
        check(r.weight_gap <= 2.0 / 16.0, format!("weight gap {:.1e}", r.weight_gap)),
        check(r.curl_max <= 1e-10, format!("curl {:.1e}", r.curl_max)),
        check(r.lp_decreasing, format!("L^p distances {}", sci(&r.lp_distances))),
    ])
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "symmetrizer structure", c1_symmetrizer),
        (2, "wave-cone detection", c2_wave_cone),
        (3, "quasiconvexity certification", c3_quasiconvexity),
        (4, "garding inequality", c4_garding),
        (5, "delocalized hessian", c5_delocalized),
        (6, "solver verification", c6_solver),
        (7, "weak-strong uniqueness", c7_weak_strong),
        (8, "relative-quantity and growth constants", c8_audit),
        (9, "young measures", c9_young),
        (10, "time localization", c10_localize),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(checks) => (checks.iter().all(|c| c.0), checks.into_iter().map(|c| if c.0 { c.1 } else { format!("FAILED {}", c.1) }).collect::<Vec<_>>().join("; ")),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {id:>2} {:<40} {} ({:.1}s) {detail}", name, if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
