//! One function per subcommand. Each returns its artifacts in memory; writing
//! them is left to the caller.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use thermoqc_core::constitutive::{appendix_a_check, check_growth_hypotheses, lemma41_bounds_report, AuditOptions, ConstantFit, State};
use thermoqc_core::diagnostics::weak_strong_experiment;
use thermoqc_core::error::Error;
use thermoqc_core::fields::{BoundaryMode, Grid};
use thermoqc_core::quasiconvexity::{
    delocalized_hessian_check, garding_batch, garding_check, garding_estimate_constants, minimize_qc_quotient, BackgroundField,
    GardingOptions, QcOptions, QcStatus,
};
use thermoqc_core::solver::{clausius_duhem_residual, manufactured_solution, simulate, FlowState, ManufacturedKind, SolverConfig};
use thermoqc_core::symmetrizer::{check_symmetrizability, entropy_pair_residual, SymmetrizerMode};
use thermoqc_core::tensor::Mat;
use thermoqc_core::witness::{replay, Witness, WitnessData};
use thermoqc_core::young_measure::{
    barycenter, concentration_mass, empirical_young_measure, encode_eym_csv, time_localize, Generator, LocalizeOptions, SequenceSpec,
    SpaceTimeInput, Subspace,
};

use crate::config::{Command, ConfigError, ExperimentConfig};
use crate::svg::{line_chart, Scale, Series};
use crate::CliError;

/// In-memory artifacts of one run.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub report: String,
    pub data_csv: String,
    pub plot: Option<String>,
    pub witness: Option<Witness>,
    /// Additional named files.
    pub extra: Vec<(String, Vec<u8>)>,
    pub passed: bool,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn matrix(cfg: &ExperimentConfig, key: &str, d: usize) -> Result<Mat, CliError> {
    let s = cfg.get(key);
    if s == "identity" {
        return Ok(Mat::identity(d));
    }
    let v = cfg.list(key)?;
    match v.len() {
        1 => Ok(Mat::scalar_multiple(d, v[0])),
        l if l == d * d => Ok(Mat::from_slice(d, &v)),
        _ => Err(ConfigError::Invalid(format!("{key} needs 1 or {} entries", d * d)).into()),
    }
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    match cfg.command {
        Command::Symmetrize => symmetrize(cfg),
        Command::QcCheck => qc_check(cfg),
        Command::Garding => garding(cfg),
        Command::Simulate => simulate_cmd(cfg),
        Command::WeakStrong => weak_strong(cfg),
        Command::Young => young(cfg),
        Command::Localize => localize(cfg),
        Command::AuditModel => audit_model(cfg),
        Command::Replay => replay_cmd(cfg),
    }
}

fn symmetrize(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let f = matrix(cfg, "F", d)?;
    let eta = cfg.f64("eta")?;
    let mode = SymmetrizerMode::parse(cfg.get("mode")).ok_or_else(|| ConfigError::Invalid(format!("mode={}", cfg.get("mode"))))?;
    let seed = cfg.u64("seed")?;
    let res = check_symmetrizability(&model, &State::new(f, vec![0.0; d], eta), mode, cfg.usize("dirs")?, seed)?;
    let pair = entropy_pair_residual(&model, cfg.usize("samples")?, seed)?;
    let tol = cfg.f64("tol")?;
    let positive = res.value() >= -tol;
    let pair_ok = pair.max_residual <= cfg.f64("pair_tol")?;
    let mut out = RunOutput { passed: positive && pair_ok, ..Default::default() };
    let mut r = String::new();
    let _ = writeln!(r, "symmetrizer at F={:?} eta={}", f.as_slice(), num(eta));
    let _ = writeln!(r, "theta = {}", num(res.theta));
    let _ = writeln!(r, "smallest eigenvalue = {}", num(res.min_eig_full));
    let _ = writeln!(r, "wave-cone minimum = {}", num(res.min_quotient_cone));
    let _ = writeln!(r, "mode {} value = {} ({})", mode.as_str(), num(res.value()), if positive { "positive" } else { "negative" });
    let _ = writeln!(r, "entropy-pair residual over {} states = {} ({})", pair.samples, num(pair.max_residual), if pair_ok { "ok" } else { "too large" });
    out.data_csv.push_str("row,col,value\n");
    for i in 0..res.size {
        for j in 0..res.size {
            let _ = writeln!(out.data_csv, "{i},{j},{}", num(res.at(i, j)));
        }
    }
    if !positive {
        let mut w = Witness {
            model: cfg.model.clone().unwrap(),
            data: WitnessData::WaveCone { f, eta, direction: res.witness.clone() },
            recorded: 0.0,
        };
        w.recorded = w.evaluate()?;
        let _ = writeln!(r, "witness direction {:?} value {}", res.witness, num(w.recorded));
        out.witness = Some(w);
    }
    out.report = r;
    Ok(out)
}

fn qc_check(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let grid = Grid::new(d, cfg.usize("n")?)?;
    let lambda1 = matrix(cfg, "F", d)?;
    let lambda2 = cfg.f64("eta")?;
    let mut opts = QcOptions::new(grid);
    opts.modes = cfg.usize("modes")?;
    opts.iters = cfg.usize("iters")?;
    opts.amplitudes = cfg.list("amplitudes")?;
    opts.seed = cfg.u64("seed")?;
    opts.mode = BoundaryMode::parse(cfg.get("boundary")).ok_or_else(|| ConfigError::Invalid(format!("boundary={}", cfg.get("boundary"))))?;
    opts.smoothing = cfg.f64("smoothing")?;
    let rep = minimize_qc_quotient(&model, &lambda1, lambda2, &opts)?;
    let mut out = RunOutput { passed: rep.status != QcStatus::Counterexample, ..Default::default() };
    let mut r = String::new();
    let _ = writeln!(r, "quasiconvexity quotient at F={:?} eta={} on n={} d={}", lambda1.as_slice(), num(lambda2), grid.n(), d);
    let _ = writeln!(r, "c0 estimate = {}", num(rep.c0_estimate));
    let _ = writeln!(r, "status = {}", rep.status.as_str());
    let _ = writeln!(r, "evaluations = {}", rep.evaluations);
    out.data_csv.push_str("amplitude,min_quotient\n");
    for (a, q) in &rep.by_amplitude {
        let _ = writeln!(out.data_csv, "{},{}", num(*a), num(*q));
    }
    out.plot = Some(line_chart(
        "smallest quotient per amplitude",
        "amplitude",
        "quotient",
        &[Series { label: "min quotient".into(), points: rep.by_amplitude.clone() }],
        Scale::Log,
        Scale::Linear,
    ));
    if rep.status == QcStatus::Counterexample {
        let mut w = Witness {
            model: cfg.model.clone().unwrap(),
            data: WitnessData::QcQuotient { lambda1, lambda2, field: rep.witness.clone() },
            recorded: 0.0,
        };
        w.recorded = w.evaluate()?;
        let _ = writeln!(r, "counterexample quotient (replayed) = {}", num(w.recorded));
        out.witness = Some(w);
    }
    out.report = r;
    Ok(out)
}

fn background(cfg: &ExperimentConfig, grid: Grid) -> Result<BackgroundField, CliError> {
    let d = grid.dim();
    let f = matrix(cfg, "F", d)?;
    let eta = cfg.f64("eta")?;
    match cfg.get("background") {
        "constant" => Ok(BackgroundField::constant(grid, &f, eta)?),
        "oscillatory" => Ok(BackgroundField::oscillatory(grid, &f, &Mat::identity(d), eta, cfg.f64("A")?, cfg.f64("wavenumber")?)?),
        other => Err(ConfigError::Invalid(format!("background={other}")).into()),
    }
}

fn garding(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let grid = Grid::new(d, cfg.usize("n")?)?;
    let bg = background(cfg, grid)?;
    bg.validate(&model)?;
    let seed = cfg.u64("seed")?;
    let mut out = RunOutput::default();
    let mut r = String::new();
    let _ = writeln!(r, "background {} on n={} d={}, K={} L={}", cfg.get("background"), grid.n(), d, num(bg.k), num(bg.lipschitz));
    match cfg.get("task") {
        "check" => {
            let (c0, c1) = (cfg.f64("c0")?, cfg.f64("c1")?);
            let batch = garding_batch(grid, cfg.usize("budget")?, seed)?;
            let rep = garding_check(&model, &bg, c0, c1, &batch)?;
            let _ = writeln!(r, "garding check with C0={} C1={}", num(c0), num(c1));
            let _ = writeln!(r, "fields = {}, min margin = {}, violations = {}", batch.len(), num(rep.min_margin), rep.violations);
            out.data_csv.push_str("field,margin\n");
            for (i, m) in rep.margins.iter().enumerate() {
                let _ = writeln!(out.data_csv, "{i},{}", num(*m));
            }
            out.passed = rep.passed();
            if let (false, Some(i)) = (rep.passed(), rep.worst_index) {
                let mut w = Witness {
                    model: cfg.model.clone().unwrap(),
                    data: WitnessData::GardingMargin { background: bg.clone(), c0, c1, field: batch[i].clone() },
                    recorded: 0.0,
                };
                w.recorded = w.evaluate()?;
                out.witness = Some(w);
            }
        }
        "estimate" => {
            let opts = GardingOptions {
                budget: cfg.usize("budget")?,
                seed,
                iters: cfg.usize("iters")?,
                holdout: cfg.usize("holdout")?,
                ..GardingOptions::default()
            };
            let est = garding_estimate_constants(&model, &bg, &opts)?;
            let _ = writeln!(r, "estimated C0={} C1={} verified={}", num(est.c0), num(est.c1), est.verified);
            let _ = writeln!(r, "worst margin/D = {}, hold-out min margin = {}", num(est.worst_margin), num(est.holdout_min_margin));
            let _ = writeln!(r, "adversarial batch size = {}", est.batch_size);
            out.data_csv.push_str("c0,c1,worst_margin_ratio\n");
            for (a, b, m) in &est.evidence {
                let _ = writeln!(out.data_csv, "{},{},{}", num(*a), num(*b), num(*m));
            }
            out.passed = est.verified;
            if let Some(field) = est.witness {
                let mut w = Witness {
                    model: cfg.model.clone().unwrap(),
                    data: WitnessData::GardingMargin { background: bg.clone(), c0: est.c0, c1: est.c1, field },
                    recorded: 0.0,
                };
                w.recorded = w.evaluate()?;
                out.witness = Some(w);
            }
        }
        "delocalized" => {
            let grid_c = cfg.list("cpen")?;
            let rep = delocalized_hessian_check(&model, &bg, &grid_c, cfg.usize("fields")?, seed)?;
            let _ = writeln!(r, "delta={} c={} c'={} exact C*={} ({} Fourier modes)", num(rep.delta), num(rep.c), num(rep.c_prime), num(rep.c_star), rep.fourier_modes);
            match rep.smallest_feasible {
                Some(c) => {
                    let _ = writeln!(r, "smallest feasible C_pen = {}", num(c));
                }
                None => {
                    let _ = writeln!(r, "no feasible C_pen on the grid");
                }
            }
            out.data_csv.push_str("c_pen,worst_ratio,violations\n");
            for (c, w, v) in &rep.candidates {
                let _ = writeln!(out.data_csv, "{},{},{v}", num(*c), num(*w));
            }
            out.passed = rep.smallest_feasible.is_some();
        }
        other => return Err(ConfigError::Invalid(format!("task={other}")).into()),
    }
    out.report = r;
    Ok(out)
}

fn simulate_cmd(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let grid = Grid::new(d, cfg.usize("n")?)?;
    let a = cfg.f64("A")?;
    let eta = cfg.f64("eta")?;
    let t_end = cfg.f64("t")?;
    let mut sc = SolverConfig::new(grid, t_end);
    sc.cfl = cfg.f64("cfl")?;
    sc.viscosity_eps = cfg.f64("viscosity")?;
    sc.record_every = usize::MAX;
    sc.record_interval = Some(cfg.f64("record")?);
    let mut exact = None;
    let init = match cfg.get("init") {
        "wave" | "mms" => {
            let kind = ManufacturedKind::parse(cfg.get("init")).unwrap();
            let sol = manufactured_solution(kind, &model, a, if kind == ManufacturedKind::Mms { 0.1 } else { 0.0 })?;
            sc.extra_source = sol.source_fn();
            let init = sol.sample(grid, 0.0)?;
            exact = Some(sol);
            init
        }
        "shock" | "smooth" => {
            let amp = if cfg.get("init") == "shock" { a } else { a * 0.1 };
            FlowState::from_primitive(&model, grid, |x| {
                let mut f = Mat::identity(d);
                f.set(0, 0, 1.0 + amp * (2.0 * PI * x[0]).sin());
                State::new(f, vec![0.0; d], eta)
            })?
        }
        other => return Err(ConfigError::Invalid(format!("init={other}")).into()),
    };
    let tr = simulate(&model, &init, &sc)?;
    let cd = clausius_duhem_residual(&model, &tr, None)?;
    let e0 = tr.diagnostics[0].total_energy;
    let mut out = RunOutput::default();
    out.data_csv.push_str("t,total_energy,energy_drift,total_entropy,min_theta,curl_residual,cd_residual\n");
    let mut drift = Vec::new();
    for dg in &tr.diagnostics {
        let _ = writeln!(
            out.data_csv,
            "{},{},{},{},{},{},{}",
            num(dg.t),
            num(dg.total_energy),
            num(dg.total_energy - e0),
            num(dg.total_entropy),
            num(dg.min_theta),
            num(dg.curl_residual),
            num(dg.cd_residual)
        );
        drift.push((dg.t, dg.total_energy - e0));
    }
    let tol = cfg.f64("tol")?;
    let worst_cd = cd.worst_mean();
    let mut r = String::new();
    let _ = writeln!(r, "simulate init={} n={} d={} t_end={} steps={}", cfg.get("init"), grid.n(), d, num(t_end), tr.steps);
    let _ = writeln!(r, "energy drift = {}", num(tr.diagnostics.last().unwrap().total_energy - e0));
    let _ = writeln!(r, "mean entropy production: average {} worst {}", num(cd.average_mean()), num(worst_cd));
    if let Some(sol) = &exact {
        let ex = sol.sample(grid, tr.times.last().copied().unwrap_or(0.0))?;
        let l1 = tr.last().w.iter().zip(&ex.w).map(|(x, y)| (x - y).abs()).sum::<f64>() / grid.cells() as f64;
        let _ = writeln!(r, "L1 error against the exact solution = {}", num(l1));
    }
    out.passed = worst_cd >= -tol;
    out.report = r;
    out.plot = Some(line_chart("energy drift", "t", "E(t) - E(0)", &[Series { label: "drift".into(), points: drift }], Scale::Linear, Scale::Linear));
    Ok(out)
}

fn weak_strong(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    let kind = ManufacturedKind::parse(cfg.get("reference")).ok_or_else(|| ConfigError::Invalid(format!("reference={}", cfg.get("reference"))))?;
    let deltas = cfg.list("deltas")?;
    let meshes = cfg.usize_list("meshes")?;
    let rep = weak_strong_experiment(&model, kind, &deltas, &meshes, cfg.f64("t")?, cfg.u64("seed")?)?;
    let tol = cfg.f64("tol")?;
    let mut out = RunOutput { passed: rep.uniqueness_holds(tol), ..Default::default() };
    let mut r = String::new();
    for (n, s) in &rep.unperturbed_sup {
        let _ = writeln!(r, "delta=0 n={n}: sup I_total = {}", num(*s));
    }
    if let Some(e) = rep.delta_exponent {
        let _ = writeln!(r, "I_total(0) ~ delta^{}", num(e));
    }
    for (dl, c) in &rep.growth_fit {
        let _ = writeln!(r, "delta={}: fitted growth rate {}", num(*dl), num(*c));
    }
    for (dl, s) in &rep.c_spread {
        let _ = writeln!(r, "delta={}: Gronwall constant spread {}", num(*dl), num(*s));
    }
    let _ = writeln!(r, "validation ratio = {}", num(rep.validation_ratio));
    let _ = writeln!(r, "uniqueness (tol {}) = {}", num(tol), out.passed);
    out.data_csv.push_str("delta,n,t,i_total\n");
    let mut series = Vec::new();
    for run in &rep.runs {
        for (t, i) in run.series.times.iter().zip(&run.series.i_total) {
            let _ = writeln!(out.data_csv, "{},{},{},{}", num(run.delta), run.n, num(*t), num(*i));
        }
        series.push(Series {
            label: format!("delta={} n={}", run.delta, run.n),
            points: run.series.times.iter().copied().zip(run.series.i_total.iter().copied()).collect(),
        });
    }
    out.plot = Some(line_chart("relative entropy", "t", "I_total", &series, Scale::Linear, Scale::Log));
    out.report = r;
    Ok(out)
}

fn young(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let grid = Grid::new(d, cfg.usize("n")?)?;
    let eta = cfg.f64("eta")?;
    let scales = cfg.list("scales")?;
    let subgrid = cfg.usize("subgrid")?;
    let fm = |s: f64| -> Vec<f64> { Mat::scalar_multiple(d, s).as_slice()[..d * d].to_vec() };
    let spec = match cfg.get("generator") {
        "laminate" => {
            let lattice: Vec<i64> = cfg.list("lattice")?.iter().map(|x| *x as i64).collect();
            let lattice = if lattice.len() == 1 && d > 1 { (0..d).map(|i| if i == 0 { lattice[0] } else { 0 }).collect() } else { lattice };
            let mut a = fm(cfg.f64("A")?);
            a.push(eta);
            let mut b = fm(cfg.f64("B")?);
            b.push(eta);
            SequenceSpec { generator: Generator::Laminate { a, b, lattice, fraction: cfg.f64("fraction")? }, scales, subgrid, subspace: Subspace::FEta }
        }
        "concentrator" => {
            let mut base = fm(cfg.f64("A")?);
            base.extend(vec![0.0; d]);
            base.push(eta);
            SequenceSpec { generator: Generator::Concentrator { base, mass: cfg.f64("mass")? }, scales, subgrid, subspace: Subspace::Full }
        }
        other => return Err(ConfigError::Invalid(format!("generator={other}")).into()),
    };
    let nu = empirical_young_measure(&spec, grid)?;
    let bar = barycenter(&nu)?;
    let conc = concentration_mass(&spec, &nu, &model)?;
    let mut out = RunOutput { passed: conc.cauchy && conc.clamped == 0, ..Default::default() };
    let max_atoms = nu.atoms.iter().map(Vec::len).max().unwrap_or(0);
    let mut r = String::new();
    let _ = writeln!(r, "young measure: generator={} n={} d={} subgrid={}", cfg.get("generator"), grid.n(), d, subgrid);
    let _ = writeln!(r, "max atoms per cell = {max_atoms}");
    let _ = writeln!(r, "concentration total = {} (clamped {}, cauchy {})", num(conc.total), conc.clamped, conc.cauchy);
    let _ = writeln!(r, "energies per scale = {:?}", conc.energies);
    out.data_csv.push_str("cell,atoms,barycenter_f00,barycenter_eta,gamma\n");
    for c in 0..grid.cells() {
        let _ = writeln!(out.data_csv, "{c},{},{},{},{}", nu.atoms[c].len(), num(bar.f.cell(c)[0]), num(bar.eta.cell(c)[0]), num(conc.gamma.data()[c]));
    }
    out.extra.push(("atoms.csv".into(), encode_eym_csv(&nu).into_bytes()));
    out.report = r;
    Ok(out)
}

/// Space laminate along `e₁` with a volume fraction drifting linearly in time.
pub struct DriftingLaminate {
    pub dim: usize,
    pub fraction: f64,
    pub rate: f64,
    pub t0: f64,
    /// Laminate period of member `k`.
    pub periods: Vec<f64>,
}

impl DriftingLaminate {
    fn lambda(&self, t: f64) -> f64 {
        self.fraction + self.rate * (t - self.t0)
    }
}

impl SpaceTimeInput for DriftingLaminate {
    fn dim(&self) -> usize {
        self.dim
    }
    fn window(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn gradient(&self, k: usize, t: f64, x: &[f64]) -> Option<Mat> {
        let delta = *self.periods.get(k)?;
        let lam = self.lambda(t);
        let chi = if (x[0] / delta).rem_euclid(1.0) < lam { 1.0 } else { 0.0 };
        let d = self.dim;
        let mut f = Mat::identity(d);
        let a = [0.5, -0.3, 0.2];
        for i in 0..d {
            f.set(i, 0, f.get(i, 0) + a[i] * (chi - lam));
        }
        Some(f)
    }
    fn entropy(&self, _k: usize, t: f64, _x: &[f64]) -> Option<f64> {
        Some(0.5 + 0.1 * t)
    }
    fn limit_displacement(&self, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }
}

fn localize(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let d = cfg.usize("dim")?;
    let grid = Grid::new(d, cfg.usize("n")?)?;
    let scales = cfg.list("scales")?;
    let subgrid = cfg.usize("subgrid")?;
    let t0 = cfg.f64("t0")?;
    let input = DriftingLaminate { dim: d, fraction: cfg.f64("fraction")?, rate: cfg.f64("rate")?, t0, periods: scales.clone() };
    let mut opts = LocalizeOptions::new(t0, grid, scales.clone());
    opts.subgrid = subgrid;
    opts.time_samples = cfg.usize("time_samples")?;
    opts.n_trunc = cfg.f64("n_trunc")?;
    opts.p = cfg.f64("p")?;
    let loc = time_localize(&input, &opts)?;
    let rep = &loc.report;
    let weights_ok = rep.weight_gap <= 2.0 / subgrid as f64;
    let curl_ok = rep.curl_max <= 1e-10;
    let mut out = RunOutput { passed: weights_ok && curl_ok && rep.lp_decreasing, ..Default::default() };
    let mut r = String::new();
    let _ = writeln!(r, "time localization at t0={} on n={} d={} subgrid={}", num(t0), grid.n(), d, subgrid);
    let _ = writeln!(r, "per-cell W1 to the slice = {}", num(rep.w1_max));
    let _ = writeln!(r, "weight gap = {} (bound {})", num(rep.weight_gap), num(2.0 / subgrid as f64));
    let _ = writeln!(r, "curl of projected gradients = {}", num(rep.curl_max));
    let _ = writeln!(r, "V_p/V_q integral gap over the last two members = {}", num(rep.cauchy_gap));
    let _ = writeln!(r, "L^p distances {:?} decreasing={}", rep.lp_distances, rep.lp_decreasing);
    let _ = writeln!(r, "truncated cells = {}", rep.truncated);
    out.data_csv.push_str("member,scale,v_integral,lp_distance\n");
    for (k, s) in scales.iter().enumerate() {
        let _ = writeln!(out.data_csv, "{k},{},{},{}", num(*s), num(rep.v_integrals[k]), num(rep.lp_distances.get(k).copied().unwrap_or(f64::NAN)));
    }
    out.plot = Some(line_chart(
        "distance to the limit displacement",
        "scale",
        "L^p distance",
        &[Series { label: "z_k".into(), points: scales.iter().copied().zip(rep.lp_distances.iter().copied()).collect() }],
        Scale::Log,
        Scale::Log,
    ));
    out.extra.push(("atoms.csv".into(), encode_eym_csv(&loc.measure).into_bytes()));
    out.report = r;
    Ok(out)
}

fn fit_row(csv: &mut String, group: &str, c: &ConstantFit) {
    let _ = writeln!(
        csv,
        "{group},{},{},{},{},{},{},{},{}",
        c.name,
        if c.lower { "inf" } else { "sup" },
        num(c.estimate),
        num(c.estimate_doubled),
        num(c.relative_change),
        num(c.constant),
        num(c.holdout_extreme),
        c.ok()
    );
}

fn audit_model(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let model = cfg.build_model()?;
    let opts = AuditOptions { k: cfg.f64("K")?, samples: cfg.usize("samples")?, seed: cfg.u64("seed")?, slack: cfg.f64("slack")?, ..AuditOptions::default() };
    let growth = check_growth_hypotheses(&model, &opts);
    let lemma = lemma41_bounds_report(&model, &opts);
    let app = appendix_a_check(&model, &opts);
    let mut out = RunOutput { passed: growth.ok() && lemma.ok() && app.ok(), ..Default::default() };
    let mut r = String::new();
    let _ = writeln!(r, "audit of {} at K={} with {} samples", model.name(), num(opts.k), opts.samples);
    let _ = writeln!(r, "growth: lower slope {} offset {}, upper slope {} offset {}", num(growth.lower_slope), num(growth.lower_offset), num(growth.upper_slope), num(growth.upper_offset));
    let _ = writeln!(r, "growth: stress constant {}, temperature constant {}, min theta {}", num(growth.stress_constant), num(growth.temperature_constant), num(growth.min_theta));
    for v in growth.violations.iter().chain(&app.violations) {
        let _ = writeln!(r, "violation: {v}");
    }
    out.data_csv.push_str("group,name,kind,estimate,estimate_doubled,relative_change,constant,holdout_extreme,ok\n");
    for c in lemma.constants() {
        let _ = writeln!(r, "{} = {} (stable {}, hold-out ok {})", c.name, num(c.constant), c.stable, c.holdout_ok);
        fit_row(&mut out.data_csv, "relative", c);
    }
    for c in app.fits() {
        let _ = writeln!(r, "{} = {} (stable {}, hold-out ok {})", c.name, num(c.constant), c.stable, c.holdout_ok);
        fit_row(&mut out.data_csv, "growth-lemma", c);
    }
    let _ = writeln!(r, "all checks passed = {}", out.passed);
    out.report = r;
    Ok(out)
}

fn replay_cmd(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let p = cfg.get("witness");
    if p.is_empty() {
        return Err(ConfigError::Invalid("replay needs witness=<path>".into()).into());
    }
    let v = replay(Path::new(p)).map_err(|e| match e {
        Error::Io(s) => CliError::Artifact(format!("{p}: {s}")),
        other => CliError::Core(other),
    })?;
    let mut out = RunOutput { passed: v.confirmed, ..Default::default() };
    out.report = format!(
        "witness {p}\nkind = {}\nrecorded = {}\nrecomputed = {}\nverdict = {}\n",
        v.kind,
        num(v.recorded),
        num(v.recomputed),
        if v.confirmed { "confirmed" } else { "refuted" }
    );
    out.data_csv = format!("kind,recorded,recomputed,confirmed\n{},{},{},{}\n", v.kind, num(v.recorded), num(v.recomputed), v.confirmed);
    Ok(out)
}
