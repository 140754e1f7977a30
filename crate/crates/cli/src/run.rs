//! Experiment execution: configuration in, tables and plots out.

use std::path::{Path, PathBuf};

use gdalab::averaging::{averaged_rate, mu_lower_bound, validate_averaging};
use gdalab::linalg::{self, Matrix, Vector};
use gdalab::meanfield::{
    contraction_experiment, mne_fixed_point, tensor_grid, wasserstein1, BenchmarkKernel, CouplingInit, CouplingParams,
    GameKernel, GridMeasurePair, MneOptions, MneResult, ParticleSystem, WeightedPoints,
};
use gdalab::precond::{self, continuous_flow_rate, eta_uniformity_report, optimal_step, spectrum_is_real_nonneg};
use gdalab::quadratic::{
    coercivity_constants, rescaled_spectral_rate, simulate_gda, spectral_rate, Integrator, LyapunovSpec, Observable,
    Regime, TimeAxis,
};
use gdalab::rates::{bracket_c, build_f, KappaProfile};
use gdalab::{NoiseStream, QuadraticGame};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{
    AveragingConfig, CouplingConfig, Experiment, ExperimentConfig, GameSpec, HypoConfig, IntegratorName, KernelSpec,
    MeanfieldConfig, MneGridSpec, PrecondConfig, ProfileSpec, RatesConfig, SimConfig, SpectrumConfig,
};
use crate::output::{write_artifacts, Cell, Manifest, Plot, Table};
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Replaces the configured seeds with `seed, seed + 1, ...` (same
    /// count), and the seed of a random game.
    pub seed: Option<u64>,
    /// Size of the worker pool; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    pub seeds: Vec<u64>,
    /// The configuration actually run, after seed overrides.
    pub config: ExperimentConfig,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Configuration with `--seed` applied.
pub fn apply_seed(cfg: &ExperimentConfig, seed: Option<u64>) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    let Some(s) = seed else { return cfg };
    let reseed = |seeds: &mut Vec<u64>| {
        let n = seeds.len().max(1) as u64;
        *seeds = (0..n).map(|i| s.wrapping_add(i)).collect();
    };
    let regame = |g: &mut GameSpec| {
        if let GameSpec::Random { random } = g {
            random.seed = s;
        }
    };
    match &mut cfg.experiment {
        Experiment::Spectrum(c) => regame(&mut c.game),
        Experiment::Sim(c) => regame(&mut c.game),
        Experiment::Hypo(c) => regame(&mut c.game),
        Experiment::Precond(c) => regame(&mut c.game),
        Experiment::Averaging(c) => regame(&mut c.game),
        Experiment::Meanfield(c) => reseed(&mut c.seeds),
        Experiment::Coupling(c) => reseed(&mut c.seeds),
        Experiment::Rates(_) => {}
    }
    cfg
}

/// Configuration as JSON, in the same layout as the input file.
pub fn config_echo(cfg: &ExperimentConfig) -> Value {
    let mut v = serde_json::to_value(&cfg.experiment).expect("config serializes");
    if let Value::Object(map) = &mut v {
        map.insert("kind".into(), Value::String(cfg.kind.name().into()));
        if let Some(o) = &cfg.output {
            map.insert("output".into(), Value::String(o.clone()));
        }
    }
    v
}

/// Run the experiment and return its tables without touching the disk.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput, CliError> {
    let cfg = apply_seed(cfg, opts.seed);
    let work = || -> gdalab::Result<(Vec<Table>, Vec<Plot>, Vec<u64>)> {
        match &cfg.experiment {
            Experiment::Spectrum(c) => spectrum(c),
            Experiment::Sim(c) => simulate(c),
            Experiment::Hypo(c) => hypo(c),
            Experiment::Precond(c) => precondition(c),
            Experiment::Meanfield(c) => meanfield(c),
            Experiment::Coupling(c) => coupling(c),
            Experiment::Rates(c) => rates(c),
            Experiment::Averaging(c) => averaging(c),
        }
    };
    let (tables, plots, seeds) = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Io {
                path: PathBuf::from("<thread pool>"),
                message: e.to_string(),
            })?
            .install(work)?,
        None => work()?,
    };
    Ok(RunOutput {
        tables,
        plots,
        seeds,
        config: cfg,
    })
}

/// Run and write CSVs, plot scripts and `manifest.json` into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, opts: &RunOptions, dir: &Path) -> Result<(RunOutput, Vec<PathBuf>), CliError> {
    let out = execute(cfg, opts)?;
    let mut manifest = Manifest {
        tool: "gdalab",
        library_version: env!("CARGO_PKG_VERSION"),
        rng: gdalab::rng::GENERATOR_ID,
        kind: out.config.kind.name().into(),
        seeds: out.seeds.clone(),
        threads: opts.threads,
        config: config_echo(&out.config),
        files: Vec::new(),
    };
    let files = write_artifacts(dir, &out.tables, &out.plots, &mut manifest).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((out, files))
}

type Artifacts = (Vec<Table>, Vec<Plot>, Vec<u64>);

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn build_game(spec: &GameSpec, eta: f64) -> gdalab::Result<QuadraticGame> {
    match spec {
        GameSpec::Explicit { q, r, p } => QuadraticGame::new(matrix(q), matrix(r), matrix(p), eta),
        GameSpec::Random { random } => QuadraticGame::random(
            random.n,
            random.m,
            eta,
            random.seed,
            random.inner.unwrap_or(random.n.max(random.m)),
        ),
    }
}

fn grid(g: &crate::config::Grid) -> gdalab::Result<Vec<f64>> {
    g.values().map_err(gdalab::Error::Precondition)
}

fn plot(name: &str, title: &str, table: &str, x: usize, ys: &[usize], log_x: bool, log_y: bool) -> Plot {
    Plot {
        name: name.into(),
        title: title.into(),
        table: table.into(),
        x,
        ys: ys.to_vec(),
        log_x,
        log_y,
    }
}

fn spectrum(c: &SpectrumConfig) -> gdalab::Result<Artifacts> {
    let etas = grid(&c.eta)?;
    let base = build_game(&c.game, 1.0)?;
    let rows: Vec<(f64, f64, f64)> = etas
        .par_iter()
        .map(|&eta| {
            let g = base.with_eta(eta)?;
            Ok((eta, spectral_rate(&g)?, rescaled_spectral_rate(&g)?))
        })
        .collect::<gdalab::Result<_>>()?;
    let mut t = Table::new("spectrum", &["eta[-]", "mu_eta[1/time]", "mu_rescaled[1/time]"]);
    for (eta, mu, resc) in rows {
        t.push(vec![eta.into(), mu.into(), resc.into()]);
    }
    let p = plot("spectrum", "least real part of the rescaled generator", "spectrum", 1, &[3], true, false);
    Ok((vec![t], vec![p], Vec::new()))
}

fn integrator(name: IntegratorName) -> Integrator {
    match name {
        IntegratorName::Exact => Integrator::Exact,
        IntegratorName::Rk4 => Integrator::Rk4,
        IntegratorName::Euler => Integrator::Euler,
    }
}

fn vector_or_ones(v: &Option<Vec<f64>>, len: usize) -> Vector {
    match v {
        Some(v) => Vector::from_vec(v.clone()),
        None => Vector::from_element(len, 1.0),
    }
}

fn simulate(c: &SimConfig) -> gdalab::Result<Artifacts> {
    let etas = grid(&c.eta)?;
    let base = build_game(&c.game, 1.0)?;
    let x0 = vector_or_ones(&c.x0, base.n());
    let y0 = vector_or_ones(&c.y0, base.m());
    let mut traj = Table::new(
        "trajectory",
        &["eta[-]", "t[time]", "s[time]", "norm_sq[-]", "lyapunov[-]"],
    );
    let mut fits = Table::new(
        "fits",
        &[
            "eta[-]",
            "rate_original[1/time]",
            "rate_rescaled[1/time]",
            "mu_eta[1/time]",
            "mu_rescaled[1/time]",
        ],
    );
    for eta in etas {
        let game = base.with_eta(eta)?;
        let horizon = c.horizon / eta.sqrt();
        let dt = horizon / (c.samples - 1) as f64;
        let report = if c.lyapunov {
            Some(coercivity_constants(&game, Regime::for_eta(eta))?)
        } else {
            None
        };
        let lyap = report.as_ref().map(|r| LyapunovSpec {
            m: &r.m,
            epsilon: r.epsilon,
        });
        let tr = simulate_gda(&game, &x0, &y0, horizon, dt, integrator(c.integrator), lyap)?;
        for s in &tr.samples {
            traj.push(vec![
                eta.into(),
                s.t.into(),
                s.s.into(),
                s.norm_sq.into(),
                s.lyapunov.unwrap_or(f64::NAN).into(),
            ]);
        }
        let orig = tr.fit(Observable::NormSq, TimeAxis::Original)?;
        let resc = tr.fit(Observable::NormSq, TimeAxis::Rescaled)?;
        fits.push(vec![
            eta.into(),
            orig.rate.into(),
            resc.rate.into(),
            spectral_rate(&game)?.into(),
            rescaled_spectral_rate(&game)?.into(),
        ]);
    }
    let p = plot("trajectory", "squared norm along the flow", "trajectory", 3, &[4], false, true);
    Ok((vec![traj, fits], vec![p], Vec::new()))
}

fn hypo(c: &HypoConfig) -> gdalab::Result<Artifacts> {
    let etas = grid(&c.eta)?;
    let base = build_game(&c.game, 1.0)?;
    let mut t = Table::new(
        "hypocoercivity",
        &[
            "eta[-]",
            "regime[-]",
            "lambda_coercive[1/time]",
            "lambda_l[1/time^2]",
            "lambda_upper[-]",
            "c_m[-]",
            "c_perturb[1/time]",
            "epsilon[-]",
            "predicted_rate[1/time]",
            "mu_rescaled[1/time]",
            "macroscopic_coercive[-]",
        ],
    );
    for eta in etas {
        let game = base.with_eta(eta)?;
        let r = coercivity_constants(&game, Regime::for_eta(eta))?;
        t.push(vec![
            eta.into(),
            r.regime.label().into(),
            r.lambda_coercive.into(),
            r.lambda_l.into(),
            r.lambda_upper.into(),
            r.c_m.into(),
            r.c_perturb.into(),
            r.epsilon.into(),
            r.predicted_rate.into(),
            rescaled_spectral_rate(&game)?.into(),
            r.macroscopic_coercive.into(),
        ]);
    }
    let p = plot("hypocoercivity", "certified and spectral rates", "hypocoercivity", 1, &[9, 10], true, true);
    Ok((vec![t], vec![p], Vec::new()))
}

fn precondition(c: &PrecondConfig) -> gdalab::Result<Artifacts> {
    let etas = grid(&c.eta)?;
    let base = build_game(&c.game, 1.0)?;
    let dim = base.n() + base.m();
    let xi0 = vector_or_ones(&c.xi0, dim);
    let report = eta_uniformity_report(&base, &etas)?;
    let mut summary = Table::new(
        "precond",
        &[
            "eta[-]",
            "kappa[-]",
            "lambda_min[1/time]",
            "max_imag[1/time]",
            "rho[-]",
            "contraction[-]",
            "max_step_ratio[-]",
            "flow_rate[1/time]",
        ],
    );
    let mut iters = Table::new("iterations", &["eta[-]", "k[-]", "norm_xi[-]"]);
    for row in &report.rows {
        let sys = precond::build(&base.with_eta(row.eta)?)?;
        let check = spectrum_is_real_nonneg(&sys)?;
        let mut worst = f64::NAN;
        if let Ok(step) = optimal_step(&sys) {
            let tr = precond::iterate(&sys, &xi0, step.rho, c.steps)?;
            worst = 0.0;
            for (k, xi) in tr.xi.iter().enumerate() {
                iters.push(vec![row.eta.into(), k.into(), xi.norm().into()]);
                if k > 0 {
                    worst = f64::max(worst, xi.norm() / tr.xi[k - 1].norm());
                }
            }
        }
        let flow = if row.lambda_min > 0.0 {
            continuous_flow_rate(&sys, &xi0, 10.0 / row.lambda_min, 200)?.rate
        } else {
            f64::NAN
        };
        summary.push(vec![
            row.eta.into(),
            row.kappa.into(),
            row.lambda_min.into(),
            check.max_imag.into(),
            row.rho_opt.unwrap_or(f64::NAN).into(),
            row.contraction.unwrap_or(f64::NAN).into(),
            worst.into(),
            flow.into(),
        ]);
    }
    let p = plot("precond", "condition number and least eigenvalue", "precond", 1, &[2, 3], true, true);
    Ok((vec![summary, iters], vec![p], Vec::new()))
}

fn kernel(k: &KernelSpec) -> gdalab::Result<BenchmarkKernel> {
    BenchmarkKernel::new(k.kappa_x, k.kappa_y, k.a, k.eps, k.omega, k.dim)
}

fn solve_mne(kernel: &dyn GameKernel, spec: &MneGridSpec, beta: f64) -> gdalab::Result<MneResult> {
    let gx = tensor_grid(spec.lo, spec.hi, spec.points, kernel.dim_x())?;
    let gy = tensor_grid(spec.lo, spec.hi, spec.points, kernel.dim_y())?;
    let init = GridMeasurePair::uniform(kernel.dim_x(), gx, kernel.dim_y(), gy)?;
    let opts = MneOptions {
        beta,
        damping: spec.damping,
        tol: spec.tol,
        ..MneOptions::default()
    };
    mne_fixed_point(kernel, &init, opts)
}

fn mne_table(res: &MneResult) -> Table {
    let m = &res.measures;
    let mut t = Table::new("mne", &["index[-]", "x1[space]", "p[-]", "y1[space]", "q[-]"]);
    for i in 0..m.nx().max(m.ny()) {
        let (x, p) = if i < m.nx() { (m.x_point(i)[0], m.p[i]) } else { (f64::NAN, f64::NAN) };
        let (y, q) = if i < m.ny() { (m.y_point(i)[0], m.q[i]) } else { (f64::NAN, f64::NAN) };
        t.push(vec![i.into(), x.into(), p.into(), y.into(), q.into()]);
    }
    t
}

/// Marginal W1 distances from the particle cloud to the grid equilibrium.
pub fn particle_w1(sys: &ParticleSystem, mne: &GridMeasurePair) -> gdalab::Result<(f64, f64)> {
    let px = WeightedPoints::uniform(sys.dim_x, sys.x.clone())?;
    let py = WeightedPoints::uniform(sys.dim_y, sys.y.clone())?;
    let gx = WeightedPoints::weighted(mne.dim_x, mne.x_points.clone(), mne.p.clone())?;
    let gy = WeightedPoints::weighted(mne.dim_y, mne.y_points.clone(), mne.q.clone())?;
    Ok((wasserstein1(&px, &gx)?, wasserstein1(&py, &gy)?))
}

fn meanfield(c: &MeanfieldConfig) -> gdalab::Result<Artifacts> {
    let k = kernel(&c.kernel)?;
    let mne = c.mne.as_ref().map(|s| solve_mne(&k, s, c.beta)).transpose()?;
    let steps = (c.horizon / c.dt).round() as u64;
    struct SeedTrace {
        rows: Vec<[f64; 5]>,
        w1: Option<(f64, f64)>,
        t: f64,
    }
    let runs: Vec<SeedTrace> = c
        .seeds
        .iter()
        .map(|&seed| {
            let noise = NoiseStream::new(seed);
            let mut sys = ParticleSystem::gaussian(
                c.n,
                c.kernel.dim,
                c.kernel.dim,
                c.center.0,
                c.center.1,
                c.spread,
                1.0 / c.beta,
                c.eta,
                &noise,
                0,
            )?;
            sys.check_step(&k, c.dt)?;
            let moment = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / c.n as f64;
            let mut rows = Vec::new();
            let mut push = |sys: &ParticleSystem| {
                rows.push([sys.t, sys.mean_x()[0], sys.mean_y()[0], moment(&sys.x), moment(&sys.y)]);
            };
            push(&sys);
            for s in 1..=steps {
                sys.step(&k, c.dt, &noise)?;
                if s % c.record_every as u64 == 0 {
                    push(&sys);
                }
            }
            let w1 = mne.as_ref().map(|m| particle_w1(&sys, &m.measures)).transpose()?;
            Ok(SeedTrace { rows, w1, t: sys.t })
        })
        .collect::<gdalab::Result<_>>()?;
    let mut traj = Table::new(
        "trajectory",
        &[
            "seed[-]",
            "t[time]",
            "mean_x1[space]",
            "mean_y1[space]",
            "second_moment_x[space^2]",
            "second_moment_y[space^2]",
        ],
    );
    let mut summary = Table::new("summary", &["seed[-]", "t[time]", "w1_x[space]", "w1_y[space]"]);
    for (seed, run) in c.seeds.iter().zip(&runs) {
        for r in &run.rows {
            traj.push(vec![(*seed).into(), r[0].into(), r[1].into(), r[2].into(), r[3].into(), r[4].into()]);
        }
        let (wx, wy) = run.w1.unwrap_or((f64::NAN, f64::NAN));
        summary.push(vec![(*seed).into(), run.t.into(), wx.into(), wy.into()]);
    }
    let mut tables = vec![traj, summary];
    if let Some(m) = &mne {
        tables.push(mne_table(m));
        let mut conv = Table::new("mne_convergence", &["iterations[-]", "residual[-]", "log_residual[-]"]);
        conv.push(vec![m.iterations.into(), m.residual.into(), m.log_residual.into()]);
        tables.push(conv);
    }
    let p = plot("trajectory", "particle means", "trajectory", 2, &[3, 4], false, false);
    Ok((tables, vec![p], c.seeds.clone()))
}

fn coupling(c: &CouplingConfig) -> gdalab::Result<Artifacts> {
    let etas = grid(&c.eta)?;
    let k = kernel(&c.kernel)?;
    let mne = c.mne.as_ref().map(|s| solve_mne(&k, s, c.beta)).transpose()?;
    let init = CouplingInit {
        primary: c.primary,
        mirror: c.mirror,
        spread: c.spread,
    };
    let mut trace = Table::new(
        "coupling",
        &[
            "eta[-]",
            "t[time]",
            "rho[space]",
            "z[space]",
            "q[space]",
            "w1_x[space]",
            "w1_y[space]",
        ],
    );
    let mut rates = Table::new(
        "rates",
        &[
            "eta[-]",
            "gamma[-]",
            "fitted_rate[1/time]",
            "predicted_c[1/time]",
            "ratio_ok[-]",
            "strictly_decreasing[-]",
            "admissible[-]",
            "lx_bound[1/time]",
            "ly_bound[1/time]",
        ],
    );
    for eta in etas {
        let gamma = c.gamma.unwrap_or(1.0 / eta);
        let params = CouplingParams {
            beta: c.beta,
            eta,
            gamma,
            delta: c.delta,
            n: c.n,
            dt: c.dt,
            horizon: c.horizon,
            record_every: c.record_every,
        };
        let rep = contraction_experiment(&k, params, &c.seeds, init, mne.as_ref().map(|m| &m.measures))?;
        for i in 0..rep.times.len() {
            let (wx, wy) = rep
                .w1_to_mne
                .get(i)
                .map(|w| (w.w1_x, w.w1_y))
                .unwrap_or((f64::NAN, f64::NAN));
            trace.push(vec![
                eta.into(),
                rep.times[i].into(),
                rep.rho[i].into(),
                rep.z[i].into(),
                rep.q[i].into(),
                wx.into(),
                wy.into(),
            ]);
        }
        rates.push(vec![
            eta.into(),
            gamma.into(),
            rep.fit.map_or(f64::NAN, |f| f.rate).into(),
            rep.predicted_c.into(),
            rep.ratio_ok.into(),
            rep.strictly_decreasing.into(),
            (!rep.outside_guarantee).into(),
            rep.admissibility.lx_bound.into(),
            rep.admissibility.ly_bound.into(),
        ]);
    }
    let p = plot("coupling", "seed-averaged coupling distance", "coupling", 2, &[3], false, true);
    Ok((vec![trace, rates], vec![p], c.seeds.clone()))
}

fn rates(c: &RatesConfig) -> gdalab::Result<Artifacts> {
    let (profile, bracket) = match &c.profile {
        ProfileSpec::Constant { k } => (KappaProfile::constant(*k), bracket_c(c.a, c.b, *k, 0.0, 0.0).ok()),
        ProfileSpec::Piecewise { m, k, radius } => (
            KappaProfile::piecewise(*m, *k, *radius),
            bracket_c(c.a, c.b, *k, *m, *radius).ok(),
        ),
        ProfileSpec::Benchmark { kappa, eps, omega } => (KappaProfile::benchmark(*kappa, *eps, *omega), None),
    };
    let built = build_f(&profile, c.a, c.b)?;
    let mut prof = Table::new(
        "profile",
        &["r[space]", "kappa[1/space^2]", "kappa_tilde[1/space^2]", "f[space]", "f_prime[-]"],
    );
    for i in 0..built.r.len() {
        prof.push(vec![
            built.r[i].into(),
            built.kappa[i].into(),
            built.kappa_tilde[i].into(),
            built.f[i].into(),
            built.f_prime[i].into(),
        ]);
    }
    let mut summary = Table::new(
        "summary",
        &[
            "r0[space]",
            "r1[space]",
            "integral[space^2]",
            "c[1/time]",
            "max_violation[-]",
            "bracket_lower[1/time]",
            "bracket_upper[1/time]",
            "in_bracket[-]",
        ],
    );
    summary.push(vec![
        built.r0.into(),
        built.r1.into(),
        built.integral.into(),
        built.c.into(),
        built.max_violation.into(),
        bracket.map_or(f64::NAN, |b| b.lower).into(),
        bracket.map_or(f64::NAN, |b| b.upper).into(),
        match bracket {
            Some(b) => Cell::from(b.contains(built.c)),
            None => Cell::from("n/a"),
        },
    ]);
    let p = plot("profile", "concave distance function", "profile", 1, &[4, 5], false, false);
    Ok((vec![prof, summary], vec![p], Vec::new()))
}

fn averaging(c: &AveragingConfig) -> gdalab::Result<Artifacts> {
    let gammas = grid(&c.gamma)?;
    let game = build_game(&c.game, 1.0)?;
    let (n, m) = (game.n(), game.m());
    let s = linalg::block_diag(game.q(), game.r())?;
    let l = linalg::block2x2(&Matrix::zeros(n, n), game.p(), &(-game.p().transpose()), &Matrix::zeros(m, m))?;
    let v0 = vector_or_ones(&c.v0, n + m);
    let rows = validate_averaging(&s, &l, &gammas, &v0)?;
    let avg = averaged_rate(&s, &l, &v0, None)?;
    let bound = mu_lower_bound(game.q(), game.r(), game.p())?;
    let mut t = Table::new("averaging", &["gamma[-]", "fitted[1/time]", "mu[1/time]", "error[1/time]"]);
    for r in rows {
        t.push(vec![r.gamma.into(), r.fitted.into(), r.mu.into(), r.error.into()]);
    }
    let mut summary = Table::new(
        "summary",
        &[
            "mu[1/time]",
            "commensurate[-]",
            "period[time]",
            "error_estimate[1/time]",
            "lower_bound[1/time]",
            "degenerate[-]",
        ],
    );
    summary.push(vec![
        avg.mu.into(),
        avg.commensurate.into(),
        avg.period.into(),
        avg.error_estimate.into(),
        bound.bound.into(),
        bound.degenerate.into(),
    ]);
    let p = plot("averaging", "fitted rate against the averaged rate", "averaging", 1, &[2, 3], true, false);
    Ok((vec![t, summary], vec![p], Vec::new()))
}
