//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line straight to stdout so the lines survive output
//! capture, then asserts.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use gdalab::averaging::{averaged_rate, validate_averaging};
use gdalab::linalg::{self, Matrix, Vector};
use gdalab::meanfield::BenchmarkKernel;
use gdalab::precond::{self, continuous_flow_rate, eta_uniformity_report, optimal_step, spectrum_is_real_nonneg};
use gdalab::quadratic::build_m;
use gdalab::rates::{bracket_c, build_f, closed_form_c, KappaProfile};
use gdalab::rng::{NoiseRole, NoiseStream};
use gdalab::QuadraticGame;
use gdalab_cli::{execute, load_config, run_to_dir, RunOptions, RunOutput};

// tolerances and sizes
const FIG1_POINTS: usize = 1000;
const FIG1_ENVELOPE: f64 = 0.2;
const FIG1_MAX_BAD_FRACTION: f64 = 0.05;
const FIG1_SECONDS: f64 = 30.0;
const SCALING_FACTOR: f64 = 2.0;
const SCALING_SECONDS: f64 = 10.0;
const LEMMA_TOL: f64 = 1e-10;
const PRECOND_SPECTRUM_TOL: f64 = 1e-8;
const PRECOND_KAPPA_SPREAD: f64 = 0.05;
const PRECOND_STEPS: usize = 50;
const FLOW_SPEEDUP: f64 = 50.0;
const AVERAGING_TOL: f64 = 1e-10;
const AVERAGING_SHRINK: f64 = 5.0;
const CONSTRUCTION_GRID: usize = 4096;
const CONSTRUCTION_TOL: f64 = 1e-6;
const CLOSED_FORM: f64 = 0.3616;
const CLOSED_FORM_TOL: f64 = 1e-4;
const COUPLING_RATIO: f64 = 0.5;
const COUPLING_SCALING_FACTOR: f64 = 3.0;
const COUPLING_SECONDS: f64 = 300.0;
const MNE_RESIDUAL: f64 = 1e-10;
const MNE_W1: f64 = 0.1;
const MNE_SECONDS: f64 = 120.0;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "{} criterion {id:>2} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn run_json(text: &str) -> RunOutput {
    let cfg = load_config(text, None).expect("config is valid");
    execute(&cfg, &RunOptions::default()).expect("run succeeds")
}

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn criterion_01_figure1_curve() {
    let start = Instant::now();
    let text = std::fs::read_to_string(config_path("figure1.json")).unwrap();
    let out = run_json(&text);
    let elapsed = start.elapsed().as_secs_f64();
    let t = out.table("spectrum").unwrap();
    let eta = t.values("eta");
    let mu = t.values("mu_rescaled");
    let (imax, mu_max) = mu
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let eta_star = eta[imax];
    let envelope = |e: f64| e.sqrt().min(1.0 / e.sqrt());
    let bad = eta
        .iter()
        .zip(&mu)
        .filter(|(e, m)| **m < FIG1_ENVELOPE * mu_max * envelope(**e) / envelope(eta_star))
        .count();
    let bad_fraction = bad as f64 / eta.len() as f64;
    let decays = mu[0] < mu_max && mu[mu.len() - 1] < mu_max;
    let pass = eta.len() == FIG1_POINTS
        && (0.1..=10.0).contains(&eta_star)
        && decays
        && bad_fraction <= FIG1_MAX_BAD_FRACTION
        && elapsed < FIG1_SECONDS;
    let detail = format!(
        "{} points, argmax eta* = {eta_star:.2}, mu_max = {mu_max:.4}, mu(0.01) = {:.4}, mu(10) = {:.4}, envelope violations {:.1}%, {elapsed:.1}s",
        eta.len(),
        mu[0],
        mu[mu.len() - 1],
        100.0 * bad_fraction
    );
    report(1, "Figure 1 reproduction", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_rescaled_rate_scaling() {
    let start = Instant::now();
    let text = r#"{
        "kind": "quadratic-sim",
        "game": { "random": { "n": 3, "m": 3, "seed": 11 } },
        "eta": [0.0001, 0.01, 100, 10000],
        "horizon": 300,
        "samples": 2000
    }"#;
    let out = run_json(text);
    let elapsed = start.elapsed().as_secs_f64();
    let fits = out.table("fits").unwrap();
    let rate = fits.values("rate_rescaled");
    let small = (rate[0] / rate[1]) / (1e-4f64 / 1e-2).sqrt();
    let large = (rate[2] / rate[3]) / (1e4f64 / 1e2).sqrt();
    let within = |r: f64| (1.0 / SCALING_FACTOR..=SCALING_FACTOR).contains(&r);
    let pass = within(small) && within(large) && elapsed < SCALING_SECONDS;
    let detail = format!(
        "rates {:.4e} {:.4e} {:.4e} {:.4e}; observed/expected ratio {small:.3} (small eta), {large:.3} (large eta), {elapsed:.1}s",
        rate[0], rate[1], rate[2], rate[3]
    );
    report(2, "rescaled-rate scaling", pass, &detail);
    assert!(pass, "{detail}");
}

/// Skew `L` and orthogonal projector `Pi` with `Pi L Pi = 0`, rotated by a
/// random orthogonal matrix.
fn skew_and_projector(dim: usize, rank: usize, slot: &mut gdalab::rng::SlotRng) -> (Matrix, Matrix) {
    let g = Matrix::from_fn(dim, dim, |_, _| slot.normal());
    let u = g.qr().q();
    let mut l = Matrix::from_fn(dim, dim, |_, _| slot.normal());
    l = (&l - l.transpose()) * 0.5;
    for i in 0..rank {
        for j in 0..rank {
            l[(i, j)] = 0.0;
        }
    }
    let mut d = Matrix::zeros(dim, dim);
    for i in 0..rank {
        d[(i, i)] = 1.0;
    }
    (&u * l * u.transpose(), &u * d * u.transpose())
}

#[test]
fn criterion_03_m_operator_bounds() {
    let stream = NoiseStream::new(2024);
    let mut violations = 0;
    let (mut worst_m, mut worst_lm) = (0.0f64, 0.0f64);
    for pair in 0..100u64 {
        let mut slot = stream.slot(pair, 0, NoiseRole::Sampling);
        let dim = 2 + slot.index(7);
        let rank = 1 + slot.index(dim - 1);
        let (l, pi) = skew_and_projector(dim, rank, &mut slot);
        let m = build_m(&l, &pi).unwrap();
        let lm = &l * &m;
        let comp = Matrix::identity(dim, dim) - &pi;
        for k in 0..100u64 {
            let mut vs = stream.slot(pair, k + 1, NoiseRole::Sampling);
            let phi = Vector::from_fn(dim, |_, _| vs.normal());
            let off = (&comp * &phi).norm();
            let a = (&m * &phi).norm() - 0.5 * off;
            let b = (&lm * &phi).norm() - off;
            worst_m = worst_m.max(a);
            worst_lm = worst_lm.max(b);
            if a > LEMMA_TOL || b > LEMMA_TOL {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    let detail = format!(
        "10000 samples, {violations} violations; max |M phi| - |(I-Pi)phi|/2 = {worst_m:.2e}, max |LM phi| - |(I-Pi)phi| = {worst_lm:.2e}"
    );
    report(3, "M-operator bounds", pass, &detail);
    assert!(pass, "{detail}");
}

fn spd_game(seed: u64, eta: f64) -> QuadraticGame {
    QuadraticGame::random(3, 3, eta, seed, 3).unwrap()
}

#[test]
fn criterion_04_preconditioned_spectrum_and_steps() {
    let etas = [1e-3, 1.0, 1e3];
    let (mut spectrum_bad, mut no_step, mut step_bad, mut kappa_bad) = (0, 0, 0, 0);
    let mut spreads = Vec::new();
    for seed in 0..100u64 {
        let base = spd_game(1000 + seed, 1.0);
        for &eta in &etas {
            let sys = precond::build(&base.with_eta(eta).unwrap()).unwrap();
            let check = spectrum_is_real_nonneg(&sys).unwrap();
            let scale = PRECOND_SPECTRUM_TOL * linalg::operator_norm(&sys.t);
            if check.max_imag > scale || check.min_real < -scale {
                spectrum_bad += 1;
            }
            match optimal_step(&sys) {
                Ok(step) => {
                    let xi0 = Vector::from_element(sys.a.nrows(), 1.0);
                    let tr = precond::iterate(&sys, &xi0, step.rho, PRECOND_STEPS).unwrap();
                    let ok = tr
                        .xi
                        .windows(2)
                        .all(|w| w[1].norm() <= step.contraction * w[0].norm() * (1.0 + 1e-12));
                    if !ok {
                        step_bad += 1;
                    }
                }
                Err(_) => no_step += 1,
            }
        }
        let rep = eta_uniformity_report(&base, &etas).unwrap();
        let spread = rep.kappa_variation - 1.0;
        spreads.push(spread);
        if spread > PRECOND_KAPPA_SPREAD {
            kappa_bad += 1;
        }
    }
    spreads.sort_by(f64::total_cmp);
    let median_spread = spreads[spreads.len() / 2];
    let worst_spread = spreads[spreads.len() - 1];
    let pass = spectrum_bad == 0 && no_step == 0 && step_bad == 0 && kappa_bad == 0;
    let detail = format!(
        "300 runs: spectrum off-axis {spectrum_bad}, no step guarantee {no_step}, step contraction broken {step_bad}; \
         kappa spread > 5% in {kappa_bad}/100 games (max/min - 1: median {median_spread:.3e}, worst {worst_spread:.3e})"
    );
    report(4, "preconditioner spectrum, steps and kappa", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_preconditioned_flow_speedup() {
    let base = spd_game(77, 1.0);
    let rate = |eta: f64| {
        let sys = precond::build(&base.with_eta(eta).unwrap()).unwrap();
        let lam = linalg::eigenvalues(&sys.a).unwrap().min_real();
        let xi0 = Vector::from_element(sys.a.nrows(), 1.0);
        continuous_flow_rate(&sys, &xi0, 10.0 / lam, 400).unwrap().rate
    };
    let (r1, r4) = (rate(1.0), rate(1e4));
    let ratio = r4 / r1;
    let pass = ratio >= FLOW_SPEEDUP;
    let detail = format!("rate(eta=1) = {r1:.4e}, rate(eta=1e4) = {r4:.4e}, ratio {ratio:.3} (need >= {FLOW_SPEEDUP})");
    report(5, "preconditioned flow speedup", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_06_averaging() {
    let stream = NoiseStream::new(6);
    let mut worst = 0.0f64;
    let l = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    for k in 0..20u64 {
        let mut slot = stream.slot(k, 0, NoiseRole::Sampling);
        let q = 0.05 + 5.0 * slot.uniform();
        let r = 0.05 + 5.0 * slot.uniform();
        let s = Matrix::from_diagonal(&Vector::from_vec(vec![q, r]));
        let v0 = Vector::from_vec(vec![slot.normal(), slot.normal()]);
        let avg = averaged_rate(&s, &l, &v0, None).unwrap();
        worst = worst.max((avg.mu - 0.5 * (q + r)).abs());
    }
    let text = std::fs::read_to_string(config_path("averaging.json")).unwrap();
    let out = run_json(&text);
    let err = out.table("averaging").unwrap().values("error");
    let shrink = err[0] / err[1];
    // the same quantity straight from the library
    let s = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 3.0]));
    let direct = validate_averaging(&s, &l, &[50.0, 500.0], &Vector::from_vec(vec![1.0, 1.0])).unwrap();
    let pass = worst <= AVERAGING_TOL && shrink >= AVERAGING_SHRINK && direct[0].error == err[0];
    let detail = format!(
        "max |mu - (q+r)/2| = {worst:.2e} over 20 draws; error {:.3e} -> {:.3e} from gamma 50 to 500 (x{shrink:.1})",
        err[0], err[1]
    );
    report(6, "averaging exact case", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_distance_construction() {
    let (a, b, m, k, radius) = (4.0, 1.0, 0.5, 1.0, 1.0);
    let limit = (a * std::f64::consts::PI / (2.0 * b * m)).sqrt();
    let built = build_f(&KappaProfile::piecewise(m, k, radius), a, b).unwrap();
    let bracket = bracket_c(a, b, k, m, radius).unwrap();
    let h = built.r[1] - built.r[0];
    // f'' = phi' g + phi g' at each node, with phi' = -(b/a) kappa~ r phi and
    // g' = -(Phi / phi) / (2 I) below R1
    let mut worst = f64::NEG_INFINITY;
    let mut worst_centered = f64::NEG_INFINITY;
    for i in 1..built.r.len() - 1 {
        let r = built.r[i];
        let phi_prime = -(b / a) * built.kappa_tilde[i] * r * built.phi[i];
        let g_prime = if r < built.r1 {
            -(built.big_phi[i] / built.phi[i]) / (2.0 * built.integral)
        } else {
            0.0
        };
        let f2 = phi_prime * built.g[i] + built.phi[i] * g_prime;
        let rest = -b * built.kappa[i] * r * built.f_prime[i] + built.c * built.f[i];
        worst = worst.max(a * f2 + rest);
        let centered = (built.f_prime[i + 1] - built.f_prime[i - 1]) / (2.0 * h);
        worst_centered = worst_centered.max(a * centered + rest);
    }
    let in_bracket = built.c >= bracket.lower && built.c <= bracket.upper;
    let pass = radius <= limit
        && built.r.len() == CONSTRUCTION_GRID
        && (bracket.upper - 2.0 * bracket.lower).abs() <= 1e-12 * bracket.upper
        && in_bracket
        && worst <= CONSTRUCTION_TOL * a;
    let detail = format!(
        "m = {m}, K = {k}, R = {radius} (limit {limit:.3}); c = {:.5} in [{:.5}, {:.5}]: {in_bracket}; \
         {} grid points, max a f'' - b kappa r f' + c f = {worst:.2e} (tol {:.0e}; centered differences across the kinks give {worst_centered:.2e})",
        built.c,
        bracket.lower,
        bracket.upper,
        built.r.len(),
        CONSTRUCTION_TOL * a
    );
    report(7, "concave distance construction", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_closed_form_constant() {
    let e = std::f64::consts::E;
    let by_hand = 4.0 / ((e - 1.0) / 2.0 + 8f64.sqrt() * (std::f64::consts::PI / 4.0).exp() + 4.0);
    let c = closed_form_c(1.0, 1.0, 1.0);
    let mut r0_ok = true;
    for (beta, kappa) in [(1.0, 1.0), (0.5, 2.0), (3.0, 0.7), (1.0, 1e-3)] {
        let v = closed_form_c(beta, kappa, 0.0);
        r0_ok &= (v - kappa).abs() <= 2.0 * f64::EPSILON * kappa;
    }
    let pass = (by_hand - CLOSED_FORM).abs() <= CLOSED_FORM_TOL
        && (c - CLOSED_FORM).abs() <= CLOSED_FORM_TOL
        && (c - by_hand).abs() <= 1e-15
        && r0_ok;
    let detail = format!("closed_form_c(1, 1, 1) = {c:.6} (independent arithmetic {by_hand:.6}); R = 0 returns kappa: {r0_ok}");
    report(8, "closed-form rate constant", pass, &detail);
    assert!(pass, "{detail}");
}

fn coupling_config(eta: f64, horizon: f64) -> String {
    let seeds: Vec<String> = (1..=32).map(|s| s.to_string()).collect();
    format!(
        r#"{{
            "kind": "coupling-run",
            "kernel": {{ "kappa_x": 1, "kappa_y": 1, "a": 0.25, "eps": 0, "dim": 1 }},
            "n": 512, "beta": 1, "eta": [{eta}], "delta": 0.1,
            "dt": 0.01, "horizon": {horizon}, "record_every": 10,
            "seeds": [{}]
        }}"#,
        seeds.join(",")
    )
}

#[test]
fn criterion_09_coupling_contraction() {
    let start = Instant::now();
    let mut rates = Vec::new();
    let mut base_detail = String::new();
    let mut base_ok = false;
    for eta in [0.1, 1.0, 10.0] {
        let horizon = 3.0 / f64::min(1.0, eta);
        let out = run_json(&coupling_config(eta, horizon));
        let rt = out.table("rates").unwrap();
        let fitted = rt.values("fitted_rate")[0];
        rates.push(fitted);
        if eta == 1.0 {
            let rho = out.table("coupling").unwrap().values("rho");
            let decreasing = rho.windows(2).all(|w| w[1] < w[0]);
            let predicted = rt.values("predicted_c")[0];
            base_ok = decreasing && fitted >= COUPLING_RATIO * predicted;
            base_detail = format!(
                "eta = 1: rho strictly decreasing over {} samples: {decreasing}, fitted {fitted:.4} vs predicted {predicted:.4}",
                rho.len()
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let scaled: Vec<f64> = [0.1, 1.0, 10.0]
        .iter()
        .zip(&rates)
        .map(|(eta, r)| (r / rates[1]) / f64::min(1.0, *eta))
        .collect();
    let scaling_ok = scaled
        .iter()
        .all(|s| (1.0 / COUPLING_SCALING_FACTOR..=COUPLING_SCALING_FACTOR).contains(s));
    let pass = base_ok && scaling_ok && elapsed < COUPLING_SECONDS;
    let detail = format!(
        "{base_detail}; rates at eta 0.1/1/10 = {:.4}/{:.4}/{:.4}, relative to min(1, eta): {:.2}/{:.2}/{:.2}; {elapsed:.0}s",
        rates[0], rates[1], rates[2], scaled[0], scaled[1], scaled[2]
    );
    report(9, "coupling contraction", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_mne_consistency() {
    let start = Instant::now();
    let text = r#"{
        "kind": "meanfield-run",
        "kernel": { "kappa_x": 1, "kappa_y": 1, "a": 0.5, "eps": 0.3, "omega": 2, "dim": 1 },
        "n": 2000, "beta": 1, "eta": 1, "dt": 0.01, "horizon": 50, "record_every": 500,
        "seeds": [10], "center": [1.5, -1.5], "spread": 0.5,
        "mne": { "lo": -6, "hi": 6, "points": 512, "tol": 1e-11 }
    }"#;
    let out = run_json(text);
    let elapsed = start.elapsed().as_secs_f64();
    // kernel construction is part of the run; this just pins the parameters
    BenchmarkKernel::new(1.0, 1.0, 0.5, 0.3, 2.0, 1).unwrap();
    let conv = out.table("mne_convergence").unwrap();
    let residual = conv.values("residual")[0];
    let summary = out.table("summary").unwrap();
    let t = summary.values("t")[0];
    let (wx, wy) = (summary.values("w1_x")[0], summary.values("w1_y")[0]);
    let pass = residual < MNE_RESIDUAL && wx <= MNE_W1 && wy <= MNE_W1 && elapsed < MNE_SECONDS;
    let detail = format!(
        "grid residual {residual:.2e}; at t = {t:.1} with N = 2000: W1_x = {wx:.4}, W1_y = {wy:.4}; {elapsed:.1}s"
    );
    report(10, "MNE consistency", pass, &detail);
    assert!(pass, "{detail}");
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_11_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut all_same = true;
    let mut compared = 0;
    for name in ["coupling.json", "meanfield.json"] {
        let text = std::fs::read_to_string(config_path(name)).unwrap();
        let cfg = load_config(&text, None).unwrap();
        let mut outputs = Vec::new();
        for (run, threads) in [(0, 1), (1, 1), (2, 4), (3, 4)] {
            let dir = tmp.path().join(format!("{name}-{run}"));
            let opts = RunOptions {
                seed: Some(99),
                threads: Some(threads),
            };
            run_to_dir(&cfg, &opts, &dir).unwrap();
            outputs.push(csv_bytes(&dir));
        }
        compared += outputs[0].len();
        all_same &= !outputs[0].is_empty() && outputs.iter().all(|o| *o == outputs[0]);
    }
    let detail = format!("{compared} CSV files from coupling and mean-field runs, twice each at 1 and 4 threads: identical = {all_same}");
    report(11, "determinism", all_same, &detail);
    assert!(all_same, "{detail}");
}
