use gdalab::averaging::{averaged_rate, mu_lower_bound, validate_averaging};
use gdalab::linalg::{self, Matrix, Vector};
use gdalab::rng::{NoiseRole, NoiseStream};
use proptest::prelude::*;

fn game_l(p: &Matrix) -> Matrix {
    let (n, m) = p.shape();
    linalg::block2x2(&Matrix::zeros(n, n), p, &(-p.transpose()), &Matrix::zeros(m, m)).unwrap()
}

fn random_spd(n: usize, slot: &mut gdalab::rng::SlotRng) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| slot.normal());
    &a * a.transpose() / n as f64 + Matrix::identity(n, n) * 0.1
}

/// Time average of `<S v, v>/|v0|^2` along `exp(-L s) v0` by direct
/// matrix-exponential stepping and the trapezoid rule.
fn brute_average(s: &Matrix, l: &Matrix, v0: &Vector, horizon: f64, nodes: usize) -> f64 {
    let h = horizon / nodes as f64;
    let step = linalg::expm(&(l * -h)).unwrap();
    let mut v = v0.clone();
    let val = |v: &Vector| (s * v).dot(v) / v0.norm_squared();
    let mut acc = 0.5 * val(&v);
    for k in 1..=nodes {
        v = &step * &v;
        acc += if k == nodes { 0.5 * val(&v) } else { val(&v) };
    }
    acc / nodes as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scalar_case_is_mean_of_diagonal(q in 0.01f64..5.0, r in 0.01f64..5.0, p in 0.1f64..4.0, a in -2.0f64..2.0, b in 0.1f64..2.0) {
        let s = Matrix::from_diagonal(&Vector::from_vec(vec![q, r]));
        let l = game_l(&Matrix::from_element(1, 1, p));
        let avg = averaged_rate(&s, &l, &Vector::from_vec(vec![a, b]), None).unwrap();
        prop_assert!((avg.mu - 0.5 * (q + r)).abs() < 1e-10);
    }

    #[test]
    fn averaged_rate_matches_brute_force(seed in 0u64..10_000) {
        let stream = NoiseStream::new(seed);
        let mut slot = stream.slot(0, 0, NoiseRole::Sampling);
        let s = random_spd(4, &mut slot);
        let p = Matrix::from_fn(2, 2, |_, _| slot.normal());
        let l = game_l(&p);
        let v0 = Vector::from_fn(4, |_, _| slot.normal());
        let avg = averaged_rate(&s, &l, &v0, None).unwrap();
        let freqs = gdalab::averaging::skew_frequencies(&l).unwrap();
        let sigma_min = freqs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(sigma_min > 0.05);
        let horizon = 400.0 * std::f64::consts::PI / sigma_min;
        let nodes = (horizon * freqs[0] * 8.0) as usize + 1000;
        let brute = brute_average(&s, &l, &v0, horizon, nodes);
        // each estimate carries an O(1/horizon) truncation error
        let tol = 2.0 * avg.error_estimate.max(1e-10) + 1e-6;
        prop_assert!((avg.mu - brute).abs() < tol, "{} vs {} (tol {})", avg.mu, brute, tol);
    }

    #[test]
    fn averaged_rate_respects_svd_bound(seed in 0u64..10_000) {
        let stream = NoiseStream::new(seed);
        let mut slot = stream.slot(1, 0, NoiseRole::Sampling);
        let q = random_spd(2, &mut slot);
        let r = random_spd(2, &mut slot);
        let p = Matrix::from_fn(2, 2, |_, _| slot.normal());
        let bound = mu_lower_bound(&q, &r, &p).unwrap();
        prop_assume!(!bound.degenerate);
        let sv = linalg::singular_values(&p).unwrap();
        prop_assume!(sv[1] > 0.05 && sv[0] - sv[1] > 0.05);
        let s = linalg::block_diag(&q, &r).unwrap();
        let l = game_l(&p);
        for k in 0..8u64 {
            let mut vs = stream.slot(2, k, NoiseRole::Sampling);
            let v0 = Vector::from_fn(4, |_, _| vs.normal());
            let avg = averaged_rate(&s, &l, &v0, None).unwrap();
            prop_assert!(avg.mu >= bound.bound - avg.error_estimate - 1e-9);
        }
    }
}

#[test]
fn envelope_error_shrinks_with_gamma() {
    let s = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.5]));
    let l = game_l(&Matrix::from_element(1, 1, 1.0));
    let v0 = Vector::from_vec(vec![1.0, 0.0]);
    let rows = validate_averaging(&s, &l, &[50.0, 500.0], &v0).unwrap();
    assert!((rows[0].mu - 0.75).abs() < 1e-12);
    assert!(rows[1].error * 5.0 <= rows[0].error, "{rows:?}");
}
