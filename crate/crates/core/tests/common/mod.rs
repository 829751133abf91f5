//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use assured_ddf::geometry::Box3D;
use assured_ddf::scenario::SensorConfig;
use assured_ddf::tracking::{measurement_matrix, process_noise, transition, Detection, MeasMatrix, StateMatrix, StateVector, Tracker, TrackerConfig, MEAS_DIM};
use assured_ddf::trust::BetaTrust;
use assured_ddf::AgentId;
use nalgebra::{DMatrix, SVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Beta, ContinuousCDF};

/// Exhaustive gated matching: the largest number of pairs with cost `<= gate`,
/// and the least total cost among matchings of that size.
pub fn brute_force_assignment(cost: &DMatrix<f64>, gate: f64) -> (usize, f64) {
    fn go(cost: &DMatrix<f64>, gate: f64, row: usize, used: &mut Vec<bool>, count: usize, total: f64, best: &mut (usize, f64)) {
        if row == cost.nrows() {
            if count > best.0 || (count == best.0 && total < best.1) {
                *best = (count, total);
            }
            return;
        }
        go(cost, gate, row + 1, used, count, total, best);
        for j in 0..cost.ncols() {
            let c = cost[(row, j)];
            if !used[j] && c.is_finite() && c <= gate {
                used[j] = true;
                go(cost, gate, row + 1, used, count + 1, total + c, best);
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    go(cost, gate, 0, &mut vec![false; cost.ncols()], 0, 0.0, &mut best);
    best
}

/// Lexicographically lowest sorted `(row, col)` list among all gated
/// matchings of maximum size and minimum cost (costs equal within `tol`).
pub fn brute_force_lex_optimum(cost: &DMatrix<f64>, gate: f64, tol: f64) -> Vec<(usize, usize)> {
    fn go(cost: &DMatrix<f64>, gate: f64, row: usize, used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, total: f64, all: &mut Vec<(Vec<(usize, usize)>, f64)>) {
        if row == cost.nrows() {
            all.push((cur.clone(), total));
            return;
        }
        go(cost, gate, row + 1, used, cur, total, all);
        for j in 0..cost.ncols() {
            let c = cost[(row, j)];
            if !used[j] && c.is_finite() && c <= gate {
                used[j] = true;
                cur.push((row, j));
                go(cost, gate, row + 1, used, cur, total + c, all);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut all = Vec::new();
    go(cost, gate, 0, &mut vec![false; cost.ncols()], &mut Vec::new(), 0.0, &mut all);
    let k = all.iter().map(|(m, _)| m.len()).max().unwrap_or(0);
    let best = all.iter().filter(|(m, _)| m.len() == k).map(|(_, t)| *t).fold(f64::INFINITY, f64::min);
    all.into_iter()
        .filter(|(m, t)| m.len() == k && (t - best).abs() <= tol)
        .map(|(m, _)| m)
        .min()
        .unwrap_or_default()
}

/// Area between the Beta CDF and the step CDF of a binary target, by
/// composite Simpson on each half of `[0, 1]`. The substitutions
/// `x = s^2` and `x = 1 - s^2` smooth the endpoint behaviour of the CDF.
pub fn cdf_area_distance(b: &BetaTrust, target_true: bool) -> f64 {
    let dist = Beta::new(b.alpha, b.beta).expect("valid beta");
    let g = |x: f64| {
        let f = dist.cdf(x);
        if target_true { f } else { 1.0 - f }
    };
    let half = 0.5f64.sqrt();
    let lower = simpson(|s| g(s * s) * 2.0 * s, 0.0, half, 4000);
    let upper = simpson(|s| g(1.0 - s * s) * 2.0 * s, 0.0, half, 4000);
    lower + upper
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Sample from `N(0, cov)` through its Cholesky factor.
pub fn gaussian<const N: usize>(rng: &mut ChaCha8Rng, cov: &nalgebra::SMatrix<f64, N, N>) -> SVector<f64, N> {
    let l = cov.cholesky().expect("covariance must be positive definite").l();
    let z = SVector::<f64, N>::from_fn(|_, _| StandardNormal.sample(rng));
    l * z
}

/// Per-step NEES of a single-target tracker on the measured components,
/// with the truth drawn from the filter's own motion model. The IoU gate is
/// opened so that association never drops the lone target.
pub fn single_target_nees(rng: &mut ChaCha8Rng, steps: usize, dt: f64) -> Vec<f64> {
    let cfg = TrackerConfig {
        confirm_hits: 1,
        min_iou: 0.0,
        ..TrackerConfig::default()
    };
    let r: MeasMatrix = SensorConfig::default().measurement_covariance();
    let f = transition(dt);
    let q: StateMatrix = process_noise(dt, &cfg);
    // q has zero-variance directions only when a density is zero
    let q_reg = q + StateMatrix::identity() * 1e-15;
    let h = measurement_matrix();

    let mut truth = StateVector::zeros();
    truth.fixed_rows_mut::<3>(0).copy_from_slice(&[0.0, 0.0, 0.8]);
    truth.fixed_rows_mut::<3>(3).copy_from_slice(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0]);
    truth.fixed_rows_mut::<4>(6).copy_from_slice(&[5.0, 5.0, 6.0, 0.3]);

    let mut tracker = Tracker::new(AgentId(0), cfg.clone());
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        if k > 0 {
            truth = f * truth + gaussian(rng, &q_reg);
        }
        let z = h * truth + gaussian(rng, &r);
        let bbox = Box3D::new(z.fixed_rows::<3>(0).into_owned(), z[3], z[4], z[5], z[6]).expect("positive box");
        let det = Detection {
            bbox,
            measurement_covariance: r,
            timestamp: k as f64 * dt,
            source_agent: AgentId(0),
        };
        let tracks = tracker.step(&[det], dt).expect("tracker step");
        assert_eq!(tracks.len(), 1, "single target must keep a single track (step {k})");
        let t = &tracks[0];
        let mut e: SVector<f64, MEAS_DIM> = h * (t.state - truth);
        e[6] = assured_ddf::geometry::wrap_angle(e[6]);
        let p = h * t.covariance * h.transpose();
        let p_inv = p.cholesky().expect("pd").inverse();
        out.push((e.transpose() * p_inv * e)[(0, 0)]);
    }
    out
}

/// Random symmetric positive-definite matrix with eigenvalues roughly in
/// `[0.05, 20]`.
pub fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
    let m = &a * a.transpose() + DMatrix::identity(n, n) * rng.random_range(0.05..1.0);
    (&m + m.transpose()) * 0.5
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0))
}

/// CI weight minimising `det(Sigma_CI)` over a uniform grid of step `h`.
/// With `I2 = L L^T` and `lambda` the eigenvalues of `L^-1 I1 L^-T`,
/// `det(w I1 + (1 - w) I2) = det(I2) * prod(1 + w (lambda - 1))`.
pub fn ci_grid_omega(cov1: &DMatrix<f64>, cov2: &DMatrix<f64>, h: f64) -> f64 {
    let i1 = cov1.clone().try_inverse().unwrap();
    let i2 = cov2.clone().try_inverse().unwrap();
    let l_inv = i2.cholesky().unwrap().l().try_inverse().unwrap();
    let m = &l_inv * i1 * l_inv.transpose();
    let lambda = nalgebra::SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues;
    let steps = (1.0 / h).round() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=steps {
        let w = k as f64 * h;
        let log_det: f64 = lambda.iter().map(|l| (1.0 + w * (l - 1.0)).ln()).sum();
        if log_det > best.1 {
            best = (w, log_det);
        }
    }
    best.0
}
