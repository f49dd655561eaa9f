//! Shared helpers for the integration and acceptance tests.
#![allow(dead_code)]

use dfsvm::dist::{rng_from_seed, std_normal, SimRng};
use dfsvm::model::{ModelConfig, Params};
use dfsvm::statespace::LinearGaussianSS;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn normal_matrix(rng: &mut SimRng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * std_normal(rng))
}

pub fn normal_vector(rng: &mut SimRng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * std_normal(rng))
}

/// Random time-varying system with k <= 3 states, m <= 2 observables, n <= 8
/// periods, and observations drawn from the system itself.
pub fn random_system(seed: u64) -> (LinearGaussianSS, DMatrix<f64>) {
    let mut rng = rng_from_seed(seed);
    let k = rng.random_range(1..=3);
    let m = rng.random_range(1..=2);
    let n = rng.random_range(1..=8);
    let r = k + m;
    let mut sys = LinearGaussianSS {
        z: Vec::new(),
        c: Vec::new(),
        g: Vec::new(),
        t: Vec::new(),
        d: Vec::new(),
        h: Vec::new(),
        a1: normal_vector(&mut rng, k, 1.0),
        p1: {
            let a = normal_matrix(&mut rng, k, k, 0.7);
            &a * a.transpose() + DMatrix::identity(k, k) * 0.1
        },
    };
    for _ in 0..n {
        sys.z.push(normal_matrix(&mut rng, m, k, 1.0));
        sys.c.push(normal_vector(&mut rng, m, 0.5));
        sys.g.push(normal_matrix(&mut rng, m, r, 0.6));
        sys.t.push(normal_matrix(&mut rng, k, k, 0.4));
        sys.d.push(normal_vector(&mut rng, k, 0.3));
        sys.h.push(normal_matrix(&mut rng, k, r, 0.5));
    }
    let obs = simulate_system(&sys, &mut rng);
    (sys, obs)
}

/// One forward draw of the observations.
pub fn simulate_system(sys: &LinearGaussianSS, rng: &mut SimRng) -> DMatrix<f64> {
    let (n, k, m, r) = (sys.n(), sys.state_dim(), sys.obs_dim(), sys.noise_dim());
    let l = sys.p1.clone().cholesky().expect("P1 is positive definite").l();
    let mut x = &sys.a1 + l * normal_vector(rng, k, 1.0);
    let mut obs = DMatrix::zeros(n, m);
    for t in 0..n {
        let u = normal_vector(rng, r, 1.0);
        let y = &sys.z[t] * &x + &sys.c[t] + &sys.g[t] * &u;
        obs.row_mut(t).copy_from(&y.transpose());
        x = &sys.t[t] * &x + &sys.d[t] + &sys.h[t] * &u;
    }
    obs
}

/// Sample mean and covariance of the rows of `draws` (N x d).
pub fn moments(draws: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = draws.nrows() as f64;
    let mean = draws.row_mean().transpose();
    let centred = DMatrix::from_fn(draws.nrows(), draws.ncols(), |i, j| draws[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (n - 1.0);
    (mean, cov)
}

/// Largest standardized deviation of sample moments from Gaussian targets,
/// using the normal-theory standard errors of means and covariances.
pub fn max_moment_z(draws: &DMatrix<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = draws.nrows() as f64;
    let (m, c) = moments(draws);
    let d = mean.len();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        let se = (cov[(i, i)] / n).sqrt();
        if se > 1e-12 {
            worst = worst.max((m[i] - mean[i]).abs() / se);
        }
        for j in 0..=i {
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)] * cov[(i, j)]) / n).sqrt();
            if se > 1e-12 {
                worst = worst.max((c[(i, j)] - cov[(i, j)]).abs() / se);
            }
        }
    }
    worst
}

/// Standardized error of a sample mean against `target`.
pub fn mean_z(xs: &[f64], target: f64) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m - target).abs() / (v / n).sqrt()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

/// Random mean-equation parameters; volatility blocks stay at their defaults.
pub fn random_params(cfg: &ModelConfig, seed: u64) -> Params {
    let mut rng = rng_from_seed(seed);
    let mut p = Params::default_for(cfg);
    p.bbar = normal_matrix(&mut rng, cfg.p, cfg.p * cfg.lags, 0.2);
    p.loadings = normal_matrix(&mut rng, cfg.p, cfg.q, 0.8);
    for j in 0..cfg.q {
        p.gamma[j] = std_normal(&mut rng);
        p.psi[j] = rng.random_range(-0.9..0.9);
    }
    for b in p.beta.iter_mut() {
        *b = std_normal(&mut rng);
    }
    p
}
