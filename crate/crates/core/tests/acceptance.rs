//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any blocking criterion fails.
//!
//! Run alone with `cargo test -p dfsvm --test acceptance`. Criterion 8 needs
//! a FRED-QD quarterly CSV named by the `DFSVM_FRED_QD` environment variable
//! and reports NOT RUN without it.

mod common;

use std::time::{Duration, Instant};

use common::{max_moment_z, mean_var, random_params, random_system};
use dfsvm::data_io::{load_csv_panel, standardize_panel, transform_panel, Quarter, TransformCode};
use dfsvm::dist::{rng_for_stream, rng_from_seed, std_normal};
use dfsvm::evaluation::{cumulative_series, dm_test, model_confidence_set, percentage_gain, LossMode, McsOptions};
use dfsvm::forecast::{build_companion, mixture_log_density, predictive_moments};
use dfsvm::mcmc::geweke::{compare, marginal_conditional, GewekeSetup, SuccessiveChain};
use dfsvm::mcmc::{
    credible_interval, inefficiency_factor, posterior_summary, run_chain, sample_beta, sample_gamma,
    sample_var_coeffs, ChainConfig, DrawSet,
};
use dfsvm::model::{
    log_joint_density, simulate_model, InMean, Leverage, ModelConfig, ModelData, Params, PriorHyper,
};
use dfsvm::statespace::{dense_gaussian_oracle, kalman_filter, SimulationSmoother};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

enum Status {
    Pass,
    Fail,
    NotRun,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail }
    }
}

fn run(id: usize, title: &str, budget: Duration, blocking: bool, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = body();
    let elapsed = start.elapsed();
    if matches!(out.status, Status::Pass) && elapsed > budget {
        out.status = Status::Fail;
        out.detail.push_str("; over the runtime budget");
    }
    let label = match out.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::NotRun => "NOT RUN",
    };
    println!(
        "criterion {id} {title}: {label} ({}; {:.1} s of {:.0} s)",
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    !blocking || !matches!(out.status, Status::Fail)
}

// ---------------------------------------------------------------------------
// 1. state-space oracle

fn state_space_oracle() -> Outcome {
    let systems = 200;
    let mut worst_ll: f64 = 0.0;
    for seed in 0..systems {
        let (sys, obs) = random_system(seed);
        let ll = kalman_filter(&sys, &obs).unwrap().loglik;
        let oracle = dense_gaussian_oracle(&sys, &obs).unwrap();
        worst_ll = worst_ll.max((ll - oracle.loglik).abs());
    }
    let draws = 100_000;
    let mut worst_z: f64 = 0.0;
    for s in 0..10u64 {
        let (sys, obs) = random_system(10_000 + s);
        let oracle = dense_gaussian_oracle(&sys, &obs).unwrap();
        let sm = SimulationSmoother::new(&sys, &obs).unwrap();
        let (n, k) = (sys.n(), sys.state_dim());
        let mut rng = rng_for_stream(77, s);
        let mut out = DMatrix::zeros(draws, n * k);
        for d in 0..draws {
            let x = sm.draw(&mut rng).states;
            for t in 0..n {
                for j in 0..k {
                    out[(d, t * k + j)] = x[(t, j)];
                }
            }
        }
        let mean = DVector::from_fn(n * k, |c, _| oracle.cond_mean[(c / k, c % k)]);
        worst_z = worst_z.max(max_moment_z(&out, &mean, &oracle.cond_cov));
    }
    Outcome::check(
        worst_ll < 1e-8 && worst_z < 4.0,
        format!("{systems} systems, max |loglik diff| {worst_ll:.1e}; 10 x {draws} smoother draws, max moment z {worst_z:.2}"),
    )
}

// ---------------------------------------------------------------------------
// 2. conjugate blocks against the joint density

/// Mean and covariance of the Gaussian kernel `exp(f)` for quadratic `f`,
/// read off by unit-step central differences (exact for quadratics).
fn gaussian_from_quadratic(f: &dyn Fn(&[f64]) -> f64, x0: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = x0.len();
    let at = |shifts: &[(usize, f64)]| {
        let mut x = x0.to_vec();
        for &(i, s) in shifts {
            x[i] += s;
        }
        f(&x)
    };
    let f0 = f(x0);
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        let (up, down) = (at(&[(i, 1.0)]), at(&[(i, -1.0)]));
        grad[i] = 0.5 * (up - down);
        hess[(i, i)] = up + down - 2.0 * f0;
        for j in 0..i {
            let v = 0.25
                * (at(&[(i, 1.0), (j, 1.0)]) - at(&[(i, 1.0), (j, -1.0)]) - at(&[(i, -1.0), (j, 1.0)])
                    + at(&[(i, -1.0), (j, -1.0)]));
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let cov = (-hess).try_inverse().expect("kernel precision is invertible");
    let mean = DVector::from_column_slice(x0) + &cov * grad;
    (mean, cov)
}

fn conjugate_blocks() -> Outcome {
    let cfg = ModelConfig::variant("DFSVML", 3, 1, 1).unwrap().with_leverage(Leverage::All);
    let mut truth = Params::default_for(&cfg);
    truth.bbar = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, -0.1, 0.3, 0.05, 0.0, 0.2, 0.2]);
    truth.loadings = DMatrix::from_column_slice(3, 1, &[1.0, 0.6, -0.4]);
    truth.gamma = vec![0.3];
    truth.psi = vec![0.6];
    truth.beta = vec![-0.5, 0.4, 0.2];
    truth.mu = vec![-0.5, 0.0, 0.3, 0.0];
    truth.phi = vec![0.9, 0.8, 0.85, 0.9];
    truth.sigma2 = vec![0.1, 0.2, 0.15, 0.1];
    truth.rho = vec![-0.4, 0.3, 0.0, -0.3];
    let (y, lat) = simulate_model(&cfg, &truth, 40, 5, None).unwrap();
    let data = ModelData::with_presample(y, &DMatrix::zeros(1, 3)).unwrap();
    let priors = PriorHyper::default();
    let s2 = vec![0.8, 1.2, 1.0];
    let pi = (priors.minnesota_pi1, priors.minnesota_pi2);
    let density = |p: &Params| log_joint_density(&cfg, p, &lat, &data, &priors, &s2).unwrap();
    let draws = 100_000;
    let mut rng = rng_from_seed(2024);

    let beta_kernel = |x: &[f64]| {
        let mut p = truth.clone();
        p.beta = x.to_vec();
        density(&p)
    };
    let (bm, bc) = gaussian_from_quadratic(&beta_kernel, &truth.beta);
    let mut beta_draws = DMatrix::zeros(draws, 3);
    for d in 0..draws {
        let b = sample_beta(&mut rng, &cfg, &truth, &lat, &data, &priors).unwrap();
        beta_draws.row_mut(d).copy_from_slice(&b);
    }
    let z_beta = max_moment_z(&beta_draws, &bm, &bc);

    let gamma_kernel = |x: &[f64]| {
        let mut p = truth.clone();
        p.gamma = x.to_vec();
        density(&p)
    };
    let (gm, gc) = gaussian_from_quadratic(&gamma_kernel, &truth.gamma);
    let mut gamma_draws = DMatrix::zeros(draws, 1);
    for d in 0..draws {
        gamma_draws[(d, 0)] = sample_gamma(&mut rng, &cfg, &truth, &lat, &priors).unwrap()[0];
    }
    let z_gamma = max_moment_z(&gamma_draws, &gm, &gc);

    // Row i of (B, Bbar) is stacked as (B_i, Bbar_i).
    let width = 1 + 3;
    let pack = |p: &Params| -> Vec<f64> {
        (0..3)
            .flat_map(|i| std::iter::once(p.loadings[(i, 0)]).chain(p.bbar.row(i).iter().copied().collect::<Vec<_>>()))
            .collect()
    };
    let coef_kernel = |x: &[f64]| {
        let mut p = truth.clone();
        for i in 0..3 {
            p.loadings[(i, 0)] = x[i * width];
            for c in 0..3 {
                p.bbar[(i, c)] = x[i * width + 1 + c];
            }
        }
        density(&p)
    };
    let (cm, cc) = gaussian_from_quadratic(&coef_kernel, &pack(&truth));
    let mut coef_draws = DMatrix::zeros(draws, 3 * width);
    for d in 0..draws {
        let (b, bbar) = sample_var_coeffs(&mut rng, &cfg, &truth, &lat, &data, &priors, pi, &s2).unwrap();
        let mut p = truth.clone();
        p.loadings = b;
        p.bbar = bbar;
        coef_draws.row_mut(d).copy_from_slice(&pack(&p));
    }
    let z_coef = max_moment_z(&coef_draws, &cm, &cc);
    Outcome::check(
        z_beta < 4.0 && z_gamma < 4.0 && z_coef < 4.0,
        format!("{draws} draws per block; max moment z beta {z_beta:.2}, gamma {z_gamma:.2}, (B, Bbar) {z_coef:.2}"),
    )
}

// ---------------------------------------------------------------------------
// 3. joint-distribution test of the whole sampler

fn geweke() -> Outcome {
    let cfg = ModelConfig::variant("DFSVML", 2, 1, 1).unwrap().with_leverage(Leverage::All);
    let priors = PriorHyper { mu_var: 1.0, gamma_var: 1.0, sigma2_shape: 10.0, sigma2_scale: 1.0, ..PriorHyper::default() };
    let setup = GewekeSetup { cfg, priors, s2: vec![1.0, 1.0], n: 20, block_size: 10 };
    let target_ess = 20_000.0;
    let mc = marginal_conditional(&setup, 30_000, 11).unwrap();
    let mut chain = SuccessiveChain::new(&setup, 12).unwrap();
    let (chunk, thin, cap) = (1_000_000, 25, 18_000_000);
    let mut sc = Vec::new();
    let mut iterations = 0;
    let mut table = compare(&mc, &mc);
    while iterations < cap {
        sc.extend(chain.advance(chunk, thin).unwrap());
        iterations += chunk;
        table = compare(&mc, &sc);
        let min_ess = table.iter().map(|c| c.ess_marginal.min(c.ess_successive)).fold(f64::INFINITY, f64::min);
        if min_ess >= target_ess {
            break;
        }
    }
    let min_ess = table.iter().map(|c| c.ess_marginal.min(c.ess_successive)).fold(f64::INFINITY, f64::min);
    let worst = table.iter().min_by(|a, b| a.p_value.total_cmp(&b.p_value)).unwrap();
    let all_p = table.iter().all(|c| c.p_value > 0.01);
    let listing: Vec<String> = table.iter().map(|c| format!("{} {:.3}", c.name, c.p_value)).collect();
    Outcome::check(
        all_p && min_ess >= target_ess,
        format!(
            "{iterations} successive steps, min ESS {min_ess:.0}, smallest KS p {:.3} ({}); h acceptance {:.2}; p-values: {}",
            worst.p_value,
            worst.name,
            chain.acceptance.h_rate(),
            listing.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. parameter recovery

fn recovery_truth(cfg: &ModelConfig) -> Params {
    let mut t = Params::default_for(cfg);
    for i in 0..5 {
        t.bbar[(i, i)] = 0.3;
        t.bbar[(i, 5 + i)] = 0.1;
    }
    t.loadings = DMatrix::from_column_slice(5, 1, &[1.0, 0.8, 0.6, -0.5, 0.4]);
    t.gamma = vec![0.2];
    t.psi = vec![0.5];
    t.beta = vec![-0.5, 0.3, 0.0, -0.2, 0.4];
    t.mu = vec![-1.0, -0.5, -1.2, -0.8, -0.3, 0.0];
    t.phi = vec![0.9, 0.85, 0.9, 0.8, 0.9, 0.9];
    t.sigma2 = vec![0.1, 0.15, 0.1, 0.2, 0.1, 0.1];
    t.rho = vec![0.0, 0.0, 0.0, 0.0, 0.0, -0.3];
    t
}

/// The factor is identified up to sign; draws are reflected so that `B[0,0] > 0`.
fn align_factor_sign(draws: &mut DrawSet, factor_vol: usize) {
    for p in draws.params.iter_mut() {
        if p.loadings[(0, 0)] < 0.0 {
            p.loadings.column_mut(0).neg_mut();
            p.gamma[0] = -p.gamma[0];
            p.rho[factor_vol] = -p.rho[factor_vol];
        }
    }
}

fn recovery() -> Outcome {
    let cfg = ModelConfig::variant("DFSVML", 5, 1, 2).unwrap();
    let truth = recovery_truth(&cfg);
    let reps = 20u64;
    let results: Vec<(usize, usize, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let (y, _) = simulate_model(&cfg, &truth, 500, 900 + r, None).unwrap();
            let data = ModelData::with_presample(y, &DMatrix::zeros(2, 5)).unwrap();
            let chain = ChainConfig { n_draws: 20_000, n_burnin: 2_000, seed: 300 + r, ..ChainConfig::default() };
            let mut draws = run_chain(&cfg, &chain, &data, &PriorHyper::default()).unwrap();
            align_factor_sign(&mut draws, 5);
            let mut reference = draws.clone();
            reference.params = vec![truth.clone()];
            let true_values = reference.traces();
            let (mut covered, mut total) = (0, 0);
            for ((name, trace), (tname, tv)) in draws.traces().iter().zip(&true_values) {
                assert_eq!(name, tname);
                let (lo, hi) = credible_interval(trace, 0.90).unwrap();
                total += 1;
                covered += usize::from(lo <= tv[0] && tv[0] <= hi);
            }
            let beta0 = draws.trace("beta[0]").unwrap();
            let pr_neg = beta0.iter().filter(|b| **b < 0.0).count() as f64 / beta0.len() as f64;
            (covered, total, pr_neg)
        })
        .collect();
    let covered: usize = results.iter().map(|r| r.0).sum();
    let total: usize = results.iter().map(|r| r.1).sum();
    let coverage = covered as f64 / total as f64;
    let strong = results.iter().filter(|r| r.2 > 0.9).count();
    let probs: Vec<String> = results.iter().map(|r| format!("{:.2}", r.2)).collect();
    Outcome::check(
        coverage >= 0.75 && strong >= 16,
        format!(
            "{reps} replications, 90% interval coverage {covered}/{total} = {:.1}%, Pr(beta_0 < 0) > 0.9 in {strong}/{reps} [{}]",
            100.0 * coverage,
            probs.join(" ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. companion-form prediction

fn companion_one_step(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let p = rng.random_range(2..5);
    let q = rng.random_range(1..p);
    let lags = rng.random_range(1..4);
    let name = if rng.random::<bool>() { "DFSVMF" } else { "DFSVM" };
    let cfg = ModelConfig::variant(name, p, q, lags).unwrap();
    let params = random_params(&cfg, seed ^ 0x5eed);
    let h_y: Vec<f64> = (0..cfg.k()).map(|_| std_normal(&mut rng)).collect();
    let h_f: Vec<f64> = (0..cfg.k()).map(|_| std_normal(&mut rng)).collect();
    let sys = build_companion(&cfg, &params, &h_y, &h_f).unwrap();
    let z = DVector::from_fn(sys.dim, |_, _| std_normal(&mut rng));
    let next = &sys.intercept + &sys.a * &z;
    let mut err: f64 = 0.0;
    for i in 0..p {
        let mut m = 0.0;
        for l in 0..lags {
            for j in 0..p {
                m += params.bbar[(i, l * p + j)] * z[l * p + j];
            }
        }
        for j in 0..q {
            m += params.loadings[(i, j)] * z[p * lags + j];
        }
        if cfg.in_mean == InMean::Observation {
            m += params.beta[i] * (0.5 * h_y[i]).exp();
        }
        err = err.max((next[i] - m).abs()).max((sys.noise[(i, i)] - h_y[i].exp()).abs());
    }
    for l in 1..lags {
        for j in 0..p {
            err = err.max((next[l * p + j] - z[(l - 1) * p + j]).abs());
        }
    }
    for j in 0..q {
        let f = z[p * lags + j];
        let mut m = params.gamma[j] + params.psi[j] * (f - params.gamma[j]);
        if cfg.in_mean == InMean::Factor {
            m += params.beta[j] * (0.5 * h_f[p + j]).exp();
        }
        let d = p * lags + j;
        err = err.max((next[d] - m).abs()).max((sys.noise[(d, d)] - h_f[p + j].exp()).abs());
    }
    err
}

/// Largest standardized error of k-step predictive means and variances
/// against direct simulation of the model equations.
fn k_step_moments(name: &str, seed: u64) -> f64 {
    let (p, q, lags, k) = (3, 1, 2, 4);
    let cfg = ModelConfig::variant(name, p, q, lags).unwrap();
    let params = random_params(&cfg, seed);
    let mut rng = rng_from_seed(seed + 1);
    let path = DMatrix::from_fn(k + 1, cfg.k(), |_, _| 0.5 * std_normal(&mut rng));
    let row = |s: usize| -> Vec<f64> { path.row(s).iter().copied().collect() };
    let systems: Vec<_> = (0..k).map(|s| build_companion(&cfg, &params, &row(s), &row(s + 1)).unwrap()).collect();
    let history: Vec<Vec<f64>> = (0..lags).map(|_| (0..p).map(|_| std_normal(&mut rng)).collect()).collect();
    let (f_mean, f_var) = (0.4, 0.6);
    let mut z = DVector::zeros(p * lags + q);
    for (l, y) in history.iter().enumerate() {
        z.rows_mut(l * p, p).copy_from_slice(y);
    }
    z[p * lags] = f_mean;
    let mut zc = DMatrix::zeros(p * lags + q, p * lags + q);
    zc[(p * lags, p * lags)] = f_var;
    let target = predictive_moments(&z, &zc, &systems, p);

    let sims = 200_000;
    let mut out = vec![vec![Vec::new(); p]; k];
    for _ in 0..sims {
        let mut lagged = history.clone();
        let mut f = f_mean + f_var.sqrt() * std_normal(&mut rng);
        for s in 0..k {
            let (hy, hf) = (row(s), row(s + 1));
            let ynew: Vec<f64> = (0..p)
                .map(|i| {
                    let mut m = params.loadings[(i, 0)] * f;
                    for (l, y) in lagged.iter().enumerate() {
                        for j in 0..p {
                            m += params.bbar[(i, l * p + j)] * y[j];
                        }
                    }
                    if cfg.in_mean == InMean::Observation {
                        m += params.beta[i] * (0.5 * hy[i]).exp();
                    }
                    m + (0.5 * hy[i]).exp() * std_normal(&mut rng)
                })
                .collect();
            for (i, v) in ynew.iter().enumerate() {
                out[s][i].push(*v);
            }
            let mut fm = params.gamma[0] + params.psi[0] * (f - params.gamma[0]);
            if cfg.in_mean == InMean::Factor {
                fm += params.beta[0] * (0.5 * hf[p]).exp();
            }
            f = fm + (0.5 * hf[p]).exp() * std_normal(&mut rng);
            lagged.rotate_right(1);
            lagged[0] = ynew;
        }
    }
    let n = sims as f64;
    let mut worst: f64 = 0.0;
    for s in 0..k {
        for i in 0..p {
            let (m, v) = mean_var(&out[s][i]);
            let (tm, tv) = (target[s].0[i], target[s].1[(i, i)]);
            worst = worst.max((m - tm).abs() / (tv / n).sqrt()).max((v - tv).abs() / (tv * (2.0 / n).sqrt()));
        }
    }
    worst
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let dx = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for s in 0..=steps {
        let w = if s == 0 || s == steps {
            1.0
        } else if s % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * f(lo + s as f64 * dx);
    }
    total * dx / 3.0
}

fn companion_prediction() -> Outcome {
    let one_step = (0..100u64).map(companion_one_step).fold(0.0, f64::max);
    let z = k_step_moments("DFSVM", 31).max(k_step_moments("DFSVMF", 32));
    let mixtures: [&[(f64, f64)]; 3] = [
        &[(0.0, 1.0)],
        &[(0.0, 1.0), (2.0, 0.25), (-3.0, 4.0), (0.5, 0.01)],
        &[(10.0, 9.0), (-5.0, 0.04), (1.0, 2.0)],
    ];
    let integral_err = mixtures
        .iter()
        .map(|c| (simpson(|x| mixture_log_density(x, c).exp(), -60.0, 60.0, 600_000) - 1.0).abs())
        .fold(0.0, f64::max);
    Outcome::check(
        one_step < 1e-12 && z < 4.0 && integral_err < 1e-6,
        format!(
            "100 one-step checks, max error {one_step:.1e}; k-step moments max z {z:.2}; density integral error {integral_err:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. evaluation statistics

/// Bartlett long-run variance written as an explicit double sum.
fn reference_dm(d: &[f64], h: usize) -> (f64, f64) {
    let n = d.len();
    let mean = d.iter().sum::<f64>() / n as f64;
    let mut v = 0.0;
    for s in 0..n {
        for t in 0..n {
            let lag = s.abs_diff(t);
            if lag < h {
                v += (1.0 - lag as f64 / h as f64) * (d[s] - mean) * (d[t] - mean);
            }
        }
    }
    v /= n as f64;
    let stat = mean / (v / n as f64).sqrt();
    (stat, Normal::standard().cdf(stat))
}

fn evaluation_statistics() -> Outcome {
    let mut notes = Vec::new();
    let arithmetic = percentage_gain(75.0, 100.0).unwrap() == 25.0
        && percentage_gain(50.0, 200.0).unwrap() == 75.0
        && percentage_gain(150.0, 100.0).unwrap() == -50.0
        && percentage_gain(7.0, 7.0).unwrap() == 0.0
        && cumulative_series(&[1.0, -2.0, 3.0], LossMode::Sfe).unwrap() == vec![1.0, 5.0, 14.0]
        && cumulative_series(&[-1.5, 0.5, -2.0], LossMode::Lpl).unwrap() == vec![-1.5, -1.0, -3.0];
    notes.push(format!("gain/cumulative arithmetic {}", if arithmetic { "exact" } else { "wrong" }));

    // Fixed 40-observation loss pair.
    let model: Vec<f64> = (0..40).map(|t| (0.7 * t as f64).sin().powi(2) + 0.05 * t as f64).collect();
    let bench: Vec<f64> = (0..40).map(|t| (1.3 * t as f64 + 0.4).cos().powi(2) + 1.0).collect();
    let d: Vec<f64> = model.iter().zip(&bench).map(|(a, b)| a - b).collect();
    let mut dm_err: f64 = 0.0;
    for h in [1, 2, 4, 8] {
        let got = dm_test(&model, &bench, h, false).unwrap();
        let (stat, p) = reference_dm(&d, h);
        dm_err = dm_err.max((got.statistic - stat).abs()).max((got.p_value - p).abs());
    }
    notes.push(format!("DM max deviation {dm_err:.1e}"));

    let mut rng = rng_from_seed(5);
    let base: Vec<f64> = (0..100).map(|_| std_normal(&mut rng).powi(2)).collect();
    let same = model_confidence_set(&[base.clone(), base.clone(), base.clone()], &McsOptions::default()).unwrap();
    let identical_ok = same.included.iter().all(|k| *k) && same.p_values.iter().all(|p| *p == 1.0);
    notes.push(format!("identical losses keep {} of 3", same.included.iter().filter(|k| **k).count()));

    let runs = 50u64;
    let eliminated = (0..runs)
        .into_par_iter()
        .filter(|&s| {
            let mut rng = rng_for_stream(600, s);
            let a: Vec<f64> = (0..200).map(|_| std_normal(&mut rng).powi(2)).collect();
            let b: Vec<f64> = (0..200).map(|_| std_normal(&mut rng).powi(2)).collect();
            let shifted: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
            let opts = McsOptions { alpha: 0.1, n_boot: 5000, block_len: None, seed: s };
            let res = model_confidence_set(&[a, b, shifted], &opts).unwrap();
            !res.included[2]
        })
        .count();
    notes.push(format!("+10 model eliminated in {eliminated}/{runs}"));
    Outcome::check(arithmetic && dm_err < 1e-10 && identical_ok && eliminated >= 48, notes.join("; "))
}

// ---------------------------------------------------------------------------
// 7. inefficiency factors

fn diagnostics() -> Outcome {
    let mut iid = Vec::new();
    let mut ar = Vec::new();
    for s in 0..3u64 {
        let mut rng = rng_for_stream(70, s);
        let x: Vec<f64> = (0..100_000).map(|_| std_normal(&mut rng)).collect();
        iid.push(inefficiency_factor(&x).unwrap());
        let mut v = 0.0;
        let trace: Vec<f64> = (0..1_000_000)
            .map(|_| {
                v = 0.5 * v + std_normal(&mut rng);
                v
            })
            .collect();
        ar.push(inefficiency_factor(&trace).unwrap());
    }
    let ok = iid.iter().all(|f| (f - 1.0).abs() <= 0.1) && ar.iter().all(|f| (f - 3.0).abs() <= 0.15);
    Outcome::check(ok, format!("iid IF {iid:.3?}; AR(1) 0.5 IF {ar:.3?}"))
}

// ---------------------------------------------------------------------------
// 8. reduced-scale macro run

const FRED_SERIES: [(&str, TransformCode); 20] = [
    ("GDPC1", TransformCode::DiffLog100),
    ("PCECTPI", TransformCode::DiffLog100),
    ("FEDFUNDS", TransformCode::NoTransform),
    ("PCECC96", TransformCode::DiffLog100),
    ("CMRMTSPLx", TransformCode::DiffLog100),
    ("INDPRO", TransformCode::DiffLog100),
    ("CUMFNS", TransformCode::NoTransform),
    ("UNRATE", TransformCode::NoTransform),
    ("PAYEMS", TransformCode::DiffLog100),
    ("CES0600000007", TransformCode::Log),
    ("CES0600000008", TransformCode::DiffLog100),
    ("WPSFD49207", TransformCode::DiffLog100),
    ("PPIACO", TransformCode::DiffLog100),
    ("AMDMNOx", TransformCode::DiffLog100),
    ("HOUST", TransformCode::Log),
    ("S&P 500", TransformCode::DiffLog100),
    ("EXUSUKx", TransformCode::DiffLog100),
    ("TB3SMFFM", TransformCode::NoTransform),
    ("T5YFFM", TransformCode::NoTransform),
    ("AAAFFM", TransformCode::NoTransform),
];

/// GDP, consumption, sales, production, capacity use, payrolls, orders.
const REAL_ACTIVITY: [usize; 7] = [0, 3, 4, 5, 6, 8, 13];

fn macro_run() -> Outcome {
    let Ok(path) = std::env::var("DFSVM_FRED_QD") else {
        return Outcome { status: Status::NotRun, detail: "set DFSVM_FRED_QD to a FRED-QD CSV to run".into() };
    };
    let spec: Vec<(String, TransformCode)> = FRED_SERIES.iter().map(|(n, c)| (n.to_string(), *c)).collect();
    let panel = match load_csv_panel(&path, &spec).and_then(|p| transform_panel(&p)) {
        Ok(p) => p,
        Err(e) => return Outcome::check(false, format!("loading {path}: {e}")),
    };
    let Some(start) = panel.times.iter().position(|t| *t >= Quarter::new(1980, 1)) else {
        return Outcome::check(false, "no observations after 1980".into());
    };
    let panel = match standardize_panel(&panel.slice_rows(start, panel.n())) {
        Ok(p) => p,
        Err(e) => return Outcome::check(false, format!("standardizing: {e}")),
    };
    let lags = 4;
    let cfg = ModelConfig::variant("DFSVML", 20, 3, lags).unwrap();
    let chain = ChainConfig { n_draws: 20_000, n_burnin: 2_000, seed: 1, ..ChainConfig::default() };
    let draws = match ModelData::from_full(&panel.values, lags).and_then(|d| run_chain(&cfg, &chain, &d, &PriorHyper::default())) {
        Ok(d) => d,
        Err(e) => return Outcome::check(false, format!("chain failed: {e}")),
    };
    let finite = draws.traces().iter().all(|(_, t)| {
        posterior_summary(t).is_ok_and(|s| s.mean.is_finite() && s.q025.is_finite() && s.q975.is_finite())
    });
    let negative = REAL_ACTIVITY
        .iter()
        .filter(|&&i| {
            let t = draws.trace(&format!("beta[{i}]")).unwrap();
            t.iter().filter(|b| **b < 0.0).count() * 2 > t.len()
        })
        .count();
    Outcome::check(
        finite && negative >= 4,
        format!(
            "{} quarters from {}, summaries finite: {finite}, Pr(beta < 0) > 0.5 for {negative}/7 real-activity series",
            panel.n(),
            panel.times[0]
        ),
    )
}

type Criterion = (usize, &'static str, u64, bool, fn() -> Outcome);

fn main() {
    // Numeric arguments select criteria; anything else (harness flags) is ignored.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 8] = [
        (1, "state-space oracle", 2, true, state_space_oracle),
        (2, "conjugate blocks", 2, true, conjugate_blocks),
        (3, "Geweke joint-distribution test", 30, true, geweke),
        (4, "parameter recovery", 120, true, recovery),
        (5, "companion prediction", 10, true, companion_prediction),
        (6, "evaluation statistics", 10, true, evaluation_statistics),
        (7, "inefficiency factors", 5, true, diagnostics),
        (8, "reduced-scale macro run", 600, false, macro_run),
    ];
    let mut ok = true;
    for (id, title, minutes, blocking, body) in criteria {
        if selected.is_empty() || selected.contains(&id) {
            ok &= run(id, title, Duration::from_secs(60 * minutes), blocking, body);
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
