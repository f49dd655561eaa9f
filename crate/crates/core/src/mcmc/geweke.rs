//! Joint-distribution ("getting it right") check of the full sampler.
//!
//! The marginal-conditional simulator draws parameters from the prior and
//! data from the model. The successive-conditional simulator alternates one
//! sampler sweep with a fresh draw of `y` given parameters and latent paths.
//! Both target the same joint law iff the sampler is correct.

use nalgebra::DMatrix;
use rand::Rng;

use crate::dist::{
    ks_two_sample, rng_for_stream, sample_inv_gamma, sample_shifted_beta, std_normal, SimRng,
};
use crate::error::Result;
use crate::mcmc::diagnostics::inefficiency_factor;
use crate::mcmc::minnesota::minnesota_prior_covariance;
use crate::mcmc::{sweep_factor_model, Acceptance};
use crate::model::{
    leverage_moments_unchecked, simulate_model, InMean, LatentPaths, ModelConfig, ModelData, Params, PriorHyper,
};

#[derive(Debug, Clone)]
pub struct GewekeSetup {
    pub cfg: ModelConfig,
    pub priors: PriorHyper,
    /// Fixed Minnesota scales (not re-estimated from each replicate).
    pub s2: Vec<f64>,
    pub n: usize,
    pub block_size: usize,
}

pub const FUNCTIONAL_NAMES: [&str; 12] = [
    "beta[0]", "gamma[0]", "Psi[0]", "B[1,0]", "Bbar[0,0]", "mu[1]", "Phi[2]", "Sigma[0]", "rho[2]", "mean h",
    "mean f", "mean y^2",
];

pub fn draw_prior<R: Rng + ?Sized>(rng: &mut R, cfg: &ModelConfig, priors: &PriorHyper, s2: &[f64]) -> Result<Params> {
    let (p, q) = (cfg.p, cfg.q);
    let mut params = Params::default_for(cfg);
    let mv = minnesota_prior_covariance(priors.minnesota_pi1, priors.minnesota_pi2, s2, p, cfg.lags)?;
    for i in 0..p {
        for c in 0..p * cfg.lags {
            params.bbar[(i, c)] = mv[(i, c)].sqrt() * std_normal(rng);
        }
        for j in 0..q {
            params.loadings[(i, j)] = priors.loading_var.sqrt() * std_normal(rng);
        }
    }
    for j in 0..q {
        params.gamma[j] = priors.gamma_mean + priors.gamma_var.sqrt() * std_normal(rng);
        if cfg.factor_dynamics {
            params.psi[j] = sample_shifted_beta(rng, priors.psi_a, priors.psi_b);
        }
    }
    if cfg.in_mean != InMean::None {
        for b in params.beta.iter_mut() {
            *b = priors.beta_mean + priors.beta_var.sqrt() * std_normal(rng);
        }
    }
    for i in 0..cfg.k() {
        if i < p {
            params.mu[i] = priors.mu_mean + priors.mu_var.sqrt() * std_normal(rng);
        }
        params.phi[i] = sample_shifted_beta(rng, priors.phi_a, priors.phi_b);
        params.sigma2[i] = sample_inv_gamma(rng, priors.sigma2_shape, priors.sigma2_scale);
        if cfg.leverage_active(i) {
            params.rho[i] = rng.random_range(-1.0..1.0);
        }
    }
    Ok(params)
}

/// Draws `y` given parameters and latent paths; the presample is zero.
pub fn regenerate_y<R: Rng + ?Sized>(rng: &mut R, cfg: &ModelConfig, params: &Params, lat: &LatentPaths) -> DMatrix<f64> {
    let (p, lags) = (cfg.p, cfg.lags);
    let n = lat.n();
    let hs: Vec<Vec<f64>> = (0..p).map(|i| lat.h_series(i)).collect();
    let mut y = DMatrix::zeros(n, p);
    for t in 0..n {
        for i in 0..p {
            let mut mean = 0.0;
            for l in 1..=lags.min(t) {
                for j in 0..p {
                    mean += params.bbar[(i, (l - 1) * p + j)] * y[(t - l, j)];
                }
            }
            for j in 0..cfg.q {
                mean += params.loadings[(i, j)] * lat.f[(t, j)];
            }
            mean += params.beta_for(cfg, i) * (0.5 * hs[i][t]).exp();
            let (m, s2) = leverage_moments_unchecked(&hs[i], &params.sv(i), t);
            y[(t, i)] = mean + m + s2.sqrt() * std_normal(rng);
        }
    }
    y
}

pub fn functionals(params: &Params, lat: &LatentPaths, y: &DMatrix<f64>) -> [f64; 12] {
    [
        params.beta[0],
        params.gamma[0],
        params.psi[0],
        params.loadings[(1, 0)],
        params.bbar[(0, 0)],
        params.mu[1],
        params.phi[2],
        params.sigma2[0],
        params.rho[2],
        lat.h.mean(),
        lat.f.mean(),
        y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64,
    ]
}

pub fn marginal_conditional(setup: &GewekeSetup, draws: usize, seed: u64) -> Result<Vec<[f64; 12]>> {
    let mut rng = rng_for_stream(seed, 1);
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let params = draw_prior(&mut rng, &setup.cfg, &setup.priors, &setup.s2)?;
        let sim_seed: u64 = rng.random();
        let (y, lat) = simulate_model(&setup.cfg, &params, setup.n, sim_seed, None)?;
        out.push(functionals(&params, &lat, &y));
    }
    Ok(out)
}

/// State of a successive-conditional run; `advance` can be called repeatedly
/// until the effective sample size is large enough.
pub struct SuccessiveChain<'a> {
    setup: &'a GewekeSetup,
    rng: SimRng,
    params: Params,
    lat: LatentPaths,
    y: DMatrix<f64>,
    pi: (f64, f64),
    pub acceptance: Acceptance,
}

impl<'a> SuccessiveChain<'a> {
    pub fn new(setup: &'a GewekeSetup, seed: u64) -> Result<Self> {
        let mut rng: SimRng = rng_for_stream(seed, 2);
        let params = draw_prior(&mut rng, &setup.cfg, &setup.priors, &setup.s2)?;
        let sim_seed: u64 = rng.random();
        let (y, lat) = simulate_model(&setup.cfg, &params, setup.n, sim_seed, None)?;
        let pi = (setup.priors.minnesota_pi1, setup.priors.minnesota_pi2);
        Ok(SuccessiveChain { setup, rng, params, lat, y, pi, acceptance: Acceptance::default() })
    }

    /// Runs `iterations` steps, keeping the functionals of every `thin`-th.
    pub fn advance(&mut self, iterations: usize, thin: usize) -> Result<Vec<[f64; 12]>> {
        let setup = self.setup;
        let cfg = &setup.cfg;
        let thin = thin.max(1);
        let presample = DMatrix::zeros(cfg.lags, cfg.p);
        let mut out = Vec::with_capacity(iterations / thin);
        for it in 0..iterations {
            let data = ModelData::with_presample(std::mem::replace(&mut self.y, DMatrix::zeros(0, 0)), &presample)?;
            sweep_factor_model(
                &mut self.rng,
                cfg,
                &mut self.params,
                &mut self.lat,
                &mut self.pi,
                &data,
                &setup.priors,
                &setup.s2,
                setup.block_size,
                &mut self.acceptance,
            )?;
            self.y = regenerate_y(&mut self.rng, cfg, &self.params, &self.lat);
            if (it + 1) % thin == 0 {
                out.push(functionals(&self.params, &self.lat, &self.y));
            }
        }
        Ok(out)
    }
}

/// Runs `iterations` successive-conditional steps, keeping every `thin`-th.
pub fn successive_conditional(
    setup: &GewekeSetup,
    iterations: usize,
    thin: usize,
    seed: u64,
) -> Result<(Vec<[f64; 12]>, Acceptance)> {
    let mut chain = SuccessiveChain::new(setup, seed)?;
    let out = chain.advance(iterations, thin)?;
    Ok((out, chain.acceptance))
}

#[derive(Debug, Clone)]
pub struct FunctionalComparison {
    pub name: &'static str,
    pub ks_stat: f64,
    pub p_value: f64,
    pub ess_marginal: f64,
    pub ess_successive: f64,
}

/// Two-sample KS comparison per functional with effective sample sizes `n / IF`.
pub fn compare(mc: &[[f64; 12]], sc: &[[f64; 12]]) -> Vec<FunctionalComparison> {
    (0..12)
        .map(|g| {
            let a: Vec<f64> = mc.iter().map(|r| r[g]).collect();
            let b: Vec<f64> = sc.iter().map(|r| r[g]).collect();
            let ess = |x: &[f64]| x.len() as f64 / inefficiency_factor(x).unwrap_or(1.0).max(1.0);
            let (ea, eb) = (ess(&a), ess(&b));
            let (d, pv) = ks_two_sample(&a, &b, Some((ea, eb)));
            FunctionalComparison { name: FUNCTIONAL_NAMES[g], ks_stat: d, p_value: pv, ess_marginal: ea, ess_successive: eb }
        })
        .collect()
}
