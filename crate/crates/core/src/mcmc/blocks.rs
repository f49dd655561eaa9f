//! Conditional updates of the coefficient blocks and the factor path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::{sample_gaussian_from_precision, sample_truncated_normal, shifted_beta_logpdf, std_normal};
use crate::error::{Error, Result};
use crate::mcmc::minnesota::minnesota_prior_covariance;
use crate::model::{leverage_moments_unchecked, InMean, LatentPaths, ModelConfig, ModelData, Params, PriorHyper};
use crate::statespace::{simulation_smoother_draw, LinearGaussianSS};

/// Residuals before the in-mean term: `y - Bbar x - B f` for series and the
/// factor innovation `f_t - gamma - Psi (f_{t-1} - gamma)` for factors.
pub fn raw_residuals(cfg: &ModelConfig, params: &Params, f: &DMatrix<f64>, data: &ModelData) -> DMatrix<f64> {
    let (p, q) = (cfg.p, cfg.q);
    let n = data.n();
    let fit = &data.x * params.bbar.transpose() + f * params.loadings.transpose();
    DMatrix::from_fn(n, p + q, |t, i| {
        if i < p {
            data.y[(t, i)] - fit[(t, i)]
        } else {
            let j = i - p;
            let prev = if t == 0 { params.gamma[j] } else { f[(t - 1, j)] };
            f[(t, j)] - params.gamma[j] - params.psi[j] * (prev - params.gamma[j])
        }
    })
}

/// Leverage-adjusted conditional moments `(mu_it, sigma2_it)` along the path of index `i`.
pub fn leverage_path(params: &Params, h: &[f64], i: usize) -> (Vec<f64>, Vec<f64>) {
    let sv = params.sv(i);
    (0..h.len()).map(|t| leverage_moments_unchecked(h, &sv, t)).unzip()
}

/// Posterior mean and variance of each in-mean coefficient, in `beta` order.
pub fn beta_conditional(
    cfg: &ModelConfig,
    params: &Params,
    latents: &LatentPaths,
    data: &ModelData,
    priors: &PriorHyper,
) -> Vec<(f64, f64)> {
    if cfg.in_mean == InMean::None {
        return Vec::new();
    }
    let raw = raw_residuals(cfg, params, &latents.f, data);
    let n = data.n();
    let offset = if cfg.in_mean == InMean::Factor { cfg.p } else { 0 };
    (0..cfg.beta_len())
        .map(|j| {
            let i = offset + j;
            let h = latents.h_series(i);
            let (m, s2) = leverage_path(params, &h, i);
            let mut prec = 1.0 / priors.beta_var;
            let mut lin = priors.beta_mean / priors.beta_var;
            for t in 0..n {
                let x = (0.5 * h[t]).exp();
                prec += x * x / s2[t];
                lin += x * (raw[(t, i)] - m[t]) / s2[t];
            }
            (lin / prec, 1.0 / prec)
        })
        .collect()
}

pub fn sample_beta<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ModelConfig,
    params: &Params,
    latents: &LatentPaths,
    data: &ModelData,
    priors: &PriorHyper,
) -> Result<Vec<f64>> {
    beta_conditional(cfg, params, latents, data, priors)
        .into_iter()
        .map(|(m, v)| {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveDefinitePosteriorCov("beta".into()));
            }
            Ok(m + v.sqrt() * std_normal(rng))
        })
        .collect()
}

/// Posterior precision and linear term for row `i` of `(B, Bbar)`,
/// coefficients ordered as `(B_i1..B_iq, Bbar_i)`.
pub fn var_row_conditional(
    cfg: &ModelConfig,
    params: &Params,
    latents: &LatentPaths,
    data: &ModelData,
    prior_var: &DVector<f64>,
    i: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let (q, n) = (cfg.q, data.n());
    let d = q + data.x.ncols();
    let h = latents.h_series(i);
    let (m, s2) = leverage_path(params, &h, i);
    let beta = params.beta_for(cfg, i);
    let mut xw = DMatrix::zeros(n, d);
    let mut yw = DVector::zeros(n);
    for t in 0..n {
        let sw = 1.0 / s2[t].sqrt();
        for c in 0..q {
            xw[(t, c)] = latents.f[(t, c)] * sw;
        }
        for c in 0..data.x.ncols() {
            xw[(t, q + c)] = data.x[(t, c)] * sw;
        }
        yw[t] = (data.y[(t, i)] - beta * (0.5 * h[t]).exp() - m[t]) * sw;
    }
    let mut prec = xw.transpose() * &xw;
    for c in 0..d {
        prec[(c, c)] += 1.0 / prior_var[c];
    }
    (prec, xw.transpose() * yw)
}

/// Prior variances of row `i` of `(B, Bbar)`.
pub fn var_row_prior(cfg: &ModelConfig, priors: &PriorHyper, pi: (f64, f64), s2: &[f64], i: usize) -> Result<DVector<f64>> {
    let mv = minnesota_prior_covariance(pi.0, pi.1, s2, cfg.p, cfg.lags)?;
    Ok(DVector::from_fn(cfg.q + cfg.p * cfg.lags, |c, _| {
        if c < cfg.q {
            priors.loading_var
        } else {
            mv[(i, c - cfg.q)]
        }
    }))
}

/// Draws `(B, Bbar)` row by row.
#[allow(clippy::too_many_arguments)]
pub fn sample_var_coeffs<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ModelConfig,
    params: &Params,
    latents: &LatentPaths,
    data: &ModelData,
    priors: &PriorHyper,
    pi: (f64, f64),
    s2: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, q) = (cfg.p, cfg.q);
    let mut loadings = DMatrix::zeros(p, q);
    let mut bbar = DMatrix::zeros(p, p * cfg.lags);
    for i in 0..p {
        let pv = var_row_prior(cfg, priors, pi, s2, i)?;
        let (prec, lin) = var_row_conditional(cfg, params, latents, data, &pv, i);
        let draw = sample_gaussian_from_precision(rng, &prec, &lin, "VAR coefficient row")?;
        for c in 0..q {
            loadings[(i, c)] = draw[c];
        }
        for c in 0..p * cfg.lags {
            bbar[(i, c)] = draw[q + c];
        }
    }
    Ok((loadings, bbar))
}

// Factor `j` regression pieces: response net of in-mean and leverage terms,
// and its variance, for t = 0..n.
fn factor_terms(cfg: &ModelConfig, params: &Params, latents: &LatentPaths, j: usize) -> (Vec<f64>, Vec<f64>) {
    let i = cfg.p + j;
    let h = latents.h_series(i);
    let (m, s2) = leverage_path(params, &h, i);
    let beta = params.beta_for(cfg, i);
    let off = (0..h.len()).map(|t| beta * (0.5 * h[t]).exp() + m[t]).collect::<Vec<_>>();
    (off, s2)
}

/// Metropolis-Hastings update of each `psi_j` with a truncated-normal proposal.
pub fn sample_psi<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ModelConfig,
    params: &Params,
    latents: &LatentPaths,
    priors: &PriorHyper,
) -> Result<Vec<f64>> {
    let n = latents.n();
    let mut out = params.psi.clone();
    for j in 0..cfg.q {
        let (off, s2) = factor_terms(cfg, params, latents, j);
        let g = params.gamma[j];
        let (mut prec, mut lin) = (0.0, 0.0);
        for t in 1..n {
            let x = latents.f[(t - 1, j)] - g;
            let r = latents.f[(t, j)] - g - off[t];
            prec += x * x / s2[t];
            lin += x * r / s2[t];
        }
        if !(prec > 0.0) || !prec.is_finite() {
            return Err(Error::DegenerateProposal(format!("psi_{j} proposal variance is not positive")));
        }
        let cand = sample_truncated_normal(rng, lin / prec, 1.0 / prec.sqrt(), -1.0, 1.0);
        let log_ratio = psi_log_ratio(cand, params.psi[j], priors.psi_a, priors.psi_b);
        if rng.random::<f64>().ln() < log_ratio {
            out[j] = cand;
        }
    }
    Ok(out)
}

/// Log acceptance ratio of a `psi` candidate: the shifted-Beta prior ratio.
pub fn psi_log_ratio(cand: f64, cur: f64, a: f64, b: f64) -> f64 {
    shifted_beta_logpdf(cand, a, b) - shifted_beta_logpdf(cur, a, b)
}

/// Posterior mean and variance of each `gamma_j`.
pub fn gamma_conditional(cfg: &ModelConfig, params: &Params, latents: &LatentPaths, priors: &PriorHyper) -> Vec<(f64, f64)> {
    let n = latents.n();
    (0..cfg.q)
        .map(|j| {
            let (off, s2) = factor_terms(cfg, params, latents, j);
            let psi = params.psi[j];
            let mut prec = 1.0 / priors.gamma_var;
            let mut lin = priors.gamma_mean / priors.gamma_var;
            for t in 0..n {
                // f_0 = gamma: the first period loads on gamma with coefficient one
                let (coef, resp) = if t == 0 {
                    (1.0, latents.f[(0, j)] - off[0])
                } else {
                    (1.0 - psi, latents.f[(t, j)] - psi * latents.f[(t - 1, j)] - off[t])
                };
                prec += coef * coef / s2[t];
                lin += coef * resp / s2[t];
            }
            (lin / prec, 1.0 / prec)
        })
        .collect()
}

pub fn sample_gamma<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ModelConfig,
    params: &Params,
    latents: &LatentPaths,
    priors: &PriorHyper,
) -> Result<Vec<f64>> {
    gamma_conditional(cfg, params, latents, priors)
        .into_iter()
        .map(|(m, v)| {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveDefinitePosteriorCov("gamma".into()));
            }
            Ok(m + v.sqrt() * std_normal(rng))
        })
        .collect()
}

/// State-space form of the factor path given volatilities and parameters.
pub fn factor_state_space(cfg: &ModelConfig, params: &Params, h: &DMatrix<f64>, data: &ModelData) -> LinearGaussianSS {
    let (p, q, n) = (cfg.p, cfg.q, data.n());
    let r = p + q;
    let mean_fit = &data.x * params.bbar.transpose();
    let moments: Vec<(Vec<f64>, Vec<f64>)> = (0..p + q)
        .map(|i| leverage_path(params, &h.column(i).iter().copied().collect::<Vec<_>>(), i))
        .collect();
    let psi = DMatrix::from_diagonal(&DVector::from_vec(params.psi.clone()));
    let gamma = DVector::from_vec(params.gamma.clone());
    let drift = &gamma - &psi * &gamma;
    let factor_offset = |t: usize| -> DVector<f64> {
        DVector::from_fn(q, |j, _| {
            let i = p + j;
            params.beta_for(cfg, i) * (0.5 * h[(t, i)]).exp() + moments[i].0[t]
        })
    };
    let mut sys = LinearGaussianSS {
        z: vec![params.loadings.clone(); n],
        c: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        t: vec![psi; n],
        d: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        a1: &gamma + factor_offset(0),
        p1: DMatrix::from_fn(q, q, |a, b| if a == b { moments[p + a].1[0] } else { 0.0 }),
    };
    for t in 0..n {
        sys.c.push(DVector::from_fn(p, |i, _| {
            mean_fit[(t, i)] + params.beta_for(cfg, i) * (0.5 * h[(t, i)]).exp() + moments[i].0[t]
        }));
        let mut g = DMatrix::zeros(p, r);
        for i in 0..p {
            g[(i, i)] = moments[i].1[t].sqrt();
        }
        sys.g.push(g);
        let mut hh = DMatrix::zeros(q, r);
        if t + 1 < n {
            for j in 0..q {
                hh[(j, p + j)] = moments[p + j].1[t + 1].sqrt();
            }
            sys.d.push(&drift + factor_offset(t + 1));
        } else {
            sys.d.push(DVector::zeros(q));
        }
        sys.h.push(hh);
    }
    sys
}

pub fn sample_factors<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ModelConfig,
    params: &Params,
    h: &DMatrix<f64>,
    data: &ModelData,
) -> Result<DMatrix<f64>> {
    let sys = factor_state_space(cfg, params, h, data);
    Ok(simulation_smoother_draw(&sys, &data.y, rng)?.states)
}
