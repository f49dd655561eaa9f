//! Benchmark VAR with unit lower-triangular `B0` and independent log-volatilities:
//!
//! ```text
//! B0 y_t = b + Bbar x_t + diag(exp(h_t/2)) eps_t
//! ```
//!
//! Equation `i` is a regression of `y_it` on `(y_1t..y_{i-1,t}, 1, x_t)`
//! with coefficients `(-B0_i1..-B0_{i,i-1}, b_i, Bbar_i)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::sample_gaussian_from_precision;
use crate::error::Result;
use crate::mcmc::minnesota::{minnesota_prior_covariance, sample_shrinkage};
use crate::mcmc::sv::{sample_sv_block, SvOptions, SvPrior};
use crate::mcmc::Acceptance;
use crate::model::{LsvvarParams, ModelData, PriorHyper, SvParams};

/// Posterior precision and linear term of equation `i`.
pub fn equation_conditional(
    i: usize,
    h: &[f64],
    data: &ModelData,
    priors: &PriorHyper,
    minnesota_row: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let n = data.n();
    let px = data.x.ncols();
    let d = i + 1 + px;
    let mut xw = DMatrix::zeros(n, d);
    let mut yw = DVector::zeros(n);
    for t in 0..n {
        let sw = (-0.5 * h[t]).exp();
        for j in 0..i {
            xw[(t, j)] = data.y[(t, j)] * sw;
        }
        xw[(t, i)] = sw;
        for c in 0..px {
            xw[(t, i + 1 + c)] = data.x[(t, c)] * sw;
        }
        yw[t] = data.y[(t, i)] * sw;
    }
    let mut prec = xw.transpose() * &xw;
    for c in 0..d {
        let v = if c <= i { priors.lsvvar_coef_var } else { minnesota_row[c - i - 1] };
        prec[(c, c)] += 1.0 / v;
    }
    (prec, xw.transpose() * yw)
}

/// Structural residuals `B0 y_t - b - Bbar x_t`, n x p.
pub fn structural_residuals(params: &LsvvarParams, data: &ModelData) -> DMatrix<f64> {
    let fit = &data.x * params.bbar.transpose();
    let by = &data.y * params.b0.transpose();
    DMatrix::from_fn(data.n(), data.p(), |t, i| by[(t, i)] - params.b[i] - fit[(t, i)])
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_lsvvar<R: Rng + ?Sized>(
    rng: &mut R,
    lags: usize,
    params: &mut LsvvarParams,
    h: &mut DMatrix<f64>,
    pi: &mut (f64, f64),
    data: &ModelData,
    priors: &PriorHyper,
    s2: &[f64],
    block_size: usize,
    acc: &mut Acceptance,
) -> Result<()> {
    let p = data.p();
    let mv = minnesota_prior_covariance(pi.0, pi.1, s2, p, lags)?;
    for i in 0..p {
        let hi: Vec<f64> = h.column(i).iter().copied().collect();
        let row: Vec<f64> = mv.row(i).iter().copied().collect();
        let (prec, lin) = equation_conditional(i, &hi, data, priors, &row);
        let draw = sample_gaussian_from_precision(rng, &prec, &lin, "benchmark VAR equation")?;
        for j in 0..i {
            params.b0[(i, j)] = -draw[j];
        }
        params.b[i] = draw[i];
        for c in 0..p * lags {
            params.bbar[(i, c)] = draw[i + 1 + c];
        }
    }
    let resid = structural_residuals(params, data);
    let svp = SvPrior::from(priors);
    let opts = SvOptions { mu_free: true, rho_free: false, block_size };
    for i in 0..p {
        let w: Vec<f64> = resid.column(i).iter().copied().collect();
        let mut hi: Vec<f64> = h.column(i).iter().copied().collect();
        let mut sv = SvParams { mu: params.mu[i], phi: params.phi[i], sigma2: params.sigma2[i], rho: 0.0 };
        let a = sample_sv_block(rng, &w, 0.0, &mut hi, &mut sv, &svp, &opts)?;
        params.mu[i] = sv.mu;
        params.phi[i] = sv.phi;
        params.sigma2[i] = sv.sigma2;
        h.set_column(i, &DVector::from_vec(hi));
        acc.h_blocks += a.blocks;
        acc.h_accepted += a.blocks_accepted;
        acc.phi_accepted += a.phi_accepted as usize;
        acc.sigma2_accepted += a.sigma2_accepted as usize;
    }
    if priors.sample_shrinkage {
        *pi = sample_shrinkage(rng, *pi, &params.bbar, s2, lags, 0.3);
    }
    acc.sweeps += 1;
    Ok(())
}
