//! Model family, parameter blocks, priors, deterministic model algebra,
//! a simulator and the joint log density.
//!
//! Observation and factor equations:
//!
//! ```text
//! y_t = sum_l B_l y_{t-l} + B f_t + Lambda_t beta + V_1t^{1/2} eps_1t
//! f_t = gamma + Psi (f_{t-1} - gamma) + V_2t^{1/2} eps_2t,     f_0 = gamma
//! h_{t+1} = mu + Phi (h_t - mu) + eta_t,   corr(eps_it, eta_it) = rho_i
//! ```
//!
//! Index convention: volatility index `i < p` belongs to series `i`, index
//! `p + j` to factor `j`. Time is 0-based throughout the crate.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{
    inv_gamma_logpdf, normal_logpdf, rng_from_seed, shifted_beta_logpdf, std_normal, LN_2PI,
};
use crate::error::{Error, Result};
use crate::mcmc::minnesota::minnesota_prior_covariance;

/// Upper bound on `|h|` accepted anywhere in the samplers.
pub const H_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InMean {
    None,
    Observation,
    Factor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leverage {
    None,
    FactorsOnly,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub p: usize,
    pub q: usize,
    pub lags: usize,
    /// Free `Psi` (the `D` prefix); `false` fixes `Psi = 0`.
    pub factor_dynamics: bool,
    pub in_mean: InMean,
    pub leverage: Leverage,
    pub benchmark_lsvvar: bool,
}

impl ModelConfig {
    /// Builds one of the named variants (`DFSV`, `DFSVL`, `DFSVM`, `DFSVML`,
    /// `FSV`, ..., `LSVVAR`). Leverage variants free only the factor
    /// correlations; use [`ModelConfig::with_leverage`] to change that.
    pub fn variant(name: &str, p: usize, q: usize, lags: usize) -> Result<Self> {
        let upper = name.trim().to_ascii_uppercase();
        if upper == "LSVVAR" {
            return Ok(ModelConfig {
                p,
                q: 0,
                lags,
                factor_dynamics: false,
                in_mean: InMean::None,
                leverage: Leverage::None,
                benchmark_lsvvar: true,
            });
        }
        let (dynamics, rest) = if let Some(r) = upper.strip_prefix("DFSV") {
            (true, r)
        } else if let Some(r) = upper.strip_prefix("FSV") {
            (false, r)
        } else {
            return Err(Error::InvalidConfig(format!("unknown model variant {name:?}")));
        };
        let (in_mean, rest) = if let Some(r) = rest.strip_prefix("MF") {
            (InMean::Factor, r)
        } else if let Some(r) = rest.strip_prefix('M') {
            (InMean::Observation, r)
        } else {
            (InMean::None, rest)
        };
        let leverage = match rest {
            "" => Leverage::None,
            "L" => Leverage::FactorsOnly,
            _ => return Err(Error::InvalidConfig(format!("unknown model variant {name:?}"))),
        };
        let cfg = ModelConfig { p, q, lags, factor_dynamics: dynamics, in_mean, leverage, benchmark_lsvvar: false };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_leverage(mut self, leverage: Leverage) -> Self {
        self.leverage = leverage;
        self
    }

    pub fn name(&self) -> String {
        if self.benchmark_lsvvar {
            return "LSVVAR".into();
        }
        let mut s = String::from(if self.factor_dynamics { "DFSV" } else { "FSV" });
        match self.in_mean {
            InMean::None => {}
            InMean::Observation => s.push('M'),
            InMean::Factor => s.push_str("MF"),
        }
        if self.leverage != Leverage::None {
            s.push('L');
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::InvalidConfig("lag order must be at least 1".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if self.benchmark_lsvvar {
            if self.q != 0 || self.in_mean != InMean::None || self.leverage != Leverage::None || self.factor_dynamics {
                return Err(Error::InvalidConfig("LSVVAR takes no factor, in-mean or leverage settings".into()));
            }
            return Ok(());
        }
        if self.q == 0 || self.q >= self.p {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= q < p, got q={} and p={}",
                self.q, self.p
            )));
        }
        Ok(())
    }

    /// Number of volatility processes.
    pub fn k(&self) -> usize {
        self.p + self.q
    }

    pub fn beta_len(&self) -> usize {
        match self.in_mean {
            InMean::Factor => self.q,
            _ => self.p,
        }
    }

    pub fn leverage_active(&self, i: usize) -> bool {
        match self.leverage {
            Leverage::None => false,
            Leverage::FactorsOnly => i >= self.p,
            Leverage::All => true,
        }
    }

    /// Whether volatility index `i` carries an in-mean coefficient.
    pub fn in_mean_index(&self, i: usize) -> Option<usize> {
        match self.in_mean {
            InMean::Observation if i < self.p => Some(i),
            InMean::Factor if i >= self.p => Some(i - self.p),
            _ => None,
        }
    }
}

impl FromStr for InMean {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(InMean::None),
            "observation" => Ok(InMean::Observation),
            "factor" => Ok(InMean::Factor),
            _ => Err(Error::InvalidConfig(format!("unknown in-mean setting {s:?}"))),
        }
    }
}

/// Parameters of one stochastic-volatility index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvParams {
    pub mu: f64,
    pub phi: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl SvParams {
    pub fn stationary_var(&self) -> f64 {
        self.sigma2 / (1.0 - self.phi * self.phi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// p x pL, `(B_1, ..., B_L)`.
    #[serde(rename = "Bbar", with = "crate::serde_matrix")]
    pub bbar: DMatrix<f64>,
    /// p x q loadings.
    #[serde(rename = "B", with = "crate::serde_matrix")]
    pub loadings: DMatrix<f64>,
    pub gamma: Vec<f64>,
    #[serde(rename = "Psi")]
    pub psi: Vec<f64>,
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    #[serde(rename = "Phi")]
    pub phi: Vec<f64>,
    #[serde(rename = "Sigma")]
    pub sigma2: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Params {
    /// Zero coefficients, unit-scale volatilities with `phi = 0.9`, `sigma2 = 0.1`.
    pub fn default_for(cfg: &ModelConfig) -> Self {
        let k = cfg.k();
        Params {
            bbar: DMatrix::zeros(cfg.p, cfg.p * cfg.lags),
            loadings: DMatrix::zeros(cfg.p, cfg.q),
            gamma: vec![0.0; cfg.q],
            psi: vec![0.0; cfg.q],
            beta: vec![0.0; cfg.beta_len()],
            mu: vec![0.0; k],
            phi: vec![0.9; k],
            sigma2: vec![0.1; k],
            rho: vec![0.0; k],
        }
    }

    pub fn sv(&self, i: usize) -> SvParams {
        SvParams { mu: self.mu[i], phi: self.phi[i], sigma2: self.sigma2[i], rho: self.rho[i] }
    }

    pub fn set_sv(&mut self, i: usize, sv: SvParams) {
        self.mu[i] = sv.mu;
        self.phi[i] = sv.phi;
        self.sigma2[i] = sv.sigma2;
        self.rho[i] = sv.rho;
    }

    pub fn beta_for(&self, cfg: &ModelConfig, i: usize) -> f64 {
        cfg.in_mean_index(i).map_or(0.0, |j| self.beta[j])
    }

    /// Checks dimensions, stationarity, correlation bounds and identification
    /// zeros. `allow_zero_sigma` admits degenerate `sigma2 = 0` (simulation).
    pub fn validate(&self, cfg: &ModelConfig, allow_zero_sigma: bool) -> Result<()> {
        let (p, q, k) = (cfg.p, cfg.q, cfg.k());
        let dims_ok = self.bbar.nrows() == p
            && self.bbar.ncols() == p * cfg.lags
            && self.loadings.nrows() == p
            && self.loadings.ncols() == q
            && self.gamma.len() == q
            && self.psi.len() == q
            && self.beta.len() == cfg.beta_len()
            && self.mu.len() == k
            && self.phi.len() == k
            && self.sigma2.len() == k
            && self.rho.len() == k;
        if !dims_ok {
            return Err(Error::DimensionMismatch("parameter blocks do not match the model configuration".into()));
        }
        if let Some(j) = self.psi.iter().position(|x| !(x.abs() < 1.0)) {
            return Err(Error::NonStationaryParams(format!("|psi_{j}| = {} >= 1", self.psi[j].abs())));
        }
        if let Some(i) = self.phi.iter().position(|x| !(x.abs() < 1.0)) {
            return Err(Error::NonStationaryParams(format!("|phi_{i}| = {} >= 1", self.phi[i].abs())));
        }
        for (i, &s) in self.sigma2.iter().enumerate() {
            let ok = if allow_zero_sigma { s >= 0.0 } else { s > 0.0 };
            if !ok || !s.is_finite() {
                return Err(Error::NonStationaryParams(format!("sigma2_{i} = {s} is not a valid variance")));
            }
        }
        for (i, &r) in self.rho.iter().enumerate() {
            if !(r.abs() < 1.0) {
                return Err(Error::NonStationaryParams(format!("|rho_{i}| = {} >= 1", r.abs())));
            }
            if !cfg.leverage_active(i) && r != 0.0 {
                return Err(Error::InvalidConfig(format!("rho_{i} must be 0 when leverage is disabled")));
            }
        }
        if self.mu[p..].iter().any(|&m| m != 0.0) {
            return Err(Error::InvalidConfig("factor log-volatility means must be exactly 0".into()));
        }
        if !cfg.factor_dynamics && self.psi.iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidConfig("Psi must be 0 without factor dynamics".into()));
        }
        if cfg.in_mean == InMean::None && self.beta.iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidConfig("beta must be 0 without an in-mean effect".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPaths {
    /// n x q
    #[serde(with = "crate::serde_matrix")]
    pub f: DMatrix<f64>,
    /// n x (p+q)
    #[serde(with = "crate::serde_matrix")]
    pub h: DMatrix<f64>,
}

impl LatentPaths {
    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn h_series(&self, i: usize) -> Vec<f64> {
        self.h.column(i).iter().copied().collect()
    }
}

/// Prior hyperparameters. Scalars apply elementwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorHyper {
    pub minnesota_pi1: f64,
    pub minnesota_pi2: f64,
    /// Sample (pi1, pi2) by Metropolis-Hastings instead of holding them fixed.
    pub sample_shrinkage: bool,
    /// AR(L) residual variances; empty means "estimate from the data".
    pub s2: Vec<f64>,
    pub beta_mean: f64,
    pub beta_var: f64,
    pub loading_var: f64,
    pub gamma_mean: f64,
    pub gamma_var: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub psi_a: f64,
    pub psi_b: f64,
    pub mu_mean: f64,
    pub mu_var: f64,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
    /// Prior variance for free `B0` elements and intercepts of the benchmark VAR.
    pub lsvvar_coef_var: f64,
}

impl Default for PriorHyper {
    fn default() -> Self {
        PriorHyper {
            minnesota_pi1: 0.04,
            minnesota_pi2: 0.25,
            sample_shrinkage: false,
            s2: Vec::new(),
            beta_mean: 0.0,
            beta_var: 0.25,
            loading_var: 1.0,
            gamma_mean: 0.0,
            gamma_var: 100.0,
            phi_a: 20.0,
            phi_b: 1.5,
            psi_a: 1.0,
            psi_b: 1.0,
            mu_mean: 0.0,
            mu_var: 100.0,
            sigma2_shape: 0.005,
            sigma2_scale: 0.005,
            lsvvar_coef_var: 100.0,
        }
    }
}

impl PriorHyper {
    pub fn validate(&self, p: usize) -> Result<()> {
        let positive = [
            ("beta_var", self.beta_var),
            ("loading_var", self.loading_var),
            ("gamma_var", self.gamma_var),
            ("phi_a", self.phi_a),
            ("phi_b", self.phi_b),
            ("psi_a", self.psi_a),
            ("psi_b", self.psi_b),
            ("mu_var", self.mu_var),
            ("sigma2_shape", self.sigma2_shape),
            ("sigma2_scale", self.sigma2_scale),
            ("lsvvar_coef_var", self.lsvvar_coef_var),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::InvalidConfig(format!("prior {name} must be positive, got {v}")));
        }
        if !(self.minnesota_pi1 > 0.0 && self.minnesota_pi2 > 0.0) {
            return Err(Error::NonPositiveShrinkage { pi1: self.minnesota_pi1, pi2: self.minnesota_pi2 });
        }
        if !self.s2.is_empty() && (self.s2.len() != p || self.s2.iter().any(|&v| !(v > 0.0))) {
            return Err(Error::InvalidConfig("s2 must hold p positive variances".into()));
        }
        Ok(())
    }
}

/// Benchmark VAR with independent stochastic volatilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsvvarParams {
    /// Unit lower-triangular contemporaneous matrix.
    #[serde(rename = "B0", with = "crate::serde_matrix")]
    pub b0: DMatrix<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "Bbar", with = "crate::serde_matrix")]
    pub bbar: DMatrix<f64>,
    pub mu: Vec<f64>,
    #[serde(rename = "Phi")]
    pub phi: Vec<f64>,
    #[serde(rename = "Sigma_h")]
    pub sigma2: Vec<f64>,
}

impl LsvvarParams {
    pub fn default_for(p: usize, lags: usize) -> Self {
        LsvvarParams {
            b0: DMatrix::identity(p, p),
            b: vec![0.0; p],
            bbar: DMatrix::zeros(p, p * lags),
            mu: vec![0.0; p],
            phi: vec![0.9; p],
            sigma2: vec![0.1; p],
        }
    }
}

/// Observations with their lag regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    /// n x p
    pub y: DMatrix<f64>,
    /// n x pL, row t = (y_{t-1}', ..., y_{t-L}')
    pub x: DMatrix<f64>,
    pub lags: usize,
}

impl ModelData {
    /// Uses the first `lags` rows of `y_full` as presample.
    pub fn from_full(y_full: &DMatrix<f64>, lags: usize) -> Result<Self> {
        if y_full.nrows() <= lags {
            return Err(Error::DimensionMismatch(format!(
                "need more than {lags} rows, got {}",
                y_full.nrows()
            )));
        }
        let presample = y_full.rows(0, lags).into_owned();
        let y = y_full.rows(lags, y_full.nrows() - lags).into_owned();
        Self::with_presample(y, &presample)
    }

    /// `presample` holds `y_{1-L}, ..., y_0` in chronological order.
    pub fn with_presample(y: DMatrix<f64>, presample: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = y.shape();
        let lags = presample.nrows();
        if presample.ncols() != p {
            return Err(Error::DimensionMismatch("presample width differs from y".into()));
        }
        let at = |s: isize, j: usize| -> f64 {
            if s >= 0 {
                y[(s as usize, j)]
            } else {
                presample[((lags as isize + s) as usize, j)]
            }
        };
        let x = DMatrix::from_fn(n, p * lags, |t, c| {
            let l = c / p + 1;
            at(t as isize - l as isize, c % p)
        });
        Ok(ModelData { y, x, lags })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }
}

pub fn lambda_matrix(h_row: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(h_row.len(), h_row.iter().map(|h| (0.5 * h).exp())))
}

/// `(V1, V2)` from a (p+q)-vector of log-volatilities.
pub fn volatility_matrices(h_row: &[f64], p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let diag = |s: &[f64]| DMatrix::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|h| h.exp())));
    (diag(&h_row[..p]), diag(&h_row[p..]))
}

/// Conditional mean and variance of `exp(h_t/2) eps_t` given the volatility path.
///
/// `t` is 0-based; the last period has no following volatility innovation.
pub fn leverage_adjusted_moments(h: &[f64], sv: &SvParams, t: usize) -> Result<(f64, f64)> {
    let n = h.len();
    if t >= n {
        return Err(Error::IndexOutOfRange(format!("t={t} for a path of length {n}")));
    }
    Ok(leverage_moments_unchecked(h, sv, t))
}

#[inline]
pub(crate) fn leverage_moments_unchecked(h: &[f64], sv: &SvParams, t: usize) -> (f64, f64) {
    let e = h[t].exp();
    if t + 1 < h.len() && sv.rho != 0.0 {
        let eta = h[t + 1] - sv.mu - sv.phi * (h[t] - sv.mu);
        let m = (0.5 * h[t]).exp() * sv.rho / sv.sigma2.sqrt() * eta;
        (m, e * (1.0 - sv.rho * sv.rho))
    } else {
        (0.0, e)
    }
}

/// Simulates `n` periods. `presample` holds `y_{1-L}..y_0` (zeros if `None`).
pub fn simulate_model(
    cfg: &ModelConfig,
    params: &Params,
    n: usize,
    seed: u64,
    presample: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, LatentPaths)> {
    cfg.validate()?;
    params.validate(cfg, true)?;
    if n <= cfg.lags {
        return Err(Error::InvalidConfig(format!("n={n} must exceed the lag order {}", cfg.lags)));
    }
    let (p, q, k, lags) = (cfg.p, cfg.q, cfg.k(), cfg.lags);
    let pre = presample.cloned().unwrap_or_else(|| DMatrix::zeros(lags, p));
    if pre.nrows() != lags || pre.ncols() != p {
        return Err(Error::DimensionMismatch("presample must be L x p".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut y = DMatrix::zeros(n, p);
    let mut f = DMatrix::zeros(n, q);
    let mut h = DMatrix::zeros(n, k);
    for i in 0..k {
        let sv = params.sv(i);
        h[(0, i)] = sv.mu + sv.stationary_var().sqrt() * std_normal(&mut rng);
    }
    let lagged = |y: &DMatrix<f64>, t: usize, l: usize, j: usize| -> f64 {
        if t >= l {
            y[(t - l, j)]
        } else {
            pre[(lags + t - l, j)]
        }
    };
    let mut eps = vec![0.0; k];
    for t in 0..n {
        for i in 0..k {
            let sv = params.sv(i);
            let e = std_normal(&mut rng);
            let z = std_normal(&mut rng);
            eps[i] = e;
            let sd = sv.sigma2.sqrt();
            let eta = sv.rho * sd * e + sd * (1.0 - sv.rho * sv.rho).sqrt() * z;
            if t + 1 < n {
                h[(t + 1, i)] = sv.mu + sv.phi * (h[(t, i)] - sv.mu) + eta;
            }
        }
        for j in 0..q {
            let prev = if t == 0 { params.gamma[j] } else { f[(t - 1, j)] };
            let i = p + j;
            let sd = (0.5 * h[(t, i)]).exp();
            let mean = params.gamma[j] + params.psi[j] * (prev - params.gamma[j]) + params.beta_for(cfg, i) * sd;
            f[(t, j)] = mean + sd * eps[i];
        }
        for i in 0..p {
            let mut mean = 0.0;
            for l in 1..=lags {
                for j in 0..p {
                    mean += params.bbar[(i, (l - 1) * p + j)] * lagged(&y, t, l, j);
                }
            }
            for j in 0..q {
                mean += params.loadings[(i, j)] * f[(t, j)];
            }
            let sd = (0.5 * h[(t, i)]).exp();
            mean += params.beta_for(cfg, i) * sd;
            y[(t, i)] = mean + sd * eps[i];
        }
    }
    Ok((y, LatentPaths { f, h }))
}

/// Mean-equation residuals `w_it` net of the in-mean term, n x (p+q).
///
/// Column `i < p` is `y_it - Bbar_i x_t - B_i f_t - beta_i exp(h_it/2)`;
/// column `p + j` is the factor innovation net of any in-mean term.
pub fn innovations(cfg: &ModelConfig, params: &Params, latents: &LatentPaths, data: &ModelData) -> DMatrix<f64> {
    let (p, q) = (cfg.p, cfg.q);
    let n = data.n();
    let mut e = DMatrix::zeros(n, cfg.k());
    let fit = &data.x * params.bbar.transpose() + &latents.f * params.loadings.transpose();
    for t in 0..n {
        for i in 0..p {
            e[(t, i)] = data.y[(t, i)] - fit[(t, i)] - params.beta_for(cfg, i) * (0.5 * latents.h[(t, i)]).exp();
        }
        for j in 0..q {
            let i = p + j;
            let prev = if t == 0 { params.gamma[j] } else { latents.f[(t - 1, j)] };
            e[(t, i)] = latents.f[(t, j)]
                - params.gamma[j]
                - params.psi[j] * (prev - params.gamma[j])
                - params.beta_for(cfg, i) * (0.5 * latents.h[(t, i)]).exp();
        }
    }
    e
}

/// Log density of the innovation pairs and the stationary start for one index.
pub(crate) fn sv_index_loglik(e: &[f64], h: &[f64], sv: &SvParams) -> f64 {
    let n = h.len();
    let sd = sv.sigma2.sqrt();
    let one_m_r2 = 1.0 - sv.rho * sv.rho;
    let mut ll = normal_logpdf(h[0], sv.mu, sv.stationary_var());
    for t in 0..n {
        let eps = e[t] * (-0.5 * h[t]).exp();
        if t + 1 < n {
            let eta = h[t + 1] - sv.mu - sv.phi * (h[t] - sv.mu);
            let quad = (eps * eps - 2.0 * sv.rho * eps * eta / sd + eta * eta / sv.sigma2) / one_m_r2;
            ll += -LN_2PI - 0.5 * (h[t] + sv.sigma2.ln() + one_m_r2.ln()) - 0.5 * quad;
        } else {
            ll += -0.5 * (LN_2PI + h[t]) - 0.5 * eps * eps;
        }
    }
    ll
}

/// Log prior of every free parameter block under `cfg`.
pub fn log_prior(cfg: &ModelConfig, params: &Params, priors: &PriorHyper, s2: &[f64]) -> Result<f64> {
    let (p, q) = (cfg.p, cfg.q);
    let mut lp = 0.0;
    for i in 0..p {
        for j in 0..q {
            lp += normal_logpdf(params.loadings[(i, j)], 0.0, priors.loading_var);
        }
    }
    let mvar = minnesota_prior_covariance(priors.minnesota_pi1, priors.minnesota_pi2, s2, p, cfg.lags)?;
    for i in 0..p {
        for c in 0..p * cfg.lags {
            lp += normal_logpdf(params.bbar[(i, c)], 0.0, mvar[(i, c)]);
        }
    }
    for j in 0..q {
        lp += normal_logpdf(params.gamma[j], priors.gamma_mean, priors.gamma_var);
        if cfg.factor_dynamics {
            lp += shifted_beta_logpdf(params.psi[j], priors.psi_a, priors.psi_b);
        }
    }
    if cfg.in_mean != InMean::None {
        for &b in &params.beta {
            lp += normal_logpdf(b, priors.beta_mean, priors.beta_var);
        }
    }
    for i in 0..cfg.k() {
        if i < p {
            lp += normal_logpdf(params.mu[i], priors.mu_mean, priors.mu_var);
        }
        lp += shifted_beta_logpdf(params.phi[i], priors.phi_a, priors.phi_b);
        lp += inv_gamma_logpdf(params.sigma2[i], priors.sigma2_shape, priors.sigma2_scale);
        if cfg.leverage_active(i) {
            lp -= std::f64::consts::LN_2;
        }
    }
    Ok(lp)
}

/// Log of the unnormalized joint posterior kernel `p(y, f, h | theta) p(theta)`.
///
/// `s2` are the Minnesota scale variances (length p).
pub fn log_joint_density(
    cfg: &ModelConfig,
    params: &Params,
    latents: &LatentPaths,
    data: &ModelData,
    priors: &PriorHyper,
    s2: &[f64],
) -> Result<f64> {
    cfg.validate()?;
    let n = data.n();
    if latents.h.shape() != (n, cfg.k()) || latents.f.shape() != (n, cfg.q) || data.p() != cfg.p || s2.len() != cfg.p {
        return Err(Error::DimensionMismatch("latent paths, data and model dimensions disagree".into()));
    }
    params.validate(cfg, false)?;
    let e = innovations(cfg, params, latents, data);
    let mut total = 0.0;
    for i in 0..cfg.k() {
        let ei: Vec<f64> = e.column(i).iter().copied().collect();
        total += sv_index_loglik(&ei, &latents.h_series(i), &params.sv(i));
    }
    total += log_prior(cfg, params, priors, s2)?;
    if !total.is_finite() {
        return Err(Error::NonFiniteDensity(format!("log joint density evaluated to {total}")));
    }
    Ok(total)
}
