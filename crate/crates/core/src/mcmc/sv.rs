//! Univariate stochastic volatility with in-mean term and leverage.
//!
//! For one volatility index the reduced model is
//!
//! ```text
//! w_t = beta exp(h_t/2) + exp(h_t/2) eps_t
//! h_{t+1} = mu + phi (h_t - mu) + eta_t,   corr(eps_t, eta_t) = rho,  var(eta_t) = sigma2
//! h_0 ~ N(mu, sigma2 / (1 - phi^2))
//! ```
//!
//! The path is updated in random blocks by independence Metropolis-Hastings
//! with a Gaussian proposal at the block's conditional mode. Every proposal is
//! built from quantities the block does not contain, so each step leaves the
//! exact conditional invariant.

use rand::Rng;

use crate::dist::{
    sample_inv_gamma, sample_truncated_normal, shifted_beta_logpdf, std_normal, truncated_normal_logpdf,
};
use crate::error::{Error, Result};
use crate::model::{PriorHyper, SvParams, H_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvPrior {
    pub mu_mean: f64,
    pub mu_var: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
}

impl From<&PriorHyper> for SvPrior {
    fn from(p: &PriorHyper) -> Self {
        SvPrior {
            mu_mean: p.mu_mean,
            mu_var: p.mu_var,
            phi_a: p.phi_a,
            phi_b: p.phi_b,
            sigma2_shape: p.sigma2_shape,
            sigma2_scale: p.sigma2_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvOptions {
    /// `false` holds `mu` fixed (factor volatilities).
    pub mu_free: bool,
    /// `false` holds `rho` fixed.
    pub rho_free: bool,
    /// Nominal length of the random blocks of the path update.
    pub block_size: usize,
}

impl Default for SvOptions {
    fn default() -> Self {
        SvOptions { mu_free: true, rho_free: false, block_size: 40 }
    }
}

/// Acceptance counts from one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SvAcceptance {
    pub blocks: usize,
    pub blocks_accepted: usize,
    pub phi_accepted: bool,
    pub sigma2_accepted: bool,
    pub rho_accepted: bool,
}

struct Model<'a> {
    w: &'a [f64],
    beta: f64,
    sv: SvParams,
}

impl Model<'_> {
    fn n(&self) -> usize {
        self.w.len()
    }

    #[inline]
    fn c(&self) -> f64 {
        1.0 / (1.0 - self.sv.rho * self.sv.rho).sqrt()
    }

    #[inline]
    fn k(&self) -> f64 {
        self.sv.rho / self.sv.sigma2.sqrt()
    }

    #[inline]
    fn eta(&self, h: &[f64], t: usize) -> f64 {
        h[t + 1] - self.sv.mu - self.sv.phi * (h[t] - self.sv.mu)
    }

    #[inline]
    fn eps(&self, h: &[f64], t: usize) -> f64 {
        self.w[t] * (-0.5 * h[t]).exp() - self.beta
    }

    /// Log target terms touching `h[s..=e]`, up to a constant.
    fn local_logp(&self, h: &[f64], s: usize, e: usize) -> f64 {
        let n = self.n();
        let (mu, phi, s2) = (self.sv.mu, self.sv.phi, self.sv.sigma2);
        let (c, k) = (self.c(), self.k());
        let mut lp = 0.0;
        if s == 0 {
            let d = h[0] - mu;
            lp -= 0.5 * d * d * (1.0 - phi * phi) / s2;
        }
        let lo = s.saturating_sub(1);
        for t in lo..=e {
            if t >= s {
                lp -= 0.5 * h[t];
            }
            let eps = self.eps(h, t);
            if t + 1 < n {
                let eta = self.eta(h, t);
                let r = c * (eps - k * eta);
                lp -= 0.5 * (eta * eta / s2 + r * r);
            } else {
                lp -= 0.5 * eps * eps;
            }
        }
        lp
    }

    /// Gradient and tridiagonal negative Hessian (with curvature terms
    /// clipped at zero) of the block log target.
    fn local_derivs(&self, h: &[f64], s: usize, e: usize, g: &mut [f64], dg: &mut [f64], off: &mut [f64]) {
        let n = self.n();
        let (mu, phi, s2) = (self.sv.mu, self.sv.phi, self.sv.sigma2);
        let (c, k) = (self.c(), self.k());
        g.fill(0.0);
        dg.fill(0.0);
        off.fill(0.0);
        let inb = |t: usize| t >= s && t <= e;
        if s == 0 {
            let prec = (1.0 - phi * phi) / s2;
            g[0] -= (h[0] - mu) * prec;
            dg[0] += prec;
        }
        for t in s.saturating_sub(1)..=e {
            let a = self.w[t] * (-0.5 * h[t]).exp();
            if inb(t) {
                g[t - s] -= 0.5;
            }
            if t + 1 < n {
                let eta = self.eta(h, t);
                let r = c * (a - self.beta - k * eta);
                let jt = c * (-0.5 * a + k * phi);
                let jn = -c * k;
                let curv = (r * c * a * 0.25).max(0.0);
                if inb(t) {
                    g[t - s] += phi * eta / s2 - r * jt;
                    dg[t - s] += phi * phi / s2 + jt * jt + curv;
                }
                if inb(t + 1) {
                    g[t + 1 - s] += -eta / s2 - r * jn;
                    dg[t + 1 - s] += 1.0 / s2 + jn * jn;
                }
                if inb(t) && inb(t + 1) {
                    off[t - s] += -phi / s2 + jt * jn;
                }
            } else {
                let r = a - self.beta;
                let jt = -0.5 * a;
                if inb(t) {
                    g[t - s] -= r * jt;
                    dg[t - s] += jt * jt + (r * a * 0.25).max(0.0);
                }
            }
        }
    }
}

// Tridiagonal Cholesky: Q = L L', L with diagonal `l` and subdiagonal `m`.
fn tri_cholesky(dg: &[f64], off: &[f64], l: &mut [f64], m: &mut [f64]) -> bool {
    let b = dg.len();
    let mut prev_m = 0.0;
    for i in 0..b {
        let v = dg[i] - if i > 0 { prev_m * prev_m } else { 0.0 };
        if !(v > 0.0) || !v.is_finite() {
            return false;
        }
        l[i] = v.sqrt();
        if i + 1 < b {
            m[i] = off[i] / l[i];
            prev_m = m[i];
        }
    }
    true
}

fn tri_solve(l: &[f64], m: &[f64], rhs: &[f64], out: &mut [f64]) {
    let b = l.len();
    // L y = rhs
    for i in 0..b {
        let prev = if i > 0 { m[i - 1] * out[i - 1] } else { 0.0 };
        out[i] = (rhs[i] - prev) / l[i];
    }
    // L' x = y
    for i in (0..b).rev() {
        let next = if i + 1 < b { m[i] * out[i + 1] } else { 0.0 };
        out[i] = (out[i] - next) / l[i];
    }
}

fn tri_quad(dg: &[f64], off: &[f64], x: &[f64]) -> f64 {
    let mut q = 0.0;
    for i in 0..x.len() {
        q += dg[i] * x[i] * x[i];
        if i + 1 < x.len() {
            q += 2.0 * off[i] * x[i] * x[i + 1];
        }
    }
    q
}

/// Updates the log-volatility path in random blocks. `h` is modified in place.
pub fn sample_h_path<R: Rng + ?Sized>(
    rng: &mut R,
    w: &[f64],
    beta: f64,
    sv: &SvParams,
    h: &mut [f64],
    block_size: usize,
) -> Result<(usize, usize)> {
    let n = w.len();
    if h.len() != n {
        return Err(Error::DimensionMismatch("h path and observations differ in length".into()));
    }
    if n == 0 {
        return Ok((0, 0));
    }
    let model = Model { w, beta, sv: *sv };
    let bs = block_size.max(1);
    // Random knots: blocks start at offset u and every bs steps thereafter.
    let u = rng.random_range(0..bs);
    let mut starts = vec![0];
    let mut s = u;
    while s < n {
        if s > 0 {
            starts.push(s);
        }
        s += bs;
    }
    let mut accepted = 0;
    let buf_len = bs.max(u).max(1) + bs;
    let mut bufs = Buffers::new(buf_len);
    for (bi, &s) in starts.iter().enumerate() {
        let e = starts.get(bi + 1).map_or(n - 1, |&nx| nx - 1);
        if update_block(rng, &model, h, s, e, &mut bufs)? {
            accepted += 1;
        }
    }
    Ok((starts.len(), accepted))
}

struct Buffers {
    g: Vec<f64>,
    dg: Vec<f64>,
    off: Vec<f64>,
    l: Vec<f64>,
    m: Vec<f64>,
    step: Vec<f64>,
    cur: Vec<f64>,
    mode: Vec<f64>,
}

impl Buffers {
    fn new(b: usize) -> Self {
        Buffers {
            g: vec![0.0; b],
            dg: vec![0.0; b],
            off: vec![0.0; b],
            l: vec![0.0; b],
            m: vec![0.0; b],
            step: vec![0.0; b],
            cur: vec![0.0; b],
            mode: vec![0.0; b],
        }
    }

    fn ensure(&mut self, b: usize) {
        if self.g.len() < b {
            *self = Buffers::new(b);
        }
    }
}

fn update_block<R: Rng + ?Sized>(
    rng: &mut R,
    model: &Model<'_>,
    h: &mut [f64],
    s: usize,
    e: usize,
    bufs: &mut Buffers,
) -> Result<bool> {
    let b = e - s + 1;
    bufs.ensure(b);
    let Buffers { g, dg, off, l, m, step, cur, mode } = bufs;
    let (g, dg, off, l, m, step, cur, mode) = (
        &mut g[..b],
        &mut dg[..b],
        &mut off[..b],
        &mut l[..b],
        &mut m[..b],
        &mut step[..b],
        &mut cur[..b],
        &mut mode[..b],
    );
    cur.copy_from_slice(&h[s..=e]);

    // Mode search from a start that does not depend on the block's values.
    h[s..=e].fill(model.sv.mu);
    let mut val = model.local_logp(h, s, e);
    for _ in 0..100 {
        model.local_derivs(h, s, e, g, dg, off);
        if !tri_cholesky(dg, off, l, m) {
            break;
        }
        tri_solve(l, m, g, step);
        let mut scale = 1.0;
        let mut improved = false;
        mode.copy_from_slice(&h[s..=e]);
        for _ in 0..40 {
            for i in 0..b {
                h[s + i] = mode[i] + scale * step[i];
            }
            let v = model.local_logp(h, s, e);
            if v.is_finite() && v >= val - 1e-12 * val.abs().max(1.0) {
                val = v;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            h[s..=e].copy_from_slice(mode);
            break;
        }
        let max_step = step.iter().fold(0.0f64, |a, x| a.max(x.abs())) * scale;
        if max_step < 1e-8 {
            break;
        }
    }
    model.local_derivs(h, s, e, g, dg, off);
    if !tri_cholesky(dg, off, l, m) {
        h[s..=e].copy_from_slice(cur);
        return Err(Error::NumericalOverflow("volatility proposal precision is not positive definite".into()));
    }
    mode.copy_from_slice(&h[s..=e]);
    if mode.iter().any(|x| !(x.abs() <= H_LIMIT)) {
        h[s..=e].copy_from_slice(cur);
        return Err(Error::NumericalOverflow(format!("log-volatility mode exceeds {H_LIMIT} in magnitude")));
    }

    // Proposal x = mode + L'^{-1} z.
    for i in 0..b {
        step[i] = std_normal(rng);
    }
    for i in (0..b).rev() {
        let next = if i + 1 < b { m[i] * step[i + 1] } else { 0.0 };
        step[i] = (step[i] - next) / l[i];
    }
    let q_prop = -0.5 * tri_quad(dg, off, step);
    for i in 0..b {
        h[s + i] = mode[i] + step[i];
    }
    let lp_prop = model.local_logp(h, s, e);
    for i in 0..b {
        step[i] = cur[i] - mode[i];
    }
    let q_cur = -0.5 * tri_quad(dg, off, step);
    // h currently holds the proposal; evaluate the current state on a copy of the slice.
    let prop: Vec<f64> = h[s..=e].to_vec();
    h[s..=e].copy_from_slice(cur);
    let lp_cur = model.local_logp(h, s, e);
    let log_ratio = (lp_prop - lp_cur) - (q_prop - q_cur);
    let accept = log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio;
    if accept {
        if prop.iter().any(|x| !(x.abs() <= H_LIMIT)) {
            return Err(Error::NumericalOverflow(format!("log-volatility exceeds {H_LIMIT} in magnitude")));
        }
        h[s..=e].copy_from_slice(&prop);
    }
    Ok(accept)
}

/// Exact Gaussian draw of `mu` given the path, `phi`, `sigma2` and `rho`.
pub fn sample_mu<R: Rng + ?Sized>(rng: &mut R, w: &[f64], beta: f64, h: &[f64], sv: &SvParams, prior: &SvPrior) -> f64 {
    let n = h.len();
    let (phi, s2, rho) = (sv.phi, sv.sigma2, sv.rho);
    let k = rho / s2.sqrt();
    let mut prec = 1.0 / prior.mu_var;
    let mut lin = prior.mu_mean / prior.mu_var;
    let w0 = (1.0 - phi * phi) / s2;
    prec += w0;
    lin += w0 * h[0];
    let bt = 1.0 - phi;
    for t in 0..n.saturating_sub(1) {
        let a = h[t + 1] - phi * h[t];
        prec += bt * bt / s2;
        lin += bt * a / s2;
        if rho != 0.0 {
            let eps = w[t] * (-0.5 * h[t]).exp() - beta;
            let wl = 1.0 / (1.0 - rho * rho);
            let al = eps - k * a;
            let bl = -k * bt;
            prec += wl * bl * bl;
            lin += wl * bl * al;
        }
    }
    lin / prec + std_normal(rng) / prec.sqrt()
}

fn phi_side_logp(phi: f64, d0: f64, s2: f64, prior: &SvPrior) -> f64 {
    0.5 * (1.0 - phi * phi).ln() - 0.5 * d0 * d0 * (1.0 - phi * phi) / s2 + shifted_beta_logpdf(phi, prior.phi_a, prior.phi_b)
}

/// Metropolis-Hastings update of `phi` with a truncated-normal proposal built
/// from the transition terms.
pub fn sample_phi<R: Rng + ?Sized>(
    rng: &mut R,
    w: &[f64],
    beta: f64,
    h: &[f64],
    sv: &SvParams,
    prior: &SvPrior,
) -> (f64, bool) {
    let n = h.len();
    let (mu, s2, rho) = (sv.mu, sv.sigma2, sv.rho);
    let k = rho / s2.sqrt();
    let mut prec = 0.0;
    let mut lin = 0.0;
    for t in 0..n.saturating_sub(1) {
        let (d0, d1) = (h[t] - mu, h[t + 1] - mu);
        prec += d0 * d0 / s2;
        lin += d1 * d0 / s2;
        if rho != 0.0 {
            let eps = w[t] * (-0.5 * h[t]).exp() - beta;
            let wl = 1.0 / (1.0 - rho * rho);
            let al = eps - k * d1;
            let bl = -k * d0;
            prec += wl * bl * bl;
            lin += wl * al * bl;
        }
    }
    let prop = if prec > 1e-12 {
        sample_truncated_normal(rng, lin / prec, 1.0 / prec.sqrt(), -1.0, 1.0)
    } else {
        rng.random_range(-1.0..1.0)
    };
    let d0 = h[0] - mu;
    let log_ratio = phi_side_logp(prop, d0, s2, prior) - phi_side_logp(sv.phi, d0, s2, prior);
    if rng.random::<f64>().ln() < log_ratio {
        (prop, true)
    } else {
        (sv.phi, false)
    }
}

/// Update of `sigma2`: exact inverse-gamma draw without leverage, otherwise
/// independence Metropolis-Hastings on `tau = 1/sigma`.
pub fn sample_sigma2<R: Rng + ?Sized>(
    rng: &mut R,
    w: &[f64],
    beta: f64,
    h: &[f64],
    sv: &SvParams,
    prior: &SvPrior,
) -> (f64, bool) {
    let n = h.len();
    let (mu, phi, rho) = (sv.mu, sv.phi, sv.rho);
    let d0 = h[0] - mu;
    let mut ss = d0 * d0 * (1.0 - phi * phi);
    let mut see = 0.0;
    let mut sev = 0.0;
    for t in 0..n.saturating_sub(1) {
        let eta = h[t + 1] - mu - phi * (h[t] - mu);
        ss += eta * eta;
        see += eta * eta;
        if rho != 0.0 {
            sev += (w[t] * (-0.5 * h[t]).exp() - beta) * eta;
        }
    }
    if rho == 0.0 {
        return (sample_inv_gamma(rng, prior.sigma2_shape + 0.5 * n as f64, prior.sigma2_scale + 0.5 * ss), true);
    }
    let one_m = 1.0 - rho * rho;
    let kk = n as f64 + 2.0 * prior.sigma2_shape - 1.0;
    let a = prior.sigma2_scale + 0.5 * ss + rho * rho * see / (2.0 * one_m);
    let c = rho * sev / one_m;
    let target = |tau: f64| kk * tau.ln() - a * tau * tau + c * tau;
    let mode = (c + (c * c + 8.0 * a * kk).sqrt()) / (4.0 * a);
    let sd = 1.0 / (kk / (mode * mode) + 2.0 * a).sqrt();
    let prop = sample_truncated_normal(rng, mode, sd, 0.0, f64::INFINITY);
    let tau = 1.0 / sv.sigma2.sqrt();
    let q = |x: f64| -0.5 * (x - mode) * (x - mode) / (sd * sd);
    let log_ratio = target(prop) - target(tau) - (q(prop) - q(tau));
    if rng.random::<f64>().ln() < log_ratio {
        (1.0 / (prop * prop), true)
    } else {
        (sv.sigma2, false)
    }
}

fn rho_logp(rho: f64, nn: f64, suu: f64, suv: f64, svv: f64) -> f64 {
    let one_m = 1.0 - rho * rho;
    -0.5 * nn * one_m.ln() - (suu - 2.0 * rho * suv + rho * rho * svv) / (2.0 * one_m)
}

/// Independence Metropolis-Hastings update of `rho` under a uniform prior,
/// proposing from a truncated normal at the conditional mode.
pub fn sample_rho<R: Rng + ?Sized>(rng: &mut R, w: &[f64], beta: f64, h: &[f64], sv: &SvParams) -> (f64, bool) {
    let n = h.len();
    let sd_eta = sv.sigma2.sqrt();
    let (mut suu, mut suv, mut svv) = (0.0, 0.0, 0.0);
    for t in 0..n.saturating_sub(1) {
        let u = w[t] * (-0.5 * h[t]).exp() - beta;
        let v = (h[t + 1] - sv.mu - sv.phi * (h[t] - sv.mu)) / sd_eta;
        suu += u * u;
        suv += u * v;
        svv += v * v;
    }
    let nn = n.saturating_sub(1) as f64;
    if nn == 0.0 {
        return (rng.random_range(-1.0..1.0), true);
    }
    let f = |r: f64| rho_logp(r, nn, suu, suv, svv);
    // Grid then golden-section refinement; deterministic given the data.
    let grid = 200;
    let lim = 0.999;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=grid {
        let r = -lim + 2.0 * lim * i as f64 / grid as f64;
        let v = f(r);
        if v > best.0 {
            best = (v, r);
        }
    }
    let step = 2.0 * lim / grid as f64;
    let (mut lo, mut hi) = ((best.1 - step).max(-lim), (best.1 + step).min(lim));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - gr * (hi - lo);
        let b = lo + gr * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mode = 0.5 * (lo + hi);
    let dx = 1e-4_f64.min((1.0 - mode.abs()) / 4.0);
    let curv = (f(mode + dx) - 2.0 * f(mode) + f(mode - dx)) / (dx * dx);
    let sd = if curv < -1e-8 { (-1.0 / curv).sqrt() } else { 0.5 };
    let prop = sample_truncated_normal(rng, mode, sd, -1.0, 1.0);
    let q = |x: f64| truncated_normal_logpdf(x, mode, sd, -1.0, 1.0);
    let log_ratio = f(prop) - f(sv.rho) - (q(prop) - q(sv.rho));
    if rng.random::<f64>().ln() < log_ratio {
        (prop, true)
    } else {
        (sv.rho, false)
    }
}

/// One sweep over `(h, mu, phi, sigma2, rho)` for a single volatility index.
pub fn sample_sv_block<R: Rng + ?Sized>(
    rng: &mut R,
    w: &[f64],
    beta: f64,
    h: &mut [f64],
    sv: &mut SvParams,
    prior: &SvPrior,
    opts: &SvOptions,
) -> Result<SvAcceptance> {
    if w.len() != h.len() {
        return Err(Error::DimensionMismatch("h path and observations differ in length".into()));
    }
    let (blocks, blocks_accepted) = sample_h_path(rng, w, beta, sv, h, opts.block_size)?;
    if opts.mu_free {
        sv.mu = sample_mu(rng, w, beta, h, sv, prior);
    }
    let (phi, phi_accepted) = sample_phi(rng, w, beta, h, sv, prior);
    sv.phi = phi;
    let (sigma2, sigma2_accepted) = sample_sigma2(rng, w, beta, h, sv, prior);
    sv.sigma2 = sigma2;
    let mut rho_accepted = false;
    if opts.rho_free {
        let (rho, acc) = sample_rho(rng, w, beta, h, sv);
        sv.rho = rho;
        rho_accepted = acc;
    }
    Ok(SvAcceptance { blocks, blocks_accepted, phi_accepted, sigma2_accepted, rho_accepted })
}

/// Log conditional density of the path given the parameters, up to a constant.
pub fn h_log_target(w: &[f64], beta: f64, h: &[f64], sv: &SvParams) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    Model { w, beta, sv: *sv }.local_logp(h, 0, h.len() - 1)
}
