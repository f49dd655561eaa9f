//! Time-varying linear Gaussian state-space models with a shared disturbance:
//!
//! ```text
//! y_t     = Z_t x_t + c_t + G_t u_t
//! x_{t+1} = T_t x_t + d_t + H_t u_t,      u_t ~ N(0, I_r),  x_0 ~ N(a_1, P_1)
//! ```
//!
//! Filter gains do not depend on the data, so they are computed once and
//! reused by the likelihood, the state smoother and the mean-correction
//! simulation smoother.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::dist::{rng_from_seed, std_normal, LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSS {
    pub z: Vec<DMatrix<f64>>,
    pub c: Vec<DVector<f64>>,
    pub g: Vec<DMatrix<f64>>,
    pub t: Vec<DMatrix<f64>>,
    pub d: Vec<DVector<f64>>,
    pub h: Vec<DMatrix<f64>>,
    pub a1: DVector<f64>,
    pub p1: DMatrix<f64>,
}

impl LinearGaussianSS {
    /// Time-invariant system repeated `n` times.
    #[allow(clippy::too_many_arguments)]
    pub fn time_invariant(
        n: usize,
        z: DMatrix<f64>,
        c: DVector<f64>,
        g: DMatrix<f64>,
        t: DMatrix<f64>,
        d: DVector<f64>,
        h: DMatrix<f64>,
        a1: DVector<f64>,
        p1: DMatrix<f64>,
    ) -> Self {
        LinearGaussianSS {
            z: vec![z; n],
            c: vec![c; n],
            g: vec![g; n],
            t: vec![t; n],
            d: vec![d; n],
            h: vec![h; n],
            a1,
            p1,
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a1.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.z.first().map_or(0, |z| z.nrows())
    }

    pub fn noise_dim(&self) -> usize {
        self.g.first().map_or(0, |g| g.ncols())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let (k, m, r) = (self.state_dim(), self.obs_dim(), self.noise_dim());
        let lens = [self.c.len(), self.g.len(), self.t.len(), self.d.len(), self.h.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::DimensionMismatch("system matrices must cover every period".into()));
        }
        if self.p1.shape() != (k, k) {
            return Err(Error::DimensionMismatch("P_1 must be k x k".into()));
        }
        for t in 0..n {
            let ok = self.z[t].shape() == (m, k)
                && self.c[t].len() == m
                && self.g[t].shape() == (m, r)
                && self.t[t].shape() == (k, k)
                && self.d[t].len() == k
                && self.h[t].shape() == (k, r);
            if !ok {
                return Err(Error::DimensionMismatch(format!("system matrices inconsistent at t={t}")));
            }
        }
        Ok(())
    }

    fn check_obs(&self, obs: &DMatrix<f64>) -> Result<()> {
        self.validate()?;
        if obs.nrows() != self.n() || (self.n() > 0 && obs.ncols() != self.obs_dim()) {
            return Err(Error::DimensionMismatch(format!(
                "observations {}x{} for a system with n={} and m={}",
                obs.nrows(),
                obs.ncols(),
                self.n(),
                self.obs_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub loglik: f64,
    /// `E[x_t | y_1..y_{t-1}]`
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    /// `E[x_t | y_1..y_t]`
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct SmootherDraw {
    /// n x k
    pub states: DMatrix<f64>,
    pub loglik: f64,
}

// Data-independent filter quantities.
struct Gains {
    p_pred: Vec<DMatrix<f64>>,
    f_chol: Vec<Cholesky<f64, Dyn>>,
    f_logdet: Vec<f64>,
    k: Vec<DMatrix<f64>>,
}

fn cholesky_with_jitter(f: &DMatrix<f64>, t: usize) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = f.clone().cholesky() {
        return Ok(c);
    }
    let m = f.nrows();
    let jitter = 1e-10 * f.trace() / m as f64;
    let bumped = f + DMatrix::identity(m, m) * jitter;
    bumped.cholesky().ok_or(Error::SingularInnovationCovariance(t))
}

fn compute_gains(sys: &LinearGaussianSS) -> Result<Gains> {
    let n = sys.n();
    let mut p = sys.p1.clone();
    let mut gains = Gains {
        p_pred: Vec::with_capacity(n),
        f_chol: Vec::with_capacity(n),
        f_logdet: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
    };
    for t in 0..n {
        let (z, g, tt, h) = (&sys.z[t], &sys.g[t], &sys.t[t], &sys.h[t]);
        let pz = &p * z.transpose();
        let f = z * &pz + g * g.transpose();
        let f = 0.5 * (&f + f.transpose());
        let chol = cholesky_with_jitter(&f, t)?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        // K = (T P Z' + H G') F^{-1}
        let cross = tt * &pz + h * g.transpose();
        let k = chol.solve(&cross.transpose()).transpose();
        let next = tt * &p * tt.transpose() + h * h.transpose() - &k * &cross.transpose();
        gains.p_pred.push(p);
        gains.f_chol.push(chol);
        gains.f_logdet.push(logdet);
        gains.k.push(k);
        p = 0.5 * (&next + next.transpose());
    }
    Ok(gains)
}

struct Innovations {
    a_pred: Vec<DVector<f64>>,
    v: Vec<DVector<f64>>,
    loglik: f64,
}

fn innovations_pass(sys: &LinearGaussianSS, gains: &Gains, obs: &DMatrix<f64>, with_offsets: bool) -> Innovations {
    let n = sys.n();
    let m = sys.obs_dim();
    let mut a = if with_offsets { sys.a1.clone() } else { DVector::zeros(sys.state_dim()) };
    let mut out = Innovations { a_pred: Vec::with_capacity(n), v: Vec::with_capacity(n), loglik: 0.0 };
    for t in 0..n {
        let yt = obs.row(t).transpose();
        let mut v = yt - &sys.z[t] * &a;
        if with_offsets {
            v -= &sys.c[t];
        }
        let finv_v = gains.f_chol[t].solve(&v);
        out.loglik += -0.5 * (m as f64 * LN_2PI + gains.f_logdet[t] + v.dot(&finv_v));
        let mut next = &sys.t[t] * &a + &gains.k[t] * &v;
        if with_offsets {
            next += &sys.d[t];
        }
        out.a_pred.push(a);
        out.v.push(v);
        a = next;
    }
    out
}

fn smooth_pass(sys: &LinearGaussianSS, gains: &Gains, inn: &Innovations) -> Vec<DVector<f64>> {
    let n = sys.n();
    let k = sys.state_dim();
    let mut r = DVector::zeros(k);
    let mut out = vec![DVector::zeros(k); n];
    for t in (0..n).rev() {
        let z = &sys.z[t];
        let l = &sys.t[t] - &gains.k[t] * z;
        r = z.transpose() * gains.f_chol[t].solve(&inn.v[t]) + l.transpose() * &r;
        out[t] = &inn.a_pred[t] + &gains.p_pred[t] * &r;
    }
    out
}

pub fn kalman_filter(sys: &LinearGaussianSS, obs: &DMatrix<f64>) -> Result<FilterOutput> {
    sys.check_obs(obs)?;
    let gains = compute_gains(sys)?;
    let inn = innovations_pass(sys, &gains, obs, true);
    let mut filtered_means = Vec::with_capacity(sys.n());
    let mut filtered_covs = Vec::with_capacity(sys.n());
    for t in 0..sys.n() {
        let pz = &gains.p_pred[t] * sys.z[t].transpose();
        filtered_means.push(&inn.a_pred[t] + &pz * gains.f_chol[t].solve(&inn.v[t]));
        filtered_covs.push(&gains.p_pred[t] - &pz * gains.f_chol[t].solve(&pz.transpose()));
    }
    Ok(FilterOutput {
        loglik: inn.loglik,
        predicted_means: inn.a_pred,
        predicted_covs: gains.p_pred,
        filtered_means,
        filtered_covs,
    })
}

/// `E[x_t | y_1..y_n]` for every t, as an n x k matrix.
pub fn state_smoother(sys: &LinearGaussianSS, obs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sys.check_obs(obs)?;
    let gains = compute_gains(sys)?;
    let inn = innovations_pass(sys, &gains, obs, true);
    Ok(stack_rows(&smooth_pass(sys, &gains, &inn), sys.state_dim()))
}

fn stack_rows(rows: &[DVector<f64>], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), k, |t, j| rows[t][j])
}

fn psd_sqrt(p: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = p.clone().cholesky() {
        return c.l();
    }
    let eig = p.clone().symmetric_eigen();
    let s = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&s)
}

/// Mean-correction simulation smoother with gains cached for repeated draws.
pub struct SimulationSmoother<'a> {
    sys: &'a LinearGaussianSS,
    gains: Gains,
    p1_sqrt: DMatrix<f64>,
    smoothed_mean: Vec<DVector<f64>>,
    loglik: f64,
}

impl<'a> SimulationSmoother<'a> {
    pub fn new(sys: &'a LinearGaussianSS, obs: &'a DMatrix<f64>) -> Result<Self> {
        sys.check_obs(obs)?;
        let gains = compute_gains(sys)?;
        let inn = innovations_pass(sys, &gains, obs, true);
        let smoothed_mean = smooth_pass(sys, &gains, &inn);
        Ok(SimulationSmoother {
            sys,
            p1_sqrt: psd_sqrt(&sys.p1),
            gains,
            smoothed_mean,
            loglik: inn.loglik,
        })
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn smoothed_mean(&self) -> DMatrix<f64> {
        stack_rows(&self.smoothed_mean, self.sys.state_dim())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SmootherDraw {
        let sys = self.sys;
        let (n, k, m, r) = (sys.n(), sys.state_dim(), sys.obs_dim(), sys.noise_dim());
        // Unconditional draw with zero offsets; the smoothed mean of the
        // actual data supplies the offsets.
        let mut x = &self.p1_sqrt * DVector::from_fn(k, |_, _| std_normal(rng));
        let mut x_plus = Vec::with_capacity(n);
        let mut y_plus = DMatrix::zeros(n, m);
        for t in 0..n {
            let u = DVector::from_fn(r, |_, _| std_normal(rng));
            let yt = &sys.z[t] * &x + &sys.g[t] * &u;
            y_plus.set_row(t, &yt.transpose());
            let next = &sys.t[t] * &x + &sys.h[t] * &u;
            x_plus.push(x);
            x = next;
        }
        let inn = innovations_pass(sys, &self.gains, &y_plus, false);
        let corr = smooth_pass(sys, &self.gains, &inn);
        let states = DMatrix::from_fn(n, k, |t, j| self.smoothed_mean[t][j] + x_plus[t][j] - corr[t][j]);
        SmootherDraw { states, loglik: self.loglik }
    }
}

/// One exact draw of the state path given the observations.
pub fn simulation_smoother_draw<R: Rng + ?Sized>(
    sys: &LinearGaussianSS,
    obs: &DMatrix<f64>,
    rng: &mut R,
) -> Result<SmootherDraw> {
    Ok(SimulationSmoother::new(sys, obs)?.draw(rng))
}

pub fn simulation_smoother_draw_seeded(sys: &LinearGaussianSS, obs: &DMatrix<f64>, seed: u64) -> Result<SmootherDraw> {
    simulation_smoother_draw(sys, obs, &mut rng_from_seed(seed))
}

#[derive(Debug, Clone)]
pub struct DenseConditional {
    /// n x k
    pub cond_mean: DMatrix<f64>,
    /// nk x nk, states stacked time-major.
    pub cond_cov: DMatrix<f64>,
    pub loglik: f64,
}

/// Conditions the explicitly assembled joint Gaussian of states and observations.
pub fn dense_gaussian_oracle(sys: &LinearGaussianSS, obs: &DMatrix<f64>) -> Result<DenseConditional> {
    sys.check_obs(obs)?;
    let (n, k, m, r) = (sys.n(), sys.state_dim(), sys.obs_dim(), sys.noise_dim());
    if n * k > 512 {
        return Err(Error::SizeGuardExceeded(n * k));
    }
    let dim_xi = k + n * r;
    // x = mx + Ax xi, y = my + Ay xi, xi = (x_0 - a_1, u_0..u_{n-1}) with cov diag(P_1, I)
    let mut ax = DMatrix::zeros(n * k, dim_xi);
    let mut ay = DMatrix::zeros(n * m, dim_xi);
    let mut mx = DVector::zeros(n * k);
    let mut my = DVector::zeros(n * m);
    let mut cur_a = DMatrix::zeros(k, dim_xi);
    cur_a.view_mut((0, 0), (k, k)).copy_from(&DMatrix::identity(k, k));
    let mut cur_m = sys.a1.clone();
    for t in 0..n {
        ax.view_mut((t * k, 0), (k, dim_xi)).copy_from(&cur_a);
        mx.rows_mut(t * k, k).copy_from(&cur_m);
        let mut ya = &sys.z[t] * &cur_a;
        {
            let mut blk = ya.view_mut((0, k + t * r), (m, r));
            blk += &sys.g[t];
        }
        ay.view_mut((t * m, 0), (m, dim_xi)).copy_from(&ya);
        my.rows_mut(t * m, m).copy_from(&(&sys.z[t] * &cur_m + &sys.c[t]));
        let mut next_a = &sys.t[t] * &cur_a;
        {
            let mut blk = next_a.view_mut((0, k + t * r), (k, r));
            blk += &sys.h[t];
        }
        cur_m = &sys.t[t] * &cur_m + &sys.d[t];
        cur_a = next_a;
    }
    let mut cov_xi = DMatrix::identity(dim_xi, dim_xi);
    cov_xi.view_mut((0, 0), (k, k)).copy_from(&sys.p1);
    let sxx = &ax * &cov_xi * ax.transpose();
    let sxy = &ax * &cov_xi * ay.transpose();
    let syy = &ay * &cov_xi * ay.transpose();
    let yvec = DVector::from_fn(n * m, |i, _| obs[(i / m.max(1), i % m.max(1))]);
    if n * m == 0 {
        return Ok(DenseConditional {
            cond_mean: DMatrix::from_fn(n, k, |t, j| mx[t * k + j]),
            cond_cov: sxx,
            loglik: 0.0,
        });
    }
    let syy = 0.5 * (&syy + syy.transpose());
    let chol = syy
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularCovariance("observation covariance is not positive definite".into()))?;
    let resid = &yvec - &my;
    let alpha = chol.solve(&resid);
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let loglik = -0.5 * ((n * m) as f64 * LN_2PI + logdet + resid.dot(&alpha));
    let mean = &mx + &sxy * &alpha;
    let cond_cov = &sxx - &sxy * chol.solve(&sxy.transpose());
    Ok(DenseConditional {
        cond_mean: DMatrix::from_fn(n, k, |t, j| mean[t * k + j]),
        cond_cov: 0.5 * (&cond_cov + cond_cov.transpose()),
        loglik,
    })
}
