//! Random variates and log densities shared by the samplers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::beta::ln_beta;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub type SimRng = ChaCha20Rng;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent generator for sub-task `stream` of a run seeded with `seed`.
pub fn rng_for_stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean) * (x - mean) / var)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Log density of `(x + 1) / 2 ~ Beta(a, b)` on (-1, 1).
pub fn shifted_beta_logpdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > -1.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * ((1.0 + x) / 2.0).ln() + (b - 1.0) * ((1.0 - x) / 2.0).ln() - ln_beta(a, b) - std::f64::consts::LN_2
}

/// Inverse-gamma log density, `x^(-shape-1) exp(-scale/x)` normalized.
pub fn inv_gamma_logpdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("positive gamma parameters");
    1.0 / g.sample(rng)
}

pub fn sample_shifted_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = Gamma::new(a, 1.0).unwrap().sample(rng);
    let y = Gamma::new(b, 1.0).unwrap().sample(rng);
    2.0 * x / (x + y) - 1.0
}

/// Draw from `N(mean, sd^2)` truncated to `(lo, hi)`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo < hi && sd > 0.0);
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let z = if a >= 0.0 {
        right_tail(rng, a, b)
    } else if b <= 0.0 {
        -right_tail(rng, -b, -a)
    } else if b - a > 0.5 {
        loop {
            let z = std_normal(rng);
            if z > a && z < b {
                break z;
            }
        }
    } else {
        loop {
            let u = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (-0.5 * u * u).exp() {
                break u;
            }
        }
    };
    (mean + sd * z).clamp(lo.next_up(), hi.next_down())
}

// Standard normal restricted to [a, b] with 0 <= a < b.
fn right_tail<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if a < 1.0 && b - a > 1.0 {
        loop {
            let z = std_normal(rng);
            if z >= a && z <= b {
                return z;
            }
        }
    }
    if b - a < 1.0 / a.max(1.0) {
        loop {
            let u = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (-0.5 * (u * u - a * a)).exp() {
                return u;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - rng.random::<f64>().ln() / lambda;
        if z <= b && rng.random::<f64>() <= (-0.5 * (z - lambda) * (z - lambda)).exp() {
            return z;
        }
    }
}

/// Log density of the truncated normal on `(lo, hi)`.
pub fn truncated_normal_logpdf(x: f64, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if !(x > lo && x < hi) {
        return f64::NEG_INFINITY;
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    normal_logpdf(x, mean, sd * sd) - log_normal_mass(a, b)
}

/// `ln(Phi(b) - Phi(a))`, accurate in either tail.
pub fn log_normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        // upper tail: Phi(-a) - Phi(-b)
        let hi = 0.5 * erfc(a / std::f64::consts::SQRT_2);
        let lo = 0.5 * erfc(b / std::f64::consts::SQRT_2);
        (hi - lo).ln()
    } else if b < 0.0 {
        log_normal_mass(-b, -a)
    } else {
        (std_normal_cdf(b) - std_normal_cdf(a)).ln()
    }
}

/// Draw from `N(Q^{-1} b, Q^{-1})` given the precision `Q` and linear term `b`.
pub fn sample_gaussian_from_precision<R: Rng + ?Sized>(
    rng: &mut R,
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    what: &str,
) -> Result<DVector<f64>> {
    let (mean, chol) = gaussian_mean_from_precision(precision, linear, what)?;
    let z = DVector::from_fn(mean.len(), |_, _| std_normal(rng));
    let l = chol.l();
    let dev = l.transpose().solve_upper_triangular(&z).expect("cholesky factor is nonsingular");
    Ok(mean + dev)
}

pub fn gaussian_mean_from_precision(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    what: &str,
) -> Result<(DVector<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NonPositiveDefinitePosteriorCov(what.to_string()))?;
    let mean = chol.solve(linear);
    Ok((mean, chol))
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
///
/// `n_eff` overrides the sample sizes used for the p-value (effective sizes
/// for autocorrelated samples).
pub fn ks_two_sample(x: &[f64], y: &[f64], n_eff: Option<(f64, f64)>) -> (f64, f64) {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(|p, q| p.total_cmp(q));
    b.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = a[i].min(b[j]);
        while i < na && a[i] <= v {
            i += 1;
        }
        while j < nb && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let (ea, eb) = n_eff.unwrap_or((na as f64, nb as f64));
    let en = (ea * eb / (ea + eb)).sqrt();
    (d, kolmogorov_q((en + 0.12 + 0.11 / en) * d))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
