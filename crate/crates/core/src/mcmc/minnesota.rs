//! Minnesota shrinkage for the lag coefficients.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::{normal_logpdf, std_normal};
use crate::error::{Error, Result};

/// Prior variances of `Bbar` (p x pL), column block `l-1` holding lag `l`.
///
/// Own lags get `pi1 / l^2`, cross lags `pi1 pi2 s_i^2 / (l^2 s_j^2)`.
pub fn minnesota_prior_covariance(pi1: f64, pi2: f64, s2: &[f64], p: usize, lags: usize) -> Result<DMatrix<f64>> {
    if !(pi1 > 0.0 && pi2 > 0.0) {
        return Err(Error::NonPositiveShrinkage { pi1, pi2 });
    }
    if s2.len() != p || s2.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidConfig("s2 must hold p positive variances".into()));
    }
    Ok(DMatrix::from_fn(p, p * lags, |i, c| {
        let l = (c / p + 1) as f64;
        let j = c % p;
        if i == j {
            pi1 / (l * l)
        } else {
            pi1 * pi2 * s2[i] / (l * l * s2[j])
        }
    }))
}

/// Residual variance of an OLS AR(L) fit with intercept, denominator `n_eff - L - 1`.
pub fn estimate_ar_residual_variance(series: &[f64], lags: usize) -> Result<f64> {
    let n = series.len();
    if n <= lags + 1 {
        return Err(Error::DimensionMismatch(format!("AR({lags}) needs more than {} observations, got {n}", lags + 1)));
    }
    let n_eff = n - lags;
    if n_eff <= lags + 1 {
        return Err(Error::SingularDesign(format!("{n_eff} usable observations for {} regressors", lags + 1)));
    }
    let x = DMatrix::from_fn(n_eff, lags + 1, |t, c| if c == 0 { 1.0 } else { series[lags + t - c] });
    let y = DVector::from_fn(n_eff, |t, _| series[lags + t]);
    let xtx = x.transpose() * &x;
    let scale = xtx.diagonal().max().max(1.0);
    // Collinear designs show up as a vanishing pivot relative to the scale.
    let chol = xtx.clone().cholesky().filter(|c| c.l_dirty().diagonal().iter().all(|d| d * d > 1e-12 * scale));
    let chol = chol.ok_or_else(|| Error::SingularDesign("lag regressors are collinear".into()))?;
    let coef = chol.solve(&(x.transpose() * &y));
    let resid = &y - &x * coef;
    Ok(resid.norm_squared() / (n_eff - lags - 1) as f64)
}

/// Bounded support of the uniform shrinkage hyperprior.
pub const SHRINKAGE_MAX: f64 = 1.0;

fn shrinkage_log_target(bbar: &DMatrix<f64>, pi1: f64, pi2: f64, s2: &[f64], lags: usize) -> f64 {
    let p = bbar.nrows();
    match minnesota_prior_covariance(pi1, pi2, s2, p, lags) {
        Ok(v) => bbar.iter().zip(v.iter()).map(|(b, var)| normal_logpdf(*b, 0.0, *var)).sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Random-walk Metropolis-Hastings on `(ln pi1, ln pi2)` under uniform
/// priors on `(0, 1]`. Returns the updated pair.
pub fn sample_shrinkage<R: Rng + ?Sized>(
    rng: &mut R,
    pi: (f64, f64),
    bbar: &DMatrix<f64>,
    s2: &[f64],
    lags: usize,
    step: f64,
) -> (f64, f64) {
    let (pi1, pi2) = pi;
    let prop = ((pi1.ln() + step * std_normal(rng)).exp(), (pi2.ln() + step * std_normal(rng)).exp());
    if prop.0 > SHRINKAGE_MAX || prop.1 > SHRINKAGE_MAX {
        return pi;
    }
    // log-scale walk: the Jacobian pi1 * pi2 enters the target
    let cur = shrinkage_log_target(bbar, pi1, pi2, s2, lags) + pi1.ln() + pi2.ln();
    let new = shrinkage_log_target(bbar, prop.0, prop.1, s2, lags) + prop.0.ln() + prop.1.ln();
    if rng.random::<f64>().ln() < new - cur {
        prop
    } else {
        pi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::rng_from_seed;

    #[test]
    fn covariance_entries() {
        let v = minnesota_prior_covariance(0.04, 0.25, &[1.0, 2.0, 3.0], 3, 4).unwrap();
        assert_eq!(v.shape(), (3, 12));
        // own lag 2
        assert!((v[(0, 3)] - 0.01).abs() < 1e-15);
        // equal scales, lag 1
        let w = minnesota_prior_covariance(0.04, 0.25, &[2.0, 2.0], 2, 1).unwrap();
        assert!((w[(0, 1)] - 0.01).abs() < 1e-15);
        // cross ratio
        assert!((v[(1, 0)] - 0.04 * 0.25 * 2.0).abs() < 1e-15);
        assert!(matches!(
            minnesota_prior_covariance(0.0, 0.25, &[1.0], 1, 1),
            Err(Error::NonPositiveShrinkage { .. })
        ));
    }

    #[test]
    fn ar_variance_perfect_fit() {
        let y: Vec<f64> = (0..50).map(|t| 0.5f64.powi(t)).collect();
        let s2 = estimate_ar_residual_variance(&y, 1).unwrap();
        assert!(s2.abs() < 1e-20, "{s2}");
    }

    #[test]
    fn ar_variance_iid() {
        let mut rng = rng_from_seed(4);
        let y: Vec<f64> = (0..20_000).map(|_| std_normal(&mut rng)).collect();
        for lags in [1, 4] {
            let s2 = estimate_ar_residual_variance(&y, lags).unwrap();
            assert!((s2 - 1.0).abs() < 0.05, "{s2}");
        }
    }

    #[test]
    fn ar_variance_constant_is_singular() {
        let y = vec![3.0; 30];
        assert!(matches!(estimate_ar_residual_variance(&y, 2), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn shrinkage_rejects_outside_support() {
        let bbar = DMatrix::zeros(2, 2);
        let mut rng = rng_from_seed(1);
        // from the boundary a huge step lands outside almost surely on one axis
        let mut stayed = 0;
        for _ in 0..200 {
            let out = sample_shrinkage(&mut rng, (1.0, 1.0), &bbar, &[1.0, 1.0], 1, 50.0);
            assert!(out.0 <= 1.0 && out.1 <= 1.0);
            if out == (1.0, 1.0) {
                stayed += 1;
            }
        }
        // both coordinates land inside only a quarter of the time
        assert!(stayed > 120, "{stayed}");
    }

    #[test]
    fn shrinkage_drifts_small_with_zero_coefficients() {
        let bbar = DMatrix::zeros(3, 3);
        let mut rng = rng_from_seed(2);
        let mut pi = (0.5, 0.5);
        let mut early = 0.0;
        let mut late = 0.0;
        for it in 0..10_000 {
            pi = sample_shrinkage(&mut rng, pi, &bbar, &[1.0, 1.0, 1.0], 1, 0.5);
            if it < 100 {
                early += pi.0;
            } else if it >= 9_900 {
                late += pi.0;
            }
        }
        assert!(late < early, "pi1 should drift toward 0: {early} -> {late}");
    }
}
