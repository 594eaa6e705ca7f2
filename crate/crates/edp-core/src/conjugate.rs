//! Closed-form conjugate draws and marginal likelihoods.
//!
//! Regression coefficients follow the normal-inverse-gamma form
//! `β | σ² ~ N(β0, σ² P⁻¹)`, `σ² ~ Inv-Ga(a, b)`, with `P` the prior
//! precision; the sampler uses `P = I / σ²_β`. Spline coefficients use an
//! unscaled `η ~ N(0, σ²_η I)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, ln, ln_beta, ln_gamma, LN_2PI};
use crate::types::{CovariateKind, CovariateSchema, Priors, PsiAtom, PsiParams, ThetaParams};

/// Sufficient statistics of a Gaussian linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionStats {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub n_obs: usize,
}

impl RegressionStats {
    pub fn zeros(dim: usize) -> Self {
        Self {
            xtx: DMatrix::zeros(dim, dim),
            xty: DVector::zeros(dim),
            yty: 0.0,
            n_obs: 0,
        }
    }

    pub fn from_data(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Invalid("design rows differ from response length".into()));
        }
        let yv = DVector::from_column_slice(y);
        Ok(Self {
            xtx: x.transpose() * x,
            xty: x.transpose() * &yv,
            yty: yv.dot(&yv),
            n_obs: y.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }
}

#[derive(Debug, Clone)]
pub struct RegressionPosterior {
    pub beta_n: DVector<f64>,
    /// Cholesky factor of `Σ_n = XᵀX + P`.
    pub chol: Cholesky<f64, Dyn>,
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDraw {
    pub sigma2: f64,
    pub beta: Vec<f64>,
}

pub fn regression_posterior(
    stats: &RegressionStats,
    beta0: &[f64],
    prior_prec: &DMatrix<f64>,
    a: f64,
    b: f64,
) -> Result<RegressionPosterior> {
    let b0 = DVector::from_column_slice(beta0);
    let sigma_n = &stats.xtx + prior_prec;
    let chol = Cholesky::new(sigma_n.clone()).ok_or(Error::SingularDesign)?;
    let p_b0 = prior_prec * &b0;
    let beta_n = chol.solve(&(&p_b0 + &stats.xty));
    let quad = stats.yty + b0.dot(&p_b0) - beta_n.dot(&(&sigma_n * &beta_n));
    Ok(RegressionPosterior {
        beta_n,
        chol,
        shape: a + 0.5 * stats.n_obs as f64,
        rate: b + 0.5 * quad.max(0.0),
    })
}

/// Draws `σ² ~ Inv-Ga(a + N/2, b + ½(y*ᵀy* + β0ᵀPβ0 − β_nᵀΣ_nβ_n))` and then
/// `β ~ N(β_n, σ² Σ_n⁻¹)`.
pub fn update_regression<R: Rng + ?Sized>(
    rng: &mut R,
    stats: &RegressionStats,
    beta0: &[f64],
    prior_prec: &DMatrix<f64>,
    a: f64,
    b: f64,
) -> Result<RegressionDraw> {
    let post = regression_posterior(stats, beta0, prior_prec, a, b)?;
    let sigma2 = math::inv_gamma(rng, post.shape, post.rate);
    let beta = mvn_from_precision_chol(rng, &post.beta_n, &post.chol, sigma2);
    Ok(RegressionDraw { sigma2, beta })
}

/// `mean + sqrt(scale) L⁻ᵀ z`, a draw with covariance `scale (LLᵀ)⁻¹`.
fn mvn_from_precision_chol<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    chol: &Cholesky<f64, Dyn>,
    scale: f64,
) -> Vec<f64> {
    let d = mean.len();
    let z = DVector::from_fn(d, |_, _| math::std_normal(rng));
    let w = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    let s = math::sqrt(scale);
    (0..d).map(|i| mean[i] + s * w[i]).collect()
}

/// Sufficient statistics for the spline step: `ZᵀZ` and `Zᵀy*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineStats {
    pub ztz: DMatrix<f64>,
    pub zty: DVector<f64>,
}

impl SplineStats {
    pub fn zeros(k: usize) -> Self {
        Self {
            ztz: DMatrix::zeros(k, k),
            zty: DVector::zeros(k),
        }
    }

    pub fn from_data(z: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        if z.nrows() != y.len() {
            return Err(Error::Invalid("basis rows differ from response length".into()));
        }
        let yv = DVector::from_column_slice(y);
        Ok(Self {
            ztz: z.transpose() * z,
            zty: z.transpose() * yv,
        })
    }
}

/// Mean and precision Cholesky factor of `η | σ², σ²_η`:
/// `Σ_b = ZᵀZ/σ² + I/σ²_η`, `μ = Σ_b⁻¹ Zᵀy*/σ²`.
pub fn spline_posterior(
    stats: &SplineStats,
    sigma2: f64,
    sigma2_eta: f64,
) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
    let k = stats.zty.len();
    let prec = &stats.ztz / sigma2 + DMatrix::<f64>::identity(k, k) / sigma2_eta;
    let chol = Cholesky::new(prec).ok_or(Error::SingularDesign)?;
    let mu = chol.solve(&(&stats.zty / sigma2));
    Ok((mu, chol))
}

/// Draws `σ²_η ~ Inv-Ga(a_η + k/2, b_η + ½ηᵀη)` from the current η, then
/// `η ~ N(μ_n, Σ_b⁻¹)`.
pub fn update_spline<R: Rng + ?Sized>(
    rng: &mut R,
    stats: &SplineStats,
    current_eta: &[f64],
    sigma2: f64,
    a_eta: f64,
    b_eta: f64,
) -> Result<(f64, Vec<f64>)> {
    let k = current_eta.len();
    let ss: f64 = current_eta.iter().map(|v| v * v).sum();
    let sigma2_eta = math::inv_gamma(rng, a_eta + 0.5 * k as f64, b_eta + 0.5 * ss);
    if k == 0 {
        return Ok((sigma2_eta, Vec::new()));
    }
    let (mu, chol) = spline_posterior(stats, sigma2, sigma2_eta)?;
    let eta = mvn_from_precision_chol(rng, &mu, &chol, 1.0);
    Ok((sigma2_eta, eta))
}

/// Beta posterior parameters for Bernoulli data.
pub fn bernoulli_posterior(ones: f64, count: f64, a: f64, b: f64) -> (f64, f64) {
    (a + ones, b + count - ones)
}

pub fn update_bernoulli<R: Rng + ?Sized>(rng: &mut R, xs: &[f64], a: f64, b: f64) -> f64 {
    let ones: f64 = xs.iter().sum();
    update_bernoulli_stats(rng, ones, xs.len() as f64, a, b)
}

pub fn update_bernoulli_stats<R: Rng + ?Sized>(
    rng: &mut R,
    ones: f64,
    count: f64,
    a: f64,
    b: f64,
) -> f64 {
    let (an, bn) = bernoulli_posterior(ones, count, a, b);
    // Keep p strictly inside (0, 1) so its logarithms stay finite.
    math::beta(rng, an, bn).clamp(1e-300, 1.0 - 1e-16)
}

/// Posterior of the normal-inverse-χ² model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalInvChi2Posterior {
    pub nu_n: f64,
    /// Scale of the scaled-Inv-χ² posterior of σ².
    pub s2_n: f64,
    pub mu_n_weight_num: f64,
    pub c_n: f64,
}

impl NormalInvChi2Posterior {
    /// Posterior mean of μ (does not depend on σ²).
    pub fn mu_n(&self) -> f64 {
        self.mu_n_weight_num / self.c_n
    }
}

/// `count`, sample mean and centred sum of squares summarise the data.
pub fn normal_invchi2_posterior(
    count: f64,
    mean: f64,
    ss: f64,
    nu0: f64,
    tau0_sq: f64,
    mu0: f64,
    c0: f64,
) -> NormalInvChi2Posterior {
    let nu_n = nu0 + count;
    let shrink = if count > 0.0 {
        c0 * count / (c0 + count) * (mean - mu0) * (mean - mu0)
    } else {
        0.0
    };
    let s2_n = (nu0 * tau0_sq + ss + shrink) / nu_n;
    let mean_term = if count > 0.0 { count * mean } else { 0.0 };
    NormalInvChi2Posterior {
        nu_n,
        s2_n,
        mu_n_weight_num: c0 * mu0 + mean_term,
        c_n: c0 + count,
    }
}

/// Draws `σ²_μ` from its scaled-Inv-χ² posterior, then
/// `μ ~ N(μ_n, σ²_μ / (c0 + n))`. Returns `(σ²_μ, μ)`.
pub fn update_normal_invchi2<R: Rng + ?Sized>(
    rng: &mut R,
    xs: &[f64],
    nu0: f64,
    tau0_sq: f64,
    mu0: f64,
    c0: f64,
) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / n
    };
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    update_normal_invchi2_stats(rng, n, mean, ss, nu0, tau0_sq, mu0, c0)
}

#[allow(clippy::too_many_arguments)]
pub fn update_normal_invchi2_stats<R: Rng + ?Sized>(
    rng: &mut R,
    count: f64,
    mean: f64,
    ss: f64,
    nu0: f64,
    tau0_sq: f64,
    mu0: f64,
    c0: f64,
) -> (f64, f64) {
    let post = normal_invchi2_posterior(count, mean, ss, nu0, tau0_sq, mu0, c0);
    let sigma2 = math::scaled_inv_chi2(rng, post.nu_n, post.s2_n);
    let mu = math::normal(rng, post.mu_n(), sigma2 / post.c_n);
    (sigma2, mu)
}

pub fn ln_marginal_bernoulli(x: f64, a: f64, b: f64) -> f64 {
    ln_beta(a + x, b - x + 1.0) - ln_beta(a, b)
}

/// Prior predictive mass of a Bernoulli observation under `Beta(a, b)`.
pub fn marginal_bernoulli(x: f64, a: f64, b: f64) -> f64 {
    math::exp(ln_marginal_bernoulli(x, a, b))
}

/// Log prior predictive density of one observation under the
/// normal-inverse-χ² prior (`μ | σ² ~ N(μ0, σ²/c0)`,
/// `σ² ~ scaled-Inv-χ²(ν0, τ0)`), a Student-t with ν0 degrees of freedom.
pub fn ln_marginal_normal_invchi2(x: f64, mu0: f64, c0: f64, nu0: f64, tau0: f64) -> f64 {
    let c_n = c0 + 1.0;
    let nu_n = nu0 + 1.0;
    let tau_n = (nu0 * tau0 + c0 / c_n * (mu0 - x) * (mu0 - x)) / nu_n;
    -0.5 * LN_2PI + 0.5 * ln(c0 / c_n) + 0.5 * nu0 * ln(0.5 * tau0 * nu0)
        - 0.5 * nu_n * ln(0.5 * tau_n * nu_n)
        + ln_gamma(0.5 * nu_n)
        - ln_gamma(0.5 * nu0)
}

pub fn marginal_normal_invchi2(x: f64, mu0: f64, c0: f64, nu0: f64, tau0: f64) -> f64 {
    math::exp(ln_marginal_normal_invchi2(x, mu0, c0, nu0, tau0))
}

/// `ln f_{x,0}(x)`: the covariate density integrated over the base measure.
pub fn ln_prior_predictive_x0(x: &[f64], schema: &CovariateSchema, priors: &Priors) -> f64 {
    schema
        .kinds()
        .iter()
        .zip(x)
        .map(|(kind, &v)| match kind {
            CovariateKind::Binary => ln_marginal_bernoulli(v, priors.a_x, priors.b_x),
            CovariateKind::Continuous => {
                ln_marginal_normal_invchi2(v, priors.mu0, priors.c0, priors.nu0, priors.tau0_sq)
            }
        })
        .sum()
}

pub fn prior_predictive_x0(x: &[f64], schema: &CovariateSchema, priors: &Priors) -> f64 {
    math::exp(ln_prior_predictive_x0(x, schema, priors))
}

/// Draws a regression atom from the base measure.
pub fn draw_theta_prior<R: Rng + ?Sized>(
    rng: &mut R,
    priors: &Priors,
    beta0: &[f64],
    n_basis: usize,
) -> ThetaParams {
    let mut theta = ThetaParams {
        beta: Vec::with_capacity(beta0.len()),
        sigma2_beta: 1.0,
        eta: Vec::with_capacity(n_basis),
        sigma2_eta: 1.0,
        sigma2: 1.0,
    };
    draw_theta_prior_into(rng, priors, beta0, n_basis, &mut theta);
    theta
}

/// [`draw_theta_prior`] reusing the buffers of `out`.
pub(crate) fn draw_theta_prior_into<R: Rng + ?Sized>(
    rng: &mut R,
    priors: &Priors,
    beta0: &[f64],
    n_basis: usize,
    out: &mut ThetaParams,
) {
    out.sigma2 = math::inv_gamma(rng, priors.a_y, priors.b_y);
    out.sigma2_beta = math::inv_gamma(rng, priors.a_beta, priors.b_beta);
    let sd_beta = math::sqrt(out.sigma2 * out.sigma2_beta);
    out.beta.clear();
    out.beta
        .extend(beta0.iter().map(|&m| m + sd_beta * math::std_normal(rng)));
    out.sigma2_eta = math::inv_gamma(rng, priors.a_eta, priors.b_eta);
    let sd_eta = math::sqrt(out.sigma2_eta);
    out.eta.clear();
    out.eta
        .extend((0..n_basis).map(|_| sd_eta * math::std_normal(rng)));
}

/// Draws a covariate atom from the base measure.
pub fn draw_psi_prior<R: Rng + ?Sized>(
    rng: &mut R,
    priors: &Priors,
    schema: &CovariateSchema,
) -> PsiParams {
    let mut atoms = vec![];
    draw_psi_prior_into(rng, priors, schema, &mut atoms);
    PsiParams { atoms }
}

pub(crate) fn draw_psi_prior_into<R: Rng + ?Sized>(
    rng: &mut R,
    priors: &Priors,
    schema: &CovariateSchema,
    atoms: &mut Vec<PsiAtom>,
) {
    atoms.clear();
    for kind in schema.kinds() {
        atoms.push(match kind {
            CovariateKind::Binary => PsiAtom::Binary {
                p: math::beta(rng, priors.a_x, priors.b_x).clamp(1e-300, 1.0 - 1e-16),
            },
            CovariateKind::Continuous => {
                let sigma2 = math::scaled_inv_chi2(rng, priors.nu0, priors.tau0_sq);
                let mu = math::normal(rng, priors.mu0, sigma2 / priors.c0);
                PsiAtom::Continuous { mu, sigma2 }
            }
        });
    }
}
