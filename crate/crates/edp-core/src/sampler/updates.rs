//! Conditional updates given the partition.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::Model;
use crate::conjugate::{
    update_bernoulli_stats, update_normal_invchi2_stats, update_regression, update_spline,
    RegressionStats, SplineStats,
};
use crate::design::dot;
use crate::error::Result;
use crate::math::{self, ln, ln_beta};
use crate::types::{ChainState, CovariateKind, Priors, PsiAtom};

/// Conjugate refresh of every θ-cluster's regression and spline atoms and
/// every ψ-subcluster's covariate atoms. Clusters whose members have no
/// outcomes draw their regression atoms from the prior.
pub fn within_cluster_update(state: &mut ChainState, model: &Model) -> Result<()> {
    let design = &model.design;
    let priors = &model.priors;
    let d = design.fixed_dim();
    let kb = design.basis_dim();
    let n_theta = state.partition.n_theta();
    let mut members: Vec<Vec<Vec<usize>>> = state
        .partition
        .psi_counts()
        .iter()
        .map(|v| vec![Vec::new(); v.len()])
        .collect();
    for (i, &(k, j)) in state.partition.labels().iter().enumerate() {
        members[k][j].push(i);
    }
    let mut gram = vec![0.0; d * d];
    let mut bgram = vec![0.0; kb * kb];
    for k in 0..n_theta {
        let theta = &mut state.theta_atoms[k];
        let rng = &mut state.rng;
        let subjects = members[k].iter().flatten().copied();

        gram.iter_mut().for_each(|g| *g = 0.0);
        let mut xty = DVector::zeros(d);
        let (mut yty, mut n_obs) = (0.0, 0);
        for i in subjects.clone() {
            for (g, s) in gram.iter_mut().zip(design.fixed_gram(i)) {
                *g += s;
            }
            let u = state.u[i];
            for v in design.obs_range(i) {
                let ys = design.y(v) - dot(design.basis_row(v), &theta.eta) - u;
                for (a, &x) in design.fixed_row(v).iter().enumerate() {
                    xty[a] += x * ys;
                }
                yty += ys * ys;
                n_obs += 1;
            }
        }
        let stats = RegressionStats {
            xtx: DMatrix::from_row_slice(d, d, &gram),
            xty,
            yty,
            n_obs,
        };
        let prior_prec = DMatrix::<f64>::identity(d, d) / theta.sigma2_beta;
        let draw = update_regression(rng, &stats, &model.beta0, &prior_prec, priors.a_y, priors.b_y)?;
        theta.sigma2 = draw.sigma2;
        theta.beta = draw.beta;
        let dev: f64 = theta
            .beta
            .iter()
            .zip(&model.beta0)
            .map(|(b, b0)| (b - b0) * (b - b0))
            .sum();
        theta.sigma2_beta = math::inv_gamma(
            rng,
            priors.a_beta + 0.5 * d as f64,
            priors.b_beta + 0.5 * dev / theta.sigma2,
        );

        bgram.iter_mut().for_each(|g| *g = 0.0);
        let mut zty = DVector::zeros(kb);
        if kb > 0 {
            for i in subjects {
                for (g, s) in bgram.iter_mut().zip(design.basis_gram(i)) {
                    *g += s;
                }
                let u = state.u[i];
                for v in design.obs_range(i) {
                    let ys = design.y(v) - dot(design.fixed_row(v), &theta.beta) - u;
                    for (a, &z) in design.basis_row(v).iter().enumerate() {
                        zty[a] += z * ys;
                    }
                }
            }
        }
        let sstats = SplineStats {
            ztz: DMatrix::from_row_slice(kb, kb, &bgram),
            zty,
        };
        let (s2e, eta) = update_spline(rng, &sstats, &theta.eta, theta.sigma2, priors.a_eta, priors.b_eta)?;
        theta.sigma2_eta = s2e;
        theta.eta = eta;

        for (j, group) in members[k].iter().enumerate() {
            let atoms = &mut state.psi_atoms[k][j].atoms;
            for (l, kind) in design.schema().kinds().iter().enumerate() {
                let count = group.len() as f64;
                let col = group.iter().map(|&i| design.covariates(i)[l]);
                atoms[l] = match kind {
                    CovariateKind::Binary => PsiAtom::Binary {
                        p: update_bernoulli_stats(rng, col.sum(), count, priors.a_x, priors.b_x),
                    },
                    CovariateKind::Continuous => {
                        let mean = if group.is_empty() { 0.0 } else { col.clone().sum::<f64>() / count };
                        let ss = col.map(|x| (x - mean) * (x - mean)).sum();
                        let (sigma2, mu) = update_normal_invchi2_stats(
                            rng, count, mean, ss, priors.nu0, priors.tau0_sq, priors.mu0, priors.c0,
                        );
                        PsiAtom::Continuous { mu, sigma2 }
                    }
                };
            }
        }
    }
    Ok(())
}

/// `u_i ~ N(σ²_u Σ r / (n_i σ²_u + σ²), σ²_u σ² / (n_i σ²_u + σ²))` on the
/// residuals `r = y − x*β − zη`; subjects without outcomes draw from
/// `N(0, σ²_u)`.
pub fn update_random_intercepts(state: &mut ChainState, model: &Model) {
    let design = &model.design;
    let s2u = state.sigma2_u;
    for i in 0..state.u.len() {
        let n_i = design.n_obs_of(i);
        if n_i == 0 {
            state.u[i] = math::normal(&mut state.rng, 0.0, s2u);
            continue;
        }
        let theta = &state.theta_atoms[state.partition.label(i).0];
        let r: f64 = design
            .obs_range(i)
            .map(|v| {
                design.y(v) - dot(design.fixed_row(v), &theta.beta) - dot(design.basis_row(v), &theta.eta)
            })
            .sum();
        let denom = n_i as f64 * s2u + theta.sigma2;
        state.u[i] = math::normal(&mut state.rng, s2u * r / denom, s2u * theta.sigma2 / denom);
    }
}

/// `σ²_u ~ Inv-Ga(a_u + n/2, b_u + ½uᵀu)`.
pub fn update_sigma2_u(state: &mut ChainState, priors: &Priors) {
    let ss: f64 = state.u.iter().map(|u| u * u).sum();
    state.sigma2_u = math::inv_gamma(
        &mut state.rng,
        priors.a_u + 0.5 * state.u.len() as f64,
        priors.b_u + 0.5 * ss,
    );
}

/// Weight of the `Gamma(a + n_θ, b − ln γ)` component in the auxiliary
/// variable update of a DP concentration parameter.
pub fn escobar_west_mixing_prob(a: f64, b: f64, n_theta: usize, n: usize, gamma: f64) -> f64 {
    let odds = (a + n_theta as f64 - 1.0) / (n as f64 * (b - ln(gamma)));
    odds / (1.0 + odds)
}

/// Auxiliary-variable update of α_θ: `γ ~ Beta(α + 1, n)`, then a
/// two-component gamma mixture.
pub fn update_alpha_theta(state: &mut ChainState, priors: &Priors) {
    let n = state.partition.n();
    let rng = &mut state.rng;
    if n == 0 {
        state.alpha_theta = math::gamma(rng, priors.a_theta, priors.b_theta);
        return;
    }
    let k = state.partition.n_theta();
    let gamma = math::beta(rng, state.alpha_theta + 1.0, n as f64).max(f64::MIN_POSITIVE);
    let pi = escobar_west_mixing_prob(priors.a_theta, priors.b_theta, k, n, gamma);
    let rate = priors.b_theta - ln(gamma);
    let shape = if rng.random::<f64>() < pi {
        priors.a_theta + k as f64
    } else {
        priors.a_theta + k as f64 - 1.0
    };
    state.alpha_theta = math::gamma(rng, shape, rate).max(f64::MIN_POSITIVE);
}

/// Log conditional density of α_ψ given the nested partition, up to a
/// constant: `Ga(α; a, b) · α^(J − n_θ) · Π_k (α + n_k) B(α + 1, n_k)`,
/// with `J` the total number of ψ-subclusters and `n_k` the θ-cluster sizes.
pub fn alpha_psi_log_target(alpha: f64, a: f64, b: f64, theta_sizes: &[usize], n_psi_total: usize) -> f64 {
    let exponent = n_psi_total as f64 - theta_sizes.len() as f64;
    math::gamma_ln_pdf(alpha, a, b) + exponent * ln(alpha) + size_terms(alpha, theta_sizes)
}

/// The target with exponent `n_θ` in place of `J − n_θ`, kept for the
/// compatibility mode of [`update_alpha_psi`].
pub fn alpha_psi_log_target_printed(alpha: f64, a: f64, b: f64, theta_sizes: &[usize]) -> f64 {
    math::gamma_ln_pdf(alpha, a, b) + theta_sizes.len() as f64 * ln(alpha) + size_terms(alpha, theta_sizes)
}

fn size_terms(alpha: f64, sizes: &[usize]) -> f64 {
    sizes
        .iter()
        .map(|&n| {
            let n = n as f64;
            ln(alpha + n) + ln_beta(alpha + 1.0, n)
        })
        .sum()
}

/// Independence Metropolis–Hastings step for α_ψ with a gamma proposal
/// (the prior unless `proposal` overrides it). `compat` accepts with the
/// plain target ratio of the alternative target and no proposal correction.
pub fn update_alpha_psi(state: &mut ChainState, priors: &Priors, proposal: Option<(f64, f64)>, compat: bool) {
    let (a0, b0) = proposal.unwrap_or((priors.a_psi, priors.b_psi));
    let rng = &mut state.rng;
    let current = state.alpha_psi;
    let prop = math::gamma(rng, a0, b0);
    if !(prop > 0.0) {
        return;
    }
    let sizes = state.partition.theta_counts();
    let log_ratio = if compat {
        alpha_psi_log_target_printed(prop, priors.a_psi, priors.b_psi, sizes)
            - alpha_psi_log_target_printed(current, priors.a_psi, priors.b_psi, sizes)
    } else {
        let j = state.partition.n_psi_total();
        alpha_psi_log_target(prop, priors.a_psi, priors.b_psi, sizes, j)
            - alpha_psi_log_target(current, priors.a_psi, priors.b_psi, sizes, j)
            + math::gamma_ln_pdf(current, a0, b0)
            - math::gamma_ln_pdf(prop, a0, b0)
    };
    if ln(rng.random::<f64>()) < log_ratio {
        state.alpha_psi = prop;
    }
}
