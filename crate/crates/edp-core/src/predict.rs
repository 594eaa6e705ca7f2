//! Posterior-predictive draws, imputation sets, threshold outcomes and
//! multiple-imputation pooling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conjugate::{draw_theta_prior, ln_prior_predictive_x0};
use crate::design::dot;
use crate::error::{Error, Result};
use crate::math::{self, ln};
use crate::sampler::Model;
use crate::types::{ChainState, CompiledPsi, CovariateSchema, Mode, Priors, ThetaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetMode {
    /// The subject has outcomes and a fitted cluster and intercept.
    ObservedSubject,
    /// Covariates only: cluster and intercept are drawn afresh.
    NewSubject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTarget {
    pub subject_id: String,
    pub target_time: f64,
}

impl PredictionTarget {
    pub fn new(subject_id: impl Into<String>, target_time: f64) -> Self {
        Self {
            subject_id: subject_id.into(),
            target_time,
        }
    }

    pub(crate) fn check(&self, model: &Model) -> Result<()> {
        if !self.target_time.is_finite() {
            return Err(Error::NonFinite {
                subject: self.subject_id.clone(),
                field: "target_time",
            });
        }
        self.subject(model).map(|_| ())
    }

    pub fn subject(&self, model: &Model) -> Result<usize> {
        model
            .index_of(&self.subject_id)
            .ok_or_else(|| Error::UnknownSubject(self.subject_id.clone()))
    }

    /// Routing rule: subjects with outcome data use their own cluster.
    pub fn mode(&self, model: &Model) -> Result<TargetMode> {
        let i = self.subject(model)?;
        Ok(if model.design.n_obs_of(i) > 0 {
            TargetMode::ObservedSubject
        } else {
            TargetMode::NewSubject
        })
    }
}

/// Predictive draws, one per scheduled iteration for every target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationSet {
    pub targets: Vec<PredictionTarget>,
    pub schedule: Vec<usize>,
    /// `draws[t][m]`: target `t`, imputation `m`.
    pub draws: Vec<Vec<f64>>,
}

impl ImputationSet {
    pub fn new(targets: Vec<PredictionTarget>, schedule: Vec<usize>) -> Self {
        let draws = vec![Vec::with_capacity(schedule.len()); targets.len()];
        Self {
            targets,
            schedule,
            draws,
        }
    }

    pub fn n_imputations(&self) -> usize {
        self.draws.first().map_or(0, |d| d.len())
    }

    /// Every target holds exactly one value per scheduled iteration.
    pub fn is_complete(&self) -> bool {
        self.draws.iter().all(|d| d.len() == self.schedule.len())
    }

    /// Mean of the draws per target.
    pub fn means(&self) -> Vec<f64> {
        self.draws
            .iter()
            .map(|d| d.iter().sum::<f64>() / d.len() as f64)
            .collect()
    }
}

/// `x*ᵀβ + z(t)ᵀη` for a given atom.
pub fn cluster_mean(model: &Model, theta: &ThetaParams, x: &[f64], t: f64) -> f64 {
    let d = &model.design;
    let mut xrow = vec![0.0; d.fixed_dim()];
    let mut zrow = vec![0.0; d.basis_dim()];
    d.fixed_row_at(x, t, &mut xrow);
    d.basis_row_at(t, &mut zrow);
    dot(&xrow, &theta.beta) + dot(&zrow, &theta.eta)
}

/// Draw from `N(x*ᵀβ_k + z(t)ᵀη_k + u_i, σ²_k)` with the subject's current
/// cluster and intercept.
pub fn predict_observed<R: Rng + ?Sized>(
    model: &Model,
    state: &ChainState,
    subject: usize,
    target_time: f64,
    rng: &mut R,
) -> Result<f64> {
    if subject >= model.n() {
        return Err(Error::UnknownSubject(alloc::format!("#{subject}")));
    }
    let theta = &state.theta_atoms[state.partition.label(subject).0];
    let mean = cluster_mean(model, theta, model.design.covariates(subject), target_time) + state.u[subject];
    Ok(math::normal(rng, mean, theta.sigma2))
}

/// Probabilities that a new subject with covariates `x` joins each existing
/// θ-cluster (in index order) or, in the last entry, a new one.
pub fn new_subject_cluster_weights(
    x: &[f64],
    state: &ChainState,
    priors: &Priors,
    schema: &CovariateSchema,
    mode: Mode,
) -> Vec<f64> {
    let part = &state.partition;
    let n = part.n() as f64;
    let (a_t, a_p) = (state.alpha_theta, state.alpha_psi);
    let lx0 = ln_prior_predictive_x0(x, schema, priors);
    let mut w: Vec<f64> = Vec::with_capacity(part.n_theta() + 1);
    for (k, &nk) in part.theta_counts().iter().enumerate() {
        let nk = nk as f64;
        let lx: Vec<f64> = state.psi_atoms[k]
            .iter()
            .map(|psi| CompiledPsi::new(psi).ln_density(x))
            .collect();
        let inner = match mode {
            Mode::Edp => {
                let mut terms: Vec<f64> = part.psi_counts()[k]
                    .iter()
                    .zip(&lx)
                    .map(|(&njk, l)| ln(njk as f64) + l)
                    .collect();
                terms.push(ln(a_p) + lx0);
                math::log_sum_exp(&terms) - ln(a_p + nk)
            }
            Mode::Dp | Mode::Single => lx[0],
        };
        w.push(ln(nk) - ln(a_t + n) + inner);
    }
    match mode {
        Mode::Single => w.push(f64::NEG_INFINITY),
        _ => w.push(ln(a_t) - ln(a_t + n) + lx0),
    }
    math::normalize_log_weights(&mut w);
    w
}

/// Predictive draw for a subject without a fitted cluster: sample the
/// cluster from [`new_subject_cluster_weights`] (a new cluster takes its
/// atom from the base measure) and `u ~ N(0, σ²_u)`.
pub fn predict_new<R: Rng + ?Sized>(
    model: &Model,
    state: &ChainState,
    x: &[f64],
    target_time: f64,
    mode: Mode,
    rng: &mut R,
) -> f64 {
    let w = new_subject_cluster_weights(x, state, &model.priors, model.design.schema(), mode);
    let k = math::sample_categorical(rng, &w);
    let fresh;
    let theta = if k < state.theta_atoms.len() {
        &state.theta_atoms[k]
    } else {
        fresh = draw_theta_prior(rng, &model.priors, &model.beta0, model.design.basis_dim());
        &fresh
    };
    let u = math::normal(rng, 0.0, state.sigma2_u);
    let mean = cluster_mean(model, theta, x, target_time) + u;
    math::normal(rng, mean, theta.sigma2)
}

/// Appends one draw per target at the current state.
pub fn collect_imputations<R: Rng + ?Sized>(
    model: &Model,
    state: &ChainState,
    mode: Mode,
    rng: &mut R,
    set: &mut ImputationSet,
) {
    for (target, draws) in set.targets.iter().zip(set.draws.iter_mut()) {
        let i = target.subject(model).expect("targets are checked before sampling");
        let v = if model.design.n_obs_of(i) > 0 {
            predict_observed(model, state, i, target.target_time, rng).expect("subject index is valid")
        } else {
            predict_new(model, state, model.design.covariates(i), target.target_time, mode, rng)
        };
        draws.push(v);
    }
}

/// Binary outcomes per imputation (`outcomes[m][s]`, subjects sorted by id).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub subjects: Vec<String>,
    pub outcomes: Vec<Vec<bool>>,
}

impl OutcomeTable {
    pub fn event_counts(&self) -> Vec<usize> {
        self.outcomes
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .collect()
    }
}

/// Subject `s` has the outcome in imputation `m` when it has a recorded
/// event, or any observed value or any value imputed in `m` is at least
/// `threshold`.
pub fn classify_threshold(
    set: &ImputationSet,
    observed: &BTreeMap<String, Vec<f64>>,
    events: &BTreeSet<String>,
    threshold: f64,
) -> OutcomeTable {
    let mut ids: BTreeSet<&str> = observed.keys().map(String::as_str).collect();
    ids.extend(events.iter().map(String::as_str));
    ids.extend(set.targets.iter().map(|t| t.subject_id.as_str()));
    let subjects: Vec<String> = ids.into_iter().map(String::from).collect();
    let index: BTreeMap<&str, usize> = subjects
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut base = vec![false; subjects.len()];
    for (i, id) in subjects.iter().enumerate() {
        base[i] = events.contains(id)
            || observed.get(id).is_some_and(|v| v.iter().any(|&y| y >= threshold));
    }
    let outcomes = (0..set.n_imputations())
        .map(|m| {
            let mut row = base.clone();
            for (t, draws) in set.targets.iter().zip(&set.draws) {
                if draws[m] >= threshold {
                    row[index[t.subject_id.as_str()]] = true;
                }
            }
            row
        })
        .collect();
    OutcomeTable { subjects, outcomes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pooled {
    pub estimate: f64,
    pub within: f64,
    pub between: f64,
    pub total_variance: f64,
    /// Degrees of freedom of the reference t distribution (may be infinite).
    pub df: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_imputations: usize,
}

/// Rubin's rules with a 95% t interval.
pub fn rubin_combine(estimates: &[f64], variances: &[f64]) -> Result<Pooled> {
    let m = estimates.len();
    if variances.len() != m {
        return Err(Error::Invalid(alloc::format!(
            "{m} estimates but {} variances",
            variances.len()
        )));
    }
    if m < 2 {
        return Err(Error::TooFewImputations(m));
    }
    let mf = m as f64;
    let q = estimates.iter().sum::<f64>() / mf;
    let w = variances.iter().sum::<f64>() / mf;
    let b = estimates.iter().map(|e| (e - q) * (e - q)).sum::<f64>() / (mf - 1.0);
    let inflated = (1.0 + 1.0 / mf) * b;
    let t = w + inflated;
    let df = if inflated > 0.0 {
        let r = 1.0 + w / inflated;
        (mf - 1.0) * r * r
    } else {
        f64::INFINITY
    };
    let half = if t > 0.0 {
        math::student_t_quantile(0.975, df) * math::sqrt(t)
    } else {
        0.0
    };
    Ok(Pooled {
        estimate: q,
        within: w,
        between: b,
        total_variance: t,
        df,
        ci_low: q - half,
        ci_high: q + half,
        n_imputations: m,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    pub rates: Vec<f64>,
    /// Pooled log rate.
    pub log_rate: Pooled,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Per-imputation rates `events / person_time`, pooled on the log scale
/// with variance `1 / events`.
pub fn incidence_rate(events: &[usize], person_time: f64) -> Result<Incidence> {
    if !(person_time > 0.0) {
        return Err(Error::NonPositivePersonTime);
    }
    if events.contains(&0) {
        return Err(Error::ZeroEvents);
    }
    let rates: Vec<f64> = events.iter().map(|&e| e as f64 / person_time).collect();
    let logs: Vec<f64> = rates.iter().map(|&r| ln(r)).collect();
    let vars: Vec<f64> = events.iter().map(|&e| 1.0 / e as f64).collect();
    let pooled = rubin_combine(&logs, &vars)?;
    Ok(Incidence {
        rates,
        rate: math::exp(pooled.estimate),
        ci_low: math::exp(pooled.ci_low),
        ci_high: math::exp(pooled.ci_high),
        log_rate: pooled,
    })
}

#[cfg(test)]
mod tests;
