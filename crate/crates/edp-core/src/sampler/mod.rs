//! Gibbs sampler for the nested (θ, ψ) mixture of linear mixed models.
//!
//! One iteration runs, in order: cluster assignment (skipped in
//! [`Mode::Single`]), the conjugate within-cluster updates, the random
//! intercepts, their variance, and the concentration parameters.

mod assign;
mod updates;

pub use assign::{
    assignment_step, dp_assignment_step, dp_log_weights, edp_log_weights, Choice,
};
pub use updates::{
    alpha_psi_log_target, alpha_psi_log_target_printed, escobar_west_mixing_prob,
    update_alpha_psi, update_alpha_theta, update_random_intercepts, update_sigma2_u,
    within_cluster_update,
};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conjugate::{draw_psi_prior, draw_theta_prior};
use crate::design::{dot, Design};
use crate::error::Result;
use crate::math::{self, ln, LN_2PI};
use crate::predict::{collect_imputations, ImputationSet, PredictionTarget};
use crate::splines::SplineSpec;
use crate::types::{
    ChainState, LongitudinalDataset, Mode, NestedPartition, Priors, SamplerConfig, ThetaParams,
};

/// Everything fixed for the duration of a chain: the precomputed design,
/// priors and the resolved prior mean of β.
#[derive(Debug, Clone)]
pub struct Model {
    pub design: Design,
    pub priors: Priors,
    pub beta0: Vec<f64>,
    ids: Vec<String>,
}

impl Model {
    pub fn new(dataset: &LongitudinalDataset, spec: &SplineSpec, priors: Priors) -> Result<Self> {
        priors.validate()?;
        let design = Design::new(dataset, spec)?;
        let beta0 = priors.beta0_for(design.fixed_dim(), design.mean_y())?;
        Ok(Self {
            design,
            priors,
            beta0,
            ids: dataset.subjects.iter().map(|s| s.id.clone()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    /// `Σ_v ln N(y_v; x*_vᵀβ + z_vᵀη + u, σ²)` over the subject's observations.
    pub fn subject_log_likelihood(&self, subject: usize, theta: &ThetaParams, u: f64) -> f64 {
        let d = &self.design;
        let range = d.obs_range(subject);
        if range.is_empty() {
            return 0.0;
        }
        let n = range.len() as f64;
        let mut ss = 0.0;
        for v in range {
            let mean = dot(d.fixed_row(v), &theta.beta) + dot(d.basis_row(v), &theta.eta) + u;
            let r = d.y(v) - mean;
            ss += r * r;
        }
        -0.5 * n * (LN_2PI + ln(theta.sigma2)) - 0.5 * ss / theta.sigma2
    }

    /// Outcome log-likelihood of the whole dataset at the current state.
    pub fn total_log_likelihood(&self, state: &ChainState) -> f64 {
        (0..self.n())
            .map(|i| {
                let (k, _) = state.partition.label(i);
                self.subject_log_likelihood(i, &state.theta_atoms[k], state.u[i])
            })
            .sum()
    }
}

/// Outcome log density of one subject given explicit design rows
/// (row-major, one row per observation).
pub fn log_likelihood_y(
    y: &[f64],
    fixed_rows: &[f64],
    basis_rows: &[f64],
    theta: &ThetaParams,
    u: f64,
) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let d = theta.beta.len();
    let k = theta.eta.len();
    y.iter()
        .enumerate()
        .map(|(v, &yv)| {
            let mean = dot(&fixed_rows[v * d..(v + 1) * d], &theta.beta)
                + dot(&basis_rows[v * k..(v + 1) * k], &theta.eta)
                + u;
            math::normal_ln_pdf(yv, mean, theta.sigma2)
        })
        .sum()
}

/// One retained iteration of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub n_theta_clusters: usize,
    pub n_psi_clusters_total: usize,
    pub alpha_theta: f64,
    pub alpha_psi: f64,
    pub sigma2_u: f64,
    pub log_likelihood: f64,
    pub partition: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub traces: Vec<TraceRecord>,
    pub imputations: ImputationSet,
    pub state: ChainState,
}

/// Starting state: subjects split at random into `init_theta_clusters`
/// θ-clusters (one in single mode) with one ψ-subcluster each, atoms from
/// the base measure refreshed by one conjugate sweep, `u = 0` and the
/// concentration parameters at their prior means.
pub fn initial_state(model: &Model, config: &SamplerConfig) -> Result<ChainState> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = model.n();
    let n_clusters = match config.mode {
        Mode::Single => 1,
        _ => config.init_theta_clusters,
    }
    .min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![(0, 0); n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = (pos % n_clusters.max(1), 0);
    }
    let mut partition = NestedPartition::from_labels(labels)?;
    partition.canonicalize();
    let priors = &model.priors;
    let theta_atoms = (0..n_clusters)
        .map(|_| draw_theta_prior(&mut rng, priors, &model.beta0, model.design.basis_dim()))
        .collect();
    let psi_atoms = (0..n_clusters)
        .map(|_| vec![draw_psi_prior(&mut rng, priors, model.design.schema())])
        .collect();
    let sigma2_u = if priors.a_u > 1.0 {
        priors.b_u / (priors.a_u - 1.0)
    } else {
        priors.b_u / priors.a_u
    };
    let mut state = ChainState {
        partition,
        theta_atoms,
        psi_atoms,
        u: vec![0.0; n],
        sigma2_u,
        alpha_theta: priors.a_theta / priors.b_theta,
        alpha_psi: priors.a_psi / priors.b_psi,
        rng,
    };
    within_cluster_update(&mut state, model)?;
    Ok(state)
}

/// One full Gibbs iteration.
pub fn sweep(state: &mut ChainState, model: &Model, config: &SamplerConfig) -> Result<()> {
    match config.mode {
        Mode::Edp => assignment_step(state, model, config.m_aux, config.shuffle),
        Mode::Dp => dp_assignment_step(state, model, config.m_aux, config.shuffle),
        Mode::Single => {}
    }
    within_cluster_update(state, model)?;
    update_random_intercepts(state, model);
    update_sigma2_u(state, &model.priors);
    if config.mode != Mode::Single {
        update_alpha_theta(state, &model.priors);
    }
    if config.mode == Mode::Edp {
        update_alpha_psi(state, &model.priors, config.alpha_psi_proposal, config.alpha_psi_compat);
    }
    Ok(())
}

/// Runs a full chain. Predictive draws for `targets` are taken at the
/// scheduled iterations from a separate random stream, so the trace does
/// not depend on which targets are requested.
pub fn run_chain(
    dataset: &LongitudinalDataset,
    spec: &SplineSpec,
    priors: &Priors,
    config: &SamplerConfig,
    targets: &[PredictionTarget],
) -> Result<ChainOutput> {
    config.validate()?;
    let model = Model::new(dataset, spec, priors.clone())?;
    run_model(&model, config, targets)
}

pub fn run_model(
    model: &Model,
    config: &SamplerConfig,
    targets: &[PredictionTarget],
) -> Result<ChainOutput> {
    config.validate()?;
    for t in targets {
        t.check(model)?;
    }
    let mut state = initial_state(model, config)?;
    let mut predict_rng = ChaCha8Rng::seed_from_u64(config.seed);
    predict_rng.set_stream(1);
    let mut schedule = config.prediction_schedule.clone();
    schedule.sort_unstable();
    schedule.dedup();
    let mut imputations = ImputationSet::new(targets.to_vec(), schedule.clone());
    let mut next = 0;
    let mut traces = Vec::new();
    for it in 1..=config.n_iter {
        sweep(&mut state, model, config)?;
        if config.is_retained(it) {
            traces.push(TraceRecord {
                iteration: it,
                n_theta_clusters: state.partition.n_theta(),
                n_psi_clusters_total: state.partition.n_psi_total(),
                alpha_theta: state.alpha_theta,
                alpha_psi: state.alpha_psi,
                sigma2_u: state.sigma2_u,
                log_likelihood: model.total_log_likelihood(&state),
                partition: if config.record_partitions {
                    state.partition.labels().to_vec()
                } else {
                    Vec::new()
                },
            });
        }
        if next < schedule.len() && schedule[next] == it {
            collect_imputations(model, &state, config.mode, &mut predict_rng, &mut imputations);
            next += 1;
        }
    }
    Ok(ChainOutput {
        traces,
        imputations,
        state,
    })
}
