//! Cluster reassignment with auxiliary atoms.
//!
//! Each subject is removed from its cluster and re-placed by one
//! categorical draw over the existing (θ, ψ) pairs, a fresh ψ-subcluster
//! inside each θ-cluster, and a fresh (θ, ψ) pair. Fresh atoms are `m`
//! auxiliary draws from the base measure. A single set of `m` ψ draws
//! serves both the new-subcluster and the new-pair candidates. When the
//! removal empties a cluster, the subject's own atoms occupy auxiliary
//! slot 0 so the move leaves the posterior invariant.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::Model;
use crate::conjugate::{draw_psi_prior_into, draw_theta_prior_into};
use crate::math::{self, ln};
use crate::types::{
    ChainState, CompiledPsi, NestedPartition, PsiParams, Removal, ThetaParams,
};

/// One candidate destination for the subject being reassigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Existing { k: usize, j: usize },
    /// New ψ-subcluster inside θ-cluster `k`, using auxiliary ψ atom `aux`.
    NewPsi { k: usize, aux: usize },
    /// New θ-cluster built from auxiliary pair `aux`.
    NewTheta { aux: usize },
}

/// Unnormalised log weights for placing `subject` under the nested
/// process. `partition` must have the subject detached.
#[allow(clippy::too_many_arguments)]
pub fn edp_log_weights(
    model: &Model,
    subject: usize,
    partition: &NestedPartition,
    theta_atoms: &[ThetaParams],
    psi_atoms: &[Vec<PsiParams>],
    u: f64,
    alpha_theta: f64,
    alpha_psi: f64,
    theta_aux: &[ThetaParams],
    psi_aux: &[PsiParams],
) -> (Vec<Choice>, Vec<f64>) {
    let compiled = compile_all(psi_atoms);
    let aux_c: Vec<CompiledPsi> = psi_aux.iter().map(CompiledPsi::new).collect();
    let mut choices = Vec::new();
    let mut weights = Vec::new();
    let ctx = Candidates {
        model,
        subject,
        partition,
        theta_atoms,
        compiled: &compiled,
        u,
        theta_aux,
        psi_aux: &aux_c,
    };
    ctx.edp(alpha_theta, alpha_psi, &mut choices, &mut weights);
    (choices, weights)
}

/// Unnormalised log weights for the single-level process, where every
/// θ-cluster carries exactly one ψ atom.
#[allow(clippy::too_many_arguments)]
pub fn dp_log_weights(
    model: &Model,
    subject: usize,
    partition: &NestedPartition,
    theta_atoms: &[ThetaParams],
    psi_atoms: &[Vec<PsiParams>],
    u: f64,
    alpha: f64,
    theta_aux: &[ThetaParams],
    psi_aux: &[PsiParams],
) -> (Vec<Choice>, Vec<f64>) {
    let compiled = compile_all(psi_atoms);
    let aux_c: Vec<CompiledPsi> = psi_aux.iter().map(CompiledPsi::new).collect();
    let mut choices = Vec::new();
    let mut weights = Vec::new();
    let ctx = Candidates {
        model,
        subject,
        partition,
        theta_atoms,
        compiled: &compiled,
        u,
        theta_aux,
        psi_aux: &aux_c,
    };
    ctx.dp(alpha, &mut choices, &mut weights);
    (choices, weights)
}

fn compile_all(psi_atoms: &[Vec<PsiParams>]) -> Vec<Vec<CompiledPsi>> {
    psi_atoms
        .iter()
        .map(|v| v.iter().map(CompiledPsi::new).collect())
        .collect()
}

struct Candidates<'a> {
    model: &'a Model,
    subject: usize,
    partition: &'a NestedPartition,
    theta_atoms: &'a [ThetaParams],
    compiled: &'a [Vec<CompiledPsi>],
    u: f64,
    theta_aux: &'a [ThetaParams],
    psi_aux: &'a [CompiledPsi],
}

impl Candidates<'_> {
    fn ly(&self, theta: &ThetaParams) -> f64 {
        self.model.subject_log_likelihood(self.subject, theta, self.u)
    }

    fn edp(&self, alpha_theta: f64, alpha_psi: f64, choices: &mut Vec<Choice>, w: &mut Vec<f64>) {
        choices.clear();
        w.clear();
        let x = self.model.design.covariates(self.subject);
        let m = self.theta_aux.len();
        let n = self.partition.n() as f64;
        let ln_denom_theta = ln(alpha_theta + n - 1.0);
        let ln_new_psi = ln(alpha_psi / m as f64);
        let lx_aux: Vec<f64> = self.psi_aux.iter().map(|c| c.ln_density(x)).collect();
        for (k, &nk) in self.partition.theta_counts().iter().enumerate() {
            let nk = nk as f64;
            let base = ln(nk) - ln(nk + alpha_psi) - ln_denom_theta + self.ly(&self.theta_atoms[k]);
            for (j, &njk) in self.partition.psi_counts()[k].iter().enumerate() {
                choices.push(Choice::Existing { k, j });
                w.push(base + ln(njk as f64) + self.compiled[k][j].ln_density(x));
            }
            for (aux, &lx) in lx_aux.iter().enumerate() {
                choices.push(Choice::NewPsi { k, aux });
                w.push(base + ln_new_psi + lx);
            }
        }
        let ln_new_theta = ln(alpha_theta / m as f64) - ln_denom_theta;
        for (aux, theta) in self.theta_aux.iter().enumerate() {
            choices.push(Choice::NewTheta { aux });
            w.push(ln_new_theta + self.ly(theta) + lx_aux[aux]);
        }
    }

    fn dp(&self, alpha: f64, choices: &mut Vec<Choice>, w: &mut Vec<f64>) {
        choices.clear();
        w.clear();
        let x = self.model.design.covariates(self.subject);
        let m = self.theta_aux.len();
        let n = self.partition.n() as f64;
        let ln_denom = ln(alpha + n - 1.0);
        for (k, &nk) in self.partition.theta_counts().iter().enumerate() {
            choices.push(Choice::Existing { k, j: 0 });
            w.push(
                ln(nk as f64) - ln_denom
                    + self.ly(&self.theta_atoms[k])
                    + self.compiled[k][0].ln_density(x),
            );
        }
        let ln_new = ln(alpha / m as f64) - ln_denom;
        for (aux, theta) in self.theta_aux.iter().enumerate() {
            choices.push(Choice::NewTheta { aux });
            w.push(ln_new + self.ly(theta) + self.psi_aux[aux].ln_density(x));
        }
    }
}

/// One nested-process reassignment sweep over all subjects.
pub fn assignment_step(state: &mut ChainState, model: &Model, m_aux: usize, shuffle: bool) {
    sweep(state, model, m_aux, shuffle, false);
}

/// One single-level reassignment sweep; ψ atoms travel with their θ atom.
pub fn dp_assignment_step(state: &mut ChainState, model: &Model, m_aux: usize, shuffle: bool) {
    sweep(state, model, m_aux, shuffle, true);
}

fn sweep(state: &mut ChainState, model: &Model, m: usize, shuffle: bool, single_level: bool) {
    let n = state.partition.n();
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut state.rng);
    }
    let priors = &model.priors;
    let schema = model.design.schema();
    let n_basis = model.design.basis_dim();
    let mut compiled = compile_all(&state.psi_atoms);
    let mut theta_aux: Vec<ThetaParams> = (0..m)
        .map(|_| ThetaParams {
            beta: Vec::new(),
            sigma2_beta: 1.0,
            eta: Vec::new(),
            sigma2_eta: 1.0,
            sigma2: 1.0,
        })
        .collect();
    let mut psi_aux: Vec<PsiParams> = vec![PsiParams { atoms: Vec::new() }; m];
    let mut psi_aux_c: Vec<CompiledPsi> = vec![CompiledPsi::default(); m];
    let mut choices = Vec::new();
    let mut weights = Vec::new();

    for &i in &order {
        let (mut kept_theta, mut kept_psi) = (false, false);
        match state.partition.detach(i) {
            Removal::Theta { k } => {
                theta_aux[0] = state.theta_atoms.swap_remove(k);
                let mut own = state.psi_atoms.swap_remove(k);
                psi_aux[0] = own.pop().expect("emptied θ-cluster had one ψ atom");
                compiled.swap_remove(k);
                kept_theta = true;
                kept_psi = true;
            }
            Removal::Psi { k, j } => {
                psi_aux[0] = state.psi_atoms[k].swap_remove(j);
                compiled[k].swap_remove(j);
                kept_psi = true;
            }
            Removal::Shared => {}
        }
        for l in 0..m {
            if !(l == 0 && kept_theta) {
                draw_theta_prior_into(&mut state.rng, priors, &model.beta0, n_basis, &mut theta_aux[l]);
            }
            if !(l == 0 && kept_psi) {
                draw_psi_prior_into(&mut state.rng, priors, schema, &mut psi_aux[l].atoms);
            }
            psi_aux_c[l].compile(&psi_aux[l]);
        }
        let ctx = Candidates {
            model,
            subject: i,
            partition: &state.partition,
            theta_atoms: &state.theta_atoms,
            compiled: &compiled,
            u: state.u[i],
            theta_aux: &theta_aux,
            psi_aux: &psi_aux_c,
        };
        if single_level {
            ctx.dp(state.alpha_theta, &mut choices, &mut weights);
        } else {
            ctx.edp(state.alpha_theta, state.alpha_psi, &mut choices, &mut weights);
        }
        math::normalize_log_weights(&mut weights);
        match choices[math::sample_categorical(&mut state.rng, &weights)] {
            Choice::Existing { k, j } => state.partition.attach_existing(i, k, j),
            Choice::NewPsi { k, aux } => {
                state.partition.attach_new_psi(i, k);
                state.psi_atoms[k].push(psi_aux[aux].clone());
                compiled[k].push(psi_aux_c[aux].clone());
            }
            Choice::NewTheta { aux } => {
                state.partition.attach_new_theta(i);
                state.theta_atoms.push(theta_aux[aux].clone());
                state.psi_atoms.push(vec![psi_aux[aux].clone()]);
                compiled.push(vec![psi_aux_c[aux].clone()]);
            }
        }
    }
    let (theta_order, psi_order) = state.partition.canonicalize();
    state.apply_permutation(&theta_order, &psi_order);
}
