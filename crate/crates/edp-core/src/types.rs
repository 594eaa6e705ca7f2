//! Domain data model: datasets, priors, parameter atoms, and the nested
//! partition the sampler mutates.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln, LN_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovariateKind {
    Binary,
    Continuous,
}

/// Column layout of the baseline covariates. Binary columns always come
/// first, followed by the continuous ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    names: Vec<String>,
    kinds: Vec<CovariateKind>,
}

impl CovariateSchema {
    pub fn new(columns: Vec<(String, CovariateKind)>) -> Result<Self> {
        let kinds: Vec<_> = columns.iter().map(|c| c.1).collect();
        if kinds
            .windows(2)
            .any(|w| w[0] == CovariateKind::Continuous && w[1] == CovariateKind::Binary)
        {
            return Err(Error::SchemaOrder);
        }
        let names = columns.into_iter().map(|c| c.0).collect();
        Ok(Self { names, kinds })
    }

    /// Builds a schema with `p1` binary columns `x1..` followed by `p2`
    /// continuous ones.
    pub fn numbered(p1: usize, p2: usize) -> Self {
        let names = (1..=p1 + p2).map(|i| format!("x{i}")).collect();
        let mut kinds = vec![CovariateKind::Binary; p1];
        kinds.extend(core::iter::repeat_n(CovariateKind::Continuous, p2));
        Self { names, kinds }
    }

    pub fn p1(&self) -> usize {
        self.kinds
            .iter()
            .filter(|k| **k == CovariateKind::Binary)
            .count()
    }

    pub fn p2(&self) -> usize {
        self.kinds.len() - self.p1()
    }

    pub fn p(&self) -> usize {
        self.kinds.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[CovariateKind] {
        &self.kinds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl SubjectRecord {
    pub fn n_obs(&self) -> usize {
        self.y.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalDataset {
    pub schema: CovariateSchema,
    pub subjects: Vec<SubjectRecord>,
}

impl LongitudinalDataset {
    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    /// Total number of outcome observations across subjects.
    pub fn n_obs(&self) -> usize {
        self.subjects.iter().map(|s| s.n_obs()).sum()
    }

    pub fn all_times(&self) -> Vec<f64> {
        self.subjects.iter().flat_map(|s| s.t.iter().copied()).collect()
    }

    pub fn mean_y(&self) -> Option<f64> {
        let n = self.n_obs();
        (n > 0).then(|| {
            self.subjects
                .iter()
                .flat_map(|s| s.y.iter())
                .sum::<f64>()
                / n as f64
        })
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.subjects.iter().position(|s| s.id == id)
    }
}

/// Checks every dataset invariant and returns the dataset unchanged.
pub fn validate_dataset(raw: LongitudinalDataset) -> Result<LongitudinalDataset> {
    let p = raw.schema.p();
    let mut seen = BTreeSet::new();
    for s in &raw.subjects {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::DuplicateSubject(s.id.clone()));
        }
        if s.x.len() != p {
            return Err(Error::LengthMismatch {
                subject: s.id.clone(),
                detail: format!("{} covariates, schema has {p}", s.x.len()),
            });
        }
        if s.t.len() != s.y.len() {
            return Err(Error::LengthMismatch {
                subject: s.id.clone(),
                detail: format!("{} times but {} outcomes", s.t.len(), s.y.len()),
            });
        }
        for (field, v) in [("x", &s.x), ("t", &s.t), ("y", &s.y)] {
            if v.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFinite {
                    subject: s.id.clone(),
                    field,
                });
            }
        }
        for (l, kind) in raw.schema.kinds().iter().enumerate() {
            if *kind == CovariateKind::Binary && s.x[l] != 0.0 && s.x[l] != 1.0 {
                return Err(Error::NonBinaryValue {
                    subject: s.id.clone(),
                    column: raw.schema.names()[l].clone(),
                    value: s.x[l],
                });
            }
        }
        if s.t.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::UnsortedTimes {
                subject: s.id.clone(),
            });
        }
    }
    Ok(raw)
}

/// Hyperparameters of the base measure and of the concentration and
/// random-intercept priors. Inverse-gamma and gamma priors use the
/// shape/rate parameterisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub a_beta: f64,
    pub b_beta: f64,
    /// Prior mean of the regression coefficients. `None` centres the
    /// intercept at the pooled outcome mean and every other coefficient at 0.
    pub beta0: Option<Vec<f64>>,
    pub a_eta: f64,
    pub b_eta: f64,
    pub a_y: f64,
    pub b_y: f64,
    pub a_x: f64,
    pub b_x: f64,
    pub nu0: f64,
    pub tau0_sq: f64,
    pub mu0: f64,
    pub c0: f64,
    pub a_u: f64,
    pub b_u: f64,
    pub a_theta: f64,
    pub b_theta: f64,
    pub a_psi: f64,
    pub b_psi: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            a_beta: 2.0,
            b_beta: 2.0,
            beta0: None,
            a_eta: 2.0,
            b_eta: 2.0,
            a_y: 2.0,
            b_y: 1.0,
            a_x: 1.0,
            b_x: 1.0,
            nu0: 10.0,
            tau0_sq: 1.0,
            mu0: 0.0,
            c0: 10.0,
            a_u: 2.0,
            b_u: 0.5,
            a_theta: 1.0,
            b_theta: 1.0,
            a_psi: 1.0,
            b_psi: 1.0,
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("a_beta", self.a_beta),
            ("b_beta", self.b_beta),
            ("a_eta", self.a_eta),
            ("b_eta", self.b_eta),
            ("a_y", self.a_y),
            ("b_y", self.b_y),
            ("a_x", self.a_x),
            ("b_x", self.b_x),
            ("nu0", self.nu0),
            ("tau0_sq", self.tau0_sq),
            ("c0", self.c0),
            ("a_u", self.a_u),
            ("b_u", self.b_u),
            ("a_theta", self.a_theta),
            ("b_theta", self.b_theta),
            ("a_psi", self.a_psi),
            ("b_psi", self.b_psi),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidPriors(format!("{name} = {v} must be positive")));
            }
        }
        if !self.mu0.is_finite() {
            return Err(Error::InvalidPriors("mu0 must be finite".to_string()));
        }
        if let Some(b) = &self.beta0 {
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPriors("beta0 must be finite".to_string()));
            }
        }
        Ok(())
    }

    /// Prior mean of β for a design with `dim` columns (intercept first).
    pub fn beta0_for(&self, dim: usize, mean_y: f64) -> Result<Vec<f64>> {
        match &self.beta0 {
            Some(b) if b.len() == dim => Ok(b.clone()),
            Some(b) => Err(Error::InvalidPriors(format!(
                "beta0 has {} entries, design has {dim}",
                b.len()
            ))),
            None => {
                let mut b = vec![0.0; dim];
                if dim > 0 {
                    b[0] = mean_y;
                }
                Ok(b)
            }
        }
    }
}

/// Regression atom of a θ-cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub beta: Vec<f64>,
    pub sigma2_beta: f64,
    pub eta: Vec<f64>,
    pub sigma2_eta: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PsiAtom {
    Binary { p: f64 },
    Continuous { mu: f64, sigma2: f64 },
}

impl PsiAtom {
    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            PsiAtom::Binary { p } => {
                if x == 1.0 {
                    ln(p)
                } else {
                    ln(1.0 - p)
                }
            }
            PsiAtom::Continuous { mu, sigma2 } => crate::math::normal_ln_pdf(x, mu, sigma2),
        }
    }
}

/// Covariate atom of a ψ-subcluster, one entry per schema column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiParams {
    pub atoms: Vec<PsiAtom>,
}

impl PsiParams {
    pub fn ln_density(&self, x: &[f64]) -> f64 {
        self.atoms
            .iter()
            .zip(x)
            .map(|(a, &v)| a.ln_density(v))
            .sum()
    }
}

/// [`PsiParams`] with the logarithms precomputed for repeated density
/// evaluation inside the assignment sweep.
#[derive(Debug, Clone, Default)]
pub struct CompiledPsi {
    p1: usize,
    // (ln p, ln(1 - p))
    binary: Vec<(f64, f64)>,
    // (mu, -0.5 ln(2π σ²), -0.5 / σ²)
    continuous: Vec<(f64, f64, f64)>,
}

impl CompiledPsi {
    pub fn new(psi: &PsiParams) -> Self {
        let mut c = CompiledPsi::default();
        c.compile(psi);
        c
    }

    pub fn compile(&mut self, psi: &PsiParams) {
        self.binary.clear();
        self.continuous.clear();
        for a in &psi.atoms {
            match *a {
                PsiAtom::Binary { p } => self.binary.push((ln(p), ln(1.0 - p))),
                PsiAtom::Continuous { mu, sigma2 } => {
                    self.continuous
                        .push((mu, -0.5 * (LN_2PI + ln(sigma2)), -0.5 / sigma2))
                }
            }
        }
        self.p1 = self.binary.len();
    }

    #[inline]
    pub fn ln_density(&self, x: &[f64]) -> f64 {
        let (xb, xc) = x.split_at(self.p1);
        let mut acc = 0.0;
        for (&v, &(lp, lq)) in xb.iter().zip(&self.binary) {
            acc += if v == 1.0 { lp } else { lq };
        }
        for (&v, &(mu, c, q)) in xc.iter().zip(&self.continuous) {
            let r = v - mu;
            acc += c + q * r * r;
        }
        acc
    }
}

/// Marker label of a subject temporarily detached during reassignment.
pub const DETACHED: (usize, usize) = (usize::MAX, usize::MAX);

/// Nested partition: each subject carries `(θ-cluster, ψ-subcluster)`.
/// Indices are dense; ψ indices are local to their θ-cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedPartition {
    labels: Vec<(usize, usize)>,
    theta_counts: Vec<usize>,
    psi_counts: Vec<Vec<usize>>,
}

impl NestedPartition {
    /// Builds the partition from dense labels, computing the counts.
    /// Entries equal to [`DETACHED`] mark a subject awaiting reassignment.
    pub fn from_labels(labels: Vec<(usize, usize)>) -> Result<Self> {
        let (theta_counts, psi_counts) = count_labels(&labels);
        if theta_counts.contains(&0) || psi_counts.iter().flatten().any(|&c| c == 0) {
            return Err(Error::Invalid("partition labels are not dense".to_string()));
        }
        Ok(Self {
            labels,
            theta_counts,
            psi_counts,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> (usize, usize) {
        self.labels[i]
    }

    pub fn theta_counts(&self) -> &[usize] {
        &self.theta_counts
    }

    pub fn psi_counts(&self) -> &[Vec<usize>] {
        &self.psi_counts
    }

    pub fn n_theta(&self) -> usize {
        self.theta_counts.len()
    }

    pub fn n_psi_total(&self) -> usize {
        self.psi_counts.iter().map(|v| v.len()).sum()
    }

    /// Subjects currently attached (excludes a detached subject).
    pub fn n_attached(&self) -> usize {
        self.theta_counts.iter().sum()
    }

    /// Recounts from the labels and compares with the stored counts.
    pub fn is_consistent(&self) -> bool {
        let attached: Vec<_> = self
            .labels
            .iter()
            .copied()
            .filter(|l| *l != DETACHED)
            .collect();
        let (t, p) = count_labels(&attached);
        t == self.theta_counts
            && p == self.psi_counts
            && !t.contains(&0)
            && p.iter().all(|v| !v.is_empty() && !v.contains(&0))
            && self
                .psi_counts
                .iter()
                .zip(&self.theta_counts)
                .all(|(v, &n)| v.iter().sum::<usize>() == n)
    }

    pub(crate) fn detach(&mut self, i: usize) -> Removal {
        let (k, j) = self.labels[i];
        self.labels[i] = DETACHED;
        self.theta_counts[k] -= 1;
        self.psi_counts[k][j] -= 1;
        if self.theta_counts[k] == 0 {
            let last = self.theta_counts.len() - 1;
            self.theta_counts.swap_remove(k);
            self.psi_counts.swap_remove(k);
            if k != last {
                for l in self.labels.iter_mut() {
                    if l.0 == last {
                        l.0 = k;
                    }
                }
            }
            Removal::Theta { k }
        } else if self.psi_counts[k][j] == 0 {
            let last = self.psi_counts[k].len() - 1;
            self.psi_counts[k].swap_remove(j);
            if j != last {
                for l in self.labels.iter_mut() {
                    if *l == (k, last) {
                        l.1 = j;
                    }
                }
            }
            Removal::Psi { k, j }
        } else {
            Removal::Shared
        }
    }

    pub(crate) fn attach_existing(&mut self, i: usize, k: usize, j: usize) {
        self.labels[i] = (k, j);
        self.theta_counts[k] += 1;
        self.psi_counts[k][j] += 1;
    }

    /// Opens a new ψ-subcluster inside θ-cluster `k`; returns its index.
    pub(crate) fn attach_new_psi(&mut self, i: usize, k: usize) -> usize {
        self.psi_counts[k].push(1);
        self.theta_counts[k] += 1;
        let j = self.psi_counts[k].len() - 1;
        self.labels[i] = (k, j);
        j
    }

    /// Opens a new θ-cluster with a single ψ-subcluster; returns its index.
    pub(crate) fn attach_new_theta(&mut self, i: usize) -> usize {
        self.theta_counts.push(1);
        self.psi_counts.push(vec![1]);
        let k = self.theta_counts.len() - 1;
        self.labels[i] = (k, 0);
        k
    }

    /// Relabels clusters by order of first appearance in subject order.
    /// Returns the θ permutation (`old` index for each new index) and, per
    /// new θ index, the ψ permutation.
    pub(crate) fn canonicalize(&mut self) -> (Vec<usize>, Vec<Vec<usize>>) {
        let kt = self.theta_counts.len();
        let mut theta_map = vec![usize::MAX; kt];
        let mut theta_order = Vec::with_capacity(kt);
        let mut psi_map: Vec<Vec<usize>> =
            self.psi_counts.iter().map(|v| vec![usize::MAX; v.len()]).collect();
        let mut psi_order: Vec<Vec<usize>> = vec![Vec::new(); kt];
        for &(k, j) in &self.labels {
            if theta_map[k] == usize::MAX {
                theta_map[k] = theta_order.len();
                theta_order.push(k);
            }
            if psi_map[k][j] == usize::MAX {
                psi_map[k][j] = psi_order[k].len();
                psi_order[k].push(j);
            }
        }
        for l in self.labels.iter_mut() {
            *l = (theta_map[l.0], psi_map[l.0][l.1]);
        }
        let new_psi_order: Vec<Vec<usize>> =
            theta_order.iter().map(|&k| psi_order[k].clone()).collect();
        self.theta_counts = theta_order.iter().map(|&k| self.theta_counts[k]).collect();
        self.psi_counts = theta_order
            .iter()
            .zip(&new_psi_order)
            .map(|(&k, order)| order.iter().map(|&j| self.psi_counts[k][j]).collect())
            .collect();
        (theta_order, new_psi_order)
    }
}

pub(crate) enum Removal {
    Shared,
    Psi { k: usize, j: usize },
    Theta { k: usize },
}

fn count_labels(labels: &[(usize, usize)]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let live = labels.iter().filter(|&&l| l != DETACHED);
    let kt = live.clone().map(|l| l.0 + 1).max().unwrap_or(0);
    let mut theta = vec![0usize; kt];
    let mut psi: Vec<Vec<usize>> = vec![Vec::new(); kt];
    for &(k, j) in live {
        theta[k] += 1;
        if psi[k].len() <= j {
            psi[k].resize(j + 1, 0);
        }
        psi[k][j] += 1;
    }
    (theta, psi)
}

/// Full state of one Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub partition: NestedPartition,
    pub theta_atoms: Vec<ThetaParams>,
    pub psi_atoms: Vec<Vec<PsiParams>>,
    pub u: Vec<f64>,
    pub sigma2_u: f64,
    pub alpha_theta: f64,
    pub alpha_psi: f64,
    pub rng: ChaCha8Rng,
}

impl ChainState {
    /// Atom maps are keyed exactly by the live clusters and the partition
    /// bookkeeping matches its labels.
    pub fn is_consistent(&self) -> bool {
        self.partition.is_consistent()
            && self.theta_atoms.len() == self.partition.n_theta()
            && self.psi_atoms.len() == self.partition.n_theta()
            && self
                .psi_atoms
                .iter()
                .zip(self.partition.psi_counts())
                .all(|(a, c)| a.len() == c.len())
            && self.u.len() == self.partition.n()
    }

    pub(crate) fn apply_permutation(&mut self, theta_order: &[usize], psi_order: &[Vec<usize>]) {
        let theta: Vec<_> = theta_order
            .iter()
            .map(|&k| self.theta_atoms[k].clone())
            .collect();
        let psi: Vec<Vec<_>> = theta_order
            .iter()
            .zip(psi_order)
            .map(|(&k, order)| order.iter().map(|&j| self.psi_atoms[k][j].clone()).collect())
            .collect();
        self.theta_atoms = theta;
        self.psi_atoms = psi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Enriched DP: nested θ / ψ clustering.
    Edp,
    /// Ordinary DP on the joint (θ, ψ) atoms.
    Dp,
    /// One cluster for everyone: a Bayesian linear mixed model.
    Single,
}

impl core::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edp" => Ok(Mode::Edp),
            "dp" => Ok(Mode::Dp),
            "single" => Ok(Mode::Single),
            other => Err(Error::ConfigInvalid(format!("unknown mode `{other}`"))),
        }
    }
}

impl core::fmt::Display for Mode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Mode::Edp => "EDP",
            Mode::Dp => "DP",
            Mode::Single => "SINGLE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_burnin: usize,
    pub thin: usize,
    pub m_aux: usize,
    pub mode: Mode,
    /// Iterations (1-based) at which predictive draws are taken.
    pub prediction_schedule: Vec<usize>,
    pub seed: u64,
    /// Visit subjects in a random order each sweep instead of dataset order.
    pub shuffle: bool,
    /// Use the uncorrected `p2 / p1` acceptance ratio for the α_ψ update.
    pub alpha_psi_compat: bool,
    /// Gamma(shape, rate) independence proposal for α_ψ; defaults to its prior.
    pub alpha_psi_proposal: Option<(f64, f64)>,
    pub init_theta_clusters: usize,
    /// Keep the per-iteration partition in the trace.
    pub record_partitions: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 5000,
            n_burnin: 1000,
            thin: 1,
            m_aux: 3,
            mode: Mode::Edp,
            prediction_schedule: Vec::new(),
            seed: 1,
            shuffle: false,
            alpha_psi_compat: false,
            alpha_psi_proposal: None,
            init_theta_clusters: 2,
            record_partitions: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.n_burnin >= self.n_iter {
            return bad("n_burnin must be smaller than n_iter");
        }
        if self.m_aux == 0 {
            return bad("m_aux must be at least 1");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.init_theta_clusters == 0 {
            return bad("init_theta_clusters must be at least 1");
        }
        if let Some((a, b)) = self.alpha_psi_proposal {
            if !(a > 0.0 && b > 0.0) {
                return bad("alpha_psi proposal parameters must be positive");
            }
        }
        for &it in &self.prediction_schedule {
            if it <= self.n_burnin || it > self.n_iter {
                return Err(Error::ScheduleOutOfRange(it));
            }
        }
        Ok(())
    }

    /// Whether iteration `it` (1-based) is kept in the trace.
    pub fn is_retained(&self, it: usize) -> bool {
        it > self.n_burnin && (it - self.n_burnin) % self.thin == 0
    }
}

/// `count` iterations evenly spaced over `(n_burnin, n_iter]`, ending at
/// `n_iter`.
pub fn evenly_spaced_schedule(n_burnin: usize, n_iter: usize, count: usize) -> Vec<usize> {
    let span = n_iter.saturating_sub(n_burnin);
    let count = count.min(span);
    (1..=count).map(|j| n_burnin + j * span / count).collect()
}
