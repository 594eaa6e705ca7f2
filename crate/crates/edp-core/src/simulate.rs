//! Synthetic longitudinal data with three outcome clusters and nested
//! covariate subclusters, prediction-error metrics and the comparison
//! study across the three sampler modes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::predict::PredictionTarget;
use crate::sampler::run_chain;
use crate::splines::{KnotPlacement, SplineKind, SplineSpec, DEFAULT_DEGREE, DEFAULT_THIN_PLATE_KNOTS};
use crate::types::{
    evenly_spaced_schedule, validate_dataset, CovariateSchema, LongitudinalDataset, Mode, Priors,
    SamplerConfig, SubjectRecord,
};

pub const N_COVARIATES: usize = 20;
pub const N_BINARY: usize = 3;
pub const EVALUATION_TIME: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    /// Three outcome clusters with 3, 2 and 3 covariate subclusters.
    Clustered,
    /// Everyone follows the first mean function and first covariate law.
    Single,
}

/// Law of the 20 covariates within one subcluster: three Bernoulli
/// probabilities, `(mean, variance)` for x4 and x5, and a shared
/// `(mean, variance)` for x6 to x20.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateLaw {
    pub binary: [f64; 3],
    pub x4: (f64, f64),
    pub x5: (f64, f64),
    pub rest: (f64, f64),
}

const fn law(binary: [f64; 3], x4: (f64, f64), x5: (f64, f64), rest: (f64, f64)) -> CovariateLaw {
    CovariateLaw {
        binary,
        x4,
        x5,
        rest,
    }
}

/// Covariate laws indexed `[θ-cluster][ψ-subcluster]`.
pub fn covariate_laws() -> [&'static [CovariateLaw]; 3] {
    const SQRT2: f64 = core::f64::consts::SQRT_2;
    static C1: [CovariateLaw; 3] = [
        law([0.5, 0.75, 0.2], (0.0, 1.0), (SQRT2, SQRT2), (0.0, 1.0)),
        law([0.3, 0.5, 0.5], (0.5, 0.5), (1.0, 2.0), (-0.5, 1.0)),
        law([0.5, 0.5, 0.8], (0.5, 2.0), (0.0, 1.0), (0.5, 1.0)),
    ];
    static C2: [CovariateLaw; 2] = [
        law([0.75, 0.5, 0.35], (2.0, 1.0), (0.0, 1.0), (-0.5, 1.0)),
        law([0.5, 0.5, 0.5], (1.0, 2.0), (-1.0, 1.0), (0.5, 1.0)),
    ];
    static C3: [CovariateLaw; 3] = [
        law([0.75, 0.1, 0.3], (0.5, 1.5), (0.0, 1.0), (0.5, 1.0)),
        law([0.5, 0.3, 0.5], (-0.5, 1.0), (0.0, 0.5), (-0.5, 1.0)),
        law([0.5, 0.7, 0.5], (0.0, 2.0), (-1.0, 2.0), (0.0, 1.0)),
    ];
    [&C1, &C2, &C3]
}

/// Noise-free mean of outcome cluster `cluster` (0-based) at time `t`.
pub fn mean_function(cluster: usize, t: f64, x: &[f64]) -> f64 {
    match cluster {
        0 => 2.0 + 7.0 * t - 2.0 * x[0] - 0.5 + 2.0 * libm::cos(x[3]),
        1 => 7.0 - 20.0 * (t - 0.4) * (t - 0.4) + 1.1 * x[1] - 0.8 * x[2] + 0.5 * x[3] * x[3],
        2 => 6.0 - 8.0 * (t - 0.75) * (t - 0.75) - 3.0 * x[0] - x[3] + x[4],
        _ => panic!("outcome cluster {cluster} does not exist"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub sigma2: f64,
    pub sigma2_u: f64,
    pub theta_probs: Vec<f64>,
    pub psi_probs: Vec<Vec<f64>>,
    pub structure: Structure,
    pub seed: u64,
    pub max_obs: usize,
}

impl DgpConfig {
    /// Uniform cluster and subcluster probabilities, 1 to 5 observations.
    pub fn new(n: usize, sigma2: f64, sigma2_u: f64, structure: Structure, seed: u64) -> Self {
        Self {
            n,
            sigma2,
            sigma2_u,
            theta_probs: vec![1.0 / 3.0; 3],
            psi_probs: vec![vec![1.0 / 3.0; 3], vec![0.5; 2], vec![1.0 / 3.0; 3]],
            structure,
            seed,
            max_obs: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(self.sigma2 > 0.0 && self.sigma2_u > 0.0) {
            return bad("variances must be positive".into());
        }
        if self.max_obs == 0 {
            return bad("max_obs must be at least 1".into());
        }
        let sums_to_one = |p: &[f64]| {
            p.iter().all(|&v| v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
        };
        if self.theta_probs.len() != 3 || !sums_to_one(&self.theta_probs) {
            return bad("theta_probs must be 3 probabilities summing to 1".into());
        }
        let sizes = [3, 2, 3];
        if self.psi_probs.len() != 3 {
            return bad("psi_probs needs one vector per outcome cluster".into());
        }
        for (k, p) in self.psi_probs.iter().enumerate() {
            if p.len() != sizes[k] || !sums_to_one(p) {
                return bad(format!("psi_probs[{k}] must be {} probabilities summing to 1", sizes[k]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTruth {
    pub theta: Vec<usize>,
    pub psi: Vec<usize>,
    pub u: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub t_star: f64,
    /// Noise-free value at `t_star` per subject.
    pub y_star: Vec<f64>,
}

pub fn simulation_schema() -> CovariateSchema {
    CovariateSchema::numbered(N_BINARY, N_COVARIATES - N_BINARY)
}

pub fn generate_dataset(cfg: &DgpConfig) -> Result<(LongitudinalDataset, SimulatedTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let laws = covariate_laws();
    let width = digits(cfg.n);
    let mut subjects = Vec::with_capacity(cfg.n);
    let mut truth = SimulatedTruth {
        theta: Vec::with_capacity(cfg.n),
        psi: Vec::with_capacity(cfg.n),
        u: Vec::with_capacity(cfg.n),
        x: Vec::with_capacity(cfg.n),
        t_star: EVALUATION_TIME,
        y_star: Vec::with_capacity(cfg.n),
    };
    for i in 0..cfg.n {
        let n_i = rng.random_range(1..=cfg.max_obs);
        let mut t: Vec<f64> = (0..n_i).map(|_| rng.random::<f64>()).collect();
        t.sort_by(f64::total_cmp);
        let u = math::normal(&mut rng, 0.0, cfg.sigma2_u);
        let (k, j) = match cfg.structure {
            Structure::Clustered => {
                let k = math::sample_categorical(&mut rng, &cfg.theta_probs);
                (k, math::sample_categorical(&mut rng, &cfg.psi_probs[k]))
            }
            Structure::Single => (0, 0),
        };
        let x = draw_covariates(&mut rng, &laws[k][j]);
        let y = t
            .iter()
            .map(|&tv| math::normal(&mut rng, mean_function(k, tv, &x) + u, cfg.sigma2))
            .collect();
        truth.y_star.push(mean_function(k, EVALUATION_TIME, &x) + u);
        truth.theta.push(k);
        truth.psi.push(j);
        truth.u.push(u);
        truth.x.push(x.clone());
        subjects.push(SubjectRecord {
            id: format!("s{:0width$}", i + 1),
            x,
            t,
            y,
        });
    }
    let dataset = validate_dataset(LongitudinalDataset {
        schema: simulation_schema(),
        subjects,
    })?;
    Ok((dataset, truth))
}

fn digits(n: usize) -> usize {
    let mut d = 1;
    let mut v = n;
    while v >= 10 {
        v /= 10;
        d += 1;
    }
    d
}

pub fn draw_covariates<R: Rng + ?Sized>(rng: &mut R, law: &CovariateLaw) -> Vec<f64> {
    let mut x = Vec::with_capacity(N_COVARIATES);
    for &p in &law.binary {
        x.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
    }
    x.push(math::normal(rng, law.x4.0, law.x4.1));
    x.push(math::normal(rng, law.x5.0, law.x5.1));
    for _ in 5..N_COVARIATES {
        x.push(math::normal(rng, law.rest.0, law.rest.1));
    }
    x
}

/// Noise-free outcome of `subject` at `t_star`.
pub fn true_value(truth: &SimulatedTruth, subject: usize, t_star: f64) -> f64 {
    mean_function(truth.theta[subject], t_star, &truth.x[subject]) + truth.u[subject]
}

/// Mean absolute and mean squared prediction error.
pub fn l1_l2_errors(predictions: &[f64], truths: &[f64]) -> Result<(f64, f64)> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return Err(Error::LengthMismatch {
            subject: String::new(),
            detail: format!("{} predictions for {} true values", predictions.len(), truths.len()),
        });
    }
    let n = predictions.len() as f64;
    let (mut l1, mut l2) = (0.0, 0.0);
    for (p, t) in predictions.iter().zip(truths) {
        let e = p - t;
        l1 += e.abs();
        l2 += e * e;
    }
    Ok((l1 / n, l2 / n))
}

/// One cell of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub sigma2: f64,
    pub sigma2_u: f64,
    pub structure: Structure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenarios: Vec<Scenario>,
    pub n_datasets: usize,
    pub n: usize,
    pub seed: u64,
    /// Template for every fit; mode, seed and schedule are set per task.
    pub sampler: SamplerConfig,
    pub priors: Priors,
    pub spline_kind: SplineKind,
    pub n_knots: usize,
    /// Predictive draws per subject used for the point prediction.
    pub n_predictions: usize,
    pub modes: Vec<Mode>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_datasets == 0 {
            return Err(Error::ConfigInvalid("n_datasets must be at least 1".into()));
        }
        if self.n_predictions == 0 {
            return Err(Error::ConfigInvalid("n_predictions must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::ConfigInvalid("at least one method is required".into()));
        }
        self.sampler.validate()
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![Scenario {
                name: "s1_u015".into(),
                sigma2: 1.0,
                sigma2_u: 0.15,
                structure: Structure::Clustered,
            }],
            n_datasets: 10,
            n: 1000,
            seed: 1,
            sampler: SamplerConfig::default(),
            priors: Priors::default(),
            spline_kind: SplineKind::ThinPlate,
            n_knots: DEFAULT_THIN_PLATE_KNOTS,
            n_predictions: 200,
            modes: vec![Mode::Edp, Mode::Dp, Mode::Single],
        }
    }
}

/// Result of one (scenario, replicate, method) fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub scenario: usize,
    pub replicate: usize,
    pub mode: Mode,
    pub data_seed: u64,
    pub chain_seed: u64,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub scenario: String,
    pub method: Mode,
    pub l1_mean: f64,
    pub l2_mean: f64,
    pub n_datasets: usize,
    pub n: usize,
    pub seed: u64,
}

/// SplitMix64 finaliser; derives independent per-task seeds.
pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replicate_seed(cfg: &StudyConfig, scenario: usize, replicate: usize) -> u64 {
    mix_seed(cfg.seed, scenario as u64 + 1, replicate as u64 + 1)
}

/// Generates one dataset and fits it with `mode`, predicting every subject
/// at the evaluation time by the mean of its scheduled predictive draws.
pub fn run_replicate(cfg: &StudyConfig, scenario: usize, replicate: usize, mode: Mode) -> Result<ReplicateResult> {
    let sc = &cfg.scenarios[scenario];
    let data_seed = replicate_seed(cfg, scenario, replicate);
    let dgp = DgpConfig::new(cfg.n, sc.sigma2, sc.sigma2_u, sc.structure, data_seed);
    let (dataset, truth) = generate_dataset(&dgp)?;
    let spec = SplineSpec::from_times(
        cfg.spline_kind,
        &dataset.all_times(),
        cfg.n_knots,
        KnotPlacement::Quantile,
        DEFAULT_DEGREE,
    )?;
    let chain_seed = mix_seed(data_seed, 7, mode as u64 + 1);
    let mut sampler = cfg.sampler.clone();
    sampler.mode = mode;
    sampler.seed = chain_seed;
    sampler.record_partitions = false;
    sampler.prediction_schedule = evenly_spaced_schedule(sampler.n_burnin, sampler.n_iter, cfg.n_predictions);
    let targets: Vec<PredictionTarget> = dataset
        .subjects
        .iter()
        .map(|s| PredictionTarget::new(s.id.clone(), EVALUATION_TIME))
        .collect();
    let out = run_chain(&dataset, &spec, &cfg.priors, &sampler, &targets)?;
    let (l1, l2) = l1_l2_errors(&out.imputations.means(), &truth.y_star)?;
    Ok(ReplicateResult {
        scenario,
        replicate,
        mode,
        data_seed,
        chain_seed,
        l1,
        l2,
    })
}

/// Every (scenario, replicate, method) task in a fixed order.
pub fn study_tasks(cfg: &StudyConfig) -> Vec<(usize, usize, Mode)> {
    let mut tasks = Vec::new();
    for s in 0..cfg.scenarios.len() {
        for r in 0..cfg.n_datasets {
            for &m in &cfg.modes {
                tasks.push((s, r, m));
            }
        }
    }
    tasks
}

/// Averages replicate errors per (scenario, method), in scenario then
/// method order.
pub fn aggregate_study(cfg: &StudyConfig, results: &[ReplicateResult]) -> Vec<StudyRow> {
    let mut rows = Vec::new();
    for (s, sc) in cfg.scenarios.iter().enumerate() {
        for &m in &cfg.modes {
            let cell: Vec<&ReplicateResult> = results
                .iter()
                .filter(|r| r.scenario == s && r.mode == m)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let k = cell.len() as f64;
            rows.push(StudyRow {
                scenario: sc.name.clone(),
                method: m,
                l1_mean: cell.iter().map(|r| r.l1).sum::<f64>() / k,
                l2_mean: cell.iter().map(|r| r.l2).sum::<f64>() / k,
                n_datasets: cell.len(),
                n: cfg.n,
                seed: cfg.seed,
            });
        }
    }
    rows
}

/// Sequential study runner.
pub fn run_study(cfg: &StudyConfig) -> Result<(Vec<StudyRow>, Vec<ReplicateResult>)> {
    cfg.validate()?;
    let results = study_tasks(cfg)
        .into_iter()
        .map(|(s, r, m)| run_replicate(cfg, s, r, m))
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate_study(cfg, &results), results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::mean_and_se;

    #[test]
    fn mean_function_reference_points() {
        let zero = [0.0; N_COVARIATES];
        assert!((mean_function(0, 0.0, &zero) - 3.5).abs() < 1e-15);
        assert!((mean_function(1, 0.4, &zero) - 7.0).abs() < 1e-15);
        assert!((mean_function(2, 0.75, &zero) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn true_value_matches_direct_formula() {
        let cfg = DgpConfig::new(30, 1.0, 0.5, Structure::Clustered, 4);
        let (_, truth) = generate_dataset(&cfg).unwrap();
        for i in 0..30 {
            let x = &truth.x[i];
            let t = 0.3;
            let expect = match truth.theta[i] {
                0 => 2.0 + 7.0 * t - 2.0 * x[0] - 0.5 + 2.0 * x[3].cos() + truth.u[i],
                1 => 7.0 - 20.0 * (t - 0.4f64).powi(2) + 1.1 * x[1] - 0.8 * x[2] + 0.5 * x[3].powi(2) + truth.u[i],
                _ => 6.0 - 8.0 * (t - 0.75f64).powi(2) - 3.0 * x[0] - x[3] + x[4] + truth.u[i],
            };
            assert!((true_value(&truth, i, t) - expect).abs() < 1e-12);
            assert!((true_value(&truth, i, 0.75) - truth.y_star[i]).abs() < 1e-12);
        }
        let mut shifted = truth.clone();
        shifted.u[0] += 0.25;
        assert!((true_value(&shifted, 0, 0.5) - true_value(&truth, 0, 0.5) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn generated_data_invariants() {
        let cfg = DgpConfig::new(400, 1.0, 0.15, Structure::Clustered, 9);
        let (ds, truth) = generate_dataset(&cfg).unwrap();
        assert_eq!(ds.n(), 400);
        for (s, &k) in ds.subjects.iter().zip(&truth.theta) {
            assert!((1..=5).contains(&s.n_obs()));
            assert!(s.t.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.t.iter().all(|&t| (0.0..1.0).contains(&t)));
            assert!(s.x[..3].iter().all(|&v| v == 0.0 || v == 1.0));
            assert!(k < 3);
        }
        let (again, _) = generate_dataset(&cfg).unwrap();
        assert_eq!(ds, again);
        let single = DgpConfig::new(50, 1.0, 0.15, Structure::Single, 9);
        let (_, t) = generate_dataset(&single).unwrap();
        assert!(t.theta.iter().all(|&k| k == 0) && t.psi.iter().all(|&j| j == 0));
    }

    #[test]
    fn covariate_moments_follow_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let laws = covariate_laws();
        let draws = 100_000;
        for (k, group) in laws.iter().enumerate() {
            for (j, law) in group.iter().enumerate() {
                let xs: Vec<Vec<f64>> = (0..draws).map(|_| draw_covariates(&mut rng, law)).collect();
                let col = |l: usize| -> Vec<f64> { xs.iter().map(|x| x[l]).collect() };
                let mut expected: Vec<(usize, f64, f64)> = vec![
                    (0, law.binary[0], law.binary[0] * (1.0 - law.binary[0])),
                    (1, law.binary[1], law.binary[1] * (1.0 - law.binary[1])),
                    (2, law.binary[2], law.binary[2] * (1.0 - law.binary[2])),
                    (3, law.x4.0, law.x4.1),
                    (4, law.x5.0, law.x5.1),
                ];
                expected.push((12, law.rest.0, law.rest.1));
                for (l, mean, var) in expected {
                    let (m, se) = mean_and_se(&col(l));
                    assert!((m - mean).abs() < 4.0 * se, "θ{k} ψ{j} x{}: {m} vs {mean}", l + 1);
                    if l < N_BINARY {
                        continue;
                    }
                    let c = col(l);
                    let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (draws as f64 - 1.0);
                    // Variance of the sample variance, bounded via the fourth moment.
                    let m4 = c.iter().map(|x| (x - m).powi(4)).sum::<f64>() / draws as f64;
                    let se_v = ((m4 - v * v) / draws as f64).sqrt();
                    assert!((v - var).abs() < 4.0 * se_v, "θ{k} ψ{j} x{} variance {v} vs {var}", l + 1);
                }
            }
        }
    }

    #[test]
    fn x3_probability_in_third_subcluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let law = covariate_laws()[0][2];
        let v: Vec<f64> = (0..100_000).map(|_| draw_covariates(&mut rng, &law)[2]).collect();
        let (m, se) = mean_and_se(&v);
        assert!((m - 0.8).abs() < 3.0 * se);
    }

    #[test]
    fn error_metrics() {
        assert_eq!(l1_l2_errors(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        assert_eq!(l1_l2_errors(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), (1.0, 1.0));
        let p = [0.3, 1.2, -0.7, 2.5, 0.0, 4.1, -2.2, 0.9, 1.1, 3.3];
        let t = [0.1, 1.0, -0.2, 2.0, 0.4, 4.0, -2.0, 1.5, 1.0, 3.0];
        let (l1, l2) = l1_l2_errors(&p, &t).unwrap();
        // Spreadsheet-style: |e| = .2 .2 .5 .5 .4 .1 .2 .6 .1 .3
        assert!((l1 - 3.1 / 10.0).abs() < 1e-12);
        assert!((l2 - 1.25 / 10.0).abs() < 1e-12);
        assert!(l1_l2_errors(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let mut cfg = DgpConfig::new(10, 1.0, 0.15, Structure::Clustered, 1);
        cfg.theta_probs = vec![0.5, 0.5, 0.5];
        assert!(matches!(generate_dataset(&cfg), Err(Error::ConfigInvalid(_))));
    }
}
