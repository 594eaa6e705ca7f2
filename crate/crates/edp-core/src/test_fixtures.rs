//! Small hand-built datasets and states shared by unit tests.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sampler::Model;
use crate::splines::SplineSpec;
use crate::types::{
    validate_dataset, ChainState, CovariateSchema, LongitudinalDataset, NestedPartition, Priors,
    PsiAtom, PsiParams, SubjectRecord, ThetaParams,
};

pub fn subject(id: &str, x: &[f64], t: &[f64], y: &[f64]) -> SubjectRecord {
    SubjectRecord {
        id: id.to_string(),
        x: x.to_vec(),
        t: t.to_vec(),
        y: y.to_vec(),
    }
}

/// Three subjects, one binary and one continuous covariate.
pub fn tiny_dataset() -> LongitudinalDataset {
    validate_dataset(LongitudinalDataset {
        schema: CovariateSchema::numbered(1, 1),
        subjects: vec![
            subject("a", &[1.0, 0.3], &[0.1, 0.5, 0.9], &[1.0, 1.4, 2.1]),
            subject("b", &[0.0, -0.7], &[0.2, 0.6], &[0.3, -0.2]),
            subject("c", &[1.0, 1.2], &[0.4], &[2.5]),
        ],
    })
    .unwrap()
}

/// Model without a spline: `x* = (1, x1, x2, t)`.
pub fn linear_model(ds: &LongitudinalDataset) -> Model {
    Model::new(ds, &SplineSpec::none(), Priors::default()).unwrap()
}

pub fn theta(beta: &[f64], eta: &[f64], sigma2: f64) -> ThetaParams {
    ThetaParams {
        beta: beta.to_vec(),
        sigma2_beta: 1.0,
        eta: eta.to_vec(),
        sigma2_eta: 1.0,
        sigma2,
    }
}

pub fn psi(p: f64, mu: f64, sigma2: f64) -> PsiParams {
    PsiParams {
        atoms: vec![PsiAtom::Binary { p }, PsiAtom::Continuous { mu, sigma2 }],
    }
}

pub fn state(
    labels: Vec<(usize, usize)>,
    theta_atoms: Vec<ThetaParams>,
    psi_atoms: Vec<Vec<PsiParams>>,
    u: Vec<f64>,
) -> ChainState {
    ChainState {
        partition: NestedPartition::from_labels(labels).unwrap(),
        theta_atoms,
        psi_atoms,
        u,
        sigma2_u: 0.4,
        alpha_theta: 0.8,
        alpha_psi: 1.3,
        rng: ChaCha8Rng::seed_from_u64(0),
    }
}

/// `n` subjects with 1 to 3 observations on a smooth trend.
pub fn random_dataset(n: usize, seed: u64) -> LongitudinalDataset {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects: Vec<SubjectRecord> = (0..n)
        .map(|i| {
            let m = rng.random_range(1..=3);
            let mut t: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            t.sort_by(f64::total_cmp);
            let x = vec![f64::from(rng.random::<bool>()), rng.random::<f64>() * 2.0 - 1.0];
            let shift = if i % 2 == 0 { 0.0 } else { 3.0 };
            let y = t
                .iter()
                .map(|&tv| shift + 2.0 * tv + x[1] + rng.random::<f64>() - 0.5)
                .collect();
            SubjectRecord {
                id: alloc::format!("s{i:03}"),
                x,
                t,
                y,
            }
        })
        .collect();
    validate_dataset(LongitudinalDataset {
        schema: CovariateSchema::numbered(1, 1),
        subjects,
    })
    .unwrap()
}
