use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

use super::*;
use crate::diagnostics::mean_and_se;
use crate::splines::{KnotPlacement, SplineKind, SplineSpec};
use crate::test_fixtures::*;
use crate::types::{evenly_spaced_schedule, validate_dataset, LongitudinalDataset, NestedPartition, PsiAtom, PsiParams};

fn brute_fx0(x: &[f64], priors: &Priors) -> f64 {
    let p1 = priors.a_x / (priors.a_x + priors.b_x);
    let bern = if x[0] == 1.0 { p1 } else { 1.0 - p1 };
    let scale = (priors.tau0_sq * (1.0 + 1.0 / priors.c0)).sqrt();
    bern * StudentsT::new(priors.mu0, scale, priors.nu0).unwrap().pdf(x[1])
}

fn brute_fx(x: &[f64], psi: &PsiParams) -> f64 {
    psi.atoms
        .iter()
        .zip(x)
        .map(|(a, &v)| match *a {
            PsiAtom::Binary { p } => if v == 1.0 { p } else { 1.0 - p },
            PsiAtom::Continuous { mu, sigma2 } => {
                libm::exp(-0.5 * (v - mu) * (v - mu) / sigma2) / libm::sqrt(2.0 * core::f64::consts::PI * sigma2)
            }
        })
        .product()
}

/// θ-cluster 0 holds subjects a and b in two ψ-subclusters; c is alone.
fn two_cluster_state() -> ChainState {
    state(
        vec![(0, 0), (0, 1), (1, 0)],
        vec![theta(&[0.5, 0.1, 0.4, 1.2], &[], 0.8), theta(&[-1.0, 0.9, -0.3, 0.2], &[], 1.5)],
        vec![vec![psi(0.3, -0.5, 0.9), psi(0.8, 0.4, 0.3)], vec![psi(0.7, 1.0, 0.5)]],
        vec![0.15, -0.2, 0.05],
    )
}

#[test]
fn new_subject_weights_match_printed_formula() {
    let ds = tiny_dataset();
    let model = linear_model(&ds);
    let st = two_cluster_state();
    let priors = &model.priors;
    let (a_t, a_p, n) = (st.alpha_theta, st.alpha_psi, 3.0);
    for x in [[1.0, 0.2], [0.0, -1.4], [1.0, 3.0]] {
        let f0 = brute_fx0(&x, priors);
        let w0 = 2.0 / (a_t + n)
            * (a_p / (a_p + 2.0) * f0
                + 1.0 / (a_p + 2.0) * brute_fx(&x, &st.psi_atoms[0][0])
                + 1.0 / (a_p + 2.0) * brute_fx(&x, &st.psi_atoms[0][1]));
        let w1 = 1.0 / (a_t + n) * (a_p / (a_p + 1.0) * f0 + 1.0 / (a_p + 1.0) * brute_fx(&x, &st.psi_atoms[1][0]));
        let wn = a_t / (a_t + n) * f0;
        let total = w0 + w1 + wn;
        let w = new_subject_cluster_weights(&x, &st, priors, model.design.schema(), Mode::Edp);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (got, want) in w.iter().zip([w0 / total, w1 / total, wn / total]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}

#[test]
fn new_subject_weights_in_dp_and_single_modes() {
    let ds = tiny_dataset();
    let model = linear_model(&ds);
    let mut st = two_cluster_state();
    st.partition = NestedPartition::from_labels(vec![(0, 0), (0, 0), (1, 0)]).unwrap();
    st.psi_atoms = vec![vec![psi(0.3, -0.5, 0.9)], vec![psi(0.7, 1.0, 0.5)]];
    let x = [1.0, 0.2];
    let a = st.alpha_theta;
    let raw = [
        2.0 * brute_fx(&x, &st.psi_atoms[0][0]),
        brute_fx(&x, &st.psi_atoms[1][0]),
        a * brute_fx0(&x, &model.priors),
    ];
    let total: f64 = raw.iter().sum();
    let w = new_subject_cluster_weights(&x, &st, &model.priors, model.design.schema(), Mode::Dp);
    for (g, r) in w.iter().zip(raw) {
        assert!((g - r / total).abs() < 1e-12);
    }
    let s = new_subject_cluster_weights(&x, &st, &model.priors, model.design.schema(), Mode::Single);
    assert_eq!(s[2], 0.0);
    assert!((s[0] + s[1] - 1.0).abs() < 1e-12);
}

#[test]
fn concentration_limits() {
    let ds = tiny_dataset();
    let model = linear_model(&ds);
    let mut st = state(
        vec![(0, 0); 3],
        vec![theta(&[0.0; 4], &[], 1.0)],
        vec![vec![psi(0.5, 0.0, 1.0)]],
        vec![0.0; 3],
    );
    let x = [1.0, 0.5];
    st.alpha_theta = 1e-12;
    let w = new_subject_cluster_weights(&x, &st, &model.priors, model.design.schema(), Mode::Edp);
    assert!(w[0] > 1.0 - 1e-10);
    st.alpha_theta = 1e12;
    let w = new_subject_cluster_weights(&x, &st, &model.priors, model.design.schema(), Mode::Edp);
    assert!(w[1] > 1.0 - 1e-10);
}

#[test]
fn predict_observed_law() {
    let ds = tiny_dataset();
    let model = linear_model(&ds);
    let mut st = two_cluster_state();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = 0.75;
    let x = &ds.subjects[1].x;
    let th = &st.theta_atoms[0];
    let mean = th.beta[0] + th.beta[1] * x[0] + th.beta[2] * x[1] + th.beta[3] * t + st.u[1];
    let draws: Vec<f64> = (0..10_000)
        .map(|_| predict_observed(&model, &st, 1, t, &mut rng).unwrap())
        .collect();
    let (m, se) = mean_and_se(&draws);
    assert!((m - mean).abs() < 3.0 * se);

    st.theta_atoms[0].sigma2 = 1e-300;
    let v = predict_observed(&model, &st, 1, t, &mut rng).unwrap();
    assert!((v - mean).abs() < 1e-12);
    assert!(matches!(predict_observed(&model, &st, 3, t, &mut rng), Err(Error::UnknownSubject(_))));
}

#[test]
fn cluster_mean_reuses_training_basis_rows() {
    let ds = tiny_dataset();
    let spec = SplineSpec::from_times(SplineKind::ThinPlate, &ds.all_times(), 3, KnotPlacement::Quantile, 3).unwrap();
    let model = Model::new(&ds, &spec, Priors::default()).unwrap();
    let th = theta(&[0.3, -0.2, 0.7], &[1.0, -0.5, 0.25], 1.0);
    for i in 0..3 {
        for v in model.design.obs_range(i) {
            let s = &ds.subjects[i];
            let t = s.t[v - model.design.obs_range(i).start];
            let from_rows = crate::design::dot(model.design.fixed_row(v), &th.beta)
                + crate::design::dot(model.design.basis_row(v), &th.eta);
            assert!((cluster_mean(&model, &th, &s.x, t) - from_rows).abs() < 1e-12);
        }
    }
    // A knot location evaluated directly matches too.
    let knot = spec.knots[1];
    let mut z = vec![0.0; 3];
    model.design.basis_row_at(knot, &mut z);
    let expect = 0.3 - 0.2 * 1.0 + 0.7 * 0.5 + crate::design::dot(&z, &th.eta);
    assert!((cluster_mean(&model, &th, &[1.0, 0.5], knot) - expect).abs() < 1e-12);
}

#[test]
fn predict_new_mixture_mean() {
    // The new-cluster weight is made negligible so the Monte Carlo mean has
    // finite-variance components only.
    let ds = tiny_dataset();
    let model = linear_model(&ds);
    let mut st = two_cluster_state();
    st.alpha_theta = 1e-200;
    let x = [0.0, 0.6];
    let t = 0.4;
    let w = new_subject_cluster_weights(&x, &st, &model.priors, model.design.schema(), Mode::Edp);
    let mix: f64 = (0..2).map(|k| w[k] * cluster_mean(&model, &st.theta_atoms[k], &x, t)).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| predict_new(&model, &st, &x, t, Mode::Edp, &mut rng))
        .collect();
    let (m, se) = mean_and_se(&draws);
    assert!((m - mix).abs() < 3.0 * se, "{m} vs {mix} ± {se}");

    // With one cluster the law is N(mean, σ² + σ²_u).
    let one = state(
        vec![(0, 0); 3],
        vec![theta(&[1.0, 0.5, -0.5, 2.0], &[], 0.6)],
        vec![vec![psi(0.5, 0.0, 1.0)]],
        vec![0.0; 3],
    );
    let mut one = one;
    one.alpha_theta = 1e-200;
    let mean = cluster_mean(&model, &one.theta_atoms[0], &x, t);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| predict_new(&model, &one, &x, t, Mode::Edp, &mut rng))
        .collect();
    let (m, se) = mean_and_se(&draws);
    assert!((m - mean).abs() < 3.0 * se);
    let var = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (draws.len() - 1) as f64;
    let expect = 0.6 + one.sigma2_u;
    assert!((var - expect).abs() < 3.0 * expect * (2.0 / draws.len() as f64).sqrt());
}

#[test]
fn predict_new_with_degenerate_base_measure() {
    let ds = tiny_dataset();
    let mut priors = Priors::default();
    priors.beta0 = Some(vec![1.0, 2.0, -1.0, 0.5]);
    priors.a_y = 1e8;
    priors.b_y = 1e-6;
    priors.a_beta = 1e8;
    priors.b_beta = 1e-6;
    let model = Model::new(&ds, &SplineSpec::none(), priors).unwrap();
    let mut st = two_cluster_state();
    st.alpha_theta = 1e300;
    st.sigma2_u = 1e-16;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = [1.0, 0.5];
    for _ in 0..100 {
        let v = predict_new(&model, &st, &x, 0.2, Mode::Edp, &mut rng);
        assert!((v - (1.0 + 2.0 - 0.5 + 0.1)).abs() < 1e-4, "{v}");
    }
}

fn dataset_with_covariates_only() -> LongitudinalDataset {
    let mut ds = tiny_dataset();
    ds.subjects.push(subject("d", &[0.0, 0.1], &[], &[]));
    validate_dataset(ds).unwrap()
}

#[test]
fn routing_and_cardinality() {
    let ds = dataset_with_covariates_only();
    let model = linear_model(&ds);
    let a = PredictionTarget::new("a", 1.0);
    let d = PredictionTarget::new("d", 1.0);
    assert_eq!(a.mode(&model).unwrap(), TargetMode::ObservedSubject);
    assert_eq!(d.mode(&model).unwrap(), TargetMode::NewSubject);
    assert!(matches!(PredictionTarget::new("zz", 1.0).mode(&model), Err(Error::UnknownSubject(_))));
    assert!(PredictionTarget::new("a", f64::NAN).check(&model).is_err());

    let mut st = state(
        vec![(0, 0), (0, 1), (1, 0), (1, 0)],
        vec![theta(&[0.5, 0.1, 0.4, 1.2], &[], 1e-300), theta(&[-1.0, 0.9, -0.3, 0.2], &[], 1e-300)],
        vec![vec![psi(0.3, -0.5, 0.9), psi(0.8, 0.4, 0.3)], vec![psi(0.7, 1.0, 0.5)]],
        vec![0.15, -0.2, 0.05, 0.0],
    );
    // The covariates-only subject's stored u must not be used: make it huge.
    st.u[3] = 1e6;
    st.sigma2_u = 1e-300;
    let mut set = ImputationSet::new(vec![a, d], vec![10, 20, 30]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        collect_imputations(&model, &st, Mode::Edp, &mut rng, &mut set);
    }
    assert!(set.is_complete());
    assert_eq!(set.draws.iter().map(Vec::len).sum::<usize>(), 6);
    let a_mean = cluster_mean(&model, &st.theta_atoms[0], &ds.subjects[0].x, 1.0) + 0.15;
    assert!(set.draws[0].iter().all(|v| (v - a_mean).abs() < 1e-9));
    assert!(set.draws[1].iter().all(|v| v.abs() < 100.0));
    assert_eq!(set.means().len(), 2);
}

#[test]
fn schedule_at_full_scale() {
    let s = evenly_spaced_schedule(40_000, 200_000, 800);
    let expect: Vec<usize> = (1..=800).map(|m| 40_000 + 200 * m).collect();
    assert_eq!(s, expect);
    assert_eq!(s[0], 40_200);
    assert_eq!(*s.last().unwrap(), 200_000);
}

fn set_of(values: &[&[f64]]) -> ImputationSet {
    let targets = (0..values.len())
        .map(|i| PredictionTarget::new(alloc::format!("p{i}"), 365.0))
        .collect();
    let mut set = ImputationSet::new(targets, (1..=values[0].len()).collect());
    set.draws = values.iter().map(|v| v.to_vec()).collect();
    set
}

#[test]
fn threshold_examples() {
    let set = set_of(&[&[6.5, 6.4], &[5.0, 5.0]]);
    let mut observed = BTreeMap::new();
    observed.insert("p1".to_string(), vec![6.0]);
    observed.insert("q".to_string(), vec![7.0, 5.0]);
    let mut events = BTreeSet::new();
    events.insert("r".to_string());
    let table = classify_threshold(&set, &observed, &events, 6.5);
    assert_eq!(table.subjects, ["p0", "p1", "q", "r"].map(String::from));
    // Boundary inclusion, all-below, observed exceedance, recorded event.
    assert_eq!(table.outcomes, vec![vec![true, false, true, true], vec![false, false, true, true]]);
    assert_eq!(table.event_counts(), vec![3, 2]);

    let mut events = BTreeSet::new();
    events.insert("p1".to_string());
    let table = classify_threshold(&set, &observed, &events, 6.5);
    assert!(table.outcomes.iter().all(|row| row[1]));
}

proptest! {
    #[test]
    fn threshold_is_monotone(
        base in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 4), 3),
        bumps in proptest::collection::vec(proptest::collection::vec(0.0f64..3.0, 4), 3),
        threshold in 0.0f64..10.0,
    ) {
        let low: Vec<&[f64]> = base.iter().map(Vec::as_slice).collect();
        let raised: Vec<Vec<f64>> = base.iter().zip(&bumps).map(|(b, d)| b.iter().zip(d).map(|(x, y)| x + y).collect()).collect();
        let high: Vec<&[f64]> = raised.iter().map(Vec::as_slice).collect();
        let none = BTreeMap::new();
        let no_events = BTreeSet::new();
        let a = classify_threshold(&set_of(&low), &none, &no_events, threshold);
        let b = classify_threshold(&set_of(&high), &none, &no_events, threshold);
        for (ra, rb) in a.outcomes.iter().zip(&b.outcomes) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!(!x || *y);
            }
        }
    }

    #[test]
    fn rubin_is_permutation_invariant(
        pairs in proptest::collection::vec((-5.0f64..5.0, 0.0f64..2.0), 2..12),
        seed in 0u64..1000,
    ) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
        let (e1, v1) = split(&pairs);
        let (e2, v2) = split(&shuffled);
        let a = rubin_combine(&e1, &v1).unwrap();
        let b = rubin_combine(&e2, &v2).unwrap();
        prop_assert!((a.estimate - b.estimate).abs() < 1e-12);
        prop_assert!((a.total_variance - b.total_variance).abs() < 1e-10);
        prop_assert!((a.ci_low - b.ci_low).abs() < 1e-8);
    }
}

#[test]
fn rubin_examples() {
    let p = rubin_combine(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
    assert_eq!((p.estimate, p.within, p.between, p.total_variance), (1.0, 1.0, 2.0, 4.0));
    let df = (1.0 + 1.0 / 3.0f64).powi(2);
    assert!((p.df - df).abs() < 1e-12);
    let q = StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(0.975);
    assert!((p.ci_high - (1.0 + 2.0 * q)).abs() < 1e-6);
    assert!((p.ci_low - (1.0 - 2.0 * q)).abs() < 1e-6);

    let same = rubin_combine(&[3.0, 3.0, 3.0], &[0.5, 0.7, 0.9]).unwrap();
    assert_eq!(same.between, 0.0);
    assert!((same.total_variance - 0.7).abs() < 1e-15);
    assert!(same.df.is_infinite());
    assert!((same.ci_high - (3.0 + 1.959_963_984_540_054 * 0.7f64.sqrt())).abs() < 1e-9);

    let novar = rubin_combine(&[1.0, 2.0, 4.0], &[0.0; 3]).unwrap();
    let b = 7.0 / 3.0;
    assert!((novar.between - b).abs() < 1e-12);
    assert!((novar.total_variance - 4.0 / 3.0 * b).abs() < 1e-12);
    assert!((novar.df - 2.0).abs() < 1e-12);

    assert!(matches!(rubin_combine(&[1.0], &[1.0]), Err(Error::TooFewImputations(1))));
    assert!(rubin_combine(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn incidence_examples() {
    let inc = incidence_rate(&[10; 5], 100.0).unwrap();
    assert!((inc.rate - 0.1).abs() < 1e-15);
    assert_eq!(inc.log_rate.between, 0.0);
    assert!(inc.rates.iter().all(|&r| r == 0.1));
    let se = (0.1f64).sqrt();
    assert!((inc.ci_low - 0.1 * libm::exp(-1.959_963_984_540_054 * se)).abs() < 1e-9);

    let a = incidence_rate(&[12, 15, 9], 80.0).unwrap();
    let b = incidence_rate(&[12, 15, 9], 160.0).unwrap();
    assert!((b.rate - a.rate / 2.0).abs() < 1e-15);
    assert!((b.ci_high - a.ci_high / 2.0).abs() < 1e-12);

    assert!(matches!(incidence_rate(&[3, 0], 10.0), Err(Error::ZeroEvents)));
    assert!(matches!(incidence_rate(&[3, 4], 0.0), Err(Error::NonPositivePersonTime)));
}
