//! The six commands as library functions. Each writes its outputs and a
//! manifest into `out_dir` and returns what it wrote plus any warnings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use edp_core::cluster_summary::summarize;
use edp_core::predict::{classify_threshold, incidence_rate, PredictionTarget};
use edp_core::sampler::{run_model, Model};
use edp_core::simulate::generate_dataset;
use edp_core::splines::{SplineKind, SplineSpec, TimeBasis};
use edp_core::{ChainState, Error as CoreError, LongitudinalDataset, Priors, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::config::{self, KeyValues, SplineOptions};
use crate::error::{CliError, Context, Result};
use crate::formats;
use crate::manifest::Manifest;
use crate::study;

pub const OBSERVATIONS: &str = "observations.csv";
pub const COVARIATES: &str = "covariates.csv";
pub const SCHEMA: &str = "schema.txt";
pub const TRUTH: &str = "truth.csv";
pub const TRACE: &str = "trace.csv";
pub const PARTITION: &str = "partition.csv";
pub const STATE: &str = "state.json";
pub const RESOLVED_CONFIG: &str = "config.resolved.txt";
pub const IMPUTATIONS: &str = "imputations.csv";
pub const POOLED: &str = "pooled.json";
pub const LABELS: &str = "labels.csv";
pub const STUDY: &str = "study.csv";
pub const REPLICATES: &str = "replicates.csv";

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn load_config(path: Option<&Path>) -> Result<KeyValues> {
    match path {
        Some(p) => KeyValues::load(p),
        None => Ok(KeyValues::empty("<defaults>")),
    }
}

fn finish(manifest: &mut Manifest, out_dir: &Path, names: &[&str]) -> Result<Report> {
    for name in names {
        manifest.output(out_dir, name)?;
    }
    manifest.write(out_dir)?;
    let mut outputs: Vec<PathBuf> = names.iter().map(|n| out_dir.join(n)).collect();
    outputs.push(out_dir.join(crate::manifest::MANIFEST_FILE));
    Ok(Report {
        outputs,
        warnings: Vec::new(),
    })
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
}

/// Generates a synthetic dataset with its ground truth.
pub fn simulate(args: &SimulateArgs) -> Result<Report> {
    let mut kv = KeyValues::load(&args.config)?;
    if let Some(s) = args.seed {
        kv.set("seed", s);
    }
    let dgp = config::dgp_config(&kv)?;
    kv.finish()?;
    prepare_dir(&args.out_dir)?;
    let (ds, truth) = generate_dataset(&dgp).context(|| "simulate".into())?;
    let dir = &args.out_dir;
    formats::write_observations(&dir.join(OBSERVATIONS), &ds)?;
    formats::write_covariates(&dir.join(COVARIATES), &ds)?;
    formats::write_schema(&dir.join(SCHEMA), &ds.schema)?;
    formats::write_truth(&dir.join(TRUTH), &ds, &truth)?;
    let mut m = Manifest::new("simulate", Some(dgp.seed), &config::render_dgp(&dgp));
    m.input("config", &args.config)?;
    m.detail("n_subjects", ds.n());
    m.detail("n_observations", ds.n_obs());
    finish(&mut m, dir, &[OBSERVATIONS, COVARIATES, SCHEMA, TRUTH])
}

/// Everything a fit is determined by besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub sampler: SamplerConfig,
    pub priors: Priors,
    pub spline: SplineOptions,
    /// Times are divided by this at ingestion.
    pub time_scale: f64,
}

impl FitSettings {
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        let time_scale: f64 = kv.get_or("time_scale", 1.0)?;
        if !(time_scale.is_finite() && time_scale > 0.0) {
            return Err(kv.invalid("time_scale", "time_scale must be positive"));
        }
        Ok(Self {
            sampler: config::sampler_config(kv)?,
            priors: config::priors(kv)?,
            spline: config::spline_options(kv)?,
            time_scale,
        })
    }

    pub fn render(&self) -> Vec<(String, String)> {
        let mut out = config::render_sampler(&self.sampler);
        out.extend(config::render_priors(&self.priors));
        out.extend(config::render_spline(&self.spline));
        out.push(("time_scale".into(), self.time_scale.to_string()));
        out
    }
}

pub struct FitArgs {
    pub observations: PathBuf,
    pub covariates: PathBuf,
    pub schema: PathBuf,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub time_scale: Option<f64>,
}

fn build_model(ds: &LongitudinalDataset, s: &FitSettings) -> Result<(Model, SplineSpec)> {
    let spec = s.spline.spec(&ds.all_times()).context(|| "spline basis".into())?;
    let model = Model::new(ds, &spec, s.priors.clone()).context(|| "model".into())?;
    Ok((model, spec))
}

/// Runs one chain and writes its trace, memberships and final state.
pub fn fit(args: &FitArgs) -> Result<Report> {
    let mut kv = load_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        kv.set("seed", s);
    }
    if let Some(t) = args.time_scale {
        kv.set("time_scale", t);
    }
    let settings = FitSettings::from_config(&kv)?;
    kv.finish()?;
    let ds = formats::read_dataset(&args.observations, &args.covariates, &args.schema, settings.time_scale)?;
    let (model, spec) = build_model(&ds, &settings)?;
    let out = run_model(&model, &settings.sampler, &[]).context(|| "fit".into())?;
    let dir = &args.out_dir;
    prepare_dir(dir)?;
    let resolved = settings.render();
    std::fs::write(dir.join(RESOLVED_CONFIG), config::render(&resolved))
        .map_err(|e| CliError::io(&dir.join(RESOLVED_CONFIG), e))?;
    formats::write_trace(&dir.join(TRACE), &out.traces)?;
    let mut names = vec![RESOLVED_CONFIG, TRACE];
    if settings.sampler.record_partitions {
        formats::write_partition(&dir.join(PARTITION), &out.traces, model.ids())?;
        names.push(PARTITION);
    }
    formats::write_json(&dir.join(STATE), &out.state)?;
    names.push(STATE);
    let mut m = Manifest::new("fit", Some(settings.sampler.seed), &resolved);
    m.input("observations", &args.observations)?;
    m.input("covariates", &args.covariates)?;
    m.input("schema", &args.schema)?;
    if let Some(c) = &args.config {
        m.input("config", c)?;
    }
    m.detail("n_subjects", ds.n());
    m.detail("n_observations", ds.n_obs());
    m.detail("knots", &spec.knots);
    m.detail("final_n_theta", out.state.partition.n_theta());
    finish(&mut m, dir, &names)
}

pub struct ImputeArgs {
    pub fit_dir: PathBuf,
    pub targets: PathBuf,
    pub out_dir: PathBuf,
    pub n_imputations: Option<usize>,
    pub schedule: Option<Vec<usize>>,
}

fn fit_input(m: &Manifest, role: &str) -> Result<PathBuf> {
    let d = m
        .input_path(role)
        .ok_or_else(|| CliError::data("fit manifest", format!("no `{role}` input recorded")))?;
    let path = PathBuf::from(&d.path);
    if crate::manifest::sha256_file(&path)? != d.sha256 {
        return Err(CliError::data(d.path.clone(), "file changed since the fit was run"));
    }
    Ok(path)
}

fn extrapolation_warnings(spec: &SplineSpec, ds: &LongitudinalDataset, targets: &[PredictionTarget]) -> Result<Vec<String>> {
    let times = ds.all_times();
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let basis = TimeBasis::new(spec).context(|| "spline basis".into())?;
    let mut row = vec![0.0; basis.ncols()];
    let mut out = Vec::new();
    for t in targets {
        let clamped = basis.eval_row(t.target_time, &mut row);
        if clamped {
            out.push(format!(
                "target time {} for `{}` is outside the B-spline boundary; the basis is clamped",
                t.target_time, t.subject_id
            ));
        } else if spec.kind != SplineKind::None && (t.target_time < lo || t.target_time > hi) {
            out.push(format!(
                "target time {} for `{}` is outside the observed range [{lo}, {hi}]; the basis extrapolates",
                t.target_time, t.subject_id
            ));
        }
    }
    Ok(out)
}

/// Reruns the recorded fit with prediction targets and writes the draws
/// taken at the scheduled iterations.
pub fn impute(args: &ImputeArgs) -> Result<Report> {
    let fm = Manifest::read(&args.fit_dir)?;
    if fm.command != "fit" {
        return Err(CliError::data(args.fit_dir.display().to_string(), "not a fit output directory"));
    }
    let mut kv = KeyValues::load(&args.fit_dir.join(RESOLVED_CONFIG))?;
    if args.n_imputations.is_some() && args.schedule.is_some() {
        return Err(CliError::config("arguments", "give either --n-imputations or --schedule"));
    }
    if let Some(m) = args.n_imputations {
        kv.remove("prediction_schedule");
        kv.set("n_imputations", m);
    }
    if let Some(s) = &args.schedule {
        kv.remove("prediction_schedule");
        kv.set("prediction_schedule", s.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
    }
    let mut settings = FitSettings::from_config(&kv)?;
    kv.finish()?;
    if settings.sampler.prediction_schedule.is_empty() {
        return Err(CliError::config(
            "arguments",
            "no prediction schedule: pass --n-imputations or --schedule, or set one in the fit config",
        ));
    }
    settings.sampler.record_partitions = false;
    let obs = fit_input(&fm, "observations")?;
    let cov = fit_input(&fm, "covariates")?;
    let schema = fit_input(&fm, "schema")?;
    let ds = formats::read_dataset(&obs, &cov, &schema, settings.time_scale)?;
    let (model, spec) = build_model(&ds, &settings)?;
    let original = formats::read_targets(&args.targets)?;
    let scaled: Vec<PredictionTarget> = original
        .iter()
        .map(|t| PredictionTarget::new(t.subject_id.clone(), t.target_time / settings.time_scale))
        .collect();
    let warnings = extrapolation_warnings(&spec, &ds, &scaled)?;
    let out = run_model(&model, &settings.sampler, &scaled).context(|| "impute".into())?;
    let saved: ChainState = formats::read_json(&args.fit_dir.join(STATE))?;
    if saved != out.state {
        return Err(CliError::data(
            args.fit_dir.join(STATE).display().to_string(),
            "rerunning the fit did not reproduce its final state",
        ));
    }
    let mut set = out.imputations;
    set.targets = original;
    let dir = &args.out_dir;
    prepare_dir(dir)?;
    formats::write_imputations(&dir.join(IMPUTATIONS), &set)?;
    let routes: BTreeMap<String, String> = scaled
        .iter()
        .map(|t| {
            let mode = t.mode(&model).map(|m| format!("{m:?}")).unwrap_or_default();
            (t.subject_id.clone(), mode)
        })
        .collect();
    let mut m = Manifest::new("impute", Some(settings.sampler.seed), &settings.render());
    m.input("fit_manifest", &args.fit_dir.join(crate::manifest::MANIFEST_FILE))?;
    m.input("targets", &args.targets)?;
    m.detail("schedule", &settings.sampler.prediction_schedule);
    m.detail("routes", routes);
    m.detail("warnings", &warnings);
    let mut report = finish(&mut m, dir, &[IMPUTATIONS])?;
    report.warnings = warnings;
    Ok(report)
}

/// Pooled incidence written by `combine`. The interval is on the rate
/// scale; `total_variance`, `within` and `between` refer to the log rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledIncidence {
    pub estimate: f64,
    pub total_variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_imputations: usize,
    pub log_estimate: f64,
    pub within: f64,
    pub between: f64,
    /// Infinite when the imputations agree; stored as `null`.
    #[serde(with = "infinite_as_null")]
    pub df: f64,
    pub event_counts: Vec<usize>,
    pub person_time: f64,
    pub threshold: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub struct CombineArgs {
    pub imputations: PathBuf,
    pub cohort: PathBuf,
    pub observations: Option<PathBuf>,
    pub threshold: f64,
    pub person_time: Option<f64>,
    pub out_dir: PathBuf,
}

/// Threshold classification per imputation, then incidence pooled across
/// imputations.
pub fn combine(args: &CombineArgs) -> Result<Report> {
    if !args.threshold.is_finite() {
        return Err(CliError::config("--threshold", "threshold must be finite"));
    }
    let set = formats::read_imputations(&args.imputations)?;
    if set.n_imputations() < 2 {
        return Err(CliError::core(
            args.imputations.display().to_string(),
            CoreError::TooFewImputations(set.n_imputations()),
        ));
    }
    let cohort = formats::read_cohort(&args.cohort)?;
    let members: std::collections::BTreeSet<&str> = cohort.subjects.iter().map(String::as_str).collect();
    for t in &set.targets {
        if !members.contains(t.subject_id.as_str()) {
            return Err(CliError::data(
                args.imputations.display().to_string(),
                format!("subject `{}` is not in {}", t.subject_id, args.cohort.display()),
            ));
        }
    }
    let mut observed: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if let Some(p) = &args.observations {
        for (id, _, y, line) in formats::read_observations(p)? {
            if !members.contains(id.as_str()) {
                return Err(CliError::data(
                    format!("{}:{line}", p.display()),
                    format!("subject `{id}` is not in {}", args.cohort.display()),
                ));
            }
            observed.entry(id).or_default().push(y);
        }
    }
    let person_time = args.person_time.unwrap_or(cohort.person_time);
    let table = classify_threshold(&set, &observed, &cohort.events, args.threshold);
    let counts = table.event_counts();
    let inc = incidence_rate(&counts, person_time).context(|| "incidence".into())?;
    let pooled = PooledIncidence {
        estimate: inc.rate,
        total_variance: inc.log_rate.total_variance,
        ci_low: inc.ci_low,
        ci_high: inc.ci_high,
        n_imputations: inc.log_rate.n_imputations,
        log_estimate: inc.log_rate.estimate,
        within: inc.log_rate.within,
        between: inc.log_rate.between,
        df: inc.log_rate.df,
        event_counts: counts,
        person_time,
        threshold: args.threshold,
    };
    let dir = &args.out_dir;
    prepare_dir(dir)?;
    formats::write_json(&dir.join(POOLED), &pooled)?;
    let settings = vec![
        ("threshold".to_string(), args.threshold.to_string()),
        ("person_time".to_string(), person_time.to_string()),
    ];
    let mut m = Manifest::new("combine", None, &settings);
    m.input("imputations", &args.imputations)?;
    m.input("cohort", &args.cohort)?;
    if let Some(p) = &args.observations {
        m.input("observations", p)?;
    }
    finish(&mut m, dir, &[POOLED])
}

pub struct SummarizeArgs {
    pub partition: PathBuf,
    pub trace: PathBuf,
    pub out_dir: PathBuf,
}

/// Consensus θ-clusters from the recorded memberships.
pub fn summarize_clusters(args: &SummarizeArgs) -> Result<Report> {
    let table = formats::read_partition(&args.partition)?;
    let trace = formats::read_trace(&args.trace)?;
    if table.iterations.is_empty() || trace.is_empty() {
        return Err(CliError::core("summarize-clusters", CoreError::EmptyTrace));
    }
    let trace_its: Vec<usize> = trace.iter().map(|r| r.iteration).collect();
    if trace_its != table.iterations {
        return Err(CliError::core(
            "summarize-clusters",
            CoreError::LengthMismatch {
                subject: String::new(),
                detail: format!(
                    "{} has {} iterations, {} has {}",
                    args.partition.display(),
                    table.iterations.len(),
                    args.trace.display(),
                    trace_its.len()
                ),
            },
        ));
    }
    let n_theta: Vec<usize> = trace.iter().map(|r| r.n_theta).collect();
    let summary = summarize(&table.theta, &n_theta).context(|| "summarize-clusters".into())?;
    let dir = &args.out_dir;
    prepare_dir(dir)?;
    formats::write_labels(&dir.join(LABELS), &table.ids, &summary.labels)?;
    let mut m = Manifest::new("summarize-clusters", None, &[]);
    m.input("partition", &args.partition)?;
    m.input("trace", &args.trace)?;
    m.detail("k", summary.k);
    m.detail("n_draws", table.iterations.len());
    finish(&mut m, dir, &[LABELS])
}

pub struct StudyArgs {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// The method comparison over simulated scenarios.
pub fn run_study(args: &StudyArgs) -> Result<Report> {
    let mut kv = KeyValues::load(&args.config)?;
    if let Some(s) = args.seed {
        kv.set("seed", s);
    }
    let cfg = config::study_config(&kv)?;
    kv.finish()?;
    let (rows, results) = study::run_parallel(&cfg, args.threads)?;
    let dir = &args.out_dir;
    prepare_dir(dir)?;
    let names: Vec<String> = cfg.scenarios.iter().map(|s| s.name.clone()).collect();
    formats::write_study(&dir.join(STUDY), &rows)?;
    formats::write_replicates(&dir.join(REPLICATES), &names, &results)?;
    let mut m = Manifest::new("study", Some(cfg.seed), &config::render_study(&cfg));
    m.input("config", &args.config)?;
    m.detail("n_fits", results.len());
    finish(&mut m, dir, &[STUDY, REPLICATES])
}
