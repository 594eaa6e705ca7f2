//! Readers and writers for every file the commands exchange.
//!
//! Readers reject malformed rows with `file:line` locations instead of
//! coercing them. Writers print floats in shortest round-trip form so
//! identical inputs give byte-identical files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use edp_core::predict::{ImputationSet, PredictionTarget};
use edp_core::sampler::TraceRecord;
use edp_core::simulate::{ReplicateResult, SimulatedTruth, StudyRow};
use edp_core::{validate_dataset, CovariateKind, CovariateSchema, LongitudinalDataset, SubjectRecord};
use serde::Serialize;

use crate::error::{CliError, Context, Result};

fn loc(path: &Path, line: u64) -> String {
    format!("{}:{line}", path.display())
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => CliError::data(loc(path, line), format!("{kind:?}")),
    }
}

/// Data rows of a CSV with a fixed header, paired with their line numbers.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_rows_from(file, path, |found| {
        if found != header {
            Err(format!("expected header `{}`, found `{}`", header.join(","), found.join(",")))
        } else {
            Ok(())
        }
    })
}

fn read_rows_from(
    input: impl std::io::Read,
    path: &Path,
    check: impl FnOnce(&[&str]) -> std::result::Result<(), String>,
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let found_ref: Vec<&str> = found.iter().map(String::as_str).collect();
    check(&found_ref).map_err(|m| CliError::data(loc(path, 1), m))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field<T: FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse()
        .map_err(|e| CliError::data(loc(path, line), format!("column `{name}`: cannot parse `{raw}`: {e}")))
}

fn finite(path: &Path, line: u64, name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::data(loc(path, line), format!("column `{name}` is not finite")))
    }
}

fn subject_id(path: &Path, line: u64, rec: &csv::StringRecord) -> Result<String> {
    subject_id_at(path, line, rec, 0)
}

fn subject_id_at(path: &Path, line: u64, rec: &csv::StringRecord, col: usize) -> Result<String> {
    let id = rec.get(col).unwrap_or("").trim();
    if id.is_empty() {
        return Err(CliError::data(loc(path, line), "empty subject_id"));
    }
    Ok(id.to_string())
}

struct Out {
    path: std::path::PathBuf,
    w: BufWriter<File>,
}

impl Out {
    fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            w: BufWriter::new(f),
        })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        self.w
            .write_all(s.as_bytes())
            .and_then(|_| self.w.write_all(b"\n"))
            .map_err(|e| CliError::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

fn check_id(path: &Path, id: &str) -> Result<()> {
    if id.contains([',', '"', '\n', '\r']) {
        return Err(CliError::data(path.display().to_string(), format!("subject id `{id}` cannot be written to CSV")));
    }
    Ok(())
}

/// Schema lines `<name>:binary|continuous`; `#` comments and blank lines
/// are skipped.
pub fn read_schema(path: &Path) -> Result<CovariateSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut columns = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let here = loc(path, i as u64 + 1);
        let Some((name, kind)) = content.split_once(':') else {
            return Err(CliError::data(here, format!("expected `name:binary|continuous`, found `{content}`")));
        };
        let kind = match kind.trim() {
            "binary" => CovariateKind::Binary,
            "continuous" => CovariateKind::Continuous,
            other => return Err(CliError::data(here, format!("unknown covariate kind `{other}`"))),
        };
        let name = name.trim();
        if name.is_empty() || name == "subject_id" {
            return Err(CliError::data(here, format!("invalid column name `{name}`")));
        }
        columns.push((name.to_string(), kind));
    }
    CovariateSchema::new(columns).context(|| path.display().to_string())
}

pub fn write_schema(path: &Path, schema: &CovariateSchema) -> Result<()> {
    let mut out = Out::create(path)?;
    for (name, kind) in schema.names().iter().zip(schema.kinds()) {
        let k = match kind {
            CovariateKind::Binary => "binary",
            CovariateKind::Continuous => "continuous",
        };
        out.line(&format!("{name}:{k}"))?;
    }
    out.finish()
}

/// Long-format `subject_id,time,y` rows as `(id, time, y, line)`.
pub fn read_observations(path: &Path) -> Result<Vec<(String, f64, f64, u64)>> {
    read_rows(path, &["subject_id", "time", "y"])?
        .into_iter()
        .map(|(line, rec)| {
            let id = subject_id(path, line, &rec)?;
            let t = finite(path, line, "time", field(path, line, &rec, 1, "time")?)?;
            let y = finite(path, line, "y", field(path, line, &rec, 2, "y")?)?;
            Ok((id, t, y, line))
        })
        .collect()
}

/// Wide-format covariates whose header must list the schema columns in order.
pub fn read_covariates(path: &Path, schema: &CovariateSchema) -> Result<Vec<(String, Vec<f64>, u64)>> {
    let mut header = vec!["subject_id"];
    header.extend(schema.names().iter().map(String::as_str));
    read_rows(path, &header)?
        .into_iter()
        .map(|(line, rec)| {
            let id = subject_id(path, line, &rec)?;
            let x = (0..schema.p())
                .map(|j| {
                    let name = &schema.names()[j];
                    let v: f64 = field(path, line, &rec, j + 1, name)?;
                    finite(path, line, name, v)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((id, x, line))
        })
        .collect()
}

/// Joins the three input files into a validated dataset. Subjects follow
/// the covariates file order; times are divided by `time_scale` and sorted
/// within each subject.
pub fn read_dataset(observations: &Path, covariates: &Path, schema: &Path, time_scale: f64) -> Result<LongitudinalDataset> {
    let schema = read_schema(schema)?;
    let covs = read_covariates(covariates, &schema)?;
    let obs = read_observations(observations)?;
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut subjects = Vec::with_capacity(covs.len());
    for (id, x, line) in &covs {
        if index.insert(id.as_str(), subjects.len()).is_some() {
            return Err(CliError::data(loc(covariates, *line), format!("duplicate subject `{id}`")));
        }
        subjects.push(SubjectRecord {
            id: id.clone(),
            x: x.clone(),
            t: Vec::new(),
            y: Vec::new(),
        });
    }
    let mut pairs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); subjects.len()];
    for (id, t, y, line) in &obs {
        let Some(&i) = index.get(id.as_str()) else {
            return Err(CliError::data(
                loc(observations, *line),
                format!("subject `{id}` has no row in {}", covariates.display()),
            ));
        };
        pairs[i].push((t / time_scale, *y));
    }
    for (s, mut p) in subjects.iter_mut().zip(pairs) {
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        s.t = p.iter().map(|v| v.0).collect();
        s.y = p.iter().map(|v| v.1).collect();
    }
    validate_dataset(LongitudinalDataset { schema, subjects }).context(|| "dataset".to_string())
}

pub fn write_observations(path: &Path, ds: &LongitudinalDataset) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("subject_id,time,y")?;
    for s in &ds.subjects {
        check_id(path, &s.id)?;
        for (t, y) in s.t.iter().zip(&s.y) {
            out.line(&format!("{},{t},{y}", s.id))?;
        }
    }
    out.finish()
}

pub fn write_covariates(path: &Path, ds: &LongitudinalDataset) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(&format!("subject_id,{}", ds.schema.names().join(",")))?;
    for s in &ds.subjects {
        check_id(path, &s.id)?;
        let xs: Vec<String> = s.x.iter().map(f64::to_string).collect();
        out.line(&format!("{},{}", s.id, xs.join(",")))?;
    }
    out.finish()
}

/// True cluster memberships (1-based), intercepts and noise-free values at
/// the evaluation time.
pub fn write_truth(path: &Path, ds: &LongitudinalDataset, truth: &SimulatedTruth) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("subject_id,theta_cluster,psi_cluster,u,t_star,y_star")?;
    for (i, s) in ds.subjects.iter().enumerate() {
        out.line(&format!(
            "{},{},{},{},{},{}",
            s.id,
            truth.theta[i] + 1,
            truth.psi[i] + 1,
            truth.u[i],
            truth.t_star,
            truth.y_star[i]
        ))?;
    }
    out.finish()
}

/// `(subject_id, theta_cluster)` from a truth file, labels 1-based.
pub fn read_truth_labels(path: &Path) -> Result<Vec<(String, usize)>> {
    read_rows(path, &["subject_id", "theta_cluster", "psi_cluster", "u", "t_star", "y_star"])?
        .into_iter()
        .map(|(line, rec)| Ok((subject_id(path, line, &rec)?, field(path, line, &rec, 1, "theta_cluster")?)))
        .collect()
}

/// One row of the trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub n_theta: usize,
    pub alpha_theta: f64,
    pub alpha_psi: f64,
    pub sigma2_u: f64,
    pub loglik: f64,
}

const TRACE_HEADER: [&str; 6] = ["iteration", "n_theta", "alpha_theta", "alpha_psi", "sigma2_u", "loglik"];

pub fn write_trace(path: &Path, traces: &[TraceRecord]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line(&TRACE_HEADER.join(","))?;
    for r in traces {
        out.line(&format!(
            "{},{},{},{},{},{}",
            r.iteration, r.n_theta_clusters, r.alpha_theta, r.alpha_psi, r.sigma2_u, r.log_likelihood
        ))?;
    }
    out.finish()
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    read_rows(path, &TRACE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(TraceRow {
                iteration: field(path, line, &rec, 0, "iteration")?,
                n_theta: field(path, line, &rec, 1, "n_theta")?,
                alpha_theta: field(path, line, &rec, 2, "alpha_theta")?,
                alpha_psi: field(path, line, &rec, 3, "alpha_psi")?,
                sigma2_u: field(path, line, &rec, 4, "sigma2_u")?,
                loglik: field(path, line, &rec, 5, "loglik")?,
            })
        })
        .collect()
}

/// Per-iteration memberships, labels written 1-based.
pub fn write_partition(path: &Path, traces: &[TraceRecord], ids: &[String]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("iteration,subject_id,s_y,s_x")?;
    for r in traces {
        if r.partition.is_empty() {
            continue;
        }
        for (id, &(k, j)) in ids.iter().zip(&r.partition) {
            check_id(path, id)?;
            out.line(&format!("{},{id},{},{}", r.iteration, k + 1, j + 1))?;
        }
    }
    out.finish()
}

/// θ-memberships per retained iteration, subjects in first-iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    pub ids: Vec<String>,
    pub iterations: Vec<usize>,
    /// `theta[s][i]`, 0-based labels.
    pub theta: Vec<Vec<usize>>,
}

pub fn read_partition(path: &Path) -> Result<PartitionTable> {
    let rows = read_rows(path, &["iteration", "subject_id", "s_y", "s_x"])?;
    let mut iterations: Vec<usize> = Vec::new();
    let mut blocks: Vec<Vec<(String, usize, u64)>> = Vec::new();
    for (line, rec) in rows {
        let it: usize = field(path, line, &rec, 0, "iteration")?;
        let id = subject_id_at(path, line, &rec, 1)?;
        let sy: usize = field(path, line, &rec, 2, "s_y")?;
        let _sx: usize = field(path, line, &rec, 3, "s_x")?;
        if sy == 0 {
            return Err(CliError::data(loc(path, line), "labels are 1-based"));
        }
        if iterations.last() != Some(&it) {
            if iterations.contains(&it) {
                return Err(CliError::data(loc(path, line), format!("iteration {it} is not contiguous")));
            }
            iterations.push(it);
            blocks.push(Vec::new());
        }
        blocks.last_mut().expect("pushed above").push((id, sy - 1, line));
    }
    let Some(first) = blocks.first() else {
        return Ok(PartitionTable {
            ids: Vec::new(),
            iterations,
            theta: Vec::new(),
        });
    };
    let ids: Vec<String> = first.iter().map(|r| r.0.clone()).collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index.len() != ids.len() {
        return Err(CliError::data(loc(path, first[0].2), "duplicate subject within an iteration"));
    }
    let mut theta = Vec::with_capacity(blocks.len());
    for (it, block) in iterations.iter().zip(&blocks) {
        if block.len() != ids.len() {
            return Err(CliError::core(
                format!("{}: iteration {it}", path.display()),
                edp_core::Error::LengthMismatch {
                    subject: String::new(),
                    detail: format!("{} subjects, expected {}", block.len(), ids.len()),
                },
            ));
        }
        let mut labels = vec![usize::MAX; ids.len()];
        for (id, k, line) in block {
            let Some(&s) = index.get(id.as_str()) else {
                return Err(CliError::data(loc(path, *line), format!("subject `{id}` missing from the first iteration")));
            };
            if labels[s] != usize::MAX {
                return Err(CliError::data(loc(path, *line), format!("subject `{id}` repeated")));
            }
            labels[s] = *k;
        }
        theta.push(labels);
    }
    Ok(PartitionTable { ids, iterations, theta })
}

/// Rows `imputation_index,subject_id,target_time,value` with 1-based
/// imputation indices, grouped by imputation.
pub fn write_imputations(path: &Path, set: &ImputationSet) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("imputation_index,subject_id,target_time,value")?;
    for m in 0..set.n_imputations() {
        for (t, d) in set.targets.iter().zip(&set.draws) {
            check_id(path, &t.subject_id)?;
            out.line(&format!("{},{},{},{}", m + 1, t.subject_id, t.target_time, d[m]))?;
        }
    }
    out.finish()
}

/// Reads an imputation file; every (subject, time) cell must appear once in
/// every imputation `1..=M`.
pub fn read_imputations(path: &Path) -> Result<ImputationSet> {
    let rows = read_rows(path, &["imputation_index", "subject_id", "target_time", "value"])?;
    let mut cells: Vec<PredictionTarget> = Vec::new();
    let mut cell_index: BTreeMap<(String, u64), usize> = BTreeMap::new();
    let mut values: Vec<BTreeMap<usize, f64>> = Vec::new();
    let mut max_m = 0;
    for (line, rec) in &rows {
        let m: usize = field(path, *line, rec, 0, "imputation_index")?;
        let id = subject_id_at(path, *line, rec, 1)?;
        let t = finite(path, *line, "target_time", field(path, *line, rec, 2, "target_time")?)?;
        let v = finite(path, *line, "value", field(path, *line, rec, 3, "value")?)?;
        if m == 0 {
            return Err(CliError::data(loc(path, *line), "imputation_index is 1-based"));
        }
        max_m = max_m.max(m);
        let key = (id.clone(), t.to_bits());
        let c = *cell_index.entry(key).or_insert_with(|| {
            cells.push(PredictionTarget::new(id.clone(), t));
            values.push(BTreeMap::new());
            cells.len() - 1
        });
        if values[c].insert(m, v).is_some() {
            return Err(CliError::data(loc(path, *line), format!("duplicate value for `{id}` at {t} in imputation {m}")));
        }
    }
    let mut set = ImputationSet::new(cells, (1..=max_m).collect());
    for (c, vals) in values.into_iter().enumerate() {
        if vals.len() != max_m {
            let t = &set.targets[c];
            return Err(CliError::data(
                path.display().to_string(),
                format!("`{}` at {} has {} of {max_m} imputations", t.subject_id, t.target_time, vals.len()),
            ));
        }
        set.draws[c] = vals.into_values().collect();
    }
    Ok(set)
}

/// Prediction targets `subject_id,target_time`.
pub fn read_targets(path: &Path) -> Result<Vec<PredictionTarget>> {
    read_rows(path, &["subject_id", "target_time"])?
        .into_iter()
        .map(|(line, rec)| {
            let id = subject_id(path, line, &rec)?;
            let t = finite(path, line, "target_time", field(path, line, &rec, 1, "target_time")?)?;
            Ok(PredictionTarget::new(id, t))
        })
        .collect()
}

pub fn write_targets(path: &Path, targets: &[PredictionTarget]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("subject_id,target_time")?;
    for t in targets {
        check_id(path, &t.subject_id)?;
        out.line(&format!("{},{}", t.subject_id, t.target_time))?;
    }
    out.finish()
}

/// The cohort for incidence: recorded events and person-time per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub subjects: Vec<String>,
    pub events: BTreeSet<String>,
    pub person_time: f64,
}

/// Rows `subject_id,event,person_time` with `event` in {0, 1}.
pub fn read_cohort(path: &Path) -> Result<Cohort> {
    let mut cohort = Cohort {
        subjects: Vec::new(),
        events: BTreeSet::new(),
        person_time: 0.0,
    };
    let mut seen = BTreeSet::new();
    for (line, rec) in read_rows(path, &["subject_id", "event", "person_time"])? {
        let id = subject_id(path, line, &rec)?;
        let event: u8 = field(path, line, &rec, 1, "event")?;
        let pt = finite(path, line, "person_time", field(path, line, &rec, 2, "person_time")?)?;
        if event > 1 {
            return Err(CliError::data(loc(path, line), "event must be 0 or 1"));
        }
        if pt < 0.0 {
            return Err(CliError::data(loc(path, line), "person_time must be non-negative"));
        }
        if !seen.insert(id.clone()) {
            return Err(CliError::data(loc(path, line), format!("duplicate subject `{id}`")));
        }
        if event == 1 {
            cohort.events.insert(id.clone());
        }
        cohort.person_time += pt;
        cohort.subjects.push(id);
    }
    Ok(cohort)
}

pub fn write_cohort(path: &Path, rows: &[(String, bool, f64)]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("subject_id,event,person_time")?;
    for (id, e, pt) in rows {
        check_id(path, id)?;
        out.line(&format!("{id},{},{pt}", u8::from(*e)))?;
    }
    out.finish()
}

/// `subject_id,cluster_label` with 1-based labels.
/// `labels` are already 1-based, as returned by the consensus clustering.
pub fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("subject_id,cluster_label")?;
    for (id, l) in ids.iter().zip(labels) {
        check_id(path, id)?;
        out.line(&format!("{id},{l}"))?;
    }
    out.finish()
}

pub fn read_labels(path: &Path) -> Result<Vec<(String, usize)>> {
    read_rows(path, &["subject_id", "cluster_label"])?
        .into_iter()
        .map(|(line, rec)| Ok((subject_id(path, line, &rec)?, field(path, line, &rec, 1, "cluster_label")?)))
        .collect()
}

pub fn write_study(path: &Path, rows: &[StudyRow]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("scenario,method,l1_mean,l2_mean,n_datasets,n,seed")?;
    for r in rows {
        out.line(&format!(
            "{},{},{},{},{},{},{}",
            r.scenario, r.method, r.l1_mean, r.l2_mean, r.n_datasets, r.n, r.seed
        ))?;
    }
    out.finish()
}

pub fn write_replicates(path: &Path, names: &[String], results: &[ReplicateResult]) -> Result<()> {
    let mut out = Out::create(path)?;
    out.line("scenario,replicate,method,data_seed,chain_seed,l1,l2")?;
    for r in results {
        out.line(&format!(
            "{},{},{},{},{},{},{}",
            names[r.scenario],
            r.replicate + 1,
            r.mode,
            r.data_seed,
            r.chain_seed,
            r.l1,
            r.l2
        ))?;
    }
    out.finish()
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(path.display().to_string(), e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(loc(path, e.line() as u64), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        (
            write(dir, "obs.csv", "subject_id,time,y\nb,0.5,1.5\na,0.9,2.0\na,0.1,1.0\n"),
            write(dir, "cov.csv", "subject_id,sex,bmi\na,1,0.3\nb,0,-1.2\nc,1,0.0\n"),
            write(dir, "schema.txt", "# columns\nsex:binary\nbmi:continuous\n"),
        )
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (o, c, s) = fixture(dir.path());
        let ds = read_dataset(&o, &c, &s, 1.0).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.subjects[0].t, vec![0.1, 0.9]);
        assert_eq!(ds.subjects[0].y, vec![1.0, 2.0]);
        assert_eq!(ds.subjects[2].n_obs(), 0);
        let o2 = dir.path().join("o2.csv");
        let c2 = dir.path().join("c2.csv");
        let s2 = dir.path().join("s2.txt");
        write_observations(&o2, &ds).unwrap();
        write_covariates(&c2, &ds).unwrap();
        write_schema(&s2, &ds.schema).unwrap();
        assert_eq!(read_dataset(&o2, &c2, &s2, 1.0).unwrap(), ds);

        let scaled = read_dataset(&o, &c, &s, 2.0).unwrap();
        assert_eq!(scaled.subjects[1].t, vec![0.25]);
    }

    #[test]
    fn malformed_rows_are_rejected_with_locations() {
        let dir = tempfile::tempdir().unwrap();
        let (o, c, s) = fixture(dir.path());
        let bad = write(dir.path(), "bad.csv", "subject_id,time,y\na,0.1,1\na,zero,2\n");
        let e = read_dataset(&bad, &c, &s, 1.0).unwrap_err();
        assert!(e.to_string().contains("bad.csv:3"), "{e}");
        assert_eq!(e.exit_code(), 3);

        let orphan = write(dir.path(), "orphan.csv", "subject_id,time,y\nzz,0.1,1\n");
        assert!(read_dataset(&orphan, &c, &s, 1.0).unwrap_err().to_string().contains("orphan.csv:2"));

        let short = write(dir.path(), "short.csv", "subject_id,time,y\na,0.1\n");
        assert!(read_dataset(&short, &c, &s, 1.0).unwrap_err().to_string().contains("short.csv:2"));

        let header = write(dir.path(), "hdr.csv", "subject_id,sex,weight\na,1,0.3\n");
        assert!(read_dataset(&o, &header, &s, 1.0).unwrap_err().to_string().contains("hdr.csv:1"));

        let nonbinary = write(dir.path(), "nb.csv", "subject_id,sex,bmi\na,2,0.3\nb,0,0\n");
        assert_eq!(read_dataset(&o, &nonbinary, &s, 1.0).unwrap_err().exit_code(), 3);

        let schema = write(dir.path(), "sch.txt", "sex:binary\nbmi:ordinal\n");
        assert!(read_schema(&schema).unwrap_err().to_string().contains("sch.txt:2"));

        let nan = write(dir.path(), "nan.csv", "subject_id,time,y\na,0.1,NaN\n");
        assert!(read_observations(&nan).unwrap_err().to_string().contains("nan.csv:2"));

        let missing = dir.path().join("nope.csv");
        assert!(matches!(read_observations(&missing), Err(CliError::Io { .. })));
    }

    #[test]
    fn imputations_round_trip_and_completeness() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = ImputationSet::new(
            vec![PredictionTarget::new("a", 365.0), PredictionTarget::new("b", 365.0)],
            vec![10, 20, 30],
        );
        set.draws = vec![vec![1.0, 2.5, -0.125], vec![7.0, 6.0, 1e-300]];
        let p = dir.path().join("imp.csv");
        write_imputations(&p, &set).unwrap();
        let back = read_imputations(&p).unwrap();
        assert_eq!(back.targets, set.targets);
        assert_eq!(back.draws, set.draws);
        assert_eq!(back.schedule, vec![1, 2, 3]);
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 7);

        let gap = write(dir.path(), "gap.csv", "imputation_index,subject_id,target_time,value\n1,a,1,0\n2,a,1,0\n1,b,1,0\n");
        assert!(read_imputations(&gap).unwrap_err().to_string().contains("1 of 2"));
        let dup = write(dir.path(), "dup.csv", "imputation_index,subject_id,target_time,value\n1,a,1,0\n1,a,1,3\n");
        assert!(read_imputations(&dup).unwrap_err().to_string().contains("dup.csv:3"));
    }

    #[test]
    fn partition_table_checks_consistency() {
        let dir = tempfile::tempdir().unwrap();
        let ok = write(
            dir.path(),
            "p.csv",
            "iteration,subject_id,s_y,s_x\n5,a,1,1\n5,b,2,1\n6,b,1,1\n6,a,1,2\n",
        );
        let t = read_partition(&ok).unwrap();
        assert_eq!(t.ids, vec!["a", "b"]);
        assert_eq!(t.iterations, vec![5, 6]);
        assert_eq!(t.theta, vec![vec![0, 1], vec![0, 0]]);

        let short = write(dir.path(), "q.csv", "iteration,subject_id,s_y,s_x\n5,a,1,1\n5,b,2,1\n6,a,1,1\n");
        let e = read_partition(&short).unwrap_err();
        assert!(matches!(e.core_error(), Some(edp_core::Error::LengthMismatch { .. })));
        let zero = write(dir.path(), "z.csv", "iteration,subject_id,s_y,s_x\n5,a,0,1\n");
        assert!(read_partition(&zero).is_err());
    }

    #[test]
    fn cohort_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_cohort(&p, &[("a".into(), true, 1.5), ("b".into(), false, 2.0)]).unwrap();
        let c = read_cohort(&p).unwrap();
        assert_eq!(c.person_time, 3.5);
        assert!(c.events.contains("a") && !c.events.contains("b"));
        let bad = write(dir.path(), "e.csv", "subject_id,event,person_time\na,2,1\n");
        assert!(read_cohort(&bad).unwrap_err().to_string().contains("e.csv:2"));

        let l = dir.path().join("l.csv");
        write_labels(&l, &["a".into(), "b".into()], &[1, 3]).unwrap();
        assert_eq!(read_labels(&l).unwrap(), vec![("a".into(), 1), ("b".into(), 3)]);
        assert!(write_labels(&l, &["a,b".into()], &[1]).is_err());
    }
}
