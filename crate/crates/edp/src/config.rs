//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key must be consumed by the command reading the file; leftovers
//! are reported with their line number.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use edp_core::simulate::{DgpConfig, Scenario, StudyConfig, Structure};
use edp_core::splines::{KnotPlacement, SplineKind, SplineSpec, DEFAULT_DEGREE, DEFAULT_THIN_PLATE_KNOTS};
use edp_core::{evenly_spaced_schedule, Mode, Priors, SamplerConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// 0 for values set programmatically.
    line: usize,
}

#[derive(Debug, Clone)]
pub struct KeyValues {
    source: String,
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn empty(source: &str) -> Self {
        Self {
            source: source.to_string(),
            entries: BTreeMap::new(),
            used: RefCell::new(BTreeSet::new()),
        }
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut kv = Self::empty(source);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let loc = format!("{source}:{line}");
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::config(loc, format!("expected `key = value`, found `{content}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(CliError::config(loc, format!("invalid key `{key}`")));
            }
            if value.is_empty() {
                return Err(CliError::config(loc, format!("`{key}` has no value")));
            }
            if let Some(prev) = kv.entries.get(key) {
                return Err(CliError::config(
                    loc,
                    format!("`{key}` already set on line {}", prev.line),
                ));
            }
            kv.entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(kv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Sets or replaces a value, as for command-line overrides.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn location(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some(e) if e.line > 0 => format!("{}:{}", self.source, e.line),
            _ => format!("{} (`{key}`)", self.source),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                CliError::config(self.location(key), format!("cannot parse `{key} = {v}`: {e}"))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|item| {
                item.trim().parse().map_err(|e| {
                    CliError::config(self.location(key), format!("cannot parse `{key}` item `{}`: {e}", item.trim()))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn invalid(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::config(self.location(key), message)
    }

    /// Fails on the first key no reader asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let mut unknown: Vec<(&String, &Entry)> =
            self.entries.iter().filter(|(k, _)| !used.contains(*k)).collect();
        unknown.sort_by_key(|(_, e)| e.line);
        match unknown.first() {
            Some((k, _)) => Err(self.invalid(k, format!("unknown setting `{k}`"))),
            None => Ok(()),
        }
    }

    /// Library validation failures keep their type for the caller.
    fn core_invalid(&self, e: edp_core::Error) -> CliError {
        CliError::core(self.source.clone(), e)
    }
}

/// Canonical `key = value` text for a set of resolved settings.
pub fn render(settings: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in settings {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

fn pair(k: &str, v: impl Display) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

struct ModeValue(Mode);

impl FromStr for ModeValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_mode(s).map(ModeValue)
    }
}

struct SplineKindValue(SplineKind);

impl FromStr for SplineKindValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "thin_plate" => Ok(Self(SplineKind::ThinPlate)),
            "bspline" => Ok(Self(SplineKind::BSpline)),
            "none" => Ok(Self(SplineKind::None)),
            _ => Err("expected thin_plate, bspline or none".into()),
        }
    }
}

fn spline_kind_name(k: SplineKind) -> &'static str {
    match k {
        SplineKind::ThinPlate => "thin_plate",
        SplineKind::BSpline => "bspline",
        SplineKind::None => "none",
    }
}

struct PlacementValue(KnotPlacement);

impl FromStr for PlacementValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quantile" => Ok(Self(KnotPlacement::Quantile)),
            "equispaced" => Ok(Self(KnotPlacement::Equispaced)),
            _ => Err("expected quantile or equispaced".into()),
        }
    }
}

fn placement_name(p: KnotPlacement) -> &'static str {
    match p {
        KnotPlacement::Quantile => "quantile",
        KnotPlacement::Equispaced => "equispaced",
    }
}

pub fn parse_structure(s: &str) -> std::result::Result<Structure, String> {
    match s {
        "clustered" => Ok(Structure::Clustered),
        "single" => Ok(Structure::Single),
        _ => Err(format!("unknown structure `{s}` (expected clustered or single)")),
    }
}

fn structure_name(s: Structure) -> &'static str {
    match s {
        Structure::Clustered => "clustered",
        Structure::Single => "single",
    }
}

struct StructureValue(Structure);

impl FromStr for StructureValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_structure(s).map(StructureValue)
    }
}

/// Sampler settings. `prediction_schedule` lists iterations explicitly;
/// `n_imputations` asks for that many evenly spaced post-burn-in draws.
pub fn sampler_config(kv: &KeyValues) -> Result<SamplerConfig> {
    let d = SamplerConfig::default();
    let mut cfg = SamplerConfig {
        n_iter: kv.get_or("n_iter", d.n_iter)?,
        n_burnin: kv.get_or("n_burnin", d.n_burnin)?,
        thin: kv.get_or("thin", d.thin)?,
        m_aux: kv.get_or("m_aux", d.m_aux)?,
        mode: kv.get::<ModeValue>("mode")?.map_or(d.mode, |m| m.0),
        seed: kv.get_or("seed", d.seed)?,
        shuffle: kv.get_or("shuffle", d.shuffle)?,
        alpha_psi_compat: kv.get_or("alpha_psi_compat", d.alpha_psi_compat)?,
        init_theta_clusters: kv.get_or("init_theta_clusters", d.init_theta_clusters)?,
        record_partitions: kv.get_or("record_partitions", d.record_partitions)?,
        ..d
    };
    if let Some(p) = kv.get_list::<f64>("alpha_psi_proposal")? {
        if p.len() != 2 {
            return Err(kv.invalid("alpha_psi_proposal", "expected `shape, rate`"));
        }
        cfg.alpha_psi_proposal = Some((p[0], p[1]));
    }
    let explicit = kv.get_list::<usize>("prediction_schedule")?;
    let count = kv.get::<usize>("n_imputations")?;
    cfg.prediction_schedule = match (explicit, count) {
        (Some(_), Some(_)) => {
            return Err(kv.invalid(
                "n_imputations",
                "set either prediction_schedule or n_imputations, not both",
            ))
        }
        (Some(s), None) => s,
        (None, Some(m)) => evenly_spaced_schedule(cfg.n_burnin, cfg.n_iter, m),
        (None, None) => Vec::new(),
    };
    cfg.validate().map_err(|e| kv.core_invalid(e))?;
    Ok(cfg)
}

pub fn render_sampler(cfg: &SamplerConfig) -> Vec<(String, String)> {
    let mut out = vec![
        pair("n_iter", cfg.n_iter),
        pair("n_burnin", cfg.n_burnin),
        pair("thin", cfg.thin),
        pair("m_aux", cfg.m_aux),
        pair("mode", cfg.mode.to_string().to_lowercase()),
        pair("seed", cfg.seed),
        pair("shuffle", cfg.shuffle),
        pair("alpha_psi_compat", cfg.alpha_psi_compat),
        pair("init_theta_clusters", cfg.init_theta_clusters),
        pair("record_partitions", cfg.record_partitions),
    ];
    if let Some((a, b)) = cfg.alpha_psi_proposal {
        out.push(pair("alpha_psi_proposal", format!("{a},{b}")));
    }
    if !cfg.prediction_schedule.is_empty() {
        out.push(pair("prediction_schedule", join(&cfg.prediction_schedule)));
    }
    out
}

const PRIOR_KEYS: [&str; 18] = [
    "a_beta", "b_beta", "a_eta", "b_eta", "a_y", "b_y", "a_x", "b_x", "nu0", "tau0_sq", "mu0", "c0", "a_u",
    "b_u", "a_theta", "b_theta", "a_psi", "b_psi",
];

fn prior_field<'a>(p: &'a mut Priors, key: &str) -> &'a mut f64 {
    match key {
        "a_beta" => &mut p.a_beta,
        "b_beta" => &mut p.b_beta,
        "a_eta" => &mut p.a_eta,
        "b_eta" => &mut p.b_eta,
        "a_y" => &mut p.a_y,
        "b_y" => &mut p.b_y,
        "a_x" => &mut p.a_x,
        "b_x" => &mut p.b_x,
        "nu0" => &mut p.nu0,
        "tau0_sq" => &mut p.tau0_sq,
        "mu0" => &mut p.mu0,
        "c0" => &mut p.c0,
        "a_u" => &mut p.a_u,
        "b_u" => &mut p.b_u,
        "a_theta" => &mut p.a_theta,
        "b_theta" => &mut p.b_theta,
        "a_psi" => &mut p.a_psi,
        "b_psi" => &mut p.b_psi,
        _ => unreachable!("not a prior key: {key}"),
    }
}

/// Hyperparameters. `beta0` is either `mean_y` or a comma-separated vector.
pub fn priors(kv: &KeyValues) -> Result<Priors> {
    let mut p = Priors::default();
    for key in PRIOR_KEYS {
        if let Some(v) = kv.get::<f64>(key)? {
            *prior_field(&mut p, key) = v;
        }
    }
    p.beta0 = match kv.raw("beta0") {
        None | Some("mean_y") => None,
        Some(_) => kv.get_list::<f64>("beta0")?,
    };
    p.validate().map_err(|e| kv.core_invalid(e))?;
    Ok(p)
}

pub fn render_priors(p: &Priors) -> Vec<(String, String)> {
    let mut copy = p.clone();
    let mut out: Vec<(String, String)> = PRIOR_KEYS
        .iter()
        .map(|&k| pair(k, *prior_field(&mut copy, k)))
        .collect();
    out.push(pair(
        "beta0",
        p.beta0.as_ref().map_or_else(|| "mean_y".to_string(), |b| join(b)),
    ));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineOptions {
    pub kind: SplineKind,
    pub n_knots: usize,
    pub placement: KnotPlacement,
    pub degree: usize,
}

impl SplineOptions {
    pub fn spec(&self, times: &[f64]) -> edp_core::Result<SplineSpec> {
        if self.kind == SplineKind::None {
            return Ok(SplineSpec::none());
        }
        SplineSpec::from_times(self.kind, times, self.n_knots, self.placement, self.degree)
    }
}

pub fn spline_options(kv: &KeyValues) -> Result<SplineOptions> {
    let opts = SplineOptions {
        kind: kv.get::<SplineKindValue>("spline")?.map_or(SplineKind::ThinPlate, |k| k.0),
        n_knots: kv.get_or("n_knots", DEFAULT_THIN_PLATE_KNOTS)?,
        placement: kv.get::<PlacementValue>("knot_placement")?.map_or(KnotPlacement::Quantile, |p| p.0),
        degree: kv.get_or("degree", DEFAULT_DEGREE)?,
    };
    if opts.kind != SplineKind::None && opts.n_knots == 0 {
        return Err(kv.invalid("n_knots", "at least one knot is required"));
    }
    Ok(opts)
}

pub fn render_spline(o: &SplineOptions) -> Vec<(String, String)> {
    vec![
        pair("spline", spline_kind_name(o.kind)),
        pair("n_knots", o.n_knots),
        pair("knot_placement", placement_name(o.placement)),
        pair("degree", o.degree),
    ]
}

/// Settings of the data-generating process.
pub fn dgp_config(kv: &KeyValues) -> Result<DgpConfig> {
    let structure = kv.get::<StructureValue>("structure")?.map_or(Structure::Clustered, |s| s.0);
    let mut cfg = DgpConfig::new(
        kv.get_or("n", 1000)?,
        kv.get_or("sigma2", 1.0)?,
        kv.get_or("sigma2_u", 0.15)?,
        structure,
        kv.get_or("seed", 1)?,
    );
    cfg.max_obs = kv.get_or("max_obs", cfg.max_obs)?;
    if let Some(p) = kv.get_list("theta_probs")? {
        cfg.theta_probs = p;
    }
    for k in 0..3 {
        if let Some(p) = kv.get_list(&format!("psi_probs_{}", k + 1))? {
            cfg.psi_probs[k] = p;
        }
    }
    if cfg.n == 0 {
        return Err(kv.invalid("n", "n must be at least 1"));
    }
    cfg.validate().map_err(|e| kv.core_invalid(e))?;
    Ok(cfg)
}

pub fn render_dgp(cfg: &DgpConfig) -> Vec<(String, String)> {
    let mut out = vec![
        pair("n", cfg.n),
        pair("sigma2", cfg.sigma2),
        pair("sigma2_u", cfg.sigma2_u),
        pair("structure", structure_name(cfg.structure)),
        pair("seed", cfg.seed),
        pair("max_obs", cfg.max_obs),
        pair("theta_probs", join(&cfg.theta_probs)),
    ];
    for (k, p) in cfg.psi_probs.iter().enumerate() {
        out.push(pair(&format!("psi_probs_{}", k + 1), join(p)));
    }
    out
}

fn parse_scenarios(kv: &KeyValues) -> Result<Option<Vec<Scenario>>> {
    let Some(raw) = kv.raw("scenarios") else {
        return Ok(None);
    };
    raw.split(';')
        .map(|item| {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            let bad = |m: String| kv.invalid("scenarios", m);
            if parts.len() != 4 {
                return Err(bad(format!("scenario `{}` is not name:sigma2:sigma2_u:structure", item.trim())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
            Ok(Scenario {
                name: parts[0].to_string(),
                sigma2: num(parts[1])?,
                sigma2_u: num(parts[2])?,
                structure: parse_structure(parts[3]).map_err(bad)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// The comparison study: scenarios, replicate count, methods and the
/// sampler, prior and spline settings shared by every fit.
pub fn study_config(kv: &KeyValues) -> Result<StudyConfig> {
    let d = StudyConfig::default();
    let methods = match kv.get_list::<ModeValue>("methods")? {
        Some(m) => m.into_iter().map(|m| m.0).collect(),
        None => d.modes.clone(),
    };
    let spline = spline_options(kv)?;
    if spline.placement != KnotPlacement::Quantile || spline.degree != DEFAULT_DEGREE {
        return Err(kv.invalid(
            "knot_placement",
            "study fits use quantile knots with the default degree",
        ));
    }
    let cfg = StudyConfig {
        scenarios: parse_scenarios(kv)?.unwrap_or(d.scenarios.clone()),
        n_datasets: kv.get_or("n_datasets", d.n_datasets)?,
        n: kv.get_or("n", d.n)?,
        seed: kv.get_or("seed", d.seed)?,
        sampler: sampler_config(kv)?,
        priors: priors(kv)?,
        spline_kind: spline.kind,
        n_knots: spline.n_knots,
        n_predictions: kv.get_or("n_predictions", d.n_predictions)?,
        modes: methods,
    };
    if cfg.n == 0 {
        return Err(kv.invalid("n", "n must be at least 1"));
    }
    if cfg.scenarios.is_empty() {
        return Err(kv.invalid("scenarios", "at least one scenario is required"));
    }
    cfg.validate().map_err(|e| kv.core_invalid(e))?;
    Ok(cfg)
}

pub fn render_study(cfg: &StudyConfig) -> Vec<(String, String)> {
    let scenarios = cfg
        .scenarios
        .iter()
        .map(|s| format!("{}:{}:{}:{}", s.name, s.sigma2, s.sigma2_u, structure_name(s.structure)))
        .collect::<Vec<_>>()
        .join(";");
    let mut out = vec![
        pair("scenarios", scenarios),
        pair("n_datasets", cfg.n_datasets),
        pair("n", cfg.n),
        pair("n_predictions", cfg.n_predictions),
        pair(
            "methods",
            cfg.modes.iter().map(|m| m.to_string().to_lowercase()).collect::<Vec<_>>().join(","),
        ),
    ];
    let mut sampler = render_sampler(&cfg.sampler);
    for (k, v) in &mut sampler {
        if k == "seed" {
            *v = cfg.seed.to_string();
        }
    }
    out.extend(sampler);
    out.extend(render_priors(&cfg.priors));
    out.extend(render_spline(&SplineOptions {
        kind: cfg.spline_kind,
        n_knots: cfg.n_knots,
        placement: KnotPlacement::Quantile,
        degree: DEFAULT_DEGREE,
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(text: &str) -> KeyValues {
        KeyValues::parse(text, "cfg.txt").unwrap()
    }

    #[test]
    fn comments_blanks_and_values() {
        let c = kv("# header\n\nn_iter = 200  # trailing\nmode=dp\n");
        assert_eq!(c.get::<usize>("n_iter").unwrap(), Some(200));
        assert_eq!(c.raw("mode"), Some("dp"));
        c.finish().unwrap();
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let e = KeyValues::parse("n_iter = 10\nbroken line\n", "cfg.txt").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("cfg.txt:2:"), "{e}");
        let e = KeyValues::parse("a = 1\na = 2\n", "cfg.txt").unwrap_err();
        assert!(e.to_string().contains("cfg.txt:2") && e.to_string().contains("line 1"));
        let e = KeyValues::parse("a =\n", "cfg.txt").unwrap_err();
        assert!(e.to_string().starts_with("cfg.txt:1:"));
        let c = kv("\n\nn_iter = many\n");
        let e = sampler_config(&c).unwrap_err();
        assert!(e.to_string().starts_with("cfg.txt:3:"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let c = kv("n_iter = 100\nn_burnin = 10\ntypo_key = 3\n");
        sampler_config(&c).unwrap();
        let e = c.finish().unwrap_err();
        assert!(e.to_string().starts_with("cfg.txt:3:") && e.to_string().contains("typo_key"));
    }

    #[test]
    fn schedule_from_count_or_list() {
        let c = kv("n_iter = 100\nn_burnin = 20\nn_imputations = 4\n");
        assert_eq!(sampler_config(&c).unwrap().prediction_schedule, vec![40, 60, 80, 100]);
        let c = kv("n_iter = 100\nn_burnin = 20\nprediction_schedule = 30, 50\n");
        assert_eq!(sampler_config(&c).unwrap().prediction_schedule, vec![30, 50]);
        let c = kv("n_iter = 100\nn_burnin = 20\nprediction_schedule = 10\n");
        assert_eq!(sampler_config(&c).unwrap_err().exit_code(), 2);
        let c = kv("n_imputations = 3\nprediction_schedule = 2000\n");
        assert!(sampler_config(&c).is_err());
    }

    #[test]
    fn resolved_settings_round_trip() {
        let c = kv(
            "n_iter = 300\nn_burnin = 100\nmode = single\nseed = 9\nalpha_psi_proposal = 2,0.5\n\
             n_imputations = 5\nc0 = 3.5\nbeta0 = 1,0,0.25\nspline = bspline\nn_knots = 4\n",
        );
        let s = sampler_config(&c).unwrap();
        let p = priors(&c).unwrap();
        let o = spline_options(&c).unwrap();
        c.finish().unwrap();
        let mut all = render_sampler(&s);
        all.extend(render_priors(&p));
        all.extend(render_spline(&o));
        let again = KeyValues::parse(&render(&all), "resolved").unwrap();
        assert_eq!(sampler_config(&again).unwrap(), s);
        assert_eq!(priors(&again).unwrap(), p);
        assert_eq!(spline_options(&again).unwrap(), o);
        again.finish().unwrap();
    }

    #[test]
    fn dgp_and_study_round_trip() {
        let c = kv("n = 50\nsigma2 = 4\nstructure = single\ntheta_probs = 0.5,0.25,0.25\nseed = 3\n");
        let d = dgp_config(&c).unwrap();
        c.finish().unwrap();
        assert_eq!(d.structure, Structure::Single);
        let again = KeyValues::parse(&render(&render_dgp(&d)), "r").unwrap();
        assert_eq!(dgp_config(&again).unwrap(), d);

        let c = kv(
            "scenarios = a:1:0.15:clustered; b:4:0.5:single\nn_datasets = 2\nn = 40\nseed = 5\n\
             n_iter = 50\nn_burnin = 10\nmethods = edp,single\nn_predictions = 8\nn_knots = 5\n",
        );
        let s = study_config(&c).unwrap();
        c.finish().unwrap();
        assert_eq!(s.scenarios.len(), 2);
        assert_eq!(s.scenarios[1].structure, Structure::Single);
        assert_eq!(s.modes, vec![Mode::Edp, Mode::Single]);
        let again = KeyValues::parse(&render(&render_study(&s)), "r").unwrap();
        assert_eq!(study_config(&again).unwrap(), s);
    }

    #[test]
    fn invalid_values_surface_as_config_errors() {
        assert!(priors(&kv("a_u = -1\n")).is_err());
        assert!(dgp_config(&kv("theta_probs = 0.5,0.5\n")).is_err());
        assert!(study_config(&kv("scenarios = a:1:clustered\n")).is_err());
        assert!(spline_options(&kv("spline = wavelet\n")).is_err());
        assert!(sampler_config(&kv("mode = hdp\n")).is_err());
    }
}
