//! Reproducible verification campaigns.
//!
//! A campaign runs one or more [`Experiment`]s from an [`ExperimentConfig`]
//! and writes, per experiment, a JSON report plus plot-ready CSV tables into
//! the output directory. Reports embed the config, seed and library version.
//! Scalar results listed in [`Report::metrics`] are checked against a
//! baselines file: the first passing run records them, later runs must stay
//! within the configured relative tolerance.

pub mod defaults;

mod algebra;
mod christ;
mod curves;
mod operators;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curves::{lift, DiscreteCurve, HorizontalVelocity};
use crate::error::{usage, Result};
use crate::group::{parse_group_spec, CarnotGroup, NormKind};
use crate::sio::{dyadic_epsilons, PowerOptions};
pub use defaults::Thresholds;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GroupInfo,
    Lift,
    Flatness,
    Annular,
    UniformL2,
    Christ,
    TestingCondition,
    AreaFormula,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::GroupInfo,
        Experiment::Lift,
        Experiment::Flatness,
        Experiment::Annular,
        Experiment::UniformL2,
        Experiment::Christ,
        Experiment::TestingCondition,
        Experiment::AreaFormula,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GroupInfo => "group-info",
            Experiment::Lift => "lift",
            Experiment::Flatness => "flatness",
            Experiment::Annular => "annular",
            Experiment::UniformL2 => "uniform-l2",
            Experiment::Christ => "christ",
            Experiment::TestingCondition => "testing-condition",
            Experiment::AreaFormula => "area-formula",
        }
    }

    fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| usage(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    /// `hline`, `circle-lift`, `holder:<α>:<C>` or `perturbed-line:<A>:<ω>`.
    pub spec: String,
    pub points: usize,
    pub interval: [f64; 2],
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { spec: "circle-lift".into(), points: 4096, interval: [0.0, 1.0] }
    }
}

/// Dyadic `ε = 2^{-k}` for `k ∈ [lo, hi]`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonGrid {
    pub lo: i32,
    pub hi: i32,
    pub values: Option<Vec<f64>>,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        Self { lo: 3, hi: 12, values: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupInfoConfig {
    pub groups: Vec<String>,
    pub samples: usize,
}

impl Default for GroupInfoConfig {
    fn default() -> Self {
        Self {
            groups: vec!["abelian:3".into(), "heisenberg:1".into(), "heisenberg:2".into(), "engel".into()],
            samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatnessConfig {
    pub curves: Vec<String>,
    pub points: usize,
    pub interval: [f64; 2],
    pub t0: f64,
    /// Scales `Δ = 2^{-k}`, `k ∈ [lo, hi]`.
    pub scale_exponents: [i32; 2],
}

impl Default for FlatnessConfig {
    fn default() -> Self {
        Self {
            curves: vec!["circle-lift".into(), "holder:0.5:1".into(), "hline".into()],
            points: (1 << 16) + 1,
            interval: [-0.5, 0.5],
            t0: 0.0,
            scale_exponents: [4, 12],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnularConfig {
    pub kernels: Vec<String>,
    /// Annuli `(2^{-k}, 1)` for `k ∈ 1..=max_k`.
    pub max_k: i32,
    pub panels: usize,
    /// Unit first-layer direction; `e_1` when absent.
    pub direction: Option<Vec<f64>>,
}

impl Default for AnnularConfig {
    fn default() -> Self {
        Self {
            kernels: vec!["vriesz:2".into(), "quasi:1".into(), "quasi:2".into(), "inv-dist".into()],
            max_k: 10,
            panels: 64,
            direction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChristConfig {
    pub rhos: Vec<f64>,
    /// `None` disables the 1-regularity gate.
    pub regularity_limit: Option<f64>,
}

impl Default for ChristConfig {
    fn default() -> Self {
        Self {
            rhos: vec![1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0],
            regularity_limit: Some(defaults::REGULARITY_LIMIT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub group: String,
    pub curve: CurveConfig,
    /// Kernels for `uniform-l2` and `testing-condition`.
    pub kernels: Vec<String>,
    pub metric: NormKind,
    pub epsilons: EpsilonGrid,
    /// Christ scales; `[N_0, N_0 + 6]` when absent.
    pub scales: Option<[i32; 2]>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Defaults to `baselines.json` in the output directory.
    pub baselines: Option<PathBuf>,
    pub power_tolerance: f64,
    pub power_max_iterations: usize,
    pub thresholds: Thresholds,
    pub group_info: GroupInfoConfig,
    pub flatness: FlatnessConfig,
    pub annular: AnnularConfig,
    pub christ: ChristConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let power = PowerOptions::default();
        Self {
            group: "heisenberg:1".into(),
            curve: CurveConfig::default(),
            kernels: vec!["vriesz:2".into(), "quasi:1".into(), "inv-dist".into()],
            metric: NormKind::Smooth,
            epsilons: EpsilonGrid::default(),
            scales: None,
            seed: power.seed,
            output_dir: None,
            baselines: None,
            power_tolerance: power.tolerance,
            power_max_iterations: power.max_iterations,
            thresholds: Thresholds::default(),
            group_info: GroupInfoConfig::default(),
            flatness: FlatnessConfig::default(),
            annular: AnnularConfig::default(),
            christ: ChristConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("carnot-out"))
    }

    pub fn baselines_path(&self) -> PathBuf {
        self.baselines.clone().unwrap_or_else(|| self.output_dir().join("baselines.json"))
    }

    fn group(&self) -> Result<Arc<CarnotGroup>> {
        parse_group_spec(&self.group)
    }

    fn power(&self) -> PowerOptions {
        PowerOptions { tolerance: self.power_tolerance, max_iterations: self.power_max_iterations, seed: self.seed }
    }

    /// The ε grid, dropping values below the mesh floor.
    fn epsilon_grid(&self, mesh: f64) -> Result<Vec<f64>> {
        let floor = self.thresholds.epsilon_mesh_factor * mesh;
        let eps: Vec<f64> = match &self.epsilons.values {
            Some(v) => v.iter().copied().filter(|&e| e >= floor).collect(),
            None => dyadic_epsilons(self.epsilons.lo, self.epsilons.hi, floor),
        };
        if eps.is_empty() {
            return Err(usage(format!("every ε lies below {} × mesh = {floor}", self.thresholds.epsilon_mesh_factor)));
        }
        Ok(eps)
    }
}

pub(crate) fn build_curve(
    group: &Arc<CarnotGroup>,
    spec: &str,
    points: usize,
    [a, b]: [f64; 2],
) -> Result<DiscreteCurve> {
    if points < 2 {
        return Err(usage(format!("a curve needs at least 2 points, got {points}")));
    }
    let hv = HorizontalVelocity::parse(spec, group.first_layer_dim())?;
    lift(group, &hv, (a, b), points - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: Experiment,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub verdicts: Vec<Verdict>,
    pub summary: serde_json::Value,
    /// Scalars tracked against the baselines file.
    pub metrics: BTreeMap<String, f64>,
    /// Files written next to the report.
    pub files: Vec<String>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

/// Per-experiment output sink.
pub(crate) struct Output {
    dir: PathBuf,
    stem: String,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path, experiment: Experiment) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), stem: experiment.file_stem(), files: Vec::new() })
    }

    fn path(&mut self, suffix: &str, ext: &str) -> PathBuf {
        let name = if suffix.is_empty() {
            format!("{}.{ext}", self.stem)
        } else {
            format!("{}_{suffix}.{ext}", self.stem)
        };
        self.files.push(name.clone());
        self.dir.join(name)
    }

    pub(crate) fn csv<T: Serialize>(&mut self, suffix: &str, rows: &[T]) -> Result<()> {
        let path = self.path(suffix, "csv");
        let mut w = csv::Writer::from_path(path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub(crate) fn writer(&mut self, suffix: &str, ext: &str) -> Result<BufWriter<File>> {
        let path = self.path(suffix, ext);
        Ok(BufWriter::new(File::create(path)?))
    }
}

/// What an experiment runner hands back.
pub(crate) struct Outcome {
    verdicts: Vec<Verdict>,
    summary: serde_json::Value,
    metrics: BTreeMap<String, f64>,
}

fn run_one(experiment: Experiment, config: &ExperimentConfig, dir: &Path) -> Result<Report> {
    let mut out = Output::new(dir, experiment)?;
    let outcome = match experiment {
        Experiment::GroupInfo => algebra::run_group_info(config, &mut out)?,
        Experiment::Lift => curves::run_lift(config, &mut out)?,
        Experiment::Flatness => curves::run_flatness(config, &mut out)?,
        Experiment::AreaFormula => curves::run_area_formula(config, &mut out)?,
        Experiment::Annular => operators::run_annular(config, &mut out)?,
        Experiment::UniformL2 => operators::run_uniform_l2(config, &mut out)?,
        Experiment::TestingCondition => operators::run_testing_condition(config, &mut out)?,
        Experiment::Christ => christ::run_christ(config, &mut out)?,
    };
    let mut files = out.files;
    files.push(format!("{}.json", experiment.file_stem()));
    Ok(Report {
        experiment,
        version: VERSION.to_string(),
        seed: config.seed,
        config: config.clone(),
        verdicts: outcome.verdicts,
        summary: outcome.summary,
        metrics: outcome.metrics,
        files,
    })
}

/// Runs `experiments` concurrently, checks baselines, writes reports and
/// appends to the campaign log. Reports come back in the given order.
pub fn run_campaign(experiments: &[Experiment], config: &ExperimentConfig) -> Result<Vec<Report>> {
    let dir = config.output_dir();
    fs::create_dir_all(&dir)?;
    let results: Vec<Result<Report>> = std::thread::scope(|s| {
        let handles: Vec<_> = experiments.iter().map(|&e| s.spawn({
            let dir = &dir;
            move || run_one(e, config, dir)
        })).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    });
    let mut reports = Vec::with_capacity(results.len());
    for (e, r) in experiments.iter().zip(results) {
        match r {
            Ok(report) => reports.push(report),
            Err(err) => {
                append_log(&dir, &serde_json::json!({"experiment": e, "seed": config.seed, "error": err.to_string()}))?;
                return Err(err);
            }
        }
    }
    apply_baselines(&mut reports, &config.baselines_path(), config.thresholds.baseline_tolerance)?;
    for r in &reports {
        let mut w = BufWriter::new(File::create(dir.join(format!("{}.json", r.experiment.file_stem())))?);
        serde_json::to_writer_pretty(&mut w, r)?;
        w.write_all(b"\n")?;
        w.flush()?;
        let failed: Vec<&str> = r.verdicts.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect();
        append_log(
            &dir,
            &serde_json::json!({
                "experiment": r.experiment,
                "version": r.version,
                "seed": r.seed,
                "pass": r.pass(),
                "verdicts": r.verdicts.len(),
                "failed": failed,
            }),
        )?;
    }
    Ok(reports)
}

/// Appends one JSON line to `campaign.log` under an exclusive lock.
fn append_log(dir: &Path, entry: &serde_json::Value) -> Result<()> {
    let file = OpenOptions::new().create(true).append(true).open(dir.join("campaign.log"))?;
    file.lock()?;
    let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut line = serde_json::to_string(&serde_json::json!({"unix_time": stamp, "entry": entry}))?;
    line.push('\n');
    let result = (&file).write_all(line.as_bytes());
    file.unlock()?;
    Ok(result?)
}

/// Compares metrics with the baselines file, recording missing ones for
/// reports that pass.
fn apply_baselines(reports: &mut [Report], path: &Path, tolerance: f64) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut file = OpenOptions::new().create(true).truncate(false).read(true).write(true).open(path)?;
    file.lock()?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    let mut baselines: BTreeMap<String, f64> =
        if text.trim().is_empty() { BTreeMap::new() } else { serde_json::from_str(&text)? };
    let mut changed = false;
    for r in reports.iter_mut() {
        let passing = r.pass();
        let mut checks = Vec::new();
        for (k, &v) in &r.metrics {
            if !v.is_finite() {
                continue;
            }
            let key = format!("{}.{k}", r.experiment);
            match baselines.get(&key) {
                Some(&b) => {
                    let rel = if b == v { 0.0 } else { (v - b).abs() / b.abs().max(v.abs()) };
                    checks.push(Verdict::new(
                        format!("baseline:{k}"),
                        rel <= tolerance,
                        format!("{v} vs baseline {b} (relative drift {rel:.3e}, limit {tolerance})"),
                    ));
                }
                None if passing => {
                    baselines.insert(key, v);
                    changed = true;
                }
                None => {}
            }
        }
        r.verdicts.extend(checks);
    }
    if changed {
        file.set_len(0)?;
        file.seek(SeekFrom::Start(0))?;
        let mut text = serde_json::to_string_pretty(&baselines)?;
        text.push('\n');
        file.write_all(text.as_bytes())?;
    }
    file.unlock()?;
    Ok(())
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn config_defaults_and_overrides() {
        let c = ExperimentConfig::from_json(r#"{"curve": {"points": 512}, "seed": 9}"#).unwrap();
        assert_eq!(c.curve.points, 512);
        assert_eq!(c.curve.spec, "circle-lift");
        assert_eq!(c.seed, 9);
        assert!(ExperimentConfig::from_json(r#"{"unknown": 1}"#).is_err());
        assert_eq!(c.epsilon_grid(1e-4).unwrap().len(), 9);
        assert_eq!(c.epsilon_grid(0.01).unwrap(), vec![0.125, 0.0625]);
    }

    #[test]
    fn baselines_record_then_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        let report = |v: f64| Report {
            experiment: Experiment::Christ,
            version: VERSION.into(),
            seed: 1,
            config: ExperimentConfig::default(),
            verdicts: vec![Verdict::new("ok", true, "")],
            summary: serde_json::Value::Null,
            metrics: [("c_o".to_string(), v)].into_iter().collect(),
            files: vec![],
        };
        let mut first = vec![report(1.0)];
        apply_baselines(&mut first, &path, 0.05).unwrap();
        assert_eq!(first[0].verdicts.len(), 1);
        let mut close = vec![report(1.04)];
        apply_baselines(&mut close, &path, 0.05).unwrap();
        assert!(close[0].pass());
        let mut far = vec![report(1.2)];
        apply_baselines(&mut far, &path, 0.05).unwrap();
        assert!(!far[0].pass());
    }
}
