//! Experiment driver behind the `erasure` binary.
//!
//! An [`ExperimentConfig`] names a dataset, a model shape, training and
//! unlearning settings, the comparison methods, and a scenario. Every
//! command writes its artefacts under `output_dir`:
//!
//! | file | written by |
//! |------|------------|
//! | `original.ckpt`, `original_report.{json,csv}` | [`cmd_train`] |
//! | `unlearned_<method>.ckpt`, `<method>_report.{json,csv}`, `phase_log.json` | [`cmd_unlearn`] |
//! | `evaluation.{json,csv}` | [`cmd_evaluate`] |
//! | `sequential.json` | [`cmd_sequential`] |
//! | `table.md`, `table.csv`, `reports.csv` | [`run_scenario`], [`cmd_report`] |
//!
//! Features are z-scored with statistics fitted on the training split. The
//! statistics are refitted from the config on every run, which is cheap and
//! deterministic, so checkpoints hold only model parameters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{load_manifest, synth_clip, synth_dataset, write_manifest, MelConfig, SynthSpec};
use crate::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use crate::checkpoint;
use crate::dataset::{ForgetSet, LabeledDataset, Standardizer};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::loss::CrossEntropy;
use crate::metrics::{compare_reports, evaluate, EvaluationReport, ReportDelta};
use crate::model::Classifier;
use crate::qp::{run_qp_audio_eraser, Ablation, PhaseLog, UnlearnConfig};
use crate::train::{train, TrainConfig};

pub const ORIGINAL_CKPT: &str = "original.ckpt";

fn load_checkpoint(path: &Path) -> Result<Classifier> {
    checkpoint::load(path).map_err(|e| Error::at(path, e))
}

fn read_report(path: &Path) -> Result<EvaluationReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::at(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::at(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SynthSpec),
    Manifest(ManifestSource),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SynthSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSource {
    /// Directory holding `labels.csv` and the clips it lists.
    pub path: PathBuf,
    pub num_classes: usize,
    #[serde(default)]
    pub mel: MelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    /// Seed for parameter initialisation.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: vec![64], seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Single,
    Multi,
    Sequential,
    Ablation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Share of each class held out for evaluation.
    pub test_fraction: f64,
    pub split_seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub unlearn: UnlearnConfig,
    pub baselines: Vec<BaselineConfig>,
    pub scenario: Scenario,
    pub sequential_requests: Vec<ForgetSet>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::default(),
            test_fraction: 0.2,
            split_seed: 1,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            unlearn: UnlearnConfig::default(),
            baselines: BaselineMethod::ALL.into_iter().map(BaselineConfig::new).collect(),
            scenario: Scenario::Single,
            sequential_requests: Vec::new(),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::at(path, e))?;
        Self::from_json(&text).map_err(|e| Error::at(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks everything that does not need the data. Class indices are
    /// checked against K once the dataset is loaded.
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction must lie in (0, 1)"));
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::config("hidden layer sizes must be positive"));
        }
        self.train.validate()?;
        self.unlearn.train.validate()?;
        for b in &self.baselines {
            b.validate()?;
        }
        match self.scenario {
            Scenario::Single if self.unlearn.forget_set.len() != 1 => {
                Err(Error::config("the single scenario needs exactly one forgotten class"))
            }
            Scenario::Multi if self.unlearn.forget_set.len() < 2 => {
                Err(Error::config("the multi scenario needs at least two forgotten classes"))
            }
            Scenario::Sequential if self.sequential_requests.is_empty() => {
                Err(Error::config("the sequential scenario needs a non-empty sequential_requests list"))
            }
            Scenario::Sequential if self.sequential_requests.iter().any(ForgetSet::is_empty) => {
                Err(Error::config("sequential requests must not be empty"))
            }
            _ => Ok(()),
        }
    }

    /// Reseeds model initialisation, training, unlearning and every baseline.
    pub fn set_seed(&mut self, seed: u64) {
        self.model.seed = seed;
        self.train.seed = seed;
        self.unlearn.train.seed = seed;
        for b in &mut self.baselines {
            b.seed = seed;
        }
    }

    pub fn baseline_config(&self, method: BaselineMethod) -> BaselineConfig {
        self.baselines.iter().find(|b| b.method == method).cloned().unwrap_or_else(|| BaselineConfig::new(method))
    }

    pub fn num_classes(&self) -> usize {
        match &self.dataset {
            DatasetSource::Synthetic(s) => s.num_classes,
            DatasetSource::Manifest(m) => m.num_classes,
        }
    }
}

/// Standardised train and test splits.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Prepared> {
    let data = match &cfg.dataset {
        DatasetSource::Synthetic(spec) => synth_dataset(spec)?,
        DatasetSource::Manifest(m) => load_manifest(&m.path, m.num_classes, m.mel)?,
    };
    if !data.features_all_finite() {
        return Err(Error::NonFinite("dataset features contain NaN or infinity".into()));
    }
    let (mut train, mut test) = data.split_stratified(cfg.test_fraction, cfg.split_seed)?;
    let st = Standardizer::fit(&train);
    st.apply(&mut train);
    st.apply(&mut test);
    Ok(Prepared { train, test })
}

/// Trains from a seeded initialisation and rounds the parameters to `f32`
/// so that the in-memory model and its checkpoint are identical.
pub fn train_original(cfg: &ExperimentConfig, data: &Prepared) -> Result<Classifier> {
    let mut model = Classifier::new(data.train.feature_dim(), &cfg.model.hidden, data.train.num_classes(), cfg.model.seed)?;
    let log = train(&mut model, &data.train, &cfg.train, &CrossEntropy)?;
    log::info!("trained original model; final epoch loss {:?}", log.epoch_losses.last());
    model.quantize_f32();
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Qp,
    Baseline(BaselineMethod),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Qp,
        Method::Baseline(BaselineMethod::GradientAscent),
        Method::Baseline(BaselineMethod::NegativeGradient),
        Method::Baseline(BaselineMethod::FisherForgetting),
        Method::Baseline(BaselineMethod::SynapticDampening),
    ];

    pub fn parse(s: &str) -> Result<Self> {
        if s == "qp" {
            return Ok(Method::Qp);
        }
        BaselineMethod::from_short(s)
            .map(Method::Baseline)
            .ok_or_else(|| Error::config(format!("unknown method {s:?}; expected qp, ga, ng, fisher or ssd")))
    }

    pub fn short(self) -> &'static str {
        match self {
            Method::Qp => "qp",
            Method::Baseline(b) => b.short(),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Qp => "QP",
            Method::Baseline(b) => b.display_name(),
        }
    }
}

/// Runs one unlearning method on the training split. The phase log is only
/// produced by the QP pipeline.
pub fn unlearn(
    cfg: &ExperimentConfig,
    original: &Classifier,
    data: &Prepared,
    method: Method,
) -> Result<(Classifier, Option<PhaseLog>)> {
    match method {
        Method::Qp => run_qp_audio_eraser(original, &data.train, &cfg.unlearn).map(|(m, log)| (m, Some(log))),
        Method::Baseline(b) => {
            run_baseline(original, &data.train, &cfg.unlearn.forget_set, &cfg.baseline_config(b)).map(|m| (m, None))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub markdown: String,
    pub csv: String,
}

pub const TABLE_COLUMNS: [&str; 8] = ["Method", "FA", "FAR", "RA", "FRR", "PER", "IL", "ERB"];

/// Two decimals, rounding half away from zero on the shortest decimal
/// representation of `x`, so `2.675` prints as `2.68` even though the nearest
/// binary value lies just below it.
pub fn fmt2(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    // "d.ddddde±N": shortest round-trip digits
    let sci = format!("{:e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: Vec<u8> = mantissa.bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
    // value = 0.d1d2d3… × 10^(exp+1); keep the digits down to 10^-2
    let keep = exp + 1 + 2;
    let mut hundredths: u128 = 0;
    if keep > 0 {
        for i in 0..keep as usize {
            hundredths = hundredths * 10 + u128::from(*digits.get(i).unwrap_or(&0));
        }
        if digits.get(keep as usize).is_some_and(|&d| d >= 5) {
            hundredths += 1;
        }
    } else if keep == 0 && digits[0] >= 5 {
        hundredths = 1;
    }
    let sign = if x < 0.0 && hundredths > 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", hundredths / 100, hundredths % 100)
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt2).unwrap_or_else(|| "--".into())
}

/// Renders rows as a markdown table and a CSV with identical cell text.
pub fn emit_table(rows: &[TableRow]) -> Result<Table> {
    if rows.is_empty() {
        return Err(Error::config("cannot emit an empty table"));
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let m = &r.report;
            vec![r.method.clone(), cell(m.fa), cell(m.far), cell(m.ra), cell(m.frr), cell(m.per), fmt2(m.il), cell(m.erb)]
        })
        .collect();
    let mut markdown = format!("| {} |\n|{}\n", TABLE_COLUMNS.join(" | "), "---|".repeat(TABLE_COLUMNS.len()));
    for row in &cells {
        markdown.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_COLUMNS)?;
    for row in &cells {
        w.write_record(row)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8");
    Ok(Table { markdown, csv })
}

/// Full-precision CSV of every report, one row per method.
pub fn reports_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method"];
    header.extend(EvaluationReport::CSV_HEADER);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.method.clone()];
        rec.extend(r.report.csv_record());
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8"))
}

fn write_report(dir: &Path, stem: &str, report: &EvaluationReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(report)?)?;
    fs::write(dir.join(format!("{stem}.csv")), report.to_csv()?)?;
    Ok(())
}

fn write_table(dir: &Path, rows: &[TableRow]) -> Result<Table> {
    let table = emit_table(rows)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("table.md"), &table.markdown)?;
    fs::write(dir.join("table.csv"), &table.csv)?;
    fs::write(dir.join("reports.csv"), reports_csv(rows)?)?;
    Ok(table)
}

fn check_classes(cfg: &ExperimentConfig, data: &Prepared) -> Result<()> {
    cfg.unlearn.validate(data.train.num_classes())?;
    for r in &cfg.sequential_requests {
        r.validate(data.train.num_classes())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Classifier,
    pub report: EvaluationReport,
    pub data: Prepared,
}

/// Trains the original model, writes its checkpoint and its report against
/// the configured forget set.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    check_classes(cfg, &data)?;
    let model = train_original(cfg, &data)?;
    let report = evaluate(&model, &data.test, &cfg.unlearn.forget_set, None)?;
    fs::create_dir_all(&cfg.output_dir)?;
    checkpoint::save(&model, cfg.output_dir.join(ORIGINAL_CKPT))?;
    write_report(&cfg.output_dir, "original_report", &report)?;
    Ok(TrainOutput { model, report, data })
}

#[derive(Debug, Clone)]
pub struct UnlearnOutput {
    pub model: Classifier,
    pub report: EvaluationReport,
    pub phase_log: Option<PhaseLog>,
    pub checkpoint: PathBuf,
}

/// Loads the original checkpoint (default `<output_dir>/original.ckpt`),
/// unlearns with `method`, and writes a new checkpoint. The original file is
/// only read.
pub fn cmd_unlearn(cfg: &ExperimentConfig, method: Method, original_path: Option<&Path>) -> Result<UnlearnOutput> {
    cfg.validate()?;
    let default_path = cfg.output_dir.join(ORIGINAL_CKPT);
    let original = load_checkpoint(original_path.unwrap_or(&default_path))?;
    let data = prepare_data(cfg)?;
    check_classes(cfg, &data)?;
    let forget = &cfg.unlearn.forget_set;
    let original_fa = evaluate(&original, &data.test, forget, None)?.fa;
    let (mut model, phase_log) = unlearn(cfg, &original, &data, method)?;
    model.quantize_f32();
    let report = evaluate(&model, &data.test, forget, original_fa)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let ckpt = out.join(format!("unlearned_{}.ckpt", method.short()));
    checkpoint::save(&model, &ckpt)?;
    write_report(out, &format!("{}_report", method.short()), &report)?;
    if let Some(log) = &phase_log {
        for r in log.iter().filter(|r| r.skipped) {
            log::info!("phase {} skipped by ablation flag", r.phase);
        }
        fs::write(out.join("phase_log.json"), serde_json::to_string_pretty(log)?)?;
    }
    Ok(UnlearnOutput { model, report, phase_log, checkpoint: ckpt })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateOutput {
    pub report: EvaluationReport,
    pub delta: Option<ReportDelta>,
}

/// Evaluates a checkpoint on the test split. When an original report is
/// given, PER is attached and per-metric deltas are computed against it.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    model_path: &Path,
    forget: &ForgetSet,
    original_report: Option<&Path>,
) -> Result<EvaluateOutput> {
    let model = load_checkpoint(model_path)?;
    let data = prepare_data(cfg)?;
    let original: Option<EvaluationReport> = match original_report {
        Some(p) => Some(read_report(p)?),
        None => None,
    };
    let report = evaluate(&model, &data.test, forget, original.as_ref().and_then(|o| o.fa))?;
    let delta = original.as_ref().map(|o| compare_reports(o, &report)).transpose()?;
    write_report(&cfg.output_dir, "evaluation", &report)?;
    Ok(EvaluateOutput { report, delta })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialStep {
    pub step: usize,
    pub request: ForgetSet,
    /// Every class forgotten so far.
    pub forgotten: ForgetSet,
    pub retained_classes: usize,
    pub report: EvaluationReport,
}

/// Applies each request in turn to the evolving model. Samples of classes
/// forgotten at earlier steps are no longer part of the training data, so
/// each run only transforms the newly requested classes. Evaluation after
/// each step covers the union of forgotten classes.
pub fn cmd_sequential(cfg: &ExperimentConfig) -> Result<Vec<SequentialStep>> {
    if cfg.sequential_requests.is_empty() {
        return Err(Error::config("sequential_requests must not be empty"));
    }
    let cfg = ExperimentConfig { scenario: Scenario::Sequential, ..cfg.clone() };
    let TrainOutput { model: original, data, .. } = cmd_train(&cfg)?;
    let k = data.train.num_classes();
    let mut model = original.clone();
    let mut forgotten = ForgetSet::new([]);
    let mut steps = Vec::new();
    for (i, request) in cfg.sequential_requests.iter().enumerate() {
        let fresh = ForgetSet::new(request.classes().iter().copied().filter(|&c| !forgotten.contains(c)));
        if fresh.len() < request.len() {
            log::warn!("request {request} overlaps classes already forgotten; only {fresh} are new");
        }
        let union = forgotten.union(request);
        if union.len() >= k {
            return Err(Error::config(format!("step {} would forget every class", i + 1)));
        }
        if !fresh.is_empty() {
            let remaining = Prepared { train: data.train.without_classes(&forgotten), test: data.test.clone() };
            let step_cfg = ExperimentConfig {
                unlearn: UnlearnConfig { forget_set: fresh, ..cfg.unlearn.clone() },
                ..cfg.clone()
            };
            model = unlearn(&step_cfg, &model, &remaining, Method::Qp)?.0;
            model.quantize_f32();
        }
        forgotten = union;
        let original_fa = evaluate(&original, &data.test, &forgotten, None)?.fa;
        let report = evaluate(&model, &data.test, &forgotten, original_fa)?;
        steps.push(SequentialStep {
            step: i + 1,
            request: request.clone(),
            forgotten: forgotten.clone(),
            retained_classes: k - forgotten.len(),
            report,
        });
    }
    fs::write(cfg.output_dir.join("sequential.json"), serde_json::to_string_pretty(&steps)?)?;
    let rows: Vec<TableRow> = steps
        .iter()
        .map(|s| TableRow { method: format!("Step {} {}", s.step, s.forgotten), report: s.report.clone() })
        .collect();
    write_table(&cfg.output_dir, &rows)?;
    Ok(steps)
}

/// Ablation variants in table order: the full method first.
pub fn ablation_variants(base: &UnlearnConfig) -> Vec<(&'static str, UnlearnConfig)> {
    let with = |a: Ablation| UnlearnConfig { ablation: a, ..base.clone() };
    vec![
        ("Full method", base.clone()),
        ("No Weight Transform", with(Ablation { no_weight_transform: true, ..base.ablation })),
        ("No Uncertainty Maximization", with(Ablation { no_uncertainty_maximization: true, ..base.ablation })),
        ("No Matrix M", with(Ablation { no_matrix_m: true, ..base.ablation })),
        ("lambda = 0.5", UnlearnConfig { lambda: 0.5, ..base.clone() }),
        ("lambda = 2.0", UnlearnConfig { lambda: 2.0, ..base.clone() }),
    ]
}

/// One report per ablation variant, all starting from the same original model.
pub fn cmd_ablation(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    let TrainOutput { model: original, report: orig_report, data } = cmd_train(cfg)?;
    let variants = ablation_variants(&cfg.unlearn);
    let results = exec::map(Exec::default(), &variants, |(name, ucfg)| -> Result<TableRow> {
        let (mut m, _) = run_qp_audio_eraser(&original, &data.train, ucfg)?;
        m.quantize_f32();
        let report = evaluate(&m, &data.test, &ucfg.forget_set, orig_report.fa)?;
        Ok(TableRow { method: (*name).to_string(), report })
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_table(&cfg.output_dir, &rows)?;
    Ok(rows)
}

/// The original model followed by every method, evaluated on the test split.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    let TrainOutput { model: original, report: orig_report, data } = cmd_train(cfg)?;
    let forget = &cfg.unlearn.forget_set;
    let results = exec::map(Exec::default(), &Method::ALL, |&method| -> Result<TableRow> {
        let (mut m, _) = unlearn(cfg, &original, &data, method)?;
        m.quantize_f32();
        let report = evaluate(&m, &data.test, forget, orig_report.fa)?;
        Ok(TableRow { method: method.display_name().into(), report })
    });
    let mut rows = vec![TableRow { method: "Original".into(), report: orig_report }];
    for r in results {
        rows.push(r?);
    }
    write_table(&cfg.output_dir, &rows)?;
    Ok(rows)
}

/// Runs the configured scenario end to end and returns its table rows.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<Vec<TableRow>> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Single | Scenario::Multi => cmd_compare(cfg),
        Scenario::Ablation => cmd_ablation(cfg),
        Scenario::Sequential => {
            let steps = cmd_sequential(cfg)?;
            Ok(steps
                .into_iter()
                .map(|s| TableRow { method: format!("Step {} {}", s.step, s.forgotten), report: s.report })
                .collect())
        }
    }
}

/// Writes the synthetic corpus as 16-bit WAV files plus `labels.csv`.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<usize> {
    spec.validate()?;
    let pairs: Vec<(usize, usize)> =
        (0..spec.num_classes).flat_map(|c| (0..spec.per_class).map(move |i| (c, i))).collect();
    let clips: Vec<_> = exec::map(Exec::default(), &pairs, |&(c, i)| (synth_clip(spec, c, i), c));
    write_manifest(out, &clips)?;
    Ok(clips.len())
}

/// Assembles a table from report JSON files; each row is named after its
/// file stem.
pub fn cmd_report(paths: &[PathBuf], out: &Path) -> Result<Table> {
    if paths.is_empty() {
        return Err(Error::config("report needs at least one report file"));
    }
    let rows = paths
        .iter()
        .map(|p| {
            let report = read_report(p)?;
            let method = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(TableRow { method, report })
        })
        .collect::<Result<Vec<_>>>()?;
    write_table(out, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{report_from_scores, Scored};

    fn report(fa: usize, n: usize, original_fa: Option<f64>) -> EvaluationReport {
        let scored: Vec<Scored> = (0..n)
            .map(|i| Scored { class: 0, predicted: usize::from(i >= fa), forget_mass: 0.5 })
            .chain([Scored { class: 1, predicted: 1, forget_mass: 0.0 }])
            .collect();
        report_from_scores(&scored, 2, &ForgetSet::single(0), original_fa)
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(fmt2(0.125), "0.13");
        assert_eq!(fmt2(-0.125), "-0.13");
        assert_eq!(fmt2(2.675), "2.68");
        assert_eq!(fmt2(99.995), "100.00");
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(100.0), "100.00");
        assert_eq!(fmt2(0.005), "0.01");
        assert_eq!(fmt2(0.004999), "0.00");
        assert_eq!(fmt2(1.005), "1.01");
        assert_eq!(fmt2(33.333333333333336), "33.33");
        assert_eq!(fmt2(0.0), "0.00");
        assert_eq!(fmt2(1e-9), "0.00");
        assert_eq!(fmt2(12345.6789), "12345.68");
    }

    #[test]
    fn original_row_has_dashed_per() {
        let t = emit_table(&[TableRow { method: "Original".into(), report: report(1, 1, None) }]).unwrap();
        assert_eq!(t.csv, "Method,FA,FAR,RA,FRR,PER,IL,ERB\nOriginal,100.00,0.00,100.00,0.00,--,50.00,100.00\n");
        assert_eq!(t.markdown.lines().count(), 3);
        assert!(t.markdown.starts_with("| Method | FA | FAR | RA | FRR | PER | IL | ERB |"));
    }

    #[test]
    fn markdown_and_csv_agree() {
        let rows = vec![
            TableRow { method: "Original".into(), report: report(3, 3, None) },
            TableRow { method: "QP".into(), report: report(0, 3, Some(100.0)) },
            TableRow { method: "Partial".into(), report: report(2, 3, Some(100.0)) },
        ];
        let t = emit_table(&rows).unwrap();
        let md: Vec<Vec<String>> = t
            .markdown
            .lines()
            .skip(2)
            .map(|l| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
            .collect();
        let csv: Vec<Vec<String>> = t.csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
        assert_eq!(md, csv);
        assert_eq!(csv[2][1], "66.67");
        assert_eq!(csv[2][5], "33.33");
        assert!(emit_table(&[]).is_err());
    }

    #[test]
    fn config_roundtrip_and_rejection() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let partial = ExperimentConfig::from_json(r#"{"scenario":"multi","unlearn":{"forget_set":[0,4]}}"#).unwrap();
        assert_eq!(partial.unlearn.forget_set, ForgetSet::new([0, 4]));
        assert_eq!(partial.unlearn.alpha, 0.3);
        assert!(ExperimentConfig::from_json(r#"{"scenaro":"multi"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario":"sequential"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario":"multi"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"test_fraction":1.5}"#).is_err());
        let m = ExperimentConfig::from_json(r#"{"dataset":{"manifest":{"path":"x","num_classes":3}}}"#).unwrap();
        assert_eq!(m.num_classes(), 3);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.short()).unwrap(), m);
        }
        assert!(matches!(Method::parse("sgd"), Err(Error::Config(_))));
    }

    #[test]
    fn ablation_grid_shape() {
        let v = ablation_variants(&UnlearnConfig::default());
        assert_eq!(v.len(), 6);
        assert_eq!(v[0].1, UnlearnConfig::default());
        assert!(v[3].1.ablation.no_matrix_m);
        assert_eq!(v[5].1.lambda, 2.0);
    }

    #[test]
    fn seed_override_reaches_everything() {
        let mut cfg = ExperimentConfig::default();
        cfg.set_seed(42);
        assert_eq!((cfg.model.seed, cfg.train.seed, cfg.unlearn.train.seed), (42, 42, 42));
        assert!(cfg.baselines.iter().all(|b| b.seed == 42));
    }
}
