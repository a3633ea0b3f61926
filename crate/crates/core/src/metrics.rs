//! Forgetting metrics computed from top-1 predictions and softmax mass.
//!
//! With `F` the forget set, on an evaluation set split by recorded class:
//!
//! | metric | definition (percent) |
//! |--------|----------------------|
//! | FA  | accuracy on samples of classes in `F` |
//! | RA  | accuracy on all other samples |
//! | IL  | mean softmax mass on `F` over forget samples (0 when there are none) |
//! | PER | `(FA₀ − FA) / FA₀`, given the original model's `FA₀ > 0` |
//! | FAR | share of retained samples predicted into `F` |
//! | FRR | share of forget samples predicted outside `F` |
//! | ERB | harmonic mean `2·FA·RA / (FA + RA)`, 0 when both are 0 |
//!
//! FRR is the complement of FA when `F` holds a single class. Published tables
//! that report `100 − RA` in the FRR column do not follow this definition.

use serde::{Deserialize, Serialize};

use crate::dataset::{ForgetSet, LabeledDataset};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::loss::softmax;
use crate::model::{argmax, Classifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fa: Option<f64>,
    pub ra: Option<f64>,
    pub il: f64,
    pub per: Option<f64>,
    pub far: Option<f64>,
    pub frr: Option<f64>,
    pub erb: Option<f64>,
    /// Accuracy per class, absent for classes with no samples.
    pub per_class: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub n_eval: usize,
}

/// Top-1 prediction plus the softmax mass on the forget set for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub class: usize,
    pub predicted: usize,
    pub forget_mass: f64,
}

pub fn score(model: &Classifier, data: &LabeledDataset, forget: &ForgetSet, exec: Exec) -> Result<Vec<Scored>> {
    if data.num_classes() != model.num_classes() {
        return Err(Error::Shape("dataset and model disagree on the class count".into()));
    }
    exec::map(exec, data.samples(), |s| {
        let z = model.logits(&s.features)?;
        let p = softmax(&z);
        let forget_mass = forget.classes().iter().map(|&c| p.probs()[c]).sum();
        Ok(Scored { class: s.class, predicted: argmax(&z), forget_mass })
    })
    .into_iter()
    .collect()
}

pub fn harmonic_balance(fa: f64, ra: f64) -> f64 {
    if fa + ra == 0.0 {
        0.0
    } else {
        2.0 * fa * ra / (fa + ra)
    }
}

pub fn erasure_rate(original_fa: f64, fa: f64) -> Option<f64> {
    (original_fa > 0.0).then(|| (original_fa - fa) / original_fa * 100.0)
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64 * 100.0)
}

/// Builds a report from already-scored samples.
pub fn report_from_scores(
    scored: &[Scored],
    num_classes: usize,
    forget: &ForgetSet,
    original_fa: Option<f64>,
) -> EvaluationReport {
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    let (mut n_f, mut hit_f, mut reject_f, mut mass_f) = (0usize, 0usize, 0usize, 0.0f64);
    let (mut n_r, mut hit_r, mut accept_r) = (0usize, 0usize, 0usize);
    for s in scored {
        confusion[s.class][s.predicted] += 1;
        if forget.contains(s.class) {
            n_f += 1;
            hit_f += usize::from(s.predicted == s.class);
            reject_f += usize::from(!forget.contains(s.predicted));
            mass_f += s.forget_mass;
        } else {
            n_r += 1;
            hit_r += usize::from(s.predicted == s.class);
            accept_r += usize::from(forget.contains(s.predicted));
        }
    }
    let fa = pct(hit_f, n_f);
    let ra = pct(hit_r, n_r);
    let per_class = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| pct(row[c] as usize, row.iter().sum::<u64>() as usize))
        .collect();
    EvaluationReport {
        fa,
        ra,
        il: if n_f > 0 { mass_f / n_f as f64 * 100.0 } else { 0.0 },
        per: match (original_fa, fa) {
            (Some(o), Some(f)) => erasure_rate(o, f),
            _ => None,
        },
        far: pct(accept_r, n_r),
        frr: pct(reject_f, n_f),
        erb: fa.zip(ra).map(|(f, r)| harmonic_balance(f, r)),
        per_class,
        confusion,
        n_eval: scored.len(),
    }
}

pub fn evaluate(
    model: &Classifier,
    data: &LabeledDataset,
    forget: &ForgetSet,
    original_fa: Option<f64>,
) -> Result<EvaluationReport> {
    evaluate_with(model, data, forget, original_fa, Exec::default())
}

pub fn evaluate_with(
    model: &Classifier,
    data: &LabeledDataset,
    forget: &ForgetSet,
    original_fa: Option<f64>,
    exec: Exec,
) -> Result<EvaluationReport> {
    if data.is_empty() {
        return Err(Error::config("evaluation set is empty"));
    }
    forget.validate(model.num_classes())?;
    let scored = score(model, data, forget, exec)?;
    Ok(report_from_scores(&scored, model.num_classes(), forget, original_fa))
}

/// `(FA, RA)` in percent; each absent when its split is empty.
pub fn split_accuracy(model: &Classifier, data: &LabeledDataset, forget: &ForgetSet) -> Result<(Option<f64>, Option<f64>)> {
    let scored = score(model, data, forget, Exec::default())?;
    let r = report_from_scores(&scored, model.num_classes(), forget, None);
    Ok((r.fa, r.ra))
}

/// Signed change of each metric from `original` to `unlearned`, plus PER
/// recomputed against the original FA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub d_fa: Option<f64>,
    pub d_ra: Option<f64>,
    pub d_il: f64,
    pub d_far: Option<f64>,
    pub d_frr: Option<f64>,
    pub d_erb: Option<f64>,
    pub per: Option<f64>,
}

pub fn compare_reports(original: &EvaluationReport, unlearned: &EvaluationReport) -> Result<ReportDelta> {
    if original.confusion.len() != unlearned.confusion.len() {
        return Err(Error::Shape(format!(
            "reports cover {} and {} classes",
            original.confusion.len(),
            unlearned.confusion.len()
        )));
    }
    let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| b - a);
    Ok(ReportDelta {
        d_fa: diff(original.fa, unlearned.fa),
        d_ra: diff(original.ra, unlearned.ra),
        d_il: unlearned.il - original.il,
        d_far: diff(original.far, unlearned.far),
        d_frr: diff(original.frr, unlearned.frr),
        d_erb: diff(original.erb, unlearned.erb),
        per: original.fa.zip(unlearned.fa).and_then(|(o, f)| erasure_rate(o, f)),
    })
}

impl EvaluationReport {
    pub const CSV_HEADER: [&'static str; 8] = ["fa", "ra", "il", "per", "far", "frr", "erb", "n_eval"];

    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            opt(self.fa),
            opt(self.ra),
            self.il.to_string(),
            opt(self.per),
            opt(self.far),
            opt(self.frr),
            opt(self.erb),
            self.n_eval.to_string(),
        ]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_record())?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
