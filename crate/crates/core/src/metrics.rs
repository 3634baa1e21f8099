//! Pixel confusion counts, derived scores and ROC-AUC.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, ProbMask};

/// Pixel counts with vessels as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for Confusion {
    fn add_assign(&mut self, o: Confusion) {
        *self = *self + o;
    }
}

fn check_dims(what: &str, a: &ImageBuffer, b: (usize, usize)) -> Result<()> {
    a.require_gray(what)?;
    if a.dims() != b {
        return Err(Error::dim(format!(
            "{what} is {}x{} but the prediction is {}x{}",
            a.width(),
            a.height(),
            b.0,
            b.1
        )));
    }
    Ok(())
}

/// Pixels of `mask` that are evaluated: all of them, or those inside `fov`.
fn region(fov: Option<&ImageBuffer>, len: usize) -> impl Iterator<Item = usize> + '_ {
    (0..len).filter(move |&i| fov.is_none_or(|f| f.data()[i] != 0))
}

/// Nonzero pixels count as foreground in every mask.
pub fn confusion(pred: &ImageBuffer, gt: &ImageBuffer, fov: Option<&ImageBuffer>) -> Result<Confusion> {
    check_dims("prediction", pred, pred.dims())?;
    check_dims("ground truth", gt, pred.dims())?;
    if let Some(f) = fov {
        check_dims("field-of-view mask", f, pred.dims())?;
    }
    let mut c = Confusion::default();
    for i in region(fov, pred.data().len()) {
        match (pred.data()[i] != 0, gt.data()[i] != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Which ratios had a zero denominator and were reported as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Degenerate {
    pub f1: bool,
    pub sensitivity: bool,
    pub specificity: bool,
    pub accuracy: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.f1 || self.sensitivity || self.specificity || self.accuracy
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub auc: Option<f64>,
    pub f1: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub degenerate: Degenerate,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1, sensitivity, specificity and accuracy; `auc` is left empty.
pub fn report(c: &Confusion) -> MetricsReport {
    let mut d = Degenerate::default();
    MetricsReport {
        auc: None,
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, &mut d.f1),
        sensitivity: ratio(c.tp, c.tp + c.fn_, &mut d.sensitivity),
        specificity: ratio(c.tn, c.tn + c.fp, &mut d.specificity),
        accuracy: ratio(c.tp + c.tn, c.total(), &mut d.accuracy),
        degenerate: d,
    }
}

/// Area under the ROC curve of `scores` against `labels`: tied scores form a
/// single threshold step, which gives half credit to tied pairs.
pub fn roc_auc_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dim(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC-AUC needs both classes, got {pos} positive and {neg} negative pixels"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // Twice the area in units of one (positive, negative) pair.
    let mut twice_area: u128 = 0;
    let mut tp_before: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut tp, mut fp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += fp as u128 * (2 * tp_before + tp) as u128;
        tp_before += tp;
    }
    Ok(twice_area as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Evaluated `(score, label)` pairs of one image.
pub fn scored_pixels(prob: &ProbMask, gt: &ImageBuffer, fov: Option<&ImageBuffer>) -> Result<(Vec<f64>, Vec<bool>)> {
    let dims = (prob.width(), prob.height());
    check_dims("ground truth", gt, dims)?;
    if let Some(f) = fov {
        check_dims("field-of-view mask", f, dims)?;
    }
    let idx: Vec<usize> = region(fov, gt.data().len()).collect();
    Ok((
        idx.iter().map(|&i| prob.data()[i]).collect(),
        idx.iter().map(|&i| gt.data()[i] != 0).collect(),
    ))
}

pub fn roc_auc(prob: &ProbMask, gt: &ImageBuffer, fov: Option<&ImageBuffer>) -> Result<f64> {
    let (s, l) = scored_pixels(prob, gt, fov)?;
    roc_auc_scores(&s, &l)
}

/// One line of an evaluation table.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub id: String,
    pub confusion: Confusion,
    pub report: MetricsReport,
}

impl EvalRow {
    pub fn new(id: impl Into<String>, confusion: Confusion, auc: Option<f64>) -> Self {
        let mut report = report(&confusion);
        report.auc = auc;
        EvalRow {
            id: id.into(),
            confusion,
            report,
        }
    }
}

pub const METRICS_HEADER: &str = "image_id,tp,fp,tn,fn,auc,f1,sen,spe,acc";
pub const AGGREGATE_ID: &str = "ALL";

/// Accumulates per-image rows; the aggregate sums confusions and pools all
/// scored pixels for its AUC.
#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    pub rows: Vec<EvalRow>,
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl Evaluation {
    pub fn new() -> Self {
        Evaluation::default()
    }

    /// Add one image. `prob` supplies AUC scores; without it the prediction
    /// itself is used as a two-level score.
    pub fn add(
        &mut self,
        id: impl Into<String>,
        pred: &ImageBuffer,
        prob: Option<&ProbMask>,
        gt: &ImageBuffer,
        fov: Option<&ImageBuffer>,
    ) -> Result<&EvalRow> {
        let c = confusion(pred, gt, fov)?;
        let owned;
        let prob = match prob {
            Some(p) => p,
            None => {
                owned = ProbMask::from_image(pred)?;
                &owned
            }
        };
        let (s, l) = scored_pixels(prob, gt, fov)?;
        let auc = roc_auc_scores(&s, &l).ok();
        self.scores.extend(s);
        self.labels.extend(l);
        self.rows.push(EvalRow::new(id, c, auc));
        Ok(self.rows.last().expect("just pushed"))
    }

    pub fn aggregate(&self) -> EvalRow {
        let c = self.rows.iter().fold(Confusion::default(), |a, r| a + r.confusion);
        EvalRow::new(AGGREGATE_ID, c, roc_auc_scores(&self.scores, &self.labels).ok())
    }

    /// Per-image rows followed by the aggregate row. Undefined AUCs are left
    /// empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for r in self.rows.iter().chain(std::iter::once(&self.aggregate())) {
            let c = &r.confusion;
            let m = &r.report;
            let auc = m.auc.map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{auc},{:.6},{:.6},{:.6},{:.6}",
                r.id, c.tp, c.fp, c.tn, c.fn_, m.f1, m.sensitivity, m.specificity, m.accuracy
            );
        }
        s
    }
}
