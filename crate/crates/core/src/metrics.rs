//! Segmentation losses and evaluation metrics.
//!
//! Losses take per-pixel class probabilities as a `(1, C, H, W)` tensor.
//! Evaluation works on hard label masks through a [`ConfusionMatrix`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::LabelMask;
use crate::math;
use crate::tensor::Tensor;

/// Smoothing term added to numerator and denominator of every Dice ratio.
pub const DICE_SMOOTH: f64 = 1.0;

/// Floor applied to true-class probabilities before taking the log.
pub const CE_FLOOR: f64 = 1e-12;

/// Tolerance on per-pixel probability sums.
pub const PROB_SUM_TOL: f64 = 1e-5;

/// Mixing weight between cross-entropy and Dice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    lambda: f64,
}

impl LossWeights {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParam(format!("lambda = {lambda} outside [0, 1]")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda: 0.5 }
    }
}

fn check_probs(probs: &Tensor, gt: &LabelMask) -> Result<()> {
    let [bn, cn, h, w] = probs.shape();
    if bn != 1 || cn != gt.classes() || h != gt.height() || w != gt.width() {
        return Err(Error::ShapeMismatch(format!(
            "probabilities {:?} vs mask {}x{} with {} classes",
            probs.shape(),
            gt.height(),
            gt.width(),
            gt.classes()
        )));
    }
    let hw = h * w;
    let data = probs.data();
    for p in 0..hw {
        let mut sum = 0.0f64;
        for c in 0..cn {
            let v = f64::from(data[c * hw + p]);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "probability {v} at pixel {p}, class {c} is outside [0, 1]"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidParam(format!(
                "probabilities at pixel {p} sum to {sum}"
            )));
        }
    }
    Ok(())
}

/// Cross-entropy value plus the number of pixels whose true-class
/// probability had to be floored at [`CE_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    pub clamped_pixels: usize,
}

/// Mean over pixels of `-ln p(true class)`.
pub fn cross_entropy_stats(probs: &Tensor, gt: &LabelMask) -> Result<CrossEntropy> {
    check_probs(probs, gt)?;
    let hw = gt.height() * gt.width();
    let data = probs.data();
    let mut clamped_pixels = 0;
    let mut total = 0.0;
    for (p, &g) in gt.labels().iter().enumerate() {
        let mut v = f64::from(data[usize::from(g) * hw + p]);
        if v < CE_FLOOR {
            v = CE_FLOOR;
            clamped_pixels += 1;
        }
        total -= math::ln(v);
    }
    Ok(CrossEntropy {
        loss: total / hw as f64,
        clamped_pixels,
    })
}

pub fn cross_entropy(probs: &Tensor, gt: &LabelMask) -> Result<f64> {
    cross_entropy_stats(probs, gt).map(|ce| ce.loss)
}

/// Soft Dice loss with the default smoothing term.
pub fn dice_loss(probs: &Tensor, gt: &LabelMask) -> Result<f64> {
    dice_loss_with_smooth(probs, gt, DICE_SMOOTH)
}

/// `1 - mean_c (2 sum p_c g_c + eps) / (sum p_c^2 + sum g_c^2 + eps)` with
/// `g` the one-hot ground truth.
pub fn dice_loss_with_smooth(probs: &Tensor, gt: &LabelMask, eps: f64) -> Result<f64> {
    check_probs(probs, gt)?;
    let cn = gt.classes();
    let hw = gt.height() * gt.width();
    let data = probs.data();
    let mut inter = vec![0.0f64; cn];
    let mut p_sq = vec![0.0f64; cn];
    let g_sq: Vec<f64> = gt.histogram().iter().map(|&n| n as f64).collect();
    for c in 0..cn {
        for &v in &data[c * hw..(c + 1) * hw] {
            let v = f64::from(v);
            p_sq[c] += v * v;
        }
    }
    for (p, &g) in gt.labels().iter().enumerate() {
        let g = usize::from(g);
        inter[g] += f64::from(data[g * hw + p]);
    }
    let mean: f64 = (0..cn)
        .map(|c| (2.0 * inter[c] + eps) / (p_sq[c] + g_sq[c] + eps))
        .sum::<f64>()
        / cn as f64;
    Ok(1.0 - mean)
}

/// `lambda * CE + (1 - lambda) * Dice`.
pub fn combined_loss(probs: &Tensor, gt: &LabelMask, w: LossWeights) -> Result<f64> {
    let ce = cross_entropy(probs, gt)?;
    let dice = dice_loss(probs, gt)?;
    Ok(w.lambda * ce + (1.0 - w.lambda) * dice)
}

/// `C x C` pixel counts; entry `(g, p)` counts pixels with ground truth `g`
/// predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::ShapeMismatch(format!(
                "{classes} classes need {} counts, got {}",
                classes * classes,
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds the counts of `pred` against `gt`.
    pub fn accumulate(&mut self, pred: &LabelMask, gt: &LabelMask) -> Result<()> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(Error::ShapeMismatch(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        if pred.classes() != self.classes || gt.classes() != self.classes {
            return Err(Error::ShapeMismatch(format!(
                "class counts {} / {} vs matrix of {}",
                pred.classes(),
                gt.classes(),
                self.classes
            )));
        }
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            self.counts[usize::from(g) * self.classes + usize::from(p)] += 1;
        }
        Ok(())
    }

    /// Sums another matrix of the same size into this one.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge {} and {} class matrices",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// True positives, false positives and false negatives of class `c`.
    pub fn tp_fp_fn(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.get(c, c);
        let col: u64 = (0..self.classes).map(|g| self.get(g, c)).sum();
        let row: u64 = (0..self.classes).map(|p| self.get(c, p)).sum();
        (tp, col - tp, row - tp)
    }
}

/// Confusion matrix of `pred` against `gt`.
pub fn confusion(pred: &LabelMask, gt: &LabelMask) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(gt.classes());
    cm.accumulate(pred, gt)?;
    Ok(cm)
}

/// IoU and F1 of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub iou: f64,
    pub f1: f64,
}

fn score(tp: u64, fp: u64, fn_: u64) -> Option<ClassScore> {
    let denom = tp + fp + fn_;
    if denom == 0 {
        return None;
    }
    let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
    Some(ClassScore {
        iou: tp / (tp + fp + fn_),
        f1: 2.0 * tp / (2.0 * tp + fp + fn_),
    })
}

/// Per-class scores and their means.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    /// `None` for classes absent from both prediction and ground truth.
    pub per_class: Vec<Option<ClassScore>>,
    pub mean_iou: Option<f64>,
    pub mean_f1: Option<f64>,
    /// Whether class 0 took part in the means.
    pub includes_background: bool,
}

/// Per-class IoU / F1 with means over the foreground classes (1..C).
pub fn iou_f1(cm: &ConfusionMatrix) -> Scores {
    iou_f1_with(cm, false)
}

pub fn iou_f1_with(cm: &ConfusionMatrix, include_background: bool) -> Scores {
    let per_class: Vec<Option<ClassScore>> = (0..cm.classes)
        .map(|c| {
            let (tp, fp, fn_) = cm.tp_fp_fn(c);
            score(tp, fp, fn_)
        })
        .collect();
    let first = usize::from(!include_background);
    let defined: Vec<ClassScore> = per_class.iter().skip(first).flatten().copied().collect();
    let mean = |f: fn(&ClassScore) -> f64| {
        (!defined.is_empty()).then(|| defined.iter().map(f).sum::<f64>() / defined.len() as f64)
    };
    Scores {
        mean_iou: mean(|s| s.iou),
        mean_f1: mean(|s| s.f1),
        per_class,
        includes_background: include_background,
    }
}

/// Disjoint groups of class indices evaluated as single merged regions.
///
/// Classes listed in no group collapse into one extra "rest" label that is
/// never scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGroups {
    classes: usize,
    groups: Vec<Vec<u8>>,
    /// Merged label of every original class.
    lut: Vec<u8>,
}

impl RegionGroups {
    pub fn new(classes: usize, groups: Vec<Vec<u8>>) -> Result<Self> {
        if groups.is_empty() || groups.len() >= crate::mask::MAX_CLASSES {
            return Err(Error::InvalidParam(format!(
                "need 1..{} groups, got {}",
                crate::mask::MAX_CLASSES,
                groups.len()
            )));
        }
        let rest = groups.len() as u8;
        let mut lut = vec![rest; classes];
        for (gi, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidParam(format!("group {gi} is empty")));
            }
            for &c in g {
                let c = usize::from(c);
                if c >= classes {
                    return Err(Error::InvalidParam(format!(
                        "group {gi} names class {c}, but there are only {classes}"
                    )));
                }
                if lut[c] != rest {
                    return Err(Error::InvalidParam(format!(
                        "class {c} appears in groups {} and {gi}",
                        lut[c]
                    )));
                }
                lut[c] = gi as u8;
            }
        }
        Ok(Self {
            classes,
            groups,
            lut,
        })
    }

    pub fn groups(&self) -> &[Vec<u8>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Label count after merging, including the rest label.
    pub fn merged_classes(&self) -> usize {
        self.groups.len() + 1
    }

    /// Maps every pixel to its group index.
    pub fn relabel(&self, mask: &LabelMask) -> Result<LabelMask> {
        if mask.classes() != self.classes {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} classes, groups expect {}",
                mask.classes(),
                self.classes
            )));
        }
        let labels = mask.labels().iter().map(|&l| self.lut[usize::from(l)]).collect();
        LabelMask::new(mask.height(), mask.width(), self.merged_classes(), labels)
    }

    /// Folds a per-class confusion matrix into the merged label space.
    pub fn merge_confusion(&self, cm: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        if cm.classes() != self.classes {
            return Err(Error::ShapeMismatch(format!(
                "matrix has {} classes, groups expect {}",
                cm.classes(),
                self.classes
            )));
        }
        let mut merged = ConfusionMatrix::new(self.merged_classes());
        let m = merged.classes;
        for g in 0..self.classes {
            for p in 0..self.classes {
                let (mg, mp) = (usize::from(self.lut[g]), usize::from(self.lut[p]));
                merged.counts[mg * m + mp] += cm.get(g, p);
            }
        }
        Ok(merged)
    }
}

/// Scores of each merged region, computed on the merged confusion matrix
/// rather than averaged from per-class scores.
pub fn merge_regions(cm: &ConfusionMatrix, groups: &RegionGroups) -> Result<Vec<Option<ClassScore>>> {
    let merged = groups.merge_confusion(cm)?;
    Ok((0..groups.len())
        .map(|g| {
            let (tp, fp, fn_) = merged.tp_fp_fn(g);
            score(tp, fp, fn_)
        })
        .collect())
}
