//! Per-pixel class-index masks.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest class count a mask can carry (labels are stored as `u8`).
pub const MAX_CLASSES: usize = 256;

/// A `height x width` array of class indices in `[0, classes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    classes: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(height: usize, width: usize, classes: usize, labels: Vec<u8>) -> Result<Self> {
        if classes == 0 || classes > MAX_CLASSES {
            return Err(Error::InvalidParam(format!(
                "class count {classes} outside 1..={MAX_CLASSES}"
            )));
        }
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{height}x{width} mask needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| usize::from(l) >= classes) {
            return Err(Error::InvalidParam(format!(
                "label {bad} is not below class count {classes}"
            )));
        }
        Ok(Self {
            height,
            width,
            classes,
            labels,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        classes: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut labels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(y, x));
            }
        }
        Self::new(height, width, classes, labels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per class.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = alloc::vec![0u64; self.classes];
        for &l in &self.labels {
            h[usize::from(l)] += 1;
        }
        h
    }

    /// One-hot encoding as a `(1, classes, height, width)` tensor.
    pub fn one_hot(&self) -> crate::Tensor {
        let mut t = crate::Tensor::zeros([1, self.classes, self.height, self.width]);
        let hw = self.height * self.width;
        let data = t.data_mut();
        for (i, &l) in self.labels.iter().enumerate() {
            data[usize::from(l) * hw + i] = 1.0;
        }
        t
    }
}
