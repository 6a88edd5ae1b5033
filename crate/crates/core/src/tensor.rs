//! Dense rank-4 `f32` tensor in NCHW layout.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Batch, channels, height, width.
pub type Shape = [usize; 4];

/// Row-major `(batch, channel, height, width)` array of `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f32) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor by evaluating `f(n, c, y, x)` at every element.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let [bn, cn, hn, wn] = shape;
        let mut data = Vec::with_capacity(bn * cn * hn * wn);
        for n in 0..bn {
            for c in 0..cn {
                for y in 0..hn {
                    for x in 0..wn {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.offset(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: f32) {
        let i = self.offset(n, c, y, x);
        self.data[i] = v;
    }

    /// One `H x W` plane.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &mut self.data[start..start + hw]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise sum; shapes must match.
    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub(crate) fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Cyclic shift along the row axis: output row `i` is input row
    /// `(i - k) mod H`. A rotation of the source image by `2 pi k / H`
    /// shows up this way in Tanh-polar space.
    pub fn roll_rows(&self, k: isize) -> Self {
        let [bn, cn, hn, wn] = self.shape;
        if hn == 0 {
            return self.clone();
        }
        let mut out = Self::zeros(self.shape);
        for n in 0..bn {
            for c in 0..cn {
                let src = self.plane(n, c);
                let dst = out.plane_mut(n, c);
                for y in 0..hn {
                    let sy = (y as isize - k).rem_euclid(hn as isize) as usize;
                    dst[y * wn..(y + 1) * wn].copy_from_slice(&src[sy * wn..(sy + 1) * wn]);
                }
            }
        }
        out
    }

    /// Channels `[start, start + count)`.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Self> {
        let [bn, cn, hn, wn] = self.shape;
        if start + count > cn {
            return Err(Error::ShapeMismatch(format!(
                "channel range {start}..{} exceeds {cn} channels",
                start + count
            )));
        }
        let mut data = Vec::with_capacity(bn * count * hn * wn);
        for n in 0..bn {
            for c in start..start + count {
                data.extend_from_slice(self.plane(n, c));
            }
        }
        Ok(Self {
            shape: [bn, count, hn, wn],
            data,
        })
    }

    /// Concatenates along the channel axis; batch and spatial dims must agree.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("tensor list"))?;
        let [bn, _, hn, wn] = first.shape;
        let mut cn = 0;
        for p in parts {
            let [b, c, h, w] = p.shape;
            if (b, h, w) != (bn, hn, wn) {
                return Err(Error::ShapeMismatch(format!(
                    "cannot concatenate {:?} with {:?}",
                    first.shape, p.shape
                )));
            }
            cn += c;
        }
        let mut data = Vec::with_capacity(bn * cn * hn * wn);
        for n in 0..bn {
            for p in parts {
                for c in 0..p.channels() {
                    data.extend_from_slice(p.plane(n, c));
                }
            }
        }
        Ok(Self {
            shape: [bn, cn, hn, wn],
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_length() {
        assert!(Tensor::new([1, 2, 3, 4], vec![0.0; 24]).is_ok());
        assert!(matches!(
            Tensor::new([1, 2, 3, 4], vec![0.0; 23]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn roll_rows_moves_rows_down() {
        let t = Tensor::from_fn([1, 1, 4, 2], |_, _, y, x| (y * 10 + x) as f32);
        let r = t.roll_rows(1);
        assert_eq!(r.get(0, 0, 0, 1), 31.0);
        assert_eq!(r.get(0, 0, 1, 0), 0.0);
        assert_eq!(t.roll_rows(-3), r);
        assert_eq!(t.roll_rows(4), t);
    }

    #[test]
    fn split_and_concat_are_inverse() {
        let t = Tensor::from_fn([2, 5, 3, 3], |n, c, y, x| (n * 1000 + c * 100 + y * 10 + x) as f32);
        let a = t.slice_channels(0, 2).unwrap();
        let b = t.slice_channels(2, 3).unwrap();
        assert_eq!(Tensor::concat_channels(&[&a, &b]).unwrap(), t);
        assert!(t.slice_channels(4, 2).is_err());
    }
}
