//! Forward-pass convolution kernels for Tanh-polar feature maps.
//!
//! Feature maps are NCHW [`Tensor`]s laid out as Tanh-polar rasters: rows
//! are angle (periodic), columns are radius. [`PadMode::Mixed`] pads rows
//! cyclically and replicates columns, which makes any stride-1 stack of
//! these convolutions commute bitwise with cyclic row shifts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::warp::{self, bilinear_sample};

/// Border handling for convolution inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PadMode {
    /// Wrap-around rows, replicated columns.
    #[default]
    Mixed,
    Zero,
}

/// Pads rows and columns by `margin` on both sides.
pub fn pad(t: &Tensor, margin: usize, mode: PadMode) -> Tensor {
    pad_hw(t, margin, margin, mode)
}

/// Pads `mh` rows above and below and `mw` columns left and right.
pub fn pad_hw(t: &Tensor, mh: usize, mw: usize, mode: PadMode) -> Tensor {
    let [bn, cn, h, w] = t.shape();
    if (mh == 0 && mw == 0) || h == 0 || w == 0 {
        return t.clone();
    }
    let (ph, pw) = (h + 2 * mh, w + 2 * mw);
    let mut out = Tensor::zeros([bn, cn, ph, pw]);
    for n in 0..bn {
        for c in 0..cn {
            let src = t.plane(n, c);
            let dst = out.plane_mut(n, c);
            for py in 0..ph {
                let y = py as isize - mh as isize;
                let sy = match mode {
                    PadMode::Mixed => y.rem_euclid(h as isize) as usize,
                    PadMode::Zero if (0..h as isize).contains(&y) => y as usize,
                    PadMode::Zero => continue,
                };
                let row = &src[sy * w..(sy + 1) * w];
                let drow = &mut dst[py * pw..(py + 1) * pw];
                drow[mw..mw + w].copy_from_slice(row);
                if mode == PadMode::Mixed {
                    drow[..mw].fill(row[0]);
                    drow[mw + w..].fill(row[w - 1]);
                }
            }
        }
    }
    out
}

/// Weights and bias of one 2-D convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `(out_ch, in_ch, kh, kw)`.
    weights: Tensor,
    bias: Vec<f32>,
    stride: usize,
    pad_mode: PadMode,
}

impl ConvParams {
    pub fn new(weights: Tensor, bias: Vec<f32>, stride: usize, pad_mode: PadMode) -> Result<Self> {
        let [oc, ic, kh, kw] = weights.shape();
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidParam(format!("kernel {kh}x{kw} must have odd sides")));
        }
        if stride == 0 {
            return Err(Error::InvalidParam("stride must be at least 1".into()));
        }
        if oc == 0 || ic == 0 {
            return Err(Error::InvalidParam(format!("empty kernel {oc}x{ic}")));
        }
        if bias.len() != oc {
            return Err(Error::ShapeMismatch(format!(
                "bias has {} entries for {oc} output channels",
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            stride,
            pad_mode,
        })
    }

    /// All-zero weights and bias.
    pub fn zeros(out_ch: usize, in_ch: usize, k: usize, pad_mode: PadMode) -> Result<Self> {
        Self::new(Tensor::zeros([out_ch, in_ch, k, k]), vec![0.0; out_ch], 1, pad_mode)
    }

    /// Stride-1 `k x k` kernel with weights `f(o, i, ky, kx)` and zero bias.
    pub fn from_fn(
        out_ch: usize,
        in_ch: usize,
        k: usize,
        pad_mode: PadMode,
        f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        Self::new(Tensor::from_fn([out_ch, in_ch, k, k], f), vec![0.0; out_ch], 1, pad_mode)
    }

    /// `1 x 1` identity mapping on `ch` channels.
    pub fn identity(ch: usize) -> Result<Self> {
        Self::from_fn(ch, ch, 1, PadMode::Mixed, |o, i, _, _| if o == i { 1.0 } else { 0.0 })
    }

    pub fn with_bias(mut self, bias: Vec<f32>) -> Result<Self> {
        if bias.len() != self.out_channels() {
            return Err(Error::ShapeMismatch(format!(
                "bias has {} entries for {} output channels",
                bias.len(),
                self.out_channels()
            )));
        }
        self.bias = bias;
        Ok(self)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidParam("stride must be at least 1".into()));
        }
        self.stride = stride;
        Ok(self)
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn pad_mode(&self) -> PadMode {
        self.pad_mode
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        let s = self.weights.shape();
        (s[2], s[3])
    }

    /// Weights plus biases.
    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }
}

/// Cross-correlation (no kernel flip) over the padded input, padding
/// `(k - 1) / 2` on each side.
///
/// Every output element accumulates bias first, then input channels, kernel
/// rows and kernel columns in that fixed order, so results are bitwise
/// reproducible and independent of where the element sits.
pub fn conv2d(t: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let [bn, cn, h, w] = t.shape();
    let [oc, ic, kh, kw] = p.weights.shape();
    if cn != ic {
        return Err(Error::ShapeMismatch(format!(
            "conv expects {ic} input channels, got {cn}"
        )));
    }
    let padded = pad_hw(t, (kh - 1) / 2, (kw - 1) / 2, p.pad_mode);
    let [_, _, ph, pw] = padded.shape();
    if ph < kh || pw < kw {
        return Err(Error::ShapeMismatch(format!(
            "{h}x{w} input is smaller than the {kh}x{kw} kernel"
        )));
    }
    let s = p.stride;
    let (oh, ow) = ((ph - kh) / s + 1, (pw - kw) / s + 1);
    let mut out = Tensor::zeros([bn, oc, oh, ow]);
    let wdata = p.weights.data();
    for n in 0..bn {
        for o in 0..oc {
            let acc = out.plane_mut(n, o);
            acc.fill(p.bias[o]);
            for i in 0..ic {
                let src = padded.plane(n, i);
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wt = wdata[((o * ic + i) * kh + ky) * kw + kx];
                        for oy in 0..oh {
                            let srow = &src[(oy * s + ky) * pw..];
                            let arow = &mut acc[oy * ow..(oy + 1) * ow];
                            for (ox, a) in arow.iter_mut().enumerate() {
                                *a += wt * srow[ox * s + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Bilinear upsampling by an integer factor, half-pixel aligned
/// (`align_corners = false`), clamping at the edges.
pub fn bilinear_upsample(t: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::InvalidParam("upsample factor must be at least 1".into()));
    }
    if factor == 1 {
        return Ok(t.clone());
    }
    let [bn, cn, h, w] = t.shape();
    let (oh, ow) = (h * factor, w * factor);
    let axis = |out_len: usize, in_len: usize| -> Vec<(usize, usize, f32)> {
        (0..out_len)
            .map(|d| {
                let src = ((d as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
                let i0 = (src as usize).min(in_len - 1);
                let i1 = (i0 + 1).min(in_len - 1);
                (i0, i1, (src - i0 as f64) as f32)
            })
            .collect()
    };
    let (ys, xs) = (axis(oh, h), axis(ow, w));
    let mut out = Tensor::zeros([bn, cn, oh, ow]);
    for n in 0..bn {
        for c in 0..cn {
            let src = t.plane(n, c);
            let dst = out.plane_mut(n, c);
            for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
                for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                    let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
                    let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
                    dst[oy * ow + ox] = top * (1.0 - fy) + bot * fy;
                }
            }
        }
    }
    Ok(out)
}

/// Resamples a Tanh-polar feature map onto a same-sized Tanh-Cartesian
/// raster in one bilinear pass.
pub fn resample_tp_to_tc(feat: &Tensor) -> Result<Tensor> {
    let grid = warp::make_tp_to_tc_grid(feat.height(), feat.width())?;
    bilinear_sample(feat, &grid)
}

/// Resamples a Tanh-Cartesian feature map back onto the Tanh-polar raster.
pub fn resample_tc_to_tp(feat: &Tensor) -> Result<Tensor> {
    let grid = warp::make_tc_to_tp_grid(feat.height(), feat.width())?;
    bilinear_sample(feat, &grid)
}

fn relu(t: Tensor) -> Tensor {
    let mut t = t;
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
    t
}

/// Parameters of one hybrid residual block on `c` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBlockParams {
    /// `1x1`, `c -> c/4`.
    pub reduce: ConvParams,
    /// `3x3`, `c/8 -> c/8`, applied in Tanh-polar space.
    pub tp_branch: ConvParams,
    /// `3x3`, `c/8 -> c/8`, applied in Tanh-Cartesian space.
    pub tc_branch: ConvParams,
    /// `1x1`, `c/4 -> c`.
    pub restore: ConvParams,
    /// Apply ReLU after `reduce` and after `restore`. Off by default.
    pub relu: bool,
}

impl HybridBlockParams {
    /// All-zero parameters for `c` channels: the block is then the identity.
    pub fn zeros(c: usize) -> Result<Self> {
        check_block_channels(c)?;
        Ok(Self {
            reduce: ConvParams::zeros(c / 4, c, 1, PadMode::Mixed)?,
            tp_branch: ConvParams::zeros(c / 8, c / 8, 3, PadMode::Mixed)?,
            tc_branch: ConvParams::zeros(c / 8, c / 8, 3, PadMode::Zero)?,
            restore: ConvParams::zeros(c, c / 4, 1, PadMode::Mixed)?,
            relu: false,
        })
    }

    /// Channel count the block operates on.
    pub fn channels(&self) -> usize {
        self.reduce.in_channels()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        check_block_channels(c)?;
        let expect = [
            ("reduce", &self.reduce, c, c / 4, 1),
            ("tp_branch", &self.tp_branch, c / 8, c / 8, 3),
            ("tc_branch", &self.tc_branch, c / 8, c / 8, 3),
            ("restore", &self.restore, c / 4, c, 1),
        ];
        for (name, p, ic, oc, k) in expect {
            if p.in_channels() != ic || p.out_channels() != oc || p.kernel() != (k, k) || p.stride() != 1 {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {k}x{k} conv {ic} -> {oc} with stride 1, got {:?} {} -> {} stride {}",
                    p.kernel(),
                    p.in_channels(),
                    p.out_channels(),
                    p.stride()
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.reduce.param_count()
            + self.tp_branch.param_count()
            + self.tc_branch.param_count()
            + self.restore.param_count()
    }
}

fn check_block_channels(c: usize) -> Result<()> {
    if c == 0 || !c.is_multiple_of(8) {
        return Err(Error::ShapeMismatch(format!(
            "hybrid block needs a positive multiple of 8 channels, got {c}"
        )));
    }
    Ok(())
}

/// Weights plus biases of a hybrid block on `c` channels.
pub fn hybrid_block_param_count(c: usize) -> usize {
    let (q, e) = (c / 4, c / 8);
    (c * q + q) + 2 * (9 * e * e + e) + (q * c + c)
}

/// Weights plus biases of a plain `1x1 -> 3x3 -> 1x1` bottleneck with the
/// same width and reduction ratio.
pub fn bottleneck_param_count(c: usize) -> usize {
    let q = c / 4;
    (c * q + q) + (9 * q * q + q) + (q * c + c)
}

/// Hybrid residual block:
/// `y = x + restore(concat(tp_branch(a), tc_to_tp(tc_branch(tp_to_tc(b)))))`
/// where `(a, b)` are the two channel halves of `reduce(x)`.
pub fn hybrid_block_forward(x: &Tensor, p: &HybridBlockParams) -> Result<Tensor> {
    p.validate()?;
    if x.channels() != p.channels() {
        return Err(Error::ShapeMismatch(format!(
            "block expects {} channels, got {}",
            p.channels(),
            x.channels()
        )));
    }
    let mut reduced = conv2d(x, &p.reduce)?;
    if p.relu {
        reduced = relu(reduced);
    }
    let half = reduced.channels() / 2;
    let tp_in = reduced.slice_channels(0, half)?;
    let tc_in = reduced.slice_channels(half, half)?;

    let tp_out = conv2d(&tp_in, &p.tp_branch)?;
    let tc_out = resample_tc_to_tp(&conv2d(&resample_tp_to_tc(&tc_in)?, &p.tc_branch)?)?;

    let mut residual = conv2d(&Tensor::concat_channels(&[&tp_out, &tc_out])?, &p.restore)?;
    if p.relu {
        residual = relu(residual);
    }
    x.add(&residual)
}

/// Two convolutions followed by bilinear upsampling to per-pixel logits.
pub fn fcn_head_forward(
    feat: &Tensor,
    conv1: &ConvParams,
    conv2: &ConvParams,
    upsample_factor: usize,
) -> Result<Tensor> {
    let hidden = conv2d(feat, conv1)?;
    let logits = conv2d(&hidden, conv2)?;
    bilinear_upsample(&logits, upsample_factor)
}
