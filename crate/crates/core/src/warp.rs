//! Sampling grids and bilinear resampling between Cartesian images and the
//! Tanh-polar / Tanh-Cartesian rasters.
//!
//! Raster conventions:
//!
//! - Tanh-polar raster of `H x W`: row `i` holds angle
//!   `-pi + 2 pi (i + 0.5) / H`, column `j` holds radius `(j + 0.5) / W`.
//!   The row axis is periodic.
//! - Tanh-Cartesian raster of `H x W`: column `n` holds
//!   `u1 = -1 + 2 (n + 0.5) / W`, row `m` holds `u2 = -1 + 2 (m + 0.5) / H`.
//! - Cartesian image pixel `(m, n)` has its center at the continuous point
//!   `(n + 0.5, m + 0.5)`.
//!
//! Every [`SamplingGrid`] stores *fractional pixel indices* into its source
//! raster: `(sx, sy) = (col, row)`, with pixel centers at integers.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, fit_ellipse, BBox, PolarCoord, TCCoord};
use crate::mask::LabelMask;
use crate::math;
use crate::tensor::Tensor;

/// Default Tanh-polar raster size.
pub const DEFAULT_SIZE: usize = 512;

/// How taps that fall outside the source raster are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BorderPolicy {
    /// Out-of-bounds taps read as zero.
    #[default]
    Zero,
    /// Out-of-bounds taps read the nearest edge pixel.
    Replicate,
}

/// Which resampling a grid performs, named source-to-destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridDirection {
    /// Cartesian image to Tanh-polar raster.
    Forward,
    /// Tanh-polar raster to Cartesian image.
    Inverse,
    /// Tanh-polar raster to Tanh-Cartesian raster.
    TpToTc,
    /// Tanh-Cartesian raster to Tanh-polar raster.
    TcToTp,
    /// Anything built with [`SamplingGrid::from_fn`].
    Custom,
}

/// Per-output-pixel source coordinates for one warp.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    height: usize,
    width: usize,
    coords: Vec<(f64, f64)>,
    border: BorderPolicy,
    wrap_rows: bool,
    direction: GridDirection,
}

impl SamplingGrid {
    /// Builds a grid from `f(row, col) -> (sx, sy)`.
    ///
    /// With `wrap_rows` set, source row indices are taken modulo the source
    /// height before blending, so the first and last rows are neighbours.
    pub fn from_fn(
        height: usize,
        width: usize,
        border: BorderPolicy,
        wrap_rows: bool,
        mut f: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Result<Self> {
        let mut coords = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                let (sx, sy) = f(i, j);
                if !(sx.is_finite() && sy.is_finite()) {
                    return Err(Error::OutOfRange(format!(
                        "non-finite source coordinate at ({i}, {j})"
                    )));
                }
                coords.push((sx, sy));
            }
        }
        Ok(Self {
            height,
            width,
            coords,
            border,
            wrap_rows,
            direction: GridDirection::Custom,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn get(&self, row: usize, col: usize) -> (f64, f64) {
        self.coords[row * self.width + col]
    }

    pub fn border(&self) -> BorderPolicy {
        self.border
    }

    pub fn with_border(mut self, border: BorderPolicy) -> Self {
        self.border = border;
        self
    }

    pub fn wraps_rows(&self) -> bool {
        self.wrap_rows
    }

    pub fn direction(&self) -> GridDirection {
        self.direction
    }

    fn tagged(mut self, direction: GridDirection) -> Self {
        self.direction = direction;
        self
    }
}

fn check_dims(pairs: &[(&str, usize)]) -> Result<()> {
    for &(name, v) in pairs {
        if v < 2 {
            return Err(Error::InvalidSize(format!("{name} = {v}, must be at least 2")));
        }
    }
    Ok(())
}

/// Angle held by row `i` of an `h`-row Tanh-polar raster.
#[inline]
pub fn tp_row_angle(i: usize, h: usize) -> f64 {
    -PI + 2.0 * PI * (i as f64 + 0.5) / h as f64
}

/// Radius held by column `j` of a `w`-column Tanh-polar raster.
#[inline]
pub fn tp_col_rho(j: usize, w: usize) -> f64 {
    (j as f64 + 0.5) / w as f64
}

/// Fractional `(col, row)` of a Tanh-polar coordinate in an `h x w` raster.
/// The column is clamped to `[-0.5, w - 0.5]`.
#[inline]
pub fn tp_fractional_index(c: PolarCoord, h: usize, w: usize) -> (f64, f64) {
    let row = (c.theta + PI) / (2.0 * PI) * h as f64 - 0.5;
    let col = (c.rho * w as f64 - 0.5).clamp(-0.5, w as f64 - 0.5);
    (col, row)
}

/// `u` held by index `k` of an `n`-long Tanh-Cartesian axis.
#[inline]
pub fn tc_axis_value(k: usize, n: usize) -> f64 {
    -1.0 + 2.0 * (k as f64 + 0.5) / n as f64
}

/// Fractional `(col, row)` of a Tanh-Cartesian coordinate in an `h x w`
/// raster.
#[inline]
pub fn tc_fractional_index(c: TCCoord, h: usize, w: usize) -> (f64, f64) {
    (
        (c.u1 + 1.0) / 2.0 * w as f64 - 0.5,
        (c.u2 + 1.0) / 2.0 * h as f64 - 0.5,
    )
}

/// Grid that samples a Cartesian image onto an `h x w` Tanh-polar raster.
pub fn make_forward_grid(bbox: &BBox, h: usize, w: usize) -> Result<SamplingGrid> {
    check_dims(&[("H", h), ("W", w)])?;
    let e = fit_ellipse(bbox);
    let rhos: Vec<f64> = (0..w).map(|j| tp_col_rho(j, w)).collect();
    let mut coords = Vec::with_capacity(h * w);
    for i in 0..h {
        let theta = tp_row_angle(i, h);
        for &rho in &rhos {
            let (x, y) = e.from_tanh_polar(PolarCoord { theta, rho })?;
            coords.push((x - 0.5, y - 0.5));
        }
    }
    Ok(SamplingGrid {
        height: h,
        width: w,
        coords,
        border: BorderPolicy::Zero,
        wrap_rows: false,
        direction: GridDirection::Forward,
    })
}

/// Grid that samples an `src_h x src_w` Tanh-polar raster back onto an
/// `out_h x out_w` Cartesian image.
pub fn make_inverse_grid(
    bbox: &BBox,
    out_h: usize,
    out_w: usize,
    src_h: usize,
    src_w: usize,
) -> Result<SamplingGrid> {
    check_dims(&[("outH", out_h), ("outW", out_w), ("srcH", src_h), ("srcW", src_w)])?;
    let e = fit_ellipse(bbox);
    let grid = SamplingGrid::from_fn(out_h, out_w, BorderPolicy::Replicate, true, |m, n| {
        let c = e.to_tanh_polar((n as f64 + 0.5, m as f64 + 0.5));
        tp_fractional_index(c, src_h, src_w)
    })?;
    Ok(grid.tagged(GridDirection::Inverse))
}

/// Grid that resamples an `h x w` Tanh-polar raster onto an `h x w`
/// Tanh-Cartesian raster through the bbox-free inter-grid map.
pub fn make_tp_to_tc_grid(h: usize, w: usize) -> Result<SamplingGrid> {
    check_dims(&[("H", h), ("W", w)])?;
    let mut err = None;
    let grid = SamplingGrid::from_fn(h, w, BorderPolicy::Replicate, true, |m, n| {
        let tc = TCCoord {
            u1: tc_axis_value(n, w),
            u2: tc_axis_value(m, h),
        };
        match geometry::tc_to_tp(tc) {
            Ok(c) => tp_fractional_index(c, h, w),
            Err(e) => {
                err.get_or_insert(e);
                (0.0, 0.0)
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(grid.tagged(GridDirection::TpToTc)),
    }
}

/// Grid that resamples an `h x w` Tanh-Cartesian raster onto an `h x w`
/// Tanh-polar raster.
pub fn make_tc_to_tp_grid(h: usize, w: usize) -> Result<SamplingGrid> {
    check_dims(&[("H", h), ("W", w)])?;
    let mut err = None;
    let grid = SamplingGrid::from_fn(h, w, BorderPolicy::Replicate, false, |i, j| {
        let c = PolarCoord {
            theta: tp_row_angle(i, h),
            rho: tp_col_rho(j, w),
        };
        match geometry::tp_to_tc(c) {
            Ok(tc) => tc_fractional_index(tc, h, w),
            Err(e) => {
                err.get_or_insert(e);
                (0.0, 0.0)
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(grid.tagged(GridDirection::TcToTp)),
    }
}

/// Four source taps and their weights for one output pixel. A tap index of
/// `usize::MAX` reads as zero.
#[derive(Clone, Copy)]
struct Taps {
    idx: [usize; 4],
    wt: [f64; 4],
}

const ZERO_TAP: usize = usize::MAX;

fn resolve(i: i64, n: usize, wrap: bool, border: BorderPolicy) -> usize {
    let n_i = n as i64;
    if wrap {
        return i.rem_euclid(n_i) as usize;
    }
    if (0..n_i).contains(&i) {
        return i as usize;
    }
    match border {
        BorderPolicy::Zero => ZERO_TAP,
        BorderPolicy::Replicate => i.clamp(0, n_i - 1) as usize,
    }
}

fn taps_for(grid: &SamplingGrid, src_h: usize, src_w: usize) -> Vec<Taps> {
    grid.coords
        .iter()
        .map(|&(sx, sy)| {
            let (x0, y0) = (math::floor(sx), math::floor(sy));
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let cols = [
                resolve(x0, src_w, false, grid.border),
                resolve(x0 + 1, src_w, false, grid.border),
            ];
            let rows = [
                resolve(y0, src_h, grid.wrap_rows, grid.border),
                resolve(y0 + 1, src_h, grid.wrap_rows, grid.border),
            ];
            let at = |r: usize, c: usize| {
                if r == ZERO_TAP || c == ZERO_TAP {
                    ZERO_TAP
                } else {
                    r * src_w + c
                }
            };
            Taps {
                idx: [
                    at(rows[0], cols[0]),
                    at(rows[0], cols[1]),
                    at(rows[1], cols[0]),
                    at(rows[1], cols[1]),
                ],
                wt: [
                    (1.0 - fx) * (1.0 - fy),
                    fx * (1.0 - fy),
                    (1.0 - fx) * fy,
                    fx * fy,
                ],
            }
        })
        .collect()
}

/// Bilinear resampling of every plane of `img` through `grid`.
///
/// The output has the batch and channel count of `img` and the spatial size
/// of `grid`.
pub fn bilinear_sample(img: &Tensor, grid: &SamplingGrid) -> Result<Tensor> {
    let [bn, cn, src_h, src_w] = img.shape();
    if src_h == 0 || src_w == 0 {
        return Err(Error::InvalidSize(format!("empty source raster {src_h}x{src_w}")));
    }
    let taps = taps_for(grid, src_h, src_w);
    let mut out = Tensor::zeros([bn, cn, grid.height, grid.width]);
    for n in 0..bn {
        for c in 0..cn {
            let src = img.plane(n, c);
            let dst = out.plane_mut(n, c);
            for (o, t) in dst.iter_mut().zip(&taps) {
                let mut acc = 0.0f64;
                for k in 0..4 {
                    // Zero-weight taps are skipped so exact hits copy bitwise.
                    if t.idx[k] != ZERO_TAP && t.wt[k] != 0.0 {
                        acc += t.wt[k] * f64::from(src[t.idx[k]]);
                    }
                }
                *o = acc as f32;
            }
        }
    }
    Ok(out)
}

/// Warps a Cartesian image onto an `h x w` Tanh-polar raster, reading zeros
/// beyond the image.
pub fn warp_image(img: &Tensor, bbox: &BBox, h: usize, w: usize) -> Result<Tensor> {
    warp_image_with(img, bbox, h, w, BorderPolicy::Zero)
}

pub fn warp_image_with(
    img: &Tensor,
    bbox: &BBox,
    h: usize,
    w: usize,
    border: BorderPolicy,
) -> Result<Tensor> {
    let grid = make_forward_grid(bbox, h, w)?.with_border(border);
    bilinear_sample(img, &grid)
}

/// Maps Tanh-polar score maps back to an `out_h x out_w` Cartesian image.
///
/// Rows wrap across the angular seam; radii past the last column replicate
/// it.
pub fn unwarp_scores(scores: &Tensor, bbox: &BBox, out_h: usize, out_w: usize) -> Result<Tensor> {
    let grid = make_inverse_grid(bbox, out_h, out_w, scores.height(), scores.width())?;
    bilinear_sample(scores, &grid)
}

/// Per-pixel argmax over channels of a single-batch tensor. Ties go to the
/// lowest class index.
pub fn argmax_channels(scores: &Tensor) -> Result<LabelMask> {
    let [bn, cn, h, w] = scores.shape();
    if bn != 1 {
        return Err(Error::ShapeMismatch(format!("argmax needs batch 1, got {bn}")));
    }
    if !(2..=crate::mask::MAX_CLASSES).contains(&cn) {
        return Err(Error::ShapeMismatch(format!(
            "argmax needs 2..={} channels, got {cn}",
            crate::mask::MAX_CLASSES
        )));
    }
    let hw = h * w;
    let data = scores.data();
    let labels = (0..hw)
        .map(|p| {
            let mut best = 0;
            let mut best_v = data[p];
            for c in 1..cn {
                let v = data[c * hw + p];
                if v > best_v {
                    best = c;
                    best_v = v;
                }
            }
            best as u8
        })
        .collect();
    LabelMask::new(h, w, cn, labels)
}

/// Unwarps class scores and takes the per-pixel argmax.
pub fn unwarp_labels(scores: &Tensor, bbox: &BBox, out_h: usize, out_w: usize) -> Result<LabelMask> {
    argmax_channels(&unwarp_scores(scores, bbox, out_h, out_w)?)
}

/// Random bounding-box jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Center shift bound as a fraction of the box width / height.
    pub max_shift_frac: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            max_shift_frac: 0.1,
            scale_lo: 0.9,
            scale_hi: 1.1,
            seed: 0,
        }
    }
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            max_shift_frac: 0.0,
            scale_lo: 1.0,
            scale_hi: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.max_shift_frac) {
            return Err(Error::InvalidParam(format!(
                "max_shift_frac = {} outside [0, 1)",
                self.max_shift_frac
            )));
        }
        if !(self.scale_lo > 0.0 && self.scale_lo <= self.scale_hi && self.scale_hi.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "scale range [{}, {}] must satisfy 0 < lo <= hi",
                self.scale_lo, self.scale_hi
            )));
        }
        Ok(())
    }
}

/// Shift and scale drawn for one augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    /// Center shift in units of box width / height.
    pub shift: (f64, f64),
    pub scale: f64,
}

/// The draw used by [`augment_bbox`] for `(params.seed, draw_index)`.
pub fn augment_draw(params: &AugmentParams, draw_index: u64) -> Result<AugmentDraw> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(draw_index);
    let (ux, uy, us): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let m = params.max_shift_frac;
    Ok(AugmentDraw {
        shift: (m * (2.0 * ux - 1.0), m * (2.0 * uy - 1.0)),
        scale: params.scale_lo + (params.scale_hi - params.scale_lo) * us,
    })
}

/// Shifts the box center by up to `max_shift_frac * (w, h)` and scales its
/// size by a factor in `[scale_lo, scale_hi]` about the shifted center.
/// Deterministic in `(seed, draw_index)`.
pub fn augment_bbox(bbox: &BBox, params: &AugmentParams, draw_index: u64) -> Result<BBox> {
    let d = augment_draw(params, draw_index)?;
    let (w, h) = (bbox.w(), bbox.h());
    // Written so that a zero shift and unit scale reproduce the box bitwise.
    BBox::new(
        bbox.x() + d.shift.0 * w + 0.5 * w * (1.0 - d.scale),
        bbox.y() + d.shift.1 * h + 0.5 * h * (1.0 - d.scale),
        w * d.scale,
        h * d.scale,
    )
}

/// Element-wise mean of same-shaped score maps.
pub fn tta_average(maps: &[Tensor]) -> Result<Tensor> {
    let first = maps.first().ok_or(Error::Empty("score map list"))?;
    for m in &maps[1..] {
        first.check_same_shape(m)?;
    }
    let mut acc: Vec<f64> = first.data().iter().map(|&v| f64::from(v)).collect();
    for m in &maps[1..] {
        for (a, &v) in acc.iter_mut().zip(m.data()) {
            *a += f64::from(v);
        }
    }
    let k = maps.len() as f64;
    Tensor::new(first.shape(), acc.into_iter().map(|a| (a / k) as f32).collect())
}
