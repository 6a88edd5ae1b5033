//! Invariant suites run by `tanhpolar check`.
//!
//! Every check draws its inputs from a fixed-seed generator, so a suite
//! either always passes or always fails on a given build.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tanhpolar::geometry::{
    self, angle_diff, fit_ellipse, radius_at, rotate_about, BBox, PolarCoord, TCCoord, FACE_RHO,
};
use tanhpolar::metrics::{self, ConfusionMatrix, LossWeights, RegionGroups};
use tanhpolar::nn::{self, ConvParams, HybridBlockParams, PadMode};
use tanhpolar::warp::{self, AugmentParams};
use tanhpolar::{LabelMask, Tensor};

use crate::error::{CliError, Result};
use crate::formats::grid::{DumpDirection, GridDump};
use crate::formats::png;
use crate::formats::raw::RawTensor;

/// `Ok(detail)` on success, `Err(reason)` on failure.
pub type Outcome = std::result::Result<String, String>;

pub const SUITES: [&str; 5] = ["geometry", "warp", "nnkernel", "metrics", "formats"];

#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub run: fn() -> Outcome,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub outcome: Outcome,
    pub elapsed: Duration,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

macro_rules! checks {
    ($($suite:literal : [$($f:ident),* $(,)?]),* $(,)?) => {
        /// Every registered check, grouped by suite.
        pub fn all() -> Vec<Check> {
            vec![$($(Check { suite: $suite, name: stringify!($f), run: $f }),*),*]
        }
    };
}

checks! {
    "geometry": [
        face_rho_boundary,
        polar_round_trip,
        inter_grid_round_trip,
        rotation_square_boxes,
        rotation_half_turn,
        scale_invariance,
        direct_map,
    ],
    "warp": [
        face_columns_512,
        face_column_count,
        grid_composition,
        warp_unwarp_psnr,
        upsampled_warp_agreement,
        augment_identity,
        augment_bounds,
    ],
    "nnkernel": [
        zero_block_identity,
        block_shapes,
        block_param_count,
        conv_row_rotation,
        mixed_pad_layout,
        fcn_head_shapes,
    ],
    "metrics": [
        f1_iou_identity,
        loss_oracles,
        lambda_affinity,
        region_merge,
    ],
    "formats": [
        raw_round_trip,
        grid_dump_round_trip,
        png_round_trip,
    ],
}

/// Checks of one suite, or of every suite for `"all"`.
pub fn select(suite: &str) -> Result<Vec<Check>> {
    if suite == "all" {
        return Ok(all());
    }
    if !SUITES.contains(&suite) {
        return Err(CliError::Usage(format!(
            "unknown suite {suite:?}; available: {}, all",
            SUITES.join(", ")
        )));
    }
    Ok(all().into_iter().filter(|c| c.suite == suite).collect())
}

pub fn find(name: &str) -> Option<Check> {
    all().into_iter().find(|c| c.name == name)
}

pub fn run_one(check: &Check) -> CheckResult {
    let start = Instant::now();
    let outcome = (check.run)();
    CheckResult {
        suite: check.suite,
        name: check.name,
        outcome,
        elapsed: start.elapsed(),
    }
}

/// Runs `checks`, printing one table row per check to `out`.
pub fn run(checks: &[Check], out: &mut impl Write) -> std::io::Result<Vec<CheckResult>> {
    let mut results = Vec::with_capacity(checks.len());
    writeln!(out, "{:<9} {:<26} {:<6} {:>9}  detail", "suite", "check", "result", "ms")?;
    for c in checks {
        let r = run_one(c);
        let (status, detail) = match &r.outcome {
            Ok(d) => ("pass", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        writeln!(
            out,
            "{:<9} {:<26} {:<6} {:>9.1}  {detail}",
            r.suite,
            r.name,
            status,
            r.elapsed.as_secs_f64() * 1e3
        )?;
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    writeln!(out, "{} passed, {failed} failed", results.len() - failed)?;
    Ok(results)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_bbox(r: &mut impl Rng) -> BBox {
    BBox::new(
        r.random_range(-200.0..400.0),
        r.random_range(-200.0..400.0),
        r.random_range(4.0..300.0),
        r.random_range(4.0..300.0),
    )
    .expect("positive size")
}

/// A point `r_norm` ellipse radii from the box center in direction `theta`.
fn point_near(b: &BBox, theta: f64, r_norm: f64) -> (f64, f64) {
    let e = fit_ellipse(b);
    let r = radius_at(&e, theta) * r_norm;
    (e.cx + r * theta.cos(), e.cy + r * theta.sin())
}

fn random_tensor(shape: [usize; 4], r: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| r.random_range(-1.0..1.0))
}

fn random_conv(oc: usize, ic: usize, k: usize, mode: PadMode, r: &mut impl Rng) -> ConvParams {
    let w = random_tensor([oc, ic, k, k], r);
    let bias = (0..oc).map(|_| r.random_range(-0.5..0.5)).collect();
    ConvParams::new(w, bias, 1, mode).expect("valid conv")
}

fn random_block(c: usize, r: &mut impl Rng) -> HybridBlockParams {
    HybridBlockParams {
        reduce: random_conv(c / 4, c, 1, PadMode::Mixed, r),
        tp_branch: random_conv(c / 8, c / 8, 3, PadMode::Mixed, r),
        tc_branch: random_conv(c / 8, c / 8, 3, PadMode::Zero, r),
        restore: random_conv(c, c / 4, 1, PadMode::Mixed, r),
        relu: r.random(),
    }
}

fn bits_equal(a: &Tensor, b: &Tensor) -> bool {
    a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// geometry

fn face_rho_boundary() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let b = random_bbox(&mut r);
        for k in 0..360 {
            let theta = wrap(f64::from(k) * PI / 180.0);
            let c = geometry::to_tanh_polar(point_near(&b, theta, 1.0), &b);
            worst = worst.max((c.rho - FACE_RHO).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max |rho - tanh 1| = {worst:e}"))?;
    Ok(format!("1000 boxes x 360 angles, max |rho - tanh 1| = {worst:.1e}"))
}

fn wrap(theta: f64) -> f64 {
    geometry::wrap_angle(theta)
}

fn polar_round_trip() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let b = random_bbox(&mut r);
        let p = point_near(&b, r.random_range(-PI..PI), r.random_range(0.0..4.0));
        let q = geometry::from_tanh_polar(geometry::to_tanh_polar(p, &b), &b).map_err(err)?;
        worst = worst.max((p.0 - q.0).abs()).max((p.1 - q.1).abs());
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e} px"))?;
    Ok(format!("1e5 points, max error {worst:.1e} px"))
}

fn inter_grid_round_trip() -> Outcome {
    let mut r = rng(3);
    let (mut worst_tp, mut worst_tc) = (0.0f64, 0.0f64);
    for _ in 0..100_000 {
        let c = PolarCoord {
            theta: r.random_range(-PI..PI),
            rho: r.random_range(0.0..0.999),
        };
        let back = geometry::tc_to_tp(geometry::tp_to_tc(c).map_err(err)?).map_err(err)?;
        let dtheta = if c.rho > 1e-6 { angle_diff(back.theta, c.theta).abs() } else { 0.0 };
        worst_tp = worst_tp.max((back.rho - c.rho).abs()).max(dtheta);

        let u = TCCoord {
            u1: r.random_range(-0.999..0.999),
            u2: r.random_range(-0.999..0.999),
        };
        let back = geometry::tp_to_tc(geometry::tc_to_tp(u).map_err(err)?).map_err(err)?;
        worst_tc = worst_tc.max((back.u1 - u.u1).abs()).max((back.u2 - u.u2).abs());
    }
    ensure(worst_tp <= 1e-9 && worst_tc <= 1e-9, || {
        format!("max error tp->tc->tp {worst_tp:e}, tc->tp->tc {worst_tc:e}")
    })?;
    Ok(format!("1e5 each way, max errors {worst_tp:.1e} / {worst_tc:.1e}"))
}

fn rotation_square_boxes() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let s = r.random_range(4.0..300.0);
        let b = BBox::from_center(r.random_range(-100.0..300.0), r.random_range(-100.0..300.0), s, s)
            .map_err(err)?;
        let p = point_near(&b, r.random_range(-PI..PI), r.random_range(0.01..4.0));
        let phi = r.random_range(-2.0 * PI..2.0 * PI);
        let q = rotate_about(p, b.center(), phi);
        let (u, v) = (geometry::to_tanh_polar(p, &b), geometry::to_tanh_polar(q, &b));
        worst = worst
            .max((u.rho - v.rho).abs())
            .max(angle_diff(v.theta, u.theta + phi).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("1e4 (point, angle) pairs, max deviation {worst:.1e}"))
}

fn rotation_half_turn() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let b = random_bbox(&mut r);
        let p = point_near(&b, r.random_range(-PI..PI), r.random_range(0.01..4.0));
        let q = rotate_about(p, b.center(), PI);
        let (u, v) = (geometry::to_tanh_polar(p, &b), geometry::to_tanh_polar(q, &b));
        worst = worst
            .max((u.rho - v.rho).abs())
            .max(angle_diff(v.theta, u.theta + PI).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("1e4 points on arbitrary boxes, max deviation {worst:.1e}"))
}

fn scale_invariance() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for k in [0.1, 0.5, 2.0, 10.0] {
        for _ in 0..10_000 {
            let b = random_bbox(&mut r);
            let p = point_near(&b, r.random_range(-PI..PI), r.random_range(0.01..4.0));
            let bk = b.scaled(k).map_err(err)?;
            let (u, v) = (geometry::to_tanh_polar(p, &b), geometry::to_tanh_polar((k * p.0, k * p.1), &bk));
            worst = worst.max((u.rho - v.rho).abs()).max(angle_diff(u.theta, v.theta).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("k in {{0.1, 0.5, 2, 10}} x 1e4 points, max deviation {worst:.1e}"))
}

fn direct_map() -> Outcome {
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let b = random_bbox(&mut r);
        for _ in 0..10_000 {
            let c = PolarCoord {
                theta: r.random_range(-PI..PI),
                rho: r.random_range(0.0..0.999),
            };
            let direct = geometry::tp_to_tc(c).map_err(err)?;
            let via = geometry::to_tanh_cartesian(geometry::from_tanh_polar(c, &b).map_err(err)?, &b);
            worst = worst.max((direct.u1 - via.u1).abs()).max((direct.u2 - via.u2).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("10 boxes x 1e4 coords, max deviation {worst:.1e}"))
}

// warp

fn face_columns_512() -> Outcome {
    let inside = (0..512).filter(|&j| warp::tp_col_rho(j, 512) < FACE_RHO).count();
    ensure(inside == 390, || format!("{inside} columns inside the face at W=512, expected 390"))?;
    Ok("390 of 512 columns inside the face".into())
}

fn face_column_count() -> Outcome {
    for w in 2..=4096usize {
        let inside = (0..w).filter(|&j| warp::tp_col_rho(j, w) < FACE_RHO).count();
        let expected = (FACE_RHO * w as f64 - 0.5).ceil() as usize;
        ensure(inside == expected, || format!("W={w}: {inside} columns, expected {expected}"))?;
    }
    Ok("W = 2..=4096 match ceil(tanh(1) W - 1/2)".into())
}

/// Evaluates the tp->tc grid's analytic map at a fractional Tanh-Cartesian
/// index, giving a fractional Tanh-polar index.
fn tp_index_of_tc_index(x: f64, y: f64, h: usize, w: usize) -> std::result::Result<(f64, f64), String> {
    let u = TCCoord {
        u1: (x + 0.5) / w as f64 * 2.0 - 1.0,
        u2: (y + 0.5) / h as f64 * 2.0 - 1.0,
    };
    Ok(warp::tp_fractional_index(geometry::tc_to_tp(u).map_err(err)?, h, w))
}

/// Largest distance between `(col, row)` and the composition of the tc->tp
/// grid with the tp->tc map, rows compared modulo `h`.
pub fn composition_error(
    h: usize,
    w: usize,
    tc_index_of: impl Fn(usize, usize) -> (f64, f64),
) -> std::result::Result<f64, String> {
    let mut worst = 0.0f64;
    for i in 0..h {
        for j in 0..w {
            let (x, y) = tc_index_of(i, j);
            let (col, row) = tp_index_of_tc_index(x, y, h, w)?;
            let drow = (row - i as f64).rem_euclid(h as f64);
            worst = worst.max((col - j as f64).abs()).max(drow.min(h as f64 - drow));
        }
    }
    Ok(worst)
}

fn grid_composition() -> Outcome {
    let mut worst = 0.0f64;
    for (h, w) in [(64, 64), (96, 40), (512, 512)] {
        let tc2tp = warp::make_tc_to_tp_grid(h, w).map_err(err)?;
        worst = worst.max(composition_error(h, w, |i, j| tc2tp.get(i, j))?);
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e} px"))?;
    Ok(format!("tc2tp then tp2tc is the identity, max deviation {worst:.1e} px"))
}

/// Smooth test pattern in `[0.05, 0.95]` with detail down to a period of
/// about 30 px.
pub fn smooth_pattern(x: f64, y: f64, scale: f64) -> f64 {
    let (x, y) = (x / scale, y / scale);
    0.5 + 0.2 * (x / 23.0).sin() * (y / 31.0).cos()
        + 0.15 * ((x + y) / 47.0).sin()
        + 0.1 * (x / 4.7 - y / 5.3).sin()
}

/// f64 bilinear read of a row-major plane; taps outside read `outside`.
fn oracle_tap(img: &[f64], w: usize, x: f64, y: f64, outside: impl Fn(isize, isize) -> Option<f64>) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let mut acc = 0.0;
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            let (ix, iy) = (x0 as isize + dx, y0 as isize + dy);
            let v = match outside(ix, iy) {
                Some(v) => v,
                None => img[iy as usize * w + ix as usize],
            };
            acc += wx * wy * v;
        }
    }
    acc
}

/// Warp then unwarp of a `size x size` smooth image through an f64 pipeline
/// written from the coordinate definitions alone. Returns
/// `(original, round_trip, inside_ellipse)` per pixel.
pub fn reference_round_trip(size: usize, b: &BBox) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let (n, tn) = (size, size);
    let (cx, cy) = (b.x() + b.w() / 2.0, b.y() + b.h() / 2.0);
    let (a, bb) = (0.5 * b.w() / PI.sqrt(), 0.5 * b.h() / PI.sqrt());
    let img: Vec<f64> = (0..n * n)
        .map(|k| smooth_pattern((k % n) as f64 + 0.5, (k / n) as f64 + 0.5, 1.0))
        .collect();
    let zero = |ix: isize, iy: isize| {
        (ix < 0 || iy < 0 || ix >= n as isize || iy >= n as isize).then_some(0.0)
    };
    let mut polar = vec![0.0; tn * tn];
    for i in 0..tn {
        let theta = -PI + 2.0 * PI * (i as f64 + 0.5) / tn as f64;
        let (s, c) = theta.sin_cos();
        let radius = a * bb / ((bb * c).powi(2) + (a * s).powi(2)).sqrt();
        for j in 0..tn {
            let rho = (j as f64 + 0.5) / tn as f64;
            let r = rho.atanh() * radius;
            let (x, y) = (cx + r * c, cy + r * s);
            polar[i * tn + j] = oracle_tap(&img, n, x - 0.5, y - 0.5, zero);
        }
    }
    let mut back = vec![0.0; n * n];
    let mut inside = vec![false; n * n];
    for m in 0..n {
        for k in 0..n {
            let (dx, dy) = (k as f64 + 0.5 - cx, m as f64 + 0.5 - cy);
            let rn = ((dx / a).powi(2) + (dy / bb).powi(2)).sqrt();
            inside[m * n + k] = rn < 1.0;
            let theta = dy.atan2(dx);
            let row = (theta + PI) / (2.0 * PI) * tn as f64 - 0.5;
            let col = (rn.tanh() * tn as f64 - 0.5).clamp(0.0, tn as f64 - 1.0);
            let wrap_rep = |ix: isize, iy: isize| {
                let iy = iy.rem_euclid(tn as isize) as usize;
                let ix = ix.clamp(0, tn as isize - 1) as usize;
                Some(polar[iy * tn + ix])
            };
            back[m * n + k] = oracle_tap(&polar, tn, col, row, wrap_rep);
        }
    }
    (img, back, inside)
}

pub fn psnr(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    let (mut se, mut count) = (0.0, 0usize);
    for ((x, y), &m) in a.iter().zip(b).zip(mask) {
        if m {
            se += (x - y).powi(2);
            count += 1;
        }
    }
    10.0 * (count as f64 / se).log10()
}

/// The library warp then unwarp at `size`, compared against the original.
/// Returns `(library PSNR, reference PSNR, max |library - reference|)`.
pub fn library_round_trip(size: usize, b: &BBox) -> std::result::Result<(f64, f64, f64), String> {
    let (orig, reference, inside) = reference_round_trip(size, b);
    let img = Tensor::from_fn([1, 1, size, size], |_, _, y, x| orig[y * size + x] as f32);
    let polar = warp::warp_image(&img, b, size, size).map_err(err)?;
    let back = warp::unwarp_scores(&polar, b, size, size).map_err(err)?;
    let back: Vec<f64> = back.data().iter().map(|&v| f64::from(v)).collect();
    let orig32: Vec<f64> = img.data().iter().map(|&v| f64::from(v)).collect();
    let gap = back
        .iter()
        .zip(&reference)
        .zip(&inside)
        .filter(|(_, &m)| m)
        .map(|((x, y), _)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok((psnr(&orig32, &back, &inside), psnr(&orig, &reference, &inside), gap))
}

fn warp_unwarp_psnr() -> Outcome {
    let b = BBox::new(106.0, 106.0, 300.0, 300.0).map_err(err)?;
    let (lib, reference, gap) = library_round_trip(512, &b)?;
    ensure(lib >= 35.0, || format!("interior PSNR {lib:.2} dB below 35 (reference {reference:.2} dB)"))?;
    ensure(gap < 1e-4, || format!("library deviates from the f64 reference by {gap:e}"))?;
    Ok(format!("512^2 interior PSNR {lib:.2} dB (f64 reference {reference:.2} dB)"))
}

/// Mean absolute difference between the warps of a smooth image and of its
/// 2x bilinear upsampling with a 2x box.
pub fn upsampled_warp_gap(size: usize, b: &BBox) -> std::result::Result<f64, String> {
    let img = Tensor::from_fn([1, 1, size, size], |_, _, y, x| {
        smooth_pattern(x as f64 + 0.5, y as f64 + 0.5, 1.0) as f32
    });
    let up = nn::bilinear_upsample(&img, 2).map_err(err)?;
    let a = warp::warp_image(&img, b, size, size).map_err(err)?;
    let c = warp::warp_image(&up, &b.scaled(2.0).map_err(err)?, size, size).map_err(err)?;
    let sum: f64 = a.data().iter().zip(c.data()).map(|(x, y)| f64::from((x - y).abs())).sum();
    Ok(sum / a.data().len() as f64)
}

fn upsampled_warp_agreement() -> Outcome {
    let b = BBox::new(64.0, 64.0, 128.0, 128.0).map_err(err)?;
    let gap = upsampled_warp_gap(256, &b)?;
    ensure(gap < 3.0 / 255.0, || format!("mean abs diff {:.3}/255", gap * 255.0))?;
    Ok(format!("mean abs diff {:.3}/255", gap * 255.0))
}

fn augment_identity() -> Outcome {
    let mut r = rng(8);
    for k in 0..1000 {
        let b = random_bbox(&mut r);
        let p = AugmentParams {
            seed: r.random(),
            ..AugmentParams::identity()
        };
        let out = warp::augment_bbox(&b, &p, k).map_err(err)?;
        ensure(out == b, || format!("identity params moved {b:?} to {out:?}"))?;
    }
    Ok("1000 boxes unchanged bitwise".into())
}

fn augment_bounds() -> Outcome {
    let mut r = rng(9);
    let p = AugmentParams {
        seed: 42,
        ..AugmentParams::default()
    };
    for k in 0..10_000 {
        let b = random_bbox(&mut r);
        let out = warp::augment_bbox(&b, &p, k).map_err(err)?;
        let again = warp::augment_bbox(&b, &p, k).map_err(err)?;
        ensure(out == again, || format!("draw {k} not deterministic"))?;
        let s = out.w() / b.w();
        let (dx, dy) = (out.center().0 - b.center().0, out.center().1 - b.center().1);
        let tol = 1e-9;
        ensure(
            (0.9 - tol..=1.1 + tol).contains(&s)
                && (out.h() / b.h() - s).abs() < tol
                && dx.abs() <= 0.1 * b.w() + tol
                && dy.abs() <= 0.1 * b.h() + tol,
            || format!("draw {k}: scale {s}, shift ({dx}, {dy}) for {b:?}"),
        )?;
    }
    Ok("1e4 draws within shift 0.1 and scale [0.9, 1.1], repeatable".into())
}

// nnkernel

fn zero_block_identity() -> Outcome {
    let mut r = rng(10);
    for (c, h, w) in [(8, 5, 7), (16, 16, 16), (32, 9, 33), (64, 12, 4)] {
        let x = random_tensor([1, c, h, w], &mut r);
        let y = nn::hybrid_block_forward(&x, &HybridBlockParams::zeros(c).map_err(err)?).map_err(err)?;
        ensure(bits_equal(&x, &y), || format!("zero block changed a {c}x{h}x{w} input"))?;
    }
    Ok("zero block is the identity bitwise on 4 shapes".into())
}

fn block_shapes() -> Outcome {
    let mut r = rng(11);
    for _ in 0..100 {
        let c = 8 * r.random_range(1..=4);
        let shape = [r.random_range(1..=2), c, r.random_range(2..=24), r.random_range(2..=24)];
        let x = random_tensor(shape, &mut r);
        let y = nn::hybrid_block_forward(&x, &random_block(c, &mut r)).map_err(err)?;
        ensure(y.shape() == shape && y.all_finite(), || {
            format!("input {shape:?} gave {:?} (finite: {})", y.shape(), y.all_finite())
        })?;
    }
    Ok("100 random shapes preserved, outputs finite".into())
}

fn block_param_count() -> Outcome {
    for c in (8..=4096).step_by(8) {
        let (hy, bn) = (nn::hybrid_block_param_count(c), nn::bottleneck_param_count(c));
        ensure(hy < bn, || format!("c={c}: hybrid {hy} >= bottleneck {bn}"))?;
    }
    let blk = HybridBlockParams::zeros(256).map_err(err)?;
    ensure(blk.param_count() == nn::hybrid_block_param_count(256), || {
        format!("counted {} vs formula {}", blk.param_count(), nn::hybrid_block_param_count(256))
    })?;
    Ok(format!(
        "c=256: {} < {} parameters; holds for every c up to 4096",
        nn::hybrid_block_param_count(256),
        nn::bottleneck_param_count(256)
    ))
}

/// Mixed-padded stack used by the rotation check: 3x3, hybrid block with a
/// silent Tanh-Cartesian branch, 5x5, 1x1.
pub struct ConvStack {
    first: ConvParams,
    block: HybridBlockParams,
    second: ConvParams,
    last: ConvParams,
}

impl ConvStack {
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed);
        let mut block = random_block(8, &mut r);
        block.tc_branch = ConvParams::zeros(1, 1, 3, PadMode::Zero).expect("valid conv");
        Self {
            first: random_conv(8, 3, 3, PadMode::Mixed, &mut r),
            block,
            second: random_conv(4, 8, 5, PadMode::Mixed, &mut r),
            last: random_conv(2, 4, 1, PadMode::Mixed, &mut r),
        }
    }

    pub fn forward(&self, x: &Tensor) -> tanhpolar::Result<Tensor> {
        let y = nn::conv2d(x, &self.first)?;
        let y = nn::hybrid_block_forward(&y, &self.block)?;
        let y = nn::conv2d(&y, &self.second)?;
        nn::conv2d(&y, &self.last)
    }
}

/// Checks `stack(roll(x, k)) == roll(stack(x), k)` bitwise for every `k` on
/// each `(h, w)`.
pub fn rotation_commutes(sizes: &[(usize, usize)]) -> std::result::Result<usize, String> {
    let stack = ConvStack::random(12);
    let mut r = rng(13);
    let mut cases = 0;
    for &(h, w) in sizes {
        let x = random_tensor([1, 3, h, w], &mut r);
        let y = stack.forward(&x).map_err(err)?;
        for k in 0..h as isize {
            let yk = stack.forward(&x.roll_rows(k)).map_err(err)?;
            ensure(bits_equal(&yk, &y.roll_rows(k)), || format!("{h}x{w}, shift {k}: outputs differ"))?;
            cases += 1;
        }
    }
    Ok(cases)
}

fn conv_row_rotation() -> Outcome {
    let sizes = [(8, 8), (16, 16), (32, 32), (64, 64), (8, 64), (64, 8), (24, 40)];
    let cases = rotation_commutes(&sizes)?;
    Ok(format!("{cases} (size, shift) cases on 8x8..64x64 commute bitwise"))
}

fn mixed_pad_layout() -> Outcome {
    let t = Tensor::from_fn([1, 1, 3, 4], |_, _, y, x| (10 * y + x) as f32);
    let p = nn::pad(&t, 2, PadMode::Mixed);
    for py in 0..7 {
        for px in 0..8 {
            let sy = (py as isize - 2).rem_euclid(3) as usize;
            let sx = (px as isize - 2).clamp(0, 3) as usize;
            let (got, want) = (p.get(0, 0, py, px), t.get(0, 0, sy, sx));
            ensure(got == want, || format!("padded ({py}, {px}) = {got}, expected {want}"))?;
        }
    }
    let z = nn::pad(&t, 1, PadMode::Zero);
    ensure(z.get(0, 0, 0, 0) == 0.0 && z.get(0, 0, 1, 1) == 0.0 && z.get(0, 0, 3, 4) == 23.0, || {
        "zero padding misplaced".into()
    })?;
    Ok("rows wrap, columns replicate".into())
}

fn fcn_head_shapes() -> Outcome {
    let mut r = rng(14);
    for _ in 0..100 {
        let (ci, hid, co) = (r.random_range(1..=6), r.random_range(1..=6), r.random_range(2..=11));
        let (h, w, f) = (r.random_range(2..=12), r.random_range(2..=12), r.random_range(1..=4));
        let x = random_tensor([1, ci, h, w], &mut r);
        let c1 = random_conv(hid, ci, 3, PadMode::Mixed, &mut r);
        let c2 = random_conv(co, hid, 1, PadMode::Mixed, &mut r);
        let y = nn::fcn_head_forward(&x, &c1, &c2, f).map_err(err)?;
        ensure(y.shape() == [1, co, h * f, w * f] && y.all_finite(), || {
            format!("head on {h}x{w} with factor {f} gave {:?}", y.shape())
        })?;
    }
    Ok("100 random configurations give (1, C, H f, W f), finite".into())
}

// metrics

fn random_cm(classes: usize, r: &mut impl Rng) -> ConfusionMatrix {
    let counts = (0..classes * classes)
        .map(|_| if r.random_bool(0.3) { 0 } else { r.random_range(0..10_000) })
        .collect();
    ConfusionMatrix::from_counts(classes, counts).expect("square counts")
}

fn f1_iou_identity() -> Outcome {
    let mut r = rng(15);
    let (mut worst, mut defined) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let cm = random_cm(r.random_range(2..=12), &mut r);
        for s in metrics::iou_f1(&cm).per_class.into_iter().flatten() {
            worst = worst.max((s.f1 - 2.0 * s.iou / (1.0 + s.iou)).abs());
            defined += 1;
        }
    }
    ensure(worst <= 1e-12, || format!("max |F1 - 2 IoU / (1 + IoU)| = {worst:e}"))?;
    Ok(format!("1000 matrices, {defined} class scores, max deviation {worst:.1e}"))
}

pub fn random_probs(classes: usize, h: usize, w: usize, r: &mut impl Rng) -> Tensor {
    let logits: Vec<f64> = (0..classes * h * w).map(|_| r.random_range(-4.0..4.0)).collect();
    let hw = h * w;
    Tensor::from_fn([1, classes, h, w], |_, c, y, x| {
        let p = y * w + x;
        let z: f64 = (0..classes).map(|k| logits[k * hw + p].exp()).sum();
        (logits[c * hw + p].exp() / z) as f32
    })
}

pub fn random_mask(classes: usize, h: usize, w: usize, r: &mut impl Rng) -> LabelMask {
    LabelMask::from_fn(h, w, classes, |_, _| r.random_range(0..classes) as u8).expect("valid labels")
}

/// Per-pixel cross-entropy and Dice written against the one-hot encoding.
pub fn brute_force_losses(probs: &Tensor, gt: &LabelMask) -> (f64, f64) {
    let [_, cn, h, w] = probs.shape();
    let onehot = |c: usize, y: usize, x: usize| f64::from(u8::from(usize::from(gt.get(y, x)) == c));
    let mut ce = 0.0;
    for y in 0..h {
        for x in 0..w {
            for c in 0..cn {
                ce -= onehot(c, y, x) * f64::from(probs.get(0, c, y, x)).max(1e-12).ln();
            }
        }
    }
    let mut dice = 0.0;
    for c in 0..cn {
        let (mut inter, mut pp, mut gg) = (0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let (p, g) = (f64::from(probs.get(0, c, y, x)), onehot(c, y, x));
                inter += p * g;
                pp += p * p;
                gg += g * g;
            }
        }
        dice += (2.0 * inter + 1.0) / (pp + gg + 1.0);
    }
    (ce / (h * w) as f64, 1.0 - dice / cn as f64)
}

fn loss_oracles() -> Outcome {
    let mut r = rng(16);
    let mut worst = 0.0f64;
    for classes in [2, 3, 11] {
        for _ in 0..20 {
            let probs = random_probs(classes, 16, 16, &mut r);
            let gt = random_mask(classes, 16, 16, &mut r);
            let (ce, dice) = brute_force_losses(&probs, &gt);
            let l: f64 = r.random_range(0.0..=1.0);
            let got_ce = metrics::cross_entropy(&probs, &gt).map_err(err)?;
            let got_dice = metrics::dice_loss(&probs, &gt).map_err(err)?;
            let got = metrics::combined_loss(&probs, &gt, LossWeights::new(l).map_err(err)?).map_err(err)?;
            worst = worst
                .max((got_ce - ce).abs())
                .max((got_dice - dice).abs())
                .max((got - (l * ce + (1.0 - l) * dice)).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation from brute force {worst:e}"))?;
    Ok(format!("16x16, C in {{2, 3, 11}}, max deviation {worst:.1e}"))
}

fn lambda_affinity() -> Outcome {
    let mut r = rng(17);
    let mut worst = 0.0f64;
    for classes in [2, 3, 11] {
        let probs = random_probs(classes, 16, 16, &mut r);
        let gt = random_mask(classes, 16, 16, &mut r);
        let at = |l: f64| metrics::combined_loss(&probs, &gt, LossWeights::new(l).expect("in range"));
        let (l0, l1) = (at(0.0).map_err(err)?, at(1.0).map_err(err)?);
        let ce = metrics::cross_entropy(&probs, &gt).map_err(err)?;
        let dice = metrics::dice_loss(&probs, &gt).map_err(err)?;
        worst = worst.max((l0 - dice).abs()).max((l1 - ce).abs());
        for l in [0.25, 0.5] {
            worst = worst.max((at(l).map_err(err)? - (l * l1 + (1.0 - l) * l0)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("lambda in {{0, 0.25, 0.5, 1}} affine, max deviation {worst:.1e}"))
}

fn region_merge() -> Outcome {
    let mut r = rng(18);
    let groups = RegionGroups::new(11, vec![vec![2, 3, 4, 5, 7, 8, 9], vec![1], vec![10]]).map_err(err)?;
    for _ in 0..50 {
        let pred = random_mask(11, 20, 20, &mut r);
        let gt = random_mask(11, 20, 20, &mut r);
        let cm = metrics::confusion(&pred, &gt).map_err(err)?;
        let direct = metrics::confusion(&groups.relabel(&pred).map_err(err)?, &groups.relabel(&gt).map_err(err)?)
            .map_err(err)?;
        let merged = groups.merge_confusion(&cm).map_err(err)?;
        ensure(merged == direct, || "merged confusion differs from relabelled masks".into())?;
    }
    Ok("merging the matrix equals relabelling the masks".into())
}

// formats

fn raw_round_trip() -> Outcome {
    let mut r = rng(19);
    let mut data: Vec<f32> = (0..60).map(|_| r.random_range(-1e3..1e3)).collect();
    data[..6].copy_from_slice(&[0.0, -0.0, f32::MIN_POSITIVE / 4.0, f32::MAX, f32::INFINITY, f32::NAN]);
    let raw = RawTensor { dims: vec![3, 4, 5], data };
    let back = RawTensor::decode(&raw.encode(), "mem".as_ref()).map_err(err)?;
    let same = back.dims == raw.dims
        && back.data.len() == raw.data.len()
        && back.data.iter().zip(&raw.data).all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(same, || "raw tensor changed in a round trip".into())?;
    Ok("encode/decode bitwise, including -0, subnormal, inf, NaN".into())
}

fn grid_dump_round_trip() -> Outcome {
    let b = BBox::new(10.0, 20.0, 60.0, 80.0).map_err(err)?;
    let grid = warp::make_inverse_grid(&b, 30, 40, 16, 24).map_err(err)?;
    let dump = GridDump::from_grid(&grid, DumpDirection::Inverse);
    let bytes = dump.encode();
    ensure(bytes.len() == 16 + 8 * 30 * 40, || format!("{} bytes", bytes.len()))?;
    let back = GridDump::decode(&bytes, "mem".as_ref()).map_err(err)?;
    ensure(back == dump, || "grid dump changed in a round trip".into())?;
    Ok(format!("{} bytes = 16 + 8 H W, decode is exact", bytes.len()))
}

fn png_round_trip() -> Outcome {
    let dir = std::env::temp_dir().join(format!("tanhpolar-check-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(err)?;
    let result = (|| {
        let mut r = rng(20);
        let mask = random_mask(11, 17, 23, &mut r);
        let path = dir.join("mask.png");
        png::write_mask(&path, &mask).map_err(err)?;
        ensure(png::read_mask(&path, 11).map_err(err)? == mask, || "mask changed".into())?;

        let img = Tensor::from_fn([1, 3, 9, 13], |_, _, _, _| r.random_range(0.0..1.0));
        let path = dir.join("image.png");
        png::write_image(&path, &img).map_err(err)?;
        let back = png::read_image(&path).map_err(err)?;
        let worst = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        ensure(back.shape() == img.shape() && worst <= 0.5 / 255.0 + 1e-6, || {
            format!("image error {worst} exceeds half a quantization step")
        })?;
        Ok("masks exact, images within half an 8-bit step".to_string())
    })();
    let _ = std::fs::remove_dir_all(&dir);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_selection() {
        assert_eq!(select("all").unwrap().len(), all().len());
        let geo = select("geometry").unwrap();
        assert!(!geo.is_empty() && geo.iter().all(|c| c.suite == "geometry"));
        let e = select("bogus").unwrap_err();
        assert_eq!(e.exit_code(), 5);
        assert!(e.to_string().contains("nnkernel"));
        for s in SUITES {
            assert!(all().iter().any(|c| c.suite == s));
        }
    }

    #[test]
    fn quick_checks_pass() {
        for name in ["face_columns_512", "mixed_pad_layout", "raw_round_trip", "grid_dump_round_trip"] {
            let c = find(name).unwrap();
            assert!(run_one(&c).passed(), "{name}");
        }
    }
}
