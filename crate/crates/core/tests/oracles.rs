//! Brute-force and structural oracles for the resampling, convolution and
//! metric paths.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tanhpolar::geometry::{fit_ellipse, BBox, FACE_RHO};
use tanhpolar::metrics::{self, confusion, ConfusionMatrix, RegionGroups};
use tanhpolar::nn;
use tanhpolar::warp::{self, BorderPolicy, SamplingGrid};
use tanhpolar::{LabelMask, Tensor};

fn smooth(x: f64, y: f64) -> f64 {
    0.5 + 0.2 * (x / 17.0).sin() * (y / 23.0).cos() + 0.15 * ((x + y) / 31.0).sin()
}

fn render(h: usize, w: usize, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_fn([1, 1, h, w], |_, _, y, x| f(x as f64 + 0.5, y as f64 + 0.5) as f32)
}

fn mean_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| f64::from((x - y).abs())).sum::<f64>() / a.data().len() as f64
}

#[test]
fn rotating_the_image_shifts_polar_rows() {
    let (h, w) = (256, 256);
    let b = BBox::from_center(128.0, 128.0, 100.0, 100.0).unwrap();
    let (cx, cy) = b.center();
    let img = render(h, w, smooth);
    let (ph, pw) = (128, 128);
    let base = warp::warp_image(&img, &b, ph, pw).unwrap();
    for k in [1isize, 5, 32, 77] {
        let phi = 2.0 * PI * k as f64 / ph as f64;
        // Rendering f at the back-rotated position rotates the picture by phi.
        let rotated = render(h, w, |x, y| {
            let (s, c) = (-phi).sin_cos();
            let (dx, dy) = (x - cx, y - cy);
            smooth(cx + c * dx - s * dy, cy + s * dx + c * dy)
        });
        let out = warp::warp_image(&rotated, &b, ph, pw).unwrap();
        let d = mean_abs_diff(&out, &base.roll_rows(k));
        assert!(d < 2.0 / 255.0, "k = {k}: {d}");
    }
}

#[test]
fn disk_edge_lands_on_face_column() {
    let (h, w) = (256, 256);
    let b = BBox::from_center(128.0, 128.0, 100.0, 100.0).unwrap();
    let e = fit_ellipse(&b);
    // 4x4 supersampled disk of radius a.
    let img = Tensor::from_fn([1, 1, h, w], |_, _, y, x| {
        let mut hits = 0;
        for sy in 0..4 {
            for sx in 0..4 {
                let px = x as f64 + (sx as f64 + 0.5) / 4.0 - e.cx;
                let py = y as f64 + (sy as f64 + 0.5) / 4.0 - e.cy;
                hits += usize::from(px.hypot(py) < e.a);
            }
        }
        hits as f32 / 16.0
    });
    let (ph, pw) = (64, 512);
    let out = warp::warp_image(&img, &b, ph, pw).unwrap();
    let expected = FACE_RHO * pw as f64 - 0.5;
    // Radially one column is about 0.13 px here, so the anti-aliased edge
    // spans several columns; the half-level crossing marks its center.
    for i in 0..ph {
        let row = &out.data()[i * pw..(i + 1) * pw];
        let j = (0..pw - 1).find(|&j| row[j] >= 0.5 && row[j + 1] < 0.5).unwrap();
        let (a, c) = (f64::from(row[j]), f64::from(row[j + 1]));
        let edge = j as f64 + (a - 0.5) / (a - c);
        assert!((edge - expected).abs() <= 1.0, "row {i}: edge {edge}, expected {expected}");
    }
}

#[test]
fn unwarped_ellipse_indicator_matches_interior() {
    let (h, w) = (200, 240);
    let b = BBox::new(70.0, 40.0, 110.0, 140.0).unwrap();
    let e = fit_ellipse(&b);
    let inside = |x: f64, y: f64| e.normalized_radius(x - e.cx, y - e.cy) < 1.0;
    let img = render(h, w, |x, y| f64::from(u8::from(inside(x, y))));
    let polar = warp::warp_image(&img, &b, 512, 512).unwrap();
    let back = warp::unwarp_scores(&polar, &b, h, w).unwrap();
    let mut wrong = 0;
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (dx, dy) = (px - e.cx, py - e.cy);
            let r = e.normalized_radius(dx, dy);
            // Distance to the boundary along the ray, in pixels.
            let band = if r == 0.0 { f64::MAX } else { (r - 1.0).abs() * dx.hypot(dy) / r };
            if band <= 2.0 {
                continue;
            }
            wrong += usize::from((back.get(0, 0, y, x) >= 0.5) != inside(px, py));
        }
    }
    assert_eq!(wrong, 0);
}

#[test]
fn tp_tc_resampling_round_trip_on_smooth_map() {
    let n = 128;
    // Smooth in Tanh-Cartesian space, so also continuous through rho = 0.
    let g = |u1: f64, u2: f64| (2.0 * u1).sin() * (3.0 * u2).cos() + 0.5 * u2;
    let tp = Tensor::from_fn([1, 1, n, n], |_, _, i, j| {
        let c = tanhpolar::PolarCoord { theta: warp::tp_row_angle(i, n), rho: warp::tp_col_rho(j, n) };
        let u = tanhpolar::geometry::tp_to_tc(c).unwrap();
        g(u.u1, u.u2) as f32
    });
    let back = nn::resample_tc_to_tp(&nn::resample_tp_to_tc(&tp).unwrap()).unwrap();
    let (lo, hi) = tp.data().iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let err = mean_abs_diff(&tp, &back) / f64::from(hi - lo);
    assert!(err < 0.02, "{err}");

    // One direct hop lands closer to the analytic Tanh-Cartesian picture
    // than going out to a Cartesian raster and back in.
    let tc = nn::resample_tp_to_tc(&tp).unwrap();
    let truth = Tensor::from_fn([1, 1, n, n], |_, _, m, k| g(warp::tc_axis_value(k, n), warp::tc_axis_value(m, n)) as f32);
    let direct_err = mean_abs_diff(&tc, &truth);
    assert!(direct_err < 0.01, "{direct_err}");

    let side = 160;
    let b = BBox::from_center(80.0, 80.0, 60.0, 60.0).unwrap();
    let cart = warp::unwarp_scores(&tp, &b, side, side).unwrap();
    let mut src = Vec::new();
    let grid = SamplingGrid::from_fn(n, n, BorderPolicy::Replicate, false, |m, k| {
        let u = tanhpolar::TCCoord { u1: warp::tc_axis_value(k, n), u2: warp::tc_axis_value(m, n) };
        let (x, y) = tanhpolar::geometry::from_tanh_cartesian(u, &b).unwrap();
        src.push((0.0..side as f64).contains(&x) && (0.0..side as f64).contains(&y));
        (x - 0.5, y - 0.5)
    })
    .unwrap();
    let two_hop = warp::bilinear_sample(&cart, &grid).unwrap();
    let (mut e_direct, mut e_two, mut count) = (0.0, 0.0, 0);
    for (p, &inside) in src.iter().enumerate() {
        if inside {
            e_direct += f64::from((tc.data()[p] - truth.data()[p]).abs());
            e_two += f64::from((two_hop.data()[p] - truth.data()[p]).abs());
            count += 1;
        }
    }
    assert!(count > n * n / 4);
    assert!(e_direct < e_two, "direct {} vs two-hop {}", e_direct / count as f64, e_two / count as f64);
}

#[test]
fn polar_stripe_becomes_unit_level_set_in_tc_space() {
    let n = 256;
    let j_face = (0..n).min_by(|&a, &b| {
        (warp::tp_col_rho(a, n) - FACE_RHO).abs().total_cmp(&(warp::tp_col_rho(b, n) - FACE_RHO).abs())
    }).unwrap();
    let tp = Tensor::from_fn([1, 1, n, n], |_, _, _, j| f32::from(u8::from(j == j_face)));
    let tc = nn::resample_tp_to_tc(&tp).unwrap();
    let mut lit = 0;
    for m in 0..n {
        for k in 0..n {
            if tc.get(0, 0, m, k) < 0.5 {
                continue;
            }
            lit += 1;
            let (u1, u2) = (warp::tc_axis_value(k, n), warp::tc_axis_value(m, n));
            // tp_to_tc maps rho = tanh(1) onto artanh(u1)^2 + artanh(u2)^2 = 1.
            let r = u1.atanh().hypot(u2.atanh());
            assert!((r - 1.0).abs() < 0.02, "({m}, {k}): {r}");
        }
    }
    assert!(lit > 300, "{lit}");
}

#[test]
fn forward_grid_rows_shift_under_rotation() {
    let h = 64;
    let b = BBox::from_center(40.0, 60.0, 50.0, 50.0).unwrap();
    let g = warp::make_forward_grid(&b, h, 32).unwrap();
    let c = b.center();
    for k in [1usize, 7, 16, 63] {
        let phi = 2.0 * PI * k as f64 / h as f64;
        for i in 0..h {
            for j in 0..32 {
                let (x, y) = g.get(i, j);
                let (rx, ry) = tanhpolar::geometry::rotate_about((x + 0.5, y + 0.5), c, phi);
                let (sx, sy) = g.get((i + k) % h, j);
                assert!((rx - (sx + 0.5)).abs() < 1e-9 && (ry - (sy + 0.5)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn warp_constant_with_replicate_border() {
    let img = Tensor::filled([1, 1, 20, 30], 0.7);
    let b = BBox::new(2.0, 2.0, 10.0, 10.0).unwrap();
    let out = warp::warp_image_with(&img, &b, 64, 64, BorderPolicy::Replicate).unwrap();
    assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
}

#[test]
fn custom_grid_rejects_non_finite() {
    assert!(SamplingGrid::from_fn(2, 2, BorderPolicy::Zero, false, |_, _| (f64::NAN, 0.0)).is_err());
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> LabelMask {
    LabelMask::new(h, w, c, (0..h * w).map(|_| rng.random_range(0..c) as u8).collect()).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
    let hw = h * w;
    let mut data = vec![0f32; c * hw];
    for p in 0..hw {
        let raw: Vec<f32> = (0..c).map(|_| rng.random_range(0.01f32..1.0)).collect();
        let s: f32 = raw.iter().sum();
        for k in 0..c {
            data[k * hw + p] = raw[k] / s;
        }
    }
    Tensor::new([1, c, h, w], data).unwrap()
}

#[test]
fn losses_match_per_pixel_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (h, w, c) = (3, 3, 3);
    let probs = random_probs(&mut rng, h, w, c);
    let gt = random_mask(&mut rng, h, w, c);
    let mut ce = 0.0;
    for y in 0..h {
        for x in 0..w {
            ce -= f64::from(probs.get(0, usize::from(gt.get(y, x)), y, x)).ln();
        }
    }
    ce /= (h * w) as f64;
    assert!((metrics::cross_entropy(&probs, &gt).unwrap() - ce).abs() < 1e-12);

    let mut dice = 0.0;
    for k in 0..c {
        let (mut i, mut pp, mut gg) = (0.0, 0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let p = f64::from(probs.get(0, k, y, x));
                let g = f64::from(u8::from(usize::from(gt.get(y, x)) == k));
                i += p * g;
                pp += p * p;
                gg += g * g;
            }
        }
        dice += (2.0 * i + 1.0) / (pp + gg + 1.0);
    }
    let dice = 1.0 - dice / c as f64;
    assert!((metrics::dice_loss(&probs, &gt).unwrap() - dice).abs() < 1e-12);
}

#[test]
fn confusion_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (pred, gt) = (random_mask(&mut rng, 16, 16, 3), random_mask(&mut rng, 16, 16, 3));
    let mut counts = vec![0u64; 9];
    for y in 0..16 {
        for x in 0..16 {
            counts[usize::from(gt.get(y, x)) * 3 + usize::from(pred.get(y, x))] += 1;
        }
    }
    assert_eq!(confusion(&pred, &gt).unwrap(), ConfusionMatrix::from_counts(3, counts).unwrap());
}

#[test]
fn merged_confusion_equals_confusion_of_relabeled_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let groups = RegionGroups::new(11, vec![vec![2, 3, 4, 5, 7, 8, 9], vec![1], vec![10]]).unwrap();
    for _ in 0..20 {
        let (pred, gt) = (random_mask(&mut rng, 24, 20, 11), random_mask(&mut rng, 24, 20, 11));
        let merged = groups.merge_confusion(&confusion(&pred, &gt).unwrap()).unwrap();
        let relabeled = confusion(&groups.relabel(&pred).unwrap(), &groups.relabel(&gt).unwrap()).unwrap();
        assert_eq!(merged, relabeled);
    }
}

#[test]
fn merging_a_perfect_partition_scores_one() {
    let gt = LabelMask::from_fn(10, 10, 3, |y, x| if y < 3 { 0 } else if x < 5 { 1 } else { 2 }).unwrap();
    let groups = RegionGroups::new(3, vec![vec![1, 2]]).unwrap();
    let s = metrics::merge_regions(&confusion(&gt, &gt).unwrap(), &groups).unwrap();
    assert_eq!(s[0].unwrap().f1, 1.0);
}
