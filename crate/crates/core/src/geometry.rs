//! Coordinate maps between Cartesian image space, Tanh-polar space and
//! Tanh-Cartesian space.
//!
//! The polar origin is the bounding-box center. Distances are normalized
//! by the directional radius of an axis-aligned ellipse fitted to the box,
//! then compressed with `tanh`, so the ellipse boundary always lands on
//! `rho = tanh(1)` whatever the size or aspect ratio of the box.
//!
//! All functions here are pure and work on continuous (sub-pixel)
//! coordinates. Pixel-center conventions belong to [`crate::warp`].

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;

/// A point in continuous source-image pixel coordinates, `(x, y)`.
pub type Point = (f64, f64);

/// `tanh(1)`: the radius at which the fitted ellipse boundary sits in
/// Tanh-polar space.
pub const FACE_RHO: f64 = 0.761_594_155_955_764_9;

/// Largest `f64` strictly below one. Forward maps saturate here instead of
/// returning 1.0, which would leave the open unit interval.
const RHO_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// Axis-aligned face bounding box in source-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BBox {
    /// Builds a box from its top-left corner and size.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        for (field, value) in [("x", x), ("y", y)] {
            if !value.is_finite() {
                return Err(Error::InvalidBBox { field, value });
            }
        }
        for (field, value) in [("w", w), ("h", h)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidBBox { field, value });
            }
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from its center and size.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> Point {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Scales every coordinate about the image origin, as when the whole
    /// image is resized by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.x * k, self.y * k, self.w * k, self.h * k)
    }

    /// Scales width and height by `k`, keeping the center fixed.
    pub fn scaled_about_center(&self, k: f64) -> Result<Self> {
        let (cx, cy) = self.center();
        Self::from_center(cx, cy, self.w * k, self.h * k)
    }
}

/// The normalization ellipse fitted to a [`BBox`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// Semi-axis along x.
    pub a: f64,
    /// Semi-axis along y.
    pub b: f64,
}

/// Tanh-polar coordinate: polar angle in `[-pi, pi)` and compressed
/// radius in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCoord {
    pub theta: f64,
    pub rho: f64,
}

/// Tanh-Cartesian coordinate: per-axis compressed displacement, both
/// components in `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TCCoord {
    pub u1: f64,
    pub u2: f64,
}

/// Fits the normalization ellipse: centered on the box with semi-axes
/// `0.5 * w / sqrt(pi)` and `0.5 * h / sqrt(pi)`.
pub fn fit_ellipse(bbox: &BBox) -> Ellipse {
    let (cx, cy) = bbox.center();
    let inv_sqrt_pi = 1.0 / math::sqrt(PI);
    Ellipse {
        cx,
        cy,
        a: 0.5 * bbox.w * inv_sqrt_pi,
        b: 0.5 * bbox.h * inv_sqrt_pi,
    }
}

/// Distance from the ellipse center to its boundary along direction
/// `theta`.
pub fn radius_at(e: &Ellipse, theta: f64) -> f64 {
    let (s, c) = math::sin_cos(theta);
    let (bc, as_) = (e.b * c, e.a * s);
    e.a * e.b / math::sqrt(bc * bc + as_ * as_)
}

/// Maps `theta` into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * math::floor((theta + PI) / two_pi);
    // floor() can land one period off when theta + pi rounds onto a
    // multiple of 2*pi.
    if t >= PI {
        t -= two_pi;
    } else if t < -PI {
        t += two_pi;
    }
    t
}

fn saturate(v: f64) -> f64 {
    v.clamp(-RHO_CEIL, RHO_CEIL)
}

impl Ellipse {
    pub fn new(cx: f64, cy: f64, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParam(alloc::format!("semi-axis a = {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParam(alloc::format!("semi-axis b = {b}")));
        }
        Ok(Self { cx, cy, a, b })
    }

    /// `|d| / r_e(angle(d))` for a displacement `d` from the center. Equals
    /// one exactly on the ellipse.
    pub fn normalized_radius(&self, dx: f64, dy: f64) -> f64 {
        math::hypot(dx / self.a, dy / self.b)
    }

    pub fn to_tanh_polar(&self, p: Point) -> PolarCoord {
        let (dx, dy) = (p.0 - self.cx, p.1 - self.cy);
        if dx == 0.0 && dy == 0.0 {
            return PolarCoord { theta: 0.0, rho: 0.0 };
        }
        PolarCoord {
            theta: wrap_angle(math::atan2(dy, dx)),
            rho: saturate(math::tanh(self.normalized_radius(dx, dy))),
        }
    }

    pub fn from_tanh_polar(&self, c: PolarCoord) -> Result<Point> {
        check_rho(c.rho)?;
        let r = radius_at(self, c.theta) * math::atanh(c.rho);
        let (s, co) = math::sin_cos(c.theta);
        Ok((self.cx + r * co, self.cy + r * s))
    }

    pub fn to_tanh_cartesian(&self, p: Point) -> TCCoord {
        let (dx, dy) = (p.0 - self.cx, p.1 - self.cy);
        if dx == 0.0 && dy == 0.0 {
            return TCCoord { u1: 0.0, u2: 0.0 };
        }
        // dx / r_e == dx * normalized_radius / |d|
        let scale = self.normalized_radius(dx, dy) / math::hypot(dx, dy);
        TCCoord {
            u1: saturate(math::tanh(dx * scale)),
            u2: saturate(math::tanh(dy * scale)),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::OutOfRange(alloc::format!("rho = {rho} is outside [0, 1)")))
    }
}

fn check_u(u: f64, name: &str) -> Result<()> {
    if u > -1.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(alloc::format!("{name} = {u} is outside (-1, 1)")))
    }
}

/// Cartesian point to Tanh-polar coordinates relative to `bbox`.
///
/// The box center maps to `(0, 0)`. Points more than about 19 ellipse
/// radii away saturate just below `rho = 1`.
pub fn to_tanh_polar(p: Point, bbox: &BBox) -> PolarCoord {
    fit_ellipse(bbox).to_tanh_polar(p)
}

/// Inverse of [`to_tanh_polar`].
pub fn from_tanh_polar(c: PolarCoord, bbox: &BBox) -> Result<Point> {
    fit_ellipse(bbox).from_tanh_polar(c)
}

/// Cartesian point to Tanh-Cartesian coordinates relative to `bbox`.
pub fn to_tanh_cartesian(p: Point, bbox: &BBox) -> TCCoord {
    fit_ellipse(bbox).to_tanh_cartesian(p)
}

/// Inverse of [`to_tanh_cartesian`].
pub fn from_tanh_cartesian(c: TCCoord, bbox: &BBox) -> Result<Point> {
    fit_ellipse(bbox).from_tanh_polar(tc_to_tp(c)?)
}

/// Direct Tanh-polar to Tanh-Cartesian map.
///
/// Needs no bounding box: the directional ellipse radius appears in both
/// systems and cancels.
pub fn tp_to_tc(c: PolarCoord) -> Result<TCCoord> {
    check_rho(c.rho)?;
    let r = math::atanh(c.rho);
    let (s, co) = math::sin_cos(c.theta);
    Ok(TCCoord {
        u1: saturate(math::tanh(r * co)),
        u2: saturate(math::tanh(r * s)),
    })
}

/// Inverse of [`tp_to_tc`].
pub fn tc_to_tp(c: TCCoord) -> Result<PolarCoord> {
    check_u(c.u1, "u1")?;
    check_u(c.u2, "u2")?;
    let (s, t) = (math::atanh(c.u1), math::atanh(c.u2));
    if s == 0.0 && t == 0.0 {
        return Ok(PolarCoord { theta: 0.0, rho: 0.0 });
    }
    Ok(PolarCoord {
        theta: wrap_angle(math::atan2(t, s)),
        rho: saturate(math::tanh(math::hypot(s, t))),
    })
}

/// Rotates `p` about `center` by `phi` radians, in the same sense as
/// increasing polar angle.
pub fn rotate_about(p: Point, center: Point, phi: f64) -> Point {
    let (s, c) = math::sin_cos(phi);
    let (dx, dy) = (p.0 - center.0, p.1 - center.1);
    (center.0 + c * dx - s * dy, center.1 + s * dx + c * dy)
}

/// Signed angular difference `a - b` folded into `[-pi, pi)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn bbox_validation_names_field() {
        assert_eq!(
            BBox::new(0.0, 0.0, -5.0, 10.0),
            Err(Error::InvalidBBox { field: "w", value: -5.0 })
        );
        assert!(matches!(
            BBox::new(0.0, 0.0, 5.0, 0.0),
            Err(Error::InvalidBBox { field: "h", .. })
        ));
        assert!(BBox::new(f64::NAN, 0.0, 5.0, 5.0).is_err());
    }

    #[test]
    fn fit_ellipse_square_box() {
        let e = fit_ellipse(&bbox(0.0, 0.0, 100.0, 100.0));
        assert_eq!((e.cx, e.cy), (50.0, 50.0));
        // 50 / sqrt(pi), rounded from a 30-digit evaluation.
        assert!((e.a - 28.209_479_177_387_813).abs() < 1e-12);
        assert_eq!(e.a, e.b);
    }

    #[test]
    fn fit_ellipse_symmetric_box_is_origin_centered() {
        let e = fit_ellipse(&bbox(-10.0, -10.0, 20.0, 20.0));
        assert_eq!((e.cx, e.cy), (0.0, 0.0));
    }

    #[test]
    fn radius_at_axes_and_diagonal() {
        let e = Ellipse::new(0.0, 0.0, 3.0, 2.0).unwrap();
        assert!((radius_at(&e, 0.0) - 3.0).abs() < 1e-15);
        assert!((radius_at(&e, PI / 2.0) - 2.0).abs() < 1e-15);
        // 6 / sqrt(6.5), rounded from a 30-digit evaluation.
        let expected = 2.353_393_621_658_208_5;
        assert!((radius_at(&e, PI / 4.0) - expected).abs() < 1e-14);

        // Newton on (r c / a)^2 + (r s / b)^2 = 1 along the same ray.
        let (s, c) = (libm::sin(PI / 4.0), libm::cos(PI / 4.0));
        let mut r = 1.0_f64;
        for _ in 0..50 {
            let f = (r * c / 3.0).powi(2) + (r * s / 2.0).powi(2) - 1.0;
            let df = 2.0 * r * ((c / 3.0).powi(2) + (s / 2.0).powi(2));
            r -= f / df;
        }
        assert!((r - expected).abs() < 1e-14);
    }

    #[test]
    fn radius_at_is_even_and_pi_periodic() {
        let e = Ellipse::new(1.0, 2.0, 7.0, 3.5).unwrap();
        for i in 0..1000 {
            let t = -PI + 2.0 * PI * (i as f64) / 1000.0;
            assert_eq!(radius_at(&e, t), radius_at(&e, -t));
            let shifted = radius_at(&e, t + PI);
            assert!((shifted - radius_at(&e, t)).abs() <= 1e-14 * shifted);
        }
    }

    #[test]
    fn boundary_point_maps_to_face_rho() {
        let b = bbox(0.0, 0.0, 100.0, 100.0);
        let c = to_tanh_polar((78.209_479_177_387_82, 50.0), &b);
        assert_eq!(c.theta, 0.0);
        assert!((c.rho - FACE_RHO).abs() < 1e-15);
        assert!((FACE_RHO - libm::tanh(1.0)).abs() < 1e-16);
    }

    #[test]
    fn center_maps_to_origin_and_back() {
        let b = bbox(3.0, 4.0, 30.0, 60.0);
        let c = to_tanh_polar(b.center(), &b);
        assert_eq!(c, PolarCoord { theta: 0.0, rho: 0.0 });
        assert_eq!(from_tanh_polar(c, &b).unwrap(), b.center());
        assert_eq!(to_tanh_cartesian(b.center(), &b), TCCoord { u1: 0.0, u2: 0.0 });
    }

    #[test]
    fn from_tanh_polar_boundary_example() {
        let b = bbox(0.0, 0.0, 100.0, 100.0);
        let p = from_tanh_polar(PolarCoord { theta: 0.0, rho: FACE_RHO }, &b).unwrap();
        assert!((p.0 - 78.209_479_177_387_82).abs() < 1e-9);
        assert!((p.1 - 50.0).abs() < 1e-12);
    }

    #[test]
    fn rho_outside_unit_interval_is_rejected() {
        let b = bbox(0.0, 0.0, 10.0, 10.0);
        for rho in [1.0, 1.5, -0.1, f64::NAN] {
            assert!(matches!(
                from_tanh_polar(PolarCoord { theta: 0.0, rho }, &b),
                Err(Error::OutOfRange(_))
            ));
            assert!(tp_to_tc(PolarCoord { theta: 0.0, rho }).is_err());
        }
        assert!(tc_to_tp(TCCoord { u1: 1.0, u2: 0.0 }).is_err());
        assert!(tc_to_tp(TCCoord { u1: 0.0, u2: -1.0 }).is_err());
    }

    #[test]
    fn far_points_saturate_below_one() {
        let b = bbox(0.0, 0.0, 2.0, 2.0);
        let c = to_tanh_polar((1e6, 0.0), &b);
        assert!(c.rho < 1.0);
        assert!(from_tanh_polar(c, &b).unwrap().0.is_finite());
        let t = to_tanh_cartesian((1e6, -1e6), &b);
        assert!(t.u1 < 1.0 && t.u2 > -1.0);
    }

    #[test]
    fn tanh_cartesian_on_axis_boundary() {
        let b = bbox(0.0, 0.0, 100.0, 60.0);
        let e = fit_ellipse(&b);
        let t = to_tanh_cartesian((e.cx + e.a, e.cy), &b);
        assert!((t.u1 - FACE_RHO).abs() < 1e-15);
        assert_eq!(t.u2, 0.0);
    }

    #[test]
    fn tanh_cartesian_boundary_satisfies_unit_norm() {
        let b = bbox(10.0, 20.0, 80.0, 130.0);
        let e = fit_ellipse(&b);
        for i in 0..1000 {
            let t = -PI + 2.0 * PI * (i as f64 + 0.25) / 1000.0;
            let r = radius_at(&e, t);
            let p = (e.cx + r * libm::cos(t), e.cy + r * libm::sin(t));
            let c = to_tanh_cartesian(p, &b);
            let n = libm::atanh(c.u1).powi(2) + libm::atanh(c.u2).powi(2);
            assert!((n - 1.0).abs() < 1e-12, "{n}");
        }
    }

    #[test]
    fn inter_grid_map_examples() {
        let c = tp_to_tc(PolarCoord { theta: 0.0, rho: FACE_RHO }).unwrap();
        assert!((c.u1 - FACE_RHO).abs() < 1e-15 && c.u2 == 0.0);
        let c = tp_to_tc(PolarCoord { theta: PI / 2.0, rho: FACE_RHO }).unwrap();
        assert!(c.u1.abs() < 1e-15 && (c.u2 - FACE_RHO).abs() < 1e-15);

        assert_eq!(
            tc_to_tp(TCCoord { u1: 0.0, u2: 0.0 }).unwrap(),
            PolarCoord { theta: 0.0, rho: 0.0 }
        );
        let p = tc_to_tp(TCCoord { u1: FACE_RHO, u2: 0.0 }).unwrap();
        assert_eq!(p.theta, 0.0);
        assert!((p.rho - FACE_RHO).abs() < 1e-15);
    }

    #[test]
    fn wrap_angle_half_open() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.5) - (-PI + 0.5)).abs() < 1e-12);
        assert!((wrap_angle(-0.25) + 0.25).abs() < 1e-16);
        for i in -1000..1000 {
            let w = wrap_angle(i as f64 * 0.37);
            assert!((-PI..PI).contains(&w));
        }
    }

    #[test]
    fn atan2_seam_is_normalized() {
        let b = bbox(0.0, 0.0, 10.0, 10.0);
        // Exactly on the negative x axis atan2 yields +pi.
        let c = to_tanh_polar((0.0, 5.0), &b);
        assert_eq!(c.theta, -PI);
    }
}
