//! Cubic-spline smoothing function in two dimensions.
//!
//! The spline is written in the normalized radius `q = r / h` with compact
//! support on `q < 1`:
//!
//! ```text
//! w(q) = beta * (1 - 6 q^2 + 6 q^3)   0   <= q < 1/2
//!        beta * 2 (1 - q)^3           1/2 <= q < 1
//!        0                            q >= 1
//! ```
//!
//! `beta` is fixed so that the kernel integrates to one over the plane.

use std::f64::consts::PI;

/// Default ratio of smoothing length to initial particle spacing.
pub const DEFAULT_SPACING_RATIO: f64 = 2.1;

/// Nodes and weights of the 5-point Gauss-Legendre rule on [-1, 1].
const GAUSS_5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    /// Support radius.
    pub h: f64,
    /// Normalization constant, units 1/length^2.
    pub beta: f64,
    /// `h` divided by the initial particle spacing.
    pub spacing_ratio: f64,
}

/// Unnormalized spline shape in q.
#[inline]
fn shape(q: f64) -> f64 {
    if q < 0.5 {
        1.0 - 6.0 * q * q + 6.0 * q * q * q
    } else if q < 1.0 {
        let s = 1.0 - q;
        2.0 * s * s * s
    } else {
        0.0
    }
}

/// d(shape)/dq.
#[inline]
fn shape_derivative(q: f64) -> f64 {
    if q < 0.5 {
        -12.0 * q + 18.0 * q * q
    } else if q < 1.0 {
        let s = 1.0 - q;
        -6.0 * s * s
    } else {
        0.0
    }
}

/// `integral_0^1 shape(q) q dq`, integrated branch by branch so the
/// piecewise polynomial is handled exactly.
fn radial_moment() -> f64 {
    let mut total = 0.0;
    for (a, b) in [(0.0, 0.5), (0.5, 1.0)] {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for &(node, weight) in &GAUSS_5 {
            let q = mid + half * node;
            total += half * weight * shape(q) * q;
        }
    }
    total
}

impl KernelSpec {
    /// Kernel with support radius `h`; the spacing ratio is recorded as the default.
    pub fn new(h: f64) -> Self {
        Self::with_ratio(h, DEFAULT_SPACING_RATIO)
    }

    /// Kernel for particle spacing `spacing` with `h = ratio * spacing`.
    pub fn from_spacing(spacing: f64, ratio: f64) -> Self {
        Self::with_ratio(ratio * spacing, ratio)
    }

    fn with_ratio(h: f64, spacing_ratio: f64) -> Self {
        assert!(h > 0.0 && h.is_finite(), "smoothing length must be positive, got {h}");
        // 2 pi beta h^2 * int_0^1 shape(q) q dq = 1
        let beta = 1.0 / (2.0 * PI * h * h * radial_moment());
        Self {
            h,
            beta,
            spacing_ratio,
        }
    }

    /// w_h(r).
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0, "kernel evaluated at negative radius {r}");
        self.beta * shape(r / self.h)
    }

    /// dw_h/dr. The gradient vector is `grad(r) * r_vec / r`.
    #[inline]
    pub fn grad(&self, r: f64) -> f64 {
        debug_assert!(r > 0.0, "kernel gradient requested at r = {r}");
        self.beta / self.h * shape_derivative(r / self.h)
    }

    /// Value and radial derivative together.
    #[inline]
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let q = r / self.h;
        (
            self.beta * shape(q),
            self.beta / self.h * shape_derivative(q),
        )
    }

    pub fn support(&self) -> f64 {
        self.h
    }
}
