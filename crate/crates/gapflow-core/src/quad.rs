// SPDX-License-Identifier: MIT

//! Quadrature rules and branch-tracking helpers.
//!
//! All integrands in this crate are piecewise analytic with at worst
//! inverse-square-root singularities at band edges, so three tools suffice:
//!
//! * Gauss–Legendre panels driven adaptively by interval bisection,
//! * Gauss–Jacobi rules with exponents `0` or `-1/2` at either endpoint,
//!   generated by the Golub–Welsch algorithm (Chebyshev–Gauss as the fully
//!   singular special case),
//! * square-root substitutions that absorb an edge singularity into a smooth
//!   integrand.
//!
//! The module also provides [`continued_log`], a branch-tracked complex
//! logarithm along a polyline, used to evaluate multivalued primitives
//! consistently along explicit evaluation paths.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// A quadrature rule on `[-1, 1]`: paired nodes and weights.
#[derive(Debug, Clone)]
pub struct Rule {
    /// Nodes in `(-1, 1)`.
    pub nodes: Vec<f64>,
    /// Positive weights.
    pub weights: Vec<f64>,
}

impl Rule {
    /// Applies the rule to `f` mapped onto `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = C64::new(0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * x) * w;
        }
        acc * half
    }
}

/// Solves the symmetric tridiagonal eigenproblem of the three-term recurrence
/// (Golub–Welsch): returns nodes (eigenvalues) and weights
/// `mu0 * q_{1,k}^2`.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Rule {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = offdiag[i];
            m[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = eig.eigenvalues[k];
            let q0 = eig.eigenvectors[(0, k)];
            (x, mu0 * q0 * q0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&diag, &offdiag, 2.0)
}

/// Endpoint exponent of a Gauss–Jacobi rule: regular (`0`) or an
/// inverse-square-root singularity (`-1/2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeExponent {
    /// Weight behaves like a constant at this endpoint.
    Regular,
    /// Weight behaves like `distance^{-1/2}` at this endpoint.
    InverseSqrt,
}

/// `n`-point Gauss–Jacobi rule on `[-1, 1]` for the weight
/// `(1-x)^a (1+x)^b` with `a, b ∈ {0, -1/2}`.
pub fn gauss_jacobi(n: usize, right: EdgeExponent, left: EdgeExponent) -> Rule {
    assert!(n >= 1);
    let a: f64 = match right {
        EdgeExponent::Regular => 0.0,
        EdgeExponent::InverseSqrt => -0.5,
    };
    let b: f64 = match left {
        EdgeExponent::Regular => 0.0,
        EdgeExponent::InverseSqrt => -0.5,
    };
    // Total mass of the weight for the supported exponent combinations.
    let mu0 = match (right, left) {
        (EdgeExponent::Regular, EdgeExponent::Regular) => 2.0,
        (EdgeExponent::InverseSqrt, EdgeExponent::InverseSqrt) => std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::SQRT_2,
    };
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = k as f64;
        let denom = (2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0);
        let alpha = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / denom
        };
        diag.push(alpha);
        if k >= 1 {
            let num = 4.0 * kf * (kf + a) * (kf + b) * (kf + a + b);
            let den = (2.0 * kf + a + b).powi(2) * (2.0 * kf + a + b + 1.0) * (2.0 * kf + a + b - 1.0);
            off.push((num / den).sqrt());
        }
    }
    golub_welsch(&diag, &off, mu0)
}

/// Chebyshev–Gauss quadrature: `∫_p^q f(x) / sqrt((x-p)(q-x)) dx`.
///
/// Exact for `f` polynomial of degree `< 2n`; spectrally accurate for `f`
/// analytic in a neighborhood of `[p, q]`.
pub fn integrate_chebyshev<F: FnMut(f64) -> C64>(n: usize, p: f64, q: f64, mut f: F) -> C64 {
    let mid = 0.5 * (p + q);
    let r = 0.5 * (q - p);
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let theta = std::f64::consts::PI * (2.0 * i as f64 + 1.0) / (2.0 * n as f64);
        acc += f(mid + r * theta.cos());
    }
    acc * (std::f64::consts::PI / n as f64)
}

/// Adaptive Gauss–Legendre integration of a complex-valued function over
/// `[a, b]`.
///
/// Panels are bisected until the two-half refinement agrees with the parent
/// panel estimate to `tol` relative to the panel magnitude (with an absolute
/// floor of `tol` itself).  The per-panel criterion keeps refinement off the
/// rounding-noise plateau for integrands of large magnitude; intended for
/// integrands that are analytic in the interior of the interval.
pub fn integrate_adaptive<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, tol: f64) -> C64 {
    let rule = gl15();
    let whole = rule.integrate(a, b, &mut f);
    adaptive_rec(&mut f, a, b, whole, tol, rule, 0)
}

fn adaptive_rec<F: FnMut(f64) -> C64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: C64,
    tol: f64,
    rule: &'static Rule,
    depth: usize,
) -> C64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let refined = left + right;
    let err = (refined - whole).norm();
    if (err <= tol * (1.0 + refined.norm()) || depth >= 48) && depth >= 1 {
        return refined;
    }
    adaptive_rec(f, a, mid, left, tol, rule, depth + 1)
        + adaptive_rec(f, mid, b, right, tol, rule, depth + 1)
}

/// Shared 15-point Gauss–Legendre rule used by the adaptive driver.
fn gl15() -> &'static Rule {
    use std::sync::OnceLock;
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

/// `∫_a^{x1} f(t) / sqrt(t - a) dt` for smooth `f`, via `t = a + u²`.
pub fn integrate_left_edge<F: FnMut(f64) -> C64>(mut f: F, a: f64, x1: f64, tol: f64) -> C64 {
    assert!(x1 >= a);
    let umax = (x1 - a).sqrt();
    if umax == 0.0 {
        return C64::new(0.0, 0.0);
    }
    integrate_adaptive(|u| f(a + u * u) * 2.0, 0.0, umax, tol)
}

/// `∫_{x0}^{b} f(t) / sqrt(b - t) dt` for smooth `f`, via `t = b - u²`.
pub fn integrate_right_edge<F: FnMut(f64) -> C64>(mut f: F, x0: f64, b: f64, tol: f64) -> C64 {
    assert!(b >= x0);
    let umax = (b - x0).sqrt();
    if umax == 0.0 {
        return C64::new(0.0, 0.0);
    }
    integrate_adaptive(|u| f(b - u * u) * 2.0, 0.0, umax, tol)
}

/// `∫_c^∞ f(t) dt` for `f` decaying at least like `t^{-3/2}`, via the
/// substitution `t = c + u², u = s/(1-s)`.
pub fn integrate_ray_up<F: FnMut(f64) -> C64>(mut f: F, c: f64, tol: f64) -> C64 {
    integrate_adaptive(
        |s| {
            let u = s / (1.0 - s);
            let du = 1.0 / ((1.0 - s) * (1.0 - s));
            f(c + u * u) * 2.0 * u * du
        },
        0.0,
        1.0,
        tol,
    )
}

/// `∫_{-∞}^c f(t) dt` for `f` decaying at least like `|t|^{-3/2}`, via
/// `t = c - u², u = s/(1-s)`.
pub fn integrate_ray_down<F: FnMut(f64) -> C64>(mut f: F, c: f64, tol: f64) -> C64 {
    integrate_adaptive(
        |s| {
            let u = s / (1.0 - s);
            let du = 1.0 / ((1.0 - s) * (1.0 - s));
            f(c - u * u) * 2.0 * u * du
        },
        0.0,
        1.0,
        tol,
    )
}

/// A polyline evaluation path in the closed upper half-plane.
#[derive(Debug, Clone)]
pub struct Path {
    /// Consecutive vertices; integration runs over each straight segment.
    pub points: Vec<C64>,
}

impl Path {
    /// Straight segments `[p_k, p_{k+1}]`.
    pub fn segments(&self) -> impl Iterator<Item = (C64, C64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Integrates `f` along the path with per-segment adaptive quadrature.
    pub fn integrate<F: FnMut(C64) -> C64>(&self, mut f: F, tol: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (p, q) in self.segments() {
            let d = q - p;
            if d.norm() == 0.0 {
                continue;
            }
            acc += integrate_adaptive(|t| f(p + d * t) * d, 0.0, 1.0, tol);
        }
        acc
    }
}

/// Builds the standard evaluation path from a real anchor `x_a` to `z` in the
/// closed upper half-plane: ascend to height `h0`, traverse horizontally, then
/// move vertically to `z`.
///
/// For targets with `Im z >= h0` the final leg ascends; for boundary targets
/// (gap points, band points approached from above) it descends to the real
/// axis.
pub fn standard_path(x_a: f64, h0: f64, z: C64) -> Path {
    assert!(z.im >= 0.0, "standard paths live in the closed upper half-plane");
    let p0 = C64::new(x_a, 0.0);
    let p1 = C64::new(x_a, h0);
    let p2 = C64::new(z.re, h0);
    Path {
        points: vec![p0, p1, p2, z],
    }
}

/// Branch-tracked logarithm `log(z - pole)` continued along a polyline.
///
/// The branch at the first path vertex is the principal one (with the upper
/// limit convention on the negative cut), and the argument is continued
/// segment by segment; segments are subdivided until consecutive increments
/// are unambiguous.  The path must not pass through the pole.
pub fn continued_log(path: &Path, pole: C64) -> C64 {
    let start = path.points[0] - pole;
    let mut arg = principal_arg_upper(start);
    for (p, q) in path.segments() {
        arg += arg_increment(p - pole, q - pole, 0);
    }
    let end = path.points.last().unwrap() - pole;
    C64::new(end.norm().ln(), arg)
}

/// Principal argument with the convention that real negative values are
/// approached from the upper half-plane (`arg = +π`).
fn principal_arg_upper(w: C64) -> f64 {
    if w.im == 0.0 && w.re < 0.0 {
        std::f64::consts::PI
    } else {
        w.arg()
    }
}

/// Continuous argument increment from `w0` to `w1` along a straight segment
/// (in the `w`-plane both are offsets from the pole).
fn arg_increment(w0: C64, w1: C64, depth: usize) -> f64 {
    let ratio = w1 / w0;
    let delta = ratio.arg();
    if delta.abs() < std::f64::consts::FRAC_PI_2 || depth >= 60 {
        return delta;
    }
    let mid = 0.5 * (w0 + w1);
    arg_increment(w0, mid, depth + 1) + arg_increment(mid, w1, depth + 1)
}
