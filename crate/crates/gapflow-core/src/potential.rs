// SPDX-License-Identifier: MIT

//! Potential theory on the complement `Ω = ℂ ∖ E` of a finite-gap set.
//!
//! For a gap set `E` (see [`GapSet`]) this module constructs:
//!
//! * the square-root branch `w` of the edge polynomial, continued through
//!   the gaps so that it is single-valued and analytic on `Ω`;
//! * the Martin function `Θ` with `M = Im Θ > 0` on the upper half-plane,
//!   normalized by `Re Θ(ξ⋆) = 0`, together with its critical points (one
//!   per finite gap) and its additive periods along the fundamental-group
//!   generators;
//! * harmonic measures `ω(·, ·)` of bands and of band groups, their
//!   densities on the gaps, and exact band-edge values;
//! * complex Green functions: `Φ_{x₀}` for a real pole `x₀` in a gap, and
//!   the conjugate-symmetric pair `Φ, Φ^♯` for the poles `±i`, with
//!   branch-tracked logarithms continued along standard paths;
//! * the Widom function `𝒲 = ∏_j Φ_{c_j}` over the critical points;
//! * the characters of every multi-valued factor, expressed through
//!   harmonic measures.
//!
//! Evaluators accept points of the closed upper half-plane; real arguments
//! are interpreted as upper-side boundary limits.  Lower-half-plane values,
//! where meaningful, follow from the reflection symmetry of each object and
//! are provided only for the conjugation-invariant ones.

use crate::gapset::{GapSet, Generator, SideMode};
use crate::quad::{self, EdgeExponent, Path};
use crate::{C64, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Numerical parameters of the potential-theory solvers.
#[derive(Debug, Clone)]
pub struct Params {
    /// Absolute tolerance for adaptive path integrals.
    pub path_tol: f64,
    /// Base panel size for edge-weighted quadrature; doubled until two
    /// consecutive refinements agree.
    pub cheb_n: usize,
    /// Acceptance threshold for residuals of the (possibly redundant)
    /// linear systems.  A violation signals an inconsistent assembly and is
    /// reported as an error instead of being absorbed by least squares.
    pub residual_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            path_tol: 1e-11,
            cheb_n: 64,
            residual_tol: 1e-8,
        }
    }
}

// ---------------------------------------------------------------------------
// Square-root branch helpers.
// ---------------------------------------------------------------------------

/// Principal square root with the upper-limit convention on the negative
/// real axis: `psqrt_upper(-r) = i√r` for `r > 0`.
fn psqrt_upper(w: C64) -> C64 {
    if w.im == 0.0 && w.re < 0.0 {
        C64::new(0.0, (-w.re).sqrt())
    } else {
        w.sqrt()
    }
}

/// Product of principal square roots `∏_e psqrt_upper(z - e)` over the
/// edges of `E`.  Analytic on the open upper half-plane and continuous up to
/// the real axis from above.
pub fn w_surd(set: &GapSet, z: C64) -> C64 {
    set.edges()
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, &e| acc * psqrt_upper(z - e))
}

/// The single-valued branch of the square root of the edge polynomial on
/// `Ω`: equal to [`w_surd`] on the closed upper half-plane and to its
/// negative below.  This choice is continuous across every gap and odd
/// under conjugation, `w(z̄) = -conj w(z)`.
pub fn w_omega(set: &GapSet, z: C64) -> C64 {
    if z.im >= 0.0 {
        w_surd(set, z)
    } else {
        -w_surd(set, z)
    }
}

/// `|w(x)|` for real `x`.
pub fn w_abs(set: &GapSet, x: f64) -> f64 {
    set.edges()
        .iter()
        .map(|&e| (x - e).abs())
        .product::<f64>()
        .sqrt()
}

/// Logarithmic derivative `w'/w = ½ Σ_e 1/(z - e)`.
fn w_log_deriv(set: &GapSet, z: C64) -> C64 {
    0.5 * set
        .edges()
        .iter()
        .fold(C64::new(0.0, 0.0), |acc, &e| acc + (z - e).inv())
}

/// Derivative of [`w_log_deriv`]: `-½ Σ_e 1/(z - e)²`.
fn w_log_deriv_prime(set: &GapSet, z: C64) -> C64 {
    -0.5 * set.edges().iter().fold(C64::new(0.0, 0.0), |acc, &e| {
        let d = (z - e).inv();
        acc + d * d
    })
}

/// `(c / w(ζ) - 1) / (ζ - s)` where `c` is the branch value of `w` at the
/// matched point `s`, so the singularity at `ζ = s` is removable.  A short
/// series is used once direct evaluation would lose accuracy.
fn matched_ratio(set: &GapSet, c: C64, s: C64, zeta: C64) -> C64 {
    let d = zeta - s;
    if d.norm() < 1e-7 {
        let ld = w_log_deriv(set, s);
        let ldp = w_log_deriv_prime(set, s);
        -ld + (ld * ld - ldp) * d * 0.5
    } else {
        (c / w_surd(set, zeta) - 1.0) / d
    }
}

/// Horner evaluation of a real-coefficient polynomial (low to high) at a
/// complex point.
fn poly_eval(c: &[f64], z: C64) -> C64 {
    c.iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// Horner evaluation at a real point.
fn poly_eval_real(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Wraps a real number into `[0, 1)`; characters live on the unit circle
/// written additively.
pub fn wrap_unit(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y == 1.0 {
        0.0
    } else {
        y
    }
}

// ---------------------------------------------------------------------------
// Green-function data carriers.
// ---------------------------------------------------------------------------

/// Green function of the conjugate pole pair `±i`.
///
/// The pair is stored through the single-valued product data: the
/// logarithmic derivative of `ΦΦ^♯` is rational over the branch `w`, and
/// the quotient is the Möbius factor `Φ/Φ^♯ = e^{ic⋆}(z-i)/(z+i)`.  The
/// modulus constant is pinned by `|ΦΦ^♯| = 1` on the bands, the phase
/// constant by `ΦΦ^♯(ξ⋆) = |Φ(ξ⋆)|² > 0`, and `c⋆` by `Φ^♯(i) > 0`
/// (equivalently `Φ(-i) > 0`).
#[derive(Debug, Clone)]
pub struct PairGreen {
    /// `w(i)`.
    y_i: C64,
    /// Real coefficients of the regular numerator part, low to high.
    qhat: Vec<f64>,
    /// `Re C`; pins `|ΦΦ^♯| = 1` on the bands through the anchor.
    re_c: f64,
    /// `Im C`; pins `ΦΦ^♯ > 0` at `ξ⋆`.
    im_c: f64,
    /// Phase constant of the quotient `v = e^{ic⋆}(z-i)/(z+i)`.
    c_star: f64,
    /// `Φ'(i)`, exact from the split form.
    dphi_i: C64,
    /// Character of `Φ` (equal to that of `Φ^♯`) on the generators.
    beta: Vec<f64>,
}

/// Green function data for a single real pole inside a gap.
///
/// Poles that coincide with a band edge make the function degenerate to the
/// constant `1`; such instances are flagged `trivial` and all evaluators
/// return the corresponding trivial values.
#[derive(Debug, Clone)]
pub struct PoleGreen {
    /// Pole location.
    x0: f64,
    /// Containing gap as an index into `GapSet::all_gaps`.
    gap_index: usize,
    /// Whether the pole sits at a band edge.
    trivial: bool,
    /// `σ |w(x₀)|`: the upper-side value of `w/i` at the pole.
    yhat: f64,
    /// Real numerator coefficients, low to high, length `g`.
    qhat: Vec<f64>,
    /// Real part of the integration constant.
    re_c: f64,
    /// Imaginary part of the integration constant.
    im_c: f64,
    /// Character on the generators.
    beta: Vec<f64>,
}

impl PoleGreen {
    /// Pole location.
    pub fn pole(&self) -> f64 {
        self.x0
    }

    /// Whether the pole degenerated to a band edge.
    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// Index of the containing gap into `GapSet::all_gaps`, when the pole
    /// lies in a gap interior.
    pub fn gap_index(&self) -> Option<usize> {
        if self.trivial {
            None
        } else {
            Some(self.gap_index)
        }
    }

    /// Character of the function on the generators, one entry in `[0, 1)`
    /// per generator.
    pub fn character(&self) -> &[f64] {
        &self.beta
    }
}

// ---------------------------------------------------------------------------
// The assembled potential-theory state.
// ---------------------------------------------------------------------------

/// All potential-theory data attached to one gap set.
///
/// Construction runs the global solves (Martin numerator, harmonic
/// measures, the pole-pair Green function, the Widom product) and caches
/// what the evaluators need; evaluation methods are then pure quadrature.
pub struct Potential {
    set: GapSet,
    params: Params,
    /// Height of the horizontal leg of every standard evaluation path.
    h0: f64,
    /// Real anchor (a band interior point) for Green-type path integrals.
    anchor: f64,
    /// `σ_j` per entry of `all_gaps`: the upper-side branch of `w` on gap
    /// `j` is `iσ_j |w|`.
    sigma: Vec<f64>,
    /// Upper-side sign of `w` on each band.
    bsign: Vec<f64>,
    /// Monic numerator coefficients of `Θ'`, low to high, length `g + 1`.
    martin_p: Vec<f64>,
    /// Critical points of the Martin function, one per finite gap.
    critical: Vec<f64>,
    /// `M(ξ⋆) = Im Θ(ξ⋆)`.
    m_xi: f64,
    /// Cached `Θ(i)`.
    theta_at_i: C64,
    /// Additive periods of `Θ` along the generators.
    eta: Vec<f64>,
    /// Gap moments `∫ t^n/|w| dt` per `all_gaps` entry, `n = 0..=g`
    /// (the infinite gap carries only `n < g`; its top slot is unused).
    moments: Vec<Vec<f64>>,
    /// Harmonic-measure numerator coefficients per band, length `g` each.
    hm: Vec<Vec<f64>>,
    /// Pole-pair Green data.
    pair: PairGreen,
    /// Green data at the critical points; their product is the Widom
    /// function.
    widom_poles: Vec<PoleGreen>,
    /// Character of the Widom function.
    beta_widom: Vec<f64>,
}

impl Potential {
    /// Builds the full potential-theory state for `set`.
    pub fn new(set: GapSet, params: Params) -> Result<Self> {
        let g = set.num_gaps();
        let h0 = (set.min_gap_length() * 0.25).min(0.5);
        let all = set.all_gaps();
        let bands = set.bands();
        let sigma: Vec<f64> = (0..all.len()).map(|j| set.gap_sigma(j)).collect();
        let bsign: Vec<f64> = (0..bands.len()).map(|m| set.band_sign(m)).collect();
        let anchor =
            bands[set.band_right_of_gap(set.normalization_gap_in_all())].interior_point();

        let mut pot = Potential {
            set,
            params,
            h0,
            anchor,
            sigma,
            bsign,
            martin_p: Vec::new(),
            critical: Vec::new(),
            m_xi: 0.0,
            theta_at_i: C64::new(0.0, 0.0),
            eta: Vec::new(),
            moments: Vec::new(),
            hm: Vec::new(),
            pair: PairGreen {
                y_i: C64::new(0.0, 0.0),
                qhat: Vec::new(),
                re_c: 0.0,
                im_c: 0.0,
                c_star: 0.0,
                dphi_i: C64::new(0.0, 0.0),
                beta: Vec::new(),
            },
            widom_poles: Vec::new(),
            beta_widom: Vec::new(),
        };

        pot.compute_moments(g)?;
        pot.solve_martin(g)?;
        pot.locate_critical_points()?;
        pot.compute_martin_constants()?;
        pot.solve_harmonics(g)?;
        pot.build_pair(g)?;
        pot.build_widom()?;
        pot.theta_at_i = pot.theta(C64::new(0.0, 1.0));
        Ok(pot)
    }

    /// The underlying gap set.
    pub fn set(&self) -> &GapSet {
        &self.set
    }

    /// Numerical parameters in use.
    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Path height of the standard evaluation paths.
    pub fn path_height(&self) -> f64 {
        self.h0
    }

    /// Band anchor of the Green-type path integrals.
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Instance wrapper around [`w_surd`].
    pub fn w_upper(&self, z: C64) -> C64 {
        w_surd(&self.set, z)
    }

    /// Instance wrapper around [`w_omega`].
    pub fn w(&self, z: C64) -> C64 {
        w_omega(&self.set, z)
    }

    // -- shared quadrature helpers -----------------------------------------

    /// `|w(t)|` with the two factors at `lo` and `hi` removed; the smooth
    /// positive remainder of the edge weight on `[lo, hi]`.
    fn rho_without(&self, lo: f64, hi: f64, t: f64) -> f64 {
        let mut r = 1.0;
        for &e in &self.set.edges() {
            if e != lo && e != hi {
                r *= (t - e).abs();
            }
        }
        r.sqrt()
    }

    /// `|w(t)|` with the single factor at `skip` removed: the smooth part of
    /// the weight near one edge.
    fn rho_except(&self, skip: f64, t: f64) -> f64 {
        let mut r = 1.0;
        for &e in &self.set.edges() {
            if e != skip {
                r *= (t - e).abs();
            }
        }
        r.sqrt()
    }

    /// Chebyshev–Gauss integration of `f / sqrt((x-lo)(hi-x))` with panel
    /// doubling until two refinements agree.
    fn cheb_converge<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> f64 {
        let mut n = self.params.cheb_n;
        let mut prev = quad::integrate_chebyshev(n, lo, hi, |x| C64::new(f(x), 0.0)).re;
        loop {
            n *= 2;
            let cur = quad::integrate_chebyshev(n, lo, hi, |x| C64::new(f(x), 0.0)).re;
            if (cur - prev).abs() <= 1e-13 * (1.0 + cur.abs()) || n >= 4096 {
                return cur;
            }
            prev = cur;
        }
    }

    /// `∫_{-∞}^{e₀} f(t)/|w(t)| dt` for the infinite gap of a semibounded
    /// set; the substitution `t = e₀ - u²` removes the edge singularity.
    fn virtual_gap_integral<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let e0 = match self.set.side() {
            SideMode::SemiboundedBelow { e0 } => e0,
            SideMode::TwoSided => unreachable!("two-sided sets have no infinite gap"),
        };
        let set = &self.set;
        quad::integrate_ray_down(
            |t| C64::new(f(t) / w_abs(set, t), 0.0),
            e0,
            self.params.path_tol,
        )
        .re
    }

    /// Precomputes the monomial gap moments `∫ t^n/|w| dt`.
    fn compute_moments(&mut self, g: usize) -> Result<()> {
        let all = self.set.all_gaps();
        let mut moments = Vec::with_capacity(all.len());
        for gap in &all {
            let mut row = vec![0.0; g + 1];
            if gap.is_finite() {
                let (lo, hi) = (gap.lo, gap.hi);
                for (n, slot) in row.iter_mut().enumerate() {
                    *slot = self.cheb_converge(lo, hi, |t| {
                        t.powi(n as i32) / self.rho_without(lo, hi, t)
                    });
                }
            } else {
                for n in 0..g {
                    row[n] = self.virtual_gap_integral(|t| t.powi(n as i32));
                }
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_convergence("gap moment integration diverged"));
            }
            moments.push(row);
        }
        self.moments = moments;
        Ok(())
    }

    /// Solves the amplitude conditions for the monic Martin numerator: the
    /// weighted average of `P` over every finite gap must vanish.
    fn solve_martin(&mut self, g: usize) -> Result<()> {
        let all = self.set.all_gaps();
        let finite: Vec<usize> = (0..all.len()).filter(|&j| all[j].is_finite()).collect();
        let mut a = DMatrix::<f64>::zeros(finite.len(), g);
        let mut rhs = DVector::<f64>::zeros(finite.len());
        for (r, &j) in finite.iter().enumerate() {
            for n in 0..g {
                a[(r, n)] = self.moments[j][n];
            }
            rhs[r] = -self.moments[j][g];
        }
        let sol = solve_consistent(&a, &rhs, self.params.residual_tol, "martin numerator")?;
        let mut p = sol;
        p.push(1.0);
        self.martin_p = p;
        Ok(())
    }

    /// Brackets and bisects the unique zero of the Martin numerator in each
    /// finite gap.
    fn locate_critical_points(&mut self) -> Result<()> {
        let mut crit = Vec::with_capacity(self.set.num_gaps());
        for &(lo, hi) in self.set.finite_gaps() {
            let (mut a, mut b) = (lo, hi);
            let (fa, fb) = (
                poly_eval_real(&self.martin_p, a),
                poly_eval_real(&self.martin_p, b),
            );
            if fa == 0.0 {
                crit.push(a);
                continue;
            }
            if fb == 0.0 {
                crit.push(b);
                continue;
            }
            if fa.signum() == fb.signum() {
                return Err(Error::non_convergence(format!(
                    "martin numerator does not change sign over the gap ({lo}, {hi})"
                )));
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = poly_eval_real(&self.martin_p, m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            crit.push(0.5 * (a + b));
        }
        self.critical = crit;
        Ok(())
    }

    /// Computes `M(ξ⋆)` and the additive periods along the generators.
    fn compute_martin_constants(&mut self) -> Result<()> {
        let norm_all = self.set.normalization_gap_in_all();
        let gap = self.set.all_gaps()[norm_all];
        let sig = self.sigma[norm_all];
        let xi = self.set.xi_star();
        let m_xi = -sig
            * quad::integrate_left_edge(
                |t| C64::new(poly_eval_real(&self.martin_p, t) / self.rho_except(gap.lo, t), 0.0),
                gap.lo,
                xi,
                self.params.path_tol,
            )
            .re;
        if !(m_xi > 0.0) {
            return Err(Error::non_convergence(format!(
                "Martin majorant must be positive at the normalization point, got {m_xi}"
            )));
        }
        self.m_xi = m_xi;

        let bands = self.set.bands();
        let mut eta = Vec::new();
        for generator in self.set.generators() {
            let mut period = 0.0;
            for &m in &generator.band_group {
                let (lo, hi) = (bands[m].lo, bands[m].hi);
                let integral = self.cheb_converge(lo, hi, |t| {
                    poly_eval_real(&self.martin_p, t) / self.rho_without(lo, hi, t)
                });
                period += self.bsign[m] * integral;
            }
            eta.push(-2.0 * generator.winding * period);
        }
        self.eta = eta;
        Ok(())
    }

    // -- Martin function API -----------------------------------------------

    /// Coefficients of the monic Martin numerator, low to high.
    pub fn martin_numerator(&self) -> &[f64] {
        &self.martin_p
    }

    /// Critical points of the Martin function, one per finite gap.
    pub fn critical_points(&self) -> &[f64] {
        &self.critical
    }

    /// `M(ξ⋆)`, the value of the Martin majorant at the normalization
    /// point.
    pub fn m_at_xi(&self) -> f64 {
        self.m_xi
    }

    /// `Θ'(z) = P(z)/w(z)`; valid in both half-planes and on gaps.
    pub fn theta_prime(&self, z: C64) -> C64 {
        poly_eval(&self.martin_p, z) / w_omega(&self.set, z)
    }

    /// The Martin function `Θ`, continued from `Θ(ξ⋆) = i M(ξ⋆)` along
    /// standard paths.  Lower-half-plane values use `Θ(z̄) = -conj Θ(z)`.
    pub fn theta(&self, z: C64) -> C64 {
        if z.im < 0.0 {
            return -self.theta(z.conj()).conj();
        }
        let path = quad::standard_path(self.set.xi_star(), self.h0, z);
        let p = &self.martin_p;
        let set = &self.set;
        let val = path.integrate(
            |zeta| poly_eval(p, zeta) / w_surd(set, zeta),
            self.params.path_tol,
        );
        C64::new(0.0, self.m_xi) + val
    }

    /// `Θ(i)`.
    pub fn theta_at_i(&self) -> C64 {
        self.theta_at_i
    }

    /// `θ_i = Im Θ(i)`.
    pub fn theta_i(&self) -> f64 {
        self.theta_at_i.im
    }

    /// `θ_r = Re Θ(i)`.
    pub fn theta_r(&self) -> f64 {
        self.theta_at_i.re
    }

    /// Additive periods of `Θ` along the generators, in generator order.
    pub fn eta_raw(&self) -> &[f64] {
        &self.eta
    }

    /// Character of `e^{iΘ}` on the generators: the periods divided by
    /// `2π`, wrapped into `[0, 1)`.
    pub fn eta_char(&self) -> Vec<f64> {
        self.eta.iter().map(|&e| wrap_unit(e / (2.0 * PI))).collect()
    }

    /// Dimensionless growth check of `M` along the imaginary axis: the
    /// ratio of `M(iy)` to its normalized leading behavior, evaluated at a
    /// large height.  Converges to `1` like `O(1/y)`.
    pub fn martin_slope_check(&self, y: f64) -> f64 {
        let m = self.theta(C64::new(0.0, y)).im;
        match self.set.side() {
            SideMode::TwoSided => m / y,
            SideMode::SemiboundedBelow { .. } => m / (2.0 * y).sqrt(),
        }
    }

    // -- harmonic measures --------------------------------------------------

    /// Solves the gap-jump conditions for the harmonic-measure numerator of
    /// each band.  For a semibounded set the infinite gap supplies one
    /// redundant condition which doubles as a consistency check.
    fn solve_harmonics(&mut self, g: usize) -> Result<()> {
        let all = self.set.all_gaps();
        let nbands = self.set.bands().len();
        let mut a = DMatrix::<f64>::zeros(all.len(), g);
        for (r, row) in self.moments.iter().enumerate() {
            for n in 0..g {
                a[(r, n)] = self.sigma[r] * row[n];
            }
        }
        let mut hm = Vec::with_capacity(nbands);
        for k in 0..nbands {
            let mut rhs = DVector::<f64>::zeros(all.len());
            for (r, _) in all.iter().enumerate() {
                let right = self.set.band_right_of_gap(r);
                let vr = if right == k { 1.0 } else { 0.0 };
                let vl = match self.set.band_left_of_gap(r) {
                    Some(l) => {
                        if l == k {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    // Left neighbor is the boundary point at infinity: the
                    // measure of the unbounded band tends to 1 there.
                    None => {
                        if k == nbands - 1 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                rhs[r] = vr - vl;
            }
            let sol = solve_consistent(&a, &rhs, self.params.residual_tol, "harmonic measure")?;
            hm.push(sol);
        }
        self.hm = hm;
        Ok(())
    }

    /// Numerator coefficients of the harmonic measure of band `k`.
    pub fn harmonic_coeffs(&self, k: usize) -> &[f64] {
        &self.hm[k]
    }

    /// Summed numerator coefficients over a generator's band group.
    fn group_coeffs(&self, generator: &Generator) -> Vec<f64> {
        let g = self.set.num_gaps();
        let mut c = vec![0.0; g];
        for &m in &generator.band_group {
            for (n, v) in self.hm[m].iter().enumerate() {
                c[n] += v;
            }
        }
        c
    }

    /// Harmonic measure with a caller-supplied numerator and band-value
    /// indicator, for a real point that lies in a gap, on a band, or at an
    /// edge.
    fn omega_real_with(&self, x: f64, coeffs: &[f64], target: &dyn Fn(usize) -> f64) -> f64 {
        match self.set.gap_of_point(x) {
            None => {
                // On a band (or at one of its edges): the measure takes its
                // boundary value there.
                let bands = self.set.bands();
                for (m, b) in bands.iter().enumerate() {
                    if b.lo <= x && x <= b.hi {
                        return target(m);
                    }
                }
                f64::NAN
            }
            Some(j) => {
                let gap = self.set.all_gaps()[j];
                let sig = self.sigma[j];
                let set = &self.set;
                let vr = target(self.set.band_right_of_gap(j));
                if !gap.is_finite() {
                    let e0 = gap.hi;
                    if e0 - x <= 1.0 {
                        let smooth = |t: f64| {
                            C64::new(poly_eval_real(coeffs, t) / self.rho_except(e0, t), 0.0)
                        };
                        vr - sig
                            * quad::integrate_right_edge(smooth, x, e0, self.params.path_tol).re
                    } else {
                        let vl = target(self.set.bands().len() - 1);
                        let density = |t: f64| {
                            C64::new(poly_eval_real(coeffs, t) / w_abs(set, t), 0.0)
                        };
                        vl + sig
                            * quad::integrate_ray_down(density, x, self.params.path_tol).re
                    }
                } else if x <= gap.midpoint() {
                    let vl = target(self.set.band_left_of_gap(j).expect("finite gap"));
                    let smooth = |t: f64| {
                        C64::new(poly_eval_real(coeffs, t) / self.rho_except(gap.lo, t), 0.0)
                    };
                    vl + sig
                        * quad::integrate_left_edge(smooth, gap.lo, x, self.params.path_tol).re
                } else {
                    let smooth = |t: f64| {
                        C64::new(poly_eval_real(coeffs, t) / self.rho_except(gap.hi, t), 0.0)
                    };
                    vr - sig
                        * quad::integrate_right_edge(smooth, x, gap.hi, self.params.path_tol).re
                }
            }
        }
    }

    /// Harmonic measure at a complex point with a caller-supplied
    /// numerator; integrates the analytic completion from `ξ⋆`.
    fn omega_complex_with(&self, z: C64, coeffs: &[f64], target: &dyn Fn(usize) -> f64) -> f64 {
        if z.im == 0.0 {
            return self.omega_real_with(z.re, coeffs, target);
        }
        let zz = if z.im < 0.0 { z.conj() } else { z };
        let base = self.omega_real_with(self.set.xi_star(), coeffs, target);
        let path = quad::standard_path(self.set.xi_star(), self.h0, zz);
        let set = &self.set;
        let increment = path.integrate(
            |zeta| C64::i() * poly_eval(coeffs, zeta) / w_surd(set, zeta),
            self.params.path_tol,
        );
        base + increment.re
    }

    /// Harmonic measure `ω(z, band_k)`; symmetric under conjugation.
    pub fn omega_band(&self, z: C64, k: usize) -> f64 {
        let target = move |m: usize| if m == k { 1.0 } else { 0.0 };
        self.omega_complex_with(z, &self.hm[k], &target)
    }

    /// Harmonic measure of a generator's band group.
    pub fn omega_generator(&self, generator: &Generator, z: C64) -> f64 {
        let coeffs = self.group_coeffs(generator);
        let group = &generator.band_group;
        let target = move |m: usize| if group.contains(&m) { 1.0 } else { 0.0 };
        self.omega_complex_with(z, &coeffs, &target)
    }

    /// Density `dω(x, band_k)/dx` at a point strictly inside a gap.
    pub fn omega_band_density(&self, x: f64, k: usize) -> f64 {
        let j = self
            .set
            .gap_of_point(x)
            .expect("harmonic density is defined on gap interiors");
        self.sigma[j] * poly_eval_real(&self.hm[k], x) / w_abs(&self.set, x)
    }

    /// Density of the band-group measure of a generator at a gap point.
    pub fn omega_generator_density(&self, generator: &Generator, x: f64) -> f64 {
        let j = self
            .set
            .gap_of_point(x)
            .expect("harmonic density is defined on gap interiors");
        let coeffs = self.group_coeffs(generator);
        self.sigma[j] * poly_eval_real(&coeffs, x) / w_abs(&self.set, x)
    }

    /// Character on the generators of the Green factor with pole `z₀`: the
    /// phase gained per loop is `-winding · ω(z₀, band group)` turns, so the
    /// loop orientation enters the character, wrapped into `[0, 1)`.
    pub fn character_of_point(&self, z0: C64) -> Vec<f64> {
        self.set
            .generators()
            .iter()
            .map(|gen| wrap_unit(-gen.winding * self.omega_generator(gen, z0)))
            .collect()
    }

    // -- pole-pair Green function -------------------------------------------

    /// Solves the gap conditions of the pole-pair Green function and pins
    /// its normalization constants.
    fn build_pair(&mut self, g: usize) -> Result<()> {
        let y_i = w_surd(&self.set, C64::new(0.0, 1.0));
        let (re_y, im_y) = (y_i.re, y_i.im);
        let all = self.set.all_gaps();
        let mut a = DMatrix::<f64>::zeros(all.len(), g);
        for (r, row) in self.moments.iter().enumerate() {
            for n in 0..g {
                a[(r, n)] = row[n];
            }
        }
        let rational = move |t: f64| (2.0 * t * im_y + 2.0 * re_y) / (t * t + 1.0);
        let mut rhs = DVector::<f64>::zeros(all.len());
        for (r, gap) in all.iter().enumerate() {
            rhs[r] = if gap.is_finite() {
                let (lo, hi) = (gap.lo, gap.hi);
                -self.cheb_converge(lo, hi, |t| rational(t) / self.rho_without(lo, hi, t))
            } else {
                -self.virtual_gap_integral(rational)
            };
        }
        let qhat = solve_consistent(&a, &rhs, self.params.residual_tol, "pole-pair numerator")?;
        let re_c = -(self.anchor * self.anchor + 1.0).ln();
        self.pair = PairGreen {
            y_i,
            qhat,
            re_c,
            im_c: 0.0,
            c_star: 0.0,
            dphi_i: C64::new(0.0, 0.0),
            beta: Vec::new(),
        };
        // Pin the phase of ΦΦ^♯ at ξ⋆, where the product equals |Φ(ξ⋆)|² > 0.
        // (On a band the product is unimodular but carries a nontrivial phase,
        // so the anchor can only pin the modulus constant.)
        let xi = C64::new(self.set.xi_star(), 0.0);
        let path_xi = self.pair_path(xi);
        let logs_xi = self.pair_lambda(&path_xi)
            + quad::continued_log(&path_xi, C64::new(0.0, 1.0))
            + quad::continued_log(&path_xi, C64::new(0.0, -1.0));
        self.pair.im_c = -logs_xi.im;
        // Pin c⋆ by Φ^♯(i) = 2i·exp(½(Λ(i) + C - ic⋆)) > 0, without wrapping:
        // a 2π shift of c⋆ would flip the sign of both split factors.
        let pole = C64::new(0.0, 1.0);
        let lam_i = self.pair_lambda(&self.pair_path(pole));
        self.pair.c_star = PI + lam_i.im + self.pair.im_c;
        let c = C64::new(self.pair.re_c, self.pair.im_c + self.pair.c_star);
        self.pair.dphi_i = ((lam_i + c) * 0.5).exp();
        self.pair.beta = self.character_of_point(pole);
        Ok(())
    }

    /// The evaluation path from the anchor to `z`, bent slightly off the
    /// imaginary axis whenever the final vertical leg would pass through the
    /// pole at `i`.
    fn pair_path(&self, z: C64) -> quad::Path {
        if z.re == 0.0 && z.im > 1.0 {
            let delta = 1e-9 * (1.0 + self.anchor.abs());
            quad::Path {
                points: vec![
                    C64::new(self.anchor, 0.0),
                    C64::new(self.anchor, self.h0),
                    C64::new(delta, self.h0),
                    C64::new(delta, z.im),
                    z,
                ],
            }
        } else {
            quad::standard_path(self.anchor, self.h0, z)
        }
    }

    /// Path integral of the pair integrand: the logarithmic derivative of
    /// `ΦΦ^♯` with both Cauchy factors split off, which is regular at `±i`.
    fn pair_lambda(&self, path: &quad::Path) -> C64 {
        let set = &self.set;
        let y_i = self.pair.y_i;
        let y_mi = -y_i.conj();
        let qhat = &self.pair.qhat;
        path.integrate(
            |zeta| {
                matched_ratio(set, y_i, C64::new(0.0, 1.0), zeta)
                    + matched_ratio(set, y_mi, C64::new(0.0, -1.0), zeta)
                    + C64::i() * poly_eval(qhat, zeta) / w_surd(set, zeta)
            },
            self.params.path_tol,
        )
    }

    /// Evaluates the split pair `(Φ(z), Φ^♯(z))` with a single path
    /// integration.  The exponential of the branch-tracked `log(z ∓ i)`
    /// collapses to the plain linear factor, so
    /// `Φ = (z - i)·exp(½(Λ + C + ic⋆))` and
    /// `Φ^♯ = (z + i)·exp(½(Λ + C - ic⋆))`.
    pub fn pair_values(&self, z: C64) -> (C64, C64) {
        debug_assert!(z.im >= 0.0, "pair evaluators live in the closed upper half-plane");
        let lam = self.pair_lambda(&self.pair_path(z));
        let c = C64::new(self.pair.re_c, self.pair.im_c);
        let half_star = C64::new(0.0, 0.5 * self.pair.c_star);
        let base = (lam + c) * 0.5;
        (
            (z - C64::i()) * (base + half_star).exp(),
            (z + C64::i()) * (base - half_star).exp(),
        )
    }

    /// `Φ(z)` of the pole pair on the closed upper half-plane.
    pub fn phi(&self, z: C64) -> C64 {
        self.pair_values(z).0
    }

    /// `Φ^♯(z)` of the pole pair on the closed upper half-plane.
    pub fn phi_sharp(&self, z: C64) -> C64 {
        self.pair_values(z).1
    }

    /// Logarithmic derivative `(ΦΦ^♯)'/(ΦΦ^♯)`; single-valued on `Ω`, valid
    /// in both half-planes.
    pub fn pair_log_derivative(&self, z: C64) -> C64 {
        let y_i = self.pair.y_i;
        let numerator = y_i / (z - C64::i()) - y_i.conj() / (z + C64::i())
            + C64::i() * poly_eval(&self.pair.qhat, z);
        numerator / w_omega(&self.set, z)
    }

    /// `Φ'(i)`, exact up to quadrature: the split form collapses to
    /// `exp(½(Λ(i) + C + ic⋆))` at the pole.
    pub fn phi_prime_at_i(&self) -> C64 {
        self.pair.dphi_i
    }

    /// The unimodular Möbius quotient `v = Φ/Φ^♯ = e^{ic⋆}(z-i)/(z+i)`;
    /// valid in both half-planes.
    pub fn v_quotient(&self, z: C64) -> C64 {
        self.exp_ic_star() * (z - C64::i()) / (z + C64::i())
    }

    /// `e^{ic⋆}`.
    pub fn exp_ic_star(&self) -> C64 {
        C64::from_polar(1.0, self.pair.c_star)
    }

    /// `c⋆` wrapped into `[0, 2π)`.
    pub fn c_star(&self) -> f64 {
        self.pair.c_star.rem_euclid(2.0 * PI)
    }

    /// Character of `Φ` (and of `Φ^♯`) on the generators.
    pub fn beta_phi(&self) -> &[f64] {
        &self.pair.beta
    }

    /// `log(Φ Φ^♯ / ((z - i)(z + i)))` on the closed upper half-plane: the
    /// regular part of the pair product, branch-pinned to be real at `ξ⋆`.
    pub fn log_pair_product(&self, z: C64) -> C64 {
        debug_assert!(z.im >= 0.0, "pair-product log is pinned on the closed upper half-plane");
        self.pair_lambda(&self.pair_path(z)) + C64::new(self.pair.re_c, self.pair.im_c)
    }

    /// Standard evaluation path from the band anchor to `z` in the closed
    /// upper half-plane; its interior stays clear of every gap point.
    pub fn anchor_path(&self, z: C64) -> quad::Path {
        quad::standard_path(self.anchor, self.h0, z)
    }

    // -- real-pole Green functions ------------------------------------------

    /// Builds the Green-function data for a real pole `x₀` lying in a gap
    /// (or at a band edge, where it degenerates).
    pub fn pole_green(&self, x0: f64) -> Result<PoleGreen> {
        // Edge poles degenerate to the constant 1.
        for &e in &self.set.edges() {
            if (x0 - e).abs() <= 1e-11 * (1.0 + e.abs()) {
                return Ok(PoleGreen {
                    x0,
                    gap_index: usize::MAX,
                    trivial: true,
                    yhat: 0.0,
                    qhat: Vec::new(),
                    re_c: 0.0,
                    im_c: 0.0,
                    beta: vec![0.0; self.set.rank()],
                });
            }
        }
        let j0 = self.set.gap_of_point(x0).ok_or_else(|| {
            Error::validation(format!("green pole {x0} must lie in a gap of the set"))
        })?;
        let g = self.set.num_gaps();
        let yhat = self.sigma[j0] * w_abs(&self.set, x0);

        let all = self.set.all_gaps();
        let mut a = DMatrix::<f64>::zeros(all.len(), g);
        for (r, row) in self.moments.iter().enumerate() {
            for n in 0..g {
                a[(r, n)] = row[n];
            }
        }
        let mut rhs = DVector::<f64>::zeros(all.len());
        for (r, gap) in all.iter().enumerate() {
            let integral = if r == j0 {
                self.principal_value_gap(r, x0)
            } else if gap.is_finite() {
                let (lo, hi) = (gap.lo, gap.hi);
                self.cheb_converge(lo, hi, |t| 1.0 / ((t - x0) * self.rho_without(lo, hi, t)))
            } else {
                self.virtual_gap_integral(|t| 1.0 / (t - x0))
            };
            rhs[r] = -yhat * integral;
        }
        let qhat = solve_consistent(&a, &rhs, self.params.residual_tol, "real-pole numerator")?;

        let mut pg = PoleGreen {
            x0,
            gap_index: j0,
            trivial: false,
            yhat,
            qhat,
            re_c: -(self.anchor - x0).abs().ln(),
            im_c: 0.0,
            beta: Vec::new(),
        };
        // Pin the phase so the function is positive at ξ⋆ (in the limit
        // sense when the pole sits exactly at ξ⋆).
        let xi = self.set.xi_star();
        let path = quad::standard_path(self.anchor, self.h0, C64::new(xi, 0.0));
        let lambda = self.pole_lambda(&pg, &path);
        let scale = 1e-12 * (1.0 + xi.abs());
        pg.im_c = if (x0 - xi).abs() <= scale {
            -lambda.im
        } else {
            let clog = quad::continued_log(&path, C64::new(x0, 0.0));
            -(lambda + clog).im
        };
        pg.beta = self.character_of_point(C64::new(x0, 0.0));
        Ok(pg)
    }

    /// Principal-value integral `PV ∫_gap 1/((t-x₀)|w(t)|) dt` for a pole
    /// inside the gap.
    fn principal_value_gap(&self, j: usize, x0: f64) -> f64 {
        let gap = self.set.all_gaps()[j];
        if gap.is_finite() {
            let (lo, hi) = (gap.lo, gap.hi);
            let mid = 0.5 * (lo + hi);
            let r = 0.5 * (hi - lo);
            let theta0 = ((x0 - mid) / r).clamp(-1.0, 1.0).acos();
            let h = |theta: f64| 1.0 / self.rho_without(lo, hi, mid + r * theta.cos());
            let h0 = h(theta0);
            // Derivative fallback for nodes that collide with θ₀.
            let dh = (h(theta0 + 1e-5) - h(theta0 - 1e-5)) / 2e-5;
            let mut n = self.params.cheb_n.max(64);
            let eval = |n: usize| {
                let mut acc = 0.0;
                for i in 0..n {
                    let theta = PI * (2.0 * i as f64 + 1.0) / (2.0 * n as f64);
                    let dc = theta.cos() - theta0.cos();
                    acc += if (theta - theta0).abs() < 1e-6 {
                        -dh / theta0.sin()
                    } else {
                        (h(theta) - h0) / dc
                    };
                }
                acc * PI / n as f64 / r
            };
            let mut prev = eval(n);
            loop {
                n *= 2;
                let cur = eval(n);
                if (cur - prev).abs() <= 1e-12 * (1.0 + cur.abs()) || n >= 8192 {
                    return cur;
                }
                prev = cur;
            }
        } else {
            // Infinite gap: substitute t = e₀ - u² and split the u-line at
            // twice the pole offset; the symmetric inner part carries the
            // principal value.
            let e0 = gap.hi;
            let u0 = (e0 - x0).sqrt();
            let set = &self.set;
            let rho_v = |u: f64| {
                let t = e0 - u * u;
                let mut r = 1.0;
                for &e in &set.edges() {
                    if e != e0 {
                        r *= (t - e).abs();
                    }
                }
                r.sqrt()
            };
            let phi = |u: f64| -2.0 / ((u + u0) * rho_v(u));
            let dphi = (phi(u0 + 1e-6) - phi(u0 - 1e-6)) / 2e-6;
            let inner = quad::integrate_adaptive(
                |u| {
                    let d = u - u0;
                    let v = if d.abs() < 1e-9 {
                        dphi
                    } else {
                        (phi(u) - phi(u0)) / d
                    };
                    C64::new(v, 0.0)
                },
                0.0,
                2.0 * u0,
                self.params.path_tol,
            )
            .re;
            let outer = quad::integrate_ray_up(
                |u| C64::new(phi(u) / (u - u0), 0.0),
                2.0 * u0,
                self.params.path_tol,
            )
            .re;
            inner + outer
        }
    }

    /// Regularized path integrand of a real-pole Green function: the full
    /// logarithmic derivative minus the bare pole `1/(ζ-x₀)`.
    fn pole_lambda(&self, pg: &PoleGreen, path: &Path) -> C64 {
        let set = &self.set;
        let x0 = C64::new(pg.x0, 0.0);
        let c = C64::new(0.0, pg.yhat);
        let qhat = &pg.qhat;
        path.integrate(
            |zeta| {
                matched_ratio(set, c, x0, zeta)
                    + C64::i() * poly_eval(qhat, zeta) / w_surd(set, zeta)
            },
            self.params.path_tol,
        )
    }

    /// Branch-tracked logarithm of the real-pole Green function.  Real
    /// arguments are upper-side limits; lower-half-plane arguments use the
    /// conjugation symmetry of the function.
    pub fn log_phi_pole(&self, pg: &PoleGreen, z: C64) -> C64 {
        if pg.trivial {
            return C64::new(0.0, 0.0);
        }
        if z.im < 0.0 {
            return self.log_phi_pole(pg, z.conj()).conj();
        }
        let path = quad::standard_path(self.anchor, self.h0, z);
        let lambda = self.pole_lambda(pg, &path);
        let clog = quad::continued_log(&path, C64::new(pg.x0, 0.0));
        lambda + clog + C64::new(pg.re_c, pg.im_c)
    }

    /// The real-pole Green factor itself.
    pub fn phi_pole(&self, pg: &PoleGreen, z: C64) -> C64 {
        if pg.trivial {
            return C64::new(1.0, 0.0);
        }
        self.log_phi_pole(pg, z).exp()
    }

    /// The (positive) Green function value `-log |Φ_{x₀}(z)|`.
    pub fn green_value(&self, pg: &PoleGreen, z: C64) -> f64 {
        -self.log_phi_pole(pg, z).re
    }

    /// Logarithmic derivative `Φ'_{x₀}/Φ_{x₀}`; single-valued on `Ω`, valid
    /// in both half-planes.
    pub fn pole_log_derivative(&self, pg: &PoleGreen, z: C64) -> C64 {
        if pg.trivial {
            return C64::new(0.0, 0.0);
        }
        let numerator = C64::new(0.0, pg.yhat) / (z - pg.x0) + C64::i() * poly_eval(&pg.qhat, z);
        numerator / w_omega(&self.set, z)
    }

    // -- Widom function ------------------------------------------------------

    /// Assembles the Widom product over the critical points.
    fn build_widom(&mut self) -> Result<()> {
        let mut poles = Vec::with_capacity(self.critical.len());
        for &c in &self.critical.clone() {
            poles.push(self.pole_green(c)?);
        }
        let rank = self.set.rank();
        let mut beta = vec![0.0; rank];
        for pg in &poles {
            for (k, b) in pg.beta.iter().enumerate() {
                beta[k] = wrap_unit(beta[k] + b);
            }
        }
        self.widom_poles = poles;
        self.beta_widom = beta;
        Ok(())
    }

    /// Branch-tracked logarithm of the Widom function.
    pub fn log_widom(&self, z: C64) -> C64 {
        self.widom_poles
            .iter()
            .fold(C64::new(0.0, 0.0), |acc, pg| acc + self.log_phi_pole(pg, z))
    }

    /// The Widom function `𝒲(z) = ∏_j Φ_{c_j}(z)`.
    pub fn widom(&self, z: C64) -> C64 {
        self.log_widom(z).exp()
    }

    /// Character of the Widom function on the generators.
    pub fn beta_widom(&self) -> &[f64] {
        &self.beta_widom
    }

    /// The Green factors at the critical points.
    pub fn widom_factors(&self) -> &[PoleGreen] {
        &self.widom_poles
    }

    // -- boundary measure ----------------------------------------------------

    /// Integrates `f` over the upper side of `E` against the absolutely
    /// continuous measure `|Θ'(ξ)| dξ / (2π)`.
    ///
    /// The integrand must decay at least like `|ξ|^{-3/2}` relative to the
    /// weight for the tail contributions to converge.
    pub fn integrate_dtheta<F: Fn(f64) -> C64>(&self, f: F, tol: f64) -> C64 {
        let p = &self.martin_p;
        let set = &self.set;
        let mut total = C64::new(0.0, 0.0);
        for band in self.set.bands() {
            if band.is_compact() {
                let (lo, hi) = (band.lo, band.hi);
                let mut n = self.params.cheb_n;
                let smooth = |x: f64| {
                    f(x) * (poly_eval_real(p, x).abs() / self.rho_without(lo, hi, x))
                };
                let mut prev = quad::integrate_chebyshev(n, lo, hi, &smooth);
                let value = loop {
                    n *= 2;
                    let cur = quad::integrate_chebyshev(n, lo, hi, &smooth);
                    if (cur - prev).norm() <= tol * (1.0 + cur.norm()) || n >= 4096 {
                        break cur;
                    }
                    prev = cur;
                };
                total += value;
            } else if band.lo.is_finite() {
                // Right tail [p0, ∞): a unit-length Jacobi panel absorbs the
                // edge singularity, the remainder is a plain ray integral.
                let p0 = band.lo;
                total += self.jacobi_edge_panel(p0, p0 + 1.0, true, &f);
                total += quad::integrate_ray_up(
                    |x| f(x) * (poly_eval_real(p, x).abs() / w_abs(set, x)),
                    p0 + 1.0,
                    tol,
                );
            } else {
                // Left tail (-∞, q0].
                let q0 = band.hi;
                total += self.jacobi_edge_panel(q0 - 1.0, q0, false, &f);
                total += quad::integrate_ray_down(
                    |x| f(x) * (poly_eval_real(p, x).abs() / w_abs(set, x)),
                    q0 - 1.0,
                    tol,
                );
            }
        }
        total / (2.0 * PI)
    }

    /// One Gauss–Jacobi panel `[lo, hi]` with an inverse-square-root weight
    /// at the band edge (`hi` end when `edge_at_lo` is false).
    fn jacobi_edge_panel<F: Fn(f64) -> C64>(
        &self,
        lo: f64,
        hi: f64,
        edge_at_lo: bool,
        f: &F,
    ) -> C64 {
        let p = &self.martin_p;
        let set = &self.set;
        let half = 0.5 * (hi - lo);
        let smooth = |x: f64| {
            let edge = if edge_at_lo { x - lo } else { hi - x };
            f(x) * (poly_eval_real(p, x).abs() * edge.sqrt() / w_abs(set, x))
        };
        let mut n = self.params.cheb_n;
        let eval = |n: usize| {
            let rule = if edge_at_lo {
                quad::gauss_jacobi(n, EdgeExponent::Regular, EdgeExponent::InverseSqrt)
            } else {
                quad::gauss_jacobi(n, EdgeExponent::InverseSqrt, EdgeExponent::Regular)
            };
            let mut acc = C64::new(0.0, 0.0);
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let x = lo + half * (1.0 + t);
                acc += smooth(x) * w;
            }
            // Affine scale of the weight (distance^{-1/2}) plus the plain
            // Jacobian contributes half^{1/2}.
            acc * half.sqrt()
        };
        let mut prev = eval(n);
        loop {
            n *= 2;
            let cur = eval(n);
            if (cur - prev).norm() <= 1e-12 * (1.0 + cur.norm()) || n >= 512 {
                return cur;
            }
            prev = cur;
        }
    }

    // -- generator loops -----------------------------------------------------

    /// Integrates `f` along the rectangular realization of a generator
    /// loop: upward through the normalization gap at `ξ⋆`, downward through
    /// the generator's gap at `crossing` (its midpoint by default).
    ///
    /// The integrand must be single-valued on `Ω` (use the logarithmic
    /// derivatives, not the multi-valued logarithms).
    pub fn loop_integral<F: Fn(C64) -> C64>(
        &self,
        generator: &Generator,
        f: F,
        crossing: Option<f64>,
        tol: f64,
    ) -> C64 {
        let xr = self.set.xi_star();
        let xl = crossing.unwrap_or_else(|| {
            if generator.gap.is_finite() {
                generator.gap.midpoint()
            } else {
                generator.gap.hi - 1.0
            }
        });
        let h = self.h0;
        let pts = vec![
            C64::new(xr, 0.0),
            C64::new(xr, h),
            C64::new(xl, h),
            C64::new(xl, -h),
            C64::new(xr, -h),
            C64::new(xr, 0.0),
        ];
        let path = Path { points: pts };
        path.integrate(f, tol)
    }
}

/// Solves `A x = b`, exactly for square systems and in the least-squares
/// sense otherwise, verifying the residual in both cases so a redundant row
/// acts as a consistency check.
fn solve_consistent(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    tol: f64,
    what: &str,
) -> Result<Vec<f64>> {
    let sol = if a.nrows() == a.ncols() {
        a.clone()
            .lu()
            .solve(rhs)
            .ok_or_else(|| Error::non_convergence(format!("singular system for {what}")))?
    } else {
        a.clone()
            .svd(true, true)
            .solve(rhs, 1e-13)
            .map_err(|e| Error::non_convergence(format!("svd failed for {what}: {e}")))?
    };
    let residual = (a * &sol - rhs).amax();
    let scale = 1.0 + rhs.amax();
    if residual > tol * scale {
        return Err(Error::non_convergence(format!(
            "inconsistent conditions for {what}: residual {residual:.3e}"
        )));
    }
    Ok(sol.iter().copied().collect())
}
