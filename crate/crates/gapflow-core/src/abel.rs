// SPDX-License-Identifier: MIT

//! Divisors on the isospectral torus and the Abel map.
//!
//! A reflectionless structure on a finite-gap set is labeled by a *divisor*:
//! one pair `(x_j, ε_j)` per gap, with `x_j` in the closed gap and a sheet
//! sign `ε_j = ±1` that is irrelevant when `x_j` sits at a band edge.  The
//! divisor enters through the normalized product
//!
//! ```text
//!           ⎧ Φ(z)   Φ♯(z)        z - x_j           √(1+c_j²) Φ_{c_j}(z) ⎫ ½
//! κ_D(z) =  ⎨ ───── · ───── · ∏ ────────────────— · ──────────────────── ⎬   · ∏ Φ_{x_j}^{(1+ε_j)/2}
//!           ⎩ z - i   z + i    ʲ √(1+x_j²) Φ_{x_j}         z - c_j       ⎭
//! ```
//!
//! over the critical points `c_j` of the Martin function.  The *Abel map*
//! sends a divisor to the pair `(α, τ)`: the character `α` of `κ_D` on the
//! loop generators, reported in `[0, 1)` per generator, and a unimodular
//! twist `τ` extracted from the values of the sheet-flipped product at `±i`.
//! The map is a bijection onto the character torus times the circle; a
//! damped Newton iteration inverts it, and the inverse drives the
//! translation flow `α ↦ α - ℓη`, which holds `τ` fixed.
//!
//! Characters follow the loop convention of
//! [`Potential::character_of_point`]: each generator loop runs upward
//! through the normalization gap at `ξ⋆` and downward through its own gap,
//! with orientation `winding`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gapset::{Gap, GapSet, Generator};
use crate::potential::{wrap_unit, Potential};
use crate::quad;
use crate::C64;

/// Largest value of `tan²(φ/2)` used by the chart of the infinite gap; the
/// chart therefore never reaches the ideal boundary point of that gap.
const VIRTUAL_CHART_CAP: f64 = 1e8;

/// Wraps into the balanced interval `(-1/2, 1/2]`.
fn wrap_signed(x: f64) -> f64 {
    let y = x - x.round();
    if y == -0.5 {
        0.5
    } else {
        y
    }
}

/// Distance between two points of the unit circle `ℝ/ℤ`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    wrap_signed(a - b).abs()
}

// ---------------------------------------------------------------------------
// Divisors.
// ---------------------------------------------------------------------------

/// One divisor coordinate: a position in the closure of its gap together
/// with the sheet sign selecting the branch of the double cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisorPoint {
    /// Position inside the closed gap.
    pub x: f64,
    /// Sheet sign `±1`; irrelevant when `x` sits at a band edge.
    pub epsilon: f64,
}

/// A point of the isospectral torus: one [`DivisorPoint`] per entry of
/// [`GapSet::all_gaps`] (for a semibounded set the first coordinate lives in
/// the infinite gap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divisor {
    points: Vec<DivisorPoint>,
}

impl Divisor {
    /// Validates one point per gap, each inside its closed gap with sheet
    /// sign `±1`.
    pub fn new(set: &GapSet, points: Vec<DivisorPoint>) -> Result<Self> {
        let all = set.all_gaps();
        if points.len() != all.len() {
            return Err(Error::validation(format!(
                "expected {} divisor points (one per gap), got {}",
                all.len(),
                points.len()
            )));
        }
        for (p, gap) in points.iter().zip(&all) {
            if !p.x.is_finite() || p.x < gap.lo || p.x > gap.hi {
                return Err(Error::validation(format!(
                    "divisor point {} lies outside its closed gap [{}, {}]",
                    p.x, gap.lo, gap.hi
                )));
            }
            if p.epsilon != 1.0 && p.epsilon != -1.0 {
                return Err(Error::validation("divisor sheet signs must be ±1"));
            }
        }
        Ok(Divisor { points })
    }

    /// The coordinates, in [`GapSet::all_gaps`] order.
    pub fn points(&self) -> &[DivisorPoint] {
        &self.points
    }

    /// The divisor with every sheet sign negated.
    pub fn flip(&self) -> Divisor {
        Divisor {
            points: self
                .points
                .iter()
                .map(|p| DivisorPoint {
                    x: p.x,
                    epsilon: -p.epsilon,
                })
                .collect(),
        }
    }

    /// Builds a divisor from one chart angle per gap.
    ///
    /// A finite gap uses `x = mid + r·cos φ`, `ε = sign(sin φ)`; the
    /// infinite gap of a semibounded set uses `x = e₀ - s₀·tan²(φ/2)` with
    /// scale `s₀ = 1 + |e₀|`.  Both charts are `2π`-periodic and smooth
    /// through the band edges, where the sheet sign changes and is
    /// irrelevant.
    pub fn from_angles(set: &GapSet, angles: &[f64]) -> Result<Self> {
        let all = set.all_gaps();
        if angles.len() != all.len() {
            return Err(Error::validation(format!(
                "expected {} chart angles, got {}",
                all.len(),
                angles.len()
            )));
        }
        let points = all
            .iter()
            .zip(angles)
            .map(|(gap, &phi)| {
                let eps = if phi.sin() >= 0.0 { 1.0 } else { -1.0 };
                let x = if gap.is_finite() {
                    (gap.midpoint() + gap.radius() * phi.cos()).clamp(gap.lo, gap.hi)
                } else {
                    let s0 = 1.0 + gap.hi.abs();
                    let t2 = (0.5 * phi).tan().powi(2).min(VIRTUAL_CHART_CAP);
                    gap.hi - s0 * t2
                };
                DivisorPoint { x, epsilon: eps }
            })
            .collect();
        Ok(Divisor { points })
    }

    /// Chart angles of this divisor, each in `(-π, π]`.
    pub fn to_angles(&self, set: &GapSet) -> Vec<f64> {
        self.points
            .iter()
            .zip(&set.all_gaps())
            .map(|(p, gap)| {
                let base = if gap.is_finite() {
                    (((p.x - gap.midpoint()) / gap.radius()).clamp(-1.0, 1.0)).acos()
                } else {
                    let s0 = 1.0 + gap.hi.abs();
                    2.0 * ((gap.hi - p.x).max(0.0) / s0).sqrt().atan()
                };
                if p.epsilon >= 0.0 {
                    base
                } else {
                    -base
                }
            })
            .collect()
    }
}

/// Image of a divisor under the Abel map: character entries in `[0, 1)` per
/// generator, plus the unimodular twist `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelImage {
    pub alpha: Vec<f64>,
    pub tau: C64,
}

// ---------------------------------------------------------------------------
// The Abel map.
// ---------------------------------------------------------------------------

/// Forward and inverse Abel map for a fixed [`Potential`].
///
/// Construction precomputes the twist reference `τ⋆` and the constant part
/// of `log κ_D(i)`; per-divisor Green data evaluated at `i` and
/// harmonic-measure values are memoized, so the Newton inversion reuses work
/// across residual and Jacobian evaluations.
pub struct AbelMap<'a> {
    pot: &'a Potential,
    /// Real crossing of each generator's realized loop through its gap.
    crossings: Vec<f64>,
    /// `τ⋆ = e^{iφ⋆}` with `φ⋆ = -arg(i Θ'(i) / (𝒲(i) Φ'(i)))`.
    tau_star: C64,
    /// Pair-product and critical-factor part of `log κ_D(i)`.
    const_log_i: C64,
    /// Number of critical points to the right of `ξ⋆`.
    crit_right: usize,
    /// Path used for the rational logarithms at `i`.
    path_i: quad::Path,
    /// `log Φ_x(i)` keyed by the bits of `x`.
    pole_log_i: RefCell<HashMap<u64, C64>>,
    /// `ω(x, band group of generator k)` keyed by `(bits of x, k)`.
    omega_memo: RefCell<HashMap<(u64, usize), f64>>,
}

impl<'a> AbelMap<'a> {
    pub fn new(pot: &'a Potential) -> AbelMap<'a> {
        let set = pot.set();
        let i = C64::i();
        let crossings = set
            .generators()
            .iter()
            .map(|gen| {
                if gen.gap.is_finite() {
                    gen.gap.midpoint()
                } else {
                    gen.gap.hi - 1.0
                }
            })
            .collect();
        let ratio = i * pot.theta_prime(i) / (pot.widom(i) * pot.phi_prime_at_i());
        let tau_star = C64::from_polar(1.0, -ratio.arg());

        let path_i = pot.anchor_path(i);
        let mut const_log_i = 0.5 * pot.log_pair_product(i);
        let mut crit_right = 0;
        for (pg, &c) in pot.widom_factors().iter().zip(pot.critical_points()) {
            const_log_i += 0.25 * (1.0 + c * c).ln() - 0.5 * quad::continued_log(&path_i, C64::new(c, 0.0));
            const_log_i += 0.5 * pot.log_phi_pole(pg, i);
            if right_of_base(set, c) {
                crit_right += 1;
            }
        }

        AbelMap {
            pot,
            crossings,
            tau_star,
            const_log_i,
            crit_right,
            path_i,
            pole_log_i: RefCell::new(HashMap::new()),
            omega_memo: RefCell::new(HashMap::new()),
        }
    }

    /// The underlying potential-theory state.
    pub fn potential(&self) -> &Potential {
        self.pot
    }

    /// The unimodular reference twist `τ⋆`.
    pub fn tau_star(&self) -> C64 {
        self.tau_star
    }

    /// Loop crossing used for generator `k`, matching the default of
    /// [`Potential::loop_integral`].
    pub fn crossings(&self) -> &[f64] {
        &self.crossings
    }

    // -- forward map ---------------------------------------------------------

    /// Character of `κ_D` on the generators, each entry wrapped to `[0, 1)`.
    ///
    /// Continuing the product around the realized loop of generator `k`
    /// (orientation `w_k`), the paired square-rooted factors cancel all
    /// winding integers, leaving the pair character plus
    /// `w_k·[Σ_j ((1+ε_j)/2)·𝟙(x_j enclosed) - Σ_j (ε_j/2)·ω(x_j) - ½ Σ_j ω(c_j)]`
    /// where `ω(·)` is the harmonic measure of the generator's band group and
    /// a point is *enclosed* when it lies between `ξ⋆` and the loop crossing.
    pub fn alpha(&self, d: &Divisor) -> Vec<f64> {
        let set = self.pot.set();
        let beta = self.pot.beta_phi();
        let criticals = self.pot.critical_points();
        let xi = set.xi_star();
        set.generators()
            .iter()
            .enumerate()
            .map(|(k, gen)| {
                let cross = self.crossings[k];
                let (lo, hi) = if xi <= cross { (xi, cross) } else { (cross, xi) };
                let mut sum = 0.0;
                for p in d.points() {
                    if lo < p.x && p.x < hi {
                        sum += 0.5 * (1.0 + p.epsilon);
                    }
                    sum -= 0.5 * p.epsilon * self.omega_gen(k, gen, p.x);
                }
                for &c in criticals {
                    sum -= 0.5 * self.omega_gen(k, gen, c);
                }
                wrap_unit(beta[k] + gen.winding * sum)
            })
            .collect()
    }

    /// The twist `τ(D) = -conj(τ⋆)²·κ_{D⋆}(i)/κ_{D⋆}(-i)` where `D⋆` is the
    /// sheet-flipped divisor.
    ///
    /// Continuing `κ_{D⋆}` to `-i` through the normalization gap conjugates
    /// every branch-pinned logarithm and adds `iπ` per divisor or critical
    /// point to the right of `ξ⋆`, so the ratio reduces to a parity sign
    /// times `e^{2i·Im log κ_{D⋆}(i)}` — the arbitrary positive constant of
    /// the product drops out.
    pub fn tau(&self, d: &Divisor) -> Result<C64> {
        let set = self.pot.set();
        let mut lk = self.const_log_i;
        let mut n_right = self.crit_right;
        for p in d.points() {
            // Sheet-flipped divisor: the Green-factor exponent negates.
            lk += self.divisor_term_i(p.x, -p.epsilon)?;
            if right_of_base(set, p.x) {
                n_right += 1;
            }
        }
        let parity = if n_right % 2 == 0 { 1.0 } else { -1.0 };
        Ok(-self.tau_star.conj().powi(2) * parity * C64::from_polar(1.0, 2.0 * lk.im))
    }

    /// Forward Abel map.
    pub fn forward(&self, d: &Divisor) -> Result<AbelImage> {
        Ok(AbelImage {
            alpha: self.alpha(d),
            tau: self.tau(d)?,
        })
    }

    /// Sign relating the two branches of `κ_D` at conjugate points:
    /// `κ_D(-i) = parity · conj(κ_D(i))` for the continuation through the
    /// normalization gap.  Independent of the sheet signs.
    pub fn reflection_parity(&self, d: &Divisor) -> f64 {
        let set = self.pot.set();
        let n = self.crit_right + d.points().iter().filter(|p| right_of_base(set, p.x)).count();
        if n % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    // -- κ_D evaluation ------------------------------------------------------

    /// `log κ_D(z)` on the closed upper half-plane, with the square root
    /// branch pinned along standard paths and the free positive constant set
    /// to `1`.
    pub fn log_kappa(&self, d: &Divisor, z: C64) -> Result<C64> {
        if z.im < 0.0 {
            return Err(Error::validation(
                "log κ is branch-pinned on the closed upper half-plane; use the \
                 reflection parity for conjugate points",
            ));
        }
        let pot = self.pot;
        let path = pot.anchor_path(z);
        let mut total = 0.5 * pot.log_pair_product(z);
        for p in d.points() {
            total += 0.5 * quad::continued_log(&path, C64::new(p.x, 0.0))
                - 0.25 * (1.0 + p.x * p.x).ln();
            let pg = pot.pole_green(p.x)?;
            total += (0.5 * p.epsilon) * pot.log_phi_pole(&pg, z);
        }
        for (pg, &c) in pot.widom_factors().iter().zip(pot.critical_points()) {
            total += 0.25 * (1.0 + c * c).ln() - 0.5 * quad::continued_log(&path, C64::new(c, 0.0));
            total += 0.5 * pot.log_phi_pole(pg, z);
        }
        Ok(total)
    }

    /// `κ_D(z)` on the closed upper half-plane.
    pub fn kappa(&self, d: &Divisor, z: C64) -> Result<C64> {
        Ok(self.log_kappa(d, z)?.exp())
    }

    /// Logarithmic derivative `κ_D'/κ_D`; single-valued on all of `Ω`, so it
    /// may be integrated along generator loops.
    pub fn kappa_log_derivative(&self, d: &Divisor, z: C64) -> Result<C64> {
        let pot = self.pot;
        let i = C64::i();
        let mut total = 0.5 * (pot.pair_log_derivative(z) - (z - i).inv() - (z + i).inv());
        for p in d.points() {
            let pg = pot.pole_green(p.x)?;
            total += 0.5 * (z - p.x).inv() + (0.5 * p.epsilon) * pot.pole_log_derivative(&pg, z);
        }
        for (pg, &c) in pot.widom_factors().iter().zip(pot.critical_points()) {
            total += 0.5 * pot.pole_log_derivative(pg, z) - 0.5 * (z - c).inv();
        }
        Ok(total)
    }

    // -- inverse map ---------------------------------------------------------

    /// Inverts the Abel map: finds the divisor with character `alpha`
    /// (entries interpreted mod `1`) and twist `tau` (normalized to the unit
    /// circle).  `seed` warm-starts the Newton iteration; otherwise a coarse
    /// chart-angle grid picks the starting point.
    pub fn inverse(&self, alpha: &[f64], tau: C64, seed: Option<&Divisor>) -> Result<Divisor> {
        let set = self.pot.set();
        let rank = set.generators().len();
        let n = set.num_divisor_points();
        if alpha.len() != rank {
            return Err(Error::validation(format!(
                "expected {} character entries, got {}",
                rank,
                alpha.len()
            )));
        }
        if tau.norm() == 0.0 || !tau.norm().is_finite() {
            return Err(Error::validation("the twist τ must be a nonzero complex number"));
        }
        let tau = tau / tau.norm();

        // Starting angles: the caller's divisor, or the best point of a
        // coarse grid (falling back to random draws in high rank).
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if let Some(d) = seed {
            candidates.push(d.to_angles(set));
        } else {
            let marks = [0.4 * PI, 0.9 * PI, 1.4 * PI, 1.9 * PI];
            if n <= 4 {
                let total = marks.len().pow(n as u32);
                for idx in 0..total {
                    let mut rem = idx;
                    let mut angles = Vec::with_capacity(n);
                    for _ in 0..n {
                        angles.push(marks[rem % marks.len()]);
                        rem /= marks.len();
                    }
                    candidates.push(angles);
                }
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(0x6162_656c);
                for _ in 0..256 {
                    candidates.push((0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect());
                }
            }
        }

        let mut best: Option<(f64, Vec<f64>)> = None;
        for angles in candidates {
            if let Ok(r) = self.residual(&angles, alpha, tau) {
                let norm = r.norm();
                if best.as_ref().map_or(true, |(b, _)| norm < *b) {
                    best = Some((norm, angles));
                }
            }
        }
        let (_, mut phi) =
            best.ok_or_else(|| Error::non_convergence("no valid starting point for the Newton iteration"))?;

        let tol = 1e-10;
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e65_7774);
        let mut r = self.residual(&phi, alpha, tau)?;
        for _ in 0..60 {
            if r.norm() < tol {
                return Divisor::from_angles(set, &phi);
            }
            let jac = self.jacobian(&phi)?;
            let step = jac
                .lu()
                .solve(&(-r.clone()))
                .ok_or_else(|| Error::non_convergence("singular Jacobian in the Abel-map inversion"))?;
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..9 {
                let trial: Vec<f64> =
                    phi.iter().zip(step.iter()).map(|(p, s)| p + scale * s).collect();
                if let Ok(tr) = self.residual(&trial, alpha, tau) {
                    if tr.norm() < r.norm() * (1.0 - 0.25 * scale) || tr.norm() < tol {
                        phi = trial;
                        r = tr;
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                // Stalled: nudge the angles and keep iterating.
                for p in phi.iter_mut() {
                    *p += rng.gen_range(-0.05..0.05);
                }
                r = self.residual(&phi, alpha, tau)?;
            }
        }
        if r.norm() < 1e-8 {
            return Divisor::from_angles(set, &phi);
        }
        Err(Error::non_convergence(format!(
            "Abel-map inversion stalled with residual {:.3e}",
            r.norm()
        )))
    }

    /// Translation flow: advances the character linearly, `α ↦ α - ℓ·η`
    /// (mod 1, with `η` the character of `e^{iΘ}`), holding `τ` fixed, and
    /// pulls the result back through the inverse map.  Long flows are split
    /// into substeps so each Newton solve starts close to its solution.
    pub fn translate(&self, d: &Divisor, ell: f64) -> Result<Divisor> {
        let img = self.forward(d)?;
        let eta = self.pot.eta_char();
        let max_rate = self
            .pot
            .eta_raw()
            .iter()
            .fold(0.0f64, |m, &e| m.max(e.abs() / (2.0 * PI)));
        let steps = ((ell.abs() * max_rate / 0.2).ceil() as usize).max(1);
        let mut cur = d.clone();
        for s in 1..=steps {
            let l = ell * (s as f64) / (steps as f64);
            let target: Vec<f64> = img
                .alpha
                .iter()
                .zip(&eta)
                .map(|(a, e)| wrap_unit(a - l * e))
                .collect();
            cur = self.inverse(&target, img.tau, Some(&cur))?;
        }
        Ok(cur)
    }

    // -- internals -----------------------------------------------------------

    /// Memoized harmonic measure of generator `k`'s band group at a real
    /// point (gap interiors, bands, and edges all allowed).
    fn omega_gen(&self, k: usize, gen: &Generator, x: f64) -> f64 {
        let key = (x.to_bits(), k);
        if let Some(&v) = self.omega_memo.borrow().get(&key) {
            return v;
        }
        let v = self.pot.omega_generator(gen, C64::new(x, 0.0));
        let mut memo = self.omega_memo.borrow_mut();
        if memo.len() > 16384 {
            memo.clear();
        }
        memo.insert(key, v);
        v
    }

    /// Memoized `log Φ_x(i)`.
    fn pole_log_at_i(&self, x: f64) -> Result<C64> {
        let key = x.to_bits();
        if let Some(&v) = self.pole_log_i.borrow().get(&key) {
            return Ok(v);
        }
        let pg = self.pot.pole_green(x)?;
        let v = self.pot.log_phi_pole(&pg, C64::i());
        let mut memo = self.pole_log_i.borrow_mut();
        if memo.len() > 16384 {
            memo.clear();
        }
        memo.insert(key, v);
        Ok(v)
    }

    /// Contribution of one divisor coordinate to `log κ_D(i)`.
    fn divisor_term_i(&self, x: f64, epsilon: f64) -> Result<C64> {
        let rational = 0.5 * quad::continued_log(&self.path_i, C64::new(x, 0.0))
            - 0.25 * (1.0 + x * x).ln();
        Ok(rational + (0.5 * epsilon) * self.pole_log_at_i(x)?)
    }

    /// Newton residual in turns: wrapped character mismatch per generator
    /// plus the wrapped phase mismatch of `τ`.
    fn residual(&self, angles: &[f64], alpha: &[f64], tau: C64) -> Result<DVector<f64>> {
        let set = self.pot.set();
        let d = Divisor::from_angles(set, angles)?;
        let a = self.alpha(&d);
        let t = self.tau(&d)?;
        let n = angles.len();
        let mut r = DVector::zeros(n);
        for k in 0..alpha.len() {
            r[k] = wrap_signed(a[k] - alpha[k]);
        }
        r[n - 1] = (t * tau.conj()).arg() / (2.0 * PI);
        Ok(r)
    }

    /// Jacobian of the residual with respect to the chart angles.  The
    /// character rows are analytic — the chart factor `ε·dx/dφ` times the
    /// harmonic-measure density is smooth through the band edges — while the
    /// twist row uses centered differences of the `τ` phase.
    fn jacobian(&self, angles: &[f64]) -> Result<DMatrix<f64>> {
        let set = self.pot.set();
        let gens = set.generators();
        let all = set.all_gaps();
        let n = angles.len();
        let mut jac = DMatrix::zeros(n, n);

        for (j, (gap, &phi)) in all.iter().zip(angles).enumerate() {
            // Avoid the measure-zero seam where the point sits exactly on an
            // edge and the density blows up before the chart factor cancels.
            let phi = if phi.sin().abs() < 1e-12 { phi + 1e-9 } else { phi };
            let (x, dx_dphi, eps) = chart_point(gap, phi);
            for (k, gen) in gens.iter().enumerate() {
                let density = self.pot.omega_generator_density(gen, x);
                jac[(k, j)] = -gen.winding * 0.5 * eps * density * dx_dphi;
            }
        }

        // Twist row: d/dφ_j of arg τ in turns.
        let h = 1e-6;
        let row = n - 1;
        for j in 0..n {
            let mut plus = angles.to_vec();
            plus[j] += h;
            let mut minus = angles.to_vec();
            minus[j] -= h;
            let tp = self.tau(&Divisor::from_angles(set, &plus)?)?;
            let tm = self.tau(&Divisor::from_angles(set, &minus)?)?;
            jac[(row, j)] = (tp * tm.conj()).arg() / (2.0 * PI) / (2.0 * h);
        }
        Ok(jac)
    }
}

/// Whether `x` lies strictly to the right of the base point `ξ⋆`, using the
/// same tolerance as the branch pinning of the Green-function logarithms.  A
/// point within the tolerance band is pinned by its left-side limit, so the
/// parity bookkeeping must classify it as "not right" to stay consistent.
fn right_of_base(set: &GapSet, x: f64) -> bool {
    let xi = set.xi_star();
    x - xi > 1e-12 * (1.0 + xi.abs())
}

/// Chart position, derivative `dx/dφ`, and sheet sign at angle `φ`.
fn chart_point(gap: &Gap, phi: f64) -> (f64, f64, f64) {
    let eps = if phi.sin() >= 0.0 { 1.0 } else { -1.0 };
    if gap.is_finite() {
        (
            gap.midpoint() + gap.radius() * phi.cos(),
            -gap.radius() * phi.sin(),
            eps,
        )
    } else {
        let s0 = 1.0 + gap.hi.abs();
        let t = (0.5 * phi).tan().clamp(-1e4, 1e4);
        (gap.hi - s0 * t * t, -s0 * t * (1.0 + t * t), eps)
    }
}

// ---------------------------------------------------------------------------
// Tests.
// ---------------------------------------------------------------------------
