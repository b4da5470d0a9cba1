// SPDX-License-Identifier: MIT

//! Character-automorphic reproducing kernels, Schur functions, and the
//! transfer-matrix frame.
//!
//! For a character `α` on the loop generators, the Hardy space `𝓗²(α)` of
//! `Ω = ℂ∖E` (boundary norm against the Martin measure, both copies of `E`)
//! has a reproducing kernel at `i`.  Its normalized defect vector `K^α`
//! (`K^α(i) > 0`, unit norm) and the reflection `K♯^α(z) = conj(K^α(z̄))`
//! span the two-dimensional model space `𝓗²(α) ⊖ ΦΦ♯𝓗²(α−2β_Φ)`.
//!
//! The pair is recovered from two divisor products: with `D± = π⁻¹(α, ±1)`
//! under the Abel map,
//!
//! ```text
//! K − K♯ = c₊ κ_{D₊},        K + K♯ = c₋ κ_{D₋},
//! ```
//!
//! where the phase of each constant is pinned by the reflection parity of
//! its divisor (`c κ` must be an eigenvector of the `♯` involution with
//! eigenvalue `∓1`), and the real scales follow in closed form from the
//! reproducing property tested against the products themselves:
//!
//! ```text
//! K(i)² = Re(e^{iγ₋}κ₋(i))²/‖κ₋‖² + Re(e^{iγ₊}κ₊(i))²/‖κ₊‖².
//! ```
//!
//! No nonlinear normalization solve is needed; the imaginary parts of the
//! same equations are over-determined and reported as a consistency
//! residual.  The norms `‖κ_D‖²` use the closed-form boundary modulus of
//! the products, so a kernel build costs two Newton inversions of the Abel
//! map plus a handful of band quadratures.
//!
//! On top of the pair the module assembles the `2×2` frame `𝒯_{α,τ}`
//! combining the kernels at `α` and at the dual character
//! `α̃ = β_𝒲 + β_Φ − α`, the Schur functions `s±`, the resolvent with a
//! dual-route diagnostic, and the kernel identities used by the
//! integration tests.
//!
//! Accuracy note: within distance ≈1e−6 of `E` the square-root band-edge
//! factors lose relative precision; evaluations there are returned as
//! computed, without regularization, and should be trusted only to ~1e−8
//! absolute.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::abel::{AbelMap, Divisor};
use crate::error::{Error, Result};
use crate::potential::{wrap_unit, Potential};
use crate::C64;

/// Componentwise difference of two characters on the unit torus.
pub fn character_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| wrap_unit(x - y)).collect()
}

/// Shared context for kernel construction over one spectrum.
pub struct KernelMachine<'a> {
    pot: &'a Potential,
    map: AbelMap<'a>,
    quad_tol: f64,
}

impl<'a> KernelMachine<'a> {
    /// Builds the kernel context (precomputes the Abel-map constants).
    pub fn new(pot: &'a Potential) -> KernelMachine<'a> {
        KernelMachine {
            pot,
            map: AbelMap::new(pot),
            quad_tol: 1e-10,
        }
    }

    /// Underlying potential-theory context.
    pub fn potential(&self) -> &'a Potential {
        self.pot
    }

    /// The Abel map shared by all kernel builds.
    pub fn abel(&self) -> &AbelMap<'a> {
        &self.map
    }

    /// The dual character `α̃ = β_𝒲 + β_Φ − α`.
    pub fn alpha_tilde(&self, alpha: &[f64]) -> Vec<f64> {
        let bw = self.pot.beta_widom();
        let bp = self.pot.beta_phi();
        alpha
            .iter()
            .zip(bw.iter().zip(bp))
            .map(|(&a, (&w, &p))| wrap_unit(w + p - a))
            .collect()
    }

    /// Closed-form boundary modulus `|κ_D(ξ±i0)|²` at a band point `ξ`.
    ///
    /// On a band every Green-function factor of the product is unimodular,
    /// so only the rational factors contribute.
    pub fn boundary_abs2(&self, d: &Divisor, xi: f64) -> f64 {
        let mut v = 1.0 / (1.0 + xi * xi);
        for p in d.points() {
            v *= (xi - p.x).abs() / (1.0 + p.x * p.x).sqrt();
        }
        for &c in self.pot.critical_points() {
            v *= (1.0 + c * c).sqrt() / (xi - c).abs();
        }
        v
    }

    /// `‖κ_D‖²` in the boundary norm (both copies of `E`).
    pub fn kappa_norm2(&self, d: &Divisor) -> f64 {
        let value = self
            .pot
            .integrate_dtheta(|xi| C64::new(self.boundary_abs2(d, xi), 0.0), self.quad_tol);
        2.0 * value.re
    }

    /// Boundary inner product `⟨f, g⟩` over both copies of `E`, with the
    /// closures returning the `(ξ+i0, ξ−i0)` values.
    pub fn inner_product<F, G>(&self, f: F, g: G, tol: f64) -> C64
    where
        F: Fn(f64) -> (C64, C64),
        G: Fn(f64) -> (C64, C64),
    {
        self.pot.integrate_dtheta(
            |xi| {
                let (fu, fd) = f(xi);
                let (gu, gd) = g(xi);
                fu * gu.conj() + fd * gd.conj()
            },
            tol,
        )
    }

    /// Builds the kernel pair at `α` from cold Newton starts.
    pub fn build(&self, alpha: &[f64]) -> Result<KernelPair<'_>> {
        self.build_seeded(alpha, None, None)
    }

    /// Builds the kernel pair at `α`, optionally seeding the two divisor
    /// inversions (used by flows that track the pair along a path).
    pub fn build_seeded(
        &self,
        alpha: &[f64],
        seed_plus: Option<&Divisor>,
        seed_minus: Option<&Divisor>,
    ) -> Result<KernelPair<'_>> {
        let one = C64::new(1.0, 0.0);
        let d_plus = self.map.inverse(alpha, one, seed_plus)?;
        let d_minus = self.map.inverse(alpha, -one, seed_minus)?;
        let parity_plus = self.map.reflection_parity(&d_plus);
        let parity_minus = self.map.reflection_parity(&d_minus);
        // `c κ` must be ♯-antisymmetric for the difference combination and
        // ♯-symmetric for the sum; with `(κ_D)♯ = parity·κ_D` this pins the
        // phase of each constant up to a real sign.
        let phase_plus = if parity_plus < 0.0 { one } else { C64::i() };
        let phase_minus = if parity_minus > 0.0 { one } else { C64::i() };
        let a_val = phase_plus * self.map.kappa(&d_plus, C64::i())?;
        let b_val = phase_minus * self.map.kappa(&d_minus, C64::i())?;
        let norm2_plus = self.kappa_norm2(&d_plus);
        let norm2_minus = self.kappa_norm2(&d_minus);
        if !(norm2_plus.is_finite() && norm2_minus.is_finite())
            || norm2_plus <= 0.0
            || norm2_minus <= 0.0
        {
            return Err(Error::non_convergence(
                "kernel normalization: boundary norm of a divisor product is not positive",
            ));
        }
        let k_i2 = b_val.re * b_val.re / norm2_minus + a_val.re * a_val.re / norm2_plus;
        if k_i2 < 1e-24 {
            return Err(Error::non_convergence(
                "kernel normalization degenerate: both products are imaginary at i",
            ));
        }
        let k_i = k_i2.sqrt();
        let t_plus = 2.0 * a_val.re / (norm2_plus * k_i);
        let t_minus = 2.0 * b_val.re / (norm2_minus * k_i);
        // The imaginary parts of the reproducing equations are implied when
        // the two divisors are exactly Abel-consistent; their defect is the
        // build's internal consistency measure.
        let reflection_residual = (t_minus * b_val.im + t_plus * a_val.im).abs()
            / (1.0 + a_val.norm() + b_val.norm());
        let k_sharp_i = 0.5 * (b_val * t_minus - a_val * t_plus);
        Ok(KernelPair {
            mach: self,
            alpha: alpha.to_vec(),
            d_plus,
            d_minus,
            parity_plus,
            parity_minus,
            c_plus: phase_plus * t_plus,
            c_minus: phase_minus * t_minus,
            k_i,
            k_sharp_i,
            norm2_plus,
            norm2_minus,
            reflection_residual,
            boundary_cache: RefCell::new(HashMap::new()),
        })
    }

    /// Builds the `2×2` frame combining the pairs at `α` and `α̃`.
    pub fn build_frame(&self, alpha: &[f64]) -> Result<Frame<'_>> {
        self.build_frame_seeded(alpha, None)
    }

    /// Builds the frame at `α`, seeding all four divisor inversions from a
    /// nearby frame (used by flows that track the frame along a path).
    pub fn build_frame_seeded(
        &self,
        alpha: &[f64],
        seeds: Option<&FrameSeeds>,
    ) -> Result<Frame<'_>> {
        let pair = self.build_seeded(
            alpha,
            seeds.map(|s| &s.pair_plus),
            seeds.map(|s| &s.pair_minus),
        )?;
        let tilde = self.build_seeded(
            &self.alpha_tilde(alpha),
            seeds.map(|s| &s.tilde_plus),
            seeds.map(|s| &s.tilde_minus),
        )?;
        Ok(Frame {
            pair,
            tilde,
            tau_star: self.map.tau_star(),
        })
    }
}

/// The four divisors backing a [`Frame`], used to warm-start nearby builds.
#[derive(Debug, Clone)]
pub struct FrameSeeds {
    /// `D₊` of the pair at `α`.
    pub pair_plus: Divisor,
    /// `D₋` of the pair at `α`.
    pub pair_minus: Divisor,
    /// `D₊` of the pair at `α̃`.
    pub tilde_plus: Divisor,
    /// `D₋` of the pair at `α̃`.
    pub tilde_minus: Divisor,
}

/// The normalized reproducing-kernel pair `(K^α, K♯^α)` for one character.
///
/// Immutable after construction; evaluation anywhere on `Ω` goes through
/// the two divisor products (`z̄` reached through the normalization gap).
pub struct KernelPair<'m> {
    mach: &'m KernelMachine<'m>,
    alpha: Vec<f64>,
    d_plus: Divisor,
    d_minus: Divisor,
    parity_plus: f64,
    parity_minus: f64,
    c_plus: C64,
    c_minus: C64,
    k_i: f64,
    k_sharp_i: C64,
    norm2_plus: f64,
    norm2_minus: f64,
    reflection_residual: f64,
    boundary_cache: RefCell<HashMap<u64, (C64, C64)>>,
}

impl<'m> KernelPair<'m> {
    /// The character of the pair.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Divisor of `K − K♯` (twist `+1`).
    pub fn divisor_plus(&self) -> &Divisor {
        &self.d_plus
    }

    /// Divisor of `K + K♯` (twist `−1`).
    pub fn divisor_minus(&self) -> &Divisor {
        &self.d_minus
    }

    /// Normalization constants `(c₊, c₋)` multiplying the two products.
    pub fn constants(&self) -> (C64, C64) {
        (self.c_plus, self.c_minus)
    }

    /// Reflection parities of the two divisors.
    pub fn parities(&self) -> (f64, f64) {
        (self.parity_plus, self.parity_minus)
    }

    /// `K(i) > 0`.
    pub fn k_at_i(&self) -> f64 {
        self.k_i
    }

    /// `K♯(i)`.
    pub fn k_sharp_at_i(&self) -> C64 {
        self.k_sharp_i
    }

    /// `s₊(i) = K♯(i)/K(i)`, a point of the open unit disk.
    pub fn s_plus_at_i(&self) -> C64 {
        self.k_sharp_i / self.k_i
    }

    /// Boundary norms `(‖κ_{D₊}‖², ‖κ_{D₋}‖²)` of the raw products.
    pub fn product_norms2(&self) -> (f64, f64) {
        (self.norm2_plus, self.norm2_minus)
    }

    /// Consistency defect of the over-determined normalization equations.
    pub fn reflection_residual(&self) -> f64 {
        self.reflection_residual
    }

    /// Raw product `κ_{D₊}(z)`.
    pub fn kappa_plus(&self, z: C64) -> Result<C64> {
        self.mach.map.kappa(&self.d_plus, z)
    }

    /// Raw product `κ_{D₋}(z)`.
    pub fn kappa_minus(&self, z: C64) -> Result<C64> {
        self.mach.map.kappa(&self.d_minus, z)
    }

    /// `K^α(z)`; the lower half-plane is reached through the reflection
    /// `K(z) = conj(K♯(z̄))`.
    pub fn k(&self, z: C64) -> Result<C64> {
        if z.im < 0.0 {
            return Ok(self
                .k_sharp(z.conj())
                .map(|w| w.conj())?);
        }
        Ok(0.5 * (self.c_minus * self.kappa_minus(z)? + self.c_plus * self.kappa_plus(z)?))
    }

    /// `K♯^α(z) = conj(K^α(z̄))`.
    pub fn k_sharp(&self, z: C64) -> Result<C64> {
        if z.im < 0.0 {
            return Ok(self.k(z.conj()).map(|w| w.conj())?);
        }
        Ok(0.5 * (self.c_minus * self.kappa_minus(z)? - self.c_plus * self.kappa_plus(z)?))
    }

    /// The twisted combination `𝜘^{α,τ}(z) = K(z) − τ K♯(z)`.
    pub fn varkappa(&self, z: C64, tau: C64) -> Result<C64> {
        Ok(self.k(z)? - tau * self.k_sharp(z)?)
    }

    /// `s₊(z) = K♯(z)/K(z)`; at a zero of `K` the IEEE quotient (infinite
    /// or NaN) is returned as the pole marker.
    pub fn s_plus(&self, z: C64) -> Result<C64> {
        Ok(self.k_sharp(z)? / self.k(z)?)
    }

    /// Cached raw-product values `(κ₊, κ₋)` at `ξ + i0` on a band.
    fn products_upper(&self, xi: f64) -> Result<(C64, C64)> {
        let key = xi.to_bits();
        if let Some(&hit) = self.boundary_cache.borrow().get(&key) {
            return Ok(hit);
        }
        let z = C64::new(xi, 0.0);
        let pair = (self.kappa_plus(z)?, self.kappa_minus(z)?);
        self.boundary_cache.borrow_mut().insert(key, pair);
        Ok(pair)
    }

    /// Boundary values `(K(ξ+i0), K(ξ−i0))` at a band-interior point.
    pub fn k_boundary(&self, xi: f64) -> Result<(C64, C64)> {
        let (kp, km) = self.products_upper(xi)?;
        let up = 0.5 * (self.c_minus * km + self.c_plus * kp);
        let dn = 0.5
            * (self.c_minus * self.parity_minus * km.conj()
                + self.c_plus * self.parity_plus * kp.conj());
        Ok((up, dn))
    }

    /// Boundary values `(K♯(ξ+i0), K♯(ξ−i0))` at a band-interior point.
    pub fn k_sharp_boundary(&self, xi: f64) -> Result<(C64, C64)> {
        let (kp, km) = self.products_upper(xi)?;
        let up = 0.5 * (self.c_minus * km - self.c_plus * kp);
        let dn = 0.5
            * (self.c_minus * self.parity_minus * km.conj()
                - self.c_plus * self.parity_plus * kp.conj());
        Ok((up, dn))
    }

    /// Reproducing kernel `k^α(z, z₀)` (ratio form through `v`).
    pub fn cd_kernel(&self, z: C64, z0: C64) -> Result<C64> {
        let pot = self.mach.pot;
        let vv = pot.v_quotient(z) * pot.v_quotient(z0).conj();
        let num = self.k(z)? * self.k(z0)?.conj() - vv * self.k_sharp(z)? * self.k_sharp(z0)?.conj();
        Ok(num / (1.0 - vv))
    }

    /// Reproducing kernel `k^α(z, z₀)` (difference-quotient form).
    pub fn cd_kernel_cayley(&self, z: C64, z0: C64) -> Result<C64> {
        let i = C64::i();
        let num = (z + i) * (z0 + i).conj() * self.k(z)? * self.k(z0)?.conj()
            - (z - i) * (z0 - i).conj() * self.k_sharp(z)? * self.k_sharp(z0)?.conj();
        Ok(i * num / (2.0 * (z - z0.conj())))
    }

    /// Reproducing kernel `k^α(z, z₀)` (Schur-function form).
    pub fn cd_kernel_schur(&self, z: C64, z0: C64) -> Result<C64> {
        let pot = self.mach.pot;
        let vv = pot.v_quotient(z) * pot.v_quotient(z0).conj();
        let ss = self.s_plus(z)? * self.s_plus(z0)?.conj();
        Ok(self.k(z)? * self.k(z0)?.conj() * (1.0 - vv * ss) / (1.0 - vv))
    }
}

/// Resolvent value together with the defect between its two computation
/// routes.
#[derive(Debug, Clone, Copy)]
pub struct ResolventValue {
    /// Cayley-form value (the returned quantity).
    pub value: C64,
    /// Relative disagreement with the product-factorization route.
    pub cross_residual: f64,
}

/// The `2×2` kernel frame `𝒯` combining the characters `α` and `α̃`.
pub struct Frame<'m> {
    pair: KernelPair<'m>,
    tilde: KernelPair<'m>,
    tau_star: C64,
}

impl<'m> Frame<'m> {
    /// Kernel pair at `α` (bottom row).
    pub fn pair(&self) -> &KernelPair<'m> {
        &self.pair
    }

    /// Kernel pair at the dual character `α̃` (top row).
    pub fn tilde(&self) -> &KernelPair<'m> {
        &self.tilde
    }

    /// The unimodular frame phase `τ⋆`.
    pub fn tau_star(&self) -> C64 {
        self.tau_star
    }

    /// Clones the four divisors of this frame for warm-starting a nearby build.
    pub fn seeds(&self) -> FrameSeeds {
        FrameSeeds {
            pair_plus: self.pair.d_plus.clone(),
            pair_minus: self.pair.d_minus.clone(),
            tilde_plus: self.tilde.d_plus.clone(),
            tilde_minus: self.tilde.d_minus.clone(),
        }
    }

    fn pot(&self) -> &Potential {
        self.pair.mach.pot
    }

    /// `(Φ(z), Φ♯(z))`, with the removable point `z = i` handled through
    /// the closed forms `Φ(i) = 0`, `Φ♯(i) = 2i e^{−ic⋆} Φ'(i)` (the log
    /// route is singular exactly there).
    fn pair_at(&self, z: C64) -> (C64, C64) {
        if z.im < 0.0 {
            // Continuation through the normalization gap: the pair swaps and
            // conjugates, matching the lower-half convention of `k`/`k_sharp`.
            let (phi_u, phis_u) = self.pair_at(z.conj());
            return (phis_u.conj(), phi_u.conj());
        }
        let pot = self.pot();
        if (z - C64::i()).norm() < 1e-14 {
            let phis = 2.0 * C64::i() * pot.exp_ic_star().conj() * pot.phi_prime_at_i();
            (C64::new(0.0, 0.0), phis)
        } else {
            (pot.phi(z), pot.phi_sharp(z))
        }
    }

    /// Frame matrix
    /// `𝒯_{α,τ}(z) = [[τ⋆Φ♯K^{α̃}, τ̄⋆τ̄ΦK♯^{α̃}], [τK♯^α, K^α]]`
    /// on the closed upper half-plane.
    pub fn entries(&self, z: C64, tau: C64) -> Result<[[C64; 2]; 2]> {
        let (phi, phis) = self.pair_at(z);
        Ok([
            [
                self.tau_star * phis * self.tilde.k(z)?,
                self.tau_star.conj() * tau.conj() * phi * self.tilde.k_sharp(z)?,
            ],
            [tau * self.pair.k_sharp(z)?, self.pair.k(z)?],
        ])
    }

    /// Closed-form reference for `det 𝒯(z)`, independent of the character:
    /// `2 (𝒲/Θ') · ΦΦ♯/((z−i)(z+i))`, with the last factor evaluated as a
    /// single regular exponential.
    pub fn det_reference(&self, z: C64) -> C64 {
        let pot = self.pot();
        2.0 * pot.widom(z) / pot.theta_prime(z) * pot.log_pair_product(z).exp()
    }

    /// `s₊^α(z)`.
    pub fn s_plus(&self, z: C64) -> Result<C64> {
        self.pair.s_plus(z)
    }

    /// `s₋^α(z) = τ̄⋆² v(z) K♯^{α̃}(z) / K^{α̃}(z)`; vanishes at `i`.
    pub fn s_minus(&self, z: C64) -> Result<C64> {
        let v = self.pot().v_quotient(z);
        Ok(self.tau_star.conj().powi(2) * v * self.tilde.k_sharp(z)? / self.tilde.k(z)?)
    }

    /// The inner quotient `ι^α(z) = τ⋆ Φ♯(z) K^{α̃}(z) / K^α(z)`.
    pub fn iota(&self, z: C64) -> Result<C64> {
        let (_, phis) = self.pair_at(z);
        Ok(self.tau_star * phis * self.tilde.k(z)? / self.pair.k(z)?)
    }

    /// The dual combination `ΦΦ♯𝒲·𝜘_*^{α,τ} = τ⋆Φ♯K^{α̃} − τ̄τ̄⋆ΦK♯^{α̃}`.
    pub fn varkappa_star_scaled(&self, z: C64, tau: C64) -> Result<C64> {
        let (phi, phis) = self.pair_at(z);
        Ok(self.tau_star * phis * self.tilde.k(z)?
            - tau.conj() * self.tau_star.conj() * phi * self.tilde.k_sharp(z)?)
    }

    /// The Blaschke quotient `Δ^{α,τ}` of the two twisted combinations.
    pub fn delta_quotient(&self, z: C64, tau: C64) -> Result<C64> {
        Ok(self.varkappa_star_scaled(z, tau)? / self.pair.varkappa(z, tau)?)
    }

    /// Resolvent of the twist `τ`, computed through the Cayley form with
    /// the product-factorization route as a cross-check.
    pub fn resolvent(&self, z: C64, tau: C64) -> Result<ResolventValue> {
        let i = C64::i();
        let sp = self.s_plus(z)?;
        let sm = self.s_minus(z)?;
        let cayley = i * (1.0 - tau * sp) * (1.0 - tau.conj() * sm) / (1.0 - sp * sm);
        let pot = self.pot();
        let product = i * self.pair.varkappa(z, tau)? * self.varkappa_star_scaled(z, tau)?
            * pot.theta_prime(z)
            * (-pot.log_pair_product(z)).exp()
            / (2.0 * pot.widom(z));
        let cross_residual = (cayley - product).norm() / (1.0 + cayley.norm());
        Ok(ResolventValue {
            value: cayley,
            cross_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abel::DivisorPoint;
    use crate::gapset::GapSet;
    use crate::potential::Params;
    use crate::quad;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn f1() -> Potential {
        let set = GapSet::two_sided(&[(-1.0, 1.0)]).unwrap();
        Potential::new(set, Params::default()).unwrap()
    }

    fn f2() -> Potential {
        let set = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        Potential::new(set, Params::default()).unwrap()
    }

    fn f3() -> Potential {
        let set = GapSet::semibounded(0.0, &[(1.0, 2.0)]).unwrap();
        Potential::new(set, Params::default()).unwrap()
    }

    // ---- One-gap oracle: conformal transplantation of the Szegő kernel ----
    //
    // For the single-gap two-sided set the domain is simply connected and the
    // character group is trivial, so the kernel pair must match the
    // reproducing kernel of the weighted Hardy space of the disk pulled back
    // through an explicit uniformizing map.  Everything below is built from
    // the closed-form map `z ↦ u` and the closed-form boundary weight; none
    // of the crate's Green-function machinery is involved.

    /// Uniformizer `Ω → 𝔻` for the gap `(−1,1)`, sending `i` to `0`.
    fn oracle_u(z: C64) -> C64 {
        let p = (C64::i() * z.asin()).exp();
        let p0 = 2f64.sqrt() - 1.0;
        (p - p0) / (p + p0)
    }

    /// Boundary data at `ξ` on one side of one cut: the circle value of the
    /// uniformizer, the transplanted weight `w = |Θ'|/|u'|`, and `|u'|` with
    /// the edge factor `1/√(|ξ|−1)` removed.
    ///
    /// The two sides of a cut are *not* conjugate arcs of the circle: the
    /// map is normalized at `i`, so the upper sides (where `|p| < 1`) cover
    /// `3π/4` each and the lower sides only `π/4`.
    fn oracle_side(xi: f64, upper: bool) -> (C64, f64, f64) {
        let p0 = 2f64.sqrt() - 1.0;
        let t = xi.abs().acosh();
        let r = if upper { (-t).exp() } else { t.exp() };
        let p = C64::new(0.0, xi.signum() * r);
        let bu = (p - p0) / (p + p0);
        // |u'| = 2p₀|p| / (|p+p₀|²√(ξ²−1)),  |Θ'| = |ξ|/√(ξ²−1).
        let w = xi.abs() * (p + p0).norm_sqr() / (2.0 * p0 * p.norm());
        let du_edge = 2.0 * p0 * p.norm() / ((p + p0).norm_sqr() * (xi.abs() + 1.0).sqrt());
        (bu, w, du_edge)
    }

    /// Outer function `h` on `𝔻` with `|h|² =` the boundary weight, via the
    /// exponentiated Herglotz integral; `h(0) > 0`.
    fn oracle_h(u: C64) -> C64 {
        // Integrate over the four boundary arcs (two rays, two sides each);
        // the edge-panel integrators supply the 1/√(|ξ|−1) factor.
        let herglotz_edge = |xi: f64| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for upper in [true, false] {
                let (bu, w, du_edge) = oracle_side(xi, upper);
                acc += (bu + u) / (bu - u) * w.ln() * du_edge;
            }
            acc
        };
        let herglotz_full = |xi: f64| -> C64 { herglotz_edge(xi) / (xi.abs() - 1.0).sqrt() };
        let tol = 1e-12;
        let mut total = quad::integrate_left_edge(herglotz_edge, 1.0, 2.0, tol);
        total += quad::integrate_ray_up(herglotz_full, 2.0, tol);
        total += quad::integrate_right_edge(herglotz_edge, -2.0, -1.0, tol);
        total += quad::integrate_ray_down(herglotz_full, -2.0, tol);
        (total / (4.0 * PI)).exp()
    }

    fn oracle_kernel(z: C64) -> C64 {
        1.0 / oracle_h(oracle_u(z))
    }

    #[test]
    fn f1_matches_conformal_oracle() {
        let pot = f1();
        let mach = KernelMachine::new(&pot);
        let kp = mach.build(&[]).unwrap();
        assert!(kp.reflection_residual() < 1e-8, "residual {}", kp.reflection_residual());
        let samples = [
            C64::new(0.0, 1.0),
            C64::new(0.0, 2.0),
            C64::new(-0.4, 0.7),
            C64::new(0.6, 0.2),
            C64::new(0.3, 3.5),
        ];
        for z in samples {
            let mine = kp.k(z).unwrap();
            let want = oracle_kernel(z);
            assert!(
                (mine - want).norm() <= 1e-7 * (1.0 + want.norm()),
                "K({z}) = {mine} vs oracle {want}"
            );
            let mine_s = kp.k_sharp(z).unwrap();
            let want_s = oracle_kernel(z.conj()).conj();
            assert!(
                (mine_s - want_s).norm() <= 1e-7 * (1.0 + want_s.norm()),
                "K♯({z}) = {mine_s} vs oracle {want_s}"
            );
        }
    }

    #[test]
    fn f2_reproducing_property() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let kp = mach.build(&[0.3]).unwrap();
        // ⟨K, K⟩ = 1 with full phase-resolved boundary quadrature.
        let k_bd = |xi: f64| kp.k_boundary(xi).unwrap();
        let norm = mach.inner_product(k_bd, k_bd, 1e-8);
        assert_abs_diff_eq!(norm.re, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(norm.im, 0.0, epsilon = 1e-6);
        // ⟨K♯, K⟩ = s₊(i).
        let ks_bd = |xi: f64| kp.k_sharp_boundary(xi).unwrap();
        let cross = mach.inner_product(ks_bd, k_bd, 1e-8);
        let a = kp.s_plus_at_i();
        assert!((cross - a).norm() < 1e-6, "⟨K♯,K⟩ = {cross} vs s₊(i) = {a}");
        // ⟨k_{z₀}, K⟩ = conj(K(z₀)) for kernel sections at interior points.
        for z0 in [C64::new(0.0, 2.0), C64::new(-1.6, 0.4), C64::new(0.2, 0.9)] {
            let sect = |xi: f64| {
                let (u, d) = kp.k_boundary(xi).unwrap();
                let (us, ds) = kp.k_sharp_boundary(xi).unwrap();
                let v0 = pot.v_quotient(z0).conj();
                // The quotient v is a single rational-type expression on the
                // plane, so both sides of a band see the same value of v.
                let vu = pot.v_quotient(C64::new(xi, 0.0));
                let k0 = kp.k(z0).unwrap().conj();
                let ks0 = kp.k_sharp(z0).unwrap().conj();
                let up = (u * k0 - vu * v0 * us * ks0) / (1.0 - vu * v0);
                let dn = (d * k0 - vu * v0 * ds * ks0) / (1.0 - vu * v0);
                (up, dn)
            };
            let got = mach.inner_product(sect, k_bd, 1e-8);
            let want = kp.k(z0).unwrap().conj();
            assert!(
                (got - want).norm() <= 1e-6 * (1.0 + want.norm()),
                "section at {z0}: ⟨k,K⟩ = {got} vs {want}"
            );
        }
    }

    #[test]
    fn f2_dual_product_at_i() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        for alpha in [[0.3], [0.77]] {
            let kp = mach.build(&alpha).unwrap();
            let kt = mach.build(&mach.alpha_tilde(&alpha)).unwrap();
            let want = (pot.widom(C64::i()) * pot.phi_prime_at_i()
                / pot.theta_prime(C64::i()))
            .norm();
            assert_abs_diff_eq!(kp.k_at_i() * kt.k_at_i(), want, epsilon = 1e-6 * want);
        }
    }

    #[test]
    fn f2_frame_det_matches_outer_form() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let samples = [
            C64::new(0.0, 1.0),
            C64::new(0.3, 0.8),
            C64::new(-1.4, 0.5),
            C64::new(2.6, 1.3),
        ];
        let mut dets = Vec::new();
        for alpha in [[0.21], [0.68]] {
            let frame = mach.build_frame(&alpha).unwrap();
            let tau = C64::from_polar(1.0, 0.9);
            let mut row = Vec::new();
            for z in samples {
                let e = frame.entries(z, tau).unwrap();
                let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
                let want = frame.det_reference(z);
                assert!(
                    (det - want).norm() <= 1e-7 * want.norm(),
                    "det at {z}: {det} vs {want}"
                );
                row.push(det);
            }
            dets.push(row);
        }
        // Character independence.
        for (d0, d1) in dets[0].iter().zip(&dets[1]) {
            assert!((d0 - d1).norm() <= 1e-7 * d0.norm());
        }
    }

    #[test]
    fn f2_frame_triangular_at_i() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let frame = mach.build_frame(&[0.4]).unwrap();
        let tau = C64::from_polar(1.0, 2.1);
        let e = frame.entries(C64::i(), tau).unwrap();
        assert!(e[0][1].norm() < 1e-12, "upper-right {}", e[0][1]);
        // The normalization equations are over-determined; the imaginary
        // defect of K(i) is the recorded consistency residual, not zero.
        assert!(e[1][1].im.abs() < 1e-8 && e[1][1].re > 0.0);
        let a = frame.pair().s_plus_at_i();
        assert!((e[1][0] - tau * a * e[1][1]).norm() < 1e-8);
        assert!(frame.s_minus(C64::i()).unwrap().norm() < 1e-12);
    }

    #[test]
    fn f2_frame_u_conjugation() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let frame = mach.build_frame(&[0.15]).unwrap();
        let tau = C64::from_polar(1.0, -1.3);
        let r = tau.sqrt();
        let z = C64::new(0.4, 1.1);
        let base = frame.entries(z, C64::new(1.0, 0.0)).unwrap();
        let twisted = frame.entries(z, tau).unwrap();
        let want = [
            [base[0][0], base[0][1] / (r * r)],
            [base[1][0] * r * r, base[1][1]],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((twisted[i][j] - want[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn f2_schur_step() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let alpha = [0.35];
        let kp = mach.build(&alpha).unwrap();
        let down = mach.build(&character_sub(&alpha, pot.beta_phi())).unwrap();
        let a = kp.s_plus_at_i();
        let rho = (1.0 - a.norm_sqr()).sqrt();
        for z in [C64::new(0.0, 1.7), C64::new(-0.8, 0.6), C64::new(1.3, 2.2)] {
            let ks = kp.k_sharp(z).unwrap();
            let k = kp.k(z).unwrap();
            let lhs1 = (ks - a * k) / rho;
            let lhs2 = (k - a.conj() * ks) / rho;
            let want1 = pot.phi(z) * down.k_sharp(z).unwrap();
            let want2 = pot.phi_sharp(z) * down.k(z).unwrap();
            assert!((lhs1 - want1).norm() <= 1e-6 * (1.0 + want1.norm()));
            assert!((lhs2 - want2).norm() <= 1e-6 * (1.0 + want2.norm()));
            // Möbius relation between consecutive Schur functions.
            let sp = kp.s_plus(z).unwrap();
            let spd = down.s_plus(z).unwrap();
            let v = pot.v_quotient(z);
            let want = (sp - a) / (1.0 - sp * a.conj());
            assert!((v * spd - want).norm() <= 1e-6 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn f2_cd_forms_agree_and_gram_positive() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let kp = mach.build(&[0.52]).unwrap();
        let pts = [
            C64::new(0.0, 1.0),
            C64::new(0.5, 0.8),
            C64::new(-1.7, 1.4),
            C64::new(2.4, 0.3),
        ];
        for &z in &pts {
            for &z0 in &pts {
                let k1 = kp.cd_kernel(z, z0).unwrap();
                let k2 = kp.cd_kernel_cayley(z, z0).unwrap();
                let k3 = kp.cd_kernel_schur(z, z0).unwrap();
                assert!((k1 - k2).norm() <= 1e-9 * (1.0 + k1.norm()), "{k1} vs {k2}");
                assert!((k1 - k3).norm() <= 1e-9 * (1.0 + k1.norm()));
            }
        }
        // k(i,i) = K(i)².
        let kii = kp.cd_kernel(C64::i(), C64::i()).unwrap();
        assert_abs_diff_eq!(kii.re, kp.k_at_i() * kp.k_at_i(), epsilon = 1e-9);
        assert!(kii.im.abs() < 1e-12);
        // Gram positivity over the sample points, as a real embedding.
        let n = pts.len();
        let mut real = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
        for a in 0..n {
            for b in 0..n {
                let g = kp.cd_kernel(pts[a], pts[b]).unwrap();
                real[(a, b)] = g.re;
                real[(a, b + n)] = -g.im;
                real[(a + n, b)] = g.im;
                real[(a + n, b + n)] = g.re;
            }
        }
        let sym = (real.clone() + real.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(sym);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-8, "Gram minimum eigenvalue {min}");
    }

    #[test]
    fn f2_boundary_reflection_and_symmetry() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let frame = mach.build_frame(&[0.62]).unwrap();
        // Reflectionless property on band interiors: conj(s₊) = s₋ on E.
        for xi in [-2.6, 0.4, 2.9] {
            let (ku, _) = frame.pair().k_boundary(xi).unwrap();
            let (ksu, _) = frame.pair().k_sharp_boundary(xi).unwrap();
            let sp = ksu / ku;
            let (tu, _) = frame.tilde().k_boundary(xi).unwrap();
            let (tsu, _) = frame.tilde().k_sharp_boundary(xi).unwrap();
            let sm = frame.tau_star().conj().powi(2)
                * pot.v_quotient(C64::new(xi, 0.0))
                * tsu
                / tu;
            assert!((sp.conj() - sm).norm() < 1e-6, "at {xi}: {sp} vs {sm}");
            assert!(sp.norm() <= 1.0 + 1e-9);
        }
        // Symmetry across the axis near a gap: conj(s₊(z̄))·s₊(z) = 1.
        for z in [C64::new(-1.5, 0.05), C64::new(1.4, 0.02)] {
            let prod = frame.pair().s_plus(z.conj()).unwrap().conj()
                * frame.pair().s_plus(z).unwrap();
            assert!((prod - 1.0).norm() < 1e-6, "symmetry product {prod}");
        }
        // Schur bound on the upper half-plane.
        for z in [
            C64::new(0.0, 0.3),
            C64::new(1.2, 1.0),
            C64::new(-2.3, 2.0),
            C64::new(4.0, 0.5),
        ] {
            assert!(frame.pair().s_plus(z).unwrap().norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn f2_resolvent_routes_and_zeros() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let frame = mach.build_frame(&[0.3]).unwrap();
        let tau = C64::from_polar(1.0, 0.8);
        // Herglotz on the imaginary axis, and dual-route agreement.
        for y in [0.1, 1.0, 10.0] {
            let r = frame.resolvent(C64::new(0.0, y), tau).unwrap();
            assert!(r.value.im > 0.0, "Im R(iy) = {}", r.value.im);
            assert!(r.cross_residual < 1e-6, "cross {}", r.cross_residual);
        }
        for z in [C64::new(0.7, 0.4), C64::new(-1.2, 1.9), C64::new(3.0, 0.1)] {
            let r = frame.resolvent(z, tau).unwrap();
            assert!(r.cross_residual < 1e-6);
            assert!(r.value.im > 0.0);
        }
        // Zeros on the gaps sit at the divisor points of π⁻¹(α, τ): the
        // boundary values of R on a gap are real with a sign change there.
        let d = mach.abel().inverse(&[0.3], tau, None).unwrap();
        for p in d.points() {
            let gap = pot
                .set()
                .all_gaps()
                .into_iter()
                .find(|g| g.lo <= p.x && p.x <= g.hi)
                .unwrap();
            let lo = if gap.lo.is_finite() { gap.lo } else { p.x - 1.0 };
            let dl = 0.25 * (p.x - lo).min(gap.hi - p.x);
            if dl < 1e-6 {
                continue;
            }
            let left = frame
                .resolvent(C64::new(p.x - dl, 0.0), tau)
                .unwrap()
                .value;
            let right = frame
                .resolvent(C64::new(p.x + dl, 0.0), tau)
                .unwrap()
                .value;
            assert!(left.im.abs() < 1e-7 * (1.0 + left.re.abs()));
            assert!(right.im.abs() < 1e-7 * (1.0 + right.re.abs()));
            assert!(
                left.re < 0.0 && right.re > 0.0,
                "no sign change at {}: {left} | {right}",
                p.x
            );
        }
    }

    #[test]
    fn f2_blaschke_quotient() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let alpha = [0.44];
        let frame = mach.build_frame(&alpha).unwrap();
        let tau = C64::from_polar(1.0, 2.4);
        let d = mach.abel().inverse(&alpha, tau, None).unwrap();
        let poles: Vec<_> = d
            .points()
            .iter()
            .map(|p| (pot.pole_green(p.x).unwrap(), p.epsilon))
            .collect();
        // The quotient must equal the Blaschke-type product over the divisor
        // of (α, τ) up to one unimodular constant (the product's factors are
        // only pinned up to the branch convention of their phases).
        let mut ratio_ref = None;
        for z in [C64::new(0.0, 1.0), C64::new(0.9, 0.7), C64::new(-2.5, 1.6)] {
            let got = frame.delta_quotient(z, tau).unwrap();
            let mut want = C64::new(1.0, 0.0);
            for (pg, eps) in &poles {
                let factor = pot.phi_pole(pg, z);
                if *eps > 0.0 {
                    want /= factor;
                } else {
                    want *= factor;
                }
            }
            assert!(
                (got.norm() - want.norm()).abs() <= 1e-6 * (1.0 + want.norm()),
                "|Δ| at {z}: {} vs {}",
                got.norm(),
                want.norm()
            );
            let ratio = got / want;
            match ratio_ref {
                None => ratio_ref = Some(ratio),
                Some(r0) => assert!(
                    (ratio - r0).norm() <= 1e-6,
                    "phase drift at {z}: {ratio} vs {r0}"
                ),
            }
        }
    }

    #[test]
    fn f3_semibounded_build_and_identities() {
        let pot = f3();
        let mach = KernelMachine::new(&pot);
        let alpha = [0.27];
        let frame = mach.build_frame(&alpha).unwrap();
        assert!(frame.pair().reflection_residual() < 1e-7);
        // Dual product at i.
        let want = (pot.widom(C64::i()) * pot.phi_prime_at_i() / pot.theta_prime(C64::i())).norm();
        let got = frame.pair().k_at_i()
            * mach.build(&mach.alpha_tilde(&alpha)).unwrap().k_at_i();
        assert_abs_diff_eq!(got, want, epsilon = 1e-6 * want);
        // Determinant identity.
        for z in [C64::new(0.0, 1.0), C64::new(1.5, 0.9)] {
            let e = frame.entries(z, C64::new(1.0, 0.0)).unwrap();
            let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
            let dref = frame.det_reference(z);
            assert!((det - dref).norm() <= 1e-7 * dref.norm());
        }
        // Resolvent Herglotz + dual route.
        let tau = C64::from_polar(1.0, -0.4);
        for y in [0.2, 2.0] {
            let r = frame.resolvent(C64::new(0.5, y), tau).unwrap();
            assert!(r.value.im > 0.0);
            assert!(r.cross_residual < 1e-6);
        }
        // Unit norm via full boundary quadrature.
        let k_bd = |xi: f64| frame.pair().k_boundary(xi).unwrap();
        let norm = mach.inner_product(k_bd, k_bd, 1e-8);
        assert_abs_diff_eq!(norm.re, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn f2_kernel_character_equivariance() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let alpha = [0.58];
        let kp = mach.build(&alpha).unwrap();
        // Both constituent products carry the same character, measured by
        // loop continuation of their logarithmic derivatives.
        for d in [kp.divisor_plus(), kp.divisor_minus()] {
            let got = mach.abel().alpha(d);
            assert_abs_diff_eq!(
                crate::abel::circle_distance(got[0], alpha[0]),
                0.0,
                epsilon = 1e-7
            );
        }
        let gen = &pot.set().generators()[0];
        let loop_val = pot.loop_integral(
            gen,
            |z| mach.abel().kappa_log_derivative(kp.divisor_plus(), z).unwrap(),
            None,
            1e-9,
        );
        let winding = wrap_unit((loop_val / (2.0 * PI * C64::i())).re);
        assert_abs_diff_eq!(
            crate::abel::circle_distance(winding, alpha[0]),
            0.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn build_rejects_wrong_character_length() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        assert!(mach.build(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn boundary_modulus_matches_direct_value() {
        let pot = f2();
        let mach = KernelMachine::new(&pot);
        let set = pot.set();
        let d = Divisor::new(
            set,
            vec![
                DivisorPoint { x: -1.4, epsilon: 1.0 },
                DivisorPoint { x: 1.7, epsilon: -1.0 },
            ],
        )
        .unwrap();
        for xi in [-2.8, 0.3, 2.4] {
            let direct = mach.abel().kappa(&d, C64::new(xi, 0.0)).unwrap().norm();
            let closed = mach.boundary_abs2(&d, xi).sqrt();
            assert_abs_diff_eq!(direct, closed, epsilon = 1e-8 * (1.0 + closed));
        }
    }
}
