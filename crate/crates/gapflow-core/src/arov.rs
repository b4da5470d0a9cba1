// SPDX-License-Identifier: MIT

//! Arov-gauge transfer matrices and the canonical system they solve.
//!
//! For a character `α`, a unimodular gauge `τ`, and a flow time `ℓ ≥ 0`,
//! the transfer matrix is assembled from two kernel frames and the Martin
//! phase:
//!
//! ```text
//! 𝔄^{α,τ}(z, ℓ) = 𝒯_{α,τ}(z)⁻¹ · Λ_{Θ(z)−θ_r}(ℓ) · 𝒯_{α−ηℓ,τ}(z),
//! Λ_θ(ℓ) = diag(e^{−iℓθ}, e^{iℓθ}),
//! ```
//!
//! where `η` is the character of `e^{iΘ}`.  The family is holomorphic on
//! `Ω`, `j`-contractive in the upper half-plane for `j = diag(−1, 1)`,
//! has unit determinant, and is lower triangular with positive diagonal
//! at `z = i` — the Arov normalization.  It solves the canonical system
//!
//! ```text
//! d𝔄/dμ = 𝔄 · (izA(ℓ) − B(ℓ)) · j,
//! A = [[1, −ā], [−𝔞, 1]],   B = [[0, ā], [−𝔞, 0]],
//! ```
//!
//! driven by a scalar positive measure `μ` and a coefficient `𝔞(ℓ)` with
//! `|𝔞| ≤ 1`.  Both are recovered here from samples of the kernel data
//! along the character line `ℓ ↦ α − ηℓ`:
//!
//! ```text
//! μ((ℓ₁, ℓ₂]) = (ℓ₂−ℓ₁)θ_i + 𝔯(α−ηℓ₂) − 𝔯(α−ηℓ₁),   𝔯(α) = −log K^α(i),
//! 𝔞(ℓ) = 𝔰(ℓ) − 𝔰'(ℓ)/(2μ'(ℓ)),                      𝔰(α) = K♯^α(i)/K^α(i),
//! ```
//!
//! with the derivatives taken by Richardson-extrapolated central
//! differences.  An independent route to `𝔞` goes through the sectorial
//! limit `𝔠(ℓ) = lim_y s₊^{α−ηℓ}(iy)` and the involution
//! `𝔞 = 2𝔠/(1+|𝔠|²)`; for a semibounded spectrum the measure-theoretic
//! route degenerates (`|𝔞| = 1` a.e. and the system has exponential type
//! zero) and the limit route is the one used.
//!
//! The module also exposes the Weyl disks of the system, growth/type
//! diagnostics along the imaginary axis, and the closed-form upper bound
//! for the density `dμ/dℓ` available when every gap has finite
//! logarithmic length.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::abel::Divisor;
use crate::error::{Error, Result};
use crate::gapset::SideMode;
use crate::kernels::{Frame, FrameSeeds, KernelMachine, KernelPair};
use crate::potential::{wrap_unit, Potential};
use crate::C64;

/// A `2×2` complex matrix in row-major layout.
pub type Mat2 = [[C64; 2]; 2];

/// Step used for the Richardson central differences in `ℓ`.
const DERIV_H: f64 = 1e-3;

/// `j = diag(−1, 1)`.
pub fn j_matrix() -> Mat2 {
    [
        [C64::new(-1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ]
}

/// Identity matrix.
pub fn identity2() -> Mat2 {
    [
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ]
}

/// Matrix product.
pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// Determinant.
pub fn det2(a: &Mat2) -> C64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Inverse through the adjugate; errors when the determinant vanishes.
pub fn inv2(a: &Mat2) -> Result<Mat2> {
    let d = det2(a);
    if d.norm() < 1e-280 {
        return Err(Error::non_convergence("2×2 inverse: determinant vanished"));
    }
    Ok([
        [a[1][1] / d, -a[0][1] / d],
        [-a[1][0] / d, a[0][0] / d],
    ])
}

/// Conjugate transpose.
pub fn adjoint2(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

/// Entrywise difference.
pub fn sub2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = *a;
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][c] - b[r][c];
        }
    }
    out
}

/// Frobenius norm.
pub fn fro_norm(a: &Mat2) -> f64 {
    a.iter()
        .flatten()
        .map(|e| e.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Smallest eigenvalue of a Hermitian `2×2` matrix (the anti-Hermitian
/// part, a numerical residue, is discarded).
pub fn herm2_min_eig(h: &Mat2) -> f64 {
    let h11 = h[0][0].re;
    let h22 = h[1][1].re;
    let off = 0.5 * (h[0][1] + h[1][0].conj());
    let tr = h11 + h22;
    let det = h11 * h22 - off.norm_sqr();
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    0.5 * (tr - disc)
}

/// `exp(M)` for a `2×2` matrix through the Cayley–Hamilton closed form.
pub fn expm2(m: &Mat2) -> Mat2 {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let q2 = half_tr * half_tr - det2(m);
    // cosh(q) and sinh(q)/q as functions of q²; series near q = 0.
    let (ch, shq) = if q2.norm() < 1e-8 {
        (
            C64::new(1.0, 0.0) + q2 * 0.5 + q2 * q2 / 24.0,
            C64::new(1.0, 0.0) + q2 / 6.0 + q2 * q2 / 120.0,
        )
    } else {
        let q = q2.sqrt();
        (q.cosh(), q.sinh() / q)
    };
    let scale = half_tr.exp();
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let id = if r == c {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            out[r][c] = scale * (ch * id + shq * (m[r][c] - half_tr * id));
        }
    }
    out
}

/// `(izA − B)·j` for coefficient value `a = 𝔞^{α,τ}(ℓ)`.
fn system_matrix(z: C64, a: C64) -> Mat2 {
    let iz = C64::i() * z;
    let ab = a.conj();
    let m = [
        [iz, -(iz + 1.0) * ab],
        [-(iz - 1.0) * a, iz],
    ];
    // Right-multiplying by j = diag(−1,1) negates the first column.
    [[-m[0][0], m[0][1]], [-m[1][0], m[1][1]]]
}

/// One transfer-matrix flow `ℓ ↦ 𝔄^{α,τ}(·, ℓ)` at fixed base character
/// and gauge.
///
/// Kernel pairs and frames along the character line are cached and each
/// new build is warm-started from the nearest previously solved `ℓ`, so
/// dense scans cost a few Newton steps per point.
pub struct ArovSystem<'m> {
    kern: &'m KernelMachine<'m>,
    alpha0: Vec<f64>,
    tau: C64,
    eta: Vec<f64>,
    frames: RefCell<HashMap<u64, Rc<Frame<'m>>>>,
    pairs: RefCell<HashMap<u64, Rc<KernelPair<'m>>>>,
    frame_seeds: RefCell<Vec<(f64, FrameSeeds)>>,
    pair_seeds: RefCell<Vec<(f64, Divisor, Divisor)>>,
}

impl<'m> ArovSystem<'m> {
    /// Creates the flow for base character `alpha0` and unimodular gauge
    /// `tau`.
    pub fn new(kern: &'m KernelMachine<'m>, alpha0: &[f64], tau: C64) -> Result<Self> {
        let pot = kern.potential();
        let rank = pot.set().rank();
        if alpha0.len() != rank {
            return Err(Error::validation(format!(
                "character length {} does not match torus rank {rank}",
                alpha0.len()
            )));
        }
        if (tau.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::validation("gauge τ must be unimodular"));
        }
        Ok(Self {
            kern,
            alpha0: alpha0.iter().map(|&a| wrap_unit(a)).collect(),
            tau,
            eta: pot.eta_char(),
            frames: RefCell::new(HashMap::new()),
            pairs: RefCell::new(HashMap::new()),
            frame_seeds: RefCell::new(Vec::new()),
            pair_seeds: RefCell::new(Vec::new()),
        })
    }

    /// The underlying kernel machine.
    pub fn machine(&self) -> &'m KernelMachine<'m> {
        self.kern
    }

    /// The base character.
    pub fn alpha0(&self) -> &[f64] {
        &self.alpha0
    }

    /// The gauge `τ`.
    pub fn tau(&self) -> C64 {
        self.tau
    }

    /// The character at flow time `ℓ`: `α − ηℓ` on the torus.
    pub fn character_at(&self, ell: f64) -> Vec<f64> {
        self.alpha0
            .iter()
            .zip(&self.eta)
            .map(|(&a, &e)| wrap_unit(a - e * ell))
            .collect()
    }

    /// Kernel pair at flow time `ell`, cached and warm-started.
    pub fn pair(&self, ell: f64) -> Result<Rc<KernelPair<'m>>> {
        let key = ell.to_bits();
        if let Some(p) = self.pairs.borrow().get(&key) {
            return Ok(Rc::clone(p));
        }
        let alpha = self.character_at(ell);
        let seeds = self.pair_seeds.borrow();
        let nearest = seeds.iter().min_by(|a, b| {
            (a.0 - ell)
                .abs()
                .partial_cmp(&(b.0 - ell).abs())
                .expect("seed distances are finite")
        });
        let pair = match nearest {
            Some((_, dp, dm)) => self.kern.build_seeded(&alpha, Some(dp), Some(dm))?,
            None => self.kern.build(&alpha)?,
        };
        drop(seeds);
        self.pair_seeds.borrow_mut().push((
            ell,
            pair.divisor_plus().clone(),
            pair.divisor_minus().clone(),
        ));
        let rc = Rc::new(pair);
        self.pairs.borrow_mut().insert(key, Rc::clone(&rc));
        Ok(rc)
    }

    /// Frame at flow time `ell`, cached and warm-started.
    pub fn frame(&self, ell: f64) -> Result<Rc<Frame<'m>>> {
        let key = ell.to_bits();
        if let Some(f) = self.frames.borrow().get(&key) {
            return Ok(Rc::clone(f));
        }
        let alpha = self.character_at(ell);
        let seeds = self.frame_seeds.borrow();
        let nearest = seeds.iter().min_by(|a, b| {
            (a.0 - ell)
                .abs()
                .partial_cmp(&(b.0 - ell).abs())
                .expect("seed distances are finite")
        });
        let frame = match nearest {
            Some((_, s)) => self.kern.build_frame_seeded(&alpha, Some(s))?,
            None => self.kern.build_frame(&alpha)?,
        };
        drop(seeds);
        self.frame_seeds.borrow_mut().push((ell, frame.seeds()));
        let rc = Rc::new(frame);
        self.frames.borrow_mut().insert(key, Rc::clone(&rc));
        Ok(rc)
    }

    /// `𝔯(α−ηℓ) = −log K^{α−ηℓ}(i)` and `𝔰(α−ηℓ) = K♯(i)/K(i)`.
    pub fn kernel_samples(&self, ell: f64) -> Result<(f64, C64)> {
        let p = self.pair(ell)?;
        Ok((-p.k_at_i().ln(), p.s_plus_at_i()))
    }

    /// `Θ(z) − θ_r`, valid in both half-planes.
    fn theta_tilde(&self, z: C64) -> C64 {
        let pot = self.kern.potential();
        pot.theta(z) - pot.theta_r()
    }

    /// The transfer matrix `𝔄^{α,τ}(z, ℓ)`.
    pub fn transfer(&self, z: C64, ell: f64) -> Result<Mat2> {
        let (log_scale, scaled) = self.transfer_log_scaled(z, ell)?;
        if log_scale > 650.0 {
            return Err(Error::non_convergence(
                "transfer matrix overflows; use the log-scaled evaluation",
            ));
        }
        let s = log_scale.exp();
        let mut out = scaled;
        for row in &mut out {
            for e in row {
                *e *= s;
            }
        }
        Ok(out)
    }

    /// The transfer matrix split as `𝔄 = e^{c}·Â`: returns `(c, Â)` with
    /// `c = ℓ·max(Im Θ̃(z), 0)`, so `Â` stays representable at large `|z|`.
    pub fn transfer_log_scaled(&self, z: C64, ell: f64) -> Result<(f64, Mat2)> {
        let t0 = self.frame(0.0)?.entries(z, self.tau)?;
        let t1 = self.frame(ell)?.entries(z, self.tau)?;
        let th = self.theta_tilde(z);
        let log_scale = ell * th.im.max(0.0);
        let up = (-C64::i() * ell * th - log_scale).exp();
        let dn = (C64::i() * ell * th - log_scale).exp();
        let inv0 = inv2(&t0)?;
        let lam = [
            [up, C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), dn],
        ];
        Ok((log_scale, mul2(&mul2(&inv0, &lam), &t1)))
    }

    /// `log ‖𝔄(z, ℓ)‖_F`, safe at heights where the matrix itself
    /// overflows.
    pub fn log_transfer_norm(&self, z: C64, ell: f64) -> Result<f64> {
        let (c, m) = self.transfer_log_scaled(z, ell)?;
        Ok(c + fro_norm(&m).ln())
    }

    /// `μ^{α,τ}((ℓ₁, ℓ₂])` through the kernel-value route.
    ///
    /// The measure is gauge independent and nonnegative for `ℓ₂ ≥ ℓ₁`;
    /// the dual route through `−log 𝔄₂₂(i, ·)` is
    /// [`ArovSystem::mu_from_transfer`].
    pub fn mu(&self, ell1: f64, ell2: f64) -> Result<f64> {
        let (r1, _) = self.kernel_samples(ell1)?;
        let (r2, _) = self.kernel_samples(ell2)?;
        Ok((ell2 - ell1) * self.kern.potential().theta_i() + r2 - r1)
    }

    /// `μ^{α,τ}((0, ℓ]) = −log 𝔄₂₂(i, ℓ)`, the transfer-matrix route.
    pub fn mu_from_transfer(&self, ell: f64) -> Result<f64> {
        let a = self.transfer(C64::i(), ell)?;
        let a22 = a[1][1];
        if a22.re <= 0.0 {
            return Err(Error::non_convergence(
                "𝔄₂₂(i, ℓ) is not positive; triangular normalization lost",
            ));
        }
        Ok(-a22.re.ln())
    }

    /// Density `dμ/dℓ = θ_i + d𝔯/dℓ` at `ell` (Richardson central
    /// differences with step `1e-3`).
    pub fn mu_density(&self, ell: f64) -> Result<f64> {
        let (dr, _) = self.derivs(ell)?;
        Ok(self.kern.potential().theta_i() + dr)
    }

    /// Richardson-extrapolated `(d𝔯/dℓ, d𝔰/dℓ)` at `ell`.
    fn derivs(&self, ell: f64) -> Result<(f64, C64)> {
        let h = DERIV_H;
        let (r_p1, s_p1) = self.kernel_samples(ell + h)?;
        let (r_m1, s_m1) = self.kernel_samples(ell - h)?;
        let (r_p2, s_p2) = self.kernel_samples(ell + 0.5 * h)?;
        let (r_m2, s_m2) = self.kernel_samples(ell - 0.5 * h)?;
        let d1_r = (r_p1 - r_m1) / (2.0 * h);
        let d2_r = (r_p2 - r_m2) / h;
        let d1_s = (s_p1 - s_m1) / (2.0 * h);
        let d2_s = (s_p2 - s_m2) / h;
        Ok(((4.0 * d2_r - d1_r) / 3.0, (4.0 * d2_s - d1_s) / 3.0))
    }

    /// The coefficient `𝔞^α(ℓ)` (gauge-stripped: `𝔞^{α,τ} = τ·𝔞^α`).
    ///
    /// Two-sided spectra use the measure route
    /// `𝔞 = 𝔰 − 𝔰'/(2μ')`; semibounded spectra (where `μ'`-ratios
    /// degenerate and `|𝔞| = 1` a.e.) use the sectorial-limit route.
    pub fn verblunsky(&self, ell: f64) -> Result<C64> {
        match self.kern.potential().set().side() {
            SideMode::TwoSided => {
                let (dr, ds) = self.derivs(ell)?;
                let mu_p = self.kern.potential().theta_i() + dr;
                if mu_p <= 1e-8 {
                    return Err(Error::non_convergence(
                        "μ-density vanished; coefficient undefined at this ℓ",
                    ));
                }
                let (_, s) = self.kernel_samples(ell)?;
                Ok(s - ds / (2.0 * mu_p))
            }
            SideMode::SemiboundedBelow { .. } => self.verblunsky_schur(ell),
        }
    }

    /// `𝔞^α(ℓ)` through the sectorial limit: `𝔠 = lim_y s₊^{α−ηℓ}(iy)`
    /// (Richardson in `1/y`), then `𝔞 = 2𝔠/(1+|𝔠|²)`.
    pub fn verblunsky_schur(&self, ell: f64) -> Result<C64> {
        let c = self.schur_limit(ell)?;
        Ok(2.0 * c / (1.0 + c.norm_sqr()))
    }

    /// The sectorial limit `𝔠(ℓ) = lim_{y→∞} s₊^{α−ηℓ}(iy)`.
    pub fn schur_limit(&self, ell: f64) -> Result<C64> {
        let p = self.pair(ell)?;
        let y0 = 1e3;
        let s1 = p.s_plus(C64::new(0.0, y0))?;
        let s2 = p.s_plus(C64::new(0.0, 2.0 * y0))?;
        let s3 = p.s_plus(C64::new(0.0, 4.0 * y0))?;
        // Two Richardson levels for an O(1/y) + O(1/y²) tail.
        let d1 = 2.0 * s2 - s1;
        let d2 = 2.0 * s3 - s2;
        Ok((4.0 * d2 - d1) / 3.0)
    }

    /// Samples the canonical-system data on the uniform grid
    /// `ℓ_k = k·ell_max/n`, `k = 0..=n`, warm-starting every build.
    pub fn sample_params(&self, ell_max: f64, n: usize) -> Result<CanonicalParams> {
        if !(ell_max > 0.0) || n < 2 {
            return Err(Error::validation(
                "parameter sampling needs ell_max > 0 and at least two intervals",
            ));
        }
        let semibounded = !matches!(self.kern.potential().set().side(), SideMode::TwoSided);
        let (r0, _) = self.kernel_samples(0.0)?;
        let theta_i = self.kern.potential().theta_i();
        let mut ell_grid = Vec::with_capacity(n + 1);
        let mut mu_cumulative = Vec::with_capacity(n + 1);
        let mut a_values = Vec::with_capacity(n + 1);
        let mut prev_mu = 0.0;
        for k in 0..=n {
            let ell = ell_max * k as f64 / n as f64;
            let (rk, _) = self.kernel_samples(ell)?;
            let mut mu = ell * theta_i + rk - r0;
            if mu < prev_mu {
                if mu < prev_mu - 1e-9 {
                    return Err(Error::non_convergence(
                        "cumulative μ decreased beyond tolerance",
                    ));
                }
                mu = prev_mu;
            }
            let a = self.verblunsky(ell)?;
            let abs_a = a.norm();
            if abs_a > 1.0 + 1e-8 {
                return Err(Error::non_convergence(
                    "coefficient left the closed unit disk beyond tolerance",
                ));
            }
            if semibounded && abs_a < 1.0 - 1e-4 {
                return Err(Error::non_convergence(
                    "semibounded coefficient should be unimodular",
                ));
            }
            ell_grid.push(ell);
            mu_cumulative.push(mu);
            a_values.push(a);
            prev_mu = mu;
        }
        Ok(CanonicalParams {
            ell_grid,
            mu_cumulative,
            a_values,
            tau: self.tau,
            alpha0: self.alpha0.clone(),
            theta_i,
        })
    }

    /// The Weyl disk `D(z, ℓ)` of the system at `z` in the open upper
    /// half-plane.
    pub fn weyl_disk(&self, z: C64, ell: f64) -> Result<WeylDisk> {
        if z.im <= 0.0 {
            return Err(Error::validation(
                "Weyl disks are defined for z in the open upper half-plane",
            ));
        }
        let a = self.transfer(z, ell)?;
        let q = mul2(&mul2(&a, &j_matrix()), &adjoint2(&a));
        let p11 = q[0][0].re;
        if p11 >= -1e-280 {
            return Err(Error::non_convergence(
                "Weyl quadratic form degenerated; disk undefined",
            ));
        }
        let p12 = q[0][1];
        let p22 = q[1][1].re;
        let center = -p12.conj() / p11;
        let r2 = p12.norm_sqr() / (p11 * p11) - p22 / p11;
        Ok(WeylDisk {
            center,
            radius: r2.max(0.0).sqrt(),
        })
    }

    /// Growth diagnostics along `z = iy`: for each height the ratio
    /// `log ‖𝔄(iy, ℓ)‖ / M(iy)`, plus the difference-quotient
    /// extrapolation of the last two heights (exact when
    /// `log ‖𝔄‖ = ℓ·M + O(1)`).
    pub fn m_type_check(&self, ell: f64, heights: &[f64]) -> Result<TypeReport> {
        if heights.len() < 2 {
            return Err(Error::validation("type check needs at least two heights"));
        }
        let pot = self.kern.potential();
        let mut samples = Vec::with_capacity(heights.len());
        let mut lm = Vec::with_capacity(heights.len());
        for &y in heights {
            let z = C64::new(0.0, y);
            let m = pot.theta(z).im;
            let l = self.log_transfer_norm(z, ell)?;
            samples.push((y, l / m));
            lm.push((m, l));
        }
        let (m_a, l_a) = lm[lm.len() - 2];
        let (m_b, l_b) = lm[lm.len() - 1];
        Ok(TypeReport {
            samples,
            extrapolated: (l_b - l_a) / (m_b - m_a),
        })
    }
}

/// One Weyl disk `D(z, ℓ)`: the image of the closed unit disk under the
/// Möbius action of `𝔄(z, ℓ)⁻¹` in the `j`-metric.
#[derive(Debug, Clone, Copy)]
pub struct WeylDisk {
    /// Center.
    pub center: C64,
    /// Radius.
    pub radius: f64,
}

impl WeylDisk {
    /// Whether `w` lies in the disk, within `tol`.
    pub fn contains(&self, w: C64, tol: f64) -> bool {
        (w - self.center).norm() <= self.radius + tol
    }
}

/// Growth report along the imaginary axis.
#[derive(Debug, Clone)]
pub struct TypeReport {
    /// `(y, log ‖𝔄(iy, ℓ)‖ / M(iy))` per requested height.
    pub samples: Vec<(f64, f64)>,
    /// Difference-quotient extrapolation of the slope from the last two
    /// heights.
    pub extrapolated: f64,
}

/// Sampled canonical-system data on a uniform `ℓ`-grid.
#[derive(Debug, Clone)]
pub struct CanonicalParams {
    /// Grid `ℓ_0 = 0 < … < ℓ_n`.
    pub ell_grid: Vec<f64>,
    /// `μ((0, ℓ_k])`, nondecreasing with `μ_0 = 0`.
    pub mu_cumulative: Vec<f64>,
    /// Gauge-stripped coefficient `𝔞^α(ℓ_k)`.
    pub a_values: Vec<C64>,
    /// Gauge; the system's coefficient is `τ·𝔞^α`.
    pub tau: C64,
    /// Base character.
    pub alpha0: Vec<f64>,
    /// `θ_i = Im Θ(i)`.
    pub theta_i: f64,
}

impl CanonicalParams {
    /// Integrates the canonical system across the sampled grid, returning
    /// the trajectory `𝔄(z, ℓ_k)` at every grid point.
    ///
    /// Each interval takes one exponential step with the midpoint
    /// coefficient (second-order accurate; the determinant is exactly
    /// preserved because the generator is traceless).
    pub fn integrate(&self, z: C64) -> Vec<Mat2> {
        let n = self.ell_grid.len();
        let mut out = Vec::with_capacity(n);
        let mut a = identity2();
        out.push(a);
        for k in 0..n - 1 {
            let dmu = self.mu_cumulative[k + 1] - self.mu_cumulative[k];
            let coeff = 0.5 * self.tau * (self.a_values[k] + self.a_values[k + 1]);
            let mut c = system_matrix(z, coeff);
            for row in &mut c {
                for e in row {
                    *e *= dmu;
                }
            }
            a = mul2(&a, &expm2(&c));
            out.push(a);
        }
        out
    }

    /// `∫ √(1−|𝔞|²) dμ` over the sampled range (trapezoid rule); equals
    /// the exponential type of the system in the upper half-plane.
    pub fn type_integral(&self) -> f64 {
        let mut total = 0.0;
        for k in 0..self.ell_grid.len() - 1 {
            let dmu = self.mu_cumulative[k + 1] - self.mu_cumulative[k];
            let f = |a: C64| (1.0 - a.norm_sqr()).max(0.0).sqrt();
            total += 0.5 * (f(self.a_values[k]) + f(self.a_values[k + 1])) * dmu;
        }
        total
    }
}

/// Closed-form upper bound for the density `dμ^α/dℓ`, uniform in `α`:
///
/// ```text
/// dμ/dℓ ≤ exp(½∫_{ℝ∖E} |x|/(1+x²) dx) · cos(½∫_{ℝ∖E} sgn(x)/(1+x²) dx).
/// ```
///
/// Requires every gap to have finite logarithmic length; an infinite
/// (semibounded) gap makes the first integral diverge and the bound
/// empty, which is reported as a validation error.
pub fn mu_density_bound(pot: &Potential) -> Result<f64> {
    let gaps = pot.set().all_gaps();
    let mut abs_part = 0.0;
    let mut sgn_part = 0.0;
    for g in &gaps {
        if !g.is_finite() {
            return Err(Error::validation(
                "density bound requires every gap to have finite logarithmic length",
            ));
        }
        let (a, b) = (g.lo, g.hi);
        // ∫_a^b |x|/(1+x²) dx and ∫_a^b sgn(x)/(1+x²) dx, split at 0.
        let log1p2 = |x: f64| (1.0 + x * x).ln();
        if a >= 0.0 {
            abs_part += 0.5 * (log1p2(b) - log1p2(a));
            sgn_part += b.atan() - a.atan();
        } else if b <= 0.0 {
            abs_part += 0.5 * (log1p2(a) - log1p2(b));
            sgn_part += a.atan() - b.atan();
        } else {
            abs_part += 0.5 * (log1p2(a) + log1p2(b));
            sgn_part += a.atan() + b.atan();
        }
    }
    let phase = 0.5 * sgn_part;
    if phase.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::non_convergence(
            "density bound degenerated: the phase integral reached π/2",
        ));
    }
    Ok((0.5 * abs_part).exp() * phase.cos())
}


#[cfg(test)]
mod scratch {
    use super::*;
    use crate::gapset::GapSet;
    use crate::potential::Params;

    #[test]
    fn diag_true_character() {
        let set = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let pot = Potential::new(set, Params::default()).unwrap();
        let mach = KernelMachine::new(&pot);
        let map = mach.abel();
        let loop_turn = |d: &Divisor| -> f64 {
            // (1/2πi) ∮ dlogκ over the circle |z| = 1.5 (trapezoid rule).
            let n = 4000usize;
            let r = 1.5;
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                let t = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
                let z = C64::new(r * t.cos(), r * t.sin());
                let dz = C64::new(-r * t.sin(), r * t.cos())
                    * (2.0 * std::f64::consts::PI / n as f64);
                acc += map.kappa_log_derivative(d, z).unwrap() * dz;
            }
            (acc / (2.0 * std::f64::consts::PI * C64::i())).re
        };
        let one = C64::new(1.0, 0.0);
        for alpha in [[0.3], [0.52]] {
            for (tag, tau) in [("D+", one), ("D-", -one)] {
                let d = map.inverse(&alpha, tau, None).unwrap();
                let turn = loop_turn(&d);
                println!(
                    "alpha={:.4} {tag}: labels alpha={:.6} true turn={:+.6} (frac {:+.6})",
                    alpha[0],
                    map.alpha(&d)[0],
                    turn,
                    turn - turn.floor()
                );
            }
        }
        // A mirror-symmetric divisor for reference.
        let dsym = Divisor::new(
            pot.set(),
            vec![
                DivisorPoint { x: -1.4, epsilon: 1.0 },
                DivisorPoint { x: 1.4, epsilon: -1.0 },
            ],
        )
        .unwrap();
        let t1 = loop_turn(&dsym);
        println!(
            "sym divisor (-1.4,+)(1.4,-): labels alpha={:.6} true turn={:+.6} (frac {:+.6})",
            map.alpha(&dsym)[0],
            t1,
            t1 - t1.floor()
        );
        let dsym2 = Divisor::new(
            pot.set(),
            vec![
                DivisorPoint { x: -1.4, epsilon: 1.0 },
                DivisorPoint { x: 1.4, epsilon: 1.0 },
            ],
        )
        .unwrap();
        let t2 = loop_turn(&dsym2);
        println!(
            "sym divisor (-1.4,+)(1.4,+): labels alpha={:.6} true turn={:+.6} (frac {:+.6})",
            map.alpha(&dsym2)[0],
            t2,
            t2 - t2.floor()
        );
    }

    #[test]
    fn diag_build_phases() {
        let set = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let pot = Potential::new(set, Params::default()).unwrap();
        let mach = KernelMachine::new(&pot);
        let map = mach.abel();
        for alpha in [[0.3], [0.52], [0.1027]] {
            let kp = mach.build(&alpha).unwrap();
            let one = C64::new(1.0, 0.0);
            let dp = map.inverse(&alpha, one, None).unwrap();
            let dm = map.inverse(&alpha, -one, None).unwrap();
            let kap_p = map.kappa(&dp, C64::i()).unwrap();
            let kap_m = map.kappa(&dm, C64::i()).unwrap();
            println!(
                "alpha={:.4}: parities=({:+.0},{:+.0})  kappa+(i)={}  kappa-(i)={}  resid={:.3e}  s+(i)={}",
                alpha[0],
                kp.parities().0,
                kp.parities().1,
                kap_p,
                kap_m,
                kp.reflection_residual(),
                kp.s_plus_at_i()
            );
            for (tag, d) in [("D+", &dp), ("D-", &dm)] {
                let pts: Vec<String> = d
                    .points()
                    .iter()
                    .map(|p| format!("(x={:.5},e={:+.0})", p.x, p.epsilon))
                    .collect();
                println!("   {tag}: {}", pts.join(" "));
            }
        }
    }

    #[test]
    fn diag_reproducing_on_flow() {
        let set = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let pot = Potential::new(set, Params::default()).unwrap();
        let mach = KernelMachine::new(&pot);
        let eta = pot.eta_raw()[0] / (2.0 * std::f64::consts::PI);
        let z0 = C64::new(0.0, 2.0);
        for ell in [0.0, 0.1, 0.3, 0.45, 0.6] {
            let beta = [wrap_unit(0.52 - eta * ell)];
            let kp = mach.build(&beta).unwrap();
            let k_bd = |xi: f64| kp.k_boundary(xi).unwrap();
            let norm = mach.inner_product(k_bd, k_bd, 1e-8);
            let ks_bd = |xi: f64| kp.k_sharp_boundary(xi).unwrap();
            let cross = mach.inner_product(ks_bd, k_bd, 1e-8);
            let a = kp.s_plus_at_i();
            let sect = |xi: f64| {
                let (u, d) = kp.k_boundary(xi).unwrap();
                let (us, ds) = kp.k_sharp_boundary(xi).unwrap();
                let v0 = pot.v_quotient(z0).conj();
                let vu = pot.v_quotient(C64::new(xi, 0.0));
                let k0 = kp.k(z0).unwrap().conj();
                let ks0 = kp.k_sharp(z0).unwrap().conj();
                let up = (u * k0 - vu * v0 * us * ks0) / (1.0 - vu * v0);
                let dn = (d * k0 - vu * v0 * ds * ks0) / (1.0 - vu * v0);
                (up, dn)
            };
            let got = mach.inner_product(sect, k_bd, 1e-8);
            let want = kp.k(z0).unwrap().conj();
            println!(
                "ell={ell:.2} beta={:.4}: <K,K>-1={:+.2e}  |<Ks,K>-a|={:.2e}  |<k0,K>-K(z0)*|={:.2e}  K(2i)={}",
                beta[0],
                norm.re - 1.0,
                (cross - a).norm(),
                (got - want).norm(),
                kp.k(z0).unwrap()
            );
        }
    }

    #[test]
    fn diag_eta_scan() {
        let set = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let pot = Potential::new(set, Params::default()).unwrap();
        let mach = KernelMachine::new(&pot);
        let z2 = C64::new(0.0, 2.0);
        let iz = C64::i() * z2;
        let ell = 0.45;
        let h = 1e-4;
        let tester = |eta_t: f64| -> (f64, C64, C64) {
            let char_at = |l: f64| vec![wrap_unit(0.52 - eta_t * l)];
            let tt = |l: f64| {
                let f0 = mach.build_frame(&char_at(0.0)).unwrap();
                let f1 = mach.build_frame(&char_at(l)).unwrap();
                let t0 = f0.entries(z2, C64::new(1.0, 0.0)).unwrap();
                let t1 = f1.entries(z2, C64::new(1.0, 0.0)).unwrap();
                let th = pot.theta(z2) - pot.theta_r();
                let lam = [
                    [(-C64::i() * l * th).exp(), C64::new(0.0, 0.0)],
                    [C64::new(0.0, 0.0), (C64::i() * l * th).exp()],
                ];
                mul2(&mul2(&inv2(&t0).unwrap(), &lam), &t1)
            };
            let r = |l: f64| -mach.build(&char_at(l)).unwrap().k_at_i().ln();
            let dmu = 2.0 * h * pot.theta_i() + r(ell + h) - r(ell - h);
            let mut d = sub2(&tt(ell + h), &tt(ell - h));
            for row in &mut d { for e in row { *e /= dmu; } }
            let n = mul2(&inv2(&tt(ell)).unwrap(), &d);
            let a12 = (n[0][1] / (-(iz + 1.0))).conj();
            let a21 = n[1][0] / (iz - 1.0);
            let defect = (n[0][0] + iz).norm() + (n[1][1] - iz).norm() + (a12 - a21).norm();
            (defect, a12, a21)
        };
        let raw = pot.eta_raw()[0] / (2.0 * std::f64::consts::PI);
        for &eta_t in &[raw, -raw, 1.0 - raw, raw - 1.0, 1.0 + raw, 2.0 - raw, raw - 2.0] {
            let (d, a12, a21) = tester(eta_t);
            println!("eta_t={eta_t:+.6}: defect={d:.4e}  a12={a12}  a21={a21}");
        }
    }

    #[test]
    fn diag_flipped_flow() {
        let set = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let pot = Potential::new(set, Params::default()).unwrap();
        let mach = KernelMachine::new(&pot);
        // Flow equation residual at z=2i for both flow orientations.
        for &sign in &[1.0f64, -1.0] {
            let sys = ArovSystem::new(&mach, &[0.52], C64::new(1.0, 0.0)).unwrap();
            // over-ride: rebuild the character line by hand
            let ell = 0.45;
            let h = 1e-4;
            let eta = pot.eta_char()[0];
            let char_at = |l: f64| vec![wrap_unit(0.52 - sign * eta * l)];
            let frame_at = |l: f64| mach.build_frame(&char_at(l)).unwrap();
            let tt = |l: f64, z: C64| {
                let f0 = frame_at(0.0);
                let f1 = frame_at(l);
                let t0 = f0.entries(z, C64::new(1.0, 0.0)).unwrap();
                let t1 = f1.entries(z, C64::new(1.0, 0.0)).unwrap();
                let th = pot.theta(z) - pot.theta_r();
                let lam = [
                    [(-C64::i() * l * th).exp(), C64::new(0.0, 0.0)],
                    [C64::new(0.0, 0.0), (C64::i() * l * th).exp()],
                ];
                mul2(&mul2(&inv2(&t0).unwrap(), &lam), &t1)
            };
            let z2 = C64::new(0.0, 2.0);
            let ap = tt(ell + h, z2);
            let am = tt(ell - h, z2);
            let a0 = tt(ell, z2);
            // mu increment along this flow
            let r = |l: f64| -mach.build(&char_at(l)).unwrap().k_at_i().ln();
            let dmu = 2.0 * h * pot.theta_i() + r(ell + h) - r(ell - h);
            let mut d = sub2(&ap, &am);
            for row in &mut d { for e in row { *e /= dmu; } }
            let n = mul2(&inv2(&a0).unwrap(), &d);
            // density-route coefficient along this flow
            let s_of = |l: f64| mach.build(&char_at(l)).unwrap().s_plus_at_i();
            let ds = (s_of(ell + h) - s_of(ell - h)) / (2.0 * h);
            let dr = (r(ell + h) - r(ell - h)) / (2.0 * h);
            let mu_p = pot.theta_i() + dr;
            let a_dens = s_of(ell) - ds / (2.0 * mu_p);
            let want = system_matrix(z2, a_dens);
            println!("sign={sign}: |N-expect| = {:.3e}  a_dens={a_dens}", fro_norm(&sub2(&n, &want)));
        }
    }

    #[test]
    fn diag_routes() {
        let set = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        let pot = Potential::new(set, Params::default()).unwrap();
        let mach = KernelMachine::new(&pot);
        let sys = ArovSystem::new(&mach, &[0.52], C64::new(1.0, 0.0)).unwrap();

        for &ell in &[0.1f64, 0.45] {
            let a_density = sys.verblunsky(ell).unwrap();
            let a_schur = sys.verblunsky_schur(ell).unwrap();
            // Matrix route: M = 𝔄⁻¹ (d𝔄/dμ) j at z=i should be [[−1,0],[2𝔞,−1]].
            let h = 1e-4;
            let ap = sys.transfer(C64::i(), ell + h).unwrap();
            let am = sys.transfer(C64::i(), ell - h).unwrap();
            let a0 = sys.transfer(C64::i(), ell).unwrap();
            let dmu = sys.mu(ell - h, ell + h).unwrap();
            let mut diff = sub2(&ap, &am);
            for row in &mut diff {
                for e in row {
                    *e /= dmu;
                }
            }
            let m = mul2(&mul2(&inv2(&a0).unwrap(), &diff), &j_matrix());
            println!("ell={ell}");
            println!("  a_density = {a_density}");
            println!("  a_schur   = {a_schur}");
            println!("  a_matrix  = {}", 0.5 * m[1][0]);
            println!("  M row0 = {:?} (expect [-1, 0])", m[0]);
            println!("  M row1 diag = {} (expect -1)", m[1][1]);
            // Tail of s₊(iy):
            let p = sys.pair(ell).unwrap();
            for &y in &[1e3, 2e3, 4e3, 8e3, 1.6e4] {
                println!("  s+(i{y:.0}) = {}", p.s_plus(C64::new(0.0, y)).unwrap());
            }
            // Flow equation at z = 2i: N = 𝔄⁻¹ d𝔄/dμ should equal (izA−B)j.
            let z2 = C64::new(0.0, 2.0);
            let bp = sys.transfer(z2, ell + h).unwrap();
            let bm = sys.transfer(z2, ell - h).unwrap();
            let b0 = sys.transfer(z2, ell).unwrap();
            let mut d2 = sub2(&bp, &bm);
            for row in &mut d2 {
                for e in row {
                    *e /= dmu;
                }
            }
            let n = mul2(&inv2(&b0).unwrap(), &d2);
            let want = system_matrix(z2, a_density);
            println!("  |N-expect| = {}", fro_norm(&sub2(&n, &want)));
            // Structure decomposition: C = (izA−B)j has entries
            // [[−iz, −(iz+1)ā], [(iz−1)𝔞, iz]].
            let iz = C64::i() * z2;
            println!("  N11 = {}  (expect −iz = {})", n[0][0], -iz);
            println!("  N22 = {}  (expect iz = {})", n[1][1], iz);
            println!("  a from N12: {}", (n[0][1] / (-(iz + 1.0))).conj());
            println!("  a from N21: {}", n[1][0] / (iz - 1.0));
        }
    }
}
