// SPDX-License-Identifier: MIT

//! Validated descriptions of finite-gap sets.
//!
//! A finite-gap set is described by its open gaps `(a_j, b_j)` together with a
//! side mode: either the set is *two-sided* (it contains neighborhoods of both
//! `-∞` and `+∞` on the line) or it is *semibounded below* (it is contained in
//! `[e₀, ∞)` and contains a neighborhood of `+∞`).  In the semibounded case
//! the ray `(-∞, e₀)` acts as one additional, infinite gap.
//!
//! The struct [`GapSet`] validates the geometry once at construction time and
//! then answers the combinatorial questions every other module needs: the
//! ordered list of band edges, the closed bands, the sign of the square-root
//! branch on each gap, the rank of the fundamental group of `Ω = ℂ ∖ E`, and
//! the band groups encircled by each generator loop.
//!
//! ```
//! use gapflow_core::GapSet;
//!
//! // Two gaps (-2,-1) and (1,2); bands (-∞,-2], [-1,1], [2,∞).
//! let e = GapSet::two_sided(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
//! assert_eq!(e.num_gaps(), 2);
//! assert_eq!(e.rank(), 1);
//! assert_eq!(e.edges(), &[-2.0, -1.0, 1.0, 2.0]);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the set extends to `-∞` or has a finite lower edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SideMode {
    /// `E` contains rays near both `-∞` and `+∞`.
    TwoSided,
    /// `E ⊂ [e0, ∞)`; the ray `(-∞, e0)` is an infinite gap.
    SemiboundedBelow {
        /// Lower edge of the set.
        e0: f64,
    },
}

/// Normalization of the Martin function at infinity.
///
/// For a two-sided set the Martin function can be normalized to have slope one
/// along the imaginary axis (`M(iy)/y → 1`); for a semibounded set the growth
/// is `O(√y)` and the natural normalization makes the numerator polynomial of
/// `Θ'` monic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `lim_{y→∞} M(iy)/y = 1` (two-sided sets).
    SlopeOneAtInfinity,
    /// Monic numerator polynomial in `Θ' = P/w` (semibounded sets).
    MonicNumerator,
}

/// A maximal closed interval (band) of the set `E`.
///
/// Infinite endpoints are encoded as `f64::NEG_INFINITY` / `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    /// Lower endpoint (possibly `-∞`).
    pub lo: f64,
    /// Upper endpoint (possibly `+∞`).
    pub hi: f64,
}

impl Band {
    /// True if neither endpoint is infinite.
    pub fn is_compact(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// A point in the interior of the band, convenient as an anchor.
    pub fn interior_point(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo + 1.0,
            (false, true) => self.hi - 1.0,
            (false, false) => 0.0,
        }
    }
}

/// A gap of the set, i.e. a maximal open interval of `ℝ ∖ E`.
///
/// For a semibounded set the ray `(-∞, e0)` appears as the infinite gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    /// Lower endpoint (possibly `-∞`).
    pub lo: f64,
    /// Upper endpoint.
    pub hi: f64,
}

impl Gap {
    /// True if both endpoints are finite.
    pub fn is_finite(&self) -> bool {
        self.lo.is_finite()
    }

    /// Midpoint of a finite gap.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Half-length of a finite gap.
    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Raw configuration schema accepted in TOML or JSON form.
#[derive(Debug, Serialize, Deserialize)]
struct RawConfig {
    gaps: Vec<[f64; 2]>,
    side: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization_gap: Option<usize>,
}

/// A validated finite-gap set together with its normalization data.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSet {
    gaps: Vec<(f64, f64)>,
    side: SideMode,
    normalization_gap: usize,
    xi_star: f64,
}

impl GapSet {
    /// Builds a two-sided set from finite gaps, using the default
    /// normalization gap (index 0) and its midpoint as the base point.
    pub fn two_sided(gaps: &[(f64, f64)]) -> Result<Self> {
        Self::new(gaps.to_vec(), SideMode::TwoSided, 0, None)
    }

    /// Builds a set semibounded below by `e0` from its finite gaps.
    pub fn semibounded(e0: f64, gaps: &[(f64, f64)]) -> Result<Self> {
        Self::new(gaps.to_vec(), SideMode::SemiboundedBelow { e0 }, 0, None)
    }

    /// Full constructor with explicit normalization gap and base point.
    ///
    /// `xi_star = None` selects the midpoint of the normalization gap.
    pub fn new(
        mut gaps: Vec<(f64, f64)>,
        side: SideMode,
        normalization_gap: usize,
        xi_star: Option<f64>,
    ) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::validation("at least one finite gap is required"));
        }
        for &(a, b) in &gaps {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::validation("gap endpoints must be finite"));
            }
            if !(a < b) {
                return Err(Error::validation(format!(
                    "gap ({a}, {b}) must satisfy a < b"
                )));
            }
        }
        gaps.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        for w in gaps.windows(2) {
            if !(w[0].1 < w[1].0) {
                return Err(Error::validation(format!(
                    "gaps ({}, {}) and ({}, {}) must be separated by a band of positive length",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        if let SideMode::SemiboundedBelow { e0 } = side {
            if !e0.is_finite() {
                return Err(Error::validation("e0 must be finite"));
            }
            if !(e0 < gaps[0].0) {
                return Err(Error::validation(
                    "e0 must lie strictly below the first gap",
                ));
            }
        }
        if normalization_gap >= gaps.len() {
            return Err(Error::validation(format!(
                "normalization gap index {normalization_gap} out of range (the set has {} finite gaps)",
                gaps.len()
            )));
        }
        let (a0, b0) = gaps[normalization_gap];
        let xi_star = xi_star.unwrap_or(0.5 * (a0 + b0));
        if !(a0 < xi_star && xi_star < b0) {
            return Err(Error::validation(format!(
                "xi_star = {xi_star} must lie strictly inside the normalization gap ({a0}, {b0})"
            )));
        }
        Ok(GapSet {
            gaps,
            side,
            normalization_gap,
            xi_star,
        })
    }

    /// Parses a configuration in TOML or JSON form.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let raw: RawConfig = match toml::from_str(text) {
            Ok(r) => r,
            Err(toml_err) => serde_json::from_str(text).map_err(|json_err| {
                Error::validation(format!(
                    "configuration is neither valid TOML ({toml_err}) nor valid JSON ({json_err})"
                ))
            })?,
        };
        let side = match raw.side.as_str() {
            "two_sided" => {
                if raw.e0.is_some() {
                    return Err(Error::validation("e0 is only meaningful for side = \"semibounded\""));
                }
                SideMode::TwoSided
            }
            "semibounded" => SideMode::SemiboundedBelow {
                e0: raw
                    .e0
                    .ok_or_else(|| Error::validation("side = \"semibounded\" requires e0"))?,
            },
            other => {
                return Err(Error::validation(format!(
                    "side must be \"two_sided\" or \"semibounded\", got {other:?}"
                )))
            }
        };
        Self::new(
            raw.gaps.iter().map(|g| (g[0], g[1])).collect(),
            side,
            raw.normalization_gap.unwrap_or(0),
            raw.xi_star,
        )
    }

    /// Serializes the set back to canonical TOML.
    pub fn to_config_string(&self) -> String {
        let raw = RawConfig {
            gaps: self.gaps.iter().map(|&(a, b)| [a, b]).collect(),
            side: match self.side {
                SideMode::TwoSided => "two_sided".into(),
                SideMode::SemiboundedBelow { .. } => "semibounded".into(),
            },
            e0: match self.side {
                SideMode::SemiboundedBelow { e0 } => Some(e0),
                SideMode::TwoSided => None,
            },
            xi_star: Some(self.xi_star),
            normalization_gap: Some(self.normalization_gap),
        };
        toml::to_string(&raw).expect("gap set serialization cannot fail")
    }

    /// Number of finite gaps `g`.
    pub fn num_gaps(&self) -> usize {
        self.gaps.len()
    }

    /// Side mode of the set.
    pub fn side(&self) -> SideMode {
        self.side
    }

    /// Natural Martin-function normalization for this side mode.
    pub fn normalization(&self) -> Normalization {
        match self.side {
            SideMode::TwoSided => Normalization::SlopeOneAtInfinity,
            SideMode::SemiboundedBelow { .. } => Normalization::MonicNumerator,
        }
    }

    /// Index of the normalization gap among the finite gaps.
    pub fn normalization_gap(&self) -> usize {
        self.normalization_gap
    }

    /// The base point `ξ⋆` inside the normalization gap.
    pub fn xi_star(&self) -> f64 {
        self.xi_star
    }

    /// The finite gaps, sorted in increasing order.
    pub fn finite_gaps(&self) -> &[(f64, f64)] {
        &self.gaps
    }

    /// All band edges in increasing order.
    ///
    /// Two-sided: `[a_0, b_0, …, a_{g-1}, b_{g-1}]`; semibounded:
    /// `[e0, a_0, b_0, …]`.
    pub fn edges(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(2 * self.gaps.len() + 1);
        if let SideMode::SemiboundedBelow { e0 } = self.side {
            e.push(e0);
        }
        for &(a, b) in &self.gaps {
            e.push(a);
            e.push(b);
        }
        e
    }

    /// The closed bands of `E`, in increasing order.
    pub fn bands(&self) -> Vec<Band> {
        let mut bands = Vec::with_capacity(self.gaps.len() + 1);
        let mut lo = match self.side {
            SideMode::TwoSided => f64::NEG_INFINITY,
            SideMode::SemiboundedBelow { e0 } => e0,
        };
        for &(a, b) in &self.gaps {
            bands.push(Band { lo, hi: a });
            lo = b;
        }
        bands.push(Band {
            lo,
            hi: f64::INFINITY,
        });
        bands
    }

    /// All gaps including, for a semibounded set, the infinite gap `(-∞, e0)`
    /// in the first position.
    pub fn all_gaps(&self) -> Vec<Gap> {
        let mut v = Vec::with_capacity(self.gaps.len() + 1);
        if let SideMode::SemiboundedBelow { e0 } = self.side {
            v.push(Gap {
                lo: f64::NEG_INFINITY,
                hi: e0,
            });
        }
        for &(a, b) in &self.gaps {
            v.push(Gap { lo: a, hi: b });
        }
        v
    }

    /// Rank of the fundamental group of `Ω = ℂ ∖ E`, i.e. the number of
    /// independent generator loops and the dimension of the character torus.
    pub fn rank(&self) -> usize {
        match self.side {
            SideMode::TwoSided => self.gaps.len() - 1,
            SideMode::SemiboundedBelow { .. } => self.gaps.len(),
        }
    }

    /// Number of divisor coordinates (one per gap, including the infinite gap
    /// of a semibounded set); equals `rank() + 1`.
    pub fn num_divisor_points(&self) -> usize {
        self.rank() + 1
    }

    /// Sign `σ` of the square-root branch on the upper side of a gap:
    /// `w(x + i0) = i σ |w(x)|` for `x` in the gap, where `w` is the product
    /// of principal square roots of `(z - e)` over all edges `e`.
    ///
    /// `gap` indexes [`Self::all_gaps`].
    pub fn gap_sigma(&self, gap: usize) -> f64 {
        let g = self.all_gaps()[gap];
        let n_right = self
            .edges()
            .iter()
            .filter(|&&e| e >= g.hi)
            .count();
        // w picks up a factor i per edge to the right; i^n = ±i for odd n.
        debug_assert!(n_right % 2 == 1, "gap must have an odd number of edges to its right");
        if n_right % 4 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Sign of `w(x + i0)` for `x` inside a band (the branch is real there).
    ///
    /// `band` indexes [`Self::bands`].
    pub fn band_sign(&self, band: usize) -> f64 {
        let b = self.bands()[band];
        let n_right = self.edges().iter().filter(|&&e| e >= b.hi).count();
        debug_assert!(n_right % 2 == 0, "band must have an even number of edges to its right");
        if n_right % 4 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Generator data for the fundamental group.
    ///
    /// Generator `γ_k` is attached to each gap `k` other than the
    /// normalization gap (including the infinite gap of a semibounded set).
    /// The loop passes upward through the normalization gap at `ξ⋆` and
    /// downward through gap `k`, so it encircles the bands strictly between
    /// the two gaps, with winding `+1` when gap `k` lies to the left of the
    /// normalization gap and `-1` when it lies to the right.
    pub fn generators(&self) -> Vec<Generator> {
        let all = self.all_gaps();
        let norm_idx = match self.side {
            SideMode::TwoSided => self.normalization_gap,
            SideMode::SemiboundedBelow { .. } => self.normalization_gap + 1,
        };
        let bands = self.bands();
        // Index of the band lying between consecutive gaps i and i+1 of
        // `all_gaps`: the leading infinite gap of a semibounded set shifts the
        // correspondence by one.
        let band_after = |i: usize| match self.side {
            SideMode::TwoSided => i + 1,
            SideMode::SemiboundedBelow { .. } => i,
        };
        let mut gens = Vec::with_capacity(self.rank());
        for (k, gap) in all.iter().enumerate() {
            if k == norm_idx {
                continue;
            }
            let (winding, lo, hi) = if k < norm_idx {
                // Bands strictly between gap k and the normalization gap.
                (1.0, k, norm_idx - 1)
            } else {
                (-1.0, norm_idx, k - 1)
            };
            let group: Vec<usize> = (lo..=hi).map(band_after).collect();
            debug_assert!(group.iter().all(|&m| bands[m].is_compact()));
            gens.push(Generator {
                gap_index: k,
                gap: *gap,
                winding,
                band_group: group,
            });
        }
        gens
    }

    /// Index (into [`Self::bands`]) of the band immediately left of gap `i`
    /// of [`Self::all_gaps`]; `None` for the infinite gap of a semibounded
    /// set, whose left neighbor is the boundary point at infinity.
    pub fn band_left_of_gap(&self, i: usize) -> Option<usize> {
        match self.side {
            SideMode::TwoSided => Some(i),
            SideMode::SemiboundedBelow { .. } => i.checked_sub(1),
        }
    }

    /// Index of the band immediately right of gap `i` of [`Self::all_gaps`].
    pub fn band_right_of_gap(&self, i: usize) -> usize {
        match self.side {
            SideMode::TwoSided => i + 1,
            SideMode::SemiboundedBelow { .. } => i,
        }
    }

    /// Index into [`Self::all_gaps`] of the gap containing `x`, if any.
    pub fn gap_of_point(&self, x: f64) -> Option<usize> {
        self.all_gaps()
            .iter()
            .position(|gap| gap.lo < x && x < gap.hi)
    }

    /// Index of the normalization gap in [`Self::all_gaps`].
    pub fn normalization_gap_in_all(&self) -> usize {
        match self.side {
            SideMode::TwoSided => self.normalization_gap,
            SideMode::SemiboundedBelow { .. } => self.normalization_gap + 1,
        }
    }

    /// Smallest finite gap length; used to pick safe path heights.
    pub fn min_gap_length(&self) -> f64 {
        self.gaps
            .iter()
            .map(|&(a, b)| b - a)
            .fold(f64::INFINITY, f64::min)
    }

    /// True if `x` lies in the open interior of some band.
    pub fn contains_in_band_interior(&self, x: f64) -> bool {
        self.bands()
            .iter()
            .any(|b| b.lo < x && x < b.hi)
    }
}

/// One generator loop of the fundamental group of `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    /// Index of the associated gap in [`GapSet::all_gaps`].
    pub gap_index: usize,
    /// The associated gap.
    pub gap: Gap,
    /// Winding number of the loop around its band group (`+1` or `-1`).
    pub winding: f64,
    /// Indices into [`GapSet::bands`] of the encircled compact bands.
    pub band_group: Vec<usize>,
}
