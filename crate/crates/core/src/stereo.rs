//! Stereographic projection from the north pole N = e_{n+1} and the
//! measure-change weights between Sⁿ and ℝⁿ.
//!
//! Points on the sphere carry their *polar gap* `1 − η_{n+1}` alongside the
//! coordinates. Near N the gap cannot be recovered from `η_{n+1}` in double
//! precision, and every weight used here is a power of it.

use crate::error::{Error, Result};
use crate::linalg::{norm, norm_sq, Coords};

/// Guard on `1 − η_{n+1}` below which inverse projection refuses to run.
pub const POLE_GUARD: f64 = 1e-15;

/// A point on the unit sphere Sⁿ ⊂ ℝ^{n+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Coords,
    gap: f64,
}

impl SpherePoint {
    /// Builds a point from unit coordinates; the gap is computed stably
    /// as `|η'|²/(1 + η_{n+1})` in the northern hemisphere.
    pub fn new(coords: Coords) -> Result<Self> {
        let len = norm(&coords);
        if coords.len() < 2 {
            return Err(Error::InvalidDimensions(format!(
                "sphere point needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "sphere point has norm {len}, expected 1"
            )));
        }
        let gap = stable_gap(&coords);
        Ok(Self { coords, gap })
    }

    /// Trusted constructor for points generated by exact parameterizations.
    pub(crate) fn with_gap(coords: Coords, gap: f64) -> Self {
        Self { coords, gap }
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalized(mut coords: Coords) -> Result<Self> {
        let len = norm(&coords);
        if !(len > 0.0) {
            return Err(Error::InvalidParameter("zero vector".into()));
        }
        for c in coords.iter_mut() {
            *c /= len;
        }
        let gap = stable_gap(&coords);
        Ok(Self { coords, gap })
    }

    /// Point `ω sin φ + e_{n+1} cos φ` for a unit `omega ∈ S^{n-1}`.
    pub fn from_polar(omega: &[f64], phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let mut coords: Coords = omega.iter().map(|w| w * s).collect();
        coords.push(c);
        let half = (0.5 * phi).sin();
        Self { coords, gap: 2.0 * half * half }
    }

    /// Point `ω √(w(2−w)) + e_{n+1}(1 − w)` at polar gap `w ∈ [0, 2]`.
    pub fn from_gap(omega: &[f64], w: f64) -> Self {
        let s = (w * (2.0 - w)).max(0.0).sqrt();
        let mut coords: Coords = omega.iter().map(|o| o * s).collect();
        coords.push(1.0 - w);
        Self { coords, gap: w }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Coords {
        self.coords
    }

    /// Ambient dimension n + 1.
    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn eta_last(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// `1 − η_{n+1}`, accurate near the north pole.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Polar angle φ with `η_{n+1} = cos φ`.
    pub fn polar_angle(&self) -> f64 {
        2.0 * (0.5 * self.gap).sqrt().min(1.0).asin()
    }
}

fn stable_gap(coords: &[f64]) -> f64 {
    let last = coords[coords.len() - 1];
    if last > 0.0 {
        norm_sq(&coords[..coords.len() - 1]) / (1.0 + last)
    } else {
        1.0 - last
    }
}

/// A point of ℝⁿ, the equatorial hyperplane of ℝ^{n+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePoint {
    pub coords: Coords,
}

impl PlanePoint {
    pub fn new(coords: Coords) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite plane point".into()));
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }
}

/// ν(x) = (2x + (|x|² − 1) e_{n+1}) / (|x|² + 1).
pub fn nu(x: &PlanePoint) -> SpherePoint {
    nu_coords(&x.coords)
}

pub(crate) fn nu_coords(x: &[f64]) -> SpherePoint {
    let s2 = norm_sq(x);
    let denom = s2 + 1.0;
    let mut coords: Coords = x.iter().map(|xi| 2.0 * xi / denom).collect();
    coords.push((s2 - 1.0) / denom);
    SpherePoint::with_gap(coords, 2.0 / denom)
}

/// Stereographic projection ν⁻¹ from N; `|ν⁻¹(η)| = cot(φ/2)`.
pub fn nu_inverse(eta: &SpherePoint) -> Result<PlanePoint> {
    let gap = eta.gap();
    if gap < POLE_GUARD {
        return Err(Error::PoleSingularity);
    }
    let n = eta.ambient_dim() - 1;
    let coords = eta.coords()[..n].iter().map(|c| c / gap).collect();
    Ok(PlanePoint { coords })
}

/// `2^m (|x|² + 1)^{−m}`: the density of the sphere measure pulled back by ν.
pub fn sphere_to_plane_weight(x: &PlanePoint, m: i32) -> f64 {
    (2.0 / (norm_sq(&x.coords) + 1.0)).powi(m)
}

/// `(1 − η_{n+1})^{−m}`: the density of Lebesgue measure pushed forward by ν.
pub fn plane_to_sphere_weight(eta: &SpherePoint, m: i32) -> Result<f64> {
    let gap = eta.gap();
    if gap < POLE_GUARD {
        return Err(Error::PoleSingularity);
    }
    Ok(gap.powi(-m))
}
