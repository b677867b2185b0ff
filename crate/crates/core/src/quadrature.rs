//! Quadrature engines: Gauss-Legendre on intervals, product rules on unit
//! spheres, and polar rules on affine flats.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::geometry::FlatSpec;
use crate::linalg::{axpy, Coords};

/// How the radial coordinate of a flat is discretized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialMap {
    /// Gauss-Legendre on `[0, radial_cutoff]`; the tail is dropped.
    Truncated,
    /// `ρ = a·tan ϑ`, `ϑ ∈ [0, π/2)`, with `a = √(1 + |v|²)` for a flat at
    /// offset `v`. Exact on the whole flat; suited to algebraically
    /// decaying integrands.
    Tangent,
}

/// Every discretization choice in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    /// Nodes per angular dimension (the azimuth uses twice as many).
    pub sphere_order: usize,
    /// Radial nodes on flats.
    pub radial_order: usize,
    /// Truncation radius R for [`RadialMap::Truncated`].
    pub radial_cutoff: f64,
    pub radial_map: RadialMap,
    /// Innermost hypersingular cutoff ε (Richardson uses ε, ε/2, ε/4).
    pub hs_epsilon: f64,
    /// Outer truncation of the hypersingular integral.
    pub hs_outer: f64,
    pub hs_radial_order: usize,
    pub hs_angular_order: usize,
    /// Orientations used to average over flats through a point.
    pub orientation_samples: usize,
    /// Offset-lattice spacing of the memoized dual transform.
    pub dual_cache_spacing: f64,
    /// Half-width of the tabulated offset range; 0 lets the caller choose.
    pub dual_cache_extent: f64,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            sphere_order: 64,
            radial_order: 128,
            radial_cutoff: 40.0,
            radial_map: RadialMap::Tangent,
            hs_epsilon: 0.1,
            hs_outer: 30.0,
            hs_radial_order: 64,
            hs_angular_order: 32,
            orientation_samples: 256,
            dual_cache_spacing: 0.01,
            dual_cache_extent: 0.0,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("sphere_order", self.sphere_order),
            ("radial_order", self.radial_order),
            ("hs_radial_order", self.hs_radial_order),
            ("hs_angular_order", self.hs_angular_order),
            ("orientation_samples", self.orientation_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if !(self.radial_cutoff >= 1.0) {
            return Err(Error::InvalidParameter("radial cutoff R must be >= 1".into()));
        }
        if !(self.hs_epsilon > 0.0 && self.hs_epsilon < self.hs_outer) {
            return Err(Error::InvalidParameter(
                "hypersingular cutoffs need 0 < eps < outer".into(),
            ));
        }
        if !(self.dual_cache_extent >= 0.0) {
            return Err(Error::InvalidParameter("dual cache extent must be >= 0".into()));
        }
        if !(self.dual_cache_spacing > 0.0) {
            return Err(Error::InvalidParameter("dual cache spacing must be positive".into()));
        }
        Ok(())
    }
}

/// Nodes and weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn reference_cache() -> &'static RwLock<HashMap<usize, Arc<Rule1D>>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<Rule1D>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Gauss-Legendre rule on [−1, 1], memoized per order.
pub fn gauss_legendre_reference(order: usize) -> Arc<Rule1D> {
    if let Some(r) = reference_cache().read().unwrap().get(&order) {
        return r.clone();
    }
    let rule = Arc::new(legendre_newton(order));
    reference_cache()
        .write()
        .unwrap()
        .entry(order)
        .or_insert(rule)
        .clone()
}

fn legendre_newton(order: usize) -> Rule1D {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule1D { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule with `order` nodes on `[a, b]`; exact for
/// polynomials of degree `2·order − 1`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<Rule1D> {
    if order == 0 {
        return Err(Error::InvalidParameter("quadrature order must be >= 1".into()));
    }
    if !(a < b) {
        return Err(Error::InvalidParameter(format!("empty interval [{a}, {b}]")));
    }
    let r = gauss_legendre_reference(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(Rule1D {
        nodes: r.nodes.iter().map(|x| mid + half * x).collect(),
        weights: r.weights.iter().map(|w| half * w).collect(),
    })
}

/// Nodes on the unit sphere S^d ⊂ ℝ^{d+1} with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub dim: usize,
    pub nodes: Vec<Coords>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Area σ_d = 2π^{(d+1)/2}/Γ((d+1)/2) of the unit sphere S^d.
pub fn sphere_area(d: usize) -> f64 {
    // σ_d = 2π σ_{d−2} / (d − 1), exact to rounding unlike a Γ evaluation.
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(d - 2) / (d as f64 - 1.0),
    }
}

/// Product rule on S^d.
///
/// * `d = 0`: the two points ±1.
/// * `d = 1`: `2·order` equispaced azimuths at half-step offset (no node at
///   (1, 0) or on the axes when `order` is even).
/// * `d = 2`: Gauss-Legendre in the cosine of the polar angle times the circle.
/// * `d ≥ 3`: Gauss-Legendre in the polar angle with weight `sin^{d−1}` times
///   S^{d−1}.
///
/// The last coordinate carries the polar direction. Every rule is symmetric
/// under the antipodal map.
pub fn sphere_rule(d: usize, order: usize) -> SphereRule {
    let order = order.max(1);
    match d {
        0 => SphereRule {
            dim: 0,
            nodes: vec![Coords::from_slice(&[-1.0]), Coords::from_slice(&[1.0])],
            weights: vec![1.0, 1.0],
        },
        1 => {
            let m = 2 * order;
            let step = 2.0 * PI / m as f64;
            let nodes = (0..m)
                .map(|j| {
                    let a = (j as f64 + 0.5) * step;
                    Coords::from_slice(&[a.cos(), a.sin()])
                })
                .collect();
            SphereRule { dim: 1, nodes, weights: vec![step; m] }
        }
        _ => {
            let lower = sphere_rule(d - 1, order);
            let gl = gauss_legendre_reference(order);
            let mut nodes = Vec::with_capacity(order * lower.len());
            let mut weights = Vec::with_capacity(order * lower.len());
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                let (cos_t, sin_t, wt) = if d == 2 {
                    (x, (1.0 - x * x).sqrt(), w)
                } else {
                    let theta = FRAC_PI_2 * (x + 1.0);
                    let s = theta.sin();
                    (theta.cos(), s, w * FRAC_PI_2 * s.powi(d as i32 - 1))
                };
                for (p, &pw) in lower.nodes.iter().zip(&lower.weights) {
                    let mut c: Coords = p.iter().map(|v| v * sin_t).collect();
                    c.push(cos_t);
                    nodes.push(c);
                    weights.push(wt * pw);
                }
            }
            SphereRule { dim: d, nodes, weights }
        }
    }
}

/// Radial nodes ρ with weights including the Jacobian `ρ^{dim−1}`.
pub fn radial_rule(dim: usize, scale: f64, spec: &QuadratureSpec) -> Rule1D {
    let gl = gauss_legendre_reference(spec.radial_order);
    let p = dim as i32 - 1;
    let (nodes, weights) = match spec.radial_map {
        RadialMap::Truncated => {
            let half = 0.5 * spec.radial_cutoff;
            gl.nodes
                .iter()
                .zip(&gl.weights)
                .map(|(x, w)| {
                    let r = half * (x + 1.0);
                    (r, half * w * r.powi(p))
                })
                .unzip()
        }
        RadialMap::Tangent => gl
            .nodes
            .iter()
            .zip(&gl.weights)
            .map(|(x, w)| {
                let th = FRAC_PI_2 * 0.5 * (x + 1.0);
                let c = th.cos();
                let r = scale * th.sin() / c;
                (r, FRAC_PI_2 * 0.5 * w * scale / (c * c) * r.powi(p))
            })
            .unzip(),
    };
    Rule1D { nodes, weights }
}

/// Nodes on an affine flat, in the flat's intrinsic polar coordinates about
/// its closest point to the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRule {
    pub nodes: Vec<Coords>,
    pub weights: Vec<f64>,
}

impl FlatRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn flat_rule(zeta: &FlatSpec, spec: &QuadratureSpec) -> FlatRule {
    let j = zeta.flat_dim();
    let scale = (1.0 + zeta.distance().powi(2)).sqrt();
    let radial = radial_rule(j, scale, spec);
    let angular = sphere_rule(j - 1, spec.sphere_order);
    let mut nodes = Vec::with_capacity(radial.len() * angular.len());
    let mut weights = Vec::with_capacity(radial.len() * angular.len());
    for (&r, &rw) in radial.nodes.iter().zip(&radial.weights) {
        for (sig, &sw) in angular.nodes.iter().zip(&angular.weights) {
            let mut x = zeta.offset().clone();
            for (si, b) in sig.iter().zip(zeta.basis()) {
                axpy(r * si, b, &mut x);
            }
            nodes.push(x);
            weights.push(rw * sw);
        }
    }
    FlatRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_flat, Dimensions};
    use approx::assert_relative_eq;
    use smallvec::smallvec;

    #[test]
    fn one_point_rule() {
        let r = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert_relative_eq!(r.weights[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        let r = gauss_legendre(2, -1.0, 1.0).unwrap();
        assert_relative_eq!(r.integrate(|x| x * x), 2.0 / 3.0, epsilon = 1e-15);
        for order in [3, 7, 20, 64, 200] {
            let r = gauss_legendre(order, 0.0, 2.0).unwrap();
            let deg = 2 * order - 1;
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert_relative_eq!(r.integrate(|x| x.powi(deg as i32)), exact, max_relative = 1e-12);
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn gaussian_half_line() {
        let r = gauss_legendre(64, 0.0, 8.0).unwrap();
        let v = r.integrate(|s| (-s * s).exp() * s);
        assert!((v - 0.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn bad_inputs() {
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn sphere_totals() {
        for d in 0..=4 {
            let r = sphere_rule(d, 12);
            assert_relative_eq!(r.total_weight(), sphere_area(d), max_relative = 1e-12);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for p in &r.nodes {
                assert!((crate::linalg::norm(p) - 1.0).abs() < 1e-14);
            }
        }
        assert_relative_eq!(sphere_area(1), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(2), 4.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn sphere_second_moment() {
        let r = sphere_rule(2, 64);
        let v: f64 = r.nodes.iter().zip(&r.weights).map(|(p, w)| w * p[2] * p[2]).sum();
        assert_relative_eq!(v, 4.0 * PI / 3.0, max_relative = 1e-13);
        // Degree sphere_order polynomial: ∫ x⁴y²z⁰... use x²y²z² = 4π/105.
        let v: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * (p[0] * p[1] * p[2]).powi(2))
            .sum();
        assert_relative_eq!(v, 4.0 * PI / 105.0, max_relative = 1e-12);
        // S³: ∫ x₄² = σ₃/4 = π²/2.
        let r3 = sphere_rule(3, 24);
        let v: f64 = r3.nodes.iter().zip(&r3.weights).map(|(p, w)| w * p[3] * p[3]).sum();
        assert_relative_eq!(v, PI * PI / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn antipodal_symmetry() {
        for d in 1..=3 {
            let r = sphere_rule(d, 8);
            for p in &r.nodes {
                let q: Coords = p.iter().map(|x| -x).collect();
                assert!(r
                    .nodes
                    .iter()
                    .any(|s| s.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-13)));
            }
        }
    }

    #[test]
    fn flat_gaussians() {
        let dims = Dimensions::new(2, 2).unwrap();
        let spec = QuadratureSpec { radial_cutoff: 8.0, radial_map: RadialMap::Truncated, ..Default::default() };
        let line0 = make_flat(&[smallvec![1.0, 0.0]], &smallvec![0.0, 0.0], dims).unwrap();
        let r = flat_rule(&line0, &spec);
        let v: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * (-crate::linalg::norm_sq(x)).exp())
            .sum();
        assert!((v - PI.sqrt()).abs() < 1e-10);
        let line1 = make_flat(&[smallvec![1.0, 0.0]], &smallvec![0.0, 1.0], dims).unwrap();
        let r = flat_rule(&line1, &spec);
        let v: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * (-crate::linalg::norm_sq(x)).exp())
            .sum();
        assert!((v - PI.sqrt() * (-1.0f64).exp()).abs() < 1e-10);
        for x in &r.nodes {
            assert!((x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disc_area_and_tangent_map() {
        let dims = Dimensions::new(3, 3).unwrap();
        let plane = make_flat(
            &[smallvec![1.0, 0.0, 0.0], smallvec![0.0, 1.0, 0.0]],
            &smallvec![0.0, 0.0, 2.0],
            dims,
        )
        .unwrap();
        let spec = QuadratureSpec {
            radial_cutoff: 5.0,
            sphere_order: 8,
            radial_order: 8,
            radial_map: RadialMap::Truncated,
            ..Default::default()
        };
        let r = flat_rule(&plane, &spec);
        let area: f64 = r.weights.iter().sum();
        assert_relative_eq!(area, PI * 25.0, max_relative = 1e-13);
        // ∫_{ℝ²} (1+|x|²)^{-2} over the plane at height 2: 2π∫ρ(5+ρ²)^{-2}dρ = π/5.
        let spec = QuadratureSpec { radial_map: RadialMap::Tangent, ..Default::default() };
        let r = flat_rule(&plane, &spec);
        let v: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * (1.0 + crate::linalg::norm_sq(x)).powi(-2))
            .sum();
        assert_relative_eq!(v, PI / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let bad = QuadratureSpec { hs_epsilon: 40.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureSpec { radial_cutoff: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
