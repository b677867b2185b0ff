//! The spherical slice transform, the Radon-John transform on ℝⁿ, and the
//! operators linking them.
//!
//! `𝔖f(τ)` is computed by direct quadrature over the cross-section sphere;
//! the factorization `𝔖f = R_{k−1}(Bf)` on the trace ζ = τ ∩ ℝⁿ is checked,
//! never used to evaluate `𝔖`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    random_orthonormal, sample_sphere_cross_section, slice_plane_from_section, Dimensions,
    FlatSpec, SlicePlane,
};
use crate::linalg::{complete_basis, norm_sq, Coords};
use crate::quadrature::{flat_rule, sphere_rule, QuadratureSpec};
use crate::stereo::{nu_coords, nu_inverse, PlanePoint, SpherePoint};

type SphereFn = dyn Fn(&SpherePoint) -> Result<f64> + Send + Sync;
type PlaneFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

/// A scalar function on Sⁿ with metadata.
///
/// `pole_exponent` μ asserts that `(1 − η_{n+1})^μ |f|` is bounded.
#[derive(Clone)]
pub struct SphereField {
    eval: Arc<SphereFn>,
    pub zonal: bool,
    pub pole_exponent: f64,
}

impl fmt::Debug for SphereField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereField")
            .field("zonal", &self.zonal)
            .field("pole_exponent", &self.pole_exponent)
            .finish_non_exhaustive()
    }
}

impl SphereField {
    pub fn new(f: impl Fn(&SpherePoint) -> f64 + Send + Sync + 'static) -> Self {
        Self::try_new(move |p| Ok(f(p)))
    }

    pub fn try_new(f: impl Fn(&SpherePoint) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f), zonal: false, pole_exponent: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c).with_zonal(true)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn with_zonal(mut self, zonal: bool) -> Self {
        self.zonal = zonal;
        self
    }

    pub fn with_pole_exponent(mut self, mu: f64) -> Self {
        self.pole_exponent = mu;
        self
    }

    /// Evaluates and rejects non-finite values.
    pub fn eval(&self, p: &SpherePoint) -> Result<f64> {
        let v = (self.eval)(p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::IntegrandBlowup { value: v, location: format!("{:?}", p.coords()) })
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SphereField, b: f64) -> SphereField {
        let (f, h) = (self.clone(), other.clone());
        Self {
            eval: Arc::new(move |p| Ok(a * f.eval(p)? + b * h.eval(p)?)),
            zonal: self.zonal && other.zonal,
            pole_exponent: self.pole_exponent.max(other.pole_exponent),
        }
    }

    /// `η ↦ f(γ η)` for a linear map γ of ℝ^{n+1} given as a closure.
    pub fn compose(&self, gamma: impl Fn(&[f64]) -> Coords + Send + Sync + 'static) -> SphereField {
        let f = self.clone();
        Self {
            eval: Arc::new(move |p| {
                let q = gamma(p.coords());
                f.eval(&SpherePoint::normalized(q)?)
            }),
            zonal: self.zonal,
            pole_exponent: self.pole_exponent,
        }
    }

    /// Spot-checks the zonal flag: the value must not change under random
    /// rotations about e_{n+1}. Returns the largest deviation seen.
    pub fn zonal_defect(&self, n: usize, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let phi = rng.random_range(0.05..std::f64::consts::PI);
            let a = random_orthonormal(&mut rng, n, 1);
            let b = random_orthonormal(&mut rng, n, 1);
            let fa = self.eval(&SpherePoint::from_polar(&a[0], phi))?;
            let fb = self.eval(&SpherePoint::from_polar(&b[0], phi))?;
            worst = worst.max((fa - fb).abs());
        }
        Ok(worst)
    }
}

/// A scalar function on ℝⁿ; `decay_exponent` λ asserts `|x|^λ |g(x)|` bounded.
#[derive(Clone)]
pub struct PlaneField {
    eval: Arc<PlaneFn>,
    pub decay_exponent: f64,
}

impl fmt::Debug for PlaneField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlaneField")
            .field("decay_exponent", &self.decay_exponent)
            .finish_non_exhaustive()
    }
}

impl PlaneField {
    pub fn new(g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::try_new(move |x| Ok(g(x)))
    }

    pub fn try_new(g: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(g), decay_exponent: 0.0 }
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0).with_decay(f64::INFINITY)
    }

    /// `e^{−|x − c|²/w²}`.
    pub fn gaussian(center: Coords, width: f64) -> Self {
        Self::new(move |x| {
            let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum();
            (-r2 / (width * width)).exp()
        })
        .with_decay(f64::INFINITY)
    }

    pub fn with_decay(mut self, lambda: f64) -> Self {
        self.decay_exponent = lambda;
        self
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = (self.eval)(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::IntegrandBlowup { value: v, location: format!("{x:?}") })
        }
    }

    pub fn eval_point(&self, x: &PlanePoint) -> Result<f64> {
        self.eval(&x.coords)
    }

    /// Checks the decay metadata on probes at |x| = 10 and |x| = 100 along
    /// the coordinate axes: `|x|^λ|g|` must not grow by more than 10×.
    pub fn decay_consistent(&self, n: usize) -> Result<bool> {
        let lambda = self.decay_exponent;
        if lambda.is_infinite() {
            // Rapid decay: values at 100 must be negligible against those at 10.
            let mut near: f64 = 0.0;
            let mut far: f64 = 0.0;
            for axis in 0..n {
                let mut x = crate::linalg::zeros(n);
                x[axis] = 10.0;
                near = near.max(self.eval(&x)?.abs());
                x[axis] = 100.0;
                far = far.max(self.eval(&x)?.abs());
            }
            return Ok(far <= 1e-6 * near.max(1e-300) || far < 1e-200);
        }
        let mut worst_ratio: f64 = 0.0;
        for axis in 0..n {
            let mut x = crate::linalg::zeros(n);
            x[axis] = 10.0;
            let a = 10f64.powf(lambda) * self.eval(&x)?.abs();
            x[axis] = 100.0;
            let b = 100f64.powf(lambda) * self.eval(&x)?.abs();
            if b > 0.0 {
                worst_ratio = worst_ratio.max(b / a.max(1e-300));
            }
        }
        Ok(worst_ratio <= 10.0)
    }
}

fn check_existence(f: &SphereField, dims: Dimensions) {
    let bound = 0.5 * (dims.k as f64 - 1.0);
    if f.pole_exponent >= bound {
        log::warn!(
            "pole exponent {} >= (k-1)/2 = {bound}: slice integrals may diverge",
            f.pole_exponent
        );
    }
}

/// `(𝔖f)(τ ∩ Sⁿ)`: integral of f over the cross-section with its surface
/// measure.
pub fn slice_transform(f: &SphereField, tau: &SlicePlane, spec: &QuadratureSpec) -> Result<f64> {
    check_existence(f, tau.dims());
    let mut total = 0.0;
    for (eta, w) in sample_sphere_cross_section(tau, spec.sphere_order) {
        total += w * f.eval(&eta)?;
    }
    Ok(total)
}

/// `(R_j g)(ζ)`: integral of g over the affine flat ζ.
pub fn radon_john(g: &PlaneField, zeta: &FlatSpec, spec: &QuadratureSpec) -> Result<f64> {
    let rule = flat_rule(zeta, spec);
    let mut total = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        total += w * g.eval(x)?;
    }
    Ok(total)
}

/// `(Bf)(x) = 2^{k−1} (f∘ν)(x) / (|x|² + 1)^{k−1}`.
pub fn op_b(f: &SphereField, dims: Dimensions) -> PlaneField {
    let f = f.clone();
    let m = dims.k as i32 - 1;
    let lambda = 2.0 * m as f64 - 2.0 * f.pole_exponent;
    PlaneField::try_new(move |x| {
        let w = (2.0 / (norm_sq(x) + 1.0)).powi(m);
        if w == 0.0 {
            return Ok(0.0);
        }
        Ok(w * f.eval(&nu_coords(x))?)
    })
    .with_decay(lambda)
}

/// `(B⁻¹g)(η) = (1 − η_{n+1})^{1−k} (g∘ν⁻¹)(η)`; fails at the pole.
pub fn op_b_inverse(g: &PlaneField, dims: Dimensions) -> SphereField {
    let g = g.clone();
    let m = dims.k as i32 - 1;
    let mu = m as f64 - 0.5 * g.decay_exponent;
    SphereField::try_new(move |eta| {
        let x = nu_inverse(eta)?;
        Ok(eta.gap().powi(-m) * g.eval(&x.coords)?)
    })
    .with_pole_exponent(mu)
}

/// A⁻¹ on planes: τ ↦ ζ = τ ∩ ℝⁿ.
pub fn trace_of(tau: &SlicePlane) -> FlatSpec {
    tau.section().clone()
}

/// A on planes: ζ ↦ τ = span(ζ ∪ {N}).
pub fn plane_of_trace(zeta: &FlatSpec) -> SlicePlane {
    slice_plane_from_section(zeta.clone())
}

/// Both sides of `𝔖f(τ) = R_{k−1}(Bf)(τ ∩ ℝⁿ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
}

impl FactorCheck {
    /// `|lhs − rhs| / (1 + |lhs|)`.
    pub fn rel_diff(&self) -> f64 {
        self.abs_diff / (1.0 + self.lhs.abs())
    }
}

pub fn factorization_check(f: &SphereField, tau: &SlicePlane, spec: &QuadratureSpec) -> Result<FactorCheck> {
    let lhs = slice_transform(f, tau, spec)?;
    let g = op_b(f, tau.dims());
    let rhs = radon_john(&g, tau.section(), spec)?;
    Ok(FactorCheck { lhs, rhs, abs_diff: (lhs - rhs).abs() })
}

/// A weighted family of linear j-subspaces of ℝⁿ approximating the Haar
/// probability measure on G_{n,j}. Each entry also carries an orthonormal
/// basis of the orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationRule {
    pub bases: Vec<Vec<Coords>>,
    pub complements: Vec<Vec<Coords>>,
    pub weights: Vec<f64>,
}

impl OrientationRule {
    /// * n = 2: equispaced angles with a seeded sub-step shift.
    /// * j = 1 or j = n − 1: a product rule on S^{n−1} for the direction (or
    ///   normal), rotated by a seeded Haar rotation.
    /// * otherwise: a seeded, shifted Halton sequence pushed through the
    ///   Gaussian inverse CDF and orthonormalized.
    pub fn new(n: usize, j: usize, samples: usize, seed: u64) -> Result<Self> {
        if j == 0 || j >= n {
            return Err(Error::InvalidDimensions(format!("no proper {j}-subspaces of ℝ^{n}")));
        }
        let samples = samples.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut frames: Vec<Vec<Coords>> = Vec::with_capacity(samples);
        let mut weights: Vec<f64>;
        if n == 2 {
            let shift: f64 = rng.random();
            for i in 0..samples {
                let a = std::f64::consts::PI * (i as f64 + shift) / samples as f64;
                frames.push(vec![
                    Coords::from_slice(&[a.cos(), a.sin()]),
                    Coords::from_slice(&[-a.sin(), a.cos()]),
                ]);
            }
            weights = vec![1.0 / samples as f64; samples];
        } else if j == 1 || j == n - 1 {
            let d = n - 1;
            let order = ((samples as f64 / 2.0).powf(1.0 / d as f64).round() as usize).max(1);
            let rule = sphere_rule(d, order);
            let rot = random_orthonormal(&mut rng, n, n);
            let total = rule.total_weight();
            weights = Vec::with_capacity(rule.len());
            for (u, w) in rule.nodes.iter().zip(&rule.weights) {
                let mut dir = crate::linalg::zeros(n);
                for (ui, r) in u.iter().zip(&rot) {
                    crate::linalg::axpy(*ui, r, &mut dir);
                }
                let full = complete_basis(&[dir], n);
                let frame = if j == 1 {
                    full
                } else {
                    let mut f = full[1..].to_vec();
                    f.push(full[0].clone());
                    f
                };
                frames.push(frame);
                weights.push(w / total);
            }
        } else {
            let dim = n * j;
            let primes = first_primes(dim);
            let shift: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let mut i = 1u64;
            while frames.len() < samples {
                let z: Vec<f64> = (0..dim)
                    .map(|c| {
                        let u = (radical_inverse(i, primes[c]) + shift[c]).fract();
                        let u = u.clamp(1e-12, 1.0 - 1e-12);
                        std::f64::consts::SQRT_2 * statrs::function::erf::erf_inv(2.0 * u - 1.0)
                    })
                    .collect();
                i += 1;
                let vs: Vec<Coords> = z.chunks(n).map(Coords::from_slice).collect();
                if let Ok(q) = crate::linalg::orthonormalize(&vs) {
                    frames.push(complete_basis(&q, n));
                }
            }
            weights = vec![1.0 / samples as f64; samples];
        }
        let (bases, complements) = frames
            .into_iter()
            .map(|f| (f[..j].to_vec(), f[j..].to_vec()))
            .unzip();
        Ok(Self { bases, complements, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The i-th orientation translated through `x`.
    pub fn flat_through(&self, i: usize, x: &[f64]) -> FlatSpec {
        let mut offset: Coords = crate::linalg::zeros(x.len());
        for c in &self.complements[i] {
            crate::linalg::axpy(crate::linalg::dot(x, c), c, &mut offset);
        }
        FlatSpec::from_orthonormal(self.bases[i].clone(), offset)
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// `(R*φ)(x)`: average of φ over the flats of dimension k − 1 through x.
pub fn dual_transform(
    phi: &(dyn Fn(&FlatSpec) -> Result<f64> + Sync),
    x: &PlanePoint,
    dims: Dimensions,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let rule = OrientationRule::new(dims.n, dims.flat_dim(), spec.orientation_samples, spec.seed)?;
    dual_transform_with(phi, &x.coords, &rule)
}

pub fn dual_transform_with(
    phi: &(dyn Fn(&FlatSpec) -> Result<f64> + Sync),
    x: &[f64],
    rule: &OrientationRule,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, w) in rule.weights.iter().enumerate() {
        total += w * phi(&rule.flat_through(i, x))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_flat, random_slice_plane, slice_plane_at_distance};
    use crate::quadrature::RadialMap;
    use smallvec::smallvec;
    use std::f64::consts::PI;

    fn d(n: usize, k: usize) -> Dimensions {
        Dimensions::new(n, k).unwrap()
    }

    /// Independent quadrature over an explicit circle parameterization.
    fn circle_oracle(f: impl Fn(&[f64]) -> f64, center: &[f64], e1: &[f64], e2: &[f64], r: f64) -> f64 {
        let m = 4000;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|i| {
                let a = i as f64 * h;
                let p: Vec<f64> = (0..center.len())
                    .map(|c| center[c] + r * (a.cos() * e1[c] + a.sin() * e2[c]))
                    .collect();
                f(&p) * r * h
            })
            .sum()
    }

    #[test]
    fn slice_of_constant() {
        let spec = QuadratureSpec::default();
        let tau = slice_plane_at_distance(&[smallvec![1.0, 0.0]], &smallvec![0.0, 1.0], 0.6, d(2, 2)).unwrap();
        let v = slice_transform(&SphereField::constant(1.0), &tau, &spec).unwrap();
        assert!((v - 2.0 * PI * 0.8).abs() < 1e-12);
        assert!((v - 5.026548).abs() < 1e-6);
        let tau = plane_of_trace(
            &make_flat(&[smallvec![1.0, 0.0, 0.0], smallvec![0.0, 1.0, 0.0]], &smallvec![0.0, 0.0, 0.0], d(3, 3)).unwrap(),
        );
        let v = slice_transform(&SphereField::constant(1.0), &tau, &spec).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn slice_of_last_coordinate_matches_circle_oracle() {
        // n = 2, k = 2, dist = 0: the great circle through N and the origin
        // spanned by e₁ and e₃.
        let spec = QuadratureSpec::default();
        let tau = plane_of_trace(&make_flat(&[smallvec![1.0, 0.0]], &smallvec![0.0, 0.0], d(2, 2)).unwrap());
        let f = SphereField::new(|p| p.eta_last() + p.eta_last().powi(2));
        let v = slice_transform(&f, &tau, &spec).unwrap();
        let oracle = circle_oracle(|p| p[2] + p[2] * p[2], &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], 1.0);
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
        assert!((v - PI).abs() < 1e-10);
    }

    #[test]
    fn blowup_is_reported() {
        let spec = QuadratureSpec { sphere_order: 8, ..Default::default() };
        let tau = plane_of_trace(&make_flat(&[smallvec![1.0, 0.0]], &smallvec![0.0, 0.0], d(2, 2)).unwrap());
        let f = SphereField::new(|p| 1.0 / p.coords()[0]);
        let f = f.combine(0.0, &SphereField::new(|_| f64::NAN), 1.0);
        assert!(matches!(slice_transform(&f, &tau, &spec), Err(Error::IntegrandBlowup { .. })));
    }

    #[test]
    fn radon_gaussian() {
        let spec = QuadratureSpec::default();
        let g = PlaneField::gaussian(smallvec![0.0, 0.0, 0.0], 1.0);
        for dist in [0.0, 0.5, 1.0, 2.0] {
            let line = make_flat(&[smallvec![0.0, 0.0, 1.0]], &smallvec![dist, 0.0, 0.0], d(3, 2)).unwrap();
            let v = radon_john(&g, &line, &spec).unwrap();
            assert!((v - PI.sqrt() * (-dist * dist).exp()).abs() < 1e-10);
            let plane = make_flat(&[smallvec![0.0, 1.0, 0.0], smallvec![0.0, 0.0, 1.0]], &smallvec![dist, 0.0, 0.0], d(3, 3)).unwrap();
            let v = radon_john(&g, &plane, &spec).unwrap();
            assert!((v - PI * (-dist * dist).exp()).abs() < 1e-10);
        }
        let line = make_flat(&[smallvec![0.0, 0.0, 1.0]], &smallvec![1.0, 0.0, 0.0], d(3, 2)).unwrap();
        assert_eq!(radon_john(&PlaneField::zero(), &line, &spec).unwrap(), 0.0);
    }

    #[test]
    fn op_b_examples() {
        let one = SphereField::constant(1.0);
        let g = op_b(&one, d(2, 2));
        assert_eq!(g.eval(&[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(g.eval(&[1.0, 0.0]).unwrap(), 1.0);
        let g = op_b(&one, d(3, 3));
        assert!((g.eval(&[3.0, 0.0, 0.0]).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(g.decay_exponent, 4.0);
    }

    #[test]
    fn op_b_inverse_examples() {
        let dims = d(2, 2);
        let one = PlaneField::new(|_| 1.0);
        let f = op_b_inverse(&one, dims);
        let south = SpherePoint::new(smallvec![0.0, 0.0, -1.0]).unwrap();
        assert_eq!(f.eval(&south).unwrap(), 0.5);
        let north = SpherePoint::new(smallvec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.eval(&north), Err(Error::PoleSingularity));

        let g = PlaneField::new(|x| 2.0 / (1.0 + norm_sq(x)));
        let f = op_b_inverse(&g, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = SphereField::new(|p| p.coords()[0]);
        let round = op_b_inverse(&op_b(&h, dims), dims);
        for _ in 0..100 {
            let v = random_orthonormal(&mut rng, 3, 1).pop().unwrap();
            let p = SpherePoint::new(v).unwrap();
            if p.gap() < 1e-6 {
                continue;
            }
            assert!((f.eval(&p).unwrap() - 1.0).abs() < 1e-12);
            assert!((round.eval(&p).unwrap() - h.eval(&p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_correspondence_examples() {
        let dims = d(2, 2);
        let tau = slice_plane_at_distance(&[smallvec![1.0, 0.0]], &smallvec![0.0, 1.0], 0.5f64.sqrt(), dims).unwrap();
        assert!((trace_of(&tau).distance() - 1.0).abs() < 1e-14);
        let zeta = make_flat(&[smallvec![1.0, 0.0]], &smallvec![0.0, 3.0], dims).unwrap();
        assert!((plane_of_trace(&zeta).dist - 3.0 / 10f64.sqrt()).abs() < 1e-15);
        let zeta = make_flat(&[smallvec![1.0, 0.0]], &smallvec![0.0, 0.0], dims).unwrap();
        assert_eq!(plane_of_trace(&zeta).dist, 0.0);
        assert_eq!(trace_of(&plane_of_trace(&zeta)), zeta);
    }

    #[test]
    fn factorization_examples() {
        let spec = QuadratureSpec { radial_map: RadialMap::Tangent, ..Default::default() };
        let tau = slice_plane_at_distance(&[smallvec![1.0, 0.0]], &smallvec![0.0, 1.0], 0.6, d(2, 2)).unwrap();
        let c = factorization_check(&SphereField::constant(1.0), &tau, &spec).unwrap();
        assert!((c.lhs - 5.026548).abs() < 1e-6);
        assert!(c.abs_diff < 1e-8, "{c:?}");

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let odd = SphereField::new(|p| p.coords()[0]);
        for dims in [d(2, 2), d(3, 2), d(3, 3)] {
            for _ in 0..10 {
                let tau = random_slice_plane(&mut rng, dims, 0.01);
                let c = factorization_check(&odd, &tau, &spec).unwrap();
                assert!(c.abs_diff < 1e-6, "{dims:?} {c:?}");
            }
        }
    }

    #[test]
    fn linearity() {
        let spec = QuadratureSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = SphereField::new(|p| p.coords()[0] * p.coords()[1]);
        let h = SphereField::new(|p| (p.eta_last() * 3.0).cos());
        let fh = f.combine(2.5, &h, -0.75);
        for _ in 0..10 {
            let tau = random_slice_plane(&mut rng, d(3, 3), 0.01);
            let a = slice_transform(&f, &tau, &spec).unwrap();
            let b = slice_transform(&h, &tau, &spec).unwrap();
            let c = slice_transform(&fh, &tau, &spec).unwrap();
            assert!((c - (2.5 * a - 0.75 * b)).abs() < 1e-10);
        }
    }

    #[test]
    fn rotation_equivariance_about_pole_axis() {
        let spec = QuadratureSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dims = d(3, 2);
        let f = SphereField::new(|p| (p.coords()[0] + 2.0 * p.coords()[1] - p.eta_last()).exp());
        for _ in 0..10 {
            let rot = random_orthonormal(&mut rng, 3, 3);
            let rot2 = rot.clone();
            // γ acts on the first n coordinates, fixing e_{n+1}.
            let gamma = move |p: &[f64]| -> Coords {
                let mut out: Coords = (0..3).map(|i| (0..3).map(|j| rot2[j][i] * p[j]).sum()).collect();
                out.push(p[3]);
                out
            };
            let tau = random_slice_plane(&mut rng, dims, 0.01);
            let lhs = slice_transform(&f.compose(gamma), &tau, &spec).unwrap();
            // γτ: rotate the trace.
            let apply = |v: &[f64]| -> Coords { (0..3).map(|i| (0..3).map(|j| rot[j][i] * v[j]).sum()).collect() };
            let basis: Vec<Coords> = tau.section().basis().iter().map(|b| apply(b)).collect();
            let moved = plane_of_trace(&FlatSpec::new(&basis, &apply(tau.section().offset())).unwrap());
            let rhs = slice_transform(&f, &moved, &spec).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn dual_examples() {
        let dims = d(2, 2);
        let spec = QuadratureSpec::default();
        let x = PlanePoint::new(smallvec![0.3, -0.2]).unwrap();
        assert!((dual_transform(&|_| Ok(1.0), &x, dims, &spec).unwrap() - 1.0).abs() < 1e-14);
        let origin = PlanePoint::new(smallvec![0.0, 0.0]).unwrap();
        assert!(dual_transform(&|z| Ok(z.distance()), &origin, dims, &spec).unwrap().abs() < 1e-15);
        let g = PlaneField::gaussian(smallvec![0.0, 0.0], 1.0);
        let v = dual_transform(&|z| radon_john(&g, z, &spec), &origin, dims, &spec).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn orientation_rules_are_normalized_and_uniform() {
        for (n, j) in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 1)] {
            let rule = OrientationRule::new(n, j, 200, 1).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            // E[P_ζ₀] = (j/n) I: check the (0,0) entry.
            let e: f64 = rule
                .bases
                .iter()
                .zip(&rule.weights)
                .map(|(b, w)| w * b.iter().map(|v| v[0] * v[0]).sum::<f64>())
                .sum();
            assert!((e - j as f64 / n as f64).abs() < 0.03, "{n} {j} {e}");
        }
        assert!(OrientationRule::new(3, 3, 10, 0).is_err());
    }

    #[test]
    fn decay_metadata() {
        assert!(PlaneField::gaussian(smallvec![0.0, 0.0], 1.0).decay_consistent(2).unwrap());
        let g = op_b(&SphereField::constant(1.0), d(3, 2));
        assert!(g.decay_consistent(3).unwrap());
        let lying = PlaneField::new(|x| 1.0 / (1.0 + norm_sq(x))).with_decay(4.0);
        assert!(!lying.decay_consistent(2).unwrap());
    }

    #[test]
    fn zonal_flag_spot_check() {
        let f = SphereField::new(|p| (-p.gap()).exp()).with_zonal(true);
        assert!(f.zonal_defect(3, 100, 0).unwrap() < 1e-12);
        let g = SphereField::new(|p| p.coords()[0]);
        assert!(g.zonal_defect(3, 100, 0).unwrap() > 1e-3);
    }
}
