//! Plane manifolds: affine (k−1)-flats ζ ⊂ ℝⁿ and the k-planes τ ⊂ ℝ^{n+1}
//! through the north pole that they determine.
//!
//! A slice plane is stored by its trace ζ = τ ∩ ℝⁿ = ζ₀ + v. Writing
//! t = |v|, the plane τ is the affine span of ζ ∪ {N}; its distance to the
//! origin is `t/√(1+t²)` and its cross-section with Sⁿ is a (k−1)-sphere of
//! radius `1/√(1+t²)` centred at `u' = (v, t²)/(1+t²)`.
//!
//! Planes tangent to Sⁿ at N (distance 1) have no trace in ℝⁿ and cannot be
//! represented.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, complete_basis, dot, norm, norm_sq, null_combination, orthonormalize, project_out,
    zeros, Coords,
};
use crate::quadrature::sphere_rule;
use crate::stereo::SpherePoint;

/// Ambient sphere dimension n and slice dimension k, `2 ≤ k ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dimensions {
    pub n: usize,
    pub k: usize,
}

impl Dimensions {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 || k < 2 || k > n {
            return Err(Error::InvalidDimensions(format!(
                "need 2 <= k <= n, got n = {n}, k = {k}"
            )));
        }
        Ok(Self { n, k })
    }

    /// Dimension k − 1 of the trace flats ζ.
    pub fn flat_dim(&self) -> usize {
        self.k - 1
    }
}

/// An affine flat `ζ₀ + v` in ℝⁿ with an orthonormal basis of ζ₀ and the
/// offset `v ⟂ ζ₀` (the closest point of the flat to the origin).
#[derive(Debug, Clone, PartialEq)]
pub struct FlatSpec {
    basis: Vec<Coords>,
    offset: Coords,
}

impl FlatSpec {
    /// Flat of any dimension `1 ≤ j < n` spanned by `basis` through `point`.
    pub fn new(basis: &[Coords], point: &Coords) -> Result<Self> {
        let n = point.len();
        if basis.is_empty() {
            return Err(Error::InvalidParameter("flat needs at least one direction".into()));
        }
        for b in basis {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: b.len() });
            }
        }
        if basis.len() >= n {
            return Err(Error::InvalidParameter(format!(
                "a {}-flat is not proper in ℝ^{n}",
                basis.len()
            )));
        }
        let basis = orthonormalize(basis)?;
        let mut offset = point.clone();
        project_out(&mut offset, &basis);
        project_out(&mut offset, &basis);
        Ok(Self { basis, offset })
    }

    pub(crate) fn from_orthonormal(basis: Vec<Coords>, offset: Coords) -> Self {
        Self { basis, offset }
    }

    pub fn basis(&self) -> &[Coords] {
        &self.basis
    }

    pub fn offset(&self) -> &Coords {
        &self.offset
    }

    pub fn ambient_dim(&self) -> usize {
        self.offset.len()
    }

    pub fn flat_dim(&self) -> usize {
        self.basis.len()
    }

    /// |ζ|, the distance from the origin.
    pub fn distance(&self) -> f64 {
        norm(&self.offset)
    }

    /// Euclidean distance from `x` to the flat.
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        let mut d: Coords = x.iter().zip(&self.offset).map(|(a, b)| a - b).collect();
        project_out(&mut d, &self.basis);
        norm(&d)
    }

    /// The same flat translated so that it passes through `x`.
    pub fn through(&self, x: &[f64]) -> Self {
        let mut offset: Coords = x.iter().copied().collect();
        project_out(&mut offset, &self.basis);
        Self { basis: self.basis.clone(), offset }
    }
}

/// Validating constructor: `basis` must hold k − 1 independent vectors of ℝⁿ.
pub fn make_flat(basis: &[Coords], offset: &Coords, dims: Dimensions) -> Result<FlatSpec> {
    if offset.len() != dims.n {
        return Err(Error::DimensionMismatch { expected: dims.n, got: offset.len() });
    }
    if basis.len() != dims.flat_dim() {
        return Err(Error::DimensionMismatch { expected: dims.flat_dim(), got: basis.len() });
    }
    FlatSpec::new(basis, offset)
}

/// A k-plane τ through N, stored by its trace on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicePlane {
    section: FlatSpec,
    /// t = |v| = cot ψ.
    pub t: f64,
    /// |τ| = cos ψ.
    pub dist: f64,
    /// Cross-section radius r = sin ψ.
    pub radius: f64,
    /// v/|v|; `None` when v = 0.
    pub theta: Option<Coords>,
}

impl SlicePlane {
    pub fn section(&self) -> &FlatSpec {
        &self.section
    }

    pub fn into_section(self) -> FlatSpec {
        self.section
    }

    pub fn dims(&self) -> Dimensions {
        Dimensions { n: self.section.ambient_dim(), k: self.section.flat_dim() + 1 }
    }

    /// Foot u' of the perpendicular from the origin to τ; also the centre of
    /// the cross-section sphere.
    pub fn center(&self) -> Coords {
        let s = 1.0 + self.t * self.t;
        let mut c: Coords = self.section.offset.iter().map(|x| x / s).collect();
        c.push(self.t * self.t / s);
        c
    }

    /// Orthonormal basis of the direction space τ₀ ⊂ ℝ^{n+1}: the trace basis
    /// followed by `(v, −1)/√(1+t²)`.
    pub fn directions(&self) -> Vec<Coords> {
        let mut out: Vec<Coords> = self
            .section
            .basis
            .iter()
            .map(|b| {
                let mut c = b.clone();
                c.push(0.0);
                c
            })
            .collect();
        let s = (1.0 + self.t * self.t).sqrt();
        let mut w: Coords = self.section.offset.iter().map(|x| x / s).collect();
        w.push(-1.0 / s);
        out.push(w);
        out
    }

    /// Distance from a point of ℝ^{n+1} to the affine plane τ.
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        let n1 = self.section.ambient_dim() + 1;
        let mut d = zeros(n1);
        d[n1 - 1] = -1.0;
        axpy(1.0, p, &mut d);
        project_out(&mut d, &self.directions());
        norm(&d)
    }

    /// τ = N + span(directions), for k vectors of ℝ^{n+1}. Inverse of the
    /// trace correspondence ζ₀ = τ₀ ∩ ℝⁿ, v = |u|θ/√(1 − |u|²).
    pub fn through_pole(directions: &[Coords]) -> Result<Self> {
        let n1 = directions.first().map_or(0, |d| d.len());
        if n1 < 3 {
            return Err(Error::InvalidDimensions("need n >= 2".into()));
        }
        let n = n1 - 1;
        let dims = Dimensions::new(n, directions.len())?;
        for d in directions {
            if d.len() != n1 {
                return Err(Error::DimensionMismatch { expected: n1, got: d.len() });
            }
        }
        let tau0 = orthonormalize(directions)?;
        // u = N − P_{τ₀} N.
        let mut u = zeros(n1);
        u[n] = 1.0;
        project_out(&mut u, &tau0);
        project_out(&mut u, &tau0);
        let u_len = norm(&u);
        if u_len >= 1.0 - 1e-14 {
            return Err(Error::TangentPlane);
        }
        let coef: Vec<f64> = tau0.iter().map(|d| d[n]).collect();
        let zeta0: Vec<Coords> = null_combination(&tau0, &coef)
            .into_iter()
            .map(|mut c| {
                c.truncate(n);
                c
            })
            .collect();
        debug_assert_eq!(zeta0.len(), dims.flat_dim());
        let zeta0 = orthonormalize(&zeta0)?;
        let t = u_len / (1.0 - u_len * u_len).sqrt();
        let horiz = &u[..n];
        let h = norm(horiz);
        let mut v = zeros(n);
        if h > 0.0 {
            for (vi, hi) in v.iter_mut().zip(horiz) {
                *vi = t * hi / h;
            }
        }
        Ok(slice_plane_from_section(FlatSpec::from_orthonormal(zeta0, v)))
    }
}

/// Derives t, |τ|, r and θ from the trace ζ.
pub fn slice_plane_from_section(zeta: FlatSpec) -> SlicePlane {
    let t = zeta.distance();
    let s = (1.0 + t * t).sqrt();
    let theta = (t > 0.0).then(|| zeta.offset.iter().map(|x| x / t).collect());
    SlicePlane { section: zeta, t, dist: t / s, radius: 1.0 / s, theta }
}

/// Slice plane with trace direction space `basis`, offset direction `theta`
/// and distance |τ| = `dist` ∈ [0, 1).
pub fn slice_plane_at_distance(
    basis: &[Coords],
    theta: &Coords,
    dist: f64,
    dims: Dimensions,
) -> Result<SlicePlane> {
    if !(0.0..1.0).contains(&dist) {
        return Err(Error::InvalidParameter(format!("plane distance {dist} not in [0, 1)")));
    }
    let t = dist / (1.0 - dist * dist).sqrt();
    let len = norm(theta);
    let v: Coords = theta.iter().map(|x| x * t / len).collect();
    let zeta = make_flat(basis, &v, dims)?;
    if zeta.distance_to(&zeros(dims.n)) < t * (1.0 - 1e-10) {
        return Err(Error::NotOrthogonal(dot(&v, &zeta.basis[0])));
    }
    Ok(slice_plane_from_section(zeta))
}

/// A rotation diag(α₀, 1) of ℝ^{n+1}, α₀ ∈ SO(n).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub matrix: DMatrix<f64>,
}

impl Frame {
    pub fn apply(&self, p: &[f64]) -> Coords {
        let n1 = self.matrix.nrows();
        (0..n1)
            .map(|i| (0..n1).map(|j| self.matrix[(i, j)] * p[j]).sum())
            .collect()
    }

    /// `‖FᵀF − I‖∞`.
    pub fn orthogonality_defect(&self) -> f64 {
        let g = self.matrix.transpose() * &self.matrix;
        let n = g.nrows();
        (g - DMatrix::identity(n, n)).amax()
    }
}

/// Rotation taking the coordinate flat span(e_{n−k+1}, …, e_{n−1}) onto
/// span(`zeta0_basis`) and e_n onto `theta`, fixing e_{n+1}.
pub fn build_frame(zeta0_basis: &[Coords], theta: &Coords) -> Result<Frame> {
    let n = theta.len();
    let j = zeta0_basis.len();
    if j + 1 > n {
        return Err(Error::InvalidDimensions(format!("{j} directions plus θ exceed ℝ^{n}")));
    }
    for b in zeta0_basis {
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
    }
    let basis = orthonormalize(zeta0_basis)?;
    let tl = norm(theta);
    let theta_hat: Coords = theta.iter().map(|x| x / tl).collect();
    let residual = basis.iter().map(|b| dot(b, &theta_hat).abs()).fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(Error::NotOrthogonal(residual));
    }
    // Columns: [completion (n−1−j) | ζ₀ basis (j) | θ].
    let mut fixed = basis.clone();
    fixed.push(theta_hat.clone());
    let full = complete_basis(&fixed, n);
    let mut cols: Vec<Coords> = full[j + 1..].to_vec();
    cols.extend(basis);
    cols.push(theta_hat);
    let mut a0 = DMatrix::from_fn(n, n, |i, c| cols[c][i]);
    if a0.determinant() < 0.0 {
        // Flip one column: a completion column if any, else a ζ₀ direction
        // (the subspace condition is sign-blind).
        for i in 0..n {
            a0[(i, 0)] = -a0[(i, 0)];
        }
    }
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&a0);
    m[(n, n)] = 1.0;
    Ok(Frame { matrix: m })
}

/// Nodes on the cross-section sphere τ ∩ Sⁿ with weights summing to its
/// area σ_{k−1} r^{k−1}. No node coincides with N.
pub fn sample_sphere_cross_section(tau: &SlicePlane, m: usize) -> Vec<(SpherePoint, f64)> {
    let dims = tau.dims();
    let rule = sphere_rule(dims.k - 1, m.max(1));
    let center = tau.center();
    let dirs = tau.directions();
    let r = tau.radius;
    let s = 1.0 + tau.t * tau.t;
    let scale = r.powi(dims.k as i32 - 1);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(sig, &w)| {
            let mut p = center.clone();
            for (si, d) in sig.iter().zip(&dirs) {
                axpy(r * si, d, &mut p);
            }
            let gap = (1.0 + sig[dims.k - 1]) / s;
            (SpherePoint::with_gap(p, gap), w * scale)
        })
        .collect()
}

/// Haar-random orthonormal n-frame from a Gaussian matrix.
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, count: usize) -> Vec<Coords> {
    loop {
        let vs: Vec<Coords> = (0..count)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        if let Ok(q) = orthonormalize(&vs) {
            return q;
        }
    }
}

/// Random slice plane: uniform orientation, `t = tan U(0, π/2 − δ)`.
pub fn random_slice_plane<R: Rng + ?Sized>(rng: &mut R, dims: Dimensions, delta: f64) -> SlicePlane {
    let frame = random_orthonormal(rng, dims.n, dims.k);
    let t = rng.random_range(0.0..(std::f64::consts::FRAC_PI_2 - delta)).tan();
    let v: Coords = frame[dims.k - 1].iter().map(|x| x * t).collect();
    let basis = frame[..dims.k - 1].to_vec();
    slice_plane_from_section(FlatSpec::from_orthonormal(basis, v))
}

/// Random slice plane at a prescribed distance |τ|.
pub fn random_slice_plane_at<R: Rng + ?Sized>(rng: &mut R, dims: Dimensions, dist: f64) -> SlicePlane {
    let frame = random_orthonormal(rng, dims.n, dims.k);
    let t = dist / (1.0 - dist * dist).sqrt();
    let v: Coords = frame[dims.k - 1].iter().map(|x| x * t).collect();
    slice_plane_from_section(FlatSpec::from_orthonormal(frame[..dims.k - 1].to_vec(), v))
}

/// Random j-flat of ℝⁿ at distance `dist` from the origin, j < n.
pub fn random_flat_at<R: Rng + ?Sized>(rng: &mut R, n: usize, j: usize, dist: f64) -> FlatSpec {
    let frame = random_orthonormal(rng, n, j + 1);
    let v: Coords = frame[j].iter().map(|x| x * dist).collect();
    FlatSpec::from_orthonormal(frame[..j].to_vec(), v)
}

/// Residual check used by tests and diagnostics: max deviation of a family
/// from orthonormality.
pub fn orthonormality_defect(vs: &[Coords]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in vs.iter().enumerate() {
        worst = worst.max((norm_sq(a) - 1.0).abs());
        for b in &vs[i + 1..] {
            worst = worst.max(dot(a, b).abs());
        }
    }
    worst
}
