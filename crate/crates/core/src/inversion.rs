//! Inversion of the Radon-John transform by a Riesz fractional derivative of
//! the dual transform, `g = c_{k,n}^{−1} 𝔻^k R*_k R_k g`, and the slice
//! inversion `f = B⁻¹ R_{k−1}^{−1} A⁻¹ F` built on it.
//!
//! `𝔻^k h(x) = d_{n,ℓ}(k)^{−1} ∫ (Δ^ℓ_y h)(x) |y|^{−n−k} dy` with
//! `(Δ^ℓ_y h)(x) = Σ_j (−1)^j C(ℓ,j) h(x − jy)`, realized as the ε → 0
//! Richardson limit of `ε < |y| < R` truncations.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Dimensions, FlatSpec, SlicePlane};
use crate::linalg::{dot, Coords};
use crate::quadrature::{gauss_legendre_reference, sphere_area, sphere_rule, QuadratureSpec, SphereRule};
use crate::transforms::{op_b_inverse, plane_of_trace, OrientationRule, PlaneField, SphereField};

/// Γ(m/2) for integer m, exact up to rounding (m ≤ 0 even is a pole).
pub fn gamma_half(m: i64) -> Result<f64> {
    if m <= 0 && m % 2 == 0 {
        return Err(Error::InvalidParameter(format!("Γ pole at {}", m / 2)));
    }
    // Start from Γ(1) = 1 or Γ(1/2) = √π and walk by Γ(x+1) = xΓ(x).
    let (mut x2, mut g) = if m % 2 == 0 { (2i64, 1.0) } else { (1i64, std::f64::consts::PI.sqrt()) };
    while x2 < m {
        g *= x2 as f64 / 2.0;
        x2 += 2;
    }
    while x2 > m {
        x2 -= 2;
        g /= x2 as f64 / 2.0;
    }
    Ok(g)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// `B_ℓ(α) = Σ_{j=0}^ℓ (−1)^j C(ℓ,j) j^α` with `0^α = 0`.
pub fn coeff_b_l(l: usize, alpha: f64) -> f64 {
    (1..=l).map(|j| sign(j) * binomial(l, j) * (j as f64).powf(alpha)).sum()
}

/// `dB_ℓ/dα = Σ_j (−1)^j C(ℓ,j) j^α ln j`.
pub fn coeff_b_l_derivative(l: usize, alpha: f64) -> f64 {
    (2..=l)
        .map(|j| sign(j) * binomial(l, j) * (j as f64).powf(alpha) * (j as f64).ln())
        .sum()
}

fn sign(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// The normalizing constant `d_{n,ℓ}(k)` of the hypersingular integral.
pub fn coeff_d(n: usize, l: usize, k: usize) -> Result<f64> {
    check_ell(k, l)?;
    let pre = std::f64::consts::PI.powf(n as f64 / 2.0) / (2f64.powi(k as i32) * gamma_half((n + k) as i64)?);
    if k % 2 == 1 {
        Ok(pre * gamma_half(-(k as i64))? * coeff_b_l(l, k as f64))
    } else {
        let half = k / 2;
        let fact: f64 = (1..=half).map(|i| i as f64).product();
        let s = if half % 2 == 1 { 1.0 } else { -1.0 };
        Ok(pre * 2.0 * s / fact * coeff_b_l_derivative(l, k as f64))
    }
}

/// `c_{k,n} = 2^k π^{k/2} Γ(n/2) / Γ((n−k)/2)`.
pub fn coeff_c(k: usize, n: usize) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::InvalidDimensions(format!("c_{{k,n}} needs 1 <= k <= n-1, got k={k}, n={n}")));
    }
    Ok(2f64.powi(k as i32) * std::f64::consts::PI.powf(k as f64 / 2.0) * gamma_half(n as i64)?
        / gamma_half((n - k) as i64)?)
}

fn check_ell(k: usize, l: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("derivative order must be >= 1".into()));
    }
    let ok = if k % 2 == 1 { l == k } else { l > k };
    if ok {
        Ok(())
    } else if k % 2 == 1 {
        Err(Error::InvalidParameter(format!("odd order {k} requires ell = {k}, got {l}")))
    } else {
        Err(Error::InvalidParameter(format!("even order {k} requires ell > {k}, got {l}")))
    }
}

/// Parameters of the hypersingular integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszParams {
    pub k_order: usize,
    pub ell: usize,
    pub eps: f64,
    pub outer_r: f64,
}

impl RieszParams {
    /// `ell = None` picks ℓ = k for odd k and ℓ = k + 1 for even k.
    pub fn new(k_order: usize, ell: Option<usize>, eps: f64, outer_r: f64) -> Result<Self> {
        let ell = ell.unwrap_or(if k_order % 2 == 1 { k_order } else { k_order + 1 });
        check_ell(k_order, ell)?;
        if !(eps > 0.0) || !(outer_r > eps) || !outer_r.is_finite() {
            return Err(Error::InvalidParameter(format!("need 0 < eps < outer, got eps={eps}, outer={outer_r}")));
        }
        Ok(Self { k_order, ell, eps, outer_r })
    }

    pub fn from_spec(k_order: usize, ell: Option<usize>, spec: &QuadratureSpec) -> Result<Self> {
        Self::new(k_order, ell, spec.hs_epsilon, spec.hs_outer)
    }

    /// Smallest even m₁ ≥ max(ℓ, k+1): the leading power of the
    /// angle-averaged finite difference at small |y|.
    fn leading_power(&self) -> usize {
        let m = self.ell.max(self.k_order + 1);
        m + m % 2
    }
}

/// The three ε-levels and their extrapolated limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszEstimate {
    /// `𝔻^k h(x)`.
    pub value: f64,
    /// Unnormalized truncated integrals at ε, ε/2, ε/4.
    pub levels: [f64; 3],
    /// `|I(ε/4) − I(ε/2)| < |I(ε/2) − I(ε)|`.
    pub converged: bool,
}

/// Precomputed nodes of the polar rule for `𝔻^k` in ℝⁿ.
#[derive(Debug, Clone)]
pub struct RieszOperator {
    n: usize,
    params: RieszParams,
    d: f64,
    directions: SphereRule,
    coefs: Vec<f64>,
    // (r, weight) per segment; segment 0 is [ε/4, ε/2], 1 is [ε/2, ε],
    // the rest tile [ε, R] by doubling.
    segments: Vec<Vec<(f64, f64)>>,
}

impl RieszOperator {
    pub fn new(n: usize, params: RieszParams, spec: &QuadratureSpec) -> Result<Self> {
        let d = coeff_d(n, params.ell, params.k_order)?;
        let directions = sphere_rule(n - 1, spec.hs_angular_order);
        let coefs = (0..=params.ell).map(|j| sign(j) * binomial(params.ell, j)).collect();
        let (eps, outer) = (params.eps, params.outer_r);
        let doublings = (outer / eps).log2().ceil().max(1.0) as usize;
        let per = spec.hs_radial_order.div_ceil(doublings).max(8);
        let mut bounds = vec![(0.25 * eps, 0.5 * eps), (0.5 * eps, eps)];
        let mut a = eps;
        while a < outer {
            let b = (2.0 * a).min(outer);
            bounds.push((a, b));
            a = b;
        }
        let k = params.k_order as i32;
        let gl = gauss_legendre_reference(per);
        let segments = bounds
            .into_iter()
            .map(|(a, b)| {
                let (la, lb) = (a.ln(), b.ln());
                let half = 0.5 * (lb - la);
                gl.nodes
                    .iter()
                    .zip(&gl.weights)
                    .map(|(x, w)| {
                        let r = (la + half * (x + 1.0)).exp();
                        // dr = r ds and r^{n−1}·r^{−n−k} give r^{−k} ds.
                        (r, w * half * r.powi(-k))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { n, params, d, directions, coefs, segments })
    }

    pub fn params(&self) -> &RieszParams {
        &self.params
    }

    fn segment_sum(&self, h: &PlaneField, x: &[f64], hx: f64, seg: &[(f64, f64)]) -> Result<f64> {
        let mut total = 0.0;
        let mut p: Coords = x.iter().copied().collect();
        for &(r, wr) in seg {
            let mut ring = 0.0;
            for (sig, ws) in self.directions.nodes.iter().zip(&self.directions.weights) {
                let mut diff = hx;
                for (j, c) in self.coefs.iter().enumerate().skip(1) {
                    let step = j as f64 * r;
                    for i in 0..self.n {
                        p[i] = x[i] - step * sig[i];
                    }
                    diff += c * h.eval(&p)?;
                }
                ring += ws * diff;
            }
            total += wr * ring;
        }
        Ok(total)
    }

    /// `∫_{|y|>R} (Δ^ℓ_y h)(x)|y|^{−n−k} dy` with each shell mean
    /// `M_j(r) = avg_σ h(x − jrσ)` modelled as `M_j(R)(r/R)^{−λ_j}`, λ_j read
    /// off from `M_j(2R)/M_j(R)`. Exact for constants and for j = 0.
    fn tail(&self, h: &PlaneField, x: &[f64], hx: f64) -> Result<f64> {
        let (r, k) = (self.params.outer_r, self.params.k_order as f64);
        let total_w: f64 = self.directions.weights.iter().sum();
        let mut p: Coords = x.iter().copied().collect();
        let mut shell = |radius: f64| -> Result<f64> {
            let mut acc = 0.0;
            for (sig, ws) in self.directions.nodes.iter().zip(&self.directions.weights) {
                for i in 0..self.n {
                    p[i] = x[i] - radius * sig[i];
                }
                acc += ws * h.eval(&p)?;
            }
            Ok(acc / total_w)
        };
        let mut total = hx / k;
        for (j, c) in self.coefs.iter().enumerate().skip(1) {
            let near = shell(j as f64 * r)?;
            if near == 0.0 {
                continue;
            }
            let ratio = shell(2.0 * j as f64 * r)? / near;
            let lambda = if ratio > 0.0 && ratio <= 1.0 { -ratio.log2() } else { 0.0 };
            total += c * near / (k + lambda);
        }
        Ok(total * sphere_area(self.n - 1) * r.powf(-k))
    }

    pub fn apply_detailed(&self, h: &PlaneField, x: &[f64]) -> Result<RieszEstimate> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let hx = h.eval(x)?;
        let k = self.params.k_order as f64;
        let mut coarse = self.tail(h, x, hx)?;
        for seg in &self.segments[2..] {
            coarse += self.segment_sum(h, x, hx, seg)?;
        }
        let mid = coarse + self.segment_sum(h, x, hx, &self.segments[1])?;
        let fine = mid + self.segment_sum(h, x, hx, &self.segments[0])?;
        let m1 = self.params.leading_power() as f64;
        let (p1, p2) = (m1 - k, m1 + 2.0 - k);
        let (q1, q2) = (2f64.powf(p1), 2f64.powf(p2));
        let r10 = (q1 * mid - coarse) / (q1 - 1.0);
        let r11 = (q1 * fine - mid) / (q1 - 1.0);
        let limit = (q2 * r11 - r10) / (q2 - 1.0);
        let (d1, d2) = ((mid - coarse).abs(), (fine - mid).abs());
        let scale = coarse.abs().max(mid.abs()).max(1e-300);
        let converged = d2 < d1 || d1 <= 1e-14 * scale;
        Ok(RieszEstimate { value: limit / self.d, levels: [coarse, mid, fine], converged })
    }

    pub fn apply(&self, h: &PlaneField, x: &[f64]) -> Result<f64> {
        let est = self.apply_detailed(h, x)?;
        if !est.converged {
            log::warn!("hypersingular non-convergent at x = {x:?}: levels {:?}", est.levels);
        }
        Ok(est.value)
    }
}

/// `𝔻^k h(x)`. Logs "hypersingular non-convergent" when the ε-halving
/// differences fail to decrease.
pub fn riesz_derivative(h: &PlaneField, x: &[f64], params: &RieszParams, spec: &QuadratureSpec) -> Result<f64> {
    RieszOperator::new(x.len(), *params, spec)?.apply(h, x)
}

type FlatFn = dyn Fn(&FlatSpec) -> Result<f64> + Send + Sync;

/// `R*_j φ` with memoization. When the orientations have a one-dimensional
/// complement, φ on each orientation depends on a scalar offset only and is
/// tabulated lazily on a uniform lattice, then read by 4-point Lagrange
/// interpolation. Other cases evaluate φ directly.
pub struct DualCache {
    phi: Arc<FlatFn>,
    rule: OrientationRule,
    spacing: f64,
    extent: f64,
    tables: Option<Vec<Vec<OnceLock<f64>>>>,
}

impl fmt::Debug for DualCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DualCache")
            .field("orientations", &self.rule.len())
            .field("spacing", &self.spacing)
            .field("extent", &self.extent)
            .field("tabulated", &self.tables.is_some())
            .finish_non_exhaustive()
    }
}

/// Lattice entries beyond which the cache falls back to direct evaluation.
const MAX_CACHE_ENTRIES: usize = 64_000_000;

impl DualCache {
    /// `extent` bounds the tabulated offsets to `[−extent, extent]`.
    pub fn new(phi: Arc<FlatFn>, n: usize, j: usize, spec: &QuadratureSpec, extent: f64) -> Result<Self> {
        let rule = OrientationRule::new(n, j, spec.orientation_samples, spec.seed)?;
        let spacing = spec.dual_cache_spacing;
        let per = (2.0 * extent / spacing).ceil() as usize + 1;
        let tables = (n - j == 1 && spacing > 0.0 && per.saturating_mul(rule.len()) <= MAX_CACHE_ENTRIES)
            .then(|| (0..rule.len()).map(|_| (0..per).map(|_| OnceLock::new()).collect()).collect());
        Ok(Self { phi, rule, spacing, extent, tables })
    }

    pub fn rule(&self) -> &OrientationRule {
        &self.rule
    }

    fn lattice(&self, table: &[OnceLock<f64>], i: usize, idx: usize) -> Result<f64> {
        let cell = &table[idx];
        if let Some(v) = cell.get() {
            return Ok(*v);
        }
        let p = -self.extent + idx as f64 * self.spacing;
        let normal = &self.rule.complements[i][0];
        let offset: Coords = normal.iter().map(|c| c * p).collect();
        let v = (self.phi)(&FlatSpec::from_orthonormal(self.rule.bases[i].clone(), offset))?;
        Ok(*cell.get_or_init(|| v))
    }

    fn orientation_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        if let Some(tables) = &self.tables {
            let table = &tables[i];
            let p = dot(x, &self.rule.complements[i][0]);
            let pos = (p + self.extent) / self.spacing;
            let base = pos.floor() as isize - 1;
            if base >= 0 && (base as usize + 3) < table.len() {
                let base = base as usize;
                let frac = pos - (base + 1) as f64;
                // Lagrange weights on nodes −1, 0, 1, 2.
                let w = [
                    -frac * (frac - 1.0) * (frac - 2.0) / 6.0,
                    (frac + 1.0) * (frac - 1.0) * (frac - 2.0) / 2.0,
                    -(frac + 1.0) * frac * (frac - 2.0) / 2.0,
                    (frac + 1.0) * frac * (frac - 1.0) / 6.0,
                ];
                let mut acc = 0.0;
                for (o, wo) in w.iter().enumerate() {
                    acc += wo * self.lattice(table, i, base + o)?;
                }
                return Ok(acc);
            }
        }
        (self.phi)(&self.rule.flat_through(i, x))
    }

    /// `(R*φ)(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (i, w) in self.rule.weights.iter().enumerate() {
            total += w * self.orientation_value(i, x)?;
        }
        Ok(total)
    }

    pub fn into_field(self: Arc<Self>) -> PlaneField {
        PlaneField::try_new(move |x| self.eval(x))
    }
}

/// Default tabulation extent: reconstruction radius plus the reach ℓ·R of
/// the finite differences.
pub fn default_extent(params: &RieszParams, spec: &QuadratureSpec, radius: f64) -> f64 {
    if spec.dual_cache_extent > 0.0 {
        spec.dual_cache_extent
    } else {
        radius + 2.0 * params.ell as f64 * params.outer_r + 1.0
    }
}

/// `g = c_{j,n}^{−1} 𝔻^j R*_j φ` for data φ on j-flats of ℝⁿ, `j = params.k_order`.
/// Reconstructions are intended within `|x| ≤ radius`.
pub fn invert_radon(
    phi: Arc<FlatFn>,
    n: usize,
    params: &RieszParams,
    spec: &QuadratureSpec,
    radius: f64,
) -> Result<PlaneField> {
    let j = params.k_order;
    let c = coeff_c(j, n)?;
    let op = RieszOperator::new(n, *params, spec)?;
    let cache = Arc::new(DualCache::new(phi, n, j, spec, default_extent(params, spec, radius))?);
    let h = cache.into_field();
    Ok(PlaneField::try_new(move |x| Ok(op.apply(&h, x)? / c)))
}

/// `f = B⁻¹ R_{k−1}^{−1} A⁻¹ F` for slice data F; requires
/// `params.k_order = k − 1`. Reconstructions are intended on `|ν⁻¹(η)| ≤ radius`.
pub fn invert_slice(
    f_data: Arc<dyn Fn(&SlicePlane) -> Result<f64> + Send + Sync>,
    dims: Dimensions,
    params: &RieszParams,
    spec: &QuadratureSpec,
    radius: f64,
) -> Result<SphereField> {
    if params.k_order != dims.k - 1 {
        return Err(Error::InvalidParameter(format!(
            "slice inversion needs derivative order k-1 = {}, got {}",
            dims.k - 1,
            params.k_order
        )));
    }
    let phi: Arc<FlatFn> = Arc::new(move |zeta: &FlatSpec| f_data(&plane_of_trace(zeta)));
    let g = invert_radon(phi, dims.n, params, spec, radius)?;
    Ok(op_b_inverse(&g, dims))
}

/// Reconstruction versus reference on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionReport {
    pub points: Vec<Coords>,
    pub values: Vec<f64>,
    pub reference: Vec<f64>,
    /// `max|Δ| / max|reference|`.
    pub residual_linf: f64,
    /// `‖Δ‖₂ / ‖reference‖₂` over the points.
    pub residual_l2: f64,
    pub settings: String,
}

impl InversionReport {
    /// Evaluates both functions at every point, in parallel; row order is
    /// the order of `points`.
    pub fn evaluate(
        recon: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
        reference: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
        points: Vec<Coords>,
        settings: String,
    ) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = points
            .par_iter()
            .map(|p| Ok((recon(p)?, reference(p)?)))
            .collect::<Result<_>>()?;
        let (values, reference): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (mut emax, mut rmax, mut e2, mut r2) = (0f64, 0f64, 0.0, 0.0);
        for (v, r) in values.iter().zip(&reference) {
            let e = (v - r).abs();
            emax = emax.max(e);
            rmax = rmax.max(r.abs());
            e2 += e * e;
            r2 += r * r;
        }
        let residual_linf = if rmax > 0.0 { emax / rmax } else { emax };
        let residual_l2 = if r2 > 0.0 { (e2 / r2).sqrt() } else { e2.sqrt() };
        Ok(Self { points, values, reference, residual_linf, residual_l2, settings })
    }
}

/// `side × side` grid on `[lo, hi]²`, row-major in the second coordinate.
pub fn square_grid(side: usize, lo: f64, hi: f64) -> Vec<Coords> {
    let step = if side > 1 { (hi - lo) / (side - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            out.push(Coords::from_slice(&[lo + i as f64 * step, lo + j as f64 * step]));
        }
    }
    out
}
