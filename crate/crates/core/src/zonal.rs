//! Zonal calculus. A zonal f on Sⁿ is `f(η) = f₀(s)` with `s = cot(φ/2)`
//! the distance of ν⁻¹(η) to the origin. Its slice transform depends only on
//! `t = |τ ∩ ℝⁿ|` through the Abel-type integral
//!
//! `F₀(t) = 2^{k−1} σ_{k−2} ∫_t^∞ f₀(s) (1+s²)^{1−k} (s²−t²)^{(k−3)/2} s ds`.
//!
//! With `u = t²`, `U = s²` and `φ(U) = f₀(√U)(1+U)^{1−k}` this reads
//! `F₀(√u) = C · (I₋^α φ)(u)` with `α = (k−1)/2` and `C = 2^{k−1}π^α`.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{slice_plane_at_distance, Dimensions, SlicePlane};
use crate::linalg::{unit, Coords};
use crate::quadrature::{gauss_legendre_reference, sphere_area, QuadratureSpec};
use crate::stereo::{nu_coords, SpherePoint};
use crate::transforms::SphereField;

/// σ_d, the area of the unit sphere S^d.
pub fn sigma(d: usize) -> f64 {
    sphere_area(d)
}

type ProfileFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A zonal profile `s ↦ f₀(s)` on (0, ∞). `growth` μ asserts that
/// `f₀(s) = O(s^{2μ})` as s → ∞, matching `pole_exponent` of the induced
/// field.
#[derive(Clone)]
pub struct ZonalProfile {
    f0: Arc<ProfileFn>,
    samples: Option<Arc<(Vec<f64>, Vec<f64>)>>,
    pub growth: f64,
}

impl fmt::Debug for ZonalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZonalProfile")
            .field("samples", &self.samples.as_ref().map(|s| s.0.len()))
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl ZonalProfile {
    pub fn new(f0: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f0: Arc::new(f0), samples: None, growth: 0.0 }
    }

    pub fn with_growth(mut self, mu: f64) -> Self {
        self.growth = mu;
        self
    }

    /// A profile interpolating samples at increasing positive `s` by 4-point
    /// Lagrange interpolation in ln s; constant beyond the ends.
    pub fn from_samples(s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if s.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: s.len(), got: values.len() });
        }
        if s.len() < 2 {
            return Err(Error::InvalidParameter("profile needs at least 2 samples".into()));
        }
        if s[0] <= 0.0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("profile abscissae must be positive and increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite profile sample".into()));
        }
        let data = Arc::new((s, values));
        let d = data.clone();
        let log_s: Arc<Vec<f64>> = Arc::new(d.0.iter().map(|x| x.ln()).collect());
        let f0 = move |x: f64| interpolate_log(&log_s, &d.1, x);
        Ok(Self { f0: Arc::new(f0), samples: Some(data), growth: 0.0 })
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f0)(s)
    }

    /// The sampled grid, if this profile was built from samples.
    pub fn samples(&self) -> Option<(&[f64], &[f64])> {
        self.samples.as_ref().map(|d| (d.0.as_slice(), d.1.as_slice()))
    }

    /// Samples `f₀` at `count` log-spaced points in `[lo, hi]`.
    pub fn sampled(&self, lo: f64, hi: f64, count: usize) -> Result<Self> {
        let s = log_grid(lo, hi, count);
        let v = s.iter().map(|&x| self.eval(x)).collect();
        Ok(Self::from_samples(s, v)?.with_growth(self.growth))
    }

    /// The zonal field `f(η) = f₀(cot(φ/2))`.
    pub fn to_sphere_field(&self) -> SphereField {
        let p = self.clone();
        SphereField::new(move |eta: &SpherePoint| p.eval(cot_half(eta)))
            .with_zonal(true)
            .with_pole_exponent(self.growth)
    }

    /// Reads the profile of a zonal field along the meridian through e₁.
    pub fn from_sphere_field(f: &SphereField, n: usize) -> Result<Self> {
        if !f.zonal {
            return Err(Error::InvalidParameter("field is not flagged zonal".into()));
        }
        let f = f.clone();
        let mu = f.pole_exponent;
        let e1 = unit(n, 0);
        Ok(Self::new(move |s| {
            let x: Coords = e1.iter().map(|c| c * s).collect();
            f.eval(&nu_coords(&x)).unwrap_or(f64::NAN)
        })
        .with_growth(mu))
    }

    /// Two-column CSV `s,f0` with `#` comment lines and an optional header row.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let (mut s, mut v) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            // An optional header row of column names.
            if i == 0 && rec.iter().all(|x| x.parse::<f64>().is_err()) {
                continue;
            }
            if rec.len() != 2 {
                return Err(Error::Parse(format!("expected 2 columns, got {}", rec.len())));
            }
            let parse = |x: &str| x.parse::<f64>().map_err(|e| Error::Parse(format!("{x:?}: {e}")));
            s.push(parse(&rec[0])?);
            v.push(parse(&rec[1])?);
        }
        Self::from_samples(s, v)
    }

    /// Writes the sampled grid (or `count` log-spaced samples on
    /// `[1e−3, 1e3]` otherwise) as CSV under the given comment lines.
    pub fn write_csv(&self, mut out: impl Write, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "# s,f0")?;
        let owned;
        let (s, v) = match self.samples() {
            Some(sv) => sv,
            None => {
                owned = self.sampled(1e-3, 1e3, DEFAULT_GRID)?;
                let (s, v) = owned.samples().expect("sampled profile");
                (s, v)
            }
        };
        for (a, b) in s.iter().zip(v) {
            writeln!(out, "{a:e},{b:e}")?;
        }
        Ok(())
    }
}

/// Default grid size of inverted profiles.
pub const DEFAULT_GRID: usize = 400;

/// `cot(φ/2) = √((2 − gap)/gap)`.
pub fn cot_half(eta: &SpherePoint) -> f64 {
    let g = eta.gap();
    ((2.0 - g) / g).sqrt()
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let m = count.max(2) - 1;
    (0..=m).map(|i| (a + (b - a) * i as f64 / m as f64).exp()).collect()
}

fn interpolate_log(log_s: &[f64], v: &[f64], x: f64) -> f64 {
    let n = log_s.len();
    if !(x > 0.0) {
        return v[0];
    }
    let lx = x.ln();
    if lx <= log_s[0] {
        return v[0];
    }
    if lx >= log_s[n - 1] {
        return v[n - 1];
    }
    let i = log_s.partition_point(|&p| p <= lx).clamp(1, n - 1) - 1;
    if n < 4 {
        let w = (lx - log_s[i]) / (log_s[i + 1] - log_s[i]);
        return v[i] * (1.0 - w) + v[i + 1] * w;
    }
    let start = i.saturating_sub(1).min(n - 4);
    let mut acc = 0.0;
    for a in start..start + 4 {
        let mut l = 1.0;
        for b in start..start + 4 {
            if a != b {
                l *= (lx - log_s[b]) / (log_s[a] - log_s[b]);
            }
        }
        acc += l * v[a];
    }
    acc
}

/// A slice plane whose trace sits at distance `t` from the origin.
pub fn plane_at_trace_distance(t: f64, dims: Dimensions) -> Result<SlicePlane> {
    let n = dims.n;
    let basis: Vec<Coords> = (0..dims.flat_dim()).map(|i| unit(n, i)).collect();
    let theta = unit(n, n - 1);
    slice_plane_at_distance(&basis, &theta, t / (1.0 + t * t).sqrt(), dims)
}

/// `F₀(t)` by the substitution `q = √(s² − t²)`:
/// `2^{k−1}σ_{k−2} ∫₀^∞ f₀(√(t²+q²)) (1+t²+q²)^{1−k} q^{k−2} dq`, on a
/// Gauss-Legendre rule in θ with `q = √(1+t²)·tan θ`. That rule is exact
/// for f₀ ≡ 1.
pub fn zonal_forward(p: &ZonalProfile, t: f64, dims: Dimensions, spec: &QuadratureSpec) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("trace distance must be finite and >= 0, got {t}")));
    }
    let k = dims.k as i32;
    let bound = 0.5 * (k as f64 - 1.0);
    if p.growth >= bound {
        return Err(Error::ExistenceFailed(format!(
            "profile growth exponent {} >= (k-1)/2 = {bound}",
            p.growth
        )));
    }
    let a2 = 1.0 + t * t;
    let a = a2.sqrt();
    let integrand = |q: f64| -> f64 {
        let s = (t * t + q * q).sqrt();
        p.eval(s) * (a2 + q * q).powi(1 - k) * q.powi(k - 2)
    };
    // q·h(q) must tend to zero; probe far out in the tail.
    let probe = |q: f64| q * integrand(q).abs();
    let (near, far) = (probe(1e6 * a), probe(1e9 * a));
    if !far.is_finite() || (far > 1e-300 && far >= 0.5 * near) {
        return Err(Error::ExistenceFailed(format!(
            "slice integrand tail does not decay (q·|h(q)| = {far:e} at q = {:e})",
            1e9 * a
        )));
    }
    let gl = gauss_legendre_reference(spec.radial_order);
    let mut total = 0.0;
    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
        let th = std::f64::consts::FRAC_PI_4 * (x + 1.0);
        let c = th.cos();
        let q = a * th.sin() / c;
        let v = integrand(q);
        if !v.is_finite() {
            return Err(Error::IntegrandBlowup { value: v, location: format!("s = {}", (t * t + q * q).sqrt()) });
        }
        total += w * std::f64::consts::FRAC_PI_4 * a / (c * c) * v;
    }
    Ok(2f64.powi(k - 1) * sigma(dims.k - 2) * total)
}

/// Central-difference estimate of `(−d/du)^m G(u)` on a 5-point stencil
/// with step `min(0.01(1+u), u/2.5)`.
fn neg_derivative(g: &dyn Fn(f64) -> f64, u: f64, m: usize) -> Result<f64> {
    let h = (0.01 * (1.0 + u)).min(u / 2.5);
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("derivative requested at u = {u}")));
    }
    let f = [g(u - 2.0 * h), g(u - h), g(u), g(u + h), g(u + 2.0 * h)];
    let d = match m {
        0 => f[2],
        1 => (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h),
        2 => (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h),
        3 => (-f[0] + 2.0 * f[1] - 2.0 * f[3] + f[4]) / (2.0 * h.powi(3)),
        4 => (f[0] - 4.0 * f[1] + 6.0 * f[2] - 4.0 * f[3] + f[4]) / h.powi(4),
        _ => return Err(Error::InvalidParameter(format!("derivative order {m} > 4 unsupported"))),
    };
    Ok(if m % 2 == 1 { -d } else { d })
}

/// Recovers f₀ from F₀ by inverting the Abel-type relation:
/// `φ = I₋^{m−α} (−d/du)^m (F₀(√·)/C)` with `m = ⌈α⌉`; the half-order
/// integral, when present, is `(2/√π) ∫₀^∞ ψ(u + w²) dw` on a tangent-mapped
/// Gauss-Legendre rule. The result is sampled on [`DEFAULT_GRID`] log-spaced
/// points of `s ∈ [1e−3, 1e3]`.
pub fn zonal_invert(
    f0_big: &(dyn Fn(f64) -> f64 + Sync),
    dims: Dimensions,
    spec: &QuadratureSpec,
) -> Result<ZonalProfile> {
    zonal_invert_on(f0_big, dims, spec, &log_grid(1e-3, 1e3, DEFAULT_GRID))
}

pub fn zonal_invert_on(
    f0_big: &(dyn Fn(f64) -> f64 + Sync),
    dims: Dimensions,
    spec: &QuadratureSpec,
    s_grid: &[f64],
) -> Result<ZonalProfile> {
    let k = dims.k;
    let alpha = 0.5 * (k as f64 - 1.0);
    let m = alpha.ceil() as usize;
    let half = (m as f64 - alpha) > 0.25;
    let c = 2f64.powi(k as i32 - 1) * std::f64::consts::PI.powf(alpha);
    let g = |u: f64| f0_big(u.max(0.0).sqrt()) / c;
    let gl = gauss_legendre_reference(spec.radial_order);

    let phi = |u: f64| -> Result<f64> {
        if !half {
            return neg_derivative(&g, u, m);
        }
        let a = (1.0 + u).sqrt();
        let mut acc = 0.0;
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let th = std::f64::consts::FRAC_PI_4 * (x + 1.0);
            let cth = th.cos();
            let wq = a * th.sin() / cth;
            acc += w * std::f64::consts::FRAC_PI_4 * a / (cth * cth) * neg_derivative(&g, u + wq * wq, m)?;
        }
        Ok(2.0 / std::f64::consts::PI.sqrt() * acc)
    };

    let mut values = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let u = s * s;
        let v = phi(u)? * (1.0 + u).powi(k as i32 - 1);
        if !v.is_finite() {
            return Err(Error::IntegrandBlowup { value: v, location: format!("s = {s}") });
        }
        values.push(v);
    }
    ZonalProfile::from_samples(s_grid.to_vec(), values)
}

/// `max |f − g| / max |g|` over the samples of `recovered` inside `[lo, hi]`.
pub fn weighted_sup_error(recovered: &ZonalProfile, truth: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let owned;
    let (s, v) = match recovered.samples() {
        Some(sv) => sv,
        None => {
            owned = recovered.sampled(lo, hi, DEFAULT_GRID).expect("valid grid");
            owned.samples().expect("sampled")
        }
    };
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (&si, &vi) in s.iter().zip(v) {
        if si < lo || si > hi {
            continue;
        }
        let t = truth(si);
        err = err.max((vi - t).abs());
        scale = scale.max(t.abs());
    }
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

/// `max_t |zonal_forward(recovered)(t) − F₀(t)| / max |F₀|` on `ts`.
pub fn abel_residual(
    recovered: &ZonalProfile,
    f0_big: &dyn Fn(f64) -> f64,
    ts: &[f64],
    dims: Dimensions,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &t in ts {
        let want = f0_big(t);
        err = err.max((zonal_forward(recovered, t, dims, spec)? - want).abs());
        scale = scale.max(want.abs());
    }
    Ok(if scale == 0.0 { err } else { err / scale })
}
