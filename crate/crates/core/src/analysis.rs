//! Numerical probes of the qualitative statements: existence of slice
//! integrals near the pole, the weighted Lᵖ condition of the inversion
//! formula, and the support theorems for 𝔖 and R_j.
//!
//! Divergence is never proved. A refinement trace counts as divergent when it
//! grows by a factor ≥ 1.5 over four consecutive levels or exceeds 1e6 in
//! magnitude, and as convergent when its last two levels agree to 1e−6.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{random_flat_at, random_slice_plane_at, Dimensions, SlicePlane};
use crate::inversion::{invert_slice, RieszParams};
use crate::quadrature::{gauss_legendre, sphere_rule, QuadratureSpec};
use crate::stereo::SpherePoint;
use crate::transforms::{radon_john, slice_transform, PlaneField, SphereField};

/// The cap `Ω_b = {η_{n+1} > b}` and its plane threshold `b* = √((1+b)/2)`:
/// a cross-section avoids Ω_b exactly when `|τ| > b*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapSpec {
    pub b: f64,
    pub b_star: f64,
}

impl CapSpec {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > -1.0 && b < 1.0) {
            return Err(Error::InvalidParameter(format!("cap parameter b must lie in (-1, 1), got {b}")));
        }
        Ok(Self { b, b_star: (0.5 * (1.0 + b)).sqrt() })
    }

    pub fn contains(&self, eta: &SpherePoint) -> bool {
        eta.eta_last() > self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converges" => Ok(Verdict::Converges),
            "diverges" => Ok(Verdict::Diverges),
            "inconclusive" => Ok(Verdict::Inconclusive),
            other => Err(Error::Parse(format!("unknown verdict {other:?}"))),
        }
    }
}

/// One refinement level: the integral over `gap ∈ [delta, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub level: usize,
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub trace: Vec<TracePoint>,
}

/// Inner cutoffs `δ_L = exp(−2^L)`, L = 1..=9, down to about 1e−222.
pub fn default_levels() -> Vec<f64> {
    (1..=9).map(|l| (-(2f64.powi(l))).exp()).collect()
}

fn classify(trace: &[TracePoint]) -> Verdict {
    let vals: Vec<f64> = trace.iter().map(|t| t.value.abs()).collect();
    if vals.iter().any(|v| !v.is_finite() || *v > 1e6) {
        return Verdict::Diverges;
    }
    let mut run = 0;
    for w in vals.windows(2) {
        if w[0] > 0.0 && w[1] >= 1.5 * w[0] {
            run += 1;
            if run >= 4 {
                return Verdict::Diverges;
            }
        } else {
            run = 0;
        }
    }
    if let [.., a, b] = vals.as_slice() {
        if (b - a).abs() <= 1e-6 * b.max(1.0) {
            return Verdict::Converges;
        }
    }
    Verdict::Inconclusive
}

/// Integrates `weight(w)·|f|^power` over the northern cap `gap ∈ [δ, 1]` at
/// each level. The variable is `τ = −ln w`, so
/// `dS = (w(2−w))^{(n−2)/2} w dτ dω`.
fn cap_trace(
    f: &SphereField,
    n: usize,
    levels: &[f64],
    spec: &QuadratureSpec,
    power: f64,
    weight_exp: f64,
) -> Result<Vec<TracePoint>> {
    if levels.iter().any(|d| !(*d > 0.0 && *d < 1.0)) || levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("levels must be decreasing cutoffs in (0, 1)".into()));
    }
    let omega = sphere_rule(n - 1, spec.sphere_order.min(32));
    let mut trace = Vec::with_capacity(levels.len());
    let mut value = 0.0;
    let mut tau_lo = 0.0;
    for (level, &delta) in levels.iter().enumerate() {
        let tau_hi = -delta.ln();
        let rule = gauss_legendre(spec.radial_order, tau_lo, tau_hi)?;
        for (tau, wt) in rule.nodes.iter().zip(&rule.weights) {
            let w = (-tau).exp();
            let half = 0.5 * (n as f64 - 2.0);
            // Logarithms keep w^{weight_exp} from overflowing near the pole.
            let log_jac = (half + 1.0 + weight_exp) * -tau + half * (2.0 - w).ln();
            let mut ring = 0.0;
            for (o, wo) in omega.nodes.iter().zip(&omega.weights) {
                let v = f.eval(&SpherePoint::from_gap(o, w))?.abs();
                if v > 0.0 {
                    ring += wo * (power * v.ln() + log_jac).exp();
                }
            }
            value += wt * ring;
        }
        trace.push(TracePoint { level: level + 1, delta, value });
        tau_lo = tau_hi;
    }
    Ok(trace)
}

/// `∫ |f| (1 − η_{n+1})^{−(n+1−k)/2} dS` over the northern cap, with the
/// pole excised to `gap ≥ δ` at each level.
pub fn existence_check(f: &SphereField, dims: Dimensions, levels: &[f64], spec: &QuadratureSpec) -> Result<VerdictReport> {
    let exp = -0.5 * (dims.n as f64 + 1.0 - dims.k as f64);
    let trace = cap_trace(f, dims.n, levels, spec, 1.0, exp)?;
    Ok(VerdictReport { verdict: classify(&trace), trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpReport {
    /// `(∫ |(1 − η_{n+1})^{k−1−n/p} f|^p dS)^{1/p}` at the finest level.
    pub norm: f64,
    pub report: VerdictReport,
}

/// The weighted Lᵖ norm of the inversion hypothesis, northern cap by
/// refinement levels and southern hemisphere by a fixed rule.
pub fn lp_weight_check(f: &SphereField, p: f64, dims: Dimensions, levels: &[f64], spec: &QuadratureSpec) -> Result<LpReport> {
    let (n, k) = (dims.n as f64, dims.k as f64);
    let upper = n / (k - 1.0);
    if !(p >= 1.0 && p < upper) {
        return Err(Error::POutOfRange { p, upper });
    }
    let a = k - 1.0 - n / p;
    let mut trace = cap_trace(f, dims.n, levels, spec, p, a * p)?;
    // Southern hemisphere φ ∈ [π/2, π], dS = sin^{n−1}φ dφ dω.
    let omega = sphere_rule(dims.n - 1, spec.sphere_order.min(32));
    let rule = gauss_legendre(spec.radial_order, std::f64::consts::FRAC_PI_2, std::f64::consts::PI)?;
    let mut south = 0.0;
    for (phi, wt) in rule.nodes.iter().zip(&rule.weights) {
        let mut ring = 0.0;
        for (o, wo) in omega.nodes.iter().zip(&omega.weights) {
            let eta = SpherePoint::from_polar(o, *phi);
            ring += wo * (eta.gap().powf(a) * f.eval(&eta)?).abs().powf(p);
        }
        south += wt * phi.sin().powi(dims.n as i32 - 1) * ring;
    }
    for t in trace.iter_mut() {
        t.value += south;
    }
    let verdict = classify(&trace);
    let norm = trace.last().map_or(0.0, |t| t.value.powf(1.0 / p));
    Ok(LpReport { norm, report: VerdictReport { verdict, trace } })
}

/// Outcome of sampling the slice transform beyond the threshold `b*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportReport {
    pub cap: CapSpec,
    pub trials: usize,
    /// `max |f|` on a sphere grid.
    pub scale: f64,
    /// `max |𝔖f(τ)|` over planes with `|τ| > b*`.
    pub max_violation: f64,
    /// `max |𝔖f(τ)|` over control planes at `control_dist`.
    pub control_dist: f64,
    pub control_max: f64,
    /// `max_violation ≤ 1e−10·scale`.
    pub holds: bool,
    /// One row per plane: `(dist, value, is_control)`.
    pub rows: Vec<(f64, f64, bool)>,
}

/// Samples `trials` planes with `|τ|` uniform in `(b*, 1)` and `trials`
/// control planes at `|τ| = control_dist`.
pub fn support_experiment(
    f: &SphereField,
    cap: CapSpec,
    dims: Dimensions,
    spec: &QuadratureSpec,
    trials: usize,
    control_dist: f64,
) -> Result<SupportReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut planes: Vec<(SlicePlane, bool)> = Vec::with_capacity(2 * trials);
    for _ in 0..trials {
        let u: f64 = rng.random();
        let dist = cap.b_star + (1.0 - cap.b_star) * u;
        planes.push((random_slice_plane_at(&mut rng, dims, dist), false));
    }
    for _ in 0..trials {
        planes.push((random_slice_plane_at(&mut rng, dims, control_dist), true));
    }
    let values: Vec<f64> = planes
        .par_iter()
        .map(|(tau, _)| slice_transform(f, tau, spec))
        .collect::<Result<_>>()?;
    let grid = sphere_rule(dims.n, 32);
    let mut scale: f64 = 0.0;
    for node in &grid.nodes {
        scale = scale.max(f.eval(&SpherePoint::normalized(node.clone())?)?.abs());
    }
    let (mut max_violation, mut control_max) = (0f64, 0f64);
    let mut rows = Vec::with_capacity(planes.len());
    for ((tau, control), v) in planes.iter().zip(&values) {
        if *control {
            control_max = control_max.max(v.abs());
        } else {
            max_violation = max_violation.max(v.abs());
        }
        rows.push((tau.dist, *v, *control));
    }
    Ok(SupportReport {
        cap,
        trials,
        scale,
        max_violation,
        control_dist,
        control_max,
        holds: max_violation <= 1e-10 * scale,
        rows,
    })
}

/// Reconstructs f from its slice data at `points` inside Ω_b and returns
/// `max |f_rec|`. Small values are consistent with f vanishing on the cap.
pub fn support_reconstruction_probe(
    f: &SphereField,
    cap: CapSpec,
    dims: Dimensions,
    params: &RieszParams,
    spec: &QuadratureSpec,
    points: &[SpherePoint],
) -> Result<f64> {
    let radius = points
        .iter()
        .map(|p| ((2.0 - p.gap()) / p.gap()).sqrt())
        .fold(0.0, f64::max);
    let (f2, s2) = (f.clone(), spec.clone());
    let rec = invert_slice(Arc::new(move |tau: &SlicePlane| slice_transform(&f2, tau, &s2)), dims, params, spec, radius)?;
    let mut worst: f64 = 0.0;
    for p in points.iter().filter(|p| cap.contains(p)) {
        worst = worst.max(rec.eval(p)?.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KPlaneSupportReport {
    pub r: f64,
    pub max_outside: f64,
    pub control_max: f64,
    /// λ > j, the decay hypothesis.
    pub within_hypothesis: bool,
}

/// Samples j-flats with `|ζ|` uniform in `(r, r + 3)` and control flats with
/// `|ζ|` uniform in `[0, r)`.
pub fn kplane_support_probe(
    g: &PlaneField,
    r: f64,
    n: usize,
    j: usize,
    spec: &QuadratureSpec,
    trials: usize,
) -> Result<KPlaneSupportReport> {
    if j == 0 || j >= n {
        return Err(Error::InvalidDimensions(format!("need 1 <= j < n, got j={j}, n={n}")));
    }
    let within = g.decay_exponent > j as f64;
    if !within {
        log::warn!("decay exponent {} <= {j}: outside theorem hypothesis", g.decay_exponent);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut flats = Vec::with_capacity(2 * trials);
    for _ in 0..trials {
        let d = r + 3.0 * rng.random::<f64>();
        flats.push((random_flat_at(&mut rng, n, j, d.max(r * (1.0 + 1e-12))), false));
    }
    for _ in 0..trials {
        let d = r * rng.random::<f64>();
        flats.push((random_flat_at(&mut rng, n, j, d), true));
    }
    let vals: Vec<f64> = flats.par_iter().map(|(z, _)| radon_john(g, z, spec)).collect::<Result<_>>()?;
    let (mut outside, mut control) = (0f64, 0f64);
    for ((_, c), v) in flats.iter().zip(&vals) {
        if *c {
            control = control.max(v.abs());
        } else {
            outside = outside.max(v.abs());
        }
    }
    Ok(KPlaneSupportReport { r, max_outside: outside, control_max: control, within_hypothesis: within })
}

/// `exp(1 − 1/(1−|x|²/r²))` inside `|x| < r`, zero outside; peak 1.
pub fn radial_bump(r: f64) -> PlaneField {
    PlaneField::new(move |x| {
        let q = x.iter().map(|c| c * c).sum::<f64>() / (r * r);
        if q < 1.0 {
            (1.0 - 1.0 / (1.0 - q)).exp()
        } else {
            0.0
        }
    })
    .with_decay(f64::INFINITY)
}
