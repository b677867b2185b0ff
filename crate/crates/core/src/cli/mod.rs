//! Command-line driver: scenes, experiment orchestration, CSV output.
//!
//! Every run writes a CSV whose `#` header echoes the full configuration.
//! Commands with a tolerance end in `# result: PASS ...` or `# result: FAIL ...`.
//! Exit codes: 0 ok, 1 tolerance failure, 2 usage or input error, 3
//! numerical error.

pub mod scene;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{default_levels, existence_check, lp_weight_check, support_experiment, CapSpec, Verdict, VerdictReport};
use crate::error::{Error, Result};
use crate::geometry::{random_orthonormal, random_slice_plane, random_slice_plane_at, slice_plane_from_section, Dimensions, FlatSpec, SlicePlane};
use crate::inversion::{invert_radon, invert_slice, square_grid, InversionReport, RieszParams};
use crate::linalg::Coords;
use crate::quadrature::QuadratureSpec;
use crate::stereo::{nu_inverse, SpherePoint};
use crate::transforms::{dual_transform_with, factorization_check, radon_john, slice_transform, trace_of, OrientationRule};
use crate::zonal::{abel_residual, plane_at_trace_distance, weighted_sup_error, zonal_forward, zonal_invert};
use scene::{Family, SceneSpec};

const RANDOM_PLANES: &str = "Random planes: the trace offset is t·θ with t = tan U(0, π/2 − 0.01) \
and (ζ₀, θ) the columns of a Haar-random orthonormal frame from the seeded generator \
(ChaCha8, seed --seed). A fixed --dist replaces t by dist/√(1 − dist²).";

#[derive(Debug, Parser)]
#[command(name = "sphslice", version, about = "Spherical slice transform: forward maps, factorization checks and inversion", after_help = RANDOM_PLANES)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Sphere dimension n of Sⁿ ⊂ ℝⁿ⁺¹.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Plane dimension k, 2 ≤ k ≤ n.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true, default_value_t = 64)]
    pub sphere_order: usize,
    #[arg(long, global = true, default_value_t = 128)]
    pub radial_order: usize,
    /// Truncation radius for the truncated radial map.
    #[arg(long, global = true, default_value_t = 40.0)]
    pub cutoff: f64,
    /// Use the truncated radial map instead of the tangent map.
    #[arg(long, global = true)]
    pub truncated: bool,
    /// Innermost hypersingular cutoff ε.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub eps: f64,
    /// Outer truncation R of the hypersingular integral.
    #[arg(long, global = true, default_value_t = 30.0)]
    pub outer: f64,
    /// Finite-difference order ℓ (default: k for odd order, k + 1 for even).
    #[arg(long, global = true)]
    pub ell: Option<usize>,
    #[arg(long, global = true, default_value_t = 64)]
    pub hs_radial: usize,
    #[arg(long, global = true, default_value_t = 32)]
    pub hs_angular: usize,
    /// Orientations averaged by the dual transform.
    #[arg(long, global = true, default_value_t = 256)]
    pub orientations: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tolerance for the PASS/FAIL summary (command-specific default).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Scene file of `key = value` lines.
    #[arg(long, global = true, conflicts_with = "family")]
    pub scene: Option<PathBuf>,
    /// Built-in family: constant, zonal_gaussian, cap_bump,
    /// first_harmonic_weighted, custom_profile_csv, pole_power, gaussian.
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Family parameter `name=value`; repeatable.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Profile CSV for custom_profile_csv.
    #[arg(long, global = true)]
    pub profile: Option<PathBuf>,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("parameter {k} needs a number, got {v:?}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Args)]
pub struct PlaneSource {
    /// Number of random planes.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Fix the distance |τ| ∈ [0, 1) of every random plane.
    #[arg(long)]
    pub dist: Option<f64>,
    /// Read planes from a CSV with columns v1..vn and b{i}_{c} (as written
    /// by `forward`) instead of drawing random ones.
    #[arg(long)]
    pub planes: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Slice,
    Radon,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Slice transform of a sphere scene over a set of planes.
    Forward(PlaneSource),
    /// Radon-John transform of the plane function of a scene over the
    /// traces of a set of planes.
    Radon(PlaneSource),
    /// Both sides of the factorization through the Radon-John transform.
    FactorCheck(PlaneSource),
    /// Zonal closed form F₀(t) against the direct slice transform.
    ZonalForward {
        #[arg(long, default_value_t = 4.0)]
        t_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Abel inversion of zonal data back to the profile f₀.
    ZonalInvert {
        /// CSV with columns t,value (as written by `zonal-forward`); data
        /// are computed from the scene if absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        s_min: f64,
        #[arg(long, default_value_t = 10.0)]
        s_max: f64,
    },
    /// Reconstruct from computed data and compare with the scene.
    Invert {
        #[arg(long, value_enum, default_value_t = Mode::Slice)]
        mode: Mode,
        /// Grid side (radon) or number of polar angles (slice).
        #[arg(long)]
        grid: Option<usize>,
        /// Half-width of the square grid in radon mode.
        #[arg(long, default_value_t = 2.0)]
        extent: f64,
        /// Slice mode: azimuths per polar angle.
        #[arg(long, default_value_t = 16)]
        azimuths: usize,
        /// Slice mode: largest η_{n+1} evaluated.
        #[arg(long, default_value_t = 0.99)]
        cap: f64,
    },
    /// Slices beyond the support threshold b* = √((1+b)/2) must vanish.
    Support {
        /// Cap parameter b (default: the scene's b, else 0).
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0.5)]
        control_dist: f64,
    },
    /// Existence of the slice transform near the pole, or with --lp the
    /// weighted Lᵖ norm, by refinement levels.
    Existence {
        #[arg(long, default_value = "converges")]
        expect: String,
        #[arg(long)]
        lp: Option<f64>,
    },
    /// Dual transform of the Radon-John data on a grid.
    Dual {
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long, default_value_t = 2.0)]
        extent: f64,
    },
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub quadrature: QuadratureSpec,
    pub ell: Option<usize>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self> {
        let quadrature = QuadratureSpec {
            sphere_order: g.sphere_order,
            radial_order: g.radial_order,
            radial_cutoff: g.cutoff,
            radial_map: if g.truncated { crate::quadrature::RadialMap::Truncated } else { crate::quadrature::RadialMap::Tangent },
            hs_epsilon: g.eps,
            hs_outer: g.outer,
            hs_radial_order: g.hs_radial,
            hs_angular_order: g.hs_angular,
            orientation_samples: g.orientations,
            seed: g.seed,
            ..Default::default()
        };
        quadrature.validate()?;
        if let Some(t) = g.tol {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter("--tol must be >= 0".into()));
            }
        }
        Ok(Self { quadrature, ell: g.ell, seed: g.seed, output_path: g.out.clone(), tol: g.tol })
    }

    pub fn riesz(&self, k_order: usize) -> Result<RieszParams> {
        RieszParams::from_spec(k_order, self.ell, &self.quadrature)
    }

    fn describe(&self) -> String {
        let q = &self.quadrature;
        format!(
            "sphere_order={} radial_order={} radial_map={:?} cutoff={} eps={} outer={} ell={} hs_radial={} hs_angular={} orientations={} cache_spacing={} seed={}",
            q.sphere_order,
            q.radial_order,
            q.radial_map,
            q.radial_cutoff,
            q.hs_epsilon,
            q.hs_outer,
            self.ell.map_or("auto".to_string(), |l| l.to_string()),
            q.hs_radial_order,
            q.hs_angular_order,
            q.orientation_samples,
            q.dual_cache_spacing,
            self.seed
        )
    }
}

/// Error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_)
            | Error::InvalidParameter(_)
            | Error::InvalidDimensions(_)
            | Error::DimensionMismatch { .. }
            | Error::POutOfRange { .. }
            | Error::Io(_) => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, message: msg.into() }
}

/// Parses the command line, runs it and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs a parsed command; `Ok` carries 0 or 1.
pub fn run(cli: &Cli) -> std::result::Result<i32, Failure> {
    let cfg = RunConfig::from_args(&cli.global)?;
    let scene = resolve_scene(&cli.global)?;
    let mut out = Csv::new(command_name(&cli.command), &scene, &cfg);
    let verdict = match &cli.command {
        Command::Forward(src) => cmd_forward(&scene, src, &cfg, &mut out)?,
        Command::Radon(src) => cmd_radon(&scene, src, &cfg, &mut out)?,
        Command::FactorCheck(src) => cmd_factor_check(&scene, src, &cfg, &mut out)?,
        Command::ZonalForward { t_max, points } => cmd_zonal_forward(&scene, *t_max, *points, &cfg, &mut out)?,
        Command::ZonalInvert { input, s_min, s_max } => {
            cmd_zonal_invert(&scene, input.as_ref(), *s_min, *s_max, &cfg, &mut out)?
        }
        Command::Invert { mode, grid, extent, azimuths, cap } => match mode {
            Mode::Radon => cmd_invert_radon(&scene, grid.unwrap_or(41), *extent, &cfg, &mut out)?,
            Mode::Slice => cmd_invert_slice(&scene, grid.unwrap_or(24), *azimuths, *cap, &cfg, &mut out)?,
        },
        Command::Support { b, count, control_dist } => cmd_support(&scene, *b, *count, *control_dist, &cfg, &mut out)?,
        Command::Existence { expect, lp } => cmd_existence(&scene, expect, *lp, &cfg, &mut out)?,
        Command::Dual { grid, extent } => cmd_dual(&scene, *grid, *extent, &cfg, &mut out)?,
    };
    if let Some((pass, summary)) = &verdict {
        let line = format!("{} {summary}", if *pass { "PASS" } else { "FAIL" });
        out.comment(&format!("result: {line}"));
        eprintln!("{line}");
    }
    out.finish(cfg.output_path.as_ref())?;
    Ok(match verdict {
        Some((false, _)) => 1,
        _ => 0,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Forward(_) => "forward",
        Command::Radon(_) => "radon",
        Command::FactorCheck(_) => "factor-check",
        Command::ZonalForward { .. } => "zonal-forward",
        Command::ZonalInvert { .. } => "zonal-invert",
        Command::Invert { .. } => "invert",
        Command::Support { .. } => "support",
        Command::Existence { .. } => "existence",
        Command::Dual { .. } => "dual",
    }
}

fn resolve_scene(g: &GlobalArgs) -> std::result::Result<SceneSpec, Failure> {
    if let Some(path) = &g.scene {
        let s = SceneSpec::load(path)?;
        for (flag, given, have) in [("--n", g.n, s.dims.n), ("--k", g.k, s.dims.k)] {
            if given.is_some_and(|v| v != have) {
                return Err(usage(format!("{flag} conflicts with the scene file value {have}")));
            }
        }
        if !g.params.is_empty() {
            let mut params = s.params.clone();
            params.extend(g.params.iter().cloned());
            return Ok(SceneSpec::new(s.family, params, s.profile, s.dims)?);
        }
        return Ok(s);
    }
    let family: Family = g.family.as_deref().unwrap_or("constant").parse()?;
    let dims = Dimensions::new(g.n.unwrap_or(3), g.k.unwrap_or(2))?;
    let params: BTreeMap<String, f64> = g.params.iter().cloned().collect();
    Ok(SceneSpec::new(family, params, g.profile.clone(), dims)?)
}

/// CSV accumulated in memory and written once, in row order.
struct Csv {
    text: String,
}

impl Csv {
    fn new(command: &str, scene: &SceneSpec, cfg: &RunConfig) -> Self {
        let mut c = Csv { text: String::new() };
        c.comment(&format!("sphslice {} {command}", env!("CARGO_PKG_VERSION")));
        c.comment(&format!("scene: {}", scene.describe()));
        c.comment(&format!("config: {}", cfg.describe()));
        c.comment(&format!("tol: {}", cfg.tol.map_or("default".to_string(), |t| t.to_string())));
        c
    }

    fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    fn header(&mut self, cols: &[String]) {
        self.text.push_str(&cols.join(","));
        self.text.push('\n');
    }

    fn row(&mut self, vals: impl IntoIterator<Item = String>) {
        let v: Vec<String> = vals.into_iter().collect();
        self.text.push_str(&v.join(","));
        self.text.push('\n');
    }

    fn finish(self, path: Option<&PathBuf>) -> Result<()> {
        match path {
            Some(p) => std::fs::write(p, self.text.as_bytes()).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
            None => {
                let mut o = std::io::stdout().lock();
                o.write_all(self.text.as_bytes())?;
                Ok(o.flush()?)
            }
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn cols(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Column names describing a trace flat of dimension j in ℝⁿ.
fn plane_cols(n: usize, j: usize) -> Vec<String> {
    let mut c = cols("v", n);
    for i in 1..=j {
        c.extend((1..=n).map(|a| format!("b{i}_{a}")));
    }
    c.push("t".into());
    c.push("dist".into());
    c
}

fn plane_vals(zeta: &FlatSpec) -> Vec<String> {
    let mut v: Vec<String> = zeta.offset().iter().map(|x| num(*x)).collect();
    for b in zeta.basis() {
        v.extend(b.iter().map(|x| num(*x)));
    }
    let t = zeta.distance();
    v.push(num(t));
    v.push(num(t / (1.0 + t * t).sqrt()));
    v
}

fn planes(src: &PlaneSource, dims: Dimensions, cfg: &RunConfig) -> std::result::Result<Vec<SlicePlane>, Failure> {
    if let Some(path) = &src.planes {
        return Ok(read_planes(path, dims)?);
    }
    if src.count == 0 {
        return Err(usage("--count must be positive"));
    }
    if let Some(d) = src.dist {
        if !(0.0..1.0).contains(&d) {
            return Err(usage(format!("--dist {d} not in [0, 1)")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..src.count)
        .map(|_| match src.dist {
            Some(d) => random_slice_plane_at(&mut rng, dims, d),
            None => random_slice_plane(&mut rng, dims, 0.01),
        })
        .collect())
}

fn read_planes(path: &PathBuf, dims: Dimensions) -> Result<Vec<SlicePlane>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column {name}", path.display())))
    };
    let (n, j) = (dims.n, dims.flat_dim());
    let v_idx: Vec<usize> = (1..=n).map(|i| find(&format!("v{i}"))).collect::<Result<_>>()?;
    let b_idx: Vec<Vec<usize>> = (1..=j)
        .map(|i| (1..=n).map(|a| find(&format!("b{i}_{a}"))).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("{}: bad number in row {}", path.display(), line + 1)))
        };
        let v: Coords = v_idx.iter().map(|&i| get(i)).collect::<Result<_>>()?;
        let basis: Vec<Coords> = b_idx
            .iter()
            .map(|row| row.iter().map(|&i| get(i)).collect::<Result<Coords>>())
            .collect::<Result<_>>()?;
        let zeta = FlatSpec::new(&basis, &v)?;
        if (zeta.distance() - crate::linalg::norm(&v)).abs() > 1e-9 * (1.0 + zeta.distance()) {
            return Err(Error::Parse(format!("{}: row {} offset is not orthogonal to the basis", path.display(), line + 1)));
        }
        out.push(slice_plane_from_section(zeta));
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("{}: no planes", path.display())));
    }
    Ok(out)
}

type Summary = Option<(bool, String)>;
type CmdResult = std::result::Result<Summary, Failure>;

fn cmd_forward(scene: &SceneSpec, src: &PlaneSource, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    let f = scene.sphere_field()?;
    let taus = planes(src, scene.dims, cfg)?;
    let values: Vec<f64> = taus.par_iter().map(|t| slice_transform(&f, t, &cfg.quadrature)).collect::<Result<_>>()?;
    let mut h = plane_cols(scene.dims.n, scene.dims.flat_dim());
    h.push("value".into());
    out.header(&h);
    for (tau, v) in taus.iter().zip(values) {
        let mut r = plane_vals(tau.section());
        r.push(num(v));
        out.row(r);
    }
    Ok(None)
}

fn cmd_radon(scene: &SceneSpec, src: &PlaneSource, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    let g = scene.plane_field()?;
    let flats: Vec<FlatSpec> = planes(src, scene.dims, cfg)?.iter().map(trace_of).collect();
    let values: Vec<f64> = flats.par_iter().map(|z| radon_john(&g, z, &cfg.quadrature)).collect::<Result<_>>()?;
    let mut h = plane_cols(scene.dims.n, scene.dims.flat_dim());
    h.push("value".into());
    out.header(&h);
    for (z, v) in flats.iter().zip(values) {
        let mut r = plane_vals(z);
        r.push(num(v));
        out.row(r);
    }
    Ok(None)
}

fn cmd_factor_check(scene: &SceneSpec, src: &PlaneSource, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    let f = scene.sphere_field()?;
    let taus = planes(src, scene.dims, cfg)?;
    let checks: Vec<_> = taus.par_iter().map(|t| factorization_check(&f, t, &cfg.quadrature)).collect::<Result<_>>()?;
    let mut h = plane_cols(scene.dims.n, scene.dims.flat_dim());
    h.extend(["lhs", "rhs", "abs_diff", "rel_diff"].map(String::from));
    out.header(&h);
    let mut worst: f64 = 0.0;
    for (tau, c) in taus.iter().zip(&checks) {
        worst = worst.max(c.rel_diff());
        let mut r = plane_vals(tau.section());
        r.extend([num(c.lhs), num(c.rhs), num(c.abs_diff), num(c.rel_diff())]);
        out.row(r);
    }
    let tol = cfg.tol.unwrap_or(1e-6);
    Ok(Some((worst <= tol, format!("max_rel_diff={} tol={tol} planes={}", num(worst), checks.len()))))
}

fn cmd_zonal_forward(scene: &SceneSpec, t_max: f64, points: usize, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    if points < 2 || !(t_max > 0.0) {
        return Err(usage("zonal-forward needs --points >= 2 and --t-max > 0"));
    }
    let p = scene.zonal_profile()?;
    let f = scene.sphere_field()?;
    let ts: Vec<f64> = (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect();
    let rows: Vec<(f64, f64)> = ts
        .par_iter()
        .map(|&t| {
            let a = zonal_forward(&p, t, scene.dims, &cfg.quadrature)?;
            let b = slice_transform(&f, &plane_at_trace_distance(t, scene.dims)?, &cfg.quadrature)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    out.header(&["t", "value", "direct", "rel_diff"].map(String::from));
    let mut worst: f64 = 0.0;
    for (t, (a, b)) in ts.iter().zip(rows) {
        let rel = (a - b).abs() / b.abs().max(1e-300);
        worst = worst.max(rel);
        out.row([num(*t), num(a), num(b), num(rel)]);
    }
    let tol = cfg.tol.unwrap_or(1e-6);
    Ok(Some((worst <= tol, format!("max_rel_diff={} tol={tol}", num(worst)))))
}

/// Zonal data `F₀` sampled at increasing `t ≥ 0`, interpolated by 4-point
/// Lagrange in `u = t²` (F₀ is even in t) and continued past the last
/// sample by the power law through the last two samples.
struct SampledData {
    u: Vec<f64>,
    v: Vec<f64>,
}

impl SampledData {
    fn eval(&self, t: f64) -> f64 {
        let (u, v) = (&self.u, &self.v);
        let x = t * t;
        let last = u.len() - 1;
        if x > u[last] {
            let (a, b) = (v[last - 1], v[last]);
            if a * b <= 0.0 || u[last - 1] <= 0.0 {
                return 0.0;
            }
            let p = (b / a).ln() / (u[last] / u[last - 1]).ln();
            return if p < 0.0 { b * (x / u[last]).powf(p) } else { 0.0 };
        }
        let hi = u.partition_point(|&ui| ui < x).clamp(2, last.saturating_sub(1).max(2));
        let lo = hi.saturating_sub(2).min(u.len().saturating_sub(4));
        let idx: Vec<usize> = (lo..(lo + 4).min(u.len())).collect();
        let mut total = 0.0;
        for &i in &idx {
            let mut w = 1.0;
            for &j in &idx {
                if j != i {
                    w *= (x - u[j]) / (u[i] - u[j]);
                }
            }
            total += w * v[i];
        }
        total
    }
}

fn read_zonal_data(path: &PathBuf) -> Result<SampledData> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column {name}", path.display())))
    };
    let (ti, vi) = (col("t")?, col("value")?);
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
        match (parse(ti), parse(vi)) {
            (Some(t), Some(val)) if t >= 0.0 && val.is_finite() => {
                u.push(t * t);
                v.push(val);
            }
            _ => return Err(Error::Parse(format!("{}: bad row", path.display()))),
        }
    }
    if u.len() < 4 || u.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parse(format!("{}: need at least 4 rows with increasing t >= 0", path.display())));
    }
    Ok(SampledData { u, v })
}

fn cmd_zonal_invert(
    scene: &SceneSpec,
    input: Option<&PathBuf>,
    s_min: f64,
    s_max: f64,
    cfg: &RunConfig,
    out: &mut Csv,
) -> CmdResult {
    if !(s_min > 0.0 && s_min < s_max) {
        return Err(usage("zonal-invert needs 0 < --s-min < --s-max"));
    }
    let dims = scene.dims;
    let spec = &cfg.quadrature;
    let tol = cfg.tol.unwrap_or(1e-3);
    match input {
        Some(path) => {
            let data = read_zonal_data(path)?;
            let big = |t: f64| data.eval(t);
            let rec = zonal_invert(&big, dims, spec)?;
            let (s, v) = rec.samples().expect("sampled");
            out.header(&["s", "recovered"].map(String::from));
            for (si, vi) in s.iter().zip(v) {
                out.row([num(*si), num(*vi)]);
            }
            let ts: Vec<f64> = data.u.iter().map(|u| u.sqrt()).collect();
            let res = abel_residual(&rec, &big, &ts, dims, spec)?;
            Ok(Some((res <= tol, format!("abel_residual={} tol={tol}", num(res)))))
        }
        None => {
            let p = scene.zonal_profile()?;
            let big = |t: f64| zonal_forward(&p, t, dims, spec).unwrap_or(f64::NAN);
            let rec = zonal_invert(&big, dims, spec)?;
            let (s, v) = rec.samples().expect("sampled");
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::ExistenceFailed("zonal data not finite".into()).into());
            }
            out.header(&["s", "recovered", "truth", "abs_err"].map(String::from));
            for (si, vi) in s.iter().zip(v) {
                let t = p.eval(*si);
                out.row([num(*si), num(*vi), num(t), num((vi - t).abs())]);
            }
            let truth = |s: f64| p.eval(s);
            let err = weighted_sup_error(&rec, &truth, s_min, s_max);
            Ok(Some((err <= tol, format!("weighted_sup_error={} on [{s_min},{s_max}] tol={tol}", num(err)))))
        }
    }
}

fn cmd_invert_radon(scene: &SceneSpec, side: usize, extent: f64, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    if side == 0 || !(extent > 0.0) {
        return Err(usage("invert needs --grid >= 1 and --extent > 0"));
    }
    let n = scene.dims.n;
    let spec = cfg.quadrature.clone();
    let params = cfg.riesz(scene.dims.k - 1)?;
    let g = scene.plane_field()?;
    let points: Vec<Coords> = square_grid(side, -extent, extent)
        .into_iter()
        .map(|p| {
            let mut c: Coords = crate::linalg::zeros(n);
            c[0] = p[0];
            c[1] = p[1];
            c
        })
        .collect();
    let radius = points.iter().map(|p| crate::linalg::norm(p)).fold(0.0, f64::max);
    let (g2, s2) = (g.clone(), spec.clone());
    let phi = Arc::new(move |z: &FlatSpec| radon_john(&g2, z, &s2));
    let rec = invert_radon(phi, n, &params, &spec, radius)?;
    let report = InversionReport::evaluate(&|x| rec.eval(x), &|x| g.eval(x), points, cfg.describe())?;
    write_report(out, &report, "x");
    let tol = cfg.tol.unwrap_or(0.02);
    Ok(Some((
        report.residual_linf <= tol,
        format!("residual_linf={} residual_l2={} tol={tol}", num(report.residual_linf), num(report.residual_l2)),
    )))
}

fn write_report(out: &mut Csv, report: &InversionReport, prefix: &str) {
    let dim = report.points.first().map_or(0, |p| p.len());
    let mut h = cols(prefix, dim);
    h.extend(["value", "reference", "abs_err"].map(String::from));
    out.header(&h);
    for ((p, v), r) in report.points.iter().zip(&report.values).zip(&report.reference) {
        let mut row: Vec<String> = p.iter().map(|x| num(*x)).collect();
        row.extend([num(*v), num(*r), num((v - r).abs())]);
        out.row(row);
    }
}

/// Polar angles from the cap edge to the south pole; azimuths equispaced
/// on S¹ and seeded-random on higher spheres.
fn sphere_points(n: usize, polar: usize, azimuths: usize, cap: f64, seed: u64) -> Vec<SpherePoint> {
    let phi_min = cap.clamp(-1.0, 1.0).acos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Coords> = (0..azimuths)
        .map(|j| {
            if n == 2 {
                let a = 2.0 * PI * (j as f64 + 0.25) / azimuths as f64;
                Coords::from_slice(&[a.cos(), a.sin()])
            } else {
                random_orthonormal(&mut rng, n, 1).remove(0)
            }
        })
        .collect();
    let mut out = Vec::with_capacity(polar * azimuths);
    for i in 0..polar {
        let phi = if polar > 1 { phi_min + (PI - phi_min) * i as f64 / (polar - 1) as f64 } else { phi_min };
        for d in &dirs {
            out.push(SpherePoint::from_polar(d, phi));
        }
    }
    out
}

fn cmd_invert_slice(scene: &SceneSpec, polar: usize, azimuths: usize, cap: f64, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    if polar == 0 || azimuths == 0 || !(cap > -1.0 && cap < 1.0) {
        return Err(usage("invert --mode slice needs --grid >= 1, --azimuths >= 1 and --cap in (-1, 1)"));
    }
    let dims = scene.dims;
    let spec = cfg.quadrature.clone();
    let params = cfg.riesz(dims.k - 1)?;
    let f = scene.sphere_field()?;
    let points = sphere_points(dims.n, polar, azimuths, cap, cfg.seed);
    let mut radius: f64 = 0.0;
    for p in &points {
        radius = radius.max(nu_inverse(p)?.norm());
    }
    let (f2, s2) = (f.clone(), spec.clone());
    let data = Arc::new(move |tau: &SlicePlane| slice_transform(&f2, tau, &s2));
    let rec = invert_slice(data, dims, &params, &spec, radius)?;
    let coords: Vec<Coords> = points.iter().map(|p| Coords::from_slice(p.coords())).collect();
    let report = InversionReport::evaluate(
        &|c| rec.eval(&SpherePoint::new(Coords::from_slice(c))?),
        &|c| f.eval(&SpherePoint::new(Coords::from_slice(c))?),
        coords,
        cfg.describe(),
    )?;
    write_report(out, &report, "eta");
    let tol = cfg.tol.unwrap_or(0.05);
    Ok(Some((
        report.residual_linf <= tol,
        format!("residual_linf={} residual_l2={} tol={tol}", num(report.residual_linf), num(report.residual_l2)),
    )))
}

fn cmd_support(scene: &SceneSpec, b: Option<f64>, count: usize, control: f64, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    if count == 0 || !(0.0..1.0).contains(&control) {
        return Err(usage("support needs --count >= 1 and --control-dist in [0, 1)"));
    }
    let b = b.unwrap_or_else(|| scene.params.get("b").copied().unwrap_or(0.0));
    let cap = CapSpec::new(b)?;
    let f = scene.sphere_field()?;
    let r = support_experiment(&f, cap, scene.dims, &cfg.quadrature, count, control)?;
    out.header(&["dist", "value", "control"].map(String::from));
    for (d, v, c) in &r.rows {
        out.row([num(*d), num(*v), (*c as u8).to_string()]);
    }
    let tol = cfg.tol.unwrap_or(1e-10);
    let pass = r.max_violation <= tol * r.scale;
    Ok(Some((
        pass,
        format!(
            "b_star={} max_beyond={} scale={} control_max={} tol={tol}",
            num(cap.b_star),
            num(r.max_violation),
            num(r.scale),
            num(r.control_max)
        ),
    )))
}

fn cmd_existence(scene: &SceneSpec, expect: &str, lp: Option<f64>, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    let want: Verdict = expect.parse()?;
    let f = scene.sphere_field()?;
    let levels = default_levels();
    let (report, extra): (VerdictReport, String) = match lp {
        Some(p) => {
            let r = lp_weight_check(&f, p, scene.dims, &levels, &cfg.quadrature)?;
            (r.report, format!(" p={p} norm={}", num(r.norm)))
        }
        None => (existence_check(&f, scene.dims, &levels, &cfg.quadrature)?, String::new()),
    };
    out.header(&["level", "delta", "value"].map(String::from));
    for t in &report.trace {
        out.row([t.level.to_string(), num(t.delta), num(t.value)]);
    }
    Ok(Some((
        report.verdict == want,
        format!("verdict={} expected={}{extra}", report.verdict.as_str(), want.as_str()),
    )))
}

fn cmd_dual(scene: &SceneSpec, side: usize, extent: f64, cfg: &RunConfig, out: &mut Csv) -> CmdResult {
    if side == 0 || !(extent > 0.0) {
        return Err(usage("dual needs --grid >= 1 and --extent > 0"));
    }
    let n = scene.dims.n;
    let g = scene.plane_field()?;
    let spec = &cfg.quadrature;
    let rule = OrientationRule::new(n, scene.dims.flat_dim(), spec.orientation_samples, spec.seed)?;
    let phi = |z: &FlatSpec| radon_john(&g, z, spec);
    let points: Vec<Coords> = square_grid(side, -extent, extent)
        .into_iter()
        .map(|p| {
            let mut c: Coords = crate::linalg::zeros(n);
            c[0] = p[0];
            c[1] = p[1];
            c
        })
        .collect();
    let values: Vec<f64> = points.par_iter().map(|x| dual_transform_with(&phi, x, &rule)).collect::<Result<_>>()?;
    let mut h = cols("x", n);
    h.push("value".into());
    out.header(&h);
    for (p, v) in points.iter().zip(values) {
        let mut row: Vec<String> = p.iter().map(|x| num(*x)).collect();
        row.push(num(v));
        out.row(row);
    }
    Ok(None)
}
