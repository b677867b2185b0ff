//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass a criterion number to run only that one.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smallvec::smallvec;

use sphslice::analysis::{existence_check, default_levels, support_experiment, CapSpec, Verdict};
use sphslice::cli::scene::{Family, SceneSpec, SPHERE_FAMILIES};
use sphslice::geometry::{make_flat, random_orthonormal, random_slice_plane, random_slice_plane_at, Dimensions, FlatSpec, SlicePlane};
use sphslice::inversion::{coeff_b_l, coeff_c, coeff_d, invert_radon, invert_slice, square_grid, InversionReport, RieszParams};
use sphslice::linalg::Coords;
use sphslice::quadrature::{sphere_area, QuadratureSpec};
use sphslice::stereo::{nu_inverse, SpherePoint};
use sphslice::transforms::{factorization_check, radon_john, slice_transform, PlaneField};
use sphslice::zonal::{plane_at_trace_distance, weighted_sup_error, zonal_forward, zonal_invert, ZonalProfile};

struct Outcome {
    pass: bool,
    detail: String,
}

fn dims(n: usize, k: usize) -> Dimensions {
    Dimensions::new(n, k).unwrap()
}

const ADMISSIBLE: [(usize, usize); 3] = [(2, 2), (3, 2), (3, 3)];

fn factorization_identity() -> Outcome {
    let spec = QuadratureSpec::default();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for (n, k) in ADMISSIBLE {
        let d = dims(n, k);
        for fam in SPHERE_FAMILIES {
            let f = SceneSpec::builtin(fam, d).sphere_field().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + 10 * n as u64 + k as u64);
            for _ in 0..50 {
                let tau = random_slice_plane(&mut rng, d, 0.01);
                let c = factorization_check(&f, &tau, &spec).unwrap();
                if c.rel_diff() > worst {
                    worst = c.rel_diff();
                    at = format!("n={n} k={k} {fam} |τ|={:.4}", tau.dist);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-6 && secs < 120.0,
        detail: format!("max rel diff {worst:.3e} (≤ 1e-6) at {at}; {secs:.1}s (< 120s)"),
    }
}

fn closed_form_slices() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let one = ZonalProfile::new(|_| 1.0);
    let f = SceneSpec::builtin(Family::Constant, dims(2, 2)).sphere_field().unwrap();
    for (n, k) in ADMISSIBLE {
        let d = dims(n, k);
        for dist in [0.0, 0.2, 0.5, 0.6, 0.8, 0.95, 0.99] {
            let want = sphere_area(k - 1) * (1.0f64 - dist * dist).powf(0.5 * (k as f64 - 1.0));
            let tau = random_slice_plane_at(&mut rng, d, dist);
            worst = worst.max((slice_transform(&f, &tau, &spec).unwrap() - want).abs());
            let t = dist / (1.0 - dist * dist).sqrt();
            worst = worst.max((zonal_forward(&one, t, d, &spec).unwrap() - want).abs());
        }
    }
    Outcome { pass: worst <= 1e-8, detail: format!("max abs error {worst:.3e} (≤ 1e-8)") }
}

fn zonal_formula() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for k in [2, 3] {
        let d = dims(3, k);
        let p = SceneSpec::builtin(Family::ZonalGaussian, d).zonal_profile().unwrap();
        let f = SceneSpec::builtin(Family::ZonalGaussian, d).sphere_field().unwrap();
        for i in 0..20 {
            let t = 0.05 + 3.95 * i as f64 / 19.0;
            let a = zonal_forward(&p, t, d, &spec).unwrap();
            let b = slice_transform(&f, &plane_at_trace_distance(t, d).unwrap(), &spec).unwrap();
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    Outcome { pass: worst <= 1e-6, detail: format!("max rel diff {worst:.3e} over 20 t × k∈{{2,3}} (≤ 1e-6)") }
}

fn zonal_round_trip() -> Outcome {
    let spec = QuadratureSpec::default();
    let start = Instant::now();
    type Prof = fn(f64) -> f64;
    let profiles: [(&str, Prof); 3] = [
        ("exp(-s^2)", |s| (-s * s).exp()),
        ("(1+s^2)^-2", |s| (1.0 + s * s).powi(-2)),
        ("s^2 exp(-s^2)", |s| s * s * (-s * s).exp()),
    ];
    let mut worst: f64 = 0.0;
    let mut at = "";
    for k in [2, 3] {
        let d = dims(3, k);
        for (name, p0) in profiles {
            let p = ZonalProfile::new(p0);
            let big = |t: f64| zonal_forward(&p, t, d, &spec).unwrap();
            let r = zonal_invert(&big, d, &spec).unwrap();
            let e = weighted_sup_error(&r, &p0, 0.1, 10.0);
            if e > worst {
                worst = e;
                at = name;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-3 && secs < 30.0,
        detail: format!("max weighted sup error {worst:.3e} ({at}) on s∈[0.1,10] (≤ 1e-3); {secs:.1}s (< 30s)"),
    }
}

fn radon_inversion() -> Outcome {
    let spec = QuadratureSpec::default();
    let start = Instant::now();
    let params = RieszParams::from_spec(1, None, &spec).unwrap();
    let g = PlaneField::gaussian(smallvec![0.0, 0.0], 1.0);
    let (g2, s2) = (g.clone(), spec.clone());
    let phi = Arc::new(move |z: &FlatSpec| radon_john(&g2, z, &s2));
    let rec = invert_radon(phi, 2, &params, &spec, 2.0 * 2f64.sqrt()).unwrap();
    let report = InversionReport::evaluate(
        &|x| rec.eval(x),
        &|x| g.eval(x),
        square_grid(41, -2.0, 2.0),
        String::new(),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: report.residual_linf <= 0.02 && secs < 600.0,
        detail: format!("relative sup error {:.3e} on 41×41 grid (≤ 0.02); {secs:.1}s (< 600s)", report.residual_linf),
    }
}

/// Points of S² with η₃ ≤ 0.99: 24 polar angles × 16 azimuths.
fn sphere_points_outside_cap() -> Vec<SpherePoint> {
    let phi_min = 0.99f64.acos();
    let mut out = Vec::new();
    for i in 0..24 {
        let phi = phi_min + (PI - phi_min) * i as f64 / 23.0;
        for j in 0..16 {
            let a = 2.0 * PI * (j as f64 + 0.25) / 16.0;
            out.push(SpherePoint::from_polar(&[a.cos(), a.sin()], phi));
        }
    }
    out
}

fn slice_inversion() -> Outcome {
    let spec = QuadratureSpec::default();
    let start = Instant::now();
    let d = dims(2, 2);
    let params = RieszParams::from_spec(1, None, &spec).unwrap();
    let points = sphere_points_outside_cap();
    let radius = points.iter().map(|p| nu_inverse(p).unwrap().norm()).fold(0.0, f64::max);
    let mut detail = Vec::new();
    let mut pass = true;
    for (fam, tol) in [(Family::ZonalGaussian, 0.02), (Family::FirstHarmonicWeighted, 0.05)] {
        let f = SceneSpec::builtin(fam, d).sphere_field().unwrap();
        let (f2, s2) = (f.clone(), spec.clone());
        let data = Arc::new(move |tau: &SlicePlane| slice_transform(&f2, tau, &s2));
        let rec = invert_slice(data, d, &params, &spec, radius).unwrap();
        let coords: Vec<Coords> = points.iter().map(|p| p.coords().iter().copied().collect()).collect();
        let report = InversionReport::evaluate(
            &|c| rec.eval(&SpherePoint::new(c.iter().copied().collect())?),
            &|c| f.eval(&SpherePoint::new(c.iter().copied().collect())?),
            coords,
            String::new(),
        )
        .unwrap();
        pass &= report.residual_linf <= tol;
        detail.push(format!("{fam} {:.3e} (≤ {tol})", report.residual_linf));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome { pass, detail: format!("sup error outside η₃>0.99: {}; {secs:.1}s", detail.join(", ")) }
}

fn support_theorem() -> Outcome {
    let spec = QuadratureSpec { seed: 77, ..Default::default() };
    let cap = CapSpec::new(0.0).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (n, k) in ADMISSIBLE {
        let d = dims(n, k);
        let f = SceneSpec::builtin(Family::CapBump, d).sphere_field().unwrap();
        let r = support_experiment(&f, cap, d, &spec, 200, 0.5).unwrap();
        let ok = r.max_violation <= 1e-10 * r.scale && r.control_max > 1e-3;
        pass &= ok;
        detail.push(format!("n={n} k={k}: beyond {:.3e} control {:.3e}", r.max_violation, r.control_max));
    }
    Outcome { pass, detail: format!("{} (≤ 1e-10·peak / > 1e-3)", detail.join("; ")) }
}

fn existence_sharpness() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for k in [2, 3] {
        let d = dims(3, k);
        let a = 0.5 * (k as f64 - 1.0);
        let scene = |mu: f64| {
            let mut p = std::collections::BTreeMap::new();
            p.insert("mu".to_string(), mu);
            SceneSpec::new(Family::PolePower, p, None, d).unwrap().sphere_field().unwrap()
        };
        let below = existence_check(&scene(a - 0.1), d, &default_levels(), &spec).unwrap().verdict;
        let above = existence_check(&scene(a + 0.1), d, &default_levels(), &spec).unwrap().verdict;
        pass &= below == Verdict::Converges && above == Verdict::Diverges;
        detail.push(format!("k={k}: μ={:.1} {} / μ={:.1} {}", a - 0.1, below.as_str(), a + 0.1, above.as_str()));
    }
    Outcome { pass, detail: detail.join("; ") }
}

fn constants() -> Outcome {
    use statrs::function::gamma::gamma;
    let c_oracle = |k: f64, n: f64| 2f64.powf(k) * PI.powf(k / 2.0) * gamma(n / 2.0) / gamma((n - k) / 2.0);
    let checks = [
        ("c_{1,2}", coeff_c(1, 2).unwrap(), 2.0, c_oracle(1.0, 2.0)),
        ("c_{1,3}", coeff_c(1, 3).unwrap(), PI, c_oracle(1.0, 3.0)),
        ("c_{2,3}", coeff_c(2, 3).unwrap(), 2.0 * PI, c_oracle(2.0, 3.0)),
        (
            "d_{2,1}(1)",
            coeff_d(2, 1, 1).unwrap(),
            2.0 * PI,
            PI / (2.0 * gamma(1.5)) * -gamma(-0.5),
        ),
        ("d_{3,1}(1)", coeff_d(3, 1, 1).unwrap(), PI * PI, PI.powf(1.5) / (2.0 * gamma(2.0)) * -gamma(-0.5)),
        (
            "d_{2,3}(2)",
            coeff_d(2, 3, 2).unwrap(),
            PI / 2.0 * (12.0 * 2f64.ln() - 9.0 * 3f64.ln()),
            PI / (4.0 * gamma(2.0)) * 2.0 * (3.0 * 4.0 * 2f64.ln() - 9.0 * 3f64.ln()),
        ),
        ("B_2(2)", coeff_b_l(2, 2.0), 2.0, -2.0 * 1f64.powi(2) + 2f64.powi(2)),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, got, exact, oracle) in checks {
        let e = ((got - exact).abs() / exact.abs()).max((got - oracle).abs() / oracle.abs());
        worst = worst.max(e);
        parts.push(format!("{name}={got}"));
    }
    Outcome { pass: worst <= 1e-12, detail: format!("{}; max rel error {worst:.1e} (≤ 1e-12)", parts.join(" ")) }
}

fn gaussian_radon() -> Outcome {
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in [2, 3] {
        let g = PlaneField::gaussian(sphslice::linalg::zeros(n), 1.0);
        for dist in [0.0, 0.5, 1.0, 2.0] {
            let frame = random_orthonormal(&mut rng, n, 2);
            let offset: Coords = frame[1].iter().map(|c| c * dist).collect();
            let line = make_flat(&frame[..1], &offset, dims(n, 2)).unwrap();
            let v = radon_john(&g, &line, &spec).unwrap();
            worst = worst.max((v - PI.sqrt() * (-dist * dist).exp()).abs());
        }
    }
    Outcome { pass: worst <= 1e-10, detail: format!("max abs error {worst:.3e} over d∈{{0,0.5,1,2}}, n∈{{2,3}} (≤ 1e-10)") }
}

fn run_cli(args: &[&str], out: &Path) -> std::io::Result<(Vec<u8>, i32)> {
    let status = Command::new(env!("CARGO_BIN_EXE_sphslice"))
        .args(args)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()?;
    Ok((std::fs::read(out).unwrap_or_default(), status.code().unwrap_or(-1)))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let fast = ["--sphere-order", "16", "--radial-order", "32"];
    let inv = ["--orientations", "16", "--hs-angular", "8", "--hs-radial", "16", "--outer", "5"];
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("forward", vec!["forward", "--n", "3", "--k", "2", "--family", "first_harmonic_weighted", "--count", "20"]),
        ("radon", vec!["radon", "--n", "2", "--k", "2", "--family", "gaussian", "--count", "20"]),
        ("factor-check", vec!["factor-check", "--n", "3", "--k", "3", "--family", "zonal_gaussian", "--count", "20"]),
        ("zonal-forward", vec!["zonal-forward", "--n", "3", "--k", "2", "--family", "zonal_gaussian", "--points", "20"]),
        ("zonal-invert", vec!["zonal-invert", "--n", "3", "--k", "3", "--family", "zonal_gaussian"]),
        ("invert", vec!["invert", "--mode", "radon", "--n", "2", "--k", "2", "--family", "gaussian", "--grid", "3", "--tol", "1"]),
        ("support", vec!["support", "--n", "2", "--k", "2", "--family", "cap_bump", "--count", "20"]),
        ("existence", vec!["existence", "--n", "3", "--k", "2", "--family", "pole_power", "--param", "mu=0.5", "--expect", "diverges"]),
        ("dual", vec!["dual", "--n", "2", "--k", "2", "--family", "gaussian", "--grid", "3", "--orientations", "16"]),
    ];
    let mut bad = Vec::new();
    for (name, mut args) in runs {
        args.extend_from_slice(&fast);
        if name == "invert" {
            args.extend_from_slice(&inv);
        }
        args.extend_from_slice(&["--seed", "42"]);
        let a = run_cli(&args, &dir.path().join(format!("{name}-a.csv")));
        let b = run_cli(&args, &dir.path().join(format!("{name}-b.csv")));
        match (a, b) {
            (Ok((x, 0)), Ok((y, 0))) if !x.is_empty() && x == y => {}
            (Ok((_, cx)), Ok((_, cy))) => bad.push(format!("{name} (exit {cx}/{cy} or bytes differ)")),
            _ => bad.push(format!("{name} (failed to run)")),
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            "9 subcommands byte-identical across two runs".into()
        } else {
            format!("mismatch: {}", bad.join(", "))
        },
    }
}

fn main() {
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "factorization identity", factorization_identity),
        (2, "closed-form slice values", closed_form_slices),
        (3, "zonal formula", zonal_formula),
        (4, "zonal inversion round-trip", zonal_round_trip),
        (5, "radon inversion", radon_inversion),
        (6, "full slice inversion", slice_inversion),
        (7, "support theorem", support_theorem),
        (8, "existence sharpness", existence_sharpness),
        (9, "constants", constants),
        (10, "gaussian radon oracle", gaussian_radon),
        (11, "cli determinism", determinism),
    ];
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let out = std::panic::catch_unwind(run).unwrap_or_else(|_| Outcome { pass: false, detail: "panicked".into() });
        let el = start.elapsed();
        total += el;
        println!(
            "criterion {id:>2} {:<28} {}  {}  [{:.1}s]",
            name,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            el.as_secs_f64()
        );
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} failed, total {:.1}s", failed, total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
