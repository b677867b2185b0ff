//! Built-in test functions and the `key = value` scene format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Dimensions;
use crate::linalg::Coords;
use crate::transforms::{op_b, PlaneField, SphereField};
use crate::zonal::ZonalProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `f ≡ value`.
    Constant,
    /// `f₀(s) = exp(−s²/width²)`.
    ZonalGaussian,
    /// `exp(1/(1+b) − 1/(b − η_{n+1}))` for `η_{n+1} < b`, else 0; peak 1 at
    /// the south pole.
    CapBump,
    /// `η₁ exp(−s²/width²)`.
    FirstHarmonicWeighted,
    /// Zonal profile read from a two-column CSV file.
    CustomProfileCsv,
    /// `(1 − η_{n+1})^{−mu}`.
    PolePower,
    /// Plane function `exp(−|x − shift·e₁|²/width²)` on ℝⁿ.
    Gaussian,
}

pub const SPHERE_FAMILIES: [Family; 4] =
    [Family::Constant, Family::ZonalGaussian, Family::CapBump, Family::FirstHarmonicWeighted];

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::ZonalGaussian => "zonal_gaussian",
            Family::CapBump => "cap_bump",
            Family::FirstHarmonicWeighted => "first_harmonic_weighted",
            Family::CustomProfileCsv => "custom_profile_csv",
            Family::PolePower => "pole_power",
            Family::Gaussian => "gaussian",
        }
    }

    /// Parameter names with defaults.
    fn defaults(&self) -> &'static [(&'static str, f64)] {
        match self {
            Family::Constant => &[("value", 1.0)],
            Family::ZonalGaussian | Family::FirstHarmonicWeighted => &[("width", 1.0)],
            Family::CapBump => &[("b", 0.0)],
            Family::CustomProfileCsv => &[],
            Family::PolePower => &[("mu", 0.0)],
            Family::Gaussian => &[("width", 1.0), ("shift", 0.0)],
        }
    }

    pub fn is_plane(&self) -> bool {
        matches!(self, Family::Gaussian)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Family::Constant,
            Family::ZonalGaussian,
            Family::CapBump,
            Family::FirstHarmonicWeighted,
            Family::CustomProfileCsv,
            Family::PolePower,
            Family::Gaussian,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| Error::Parse(format!("unknown family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub profile: Option<PathBuf>,
    pub dims: Dimensions,
}

impl SceneSpec {
    /// Fills defaults and validates parameters against the family.
    pub fn new(family: Family, params: BTreeMap<String, f64>, profile: Option<PathBuf>, dims: Dimensions) -> Result<Self> {
        let mut full = BTreeMap::new();
        for (k, v) in family.defaults() {
            full.insert((*k).to_string(), *v);
        }
        for (k, v) in params {
            if !full.contains_key(&k) {
                return Err(Error::InvalidParameter(format!("family {family} has no parameter {k:?}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("parameter {k} must be finite")));
            }
            full.insert(k, v);
        }
        match family {
            Family::CapBump => {
                let b = full["b"];
                if !(b > -1.0 && b < 1.0) {
                    return Err(Error::InvalidParameter(format!("cap_bump requires b in (-1, 1), got {b}")));
                }
            }
            Family::ZonalGaussian | Family::FirstHarmonicWeighted | Family::Gaussian => {
                if !(full["width"] > 0.0) {
                    return Err(Error::InvalidParameter("width must be positive".into()));
                }
            }
            Family::CustomProfileCsv if profile.is_none() => {
                return Err(Error::InvalidParameter("custom_profile_csv needs profile = <path>".into()));
            }
            _ => {}
        }
        Ok(Self { family, params: full, profile, dims })
    }

    pub fn builtin(family: Family, dims: Dimensions) -> Self {
        Self::new(family, BTreeMap::new(), None, dims).expect("defaults are valid")
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys: `family`,
    /// `n`, `k`, `profile` (a path, relative to the scene file), and the
    /// family's numeric parameters.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut family = None;
        let (mut n, mut k) = (None, None);
        let mut profile = None;
        let mut params = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: {key} needs a number, got {value:?}", lineno + 1)))
            };
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: {key} needs an integer, got {value:?}", lineno + 1)))
            };
            match key {
                "family" => family = Some(value.parse::<Family>()?),
                "n" => n = Some(int()?),
                "k" => k = Some(int()?),
                "profile" => {
                    let p = PathBuf::from(value);
                    profile = Some(match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p,
                    });
                }
                _ => {
                    params.insert(key.to_string(), num()?);
                }
            }
        }
        let family = family.ok_or_else(|| Error::Parse("scene has no family".into()))?;
        let dims = Dimensions::new(
            n.ok_or_else(|| Error::Parse("scene has no n".into()))?,
            k.ok_or_else(|| Error::Parse("scene has no k".into()))?,
        )?;
        Self::new(family, params, profile, dims)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    /// One-line description for CSV headers.
    pub fn describe(&self) -> String {
        let mut s = format!("family={} n={} k={}", self.family, self.dims.n, self.dims.k);
        for (k, v) in &self.params {
            s.push_str(&format!(" {k}={v}"));
        }
        if let Some(p) = &self.profile {
            s.push_str(&format!(" profile={}", p.display()));
        }
        s
    }

    /// The zonal profile, for zonal sphere families.
    pub fn zonal_profile(&self) -> Result<ZonalProfile> {
        match self.family {
            Family::Constant => {
                let c = self.param("value");
                Ok(ZonalProfile::new(move |_| c))
            }
            Family::ZonalGaussian => {
                let w = self.param("width");
                Ok(ZonalProfile::new(move |s| (-(s / w).powi(2)).exp()))
            }
            Family::CapBump => {
                let b = self.param("b");
                Ok(ZonalProfile::new(move |s| {
                    // η_{n+1} = (s² − 1)/(s² + 1)
                    let eta = if s.is_finite() { (s * s - 1.0) / (s * s + 1.0) } else { 1.0 };
                    cap_bump_value(b, eta)
                }))
            }
            Family::PolePower => {
                let mu = self.param("mu");
                Ok(ZonalProfile::new(move |s| (0.5 * (1.0 + s * s)).powf(mu)).with_growth(mu))
            }
            Family::CustomProfileCsv => {
                let path = self.profile.as_ref().expect("validated");
                let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                ZonalProfile::read_csv(file)
            }
            Family::FirstHarmonicWeighted | Family::Gaussian => {
                Err(Error::InvalidParameter(format!("family {} is not zonal", self.family)))
            }
        }
    }

    pub fn sphere_field(&self) -> Result<SphereField> {
        match self.family {
            Family::Constant => Ok(SphereField::constant(self.param("value"))),
            Family::ZonalGaussian => {
                let w2 = self.param("width").powi(2);
                Ok(SphereField::new(move |p| (-(2.0 - p.gap()) / (p.gap() * w2)).exp()).with_zonal(true))
            }
            Family::CapBump => {
                let b = self.param("b");
                Ok(SphereField::new(move |p| cap_bump_value(b, p.eta_last())).with_zonal(true))
            }
            Family::FirstHarmonicWeighted => {
                let w2 = self.param("width").powi(2);
                Ok(SphereField::new(move |p| p.coords()[0] * (-(2.0 - p.gap()) / (p.gap() * w2)).exp()))
            }
            Family::PolePower => {
                let mu = self.param("mu");
                Ok(SphereField::new(move |p| p.gap().powf(-mu)).with_zonal(true).with_pole_exponent(mu))
            }
            Family::CustomProfileCsv => Ok(self.zonal_profile()?.to_sphere_field()),
            Family::Gaussian => Err(Error::InvalidParameter("gaussian is a plane family".into())),
        }
    }

    /// The plane function: the Gaussian family directly, sphere families
    /// through `B`.
    pub fn plane_field(&self) -> Result<PlaneField> {
        match self.family {
            Family::Gaussian => {
                let mut c: Coords = crate::linalg::zeros(self.dims.n);
                c[0] = self.param("shift");
                Ok(PlaneField::gaussian(c, self.param("width")))
            }
            _ => Ok(op_b(&self.sphere_field()?, self.dims)),
        }
    }
}

pub fn cap_bump_value(b: f64, eta: f64) -> f64 {
    if eta < b {
        (1.0 / (1.0 + b) - 1.0 / (b - eta)).exp()
    } else {
        0.0
    }
}
