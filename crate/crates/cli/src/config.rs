//! Versioned job configuration and the short command-line forms it accepts.

use std::path::{Path, PathBuf};

use ektau::grid::Rect;
use ektau::surface::SurfaceSpec;
use ektau::SpaceParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Newton stopping threshold on the residual sup norm.
    #[serde(default = "default_newton")]
    pub newton: f64,
    /// Relative slack of the cutoff chain inequalities.
    #[serde(default = "default_chain")]
    pub chain: f64,
}

fn default_newton() -> f64 {
    1e-8
}

fn default_chain() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton: default_newton(),
            chain: default_chain(),
        }
    }
}

/// Dirichlet data for `pde-solve`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySource {
    /// Expression in `y`, `z`.
    Expr(String),
    /// CSV with columns `y,z,u` covering every boundary node.
    Csv(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicityConfig {
    /// `plane`, `hyperbolic` or `cylinder:c=<circumference>`.
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_taper")]
    pub taper: String,
    /// Test pair as expressions in `r`, `theta`.
    #[serde(default)]
    pub u: Option<String>,
    #[serde(default)]
    pub v: Option<String>,
    #[serde(default)]
    pub growth_radii: Option<Vec<f64>>,
}

fn default_model() -> String {
    "plane".into()
}

fn default_members() -> usize {
    8
}

fn default_r0() -> f64 {
    1.0
}

fn default_taper() -> String {
    "log".into()
}

impl Default for ParabolicityConfig {
    fn default() -> Self {
        ParabolicityConfig {
            model: default_model(),
            members: default_members(),
            r0: default_r0(),
            taper: default_taper(),
            u: None,
            v: None,
            growth_radii: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub schema: u32,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub space: Option<SpaceParams>,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    #[serde(default)]
    pub domain: Option<Rect>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sides: Option<Vec<f64>>,
    #[serde(default)]
    pub boundary: Option<BoundarySource>,
    #[serde(default)]
    pub parabolicity: Option<ParabolicityConfig>,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            schema: SCHEMA_VERSION,
            command: None,
            space: None,
            surface: None,
            domain: None,
            grid: None,
            out: None,
            tolerances: Tolerances::default(),
            sides: None,
            boundary: None,
            parabolicity: None,
        }
    }
}

impl JobConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: JobConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("{origin}: line {}, column {}: {e}", e.line(), e.column())))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Schema version, positive tolerances and existence of referenced files.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "config field 'schema': version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        for (name, v) in [("tolerances.newton", self.tolerances.newton), ("tolerances.chain", self.tolerances.chain)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("config field '{name}' must be positive, got {v}")));
            }
        }
        if let Some(g) = self.grid {
            if g < 3 {
                return Err(CliError::Validation(format!("config field 'grid' must be at least 3, got {g}")));
            }
        }
        let mut paths = Vec::new();
        if let Some(SurfaceSpec::CustomGrid { path }) = &self.surface {
            paths.push(("surface.path", path));
        }
        if let Some(BoundarySource::Csv(p)) = &self.boundary {
            paths.push(("boundary.csv", p));
        }
        for (field, p) in paths {
            if !p.exists() {
                return Err(CliError::Validation(format!(
                    "config field '{field}': file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// `kappa=<k>,tau=<t>`; keys may appear in either order.
pub fn parse_space(text: &str) -> Result<SpaceParams, CliError> {
    let (mut kappa, mut tau) = (None, None);
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("space option '{item}' is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("space option {k}='{v}' is not a number")))?;
        match k.trim() {
            "kappa" | "k" => kappa = Some(v),
            "tau" | "t" => tau = Some(v),
            other => return Err(CliError::Validation(format!("unknown space option '{other}'"))),
        }
    }
    let (Some(kappa), Some(tau)) = (kappa, tau) else {
        return Err(CliError::Validation(format!("space '{text}' needs both kappa and tau")));
    };
    Ok(SpaceParams::new(kappa, tau)?)
}

/// `AxB` for `[0, A] × [0, B]`, or `s0,s1,t0,t1`.
pub fn parse_domain(text: &str) -> Result<Rect, CliError> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("domain '{text}': '{s}' is not a number")))
    };
    if let Some((a, b)) = text.split_once('x') {
        return Ok(Rect::sized(num(a)?, num(b)?)?);
    }
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 4 {
        return Err(CliError::Validation(format!(
            "domain '{text}' must be AxB or s0,s1,t0,t1"
        )));
    }
    Ok(Rect::new(num(parts[0])?, num(parts[1])?, num(parts[2])?, num(parts[3])?)?)
}

/// Comma-separated positive reals.
pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("{what}: '{s}' is not a number")))
        })
        .collect()
}
