use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AffineProfile, CylinderImmersion, FmpSurface, GraphProfile, GridImmersion, HorizontalGraph, Immersion, QuadraticProfile};
use crate::error::{Error, Result};
use crate::geometry::SpaceParams;
use crate::grid::Rect;

/// Closed-form graph functions accepted in surface definitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphProfileSpec {
    Affine {
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default)]
        c: f64,
    },
    Quadratic {
        #[serde(default)]
        cyy: f64,
        #[serde(default)]
        cyz: f64,
        #[serde(default)]
        czz: f64,
        #[serde(default)]
        cy: f64,
        #[serde(default)]
        cz: f64,
        #[serde(default)]
        c0: f64,
    },
}

impl GraphProfileSpec {
    pub fn build(&self) -> Arc<dyn GraphProfile> {
        match *self {
            GraphProfileSpec::Affine { a, b, c } => Arc::new(AffineProfile { a, b, c }),
            GraphProfileSpec::Quadratic { cyy, cyz, czz, cy, cz, c0 } => Arc::new(QuadraticProfile {
                cyy,
                cyz,
                czz,
                cy,
                cz,
                c0,
            }),
        }
    }
}

/// Surface definition as read from JSON, tagged by `family`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Cylinder {
        k_gamma: f64,
        #[serde(default)]
        domain: Option<Rect>,
    },
    Fmp {
        theta: f64,
        #[serde(default)]
        domain: Option<Rect>,
    },
    HorizontalGraph {
        profile: GraphProfileSpec,
        #[serde(default)]
        domain: Option<Rect>,
    },
    VerticalPlane {
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default)]
        domain: Option<Rect>,
    },
    CustomGrid {
        path: PathBuf,
    },
}

fn default_domain() -> Rect {
    Rect { s0: -1.0, s1: 1.0, t0: -1.0, t1: 1.0 }
}

impl SurfaceSpec {
    pub fn family(&self) -> &'static str {
        match self {
            SurfaceSpec::Cylinder { .. } => "cylinder",
            SurfaceSpec::Fmp { .. } => "fmp",
            SurfaceSpec::HorizontalGraph { .. } => "horizontal_graph",
            SurfaceSpec::VerticalPlane { .. } => "vertical_plane",
            SurfaceSpec::CustomGrid { .. } => "custom_grid",
        }
    }

    /// Same surface on a different parameter rectangle (ignored for sampled grids).
    pub fn with_domain(&self, rect: Rect) -> SurfaceSpec {
        let mut out = self.clone();
        match &mut out {
            SurfaceSpec::Cylinder { domain, .. }
            | SurfaceSpec::Fmp { domain, .. }
            | SurfaceSpec::HorizontalGraph { domain, .. }
            | SurfaceSpec::VerticalPlane { domain, .. } => *domain = Some(rect),
            SurfaceSpec::CustomGrid { .. } => {}
        }
        out
    }

    pub fn build(&self, space: SpaceParams) -> Result<Box<dyn Immersion>> {
        Ok(match self {
            SurfaceSpec::Cylinder { k_gamma, domain } => {
                Box::new(CylinderImmersion::new(space, *k_gamma, domain.unwrap_or_else(default_domain))?)
            }
            SurfaceSpec::Fmp { theta, domain } => {
                space.require_heisenberg()?;
                if (space.tau() - 0.5).abs() > 1e-15 {
                    return Err(Error::UnsupportedSpace {
                        kappa: space.kappa(),
                        tau: space.tau(),
                    });
                }
                Box::new(FmpSurface::new(*theta, domain.unwrap_or_else(default_domain)))
            }
            SurfaceSpec::HorizontalGraph { profile, domain } => Box::new(HorizontalGraph::new(
                space,
                profile.build(),
                domain.unwrap_or_else(default_domain),
            )?),
            SurfaceSpec::VerticalPlane { a, b, domain } => Box::new(HorizontalGraph::new(
                space,
                Arc::new(AffineProfile { a: *a, b: *b, c: 0.0 }),
                domain.unwrap_or_else(default_domain),
            )?),
            SurfaceSpec::CustomGrid { path } => {
                let file = std::fs::File::open(path)?;
                Box::new(GridImmersion::from_csv(space, file)?)
            }
        })
    }
}

/// Short form `family:key=value,key=value`, e.g. `cylinder:k=1` or `fmp:theta=0.5`.
impl FromStr for SurfaceSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (family, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut kv = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("surface option '{item}' is not key=value")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |keys: &[&str]| -> Result<f64> {
            for k in keys {
                if let Some(v) = kv.remove(*k) {
                    return v
                        .parse()
                        .map_err(|_| Error::Parse(format!("surface option {k}='{v}' is not a number")));
                }
            }
            Ok(0.0)
        };
        let spec = match family.trim() {
            "cylinder" => SurfaceSpec::Cylinder {
                k_gamma: take(&["k", "k_gamma"])?,
                domain: None,
            },
            "fmp" => SurfaceSpec::Fmp {
                theta: take(&["theta"])?,
                domain: None,
            },
            "vertical_plane" | "plane" => SurfaceSpec::VerticalPlane {
                a: take(&["a"])?,
                b: take(&["b"])?,
                domain: None,
            },
            "horizontal_graph" | "graph" => SurfaceSpec::HorizontalGraph {
                profile: GraphProfileSpec::Quadratic {
                    cyy: take(&["cyy"])?,
                    cyz: take(&["cyz"])?,
                    czz: take(&["czz"])?,
                    cy: take(&["a", "cy"])?,
                    cz: take(&["c", "cz"])?,
                    c0: take(&["b", "d", "c0"])?,
                },
                domain: None,
            },
            "custom_grid" | "grid" => {
                let path = kv
                    .remove("path")
                    .ok_or_else(|| Error::Parse("custom_grid needs path=<csv>".into()))?;
                SurfaceSpec::CustomGrid { path: path.into() }
            }
            other => return Err(Error::Parse(format!("unknown surface family '{other}'"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Parse(format!("unknown option '{k}' for surface family {family}")));
        }
        Ok(spec)
    }
}
