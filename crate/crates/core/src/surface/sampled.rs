use std::io::Read;

use super::{first_form_of, vec3, Immersion, Jet, MetricJet};
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, SpaceParams};
use crate::grid::{Rect, ScalarFieldGrid, UniformGrid};

/// Chart-map derivative fields of one coordinate.
#[derive(Clone, Debug)]
struct Derivatives {
    value: ScalarFieldGrid,
    ds: ScalarFieldGrid,
    dt: ScalarFieldGrid,
    dss: ScalarFieldGrid,
    dst: ScalarFieldGrid,
    dtt: ScalarFieldGrid,
}

impl Derivatives {
    fn of(f: ScalarFieldGrid) -> Result<Self> {
        let ds = f.d_s()?;
        Ok(Derivatives {
            dt: f.d_t()?,
            dss: f.d_ss()?,
            dtt: f.d_tt()?,
            dst: ds.d_t()?,
            ds,
            value: f,
        })
    }
}

/// Immersion known only at the nodes of a uniform parameter grid.
///
/// Derivatives use fourth-order stencils, one-sided along the boundary rows,
/// so the immersion can only be evaluated at grid nodes.
#[derive(Clone, Debug)]
pub struct GridImmersion {
    space: SpaceParams,
    grid: UniformGrid,
    coords: [Derivatives; 3],
    metric: [Derivatives; 3],
}

impl GridImmersion {
    pub fn new(space: SpaceParams, x: ScalarFieldGrid, y: ScalarFieldGrid, z: ScalarFieldGrid) -> Result<Self> {
        let grid = x.grid;
        if y.grid != grid || z.grid != grid {
            return Err(Error::Contract("coordinate fields live on different grids".into()));
        }
        if grid.ns < 6 || grid.nt < 6 {
            return Err(Error::Resolution(format!(
                "sampled immersion needs at least 6x6 nodes, got {}x{}",
                grid.ns, grid.nt
            )));
        }
        if let Some(v) = x.values.iter().chain(&y.values).chain(&z.values).find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite coordinate sample {v}")));
        }
        let coords = [Derivatives::of(x)?, Derivatives::of(y)?, Derivatives::of(z)?];
        let mut efg = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
        for (i, j) in grid.nodes() {
            let jet = node_jet(&coords, grid.index(i, j));
            let first = first_form_of(&space, &jet)?;
            let k = grid.index(i, j);
            efg[0][k] = first[(0, 0)];
            efg[1][k] = first[(0, 1)];
            efg[2][k] = first[(1, 1)];
        }
        let [e, f, g] = efg;
        let metric = [
            Derivatives::of(ScalarFieldGrid::new(grid, e)?)?,
            Derivatives::of(ScalarFieldGrid::new(grid, f)?)?,
            Derivatives::of(ScalarFieldGrid::new(grid, g)?)?,
        ];
        Ok(GridImmersion {
            space,
            grid,
            coords,
            metric,
        })
    }

    /// Samples an analytic map at the nodes of `grid`.
    pub fn sample(
        space: SpaceParams,
        grid: UniformGrid,
        f: impl Fn(f64, f64) -> Result<AmbientPoint>,
    ) -> Result<Self> {
        let pts = grid
            .nodes()
            .map(|(i, j)| f(grid.s(i), grid.t(j)))
            .collect::<Result<Vec<_>>>()?;
        let field = |c: fn(&AmbientPoint) -> f64| ScalarFieldGrid::new(grid, pts.iter().map(c).collect());
        GridImmersion::new(space, field(|p| p.x)?, field(|p| p.y)?, field(|p| p.z)?)
    }

    /// Reads rows `s,t,x,y,z` (header required) covering a complete uniform grid in any order.
    pub fn from_csv<R: Read>(space: SpaceParams, reader: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rd.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("surface CSV is missing column '{name}'")))
        };
        let idx = [col("s")?, col("t")?, col("x")?, col("y")?, col("z")?];
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let mut row = [0.0; 5];
            for (slot, &c) in row.iter_mut().zip(&idx) {
                let raw = rec.get(c).unwrap_or("");
                *slot = raw.parse().map_err(|_| {
                    Error::Parse(format!("surface CSV line {}: '{raw}' is not a number", line + 2))
                })?;
            }
            rows.push(row);
        }
        let axis = |k: usize| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
            v
        };
        let (ss, ts) = (axis(0), axis(1));
        if ss.len() < 2 || ts.len() < 2 || ss.len() * ts.len() != rows.len() {
            return Err(Error::Parse(format!(
                "surface CSV has {} rows but {} distinct s and {} distinct t values",
                rows.len(),
                ss.len(),
                ts.len()
            )));
        }
        let rect = Rect::new(ss[0], ss[ss.len() - 1], ts[0], ts[ts.len() - 1])?;
        let grid = UniformGrid::new(rect, ss.len(), ts.len())?;
        let mut vals = [vec![f64::NAN; grid.len()], vec![f64::NAN; grid.len()], vec![f64::NAN; grid.len()]];
        for r in &rows {
            let (i, j) = grid
                .locate(r[0], r[1])
                .ok_or_else(|| Error::Parse(format!("surface CSV node ({}, {}) is not on a uniform grid", r[0], r[1])))?;
            let k = grid.index(i, j);
            for c in 0..3 {
                vals[c][k] = r[2 + c];
            }
        }
        let [x, y, z] = vals;
        GridImmersion::new(
            space,
            ScalarFieldGrid::new(grid, x)?,
            ScalarFieldGrid::new(grid, y)?,
            ScalarFieldGrid::new(grid, z)?,
        )
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    fn node(&self, s: f64, t: f64) -> Result<usize> {
        let (i, j) = self.grid.locate(s, t).ok_or_else(|| {
            Error::Contract(format!("sampled immersion evaluated off-grid at ({s}, {t})"))
        })?;
        Ok(self.grid.index(i, j))
    }
}

fn node_jet(c: &[Derivatives; 3], k: usize) -> Jet {
    let pick = |f: fn(&Derivatives) -> &ScalarFieldGrid| vec3(f(&c[0]).values[k], f(&c[1]).values[k], f(&c[2]).values[k]);
    let p = pick(|d| &d.value);
    Jet {
        point: AmbientPoint::new(p.x, p.y, p.z),
        fs: pick(|d| &d.ds),
        ft: pick(|d| &d.dt),
        fss: pick(|d| &d.dss),
        fst: pick(|d| &d.dst),
        ftt: pick(|d| &d.dtt),
    }
}

impl Immersion for GridImmersion {
    fn space(&self) -> SpaceParams {
        self.space
    }

    fn domain(&self) -> Rect {
        self.grid.rect
    }

    fn jet(&self, s: f64, t: f64) -> Result<Jet> {
        let k = self.node(s, t)?;
        let jet = node_jet(&self.coords, k);
        self.space.check(&jet.point)?;
        Ok(jet)
    }

    fn metric_jet(&self, s: f64, t: f64) -> Result<MetricJet> {
        let k = self.node(s, t)?;
        let m = &self.metric;
        let pick = |f: fn(&Derivatives) -> &ScalarFieldGrid| [f(&m[0]).values[k], f(&m[1]).values[k], f(&m[2]).values[k]];
        Ok(MetricJet {
            value: pick(|d| &d.value),
            ds: pick(|d| &d.ds),
            dt: pick(|d| &d.dt),
            dss: pick(|d| &d.dss),
            dst: pick(|d| &d.dst),
            dtt: pick(|d| &d.dtt),
        })
    }
}
