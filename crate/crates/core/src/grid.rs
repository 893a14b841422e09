//! Uniform parameter grids and scalar fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed parameter rectangle `[s0, s1] × [t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub s0: f64,
    pub s1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Rect {
    pub fn new(s0: f64, s1: f64, t0: f64, t1: f64) -> Result<Self> {
        if !(s0.is_finite() && s1.is_finite() && t0.is_finite() && t1.is_finite()) || s1 <= s0 || t1 <= t0 {
            return Err(Error::Contract(format!(
                "degenerate rectangle [{s0}, {s1}] x [{t0}, {t1}]"
            )));
        }
        Ok(Rect { s0, s1, t0, t1 })
    }

    /// `[0, a] × [0, b]`.
    pub fn sized(a: f64, b: f64) -> Result<Self> {
        Rect::new(0.0, a, 0.0, b)
    }

    pub fn width(&self) -> f64 {
        self.s1 - self.s0
    }

    pub fn height(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn contains(&self, s: f64, t: f64, slack: f64) -> bool {
        s >= self.s0 - slack && s <= self.s1 + slack && t >= self.t0 - slack && t <= self.t1 + slack
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.s0 >= self.s0 && other.s1 <= self.s1 && other.t0 >= self.t0 && other.t1 <= self.t1
    }
}

/// Nodes `(s0 + i·hs, t0 + j·ht)`, `0 ≤ i < ns`, `0 ≤ j < nt`, boundary included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub rect: Rect,
    pub ns: usize,
    pub nt: usize,
}

impl UniformGrid {
    pub fn new(rect: Rect, ns: usize, nt: usize) -> Result<Self> {
        if ns < 2 || nt < 2 {
            return Err(Error::Resolution(format!("grid {ns}x{nt} needs at least two nodes per side")));
        }
        Ok(UniformGrid { rect, ns, nt })
    }

    pub fn hs(&self) -> f64 {
        self.rect.width() / (self.ns - 1) as f64
    }

    pub fn ht(&self) -> f64 {
        self.rect.height() / (self.nt - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        if i + 1 == self.ns {
            self.rect.s1
        } else {
            self.rect.s0 + i as f64 * self.hs()
        }
    }

    pub fn t(&self, j: usize) -> f64 {
        if j + 1 == self.nt {
            self.rect.t1
        } else {
            self.rect.t0 + j as f64 * self.ht()
        }
    }

    pub fn len(&self) -> usize {
        self.ns * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.ns
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.ns || j + 1 == self.nt
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nt).flat_map(move |j| (0..self.ns).map(move |i| (i, j)))
    }

    /// Node whose coordinates equal `(s, t)` up to a tiny fraction of the spacing.
    pub fn locate(&self, s: f64, t: f64) -> Option<(usize, usize)> {
        let fi = (s - self.rect.s0) / self.hs();
        let fj = (t - self.rect.t0) / self.ht();
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-6 || (fj - j).abs() > 1e-6 || i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        (i < self.ns && j < self.nt).then_some((i, j))
    }

    /// Composite trapezoid weight of node (i, j).
    pub fn trapezoid_weight(&self, i: usize, j: usize) -> f64 {
        let ws = if i == 0 || i + 1 == self.ns { 0.5 } else { 1.0 };
        let wt = if j == 0 || j + 1 == self.nt { 0.5 } else { 1.0 };
        ws * wt * self.hs() * self.ht()
    }
}

/// Fourth-order first derivative of equally spaced samples, one-sided near the ends.
pub fn derivative4(f: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = f.len();
    if n < 5 {
        return Err(Error::Resolution(format!(
            "fourth-order stencils need at least 5 nodes, got {n}"
        )));
    }
    let c = 1.0 / (12.0 * h);
    let mut d = vec![0.0; n];
    d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for i in 2..n - 2 {
        d[i] = c * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
    }
    let m = n - 1;
    d[m] = -c * (-25.0 * f[m] + 48.0 * f[m - 1] - 36.0 * f[m - 2] + 16.0 * f[m - 3] - 3.0 * f[m - 4]);
    d[m - 1] = -c * (-3.0 * f[m] - 10.0 * f[m - 1] + 18.0 * f[m - 2] - 6.0 * f[m - 3] + f[m - 4]);
    Ok(d)
}

/// Fourth-order second derivative, one-sided (six-point) near the ends.
pub fn second_derivative4(f: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = f.len();
    if n < 6 {
        return Err(Error::Resolution(format!(
            "fourth-order second-derivative stencils need at least 6 nodes, got {n}"
        )));
    }
    let c = 1.0 / (12.0 * h * h);
    let mut d = vec![0.0; n];
    let one_sided0 = |g: &dyn Fn(usize) -> f64| {
        c * (45.0 * g(0) - 154.0 * g(1) + 214.0 * g(2) - 156.0 * g(3) + 61.0 * g(4) - 10.0 * g(5))
    };
    let one_sided1 = |g: &dyn Fn(usize) -> f64| {
        c * (10.0 * g(0) - 15.0 * g(1) - 4.0 * g(2) + 14.0 * g(3) - 6.0 * g(4) + g(5))
    };
    d[0] = one_sided0(&|k| f[k]);
    d[1] = one_sided1(&|k| f[k]);
    for i in 2..n - 2 {
        d[i] = c * (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]);
    }
    let m = n - 1;
    d[m] = one_sided0(&|k| f[m - k]);
    d[m - 1] = one_sided1(&|k| f[m - k]);
    Ok(d)
}

/// Real values on the nodes of a [`UniformGrid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarFieldGrid {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl ScalarFieldGrid {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.ns,
                grid.nt
            )));
        }
        Ok(ScalarFieldGrid { grid, values })
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        ScalarFieldGrid {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.nodes().map(|(i, j)| f(grid.s(i), grid.t(j))).collect();
        ScalarFieldGrid { grid, values }
    }

    pub fn try_from_fn(grid: UniformGrid, f: impl Fn(f64, f64) -> Result<f64>) -> Result<Self> {
        let values = grid
            .nodes()
            .map(|(i, j)| f(grid.s(i), grid.t(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarFieldGrid { grid, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarFieldGrid {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarFieldGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Contract("fields live on different grids".into()));
        }
        Ok(ScalarFieldGrid {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Fourth-order ∂/∂s.
    pub fn d_s(&self) -> Result<Self> {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.nt {
            let row: Vec<f64> = (0..g.ns).map(|i| self.get(i, j)).collect();
            for (i, v) in derivative4(&row, g.hs())?.into_iter().enumerate() {
                out[g.index(i, j)] = v;
            }
        }
        ScalarFieldGrid::new(g, out)
    }

    /// Fourth-order ∂/∂t.
    pub fn d_t(&self) -> Result<Self> {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for i in 0..g.ns {
            let col: Vec<f64> = (0..g.nt).map(|j| self.get(i, j)).collect();
            for (j, v) in derivative4(&col, g.ht())?.into_iter().enumerate() {
                out[g.index(i, j)] = v;
            }
        }
        ScalarFieldGrid::new(g, out)
    }

    pub fn d_ss(&self) -> Result<Self> {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.nt {
            let row: Vec<f64> = (0..g.ns).map(|i| self.get(i, j)).collect();
            for (i, v) in second_derivative4(&row, g.hs())?.into_iter().enumerate() {
                out[g.index(i, j)] = v;
            }
        }
        ScalarFieldGrid::new(g, out)
    }

    pub fn d_tt(&self) -> Result<Self> {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for i in 0..g.ns {
            let col: Vec<f64> = (0..g.nt).map(|j| self.get(i, j)).collect();
            for (j, v) in second_derivative4(&col, g.ht())?.into_iter().enumerate() {
                out[g.index(i, j)] = v;
            }
        }
        ScalarFieldGrid::new(g, out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(Σ wᵢ dᵢ vᵢ²)^½` with trapezoid weights `wᵢ` and a density `dᵢ`.
    pub fn l2_norm_with_density(&self, density: &ScalarFieldGrid) -> f64 {
        self.grid
            .nodes()
            .map(|(i, j)| {
                let v = self.get(i, j);
                self.grid.trapezoid_weight(i, j) * density.get(i, j) * v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Same norm restricted to nodes at least `margin` nodes from the boundary.
    pub fn interior_max_abs(&self, margin: usize) -> f64 {
        let g = self.grid;
        g.nodes()
            .filter(|&(i, j)| i >= margin && j >= margin && i + margin < g.ns && j + margin < g.nt)
            .map(|(i, j)| self.get(i, j).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W, column: &str) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "t", column])?;
        for (i, j) in self.grid.nodes() {
            wr.write_record([
                self.grid.s(i).to_string(),
                self.grid.t(j).to_string(),
                self.get(i, j).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}
