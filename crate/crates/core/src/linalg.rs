//! Banded direct solvers for the stencil matrices of the spectral and PDE modules.

use crate::error::{Error, Result};

/// Symmetric matrix with lower bandwidth `bw`, stored row-wise as
/// `L(r, c)` for `r − bw ≤ c ≤ r`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c <= r && r - c <= self.bw);
        r * (self.bw + 1) + c + self.bw - r
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    /// Adds `v` to the (r, c) entry and, implicitly, to (c, r).
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        assert!(r - c <= self.bw, "entry ({r}, {c}) outside bandwidth {}", self.bw);
        let k = self.slot(r, c);
        self.data[k] += v;
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, v) in d.iter().enumerate() {
            self.add(i, i, *v);
        }
    }

    /// `D A D` for a diagonal `D`.
    pub fn scaled(&self, d: &[f64]) -> SymBand {
        let mut out = self.clone();
        for r in 0..self.n {
            for c in r.saturating_sub(self.bw)..=r {
                let k = self.slot(r, c);
                out.data[k] *= d[r] * d[c];
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let c0 = r.saturating_sub(self.bw);
            let row = &self.data[self.slot(r, c0)..=self.slot(r, r)];
            let mut acc = 0.0;
            for (k, a) in row.iter().enumerate() {
                let c = c0 + k;
                acc += a * x[c];
                if c != r {
                    y[c] += a * x[r];
                }
            }
            y[r] += acc;
        }
        y
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.clone();
        for j in 0..n {
            for r in j..(j + bw + 1).min(n) {
                let k0 = r.saturating_sub(bw).max(j.saturating_sub(bw));
                let mut s = l.data[l.slot(r, j)];
                if k0 < j {
                    let a = &l.data[l.slot(r, k0)..l.slot(r, j)];
                    let b = &l.data[l.slot(j, k0)..l.slot(j, j)];
                    s -= a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                }
                if r == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(j));
                    }
                    let k = l.slot(j, j);
                    l.data[k] = s.sqrt();
                } else {
                    let d = l.data[l.slot(j, j)];
                    let k = l.slot(r, j);
                    l.data[k] = s / d;
                }
            }
        }
        Ok(BandCholesky { l })
    }
}

/// `A = L Lᵀ` with `L` banded lower triangular.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    l: SymBand,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = b.to_vec();
        for r in 0..n {
            let c0 = r.saturating_sub(bw);
            let row = &l.data[l.slot(r, c0)..l.slot(r, r)];
            let s: f64 = row.iter().zip(&y[c0..r]).map(|(a, v)| a * v).sum();
            y[r] = (y[r] - s) / l.data[l.slot(r, r)];
        }
        for r in (0..n).rev() {
            y[r] /= l.data[l.slot(r, r)];
            let v = y[r];
            let c0 = r.saturating_sub(bw);
            for c in c0..r {
                y[c] -= l.data[l.slot(r, c)] * v;
            }
        }
        y
    }
}

/// General band matrix with `kl` sub- and `ku` super-diagonals, stored by
/// columns with room for the fill-in of partial pivoting.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; n * ld],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        c * self.ld + r + self.kl + self.ku - c
    }

    fn in_band(&self, r: usize, c: usize, up: usize) -> bool {
        r < self.n && c < self.n && r <= c + self.kl && c <= r + up
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c, self.ku) {
            self.data[self.slot(r, c)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c, self.ku), "entry ({r}, {c}) outside band ({}, {})", self.kl, self.ku);
        let k = self.slot(r, c);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            let r0 = c.saturating_sub(self.ku);
            let r1 = (c + self.kl + 1).min(self.n);
            for (r, yr) in y.iter_mut().enumerate().take(r1).skip(r0) {
                *yr += self.data[self.slot(r, c)] * x[c];
            }
        }
        y
    }

    /// LU factorization with partial pivoting.
    pub fn lu(mut self) -> Result<BandLu> {
        let (n, kl) = (self.n, self.kl);
        let up = self.ku + kl;
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            piv[k] = p;
            let cmax = (k + up).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(k, k)];
            for r in k + 1..=last {
                let s = self.slot(r, k);
                let m = self.data[s] / d;
                self.data[s] = m;
                if m != 0.0 {
                    for c in k + 1..=cmax {
                        let u = self.data[self.slot(k, c)];
                        let t = self.slot(r, c);
                        self.data[t] -= m * u;
                    }
                }
            }
        }
        Ok(BandLu { a: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    a: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let a = &self.a;
        let n = a.n;
        let up = a.ku + a.kl;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let v = x[k];
            for (r, xr) in x.iter_mut().enumerate().take((k + a.kl + 1).min(n)).skip(k + 1) {
                *xr -= a.data[a.slot(r, k)] * v;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..(k + up + 1).min(n) {
                s -= a.data[a.slot(k, c)] * x[c];
            }
            x[k] = s / a.data[a.slot(k, k)];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
