//! Symmetric positive-definite solves for the Newton systems.
//!
//! The barrier Hessian is banded (slot-major variable order couples only
//! neighbouring slots), plus a few rank-one terms from affine constraints
//! that span many slots, plus an optional dense border row/column for the
//! phase-I variable. Rank-one terms go through Woodbury and the border
//! through a Schur complement.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Lower band of a symmetric matrix, row-major: entry `(i, j)` with
/// `i − bw ≤ j ≤ i` lives at `data[i * (bw + 1) + (i − j)]`.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` at `(i, j)` (and implicitly `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.bw + 1)]
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// Symmetric diagonal scaling `A ← S A S`.
    fn scale(&mut self, s: &[f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let k = self.idx(i, j);
                self.data[k] *= s[i] * s[j];
            }
        }
    }

    fn add_diag(&mut self, d: f64) {
        for i in 0..self.n {
            let k = self.idx(i, i);
            self.data[k] += d;
        }
    }

    /// In-place banded Cholesky `A = L Lᵀ`. Fails with the pivot index on a
    /// non-positive pivot.
    pub fn cholesky(&mut self) -> Result<(), usize> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.data[self.idx(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(i);
                    }
                    let k = self.idx(i, i);
                    self.data[k] = math::sqrt(s);
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place after [`cholesky`](Self::cholesky).
    pub fn cholesky_solve(&self, b: &mut [f64]) {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.data[self.idx(i, k)] * b[k];
            }
            b[i] = s / self.diag(i);
        }
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut s = b[i];
            for k in (i + 1)..=hi {
                s -= self.data[self.idx(k, i)] * b[k];
            }
            b[i] = s / self.diag(i);
        }
    }
}

/// Dense Cholesky of a row-major `n × n` matrix, in place (lower triangle).
pub fn dense_cholesky(a: &mut [f64], n: usize) -> Result<(), usize> {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(i);
                }
                a[i * n + i] = math::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    Ok(())
}

pub fn dense_cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Failure to factor the Newton matrix even after regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSystem;

/// `H = B + Σ w_k a_k a_kᵀ`, optionally bordered by one extra variable.
#[derive(Debug, Clone)]
pub struct NewtonSystem {
    pub band: BandedSym,
    pub updates: Vec<(Vec<f64>, f64)>,
    pub border: Option<Border>,
}

#[derive(Debug, Clone)]
pub struct Border {
    /// Coupling column `H[0..n, n]`.
    pub col: Vec<f64>,
    /// `H[n, n]`.
    pub diag: f64,
}

const REG_STEPS: [f64; 6] = [0.0, 1e-13, 1e-11, 1e-9, 1e-7, 1e-5];

impl NewtonSystem {
    pub fn new(n: usize, bw: usize) -> Self {
        NewtonSystem {
            band: BandedSym::zeros(n, bw),
            updates: Vec::new(),
            border: None,
        }
    }

    /// Solves `H x = r` (and the bordered row when present).
    ///
    /// Returns `(x, x_border)`; `x_border` is 0 without a border.
    /// The matrix is Jacobi-equilibrated first; a shrinking sequence of
    /// diagonal shifts is tried if the factorization breaks down.
    pub fn solve(&self, r: &[f64], r_border: f64) -> Result<(Vec<f64>, f64), SingularSystem> {
        let n = self.band.dim();
        let mut d = vec![0.0; n];
        for (i, di) in d.iter_mut().enumerate() {
            *di = self.band.diag(i);
        }
        for (a, w) in &self.updates {
            for i in 0..n {
                d[i] += w * a[i] * a[i];
            }
        }
        let s: Vec<f64> = d
            .iter()
            .map(|&v| if v > 0.0 && v.is_finite() { 1.0 / math::sqrt(v) } else { 1.0 })
            .collect();
        let s_b = match &self.border {
            Some(b) if b.diag > 0.0 => 1.0 / math::sqrt(b.diag),
            _ => 1.0,
        };

        let mut base = self.band.clone();
        base.scale(&s);
        let updates: Vec<(Vec<f64>, f64)> = self
            .updates
            .iter()
            .map(|(a, w)| (a.iter().zip(&s).map(|(x, y)| x * y).collect(), *w))
            .collect();
        let rs: Vec<f64> = r.iter().zip(&s).map(|(x, y)| x * y).collect();

        for &shift in REG_STEPS.iter() {
            let mut l = base.clone();
            if shift > 0.0 {
                l.add_diag(shift);
            }
            if l.cholesky().is_err() {
                continue;
            }
            let Some(wood) = Woodbury::new(&l, &updates) else {
                continue;
            };
            let mut x = wood.solve(&l, &rs);
            let mut xb = 0.0;
            if let Some(b) = &self.border {
                let h: Vec<f64> = b.col.iter().zip(&s).map(|(x, y)| x * y * s_b).collect();
                let z = wood.solve(&l, &h);
                let schur = b.diag * s_b * s_b - dot(&h, &z) + shift;
                if !(schur > 0.0) {
                    continue;
                }
                xb = (r_border * s_b - dot(&h, &x)) / schur;
                for i in 0..n {
                    x[i] -= z[i] * xb;
                }
                xb *= s_b;
            }
            for i in 0..n {
                x[i] *= s[i];
            }
            if x.iter().all(|v| v.is_finite()) && xb.is_finite() {
                return Ok((x, xb));
            }
        }
        Err(SingularSystem)
    }
}

struct Woodbury {
    /// `B⁻¹ a_k`, one per update.
    y: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    /// Cholesky factor of `W⁻¹ + Aᵀ B⁻¹ A`.
    cap: Vec<f64>,
}

impl Woodbury {
    fn new(l: &BandedSym, updates: &[(Vec<f64>, f64)]) -> Option<Self> {
        let k = updates.len();
        let mut y = Vec::with_capacity(k);
        for (a, _) in updates {
            let mut v = a.clone();
            l.cholesky_solve(&mut v);
            y.push(v);
        }
        let mut cap = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                cap[i * k + j] = dot(&updates[i].0, &y[j]);
            }
            cap[i * k + i] += 1.0 / updates[i].1;
        }
        if k > 0 && dense_cholesky(&mut cap, k).is_err() {
            return None;
        }
        Some(Woodbury {
            y,
            a: updates.iter().map(|(a, _)| a.clone()).collect(),
            cap,
        })
    }

    fn solve(&self, l: &BandedSym, r: &[f64]) -> Vec<f64> {
        let mut x = r.to_vec();
        l.cholesky_solve(&mut x);
        let k = self.a.len();
        if k == 0 {
            return x;
        }
        let mut c: Vec<f64> = self.a.iter().map(|a| dot(a, &x)).collect();
        dense_cholesky_solve(&self.cap, k, &mut c);
        for (yj, cj) in self.y.iter().zip(&c) {
            for i in 0..x.len() {
                x[i] -= yj[i] * cj;
            }
        }
        x
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
