use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Square matrix from a row-major entry list.
    pub fn square(data: Vec<C64>) -> Result<Self> {
        let d = (data.len() as f64).sqrt().round() as usize;
        Self::new(d, d, data)
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Permutation matrix sending basis state `i` to `perm[i]`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let d = perm.len();
        let mut seen = vec![false; d];
        let mut m = Self::zeros(d, d);
        for (i, &j) in perm.iter().enumerate() {
            if j >= d || seen[j] {
                return Err(Error::input("not a permutation"));
            }
            seen[j] = true;
            m.data[j * d + i] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut m = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m.data[c * self.rows + r] = self.get(r, c).conj();
            }
        }
        m
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matrix shapes do not chain");
        let mut m = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    m.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        m
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut m = Self::zeros(rows, cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self.get(r1, c1);
                for r2 in 0..other.rows {
                    for c2 in 0..other.cols {
                        m.data[(r1 * other.rows + r2) * cols + c1 * other.cols + c2] =
                            a * other.get(r2, c2);
                    }
                }
            }
        }
        m
    }

    /// `out[r] = sum_c M[r][c] v[c]`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        self.apply_into(v, &mut out);
        out
    }

    pub(crate) fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// Largest entry of `|M^dagger M - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let p = self.adjoint().mul(self);
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((p.get(r, c) - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// For a phase-permutation matrix, the row holding each column's
    /// unit-modulus entry; `None` otherwise.
    pub fn monomial_map(&self, tol: f64) -> Option<Vec<usize>> {
        if self.rows != self.cols {
            return None;
        }
        let d = self.rows;
        let mut map = Vec::with_capacity(d);
        let mut used = vec![false; d];
        for c in 0..d {
            let mut hit = None;
            for r in 0..d {
                let a = self.get(r, c).norm();
                if a > tol {
                    if hit.is_some() || (a - 1.0).abs() > tol {
                        return None;
                    }
                    hit = Some(r);
                }
            }
            let r = hit?;
            if used[r] {
                return None;
            }
            used[r] = true;
            map.push(r);
        }
        Some(map)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| format!("{:.4}", self.get(r, c))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Euclidean norm of a state vector.
pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Index of the single unit-modulus entry of a computational basis state.
pub fn basis_index(v: &[C64], tol: f64) -> Option<usize> {
    let mut hit = None;
    for (i, a) in v.iter().enumerate() {
        let m = a.norm();
        if m > tol {
            if hit.is_some() || (m - 1.0).abs() > tol {
                return None;
            }
            hit = Some(i);
        }
    }
    hit
}
