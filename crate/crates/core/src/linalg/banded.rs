//! Banded LU factorization with partial pivoting (column-major band storage,
//! unblocked `gbtf2` layout) plus a node permutation to keep the band narrow.

use crate::error::{Error, Result};
use crate::linalg::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    /// `perm[old] = new`
    perm: Vec<usize>,
}

impl BandedLu {
    /// Factorizes `a` reordered by `perm` (`perm[i]` is the new index of `i`).
    pub fn factor(a: &CsrMatrix, perm: Option<&[usize]>) -> Result<Self> {
        let n = a.n_rows();
        let perm: Vec<usize> = match perm {
            Some(p) => p.to_vec(),
            None => (0..n).collect(),
        };
        let (kl, ku) = a.bandwidths(&perm);
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            let pi = perm[i];
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let pj = perm[j as usize];
                if v != 0.0 || pi == pj {
                    ab[pj * ldab + kv + pi - pj] += v;
                }
            }
        }
        let mut lu = Self { n, kl, ku, ldab, ab, ipiv: vec![0; n], perm };
        lu.factorize()?;
        Ok(lu)
    }

    /// Dense-band constructor for already ordered matrices given by a closure.
    pub fn from_fn(n: usize, kl: usize, ku: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                ab[j * ldab + kv + i - j] = f(i, j);
            }
        }
        let mut lu = Self { n, kl, ku, ldab, ab, ipiv: vec![0; n], perm: (0..n).collect() };
        lu.factorize()?;
        Ok(lu)
    }

    fn factorize(&mut self) -> Result<()> {
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        let ab = &mut self.ab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut p = 0usize;
            let mut best = ab[col].abs();
            for r in 1..=km {
                let v = ab[col + r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            self.ipiv[j] = j + p;
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {j}")));
            }
            ju = ju.max((j + self.ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let base = c * ldab + kv;
                    ab.swap(base + j + p - c, base + j - c);
                }
            }
            let piv = ab[col];
            for r in 1..=km {
                ab[col + r] /= piv;
            }
            for c in (j + 1)..=ju {
                let base = c * ldab + kv;
                let ajc = ab[base + j - c];
                if ajc == 0.0 {
                    continue;
                }
                for r in 1..=km {
                    ab[base + j + r - c] -= ab[col + r] * ajc;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place (original ordering).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let mut y = vec![0.0; self.n];
        for (i, &v) in b.iter().enumerate() {
            y[self.perm[i]] = v;
        }
        self.solve_ordered(&mut y);
        for (i, v) in b.iter_mut().enumerate() {
            *v = y[self.perm[i]];
        }
    }

    fn solve_ordered(&self, y: &mut [f64]) {
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                y.swap(j, p);
            }
            let yj = y[j];
            if yj != 0.0 {
                let col = j * ldab + kv;
                for r in 1..=kl.min(n - 1 - j) {
                    y[j + r] -= self.ab[col + r] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            y[j] /= self.ab[col];
            let yj = y[j];
            if yj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    y[i] -= self.ab[col + i - j] * yj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Ordering for a periodic 1D index range: 0, n-1, 1, n-2, ... so that the
/// wrap-around coupling stays within a narrow band.
pub fn fold_order(n: usize) -> Vec<usize> {
    let mut perm = vec![0; n];
    for (i, p) in perm.iter_mut().enumerate() {
        *p = if 2 * i < n { 2 * i } else { 2 * (n - 1 - i) + 1 };
    }
    perm
}
