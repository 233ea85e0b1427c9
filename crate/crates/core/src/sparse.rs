//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver.

use crate::par;

#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Assemble an `n x n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in trip {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let j = r[k].0;
                let mut s = 0.0;
                while k < r.len() && r[k].0 == j {
                    s += r[k].1;
                    k += 1;
                }
                col.push(j);
                val.push(s);
            }
            row_ptr.push(col.len());
        }
        Csr { n, row_ptr, col, val }
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            n,
            row_ptr: (0..=n).collect(),
            col: (0..n).collect(),
            val: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col[a..b].iter().copied().zip(self.val[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col[a..b].binary_search(&j) {
            Ok(k) => self.val[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.val[k] * x[self.col[k]];
        }
        s
    }

    /// `y = A x`, rows in parallel.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        par::fill_indexed(y, |i| self.row_dot(i, x));
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// Principal submatrix on `keep` (sorted, unique). `map[old] = new` or usize::MAX.
    pub fn restrict(&self, keep: &[usize]) -> Csr {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut row_ptr = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        for &i in keep {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    col.push(map[j]);
                    val.push(v);
                }
            }
            row_ptr.push(col.len());
        }
        Csr { n: keep.len(), row_ptr, col, val }
    }

    /// `D1 A D2 + diag(shift)`, with diagonal scalings given as vectors.
    pub fn scaled(&self, left: &[f64], right: &[f64], shift: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                let j = out.col[k];
                out.val[k] *= left[i] * right[j];
                if j == i {
                    out.val[k] += shift[i];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Solve `A x = b` for symmetric positive definite `A`, starting from `x`.
/// Stops when `|r| <= tol * |b|`.
pub fn pcg(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> CgOutcome {
    let n = a.n;
    let dinv: Vec<f64> = a
        .diag()
        .into_iter()
        .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = par::norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul_into(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = (0..n).map(|i| dinv[i] * r[i]).collect();
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = par::norm(&r);
    if res <= tol * bnorm {
        return CgOutcome { iterations: 0, residual: res / bnorm, converged: true };
    }
    for it in 1..=max_iter {
        a.mul_into(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return CgOutcome { iterations: it, residual: res / bnorm, converged: false };
        }
        let alpha = rz / pap;
        par::axpy(alpha, &p, x);
        par::axpy(-alpha, &ap, &mut r);
        res = par::norm(&r);
        if res <= tol * bnorm {
            return CgOutcome { iterations: it, residual: res / bnorm, converged: true };
        }
        par::fill_indexed(&mut z, |i| dinv[i] * r[i]);
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        par::xpby(&z, beta, &mut p);
    }
    CgOutcome { iterations: max_iter, residual: res / bnorm, converged: false }
}

/// Dense symmetric solve by Cholesky; used for small systems and as a test oracle.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Cholesky factor of a sparse SPD matrix stored in its envelope: row i
/// keeps `L[i][first[i]..=i]`. Fill-in never leaves the envelope, so banded
/// orderings (ring meshes, radial grids) factor in O(n b^2).
#[derive(Clone, Debug)]
pub struct ProfileCholesky {
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl ProfileCholesky {
    /// None if the matrix is not numerically positive definite.
    pub fn factor(a: &Csr) -> Option<Self> {
        let n = a.n;
        let first: Vec<usize> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i)).collect();
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    rows[i][j - first[i]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = rows[i][j - fi];
                for k in lo..j {
                    s -= rows[i][k - fi] * rows[j][k - fj];
                }
                if j < i {
                    rows[i][j - fi] = s / rows[j][j - fj];
                } else {
                    if !(s > 0.0) {
                        return None;
                    }
                    rows[i][i - fi] = s.sqrt();
                }
            }
        }
        Some(ProfileCholesky { first, rows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let r = &self.rows[i];
            let s: f64 = (fi..i).map(|k| r[k - fi] * y[k]).sum();
            y[i] = (y[i] - s) / r[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let r = &self.rows[i];
            y[i] /= r[i - fi];
            let xi = y[i];
            for k in fi..i {
                y[k] -= r[k - fi] * xi;
            }
        }
        y
    }
}

/// Dense solve with partial pivoting.
pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, &t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = Csr::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.5), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 3.5);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn pcg_agrees_with_cholesky() {
        let n = 40;
        let a = lap1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut x = vec![0.0; n];
        let out = pcg(&a, &b, &mut x, 1e-12, 500);
        assert!(out.converged);
        let y = cholesky_solve(&a.to_dense(), &b).unwrap();
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn lu_matches_cholesky_on_spd() {
        let a = lap1d(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.0).collect();
        let x = lu_solve(a.to_dense(), b.clone()).unwrap();
        let y = cholesky_solve(&a.to_dense(), &b).unwrap();
        for i in 0..7 {
            assert!((x[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn restrict_keeps_principal_block() {
        let a = lap1d(5);
        let r = a.restrict(&[1, 2, 4]);
        assert_eq!(r.n, 3);
        assert_eq!(r.get(0, 1), -1.0);
        assert_eq!(r.get(1, 2), 0.0);
        assert_eq!(r.get(2, 2), 2.0);
    }

    #[test]
    fn profile_cholesky_matches_dense() {
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0 + i as f64 * 0.01));
            for j in [i + 1, i + 5] {
                if j < n {
                    trip.push((i, j, -1.0));
                    trip.push((j, i, -1.0));
                }
            }
        }
        let a = Csr::from_triplets(n, &trip);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = ProfileCholesky::factor(&a).unwrap().solve(&b);
        let y = cholesky_solve(&a.to_dense(), &b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-13);
        }
    }
}
