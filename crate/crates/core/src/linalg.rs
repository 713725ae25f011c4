//! Sparse storage and a banded LU factorization with partial pivoting.
//!
//! Lattice operators have bandwidth of one lattice row, so a band solver is
//! a sparse direct solver for every domain handled here.

use std::io::{self, Write};

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, One, Zero};

use crate::scalar::{Real, Scalar};

/// Compressed sparse row matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<S> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Duplicate entries are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: impl IntoIterator<Item = (usize, usize, S)>) -> Self {
        let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); n_rows];
        for (i, j, v) in triplets {
            assert!(i < n_rows && j < n_cols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { n_rows, n_cols, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![S::one(); n])
    }

    pub fn diagonal(d: &[S]) -> Self {
        let n = d.len();
        CsrMatrix { n_rows: n, n_cols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: d.to_vec() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => S::zero(),
        }
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n_cols, self.n_rows, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(S) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_complex(&self) -> CsrMatrix<Complex<S::Real>> {
        self.map(|v| v.to_complex())
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[S]) -> Self {
        assert_eq!(d.len(), self.n_rows.min(self.n_cols));
        Self::from_triplets(
            self.n_rows,
            self.n_cols,
            self.triplets().chain(d.iter().enumerate().map(|(i, &v)| (i, i, v))),
        )
    }

    pub fn scaled(&self, c: S) -> Self {
        self.map(|v| v * c)
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for (i, j, _) in self.triplets() {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        (kl, ku)
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> S::Real {
        let mut col = vec![S::Real::zero(); self.n_cols];
        for (_, j, v) in self.triplets() {
            col[j] += v.modulus();
        }
        col.into_iter().fold(S::Real::zero(), |a, b| a.max(b))
    }

    /// Coordinate dump, one `row col value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> io::Result<()>
    where
        S: std::fmt::Display,
    {
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v}")?;
        }
        Ok(())
    }
}

/// Banded LU with row partial pivoting, stored row-wise.
///
/// Row `i` keeps columns `i - kl ..= i + kl + ku`; the extra `kl`
/// superdiagonals hold fill-in from pivoting. Multipliers are kept apart and
/// applied with the recorded interchanges during solves.
#[derive(Debug, Clone)]
pub struct BandLu<S: Scalar> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<S>,
    lmul: Vec<S>,
    piv: Vec<usize>,
    anorm: S::Real,
    zero_pivot: bool,
}

impl<S: Scalar> BandLu<S> {
    pub fn factor(a: &CsrMatrix<S>) -> Self {
        assert_eq!(a.n_rows, a.n_cols, "band LU needs a square matrix");
        let n = a.n_rows;
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut ab = vec![S::zero(); n * width];
        for (i, j, v) in a.triplets() {
            ab[i * width + j + kl - i] = v;
        }
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            ab,
            lmul: vec![S::zero(); n * kl],
            piv: vec![0; n],
            anorm: a.norm1(),
            zero_pivot: false,
        };
        lu.eliminate();
        lu
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    fn eliminate(&mut self) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.at(k, k)].modulus();
            for i in k + 1..=last_row {
                let m = self.ab[self.at(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            self.piv[k] = p;
            if best == S::Real::zero() {
                self.zero_pivot = true;
                continue;
            }
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.at(k, j), self.at(p, j));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.at(k, k)];
            for i in k + 1..=last_row {
                let idx = self.at(i, k);
                let l = self.ab[idx] / pivot;
                self.ab[idx] = S::zero();
                self.lmul[k * kl + (i - k - 1)] = l;
                if l != S::zero() {
                    for j in k + 1..=last_col {
                        let u = self.ab[self.at(k, j)];
                        let t = self.at(i, j);
                        self.ab[t] -= l * u;
                    }
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// An exactly zero pivot was met; solves will not be finite.
    pub fn has_zero_pivot(&self) -> bool {
        self.zero_pivot
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [S]) {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != S::zero() {
                let hi = (k + kl).min(n - 1);
                let mult = &self.lmul[k * kl..k * kl + (hi - k)];
                for (bi, &l) in b[k + 1..=hi].iter_mut().zip(mult) {
                    *bi -= l * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let hi = (i + kl + ku).min(n - 1);
            // Row i of U occupies ab[i*width + kl .. i*width + kl + (hi − i)].
            let row = &self.ab[i * width + kl..=i * width + kl + (hi - i)];
            let mut s = b[i];
            for (&u, &x) in row[1..].iter().zip(&b[i + 1..=hi]) {
                s -= u * x;
            }
            b[i] = s / row[0];
        }
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Overwrites `b` with `A⁻ᴴ b` (the transpose for real scalars).
    #[allow(clippy::needless_range_loop)]
    pub fn solve_adjoint_in_place(&self, b: &mut [S]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(kl + ku)..i {
                s -= self.ab[self.at(j, i)].conj() * b[j];
            }
            b[i] = s / self.ab[self.at(i, i)].conj();
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.lmul[k * kl + (i - k - 1)].conj() * b[i];
            }
            b[k] = s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }

    pub fn solve_adjoint(&self, b: &[S]) -> Vec<S> {
        let mut x = b.to_vec();
        self.solve_adjoint_in_place(&mut x);
        x
    }

    /// 1-norm condition estimate `‖A‖₁·est(‖A⁻¹‖₁)` (Hager's method with
    /// Higham's safeguard vector). Infinite for an exactly singular factor.
    pub fn condition_estimate(&self) -> S::Real {
        let n = self.n;
        if self.zero_pivot {
            return S::Real::infinity();
        }
        if n == 0 {
            return S::Real::one();
        }
        let nr = S::Real::from_usize(n).unwrap();
        let norm1 = |v: &[S]| v.iter().map(|z| z.modulus()).sum::<S::Real>();
        let mut x = vec![S::from_real(S::Real::one() / nr); n];
        let mut est = S::Real::zero();
        for iter in 0..5 {
            let y = self.solve(&x);
            let e = norm1(&y);
            if !e.is_finite() {
                return S::Real::infinity();
            }
            if iter > 0 && e <= est {
                break;
            }
            est = e;
            let xi: Vec<S> = y.iter().map(|v| v.unit_phase()).collect();
            let z = self.solve_adjoint(&xi);
            let (mut j, mut zmax) = (0, S::Real::zero());
            for (i, v) in z.iter().enumerate() {
                if v.modulus() > zmax {
                    zmax = v.modulus();
                    j = i;
                }
            }
            let ztx: S = z.iter().zip(&x).map(|(a, b)| a.conj() * *b).sum();
            if iter > 0 && zmax <= ztx.re() {
                break;
            }
            x = vec![S::zero(); n];
            x[j] = S::one();
        }
        let denom = S::Real::from_usize(n.max(2) - 1).unwrap();
        let alt: Vec<S> = (0..n)
            .map(|i| {
                let mag = S::Real::one() + S::Real::from_usize(i).unwrap() / denom;
                S::from_real(if i % 2 == 0 { mag } else { -mag })
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = S::Real::lit(2.0) * norm1(&y) / (S::Real::lit(3.0) * nr);
        est = est.max(alt_est);
        self.anorm * est
    }
}

/// Relative residual `‖A x − b‖₂ / ‖b‖₂` (0 when `b = 0` and `A x = 0`).
pub fn relative_residual<S: Scalar>(a: &CsrMatrix<S>, x: &[S], b: &[S]) -> S::Real {
    let ax = a.matvec(x);
    let r: S::Real = ax.iter().zip(b).map(|(p, q)| sq(*p - *q)).sum::<S::Real>().sqrt();
    let nb: S::Real = b.iter().map(|v| sq(*v)).sum::<S::Real>().sqrt();
    if nb == S::Real::zero() {
        r
    } else {
        r / nb
    }
}

fn sq<S: Scalar>(v: S) -> S::Real {
    let m = v.modulus();
    m * m
}

/// Factor, solve, and apply up to two steps of iterative refinement.
pub fn solve_refined<S: Scalar>(a: &CsrMatrix<S>, lu: &BandLu<S>, b: &[S]) -> Vec<S> {
    let mut x = lu.solve(b);
    let tol = S::Real::epsilon() * S::Real::lit(16.0);
    for _ in 0..2 {
        let ax = a.matvec(&x);
        let mut r: Vec<S> = b.iter().zip(&ax).map(|(p, q)| *p - *q).collect();
        let nr = r.iter().map(|v| v.modulus()).fold(S::Real::zero(), |a, b| a.max(b));
        let nx = x.iter().map(|v| v.modulus()).fold(S::Real::zero(), |a, b| a.max(b));
        if nr <= tol * a.norm1() * nx {
            break;
        }
        lu.solve_in_place(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += *di;
        }
    }
    x
}

/// Real-part projection used when a complex solve is known to be real.
pub fn real_parts<T: Real>(v: &[Complex<T>]) -> Vec<T> {
    v.iter().map(|z| z.re).collect()
}
