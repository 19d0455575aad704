//! Dense complex kernels shared by every estimator.
//!
//! Conventions: the forward transform carries no scale factor and the inverse
//! carries `1/N`, so the frequency response of a tap vector is simply its
//! zero-padded DFT. The Fourier kernel is `exp(-j 2 pi i k / N)`.
//!
//! Everything here is `O(N^2)` or `O(N^3)` on tiny sizes (`N <= 128`), which
//! is plenty for link-level simulation.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

/// Residual above which a Vandermonde inverse is treated as unreliable.
pub const ILL_CONDITIONED_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular matrix: {0}")]
    Singular(String),
}

/// `exp(-j 2 pi m / n)`, exact at multiples of a quarter turn.
fn unit_root(m: usize, n: usize) -> Complex64 {
    let m = m % n;
    if (4 * m).is_multiple_of(n) {
        return match 4 * m / n {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    let theta = -2.0 * PI * (m as f64) / (n as f64);
    Complex64::new(theta.cos(), theta.sin())
}

/// Precomputed twiddle table for an `n`-point transform.
#[derive(Debug, Clone)]
pub struct Dft {
    twiddles: Vec<Complex64>,
}

impl Dft {
    pub fn new(n: usize) -> Result<Self, NumError> {
        if n == 0 {
            return Err(NumError::InvalidArgument("transform length must be positive".into()));
        }
        Ok(Self {
            twiddles: (0..n).map(|m| unit_root(m, n)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.twiddles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twiddles.is_empty()
    }

    /// `exp(-j 2 pi m / n)` for any integer exponent `m`.
    #[inline]
    pub fn twiddle(&self, m: usize) -> Complex64 {
        self.twiddles[m % self.twiddles.len()]
    }

    /// Forward transform of `x` zero-padded to the plan length.
    pub fn forward_padded(&self, x: &[Complex64]) -> Result<Vec<Complex64>, NumError> {
        let n = self.len();
        if x.is_empty() || x.len() > n {
            return Err(NumError::InvalidArgument(format!(
                "input length {} must be in 1..={n}",
                x.len()
            )));
        }
        Ok((0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, &v)| v * self.twiddles[(k * i) % n])
                    .sum()
            })
            .collect())
    }

    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>, NumError> {
        self.check_len(x)?;
        self.forward_padded(x)
    }

    pub fn inverse(&self, x: &[Complex64]) -> Result<Vec<Complex64>, NumError> {
        self.check_len(x)?;
        let n = self.len();
        let scale = 1.0 / n as f64;
        Ok((0..n)
            .map(|i| {
                let acc: Complex64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| v * self.twiddles[(n - (k * i) % n) % n])
                    .sum();
                acc * scale
            })
            .collect())
    }

    fn check_len(&self, x: &[Complex64]) -> Result<(), NumError> {
        if x.len() != self.len() {
            return Err(NumError::InvalidArgument(format!(
                "expected length {}, got {}",
                self.len(),
                x.len()
            )));
        }
        Ok(())
    }
}

/// Unnormalized forward DFT.
pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>, NumError> {
    Dft::new(x.len())?.forward(x)
}

/// Inverse DFT with the `1/N` factor.
pub fn idft(x: &[Complex64]) -> Result<Vec<Complex64>, NumError> {
    Dft::new(x.len())?.inverse(x)
}

/// Strictly increasing set of subcarrier indices, all below `nc`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: Vec<usize>, nc: usize) -> Result<Self, NumError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NumError::InvalidArgument(
                "indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= nc {
                return Err(NumError::InvalidArgument(format!(
                    "index {last} out of range for {nc} subcarriers"
                )));
            }
        }
        Ok(Self(indices))
    }

    /// Sorts first; duplicates are still rejected.
    pub fn from_unsorted(mut indices: Vec<usize>, nc: usize) -> Result<Self, NumError> {
        indices.sort_unstable();
        Self::new(indices, nc)
    }

    pub fn full(nc: usize) -> Self {
        Self((0..nc).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Picks the given entries out of a per-subcarrier vector.
    pub fn gather(&self, values: &[Complex64]) -> Vec<Complex64> {
        self.0.iter().map(|&i| values[i]).collect()
    }
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(NumError::InvalidArgument(format!(
                "{} entries do not form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of rows `start..end`.
    pub fn row_block(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `b - A (x_1 + x_2 + ...)`, each entry summed in roughly twice the
    /// working precision with the parts of `x` never added together. Stays
    /// accurate when `|A| |x|` is much larger than the result.
    pub fn residual(&self, b: &[Complex64], parts: &[&[Complex64]]) -> Vec<Complex64> {
        debug_assert_eq!(b.len(), self.rows);
        (0..self.rows)
            .map(|r| {
                let (mut re, mut im) = (CompensatedSum::new(b[r].re), CompensatedSum::new(b[r].im));
                for x in parts {
                    debug_assert_eq!(x.len(), self.cols);
                    for (a, v) in self.row(r).iter().zip(x.iter()) {
                        re.add_product(-a.re, v.re);
                        re.add_product(a.im, v.im);
                        im.add_product(-a.re, v.im);
                        im.add_product(-a.im, v.re);
                    }
                }
                Complex64::new(re.value(), im.value())
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, NumError> {
        if self.cols != other.rows {
            return Err(NumError::InvalidArgument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        // Split planes keep the inner loop on contiguous reals.
        let n = other.cols;
        let b_re: Vec<f64> = other.data.iter().map(|z| z.re).collect();
        let b_im: Vec<f64> = other.data.iter().map(|z| z.im).collect();
        let mut out = Self::zeros(self.rows, n);
        let (mut acc_re, mut acc_im) = (vec![0.0; n], vec![0.0; n]);
        for r in 0..self.rows {
            acc_re.iter_mut().for_each(|v| *v = 0.0);
            acc_im.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..self.cols {
                let a = self[(r, k)];
                let (br, bi) = (&b_re[k * n..(k + 1) * n], &b_im[k * n..(k + 1) * n]);
                for c in 0..n {
                    acc_re[c] += a.re * br[c] - a.im * bi[c];
                    acc_im[c] += a.re * bi[c] + a.im * br[c];
                }
            }
            for c in 0..n {
                out.data[r * n + c] = Complex64::new(acc_re[c], acc_im[c]);
            }
        }
        Ok(out)
    }

    /// `max |self - I|` over all entries; `self` must be square.
    pub fn identity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((self[(r, c)] - target).norm_sqr());
            }
        }
        worst.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Running sum of products with the rounding errors of every product and
/// addition carried in a second accumulator.
struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    fn new(start: f64) -> Self {
        Self { sum: start, err: 0.0 }
    }

    #[inline]
    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let p_err = product_error(a, b, p);
        let t = self.sum + p;
        let z = t - self.sum;
        let s_err = (self.sum - (t - z)) + (p - z);
        self.sum = t;
        self.err += p_err + s_err;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// Exact rounding error of `p = a * b` by Dekker's splitting, which needs
/// no fused multiply-add.
#[inline]
fn product_error(a: f64, b: f64, p: f64) -> f64 {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    let split = |x: f64| {
        let c = SPLIT * x;
        let hi = c - (c - x);
        (hi, x - hi)
    };
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    al * bl - (((p - ah * bh) - al * bh) - ah * bl)
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Rows of the `nc`-point Fourier matrix picked by `indices`, columns
/// `0..n_cols`. Entry `(r, c)` is `exp(-j 2 pi I[r] c / nc)`, i.e. a
/// Vandermonde matrix on the nodes `exp(-j 2 pi I[r] / nc)`.
pub fn fourier_submatrix(
    indices: &IndexSet,
    n_cols: usize,
    nc: usize,
) -> Result<ComplexMatrix, NumError> {
    if indices.len() != n_cols || n_cols == 0 || n_cols > nc {
        return Err(NumError::InvalidArgument(format!(
            "need a square submatrix with 1 <= size <= {nc}, got {} rows and {n_cols} columns",
            indices.len()
        )));
    }
    if indices.iter().any(|i| i >= nc) {
        return Err(NumError::InvalidArgument(format!(
            "index out of range for {nc} subcarriers"
        )));
    }
    let plan = Dft::new(nc)?;
    Ok(ComplexMatrix::from_fn(n_cols, n_cols, |r, c| {
        plan.twiddle(indices.as_slice()[r] * c)
    }))
}

/// Vandermonde nodes `exp(-j 2 pi i / nc)` for each selected subcarrier.
pub fn fourier_nodes(indices: &IndexSet, nc: usize) -> Vec<Complex64> {
    indices.iter().map(|i| unit_root(i, nc)).collect()
}

/// Inverse of a Vandermonde matrix plus the residual `max |V V^-1 - I|`.
#[derive(Debug, Clone)]
pub struct VandermondeInverse {
    pub inverse: ComplexMatrix,
    pub residual: f64,
}

impl VandermondeInverse {
    pub fn is_well_conditioned(&self) -> bool {
        self.residual <= ILL_CONDITIONED_RESIDUAL
    }
}

/// Inverts `V[r][c] = nodes[r]^c` with Traub's `O(N^2)` scheme.
///
/// Column `r` of `V^-1` holds the monomial coefficients of the Lagrange basis
/// polynomial `L_r`. All `L_r` share the master polynomial
/// `P(z) = prod (z - x_s)`; deflating `P` by `(z - x_r)` with synthetic
/// division yields the numerator of `L_r`, and the denominator is
/// `prod_{s != r} (x_r - x_s)`.
pub fn vandermonde_inverse(nodes: &[Complex64]) -> Result<VandermondeInverse, NumError> {
    let n = nodes.len();
    if n == 0 {
        return Err(NumError::InvalidArgument("no nodes".into()));
    }
    if nodes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(NumError::InvalidArgument("non-finite node".into()));
    }
    for r in 0..n {
        for s in r + 1..n {
            if nodes[r] == nodes[s] {
                return Err(NumError::Singular(format!("nodes {r} and {s} coincide")));
            }
        }
    }

    // master[k] is the coefficient of z^k; master[n] == 1.
    let mut master = vec![Complex64::new(0.0, 0.0); n + 1];
    master[0] = Complex64::new(1.0, 0.0);
    for (deg, &x) in nodes.iter().enumerate() {
        for k in (1..=deg + 1).rev() {
            master[k] = master[k - 1] - x * master[k];
        }
        master[0] = -x * master[0];
    }

    let mut inverse = ComplexMatrix::zeros(n, n);
    let mut quotient = vec![Complex64::new(0.0, 0.0); n];
    for (r, &xr) in nodes.iter().enumerate() {
        quotient[n - 1] = Complex64::new(1.0, 0.0);
        for k in (1..n).rev() {
            quotient[k - 1] = master[k] + xr * quotient[k];
        }
        let denom: Complex64 = nodes
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != r)
            .map(|(_, &xs)| xr - xs)
            .product();
        let scale = denom.inv();
        for (c, q) in quotient.iter().enumerate() {
            inverse[(c, r)] = q * scale;
        }
    }

    let mut vander = ComplexMatrix::zeros(n, n);
    for (r, &x) in nodes.iter().enumerate() {
        let mut p = Complex64::new(1.0, 0.0);
        for c in 0..n {
            vander[(r, c)] = p;
            p *= x;
        }
    }
    let residual = vander.matmul(&inverse)?.identity_residual();
    Ok(VandermondeInverse { inverse, residual })
}

/// Minimum-norm solution of the underdetermined system `A x = b`.
///
/// Equivalent to `A^H (A A^H)^-1 b`, computed through an orthonormal basis of
/// the row space of `A` (`A = L Q`, Gram-Schmidt applied twice) so the
/// condition number is not squared.
pub fn min_norm_solve(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, NumError> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || m > n {
        return Err(NumError::InvalidArgument(format!(
            "expected an underdetermined system, got {m}x{n}"
        )));
    }
    if b.len() != m {
        return Err(NumError::InvalidArgument(format!(
            "right-hand side has length {}, expected {m}",
            b.len()
        )));
    }

    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    let mut l = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        let mut v = a.row(i).to_vec();
        let row_norm = norm(&v);
        for _pass in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let coeff: Complex64 = qj.iter().zip(&v).map(|(qa, va)| qa.conj() * va).sum();
                l[(i, j)] += coeff;
                for (vk, qk) in v.iter_mut().zip(qj) {
                    *vk -= coeff * qk;
                }
            }
        }
        let len = norm(&v);
        if !(len > row_norm * 1e-13) {
            return Err(NumError::Singular(format!(
                "row {i} is linearly dependent on the previous rows"
            )));
        }
        l[(i, i)] = Complex64::new(len, 0.0);
        v.iter_mut().for_each(|z| *z /= len);
        q.push(v);
    }

    // L y = b by forward substitution, then x = Q^H y.
    let mut y = vec![Complex64::new(0.0, 0.0); m];
    for i in 0..m {
        let acc: Complex64 = (0..i).map(|j| l[(i, j)] * y[j]).sum();
        y[i] = (b[i] - acc) / l[(i, i)];
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (qi, yi) in q.iter().zip(&y) {
        for (xk, qk) in x.iter_mut().zip(qi) {
            *xk += qk.conj() * yi;
        }
    }
    Ok(x)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
