//! Dense complex-matrix primitives.
//!
//! Every operator in the crate is a [`ComplexMatrix`]. Composite systems use a
//! single global ordering: for subsystem dimensions `[d0, d1, ..]` the flat
//! index is `i0 * (d1 * d2 * ..) + i1 * (d2 * ..) + ..`, so the first listed
//! subsystem is the slowest-varying index.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{invalid, mismatch, Error, Result};

pub type C64 = Complex<f64>;

/// Pure-state amplitudes.
pub type StateVector = DVector<C64>;

/// Default absolute tolerance for Hermiticity, unitarity and positivity checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A dense complex matrix with at least one row and one column.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.0[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the normalized eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> StateVector {
        self.vectors.0.column(k).into_owned()
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }
}

/// Which factor of a bipartite system an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Local dimensions of a bipartite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemDims {
    first: usize,
    second: usize,
}

impl SubsystemDims {
    pub fn new(first: usize, second: usize) -> Result<Self> {
        if first < 2 || second < 2 {
            return Err(invalid(format!(
                "subsystem dimensions must be at least 2, got ({first}, {second})"
            )));
        }
        Ok(Self { first, second })
    }

    /// Both factors of dimension `d`.
    pub fn square(d: usize) -> Result<Self> {
        Self::new(d, d)
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn second(&self) -> usize {
        self.second
    }

    pub fn total(&self) -> usize {
        self.first * self.second
    }

    pub fn as_array(&self) -> [usize; 2] {
        [self.first, self.second]
    }

    fn check(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() || m.rows() != self.total() {
            return Err(mismatch(format!(
                "expected a {n}x{n} matrix for dims ({}, {}), got {}x{}",
                self.first,
                self.second,
                m.rows(),
                m.cols(),
                n = self.total()
            )));
        }
        Ok(())
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("matrix must have at least one row and column"));
        }
        if entries.len() != rows * cols {
            return Err(mismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| ZERO)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { ZERO })
    }

    /// `|v><v|`
    pub fn outer(v: &StateVector) -> Self {
        Self(v * v.adjoint())
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        assert!(m.nrows() > 0 && m.ncols() > 0, "empty matrix");
        Self(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.0[(i, j)] = value;
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<C64> {
        (0..self.rows())
            .flat_map(|i| (0..self.cols()).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.diagonal().iter().sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.len() != self.cols() {
            return Err(mismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols()
            )));
        }
        Ok(&self.0 * v)
    }

    /// `Tr(self * other)`, the expectation value when `other` is a state.
    pub fn trace_product(&self, other: &ComplexMatrix) -> Result<C64> {
        if self.cols() != other.rows() || self.rows() != other.cols() {
            return Err(mismatch(format!(
                "trace product of {}x{} and {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        let mut acc = ZERO;
        for i in 0..self.rows() {
            for k in 0..self.cols() {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        Ok(acc)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest `|A_ij - conj(A_ji)|`; infinite for non-square input.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Largest entry of `|U^dagger U - I|`; infinite for non-square input.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let prod = self.0.adjoint() * &self.0;
        let n = self.rows();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                dev = dev.max((prod[(i, j)] - target).norm());
            }
        }
        dev
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.is_hermitian(tol)
            && self
                .eigh()
                .map(|e| e.min_value() >= -tol)
                .unwrap_or(false)
    }

    /// Eigendecomposition of a Hermitian matrix.
    ///
    /// The input is symmetrized as `(A + A^dagger) / 2` before solving, so
    /// rounding-level anti-Hermitian parts are discarded. Inputs further than
    /// `DEFAULT_TOLERANCE` from Hermitian are rejected.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        let deviation = self.hermiticity_deviation();
        if deviation > DEFAULT_TOLERANCE * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        let sym = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let n = self.rows();
        let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
        Ok(HermitianEigen {
            values,
            vectors: Self(vectors),
        })
    }

    pub fn eigenvalues_hermitian(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.values)
    }

    /// Integer power of a square matrix (negative powers are not supported).
    pub fn pow(&self, exponent: u32) -> Self {
        let mut out = Self::identity(self.rows());
        for _ in 0..exponent {
            out = &out * self;
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs.0)
    }
}

/// Kronecker product; `a` occupies the slow index.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    ComplexMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a.0[(i / br, j / bc)] * b.0[(i % br, j % bc)]
    })
}

/// Kronecker product of two state vectors.
pub fn kron_vec(a: &StateVector, b: &StateVector) -> StateVector {
    StateVector::from_fn(a.len() * b.len(), |i, _| a[i / b.len()] * b[i % b.len()])
}

/// Traces out `which` from a bipartite operator.
pub fn partial_trace(m: &ComplexMatrix, dims: SubsystemDims, which: Subsystem) -> Result<ComplexMatrix> {
    dims.check(m)?;
    let keep = match which {
        Subsystem::First => 1,
        Subsystem::Second => 0,
    };
    reduce(m, &dims.as_array(), &[keep])
}

/// Transposes the indices of `which` only.
pub fn partial_transpose(
    m: &ComplexMatrix,
    dims: SubsystemDims,
    which: Subsystem,
) -> Result<ComplexMatrix> {
    dims.check(m)?;
    let db = dims.second;
    Ok(ComplexMatrix::from_fn(m.rows(), m.cols(), |r, c| {
        let (ra, rb) = (r / db, r % db);
        let (ca, cb) = (c / db, c % db);
        match which {
            Subsystem::First => m.0[(ca * db + rb, ra * db + cb)],
            Subsystem::Second => m.0[(ra * db + cb, ca * db + rb)],
        }
    }))
}

/// `exp(scale * H)` for Hermitian `H`, via its eigendecomposition.
pub fn expm_hermitian(h: &ComplexMatrix, scale: C64) -> Result<ComplexMatrix> {
    let eig = h.eigh()?;
    let phases: Vec<C64> = eig.values.iter().map(|&l| (scale * l).exp()).collect();
    let v = &eig.vectors;
    Ok(&(v * &ComplexMatrix::from_diagonal(&phases)) * &v.adjoint())
}

pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(mismatch(format!(
            "cannot compare {}x{} with {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok((a - b).frobenius_norm())
}

/// Euclidean distance between two state vectors.
pub fn vector_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(mismatch(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    Ok((a - b).norm())
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Flat offsets of every multi-index over `subsystems`, enumerated in the
/// global ordering restricted to those subsystems.
fn offsets(dims: &[usize], subsystems: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &s in subsystems {
        let mut next = Vec::with_capacity(out.len() * dims[s]);
        for &base in &out {
            for digit in 0..dims[s] {
                next.push(base + digit * st[s]);
            }
        }
        out = next;
    }
    out
}

fn check_multi(m: &ComplexMatrix, dims: &[usize], subsystems: &[usize]) -> Result<()> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return Err(mismatch(format!(
            "{}x{} matrix does not match subsystem dims {dims:?}",
            m.rows(),
            m.cols()
        )));
    }
    let mut seen = vec![false; dims.len()];
    for &s in subsystems {
        if s >= dims.len() || seen[s] {
            return Err(invalid(format!("bad subsystem selection {subsystems:?} for {dims:?}")));
        }
        seen[s] = true;
    }
    Ok(())
}

/// Traces out every subsystem not listed in `keep`; the result is ordered as
/// `keep` lists them, which allows relabeling subsystems in the same step.
pub fn reduce(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_multi(m, dims, keep)?;
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep.contains(s)).collect();
    let kept = offsets(dims, keep);
    let gone = offsets(dims, &traced);
    let n = kept.len();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        gone.iter()
            .map(|&t| m.0[(kept[i] + t, kept[j] + t)])
            .sum()
    }))
}

/// Side on which [`apply_local`] multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Multiplies `m` by `op` acting on `targets` (identity elsewhere) without
/// forming the full operator. `op` is ordered as `targets` lists them.
pub fn apply_local(
    m: &ComplexMatrix,
    dims: &[usize],
    targets: &[usize],
    op: &ComplexMatrix,
    side: Side,
) -> Result<ComplexMatrix> {
    check_multi(m, dims, targets)?;
    let t_off = offsets(dims, targets);
    if !op.is_square() || op.rows() != t_off.len() {
        return Err(mismatch(format!(
            "local operator is {}x{}, targets need dimension {}",
            op.rows(),
            op.cols(),
            t_off.len()
        )));
    }
    let rest: Vec<usize> = (0..dims.len()).filter(|s| !targets.contains(s)).collect();
    let r_off = offsets(dims, &rest);
    let n = m.rows();
    let dt = t_off.len();
    let mut out = DMatrix::from_element(n, n, ZERO);
    let mut buf = vec![ZERO; dt];
    for &r in &r_off {
        for other in 0..n {
            for (t, slot) in buf.iter_mut().enumerate() {
                *slot = match side {
                    Side::Left => m.0[(t_off[t] + r, other)],
                    Side::Right => m.0[(other, t_off[t] + r)],
                };
            }
            for t in 0..dt {
                let mut acc = ZERO;
                for (tp, &v) in buf.iter().enumerate() {
                    acc += match side {
                        Side::Left => op.0[(t, tp)] * v,
                        Side::Right => v * op.0[(tp, t)],
                    };
                }
                match side {
                    Side::Left => out[(t_off[t] + r, other)] = acc,
                    Side::Right => out[(other, t_off[t] + r)] = acc,
                }
            }
        }
    }
    Ok(ComplexMatrix(out))
}

/// `P m P^dagger` with `P` acting on `targets`.
pub fn conjugate_local(
    m: &ComplexMatrix,
    dims: &[usize],
    targets: &[usize],
    op: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let left = apply_local(m, dims, targets, op, Side::Left)?;
    apply_local(&left, dims, targets, &op.adjoint(), Side::Right)
}
