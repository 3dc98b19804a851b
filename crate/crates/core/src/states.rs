//! Density matrices, witnesses, random and structured state families, the
//! PPT oracle and witness validation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, mismatch, Error, Result};
use crate::spin::singlet_state;
use crate::tensor::{
    kron, kron_vec, partial_trace, partial_transpose, ComplexMatrix, StateVector, Subsystem,
    SubsystemDims, C64, DEFAULT_TOLERANCE, ZERO,
};

/// A trace-one positive semidefinite operator, optionally bipartite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Option<SubsystemDims>,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and unit trace within `tol`.
    pub fn new(matrix: ComplexMatrix, dims: Option<SubsystemDims>, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(mismatch("density matrix must be square"));
        }
        if let Some(d) = dims {
            if d.total() != matrix.rows() {
                return Err(mismatch(format!(
                    "dims ({}, {}) do not match a {}x{} matrix",
                    d.first(),
                    d.second(),
                    matrix.rows(),
                    matrix.rows()
                )));
            }
        }
        let deviation = matrix.hermiticity_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = matrix.eigh()?.min_value();
        if min < -tol {
            return Err(invalid(format!("density matrix has negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix, dims })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix, dims: Option<SubsystemDims>) -> Self {
        Self { matrix, dims }
    }

    /// `|v><v| / <v|v>`.
    pub fn from_pure(v: &StateVector, dims: Option<SubsystemDims>) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(invalid("zero state vector"));
        }
        Self::new(ComplexMatrix::outer(&(v / C64::new(n, 0.0))), dims, DEFAULT_TOLERANCE)
    }

    pub fn maximally_mixed(dim: usize, dims: Option<SubsystemDims>) -> Result<Self> {
        Self::new(
            ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
            dims,
            DEFAULT_TOLERANCE,
        )
    }

    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Result<Self> {
        let dims = SubsystemDims::new(a.dim(), b.dim())?;
        Ok(Self::new_unchecked(kron(&a.matrix, &b.matrix), Some(dims)))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> Option<SubsystemDims> {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn with_dims(self, dims: SubsystemDims) -> Result<Self> {
        if dims.total() != self.dim() {
            return Err(mismatch("dims do not match state dimension"));
        }
        Ok(Self {
            dims: Some(dims),
            ..self
        })
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).expect("square").re
    }

    /// `Tr(O rho)`, real part.
    pub fn expectation(&self, observable: &ComplexMatrix) -> Result<f64> {
        Ok(observable.trace_product(&self.matrix)?.re)
    }

    /// Reduced state of the second factor (`rho_2 = Tr_1 rho`).
    pub fn second_marginal(&self) -> Result<DensityMatrix> {
        let dims = self.bipartite()?;
        Ok(Self::new_unchecked(
            partial_trace(&self.matrix, dims, Subsystem::First)?,
            None,
        ))
    }

    pub fn bipartite(&self) -> Result<SubsystemDims> {
        self.dims
            .ok_or_else(|| invalid("operation needs a bipartite state"))
    }
}

/// A Hermitian operator on a bipartite space with a label.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    matrix: ComplexMatrix,
    dims: SubsystemDims,
    label: String,
}

impl Witness {
    pub fn new(matrix: ComplexMatrix, dims: SubsystemDims, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != dims.total() {
            return Err(mismatch(format!(
                "witness matrix {}x{} does not match dims ({}, {})",
                matrix.rows(),
                matrix.cols(),
                dims.first(),
                dims.second()
            )));
        }
        let deviation = matrix.hermiticity_deviation();
        if deviation > DEFAULT_TOLERANCE * matrix.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            matrix,
            dims,
            label: label.into(),
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> SubsystemDims {
        self.dims
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_negative_eigenvalue(&self, tol: f64) -> Result<bool> {
        Ok(self.matrix.eigh()?.min_value() < -tol)
    }

    /// `Tr(W rho)`.
    pub fn value(&self, rho: &DensityMatrix) -> Result<f64> {
        rho.expectation(&self.matrix)
    }
}

/// One term `p (rho_a (x) rho_b)` of a separable decomposition.
#[derive(Clone, Debug)]
pub struct ProductTerm {
    pub probability: f64,
    pub first: DensityMatrix,
    pub second: DensityMatrix,
}

/// Certificate of separability: an explicit convex mixture of product states.
#[derive(Clone, Debug)]
pub struct SeparableEnsemble {
    pub terms: Vec<ProductTerm>,
}

impl SeparableEnsemble {
    pub fn to_density(&self) -> Result<DensityMatrix> {
        let first = self
            .terms
            .first()
            .ok_or_else(|| invalid("empty separable ensemble"))?;
        let dims = SubsystemDims::new(first.first.dim(), first.second.dim())?;
        let mut acc = ComplexMatrix::zeros(dims.total(), dims.total());
        for t in &self.terms {
            let prod = kron(t.first.matrix(), t.second.matrix());
            acc = &acc + &prod.scale_real(t.probability);
        }
        DensityMatrix::new(acc, Some(dims), DEFAULT_TOLERANCE)
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Ginibre state `G G^dagger / Tr(G G^dagger)` with `G` a `dim x rank`
/// complex Gaussian matrix drawn from `rng`.
pub fn random_density_from<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(invalid(format!("rank must be in 1..={dim}, got {rank}")));
    }
    let g = gaussian_matrix(rng, dim, rank);
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    let mut m = gg.scale_real(1.0 / tr);
    // exact Hermiticity
    m = (&m + &m.adjoint()).scale_real(0.5);
    Ok(DensityMatrix::new_unchecked(m, None))
}

pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    random_density_from(&mut rng, dim, rank)
}

/// Random bipartite state of full rank on `dims`.
pub fn random_bipartite_from<R: Rng + ?Sized>(rng: &mut R, dims: SubsystemDims, rank: usize) -> Result<DensityMatrix> {
    random_density_from(rng, dims.total(), rank)?.with_dims(dims)
}

pub fn random_separable(dims: SubsystemDims, terms: usize, seed: u64) -> Result<(DensityMatrix, SeparableEnsemble)> {
    if terms == 0 {
        return Err(invalid("a separable mixture needs at least one term"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..terms).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(terms);
    for w in weights {
        let ra = rng.random_range(1..=dims.first());
        let rb = rng.random_range(1..=dims.second());
        out.push(ProductTerm {
            probability: w / total,
            first: random_density_from(&mut rng, dims.first(), ra)?,
            second: random_density_from(&mut rng, dims.second(), rb)?,
        });
    }
    let ensemble = SeparableEnsemble { terms: out };
    Ok((ensemble.to_density()?, ensemble))
}

/// `p |psi-><psi-| + (1-p) I/4`.
pub fn werner_state(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("Werner weight must lie in [0, 1], got {p}")));
    }
    let psi = singlet_state(2)?;
    let m = &ComplexMatrix::outer(&psi).scale_real(p) + &ComplexMatrix::identity(4).scale_real((1.0 - p) / 4.0);
    Ok(DensityMatrix::new_unchecked(m, Some(SubsystemDims::square(2)?)))
}

/// `(1/sqrt d) sum_k omega^{km} |k, k+n mod d>`.
pub fn bell_state(m: usize, n: usize, d: usize) -> Result<StateVector> {
    if d < 2 || m >= d || n >= d {
        return Err(invalid(format!("Bell indices ({m}, {n}) out of range for d = {d}")));
    }
    let amp = 1.0 / (d as f64).sqrt();
    let mut v = StateVector::from_element(d * d, ZERO);
    for k in 0..d {
        let phase = 2.0 * std::f64::consts::PI * ((k * m) % d) as f64 / d as f64;
        v[k * d + (k + n) % d] = C64::from_polar(amp, phase);
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PptVerdict {
    Entangled,
    NotDetected,
}

/// Peres-Horodecki test: entangled iff the partial transpose has an
/// eigenvalue below `-tol`. Exact for 2x2 and 2x3, one-sided otherwise.
pub fn ppt_is_entangled(rho: &DensityMatrix, tol: f64) -> Result<PptVerdict> {
    Ok(if ppt_min_eigenvalue(rho)? < -tol {
        PptVerdict::Entangled
    } else {
        PptVerdict::NotDetected
    })
}

pub fn ppt_min_eigenvalue(rho: &DensityMatrix) -> Result<f64> {
    let dims = rho.bipartite()?;
    let pt = partial_transpose(rho.matrix(), dims, Subsystem::Second)?;
    Ok(pt.eigh()?.min_value())
}

/// The four two-qubit Bell states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub fn state(self) -> StateVector {
        let (m, n) = match self {
            BellLabel::PhiPlus => (0, 0),
            BellLabel::PhiMinus => (1, 0),
            BellLabel::PsiPlus => (0, 1),
            BellLabel::PsiMinus => (1, 1),
        };
        bell_state(m, n, 2).expect("valid qubit Bell indices")
    }

    fn token(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        }
    }
}

impl FromStr for BellLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi+" => Ok(BellLabel::PhiPlus),
            "phi-" => Ok(BellLabel::PhiMinus),
            "psi+" => Ok(BellLabel::PsiPlus),
            "psi-" => Ok(BellLabel::PsiMinus),
            other => Err(invalid(format!("unknown Bell state `{other}`"))),
        }
    }
}

/// The two Bell states superposed in a Riccardi-family witness.
///
/// The default pair `(phi+, phi-)` gives the diagonally-correlated Pauli form
/// `(1/4)[II + ZZ + (a^2-b^2)(XX + YY) + 2ab(ZI + IZ)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BellPair {
    pub first: BellLabel,
    pub second: BellLabel,
}

impl BellPair {
    pub fn new(first: BellLabel, second: BellLabel) -> Result<Self> {
        if first == second {
            return Err(invalid("Bell pair must contain two different states"));
        }
        Ok(Self { first, second })
    }
}

impl Default for BellPair {
    fn default() -> Self {
        Self {
            first: BellLabel::PhiPlus,
            second: BellLabel::PhiMinus,
        }
    }
}

impl fmt::Display for BellPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::default() {
            f.write_str("default")
        } else {
            write!(f, "{},{}", self.first.token(), self.second.token())
        }
    }
}

impl FromStr for BellPair {
    type Err = Error;
    /// `default` or `<label>,<label>` with labels `phi+ phi- psi+ psi-`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "default" {
            return Ok(Self::default());
        }
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| invalid(format!("Bell pair `{s}` must be `default` or `x,y`")))?;
        Self::new(a.parse()?, b.parse()?)
    }
}

/// `|phi><phi|^Gamma` with `|phi> = a|phi_1> + b|phi_2>`.
pub fn riccardi_witness(a: f64, b: f64, pair: BellPair) -> Result<Witness> {
    let norm = a * a + b * b;
    if (norm - 1.0).abs() > DEFAULT_TOLERANCE {
        return Err(invalid(format!("Riccardi coefficients need a^2 + b^2 = 1, got {norm}")));
    }
    let phi = pair.first.state() * C64::new(a, 0.0) + pair.second.state() * C64::new(b, 0.0);
    let dims = SubsystemDims::square(2)?;
    let w = partial_transpose(&ComplexMatrix::outer(&phi), dims, Subsystem::Second)?;
    Witness::new(w, dims, format!("riccardi({a},{b},{pair})"))
}

/// Outcome of [`validate_witness`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessReport {
    /// Smallest `<a,b|W|a,b>` found over product vectors.
    pub min_product_value: f64,
    pub has_negative_eigenvalue: bool,
}

impl WitnessReport {
    /// Nonnegative on product states and negative somewhere.
    pub fn is_valid_witness(&self, tol: f64) -> bool {
        self.min_product_value >= -tol && self.has_negative_eigenvalue
    }
}

/// Haar-random pure state of length `dim`.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    random_unit(rng, dim)
}

/// Hermitian matrix `(G + G^dagger) / 2` with Gaussian `G`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, n, n);
    (&g + &g.adjoint()).scale_real(0.5)
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    let v = StateVector::from_fn(dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// `<a| W |a>` contracted on the first factor, a matrix on the second.
fn contract_first(w: &ComplexMatrix, dims: SubsystemDims, a: &StateVector) -> ComplexMatrix {
    let (da, db) = (dims.first(), dims.second());
    ComplexMatrix::from_fn(db, db, |r, c| {
        let mut acc = ZERO;
        for i in 0..da {
            for k in 0..da {
                acc += a[i].conj() * w.get(i * db + r, k * db + c) * a[k];
            }
        }
        acc
    })
}

fn contract_second(w: &ComplexMatrix, dims: SubsystemDims, b: &StateVector) -> ComplexMatrix {
    let (da, db) = (dims.first(), dims.second());
    ComplexMatrix::from_fn(da, da, |r, c| {
        let mut acc = ZERO;
        for i in 0..db {
            for k in 0..db {
                acc += b[i].conj() * w.get(r * db + i, c * db + k) * b[k];
            }
        }
        acc
    })
}

const REFINE_MAX_ITERS: usize = 500;
const REFINE_STOP: f64 = 1e-14;

/// Minimizes `<a,b|W|a,b>` from one starting point by alternating exact
/// minimizations over each factor (each is a smallest-eigenvector problem).
fn refine_product_minimum(w: &ComplexMatrix, dims: SubsystemDims, start: StateVector) -> Result<f64> {
    let mut a = start;
    let mut value = f64::INFINITY;
    for _ in 0..REFINE_MAX_ITERS {
        let eb = contract_first(w, dims, &a).eigh()?;
        let b = eb.vector(0);
        let ea = contract_second(w, dims, &b).eigh()?;
        a = ea.vector(0);
        let next = ea.min_value();
        if (value - next).abs() <= REFINE_STOP {
            return Ok(next);
        }
        value = next;
    }
    Ok(value)
}

/// Searches for the minimum of `W` over product states and checks the
/// spectrum for a negative eigenvalue.
pub fn validate_witness(w: &Witness, samples: usize, seed: u64) -> Result<WitnessReport> {
    if samples == 0 {
        return Err(invalid("witness validation needs at least one sample"));
    }
    let dims = w.dims();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    for _ in 0..samples {
        let start = random_unit(&mut rng, dims.first());
        min_value = min_value.min(refine_product_minimum(w.matrix(), dims, start)?);
    }
    Ok(WitnessReport {
        min_product_value: min_value,
        has_negative_eigenvalue: w.has_negative_eigenvalue(DEFAULT_TOLERANCE)?,
    })
}

/// Product vector `|a> (x) |b>` as a density matrix.
pub fn product_pure(a: &StateVector, b: &StateVector) -> Result<DensityMatrix> {
    let dims = SubsystemDims::new(a.len(), b.len())?;
    DensityMatrix::from_pure(&kron_vec(a, b), Some(dims))
}
