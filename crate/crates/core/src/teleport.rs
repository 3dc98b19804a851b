//! Incomplete teleportation: Alice measures `{pi0, pi1}` on her particle `a'`
//! and her half `a` of a shared singlet, and sends Bob one bit.
//!
//! The intermediate state is ordered `(a', b', a, b)` (or `(a', a, b)` for a
//! single-particle input). Teleported states come back ordered `(b, b')`, so
//! Bob's new particle `b` takes the place `a'` had in the input.

use crate::error::{invalid, mismatch, Error, Result};
use crate::spin::{spin_projectors, SpinLabel};
use crate::states::{DensityMatrix, Witness};
use crate::tensor::{
    conjugate_local, frobenius_distance, kron, partial_trace, reduce, ComplexMatrix, Subsystem,
    SubsystemDims, DEFAULT_TOLERANCE,
};

/// One of Alice's two measurement outcomes.
#[derive(Clone, Debug)]
pub struct BranchOutcome {
    pub index: u8,
    pub probability: f64,
    /// `X^(i)`, with `Tr X^(i) = p_i`.
    pub unnormalized: ComplexMatrix,
    /// `rho^(i) = X^(i) / p_i`.
    pub state: DensityMatrix,
}

/// How the input state is laid out relative to Alice's particle.
#[derive(Clone, Copy, Debug)]
struct Layout {
    d: usize,
    spectator: Option<usize>,
}

impl Layout {
    fn of(rho: &DensityMatrix, d: usize) -> Result<Self> {
        SpinLabel::from_dim(d)?;
        match rho.dims() {
            Some(dims) => {
                if dims.first() != d {
                    return Err(mismatch(format!(
                        "first subsystem has dimension {}, protocol runs at d = {d}",
                        dims.first()
                    )));
                }
                Ok(Self {
                    d,
                    spectator: Some(dims.second()),
                })
            }
            None => {
                if rho.dim() != d {
                    return Err(mismatch(format!(
                        "single-particle state has dimension {}, protocol runs at d = {d}",
                        rho.dim()
                    )));
                }
                Ok(Self { d, spectator: None })
            }
        }
    }

    fn output_dims(&self) -> Result<Option<SubsystemDims>> {
        self.spectator.map(|s| SubsystemDims::new(self.d, s)).transpose()
    }

    /// Subsystem dims of the full state, Alice's pair, and Bob's output order.
    fn wiring(&self) -> (Vec<usize>, [usize; 2], Vec<usize>) {
        let d = self.d;
        match self.spectator {
            Some(s) => (vec![d, s, d, d], [0, 2], vec![3, 1]),
            None => (vec![d, d, d], [0, 1], vec![2]),
        }
    }
}

fn branch(index: u8, unnormalized: ComplexMatrix, dims: Option<SubsystemDims>) -> Result<BranchOutcome> {
    let probability = unnormalized.trace().re;
    if probability <= 0.0 {
        return Err(Error::Protocol(format!("branch {index} has probability {probability}")));
    }
    let state = unnormalized.scale_real(1.0 / probability);
    let state = (&state + &state.adjoint()).scale_real(0.5);
    Ok(BranchOutcome {
        index,
        probability,
        unnormalized,
        state: DensityMatrix::new_unchecked(state, dims),
    })
}

/// Runs the measurement with `pi0` as Alice's spin-zero projector on `(a', a)`.
fn teleport_with_projector(rho: &DensityMatrix, layout: Layout, pi0: &ComplexMatrix) -> Result<[BranchOutcome; 2]> {
    let d = layout.d;
    let singlet = spin_projectors(d)?.pi0;
    let full = kron(rho.matrix(), &singlet);
    let (dims, alice, bob) = layout.wiring();
    let pi1 = &ComplexMatrix::identity(d * d) - pi0;
    let out_dims = layout.output_dims()?;
    let mut outcomes = Vec::with_capacity(2);
    for (index, proj) in [(0u8, pi0), (1u8, &pi1)] {
        let sandwiched = conjugate_local(&full, &dims, &alice, proj)?;
        let x = reduce(&sandwiched, &dims, &bob)?;
        outcomes.push(branch(index, x, out_dims)?);
    }
    let one = outcomes.pop().expect("two branches");
    let zero = outcomes.pop().expect("two branches");
    Ok([zero, one])
}

/// `X^(i) = Tr_{a a'}[pi_i (rho (x) Psi_ab) pi_i]` evaluated directly on the
/// full three- or four-particle state.
pub fn teleport_branches(rho: &DensityMatrix, d: usize) -> Result<[BranchOutcome; 2]> {
    let layout = Layout::of(rho, d)?;
    teleport_with_projector(rho, layout, &spin_projectors(d)?.pi0)
}

/// Closed forms: `rho^(0) = rho` with `p0 = 1/d^2`, and
/// `rho^(1) = [d (I (x) rho_2) - rho] / (d^2 - 1)` with `p1 = 1 - 1/d^2`.
/// For a single particle `rho_2` is the scalar `Tr rho = 1`.
pub fn closed_form_branches(rho: &DensityMatrix, d: usize) -> Result<[BranchOutcome; 2]> {
    let layout = Layout::of(rho, d)?;
    let df = d as f64;
    let p0 = 1.0 / (df * df);
    let lifted_marginal = match rho.dims() {
        Some(_) => kron(&ComplexMatrix::identity(d), rho.second_marginal()?.matrix()),
        None => ComplexMatrix::identity(d),
    };
    let numerator = &lifted_marginal.scale_real(df) - rho.matrix();
    let rho1 = numerator.scale_real(1.0 / (df * df - 1.0));
    let out_dims = layout.output_dims()?;
    Ok([
        BranchOutcome {
            index: 0,
            probability: p0,
            unnormalized: rho.matrix().scale_real(p0),
            state: DensityMatrix::new_unchecked(rho.matrix().clone(), out_dims),
        },
        BranchOutcome {
            index: 1,
            probability: 1.0 - p0,
            unnormalized: rho1.scale_real(1.0 - p0),
            state: DensityMatrix::new_unchecked(rho1, out_dims),
        },
    ])
}

/// Bob's two observables, selected by Alice's bit.
#[derive(Clone, Debug)]
pub struct ObservablePair {
    /// `G^(0) = G`
    pub zero: ComplexMatrix,
    /// `G^(1) = d (I (x) G_2) - (d^2 - 1) G`
    pub one: ComplexMatrix,
    /// `G_2 = Tr_1 G`
    pub marginal: ComplexMatrix,
}

impl ObservablePair {
    pub fn select(&self, bit: u8) -> &ComplexMatrix {
        if bit == 0 {
            &self.zero
        } else {
            &self.one
        }
    }
}

/// Same transformation for a labeled witness.
#[derive(Clone, Debug)]
pub struct WitnessPair {
    pub w0: Witness,
    pub w1: Witness,
    pub marginal: ComplexMatrix,
}

impl WitnessPair {
    pub fn select(&self, bit: u8) -> &Witness {
        if bit == 0 {
            &self.w0
        } else {
            &self.w1
        }
    }
}

/// `(2j+1) I (x) G_2 - 4j(j+1) G` and `G` itself.
pub fn transform_observable(g: &ComplexMatrix, dims: SubsystemDims, d: usize) -> Result<ObservablePair> {
    let spin = SpinLabel::from_dim(d)?;
    if dims.first() != d {
        return Err(mismatch(format!(
            "observable acts on ({}, {}), protocol runs at d = {d}",
            dims.first(),
            dims.second()
        )));
    }
    if g.rows() != dims.total() || !g.is_square() {
        return Err(mismatch("observable does not match its dims"));
    }
    let deviation = g.hermiticity_deviation();
    if deviation > DEFAULT_TOLERANCE * g.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let marginal = partial_trace(g, dims, Subsystem::First)?;
    let lifted = kron(&ComplexMatrix::identity(d), &marginal);
    let one = &lifted.scale_real(d as f64) - &g.scale_real(4.0 * spin.casimir());
    Ok(ObservablePair {
        zero: g.clone(),
        one,
        marginal,
    })
}

pub fn transform_witness(w: &Witness, d: usize) -> Result<WitnessPair> {
    let pair = transform_observable(w.matrix(), w.dims(), d)?;
    Ok(WitnessPair {
        w0: w.clone(),
        w1: Witness::new(pair.one, w.dims(), format!("{}^(1)", w.label()))?,
        marginal: pair.marginal,
    })
}

/// Everything one run of the protocol produces for a given witness.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub branches: [BranchOutcome; 2],
    /// `Tr(W^(i) rho^(i))` for each branch.
    pub conditional: [f64; 2],
    /// `p0 Tr(W^(0) rho^(0)) + p1 Tr(W^(1) rho^(1))`
    pub expectation: f64,
    /// `Tr(W rho)` evaluated without teleportation.
    pub direct: f64,
}

fn evaluate(rho: &DensityMatrix, w: &Witness, d: usize, branches: [BranchOutcome; 2]) -> Result<ProtocolRun> {
    if rho.dims().is_none() {
        return Err(invalid("witness evaluation needs a bipartite state"));
    }
    if rho.dim() != w.dims().total() {
        return Err(mismatch("state and witness dimensions differ"));
    }
    let pair = transform_witness(w, d)?;
    let conditional = [
        branches[0].state.expectation(pair.w0.matrix())?,
        branches[1].state.expectation(pair.w1.matrix())?,
    ];
    let expectation = branches[0].probability * conditional[0] + branches[1].probability * conditional[1];
    Ok(ProtocolRun {
        branches,
        conditional,
        expectation,
        direct: w.value(rho)?,
    })
}

/// Runs the operational protocol and returns all intermediate quantities.
pub fn run_protocol(rho: &DensityMatrix, w: &Witness, d: usize) -> Result<ProtocolRun> {
    let branches = teleport_branches(rho, d)?;
    evaluate(rho, w, d, branches)
}

/// Witness value recovered by Bob, `sum_i p_i Tr(W^(i) rho^(i))`.
///
/// Fails with [`Error::Protocol`] if either conditional value departs from
/// `Tr(W rho)`, since each branch on its own must reproduce it.
pub fn protocol_expectation(rho: &DensityMatrix, w: &Witness, d: usize) -> Result<f64> {
    let run = run_protocol(rho, w, d)?;
    let tol = 1e-8 * w.matrix().frobenius_norm().max(1.0);
    for (i, c) in run.conditional.iter().enumerate() {
        if (c - run.direct).abs() > tol {
            return Err(Error::Protocol(format!(
                "branch {i} gives {c}, direct value is {}",
                run.direct
            )));
        }
    }
    if (run.expectation - run.direct).abs() > tol {
        return Err(Error::Protocol("combined value departs from Tr(W rho)".into()));
    }
    Ok(run.expectation)
}

/// Aligned and misaligned runs side by side.
#[derive(Clone, Debug)]
pub struct MisalignmentReport {
    pub aligned: ProtocolRun,
    pub misaligned: ProtocolRun,
    /// Largest `|p_i(misaligned) - p_i(aligned)|`.
    pub probability_gap: f64,
    /// Frobenius distance between branch states, per branch.
    pub state_distance: [f64; 2],
    pub expectation_gap: f64,
}

impl MisalignmentReport {
    pub fn is_invariant(&self, tol: f64) -> bool {
        self.probability_gap <= tol
            && self.state_distance.iter().all(|&x| x <= tol)
            && self.expectation_gap <= tol
    }
}

/// Repeats the protocol with Alice's projectors written in a frame rotated by
/// `rotation` relative to Bob's, i.e. `pi_i -> (R (x) R) pi_i (R (x) R)^dagger`.
pub fn misaligned_protocol(
    rho: &DensityMatrix,
    w: &Witness,
    d: usize,
    rotation: &ComplexMatrix,
) -> Result<MisalignmentReport> {
    if rotation.rows() != d || !rotation.is_square() {
        return Err(mismatch(format!("rotation must be {d}x{d}")));
    }
    let deviation = rotation.unitarity_deviation();
    if deviation > DEFAULT_TOLERANCE {
        return Err(Error::NotUnitary { deviation });
    }
    let layout = Layout::of(rho, d)?;
    let pi0 = spin_projectors(d)?.pi0;
    let rr = kron(rotation, rotation);
    let rotated = &(&rr * &pi0) * &rr.adjoint();

    let aligned = evaluate(rho, w, d, teleport_with_projector(rho, layout, &pi0)?)?;
    let misaligned = evaluate(rho, w, d, teleport_with_projector(rho, layout, &rotated)?)?;
    let mut probability_gap: f64 = 0.0;
    let mut state_distance = [0.0; 2];
    for ((dist, a), m) in state_distance
        .iter_mut()
        .zip(&aligned.branches)
        .zip(&misaligned.branches)
    {
        probability_gap = probability_gap.max((a.probability - m.probability).abs());
        *dist = frobenius_distance(a.state.matrix(), m.state.matrix())?;
    }
    let expectation_gap = (aligned.expectation - misaligned.expectation).abs();
    Ok(MisalignmentReport {
        aligned,
        misaligned,
        probability_gap,
        state_distance,
        expectation_gap,
    })
}
