//! Analytic identity suite behind `frameless verify`.
//!
//! Every invariant of the spin algebra, the teleportation protocol and the
//! qudit circuits is listed once in [`MANIFEST`]; [`run_verify_suite`]
//! evaluates each applicable check for every local dimension requested and
//! records the worst deviation seen.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::circuits::{apply_circuit, singlet_prep_circuit, spin_zero_meas_via_circuit, spin_zero_probability, standard_gates};
use crate::error::{invalid, Result};
use crate::spin::{angular_momentum_ops, random_rotation, singlet_state, spin_projectors, total_operator, SpinLabel};
use crate::states::{random_density_from, random_hermitian, random_pure_state, riccardi_witness, BellPair, DensityMatrix, Witness};
use crate::teleport::{misaligned_protocol, protocol_expectation, teleport_branches, transform_witness};
use crate::tensor::{frobenius_distance, kron, partial_trace, vector_distance, ComplexMatrix, StateVector, Subsystem, SubsystemDims, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckSpec {
    pub id: &'static str,
    pub module: &'static str,
    pub statement: &'static str,
    pub tolerance: f64,
    /// Only meaningful for this local dimension.
    pub only_d: Option<usize>,
}

const fn spec(id: &'static str, module: &'static str, statement: &'static str, tolerance: f64, only_d: Option<usize>) -> CheckSpec {
    CheckSpec {
        id,
        module,
        statement,
        tolerance,
        only_d,
    }
}

pub const MANIFEST: [CheckSpec; 13] = [
    spec("singlet-rotation-invariance", "spin", "||(R (x) R)|Psi> - |Psi>|| for random rotations", 1e-9, None),
    spec("total-spin-annihilation", "spin", "||J_mu^tot |Psi>|| for mu in {z, +, -}", 1e-10, None),
    spec("pi0-rotation-invariance", "spin", "||(R (x) R) pi0 (R (x) R)^dag - pi0||_F", 1e-9, None),
    spec("spin-half-pauli", "spin", "J_mu = sigma_mu / 2 and J+ = sigma+ for j = 1/2", 1e-12, Some(2)),
    spec("witness-transport", "teleport", "|Tr(W1 rho1) - Tr(W rho)| on the operational branch", 1e-9, None),
    spec("qubit-kraus-form", "teleport", "outcome-1 qubit channel vs (sx r sx + sy r sy + sz r sz)/3", 1e-10, Some(2)),
    spec("trace-identities", "teleport", "Tr((I(x)W2)(I(x)r2)) = d Tr(W2 r2), Tr((I(x)W2) r) = Tr(W (I(x)r2)) = Tr(W2 r2)", 1e-10, None),
    spec("branch-probabilities", "teleport", "p0 + p1 = 1 and p0 = 1/d^2", 1e-12, None),
    spec("swapping-sign", "teleport", "sign of the protocol value matches the direct value on pure inputs", 0.0, None),
    spec("misalignment-invariance", "teleport", "rotated projectors leave p_i, branch states and the value unchanged", 1e-9, None),
    spec("circuit-projector", "circuits", "|P(0,0) of reversed circuit - <psi|pi0|psi>|", 1e-10, None),
    spec("gates-unitary", "circuits", "gates unitary, CNOT a permutation with one 1 per row and column", 1e-12, None),
    spec("hadamard-order", "circuits", "(H^2)^2 = I", 1e-12, None),
];

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub module: &'static str,
    pub d: usize,
    pub trials: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// Manifest entries with at least one evaluated outcome.
    pub fn covered(&self) -> usize {
        MANIFEST
            .iter()
            .filter(|s| self.outcomes.iter().any(|o| o.id == s.id))
            .count()
    }

    pub fn covers_manifest(&self) -> bool {
        self.covered() == MANIFEST.len()
    }
}

fn pauli_halves() -> Result<[ComplexMatrix; 4]> {
    // Standard-order Paulis written in the k-basis {m = -1/2, m = +1/2}.
    let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])?;
    let y = ComplexMatrix::new(2, 2, vec![ZERO, C64::new(0.0, 1.0), C64::new(0.0, -1.0), ZERO])?;
    let z = ComplexMatrix::from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0])?;
    let plus = ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 1.0, 0.0])?;
    Ok([x, y, z, plus])
}

fn paulis() -> Result<[ComplexMatrix; 3]> {
    Ok([
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])?,
        ComplexMatrix::new(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO])?,
        ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])?,
    ])
}

fn random_state(rng: &mut ChaCha20Rng, d: usize) -> Result<DensityMatrix> {
    random_density_from(rng, d * d, d * d)?.with_dims(SubsystemDims::square(d)?)
}

fn random_witness(rng: &mut ChaCha20Rng, d: usize) -> Result<Witness> {
    Witness::new(random_hermitian(rng, d * d), SubsystemDims::square(d)?, "random")
}

/// Worst deviation of one check at one dimension.
fn evaluate(id: &str, d: usize, trials: usize, rng: &mut ChaCha20Rng) -> Result<f64> {
    let spin = SpinLabel::from_dim(d)?;
    let dims = SubsystemDims::square(d)?;
    let mut worst: f64 = 0.0;
    match id {
        "singlet-rotation-invariance" => {
            let psi = singlet_state(d)?;
            for _ in 0..trials {
                let r = random_rotation(spin, rng);
                worst = worst.max(vector_distance(&kron(&r, &r).apply(&psi)?, &psi)?);
            }
        }
        "total-spin-annihilation" => {
            let psi = singlet_state(d)?;
            let ops = angular_momentum_ops(spin);
            for op in [&ops.jz, &ops.jplus, &ops.jminus] {
                worst = worst.max(total_operator(op).apply(&psi)?.norm());
            }
        }
        "pi0-rotation-invariance" => {
            let pi0 = spin_projectors(d)?.pi0;
            for _ in 0..trials {
                let r = random_rotation(spin, rng);
                let rr = kron(&r, &r);
                worst = worst.max(frobenius_distance(&(&(&rr * &pi0) * &rr.adjoint()), &pi0)?);
            }
        }
        "spin-half-pauli" => {
            let ops = angular_momentum_ops(spin);
            let [x, y, z, plus] = pauli_halves()?;
            for (j, s) in [(&ops.jx, x), (&ops.jy, y), (&ops.jz, z)] {
                worst = worst.max(frobenius_distance(j, &s.scale_real(0.5))?);
            }
            worst = worst.max(frobenius_distance(&ops.jplus, &plus)?);
            worst = worst.max(frobenius_distance(&ops.jminus, &plus.adjoint())?);
        }
        "witness-transport" => {
            for _ in 0..trials {
                let rho = random_state(rng, d)?;
                let w = random_witness(rng, d)?;
                let pair = transform_witness(&w, d)?;
                let branches = teleport_branches(&rho, d)?;
                let transported = pair.w1.value(&branches[1].state)?;
                worst = worst.max((transported - w.value(&rho)?).abs());
            }
        }
        "qubit-kraus-form" => {
            let sigma = paulis()?;
            for _ in 0..trials {
                let rho = random_density_from(rng, 2, 2)?;
                let out = teleport_branches(&rho, 2)?[1].state.matrix().clone();
                let mut kraus = ComplexMatrix::zeros(2, 2);
                for s in &sigma {
                    kraus = &kraus + &(&(s * rho.matrix()) * s);
                }
                worst = worst.max(frobenius_distance(&out, &kraus.scale_real(1.0 / 3.0))?);
            }
        }
        "trace-identities" => {
            let id_d = ComplexMatrix::identity(d);
            for _ in 0..trials {
                let rho = random_state(rng, d)?;
                let w = random_witness(rng, d)?;
                let w2 = partial_trace(w.matrix(), dims, Subsystem::First)?;
                let r2 = partial_trace(rho.matrix(), dims, Subsystem::First)?;
                let base = w2.trace_product(&r2)?;
                let lifted_w = kron(&id_d, &w2);
                let lifted_r = kron(&id_d, &r2);
                let scale = w.matrix().frobenius_norm().max(1.0);
                let gaps = [
                    lifted_w.trace_product(&lifted_r)? - base * d as f64,
                    lifted_w.trace_product(rho.matrix())? - base,
                    w.matrix().trace_product(&lifted_r)? - base,
                ];
                for g in gaps {
                    worst = worst.max(g.norm() / scale);
                }
            }
        }
        "branch-probabilities" => {
            let expected = 1.0 / (d * d) as f64;
            for _ in 0..trials {
                let b = teleport_branches(&random_state(rng, d)?, d)?;
                worst = worst
                    .max((b[0].probability + b[1].probability - 1.0).abs())
                    .max((b[0].probability - expected).abs());
            }
        }
        "swapping-sign" => {
            let mut witnesses = Vec::new();
            if d == 2 {
                witnesses.push(riccardi_witness(1.0, 0.0, BellPair::default())?);
                witnesses.push(riccardi_witness(0.6, 0.8, BellPair::default())?);
            }
            let mut mismatches = 0usize;
            for _ in 0..trials {
                let psi = random_pure_state(rng, d * d);
                let rho = DensityMatrix::from_pure(&psi, Some(dims))?;
                witnesses.push(random_witness(rng, d)?);
                for w in &witnesses {
                    let direct = w.value(&rho)?;
                    let protocol = protocol_expectation(&rho, w, d)?;
                    if direct.abs() > 1e-9 && (direct < 0.0) != (protocol < 0.0) {
                        mismatches += 1;
                    }
                }
                witnesses.pop();
            }
            worst = mismatches as f64;
        }
        "misalignment-invariance" => {
            for _ in 0..trials {
                let rho = random_state(rng, d)?;
                let w = random_witness(rng, d)?;
                let r = random_rotation(spin, rng);
                let report = misaligned_protocol(&rho, &w, d, &r)?;
                worst = worst
                    .max(report.probability_gap)
                    .max(report.state_distance[0])
                    .max(report.state_distance[1])
                    .max(report.expectation_gap);
            }
        }
        "circuit-projector" => {
            for _ in 0..trials {
                let psi = random_pure_state(rng, d * d);
                worst = worst.max((spin_zero_meas_via_circuit(d, &psi)? - spin_zero_probability(d, &psi)?).abs());
            }
            // The forward circuit on |0,0> must also give the singlet.
            let mut zero = StateVector::from_element(d * d, ZERO);
            zero[0] = ONE;
            let out = apply_circuit(&singlet_prep_circuit(d)?, &zero)?;
            worst = worst.max(vector_distance(&out, &singlet_state(d)?)?);
        }
        "gates-unitary" => {
            let g = standard_gates(d)?;
            for m in [&g.x, &g.z, &g.h, &g.cnot, &g.parity] {
                worst = worst.max(m.unitarity_deviation());
            }
            let n = d * d;
            for i in 0..n {
                let row_ones = (0..n).filter(|&j| g.cnot.get(i, j) == ONE).count();
                let col_ones = (0..n).filter(|&j| g.cnot.get(j, i) == ONE).count();
                let others = (0..n)
                    .filter(|&j| g.cnot.get(i, j) != ONE && g.cnot.get(i, j) != ZERO)
                    .count();
                if row_ones != 1 || col_ones != 1 || others != 0 {
                    worst = worst.max(1.0);
                }
            }
        }
        "hadamard-order" => {
            let h = standard_gates(d)?.h;
            worst = frobenius_distance(&h.pow(4), &ComplexMatrix::identity(d))?;
        }
        other => return Err(invalid(format!("unknown check `{other}`"))),
    }
    Ok(worst)
}

/// Runs every manifest check for `d` in `dmin..=dmax`.
pub fn run_verify_suite(dmin: usize, dmax: usize, trials: usize, seed: u64) -> Result<VerifyReport> {
    if dmin < 2 || dmax < dmin {
        return Err(invalid(format!("dimension range {dmin}..={dmax} must satisfy 2 <= dmin <= dmax")));
    }
    if trials == 0 {
        return Err(invalid("at least one trial per check"));
    }
    let mut report = VerifyReport::default();
    for d in dmin..=dmax {
        for (k, s) in MANIFEST.iter().enumerate() {
            if s.only_d.is_some_and(|only| only != d) {
                continue;
            }
            // Independent stream per (d, check) so results do not depend on
            // which other checks ran.
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream((d * MANIFEST.len() + k) as u64);
            let worst = evaluate(s.id, d, trials, &mut rng)?;
            report.outcomes.push(CheckOutcome {
                id: s.id,
                module: s.module,
                d,
                trials,
                worst,
                tolerance: s.tolerance,
                passed: worst <= s.tolerance,
            });
        }
    }
    Ok(report)
}
