//! Qudit gates, the singlet-preparation circuit and its reverse, which
//! realizes the spin-zero measurement with standard qudit gates.
//!
//! Circuits serialize to a line format, one gate per line:
//!
//! ```text
//! H 0 3
//! CNOT 0,1 3
//! X^-1 1 3
//! ```
//!
//! `KIND wire[,wire] d`, where an inverted gate carries the suffix `^-1`.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, mismatch, Error, Result};
use crate::spin::{singlet_state, spin_projectors};
use crate::tensor::{ComplexMatrix, StateVector, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    /// `|k> -> |k+1 mod d>`
    X,
    /// `|k> -> omega^k |k>`
    Z,
    /// `|k> -> (1/sqrt d) sum_l omega^{kl} |l>`
    H,
    /// `|k, l> -> |k, k+l mod d>`
    Cnot,
    /// `|k> -> (-1)^k |k>`; equals `Z^{d/2}` for even `d`.
    ParityPhase,
}

impl GateKind {
    fn arity(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            _ => 1,
        }
    }

    fn token(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
            GateKind::ParityPhase => "PARITY",
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "X" => GateKind::X,
            "Z" => GateKind::Z,
            "H" => GateKind::H,
            "CNOT" => GateKind::Cnot,
            "PARITY" => GateKind::ParityPhase,
            other => return Err(invalid(format!("unknown gate `{other}`"))),
        })
    }
}

/// A gate placed on specific wires, possibly inverted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    /// One wire, or `[control, target]` for CNOT.
    pub wires: Vec<usize>,
    pub inverse: bool,
}

impl Gate {
    pub fn single(kind: GateKind, wire: usize) -> Self {
        Self {
            kind,
            wires: vec![wire],
            inverse: false,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            wires: vec![control, target],
            inverse: false,
        }
    }

    pub fn inverted(&self) -> Self {
        Self {
            inverse: !self.inverse,
            ..self.clone()
        }
    }

    /// Matrix on the gate's own wires (ordered as `wires`).
    pub fn matrix(&self, d: usize) -> Result<ComplexMatrix> {
        let g = standard_gates(d)?;
        let m = match self.kind {
            GateKind::X => g.x,
            GateKind::Z => g.z,
            GateKind::H => g.h,
            GateKind::Cnot => g.cnot,
            GateKind::ParityPhase => g.parity,
        };
        Ok(if self.inverse { m.adjoint() } else { m })
    }
}

/// The generalized gate set for one local dimension.
#[derive(Clone, Debug)]
pub struct StandardGates {
    pub x: ComplexMatrix,
    pub z: ComplexMatrix,
    pub h: ComplexMatrix,
    pub cnot: ComplexMatrix,
    pub parity: ComplexMatrix,
}

fn omega_pow(d: usize, k: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k % d) as f64 / d as f64)
}

pub fn standard_gates(d: usize) -> Result<StandardGates> {
    if d < 2 {
        return Err(invalid(format!("qudit dimension must be at least 2, got {d}")));
    }
    let x = ComplexMatrix::from_fn(d, d, |r, c| if r == (c + 1) % d { ONE } else { ZERO });
    let z = ComplexMatrix::from_fn(d, d, |r, c| if r == c { omega_pow(d, r) } else { ZERO });
    let amp = 1.0 / (d as f64).sqrt();
    let h = ComplexMatrix::from_fn(d, d, |l, k| omega_pow(d, k * l) * amp);
    let cnot = ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (k, l) = (c / d, c % d);
        if r == k * d + (k + l) % d {
            ONE
        } else {
            ZERO
        }
    });
    let parity = ComplexMatrix::from_fn(d, d, |r, c| match (r == c, r % 2) {
        (false, _) => ZERO,
        (true, 0) => ONE,
        (true, _) => -ONE,
    });
    Ok(StandardGates {
        x,
        z,
        h,
        cnot,
        parity,
    })
}

/// An ordered gate list on `wire_count` wires of local dimension `d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuditCircuit {
    d: usize,
    wire_count: usize,
    gates: Vec<Gate>,
}

impl QuditCircuit {
    pub fn new(d: usize, wire_count: usize) -> Result<Self> {
        if d < 2 || wire_count == 0 {
            return Err(invalid("circuit needs d >= 2 and at least one wire"));
        }
        Ok(Self {
            d,
            wire_count,
            gates: Vec::new(),
        })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.wires.len() != gate.kind.arity() {
            return Err(invalid(format!(
                "{} takes {} wire(s), got {}",
                gate.kind.token(),
                gate.kind.arity(),
                gate.wires.len()
            )));
        }
        if gate.wires.iter().any(|&w| w >= self.wire_count) {
            return Err(invalid(format!("wire out of range in {:?}", gate.wires)));
        }
        if gate.wires.len() == 2 && gate.wires[0] == gate.wires[1] {
            return Err(invalid("CNOT control and target must differ"));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn with(mut self, gate: Gate) -> Result<Self> {
        self.push(gate)?;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn wire_count(&self) -> usize {
        self.wire_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Reverse order, each gate inverted.
    pub fn inverse(&self) -> Self {
        Self {
            d: self.d,
            wire_count: self.wire_count,
            gates: self.gates.iter().rev().map(Gate::inverted).collect(),
        }
    }

    /// Full unitary, built by applying the circuit to each basis vector.
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        let n = self.d.pow(self.wire_count as u32);
        let mut u = ComplexMatrix::zeros(n, n);
        for c in 0..n {
            let mut e = StateVector::from_element(n, ZERO);
            e[c] = ONE;
            let out = apply_circuit(self, &e)?;
            for r in 0..n {
                u.set(r, c, out[r]);
            }
        }
        Ok(u)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for QuditCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.gates {
            let wires: Vec<String> = g.wires.iter().map(|w| w.to_string()).collect();
            let suffix = if g.inverse { "^-1" } else { "" };
            writeln!(f, "{}{} {} {}", g.kind.token(), suffix, wires.join(","), self.d)?;
        }
        Ok(())
    }
}

impl FromStr for QuditCircuit {
    type Err = Error;

    /// Parses the line format; the wire count is one past the largest wire used.
    fn from_str(text: &str) -> Result<Self> {
        let mut d = None;
        let mut gates = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: no + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected `KIND wires d`, got `{line}`")));
            }
            let (kind_tok, inverse) = match fields[0].strip_suffix("^-1") {
                Some(k) => (k, true),
                None => (fields[0], false),
            };
            let kind: GateKind = kind_tok.parse().map_err(|e: Error| err(e.to_string()))?;
            let wires = fields[1]
                .split(',')
                .map(|w| w.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| err(format!("bad wire list `{}`", fields[1])))?;
            let line_d: usize = fields[2]
                .parse()
                .map_err(|_| err(format!("bad dimension `{}`", fields[2])))?;
            match d {
                None => d = Some(line_d),
                Some(prev) if prev != line_d => {
                    return Err(err(format!("dimension {line_d} differs from earlier {prev}")))
                }
                _ => {}
            }
            gates.push((no + 1, Gate { kind, wires, inverse }));
        }
        let d = d.ok_or_else(|| invalid("circuit text contains no gates"))?;
        let wire_count = gates
            .iter()
            .flat_map(|(_, g)| g.wires.iter().copied())
            .max()
            .unwrap_or(0)
            + 1;
        let mut circuit = QuditCircuit::new(d, wire_count)?;
        for (line, g) in gates {
            circuit.push(g).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(circuit)
    }
}

/// Applies `op` (ordered as `wires`) to a state vector over `wire_count`
/// wires of dimension `d`.
fn apply_to_wires(state: &StateVector, d: usize, wire_count: usize, wires: &[usize], op: &ComplexMatrix) -> StateVector {
    let stride = |w: usize| d.pow((wire_count - 1 - w) as u32);
    let mut local = vec![0usize];
    for &w in wires {
        local = local
            .iter()
            .flat_map(|&base| (0..d).map(move |k| base + k * stride(w)))
            .collect();
    }
    let mut rest = vec![0usize];
    for w in (0..wire_count).filter(|w| !wires.contains(w)) {
        rest = rest
            .iter()
            .flat_map(|&base| (0..d).map(move |k| base + k * stride(w)))
            .collect();
    }
    let mut out = StateVector::from_element(state.len(), ZERO);
    for &r in &rest {
        for (i, &li) in local.iter().enumerate() {
            let mut acc = ZERO;
            for (j, &lj) in local.iter().enumerate() {
                acc += op.get(i, j) * state[lj + r];
            }
            out[li + r] = acc;
        }
    }
    out
}

pub fn apply_circuit(circuit: &QuditCircuit, state: &StateVector) -> Result<StateVector> {
    let n = circuit.d.pow(circuit.wire_count as u32);
    if state.len() != n {
        return Err(mismatch(format!(
            "state of length {} for {} wires of dimension {}",
            state.len(),
            circuit.wire_count,
            circuit.d
        )));
    }
    let mut psi = state.clone();
    for g in &circuit.gates {
        if g.wires.iter().any(|&w| w >= circuit.wire_count) {
            return Err(invalid(format!("wire out of range in {:?}", g.wires)));
        }
        psi = apply_to_wires(&psi, circuit.d, circuit.wire_count, &g.wires, &g.matrix(circuit.d)?);
    }
    Ok(psi)
}

/// `(PARITY (x) X^-1 H^2) CNOT (H (x) I)` acting on `|0,0>`.
pub fn singlet_prep_circuit(d: usize) -> Result<QuditCircuit> {
    let inv_x = Gate::single(GateKind::X, 1).inverted();
    QuditCircuit::new(d, 2)?
        .with(Gate::single(GateKind::H, 0))?
        .with(Gate::cnot(0, 1))?
        .with(Gate::single(GateKind::H, 1))?
        .with(Gate::single(GateKind::H, 1))?
        .with(inv_x)?
        .with(Gate::single(GateKind::ParityPhase, 0))
}

/// Probability that the reversed preparation circuit maps `state` to `|0,0>`.
pub fn spin_zero_meas_via_circuit(d: usize, state: &StateVector) -> Result<f64> {
    if state.len() != d * d {
        return Err(mismatch(format!("two-qudit state must have length {}", d * d)));
    }
    let out = apply_circuit(&singlet_prep_circuit(d)?.inverse(), state)?;
    Ok(out[0].norm_sqr())
}

/// Outcome of checking a circuit against the analytic singlet.
#[derive(Clone, Copy, Debug)]
pub struct CircuitCheck {
    pub unitarity_deviation: f64,
    pub singlet_distance: f64,
}

impl CircuitCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.unitarity_deviation <= tol && self.singlet_distance <= tol
    }
}

/// Compares a two-wire circuit's output on `|0,0>` with the singlet.
pub fn check_singlet_circuit(circuit: &QuditCircuit) -> Result<CircuitCheck> {
    if circuit.wire_count != 2 {
        return Err(invalid("singlet circuits act on exactly two wires"));
    }
    let d = circuit.d;
    let mut zero = StateVector::from_element(d * d, ZERO);
    zero[0] = ONE;
    let out = apply_circuit(circuit, &zero)?;
    Ok(CircuitCheck {
        unitarity_deviation: circuit.unitary()?.unitarity_deviation(),
        singlet_distance: (out - singlet_state(d)?).norm(),
    })
}

/// `<psi| pi0 |psi>` for comparison with the circuit realization.
pub fn spin_zero_probability(d: usize, state: &StateVector) -> Result<f64> {
    let pi0 = spin_projectors(d)?.pi0;
    let v = pi0.apply(state)?;
    Ok(state.dotc(&v).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::frobenius_distance;

    fn basis(n: usize, k: usize) -> StateVector {
        let mut v = StateVector::from_element(n, ZERO);
        v[k] = ONE;
        v
    }

    #[test]
    fn qubit_gates() {
        let g = standard_gates(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let had = ComplexMatrix::from_real(2, 2, &[h, h, h, -h]).unwrap();
        assert!(frobenius_distance(&g.h, &had).unwrap() < 1e-15);
        assert!(frobenius_distance(&g.parity, &g.z).unwrap() < 1e-15);
    }

    #[test]
    fn hadamard_squared_negates_index() {
        for d in 2..=6 {
            let g = standard_gates(d).unwrap();
            let h2 = &g.h * &g.h;
            let neg = ComplexMatrix::from_fn(d, d, |r, c| if r == (d - c) % d { ONE } else { ZERO });
            assert!(frobenius_distance(&h2, &neg).unwrap() < 1e-12, "d={d}");
            assert!(frobenius_distance(&(&h2 * &h2), &ComplexMatrix::identity(d)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn cyclic_order_and_unitarity() {
        for d in 2..=6 {
            let g = standard_gates(d).unwrap();
            let id = ComplexMatrix::identity(d);
            assert!(frobenius_distance(&g.x.pow(d as u32), &id).unwrap() < 1e-12);
            assert!(frobenius_distance(&g.z.pow(d as u32), &id).unwrap() < 1e-12);
            for m in [&g.x, &g.z, &g.h, &g.cnot, &g.parity] {
                assert!(m.is_unitary(1e-12));
            }
            for r in 0..d * d {
                let ones = (0..d * d).filter(|&c| g.cnot.get(r, c) == ONE).count();
                assert_eq!(ones, 1);
            }
            if d % 2 == 0 {
                assert!(frobenius_distance(&g.parity, &g.z.pow((d / 2) as u32)).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_basic_circuits() {
        let empty = QuditCircuit::new(3, 1).unwrap();
        let v = basis(3, 2);
        assert_eq!(apply_circuit(&empty, &v).unwrap(), v);
        let x = QuditCircuit::new(3, 1).unwrap().with(Gate::single(GateKind::X, 0)).unwrap();
        assert_eq!(apply_circuit(&x, &basis(3, 0)).unwrap(), basis(3, 1));
        assert!(apply_circuit(&x, &basis(9, 0)).is_err());
        assert!(QuditCircuit::new(3, 2).unwrap().with(Gate::single(GateKind::X, 2)).is_err());
        assert!(QuditCircuit::new(3, 2).unwrap().with(Gate::cnot(1, 1)).is_err());
    }

    #[test]
    fn circuit_then_inverse_is_identity() {
        let c = singlet_prep_circuit(4).unwrap().with(Gate::single(GateKind::Z, 1)).unwrap();
        let v = StateVector::from_fn(16, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        let back = apply_circuit(&c.inverse(), &apply_circuit(&c, &v).unwrap()).unwrap();
        assert!((back - v).norm() < 1e-12);
    }

    #[test]
    fn prepares_singlet() {
        for d in 2..=6 {
            let check = check_singlet_circuit(&singlet_prep_circuit(d).unwrap()).unwrap();
            assert!(check.passes(1e-10), "d={d}: {check:?}");
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let out = apply_circuit(&singlet_prep_circuit(2).unwrap(), &basis(4, 0)).unwrap();
        assert!((out[1].re - h).abs() < 1e-12 && (out[2].re + h).abs() < 1e-12);
    }

    #[test]
    fn reverse_circuit_measurement_examples() {
        let psi = singlet_state(3).unwrap();
        assert!((spin_zero_meas_via_circuit(3, &psi).unwrap() - 1.0).abs() < 1e-12);
        assert!(spin_zero_meas_via_circuit(2, &basis(4, 0)).unwrap().abs() < 1e-12);
        assert!((spin_zero_meas_via_circuit(2, &basis(4, 1)).unwrap() - 0.5).abs() < 1e-12);
        assert!(spin_zero_meas_via_circuit(2, &basis(9, 1)).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let c = singlet_prep_circuit(3).unwrap();
        let text = c.to_text();
        assert!(text.contains("CNOT 0,1 3"));
        assert!(text.contains("X^-1 1 3"));
        assert_eq!(text.parse::<QuditCircuit>().unwrap(), c);

        assert!("".parse::<QuditCircuit>().is_err());
        assert!(matches!("H 0 3\nH 1 4\n".parse::<QuditCircuit>(), Err(Error::Parse { line: 2, .. })));
        assert!(matches!("FOO 0 3\n".parse::<QuditCircuit>(), Err(Error::Parse { line: 1, .. })));
        assert!(matches!("CNOT 0 3\n".parse::<QuditCircuit>(), Err(Error::Parse { line: 1, .. })));
        assert!("# comment\n\nH 0 2\n".parse::<QuditCircuit>().is_ok());
    }
}
