//! Spin-j angular momentum, rotations, the two-particle singlet and the
//! spin-zero projective measurement.
//!
//! Matrices are written in the qudit basis `k = m + j`, so `|-j>` is `|0>`
//! and `|j>` is `|d-1>`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::tensor::{expm_hermitian, kron, ComplexMatrix, StateVector, C64, DEFAULT_TOLERANCE, I, ZERO};

/// Spin quantum number, stored as `2j` so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinLabel {
    twice_j: u32,
}

impl SpinLabel {
    pub fn from_twice_j(twice_j: u32) -> Result<Self> {
        if twice_j == 0 {
            return Err(invalid("spin must be at least 1/2"));
        }
        Ok(Self { twice_j })
    }

    /// Spin whose local dimension is `d = 2j + 1`.
    pub fn from_dim(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("local dimension must be at least 2, got {d}")));
        }
        Self::from_twice_j((d - 1) as u32)
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.twice_j as usize + 1
    }

    /// `j(j+1)`; equals `(d^2 - 1) / 4`.
    pub fn casimir(&self) -> f64 {
        let j = self.j();
        j * (j + 1.0)
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m_of(&self, k: usize) -> f64 {
        k as f64 - self.j()
    }
}

/// `Jz`, `J+`, `J-`, `Jx`, `Jy` for one spin.
#[derive(Clone, Debug)]
pub struct AngularMomentum {
    pub jz: ComplexMatrix,
    pub jplus: ComplexMatrix,
    pub jminus: ComplexMatrix,
    pub jx: ComplexMatrix,
    pub jy: ComplexMatrix,
}

impl AngularMomentum {
    /// `n . J` for a 3-vector `n`.
    pub fn along(&self, n: [f64; 3]) -> ComplexMatrix {
        &(&self.jx.scale_real(n[0]) + &self.jy.scale_real(n[1])) + &self.jz.scale_real(n[2])
    }
}

pub fn angular_momentum_ops(spin: SpinLabel) -> AngularMomentum {
    let d = spin.dim();
    let c = spin.casimir();
    let jz = ComplexMatrix::from_fn(d, d, |r, s| {
        if r == s {
            C64::new(spin.m_of(r), 0.0)
        } else {
            ZERO
        }
    });
    // J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>
    let jplus = ComplexMatrix::from_fn(d, d, |r, s| {
        if r == s + 1 {
            let m = spin.m_of(s);
            C64::new((c - m * (m + 1.0)).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let jminus = jplus.adjoint();
    let jx = (&jplus + &jminus).scale_real(0.5);
    let jy = (&jplus - &jminus).scale(C64::new(0.0, -0.5));
    AngularMomentum {
        jz,
        jplus,
        jminus,
        jx,
        jy,
    }
}

/// `exp(-i angle (axis . J))`.
pub fn rotation_matrix(spin: SpinLabel, axis: [f64; 3], angle: f64) -> Result<ComplexMatrix> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > DEFAULT_TOLERANCE {
        return Err(invalid(format!("rotation axis must be a unit vector, |n| = {norm}")));
    }
    let generator = angular_momentum_ops(spin).along(axis);
    expm_hermitian(&generator, -I * angle)
}

/// Axis drawn uniformly from the sphere, angle uniformly from `[0, 4pi)`.
pub fn random_rotation<R: Rng + ?Sized>(spin: SpinLabel, rng: &mut R) -> ComplexMatrix {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-6 {
            continue;
        }
        let axis = [v[0] / n, v[1] / n, v[2] / n];
        let angle = rng.random_range(0.0..4.0 * std::f64::consts::PI);
        return rotation_matrix(spin, axis, angle).expect("normalized axis");
    }
}

/// `(1/sqrt d) sum_k (-1)^k |k, d-1-k>`.
///
/// Equals `(1/sqrt(2j+1)) sum_m (-1)^m |m, -m>` up to the global phase
/// `(-1)^j`, and is real in this form.
pub fn singlet_state(d: usize) -> Result<StateVector> {
    if d < 2 {
        return Err(invalid(format!("singlet needs d >= 2, got {d}")));
    }
    let amp = 1.0 / (d as f64).sqrt();
    let mut psi = StateVector::from_element(d * d, ZERO);
    for k in 0..d {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        psi[k * d + (d - 1 - k)] = C64::new(sign * amp, 0.0);
    }
    Ok(psi)
}

/// `J_mu (x) I + I (x) J_mu`.
pub fn total_operator(single: &ComplexMatrix) -> ComplexMatrix {
    let id = ComplexMatrix::identity(single.rows());
    &kron(single, &id) + &kron(&id, single)
}

/// The two-outcome measurement: spin zero versus anything else.
#[derive(Clone, Debug)]
pub struct SpinProjectors {
    pub pi0: ComplexMatrix,
    pub pi1: ComplexMatrix,
}

pub fn spin_projectors(d: usize) -> Result<SpinProjectors> {
    let psi = singlet_state(d)?;
    let pi0 = ComplexMatrix::outer(&psi);
    let pi1 = &ComplexMatrix::identity(d * d) - &pi0;
    Ok(SpinProjectors { pi0, pi1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::frobenius_distance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rank(m: &ComplexMatrix) -> usize {
        m.eigenvalues_hermitian()
            .unwrap()
            .iter()
            .filter(|v| v.abs() > 1e-8)
            .count()
    }

    #[test]
    fn spin_half_matches_pauli() {
        let ops = angular_momentum_ops(SpinLabel::from_dim(2).unwrap());
        let jz = ComplexMatrix::from_real(2, 2, &[-0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(ops.jz, jz);
        // k-order reverses the usual Pauli ordering
        let half_x = ComplexMatrix::from_real(2, 2, &[0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!(frobenius_distance(&ops.jx, &half_x).unwrap() < 1e-15);
        let half_y = ComplexMatrix::new(2, 2, vec![ZERO, C64::new(0.0, 0.5), C64::new(0.0, -0.5), ZERO]).unwrap();
        assert!(frobenius_distance(&ops.jy, &half_y).unwrap() < 1e-15);
    }

    #[test]
    fn spin_one_raising_entries() {
        let ops = angular_momentum_ops(SpinLabel::from_dim(3).unwrap());
        let s2 = 2f64.sqrt();
        assert!((ops.jplus.get(1, 0).re - s2).abs() < 1e-15);
        assert!((ops.jplus.get(2, 1).re - s2).abs() < 1e-15);
        let nonzero = ops.jplus.entries().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn commutation_relation() {
        for d in 2..=5 {
            let ops = angular_momentum_ops(SpinLabel::from_dim(d).unwrap());
            let comm = &(&ops.jx * &ops.jy) - &(&ops.jy * &ops.jx);
            let dist = frobenius_distance(&comm, &ops.jz.scale(I)).unwrap();
            assert!(dist < 1e-12, "d={d}: {dist}");
        }
    }

    #[test]
    fn rotation_examples() {
        let spin = SpinLabel::from_dim(2).unwrap();
        let r = rotation_matrix(spin, [0.0, 0.0, 1.0], 0.0).unwrap();
        assert!(frobenius_distance(&r, &ComplexMatrix::identity(2)).unwrap() < 1e-14);
        // m-order and k-order coincide for diagonal generators up to index relabeling:
        // k=0 is m=-1/2, picking up exp(+i pi/2)
        let r = rotation_matrix(spin, [0.0, 0.0, 1.0], std::f64::consts::PI).unwrap();
        let expect = ComplexMatrix::from_diagonal(&[C64::new(0.0, 1.0), C64::new(0.0, -1.0)]);
        assert!(frobenius_distance(&r, &expect).unwrap() < 1e-12);
        assert!(rotation_matrix(spin, [1.0, 1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn random_rotations_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=5 {
            let spin = SpinLabel::from_dim(d).unwrap();
            for _ in 0..20 {
                let r = random_rotation(spin, &mut rng);
                assert!(r.is_unitary(1e-10));
            }
        }
    }

    #[test]
    fn singlet_small_cases() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = singlet_state(2).unwrap();
        let expect = [0.0, h, -h, 0.0];
        for (a, b) in psi.iter().zip(expect) {
            assert!((a.re - b).abs() < 1e-15 && a.im == 0.0);
        }
        let t = 1.0 / 3f64.sqrt();
        let psi = singlet_state(3).unwrap();
        // |0,2> - |1,1> + |2,0>
        let mut expect = [0.0; 9];
        expect[2] = t;
        expect[4] = -t;
        expect[6] = t;
        for (a, b) in psi.iter().zip(expect) {
            assert!((a.re - b).abs() < 1e-15);
        }
        assert!(singlet_state(1).is_err());
    }

    #[test]
    fn singlet_is_annihilated_by_total_spin() {
        for d in 2..=5 {
            let ops = angular_momentum_ops(SpinLabel::from_dim(d).unwrap());
            let psi = singlet_state(d).unwrap();
            for op in [&ops.jz, &ops.jplus, &ops.jminus] {
                let v = total_operator(op).apply(&psi).unwrap();
                assert!(v.norm() < 1e-10, "d={d}");
            }
        }
    }

    #[test]
    fn projector_structure() {
        for d in 2..=5 {
            let p = spin_projectors(d).unwrap();
            let sum = &p.pi0 + &p.pi1;
            assert!(frobenius_distance(&sum, &ComplexMatrix::identity(d * d)).unwrap() < 1e-14);
            assert_eq!(rank(&p.pi0), 1);
            assert_eq!(rank(&p.pi1), d * d - 1);
            for pi in [&p.pi0, &p.pi1] {
                assert!(frobenius_distance(&(pi * pi), pi).unwrap() < 1e-12);
                assert!(pi.is_hermitian(1e-15));
            }
        }
    }

    #[test]
    fn projector_rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in 2..=4 {
            let spin = SpinLabel::from_dim(d).unwrap();
            let p = spin_projectors(d).unwrap();
            for _ in 0..50 {
                let r = random_rotation(spin, &mut rng);
                let rr = kron(&r, &r);
                let conj = &(&rr.adjoint() * &p.pi0) * &rr;
                assert!(frobenius_distance(&conj, &p.pi0).unwrap() < 1e-9);
            }
        }
    }
}
