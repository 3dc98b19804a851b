//! Shot-level simulation of the protocol.
//!
//! Randomness is drawn from ChaCha20 streams derived from one seed. Shots are
//! grouped in batches of [`BATCH_SHOTS`]; batch `k` draws Alice's branch bits
//! from stream `2k` and Bob's outcomes from stream `2k + 1`. Per-batch tallies
//! are merged in batch order, so results do not depend on the thread count,
//! and a sequential replay (see [`ShotAccumulator`]) reproduces them bit for
//! bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{invalid, mismatch, Result};
use crate::states::{DensityMatrix, Witness};
use crate::teleport::{teleport_branches, transform_witness};
use crate::tensor::ComplexMatrix;

pub const BATCH_SHOTS: u64 = 1 << 16;

/// Eigenvalues closer than this are sampled as one outcome.
pub const EIGENVALUE_CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Branch,
    Outcome,
}

fn stream_rng(seed: u64, stream: Stream, batch: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let offset = match stream {
        Stream::Branch => 0,
        Stream::Outcome => 1,
    };
    rng.set_stream(2 * batch + offset);
    rng
}

/// Hands out the generator owning a given round. Rounds must be visited in
/// increasing order.
#[derive(Clone, Debug)]
pub struct BatchedRng {
    seed: u64,
    stream: Stream,
    batch: u64,
    rng: ChaCha20Rng,
}

impl BatchedRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        Self {
            seed,
            stream,
            batch: 0,
            rng: stream_rng(seed, stream, 0),
        }
    }

    pub fn at_round(&mut self, round: u64) -> &mut ChaCha20Rng {
        let batch = round / BATCH_SHOTS;
        if batch != self.batch {
            self.batch = batch;
            self.rng = stream_rng(self.seed, self.stream, batch);
        }
        &mut self.rng
    }
}

/// One simulated round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShotRecord {
    pub round: u64,
    pub branch: u8,
    pub eigenvalue: f64,
}

/// Running count, sum and sum of squares.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Tally {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Tallies over all shots and per branch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShotSummary {
    pub total: Tally,
    pub branch: [Tally; 2],
}

impl ShotSummary {
    pub fn push(&mut self, record: &ShotRecord) {
        self.total.push(record.eigenvalue);
        self.branch[record.branch as usize].push(record.eigenvalue);
    }

    pub fn merge(&mut self, other: &ShotSummary) {
        self.total.merge(&other.total);
        self.branch[0].merge(&other.branch[0]);
        self.branch[1].merge(&other.branch[1]);
    }

    /// Fraction of shots in branch 0.
    pub fn branch_zero_frequency(&self) -> f64 {
        self.branch[0].count as f64 / self.total.count as f64
    }
}

/// Sequential accumulator that groups shots into the same batches as
/// [`run_shots`], so both paths round identically.
#[derive(Clone, Debug, Default)]
pub struct ShotAccumulator {
    done: ShotSummary,
    current: ShotSummary,
    in_batch: u64,
}

impl ShotAccumulator {
    pub fn push(&mut self, record: &ShotRecord) {
        self.current.push(record);
        self.in_batch += 1;
        if self.in_batch == BATCH_SHOTS {
            self.done.merge(&self.current);
            self.current = ShotSummary::default();
            self.in_batch = 0;
        }
    }

    pub fn finish(mut self) -> ShotSummary {
        self.done.merge(&self.current);
        self.done
    }
}

/// Mean of sampled outcomes with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub shots: u64,
    pub seed: u64,
}

impl Estimate {
    /// `None` when no shots were taken.
    pub fn from_tally(tally: &Tally, seed: u64) -> Option<Self> {
        (tally.count > 0).then(|| Self {
            mean: tally.mean(),
            stderr: tally.stderr(),
            shots: tally.count,
            seed,
        })
    }

    /// Conservative verdict: `mean + 3 stderr < 0`.
    pub fn detects_entanglement(&self) -> bool {
        self.mean + 3.0 * self.stderr < 0.0
    }
}

/// Bernoulli draw: `0` with probability `p0`.
pub fn sample_branch<R: Rng + ?Sized>(p0: f64, rng: &mut R) -> Result<u8> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(invalid(format!("branch probability {p0} outside [0, 1]")));
    }
    Ok(if rng.random::<f64>() < p0 { 0 } else { 1 })
}

/// Born-rule sampler for one observable on one state.
#[derive(Clone, Debug)]
pub struct SpectralSampler {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    probabilities: Vec<f64>,
}

impl SpectralSampler {
    pub fn new(rho: &DensityMatrix, observable: &ComplexMatrix) -> Result<Self> {
        if observable.rows() != rho.dim() || !observable.is_square() {
            return Err(mismatch(format!(
                "observable is {}x{}, state has dimension {}",
                observable.rows(),
                observable.cols(),
                rho.dim()
            )));
        }
        let eig = observable.eigh()?;
        let mut values: Vec<f64> = Vec::new();
        let mut probabilities: Vec<f64> = Vec::new();
        let mut members = 0usize;
        let mut anchor = f64::NAN;
        for (k, &lambda) in eig.values.iter().enumerate() {
            let v = eig.vector(k);
            let weight = v.dotc(&rho.matrix().apply(&v)?).re;
            if values.is_empty() || lambda - anchor > EIGENVALUE_CLUSTER_TOL {
                anchor = lambda;
                members = 1;
                values.push(lambda);
                probabilities.push(weight);
            } else {
                members += 1;
                let last = values.len() - 1;
                values[last] += (lambda - values[last]) / members as f64;
                probabilities[last] += weight;
            }
        }
        for p in probabilities.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = probabilities.iter().sum();
        for p in probabilities.iter_mut() {
            *p /= total;
        }
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            values,
            cumulative,
            probabilities,
        })
    }

    /// Distinct eigenvalues (after clustering) with their probabilities.
    pub fn outcomes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probabilities.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.outcomes().map(|(v, p)| v * p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        if idx < self.values.len() {
            return self.values[idx];
        }
        // u landed above the rounded cumulative total
        let last = self
            .probabilities
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.values.len() - 1);
        self.values[last]
    }
}

/// One Born-rule sample of `observable` on `rho`.
pub fn sample_eigen_outcome<R: Rng + ?Sized>(rho: &DensityMatrix, observable: &ComplexMatrix, rng: &mut R) -> Result<f64> {
    Ok(SpectralSampler::new(rho, observable)?.sample(rng))
}

/// Precomputed branch probabilities and per-branch samplers for a witness.
#[derive(Clone, Debug)]
pub struct ProtocolSampler {
    p0: f64,
    samplers: [SpectralSampler; 2],
}

impl ProtocolSampler {
    pub fn new(rho: &DensityMatrix, w: &Witness, d: usize) -> Result<Self> {
        let branches = teleport_branches(rho, d)?;
        let pair = transform_witness(w, d)?;
        let zero = SpectralSampler::new(&branches[0].state, pair.w0.matrix())?;
        let one = SpectralSampler::new(&branches[1].state, pair.w1.matrix())?;
        Ok(Self {
            p0: branches[0].probability,
            samplers: [zero, one],
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn outcome_sampler(&self, bit: u8) -> &SpectralSampler {
        &self.samplers[bit as usize]
    }

    /// Alice's side of a round.
    pub fn draw_branch<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        sample_branch(self.p0, rng).expect("p0 is a probability")
    }

    /// Bob's side of a round.
    pub fn draw_outcome<R: Rng + ?Sized>(&self, bit: u8, rng: &mut R) -> f64 {
        self.samplers[bit as usize].sample(rng)
    }

    fn run_batch(&self, seed: u64, batch: u64, shots: u64) -> ShotSummary {
        let mut branch_rng = stream_rng(seed, Stream::Branch, batch);
        let mut outcome_rng = stream_rng(seed, Stream::Outcome, batch);
        let mut summary = ShotSummary::default();
        let start = batch * BATCH_SHOTS;
        let end = (start + BATCH_SHOTS).min(shots);
        for round in start..end {
            let bit = self.draw_branch(&mut branch_rng);
            let eigenvalue = self.draw_outcome(bit, &mut outcome_rng);
            summary.push(&ShotRecord {
                round,
                branch: bit,
                eigenvalue,
            });
        }
        summary
    }
}

/// Runs `shots` rounds in parallel batches.
pub fn run_shots(sampler: &ProtocolSampler, shots: u64, seed: u64) -> ShotSummary {
    let batches = shots.div_ceil(BATCH_SHOTS);
    let parts: Vec<ShotSummary> = (0..batches)
        .into_par_iter()
        .map(|b| sampler.run_batch(seed, b, shots))
        .collect();
    let mut total = ShotSummary::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Shot-based estimate of `Tr(W rho)` through the teleportation protocol.
pub fn estimate_witness_value(rho: &DensityMatrix, w: &Witness, d: usize, shots: u64, seed: u64) -> Result<Estimate> {
    if shots == 0 {
        return Err(invalid("an estimate needs at least one shot"));
    }
    let sampler = ProtocolSampler::new(rho, w, d)?;
    let summary = run_shots(&sampler, shots, seed);
    Ok(Estimate::from_tally(&summary.total, seed).expect("shots > 0"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{riccardi_witness, werner_state, BellPair};
    use crate::tensor::{kron, SubsystemDims, C64};

    fn zz() -> ComplexMatrix {
        let z = ComplexMatrix::from_real(2, 2, &[1., 0., 0., -1.]).unwrap();
        kron(&z, &z)
    }

    #[test]
    fn branch_sampling_extremes_and_frequency() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_branch(1.0, &mut rng).unwrap(), 0);
            assert_eq!(sample_branch(0.0, &mut rng).unwrap(), 1);
        }
        assert!(sample_branch(1.1, &mut rng).is_err());
        let n = 100_000;
        let zeros = (0..n).filter(|_| sample_branch(0.25, &mut rng).unwrap() == 0).count();
        let freq = zeros as f64 / n as f64;
        let band = 4.0 * (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((freq - 0.25).abs() <= band, "{freq}");
    }

    #[test]
    fn identity_and_eigenprojector_outcomes() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let rho = werner_state(0.3).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_eigen_outcome(&rho, &ComplexMatrix::identity(4), &mut rng).unwrap(), 1.0);
        }
        // |01><01| is an eigenprojector of ZZ with eigenvalue -1
        let mut e01 = ComplexMatrix::zeros(4, 4);
        e01.set(1, 1, C64::new(1.0, 0.0));
        let state = crate::states::DensityMatrix::new(e01, Some(SubsystemDims::square(2).unwrap()), 1e-12).unwrap();
        for _ in 0..100 {
            let v = sample_eigen_outcome(&state, &zz(), &mut rng).unwrap();
            assert!((v + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zz_on_singlet_converges() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let rho = werner_state(1.0).unwrap();
        let sampler = SpectralSampler::new(&rho, &zz()).unwrap();
        let mut t = Tally::default();
        for _ in 0..100_000 {
            t.push(sampler.sample(&mut rng));
        }
        assert!((t.mean() + 1.0).abs() <= 4.0 * t.stderr() + 1e-12);
    }

    #[test]
    fn degenerate_spectrum_probabilities_sum_to_one() {
        let rho = werner_state(0.4).unwrap();
        let s = SpectralSampler::new(&rho, &zz()).unwrap();
        assert_eq!(s.outcomes().count(), 2);
        let total: f64 = s.outcomes().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((s.mean() - rho.expectation(&zz()).unwrap()).abs() < 1e-12);
        let non_herm = ComplexMatrix::from_real(4, 4, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(SpectralSampler::new(&rho, &non_herm).is_err());
    }

    #[test]
    fn estimate_is_deterministic_and_close() {
        let rho = werner_state(1.0).unwrap();
        let w = riccardi_witness(1.0, 0.0, BellPair::default()).unwrap();
        let a = estimate_witness_value(&rho, &w, 2, 200_000, 9).unwrap();
        let b = estimate_witness_value(&rho, &w, 2, 200_000, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.mean + 0.5).abs() <= 4.0 * a.stderr);
        assert!(estimate_witness_value(&rho, &w, 2, 0, 9).is_err());
    }

    #[test]
    fn accumulator_matches_parallel_batches() {
        let rho = werner_state(0.6).unwrap();
        let w = riccardi_witness(0.8, 0.6, BellPair::default()).unwrap();
        let sampler = ProtocolSampler::new(&rho, &w, 2).unwrap();
        let shots = 2 * BATCH_SHOTS + 17;
        let parallel = run_shots(&sampler, shots, 4);
        let mut branch = BatchedRng::new(4, Stream::Branch);
        let mut outcome = BatchedRng::new(4, Stream::Outcome);
        let mut acc = ShotAccumulator::default();
        for round in 0..shots {
            let bit = sampler.draw_branch(branch.at_round(round));
            let eigenvalue = sampler.draw_outcome(bit, outcome.at_round(round));
            acc.push(&ShotRecord { round, branch: bit, eigenvalue });
        }
        assert_eq!(acc.finish(), parallel);
    }

    #[test]
    fn single_shot_estimate_has_zero_stderr() {
        let mut t = Tally::default();
        t.push(2.0);
        let e = Estimate::from_tally(&t, 0).unwrap();
        assert_eq!((e.mean, e.stderr, e.shots), (2.0, 0.0, 1));
        assert!(Estimate::from_tally(&Tally::default(), 0).is_none());
    }
}
