//! Segmented sampling matrices and the samples they produce.
//!
//! `Phi_o` holds one i.i.d. row per physical BMI. Each row of `Phi_e` is
//! assembled segment by segment: segment `k` is copied from segment `k` of
//! the `Phi_o` row named by entry `k` of the row's permutation sequence.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::permgroup::{check_distinct, PermutationSequence};
use crate::rng::{derive_seed, stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntryDistribution {
    #[default]
    Gaussian,
    Rademacher,
}

impl std::str::FromStr for EntryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            other => Err(Error::Parse(format!("unknown entry distribution {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixSpec {
    pub m_o: usize,
    pub n: usize,
    pub distribution: EntryDistribution,
    pub seed: u64,
}

impl MatrixSpec {
    pub fn new(m_o: usize, n: usize, distribution: EntryDistribution, seed: u64) -> Result<Self> {
        let spec = Self {
            m_o,
            n,
            distribution,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_o == 0 || self.n < self.m_o {
            return Err(Error::Domain(format!(
                "need 1 <= m_o <= n, got m_o = {}, n = {}",
                self.m_o, self.n
            )));
        }
        if !self.n.is_multiple_of(self.m_o) {
            return Err(Error::Divisibility {
                n: self.n,
                m_o: self.m_o,
            });
        }
        Ok(())
    }

    pub fn segment_length(&self) -> usize {
        self.n / self.m_o
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMatrix {
    pub phi_o: DMatrix<f64>,
    pub phi_e: DMatrix<f64>,
    /// Provenance of each row of `phi_e`.
    pub sequences: Vec<PermutationSequence>,
    pub spec: MatrixSpec,
}

impl SamplingMatrix {
    pub fn m_o(&self) -> usize {
        self.phi_o.nrows()
    }

    pub fn m_e(&self) -> usize {
        self.phi_e.nrows()
    }

    pub fn m(&self) -> usize {
        self.m_o() + self.m_e()
    }

    pub fn n(&self) -> usize {
        self.phi_o.ncols()
    }

    pub fn segment_length(&self) -> usize {
        self.spec.segment_length()
    }

    /// `[Phi_o; Phi_e]`.
    pub fn full(&self) -> DMatrix<f64> {
        let (m_o, n) = self.phi_o.shape();
        DMatrix::from_fn(self.m(), n, |i, j| {
            if i < m_o {
                self.phi_o[(i, j)]
            } else {
                self.phi_e[(i - m_o, j)]
            }
        })
    }
}

fn draw_phi_o(spec: &MatrixSpec) -> DMatrix<f64> {
    let mut rng = stream(spec.seed, Purpose::Matrix, 0);
    let scale = 1.0 / (spec.n as f64).sqrt();
    let mut phi = DMatrix::zeros(spec.m_o, spec.n);
    // row-major fill so a matrix does not depend on storage order
    for i in 0..spec.m_o {
        for j in 0..spec.n {
            phi[(i, j)] = match spec.distribution {
                EntryDistribution::Gaussian => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * scale
                }
                EntryDistribution::Rademacher => {
                    if rng.random::<bool>() {
                        scale
                    } else {
                        -scale
                    }
                }
            };
        }
    }
    phi
}

/// Draws `Phi_o` and assembles one extended row per sequence.
pub fn generate(spec: &MatrixSpec, sequences: &[PermutationSequence]) -> Result<SamplingMatrix> {
    spec.validate()?;
    check_distinct(sequences, spec.m_o)?;
    let phi_o = draw_phi_o(spec);
    let l = spec.segment_length();
    let mut phi_e = DMatrix::zeros(sequences.len(), spec.n);
    for (r, seq) in sequences.iter().enumerate() {
        for (k, &src) in seq.elements().iter().enumerate() {
            for c in k * l..(k + 1) * l {
                phi_e[(r, c)] = phi_o[(src - 1, c)];
            }
        }
    }
    Ok(SamplingMatrix {
        phi_o,
        phi_e,
        sequences: sequences.to_vec(),
        spec: *spec,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    IidGaussian {
        variance: f64,
    },
    /// `s` nonzeros of magnitude `amplitude` with random signs at uniformly
    /// random positions.
    SparseSpikes {
        s: usize,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    pub kind: SignalKind,
    pub n: usize,
}

impl SignalModel {
    pub fn iid_gaussian(variance: f64, n: usize) -> Self {
        Self {
            kind: SignalKind::IidGaussian { variance },
            n,
        }
    }

    pub fn sparse_spikes(s: usize, amplitude: f64, n: usize) -> Self {
        Self {
            kind: SignalKind::SparseSpikes { s, amplitude },
            n,
        }
    }

    /// Per-entry variance `sigma_x^2`.
    pub fn variance(&self) -> f64 {
        match self.kind {
            SignalKind::IidGaussian { variance } => variance,
            SignalKind::SparseSpikes { s, amplitude } => s as f64 * amplitude * amplitude / self.n as f64,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self.kind {
            SignalKind::IidGaussian { variance } => {
                let normal = Normal::new(0.0, variance.max(0.0).sqrt()).expect("finite variance");
                DVector::from_iterator(self.n, (0..self.n).map(|_| normal.sample(rng)))
            }
            SignalKind::SparseSpikes { s, amplitude } => {
                let mut x = DVector::zeros(self.n);
                let s = s.min(self.n);
                for pos in rand::seq::index::sample(rng, self.n, s) {
                    x[pos] = if rng.random::<bool>() { amplitude } else { -amplitude };
                }
                x
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub w: DVector<f64>,
    pub y: DVector<f64>,
    pub noise_seed: u64,
}

impl SampleRecord {
    pub const CSV_HEADER: &'static str = "index,w,y";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, (w, y)) in self.w.iter().zip(self.y.iter()).enumerate() {
            out.push_str(&format!("{},{w},{y}\n", i + 1));
        }
        out
    }
}

fn check_len(x: &DVector<f64>, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(())
}

/// Unit-variance Gaussian noise vector from `noise_seed`.
pub fn noise_vector(noise_seed: u64, m: usize) -> DVector<f64> {
    let mut rng = stream(noise_seed, Purpose::Noise, 0);
    DVector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(&mut rng)))
}

/// `w = Phi x`, `y = w + z` with `z ~ N(0, I)` drawn from `noise_seed`.
pub fn sample(matrix: &SamplingMatrix, x: &DVector<f64>, noise_seed: u64) -> Result<SampleRecord> {
    check_len(x, matrix.n())?;
    let w = matrix.full() * x;
    let y = &w + noise_vector(noise_seed, matrix.m());
    Ok(SampleRecord { w, y, noise_seed })
}

/// Samples computed the way the segmented converter forms them: each BMI
/// emits one sub-sample per sub-period, original samples add up a BMI's own
/// sub-samples and every extended sample adds up the sub-samples its
/// sequence selects.
pub fn accumulate_subsamples(matrix: &SamplingMatrix, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(x, matrix.n())?;
    let m_o = matrix.m_o();
    let l = matrix.segment_length();
    // sub[b][k]: output of BMI b at the end of sub-period k
    let sub: Vec<Vec<f64>> = (0..m_o)
        .map(|b| {
            (0..m_o)
                .map(|k| (k * l..(k + 1) * l).map(|c| matrix.phi_o[(b, c)] * x[c]).sum())
                .collect()
        })
        .collect();
    let originals = sub.iter().map(|row| row.iter().sum::<f64>());
    let extended = matrix.sequences.iter().map(|seq| {
        seq.elements()
            .iter()
            .enumerate()
            .map(|(k, &src)| sub[src - 1][k])
            .sum::<f64>()
    });
    Ok(DVector::from_iterator(matrix.m(), originals.chain(extended)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    /// Sample mean of `w_i w_j`.
    pub mean: DMatrix<f64>,
    /// Standard error of each entry of `mean`.
    pub std_err: DMatrix<f64>,
    pub trials: usize,
}

impl CovarianceEstimate {
    /// Entries farther than `k` standard errors from `reference`. Entries with
    /// zero standard error must match exactly.
    pub fn outliers(&self, reference: &DMatrix<f64>, k: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.mean.nrows() {
            for j in 0..self.mean.ncols() {
                let dev = (self.mean[(i, j)] - reference[(i, j)]).abs();
                if dev > k * self.std_err[(i, j)] {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

const COV_CHUNK: usize = 1024;

/// Monte Carlo estimate of `E[w w']` over fresh matrices and signals.
///
/// Trial `t` uses matrix seed `derive_seed(seed, Matrix, t)` and signal
/// stream `(seed, Signal, t)`. Trials are summed in fixed-size chunks that
/// are combined in chunk order, so the result does not depend on the number
/// of worker threads.
pub fn empirical_covariance(
    spec: &MatrixSpec,
    sequences: &[PermutationSequence],
    signal: &SignalModel,
    trials: usize,
    seed: u64,
) -> Result<CovarianceEstimate> {
    if trials < 2 {
        return Err(Error::Domain(format!("need at least 2 trials, got {trials}")));
    }
    spec.validate()?;
    check_distinct(sequences, spec.m_o)?;
    check_len(&DVector::zeros(signal.n), spec.n)?;
    let m = spec.m_o + sequences.len();

    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..trials.div_ceil(COV_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0; m * m];
            let mut sum_sq = vec![0.0; m * m];
            for t in c * COV_CHUNK..((c + 1) * COV_CHUNK).min(trials) {
                let t = t as u64;
                let matrix = generate(&spec.with_seed(derive_seed(seed, Purpose::Matrix, t)), sequences)
                    .expect("validated above");
                let x = signal.draw(&mut stream(seed, Purpose::Signal, t));
                let w = matrix.full() * x;
                for i in 0..m {
                    for j in 0..m {
                        let p = w[i] * w[j];
                        sum[i * m + j] += p;
                        sum_sq[i * m + j] += p * p;
                    }
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![0.0; m * m];
    let mut sum_sq = vec![0.0; m * m];
    for (s, q) in &chunks {
        for idx in 0..m * m {
            sum[idx] += s[idx];
            sum_sq[idx] += q[idx];
        }
    }
    let nt = trials as f64;
    let mean = DMatrix::from_fn(m, m, |i, j| sum[i * m + j] / nt);
    let std_err = DMatrix::from_fn(m, m, |i, j| {
        let mu = sum[i * m + j] / nt;
        let var = ((sum_sq[i * m + j] - nt * mu * mu) / (nt - 1.0)).max(0.0);
        (var / nt).sqrt()
    });
    Ok(CovarianceEstimate { mean, std_err, trials })
}
