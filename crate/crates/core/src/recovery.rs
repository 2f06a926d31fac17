//! Sparse recovery harness: decoders, the squared-error distortion and a
//! paired experiment comparing extension rates at a fixed BMI count.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Extension;
use crate::rng::{derive_seed, stream, Purpose};
use crate::sampler::{generate, MatrixSpec, SamplingMatrix, SignalModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    /// Greedy support selection, then least squares on the support.
    Omp,
    /// Iterative soft thresholding with step `1/L`.
    Ista {
        iterations: usize,
        /// L1 weight; `None` selects `noise_std * sqrt(2 ln n) * sqrt(m/n)`.
        lambda: Option<f64>,
        /// Relative change in `x` below which the iteration counts as converged.
        tol: f64,
    },
}

impl Solver {
    pub fn ista_default() -> Self {
        Solver::Ista {
            iterations: 2000,
            lambda: None,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    pub solver: Solver,
    /// Number of atoms OMP selects.
    pub sparsity: usize,
    pub trials: usize,
    pub seed: u64,
    /// Standard deviation of the additive noise; 1 in the channel model, 0 for noiseless runs.
    pub noise_std: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Omp,
            sparsity: 1,
            trials: 1,
            seed: crate::rng::DEFAULT_SEED,
            noise_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub x_hat: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// `(1/n) sum (x_i - x_hat_i)^2`.
pub fn distortion(x: &DVector<f64>, x_hat: &DVector<f64>) -> f64 {
    assert_eq!(x.len(), x_hat.len(), "distortion between vectors of different length");
    if x.is_empty() {
        return 0.0;
    }
    (x - x_hat).norm_squared() / x.len() as f64
}

pub fn omp(a: &DMatrix<f64>, y: &DVector<f64>, sparsity: usize) -> Result<Recovery> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    let mut x_hat = DVector::zeros(n);
    let y_norm = y.norm();
    if sparsity == 0 || y_norm == 0.0 {
        return Ok(Recovery {
            x_hat,
            converged: true,
            iterations: 0,
            residual_norm: y_norm,
        });
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut residual = y.clone();
    let mut coef = DVector::zeros(0);
    let budget = sparsity.min(m).min(n);

    while support.len() < budget {
        let corr = a.tr_mul(&residual);
        let pick = (0..n)
            .filter(|j| norms[*j] > 0.0 && !support.contains(j))
            .max_by(|&i, &j| (corr[i].abs() / norms[i]).total_cmp(&(corr[j].abs() / norms[j])));
        let Some(j) = pick else { break };
        support.push(j);

        let sub = a.select_columns(&support);
        let (q, r) = sub.clone().qr().unpack();
        let diag_max = r.diagonal().amax();
        if r.diagonal()
            .iter()
            .any(|d| d.abs() <= 1e-12 * diag_max.max(f64::MIN_POSITIVE))
        {
            return Err(Error::SingularLeastSquares(support.len()));
        }
        coef = r
            .solve_upper_triangular(&q.tr_mul(y))
            .ok_or(Error::SingularLeastSquares(support.len()))?;
        residual = y - &sub * &coef;
        if residual.norm() <= 1e-12 * y_norm {
            break;
        }
    }
    for (k, &j) in support.iter().enumerate() {
        x_hat[j] = coef[k];
    }
    Ok(Recovery {
        x_hat,
        converged: true,
        iterations: support.len(),
        residual_norm: residual.norm(),
    })
}

/// Power-iteration estimate of `||A||_2^2` from a fixed all-ones start.
pub fn spectral_norm_sq(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let w = a.tr_mul(&(a * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm;
        v = w / norm;
    }
    estimate
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub const POWER_ITERATIONS: usize = 50;

pub fn default_lambda(noise_std: f64, m: usize, n: usize) -> f64 {
    noise_std * (2.0 * (n as f64).ln()).sqrt() * (m as f64 / n as f64).sqrt()
}

pub fn ista(a: &DMatrix<f64>, y: &DVector<f64>, iterations: usize, lambda: f64, tol: f64) -> Result<Recovery> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    let mut x = DVector::zeros(n);
    let lip = spectral_norm_sq(a, POWER_ITERATIONS);
    if lip == 0.0 {
        return Ok(Recovery {
            residual_norm: y.norm(),
            x_hat: x,
            converged: true,
            iterations: 0,
        });
    }
    // small margin over the power-iteration estimate, which approaches L from below
    let step = 1.0 / (lip * 1.01);
    let mut converged = false;
    let mut done = 0;
    for it in 1..=iterations {
        done = it;
        let grad = a.tr_mul(&(a * &x - y));
        let next = (&x - grad * step).map(|v| soft_threshold(v, lambda * step));
        let change = (&next - &x).norm();
        let scale = next.norm().max(f64::MIN_POSITIVE);
        x = next;
        if change <= tol * scale || change == 0.0 {
            converged = true;
            break;
        }
    }
    let residual_norm = (y - a * &x).norm();
    Ok(Recovery {
        x_hat: x,
        converged,
        iterations: done,
        residual_norm,
    })
}

pub fn recover(y: &DVector<f64>, matrix: &SamplingMatrix, config: &RecoveryConfig) -> Result<Recovery> {
    let a = matrix.full();
    match config.solver {
        Solver::Omp => omp(&a, y, config.sparsity),
        Solver::Ista {
            iterations,
            lambda,
            tol,
        } => {
            let lambda = lambda.unwrap_or_else(|| default_lambda(config.noise_std, a.nrows(), a.ncols()));
            ista(&a, y, iterations, lambda, tol)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    /// `None` when the solver failed.
    pub distortion: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub extension: Extension,
    pub alpha: f64,
    pub outcomes: Vec<TrialOutcome>,
    /// Mean distortion over successful trials.
    pub mean: f64,
    /// Standard error of `mean`; NaN with fewer than two successful trials.
    pub std_err: f64,
    pub failures: usize,
}

impl DistortionReport {
    fn from_outcomes(extension: Extension, alpha: f64, outcomes: Vec<TrialOutcome>) -> Self {
        let values: Vec<f64> = outcomes.iter().filter_map(|o| o.distortion).collect();
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std_err = if values.len() >= 2 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            f64::NAN
        };
        let failures = outcomes.len() - values.len();
        Self {
            extension,
            alpha,
            outcomes,
            mean,
            std_err,
            failures,
        }
    }
}

/// `(a.mean - b.mean, sqrt(a.se^2 + b.se^2))`.
pub fn pooled_difference(a: &DistortionReport, b: &DistortionReport) -> (f64, f64) {
    (a.mean - b.mean, (a.std_err.powi(2) + b.std_err.powi(2)).sqrt())
}

/// Paired comparison of extension rates at a fixed `m_o`.
///
/// Trial `t` draws `Phi_o` from `derive_seed(base.seed, Matrix, t)`, the
/// signal from `(config.seed, Signal, t)` and the noise on the original rows
/// from `(config.seed, Noise, t)`; these are shared by every arm. Extended
/// rows get their own noise stream per arm.
pub fn mse_experiment(
    base: &MatrixSpec,
    signal: &SignalModel,
    extensions: &[Extension],
    config: &RecoveryConfig,
) -> Result<Vec<DistortionReport>> {
    base.validate()?;
    if signal.n != base.n {
        return Err(Error::DimensionMismatch {
            expected: base.n,
            got: signal.n,
        });
    }
    if config.trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    let arms: Vec<(Extension, Vec<_>)> = extensions
        .iter()
        .map(|e| e.sequences(base.m_o).map(|s| (*e, s)))
        .collect::<Result<_>>()?;

    let per_trial: Vec<Vec<TrialOutcome>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let ti = t as u64;
            let spec = base.with_seed(derive_seed(base.seed, Purpose::Matrix, ti));
            let x = signal.draw(&mut stream(config.seed, Purpose::Signal, ti));
            let mut noise_rng = stream(config.seed, Purpose::Noise, ti);
            let z_o: Vec<f64> = (0..base.m_o).map(|_| StandardNormal.sample(&mut noise_rng)).collect();
            arms.iter()
                .enumerate()
                .map(|(arm, (_, sequences))| {
                    let matrix = generate(&spec, sequences).expect("sequences validated");
                    let w = matrix.full() * &x;
                    let mut ext_rng = stream(
                        derive_seed(config.seed, Purpose::ExtendedNoise, arm as u64),
                        Purpose::ExtendedNoise,
                        ti,
                    );
                    let z = z_o
                        .iter()
                        .copied()
                        .chain((0..matrix.m_e()).map(|_| StandardNormal.sample(&mut ext_rng)));
                    let y = DVector::from_iterator(w.len(), w.iter().zip(z).map(|(w, z)| w + config.noise_std * z));
                    match recover(&y, &matrix, config) {
                        Ok(r) => TrialOutcome {
                            trial: t,
                            distortion: Some(distortion(&x, &r.x_hat)),
                            converged: r.converged,
                            error: None,
                        },
                        Err(e) => TrialOutcome {
                            trial: t,
                            distortion: None,
                            converged: false,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect()
        })
        .collect();

    Ok(arms
        .iter()
        .enumerate()
        .map(|(arm, (ext, _))| {
            let outcomes = per_trial.iter().map(|row| row[arm].clone()).collect();
            DistortionReport::from_outcomes(*ext, ext.alpha(base.m_o), outcomes)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample, EntryDistribution};

    #[test]
    fn distortion_properties() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.0, 3.0]);
        let z = DVector::from_vec(vec![0.5, 0.0, 1.0, 3.0]);
        assert_eq!(distortion(&x, &x), 0.0);
        assert_eq!(distortion(&x, &z), distortion(&z, &x));
        assert!((distortion(&(&x * 3.0), &(&z * 3.0)) - 9.0 * distortion(&x, &z)).abs() < 1e-12);
        assert!((distortion(&x, &z) - (0.25 + 4.0 + 1.0) / 4.0).abs() < 1e-15);
    }

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let spec = MatrixSpec::new(m, n.div_ceil(m) * m, EntryDistribution::Gaussian, seed).unwrap();
        generate(&spec, &[]).unwrap().phi_o.columns(0, n).into_owned()
    }

    #[test]
    fn zero_inputs_give_zero_estimate() {
        let a = gaussian(8, 32, 1);
        let y = DVector::zeros(8);
        assert!(omp(&a, &y, 3).unwrap().x_hat.iter().all(|v| *v == 0.0));
        assert!(ista(&a, &y, 100, 0.1, 1e-8).unwrap().x_hat.iter().all(|v| *v == 0.0));
        let y = a.column(3).into_owned();
        assert!(omp(&a, &y, 0).unwrap().x_hat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn omp_exact_on_noiseless_sparse() {
        let a = gaussian(20, 60, 4);
        let mut x = DVector::zeros(60);
        x[5] = 2.0;
        x[17] = -1.5;
        x[42] = 0.75;
        let y = &a * &x;
        let r = omp(&a, &y, 3).unwrap();
        assert!(r.residual_norm <= 1e-10 * y.norm());
        assert!(distortion(&x, &r.x_hat) < 1e-20);
    }

    #[test]
    fn ista_shrinks_towards_sparse_solution() {
        let a = gaussian(30, 60, 8);
        let mut x = DVector::zeros(60);
        x[7] = 3.0;
        x[33] = -2.0;
        let y = &a * &x;
        let r = ista(&a, &y, 5000, 1e-3, 1e-10).unwrap();
        assert!(distortion(&x, &r.x_hat) < 1e-4, "{}", distortion(&x, &r.x_hat));
    }

    #[test]
    fn ista_reports_non_convergence() {
        let a = gaussian(30, 60, 8);
        let y = DVector::from_fn(30, |i, _| (i as f64).sin());
        let r = ista(&a, &y, 3, 1e-3, 1e-14).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn spectral_norm_estimate() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.5]));
        assert!((spectral_norm_sq(&a, 50) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn recover_dispatches_solvers() {
        let spec = MatrixSpec::new(4, 16, EntryDistribution::Gaussian, 5).unwrap();
        let m = generate(&spec, &Extension::SingleGroup { m_e: 2 }.sequences(4).unwrap()).unwrap();
        let mut x = DVector::zeros(16);
        x[9] = 1.0;
        let rec = sample(&m, &x, 1).unwrap();
        let cfg = RecoveryConfig {
            sparsity: 1,
            noise_std: 0.0,
            ..Default::default()
        };
        let r = recover(&rec.w, &m, &cfg).unwrap();
        assert!(distortion(&x, &r.x_hat) < 1e-20);
        let cfg = RecoveryConfig {
            solver: Solver::ista_default(),
            ..cfg
        };
        assert!(recover(&rec.w, &m, &cfg).is_ok());
    }

    #[test]
    fn single_trial_experiment() {
        let base = MatrixSpec::new(8, 64, EntryDistribution::Gaussian, 3).unwrap();
        let signal = SignalModel::sparse_spikes(2, 10.0, 64);
        let cfg = RecoveryConfig {
            sparsity: 2,
            trials: 1,
            seed: 9,
            ..Default::default()
        };
        let reports = mse_experiment(
            &base,
            &signal,
            &[Extension::NONE, Extension::SingleGroup { m_e: 8 }],
            &cfg,
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].outcomes.len(), 1);
        assert!(reports[0].std_err.is_nan());
        assert!(reports[0].mean.is_finite());
    }

    #[test]
    fn experiment_is_deterministic() {
        let base = MatrixSpec::new(8, 64, EntryDistribution::Gaussian, 3).unwrap();
        let signal = SignalModel::sparse_spikes(2, 10.0, 64);
        let cfg = RecoveryConfig {
            sparsity: 2,
            trials: 16,
            seed: 9,
            ..Default::default()
        };
        let exts = [Extension::NONE, Extension::SingleGroup { m_e: 4 }];
        let a = mse_experiment(&base, &signal, &exts, &cfg).unwrap();
        let b = mse_experiment(&base, &signal, &exts, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
