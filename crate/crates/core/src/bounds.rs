//! Capacity upper bounds and sampling-rate lower bounds for segmented
//! sampling with correlated samples.
//!
//! All logarithms are base 2 except inside the stationary point of the
//! continuous single-group optimum, which carries a natural log.
//!
//! Single-group extension (`alpha = m_e/m_o <= 1`):
//!
//! ```text
//! C       <= m/2 log(g+1) + 1/2 log(1 - (g/(g+1))^2 alpha)
//! delta   >= 2R/log(g+1) - log(1 - (g/(g+1))^2 alpha) / (n log(g+1))
//! delta_o  = delta / (1 + alpha)
//! ```
//!
//! Multi-group extension (`alpha = 1, ..., m_o-1` whole groups):
//!
//! ```text
//! C       <= m/2 log(g+1) - [(alpha+1)/2 log(g+1) - 1/2 log((1+alpha) g + 1)]
//! delta   >= 2R/log(g+1) + (alpha+1)/n - log((1+alpha) g + 1) / (n log(g+1))
//! delta_o >= (2R/log(g+1) - log((1+alpha) g + 1) / (n log(g+1))) / (1+alpha) + 1/n
//! ```

use crate::error::{Error, Result};
use crate::model::Extension;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(gamma: f64) -> f64 {
    10.0 * gamma.log10()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("SNR must be finite and >= 0, got {gamma}")))
    }
}

fn check_positive_gamma(gamma: f64) -> Result<()> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Err(Error::Domain("SNR must be positive: log(1+gamma) = 0".into()));
    }
    Ok(())
}

/// Capacity of `m` independent samples of equal variance:
/// `m/2 log2(1 + gamma - mu_w^2)`.
pub fn baseline_capacity_ub(gamma: f64, mu_w: f64, m: usize) -> Result<f64> {
    let arg = 1.0 + gamma - mu_w * mu_w;
    if arg.is_nan() || arg <= 0.0 {
        return Err(Error::Domain(format!("1 + gamma - mu_w^2 = {arg} must be positive")));
    }
    Ok(m as f64 * 0.5 * arg.log2())
}

/// `1/2 log2(1 - (g/(g+1))^2 alpha)`; never positive.
pub fn single_group_capacity_penalty(gamma: f64, alpha: f64) -> f64 {
    let b = gamma / (gamma + 1.0);
    0.5 * (1.0 - b * b * alpha).log2()
}

/// `(alpha+1)/2 log2(g+1) - 1/2 log2((1+alpha) g + 1)`; never negative,
/// subtracted from the leading term.
pub fn multi_group_capacity_penalty(gamma: f64, alpha: f64) -> f64 {
    0.5 * (alpha + 1.0) * (gamma + 1.0).log2() - 0.5 * ((1.0 + alpha) * gamma + 1.0).log2()
}

/// Single-group capacity bound as a function of a real `alpha` in `[0, 1]`
/// with `m = (1 + alpha) m_o`.
pub fn capacity_ub_single_continuous(gamma: f64, alpha: f64, m_o: usize) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(format!(
            "single-group extension needs alpha in [0, 1], got {alpha}"
        )));
    }
    let m = (1.0 + alpha) * m_o as f64;
    Ok(0.5 * m * (gamma + 1.0).log2() + single_group_capacity_penalty(gamma, alpha))
}

/// Multi-group capacity bound for `alpha` whole groups.
pub fn capacity_ub_multi(gamma: f64, groups: usize, m_o: usize) -> Result<f64> {
    check_gamma(gamma)?;
    Extension::MultiGroup { groups }.validate(m_o)?;
    let alpha = groups as f64;
    let m = ((1 + groups) * m_o) as f64;
    Ok(0.5 * m * (gamma + 1.0).log2() - multi_group_capacity_penalty(gamma, alpha))
}

/// Sampling-rate bound split into the uncorrelated baseline `2R/log(g+1)`
/// and the correlation penalty, which is exactly proportional to `1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBound {
    pub baseline: f64,
    pub penalty: f64,
}

impl DeltaBound {
    pub fn total(&self) -> f64 {
        self.baseline + self.penalty
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    /// Linear SNR.
    pub gamma: f64,
    pub m_o: usize,
    pub n: usize,
    /// Rate-distortion value in bits per source symbol.
    pub rd: f64,
    pub extension: Extension,
}

impl BoundQuery {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if self.n == 0 {
            return Err(Error::Domain("signal length n must be positive".into()));
        }
        if !(self.rd.is_finite() && self.rd >= 0.0) {
            return Err(Error::Domain(format!("R(D) must be finite and >= 0, got {}", self.rd)));
        }
        self.extension.validate(self.m_o)
    }

    pub fn alpha(&self) -> f64 {
        self.extension.alpha(self.m_o)
    }

    pub fn m(&self) -> usize {
        self.extension.total_rows(self.m_o)
    }
}

pub fn capacity_ub(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    match q.extension {
        Extension::SingleGroup { .. } => capacity_ub_single_continuous(q.gamma, q.alpha(), q.m_o),
        Extension::MultiGroup { groups } => capacity_ub_multi(q.gamma, groups, q.m_o),
    }
}

/// Uncorrelated-sample rate bound `2R / log2(1 + gamma)`.
pub fn delta_baseline(gamma: f64, rd: f64) -> Result<f64> {
    check_positive_gamma(gamma)?;
    Ok(2.0 * rd / (gamma + 1.0).log2())
}

pub fn delta_lb(q: &BoundQuery) -> Result<DeltaBound> {
    q.validate()?;
    let baseline = delta_baseline(q.gamma, q.rd)?;
    let lg = (q.gamma + 1.0).log2();
    let n = q.n as f64;
    let alpha = q.alpha();
    let penalty = match q.extension {
        Extension::SingleGroup { .. } => return delta_lb_single_continuous(q.gamma, q.rd, alpha, q.n),
        Extension::MultiGroup { .. } => ((alpha + 1.0) - ((1.0 + alpha) * q.gamma + 1.0).log2() / lg) / n,
    };
    Ok(DeltaBound { baseline, penalty })
}

/// Single-group rate bound for a real `alpha` in `[0, 1]`.
pub fn delta_lb_single_continuous(gamma: f64, rd: f64, alpha: f64, n: usize) -> Result<DeltaBound> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(format!(
            "single-group extension needs alpha in [0, 1], got {alpha}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("signal length n must be positive".into()));
    }
    let baseline = delta_baseline(gamma, rd)?;
    let b = gamma / (gamma + 1.0);
    let penalty = -(1.0 - b * b * alpha).log2() / (gamma + 1.0).log2() / n as f64;
    Ok(DeltaBound { baseline, penalty })
}

pub fn delta_o_lb(q: &BoundQuery) -> Result<f64> {
    let delta = delta_lb(q)?;
    let alpha = q.alpha();
    Ok(match q.extension {
        Extension::SingleGroup { .. } => delta.total() / (1.0 + alpha),
        Extension::MultiGroup { .. } => {
            let lg = (q.gamma + 1.0).log2();
            let n = q.n as f64;
            (delta.baseline - ((1.0 + alpha) * q.gamma + 1.0).log2() / lg / n) / (1.0 + alpha) + 1.0 / n
        }
    })
}

/// `n -> infinity` form of the original-rate bound: `2R / log2(1+g) / (1+alpha)`.
pub fn delta_o_lb_limit(gamma: f64, rd: f64, alpha: f64) -> Result<f64> {
    Ok(delta_baseline(gamma, rd)? / (1.0 + alpha))
}

/// `R(D) ~ (s/n) log2(n/s)` for an `s`-sparse signal with equal-magnitude spikes.
pub fn rate_distortion_sparse(sparsity_ratio: f64) -> Result<f64> {
    if !(sparsity_ratio > 0.0 && sparsity_ratio < 1.0) {
        return Err(Error::Domain(format!(
            "sparsity ratio must lie in (0, 1), got {sparsity_ratio}"
        )));
    }
    Ok(sparsity_ratio * (1.0 / sparsity_ratio).log2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    pub capacity_ub: f64,
    pub delta_lb: DeltaBound,
    pub delta_o_lb: f64,
}

pub fn evaluate(q: &BoundQuery) -> Result<BoundResult> {
    Ok(BoundResult {
        capacity_ub: capacity_ub(q)?,
        delta_lb: delta_lb(q)?,
        delta_o_lb: delta_o_lb(q)?,
    })
}

/// Optimal single-group extension rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalAlpha {
    /// Row count `m_e` maximising the bound over `{0, ..., m_o}`.
    pub discrete_m_e: usize,
    pub discrete: f64,
    /// Maximiser over the real interval `[0, 1]`: `min(stationary, 1)`.
    pub continuous: f64,
    /// Unclamped zero of the derivative,
    /// `(g+1)^2/g^2 - 1/(m_o ln(g+1))`.
    pub stationary: f64,
    /// `f(1) - f((m_o-1)/m_o)`; positive whenever the grid optimum is 1.
    pub margin_over_runner_up: f64,
}

pub fn optimal_alpha_single(gamma: f64, m_o: usize) -> Result<OptimalAlpha> {
    check_positive_gamma(gamma)?;
    if m_o == 0 {
        return Err(Error::Domain("m_o must be positive".into()));
    }
    let values: Vec<f64> = (0..=m_o)
        .map(|m_e| capacity_ub_single_continuous(gamma, m_e as f64 / m_o as f64, m_o))
        .collect::<Result<_>>()?;
    let discrete_m_e = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let r = (gamma + 1.0) / gamma;
    let stationary = r * r - 1.0 / (m_o as f64 * (gamma + 1.0).ln());
    Ok(OptimalAlpha {
        discrete_m_e,
        discrete: discrete_m_e as f64 / m_o as f64,
        continuous: stationary.min(1.0),
        stationary,
        margin_over_runner_up: values[m_o] - values[m_o - 1],
    })
}

/// Multi-group capacity bound across `alpha = 1..=m_o-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub gamma: f64,
    pub m_o: usize,
    /// `(alpha, capacity bound)` pairs.
    pub values: Vec<(usize, f64)>,
    pub non_decreasing: bool,
    /// Every multi-group value is at least the single-group maximum (at alpha = 1).
    pub dominates_single_group: bool,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.non_decreasing && self.dominates_single_group
    }
}

pub fn monotonicity_multi(gamma: f64, m_o: usize) -> Result<MonotonicityReport> {
    check_gamma(gamma)?;
    if m_o < 2 {
        return Err(Error::Domain(format!(
            "multi-group extension needs m_o >= 2, got {m_o}"
        )));
    }
    let values: Vec<(usize, f64)> = (1..m_o)
        .map(|a| capacity_ub_multi(gamma, a, m_o).map(|c| (a, c)))
        .collect::<Result<_>>()?;
    let tol = |v: f64| 1e-12 * v.abs().max(1.0);
    let non_decreasing = values.windows(2).all(|w| w[1].1 >= w[0].1 - tol(w[0].1));
    let single_max = (0..=m_o)
        .map(|m_e| capacity_ub_single_continuous(gamma, m_e as f64 / m_o as f64, m_o))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let dominates_single_group = values.iter().all(|&(_, c)| c >= single_max - tol(single_max));
    Ok(MonotonicityReport {
        gamma,
        m_o,
        values,
        non_decreasing,
        dominates_single_group,
    })
}

/// One row of a bound sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: String,
    pub gamma_db: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub m_o: usize,
    pub n: usize,
    pub rd: f64,
    pub capacity_ub: f64,
    pub delta_lb: f64,
    pub delta_o_lb: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 10] = [
        "case",
        "gamma_db",
        "gamma",
        "alpha",
        "m_o",
        "n",
        "rd",
        "capacity_ub",
        "delta_lb",
        "delta_o_lb",
    ];

    pub fn from_query(q: &BoundQuery) -> Result<Self> {
        let r = evaluate(q)?;
        Ok(Self {
            case: q.extension.case_name().to_string(),
            gamma_db: linear_to_db(q.gamma),
            gamma: q.gamma,
            alpha: q.alpha(),
            m_o: q.m_o,
            n: q.n,
            rd: q.rd,
            capacity_ub: r.capacity_ub,
            delta_lb: r.delta_lb.total(),
            delta_o_lb: r.delta_o_lb,
        })
    }

    /// Sample of the single-group curves at a real `alpha` in `[0, 1]`,
    /// labelled `continuous`.
    pub fn single_continuous(gamma: f64, alpha: f64, m_o: usize, n: usize, rd: f64) -> Result<Self> {
        let delta = delta_lb_single_continuous(gamma, rd, alpha, n)?.total();
        Ok(Self {
            case: "continuous".to_string(),
            gamma_db: linear_to_db(gamma),
            gamma,
            alpha,
            m_o,
            n,
            rd,
            capacity_ub: capacity_ub_single_continuous(gamma, alpha, m_o)?,
            delta_lb: delta,
            delta_o_lb: delta / (1.0 + alpha),
        })
    }

    pub fn fields(&self) -> [String; 10] {
        [
            self.case.clone(),
            self.gamma_db.to_string(),
            self.gamma.to_string(),
            self.alpha.to_string(),
            self.m_o.to_string(),
            self.n.to_string(),
            self.rd.to_string(),
            self.capacity_ub.to_string(),
            self.delta_lb.to_string(),
            self.delta_o_lb.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q(gamma: f64, m_o: usize, n: usize, rd: f64, extension: Extension) -> BoundQuery {
        BoundQuery {
            gamma,
            m_o,
            n,
            rd,
            extension,
        }
    }

    #[test]
    fn baseline_capacity() {
        assert_relative_eq!(
            baseline_capacity_ub(100.0, 0.0, 6).unwrap(),
            3.0 * 101f64.log2(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            baseline_capacity_ub(100.0, 0.0, 6).unwrap(),
            19.974634448255383,
            max_relative = 1e-12
        );
        assert_eq!(baseline_capacity_ub(0.0, 0.0, 4).unwrap(), 0.0);
        assert_eq!(baseline_capacity_ub(4.0, 2.0, 4).unwrap(), 0.0);
        assert!(baseline_capacity_ub(1.0, 2.0, 4).is_err());
    }

    #[test]
    fn single_group_capacity() {
        let c = capacity_ub(&q(100.0, 3, 100, 0.2, Extension::SingleGroup { m_e: 3 })).unwrap();
        assert_relative_eq!(c, 17.14194881109304, max_relative = 1e-12);
        let c0 = capacity_ub(&q(100.0, 3, 100, 0.2, Extension::NONE)).unwrap();
        assert_relative_eq!(c0, baseline_capacity_ub(100.0, 0.0, 3).unwrap(), max_relative = 1e-15);
        assert_eq!(
            capacity_ub(&q(0.0, 3, 100, 0.2, Extension::SingleGroup { m_e: 2 })).unwrap(),
            0.0
        );
        assert!(capacity_ub_single_continuous(1.0, 1.5, 3).is_err());
    }

    #[test]
    fn multi_group_capacity() {
        // 3 log2(101) + 1/2 log2(301); the tail term is (1+alpha) gamma + 1 = 301
        let c = capacity_ub_multi(100.0, 2, 3).unwrap();
        assert_relative_eq!(c, 24.091444286635223, max_relative = 1e-12);
        assert_relative_eq!(
            capacity_ub_multi(100.0, 1, 3).unwrap(),
            17.14194881109304,
            max_relative = 1e-12
        );
        assert_eq!(capacity_ub_multi(0.0, 2, 5).unwrap(), 0.0);
        assert!(capacity_ub_multi(1.0, 3, 3).is_err());
        assert!(capacity_ub_multi(1.0, 0, 3).is_err());
    }

    #[test]
    fn penalty_signs() {
        for g in [0.0, 0.1, 1.0, 10.0, 1000.0] {
            for a in [0.0, 0.25, 0.5, 1.0] {
                assert!(single_group_capacity_penalty(g, a) <= 0.0);
            }
            for a in 1..10 {
                assert!(multi_group_capacity_penalty(g, a as f64) >= -1e-15);
            }
        }
    }

    #[test]
    fn example_one_optimum() {
        let opt = optimal_alpha_single(100.0, 3).unwrap();
        assert_relative_eq!(opt.stationary, 0.9478736448881562, max_relative = 1e-12);
        assert_eq!(opt.continuous, opt.stationary);
        assert_eq!(opt.discrete_m_e, 3);
        assert!(opt.margin_over_runner_up > 0.0);
        assert_eq!(optimal_alpha_single(3.0, 1).unwrap().discrete_m_e, 1);
        assert!(optimal_alpha_single(0.0, 3).is_err());
    }

    #[test]
    fn exhaustive_grid_at_gamma_ten() {
        let grid: Vec<f64> = (0..=5)
            .map(|k| capacity_ub_single_continuous(10.0, k as f64 / 5.0, 5).unwrap())
            .collect();
        let best = (0..=5).max_by(|&a, &b| grid[a].total_cmp(&grid[b])).unwrap();
        assert_eq!(best, 5);
        assert_eq!(optimal_alpha_single(10.0, 5).unwrap().discrete_m_e, 5);
    }

    #[test]
    fn delta_bounds() {
        let d = delta_lb(&q(100.0, 3, 10_000_000, 0.0013, Extension::SingleGroup { m_e: 3 })).unwrap();
        assert_relative_eq!(d.baseline, 0.0003904952563815887, max_relative = 1e-12);
        assert_relative_eq!(d.penalty, 8.50884849332421e-08, max_relative = 1e-9);

        let d0 = delta_lb(&q(100.0, 3, 100, 0.2, Extension::NONE)).unwrap();
        assert_eq!(d0.penalty, 0.0);
        assert_eq!(d0.total(), 2.0 * 0.2 / 101f64.log2());

        // (1+alpha) gamma + 1 = 601 for alpha = 5
        let d5 = delta_lb(&q(100.0, 7, 10_000_000, 0.0013, Extension::MultiGroup { groups: 5 })).unwrap();
        assert_relative_eq!(d5.total(), 0.0003909566122246011, max_relative = 1e-12);

        let one_multi = delta_lb(&q(100.0, 3, 1000, 0.2, Extension::MultiGroup { groups: 1 })).unwrap();
        let one_single = delta_lb(&q(100.0, 3, 1000, 0.2, Extension::SingleGroup { m_e: 3 })).unwrap();
        assert_relative_eq!(one_multi.total(), one_single.total(), max_relative = 1e-13);

        assert!(delta_lb(&q(0.0, 3, 100, 0.2, Extension::NONE)).is_err());
    }

    #[test]
    fn penalty_halves_when_n_doubles() {
        let at = |n| {
            delta_lb(&q(100.0, 3, n, 0.2, Extension::SingleGroup { m_e: 2 }))
                .unwrap()
                .penalty
        };
        assert_relative_eq!(at(1000) / at(2000), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn example_one_delta_o_grid() {
        let expected = [
            0.060076193289475194,
            0.045700131448712364,
            0.03742374420877481,
            0.034292520891399704,
        ];
        for (m_e, e) in expected.iter().enumerate() {
            let v = delta_o_lb(&q(100.0, 3, 100, 0.2, Extension::SingleGroup { m_e })).unwrap();
            assert_relative_eq!(v, *e, max_relative = 1e-12);
        }
        let d = delta_lb(&q(100.0, 3, 100, 0.2, Extension::NONE)).unwrap();
        assert_eq!(delta_o_lb(&q(100.0, 3, 100, 0.2, Extension::NONE)).unwrap(), d.total());
    }

    #[test]
    fn delta_o_multi_matches_delta_over_one_plus_alpha() {
        let query = q(30.0, 7, 5000, 0.1, Extension::MultiGroup { groups: 4 });
        let via_delta = delta_lb(&query).unwrap().total() / 5.0;
        assert_relative_eq!(delta_o_lb(&query).unwrap(), via_delta, max_relative = 1e-12);
    }

    #[test]
    fn limit_form_strictly_decreasing() {
        let vals: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 5.0]
            .iter()
            .map(|&a| delta_o_lb_limit(10.0, 0.2, a).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rate_distortion() {
        let r = rate_distortion_sparse(1e-4).unwrap();
        assert_eq!(format!("{r:.4}"), "0.0013");
        assert_relative_eq!(rate_distortion_sparse(0.5).unwrap(), 0.5);
        assert_relative_eq!(
            rate_distortion_sparse(0.01).unwrap(),
            0.06643856189774724,
            max_relative = 1e-12
        );
        assert!(rate_distortion_sparse(0.0).is_err());
        assert!(rate_distortion_sparse(1.0).is_err());
    }

    #[test]
    fn monotonicity() {
        let r = monotonicity_multi(100.0, 7).unwrap();
        assert_eq!(r.values.len(), 6);
        assert!(r.passed());
        let zero = monotonicity_multi(0.0, 5).unwrap();
        assert!(zero.values.iter().all(|&(_, c)| c == 0.0));
        assert!(zero.passed());
        let two = monotonicity_multi(3.0, 2).unwrap();
        assert_eq!(two.values.len(), 1);
        assert!(two.passed());
    }

    #[test]
    fn sweep_row() {
        let row = SweepRow::from_query(&q(100.0, 3, 100, 0.2, Extension::NONE)).unwrap();
        assert_relative_eq!(row.gamma_db, 20.0, max_relative = 1e-15);
        assert_eq!(row.case, "single_group");
        assert_eq!(row.fields().len(), SweepRow::HEADER.len());
    }
}
