//! Oracle suites behind `segcs verify`: exhaustive enumeration for the
//! sequence constructions, numeric linear algebra for the covariance closed
//! forms and for the capacity/determinant identity.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::bounds::{capacity_ub, BoundQuery};
use crate::covariance::{
    build_sigma_w, check_det_v, check_eigen_v, det_sigma_y, sigma_w_from_sequences, CovarianceModel,
};
use crate::error::{Error, Result};
use crate::linalg::lu_log_det;
use crate::model::Extension;
use crate::permgroup::{congruence_groups, correlation_count, cyclic_grouping, is_prime, ConstantSequence};

pub const DET_TOL: f64 = 1e-9;
pub const EIGEN_TOL: f64 = 1e-8;
pub const SIGMA_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const BETA_GRID: [f64; 4] = [0.2, 0.5, 0.8, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Groups,
    Covariance,
    Capacity,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "groups" => Ok(Suite::Groups),
            "covariance" => Ok(Suite::Covariance),
            "capacity" => Ok(Suite::Capacity),
            "all" => Ok(Suite::All),
            other => Err(Error::Parse(format!(
                "unknown suite '{other}' (expected groups, covariance, capacity or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}  {:<10} {:<40} {}", self.suite, self.name, self.detail)
    }
}

/// Restrictions on the verification grid. Unset fields use the full default grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyOptions {
    pub m_o: Option<usize>,
    pub extension: Option<Extension>,
    /// Signal variance, equal to the linear SNR.
    pub gamma: Option<f64>,
    pub small: bool,
}

impl VerifyOptions {
    fn m_o_range(&self, full: std::ops::RangeInclusive<usize>, small_max: usize) -> Vec<usize> {
        match self.m_o {
            Some(m) => vec![m],
            None if self.small => (*full.start()..=small_max.min(*full.end())).collect(),
            None => full.collect(),
        }
    }

    fn sigmas(&self) -> Vec<f64> {
        match self.gamma {
            Some(g) => vec![g],
            None if self.small => vec![1.0, 100.0],
            None => SIGMA_GRID.to_vec(),
        }
    }

    fn extensions(&self, m_o: usize) -> Vec<Extension> {
        if let Some(e) = self.extension {
            return vec![e];
        }
        let mut out: Vec<Extension> = (0..=m_o).map(|m_e| Extension::SingleGroup { m_e }).collect();
        if is_prime(m_o) {
            out.extend((1..m_o).map(|groups| Extension::MultiGroup { groups }));
        }
        out
    }
}

pub fn run(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Groups | Suite::All) {
        checks.extend(groups_suite(opts)?);
    }
    if matches!(suite, Suite::Covariance | Suite::All) {
        checks.extend(covariance_suite(opts)?);
    }
    if matches!(suite, Suite::Capacity | Suite::All) {
        checks.extend(capacity_suite(opts)?);
    }
    Ok(checks)
}

/// All permutations of `1..=m_o`, found by filtering every `m_o`-tuple.
/// Independent of the successor routine used by the grouping.
pub fn brute_force_permutations(m_o: usize) -> Vec<Vec<usize>> {
    let total = m_o.pow(m_o as u32);
    (0..total)
        .map(|mut code| {
            (0..m_o)
                .map(|_| {
                    let d = code % m_o + 1;
                    code /= m_o;
                    d
                })
                .collect::<Vec<usize>>()
        })
        .filter(|t| t.iter().collect::<HashSet<_>>().len() == m_o)
        .collect()
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Cyclic-shift partition: `(m_o-1)!` groups of `m_o` pairwise uncorrelated
/// sequences covering every permutation exactly once.
pub fn check_cyclic_partition(m_o: usize) -> Result<Check> {
    let groups = cyclic_grouping(m_o)?;
    let mut problems = Vec::new();
    if groups.len() != factorial(m_o - 1) {
        problems.push(format!("{} groups, expected {}", groups.len(), factorial(m_o - 1)));
    }
    for g in &groups {
        if g.members.len() != m_o {
            problems.push(format!("group {} has {} members", g.id, g.members.len()));
        }
        for (a, x) in g.members.iter().enumerate() {
            for y in &g.members[a + 1..] {
                let c = correlation_count(x, y)?;
                if c != 0 {
                    problems.push(format!("group {}: {x} and {y} share {c} segments", g.id));
                }
            }
        }
    }
    let union: Vec<Vec<usize>> = groups
        .iter()
        .flat_map(|g| g.members.iter().map(|s| s.elements().to_vec()))
        .collect();
    let union_set: HashSet<Vec<usize>> = union.iter().cloned().collect();
    let all: HashSet<Vec<usize>> = brute_force_permutations(m_o).into_iter().collect();
    if union_set.len() != union.len() {
        problems.push(format!("{} repeated sequences", union.len() - union_set.len()));
    }
    if union_set != all {
        problems.push(format!(
            "union covers {} of {} permutations",
            union_set.intersection(&all).count(),
            all.len()
        ));
    }
    Ok(Check {
        suite: "groups",
        name: format!("cyclic partition m_o={m_o}"),
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{} groups, {} permutations", groups.len(), all.len())
        } else {
            problems.join("; ")
        },
    })
}

/// Congruence groups for prime `m_o`: no overlap inside a group, exactly
/// one shared segment across groups, and one with every original row.
pub fn check_congruence(m_o: usize, alpha: usize) -> Result<Check> {
    let family = congruence_groups(m_o, alpha)?;
    let mut bad = 0usize;
    let mut pairs = 0usize;
    let originals: Vec<ConstantSequence> = (1..=m_o)
        .map(|v| ConstantSequence::new(v, m_o))
        .collect::<Result<_>>()?;
    for (gi, g) in family.groups.iter().enumerate() {
        for (a, x) in g.members.iter().enumerate() {
            for o in &originals {
                pairs += 1;
                bad += usize::from(correlation_count(x, o)? != 1);
            }
            for y in &g.members[a + 1..] {
                pairs += 1;
                bad += usize::from(correlation_count(x, y)? != 0);
            }
            for h in &family.groups[gi + 1..] {
                for y in &h.members {
                    pairs += 1;
                    bad += usize::from(correlation_count(x, y)? != 1);
                }
            }
        }
    }
    Ok(Check {
        suite: "groups",
        name: format!("congruence m_o={m_o} alpha={alpha}"),
        passed: bad == 0,
        detail: format!("{bad} of {pairs} pairs off target"),
    })
}

fn groups_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let partition_range = match opts.m_o {
        Some(m) => vec![m],
        None if opts.small => (2..=4).collect(),
        None => (2..=6).collect(),
    };
    for m_o in partition_range {
        out.push(check_cyclic_partition(m_o)?);
    }
    let primes: Vec<usize> = match opts.m_o {
        Some(m) if is_prime(m) => vec![m],
        Some(_) => vec![],
        None if opts.small => vec![2, 3, 5],
        None => vec![2, 3, 5, 7, 11],
    };
    for m_o in primes {
        for alpha in 1..m_o {
            out.push(check_congruence(m_o, alpha)?);
        }
    }
    Ok(out)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// `Sigma_Y` assembled from correlation counts of the actual sequences.
pub fn sigma_y_from_sequences(model: &CovarianceModel) -> Result<DMatrix<f64>> {
    let seqs = model.extension.sequences(model.m_o)?;
    let w = sigma_w_from_sequences(model.sigma_x2, model.m_o, &seqs)?;
    Ok(&w + DMatrix::identity(w.nrows(), w.ncols()))
}

fn covariance_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for m_o in opts.m_o_range(2..=7, 3) {
        let mut worst_det = 0.0f64;
        let mut worst_struct = 0.0f64;
        let mut cases = 0;
        for ext in opts.extensions(m_o) {
            for s in opts.sigmas() {
                let model = CovarianceModel::new(s, m_o, ext)?;
                let from_seq = sigma_y_from_sequences(&model)?;
                let block = build_sigma_w(&model).data + DMatrix::identity(model.m(), model.m());
                worst_struct = worst_struct.max((&from_seq - &block).amax());
                worst_det = worst_det.max(rel_err(det_sigma_y(&model), lu_log_det(&from_seq).det()));
                cases += 1;
            }
        }
        out.push(Check {
            suite: "covariance",
            name: format!("block structure m_o={m_o}"),
            passed: worst_struct <= 1e-12,
            detail: format!("max entry diff {worst_struct:.3e} over {cases} cases"),
        });
        out.push(Check {
            suite: "covariance",
            name: format!("|Sigma_Y| closed form m_o={m_o}"),
            passed: worst_det <= DET_TOL,
            detail: format!("max rel err {worst_det:.3e} over {cases} cases"),
        });
    }

    let k_max = if opts.small { 3 } else { 6 };
    for m_o in opts.m_o_range(1..=5, 3) {
        let mut worst_det = 0.0f64;
        let mut worst_eig = 0.0f64;
        let mut eig_ok = true;
        let mut cases = 0;
        for k in 1..=k_max {
            for beta in BETA_GRID {
                let d = check_det_v(k, beta, m_o)?;
                worst_det = worst_det.max(d.rel_err());
                let e = check_eigen_v(k, beta, m_o)?;
                eig_ok &= e.passes(EIGEN_TOL);
                worst_eig = worst_eig
                    .max(e.max_value_err)
                    .max(e.ones_contract_err.unwrap_or(0.0))
                    .max(e.product_rel_err);
                cases += 1;
            }
        }
        out.push(Check {
            suite: "covariance",
            name: format!("det V(k) m_o={m_o}"),
            passed: worst_det <= DET_TOL,
            detail: format!("max rel err {worst_det:.3e} over {cases} cases"),
        });
        out.push(Check {
            suite: "covariance",
            name: format!("spectrum V(k) m_o={m_o}"),
            passed: eig_ok,
            detail: format!("max err {worst_eig:.3e} over {cases} cases"),
        });
    }
    Ok(out)
}

fn capacity_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for m_o in opts.m_o_range(2..=7, 3) {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for ext in opts.extensions(m_o) {
            for s in opts.sigmas() {
                let model = CovarianceModel::new(s, m_o, ext)?;
                let numeric = 0.5 * lu_log_det(&sigma_y_from_sequences(&model)?).log2_abs();
                let q = BoundQuery {
                    gamma: s,
                    m_o,
                    n: 1,
                    rd: 0.0,
                    extension: ext,
                };
                worst = worst.max(rel_err(capacity_ub(&q)?, numeric));
                cases += 1;
            }
        }
        out.push(Check {
            suite: "capacity",
            name: format!("capacity = 1/2 log2|Sigma_Y| m_o={m_o}"),
            passed: worst <= DET_TOL,
            detail: format!("max rel err {worst:.3e} over {cases} cases"),
        });
    }
    Ok(out)
}
