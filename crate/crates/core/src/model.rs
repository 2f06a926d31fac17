//! Extension-rate bookkeeping shared by the sampler, covariance and bounds.

use std::fmt;

use crate::error::{Error, Result};
use crate::permgroup::{congruence_groups, cyclic_shift_group, PermutationSequence};

/// How the extended part `Phi_e` is populated.
///
/// `SingleGroup` takes `m_e <= m_o` mutually uncorrelated rows from one
/// cyclic-shift group, so `alpha = m_e / m_o` lies on the grid
/// `{0, 1/m_o, ..., 1}` and is stored exactly as the row count.
/// `MultiGroup` takes every row of `groups` congruence groups, so
/// `alpha = groups` is an integer in `1..=m_o-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extension {
    SingleGroup { m_e: usize },
    MultiGroup { groups: usize },
}

impl Extension {
    pub const NONE: Extension = Extension::SingleGroup { m_e: 0 };

    pub fn alpha(&self, m_o: usize) -> f64 {
        match *self {
            Extension::SingleGroup { m_e } => m_e as f64 / m_o as f64,
            Extension::MultiGroup { groups } => groups as f64,
        }
    }

    pub fn extended_rows(&self, m_o: usize) -> usize {
        match *self {
            Extension::SingleGroup { m_e } => m_e,
            Extension::MultiGroup { groups } => groups * m_o,
        }
    }

    pub fn total_rows(&self, m_o: usize) -> usize {
        m_o + self.extended_rows(m_o)
    }

    pub fn case_name(&self) -> &'static str {
        match self {
            Extension::SingleGroup { .. } => "single_group",
            Extension::MultiGroup { .. } => "multi_group",
        }
    }

    pub fn validate(&self, m_o: usize) -> Result<()> {
        if m_o == 0 {
            return Err(Error::AlphaOutOfRange("m_o must be positive".into()));
        }
        match *self {
            Extension::SingleGroup { m_e } if m_e > m_o => Err(Error::AlphaOutOfRange(format!(
                "single-group extension (alpha <= 1) allows at most m_o = {m_o} extra rows, got {m_e}"
            ))),
            Extension::MultiGroup { groups } if groups < 1 || groups + 1 > m_o => Err(Error::AlphaOutOfRange(format!(
                "multi-group extension needs integer alpha in 1..={} for m_o = {m_o}, got {groups}",
                m_o.saturating_sub(1)
            ))),
            _ => Ok(()),
        }
    }

    /// Picks the case from a rational `alpha = num/den`: `alpha <= 1` maps
    /// to a single group (requires `alpha * m_o` integral), integer
    /// `alpha > 1` maps to that many congruence groups.
    pub fn from_ratio(alpha: Ratio, m_o: usize) -> Result<Self> {
        let Ratio { num, den } = alpha;
        let ext = if num <= den {
            let scaled = num * m_o as u64;
            if !scaled.is_multiple_of(den) {
                return Err(Error::AlphaOutOfRange(format!(
                    "alpha = {alpha} is not on the grid {{0, 1/{m_o}, ..., 1}}"
                )));
            }
            Extension::SingleGroup {
                m_e: (scaled / den) as usize,
            }
        } else {
            if num % den != 0 {
                return Err(Error::AlphaOutOfRange(format!(
                    "alpha = {alpha} > 1 must be an integer number of groups"
                )));
            }
            Extension::MultiGroup {
                groups: (num / den) as usize,
            }
        };
        ext.validate(m_o)?;
        Ok(ext)
    }

    /// Segment-source sequences for the extended rows.
    ///
    /// Single-group extensions take the first `m_e` cyclic shifts of the
    /// identity; multi-group extensions need a prime `m_o`.
    pub fn sequences(&self, m_o: usize) -> Result<Vec<PermutationSequence>> {
        self.validate(m_o)?;
        match *self {
            Extension::SingleGroup { m_e } => {
                let group = cyclic_shift_group(&PermutationSequence::identity(m_o), 1);
                Ok(group.members.into_iter().take(m_e).collect())
            }
            Extension::MultiGroup { groups } => Ok(congruence_groups(m_o, groups)?.sequences().cloned().collect()),
        }
    }
}

/// Non-negative rational, used to read extension rates such as `1/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    /// Accepts `p/q`, integers and finite decimals (`0.5`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("cannot read {s:?} as a non-negative rational"));
        let (num, den) = if let Some((p, q)) = s.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| bad())?;
            let q: u64 = q.trim().parse().map_err(|_| bad())?;
            (p, q)
        } else if let Some((int, frac)) = s.split_once('.') {
            if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let den = 10u64.pow(frac.len() as u32);
            let int: u64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let frac: u64 = if frac.is_empty() {
                0
            } else {
                frac.parse().map_err(|_| bad())?
            };
            (int * den + frac, den)
        } else {
            (s.parse().map_err(|_| bad())?, 1)
        };
        if den == 0 {
            return Err(bad());
        }
        let g = gcd(num, den);
        Ok(Ratio {
            num: num / g,
            den: den / g,
        })
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_parsing() {
        let r: Ratio = "2/6".parse().unwrap();
        assert_eq!(r, Ratio { num: 1, den: 3 });
        assert_eq!("0.5".parse::<Ratio>().unwrap(), Ratio { num: 1, den: 2 });
        assert_eq!("5".parse::<Ratio>().unwrap(), Ratio { num: 5, den: 1 });
        assert_eq!("0".parse::<Ratio>().unwrap(), Ratio { num: 0, den: 1 });
        assert!("1/0".parse::<Ratio>().is_err());
        assert!("-1".parse::<Ratio>().is_err());
    }

    #[test]
    fn case_selection() {
        let r = |s: &str| s.parse::<Ratio>().unwrap();
        assert_eq!(
            Extension::from_ratio(r("1/3"), 3).unwrap(),
            Extension::SingleGroup { m_e: 1 }
        );
        assert_eq!(
            Extension::from_ratio(r("1"), 3).unwrap(),
            Extension::SingleGroup { m_e: 3 }
        );
        assert_eq!(
            Extension::from_ratio(r("2"), 3).unwrap(),
            Extension::MultiGroup { groups: 2 }
        );
        assert!(Extension::from_ratio(r("1/2"), 3).is_err());
        assert!(Extension::from_ratio(r("3"), 3).is_err());
        assert!(Extension::from_ratio(r("3/2"), 7).is_err());
    }

    #[test]
    fn sequences_per_case() {
        let single = Extension::SingleGroup { m_e: 2 }.sequences(4).unwrap();
        assert_eq!(single.len(), 2);
        let multi = Extension::MultiGroup { groups: 2 }.sequences(5).unwrap();
        assert_eq!(multi.len(), 10);
        assert!(Extension::MultiGroup { groups: 2 }.sequences(4).is_err());
        assert!(Extension::NONE.sequences(4).unwrap().is_empty());
    }
}
