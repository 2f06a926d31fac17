//! Segment-source sequences and the groupings used to build extended rows.
//!
//! Every extended row of the sampling matrix is described by the BMI that
//! supplies each of its `m_o` segments. That description is a permutation of
//! `(1, ..., m_o)` (1-based, as it is written out). Two rows share a segment
//! exactly where their sequences agree, so all correlation structure of the
//! matrix reduces to position-wise comparisons of sequences.
//!
//! Two constructions are provided:
//!
//! * [`cyclic_grouping`] partitions all `m_o!` permutations into `(m_o-1)!`
//!   groups: each permutation starting with `1` seeds a group, and the group
//!   is closed under cyclic shifts. Members of one group never agree at any
//!   position.
//! * [`congruence_groups`] picks, for prime `m_o`, up to `m_o-1` of those
//!   groups via the linear rule `k -> j + (k-1) i (mod m_o)`, so that any two
//!   members of different groups agree at exactly one position.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest `m_o` for which [`cyclic_grouping`] enumerates all groups
/// (`7! = 5040` groups at the cap).
pub const ENUMERATION_CAP: usize = 8;

/// `((x - 1) mod m) + 1`: the residue representative in `1..=m`.
pub fn map_mod(x: i64, m: usize) -> usize {
    let m = m as i64;
    ((x - 1).rem_euclid(m) + 1) as usize
}

/// Deterministic trial division.
pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Anything that names a source BMI for each of `m_o` segments.
pub trait SegmentSources {
    fn m_o(&self) -> usize;
    /// Source BMI (1-based) of segment `k` (0-based).
    fn source(&self, k: usize) -> usize;
}

/// A permutation of `(1, ..., m_o)`; entry `k` is the BMI feeding segment `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PermutationSequence {
    elements: Vec<usize>,
}

impl PermutationSequence {
    pub fn new(elements: Vec<usize>) -> Result<Self> {
        let m_o = elements.len();
        if m_o == 0 {
            return Err(Error::InvalidSequence("empty sequence".into()));
        }
        let mut seen = vec![false; m_o];
        for &e in &elements {
            if e == 0 || e > m_o {
                return Err(Error::InvalidSequence(format!("entry {e} outside 1..={m_o}")));
            }
            if std::mem::replace(&mut seen[e - 1], true) {
                return Err(Error::InvalidSequence(format!("entry {e} repeated")));
            }
        }
        Ok(Self { elements })
    }

    pub fn identity(m_o: usize) -> Self {
        Self {
            elements: (1..=m_o).collect(),
        }
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Moves the final entry to the front.
    pub fn cyclic_shift(&self) -> Self {
        let mut elements = self.elements.clone();
        elements.rotate_right(1);
        Self { elements }
    }
}

impl SegmentSources for PermutationSequence {
    fn m_o(&self) -> usize {
        self.elements.len()
    }

    fn source(&self, k: usize) -> usize {
        self.elements[k]
    }
}

impl fmt::Display for PermutationSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for PermutationSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let elements = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(elements)
    }
}

/// An original row of `Phi_o`: every segment comes from the same BMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConstantSequence {
    value: usize,
    m_o: usize,
}

impl ConstantSequence {
    pub fn new(value: usize, m_o: usize) -> Result<Self> {
        if value == 0 || value > m_o {
            return Err(Error::InvalidSequence(format!(
                "constant value {value} outside 1..={m_o}"
            )));
        }
        Ok(Self { value, m_o })
    }

    pub fn value(&self) -> usize {
        self.value
    }
}

impl SegmentSources for ConstantSequence {
    fn m_o(&self) -> usize {
        self.m_o
    }

    fn source(&self, _k: usize) -> usize {
        self.value
    }
}

/// Number of positions at which `a` and `b` name the same BMI, i.e. the
/// number of segments two rows share.
pub fn correlation_count<A, B>(a: &A, b: &B) -> Result<usize>
where
    A: SegmentSources + ?Sized,
    B: SegmentSources + ?Sized,
{
    if a.m_o() != b.m_o() {
        return Err(Error::DimensionMismatch {
            expected: a.m_o(),
            got: b.m_o(),
        });
    }
    Ok((0..a.m_o()).filter(|&k| a.source(k) == b.source(k)).count())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceGroup {
    pub id: usize,
    pub generator: PermutationSequence,
    pub members: Vec<PermutationSequence>,
}

impl SequenceGroup {
    pub fn m_o(&self) -> usize {
        self.generator.len()
    }
}

/// The seed followed by its `m_o - 1` successive cyclic shifts.
pub fn cyclic_shift_group(seed: &PermutationSequence, id: usize) -> SequenceGroup {
    let mut members = Vec::with_capacity(seed.len());
    let mut current = seed.clone();
    for _ in 0..seed.len() {
        let next = current.cyclic_shift();
        members.push(current);
        current = next;
    }
    SequenceGroup {
        id,
        generator: seed.clone(),
        members,
    }
}

/// In-place lexicographic successor; `false` once the last permutation is reached.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Partitions all `m_o!` permutations into `(m_o-1)!` cyclic-shift classes.
///
/// Seeds are the permutations with first element `1` in lexicographic order;
/// group ids run from 1.
pub fn cyclic_grouping(m_o: usize) -> Result<Vec<SequenceGroup>> {
    if m_o == 0 {
        return Err(Error::InvalidSequence("m_o must be positive".into()));
    }
    if m_o > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            m_o,
            cap: ENUMERATION_CAP,
        });
    }
    let mut tail: Vec<usize> = (2..=m_o).collect();
    let mut groups = Vec::new();
    loop {
        let mut elements = Vec::with_capacity(m_o);
        elements.push(1);
        elements.extend_from_slice(&tail);
        let seed = PermutationSequence { elements };
        groups.push(cyclic_shift_group(&seed, groups.len() + 1));
        if !next_permutation(&mut tail) {
            break;
        }
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// Full cyclic-shift partition.
    Cyclic,
    /// Linear-congruence selection for prime `m_o`.
    Congruence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupFamily {
    pub groups: Vec<SequenceGroup>,
    pub m_o: usize,
    pub alpha: usize,
    pub construction: Construction,
}

impl GroupFamily {
    pub fn sequences(&self) -> impl Iterator<Item = &PermutationSequence> {
        self.groups.iter().flat_map(|g| g.members.iter())
    }

    /// One sequence per line, each group preceded by `# group <id>`.
    pub fn to_text(&self) -> String {
        groups_to_text(&self.groups)
    }
}

/// `alpha` groups whose members pairwise agree at exactly one position
/// across groups. Group `i` holds the sequences `k -> j + (k-1) i (mod m_o)`
/// for `j = 1..=m_o`; `j = 1` is the generator.
pub fn congruence_groups(m_o: usize, alpha: usize) -> Result<GroupFamily> {
    if !is_prime(m_o) {
        return Err(Error::NotPrime(m_o));
    }
    if alpha < 1 || alpha > m_o - 1 {
        return Err(Error::AlphaOutOfRange(format!(
            "alpha = {alpha} must lie in 1..={} for m_o = {m_o}",
            m_o - 1
        )));
    }
    let groups = (1..=alpha)
        .map(|i| {
            let row = |j: usize| PermutationSequence {
                elements: (1..=m_o)
                    .map(|k| map_mod(j as i64 + (k as i64 - 1) * i as i64, m_o))
                    .collect(),
            };
            SequenceGroup {
                id: i,
                generator: row(1),
                members: (1..=m_o).map(row).collect(),
            }
        })
        .collect();
    Ok(GroupFamily {
        groups,
        m_o,
        alpha,
        construction: Construction::Congruence,
    })
}

pub fn groups_to_text(groups: &[SequenceGroup]) -> String {
    let mut out = String::new();
    for g in groups {
        out.push_str(&format!("# group {}\n", g.id));
        for s in &g.members {
            out.push_str(&s.to_string());
            out.push('\n');
        }
    }
    out
}

/// Inverse of [`groups_to_text`]. The first member of each group is taken
/// as its generator.
pub fn groups_from_text(text: &str) -> Result<Vec<SequenceGroup>> {
    let mut groups: Vec<SequenceGroup> = Vec::new();
    let mut pending: Option<(usize, Vec<PermutationSequence>)> = None;
    let mut flush = |pending: Option<(usize, Vec<PermutationSequence>)>| -> Result<()> {
        if let Some((id, members)) = pending {
            let generator = members
                .first()
                .cloned()
                .ok_or_else(|| Error::Parse(format!("group {id} has no members")))?;
            groups.push(SequenceGroup { id, generator, members });
        }
        Ok(())
    };
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix("# group") {
            flush(pending.take())?;
            let id = rest
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("group header {line:?}: {e}")))?;
            pending = Some((id, Vec::new()));
        } else if line.starts_with('#') {
            continue;
        } else {
            let seq: PermutationSequence = line.parse()?;
            match pending.as_mut() {
                Some((_, members)) => members.push(seq),
                None => return Err(Error::Parse(format!("sequence {line:?} before any group header"))),
            }
        }
    }
    flush(pending)?;
    Ok(groups)
}

/// Checks that a list of extension sequences is usable: common `m_o`, no repeats.
pub fn check_distinct(sequences: &[PermutationSequence], m_o: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(sequences.len());
    for s in sequences {
        if s.len() != m_o {
            return Err(Error::DimensionMismatch {
                expected: m_o,
                got: s.len(),
            });
        }
        if !seen.insert(s) {
            return Err(Error::DuplicateSequence(s.to_string()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[usize]) -> PermutationSequence {
        PermutationSequence::new(v.to_vec()).unwrap()
    }

    /// Independent enumeration: every vector in {1..m}^m with no repeats.
    fn brute_force_permutations(m: usize) -> HashSet<Vec<usize>> {
        let mut out = HashSet::new();
        let total = m.pow(m as u32);
        for mut code in 0..total {
            let mut v = Vec::with_capacity(m);
            for _ in 0..m {
                v.push(code % m + 1);
                code /= m;
            }
            let distinct: HashSet<_> = v.iter().collect();
            if distinct.len() == m {
                out.insert(v);
            }
        }
        out
    }

    fn positionwise_matches(a: &[usize], b: &[usize]) -> usize {
        a.iter().zip(b).filter(|(x, y)| x == y).count()
    }

    #[test]
    fn rejects_invalid_sequences() {
        assert!(PermutationSequence::new(vec![1, 1, 2]).is_err());
        assert!(PermutationSequence::new(vec![0, 1]).is_err());
        assert!(PermutationSequence::new(vec![1, 3]).is_err());
        assert!(PermutationSequence::new(vec![]).is_err());
        assert!(ConstantSequence::new(4, 3).is_err());
    }

    #[test]
    fn cyclic_shift_group_of_identity() {
        let g = cyclic_shift_group(&seq(&[1, 2, 3]), 1);
        assert_eq!(g.members, vec![seq(&[1, 2, 3]), seq(&[3, 1, 2]), seq(&[2, 3, 1])]);
    }

    #[test]
    fn cyclic_shift_group_of_132() {
        let g = cyclic_shift_group(&seq(&[1, 3, 2]), 2);
        let expected: HashSet<_> = [seq(&[1, 3, 2]), seq(&[2, 1, 3]), seq(&[3, 2, 1])].into();
        assert_eq!(g.members.iter().cloned().collect::<HashSet<_>>(), expected);
        for a in &g.members {
            for b in &g.members {
                if a != b {
                    assert_eq!(positionwise_matches(a.elements(), b.elements()), 0);
                }
            }
        }
    }

    #[test]
    fn single_element_group() {
        let g = cyclic_shift_group(&seq(&[1]), 1);
        assert_eq!(g.members, vec![seq(&[1])]);
    }

    #[test]
    fn cyclic_shift_groups_uncorrelated_for_every_seed() {
        for m in 1..=7 {
            for group in cyclic_grouping(m).unwrap() {
                // every seed is some permutation; shifting any member yields the same class
                for (i, a) in group.members.iter().enumerate() {
                    for b in &group.members[i + 1..] {
                        assert_eq!(correlation_count(a, b).unwrap(), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn cyclic_grouping_small_cases() {
        let g2 = cyclic_grouping(2).unwrap();
        assert_eq!(g2.len(), 1);
        assert_eq!(g2[0].members, vec![seq(&[1, 2]), seq(&[2, 1])]);

        for (m, groups) in [(3usize, 2usize), (5, 24)] {
            let gs = cyclic_grouping(m).unwrap();
            assert_eq!(gs.len(), groups);
            let all: Vec<Vec<usize>> = gs
                .iter()
                .flat_map(|g| g.members.iter().map(|s| s.elements().to_vec()))
                .collect();
            let set: HashSet<_> = all.iter().cloned().collect();
            assert_eq!(all.len(), set.len(), "duplicates for m_o={m}");
            assert_eq!(set, brute_force_permutations(m));
            for g in &gs {
                assert_eq!(g.generator.elements()[0], 1);
                assert_eq!(g.members.len(), m);
            }
        }
    }

    #[test]
    fn cyclic_grouping_cap() {
        assert!(cyclic_grouping(8).is_ok());
        assert_eq!(
            cyclic_grouping(9).unwrap_err(),
            Error::EnumerationCap { m_o: 9, cap: 8 }
        );
    }

    #[test]
    fn congruence_groups_m3() {
        let fam = congruence_groups(3, 2).unwrap();
        assert_eq!(fam.groups[0].generator, seq(&[1, 2, 3]));
        assert_eq!(fam.groups[1].generator, seq(&[1, 3, 2]));
        let mut pairs = 0;
        for a in &fam.groups[0].members {
            for b in &fam.groups[1].members {
                assert_eq!(positionwise_matches(a.elements(), b.elements()), 1);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 9);
    }

    #[test]
    fn congruence_groups_m5_all_cross_pairs() {
        let fam = congruence_groups(5, 4).unwrap();
        let mut pairs = 0;
        for (gi, ga) in fam.groups.iter().enumerate() {
            for gb in &fam.groups[gi + 1..] {
                for a in &ga.members {
                    for b in &gb.members {
                        assert_eq!(positionwise_matches(a.elements(), b.elements()), 1);
                        pairs += 1;
                    }
                }
            }
        }
        assert_eq!(pairs, 150);
    }

    #[test]
    fn congruence_groups_are_cyclic_classes() {
        let fam = congruence_groups(7, 6).unwrap();
        for g in &fam.groups {
            let shifted: HashSet<_> = cyclic_shift_group(&g.generator, g.id).members.into_iter().collect();
            let members: HashSet<_> = g.members.iter().cloned().collect();
            assert_eq!(shifted, members);
        }
    }

    #[test]
    fn congruence_groups_errors() {
        assert_eq!(congruence_groups(4, 2).unwrap_err(), Error::NotPrime(4));
        assert!(matches!(congruence_groups(5, 0), Err(Error::AlphaOutOfRange(_))));
        assert!(matches!(congruence_groups(5, 5), Err(Error::AlphaOutOfRange(_))));
    }

    #[test]
    fn correlation_count_examples() {
        assert_eq!(correlation_count(&seq(&[1, 2, 3]), &seq(&[2, 3, 1])).unwrap(), 0);
        assert_eq!(correlation_count(&seq(&[1, 2, 3]), &seq(&[1, 2, 3])).unwrap(), 3);
        let c = ConstantSequence::new(2, 3).unwrap();
        assert_eq!(correlation_count(&c, &seq(&[2, 3, 1])).unwrap(), 1);
        assert!(matches!(
            correlation_count(&seq(&[1, 2]), &seq(&[1, 2, 3])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn text_format_roundtrip() {
        let fam = congruence_groups(5, 2).unwrap();
        let text = fam.to_text();
        assert!(text.starts_with("# group 1\n1,2,3,4,5\n"));
        assert_eq!(groups_from_text(&text).unwrap(), fam.groups);
        assert_eq!("2,3,1".parse::<PermutationSequence>().unwrap(), seq(&[2, 3, 1]));
    }

    #[test]
    fn primality() {
        let primes: Vec<usize> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn map_mod_zero_residue() {
        assert_eq!(map_mod(3, 3), 3);
        assert_eq!(map_mod(4, 3), 1);
        assert_eq!(map_mod(0, 3), 3);
    }
}
