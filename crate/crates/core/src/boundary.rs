//! The n-adic boundary: points, clones and clopen sets with exact measure.
//!
//! A point of the boundary is an eventually-zero assignment of digits
//! (each `< n`) to integer height indices. A *clone* is the shadow of a
//! tree vertex: the set of points whose digits at indices `>= h` match a
//! fixed prefix. Clones are the clopen building blocks; their diameter and
//! measure both equal `n^h` exactly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;

use crate::ratio::pow_n;
use crate::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BoundaryError {
    #[error("digit {digit} at index {index} is not below the branching parameter {n}")]
    DigitOutOfRange { digit: u32, index: i64, n: u32 },
    #[error("mixed branching parameters {0} and {1}")]
    MixedParameters(u32, u32),
    #[error("clone prefix carries a digit below its height")]
    PrefixBelowHeight,
    #[error("members of a clone set must be pairwise disjoint")]
    Overlap,
    #[error("member clone escapes the ambient clone")]
    Containment,
    #[error("malformed literal: {0}")]
    Literal(String),
}

/// How two clones sit relative to each other. Any two clones are either
/// disjoint or nested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloneRelation {
    Disjoint,
    Equal,
    /// `self` strictly contains the other clone.
    Contains,
    /// `self` lies strictly inside the other clone.
    Inside,
}

/// A boundary point: an eventually-zero digit map. Only nonzero digits are
/// stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundaryPoint {
    n: u32,
    digits: BTreeMap<i64, u32>,
}

impl BoundaryPoint {
    pub fn zero(n: u32) -> Self {
        assert!(n >= 2, "branching parameter must be at least 2");
        BoundaryPoint { n, digits: BTreeMap::new() }
    }

    pub fn from_digits(
        n: u32,
        digits: impl IntoIterator<Item = (i64, u32)>,
    ) -> Result<Self, BoundaryError> {
        let mut p = BoundaryPoint::zero(n);
        for (index, digit) in digits {
            p.set_digit(index, digit)?;
        }
        Ok(p)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn digit(&self, index: i64) -> u32 {
        self.digits.get(&index).copied().unwrap_or(0)
    }

    pub fn set_digit(&mut self, index: i64, digit: u32) -> Result<(), BoundaryError> {
        if digit >= self.n {
            return Err(BoundaryError::DigitOutOfRange { digit, index, n: self.n });
        }
        if digit == 0 {
            self.digits.remove(&index);
        } else {
            self.digits.insert(index, digit);
        }
        Ok(())
    }

    /// Indices carrying a nonzero digit, ascending.
    pub fn support(&self) -> impl Iterator<Item = (i64, u32)> + '_ {
        self.digits.iter().map(|(&i, &d)| (i, d))
    }
}

/// `d(x, y) = n^I` where `I = 1 + max{ i : digit_i(x) != digit_i(y) }`,
/// and `0` for equal points.
pub fn qn_distance(x: &BoundaryPoint, y: &BoundaryPoint) -> Result<Rational, BoundaryError> {
    if x.n != y.n {
        return Err(BoundaryError::MixedParameters(x.n, y.n));
    }
    let top_diff = x
        .digits
        .iter()
        .filter(|(i, d)| y.digit(**i) != **d)
        .map(|(&i, _)| i)
        .chain(
            y.digits
                .iter()
                .filter(|(i, d)| x.digit(**i) != **d)
                .map(|(&i, _)| i),
        )
        .max();
    Ok(match top_diff {
        None => Rational::zero(),
        Some(i) => pow_n(x.n, i + 1),
    })
}

/// A clone: the shadow of the tree vertex at height `height` whose upward
/// digit path is `prefix` (digits at indices `>= height`, eventually zero).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CloneBall {
    n: u32,
    height: i64,
    prefix: BTreeMap<i64, u32>,
}

impl CloneBall {
    /// The clone of all points with zero digits at indices `>= height`.
    pub fn zero(n: u32, height: i64) -> Self {
        assert!(n >= 2);
        CloneBall { n, height, prefix: BTreeMap::new() }
    }

    pub fn new(
        n: u32,
        height: i64,
        prefix: impl IntoIterator<Item = (i64, u32)>,
    ) -> Result<Self, BoundaryError> {
        let mut c = CloneBall::zero(n, height);
        for (index, digit) in prefix {
            if index < height {
                return Err(BoundaryError::PrefixBelowHeight);
            }
            if digit >= n {
                return Err(BoundaryError::DigitOutOfRange { digit, index, n });
            }
            if digit == 0 {
                c.prefix.remove(&index);
            } else {
                c.prefix.insert(index, digit);
            }
        }
        Ok(c)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn height(&self) -> i64 {
        self.height
    }

    pub fn prefix_digit(&self, index: i64) -> u32 {
        debug_assert!(index >= self.height);
        self.prefix.get(&index).copied().unwrap_or(0)
    }

    /// Nonzero prefix digits, ascending by index.
    pub fn prefix_support(&self) -> impl Iterator<Item = (i64, u32)> + '_ {
        self.prefix.iter().map(|(&i, &d)| (i, d))
    }

    /// Shadow of the tree vertex at height `h` on the vertical geodesic of
    /// `x`: the clone of all points agreeing with `x` at indices `>= h`.
    pub fn shadow(x: &BoundaryPoint, h: i64) -> Self {
        let prefix = x.digits.range(h..).map(|(&i, &d)| (i, d)).collect();
        CloneBall { n: x.n, height: h, prefix }
    }

    /// Measure (= diameter) `n^height`.
    pub fn measure(&self) -> Rational {
        pow_n(self.n, self.height)
    }

    pub fn contains_point(&self, x: &BoundaryPoint) -> bool {
        self.n == x.n
            && self.prefix.iter().all(|(&i, &d)| x.digit(i) == d)
            && x.digits.range(self.height..).all(|(&i, &d)| self.prefix_digit(i) == d)
    }

    /// The point of the clone with zero digits below `height`.
    pub fn zero_tail_point(&self) -> BoundaryPoint {
        BoundaryPoint { n: self.n, digits: self.prefix.clone() }
    }

    pub fn relation(&self, other: &CloneBall) -> CloneRelation {
        debug_assert_eq!(self.n, other.n);
        let (small, big, flip) = if self.height <= other.height {
            (self, other, false)
        } else {
            (other, self, true)
        };
        // small is nested in big iff their prefixes agree at indices >= big.height
        let nested = big
            .prefix
            .iter()
            .all(|(&i, &d)| small.prefix_digit(i) == d)
            && small
                .prefix
                .range(big.height..)
                .all(|(&i, &d)| big.prefix_digit(i) == d);
        if !nested {
            CloneRelation::Disjoint
        } else if self.height == other.height {
            CloneRelation::Equal
        } else if flip {
            CloneRelation::Contains
        } else {
            CloneRelation::Inside
        }
    }

    /// Distance between the two clones as sets: `0` when they intersect,
    /// otherwise the (constant) distance between any pair of their points.
    pub fn set_distance(&self, other: &CloneBall) -> Rational {
        if self.relation(other) != CloneRelation::Disjoint {
            return Rational::zero();
        }
        let floor = self.height.max(other.height);
        let top_diff = self
            .prefix
            .range(floor..)
            .filter(|(i, d)| other.prefix_digit(**i) != **d)
            .map(|(&i, _)| i)
            .chain(
                other
                    .prefix
                    .range(floor..)
                    .filter(|(i, d)| self.prefix_digit(**i) != **d)
                    .map(|(&i, _)| i),
            )
            .max()
            .expect("disjoint clones differ somewhere above their heights");
        pow_n(self.n, top_diff + 1)
    }

    /// The parent clone, one height up.
    pub fn parent(&self) -> CloneBall {
        let mut prefix = self.prefix.clone();
        prefix.remove(&self.height);
        CloneBall { n: self.n, height: self.height + 1, prefix }
    }

    /// The child clone extending the prefix with `digit` at `height - 1`.
    pub fn child(&self, digit: u32) -> CloneBall {
        debug_assert!(digit < self.n);
        let mut prefix = self.prefix.clone();
        if digit != 0 {
            prefix.insert(self.height - 1, digit);
        }
        CloneBall { n: self.n, height: self.height - 1, prefix }
    }

    /// The `n^depth` pairwise-disjoint subclones of height `height - depth`
    /// tiling this clone, in lexicographic digit order (most significant
    /// digit first).
    pub fn refine(&self, depth: u32) -> Vec<CloneBall> {
        let mut cells = alloc::vec![self.clone()];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(cells.len() * self.n as usize);
            for cell in &cells {
                for d in 0..self.n {
                    next.push(cell.child(d));
                }
            }
            cells = next;
        }
        cells
    }
}

impl fmt::Display for CloneBall {
    /// Clone literal format: `n@h:d_h d_{h+1} ...` with digits listed from
    /// the height upward and the zero tail omitted, e.g. `3@-2:21`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}:", self.n, self.height)?;
        let top = self.prefix.keys().next_back().copied();
        if let Some(top) = top {
            for i in self.height..=top {
                let d = self.prefix_digit(i);
                let c = char::from_digit(d, 36).ok_or(fmt::Error)?;
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// Parse a clone literal, the inverse of the `Display` impl.
pub fn parse_clone(text: &str) -> Result<CloneBall, BoundaryError> {
    let bad = || BoundaryError::Literal(String::from(text));
    let (n_part, rest) = text.split_once('@').ok_or_else(bad)?;
    let (h_part, digits) = rest.split_once(':').ok_or_else(bad)?;
    let n: u32 = n_part.trim().parse().map_err(|_| bad())?;
    if !(2..=36).contains(&n) {
        return Err(bad());
    }
    let height: i64 = h_part.trim().parse().map_err(|_| bad())?;
    let mut prefix = Vec::new();
    for (offset, c) in digits.trim().chars().enumerate() {
        let d = c.to_digit(36).ok_or_else(bad)?;
        prefix.push((height + offset as i64, d));
    }
    CloneBall::new(n, height, prefix)
}

/// A finite union of pairwise-disjoint clones in canonical form: whenever
/// all `n` siblings of a height are present they are merged into their
/// parent, so equal sets have equal representations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CloneSet {
    n: u32,
    members: Vec<CloneBall>,
}

impl CloneSet {
    pub fn empty(n: u32) -> Self {
        CloneSet { n, members: Vec::new() }
    }

    pub fn new(members: impl IntoIterator<Item = CloneBall>) -> Result<Self, BoundaryError> {
        let members: Vec<CloneBall> = members.into_iter().collect();
        let n = members.first().map(|c| c.n).unwrap_or(2);
        for c in &members {
            if c.n != n {
                return Err(BoundaryError::MixedParameters(n, c.n));
            }
        }
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                if a.relation(b) != CloneRelation::Disjoint {
                    return Err(BoundaryError::Overlap);
                }
            }
        }
        Ok(CloneSet { n, members: canonicalize(members, n) })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn members(&self) -> &[CloneBall] {
        &self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Total measure, additive over the disjoint members.
    pub fn measure(&self) -> Rational {
        self.members.iter().map(|c| c.measure()).sum()
    }

    pub fn contains_point(&self, x: &BoundaryPoint) -> bool {
        self.members.iter().any(|c| c.contains_point(x))
    }

    /// The member containing `x`, if any. Members are disjoint so it is
    /// unique.
    pub fn member_containing(&self, x: &BoundaryPoint) -> Option<&CloneBall> {
        self.members.iter().find(|c| c.contains_point(x))
    }

    pub fn contains_clone(&self, c: &CloneBall) -> bool {
        self.members.iter().any(|m| {
            matches!(m.relation(c), CloneRelation::Contains | CloneRelation::Equal)
        })
    }
}

impl fmt::Display for CloneSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// Parse a clone-set literal `{lit,lit,...}`.
pub fn parse_clone_set(text: &str) -> Result<CloneSet, BoundaryError> {
    let bad = || BoundaryError::Literal(String::from(text));
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(bad)?;
    let mut members = Vec::new();
    for part in inner.split(',') {
        if part.trim().is_empty() {
            continue;
        }
        members.push(parse_clone(part)?);
    }
    CloneSet::new(members)
}

fn canonicalize(mut members: Vec<CloneBall>, n: u32) -> Vec<CloneBall> {
    loop {
        // group members by their parent; disjoint siblings carry distinct
        // digits, so n members under one parent form a complete family
        let mut groups: BTreeMap<CloneBall, Vec<usize>> = BTreeMap::new();
        for (idx, c) in members.iter().enumerate() {
            groups.entry(c.parent()).or_default().push(idx);
        }
        let complete: Vec<(CloneBall, Vec<usize>)> = groups
            .into_iter()
            .filter(|(_, idxs)| idxs.len() == n as usize)
            .collect();
        if complete.is_empty() {
            members.sort();
            return members;
        }
        let mut drop: Vec<usize> = Vec::new();
        let mut add: Vec<CloneBall> = Vec::new();
        for (parent, idxs) in complete {
            drop.extend(idxs);
            add.push(parent);
        }
        drop.sort_unstable();
        for idx in drop.into_iter().rev() {
            members.swap_remove(idx);
        }
        members.extend(add);
    }
}

/// Exact separation of a canonical clone set inside an ambient clone:
/// the infimum distance from the union to its complement in the ambient.
/// Returns `None` when the complement is empty, together with the
/// is-clone-union verdict (always true for a canonical set; reported for
/// API symmetry with sampled sets).
pub fn separation(
    b: &CloneSet,
    ambient: &CloneBall,
) -> Result<(Option<Rational>, bool), BoundaryError> {
    for m in b.members() {
        if !matches!(
            ambient.relation(m),
            CloneRelation::Contains | CloneRelation::Equal
        ) {
            return Err(BoundaryError::Containment);
        }
    }
    if b.members() == core::slice::from_ref(ambient) {
        // the union is the whole ambient clone; the complement is empty
        return Ok((None, true));
    }
    if b.is_empty() {
        return Ok((None, true));
    }
    // For a canonical set the infimum is attained between the smallest
    // member and a missing sibling: sep(B) = n * min measure.
    let min_measure = b
        .members()
        .iter()
        .map(|c| c.measure())
        .min()
        .expect("nonempty");
    Ok((Some(min_measure * Rational::from_integer(b.n().into())), true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn pt(n: u32, digits: &[(i64, u32)]) -> BoundaryPoint {
        BoundaryPoint::from_digits(n, digits.iter().copied()).unwrap()
    }

    #[test]
    fn distance_of_identical_points_is_zero() {
        let x = pt(3, &[(2, 1), (-1, 2)]);
        assert_eq!(qn_distance(&x, &x).unwrap(), Rational::zero());
    }

    #[test]
    fn distance_examples() {
        // differ only at index 0 -> d = 2^1
        let x = BoundaryPoint::zero(2);
        let y = pt(2, &[(0, 1)]);
        assert_eq!(qn_distance(&x, &y).unwrap(), pow_n(2, 1));
        // differ only at index -2 -> d = 3^-1
        let x = BoundaryPoint::zero(3);
        let y = pt(3, &[(-2, 2)]);
        assert_eq!(qn_distance(&x, &y).unwrap(), pow_n(3, -1));
    }

    #[test]
    fn distance_rejects_mixed_parameters() {
        let x = BoundaryPoint::zero(2);
        let y = BoundaryPoint::zero(3);
        assert_eq!(
            qn_distance(&x, &y),
            Err(BoundaryError::MixedParameters(2, 3))
        );
    }

    #[test]
    fn shadow_measures() {
        assert_eq!(CloneBall::zero(3, 0).measure(), pow_n(3, 0));
        let c = CloneBall::new(3, -2, [(-2, 2), (-1, 1)]).unwrap();
        assert_eq!(c.measure(), pow_n(3, -2));
        assert_eq!(CloneBall::zero(2, 1).measure(), pow_n(2, 1));
    }

    #[test]
    fn refine_counts_and_conservation() {
        let unit = CloneBall::zero(3, 0);
        assert_eq!(unit.refine(0), alloc::vec![unit.clone()]);
        let cells = unit.refine(2);
        assert_eq!(cells.len(), 9);
        for c in &cells {
            assert_eq!(c.measure(), pow_n(3, -2));
        }
        let half = CloneBall::zero(2, -1);
        let cells = half.refine(3);
        assert_eq!(cells.len(), 8);
        let total: Rational = cells.iter().map(|c| c.measure()).sum();
        assert_eq!(total, half.measure());
    }

    #[test]
    fn clone_dichotomy() {
        let unit = CloneBall::zero(2, 0);
        let kid = unit.child(1);
        assert_eq!(unit.relation(&kid), CloneRelation::Contains);
        assert_eq!(kid.relation(&unit), CloneRelation::Inside);
        assert_eq!(kid.relation(&unit.child(0)), CloneRelation::Disjoint);
        assert_eq!(unit.relation(&unit.clone()), CloneRelation::Equal);
    }

    #[test]
    fn measure_set_additivity() {
        assert_eq!(CloneSet::empty(2).measure(), Rational::zero());
        let unit = CloneBall::zero(2, 0);
        let halves = CloneSet::new(unit.refine(1)).unwrap();
        assert_eq!(halves.measure(), pow_n(2, 0));
        // three of the nine depth-2 subclones of the unit clone in Q_3
        let unit3 = CloneBall::zero(3, 0);
        let some: Vec<CloneBall> = unit3.refine(2).into_iter().take(3).collect();
        let s = CloneSet::new(some).unwrap();
        assert_eq!(s.measure(), pow_n(3, -1));
    }

    #[test]
    fn canonical_form_merges_full_families() {
        let unit = CloneBall::zero(2, 0);
        let halves = CloneSet::new(unit.refine(1)).unwrap();
        // the two children collapse to the parent
        assert_eq!(halves.members(), &[unit]);
    }

    #[test]
    fn clone_set_rejects_overlap() {
        let unit = CloneBall::zero(2, 0);
        let kid = unit.child(0);
        assert_eq!(
            CloneSet::new([unit, kid]).unwrap_err(),
            BoundaryError::Overlap
        );
    }

    #[test]
    fn separation_whole_ambient_is_infinite() {
        let unit = CloneBall::zero(3, 0);
        let b = CloneSet::new([unit.clone()]).unwrap();
        assert_eq!(separation(&b, &unit).unwrap(), (None, true));
    }

    #[test]
    fn separation_single_depth2_subclone() {
        let unit = CloneBall::zero(3, 0);
        let b = CloneSet::new([unit.refine(2)[4].clone()]).unwrap();
        let (sep, is_union) = separation(&b, &unit).unwrap();
        assert_eq!(sep, Some(pow_n(3, -1)));
        assert!(is_union);
    }

    #[test]
    fn separation_demands_containment() {
        let unit = CloneBall::zero(3, 0);
        let other = CloneBall::new(3, 0, [(0, 1)]).unwrap();
        let b = CloneSet::new([other]).unwrap();
        assert_eq!(
            separation(&b, &unit).unwrap_err(),
            BoundaryError::Containment
        );
    }

    #[test]
    fn literal_round_trip() {
        let c = parse_clone("3@-2:21").unwrap();
        assert_eq!(c.height(), -2);
        assert_eq!(c.prefix_digit(-2), 2);
        assert_eq!(c.prefix_digit(-1), 1);
        assert_eq!(c.to_string(), "3@-2:21");
        let s = parse_clone_set("{2@-1:1,2@-2:00}").unwrap();
        assert_eq!(s.to_string(), "{2@-2:,2@-1:1}");
        assert!(parse_clone("3@-2:7").is_err());
        assert!(parse_clone("nope").is_err());
    }
}
