//! Between-sets `B(x, y)` and their unions `B(x; Y)`.
//!
//! Categorical domains use `{x, y}`, hypercubes the smallest box containing
//! both points, and the line the closed interval between them.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::population::{Alternative, DomainSpec};
use crate::rational::Q;

/// Axis-aligned box in `{0,1}^d`: coordinates in `free` range over `{0,1}`,
/// the rest are fixed to the corresponding bit of `base`. Bits of `base`
/// inside `free` are kept at zero so equal boxes compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub base: u64,
    pub free: u64,
}

impl Cube {
    pub fn contains(&self, p: u64) -> bool {
        (p & !self.free) == (self.base & !self.free)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        (other.free & !self.free) == 0 && self.contains(other.base)
    }

    /// Enumerates every point of the box in increasing mask order.
    pub fn points(&self) -> Vec<u64> {
        let fixed = self.base & !self.free;
        let mut out = Vec::new();
        let mut sub = self.free;
        loop {
            out.push(fixed | sub);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & self.free;
        }
        out.sort_unstable();
        out
    }
}

/// `B(x, y)` or a union of such sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BetweenRegion {
    Set(BTreeSet<usize>),
    Boxes(Vec<Cube>),
    /// Closed interval; `None` marks an unbounded side.
    Interval { lo: Option<Q>, hi: Option<Q> },
}

fn kind_error(domain: &DomainSpec, a: &Alternative) -> Error {
    Error::MixedBallotKind(format!("{a:?} is not an alternative of the {} domain", domain.kind()))
}

/// `B(x, y)`.
pub fn between(domain: &DomainSpec, x: &Alternative, y: &Alternative) -> Result<BetweenRegion> {
    domain.check_alternative(x)?;
    domain.check_alternative(y)?;
    Ok(match (x, y) {
        (Alternative::Choice(a), Alternative::Choice(b)) => BetweenRegion::Set([*a, *b].into_iter().collect()),
        (Alternative::Point(a), Alternative::Point(b)) => BetweenRegion::Boxes(vec![Cube { base: a & b, free: a ^ b }]),
        (Alternative::Position(a), Alternative::Position(b)) => {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            BetweenRegion::Interval { lo: Some(lo.clone()), hi: Some(hi.clone()) }
        }
        _ => return Err(kind_error(domain, y)),
    })
}

/// `B(x; Y)`, the union of `B(x, y)` over `y` in `ys`. On the line this is
/// the hull of `x` and `ys`.
pub fn between_union(domain: &DomainSpec, x: &Alternative, ys: &[Alternative]) -> Result<BetweenRegion> {
    if ys.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let mut acc = between(domain, x, &ys[0])?;
    for y in &ys[1..] {
        acc = union(acc, between(domain, x, y)?);
    }
    Ok(acc)
}

fn union(a: BetweenRegion, b: BetweenRegion) -> BetweenRegion {
    match (a, b) {
        (BetweenRegion::Set(mut s), BetweenRegion::Set(t)) => {
            s.extend(t);
            BetweenRegion::Set(s)
        }
        (BetweenRegion::Boxes(mut s), BetweenRegion::Boxes(t)) => {
            for c in t {
                if !s.iter().any(|e| e.contains_cube(&c)) {
                    s.retain(|e| !c.contains_cube(e));
                    s.push(c);
                }
            }
            s.sort();
            BetweenRegion::Boxes(s)
        }
        (BetweenRegion::Interval { lo: l1, hi: h1 }, BetweenRegion::Interval { lo: l2, hi: h2 }) => {
            let lo = match (l1, l2) {
                (Some(a), Some(b)) => Some(if a <= b { a } else { b }),
                _ => None,
            };
            let hi = match (h1, h2) {
                (Some(a), Some(b)) => Some(if a >= b { a } else { b }),
                _ => None,
            };
            BetweenRegion::Interval { lo, hi }
        }
        (a, _) => a,
    }
}

impl BetweenRegion {
    /// An interval region reaching from `x` to infinity on one or both sides.
    pub fn interval(lo: Option<Q>, hi: Option<Q>) -> Self {
        BetweenRegion::Interval { lo, hi }
    }

    /// Exact membership test.
    pub fn contains(&self, a: &Alternative) -> bool {
        match (self, a) {
            (BetweenRegion::Set(s), Alternative::Choice(i)) => s.contains(i),
            (BetweenRegion::Boxes(bs), Alternative::Point(p)) => bs.iter().any(|c| c.contains(*p)),
            (BetweenRegion::Interval { lo, hi }, Alternative::Position(x)) => {
                lo.as_ref().is_none_or(|l| l <= x) && hi.as_ref().is_none_or(|h| x <= h)
            }
            _ => false,
        }
    }

    /// Region-level inclusion, used for monotonicity checks.
    pub fn is_subset_of(&self, other: &BetweenRegion) -> bool {
        match (self, other) {
            (BetweenRegion::Set(a), BetweenRegion::Set(b)) => a.is_subset(b),
            (BetweenRegion::Boxes(a), BetweenRegion::Boxes(_)) => {
                a.iter().all(|c| c.points().iter().all(|p| other.contains(&Alternative::Point(*p))))
            }
            (BetweenRegion::Interval { lo: l1, hi: h1 }, BetweenRegion::Interval { lo: l2, hi: h2 }) => {
                let lo_ok = match (l1, l2) {
                    (_, None) => true,
                    (None, Some(_)) => false,
                    (Some(a), Some(b)) => b <= a,
                };
                let hi_ok = match (h1, h2) {
                    (_, None) => true,
                    (None, Some(_)) => false,
                    (Some(a), Some(b)) => a <= b,
                };
                lo_ok && hi_ok
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn pt(s: &str, d: &DomainSpec) -> Alternative {
        d.parse_alternative(s).unwrap()
    }

    #[test]
    fn categorical_pair() {
        let d = DomainSpec::categorical(&["a", "b", "c"], "a").unwrap();
        let r = between(&d, &Alternative::Choice(0), &Alternative::Choice(1)).unwrap();
        assert_eq!(r, BetweenRegion::Set([0, 1].into_iter().collect()));
        assert!(!r.contains(&Alternative::Choice(2)));
    }

    #[test]
    fn hypercube_box_enumerates_four_points() {
        let d = DomainSpec::hypercube(3, &[0, 0, 0]).unwrap();
        let r = between(&d, &pt("010", &d), &pt("111", &d)).unwrap();
        let BetweenRegion::Boxes(bs) = &r else { panic!() };
        let mut got: Vec<String> = bs[0].points().iter().map(|p| d.label(&Alternative::Point(*p))).collect();
        got.sort();
        assert_eq!(got, vec!["010", "011", "110", "111"]);
        assert!(!r.contains(&pt("100", &d)));
    }

    #[test]
    fn degenerate_interval() {
        let d = DomainSpec::interval(int(0));
        let r = between(&d, &Alternative::Position(int(2)), &Alternative::Position(int(2))).unwrap();
        assert_eq!(r, BetweenRegion::interval(Some(int(2)), Some(int(2))));
    }

    #[test]
    fn interval_union_is_hull() {
        let d = DomainSpec::interval(int(4));
        let r = between_union(
            &d,
            &Alternative::Position(int(4)),
            &[Alternative::Position(int(7)), Alternative::Position(int(2))],
        )
        .unwrap();
        assert_eq!(r, BetweenRegion::interval(Some(int(2)), Some(int(7))));
        assert!(r.contains(&Alternative::Position(int(7))));
    }

    #[test]
    fn categorical_union_with_single_target() {
        let d = DomainSpec::binary("r", "p").unwrap();
        let r = between_union(&d, &Alternative::Choice(0), &[Alternative::Choice(1)]).unwrap();
        assert_eq!(r, BetweenRegion::Set([0, 1].into_iter().collect()));
    }

    #[test]
    fn hypercube_union_single_target() {
        let d = DomainSpec::hypercube(3, &[0, 0, 0]).unwrap();
        let r = between_union(&d, &pt("000", &d), &[pt("011", &d)]).unwrap();
        let BetweenRegion::Boxes(bs) = &r else { panic!() };
        let mut got: Vec<String> = bs[0].points().iter().map(|p| d.label(&Alternative::Point(*p))).collect();
        got.sort();
        assert_eq!(got, vec!["000", "001", "010", "011"]);
    }

    #[test]
    fn empty_target_set_is_an_error() {
        let d = DomainSpec::binary("r", "p").unwrap();
        assert_eq!(between_union(&d, &Alternative::Choice(0), &[]), Err(Error::EmptyTargetSet));
    }
}
