//! Voter populations, ballot domains and the fractions sigma, mu, h+ and phi.

use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Q};

/// Which of the four ballot domains a profile lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Binary,
    Categorical,
    Hypercube,
    Interval,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::Binary => "binary",
            DomainKind::Categorical => "categorical",
            DomainKind::Hypercube => "hypercube",
            DomainKind::Interval => "interval",
        };
        f.write_str(s)
    }
}

/// An outcome of a vote. Binary and categorical alternatives are indices into
/// the domain's alternative list; hypercube points are bit masks with
/// coordinate `i` stored in bit `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Alternative {
    Choice(usize),
    Point(u64),
    Position(Q),
}

/// A single voter's ballot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ballot {
    Choice(usize),
    /// Full ranking, most preferred first (categorical domains only).
    Ranking(Vec<usize>),
    Point(u64),
    Position(Q),
}

impl Ballot {
    /// The alternative this ballot names first.
    pub fn top(&self) -> Alternative {
        match self {
            Ballot::Choice(i) => Alternative::Choice(*i),
            Ballot::Ranking(r) => Alternative::Choice(r[0]),
            Ballot::Point(p) => Alternative::Point(*p),
            Ballot::Position(x) => Alternative::Position(x.clone()),
        }
    }

    pub fn from_alternative(a: &Alternative) -> Ballot {
        match a {
            Alternative::Choice(i) => Ballot::Choice(*i),
            Alternative::Point(p) => Ballot::Point(*p),
            Alternative::Position(x) => Ballot::Position(x.clone()),
        }
    }

    pub fn position(&self) -> Option<&Q> {
        match self {
            Ballot::Position(x) => Some(x),
            _ => None,
        }
    }
}

/// The alternative space together with its status quo `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainSpec {
    /// Two alternatives; index 0 is the status quo `r`, index 1 the proposal `p`.
    Binary { r: String, p: String },
    Categorical { alternatives: Vec<String>, r: usize },
    Hypercube { d: usize, r: u64 },
    Interval { r: Q },
}

/// Largest supported hypercube dimension.
pub const MAX_DIMENSION: usize = 63;

impl DomainSpec {
    pub fn binary(r: &str, p: &str) -> Result<Self> {
        if r == p {
            return Err(Error::InvalidDomain("binary alternatives must differ".into()));
        }
        Ok(DomainSpec::Binary { r: r.to_string(), p: p.to_string() })
    }

    pub fn categorical(alternatives: &[&str], r: &str) -> Result<Self> {
        let alts: Vec<String> = alternatives.iter().map(|s| s.to_string()).collect();
        Self::categorical_owned(alts, r)
    }

    pub fn categorical_owned(alternatives: Vec<String>, r: &str) -> Result<Self> {
        if alternatives.len() < 2 {
            return Err(Error::InvalidDomain("categorical domain needs at least 2 alternatives".into()));
        }
        for (i, a) in alternatives.iter().enumerate() {
            if alternatives[..i].contains(a) {
                return Err(Error::InvalidDomain(format!("duplicate alternative {a:?}")));
            }
        }
        let idx = alternatives
            .iter()
            .position(|a| a == r)
            .ok_or_else(|| Error::InvalidDomain(format!("status quo {r:?} is not an alternative")))?;
        Ok(DomainSpec::Categorical { alternatives, r: idx })
    }

    pub fn hypercube(d: usize, r_bits: &[u8]) -> Result<Self> {
        if d == 0 || d > MAX_DIMENSION {
            return Err(Error::InvalidDomain(format!("dimension {d} outside 1..={MAX_DIMENSION}")));
        }
        if r_bits.len() != d {
            return Err(Error::InvalidDomain("status quo length differs from dimension".into()));
        }
        Ok(DomainSpec::Hypercube { d, r: bits_to_mask(r_bits)? })
    }

    pub fn interval(r: Q) -> Self {
        DomainSpec::Interval { r }
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            DomainSpec::Binary { .. } => DomainKind::Binary,
            DomainSpec::Categorical { .. } => DomainKind::Categorical,
            DomainSpec::Hypercube { .. } => DomainKind::Hypercube,
            DomainSpec::Interval { .. } => DomainKind::Interval,
        }
    }

    pub fn status_quo(&self) -> Alternative {
        match self {
            DomainSpec::Binary { .. } => Alternative::Choice(0),
            DomainSpec::Categorical { r, .. } => Alternative::Choice(*r),
            DomainSpec::Hypercube { r, .. } => Alternative::Point(*r),
            DomainSpec::Interval { r } => Alternative::Position(r.clone()),
        }
    }

    /// Number of alternatives for the finite domains.
    pub fn alternative_count(&self) -> Option<usize> {
        match self {
            DomainSpec::Binary { .. } => Some(2),
            DomainSpec::Categorical { alternatives, .. } => Some(alternatives.len()),
            DomainSpec::Hypercube { d, .. } => Some(1usize << (*d).min(62)),
            DomainSpec::Interval { .. } => None,
        }
    }

    pub fn dimension(&self) -> Option<usize> {
        match self {
            DomainSpec::Hypercube { d, .. } => Some(*d),
            _ => None,
        }
    }

    /// Names of the binary or categorical alternatives, status quo included.
    pub fn names(&self) -> Vec<String> {
        match self {
            DomainSpec::Binary { r, p } => vec![r.clone(), p.clone()],
            DomainSpec::Categorical { alternatives, .. } => alternatives.clone(),
            _ => Vec::new(),
        }
    }

    pub fn contains_alternative(&self, a: &Alternative) -> bool {
        match (self, a) {
            (DomainSpec::Binary { .. }, Alternative::Choice(i)) => *i < 2,
            (DomainSpec::Categorical { alternatives, .. }, Alternative::Choice(i)) => *i < alternatives.len(),
            (DomainSpec::Hypercube { d, .. }, Alternative::Point(p)) => *p >> *d == 0,
            (DomainSpec::Interval { .. }, Alternative::Position(_)) => true,
            _ => false,
        }
    }

    pub fn check_alternative(&self, a: &Alternative) -> Result<()> {
        if self.contains_alternative(a) {
            Ok(())
        } else {
            Err(Error::MixedBallotKind(format!("{a:?} is not an alternative of the {} domain", self.kind())))
        }
    }

    pub fn check_ballot(&self, b: &Ballot) -> Result<()> {
        match (self, b) {
            (DomainSpec::Categorical { alternatives, .. }, Ballot::Ranking(order)) => {
                let k = alternatives.len();
                let mut seen = vec![false; k];
                if order.len() != k {
                    return Err(Error::MixedBallotKind("ranking must list every alternative once".into()));
                }
                for &i in order {
                    if i >= k || seen[i] {
                        return Err(Error::MixedBallotKind("ranking must list every alternative once".into()));
                    }
                    seen[i] = true;
                }
                Ok(())
            }
            (_, Ballot::Ranking(_)) => Err(Error::MixedBallotKind("rankings are only allowed in categorical domains".into())),
            _ => self.check_alternative(&b.top()),
        }
    }

    /// Human-readable label used by the CLI and file formats.
    pub fn label(&self, a: &Alternative) -> String {
        match (self, a) {
            (DomainSpec::Binary { r, p }, Alternative::Choice(i)) => if *i == 0 { r.clone() } else { p.clone() },
            (DomainSpec::Categorical { alternatives, .. }, Alternative::Choice(i)) => {
                alternatives.get(*i).cloned().unwrap_or_else(|| format!("#{i}"))
            }
            (DomainSpec::Hypercube { d, .. }, Alternative::Point(p)) => mask_to_string(*p, *d),
            (_, Alternative::Position(x)) => rational::format(x),
            (_, other) => format!("{other:?}"),
        }
    }

    /// Resolves a label produced by [`DomainSpec::label`].
    pub fn parse_alternative(&self, s: &str) -> Result<Alternative> {
        match self {
            DomainSpec::Binary { .. } | DomainSpec::Categorical { .. } => self
                .names()
                .iter()
                .position(|n| n == s)
                .map(Alternative::Choice)
                .ok_or_else(|| Error::Parse(format!("unknown alternative {s:?}"))),
            DomainSpec::Hypercube { d, .. } => {
                let bits: Vec<u8> = s
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        _ => Err(Error::Parse(format!("bad hypercube point {s:?}"))),
                    })
                    .collect::<Result<_>>()?;
                if bits.len() != *d {
                    return Err(Error::Parse(format!("point {s:?} has wrong dimension")));
                }
                Ok(Alternative::Point(bits_to_mask(&bits)?))
            }
            DomainSpec::Interval { .. } => Ok(Alternative::Position(rational::parse(s)?)),
        }
    }
}

pub fn bits_to_mask(bits: &[u8]) -> Result<u64> {
    if bits.len() > MAX_DIMENSION {
        return Err(Error::InvalidDomain("too many coordinates".into()));
    }
    let mut m = 0u64;
    for (i, &b) in bits.iter().enumerate() {
        match b {
            0 => {}
            1 => m |= 1 << i,
            _ => return Err(Error::Parse(format!("hypercube coordinate must be 0 or 1, got {b}"))),
        }
    }
    Ok(m)
}

pub fn mask_to_bits(m: u64, d: usize) -> Vec<u8> {
    (0..d).map(|i| ((m >> i) & 1) as u8).collect()
}

/// Coordinate 0 is printed first, so `(0,1,1)` prints as `011`.
pub fn mask_to_string(m: u64, d: usize) -> String {
    mask_to_bits(m, d).iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VoterClass {
    HonestActive,
    HonestPassive,
    /// Sybils always vote.
    Sybil,
}

impl VoterClass {
    pub fn is_honest(self) -> bool {
        !matches!(self, VoterClass::Sybil)
    }

    pub fn is_active(self) -> bool {
        !matches!(self, VoterClass::HonestPassive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Voter {
    pub class: VoterClass,
    /// Passive voters may omit their private ballot.
    pub ballot: Option<Ballot>,
}

impl Voter {
    pub fn new(class: VoterClass, ballot: Option<Ballot>) -> Self {
        Voter { class, ballot }
    }
}

/// A validated, immutable voter population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    domain: DomainSpec,
    voters: Vec<Voter>,
}

/// Validates `entries` against `domain` and builds a [`Profile`].
pub fn build_profile(domain: DomainSpec, entries: Vec<(VoterClass, Option<Ballot>)>) -> Result<Profile> {
    Profile::new(domain, entries.into_iter().map(|(c, b)| Voter::new(c, b)).collect())
}

impl Profile {
    pub fn new(domain: DomainSpec, voters: Vec<Voter>) -> Result<Self> {
        if voters.is_empty() {
            return Err(Error::EmptyProfile);
        }
        let mut saw_choice = false;
        let mut saw_ranking = false;
        for v in &voters {
            match (&v.ballot, v.class) {
                (None, VoterClass::Sybil) => return Err(Error::SybilWithoutBallot),
                (None, VoterClass::HonestActive) => return Err(Error::ActiveWithoutBallot),
                (None, VoterClass::HonestPassive) => {}
                (Some(b), _) => {
                    domain.check_ballot(b)?;
                    match b {
                        Ballot::Ranking(_) => saw_ranking = true,
                        Ballot::Choice(_) => saw_choice = true,
                        _ => {}
                    }
                }
            }
        }
        if saw_choice && saw_ranking {
            return Err(Error::MixedBallotKind("profile mixes single choices and rankings".into()));
        }
        if !voters.iter().any(|v| v.class == VoterClass::HonestActive) {
            return Err(Error::NoActiveHonest);
        }
        Ok(Profile { domain, voters })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn voters(&self) -> &[Voter] {
        &self.voters
    }

    pub fn n(&self) -> usize {
        self.voters.len()
    }

    fn count(&self, class: VoterClass) -> usize {
        self.voters.iter().filter(|v| v.class == class).count()
    }

    pub fn sybil_count(&self) -> usize {
        self.count(VoterClass::Sybil)
    }

    pub fn passive_count(&self) -> usize {
        self.count(VoterClass::HonestPassive)
    }

    pub fn active_honest_count(&self) -> usize {
        self.count(VoterClass::HonestActive)
    }

    pub fn honest_count(&self) -> usize {
        self.n() - self.sybil_count()
    }

    /// `|V+| = |H+| + |S|`.
    pub fn active_count(&self) -> usize {
        self.n() - self.passive_count()
    }

    pub fn sigma(&self) -> Q {
        rational::frac(self.sybil_count() as i64, self.n() as i64)
    }

    pub fn mu(&self) -> Q {
        rational::frac(self.passive_count() as i64, self.n() as i64)
    }

    pub fn h_plus(&self) -> Q {
        rational::one() - self.sigma() - self.mu()
    }

    pub fn phi(&self) -> Q {
        rational::frac(self.active_honest_count() as i64, self.honest_count() as i64)
    }

    /// True when every passive voter carries a private ballot.
    pub fn has_private_ballots(&self) -> bool {
        self.voters.iter().all(|v| v.ballot.is_some())
    }

    pub fn ballots_of<'a>(&'a self, pred: impl Fn(VoterClass) -> bool + 'a) -> impl Iterator<Item = &'a Ballot> + 'a {
        self.voters.iter().filter(move |v| pred(v.class)).filter_map(|v| v.ballot.as_ref())
    }

    /// Honest voters only, passives included, as a profile of their own.
    /// Every passive voter is promoted to active so the result is a full
    /// participation profile of `H`.
    pub fn honest_profile(&self) -> Result<Profile> {
        let mut voters = Vec::new();
        for v in &self.voters {
            if v.class.is_honest() {
                let b = v.ballot.clone().ok_or(Error::MissingPrivateBallots)?;
                voters.push(Voter::new(VoterClass::HonestActive, Some(b)));
            }
        }
        Profile::new(self.domain.clone(), voters)
    }

    /// Projection of an interval profile onto the pair `{x, y}`. Each voter
    /// picks the closer point, exact ties going to `x`; `x` becomes the status
    /// quo of the resulting binary profile.
    pub fn project_to_pair(&self, x: &Q, y: &Q) -> Result<Profile> {
        if self.domain.kind() != DomainKind::Interval {
            return Err(Error::IncompatibleMechanism("projection needs an interval profile".into()));
        }
        if x == y {
            return Err(Error::InvalidParameter("projection needs two distinct points".into()));
        }
        let domain = DomainSpec::binary(&rational::format(x), &rational::format(y))?;
        let voters = self
            .voters
            .iter()
            .map(|v| {
                let ballot = v.ballot.as_ref().map(|b| {
                    let s = b.position().expect("interval profile holds positions");
                    let dx = (s - x).abs();
                    let dy = (s - y).abs();
                    Ballot::Choice(if dx <= dy { 0 } else { 1 })
                });
                Voter::new(v.class, ballot)
            })
            .collect();
        Profile::new(domain, voters)
    }
}

/// Continuum population on a binary domain, described by vote masses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonatomicProfile {
    pub h_r: Q,
    pub h_p: Q,
    pub s_r: Q,
    pub s_p: Q,
    /// Fraction of the honest mass that is active, identical for both camps.
    pub phi: Q,
}

impl NonatomicProfile {
    pub fn new(h_r: Q, h_p: Q, s_r: Q, s_p: Q, phi: Q) -> Result<Self> {
        for m in [&h_r, &h_p, &s_r, &s_p] {
            if m.is_negative() {
                return Err(Error::InvalidParameter("masses must be nonnegative".into()));
            }
        }
        if &h_r + &h_p + &s_r + &s_p != rational::one() {
            return Err(Error::InvalidParameter("masses must sum to 1".into()));
        }
        if phi.is_negative() || phi > rational::one() {
            return Err(Error::InvalidParameter("participation rate must lie in [0, 1]".into()));
        }
        if (&h_r + &h_p).is_zero() || phi.is_zero() {
            return Err(Error::NoActiveHonest);
        }
        Ok(NonatomicProfile { h_r, h_p, s_r, s_p, phi })
    }

    pub fn honest(&self) -> Q {
        &self.h_r + &self.h_p
    }

    pub fn sigma(&self) -> Q {
        &self.s_r + &self.s_p
    }

    pub fn mu(&self) -> Q {
        (rational::one() - &self.phi) * self.honest()
    }

    pub fn h_plus_r(&self) -> Q {
        &self.phi * &self.h_r
    }

    pub fn h_plus_p(&self) -> Q {
        &self.phi * &self.h_p
    }

    /// Active vote mass for `p` (honest active plus sybil).
    pub fn v_plus_p(&self) -> Q {
        self.h_plus_p() + &self.s_p
    }

    pub fn v_plus_r(&self) -> Q {
        self.h_plus_r() + &self.s_r
    }
}
