//! Base voting rules, the reality-enforcing wrapper and participation modes.
//!
//! Every rule is anchored at the status quo `r`: ties resolve to `r`, and the
//! wrapper's virtual mass `q` always supports `r`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::population::{Alternative, Ballot, DomainKind, DomainSpec, Profile, VoterClass};
use crate::proxy;
use crate::rational::{self, Q};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BaseRule {
    Majority,
    Plurality,
    Supermajority(Q),
    Condorcet,
    SuperCondorcet(Q),
    IssueWise,
    Median,
    SuppressOuterMedian(Q),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Participation {
    /// Every ballot counts, including those of passive voters that carry one.
    Full,
    /// Only active honest voters and sybils are counted.
    ActiveOnly,
    /// Passive voters delegate to their nearest active voter (interval only).
    Proxy,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mechanism {
    pub base: BaseRule,
    /// Virtual status-quo mass per visible voter; zero means no wrapper.
    pub re_tau: Q,
    pub participation: Participation,
}

impl Mechanism {
    pub fn new(base: BaseRule, re_tau: Q, participation: Participation) -> Result<Self> {
        let m = Mechanism { base, re_tau, participation };
        m.validate()?;
        Ok(m)
    }

    /// Base rule with full participation and no wrapper.
    pub fn plain(base: BaseRule) -> Self {
        Mechanism { base, re_tau: rational::zero(), participation: Participation::Full }
    }

    pub fn with_re(mut self, tau: Q) -> Self {
        self.re_tau = tau;
        self
    }

    pub fn with_participation(mut self, p: Participation) -> Self {
        self.participation = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |t: &Q| t.is_negative();
        if bad(&self.re_tau) {
            return Err(Error::InvalidParameter("re tau must be nonnegative".into()));
        }
        match &self.base {
            BaseRule::Supermajority(t) | BaseRule::SuperCondorcet(t) | BaseRule::SuppressOuterMedian(t) if bad(t) => {
                Err(Error::InvalidParameter("rule tau must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    /// Rejects mechanisms that cannot run on `domain`.
    pub fn check_domain(&self, domain: &DomainSpec) -> Result<()> {
        let kind = domain.kind();
        let ok = match &self.base {
            BaseRule::Majority => kind == DomainKind::Binary,
            BaseRule::Plurality | BaseRule::Supermajority(_) | BaseRule::Condorcet | BaseRule::SuperCondorcet(_) => {
                matches!(kind, DomainKind::Binary | DomainKind::Categorical)
            }
            BaseRule::IssueWise => kind == DomainKind::Hypercube,
            BaseRule::Median | BaseRule::SuppressOuterMedian(_) => kind == DomainKind::Interval,
        };
        if !ok {
            return Err(Error::IncompatibleMechanism(format!("{} cannot run on a {kind} domain", self)));
        }
        if self.participation == Participation::Proxy && !(kind == DomainKind::Interval && self.base == BaseRule::Median) {
            return Err(Error::IncompatibleMechanism("proxy participation needs the median on an interval".into()));
        }
        Ok(())
    }
}

impl fmt::Display for BaseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseRule::Majority => f.write_str("mj"),
            BaseRule::Plurality => f.write_str("pl"),
            BaseRule::Supermajority(t) => write!(f, "smj:{}", rational::format(t)),
            BaseRule::Condorcet => f.write_str("cc"),
            BaseRule::SuperCondorcet(t) => write!(f, "scc:{}", rational::format(t)),
            BaseRule::IssueWise => f.write_str("imj"),
            BaseRule::Median => f.write_str("md"),
            BaseRule::SuppressOuterMedian(t) => write!(f, "som:{}", rational::format(t)),
        }
    }
}

impl fmt::Display for Participation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Participation::Full => "full",
            Participation::ActiveOnly => "active",
            Participation::Proxy => "proxy",
        })
    }
}

/// Canonical spec string, e.g. `smj:2/5 re:0/1 mode:active`.
impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} re:{} mode:{}", self.base, rational::format(&self.re_tau), self.participation)
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    /// Grammar: `base [re:τ] [mode:full|active|proxy]`, with base one of
    /// `mj pl smj:τ cc scc:τ imj md som:τ`.
    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let head = tokens.next().ok_or_else(|| Error::Parse("mechanism: empty spec".into()))?;
        let tau_of = |field: &str, v: Option<&str>| -> Result<Q> {
            let v = v.ok_or_else(|| Error::Parse(format!("mechanism: {field} needs a parameter")))?;
            rational::parse(v).map_err(|_| Error::Parse(format!("mechanism: bad {field} parameter {v:?}")))
        };
        let (name, arg) = match head.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (head, None),
        };
        let no_arg = |b: BaseRule| -> Result<BaseRule> {
            match arg {
                None => Ok(b),
                Some(_) => Err(Error::Parse(format!("mechanism: {name} takes no parameter"))),
            }
        };
        let base = match name {
            "mj" => no_arg(BaseRule::Majority)?,
            "pl" => no_arg(BaseRule::Plurality)?,
            "cc" => no_arg(BaseRule::Condorcet)?,
            "imj" => no_arg(BaseRule::IssueWise)?,
            "md" => no_arg(BaseRule::Median)?,
            "smj" => BaseRule::Supermajority(tau_of("smj", arg)?),
            "scc" => BaseRule::SuperCondorcet(tau_of("scc", arg)?),
            "som" => BaseRule::SuppressOuterMedian(tau_of("som", arg)?),
            other => return Err(Error::Parse(format!("mechanism: unknown base rule {other:?}"))),
        };
        let mut re_tau = rational::zero();
        let mut participation = Participation::Full;
        let (mut saw_re, mut saw_mode) = (false, false);
        for tok in tokens {
            match tok.split_once(':') {
                Some(("re", v)) if !saw_re => {
                    saw_re = true;
                    re_tau = tau_of("re", Some(v))?;
                }
                Some(("mode", v)) if !saw_mode => {
                    saw_mode = true;
                    participation = match v {
                        "full" => Participation::Full,
                        "active" => Participation::ActiveOnly,
                        "proxy" => Participation::Proxy,
                        _ => return Err(Error::Parse(format!("mechanism: unknown mode {v:?}"))),
                    };
                }
                _ => return Err(Error::Parse(format!("mechanism: unexpected token {tok:?}"))),
            }
        }
        let m = Mechanism { base, re_tau, participation };
        m.validate().map_err(|e| Error::Parse(format!("mechanism: {e}")))?;
        Ok(m)
    }
}

/// Vote mass per distinct ballot plus the virtual status-quo mass `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub cast: BTreeMap<Ballot, Q>,
    pub q: Q,
    /// Number of voters the mechanism sees; `q = re_tau * visible`.
    pub visible: usize,
}

impl Tally {
    pub fn new(q: Q, visible: usize) -> Self {
        Tally { cast: BTreeMap::new(), q, visible }
    }

    /// Tally of `ballots` with virtual mass `re_tau * ballots.len()`.
    pub fn from_ballots<'a>(ballots: impl IntoIterator<Item = &'a Ballot>, re_tau: &Q) -> Self {
        let mut t = Tally::new(rational::zero(), 0);
        for b in ballots {
            t.add(b.clone(), rational::one());
            t.visible += 1;
        }
        t.q = re_tau * rational::from_usize(t.visible);
        t
    }

    pub fn add(&mut self, b: Ballot, mass: Q) {
        if mass.is_zero() {
            return;
        }
        *self.cast.entry(b).or_insert_with(rational::zero) += mass;
    }

    pub fn cast_total(&self) -> Q {
        self.cast.values().fold(rational::zero(), |a, b| a + b)
    }

    /// Mass per top choice.
    pub fn tops(&self) -> BTreeMap<Alternative, Q> {
        let mut out = BTreeMap::new();
        for (b, m) in &self.cast {
            *out.entry(b.top()).or_insert_with(rational::zero) += m;
        }
        out
    }

    fn top_mass(&self, a: &Alternative) -> Q {
        self.tops().get(a).cloned().unwrap_or_else(rational::zero)
    }

    /// `(position, mass)` pairs for interval tallies, without `q`.
    pub fn positions(&self) -> Vec<(Q, Q)> {
        self.cast
            .iter()
            .filter_map(|(b, m)| b.position().map(|p| (p.clone(), m.clone())))
            .collect()
    }
}

/// Result of running a mechanism: the winner and the tally it was computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub winner: Alternative,
    pub tally: Tally,
}

/// Runs `mech` on `profile` and returns only the winner.
pub fn apply(mech: &Mechanism, profile: &Profile) -> Result<Alternative> {
    Ok(evaluate(mech, profile)?.winner)
}

/// Runs `mech` on `profile`: restricts to the visible voters, adds the
/// virtual mass and dispatches to the base rule.
pub fn evaluate(mech: &Mechanism, profile: &Profile) -> Result<Evaluation> {
    mech.validate()?;
    mech.check_domain(profile.domain())?;
    let tally = match mech.participation {
        Participation::Full => Tally::from_ballots(profile.ballots_of(|_| true), &mech.re_tau),
        Participation::ActiveOnly => Tally::from_ballots(profile.ballots_of(VoterClass::is_active), &mech.re_tau),
        Participation::Proxy => proxy::proxy_tally(profile, &mech.re_tau, proxy::ProxyOptions::default())?,
    };
    let winner = match mech.participation {
        Participation::Proxy => Alternative::Position(proxy::md_proxy(profile, &mech.re_tau)?),
        _ => decide(&mech.base, profile.domain(), &tally)?,
    };
    Ok(Evaluation { winner, tally })
}

/// Applies a base rule to an already built tally.
pub fn decide(base: &BaseRule, domain: &DomainSpec, tally: &Tally) -> Result<Alternative> {
    let r = domain.status_quo();
    match base {
        BaseRule::Majority => Ok(majority(tally)),
        BaseRule::Supermajority(t) => Ok(supermajority(t, &r, tally)),
        BaseRule::Plurality => Ok(plurality(&r, tally)),
        BaseRule::Condorcet => condorcet(&rational::zero(), domain, tally),
        BaseRule::SuperCondorcet(t) => condorcet(t, domain, tally),
        BaseRule::IssueWise => {
            let d = domain.dimension().ok_or_else(|| Error::IncompatibleMechanism("imj needs a hypercube".into()))?;
            let Alternative::Point(rp) = r else { unreachable!() };
            Ok(Alternative::Point(issue_wise(d, rp, tally)))
        }
        BaseRule::Median => {
            let Alternative::Position(rp) = &r else {
                return Err(Error::IncompatibleMechanism("md needs an interval".into()));
            };
            Ok(Alternative::Position(median(tally.positions(), rp, &tally.q)?))
        }
        BaseRule::SuppressOuterMedian(t) => {
            let Alternative::Position(rp) = &r else {
                return Err(Error::IncompatibleMechanism("som needs an interval".into()));
            };
            let remove = t * rational::from_usize(tally.visible);
            Ok(Alternative::Position(suppress_outer_median(tally.positions(), rp, &tally.q, &remove)?))
        }
    }
}

/// Binary majority: `p` iff its mass exceeds `r`'s mass plus `q`.
pub fn majority(tally: &Tally) -> Alternative {
    let r = Alternative::Choice(0);
    let p = Alternative::Choice(1);
    if tally.top_mass(&p) > tally.top_mass(&r) + &tally.q {
        p
    } else {
        r
    }
}

/// `p != r` wins iff it holds strictly more than `1/2 + τ` of all mass.
pub fn supermajority(tau: &Q, r: &Alternative, tally: &Tally) -> Alternative {
    let bar = (rational::half() + tau) * (tally.cast_total() + &tally.q);
    tally
        .tops()
        .into_iter()
        .find(|(a, m)| a != r && *m > bar)
        .map(|(a, _)| a)
        .unwrap_or_else(|| r.clone())
}

/// Most mass wins; `r` keeps any tie it is part of, other ties go to the
/// alternative listed first.
pub fn plurality(r: &Alternative, tally: &Tally) -> Alternative {
    let tops = tally.tops();
    let mut best = r.clone();
    let mut best_mass = tops.get(r).cloned().unwrap_or_else(rational::zero) + &tally.q;
    for (a, m) in tops {
        if &a != r && m > best_mass {
            best = a;
            best_mass = m;
        }
    }
    best
}

/// The alternative that beats every other by more than `1/2 + τ` of the
/// relevant mass, else `r`. The virtual mass prefers `r` in contests that
/// involve `r` and abstains otherwise.
pub fn condorcet(tau: &Q, domain: &DomainSpec, tally: &Tally) -> Result<Alternative> {
    let k = domain.alternative_count().ok_or_else(|| Error::IncompatibleMechanism("condorcet needs finite alternatives".into()))?;
    let Alternative::Choice(r) = domain.status_quo() else {
        return Err(Error::IncompatibleMechanism("condorcet needs categorical alternatives".into()));
    };
    let mut pos_of = Vec::new();
    for (b, m) in &tally.cast {
        let Ballot::Ranking(order) = b else {
            return Err(Error::NonRankingBallot);
        };
        let mut pos = vec![0usize; k];
        for (i, &a) in order.iter().enumerate() {
            pos[a] = i;
        }
        pos_of.push((pos, m));
    }
    let cast = tally.cast_total();
    let share = rational::half() + tau;
    let beats = |x: usize, y: usize| -> bool {
        let mut support = pos_of.iter().filter(|(p, _)| p[x] < p[y]).fold(rational::zero(), |a, (_, m)| a + *m);
        let mut den = cast.clone();
        if x == r || y == r {
            den += &tally.q;
            if x == r {
                support += &tally.q;
            }
        }
        support > &share * den
    };
    for x in 0..k {
        if (0..k).all(|y| y == x || beats(x, y)) {
            return Ok(Alternative::Choice(x));
        }
    }
    Ok(Alternative::Choice(r))
}

/// Coordinate-wise majority with `q` on `r`'s side and ties to `r`.
pub fn issue_wise(d: usize, r: u64, tally: &Tally) -> u64 {
    let total = tally.cast_total();
    let mut out = 0u64;
    for i in 0..d {
        let rbit = (r >> i) & 1;
        let other = tally
            .cast
            .iter()
            .filter(|(b, _)| matches!(b, Ballot::Point(p) if (p >> i) & 1 != rbit))
            .fold(rational::zero(), |a, (_, m)| a + m);
        let bit = if other > &total - &other + &tally.q { 1 - rbit } else { rbit };
        out |= bit << i;
    }
    out
}

/// Sorts by position and merges equal positions.
fn merged(mut entries: Vec<(Q, Q)>) -> Vec<(Q, Q)> {
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(Q, Q)> = Vec::with_capacity(entries.len());
    for (p, m) in entries {
        match out.last_mut() {
            Some((lp, lm)) if *lp == p => *lm += m,
            _ => out.push((p, m)),
        }
    }
    out.retain(|(_, m)| !m.is_zero());
    out
}

/// Median of weighted positions plus mass `q` at `r`.
///
/// The medians form an interval `[lo, hi]` (every point with at most half the
/// mass strictly on either side). The result is the point of that interval
/// closest to `r`, which is how an extra status-quo vote settles an even split.
pub fn median(entries: Vec<(Q, Q)>, r: &Q, q: &Q) -> Result<Q> {
    let mut all = entries;
    all.push((r.clone(), q.clone()));
    let all = merged(all);
    let total = all.iter().fold(rational::zero(), |a, (_, m)| a + m);
    if total.is_zero() {
        return Err(Error::EmptyElectorate);
    }
    let half = &total / rational::int(2);
    let mut acc = rational::zero();
    let mut lo = None;
    for (p, m) in &all {
        acc += m;
        if acc >= half {
            lo = Some(p.clone());
            break;
        }
    }
    acc = rational::zero();
    let mut hi = None;
    for (p, m) in all.iter().rev() {
        acc += m;
        if acc >= half {
            hi = Some(p.clone());
            break;
        }
    }
    let (lo, hi) = (lo.expect("positive total"), hi.expect("positive total"));
    Ok(if r < &lo {
        lo
    } else if r > &hi {
        hi
    } else {
        r.clone()
    })
}

/// Median after discarding mass `remove` from the tail on the median's side
/// of `r`; falls back to `r` if the recomputed median crosses or meets `r`.
pub fn suppress_outer_median(entries: Vec<(Q, Q)>, r: &Q, q: &Q, remove: &Q) -> Result<Q> {
    let m = median(entries.clone(), r, q)?;
    if &m == r {
        return Ok(m);
    }
    let upward = &m > r;
    let mut all = entries;
    all.push((r.clone(), q.clone()));
    let mut all = merged(all);
    if upward {
        all.reverse();
    }
    let mut left = remove.clone();
    for (_, mass) in all.iter_mut() {
        if left.is_zero() {
            break;
        }
        let take = rational::min_q(mass.clone(), left.clone());
        *mass -= &take;
        left -= take;
    }
    let rest: Vec<(Q, Q)> = all.into_iter().filter(|(_, m)| !m.is_zero()).collect();
    if rest.is_empty() {
        return Ok(r.clone());
    }
    let m2 = median(rest, r, &rational::zero())?;
    Ok(if (upward && &m2 > r) || (!upward && &m2 < r) { m2 } else { r.clone() })
}
