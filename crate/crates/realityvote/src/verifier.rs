//! Brute-force outcome ranges, safety and liveness on small instances, and the
//! adversarial constructions behind the lower bounds.
//!
//! Voters are anonymous to every rule, so honest modifications are enumerated
//! as changes to ballot counts. A modification adds `a` voters, all with the
//! same ballot `w`, and removes at most `a` existing honest voters; its cost is
//! `a`. Concentrating the additions on one ballot loses nothing for rules that
//! are monotone in each ballot's count, which covers every single-choice rule
//! here. Rankings are enumerated the same way and the result is a lower
//! bound on their true range.

use std::collections::{BTreeSet, HashMap};

use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::betweenness::{self, BetweenRegion};
use crate::error::{Error, Result};
use crate::guarantees::{self, Setting};
use crate::population::{Alternative, Ballot, DomainKind, DomainSpec, NonatomicProfile, Profile, Voter, VoterClass};
use crate::rational::{self, Q};
use crate::rules::{self, BaseRule, Mechanism, Participation, Tally};

/// Upper bound on rule evaluations for a single enumeration.
pub const MAX_EVALUATIONS: u64 = 50_000_000;

/// Largest categorical alternative count for which all rankings are listed.
const MAX_RANKED_ALTERNATIVES: usize = 6;
/// Largest hypercube dimension whose points are listed.
const MAX_LISTED_DIMENSION: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeRange {
    pub gamma: Q,
    /// Integer modification budget `⌊γ|H|⌋`.
    pub budget: usize,
    pub reachable: BTreeSet<Alternative>,
    /// Interval only: outcomes can be pushed arbitrarily far down / up.
    pub ray_low: bool,
    pub ray_high: bool,
}

impl OutcomeRange {
    /// `B(r; R̄_γ)`.
    pub fn between_region(&self, domain: &DomainSpec) -> Result<BetweenRegion> {
        let r = domain.status_quo();
        let ys: Vec<Alternative> = self.reachable.iter().cloned().collect();
        let mut region = if ys.is_empty() {
            betweenness::between(domain, &r, &r)?
        } else {
            betweenness::between_union(domain, &r, &ys)?
        };
        if let BetweenRegion::Interval { lo, hi } = &mut region {
            if self.ray_low {
                *lo = None;
            }
            if self.ray_high {
                *hi = None;
            }
        }
        Ok(region)
    }
}

/// Population shape: voter count with sybil and passive counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub sybils: usize,
    pub passives: usize,
}

impl Shape {
    pub fn new(n: usize, sybils: usize, passives: usize) -> Result<Self> {
        if sybils + passives >= n {
            return Err(Error::UnrealizableShape(format!("{n} voters leave no active honest voter")));
        }
        Ok(Shape { n, sybils, passives })
    }

    /// Shape with `σn` sybils and `μn` passives; both must be integers.
    pub fn from_fractions(n: usize, sigma: &Q, mu: &Q) -> Result<Self> {
        let count = |x: &Q, what: &str| -> Result<usize> {
            let c = x * rational::from_usize(n);
            if !c.is_integer() || c < rational::zero() {
                return Err(Error::UnrealizableShape(format!("{what} × {n} is not a whole number")));
            }
            Ok(c.to_integer().to_usize().unwrap_or(usize::MAX))
        };
        Shape::new(n, count(sigma, "sigma")?, count(mu, "mu")?)
    }

    pub fn active_honest(&self) -> usize {
        self.n - self.sybils - self.passives
    }

    pub fn honest(&self) -> usize {
        self.n - self.sybils
    }

    pub fn sigma(&self) -> Q {
        rational::frac(self.sybils as i64, self.n as i64)
    }

    pub fn mu(&self) -> Q {
        rational::frac(self.passives as i64, self.n as i64)
    }
}

/// Honest voters a mechanism sees and may therefore be modified.
fn visible_honest(mech: &Mechanism, v: &Voter) -> bool {
    v.class.is_honest() && v.ballot.is_some() && (mech.participation == Participation::Full || v.class.is_active())
}

/// Honest ballot counts over a fixed list of ballot types, plus the
/// untouchable visible ballots (sybils).
struct Instance<'a> {
    mech: &'a Mechanism,
    domain: &'a DomainSpec,
    types: Vec<Ballot>,
    counts: Vec<usize>,
    fixed: Tally,
    interval: bool,
}

fn all_rankings(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Every ballot an honest voter could cast in a finite domain.
fn finite_types(domain: &DomainSpec, rankings: bool) -> Result<Vec<Ballot>> {
    Ok(match domain {
        DomainSpec::Binary { .. } => vec![Ballot::Choice(0), Ballot::Choice(1)],
        DomainSpec::Categorical { alternatives, .. } => {
            let k = alternatives.len();
            if rankings {
                if k > MAX_RANKED_ALTERNATIVES {
                    return Err(Error::BudgetExceeded(format!("{k} alternatives are too many to list all rankings")));
                }
                all_rankings(k).into_iter().map(Ballot::Ranking).collect()
            } else {
                (0..k).map(Ballot::Choice).collect()
            }
        }
        DomainSpec::Hypercube { d, .. } => {
            if *d > MAX_LISTED_DIMENSION {
                return Err(Error::BudgetExceeded(format!("dimension {d} is too large to enumerate")));
            }
            (0..1u64 << d).map(Ballot::Point).collect()
        }
        DomainSpec::Interval { .. } => unreachable!("interval types are built from positions"),
    })
}

/// Honest and fixed positions, `r`, `extra` and one sentinel beyond each end.
fn interval_types(r: &Q, honest: &[Q], fixed: &[Q], extra: &[Q]) -> (Vec<Q>, Q, Q) {
    let mut all: BTreeSet<Q> = honest.iter().chain(fixed).chain(extra).cloned().collect();
    all.insert(r.clone());
    let lo = all.iter().next().expect("r is present") - rational::one();
    let hi = all.iter().next_back().expect("r is present") + rational::one();
    all.insert(lo.clone());
    all.insert(hi.clone());
    (all.into_iter().collect(), lo, hi)
}

impl<'a> Instance<'a> {
    fn build(mech: &'a Mechanism, profile: &'a Profile, extra: &[Q]) -> Result<Self> {
        mech.validate()?;
        mech.check_domain(profile.domain())?;
        if mech.participation == Participation::Proxy {
            return Err(Error::IncompatibleMechanism("outcome ranges are not enumerated for proxy voting".into()));
        }
        let domain = profile.domain();
        let honest: Vec<&Ballot> = profile
            .voters()
            .iter()
            .filter(|v| visible_honest(mech, v))
            .filter_map(|v| v.ballot.as_ref())
            .collect();
        let sybil: Vec<&Ballot> = profile.ballots_of(|c| c == VoterClass::Sybil).collect();
        let mut fixed = Tally::new(rational::zero(), sybil.len());
        for b in &sybil {
            fixed.add((*b).clone(), rational::one());
        }
        let interval = domain.kind() == DomainKind::Interval;
        let types = if interval {
            let pos = |bs: &[&Ballot]| bs.iter().map(|b| b.position().expect("interval").clone()).collect::<Vec<_>>();
            let DomainSpec::Interval { r } = domain else { unreachable!() };
            interval_types(r, &pos(&honest), &pos(&sybil), extra).0.into_iter().map(Ballot::Position).collect()
        } else {
            let rankings = profile.voters().iter().any(|v| matches!(v.ballot, Some(Ballot::Ranking(_))));
            finite_types(domain, rankings)?
        };
        let index: HashMap<&Ballot, usize> = types.iter().enumerate().map(|(i, b)| (b, i)).collect();
        let mut counts = vec![0usize; types.len()];
        for b in honest {
            counts[index[b]] += 1;
        }
        Ok(Instance { mech, domain, types, counts, fixed, interval })
    }

    fn honest_total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn eval(&self, counts: &[usize]) -> Result<Alternative> {
        let mut t = self.fixed.clone();
        let mut visible = t.visible;
        for (b, &c) in self.types.iter().zip(counts) {
            if c > 0 {
                t.add(b.clone(), rational::from_usize(c));
                visible += c;
            }
        }
        t.visible = visible;
        t.q = &self.mech.re_tau * rational::from_usize(visible);
        rules::decide(&self.mech.base, self.domain, &t)
    }

    /// Visits every modification of cost `0..=max_cost` in nondecreasing cost
    /// order until `visit` returns true. Returns the cost at which it stopped.
    fn search(&self, max_cost: usize, mut visit: impl FnMut(&[usize], &Alternative) -> bool) -> Result<Option<usize>> {
        let mut evals = 0u64;
        let mut counts = self.counts.clone();
        let mut step = |counts: &[usize]| -> Result<bool> {
            evals += 1;
            if evals > MAX_EVALUATIONS {
                return Err(Error::BudgetExceeded(format!("more than {MAX_EVALUATIONS} evaluations")));
            }
            let o = self.eval(counts)?;
            Ok(visit(counts, &o))
        };
        if step(&counts)? {
            return Ok(Some(0));
        }
        for a in 1..=max_cost {
            for w in 0..self.types.len() {
                counts[w] += a;
                let hit = if self.interval {
                    self.removals_interval(w, a, &mut counts, &mut step)?
                } else {
                    self.removals_any(w, a, 0, &mut counts, &mut step)?
                };
                counts[w] -= a;
                if hit {
                    return Ok(Some(a));
                }
            }
        }
        Ok(None)
    }

    /// Every removal vector with total at most `left`, skipping type `w`.
    fn removals_any(
        &self,
        w: usize,
        left: usize,
        from: usize,
        counts: &mut Vec<usize>,
        step: &mut impl FnMut(&[usize]) -> Result<bool>,
    ) -> Result<bool> {
        if from == self.types.len() {
            return step(counts);
        }
        if from == w || self.counts[from] == 0 {
            return self.removals_any(w, left, from + 1, counts, step);
        }
        for d in 0..=left.min(self.counts[from]) {
            counts[from] -= d;
            let hit = self.removals_any(w, left - d, from + 1, counts, step)?;
            counts[from] += d;
            if hit {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Removes the `l` lowest honest voters below `w` and the `u` highest
    /// above it, for every `l + u ≤ a`.
    fn removals_interval(
        &self,
        w: usize,
        a: usize,
        counts: &mut [usize],
        step: &mut impl FnMut(&[usize]) -> Result<bool>,
    ) -> Result<bool> {
        let below: usize = self.counts[..w].iter().sum();
        let above: usize = self.counts[w + 1..].iter().sum();
        for l in 0..=a.min(below) {
            for u in 0..=(a - l).min(above) {
                let mut c = counts.to_vec();
                take_from(&mut c[..w], l, false);
                take_from(&mut c[w + 1..], u, true);
                if step(&c)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Largest and smallest outcome reachable at cost `budget` on the line,
    /// with flags for outcomes reaching the sentinels.
    fn interval_extremes(&self, budget: usize) -> Result<(Q, bool, Q, bool)> {
        let pos = |i: usize| self.types[i].position().expect("interval").clone();
        let last = self.types.len() - 1;
        let mut hi_counts = self.counts.clone();
        take_from(&mut hi_counts[..last], budget, false);
        hi_counts[last] += budget;
        let mut lo_counts = self.counts.clone();
        take_from(&mut lo_counts[1..], budget, true);
        lo_counts[0] += budget;
        let pos_of = |a: Alternative| match a {
            Alternative::Position(p) => p,
            _ => unreachable!(),
        };
        let hi = pos_of(self.eval(&hi_counts)?);
        let lo = pos_of(self.eval(&lo_counts)?);
        let ray_hi = hi == pos(last);
        let ray_lo = lo == pos(0);
        Ok((lo, ray_lo, hi, ray_hi))
    }
}

/// Removes up to `k` voters from the low end (or the high end if `from_top`).
fn take_from(counts: &mut [usize], mut k: usize, from_top: bool) {
    let n = counts.len();
    for j in 0..n {
        let i = if from_top { n - 1 - j } else { j };
        let d = k.min(counts[i]);
        counts[i] -= d;
        k -= d;
        if k == 0 {
            break;
        }
    }
}

fn budget_of(gamma: &Q, honest: usize) -> usize {
    rational::floor_count(&(gamma * rational::from_usize(honest)))
}

/// Every outcome `mech` can produce after modifying at most `⌊γ|H|⌋` of the
/// honest voters it sees. Sybils keep their ballots.
pub fn outcome_range(mech: &Mechanism, profile: &Profile, gamma: &Q) -> Result<OutcomeRange> {
    if gamma < &rational::zero() {
        return Err(Error::InvalidParameter("gamma must be nonnegative".into()));
    }
    let inst = Instance::build(mech, profile, &[])?;
    let budget = budget_of(gamma, inst.honest_total());
    let mut reachable = BTreeSet::new();
    inst.search(budget, |_, o| {
        reachable.insert(o.clone());
        false
    })?;
    let (mut ray_low, mut ray_high) = (false, false);
    if inst.interval {
        let lo = inst.types[0].top();
        let hi = inst.types[inst.types.len() - 1].top();
        ray_low = reachable.remove(&lo);
        ray_high = reachable.remove(&hi);
    }
    Ok(OutcomeRange { gamma: gamma.clone(), budget, reachable, ray_low, ray_high })
}

/// Whether `mech`'s outcome on `profile` lies between `r` and something the
/// base rule reaches on the honest voters with budget `α`.
pub fn is_safe(mech: &Mechanism, base: &Mechanism, profile: &Profile, alpha: &Q) -> Result<bool> {
    let o = rules::apply(mech, profile)?;
    let honest = profile.honest_profile()?;
    let k = budget_of(alpha, honest.n());
    Ok(safety_cost(base, &honest, &o, k)?.is_some())
}

/// `B(r; R̄_α(H))` for the base rule on the honest population. Outcomes in
/// this region are exactly the `α`-safe ones.
pub fn safe_region(base: &Mechanism, profile: &Profile, alpha: &Q) -> Result<BetweenRegion> {
    let honest = profile.honest_profile()?;
    let domain = honest.domain();
    if let DomainSpec::Interval { r } = domain {
        let inst = Instance::build(base, &honest, &[])?;
        let (lo, ray_lo, hi, ray_hi) = inst.interval_extremes(budget_of(alpha, honest.n()))?;
        let lo = (!ray_lo).then(|| rational::min_q(lo, r.clone()));
        let hi = (!ray_hi).then(|| rational::max_q(hi, r.clone()));
        return Ok(BetweenRegion::Interval { lo, hi });
    }
    outcome_range(base, &honest, alpha)?.between_region(domain)
}

/// Smallest budget (at most `cap`) at which `o` lies in `B(r; R̄(H))`.
fn safety_cost(base: &Mechanism, honest: &Profile, o: &Alternative, cap: usize) -> Result<Option<usize>> {
    let domain = honest.domain();
    let r = domain.status_quo();
    if o == &r {
        return Ok(Some(0));
    }
    let inst = Instance::build(base, honest, &[])?;
    if inst.interval {
        let Alternative::Position(z) = o else { unreachable!() };
        let DomainSpec::Interval { r } = domain else { unreachable!() };
        for k in 0..=cap {
            let (lo, ray_lo, hi, ray_hi) = inst.interval_extremes(k)?;
            let inside = if z > r { ray_hi || z <= &hi } else { ray_lo || z >= &lo };
            if inside {
                return Ok(Some(k));
            }
        }
        return Ok(None);
    }
    inst.search(cap, |_, y| betweenness::between(domain, &r, y).map(|b| b.contains(o)).unwrap_or(false))
}

/// Smallest `α` (a multiple of `1/|H|`) for which `mech` is `α`-safe on this
/// profile.
pub fn min_alpha_profile(mech: &Mechanism, base: &Mechanism, profile: &Profile) -> Result<Q> {
    let o = rules::apply(mech, profile)?;
    let honest = profile.honest_profile()?;
    let h = honest.n();
    let cap = 100 * (profile.n() + 1);
    match safety_cost(base, &honest, &o, cap)? {
        Some(k) => Ok(rational::frac(k as i64, h as i64)),
        None => Err(Error::BudgetExceeded(format!("outcome not reachable within {cap} modifications"))),
    }
}

/// Every multiset of `size` ballots over `types.len()` types, as count vectors.
fn compositions(size: usize, types: usize) -> Vec<Vec<usize>> {
    fn go(left: usize, i: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[i] = c;
            go(left - c, i + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    if types == 0 {
        return out;
    }
    go(size, 0, &mut vec![0; types], &mut out);
    out
}

fn expand(types: &[Ballot], counts: &[usize], class: VoterClass, out: &mut Vec<(VoterClass, Option<Ballot>)>) {
    for (b, &c) in types.iter().zip(counts) {
        out.extend(std::iter::repeat_n((class, Some(b.clone())), c));
    }
}

/// Worst case over every profile of `shape` in a finite `domain` of the
/// minimal safe `α`. Honest, passive and sybil ballots are all enumerated.
pub fn min_alpha(mech: &Mechanism, base: &Mechanism, shape: Shape, domain: &DomainSpec) -> Result<Q> {
    if domain.kind() == DomainKind::Interval {
        return Err(Error::IncompatibleMechanism("shape enumeration needs a finite domain".into()));
    }
    let types = finite_types(domain, false)?;
    let t = types.len();
    let actives = compositions(shape.active_honest(), t);
    let passives = compositions(shape.passives, t);
    let sybils = compositions(shape.sybils, t);
    let cap = 100 * (shape.n + 1);
    let mut cache: HashMap<(Vec<usize>, Alternative), usize> = HashMap::new();
    let mut worst = 0usize;
    for a in &actives {
        for p in &passives {
            let honest_counts: Vec<usize> = a.iter().zip(p).map(|(x, y)| x + y).collect();
            for s in &sybils {
                let mut entries = Vec::with_capacity(shape.n);
                expand(&types, a, VoterClass::HonestActive, &mut entries);
                expand(&types, p, VoterClass::HonestPassive, &mut entries);
                expand(&types, s, VoterClass::Sybil, &mut entries);
                let profile = Profile::new(domain.clone(), entries.into_iter().map(|(c, b)| Voter::new(c, b)).collect())?;
                let o = rules::apply(mech, &profile)?;
                let key = (honest_counts.clone(), o.clone());
                let k = match cache.get(&key) {
                    Some(k) => *k,
                    None => {
                        let honest = profile.honest_profile()?;
                        let k = safety_cost(base, &honest, &o, cap)?
                            .ok_or_else(|| Error::BudgetExceeded(format!("outcome not reachable within {cap} modifications")))?;
                        cache.insert(key, k);
                        k
                    }
                };
                worst = worst.max(k);
            }
        }
    }
    Ok(rational::frac(worst as i64, shape.honest() as i64))
}

/// Number of honest voters liveness budgets are measured against.
fn liveness_base(mech: &Mechanism, shape: Shape) -> usize {
    match mech.participation {
        Participation::ActiveOnly => shape.active_honest(),
        _ => shape.honest(),
    }
}

/// Smallest `β` (a multiple of `1/|H⁺|` for active-only mechanisms, of
/// `1/|H|` otherwise) at which `target` is reachable from every worst-case
/// profile: all honest voters on `r`, sybils anywhere. `None` if it is not
/// reachable within `100(n+1)` modifications.
pub fn min_beta(mech: &Mechanism, shape: Shape, domain: &DomainSpec, target: &Alternative) -> Result<Option<Q>> {
    let cap = 100 * (shape.n + 1);
    Ok(liveness_cost(mech, shape, domain, target, cap)?
        .map(|k| rational::frac(k as i64, liveness_base(mech, shape) as i64)))
}

fn liveness_cost(mech: &Mechanism, shape: Shape, domain: &DomainSpec, target: &Alternative, cap: usize) -> Result<Option<usize>> {
    if domain.kind() == DomainKind::Interval {
        return Err(Error::IncompatibleMechanism("liveness enumeration needs a finite domain".into()));
    }
    domain.check_alternative(target)?;
    let types = finite_types(domain, false)?;
    let r_ballot = Ballot::from_alternative(&domain.status_quo());
    let mut worst = 0usize;
    for s in compositions(shape.sybils, types.len()) {
        let mut entries = Vec::with_capacity(shape.n);
        entries.extend(std::iter::repeat_n((VoterClass::HonestActive, Some(r_ballot.clone())), shape.active_honest()));
        entries.extend(std::iter::repeat_n((VoterClass::HonestPassive, Some(r_ballot.clone())), shape.passives));
        expand(&types, &s, VoterClass::Sybil, &mut entries);
        let profile = Profile::new(domain.clone(), entries.into_iter().map(|(c, b)| Voter::new(c, b)).collect())?;
        let inst = Instance::build(mech, &profile, &[])?;
        match inst.search(cap, |_, o| o == target)? {
            Some(k) => worst = worst.max(k),
            None => return Ok(None),
        }
    }
    Ok(Some(worst))
}

/// Whether `target` is reachable within budget `β` from every worst-case profile.
pub fn is_live(mech: &Mechanism, shape: Shape, domain: &DomainSpec, target: &Alternative, beta: &Q) -> Result<bool> {
    let cap = budget_of(beta, liveness_base(mech, shape));
    Ok(liveness_cost(mech, shape, domain, target, cap)?.is_some())
}

/// Continuum outcome: `p` iff `φh_p + s_p > φh_r + s_r + τ(1−μ)`.
pub fn nonatomic_eval(profile: &NonatomicProfile, tau: &Q) -> Alternative {
    let q = tau * (rational::one() - profile.mu());
    if profile.v_plus_p() > profile.v_plus_r() + q {
        Alternative::Choice(1)
    } else {
        Alternative::Choice(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Tightness of the arbitrary-participation safety bound.
    SafetyTightness,
    /// No mechanism is 0-safe and 1-live when `3σ + 2μ ≥ 1`.
    ArbitraryLowerBound,
    /// Same for random participation in the continuum when `3σ + μ ≥ 1`.
    RandomLowerBound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)] // built a handful of times per run
pub enum WitnessProfile {
    Finite(Profile),
    Nonatomic(NonatomicProfile),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarialWitness {
    pub theorem: Theorem,
    pub violated: String,
    pub primary: WitnessProfile,
    /// The indistinguishable twin for the lower-bound constructions.
    pub twin: Option<WitnessProfile>,
    /// Gap between the safety bound and the requested `α`.
    pub epsilon: Option<Q>,
    /// Excess of the honest active `p` fraction over the tipping point.
    pub epsilon_prime: Option<Q>,
    pub s_bar_p: Option<Q>,
    pub h_bar_p: Option<Q>,
}

/// Parameters for [`tightness_witness`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessParams {
    pub sigma: Q,
    pub mu: Q,
    pub tau: Q,
    pub alpha: Q,
}

/// Largest multiple of the common denominator tried when looking for a
/// finite witness.
const MAX_WITNESS_SCALE: usize = 2000;

fn lcm_denominator(xs: &[&Q]) -> usize {
    xs.iter()
        .fold(num_bigint::BigInt::from(1), |a, x| a.lcm(x.denom()))
        .to_usize()
        .unwrap_or(usize::MAX)
}

fn binary_profile(groups: &[(VoterClass, usize, usize)]) -> Result<Profile> {
    let d = DomainSpec::binary("r", "p")?;
    let mut voters = Vec::new();
    for &(class, ballot, count) in groups {
        voters.extend(std::iter::repeat_n(Voter::new(class, Some(Ballot::Choice(ballot))), count));
    }
    Profile::new(d, voters)
}

/// Builds the proof construction for `theorem` and checks it through the rules.
pub fn tightness_witness(theorem: Theorem, params: &WitnessParams) -> Result<AdversarialWitness> {
    let WitnessParams { sigma, mu, tau, alpha } = params;
    let one = rational::one();
    match theorem {
        Theorem::SafetyTightness => {
            let t = guarantees::safety_threshold(Setting::ArbitraryBinary, sigma, mu, tau)?;
            if alpha >= &t {
                return Err(Error::RegimeMismatch(format!("alpha {} is not below the bound {}", rational::format(alpha), rational::format(&t))));
            }
            let step = lcm_denominator(&[sigma, mu]);
            let mech = Mechanism::plain(BaseRule::Majority).with_re(tau.clone()).with_participation(Participation::ActiveOnly);
            let base = Mechanism::plain(BaseRule::Majority);
            let tip = ((&one + tau) * (&one - mu) - rational::int(2) * sigma) / rational::int(2);
            for k in 1..=MAX_WITNESS_SCALE {
                let n = step.saturating_mul(k);
                let Ok(shape) = Shape::from_fractions(n, sigma, mu) else { continue };
                let (a, s, p) = (shape.active_honest(), shape.sybils, shape.passives);
                let q = tau * rational::from_usize(a + s);
                let half = (rational::from_usize(a) - rational::from_usize(s) + q) / rational::int(2);
                let a_p = rational::floor_count(&(half + rational::one()));
                if a_p > a {
                    continue;
                }
                let profile = binary_profile(&[
                    (VoterClass::HonestActive, 1, a_p),
                    (VoterClass::HonestActive, 0, a - a_p),
                    (VoterClass::HonestPassive, 0, p),
                    (VoterClass::Sybil, 1, s),
                ])?;
                if rules::apply(&mech, &profile)? != Alternative::Choice(1) || is_safe(&mech, &base, &profile, alpha)? {
                    continue;
                }
                return Ok(AdversarialWitness {
                    theorem,
                    violated: format!("{}-safety of {mech} w.r.t. {base}", rational::format(alpha)),
                    primary: WitnessProfile::Finite(profile),
                    twin: None,
                    epsilon: Some(&t - alpha),
                    epsilon_prime: Some(rational::frac(a_p as i64, n as i64) - &tip),
                    s_bar_p: None,
                    h_bar_p: None,
                });
            }
            Err(Error::BudgetExceeded(format!("no witness with at most {} voters", step.saturating_mul(MAX_WITNESS_SCALE))))
        }
        Theorem::ArbitraryLowerBound => {
            if sigma * rational::int(3) + mu * rational::int(2) < one {
                return Err(Error::RegimeMismatch("needs 3σ + 2μ ≥ 1".into()));
            }
            let step = lcm_denominator(&[sigma, mu]);
            for k in 1..=MAX_WITNESS_SCALE {
                let n = step.saturating_mul(k);
                let Ok(shape) = Shape::from_fractions(n, sigma, mu) else { continue };
                let (a, s, p) = (shape.active_honest(), shape.sybils, shape.passives);
                let s_bar = a.min(s);
                let v = binary_profile(&[
                    (VoterClass::HonestActive, 1, a),
                    (VoterClass::HonestPassive, 0, p),
                    (VoterClass::Sybil, 0, s),
                ])?;
                let v_bar = binary_profile(&[
                    (VoterClass::HonestActive, 1, a - s_bar),
                    (VoterClass::HonestActive, 0, s_bar),
                    (VoterClass::HonestPassive, 0, p),
                    (VoterClass::Sybil, 1, s_bar),
                    (VoterClass::Sybil, 0, s - s_bar),
                ])?;
                return Ok(AdversarialWitness {
                    theorem,
                    violated: "0-safety on the twin or 1-liveness on the original".into(),
                    primary: WitnessProfile::Finite(v),
                    twin: Some(WitnessProfile::Finite(v_bar)),
                    epsilon: None,
                    epsilon_prime: None,
                    s_bar_p: Some(rational::frac(s_bar as i64, n as i64)),
                    h_bar_p: Some(rational::frac((a - s_bar) as i64, n as i64)),
                });
            }
            Err(Error::UnrealizableShape("no integer population realizes these fractions".into()))
        }
        Theorem::RandomLowerBound => {
            if sigma * rational::int(3) + mu < one {
                return Err(Error::RegimeMismatch("needs 3σ + μ ≥ 1".into()));
            }
            if sigma + mu >= one {
                return Err(Error::DegenerateParams("sigma + mu must be below 1".into()));
            }
            let honest = &one - sigma;
            let phi = (&one - mu - sigma) / &honest;
            let h_plus_p = &phi * &honest;
            let s_bar = rational::min_q(h_plus_p, sigma.clone());
            let h_bar_p = &honest - &s_bar / &phi;
            let v = NonatomicProfile::new(rational::zero(), honest.clone(), sigma.clone(), rational::zero(), phi.clone())?;
            let v_bar = NonatomicProfile::new(&honest - &h_bar_p, h_bar_p.clone(), sigma - &s_bar, s_bar.clone(), phi)?;
            Ok(AdversarialWitness {
                theorem,
                violated: "0-safety on the twin or 1-liveness on the original".into(),
                primary: WitnessProfile::Nonatomic(v),
                twin: Some(WitnessProfile::Nonatomic(v_bar)),
                epsilon: None,
                epsilon_prime: None,
                s_bar_p: Some(s_bar),
                h_bar_p: Some(h_bar_p),
            })
        }
    }
}

/// Result of replaying a lower-bound witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwinCheck {
    /// Visible vote masses `(r, p)` of both profiles.
    pub visible: ((Q, Q), (Q, Q)),
    pub honest_r: Q,
    pub honest_p: Q,
}

impl TwinCheck {
    pub fn indistinguishable(&self) -> bool {
        self.visible.0 == self.visible.1
    }

    pub fn twin_prefers_r(&self) -> bool {
        self.honest_r >= self.honest_p
    }
}

fn visible_masses(w: &WitnessProfile) -> Result<(Q, Q)> {
    Ok(match w {
        WitnessProfile::Finite(p) => {
            let mech = Mechanism::plain(BaseRule::Majority).with_participation(Participation::ActiveOnly);
            let t = rules::evaluate(&mech, p)?.tally;
            let m = |a: usize| t.cast.get(&Ballot::Choice(a)).cloned().unwrap_or_else(rational::zero);
            (m(0), m(1))
        }
        WitnessProfile::Nonatomic(p) => (p.v_plus_r(), p.v_plus_p()),
    })
}

/// Replays a lower-bound witness: visible tallies of both profiles and the
/// honest split of the twin.
pub fn check_twins(w: &AdversarialWitness) -> Result<TwinCheck> {
    let twin = w.twin.as_ref().ok_or_else(|| Error::InvalidParameter("witness has no twin".into()))?;
    let visible = (visible_masses(&w.primary)?, visible_masses(twin)?);
    let (honest_r, honest_p) = match twin {
        WitnessProfile::Finite(p) => {
            let count = |a: usize| {
                rational::from_usize(p.voters().iter().filter(|v| v.class.is_honest() && v.ballot == Some(Ballot::Choice(a))).count())
            };
            (count(0), count(1))
        }
        WitnessProfile::Nonatomic(p) => (p.h_r.clone(), p.h_p.clone()),
    };
    Ok(TwinCheck { visible, honest_r, honest_p })
}

/// On an interval profile: if `τ`-RE-MD⁺ violates `α`-safety w.r.t. MD, the
/// projection onto the violating pair must make `τ`-RE-MJ⁺ violate
/// `α`-safety w.r.t. MJ. Returns whether that implication holds.
pub fn reduction_check(profile: &Profile, tau: &Q, alpha: &Q) -> Result<bool> {
    let DomainSpec::Interval { r } = profile.domain() else {
        return Err(Error::IncompatibleMechanism("reduction check needs an interval profile".into()));
    };
    if !profile.has_private_ballots() {
        return Err(Error::MissingPrivateBallots);
    }
    let md_plus = Mechanism::plain(BaseRule::Median).with_re(tau.clone()).with_participation(Participation::ActiveOnly);
    let Alternative::Position(z) = rules::apply(&md_plus, profile)? else { unreachable!() };
    if &z == r {
        return Ok(true);
    }
    let honest = profile.honest_profile()?;
    let md = Mechanism::plain(BaseRule::Median);
    let inst = Instance::build(&md, &honest, &[])?;
    let (lo, ray_lo, hi, ray_hi) = inst.interval_extremes(budget_of(alpha, honest.n()))?;
    let a = if &z > r {
        if ray_hi || z <= rational::max_q(hi.clone(), r.clone()) {
            return Ok(true);
        }
        rational::max_q(hi, r.clone())
    } else {
        if ray_lo || z >= rational::min_q(lo.clone(), r.clone()) {
            return Ok(true);
        }
        rational::min_q(lo, r.clone())
    };
    let projected = profile.project_to_pair(&a, &z)?;
    let mj_plus = Mechanism::plain(BaseRule::Majority).with_re(tau.clone()).with_participation(Participation::ActiveOnly);
    let mj = Mechanism::plain(BaseRule::Majority);
    Ok(!is_safe(&mj_plus, &mj, &projected, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::build_profile;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn mech(s: &str) -> Mechanism {
        s.parse().unwrap()
    }

    fn bin() -> DomainSpec {
        DomainSpec::binary("r", "p").unwrap()
    }

    fn shape(n: usize, s: usize, p: usize) -> Shape {
        Shape::new(n, s, p).unwrap()
    }

    #[test]
    fn fig2_range() {
        let h = binary_profile(&[(VoterClass::HonestActive, 0, 2), (VoterClass::HonestActive, 1, 1)]).unwrap();
        let r = outcome_range(&mech("mj"), &h, &frac(1, 3)).unwrap();
        assert_eq!(r.reachable, [Alternative::Choice(0), Alternative::Choice(1)].into_iter().collect());
        let r0 = outcome_range(&mech("mj"), &h, &int(0)).unwrap();
        assert_eq!(r0.reachable, [Alternative::Choice(0)].into_iter().collect());
    }

    #[test]
    fn table_safety_column() {
        let d = bin();
        let mj = mech("mj");
        assert_eq!(min_alpha(&mj, &mj, shape(5, 2, 0), &d).unwrap(), frac(1, 3));
        assert_eq!(min_alpha(&mech("smj:2/5"), &mj, shape(5, 2, 0), &d).unwrap(), int(0));
        assert_eq!(min_alpha(&mech("mj mode:active"), &mj, shape(5, 2, 2), &d).unwrap(), frac(2, 3));
        assert_eq!(min_alpha(&mech("smj:2/5 mode:active"), &mj, shape(5, 2, 2), &d).unwrap(), frac(1, 3));
        assert_eq!(min_alpha(&mech("mj re:4/5 mode:active"), &mj, shape(5, 2, 2), &d).unwrap(), frac(1, 3));
        assert_eq!(min_alpha(&mj, &mj, shape(4, 0, 0), &d).unwrap(), int(0));
    }

    #[test]
    fn table_liveness_column() {
        let d = bin();
        let p = Alternative::Choice(1);
        assert_eq!(min_beta(&mech("mj"), shape(5, 2, 0), &d, &p).unwrap(), Some(int(1)));
        assert_eq!(min_beta(&mech("smj:2/5"), shape(5, 2, 0), &d, &p).unwrap(), Some(frac(19, 3)));
        assert_eq!(min_beta(&mech("mj mode:active"), shape(5, 2, 2), &d, &p).unwrap(), Some(int(3)));
        assert_eq!(min_beta(&mech("smj:2/5 mode:active"), shape(5, 2, 2), &d, &p).unwrap(), Some(int(19)));
    }

    #[test]
    fn is_live_examples() {
        let d = bin();
        let p = Alternative::Choice(1);
        assert!(is_live(&mech("mj mode:active"), shape(5, 2, 2), &d, &p, &int(3)).unwrap());
        assert!(!is_live(&mech("mj mode:active"), shape(5, 2, 2), &d, &p, &int(2)).unwrap());
        assert!(is_live(&mech("mj"), shape(5, 2, 0), &d, &p, &int(1)).unwrap());
        assert!(!is_live(&mech("mj"), shape(5, 2, 0), &d, &p, &frac(2, 3)).unwrap());
    }

    fn example3() -> Profile {
        binary_profile(&[
            (VoterClass::HonestActive, 0, 1),
            (VoterClass::HonestPassive, 0, 1),
            (VoterClass::HonestPassive, 1, 1),
            (VoterClass::Sybil, 1, 2),
        ])
        .unwrap()
    }

    #[test]
    fn smj_liveness_boundary_on_example3() {
        // All visible voters on r: one honest active, two sybils.
        let v = binary_profile(&[(VoterClass::HonestActive, 0, 1), (VoterClass::HonestPassive, 0, 2), (VoterClass::Sybil, 0, 2)]).unwrap();
        let m = mech("smj:2/5 mode:active");
        assert!(outcome_range(&m, &v, &frac(19, 1)).unwrap().reachable.contains(&Alternative::Choice(1)));
        assert!(!outcome_range(&m, &v, &frac(18, 1)).unwrap().reachable.contains(&Alternative::Choice(1)));
    }

    #[test]
    fn is_safe_examples() {
        let v = example3();
        let mj = mech("mj");
        // Honest ballots r, r, p: moving one voter is enough to reach p.
        assert!(is_safe(&mech("mj mode:active"), &mj, &v, &frac(1, 3)).unwrap());
        assert!(!is_safe(&mech("mj mode:active"), &mj, &v, &frac(1, 4)).unwrap());
        assert_eq!(min_alpha_profile(&mech("mj mode:active"), &mj, &v).unwrap(), frac(1, 3));
        assert!(is_safe(&mech("mj re:2/3 mode:active"), &mj, &v, &int(0)).unwrap());
        let no_ballot = build_profile(
            bin(),
            vec![(VoterClass::HonestActive, Some(Ballot::Choice(0))), (VoterClass::HonestPassive, None)],
        )
        .unwrap();
        assert_eq!(is_safe(&mj, &mj, &no_ballot, &int(0)), Err(Error::MissingPrivateBallots));
    }

    #[test]
    fn imj_example_needs_sixteen_movers() {
        let d = DomainSpec::hypercube(3, &[0, 0, 0]).unwrap();
        let mut e = Vec::new();
        for pt in [0b100u64, 0b010, 0b001] {
            e.extend(std::iter::repeat_n((VoterClass::HonestActive, Some(Ballot::Point(pt))), 20));
        }
        e.extend(std::iter::repeat_n((VoterClass::Sybil, Some(Ballot::Point(0b111))), 21));
        let p = build_profile(d, e).unwrap();
        let imj = mech("imj");
        // With ties going to r, 15 movers leave every coordinate at 20 to 20.
        assert_eq!(min_alpha_profile(&imj, &imj, &p).unwrap(), frac(16, 60));
    }

    #[test]
    fn interval_range_contains_honest_median_and_grows() {
        let p = build_profile(
            DomainSpec::interval(int(0)),
            [1, 4, 9].iter().map(|x| (VoterClass::HonestActive, Some(Ballot::Position(int(*x))))).collect(),
        )
        .unwrap();
        let md = mech("md");
        let r0 = outcome_range(&md, &p, &int(0)).unwrap();
        assert_eq!(r0.reachable, [Alternative::Position(int(4))].into_iter().collect());
        let r1 = outcome_range(&md, &p, &frac(1, 3)).unwrap();
        assert!(r1.reachable.is_superset(&r0.reachable));
        assert!(r1.reachable.contains(&Alternative::Position(int(9))));
        let r2 = outcome_range(&md, &p, &frac(2, 3)).unwrap();
        assert!(r2.ray_high && r2.ray_low);
    }

    #[test]
    fn safety_tightness_witness() {
        let params = WitnessParams { sigma: frac(1, 5), mu: frac(1, 5), tau: int(0), alpha: frac(1, 10) };
        let w = tightness_witness(Theorem::SafetyTightness, &params).unwrap();
        let WitnessProfile::Finite(p) = &w.primary else { panic!() };
        let m = mech("mj mode:active");
        assert_eq!(rules::apply(&m, p).unwrap(), Alternative::Choice(1));
        assert!(!is_safe(&m, &mech("mj"), p, &params.alpha).unwrap());
        assert!(w.epsilon_prime.unwrap() > int(0));
        let at_bound = WitnessParams { alpha: frac(1, 4), ..params };
        assert!(matches!(tightness_witness(Theorem::SafetyTightness, &at_bound), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn arbitrary_lower_bound_witness() {
        let params = WitnessParams { sigma: frac(1, 4), mu: frac(3, 20), tau: int(0), alpha: int(0) };
        let w = tightness_witness(Theorem::ArbitraryLowerBound, &params).unwrap();
        let c = check_twins(&w).unwrap();
        assert!(c.indistinguishable());
        assert_eq!((c.honest_r.clone(), c.honest_p.clone()), (int(8), int(7)));
        assert!(c.twin_prefers_r());
        let low = WitnessParams { sigma: frac(1, 10), mu: frac(1, 10), ..params };
        assert!(matches!(tightness_witness(Theorem::ArbitraryLowerBound, &low), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn random_lower_bound_witness() {
        let params = WitnessParams { sigma: frac(1, 4), mu: frac(1, 4), tau: int(0), alpha: int(0) };
        let w = tightness_witness(Theorem::RandomLowerBound, &params).unwrap();
        let c = check_twins(&w).unwrap();
        assert!(c.indistinguishable());
        assert!(c.twin_prefers_r());
        let (WitnessProfile::Nonatomic(v), Some(WitnessProfile::Nonatomic(vb))) = (&w.primary, &w.twin) else { panic!() };
        for t in [int(0), frac(1, 2)] {
            assert_eq!(nonatomic_eval(v, &t), nonatomic_eval(vb, &t));
        }
    }

    #[test]
    fn nonatomic_examples() {
        let tie = NonatomicProfile::new(frac(1, 2), frac(1, 2), int(0), int(0), frac(1, 2)).unwrap();
        assert_eq!(nonatomic_eval(&tie, &int(0)), Alternative::Choice(0));
        let all_p = NonatomicProfile::new(int(0), int(1), int(0), int(0), int(1)).unwrap();
        assert_eq!(nonatomic_eval(&all_p, &frac(9, 10)), Alternative::Choice(1));
        // σ = 0.3 on p, μ = 0: p wins iff h_r − h_p < 0.3, and a tie keeps r.
        let just_above = NonatomicProfile::new(frac(49, 100), frac(21, 100), int(0), frac(3, 10), int(1)).unwrap();
        assert_eq!(nonatomic_eval(&just_above, &int(0)), Alternative::Choice(1));
        let below = NonatomicProfile::new(frac(50, 100), frac(20, 100), int(0), frac(3, 10), int(1)).unwrap();
        assert_eq!(nonatomic_eval(&below, &int(0)), Alternative::Choice(0));
    }

    #[test]
    fn reduction_hand_instance() {
        let mut e: Vec<_> = [4, 4, 12].iter().map(|x| (VoterClass::HonestActive, Some(Ballot::Position(int(*x))))).collect();
        e.extend([20, 20].iter().map(|x| (VoterClass::Sybil, Some(Ballot::Position(int(*x))))));
        let p = build_profile(DomainSpec::interval(int(4)), e).unwrap();
        assert!(reduction_check(&p, &int(0), &int(0)).unwrap());
        let md_plus = mech("md mode:active");
        assert!(!is_safe(&md_plus, &mech("md"), &p, &int(0)).unwrap());
        let proj = p.project_to_pair(&int(4), &int(12)).unwrap();
        assert!(!is_safe(&mech("mj mode:active"), &mech("mj"), &proj, &int(0)).unwrap());
    }

    proptest! {
        #[test]
        fn range_is_monotone_in_gamma(r in 0usize..4, p in 0usize..4, s in 0usize..3, k in 0i64..4) {
            prop_assume!(r + p > 0);
            let v = binary_profile(&[(VoterClass::HonestActive, 0, r), (VoterClass::HonestActive, 1, p), (VoterClass::Sybil, 1, s)]).unwrap();
            let m = mech("smj:1/4");
            let a = outcome_range(&m, &v, &frac(k, 4)).unwrap();
            let b = outcome_range(&m, &v, &frac(k + 1, 4)).unwrap();
            prop_assert!(a.reachable.is_subset(&b.reachable));
            let zero = outcome_range(&m, &v, &int(0)).unwrap();
            prop_assert_eq!(zero.reachable.len(), 1);
        }

        #[test]
        fn reduction_holds(xs in prop::collection::vec(-6i64..6, 1..6), ps in prop::collection::vec(-6i64..6, 0..4), ss in prop::collection::vec(-6i64..6, 0..4), r in -6i64..6, t in 0i64..3, a in 0i64..3) {
            let mut e: Vec<_> = xs.iter().map(|x| (VoterClass::HonestActive, Some(Ballot::Position(int(*x))))).collect();
            e.extend(ps.iter().map(|x| (VoterClass::HonestPassive, Some(Ballot::Position(int(*x))))));
            e.extend(ss.iter().map(|x| (VoterClass::Sybil, Some(Ballot::Position(int(*x))))));
            let p = build_profile(DomainSpec::interval(int(r)), e).unwrap();
            prop_assert!(reduction_check(&p, &frac(t, 4), &frac(a, 4)).unwrap());
        }
    }
}
