//! Nearest-active-voter delegation on the line and the weighted median it
//! feeds.

use num_traits::Signed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::population::{Ballot, DomainKind, DomainSpec, Profile, Voter, VoterClass};
use crate::rational::{self, Q};
use crate::rules::{self, Tally};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProxyOptions {
    /// Give `r` a unit of its own weight, like every active voter, instead of
    /// only its followers plus the virtual mass.
    pub r_base_weight_one: bool,
}

/// Who holds a delegated weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    StatusQuo,
    /// Index into the profile's voter list.
    Voter(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delegate {
    pub entity: Entity,
    pub position: Q,
    /// Own unit (if any) plus followers, excluding the virtual mass.
    pub weight: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelegationWeights {
    /// `r` first, then active voters in profile order.
    pub delegates: Vec<Delegate>,
    /// Virtual mass `τ|V|`, held by `r`.
    pub q: Q,
    /// For each voter, the entity that carries its weight.
    pub assignment: Vec<Entity>,
}

impl DelegationWeights {
    /// `(position, weight)` list with `q` folded into `r`'s entry.
    pub fn entries(&self) -> Vec<(Q, Q)> {
        self.delegates
            .iter()
            .map(|d| {
                let w = if d.entity == Entity::StatusQuo { &d.weight + &self.q } else { d.weight.clone() };
                (d.position.clone(), w)
            })
            .collect()
    }

    pub fn total(&self) -> Q {
        self.delegates.iter().fold(self.q.clone(), |a, d| a + &d.weight)
    }
}

fn interval_r(domain: &DomainSpec) -> Result<Q> {
    match domain {
        DomainSpec::Interval { r } => Ok(r.clone()),
        _ => Err(Error::IncompatibleMechanism("proxy voting needs an interval domain".into())),
    }
}

fn position_of(v: &Voter) -> Result<Q> {
    v.ballot
        .as_ref()
        .and_then(|b| b.position().cloned())
        .ok_or(Error::MissingPrivateBallots)
}

/// Nearest-entity lookup over the distinct positions of `r` and the active
/// voters. Equal distances go to the entity closer to `r`, then to `r`.
struct Nearest {
    r: Q,
    /// Sorted distinct positions with the entity representing each.
    slots: Vec<(Q, Entity)>,
}

impl Nearest {
    fn new(r: &Q, actives: impl Iterator<Item = (usize, Q)>) -> Self {
        let mut slots: Vec<(Q, Entity)> = vec![(r.clone(), Entity::StatusQuo)];
        slots.extend(actives.map(|(i, p)| (p, Entity::Voter(i))));
        // Stable sort keeps `r` ahead of voters at its position, and earlier
        // voters ahead of later ones.
        slots.sort_by(|a, b| a.0.cmp(&b.0));
        slots.dedup_by(|later, earlier| later.0 == earlier.0);
        Nearest { r: r.clone(), slots }
    }

    fn find(&self, s: &Q) -> (Q, Entity) {
        let i = self.slots.partition_point(|(p, _)| p < s);
        let mut best: Option<&(Q, Entity)> = None;
        for j in [i.wrapping_sub(1), i] {
            let Some(c) = self.slots.get(j) else { continue };
            best = match best {
                None => Some(c),
                Some(b) => {
                    let kb = ((&b.0 - s).abs(), (&b.0 - &self.r).abs(), b.1 != Entity::StatusQuo);
                    let kc = ((&c.0 - s).abs(), (&c.0 - &self.r).abs(), c.1 != Entity::StatusQuo);
                    Some(if kc < kb { c } else { b })
                }
            };
        }
        best.cloned().expect("r is always a slot")
    }
}

/// Assigns each passive voter to the nearest active voter or to `r`.
pub fn delegate(profile: &Profile, re_tau: &Q, opts: ProxyOptions) -> Result<DelegationWeights> {
    let r = interval_r(profile.domain())?;
    let voters = profile.voters();
    let mut actives = Vec::new();
    for (i, v) in voters.iter().enumerate() {
        if v.class.is_active() {
            actives.push((i, position_of(v)?));
        }
    }
    let nearest = Nearest::new(&r, actives.iter().cloned());
    let base_r = if opts.r_base_weight_one { rational::one() } else { rational::zero() };
    let mut delegates = vec![Delegate { entity: Entity::StatusQuo, position: r.clone(), weight: base_r }];
    let mut slot_of = std::collections::HashMap::new();
    slot_of.insert(Entity::StatusQuo, 0usize);
    for (i, p) in &actives {
        slot_of.insert(Entity::Voter(*i), delegates.len());
        delegates.push(Delegate { entity: Entity::Voter(*i), position: p.clone(), weight: rational::one() });
    }
    let mut assignment = Vec::with_capacity(voters.len());
    for (i, v) in voters.iter().enumerate() {
        if v.class.is_active() {
            assignment.push(Entity::Voter(i));
            continue;
        }
        let (_, e) = nearest.find(&position_of(v)?);
        delegates[slot_of[&e]].weight += rational::one();
        assignment.push(e);
    }
    let q = re_tau * rational::from_usize(profile.n());
    Ok(DelegationWeights { delegates, q, assignment })
}

/// `min{u_i : Σ_{j≤i} w_j ≥ Σ_{j>i} w_j}` over entries sorted by position.
pub fn weighted_median(entries: &[(Q, Q)]) -> Result<Q> {
    let mut sorted: Vec<&(Q, Q)> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let total = sorted.iter().fold(rational::zero(), |a, (_, w)| a + w);
    if sorted.is_empty() || !total.is_positive() {
        return Err(Error::EmptyEntries);
    }
    let mut prefix = rational::zero();
    for (u, w) in &sorted {
        prefix += w;
        if &prefix + &prefix >= total {
            return Ok(u.clone());
        }
    }
    Ok(sorted.last().expect("non-empty").0.clone())
}

/// Outcome of `τ`-RE-MD with proxy delegation.
pub fn md_proxy(profile: &Profile, re_tau: &Q) -> Result<Q> {
    md_proxy_with(profile, re_tau, ProxyOptions::default())
}

pub fn md_proxy_with(profile: &Profile, re_tau: &Q, opts: ProxyOptions) -> Result<Q> {
    weighted_median(&delegate(profile, re_tau, opts)?.entries())
}

/// Delegated weights as a tally over positions; `q` stays separate.
pub fn proxy_tally(profile: &Profile, re_tau: &Q, opts: ProxyOptions) -> Result<Tally> {
    let w = delegate(profile, re_tau, opts)?;
    let mut t = Tally::new(w.q.clone(), profile.n());
    for d in w.delegates {
        t.add(Ballot::Position(d.position), d.weight);
    }
    Ok(t)
}

/// Weighted median of the whole population (passives at their own positions)
/// with the virtual mass at `r`.
pub fn full_population_median(profile: &Profile, re_tau: &Q) -> Result<Q> {
    let r = interval_r(profile.domain())?;
    let mut entries = Vec::with_capacity(profile.n() + 1);
    for v in profile.voters() {
        entries.push((position_of(v)?, rational::one()));
    }
    entries.push((r, re_tau * rational::from_usize(profile.n())));
    weighted_median(&entries)
}

/// Position of the entity (active voter or `r`) a voter at `s` would follow.
pub fn nearest_entity(profile: &Profile, s: &Q) -> Result<Q> {
    let r = interval_r(profile.domain())?;
    let mut actives = Vec::new();
    for (i, v) in profile.voters().iter().enumerate() {
        if v.class.is_active() {
            actives.push((i, position_of(v)?));
        }
    }
    Ok(Nearest::new(&r, actives.into_iter()).find(s).0)
}

/// Diagnostic quantities for one proxy election, in coordinates where the
/// honest median lies at or above `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxyAnalysis {
    /// True if positions were mirrored around `r` to put `h*` above it.
    pub reflected: bool,
    pub r: Q,
    pub z: Q,
    pub h_star: Q,
    /// Position of the active voter closest to `h*`.
    pub i_star: Q,
    pub d_star: Q,
    /// Outcome if every voter were active.
    pub h_hat: Q,
    pub h_hat_over: Option<Q>,
    pub h_hat_under: Option<Q>,
    pub n: usize,
    pub honest: usize,
    pub sybils: usize,
    pub tau: Q,
    passive_positions: Vec<Q>,
}

impl ProxyAnalysis {
    /// Signed count of passive honest voters in `(s, t]`; negative when `t < s`.
    pub fn j(&self, s: &Q, t: &Q) -> i64 {
        if s == t {
            return 0;
        }
        let (lo, hi, sign) = if s < t { (s, t, 1) } else { (t, s, -1) };
        let a = self.passive_positions.partition_point(|p| p <= lo);
        let b = self.passive_positions.partition_point(|p| p <= hi);
        sign * (b - a) as i64
    }

    /// Passive voters between `ĥ` and the next active honest voter above it
    /// (all passives above `ĥ` if there is none).
    pub fn j_hat(&self) -> i64 {
        match &self.h_hat_over {
            Some(o) => self.j(&self.h_hat, o),
            None => {
                let a = self.passive_positions.partition_point(|p| p <= &self.h_hat);
                (self.passive_positions.len() - a) as i64
            }
        }
    }

    /// The event `|J(ĥ, overline-ĥ)| ≤ c|H|`.
    pub fn y_c(&self, c: &Q) -> bool {
        rational::int(self.j_hat().abs()) <= c * rational::from_usize(self.honest)
    }

    pub fn sigma(&self) -> Q {
        rational::frac(self.sybils as i64, self.n as i64)
    }

    /// For `τ ≥ σ`: `z ∈ [r, h* + d*]`. Vacuously true otherwise.
    pub fn z_within_h_star_envelope(&self) -> bool {
        self.tau < self.sigma() || (self.z >= self.r && self.z <= &self.h_star + &self.d_star)
    }

    /// `z ≤ overline-ĥ` (true when no honest active voter lies above `ĥ`).
    pub fn z_below_h_hat_over(&self) -> bool {
        self.h_hat_over.as_ref().is_none_or(|o| &self.z <= o)
    }

    /// `J(h*, ĥ) ≤ (σ − τ)|V|/2` whenever `ĥ ≠ r`.
    pub fn j_bound_holds(&self) -> bool {
        if self.h_hat == self.r {
            return true;
        }
        let bound = (self.sigma() - &self.tau) * rational::from_usize(self.n) / rational::int(2);
        rational::int(self.j(&self.h_star, &self.h_hat)) <= bound
    }
}

fn mirror(profile: &Profile, r: &Q) -> Result<Profile> {
    let voters = profile
        .voters()
        .iter()
        .map(|v| {
            let ballot = v.ballot.as_ref().map(|b| Ballot::Position(r * rational::int(2) - b.position().expect("interval")));
            Voter::new(v.class, ballot)
        })
        .collect();
    Profile::new(profile.domain().clone(), voters)
}

/// Computes every [`ProxyAnalysis`] field; passives need their positions.
pub fn analyze(profile: &Profile, re_tau: &Q) -> Result<ProxyAnalysis> {
    let r = interval_r(profile.domain())?;
    if !profile.has_private_ballots() {
        return Err(Error::MissingPrivateBallots);
    }
    let honest: Vec<(Q, Q)> = profile
        .voters()
        .iter()
        .filter(|v| v.class.is_honest())
        .map(|v| Ok((position_of(v)?, rational::one())))
        .collect::<Result<_>>()?;
    let h_star = rules::median(honest, &r, &rational::zero())?;
    if h_star < r {
        let mut a = analyze(&mirror(profile, &r)?, re_tau)?;
        a.reflected = true;
        return Ok(a);
    }
    let z = md_proxy(profile, re_tau)?;
    let mut active_pos = Vec::new();
    let mut active_honest = Vec::new();
    let mut passive_positions = Vec::new();
    for v in profile.voters() {
        let p = position_of(v)?;
        match v.class {
            VoterClass::HonestActive => {
                active_pos.push(p.clone());
                active_honest.push(p);
            }
            VoterClass::Sybil => active_pos.push(p),
            VoterClass::HonestPassive => passive_positions.push(p),
        }
    }
    passive_positions.sort();
    let i_star = active_pos
        .iter()
        .min_by(|a, b| ((*a - &h_star).abs(), (*a - &r).abs()).cmp(&((*b - &h_star).abs(), (*b - &r).abs())))
        .cloned()
        .expect("at least one honest active voter");
    let d_star = (&i_star - &h_star).abs();
    let h_hat = full_population_median(profile, re_tau)?;
    let h_hat_over = active_honest.iter().filter(|p| **p >= h_hat).min().cloned();
    let h_hat_under = active_honest.iter().filter(|p| **p <= h_hat).max().cloned();
    Ok(ProxyAnalysis {
        reflected: false,
        r,
        z,
        h_star,
        i_star,
        d_star,
        h_hat,
        h_hat_over,
        h_hat_under,
        n: profile.n(),
        honest: profile.honest_count(),
        sybils: profile.sybil_count(),
        tau: re_tau.clone(),
        passive_positions,
    })
}

/// Honest and sybil positions from which random-participation profiles are drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxyTemplate {
    pub r: Q,
    pub honest: Vec<Q>,
    pub sybils: Vec<Q>,
}

impl ProxyTemplate {
    /// Profile in which exactly the honest voters listed in `active` vote.
    pub fn profile_with_active(&self, active: &[usize]) -> Result<Profile> {
        let mut is_active = vec![false; self.honest.len()];
        for &i in active {
            is_active[i] = true;
        }
        let mut voters: Vec<Voter> = self
            .honest
            .iter()
            .zip(is_active)
            .map(|(p, a)| {
                let class = if a { VoterClass::HonestActive } else { VoterClass::HonestPassive };
                Voter::new(class, Some(Ballot::Position(p.clone())))
            })
            .collect();
        voters.extend(self.sybils.iter().map(|p| Voter::new(VoterClass::Sybil, Some(Ballot::Position(p.clone())))));
        Profile::new(DomainSpec::interval(self.r.clone()), voters)
    }
}

/// Draws `n_plus` active honest voters uniformly without replacement, runs
/// the proxy mechanism and analyses the result.
pub fn sample_and_run<R: Rng + ?Sized>(
    template: &ProxyTemplate,
    n_plus: usize,
    re_tau: &Q,
    rng: &mut R,
) -> Result<(Q, ProxyAnalysis)> {
    let h = template.honest.len();
    if n_plus > h {
        return Err(Error::SampleTooLarge { requested: n_plus, available: h });
    }
    if n_plus == 0 {
        return Err(Error::NoActiveHonest);
    }
    let chosen = rand::seq::index::sample(rng, h, n_plus).into_vec();
    let profile = template.profile_with_active(&chosen)?;
    debug_assert_eq!(profile.domain().kind(), DomainKind::Interval);
    let a = analyze(&profile, re_tau)?;
    let z = md_proxy(&profile, re_tau)?;
    Ok((z, a))
}

/// [`sample_and_run`] with a generator seeded from `seed`.
pub fn sample_and_run_seeded(template: &ProxyTemplate, n_plus: usize, re_tau: &Q, seed: u64) -> Result<(Q, ProxyAnalysis)> {
    sample_and_run(template, n_plus, re_tau, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::build_profile;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn interval(r: i64, honest_active: &[i64], passive: &[i64], sybil: &[i64]) -> Profile {
        let mut e = Vec::new();
        for (class, xs) in [
            (VoterClass::HonestActive, honest_active),
            (VoterClass::HonestPassive, passive),
            (VoterClass::Sybil, sybil),
        ] {
            e.extend(xs.iter().map(|x| (class, Some(Ballot::Position(int(*x))))));
        }
        build_profile(DomainSpec::interval(int(r)), e).unwrap()
    }

    fn fig4() -> Profile {
        interval(4, &[5, 13], &[2, 7, 11, 12, 12, 16, 17], &[8, 15, 15])
    }

    fn weight_at(w: &DelegationWeights, pos: i64) -> Q {
        w.delegates.iter().filter(|d| d.position == int(pos)).fold(int(0), |a, d| a + &d.weight)
    }

    #[test]
    fn fig4_delegation() {
        let w = delegate(&fig4(), &frac(1, 4), ProxyOptions::default()).unwrap();
        // The passive at 2 follows r; 11, 12, 12 follow the honest voter at 13.
        assert_eq!(w.assignment[2], Entity::StatusQuo);
        assert_eq!(weight_at(&w, 4), int(1));
        assert_eq!(weight_at(&w, 13), int(4));
        assert_eq!(w.q, int(3));
        assert_eq!(w.total(), int(15));
    }

    #[test]
    fn fig4_outcome_and_analysis() {
        let p = fig4();
        assert_eq!(md_proxy(&p, &frac(1, 4)).unwrap(), int(13));
        // A unit of own weight for r tips the even total of 16 down to 8.
        assert_eq!(md_proxy_with(&p, &frac(1, 4), ProxyOptions { r_base_weight_one: true }).unwrap(), int(8));
        let a = analyze(&p, &frac(1, 4)).unwrap();
        assert_eq!(a.h_star, int(12));
        assert_eq!(a.i_star, int(13));
        assert_eq!(a.d_star, int(1));
        assert_eq!(a.h_hat, int(11));
        assert_eq!(a.h_hat_over, Some(int(13)));
        assert_eq!(a.h_hat_under, Some(int(5)));
        assert_eq!(a.j(&int(11), &int(13)), 2);
        assert_eq!(a.j(&int(13), &int(11)), -2);
        assert!(!a.reflected);
    }

    #[test]
    fn passive_on_an_active_voter_follows_it() {
        let p = interval(0, &[5], &[5], &[]);
        let w = delegate(&p, &int(0), ProxyOptions::default()).unwrap();
        assert_eq!(weight_at(&w, 5), int(2));
    }

    #[test]
    fn distance_ties_go_toward_r() {
        // Passive at 7 is equidistant from 5 and 9; 5 is closer to r = 0.
        let p = interval(0, &[5, 9], &[7], &[]);
        let w = delegate(&p, &int(0), ProxyOptions::default()).unwrap();
        assert_eq!(weight_at(&w, 5), int(2));
        // Passive at 2 is equidistant from r and the voter at 4.
        let p = interval(0, &[4], &[2], &[]);
        let w = delegate(&p, &int(0), ProxyOptions::default()).unwrap();
        assert_eq!(w.assignment[1], Entity::StatusQuo);
    }

    #[test]
    fn weighted_median_examples() {
        assert_eq!(weighted_median(&[(int(9), int(5))]).unwrap(), int(9));
        let e = [(int(3), int(1)), (int(1), int(1)), (int(2), int(1))];
        assert_eq!(weighted_median(&e).unwrap(), int(2));
        assert_eq!(weighted_median(&[(int(0), int(1)), (int(10), int(1))]).unwrap(), int(0));
        assert_eq!(weighted_median(&[]), Err(Error::EmptyEntries));
    }

    #[test]
    fn all_active_with_odd_mass_is_the_median() {
        let p = interval(4, &[1, 6, 9, 12, 20], &[], &[]);
        assert_eq!(md_proxy(&p, &int(0)).unwrap(), int(9));
    }

    #[test]
    fn single_active_voter_collects_nearby_passives() {
        let p = interval(0, &[10], &[8, 9, 12, 30], &[]);
        assert_eq!(md_proxy(&p, &int(0)).unwrap(), int(10));
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let t = ProxyTemplate {
            r: int(0),
            honest: (1..=50).map(int).collect(),
            sybils: vec![int(100); 5],
        };
        let a = sample_and_run_seeded(&t, 10, &frac(1, 10), 7).unwrap();
        let b = sample_and_run_seeded(&t, 10, &frac(1, 10), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            sample_and_run_seeded(&t, 51, &int(0), 1),
            Err(Error::SampleTooLarge { requested: 51, available: 50 })
        );
        let full = sample_and_run_seeded(&t, 50, &frac(1, 10), 3).unwrap();
        let all = t.profile_with_active(&(0..50).collect::<Vec<_>>()).unwrap();
        let plain = rules::apply(&"md re:1/10".parse().unwrap(), &all).unwrap();
        assert_eq!(crate::population::Alternative::Position(full.0), plain);
    }

    #[test]
    fn one_active_voter_gives_it_or_r() {
        let t = ProxyTemplate { r: int(0), honest: (1..=20).map(int).collect(), sybils: vec![] };
        for seed in 0..20 {
            let (z, _) = sample_and_run_seeded(&t, 1, &int(0), seed).unwrap();
            let chosen = t.honest.contains(&z);
            assert!(chosen || z == int(0));
        }
    }

    fn arb_instance() -> impl Strategy<Value = Profile> {
        (
            -10i64..10,
            prop::collection::vec(-15i64..15, 1..6),
            prop::collection::vec(-15i64..15, 0..10),
            prop::collection::vec(-15i64..15, 0..5),
        )
            .prop_map(|(r, a, p, s)| interval(r, &a, &p, &s))
    }

    proptest! {
        #[test]
        fn proxy_outcome_is_nearest_entity_to_full_median(p in arb_instance(), t in 0i64..5) {
            let tau = frac(t, 4);
            let m = full_population_median(&p, &tau).unwrap();
            prop_assert_eq!(md_proxy(&p, &tau).unwrap(), nearest_entity(&p, &m).unwrap());
        }

        #[test]
        fn weight_is_conserved(p in arb_instance(), t in 0i64..5) {
            let tau = frac(t, 4);
            let w = delegate(&p, &tau, ProxyOptions::default()).unwrap();
            let n = rational::from_usize(p.n());
            prop_assert_eq!(w.total(), &n + &tau * &n);
        }

        #[test]
        fn j_is_antisymmetric(p in arb_instance(), s in -16i64..16, t in -16i64..16) {
            let a = analyze(&p, &int(0)).unwrap();
            prop_assert_eq!(a.j(&int(s), &int(t)), -a.j(&int(t), &int(s)));
        }

        #[test]
        fn outcome_stays_below_next_honest_above_h_hat(p in arb_instance(), t in 0i64..5) {
            let a = analyze(&p, &frac(t, 4)).unwrap();
            prop_assert!(a.z_below_h_hat_over());
            if let (Some(o), Some(u)) = (&a.h_hat_over, &a.h_hat_under) {
                prop_assert!(o >= &a.h_hat && &a.h_hat >= u);
            }
        }
    }
}
