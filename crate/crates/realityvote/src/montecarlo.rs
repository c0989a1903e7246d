//! Random-participation experiments.
//!
//! A template is a profile in which every honest voter carries a ballot.
//! Each trial draws `n⁺` honest voters uniformly without replacement to be
//! active; the rest become passive. Trial `t` uses its own ChaCha8 stream
//! (stream `t` under key `seed`), so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::betweenness::BetweenRegion;
use crate::error::{Error, Result};
use crate::guarantees::{self, Setting};
use crate::population::{Alternative, Ballot, DomainKind, DomainSpec, Profile, Voter, VoterClass};
use crate::proxy::{self, ProxyTemplate};
use crate::rational::{self, Q};
use crate::rules::{self, BaseRule, Mechanism, Participation};
use crate::verifier;

/// Number of standard errors allowed above the analytic bound.
pub const GATE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Experiment {
    pub template: Profile,
    pub mechanism: Mechanism,
    pub base: Mechanism,
    pub alpha_prime: Q,
    pub trials: usize,
    pub seed: u64,
    pub n_plus: usize,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.alpha_prime <= rational::zero() {
            return Err(Error::InvalidParameter("alpha' must be positive".into()));
        }
        if !self.template.has_private_ballots() {
            return Err(Error::MissingPrivateBallots);
        }
        let h = self.template.honest_count();
        if self.n_plus > h {
            return Err(Error::SampleTooLarge { requested: self.n_plus, available: h });
        }
        if self.n_plus == 0 {
            return Err(Error::NoActiveHonest);
        }
        Ok(())
    }

    /// Sybil fraction of the template.
    pub fn sigma(&self) -> Q {
        self.template.sigma()
    }

    /// Passive fraction implied by `n⁺`.
    pub fn mu(&self) -> Q {
        rational::frac((self.template.honest_count() - self.n_plus) as i64, self.template.n() as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub violation_count: usize,
    pub trials: usize,
    pub empirical_rate: Q,
    /// Analytic upper bound on the violation probability.
    pub bound_value: f64,
    /// Binomial standard error at the bound, `√(b(1−b)/T)`.
    pub standard_error: f64,
    /// Trials in which the auxiliary event held (`Y_c` for proxy runs).
    pub event_count: Option<usize>,
}

impl TrialStats {
    fn new(violation_count: usize, trials: usize, bound_value: f64, event_count: Option<usize>) -> Self {
        let b = bound_value.clamp(0.0, 1.0);
        TrialStats {
            violation_count,
            trials,
            empirical_rate: rational::frac(violation_count as i64, trials as i64),
            bound_value,
            standard_error: (b * (1.0 - b) / trials as f64).sqrt(),
            event_count,
        }
    }

    pub fn rate(&self) -> f64 {
        rational::to_f64(&self.empirical_rate)
    }

    /// `empirical ≤ bound + 3·s.e.`
    pub fn passes(&self) -> bool {
        self.rate() <= self.bound_value + GATE_SIGMAS * self.standard_error
    }
}

/// True if each rate is at most the previous one plus three combined
/// standard errors, using empirical variances.
pub fn nonincreasing_within_se(stats: &[TrialStats]) -> bool {
    let var = |s: &TrialStats| {
        let p = s.rate();
        p * (1.0 - p) / s.trials as f64
    };
    stats
        .windows(2)
        .all(|w| w[1].rate() <= w[0].rate() + GATE_SIGMAS * (var(&w[0]) + var(&w[1])).sqrt())
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn honest_indices(template: &Profile) -> Vec<usize> {
    (0..template.n()).filter(|&i| template.voters()[i].class.is_honest()).collect()
}

/// Copy of the template where exactly the sampled honest voters are active.
fn realize(template: &Profile, honest: &[usize], n_plus: usize, rng: &mut ChaCha8Rng) -> Result<Profile> {
    let mut active = vec![false; template.n()];
    for k in rand::seq::index::sample(rng, honest.len(), n_plus) {
        active[honest[k]] = true;
    }
    let voters = template
        .voters()
        .iter()
        .zip(active)
        .map(|(v, a)| {
            let class = match v.class {
                VoterClass::Sybil => VoterClass::Sybil,
                _ if a => VoterClass::HonestActive,
                _ => VoterClass::HonestPassive,
            };
            Voter::new(class, v.ballot.clone())
        })
        .collect();
    Profile::new(template.domain().clone(), voters)
}

fn count_parallel<F>(trials: usize, f: F) -> Result<(usize, usize)>
where
    F: Fn(usize) -> Result<(bool, bool)> + Sync + Send,
{
    let outcomes: Vec<(bool, bool)> = (0..trials).into_par_iter().map(f).collect::<Result<_>>()?;
    Ok((outcomes.iter().filter(|o| o.0).count(), outcomes.iter().filter(|o| o.1).count()))
}

/// Violation rate of `α′`-safety over random active sets, on a binary domain.
///
/// The bound is Hoeffding's `exp(−2ε²n⁺)` with `ε = c/(2(1−σ))`, where `c` is
/// the gap between `α′` and the safety threshold. It is 1 when `α′` does not
/// exceed the threshold.
pub fn run_safety_whp(exp: &Experiment) -> Result<TrialStats> {
    exp.validate()?;
    if exp.template.domain().kind() != DomainKind::Binary {
        return Err(Error::IncompatibleMechanism("safety experiments run on a binary domain".into()));
    }
    let region = verifier::safe_region(&exp.base, &exp.template, &exp.alpha_prime)?;
    let honest = honest_indices(&exp.template);
    let (violations, _) = count_parallel(exp.trials, |t| {
        let mut rng = trial_rng(exp.seed, t);
        let v = realize(&exp.template, &honest, exp.n_plus, &mut rng)?;
        let o = rules::apply(&exp.mechanism, &v)?;
        Ok((!region.contains(&o), false))
    })?;
    let bound = hoeffding_safety_bound(exp)?;
    Ok(TrialStats::new(violations, exp.trials, bound, None))
}

fn hoeffding_safety_bound(exp: &Experiment) -> Result<f64> {
    let (sigma, mu) = (exp.sigma(), exp.mu());
    if &sigma + &mu >= rational::one() {
        return Ok(1.0);
    }
    let alpha = guarantees::safety_threshold(Setting::RandomFinite, &sigma, &mu, &exp.mechanism.re_tau)?;
    let c = &exp.alpha_prime - alpha;
    if c <= rational::zero() {
        return Ok(1.0);
    }
    let eps = rational::to_f64(&(c / (rational::int(2) * (rational::one() - &sigma))));
    Ok((-2.0 * eps * eps * exp.n_plus as f64).exp())
}

/// Proxy median trials on the line. `α′ = c + max(0, (σ−τ)/(2(1−σ)))`
/// replaces `exp.alpha_prime`; the bound is `(1−c)^{n⁺}`. The event count
/// records how often `Y_c` held.
pub fn run_proxy_whp(exp: &Experiment, c: &Q) -> Result<TrialStats> {
    exp.validate()?;
    if c <= &rational::zero() || c >= &rational::one() {
        return Err(Error::InvalidParameter("c must lie in (0, 1)".into()));
    }
    let DomainSpec::Interval { r } = exp.template.domain() else {
        return Err(Error::IncompatibleMechanism("proxy experiments run on an interval".into()));
    };
    if exp.mechanism.participation != Participation::Proxy {
        return Err(Error::IncompatibleMechanism("proxy experiments need mode:proxy".into()));
    }
    let sigma = exp.sigma();
    let tau = exp.mechanism.re_tau.clone();
    let one = rational::one();
    let slack = rational::max_q((&sigma - &tau) / (rational::int(2) * (&one - &sigma)), rational::zero());
    let alpha_prime = c + slack;
    let region = verifier::safe_region(&exp.base, &exp.template, &alpha_prime)?;
    let positions = |class: fn(VoterClass) -> bool| -> Vec<Q> {
        exp.template
            .voters()
            .iter()
            .filter(|v| class(v.class))
            .map(|v| v.ballot.as_ref().and_then(|b| b.position()).expect("validated").clone())
            .collect()
    };
    let template = ProxyTemplate {
        r: r.clone(),
        honest: positions(|c| c.is_honest()),
        sybils: positions(|c| c == VoterClass::Sybil),
    };
    let (violations, events) = count_parallel(exp.trials, |t| {
        let mut rng = trial_rng(exp.seed, t);
        let (z, analysis) = proxy::sample_and_run(&template, exp.n_plus, &tau, &mut rng)?;
        Ok((!region.contains(&Alternative::Position(z)), analysis.y_c(c)))
    })?;
    let bound = (1.0 - rational::to_f64(c)).powi(exp.n_plus as i32);
    Ok(TrialStats::new(violations, exp.trials, bound, Some(events)))
}

/// Frequency of `n⁺_p ≥ (ψ+ε)n⁺` against `exp(−2ε²n⁺)`, where `ψ` is the
/// honest fraction voting for `p` (choice 1) in a binary template.
pub fn hoeffding_diagnostic(template: &Profile, n_plus: usize, epsilon: &Q, trials: usize, seed: u64) -> Result<TrialStats> {
    if template.domain().kind() != DomainKind::Binary {
        return Err(Error::IncompatibleMechanism("the Hoeffding diagnostic needs a binary template".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    if epsilon <= &rational::zero() {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let honest: Vec<bool> = template
        .voters()
        .iter()
        .filter(|v| v.class.is_honest())
        .map(|v| v.ballot.as_ref().ok_or(Error::MissingPrivateBallots).map(|b| *b == Ballot::Choice(1)))
        .collect::<Result<_>>()?;
    let h = honest.len();
    if n_plus == 0 || n_plus > h {
        return Err(Error::SampleTooLarge { requested: n_plus, available: h });
    }
    let psi = rational::frac(honest.iter().filter(|&&p| p).count() as i64, h as i64);
    let threshold = (psi + epsilon) * rational::from_usize(n_plus);
    let (hits, _) = count_parallel(trials, |t| {
        let mut rng = trial_rng(seed, t);
        let n_p = rand::seq::index::sample(&mut rng, h, n_plus).into_iter().filter(|&i| honest[i]).count();
        Ok((rational::from_usize(n_p) >= threshold, false))
    })?;
    let eps = rational::to_f64(epsilon);
    Ok(TrialStats::new(hits, trials, (-2.0 * eps * eps * n_plus as f64).exp(), None))
}

/// Binary template: honest voters on `r` and on `p`, sybils on `p`. Every
/// honest voter starts active; experiments reassign participation.
pub fn binary_template(honest_r: usize, honest_p: usize, sybils: usize) -> Result<Profile> {
    let domain = DomainSpec::binary("r", "p")?;
    let mut voters = Vec::with_capacity(honest_r + honest_p + sybils);
    for (class, choice, count) in [
        (VoterClass::HonestActive, 0, honest_r),
        (VoterClass::HonestActive, 1, honest_p),
        (VoterClass::Sybil, 1, sybils),
    ] {
        voters.extend(std::iter::repeat_n(Voter::new(class, Some(Ballot::Choice(choice))), count));
    }
    Profile::new(domain, voters)
}

/// The tightness construction for random participation: all sybils on `p`
/// and the honest lead of `r` as small as possible while `p` stays outside
/// `R̄_{α′}(H)`.
pub fn adversarial_template(n: usize, sigma: &Q, alpha_prime: &Q) -> Result<Profile> {
    let s = rational::floor_count(&(sigma * rational::from_usize(n)));
    if s >= n {
        return Err(Error::DegenerateParams("no honest voters".into()));
    }
    let h = n - s;
    let k = rational::floor_count(&(alpha_prime * rational::from_usize(h)));
    // p is reachable iff 2k > lead; keep the lead at 2k (2k + 1 for odd |H|).
    let lead = (2 * k + (h - 2 * k.min(h / 2)) % 2).min(h);
    let honest_r = (h + lead) / 2;
    binary_template(honest_r, h - honest_r, s)
}

/// Interval template with honest voters at `1, …, h`, sybils at `2h` and
/// status quo `0`.
pub fn uniform_interval_template(h: usize, sybils: usize) -> Result<Profile> {
    let mut voters: Vec<Voter> = (1..=h)
        .map(|x| Voter::new(VoterClass::HonestActive, Some(Ballot::Position(rational::from_usize(x)))))
        .collect();
    let far = rational::from_usize(2 * h);
    voters.extend(std::iter::repeat_n(Voter::new(VoterClass::Sybil, Some(Ballot::Position(far))), sybils));
    Profile::new(DomainSpec::interval(rational::zero()), voters)
}

/// τ-RE-MJ⁺ with majority as the base rule.
pub fn re_mj_active(tau: Q) -> (Mechanism, Mechanism) {
    (
        Mechanism::plain(BaseRule::Majority).with_re(tau).with_participation(Participation::ActiveOnly),
        Mechanism::plain(BaseRule::Majority),
    )
}

/// τ-RE-MD with proxy delegation and the median as the base rule.
pub fn re_md_proxy(tau: Q) -> (Mechanism, Mechanism) {
    (
        Mechanism::plain(BaseRule::Median).with_re(tau).with_participation(Participation::Proxy),
        Mechanism::plain(BaseRule::Median),
    )
}

/// The region against which trials are judged, exposed for reporting.
pub fn judged_region(exp: &Experiment) -> Result<BetweenRegion> {
    verifier::safe_region(&exp.base, &exp.template, &exp.alpha_prime)
}
