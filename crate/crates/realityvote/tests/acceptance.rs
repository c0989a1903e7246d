//! Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs with `harness = false`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use realityvote::cli;
use realityvote::guarantees::{self, Setting};
use realityvote::montecarlo::{self, Experiment};
use realityvote::population::{build_profile, Alternative, Ballot, DomainSpec, Profile, VoterClass};
use realityvote::proxy;
use realityvote::rational::{self, frac, int, Q};
use realityvote::rules::{self, BaseRule, Mechanism, Participation};
use realityvote::verifier::{self, Shape, Theorem, WitnessParams, WitnessProfile};

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn mech(s: &str) -> Mechanism {
    s.parse().expect("mechanism spec")
}

fn binary() -> DomainSpec {
    DomainSpec::binary("r", "p").unwrap()
}

fn re_mj_active(tau: &Q) -> Mechanism {
    Mechanism::plain(BaseRule::Majority).with_re(tau.clone()).with_participation(Participation::ActiveOnly)
}

fn class_of(rng: &mut ChaCha8Rng) -> VoterClass {
    match rng.random_range(0..3) {
        0 => VoterClass::HonestActive,
        1 => VoterClass::HonestPassive,
        _ => VoterClass::Sybil,
    }
}

/// Random profile with at least one active honest voter; passives carry ballots.
fn random_profile(rng: &mut ChaCha8Rng, domain: DomainSpec, max_n: usize, ballot: impl Fn(&mut ChaCha8Rng) -> Ballot) -> Profile {
    let n = rng.random_range(1..=max_n);
    let mut entries = vec![(VoterClass::HonestActive, Some(ballot(rng)))];
    for _ in 1..n {
        let c = class_of(rng);
        entries.push((c, Some(ballot(rng))));
    }
    build_profile(domain, entries).unwrap()
}

fn random_interval(rng: &mut ChaCha8Rng, max_n: usize, spread: i64) -> Profile {
    let r = rng.random_range(-spread..=spread);
    random_profile(rng, DomainSpec::interval(int(r)), max_n, |g| Ballot::Position(int(g.random_range(-spread..=spread))))
}

fn table1() -> Outcome {
    let d = binary();
    let mj = mech("mj");
    let full = Shape::new(5, 2, 0).unwrap();
    let partial = Shape::new(5, 2, 2).unwrap();
    let cases = [
        ("MJ", "mj", full, frac(1, 3), int(1)),
        ("0.4-SMJ", "smj:2/5", full, int(0), frac(19, 3)),
        ("MJ+", "mj mode:active", partial, frac(2, 3), int(3)),
        ("0.4-SMJ+", "smj:2/5 mode:active", partial, frac(1, 3), int(19)),
    ];
    let mut pass = true;
    let mut got = Vec::new();
    for (name, spec, shape, alpha, beta) in cases {
        let m = mech(spec);
        let a = verifier::min_alpha(&m, &mj, shape, &d).unwrap();
        let b = verifier::min_beta(&m, shape, &d, &Alternative::Choice(1)).unwrap();
        pass &= a == alpha && b.as_ref() == Some(&beta);
        got.push(format!("{name} a={} b={}", rational::format(&a), b.map(|x| rational::format(&x)).unwrap_or("-".into())));
    }
    ok(pass, got.join("; "))
}

fn coincidences() -> Outcome {
    let taus = [int(0), frac(1, 10), frac(1, 5), frac(1, 4), frac(2, 5)];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut bin_bad, mut line_bad) = (0, 0);
    for i in 0..10_000 {
        let p = random_profile(&mut rng, binary(), 50, |g| Ballot::Choice(g.random_range(0..2)));
        let t = &taus[i % taus.len()];
        let mode = if i % 2 == 0 { Participation::Full } else { Participation::ActiveOnly };
        let re = Mechanism::plain(BaseRule::Majority).with_re(t * int(2)).with_participation(mode);
        let smj = Mechanism::plain(BaseRule::Supermajority(t.clone())).with_participation(mode);
        if rules::apply(&re, &p).unwrap() != rules::apply(&smj, &p).unwrap() {
            bin_bad += 1;
        }
    }
    for i in 0..10_000 {
        let p = random_interval(&mut rng, 50, 20);
        let t = &taus[i % taus.len()];
        let mode = if i % 2 == 0 { Participation::Full } else { Participation::ActiveOnly };
        let re = Mechanism::plain(BaseRule::Median).with_re(t.clone()).with_participation(mode);
        let som = Mechanism::plain(BaseRule::SuppressOuterMedian(t.clone())).with_participation(mode);
        if rules::apply(&re, &p).unwrap() != rules::apply(&som, &p).unwrap() {
            line_bad += 1;
        }
    }
    ok(bin_bad + line_bad == 0, format!("RE-MJ/SMJ mismatches {bin_bad}/10000, RE-MD/SOM mismatches {line_bad}/10000"))
}

const TAU_GRID: [(i64, i64); 5] = [(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)];

/// Every binary shape with `n ≤ 8` and at least one active honest voter.
fn shapes() -> Vec<Shape> {
    let mut out = Vec::new();
    for n in 1..=8 {
        for s in 0..n {
            for p in 0..n - s {
                out.push(Shape::new(n, s, p).unwrap());
            }
        }
    }
    out
}

/// Minimal safe budget from the worst-case profile: sybils on p, passives on
/// r, and the fewest honest actives on p that still make p win.
fn integer_closed_form(shape: Shape, tau: &Q) -> Q {
    let (a, s) = (shape.active_honest(), shape.sybils);
    let h = shape.honest();
    let q = tau * rational::from_usize(a + s);
    let half = (rational::from_usize(a) - rational::from_usize(s) + q) / int(2);
    let a_p = rational::floor_count(&(half + int(1)));
    if a_p > a {
        return int(0);
    }
    // Smallest k with a_p + k > h − a_p − k.
    let k = (h / 2 + 1).saturating_sub(a_p);
    frac(k as i64, h as i64)
}

fn formula_safety() -> Outcome {
    let d = binary();
    let mj = mech("mj");
    let (mut total, mut bad, mut closed_bad, mut above) = (0, 0, 0, 0);
    let mut example = None;
    for shape in shapes() {
        for (tn, td) in TAU_GRID {
            let tau = frac(tn, td);
            let finite = verifier::min_alpha(&re_mj_active(&tau), &mj, shape, &d).unwrap();
            let t = guarantees::safety_threshold(Setting::ArbitraryBinary, &shape.sigma(), &shape.mu(), &tau).unwrap();
            let hq = rational::from_usize(shape.honest());
            let adjusted = rational::max_q(int(0), Q::from_integer(rational::ceil_int(&(&t * &hq))) / hq);
            total += 1;
            if finite != adjusted {
                bad += 1;
                if finite > adjusted {
                    above += 1;
                }
                example.get_or_insert(format!(
                    "n={} S={} P={} tau={} oracle={} formula={}",
                    shape.n,
                    shape.sybils,
                    shape.passives,
                    rational::format(&tau),
                    rational::format(&finite),
                    rational::format(&adjusted)
                ));
            }
            if finite != integer_closed_form(shape, &tau) {
                closed_bad += 1;
            }
        }
    }
    ok(
        bad == 0,
        format!(
            "{bad}/{total} differ from ceil(t|H|)/|H| ({above} above it), e.g. {}; oracle vs integer closed form: {closed_bad} differ",
            example.unwrap_or_default()
        ),
    )
}

fn formula_liveness() -> Outcome {
    let d = binary();
    let (mut total, mut bad) = (0, 0);
    let mut example = None;
    for shape in shapes() {
        for (tn, td) in TAU_GRID {
            let tau = frac(tn, td);
            let th = guarantees::liveness_threshold(Setting::ArbitraryBinary, &shape.sigma(), &shape.mu(), &tau).unwrap();
            if th > int(1) {
                continue;
            }
            let units = shape.active_honest();
            let m = rational::from_usize(units);
            let expected = rational::from_usize(rational::floor_count(&(&th * &m)) + 1) / m;
            // Smallest feasible β by probing is_live on the 1/|H⁺| grid.
            let finite = (0..=4 * units).map(|k| frac(k as i64, units as i64)).find(|b| {
                verifier::is_live(&re_mj_active(&tau), shape, &d, &Alternative::Choice(1), b).unwrap()
            });
            total += 1;
            if finite.as_ref() != Some(&expected) {
                bad += 1;
                example.get_or_insert(format!(
                    "n={} S={} P={} tau={} threshold={} oracle={}",
                    shape.n,
                    shape.sybils,
                    shape.passives,
                    rational::format(&tau),
                    rational::format(&th),
                    finite.map(|x| rational::format(&x)).unwrap_or("never".into())
                ));
            }
        }
    }
    ok(bad == 0, format!("{bad}/{total} differ, e.g. {}", example.unwrap_or_default()))
}

fn frontier() -> Outcome {
    let path = std::env::temp_dir().join(format!("realityvote-frontier-{}.csv", std::process::id()));
    let mut sink = Vec::new();
    let args = [
        "realityvote",
        "frontier",
        "--setting",
        "arbitrary,random",
        "--sigma-grid",
        "0:1:1/20",
        "--mu-grid",
        "0:1:1/20",
        "--out",
        path.to_str().unwrap(),
    ];
    let code = cli::run(args.iter().map(Into::into), &mut sink, &mut std::io::sink());
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let (mut rows, mut bad) = (0, 0);
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let sigma = rational::parse(&rec[2]).unwrap();
        let mu = rational::parse(&rec[3]).unwrap();
        let expect = match &rec[1] {
            "arbitrary" => &sigma * int(3) + &mu * int(2) < int(1),
            _ => &sigma * int(3) + &mu < int(1),
        };
        rows += 1;
        if (&rec[7] == "1") != expect {
            bad += 1;
        }
    }
    let _ = std::fs::remove_file(&path);
    ok(code == 0 && rows == 2 * 21 * 21 && bad == 0, format!("{rows} rows, {bad} wrong feasible flags"))
}

fn witnesses() -> Outcome {
    let grid: Vec<Q> = (0..=10).map(|k| frac(k, 20)).collect();
    let mut finite_pts = Vec::new();
    let mut cont_pts = Vec::new();
    for s in &grid {
        for m in &grid {
            if s + m >= int(1) || s == &int(0) {
                continue;
            }
            if s * int(3) + m * int(2) >= int(1) && finite_pts.len() < 20 {
                finite_pts.push((s.clone(), m.clone()));
            }
            if s * int(3) + m >= int(1) && cont_pts.len() < 20 {
                cont_pts.push((s.clone(), m.clone()));
            }
        }
    }
    let taus: Vec<Q> = (0..=4).map(|k| frac(k, 4)).collect();
    let mut bad = Vec::new();
    for (sigma, mu) in &finite_pts {
        let params = WitnessParams { sigma: sigma.clone(), mu: mu.clone(), tau: int(0), alpha: int(0) };
        let w = verifier::tightness_witness(Theorem::ArbitraryLowerBound, &params).unwrap();
        let c = verifier::check_twins(&w).unwrap();
        let (WitnessProfile::Finite(v), Some(WitnessProfile::Finite(vb))) = (&w.primary, &w.twin) else { unreachable!() };
        let same = taus.iter().all(|t| rules::apply(&re_mj_active(t), v).unwrap() == rules::apply(&re_mj_active(t), vb).unwrap());
        if !(c.indistinguishable() && c.twin_prefers_r() && same) {
            bad.push(format!("finite σ={} μ={}", rational::format(sigma), rational::format(mu)));
        }
    }
    for (sigma, mu) in &cont_pts {
        let params = WitnessParams { sigma: sigma.clone(), mu: mu.clone(), tau: int(0), alpha: int(0) };
        let w = verifier::tightness_witness(Theorem::RandomLowerBound, &params).unwrap();
        let c = verifier::check_twins(&w).unwrap();
        let (WitnessProfile::Nonatomic(v), Some(WitnessProfile::Nonatomic(vb))) = (&w.primary, &w.twin) else { unreachable!() };
        let same = taus.iter().all(|t| verifier::nonatomic_eval(v, t) == verifier::nonatomic_eval(vb, t));
        if !(c.indistinguishable() && c.twin_prefers_r() && same) {
            bad.push(format!("nonatomic σ={} μ={}", rational::format(sigma), rational::format(mu)));
        }
    }
    ok(
        finite_pts.len() == 20 && cont_pts.len() == 20 && bad.is_empty(),
        format!("{} finite + {} nonatomic points, failures: {:?}", finite_pts.len(), cont_pts.len(), bad),
    )
}

fn reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    let mut violated = 0;
    for _ in 0..10_000 {
        let p = random_interval(&mut rng, 12, 10);
        let tau = frac(rng.random_range(0..=4), 4);
        let alpha = frac(rng.random_range(0..=3), 6);
        if !verifier::reduction_check(&p, &tau, &alpha).unwrap() {
            bad += 1;
        }
        let md_plus = Mechanism::plain(BaseRule::Median).with_re(tau.clone()).with_participation(Participation::ActiveOnly);
        if !verifier::is_safe(&md_plus, &mech("md"), &p, &alpha).unwrap() {
            violated += 1;
        }
    }
    ok(bad == 0, format!("{bad} counterexamples in 10000 ({violated} profiles had an MD safety violation to reduce)"))
}

fn proxy_lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..10_000 {
        let p = random_interval(&mut rng, 30, 15);
        let tau = frac(rng.random_range(0..=4), 4);
        let z = proxy::md_proxy(&p, &tau).unwrap();
        let m = proxy::full_population_median(&p, &tau).unwrap();
        if z != proxy::nearest_entity(&p, &m).unwrap() {
            bad += 1;
        }
    }
    ok(bad == 0, format!("{bad} mismatches in 10000"))
}

fn imj_example() -> Outcome {
    let d = DomainSpec::hypercube(3, &[0, 0, 0]).unwrap();
    let mut e = Vec::new();
    for bits in [[0u8, 0, 1], [0, 1, 0], [1, 0, 0]] {
        let m = realityvote::population::bits_to_mask(&bits).unwrap();
        e.extend(std::iter::repeat_n((VoterClass::HonestActive, Some(Ballot::Point(m))), 20));
    }
    e.extend(std::iter::repeat_n((VoterClass::Sybil, Some(Ballot::Point(0b111))), 21));
    let p = build_profile(d, e).unwrap();
    let imj = mech("imj");
    let a = verifier::min_alpha_profile(&imj, &imj, &p).unwrap();
    let binary = guarantees::safety_threshold(Setting::ArbitraryBinary, &p.sigma(), &p.mu(), &int(0)).unwrap();
    ok(
        a == frac(1, 4) && a > binary,
        format!("min alpha {} (expected 1/4), binary formula {}", rational::format(&a), rational::format(&binary)),
    )
}

fn plurality_impossibility() -> Outcome {
    // 20 voters: 8 honest on p, 7 honest on p', 5 sybils on p'.
    let d = DomainSpec::categorical(&["r", "p", "p'"], "r").unwrap();
    let mut e = Vec::new();
    e.extend(std::iter::repeat_n((VoterClass::HonestActive, Some(Ballot::Choice(1))), 8));
    e.extend(std::iter::repeat_n((VoterClass::HonestActive, Some(Ballot::Choice(2))), 7));
    e.extend(std::iter::repeat_n((VoterClass::Sybil, Some(Ballot::Choice(2))), 5));
    let v = build_profile(d.clone(), e).unwrap();
    let shape = Shape::new(20, 5, 0).unwrap();
    let pl = mech("pl");
    let mut both = Vec::new();
    let (mut unsafe_count, mut dead_count) = (0, 0);
    for k in 0..100 {
        let tau = frac(k, 99);
        let m = Mechanism::plain(BaseRule::Plurality).with_re(tau.clone());
        if !verifier::is_safe(&m, &pl, &v, &int(0)).unwrap() {
            unsafe_count += 1;
            continue;
        }
        let live = [1usize, 2]
            .iter()
            .all(|&a| verifier::is_live(&m, shape, &d, &Alternative::Choice(a), &int(1)).unwrap());
        if live {
            both.push(rational::format(&tau));
        } else {
            dead_count += 1;
        }
    }
    ok(both.is_empty(), format!("{unsafe_count} taus unsafe, {dead_count} not 1-live, both at {both:?}"))
}

fn probabilistic() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let t = montecarlo::binary_template(500, 500, 0).unwrap();
    for n_plus in [50, 100, 200] {
        let s = montecarlo::hoeffding_diagnostic(&t, n_plus, &frac(1, 10), 2000, 11).unwrap();
        pass &= s.passes();
        notes.push(format!("(a) n+={n_plus} {:.4}<={:.4}", s.rate(), s.bound_value));
    }
    let template = montecarlo::uniform_interval_template(1000, 250).unwrap();
    let (mechanism, base) = montecarlo::re_md_proxy(frac(1, 5));
    let c = frac(1, 20);
    let mut curve = Vec::new();
    for n_plus in [10, 20, 40] {
        let exp = Experiment { template: template.clone(), mechanism: mechanism.clone(), base: base.clone(), alpha_prime: c.clone(), trials: 1000, seed: 12, n_plus };
        let s = montecarlo::run_proxy_whp(&exp, &c).unwrap();
        pass &= s.passes();
        notes.push(format!("(b) n+={n_plus} {:.4}<={:.4}", s.rate(), s.bound_value));
        curve.push(s);
    }
    let decay = montecarlo::nonincreasing_within_se(&curve);
    pass &= decay;
    notes.push(format!("(b) decay {}", if decay { "ok" } else { "broken" }));
    let (sigma, mu) = (frac(1, 5), frac(1, 5));
    let tau = &sigma / (int(1) - &mu) + frac(1, 20);
    let alpha_prime = frac(1, 20);
    let n = 1600;
    let (mechanism, base) = montecarlo::re_mj_active(tau);
    let exp = Experiment {
        template: montecarlo::adversarial_template(n, &sigma, &alpha_prime).unwrap(),
        mechanism,
        base,
        alpha_prime,
        trials: 1000,
        seed: 13,
        n_plus: 960,
    };
    let s = montecarlo::run_safety_whp(&exp).unwrap();
    pass &= s.rate() <= 0.01;
    notes.push(format!("(c) n=1600 rate {:.4}", s.rate()));
    ok(pass, notes.join(", "))
}

fn main() {
    type Criterion = (u32, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "Table 1 reproduction", Duration::from_secs(1), table1),
        (2, "coincidence identities", Duration::from_secs(30), coincidences),
        (3, "safety formula vs oracle", Duration::from_secs(300), formula_safety),
        (4, "liveness formula vs oracle", Duration::from_secs(300), formula_liveness),
        (5, "feasibility frontier", Duration::from_secs(1), frontier),
        (6, "lower-bound witnesses", Duration::from_secs(10), witnesses),
        (7, "median reduction", Duration::from_secs(120), reduction),
        (8, "proxy lemma", Duration::from_secs(30), proxy_lemma),
        (9, "IMJ example", Duration::from_secs(60), imj_example),
        (10, "RE-plurality impossibility", Duration::from_secs(5), plurality_impossibility),
        (11, "probabilistic gates", Duration::from_secs(300), probabilistic),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= limit;
        failed += usize::from(!pass);
        println!(
            "{} criterion {id:>2} {name}: {} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
