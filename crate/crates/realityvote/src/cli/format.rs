//! Profile JSON and frontier CSV.
//!
//! Profile files look like
//!
//! ```json
//! {"domain":{"kind":"binary","p":"p","r":"r"},"version":1,
//!  "voters":[{"ballot":"r","class":"honest_active"},{"class":"honest_passive"}]}
//! ```
//!
//! Ballots are alternative names (binary, categorical), arrays of names
//! (rankings), arrays of 0/1 (hypercube) or `"p/q"` strings (interval).
//! Serialization sorts keys and drops whitespace, so it is canonical.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::guarantees::{self, Setting};
use crate::population::{bits_to_mask, mask_to_bits, Ballot, DomainSpec, Profile, Voter, VoterClass};
use crate::rational::{self, Q};

pub const PROFILE_VERSION: u64 = 1;
pub const FRONTIER_SCHEMA_VERSION: u32 = 1;

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::Parse(format!("{ctx}: missing field {key:?}")))
}

fn as_str<'a>(v: &'a Value, ctx: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::Parse(format!("{ctx}: expected a string")))
}

fn as_rational(v: &Value, ctx: &str) -> Result<Q> {
    rational::parse(as_str(v, ctx)?).map_err(|_| Error::Parse(format!("{ctx}: expected a \"p/q\" rational")))
}

fn as_bits(v: &Value, ctx: &str) -> Result<Vec<u8>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{ctx}: expected an array of 0/1")))?
        .iter()
        .map(|b| match b.as_u64() {
            Some(0) => Ok(0),
            Some(1) => Ok(1),
            _ => Err(Error::Parse(format!("{ctx}: coordinates must be 0 or 1"))),
        })
        .collect()
}

fn parse_domain(v: &Value) -> Result<DomainSpec> {
    let obj = v.as_object().ok_or_else(|| Error::Parse("domain: expected an object".into()))?;
    let kind = as_str(field(obj, "kind", "domain")?, "domain.kind")?;
    match kind {
        "binary" => {
            let r = as_str(field(obj, "r", "domain")?, "domain.r")?;
            let p = as_str(field(obj, "p", "domain")?, "domain.p")?;
            DomainSpec::binary(r, p)
        }
        "categorical" => {
            let alts = field(obj, "alternatives", "domain")?
                .as_array()
                .ok_or_else(|| Error::Parse("domain.alternatives: expected an array".into()))?
                .iter()
                .map(|a| as_str(a, "domain.alternatives").map(str::to_string))
                .collect::<Result<Vec<_>>>()?;
            let r = as_str(field(obj, "r", "domain")?, "domain.r")?;
            DomainSpec::categorical_owned(alts, r)
        }
        "hypercube" => {
            let d = field(obj, "d", "domain")?
                .as_u64()
                .ok_or_else(|| Error::Parse("domain.d: expected a dimension".into()))?;
            DomainSpec::hypercube(d as usize, &as_bits(field(obj, "r", "domain")?, "domain.r")?)
        }
        "interval" => Ok(DomainSpec::interval(as_rational(field(obj, "r", "domain")?, "domain.r")?)),
        other => Err(Error::Parse(format!("domain.kind: unknown kind {other:?}"))),
    }
}

fn parse_ballot(domain: &DomainSpec, v: &Value, ctx: &str) -> Result<Ballot> {
    let name_index = |s: &str| -> Result<usize> {
        domain
            .names()
            .iter()
            .position(|n| n == s)
            .ok_or_else(|| Error::Parse(format!("{ctx}: unknown alternative {s:?}")))
    };
    match domain {
        DomainSpec::Binary { .. } => Ok(Ballot::Choice(name_index(as_str(v, ctx)?)?)),
        DomainSpec::Categorical { .. } => match v {
            Value::Array(items) => {
                let order = items.iter().map(|i| as_str(i, ctx).and_then(name_index)).collect::<Result<_>>()?;
                Ok(Ballot::Ranking(order))
            }
            _ => Ok(Ballot::Choice(name_index(as_str(v, ctx)?)?)),
        },
        DomainSpec::Hypercube { d, .. } => {
            let bits = as_bits(v, ctx)?;
            if bits.len() != *d {
                return Err(Error::Parse(format!("{ctx}: point has {} coordinates, expected {d}", bits.len())));
            }
            Ok(Ballot::Point(bits_to_mask(&bits)?))
        }
        DomainSpec::Interval { .. } => Ok(Ballot::Position(as_rational(v, ctx)?)),
    }
}

fn parse_class(s: &str, ctx: &str) -> Result<VoterClass> {
    match s {
        "honest_active" => Ok(VoterClass::HonestActive),
        "honest_passive" => Ok(VoterClass::HonestPassive),
        "sybil" => Ok(VoterClass::Sybil),
        other => Err(Error::Parse(format!("{ctx}: unknown class {other:?}"))),
    }
}

fn class_name(c: VoterClass) -> &'static str {
    match c {
        VoterClass::HonestActive => "honest_active",
        VoterClass::HonestPassive => "honest_passive",
        VoterClass::Sybil => "sybil",
    }
}

pub fn parse_profile_value(doc: &Value) -> Result<Profile> {
    let obj = doc.as_object().ok_or_else(|| Error::Parse("profile: expected an object".into()))?;
    if let Some(v) = obj.get("version") {
        if v.as_u64() != Some(PROFILE_VERSION) {
            return Err(Error::Parse(format!("version: unsupported profile version {v}")));
        }
    }
    let domain = parse_domain(field(obj, "domain", "profile")?)?;
    let voters = field(obj, "voters", "profile")?
        .as_array()
        .ok_or_else(|| Error::Parse("voters: expected an array".into()))?;
    let mut out = Vec::with_capacity(voters.len());
    for (i, v) in voters.iter().enumerate() {
        let ctx = format!("voters[{i}]");
        let o = v.as_object().ok_or_else(|| Error::Parse(format!("{ctx}: expected an object")))?;
        let class = parse_class(as_str(field(o, "class", &ctx)?, &format!("{ctx}.class"))?, &format!("{ctx}.class"))?;
        let ballot = match o.get("ballot") {
            None | Some(Value::Null) => None,
            Some(b) => Some(parse_ballot(&domain, b, &format!("{ctx}.ballot"))?),
        };
        out.push(Voter::new(class, ballot));
    }
    Profile::new(domain, out)
}

pub fn parse_profile(text: &str) -> Result<Profile> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("profile JSON: {e}")))?;
    parse_profile_value(&doc)
}

fn domain_value(d: &DomainSpec) -> Value {
    match d {
        DomainSpec::Binary { r, p } => json!({"kind": "binary", "r": r, "p": p}),
        DomainSpec::Categorical { alternatives, r } => {
            json!({"kind": "categorical", "alternatives": alternatives, "r": alternatives[*r]})
        }
        DomainSpec::Hypercube { d, r } => json!({"kind": "hypercube", "d": d, "r": mask_to_bits(*r, *d)}),
        DomainSpec::Interval { r } => json!({"kind": "interval", "r": rational::format(r)}),
    }
}

/// JSON form of one ballot.
pub fn ballot_value(d: &DomainSpec, b: &Ballot) -> Value {
    match b {
        Ballot::Choice(i) => Value::String(d.names()[*i].clone()),
        Ballot::Ranking(order) => Value::Array(order.iter().map(|i| Value::String(d.names()[*i].clone())).collect()),
        Ballot::Point(m) => json!(mask_to_bits(*m, d.dimension().unwrap_or(0))),
        Ballot::Position(x) => Value::String(rational::format(x)),
    }
}

/// Human-readable ballot label (rankings as `a>b>c`).
pub fn ballot_label(d: &DomainSpec, b: &Ballot) -> String {
    match b {
        Ballot::Ranking(order) => order.iter().map(|i| d.names()[*i].clone()).collect::<Vec<_>>().join(">"),
        other => d.label(&other.top()),
    }
}

pub fn profile_value(p: &Profile) -> Value {
    let voters: Vec<Value> = p
        .voters()
        .iter()
        .map(|v| {
            let mut o = Map::new();
            o.insert("class".into(), Value::String(class_name(v.class).into()));
            if let Some(b) = &v.ballot {
                o.insert("ballot".into(), ballot_value(p.domain(), b));
            }
            Value::Object(o)
        })
        .collect();
    json!({"version": PROFILE_VERSION, "domain": domain_value(p.domain()), "voters": voters})
}

/// Canonical text: sorted keys, no whitespace.
pub fn serialize_profile(p: &Profile) -> String {
    profile_value(p).to_string()
}

/// One frontier CSV row; numeric fields are `None` for degenerate points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierRow {
    pub setting: Setting,
    pub sigma: Q,
    pub mu: Q,
    pub tau: Q,
    pub alpha_star: Option<Q>,
    pub beta_star: Option<Q>,
    pub feasible: Option<bool>,
    pub tau_lo: Option<Q>,
    pub tau_hi: Option<Q>,
    pub error: Option<String>,
}

pub const FRONTIER_HEADER: [&str; 16] = [
    "schema_version",
    "setting",
    "sigma",
    "mu",
    "tau",
    "alpha_star",
    "beta_star",
    "feasible",
    "tau_lo",
    "tau_hi",
    "sigma_dec",
    "mu_dec",
    "tau_dec",
    "alpha_star_dec",
    "beta_star_dec",
    "error",
];

impl FrontierRow {
    pub fn compute(setting: Setting, sigma: &Q, mu: &Q, tau: &Q) -> Self {
        let mut row = FrontierRow {
            setting,
            sigma: sigma.clone(),
            mu: mu.clone(),
            tau: tau.clone(),
            alpha_star: None,
            beta_star: None,
            feasible: None,
            tau_lo: None,
            tau_hi: None,
            error: None,
        };
        match guarantees::report(setting, sigma, mu, tau).and_then(|r| Ok((r, guarantees::tau_bounds(setting, sigma, mu)?))) {
            Ok((r, (lo, hi))) => {
                row.feasible = Some(r.feasible_tau.is_some());
                row.alpha_star = Some(r.alpha_star);
                row.beta_star = Some(r.beta_star);
                row.tau_lo = Some(lo);
                row.tau_hi = Some(hi);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }

    pub fn record(&self) -> Vec<String> {
        let q = |x: &Option<Q>| x.as_ref().map(rational::format).unwrap_or_default();
        let dec = |x: &Q| format!("{:.6}", rational::to_f64(x));
        let qdec = |x: &Option<Q>| x.as_ref().map(dec).unwrap_or_default();
        vec![
            FRONTIER_SCHEMA_VERSION.to_string(),
            self.setting.to_string(),
            rational::format(&self.sigma),
            rational::format(&self.mu),
            rational::format(&self.tau),
            q(&self.alpha_star),
            q(&self.beta_star),
            self.feasible.map(|f| if f { "1" } else { "0" }.to_string()).unwrap_or_default(),
            q(&self.tau_lo),
            q(&self.tau_hi),
            dec(&self.sigma),
            dec(&self.mu),
            dec(&self.tau),
            qdec(&self.alpha_star),
            qdec(&self.beta_star),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Writes the header and every row as CSV.
pub fn write_frontier<W: std::io::Write>(out: W, rows: &[FrontierRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FRONTIER_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()
}

/// Parses `"a,b,c"` or an inclusive range `"start:stop:step"`.
pub fn parse_grid(s: &str) -> Result<Vec<Q>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = |m: &str| Error::Parse(format!("grid {s:?}: {m}"));
    match parts.len() {
        1 => {
            let v = s.split(',').map(rational::parse).collect::<Result<Vec<_>>>().map_err(|_| bad("bad value"))?;
            Ok(v)
        }
        3 => {
            let [start, stop, step] = [parts[0], parts[1], parts[2]].map(rational::parse);
            let (start, stop, step) = (start.map_err(|_| bad("bad start"))?, stop.map_err(|_| bad("bad stop"))?, step.map_err(|_| bad("bad step"))?);
            if step <= rational::zero() {
                return Err(bad("step must be positive"));
            }
            let count = rational::floor_count(&((&stop - &start) / &step)) + 1;
            if count > 1_000_000 {
                return Err(bad("too many points"));
            }
            Ok((0..count).map(|i| &start + &step * rational::from_usize(i)).filter(|x| x <= &stop).collect())
        }
        _ => Err(bad("use a,b,c or start:stop:step")),
    }
}
