//! Closed-form safety and liveness thresholds and the feasible range of `τ`.
//!
//! Values are continuous (nonatomic) thresholds. Finite instances round to
//! voter granularity; the [`crate::verifier`] is the reference there.

use std::fmt;
use std::str::FromStr;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::rational::{self, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    /// Binary majority with adversarial participation.
    ArbitraryBinary,
    /// Binary majority, random participation, continuum population.
    RandomNonatomic,
    /// Binary majority, random participation, finite population (w.h.p.).
    RandomFinite,
    /// Supermajority over many alternatives; `τ` is the SMJ parameter.
    MultiAltSMJ,
    /// Median with proxy delegation on the line (w.h.p.).
    ProxyInterval,
}

impl Setting {
    pub const ALL: [Setting; 5] = [
        Setting::ArbitraryBinary,
        Setting::RandomNonatomic,
        Setting::RandomFinite,
        Setting::MultiAltSMJ,
        Setting::ProxyInterval,
    ];

    pub fn is_whp(self) -> bool {
        matches!(self, Setting::RandomFinite | Setting::ProxyInterval)
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::ArbitraryBinary => "arbitrary",
            Setting::RandomNonatomic => "random",
            Setting::RandomFinite => "random-finite",
            Setting::MultiAltSMJ => "smj",
            Setting::ProxyInterval => "proxy",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown setting {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuaranteeReport {
    pub setting: Setting,
    pub tau: Q,
    /// Smallest `α` for which the mechanism is safe, clamped at 0.
    pub alpha_star: Q,
    /// Liveness holds for every `β` strictly above this value.
    pub beta_star: Q,
    pub alpha_is_whp: bool,
    /// `[τ_lo, τ_hi)` giving 0-safety and 1-liveness together, if non-empty.
    pub feasible_tau: Option<(Q, Q)>,
    pub impossibility: bool,
}

fn check(sigma: &Q, mu: &Q, tau: &Q) -> Result<()> {
    let one = rational::one();
    if sigma.is_negative() || mu.is_negative() || sigma >= &one || mu >= &one {
        return Err(Error::DegenerateParams("sigma and mu must lie in [0, 1)".into()));
    }
    if sigma + mu >= one {
        return Err(Error::DegenerateParams("sigma + mu must be below 1".into()));
    }
    if tau.is_negative() {
        return Err(Error::InvalidParameter("tau must be nonnegative".into()));
    }
    Ok(())
}

fn clamp0(x: Q) -> Q {
    rational::max_q(x, rational::zero())
}

fn two() -> Q {
    rational::int(2)
}

/// Minimal `α` for which the setting's mechanism is `α`-safe.
pub fn safety_threshold(setting: Setting, sigma: &Q, mu: &Q, tau: &Q) -> Result<Q> {
    check(sigma, mu, tau)?;
    let one = rational::one();
    let t = match setting {
        Setting::ArbitraryBinary => (&one + sigma - (&one + tau) * (&one - mu)) / (two() * (&one - sigma)),
        Setting::RandomNonatomic | Setting::RandomFinite => {
            (sigma - tau * (&one - mu)) * (&one - sigma) / (two() * (&one - mu - sigma))
        }
        Setting::MultiAltSMJ => (&one + sigma - (&one + two() * tau) * (&one - mu)) / (two() * (&one - sigma)),
        Setting::ProxyInterval => (sigma - tau) / (two() * (&one - sigma)),
    };
    Ok(clamp0(t))
}

/// Infimum of the `β` values for which the mechanism is `β`-live.
pub fn liveness_threshold(setting: Setting, sigma: &Q, mu: &Q, tau: &Q) -> Result<Q> {
    check(sigma, mu, tau)?;
    let one = rational::one();
    Ok(match setting {
        Setting::ArbitraryBinary | Setting::RandomNonatomic | Setting::RandomFinite => {
            (&one - mu) * (&one + tau) / (two() * (&one - sigma - mu))
        }
        Setting::MultiAltSMJ => (&one - mu) * (&one + two() * tau) / (two() * (&one - sigma - mu)),
        Setting::ProxyInterval => (&one + tau) / (two() * (&one - sigma)),
    })
}

/// Bounds `[τ_lo, τ_hi)`; empty when `τ_lo ≥ τ_hi`.
pub fn tau_bounds(setting: Setting, sigma: &Q, mu: &Q) -> Result<(Q, Q)> {
    check(sigma, mu, &rational::zero())?;
    let one = rational::one();
    let arbitrary = || {
        let lo = (&one + sigma) / (&one - mu) - &one;
        let hi = two() * (&one - sigma - mu) / (&one - mu) - &one;
        (lo, hi)
    };
    Ok(match setting {
        Setting::ArbitraryBinary => arbitrary(),
        Setting::MultiAltSMJ => {
            let (lo, hi) = arbitrary();
            (lo / two(), hi / two())
        }
        Setting::RandomNonatomic | Setting::RandomFinite => {
            let (_, hi) = arbitrary();
            (sigma / (&one - mu), hi)
        }
        Setting::ProxyInterval => (sigma.clone(), &one - two() * sigma),
    })
}

/// Full report for a given `τ`.
pub fn report(setting: Setting, sigma: &Q, mu: &Q, tau: &Q) -> Result<GuaranteeReport> {
    let alpha_star = safety_threshold(setting, sigma, mu, tau)?;
    let beta_star = liveness_threshold(setting, sigma, mu, tau)?;
    let (lo, hi) = tau_bounds(setting, sigma, mu)?;
    let feasible_tau = if lo < hi { Some((lo, hi)) } else { None };
    Ok(GuaranteeReport {
        setting,
        tau: tau.clone(),
        alpha_star,
        beta_star,
        alpha_is_whp: setting.is_whp(),
        impossibility: feasible_tau.is_none(),
        feasible_tau,
    })
}

/// Report evaluated at the smallest `τ` giving 0-safety.
pub fn feasibility(setting: Setting, sigma: &Q, mu: &Q) -> Result<GuaranteeReport> {
    let (lo, _) = tau_bounds(setting, sigma, mu)?;
    report(setting, sigma, mu, &clamp0(lo))
}

/// Smallest `τ` whose safety threshold is at most `alpha`, clamped at 0.
pub fn required_tau(setting: Setting, sigma: &Q, mu: &Q, alpha: &Q) -> Result<Q> {
    check(sigma, mu, &rational::zero())?;
    if alpha.is_negative() {
        return Err(Error::InvalidParameter("alpha must be nonnegative".into()));
    }
    let one = rational::one();
    let arbitrary = (&one + sigma - two() * alpha * (&one - sigma)) / (&one - mu) - &one;
    let t = match setting {
        Setting::ArbitraryBinary => arbitrary,
        Setting::MultiAltSMJ => arbitrary / two(),
        Setting::RandomNonatomic | Setting::RandomFinite => {
            (sigma - two() * alpha * (&one - mu - sigma) / (&one - sigma)) / (&one - mu)
        }
        Setting::ProxyInterval => sigma - two() * alpha * (&one - sigma),
    };
    Ok(clamp0(t))
}
