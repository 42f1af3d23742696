//! Protocol parameters.
//!
//! [`derive_params`] evaluates the initialization block of the committee
//! transformation: the committee count `q`, the adjusted fairness loss `z'`,
//! the bad-committee cap `c`, the committee size `s`, the publish fault
//! parameter `d` and the per-vertex receiver degree `delta_cap`. All real
//! intermediates are binary64; ceilings and floors are applied last, exactly
//! as each formula is parenthesized. The one place where binary64 is known to
//! land on the wrong side of an integer is `n^(2 - 2/k)` for perfect powers,
//! so that ceiling is corrected with exact integer arithmetic whenever `k` is
//! a small rational.
//!
//! The cost side ([`transformation_cost`], [`instantiate_perfect_or_crypto`])
//! evaluates the closed-form message bounds numerically.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// User-facing inputs of the transformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinParams {
    pub n: usize,
    #[serde(default)]
    pub t: usize,
    pub z: f64,
    pub k: f64,
    pub epsilon: f64,
    pub alpha: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(rename = "R", default = "default_latency")]
    pub r: f64,
}

fn default_delta() -> f64 {
    1.0
}

fn default_latency() -> f64 {
    1.0
}

/// Hand-picked replacements for derived quantities.
///
/// The formulas are very conservative at small `n`; desk-scale experiments
/// set some of these directly. Any override marks the resulting
/// [`DerivedParams`] as `overridden`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_cap: Option<usize>,
}

impl ParamOverrides {
    pub fn is_empty(&self) -> bool {
        self.q.is_none()
            && self.c.is_none()
            && self.s.is_none()
            && self.d.is_none()
            && self.delta_cap.is_none()
    }
}

/// The JSON parameter document: the [`CoinParams`] keys plus `overrides`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    #[serde(flatten)]
    pub params: CoinParams,
    #[serde(default, skip_serializing_if = "ParamOverrides::is_empty")]
    pub overrides: ParamOverrides,
}

impl ParamsDocument {
    pub fn derive(&self) -> Result<DerivedParams, ParamError> {
        derive_params_with_overrides(&self.params, &self.overrides)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub n: usize,
    /// Number of committees; always odd.
    pub q: usize,
    pub z_prime: f64,
    /// Bad-committee cap plus one.
    pub c: usize,
    /// Committee size.
    pub s: usize,
    /// Publish fault parameter.
    pub d: usize,
    /// Receiver degree in every publish graph.
    pub delta_cap: usize,
    /// Publish outputs needed before the majority broadcast.
    pub live_threshold: usize,
    /// Majority bits needed before the final output.
    pub output_threshold: usize,
    #[serde(default)]
    pub overridden: bool,
}

impl DerivedParams {
    /// Corruption threshold inside a committee of size `s`: strictly fewer
    /// than a third.
    pub fn committee_fault_bound(&self) -> usize {
        crusader_fault_bound(self.s)
    }
}

/// Largest `f` with `f < s / 3`.
pub fn crusader_fault_bound(s: usize) -> usize {
    s.div_ceil(3).saturating_sub(1)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("n must be at least 1 (got {0})")]
    NoParties(usize),
    #[error("epsilon must be positive (got {0})")]
    NonPositiveEpsilon(f64),
    #[error("epsilon ({epsilon}) must be strictly below alpha ({alpha})")]
    EpsilonNotBelowAlpha { epsilon: f64, alpha: f64 },
    #[error("alpha must be at most 1/3 (got {0})")]
    AlphaAboveThird(f64),
    #[error("k must be at least 2 (got {0})")]
    KBelowTwo(f64),
    #[error("z must be positive (got {0})")]
    NonPositiveZ(f64),
    #[error("delta must lie in (0, 1] (got {0})")]
    DeltaOutOfRange(f64),
    #[error("R must be positive (got {0})")]
    NonPositiveLatency(f64),
    #[error("t = {t} exceeds the tolerated (alpha - epsilon) * n = {limit}")]
    TooManyFaults { t: usize, limit: f64 },
    #[error("non-finite parameter {0}")]
    NotFinite(&'static str),
    #[error("invalid override: {0}")]
    BadOverride(String),
    #[error("cost polynomial {name} evaluated to {value} at x = {x}")]
    BadPolynomial {
        name: &'static str,
        x: f64,
        value: f64,
    },
    #[error("delta' = {delta_prime} >= 1 - 1/n: committee size would reach n")]
    CommitteeWouldReachN { delta_prime: f64 },
}

impl CoinParams {
    /// Checks the preconditions of [`derive_params`].
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("z", self.z),
            ("k", self.k),
            ("epsilon", self.epsilon),
            ("alpha", self.alpha),
        ] {
            if !v.is_finite() {
                return Err(ParamError::NotFinite(name));
            }
        }
        if self.n < 1 {
            return Err(ParamError::NoParties(self.n));
        }
        if self.epsilon <= 0.0 {
            return Err(ParamError::NonPositiveEpsilon(self.epsilon));
        }
        if self.epsilon >= self.alpha {
            return Err(ParamError::EpsilonNotBelowAlpha {
                epsilon: self.epsilon,
                alpha: self.alpha,
            });
        }
        if self.alpha > 1.0 / 3.0 {
            return Err(ParamError::AlphaAboveThird(self.alpha));
        }
        if self.k < 2.0 {
            return Err(ParamError::KBelowTwo(self.k));
        }
        if self.z <= 0.0 {
            return Err(ParamError::NonPositiveZ(self.z));
        }
        Ok(())
    }

    /// Additional checks for driving a simulation: `delta`, `R` and the
    /// fault budget `t <= (alpha - epsilon) n`.
    pub fn validate_for_simulation(&self) -> Result<(), ParamError> {
        self.validate()?;
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(ParamError::DeltaOutOfRange(self.delta));
        }
        if !self.r.is_finite() || self.r <= 0.0 {
            return Err(ParamError::NonPositiveLatency(self.r));
        }
        if self.t > self.fault_limit() {
            return Err(ParamError::TooManyFaults {
                t: self.t,
                limit: (self.alpha - self.epsilon) * self.n as f64,
            });
        }
        Ok(())
    }

    /// `floor((alpha - epsilon) n)`, the largest tolerated corruption count.
    pub fn fault_limit(&self) -> usize {
        floor_tolerant((self.alpha - self.epsilon) * self.n as f64)
    }
}

/// Floor that treats values within 1e-9 below an integer as that integer,
/// so that `(1/3 - 1/12) * 12` counts as 3.
pub(crate) fn floor_tolerant(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

/// Ceiling that treats values within 1e-9 above an integer as that integer.
pub(crate) fn ceil_tolerant(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// `q = 2 ceil(n^(2 - 2/k)) + 1`.
pub fn committee_count(n: usize, k: f64) -> usize {
    2 * ceil_committee_power(n, k) + 1
}

/// `ceil(n^(2 - 2/k))`, exact when `k` is a rational with denominator <= 16.
fn ceil_committee_power(n: usize, k: f64) -> usize {
    let approx = (n as f64).powf(2.0 - 2.0 / k).ceil();
    match small_rational(k) {
        // 2 - 2/k = (2a - 2b) / a with k = a / b.
        Some((a, b)) if a <= 256 && n > 1 => {
            let num = 2 * a - 2 * b;
            let target = BigUint::from(n).pow(num as u32);
            let mut m = approx.max(1.0) as u64;
            let pow = |m: u64| BigUint::from(m).pow(a as u32);
            while m > 1 && pow(m - 1) >= target {
                m -= 1;
            }
            while pow(m) < target {
                m += 1;
            }
            m as usize
        }
        _ => approx as usize,
    }
}

/// `k = a / b` exactly in binary64, for some `b <= 16`.
fn small_rational(k: f64) -> Option<(u64, u64)> {
    (1..=16u64).find_map(|b| {
        let a = k * b as f64;
        (a.fract() == 0.0 && a > 0.0 && a < 1e6 && a / b as f64 == k).then_some((a as u64, b))
    })
}

/// `z' = max(z / 3, z - 1.6 q^(-1/2))`.
pub fn adjusted_fairness_loss(z: f64, q: usize) -> f64 {
    f64::max(z / 3.0, z - 1.6 / (q as f64).sqrt())
}

/// `Delta = min(ceil(2s/3), ceil(30 (s ln 2 / d + ln n)))`.
pub fn receiver_degree(s: usize, d: usize, n: usize) -> usize {
    let dense = (2 * s).div_ceil(3);
    let sparse = (30.0 * (s as f64 * std::f64::consts::LN_2 / d as f64 + (n as f64).ln())).ceil();
    if sparse >= dense as f64 {
        dense
    } else {
        sparse as usize
    }
}

fn live_threshold(q: usize, z_prime: f64) -> usize {
    let slack = (5.0 * z_prime * (q as f64).sqrt() / 12.0).floor() as usize;
    q.saturating_sub(slack)
}

/// Evaluates the initialization block.
pub fn derive_params(p: &CoinParams) -> Result<DerivedParams, ParamError> {
    p.validate()?;
    let n = p.n;
    let nf = n as f64;
    let q = committee_count(n, p.k);
    let sqrt_q = (q as f64).sqrt();
    let z_prime = adjusted_fairness_loss(p.z, q);
    let c = (z_prime * sqrt_q / 3.0).ceil() as usize;
    let size_factor = (2.0 * p.alpha - p.epsilon) / (z_prime * p.epsilon * p.epsilon);
    let size = (size_factor * (nf * std::f64::consts::LN_2 / c as f64 + (q as f64).ln())).ceil();
    let s = if size >= nf { n } else { size as usize };
    let d =
        (z_prime * nf * (1.0 - 3.0 * p.alpha + 3.0 * p.epsilon) / (36.0 * sqrt_q)).ceil() as usize;
    let d = d.max(1);
    Ok(DerivedParams {
        n,
        q,
        z_prime,
        c,
        s,
        d,
        delta_cap: receiver_degree(s, d, n),
        live_threshold: live_threshold(q, z_prime),
        output_threshold: 2 * n / 3 + 1,
        overridden: false,
    })
}

/// [`derive_params`] followed by the manual overrides.
///
/// `z'` and the live threshold are recomputed from an overridden `q`; the
/// receiver degree is recomputed from overridden `s`/`d` unless it is itself
/// overridden.
pub fn derive_params_with_overrides(
    p: &CoinParams,
    o: &ParamOverrides,
) -> Result<DerivedParams, ParamError> {
    let mut dp = derive_params(p)?;
    if o.is_empty() {
        return Ok(dp);
    }
    let bad = |msg: String| Err(ParamError::BadOverride(msg));
    if let Some(q) = o.q {
        if q == 0 || q % 2 == 0 {
            return bad(format!("q must be odd and positive (got {q})"));
        }
        dp.q = q;
        dp.z_prime = adjusted_fairness_loss(p.z, q);
        dp.live_threshold = live_threshold(q, dp.z_prime);
    }
    if let Some(c) = o.c {
        if c == 0 || c > dp.q {
            return bad(format!("c must lie in [1, q = {}] (got {c})", dp.q));
        }
        dp.c = c;
    }
    if let Some(s) = o.s {
        if s == 0 || s > p.n {
            return bad(format!("s must lie in [1, n = {}] (got {s})", p.n));
        }
        dp.s = s;
    }
    if let Some(d) = o.d {
        if d == 0 {
            return bad("d must be at least 1".into());
        }
        dp.d = d;
    }
    dp.delta_cap = match o.delta_cap {
        Some(cap) if cap == 0 || cap > dp.s => {
            return bad(format!(
                "delta_cap must lie in [1, s = {}] (got {cap})",
                dp.s
            ));
        }
        Some(cap) => cap,
        None => receiver_degree(dp.s, dp.d, p.n),
    };
    dp.overridden = true;
    Ok(dp)
}

/// One monomial `coef * x^exp * (log2 x)^log_pow`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coef: f64,
    pub exp: f64,
    #[serde(default)]
    pub log_pow: u32,
}

/// A cost function of the committee size, such as `x^3 log x`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostPoly {
    pub terms: Vec<PolyTerm>,
}

impl CostPoly {
    pub fn zero() -> Self {
        CostPoly { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0.0, 0)
    }

    pub fn monomial(coef: f64, exp: f64, log_pow: u32) -> Self {
        CostPoly {
            terms: vec![PolyTerm { coef, exp, log_pow }],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let log = if t.log_pow == 0 {
                    1.0
                } else {
                    x.log2().powi(t.log_pow as i32)
                };
                t.coef * x.powf(t.exp) * log
            })
            .sum()
    }
}

impl fmt::Display for CostPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}*x^{}", t.coef, t.exp)?;
            if t.log_pow > 0 {
                write!(f, "*log2(x)^{}", t.log_pow)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTerm {
    pub name: String,
    pub messages: f64,
    pub size_bits: f64,
    pub bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub strongcoin_messages: f64,
    pub strongcoin_msg_size: f64,
    pub publish_messages: f64,
    pub broadcast_messages: f64,
    pub total_bits: f64,
    pub latency_bound: f64,
    pub breakdown: Vec<CostTerm>,
    pub derived: DerivedParams,
}

impl CostReport {
    /// The breakdown term with the most messages.
    pub fn dominant_term(&self) -> &CostTerm {
        self.breakdown
            .iter()
            .max_by(|a, b| a.messages.total_cmp(&b.messages))
            .expect("breakdown is never empty")
    }
}

pub(crate) fn tag_bits(instances: usize) -> u32 {
    if instances <= 1 {
        0
    } else {
        usize::BITS - (instances - 1).leading_zeros()
    }
}

/// The message and latency bounds of the transformation for a strong coin
/// costing `coin_messages(s)` messages of `coin_size(s)` bits.
pub fn transformation_cost(
    p: &CoinParams,
    coin_messages: &CostPoly,
    coin_size: &CostPoly,
) -> Result<CostReport, ParamError> {
    let dp = derive_params(p)?;
    cost_report(p, &dp, coin_messages, coin_size)
}

/// [`transformation_cost`] against already-derived (possibly overridden) params.
pub fn cost_report(
    p: &CoinParams,
    dp: &DerivedParams,
    coin_messages: &CostPoly,
    coin_size: &CostPoly,
) -> Result<CostReport, ParamError> {
    let s = dp.s as f64;
    let n = p.n as f64;
    let m = coin_messages.eval(s);
    let l = coin_size.eval(s);
    for (name, value) in [("M", m), ("L", l)] {
        if !value.is_finite() || value < 0.0 {
            return Err(ParamError::BadPolynomial { name, x: s, value });
        }
    }
    let tag = tag_bits(dp.q) as f64;
    let term = |name: &str, messages: f64, size_bits: f64| CostTerm {
        name: name.to_string(),
        messages,
        size_bits,
        bits: messages * size_bits,
    };
    let strong = term("strong_coin", dp.q as f64 * m, l + tag);
    let sparse = term(
        "publish_sparse",
        s * n.powf(3.0 - 3.0 / p.k) / (p.z * (1.0 - 3.0 * p.alpha + 3.0 * p.epsilon)),
        tag + 2.0,
    );
    let dense = term(
        "publish_committee",
        n.powf(2.0 - 2.0 / p.k) * (s * s + n * n.log2()),
        tag + 2.0,
    );
    let majority = term("majority_broadcast", n * n, 1.0);
    let breakdown = vec![strong, sparse, dense, majority];
    Ok(CostReport {
        strongcoin_messages: breakdown[0].messages,
        strongcoin_msg_size: breakdown[0].size_bits,
        publish_messages: breakdown[1].messages + breakdown[2].messages,
        broadcast_messages: breakdown[3].messages,
        total_bits: breakdown.iter().map(|t| t.bits).sum(),
        latency_bound: p.r + 5.0,
        breakdown,
        derived: dp.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrongCoinVariant {
    /// Perfectly secure AVSS-based strong coin, `t < n/4`.
    Perfect,
    /// Hash-based AwVSS strong coin, `t < n/3`.
    Crypto,
}

/// Instantiates the transformation with one of the two AVSS-based strong
/// coins and reports its cost. `kappa` is the security parameter (bits) and
/// only affects the crypto variant.
pub fn instantiate_perfect_or_crypto(
    variant: StrongCoinVariant,
    n: usize,
    epsilon: f64,
    delta_prime: f64,
    kappa: f64,
) -> Result<CostReport, ParamError> {
    if n < 1 {
        return Err(ParamError::NoParties(n));
    }
    if delta_prime.is_nan() || delta_prime <= 0.0 || delta_prime >= 1.0 - 1.0 / n as f64 {
        return Err(ParamError::CommitteeWouldReachN { delta_prime });
    }
    let (k, alpha, m, l) = match variant {
        StrongCoinVariant::Perfect => (
            4.0,
            0.25,
            CostPoly::monomial(1.0, 4.0, 0),
            CostPoly::monomial(1.0, 0.0, 1),
        ),
        StrongCoinVariant::Crypto => (
            3.0,
            1.0 / 3.0,
            CostPoly::monomial(1.0, 3.0, 1),
            CostPoly::constant(kappa),
        ),
    };
    let z = (1.0 - delta_prime) / 2.0;
    let q = committee_count(n, k);
    let p = CoinParams {
        n,
        t: 0,
        z,
        k,
        epsilon,
        alpha,
        delta: 1.0 - (1.0 - delta_prime) / (2.0 * q as f64),
        // The strong coins have logarithmic latency.
        r: (n as f64).log2().ceil().max(1.0),
    };
    transformation_cost(&p, &m, &l)
}

/// `C(n, k)` exactly.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `C(n, k)` saturating at `u64::MAX`.
pub fn binomial_u64(n: u64, k: u64) -> u64 {
    binomial(n, k).to_u64().unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, k: f64, z: f64, epsilon: f64, alpha: f64) -> CoinParams {
        CoinParams {
            n,
            t: 0,
            z,
            k,
            epsilon,
            alpha,
            delta: 1.0,
            r: 1.0,
        }
    }

    #[test]
    fn sixteen_parties_quadratic() {
        let dp = derive_params(&params(16, 2.0, 0.3, 0.05, 1.0 / 3.0)).unwrap();
        assert_eq!(dp.q, 33);
        assert!((dp.z_prime - 0.1).abs() < 1e-15);
        assert_eq!((dp.c, dp.s, dp.d, dp.delta_cap), (1, 16, 1, 11));
        assert_eq!(dp.live_threshold, 33);
        assert_eq!(dp.output_threshold, 11);
    }

    #[test]
    fn single_party_branches() {
        // z - 1.6/sqrt(3) = 2.0762 > z/3 = 1, so the second branch wins here.
        let dp = derive_params(&params(1, 2.0, 3.0, 0.1, 1.0 / 3.0)).unwrap();
        assert_eq!(dp.q, 3);
        assert!((dp.z_prime - (3.0 - 1.6 / 3f64.sqrt())).abs() < 1e-15);
        assert_eq!((dp.c, dp.s), (2, 1));
        // z = 0.3 exercises the z/3 branch.
        let dp = derive_params(&params(1, 2.0, 0.3, 0.1, 1.0 / 3.0)).unwrap();
        assert!((dp.z_prime - 0.1).abs() < 1e-15);
        assert_eq!((dp.c, dp.s), (1, 1));
    }

    #[test]
    fn distinct_diagnostics() {
        let base = params(10, 2.0, 0.3, 0.05, 1.0 / 3.0);
        let cases = [
            (
                CoinParams {
                    epsilon: 0.4,
                    ..base.clone()
                },
                "epsilon",
            ),
            (
                CoinParams {
                    alpha: 0.34,
                    epsilon: 0.01,
                    ..base.clone()
                },
                "alpha",
            ),
            (
                CoinParams {
                    k: 1.5,
                    ..base.clone()
                },
                "k must",
            ),
            (
                CoinParams {
                    z: 0.0,
                    ..base.clone()
                },
                "z must",
            ),
            (
                CoinParams {
                    n: 0,
                    ..base.clone()
                },
                "n must",
            ),
        ];
        let mut seen = Vec::new();
        for (p, needle) in cases {
            let err = derive_params(&p).unwrap_err();
            assert!(err.to_string().contains(needle), "{err}");
            seen.push(std::mem::discriminant(&err));
        }
        seen.dedup();
        assert_eq!(seen.len(), 5);
        assert!(matches!(
            derive_params(&params(10, 2.0, 0.3, 0.4, 1.0 / 3.0)),
            Err(ParamError::EpsilonNotBelowAlpha { .. })
        ));
    }

    #[test]
    fn exact_power_ceiling() {
        // 64^(3/2) = 512 and 8^(4/3) = 16 exactly.
        assert_eq!(ceil_committee_power(64, 4.0), 512);
        assert_eq!(ceil_committee_power(8, 3.0), 16);
        assert_eq!(ceil_committee_power(9, 3.0), 19);
        assert_eq!(ceil_committee_power(32, 2.5), 64);
        assert_eq!(ceil_committee_power(1, 7.3), 1);
    }

    #[test]
    fn cost_for_sixteen() {
        let p = params(16, 2.0, 0.3, 0.05, 1.0 / 3.0);
        let r = transformation_cost(
            &p,
            &CostPoly::monomial(1.0, 2.0, 0),
            &CostPoly::constant(8.0),
        )
        .unwrap();
        assert_eq!(r.strongcoin_messages, 8448.0);
        assert_eq!(r.strongcoin_msg_size, 8.0 + 6.0);
        assert_eq!(r.latency_bound, 6.0);
        let sum: f64 = r.breakdown.iter().map(|t| t.bits).sum();
        assert_eq!(r.total_bits, sum);

        let zero = transformation_cost(&p, &CostPoly::zero(), &CostPoly::constant(8.0)).unwrap();
        assert_eq!(zero.strongcoin_messages, 0.0);
        assert_eq!(zero.publish_messages, r.publish_messages);
        assert_eq!(zero.broadcast_messages, r.broadcast_messages);

        let neg = transformation_cost(&p, &CostPoly::constant(-1.0), &CostPoly::constant(8.0));
        assert!(matches!(neg, Err(ParamError::BadPolynomial { .. })));
    }

    #[test]
    fn overrides_are_flagged_and_checked() {
        let p = params(16, 2.0, 0.3, 0.05, 1.0 / 3.0);
        let o = ParamOverrides {
            q: Some(5),
            s: Some(9),
            d: Some(2),
            ..Default::default()
        };
        let dp = derive_params_with_overrides(&p, &o).unwrap();
        assert!(dp.overridden);
        assert_eq!((dp.q, dp.s, dp.d, dp.delta_cap), (5, 9, 2, 6));
        let even = ParamOverrides {
            q: Some(4),
            ..Default::default()
        };
        assert!(derive_params_with_overrides(&p, &even).is_err());
    }

    #[test]
    fn perfect_and_crypto_instantiation() {
        let perfect =
            instantiate_perfect_or_crypto(StrongCoinVariant::Perfect, 1_000_000, 0.01, 0.9, 128.0)
                .unwrap();
        assert_eq!(perfect.dominant_term().name, "strong_coin");
        let crypto =
            instantiate_perfect_or_crypto(StrongCoinVariant::Crypto, 1_000_000, 0.1, 0.5, 128.0)
                .unwrap();
        assert_eq!(crypto.dominant_term().name, "strong_coin");
        assert_eq!(
            crypto.strongcoin_msg_size,
            128.0 + tag_bits(crypto.derived.q) as f64
        );
        assert!(matches!(
            instantiate_perfect_or_crypto(StrongCoinVariant::Perfect, 10, 0.01, 0.999, 128.0),
            Err(ParamError::CommitteeWouldReachN { .. })
        ));
    }

    #[test]
    fn tag_widths() {
        assert_eq!(tag_bits(1), 0);
        assert_eq!(tag_bits(2), 1);
        assert_eq!(tag_bits(33), 6);
        assert_eq!(tag_bits(64), 6);
    }

    #[test]
    fn small_binomials() {
        assert_eq!(binomial_u64(14, 3), 364);
        assert_eq!(binomial_u64(9, 2), 36);
        assert_eq!(binomial_u64(3, 5), 0);
    }
}
