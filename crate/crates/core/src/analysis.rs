//! Exact and statistical checks: the binomial anti-concentration bound,
//! fairness estimation with Wilson intervals, and transcript audits against
//! the per-term message caps.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::params::{binomial, DerivedParams};
use crate::simnet::{CoinRecord, Output, SimError, Sub, TrialReport};

/// Result of the exact anti-concentration check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum AntiConcentration {
    Pass { pairs: u64 },
    Fail { n: u64, sigma: u64 },
}

impl AntiConcentration {
    pub fn passed(&self) -> bool {
        matches!(self, AntiConcentration::Pass { .. })
    }
}

/// Whether `Pr[|X - n/2| < sigma] <= 8 sigma / (5 sqrt n)` for
/// `X ~ Bin(n, 1/2)`, decided exactly.
///
/// With `S` the number of outcomes `k` with `|2k - n| < 2 sigma`, the
/// inequality is `S / 2^n <= 8 sigma / (5 sqrt n)`; both sides are
/// non-negative, so it is equivalent to `25 S^2 n <= 64 sigma^2 4^n`.
pub fn anticoncentration_holds(n: u64, sigma: u64, row: &[BigUint]) -> bool {
    let mut mass = BigUint::zero();
    for (k, c) in row.iter().enumerate() {
        if (2 * k as i128 - n as i128).unsigned_abs() < 2 * sigma as u128 {
            mass += c;
        }
    }
    let lhs = BigUint::from(25u32) * &mass * &mass * BigUint::from(n);
    let rhs = BigUint::from(64u32)
        * BigUint::from(sigma)
        * BigUint::from(sigma)
        * (BigUint::from(1u32) << (2 * n));
    lhs <= rhs
}

/// Checks every `n` in `1..=n_max` and every integer `sigma` in `0..=n`.
pub fn verify_anticoncentration(n_max: u64) -> AntiConcentration {
    let mut pairs = 0;
    for n in 1..=n_max {
        let row: Vec<BigUint> = (0..=n).map(|k| binomial(n, k)).collect();
        for sigma in 0..=n {
            pairs += 1;
            if !anticoncentration_holds(n, sigma, &row) {
                return AntiConcentration::Fail { n, sigma };
            }
        }
    }
    AntiConcentration::Pass { pairs }
}

/// Two-sided Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Chi-square goodness of fit against the uniform distribution over
/// `counts.len()` categories. Returns the statistic and the p-value.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("at least two categories");
    (stat, 1.0 - dist.cdf(stat))
}

/// Which hidden bit a trial's common output should match.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// Per instance, the majority of the fair coin bits, defined only when
    /// every coin of a good committee was fair.
    CoinMajority,
    /// Majority of the recorded private draws (ties → 0).
    DrawMajority,
}

/// The hidden bit `b*` of each parallel instance, or `None` when undefined.
pub fn global_bstar(report: &TrialReport, rule: GroundTruth, ell: usize) -> Option<Vec<bool>> {
    match rule {
        GroundTruth::DrawMajority => {
            let ones = report.draws.iter().filter(|(_, b)| *b).count();
            Some(vec![2 * ones > report.draws.len()])
        }
        GroundTruth::CoinMajority => (0..ell as u32)
            .map(|k| {
                let coins: Vec<&CoinRecord> =
                    report.coins.iter().filter(|c| c.id.instance == k).collect();
                if coins.is_empty() || coins.iter().any(|c| !c.bad && !c.fair) {
                    return None;
                }
                let fair: Vec<bool> = coins.iter().filter(|c| c.fair).map(|c| c.bit).collect();
                let ones = fair.iter().filter(|b| **b).count();
                (2 * ones != fair.len()).then_some(2 * ones > fair.len())
            })
            .collect(),
    }
}

fn output_bits(out: &Output) -> Option<Vec<bool>> {
    match out {
        Output::Bit(b) => Some(vec![*b]),
        Output::Bits(v) => Some(v.clone()),
        Output::Bottom => None,
    }
}

/// `1 - (1 - delta) q - z`.
pub fn fairness_target(delta: f64, q: usize, z: f64) -> f64 {
    1.0 - (1.0 - delta) * q as f64 - z
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessEstimate {
    pub trials: u64,
    pub live_count: u64,
    pub agreed_count: u64,
    /// Agreed outputs by bit (first bit for multi-bit outputs).
    pub bit_counts: [u64; 2],
    /// Agreed and equal to the hidden bit.
    pub common_uniform: u64,
    /// Trials whose hidden bit was undefined; counted as non-common.
    pub undefined_bstar: u64,
    pub rate: f64,
    pub agreement_rate: f64,
    pub confidence: f64,
    pub interval: (f64, f64),
    pub half_width: f64,
    pub target: f64,
    pub vacuous: bool,
    pub passed: bool,
}

impl FairnessEstimate {
    pub fn from_reports(
        reports: &[TrialReport],
        rule: GroundTruth,
        ell: usize,
        confidence: f64,
        target: f64,
    ) -> Self {
        let trials = reports.len() as u64;
        let mut est = FairnessEstimate {
            trials,
            live_count: 0,
            agreed_count: 0,
            bit_counts: [0; 2],
            common_uniform: 0,
            undefined_bstar: 0,
            rate: 0.0,
            agreement_rate: 0.0,
            confidence,
            interval: (0.0, 1.0),
            half_width: 0.0,
            target,
            vacuous: target <= 0.0,
            passed: false,
        };
        for r in reports {
            est.live_count += r.live as u64;
            let bstar = global_bstar(r, rule, ell);
            if bstar.is_none() {
                est.undefined_bstar += 1;
            }
            let Some(bits) = r.output.as_ref().filter(|_| r.agreed).and_then(output_bits) else {
                continue;
            };
            est.agreed_count += 1;
            est.bit_counts[bits[0] as usize] += 1;
            if bstar.as_ref() == Some(&bits) {
                est.common_uniform += 1;
            }
        }
        if trials > 0 {
            est.rate = est.common_uniform as f64 / trials as f64;
            est.agreement_rate = est.agreed_count as f64 / trials as f64;
        }
        est.interval = wilson_interval(est.common_uniform, trials, confidence);
        est.half_width = (est.interval.1 - est.interval.0) / 2.0;
        est.passed = est.vacuous || est.rate >= target - est.half_width;
        est
    }

    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let rows = [
            ("trials", self.trials.to_string()),
            ("live", self.live_count.to_string()),
            ("agreed", self.agreed_count.to_string()),
            (
                "bit 0 / 1",
                format!("{} / {}", self.bit_counts[0], self.bit_counts[1]),
            ),
            ("common uniform", self.common_uniform.to_string()),
            ("undefined b*", self.undefined_bstar.to_string()),
            ("rate", format!("{:.6}", self.rate)),
            (
                "interval",
                format!(
                    "[{:.6}, {:.6}] @ {}",
                    self.interval.0, self.interval.1, self.confidence
                ),
            ),
            ("target", format!("{:.6}", self.target)),
            ("vacuous", self.vacuous.to_string()),
            (
                "result",
                if self.passed { "pass" } else { "fail" }.to_string(),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().fold(String::new(), |mut acc, (k, v)| {
            let _ = writeln!(acc, "{k:<width$}  {v}");
            acc
        })
    }
}

/// Seed of trial `i` in the stream starting at `base`.
pub fn trial_seed(base: u64, i: u64) -> u64 {
    base ^ (i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `trials` independent trials across threads; results are returned in
/// trial order regardless of scheduling.
pub fn run_trials<F>(trials: u64, base_seed: u64, run: F) -> Result<Vec<TrialReport>, SimError>
where
    F: Fn(u64) -> Result<TrialReport, SimError> + Sync,
{
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(trials.max(1) as usize);
    let chunk = trials.div_ceil(threads as u64).max(1);
    let run = &run;
    let parts: Vec<Result<Vec<TrialReport>, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads as u64)
            .map(|t| {
                scope.spawn(move || {
                    let lo = t * chunk;
                    let hi = ((t + 1) * chunk).min(trials);
                    (lo..hi).map(|i| run(trial_seed(base_seed, i))).collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread"))
            .collect()
    });
    let mut out = Vec::with_capacity(trials as usize);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Runs a scenario `trials` times and estimates its common-uniform rate.
pub fn estimate_fairness<F>(
    trials: u64,
    base_seed: u64,
    confidence: f64,
    target: f64,
    rule: GroundTruth,
    ell: usize,
    run: F,
) -> Result<(FairnessEstimate, Vec<TrialReport>), SimError>
where
    F: Fn(u64) -> Result<TrialReport, SimError> + Sync,
{
    let reports = run_trials(trials, base_seed, run)?;
    Ok((
        FairnessEstimate::from_reports(&reports, rule, ell, confidence, target),
        reports,
    ))
}

/// Per-trial CSV rows: seed, agreement, bit, latency and message counts by
/// size class.
pub fn trials_csv(reports: &[TrialReport]) -> String {
    let mut out = String::from("seed,agreed,bit,latency,one_bit,tagged,opaque\n");
    for r in reports {
        let count = |k: &str| r.msg_count_by_class.get(k).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.seed,
            r.agreed,
            r.output_bit()
                .map_or(String::new(), |b| (b as u8).to_string()),
            r.latency.map_or(String::new(), |l| format!("{l:.6}")),
            count("one_bit"),
            count("tagged"),
            count("opaque"),
        );
    }
    out
}

/// Message caps for one kind of trial. `None` means the term is not
/// checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditLimits {
    pub crusader: f64,
    pub publish: f64,
    pub majority: f64,
    pub coin: f64,
    pub latency: Option<f64>,
}

impl AuditLimits {
    /// `ell` transformation instances: `4 s^2 q` crusader, `n Δ q` publish,
    /// `n^2` majority and `q M(s)` coin messages each, latency `R + 5`.
    pub fn transform(
        dp: &DerivedParams,
        ell: usize,
        coin_messages_per_instance: f64,
        r: f64,
    ) -> Self {
        let (n, s, q, l) = (dp.n as f64, dp.s as f64, dp.q as f64, ell as f64);
        AuditLimits {
            crusader: 4.0 * s * s * q * l,
            publish: n * dp.delta_cap as f64 * q * l,
            majority: n * n * l,
            coin: q * coin_messages_per_instance * l,
            latency: Some(r + 5.0),
        }
    }

    /// A standalone crusader instance among `s` parties.
    pub fn crusader(s: usize) -> Self {
        AuditLimits {
            crusader: 4.0 * (s * s) as f64,
            publish: 0.0,
            majority: 0.0,
            coin: 0.0,
            latency: Some(3.0),
        }
    }

    /// A standalone publish instance: crusader among `s`, then `n Δ` sends.
    pub fn publish(s: usize, n: usize, delta_cap: usize) -> Self {
        AuditLimits {
            crusader: 4.0 * (s * s) as f64,
            publish: (n * delta_cap) as f64,
            majority: 0.0,
            coin: 0.0,
            latency: Some(4.0),
        }
    }

    pub fn total(&self) -> f64 {
        self.crusader + self.publish + self.majority + self.coin
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditTerm {
    pub name: String,
    pub measured: f64,
    pub cap: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub terms: Vec<AuditTerm>,
    /// Name of the first violated term.
    pub failed: Option<String>,
    pub byzantine_messages: u64,
}

impl Audit {
    pub fn passed(&self) -> bool {
        self.failed.is_none()
    }
}

/// Checks honest-sent message counts and latency of one trial against
/// `limits`. Byzantine-sent messages are reported but not capped.
pub fn audit_transcript(report: &TrialReport, limits: &AuditLimits) -> Audit {
    let crusader = [Sub::CrusVal, Sub::CrusRelay, Sub::CrusAux]
        .iter()
        .map(|s| report.honest_messages(*s))
        .sum::<u64>() as f64;
    let publish = report.honest_messages(Sub::Pub) as f64;
    let majority = report.honest_messages(Sub::Maj) as f64;
    let coin = report.honest_messages(Sub::Coin) as f64;
    let mut terms = vec![
        AuditTerm {
            name: "crusader".into(),
            measured: crusader,
            cap: limits.crusader,
            ok: crusader <= limits.crusader,
        },
        AuditTerm {
            name: "publish".into(),
            measured: publish,
            cap: limits.publish,
            ok: publish <= limits.publish,
        },
        AuditTerm {
            name: "majority".into(),
            measured: majority,
            cap: limits.majority,
            ok: majority <= limits.majority,
        },
        AuditTerm {
            name: "coin".into(),
            measured: coin,
            cap: limits.coin,
            ok: coin <= limits.coin,
        },
    ];
    let total = crusader + publish + majority + coin;
    terms.push(AuditTerm {
        name: "total".into(),
        measured: total,
        cap: limits.total(),
        ok: total <= limits.total(),
    });
    if let Some(bound) = limits.latency {
        let measured = report.latency.unwrap_or(f64::INFINITY);
        terms.push(AuditTerm {
            name: "latency".into(),
            measured,
            cap: bound,
            ok: measured <= bound + 1e-9,
        });
    }
    Audit {
        failed: terms.iter().find(|t| !t.ok).map(|t| t.name.clone()),
        terms,
        byzantine_messages: report.byzantine_messages(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anticoncentration_small_cases() {
        let row = |n: u64| (0..=n).map(|k| binomial(n, k)).collect::<Vec<_>>();
        // n = 1, sigma = 1: probability 1 against 1.6.
        assert!(anticoncentration_holds(1, 1, &row(1)));
        // n = 4, sigma = 1: 6/16 against 0.8.
        assert!(anticoncentration_holds(4, 1, &row(4)));
        assert!(anticoncentration_holds(7, 0, &row(7)));
        assert!(verify_anticoncentration(64).passed());
    }

    #[test]
    fn anticoncentration_counts_pairs() {
        // sum over n = 1..=3 of (n + 1)
        assert_eq!(
            verify_anticoncentration(3),
            AntiConcentration::Pass { pairs: 9 }
        );
    }

    #[test]
    fn exact_check_agrees_with_float_comparison() {
        for n in 1..=30u64 {
            let row: Vec<BigUint> = (0..=n).map(|k| binomial(n, k)).collect();
            for sigma in 0..=n {
                let mass: f64 = (0..=n)
                    .filter(|&k| (2.0 * k as f64 - n as f64).abs() < 2.0 * sigma as f64)
                    .map(|k| statrs::function::factorial::binomial(n, k))
                    .sum::<f64>()
                    / 2f64.powi(n as i32);
                let bound = 8.0 * sigma as f64 / (5.0 * (n as f64).sqrt());
                assert_eq!(
                    anticoncentration_holds(n, sigma, &row),
                    mass <= bound,
                    "n={n} sigma={sigma}"
                );
            }
        }
    }

    #[test]
    fn wilson_interval_brackets_rate() {
        let (lo, hi) = wilson_interval(50, 100, 0.99);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(100, 100, 0.99);
        assert!(hi == 1.0 && lo > 0.9);
        let (lo2, hi2) = wilson_interval(200, 200, 0.99);
        assert!(hi2 - lo2 <= hi - lo);
    }

    #[test]
    fn chi_square_flat_counts_has_p_one() {
        let (stat, p) = chi_square_uniform(&[10, 10, 10, 10]);
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let (_, p) = chi_square_uniform(&[100, 0, 0, 0]);
        assert!(p < 1e-6);
    }

    #[test]
    fn vacuous_target_auto_passes() {
        let est = FairnessEstimate::from_reports(
            &[TrialReport::default()],
            GroundTruth::CoinMajority,
            1,
            0.99,
            fairness_target(0.0, 5, 0.1),
        );
        assert!(est.vacuous && est.passed);
        assert_eq!(est.undefined_bstar, 1);
    }

    #[test]
    fn audit_names_first_violation() {
        let mut report = TrialReport::default();
        report.honest_msgs_by_kind.insert("PUB".into(), 100);
        report.latency = Some(1.0);
        let audit = audit_transcript(&report, &AuditLimits::publish(4, 9, 3));
        assert_eq!(audit.failed.as_deref(), Some("publish"));
        report.honest_msgs_by_kind.insert("PUB".into(), 27);
        assert!(audit_transcript(&report, &AuditLimits::publish(4, 9, 3)).passed());
    }
}
