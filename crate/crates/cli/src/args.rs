//! Command-line flags and their merge with a JSON config document.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use coinforge_core::combinatorics::{Verification, DEFAULT_MAX_ATTEMPTS};
use coinforge_core::params::{CoinParams, ParamOverrides, ParamsDocument};
use coinforge_core::protocols::CoinMode;
use coinforge_core::ExperimentConfig;

use crate::commands::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "coinforge",
    version,
    about = "Weak common coins from committees of strong coins"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the derived protocol parameters.
    Derive(ConfigArgs),
    /// Sample and verify a committee layout.
    GenCommittees(GenArgs),
    /// Attach verified publish graphs to a layout.
    GenGraphs(ConfigArgs),
    /// Re-verify a layout and its graphs.
    Verify(ConfigArgs),
    /// Run the full coin for `trials` trials with fairness and audit checks.
    RunCoin(RunArgs),
    /// Run standalone crusader agreement.
    RunCrusader(CrusaderArgs),
    /// Run a standalone publish of one committee.
    RunPublish(PublishArgs),
    /// Estimate the common-uniform rate and write per-trial CSV.
    EstimateFairness(RunArgs),
    /// Exactly check the binomial anti-concentration bound.
    VerifyAnticoncentration(AntiArgs),
    /// Message and bit costs of the transformation.
    CostReport(CostArgs),
    /// Elect a leader from coin bits.
    Leader(LeaderArgs),
}

/// Flags mirroring the config document keys. Every flag overrides the
/// corresponding value from `--config`.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON config document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Strong-coin latency in units.
    #[arg(long = "R", visible_alias = "r")]
    pub r: Option<f64>,
    /// Override for the committee count (must be odd).
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub delta_cap: Option<usize>,
    /// Adversary, e.g. `committee_targeter:0,1+publish_delayer:0.5`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long, env = "COINFORGE_SEED")]
    pub seed: Option<u64>,
    /// Let the adversary read honest payloads.
    #[arg(long)]
    pub full_information: bool,
    /// `ideal` or `benor:<t_local>`.
    #[arg(long)]
    pub coin: Option<String>,
    /// Parallel coin instances.
    #[arg(long)]
    pub ell: Option<usize>,
    /// `exhaustive`, `sampled:<trials>` or `unverified`.
    #[arg(long)]
    pub verification: Option<String>,
    /// Enumeration budget for exhaustive verification.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Committee layout file.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Machine-readable output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Newline-delimited JSON event log of one trial.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Resamples before giving up.
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u32,
    /// Also attach publish graphs.
    #[arg(long)]
    pub graphs: bool,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Per-trial CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CrusaderArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Inputs as a 0/1 string, one per party; random per trial if omitted.
    #[arg(long)]
    pub inputs: Option<String>,
}

#[derive(Args, Debug)]
pub struct PublishArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Common member input; random per member if omitted.
    #[arg(long)]
    pub input: Option<u8>,
}

#[derive(Args, Debug)]
pub struct AntiArgs {
    #[arg(long, default_value_t = 64)]
    pub n_max: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CostArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// `perfect`, `crypto` or `benor`. The first two use only `n` and
    /// `epsilon`; `benor` uses the full parameters.
    #[arg(long, default_value = "benor")]
    pub variant: String,
    /// Target fairness of the instantiated coin.
    #[arg(long, default_value_t = 0.5)]
    pub delta_prime: f64,
    /// Security parameter in bits.
    #[arg(long, default_value_t = 128.0)]
    pub kappa: f64,
}

#[derive(Args, Debug)]
pub struct LeaderArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Coin bits as a 0/1 string; runs the coin if omitted.
    #[arg(long)]
    pub bits: Option<String>,
}

pub fn parse_bits(text: &str) -> Result<Vec<bool>, CliError> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CliError::Config(format!("bit string contains `{other}`"))),
        })
        .collect()
}

fn parse_coin(text: &str) -> Result<CoinMode, CliError> {
    match text.split_once(':') {
        None if text == "ideal" => Ok(CoinMode::Ideal),
        Some(("benor", t)) => t
            .parse()
            .map(|t_local| CoinMode::BenOr { t_local })
            .map_err(|_| CliError::Config(format!("bad coin `{text}`"))),
        _ => Err(CliError::Config(format!(
            "unknown coin `{text}` (ideal, benor:<t_local>)"
        ))),
    }
}

fn parse_verification(text: &str) -> Result<Verification, CliError> {
    match text.split_once(':') {
        None if text == "exhaustive" => Ok(Verification::Exhaustive),
        None if text == "unverified" => Ok(Verification::Unverified),
        Some(("sampled", t)) => t
            .parse()
            .map(|trials| Verification::Sampled { trials })
            .map_err(|_| CliError::Config(format!("bad verification `{text}`"))),
        _ => Err(CliError::Config(format!(
            "unknown verification `{text}` (exhaustive, sampled:<trials>, unverified)"
        ))),
    }
}

impl ConfigArgs {
    /// The config file, if any, with every given flag applied on top.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                ExperimentConfig::load(path).map_err(|e| CliError::Config(e.to_string()))?
            }
            None => {
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| {
                        CliError::Config(format!("--{name} is required without --config"))
                    })
                };
                ExperimentConfig::new(ParamsDocument {
                    params: CoinParams {
                        n: self.n.ok_or_else(|| {
                            CliError::Config("--n is required without --config".into())
                        })?,
                        t: 0,
                        z: need(self.z, "z")?,
                        k: need(self.k, "k")?,
                        epsilon: need(self.epsilon, "epsilon")?,
                        alpha: need(self.alpha, "alpha")?,
                        delta: 1.0,
                        r: 1.0,
                    },
                    overrides: ParamOverrides::default(),
                })
            }
        };
        let p = &mut cfg.params.params;
        set(&mut p.n, self.n);
        set(&mut p.t, self.t);
        set(&mut p.z, self.z);
        set(&mut p.k, self.k);
        set(&mut p.epsilon, self.epsilon);
        set(&mut p.alpha, self.alpha);
        set(&mut p.delta, self.delta);
        set(&mut p.r, self.r);
        let o = &mut cfg.params.overrides;
        for (slot, flag) in [
            (&mut o.q, self.q),
            (&mut o.c, self.c),
            (&mut o.s, self.s),
            (&mut o.d, self.d),
            (&mut o.delta_cap, self.delta_cap),
        ] {
            if flag.is_some() {
                *slot = flag;
            }
        }
        set(&mut cfg.strategy, self.strategy.clone());
        set(&mut cfg.trials, self.trials);
        set(&mut cfg.confidence, self.confidence);
        set(&mut cfg.seed, self.seed);
        cfg.full_information |= self.full_information;
        if let Some(c) = &self.coin {
            cfg.coin = parse_coin(c)?;
        }
        set(&mut cfg.ell, self.ell);
        if let Some(v) = &self.verification {
            cfg.verification = parse_verification(v)?;
        }
        set(&mut cfg.budget, self.budget);
        if self.layout.is_some() {
            cfg.layout.clone_from(&self.layout);
        }
        if self.out.is_some() {
            cfg.out.clone_from(&self.out);
        }
        if self.event_log.is_some() {
            cfg.event_log.clone_from(&self.event_log);
        }
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ConfigArgs {
        ConfigArgs {
            n: Some(16),
            z: Some(0.3),
            k: Some(2.0),
            epsilon: Some(0.05),
            alpha: Some(0.3333),
            ..Default::default()
        }
    }

    #[test]
    fn flags_alone_build_a_config() {
        let cfg = base().resolve().unwrap();
        assert_eq!(cfg.params.params.n, 16);
        assert_eq!(cfg.strategy, "fifo");
    }

    #[test]
    fn missing_parameter_is_a_config_error() {
        let mut a = base();
        a.k = None;
        assert!(matches!(a.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn coin_and_verification_syntax() {
        assert_eq!(
            parse_coin("benor:2").unwrap(),
            CoinMode::BenOr { t_local: 2 }
        );
        assert_eq!(
            parse_verification("sampled:10").unwrap(),
            Verification::Sampled { trials: 10 }
        );
        assert!(parse_verification("sometimes").is_err());
        assert_eq!(parse_bits("0110").unwrap(), vec![false, true, true, false]);
    }
}
