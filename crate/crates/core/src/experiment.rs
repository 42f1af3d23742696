//! Turns an [`ExperimentConfig`] into layouts, trials and summaries. The CLI
//! is a thin shell over these functions.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    audit_transcript, estimate_fairness, fairness_target, run_trials, AuditLimits,
    FairnessEstimate, GroundTruth,
};
use crate::combinatorics::{
    gen_committees, gen_publish_graph, sample_without_replacement, CombinatoricsError,
    CommitteeLayout, Verification, DEFAULT_MAX_ATTEMPTS,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::params::{crusader_fault_bound, CoinParams, DerivedParams, ParamError};
use crate::protocols::{
    crusader_parties, publish_parties, transform_parties, transform_sim_config, CoinMode,
    ProtocolError,
};
use crate::simnet::{
    run_simulation, Output, SimConfig, SimError, StrategyContext, StrategyParseError, StrategySpec,
    TrialReport,
};
use crate::PartyId;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error(transparent)]
    Strategy(#[from] StrategyParseError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing layout file {path}: {reason}")]
    Layout { path: PathBuf, reason: String },
    #[error("layout does not match parameters: {0}")]
    LayoutMismatch(String),
}

/// Everything a trial needs besides its seed.
#[derive(Clone, Debug)]
pub struct Setup {
    pub params: CoinParams,
    pub derived: DerivedParams,
    pub layout: CommitteeLayout,
    pub strategy: StrategySpec,
    /// Committee samples drawn before the layout verified; zero when loaded
    /// from a file or when `s = n`.
    pub layout_attempts: u32,
}

impl Setup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let params = cfg.params.params.clone();
        params.validate_for_simulation()?;
        let derived = cfg.params.derive()?;
        let strategy: StrategySpec = cfg.strategy.parse()?;
        let (mut layout, layout_attempts) = match &cfg.layout {
            Some(path) => (load_layout(path)?, 0),
            None => {
                let g = gen_committees(
                    derived.n,
                    derived.q,
                    derived.s,
                    params.alpha,
                    params.epsilon,
                    derived.c,
                    cfg.seed,
                    cfg.verification,
                    cfg.budget,
                    DEFAULT_MAX_ATTEMPTS,
                )?;
                (g.value, g.attempts)
            }
        };
        if layout.n != derived.n || layout.committees.len() != derived.q {
            return Err(ExperimentError::LayoutMismatch(format!(
                "layout has n = {}, q = {}; parameters give n = {}, q = {}",
                layout.n,
                layout.committees.len(),
                derived.n,
                derived.q
            )));
        }
        if layout.graphs.is_empty() {
            layout.attach_graphs(
                derived.d,
                derived.delta_cap,
                cfg.seed,
                cfg.verification,
                cfg.budget,
            )?;
        }
        let setup = Setup {
            params,
            derived,
            layout,
            strategy,
            layout_attempts,
        };
        setup.strategy.build(&setup.strategy_context(cfg.seed))?;
        transform_parties(&setup.derived, &setup.layout, cfg.ell, cfg.coin, cfg.seed)?;
        Ok(setup)
    }

    fn strategy_context(&self, seed: u64) -> StrategyContext {
        StrategyContext {
            n: self.derived.n,
            t: self.params.t,
            alpha: self.params.alpha,
            seed,
            committees: self.layout.committees.clone(),
        }
    }

    /// Messages one strong-coin instance may send.
    pub fn coin_messages_per_instance(&self, coin: CoinMode) -> f64 {
        match coin {
            CoinMode::Ideal => 0.0,
            CoinMode::BenOr { .. } => (self.derived.s * self.derived.s) as f64,
        }
    }

    pub fn audit_limits(&self, cfg: &ExperimentConfig) -> AuditLimits {
        AuditLimits::transform(
            &self.derived,
            cfg.ell,
            self.coin_messages_per_instance(cfg.coin),
            self.params.r,
        )
    }

    /// Runs one trial of `cfg.ell` parallel transformation instances.
    pub fn trial(
        &self,
        cfg: &ExperimentConfig,
        seed: u64,
        record_log: bool,
    ) -> Result<TrialReport, ExperimentError> {
        let parties = transform_parties(&self.derived, &self.layout, cfg.ell, cfg.coin, seed)?;
        let mut sim = transform_sim_config(
            &self.derived,
            &self.layout,
            cfg.ell,
            self.params.t,
            self.params.delta,
            self.params.r,
            self.params.alpha,
        );
        sim.full_information = cfg.full_information;
        sim.record_log = record_log;
        let mut adversary = self.strategy.build(&self.strategy_context(seed))?;
        Ok(run_simulation(parties, &mut adversary, &sim, seed)?)
    }
}

fn load_layout(path: &PathBuf) -> Result<CommitteeLayout, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Layout {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    CommitteeLayout::from_json(&text).map_err(|e| ExperimentError::Layout {
        path: path.clone(),
        reason: e.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub trials: u64,
    pub failures: u64,
    /// Seed and term of the first failing trial.
    pub first_failure: Option<(u64, String)>,
    pub max_latency: Option<f64>,
    pub max_honest_messages: u64,
    pub limits: AuditLimits,
}

impl AuditSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn over(reports: &[TrialReport], limits: &AuditLimits) -> Self {
        let mut summary = AuditSummary {
            trials: reports.len() as u64,
            failures: 0,
            first_failure: None,
            max_latency: None,
            max_honest_messages: 0,
            limits: limits.clone(),
        };
        for r in reports {
            let audit = audit_transcript(r, limits);
            if let Some(term) = audit.failed {
                summary.failures += 1;
                summary.first_failure.get_or_insert((r.seed, term));
            }
            if let Some(l) = r.latency {
                summary.max_latency = Some(summary.max_latency.map_or(l, |m: f64| m.max(l)));
            }
            summary.max_honest_messages = summary
                .max_honest_messages
                .max(r.honest_msgs_by_kind.values().sum());
        }
        summary
    }
}

/// Machine-readable result of a multi-trial run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinRun {
    pub config_digest: String,
    pub seed: u64,
    pub strategy: String,
    pub derived: DerivedParams,
    pub layout_attempts: u32,
    pub estimate: FairnessEstimate,
    pub audit: AuditSummary,
}

impl CoinRun {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run serializes")
    }
}

/// Runs `cfg.trials` trials and summarizes fairness and the transcript audit.
pub fn run_experiment(
    cfg: &ExperimentConfig,
) -> Result<(CoinRun, Vec<TrialReport>), ExperimentError> {
    let setup = Setup::from_config(cfg)?;
    let target = fairness_target(setup.params.delta, setup.derived.q, setup.params.z);
    let (estimate, reports) = estimate_fairness(
        cfg.trials,
        cfg.seed,
        cfg.confidence,
        target,
        GroundTruth::CoinMajority,
        cfg.ell,
        |seed| {
            setup.trial(cfg, seed, false).map_err(|e| match e {
                ExperimentError::Sim(s) => s,
                other => unreachable!("validated in Setup::from_config: {other}"),
            })
        },
    )?;
    let audit = AuditSummary::over(&reports, &setup.audit_limits(cfg));
    Ok((
        CoinRun {
            config_digest: cfg.digest(),
            seed: cfg.seed,
            strategy: setup.strategy.to_string(),
            derived: setup.derived.clone(),
            layout_attempts: setup.layout_attempts,
            estimate,
            audit,
        },
        reports,
    ))
}

/// Summary of a batch of standalone crusader or publish trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyRun {
    pub trials: u64,
    pub violations: u64,
    /// Seed and description of the first violating trial.
    pub first_violation: Option<(u64, String)>,
    /// Honest outputs by value: `"0"`, `"1"`, `"bottom"` or `"none"`.
    pub outputs: BTreeMap<String, u64>,
    pub audit: AuditSummary,
}

impl PropertyRun {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.audit.passed()
    }

    fn collect(
        reports: &[TrialReport],
        limits: &AuditLimits,
        check: impl Fn(usize, &TrialReport) -> Option<String>,
    ) -> Self {
        let mut run = PropertyRun {
            trials: reports.len() as u64,
            violations: 0,
            first_violation: None,
            outputs: BTreeMap::new(),
            audit: AuditSummary::over(reports, limits),
        };
        for (i, r) in reports.iter().enumerate() {
            for out in r.honest_outputs() {
                let key = match out {
                    Some(Output::Bit(b)) => (*b as u8).to_string(),
                    Some(Output::Bottom) => "bottom".into(),
                    Some(Output::Bits(_)) => "bits".into(),
                    None => "none".into(),
                };
                *run.outputs.entry(key).or_default() += 1;
            }
            if let Some(what) = check(i, r) {
                run.violations += 1;
                run.first_violation.get_or_insert((r.seed, what));
            }
        }
        run
    }
}

/// Inputs for trial `seed`: the fixed vector if given, else uniform bits.
fn trial_inputs(fixed: Option<&[bool]>, len: usize, seed: u64) -> Vec<bool> {
    match fixed {
        Some(v) => v.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..len).map(|_| rng.random()).collect()
        }
    }
}

/// Standalone crusader agreement among `s` parties, `ceil(s/3) - 1` of which
/// the strategy may corrupt.
pub struct CrusaderBatch {
    pub s: usize,
    pub inputs: Option<Vec<bool>>,
    pub strategy: StrategySpec,
    pub full_information: bool,
    pub alpha: f64,
    pub trials: u64,
    pub seed: u64,
}

impl CrusaderBatch {
    fn trial(&self, seed: u64, record_log: bool) -> Result<TrialReport, SimError> {
        let inputs = trial_inputs(self.inputs.as_deref(), self.s, seed);
        let mut cfg = SimConfig::new(self.s, crusader_fault_bound(self.s));
        cfg.full_information = self.full_information;
        cfg.record_log = record_log;
        let ctx = StrategyContext {
            n: self.s,
            t: cfg.t,
            alpha: self.alpha,
            seed,
            committees: vec![(0..self.s).collect()],
        };
        let mut adversary = self.strategy.build(&ctx).expect("validated in run");
        run_simulation(crusader_parties(&inputs), &mut adversary, &cfg, seed)
    }

    /// One trial with its event log, for inspection.
    pub fn logged_trial(&self) -> Result<TrialReport, ExperimentError> {
        self.check_strategy()?;
        Ok(self.trial(self.seed, true)?)
    }

    fn check_strategy(&self) -> Result<(), ExperimentError> {
        if let Some(v) = &self.inputs {
            if v.len() != self.s {
                return Err(ExperimentError::LayoutMismatch(format!(
                    "{} inputs for {} parties",
                    v.len(),
                    self.s
                )));
            }
        }
        let ctx = StrategyContext {
            n: self.s,
            t: crusader_fault_bound(self.s),
            alpha: self.alpha,
            seed: self.seed,
            committees: vec![(0..self.s).collect()],
        };
        self.strategy.build(&ctx)?;
        Ok(())
    }

    /// Runs the batch and checks validity, weak agreement and liveness.
    pub fn run(&self) -> Result<(PropertyRun, Vec<TrialReport>), ExperimentError> {
        self.check_strategy()?;
        let reports = run_trials(self.trials, self.seed, |seed| self.trial(seed, false))?;
        let check = |_: usize, r: &TrialReport| {
            let inputs = trial_inputs(self.inputs.as_deref(), self.s, r.seed);
            crusader_violation(&inputs, r)
        };
        Ok((
            PropertyRun::collect(&reports, &AuditLimits::crusader(self.s), check),
            reports,
        ))
    }
}

/// Validity, weak agreement and liveness of one crusader trial.
pub fn crusader_violation(inputs: &[bool], r: &TrialReport) -> Option<String> {
    if !r.live {
        return Some("an honest party did not output".into());
    }
    let honest: Vec<usize> = (0..inputs.len()).filter(|&p| r.honest[p]).collect();
    let bit = |b| honest.iter().any(|&p| r.outputs[p] == Some(Output::Bit(b)));
    if bit(false) && bit(true) {
        return Some("honest parties output both 0 and 1".into());
    }
    if let Some(&first) = honest.first() {
        let b = inputs[first];
        if honest.iter().all(|&p| inputs[p] == b)
            && honest.iter().any(|&p| r.outputs[p] != Some(Output::Bit(b)))
        {
            return Some(format!(
                "all honest inputs were {} but an output differs",
                b as u8
            ));
        }
    }
    None
}

/// Standalone publish of one random committee to all `n` parties.
pub struct PublishBatch {
    pub n: usize,
    pub s: usize,
    pub d: usize,
    pub delta_cap: usize,
    pub t: usize,
    /// Common member input; random per member when `None`.
    pub input: Option<bool>,
    pub strategy: StrategySpec,
    pub full_information: bool,
    pub alpha: f64,
    pub verification: Verification,
    pub budget: u64,
    pub trials: u64,
    pub seed: u64,
}

impl PublishBatch {
    pub fn from_setup(
        cfg: &ExperimentConfig,
        input: Option<bool>,
    ) -> Result<Self, ExperimentError> {
        cfg.params.params.validate_for_simulation()?;
        let dp = cfg.params.derive()?;
        Ok(PublishBatch {
            n: dp.n,
            s: dp.s,
            d: dp.d,
            delta_cap: dp.delta_cap,
            t: cfg.params.params.t,
            input,
            strategy: cfg.strategy.parse()?,
            full_information: cfg.full_information,
            alpha: cfg.params.params.alpha,
            verification: cfg.verification,
            budget: cfg.budget,
            trials: cfg.trials,
            seed: cfg.seed,
        })
    }

    /// The committee and its verified graph, drawn from the batch seed.
    pub fn layout(&self) -> Result<CommitteeLayout, ExperimentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let universe: Vec<PartyId> = (0..self.n).collect();
        let committee = sample_without_replacement(&mut rng, &universe, self.s);
        let graph = gen_publish_graph(
            0,
            &committee,
            self.n,
            self.d,
            self.delta_cap,
            self.seed,
            self.verification,
            self.budget,
            DEFAULT_MAX_ATTEMPTS,
        )?
        .value;
        Ok(CommitteeLayout {
            n: self.n,
            q: 1,
            s: self.s,
            seed: self.seed,
            committees: vec![committee],
            graphs: vec![graph],
            verified: self.verification,
        })
    }

    fn trial(
        &self,
        layout: &CommitteeLayout,
        seed: u64,
        record_log: bool,
    ) -> Result<TrialReport, SimError> {
        let inputs = trial_inputs(self.input.map(|b| vec![b; self.s]).as_deref(), self.s, seed);
        let mut cfg = SimConfig::new(self.n, self.t);
        cfg.full_information = self.full_information;
        cfg.record_log = record_log;
        let ctx = StrategyContext {
            n: self.n,
            t: self.t,
            alpha: self.alpha,
            seed,
            committees: layout.committees.clone(),
        };
        let mut adversary = self.strategy.build(&ctx).expect("validated in run");
        let parties = publish_parties(layout, 0, &inputs).expect("graph attached");
        run_simulation(parties, &mut adversary, &cfg, seed)
    }

    pub fn logged_trial(&self) -> Result<TrialReport, ExperimentError> {
        let layout = self.layout()?;
        self.check_strategy(&layout)?;
        Ok(self.trial(&layout, self.seed, true)?)
    }

    fn check_strategy(&self, layout: &CommitteeLayout) -> Result<(), ExperimentError> {
        let ctx = StrategyContext {
            n: self.n,
            t: self.t,
            alpha: self.alpha,
            seed: self.seed,
            committees: layout.committees.clone(),
        };
        self.strategy.build(&ctx)?;
        Ok(())
    }

    /// Runs the batch. With a common input, fewer than `d` honest parties
    /// may miss it; otherwise fewer than `d` honest parties may stay silent.
    pub fn run(&self) -> Result<(PropertyRun, Vec<TrialReport>), ExperimentError> {
        let layout = self.layout()?;
        self.check_strategy(&layout)?;
        let reports = run_trials(self.trials, self.seed, |seed| {
            self.trial(&layout, seed, false)
        })?;
        let mut limits = AuditLimits::publish(self.s, self.n, self.delta_cap);
        limits.latency = None;
        let check = |_: usize, r: &TrialReport| {
            let honest = (0..self.n).filter(|&p| r.honest[p]);
            match self.input {
                Some(b) => {
                    let missed = honest
                        .filter(|&p| r.outputs[p] != Some(Output::Bit(b)))
                        .count();
                    (missed >= self.d)
                        .then(|| format!("{missed} honest parties did not output {}", b as u8))
                }
                None => {
                    let silent = honest.filter(|&p| r.outputs[p].is_none()).count();
                    (silent >= self.d).then(|| format!("{silent} honest parties did not output"))
                }
            }
        };
        Ok((PropertyRun::collect(&reports, &limits, check), reports))
    }
}
