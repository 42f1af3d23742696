//! Subcommand implementations. Each writes its machine-readable result to
//! `--out` (if given) and a short summary to standard output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use coinforge_core::analysis::{
    trials_csv, verify_anticoncentration as check_anticoncentration, AntiConcentration,
};
use coinforge_core::combinatorics::{
    gen_committees as generate_committees, verify_committees, verify_publish_graph,
    CombinatoricsError,
};
use coinforge_core::config::digest_of;
use coinforge_core::experiment::{
    run_experiment, CrusaderBatch, ExperimentError, PropertyRun, PublishBatch, Setup,
};
use coinforge_core::params::{
    cost_report as transformation_report, instantiate_perfect_or_crypto, StrongCoinVariant,
};
use coinforge_core::protocols::elect_leader;
use coinforge_core::simnet::{Output, SimError, TrialReport};
use coinforge_core::{CommitteeLayout, CostPoly, CostReport, ExperimentConfig};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::args::{
    parse_bits, AntiArgs, ConfigArgs, CostArgs, CrusaderArgs, GenArgs, LeaderArgs, PublishArgs,
    RunArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("property check failed: {0}")]
    Property(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Property(_) => 2,
            CliError::Config(_) => 3,
            CliError::Write { .. } => 1,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match &e {
            ExperimentError::Combinatorics(CombinatoricsError::AttemptsExhausted { .. })
            | ExperimentError::Sim(SimError::EventLimit(_)) => CliError::Property(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<CombinatoricsError> for CliError {
    fn from(e: CombinatoricsError) -> Self {
        ExperimentError::from(e).into()
    }
}

/// An output document: the config digest and seed, then the body's fields.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    config_digest: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn emit<T: Serialize>(
    out: Option<&Path>,
    digest: &str,
    seed: u64,
    body: &T,
) -> Result<(), CliError> {
    if let Some(path) = out {
        let doc = Document {
            config_digest: digest,
            seed,
            body,
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
        text.push('\n');
        write_file(path, &text)?;
    }
    Ok(())
}

fn write_event_log(
    path: &Path,
    cfg: &ExperimentConfig,
    report: &TrialReport,
) -> Result<(), CliError> {
    let header = json!({"config_digest": cfg.digest(), "seed": report.seed});
    write_file(path, &format!("{header}\n{}", report.log_ndjson()))
}

fn write_csv(path: &Path, cfg: &ExperimentConfig, reports: &[TrialReport]) -> Result<(), CliError> {
    let text = format!(
        "# config_digest={} seed={}\n{}",
        cfg.digest(),
        cfg.seed,
        trials_csv(reports)
    );
    write_file(path, &text)
}

fn load_layout(cfg: &ExperimentConfig) -> Result<CommitteeLayout, CliError> {
    let path = cfg
        .layout
        .as_ref()
        .ok_or_else(|| CliError::Config("a layout file is required (--layout)".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("missing layout file {}: {e}", path.display())))?;
    CommitteeLayout::from_json(&text)
        .map_err(|e| CliError::Config(format!("malformed layout {}: {e}", path.display())))
}

fn derived(cfg: &ExperimentConfig) -> Result<coinforge_core::DerivedParams, CliError> {
    cfg.params
        .derive()
        .map_err(|e| CliError::Config(e.to_string()))
}

pub fn derive(a: &ConfigArgs) -> Result<(), CliError> {
    let cfg = a.resolve()?;
    let dp = derived(&cfg)?;
    println!(
        "q={} z′={} c={} s={} d={} Δ={} live_threshold={} output_threshold={}{}",
        dp.q,
        // Twelve significant digits, so that 0.3 / 3 reads as 0.1.
        format!("{:.12e}", dp.z_prime)
            .parse::<f64>()
            .expect("formatted float parses"),
        dp.c,
        dp.s,
        dp.d,
        dp.delta_cap,
        dp.live_threshold,
        dp.output_threshold,
        if dp.overridden { " (overridden)" } else { "" }
    );
    emit(
        cfg.out.as_deref(),
        &cfg.digest(),
        cfg.seed,
        &json!({ "derived": dp }),
    )
}

pub fn gen_committees(a: &GenArgs) -> Result<(), CliError> {
    let cfg = a.cfg.resolve()?;
    let dp = derived(&cfg)?;
    let p = &cfg.params.params;
    let g = generate_committees(
        dp.n,
        dp.q,
        dp.s,
        p.alpha,
        p.epsilon,
        dp.c,
        cfg.seed,
        cfg.verification,
        cfg.budget,
        a.max_attempts,
    )?;
    let mut layout = g.value;
    let mut graph_attempts = 0;
    if a.graphs {
        graph_attempts =
            layout.attach_graphs(dp.d, dp.delta_cap, cfg.seed, cfg.verification, cfg.budget)?;
    }
    println!(
        "{} committees of {} out of {} parties after {} attempt(s), verification {:?}{}",
        dp.q,
        dp.s,
        dp.n,
        g.attempts,
        cfg.verification,
        if a.graphs {
            format!("; graphs after {graph_attempts} attempt(s)")
        } else {
            String::new()
        }
    );
    let body = json!({"attempts": g.attempts, "graph_attempts": graph_attempts, "layout": layout});
    emit(cfg.out.as_deref(), &cfg.digest(), cfg.seed, &body)
}

pub fn gen_graphs(a: &ConfigArgs) -> Result<(), CliError> {
    let cfg = a.resolve()?;
    let dp = derived(&cfg)?;
    let mut layout = load_layout(&cfg)?;
    let attempts =
        layout.attach_graphs(dp.d, dp.delta_cap, cfg.seed, cfg.verification, cfg.budget)?;
    println!(
        "{} graphs with receiver degree Δ={} (d={}) after {attempts} attempt(s)",
        layout.graphs.len(),
        dp.delta_cap,
        dp.d
    );
    emit(
        cfg.out.as_deref(),
        &cfg.digest(),
        cfg.seed,
        &json!({"attempts": attempts, "layout": layout}),
    )
}

pub fn verify(a: &ConfigArgs) -> Result<(), CliError> {
    let cfg = a.resolve()?;
    let dp = derived(&cfg)?;
    let layout = load_layout(&cfg)?;
    let p = &cfg.params.params;
    let committees = verify_committees(
        &layout,
        p.alpha,
        p.epsilon,
        dp.c,
        cfg.verification,
        cfg.budget,
        cfg.seed,
    )?;
    let mut graphs = Vec::new();
    for (g, committee) in layout.graphs.iter().zip(&layout.committees) {
        graphs.push(verify_publish_graph(
            g,
            committee,
            dp.d,
            cfg.verification,
            cfg.budget,
        )?);
    }
    let failed_graphs = graphs.iter().filter(|r| !r.passed()).count();
    println!(
        "committees: {:?} ({} sets checked); graphs: {} checked, {failed_graphs} failed",
        committees.outcome,
        committees.sets_checked,
        graphs.len()
    );
    emit(
        cfg.out.as_deref(),
        &cfg.digest(),
        cfg.seed,
        &json!({"committees": committees, "graphs": graphs}),
    )?;
    if !committees.passed() || failed_graphs > 0 {
        return Err(CliError::Property("layout does not verify".into()));
    }
    Ok(())
}

pub fn run_coin(a: &RunArgs) -> Result<(), CliError> {
    let cfg = a.cfg.resolve()?;
    let (run, reports) = run_experiment(&cfg)?;
    if let Some(path) = &cfg.out {
        write_file(path, &(run.to_json() + "\n"))?;
    }
    if let Some(path) = &a.csv {
        write_csv(path, &cfg, &reports)?;
    }
    if let Some(path) = &cfg.event_log {
        let report = Setup::from_config(&cfg)?.trial(&cfg, cfg.seed, true)?;
        write_event_log(path, &cfg, &report)?;
    }
    print!("{}", run.estimate.to_table());
    println!(
        "audit: {}/{} trials within caps, max latency {}",
        run.audit.trials - run.audit.failures,
        run.audit.trials,
        run.audit
            .max_latency
            .map_or("-".into(), |l| format!("{l:.3}"))
    );
    if !run.audit.passed() {
        let (seed, term) = run.audit.first_failure.clone().unwrap_or_default();
        return Err(CliError::Property(format!(
            "audit term {term} exceeded in trial seed {seed}"
        )));
    }
    if !run.estimate.passed {
        return Err(CliError::Property(format!(
            "common-uniform rate {:.4} below target {:.4}",
            run.estimate.rate, run.estimate.target
        )));
    }
    Ok(())
}

pub fn estimate_fairness(a: &RunArgs) -> Result<(), CliError> {
    let cfg = a.cfg.resolve()?;
    let (run, reports) = run_experiment(&cfg)?;
    emit(
        cfg.out.as_deref(),
        &cfg.digest(),
        cfg.seed,
        &json!({"estimate": run.estimate}),
    )?;
    if let Some(path) = &a.csv {
        write_csv(path, &cfg, &reports)?;
    }
    print!("{}", run.estimate.to_table());
    if !run.estimate.passed {
        return Err(CliError::Property(format!(
            "common-uniform rate {:.4} below target {:.4}",
            run.estimate.rate, run.estimate.target
        )));
    }
    Ok(())
}

fn report_property(kind: &str, run: &PropertyRun) -> Result<(), CliError> {
    println!(
        "{kind}: {} trials, {} violations, honest outputs {:?}, max latency {}",
        run.trials,
        run.violations,
        run.outputs,
        run.audit
            .max_latency
            .map_or("-".into(), |l| format!("{l:.3}"))
    );
    if let Some((seed, what)) = &run.first_violation {
        return Err(CliError::Property(format!("trial seed {seed}: {what}")));
    }
    if let Some((seed, term)) = &run.audit.first_failure {
        return Err(CliError::Property(format!(
            "audit term {term} exceeded in trial seed {seed}"
        )));
    }
    Ok(())
}

pub fn run_crusader(a: &CrusaderArgs) -> Result<(), CliError> {
    let inputs = a.inputs.as_deref().map(parse_bits).transpose()?;
    let mut flags = a.cfg.clone();
    if flags.config.is_none() {
        // Standalone crusader needs no coin parameters; fill neutral ones.
        flags.n = flags
            .n
            .or(flags.s)
            .or(inputs.as_ref().map(Vec::len))
            .or(Some(4));
        flags.z = flags.z.or(Some(0.3));
        flags.k = flags.k.or(Some(2.0));
        flags.epsilon = flags.epsilon.or(Some(1.0 / 12.0));
        flags.alpha = flags.alpha.or(Some(1.0 / 3.0));
    }
    let cfg = flags.resolve()?;
    let s = match (cfg.params.overrides.s, &inputs) {
        (Some(s), _) => s,
        (None, Some(v)) => v.len(),
        (None, None) => derived(&cfg)?.s,
    };
    let batch = CrusaderBatch {
        s,
        inputs,
        strategy: cfg.strategy.parse().map_err(
            |e: coinforge_core::simnet::StrategyParseError| CliError::Config(e.to_string()),
        )?,
        full_information: cfg.full_information,
        alpha: cfg.params.params.alpha,
        trials: cfg.trials,
        seed: cfg.seed,
    };
    let (run, _) = batch.run()?;
    emit(
        cfg.out.as_deref(),
        &cfg.digest(),
        cfg.seed,
        &json!({"s": s, "result": run}),
    )?;
    if let Some(path) = &cfg.event_log {
        write_event_log(path, &cfg, &batch.logged_trial()?)?;
    }
    report_property("crusader", &run)
}

pub fn run_publish(a: &PublishArgs) -> Result<(), CliError> {
    let cfg = a.cfg.resolve()?;
    let input = match a.input {
        None => None,
        Some(0) => Some(false),
        Some(1) => Some(true),
        Some(other) => {
            return Err(CliError::Config(format!(
                "--input must be 0 or 1 (got {other})"
            )))
        }
    };
    let batch = PublishBatch::from_setup(&cfg, input)?;
    let layout = batch.layout()?;
    let (run, _) = batch.run()?;
    let body = json!({
        "n": batch.n,
        "s": batch.s,
        "d": batch.d,
        "delta_cap": batch.delta_cap,
        "committee": layout.committees[0],
        "result": run,
    });
    emit(cfg.out.as_deref(), &cfg.digest(), cfg.seed, &body)?;
    if let Some(path) = &cfg.event_log {
        write_event_log(path, &cfg, &batch.logged_trial()?)?;
    }
    report_property("publish", &run)
}

pub fn verify_anticoncentration(a: &AntiArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let result = check_anticoncentration(a.n_max);
    let elapsed = start.elapsed().as_secs_f64();
    let digest = digest_of(&json!({"command": "verify-anticoncentration", "n_max": a.n_max}));
    emit(
        a.out.as_deref(),
        &digest,
        0,
        &json!({"n_max": a.n_max, "result": result}),
    )?;
    match result {
        AntiConcentration::Pass { pairs } => {
            println!(
                "pass: {pairs} (n, σ) pairs up to n = {} in {elapsed:.3} s",
                a.n_max
            );
            Ok(())
        }
        AntiConcentration::Fail { n, sigma } => Err(CliError::Property(format!(
            "bound fails at n = {n}, σ = {sigma}"
        ))),
    }
}

fn print_cost(report: &CostReport) {
    println!(
        "{:<20} {:>14} {:>10} {:>14}",
        "term", "messages", "size", "bits"
    );
    for t in &report.breakdown {
        println!(
            "{:<20} {:>14.4e} {:>10.1} {:>14.4e}",
            t.name, t.messages, t.size_bits, t.bits
        );
    }
    println!(
        "dominant: {}; latency bound {}",
        report.dominant_term().name,
        report.latency_bound
    );
}

pub fn cost_report(a: &CostArgs) -> Result<(), CliError> {
    let variant = match a.variant.as_str() {
        "perfect" => Some(StrongCoinVariant::Perfect),
        "crypto" => Some(StrongCoinVariant::Crypto),
        "benor" => None,
        other => {
            return Err(CliError::Config(format!(
                "unknown variant `{other}` (perfect, crypto, benor)"
            )))
        }
    };
    let (report, digest, seed) = match variant {
        Some(v) => {
            let base = a
                .cfg
                .config
                .as_deref()
                .map(ExperimentConfig::load)
                .transpose()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let n = a
                .cfg
                .n
                .or(base.as_ref().map(|c| c.params.params.n))
                .ok_or_else(|| CliError::Config("--n is required".into()))?;
            let epsilon = a
                .cfg
                .epsilon
                .or(base.as_ref().map(|c| c.params.params.epsilon))
                .ok_or_else(|| CliError::Config("--epsilon is required".into()))?;
            let report = instantiate_perfect_or_crypto(v, n, epsilon, a.delta_prime, a.kappa)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let digest = digest_of(&json!({
                "command": "cost-report", "variant": a.variant, "n": n, "epsilon": epsilon,
                "delta_prime": a.delta_prime, "kappa": a.kappa,
            }));
            (report, digest, 0)
        }
        None => {
            let cfg = a.cfg.resolve()?;
            let dp = derived(&cfg)?;
            // Each member broadcasts one private bit to its committee.
            let report = transformation_report(
                &cfg.params.params,
                &dp,
                &CostPoly::monomial(1.0, 2.0, 0),
                &CostPoly::constant(1.0),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            (report, cfg.digest(), cfg.seed)
        }
    };
    print_cost(&report);
    emit(
        a.cfg.out.as_deref(),
        &digest,
        seed,
        &json!({"variant": a.variant, "report": report}),
    )
}

pub fn leader(a: &LeaderArgs) -> Result<(), CliError> {
    if let Some(text) = &a.bits {
        let bits = parse_bits(text)?;
        let n = a
            .cfg
            .n
            .ok_or_else(|| CliError::Config("--n is required with --bits".into()))?;
        if n == 0 {
            return Err(CliError::Config("--n must be positive".into()));
        }
        let leader = elect_leader(&bits, n);
        println!("leader = {leader} of {n}");
        let digest = digest_of(&json!({"command": "leader", "bits": text, "n": n}));
        return emit(
            a.cfg.out.as_deref(),
            &digest,
            0,
            &json!({"bits": text, "n": n, "leader": leader}),
        );
    }
    let mut cfg = a.cfg.resolve()?;
    let n = cfg.params.params.n;
    cfg.ell = (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize;
    let report = Setup::from_config(&cfg)?.trial(&cfg, cfg.seed, false)?;
    let bits = match (&report.output, report.agreed) {
        (Some(Output::Bits(bits)), true) => bits.clone(),
        (Some(Output::Bit(b)), true) => vec![*b],
        _ => {
            return Err(CliError::Property(
                "honest parties did not agree on the coin bits".into(),
            ))
        }
    };
    let text: String = bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
    let leader = elect_leader(&bits, n);
    println!("coin bits {text}: leader = {leader} of {n}");
    emit(
        cfg.out.as_deref(),
        &cfg.digest(),
        cfg.seed,
        &json!({"bits": text, "n": n, "leader": leader}),
    )
}
