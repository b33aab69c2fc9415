use std::collections::BTreeMap;
use std::fs;
use std::panic;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use coinduct::{
    approximant, bisimilar, brute_force_optimal, canonical_F, cauchy_bound, derandomize, distance,
    first_return_probabilities, greedy_policy, iterate_to_fixpoint, merge, optimal_value,
    policy_value, prob_policy_value, recurrence_report, split, stationary_distribution,
    stream_distance, validate_apg, validate_chain, ContractiveSystem, FixpointError, MarkovError,
    Mdp, MdpError, Policy, ProbPolicy, Stream,
};

#[derive(Parser)]
#[command(name = "coinduct", version, about = "Fixpoint engine and its applications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Record,
}

#[derive(Args, Clone)]
struct Knobs {
    /// Convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Step horizon for Markov recurrence analysis.
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    /// Prefix / approximant depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Iteration count for the pairwise distance table.
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

impl Knobs {
    fn depth_or(&self, default: usize) -> usize {
        self.depth.unwrap_or(default)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0) {
            return Err(CliError::parse("--tol must be positive"));
        }
        if self.horizon == 0 || self.iters == 0 || self.depth == Some(0) {
            return Err(CliError::parse("integer knobs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fixpoint engine demonstration on the interval-halving map.
    Fixpoint {
        #[command(subcommand)]
        action: FixpointAction,
    },
    /// Coinductive stream operations over cyclic generators.
    Stream {
        #[command(subcommand)]
        action: StreamAction,
    },
    /// Markov chain analysis.
    Mc {
        #[command(subcommand)]
        action: McAction,
    },
    /// Markov decision process solving.
    Mdp {
        #[command(subcommand)]
        action: MdpAction,
    },
    /// Non-well-founded set pseudometric.
    Nwf {
        #[command(subcommand)]
        action: NwfAction,
    },
}

#[derive(Subcommand)]
enum FixpointAction {
    Demo {
        #[command(flatten)]
        knobs: Knobs,
    },
}

#[derive(Subcommand)]
enum StreamAction {
    Merge {
        a: String,
        b: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Split {
        a: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Distance {
        a: String,
        b: String,
        #[command(flatten)]
        knobs: Knobs,
    },
}

#[derive(Subcommand)]
enum McAction {
    Analyze {
        chain: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Recurrence {
        chain: String,
        #[command(flatten)]
        knobs: Knobs,
    },
}

#[derive(Subcommand)]
enum MdpAction {
    Solve {
        mdp: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Value {
        mdp: String,
        policy: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Derandomize {
        mdp: String,
        policy: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Bruteforce {
        mdp: String,
        #[command(flatten)]
        knobs: Knobs,
    },
}

#[derive(Subcommand)]
enum NwfAction {
    Bisim {
        a: String,
        b: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Distance {
        a: String,
        b: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Approx {
        a: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    Canonical {
        a: String,
        #[command(flatten)]
        knobs: Knobs,
    },
}

enum CliError {
    Parse(String),
    NonConvergence(String),
}

impl CliError {
    fn parse(msg: impl Into<String>) -> Self {
        CliError::Parse(msg.into())
    }
}

impl From<MarkovError> for CliError {
    fn from(e: MarkovError) -> Self {
        match e {
            MarkovError::NonConvergence(inner) => CliError::NonConvergence(inner.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        match e {
            MdpError::NonConvergence(_) => CliError::NonConvergence(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<coinduct::NwfError> for CliError {
    fn from(e: coinduct::NwfError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<FixpointError> for CliError {
    fn from(e: FixpointError) -> Self {
        match e {
            FixpointError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

/// Accumulated output: one schema tag plus ordered key/value fields. Record
/// mode prints the fields verbatim so reruns diff cleanly; text mode prints
/// the same fields with a `key: value` layout.
struct Report {
    schema: &'static str,
    fields: Vec<(String, String)>,
}

impl Report {
    fn new(schema: &'static str) -> Self {
        Report { schema, fields: Vec::new() }
    }

    fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.fields.push((key.into(), value.into()));
    }

    fn print(&self, format: Format) {
        match format {
            Format::Record => {
                println!("schema {}", self.schema);
                for (k, v) in &self.fields {
                    println!("{k} {v}");
                }
            }
            Format::Text => {
                for (k, v) in &self.fields {
                    println!("{k}: {v}");
                }
            }
        }
    }
}

fn fnum(x: f64) -> String {
    format!("{x}")
}

fn fvec(xs: &[f64]) -> String {
    xs.iter().map(|x| fnum(*x)).collect::<Vec<_>>().join(" ")
}

// ---- input schemas ----

#[derive(Deserialize)]
struct StreamFile {
    cycle: Vec<String>,
}

#[derive(Deserialize)]
struct ChainFile {
    matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct MdpFile {
    states: Vec<String>,
    actions: BTreeMap<String, Vec<String>>,
    transitions: BTreeMap<String, BTreeMap<String, Vec<(String, f64)>>>,
    rewards: BTreeMap<String, BTreeMap<String, f64>>,
    discount: f64,
}

#[derive(Deserialize)]
struct PolicyFile {
    choice: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct ProbPolicyFile {
    dist: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
struct ApgFile {
    nodes: Vec<usize>,
    children: BTreeMap<String, Vec<usize>>,
    root: usize,
}

fn load<T: serde::de::DeserializeOwned>(path: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{path}: {e}")))
}

fn load_stream(path: &str) -> Result<Stream<String>, CliError> {
    let file: StreamFile = load(path)?;
    if file.cycle.is_empty() {
        return Err(CliError::parse(format!("{path}: cycle must be nonempty")));
    }
    Ok(Stream::cyclic(file.cycle))
}

fn load_chain(path: &str) -> Result<coinduct::StochasticChain, CliError> {
    let file: ChainFile = load(path)?;
    Ok(validate_chain(file.matrix)?)
}

/// Resolved MDP plus the name tables needed to print human-readable output.
struct NamedMdp {
    mdp: Mdp,
    states: Vec<String>,
    actions: Vec<Vec<String>>,
}

impl NamedMdp {
    fn state_index(&self, name: &str) -> Result<usize, CliError> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| CliError::parse(format!("unknown state {name:?}")))
    }

    fn action_index(&self, state: usize, name: &str) -> Result<usize, CliError> {
        self.actions[state]
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| {
                CliError::parse(format!("unknown action {name:?} in state {:?}", self.states[state]))
            })
    }
}

fn load_mdp(path: &str) -> Result<NamedMdp, CliError> {
    let file: MdpFile = load(path)?;
    let states = file.states;
    let index_of = |name: &str| -> Result<usize, CliError> {
        states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| CliError::parse(format!("{path}: unknown state {name:?}")))
    };
    let mut actions: Vec<Vec<String>> = Vec::with_capacity(states.len());
    for s in &states {
        let acts = file
            .actions
            .get(s)
            .ok_or_else(|| CliError::parse(format!("{path}: no actions for state {s:?}")))?;
        actions.push(acts.clone());
    }
    let mut rewards = Vec::with_capacity(states.len());
    let mut kernel = Vec::with_capacity(states.len());
    for (si, s) in states.iter().enumerate() {
        let trans_s = file
            .transitions
            .get(s)
            .ok_or_else(|| CliError::parse(format!("{path}: no transitions for state {s:?}")))?;
        let rew_s = file
            .rewards
            .get(s)
            .ok_or_else(|| CliError::parse(format!("{path}: no rewards for state {s:?}")))?;
        let mut r_row = Vec::new();
        let mut k_row = Vec::new();
        for a in &actions[si] {
            let r = rew_s
                .get(a)
                .ok_or_else(|| CliError::parse(format!("{path}: no reward for ({s:?}, {a:?})")))?;
            let edges = trans_s.get(a).ok_or_else(|| {
                CliError::parse(format!("{path}: no transition row for ({s:?}, {a:?})"))
            })?;
            let mut dist = vec![0.0; states.len()];
            for (next, p) in edges {
                dist[index_of(next)?] += p;
            }
            r_row.push(*r);
            k_row.push(dist);
        }
        rewards.push(r_row);
        kernel.push(k_row);
    }
    let mdp = Mdp::new(rewards, kernel, file.discount)?;
    Ok(NamedMdp { mdp, states, actions })
}

fn load_policy(named: &NamedMdp, path: &str) -> Result<Policy, CliError> {
    let file: PolicyFile = load(path)?;
    let mut choice = vec![usize::MAX; named.states.len()];
    for (s, a) in &file.choice {
        let si = named.state_index(s)?;
        choice[si] = named.action_index(si, a)?;
    }
    if let Some(si) = choice.iter().position(|&c| c == usize::MAX) {
        return Err(CliError::parse(format!(
            "{path}: no choice for state {:?}",
            named.states[si]
        )));
    }
    Ok(Policy(choice))
}

fn load_prob_policy(named: &NamedMdp, path: &str) -> Result<ProbPolicy, CliError> {
    let file: ProbPolicyFile = load(path)?;
    let mut rows = vec![Vec::new(); named.states.len()];
    for (s, weights) in &file.dist {
        let si = named.state_index(s)?;
        let mut row = vec![0.0; named.actions[si].len()];
        for (a, w) in weights {
            row[named.action_index(si, a)?] += w;
        }
        rows[si] = row;
    }
    if let Some(si) = rows.iter().position(|r| r.is_empty()) {
        return Err(CliError::parse(format!(
            "{path}: no distribution for state {:?}",
            named.states[si]
        )));
    }
    let mu = ProbPolicy(rows);
    mu.validate(&named.mdp)?;
    Ok(mu)
}

fn load_apg(path: &str) -> Result<coinduct::Apg, CliError> {
    let file: ApgFile = load(path)?;
    let n = file.nodes.len();
    let mut expected: Vec<usize> = file.nodes.clone();
    expected.sort_unstable();
    expected.dedup();
    if expected != (0..n).collect::<Vec<_>>() {
        return Err(CliError::parse(format!(
            "{path}: nodes must be exactly 0..{}",
            n.saturating_sub(1)
        )));
    }
    let mut children = vec![Vec::new(); n];
    for (id, kids) in &file.children {
        let id: usize = id
            .parse()
            .map_err(|_| CliError::parse(format!("{path}: bad node id {id:?}")))?;
        if id >= n {
            return Err(CliError::parse(format!("{path}: node id {id} out of range")));
        }
        children[id] = kids.clone();
    }
    Ok(validate_apg(children, file.root)?)
}

// ---- subcommand bodies ----

fn run_fixpoint_demo(knobs: &Knobs) -> Result<Report, CliError> {
    let sys = ContractiveSystem::new(|x: &f64| x / 2.0, |a: &f64, b: &f64| (a - b).abs(), 0.5, 1)?;
    let result = iterate_to_fixpoint(&sys, &1.0, knobs.tol, 100_000)?;
    let bound = cauchy_bound(0.5, 3, 60, 0.5)?;
    let mut report = Report::new("coinduct.fixpoint.demo.v1");
    report.push("map", "x -> x/2 on the reals, contraction 1/2");
    report.push("start", "1");
    report.push("fixpoint", fnum(result.point));
    report.push("iterations", result.iterations.to_string());
    report.push("residual", fnum(result.residual));
    report.push("error_bound", fnum(result.error_bound));
    report.push("cauchy_bound_n3_m60", fnum(bound));
    Ok(report)
}

fn run_stream(action: &StreamAction) -> Result<(Report, Format), CliError> {
    match action {
        StreamAction::Merge { a, b, knobs } => {
            knobs.validate()?;
            let depth = knobs.depth_or(64);
            let s = load_stream(a)?;
            let t = load_stream(b)?;
            let prefix = merge(&s, &t).unfold(depth);
            let mut report = Report::new("coinduct.stream.merge.v1");
            report.push("depth", depth.to_string());
            report.push("prefix", prefix.symbols.join(" "));
            Ok((report, knobs.format))
        }
        StreamAction::Split { a, knobs } => {
            knobs.validate()?;
            let depth = knobs.depth_or(64);
            let s = load_stream(a)?;
            let (evens, odds) = split(&s);
            let mut report = Report::new("coinduct.stream.split.v1");
            report.push("depth", depth.to_string());
            report.push("even", evens.unfold(depth).symbols.join(" "));
            report.push("odd", odds.unfold(depth).symbols.join(" "));
            Ok((report, knobs.format))
        }
        StreamAction::Distance { a, b, knobs } => {
            knobs.validate()?;
            let depth = knobs.depth_or(64);
            let s = load_stream(a)?;
            let t = load_stream(b)?;
            let d = stream_distance(&s, &t, depth as u32);
            let mut report = Report::new("coinduct.stream.distance.v1");
            report.push("depth", depth.to_string());
            report.push("distance", d.to_string());
            report.push("value", fnum(d.value()));
            Ok((report, knobs.format))
        }
    }
}

fn run_mc(action: &McAction) -> Result<(Report, Format), CliError> {
    match action {
        McAction::Analyze { chain, knobs } => {
            knobs.validate()?;
            let chain = load_chain(chain)?;
            let stat = stationary_distribution(&chain, knobs.tol)?;
            let mut report = Report::new("coinduct.mc.analyze.v1");
            report.push("states", chain.n().to_string());
            report.push("stationary", fvec(&stat.u));
            report.push("iterations", stat.iterations.to_string());
            report.push("residual", fnum(stat.residual));
            report.push("contraction_power", stat.contraction_power.to_string());
            report.push("contraction_estimate", fnum(stat.contraction_estimate));
            for t in 0..chain.n() {
                let f = first_return_probabilities(&chain, t, knobs.horizon);
                let mu: f64 = f.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
                report.push(format!("mu_{t}"), fnum(mu));
            }
            Ok((report, knobs.format))
        }
        McAction::Recurrence { chain, knobs } => {
            knobs.validate()?;
            let chain = load_chain(chain)?;
            let mut report = Report::new("coinduct.mc.recurrence.v1");
            report.push("horizon", knobs.horizon.to_string());
            for t in 0..chain.n() {
                let stats = recurrence_report(&chain, t, knobs.horizon)?;
                report.push(format!("state_{t}_mu"), fnum(stats.mu_partial));
                report.push(format!("state_{t}_u_final"), fnum(*stats.u_seq.last().unwrap()));
                report.push(format!("state_{t}_renewal_residual"), fnum(stats.renewal_residual));
                report.push(
                    format!("state_{t}_sigma_rho_residual"),
                    fnum(stats.sigma_rho_residual),
                );
                report.push(format!("state_{t}_limit_residual"), fnum(stats.limit_residual));
            }
            Ok((report, knobs.format))
        }
    }
}

fn run_mdp(action: &MdpAction) -> Result<(Report, Format), CliError> {
    match action {
        MdpAction::Solve { mdp, knobs } => {
            knobs.validate()?;
            let named = load_mdp(mdp)?;
            let v = optimal_value(&named.mdp, knobs.tol)?;
            let policy = greedy_policy(&named.mdp, &v, knobs.tol);
            let mut report = Report::new("coinduct.mdp.solve.v1");
            report.push("optimal_value", fvec(&v.0));
            let choice: Vec<String> = policy
                .0
                .iter()
                .enumerate()
                .map(|(s, &a)| format!("{}={}", named.states[s], named.actions[s][a]))
                .collect();
            report.push("greedy_policy", choice.join(" "));
            match brute_force_optimal(&named.mdp, knobs.tol) {
                Ok((oracle, _)) => report.push("oracle_residual", fnum(v.sup_dist(&oracle))),
                Err(MdpError::TooLarge { policies }) => {
                    report.push("oracle_residual", format!("skipped ({policies} policies)"))
                }
                Err(e) => return Err(e.into()),
            }
            Ok((report, knobs.format))
        }
        MdpAction::Value { mdp, policy, knobs } => {
            knobs.validate()?;
            let named = load_mdp(mdp)?;
            let policy = load_policy(&named, policy)?;
            let v = policy_value(&named.mdp, &policy, knobs.tol)?;
            let mut report = Report::new("coinduct.mdp.value.v1");
            report.push("policy_value", fvec(&v.0));
            Ok((report, knobs.format))
        }
        MdpAction::Derandomize { mdp, policy, knobs } => {
            knobs.validate()?;
            let named = load_mdp(mdp)?;
            let mu = load_prob_policy(&named, policy)?;
            let v_mu = prob_policy_value(&named.mdp, &mu, knobs.tol)?;
            let delta = derandomize(&named.mdp, &mu, knobs.tol)?;
            let v_delta = policy_value(&named.mdp, &delta, knobs.tol)?;
            let mut report = Report::new("coinduct.mdp.derandomize.v1");
            let choice: Vec<String> = delta
                .0
                .iter()
                .enumerate()
                .map(|(s, &a)| format!("{}={}", named.states[s], named.actions[s][a]))
                .collect();
            report.push("policy", choice.join(" "));
            report.push("randomized_value", fvec(&v_mu.0));
            report.push("deterministic_value", fvec(&v_delta.0));
            let worst = v_mu
                .0
                .iter()
                .zip(&v_delta.0)
                .map(|(m, d)| m - d)
                .fold(f64::NEG_INFINITY, f64::max);
            report.push("max_value_loss", fnum(worst.max(0.0)));
            Ok((report, knobs.format))
        }
        MdpAction::Bruteforce { mdp, knobs } => {
            knobs.validate()?;
            let named = load_mdp(mdp)?;
            let (v, policy) = brute_force_optimal(&named.mdp, knobs.tol)?;
            let mut report = Report::new("coinduct.mdp.bruteforce.v1");
            report.push("optimal_value", fvec(&v.0));
            let choice: Vec<String> = policy
                .0
                .iter()
                .enumerate()
                .map(|(s, &a)| format!("{}={}", named.states[s], named.actions[s][a]))
                .collect();
            report.push("best_policy", choice.join(" "));
            Ok((report, knobs.format))
        }
    }
}

fn run_nwf(action: &NwfAction) -> Result<(Report, Format), CliError> {
    match action {
        NwfAction::Bisim { a, b, knobs } => {
            knobs.validate()?;
            let g1 = load_apg(a)?;
            let g2 = load_apg(b)?;
            let mut report = Report::new("coinduct.nwf.bisim.v1");
            report.push("bisimilar", if bisimilar(&g1, &g2) { "yes" } else { "no" });
            Ok((report, knobs.format))
        }
        NwfAction::Distance { a, b, knobs } => {
            knobs.validate()?;
            let g1 = load_apg(a)?;
            let g2 = load_apg(b)?;
            let d = distance(&g1, &g2);
            let mut report = Report::new("coinduct.nwf.distance.v1");
            report.push("distance", d.to_string());
            Ok((report, knobs.format))
        }
        NwfAction::Approx { a, knobs } => {
            knobs.validate()?;
            // Approximant renderings can grow steeply with the level, so the
            // tower default is deliberately shallow.
            let depth = knobs.depth_or(8);
            let g = load_apg(a)?;
            let mut report = Report::new("coinduct.nwf.approx.v1");
            for n in 0..=depth {
                report.push(format!("level_{n}"), approximant(&g, n).render());
            }
            Ok((report, knobs.format))
        }
        NwfAction::Canonical { a, knobs } => {
            knobs.validate()?;
            let g = load_apg(a)?;
            let canon = canonical_F(&g);
            let mut report = Report::new("coinduct.nwf.canonical.v1");
            report.push("nodes", canon.node_count().to_string());
            report.push("root", canon.root().to_string());
            for v in 0..canon.node_count() {
                let kids: Vec<String> = canon.children(v).iter().map(|k| k.to_string()).collect();
                report.push(format!("children_{v}"), kids.join(" "));
            }
            Ok((report, knobs.format))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (report, format) = match &cli.command {
        Command::Fixpoint { action } => match action {
            FixpointAction::Demo { knobs } => {
                knobs.validate()?;
                (run_fixpoint_demo(knobs)?, knobs.format)
            }
        },
        Command::Stream { action } => run_stream(action)?,
        Command::Mc { action } => run_mc(action)?,
        Command::Mdp { action } => run_mdp(action)?,
        Command::Nwf { action } => run_nwf(action)?,
    };
    report.print(format);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CliError::Parse(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(CliError::NonConvergence(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(4)
        }
    }
}
