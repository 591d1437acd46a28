mod failure;
mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rmdp_core::factorize::factorize_general;
use rmdp_core::generate::{generate_instance, GeneratorConfig, GeneratorMode};
use rmdp_core::gff::{gff_covariance, pinned_green, ray_knight_check};
use rmdp_core::io::{self, InstanceFile, PolicyFile};
use rmdp_core::solve::{
    brute_force_optimal, dp_check, poisson_solve, policy_iterate_biconnected, policy_iterate_hybrid,
    policy_iterate_standard, PolicyIterationTrace, StepRule,
};
use rmdp_core::structure::{self, block_decomposition};
use rmdp_core::{config, factorize, linalg, mdp, MdpInstance, Policy, RmdpError, Tolerances};

use failure::{locate, Failure};
use report::*;

const SCHEMAS: &str = "\
JSON formats:

  Instance file
    {\"states\": [label, ...], \"actions\": [label, ...],
     \"kernels\": {action label: n x n rows, ...},
     \"rewards\": n x m rows (state by action)}
    Every kernel row must sum to 1; no state may be absorbing.

  Policy file
    {\"weights\": n x m rows}  or  {\"deterministic\": [action label per state]}

  Generator config
    {\"states\": n, \"actions\": m, \"mode\": \"weighted\" | \"blocks\",
     \"edges\": [[i, j], ...], \"weights\": [w, ...], \"blocks\": [[i, ...], ...],
     \"rho_min\": 0.1, \"rho\": n x m rows, \"nu\": \"random\" | \"uniform\",
     \"reward_range\": [lo, hi], \"extra_edge_prob\": 0.3}
    Only states and actions are required; vertex numbers are 1-based.

  Errors
    On failure stderr holds {\"kind\", \"detail\", \"location\"}.
    Exit 1: the input is well formed but fails a property (not an RMDP,
    not biconnected, enumeration cap exceeded, ...). Exit 2: the input or
    the command line is malformed.

Reports identify states and actions by label. Floats are written in the
shortest form that parses back to the same value.";

#[derive(Parser)]
#[command(name = "rmdp", version, about = "Reversible Markov decision processes", after_long_help = SCHEMAS)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Detailed-balance and ratio tolerance.
    #[arg(long, global = true, default_value_t = config::BALANCE_TOL)]
    tol: f64,
    /// Maximum number of deterministic policies to enumerate.
    #[arg(long, global = true, default_value_t = config::ENUMERATION_CAP)]
    cap: u64,
    /// Lift the enumeration cap entirely.
    #[arg(long, global = true)]
    allow_large: bool,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check that every stationary policy gives an irreducible reversible chain.
    ///
    /// Prints {"rmdp": true, "policies_checked": N}. A violating policy is
    /// reported as a NotRmdp error with exit code 1.
    Validate { instance: PathBuf },
    /// Canonical graph and its block decomposition.
    ///
    /// Prints {"edges", "blocks", "articulation_points", "biconnected", "tree"}.
    Decompose { instance: PathBuf },
    /// Block kernels, move probabilities and articulation splits.
    ///
    /// Prints {"states", "actions", "blocks": [{"states", "kernel", "psi"}],
    /// "articulation_points", "rho": n x m, "nu": [{"state", "blocks", "weights": m x k}]}.
    Factorize { instance: PathBuf },
    /// Maximize the long-run average reward.
    ///
    /// Prints {"variant", "states", "policy", "gain", "bias", "stationary",
    /// "optimal", "steps" | "policies_checked"}. The trace file holds
    /// {"variant", "start", "steps": [{"state", "from", "to", "rule",
    /// "gain_before", "gain_after"}], "terminal", "gain"}.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveVariant::Standard)]
        variant: SolveVariant,
        /// Deterministic starting policy; the first action everywhere by default.
        #[arg(long)]
        start: Option<PathBuf>,
        /// Write the step-by-step trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Free-field covariance and, with --pin, the pinned Green function.
    ///
    /// Prints {"states", "stationary", "covariance", "asymmetry",
    /// "min_eigenvalue", "green": {"pin", "matrix", "cross_check_gap"}}.
    Gff {
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// State label to pin.
        #[arg(long)]
        pin: Option<String>,
    },
    /// Monte Carlo comparison of local times plus squared field against the
    /// squared shifted field.
    ///
    /// Prints {"pin", "level", "count", "seed", "z_threshold", "states":
    /// [per-state means, standard errors and z-scores], "pass"}.
    RayKnight {
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// State label to pin.
        #[arg(long)]
        pin: String,
        /// Local-time level at the pin.
        #[arg(long)]
        level: f64,
        /// Number of independent trajectories.
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, env = "RMDP_SEED")]
        seed: u64,
        #[arg(long, default_value_t = config::RAY_KNIGHT_Z)]
        z: f64,
    },
    /// Draw a random RMDP instance.
    Generate {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, env = "RMDP_SEED")]
        seed: u64,
        /// Generator config file; --states and --actions suffice without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        states: Option<usize>,
        #[arg(long, required_unless_present = "config")]
        actions: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveVariant {
    Standard,
    Biconnected,
    Hybrid,
    Brute,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Weighted,
    Blocks,
}

type Run<T> = Result<T, Failure>;

fn read(path: &Path) -> Run<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e, 2))
}

fn malformed(path: &Path, e: serde_json::Error) -> Failure {
    Failure::from(RmdpError::Malformed(e.to_string())).at(path.display().to_string())
}

fn load_instance(path: &Path) -> Run<MdpInstance> {
    let file: InstanceFile = serde_json::from_str(&read(path)?).map_err(|e| malformed(path, e))?;
    let (states, actions) = (file.states.clone(), file.actions.clone());
    file.into_instance().map_err(|e| locate(e, path, &states, &actions))
}

fn load_policy(path: &Path, inst: &MdpInstance) -> Run<Policy> {
    let file: PolicyFile = serde_json::from_str(&read(path)?).map_err(|e| malformed(path, e))?;
    file.into_policy(inst)
        .map_err(|e| locate(e, path, inst.states(), inst.actions()))
}

fn state_index(inst: &MdpInstance, label: &str) -> Run<usize> {
    inst.state_index(label).map_err(|e| Failure::from(e).at("--pin"))
}

fn labels(all: &[String], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| all[i].clone()).collect()
}

/// Positions of the instance attached to domain errors.
fn domain<'a>(inst: &'a MdpInstance, path: &Path) -> impl Fn(RmdpError) -> Failure + 'a {
    let path = path.to_path_buf();
    move |e| locate(e, &path, inst.states(), inst.actions())
}

impl Global {
    fn tolerances(&self) -> Run<Tolerances> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Failure::from(RmdpError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tol
            )))
            .at("--tol"));
        }
        Ok(Tolerances {
            balance: self.tol,
            ratio: self.tol,
            ..Tolerances::default()
        })
    }

    fn cap(&self) -> u64 {
        if self.allow_large {
            u64::MAX
        } else {
            self.cap
        }
    }
}

/// Holds the serialized report and any side files until the command has
/// fully succeeded.
struct Output {
    report: String,
    extra: Vec<(PathBuf, String)>,
}

impl Output {
    fn of<T: Serialize>(report: &T) -> Self {
        Self {
            report: io::to_json(report),
            extra: Vec::new(),
        }
    }
}

fn validate(g: &Global, path: &Path) -> Run<Output> {
    let inst = load_instance(path)?;
    let opts = mdp::RmdpCheckOptions {
        tolerances: g.tolerances()?,
        cap: g.cap(),
    };
    let verdict = mdp::is_rmdp(&inst, &opts).map_err(domain(&inst, path))?;
    if let Some(w) = verdict.witness {
        let policy = labels(inst.actions(), &w.policy).join(", ");
        let why = match w.violation {
            mdp::Violation::NotIrreducible => "is not irreducible".to_string(),
            mdp::Violation::NotReversible { i, j, gap } => format!(
                "violates detailed balance at states {} and {} by {gap:e}",
                inst.states()[i],
                inst.states()[j]
            ),
        };
        return Err(Failure::from(RmdpError::NotRmdp(format!("policy [{policy}] {why}")))
            .at(format!("{}: policy [{policy}]", path.display())));
    }
    Ok(Output::of(&ValidateReport {
        rmdp: true,
        policies_checked: verdict.policies_checked,
    }))
}

fn decompose(g: &Global, path: &Path) -> Run<Output> {
    let inst = load_instance(path)?;
    let err = domain(&inst, path);
    let graph = structure::canonical_graph(&inst, g.tolerances()?.support).map_err(&err)?;
    let bs = block_decomposition(&graph).map_err(&err)?;
    let s = inst.states();
    Ok(Output::of(&DecomposeReport {
        edges: graph.edges().iter().map(|&(i, j)| [s[i].clone(), s[j].clone()]).collect(),
        blocks: bs.blocks.iter().map(|b| labels(s, b)).collect(),
        articulation_points: labels(s, &bs.articulation_points),
        biconnected: bs.n_blocks() == 1,
        tree: structure::is_tree(&graph),
    }))
}

fn factorize_cmd(g: &Global, path: &Path) -> Run<Output> {
    let inst = load_instance(path)?;
    let f = factorize_general(&inst, &g.tolerances()?).map_err(domain(&inst, path))?;
    let s = inst.states();
    Ok(Output::of(&FactorizeReport {
        states: s.to_vec(),
        actions: inst.actions().to_vec(),
        blocks: f
            .block_kernels
            .iter()
            .map(|b| BlockReport {
                states: labels(s, &b.vertices),
                kernel: linalg::to_rows(&b.matrix),
                psi: b.psi.iter().copied().collect(),
            })
            .collect(),
        articulation_points: labels(s, &f.structure.articulation_points),
        rho: linalg::to_rows(&f.rho),
        nu: f
            .nu
            .iter()
            .map(|w| SplitReport {
                state: s[w.vertex].clone(),
                blocks: w.blocks.clone(),
                weights: linalg::to_rows(&w.weights),
            })
            .collect(),
    }))
}

fn trace_report(inst: &MdpInstance, t: &PolicyIterationTrace, variant: &'static str) -> TraceReport {
    let (s, a) = (inst.states(), inst.actions());
    TraceReport {
        variant,
        start: labels(a, &t.start),
        steps: t
            .steps
            .iter()
            .map(|st| StepReport {
                state: s[st.state].clone(),
                from: a[st.from].clone(),
                to: a[st.to].clone(),
                rule: match st.rule {
                    StepRule::Bias => "bias",
                    StepRule::Ratio => "ratio",
                },
                gain_before: st.gain_before,
                gain_after: st.gain_after,
            })
            .collect(),
        terminal: labels(a, &t.terminal),
        gain: t.gain,
    }
}

fn solve(g: &Global, path: &Path, variant: SolveVariant, start: Option<&Path>, trace: Option<&Path>) -> Run<Output> {
    let inst = load_instance(path)?;
    let tol = g.tolerances()?;
    let err = domain(&inst, path);
    let start_actions = match start {
        None => vec![0; inst.n_states()],
        Some(p) => load_policy(p, &inst)?.as_actions().ok_or_else(|| {
            Failure::from(RmdpError::InvalidConfig("start policy must be deterministic".into()))
                .at(p.display().to_string())
        })?,
    };
    let name = match variant {
        SolveVariant::Standard => "standard",
        SolveVariant::Biconnected => "biconnected",
        SolveVariant::Hybrid => "hybrid",
        SolveVariant::Brute => "brute",
    };
    let (policy, optimal, steps, checked, trace_out) = match variant {
        SolveVariant::Brute => {
            if trace.is_some() {
                return Err(Failure::from(RmdpError::InvalidConfig(
                    "brute force enumeration has no trace".into(),
                ))
                .at("--trace"));
            }
            let best = brute_force_optimal(&inst, g.cap(), &tol).map_err(&err)?;
            let pol = Policy::deterministic(&best.policy, inst.n_actions());
            let optimal = dp_check(&inst, &pol, tol.improvement).map_err(&err)?.optimal;
            (best.policy, optimal, None, Some(best.policies_checked), None)
        }
        _ => {
            let t = match variant {
                SolveVariant::Standard => policy_iterate_standard(&inst, &start_actions, &tol),
                SolveVariant::Biconnected => factorize::factorize_biconnected(&inst, &tol)
                    .and_then(|f| policy_iterate_biconnected(&inst, &f, &start_actions, &tol)),
                _ => factorize_general(&inst, &tol)
                    .and_then(|f| policy_iterate_hybrid(&inst, &f, &start_actions, &tol)),
            }
            .map_err(&err)?;
            let tr = trace.map(|p| (p.to_path_buf(), io::to_json(&trace_report(&inst, &t, name))));
            (t.terminal, t.optimal, Some(t.steps.len()), None, tr)
        }
    };
    let sol = poisson_solve(&inst, &Policy::deterministic(&policy, inst.n_actions())).map_err(&err)?;
    let mut out = Output::of(&SolveReport {
        variant: name,
        states: inst.states().to_vec(),
        policy: labels(inst.actions(), &policy),
        gain: sol.gain,
        bias: sol.bias,
        stationary: sol.stationary,
        optimal,
        steps,
        policies_checked: checked,
    });
    out.extra.extend(trace_out);
    Ok(out)
}

fn gff(path: &Path, policy: &Path, pin: Option<&str>) -> Run<Output> {
    let inst = load_instance(path)?;
    let pol = load_policy(policy, &inst)?;
    let err = domain(&inst, path);
    let cov = gff_covariance(&inst, &pol).map_err(&err)?;
    let green = match pin {
        None => None,
        Some(label) => {
            let k = state_index(&inst, label)?;
            let g = pinned_green(&inst, &pol, k).map_err(&err)?;
            Some(GreenReport {
                pin: label.to_string(),
                matrix: linalg::to_rows(&g.full()),
                cross_check_gap: g.cross_check_gap,
            })
        }
    };
    Ok(Output::of(&GffReport {
        states: inst.states().to_vec(),
        stationary: cov.pi.iter().copied().collect(),
        covariance: linalg::to_rows(&cov.c),
        asymmetry: cov.asymmetry,
        min_eigenvalue: cov.min_eigenvalue,
        green,
    }))
}

#[allow(clippy::too_many_arguments)]
fn ray_knight(path: &Path, policy: &Path, pin: &str, level: f64, count: usize, seed: u64, z: f64) -> Run<Output> {
    let inst = load_instance(path)?;
    let pol = load_policy(policy, &inst)?;
    let k = state_index(&inst, pin)?;
    let report = ray_knight_check(&inst, &pol, k, level, count, seed, z).map_err(domain(&inst, path))?;
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["pin"] = pin.into();
    if let Some(states) = value["states"].as_array_mut() {
        for (entry, st) in states.iter_mut().zip(&report.states) {
            entry["state"] = inst.states()[st.state].clone().into();
        }
    }
    Ok(Output::of(&value))
}

fn generate(mode: Option<ModeArg>, seed: u64, config: Option<&Path>, states: Option<usize>, actions: Option<usize>) -> Run<Output> {
    let mut cfg = match config {
        Some(p) => serde_json::from_str::<GeneratorConfig>(&read(p)?).map_err(|e| malformed(p, e))?,
        None => GeneratorConfig::new(GeneratorMode::default(), 0, 0),
    };
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeArg::Weighted => GeneratorMode::Weighted,
            ModeArg::Blocks => GeneratorMode::Blocks,
        };
    }
    cfg.states = states.unwrap_or(cfg.states);
    cfg.actions = actions.unwrap_or(cfg.actions);
    let inst = generate_instance(&cfg, seed).map_err(|e| {
        let at = config.map_or("command line".to_string(), |p| p.display().to_string());
        Failure::from(e).at(at)
    })?;
    Ok(Output {
        report: io::instance_to_json(&inst),
        extra: Vec::new(),
    })
}

fn run(cli: &Cli) -> Run<Output> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate { instance } => validate(g, instance),
        Command::Decompose { instance } => decompose(g, instance),
        Command::Factorize { instance } => factorize_cmd(g, instance),
        Command::Solve {
            instance,
            variant,
            start,
            trace,
        } => solve(g, instance, *variant, start.as_deref(), trace.as_deref()),
        Command::Gff { instance, policy, pin } => gff(instance, policy, pin.as_deref()),
        Command::RayKnight {
            instance,
            policy,
            pin,
            level,
            count,
            seed,
            z,
        } => ray_knight(instance, policy, pin, *level, *count, *seed, *z),
        Command::Generate {
            mode,
            seed,
            config,
            states,
            actions,
        } => generate(*mode, *seed, config.as_deref(), *states, *actions),
    }
}

fn emit(out: &Output, target: Option<&Path>) -> Run<()> {
    for (path, text) in &out.extra {
        fs::write(path, text).map_err(|e| Failure::io(path, e, 1))?;
    }
    match target {
        Some(path) => fs::write(path, &out.report).map_err(|e| Failure::io(path, e, 1)),
        None => std::io::stdout()
            .write_all(out.report.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e, 1)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|out| emit(&out, cli.global.output.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", serde_json::to_string(&f).expect("failure serializes"));
            ExitCode::from(f.code)
        }
    }
}
