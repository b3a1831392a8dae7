use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pap_core::kripke::{check_compatibility, execute_action_kripke, product_kripke, witnesses, KripkeStructure};
use pap_core::model::{StatusSet, StrategyId};
use pap_core::parser::{
    parse_ground_action, parse_kripke_dump_with, parse_program_with, parse_state_with, parse_status_set_with,
    ParseOptions,
};
use pap_core::program::Program;
use pap_core::psem::{apply_strong_ps4, check_ic_p_consistency, IcVerdict};
use pap_core::semantics::{
    check_rational, check_reasonable, compute_lfp_traced, ClosureVariant, EvalConfig, LfpTrace, ProbModel,
};
use pap_core::state::ProbState;
use pap_core::{exec, Error};

#[derive(Parser)]
#[command(name = "pap", version, about = "Evaluate probabilistic agent programs against probabilistic states")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,

    /// Strategy for condition groups written without an annotation.
    #[arg(long = "strategy-default", global = true, default_value = "ig")]
    strategy_default: String,

    /// Maximum number of compatible worlds to enumerate.
    #[arg(long = "product-cap", global = true, env = "PAP_PRODUCT_CAP", default_value_t = 1_000_000)]
    product_cap: u128,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    JsonLines,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Weak,
    Strong,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the syntax and safety of a program and print it back.
    Parse { program: PathBuf },

    /// Compute the reasonable status set of a positive program.
    Eval {
        program: PathBuf,
        state: PathBuf,
        /// Entailment level for preconditions, guards and integrity constraints.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Print one line per fired ground rule.
        #[arg(long)]
        trace: bool,
        /// Also close `Do` atoms under `O`.
        #[arg(long = "do-implies-o")]
        do_implies_o: bool,
    },

    /// Classify a candidate status set.
    Check {
        program: PathBuf,
        state: PathBuf,
        candidate: PathBuf,
        /// Entailment level for preconditions, guards and integrity constraints.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Weak checks guards and constraints at p; strong also keeps every integrity constraint at its old level.
        #[arg(long, value_enum, default_value = "weak")]
        mode: Mode,
        /// Largest status-atom universe searched for groundedness.
        #[arg(long, default_value_t = 20)]
        bound: usize,
        /// Also close `Do` atoms under `O`.
        #[arg(long = "do-implies-o")]
        do_implies_o: bool,
    },

    /// Execute one ground action and write the resulting state.
    Step {
        program: PathBuf,
        state: PathBuf,
        /// Ground action, e.g. `erase(t80)`.
        action: String,
        /// Where to write the new state.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Execute even when no compatible world witnesses the precondition.
        #[arg(long)]
        force: bool,
        /// Also execute over a Kripke structure: the given dump, or the product structure.
        #[arg(long, num_args = 0..=1)]
        kripke: Option<Option<PathBuf>>,
        /// Entailment level for the precondition.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },

    /// Print the product structure of a state, or check a given structure against it.
    Kripke {
        state: PathBuf,
        /// Kripke dump to check for compatibility instead of printing the product.
        #[arg(long)]
        check: Option<PathBuf>,
    },

    /// Check whether each integrity constraint stays p-consistent after executing actions.
    IcCheck {
        program: PathBuf,
        state: PathBuf,
        /// Ground actions executed concurrently.
        actions: Vec<String>,
        /// Probability threshold the integrity constraints must keep.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Write the generated linear programs to this file.
        #[arg(long = "export-lp")]
        export_lp: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Semantic(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_sentinel() {
            let detail = e.detail().map(|d| format!(": {d}")).unwrap_or_default();
            Failure::Semantic(format!("{e}{detail}"))
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Run = std::result::Result<(), Failure>;

struct Out {
    format: Format,
}

impl Out {
    fn emit(&self, text: impl AsRef<str>, value: Value) {
        match self.format {
            Format::Text => println!("{}", text.as_ref()),
            Format::JsonLines => println!("{value}"),
        }
    }
}

struct Ctx {
    opts: ParseOptions,
    cap: u128,
    out: Out,
}

impl Ctx {
    fn read(&self, path: &Path) -> std::result::Result<(String, ParseOptions), Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        Ok((text, ParseOptions { file: path.display().to_string(), ..self.opts.clone() }))
    }

    fn program(&self, path: &Path) -> std::result::Result<Program, Failure> {
        let (text, opts) = self.read(path)?;
        Ok(parse_program_with(&text, &opts)?)
    }

    fn state(&self, path: &Path) -> std::result::Result<ProbState, Failure> {
        let (text, opts) = self.read(path)?;
        Ok(parse_state_with(&text, &opts)?)
    }

    fn kripke(&self, path: &Path) -> std::result::Result<KripkeStructure, Failure> {
        let (text, opts) = self.read(path)?;
        let (states, prob) = parse_kripke_dump_with(&text, &opts)?.into_iter().unzip();
        Ok(KripkeStructure { states, prob })
    }
}

fn check_level(p: f64) -> Run {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Failure::Input(format!("--p must lie in [0, 1], got {p}")))
    }
}

fn atoms(ps: &StatusSet) -> Vec<String> {
    ps.iter().map(|a| a.to_string()).collect()
}

fn write_atomic(path: &Path, text: &str) -> Run {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, text)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn config(p: f64, do_implies_o: bool, strategy: StrategyId) -> EvalConfig {
    let closure = if do_implies_o { ClosureVariant::WithDoImpliesO } else { ClosureVariant::Standard };
    EvalConfig { p, closure, strategy }
}

fn cmd_parse(ctx: &Ctx, program: &Path) -> Run {
    let prog = ctx.program(program)?;
    let text = prog.to_string();
    ctx.out.emit(
        text.trim_end(),
        json!({
            "kind": "program",
            "rules": prog.rules.len(),
            "actions": prog.actions.len(),
            "action_constraints": prog.action_constraints.len(),
            "integrity_constraints": prog.integrity_constraints.len(),
            "positive": prog.is_positive(),
        }),
    );
    Ok(())
}

fn cmd_eval(ctx: &Ctx, program: &Path, state: &Path, p: f64, trace: bool, do_implies_o: bool) -> Run {
    check_level(p)?;
    let prog = ctx.program(program)?;
    if !prog.is_positive() {
        return Err(Failure::Input("program has negated status literals; classify candidates with `pap check`".into()));
    }
    let st = ctx.state(state)?;
    let model = ProbModel::new(&prog, &st, config(p, do_implies_o, ctx.opts.default_strategy))?;
    let mut tr = LfpTrace::default();
    let result = compute_lfp_traced(&model, &mut tr);
    if trace {
        for l in &tr.firings {
            ctx.out.emit(
                l.to_string(),
                json!({"kind": "fire", "iteration": l.iteration, "rule": l.rule, "head": l.head.to_string()}),
            );
        }
    }
    let ps = result?;
    ctx.out.emit(ps.to_string(), json!({"kind": "status_set", "atoms": atoms(&ps)}));
    Ok(())
}

fn verdict(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "yes",
        Some(false) => "no",
        None => "unknown",
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    ctx: &Ctx,
    program: &Path,
    state: &Path,
    candidate: &Path,
    p: f64,
    mode: Mode,
    bound: usize,
    do_implies_o: bool,
) -> Run {
    check_level(p)?;
    let prog = ctx.program(program)?;
    let st = ctx.state(state)?;
    let (text, opts) = ctx.read(candidate)?;
    let ps = parse_status_set_with(&text, &opts)?;
    let model = ProbModel::new(&prog, &st, config(p, do_implies_o, ctx.opts.default_strategy))?;
    let mut rep = pap_core::semantics::check_feasible(&model, &ps)?;
    if mode == Mode::Strong {
        apply_strong_ps4(&mut rep, &prog, &st, &ps, ctx.cap)?;
    }
    let flags = [("PS1", rep.ps1_ok), ("PS2", rep.ps2_ok), ("PS3", rep.ps3_ok), ("PS4", rep.ps4_ok)];
    for (name, ok) in flags {
        let ws: Vec<&String> = rep.witnesses.iter().filter(|w| w.starts_with(name)).collect();
        let mut text = format!("{name} {}", if ok { "ok" } else { "fail" });
        for w in &ws {
            text.push_str(&format!("\n  {}", &w[name.len() + 2..]));
        }
        let shown: Vec<&str> = ws.iter().map(|w| &w[name.len() + 2..]).collect();
        ctx.out.emit(text, json!({"kind": "condition", "name": name, "ok": ok, "witnesses": shown}));
    }
    let grounded = pap_core::semantics::is_grounded(&model, &ps, bound)?;
    let rational = if rep.feasible() { check_rational(&model, &ps, bound)? } else { Some(false) };
    let reasonable = check_reasonable(&model, &ps)? && rep.feasible();
    let lines = [
        ("feasible", Some(rep.feasible())),
        ("grounded", grounded),
        ("rational", rational),
        ("reasonable", Some(reasonable)),
    ];
    for (name, v) in lines {
        ctx.out.emit(format!("{name}: {}", verdict(v)), json!({"kind": "classification", "name": name, "value": v}));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_step(
    ctx: &Ctx,
    program: &Path,
    state: &Path,
    action: &str,
    out: Option<&Path>,
    force: bool,
    kripke: Option<Option<&Path>>,
    p: f64,
) -> Run {
    check_level(p)?;
    let prog = ctx.program(program)?;
    let st = ctx.state(state)?;
    let a = parse_ground_action(action)?;
    let def = prog.action(&a.name)?;
    let k = match kripke {
        Some(Some(path)) => ctx.kripke(path)?,
        _ => product_kripke(&st, ctx.cap)?,
    };
    if !force && witnesses(&k, def, &a.args)?.is_empty() {
        return Err(Failure::Semantic(format!("{a} is not possibly executable")));
    }
    let acts: BTreeSet<_> = [a.clone()].into();
    let next = exec::conc_execute(&st, &prog, &acts, ctx.opts.default_strategy, p)?;
    let diff = st.diff(&next);
    if diff.is_empty() {
        ctx.out.emit("no changes", json!({"kind": "diff", "lines": []}));
    } else {
        let text = diff.to_string();
        let lines: Vec<&str> = text.lines().collect();
        ctx.out.emit(text.trim_end(), json!({"kind": "diff", "lines": lines}));
    }
    if kripke.is_some() {
        let after = execute_action_kripke(&k, def, &a.args, None)?;
        emit_structure(ctx, &after);
    }
    if let Some(path) = out {
        write_atomic(path, &next.to_string())?;
    }
    Ok(())
}

fn emit_structure(ctx: &Ctx, k: &KripkeStructure) {
    let text = k.to_string();
    match ctx.out.format {
        Format::Text => print!("{text}"),
        Format::JsonLines => {
            for (i, (s, p)) in k.states.iter().zip(&k.prob).enumerate() {
                let p = (p * 1e12).round() / 1e12;
                ctx.out.emit("", json!({"kind": "world", "index": i + 1, "p": p, "state": s.to_string()}));
            }
        }
    }
}

fn cmd_kripke(ctx: &Ctx, state: &Path, check: Option<&Path>) -> Run {
    let st = ctx.state(state)?;
    match check {
        None => {
            emit_structure(ctx, &product_kripke(&st, ctx.cap)?);
            Ok(())
        }
        Some(path) => {
            let k = ctx.kripke(path)?;
            let rep = check_compatibility(&k, &st, 1e-9);
            let total: f64 = k.prob.iter().sum();
            if rep.compatible() && (total - 1.0).abs() <= 1e-9 {
                ctx.out.emit("compatible", json!({"kind": "compatibility", "compatible": true}));
                return Ok(());
            }
            let mut reasons: Vec<String> = rep.residuals.iter().map(|r| r.to_string()).collect();
            reasons.extend(
                rep.malformed.iter().map(|i| format!("world {} holds two objects of one random variable", i + 1)),
            );
            if (total - 1.0).abs() > 1e-9 {
                reasons.push(format!("masses sum to {}", (total * 1e12).round() / 1e12));
            }
            let text = format!("incompatible: {}", reasons.join("; "));
            ctx.out.emit(&text, json!({"kind": "compatibility", "compatible": false, "reasons": reasons}));
            Err(Failure::Semantic(String::new()))
        }
    }
}

fn cmd_ic_check(ctx: &Ctx, program: &Path, state: &Path, actions: &[String], p: f64, export: Option<&Path>) -> Run {
    check_level(p)?;
    let prog = ctx.program(program)?;
    let st = ctx.state(state)?;
    let mut acts = BTreeSet::new();
    for a in actions {
        let g = parse_ground_action(a)?;
        prog.action(&g.name)?;
        acts.insert(g);
    }
    let results = check_ic_p_consistency(&st, &prog, &acts, p, ctx.cap)?;
    let mut lp_text = String::new();
    for (i, (sys, v)) in results.iter().enumerate() {
        let ic = &prog.integrity_constraints[i];
        let (status, min) = match v {
            IcVerdict::Guaranteed { min } => ("guaranteed", Some(*min)),
            IcVerdict::NotGuaranteed { min, .. } => ("not guaranteed", Some(*min)),
            IcVerdict::PremiseInfeasible => ("premise infeasible", None),
        };
        let mut text = format!("ic {}: {v}", i + 1);
        if let IcVerdict::NotGuaranteed { distribution, .. } = v {
            for (s, q) in distribution.iter().filter(|(_, q)| *q > 1e-9) {
                text.push_str(&format!("\n  p={} {s}", (q * 1e9).round() / 1e9));
            }
        }
        ctx.out.emit(
            text,
            json!({"kind": "ic", "index": i + 1, "constraint": ic.to_string(), "verdict": status, "min": min}),
        );
        lp_text.push_str(&format!("// integrity constraint {}: {ic}\n{}", i + 1, sys.lp));
    }
    if let Some(path) = export {
        write_atomic(path, &lp_text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Run {
    let strategy = StrategyId::parse(&cli.strategy_default)
        .ok_or_else(|| Failure::Input(format!("unknown strategy `{}`", cli.strategy_default)))?;
    let ctx = Ctx {
        opts: ParseOptions { default_strategy: strategy, ..ParseOptions::default() },
        cap: cli.product_cap,
        out: Out { format: cli.format },
    };
    match &cli.cmd {
        Cmd::Parse { program } => cmd_parse(&ctx, program),
        Cmd::Eval { program, state, p, trace, do_implies_o } => {
            cmd_eval(&ctx, program, state, *p, *trace, *do_implies_o)
        }
        Cmd::Check { program, state, candidate, p, mode, bound, do_implies_o } => {
            cmd_check(&ctx, program, state, candidate, *p, *mode, *bound, *do_implies_o)
        }
        Cmd::Step { program, state, action, out, force, kripke, p } => {
            cmd_step(&ctx, program, state, action, out.as_deref(), *force, kripke.as_ref().map(|k| k.as_deref()), *p)
        }
        Cmd::Kripke { state, check } => cmd_kripke(&ctx, state, check.as_deref()),
        Cmd::IcCheck { program, state, actions, p, export_lp } => {
            cmd_ic_check(&ctx, program, state, actions, *p, export_lp.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Semantic(msg)) => {
            if !msg.is_empty() {
                match format {
                    Format::Text => println!("{msg}"),
                    Format::JsonLines => println!("{}", json!({"kind": "failure", "message": msg})),
                }
            }
            ExitCode::from(2)
        }
    }
}
