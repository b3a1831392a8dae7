//! Seeded random programs and states, emitted as source text.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pap_core::parser::{parse_program, parse_state};
use pap_core::program::Program;
use pap_core::state::ProbState;

#[derive(Clone, Copy, Debug)]
pub struct GenOptions {
    pub negation: bool,
    /// Every random variable is a certain singleton.
    pub degenerate: bool,
    pub integrity_constraints: bool,
    pub max_rules: usize,
    pub max_facts: usize,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { negation: false, degenerate: false, integrity_constraints: true, max_rules: 6, max_facts: 8 }
    }
}

pub struct Instance {
    pub program_text: String,
    pub state_text: String,
    pub program: Program,
    pub state: ProbState,
}

const OBJECTS: [&str; 3] = ["o1", "o2", "o3"];
const CALLS: [&str; 2] = ["d.f()", "d.g()"];
const MODS: [&str; 5] = ["P", "O", "Do", "F", "W"];
const PROBS: [f64; 4] = [0.3, 0.5, 0.8, 1.0];

struct Act {
    name: String,
    unary: bool,
}

fn action_arg(rng: &mut ChaCha8Rng, a: &Act, var: Option<&str>) -> String {
    if !a.unary {
        return "()".into();
    }
    match var {
        Some(v) if rng.gen_bool(0.5) => format!("({v})"),
        _ => format!("({})", OBJECTS[rng.gen_range(0..2)]),
    }
}

pub fn instance(seed: u64, opts: GenOptions) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actions = rng.gen_range(1..=4);
    let acts: Vec<Act> = (0..n_actions).map(|i| Act { name: format!("a{i}"), unary: rng.gen_bool(0.4) }).collect();

    let mut prog = String::new();
    for a in &acts {
        let call = CALLS[rng.gen_range(0..2)];
        let other = CALLS.iter().find(|c| **c != call).unwrap();
        if a.unary {
            let binds = rng.gen_bool(0.5);
            let pre = if binds { format!("in(X, {call})") } else { "true".into() };
            let eff = match rng.gen_range(0..3) {
                0 => format!("; add: in(X, {other})"),
                1 if binds => format!("; del: in(X, {call})"),
                _ => String::new(),
            };
            prog.push_str(&format!("action {}(X) {{ pre: {pre}{eff} }}\n", a.name));
        } else {
            let o = OBJECTS[rng.gen_range(0..3)];
            let pre = if rng.gen_bool(0.5) { format!("in({o}, {call})") } else { "true".into() };
            let eff = if rng.gen_bool(0.4) {
                format!("; add: in({}, {other})", OBJECTS[rng.gen_range(0..3)])
            } else {
                String::new()
            };
            prog.push_str(&format!("action {}() {{ pre: {pre}{eff} }}\n", a.name));
        }
    }

    for _ in 0..rng.gen_range(0..=opts.max_rules) {
        let bind = rng.gen_bool(0.5);
        let var = bind.then_some("X");
        let head_act = acts.choose(&mut rng).unwrap();
        let head =
            format!("{} {}{}", MODS.choose(&mut rng).unwrap(), head_act.name, action_arg(&mut rng, head_act, var));
        let mut body = Vec::new();
        if bind {
            let lo = [0.0, 0.3, 0.5, 1.0].choose(&mut rng).unwrap();
            body.push(format!(
                "in(X, {}) : [{lo:.1}, 1.0] @ {}",
                CALLS[rng.gen_range(0..2)],
                ["ig", "pc", "nc", "in_"].choose(&mut rng).unwrap()
            ));
        } else if rng.gen_bool(0.3) {
            body.push(format!("in({}, {})", OBJECTS[rng.gen_range(0..3)], CALLS[rng.gen_range(0..2)]));
        }
        for _ in 0..rng.gen_range(0..=2) {
            let a = acts.choose(&mut rng).unwrap();
            let lit = format!("{} {}{}", MODS[rng.gen_range(0..3)], a.name, action_arg(&mut rng, a, var));
            if opts.negation && rng.gen_bool(0.4) {
                body.push(format!("not {lit}"));
            } else {
                body.push(lit);
            }
        }
        prog.push_str(&format!("{head} <- {}.\n", body.join(", ")));
    }

    if acts.len() >= 2 && rng.gen_bool(0.3) {
        let (a, b) = (&acts[0], &acts[1]);
        let arg = |u: bool| if u { "(o1)" } else { "()" };
        prog.push_str(&format!("{{ {}{}, {}{} }} <~ .\n", a.name, arg(a.unary), b.name, arg(b.unary)));
    }
    if opts.integrity_constraints && rng.gen_bool(0.4) {
        let o = OBJECTS[rng.gen_range(0..3)];
        prog.push_str(&format!("ic in(X, {}) => X != {o}.\n", CALLS[rng.gen_range(0..2)]));
    }

    let mut state = String::new();
    let mut facts = 0;
    for call in CALLS {
        let mut rvs = Vec::new();
        for o in OBJECTS {
            if facts < opts.max_facts && rng.gen_bool(0.5) {
                let p = if opts.degenerate { 1.0 } else { *PROBS.choose(&mut rng).unwrap() };
                rvs.push(format!("rv{{{o}: {p:.1}}}"));
                facts += 1;
            }
        }
        if !rvs.is_empty() {
            state.push_str(&format!("{call} = {{ {} }}\n", rvs.join(", ")));
        }
    }

    let program = parse_program(&prog).unwrap_or_else(|e| panic!("{e}\n{prog}"));
    let st = parse_state(&state).unwrap_or_else(|e| panic!("{e}\n{state}"));
    Instance { program_text: prog, state_text: state, program, state: st }
}
