#![allow(dead_code)]

use std::path::PathBuf;

use pap_core::model::StatusSet;
use pap_core::parser::{parse_program, parse_state, parse_status_set};
use pap_core::program::Program;
use pap_core::semantics::{EvalConfig, ProbModel};
use pap_core::state::ProbState;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn program(name: &str) -> Program {
    parse_program(&std::fs::read_to_string(data(&format!("{name}.pap"))).unwrap()).unwrap()
}

pub fn state(name: &str) -> ProbState {
    let path = data(&format!("{name}.state"));
    if path.exists() {
        parse_state(&std::fs::read_to_string(path).unwrap()).unwrap()
    } else {
        ProbState::new()
    }
}

pub fn model(name: &str) -> ProbModel {
    ProbModel::new(&program(name), &state(name), EvalConfig::default()).unwrap()
}

pub fn set(text: &str) -> StatusSet {
    parse_status_set(text).unwrap()
}

pub fn kripke_table() -> pap_core::kripke::KripkeStructure {
    let text = std::fs::read_to_string(data("kripke_table.dump")).unwrap();
    pap_core::kripke::KripkeStructure::from_pairs(pap_core::parser::parse_kripke_dump(&text).unwrap()).unwrap()
}

pub fn world(text: &str) -> pap_core::state::DetState {
    let line = format!("#1 p=1 {text}");
    pap_core::parser::parse_kripke_dump(&line).unwrap().remove(0).0
}

pub mod gen;
pub mod oracle;

/// Integrity-constraint LPs over small random instances, at most `max_vars` variables each.
pub fn ic_lps(seed: u64, max_vars: usize) -> Vec<pap_core::lp::LpProblem> {
    use pap_core::model::{GroundAction, Object};
    use rand::{Rng, SeedableRng};

    let inst = gen::instance(seed, gen::GenOptions { max_facts: 3, ..Default::default() });
    let text = format!("{}ic in(X, d.f()) => X != o1.\nic in(X, d.g()) => X != o2.\n", inst.program_text);
    let prog = parse_program(&text).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let actions = prog
        .actions
        .values()
        .filter(|_| rng.gen_bool(0.5))
        .map(|d| GroundAction::new(&d.name, d.params.iter().map(|_| Object::str("o1")).collect()))
        .collect();
    let p = [0.0, 0.3, 0.6, 0.9][rng.gen_range(0..4)];
    prog.integrity_constraints
        .iter()
        .filter_map(|ic| {
            pap_core::psem::generate_ic_lp(&inst.state, &prog, &actions, ic, &prog.integrity_constraints, p, 1 << 12)
                .ok()
        })
        .map(|sys| sys.lp)
        .filter(|lp| lp.vars.len() <= max_vars)
        .collect()
}
