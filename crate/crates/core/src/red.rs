//! Reduction of probabilistic programs and degenerate states to their classical images.

use crate::error::{Error, Result};
use crate::model::{AnnotatedCondition, Annotation, CodeCallCondition, Rule, StrategyId};
use crate::program::Program;
use crate::state::{DetState, ProbState};

/// Drops every body annotation: all code-call groups of a rule become one bare
/// condition, checked at `[1,1]`.
pub fn red_reduce(prog: &Program) -> Program {
    let rules = prog
        .rules
        .iter()
        .map(|r| {
            let conjuncts =
                r.body_prob.iter().flat_map(|ac| ac.condition.conjuncts.iter().cloned()).collect::<Vec<_>>();
            let body_prob = if conjuncts.is_empty() {
                vec![]
            } else {
                vec![AnnotatedCondition::new(CodeCallCondition::new(conjuncts), Annotation::certain(), StrategyId::Ig)]
            };
            Rule { body_prob, ..r.clone() }
        })
        .collect();
    Program { rules, ..prog.clone() }
}

/// Maps each `⟨{o}, 1⟩` to `o`.
pub fn red_reduce_state(state: &ProbState) -> Result<DetState> {
    let mut det = DetState::new();
    for (call, rvs) in &state.entries {
        for rv in rvs {
            if !rv.is_degenerate() {
                return Err(Error::InvalidRv(format!("{call}: {rv} is not a certain singleton")));
            }
            det.insert(call.clone(), rv.entries[0].0.clone());
        }
    }
    Ok(det)
}
