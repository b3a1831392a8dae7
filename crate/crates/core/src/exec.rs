//! Action instantiation and execution on either kind of state.

use std::collections::BTreeSet;

use crate::annotation::{eval_term, first_grounding, ground_call, Binding, World};
use crate::error::{Error, Result};
use crate::model::{ActionDef, GroundAction, StrategyId};
use crate::program::Program;
use crate::state::{conc_effects, DetState, Effects, ProbState};

/// States that actions can be executed on.
pub trait StateOps: World + Clone {
    fn apply_effects(&self, eff: &Effects) -> Result<Self>;
}

impl StateOps for ProbState {
    fn apply_effects(&self, eff: &Effects) -> Result<Self> {
        self.apply(eff)
    }
}

impl StateOps for DetState {
    fn apply_effects(&self, eff: &Effects) -> Result<Self> {
        Ok(self.apply(eff))
    }
}

/// `θ`: the action's parameters bound to the ground arguments.
pub fn theta(def: &ActionDef, args: &[crate::model::Object]) -> Result<Binding> {
    if def.params.len() != args.len() {
        return Err(Error::Precondition(format!(
            "action {} takes {} arguments, got {}",
            def.name,
            def.params.len(),
            args.len()
        )));
    }
    Ok(def.params.iter().cloned().zip(args.iter().cloned()).collect())
}

/// `θ ∪ γ` for the first grounding of the precondition satisfied at `[p, 1]`, if any.
pub fn witness_binding<W: World>(
    w: &W,
    def: &ActionDef,
    args: &[crate::model::Object],
    strategy: StrategyId,
    p: f64,
) -> Result<Option<Binding>> {
    first_grounding(w, &def.pre, strategy, p, &theta(def, args)?)
}

/// Instantiates the add and delete lists under a ground substitution.
pub fn instantiate_effects(def: &ActionDef, b: &Binding) -> Result<Effects> {
    let mut eff = Effects::default();
    for a in &def.del {
        eff.del.insert((ground_call(&a.call, b)?, eval_term(&a.subject, b)?));
    }
    for a in &def.add {
        eff.add.insert((ground_call(&a.call, b)?, eval_term(&a.subject, b)?));
    }
    Ok(eff)
}

/// Executes one action under `θ ∪ γ`; the input state is not modified.
pub fn apply_action<S: StateOps>(state: &S, def: &ActionDef, b: &Binding) -> Result<S> {
    state.apply_effects(&instantiate_effects(def, b)?)
}

/// Effects of a ground action, with `γ` the first satisfying precondition grounding. When the
/// precondition fails, only `θ` is used.
pub fn action_effects<W: World>(
    w: &W,
    prog: &Program,
    a: &GroundAction,
    strategy: StrategyId,
    p: f64,
) -> Result<Effects> {
    let def = prog.action(&a.name)?;
    let b = match witness_binding(w, def, &a.args, strategy, p)? {
        Some(b) => b,
        None => theta(def, &a.args)?,
    };
    instantiate_effects(def, &b)
}

/// Weakly concurrent execution of a set of ground actions.
pub fn conc_execute<S: StateOps>(
    state: &S,
    prog: &Program,
    actions: &BTreeSet<GroundAction>,
    strategy: StrategyId,
    p: f64,
) -> Result<S> {
    let parts = actions.iter().map(|a| action_effects(state, prog, a, strategy, p)).collect::<Result<Vec<_>>>()?;
    state.apply_effects(&conc_effects(&parts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroundCall, Object};
    use crate::parser::{parse_program, parse_state};

    const VEHICLE: &str = "action move_forward(V) { pre: in(X, geo.getposition(V)); add: in(X + 1, geo.getposition(V)); del: in(X, geo.getposition(V)) }\n\
                           action stay().";

    #[test]
    fn move_forward_increments_position() {
        let prog = parse_program(VEHICLE).unwrap();
        let st = parse_state("geo.getposition(a) = { rv{200: 1.0} }\ngeo.getposition(b) = { rv{201: 1.0} }").unwrap();
        let acts: BTreeSet<_> = [GroundAction::new("move_forward", vec![Object::str("a")])].into();
        let out = conc_execute(&st, &prog, &acts, StrategyId::Ig, 1.0).unwrap();
        let pos = GroundCall::new("geo", "getposition", vec![Object::str("a")]);
        assert_eq!(out.prob_of(&pos, &Object::Int(201)), Some(1.0));
        assert_eq!(out.prob_of(&pos, &Object::Int(200)), None);
    }

    #[test]
    fn empty_set_and_noop_action_are_identities() {
        let prog = parse_program(VEHICLE).unwrap();
        let st = parse_state("geo.getposition(a) = { rv{200: 1.0} }").unwrap();
        assert_eq!(conc_execute(&st, &prog, &BTreeSet::new(), StrategyId::Ig, 1.0).unwrap(), st);
        let acts: BTreeSet<_> = [GroundAction::new("stay", vec![])].into();
        assert_eq!(conc_execute(&st, &prog, &acts, StrategyId::Ig, 1.0).unwrap(), st);
    }

    #[test]
    fn disjoint_effects_commute() {
        let prog = parse_program(VEHICLE).unwrap();
        let st = parse_state("geo.getposition(a) = { rv{1: 1.0} }\ngeo.getposition(b) = { rv{5: 1.0} }").unwrap();
        let ma = GroundAction::new("move_forward", vec![Object::str("a")]);
        let mb = GroundAction::new("move_forward", vec![Object::str("b")]);
        let both = conc_execute(&st, &prog, &[ma.clone(), mb.clone()].into(), StrategyId::Ig, 1.0).unwrap();
        let seq = conc_execute(&st, &prog, &[ma].into(), StrategyId::Ig, 1.0).unwrap();
        let seq = conc_execute(&seq, &prog, &[mb].into(), StrategyId::Ig, 1.0).unwrap();
        assert_eq!(both, seq);
    }
}
