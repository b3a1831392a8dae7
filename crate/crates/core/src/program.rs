//! Programs: rules plus the action base, action constraints and integrity constraints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result, SourceSpan};
use crate::model::{
    ActionAtom, ActionConstraint, ActionDef, CmpOp, CodeCallCondition, Conjunct, IntegrityConstraint, Polarity, Rule,
    StatusAtom, Term,
};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub actions: BTreeMap<String, ActionDef>,
    pub action_constraints: Vec<ActionConstraint>,
    pub integrity_constraints: Vec<IntegrityConstraint>,
}

impl Program {
    pub fn is_positive(&self) -> bool {
        self.rules.iter().all(Rule::is_positive)
    }

    pub fn action(&self, name: &str) -> Result<&ActionDef> {
        self.actions.get(name).ok_or_else(|| Error::UnknownAction(name.to_string()))
    }

    /// Checks safety of every rule and that every referenced action is declared.
    pub fn validate(&self) -> Result<()> {
        let nowhere = SourceSpan::new("<program>", 1, 1);
        for r in &self.rules {
            if let Err(var) = rule_safety(r) {
                return Err(Error::Unsafe { span: nowhere.clone(), var });
            }
            self.check_declared(&r.head.action, &nowhere)?;
            for a in r.body_pos.iter().chain(&r.body_neg) {
                self.check_declared(&a.action, &nowhere)?;
            }
        }
        for a in self.actions.values() {
            if let Err(var) = action_safety(a) {
                return Err(Error::Unsafe { span: nowhere.clone(), var });
            }
        }
        for c in &self.action_constraints {
            if let Err(var) = constraint_safety(c) {
                return Err(Error::Unsafe { span: nowhere.clone(), var });
            }
            for a in &c.blocked {
                self.check_declared(a, &nowhere)?;
            }
        }
        for ic in &self.integrity_constraints {
            if let Err(var) = ic_safety(ic) {
                return Err(Error::Unsafe { span: nowhere.clone(), var });
            }
        }
        Ok(())
    }

    pub(crate) fn check_declared(&self, a: &ActionAtom, span: &SourceSpan) -> Result<()> {
        match self.actions.get(&a.name) {
            None => Err(Error::Invalid { span: span.clone(), msg: format!("undeclared action {}", a.name) }),
            Some(def) if def.params.len() != a.args.len() => Err(Error::Invalid {
                span: span.clone(),
                msg: format!("action {} takes {} arguments, got {}", a.name, def.params.len(), a.args.len()),
            }),
            Some(_) => Ok(()),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.actions.values() {
            writeln!(f, "{a}")?;
        }
        for c in &self.action_constraints {
            writeln!(f, "{c}")?;
        }
        for ic in &self.integrity_constraints {
            writeln!(f, "{ic}")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

fn first_unbound(vars: BTreeSet<String>, bound: &BTreeSet<String>) -> std::result::Result<(), String> {
    match vars.into_iter().find(|v| !bound.contains(v)) {
        Some(v) => Err(v),
        None => Ok(()),
    }
}

/// Walks a condition left to right, adding the variables it binds.
///
/// An `in` atom binds a bare-variable subject once its call arguments are bound,
/// and `X = t` binds `X` once `t` is bound. Everything else must already be bound.
pub fn bind_condition(cond: &CodeCallCondition, bound: &mut BTreeSet<String>) -> std::result::Result<(), String> {
    for c in &cond.conjuncts {
        bind_conjunct(c, bound)?;
    }
    Ok(())
}

pub(crate) fn bind_conjunct(c: &Conjunct, bound: &mut BTreeSet<String>) -> std::result::Result<(), String> {
    match c {
        Conjunct::Atom(a) => {
            for t in &a.call.args {
                first_unbound(t.vars(), bound)?;
            }
            match (&a.polarity, &a.subject) {
                (Polarity::In, Term::Var(v)) => {
                    bound.insert(v.clone());
                    Ok(())
                }
                _ => first_unbound(a.subject.vars(), bound),
            }
        }
        Conjunct::Cmp(CmpOp::Eq, l, r) => match (l, r) {
            (Term::Var(v), t) if !bound.contains(v) && first_unbound(t.vars(), bound).is_ok() => {
                bound.insert(v.clone());
                Ok(())
            }
            (t, Term::Var(v)) if !bound.contains(v) && first_unbound(t.vars(), bound).is_ok() => {
                bound.insert(v.clone());
                Ok(())
            }
            _ => {
                first_unbound(l.vars(), bound)?;
                first_unbound(r.vars(), bound)
            }
        },
        Conjunct::Cmp(_, l, r) => {
            first_unbound(l.vars(), bound)?;
            first_unbound(r.vars(), bound)
        }
    }
}

fn status_vars(a: &StatusAtom) -> BTreeSet<String> {
    a.action.vars()
}

/// Rule safety: code-call conditions bind left to right, positive status
/// literals bind by matching, and the head and negative literals must be covered.
pub fn rule_safety(r: &Rule) -> std::result::Result<(), String> {
    let mut bound = BTreeSet::new();
    for ac in &r.body_prob {
        bind_condition(&ac.condition, &mut bound)?;
        let mut avars = BTreeSet::new();
        ac.annotation.lo.collect_vars(&mut avars);
        ac.annotation.hi.collect_vars(&mut avars);
        first_unbound(avars, &bound)?;
    }
    for a in &r.body_pos {
        bound.extend(status_vars(a));
    }
    first_unbound(status_vars(&r.head), &bound)?;
    for a in &r.body_neg {
        first_unbound(status_vars(a), &bound)?;
    }
    Ok(())
}

pub fn action_safety(a: &ActionDef) -> std::result::Result<(), String> {
    let mut bound: BTreeSet<String> = a.params.iter().cloned().collect();
    bind_condition(&a.pre, &mut bound)?;
    for atom in a.add.iter().chain(&a.del) {
        first_unbound(atom.subject.vars(), &bound)?;
        for t in &atom.call.args {
            first_unbound(t.vars(), &bound)?;
        }
    }
    Ok(())
}

pub fn constraint_safety(c: &ActionConstraint) -> std::result::Result<(), String> {
    let mut bound = BTreeSet::new();
    bind_condition(&c.guard, &mut bound)?;
    for a in &c.blocked {
        first_unbound(a.vars(), &bound)?;
    }
    Ok(())
}

pub fn ic_safety(ic: &IntegrityConstraint) -> std::result::Result<(), String> {
    let mut bound = BTreeSet::new();
    bind_condition(&ic.antecedent, &mut bound)?;
    bind_conjunct(&ic.consequent, &mut bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnnotatedCondition, Annotation, CodeCall, CodeCallAtom, Modality, StrategyId};

    fn in_atom(subject: Term, call: CodeCall) -> Conjunct {
        Conjunct::Atom(CodeCallAtom::is_in(subject, call))
    }

    #[test]
    fn unsafe_head_variable_detected() {
        let r = Rule {
            head: StatusAtom::new(Modality::Do, "a", vec![Term::var("X")]),
            body_prob: vec![],
            body_pos: vec![],
            body_neg: vec![],
        };
        assert_eq!(rule_safety(&r), Err("X".to_string()));
    }

    #[test]
    fn positive_literal_binds() {
        let r = Rule {
            head: StatusAtom::new(Modality::F, "move", vec![]),
            body_prob: vec![],
            body_pos: vec![StatusAtom::new(Modality::Do, "send", vec![Term::var("X")])],
            body_neg: vec![StatusAtom::new(Modality::F, "send", vec![Term::var("X")])],
        };
        assert!(rule_safety(&r).is_ok());
    }

    #[test]
    fn call_arguments_must_be_bound_first() {
        let cond = CodeCallCondition::new(vec![
            in_atom(Term::var("Y"), CodeCall::new("d", "g", vec![Term::var("X")])),
            in_atom(Term::var("X"), CodeCall::new("d", "f", vec![])),
        ]);
        let r = Rule {
            head: StatusAtom::new(Modality::Do, "a", vec![]),
            body_prob: vec![AnnotatedCondition::new(cond, Annotation::certain(), StrategyId::Ig)],
            body_pos: vec![],
            body_neg: vec![],
        };
        assert_eq!(rule_safety(&r), Err("X".to_string()));
    }
}
