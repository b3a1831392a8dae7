//! Status-set semantics: App, closures, consistency, feasibility, the S and T operators,
//! the fixpoint algorithms, the reduct, and brute-force enumeration of status sets.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::annotation::{all_groundings, eval_term, satisfying_groundings, Binding};
use crate::error::{Error, Result};
use crate::exec::{conc_execute, StateOps};
use crate::model::{GroundAction, GroundStatusAtom, Modality, Object, StatusAtom, StatusSet, StrategyId, Term};
use crate::program::Program;
use crate::state::{DetState, ProbState};

/// Which implications action closure adds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClosureVariant {
    /// `O ⇒ Do`, `Do ⇒ P` and `O ⇒ P`.
    #[default]
    Standard,
    /// Additionally `Do ⇒ O`.
    WithDoImpliesO,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    /// Entailment level for preconditions, guards and integrity constraints.
    pub p: f64,
    pub closure: ClosureVariant,
    /// Strategy used when checking preconditions, guards and integrity constraints.
    pub strategy: StrategyId,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { p: 1.0, closure: ClosureVariant::Standard, strategy: StrategyId::Ig }
    }
}

impl EvalConfig {
    pub fn with_p(p: f64) -> Self {
        EvalConfig { p, ..EvalConfig::default() }
    }
}

/// A ground rule instance; `rule` is the 0-based index in the program.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundRule {
    pub rule: usize,
    pub head: GroundStatusAtom,
    pub pos: Vec<GroundStatusAtom>,
    pub neg: Vec<GroundStatusAtom>,
}

impl fmt::Display for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <-", self.head)?;
        let lits = self.pos.iter().map(|a| a.to_string()).chain(self.neg.iter().map(|a| format!("not {a}")));
        for (i, l) in lits.enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            f.write_str(&l)?;
        }
        f.write_str(".")
    }
}

/// A program evaluated against a fixed state.
pub trait AgentModel {
    fn program(&self) -> &Program;
    fn closure_variant(&self) -> ClosureVariant;
    /// Ground instances of rule `i` whose code-call body holds and whose positive
    /// literals all lie in `ps`, in grounding order.
    fn instances(&self, i: usize, ps: &StatusSet) -> Result<Vec<GroundRule>>;
    fn pre_holds(&self, a: &GroundAction) -> Result<bool>;
    /// Descriptions of the ground action constraints that `do_set` violates.
    fn constraint_violations(&self, do_set: &BTreeSet<GroundAction>) -> Result<Vec<String>>;
    /// Descriptions of integrity constraints violated after concurrently executing `do_set`.
    fn ic_violations(&self, do_set: &BTreeSet<GroundAction>) -> Result<Vec<String>>;
}

/// The engine over a concrete state type.
pub struct Engine<S: StateOps> {
    prog: Program,
    state: S,
    cfg: EvalConfig,
    gamma: Vec<Vec<Binding>>,
    blocked: Vec<(usize, BTreeSet<GroundAction>)>,
    pre_cache: RefCell<BTreeMap<GroundAction, bool>>,
}

pub type ProbModel = Engine<ProbState>;
pub type ClassicalModel = Engine<DetState>;

impl<S: StateOps> Engine<S> {
    pub fn new(prog: &Program, state: &S, cfg: EvalConfig) -> Result<Self> {
        let mut gamma = Vec::with_capacity(prog.rules.len());
        for r in &prog.rules {
            let mut bs = vec![Binding::new()];
            for ac in &r.body_prob {
                let mut next = Vec::new();
                for b in &bs {
                    next.extend(satisfying_groundings(state, ac, b)?);
                }
                bs = next;
            }
            gamma.push(bs);
        }
        let mut blocked = Vec::new();
        for (i, c) in prog.action_constraints.iter().enumerate() {
            for b in all_groundings(state, &c.guard, cfg.strategy, cfg.p, &Binding::new())? {
                let set = c.blocked.iter().map(|a| ground_action(&a.name, &a.args, &b)).collect::<Result<_>>()?;
                blocked.push((i, set));
            }
        }
        Ok(Engine {
            prog: prog.clone(),
            state: state.clone(),
            cfg,
            gamma,
            blocked,
            pre_cache: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn config(&self) -> EvalConfig {
        self.cfg
    }

    /// Substitutions under which the code-call body of rule `i` holds.
    pub fn body_bindings(&self, i: usize) -> &[Binding] {
        &self.gamma[i]
    }

    /// The state after concurrently executing `do_set`.
    pub fn execute(&self, do_set: &BTreeSet<GroundAction>) -> Result<S> {
        conc_execute(&self.state, &self.prog, do_set, self.cfg.strategy, self.cfg.p)
    }
}

impl ClassicalModel {
    /// The classical image of a program over a degenerate probabilistic state.
    pub fn from_red(prog: &Program, state: &ProbState) -> Result<Self> {
        Engine::new(&crate::red::red_reduce(prog), &crate::red::red_reduce_state(state)?, EvalConfig::default())
    }
}

fn ground_action(name: &str, args: &[Term], b: &Binding) -> Result<GroundAction> {
    let args = args.iter().map(|t| eval_term(t, b)).collect::<Result<Vec<_>>>()?;
    Ok(GroundAction { name: name.to_string(), args })
}

fn ground_status(a: &StatusAtom, b: &Binding) -> Result<GroundStatusAtom> {
    Ok(GroundStatusAtom { modality: a.modality, action: ground_action(&a.action.name, &a.action.args, b)? })
}

/// Atoms of `ps` with the given modality and action name.
fn atoms_named<'a>(ps: &'a StatusSet, m: Modality, name: &'a str) -> impl Iterator<Item = &'a GroundStatusAtom> + 'a {
    let lower = GroundStatusAtom { modality: m, action: GroundAction { name: name.to_string(), args: vec![] } };
    ps.atoms.range(lower..).take_while(move |a| a.modality == m && a.action.name == name)
}

fn unify(args: &[Term], ground: &[Object], b: &Binding) -> Result<Option<Binding>> {
    if args.len() != ground.len() {
        return Ok(None);
    }
    let mut nb = b.clone();
    for (t, o) in args.iter().zip(ground) {
        match t {
            Term::Var(v) => match nb.get(v) {
                Some(x) if x != o => return Ok(None),
                Some(_) => {}
                None => {
                    nb.insert(v.clone(), o.clone());
                }
            },
            _ => {
                if t.vars().iter().any(|v| !nb.contains_key(v)) {
                    return Err(Error::Eval(format!("cannot match {t} against {o}")));
                }
                if &eval_term(t, &nb)? != o {
                    return Ok(None);
                }
            }
        }
    }
    Ok(Some(nb))
}

fn match_pos(pos: &[StatusAtom], b: Binding, ps: &StatusSet, out: &mut Vec<Binding>) -> Result<()> {
    let Some((a, rest)) = pos.split_first() else {
        out.push(b);
        return Ok(());
    };
    if a.action.args.iter().all(|t| t.vars().iter().all(|v| b.contains_key(v))) {
        if ps.contains(&ground_status(a, &b)?) {
            match_pos(rest, b, ps, out)?;
        }
        return Ok(());
    }
    for g in atoms_named(ps, a.modality, &a.action.name) {
        if let Some(nb) = unify(&a.action.args, &g.action.args, &b)? {
            match_pos(rest, nb, ps, out)?;
        }
    }
    Ok(())
}

impl<S: StateOps> AgentModel for Engine<S> {
    fn program(&self) -> &Program {
        &self.prog
    }

    fn closure_variant(&self) -> ClosureVariant {
        self.cfg.closure
    }

    fn instances(&self, i: usize, ps: &StatusSet) -> Result<Vec<GroundRule>> {
        let r = &self.prog.rules[i];
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for b in &self.gamma[i] {
            let mut bs = Vec::new();
            match_pos(&r.body_pos, b.clone(), ps, &mut bs)?;
            for b in bs {
                let g = GroundRule {
                    rule: i,
                    head: ground_status(&r.head, &b)?,
                    pos: r.body_pos.iter().map(|a| ground_status(a, &b)).collect::<Result<_>>()?,
                    neg: r.body_neg.iter().map(|a| ground_status(a, &b)).collect::<Result<_>>()?,
                };
                if seen.insert(g.clone()) {
                    out.push(g);
                }
            }
        }
        Ok(out)
    }

    fn pre_holds(&self, a: &GroundAction) -> Result<bool> {
        if let Some(v) = self.pre_cache.borrow().get(a) {
            return Ok(*v);
        }
        let def = self.prog.action(&a.name)?;
        let v = crate::exec::witness_binding(&self.state, def, &a.args, self.cfg.strategy, self.cfg.p)?.is_some();
        self.pre_cache.borrow_mut().insert(a.clone(), v);
        Ok(v)
    }

    fn constraint_violations(&self, do_set: &BTreeSet<GroundAction>) -> Result<Vec<String>> {
        Ok(self
            .blocked
            .iter()
            .filter(|(_, set)| set.is_subset(do_set))
            .map(|(i, set)| {
                let names: Vec<String> = set.iter().map(|a| a.to_string()).collect();
                format!("action constraint {} blocks {{{}}}", i + 1, names.join(", "))
            })
            .collect())
    }

    fn ic_violations(&self, do_set: &BTreeSet<GroundAction>) -> Result<Vec<String>> {
        if self.prog.integrity_constraints.is_empty() {
            return Ok(vec![]);
        }
        let next = match self.execute(do_set) {
            Ok(s) => s,
            Err(e @ (Error::ConcConflict { .. } | Error::Incoherent { .. })) => return Ok(vec![e.to_string()]),
            Err(e) => return Err(e),
        };
        ic_violations_in(&next, &self.prog, self.cfg.strategy, self.cfg.p)
    }
}

/// Integrity constraints of `prog` violated in `state` at level `p`.
pub fn ic_violations_in<W: crate::annotation::World>(
    state: &W,
    prog: &Program,
    strategy: StrategyId,
    p: f64,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, ic) in prog.integrity_constraints.iter().enumerate() {
        for b in all_groundings(state, &ic.antecedent, strategy, p, &Binding::new())? {
            let cons = crate::model::CodeCallCondition::new(vec![ic.consequent.clone()]);
            if !crate::annotation::holds_somewhere(state, &cons, strategy, p, &b)? {
                let shown: Vec<String> = b.iter().map(|(k, v)| format!("{k}={v}")).collect();
                out.push(format!("integrity constraint {} fails for {{{}}}", i + 1, shown.join(", ")));
                break;
            }
        }
    }
    Ok(out)
}

/// Holds classically in a deterministic world.
pub fn ic_holds_in(state: &DetState, ic: &crate::model::IntegrityConstraint) -> Result<bool> {
    let mut prog = Program::default();
    prog.integrity_constraints.push(ic.clone());
    Ok(ic_violations_in(state, &prog, StrategyId::Ig, 1.0)?.is_empty())
}

// ---- closures and consistency ----

fn implied(m: Modality, v: ClosureVariant) -> &'static [Modality] {
    match (m, v) {
        (Modality::O, _) => &[Modality::Do, Modality::P],
        (Modality::Do, ClosureVariant::Standard) => &[Modality::P],
        (Modality::Do, ClosureVariant::WithDoImpliesO) => &[Modality::P, Modality::O],
        _ => &[],
    }
}

/// Closure of one atom.
pub fn atom_closure(a: &GroundStatusAtom, v: ClosureVariant) -> Vec<GroundStatusAtom> {
    let mut out = vec![a.clone()];
    let mut i = 0;
    while i < out.len() {
        for &m in implied(out[i].modality, v) {
            let g = GroundStatusAtom { modality: m, action: a.action.clone() };
            if !out.contains(&g) {
                out.push(g);
            }
        }
        i += 1;
    }
    out
}

pub fn action_closure(ps: &StatusSet, v: ClosureVariant) -> StatusSet {
    StatusSet::from_atoms(ps.iter().flat_map(|a| atom_closure(a, v)))
}

/// Closure under `O ⇒ P` only.
pub fn deontic_closure(ps: &StatusSet) -> StatusSet {
    let extra = ps
        .iter()
        .filter(|a| a.modality == Modality::O)
        .map(|a| GroundStatusAtom { modality: Modality::P, action: a.action.clone() });
    StatusSet::from_atoms(ps.iter().cloned().chain(extra))
}

fn clash_on(ps: &StatusSet, a: &GroundAction) -> Option<String> {
    if ps.has(Modality::O, a) && ps.has(Modality::W, a) {
        return Some(format!("O {a} and W {a}"));
    }
    if ps.has(Modality::P, a) && ps.has(Modality::F, a) {
        return Some(format!("P {a} and F {a}"));
    }
    None
}

/// O/W and P/F clashes plus permitted actions whose precondition fails.
pub fn deontic_witnesses<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for a in ps.actions() {
        if let Some(w) = clash_on(ps, &a) {
            out.push(w);
        }
        if ps.has(Modality::P, &a) && !m.pre_holds(&a)? {
            out.push(format!("P {a} but its precondition fails"));
        }
    }
    Ok(out)
}

pub fn deontically_consistent<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<bool> {
    Ok(deontic_witnesses(m, ps)?.is_empty())
}

pub fn action_consistent<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<bool> {
    Ok(m.constraint_violations(&crate::model::op_projection(ps, Modality::Do))?.is_empty())
}

pub fn state_consistent<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<bool> {
    Ok(m.ic_violations(&crate::model::op_projection(ps, Modality::Do))?.is_empty())
}

// ---- App, S, T ----

fn fires<M: AgentModel + ?Sized>(m: &M, g: &GroundRule, ps: &StatusSet) -> Result<bool> {
    if g.neg.iter().any(|a| ps.contains(a)) {
        return Ok(false);
    }
    if g.head.modality.needs_pre() && !m.pre_holds(&g.head.action)? {
        return Ok(false);
    }
    for a in &g.pos {
        if a.modality.needs_pre() && !m.pre_holds(&a.action)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Heads of the ground instances that fire under `ps`.
pub fn app<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<StatusSet> {
    let mut out = StatusSet::new();
    for i in 0..m.program().rules.len() {
        for g in m.instances(i, ps)? {
            if fires(m, &g, ps)? {
                out.insert(g.head);
            }
        }
    }
    Ok(out)
}

/// `T(ps) = App(ps) ∪ A-Cl(ps)`.
pub fn t_operator<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<StatusSet> {
    Ok(app(m, ps)?.union(&action_closure(ps, m.closure_variant())))
}

/// One line per fired ground rule.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceLine {
    pub iteration: usize,
    /// 1-based rule number.
    pub rule: usize,
    pub head: GroundStatusAtom,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iter {} rule {} {}", self.iteration, self.rule, self.head)
    }
}

/// One S step: `X := ps`, then add the closure of every firing head, failing on a clash.
pub fn compute_s<M: AgentModel + ?Sized>(
    m: &M,
    ps: &StatusSet,
    iteration: usize,
    trace: &mut Vec<TraceLine>,
) -> Result<StatusSet> {
    let mut x = ps.clone();
    let mut checked_all = false;
    for i in 0..m.program().rules.len() {
        for g in m.instances(i, ps)? {
            if !fires(m, &g, ps)? {
                continue;
            }
            trace.push(TraceLine { iteration, rule: i + 1, head: g.head.clone() });
            for a in atom_closure(&g.head, m.closure_variant()) {
                x.insert(a);
            }
            let clash = if checked_all {
                clash_on(&x, &g.head.action)
            } else {
                checked_all = true;
                x.actions().iter().find_map(|a| clash_on(&x, a))
            };
            if let Some(witness) = clash {
                return Err(Error::NoConsistentSet { witness });
            }
        }
    }
    Ok(x)
}

/// Iterates and firing lines of a fixpoint run.
#[derive(Clone, Debug, Default)]
pub struct LfpTrace {
    /// `S¹, S², …` up to and including the repeated fixpoint.
    pub iterates: Vec<StatusSet>,
    pub firings: Vec<TraceLine>,
}

/// Least fixpoint of the S operator for positive programs, followed by the final checks.
pub fn compute_lfp<M: AgentModel + ?Sized>(m: &M) -> Result<StatusSet> {
    compute_lfp_traced(m, &mut LfpTrace::default())
}

pub fn compute_lfp_traced<M: AgentModel + ?Sized>(m: &M, trace: &mut LfpTrace) -> Result<StatusSet> {
    let mut x = StatusSet::new();
    let mut iteration = 1;
    loop {
        let next = compute_s(m, &x, iteration, &mut trace.firings)?;
        trace.iterates.push(next.clone());
        if next == x {
            break;
        }
        x = next;
        iteration += 1;
    }
    let do_set = crate::model::op_projection(&x, Modality::Do);
    for a in &do_set {
        if !m.pre_holds(a)? {
            return Err(Error::NoReasonableSet { reason: format!("precondition of {a} fails") });
        }
    }
    if let Some(v) = m.ic_violations(&do_set)?.into_iter().next() {
        return Err(Error::NoReasonableSet { reason: v });
    }
    if let Some(v) = m.constraint_violations(&do_set)?.into_iter().next() {
        return Err(Error::NoReasonableSet { reason: v });
    }
    Ok(x)
}

// ---- feasibility ----

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    pub ps1_ok: bool,
    pub ps2_ok: bool,
    pub ps3_ok: bool,
    pub ps4_ok: bool,
    pub witnesses: Vec<String>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.ps1_ok && self.ps2_ok && self.ps3_ok && self.ps4_ok
    }

    /// PS1 through PS3, the conditions groundedness quantifies over.
    pub fn closed_and_consistent(&self) -> bool {
        self.ps1_ok && self.ps2_ok && self.ps3_ok
    }
}

pub fn check_feasible<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<FeasibilityReport> {
    let mut rep = FeasibilityReport::default();
    let missing: Vec<_> = app(m, ps)?.atoms.into_iter().filter(|a| !ps.contains(a)).collect();
    rep.ps1_ok = missing.is_empty();
    for a in missing {
        rep.witnesses.push(format!("PS1: rule head {a} missing"));
    }
    let mut ps2 = deontic_witnesses(m, ps)?;
    ps2.extend(m.constraint_violations(&crate::model::op_projection(ps, Modality::Do))?);
    rep.ps2_ok = ps2.is_empty();
    rep.witnesses.extend(ps2.into_iter().map(|w| format!("PS2: {w}")));
    let closed = action_closure(ps, m.closure_variant());
    rep.ps3_ok = closed == *ps;
    for a in closed.atoms.difference(&ps.atoms) {
        rep.witnesses.push(format!("PS3: closure adds {a}"));
    }
    let ps4 = m.ic_violations(&crate::model::op_projection(ps, Modality::Do))?;
    rep.ps4_ok = ps4.is_empty();
    rep.witnesses.extend(ps4.into_iter().map(|w| format!("PS4: {w}")));
    Ok(rep)
}

// ---- reduct and reasonableness ----

/// The reduct of a model with respect to a fixed status set: instances with a negative literal
/// in the set are dropped and the rest lose their negative literals.
pub struct Reduct<'a, M: AgentModel + ?Sized> {
    inner: &'a M,
    ps: StatusSet,
}

impl<'a, M: AgentModel + ?Sized> Reduct<'a, M> {
    pub fn new(inner: &'a M, ps: &StatusSet) -> Self {
        Reduct { inner, ps: ps.clone() }
    }
}

impl<M: AgentModel + ?Sized> AgentModel for Reduct<'_, M> {
    fn program(&self) -> &Program {
        self.inner.program()
    }

    fn closure_variant(&self) -> ClosureVariant {
        self.inner.closure_variant()
    }

    fn instances(&self, i: usize, ps: &StatusSet) -> Result<Vec<GroundRule>> {
        Ok(self
            .inner
            .instances(i, ps)?
            .into_iter()
            .filter(|g| g.neg.iter().all(|a| !self.ps.contains(a)))
            .map(|g| GroundRule { neg: vec![], ..g })
            .collect())
    }

    fn pre_holds(&self, a: &GroundAction) -> Result<bool> {
        self.inner.pre_holds(a)
    }

    fn constraint_violations(&self, do_set: &BTreeSet<GroundAction>) -> Result<Vec<String>> {
        self.inner.constraint_violations(do_set)
    }

    fn ic_violations(&self, do_set: &BTreeSet<GroundAction>) -> Result<Vec<String>> {
        self.inner.ic_violations(do_set)
    }
}

/// The ground reduct, with positive literals matched against the status-atom universe.
pub fn reduct<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<Vec<GroundRule>> {
    let universe = full_status_set(&universe_actions(m)?);
    let red = Reduct::new(m, ps);
    let mut out = Vec::new();
    for i in 0..m.program().rules.len() {
        out.extend(red.instances(i, &universe)?);
    }
    Ok(out)
}

pub fn check_reasonable<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet) -> Result<bool> {
    let red = Reduct::new(m, ps);
    match compute_lfp(&red) {
        Ok(x) => Ok(x == *ps && check_feasible(&red, ps)?.feasible()),
        Err(e) if e.is_sentinel() => Ok(false),
        Err(e) => Err(e),
    }
}

// ---- brute force ----

/// Default cap on the number of ground status atoms enumerated.
pub const DEFAULT_BOUND: usize = 20;

/// Ground actions occurring in ground rule instances, closed under positive-literal matching.
pub fn universe_actions<M: AgentModel + ?Sized>(m: &M) -> Result<Vec<GroundAction>> {
    let mut acts: BTreeSet<GroundAction> = BTreeSet::new();
    loop {
        let full = full_status_set(&acts.iter().cloned().collect::<Vec<_>>());
        let mut next = acts.clone();
        for i in 0..m.program().rules.len() {
            for g in m.instances(i, &full)? {
                next.insert(g.head.action.clone());
                next.extend(g.pos.iter().chain(&g.neg).map(|a| a.action.clone()));
            }
        }
        if next == acts {
            return Ok(acts.into_iter().collect());
        }
        acts = next;
    }
}

fn full_status_set(acts: &[GroundAction]) -> StatusSet {
    StatusSet::from_atoms(
        acts.iter()
            .flat_map(|a| Modality::ALL.iter().map(move |&m| GroundStatusAtom { modality: m, action: a.clone() })),
    )
}

/// Feasible, rational and reasonable status sets found by exhaustive enumeration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    pub universe: Vec<GroundAction>,
    pub feasible: Vec<StatusSet>,
    pub rational: Vec<StatusSet>,
    pub reasonable: Vec<StatusSet>,
}

const NM: usize = 5;

fn bit(action: usize, m: Modality) -> u128 {
    1u128 << (action * NM + m.index())
}

/// Per-action modality masks that are closed and free of O/W and P/F clashes.
fn local_combos(v: ClosureVariant, pre_ok: bool) -> Vec<u8> {
    let has = |mask: u8, m: Modality| mask & (1 << m.index()) != 0;
    (0u8..32)
        .filter(|&mask| {
            let closed =
                Modality::ALL.iter().filter(|&&m| has(mask, m)).all(|&m| implied(m, v).iter().all(|&n| has(mask, n)));
            let clash = (has(mask, Modality::O) && has(mask, Modality::W))
                || (has(mask, Modality::P) && has(mask, Modality::F));
            closed && !clash && (pre_ok || !has(mask, Modality::P))
        })
        .collect()
}

struct Compiled {
    acts: Vec<GroundAction>,
    index: BTreeMap<GroundAction, usize>,
    /// (head bit, positive mask, negative mask) of instances whose precondition checks pass.
    rules: Vec<(u128, u128, u128)>,
    do_mask: u128,
}

impl Compiled {
    fn new<M: AgentModel + ?Sized>(m: &M, acts: Vec<GroundAction>) -> Result<Self> {
        let index: BTreeMap<_, _> = acts.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let full = full_status_set(&acts);
        let mut rules = Vec::new();
        let mask_of = |atoms: &[GroundStatusAtom]| -> u128 {
            atoms.iter().map(|a| bit(index[&a.action], a.modality)).fold(0, |x, y| x | y)
        };
        for i in 0..m.program().rules.len() {
            for g in m.instances(i, &full)? {
                if fires(m, &GroundRule { neg: vec![], ..g.clone() }, &full)? {
                    rules.push((bit(index[&g.head.action], g.head.modality), mask_of(&g.pos), mask_of(&g.neg)));
                }
            }
        }
        let do_mask = (0..acts.len()).map(|i| bit(i, Modality::Do)).fold(0, |x, y| x | y);
        Ok(Compiled { acts, index, rules, do_mask })
    }

    fn to_set(&self, mask: u128) -> StatusSet {
        let mut ps = StatusSet::new();
        for (i, a) in self.acts.iter().enumerate() {
            for m in Modality::ALL {
                if mask & bit(i, m) != 0 {
                    ps.insert(GroundStatusAtom { modality: m, action: a.clone() });
                }
            }
        }
        ps
    }

    fn do_set(&self, mask: u128) -> BTreeSet<GroundAction> {
        self.acts
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & bit(*i, Modality::Do) != 0)
            .map(|(_, a)| a.clone())
            .collect()
    }

    fn ps1(&self, mask: u128) -> bool {
        self.rules.iter().all(|&(h, pos, neg)| pos & !mask != 0 || neg & mask != 0 || h & mask != 0)
    }

    fn closure_mask(&self, h: u128, v: ClosureVariant) -> u128 {
        let idx = h.trailing_zeros() as usize;
        let (a, m) = (idx / NM, Modality::ALL[idx % NM]);
        let g = GroundStatusAtom { modality: m, action: self.acts[a].clone() };
        atom_closure(&g, v).iter().map(|x| bit(self.index[&x.action], x.modality)).fold(0, |x, y| x | y)
    }

    /// Least fixpoint of S for the reduct by `neg_ref`, or `None` on a clash.
    fn reduct_lfp(&self, neg_ref: u128, v: ClosureVariant) -> Option<u128> {
        let mut x = 0u128;
        loop {
            let mut next = x;
            for &(h, pos, neg) in &self.rules {
                if neg & neg_ref == 0 && pos & !x == 0 {
                    next |= self.closure_mask(h, v);
                }
            }
            for i in 0..self.acts.len() {
                let has = |m| next & bit(i, m) != 0;
                if (has(Modality::O) && has(Modality::W)) || (has(Modality::P) && has(Modality::F)) {
                    return None;
                }
            }
            if next == x {
                return Some(x);
            }
            x = next;
        }
    }
}

/// Enumerates every closed, deontically consistent subset of the ground status-atom universe
/// and classifies it. Fails when the universe exceeds `bound` status atoms.
pub fn brute_force_status_sets<M: AgentModel + ?Sized>(m: &M, bound: usize) -> Result<Catalog> {
    let acts = universe_actions(m)?;
    let size = acts.len() * NM;
    if size > bound || size > 125 {
        return Err(Error::BoundExceeded { size, bound });
    }
    let v = m.closure_variant();
    let comp = Compiled::new(m, acts.clone())?;
    let combos: Vec<Vec<u8>> = acts.iter().map(|a| Ok(local_combos(v, m.pre_holds(a)?))).collect::<Result<_>>()?;

    let mut ac_cache: HashMap<u128, bool> = HashMap::new();
    let mut ic_cache: HashMap<u128, bool> = HashMap::new();
    let mut closed_consistent = Vec::new();
    let mut feasible = Vec::new();
    let mut digits = vec![0usize; acts.len()];
    loop {
        let mut mask = 0u128;
        for (i, &d) in digits.iter().enumerate() {
            mask |= (combos[i][d] as u128) << (i * NM);
        }
        if comp.ps1(mask) {
            let dm = mask & comp.do_mask;
            let ac_ok = match ac_cache.get(&dm) {
                Some(&b) => b,
                None => {
                    let b = m.constraint_violations(&comp.do_set(mask))?.is_empty();
                    ac_cache.insert(dm, b);
                    b
                }
            };
            if ac_ok {
                closed_consistent.push(mask);
                let ic_ok = match ic_cache.get(&dm) {
                    Some(&b) => b,
                    None => {
                        let b = m.ic_violations(&comp.do_set(mask))?.is_empty();
                        ic_cache.insert(dm, b);
                        b
                    }
                };
                if ic_ok {
                    feasible.push(mask);
                }
            }
        }
        let mut k = 0;
        loop {
            if k == digits.len() {
                return finish(m, &comp, feasible, closed_consistent, acts, &mut ac_cache, &mut ic_cache);
            }
            digits[k] += 1;
            if digits[k] < combos[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

fn finish<M: AgentModel + ?Sized>(
    m: &M,
    comp: &Compiled,
    feasible: Vec<u128>,
    closed_consistent: Vec<u128>,
    acts: Vec<GroundAction>,
    ac_cache: &mut HashMap<u128, bool>,
    ic_cache: &mut HashMap<u128, bool>,
) -> Result<Catalog> {
    let v = m.closure_variant();
    let rational: Vec<u128> =
        feasible.iter().copied().filter(|&f| !closed_consistent.iter().any(|&g| g != f && g & !f == 0)).collect();
    let mut reasonable = Vec::new();
    for &f in &feasible {
        let Some(x) = comp.reduct_lfp(f, v) else { continue };
        if x != f {
            continue;
        }
        let dm = f & comp.do_mask;
        let do_set = comp.do_set(f);
        let mut ok = true;
        for a in &do_set {
            ok &= m.pre_holds(a)?;
        }
        ok &= *ac_cache.entry(dm).or_insert(m.constraint_violations(&do_set)?.is_empty());
        ok &= *ic_cache.entry(dm).or_insert(m.ic_violations(&do_set)?.is_empty());
        if ok {
            reasonable.push(f);
        }
    }
    let sets = |ms: &[u128]| {
        let mut v: Vec<StatusSet> = ms.iter().map(|&x| comp.to_set(x)).collect();
        v.sort();
        v
    };
    Ok(Catalog { universe: acts, feasible: sets(&feasible), rational: sets(&rational), reasonable: sets(&reasonable) })
}

/// Whether no proper subset of `ps` satisfies PS1 through PS3. `None` when `ps` spans more
/// than `bound` status atoms.
pub fn is_grounded<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet, bound: usize) -> Result<Option<bool>> {
    let acts: Vec<GroundAction> = ps.actions().into_iter().collect();
    if acts.len() * NM > bound.min(125) {
        return Ok(None);
    }
    let v = m.closure_variant();
    let comp = Compiled::new(m, universe_with(m, &acts)?)?;
    let target: u128 = ps.iter().map(|a| bit(comp.index[&a.action], a.modality)).fold(0, |x, y| x | y);
    let combos: Vec<Vec<u8>> = acts
        .iter()
        .map(|a| {
            let own = ((target >> (comp.index[a] * NM)) & 0x1f) as u8;
            Ok(local_combos(v, m.pre_holds(a)?).into_iter().filter(|c| c & !own == 0).collect())
        })
        .collect::<Result<_>>()?;
    if combos.iter().any(Vec::is_empty) {
        return Ok(Some(true));
    }
    let mut digits = vec![0usize; acts.len()];
    loop {
        let mut mask = 0u128;
        for (i, a) in acts.iter().enumerate() {
            mask |= (combos[i][digits[i]] as u128) << (comp.index[a] * NM);
        }
        if mask != target && comp.ps1(mask) && m.constraint_violations(&comp.do_set(mask))?.is_empty() {
            return Ok(Some(false));
        }
        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok(Some(true));
            }
            digits[k] += 1;
            if digits[k] < combos[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

fn universe_with<M: AgentModel + ?Sized>(m: &M, extra: &[GroundAction]) -> Result<Vec<GroundAction>> {
    let mut all: BTreeSet<GroundAction> = universe_actions(m)?.into_iter().collect();
    all.extend(extra.iter().cloned());
    Ok(all.into_iter().collect())
}

/// Feasible and grounded; `None` when groundedness is beyond `bound`.
pub fn check_rational<M: AgentModel + ?Sized>(m: &M, ps: &StatusSet, bound: usize) -> Result<Option<bool>> {
    if !check_feasible(m, ps)?.feasible() {
        return Ok(Some(false));
    }
    is_grounded(m, ps, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program, parse_state, parse_status_set};

    fn model(prog: &str, state: &str) -> ProbModel {
        ProbModel::new(&parse_program(prog).unwrap(), &parse_state(state).unwrap(), EvalConfig::default()).unwrap()
    }

    fn set(text: &str) -> StatusSet {
        parse_status_set(text).unwrap()
    }

    #[test]
    fn closures() {
        let v = ClosureVariant::Standard;
        assert_eq!(
            action_closure(&set("{O send_warn(t80)}"), v),
            set("{O send_warn(t80), Do send_warn(t80), P send_warn(t80)}")
        );
        assert_eq!(action_closure(&StatusSet::new(), v), StatusSet::new());
        assert_eq!(action_closure(&set("{Do a()}"), ClosureVariant::WithDoImpliesO), set("{Do a(), O a(), P a()}"));
        assert_eq!(action_closure(&set("{Do a()}"), v), set("{Do a(), P a()}"));
        assert_eq!(deontic_closure(&set("{O a()}")), set("{O a(), P a()}"));
        assert_eq!(deontic_closure(&set("{F a()}")), set("{F a()}"));
        let once = action_closure(&set("{O a(), Do b()}"), v);
        assert_eq!(action_closure(&once, v), once);
    }

    #[test]
    fn power_warn() {
        let m = model(
            "action power_warn(). O power_warn() <- in(X, surv.powerlevel()) & X < 2000.",
            "surv.powerlevel() = { rv{1000: 1.0} }",
        );
        assert_eq!(app(&m, &StatusSet::new()).unwrap(), set("{O power_warn()}"));
        assert_eq!(compute_lfp(&m).unwrap(), set("{O power_warn(), Do power_warn(), P power_warn()}"));
    }

    #[test]
    fn empty_program() {
        let m = model("", "");
        assert!(app(&m, &set("{P a()}")).is_err() || app(&m, &StatusSet::new()).unwrap().is_empty());
        assert_eq!(compute_lfp(&m).unwrap(), StatusSet::new());
        assert!(check_reasonable(&m, &StatusSet::new()).unwrap());
        let cat = brute_force_status_sets(&m, DEFAULT_BOUND).unwrap();
        assert_eq!(cat.rational, vec![StatusSet::new()]);
    }

    #[test]
    fn clash_program() {
        let m = model("action send_warn(X). P send_warn(t80) <- . F send_warn(t80) <- .", "");
        let e = compute_s(&m, &StatusSet::new(), 1, &mut Vec::new()).unwrap_err();
        assert_eq!(e.to_string(), "no consistent set exists");
        assert!(matches!(compute_lfp(&m), Err(Error::NoConsistentSet { .. })));
        assert!(brute_force_status_sets(&m, DEFAULT_BOUND).unwrap().feasible.is_empty());
    }

    #[test]
    fn allocator_consistency() {
        let m = model(
            "action send_to_a() { pre: in(X, allocator.avail_rsc()) & X > 0 }\n\
             action send_to_b() { pre: in(X, allocator.avail_rsc()) & X > 0 }\n\
             { send_to_a(), send_to_b() } <~ in(X, allocator.avail_rsc()) & X < 2.",
            "allocator.avail_rsc() = { rv{1: 1.0} }",
        );
        let ps = set("{P send_to_a(), Do send_to_a(), Do send_to_b(), O send_to_b()}");
        assert!(deontically_consistent(&m, &ps).unwrap());
        assert!(!action_consistent(&m, &ps).unwrap());
        assert!(deontically_consistent(&m, &StatusSet::new()).unwrap());
        assert!(!deontically_consistent(&m, &set("{P send_to_a(), F send_to_a()}")).unwrap());
    }

    #[test]
    fn vehicle_state_consistency() {
        let m = model(
            "action move_forward(V) { pre: in(X, geo.getposition(V)); add: in(X + 1, geo.getposition(V)); del: in(X, geo.getposition(V)) }\n\
             ic in(X, geo.getposition(a)) & in(Y, geo.getposition(b)) => X != Y.",
            "geo.getposition(a) = { rv{200: 1.0} }\ngeo.getposition(b) = { rv{201: 1.0} }",
        );
        assert!(!state_consistent(&m, &set("{P move_forward(a), Do move_forward(a)}")).unwrap());
        assert!(state_consistent(&m, &set("{P move_forward(a)}")).unwrap());
    }

    #[test]
    fn feasibility_flags() {
        let m = model("action a().", "");
        let rep = check_feasible(&m, &set("{O a(), W a()}")).unwrap();
        assert!(!rep.ps2_ok);
        assert!(!rep.feasible());
    }

    #[test]
    fn trace_lines_render() {
        let t = TraceLine { iteration: 1, rule: 3, head: GroundStatusAtom::simple(Modality::O, "send_warn", &["t80"]) };
        assert_eq!(t.to_string(), "iter 1 rule 3 O send_warn(t80)");
    }

    #[test]
    fn local_combo_counts() {
        assert_eq!(local_combos(ClosureVariant::Standard, true).len(), 9);
        assert_eq!(local_combos(ClosureVariant::WithDoImpliesO, true).len(), 7);
        assert_eq!(local_combos(ClosureVariant::Standard, false).len(), 4);
    }
}
