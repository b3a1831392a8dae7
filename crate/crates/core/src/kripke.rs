//! Compatible deterministic states, probabilistic Kripke structures and action execution over them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::annotation::{first_grounding, Binding};
use crate::error::{Error, Result};
use crate::exec::{apply_action, instantiate_effects, theta};
use crate::model::{fmt_real, ActionDef, GroundAction, GroundCall, Object, RandomVariable, StrategyId, EPS};
use crate::program::Program;
use crate::state::{conc_effects, DetState, ProbState};

/// Default cap on the number of enumerated compatible states.
pub const DEFAULT_PRODUCT_CAP: u128 = 1_000_000;

/// A complete distribution; `None` stands for "no object".
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedRv {
    pub entries: Vec<(Option<Object>, f64)>,
}

impl NormalizedRv {
    pub fn mass(&self, o: &Option<Object>) -> f64 {
        self.entries.iter().find(|(x, _)| x == o).map_or(0.0, |(_, p)| *p)
    }
}

pub fn normalize_rv(rv: &RandomVariable) -> NormalizedRv {
    let mut entries: Vec<(Option<Object>, f64)> =
        rv.entries.iter().filter(|(_, p)| *p > EPS).map(|(o, p)| (Some(o.clone()), *p)).collect();
    let total: f64 = entries.iter().map(|(_, p)| p).sum();
    if total < 1.0 - EPS {
        entries.push((None, 1.0 - total));
    }
    NormalizedRv { entries }
}

/// One random variable of a state, with the choices a compatible world can make for it.
#[derive(Clone, Debug)]
struct Slot {
    call: GroundCall,
    /// "No object" first, then objects in random-variable order.
    choices: Vec<(Option<Object>, f64)>,
}

fn slots(pstate: &ProbState) -> Vec<Slot> {
    let mut out = Vec::new();
    for (call, rvs) in &pstate.entries {
        for rv in rvs {
            let n = normalize_rv(rv);
            let mut choices = Vec::new();
            if !rv.is_degenerate() {
                choices.push((None, n.mass(&None)));
            }
            choices.extend(n.entries.iter().filter(|(o, _)| o.is_some()).cloned());
            out.push(Slot { call: call.clone(), choices });
        }
    }
    out
}

fn product_size(slots: &[Slot]) -> u128 {
    slots.iter().fold(1u128, |acc, s| acc.saturating_mul(s.choices.len() as u128))
}

/// Calls `f` on every choice tuple; the first slot varies fastest.
fn for_each_tuple(slots: &[Slot], mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; slots.len()];
    loop {
        f(&digits);
        let mut k = 0;
        loop {
            if k == slots.len() {
                return;
            }
            digits[k] += 1;
            if digits[k] < slots[k].choices.len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

fn world_of(slots: &[Slot], digits: &[usize]) -> (DetState, f64) {
    let mut st = DetState::new();
    let mut mass = 1.0;
    for (s, &d) in slots.iter().zip(digits) {
        let (o, p) = &s.choices[d];
        if let Some(o) = o {
            st.insert(s.call.clone(), o.clone());
        }
        mass *= p;
    }
    (st, mass)
}

fn check_cap(slots: &[Slot], cap: u128) -> Result<()> {
    let size = product_size(slots);
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(())
}

/// Worlds placing at most one object of each random variable, in enumeration order.
pub fn compatible_states(pstate: &ProbState, cap: u128) -> Result<Vec<DetState>> {
    Ok(product_kripke(pstate, cap)?.states)
}

/// A distribution over deterministic states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KripkeStructure {
    pub states: Vec<DetState>,
    pub prob: Vec<f64>,
}

impl KripkeStructure {
    pub fn new(states: Vec<DetState>, prob: Vec<f64>) -> Result<Self> {
        if states.len() != prob.len() {
            return Err(Error::Structure("state and probability counts differ".into()));
        }
        if prob.iter().any(|p| !(-EPS..=1.0 + EPS).contains(p)) {
            return Err(Error::Structure("probability outside [0, 1]".into()));
        }
        let total: f64 = prob.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Structure(format!("probabilities sum to {}", fmt_real(total))));
        }
        Ok(KripkeStructure { states, prob })
    }

    pub fn from_pairs(pairs: Vec<(DetState, f64)>) -> Result<Self> {
        let (states, prob) = pairs.into_iter().unzip();
        KripkeStructure::new(states, prob)
    }

    pub fn total(&self) -> f64 {
        self.prob.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mass_of(&self, st: &DetState) -> f64 {
        self.states.iter().zip(&self.prob).filter(|(s, _)| *s == st).map(|(_, p)| p).sum()
    }
}

impl fmt::Display for KripkeStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, p)) in self.states.iter().zip(&self.prob).enumerate() {
            let p = (p * 1e12).round() / 1e12;
            writeln!(f, "#{} p={} {}", i + 1, fmt_real(p), s)?;
        }
        Ok(())
    }
}

/// The product structure: each world's mass is the product of its choices' normalized masses.
pub fn product_kripke(pstate: &ProbState, cap: u128) -> Result<KripkeStructure> {
    let slots = slots(pstate);
    check_cap(&slots, cap)?;
    let mut k = KripkeStructure::default();
    for_each_tuple(&slots, |d| {
        let (s, p) = world_of(&slots, d);
        k.states.push(s);
        k.prob.push(p);
    });
    Ok(k)
}

/// A mismatch between a structure and a probabilistic state.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub call: GroundCall,
    pub object: Object,
    pub expected: f64,
    pub actual: f64,
}

impl fmt::Display for Residual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "residual at {} for {}: expected {}, got {}",
            self.object,
            self.call,
            fmt_real(self.expected),
            fmt_real((self.actual * 1e12).round() / 1e12)
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompatReport {
    pub residuals: Vec<Residual>,
    /// Indices of worlds holding two objects of one random variable.
    pub malformed: Vec<usize>,
}

impl CompatReport {
    pub fn compatible(&self) -> bool {
        self.residuals.is_empty() && self.malformed.is_empty()
    }
}

/// Checks every object's marginal mass against its probability, within `tol`.
pub fn check_compatibility(k: &KripkeStructure, pstate: &ProbState, tol: f64) -> CompatReport {
    let mut rep = CompatReport::default();
    let mut expected: BTreeMap<(GroundCall, Object), f64> = BTreeMap::new();
    for (call, rvs) in &pstate.entries {
        for rv in rvs {
            for (o, p) in &rv.entries {
                expected.insert((call.clone(), o.clone()), *p);
            }
        }
    }
    let mut actual: BTreeMap<(GroundCall, Object), f64> = BTreeMap::new();
    for (i, (s, p)) in k.states.iter().zip(&k.prob).enumerate() {
        for (call, objs) in &s.entries {
            for o in objs {
                *actual.entry((call.clone(), o.clone())).or_default() += p;
            }
            for rv in pstate.eval(call) {
                if objs.iter().filter(|o| rv.contains(o)).count() > 1 {
                    rep.malformed.push(i);
                }
            }
        }
    }
    let keys: std::collections::BTreeSet<_> = expected.keys().chain(actual.keys()).cloned().collect();
    for key in keys {
        let e = expected.get(&key).copied().unwrap_or(0.0);
        let a = actual.get(&key).copied().unwrap_or(0.0);
        if (e - a).abs() > tol {
            rep.residuals.push(Residual { call: key.0, object: key.1, expected: e, actual: a });
        }
    }
    rep.malformed.dedup();
    rep
}

/// Moves mass `δ` around a 2×2 block of choices of the first two random variables that
/// have an object of probability strictly between 0 and 1; marginals are unchanged.
pub fn perturb_kripke(k: &KripkeStructure, pstate: &ProbState, delta: f64, cap: u128) -> Result<KripkeStructure> {
    let slots = slots(pstate);
    check_cap(&slots, cap)?;
    let qualifying: Vec<usize> = (0..slots.len())
        .filter(|&i| slots[i].choices.iter().any(|(o, p)| o.is_some() && *p > EPS && *p < 1.0 - EPS))
        .collect();
    if qualifying.len() < 2 {
        return Err(Error::Structure("perturbation needs two random variables with uncertain objects".into()));
    }
    if delta < 0.0 {
        return Err(Error::Structure("negative perturbation".into()));
    }
    let pick = |i: usize| -> (usize, usize) {
        let c = &slots[i].choices;
        let x = c.iter().position(|(o, p)| o.is_some() && *p > EPS && *p < 1.0 - EPS).unwrap();
        let x2 = (0..c.len()).find(|&j| j != x && c[j].1 > EPS).unwrap();
        (x, x2)
    };
    let (s1, s2) = (qualifying[0], qualifying[1]);
    let ((x, x2), (y, y2)) = (pick(s1), pick(s2));
    let index: BTreeMap<&DetState, usize> = k.states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut prob = k.prob.clone();
    let mut missing = None;
    for_each_tuple(&slots, |d| {
        if missing.is_some() || (d[s1] != x || d[s2] != y) {
            return;
        }
        let rest: f64 = slots
            .iter()
            .zip(d)
            .enumerate()
            .filter(|(i, _)| *i != s1 && *i != s2)
            .map(|(_, (s, &c))| s.choices[c].1)
            .product();
        for (a, b, sign) in [(x, y, 1.0), (x, y2, -1.0), (x2, y, -1.0), (x2, y2, 1.0)] {
            let mut t = d.to_vec();
            t[s1] = a;
            t[s2] = b;
            let (st, _) = world_of(&slots, &t);
            match index.get(&st) {
                Some(&i) => prob[i] += sign * delta * rest,
                None => missing = Some(st),
            }
        }
    });
    if let Some(st) = missing {
        return Err(Error::Structure(format!("world {st} is not in the structure")));
    }
    if prob.iter().any(|&p| p < -EPS) {
        return Err(Error::Structure(format!("perturbation {} exceeds the admissible bound", fmt_real(delta))));
    }
    Ok(KripkeStructure { states: k.states.clone(), prob: prob.into_iter().map(|p| p.max(0.0)).collect() })
}

/// `θ ∪ γ` for a world where the action's precondition holds.
pub fn world_witness(world: &DetState, def: &ActionDef, args: &[Object]) -> Result<Option<Binding>> {
    first_grounding(world, &def.pre, StrategyId::Ig, 1.0, &theta(def, args)?)
}

/// Indices of worlds with positive mass where the precondition holds.
pub fn witnesses(k: &KripkeStructure, def: &ActionDef, args: &[Object]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, (s, p)) in k.states.iter().zip(&k.prob).enumerate() {
        if *p > EPS && world_witness(s, def, args)?.is_some() {
            out.push(i);
        }
    }
    Ok(out)
}

/// Witness worlds of the product structure; empty when the action is not possibly executable.
pub fn possibly_executable(pstate: &ProbState, def: &ActionDef, args: &[Object], cap: u128) -> Result<Vec<usize>> {
    witnesses(&product_kripke(pstate, cap)?, def, args)
}

/// Minimum mass among the witness worlds of `k`.
pub fn executability_probability(k: &KripkeStructure, def: &ActionDef, args: &[Object]) -> Result<f64> {
    let w = witnesses(k, def, args)?;
    w.iter()
        .map(|&i| k.prob[i])
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::Precondition(format!("{} is not possibly executable", def.name)))
}

/// The executed structure together with the index each old world maps to.
#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    pub result: KripkeStructure,
    pub map: Vec<usize>,
}

/// Transforms every witness world by the action's effects and merges equal worlds.
/// `gamma` fixes the precondition binding; otherwise each world uses its first witness.
pub fn execute_mapped(
    k: &KripkeStructure,
    def: &ActionDef,
    args: &[Object],
    gamma: Option<&Binding>,
) -> Result<Execution> {
    let th = theta(def, args)?;
    let mut result = KripkeStructure::default();
    let mut index: BTreeMap<DetState, usize> = BTreeMap::new();
    let mut map = Vec::with_capacity(k.len());
    for (s, &p) in k.states.iter().zip(&k.prob) {
        let b = if p > EPS { world_witness(s, def, args)? } else { None };
        let next = match b {
            Some(b) => {
                let mut full = th.clone();
                full.extend(gamma.cloned().unwrap_or(b));
                apply_action(s, def, &full)?
            }
            None => s.clone(),
        };
        let j = *index.entry(next.clone()).or_insert_with(|| {
            result.states.push(next);
            result.prob.push(0.0);
            result.states.len() - 1
        });
        result.prob[j] += p;
        map.push(j);
    }
    Ok(Execution { result, map })
}

/// Concurrent execution of a set of ground actions in every world. In each world only the
/// actions whose precondition holds there take effect; with `require_mass`, worlds of zero
/// mass are left unchanged.
pub fn execute_set_mapped(
    k: &KripkeStructure,
    prog: &Program,
    actions: &BTreeSet<GroundAction>,
    require_mass: bool,
) -> Result<Execution> {
    let mut result = KripkeStructure::default();
    let mut index: BTreeMap<DetState, usize> = BTreeMap::new();
    let mut map = Vec::with_capacity(k.len());
    for (s, &p) in k.states.iter().zip(&k.prob) {
        let mut parts = Vec::new();
        if !require_mass || p > EPS {
            for a in actions {
                let def = prog.action(&a.name)?;
                if let Some(b) = world_witness(s, def, &a.args)? {
                    parts.push(instantiate_effects(def, &b)?);
                }
            }
        }
        let next = if parts.is_empty() { s.clone() } else { s.apply(&conc_effects(&parts)?) };
        let j = *index.entry(next.clone()).or_insert_with(|| {
            result.states.push(next);
            result.prob.push(0.0);
            result.states.len() - 1
        });
        result.prob[j] += p;
        map.push(j);
    }
    Ok(Execution { result, map })
}

pub fn execute_action_kripke(
    k: &KripkeStructure,
    def: &ActionDef,
    args: &[Object],
    gamma: Option<&Binding>,
) -> Result<KripkeStructure> {
    Ok(execute_mapped(k, def, args, gamma)?.result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_state;

    #[test]
    fn normalization() {
        let rv = RandomVariable::new(vec![(Object::str("a"), 0.4), (Object::str("b"), 0.0)]);
        let n = normalize_rv(&rv);
        assert_eq!(n.entries.len(), 2);
        assert!((n.mass(&None) - 0.6).abs() < 1e-12);
        let full = RandomVariable::new(vec![(Object::str("a"), 0.5), (Object::str("b"), 0.5)]);
        assert_eq!(normalize_rv(&full).entries.len(), 2);
    }

    #[test]
    fn single_rv_product() {
        let st = parse_state("d.f() = { rv{a: 0.4} }").unwrap();
        let k = product_kripke(&st, DEFAULT_PRODUCT_CAP).unwrap();
        assert_eq!(k.len(), 2);
        assert!((k.prob[0] - 0.6).abs() < 1e-12 && (k.prob[1] - 0.4).abs() < 1e-12);
        assert!(check_compatibility(&k, &st, 1e-9).compatible());
    }

    #[test]
    fn certain_and_empty_states_have_one_world() {
        let st = parse_state("d.f() = { rv{a: 1.0}, rv{b: 1.0} }").unwrap();
        assert_eq!(compatible_states(&st, DEFAULT_PRODUCT_CAP).unwrap().len(), 1);
        assert_eq!(compatible_states(&ProbState::new(), DEFAULT_PRODUCT_CAP).unwrap(), vec![DetState::new()]);
    }

    #[test]
    fn cap_is_enforced() {
        let st = parse_state("d.f() = { rv{a: 0.5}, rv{b: 0.5} }").unwrap();
        assert!(matches!(product_kripke(&st, 3), Err(Error::CapExceeded { size: 4, cap: 3 })));
    }

    #[test]
    fn unbalanced_mass_is_incompatible() {
        let st = parse_state("d.f() = { rv{a: 0.4} }").unwrap();
        let mut k = product_kripke(&st, DEFAULT_PRODUCT_CAP).unwrap();
        k.prob[1] += 0.05;
        let rep = check_compatibility(&k, &st, 1e-9);
        assert!(!rep.compatible());
        assert!(rep.residuals[0].to_string().starts_with("residual at a"));
    }

    #[test]
    fn noop_execution_keeps_structure() {
        let st = parse_state("d.f() = { rv{a: 0.4} }").unwrap();
        let k = product_kripke(&st, DEFAULT_PRODUCT_CAP).unwrap();
        let def = ActionDef::simple("noop", &[]);
        assert_eq!(execute_action_kripke(&k, &def, &[], None).unwrap(), k);
        assert_eq!(executability_probability(&k, &def, &[]).unwrap(), 0.4);
    }
}
