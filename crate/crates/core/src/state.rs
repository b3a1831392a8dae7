//! Probabilistic and deterministic agent states, coherence, and table-edit effects.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{fmt_real, validate_random_variable, GroundCall, Object, RandomVariable, EPS};

/// Checks that the random variables of one call result have pairwise disjoint object sets.
pub fn assert_coherent(call: &GroundCall, rvs: &[RandomVariable]) -> Result<()> {
    let mut seen: BTreeSet<&Object> = BTreeSet::new();
    for rv in rvs {
        let mut local = BTreeSet::new();
        for o in rv.objects() {
            if !local.insert(o) {
                continue;
            }
            if !seen.insert(o) {
                return Err(Error::Incoherent { call: call.to_string(), object: o.to_string() });
            }
        }
    }
    Ok(())
}

/// Ground code-call atoms removed and inserted by one or more actions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    pub del: BTreeSet<(GroundCall, Object)>,
    pub add: BTreeSet<(GroundCall, Object)>,
}

impl Effects {
    pub fn is_empty(&self) -> bool {
        self.del.is_empty() && self.add.is_empty()
    }
}

/// Weakly concurrent combination: all deletions, then all additions.
///
/// Fails when an atom added by one action is deleted by another.
pub fn conc_effects(parts: &[Effects]) -> Result<Effects> {
    for (i, a) in parts.iter().enumerate() {
        for (j, b) in parts.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some((call, o)) = a.add.intersection(&b.del).next() {
                return Err(Error::ConcConflict { atom: format!("in({o}, {call})") });
            }
        }
    }
    let mut out = Effects::default();
    for p in parts {
        out.del.extend(p.del.iter().cloned());
        out.add.extend(p.add.iter().cloned());
    }
    Ok(out)
}

/// The probabilistic agent state: ground calls mapped to coherent sets of random variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbState {
    pub entries: BTreeMap<GroundCall, Vec<RandomVariable>>,
}

impl ProbState {
    pub fn new() -> Self {
        ProbState::default()
    }

    /// Replaces the result of `call`, validating every random variable and coherence.
    pub fn set(&mut self, call: GroundCall, rvs: Vec<RandomVariable>) -> Result<()> {
        for rv in &rvs {
            let report = validate_random_variable(rv);
            if !report.ok() {
                return Err(Error::InvalidRv(report.violations.join("; ")));
            }
        }
        assert_coherent(&call, &rvs)?;
        self.entries.insert(call, rvs);
        Ok(())
    }

    /// Adds one random variable to the result of `call`.
    pub fn push(&mut self, call: GroundCall, rv: RandomVariable) -> Result<()> {
        let mut rvs = self.entries.get(&call).cloned().unwrap_or_default();
        rvs.push(rv);
        self.set(call, rvs)
    }

    pub fn eval(&self, call: &GroundCall) -> &[RandomVariable] {
        self.entries.get(call).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `℘(o)` for the random variable of `call` that contains `o`.
    pub fn prob_of(&self, call: &GroundCall, o: &Object) -> Option<f64> {
        self.eval(call).iter().find_map(|rv| rv.prob(o))
    }

    pub fn rv_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Every random variable is `⟨{o}, 1⟩`.
    pub fn is_degenerate(&self) -> bool {
        self.entries.values().flatten().all(RandomVariable::is_degenerate)
    }

    /// Lifts a deterministic state: each object becomes a certain singleton.
    pub fn from_det(det: &DetState) -> ProbState {
        let entries = det
            .entries
            .iter()
            .map(|(c, objs)| (c.clone(), objs.iter().cloned().map(RandomVariable::certain).collect()))
            .collect();
        ProbState { entries }
    }

    /// Applies deletions then additions; the receiver is left untouched.
    pub fn apply(&self, eff: &Effects) -> Result<ProbState> {
        let mut out = self.clone();
        for (call, o) in &eff.del {
            if let Some(rvs) = out.entries.get_mut(call) {
                for rv in rvs.iter_mut() {
                    rv.entries.retain(|(x, _)| x != o);
                }
                rvs.retain(|rv| !rv.entries.is_empty());
            }
        }
        for (call, o) in &eff.add {
            let rvs = out.entries.entry(call.clone()).or_default();
            match rvs.iter().find(|rv| rv.contains(o)) {
                Some(rv) if rv.is_degenerate() => {}
                Some(_) => return Err(Error::Incoherent { call: call.to_string(), object: o.to_string() }),
                None => rvs.push(RandomVariable::certain(o.clone())),
            }
        }
        debug_assert!(out.entries.iter().all(|(c, rvs)| assert_coherent(c, rvs).is_ok()));
        Ok(out)
    }

    /// Object-level differences from `self` to `other`.
    pub fn diff(&self, other: &ProbState) -> StateDiff {
        let mut lines = Vec::new();
        let calls: BTreeSet<&GroundCall> = self.entries.keys().chain(other.entries.keys()).collect();
        for call in calls {
            let before = prob_map(self.eval(call));
            let after = prob_map(other.eval(call));
            for (o, p) in &before {
                match after.get(o) {
                    None => lines.push(DiffLine::Removed(call.clone(), (*o).clone(), *p)),
                    Some(q) if (p - q).abs() > EPS => lines.push(DiffLine::Changed(call.clone(), (*o).clone(), *p, *q)),
                    Some(_) => {}
                }
            }
            for (o, q) in &after {
                if !before.contains_key(o) {
                    lines.push(DiffLine::Added(call.clone(), (*o).clone(), *q));
                }
            }
        }
        StateDiff { lines }
    }
}

fn prob_map(rvs: &[RandomVariable]) -> BTreeMap<&Object, f64> {
    rvs.iter().flat_map(|rv| rv.entries.iter().map(|(o, p)| (o, *p))).collect()
}

impl fmt::Display for ProbState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (call, rvs) in &self.entries {
            write!(f, "{call} = {{")?;
            for (i, rv) in rvs.iter().enumerate() {
                f.write_str(if i == 0 { " " } else { ", " })?;
                write!(f, "{rv}")?;
            }
            writeln!(f, "{}}}", if rvs.is_empty() { "" } else { " " })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiffLine {
    Removed(GroundCall, Object, f64),
    Added(GroundCall, Object, f64),
    Changed(GroundCall, Object, f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateDiff {
    pub lines: Vec<DiffLine>,
}

impl StateDiff {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

impl fmt::Display for StateDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            match l {
                DiffLine::Removed(c, o, p) => writeln!(f, "- {c}: {o} ({})", fmt_real(*p))?,
                DiffLine::Added(c, o, p) => writeln!(f, "+ {c}: {o} ({})", fmt_real(*p))?,
                DiffLine::Changed(c, o, p, q) => writeln!(f, "~ {c}: {o} ({} -> {})", fmt_real(*p), fmt_real(*q))?,
            }
        }
        Ok(())
    }
}

/// An ordinary agent state: ground calls mapped to sets of objects. Empty results are not stored,
/// so structural equality is state equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct DetState {
    pub entries: BTreeMap<GroundCall, BTreeSet<Object>>,
}

impl DetState {
    pub fn new() -> Self {
        DetState::default()
    }

    pub fn insert(&mut self, call: GroundCall, o: Object) {
        self.entries.entry(call).or_default().insert(o);
    }

    pub fn remove(&mut self, call: &GroundCall, o: &Object) {
        if let Some(set) = self.entries.get_mut(call) {
            set.remove(o);
            if set.is_empty() {
                self.entries.remove(call);
            }
        }
    }

    pub fn contains(&self, call: &GroundCall, o: &Object) -> bool {
        self.entries.get(call).is_some_and(|s| s.contains(o))
    }

    pub fn objects(&self, call: &GroundCall) -> impl Iterator<Item = &Object> {
        self.entries.get(call).into_iter().flatten()
    }

    pub fn fact_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn apply(&self, eff: &Effects) -> DetState {
        let mut out = self.clone();
        for (call, o) in &eff.del {
            out.remove(call, o);
        }
        for (call, o) in &eff.add {
            out.insert(call.clone(), o.clone());
        }
        out
    }
}

impl fmt::Display for DetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for (call, objs) in &self.entries {
            for o in objs {
                if !first {
                    f.write_str(", ")?;
                }
                first = false;
                write!(f, "{call}={o}")?;
            }
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(f: &str, args: &[&str]) -> GroundCall {
        GroundCall::new("surv", f, args.iter().map(|a| Object::str(a)).collect())
    }

    fn rv(entries: &[(&str, f64)]) -> RandomVariable {
        RandomVariable::new(entries.iter().map(|(o, p)| (Object::str(o), *p)).collect())
    }

    fn c9_ex2() -> ProbState {
        let mut st = ProbState::new();
        st.set(
            call("identify", &["image1"]),
            vec![rv(&[("t72", 0.5), ("t80", 0.4)]), rv(&[("t60", 0.3), ("t84", 0.7)])],
        )
        .unwrap();
        st
    }

    #[test]
    fn eval_returns_stored_entry_or_nothing() {
        let st = c9_ex2();
        let r = st.eval(&call("identify", &["image1"]));
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].prob(&Object::str("t80")), Some(0.4));
        assert!(st.eval(&call("identify", &["image2"])).is_empty());
    }

    #[test]
    fn push_makes_new_rv_visible() {
        let mut st = c9_ex2();
        st.push(call("identify", &["image1"]), rv(&[("x", 1.0)])).unwrap();
        assert!(st.eval(&call("identify", &["image1"])).iter().any(|r| r.contains(&Object::str("x"))));
    }

    #[test]
    fn coherence() {
        let c = call("f", &[]);
        let e = assert_coherent(&c, &[rv(&[("a", 0.9), ("b", 0.1)]), rv(&[("b", 0.8), ("c", 0.1)])]).unwrap_err();
        assert!(matches!(e, Error::Incoherent { ref object, .. } if object == "b"));
        assert!(assert_coherent(&c, &[rv(&[("a", 0.5)]), rv(&[("b", 0.5)])]).is_ok());
        assert!(assert_coherent(&c, &[rv(&[("a", 0.5)])]).is_ok());
    }

    #[test]
    fn apply_deletes_then_adds() {
        let st = c9_ex2();
        let c = call("identify", &["image1"]);
        let eff = Effects { del: [(c.clone(), Object::str("t80"))].into(), add: BTreeSet::new() };
        let out = st.apply(&eff).unwrap();
        assert_eq!(out.prob_of(&c, &Object::str("t80")), None);
        assert_eq!(out.prob_of(&c, &Object::str("t72")), Some(0.5));
        assert_eq!(st.prob_of(&c, &Object::str("t80")), Some(0.4));
        assert_eq!(st.apply(&Effects::default()).unwrap(), st);
    }

    #[test]
    fn add_into_foreign_rv_is_incoherent() {
        let st = c9_ex2();
        let c = call("identify", &["image1"]);
        let eff = Effects { del: BTreeSet::new(), add: [(c, Object::str("t80"))].into() };
        assert!(matches!(st.apply(&eff), Err(Error::Incoherent { .. })));
    }

    #[test]
    fn conc_conflict_and_union() {
        let c = call("f", &[]);
        let a = Effects { del: BTreeSet::new(), add: [(c.clone(), Object::Int(1))].into() };
        let b = Effects { del: [(c.clone(), Object::Int(1))].into(), add: BTreeSet::new() };
        assert!(matches!(conc_effects(&[a.clone(), b]), Err(Error::ConcConflict { .. })));
        let d = Effects { del: [(c.clone(), Object::Int(2))].into(), add: BTreeSet::new() };
        let u = conc_effects(&[a.clone(), d.clone()]).unwrap();
        assert_eq!(u, conc_effects(&[d, a]).unwrap());
        assert_eq!(u.add.len() + u.del.len(), 2);
    }

    #[test]
    fn det_state_equality_ignores_emptied_calls() {
        let c = call("f", &[]);
        let mut a = DetState::new();
        a.insert(c.clone(), Object::str("x"));
        a.remove(&c, &Object::str("x"));
        assert_eq!(a, DetState::new());
    }

    #[test]
    fn diff_reports_removed_objects() {
        let st = c9_ex2();
        let c = call("identify", &["image1"]);
        let out = st.apply(&Effects { del: [(c, Object::str("t80"))].into(), add: BTreeSet::new() }).unwrap();
        let d = st.diff(&out);
        assert_eq!(d.lines.len(), 1);
        assert_eq!(d.to_string(), "- surv.identify(image1): t80 (0.4)\n");
        assert!(st.diff(&st).is_empty());
    }
}
