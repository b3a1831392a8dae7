//! Probabilistic conjunction strategies and an exhaustive axiom checker.

use std::fmt;

use crate::model::{ProbInterval, StrategyId, EPS};

pub fn combine(strategy: StrategyId, a: ProbInterval, b: ProbInterval) -> ProbInterval {
    let (l1, u1, l2, u2) = (a.lo, a.hi, b.lo, b.hi);
    let (lo, hi) = match strategy {
        StrategyId::Ig => ((l1 + l2 - 1.0).max(0.0), u1.min(u2)),
        StrategyId::Pc => (l1.min(l2), u1.min(u2)),
        StrategyId::Nc => ((l1 + l2 - 1.0).max(0.0), (u1 + u2 - 1.0).max(0.0)),
        StrategyId::In => (l1 * l2, u1 * u2),
    };
    ProbInterval { lo: lo.clamp(0.0, 1.0), hi: hi.clamp(0.0, 1.0) }
}

/// Left fold of `combine`; the empty conjunction is certain.
pub fn combine_all(strategy: StrategyId, xs: impl IntoIterator<Item = ProbInterval>) -> ProbInterval {
    let mut it = xs.into_iter();
    match it.next() {
        None => ProbInterval::ONE,
        Some(first) => it.fold(first, |acc, x| combine(strategy, acc, x)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Axiom {
    Bottomline,
    Ignorance,
    Identity,
    Annihilator,
    Commutativity,
    Associativity,
    Monotonicity,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::Bottomline,
        Axiom::Ignorance,
        Axiom::Identity,
        Axiom::Annihilator,
        Axiom::Commutativity,
        Axiom::Associativity,
        Axiom::Monotonicity,
    ];
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, Default)]
pub struct AxiomReport {
    /// Number of instances checked per axiom, in `Axiom::ALL` order.
    pub checked: [u64; 7],
    /// First counterexample found per violated axiom.
    pub violations: Vec<(Axiom, String)>,
}

impl AxiomReport {
    pub fn holds(&self, ax: Axiom) -> bool {
        self.violations.iter().all(|(a, _)| *a != ax)
    }

    pub fn all_hold(&self) -> bool {
        self.violations.is_empty()
    }
}

/// All intervals `[i·step, j·step]` with `i ≤ j` inside the unit interval.
pub fn interval_lattice(step: f64) -> Vec<ProbInterval> {
    let n = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in i..=n {
            out.push(ProbInterval { lo: i as f64 / n as f64, hi: j as f64 / n as f64 });
        }
    }
    out
}

fn le(a: ProbInterval, b: ProbInterval) -> bool {
    a.lo <= b.lo + EPS && a.hi <= b.hi + EPS
}

fn eq(a: ProbInterval, b: ProbInterval) -> bool {
    a.approx_eq(&b, EPS)
}

pub fn check_strategy_axioms(strategy: StrategyId, samples: &[ProbInterval]) -> AxiomReport {
    check_axioms_with(|a, b| combine(strategy, a, b), samples)
}

/// Checks the seven axioms on every pair (and triple, for associativity and monotonicity)
/// drawn from `samples`. The Identity axiom presumes the two events are jointly consistent,
/// which holds for every sample paired with `[1,1]`.
pub fn check_axioms_with(
    f: impl Fn(ProbInterval, ProbInterval) -> ProbInterval,
    samples: &[ProbInterval],
) -> AxiomReport {
    let mut rep = AxiomReport::default();
    let fail = |rep: &mut AxiomReport, ax: Axiom, msg: String| {
        if rep.holds(ax) {
            rep.violations.push((ax, msg));
        }
    };
    let zero = ProbInterval::ZERO;
    let one = ProbInterval::ONE;
    for &a in samples {
        rep.checked[2] += 1;
        let r = f(a, one);
        if !eq(r, a) {
            fail(&mut rep, Axiom::Identity, format!("{a} (x) [1, 1] = {r}"));
        }
        rep.checked[3] += 1;
        let r = f(a, zero);
        if !eq(r, zero) {
            fail(&mut rep, Axiom::Annihilator, format!("{a} (x) [0, 0] = {r}"));
        }
        for &b in samples {
            let ab = f(a, b);
            rep.checked[0] += 1;
            let bottom = ProbInterval { lo: a.lo.min(b.lo), hi: a.hi.min(b.hi) };
            if !le(ab, bottom) {
                fail(&mut rep, Axiom::Bottomline, format!("{a} (x) {b} = {ab}"));
            }
            rep.checked[1] += 1;
            let ig = ProbInterval { lo: (a.lo + b.lo - 1.0).max(0.0), hi: a.hi.min(b.hi) };
            if !ig.contains(&ab) {
                fail(&mut rep, Axiom::Ignorance, format!("{a} (x) {b} = {ab} not within {ig}"));
            }
            rep.checked[4] += 1;
            let ba = f(b, a);
            if !eq(ab, ba) {
                fail(&mut rep, Axiom::Commutativity, format!("{a} (x) {b} = {ab} but reversed {ba}"));
            }
            for &c in samples {
                rep.checked[5] += 1;
                let l = f(ab, c);
                let r = f(a, f(b, c));
                if !eq(l, r) {
                    fail(&mut rep, Axiom::Associativity, format!("({a} (x) {b}) (x) {c} = {l} vs {r}"));
                }
                if le(b, c) {
                    rep.checked[6] += 1;
                    let ac = f(a, c);
                    if !le(ab, ac) {
                        fail(&mut rep, Axiom::Monotonicity, format!("{a} (x) {b} = {ab} exceeds {a} (x) {c} = {ac}"));
                    }
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> ProbInterval {
        ProbInterval::new(lo, hi).unwrap()
    }

    #[test]
    fn formulas() {
        let r = combine(StrategyId::In, iv(0.4, 0.4), iv(0.3, 0.3));
        assert!(r.approx_eq(&iv(0.12, 0.12), 1e-12));
        let r = combine(StrategyId::Ig, iv(0.5, 0.6), iv(0.7, 0.8));
        assert!(r.approx_eq(&iv(0.2, 0.6), 1e-12));
        let r = combine(StrategyId::Pc, iv(0.5, 0.6), iv(0.7, 0.8));
        assert!(r.approx_eq(&iv(0.5, 0.6), 1e-12));
        let r = combine(StrategyId::Nc, iv(0.5, 0.6), iv(0.7, 0.8));
        assert!(r.approx_eq(&iv(0.2, 0.4), 1e-12));
        for s in StrategyId::ALL {
            assert_eq!(combine(s, iv(0.3, 0.9), ProbInterval::ZERO), ProbInterval::ZERO);
        }
    }

    #[test]
    fn identity_for_ig_pc_in() {
        for s in [StrategyId::Ig, StrategyId::Pc, StrategyId::In] {
            assert!(combine(s, iv(0.3, 0.7), ProbInterval::ONE).approx_eq(&iv(0.3, 0.7), 1e-12));
        }
    }

    #[test]
    fn coarse_lattice_has_no_violations() {
        let lattice = interval_lattice(0.25);
        for s in StrategyId::ALL {
            let rep = check_strategy_axioms(s, &lattice);
            assert!(rep.all_hold(), "{s}: {:?}", rep.violations);
        }
    }

    #[test]
    fn checker_catches_a_broken_strategy() {
        let lattice = interval_lattice(0.25);
        let rep = check_axioms_with(|a, b| ProbInterval { lo: a.lo, hi: a.hi.max(b.hi) }, &lattice);
        assert!(!rep.holds(Axiom::Commutativity));
        assert!(!rep.holds(Axiom::Bottomline));
    }

    #[test]
    fn empty_fold_is_certain() {
        assert_eq!(combine_all(StrategyId::Ig, []), ProbInterval::ONE);
    }
}
