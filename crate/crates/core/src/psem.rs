//! Threshold semantics: operators with preconditions checked at `[p, 1]`, and integrity-constraint
//! p-consistency after an action via a linear program over compatible worlds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::kripke::{compatible_states, execute_set_mapped, KripkeStructure};
use crate::lp::{solve_lp, LpProblem, LpStatus, Relation, LP_TOL};
use crate::model::{fmt_real, GroundAction, GroundCall, IntegrityConstraint, Modality, Object, StatusSet, EPS};
use crate::program::Program;
use crate::semantics::{app, check_feasible, compute_lfp, ic_holds_in, EvalConfig, FeasibilityReport, ProbModel};
use crate::state::{DetState, ProbState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PMode {
    Weak,
    Strong,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!("level {} is outside [0, 1]", fmt_real(p))));
    }
    Ok(())
}

pub fn p_model(prog: &Program, state: &ProbState, p: f64) -> Result<ProbModel> {
    check_p(p)?;
    ProbModel::new(prog, state, EvalConfig::with_p(p))
}

pub fn p_app_operator(prog: &Program, state: &ProbState, ps: &StatusSet, p: f64) -> Result<StatusSet> {
    app(&p_model(prog, state, p)?, ps)
}

/// Conditions p-PS1 to p-PS4.
pub fn check_p_feasible(
    prog: &Program,
    state: &ProbState,
    ps: &StatusSet,
    p: f64,
    mode: PMode,
    cap: u128,
) -> Result<FeasibilityReport> {
    let mut rep = check_feasible(&p_model(prog, state, p)?, ps)?;
    if mode == PMode::Strong {
        apply_strong_ps4(&mut rep, prog, state, ps, cap)?;
    }
    Ok(rep)
}

/// Replaces the PS4 verdict by the strong one: no integrity constraint's guaranteed level
/// may drop when `Do(ps)` is executed.
pub fn apply_strong_ps4(
    rep: &mut FeasibilityReport,
    prog: &Program,
    state: &ProbState,
    ps: &StatusSet,
    cap: u128,
) -> Result<()> {
    rep.witnesses.retain(|w| !w.starts_with("PS4"));
    let actions = crate::model::op_projection(ps, Modality::Do);
    let mut ok = true;
    for (i, ic) in prog.integrity_constraints.iter().enumerate() {
        let q = old_level(state, ic, cap)?;
        let lp = generate_ic_lp(state, prog, &actions, ic, std::slice::from_ref(ic), q, cap)?;
        let sol = solve_lp(&lp.lp)?;
        if sol.status == LpStatus::Optimal && sol.objective < q - LP_TOL {
            ok = false;
            rep.witnesses.push(format!(
                "PS4: integrity constraint {} drops from {} to {}",
                i + 1,
                fmt_real(round(q)),
                fmt_real(round(sol.objective))
            ));
        }
    }
    rep.ps4_ok = ok;
    Ok(())
}

fn round(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// The least fixpoint with preconditions, guards and integrity constraints checked at `[p, 1]`.
pub fn compute_p_lfp(prog: &Program, state: &ProbState, p: f64) -> Result<StatusSet> {
    compute_lfp(&p_model(prog, state, p)?)
}

/// Row counts of a generated system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BlockCounts {
    pub k: usize,
    pub ck: usize,
    pub ic: usize,
    pub kk: usize,
    pub ig: usize,
}

#[derive(Clone, Debug)]
pub struct IcLp {
    pub lp: LpProblem,
    pub old_states: Vec<DetState>,
    pub new_states: Vec<DetState>,
    pub blocks: BlockCounts,
}

fn unit(n: usize, idx: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for i in idx {
        v[i] = 1.0;
    }
    v
}

fn facts(s: &DetState) -> Vec<(GroundCall, Object)> {
    s.entries.iter().flat_map(|(c, os)| os.iter().map(move |o| (c.clone(), o.clone()))).collect()
}

/// The minimization system for `ic` after concurrently executing `actions` on `old`.
/// Variables `p_i` weight the old compatible worlds and `pp_i` the worlds they map to.
pub fn generate_ic_lp(
    old: &ProbState,
    prog: &Program,
    actions: &BTreeSet<GroundAction>,
    ic: &IntegrityConstraint,
    ics_all: &[IntegrityConstraint],
    p: f64,
    cap: u128,
) -> Result<IcLp> {
    check_p(p)?;
    let old_states = compatible_states(old, cap)?;
    let n_old = old_states.len();
    let k = KripkeStructure { states: old_states.clone(), prob: vec![0.0; n_old] };
    let exec = execute_set_mapped(&k, prog, actions, false)?;
    let new_states = exec.result.states;
    let n_new = new_states.len();
    let n = n_old + n_new;
    let vars = (1..=n_old).map(|i| format!("p_{i}")).chain((1..=n_new).map(|i| format!("pp_{i}"))).collect();
    let mut lp = LpProblem::new(vars);
    lp.bounds = vec![(0.0, 1.0); n];
    let mut blocks = BlockCounts::default();

    let mut holds = Vec::with_capacity(n_new);
    for s in &new_states {
        holds.push(ic_holds_in(s, ic)?);
    }
    lp.objective = unit(n, (0..n_new).filter(|&i| holds[i]).map(|i| n_old + i));

    lp.add("K", unit(n, 0..n_old), Relation::Eq, 1.0);
    blocks.k = 1;

    for (call, rvs) in &old.entries {
        for rv in rvs {
            for (o, prob) in &rv.entries {
                if *prob <= EPS {
                    continue;
                }
                blocks.ck += 1;
                let idx = (0..n_old).filter(|&j| old_states[j].contains(call, o));
                lp.add(format!("CK_{}", blocks.ck), unit(n, idx), Relation::Eq, *prob);
            }
        }
    }

    for (i, other) in ics_all.iter().enumerate() {
        let mut idx = Vec::new();
        for (j, s) in old_states.iter().enumerate() {
            if ic_holds_in(s, other)? {
                idx.push(j);
            }
        }
        lp.add(format!("IC_{}_lo", i + 1), unit(n, idx.iter().copied()), Relation::Ge, p);
        lp.add(format!("IC_{}_hi", i + 1), unit(n, idx), Relation::Le, 1.0);
        blocks.ic += 2;
    }

    for i in 0..n_new {
        let mut row = unit(n, [n_old + i]);
        for (j, &t) in exec.map.iter().enumerate() {
            if t == i {
                row[j] -= 1.0;
            }
        }
        lp.add(format!("KK_{}", i + 1), row, Relation::Eq, 0.0);
        blocks.kk += 1;
    }

    let mut seen = BTreeSet::new();
    for s in &old_states {
        let fs = facts(s);
        if fs.len() < 2 || !seen.insert(fs.clone()) {
            continue;
        }
        let probs: Vec<f64> = fs.iter().map(|(c, o)| old.prob_of(c, o).unwrap_or(0.0)).collect();
        let lo = (probs.iter().sum::<f64>() + 1.0 - fs.len() as f64).max(0.0);
        let hi = probs.iter().cloned().fold(1.0, f64::min);
        let idx: Vec<usize> = (0..n_old).filter(|&j| fs.iter().all(|(c, o)| old_states[j].contains(c, o))).collect();
        blocks.ig += 1;
        lp.add(format!("IG_{}_lo", blocks.ig), unit(n, idx.iter().copied()), Relation::Ge, lo);
        lp.add(format!("IG_{}_hi", blocks.ig), unit(n, idx), Relation::Le, hi);
    }
    Ok(IcLp { lp, old_states, new_states, blocks })
}

/// Guaranteed probability of `ic` over the compatible structures of `state` (rows K and CK).
pub fn old_level(state: &ProbState, ic: &IntegrityConstraint, cap: u128) -> Result<f64> {
    let full = generate_ic_lp(state, &Program::default(), &BTreeSet::new(), ic, &[], 0.0, cap)?;
    let n_old = full.old_states.len();
    let mut lp = LpProblem::new(full.lp.vars[..n_old].to_vec());
    lp.bounds = vec![(0.0, 1.0); n_old];
    for (j, s) in full.old_states.iter().enumerate() {
        lp.objective[j] = if ic_holds_in(s, ic)? { 1.0 } else { 0.0 };
    }
    for c in full.lp.constraints.iter().filter(|c| c.label == "K" || c.label.starts_with("CK_")) {
        lp.add(c.label.clone(), c.coeffs[..n_old].to_vec(), c.rel, c.rhs);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective.clamp(0.0, 1.0)),
        _ => Err(Error::Lp("the state admits no compatible structure".into())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IcVerdict {
    Guaranteed {
        min: f64,
    },
    /// The minimizing distribution over the new worlds.
    NotGuaranteed {
        min: f64,
        distribution: Vec<(DetState, f64)>,
    },
    /// No compatible structure of the old state satisfies the integrity constraints at `p`.
    PremiseInfeasible,
}

impl fmt::Display for IcVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IcVerdict::Guaranteed { min } => write!(f, "guaranteed (min {:.3})", min),
            IcVerdict::NotGuaranteed { min, .. } => write!(f, "not guaranteed (min {:.3})", min),
            IcVerdict::PremiseInfeasible => f.write_str("premise infeasible"),
        }
    }
}

/// One verdict per integrity constraint of `prog`, after concurrently executing `actions`.
pub fn check_ic_p_consistency(
    old: &ProbState,
    prog: &Program,
    actions: &BTreeSet<GroundAction>,
    p: f64,
    cap: u128,
) -> Result<Vec<(IcLp, IcVerdict)>> {
    let mut out = Vec::new();
    for ic in &prog.integrity_constraints {
        let sys = generate_ic_lp(old, prog, actions, ic, &prog.integrity_constraints, p, cap)?;
        let sol = solve_lp(&sys.lp)?;
        let verdict = match sol.status {
            LpStatus::Infeasible => IcVerdict::PremiseInfeasible,
            LpStatus::Unbounded => return Err(Error::Lp("unbounded system".into())),
            LpStatus::Optimal => {
                let min = sol.objective.clamp(0.0, 1.0);
                if min >= p - LP_TOL {
                    IcVerdict::Guaranteed { min }
                } else {
                    let n_old = sys.old_states.len();
                    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
                    for (i, v) in sol.x[n_old..].iter().enumerate() {
                        merged.insert(i, v.max(0.0));
                    }
                    let distribution = merged.into_iter().map(|(i, v)| (sys.new_states[i].clone(), v)).collect();
                    IcVerdict::NotGuaranteed { min, distribution }
                }
            }
        };
        out.push((sys, verdict));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::DEFAULT_PRODUCT_CAP;
    use crate::parser::{parse_program, parse_state};

    #[test]
    fn tautology_and_contradiction() {
        let st = parse_state("d.f() = { rv{a: 0.4, b: 0.6} }").unwrap();
        let prog = parse_program("ic true => 1 = 1.").unwrap();
        let v = check_ic_p_consistency(&st, &prog, &BTreeSet::new(), 0.9, DEFAULT_PRODUCT_CAP).unwrap();
        assert!(matches!(v[0].1, IcVerdict::Guaranteed { min } if (min - 1.0).abs() < 1e-9));

        let prog = parse_program("ic in(X, d.f()) => X = c.").unwrap();
        let v = check_ic_p_consistency(&st, &prog, &BTreeSet::new(), 0.5, DEFAULT_PRODUCT_CAP).unwrap();
        assert!(matches!(v[0].1, IcVerdict::PremiseInfeasible));
    }

    #[test]
    fn action_breaking_the_constraint_everywhere() {
        let st = parse_state("d.f() = { rv{a: 0.4}, rv{c: 0.5} }").unwrap();
        let prog = parse_program("action put() { add: in(b, d.f()) }\nic in(b, d.f()) => 1 = 2.").unwrap();
        let acts: BTreeSet<_> = [GroundAction::new("put", vec![])].into();
        let v = check_ic_p_consistency(&st, &prog, &acts, 0.3, DEFAULT_PRODUCT_CAP).unwrap();
        match &v[0].1 {
            IcVerdict::NotGuaranteed { min, distribution } => {
                assert!(min.abs() < 1e-9);
                assert!((distribution.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-7);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(v[0].1.to_string(), "not guaranteed (min 0.000)");
    }

    #[test]
    fn identity_action_links_worlds_one_to_one() {
        let st = parse_state("d.f() = { rv{a: 0.4} }").unwrap();
        let prog = parse_program("ic true => 1 = 1.").unwrap();
        let sys = generate_ic_lp(&st, &prog, &BTreeSet::new(), &prog.integrity_constraints[0], &[], 0.5, 100).unwrap();
        assert_eq!(sys.old_states, sys.new_states);
        assert_eq!(sys.blocks, BlockCounts { k: 1, ck: 1, ic: 0, kk: 2, ig: 0 });
        let kk = &sys.lp.constraints.iter().find(|c| c.label == "KK_1").unwrap().coeffs;
        assert_eq!(kk, &vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn threshold_example() {
        let prog = parse_program("action alpha() { pre: in(a, d.f()) }\nDo alpha() <- .").unwrap();
        let st = parse_state("d.f() = { rv{a: 0.7} }").unwrap();
        let empty = StatusSet::new();
        assert!(p_app_operator(&prog, &st, &empty, 0.8).unwrap().is_empty());
        assert_eq!(p_app_operator(&prog, &st, &empty, 0.6).unwrap().len(), 1);
        assert!(check_p_feasible(&prog, &st, &empty, 0.8, PMode::Weak, 100).unwrap().feasible());
        assert!(!check_p_feasible(&prog, &st, &empty, 0.6, PMode::Weak, 100).unwrap().feasible());
        assert!(compute_p_lfp(&prog, &st, 0.8).unwrap().is_empty());
        assert!(p_model(&prog, &st, 1.5).is_err());
    }
}
