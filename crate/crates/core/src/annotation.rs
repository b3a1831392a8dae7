//! Term and annotation evaluation, grounding of code-call conditions, and the
//! satisfaction relation over probabilistic and deterministic states.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    AnnFn, AnnotatedCondition, Annotation, AnnotationItem, ArithOp, CmpOp, CodeCall, CodeCallAtom, CodeCallCondition,
    Conjunct, GroundCall, Object, Polarity, ProbInterval, StrategyId, Term, EPS,
};
use crate::state::{DetState, ProbState};
use crate::strategy::combine_all;

/// A ground substitution. Annotation variables read the numeric value of the object bound to them.
pub type Binding = BTreeMap<String, Object>;

/// Read access to a state for grounding and atom satisfaction.
pub trait World {
    /// Objects returned by `call`, in enumeration order.
    fn objects(&self, call: &GroundCall) -> Vec<&Object>;
    /// Tightest interval of `in(o, call)`, if `o` is returned at all.
    fn in_interval(&self, call: &GroundCall, o: &Object) -> Option<ProbInterval>;
    /// Whether `notin(o, call)` holds at annotation `ann`.
    fn notin_holds(&self, call: &GroundCall, o: &Object, ann: ProbInterval) -> bool;
}

impl World for ProbState {
    fn objects(&self, call: &GroundCall) -> Vec<&Object> {
        self.eval(call).iter().flat_map(|rv| rv.objects()).collect()
    }

    fn in_interval(&self, call: &GroundCall, o: &Object) -> Option<ProbInterval> {
        self.prob_of(call, o).map(ProbInterval::point)
    }

    fn notin_holds(&self, call: &GroundCall, o: &Object, ann: ProbInterval) -> bool {
        match self.prob_of(call, o) {
            None => true,
            Some(p) => !ann.contains(&ProbInterval::point(p)),
        }
    }
}

impl World for DetState {
    fn objects(&self, call: &GroundCall) -> Vec<&Object> {
        DetState::objects(self, call).collect()
    }

    fn in_interval(&self, call: &GroundCall, o: &Object) -> Option<ProbInterval> {
        self.contains(call, o).then_some(ProbInterval::ONE)
    }

    fn notin_holds(&self, call: &GroundCall, o: &Object, _ann: ProbInterval) -> bool {
        !self.contains(call, o)
    }
}

fn arith(op: ArithOp, a: &Object, b: &Object) -> Result<Object> {
    if let (Object::Int(x), Object::Int(y)) = (a, b) {
        let r = match op {
            ArithOp::Add => x.checked_add(*y),
            ArithOp::Sub => x.checked_sub(*y),
            ArithOp::Mul => x.checked_mul(*y),
            ArithOp::Div if *y == 0 => return Err(Error::Eval("division by zero".into())),
            ArithOp::Div if x % y == 0 => Some(x / y),
            ArithOp::Div => None,
        };
        if let Some(r) = r {
            return Ok(Object::Int(r));
        }
    }
    let (x, y) = match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::Eval(format!("arithmetic on non-numbers {a} {} {b}", op.symbol()))),
    };
    let r = match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div if y == 0.0 => return Err(Error::Eval("division by zero".into())),
        ArithOp::Div => x / y,
    };
    Ok(Object::Real(r))
}

pub fn eval_term(t: &Term, b: &Binding) -> Result<Object> {
    match t {
        Term::Var(v) => b.get(v).cloned().ok_or_else(|| Error::Unbound(v.clone())),
        Term::Obj(o) => Ok(o.clone()),
        Term::Field(inner, f) => match eval_term(inner, b)? {
            Object::Record(fields) => {
                fields.get(f).cloned().ok_or_else(|| Error::Eval(format!("record has no field {f}")))
            }
            other => Err(Error::Eval(format!("field access .{f} on non-record {other}"))),
        },
        Term::Arith(op, l, r) => arith(*op, &eval_term(l, b)?, &eval_term(r, b)?),
    }
}

pub fn ground_call(call: &CodeCall, b: &Binding) -> Result<GroundCall> {
    let args = call.args.iter().map(|t| eval_term(t, b)).collect::<Result<Vec<_>>>()?;
    Ok(GroundCall { domain: call.domain.clone(), function: call.function.clone(), args })
}

pub fn cmp_holds(op: CmpOp, l: &Object, r: &Object) -> Result<bool> {
    if let (Some(x), Some(y)) = (l.as_f64(), r.as_f64()) {
        let eq = (x - y).abs() <= EPS;
        return Ok(match op {
            CmpOp::Eq => eq,
            CmpOp::Neq => !eq,
            CmpOp::Lt => x < y && !eq,
            CmpOp::Gt => x > y && !eq,
            CmpOp::Le => x < y || eq,
            CmpOp::Ge => x > y || eq,
        });
    }
    match (op, l, r) {
        (CmpOp::Eq, _, _) => Ok(l == r),
        (CmpOp::Neq, _, _) => Ok(l != r),
        (_, Object::Str(x), Object::Str(y)) => Ok(match op {
            CmpOp::Lt => x < y,
            CmpOp::Gt => x > y,
            CmpOp::Le => x <= y,
            _ => x >= y,
        }),
        _ => Err(Error::Eval(format!("cannot order {l} and {r}"))),
    }
}

pub fn eval_annotation_item(item: &AnnotationItem, b: &Binding) -> Result<f64> {
    match item {
        AnnotationItem::Const(c) => Ok(*c),
        AnnotationItem::Var(v) => {
            let o = b.get(v).ok_or_else(|| Error::Unbound(v.clone()))?;
            o.as_f64().ok_or_else(|| Error::Eval(format!("annotation variable {v} bound to non-number {o}")))
        }
        AnnotationItem::Apply(f, args) => {
            let xs = args.iter().map(|a| eval_annotation_item(a, b)).collect::<Result<Vec<_>>>()?;
            let (x, y) = match xs.as_slice() {
                [x, y] => (*x, *y),
                _ => return Err(Error::Eval(format!("{} expects 2 arguments", f.name()))),
            };
            match f {
                AnnFn::Add => Ok(x + y),
                AnnFn::Sub => Ok(x - y),
                AnnFn::Mul => Ok(x * y),
                AnnFn::Div if y == 0.0 => Err(Error::Eval("division by zero in annotation".into())),
                AnnFn::Div => Ok(x / y),
                AnnFn::Min => Ok(x.min(y)),
                AnnFn::Max => Ok(x.max(y)),
                AnnFn::Pow => Ok(x.powf(y)),
            }
        }
    }
}

/// Evaluates both items and clamps them to the unit interval.
pub fn eval_annotation(a: &Annotation, b: &Binding) -> Result<ProbInterval> {
    let lo = eval_annotation_item(&a.lo, b)?;
    let hi = eval_annotation_item(&a.hi, b)?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Eval(format!("annotation {a} is not finite")));
    }
    let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
    if lo > hi + EPS {
        return Err(Error::Eval(format!("annotation {a} evaluates to the inverted interval [{lo}, {hi}]")));
    }
    Ok(ProbInterval { lo, hi: hi.max(lo) })
}

fn unbound_var(a: &CodeCallAtom, b: &Binding) -> Option<String> {
    match (&a.polarity, &a.subject) {
        (Polarity::In, Term::Var(v)) if !b.contains_key(v) => Some(v.clone()),
        _ => None,
    }
}

fn eq_binder(c: &Conjunct, b: &Binding) -> Option<(String, Term)> {
    if let Conjunct::Cmp(CmpOp::Eq, l, r) = c {
        let ground = |t: &Term| t.vars().iter().all(|v| b.contains_key(v));
        match (l, r) {
            (Term::Var(v), t) if !b.contains_key(v) && ground(t) => return Some((v.clone(), t.clone())),
            (t, Term::Var(v)) if !b.contains_key(v) && ground(t) => return Some((v.clone(), t.clone())),
            _ => {}
        }
    }
    None
}

/// Left-to-right binding enumeration: an `in` atom with an unbound variable subject yields one
/// binding per object of its call, and `X = t` binds `X`. No conjunct filters.
pub fn ground_condition<W: World>(w: &W, cond: &CodeCallCondition, b: &Binding) -> Result<Vec<Binding>> {
    let mut out = Vec::new();
    ground_rec(w, &cond.conjuncts, b.clone(), &mut out)?;
    Ok(out)
}

fn ground_rec<W: World>(w: &W, rest: &[Conjunct], b: Binding, out: &mut Vec<Binding>) -> Result<()> {
    let Some((c, tail)) = rest.split_first() else {
        out.push(b);
        return Ok(());
    };
    match c {
        Conjunct::Atom(a) => {
            if let Some(v) = unbound_var(a, &b) {
                let call = ground_call(&a.call, &b)?;
                for o in w.objects(&call) {
                    let mut nb = b.clone();
                    nb.insert(v.clone(), o.clone());
                    ground_rec(w, tail, nb, out)?;
                }
                return Ok(());
            }
            for v in c.vars() {
                if !b.contains_key(&v) {
                    return Err(Error::Unbound(v));
                }
            }
            ground_rec(w, tail, b, out)
        }
        Conjunct::Cmp(..) => {
            if let Some((v, t)) = eq_binder(c, &b) {
                let o = eval_term(&t, &b)?;
                let mut nb = b;
                nb.insert(v, o);
                return ground_rec(w, tail, nb, out);
            }
            for v in c.vars() {
                if !b.contains_key(&v) {
                    return Err(Error::Unbound(v));
                }
            }
            ground_rec(w, tail, b, out)
        }
    }
}

/// Tightest interval of one ground conjunct, or `None` when it is unsatisfied.
fn conjunct_interval<W: World>(w: &W, c: &Conjunct, b: &Binding, ann: ProbInterval) -> Result<Option<ProbInterval>> {
    match c {
        Conjunct::Atom(a) => {
            let call = ground_call(&a.call, b)?;
            let o = eval_term(&a.subject, b)?;
            Ok(match a.polarity {
                Polarity::In => w.in_interval(&call, &o),
                Polarity::NotIn => w.notin_holds(&call, &o, ann).then_some(ProbInterval::ONE),
            })
        }
        Conjunct::Cmp(op, l, r) => {
            let holds = cmp_holds(*op, &eval_term(l, b)?, &eval_term(r, b)?)?;
            Ok(holds.then_some(ProbInterval::ONE))
        }
    }
}

/// Tightest interval of a condition ground under `b`: the left fold of the conjuncts'
/// intervals, or `None` if some conjunct is unsatisfied. `ann` decides `notin` atoms.
pub fn tightest_interval<W: World>(
    w: &W,
    cond: &CodeCallCondition,
    strategy: StrategyId,
    b: &Binding,
    ann: ProbInterval,
) -> Result<Option<ProbInterval>> {
    let mut parts = Vec::with_capacity(cond.conjuncts.len());
    for c in &cond.conjuncts {
        match conjunct_interval(w, c, b, ann)? {
            Some(iv) => parts.push(iv),
            None => return Ok(None),
        }
    }
    Ok(Some(combine_all(strategy, parts)))
}

/// `O ⊨ ac` under `b`. Non-ground conditions hold iff every ground instance holds.
pub fn satisfies<W: World>(w: &W, ac: &AnnotatedCondition, b: &Binding) -> Result<bool> {
    for g in ground_condition(w, &ac.condition, b)? {
        let ann = eval_annotation(&ac.annotation, &g)?;
        match tightest_interval(w, &ac.condition, ac.strategy, &g, ann)? {
            Some(iv) if ann.contains(&iv) => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Ground instances of `ac` extending `b` that satisfy it, in grounding order.
///
/// Unlike `ground_condition`, branches are cut as soon as a conjunct is unsatisfied.
pub fn satisfying_groundings<W: World>(w: &W, ac: &AnnotatedCondition, b: &Binding) -> Result<Vec<Binding>> {
    let mut out = Vec::new();
    let mut parts = Vec::with_capacity(ac.condition.conjuncts.len());
    solve_rec(w, ac, 0, b.clone(), &mut parts, &mut out, usize::MAX)?;
    Ok(out)
}

/// Whether some grounding of `cond` extending `b` is satisfied at `[p, 1]`.
pub fn holds_somewhere<W: World>(
    w: &W,
    cond: &CodeCallCondition,
    strategy: StrategyId,
    p: f64,
    b: &Binding,
) -> Result<bool> {
    Ok(first_grounding(w, cond, strategy, p, b)?.is_some())
}

/// The first grounding of `cond` extending `b` satisfied at `[p, 1]`.
pub fn first_grounding<W: World>(
    w: &W,
    cond: &CodeCallCondition,
    strategy: StrategyId,
    p: f64,
    b: &Binding,
) -> Result<Option<Binding>> {
    let ac = AnnotatedCondition::new(cond.clone(), Annotation::constant(p, 1.0), strategy);
    let mut out = Vec::new();
    let mut parts = Vec::with_capacity(cond.conjuncts.len());
    solve_rec(w, &ac, 0, b.clone(), &mut parts, &mut out, 1)?;
    Ok(out.pop())
}

/// Every grounding of `cond` extending `b` satisfied at `[p, 1]`.
pub fn all_groundings<W: World>(
    w: &W,
    cond: &CodeCallCondition,
    strategy: StrategyId,
    p: f64,
    b: &Binding,
) -> Result<Vec<Binding>> {
    let ac = AnnotatedCondition::new(cond.clone(), Annotation::constant(p, 1.0), strategy);
    satisfying_groundings(w, &ac, b)
}

fn solve_rec<W: World>(
    w: &W,
    ac: &AnnotatedCondition,
    i: usize,
    b: Binding,
    parts: &mut Vec<Option<ProbInterval>>,
    out: &mut Vec<Binding>,
    limit: usize,
) -> Result<()> {
    if out.len() >= limit {
        return Ok(());
    }
    let conjuncts = &ac.condition.conjuncts;
    if i == conjuncts.len() {
        let ann = eval_annotation(&ac.annotation, &b)?;
        let mut ivs = Vec::with_capacity(parts.len());
        for (c, part) in conjuncts.iter().zip(parts.iter()) {
            match part {
                Some(iv) => ivs.push(*iv),
                None => match conjunct_interval(w, c, &b, ann)? {
                    Some(iv) => ivs.push(iv),
                    None => return Ok(()),
                },
            }
        }
        if ann.contains(&combine_all(ac.strategy, ivs)) {
            out.push(b);
        }
        return Ok(());
    }
    let c = &conjuncts[i];
    match c {
        Conjunct::Atom(a) => {
            if let Some(v) = unbound_var(a, &b) {
                let call = ground_call(&a.call, &b)?;
                for o in w.objects(&call) {
                    let iv = w.in_interval(&call, o);
                    let mut nb = b.clone();
                    nb.insert(v.clone(), o.clone());
                    parts.push(iv);
                    solve_rec(w, ac, i + 1, nb, parts, out, limit)?;
                    parts.pop();
                }
                return Ok(());
            }
            let part = match a.polarity {
                Polarity::In => {
                    let call = ground_call(&a.call, &b)?;
                    match w.in_interval(&call, &eval_term(&a.subject, &b)?) {
                        Some(iv) => Some(iv),
                        None => return Ok(()),
                    }
                }
                Polarity::NotIn => None,
            };
            parts.push(part);
            let r = solve_rec(w, ac, i + 1, b, parts, out, limit);
            parts.pop();
            r
        }
        Conjunct::Cmp(op, l, r) => {
            let nb = if let Some((v, t)) = eq_binder(c, &b) {
                let o = eval_term(&t, &b)?;
                let mut nb = b;
                nb.insert(v, o);
                nb
            } else {
                if !cmp_holds(*op, &eval_term(l, &b)?, &eval_term(r, &b)?)? {
                    return Ok(());
                }
                b
            };
            parts.push(Some(ProbInterval::ONE));
            let res = solve_rec(w, ac, i + 1, nb, parts, out, limit);
            parts.pop();
            res
        }
    }
}
