//! Value types shared across the crate and their canonical text rendering.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Tolerance used for every comparison between reals.
pub const EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum Object {
    Int(i64),
    Real(f64),
    Str(String),
    Record(BTreeMap<String, Object>),
}

impl Object {
    pub fn str(s: &str) -> Object {
        Object::Str(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Object::Int(i) => Some(*i as f64),
            Object::Real(r) => Some(*r),
            _ => None,
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Object::Int(_) => 0,
            Object::Real(_) => 1,
            Object::Str(_) => 2,
            Object::Record(_) => 3,
        }
    }
}

impl PartialEq for Object {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Object {}

impl PartialOrd for Object {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Object {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Object::Int(a), Object::Int(b)) => a.cmp(b),
            (Object::Real(a), Object::Real(b)) => a.total_cmp(b),
            (Object::Str(a), Object::Str(b)) => a.cmp(b),
            (Object::Record(a), Object::Record(b)) => a.cmp(b),
            _ => self.tag().cmp(&other.tag()),
        }
    }
}

pub(crate) const KEYWORDS: &[&str] = &["in", "notin", "not", "action", "ic", "true", "rv"];

pub fn is_bare_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !KEYWORDS.contains(&s)
}

pub fn fmt_real(r: f64) -> String {
    let s = format!("{r:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn fmt_quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Int(i) => write!(f, "{i}"),
            Object::Real(r) => f.write_str(&fmt_real(*r)),
            Object::Str(s) if is_bare_ident(s) => f.write_str(s),
            Object::Str(s) => f.write_str(&fmt_quoted(s)),
            Object::Record(fields) => {
                f.write_str("#{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Obj(Object),
    Field(Box<Term>, String),
    Arith(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn obj(o: Object) -> Term {
        Term::Obj(o)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Obj(_) => {}
            Term::Field(t, _) => t.collect_vars(out),
            Term::Arith(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn is_ground(&self) -> bool {
        self.vars().is_empty()
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right: bool) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Obj(o) => write!(f, "{o}"),
            Term::Field(t, name) => {
                match **t {
                    Term::Arith(..) => write!(f, "({t})")?,
                    _ => t.fmt_prec(f, 3, false)?,
                }
                write!(f, ".{name}")
            }
            Term::Arith(op, a, b) => {
                let p = op.precedence();
                let paren = p < parent || (right && p == parent);
                if paren {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, p, false)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, p, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

fn fmt_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CodeCall {
    pub domain: String,
    pub function: String,
    pub args: Vec<Term>,
}

impl CodeCall {
    pub fn new(domain: &str, function: &str, args: Vec<Term>) -> Self {
        CodeCall { domain: domain.to_string(), function: function.to_string(), args }
    }
}

impl fmt::Display for CodeCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.domain, self.function)?;
        fmt_list(f, &self.args)?;
        f.write_str(")")
    }
}

/// A code call whose arguments are all objects.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundCall {
    pub domain: String,
    pub function: String,
    pub args: Vec<Object>,
}

impl GroundCall {
    pub fn new(domain: &str, function: &str, args: Vec<Object>) -> Self {
        GroundCall { domain: domain.to_string(), function: function.to_string(), args }
    }

    pub fn to_call(&self) -> CodeCall {
        CodeCall {
            domain: self.domain.clone(),
            function: self.function.clone(),
            args: self.args.iter().map(|o| Term::Obj(o.clone())).collect(),
        }
    }
}

impl fmt::Display for GroundCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.domain, self.function)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    In,
    NotIn,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CodeCallAtom {
    pub polarity: Polarity,
    pub subject: Term,
    pub call: CodeCall,
}

impl CodeCallAtom {
    pub fn is_in(subject: Term, call: CodeCall) -> Self {
        CodeCallAtom { polarity: Polarity::In, subject, call }
    }

    pub fn not_in(subject: Term, call: CodeCall) -> Self {
        CodeCallAtom { polarity: Polarity::NotIn, subject, call }
    }
}

impl fmt::Display for CodeCallAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = match self.polarity {
            Polarity::In => "in",
            Polarity::NotIn => "notin",
        };
        write!(f, "{kw}({}, {})", self.subject, self.call)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Conjunct {
    Atom(CodeCallAtom),
    Cmp(CmpOp, Term, Term),
}

impl Conjunct {
    pub fn vars(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        match self {
            Conjunct::Atom(a) => {
                a.subject.collect_vars(&mut s);
                for t in &a.call.args {
                    t.collect_vars(&mut s);
                }
            }
            Conjunct::Cmp(_, l, r) => {
                l.collect_vars(&mut s);
                r.collect_vars(&mut s);
            }
        }
        s
    }
}

impl fmt::Display for Conjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conjunct::Atom(a) => write!(f, "{a}"),
            Conjunct::Cmp(op, l, r) => write!(f, "{l} {} {r}", op.symbol()),
        }
    }
}

/// Conjunction of atomic conditions, evaluated left to right. Empty means `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct CodeCallCondition {
    pub conjuncts: Vec<Conjunct>,
}

impl CodeCallCondition {
    pub fn new(conjuncts: Vec<Conjunct>) -> Self {
        CodeCallCondition { conjuncts }
    }

    pub fn truth() -> Self {
        CodeCallCondition::default()
    }

    pub fn is_empty(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        for c in &self.conjuncts {
            s.extend(c.vars());
        }
        s
    }
}

impl fmt::Display for CodeCallCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conjuncts.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnnFn {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    Pow,
}

impl AnnFn {
    pub fn lookup(name: &str, arity: usize) -> Option<AnnFn> {
        let f = match name {
            "+" => AnnFn::Add,
            "-" => AnnFn::Sub,
            "*" => AnnFn::Mul,
            "/" => AnnFn::Div,
            "min" => AnnFn::Min,
            "max" => AnnFn::Max,
            "pow" => AnnFn::Pow,
            _ => return None,
        };
        (arity == 2).then_some(f)
    }

    fn infix(self) -> Option<(&'static str, u8)> {
        match self {
            AnnFn::Add => Some(("+", 1)),
            AnnFn::Sub => Some(("-", 1)),
            AnnFn::Mul => Some(("*", 2)),
            AnnFn::Div => Some(("/", 2)),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AnnFn::Add => "+",
            AnnFn::Sub => "-",
            AnnFn::Mul => "*",
            AnnFn::Div => "/",
            AnnFn::Min => "min",
            AnnFn::Max => "max",
            AnnFn::Pow => "pow",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnnotationItem {
    Const(f64),
    Var(String),
    Apply(AnnFn, Vec<AnnotationItem>),
}

impl AnnotationItem {
    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            AnnotationItem::Const(_) => {}
            AnnotationItem::Var(v) => {
                out.insert(v.clone());
            }
            AnnotationItem::Apply(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8, right: bool) -> fmt::Result {
        match self {
            AnnotationItem::Const(c) => f.write_str(&fmt_real(*c)),
            AnnotationItem::Var(v) => f.write_str(v),
            AnnotationItem::Apply(func, args) => match (func.infix(), args.as_slice()) {
                (Some((sym, p)), [a, b]) => {
                    let paren = p < parent || (right && p == parent);
                    if paren {
                        f.write_str("(")?;
                    }
                    a.fmt_prec(f, p, false)?;
                    write!(f, " {sym} ")?;
                    b.fmt_prec(f, p, true)?;
                    if paren {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
                _ => {
                    write!(f, "{}(", func.name())?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        a.fmt_prec(f, 0, false)?;
                    }
                    f.write_str(")")
                }
            },
        }
    }
}

impl fmt::Display for AnnotationItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
    pub lo: AnnotationItem,
    pub hi: AnnotationItem,
}

impl Annotation {
    pub fn constant(lo: f64, hi: f64) -> Self {
        Annotation { lo: AnnotationItem::Const(lo), hi: AnnotationItem::Const(hi) }
    }

    pub fn certain() -> Self {
        Annotation::constant(1.0, 1.0)
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyId {
    Ig,
    Pc,
    Nc,
    In,
}

impl StrategyId {
    pub const ALL: [StrategyId; 4] = [StrategyId::Ig, StrategyId::Pc, StrategyId::Nc, StrategyId::In];

    pub fn parse(s: &str) -> Option<StrategyId> {
        match s {
            "ig" => Some(StrategyId::Ig),
            "pc" => Some(StrategyId::Pc),
            "nc" => Some(StrategyId::Nc),
            "in_" => Some(StrategyId::In),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::Ig => "ig",
            StrategyId::Pc => "pc",
            StrategyId::Nc => "nc",
            StrategyId::In => "in_",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedCondition {
    pub condition: CodeCallCondition,
    pub annotation: Annotation,
    pub strategy: StrategyId,
}

impl AnnotatedCondition {
    pub fn new(condition: CodeCallCondition, annotation: Annotation, strategy: StrategyId) -> Self {
        AnnotatedCondition { condition, annotation, strategy }
    }
}

impl fmt::Display for AnnotatedCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {} @ {}", self.condition, self.annotation, self.strategy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    P,
    F,
    W,
    Do,
    O,
}

impl Modality {
    pub const ALL: [Modality; 5] = [Modality::P, Modality::F, Modality::W, Modality::Do, Modality::O];

    pub fn parse(s: &str) -> Option<Modality> {
        match s {
            "P" => Some(Modality::P),
            "F" => Some(Modality::F),
            "W" => Some(Modality::W),
            "Do" => Some(Modality::Do),
            "O" => Some(Modality::O),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::P => "P",
            Modality::F => "F",
            Modality::W => "W",
            Modality::Do => "Do",
            Modality::O => "O",
        }
    }

    /// Modalities whose atoms require the action's precondition to hold.
    pub fn needs_pre(self) -> bool {
        matches!(self, Modality::P | Modality::O | Modality::Do)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An action applied to (possibly non-ground) terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActionAtom {
    pub name: String,
    pub args: Vec<Term>,
}

impl ActionAtom {
    pub fn new(name: &str, args: Vec<Term>) -> Self {
        ActionAtom { name: name.to_string(), args }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        for t in &self.args {
            t.collect_vars(&mut s);
        }
        s
    }
}

impl fmt::Display for ActionAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        fmt_list(f, &self.args)?;
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<Object>,
}

impl GroundAction {
    pub fn new(name: &str, args: Vec<Object>) -> Self {
        GroundAction { name: name.to_string(), args }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct StatusAtom {
    pub modality: Modality,
    pub action: ActionAtom,
}

impl StatusAtom {
    pub fn new(modality: Modality, name: &str, args: Vec<Term>) -> Self {
        StatusAtom { modality, action: ActionAtom::new(name, args) }
    }
}

impl fmt::Display for StatusAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.modality, self.action)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundStatusAtom {
    pub modality: Modality,
    pub action: GroundAction,
}

impl GroundStatusAtom {
    pub fn new(modality: Modality, action: GroundAction) -> Self {
        GroundStatusAtom { modality, action }
    }

    /// Atom over string-object arguments.
    pub fn simple(modality: Modality, name: &str, args: &[&str]) -> Self {
        GroundStatusAtom { modality, action: GroundAction::new(name, args.iter().map(|a| Object::str(a)).collect()) }
    }
}

impl fmt::Display for GroundStatusAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.modality, self.action)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub head: StatusAtom,
    pub body_prob: Vec<AnnotatedCondition>,
    pub body_pos: Vec<StatusAtom>,
    pub body_neg: Vec<StatusAtom>,
}

impl Rule {
    pub fn is_positive(&self) -> bool {
        self.body_neg.is_empty()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <-", self.head)?;
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if first {
                first = false;
                f.write_str(" ")
            } else {
                f.write_str(", ")
            }
        };
        for ac in &self.body_prob {
            sep(f)?;
            write!(f, "{ac}")?;
        }
        for a in &self.body_pos {
            sep(f)?;
            write!(f, "{a}")?;
        }
        for a in &self.body_neg {
            sep(f)?;
            write!(f, "not {a}")?;
        }
        f.write_str(".")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDef {
    pub name: String,
    pub params: Vec<String>,
    pub pre: CodeCallCondition,
    pub add: Vec<CodeCallAtom>,
    pub del: Vec<CodeCallAtom>,
}

impl ActionDef {
    pub fn simple(name: &str, params: &[&str]) -> Self {
        ActionDef {
            name: name.to_string(),
            params: params.iter().map(|p| p.to_string()).collect(),
            pre: CodeCallCondition::truth(),
            add: vec![],
            del: vec![],
        }
    }
}

impl fmt::Display for ActionDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "action {}({})", self.name, self.params.join(", "))?;
        if self.pre.is_empty() && self.add.is_empty() && self.del.is_empty() {
            return f.write_str(".");
        }
        write!(f, " {{ pre: {}; add: ", self.pre)?;
        fmt_list(f, &self.add)?;
        f.write_str("; del: ")?;
        fmt_list(f, &self.del)?;
        f.write_str(" }")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionConstraint {
    pub blocked: Vec<ActionAtom>,
    pub guard: CodeCallCondition,
}

impl fmt::Display for ActionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{ ")?;
        fmt_list(f, &self.blocked)?;
        f.write_str(" } <~")?;
        if !self.guard.is_empty() {
            write!(f, " {}", self.guard)?;
        }
        f.write_str(".")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrityConstraint {
    pub antecedent: CodeCallCondition,
    pub consequent: Conjunct,
}

impl fmt::Display for IntegrityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ic {} => {}.", self.antecedent, self.consequent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ProbInterval {
    pub const ONE: ProbInterval = ProbInterval { lo: 1.0, hi: 1.0 };
    pub const ZERO: ProbInterval = ProbInterval { lo: 0.0, hi: 0.0 };
    pub const UNIT: ProbInterval = ProbInterval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Option<ProbInterval> {
        let ok = lo.is_finite() && hi.is_finite() && lo >= -EPS && hi <= 1.0 + EPS && lo <= hi + EPS;
        ok.then(|| ProbInterval { lo: lo.clamp(0.0, 1.0), hi: hi.clamp(0.0, 1.0) })
    }

    pub fn point(p: f64) -> ProbInterval {
        ProbInterval { lo: p, hi: p }
    }

    /// `self ⊇ other` up to tolerance.
    pub fn contains(&self, other: &ProbInterval) -> bool {
        self.lo <= other.lo + EPS && other.hi <= self.hi + EPS
    }

    pub fn approx_eq(&self, other: &ProbInterval, tol: f64) -> bool {
        (self.lo - other.lo).abs() <= tol && (self.hi - other.hi).abs() <= tol
    }
}

impl fmt::Display for ProbInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", fmt_real(self.lo), fmt_real(self.hi))
    }
}

/// A finite object set with a sub-stochastic assignment, in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomVariable {
    pub entries: Vec<(Object, f64)>,
}

impl RandomVariable {
    pub fn new(entries: Vec<(Object, f64)>) -> Self {
        RandomVariable { entries }
    }

    pub fn certain(o: Object) -> Self {
        RandomVariable { entries: vec![(o, 1.0)] }
    }

    pub fn prob(&self, o: &Object) -> Option<f64> {
        self.entries.iter().find(|(x, _)| x == o).map(|(_, p)| *p)
    }

    pub fn contains(&self, o: &Object) -> bool {
        self.entries.iter().any(|(x, _)| x == o)
    }

    pub fn objects(&self) -> impl Iterator<Item = &Object> {
        self.entries.iter().map(|(o, _)| o)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// `⟨{o}, 1⟩`, the shape every random variable takes in a classical state.
    pub fn is_degenerate(&self) -> bool {
        self.entries.len() == 1 && (self.entries[0].1 - 1.0).abs() <= EPS
    }
}

impl fmt::Display for RandomVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("rv{")?;
        for (i, (o, p)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{o}: {}", fmt_real(*p))?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RvReport {
    pub violations: Vec<String>,
}

impl RvReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_random_variable(rv: &RandomVariable) -> RvReport {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for (o, p) in &rv.entries {
        if !seen.insert(o.clone()) {
            violations.push(format!("object {o} listed twice"));
        }
        if !p.is_finite() || *p < -EPS || *p > 1.0 + EPS {
            violations.push(format!("probability {} of {o} outside [0,1]", fmt_real(*p)));
        }
    }
    let total = rv.total();
    if total > 1.0 + EPS {
        violations.push(format!("sum {} > 1", fmt_total(total)));
    }
    RvReport { violations }
}

fn fmt_total(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    fmt_real(r)
}

/// A set of ground status atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct StatusSet {
    pub atoms: BTreeSet<GroundStatusAtom>,
}

impl StatusSet {
    pub fn new() -> Self {
        StatusSet::default()
    }

    pub fn from_atoms<I: IntoIterator<Item = GroundStatusAtom>>(it: I) -> Self {
        StatusSet { atoms: it.into_iter().collect() }
    }

    pub fn insert(&mut self, a: GroundStatusAtom) -> bool {
        self.atoms.insert(a)
    }

    pub fn contains(&self, a: &GroundStatusAtom) -> bool {
        self.atoms.contains(a)
    }

    pub fn has(&self, m: Modality, a: &GroundAction) -> bool {
        self.atoms.contains(&GroundStatusAtom::new(m, a.clone()))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_subset(&self, other: &StatusSet) -> bool {
        self.atoms.is_subset(&other.atoms)
    }

    pub fn union(&self, other: &StatusSet) -> StatusSet {
        StatusSet { atoms: self.atoms.union(&other.atoms).cloned().collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundStatusAtom> {
        self.atoms.iter()
    }

    pub fn actions(&self) -> BTreeSet<GroundAction> {
        self.atoms.iter().map(|a| a.action.clone()).collect()
    }
}

impl fmt::Display for StatusSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// `Op(PS)`: the actions carrying modality `m`.
pub fn op_projection(ps: &StatusSet, m: Modality) -> BTreeSet<GroundAction> {
    ps.atoms.iter().filter(|a| a.modality == m).map(|a| a.action.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(entries: &[(&str, f64)]) -> RandomVariable {
        RandomVariable::new(entries.iter().map(|(o, p)| (Object::str(o), *p)).collect())
    }

    #[test]
    fn identify_rv_is_valid() {
        assert!(validate_random_variable(&rv(&[("t72", 0.5), ("t80", 0.4)])).ok());
        assert!(validate_random_variable(&rv(&[("a", 1.0)])).ok());
    }

    #[test]
    fn overfull_rv_reports_sum() {
        let rep = validate_random_variable(&rv(&[("a", 0.7), ("b", 0.7)]));
        assert_eq!(rep.violations, vec!["sum 1.4 > 1".to_string()]);
    }

    #[test]
    fn out_of_range_probability_reported() {
        let rep = validate_random_variable(&rv(&[("a", -0.2), ("b", 1.5)]));
        assert_eq!(rep.violations.len(), 3);
    }

    #[test]
    fn projection_picks_modality() {
        let ps = StatusSet::from_atoms([
            GroundStatusAtom::simple(Modality::O, "w", &["b"]),
            GroundStatusAtom::simple(Modality::Do, "w", &["b"]),
            GroundStatusAtom::simple(Modality::P, "w", &["b"]),
        ]);
        let got = op_projection(&ps, Modality::Do);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![GroundAction::new("w", vec![Object::str("b")])]);
        assert!(op_projection(&StatusSet::new(), Modality::F).is_empty());
        let pf = StatusSet::from_atoms([
            GroundStatusAtom::simple(Modality::P, "a", &[]),
            GroundStatusAtom::simple(Modality::F, "a", &[]),
        ]);
        assert_eq!(op_projection(&pf, Modality::P).len(), 1);
    }

    #[test]
    fn object_rendering() {
        assert_eq!(Object::str("t80").to_string(), "t80");
        assert_eq!(Object::str("Loc2").to_string(), "\"Loc2\"");
        assert_eq!(Object::str("in").to_string(), "\"in\"");
        assert_eq!(Object::Real(1.0).to_string(), "1.0");
        assert_eq!(Object::Int(-4).to_string(), "-4");
        assert_ne!(Object::Int(1), Object::Real(1.0));
    }

    #[test]
    fn term_rendering_keeps_structure() {
        let t = Term::Arith(
            ArithOp::Sub,
            Box::new(Term::var("X")),
            Box::new(Term::Arith(ArithOp::Sub, Box::new(Term::var("Y")), Box::new(Term::obj(Object::Int(1))))),
        );
        assert_eq!(t.to_string(), "X - (Y - 1)");
        let m = Term::Arith(
            ArithOp::Mul,
            Box::new(Term::Arith(ArithOp::Add, Box::new(Term::var("X")), Box::new(Term::var("Y")))),
            Box::new(Term::var("Z")),
        );
        assert_eq!(m.to_string(), "(X + Y) * Z");
    }

    #[test]
    fn interval_containment_uses_tolerance() {
        let a = ProbInterval::new(0.3, 0.5).unwrap();
        assert!(a.contains(&ProbInterval::point(0.3 + 1e-12)));
        assert!(!a.contains(&ProbInterval::new(0.0, 0.3).unwrap()));
        assert!(ProbInterval::new(0.6, 0.5).is_none());
    }
}
