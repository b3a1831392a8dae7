//! Hand-written lexer and recursive-descent parser for programs, states,
//! queries, status-set files and Kripke dumps.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result, SourceSpan};
use crate::model::{
    is_bare_ident, ActionAtom, ActionConstraint, ActionDef, AnnFn, AnnotatedCondition, Annotation, AnnotationItem,
    ArithOp, CmpOp, CodeCall, CodeCallAtom, CodeCallCondition, Conjunct, GroundAction, GroundCall, GroundStatusAtom,
    IntegrityConstraint, Modality, Object, Polarity, RandomVariable, Rule, StatusAtom, StatusSet, StrategyId, Term,
};
use crate::program::{self, Program};
use crate::state::{DetState, ProbState};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Real(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    len: usize,
}

const PUNCTS: &[&str] = &[
    "<-", "<~", "<=", ">=", "=>", "!=", "(", ")", "{", "}", "[", "]", ",", ".", ":", ";", "&", "@", "#", "=", "<", ">",
    "+", "-", "*", "/",
];

fn lex(text: &str, file: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| Error::Syntax { span: SourceSpan::new(file, line, col), msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[s..i].iter().collect();
            col += i - s;
            let tok =
                if word.starts_with(|c: char| c.is_ascii_uppercase()) { Tok::Var(word) } else { Tok::Ident(word) };
            out.push(Token { tok, line: start_line, col: start_col, len: col - start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut real = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[s..i].iter().collect();
            col += i - s;
            let tok = if real {
                Tok::Real(lit.parse().map_err(|_| err(start_line, start_col, format!("bad number {lit}")))?)
            } else {
                Tok::Int(lit.parse().map_err(|_| err(start_line, start_col, format!("integer {lit} out of range")))?)
            };
            out.push(Token { tok, line: start_line, col: start_col, len: col - start_col });
            continue;
        }
        if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(start_line, start_col, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err(err(line, col, "bad escape".into())),
                        };
                        s.push(e);
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: start_line, col: start_col, len: col - start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Token { tok: Tok::Punct(p), line: start_line, col: start_col, len: p.len() });
            }
            None => return Err(err(line, col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col, len: 0 });
    Ok(out)
}

/// Options shared by every entry point.
#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub file: String,
    /// Strategy given to condition groups written without an annotation.
    pub default_strategy: StrategyId,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { file: "<input>".to_string(), default_strategy: StrategyId::Ig }
    }
}

struct Parser<'o> {
    toks: Vec<Token>,
    pos: usize,
    opts: &'o ParseOptions,
    opens: Vec<usize>,
}

/// What a parsed query denotes.
#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Condition(AnnotatedCondition),
    Status(StatusAtom),
}

impl<'o> Parser<'o> {
    fn new(text: &str, opts: &'o ParseOptions) -> Result<Self> {
        Ok(Parser { toks: lex(text, &opts.file)?, pos: 0, opts, opens: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        let t = &self.toks[self.pos];
        SourceSpan::new(&self.opts.file, t.line, t.col)
    }

    fn span_of(&self, idx: usize) -> SourceSpan {
        let t = &self.toks[idx.min(self.toks.len() - 1)];
        SourceSpan::new(&self.opts.file, t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn at_ident(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.at(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T> {
        if let (Tok::Eof, Some(&open)) = (self.peek(), self.opens.last()) {
            return Err(self.unclosed(open));
        }
        Err(Error::Syntax { span: self.span(), msg: msg.into() })
    }

    fn unclosed(&self, open: usize) -> Error {
        let opener = match &self.toks[open].tok {
            Tok::Punct(o) => *o,
            _ => "(",
        };
        Error::Syntax { span: self.span_of(open), msg: format!("unclosed `{opener}`") }
    }

    fn open(&mut self, p: &str) -> Result<usize> {
        let at = self.pos;
        self.expect(p)?;
        self.opens.push(at);
        Ok(at)
    }

    fn open_bumped(&mut self) -> usize {
        let at = self.pos;
        self.bump();
        self.opens.push(at);
        at
    }

    /// True when token `i` starts exactly where token `i - 1` ends.
    fn adjacent(&self, i: usize) -> bool {
        if i == 0 || i >= self.toks.len() {
            return false;
        }
        let (a, b) = (&self.toks[i - 1], &self.toks[i]);
        a.line == b.line && a.col + a.len == b.col
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Real(r) => format!("`{r}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn expect(&mut self, p: &str) -> Result<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.syntax(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    /// Expects the closing token of a bracket opened at token `open`. At end of input
    /// the diagnostic points at the unclosed opener.
    fn close(&mut self, p: &str, open: usize) -> Result<()> {
        if self.eat(p) {
            if self.opens.last() == Some(&open) {
                self.opens.pop();
            }
            return Ok(());
        }
        if *self.peek() == Tok::Eof {
            return Err(self.unclosed(open));
        }
        self.syntax(format!("expected `{p}`, found {}", self.describe()))
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.syntax(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn var(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Var(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.syntax(format!("expected variable, found {}", self.describe())),
        }
    }

    fn at_status_start(&self) -> bool {
        if self.at_ident("not") {
            return true;
        }
        matches!(self.peek(), Tok::Var(m) if Modality::parse(m).is_some())
            && matches!(self.peek_at(1), Tok::Ident(_))
            && matches!(self.peek_at(2), Tok::Punct("("))
    }

    // ---- terms ----

    fn term(&mut self) -> Result<Term> {
        let mut lhs = self.term_mul()?;
        loop {
            let op = if self.at("+") {
                ArithOp::Add
            } else if self.at("-") {
                ArithOp::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term_mul()?;
            lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term_mul(&mut self) -> Result<Term> {
        let mut lhs = self.term_postfix()?;
        loop {
            let op = if self.at("*") {
                ArithOp::Mul
            } else if self.at("/") {
                ArithOp::Div
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term_postfix()?;
            lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term_postfix(&mut self) -> Result<Term> {
        let mut t = self.term_primary()?;
        while self.at(".")
            && self.adjacent(self.pos)
            && self.adjacent(self.pos + 1)
            && matches!(self.peek_at(1), Tok::Ident(_))
            && !matches!(self.peek_at(2), Tok::Punct("("))
        {
            self.bump();
            let f = self.ident()?;
            t = Term::Field(Box::new(t), f);
        }
        Ok(t)
    }

    fn term_primary(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Punct("(") => {
                let open = self.open_bumped();
                let t = self.term()?;
                self.close(")", open)?;
                Ok(t)
            }
            _ => Ok(Term::Obj(self.object()?)),
        }
    }

    fn object(&mut self) -> Result<Object> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Object::Int(i))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Object::Real(r))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Object::Str(s))
            }
            Tok::Ident(s) if is_bare_ident(&s) => {
                self.bump();
                Ok(Object::Str(s))
            }
            Tok::Punct("-") => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(i) => {
                        self.bump();
                        Ok(Object::Int(-i))
                    }
                    Tok::Real(r) => {
                        self.bump();
                        Ok(Object::Real(-r))
                    }
                    _ => self.syntax(format!("expected number after `-`, found {}", self.describe())),
                }
            }
            Tok::Punct("#") => {
                self.bump();
                let open = self.open("{")?;
                let mut fields = BTreeMap::new();
                if !self.at("}") {
                    loop {
                        let span = self.span();
                        let name = self.ident()?;
                        self.expect(":")?;
                        let v = self.object()?;
                        if fields.insert(name.clone(), v).is_some() {
                            return Err(Error::Syntax { span, msg: format!("duplicate field {name}") });
                        }
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.close("}", open)?;
                Ok(Object::Record(fields))
            }
            _ => self.syntax(format!("expected a term, found {}", self.describe())),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>> {
        let open = self.open("(")?;
        let mut out = Vec::new();
        if !self.at(")") {
            loop {
                out.push(self.term()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.close(")", open)?;
        Ok(out)
    }

    fn code_call(&mut self) -> Result<CodeCall> {
        let domain = self.ident()?;
        self.expect(".")?;
        let function = self.ident()?;
        let args = self.args()?;
        Ok(CodeCall { domain, function, args })
    }

    fn ground_call(&mut self) -> Result<GroundCall> {
        let span = self.span();
        let call = self.code_call()?;
        let mut args = Vec::new();
        for t in call.args {
            match t {
                Term::Obj(o) => args.push(o),
                other => return Err(Error::Syntax { span, msg: format!("argument {other} is not ground") }),
            }
        }
        Ok(GroundCall { domain: call.domain, function: call.function, args })
    }

    // ---- conditions ----

    fn conjunct(&mut self) -> Result<Conjunct> {
        if self.at_ident("in") || self.at_ident("notin") {
            let polarity = if self.at_ident("in") { Polarity::In } else { Polarity::NotIn };
            self.bump();
            let open = self.open("(")?;
            let subject = self.term()?;
            self.expect(",")?;
            let call = self.code_call()?;
            self.close(")", open)?;
            return Ok(Conjunct::Atom(CodeCallAtom { polarity, subject, call }));
        }
        let lhs = self.term()?;
        let op = match self.peek() {
            Tok::Punct("=") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Neq,
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct(">=") => CmpOp::Ge,
            _ => return self.syntax(format!("expected a comparison operator, found {}", self.describe())),
        };
        self.bump();
        let rhs = self.term()?;
        Ok(Conjunct::Cmp(op, lhs, rhs))
    }

    /// A condition joined by `&` (and `,` when `commas` is set). `true` denotes the empty condition.
    fn condition(&mut self, commas: bool) -> Result<CodeCallCondition> {
        if self.at_ident("true") {
            self.bump();
            return Ok(CodeCallCondition::truth());
        }
        let mut conjuncts = vec![self.conjunct()?];
        while self.at("&") || (commas && self.at(",")) {
            self.bump();
            conjuncts.push(self.conjunct()?);
        }
        Ok(CodeCallCondition::new(conjuncts))
    }

    fn ann_item(&mut self) -> Result<AnnotationItem> {
        let mut lhs = self.ann_mul()?;
        loop {
            let f = if self.at("+") {
                AnnFn::Add
            } else if self.at("-") {
                AnnFn::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.ann_mul()?;
            lhs = AnnotationItem::Apply(f, vec![lhs, rhs]);
        }
    }

    fn ann_mul(&mut self) -> Result<AnnotationItem> {
        let mut lhs = self.ann_primary()?;
        loop {
            let f = if self.at("*") {
                AnnFn::Mul
            } else if self.at("/") {
                AnnFn::Div
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.ann_primary()?;
            lhs = AnnotationItem::Apply(f, vec![lhs, rhs]);
        }
    }

    fn ann_primary(&mut self) -> Result<AnnotationItem> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(AnnotationItem::Const(i as f64))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(AnnotationItem::Const(r))
            }
            Tok::Var(v) => {
                self.bump();
                Ok(AnnotationItem::Var(v))
            }
            Tok::Punct("(") => {
                let open = self.open_bumped();
                let a = self.ann_item()?;
                self.close(")", open)?;
                Ok(a)
            }
            Tok::Ident(name) => {
                let span = self.span();
                self.bump();
                let open = self.open("(")?;
                let mut args = Vec::new();
                if !self.at(")") {
                    loop {
                        args.push(self.ann_item()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.close(")", open)?;
                match AnnFn::lookup(&name, args.len()) {
                    Some(f) if f.name() == name => Ok(AnnotationItem::Apply(f, args)),
                    _ => Err(Error::UnknownFunction { span, name, arity: args.len() }),
                }
            }
            _ => self.syntax(format!("expected an annotation item, found {}", self.describe())),
        }
    }

    fn annotation_suffix(&mut self) -> Result<(Annotation, StrategyId)> {
        self.expect(":")?;
        let open = self.open("[")?;
        let lo = self.ann_item()?;
        self.expect(",")?;
        let hi = self.ann_item()?;
        self.close("]", open)?;
        self.expect("@")?;
        let span = self.span();
        let name = match self.bump() {
            Tok::Ident(s) => s,
            _ => return Err(Error::Syntax { span, msg: "expected a strategy id".into() }),
        };
        let strat = StrategyId::parse(&name).ok_or(Error::UnknownStrategy { span, name })?;
        Ok((Annotation { lo, hi }, strat))
    }

    fn status_atom(&mut self) -> Result<StatusAtom> {
        let span = self.span();
        let m = self.var()?;
        let modality =
            Modality::parse(&m).ok_or_else(|| Error::Syntax { span, msg: format!("unknown modality {m}") })?;
        let name = self.ident()?;
        let args = self.args()?;
        Ok(StatusAtom { modality, action: ActionAtom { name, args } })
    }

    fn action_atom(&mut self) -> Result<ActionAtom> {
        let name = self.ident()?;
        let args = self.args()?;
        Ok(ActionAtom { name, args })
    }

    // ---- statements ----

    fn rule(&mut self) -> Result<Rule> {
        let head = self.status_atom()?;
        self.expect("<-")?;
        let mut rule = Rule { head, body_prob: vec![], body_pos: vec![], body_neg: vec![] };
        if self.eat(".") {
            return Ok(rule);
        }
        let mut group: Vec<Conjunct> = Vec::new();
        loop {
            if self.at_status_start() {
                self.flush_group(&mut group, &mut rule);
                if self.at_ident("not") {
                    self.bump();
                    rule.body_neg.push(self.status_atom()?);
                } else {
                    rule.body_pos.push(self.status_atom()?);
                }
            } else {
                group.push(self.conjunct()?);
                if self.at(":") {
                    let (annotation, strategy) = self.annotation_suffix()?;
                    let condition = CodeCallCondition::new(std::mem::take(&mut group));
                    rule.body_prob.push(AnnotatedCondition { condition, annotation, strategy });
                }
            }
            if self.eat(",") {
                self.flush_group(&mut group, &mut rule);
                continue;
            }
            if self.eat("&") {
                continue;
            }
            self.flush_group(&mut group, &mut rule);
            self.expect(".")?;
            return Ok(rule);
        }
    }

    fn flush_group(&self, group: &mut Vec<Conjunct>, rule: &mut Rule) {
        if !group.is_empty() {
            let condition = CodeCallCondition::new(std::mem::take(group));
            rule.body_prob.push(AnnotatedCondition {
                condition,
                annotation: Annotation::certain(),
                strategy: self.opts.default_strategy,
            });
        }
    }

    fn atom_list(&mut self) -> Result<Vec<CodeCallAtom>> {
        let mut out = Vec::new();
        if self.at(";") || self.at("}") {
            return Ok(out);
        }
        loop {
            let span = self.span();
            match self.conjunct()? {
                Conjunct::Atom(a) if a.polarity == Polarity::In => out.push(a),
                _ => return Err(Error::Syntax { span, msg: "add/del lists hold `in` atoms only".into() }),
            }
            if !(self.eat(",") || self.eat("&")) {
                return Ok(out);
            }
        }
    }

    fn action_decl(&mut self) -> Result<ActionDef> {
        self.bump();
        let name = self.ident()?;
        let open = self.open("(")?;
        let mut params = Vec::new();
        if !self.at(")") {
            loop {
                params.push(self.var()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.close(")", open)?;
        let mut def = ActionDef { name, params, pre: CodeCallCondition::truth(), add: vec![], del: vec![] };
        if self.eat(".") {
            return Ok(def);
        }
        let open = self.open("{")?;
        let mut seen = BTreeSet::new();
        while !self.at("}") {
            let span = self.span();
            let section = self.ident()?;
            if !seen.insert(section.clone()) {
                return Err(Error::Syntax { span, msg: format!("duplicate section {section}") });
            }
            self.expect(":")?;
            match section.as_str() {
                "pre" => {
                    def.pre =
                        if self.at(";") || self.at("}") { CodeCallCondition::truth() } else { self.condition(true)? }
                }
                "add" => def.add = self.atom_list()?,
                "del" => def.del = self.atom_list()?,
                _ => return Err(Error::Syntax { span, msg: format!("unknown section {section}") }),
            }
            if !self.eat(";") {
                break;
            }
        }
        self.close("}", open)?;
        Ok(def)
    }

    fn action_constraint(&mut self) -> Result<ActionConstraint> {
        let open = self.open("{")?;
        let mut blocked = vec![self.action_atom()?];
        while self.eat(",") {
            blocked.push(self.action_atom()?);
        }
        self.close("}", open)?;
        self.expect("<~")?;
        let guard = if self.at(".") { CodeCallCondition::truth() } else { self.condition(true)? };
        self.expect(".")?;
        Ok(ActionConstraint { blocked, guard })
    }

    fn integrity_constraint(&mut self) -> Result<IntegrityConstraint> {
        self.bump();
        let antecedent = self.condition(true)?;
        self.expect("=>")?;
        let consequent = self.conjunct()?;
        self.expect(".")?;
        Ok(IntegrityConstraint { antecedent, consequent })
    }

    fn program(&mut self) -> Result<Program> {
        let mut prog = Program::default();
        let mut pending: Vec<(SourceSpan, ActionAtom)> = Vec::new();
        while *self.peek() != Tok::Eof {
            let span = self.span();
            if self.at_ident("action") {
                let def = self.action_decl()?;
                program::action_safety(&def).map_err(|var| Error::Unsafe { span: span.clone(), var })?;
                if prog.actions.contains_key(&def.name) {
                    return Err(Error::Invalid { span, msg: format!("action {} declared twice", def.name) });
                }
                prog.actions.insert(def.name.clone(), def);
            } else if self.at_ident("ic") {
                let ic = self.integrity_constraint()?;
                program::ic_safety(&ic).map_err(|var| Error::Unsafe { span, var })?;
                prog.integrity_constraints.push(ic);
            } else if self.at("{") {
                let c = self.action_constraint()?;
                program::constraint_safety(&c).map_err(|var| Error::Unsafe { span: span.clone(), var })?;
                pending.extend(c.blocked.iter().map(|a| (span.clone(), a.clone())));
                prog.action_constraints.push(c);
            } else {
                let r = self.rule()?;
                program::rule_safety(&r).map_err(|var| Error::Unsafe { span: span.clone(), var })?;
                pending.push((span.clone(), r.head.action.clone()));
                for a in r.body_pos.iter().chain(&r.body_neg) {
                    pending.push((span.clone(), a.action.clone()));
                }
                prog.rules.push(r);
            }
        }
        for (span, a) in &pending {
            prog.check_declared(a, span)?;
        }
        Ok(prog)
    }

    fn rv(&mut self) -> Result<RandomVariable> {
        let span = self.span();
        if !self.at_ident("rv") {
            return self.syntax(format!("expected `rv{{...}}`, found {}", self.describe()));
        }
        self.bump();
        let open = self.open("{")?;
        let mut entries: Vec<(Object, f64)> = Vec::new();
        if !self.at("}") {
            loop {
                let o = self.object()?;
                self.expect(":")?;
                let p = match self.bump() {
                    Tok::Int(i) => i as f64,
                    Tok::Real(r) => r,
                    _ => {
                        return Err(Error::Syntax {
                            span: self.span_of(self.pos - 1),
                            msg: "expected a probability".into(),
                        })
                    }
                };
                entries.push((o, p));
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.close("}", open)?;
        let rv = RandomVariable::new(entries);
        let report = crate::model::validate_random_variable(&rv);
        if !report.ok() {
            return Err(Error::Invalid {
                span,
                msg: format!("invalid random variable: {}", report.violations.join("; ")),
            });
        }
        Ok(rv)
    }

    fn state(&mut self) -> Result<ProbState> {
        let mut st = ProbState::new();
        while *self.peek() != Tok::Eof {
            let span = self.span();
            let call = self.ground_call()?;
            self.expect("=")?;
            let open = self.open("{")?;
            let mut rvs = Vec::new();
            if !self.at("}") {
                loop {
                    rvs.push(self.rv()?);
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.close("}", open)?;
            self.eat(";");
            if st.entries.contains_key(&call) {
                return Err(Error::Invalid { span, msg: format!("{call} defined twice") });
            }
            st.set(call, rvs).map_err(|e| Error::Invalid { span, msg: e.to_string() })?;
        }
        Ok(st)
    }

    fn ground_status_atom(&mut self) -> Result<GroundStatusAtom> {
        let span = self.span();
        let a = self.status_atom()?;
        let mut args = Vec::new();
        for t in a.action.args {
            match t {
                Term::Obj(o) => args.push(o),
                other => return Err(Error::Syntax { span, msg: format!("argument {other} is not ground") }),
            }
        }
        Ok(GroundStatusAtom { modality: a.modality, action: GroundAction { name: a.action.name, args } })
    }

    fn status_set(&mut self) -> Result<StatusSet> {
        let braced = self.at("{");
        let open = self.pos;
        if braced {
            self.open_bumped();
        }
        let mut ps = StatusSet::new();
        while !(self.at("}") || *self.peek() == Tok::Eof) {
            ps.insert(self.ground_status_atom()?);
            self.eat(",");
        }
        if braced {
            self.close("}", open)?;
        }
        if *self.peek() != Tok::Eof {
            return self.syntax(format!("unexpected {}", self.describe()));
        }
        Ok(ps)
    }

    fn kripke(&mut self) -> Result<Vec<(DetState, f64)>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            self.expect("#")?;
            match self.bump() {
                Tok::Int(_) => {}
                _ => {
                    return Err(Error::Syntax {
                        span: self.span_of(self.pos - 1),
                        msg: "expected a state number".into(),
                    })
                }
            }
            if !self.at_ident("p") {
                return self.syntax(format!("expected `p=`, found {}", self.describe()));
            }
            self.bump();
            self.expect("=")?;
            let p = match self.bump() {
                Tok::Int(i) => i as f64,
                Tok::Real(r) => r,
                _ => {
                    return Err(Error::Syntax {
                        span: self.span_of(self.pos - 1),
                        msg: "expected a probability".into(),
                    })
                }
            };
            let open = self.open("{")?;
            let mut st = DetState::new();
            if !self.at("}") {
                loop {
                    let call = self.ground_call()?;
                    self.expect("=")?;
                    let o = self.object()?;
                    st.insert(call, o);
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.close("}", open)?;
            out.push((st, p));
        }
        Ok(out)
    }

    fn finish(&mut self) -> Result<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.syntax(format!("unexpected {}", self.describe()))
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program> {
    parse_program_with(text, &ParseOptions::default())
}

pub fn parse_program_with(text: &str, opts: &ParseOptions) -> Result<Program> {
    Parser::new(text, opts)?.program()
}

pub fn parse_state(text: &str) -> Result<ProbState> {
    parse_state_with(text, &ParseOptions::default())
}

pub fn parse_state_with(text: &str, opts: &ParseOptions) -> Result<ProbState> {
    Parser::new(text, opts)?.state()
}

/// A status atom, or a condition with an optional `: [lo,hi] @ s` suffix.
pub fn parse_query(text: &str) -> Result<Query> {
    parse_query_with(text, &ParseOptions::default())
}

pub fn parse_query_with(text: &str, opts: &ParseOptions) -> Result<Query> {
    let mut p = Parser::new(text, opts)?;
    let q = if p.at_status_start() && !p.at_ident("not") {
        Query::Status(p.status_atom()?)
    } else {
        let condition = p.condition(false)?;
        let (annotation, strategy) =
            if p.at(":") { p.annotation_suffix()? } else { (Annotation::certain(), opts.default_strategy) };
        Query::Condition(AnnotatedCondition { condition, annotation, strategy })
    };
    p.finish()?;
    Ok(q)
}

pub fn parse_condition(text: &str) -> Result<CodeCallCondition> {
    let opts = ParseOptions::default();
    let mut p = Parser::new(text, &opts)?;
    let c = p.condition(true)?;
    p.finish()?;
    Ok(c)
}

pub fn parse_status_set(text: &str) -> Result<StatusSet> {
    parse_status_set_with(text, &ParseOptions::default())
}

pub fn parse_status_set_with(text: &str, opts: &ParseOptions) -> Result<StatusSet> {
    Parser::new(text, opts)?.status_set()
}

pub fn parse_ground_action(text: &str) -> Result<GroundAction> {
    let opts = ParseOptions::default();
    let mut p = Parser::new(text, &opts)?;
    let span = p.span();
    let a = p.action_atom()?;
    p.finish()?;
    let mut args = Vec::new();
    for t in a.args {
        match t {
            Term::Obj(o) => args.push(o),
            other => return Err(Error::Syntax { span, msg: format!("argument {other} is not ground") }),
        }
    }
    Ok(GroundAction { name: a.name, args })
}

pub fn parse_object(text: &str) -> Result<Object> {
    let opts = ParseOptions::default();
    let mut p = Parser::new(text, &opts)?;
    let o = p.object()?;
    p.finish()?;
    Ok(o)
}

/// Reads a dump of `#i p=<mass> {call=obj, ...}` lines.
pub fn parse_kripke_dump(text: &str) -> Result<Vec<(DetState, f64)>> {
    parse_kripke_dump_with(text, &ParseOptions::default())
}

pub fn parse_kripke_dump_with(text: &str, opts: &ParseOptions) -> Result<Vec<(DetState, f64)>> {
    Parser::new(text, opts)?.kripke()
}

/// Parses a bare rule (used by tests and the round-trip property).
pub fn parse_rule(text: &str) -> Result<Rule> {
    let opts = ParseOptions::default();
    let mut p = Parser::new(text, &opts)?;
    let r = p.rule()?;
    p.finish()?;
    Ok(r)
}

pub fn parse_term(text: &str) -> Result<Term> {
    let opts = ParseOptions::default();
    let mut p = Parser::new(text, &opts)?;
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_annotation_item(text: &str) -> Result<AnnotationItem> {
    let opts = ParseOptions::default();
    let mut p = Parser::new(text, &opts)?;
    let t = p.ann_item()?;
    p.finish()?;
    Ok(t)
}
