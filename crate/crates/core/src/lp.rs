//! Small dense linear programs: a two-phase simplex with Bland's rule and a plain-text export.

use std::fmt;

use crate::error::{Error, Result};

/// Feasibility tolerance.
pub const LP_TOL: f64 = 1e-7;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

/// Minimize `objective · x` subject to the constraints and `lo ≤ x ≤ hi`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub vars: Vec<String>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Lower bounds must be finite; upper bounds may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn new(vars: Vec<String>) -> Self {
        let n = vars.len();
        LpProblem { vars, objective: vec![0.0; n], constraints: vec![], bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn add(&mut self, label: impl Into<String>, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        self.constraints.push(Constraint { label: label.into(), coeffs, rel, rhs });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        if self.objective.len() != n || self.bounds.len() != n {
            return Err(Error::Lp("objective or bounds length differs from the variable count".into()));
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::Lp(format!(
                    "row {} has {} coefficients for {} variables",
                    c.label,
                    c.coeffs.len(),
                    n
                )));
            }
        }
        if self.bounds.iter().any(|(l, u)| !l.is_finite() || l > u) {
            return Err(Error::Lp("invalid variable bounds".into()));
        }
        Ok(())
    }

    /// Whether `x` satisfies every row and bound within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|c| c.rel.holds(dot(&c.coeffs, x), c.rhs, tol))
            && self.bounds.iter().zip(x).all(|((l, u), v)| *v >= l - tol && *v <= u + tol)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn linear(coeffs: &[f64], vars: &[String]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .zip(vars)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, v)| format!("{}{} {}", if *c < 0.0 { "-" } else { "+" }, num(c.abs()), v))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" ")
    }
}

impl fmt::Display for LpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "min: {};", linear(&self.objective, &self.vars))?;
        for c in &self.constraints {
            writeln!(f, "{}: {} {} {};", c.label, linear(&c.coeffs, &self.vars), c.rel.symbol(), num(c.rhs))?;
        }
        for (v, (l, u)) in self.vars.iter().zip(&self.bounds) {
            if u.is_finite() {
                writeln!(f, "bounds: {} <= {} <= {};", num(*l), v, num(*u))?;
            } else {
                writeln!(f, "bounds: {} >= {};", v, num(*l))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    /// Rows `0..m` are constraints, row `m` is the reduced-cost row; the last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= pv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&prow) {
                        *v -= f * p;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Loads `cost` into the objective row, expressed in terms of the current basis.
    fn set_cost(&mut self, cost: &[f64]) {
        let m = self.m();
        let mut z = cost.to_vec();
        z.push(0.0);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (v, a) in z.iter_mut().zip(&self.t[i]) {
                    *v -= cb * a;
                }
            }
        }
        self.t[m] = z;
    }

    /// Bland's rule minimization over columns for which `allowed` holds.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool, iterations: &mut usize) -> Result<bool> {
        let m = self.m();
        loop {
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && self.t[m][j] < -1e-10) else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > 1e-10 {
                    let ratio = self.t[i][self.cols] / a;
                    let better = match best {
                        None => true,
                        Some((r, _, b)) => ratio < r - 1e-12 || (ratio <= r + 1e-12 && self.basis[i] < b),
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, r, _)) = best else { return Ok(false) };
            self.pivot(r, c);
            *iterations += 1;
            if *iterations > MAX_ITERATIONS {
                return Err(Error::Lp(format!("iteration cap of {MAX_ITERATIONS} exceeded")));
            }
        }
    }
}

/// Dense two-phase simplex.
pub fn solve_lp(lp: &LpProblem) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.vars.len();
    // Shift x = lo + y with y >= 0; finite upper bounds become rows.
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    let mut rows: Vec<(Vec<f64>, Relation, f64)> =
        lp.constraints.iter().map(|c| (c.coeffs.clone(), c.rel, c.rhs - dot(&c.coeffs, &lo))).collect();
    for (j, (l, u)) in lp.bounds.iter().enumerate() {
        if u.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            rows.push((a, Relation::Le, u - l));
        }
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|v| *v = -*v);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + n_slack + n_art;
    let mut t = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (n, n + n_slack);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(coeffs);
        t[i][cols] = *rhs;
        match rel {
            Relation::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Relation::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };
    let mut iterations = 0;
    let art_start = n + n_slack;
    if n_art > 0 {
        let cost: Vec<f64> = (0..cols).map(|j| if j >= art_start { 1.0 } else { 0.0 }).collect();
        tab.set_cost(&cost);
        tab.run(&|_| true, &mut iterations)?;
        if -tab.t[m][cols] > LP_TOL {
            return Ok(LpSolution { status: LpStatus::Infeasible, objective: f64::NAN, x: vec![] });
        }
        // Drive remaining artificials out of the basis or drop their redundant rows.
        let mut i = 0;
        while i < tab.m() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| tab.t[i][j].abs() > 1e-9) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    let mut cost = lp.objective.clone();
    cost.resize(cols, 0.0);
    tab.set_cost(&cost);
    if !tab.run(&|j| j < art_start, &mut iterations)? {
        return Ok(LpSolution { status: LpStatus::Unbounded, objective: f64::NEG_INFINITY, x: vec![] });
    }
    let mut x = lo.clone();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.t[i][cols];
        }
    }
    Ok(LpSolution { status: LpStatus::Optimal, objective: lp.objective_at(&x), x })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var() -> LpProblem {
        let mut lp = LpProblem::new(vec!["x".into()]);
        lp.objective = vec![1.0];
        lp
    }

    #[test]
    fn lower_bound_row() {
        let mut lp = one_var();
        lp.add("a", vec![1.0], Relation::Ge, 0.3);
        lp.add("b", vec![1.0], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.3).abs() < 1e-9);
    }

    #[test]
    fn infeasible_pair() {
        let mut lp = one_var();
        lp.add("a", vec![1.0], Relation::Ge, 2.0);
        lp.add("b", vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut lp = one_var();
        lp.objective = vec![-1.0];
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_with_redundant_row() {
        let mut lp = LpProblem::new(vec!["x".into(), "y".into()]);
        lp.objective = vec![1.0, 2.0];
        lp.bounds = vec![(0.0, 1.0); 2];
        lp.add("k", vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add("k2", vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!(lp.is_feasible(&s.x, 1e-9));
    }

    #[test]
    fn shifted_bounds_and_negative_rhs() {
        let mut lp = LpProblem::new(vec!["x".into()]);
        lp.objective = vec![-1.0];
        lp.bounds = vec![(-2.0, 5.0)];
        lp.add("a", vec![-1.0], Relation::Ge, -3.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn export_format() {
        let mut lp = one_var();
        lp.bounds = vec![(0.0, 1.0)];
        lp.add("K", vec![1.0], Relation::Eq, 1.0);
        assert_eq!(lp.to_string(), "min: +1 x;\nK: +1 x = 1;\nbounds: 0 <= x <= 1;\n");
    }
}
