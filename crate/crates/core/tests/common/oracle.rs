//! Vertex enumeration for small bounded linear programs.

use nalgebra::{DMatrix, DVector};

use pap_core::lp::{LpProblem, Relation};

const RANK_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-10;

/// Work limit on candidate active sets; beyond it the oracle declines.
pub const MAX_CANDIDATES: u64 = 5_000_000;

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// Minimum of `lp` over its vertices, `Some(None)` when infeasible, `None` when the
/// problem has unbounded variables or too many candidate active sets.
///
/// The equality rows are solved once as `x = x0 + N z`; each vertex is then fixed by
/// `dim z` active inequality rows or bounds.
pub fn vertex_minimum(lp: &LpProblem) -> Option<Option<f64>> {
    let n = lp.vars.len();
    if lp.bounds.iter().any(|(l, u)| !l.is_finite() || !u.is_finite()) {
        return None;
    }
    let eq: Vec<_> = lp.constraints.iter().filter(|c| c.rel == Relation::Eq).collect();
    let e = DMatrix::from_fn(eq.len(), n, |i, j| eq[i].coeffs[j]);
    let b = DVector::from_iterator(eq.len(), eq.iter().map(|c| c.rhs));

    let (x0, null) = if eq.is_empty() {
        (DVector::zeros(n), DMatrix::identity(n, n))
    } else {
        let x0 = e.clone().pseudo_inverse(RANK_TOL).ok()? * &b;
        if (&e * &x0 - &b).amax() > FEAS_TOL {
            return Some(None);
        }
        let gram = e.transpose() * &e;
        let eig = gram.symmetric_eigen();
        let cols: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k].abs() <= RANK_TOL).collect();
        (x0, DMatrix::from_fn(n, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])]))
    };
    let d = null.ncols();

    // Each inequality row or bound in z-space: a·z (rel) rhs.
    let mut pool: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    let mut push = |row: &[f64], rel: Relation, rhs: f64| {
        let a = DVector::from_column_slice(row);
        pool.push(((null.transpose() * &a).iter().copied().collect(), rel, rhs - a.dot(&x0)));
    };
    for c in lp.constraints.iter().filter(|c| c.rel != Relation::Eq) {
        push(&c.coeffs, c.rel, c.rhs);
    }
    for (j, (l, u)) in lp.bounds.iter().enumerate() {
        let mut unit = vec![0.0; n];
        unit[j] = 1.0;
        push(&unit, Relation::Ge, *l);
        push(&unit, Relation::Le, *u);
    }
    if d > MAX_DIM || binomial(pool.len(), d) > MAX_CANDIDATES {
        return None;
    }
    let obj = DVector::from_column_slice(&lp.objective);
    let c0 = obj.dot(&x0);
    let cz: Vec<f64> = (null.transpose() * &obj).iter().copied().collect();

    let feasible = |z: &[f64]| {
        pool.iter().all(|(a, rel, rhs)| rel.holds(a.iter().zip(z).map(|(x, y)| x * y).sum(), *rhs, FEAS_TOL))
    };
    let value = |z: &[f64]| c0 + cz.iter().zip(z).map(|(x, y)| x * y).sum::<f64>();
    let mut best: Option<f64> = None;
    if d == 0 {
        return Some(feasible(&[]).then(|| value(&[])));
    }
    let mut chosen = Vec::with_capacity(d);
    let mut z = [0.0; MAX_DIM];
    combos(pool.len(), d, 0, &mut chosen, &mut |idx| {
        if solve_square(d, |i, j| pool[idx[i]].0[j], |i| pool[idx[i]].2, &mut z) && feasible(&z[..d]) {
            let v = value(&z[..d]);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    });
    Some(best)
}

const MAX_DIM: usize = 16;

/// Gaussian elimination with partial pivoting; false when the system is singular.
fn solve_square(d: usize, a: impl Fn(usize, usize) -> f64, b: impl Fn(usize) -> f64, out: &mut [f64; MAX_DIM]) -> bool {
    let mut m = [[0.0; MAX_DIM + 1]; MAX_DIM];
    for (i, row) in m.iter_mut().enumerate().take(d) {
        for (j, v) in row.iter_mut().enumerate().take(d) {
            *v = a(i, j);
        }
        row[d] = b(i);
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        if m[piv][col].abs() <= PIVOT_TOL {
            return false;
        }
        m.swap(col, piv);
        let pivot = m[col];
        for row in m.iter_mut().take(d).skip(col + 1) {
            let f = row[col] / pivot[col];
            if f != 0.0 {
                for (v, p) in row[col..=d].iter_mut().zip(&pivot[col..=d]) {
                    *v -= f * p;
                }
            }
        }
    }
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| m[i][k] * out[k]).sum();
        out[i] = (m[i][d] - s) / m[i][i];
    }
    true
}

fn combos(n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..n {
        if n - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        combos(n, k, i + 1, chosen, f);
        chosen.pop();
    }
}
