//! Exact rational linear programming: dense two-phase simplex with Bland's
//! rule. Problems here are small (tens of columns), so no sparsity tricks.

use num_traits::{One, Signed, Zero};

use crate::poly::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpResult {
    Infeasible,
    /// Objective unbounded below: `point + t * ray` is feasible for all
    /// `t >= 0` and the objective decreases along `ray`.
    Unbounded { point: Vec<Rational>, ray: Vec<Rational> },
    Optimal { point: Vec<Rational>, value: Rational },
}

/// Row relation for [`minimize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowRel {
    /// `a . x + b >= 0`
    Ge,
    /// `a . x + b = 0`
    Eq,
}

struct Tableau {
    // rows: constraint rows then the objective row last; last column is rhs
    t: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            *v /= &p;
        }
        let row = self.t[r].clone();
        for (i, other) in self.t.iter_mut().enumerate() {
            if i == r || other[c].is_zero() {
                continue;
            }
            let f = other[c].clone();
            for (v, rv) in other.iter_mut().zip(&row) {
                if !rv.is_zero() {
                    *v -= &f * rv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Run simplex on the objective row over the allowed columns. Returns
    /// the entering column that proved unboundedness, if any.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> Option<usize> {
        let m = self.basis.len();
        let rhs = self.cols;
        loop {
            // Bland: lowest-index column with negative reduced cost
            let obj = &self.t[m];
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && obj[j].is_negative()) else {
                return None;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..m {
                let a = &self.t[i][c];
                if a.is_positive() {
                    let ratio = &self.t[i][rhs] / a;
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return Some(c),
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn solution(&self, n: usize) -> Vec<Rational> {
        let mut y = vec![Rational::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                y[b] = self.t[i][self.cols].clone();
            }
        }
        y
    }
}

/// Minimise `c . y` subject to `A y = b`, `y >= 0`.
pub fn standard_form(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> LpResult {
    let m = a.len();
    let n = c.len();
    let cols = n + m;
    let mut t = Vec::with_capacity(m + 1);
    for (row, bi) in a.iter().zip(b) {
        assert_eq!(row.len(), n, "row width");
        let flip = bi.is_negative();
        let mut r: Vec<Rational> = row.iter().map(|v| if flip { -v } else { v.clone() }).collect();
        r.extend((0..m).map(|_| Rational::zero()));
        r.push(if flip { -bi } else { bi.clone() });
        t.push(r);
    }
    for i in 0..m {
        t[i][n + i] = Rational::one();
    }
    // phase 1 objective: sum of artificials, expressed in non-basic terms
    let mut obj = vec![Rational::zero(); cols + 1];
    for row in &t {
        for j in 0..n {
            obj[j] -= &row[j];
        }
        obj[cols] -= &row[cols];
    }
    t.push(obj);
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        cols,
    };
    tab.run(&|_| true);
    if !tab.t[m][cols].is_zero() {
        return LpResult::Infeasible;
    }
    // drive artificials out of the basis; rows that cannot be are redundant
    let mut i = 0;
    while i < tab.basis.len() {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !tab.t[i][j].is_zero()) {
                tab.pivot(i, j);
            } else {
                tab.t.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    let m = tab.basis.len();
    // phase 2 objective row
    let mut obj = vec![Rational::zero(); cols + 1];
    for j in 0..n {
        obj[j] = c[j].clone();
    }
    for (i, &bcol) in tab.basis.iter().enumerate() {
        let cb = obj[bcol].clone();
        if cb.is_zero() {
            continue;
        }
        for j in 0..=cols {
            let v = &cb * &tab.t[i][j];
            obj[j] -= v;
        }
    }
    tab.t[m] = obj;
    let entering = tab.run(&|j| j < n);
    let point = tab.solution(n);
    match entering {
        Some(c_in) => {
            let mut ray = vec![Rational::zero(); n];
            ray[c_in] = Rational::one();
            for (i, &bcol) in tab.basis.iter().enumerate() {
                if bcol < n {
                    ray[bcol] = -tab.t[i][c_in].clone();
                }
            }
            LpResult::Unbounded { point, ray }
        }
        None => {
            let value = point.iter().zip(c).fold(Rational::zero(), |acc, (y, ci)| acc + y * ci);
            LpResult::Optimal { point, value }
        }
    }
}

/// A point `y >= 0` with `A y = b`, if one exists.
pub fn feasible_nonneg(a: &[Vec<Rational>], b: &[Rational], n: usize) -> Option<Vec<Rational>> {
    match standard_form(a, b, &vec![Rational::zero(); n]) {
        LpResult::Optimal { point, .. } => Some(point),
        LpResult::Unbounded { point, .. } => Some(point),
        LpResult::Infeasible => None,
    }
}

/// Minimise `c . x + c0` over free `x` subject to rows `a . x + b (>= | =) 0`.
pub fn minimize(c: &[Rational], c0: &Rational, rows: &[(Vec<Rational>, Rational, RowRel)]) -> LpResult {
    let n = c.len();
    let slacks: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.2 == RowRel::Ge)
        .map(|(i, _)| i)
        .collect();
    let width = 2 * n + slacks.len();
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    for (i, (coef, konst, _)) in rows.iter().enumerate() {
        let mut row = vec![Rational::zero(); width];
        for j in 0..n {
            row[j] = coef[j].clone();
            row[n + j] = -coef[j].clone();
        }
        if let Some(k) = slacks.iter().position(|&s| s == i) {
            row[2 * n + k] = -Rational::one();
        }
        a.push(row);
        b.push(-konst.clone());
    }
    let mut obj = vec![Rational::zero(); width];
    for j in 0..n {
        obj[j] = c[j].clone();
        obj[n + j] = -c[j].clone();
    }
    let fold = |y: &[Rational]| -> Vec<Rational> { (0..n).map(|j| &y[j] - &y[n + j]).collect() };
    match standard_form(&a, &b, &obj) {
        LpResult::Infeasible => LpResult::Infeasible,
        LpResult::Unbounded { point, ray } => LpResult::Unbounded {
            point: fold(&point),
            ray: fold(&ray),
        },
        LpResult::Optimal { point, value } => LpResult::Optimal {
            point: fold(&point),
            value: value + c0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, rat};

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn textbook_minimum() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6  ->  (8/5, 6/5), value -14/5
        let rows = vec![(v(&[-1, -2]), int(4), RowRel::Ge), (v(&[-3, -1]), int(6), RowRel::Ge),
            (v(&[1, 0]), int(0), RowRel::Ge), (v(&[0, 1]), int(0), RowRel::Ge)];
        match minimize(&v(&[-1, -1]), &int(0), &rows) {
            LpResult::Optimal { point, value } => {
                assert_eq!(point, vec![rat(8, 5), rat(6, 5)]);
                assert_eq!(value, rat(-14, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let rows = vec![(v(&[1]), int(-3), RowRel::Ge), (v(&[-1]), int(1), RowRel::Ge)];
        assert_eq!(minimize(&v(&[1]), &int(0), &rows), LpResult::Infeasible);
        let rows = vec![(v(&[-1]), int(5), RowRel::Ge)];
        match minimize(&v(&[1]), &int(0), &rows) {
            LpResult::Unbounded { point, ray } => {
                assert!(&point[0] <= &int(5));
                assert!(ray[0].is_negative());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equalities_and_degenerate_rows() {
        // x + y = 2, 2x + 2y = 4 (redundant), x - y = 0
        let a = vec![v(&[1, 1]), v(&[2, 2]), v(&[1, -1])];
        let b = v(&[2, 4, 0]);
        assert_eq!(feasible_nonneg(&a, &b, 2), Some(v(&[1, 1])));
        let a = vec![v(&[1, 1])];
        assert_eq!(feasible_nonneg(&a, &v(&[-1]), 2), None);
    }

    // brute force over vertices in 2-D for random small problems
    #[test]
    fn agrees_with_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let mut rows: Vec<(Vec<Rational>, Rational, RowRel)> = (0..rng.gen_range(1..5))
                .map(|_| (v(&[rng.gen_range(-3..=3), rng.gen_range(-3..=3)]), int(rng.gen_range(-5..=5)), RowRel::Ge))
                .collect();
            // bounding box keeps the oracle finite
            for (a, b) in [([1, 0], 10), ([-1, 0], 10), ([0, 1], 10), ([0, -1], 10)] {
                rows.push((v(&a), int(b), RowRel::Ge));
            }
            let c = v(&[rng.gen_range(-3..=3), rng.gen_range(-3..=3)]);
            let feasible = |p: &[Rational]| {
                rows.iter().all(|(a, b, _)| &a[0] * &p[0] + &a[1] * &p[1] + b >= Rational::zero())
            };
            let mut best: Option<Rational> = None;
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    let (a1, b1, _) = &rows[i];
                    let (a2, b2, _) = &rows[j];
                    let det = &a1[0] * &a2[1] - &a1[1] * &a2[0];
                    if det.is_zero() {
                        continue;
                    }
                    let x = (-b1 * &a2[1] + b2 * &a1[1]) / &det;
                    let y = (-&a1[0] * b2 + &a2[0] * b1) / &det;
                    let p = [x, y];
                    if feasible(&p) {
                        let val = &c[0] * &p[0] + &c[1] * &p[1];
                        if best.as_ref().map_or(true, |b| val < *b) {
                            best = Some(val);
                        }
                    }
                }
            }
            match minimize(&c, &int(0), &rows) {
                LpResult::Infeasible => assert!(best.is_none()),
                LpResult::Optimal { point, value } => {
                    assert!(feasible(&point));
                    assert_eq!(Some(value), best);
                }
                LpResult::Unbounded { .. } => panic!("bounded problem reported unbounded"),
            }
        }
    }
}
