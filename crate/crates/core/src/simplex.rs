//! Two-phase dense tableau simplex over exact rationals (Bland's rule).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coef: Vec<(usize, Q)>,
    pub sense: Sense,
    pub rhs: Q,
}

/// `min cost·x` subject to the rows and `x ≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub ncols: usize,
    pub cost: Vec<Q>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Optimal { x: Vec<Q>, value: Q },
    Infeasible,
    Unbounded,
}

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Exact rational value of a finite double.
pub fn q_from_f64(v: f64) -> Q {
    Q::from_float(v).expect("finite value")
}

struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<Vec<Q>>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c].clone();
        for v in self.a[r].iter_mut() {
            if !v.is_zero() {
                *v = &*v / &p;
            }
        }
        self.rhs[r] = &self.rhs[r] / &p;
        let prow = self.a[r].clone();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows {
            if i == r || self.a[i][c].is_zero() {
                continue;
            }
            let f = self.a[i][c].clone();
            for j in 0..self.cols {
                if !prow[j].is_zero() {
                    let d = &f * &prow[j];
                    self.a[i][j] -= d;
                }
            }
            let d = &f * &prhs;
            self.rhs[i] -= d;
        }
        self.basis[r] = c;
    }

    /// Reduced costs for `cost` given the current basis.
    fn reduced(&self, cost: &[Q]) -> Vec<Q> {
        let mut d: Vec<Q> = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for j in 0..self.cols {
                if !self.a[i][j].is_zero() {
                    let t = cb * &self.a[i][j];
                    d[j] -= t;
                }
            }
        }
        d
    }

    /// Runs Bland's rule over the columns allowed by `allowed`.
    fn optimize(&mut self, cost: &[Q], allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            let d = self.reduced(cost);
            let enter = (0..self.cols).find(|&j| allowed(j) && d[j].is_negative());
            let Some(c) = enter else { return true };
            let mut best: Option<(usize, Q)> = None;
            for i in 0..self.rows {
                if self.a[i][c].is_positive() {
                    let ratio = &self.rhs[i] / &self.a[i][c];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Outcome {
    let m = lp.rows.len();
    let n = lp.ncols;
    let nslack = lp.rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let art0 = n + nslack;
    let cols = art0 + m;
    let mut a = vec![vec![Q::zero(); cols]; m];
    let mut rhs = vec![Q::zero(); m];
    let mut s = n;
    for (i, row) in lp.rows.iter().enumerate() {
        for (j, v) in &row.coef {
            a[i][*j] += v;
        }
        match row.sense {
            Sense::Eq => {}
            Sense::Ge => {
                a[i][s] = -Q::one();
                s += 1;
            }
            Sense::Le => {
                a[i][s] = Q::one();
                s += 1;
            }
        }
        rhs[i] = row.rhs.clone();
        if rhs[i].is_negative() {
            for v in a[i].iter_mut() {
                *v = -v.clone();
            }
            rhs[i] = -rhs[i].clone();
        }
        a[i][art0 + i] = Q::one();
    }
    let mut t = Tableau {
        rows: m,
        cols,
        a,
        rhs,
        basis: (art0..art0 + m).collect(),
    };
    let mut c1 = vec![Q::zero(); cols];
    for v in c1.iter_mut().skip(art0) {
        *v = Q::one();
    }
    t.optimize(&c1, &|_| true);
    let infeas: Q = (0..m)
        .filter(|&i| t.basis[i] >= art0)
        .map(|i| t.rhs[i].clone())
        .fold(Q::zero(), |acc, v| acc + v);
    if infeas.is_positive() {
        return Outcome::Infeasible;
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.rows {
        if t.basis[i] >= art0 {
            if let Some(c) = (0..art0).find(|&j| !t.a[i][j].is_zero()) {
                t.pivot(i, c);
                i += 1;
            } else {
                t.a.remove(i);
                t.rhs.remove(i);
                t.basis.remove(i);
                t.rows -= 1;
            }
        } else {
            i += 1;
        }
    }
    let mut c2 = vec![Q::zero(); cols];
    for (j, v) in lp.cost.iter().enumerate() {
        c2[j] = v.clone();
    }
    if !t.optimize(&c2, &|j| j < art0) {
        return Outcome::Unbounded;
    }
    let mut x = vec![Q::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[i].clone();
        }
    }
    let value = x
        .iter()
        .zip(&lp.cost)
        .fold(Q::zero(), |acc, (xi, ci)| acc + xi * ci);
    Outcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coef: &[(usize, i64)], sense: Sense, rhs: i64) -> Row {
        Row {
            coef: coef.iter().map(|&(j, v)| (j, q(v))).collect(),
            sense,
            rhs: q(rhs),
        }
    }

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let lp = LinearProgram {
            ncols: 2,
            cost: vec![q(-1), q(-1)],
            rows: vec![
                row(&[(0, 1), (1, 2)], Sense::Le, 4),
                row(&[(0, 3), (1, 1)], Sense::Le, 6),
            ],
        };
        match solve(&lp) {
            Outcome::Optimal { value, x } => {
                assert_eq!(value, Q::new(BigInt::from(-14), BigInt::from(5)));
                assert_eq!(x[0], Q::new(BigInt::from(8), BigInt::from(5)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let inf = LinearProgram {
            ncols: 1,
            cost: vec![q(1)],
            rows: vec![row(&[(0, 1)], Sense::Le, 1), row(&[(0, 1)], Sense::Ge, 2)],
        };
        assert!(matches!(solve(&inf), Outcome::Infeasible));
        let unb = LinearProgram {
            ncols: 1,
            cost: vec![q(-1)],
            rows: vec![row(&[(0, 1)], Sense::Ge, 1)],
        };
        assert!(matches!(solve(&unb), Outcome::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram {
            ncols: 2,
            cost: vec![q(1), q(2)],
            rows: vec![
                row(&[(0, 1), (1, 1)], Sense::Eq, 2),
                row(&[(0, 2), (1, 2)], Sense::Eq, 4),
            ],
        };
        match solve(&lp) {
            Outcome::Optimal { value, .. } => assert_eq!(value, q(2)),
            other => panic!("{other:?}"),
        }
    }
}
