//! Dense two-phase simplex for the tiny feasibility LPs built by the
//! condition checkers. Dantzig pricing with a Bland's-rule fallback once the
//! pivot count passes half the cap; exceeding the cap reports a degenerate
//! LP instead of cycling forever.

use std::fmt;

/// Pivot/reduced-cost tolerance.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimplexError {
    Infeasible,
    Unbounded,
    /// Pivot count exceeded the cap even under Bland's rule.
    IterationLimit,
}

impl fmt::Display for SimplexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimplexError::Infeasible => write!(f, "infeasible linear program"),
            SimplexError::Unbounded => write!(f, "unbounded linear program"),
            SimplexError::IterationLimit => write!(f, "degenerate LP"),
        }
    }
}

impl std::error::Error for SimplexError {}

#[derive(Debug, Clone)]
pub struct Solution {
    pub objective: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // m constraint rows, each of width total_cols + 1 (rhs last)
    obj: Vec<f64>,       // objective row, same width
    basis: Vec<usize>,   // basic variable per constraint row
    n_structural: usize,
    allowed: Vec<bool>, // columns that may enter the basis
    pivots_used: usize,
    max_pivots: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.obj.len()
    }

    fn rhs_col(&self) -> usize {
        self.width() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        debug_assert!(piv.abs() > EPS);
        let w = self.width();
        for j in 0..w {
            self.rows[row][j] /= piv;
        }
        self.rows[row][col] = 1.0;
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col];
            if factor != 0.0 {
                for j in 0..w {
                    self.rows[i][j] -= factor * self.rows[row][j];
                }
                self.rows[i][col] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for j in 0..w {
                self.obj[j] -= factor * self.rows[row][j];
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots_used += 1;
    }

    /// Entering column, or None at optimality. Dantzig pricing until half
    /// the pivot budget is spent, then Bland's rule.
    fn entering(&self) -> Option<usize> {
        let bland = self.pivots_used * 2 >= self.max_pivots;
        let mut best: Option<usize> = None;
        for j in 0..self.rhs_col() {
            if !self.allowed[j] || self.obj[j] >= -EPS {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                None => best = Some(j),
                Some(b) if self.obj[j] < self.obj[b] => best = Some(j),
                _ => {}
            }
        }
        best
    }

    /// Leaving row by minimum ratio; ties broken by the smallest basic
    /// variable index, which keeps Bland's rule honest.
    fn leaving(&self, col: usize) -> Option<usize> {
        let rhs = self.rhs_col();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows.len() {
            let a = self.rows[i][col];
            if a <= EPS {
                continue;
            }
            let ratio = self.rows[i][rhs] / a;
            match best {
                None => best = Some((i, ratio)),
                Some((bi, br)) => {
                    if ratio < br - EPS
                        || ((ratio - br).abs() <= EPS && self.basis[i] < self.basis[bi])
                    {
                        best = Some((i, ratio));
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn optimize(&mut self) -> Result<(), SimplexError> {
        while let Some(col) = self.entering() {
            if self.pivots_used >= self.max_pivots {
                return Err(SimplexError::IterationLimit);
            }
            let row = self.leaving(col).ok_or(SimplexError::Unbounded)?;
            self.pivot(row, col);
        }
        Ok(())
    }
}

/// Maximize `objective . x` over `x >= 0` subject to `constraints`.
pub fn maximize(
    objective: &[f64],
    constraints: &[Constraint],
    max_pivots: usize,
) -> Result<Solution, SimplexError> {
    let n = objective.len();
    let m = constraints.len();
    for c in constraints {
        assert_eq!(c.coeffs.len(), n, "constraint width mismatch");
    }

    // Normalize so every rhs is non-negative.
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut relations = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for c in constraints {
        if c.rhs < 0.0 {
            coeffs.push(c.coeffs.iter().map(|x| -x).collect());
            relations.push(match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            });
            rhs.push(-c.rhs);
        } else {
            coeffs.push(c.coeffs.clone());
            relations.push(c.relation);
            rhs.push(c.rhs);
        }
    }

    let n_slack = relations
        .iter()
        .filter(|r| matches!(r, Relation::Le | Relation::Ge))
        .count();
    let n_art = relations
        .iter()
        .filter(|r| matches!(r, Relation::Ge | Relation::Eq))
        .count();
    let total = n + n_slack + n_art;

    let mut rows = vec![vec![0.0; total + 1]; m];
    let mut basis = vec![0usize; m];
    let mut art_cols = Vec::with_capacity(n_art);
    let mut next_slack = n;
    let mut next_art = n + n_slack;
    for i in 0..m {
        rows[i][..n].copy_from_slice(&coeffs[i]);
        rows[i][total] = rhs[i];
        match relations[i] {
            Relation::Le => {
                rows[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                rows[i][next_slack] = -1.0;
                next_slack += 1;
                rows[i][next_art] = 1.0;
                basis[i] = next_art;
                art_cols.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                rows[i][next_art] = 1.0;
                basis[i] = next_art;
                art_cols.push(next_art);
                next_art += 1;
            }
        }
    }

    let mut t = Tableau {
        rows,
        obj: vec![0.0; total + 1],
        basis,
        n_structural: n,
        allowed: vec![true; total],
        pivots_used: 0,
        max_pivots: max_pivots.max(1),
    };

    // Phase 1: minimize the sum of artificials (as maximize of its negation;
    // the objective row stores z - c.x, so artificials get +1 and the basic
    // rows are priced out).
    if n_art > 0 {
        for &j in &art_cols {
            t.obj[j] = 1.0;
        }
        for i in 0..m {
            if art_cols.contains(&t.basis[i]) {
                let w = t.width();
                for j in 0..w {
                    t.obj[j] -= t.rows[i][j];
                }
            }
        }
        t.optimize()?;
        let infeasibility = -t.obj[t.rhs_col()];
        if infeasibility > 1e-7 {
            return Err(SimplexError::Infeasible);
        }
        // Drive any zero-valued artificial out of the basis where possible.
        for i in 0..m {
            if !art_cols.contains(&t.basis[i]) {
                continue;
            }
            if let Some(col) = (0..n + n_slack).find(|&j| t.rows[i][j].abs() > EPS) {
                t.pivot(i, col);
            }
        }
        for &j in &art_cols {
            t.allowed[j] = false;
        }
    }

    // Phase 2: the real objective.
    let rhs_col = t.rhs_col();
    t.obj.fill(0.0);
    for (slot, c) in t.obj.iter_mut().zip(objective) {
        *slot = -c;
    }
    for i in 0..m {
        let b = t.basis[i];
        let factor = t.obj[b];
        if factor != 0.0 {
            for j in 0..=rhs_col {
                t.obj[j] -= factor * t.rows[i][j];
            }
            t.obj[b] = 0.0;
        }
    }
    t.optimize()?;

    let mut x = vec![0.0; t.n_structural];
    for i in 0..m {
        if t.basis[i] < t.n_structural {
            x[t.basis[i]] = t.rows[i][rhs_col];
        }
    }
    Ok(Solution {
        objective: t.obj[rhs_col],
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(coeffs: &[f64], rhs: f64) -> Constraint {
        Constraint::new(coeffs.to_vec(), Relation::Le, rhs)
    }

    fn ge(coeffs: &[f64], rhs: f64) -> Constraint {
        Constraint::new(coeffs.to_vec(), Relation::Ge, rhs)
    }

    fn eq(coeffs: &[f64], rhs: f64) -> Constraint {
        Constraint::new(coeffs.to_vec(), Relation::Eq, rhs)
    }

    #[test]
    fn basic_bounded_maximization() {
        let sol = maximize(
            &[3.0, 2.0],
            &[
                le(&[1.0, 1.0], 4.0),
                le(&[1.0, 0.0], 2.0),
                le(&[0.0, 1.0], 3.0),
            ],
            1000,
        )
        .unwrap();
        assert!((sol.objective - 10.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ge_constraints_need_phase_one() {
        let sol = maximize(&[1.0], &[ge(&[1.0], 1.0), le(&[1.0], 3.0)], 1000).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn minimization_via_negated_objective() {
        // minimize x subject to x >= 1.5 is maximize -x
        let sol = maximize(&[-1.0], &[ge(&[1.0], 1.5), le(&[1.0], 9.0)], 1000).unwrap();
        assert!((sol.objective + 1.5).abs() < 1e-9);
        assert!((sol.x[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn equality_constraints() {
        let sol = maximize(
            &[1.0, 1.0],
            &[eq(&[1.0, 1.0], 2.0), le(&[1.0, 0.0], 1.5)],
            1000,
        )
        .unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // x - y <= -1 with x,y <= 2: maximize x + y -> x=1? no: y=2, x<=1
        let sol = maximize(
            &[1.0, 1.0],
            &[
                le(&[1.0, -1.0], -1.0),
                le(&[1.0, 0.0], 2.0),
                le(&[0.0, 1.0], 2.0),
            ],
            1000,
        )
        .unwrap();
        assert!(
            (sol.objective - 3.0).abs() < 1e-9,
            "objective {}",
            sol.objective
        );
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let err = maximize(&[1.0], &[ge(&[1.0], 2.0), le(&[1.0], 1.0)], 1000).unwrap_err();
        assert_eq!(err, SimplexError::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let err = maximize(&[1.0, 0.0], &[le(&[0.0, 1.0], 1.0)], 1000).unwrap_err();
        assert_eq!(err, SimplexError::Unbounded);
    }

    #[test]
    fn beale_degenerate_example_terminates() {
        // A classic cycling-prone instance; optimum is 1/20.
        let sol = maximize(
            &[0.75, -150.0, 0.02, -6.0],
            &[
                le(&[0.25, -60.0, -1.0 / 25.0, 9.0], 0.0),
                le(&[0.5, -90.0, -1.0 / 50.0, 3.0], 0.0),
                le(&[0.0, 0.0, 1.0, 0.0], 1.0),
            ],
            1000,
        )
        .unwrap();
        assert!(
            (sol.objective - 0.05).abs() < 1e-9,
            "objective {}",
            sol.objective
        );
    }

    #[test]
    fn iteration_cap_reports_degenerate() {
        let err = maximize(
            &[3.0, 2.0],
            &[le(&[1.0, 1.0], 4.0), le(&[1.0, 0.0], 2.0)],
            1, // absurdly small cap
        )
        .unwrap_err();
        assert_eq!(err, SimplexError::IterationLimit);
    }

    #[test]
    fn degenerate_equalities_pivot_artificials_out() {
        // Redundant equality pair: x + y = 2 stated twice.
        let sol = maximize(
            &[1.0, 0.0],
            &[
                eq(&[1.0, 1.0], 2.0),
                eq(&[1.0, 1.0], 2.0),
                le(&[1.0, 0.0], 1.0),
            ],
            1000,
        )
        .unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }
}
