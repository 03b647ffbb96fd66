//! Dense two-phase simplex with Bland's rule.
//!
//! Sized for the handful of variables and constraints that show up in
//! linear minimization over polytopes, the separation problem of the cone
//! estimator and the selection problem of the VI certificate. Anything
//! larger should use a real LP solver.

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Free,
    NonNegative,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        value: f64,
    },
    Infeasible,
    Unbounded,
    /// Pivot budget exhausted; should not happen with Bland's rule but
    /// numerical noise can in principle defeat it.
    Stalled,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    kinds: Vec<VarKind>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, kinds: Vec<VarKind>) -> Self {
        assert_eq!(objective.len(), kinds.len());
        LinearProgram {
            objective,
            kinds,
            rows: Vec::new(),
        }
    }

    pub fn free(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self::new(objective, vec![VarKind::Free; n])
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len());
        self.rows.push((coeffs, rel, rhs));
        self
    }

    pub fn minimize(&self) -> LpOutcome {
        solve(self, false)
    }

    pub fn maximize(&self) -> LpOutcome {
        solve(self, true)
    }
}

struct Tableau {
    t: Vec<Vec<f64>>, // m rows, last column is rhs
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        rc.push(0.0);
        for (i, row) in self.t.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (r, v) in rc.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
        rc
    }

    /// Runs simplex iterations for `cost` (minimization). Columns with
    /// `allowed[j] == false` never enter. Returns false on unboundedness.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), LpOutcome> {
        let mut rc = self.reduced_costs(cost);
        let cost_scale = cost.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for _ in 0..MAX_PIVOTS {
            let enter = (0..self.ncols).find(|&j| allowed[j] && rc[j] < -PIVOT_EPS * cost_scale);
            let Some(c) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[c];
                if a > PIVOT_EPS {
                    let ratio = row[self.ncols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 * lr.abs().max(1.0)
                                || (ratio <= lr + 1e-12 * lr.abs().max(1.0) && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpOutcome::Unbounded);
            };
            self.pivot(r, c);
            let f = rc[c];
            let prow = &self.t[r];
            for (v, pv) in rc.iter_mut().zip(prow) {
                *v -= f * pv;
            }
            rc[c] = 0.0;
        }
        Err(LpOutcome::Stalled)
    }
}

fn solve(lp: &LinearProgram, maximize: bool) -> LpOutcome {
    let n = lp.num_vars();
    // expanded structural columns
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
    let mut ns = 0;
    for k in &lp.kinds {
        match k {
            VarKind::NonNegative => {
                col_of.push((ns, None));
                ns += 1;
            }
            VarKind::Free => {
                col_of.push((ns, Some(ns + 1)));
                ns += 2;
            }
        }
    }
    let m = lp.rows.len();
    // normalized rows with nonnegative rhs
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(m);
    for (coeffs, rel, rhs) in &lp.rows {
        let mut dense = vec![0.0; ns];
        for (j, &a) in coeffs.iter().enumerate() {
            let (p, q) = col_of[j];
            dense[p] += a;
            if let Some(q) = q {
                dense[q] -= a;
            }
        }
        let s = dense.iter().fold(rhs.abs(), |mx, v| mx.max(v.abs()));
        let s = if s > 0.0 { s } else { 1.0 };
        let mut rhs = rhs / s;
        for v in dense.iter_mut() {
            *v /= s;
        }
        let mut rel = *rel;
        if rhs < 0.0 {
            rhs = -rhs;
            for v in dense.iter_mut() {
                *v = -*v;
            }
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push((dense, rel, rhs));
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let ncols = ns + n_slack + n_art;
    let mut t = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut is_art = vec![false; ncols];
    let (mut si, mut ai) = (ns, ns + n_slack);
    for (dense, rel, rhs) in &rows {
        let mut row = vec![0.0; ncols + 1];
        row[..ns].copy_from_slice(dense);
        row[ncols] = *rhs;
        match rel {
            Relation::Le => {
                row[si] = 1.0;
                basis.push(si);
                si += 1;
            }
            Relation::Ge => {
                row[si] = -1.0;
                si += 1;
                row[ai] = 1.0;
                is_art[ai] = true;
                basis.push(ai);
                ai += 1;
            }
            Relation::Eq => {
                row[ai] = 1.0;
                is_art[ai] = true;
                basis.push(ai);
                ai += 1;
            }
        }
        t.push(row);
    }
    let mut tab = Tableau { t, basis, ncols };

    if n_art > 0 {
        let cost1: Vec<f64> = (0..ncols).map(|j| if is_art[j] { 1.0 } else { 0.0 }).collect();
        let allowed = vec![true; ncols];
        if let Err(e) = tab.run(&cost1, &allowed) {
            // phase one is bounded below by zero
            return e;
        }
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| is_art[b])
            .map(|(i, _)| tab.t[i][ncols])
            .sum();
        if infeas > 1e-9 {
            return LpOutcome::Infeasible;
        }
        // drive remaining artificials out of the basis
        let mut i = 0;
        while i < tab.t.len() {
            if is_art[tab.basis[i]] {
                let c = (0..ncols).find(|&j| !is_art[j] && tab.t[i][j].abs() > 1e-9);
                match c {
                    Some(c) => {
                        tab.pivot(i, c);
                        i += 1;
                    }
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let sign = if maximize { -1.0 } else { 1.0 };
    let mut cost2 = vec![0.0; ncols];
    for (j, &c) in lp.objective.iter().enumerate() {
        let (p, q) = col_of[j];
        cost2[p] += sign * c;
        if let Some(q) = q {
            cost2[q] -= sign * c;
        }
    }
    let allowed: Vec<bool> = (0..ncols).map(|j| !is_art[j]).collect();
    if let Err(e) = tab.run(&cost2, &allowed) {
        return e;
    }
    let mut xs = vec![0.0; ncols];
    for (i, &b) in tab.basis.iter().enumerate() {
        xs[b] = tab.t[i][ncols];
    }
    let x: Vec<f64> = col_of.iter().map(|&(p, q)| xs[p] - q.map_or(0.0, |q| xs[q])).collect();
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18, x, y >= 0 -> 36 at (2, 6)
        let mut lp = LinearProgram::new(vec![3.0, 5.0], vec![VarKind::NonNegative; 2]);
        lp.add_row(vec![1.0, 0.0], Relation::Le, 4.0)
            .add_row(vec![0.0, 2.0], Relation::Le, 12.0)
            .add_row(vec![3.0, 2.0], Relation::Le, 18.0);
        let (x, v) = lp.maximize().optimal().unwrap();
        assert!((v - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y, x - y = -3, x >= -5 (free vars), y <= 10
        let mut lp = LinearProgram::free(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, -1.0], Relation::Eq, -3.0)
            .add_row(vec![1.0, 0.0], Relation::Ge, -5.0)
            .add_row(vec![0.0, 1.0], Relation::Le, 10.0);
        let (x, v) = lp.minimize().optimal().unwrap();
        assert!((x[0] + 5.0).abs() < 1e-9 && (x[1] + 2.0).abs() < 1e-9);
        assert!((v + 7.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::free(vec![1.0]);
        lp.add_row(vec![1.0], Relation::Le, 0.0)
            .add_row(vec![1.0], Relation::Ge, 1.0);
        assert_eq!(lp.minimize(), LpOutcome::Infeasible);
        let mut lp = LinearProgram::free(vec![1.0]);
        lp.add_row(vec![1.0], Relation::Le, 0.0);
        assert_eq!(lp.minimize(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // three constraints through the optimum (1,0) in the plane
        let mut lp = LinearProgram::free(vec![-1.0, -1.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Le, 1.0)
            .add_row(vec![1.0, 0.0], Relation::Le, 1.0)
            .add_row(vec![0.0, 1.0], Relation::Le, 1.0)
            .add_row(vec![-1.0, 0.0], Relation::Le, 0.0)
            .add_row(vec![0.0, -1.0], Relation::Le, 0.0);
        let (_, v) = lp.minimize().optimal().unwrap();
        assert!((v + 1.0).abs() < 1e-9);
    }
}
