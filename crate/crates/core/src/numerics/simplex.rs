//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    c·x
//! subject to  E x  = e          (equality rows)
//!             G x >= g          (inequality rows)
//!             lower <= x <= upper
//! ```
//!
//! and converted to `A z = b, z >= 0` by shifting bounded variables, reflecting
//! variables that only have an upper bound, splitting free variables and adding
//! one surplus column per inequality row and one slack column per finite upper
//! bound. Phase one drives an artificial basis to a feasible vertex; phase two
//! optimizes the real objective from there. The final basis is re-solved
//! against the original standard-form data, which gives a clean vertex and the
//! row duals.

use thiserror::Error;

use super::linear::solve_linear;

/// Constraint satisfaction tolerance for returned points.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;
/// A reduced cost above this value counts as improving.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-9;
/// Smallest tableau entry accepted as a pivot in the ratio test.
const RATIO_PIVOT_TOLERANCE: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("ill-formed linear program: {0}")]
    IllFormed(String),
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// A dense linear program in maximization form.
///
/// `lower[j] == f64::NEG_INFINITY` marks a variable without a lower bound;
/// `upper[j] == None` one without an upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub equalities: Vec<LinearRow>,
    /// Rows of the form `coefficients · x >= rhs`.
    pub inequalities: Vec<LinearRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

impl LpProblem {
    /// A problem maximizing `objective` over the nonnegative orthant.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn equality(&mut self, coefficients: Vec<f64>, rhs: f64) -> &mut Self {
        self.equalities.push(LinearRow { coefficients, rhs });
        self
    }

    pub fn at_least(&mut self, coefficients: Vec<f64>, rhs: f64) -> &mut Self {
        self.inequalities.push(LinearRow { coefficients, rhs });
        self
    }

    /// Stored as the negated `>=` row, so its dual carries the opposite sign.
    pub fn at_most(&mut self, coefficients: Vec<f64>, rhs: f64) -> &mut Self {
        let coefficients = coefficients.into_iter().map(|a| -a).collect();
        self.inequalities.push(LinearRow {
            coefficients,
            rhs: -rhs,
        });
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::IllFormed(format!(
                "bounds have lengths {}/{} for {n} variables",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::IllFormed(format!("objective coefficient {j} is not finite")));
        }
        let rows = self
            .equalities
            .iter()
            .map(|r| ("equality", r))
            .chain(self.inequalities.iter().map(|r| ("inequality", r)));
        for (i, (kind, row)) in rows.enumerate() {
            if row.coefficients.len() != n {
                return Err(LpError::IllFormed(format!(
                    "{kind} row {i} has {} coefficients for {n} variables",
                    row.coefficients.len()
                )));
            }
            if !row.rhs.is_finite() || row.coefficients.iter().any(|a| !a.is_finite()) {
                return Err(LpError::IllFormed(format!("{kind} row {i} is not finite")));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.lower[j] == f64::INFINITY {
                return Err(LpError::IllFormed(format!("lower bound of variable {j}")));
            }
            if matches!(self.upper[j], Some(u) if u.is_nan() || u == f64::NEG_INFINITY) {
                return Err(LpError::IllFormed(format!("upper bound of variable {j}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|r| (r.dot(x) - r.rhs).abs());
        let ge = self.inequalities.iter().map(|r| (r.rhs - r.dot(x)).max(0.0));
        let lo = self.lower.iter().zip(x).map(|(l, v)| (l - v).max(0.0));
        let hi = self
            .upper
            .iter()
            .zip(x)
            .map(|(u, v)| u.map_or(0.0, |u| (v - u).max(0.0)));
        eq.chain(ge).chain(lo).chain(hi).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`lp_solve`].
///
/// For `Optimal`, `x` is a basic feasible point and `duals` holds one value per
/// row, equalities first and then inequalities, in insertion order. The duals
/// solve `min e·y_eq + g·y_ge` subject to `A^T y >= c` on the structural
/// columns, with `y_ge <= 0`. Other statuses leave `x` and `duals` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        LpSolution {
            status,
            x: Vec::new(),
            objective,
            duals: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + z[col]`
    Shifted { col: usize, offset: f64 },
    /// `x = offset - z[col]`
    Reflected { col: usize, offset: f64 },
    /// `x = z[pos] - z[neg]`
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowOrigin {
    Problem(usize),
    UpperBound,
}

/// `A z = b, z >= 0` with rows flipped so that `b >= 0`.
struct StandardForm {
    vars: Vec<VarMap>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    sign: Vec<f64>,
    origin: Vec<RowOrigin>,
    cost: Vec<f64>,
}

impl StandardForm {
    fn build(problem: &LpProblem) -> Option<Self> {
        let n = problem.num_vars();
        let mut vars = Vec::with_capacity(n);
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        let mut ncols = 0;
        for j in 0..n {
            let lower = problem.lower[j];
            let upper = problem.upper[j].filter(|u| u.is_finite());
            let map = match (lower.is_finite(), upper) {
                (true, upper) => {
                    if let Some(u) = upper {
                        if u < lower {
                            return None;
                        }
                        bound_rows.push((ncols, u - lower));
                    }
                    VarMap::Shifted {
                        col: ncols,
                        offset: lower,
                    }
                }
                (false, Some(u)) => VarMap::Reflected { col: ncols, offset: u },
                (false, None) => {
                    ncols += 1;
                    VarMap::Split {
                        pos: ncols - 1,
                        neg: ncols,
                    }
                }
            };
            ncols += 1;
            vars.push(map);
        }
        let structural = ncols;
        let slack_count = problem.inequalities.len() + bound_rows.len();
        let width = structural + slack_count;

        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut origin = Vec::new();
        let mut push_row = |coeffs: &[f64], b: f64, slack: Option<(usize, f64)>, o: RowOrigin| {
            let mut row = vec![0.0; width];
            let mut b = b;
            for (a, map) in coeffs.iter().zip(&vars) {
                match *map {
                    VarMap::Shifted { col, offset } => {
                        row[col] += a;
                        b -= a * offset;
                    }
                    VarMap::Reflected { col, offset } => {
                        row[col] -= a;
                        b -= a * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        row[pos] += a;
                        row[neg] -= a;
                    }
                }
            }
            if let Some((col, v)) = slack {
                row[col] = v;
            }
            rows.push(row);
            rhs.push(b);
            origin.push(o);
        };

        for (i, r) in problem.equalities.iter().enumerate() {
            push_row(&r.coefficients, r.rhs, None, RowOrigin::Problem(i));
        }
        let n_eq = problem.equalities.len();
        for (i, r) in problem.inequalities.iter().enumerate() {
            push_row(
                &r.coefficients,
                r.rhs,
                Some((structural + i, -1.0)),
                RowOrigin::Problem(n_eq + i),
            );
        }
        for (k, &(col, width_bound)) in bound_rows.iter().enumerate() {
            let mut row = vec![0.0; width];
            row[col] = 1.0;
            row[structural + problem.inequalities.len() + k] = 1.0;
            rows.push(row);
            rhs.push(width_bound);
            origin.push(RowOrigin::UpperBound);
        }

        let mut sign = vec![1.0; rows.len()];
        for (i, row) in rows.iter_mut().enumerate() {
            if rhs[i] < 0.0 {
                row.iter_mut().for_each(|a| *a = -*a);
                rhs[i] = -rhs[i];
                sign[i] = -1.0;
            }
        }

        let mut cost = vec![0.0; width];
        for (c, map) in problem.objective.iter().zip(&vars) {
            match *map {
                VarMap::Shifted { col, .. } => cost[col] += c,
                VarMap::Reflected { col, .. } => cost[col] -= c,
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        Some(StandardForm {
            vars,
            rows,
            rhs,
            sign,
            origin,
            cost,
        })
    }

    fn width(&self) -> usize {
        self.cost.len()
    }

    fn recover(&self, z: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|map| match *map {
                VarMap::Shifted { col, offset } => offset + z[col],
                VarMap::Reflected { col, offset } => offset - z[col],
                VarMap::Split { pos, neg } => z[pos] - z[neg],
            })
            .collect()
    }
}

struct Tableau {
    /// Each row holds the constraint coefficients followed by the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Standard-form row index of each tableau row.
    row_ids: Vec<usize>,
    reduced: Vec<f64>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn with_artificials(sf: &StandardForm) -> Self {
        let m = sf.rows.len();
        let n = sf.width();
        let rows = sf
            .rows
            .iter()
            .zip(&sf.rhs)
            .enumerate()
            .map(|(i, (row, b))| {
                let mut t = Vec::with_capacity(n + m + 1);
                t.extend_from_slice(row);
                t.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
                t.push(*b);
                t
            })
            .collect();
        Tableau {
            rows,
            basis: (n..n + m).collect(),
            row_ids: (0..m).collect(),
            reduced: vec![0.0; n + m],
            pivots: 0,
        }
    }

    fn rhs_col(&self) -> usize {
        self.reduced.len()
    }

    fn price(&mut self, cost: &[f64]) {
        for j in 0..self.reduced.len() {
            let cb: f64 = self
                .rows
                .iter()
                .zip(&self.basis)
                .map(|(row, &b)| cost[b] * row[j])
                .sum();
            self.reduced[j] = cost[j] - cb;
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let rhs = self.rhs_col();
        let p = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][e] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[e] = 0.0;
            if row[rhs] < 0.0 && row[rhs] > -1e-12 {
                row[rhs] = 0.0;
            }
        }
        let d = self.reduced[e];
        if d != 0.0 {
            for (v, pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= d * pv;
            }
        }
        self.reduced[e] = 0.0;
        self.basis[r] = e;
        self.pivots += 1;
    }

    /// Runs Bland-rule pivots over the columns `< allowed`.
    fn run(&mut self, allowed: usize) -> Result<Phase, LpError> {
        let rhs = self.rhs_col();
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
            let Some(e) = (0..allowed).find(|&j| self.reduced[j] > OPTIMALITY_TOLERANCE) else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[e];
                if a <= RATIO_PIVOT_TOLERANCE {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if (!tie && ratio < best) || (tie && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => self.pivot(r, e),
                None => return Ok(Phase::Unbounded),
            }
        }
    }
}

/// Solves `problem` with the two-phase simplex method.
///
/// Infeasible and unbounded problems are reported through
/// [`LpSolution::status`]; only malformed input and runaway pivoting are errors.
pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.check()?;
    let Some(sf) = StandardForm::build(problem) else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible));
    };
    let n = sf.width();
    let m = sf.rows.len();

    let mut tab = Tableau::with_artificials(&sf);
    let phase_one_cost: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { -1.0 }).collect();
    tab.price(&phase_one_cost);
    tab.run(n + m)?;

    let rhs = tab.rhs_col();
    let infeasibility: f64 = tab
        .rows
        .iter()
        .zip(&tab.basis)
        .filter(|(_, &b)| b >= n)
        .map(|(row, _)| row[rhs])
        .sum();
    let scale = 1.0 + sf.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if infeasibility > FEASIBILITY_TOLERANCE * scale {
        return Ok(LpSolution::without_point(LpStatus::Infeasible));
    }

    // Swap remaining (zero-level) artificials out of the basis; rows where
    // that is impossible are linearly dependent and get dropped.
    let mut r = 0;
    while r < tab.rows.len() {
        if tab.basis[r] < n {
            r += 1;
            continue;
        }
        let best = (0..n)
            .map(|j| (j, tab.rows[r][j].abs()))
            .fold((usize::MAX, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best.1 > 1e-9 {
            tab.pivot(r, best.0);
            r += 1;
        } else {
            tab.rows.remove(r);
            tab.basis.remove(r);
            tab.row_ids.remove(r);
        }
    }

    let mut phase_two_cost = sf.cost.clone();
    phase_two_cost.extend(std::iter::repeat_n(0.0, m));
    tab.price(&phase_two_cost);
    if let Phase::Unbounded = tab.run(n)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    let (z, y) = polish(&sf, &tab);
    let x = sf.recover(&z);
    let mut duals = vec![0.0; problem.equalities.len() + problem.inequalities.len()];
    for (k, &row_id) in tab.row_ids.iter().enumerate() {
        if let RowOrigin::Problem(i) = sf.origin[row_id] {
            duals[i] = sf.sign[row_id] * y[k];
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: problem.objective_value(&x),
        x,
        duals,
    })
}

/// Re-solves the final basis against the untouched standard-form data.
fn polish(sf: &StandardForm, tab: &Tableau) -> (Vec<f64>, Vec<f64>) {
    let n = sf.width();
    let rhs = tab.rhs_col();
    let k = tab.basis.len();
    let mut z = vec![0.0; n];
    let tableau_point = |z: &mut Vec<f64>| {
        for (row, &b) in tab.rows.iter().zip(&tab.basis) {
            z[b] = row[rhs].max(0.0);
        }
    };
    if k == 0 {
        return (z, Vec::new());
    }

    let basis_matrix: Vec<Vec<f64>> = tab
        .row_ids
        .iter()
        .map(|&i| tab.basis.iter().map(|&b| sf.rows[i][b]).collect())
        .collect();
    let b: Vec<f64> = tab.row_ids.iter().map(|&i| sf.rhs[i]).collect();
    match solve_linear(&basis_matrix, &b) {
        Ok(xb) if xb.iter().all(|v| *v >= -FEASIBILITY_TOLERANCE) => {
            for (&col, v) in tab.basis.iter().zip(xb) {
                z[col] = v.max(0.0);
            }
        }
        _ => tableau_point(&mut z),
    }

    let transposed: Vec<Vec<f64>> = (0..k)
        .map(|c| basis_matrix.iter().map(|row| row[c]).collect())
        .collect();
    let cb: Vec<f64> = tab.basis.iter().map(|&b| sf.cost[b]).collect();
    let y = solve_linear(&transposed, &cb).unwrap_or_else(|_| vec![0.0; k]);
    (z, y)
}
