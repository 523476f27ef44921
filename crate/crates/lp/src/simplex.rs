//! Two-phase bounded-variable revised simplex.
//!
//! Internally every row `i` gets a logical variable `s_i = (A x)_i` whose
//! bounds encode the row sense, so the working system is `A x - s = 0` with
//! box constraints on all variables. Rows whose initial activity violates the
//! logical bounds receive an artificial variable; phase one minimizes the sum
//! of artificials. The basis inverse is kept dense and refactorized
//! periodically; this is meant for models with at most a few thousand rows.
//!
//! Pricing is Dantzig's rule with a Harris two-pass ratio test. After
//! `STALL_LIMIT` consecutive degenerate pivots the solver switches to Bland's
//! rule until the objective moves again.

use crate::error::{LpError, Result};
use crate::model::{LpModel, RowSense, Sense};

const STALL_LIMIT: usize = 50;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    /// Relative tolerance used for strong-duality checks.
    pub opt_tol: f64,
    /// Reduced-cost tolerance for pricing.
    pub dual_tol: f64,
    pub max_rows: usize,
    pub max_cols: usize,
    /// `None` picks a limit proportional to the model size.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            dual_tol: 1e-9,
            max_rows: 5_000,
            max_cols: 20_000,
            max_iterations: None,
        }
    }
}

impl SolverOptions {
    pub fn with_max_cols(mut self, max_cols: usize) -> Self {
        self.max_cols = max_cols;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point (the last basic solution for non-optimal outcomes).
    pub x: Vec<f64>,
    /// One multiplier per row: the sensitivity of the optimal value with
    /// respect to the row's right-hand side.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// Improving recession direction, set when `status == Unbounded`.
    pub primal_ray: Option<Vec<f64>>,
    /// Farkas multipliers (see [`LpModel::verify_farkas`]), set when
    /// `status == Infeasible`.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b^T y + sum_j d_j x_j`, which equals the primal value
    /// at an optimal basis.
    pub fn dual_objective(&self, model: &LpModel) -> f64 {
        let by: f64 = model.rhs().iter().zip(&self.duals).map(|(b, y)| b * y).sum();
        let dx: f64 = self.reduced_costs.iter().zip(&self.x).map(|(d, x)| d * x).sum();
        by + dx
    }
}

pub fn solve_lp(model: &LpModel) -> Result<LpSolution> {
    solve_lp_with(model, &SolverOptions::default())
}

pub fn solve_lp_with(model: &LpModel, options: &SolverOptions) -> Result<LpSolution> {
    let (m, n) = (model.num_rows(), model.num_vars());
    if m > options.max_rows || n > options.max_cols {
        return Err(LpError::SizeExceeded { rows: m, cols: n, max_rows: options.max_rows, max_cols: options.max_cols });
    }
    let mut simplex = Simplex::new(model, options);
    simplex.run()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

struct Simplex<'a> {
    model: &'a LpModel,
    opts: &'a SolverOptions,
    m: usize,
    n: usize,
    /// Phase-two costs for the internal minimization.
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Sign of each artificial column (`+1` or `-1`); 0 if the row has none.
    art_sign: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded { entering: usize, direction: f64, column: Vec<f64> },
}

impl<'a> Simplex<'a> {
    fn new(model: &'a LpModel, opts: &'a SolverOptions) -> Self {
        let (m, n) = (model.num_rows(), model.num_vars());
        let total = n + 2 * m;
        let flip = if model.sense() == Sense::Maximize { -1.0 } else { 1.0 };
        let mut cost = vec![0.0; total];
        for (j, &c) in model.objective().iter().enumerate() {
            cost[j] = flip * c;
        }
        let mut lower = vec![0.0; total];
        let mut upper = vec![0.0; total];
        lower[..n].copy_from_slice(model.lower());
        upper[..n].copy_from_slice(model.upper());
        for i in 0..m {
            let b = model.rhs()[i];
            let (lo, hi) = match model.row_senses()[i] {
                RowSense::Le => (f64::NEG_INFINITY, b),
                RowSense::Ge => (b, f64::INFINITY),
                RowSense::Eq => (b, b),
            };
            lower[n + i] = lo;
            upper[n + i] = hi;
        }
        let max_iterations = opts.max_iterations.unwrap_or(20 * (m + n) + 10_000);
        Self {
            model,
            opts,
            m,
            n,
            cost,
            lower,
            upper,
            art_sign: vec![0.0; m],
            x: vec![0.0; total],
            state: vec![VarState::AtLower; total],
            basis: Vec::with_capacity(m),
            binv: vec![0.0; m * m],
            iterations: 0,
            max_iterations,
            since_refactor: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + 2 * self.m
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    /// Sparse column of internal variable `j`.
    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for (i, a) in self.model.column(j) {
                f(i, a);
            }
        } else if j < self.n + self.m {
            f(j - self.n, -1.0);
        } else {
            let i = j - self.n - self.m;
            f(i, self.art_sign[i]);
        }
    }

    fn initialize(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            let (v, s) = if l.is_finite() {
                (l, VarState::AtLower)
            } else if u.is_finite() {
                (u, VarState::AtUpper)
            } else {
                (0.0, VarState::Zero)
            };
            self.x[j] = v;
            self.state[j] = s;
        }
        let act = {
            let xs = &self.x[..n];
            self.model.activities(xs)
        };
        let mut needs_phase_one = false;
        self.basis.clear();
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let s = n + i;
            let a = n + m + i;
            let (lo, hi) = (self.lower[s], self.upper[s]);
            let r = act[i];
            // Artificials are nonbasic and pinned to zero unless needed.
            self.lower[a] = 0.0;
            self.upper[a] = 0.0;
            self.x[a] = 0.0;
            self.state[a] = VarState::AtLower;
            if r >= lo - self.opts.feas_tol && r <= hi + self.opts.feas_tol {
                self.x[s] = r;
                self.state[s] = VarState::Basic;
                self.basis.push(s);
                self.binv[i * m + i] = -1.0;
            } else {
                let (v, st) = if r < lo { (lo, VarState::AtLower) } else { (hi, VarState::AtUpper) };
                self.x[s] = v;
                self.state[s] = st;
                let sign = if v - r >= 0.0 { 1.0 } else { -1.0 };
                self.art_sign[i] = sign;
                self.upper[a] = f64::INFINITY;
                self.x[a] = (v - r).abs();
                self.state[a] = VarState::Basic;
                self.basis.push(a);
                self.binv[i * m + i] = sign;
                needs_phase_one = true;
            }
        }
        needs_phase_one
    }

    fn run(&mut self) -> Result<LpSolution> {
        let needs_phase_one = self.initialize();
        if needs_phase_one {
            let phase_one_cost: Vec<f64> = (0..self.total()).map(|j| if self.is_artificial(j) { 1.0 } else { 0.0 }).collect();
            match self.optimize(&phase_one_cost)? {
                PhaseOutcome::Optimal => {}
                PhaseOutcome::Unbounded { .. } => {
                    return Err(LpError::NumericalFailure("phase one reported unbounded".into()));
                }
            }
            self.refactor()?;
            let infeasibility: f64 = (self.n + self.m..self.total()).map(|j| self.x[j].max(0.0)).sum();
            let scale = 1.0 + self.model.rhs().iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if infeasibility > self.opts.feas_tol * scale {
                let y = self.duals(&phase_one_cost);
                return Ok(self.finish(LpStatus::Infeasible, None, Some(y)));
            }
            self.expel_artificials()?;
        }
        let cost = self.cost.clone();
        match self.optimize(&cost)? {
            PhaseOutcome::Optimal => {
                self.refactor()?;
                let residual = self.model.primal_residual(&self.x[..self.n]);
                let scale = 1.0 + self.x[..self.n].iter().fold(0.0f64, |a, b| a.max(b.abs()));
                if residual > 1e3 * self.opts.feas_tol * scale {
                    return Err(LpError::NumericalFailure(format!("primal residual {residual:.3e} after refactorization")));
                }
                Ok(self.finish(LpStatus::Optimal, None, None))
            }
            PhaseOutcome::Unbounded { entering, direction, column } => {
                let mut ray = vec![0.0; self.n];
                if entering < self.n {
                    ray[entering] = direction;
                }
                for (pos, &var) in self.basis.iter().enumerate() {
                    if var < self.n {
                        ray[var] = -direction * column[pos];
                    }
                }
                for v in ray.iter_mut() {
                    if v.abs() < 1e-12 {
                        *v = 0.0;
                    }
                }
                Ok(self.finish(LpStatus::Unbounded, Some(ray), None))
            }
        }
    }

    fn finish(&self, status: LpStatus, ray: Option<Vec<f64>>, farkas: Option<Vec<f64>>) -> LpSolution {
        let flip = if self.model.sense() == Sense::Maximize { -1.0 } else { 1.0 };
        let y_int = self.duals(&self.cost);
        let duals: Vec<f64> = y_int.iter().map(|v| flip * v).collect();
        let reduced_costs: Vec<f64> = (0..self.n)
            .map(|j| {
                if self.state[j] == VarState::Basic {
                    0.0
                } else {
                    let mut d = self.cost[j];
                    self.for_column(j, |i, a| d -= y_int[i] * a);
                    flip * d
                }
            })
            .collect();
        let x = self.x[..self.n].to_vec();
        let objective = self.model.objective_value(&x);
        LpSolution { status, x, duals, reduced_costs, objective, primal_ray: ray, farkas, iterations: self.iterations }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (pos, &var) in self.basis.iter().enumerate() {
            let c = cost[var];
            if c != 0.0 {
                let row = &self.binv[pos * m..(pos + 1) * m];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += c * b;
                }
            }
        }
        y
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        self.for_column(j, |i, a| {
            for (pos, o) in out.iter_mut().enumerate() {
                *o += self.binv[pos * m + i] * a;
            }
        });
        out
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<PhaseOutcome> {
        let m = self.m;
        let mut stall = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = stall >= STALL_LIMIT;
            let y = self.duals(cost);
            let Some((q, direction)) = self.price(cost, &y, bland) else {
                return Ok(PhaseOutcome::Optimal);
            };
            let alpha = self.ftran(q);
            let step = self.ratio_test(q, direction, &alpha, bland);
            match step {
                Step::Unbounded => {
                    return Ok(PhaseOutcome::Unbounded { entering: q, direction, column: alpha });
                }
                Step::Flip(t) => {
                    self.move_along(q, direction, t, &alpha);
                    self.state[q] = if direction > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    self.x[q] = if direction > 0.0 { self.upper[q] } else { self.lower[q] };
                    stall = 0;
                }
                Step::Pivot { pos, t, to_upper } => {
                    self.move_along(q, direction, t, &alpha);
                    let leaving = self.basis[pos];
                    self.x[leaving] = if to_upper { self.upper[leaving] } else { self.lower[leaving] };
                    self.state[leaving] = if self.lower[leaving] == self.upper[leaving] {
                        VarState::AtLower
                    } else if to_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.state[q] = VarState::Basic;
                    self.basis[pos] = q;
                    self.update_inverse(pos, &alpha)?;
                    if t <= self.opts.feas_tol * 1e-3 {
                        stall += 1;
                    } else {
                        stall = 0;
                    }
                }
            }
            self.iterations += 1;
            let _ = m;
        }
    }

    fn move_along(&mut self, q: usize, direction: f64, t: f64, alpha: &[f64]) {
        if t == 0.0 {
            return;
        }
        self.x[q] += direction * t;
        for (pos, &var) in self.basis.iter().enumerate() {
            self.x[var] -= direction * t * alpha[pos];
        }
    }

    fn price(&self, cost: &[f64], y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.dual_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.total() {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let mut d = cost[j];
            self.for_column(j, |i, a| d -= y[i] * a);
            let direction = match st {
                VarState::AtLower if d < -tol => 1.0,
                VarState::AtUpper if d > tol => -1.0,
                VarState::Zero if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, direction));
            }
            let score = d.abs();
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, direction, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, direction: f64, alpha: &[f64], bland: bool) -> Step {
        let ptol = self.opts.pivot_tol;
        let ftol = self.opts.feas_tol;
        let flip = self.upper[q] - self.lower[q];
        let flip = if flip.is_finite() { Some(flip) } else { None };

        // Limit on the step from each basic variable; `relax` loosens bounds
        // by the feasibility tolerance for the Harris first pass.
        let limit = |pos: usize, relax: f64| -> Option<(f64, bool)> {
            let a = alpha[pos];
            if a.abs() <= ptol {
                return None;
            }
            let var = self.basis[pos];
            let rate = -direction * a;
            if rate < 0.0 {
                let l = self.lower[var];
                l.is_finite().then(|| (((self.x[var] - l + relax) / -rate), false))
            } else {
                let u = self.upper[var];
                u.is_finite().then(|| (((u - self.x[var] + relax) / rate), true))
            }
        };

        let chosen = if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for pos in 0..self.m {
                if let Some((t, up)) = limit(pos, 0.0) {
                    let t = t.max(0.0);
                    let better = match best {
                        None => true,
                        Some((bp, bt, _)) => t < bt - 1e-12 || ((t - bt).abs() <= 1e-12 && self.basis[pos] < self.basis[bp]),
                    };
                    if better {
                        best = Some((pos, t, up));
                    }
                }
            }
            best
        } else {
            let mut tmax = f64::INFINITY;
            for pos in 0..self.m {
                if let Some((t, _)) = limit(pos, ftol) {
                    tmax = tmax.min(t);
                }
            }
            if tmax.is_finite() {
                let mut best: Option<(usize, f64, bool, f64)> = None;
                for pos in 0..self.m {
                    if let Some((t, up)) = limit(pos, 0.0) {
                        if t <= tmax {
                            let mag = alpha[pos].abs();
                            if best.is_none_or(|(_, _, _, bm)| mag > bm) {
                                best = Some((pos, t.max(0.0), up, mag));
                            }
                        }
                    }
                }
                best.map(|(p, t, u, _)| (p, t, u))
            } else {
                None
            }
        };

        match (chosen, flip) {
            (None, None) => Step::Unbounded,
            (None, Some(f)) => Step::Flip(f),
            (Some((_, t, _)), Some(f)) if f <= t => Step::Flip(f),
            (Some((pos, t, to_upper)), _) => Step::Pivot { pos, t, to_upper },
        }
    }

    fn update_inverse(&mut self, pos: usize, alpha: &[f64]) -> Result<()> {
        let m = self.m;
        let pivot = alpha[pos];
        if pivot.abs() <= self.opts.pivot_tol {
            return Err(LpError::NumericalFailure(format!("pivot {pivot:.3e} below tolerance")));
        }
        let inv = 1.0 / pivot;
        for k in 0..m {
            self.binv[pos * m + k] *= inv;
        }
        let (before, rest) = self.binv.split_at_mut(pos * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (r, p) in row.iter_mut().zip(prow.iter()) {
                    *r -= f * p;
                }
            }
        }
        for (off, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[pos + 1 + off];
            if f != 0.0 {
                for (r, p) in row.iter_mut().zip(prow.iter()) {
                    *r -= f * p;
                }
            }
        }
        self.since_refactor += 1;
        Ok(())
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting and recomputes the basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (pos, &var) in self.basis.iter().enumerate() {
            self.for_column(var, |i, v| a[i * m + pos] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= 1e-13 {
                return Err(LpError::NumericalFailure("singular basis on refactorization".into()));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p = 1.0 / a[col * m + col];
            for k in 0..m {
                a[col * m + k] *= p;
                inv[col * m + k] *= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        // Row `pos` of the inverse corresponds to basis position `pos`
        // because column `pos` of the basis matrix holds basis[pos].
        self.binv = inv;
        let mut rhs = vec![0.0; m];
        for j in 0..self.total() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |i, v| rhs[i] -= v * xj);
            }
        }
        for pos in 0..m {
            let row = &self.binv[pos * m..(pos + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            let var = self.basis[pos];
            self.x[var] = v;
        }
        Ok(())
    }

    /// After phase one, pins artificials to zero and pivots basic ones out
    /// wherever a structural or logical column can replace them.
    fn expel_artificials(&mut self) -> Result<()> {
        let m = self.m;
        for a in self.n + self.m..self.total() {
            self.upper[a] = 0.0;
            self.lower[a] = 0.0;
            if self.state[a] != VarState::Basic {
                self.x[a] = 0.0;
                self.state[a] = VarState::AtLower;
            }
        }
        for pos in 0..m {
            let var = self.basis[pos];
            if !self.is_artificial(var) {
                continue;
            }
            let row = self.binv[pos * m..(pos + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n + self.m {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let mut v = 0.0;
                self.for_column(j, |i, a| v += row[i] * a);
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                self.x[var] = 0.0;
                self.state[var] = VarState::AtLower;
                self.state[j] = VarState::Basic;
                self.basis[pos] = j;
                self.update_inverse(pos, &alpha)?;
            } else {
                self.x[var] = 0.0;
            }
        }
        self.refactor()
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { pos: usize, t: f64, to_upper: bool },
}
