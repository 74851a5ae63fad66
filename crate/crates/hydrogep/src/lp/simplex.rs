//! Bounded-variable revised simplex with an explicitly maintained basis
//! inverse (product-form updates, dense refactorization on demand).
//!
//! Phase 1 uses the composite scheme: while any basic variable violates a
//! bound, the objective is the sum of violations and pricing works on that
//! piecewise-linear cost. Dantzig pricing is the default; Bland's rule is
//! engaged after `2 * (rows + cols)` consecutive degenerate pivots and
//! released once a pivot makes progress.
//!
//! The solver owns its workspace and is reusable: bounds and right-hand
//! sides can be changed between `solve` calls and the next solve starts
//! from the current basis. Branch-and-bound and the per-scenario recourse
//! evaluations lean on this for warm starts.
//!
//! Costs are normalized internally by `max(1, |c|_inf)`; duals, reduced
//! costs and the objective are rescaled on extraction. Every optimal exit
//! is verified against the original data (primal residual, bound residual,
//! duality gap); on failure the basis is refactorized and the solve
//! resumes, and a solve that cannot meet the contracts reports a numerical
//! failure instead of returning a solution.

use super::{LpError, LpInstance, LpSolution, LpStatus, RowSense, SimplexOptions};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stat {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Reusable revised-simplex solver over one instance's structure.
pub struct Simplex {
    opts: SimplexOptions,
    n: usize,
    m: usize,
    nt: usize,
    /// Scaled objective over structural columns then slacks (slack cost 0).
    cost: Vec<f64>,
    cost_scale: f64,
    offset: f64,
    lb: Vec<f64>,
    ub: Vec<f64>,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    senses: Vec<RowSense>,
    rhs: Vec<f64>,
    stat: Vec<Stat>,
    basis: Vec<usize>,
    in_pos: Vec<usize>,
    x: Vec<f64>,
    binv: Vec<f64>,
    values_stale: bool,
    pub iterations: usize,
    // scratch
    y: Vec<f64>,
    w: Vec<f64>,
    cb: Vec<f64>,
    row_scratch: Vec<f64>,
}

enum Step {
    Flip(f64),
    Pivot { pos: usize, delta: f64, target: f64, to_upper: bool },
    Unblocked,
}

impl Simplex {
    pub fn new(lp: &LpInstance) -> Result<Self, LpError> {
        Self::with_opts(lp, SimplexOptions::default())
    }

    pub fn with_opts(lp: &LpInstance, opts: SimplexOptions) -> Result<Self, LpError> {
        lp.check()?;
        let n = lp.n_cols();
        let m = lp.n_rows();
        let nt = n + m;

        // CSC with duplicate triplets summed.
        let mut order: Vec<usize> = (0..lp.entries.len()).collect();
        order.sort_unstable_by_key(|&k| (lp.entries[k].1, lp.entries[k].0));
        let mut col_ptr = vec![0usize; n + 1];
        let mut col_rows: Vec<usize> = Vec::with_capacity(lp.entries.len());
        let mut col_vals: Vec<f64> = Vec::with_capacity(lp.entries.len());
        {
            let mut cur_col = 0usize;
            for &k in &order {
                let (r, c, v) = lp.entries[k];
                while cur_col < c {
                    cur_col += 1;
                    col_ptr[cur_col] = col_rows.len();
                }
                if col_rows.len() > col_ptr[c] && *col_rows.last().unwrap() == r {
                    *col_vals.last_mut().unwrap() += v;
                } else {
                    col_rows.push(r);
                    col_vals.push(v);
                }
            }
            while cur_col < n {
                cur_col += 1;
                col_ptr[cur_col] = col_rows.len();
            }
        }

        let cost_scale = lp.objective.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let mut cost = vec![0.0; nt];
        for j in 0..n {
            cost[j] = lp.objective[j] / cost_scale;
        }

        let mut lb = vec![-INF; nt];
        let mut ub = vec![INF; nt];
        for j in 0..n {
            lb[j] = lp.lower[j].unwrap_or(-INF);
            ub[j] = lp.upper[j].unwrap_or(INF);
        }
        for i in 0..m {
            match lp.senses[i] {
                RowSense::Le => {
                    lb[n + i] = 0.0;
                }
                RowSense::Ge => {
                    ub[n + i] = 0.0;
                }
                RowSense::Eq => {
                    lb[n + i] = 0.0;
                    ub[n + i] = 0.0;
                }
            }
        }

        let mut s = Self {
            opts,
            n,
            m,
            nt,
            cost,
            cost_scale,
            offset: lp.objective_offset,
            lb,
            ub,
            col_ptr,
            col_rows,
            col_vals,
            senses: lp.senses.clone(),
            rhs: lp.rhs.clone(),
            stat: vec![Stat::Free; nt],
            basis: (n..nt).collect(),
            in_pos: vec![usize::MAX; nt],
            x: vec![0.0; nt],
            binv: vec![0.0; m * m],
            values_stale: true,
            iterations: 0,
            y: vec![0.0; m],
            w: vec![0.0; m],
            cb: vec![0.0; m],
            row_scratch: vec![0.0; m],
        };
        for j in 0..n {
            s.stat[j] = s.preferred_nonbasic(j);
        }
        for i in 0..m {
            s.stat[n + i] = Stat::Basic;
            s.in_pos[n + i] = i;
            s.binv[i * m + i] = 1.0;
        }
        Ok(s)
    }

    fn preferred_nonbasic(&self, j: usize) -> Stat {
        let (l, u) = (self.lb[j], self.ub[j]);
        if l.is_finite() && u.is_finite() {
            if self.cost[j] >= 0.0 {
                Stat::Lower
            } else {
                Stat::Upper
            }
        } else if l.is_finite() {
            Stat::Lower
        } else if u.is_finite() {
            Stat::Upper
        } else {
            Stat::Free
        }
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_cols(&self) -> usize {
        self.n
    }

    /// Changes the bounds of a structural column, keeping the basis.
    pub fn set_col_bounds(&mut self, j: usize, lower: Option<f64>, upper: Option<f64>) {
        debug_assert!(j < self.n);
        self.lb[j] = lower.unwrap_or(-INF);
        self.ub[j] = upper.unwrap_or(INF);
        if self.stat[j] != Stat::Basic {
            self.stat[j] = match self.stat[j] {
                Stat::Lower if self.lb[j].is_finite() => Stat::Lower,
                Stat::Upper if self.ub[j].is_finite() => Stat::Upper,
                _ => self.preferred_nonbasic(j),
            };
        }
        self.values_stale = true;
    }

    /// Replaces one right-hand side entry, keeping the basis.
    pub fn set_rhs(&mut self, row: usize, value: f64) {
        debug_assert!(row < self.m);
        self.rhs[row] = value;
        self.values_stale = true;
    }

    fn col_entries(&self, j: usize) -> (&[usize], &[f64]) {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        (&self.col_rows[lo..hi], &self.col_vals[lo..hi])
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.stat[j] {
            Stat::Lower => self.lb[j],
            Stat::Upper => self.ub[j],
            Stat::Free => 0.0,
            Stat::Basic => unreachable!(),
        }
    }

    fn compute_values(&mut self) {
        let (n, m) = (self.n, self.m);
        let mut r = self.rhs.clone();
        for j in 0..self.nt {
            if self.stat[j] == Stat::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v == 0.0 {
                continue;
            }
            if j < n {
                let (rows, vals) = self.col_entries(j);
                for (&ri, &av) in rows.iter().zip(vals) {
                    r[ri] -= av * v;
                }
            } else {
                r[j - n] -= v;
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut s = 0.0;
            for k in 0..m {
                s += row[k] * r[k];
            }
            self.x[self.basis[i]] = s;
        }
        self.values_stale = false;
    }

    /// Rebuilds the basis inverse from scratch (Gauss-Jordan with partial
    /// pivoting on the gathered dense basis matrix).
    fn refactorize(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let n = self.n;
        let mut a = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            if j < n {
                let (rows, vals) = self.col_entries(j);
                for (&ri, &v) in rows.iter().zip(vals) {
                    a[ri * m + pos] = v;
                }
            } else {
                a[(j - n) * m + pos] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        let mut arow = vec![0.0; m];
        for k in 0..m {
            let mut p = k;
            let mut best = a[k * m + k].abs();
            for i in (k + 1)..m {
                let v = a[i * m + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < 1e-11 {
                return Err(LpError::Numerical(format!(
                    "singular basis during refactorization (pivot {:.3e} at column {})",
                    best, k
                )));
            }
            if p != k {
                for c in 0..m {
                    a.swap(p * m + c, k * m + c);
                    inv.swap(p * m + c, k * m + c);
                }
            }
            let pinv = 1.0 / a[k * m + k];
            for c in k..m {
                a[k * m + c] *= pinv;
            }
            for c in 0..m {
                inv[k * m + c] *= pinv;
            }
            arow[k..m].clone_from_slice(&a[k * m + k..(k + 1) * m]);
            self.row_scratch.clone_from_slice(&inv[k * m..(k + 1) * m]);
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = a[i * m + k];
                if f == 0.0 {
                    continue;
                }
                for c in k..m {
                    a[i * m + c] -= f * arow[c];
                }
                let irow = &mut inv[i * m..(i + 1) * m];
                for (c, &v) in self.row_scratch.iter().enumerate() {
                    irow[c] -= f * v;
                }
            }
        }
        self.binv = inv;
        self.values_stale = true;
        Ok(())
    }

    fn ftran(&mut self, j: usize) {
        let m = self.m;
        if j < self.n {
            let lo = self.col_ptr[j];
            let hi = self.col_ptr[j + 1];
            for i in 0..m {
                let row = &self.binv[i * m..(i + 1) * m];
                let mut s = 0.0;
                for k in lo..hi {
                    s += row[self.col_rows[k]] * self.col_vals[k];
                }
                self.w[i] = s;
            }
        } else {
            let r = j - self.n;
            for i in 0..m {
                self.w[i] = self.binv[i * m + r];
            }
        }
    }

    /// `y = cb' * binv`, with `cb` as filled for the current phase.
    fn compute_y(&mut self) {
        let m = self.m;
        for v in self.y.iter_mut() {
            *v = 0.0;
        }
        for i in 0..m {
            let c = self.cb[i];
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yk, &bk) in self.y.iter_mut().zip(row) {
                *yk += c * bk;
            }
        }
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        if j < self.n {
            let (rows, vals) = self.col_entries(j);
            let mut s = 0.0;
            for (&ri, &v) in rows.iter().zip(vals) {
                s += self.y[ri] * v;
            }
            c - s
        } else {
            c - self.y[j - self.n]
        }
    }

    fn infeasibility(&self, p_tol: f64) -> f64 {
        let mut total = 0.0;
        for &j in &self.basis {
            let v = self.x[j];
            if v < self.lb[j] - p_tol {
                total += self.lb[j] - v;
            } else if v > self.ub[j] + p_tol {
                total += v - self.ub[j];
            }
        }
        total
    }

    fn ratio_test(&self, enter: usize, sigma: f64, p_tol: f64, bland: bool) -> Step {
        let room = match self.stat[enter] {
            Stat::Lower | Stat::Upper => self.ub[enter] - self.lb[enter],
            Stat::Free => INF,
            Stat::Basic => unreachable!(),
        };
        let mut best = INF;
        let mut choice: Option<(usize, f64, bool, f64)> = None;
        for i in 0..self.m {
            let wi = self.w[i];
            if wi.abs() <= 1e-12 {
                continue;
            }
            let rate = -sigma * wi;
            let j = self.basis[i];
            let v = self.x[j];
            let (l, u) = (self.lb[j], self.ub[j]);
            let (target, to_upper) = if rate > 0.0 {
                if v < l - p_tol {
                    (l, false)
                } else if u.is_finite() {
                    (u, true)
                } else {
                    continue;
                }
            } else if v > u + p_tol {
                (u, true)
            } else if l.is_finite() {
                (l, false)
            } else {
                continue;
            };
            let ratio = ((target - v) / rate).max(0.0);
            let accept = match &choice {
                None => ratio < INF,
                Some(_) if ratio < best - 1e-10 => true,
                Some((pos, _, _, wabs)) if ratio <= best + 1e-10 => {
                    if bland {
                        self.basis[i] < self.basis[*pos]
                    } else {
                        wi.abs() > *wabs
                    }
                }
                _ => false,
            };
            if accept {
                best = best.min(ratio);
                choice = Some((i, target, to_upper, wi.abs()));
            }
        }
        match choice {
            Some((pos, target, to_upper, _)) => {
                if room + 1e-10 < best {
                    Step::Flip(room)
                } else {
                    Step::Pivot { pos, delta: best.min(room.max(0.0)), target, to_upper }
                }
            }
            None => {
                if room.is_finite() {
                    Step::Flip(room)
                } else {
                    Step::Unblocked
                }
            }
        }
    }

    fn apply_flip(&mut self, enter: usize, sigma: f64, delta: f64) {
        if delta != 0.0 {
            for i in 0..self.m {
                let j = self.basis[i];
                self.x[j] -= sigma * delta * self.w[i];
            }
        }
        self.stat[enter] = match self.stat[enter] {
            Stat::Lower => Stat::Upper,
            Stat::Upper => Stat::Lower,
            other => other,
        };
        self.x[enter] = self.nonbasic_value(enter);
    }

    fn apply_pivot(&mut self, enter: usize, sigma: f64, pos: usize, delta: f64, target: f64, to_upper: bool) {
        let m = self.m;
        if delta != 0.0 {
            for i in 0..m {
                let j = self.basis[i];
                self.x[j] -= sigma * delta * self.w[i];
            }
        }
        let leaving = self.basis[pos];
        self.x[enter] = self.nonbasic_value(enter) + sigma * delta;
        self.x[leaving] = target;
        self.stat[leaving] = if to_upper { Stat::Upper } else { Stat::Lower };
        self.in_pos[leaving] = usize::MAX;
        self.stat[enter] = Stat::Basic;
        self.in_pos[enter] = pos;
        self.basis[pos] = enter;

        // Product-form update of the inverse.
        let piv = self.w[pos];
        let pinv = 1.0 / piv;
        {
            let row = &mut self.binv[pos * m..(pos + 1) * m];
            for v in row.iter_mut() {
                *v *= pinv;
            }
            self.row_scratch.clone_from_slice(row);
        }
        for i in 0..m {
            if i == pos {
                continue;
            }
            let f = self.w[i];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (c, &v) in self.row_scratch.iter().enumerate() {
                row[c] -= f * v;
            }
        }
    }

    /// Worst primal violation (rows and bounds) against original data.
    fn primal_residual(&self) -> f64 {
        let m = self.m;
        let mut act = vec![0.0; m];
        for j in 0..self.n {
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            let (rows, vals) = self.col_entries(j);
            for (&ri, &av) in rows.iter().zip(vals) {
                act[ri] += av * v;
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let viol = match self.senses[i] {
                RowSense::Le => act[i] - self.rhs[i],
                RowSense::Ge => self.rhs[i] - act[i],
                RowSense::Eq => (act[i] - self.rhs[i]).abs(),
            };
            worst = worst.max(viol);
        }
        for j in 0..self.n {
            let v = self.x[j];
            if self.lb[j].is_finite() {
                worst = worst.max(self.lb[j] - v);
            }
            if self.ub[j].is_finite() {
                worst = worst.max(v - self.ub[j]);
            }
        }
        worst
    }

    fn true_objective(&self) -> f64 {
        let mut s = self.offset;
        for j in 0..self.n {
            s += self.cost[j] * self.cost_scale * self.x[j];
        }
        s
    }

    /// `|primal objective - dual objective|` in original units. Fills `cb`
    /// and `y` with phase-2 quantities as a side effect.
    fn duality_gap(&mut self) -> f64 {
        for i in 0..self.m {
            self.cb[i] = self.cost[self.basis[i]];
        }
        self.compute_y();
        let mut dual_obj = self.offset;
        for i in 0..self.m {
            dual_obj += self.y[i] * self.cost_scale * self.rhs[i];
        }
        for j in 0..self.n {
            if self.stat[j] != Stat::Basic {
                let d = self.reduced_cost(j, false) * self.cost_scale;
                dual_obj += d * self.x[j];
            }
        }
        (self.true_objective() - dual_obj).abs()
    }

    /// Runs the simplex from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus, LpError> {
        let m = self.m;
        let rhs_inf = self.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let p_tol = self.opts.feas_tol * (1.0 + rhs_inf);
        let d_tol = self.opts.opt_tol;
        let max_iters = if self.opts.max_iters == 0 {
            20_000 + 10 * (self.m + self.nt)
        } else {
            self.opts.max_iters
        };
        let bland_after = 2 * (self.m + self.n);

        if self.values_stale {
            self.compute_values();
        }
        let mut degen = 0usize;
        let mut bland = false;
        let mut since_refactor = 0usize;
        let mut retries = 0usize;
        self.iterations = 0;

        loop {
            if self.iterations >= max_iters {
                return Err(LpError::IterationLimit(self.iterations));
            }
            self.iterations += 1;

            let infeas = self.infeasibility(p_tol);
            let phase1 = infeas > p_tol;
            for i in 0..m {
                let j = self.basis[i];
                self.cb[i] = if phase1 {
                    let v = self.x[j];
                    if v < self.lb[j] - p_tol {
                        -1.0
                    } else if v > self.ub[j] + p_tol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                };
            }
            self.compute_y();

            let mut enter = usize::MAX;
            let mut sigma = 1.0;
            let mut best_score = d_tol;
            for j in 0..self.nt {
                if self.stat[j] == Stat::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = self.reduced_cost(j, phase1);
                let (score, dir) = match self.stat[j] {
                    Stat::Lower => (-d, 1.0),
                    Stat::Upper => (d, -1.0),
                    Stat::Free => (d.abs(), if d > 0.0 { -1.0 } else { 1.0 }),
                    Stat::Basic => unreachable!(),
                };
                if score > best_score {
                    enter = j;
                    sigma = dir;
                    best_score = score;
                    if bland {
                        break;
                    }
                }
            }

            if enter == usize::MAX {
                if phase1 {
                    return Ok(LpStatus::Infeasible);
                }
                // Candidate optimum: verify contracts against original data.
                let resid = self.primal_residual();
                let gap = self.duality_gap();
                let obj = self.true_objective();
                if resid <= p_tol * 1.01 && gap <= 1e-6 * (1.0 + obj.abs()) {
                    return Ok(LpStatus::Optimal);
                }
                if retries >= 3 {
                    return Err(LpError::Numerical(format!(
                        "optimality contracts not met (residual {:.3e}, gap {:.3e})",
                        resid, gap
                    )));
                }
                retries += 1;
                self.refactorize()?;
                self.compute_values();
                continue;
            }

            self.ftran(enter);
            match self.ratio_test(enter, sigma, p_tol, bland) {
                Step::Unblocked => {
                    if phase1 {
                        // A descent direction of the infeasibility sum is
                        // always blocked; getting here means the inverse
                        // drifted.
                        if retries >= 3 {
                            return Err(LpError::Numerical("unblocked phase-1 direction".into()));
                        }
                        retries += 1;
                        self.refactorize()?;
                        self.compute_values();
                        continue;
                    }
                    return Ok(LpStatus::Unbounded);
                }
                Step::Flip(delta) => {
                    if delta <= 1e-11 {
                        degen += 1;
                    } else {
                        degen = 0;
                        bland = false;
                    }
                    self.apply_flip(enter, sigma, delta);
                }
                Step::Pivot { pos, delta, target, to_upper } => {
                    let piv = self.w[pos];
                    if piv.abs() < self.opts.pivot_tol {
                        if since_refactor == 0 {
                            return Err(LpError::Numerical(format!(
                                "pivot magnitude {:.3e} below tolerance {:.3e}",
                                piv.abs(),
                                self.opts.pivot_tol
                            )));
                        }
                        self.refactorize()?;
                        self.compute_values();
                        since_refactor = 0;
                        continue;
                    }
                    if delta <= 1e-11 {
                        degen += 1;
                    } else {
                        degen = 0;
                        bland = false;
                    }
                    self.apply_pivot(enter, sigma, pos, delta, target, to_upper);
                    since_refactor += 1;
                    if since_refactor >= self.opts.refactor_every {
                        self.refactorize()?;
                        self.compute_values();
                        since_refactor = 0;
                    }
                }
            }
            if degen > bland_after {
                bland = true;
            }
        }
    }

    /// Extracts the full solution after an `Optimal` return from [`Self::solve`].
    pub fn solution(&mut self) -> Result<LpSolution, LpError> {
        for i in 0..self.m {
            self.cb[i] = self.cost[self.basis[i]];
        }
        self.compute_y();
        let duals: Vec<f64> = self.y.iter().map(|v| v * self.cost_scale).collect();
        let reduced: Vec<f64> = (0..self.n)
            .map(|j| self.reduced_cost(j, false) * self.cost_scale)
            .collect();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: self.true_objective(),
            primal: self.x[..self.n].to_vec(),
            duals,
            reduced_costs: reduced,
            iterations: self.iterations,
        })
    }

    /// Primal values of the structural columns at the current point.
    pub fn primal(&self) -> &[f64] {
        &self.x[..self.n]
    }

    /// Objective at the current point.
    pub fn objective(&self) -> f64 {
        self.true_objective()
    }
}

/// Solves one LP with default options.
pub fn solve_lp(lp: &LpInstance) -> Result<LpSolution, LpError> {
    solve_lp_opts(lp, SimplexOptions::default())
}

/// Solves one LP with explicit options.
pub fn solve_lp_opts(lp: &LpInstance, opts: SimplexOptions) -> Result<LpSolution, LpError> {
    let mut s = Simplex::with_opts(lp, opts)?;
    match s.solve()? {
        LpStatus::Optimal => s.solution(),
        status => Ok(LpSolution {
            status,
            objective: match status {
                LpStatus::Infeasible => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            primal: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations: s.iterations,
        }),
    }
}
