//! Branch-and-bound over the binary columns of a [`MilpInstance`].
//!
//! LP-relaxation bounding with best-first node selection, most-fractional
//! branching (ties to the lowest column index) and an absolute pruning
//! tolerance of `1e-6 * (1 + |incumbent|)`. One simplex workspace is reused
//! across nodes so each node solve warm-starts from the previous basis.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::Simplex;
use super::{is_integral, LpError, LpStatus, MilpInstance, MilpSolution, SimplexOptions};

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<(usize, u8)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; invert so the lowest bound pops first,
    // with the node id as the deterministic tie-break.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub fn solve_milp(milp: &MilpInstance) -> Result<MilpSolution, LpError> {
    solve_milp_opts(milp, SimplexOptions::default())
}

pub fn solve_milp_opts(milp: &MilpInstance, opts: SimplexOptions) -> Result<MilpSolution, LpError> {
    milp.check()?;
    let mut solver = Simplex::with_opts(&milp.lp, opts)?;

    // Relaxation bounds for the binary columns, respecting fixings already
    // present in the instance (an existing unit pinned to 1 stays pinned).
    let base: Vec<(usize, f64, f64)> = milp
        .binaries
        .iter()
        .map(|&j| {
            let l = milp.lp.lower[j].unwrap_or(0.0).max(0.0);
            let u = milp.lp.upper[j].unwrap_or(1.0).min(1.0);
            (j, l, u)
        })
        .collect();
    for &(j, l, u) in &base {
        solver.set_col_bounds(j, Some(l), Some(u));
    }

    let mut nodes_solved = 0usize;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;

    // Root relaxation.
    match solver.solve()? {
        LpStatus::Infeasible => {
            return Ok(MilpSolution {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                primal: Vec::new(),
                integral: false,
                nodes: 1,
            })
        }
        LpStatus::Unbounded => {
            return Ok(MilpSolution {
                status: LpStatus::Unbounded,
                objective: f64::NEG_INFINITY,
                primal: Vec::new(),
                integral: false,
                nodes: 1,
            })
        }
        LpStatus::Optimal => {}
    }
    nodes_solved += 1;
    process_point(
        &solver.primal().to_vec(),
        solver.objective(),
        &milp.binaries,
        &mut incumbent,
        &mut heap,
        &mut next_id,
        &[],
    );

    while let Some(node) = heap.pop() {
        if let Some((inc_obj, _)) = &incumbent {
            if node.bound >= inc_obj - prune_tol(*inc_obj) {
                break; // best-first: every remaining node is no better
            }
        }
        for &(j, l, u) in &base {
            solver.set_col_bounds(j, Some(l), Some(u));
        }
        for &(j, v) in &node.fixes {
            solver.set_col_bounds(j, Some(v as f64), Some(v as f64));
        }
        nodes_solved += 1;
        match solver.solve()? {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(LpError::Numerical(
                    "unbounded node relaxation below a bounded root".into(),
                ))
            }
            LpStatus::Optimal => {}
        }
        let obj = solver.objective();
        if let Some((inc_obj, _)) = &incumbent {
            if obj >= inc_obj - prune_tol(*inc_obj) {
                continue;
            }
        }
        process_point(
            &solver.primal().to_vec(),
            obj,
            &milp.binaries,
            &mut incumbent,
            &mut heap,
            &mut next_id,
            &node.fixes,
        );
    }

    match incumbent {
        Some((obj, primal)) => {
            let integral = milp.binaries.iter().all(|&j| is_integral(primal[j]));
            Ok(MilpSolution {
                status: LpStatus::Optimal,
                objective: obj,
                primal,
                integral,
                nodes: nodes_solved,
            })
        }
        None => Ok(MilpSolution {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            primal: Vec::new(),
            integral: false,
            nodes: nodes_solved,
        }),
    }
}

fn prune_tol(incumbent: f64) -> f64 {
    1e-6 * (1.0 + incumbent.abs())
}

/// Either accepts the point as a new incumbent (all binaries integral) or
/// branches on the most fractional binary.
fn process_point(
    primal: &[f64],
    obj: f64,
    binaries: &[usize],
    incumbent: &mut Option<(f64, Vec<f64>)>,
    heap: &mut BinaryHeap<Node>,
    next_id: &mut usize,
    fixes: &[(usize, u8)],
) {
    let mut branch_col = usize::MAX;
    let mut branch_score = f64::INFINITY; // distance to 0.5; smaller is more fractional
    for &j in binaries {
        let v = primal[j];
        if is_integral(v) {
            continue;
        }
        let score = (v - 0.5).abs();
        if score < branch_score - 1e-12 {
            branch_score = score;
            branch_col = j;
        }
    }
    if branch_col == usize::MAX {
        let better = match incumbent {
            Some((inc, _)) => obj < *inc - 1e-9,
            None => true,
        };
        if better {
            *incumbent = Some((obj, primal.to_vec()));
        }
        return;
    }
    for v in [0u8, 1u8] {
        let mut f = fixes.to_vec();
        f.push((branch_col, v));
        heap.push(Node { bound: obj, id: *next_id, fixes: f });
        *next_id += 1;
    }
}
