use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single_var_ge() -> LpInstance {
    let mut lp = LpInstance::new();
    let x = lp.add_col("x", 1.0, Some(0.0), Some(10.0));
    lp.add_row("floor", RowSense::Ge, 1.0, &[(x, 1.0)]);
    lp
}

#[test]
fn single_variable_lp() {
    let sol = solve_lp(&single_var_ge()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-9);
    assert!((sol.primal[0] - 1.0).abs() < 1e-9);
    // Dual of the >= row in a minimization is +1 here.
    assert!((sol.duals[0] - 1.0).abs() < 1e-9);
}

#[test]
fn symmetric_box_lp() {
    let mut lp = LpInstance::new();
    let x = lp.add_col("x", -1.0, Some(0.0), None);
    let y = lp.add_col("y", -1.0, Some(0.0), None);
    lp.add_row("cap", RowSense::Le, 1.0, &[(x, 1.0), (y, 1.0)]);
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 1.0).abs() < 1e-9);
    assert!((sol.duals[0] + 1.0).abs() < 1e-9, "dual {}", sol.duals[0]);
}

#[test]
fn infeasible_and_unbounded_status() {
    let mut lp = LpInstance::new();
    let x = lp.add_col("x", 1.0, Some(0.0), Some(1.0));
    lp.add_row("too_high", RowSense::Ge, 5.0, &[(x, 1.0)]);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

    let mut lp = LpInstance::new();
    lp.add_col("x", -1.0, Some(0.0), None);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn malformed_instances_error() {
    let mut lp = LpInstance::new();
    lp.add_col("x", 1.0, Some(2.0), Some(1.0));
    assert!(matches!(solve_lp(&lp), Err(LpError::Malformed(_))));

    let mut lp = LpInstance::new();
    let x = lp.add_col("x", f64::NAN, Some(0.0), Some(1.0));
    lp.add_row("r", RowSense::Le, 1.0, &[(x, 1.0)]);
    assert!(matches!(solve_lp(&lp), Err(LpError::Malformed(_))));

    let mut lp = LpInstance::new();
    lp.add_col("x", 1.0, Some(0.0), Some(1.0));
    lp.entries.push((3, 0, 1.0)); // row out of range
    lp.senses.push(RowSense::Le);
    lp.rhs.push(1.0);
    lp.row_names.push("bad".into());
    assert!(matches!(solve_lp(&lp), Err(LpError::Malformed(_))));
}

#[test]
fn equality_rows_and_free_variables() {
    // min x + y  s.t.  x + y = 4, x - y = 1, both free.
    let mut lp = LpInstance::new();
    let x = lp.add_col("x", 1.0, None, None);
    let y = lp.add_col("y", 1.0, None, None);
    lp.add_row("sum", RowSense::Eq, 4.0, &[(x, 1.0), (y, 1.0)]);
    lp.add_row("diff", RowSense::Eq, 1.0, &[(x, 1.0), (y, -1.0)]);
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - 4.0).abs() < 1e-8);
    assert!((sol.primal[0] - 2.5).abs() < 1e-8);
    assert!((sol.primal[1] - 1.5).abs() < 1e-8);
}

/// Dense n x n linear solve for the enumeration oracle below.
fn dense_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for i in (k + 1)..n {
            if a[i * n + k].abs() > best {
                best = a[i * n + k].abs();
                p = i;
            }
        }
        if best < 1e-10 {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(p * n + c, k * n + c);
            }
            b.swap(p, k);
        }
        let piv = a[k * n + k];
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[i * n + k] / piv;
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                a[i * n + c] -= f * a[k * n + c];
            }
            b[i] -= f * b[k];
        }
    }
    Some((0..n).map(|i| b[i] / a[i * n + i]).collect())
}

/// Vertex enumeration for `min c'x  s.t.  A x >= b, x >= 0` with few rows:
/// every vertex has n active constraints drawn from the m rows plus the n
/// sign bounds, so we enumerate complements of size m + n - n = m + extra.
fn covering_lp_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let n = c.len();
    let m = b.len();
    let total = m + n;
    let mut best = f64::INFINITY;
    // Choose which constraints are active: subsets of size n of 0..total,
    // i.e. subsets of size m of inactive ones. Enumerate bitmasks.
    let mut chosen = vec![0usize; n];
    fn rec(
        start: usize,
        k: usize,
        n: usize,
        total: usize,
        chosen: &mut Vec<usize>,
        eval: &mut dyn FnMut(&[usize]),
    ) {
        if k == n {
            eval(chosen);
            return;
        }
        for i in start..total {
            if total - i < n - k {
                break;
            }
            chosen[k] = i;
            rec(i + 1, k + 1, n, total, chosen, eval);
        }
    }
    let mut eval = |active: &[usize]| {
        let mut mat = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (r, &idx) in active.iter().enumerate() {
            if idx < m {
                for j in 0..n {
                    mat[r * n + j] = a[idx][j];
                }
                rhs[r] = b[idx];
            } else {
                mat[r * n + (idx - m)] = 1.0;
                rhs[r] = 0.0;
            }
        }
        if let Some(x) = dense_solve(&mut mat, &mut rhs, n) {
            for xi in &x {
                if *xi < -1e-7 {
                    return;
                }
            }
            for i in 0..m {
                let act: f64 = (0..n).map(|j| a[i][j] * x[j]).sum();
                if act < b[i] - 1e-7 * (1.0 + b[i].abs()) {
                    return;
                }
            }
            let obj: f64 = (0..n).map(|j| c[j] * x[j]).sum();
            if obj < best {
                best = obj;
            }
        }
    };
    rec(0, 0, n, total, &mut chosen, &mut eval);
    best
}

#[test]
fn dense_lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..3 {
        let n = 20;
        let m = 4;
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
        let a: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(0.1..5.0)).collect())
            .collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(5.0..20.0)).collect();

        let mut lp = LpInstance::new();
        for (j, cj) in c.iter().enumerate() {
            lp.add_col(format!("x{}", j), *cj, Some(0.0), None);
        }
        for i in 0..m {
            let coefs: Vec<(usize, f64)> = (0..n).map(|j| (j, a[i][j])).collect();
            lp.add_row(format!("cover{}", i), RowSense::Ge, b[i], &coefs);
        }
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = covering_lp_oracle(&c, &a, &b);
        assert!(
            (sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
            "trial {}: simplex {} vs enumeration {}",
            trial,
            sol.objective,
            oracle
        );
    }
}

#[test]
fn strong_duality_and_dual_signs_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut optimal_seen = 0;
    for _ in 0..60 {
        let n = rng.gen_range(2..8);
        let m = rng.gen_range(1..6);
        let mut lp = LpInstance::new();
        for j in 0..n {
            let lower = if rng.gen_bool(0.8) { Some(rng.gen_range(-3.0..0.0)) } else { None };
            let upper = if rng.gen_bool(0.8) { Some(rng.gen_range(0.0..5.0)) } else { None };
            lp.add_col(format!("x{}", j), rng.gen_range(-4.0..4.0), lower, upper);
        }
        for i in 0..m {
            let sense = match rng.gen_range(0..3) {
                0 => RowSense::Le,
                1 => RowSense::Eq,
                _ => RowSense::Ge,
            };
            let mut coefs: Vec<(usize, f64)> = Vec::new();
            for j in 0..n {
                if rng.gen_bool(0.7) {
                    coefs.push((j, rng.gen_range(-3.0..3.0)));
                }
            }
            lp.add_row(format!("r{}", i), sense, rng.gen_range(-4.0..4.0), &coefs);
        }
        let sol = match solve_lp(&lp) {
            Ok(s) => s,
            Err(LpError::Numerical(_)) => continue,
            Err(e) => panic!("unexpected error: {}", e),
        };
        if sol.status != LpStatus::Optimal {
            continue;
        }
        optimal_seen += 1;
        let gap = (sol.objective - sol.dual_objective(&lp)).abs();
        assert!(
            gap <= 1e-6 * (1.0 + sol.objective.abs()),
            "duality gap {} at objective {}",
            gap,
            sol.objective
        );
        for (i, sense) in lp.senses.iter().enumerate() {
            match sense {
                RowSense::Le => assert!(sol.duals[i] <= 1e-7, "<= row dual {}", sol.duals[i]),
                RowSense::Ge => assert!(sol.duals[i] >= -1e-7, ">= row dual {}", sol.duals[i]),
                RowSense::Eq => {}
            }
        }
    }
    assert!(optimal_seen >= 20, "only {} optimal instances", optimal_seen);
}

#[test]
fn warm_restart_after_bound_and_rhs_changes() {
    let mut lp = LpInstance::new();
    let x = lp.add_col("x", 1.0, Some(0.0), Some(10.0));
    let y = lp.add_col("y", 2.0, Some(0.0), Some(10.0));
    lp.add_row("mix", RowSense::Ge, 4.0, &[(x, 1.0), (y, 1.0)]);
    let mut s = Simplex::new(&lp).unwrap();
    assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
    assert!((s.objective() - 4.0).abs() < 1e-9);

    s.set_col_bounds(x, Some(0.0), Some(1.0));
    assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
    assert!((s.objective() - 7.0).abs() < 1e-9); // x=1, y=3

    s.set_rhs(0, 6.0);
    assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
    assert!((s.objective() - 11.0).abs() < 1e-9); // x=1, y=5
}

// ---- branch and bound ----

#[test]
fn knapsack_trivial() {
    // max 3a + 2b with a + b <= 1 becomes min -3a - 2b.
    let mut lp = LpInstance::new();
    let a = lp.add_col("a", -3.0, Some(0.0), Some(1.0));
    let b = lp.add_col("b", -2.0, Some(0.0), Some(1.0));
    lp.add_row("cap", RowSense::Le, 1.0, &[(a, 1.0), (b, 1.0)]);
    let milp = MilpInstance { lp, binaries: vec![a, b] };
    let sol = solve_milp(&milp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(sol.integral);
    assert!((sol.objective + 3.0).abs() < 1e-9);
    assert!((sol.primal[a] - 1.0).abs() < 1e-6);
    assert!(sol.primal[b].abs() < 1e-6);
}

#[test]
fn fixed_binaries_reduce_to_lp() {
    let mut lp = LpInstance::new();
    let a = lp.add_col("a", 5.0, Some(1.0), Some(1.0));
    let x = lp.add_col("x", 1.0, Some(0.0), None);
    lp.add_row("link", RowSense::Ge, 2.0, &[(a, 1.0), (x, 1.0)]);
    let lp_only = solve_lp(&lp).unwrap();
    let milp = MilpInstance { lp, binaries: vec![a] };
    let sol = solve_milp(&milp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - lp_only.objective).abs() < 1e-9);
    assert_eq!(sol.nodes, 1);
}

/// Pure-binary oracle: direct enumeration of all assignments, feasibility
/// checked by arithmetic only.
fn binary_enumeration_oracle(milp: &MilpInstance) -> f64 {
    let n = milp.lp.n_cols();
    assert_eq!(milp.binaries.len(), n);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); milp.lp.n_rows()];
    for &(r, c, v) in &milp.lp.entries {
        rows[r].push((c, v));
    }
    let mut best = f64::INFINITY;
    'outer: for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        for j in 0..n {
            if let Some(l) = milp.lp.lower[j] {
                if x[j] < l - 1e-9 {
                    continue 'outer;
                }
            }
            if let Some(u) = milp.lp.upper[j] {
                if x[j] > u + 1e-9 {
                    continue 'outer;
                }
            }
        }
        for (i, coefs) in rows.iter().enumerate() {
            let act: f64 = coefs.iter().map(|&(c, v)| v * x[c]).sum();
            let ok = match milp.lp.senses[i] {
                RowSense::Le => act <= milp.lp.rhs[i] + 1e-9,
                RowSense::Ge => act >= milp.lp.rhs[i] - 1e-9,
                RowSense::Eq => (act - milp.lp.rhs[i]).abs() <= 1e-9,
            };
            if !ok {
                continue 'outer;
            }
        }
        let obj: f64 = (0..n).map(|j| milp.lp.objective[j] * x[j]).sum();
        best = best.min(obj);
    }
    best
}

#[test]
fn eight_binary_instances_match_full_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for trial in 0..8 {
        let n = 8;
        let mut lp = LpInstance::new();
        for j in 0..n {
            lp.add_col(format!("b{}", j), rng.gen_range(-6.0..6.0), Some(0.0), Some(1.0));
        }
        for i in 0..4 {
            let coefs: Vec<(usize, f64)> =
                (0..n).map(|j| (j, rng.gen_range(-2.0..4.0))).collect();
            lp.add_row(format!("r{}", i), RowSense::Le, rng.gen_range(2.0..8.0), &coefs);
        }
        let milp = MilpInstance { lp, binaries: (0..n).collect() };
        let oracle = binary_enumeration_oracle(&milp);
        let sol = solve_milp(&milp).unwrap();
        if oracle.is_infinite() {
            assert_eq!(sol.status, LpStatus::Infeasible, "trial {}", trial);
        } else {
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!(sol.integral);
            assert!(
                (sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
                "trial {}: bb {} vs enumeration {}",
                trial,
                sol.objective,
                oracle
            );
        }
    }
}

#[test]
fn twelve_binary_mixed_instance_matches_enumeration_with_lp() {
    // Binaries plus continuous recourse; oracle fixes each assignment and
    // solves the remaining LP.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let nb = 12;
    let mut lp = LpInstance::new();
    for j in 0..nb {
        lp.add_col(format!("b{}", j), rng.gen_range(0.5..4.0), Some(0.0), Some(1.0));
    }
    let y = lp.add_col("y", 1.0, Some(0.0), None);
    let coefs: Vec<(usize, f64)> = (0..nb)
        .map(|j| (j, rng.gen_range(0.5..2.0)))
        .chain(std::iter::once((y, 1.0)))
        .collect();
    lp.add_row("demand", RowSense::Ge, 6.0, &coefs);
    let milp = MilpInstance { lp: lp.clone(), binaries: (0..nb).collect() };

    let mut oracle = f64::INFINITY;
    for mask in 0u32..(1 << nb) {
        let mut fixed = lp.clone();
        for j in 0..nb {
            fixed.fix_col(j, ((mask >> j) & 1) as f64);
        }
        let s = solve_lp(&fixed).unwrap();
        if s.status == LpStatus::Optimal && s.objective < oracle {
            oracle = s.objective;
        }
    }
    let sol = solve_milp(&milp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()));
}

// ---- separable quadratic penalties ----

fn lone_continuous(lb: f64, ub: f64) -> MilpInstance {
    let mut lp = LpInstance::new();
    lp.add_col("x", 0.0, Some(lb), Some(ub));
    MilpInstance { lp, binaries: vec![] }
}

#[test]
fn binary_penalty_is_exact_at_binary_points() {
    let mut lp = LpInstance::new();
    let x = lp.add_col("x", 0.0, Some(0.0), Some(1.0));
    let milp = MilpInstance { lp, binaries: vec![x] };
    let center = 0.5;
    let weight = 2.0;
    let pen = apply_separable_quadratic(&milp, &[center], &[weight], 4, 1.0).unwrap();
    // (w/2)(x - c)^2 at x in {0, 1} is 0.25 for both points.
    for v in [0.0, 1.0] {
        let lin = pen.lp.objective[x] * v + pen.lp.objective_offset;
        let exact = 0.5 * weight * (v - center) * (v - center);
        assert!((lin - exact).abs() < 1e-12, "x={}: {} vs {}", v, lin, exact);
    }
}

#[test]
fn continuous_penalty_respects_chord_error_bound() {
    let (weight, half_width, segments) = (1.0, 2.0, 4usize);
    let milp = lone_continuous(-2.0, 2.0);
    let pen = apply_separable_quadratic(&milp, &[0.0], &[weight], segments, half_width).unwrap();
    let bound = (half_width / segments as f64).powi(2) * weight / 8.0;
    assert!((bound - 0.03125).abs() < 1e-12);
    // Pin x on a grid, minimize the epigraph variable, compare to the
    // true quadratic: over-approximation within the chord error bound.
    for step in 0..=80 {
        let v = -2.0 + 4.0 * step as f64 / 80.0;
        let mut probe = pen.lp.clone();
        probe.fix_col(0, v);
        let sol = solve_lp(&probe).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let quad = 0.5 * weight * v * v;
        assert!(sol.objective >= quad - 1e-9, "under-approximation at {}", v);
        assert!(
            sol.objective - quad <= bound + 1e-9,
            "error {} above bound {} at x={}",
            sol.objective - quad,
            bound,
            v
        );
    }
    // Exact at breakpoints.
    for k in 0..=(2 * segments) {
        let v = -half_width + k as f64 * half_width / segments as f64;
        let mut probe = pen.lp.clone();
        probe.fix_col(0, v);
        let sol = solve_lp(&probe).unwrap();
        let quad = 0.5 * weight * v * v;
        assert!(
            (sol.objective - quad).abs() < 1e-9,
            "breakpoint {}: {} vs {}",
            v,
            sol.objective,
            quad
        );
    }
}

#[test]
fn zero_weights_leave_instance_unchanged() {
    let milp = lone_continuous(0.0, 1.0);
    let pen = apply_separable_quadratic(&milp, &[0.3], &[0.0], 4, 1.0).unwrap();
    assert_eq!(pen.lp.n_cols(), milp.lp.n_cols());
    assert_eq!(pen.lp.n_rows(), milp.lp.n_rows());
    assert_eq!(pen.lp.objective, milp.lp.objective);
    assert_eq!(pen.lp.objective_offset, milp.lp.objective_offset);
}

#[test]
fn penalty_rejects_unbounded_continuous_and_bad_parameters() {
    let mut lp = LpInstance::new();
    lp.add_col("x", 0.0, Some(0.0), None);
    let milp = MilpInstance { lp, binaries: vec![] };
    assert!(matches!(
        apply_separable_quadratic(&milp, &[0.0], &[1.0], 4, 1.0),
        Err(LpError::InvalidPenalty(_))
    ));
    let ok = lone_continuous(0.0, 1.0);
    assert!(matches!(
        apply_separable_quadratic(&ok, &[0.0], &[1.0], 1, 1.0),
        Err(LpError::InvalidPenalty(_))
    ));
    assert!(matches!(
        apply_separable_quadratic(&ok, &[0.0], &[1.0], 4, 0.0),
        Err(LpError::InvalidPenalty(_))
    ));
    assert!(matches!(
        apply_separable_quadratic(&ok, &[0.0], &[-1.0], 4, 1.0),
        Err(LpError::InvalidPenalty(_))
    ));
}

#[test]
fn lp_text_dump_roundtrips_visually() {
    let mut lp = LpInstance::new();
    let x = lp.add_col("make", 2.5, Some(0.0), Some(4.0));
    let y = lp.add_col("buy", 1.0, None, None);
    lp.add_row("need", RowSense::Ge, 3.0, &[(x, 1.0), (y, 1.0)]);
    let mut buf = Vec::new();
    write_lp_text(&lp, &[x], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("Minimize"));
    assert!(text.contains("Subject To"));
    assert!(text.contains("need:"));
    assert!(text.contains("Bounds"));
    assert!(text.contains("buy free"));
    assert!(text.contains("Binaries"));
    assert!(text.ends_with("End\n"));
}
