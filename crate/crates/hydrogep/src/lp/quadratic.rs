//! Separable quadratic penalty terms `sum_i (w_i/2) (x_i - c_i)^2` attached
//! to an existing instance without leaving the linear world.
//!
//! Binary columns use the exact identity `(x - c)^2 = (1 - 2c) x + c^2` on
//! `{0, 1}` (since `x^2 = x` there), so they contribute only a linear cost
//! and a constant. Continuous columns get a convex piecewise-linear
//! over-approximation in epigraph form: one auxiliary column bounded below
//! by the chords of the parabola over `[c - h, c + h]`, split into pieces
//! of length `h / segments`. The chord construction never under-estimates
//! the quadratic inside the window and is exact at every breakpoint; the
//! error anywhere in the window is at most `(h / segments)^2 * w / 8`.

use super::{LpError, MilpInstance, RowSense};

pub fn apply_separable_quadratic(
    milp: &MilpInstance,
    center: &[f64],
    weights: &[f64],
    segments: usize,
    half_width: f64,
) -> Result<MilpInstance, LpError> {
    let n = milp.lp.n_cols();
    if center.len() != n || weights.len() != n {
        return Err(LpError::InvalidPenalty(format!(
            "center/weights lengths {}/{} do not match {} columns",
            center.len(),
            weights.len(),
            n
        )));
    }
    if segments < 2 {
        return Err(LpError::InvalidPenalty(format!(
            "need at least 2 segments, got {}",
            segments
        )));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(LpError::InvalidPenalty(format!(
            "half width must be positive and finite, got {}",
            half_width
        )));
    }
    for (i, (&w, &c)) in weights.iter().zip(center).enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(LpError::InvalidPenalty(format!(
                "weight of column {} is {}",
                i, w
            )));
        }
        if w > 0.0 && !c.is_finite() {
            return Err(LpError::InvalidPenalty(format!(
                "center of weighted column {} is {}",
                i, c
            )));
        }
    }

    let mut out = milp.clone();
    let is_binary: Vec<bool> = {
        let mut v = vec![false; n];
        for &j in &milp.binaries {
            v[j] = true;
        }
        v
    };

    for j in 0..n {
        let w = weights[j];
        if w == 0.0 {
            continue;
        }
        let c = center[j];
        if is_binary[j] {
            out.lp.objective[j] += 0.5 * w * (1.0 - 2.0 * c);
            out.lp.objective_offset += 0.5 * w * c * c;
            continue;
        }
        let bounded = milp.lp.lower[j].is_some() && milp.lp.upper[j].is_some();
        if !bounded {
            return Err(LpError::InvalidPenalty(format!(
                "column {} ({}) carries a quadratic weight but is neither binary nor bounded",
                j, milp.lp.col_names[j]
            )));
        }
        let quad = |t: f64| 0.5 * w * (t - c) * (t - c);
        let epi = out
            .lp
            .add_col(format!("qpen[{}]", milp.lp.col_names[j]), 1.0, Some(0.0), None);
        let piece = half_width / segments as f64;
        let lo = c - half_width;
        let n_pieces = 2 * segments;
        for k in 0..n_pieces {
            let a = lo + piece * k as f64;
            let b = a + piece;
            let slope = 0.5 * w * (a + b - 2.0 * c);
            // epi >= quad(a) + slope * (x - a)
            out.lp.add_row(
                format!("qpen[{}][{}]", milp.lp.col_names[j], k),
                RowSense::Ge,
                quad(a) - slope * a,
                &[(epi, 1.0), (j, -slope)],
            );
        }
    }
    Ok(out)
}
