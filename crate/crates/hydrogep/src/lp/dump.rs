//! Plain-text dump of an instance for debugging, in a fixed-point LP
//! interchange style.
//!
//! Layout: a `Minimize` section with the objective (including the constant
//! offset when nonzero), a `Subject To` section with one named row per
//! line, a `Bounds` section listing every column (`free`, one-sided or
//! two-sided, `= v` for fixed), an optional `Binaries` section, and `End`.
//! All numbers are written as fixed-point with 12 decimal places.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::{LpInstance, RowSense};

fn name_of(raw: &str, prefix: &str, idx: usize) -> String {
    if raw.is_empty() {
        format!("{}{}", prefix, idx)
    } else {
        raw.replace([' ', '\t'], "_")
    }
}

pub fn write_lp_text<W: Write>(lp: &LpInstance, binaries: &[usize], out: &mut W) -> io::Result<()> {
    let col = |j: usize| name_of(&lp.col_names[j], "c", j);
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            write!(out, " {} {:+.12} {}", "", c, col(j))?;
        }
    }
    if lp.objective_offset != 0.0 {
        write!(out, " {:+.12}", lp.objective_offset)?;
    }
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    // Gather row-wise views from the triplets.
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.n_rows()];
    for &(r, c, v) in &lp.entries {
        rows[r].push((c, v));
    }
    for (i, coefs) in rows.iter().enumerate() {
        let mut coefs = coefs.clone();
        coefs.sort_unstable_by_key(|&(c, _)| c);
        write!(out, " {}:", name_of(&lp.row_names[i], "r", i))?;
        for &(c, v) in &coefs {
            write!(out, " {:+.12} {}", v, col(c))?;
        }
        let op = match lp.senses[i] {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        };
        writeln!(out, " {} {:.12}", op, lp.rhs[i])?;
    }
    writeln!(out, "Bounds")?;
    for j in 0..lp.n_cols() {
        match (lp.lower[j], lp.upper[j]) {
            (None, None) => writeln!(out, " {} free", col(j))?,
            (Some(l), Some(u)) if l == u => writeln!(out, " {} = {:.12}", col(j), l)?,
            (Some(l), Some(u)) => writeln!(out, " {:.12} <= {} <= {:.12}", l, col(j), u)?,
            (Some(l), None) => writeln!(out, " {} >= {:.12}", col(j), l)?,
            (None, Some(u)) => writeln!(out, " {} <= {:.12}", col(j), u)?,
        }
    }
    if !binaries.is_empty() {
        writeln!(out, "Binaries")?;
        write!(out, " ")?;
        for &j in binaries {
            write!(out, " {}", col(j))?;
        }
        writeln!(out)?;
    }
    writeln!(out, "End")?;
    Ok(())
}

pub fn write_lp_text_file<P: AsRef<Path>>(
    lp: &LpInstance,
    binaries: &[usize],
    path: P,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_lp_text(lp, binaries, &mut out)
}
