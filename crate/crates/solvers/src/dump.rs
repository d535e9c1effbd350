//! Line-oriented text format for problems and solutions.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! `parse(dump(p))` reproduces every coefficient bit for bit.
//!
//! Linear program:
//!
//! ```text
//! lp maximize
//! vars: 3
//! objective: 1.0 0.0 -2.5
//! free: 2
//! row: 0 rhs 0.5 0:1.0 1:1.0
//! row: 1 rhs -1.0 2:1.0
//! end
//! ```
//!
//! Semidefinite program (entries are `block,row,col:value`, upper triangle):
//!
//! ```text
//! sdp maximize
//! blocks: 2 1
//! objective: 0,0,1:0.5
//! row: 0 rhs 1.0 0,0,0:1.0 0,1,1:1.0
//! end
//! ```
//!
//! Solution:
//!
//! ```text
//! status optimal
//! objective 0.5
//! gap 0.0
//! primal_residual 0.0
//! dual_infeasibility 0.0
//! iterations 3
//! values: 0.5 0.0
//! duals: 1.0
//! end
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write;

use crate::error::{Result, SolverError};
use crate::lp::{Bound, LinearProgram, SolverSolution, Status};
use crate::sdp::{SdpConstraint, SemidefiniteProgram, SymEntry};

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn perr(line: usize, message: impl Into<String>) -> SolverError {
    SolverError::Parse { line, message: message.into() }
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| perr(line, format!("bad number '{s}'")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(perr(line, format!("non-finite number '{s}'")))
    }
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| perr(line, format!("bad index '{s}'")))
}

/// Meaningful lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Writes the program with its constraint entries grouped by row, keeping
/// the relative order of entries within each row.
pub fn dump_lp(lp: &LinearProgram) -> String {
    let mut out = String::from("lp maximize\n");
    let _ = writeln!(out, "vars: {}", lp.num_vars());
    out.push_str("objective:");
    for c in &lp.objective {
        let _ = write!(out, " {}", num(*c));
    }
    out.push('\n');
    out.push_str("free:");
    for (j, b) in lp.bounds.iter().enumerate() {
        if *b == Bound::Free {
            let _ = write!(out, " {j}");
        }
    }
    out.push('\n');
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_rows()];
    for &(r, c, v) in &lp.triplets {
        rows[r].push((c, v));
    }
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(out, "row: {i} rhs {}", num(lp.rhs[i]));
        for &(c, v) in row {
            let _ = write!(out, " {c}:{}", num(v));
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

pub fn parse_lp(text: &str) -> Result<LinearProgram> {
    let mut it = lines(text);
    match it.next() {
        Some((_, "lp maximize")) => {}
        Some((n, other)) => return Err(perr(n, format!("expected 'lp maximize', found '{other}'"))),
        None => return Err(perr(0, "empty input")),
    }
    let mut lp = LinearProgram::new();
    let mut vars: Option<usize> = None;
    let mut ended = false;
    for (n, l) in it.by_ref() {
        if l == "end" {
            ended = true;
            break;
        }
        let (key, rest) = l.split_once(':').ok_or_else(|| perr(n, "expected 'key: ...'"))?;
        let mut toks = rest.split_whitespace();
        match key {
            "vars" => {
                let v = parse_usize(n, toks.next().ok_or_else(|| perr(n, "missing count"))?)?;
                vars = Some(v);
                lp.objective = vec![0.0; v];
                lp.bounds = vec![Bound::NonNegative; v];
            }
            "objective" => {
                let v = vars.ok_or_else(|| perr(n, "objective before vars"))?;
                let costs = toks.map(|t| parse_f64(n, t)).collect::<Result<Vec<_>>>()?;
                if costs.len() != v {
                    return Err(perr(n, format!("{} costs for {v} variables", costs.len())));
                }
                lp.objective = costs;
            }
            "free" => {
                let v = vars.ok_or_else(|| perr(n, "free list before vars"))?;
                for t in toks {
                    let j = parse_usize(n, t)?;
                    if j >= v {
                        return Err(perr(n, format!("free variable {j} out of range")));
                    }
                    lp.bounds[j] = Bound::Free;
                }
            }
            "row" => {
                let idx = parse_usize(n, toks.next().ok_or_else(|| perr(n, "missing row index"))?)?;
                if idx != lp.num_rows() {
                    return Err(perr(n, format!("row {idx} out of order")));
                }
                if toks.next() != Some("rhs") {
                    return Err(perr(n, "expected 'rhs'"));
                }
                let rhs = parse_f64(n, toks.next().ok_or_else(|| perr(n, "missing rhs"))?)?;
                lp.rhs.push(rhs);
                for t in toks {
                    let (c, v) = t.split_once(':').ok_or_else(|| perr(n, format!("bad entry '{t}'")))?;
                    lp.triplets.push((idx, parse_usize(n, c)?, parse_f64(n, v)?));
                }
            }
            other => return Err(perr(n, format!("unknown key '{other}'"))),
        }
    }
    if !ended {
        return Err(perr(0, "missing 'end'"));
    }
    if vars.is_none() {
        return Err(perr(0, "missing 'vars'"));
    }
    lp.validate()?;
    Ok(lp)
}

fn write_entries(out: &mut String, entries: &[SymEntry]) {
    for e in entries {
        let _ = write!(out, " {},{},{}:{}", e.block, e.row, e.col, num(e.value));
    }
}

fn parse_entry(n: usize, t: &str) -> Result<SymEntry> {
    let (pos, v) = t.split_once(':').ok_or_else(|| perr(n, format!("bad entry '{t}'")))?;
    let idx: Vec<&str> = pos.split(',').collect();
    if idx.len() != 3 {
        return Err(perr(n, format!("bad entry position '{pos}'")));
    }
    Ok(SymEntry {
        block: parse_usize(n, idx[0])?,
        row: parse_usize(n, idx[1])?,
        col: parse_usize(n, idx[2])?,
        value: parse_f64(n, v)?,
    })
}

pub fn dump_sdp(p: &SemidefiniteProgram) -> String {
    let mut out = String::from("sdp maximize\nblocks:");
    for b in &p.blocks {
        let _ = write!(out, " {b}");
    }
    out.push_str("\nobjective:");
    write_entries(&mut out, &p.objective);
    out.push('\n');
    for (i, c) in p.constraints.iter().enumerate() {
        let _ = write!(out, "row: {i} rhs {}", num(c.rhs));
        write_entries(&mut out, &c.entries);
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

pub fn parse_sdp(text: &str) -> Result<SemidefiniteProgram> {
    let mut it = lines(text);
    match it.next() {
        Some((_, "sdp maximize")) => {}
        Some((n, other)) => return Err(perr(n, format!("expected 'sdp maximize', found '{other}'"))),
        None => return Err(perr(0, "empty input")),
    }
    let mut p = SemidefiniteProgram::new();
    let mut ended = false;
    for (n, l) in it.by_ref() {
        if l == "end" {
            ended = true;
            break;
        }
        let (key, rest) = l.split_once(':').ok_or_else(|| perr(n, "expected 'key: ...'"))?;
        let mut toks = rest.split_whitespace();
        match key {
            "blocks" => {
                p.blocks = toks.map(|t| parse_usize(n, t)).collect::<Result<_>>()?;
            }
            "objective" => {
                p.objective = toks.map(|t| parse_entry(n, t)).collect::<Result<_>>()?;
            }
            "row" => {
                let idx = parse_usize(n, toks.next().ok_or_else(|| perr(n, "missing row index"))?)?;
                if idx != p.constraints.len() {
                    return Err(perr(n, format!("row {idx} out of order")));
                }
                if toks.next() != Some("rhs") {
                    return Err(perr(n, "expected 'rhs'"));
                }
                let rhs = parse_f64(n, toks.next().ok_or_else(|| perr(n, "missing rhs"))?)?;
                let entries = toks.map(|t| parse_entry(n, t)).collect::<Result<_>>()?;
                p.constraints.push(SdpConstraint { entries, rhs });
            }
            other => return Err(perr(n, format!("unknown key '{other}'"))),
        }
    }
    if !ended {
        return Err(perr(0, "missing 'end'"));
    }
    p.validate()?;
    Ok(p)
}

pub fn dump_solution(s: &SolverSolution) -> String {
    let status = match s.status {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::MaxIterations => "max-iterations",
    };
    let mut out = format!("status {status}\n");
    let _ = writeln!(out, "objective {}", num(s.objective));
    let _ = writeln!(out, "gap {}", num(s.gap));
    let _ = writeln!(out, "primal_residual {}", num(s.primal_residual));
    let _ = writeln!(out, "dual_infeasibility {}", num(s.dual_infeasibility));
    let _ = writeln!(out, "iterations {}", s.iterations);
    out.push_str("values:");
    for v in &s.values {
        let _ = write!(out, " {}", num(*v));
    }
    out.push_str("\nduals:");
    for v in &s.duals {
        let _ = write!(out, " {}", num(*v));
    }
    out.push_str("\nend\n");
    out
}

pub fn parse_solution(text: &str) -> Result<SolverSolution> {
    let mut sol = SolverSolution {
        status: Status::MaxIterations,
        values: Vec::new(),
        objective: f64::NAN,
        gap: f64::INFINITY,
        primal_residual: f64::INFINITY,
        duals: Vec::new(),
        dual_infeasibility: f64::INFINITY,
        iterations: 0,
    };
    let mut seen_status = false;
    let mut ended = false;
    // dual infeasibility may legitimately be reported as infinite
    let parse_any = |n: usize, s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| perr(n, format!("bad number '{s}'")))
    };
    for (n, l) in lines(text) {
        if l == "end" {
            ended = true;
            break;
        }
        if let Some(rest) = l.strip_prefix("values:") {
            sol.values = rest.split_whitespace().map(|t| parse_f64(n, t)).collect::<Result<_>>()?;
            continue;
        }
        if let Some(rest) = l.strip_prefix("duals:") {
            sol.duals = rest.split_whitespace().map(|t| parse_f64(n, t)).collect::<Result<_>>()?;
            continue;
        }
        let (key, val) = l.split_once(' ').ok_or_else(|| perr(n, format!("unexpected line '{l}'")))?;
        match key {
            "status" => {
                sol.status = match val.trim() {
                    "optimal" => Status::Optimal,
                    "infeasible" => Status::Infeasible,
                    "max-iterations" => Status::MaxIterations,
                    other => return Err(perr(n, format!("unknown status '{other}'"))),
                };
                seen_status = true;
            }
            "objective" => sol.objective = parse_any(n, val.trim())?,
            "gap" => sol.gap = parse_any(n, val.trim())?,
            "primal_residual" => sol.primal_residual = parse_any(n, val.trim())?,
            "dual_infeasibility" => sol.dual_infeasibility = parse_any(n, val.trim())?,
            "iterations" => sol.iterations = parse_usize(n, val.trim())?,
            other => return Err(perr(n, format!("unknown key '{other}'"))),
        }
    }
    if !seen_status {
        return Err(perr(0, "missing 'status'"));
    }
    if !ended {
        return Err(perr(0, "missing 'end'"));
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_round_trip_is_exact() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.1, Bound::NonNegative);
        let y = lp.add_var(-1e-300, Bound::Free);
        lp.add_row(&[(x, 1.0 / 3.0), (y, -0.0)], 2.0f64.sqrt());
        lp.add_row(&[], -7.25);
        lp.add_row(&[(y, 6.02214076e23)], 0.0);
        let text = dump_lp(&lp);
        assert_eq!(parse_lp(&text).unwrap(), lp);
    }

    #[test]
    fn sdp_round_trip_is_exact() {
        let mut p = SemidefiniteProgram::new();
        let b = p.add_block(3);
        p.add_block(1);
        p.add_objective([SymEntry::new(b, 0, 2, 0.1 + 0.2)]);
        p.add_constraint(vec![SymEntry::new(1, 0, 0, -1.5), SymEntry::new(b, 1, 1, 1e-12)], 1.0);
        assert_eq!(parse_sdp(&dump_sdp(&p)).unwrap(), p);
    }

    #[test]
    fn solution_round_trip() {
        let s = SolverSolution {
            status: Status::Optimal,
            values: vec![0.5, 1.0 / 7.0],
            objective: 0.5,
            gap: 1e-13,
            primal_residual: 0.0,
            duals: vec![-2.0],
            dual_infeasibility: 0.0,
            iterations: 4,
        };
        assert_eq!(parse_solution(&dump_solution(&s)).unwrap(), s);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "lp maximize\nvars: 1\nobjective: 1.0\nrow: 0 rhs abc\nend\n";
        match parse_lp(text) {
            Err(SolverError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_lp("lp maximize\nvars: 1\n").is_err());
        assert!(parse_sdp("sdp maximize\nblocks: 2\nobjective: 0,1,0:1.0\nend\n").is_err());
    }
}
