//! Pluggable solver engines.
//!
//! [`Builtin`] runs the in-crate solvers. [`External`] pipes the text dump
//! of a problem into a command's standard input and parses a solution in
//! the dump format from its standard output, so another engine can be
//! dropped in without touching callers.

use std::io::Write;
use std::process::{Command, Stdio};

use crate::dump::{dump_lp, dump_sdp, parse_solution};
use crate::error::{Result, SolverError};
use crate::lp::{solve_lp, LinearProgram, SolverSolution};
use crate::sdp::{solve_sdp, SemidefiniteProgram};

pub trait Engine {
    fn solve_lp(&self, lp: &LinearProgram, tol: f64) -> Result<SolverSolution>;
    fn solve_sdp(&self, sdp: &SemidefiniteProgram, tol: f64) -> Result<SolverSolution>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Builtin;

impl Engine for Builtin {
    fn solve_lp(&self, lp: &LinearProgram, tol: f64) -> Result<SolverSolution> {
        solve_lp(lp, tol)
    }

    fn solve_sdp(&self, sdp: &SemidefiniteProgram, tol: f64) -> Result<SolverSolution> {
        solve_sdp(sdp, tol)
    }
}

/// Runs `program args… <tol>` with the problem on stdin.
#[derive(Debug, Clone)]
pub struct External {
    pub program: String,
    pub args: Vec<String>,
}

impl External {
    pub fn new(program: impl Into<String>, args: &[&str]) -> Self {
        Self { program: program.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }

    fn run(&self, input: &str, tol: f64) -> Result<SolverSolution> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(format!("{tol:?}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SolverError::Numerical(format!("cannot start '{}': {e}", self.program)))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(input.as_bytes())
            .map_err(|e| SolverError::Numerical(format!("writing to '{}': {e}", self.program)))?;
        let out = child
            .wait_with_output()
            .map_err(|e| SolverError::Numerical(format!("waiting for '{}': {e}", self.program)))?;
        if !out.status.success() {
            return Err(SolverError::Numerical(format!(
                "'{}' exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        parse_solution(&String::from_utf8_lossy(&out.stdout))
    }
}

impl Engine for External {
    fn solve_lp(&self, lp: &LinearProgram, tol: f64) -> Result<SolverSolution> {
        lp.validate()?;
        self.run(&dump_lp(lp), tol)
    }

    fn solve_sdp(&self, sdp: &SemidefiniteProgram, tol: f64) -> Result<SolverSolution> {
        sdp.validate()?;
        self.run(&dump_sdp(sdp), tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Bound, Status};

    fn tiny() -> LinearProgram {
        let mut lp = LinearProgram::new();
        let v = lp.add_var(1.0, Bound::NonNegative);
        let s = lp.add_var(0.0, Bound::NonNegative);
        lp.add_row(&[(v, 1.0), (s, 1.0)], 0.5);
        lp
    }

    #[test]
    fn external_engine_parses_stdout() {
        let script = "cat > /dev/null; printf 'status optimal\\nobjective 0.5\\ngap 0.0\\n\
                      primal_residual 0.0\\ndual_infeasibility 0.0\\niterations 1\\n\
                      values: 0.5 0.0\\nduals: 1.0\\nend\\n'";
        let engine = External::new("sh", &["-c", script, "solver"]);
        let sol = engine.solve_lp(&tiny(), 1e-9).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let builtin = Builtin.solve_lp(&tiny(), 1e-9).unwrap();
        assert_eq!(sol.values, builtin.values);
        assert_eq!(sol.objective, builtin.objective);
    }

    #[test]
    fn external_failure_is_an_error() {
        let engine = External::new("sh", &["-c", "cat > /dev/null; echo broken >&2; exit 1", "solver"]);
        assert!(matches!(engine.solve_lp(&tiny(), 1e-9), Err(SolverError::Numerical(_))));
    }
}
