//! Reference optima stored as plain text.
//!
//! ```text
//! # problem: nonsmooth10
//! # problem_hash: <sha256 of the problem fingerprint>
//! # tolerance: 1e-10
//! # oracle_version: dual-ascent-bisection/2
//! x_star 10
//! 8.7500000000000000e-1
//! ...
//! lambda_bar 2
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::builtin::Builtin;
use crate::diagnostics::{OracleSolution, ORACLE_VERSION};
use crate::error::{EmoError, Result};
use crate::problem::EmoProblem;

const NONSMOOTH10: &str = include_str!("../fixtures/nonsmooth10.fixture");
const NETFLOW6X12: &str = include_str!("../fixtures/netflow6x12.fixture");

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub problem: String,
    pub problem_hash: String,
    pub tolerance: f64,
    pub oracle_version: String,
    pub x_star: DVector<f64>,
    pub lambda_bar: DVector<f64>,
}

impl Fixture {
    pub fn from_solution(name: &str, problem: &EmoProblem, solution: &OracleSolution, tolerance: f64) -> Self {
        Self {
            problem: name.to_string(),
            problem_hash: problem.fingerprint(),
            tolerance,
            oracle_version: ORACLE_VERSION.to_string(),
            x_star: solution.x_star.clone(),
            lambda_bar: solution.lambda_bar.clone(),
        }
    }

    /// The shipped fixture for a builtin. `minnorm` has none; its reference
    /// is the closed-form least-norm solution.
    pub fn embedded(builtin: Builtin) -> Option<Result<Self>> {
        let text = match builtin {
            Builtin::Nonsmooth10 => NONSMOOTH10,
            Builtin::Netflow6x12 => NETFLOW6X12,
            Builtin::Minnorm => return None,
        };
        Some(Self::parse(text))
    }

    pub fn matches(&self, problem: &EmoProblem) -> bool {
        self.problem_hash == problem.fingerprint()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# problem: {}", self.problem);
        let _ = writeln!(out, "# problem_hash: {}", self.problem_hash);
        let _ = writeln!(out, "# tolerance: {:e}", self.tolerance);
        let _ = writeln!(out, "# oracle_version: {}", self.oracle_version);
        for (label, v) in [("x_star", &self.x_star), ("lambda_bar", &self.lambda_bar)] {
            let _ = writeln!(out, "{label} {}", v.len());
            for x in v.iter() {
                let _ = writeln!(out, "{x:.16e}");
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| EmoError::Fixture(msg);
        let mut header = std::collections::HashMap::new();
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
        while let Some(line) = lines.peek() {
            let Some(rest) = line.strip_prefix('#') else { break };
            if let Some((k, v)) = rest.split_once(':') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            lines.next();
        }
        let field = |k: &str| header.get(k).cloned().ok_or_else(|| bad(format!("missing header field {k:?}")));
        let problem = field("problem")?;
        let problem_hash = field("problem_hash")?;
        let tolerance = field("tolerance")?
            .parse::<f64>()
            .map_err(|e| bad(format!("tolerance: {e}")))?;
        let oracle_version = field("oracle_version")?;

        let mut vector = |label: &str| -> Result<DVector<f64>> {
            let head = lines.next().ok_or_else(|| bad(format!("missing {label} block")))?;
            let mut parts = head.split_whitespace();
            if parts.next() != Some(label) {
                return Err(bad(format!("expected {label} block, found {head:?}")));
            }
            let len: usize = parts
                .next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| bad(format!("{label} block has no length")))?;
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                let line = lines.next().ok_or_else(|| bad(format!("{label} block is truncated")))?;
                values.push(line.parse::<f64>().map_err(|e| bad(format!("{label}: {line:?}: {e}")))?);
            }
            Ok(DVector::from_vec(values))
        };
        let x_star = vector("x_star")?;
        let lambda_bar = vector("lambda_bar")?;
        if let Some(extra) = lines.next() {
            return Err(bad(format!("trailing content {extra:?}")));
        }
        Ok(Self {
            problem,
            problem_hash,
            tolerance,
            oracle_version,
            x_star,
            lambda_bar,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
