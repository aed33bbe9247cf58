//! Trajectory CSV files and run summaries.
//!
//! CSV columns: `t,f,eq_residual_sq,lambda_norm_sq,z_norm_sq,x1..xN`, every
//! value written with 17 significant digits so that reading a file back
//! reproduces the samples bit for bit.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Sample, Trajectory};
use crate::error::{EmoError, Result};

const FIXED_COLUMNS: [&str; 5] = ["t", "f", "eq_residual_sq", "lambda_norm_sq", "z_norm_sq"];

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(samples: &[Sample], out: W) -> Result<()> {
    let dim = samples.first().map_or(0, |s| s.x.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for s in samples {
        if s.x.len() != dim {
            return Err(EmoError::Dimension {
                context: "trajectory sample",
                expected: dim,
                got: s.x.len(),
            });
        }
        row.clear();
        row.extend([s.t, s.f_value, s.eq_residual_sq, s.lambda_norm_sq, s.z_norm_sq].map(fmt17));
        row.extend(s.x.iter().copied().map(fmt17));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(trajectory: &Trajectory, path: &Path) -> Result<()> {
    write_csv(&trajectory.samples, std::fs::File::create(path)?)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<Sample>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len()
        || header.iter().zip(FIXED_COLUMNS).any(|(a, b)| a != b)
    {
        return Err(EmoError::Fixture(format!("unexpected trajectory header {header:?}")));
    }
    let mut samples = Vec::new();
    for record in r.records() {
        let record = record?;
        let values = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| EmoError::Fixture(format!("bad trajectory value: {e}")))?;
        samples.push(Sample {
            t: values[0],
            f_value: values[1],
            eq_residual_sq: values[2],
            lambda_norm_sq: values[3],
            z_norm_sq: values[4],
            x: values[5..].to_vec(),
        });
    }
    Ok(samples)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<Sample>> {
    read_csv(std::fs::File::open(path)?)
}

/// Final report for one run, written as `.txt` and `.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub algorithm: String,
    pub converged: bool,
    pub steps: usize,
    pub final_time: f64,
    pub h: f64,
    pub h_final: f64,
    pub wall_time_s: f64,
    pub objective: f64,
    pub eq_residual_sq: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub consensus: f64,
    /// `‖x − x*‖∞` against the reference optimum, when one is known.
    pub oracle_gap: Option<f64>,
    pub reference: Option<String>,
    pub events: Vec<String>,
    pub x: Vec<f64>,
    pub lambda_bar: Vec<f64>,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem        {}", self.problem);
        let _ = writeln!(s, "algorithm      {}", self.algorithm);
        let _ = writeln!(s, "converged      {}", self.converged);
        let _ = writeln!(s, "steps          {}", self.steps);
        let _ = writeln!(s, "final time     {:.6}", self.final_time);
        let _ = writeln!(s, "step size      {:e} (final {:e})", self.h, self.h_final);
        let _ = writeln!(s, "wall time      {:.3} s", self.wall_time_s);
        let _ = writeln!(s, "objective      {:.12e}", self.objective);
        let _ = writeln!(s, "|Wx - d0|^2    {:.3e}", self.eq_residual_sq);
        let _ = writeln!(s, "stationarity   {:.3e}", self.stationarity);
        let _ = writeln!(s, "feasibility    {:.3e}", self.feasibility);
        let _ = writeln!(s, "consensus      {:.3e}", self.consensus);
        match (self.oracle_gap, &self.reference) {
            (Some(gap), Some(r)) => {
                let _ = writeln!(s, "oracle gap     {gap:.3e} ({r})");
            }
            (Some(gap), None) => {
                let _ = writeln!(s, "oracle gap     {gap:.3e}");
            }
            _ => {
                let _ = writeln!(s, "oracle gap     n/a");
            }
        }
        for e in &self.events {
            let _ = writeln!(s, "event          {e}");
        }
        let xs: Vec<String> = self.x.iter().map(|v| format!("{v:.10}")).collect();
        let _ = writeln!(s, "x              [{}]", xs.join(", "));
        let ls: Vec<String> = self.lambda_bar.iter().map(|v| format!("{v:.10}")).collect();
        let _ = writeln!(s, "lambda_bar     [{}]", ls.join(", "));
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bitwise() {
        let samples = vec![
            Sample {
                t: 0.0,
                x: vec![0.1, 1.0 / 3.0],
                f_value: 2.0f64.sqrt(),
                eq_residual_sq: 1e-300,
                lambda_norm_sq: 0.0,
                z_norm_sq: 5e-324,
            },
            Sample {
                t: 0.01,
                x: vec![-7.25, std::f64::consts::PI],
                f_value: -0.0,
                eq_residual_sq: 123456.789,
                lambda_norm_sq: 1e20,
                z_norm_sq: 3.0,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,f,eq_residual_sq,lambda_norm_sq,z_norm_sq,x1,x2\n"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.z_norm_sq.to_bits(), b.z_norm_sq.to_bits());
            assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
