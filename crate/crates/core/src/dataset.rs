//! Covariates, bivariate responses and (for simulated data) the true
//! conditional probability-integral transforms, with a CSV representation.
//!
//! CSV layout: header `x1,…,xp,y1,y2` optionally followed by `u1,u2`; every
//! value is written with 17 significant digits so files round-trip exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub y: Vec<[f64; 2]>,
    /// True `(U₁, U₂)`, present only for data generated by the simulation model.
    pub u_true: Option<Vec<[f64; 2]>>,
}

impl Dataset {
    pub fn new(x: DenseMatrix, y: Vec<[f64; 2]>, u_true: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if y.len() != x.rows() || u_true.as_ref().is_some_and(|u| u.len() != x.rows()) {
            return Err(Error::Data(
                "covariates, responses and uniforms differ in length".into(),
            ));
        }
        Ok(Self { x, y, u_true })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Response column `j` (0 or 1).
    pub fn response(&self, j: usize) -> Vec<f64> {
        self.y.iter().map(|r| r[j]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header: Vec<String> = (1..=self.p()).map(|j| format!("x{j}")).collect();
        header.extend(["y1".into(), "y2".into()]);
        if self.u_true.is_some() {
            header.extend(["u1".into(), "u2".into()]);
        }
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.n() {
            line.clear();
            let u = self.u_true.as_ref().map(|u| u[i]);
            let values = self
                .x
                .row(i)
                .iter()
                .chain(self.y[i].iter())
                .chain(u.iter().flatten());
            for (k, v) in values.enumerate() {
                if k > 0 {
                    line.push(',');
                }
                write!(line, "{v:.16e}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty dataset file".into()))?
            .map_err(|e| Error::Data(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let p = cols.iter().take_while(|c| c.starts_with('x')).count();
        let expected_x: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
        let has_u = match &cols[p..] {
            ["y1", "y2"] => false,
            ["y1", "y2", "u1", "u2"] => true,
            _ => return Err(Error::Data(format!("unrecognized header `{header}`"))),
        };
        if p == 0 || cols[..p] != expected_x.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            return Err(Error::Data(format!("unrecognized header `{header}`")));
        }
        let width = cols.len();
        let (mut xs, mut y, mut u) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Data(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Data(format!("line {}: {e}", lineno + 2)))?;
            if vals.len() != width {
                return Err(Error::Data(format!(
                    "line {}: expected {width} fields, got {}",
                    lineno + 2,
                    vals.len()
                )));
            }
            xs.extend_from_slice(&vals[..p]);
            y.push([vals[p], vals[p + 1]]);
            if has_u {
                u.push([vals[p + 2], vals[p + 3]]);
            }
        }
        if y.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        let x =
            DenseMatrix::from_row_major(y.len(), p, xs).map_err(|e| Error::Data(e.to_string()))?;
        Self::new(x, y, has_u.then_some(u))
    }
}

/// Conditional mean of `Y₁` in the simulation model, `x₄²/5 + x₅²/5`.
pub fn oracle_mean_y1(x: &[f64]) -> f64 {
    x[3] * x[3] / 5.0 + x[4] * x[4] / 5.0
}

/// Conditional mean of `Y₂` in the simulation model, `−x₂ − x₄²/5`.
pub fn oracle_mean_y2(x: &[f64]) -> f64 {
    -x[1] - x[3] * x[3] / 5.0
}
