//! Normalized reconstruction losses and per-iteration loss bookkeeping.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::matrix::{frobenius_norm, l21_norm, DenseMatrix};

/// `‖X − X̂‖_F / ‖X‖_F`
pub fn nfl(x: &DenseMatrix, xhat: &DenseMatrix) -> Result<f64> {
    let denom = frobenius_norm(x);
    if denom == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(frobenius_norm(&x.sub(xhat)?) / denom)
}

/// `‖X − X̂‖_{2,1} / ‖X‖_{2,1}`
pub fn nl21(x: &DenseMatrix, xhat: &DenseMatrix) -> Result<f64> {
    let denom = l21_norm(x);
    if denom == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(l21_norm(&x.sub(xhat)?) / denom)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub iter: usize,
    /// `None` for methods without an iterative objective (PCA).
    pub objective: Option<f64>,
    pub nfl: f64,
    pub nl21: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    records: Vec<LossRecord>,
}

impl LossHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; iteration numbers must start at 0 and increase strictly.
    pub fn push(&mut self, record: LossRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.iter > last.iter, "loss history iterations must increase");
        } else {
            assert_eq!(record.iter, 0, "loss history must start at iteration 0");
        }
        debug_assert!(record.nfl >= 0.0 && record.nl21 >= 0.0);
        self.records.push(record);
    }

    pub fn records(&self) -> &[LossRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.objective).collect()
    }

    /// CSV with header `iter,objective,nfl,nl21`; a missing objective is an empty field.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,objective,nfl,nl21")?;
        for r in &self.records {
            match r.objective {
                Some(obj) => writeln!(out, "{},{},{},{}", r.iter, fmt_f64(obj), fmt_f64(r.nfl), fmt_f64(r.nl21))?,
                None => writeln!(out, "{},,{},{}", r.iter, fmt_f64(r.nfl), fmt_f64(r.nl21))?,
            }
        }
        Ok(())
    }
}
