//! JSON system-file format consumed and emitted by the CLI.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::resilience::ControlMatrix;

/// On-disk description of a system: dimensions, optional drift, control
/// matrix (row-major), optional metadata and query fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_goal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl SystemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let file: SystemFile = serde_json::from_str(&text).map_err(|e| {
            Error::InvalidInput(format!(
                "{}: parse error at line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        let check_rows = |name: &str, rows: &Vec<Vec<f64>>, nr: usize, nc: usize| -> Result<()> {
            if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be {nr}x{nc} row-major"
                )));
            }
            Ok(())
        };
        check_rows("B", &self.b, self.n, self.m)?;
        if let Some(a) = &self.a {
            check_rows("A", a, self.n, self.n)?;
        }
        if let Some(l) = &self.labels {
            if l.len() != self.m {
                return Err(Error::InvalidInput(format!("expected {} labels", self.m)));
            }
        }
        if let Some(r) = &self.ranges {
            if r.len() != self.m {
                return Err(Error::InvalidInput(format!("expected {} ranges", self.m)));
            }
        }
        for (name, v) in [("x0", &self.x0), ("x_goal", &self.x_goal)] {
            if let Some(v) = v {
                if v.len() != self.n {
                    return Err(Error::InvalidInput(format!(
                        "{name} must have {} entries",
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn control_matrix(&self) -> Result<ControlMatrix> {
        let flat: Vec<f64> = self.b.iter().flatten().copied().collect();
        let mut cm = ControlMatrix::new(DMatrix::from_row_slice(self.n, self.m, &flat))?;
        if let Some(labels) = &self.labels {
            cm = cm.with_labels(labels.clone())?;
        }
        if let Some(ranges) = &self.ranges {
            cm = cm.with_ranges(ranges.iter().map(|r| (r[0], r[1])).collect())?;
        }
        Ok(cm)
    }

    pub fn drift(&self) -> Option<DMatrix<f64>> {
        self.a.as_ref().map(|rows| {
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            DMatrix::from_row_slice(self.n, self.n, &flat)
        })
    }

    pub fn x0_vector(&self) -> DVector<f64> {
        match &self.x0 {
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(self.n),
        }
    }

    pub fn x_goal_vector(&self) -> DVector<f64> {
        match &self.x_goal {
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(self.n),
        }
    }

    /// File representation of a generated control matrix.
    pub fn from_control_matrix(cm: &ControlMatrix) -> Self {
        let b = (0..cm.n())
            .map(|i| (0..cm.m()).map(|j| cm.entries()[(i, j)]).collect())
            .collect();
        SystemFile {
            n: cm.n(),
            m: cm.m(),
            a: None,
            b,
            labels: cm.labels().map(|l| l.to_vec()),
            ranges: cm
                .ranges()
                .map(|r| r.iter().map(|&(lo, hi)| [lo, hi]).collect()),
            x0: None,
            x_goal: None,
            epsilon: None,
            horizon: None,
        }
    }
}
