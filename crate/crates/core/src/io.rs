//! JSON documents for operators and Fock vectors.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PhaseError, Result};
use crate::fock::{FockVector, Operator, OperatorKind, OscParams};
use crate::linalg::{CMat, CVec};

/// `{dim, kind, params, entries}` with `entries[i][j] = [re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDoc {
    pub dim: usize,
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<OscParams>,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl OperatorDoc {
    pub fn from_operator(op: &Operator, params: Option<OscParams>) -> Self {
        let d = op.dim();
        let entries = (0..d).map(|i| (0..d).map(|j| [op.mat[(i, j)].re, op.mat[(i, j)].im]).collect()).collect();
        Self { dim: d, kind: op.kind, params, entries }
    }

    pub fn to_operator(&self) -> Result<Operator> {
        if self.entries.len() != self.dim || self.entries.iter().any(|r| r.len() != self.dim) {
            return Err(PhaseError::Parse(format!("operator entries are not {0}x{0}", self.dim)));
        }
        if self.entries.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(PhaseError::Parse("operator entries must be finite".into()));
        }
        let m = CMat::from_fn(self.dim, self.dim, |i, j| {
            let [re, im] = self.entries[i][j];
            Complex64::new(re, im)
        });
        Ok(Operator::new(self.kind, m))
    }
}

/// `{dim, params, entries}` with `entries[n] = [re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorDoc {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<OscParams>,
    pub entries: Vec<[f64; 2]>,
}

impl VectorDoc {
    pub fn from_vector(v: &FockVector, params: Option<OscParams>) -> Self {
        Self { dim: v.dim(), params, entries: v.0.iter().map(|z| [z.re, z.im]).collect() }
    }

    pub fn to_vector(&self) -> Result<FockVector> {
        if self.entries.len() != self.dim {
            return Err(PhaseError::Parse(format!("vector has {} entries, expected {}", self.entries.len(), self.dim)));
        }
        Ok(FockVector(CVec::from_iterator(self.dim, self.entries.iter().map(|[re, im]| Complex64::new(*re, *im)))))
    }
}

pub fn operator_to_json(op: &Operator, params: Option<OscParams>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&OperatorDoc::from_operator(op, params))?)
}

pub fn operator_from_json(s: &str) -> Result<Operator> {
    serde_json::from_str::<OperatorDoc>(s)?.to_operator()
}

pub fn read_operator(path: &Path) -> Result<Operator> {
    operator_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_operator(path: &Path, op: &Operator, params: Option<OscParams>) -> Result<()> {
    std::fs::write(path, operator_to_json(op, params)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn operator_roundtrip() {
        let mut op = Operator::zeros(3);
        op.mat[(0, 2)] = c(0.25, -1.5);
        op.kind = OperatorKind::General;
        let s = operator_to_json(&op, Some(OscParams::default())).unwrap();
        assert_eq!(operator_from_json(&s).unwrap(), op);
    }

    #[test]
    fn ragged_entries_rejected() {
        let s = r#"{"dim":2,"kind":"hermitian","entries":[[[1,0],[0,0]],[[0,0]]]}"#;
        assert!(matches!(operator_from_json(s), Err(PhaseError::Parse(_))));
    }

    #[test]
    fn vector_roundtrip() {
        let v = FockVector::basis(1, 4);
        assert_eq!(VectorDoc::from_vector(&v, None).to_vector().unwrap(), v);
    }
}
