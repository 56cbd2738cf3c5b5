//! Matrix JSON encoding: `{"dim": n, "entries": [[re, im], ...]}`, row-major,
//! numbers written with 17 significant digits.

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::types::HermitianOperator;
use super::{ChoiMatrix, ComplexMatrix, DensityMatrix, C64};
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, which round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // keeps -0.0 and 0.0 byte-identical
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Wire form of a square complex matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        Self { dim: n, entries }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.entries.len() != self.dim * self.dim {
            return Err(Error::Shape(format!(
                "matrix of dim {} needs {} entries, got {}",
                self.dim,
                self.dim * self.dim,
                self.entries.len()
            )));
        }
        Ok(ComplexMatrix::from_row_iterator(
            self.dim,
            self.dim,
            self.entries.iter().map(|[re, im]| C64::new(*re, *im)),
        ))
    }
}

impl Serialize for MatrixJson {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            dim: usize,
            entries: Vec<[Box<RawValue>; 2]>,
        }
        let raw = |x: f64| RawValue::from_string(format_f64(x)).map_err(S::Error::custom);
        let mut entries = Vec::with_capacity(self.entries.len());
        for [re, im] in &self.entries {
            if !re.is_finite() || !im.is_finite() {
                return Err(S::Error::custom("non-finite matrix entry"));
            }
            entries.push([raw(*re)?, raw(*im)?]);
        }
        Wire {
            dim: self.dim,
            entries,
        }
        .serialize(serializer)
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(self.matrix()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = MatrixJson::deserialize(deserializer)?;
        let m = wire.to_matrix().map_err(D::Error::custom)?;
        HermitianOperator::new(m).map_err(D::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.op().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let op = HermitianOperator::deserialize(deserializer)?;
        DensityMatrix::new(op).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ChoiWire {
    dim_in: usize,
    dim_out: usize,
    choi: HermitianOperator,
}

impl Serialize for ChoiMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ChoiWire {
            dim_in: self.dim_in(),
            dim_out: self.dim_out(),
            choi: self.op().clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ChoiMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let w = ChoiWire::deserialize(deserializer)?;
        ChoiMatrix::new(w.dim_in, w.dim_out, w.choi).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.1, 0.0),
                C64::new(1.0 / 3.0, -2.0 / 7.0),
                C64::new(1.0 / 3.0, 2.0 / 7.0),
                C64::new(-1e-300, 0.0),
            ],
        );
        let op = HermitianOperator::new(m).unwrap();
        let s = serde_json::to_string(&op).unwrap();
        assert!(s.starts_with(r#"{"dim":2,"entries":[["#));
        let back: HermitianOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = r#"{"dim":2,"entries":[[1,0],[0,1],[0,0]]}"#;
        assert!(serde_json::from_str::<HermitianOperator>(bad).is_err());
        let asym = r#"{"dim":2,"entries":[[1,0],[0.5,0],[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<HermitianOperator>(asym).is_err());
        let extra = r#"{"dim":1,"entries":[[1,0]],"x":1}"#;
        assert!(serde_json::from_str::<HermitianOperator>(extra).is_err());
    }
}
