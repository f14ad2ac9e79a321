use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{c, ensure_finite, ensure_unitary, ComplexMatrix, EXTERNAL_TOL};
use crate::error::{Error, Result};

/// On-disk matrix: `{"d": 2, "entries": [[[re, im], ...], ...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub d: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let entries = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Self { d: m.nrows(), entries }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.entries.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: self.entries.len() });
        }
        if let Some(row) = self.entries.iter().find(|row| row.len() != self.d) {
            return Err(Error::DimensionMismatch { expected: self.d, found: row.len() });
        }
        let m = ComplexMatrix::from_fn(self.d, self.d, |i, j| {
            let [re, im] = self.entries[i][j];
            c(re, im)
        });
        ensure_finite(&m)?;
        Ok(m)
    }
}

/// Reads any square matrix in the shared file format.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    let text = std::fs::read_to_string(path)?;
    let file: MatrixFile = serde_json::from_str(&text)?;
    file.to_matrix()
}

/// Reads a matrix and checks unitarity within `1e-8`.
pub fn load_unitary(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    let m = load_matrix(path)?;
    ensure_unitary(&m, EXTERNAL_TOL)?;
    Ok(m)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &ComplexMatrix) -> Result<()> {
    let text = serde_json::to_string_pretty(&MatrixFile::from_matrix(m))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_unitary;

    #[test]
    fn round_trip_through_file() {
        let dir = std::env::temp_dir().join(format!("uqc-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.json");
        let u = haar_unitary(3, 12).unwrap();
        save_matrix(&path, &u).unwrap();
        assert_eq!(load_unitary(&path).unwrap(), u);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_ragged_and_non_unitary() {
        let ragged = MatrixFile { d: 2, entries: vec![vec![[1.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]] };
        assert!(ragged.to_matrix().is_err());
        let dir = std::env::temp_dir().join(format!("uqc-io-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.json");
        std::fs::write(&path, r#"{"d":2,"entries":[[[2,0],[0,0]],[[0,0],[1,0]]]}"#).unwrap();
        assert!(matches!(load_unitary(&path), Err(Error::NotUnitary { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
