//! Feature vectors and the rectangular sample-by-feature matrix shared by
//! selection, windowing and model training.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureFamily {
    Fr,
    Afe,
    Rb,
}

impl FeatureFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureFamily::Fr => "FR",
            FeatureFamily::Afe => "AFE",
            FeatureFamily::Rb => "RB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "FR" => Some(FeatureFamily::Fr),
            "AFE" => Some(FeatureFamily::Afe),
            "RB" => Some(FeatureFamily::Rb),
            _ => None,
        }
    }
}

/// Ordered (name, family, value) triples for one sample. Missing is explicit;
/// NaN is never stored. Infinities may appear transiently before
/// [`crate::features::sanitize_matrix`] runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(String, FeatureFamily, Option<f64>)>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// NaN collapses to missing so the no-NaN invariant holds by construction.
    pub fn push(&mut self, name: impl Into<String>, family: FeatureFamily, value: Option<f64>) {
        let value = value.filter(|v| !v.is_nan());
        self.entries.push((name.into(), family, value));
    }

    pub fn entries(&self) -> &[(String, FeatureFamily, Option<f64>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<Option<f64>> {
        self.entries.iter().find(|(n, _, _)| n == name).map(|(_, _, v)| *v)
    }

    pub fn extend(&mut self, other: FeatureVector) {
        self.entries.extend(other.entries);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub company_id: String,
    pub reference_year: i32,
    pub window_length: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub family: FeatureFamily,
}

/// Rectangular matrix: rows are (company, reference-year, window) samples,
/// columns are named features with a family tag, cells are real-or-missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<ColumnDef>,
    keys: Vec<SampleKey>,
    labels: Vec<u8>,
    cells: Vec<Option<f64>>, // row-major, keys.len() * columns.len()
}

impl FeatureMatrix {
    pub fn new(columns: Vec<ColumnDef>) -> Result<Self, CoreError> {
        for i in 1..columns.len() {
            if columns[..i].iter().any(|c| c.name == columns[i].name) {
                return Err(CoreError::InvalidRecord {
                    detail: alloc::format!("duplicate column name `{}`", columns[i].name),
                });
            }
        }
        Ok(FeatureMatrix { columns, keys: Vec::new(), labels: Vec::new(), cells: Vec::new() })
    }

    /// Appends a row; the vector's entries must match the column layout.
    pub fn push_row(
        &mut self,
        key: SampleKey,
        label: u8,
        vector: &FeatureVector,
    ) -> Result<(), CoreError> {
        if label > 1 {
            return Err(CoreError::InvalidRecord {
                detail: alloc::format!("label {label} not in {{0,1}}"),
            });
        }
        if vector.len() != self.columns.len() {
            return Err(CoreError::LengthMismatch {
                left: vector.len(),
                right: self.columns.len(),
            });
        }
        for (entry, col) in vector.entries().iter().zip(&self.columns) {
            if entry.0 != col.name {
                return Err(CoreError::SchemaMismatch {
                    detail: alloc::format!("expected column `{}`, got `{}`", col.name, entry.0),
                });
            }
        }
        self.keys.push(key);
        self.labels.push(label);
        self.cells.extend(vector.entries().iter().map(|(_, _, v)| *v));
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn keys(&self) -> &[SampleKey] {
        &self.keys
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.columns.len() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<f64>) {
        let idx = row * self.columns.len() + col;
        self.cells[idx] = value.filter(|v| !v.is_nan());
    }

    pub fn column_values(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        let n = self.columns.len();
        self.cells.iter().skip(col).step_by(n.max(1)).copied()
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let n = self.columns.len();
        &self.cells[row * n..(row + 1) * n]
    }

    pub fn missing_rate(&self, col: usize) -> f64 {
        if self.keys.is_empty() {
            return 0.0;
        }
        let missing = self.column_values(col).filter(|v| v.is_none()).count();
        missing as f64 / self.keys.len() as f64
    }

    /// New matrix keeping only the columns whose index is in `cols`
    /// (order preserved).
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let columns: Vec<ColumnDef> = cols.iter().map(|&c| self.columns[c].clone()).collect();
        let mut cells = Vec::with_capacity(cols.len() * self.keys.len());
        for row in 0..self.keys.len() {
            for &c in cols {
                cells.push(self.get(row, c));
            }
        }
        FeatureMatrix { columns, keys: self.keys.clone(), labels: self.labels.clone(), cells }
    }

    /// New matrix keeping only the listed families.
    pub fn select_families(&self, families: &[FeatureFamily]) -> FeatureMatrix {
        let cols: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| families.contains(&c.family))
            .map(|(i, _)| i)
            .collect();
        self.select_columns(&cols)
    }

    /// New matrix keeping only the rows whose index is in `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix {
            columns: self.columns.clone(),
            keys: Vec::with_capacity(rows.len()),
            labels: Vec::with_capacity(rows.len()),
            cells: Vec::with_capacity(rows.len() * self.columns.len()),
        };
        for &r in rows {
            out.keys.push(self.keys[r].clone());
            out.labels.push(self.labels[r]);
            out.cells.extend_from_slice(self.row(r));
        }
        out
    }

    /// Vertically concatenates matrices with identical column layouts.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix, CoreError> {
        let first = parts.first().ok_or(CoreError::InvalidRecord {
            detail: String::from("concat of zero matrices"),
        })?;
        let mut out = FeatureMatrix {
            columns: first.columns.clone(),
            keys: Vec::new(),
            labels: Vec::new(),
            cells: Vec::new(),
        };
        for p in parts {
            if p.columns != out.columns {
                return Err(CoreError::SchemaMismatch {
                    detail: String::from("column layouts differ across concatenated matrices"),
                });
            }
            out.keys.extend(p.keys.iter().cloned());
            out.labels.extend_from_slice(&p.labels);
            out.cells.extend_from_slice(&p.cells);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_col_matrix() -> FeatureMatrix {
        FeatureMatrix::new(vec![
            ColumnDef { name: "a".into(), family: FeatureFamily::Fr },
            ColumnDef { name: "b".into(), family: FeatureFamily::Rb },
        ])
        .unwrap()
    }

    fn key(id: &str) -> SampleKey {
        SampleKey { company_id: id.into(), reference_year: 2015, window_length: 1 }
    }

    #[test]
    fn duplicate_columns_rejected() {
        let err = FeatureMatrix::new(vec![
            ColumnDef { name: "a".into(), family: FeatureFamily::Fr },
            ColumnDef { name: "a".into(), family: FeatureFamily::Afe },
        ])
        .unwrap_err();
        assert!(matches!(err, CoreError::InvalidRecord { .. }));
    }

    #[test]
    fn push_and_access() {
        let mut m = two_col_matrix();
        let mut v = FeatureVector::new();
        v.push("a", FeatureFamily::Fr, Some(1.5));
        v.push("b", FeatureFamily::Rb, None);
        m.push_row(key("c1"), 1, &v).unwrap();
        assert_eq!(m.get(0, 0), Some(1.5));
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.missing_rate(1), 1.0);
        assert_eq!(m.labels(), &[1]);
    }

    #[test]
    fn push_row_checks_schema_and_label() {
        let mut m = two_col_matrix();
        let mut v = FeatureVector::new();
        v.push("a", FeatureFamily::Fr, Some(1.0));
        assert!(m.push_row(key("c1"), 0, &v).is_err());
        v.push("wrong", FeatureFamily::Rb, None);
        assert!(m.push_row(key("c1"), 0, &v).is_err());
        let mut ok = FeatureVector::new();
        ok.push("a", FeatureFamily::Fr, Some(1.0));
        ok.push("b", FeatureFamily::Rb, Some(2.0));
        assert!(m.push_row(key("c1"), 2, &ok).is_err());
        assert!(m.push_row(key("c1"), 0, &ok).is_ok());
    }

    #[test]
    fn family_selection() {
        let mut m = two_col_matrix();
        let mut v = FeatureVector::new();
        v.push("a", FeatureFamily::Fr, Some(1.0));
        v.push("b", FeatureFamily::Rb, Some(2.0));
        m.push_row(key("c1"), 0, &v).unwrap();
        let fr = m.select_families(&[FeatureFamily::Fr]);
        assert_eq!(fr.column_names(), vec!["a"]);
        assert_eq!(fr.get(0, 0), Some(1.0));
        assert_eq!(fr.n_rows(), 1);
    }

    #[test]
    fn nan_becomes_missing() {
        let mut v = FeatureVector::new();
        v.push("a", FeatureFamily::Fr, Some(f64::NAN));
        assert_eq!(v.get("a"), Some(None));
    }
}
