//! Infinity clamping: per column, +inf maps to the largest finite value and
//! -inf to the smallest. Missing cells are preserved; imputation is a
//! model-side concern.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanitizeReport {
    /// (column name, missing rate after sanitation), in column order.
    pub missing_rates: Vec<(String, f64)>,
    pub clamped_cells: usize,
}

pub fn sanitize_matrix(matrix: &FeatureMatrix) -> (FeatureMatrix, SanitizeReport) {
    let mut out = matrix.clone();
    let mut clamped = 0usize;
    for col in 0..matrix.n_cols() {
        let mut max_finite = f64::NEG_INFINITY;
        let mut min_finite = f64::INFINITY;
        let mut has_finite = false;
        for v in matrix.column_values(col).flatten() {
            if v.is_finite() {
                has_finite = true;
                max_finite = max_finite.max(v);
                min_finite = min_finite.min(v);
            }
        }
        for row in 0..matrix.n_rows() {
            if let Some(v) = matrix.get(row, col) {
                if v.is_infinite() {
                    clamped += 1;
                    if has_finite {
                        let repl = if v > 0.0 { max_finite } else { min_finite };
                        out.set(row, col, Some(repl));
                    } else {
                        // column with no finite values becomes all-missing
                        out.set(row, col, None);
                    }
                }
            }
        }
    }
    let missing_rates = out
        .columns()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.clone(), out.missing_rate(i)))
        .collect();
    (out, SanitizeReport { missing_rates, clamped_cells: clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{ColumnDef, FeatureFamily, FeatureVector, SampleKey};
    use alloc::vec;
    use alloc::vec::Vec;

    fn matrix_of(values: &[Option<f64>]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(vec![ColumnDef {
            name: "x".into(),
            family: FeatureFamily::Fr,
        }])
        .unwrap();
        for (i, v) in values.iter().enumerate() {
            let mut fv = FeatureVector::new();
            fv.push("x", FeatureFamily::Fr, *v);
            m.push_row(
                SampleKey {
                    company_id: alloc::format!("c{i}"),
                    reference_year: 2015,
                    window_length: 1,
                },
                0,
                &fv,
            )
            .unwrap();
        }
        m
    }

    fn column(m: &FeatureMatrix) -> Vec<Option<f64>> {
        m.column_values(0).collect()
    }

    #[test]
    fn positive_infinity_maps_to_max_finite() {
        let (out, report) =
            sanitize_matrix(&matrix_of(&[Some(1.0), Some(2.0), Some(f64::INFINITY)]));
        assert_eq!(column(&out), vec![Some(1.0), Some(2.0), Some(2.0)]);
        assert_eq!(report.clamped_cells, 1);
    }

    #[test]
    fn finite_column_unchanged() {
        let m = matrix_of(&[Some(1.0), None, Some(-3.5)]);
        let (out, report) = sanitize_matrix(&m);
        assert_eq!(out, m);
        assert_eq!(report.clamped_cells, 0);
        assert!((report.missing_rates[0].1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_infinity_maps_to_min_finite() {
        let (out, _) = sanitize_matrix(&matrix_of(&[Some(f64::NEG_INFINITY), Some(5.0)]));
        // 5 is the sole finite value, so it serves as both bounds
        assert_eq!(column(&out), vec![Some(5.0), Some(5.0)]);

        let (out, _) =
            sanitize_matrix(&matrix_of(&[Some(f64::NEG_INFINITY), Some(-2.0), Some(7.0)]));
        assert_eq!(column(&out), vec![Some(-2.0), Some(-2.0), Some(7.0)]);
    }

    #[test]
    fn all_infinite_column_becomes_missing() {
        let (out, _) =
            sanitize_matrix(&matrix_of(&[Some(f64::INFINITY), None, Some(f64::NEG_INFINITY)]));
        assert_eq!(column(&out), vec![None, None, None]);
    }
}
