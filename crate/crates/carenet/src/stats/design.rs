//! Regression design: integer LOS hours against group membership and the
//! four confounders (age, distinct PheWAS count, distinct CPT count,
//! insurance program).

use std::collections::BTreeMap;

use crate::cocluster::CoClusterAssignment;
use crate::datamodel::{map_phewas, CodeMapping, PatientRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    /// LOS hours rounded to the nearest integer, one per patient row.
    pub response: Vec<u64>,
    /// Column-major predictor values; columns[c][row].
    pub columns: Vec<Vec<f64>>,
    pub column_names: Vec<String>,
    /// Group label of each row.
    pub row_group: Vec<usize>,
    /// Distinct group labels, ascending.
    pub groups: Vec<usize>,
    /// The omitted (largest) group.
    pub reference_group: usize,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Predictor row as a dense vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    /// Per-column means; the covariate point used for adjusted predictions.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        self.columns
            .iter()
            .map(|c| c.iter().sum::<f64>() / n)
            .collect()
    }
}

pub fn group_dummy_name(group: usize) -> String {
    format!("group_{group}")
}

pub fn insurance_dummy_name(level: &str) -> String {
    format!("insurance_{level}")
}

/// Assemble the design matrix. The largest group and the most common
/// insurance program are the omitted reference levels (ties resolve to the
/// smaller label).
pub fn build_design(
    patients: &[PatientRecord],
    assignment: &CoClusterAssignment,
    mapping: &CodeMapping,
) -> Result<DesignMatrix> {
    if patients.is_empty() {
        return Err(Error::invalid("empty cohort".to_string()));
    }
    let mut row_group = Vec::with_capacity(patients.len());
    for p in patients {
        match assignment.patient_group.get(&p.patient_id) {
            Some(&g) => row_group.push(g),
            None => {
                return Err(Error::invalid(format!(
                    "patient `{}` has no group label",
                    p.patient_id
                )))
            }
        }
    }

    let mut group_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &g in &row_group {
        *group_sizes.entry(g).or_insert(0) += 1;
    }
    for (&g, &size) in &group_sizes {
        if size < 2 {
            return Err(Error::DegenerateGroup { group: g, size });
        }
    }
    let groups: Vec<usize> = group_sizes.keys().copied().collect();
    let reference_group = *group_sizes
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(g, _)| g)
        .unwrap();

    let mut insurance_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for p in patients {
        *insurance_sizes.entry(p.insurance.as_str()).or_insert(0) += 1;
    }
    let reference_insurance = *insurance_sizes
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(l, _)| l)
        .unwrap();

    let n = patients.len();
    let mut columns = vec![vec![1.0; n]];
    let mut column_names = vec!["intercept".to_string()];

    for &g in &groups {
        if g == reference_group {
            continue;
        }
        columns.push(
            row_group
                .iter()
                .map(|&rg| if rg == g { 1.0 } else { 0.0 })
                .collect(),
        );
        column_names.push(group_dummy_name(g));
    }

    columns.push(patients.iter().map(|p| p.age as f64).collect());
    column_names.push("age".to_string());

    columns.push(
        patients
            .iter()
            .map(|p| map_phewas(p, mapping).0.len() as f64)
            .collect(),
    );
    column_names.push("phewas_count".to_string());

    columns.push(patients.iter().map(|p| p.cpt_codes.len() as f64).collect());
    column_names.push("cpt_count".to_string());

    for level in insurance_sizes.keys() {
        if *level == reference_insurance {
            continue;
        }
        columns.push(
            patients
                .iter()
                .map(|p| if p.insurance == *level { 1.0 } else { 0.0 })
                .collect(),
        );
        column_names.push(insurance_dummy_name(level));
    }

    let response = patients.iter().map(|p| p.los_hours.round() as u64).collect();
    Ok(DesignMatrix {
        response,
        columns,
        column_names,
        row_group,
        groups,
        reference_group,
    })
}
