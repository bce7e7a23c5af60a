//! Confounder-balance checks: per-group frequency vectors of each factor,
//! compared pairwise by Pearson correlation.

use std::collections::{BTreeMap, BTreeSet};

use statrs::function::beta::beta_reg;

use crate::cocluster::CoClusterAssignment;
use crate::datamodel::{map_phewas, CodeMapping, PatientRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Phewas,
    Procedure,
    Insurance,
    Age,
}

impl Factor {
    pub const ALL: [Factor; 4] = [
        Factor::Phewas,
        Factor::Procedure,
        Factor::Insurance,
        Factor::Age,
    ];

    pub fn parse(name: &str) -> Result<Factor> {
        match name {
            "phewas" => Ok(Factor::Phewas),
            "procedure" => Ok(Factor::Procedure),
            "insurance" => Ok(Factor::Insurance),
            "age" => Ok(Factor::Age),
            other => Err(Error::UnknownFactor(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Factor::Phewas => "phewas",
            Factor::Procedure => "procedure",
            Factor::Insurance => "insurance",
            Factor::Age => "age",
        }
    }
}

/// Relative frequencies per group over a shared support (the union across
/// groups, so absent entries appear as explicit zeros).
#[derive(Debug, Clone)]
pub struct FactorDistribution {
    pub factor: Factor,
    pub support: Vec<String>,
    pub frequencies: BTreeMap<usize, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityResult {
    pub factor: &'static str,
    pub group_a: usize,
    pub group_b: usize,
    pub pcc: f64,
    pub p_value: f64,
}

fn group_of(
    assignment: &CoClusterAssignment,
    patient: &PatientRecord,
) -> Result<usize> {
    assignment
        .patient_group
        .get(&patient.patient_id)
        .copied()
        .ok_or_else(|| {
            Error::invalid(format!(
                "patient `{}` has no group label",
                patient.patient_id
            ))
        })
}

/// Build the per-group distribution of one factor.
pub fn factor_distribution(
    patients: &[PatientRecord],
    assignment: &CoClusterAssignment,
    factor: Factor,
    mapping: &CodeMapping,
) -> Result<FactorDistribution> {
    if patients.is_empty() {
        return Err(Error::invalid("empty cohort".to_string()));
    }
    // Multiset of observed values per group.
    let mut tallies: BTreeMap<usize, BTreeMap<String, f64>> = BTreeMap::new();
    for p in patients {
        let g = group_of(assignment, p)?;
        let tally = tallies.entry(g).or_default();
        match factor {
            Factor::Phewas => {
                for code in map_phewas(p, mapping).0 {
                    *tally.entry(code).or_insert(0.0) += 1.0;
                }
            }
            Factor::Procedure => {
                for code in &p.cpt_codes {
                    *tally.entry(code.clone()).or_insert(0.0) += 1.0;
                }
            }
            Factor::Insurance => {
                *tally.entry(p.insurance.clone()).or_insert(0.0) += 1.0;
            }
            Factor::Age => {
                *tally.entry(p.age.to_string()).or_insert(0.0) += 1.0;
            }
        }
    }

    let support: Vec<String> = match factor {
        Factor::Age => {
            // Contiguous integer years over the cohort's range.
            let min = patients.iter().map(|p| p.age).min().unwrap();
            let max = patients.iter().map(|p| p.age).max().unwrap();
            (min..=max).map(|a| a.to_string()).collect()
        }
        _ => {
            let union: BTreeSet<&String> = tallies.values().flat_map(|t| t.keys()).collect();
            union.into_iter().cloned().collect()
        }
    };

    let mut frequencies = BTreeMap::new();
    for (&g, tally) in &tallies {
        let total: f64 = tally.values().sum();
        let vector: Vec<f64> = support
            .iter()
            .map(|s| {
                if total > 0.0 {
                    tally.get(s).copied().unwrap_or(0.0) / total
                } else {
                    0.0
                }
            })
            .collect();
        frequencies.insert(g, vector);
    }
    Ok(FactorDistribution {
        factor,
        support,
        frequencies,
    })
}

/// Sample Pearson correlation.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::invalid(format!(
            "correlation needs at least 3 entries, have {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mean_x, b - mean_y);
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x <= 0.0 || var_y <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p for a correlation via the t transform with n−2 degrees of
/// freedom, evaluated through the regularized incomplete beta function so
/// far tails stay accurate. |r| = 1 returns exactly 0.
pub fn pcc_pvalue(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid(format!(
            "p-value needs n >= 3, have {n}"
        )));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("correlation out of range: {r}")));
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let nu = (n - 2) as f64;
    // P(|T| > |t|) with t² = r²ν/(1−r²) equals I_{1−r²}(ν/2, 1/2).
    Ok(beta_reg(nu / 2.0, 0.5, 1.0 - r * r).clamp(0.0, 1.0))
}

/// Every factor × group pair, factor-major.
pub fn similarity_report(
    patients: &[PatientRecord],
    assignment: &CoClusterAssignment,
    mapping: &CodeMapping,
) -> Result<Vec<SimilarityResult>> {
    let mut groups: Vec<usize> = patients
        .iter()
        .map(|p| group_of(assignment, p))
        .collect::<Result<BTreeSet<usize>>>()?
        .into_iter()
        .collect();
    groups.sort_unstable();
    if groups.len() < 2 {
        return Err(Error::invalid(
            "similarity needs at least 2 groups".to_string(),
        ));
    }

    let mut results = Vec::new();
    for factor in Factor::ALL {
        let dist = factor_distribution(patients, assignment, factor, mapping)?;
        let n = dist.support.len();
        for (i, &a) in groups.iter().enumerate() {
            for &b in &groups[i + 1..] {
                let r = pcc(&dist.frequencies[&a], &dist.frequencies[&b])?;
                results.push(SimilarityResult {
                    factor: factor.name(),
                    group_a: a,
                    group_b: b,
                    pcc: r,
                    p_value: pcc_pvalue(r, n)?,
                });
            }
        }
    }
    Ok(results)
}
