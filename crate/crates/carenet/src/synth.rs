//! Synthetic cohorts with planted structure, used as the pipeline's
//! verification oracle.
//!
//! The generator plants three things the rest of the pipeline is supposed to
//! recover: a block structure in the area × patient count matrix, a
//! per-group shift in mean length of stay, and confounder distributions
//! shared across groups (so similarity analysis should report balance).
//! Everything is drawn from streams derived from the single config seed, so
//! identical configs produce identical cohorts.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson, Zipf};

use crate::datamodel::{AccessEvent, CodeMapping, PatientRecord};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from};

/// Action labels stamped on generated events; cosmetic only, nothing
/// downstream reads them.
const ACTIONS: [&str; 4] = ["chart_review", "med_admin", "note_entry", "order_entry"];

/// Admissions start at 2022-01-01T00:00:00Z and spread over one year.
const ADMISSION_BASE_SECS: i64 = 1_640_995_200;
const ADMISSION_WINDOW_SECS: i64 = 365 * 24 * 3600;

/// Confounder generator shared by every patient group; sharing it is what
/// makes the groups balanced.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfounderSpec {
    /// ICD-9 universe size; codes are named `icd9_NNN`.
    pub n_icd9: usize,
    /// Consecutive ICD-9 codes mapped onto one PheWAS code.
    pub icd9_per_phewas: usize,
    /// Mean Poisson draw count of ICD-9 codes per patient (duplicates collapse).
    pub mean_icd9_per_patient: f64,
    /// CPT universe size; codes are named `cpt_NNN`.
    pub n_cpt: usize,
    pub mean_cpt_per_patient: f64,
    /// Zipf exponent for code popularity; 0 would be uniform, 1 gives the
    /// skewed head that keeps between-group frequency correlations high.
    pub code_skew: f64,
    pub insurance_levels: Vec<String>,
    pub insurance_weights: Vec<f64>,
    /// Age is `age_min` plus a truncated exponential with this mean, capped
    /// at `age_max`.
    pub age_mean_years: f64,
    pub age_min: u32,
    pub age_max: u32,
}

impl Default for ConfounderSpec {
    fn default() -> Self {
        Self {
            n_icd9: 180,
            icd9_per_phewas: 3,
            mean_icd9_per_patient: 6.0,
            n_cpt: 80,
            mean_cpt_per_patient: 4.0,
            code_skew: 1.0,
            insurance_levels: ["commercial", "medicare", "medicaid", "self_pay"]
                .map(String::from)
                .to_vec(),
            insurance_weights: vec![0.35, 0.40, 0.15, 0.10],
            age_mean_years: 29.0,
            age_min: 18,
            age_max: 100,
        }
    }
}

/// Full generator configuration. Group `g` patients produce events in group
/// `g` areas at `block_rates[g][g]` per cell and elsewhere at the off-block
/// rates, and draw LOS from NB(`los_means[g]`, `los_dispersion`).
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub group_sizes: Vec<usize>,
    pub area_group_sizes: Vec<usize>,
    /// `block_rates[area_group][patient_group]` = Poisson events per cell.
    pub block_rates: Vec<Vec<f64>>,
    /// Mean LOS in hours per patient group.
    pub los_means: Vec<f64>,
    /// NB2 dispersion for LOS. Kept mild by default so the planted mean
    /// gaps stay detectable at the default group sizes.
    pub los_dispersion: f64,
    pub confounders: ConfounderSpec,
    /// Fraction of each group marked deceased; the count is rounded per
    /// group, so it is exact rather than sampled.
    pub death_fraction: f64,
    /// Each area gets its own employee pool of this size.
    pub employees_per_area: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            group_sizes: vec![428, 1353, 3807],
            area_group_sizes: vec![27, 86, 66],
            block_rates: planted_rates(3, 2.0, 0.2),
            los_means: vec![144.0, 158.0, 154.0],
            los_dispersion: 0.05,
            confounders: ConfounderSpec::default(),
            death_fraction: 0.0,
            employees_per_area: 31,
            seed: 42,
        }
    }
}

/// k × k rate matrix with `in_rate` on the diagonal and `out_rate` elsewhere.
pub fn planted_rates(k: usize, in_rate: f64, out_rate: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { in_rate } else { out_rate }).collect())
        .collect()
}

/// One generated cohort plus the planted labels (1-based group ids) needed
/// to score recovery.
#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub events: Vec<AccessEvent>,
    pub patients: Vec<PatientRecord>,
    /// ICD-9 → PheWAS table covering the whole generated universe.
    pub mapping: CodeMapping,
    pub true_patient_group: BTreeMap<String, usize>,
    pub true_area_group: BTreeMap<String, usize>,
}

fn validate(config: &SynthConfig) -> Result<()> {
    let k = config.group_sizes.len();
    if k == 0 {
        return Err(Error::invalid("at least one patient group is required"));
    }
    if config.area_group_sizes.len() != k {
        return Err(Error::invalid(format!(
            "area_group_sizes has {} entries for {k} patient groups",
            config.area_group_sizes.len()
        )));
    }
    if config.los_means.len() != k {
        return Err(Error::invalid(format!(
            "los_means has {} entries for {k} patient groups",
            config.los_means.len()
        )));
    }
    if config.block_rates.len() != k || config.block_rates.iter().any(|r| r.len() != k) {
        return Err(Error::invalid(format!("block_rates must be a {k}x{k} matrix")));
    }
    if config.group_sizes.iter().any(|&n| n == 0) {
        return Err(Error::invalid("every patient group must have at least one patient"));
    }
    if config.area_group_sizes.iter().any(|&n| n == 0) {
        return Err(Error::invalid("every area group must have at least one area"));
    }
    for row in &config.block_rates {
        if row.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::invalid("block rates must be finite and non-negative"));
        }
    }
    if config.los_means.iter().any(|m| !m.is_finite() || *m <= 0.0) {
        return Err(Error::invalid("LOS means must be finite and positive"));
    }
    if !config.los_dispersion.is_finite() || config.los_dispersion < 0.0 {
        return Err(Error::invalid("los_dispersion must be finite and non-negative"));
    }
    if !config.death_fraction.is_finite() || !(0.0..=1.0).contains(&config.death_fraction) {
        return Err(Error::invalid("death_fraction must lie in [0, 1]"));
    }
    if config.employees_per_area == 0 {
        return Err(Error::invalid("employees_per_area must be at least 1"));
    }
    let c = &config.confounders;
    if c.n_icd9 == 0 || c.n_cpt == 0 {
        return Err(Error::invalid("code universes must be non-empty"));
    }
    if c.icd9_per_phewas == 0 {
        return Err(Error::invalid("icd9_per_phewas must be at least 1"));
    }
    if !c.mean_icd9_per_patient.is_finite()
        || c.mean_icd9_per_patient < 0.0
        || !c.mean_cpt_per_patient.is_finite()
        || c.mean_cpt_per_patient < 0.0
    {
        return Err(Error::invalid("mean code counts must be finite and non-negative"));
    }
    if !c.code_skew.is_finite() || c.code_skew < 0.0 {
        return Err(Error::invalid("code_skew must be finite and non-negative"));
    }
    if c.insurance_levels.is_empty() || c.insurance_levels.len() != c.insurance_weights.len() {
        return Err(Error::invalid(
            "insurance_levels and insurance_weights must be non-empty and equally long",
        ));
    }
    if c.insurance_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || c.insurance_weights.iter().sum::<f64>() <= 0.0
    {
        return Err(Error::invalid("insurance weights must be non-negative with a positive sum"));
    }
    if !c.age_mean_years.is_finite() || c.age_mean_years <= 0.0 {
        return Err(Error::invalid("age_mean_years must be finite and positive"));
    }
    if c.age_max < c.age_min {
        return Err(Error::invalid("age_max must be at least age_min"));
    }
    Ok(())
}

/// NB2 sampler via the Gamma–Poisson mixture: the mixing mean is `mean`, the
/// mixing variance `dispersion * mean^2`, so the count has variance
/// `mean + dispersion * mean^2`. Dispersion 0 degenerates to Poisson.
enum LosSampler {
    Poisson(Poisson<f64>),
    GammaPoisson(Gamma<f64>),
}

impl LosSampler {
    fn new(mean: f64, dispersion: f64) -> Result<Self> {
        if dispersion == 0.0 {
            let d = Poisson::new(mean).map_err(|e| Error::invalid(format!("LOS mean: {e}")))?;
            Ok(Self::Poisson(d))
        } else {
            let shape = 1.0 / dispersion;
            let scale = dispersion * mean;
            let d = Gamma::new(shape, scale)
                .map_err(|e| Error::invalid(format!("LOS dispersion: {e}")))?;
            Ok(Self::GammaPoisson(d))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            Self::Poisson(d) => d.sample(rng) as u64,
            Self::GammaPoisson(mixing) => {
                let lambda = mixing.sample(rng);
                if lambda > 0.0 {
                    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
                } else {
                    0
                }
            }
        }
    }
}

/// Draws a Poisson count, treating mean 0 as always-zero (the distribution
/// itself rejects a zero rate).
fn count_dist(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::invalid(format!("code count mean: {e}")))
}

fn zipf_dist(n: usize, skew: f64) -> Result<Zipf<f64>> {
    Zipf::new(n as f64, skew).map_err(|e| Error::invalid(format!("code distribution: {e}")))
}

fn draw_codes(
    rng: &mut ChaCha8Rng,
    count: &Option<Poisson<f64>>,
    popularity: &Zipf<f64>,
    prefix: &str,
) -> BTreeSet<String> {
    let mut codes = BTreeSet::new();
    let Some(count) = count else { return codes };
    let draws = count.sample(rng) as u64;
    for _ in 0..draws {
        let idx = popularity.sample(rng) as usize - 1;
        codes.insert(format!("{prefix}_{idx:03}"));
    }
    codes
}

/// Generates one cohort. All streams derive from `config.seed`, and the
/// event list is sorted by (timestamp, area, patient, employee, action), so
/// output is a pure function of the config.
pub fn generate(config: &SynthConfig) -> Result<SynthCohort> {
    validate(config)?;
    let n_patients: usize = config.group_sizes.iter().sum();
    let n_areas: usize = config.area_group_sizes.iter().sum();

    // 0-based group index per entity index; entities are laid out in
    // contiguous group blocks.
    let patient_group: Vec<usize> = config
        .group_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| std::iter::repeat(g).take(n))
        .collect();
    let area_group: Vec<usize> = config
        .area_group_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| std::iter::repeat(g).take(n))
        .collect();

    let patient_ids: Vec<String> = (0..n_patients).map(|i| format!("p{i:05}")).collect();
    let area_ids: Vec<String> = (0..n_areas).map(|i| format!("area_{i:03}")).collect();

    // Exact planted death counts: the first round(f * n_g) patients of each
    // group die in service.
    let mut died = vec![false; n_patients];
    let mut offset = 0;
    for &n in &config.group_sizes {
        let deaths = (config.death_fraction * n as f64).round() as usize;
        for d in died.iter_mut().skip(offset).take(deaths.min(n)) {
            *d = true;
        }
        offset += n;
    }

    let spec = &config.confounders;
    let icd9_count = count_dist(spec.mean_icd9_per_patient)?;
    let cpt_count = count_dist(spec.mean_cpt_per_patient)?;
    let icd9_pop = zipf_dist(spec.n_icd9, spec.code_skew)?;
    let cpt_pop = zipf_dist(spec.n_cpt, spec.code_skew)?;
    let insurance = WeightedIndex::new(&spec.insurance_weights)
        .map_err(|e| Error::invalid(format!("insurance weights: {e}")))?;
    let age_tail = Exp::new(1.0 / spec.age_mean_years)
        .map_err(|e| Error::invalid(format!("age distribution: {e}")))?;
    let los_samplers: Vec<LosSampler> = config
        .los_means
        .iter()
        .map(|&m| LosSampler::new(m, config.los_dispersion))
        .collect::<Result<_>>()?;

    let mut rng_los = rng_from(derive_seed(config.seed, "synth.los"));
    let mut rng_codes = rng_from(derive_seed(config.seed, "synth.codes"));
    let mut rng_demo = rng_from(derive_seed(config.seed, "synth.demographics"));
    let mut rng_admit = rng_from(derive_seed(config.seed, "synth.admission"));

    let mut patients = Vec::with_capacity(n_patients);
    let mut admission_secs = Vec::with_capacity(n_patients);
    let mut los_secs = Vec::with_capacity(n_patients);
    for i in 0..n_patients {
        let g = patient_group[i];
        let los_hours = los_samplers[g].sample(&mut rng_los);
        let icd9_codes = draw_codes(&mut rng_codes, &icd9_count, &icd9_pop, "icd9");
        let cpt_codes = draw_codes(&mut rng_codes, &cpt_count, &cpt_pop, "cpt");
        let age_span = (spec.age_max - spec.age_min) as f64;
        let age = spec.age_min + age_tail.sample(&mut rng_demo).floor().min(age_span) as u32;
        let level = insurance.sample(&mut rng_demo);
        admission_secs.push(ADMISSION_BASE_SECS + rng_admit.random_range(0..ADMISSION_WINDOW_SECS));
        los_secs.push(los_hours as i64 * 3600);
        patients.push(PatientRecord {
            patient_id: patient_ids[i].clone(),
            age,
            los_hours: los_hours as f64,
            died_in_service: died[i],
            icd9_codes,
            cpt_codes,
            insurance: spec.insurance_levels[level].clone(),
        });
    }

    // Cell counts and event attributes come from separate streams so the
    // block structure is independent of the cosmetic detail.
    let cell_rates: Vec<Vec<Option<Poisson<f64>>>> = config
        .block_rates
        .iter()
        .map(|row| row.iter().map(|&r| count_dist(r)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut rng_cells = rng_from(derive_seed(config.seed, "synth.cells"));
    let mut rng_events = rng_from(derive_seed(config.seed, "synth.events"));

    // (timestamp, area, patient, employee, action) kept as indices until
    // after the sort; strings are built once per event at the end.
    let mut raw: Vec<(i64, u32, u32, u32, u8)> = Vec::new();
    for (a, &ga) in area_group.iter().enumerate() {
        for (p, &gp) in patient_group.iter().enumerate() {
            let Some(dist) = &cell_rates[ga][gp] else { continue };
            let count = dist.sample(&mut rng_cells) as u64;
            for _ in 0..count {
                let dt = if los_secs[p] > 0 { rng_events.random_range(0..=los_secs[p]) } else { 0 };
                let employee = (a * config.employees_per_area
                    + rng_events.random_range(0..config.employees_per_area))
                    as u32;
                let action = rng_events.random_range(0..ACTIONS.len()) as u8;
                raw.push((admission_secs[p] + dt, a as u32, p as u32, employee, action));
            }
        }
    }
    raw.sort_unstable();
    let events = raw
        .into_iter()
        .map(|(ts, a, p, e, act)| AccessEvent {
            employee_id: format!("e{e:05}"),
            area_id: area_ids[a as usize].clone(),
            patient_id: patient_ids[p as usize].clone(),
            action_type: ACTIONS[act as usize].to_string(),
            timestamp: Utc.timestamp_opt(ts, 0).single().expect("in-range epoch seconds"),
        })
        .collect();

    let mut mapping = CodeMapping::new();
    for i in 0..spec.n_icd9 {
        mapping.insert(format!("icd9_{i:03}"), format!("phewas_{:03}", i / spec.icd9_per_phewas))?;
    }

    let true_patient_group: BTreeMap<String, usize> = patient_ids
        .iter()
        .zip(&patient_group)
        .map(|(id, &g)| (id.clone(), g + 1))
        .collect();
    let true_area_group: BTreeMap<String, usize> = area_ids
        .iter()
        .zip(&area_group)
        .map(|(id, &g)| (id.clone(), g + 1))
        .collect();

    Ok(SynthCohort { events, patients, mapping, true_patient_group, true_area_group })
}

/// Adjusted Rand index between two labelings of the same items, by the
/// pair-counting contingency formula. Label values are arbitrary; only the
/// induced partitions matter. When the chance-corrected denominator is zero
/// (both partitions trivial) the labelings are identical partitions and the
/// score is 1.
pub fn ari(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LabelLengthMismatch(labels_a.len(), labels_b.len()));
    }
    let n = labels_a.len();
    if n < 2 {
        return Err(Error::invalid("adjusted Rand index needs at least two labeled items"));
    }
    let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        *cells.entry((a, b)).or_insert(0) += 1;
        *rows.entry(a).or_insert(0) += 1;
        *cols.entry(b).or_insert(0) += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let index: f64 = cells.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let expected = sum_rows * sum_cols / comb2(n as u64);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// `ari` over labelings keyed by entity id; the key sets must coincide.
pub fn ari_maps(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LabelLengthMismatch(a.len(), b.len()));
    }
    let mut va = Vec::with_capacity(a.len());
    let mut vb = Vec::with_capacity(b.len());
    for ((ka, &la), (kb, &lb)) in a.iter().zip(b.iter()) {
        if ka != kb {
            return Err(Error::invalid(format!("labelings disagree on ids: `{ka}` vs `{kb}`")));
        }
        va.push(la);
        vb.push(lb);
    }
    ari(&va, &vb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> SynthConfig {
        SynthConfig {
            group_sizes: vec![6, 9],
            area_group_sizes: vec![3, 4],
            block_rates: planted_rates(2, 1.5, 0.3),
            los_means: vec![100.0, 120.0],
            los_dispersion: 0.2,
            confounders: ConfounderSpec {
                n_icd9: 12,
                icd9_per_phewas: 3,
                n_cpt: 9,
                ..ConfounderSpec::default()
            },
            death_fraction: 0.0,
            employees_per_area: 4,
            seed: 7,
        }
    }

    #[test]
    fn zero_rates_generate_no_events() {
        let mut config = tiny_config();
        config.block_rates = planted_rates(2, 0.0, 0.0);
        let cohort = generate(&config).unwrap();
        assert!(cohort.events.is_empty());
        assert_eq!(cohort.patients.len(), 15);
    }

    #[test]
    fn same_seed_reproduces_cohort() {
        let a = generate(&tiny_config()).unwrap();
        let b = generate(&tiny_config()).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.patients, b.patients);
        assert_eq!(a.true_patient_group, b.true_patient_group);
        assert_eq!(a.true_area_group, b.true_area_group);
        let pairs: Vec<_> = a.mapping.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let pairs_b: Vec<_> =
            b.mapping.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        assert_eq!(pairs, pairs_b);
    }

    #[test]
    fn different_seed_changes_events() {
        let mut other = tiny_config();
        other.seed = 8;
        let a = generate(&tiny_config()).unwrap();
        let b = generate(&other).unwrap();
        assert_ne!(a.events, b.events);
    }

    #[test]
    fn planted_labels_cover_cohort() {
        let config = tiny_config();
        let cohort = generate(&config).unwrap();
        assert_eq!(cohort.true_patient_group.len(), 15);
        assert_eq!(cohort.true_area_group.len(), 7);
        for g in 1..=2 {
            let n = cohort.true_patient_group.values().filter(|&&v| v == g).count();
            assert_eq!(n, config.group_sizes[g - 1]);
            let m = cohort.true_area_group.values().filter(|&&v| v == g).count();
            assert_eq!(m, config.area_group_sizes[g - 1]);
        }
    }

    #[test]
    fn death_counts_are_exact() {
        let mut config = tiny_config();
        config.death_fraction = 0.25;
        let cohort = generate(&config).unwrap();
        let per_group: Vec<usize> = (1..=2)
            .map(|g| {
                cohort
                    .patients
                    .iter()
                    .filter(|p| p.died_in_service && cohort.true_patient_group[&p.patient_id] == g)
                    .count()
            })
            .collect();
        // round(0.25 * 6) = 2 (ties-away rounding), round(0.25 * 9) = 2.
        assert_eq!(per_group, vec![2, 2]);
    }

    #[test]
    fn mapping_covers_generated_codes() {
        let cohort = generate(&tiny_config()).unwrap();
        assert_eq!(cohort.mapping.len(), 12);
        let targets: BTreeSet<&str> = cohort.mapping.iter().map(|(_, v)| v).collect();
        assert_eq!(targets.len(), 4);
        for patient in &cohort.patients {
            for code in &patient.icd9_codes {
                assert!(cohort.mapping.get(code).is_some(), "unmapped generated code {code}");
            }
        }
    }

    #[test]
    fn events_stay_within_each_stay() {
        let cohort = generate(&tiny_config()).unwrap();
        let mut spans: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
        for e in &cohort.events {
            let t = e.timestamp.timestamp();
            let entry = spans.entry(&e.patient_id).or_insert((t, t));
            entry.0 = entry.0.min(t);
            entry.1 = entry.1.max(t);
        }
        for patient in &cohort.patients {
            if let Some(&(lo, hi)) = spans.get(patient.patient_id.as_str()) {
                assert!(hi - lo <= patient.los_hours as i64 * 3600);
                assert!(lo >= ADMISSION_BASE_SECS);
                assert!(hi < ADMISSION_BASE_SECS + ADMISSION_WINDOW_SECS + 366 * 24 * 3600);
            }
        }
    }

    #[test]
    fn rejects_malformed_configs() {
        let mut config = tiny_config();
        config.block_rates = planted_rates(3, 1.0, 0.1);
        assert!(generate(&config).is_err());
        let mut config = tiny_config();
        config.block_rates[0][1] = -0.5;
        assert!(generate(&config).is_err());
        let mut config = tiny_config();
        config.los_means = vec![100.0];
        assert!(generate(&config).is_err());
        let mut config = tiny_config();
        config.death_fraction = 1.5;
        assert!(generate(&config).is_err());
        let mut config = tiny_config();
        config.confounders.insurance_weights = vec![0.0, 0.0, 0.0, 0.0];
        assert!(generate(&config).is_err());
    }

    /// Law-of-large-numbers check of the generator against its own
    /// parameters at the default scale: per-block mean event counts within
    /// 5% of the block rates, per-group mean LOS within 2% of the configured
    /// means.
    #[test]
    fn default_seed_matches_parameters() {
        let config = SynthConfig::default();
        let cohort = generate(&config).unwrap();

        let mut block_events = vec![vec![0u64; 3]; 3];
        for e in &cohort.events {
            let ga = cohort.true_area_group[&e.area_id] - 1;
            let gp = cohort.true_patient_group[&e.patient_id] - 1;
            block_events[ga][gp] += 1;
        }
        for ga in 0..3 {
            for gp in 0..3 {
                let cells = (config.area_group_sizes[ga] * config.group_sizes[gp]) as f64;
                let mean = block_events[ga][gp] as f64 / cells;
                let rate = config.block_rates[ga][gp];
                assert!(
                    (mean - rate).abs() <= 0.05 * rate,
                    "block ({ga},{gp}): mean {mean:.4} vs rate {rate}"
                );
            }
        }

        let mut sums = vec![0.0; 3];
        let mut counts = vec![0usize; 3];
        for p in &cohort.patients {
            let g = cohort.true_patient_group[&p.patient_id] - 1;
            sums[g] += p.los_hours;
            counts[g] += 1;
        }
        for g in 0..3 {
            let mean = sums[g] / counts[g] as f64;
            let target = config.los_means[g];
            assert!(
                (mean - target).abs() <= 0.02 * target,
                "group {g}: mean LOS {mean:.2} vs {target}"
            );
        }
    }

    #[test]
    fn ari_trivial_cases() {
        let a = vec![1, 1, 2, 2, 3, 3];
        assert_eq!(ari(&a, &a).unwrap(), 1.0);
        // Renaming labels does not change the partition.
        let renamed = vec![7, 7, 5, 5, 6, 6];
        assert_eq!(ari(&a, &renamed).unwrap(), 1.0);
        assert!(matches!(ari(&a, &[1, 2]), Err(Error::LabelLengthMismatch(6, 2))));
        assert!(ari(&[1], &[1]).is_err());
        // Both trivial partitions: denominator is zero, identical partitions.
        assert_eq!(ari(&[1, 1, 1], &[2, 2, 2]).unwrap(), 1.0);
    }

    #[test]
    fn ari_matches_hand_computation() {
        // Contingency (2,1 / 0,3): index 4, row sum 6, col sum 7, C(6,2)=15,
        // expected 2.8, max 6.5 -> ARI = 1.2 / 3.7.
        let a = vec![1, 1, 1, 2, 2, 2];
        let b = vec![1, 1, 2, 2, 2, 2];
        let got = ari(&a, &b).unwrap();
        assert!((got - 1.2 / 3.7).abs() < 1e-12);
    }

    #[test]
    fn ari_near_zero_for_independent_labelings() {
        let mut rng_a = rng_from(derive_seed(21, "ari.null.a"));
        let mut rng_b = rng_from(derive_seed(21, "ari.null.b"));
        let a: Vec<usize> = (0..10_000).map(|_| rng_a.random_range(0..3)).collect();
        let b: Vec<usize> = (0..10_000).map(|_| rng_b.random_range(0..3)).collect();
        let got = ari(&a, &b).unwrap();
        assert!(got.abs() <= 0.02, "null ARI {got}");
    }

    #[test]
    fn ari_maps_requires_matching_ids() {
        let a: BTreeMap<String, usize> =
            [("x".into(), 1), ("y".into(), 1), ("z".into(), 2)].into_iter().collect();
        let mut b = a.clone();
        assert_eq!(ari_maps(&a, &b).unwrap(), 1.0);
        b.remove("z");
        b.insert("w".into(), 2);
        assert!(ari_maps(&a, &b).is_err());
    }
}
