//! Stage orchestration over an artifact directory.
//!
//! Every stage reads its inputs from files and writes its outputs back, so
//! running stages one at a time composes to the same bytes as `run_all`.
//! Files are written to a temporary sibling and renamed into place, so a
//! failed stage never leaves a partial artifact. All randomness derives from
//! the one root seed, split per stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::cocluster::{self, CoClusterAssignment};
use crate::datamodel::{self, AreaUtilizationMatrix};
use crate::error::{Error, Result};
use crate::network::{self, export, louvain};
use crate::seeding::{derive_seed, derive_seed_indexed};
use crate::stats;
use crate::synth::{self, SynthConfig};

pub const EVENTS_CSV: &str = "events.csv";
pub const PATIENTS_CSV: &str = "patients.csv";
pub const PHEWAS_MAP_CSV: &str = "phewas_map.csv";
pub const TRUTH_CSV: &str = "truth.csv";
pub const COHORT_CSV: &str = "cohort.csv";
pub const AREA_COUNTS_CSV: &str = "area_counts.csv";
pub const ASSIGNMENTS_CSV: &str = "assignments.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const LOS_TESTS_CSV: &str = "los_tests.csv";
pub const SIMILARITY_CSV: &str = "similarity.csv";
pub const FIT_JSON: &str = "fit.json";
pub const REPORT_JSON: &str = "report.json";

pub fn graphml_name(group: usize) -> String {
    format!("network_g{group}.graphml")
}

pub fn dot_name(group: usize) -> String {
    format!("network_g{group}.dot")
}

/// One pipeline stage; `All` runs every enabled stage in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Cocluster,
    Network,
    Stats,
    Report,
    All,
}

const STAGE_NAMES: [&str; 6] = ["synth", "ingest", "cocluster", "network", "stats", "report"];

/// Orchestrator configuration, loadable from TOML. Unset input paths default
/// to the synth stage's outputs inside `out`.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Artifact directory; created if absent.
    pub out: PathBuf,
    /// Event log path; defaults to `<out>/events.csv`.
    pub events: Option<PathBuf>,
    /// Patient table path; defaults to `<out>/patients.csv`.
    pub patients: Option<PathBuf>,
    /// ICD-9 → PheWAS table path; defaults to `<out>/phewas_map.csv`.
    pub mapping: Option<PathBuf>,
    /// Number of patient/area groups.
    pub k: usize,
    /// Root seed; each stage derives its own stream from it.
    pub seed: u64,
    /// Cosine-similarity edge threshold.
    pub tau: f64,
    /// Minimum total actions for an area to enter a network.
    pub min_actions: u64,
    /// Cohort filter: keep patients at least this old.
    pub min_age: u32,
    /// Cohort filter: drop patients who died in service.
    pub exclude_deaths: bool,
    /// Louvain resolution for the community pass.
    pub resolution: f64,
    /// Synthetic-cohort settings. The section's own `seed` is ignored; the
    /// synth stage always runs on a stream derived from the root seed.
    pub synth: SynthConfig,
    /// Per-stage opt-outs for `all`, keyed by stage name. Synth additionally
    /// defaults to off once an `events` input path is configured.
    pub stages: BTreeMap<String, bool>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            events: None,
            patients: None,
            mapping: None,
            k: cocluster::DEFAULT_K,
            seed: 42,
            tau: network::DEFAULT_TAU,
            min_actions: network::DEFAULT_MIN_ACTIONS,
            min_age: 18,
            exclude_deaths: true,
            resolution: 1.0,
            synth: SynthConfig::default(),
            stages: BTreeMap::new(),
        }
    }
}

impl PipelineConfig {
    pub fn events_path(&self) -> PathBuf {
        self.events.clone().unwrap_or_else(|| self.out.join(EVENTS_CSV))
    }

    pub fn patients_path(&self) -> PathBuf {
        self.patients.clone().unwrap_or_else(|| self.out.join(PATIENTS_CSV))
    }

    pub fn mapping_path(&self) -> PathBuf {
        self.mapping.clone().unwrap_or_else(|| self.out.join(PHEWAS_MAP_CSV))
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {}", self.k)));
        }
        if !self.tau.is_finite() || !(0.0..1.0).contains(&self.tau) {
            return Err(Error::invalid(format!("tau must be in [0, 1), got {}", self.tau)));
        }
        if self.min_actions < 1 {
            return Err(Error::invalid("min_actions must be at least 1"));
        }
        if !self.resolution.is_finite() || self.resolution < 0.0 {
            return Err(Error::invalid(format!(
                "resolution must be finite and non-negative, got {}",
                self.resolution
            )));
        }
        for name in self.stages.keys() {
            if !STAGE_NAMES.contains(&name.as_str()) {
                return Err(Error::invalid(format!("unknown stage toggle `{name}`")));
            }
        }
        Ok(())
    }
}

/// Parse a TOML configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    toml::from_str(&text)
        .map_err(|e| Error::Artifact { path: path.to_path_buf(), message: e.to_string() })
}

/// Run one stage (or `All`) against the configured artifact directory.
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(&config.out)
        .map_err(|source| Error::File { path: config.out.clone(), source })?;
    match stage {
        Stage::Synth => stage_synth(config),
        Stage::Ingest => stage_ingest(config),
        Stage::Cocluster => stage_cocluster(config),
        Stage::Network => stage_network(config),
        Stage::Stats => stage_stats(config),
        Stage::Report => stage_report(config),
        Stage::All => {
            // Synth is skipped when real inputs are configured, unless the
            // toggle asks for it explicitly.
            let synth_default = config.events.is_none();
            let enabled =
                |name: &str, default: bool| config.stages.get(name).copied().unwrap_or(default);
            if enabled("synth", synth_default) {
                stage_synth(config)?;
            }
            for (name, f) in [
                ("ingest", stage_ingest as fn(&PipelineConfig) -> Result<()>),
                ("cocluster", stage_cocluster),
                ("network", stage_network),
                ("stats", stage_stats),
                ("report", stage_report),
            ] {
                if enabled(name, true) {
                    f(config)?;
                }
            }
            Ok(())
        }
    }
}

pub fn run_all(config: &PipelineConfig) -> Result<()> {
    run_stage(config, Stage::All)
}

/// Write bytes to `<name>.tmp` in the target directory, then rename over the
/// final path, so readers never observe a partial artifact.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|source| Error::File { path: tmp.clone(), source })?;
    fs::rename(&tmp, path).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

fn stage_synth(config: &PipelineConfig) -> Result<()> {
    let mut settings = config.synth.clone();
    settings.seed = derive_seed(config.seed, "stage.synth");
    let cohort = synth::generate(&settings)?;

    let mut buf = Vec::new();
    datamodel::write_events(&mut buf, &cohort.events)?;
    write_atomic(&config.artifact(EVENTS_CSV), &buf)?;

    buf.clear();
    datamodel::write_patients(&mut buf, &cohort.patients)?;
    write_atomic(&config.artifact(PATIENTS_CSV), &buf)?;

    buf.clear();
    datamodel::write_mapping(&mut buf, &cohort.mapping)?;
    write_atomic(&config.artifact(PHEWAS_MAP_CSV), &buf)?;

    buf.clear();
    write_groups(&mut buf, &cohort.true_patient_group, &cohort.true_area_group)?;
    write_atomic(&config.artifact(TRUTH_CSV), &buf)
}

fn stage_ingest(config: &PipelineConfig) -> Result<()> {
    let events = datamodel::load_events(config.events_path())?;
    let patients = datamodel::load_patients(config.patients_path())?;
    let cohort = datamodel::apply_cohort_filters(&patients, config.min_age, config.exclude_deaths);
    if cohort.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let ids: BTreeSet<&str> = cohort.iter().map(|p| p.patient_id.as_str()).collect();
    let kept: Vec<_> =
        events.into_iter().filter(|e| ids.contains(e.patient_id.as_str())).collect();
    let matrix = datamodel::aggregate_by_area(&kept)?;

    let mut buf = Vec::new();
    datamodel::write_patients(&mut buf, &cohort)?;
    write_atomic(&config.artifact(COHORT_CSV), &buf)?;

    buf.clear();
    write_area_counts(&mut buf, &matrix)?;
    write_atomic(&config.artifact(AREA_COUNTS_CSV), &buf)
}

fn stage_cocluster(config: &PipelineConfig) -> Result<()> {
    let matrix = read_area_counts(&config.artifact(AREA_COUNTS_CSV))?;
    let assignment =
        cocluster::cocluster(&matrix, config.k, derive_seed(config.seed, "stage.cocluster"))?;
    let mut buf = Vec::new();
    write_groups(&mut buf, &assignment.patient_group, &assignment.area_group)?;
    write_atomic(&config.artifact(ASSIGNMENTS_CSV), &buf)
}

fn stage_network(config: &PipelineConfig) -> Result<()> {
    let matrix = read_area_counts(&config.artifact(AREA_COUNTS_CSV))?;
    let assignment = read_assignment(&config.artifact(ASSIGNMENTS_CSV))?;
    let groups: BTreeSet<usize> = assignment.patient_group.values().copied().collect();

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "group",
        "n_nodes",
        "avg_degree",
        "avg_weighted_degree",
        "density",
        "avg_clustering",
        "avg_path_length",
        "modularity",
        "n_communities",
    ])?;
    for &g in &groups {
        let net = network::build_network(&matrix, &assignment, g, config.tau, config.min_actions)?;
        let m = network::metrics(&net)?;
        let seed = derive_seed_indexed(config.seed, "stage.network", g as u64);
        let partition = louvain(&net, seed, config.resolution)?;

        let mut buf = Vec::new();
        export::write_graphml(&mut buf, &net, &partition)?;
        write_atomic(&config.artifact(&graphml_name(g)), &buf)?;
        buf.clear();
        export::write_dot(&mut buf, &net, &partition)?;
        write_atomic(&config.artifact(&dot_name(g)), &buf)?;

        wtr.write_record([
            g.to_string(),
            m.n_nodes.to_string(),
            m.avg_degree.to_string(),
            m.avg_weighted_degree.to_string(),
            m.density.to_string(),
            m.avg_clustering.to_string(),
            m.avg_path_length.to_string(),
            partition.modularity.to_string(),
            partition.n_communities().to_string(),
        ])?;
    }
    let buf = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(&config.artifact(METRICS_CSV), &buf)
}

fn stage_stats(config: &PipelineConfig) -> Result<()> {
    let patients = datamodel::load_patients(config.artifact(COHORT_CSV))?;
    let assignment = read_assignment(&config.artifact(ASSIGNMENTS_CSV))?;
    let mapping = datamodel::load_mapping(config.mapping_path())?;

    let design = stats::build_design(&patients, &assignment, &mapping)?;
    let fit = stats::fit_nb(&design)?;
    if !fit.converged {
        return Err(Error::NonConvergence("negative binomial fit".to_string()));
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["group_a", "group_b", "delta_hours", "p_value", "ci_low", "ci_high"])?;
    for (i, &a) in design.groups.iter().enumerate() {
        for &b in &design.groups[i + 1..] {
            let t = stats::pairwise_los_test(&design, &fit, a, b)?;
            wtr.write_record([
                t.group_a.to_string(),
                t.group_b.to_string(),
                t.delta_hours.to_string(),
                t.p_value.to_string(),
                t.ci_low.to_string(),
                t.ci_high.to_string(),
            ])?;
        }
    }
    let buf = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(&config.artifact(LOS_TESTS_CSV), &buf)?;

    let fit_json = json!({
        "column_names": fit.column_names,
        "coefficients": fit.coefficients,
        "standard_errors": fit.standard_errors(),
        "dispersion": fit.dispersion,
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "reference_group": design.reference_group,
        "n_rows": design.n_rows(),
    });
    let mut buf = serde_json::to_vec_pretty(&fit_json)
        .map_err(|e| Error::invalid(format!("fit serialization: {e}")))?;
    buf.push(b'\n');
    write_atomic(&config.artifact(FIT_JSON), &buf)?;

    let report = stats::similarity_report(&patients, &assignment, &mapping)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["pair", "factor", "pcc", "p_value"])?;
    for r in &report {
        wtr.write_record([
            format!("g{}_vs_g{}", r.group_a, r.group_b),
            r.factor.to_string(),
            r.pcc.to_string(),
            r.p_value.to_string(),
        ])?;
    }
    let buf = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(&config.artifact(SIMILARITY_CSV), &buf)
}

fn stage_report(config: &PipelineConfig) -> Result<()> {
    let assignment = read_assignment(&config.artifact(ASSIGNMENTS_CSV))?;
    let metrics = read_metrics_rows(&config.artifact(METRICS_CSV))?;
    let los_tests = read_los_rows(&config.artifact(LOS_TESTS_CSV))?;
    let similarity = read_similarity_rows(&config.artifact(SIMILARITY_CSV))?;
    let fit_path = config.artifact(FIT_JSON);
    let fit_bytes =
        fs::read(&fit_path).map_err(|source| Error::File { path: fit_path.clone(), source })?;
    let fit: serde_json::Value = serde_json::from_slice(&fit_bytes)
        .map_err(|e| Error::Artifact { path: fit_path, message: e.to_string() })?;

    let mut patients_per_group: BTreeMap<usize, usize> = BTreeMap::new();
    for g in assignment.patient_group.values() {
        *patients_per_group.entry(*g).or_insert(0) += 1;
    }
    let mut areas_per_group: BTreeMap<usize, usize> = BTreeMap::new();
    for g in assignment.area_group.values() {
        *areas_per_group.entry(*g).or_insert(0) += 1;
    }

    let groups: Vec<serde_json::Value> = metrics
        .iter()
        .map(|m| {
            let g = m.group;
            json!({
                "group": g,
                "patients": patients_per_group.get(&g).copied().unwrap_or(0),
                "areas": areas_per_group.get(&g).copied().unwrap_or(0),
                "n_nodes": m.n_nodes,
                "avg_degree": m.avg_degree,
                "avg_weighted_degree": m.avg_weighted_degree,
                "density": m.density,
                "avg_clustering": m.avg_clustering,
                "avg_path_length": m.avg_path_length,
                "modularity": m.modularity,
                "n_communities": m.n_communities,
            })
        })
        .collect();

    let report = json!({
        "cohort": {
            "patients": assignment.patient_group.len(),
            "areas": assignment.area_group.len(),
            "groups": patients_per_group.len(),
        },
        "groups": groups,
        "los_model": fit,
        "los_tests": los_tests,
        "similarity": similarity,
    });
    let mut buf = serde_json::to_vec_pretty(&report)
        .map_err(|e| Error::invalid(format!("report serialization: {e}")))?;
    buf.push(b'\n');
    write_atomic(&config.artifact(REPORT_JSON), &buf)
}

/// `entity_type,entity_id,group` rows for all patients, then all areas.
/// Used for both planted truth and recovered assignments.
fn write_groups(
    writer: impl std::io::Write,
    patients: &BTreeMap<String, usize>,
    areas: &BTreeMap<String, usize>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["entity_type", "entity_id", "group"])?;
    for (id, g) in patients {
        let group = g.to_string();
        wtr.write_record(["patient", id.as_str(), group.as_str()])?;
    }
    for (id, g) in areas {
        let group = g.to_string();
        wtr.write_record(["area", id.as_str(), group.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_assignment(path: &Path) -> Result<CoClusterAssignment> {
    let text = fs::read_to_string(path)
        .map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    let bad = |message: String| Error::Artifact { path: path.to_path_buf(), message };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()? != vec!["entity_type", "entity_id", "group"] {
        return Err(bad("expected header entity_type,entity_id,group".to_string()));
    }
    let mut patient_group = BTreeMap::new();
    let mut area_group = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let id = record.get(1).unwrap_or("").to_string();
        let group: usize = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| bad(format!("bad group for `{id}`")))?;
        let map = match record.get(0).unwrap_or("") {
            "patient" => &mut patient_group,
            "area" => &mut area_group,
            other => return Err(bad(format!("unknown entity_type `{other}`"))),
        };
        if map.insert(id.clone(), group).is_some() {
            return Err(bad(format!("duplicate entity id `{id}`")));
        }
    }
    let k = patient_group
        .values()
        .chain(area_group.values())
        .copied()
        .max()
        .ok_or_else(|| bad("no assignment rows".to_string()))?;
    // Inertia is not persisted; downstream stages never read it.
    Ok(CoClusterAssignment { k, patient_group, area_group, inertia: 0.0 })
}

fn write_area_counts(writer: impl std::io::Write, matrix: &AreaUtilizationMatrix) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["area_id", "patient_id", "count"])?;
    for (i, area) in matrix.areas.iter().enumerate() {
        for (j, v) in matrix.counts.row(i) {
            wtr.write_record([area, &matrix.patients[j], &(v as u64).to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn read_area_counts(path: &Path) -> Result<AreaUtilizationMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    let bad = |message: String| Error::Artifact { path: path.to_path_buf(), message };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()? != vec!["area_id", "patient_id", "count"] {
        return Err(bad("expected header area_id,patient_id,count".to_string()));
    }
    let mut rows: Vec<(String, String, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let count: u64 = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| bad(format!("bad count on line {}", record_line(&record))))?;
        rows.push((
            record.get(0).unwrap_or("").to_string(),
            record.get(1).unwrap_or("").to_string(),
            count,
        ));
    }
    if rows.is_empty() {
        return Err(Error::NoEvents);
    }
    let areas: Vec<String> = rows.iter().map(|r| r.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let patients: Vec<String> =
        rows.iter().map(|r| r.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let area_idx: BTreeMap<&str, usize> =
        areas.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let pat_idx: BTreeMap<&str, usize> =
        patients.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let triplets: Vec<(usize, usize, f64)> = rows
        .iter()
        .map(|(a, p, c)| (area_idx[a.as_str()], pat_idx[p.as_str()], *c as f64))
        .collect();
    Ok(AreaUtilizationMatrix::from_counts(areas, patients, &triplets))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

struct MetricsRow {
    group: usize,
    n_nodes: u64,
    avg_degree: f64,
    avg_weighted_degree: f64,
    density: f64,
    avg_clustering: f64,
    avg_path_length: f64,
    modularity: f64,
    n_communities: u64,
}

fn read_csv_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let text = fs::read_to_string(path)
        .map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if *rdr.headers()? != csv::StringRecord::from(header.to_vec()) {
        return Err(Error::Artifact {
            path: path.to_path_buf(),
            message: format!("expected header {}", header.join(",")),
        });
    }
    let mut records = Vec::new();
    for record in rdr.records() {
        records.push(record?);
    }
    Ok(records)
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    record.get(i).unwrap_or("").parse().map_err(|_| Error::Artifact {
        path: path.to_path_buf(),
        message: format!("bad field {i} on line {}", record_line(record)),
    })
}

fn read_metrics_rows(path: &Path) -> Result<Vec<MetricsRow>> {
    let header = [
        "group",
        "n_nodes",
        "avg_degree",
        "avg_weighted_degree",
        "density",
        "avg_clustering",
        "avg_path_length",
        "modularity",
        "n_communities",
    ];
    read_csv_records(path, &header)?
        .iter()
        .map(|r| {
            Ok(MetricsRow {
                group: parse_field(r, 0, path)?,
                n_nodes: parse_field(r, 1, path)?,
                avg_degree: parse_field(r, 2, path)?,
                avg_weighted_degree: parse_field(r, 3, path)?,
                density: parse_field(r, 4, path)?,
                avg_clustering: parse_field(r, 5, path)?,
                avg_path_length: parse_field(r, 6, path)?,
                modularity: parse_field(r, 7, path)?,
                n_communities: parse_field(r, 8, path)?,
            })
        })
        .collect()
}

fn read_los_rows(path: &Path) -> Result<Vec<serde_json::Value>> {
    let header = ["group_a", "group_b", "delta_hours", "p_value", "ci_low", "ci_high"];
    read_csv_records(path, &header)?
        .iter()
        .map(|r| {
            Ok(json!({
                "group_a": parse_field::<u64>(r, 0, path)?,
                "group_b": parse_field::<u64>(r, 1, path)?,
                "delta_hours": parse_field::<f64>(r, 2, path)?,
                "p_value": parse_field::<f64>(r, 3, path)?,
                "ci_low": parse_field::<f64>(r, 4, path)?,
                "ci_high": parse_field::<f64>(r, 5, path)?,
            }))
        })
        .collect()
}

fn read_similarity_rows(path: &Path) -> Result<Vec<serde_json::Value>> {
    let header = ["pair", "factor", "pcc", "p_value"];
    read_csv_records(path, &header)?
        .iter()
        .map(|r| {
            Ok(json!({
                "pair": r.get(0).unwrap_or(""),
                "factor": r.get(1).unwrap_or(""),
                "pcc": parse_field::<f64>(r, 2, path)?,
                "p_value": parse_field::<f64>(r, 3, path)?,
            }))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_are_valid() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        assert_eq!(config.events_path(), PathBuf::from("out/events.csv"));
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut config = PipelineConfig::default();
        config.k = 1;
        assert!(config.validate().is_err());
        let mut config = PipelineConfig::default();
        config.tau = 1.0;
        assert!(config.validate().is_err());
        let mut config = PipelineConfig::default();
        config.stages.insert("compress".to_string(), false);
        assert!(config.validate().is_err());
    }

    #[test]
    fn toml_round_trip_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        fs::write(
            &path,
            "out = \"work\"\nk = 4\ntau = 0.25\n[synth]\nlos_dispersion = 0.4\n[stages]\nsynth = false\n",
        )
        .unwrap();
        let config = load_config(&path).unwrap();
        assert_eq!(config.out, PathBuf::from("work"));
        assert_eq!(config.k, 4);
        assert_eq!(config.tau, 0.25);
        assert_eq!(config.synth.los_dispersion, 0.4);
        assert_eq!(config.stages.get("synth"), Some(&false));
        // Untouched fields keep their defaults.
        assert_eq!(config.seed, 42);
        assert_eq!(config.min_age, 18);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        fs::write(&path, "clusters = 7\n").unwrap();
        assert!(matches!(load_config(&path), Err(Error::Artifact { .. })));
    }

    #[test]
    fn missing_config_names_path() {
        let err = load_config("/nonexistent/pipeline.toml").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/pipeline.toml"));
    }

    #[test]
    fn groups_csv_round_trips() {
        let patients: BTreeMap<String, usize> =
            [("p1".to_string(), 1), ("p2".to_string(), 2)].into_iter().collect();
        let areas: BTreeMap<String, usize> = [("a1".to_string(), 2)].into_iter().collect();
        let mut buf = Vec::new();
        write_groups(&mut buf, &patients, &areas).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assignments.csv");
        fs::write(&path, &buf).unwrap();
        let assignment = read_assignment(&path).unwrap();
        assert_eq!(assignment.patient_group, patients);
        assert_eq!(assignment.area_group, areas);
        assert_eq!(assignment.k, 2);
    }

    #[test]
    fn area_counts_round_trip() {
        let matrix = AreaUtilizationMatrix::from_counts(
            vec!["a1".to_string(), "a2".to_string()],
            vec!["p1".to_string(), "p2".to_string(), "p3".to_string()],
            &[(0, 0, 3.0), (0, 2, 1.0), (1, 1, 5.0)],
        );
        let mut buf = Vec::new();
        write_area_counts(&mut buf, &matrix).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("area_counts.csv");
        fs::write(&path, &buf).unwrap();
        let back = read_area_counts(&path).unwrap();
        assert_eq!(back.areas, matrix.areas);
        assert_eq!(back.patients, matrix.patients);
        assert_eq!(
            back.counts.triplets().collect::<Vec<_>>(),
            matrix.counts.triplets().collect::<Vec<_>>()
        );
    }

    #[test]
    fn atomic_write_replaces_and_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        assert!(!dir.path().join("artifact.csv.tmp").exists());
    }
}
