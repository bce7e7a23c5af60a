//! Raw-input handling: access-event logs, patient records, the ICD-9 to
//! PheWAS code mapping, cohort filters, and the utilization matrices built
//! from the event log.

use std::collections::BTreeSet;
use std::io;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;

/// One EMR access action committed by an employee on a patient's record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessEvent {
    pub employee_id: String,
    pub area_id: String,
    pub patient_id: String,
    pub action_type: String,
    pub timestamp: DateTime<Utc>,
}

/// Outcome and confounder row for one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub age: u32,
    pub los_hours: f64,
    pub died_in_service: bool,
    pub icd9_codes: BTreeSet<String>,
    pub cpt_codes: BTreeSet<String>,
    pub insurance: String,
}

/// ICD-9 → PheWAS translation table.
#[derive(Debug, Clone, Default)]
pub struct CodeMapping {
    entries: std::collections::BTreeMap<String, String>,
}

impl CodeMapping {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert one entry; errors on a duplicate ICD-9 key or empty target.
    pub fn insert(&mut self, icd9: impl Into<String>, phewas: impl Into<String>) -> Result<()> {
        let (icd9, phewas) = (icd9.into(), phewas.into());
        if phewas.is_empty() {
            return Err(Error::invalid(format!("empty PheWAS target for `{icd9}`")));
        }
        if self.entries.insert(icd9.clone(), phewas).is_some() {
            return Err(Error::invalid(format!("duplicate ICD-9 key `{icd9}`")));
        }
        Ok(())
    }

    pub fn get(&self, icd9: &str) -> Option<&str> {
        self.entries.get(icd9).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Binary employee × patient matrix A; cell 1 iff the employee committed at
/// least one action to that patient's record.
#[derive(Debug, Clone)]
pub struct BinaryUtilizationMatrix {
    pub employees: Vec<String>,
    pub patients: Vec<String>,
    pub cells: CsrMatrix,
}

/// Area × patient count matrix A'; cell (a, p) is the number of actions
/// employees from area a committed to patient p's record.
#[derive(Debug, Clone)]
pub struct AreaUtilizationMatrix {
    pub areas: Vec<String>,
    pub patients: Vec<String>,
    pub counts: CsrMatrix,
}

impl AreaUtilizationMatrix {
    /// Assemble directly from id lists and (area index, patient index, count)
    /// triplets.
    pub fn from_counts(
        areas: Vec<String>,
        patients: Vec<String>,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let counts = CsrMatrix::from_triplets(areas.len(), patients.len(), triplets);
        AreaUtilizationMatrix {
            areas,
            patients,
            counts,
        }
    }

    pub fn total_actions(&self) -> f64 {
        self.counts.total()
    }

    pub fn patient_index(&self) -> std::collections::BTreeMap<&str, usize> {
        self.patients
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect()
    }
}

const EVENT_COLUMNS: [&str; 5] = [
    "employee_id",
    "area_id",
    "patient_id",
    "action_type",
    "timestamp",
];

const PATIENT_COLUMNS: [&str; 7] = [
    "patient_id",
    "age",
    "los_hours",
    "died",
    "icd9_codes",
    "cpt_codes",
    "insurance",
];

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Map header names to field indices, erroring on the first missing column.
fn column_indices(headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn((*name).to_string()))
        })
        .collect()
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn nonempty(field: &str, name: &str, line: u64) -> Result<String> {
    if field.is_empty() {
        Err(Error::row(line, format!("empty {name}")))
    } else {
        Ok(field.to_string())
    }
}

/// Read an event log. An entirely empty file yields an empty list; a present
/// header must declare every required column.
pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<AccessEvent>> {
    let file = open(path.as_ref())?;
    read_events(file)
}

pub fn read_events(reader: impl io::Read) -> Result<Vec<AccessEvent>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() == 0 || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let idx = column_indices(&headers, &EVENT_COLUMNS)?;

    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_row_error)?;
        let line = record_line(&record);
        let field = |i: usize| -> &str { record.get(idx[i]).unwrap_or("") };

        let timestamp = DateTime::parse_from_rfc3339(field(4))
            .map_err(|e| Error::row(line, format!("malformed timestamp `{}`: {e}", field(4))))?
            .with_timezone(&Utc);
        events.push(AccessEvent {
            employee_id: nonempty(field(0), "employee_id", line)?,
            area_id: nonempty(field(1), "area_id", line)?,
            patient_id: nonempty(field(2), "patient_id", line)?,
            action_type: nonempty(field(3), "action_type", line)?,
            timestamp,
        });
    }
    Ok(events)
}

fn csv_row_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::row(line, err.to_string())
}

pub fn write_events(writer: impl io::Write, events: &[AccessEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(EVENT_COLUMNS)?;
    for e in events {
        wtr.write_record([
            e.employee_id.as_str(),
            e.area_id.as_str(),
            e.patient_id.as_str(),
            e.action_type.as_str(),
            &e.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_patients(path: impl AsRef<Path>) -> Result<Vec<PatientRecord>> {
    let file = open(path.as_ref())?;
    read_patients(file)
}

pub fn read_patients(reader: impl io::Read) -> Result<Vec<PatientRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() == 0 || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let idx = column_indices(&headers, &PATIENT_COLUMNS)?;

    let mut patients = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_row_error)?;
        let line = record_line(&record);
        let field = |i: usize| -> &str { record.get(idx[i]).unwrap_or("") };

        let age: u32 = field(1)
            .parse()
            .map_err(|_| Error::row(line, format!("malformed age `{}`", field(1))))?;
        let los_hours: f64 = field(2)
            .parse()
            .map_err(|_| Error::row(line, format!("malformed los_hours `{}`", field(2))))?;
        if !los_hours.is_finite() || los_hours < 0.0 {
            return Err(Error::row(
                line,
                format!("los_hours must be a non-negative number, got `{}`", field(2)),
            ));
        }
        let died_in_service = match field(3) {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::row(
                    line,
                    format!("malformed died flag `{other}` (expected true/false)"),
                ))
            }
        };
        patients.push(PatientRecord {
            patient_id: nonempty(field(0), "patient_id", line)?,
            age,
            los_hours,
            died_in_service,
            icd9_codes: split_codes(field(4)),
            cpt_codes: split_codes(field(5)),
            insurance: nonempty(field(6), "insurance", line)?,
        });
    }
    Ok(patients)
}

fn split_codes(field: &str) -> BTreeSet<String> {
    field
        .split('|')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn join_codes(codes: &BTreeSet<String>) -> String {
    codes.iter().cloned().collect::<Vec<_>>().join("|")
}

pub fn write_patients(writer: impl io::Write, patients: &[PatientRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(PATIENT_COLUMNS)?;
    for p in patients {
        wtr.write_record([
            p.patient_id.as_str(),
            &p.age.to_string(),
            &p.los_hours.to_string(),
            if p.died_in_service { "true" } else { "false" },
            &join_codes(&p.icd9_codes),
            &join_codes(&p.cpt_codes),
            p.insurance.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_mapping(path: impl AsRef<Path>) -> Result<CodeMapping> {
    let file = open(path.as_ref())?;
    read_mapping(file)
}

pub fn read_mapping(reader: impl io::Read) -> Result<CodeMapping> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() == 0 || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(CodeMapping::new());
    }
    let idx = column_indices(&headers, &["icd9", "phewas"])?;
    let mut mapping = CodeMapping::new();
    for record in rdr.records() {
        let record = record.map_err(csv_row_error)?;
        let line = record_line(&record);
        let icd9 = nonempty(record.get(idx[0]).unwrap_or(""), "icd9", line)?;
        let phewas = nonempty(record.get(idx[1]).unwrap_or(""), "phewas", line)?;
        mapping
            .insert(icd9, phewas)
            .map_err(|e| Error::row(line, e.to_string()))?;
    }
    Ok(mapping)
}

pub fn write_mapping(writer: impl io::Write, mapping: &CodeMapping) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["icd9", "phewas"])?;
    for (icd9, phewas) in mapping.iter() {
        wtr.write_record([icd9, phewas])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Retain adult (age ≥ `min_age`) patients and, when `exclude_deaths` is set,
/// only those who survived to discharge. Input order is preserved.
pub fn apply_cohort_filters(
    patients: &[PatientRecord],
    min_age: u32,
    exclude_deaths: bool,
) -> Vec<PatientRecord> {
    patients
        .iter()
        .filter(|p| p.age >= min_age && !(exclude_deaths && p.died_in_service))
        .cloned()
        .collect()
}

/// Translate a patient's ICD-9 codes to distinct PheWAS codes. Unmapped codes
/// are dropped; the second value is how many were dropped, for the per-run
/// warning tally.
pub fn map_phewas(record: &PatientRecord, mapping: &CodeMapping) -> (BTreeSet<String>, usize) {
    let mut phewas = BTreeSet::new();
    let mut unmapped = 0;
    for code in &record.icd9_codes {
        match mapping.get(code) {
            Some(target) => {
                phewas.insert(target.to_string());
            }
            None => unmapped += 1,
        }
    }
    (phewas, unmapped)
}

fn sorted_distinct<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = ids.collect();
    set.into_iter().map(str::to_string).collect()
}

fn index_of(ids: &[String]) -> std::collections::BTreeMap<&str, usize> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect()
}

/// Build the binary employee × patient matrix A.
pub fn build_binary_matrix(events: &[AccessEvent]) -> Result<BinaryUtilizationMatrix> {
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    let employees = sorted_distinct(events.iter().map(|e| e.employee_id.as_str()));
    let patients = sorted_distinct(events.iter().map(|e| e.patient_id.as_str()));
    let emp_idx = index_of(&employees);
    let pat_idx = index_of(&patients);

    let pairs: BTreeSet<(usize, usize)> = events
        .iter()
        .map(|e| {
            (
                emp_idx[e.employee_id.as_str()],
                pat_idx[e.patient_id.as_str()],
            )
        })
        .collect();
    let triplets: Vec<(usize, usize, f64)> = pairs.into_iter().map(|(i, j)| (i, j, 1.0)).collect();
    let cells = CsrMatrix::from_triplets(employees.len(), patients.len(), &triplets);
    Ok(BinaryUtilizationMatrix {
        employees,
        patients,
        cells,
    })
}

/// Aggregate the event log into the area × patient count matrix A'.
pub fn aggregate_by_area(events: &[AccessEvent]) -> Result<AreaUtilizationMatrix> {
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    let areas = sorted_distinct(events.iter().map(|e| e.area_id.as_str()));
    let patients = sorted_distinct(events.iter().map(|e| e.patient_id.as_str()));
    let area_idx = index_of(&areas);
    let pat_idx = index_of(&patients);

    let triplets: Vec<(usize, usize, f64)> = events
        .iter()
        .map(|e| {
            (
                area_idx[e.area_id.as_str()],
                pat_idx[e.patient_id.as_str()],
                1.0,
            )
        })
        .collect();
    let counts = CsrMatrix::from_triplets(areas.len(), patients.len(), &triplets);
    Ok(AreaUtilizationMatrix {
        areas,
        patients,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn event(emp: &str, area: &str, pat: &str) -> AccessEvent {
        AccessEvent {
            employee_id: emp.to_string(),
            area_id: area.to_string(),
            patient_id: pat.to_string(),
            action_type: "note".to_string(),
            timestamp: Utc.with_ymd_and_hms(2014, 3, 1, 8, 0, 0).unwrap(),
        }
    }

    fn patient(id: &str, age: u32, died: bool) -> PatientRecord {
        PatientRecord {
            patient_id: id.to_string(),
            age,
            los_hours: 100.0,
            died_in_service: died,
            icd9_codes: BTreeSet::new(),
            cpt_codes: BTreeSet::new(),
            insurance: "I1".to_string(),
        }
    }

    #[test]
    fn parses_well_formed_rows() {
        let csv = "employee_id,area_id,patient_id,action_type,timestamp\n\
                   e1,a1,p1,note,2014-03-01T08:00:00Z\n\
                   e2,a1,p1,order,2014-03-01T09:30:00Z\n\
                   e1,a2,p2,note,2014-03-02T10:00:00Z\n";
        let events = read_events(csv.as_bytes()).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[0].employee_id, "e1");
        assert_eq!(events[1].timestamp, ts("2014-03-01T09:30:00Z"));
    }

    #[test]
    fn empty_patient_id_is_a_row_error_with_line() {
        let csv = "employee_id,area_id,patient_id,action_type,timestamp\n\
                   e1,a1,p1,note,2014-03-01T08:00:00Z\n\
                   e2,a1,,order,2014-03-01T09:30:00Z\n";
        match read_events(csv.as_bytes()) {
            Err(Error::Row { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("patient_id"), "message: {message}");
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_timestamp_names_the_line() {
        let csv = "employee_id,area_id,patient_id,action_type,timestamp\n\
                   e1,a1,p1,note,yesterday\n";
        match read_events(csv.as_bytes()) {
            Err(Error::Row { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let csv = "employee_id,area_id,patient_id,timestamp\ne1,a1,p1,2014-03-01T08:00:00Z\n";
        match read_events(csv.as_bytes()) {
            Err(Error::MissingColumn(col)) => assert_eq!(col, "action_type"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_empty_list() {
        assert!(read_events(&b""[..]).unwrap().is_empty());
        let header_only = "employee_id,area_id,patient_id,action_type,timestamp\n";
        assert!(read_events(header_only.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn cohort_filter_applies_age_boundary_and_deaths() {
        let patients = vec![
            patient("p1", 17, false),
            patient("p2", 18, false),
            patient("p3", 47, true),
        ];
        let kept = apply_cohort_filters(&patients, 18, true);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].patient_id, "p2");
    }

    #[test]
    fn cohort_filter_on_empty_input() {
        assert!(apply_cohort_filters(&[], 18, true).is_empty());
    }

    #[test]
    fn cohort_filter_can_keep_deaths() {
        let patients = vec![patient("p1", 30, true)];
        assert_eq!(apply_cohort_filters(&patients, 18, false).len(), 1);
        assert_eq!(apply_cohort_filters(&patients, 18, true).len(), 0);
    }

    #[test]
    fn phewas_many_to_one_collapses() {
        let mut mapping = CodeMapping::new();
        mapping.insert("401.1", "401").unwrap();
        mapping.insert("401.9", "401").unwrap();
        let mut p = patient("p1", 30, false);
        p.icd9_codes = ["401.1", "401.9"].iter().map(|s| s.to_string()).collect();
        let (codes, unmapped) = map_phewas(&p, &mapping);
        assert_eq!(codes.len(), 1);
        assert!(codes.contains("401"));
        assert_eq!(unmapped, 0);
    }

    #[test]
    fn phewas_empty_input_and_unmapped_tally() {
        let mapping = CodeMapping::new();
        let p = patient("p1", 30, false);
        let (codes, unmapped) = map_phewas(&p, &mapping);
        assert!(codes.is_empty());
        assert_eq!(unmapped, 0);

        let mut q = patient("p2", 30, false);
        q.icd9_codes = ["800.1"].iter().map(|s| s.to_string()).collect();
        let (codes, unmapped) = map_phewas(&q, &mapping);
        assert!(codes.is_empty());
        assert_eq!(unmapped, 1);
    }

    #[test]
    fn binary_matrix_single_event() {
        let m = build_binary_matrix(&[event("e1", "a1", "p1")]).unwrap();
        assert_eq!(m.employees, vec!["e1"]);
        assert_eq!(m.patients, vec!["p1"]);
        assert_eq!(m.cells.get(0, 0), 1.0);
    }

    #[test]
    fn binary_matrix_is_binary() {
        let m =
            build_binary_matrix(&[event("e1", "a1", "p1"), event("e1", "a1", "p1")]).unwrap();
        assert_eq!(m.cells.get(0, 0), 1.0);
        assert_eq!(m.cells.nnz(), 1);
    }

    #[test]
    fn empty_events_error() {
        assert!(matches!(build_binary_matrix(&[]), Err(Error::NoEvents)));
        assert!(matches!(aggregate_by_area(&[]), Err(Error::NoEvents)));
    }

    #[test]
    fn aggregate_counts_repeat_actions() {
        let events = vec![
            event("e1", "a1", "p1"),
            event("e2", "a1", "p1"),
            event("e3", "a1", "p1"),
        ];
        let m = aggregate_by_area(&events).unwrap();
        assert_eq!(m.counts.get(0, 0), 3.0);
        assert_eq!(m.total_actions(), 3.0);
    }

    #[test]
    fn aggregate_conserves_column_sums() {
        let events = vec![
            event("e1", "a1", "p1"),
            event("e2", "a2", "p1"),
            event("e3", "a2", "p1"),
        ];
        let m = aggregate_by_area(&events).unwrap();
        assert_eq!(m.counts.col_sums(), vec![3.0]);
        assert_eq!(m.total_actions(), 3.0);
    }

    #[test]
    fn patients_round_trip_through_csv() {
        let mut p = patient("p1", 20, false);
        p.icd9_codes = ["401.1", "250.0"].iter().map(|s| s.to_string()).collect();
        p.los_hours = 158.5;
        let patients = vec![p, patient("p2", 90, true)];
        let mut buf = Vec::new();
        write_patients(&mut buf, &patients).unwrap();
        let back = read_patients(buf.as_slice()).unwrap();
        assert_eq!(back, patients);
    }

    #[test]
    fn mapping_duplicate_key_errors() {
        let csv = "icd9,phewas\n401.1,401\n401.1,402\n";
        assert!(read_mapping(csv.as_bytes()).is_err());
    }
}
