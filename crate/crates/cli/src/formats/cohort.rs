//! Cohort manifest: a JSON array of case entries.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use survmil_core::survival::{validate_cohort, SurvivalRecord};
use survmil_core::synth::Split;

use crate::error::{CliError, Result};

/// One case row of the cohort manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortEntry {
    pub case_id: String,
    pub time_months: u32,
    pub event: bool,
    /// Named numeric covariates (categorical variables appear as coded
    /// numbers and are expanded downstream).
    pub covariates: BTreeMap<String, f64>,
    /// train | tune | val1 | val2
    pub split: String,
}

/// Parsed cohort with core-typed records and splits, in file order.
#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub entries: Vec<CohortEntry>,
    pub records: Vec<SurvivalRecord>,
    pub splits: Vec<Split>,
}

impl LoadedCohort {
    pub fn n_cases(&self) -> usize {
        self.entries.len()
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.n_cases())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    /// Covariate names present on every case, sorted.
    pub fn covariate_names(&self) -> Vec<String> {
        let mut names: Vec<String> = match self.entries.first() {
            Some(e) => e.covariates.keys().cloned().collect(),
            None => return Vec::new(),
        };
        names.retain(|n| self.entries.iter().all(|e| e.covariates.contains_key(n)));
        names.sort();
        names
    }

    pub fn covariate_column(&self, name: &str, indices: &[usize]) -> Result<Vec<f64>> {
        indices
            .iter()
            .map(|&i| {
                self.entries[i].covariates.get(name).copied().ok_or_else(|| {
                    CliError::Invalid(format!(
                        "case {} lacks covariate {name}",
                        self.entries[i].case_id
                    ))
                })
            })
            .collect()
    }
}

/// Write the cohort manifest as pretty JSON (stable key order).
pub fn write_cohort(path: &Path, entries: &[CohortEntry]) -> Result<()> {
    let json = serde_json::to_string_pretty(entries).map_err(CliError::json(path))?;
    fs::write(path, json + "\n").map_err(CliError::io(path))
}

/// Read and validate a cohort manifest.
pub fn read_cohort(path: &Path) -> Result<LoadedCohort> {
    let raw = fs::read_to_string(path).map_err(CliError::io(path))?;
    let entries: Vec<CohortEntry> = serde_json::from_str(&raw).map_err(CliError::json(path))?;
    let mut records = Vec::with_capacity(entries.len());
    let mut splits = Vec::with_capacity(entries.len());
    for e in &entries {
        records.push(SurvivalRecord::new(e.case_id.clone(), e.time_months, e.event)?);
        splits.push(Split::parse(&e.split)?);
    }
    validate_cohort(&records)?;
    Ok(LoadedCohort {
        entries,
        records,
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.json");
        let entries = vec![
            CohortEntry {
                case_id: "a".into(),
                time_months: 12,
                event: true,
                covariates: BTreeMap::from([("age".into(), 64.5), ("t4".into(), 1.0)]),
                split: "train".into(),
            },
            CohortEntry {
                case_id: "b".into(),
                time_months: 80,
                event: false,
                covariates: BTreeMap::from([("age".into(), 55.0), ("t4".into(), 0.0)]),
                split: "val1".into(),
            },
        ];
        write_cohort(&path, &entries).unwrap();
        let loaded = read_cohort(&path).unwrap();
        assert_eq!(loaded.entries, entries);
        assert_eq!(loaded.records[0].time_months, 12);
        assert_eq!(loaded.indices_of(Split::Val1), vec![1]);
        assert_eq!(loaded.covariate_names(), vec!["age", "t4"]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.json");
        let e = CohortEntry {
            case_id: "a".into(),
            time_months: 1,
            event: true,
            covariates: BTreeMap::new(),
            split: "train".into(),
        };
        write_cohort(&path, &[e.clone(), e]).unwrap();
        assert!(read_cohort(&path).is_err());
    }
}
