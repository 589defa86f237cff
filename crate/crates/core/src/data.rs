//! Training data as a checkable artifact: the dataset model, its CSV form,
//! unsafe-pattern rules, validation and sanitization.
//!
//! A pattern is a conjunction of closed threshold atoms over feature and
//! label columns. A record is flagged by a pattern iff every atom holds.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        label_names: Vec<String>,
        records: Vec<Record>,
    ) -> Result<Self> {
        let ds = Dataset {
            feature_names,
            label_names,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let (nf, nl) = (self.feature_names.len(), self.label_names.len());
        for (i, r) in self.records.iter().enumerate() {
            if r.features.len() != nf {
                return Err(Error::dims(format!("record {i} features"), nf, r.features.len()));
            }
            if r.labels.len() != nl {
                return Err(Error::dims(format!("record {i} labels"), nl, r.labels.len()));
            }
            if r.features.iter().chain(&r.labels).any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("records[{i}]"), "non-finite value"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.label_names.iter().position(|n| n == name)
    }

    /// Reads the CSV form: header `f:<name>,...,l:<name>,...`, one record per line.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut feature_names = Vec::new();
        let mut label_names = Vec::new();
        for (i, h) in headers.iter().enumerate() {
            if let Some(name) = h.strip_prefix("f:") {
                if !label_names.is_empty() {
                    return Err(Error::validation(
                        format!("header[{i}]"),
                        "feature columns must precede label columns",
                    ));
                }
                feature_names.push(name.to_string());
            } else if let Some(name) = h.strip_prefix("l:") {
                label_names.push(name.to_string());
            } else {
                return Err(Error::validation(
                    format!("header[{i}]"),
                    format!("column {h:?} lacks an f: or l: prefix"),
                ));
            }
        }
        let nf = feature_names.len();
        let mut records = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let values = row
                .iter()
                .enumerate()
                .map(|(col, v)| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("record {line}, column {col}: bad number {v:?}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != headers.len() {
                return Err(Error::dims(format!("record {line}"), headers.len(), values.len()));
            }
            records.push(Record {
                features: values[..nf].to_vec(),
                labels: values[nf..].to_vec(),
            });
        }
        Dataset::new(feature_names, label_names, records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = self
            .feature_names
            .iter()
            .map(|n| format!("f:{n}"))
            .chain(self.label_names.iter().map(|n| format!("l:{n}")))
            .collect();
        w.write_record(&header)?;
        for r in &self.records {
            // `Display` for f64 is the shortest string that round-trips
            w.write_record(r.features.iter().chain(&r.labels).map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Feature,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conjunct {
    pub target: Target,
    pub index: usize,
    pub relation: Comparison,
    pub bound: f64,
}

impl Conjunct {
    pub fn holds(&self, r: &Record) -> bool {
        let v = match self.target {
            Target::Feature => r.features[self.index],
            Target::Label => r.labels[self.index],
        };
        match self.relation {
            Comparison::Le => v <= self.bound,
            Comparison::Ge => v >= self.bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsafePattern {
    pub name: String,
    pub conjuncts: Vec<Conjunct>,
}

impl UnsafePattern {
    pub fn matches(&self, r: &Record) -> bool {
        self.conjuncts.iter().all(|c| c.holds(r))
    }

    fn validate_for(&self, ds: &Dataset) -> Result<()> {
        if self.conjuncts.is_empty() {
            return Err(Error::validation(
                format!("pattern {:?}", self.name),
                "needs at least one conjunct",
            ));
        }
        for (i, c) in self.conjuncts.iter().enumerate() {
            let width = match c.target {
                Target::Feature => ds.feature_names.len(),
                Target::Label => ds.label_names.len(),
            };
            if c.index >= width {
                return Err(Error::validation(
                    format!("pattern {:?}.conjuncts[{i}].index", self.name),
                    format!("{} out of range for {} {:?} columns", c.index, width, c.target),
                ));
            }
            if !c.bound.is_finite() {
                return Err(Error::validation(
                    format!("pattern {:?}.conjuncts[{i}].bound", self.name),
                    "non-finite",
                ));
            }
        }
        Ok(())
    }
}

pub fn parse_patterns(text: &str) -> Result<Vec<UnsafePattern>> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternHits {
    pub count: usize,
    pub indices: Vec<usize>,
}

/// Pattern name → flagged record indices (ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub patterns: BTreeMap<String, PatternHits>,
}

impl ValidationReport {
    pub fn total_hits(&self) -> usize {
        self.patterns.values().map(|h| h.count).sum()
    }

    /// Indices flagged by at least one pattern, ascending.
    pub fn flagged(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .patterns
            .values()
            .flat_map(|h| h.indices.iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn is_clean(&self) -> bool {
        self.total_hits() == 0
    }
}

fn check_schema(ds: &Dataset, patterns: &[UnsafePattern]) -> Result<()> {
    ds.validate()?;
    let mut seen = std::collections::BTreeSet::new();
    for p in patterns {
        if !seen.insert(p.name.as_str()) {
            return Err(Error::validation(
                format!("pattern {:?}", p.name),
                "duplicate pattern name",
            ));
        }
        p.validate_for(ds)?;
    }
    Ok(())
}

pub fn validate_dataset(ds: &Dataset, patterns: &[UnsafePattern]) -> Result<ValidationReport> {
    check_schema(ds, patterns)?;
    let patterns = patterns
        .iter()
        .map(|p| {
            let indices: Vec<usize> = ds
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| p.matches(r))
                .map(|(i, _)| i)
                .collect();
            (
                p.name.clone(),
                PatternHits {
                    count: indices.len(),
                    indices,
                },
            )
        })
        .collect();
    Ok(ValidationReport { patterns })
}

/// Copy of `ds` without any record flagged by some pattern; order preserved.
pub fn sanitize(ds: &Dataset, patterns: &[UnsafePattern]) -> Result<Dataset> {
    check_schema(ds, patterns)?;
    let records = ds
        .records
        .iter()
        .filter(|r| !patterns.iter().any(|p| p.matches(r)))
        .cloned()
        .collect();
    Ok(Dataset {
        feature_names: ds.feature_names.clone(),
        label_names: ds.label_names.clone(),
        records,
    })
}
