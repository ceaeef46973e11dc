//! Two-group competing-risks data in CSV form.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use cifeq_core::survival::{Sample, Status, Subject, TiePolicy};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Names of the input columns. Without an entry column all entry times are 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnMapping {
    pub entry: String,
    /// Fail instead of defaulting to 0 when the entry column is absent.
    pub require_entry: bool,
    pub time: String,
    pub status: String,
    pub group: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            entry: "entry".into(),
            require_entry: false,
            time: "time".into(),
            status: "status".into(),
            group: "group".into(),
        }
    }
}

/// Keep only rows whose `column` equals `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Filter {
    pub column: String,
    pub value: String,
}

impl std::str::FromStr for Filter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (column, value) = s
            .split_once('=')
            .ok_or_else(|| format!("filter `{s}` must look like COLUMN=VALUE"))?;
        Ok(Self {
            column: column.trim().into(),
            value: value.trim().into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub entry: f64,
    pub time: f64,
    pub status: Status,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub mapping: ColumnMapping,
    /// The two group labels, in comparison order.
    pub groups: [String; 2],
}

impl Dataset {
    /// Builds a dataset from records holding exactly two groups, ordered
    /// by label unless `order` is given.
    pub fn new(
        records: Vec<Record>,
        mapping: ColumnMapping,
        order: Option<[String; 2]>,
    ) -> Result<Self> {
        let labels: BTreeSet<&str> = records.iter().map(|r| r.group.as_str()).collect();
        let labels: Vec<String> = labels.into_iter().map(String::from).collect();
        if labels.len() > 2 {
            return Err(CliError::MoreThanTwoGroups(labels));
        }
        if labels.len() < 2 {
            return Err(CliError::TooFewGroups(labels));
        }
        let groups = match order {
            Some(order) => {
                for g in &order {
                    if !labels.contains(g) {
                        return Err(CliError::UnknownGroup(g.clone()));
                    }
                }
                if order[0] == order[1] {
                    return Err(CliError::UnknownGroup(order[1].clone()));
                }
                order
            }
            None => [labels[0].clone(), labels[1].clone()],
        };
        Ok(Self {
            records,
            mapping,
            groups,
        })
    }

    pub fn group_sizes(&self) -> [usize; 2] {
        self.groups
            .clone()
            .map(|g| self.records.iter().filter(|r| r.group == g).count())
    }

    pub fn samples(&self, policy: TiePolicy) -> Result<[Sample; 2]> {
        let make = |label: &str| -> Result<Sample> {
            let subjects = self
                .records
                .iter()
                .filter(|r| r.group == label)
                .map(|r| Subject::new(r.entry, r.time, r.status))
                .collect();
            Ok(Sample::new(label, subjects, policy)?)
        };
        Ok([make(&self.groups[0])?, make(&self.groups[1])?])
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn parse_err(line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_dataset(
    path: &Path,
    mapping: &ColumnMapping,
    filter: Option<&Filter>,
    order: Option<[String; 2]>,
) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_path_buf()),
        _ => CliError::Io(e),
    })?;
    read_dataset_from(file, mapping, filter, order)
}

/// Line numbers in errors count the header as line 1.
pub fn read_dataset_from<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    filter: Option<&Filter>,
    order: Option<[String; 2]>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let need = |name: &str| column(&headers, name).ok_or_else(|| CliError::UnknownColumn(name.into()));
    let time_col = need(&mapping.time)?;
    let status_col = need(&mapping.status)?;
    let group_col = need(&mapping.group)?;
    let entry_col = match column(&headers, &mapping.entry) {
        Some(i) => Some(i),
        None if mapping.require_entry => return Err(CliError::UnknownColumn(mapping.entry.clone())),
        None => None,
    };
    let filter_col = filter.map(|f| need(&f.column)).transpose()?;

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        if let (Some(f), Some(i)) = (filter, filter_col) {
            if field(i) != f.value {
                continue;
            }
        }
        let number = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = field(i)
                .parse()
                .map_err(|_| parse_err(line, format!("{name} `{}` is not a number", field(i))))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(parse_err(line, format!("{name} must be finite and non-negative")));
            }
            Ok(v)
        };
        let time = number(time_col, "time")?;
        let entry = match entry_col {
            Some(i) => number(i, "entry")?,
            None => 0.0,
        };
        if time <= entry {
            return Err(parse_err(line, "time must exceed entry"));
        }
        let status = field(status_col)
            .parse::<u8>()
            .ok()
            .and_then(Status::from_code)
            .ok_or_else(|| parse_err(line, format!("status `{}` is not 0, 1 or 2", field(status_col))))?;
        let group = field(group_col).to_string();
        if group.is_empty() {
            return Err(parse_err(line, "empty group label"));
        }
        records.push(Record {
            entry,
            time,
            status,
            group,
        });
    }
    Dataset::new(records, mapping.clone(), order)
}

/// Writes the mapped columns; floats use shortest round-trip formatting.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let m = &dataset.mapping;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([&m.entry, &m.time, &m.status, &m.group])?;
    for r in &dataset.records {
        w.write_record([
            r.entry.to_string(),
            r.time.to_string(),
            r.status.code().to_string(),
            r.group.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
