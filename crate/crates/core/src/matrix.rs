use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{EmgError, Result};
use crate::scalar::Scalar;

pub const LABEL_COLUMN: &str = "label";
/// Optional trailing column carrying the subject id of each row.
pub const SUBJECT_COLUMN: &str = "subject";

/// Row-major labeled feature table handed to selection and the classifiers.
///
/// Labels are plain class codes: gesture codes for EMG data, `1..=C` for
/// synthetic fixtures. `groups`, when present, carries the subject id of each
/// row for subject-wise splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<F> {
    names: Vec<String>,
    data: Vec<F>,
    labels: Vec<usize>,
    groups: Option<Vec<u32>>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn from_rows(names: Vec<String>, rows: Vec<Vec<F>>, labels: Vec<usize>) -> Result<Self> {
        let width = names.len();
        if rows.len() != labels.len() {
            return Err(EmgError::InvalidMatrix(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != width {
                return Err(EmgError::InvalidMatrix(format!(
                    "row {i} has {} values, schema has {width}",
                    r.len()
                )));
            }
            data.extend(r);
        }
        Self::from_flat(names, data, labels)
    }

    pub fn from_flat(names: Vec<String>, data: Vec<F>, labels: Vec<usize>) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(EmgError::InvalidMatrix(format!("duplicate column {n:?}")));
            }
            if n == LABEL_COLUMN || n == SUBJECT_COLUMN {
                return Err(EmgError::InvalidMatrix(format!("reserved column name {n:?}")));
            }
        }
        if data.len() != names.len() * labels.len() {
            return Err(EmgError::InvalidMatrix("data is not rectangular".into()));
        }
        Ok(FeatureMatrix {
            names,
            data,
            labels,
            groups: None,
        })
    }

    pub fn with_groups(mut self, groups: Vec<u32>) -> Result<Self> {
        if groups.len() != self.n_rows() {
            return Err(EmgError::InvalidMatrix("group vector length mismatch".into()));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> Option<&[u32]> {
        self.groups.as_deref()
    }

    pub fn row(&self, i: usize) -> &[F] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> F {
        self.data[row * self.n_cols() + col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Ensures the matrix can be handed to a training routine.
    pub fn check_trainable(&self) -> Result<()> {
        if self.n_cols() == 0 {
            return Err(EmgError::DegenerateData("no feature columns".into()));
        }
        if self.classes().len() < 2 {
            return Err(EmgError::DegenerateData(format!(
                "need at least 2 classes, found {}",
                self.classes().len()
            )));
        }
        Ok(())
    }

    pub fn take_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            names: self.names.clone(),
            data,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: self.groups.as_ref().map(|g| idx.iter().map(|&i| g[i]).collect()),
        }
    }

    pub fn take_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(cols.len() * self.n_rows());
        for r in self.rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        FeatureMatrix {
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            data,
            labels: self.labels.clone(),
            groups: self.groups.clone(),
        }
    }

    /// Multiplies every value by `s`.
    pub fn scaled(&self, s: F) -> Self {
        FeatureMatrix {
            data: self.data.iter().map(|&v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Writes CSV: header = feature names + `label` (+ `subject` when groups
    /// are set), one row per sample. Values use the shortest round-trip
    /// decimal form with `.` as separator.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        if self.groups.is_some() {
            header.push(SUBJECT_COLUMN);
        }
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_cols() + 2);
        for (i, r) in self.rows().enumerate() {
            record.clear();
            record.extend(r.iter().map(|v| v.to_string()));
            record.push(self.labels[i].to_string());
            if let Some(g) = &self.groups {
                record.push(g[i].to_string());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the [`write_csv`](Self::write_csv) format. Lines starting with
    /// `#` are comments.
    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(r);
        let header = rdr.headers()?.clone();
        let label_col = header
            .iter()
            .position(|h| h == LABEL_COLUMN)
            .ok_or_else(|| EmgError::InvalidMatrix("missing label column".into()))?;
        let subject_col = header.iter().position(|h| h == SUBJECT_COLUMN);
        let names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_col && Some(*i) != subject_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (i, field) in rec.iter().enumerate() {
                let bad = || EmgError::MalformedLine {
                    line_no: row + 2,
                    reason: format!("bad value {field:?}"),
                };
                if i == label_col {
                    labels.push(field.trim().parse::<usize>().map_err(|_| bad())?);
                } else if Some(i) == subject_col {
                    groups.push(field.trim().parse::<u32>().map_err(|_| bad())?);
                } else {
                    let v: f64 = field.trim().parse().map_err(|_| bad())?;
                    data.push(F::from_f64_lossy(v));
                }
            }
        }
        let m = Self::from_flat(names, data, labels)?;
        if subject_col.is_some() {
            m.with_groups(groups)
        } else {
            Ok(m)
        }
    }
}
