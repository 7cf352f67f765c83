//! Parsing of the UCI "EMG data for gestures" text recordings.
//!
//! Each data line holds ten tab-separated fields: the timestamp in
//! milliseconds, eight MYO channel amplitudes and the gesture class. A single
//! header line (`time channel1 ... class`) is tolerated at the top of a file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{EmgError, Result};

pub const N_CHANNELS: usize = 8;
const N_FIELDS: usize = N_CHANNELS + 2;

pub const DATASET_CITATION: &str = "Lobov S., Krilova N., Kastalskiy I., Kazantsev V., Makarov V.A. \
     EMG data for gestures [Dataset]. UCI Machine Learning Repository (2018). \
     https://doi.org/10.24432/C5ZP5C";

/// Hand gesture classes of the MYO recordings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum GestureLabel {
    Rest = 0,
    WristExtension = 1,
    GraspedHand = 2,
    RestingHand = 3,
    WristFlexion = 4,
    RadialDeviation = 5,
    UlnarDeviation = 6,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 7] = [
        GestureLabel::Rest,
        GestureLabel::WristExtension,
        GestureLabel::GraspedHand,
        GestureLabel::RestingHand,
        GestureLabel::WristFlexion,
        GestureLabel::RadialDeviation,
        GestureLabel::UlnarDeviation,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Result<Self> {
        usize::try_from(code)
            .ok()
            .and_then(|c| Self::ALL.get(c).copied())
            .ok_or(EmgError::UnknownLabel(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureLabel::Rest => "Intervals between gestures",
            GestureLabel::WristExtension => "Wrist extension",
            GestureLabel::GraspedHand => "Grasped hand",
            GestureLabel::RestingHand => "Resting hand",
            GestureLabel::WristFlexion => "Wrist flexion",
            GestureLabel::RadialDeviation => "Radial deviation",
            GestureLabel::UlnarDeviation => "Ulnar deviation",
        }
    }

    pub fn is_rest(self) -> bool {
        self == GestureLabel::Rest
    }
}

impl TryFrom<u8> for GestureLabel {
    type Error = EmgError;

    fn try_from(code: u8) -> Result<Self> {
        Self::from_code(code as i64)
    }
}

impl From<GestureLabel> for u8 {
    fn from(l: GestureLabel) -> u8 {
        l.code()
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Display name for an arbitrary class code: the gesture name when the code
/// is a gesture, `class N` otherwise.
pub fn class_name(code: usize) -> String {
    match GestureLabel::from_code(code as i64) {
        Ok(l) => l.name().to_string(),
        Err(_) => format!("class {code}"),
    }
}

/// One subject/trial recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: u32,
    pub trial_id: u32,
    pub time_ms: Vec<f64>,
    pub channels: [Vec<f64>; N_CHANNELS],
    pub labels: Vec<GestureLabel>,
}

impl Recording {
    pub fn new(
        subject_id: u32,
        trial_id: u32,
        time_ms: Vec<f64>,
        channels: [Vec<f64>; N_CHANNELS],
        labels: Vec<GestureLabel>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(EmgError::EmptyFile);
        }
        if time_ms.len() != n || channels.iter().any(|c| c.len() != n) {
            return Err(EmgError::InvalidRecording(
                "channel, time and label series differ in length".into(),
            ));
        }
        if subject_id == 0 || trial_id == 0 {
            return Err(EmgError::InvalidRecording(
                "subject and trial ids start at 1".into(),
            ));
        }
        Ok(Recording {
            subject_id,
            trial_id,
            time_ms,
            channels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Writes the recording in the UCI text layout, header included.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "time")?;
        for c in 1..=N_CHANNELS {
            write!(w, "\tchannel{c}")?;
        }
        writeln!(w, "\tclass")?;
        for i in 0..self.len() {
            write!(w, "{}", self.time_ms[i])?;
            for ch in &self.channels {
                write!(w, "\t{}", ch[i])?;
            }
            writeln!(w, "\t{}", self.labels[i].code())?;
        }
        Ok(())
    }
}

fn parse_field(field: &str, line_no: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| EmgError::MalformedLine {
        line_no,
        reason: format!("non-numeric field {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(EmgError::MalformedLine {
            line_no,
            reason: format!("non-finite field {field:?}"),
        });
    }
    Ok(v)
}

fn is_header(line: &str) -> bool {
    line.split('\t')
        .next()
        .map(|f| f.trim().parse::<f64>().is_err())
        .unwrap_or(false)
}

/// How class codes outside 0..=6 are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    /// Reject the file with [`EmgError::UnknownLabel`].
    #[default]
    Strict,
    /// Relabel such samples as 0 so segmentation discards them. Some archive
    /// mirrors carry an extra class 7 recorded for a subset of subjects.
    UnmarkUnknown,
}

/// Parses recording text. `line_no` in errors is 1-based.
pub fn parse_recording_str(text: &str, subject_id: u32, trial_id: u32) -> Result<Recording> {
    parse_recording_str_with(text, subject_id, trial_id, LabelPolicy::Strict)
}

pub fn parse_recording_str_with(
    text: &str,
    subject_id: u32,
    trial_id: u32,
    policy: LabelPolicy,
) -> Result<Recording> {
    let mut time_ms = Vec::new();
    let mut channels: [Vec<f64>; N_CHANNELS] = Default::default();
    let mut labels = Vec::new();
    let header_idx = first_nonblank(text);

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if idx == header_idx && is_header(line) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != N_FIELDS {
            return Err(EmgError::MalformedLine {
                line_no,
                reason: format!("expected {N_FIELDS} fields, found {}", fields.len()),
            });
        }
        let t = parse_field(fields[0], line_no)?;
        let mut values = [0.0; N_CHANNELS];
        for (c, v) in values.iter_mut().enumerate() {
            *v = parse_field(fields[c + 1], line_no)?;
        }
        let class = parse_field(fields[N_FIELDS - 1], line_no)?;
        if class.fract() != 0.0 {
            return Err(EmgError::MalformedLine {
                line_no,
                reason: format!("class {class} is not an integer"),
            });
        }
        let label = match (GestureLabel::from_code(class as i64), policy) {
            (Ok(l), _) => l,
            (Err(_), LabelPolicy::UnmarkUnknown) => GestureLabel::Rest,
            (Err(e), LabelPolicy::Strict) => return Err(e),
        };

        if let Some(&prev) = time_ms.last() {
            if t < prev {
                log::warn!("line {line_no}: timestamp {t} precedes {prev}");
            }
        }
        time_ms.push(t);
        for (c, v) in values.into_iter().enumerate() {
            channels[c].push(v);
        }
        labels.push(label);
    }

    if labels.is_empty() {
        return Err(EmgError::EmptyFile);
    }
    Recording::new(subject_id, trial_id, time_ms, channels, labels)
}

fn first_nonblank(text: &str) -> usize {
    text.lines()
        .position(|l| !l.trim().is_empty())
        .unwrap_or(0)
}

fn digit_groups(s: &str) -> Vec<u32> {
    s.split(|c: char| !c.is_ascii_digit())
        .filter(|g| !g.is_empty())
        .filter_map(|g| g.parse().ok())
        .collect()
}

/// Infers (subject, trial) from a recording path.
///
/// `<subject digits>/<trial digits>_...` is the UCI archive layout. For flat
/// layouts the first two digit groups of the file name are used.
pub fn infer_ids(path: &Path) -> Option<(u32, u32)> {
    let stem = path.file_stem()?.to_str()?;
    let file_digits = digit_groups(stem);
    let parent = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .unwrap_or("");
    let parent_digits = digit_groups(parent);
    if parent_digits.len() == 1 && !parent.is_empty() && !file_digits.is_empty() {
        return Some((parent_digits[0], file_digits[0]));
    }
    match file_digits.as_slice() {
        [s, t, ..] => Some((*s, *t)),
        [s] => Some((*s, 1)),
        [] => None,
    }
}

/// Parses one recording file; ids come from [`infer_ids`] (falling back to 1/1).
pub fn parse_recording(path: &Path) -> Result<Recording> {
    parse_recording_with(path, LabelPolicy::Strict)
}

pub fn parse_recording_with(path: &Path, policy: LabelPolicy) -> Result<Recording> {
    let text = fs::read_to_string(path).map_err(|e| EmgError::from(e).in_file(path))?;
    let (subject, trial) = infer_ids(path).unwrap_or((1, 1));
    let subject = subject.max(1);
    let trial = trial.max(1);
    parse_recording_str_with(&text, subject, trial, policy).map_err(|e| e.in_file(path))
}

fn collect_files(root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(root)
        .map_err(|e| EmgError::from(e).in_file(root))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| EmgError::from(e).in_file(root))?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.extension().and_then(|e| e.to_str()) == Some("txt") {
            out.push(path);
        }
    }
    Ok(())
}

/// Lists recording files (`*.txt`) below `root` in sorted path order.
pub fn recording_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    // Archive readme and similar text files carry no tab-separated data.
    files.retain(|p| {
        !p.file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.to_ascii_lowercase().starts_with("readme"))
            .unwrap_or(false)
    });
    Ok(files)
}

/// Loads every recording under `root`, sorted by (subject, trial).
pub fn load_dataset(root: &Path) -> Result<Vec<Recording>> {
    load_dataset_with(root, LabelPolicy::Strict)
}

pub fn load_dataset_with(root: &Path, policy: LabelPolicy) -> Result<Vec<Recording>> {
    let files = recording_files(root)?;
    if files.is_empty() {
        return Err(EmgError::NoRecordingsFound(root.to_path_buf()));
    }
    let mut recs = files
        .par_iter()
        .map(|p| parse_recording_with(p, policy))
        .collect::<Result<Vec<_>>>()?;
    recs.sort_by_key(|r| (r.subject_id, r.trial_id));
    log::info!("loaded {} recordings from {}", recs.len(), root.display());
    Ok(recs)
}

/// SHA-256 over the sorted relative paths and contents of the recording files.
pub fn dataset_digest(root: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for p in recording_files(root)? {
        let rel = p.strip_prefix(root).unwrap_or(&p);
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0u8]);
        hasher.update(fs::read(&p).map_err(|e| EmgError::from(e).in_file(&p))?);
    }
    Ok(hex_string(&hasher.finalize()))
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub recordings: usize,
    pub subjects: usize,
    pub samples_per_label: BTreeMap<String, usize>,
}

pub fn summarize(recs: &[Recording]) -> DatasetSummary {
    let mut subjects: Vec<u32> = recs.iter().map(|r| r.subject_id).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let mut samples_per_label = BTreeMap::new();
    for r in recs {
        for l in &r.labels {
            *samples_per_label.entry(l.code().to_string()).or_insert(0) += 1;
        }
    }
    DatasetSummary {
        recordings: recs.len(),
        subjects: subjects.len(),
        samples_per_label,
    }
}
