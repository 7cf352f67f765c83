//! Rest-interval removal, run-length segmentation and fixed-length windowing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{GestureLabel, Recording, N_CHANNELS};
use crate::error::{EmgError, Result};

pub const DEFAULT_WINDOW_LEN: usize = 200;
pub const DEFAULT_STRIDE: usize = 100;

/// A maximal run of one non-rest label inside a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureSegment {
    pub subject_id: u32,
    pub trial_id: u32,
    pub label: GestureLabel,
    pub channels: [Vec<f64>; N_CHANNELS],
    pub start_index: usize,
}

impl GestureSegment {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fixed-length, single-gesture slice of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subject_id: u32,
    pub trial_id: u32,
    pub label: GestureLabel,
    pub channels: [Vec<f64>; N_CHANNELS],
    /// Offset of the first sample within its segment.
    pub offset: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `(start, len, label)` runs of identical labels, rest runs included.
pub(crate) fn label_runs(labels: &[GestureLabel]) -> Vec<(usize, usize, GestureLabel)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            runs.push((start, i - start, labels[start]));
            start = i;
        }
    }
    runs
}

pub fn segment_by_label(rec: &Recording) -> Vec<GestureSegment> {
    label_runs(&rec.labels)
        .into_iter()
        .filter(|(_, _, label)| !label.is_rest())
        .map(|(start, len, label)| GestureSegment {
            subject_id: rec.subject_id,
            trial_id: rec.trial_id,
            label,
            channels: std::array::from_fn(|c| rec.channels[c][start..start + len].to_vec()),
            start_index: start,
        })
        .collect()
}

/// Number of windows a segment of `len` samples yields.
pub fn window_count(len: usize, window_len: usize, stride: usize) -> usize {
    if len < window_len {
        0
    } else {
        (len - window_len) / stride + 1
    }
}

/// Cuts `seg` into windows. `window_len == 0` selects whole-segment mode: one
/// window spanning the segment (segments shorter than 2 samples are dropped).
pub fn window_segment(seg: &GestureSegment, window_len: usize, stride: usize) -> Result<Vec<Window>> {
    if window_len == 0 {
        if seg.len() < 2 {
            return Ok(Vec::new());
        }
        return Ok(vec![Window {
            subject_id: seg.subject_id,
            trial_id: seg.trial_id,
            label: seg.label,
            channels: seg.channels.clone(),
            offset: 0,
        }]);
    }
    if window_len < 2 || stride < 1 {
        return Err(EmgError::InvalidWindowing { window_len, stride });
    }
    let windows = (0..window_count(seg.len(), window_len, stride))
        .map(|i| {
            let offset = i * stride;
            Window {
                subject_id: seg.subject_id,
                trial_id: seg.trial_id,
                label: seg.label,
                channels: std::array::from_fn(|c| {
                    seg.channels[c][offset..offset + window_len].to_vec()
                }),
                offset,
            }
        })
        .collect();
    Ok(windows)
}

/// Segments and windows every recording, in recording then temporal order.
pub fn windows_from_recordings(
    recs: &[Recording],
    window_len: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for rec in recs {
        for seg in segment_by_label(rec) {
            out.extend(window_segment(&seg, window_len, stride)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSegmentStats {
    pub segments: usize,
    pub windows: usize,
    /// Segment-length histogram keyed by bucket lower bound (bucket width 500 samples).
    pub length_histogram: BTreeMap<usize, usize>,
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub window_len: usize,
    pub stride: usize,
    pub per_label: BTreeMap<String, LabelSegmentStats>,
}

pub const HISTOGRAM_BUCKET: usize = 500;

pub fn segment_stats(recs: &[Recording], window_len: usize, stride: usize) -> SegmentStats {
    let mut per_label: BTreeMap<String, LabelSegmentStats> = BTreeMap::new();
    for rec in recs {
        for seg in segment_by_label(rec) {
            let len = seg.len();
            let s = per_label.entry(seg.label.code().to_string()).or_default();
            if s.segments == 0 {
                s.min_len = len;
            }
            s.segments += 1;
            s.min_len = s.min_len.min(len);
            s.max_len = s.max_len.max(len);
            s.windows += match window_len {
                0 => usize::from(len >= 2),
                w => window_count(len, w, stride.max(1)),
            };
            *s.length_histogram
                .entry(len / HISTOGRAM_BUCKET * HISTOGRAM_BUCKET)
                .or_insert(0) += 1;
        }
    }
    SegmentStats {
        window_len,
        stride,
        per_label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn recording(labels: &[u8]) -> Recording {
        let n = labels.len();
        let labels: Vec<_> = labels
            .iter()
            .map(|&c| GestureLabel::from_code(c as i64).unwrap())
            .collect();
        let channels = std::array::from_fn(|c| (0..n).map(|i| (i * 10 + c) as f64).collect());
        Recording::new(1, 1, (0..n).map(|i| i as f64).collect(), channels, labels).unwrap()
    }

    fn segment(len: usize) -> GestureSegment {
        GestureSegment {
            subject_id: 1,
            trial_id: 1,
            label: GestureLabel::GraspedHand,
            channels: std::array::from_fn(|_| (0..len).map(|i| i as f64).collect()),
            start_index: 0,
        }
    }

    #[test]
    fn runs_of_nonzero_labels() {
        let segs = segment_by_label(&recording(&[0, 0, 1, 1, 1, 0, 2, 2]));
        let got: Vec<_> = segs
            .iter()
            .map(|s| (s.label.code(), s.len(), s.start_index))
            .collect();
        assert_eq!(got, vec![(1, 3, 2), (2, 2, 6)]);
        assert_eq!(segs[0].channels[3], vec![23.0, 33.0, 43.0]);
    }

    #[test]
    fn all_rest_gives_nothing() {
        assert!(segment_by_label(&recording(&[0, 0, 0])).is_empty());
    }

    #[test]
    fn split_runs_of_same_label() {
        let segs = segment_by_label(&recording(&[3, 3, 0, 3, 3]));
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.label.code() == 3 && s.len() == 2));
        assert_eq!(segs[1].start_index, 3);
    }

    #[test]
    fn window_offsets() {
        let w = window_segment(&segment(500), 200, 100).unwrap();
        assert_eq!(w.iter().map(|w| w.offset).collect::<Vec<_>>(), [0, 100, 200, 300]);
        assert!(w.iter().all(|w| w.len() == 200));
        assert_eq!(w[1].channels[0][0], 100.0);
        assert!(window_segment(&segment(150), 200, 100).unwrap().is_empty());
        assert_eq!(window_segment(&segment(200), 200, 1).unwrap().len(), 1);
    }

    #[test]
    fn invalid_windowing() {
        assert!(matches!(
            window_segment(&segment(10), 1, 1),
            Err(EmgError::InvalidWindowing { .. })
        ));
        assert!(matches!(
            window_segment(&segment(10), 4, 0),
            Err(EmgError::InvalidWindowing { .. })
        ));
    }

    #[test]
    fn whole_segment_mode() {
        let w = window_segment(&segment(37), 0, 0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].len(), 37);
        assert!(window_segment(&segment(1), 0, 0).unwrap().is_empty());
    }

    #[test]
    fn stats_count_segments_and_windows() {
        let rec = recording(&[0, 1, 1, 1, 1, 0, 1, 1, 2, 2, 2]);
        let s = segment_stats(&[rec], 2, 1);
        assert_eq!(s.per_label["1"].segments, 2);
        assert_eq!(s.per_label["1"].windows, 3 + 1);
        assert_eq!(s.per_label["1"].min_len, 2);
        assert_eq!(s.per_label["1"].max_len, 4);
        assert_eq!(s.per_label["2"].windows, 2);
    }

    fn brute_force_count(len: usize, w: usize, s: usize) -> usize {
        let mut count = 0;
        let mut off = 0;
        while off + w <= len {
            count += 1;
            off += s;
        }
        count
    }

    proptest! {
        #[test]
        fn window_count_matches_enumeration(len in 0usize..400, w in 2usize..60, s in 1usize..40) {
            prop_assert_eq!(window_count(len, w, s), brute_force_count(len, w, s));
            prop_assert_eq!(window_segment(&segment(len), w, s).unwrap().len(), brute_force_count(len, w, s));
        }

        #[test]
        fn segments_cover_and_stay_pure(labels in proptest::collection::vec(0u8..4, 1..120),
                                        w in 2usize..8, s in 1usize..5) {
            let rec = recording(&labels);
            let segs = segment_by_label(&rec);
            let rest = labels.iter().filter(|&&l| l == 0).count();
            prop_assert_eq!(segs.iter().map(|s| s.len()).sum::<usize>() + rest, labels.len());
            for seg in &segs {
                for win in window_segment(seg, w, s).unwrap() {
                    let start = seg.start_index + win.offset;
                    for i in start..start + w {
                        prop_assert_eq!(rec.labels[i], win.label);
                    }
                    // Channel values encode the source index.
                    prop_assert_eq!(win.channels[0][0], (start * 10) as f64);
                }
            }
        }
    }
}
