//! Word gestures: motion features, a CART decision tree over them, and the
//! per-segment classifier the recognizer calls when the hand is moving.
//!
//! Each window of frames is reduced to eleven numbers, the mean absolute
//! first difference of the five finger digits, three accelerometer axes and
//! three gyro axes. Because that reduction is a per-frame average, two-second
//! training buffers and 1.5 s inference windows land in the same feature
//! space.

mod persist;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::EncodedFrame;
use crate::recognition::{Emission, EmissionKind};

pub use persist::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use tree::{gini, train, DecisionTreeModel, Node, Prediction, TreeParams};

pub const FEATURE_COUNT: usize = 11;
pub const CLASS_COUNT: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WordModelError {
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("training needs at least two samples, got {0}")]
    EmptyDataset(usize),
    #[error("model schema version {found} not supported (expected {expected})")]
    SchemaMismatch { found: String, expected: u32 },
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("unknown word label {0:?}")]
    UnknownLabel(String),
}

/// The seven word-gesture classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordLabel {
    Hello,
    Sorry,
    ThankYou,
    Goodbye,
    J,
    Z,
    None,
}

impl WordLabel {
    pub const ALL: [WordLabel; CLASS_COUNT] = [
        WordLabel::Hello,
        WordLabel::Sorry,
        WordLabel::ThankYou,
        WordLabel::Goodbye,
        WordLabel::J,
        WordLabel::Z,
        WordLabel::None,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<WordLabel> {
        WordLabel::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            WordLabel::Hello => "hello",
            WordLabel::Sorry => "sorry",
            WordLabel::ThankYou => "thankyou",
            WordLabel::Goodbye => "goodbye",
            WordLabel::J => "J",
            WordLabel::Z => "Z",
            WordLabel::None => "none",
        }
    }
}

impl fmt::Display for WordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WordLabel {
    type Err = WordModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WordLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| WordModelError::UnknownLabel(s.to_string()))
    }
}

/// Mean absolute first difference per channel: digits 0-4, accel 5-7, gyro 8-10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn gyro(&self) -> [f64; 3] {
        [self.0[8], self.0[9], self.0[10]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: WordLabel,
}

/// Buffer and window lengths, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    /// Length of one training buffer.
    pub sample_len_ms: u64,
    pub infer_window_ms: u64,
    pub frameshift_ms: u64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            sample_len_ms: 2000,
            infer_window_ms: 1500,
            frameshift_ms: 750,
        }
    }
}

impl WindowSpec {
    pub fn window_frames(&self, rate_hz: f64) -> usize {
        ms_to_frames(self.infer_window_ms, rate_hz)
    }

    pub fn shift_frames(&self, rate_hz: f64) -> usize {
        ms_to_frames(self.frameshift_ms, rate_hz).max(1)
    }

    pub fn sample_frames(&self, rate_hz: f64) -> usize {
        ms_to_frames(self.sample_len_ms, rate_hz)
    }

    pub fn is_valid(&self) -> bool {
        self.frameshift_ms > 0 && self.frameshift_ms <= self.infer_window_ms
    }
}

fn ms_to_frames(ms: u64, rate_hz: f64) -> usize {
    (ms as f64 * rate_hz / 1000.0).round() as usize
}

fn feature_channels(frame: &EncodedFrame) -> [f64; FEATURE_COUNT] {
    let mut out = [0.0; FEATURE_COUNT];
    for (slot, &d) in out.iter_mut().zip(&frame.digits) {
        *slot = f64::from(d);
    }
    out[5..8].copy_from_slice(&frame.accel);
    out[8..11].copy_from_slice(&frame.gyro);
    out
}

/// Successive differences of the eleven feature channels.
pub fn first_difference(frames: &[EncodedFrame]) -> Result<Vec<[f64; FEATURE_COUNT]>, WordModelError> {
    if frames.len() < 2 {
        return Err(WordModelError::TooFewFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    Ok(frames
        .windows(2)
        .map(|pair| {
            let (a, b) = (feature_channels(&pair[0]), feature_channels(&pair[1]));
            std::array::from_fn(|c| b[c] - a[c])
        })
        .collect())
}

pub fn extract_features(frames: &[EncodedFrame]) -> Result<FeatureVector, WordModelError> {
    let rows = first_difference(frames)?;
    let n = rows.len() as f64;
    let mut sums = [0.0; FEATURE_COUNT];
    for row in &rows {
        for (s, d) in sums.iter_mut().zip(row) {
            *s += d.abs();
        }
    }
    Ok(FeatureVector(sums.map(|s| s / n)))
}

/// Windows of `infer_window_ms` every `frameshift_ms`; a trailing partial
/// window is dropped.
pub fn sliding_windows<'a>(
    frames: &'a [EncodedFrame],
    spec: &WindowSpec,
    rate_hz: f64,
) -> Result<Vec<&'a [EncodedFrame]>, WordModelError> {
    let len = spec.window_frames(rate_hz).max(2);
    let shift = spec.shift_frames(rate_hz);
    if frames.len() < len {
        return Err(WordModelError::TooFewFrames {
            needed: len,
            got: frames.len(),
        });
    }
    Ok((0..=frames.len() - len)
        .step_by(shift)
        .map(|start| &frames[start..start + len])
        .collect())
}

/// Classifies one motion segment: one prediction per window, then a
/// majority vote over the windows that saw a word. Returns nothing when every
/// window reads as `none`.
pub fn classify_stream(
    frames: &[EncodedFrame],
    model: &DecisionTreeModel,
    spec: &WindowSpec,
    rate_hz: f64,
) -> Option<Emission> {
    let last_seq = frames.last()?.seq;
    let windows = match sliding_windows(frames, spec, rate_hz) {
        Ok(w) => w,
        // shorter than one window: judge what there is
        Err(_) if frames.len() >= 2 => vec![frames],
        Err(_) => return None,
    };

    // votes, summed confidence, first window index
    let mut tally: [(usize, f64, usize); CLASS_COUNT] = [(0, 0.0, usize::MAX); CLASS_COUNT];
    for (i, window) in windows.iter().enumerate() {
        let Ok(features) = extract_features(window) else {
            continue;
        };
        let p = model.predict(&features);
        if p.label == WordLabel::None {
            continue;
        }
        let t = &mut tally[p.label.index()];
        t.0 += 1;
        t.1 += p.confidence;
        t.2 = t.2.min(i);
    }

    let winner = WordLabel::ALL
        .into_iter()
        .filter(|l| tally[l.index()].0 > 0)
        .max_by(|a, b| {
            let (ta, tb) = (tally[a.index()], tally[b.index()]);
            ta.0.cmp(&tb.0).then(ta.1.total_cmp(&tb.1)).then(tb.2.cmp(&ta.2))
        })?;
    Some(Emission {
        kind: EmissionKind::Word,
        text: winner.name().to_string(),
        at_seq: last_seq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(seq: u32, digits: [u8; 5], gyro: [f64; 3]) -> EncodedFrame {
        EncodedFrame {
            seq,
            digits,
            orient: 0,
            accel: [0.0, -1.0, 0.0],
            gyro,
        }
    }

    fn constant(n: usize) -> Vec<EncodedFrame> {
        (0..n as u32).map(|i| frame(i, [2, 3, 3, 3, 3], [0.0; 3])).collect()
    }

    #[test]
    fn constant_stream_has_zero_differences() {
        let rows = first_difference(&constant(17)).unwrap();
        assert_eq!(rows.len(), 16);
        assert!(rows.iter().all(|r| r.iter().all(|&v| v == 0.0)));
        assert_eq!(extract_features(&constant(30)).unwrap().0, [0.0; FEATURE_COUNT]);
    }

    #[test]
    fn single_digit_step() {
        let mut frames = constant(31);
        for f in frames.iter_mut().skip(12) {
            f.digits[1] = 3;
        }
        for f in frames.iter_mut() {
            if f.seq < 12 {
                f.digits[1] = 1;
            }
        }
        let rows = first_difference(&frames).unwrap();
        let steps: Vec<_> = rows.iter().filter(|r| r[1] != 0.0).collect();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0][1], 2.0);
        let features = extract_features(&frames).unwrap();
        let mut expected = [0.0; FEATURE_COUNT];
        expected[1] = 2.0 / 30.0;
        assert_eq!(features.0, expected);
    }

    #[test]
    fn too_few_frames() {
        assert_eq!(
            first_difference(&constant(1)),
            Err(WordModelError::TooFewFrames { needed: 2, got: 1 })
        );
        assert!(extract_features(&[]).is_err());
    }

    #[test]
    fn window_counts() {
        let spec = WindowSpec::default();
        assert_eq!(sliding_windows(&constant(60), &spec, 20.0).unwrap().len(), 3);
        let frames = constant(60);
        let w = sliding_windows(&frames, &spec, 20.0).unwrap();
        assert_eq!(w[1][0].seq, 15);
        assert_eq!(w[2][0].seq, 30);
        assert_eq!(sliding_windows(&constant(30), &spec, 20.0).unwrap().len(), 1);
        assert_eq!(sliding_windows(&constant(44), &spec, 20.0).unwrap().len(), 1);
        assert_eq!(sliding_windows(&constant(45), &spec, 20.0).unwrap().len(), 2);
        assert!(matches!(
            sliding_windows(&constant(28), &spec, 20.0),
            Err(WordModelError::TooFewFrames { needed: 30, got: 28 })
        ));
    }

    #[test]
    fn labels_parse_by_name() {
        for l in WordLabel::ALL {
            assert_eq!(l.name().parse::<WordLabel>().unwrap(), l);
        }
        assert!("thank you".parse::<WordLabel>().is_err());
    }

    #[test]
    fn classify_stream_votes_over_windows() {
        let hello = Node::Leaf {
            label: WordLabel::Hello,
            counts: [3, 0, 0, 0, 0, 0, 1],
        };
        let none = Node::Leaf {
            label: WordLabel::None,
            counts: [0, 0, 0, 0, 0, 0, 4],
        };
        // gyro_z motion above 5 dps per frame reads as hello
        let model = DecisionTreeModel::from_nodes(
            vec![
                Node::Split {
                    feature: 10,
                    threshold: 5.0,
                    left: 1,
                    right: 2,
                },
                none,
                hello,
            ],
            TreeParams::default(),
        )
        .unwrap();
        let spec = WindowSpec::default();

        let still = constant(60);
        assert_eq!(classify_stream(&still, &model, &spec, 20.0), None);

        let moving: Vec<_> = (0..60u32)
            .map(|i| frame(i, [1; 5], [0.0, 0.0, if i % 2 == 0 { 50.0 } else { -50.0 }]))
            .collect();
        let e = classify_stream(&moving, &model, &spec, 20.0).unwrap();
        assert_eq!(e.kind, EmissionKind::Word);
        assert_eq!(e.text, "hello");
        assert_eq!(e.at_seq, 59);
    }
}
