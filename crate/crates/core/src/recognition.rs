//! Host-side recognizer.
//!
//! Frames go into a 30-frame ring (1.5 s at 20 Hz). Once the ring is full,
//! every new frame triggers a decision: per-channel mean and variance decide
//! whether the hand is moving (word path), holding a steady shape (alphabet
//! path), or neither. Alphabet decisions use the statistical mode of the
//! ring's gesture codes, looked up in the static-alphabet [`CodeMap`].
//!
//! A held letter is reported once. After an emission the recognizer is
//! disarmed until the gyro variance rises again or the dominant code changes.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::encoding::{EncodedFrame, GestureCode};
use crate::wordmodel::{classify_stream, DecisionTreeModel, WindowSpec};

/// Ring length: 30 cycles of 50 ms.
pub const BUFFER_FRAMES: usize = 30;
/// Channel layout of [`ChannelStats`].
pub const CHANNEL_COUNT: usize = 12;
const DIGIT_CHANNELS: std::ops::Range<usize> = 0..5;
const GYRO_CHANNELS: std::ops::Range<usize> = 9..12;

/// Longest motion segment handed to the word classifier in one piece.
const MAX_SEGMENT_FRAMES: usize = 400;

/// Final alphabet codes for the 24 static letters. U uses the relaxed
/// ring/little variant so it no longer collides with V.
pub const STATIC_ALPHABET: [(char, &str); 24] = [
    ('A', "233330"),
    ('B', "311110"),
    ('C', "122220"),
    ('D', "313330"),
    ('E', "322220"),
    ('F', "231110"),
    ('G', "213331"),
    ('H', "211331"),
    ('I', "333310"),
    ('K', "211330"),
    ('L', "113330"),
    ('M', "333230"),
    ('N', "332330"),
    ('O', "222220"),
    ('P', "112331"),
    ('Q', "123331"),
    ('R', "321330"),
    ('S', "333330"),
    ('T', "223330"),
    ('U', "311220"),
    ('V', "311330"),
    ('W', "311130"),
    ('X', "323330"),
    ('Y', "133310"),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecognitionError {
    #[error("buffer holds {got} frames, statistics need {needed}")]
    BufferNotFull { got: usize, needed: usize },
    #[error("invalid recognizer parameter: {0}")]
    InvalidParams(String),
}

/// Gesture code to letter, for the static alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeMap {
    by_code: BTreeMap<GestureCode, char>,
}

impl CodeMap {
    pub fn lookup(&self, code: &str) -> Option<char> {
        code.parse::<GestureCode>().ok().and_then(|c| self.lookup_code(&c))
    }

    pub fn lookup_code(&self, code: &GestureCode) -> Option<char> {
        self.by_code.get(code).copied()
    }

    pub fn code_for(&self, letter: char) -> Option<GestureCode> {
        self.by_code.iter().find(|(_, &l)| l == letter).map(|(c, _)| *c)
    }

    pub fn len(&self) -> usize {
        self.by_code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_code.is_empty()
    }

    /// Entries in alphabetical order.
    pub fn entries(&self) -> Vec<(char, GestureCode)> {
        let mut out: Vec<_> = self.by_code.iter().map(|(c, l)| (*l, *c)).collect();
        out.sort();
        out
    }
}

pub fn build_code_map() -> CodeMap {
    let mut by_code = BTreeMap::new();
    for (letter, code) in STATIC_ALPHABET {
        let code: GestureCode = code.parse().expect("alphabet table codes are well-formed");
        let previous = by_code.insert(code, letter);
        assert!(
            previous.is_none(),
            "alphabet code {code} assigned to both {} and {letter}",
            previous.unwrap_or('?')
        );
    }
    CodeMap { by_code }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecognizerParams {
    /// dps²; a gyro channel at or above this routes to the word path.
    pub gyro_var_threshold: f64,
    /// Upper bound on each finger-digit variance for an alphabet decision.
    pub digit_var_threshold: f64,
    /// Share of the ring the mode code must hold, in (0.5, 1].
    pub mode_majority_fraction: f64,
    /// dps²; gyro variance above this re-arms letter emission.
    pub rearm_var_threshold: f64,
}

impl Default for RecognizerParams {
    fn default() -> Self {
        RecognizerParams {
            gyro_var_threshold: 400.0,
            digit_var_threshold: 0.25,
            mode_majority_fraction: 0.8,
            rearm_var_threshold: 400.0,
        }
    }
}

impl RecognizerParams {
    pub fn validate(&self) -> Result<(), RecognitionError> {
        let positive = [
            ("gyro_var_threshold", self.gyro_var_threshold),
            ("digit_var_threshold", self.digit_var_threshold),
            ("rearm_var_threshold", self.rearm_var_threshold),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(RecognitionError::InvalidParams(format!("{name} must be > 0")));
            }
        }
        let m = self.mode_majority_fraction;
        if !(m > 0.5 && m <= 1.0) {
            return Err(RecognitionError::InvalidParams(
                "mode_majority_fraction must be in (0.5, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Population mean and variance of the twelve frame channels: five finger
/// digits, orientation, accel x/y/z, gyro x/y/z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: [f64; CHANNEL_COUNT],
    pub variance: [f64; CHANNEL_COUNT],
}

impl ChannelStats {
    pub fn max_gyro_variance(&self) -> f64 {
        self.variance[GYRO_CHANNELS].iter().copied().fold(0.0, f64::max)
    }

    pub fn max_digit_variance(&self) -> f64 {
        self.variance[DIGIT_CHANNELS].iter().copied().fold(0.0, f64::max)
    }
}

pub fn buffer_stats(frames: &[EncodedFrame]) -> Result<ChannelStats, RecognitionError> {
    if frames.len() < BUFFER_FRAMES {
        return Err(RecognitionError::BufferNotFull {
            got: frames.len(),
            needed: BUFFER_FRAMES,
        });
    }
    let n = frames.len() as f64;
    let mut mean = [0.0; CHANNEL_COUNT];
    for f in frames {
        for (m, v) in mean.iter_mut().zip(f.channels()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut variance = [0.0; CHANNEL_COUNT];
    for f in frames {
        for ((s, v), m) in variance.iter_mut().zip(f.channels()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut variance {
        *s /= n;
    }
    Ok(ChannelStats { mean, variance })
}

/// Most frequent gesture code and its share of the buffer. Ties go to the
/// code seen most recently.
pub fn mode_code(frames: &[EncodedFrame]) -> Option<(GestureCode, f64)> {
    // (code, count, last position)
    let mut tally: Vec<(GestureCode, usize, usize)> = Vec::new();
    for (pos, f) in frames.iter().enumerate() {
        let code = f.code();
        match tally.iter_mut().find(|t| t.0 == code) {
            Some(t) => {
                t.1 += 1;
                t.2 = pos;
            }
            None => tally.push((code, 1, pos)),
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)))
        .map(|(code, count, _)| (code, count as f64 / frames.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Alphabet,
    Word,
    Idle,
}

pub fn discriminate(stats: &ChannelStats, mode_support: f64, params: &RecognizerParams) -> Route {
    if stats.max_gyro_variance() >= params.gyro_var_threshold {
        Route::Word
    } else if stats.max_digit_variance() <= params.digit_var_threshold && mode_support >= params.mode_majority_fraction
    {
        Route::Alphabet
    } else {
        Route::Idle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionKind {
    Alphabet,
    Word,
}

impl EmissionKind {
    pub fn name(self) -> &'static str {
        match self {
            EmissionKind::Alphabet => "alphabet",
            EmissionKind::Word => "word",
        }
    }
}

/// A recognized letter or word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub kind: EmissionKind,
    pub text: String,
    pub at_seq: u32,
}

impl Emission {
    /// `OUT;<kind>;<text>;<at_seq>\n`
    pub fn to_line(&self) -> String {
        format!("{self}\n")
    }

    pub fn parse_line(line: &str) -> Option<Emission> {
        let body = line.strip_suffix('\n').unwrap_or(line);
        let mut parts = body.split(';');
        if parts.next()? != "OUT" {
            return None;
        }
        let kind = match parts.next()? {
            "alphabet" => EmissionKind::Alphabet,
            "word" => EmissionKind::Word,
            _ => return None,
        };
        let text = parts.next().filter(|t| !t.is_empty())?.to_string();
        let at_seq = parts.next()?.parse().ok()?;
        if parts.next().is_some() {
            return None;
        }
        Some(Emission { kind, text, at_seq })
    }
}

impl fmt::Display for Emission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OUT;{};{};{}", self.kind.name(), self.text, self.at_seq)
    }
}

/// Post-processing slot between the recognizer and the output. Spelling or
/// language-model correction would plug in here.
pub trait ErrorCorrection: Send {
    fn correct(&mut self, emission: Emission) -> Option<Emission>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PassThrough;

impl ErrorCorrection for PassThrough {
    fn correct(&mut self, emission: Emission) -> Option<Emission> {
        Some(emission)
    }
}

/// The part of `segment` from the first to the last frame whose rotation
/// rate reaches `min_dps` on some axis; the whole segment if none does.
pub fn motion_core(segment: &[EncodedFrame], min_dps: f64) -> &[EncodedFrame] {
    let moving = |f: &EncodedFrame| f.gyro.iter().any(|g| g.abs() >= min_dps);
    match (segment.iter().position(moving), segment.iter().rposition(moving)) {
        (Some(first), Some(last)) => &segment[first..=last],
        _ => segment,
    }
}

/// Word classifier used on motion segments.
#[derive(Debug, Clone)]
pub struct WordStage {
    pub model: Arc<DecisionTreeModel>,
    pub spec: WindowSpec,
    pub rate_hz: f64,
}

/// Streaming recognizer. Feed frames in order with [`Recognizer::push_frame`];
/// call [`Recognizer::finish`] at end of input to flush an open motion segment.
#[derive(Debug, Clone)]
pub struct Recognizer {
    code_map: Arc<CodeMap>,
    params: RecognizerParams,
    buffer: VecDeque<EncodedFrame>,
    last_emitted: Option<(String, u32)>,
    motion_armed: bool,
    last_mode: Option<GestureCode>,
    segment: Option<Vec<EncodedFrame>>,
    word: Option<WordStage>,
    unclassified_segments: u64,
}

impl Recognizer {
    pub fn new(code_map: Arc<CodeMap>, params: RecognizerParams, word: Option<WordStage>) -> Self {
        Recognizer {
            code_map,
            params,
            buffer: VecDeque::with_capacity(BUFFER_FRAMES + 1),
            last_emitted: None,
            motion_armed: true,
            last_mode: None,
            segment: None,
            word,
            unclassified_segments: 0,
        }
    }

    pub fn params(&self) -> &RecognizerParams {
        &self.params
    }

    pub fn last_emitted(&self) -> Option<&(String, u32)> {
        self.last_emitted.as_ref()
    }

    pub fn is_armed(&self) -> bool {
        self.motion_armed
    }

    /// Motion segments dropped because no word model is loaded.
    pub fn unclassified_segments(&self) -> u64 {
        self.unclassified_segments
    }

    pub fn push_frame(&mut self, frame: EncodedFrame) -> Option<Emission> {
        if let Some(segment) = &mut self.segment {
            segment.push(frame.clone());
        }
        self.buffer.push_back(frame);
        if self.buffer.len() > BUFFER_FRAMES {
            self.buffer.pop_front();
        }
        if self.buffer.len() < BUFFER_FRAMES {
            return None;
        }

        let frames = self.buffer.make_contiguous();
        let stats = buffer_stats(frames).expect("ring is full");
        let (mode, support) = mode_code(frames).expect("ring is non-empty");
        let route = discriminate(&stats, support, &self.params);

        if stats.max_gyro_variance() > self.params.rearm_var_threshold || self.last_mode != Some(mode) {
            self.motion_armed = true;
        }
        self.last_mode = Some(mode);

        let mut word_emission = None;
        if route == Route::Word {
            match &mut self.segment {
                None => self.segment = Some(self.buffer.iter().cloned().collect()),
                Some(seg) if seg.len() >= MAX_SEGMENT_FRAMES => {
                    let full = std::mem::replace(seg, self.buffer.iter().cloned().collect());
                    word_emission = self.classify_segment(&full);
                }
                Some(_) => {}
            }
        } else if let Some(seg) = self.segment.take() {
            word_emission = self.classify_segment(&seg);
        }
        // a closing word segment claims this cycle; letters wait for the next
        if word_emission.is_some() {
            return word_emission;
        }

        if route == Route::Alphabet && self.motion_armed {
            if let Some(letter) = self.code_map.lookup_code(&mode) {
                let at_seq = self.buffer.back().map(|f| f.seq).unwrap_or_default();
                self.motion_armed = false;
                self.last_emitted = Some((letter.to_string(), at_seq));
                return Some(Emission {
                    kind: EmissionKind::Alphabet,
                    text: letter.to_string(),
                    at_seq,
                });
            }
        }
        None
    }

    /// Flushes a motion segment still open at end of input.
    pub fn finish(&mut self) -> Option<Emission> {
        let seg = self.segment.take()?;
        self.classify_segment(&seg)
    }

    fn classify_segment(&mut self, segment: &[EncodedFrame]) -> Option<Emission> {
        let Some(stage) = &self.word else {
            self.unclassified_segments += 1;
            return None;
        };
        let core = motion_core(segment, self.params.gyro_var_threshold.sqrt());
        let mut emission = classify_stream(core, &stage.model, &stage.spec, stage.rate_hz)?;
        emission.at_seq = segment.last().map_or(emission.at_seq, |f| f.seq);
        self.last_emitted = Some((emission.text.clone(), emission.at_seq));
        Some(emission)
    }
}
