//! Scripted gestures: static letters from the alphabet table, parametric
//! motion templates for the word gestures, and the synthetic corpora used to
//! train and evaluate the word classifier.
//!
//! Motion templates (gyro amplitude in dps @ frequency in Hz):
//!
//! | name | hand | motion |
//! |---|---|---|
//! | hello | open, vertical | yaw wave, z 180 @ 1.5 |
//! | sorry | fist (A) | circle, x and y 160 @ 1.0, quarter period apart |
//! | thankyou | open, tips to flat | pitch, x 200 @ 1.0, palm turns flat halfway |
//! | goodbye | open/closed fingers | yaw z 150 @ 1.0, fingers flap every 250 ms |
//! | J | I | hook, y 180 @ 0.75 + z 120 @ 1.25 |
//! | Z | D | zig-zag, z 160 @ 2.0 + x 100 @ 1.0 |
//! | shake | random | tremor on all axes, 260 @ 4.0 (not a word) |

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::calibration::{calibrate, CalibrationError, GloveCalibration};
use crate::encoding::{encode_frame, EncodedFrame, GestureCode};
use crate::glovesim::{
    config_phase_script, synthesize, GestureScript, Keyframe, MotionProfile, Orientation, RawSample, SensorProfile,
    SimError, FINGER_COUNT,
};
use crate::recognition::{build_code_map, STATIC_ALPHABET};
use crate::wordmodel::{extract_features, LabeledSample, WordLabel, WordModelError};

pub const DEFAULT_WORD_MS: u64 = 2000;
pub const DEFAULT_SHAKE_MS: u64 = 1000;
pub const DEFAULT_HOLD_MS: u64 = 2000;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("unknown letter {0:?} (static alphabet is A-Y without J)")]
    UnknownLetter(String),
    #[error("unknown motion template {0:?}")]
    UnknownMotion(String),
    #[error("bad script spec {0:?}: {1}")]
    BadSpec(String, String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Word(#[from] WordModelError),
}

/// Bend fraction that lands in the middle of each quantized finger state.
pub fn digit_bend(digit: u8) -> f64 {
    match digit {
        1 => 0.0,
        2 => 0.5,
        _ => 1.0,
    }
}

pub fn code_pose(code: &GestureCode) -> ([f64; FINGER_COUNT], Orientation) {
    (code.digits().map(digit_bend), Orientation::from_bit(code.orient()))
}

pub fn code_script(code: &GestureCode, hold_ms: u64) -> GestureScript {
    let (bend, orientation) = code_pose(code);
    GestureScript::hold(bend, orientation, hold_ms)
}

/// Static hold of one letter of the alphabet table.
pub fn letter_script(letter: char, hold_ms: u64) -> Result<GestureScript, TemplateError> {
    let code = build_code_map()
        .code_for(letter.to_ascii_uppercase())
        .ok_or_else(|| TemplateError::UnknownLetter(letter.to_string()))?;
    Ok(code_script(&code, hold_ms))
}

pub fn static_letters() -> impl Iterator<Item = char> {
    STATIC_ALPHABET.iter().map(|(l, _)| *l)
}

/// Parametric hand motion shared by the simulator and UI presets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionTemplate {
    pub name: &'static str,
    /// Hand shape as a gesture code.
    pub hand: &'static str,
    /// Shape alternated with `hand` every `alternate_every_ms`.
    pub alternate_hand: Option<&'static str>,
    pub alternate_every_ms: u64,
    pub gyro_amp_dps: [f64; 3],
    pub freq_hz: [f64; 3],
    pub phase_rad: [f64; 3],
    pub accel_sway_g: [f64; 3],
    pub duration_ms: u64,
}

impl MotionTemplate {
    pub fn label(&self) -> WordLabel {
        self.name.parse().unwrap_or(WordLabel::None)
    }

    /// The template at nominal amplitude, frequency and phase.
    pub fn script(&self) -> GestureScript {
        self.script_with(1.0, 1.0, 0.0, self.duration_ms)
    }

    /// A random performance: amplitude ×[0.8, 1.2], tempo ×[0.85, 1.15],
    /// random starting phase.
    pub fn script_varied<R: Rng>(&self, rng: &mut R, duration_ms: u64) -> GestureScript {
        let amp = rng.random_range(0.8..1.2);
        let tempo = rng.random_range(0.85..1.15);
        let shift = rng.random_range(0.0..TAU);
        self.script_with(amp, tempo, shift, duration_ms)
    }

    pub fn script_with(&self, amp_scale: f64, tempo: f64, phase_shift: f64, duration_ms: u64) -> GestureScript {
        let motion = MotionProfile {
            gyro_amp_dps: self.gyro_amp_dps.map(|a| a * amp_scale),
            freq_hz: self.freq_hz.map(|f| f * tempo),
            phase_rad: self.phase_rad.map(|p| p + phase_shift),
            accel_sway_g: self.accel_sway_g.map(|a| a * amp_scale),
        };
        let shapes: Vec<GestureCode> = std::iter::once(self.hand)
            .chain(self.alternate_hand)
            .map(|c| c.parse().expect("template hand codes are well-formed"))
            .collect();
        let step = if shapes.len() > 1 && self.alternate_every_ms > 0 {
            ((self.alternate_every_ms as f64 / tempo).round() as u64).max(1)
        } else {
            duration_ms.max(1)
        };
        let keyframes = (0..)
            .map(|k| k * step)
            .take_while(|&t| t < duration_ms.max(1))
            .enumerate()
            .map(|(k, at_ms)| {
                let (bend, orientation) = code_pose(&shapes[k % shapes.len()]);
                Keyframe {
                    at_ms,
                    bend,
                    orientation,
                    motion,
                }
            })
            .collect();
        GestureScript { keyframes, duration_ms }
    }
}

pub fn motion_templates() -> Vec<MotionTemplate> {
    vec![
        MotionTemplate {
            name: "hello",
            hand: "111110",
            alternate_hand: None,
            alternate_every_ms: 0,
            gyro_amp_dps: [0.0, 0.0, 180.0],
            freq_hz: [0.0, 0.0, 1.5],
            phase_rad: [0.0; 3],
            accel_sway_g: [0.3, 0.0, 0.0],
            duration_ms: DEFAULT_WORD_MS,
        },
        MotionTemplate {
            name: "sorry",
            hand: "233330",
            alternate_hand: None,
            alternate_every_ms: 0,
            gyro_amp_dps: [160.0, 160.0, 0.0],
            freq_hz: [1.0, 1.0, 0.0],
            phase_rad: [0.0, FRAC_PI_2, 0.0],
            accel_sway_g: [0.15, 0.15, 0.0],
            duration_ms: DEFAULT_WORD_MS,
        },
        MotionTemplate {
            name: "thankyou",
            hand: "111110",
            alternate_hand: Some("111111"),
            alternate_every_ms: 1000,
            gyro_amp_dps: [200.0, 0.0, 0.0],
            freq_hz: [1.0, 0.0, 0.0],
            phase_rad: [0.0; 3],
            accel_sway_g: [0.0, 0.3, 0.0],
            duration_ms: DEFAULT_WORD_MS,
        },
        MotionTemplate {
            name: "goodbye",
            hand: "111110",
            alternate_hand: Some("133330"),
            alternate_every_ms: 250,
            gyro_amp_dps: [0.0, 0.0, 150.0],
            freq_hz: [0.0, 0.0, 1.0],
            phase_rad: [0.0; 3],
            accel_sway_g: [0.2, 0.0, 0.0],
            duration_ms: DEFAULT_WORD_MS,
        },
        MotionTemplate {
            name: "J",
            hand: "333310",
            alternate_hand: None,
            alternate_every_ms: 0,
            gyro_amp_dps: [0.0, 180.0, 120.0],
            freq_hz: [0.0, 0.75, 1.25],
            phase_rad: [0.0; 3],
            accel_sway_g: [0.0, 0.0, 0.25],
            duration_ms: DEFAULT_WORD_MS,
        },
        MotionTemplate {
            name: "Z",
            hand: "313330",
            alternate_hand: None,
            alternate_every_ms: 0,
            gyro_amp_dps: [100.0, 0.0, 160.0],
            freq_hz: [1.0, 0.0, 2.0],
            phase_rad: [0.0; 3],
            accel_sway_g: [0.2, 0.0, 0.0],
            duration_ms: DEFAULT_WORD_MS,
        },
        MotionTemplate {
            name: "shake",
            hand: "222220",
            alternate_hand: None,
            alternate_every_ms: 0,
            gyro_amp_dps: [260.0, 260.0, 260.0],
            freq_hz: [4.0, 4.3, 3.7],
            phase_rad: [0.0, 1.0, 2.0],
            accel_sway_g: [0.6, 0.6, 0.6],
            duration_ms: DEFAULT_SHAKE_MS,
        },
    ]
}

pub fn motion_template(name: &str) -> Result<MotionTemplate, TemplateError> {
    motion_templates()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| TemplateError::UnknownMotion(name.to_string()))
}

/// A shake with a random hand shape.
pub fn random_shake<R: Rng>(rng: &mut R, duration_ms: u64) -> GestureScript {
    let shake = motion_template("shake").expect("shake template exists");
    let mut script = shake.script_varied(rng, duration_ms);
    let bend: [f64; FINGER_COUNT] = std::array::from_fn(|_| digit_bend(rng.random_range(1..=3)));
    for kf in &mut script.keyframes {
        kf.bend = bend;
    }
    script
}

/// Everything the UI needs to replay the same presets as the simulator.
#[derive(Debug, Serialize)]
pub struct TemplateExport {
    pub rate_hz: f64,
    pub profile: SensorProfile,
    pub letters: Vec<LetterExport>,
    pub motions: Vec<MotionTemplate>,
}

#[derive(Debug, Serialize)]
pub struct LetterExport {
    pub letter: char,
    pub code: String,
    pub bend: [f64; FINGER_COUNT],
    pub orientation: Orientation,
}

pub fn export_templates(profile: &SensorProfile, rate_hz: f64) -> TemplateExport {
    let letters = build_code_map()
        .entries()
        .into_iter()
        .map(|(letter, code)| {
            let (bend, orientation) = code_pose(&code);
            LetterExport {
                letter,
                code: code.to_string(),
                bend,
                orientation,
            }
        })
        .collect();
    TemplateExport {
        rate_hz,
        profile: profile.clone(),
        letters,
        motions: motion_templates(),
    }
}

fn parse_duration_ms(text: &str) -> Option<u64> {
    if let Some(ms) = text.strip_suffix("ms") {
        return ms.parse().ok();
    }
    let secs: f64 = text.strip_suffix('s').unwrap_or(text).parse().ok()?;
    (secs.is_finite() && secs > 0.0).then(|| (secs * 1000.0).round() as u64)
}

/// Parses a duration such as `2s`, `1.5s` or `750ms`.
pub fn parse_duration(text: &str) -> Option<u64> {
    parse_duration_ms(text.trim())
}

/// Builds a script from a `+`-joined list of segments:
/// `alphabet:<L>`, `word:<name>`, `shake`, `config`, or `rest`, each
/// optionally suffixed with `@<duration>` (`alphabet:A@5s+shake+alphabet:A`).
pub fn parse_script_spec(
    spec: &str,
    default_hold_ms: u64,
    profile: &SensorProfile,
) -> Result<GestureScript, TemplateError> {
    let bad = |why: &str| TemplateError::BadSpec(spec.to_string(), why.to_string());
    let mut script: Option<GestureScript> = None;
    for segment in spec.split('+').map(str::trim) {
        if segment.is_empty() {
            return Err(bad("empty segment"));
        }
        let (body, duration) = match segment.split_once('@') {
            Some((b, d)) => (b, Some(parse_duration(d).ok_or_else(|| bad("bad duration"))?)),
            None => (segment, None),
        };
        let next = match body.split_once(':') {
            Some(("alphabet", letter)) => {
                let mut chars = letter.chars();
                match (chars.next(), chars.next()) {
                    (Some(l), None) => letter_script(l, duration.unwrap_or(default_hold_ms))?,
                    _ => return Err(TemplateError::UnknownLetter(letter.to_string())),
                }
            }
            Some(("word", name)) => {
                let t = motion_template(name)?;
                if t.name == "shake" {
                    return Err(TemplateError::UnknownMotion(name.to_string()));
                }
                t.script_with(1.0, 1.0, 0.0, duration.unwrap_or(t.duration_ms))
            }
            Some((kind, _)) => return Err(bad(&format!("unknown segment kind {kind:?}"))),
            None => match body {
                "shake" => motion_template("shake")?.script_with(1.0, 1.0, 0.0, duration.unwrap_or(DEFAULT_SHAKE_MS)),
                "rest" => GestureScript::hold(
                    [0.0; FINGER_COUNT],
                    Orientation::Vertical,
                    duration.unwrap_or(default_hold_ms),
                ),
                "config" => {
                    let mut s = config_phase_script(profile);
                    if let Some(d) = duration {
                        s.duration_ms = d;
                    }
                    s
                }
                other => return Err(bad(&format!("unknown segment {other:?}"))),
            },
        };
        script = Some(match script {
            None => next,
            Some(s) => s.then(next),
        });
    }
    script.ok_or_else(|| bad("no segments"))
}

/// Synthesizes the configuration phase for `profile` and calibrates on it.
pub fn calibrate_profile(profile: &SensorProfile, rate_hz: f64) -> Result<GloveCalibration, TemplateError> {
    let trace = synthesize(&config_phase_script(profile), profile, rate_hz)?;
    Ok(calibrate(&trace)?)
}

pub fn encode_trace(trace: &[RawSample], cal: &GloveCalibration) -> Vec<EncodedFrame> {
    trace
        .iter()
        .enumerate()
        .map(|(i, s)| encode_frame(s, cal, i as u32))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub per_class: usize,
    pub seed: u64,
    pub profile: SensorProfile,
    pub rate_hz: f64,
    pub sample_len_ms: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            per_class: 200,
            seed: 7,
            profile: SensorProfile::default(),
            rate_hz: 20.0,
            sample_len_ms: DEFAULT_WORD_MS,
        }
    }
}

/// One "none" buffer: a held letter, a shake, a partial shake, a change
/// between two letters, or a word fragment too short to name the word.
fn none_script<R: Rng>(rng: &mut R, templates: &[MotionTemplate], duration_ms: u64) -> GestureScript {
    let letters: Vec<char> = static_letters().collect();
    let letter = |rng: &mut R, ms: u64| {
        let mut s = letter_script(*letters.choose(rng).expect("non-empty"), 1).expect("table letter");
        s.duration_ms = ms;
        s
    };
    let pick: f64 = rng.random();
    if pick < 0.25 {
        letter(rng, duration_ms)
    } else if pick < 0.45 {
        random_shake(rng, duration_ms)
    } else if pick < 0.65 {
        let motion = sliver_biased(rng, duration_ms, 0.75);
        let shake = random_shake(rng, motion);
        let hold = letter(rng, duration_ms - motion);
        edge_motion(rng, hold, shake)
    } else if pick < 0.8 {
        let split = rng.random_range(duration_ms / 4..=duration_ms * 3 / 4);
        letter(rng, split).then(letter(rng, duration_ms - split))
    } else {
        let motion = sliver_biased(rng, duration_ms, 0.3);
        let word = templates
            .iter()
            .filter(|t| t.label() != WordLabel::None)
            .collect::<Vec<_>>()
            .choose(rng)
            .expect("word templates exist")
            .script_varied(rng, motion);
        let hold = letter(rng, duration_ms - motion);
        edge_motion(rng, hold, word)
    }
}

/// A motion length between 5% and `max_share` of `duration_ms`, short ones
/// more likely: a segment's first window usually holds only a few moving
/// frames.
fn sliver_biased<R: Rng>(rng: &mut R, duration_ms: u64, max_share: f64) -> u64 {
    let u: f64 = rng.random();
    (duration_ms as f64 * (0.05 + (max_share - 0.05) * u * u)).round() as u64
}

/// `motion` at either end of `hold`.
fn edge_motion<R: Rng>(rng: &mut R, hold: GestureScript, motion: GestureScript) -> GestureScript {
    if rng.random_bool(0.5) {
        motion.then(hold)
    } else {
        hold.then(motion)
    }
}

/// A word buffer as the recognizer sees it at the edges of a segment: the
/// performance covers 60–100% of the buffer and the rest is a static hold
/// (a letter or the resting hand) before and after.
fn flanked_word<R: Rng>(rng: &mut R, template: &MotionTemplate, duration_ms: u64) -> GestureScript {
    let letters: Vec<char> = static_letters().collect();
    let core = rng.random_range(duration_ms * 3 / 5..=duration_ms);
    let lead = rng.random_range(0..=duration_ms - core);
    let hold = |rng: &mut R, ms: u64| {
        let mut s = if rng.random_bool(0.25) {
            GestureScript::hold([0.0; FINGER_COUNT], Orientation::Vertical, ms)
        } else {
            letter_script(*letters.choose(rng).expect("non-empty"), ms).expect("table letter")
        };
        s.duration_ms = ms;
        s
    };
    let mut script: Option<GestureScript> = None;
    for (ms, motion) in [(lead, false), (core, true), (duration_ms - core - lead, false)] {
        if ms == 0 {
            continue;
        }
        let next = if motion {
            template.script_varied(rng, ms)
        } else {
            hold(rng, ms)
        };
        script = Some(match script {
            None => next,
            Some(s) => s.then(next),
        });
    }
    script.expect("the performance is never empty")
}

/// Raw traces for the seven word classes, `per_class` of each, every one
/// `sample_len_ms` long with its own noise seed and randomized template.
pub fn word_corpus(spec: &CorpusSpec) -> Result<Vec<(WordLabel, Vec<RawSample>)>, TemplateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let templates = motion_templates();
    let mut out = Vec::with_capacity(spec.per_class * WordLabel::ALL.len());
    for label in WordLabel::ALL {
        for _ in 0..spec.per_class {
            let script = if label == WordLabel::None {
                none_script(&mut rng, &templates, spec.sample_len_ms)
            } else {
                let t = templates
                    .iter()
                    .find(|t| t.label() == label)
                    .expect("every word label has a template");
                flanked_word(&mut rng, t, spec.sample_len_ms)
            };
            let profile = spec.profile.clone().with_seed(rng.random());
            out.push((label, synthesize(&script, &profile, spec.rate_hz)?));
        }
    }
    Ok(out)
}

/// Encodes a corpus with `cal` and reduces each trace to one feature vector.
pub fn featurize(
    corpus: &[(WordLabel, Vec<RawSample>)],
    cal: &GloveCalibration,
) -> Result<Vec<LabeledSample>, TemplateError> {
    corpus
        .iter()
        .map(|(label, trace)| {
            Ok(LabeledSample {
                features: extract_features(&encode_trace(trace, cal))?,
                label: *label,
            })
        })
        .collect()
}

/// Labeled feature vectors for the word classifier, calibrated against the
/// corpus profile's own configuration phase.
pub fn word_training_set(spec: &CorpusSpec) -> Result<Vec<LabeledSample>, TemplateError> {
    let cal = calibrate_profile(&spec.profile, spec.rate_hz)?;
    featurize(&word_corpus(spec)?, &cal)
}

/// Per-class shuffled split: `holdout` of each class goes to the second set.
pub fn stratified_split(
    samples: &[LabeledSample],
    holdout: f64,
    seed: u64,
) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for label in WordLabel::ALL {
        let mut class: Vec<&LabeledSample> = samples.iter().filter(|s| s.label == label).collect();
        class.shuffle(&mut rng);
        let n_test = (class.len() as f64 * holdout).round() as usize;
        for (i, s) in class.into_iter().enumerate() {
            if i < n_test {
                test.push(s.clone());
            } else {
                train.push(s.clone());
            }
        }
    }
    (train, test)
}
