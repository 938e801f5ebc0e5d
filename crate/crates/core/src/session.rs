//! Session phase machine and the host side of the line protocol.
//!
//! A session starts in `Init`, moves to `Configuring` at power-on, and to
//! `Running` once a calibration exists (either computed from recorded `R;`
//! frames or loaded from a file). There is no way back. Frames are only
//! recognized while `Running`; calibration only happens while `Configuring`.
//!
//! Control lines understood by [`Session::handle_line`]:
//!
//! | client sends | phase | reply |
//! |---|---|---|
//! | `R;...` | Configuring | (recorded) |
//! | `R;...` / `E;...` | Running | `OUT;...` when something is recognized |
//! | `E;...` | Configuring | `ERR;not-calibrated` |
//! | `CMD;calibrate` | Configuring | `CAL;ok` or `CAL;err;<finger>` |
//! | `CMD;calibrate` | Running | `ERR;already-calibrated` |
//! | anything else | any | `ERR;malformed` / `ERR;unknown-command` |

use std::sync::Arc;

use thiserror::Error;

use crate::calibration::{calibrate_flex, min_config_samples, CalibrationError, GloveCalibration};
use crate::encoding::{
    encode_frame, encode_raw, parse_wire_frame, EncodedFrame, RawFrame, SeqTracker, WireFrame, SEQ_MODULUS,
};
use crate::glovesim::{RawSample, NOMINAL_RATE_HZ};
use crate::recognition::{
    build_code_map, Emission, ErrorCorrection, PassThrough, Recognizer, RecognizerParams, WordStage,
};
use crate::wordmodel::{DecisionTreeModel, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionPhase {
    Init,
    Configuring,
    Running,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("cannot move from {from:?} to {to:?}")]
    IllegalTransition { from: SessionPhase, to: SessionPhase },
    #[error("{op} needs the {required:?} phase, session is {actual:?}")]
    WrongPhase {
        op: &'static str,
        required: SessionPhase,
        actual: SessionPhase,
    },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Everything a session needs besides the calibration.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    pub params: RecognizerParams,
    pub model: Option<Arc<DecisionTreeModel>>,
    pub window: WindowSpec,
    pub rate_hz: f64,
}

impl Default for SessionSetup {
    fn default() -> Self {
        SessionSetup {
            params: RecognizerParams::default(),
            model: None,
            window: WindowSpec::default(),
            rate_hz: NOMINAL_RATE_HZ,
        }
    }
}

pub struct Session {
    phase: SessionPhase,
    setup: SessionSetup,
    recorded: Vec<RawFrame>,
    calibration: Option<GloveCalibration>,
    recognizer: Option<Recognizer>,
    seq: SeqTracker,
    next_seq: u32,
    corrector: Box<dyn ErrorCorrection>,
}

impl Session {
    pub fn new(setup: SessionSetup) -> Session {
        Session {
            phase: SessionPhase::Init,
            setup,
            recorded: Vec::new(),
            calibration: None,
            recognizer: None,
            seq: SeqTracker::default(),
            next_seq: 0,
            corrector: Box::new(PassThrough),
        }
    }

    /// A session already past configuration, running on `cal`.
    pub fn running(setup: SessionSetup, cal: GloveCalibration) -> Session {
        let mut s = Session::new(setup);
        s.phase = SessionPhase::Configuring;
        s.enter_running(cal);
        s
    }

    pub fn with_corrector(mut self, corrector: Box<dyn ErrorCorrection>) -> Session {
        self.corrector = corrector;
        self
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn calibration(&self) -> Option<&GloveCalibration> {
        self.calibration.as_ref()
    }

    pub fn recorded_frames(&self) -> usize {
        self.recorded.len()
    }

    pub fn frame_gaps(&self) -> u64 {
        self.seq.gaps()
    }

    pub fn unclassified_segments(&self) -> u64 {
        self.recognizer.as_ref().map_or(0, Recognizer::unclassified_segments)
    }

    fn require(&self, op: &'static str, required: SessionPhase) -> Result<(), SessionError> {
        if self.phase == required {
            Ok(())
        } else {
            Err(SessionError::WrongPhase {
                op,
                required,
                actual: self.phase,
            })
        }
    }

    pub fn begin_configuration(&mut self) -> Result<(), SessionError> {
        if self.phase != SessionPhase::Init {
            return Err(SessionError::IllegalTransition {
                from: self.phase,
                to: SessionPhase::Configuring,
            });
        }
        self.phase = SessionPhase::Configuring;
        Ok(())
    }

    pub fn record_raw(&mut self, frame: RawFrame) -> Result<(), SessionError> {
        self.require("recording configuration frames", SessionPhase::Configuring)?;
        self.recorded.push(frame);
        Ok(())
    }

    /// Clusters the recorded frames. On success the session is `Running`;
    /// on failure it stays `Configuring` with the recording cleared so the
    /// user can repeat the routine.
    pub fn calibrate_now(&mut self) -> Result<GloveCalibration, SessionError> {
        self.require("calibration", SessionPhase::Configuring)?;
        let recorded = std::mem::take(&mut self.recorded);
        let required = min_config_samples();
        if recorded.len() < required {
            return Err(CalibrationError::TraceTooShort {
                samples: recorded.len(),
                required,
            }
            .into());
        }
        let cal = calibrate_flex(recorded.iter().map(|f| f.flex))?;
        self.enter_running(cal);
        Ok(cal)
    }

    /// Uses a stored calibration instead of recording one.
    pub fn install_calibration(&mut self, cal: GloveCalibration) -> Result<(), SessionError> {
        self.require("installing a calibration", SessionPhase::Configuring)?;
        self.enter_running(cal);
        Ok(())
    }

    fn enter_running(&mut self, cal: GloveCalibration) {
        let word = self.setup.model.as_ref().map(|model| WordStage {
            model: Arc::clone(model),
            spec: self.setup.window,
            rate_hz: self.setup.rate_hz,
        });
        self.recognizer = Some(Recognizer::new(Arc::new(build_code_map()), self.setup.params, word));
        self.calibration = Some(cal);
        self.recorded.clear();
        self.phase = SessionPhase::Running;
    }

    pub fn push_encoded(&mut self, frame: EncodedFrame) -> Result<Option<Emission>, SessionError> {
        self.require("recognition", SessionPhase::Running)?;
        self.seq.observe(frame.seq);
        let recognizer = self.recognizer.as_mut().expect("running sessions have a recognizer");
        Ok(recognizer.push_frame(frame).and_then(|e| self.corrector.correct(e)))
    }

    pub fn push_raw(&mut self, raw: &RawFrame) -> Result<Option<Emission>, SessionError> {
        self.require("recognition", SessionPhase::Running)?;
        let cal = self.calibration.expect("running sessions are calibrated");
        self.push_encoded(encode_raw(raw, &cal))
    }

    /// Encodes a sample with the session's own sequence counter.
    pub fn push_sample(&mut self, sample: &RawSample) -> Result<Option<Emission>, SessionError> {
        self.require("recognition", SessionPhase::Running)?;
        let cal = self.calibration.expect("running sessions are calibrated");
        let frame = encode_frame(sample, &cal, self.next_seq);
        self.next_seq = (self.next_seq + 1) % SEQ_MODULUS;
        self.push_encoded(frame)
    }

    /// End of input: flushes an open motion segment.
    pub fn finish(&mut self) -> Option<Emission> {
        self.recognizer
            .as_mut()?
            .finish()
            .and_then(|e| self.corrector.correct(e))
    }

    /// Handles one protocol line and returns the reply lines (each ending
    /// in `\n`).
    pub fn handle_line(&mut self, line: &str) -> Vec<String> {
        let body = line.strip_suffix('\n').unwrap_or(line);
        if let Some(cmd) = body.strip_prefix("CMD;") {
            return vec![self.handle_command(cmd)];
        }
        let frame = match parse_wire_frame(body) {
            Ok(f) => f,
            Err(_) => return vec!["ERR;malformed\n".to_string()],
        };
        let result = match (self.phase, frame) {
            (SessionPhase::Init, _) => return vec!["ERR;not-configuring\n".to_string()],
            (SessionPhase::Configuring, WireFrame::Encoded(_)) => return vec!["ERR;not-calibrated\n".to_string()],
            (SessionPhase::Configuring, WireFrame::Raw(raw)) => self.record_raw(raw).map(|_| None),
            (SessionPhase::Running, WireFrame::Raw(raw)) => self.push_raw(&raw),
            (SessionPhase::Running, WireFrame::Encoded(f)) => self.push_encoded(f),
        };
        match result {
            Ok(Some(emission)) => vec![emission.to_line()],
            Ok(None) => Vec::new(),
            Err(e) => vec![format!("ERR;{}\n", error_tag(&e))],
        }
    }

    fn handle_command(&mut self, cmd: &str) -> String {
        match cmd {
            "calibrate" => match self.phase {
                SessionPhase::Configuring => match self.calibrate_now() {
                    Ok(_) => "CAL;ok\n".to_string(),
                    Err(SessionError::Calibration(CalibrationError::ClusterCollapse { finger: Some(f) })) => {
                        format!("CAL;err;{f}\n")
                    }
                    Err(SessionError::Calibration(CalibrationError::TraceTooShort { .. })) => {
                        "CAL;err;too-short\n".to_string()
                    }
                    Err(e) => format!("CAL;err;{}\n", error_tag(&e)),
                },
                SessionPhase::Running => "ERR;already-calibrated\n".to_string(),
                SessionPhase::Init => "ERR;not-configuring\n".to_string(),
            },
            _ => "ERR;unknown-command\n".to_string(),
        }
    }

    /// Reply lines for end of input.
    pub fn close(&mut self) -> Vec<String> {
        self.finish().map(|e| e.to_line()).into_iter().collect()
    }
}

fn error_tag(e: &SessionError) -> &'static str {
    match e {
        SessionError::WrongPhase {
            required: SessionPhase::Running,
            ..
        } => "not-calibrated",
        SessionError::WrongPhase { .. } | SessionError::IllegalTransition { .. } => "wrong-phase",
        SessionError::Calibration(_) => "calibration",
    }
}
