//! Run-phase encoding and the line-oriented ASCII wire protocol.
//!
//! Two frame kinds share one grammar, selected by the leading tag:
//!
//! ```text
//! E;<seq>;<d1><d2><d3><d4><d5><o>;<ax>,<ay>,<az>;<gx>,<gy>,<gz>
//! R;<seq>;<f1>,<f2>,<f3>,<f4>,<f5>;<ax>,<ay>,<az>;<gx>,<gy>,<gz>
//! ```
//!
//! `E` frames carry quantized finger digits plus the orientation bit, `R`
//! frames carry raw ADC counts (used while the glove is being configured).
//! Reals always have exactly three fractional digits; lines end in LF.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::calibration::{quantize_flex, quantize_orientation, GloveCalibration};
use crate::glovesim::{round3, RawSample, ACCEL_RANGE_G, ADC_MAX, FINGER_COUNT, GYRO_RANGE_DPS};

/// Sequence numbers wrap back to zero here.
pub const SEQ_MODULUS: u32 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

fn malformed(why: impl Into<String>) -> WireError {
    WireError::MalformedFrame(why.into())
}

pub fn next_seq(seq: u32) -> u32 {
    (seq + 1) % SEQ_MODULUS
}

/// A quantized run-phase frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    pub seq: u32,
    /// Finger states thumb..little, each 1, 2 or 3.
    pub digits: [u8; FINGER_COUNT],
    pub orient: u8,
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
}

impl EncodedFrame {
    pub fn is_valid(&self) -> bool {
        self.seq < SEQ_MODULUS
            && self.digits.iter().all(|d| (1..=3).contains(d))
            && self.orient <= 1
            && self.accel.iter().all(|a| a.abs() <= ACCEL_RANGE_G)
            && self.gyro.iter().all(|g| g.abs() <= GYRO_RANGE_DPS)
    }

    pub fn code(&self) -> GestureCode {
        gesture_code(self)
    }

    /// Digits, orientation, accel, gyro as twelve numeric channels.
    pub fn channels(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (slot, &d) in out.iter_mut().zip(&self.digits) {
            *slot = f64::from(d);
        }
        out[5] = f64::from(self.orient);
        out[6..9].copy_from_slice(&self.accel);
        out[9..12].copy_from_slice(&self.gyro);
        out
    }
}

/// A raw configuration-phase frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub seq: u32,
    pub flex: [u16; FINGER_COUNT],
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
}

impl RawFrame {
    pub fn from_sample(sample: &RawSample, seq: u32) -> RawFrame {
        RawFrame {
            seq: seq % SEQ_MODULUS,
            flex: sample.flex,
            accel: sample.accel.map(round3),
            gyro: sample.gyro.map(round3),
        }
    }
}

/// Five finger digits followed by the orientation bit, e.g. `233330`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GestureCode([u8; 6]);

impl GestureCode {
    pub fn from_parts(digits: [u8; FINGER_COUNT], orient: u8) -> GestureCode {
        let mut bytes = [0u8; 6];
        for (b, d) in bytes.iter_mut().zip(digits) {
            *b = b'0' + d;
        }
        bytes[5] = b'0' + orient;
        GestureCode(bytes)
    }

    pub fn as_str(&self) -> &str {
        // always ASCII digits by construction
        std::str::from_utf8(&self.0).expect("gesture code is ASCII")
    }

    pub fn digits(&self) -> [u8; FINGER_COUNT] {
        let mut out = [0u8; FINGER_COUNT];
        for (o, b) in out.iter_mut().zip(&self.0) {
            *o = b - b'0';
        }
        out
    }

    pub fn orient(&self) -> u8 {
        self.0[5] - b'0'
    }
}

impl FromStr for GestureCode {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != 6 {
            return Err(malformed(format!("gesture code {s:?} must be 6 characters")));
        }
        if !bytes[..5].iter().all(|b| (b'1'..=b'3').contains(b)) {
            return Err(malformed(format!("finger digit out of 1..3 in {s:?}")));
        }
        if !matches!(bytes[5], b'0' | b'1') {
            return Err(malformed(format!("orientation bit must be 0 or 1 in {s:?}")));
        }
        let mut code = [0u8; 6];
        code.copy_from_slice(bytes);
        Ok(GestureCode(code))
    }
}

impl fmt::Display for GestureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn encode_frame(sample: &RawSample, cal: &GloveCalibration, seq: u32) -> EncodedFrame {
    encode_raw(&RawFrame::from_sample(sample, seq), cal)
}

pub fn encode_raw(raw: &RawFrame, cal: &GloveCalibration) -> EncodedFrame {
    let mut digits = [0u8; FINGER_COUNT];
    for (i, d) in digits.iter_mut().enumerate() {
        *d = quantize_flex(i32::from(raw.flex[i]), &cal.fingers[i]);
    }
    EncodedFrame {
        seq: raw.seq % SEQ_MODULUS,
        digits,
        orient: quantize_orientation(raw.accel),
        accel: raw.accel.map(round3),
        gyro: raw.gyro.map(round3),
    }
}

pub fn gesture_code(frame: &EncodedFrame) -> GestureCode {
    GestureCode::from_parts(frame.digits, frame.orient)
}

fn write_reals(out: &mut String, reals: &[f64; 3]) {
    let [x, y, z] = reals.map(round3);
    out.push_str(&format!("{x:.3},{y:.3},{z:.3}"));
}

/// `E;<seq>;<code>;<accel>;<gyro>\n`
pub fn serialize_frame(frame: &EncodedFrame) -> String {
    let mut line = format!("E;{};{};", frame.seq, frame.code());
    write_reals(&mut line, &frame.accel);
    line.push(';');
    write_reals(&mut line, &frame.gyro);
    line.push('\n');
    line
}

/// `R;<seq>;<f1>,..,<f5>;<accel>;<gyro>\n`
pub fn serialize_raw_frame(frame: &RawFrame) -> String {
    let [f1, f2, f3, f4, f5] = frame.flex;
    let mut line = format!("R;{};{f1},{f2},{f3},{f4},{f5};", frame.seq);
    write_reals(&mut line, &frame.accel);
    line.push(';');
    write_reals(&mut line, &frame.gyro);
    line.push('\n');
    line
}

/// Any data frame that can arrive on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum WireFrame {
    Encoded(EncodedFrame),
    Raw(RawFrame),
}

impl WireFrame {
    pub fn seq(&self) -> u32 {
        match self {
            WireFrame::Encoded(f) => f.seq,
            WireFrame::Raw(f) => f.seq,
        }
    }
}

pub fn parse_frame(line: &str) -> Result<EncodedFrame, WireError> {
    match parse_wire_frame(line)? {
        WireFrame::Encoded(f) => Ok(f),
        WireFrame::Raw(_) => Err(malformed("expected an E frame, got R")),
    }
}

pub fn parse_raw_frame(line: &str) -> Result<RawFrame, WireError> {
    match parse_wire_frame(line)? {
        WireFrame::Raw(f) => Ok(f),
        WireFrame::Encoded(_) => Err(malformed("expected an R frame, got E")),
    }
}

pub fn parse_wire_frame(line: &str) -> Result<WireFrame, WireError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    if body.is_empty() {
        return Err(malformed("empty line"));
    }
    if !body.is_ascii() {
        return Err(malformed("non-ASCII bytes"));
    }
    let sections: Vec<&str> = body.split(';').collect();
    if sections.len() != 5 {
        return Err(malformed(format!(
            "expected 5 ';'-separated sections, got {}",
            sections.len()
        )));
    }
    let seq = parse_seq(sections[1])?;
    let accel = parse_triple(sections[3], ACCEL_RANGE_G)?;
    let gyro = parse_triple(sections[4], GYRO_RANGE_DPS)?;
    match sections[0] {
        "E" => {
            let code: GestureCode = sections[2].parse()?;
            Ok(WireFrame::Encoded(EncodedFrame {
                seq,
                digits: code.digits(),
                orient: code.orient(),
                accel,
                gyro,
            }))
        }
        "R" => {
            let counts: Vec<&str> = sections[2].split(',').collect();
            if counts.len() != FINGER_COUNT {
                return Err(malformed("expected five flex counts"));
            }
            let mut flex = [0u16; FINGER_COUNT];
            for (slot, field) in flex.iter_mut().zip(counts) {
                *slot = parse_unsigned(field, 4)
                    .filter(|&v| v <= u32::from(ADC_MAX))
                    .ok_or_else(|| malformed(format!("bad flex count {field:?}")))? as u16;
            }
            Ok(WireFrame::Raw(RawFrame { seq, flex, accel, gyro }))
        }
        other => Err(malformed(format!("unknown frame tag {other:?}"))),
    }
}

fn parse_unsigned(field: &str, max_len: usize) -> Option<u32> {
    if field.is_empty() || field.len() > max_len || !field.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    field.parse().ok()
}

fn parse_seq(field: &str) -> Result<u32, WireError> {
    parse_unsigned(field, 6)
        .filter(|&s| s < SEQ_MODULUS)
        .ok_or_else(|| malformed(format!("bad sequence number {field:?}")))
}

/// `-?\d+\.\d{3}`, within `±limit`.
fn parse_real(field: &str, limit: f64) -> Result<f64, WireError> {
    let unsigned = field.strip_prefix('-').unwrap_or(field);
    let ok = match unsigned.split_once('.') {
        Some((int, frac)) => {
            !int.is_empty()
                && int.len() <= 4
                && int.bytes().all(|b| b.is_ascii_digit())
                && frac.len() == 3
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    };
    if !ok {
        return Err(malformed(format!("bad real {field:?}")));
    }
    let value: f64 = field.parse().map_err(|_| malformed(format!("bad real {field:?}")))?;
    if value.abs() > limit {
        return Err(malformed(format!("{field} outside ±{limit}")));
    }
    Ok(value + 0.0)
}

fn parse_triple(section: &str, limit: f64) -> Result<[f64; 3], WireError> {
    let parts: Vec<&str> = section.split(',').collect();
    if parts.len() != 3 {
        return Err(malformed(format!("expected three reals in {section:?}")));
    }
    Ok([
        parse_real(parts[0], limit)?,
        parse_real(parts[1], limit)?,
        parse_real(parts[2], limit)?,
    ])
}

/// Reports non-contiguous sequence numbers. Gaps are informational only.
#[derive(Debug, Default, Clone)]
pub struct SeqTracker {
    expected: Option<u32>,
    gaps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGap {
    pub expected: u32,
    pub got: u32,
}

impl SeqTracker {
    pub fn observe(&mut self, seq: u32) -> Option<FrameGap> {
        let gap = match self.expected {
            Some(expected) if expected != seq => {
                self.gaps += 1;
                Some(FrameGap { expected, got: seq })
            }
            _ => None,
        };
        self.expected = Some(next_seq(seq));
        gap
    }

    pub fn gaps(&self) -> u64 {
        self.gaps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::FingerCalibration;

    fn calibration() -> GloveCalibration {
        let f = FingerCalibration::new([200.0, 500.0, 800.0]).unwrap();
        GloveCalibration { fingers: [f; 5] }
    }

    fn sample(flex: [u16; 5], accel: [f64; 3]) -> RawSample {
        RawSample {
            t_ms: 0,
            flex,
            accel,
            gyro: [0.0; 3],
        }
    }

    #[test]
    fn straight_vertical_and_full_horizontal() {
        let f = encode_frame(&sample([200; 5], [0.0, -1.0, 0.0]), &calibration(), 0);
        assert_eq!(f.digits, [1; 5]);
        assert_eq!(f.orient, 0);
        let f = encode_frame(&sample([800; 5], [0.0, 0.0, -1.0]), &calibration(), 0);
        assert_eq!(f.digits, [3; 5]);
        assert_eq!(f.orient, 1);
        assert_eq!(f.code().as_str(), "333331");
    }

    #[test]
    fn gesture_code_concatenates_digits_then_orientation() {
        let mut frame = EncodedFrame {
            seq: 0,
            digits: [2, 3, 3, 3, 3],
            orient: 0,
            accel: [0.0; 3],
            gyro: [0.0; 3],
        };
        assert_eq!(frame.code().as_str(), "233330");
        frame.digits = [1; 5];
        frame.orient = 1;
        assert_eq!(frame.code().as_str(), "111111");
        frame.digits = [3, 1, 1, 2, 2];
        frame.orient = 0;
        assert_eq!(frame.code().as_str(), "311220");
    }

    #[test]
    fn serializes_exact_line() {
        let frame = EncodedFrame {
            seq: 7,
            digits: [2, 3, 3, 3, 3],
            orient: 0,
            accel: [0.0, -1.0, 0.0],
            gyro: [0.0, 0.0, 0.0],
        };
        assert_eq!(
            serialize_frame(&frame),
            "E;7;233330;0.000,-1.000,0.000;0.000,0.000,0.000\n"
        );
        assert_eq!(parse_frame(&serialize_frame(&frame)).unwrap(), frame);
    }

    #[test]
    fn negative_zero_is_written_unsigned() {
        let frame = EncodedFrame {
            seq: 1,
            digits: [1; 5],
            orient: 0,
            accel: [-0.0, -0.0001, 0.0],
            gyro: [-0.0; 3],
        };
        assert_eq!(
            serialize_frame(&frame),
            "E;1;111110;0.000,0.000,0.000;0.000,0.000,0.000\n"
        );
    }

    #[test]
    fn sequence_wraps() {
        assert_eq!(next_seq(999_999), 0);
        assert_eq!(next_seq(5), 6);
        let f = encode_frame(&sample([200; 5], [0.0, -1.0, 0.0]), &calibration(), 1_000_003);
        assert_eq!(f.seq, 3);
    }

    #[test]
    fn parses_letter_d() {
        let f = parse_frame("E;0;313330;0.000,-1.000,0.000;0.000,0.000,0.000\n").unwrap();
        assert_eq!(f.code().as_str(), "313330");
        assert_eq!(f.accel, [0.0, -1.0, 0.0]);
    }

    #[test]
    fn rejects_grammar_violations() {
        let bad = [
            "",
            "\n",
            "E;0;413330;0.000,-1.000,0.000;0.000,0.000,0.000\n",
            "E;0;31333;0.000,-1.000,0.000;0.000,0.000,0.000",
            "E;0;313332;0.000,-1.000,0.000;0.000,0.000,0.000",
            "E;0;313330;0.000,-1.000;0.000,0.000,0.000",
            "E;0;313330;0.00,-1.000,0.000;0.000,0.000,0.000",
            "E;0;313330;0.000,-2.500,0.000;0.000,0.000,0.000",
            "E;0;313330;0.000,-1.000,0.000;0.000,0.000,600.000",
            "E;1000000;313330;0.000,-1.000,0.000;0.000,0.000,0.000",
            "E;-1;313330;0.000,-1.000,0.000;0.000,0.000,0.000",
            "E; 1;313330;0.000,-1.000,0.000;0.000,0.000,0.000",
            "X;1;313330;0.000,-1.000,0.000;0.000,0.000,0.000",
            "E;1;313330;0.000,-1.000,0.000;0.000,0.000,0.000;",
            "E;1;313330;0.000,-1.000,0.000;0.000,0.000,0.000\r\n",
            "R;1;100,200,300,400;0.000,-1.000,0.000;0.000,0.000,0.000",
            "R;1;100,200,300,400,1024;0.000,-1.000,0.000;0.000,0.000,0.000",
        ];
        for line in bad {
            assert!(
                matches!(parse_wire_frame(line), Err(WireError::MalformedFrame(_))),
                "accepted {line:?}"
            );
        }
    }

    #[test]
    fn raw_frame_round_trip() {
        let raw = RawFrame {
            seq: 42,
            flex: [0, 180, 512, 780, 1023],
            accel: [0.012, -0.998, 0.031],
            gyro: [-12.5, 0.0, 499.999],
        };
        let line = serialize_raw_frame(&raw);
        assert_eq!(
            line,
            "R;42;0,180,512,780,1023;0.012,-0.998,0.031;-12.500,0.000,499.999\n"
        );
        assert_eq!(parse_raw_frame(&line).unwrap(), raw);
        assert!(parse_frame(&line).is_err());
    }

    #[test]
    fn seq_tracker_reports_gaps() {
        let mut t = SeqTracker::default();
        assert_eq!(t.observe(0), None);
        assert_eq!(t.observe(1), None);
        assert_eq!(t.observe(3), Some(FrameGap { expected: 2, got: 3 }));
        assert_eq!(
            t.observe(999_999),
            Some(FrameGap {
                expected: 4,
                got: 999_999
            })
        );
        assert_eq!(t.observe(0), None);
        assert_eq!(t.gaps(), 2);
    }
}
