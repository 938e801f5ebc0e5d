//! Software stand-in for the physical glove.
//!
//! A [`GestureScript`] describes what the hand does over time (finger bend,
//! palm orientation and wrist motion). [`synthesize`] turns a script into the
//! 20 Hz stream of [`RawSample`]s the glove's microcontroller would read from
//! its five flex sensors and the MPU: ADC counts for the fingers, g for the
//! accelerometer and degrees/second for the gyroscope.
//!
//! Axis convention: `y` runs along the hand (wrist to fingertips) and `z` is
//! the palm normal. A vertical palm therefore reads gravity on `y`, a flat
//! palm reads it on `z`.

use std::f64::consts::TAU;
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest count of the 10-bit flex ADC.
pub const ADC_MAX: u16 = 1023;
/// Accelerometer full scale, in g.
pub const ACCEL_RANGE_G: f64 = 2.0;
/// Gyroscope full scale, in degrees/second.
pub const GYRO_RANGE_DPS: f64 = 500.0;
/// The glove transmits one sample every 50 ms.
pub const NOMINAL_RATE_HZ: f64 = 20.0;
pub const FINGER_COUNT: usize = 5;

const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid gesture script: {0}")]
    InvalidScript(String),
    #[error("invalid sensor profile: {0}")]
    InvalidProfile(String),
    #[error("sample rate must be in (0, 1000] Hz, got {0}")]
    InvalidRate(f64),
    #[error("malformed trace line: {0}")]
    MalformedTrace(String),
}

/// Finger order used everywhere in the pipeline: thumb first, little last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl Finger {
    pub const ALL: [Finger; FINGER_COUNT] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Little,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }

    pub fn from_name(name: &str) -> Option<Finger> {
        Finger::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One reading of every sensor on the glove.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub t_ms: u64,
    /// ADC counts, thumb..little.
    pub flex: [u16; FINGER_COUNT],
    /// g
    pub accel: [f64; 3],
    /// dps
    pub gyro: [f64; 3],
}

impl RawSample {
    /// Checks the per-sample range invariants (timestamps are checked per trace).
    pub fn in_range(&self) -> bool {
        self.flex.iter().all(|&f| f <= ADC_MAX)
            && self.accel.iter().all(|a| a.is_finite() && a.abs() <= ACCEL_RANGE_G)
            && self.gyro.iter().all(|g| g.is_finite() && g.abs() <= GYRO_RANGE_DPS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

impl Orientation {
    /// Gravity as seen by the accelerometer at rest.
    pub fn gravity(self) -> [f64; 3] {
        match self {
            Orientation::Vertical => [0.0, -1.0, 0.0],
            Orientation::Horizontal => [0.0, 0.0, -1.0],
        }
    }

    pub fn from_bit(bit: u8) -> Orientation {
        if bit == 0 {
            Orientation::Vertical
        } else {
            Orientation::Horizontal
        }
    }
}

/// Per-axis sinusoidal wrist motion. The gyro reads `amp * sin(2π f t + φ)`;
/// the accelerometer sways around gravity by `sway * cos(2π f t + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionProfile {
    pub gyro_amp_dps: [f64; 3],
    pub freq_hz: [f64; 3],
    pub phase_rad: [f64; 3],
    pub accel_sway_g: [f64; 3],
}

impl MotionProfile {
    pub const STILL: MotionProfile = MotionProfile {
        gyro_amp_dps: [0.0; 3],
        freq_hz: [0.0; 3],
        phase_rad: [0.0; 3],
        accel_sway_g: [0.0; 3],
    };

    fn angle(&self, axis: usize, t_s: f64) -> f64 {
        TAU * self.freq_hz[axis] * t_s + self.phase_rad[axis]
    }

    fn gyro(&self, axis: usize, t_s: f64) -> f64 {
        self.gyro_amp_dps[axis] * self.angle(axis, t_s).sin()
    }

    fn sway(&self, axis: usize, t_s: f64) -> f64 {
        self.accel_sway_g[axis] * self.angle(axis, t_s).cos()
    }
}

/// Hand state that holds from `at_ms` until the next keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub at_ms: u64,
    /// 0 = straight, 1 = full bend; thumb..little.
    pub bend: [f64; FINGER_COUNT],
    pub orientation: Orientation,
    pub motion: MotionProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureScript {
    pub keyframes: Vec<Keyframe>,
    pub duration_ms: u64,
}

impl GestureScript {
    /// A single static hand pose.
    pub fn hold(bend: [f64; FINGER_COUNT], orientation: Orientation, duration_ms: u64) -> Self {
        GestureScript {
            keyframes: vec![Keyframe {
                at_ms: 0,
                bend,
                orientation,
                motion: MotionProfile::STILL,
            }],
            duration_ms,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.keyframes.is_empty() {
            return Err(SimError::InvalidScript("no keyframes".into()));
        }
        if self.duration_ms == 0 {
            return Err(SimError::InvalidScript("duration must be positive".into()));
        }
        for pair in self.keyframes.windows(2) {
            if pair[1].at_ms < pair[0].at_ms {
                return Err(SimError::InvalidScript(format!(
                    "keyframe at {} ms precedes keyframe at {} ms",
                    pair[1].at_ms, pair[0].at_ms
                )));
            }
        }
        for kf in &self.keyframes {
            if kf.bend.iter().any(|b| !(0.0..=1.0).contains(b)) {
                return Err(SimError::InvalidScript(format!(
                    "bend fractions out of [0,1] at {} ms",
                    kf.at_ms
                )));
            }
            let m = &kf.motion;
            let all = m
                .gyro_amp_dps
                .iter()
                .chain(&m.freq_hz)
                .chain(&m.phase_rad)
                .chain(&m.accel_sway_g);
            if all.clone().any(|v| !v.is_finite()) {
                return Err(SimError::InvalidScript(format!(
                    "non-finite motion parameter at {} ms",
                    kf.at_ms
                )));
            }
        }
        Ok(())
    }

    /// Appends `next` after this script, shifting its keyframes in time.
    pub fn then(mut self, next: GestureScript) -> GestureScript {
        let offset = self.duration_ms;
        self.keyframes.extend(next.keyframes.into_iter().map(|mut kf| {
            kf.at_ms += offset;
            kf
        }));
        self.duration_ms += next.duration_ms;
        self
    }

    /// The keyframe in force at `t_ms`.
    pub fn keyframe_at(&self, t_ms: u64) -> &Keyframe {
        let idx = self.keyframes.partition_point(|kf| kf.at_ms <= t_ms);
        &self.keyframes[idx.saturating_sub(1)]
    }
}

/// Electrical and noise characteristics of one glove.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    /// Expected ADC count with the finger straight, thumb..little.
    pub straight_adc: [u16; FINGER_COUNT],
    /// Expected ADC count at full bend, thumb..little.
    pub fullbend_adc: [u16; FINGER_COUNT],
    pub noise_sigma_adc: f64,
    /// Growth of the bend-dependent term per hour of use.
    pub drift_rate: f64,
    /// Hours the sensors have been in use when the trace starts.
    pub hours_in_use: f64,
    pub accel_noise_g: f64,
    pub gyro_noise_dps: f64,
    pub seed: u64,
}

impl Default for SensorProfile {
    fn default() -> Self {
        SensorProfile {
            straight_adc: [210, 185, 180, 190, 200],
            fullbend_adc: [760, 790, 800, 780, 770],
            noise_sigma_adc: 15.0,
            drift_rate: 0.0,
            hours_in_use: 0.0,
            accel_noise_g: 0.01,
            gyro_noise_dps: 1.0,
            seed: 0x5EED,
        }
    }
}

impl SensorProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        for finger in Finger::ALL {
            let (s, f) = (self.straight_adc[finger.index()], self.fullbend_adc[finger.index()]);
            if s >= f || f > ADC_MAX {
                return Err(SimError::InvalidProfile(format!(
                    "{finger}: need 0 <= straight ({s}) < fullbend ({f}) <= {ADC_MAX}"
                )));
            }
        }
        let non_negative = [
            ("noise_sigma_adc", self.noise_sigma_adc),
            ("drift_rate", self.drift_rate),
            ("hours_in_use", self.hours_in_use),
            ("accel_noise_g", self.accel_noise_g),
            ("gyro_noise_dps", self.gyro_noise_dps),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidProfile(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Multiplier applied to the bend-dependent term `elapsed_ms` into a trace.
    pub fn drift_multiplier(&self, elapsed_ms: f64) -> f64 {
        1.0 + self.drift_rate * (self.hours_in_use + elapsed_ms / MS_PER_HOUR)
    }

    /// Noise-free, unclamped flex reading.
    pub fn flex_level(&self, finger: Finger, bend: f64, elapsed_ms: f64) -> f64 {
        let i = finger.index();
        let straight = f64::from(self.straight_adc[i]);
        let span = f64::from(self.fullbend_adc[i]) - straight;
        straight + bend * span * self.drift_multiplier(elapsed_ms)
    }

    /// Noise-free ADC count: the level rounded and clamped to the ADC range.
    pub fn flex_adc(&self, finger: Finger, bend: f64, elapsed_ms: f64) -> u16 {
        to_adc(self.flex_level(finger, bend, elapsed_ms))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn to_adc(level: f64) -> u16 {
    level.round().clamp(0.0, f64::from(ADC_MAX)) as u16
}

/// Rounds to the three decimals carried by trace files and wire frames.
pub fn round3(x: f64) -> f64 {
    // adding 0.0 folds -0.0 into +0.0
    (x * 1000.0).round() / 1000.0 + 0.0
}

/// Number of samples a script of `duration_ms` yields at `rate_hz`.
pub fn sample_count(duration_ms: u64, rate_hz: f64) -> usize {
    let exact = duration_ms as f64 * rate_hz / 1000.0;
    (exact - 1e-9).ceil().max(0.0) as usize
}

/// Renders a script into sensor readings. Deterministic in `profile.seed`.
pub fn synthesize(script: &GestureScript, profile: &SensorProfile, rate_hz: f64) -> Result<Vec<RawSample>, SimError> {
    if !(rate_hz > 0.0 && rate_hz <= 1000.0) {
        return Err(SimError::InvalidRate(rate_hz));
    }
    script.validate()?;
    profile.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let period_ms = 1000.0 / rate_hz;
    let n = sample_count(script.duration_ms, rate_hz);
    let mut out = Vec::with_capacity(n);

    for i in 0..n {
        let elapsed_ms = i as f64 * period_ms;
        let t_ms = elapsed_ms.round() as u64;
        let t_s = elapsed_ms / 1000.0;
        let kf = script.keyframe_at(t_ms);

        let mut flex = [0u16; FINGER_COUNT];
        for finger in Finger::ALL {
            let noise: f64 = rng.sample(StandardNormal);
            let level = profile.flex_level(finger, kf.bend[finger.index()], elapsed_ms);
            flex[finger.index()] = to_adc(level + noise * profile.noise_sigma_adc);
        }

        let gravity = kf.orientation.gravity();
        let mut accel = [0.0; 3];
        let mut gyro = [0.0; 3];
        for (axis, slot) in accel.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            let a = gravity[axis] + kf.motion.sway(axis, t_s) + noise * profile.accel_noise_g;
            *slot = round3(a.clamp(-ACCEL_RANGE_G, ACCEL_RANGE_G));
        }
        for (axis, slot) in gyro.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            let g = kf.motion.gyro(axis, t_s) + noise * profile.gyro_noise_dps;
            *slot = round3(g.clamp(-GYRO_RANGE_DPS, GYRO_RANGE_DPS));
        }

        out.push(RawSample {
            t_ms,
            flex,
            accel,
            gyro,
        });
    }
    Ok(out)
}

/// Bend fractions the configuration-phase script moves each finger through.
pub const CONFIG_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];
const CONFIG_SEGMENTS: usize = 20;
const CONFIG_SEGMENT_MS: u64 = 500;

/// Power-on configuration routine: about ten seconds of fists, open hands
/// and half bends in random order, so every finger visits all three states
/// several times.
pub fn config_phase_script(profile: &SensorProfile) -> GestureScript {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed ^ 0xC0F1_6000);
    let mut per_finger: Vec<Vec<f64>> = Vec::with_capacity(FINGER_COUNT);
    for _ in 0..FINGER_COUNT {
        let mut order: Vec<f64> = (0..CONFIG_SEGMENTS)
            .map(|i| CONFIG_LEVELS[i % CONFIG_LEVELS.len()])
            .collect();
        order.shuffle(&mut rng);
        per_finger.push(order);
    }
    let keyframes = (0..CONFIG_SEGMENTS)
        .map(|seg| {
            let mut bend = [0.0; FINGER_COUNT];
            for (f, order) in per_finger.iter().enumerate() {
                bend[f] = order[seg];
            }
            let orientation = if rng.random_bool(0.5) {
                Orientation::Horizontal
            } else {
                Orientation::Vertical
            };
            Keyframe {
                at_ms: seg as u64 * CONFIG_SEGMENT_MS,
                bend,
                orientation,
                motion: MotionProfile::STILL,
            }
        })
        .collect();
    GestureScript {
        keyframes,
        duration_ms: CONFIG_SEGMENTS as u64 * CONFIG_SEGMENT_MS,
    }
}

/// One trace line: `t_ms,f1,f2,f3,f4,f5,ax,ay,az,gx,gy,gz`.
pub fn format_trace_line(s: &RawSample) -> String {
    let [f1, f2, f3, f4, f5] = s.flex;
    let [ax, ay, az] = s.accel.map(round3);
    let [gx, gy, gz] = s.gyro.map(round3);
    format!(
        "{},{f1},{f2},{f3},{f4},{f5},{ax:.3},{ay:.3},{az:.3},{gx:.3},{gy:.3},{gz:.3}",
        s.t_ms
    )
}

pub fn parse_trace_line(line: &str) -> Result<RawSample, SimError> {
    let bad = |why: &str| SimError::MalformedTrace(format!("{why}: {line:?}"));
    let fields: Vec<&str> = line.trim_end_matches(['\n', '\r']).split(',').collect();
    if fields.len() != 12 {
        return Err(bad("expected 12 fields"));
    }
    let t_ms = fields[0].parse::<u64>().map_err(|_| bad("bad timestamp"))?;
    let mut flex = [0u16; FINGER_COUNT];
    for (slot, field) in flex.iter_mut().zip(&fields[1..6]) {
        *slot = field.parse::<u16>().map_err(|_| bad("bad flex count"))?;
    }
    let mut reals = [0.0f64; 6];
    for (slot, field) in reals.iter_mut().zip(&fields[6..12]) {
        *slot = field.parse::<f64>().map_err(|_| bad("bad real"))?;
    }
    let sample = RawSample {
        t_ms,
        flex,
        accel: [reals[0], reals[1], reals[2]],
        gyro: [reals[3], reals[4], reals[5]],
    };
    if !sample.in_range() {
        return Err(bad("value out of sensor range"));
    }
    Ok(sample)
}

pub fn write_trace<W: Write>(mut out: W, samples: &[RawSample]) -> io::Result<()> {
    for s in samples {
        writeln!(out, "{}", format_trace_line(s))?;
    }
    out.flush()
}

/// Reads a whole trace, failing on the first malformed line.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<RawSample>, TraceReadError> {
    let mut samples: Vec<RawSample> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_trace_line(&line).map_err(|e| TraceReadError::Line(lineno + 1, e))?;
        if let Some(prev) = samples.last() {
            if sample.t_ms <= prev.t_ms {
                return Err(TraceReadError::Line(
                    lineno + 1,
                    SimError::MalformedTrace("timestamps must strictly increase".into()),
                ));
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

#[derive(Debug, Error)]
pub enum TraceReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {0}: {1}")]
    Line(usize, SimError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_noise() -> SensorProfile {
        SensorProfile {
            noise_sigma_adc: 0.0,
            accel_noise_g: 0.0,
            gyro_noise_dps: 0.0,
            ..SensorProfile::default()
        }
    }

    #[test]
    fn static_zero_noise_is_constant_straight() {
        let profile = SensorProfile {
            straight_adc: [180; 5],
            ..zero_noise()
        };
        let script = GestureScript::hold([0.0; 5], Orientation::Vertical, 3000);
        let trace = synthesize(&script, &profile, 20.0).unwrap();
        assert!(trace.iter().all(|s| s.flex == [180; 5]));
        assert!(trace.iter().all(|s| s.accel == [0.0, -1.0, 0.0]));
    }

    #[test]
    fn two_seconds_at_twenty_hz_is_forty_samples() {
        let script = GestureScript::hold([0.5; 5], Orientation::Vertical, 2000);
        let trace = synthesize(&script, &SensorProfile::default(), 20.0).unwrap();
        assert_eq!(trace.len(), 40);
        assert_eq!(trace[1].t_ms, 50);
        assert_eq!(trace[39].t_ms, 1950);
    }

    #[test]
    fn drifted_full_bend_clamps_at_adc_max() {
        // 180 + 600 * 1.5 = 1080, above the 10-bit range
        let profile = SensorProfile {
            straight_adc: [180; 5],
            fullbend_adc: [780; 5],
            drift_rate: 0.5,
            hours_in_use: 1.0,
            ..zero_noise()
        };
        assert_eq!(profile.drift_multiplier(0.0), 1.5);
        assert_eq!(profile.flex_level(Finger::Index, 1.0, 0.0), 1080.0);
        let script = GestureScript::hold([1.0; 5], Orientation::Vertical, 500);
        let trace = synthesize(&script, &profile, 20.0).unwrap();
        assert!(trace.iter().all(|s| s.flex == [1023; 5]));
    }

    #[test]
    fn invalid_scripts_are_rejected() {
        let empty = GestureScript {
            keyframes: vec![],
            duration_ms: 1000,
        };
        assert!(matches!(
            synthesize(&empty, &SensorProfile::default(), 20.0),
            Err(SimError::InvalidScript(_))
        ));
        let zero = GestureScript::hold([0.0; 5], Orientation::Vertical, 0);
        assert!(matches!(
            synthesize(&zero, &SensorProfile::default(), 20.0),
            Err(SimError::InvalidScript(_))
        ));
        let bad_rate = GestureScript::hold([0.0; 5], Orientation::Vertical, 100);
        assert!(synthesize(&bad_rate, &SensorProfile::default(), 0.0).is_err());
    }

    #[test]
    fn config_phase_lasts_about_ten_seconds() {
        let script = config_phase_script(&SensorProfile::default());
        assert!((9000..=11000).contains(&script.duration_ms));
        let trace = synthesize(&script, &SensorProfile::default(), 20.0).unwrap();
        assert!(trace.len() >= 180);
    }

    #[test]
    fn config_phase_visits_every_level_on_every_finger() {
        let profile = zero_noise();
        let trace = synthesize(&config_phase_script(&profile), &profile, 20.0).unwrap();
        for finger in Finger::ALL {
            for level in CONFIG_LEVELS {
                let target = i32::from(profile.flex_adc(finger, level, 0.0));
                let hits = trace
                    .iter()
                    .filter(|s| (i32::from(s.flex[finger.index()]) - target).abs() <= 5)
                    .count();
                assert!(hits >= 20, "{finger} level {level}: {hits} samples");
            }
        }
    }

    #[test]
    fn trace_line_round_trips() {
        let profile = SensorProfile::default();
        let mut script = GestureScript::hold([0.2, 0.4, 0.6, 0.8, 1.0], Orientation::Horizontal, 1000);
        script.keyframes[0].motion.gyro_amp_dps = [120.0, 0.0, 40.0];
        script.keyframes[0].motion.freq_hz = [1.0, 0.0, 2.0];
        let trace = synthesize(&script, &profile, 20.0).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn trace_reader_rejects_bad_lines() {
        assert!(parse_trace_line("0,1,2,3").is_err());
        assert!(parse_trace_line("0,1024,0,0,0,0,0.000,0.000,0.000,0.000,0.000,0.000").is_err());
        assert!(parse_trace_line("0,0,0,0,0,0,2.500,0.000,0.000,0.000,0.000,0.000").is_err());
        let dup =
            "0,1,1,1,1,1,0.000,-1.000,0.000,0.000,0.000,0.000\n0,1,1,1,1,1,0.000,-1.000,0.000,0.000,0.000,0.000\n";
        assert!(read_trace(dup.as_bytes()).is_err());
    }

    #[test]
    fn keyframe_lookup_holds_until_next() {
        let script = GestureScript::hold([0.0; 5], Orientation::Vertical, 500).then(GestureScript::hold(
            [1.0; 5],
            Orientation::Horizontal,
            500,
        ));
        assert_eq!(script.keyframe_at(0).bend, [0.0; 5]);
        assert_eq!(script.keyframe_at(499).bend, [0.0; 5]);
        assert_eq!(script.keyframe_at(500).bend, [1.0; 5]);
        assert_eq!(script.keyframe_at(10_000).orientation, Orientation::Horizontal);
    }
}
