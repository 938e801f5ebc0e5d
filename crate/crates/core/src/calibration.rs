//! Configuration phase: learn the straight / half-bend / full-bend ADC ranges
//! of each finger by clustering the flex readings recorded right after
//! power-on, then quantize run-phase readings against them.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::glovesim::{Finger, RawSample, ADC_MAX, FINGER_COUNT, NOMINAL_RATE_HZ};

/// Shortest configuration recording accepted by [`calibrate`].
pub const MIN_CONFIG_SECONDS: f64 = 5.0;
/// |a_z| at or above this (in g) reads as a horizontal palm.
pub const ORIENTATION_THRESHOLD_G: f64 = 0.6;

const MAX_LLOYD_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("flex data collapsed to fewer than three clusters{}", finger_suffix(.finger))]
    ClusterCollapse { finger: Option<Finger> },
    #[error("configuration trace too short: {samples} samples, need {required}")]
    TraceTooShort { samples: usize, required: usize },
    #[error("malformed calibration: {0}")]
    Malformed(String),
}

fn finger_suffix(finger: &Option<Finger>) -> String {
    finger.map(|f| format!(" on {f}")).unwrap_or_default()
}

/// Three ascending flex-state centroids for one finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerCalibration {
    centroids: [f64; 3],
}

impl FingerCalibration {
    pub fn new(centroids: [f64; 3]) -> Result<Self, CalibrationError> {
        let [c1, c2, c3] = centroids;
        let in_range = centroids
            .iter()
            .all(|c| c.is_finite() && (0.0..=f64::from(ADC_MAX)).contains(c));
        if !in_range || !(c1 < c2 && c2 < c3) {
            return Err(CalibrationError::Malformed(format!(
                "centroids must be strictly ascending within the ADC range, got {centroids:?}"
            )));
        }
        Ok(FingerCalibration { centroids })
    }

    pub fn centroids(&self) -> [f64; 3] {
        self.centroids
    }

    /// Straight/half boundary.
    pub fn b12(&self) -> f64 {
        (self.centroids[0] + self.centroids[1]) / 2.0
    }

    /// Half/full boundary.
    pub fn b23(&self) -> f64 {
        (self.centroids[1] + self.centroids[2]) / 2.0
    }
}

/// Calibration for all five fingers, thumb first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GloveCalibration {
    pub fingers: [FingerCalibration; FINGER_COUNT],
}

impl GloveCalibration {
    pub fn finger(&self, finger: Finger) -> &FingerCalibration {
        &self.fingers[finger.index()]
    }
}

/// Calibration file: one `<finger>:c1,c2,c3` line per finger, two decimals.
impl fmt::Display for GloveCalibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finger in Finger::ALL {
            let [c1, c2, c3] = self.finger(finger).centroids;
            writeln!(f, "{finger}:{c1:.2},{c2:.2},{c3:.2}")?;
        }
        Ok(())
    }
}

impl FromStr for GloveCalibration {
    type Err = CalibrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut slots: [Option<FingerCalibration>; FINGER_COUNT] = [None; FINGER_COUNT];
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (name, values) = line
                .split_once(':')
                .ok_or_else(|| CalibrationError::Malformed(format!("missing ':' in {line:?}")))?;
            let finger = Finger::from_name(name)
                .ok_or_else(|| CalibrationError::Malformed(format!("unknown finger {name:?}")))?;
            let parsed: Vec<f64> = values
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CalibrationError::Malformed(format!("bad centroid in {line:?}")))?;
            let centroids: [f64; 3] = parsed
                .try_into()
                .map_err(|_| CalibrationError::Malformed(format!("expected three centroids in {line:?}")))?;
            if slots[finger.index()].is_some() {
                return Err(CalibrationError::Malformed(format!("{finger} listed twice")));
            }
            slots[finger.index()] = Some(FingerCalibration::new(centroids)?);
        }
        let mut fingers = [FingerCalibration {
            centroids: [0.0, 1.0, 2.0],
        }; FINGER_COUNT];
        for finger in Finger::ALL {
            fingers[finger.index()] =
                slots[finger.index()].ok_or_else(|| CalibrationError::Malformed(format!("{finger} missing")))?;
        }
        Ok(GloveCalibration { fingers })
    }
}

/// One-dimensional Lloyd's k-means with k = 3.
///
/// Initialised at the minimum, median and maximum of the data, so the result
/// does not depend on input order. Iterates until assignments stop changing
/// (at most 100 rounds). An empty cluster is reseeded once at the point
/// farthest from its centroid; a second empty cluster is a collapse.
pub fn kmeans3(values: &[f64]) -> Result<[f64; 3], CalibrationError> {
    let collapse = CalibrationError::ClusterCollapse { finger: None };
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.len() != values.len() {
        return Err(collapse);
    }
    sorted.sort_by(f64::total_cmp);
    let distinct = {
        let mut d = sorted.clone();
        d.dedup();
        d.len()
    };
    if distinct < 3 {
        return Err(collapse);
    }

    let mut centroids = [sorted[0], sorted[(sorted.len() - 1) / 2], sorted[sorted.len() - 1]];
    let mut assignment: Vec<usize> = vec![usize::MAX; sorted.len()];
    let mut repaired = false;

    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for (slot, &v) in assignment.iter_mut().zip(&sorted) {
            let nearest = nearest_centroid(&centroids, v);
            if *slot != nearest {
                *slot = nearest;
                changed = true;
            }
        }

        let mut sums = [0.0f64; 3];
        let mut counts = [0usize; 3];
        for (&k, &v) in assignment.iter().zip(&sorted) {
            sums[k] += v;
            counts[k] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            if repaired {
                return Err(collapse);
            }
            repaired = true;
            let (far_idx, _) = sorted
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, (v - centroids[assignment[i]]).abs()))
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, cur| {
                        if cur.1 > best.1 {
                            cur
                        } else {
                            best
                        }
                    },
                );
            centroids[empty] = sorted[far_idx];
            continue;
        }
        if !changed {
            break;
        }
        for k in 0..3 {
            centroids[k] = sums[k] / counts[k] as f64;
        }
    }

    centroids.sort_by(f64::total_cmp);
    if !(centroids[0] < centroids[1] && centroids[1] < centroids[2]) {
        return Err(collapse);
    }
    Ok(centroids)
}

/// Index of the closest centroid; an exact tie goes to the lower index.
fn nearest_centroid(centroids: &[f64; 3], v: f64) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if (v - centroids[k]).abs() < (v - centroids[best]).abs() {
            best = k;
        }
    }
    best
}

/// Minimum sample count for a configuration trace at the nominal rate.
pub fn min_config_samples() -> usize {
    (MIN_CONFIG_SECONDS * NOMINAL_RATE_HZ).round() as usize
}

/// Clusters every finger channel of a configuration-phase recording.
pub fn calibrate(config_trace: &[RawSample]) -> Result<GloveCalibration, CalibrationError> {
    let required = min_config_samples();
    if config_trace.len() < required {
        return Err(CalibrationError::TraceTooShort {
            samples: config_trace.len(),
            required,
        });
    }
    calibrate_flex(config_trace.iter().map(|s| s.flex))
}

/// Same as [`calibrate`] without the duration check, over bare flex readings.
pub fn calibrate_flex(flex: impl Iterator<Item = [u16; FINGER_COUNT]>) -> Result<GloveCalibration, CalibrationError> {
    let mut channels: [Vec<f64>; FINGER_COUNT] = Default::default();
    for reading in flex {
        for (ch, &v) in channels.iter_mut().zip(&reading) {
            ch.push(f64::from(v));
        }
    }
    let mut fingers = [FingerCalibration {
        centroids: [0.0, 1.0, 2.0],
    }; FINGER_COUNT];
    for finger in Finger::ALL {
        let centroids = kmeans3(&channels[finger.index()]).map_err(|e| match e {
            CalibrationError::ClusterCollapse { .. } => CalibrationError::ClusterCollapse { finger: Some(finger) },
            other => other,
        })?;
        fingers[finger.index()] = FingerCalibration::new(centroids)?;
    }
    Ok(GloveCalibration { fingers })
}

/// Finger state digit: 1 straight, 2 half bend, 3 full bend. A reading
/// exactly on a boundary takes the lower state.
pub fn quantize_flex(raw: i32, cal: &FingerCalibration) -> u8 {
    let v = f64::from(raw.clamp(0, i32::from(ADC_MAX)));
    if v <= cal.b12() {
        1
    } else if v <= cal.b23() {
        2
    } else {
        3
    }
}

/// Palm orientation bit: 1 when gravity lies mostly on the palm normal (flat
/// palm), 0 otherwise.
pub fn quantize_orientation(accel: [f64; 3]) -> u8 {
    u8::from(accel[2].abs() >= ORIENTATION_THRESHOLD_G)
}
