//! Smart-glove sign-language pipeline.
//!
//! The glove side reads five flex sensors and an IMU, learns per-finger
//! bend states during a short configuration phase, and streams quantized
//! frames over a line-based ASCII protocol. The host side buffers those
//! frames, spells out static letters from the finger/palm code, and
//! classifies moving gestures (words, J, Z) with a decision tree.
//!
//! | module | role |
//! |---|---|
//! | [`glovesim`] | synthetic sensor traces standing in for the hardware |
//! | [`calibration`] | k-means configuration phase and quantizers |
//! | [`encoding`] | run-phase frames and the wire grammar |
//! | [`recognition`] | ring buffer, routing, alphabet lookup, dedup |
//! | [`wordmodel`] | derivative features and the CART word classifier |
//! | [`templates`] | scripted letters, word motions and corpora |
//! | [`corpus`] | trace corpora on disk and evaluation reports |
//! | [`session`] | phase machine shared by file replay and the TCP server |
//! | [`serve`] | single-client TCP endpoint |
//!
//! | [`config`] | session settings and sensor profile files |
//!
//! ## Examples
//!
//! One runnable walkthrough per capability, `cargo run --example <name>`:
//!
//! - **`simulate_trace`** - script a performance and synthesize its raw trace
//! - **`calibrate_glove`** - configuration phase to per-finger thresholds
//! - **`wire_protocol`** - `R`/`E` lines out and back, and what gets rejected
//! - **`fingerspell`** - letters through a calibrated session
//! - **`train_word_model`** - corpus, CART training, held-out score, `.dtree` file
//! - **`word_stream`** - words, J/Z and shakes mixed with letters
//! - **`serve_client`** - the TCP endpoint driven like a glove

pub mod calibration;
pub mod config;
pub mod corpus;
pub mod encoding;
pub mod glovesim;
pub mod recognition;
pub mod serve;
pub mod session;
pub mod templates;
pub mod wordmodel;

pub use calibration::{calibrate, kmeans3, quantize_flex, quantize_orientation, FingerCalibration, GloveCalibration};
pub use encoding::{encode_frame, parse_frame, serialize_frame, EncodedFrame, GestureCode};
pub use glovesim::{synthesize, GestureScript, RawSample, SensorProfile};
pub use recognition::{build_code_map, CodeMap, Emission, EmissionKind, Recognizer, RecognizerParams};
pub use session::{Session, SessionPhase};
pub use wordmodel::{DecisionTreeModel, FeatureVector, WindowSpec, WordLabel};
