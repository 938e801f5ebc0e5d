//! Encode samples into wire lines and parse them back.
//!
//! ```text
//! cargo run --example wire_protocol
//! ```

use smartglove::encoding::{encode_frame, parse_wire_frame, serialize_frame, serialize_raw_frame, RawFrame, WireFrame};
use smartglove::glovesim::{synthesize, SensorProfile};
use smartglove::templates::{calibrate_profile, letter_script};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = SensorProfile::default().with_seed(9);
    let cal = calibrate_profile(&profile, 20.0)?;
    let trace = synthesize(&letter_script('L', 250)?, &profile, 20.0)?;

    for (seq, sample) in trace.iter().enumerate() {
        let raw = serialize_raw_frame(&RawFrame::from_sample(sample, seq as u32));
        let encoded = serialize_frame(&encode_frame(sample, &cal, seq as u32));
        print!("{raw}{encoded}");
        match parse_wire_frame(&encoded)? {
            WireFrame::Encoded(frame) => println!("  -> code {} seq {}", frame.code(), frame.seq),
            WireFrame::Raw(_) => unreachable!("an E line parses as encoded"),
        }
    }
    for bad in ["E;1;2333;0,0,0;0,0,0", "X;0"] {
        println!("{bad:?} -> {}", parse_wire_frame(bad).unwrap_err());
    }
    Ok(())
}
