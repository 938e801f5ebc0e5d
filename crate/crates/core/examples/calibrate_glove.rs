//! Run the configuration phase for a glove and derive per-finger thresholds.
//!
//! ```text
//! cargo run --example calibrate_glove
//! ```

use smartglove::calibration::{calibrate, quantize_flex};
use smartglove::glovesim::{config_phase_script, synthesize, Finger, SensorProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = SensorProfile::default().with_seed(4);
    let config = synthesize(&config_phase_script(&profile), &profile, 20.0)?;
    let cal = calibrate(&config)?;

    print!("{cal}");
    let index = cal.finger(Finger::Index);
    println!("index thresholds: {:.1} / {:.1}", index.b12(), index.b23());
    for raw in [150, 400, 650, 900] {
        println!("index raw {raw:4} -> state {}", quantize_flex(raw, index));
    }
    Ok(())
}
