//! Recognize words and letters in one continuous stream.
//!
//! ```text
//! cargo run --release --example word_stream
//! ```

use std::sync::Arc;

use smartglove::corpus::replay;
use smartglove::glovesim::{synthesize, SensorProfile};
use smartglove::session::SessionSetup;
use smartglove::templates::{calibrate_profile, parse_script_spec, word_training_set, CorpusSpec};
use smartglove::wordmodel::{train, TreeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = train(&word_training_set(&CorpusSpec::default())?, TreeParams::default())?;
    let setup = SessionSetup {
        model: Some(Arc::new(model)),
        ..SessionSetup::default()
    };

    let profile = SensorProfile::default().with_seed(30);
    let cal = calibrate_profile(&profile, 20.0)?;
    for spec in [
        "alphabet:H+word:hello+alphabet:I",
        "rest@1s+word:thankyou+rest@1s",
        "alphabet:B+shake@1500ms+alphabet:B",
        "alphabet:I+word:J+alphabet:D+word:Z",
    ] {
        let trace = synthesize(&parse_script_spec(spec, 2000, &profile)?, &profile, 20.0)?;
        let out: Vec<String> = replay(&setup, cal, &trace)
            .iter()
            .map(|e| format!("{}:{}", e.kind.name(), e.text))
            .collect();
        println!("{spec:<40} {}", out.join(" "));
    }
    Ok(())
}
