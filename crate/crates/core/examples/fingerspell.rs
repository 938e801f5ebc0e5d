//! Spell a word letter by letter through a calibrated session.
//!
//! ```text
//! cargo run --example fingerspell -- RUST
//! ```

use smartglove::glovesim::{synthesize, SensorProfile};
use smartglove::session::{Session, SessionSetup};
use smartglove::templates::{calibrate_profile, parse_script_spec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let word = std::env::args().nth(1).unwrap_or_else(|| "GLOVE".into()).to_uppercase();
    let profile = SensorProfile::default().with_seed(12);
    let spec: Vec<String> = word.chars().map(|c| format!("alphabet:{c}")).collect();
    let trace = synthesize(&parse_script_spec(&spec.join("+"), 2000, &profile)?, &profile, 20.0)?;

    let mut session = Session::running(SessionSetup::default(), calibrate_profile(&profile, 20.0)?);
    let mut spelled = String::new();
    for sample in &trace {
        if let Some(emission) = session.push_sample(sample)? {
            print!("{}", emission.to_line());
            spelled.push_str(&emission.text);
        }
    }
    session.finish();
    println!("spelled {spelled:?} from {} samples", trace.len());
    Ok(())
}
