//! Synthesize a scripted glove performance and print it as a raw trace.
//!
//! ```text
//! cargo run --example simulate_trace
//! ```

use smartglove::glovesim::{format_trace_line, synthesize, SensorProfile};
use smartglove::templates::parse_script_spec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = SensorProfile::default().with_seed(1);
    let script = parse_script_spec("alphabet:H+alphabet:I+word:hello", 2000, &profile)?;
    let trace = synthesize(&script, &profile, 20.0)?;

    println!("# {} samples, {} ms", trace.len(), script.duration_ms);
    for sample in trace.iter().step_by(10) {
        println!("{}", format_trace_line(sample));
    }
    Ok(())
}
