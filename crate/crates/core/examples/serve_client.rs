//! Start the line-protocol server and drive it as a glove would: raw frames
//! for the configuration phase, `CMD;calibrate`, then a held letter.
//!
//! ```text
//! cargo run --example serve_client
//! ```

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpStream};
use std::thread;

use smartglove::encoding::{serialize_raw_frame, RawFrame};
use smartglove::glovesim::{config_phase_script, synthesize, SensorProfile};
use smartglove::serve::Server;
use smartglove::session::SessionSetup;
use smartglove::templates::letter_script;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = Server::bind("127.0.0.1:0", SessionSetup::default(), None)?;
    let addr = server.local_addr()?;
    let handle = thread::spawn(move || server.run(Some(1)));

    let profile = SensorProfile::default().with_seed(5);
    let config = synthesize(&config_phase_script(&profile), &profile, 20.0)?;
    let letter = synthesize(&letter_script('W', 2000)?, &profile, 20.0)?;

    let mut stream = TcpStream::connect(addr)?;
    let mut lines = String::new();
    for (seq, s) in config.iter().chain(&letter).enumerate() {
        lines.push_str(&serialize_raw_frame(&RawFrame::from_sample(s, seq as u32)));
        if seq + 1 == config.len() {
            lines.push_str("CMD;calibrate\n");
        }
    }
    stream.write_all(lines.as_bytes())?;
    stream.shutdown(Shutdown::Write)?;

    for line in BufReader::new(stream).lines() {
        println!("server: {}", line?);
    }
    handle.join().expect("server thread")?;
    Ok(())
}
