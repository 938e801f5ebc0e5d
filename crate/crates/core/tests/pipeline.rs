//! End to end: synthesized hands through calibration, encoding, recognition
//! and the TCP endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::Duration;

use smartglove::calibration::GloveCalibration;
use smartglove::corpus::replay;
use smartglove::encoding::{serialize_raw_frame, RawFrame};
use smartglove::glovesim::{config_phase_script, synthesize, RawSample, SensorProfile};
use smartglove::recognition::{Emission, EmissionKind};
use smartglove::serve::Server;
use smartglove::session::{Session, SessionSetup};
use smartglove::templates::{calibrate_profile, parse_script_spec, word_training_set, CorpusSpec};
use smartglove::wordmodel::{train, DecisionTreeModel, TreeParams};

fn model() -> Arc<DecisionTreeModel> {
    static MODEL: OnceLock<Arc<DecisionTreeModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let spec = CorpusSpec {
                per_class: 80,
                seed: 21,
                ..CorpusSpec::default()
            };
            Arc::new(train(&word_training_set(&spec).unwrap(), TreeParams::default()).unwrap())
        })
        .clone()
}

fn with_model() -> SessionSetup {
    SessionSetup {
        model: Some(model()),
        ..SessionSetup::default()
    }
}

fn cal() -> GloveCalibration {
    calibrate_profile(&SensorProfile::default(), 20.0).unwrap()
}

fn trace(spec: &str, seed: u64) -> Vec<RawSample> {
    let profile = SensorProfile::default().with_seed(seed);
    synthesize(&parse_script_spec(spec, 2000, &profile).unwrap(), &profile, 20.0).unwrap()
}

fn texts(out: &[Emission], kind: EmissionKind) -> Vec<String> {
    out.iter().filter(|e| e.kind == kind).map(|e| e.text.clone()).collect()
}

#[test]
fn every_word_is_recognized_after_a_rest() {
    for word in ["hello", "sorry", "thankyou", "goodbye", "J", "Z"] {
        for seed in 0..5 {
            let out = replay(
                &with_model(),
                cal(),
                &trace(&format!("rest@1s+word:{word}+rest@1s"), 300 + seed),
            );
            assert_eq!(texts(&out, EmissionKind::Word), [word], "{word} seed {seed}: {out:?}");
        }
    }
}

#[test]
fn hello_between_letters() {
    let out = replay(&with_model(), cal(), &trace("alphabet:H+word:hello+alphabet:I", 5));
    let lines: Vec<String> = out.iter().map(|e| format!("{}:{}", e.kind.name(), e.text)).collect();
    assert_eq!(lines, ["alphabet:H", "word:hello", "alphabet:I"]);
}

#[test]
fn j_and_z_are_words_not_letters() {
    for (spec, want) in [("alphabet:I+word:J", "J"), ("alphabet:D+word:Z", "Z")] {
        let out = replay(&with_model(), cal(), &trace(spec, 6));
        assert_eq!(texts(&out, EmissionKind::Word), [want], "{spec}: {out:?}");
        assert!(!texts(&out, EmissionKind::Alphabet).contains(&want.to_string()));
    }
}

#[test]
fn random_shakes_produce_no_word() {
    let mut words = 0;
    for seed in 0..20 {
        let out = replay(
            &with_model(),
            cal(),
            &trace("alphabet:B+shake@1500ms+alphabet:B", 700 + seed),
        );
        words += texts(&out, EmissionKind::Word).len();
        assert_eq!(texts(&out, EmissionKind::Alphabet), ["B", "B"], "seed {seed}: {out:?}");
    }
    assert!(words <= 1, "{words} shakes classified as words");
}

#[test]
fn word_without_model_is_counted_but_not_emitted() {
    let mut session = Session::running(SessionSetup::default(), cal());
    let mut out = Vec::new();
    for s in trace("rest@1s+word:goodbye+rest@1s", 4) {
        out.extend(session.push_sample(&s).unwrap());
    }
    out.extend(session.finish());
    assert!(texts(&out, EmissionKind::Word).is_empty());
    assert_eq!(session.unclassified_segments(), 1);
}

#[test]
fn letter_after_a_word_waits_for_a_full_static_buffer() {
    let out = replay(&with_model(), cal(), &trace("word:sorry+alphabet:K", 2));
    let k = out.iter().find(|e| e.text == "K").expect("K emitted");
    // K starts at frame 40 and needs 30 static frames
    assert!(k.at_seq >= 69, "{out:?}");
}

// ─── serve ───────────────────────────────────────────────────────────────────

fn start(calibration: Option<GloveCalibration>, sessions: usize) -> (String, thread::JoinHandle<()>) {
    let server = Server::bind("127.0.0.1:0", with_model(), calibration).unwrap();
    let addr = server.local_addr().unwrap().to_string();
    let handle = thread::spawn(move || server.run(Some(sessions)).unwrap());
    (addr, handle)
}

fn raw_lines(samples: &[RawSample], first_seq: u32) -> String {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| serialize_raw_frame(&RawFrame::from_sample(s, first_seq + i as u32)))
        .collect()
}

struct Client {
    stream: TcpStream,
    reader: BufReader<TcpStream>,
}

impl Client {
    fn connect(addr: &str) -> Client {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        Client { stream, reader }
    }

    fn send(&mut self, text: &str) {
        self.stream.write_all(text.as_bytes()).unwrap();
    }

    fn reply(&mut self) -> String {
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        line
    }

    fn close(mut self) -> String {
        self.stream.shutdown(Shutdown::Write).unwrap();
        let mut rest = String::new();
        self.reader.read_to_string(&mut rest).unwrap();
        rest
    }
}

#[test]
fn serve_calibrates_then_spells() {
    let (addr, server) = start(None, 1);
    let mut c = Client::connect(&addr);
    c.send("E;0;233330;0.000,-1.000,0.000;0.000,0.000,0.000\n");
    assert_eq!(c.reply(), "ERR;not-calibrated\n");

    let profile = SensorProfile::default().with_seed(31);
    let config = synthesize(&config_phase_script(&profile), &profile, 20.0).unwrap();
    assert_eq!(config.len(), 200);
    c.send(&raw_lines(&config, 0));
    c.send("CMD;calibrate\n");
    assert_eq!(c.reply(), "CAL;ok\n");
    c.send("CMD;calibrate\n");
    assert_eq!(c.reply(), "ERR;already-calibrated\n");

    c.send(&raw_lines(&trace("alphabet:A", 32), 0));
    assert_eq!(c.reply(), "OUT;alphabet;A;29\n");
    c.send(&raw_lines(&trace("alphabet:A", 33), 40));
    assert_eq!(c.close(), "");
    server.join().unwrap();
}

#[test]
fn serve_reports_too_short_and_collapsed_configuration() {
    let (addr, server) = start(None, 1);
    let mut c = Client::connect(&addr);
    let profile = SensorProfile::default().with_seed(3);
    let config = synthesize(&config_phase_script(&profile), &profile, 20.0).unwrap();
    c.send(&raw_lines(&config[..60], 0));
    c.send("CMD;calibrate\n");
    assert_eq!(c.reply(), "CAL;err;too-short\n");

    let still = RawFrame {
        seq: 0,
        flex: [500; 5],
        accel: [0.0, -1.0, 0.0],
        gyro: [0.0; 3],
    };
    for seq in 0..150 {
        c.send(&serialize_raw_frame(&RawFrame { seq, ..still }));
    }
    c.send("CMD;calibrate\n");
    assert_eq!(c.reply(), "CAL;err;thumb\n");

    c.send(&raw_lines(&config, 0));
    c.send("CMD;calibrate\n");
    assert_eq!(c.reply(), "CAL;ok\n");
    c.close();
    server.join().unwrap();
}

#[test]
fn serve_answers_violations_without_dropping_the_client() {
    let (addr, server) = start(Some(cal()), 1);
    let mut c = Client::connect(&addr);
    c.send("hello there\n");
    assert_eq!(c.reply(), "ERR;malformed\n");
    c.send("CMD;reboot\n");
    assert_eq!(c.reply(), "ERR;unknown-command\n");
    c.send(&format!("{}\n", "R".repeat(5000)));
    assert_eq!(c.reply(), "ERR;malformed\n");
    c.send("E;1;233330;0.000,-1.000,0.000;0.000,0.000,0.000\n");
    c.send("\u{0}\u{ff}garbage;;;\n");
    assert_eq!(c.reply(), "ERR;malformed\n");
    c.send(&raw_lines(&trace("alphabet:Y", 9), 2));
    assert_eq!(c.reply(), "OUT;alphabet;Y;30\n");
    c.close();
    server.join().unwrap();
}

#[test]
fn serve_flushes_open_word_on_disconnect() {
    let (addr, server) = start(Some(cal()), 1);
    let mut c = Client::connect(&addr);
    c.send(&raw_lines(&trace("alphabet:L+word:Z", 12), 0));
    assert_eq!(c.reply(), "OUT;alphabet;L;29\n");
    let rest = c.close();
    assert!(rest.starts_with("OUT;word;Z;"), "{rest:?}");
    server.join().unwrap();
}

#[test]
fn serve_refuses_a_second_client_while_busy() {
    let (addr, server) = start(Some(cal()), 2);
    let mut first = Client::connect(&addr);
    first.send("CMD;calibrate\n");
    assert_eq!(first.reply(), "ERR;already-calibrated\n");

    let mut second = Client::connect(&addr);
    assert_eq!(second.reply(), "ERR;busy\n");
    assert_eq!(second.reply(), "");

    first.close();
    // the slot frees up once the first client is gone
    let mut third = loop {
        let mut c = Client::connect(&addr);
        c.send("CMD;calibrate\n");
        let r = c.reply();
        if r == "ERR;already-calibrated\n" {
            break c;
        }
        assert_eq!(r, "ERR;busy\n");
        thread::sleep(Duration::from_millis(20));
    };
    third.send(&raw_lines(&trace("alphabet:O", 1), 0));
    assert_eq!(third.reply(), "OUT;alphabet;O;29\n");
    third.close();
    server.join().unwrap();
}
