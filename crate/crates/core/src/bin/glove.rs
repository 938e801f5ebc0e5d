use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use smartglove::calibration::{calibrate, GloveCalibration};
use smartglove::config::{parse_profile, SessionConfig};
use smartglove::corpus::{self, CorpusError, Expected};
use smartglove::glovesim::{config_phase_script, parse_trace_line, synthesize, write_trace, SensorProfile};
use smartglove::serve::Server;
use smartglove::session::{Session, SessionSetup};
use smartglove::templates::{self, parse_duration, parse_script_spec, CorpusSpec};
use smartglove::wordmodel::{load_model, save_model, train, DecisionTreeModel, TreeParams};

/// Exit codes: 0 ok, 2 usage, 3 missing prerequisite, 4 data error.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn missing(message: impl ToString) -> Failure {
    Failure {
        code: 3,
        message: message.to_string(),
    }
}

fn data(message: impl ToString) -> Failure {
    Failure {
        code: 4,
        message: message.to_string(),
    }
}

type CliResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "glove", version, about = "Smart-glove sign-language pipeline")]
struct Cli {
    /// Flat key=value session config; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice the subcommand makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample rate in Hz.
    #[arg(long, global = true)]
    rate: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorpusKind {
    Alphabet,
    Words,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a sensor trace from a script, or a labeled corpus.
    Simulate {
        /// Segments joined by '+': alphabet:A, word:hello, shake, rest, config, each optionally @DURATION (e.g. 1500ms, 2s).
        #[arg(long, conflicts_with = "corpus")]
        script: Option<String>,
        /// Default segment duration, e.g. 2s or 750ms.
        #[arg(long, default_value = "2s")]
        hold: String,
        /// Output trace file (stdout if absent), or corpus directory with --corpus.
        #[arg(long, visible_alias = "trace-out")]
        out: Option<PathBuf>,
        /// Write a labeled corpus directory instead of one trace.
        #[arg(long, value_enum)]
        corpus: Option<CorpusKind>,
        /// Traces per label for --corpus.
        #[arg(long)]
        per_class: Option<usize>,
        /// Sensor profile file.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Cluster a configuration-phase trace into a calibration file.
    Calibrate {
        /// Configuration trace; synthesized from the profile if absent.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Calibration file to write.
        #[arg(long)]
        out: PathBuf,
        /// Sensor profile for the synthesized configuration phase.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Recognize a trace file or a stream of wire frames.
    Run {
        /// Raw sample trace, one comma-separated sample per line.
        #[arg(long, conflicts_with = "frames")]
        trace: Option<PathBuf>,
        /// Wire-protocol lines (R;/E;/CMD;), '-' for stdin.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Calibration file; required with --trace.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Word model (.dtree); motion segments are skipped without one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train the word decision tree.
    Train {
        /// Corpus directory; a synthetic word corpus is generated if absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Synthetic windows per class when no corpus is given.
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        /// Calibration used to encode the corpus; defaults to the profile's own configuration phase.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Sensor profile for the synthetic corpus.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Deepest split level of the tree.
        #[arg(long, default_value_t = TreeParams::default().max_depth)]
        max_depth: usize,
        /// Fewest training windows a leaf may hold.
        #[arg(long, default_value_t = TreeParams::default().min_leaf)]
        min_leaf: usize,
        /// Fraction of each class held out for the reported accuracy.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Score a labeled corpus end to end.
    Eval {
        /// Corpus directory with a manifest.txt.
        #[arg(long)]
        corpus: PathBuf,
        /// Calibration file the traces are encoded with.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Word model (.dtree); needed to score word labels.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Serve the wire protocol over TCP to one client at a time.
    Serve {
        /// TCP port (default 7878, or the config file's port).
        #[arg(long)]
        port: Option<u16>,
        /// Address to listen on.
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Start sessions already calibrated instead of in the configuring phase.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Word model (.dtree) shared by every session.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Exit after this many client sessions.
        #[arg(long)]
        max_sessions: Option<usize>,
    },
    /// Write the letter poses and motion templates as JSON.
    ExportTemplates {
        /// JSON file to write (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sensor profile embedded in the export.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
}

struct Context {
    config: SessionConfig,
    seed: Option<u64>,
}

impl Context {
    fn load(cli: &Cli) -> Result<Context, Failure> {
        let mut config = match &cli.config {
            Some(path) => SessionConfig::parse(&read_text(path)?).map_err(usage)?,
            None => SessionConfig::default(),
        };
        if let Some(rate) = cli.rate {
            config.rate_hz = rate;
            config.validate().map_err(usage)?;
        }
        let seed = cli.seed.or(config.seed);
        Ok(Context { config, seed })
    }

    fn profile(&self, flag: Option<&PathBuf>) -> Result<SensorProfile, Failure> {
        let mut profile = match flag.or(self.config.profile.as_ref()) {
            Some(path) => parse_profile(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?,
            None => SensorProfile::default(),
        };
        if let Some(seed) = self.seed {
            profile.seed = seed;
        }
        Ok(profile)
    }

    fn calibration(&self, flag: Option<&PathBuf>) -> Result<Option<GloveCalibration>, Failure> {
        flag.or(self.config.calibration.as_ref())
            .map(|path| {
                read_text(path)?
                    .parse::<GloveCalibration>()
                    .map_err(|e| data(format!("{}: {e}", path.display())))
            })
            .transpose()
    }

    fn require_calibration(&self, flag: Option<&PathBuf>) -> Result<GloveCalibration, Failure> {
        self.calibration(flag)?.ok_or_else(|| {
            missing(
                "no calibration: the glove must finish its configuring phase first \
                 (run `glove calibrate` and pass --calibration)",
            )
        })
    }

    fn model(&self, flag: Option<&PathBuf>) -> Result<Option<Arc<DecisionTreeModel>>, Failure> {
        match flag.or(self.config.model.as_ref()) {
            Some(path) => {
                let model = load_model(&read_text(path)?).map_err(|e| data(format!("{}: {e}", path.display())))?;
                Ok(Some(Arc::new(model)))
            }
            None => {
                eprintln!("warning: no word model given, only static letters will be recognized");
                Ok(None)
            }
        }
    }

    fn setup(&self, model: Option<Arc<DecisionTreeModel>>) -> SessionSetup {
        SessionSetup {
            params: self.config.params,
            model,
            window: self.config.window,
            rate_hz: self.config.rate_hz,
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| missing(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn corpus_failure(e: CorpusError) -> Failure {
    match e {
        CorpusError::MissingManifest(_) | CorpusError::Io(_) => missing(e),
        _ => data(e),
    }
}

fn simulate(
    ctx: &Context,
    script: Option<String>,
    hold: &str,
    out: Option<PathBuf>,
    corpus_kind: Option<CorpusKind>,
    per_class: Option<usize>,
    profile: Option<PathBuf>,
) -> CliResult {
    let profile = ctx.profile(profile.as_ref())?;
    let hold_ms = parse_duration(hold).ok_or_else(|| usage(format!("bad duration {hold:?}")))?;
    let rate = ctx.config.rate_hz;

    if let Some(kind) = corpus_kind {
        let dir = out.ok_or_else(|| usage("--corpus needs --out <dir>"))?;
        let seed = ctx.seed.unwrap_or(CorpusSpec::default().seed);
        let traces = match kind {
            CorpusKind::Alphabet => corpus::alphabet_corpus(&profile, per_class.unwrap_or(10), hold_ms, rate, seed),
            CorpusKind::Words => corpus::words_corpus(&CorpusSpec {
                per_class: per_class.unwrap_or(CorpusSpec::default().per_class),
                seed,
                profile,
                rate_hz: rate,
                sample_len_ms: hold_ms,
            }),
        }
        .map_err(data)?;
        corpus::write_corpus(&dir, &traces).map_err(corpus_failure)?;
        println!("{} traces written to {}", traces.len(), dir.display());
        return Ok(());
    }

    let spec = script.ok_or_else(|| usage("give --script or --corpus"))?;
    let script = parse_script_spec(&spec, hold_ms, &profile).map_err(usage)?;
    let trace = synthesize(&script, &profile, rate).map_err(usage)?;
    match out {
        Some(path) => {
            let file = fs::File::create(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            write_trace(io::BufWriter::new(file), &trace).map_err(data)?;
            println!("{} samples", trace.len());
        }
        None => {
            write_trace(io::stdout().lock(), &trace).map_err(data)?;
            eprintln!("{} samples", trace.len());
        }
    }
    Ok(())
}

fn read_trace_lenient(path: &Path) -> Result<Vec<smartglove::RawSample>, Failure> {
    let file = fs::File::open(path).map_err(|e| missing(format!("{}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(data)?;
        match parse_trace_line(&line) {
            Ok(s) => samples.push(s),
            Err(e) => eprintln!("warning: {}:{}: skipped ({e})", path.display(), i + 1),
        }
    }
    Ok(samples)
}

fn calibrate_cmd(ctx: &Context, trace: Option<PathBuf>, out: PathBuf, profile: Option<PathBuf>) -> CliResult {
    let samples = match trace {
        Some(path) => read_trace_lenient(&path)?,
        None => {
            let profile = ctx.profile(profile.as_ref())?;
            synthesize(&config_phase_script(&profile), &profile, ctx.config.rate_hz).map_err(usage)?
        }
    };
    let cal = calibrate(&samples).map_err(data)?;
    write_out(&out, &cal.to_string())?;
    print!("{cal}");
    Ok(())
}

fn run_cmd(
    ctx: &Context,
    trace: Option<PathBuf>,
    frames: Option<PathBuf>,
    calibration: Option<PathBuf>,
    model: Option<PathBuf>,
) -> CliResult {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let emit = |out: &mut io::StdoutLock, line: &str| out.write_all(line.as_bytes()).map_err(data);

    let session = match (&trace, &frames) {
        (Some(path), _) => {
            let cal = ctx.require_calibration(calibration.as_ref())?;
            let setup = ctx.setup(ctx.model(model.as_ref())?);
            let mut session = Session::running(setup, cal);
            for sample in read_trace_lenient(path)? {
                if let Some(e) = session.push_sample(&sample).map_err(data)? {
                    emit(&mut out, &e.to_line())?;
                }
            }
            session
        }
        (None, Some(path)) => {
            let setup = ctx.setup(ctx.model(model.as_ref())?);
            let mut session = match ctx.calibration(calibration.as_ref())? {
                Some(cal) => Session::running(setup, cal),
                None => {
                    let mut s = Session::new(setup);
                    s.begin_configuration().map_err(data)?;
                    s
                }
            };
            let input: Box<dyn BufRead> = if path.as_os_str() == "-" {
                Box::new(io::stdin().lock())
            } else {
                let file = fs::File::open(path).map_err(|e| missing(format!("{}: {e}", path.display())))?;
                Box::new(BufReader::new(file))
            };
            for (i, line) in input.lines().enumerate() {
                let line = line.map_err(data)?;
                for reply in session.handle_line(&line) {
                    if reply.starts_with("OUT;") {
                        emit(&mut out, &reply)?;
                    } else {
                        eprint!("line {}: {reply}", i + 1);
                    }
                }
            }
            session
        }
        (None, None) => return Err(usage("give --trace or --frames")),
    };
    let mut session = session;
    for line in session.close() {
        emit(&mut out, &line)?;
    }
    out.flush().map_err(data)?;
    eprintln!(
        "frame gaps: {}, unclassified segments: {}",
        session.frame_gaps(),
        session.unclassified_segments()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(
    ctx: &Context,
    corpus_dir: Option<PathBuf>,
    per_class: usize,
    calibration: Option<PathBuf>,
    profile: Option<PathBuf>,
    out: PathBuf,
    params: TreeParams,
    holdout: f64,
) -> CliResult {
    if !(0.0..1.0).contains(&holdout) {
        return Err(usage("--holdout must be in [0, 1)"));
    }
    let profile = ctx.profile(profile.as_ref())?;
    let seed = ctx.seed.unwrap_or(CorpusSpec::default().seed);
    let cal = match ctx.calibration(calibration.as_ref())? {
        Some(cal) => cal,
        None => templates::calibrate_profile(&profile, ctx.config.rate_hz).map_err(data)?,
    };
    let raw = match corpus_dir {
        Some(dir) => corpus::read_corpus(&dir).map_err(corpus_failure)?,
        None => corpus::words_corpus(&CorpusSpec {
            per_class,
            seed,
            profile,
            rate_hz: ctx.config.rate_hz,
            sample_len_ms: ctx.config.window.sample_len_ms,
        })
        .map_err(data)?,
    };
    let words: Vec<_> = raw
        .into_iter()
        .filter_map(|(expected, trace)| match expected {
            Expected::Word(label) => Some((label, trace)),
            Expected::Letter(_) => None,
        })
        .collect();
    let samples = templates::featurize(&words, &cal).map_err(data)?;
    let (train_set, test_set) = templates::stratified_split(&samples, holdout, seed);
    let model = train(&train_set, params).map_err(data)?;
    write_out(&out, &save_model(&model))?;
    let acc = if test_set.is_empty() {
        f64::NAN
    } else {
        model.accuracy(&test_set)
    };
    println!(
        "TRAIN;nodes={};depth={};n_train={};n_test={};holdout_acc={:.4}",
        model.nodes().len(),
        model.depth(),
        train_set.len(),
        test_set.len(),
        acc
    );
    Ok(())
}

fn eval_cmd(ctx: &Context, dir: PathBuf, calibration: Option<PathBuf>, model: Option<PathBuf>) -> CliResult {
    let entries = corpus::read_manifest(&dir).map_err(corpus_failure)?;
    if entries.is_empty() {
        return Err(data(CorpusError::Empty));
    }
    let cal = ctx.require_calibration(calibration.as_ref())?;
    let setup = ctx.setup(ctx.model(model.as_ref())?);
    let traces = corpus::read_corpus(&dir).map_err(corpus_failure)?;
    let report = corpus::evaluate(&traces, &setup, cal).map_err(corpus_failure)?;
    println!("{report}");
    Ok(())
}

fn serve_cmd(
    ctx: &Context,
    port: Option<u16>,
    host: &str,
    calibration: Option<PathBuf>,
    model: Option<PathBuf>,
    max_sessions: Option<usize>,
) -> CliResult {
    let cal = ctx.calibration(calibration.as_ref())?;
    let setup = ctx.setup(ctx.model(model.as_ref())?);
    let port = port.unwrap_or(ctx.config.port);
    let server = Server::bind((host, port), setup, cal).map_err(|e| data(format!("cannot bind {host}:{port}: {e}")))?;
    let addr = server.local_addr().map_err(data)?;
    eprintln!("listening on {addr}");
    server.run(max_sessions).map_err(data)
}

fn export_cmd(ctx: &Context, out: Option<PathBuf>, profile: Option<PathBuf>) -> CliResult {
    let profile = ctx.profile(profile.as_ref())?;
    let export = templates::export_templates(&profile, ctx.config.rate_hz);
    let json = serde_json::to_string_pretty(&export).map_err(data)? + "\n";
    match out {
        Some(path) => write_out(&path, &json),
        None => io::stdout().write_all(json.as_bytes()).map_err(data),
    }
}

fn dispatch(cli: Cli) -> CliResult {
    let ctx = Context::load(&cli)?;
    match cli.command {
        Command::Simulate {
            script,
            hold,
            out,
            corpus,
            per_class,
            profile,
        } => simulate(&ctx, script, &hold, out, corpus, per_class, profile),
        Command::Calibrate { trace, out, profile } => calibrate_cmd(&ctx, trace, out, profile),
        Command::Run {
            trace,
            frames,
            calibration,
            model,
        } => run_cmd(&ctx, trace, frames, calibration, model),
        Command::Train {
            corpus,
            per_class,
            calibration,
            profile,
            out,
            max_depth,
            min_leaf,
            holdout,
        } => train_cmd(
            &ctx,
            corpus,
            per_class,
            calibration,
            profile,
            out,
            TreeParams { max_depth, min_leaf },
            holdout,
        ),
        Command::Eval {
            corpus,
            calibration,
            model,
        } => eval_cmd(&ctx, corpus, calibration, model),
        Command::Serve {
            port,
            host,
            calibration,
            model,
            max_sessions,
        } => serve_cmd(&ctx, port, &host, calibration, model, max_sessions),
        Command::ExportTemplates { out, profile } => export_cmd(&ctx, out, profile),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
