//! TCP endpoint speaking the line protocol, one client at a time.
//!
//! Each connection gets a fresh [`Session`]: straight to `Running` when the
//! server was given a calibration, otherwise `Configuring` until the client
//! sends `CMD;calibrate`. A reader thread feeds lines through a FIFO to the
//! session, which owns all writes to the socket. When the client closes its
//! side, any open motion segment is flushed before the server hangs up.
//! A second client connecting while one is active receives `ERR;busy`.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use crate::calibration::GloveCalibration;
use crate::session::{Session, SessionSetup};

/// Lines longer than this are answered with `ERR;malformed` and skipped.
pub const MAX_LINE_BYTES: usize = 1024;

const ACCEPT_POLL: Duration = Duration::from_millis(5);

pub struct Server {
    listener: TcpListener,
    setup: SessionSetup,
    calibration: Option<GloveCalibration>,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(
        addr: A,
        setup: SessionSetup,
        calibration: Option<GloveCalibration>,
    ) -> io::Result<Server> {
        let listener = TcpListener::bind(addr)?;
        Ok(Server {
            listener,
            setup,
            calibration,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    fn new_session(&self) -> Session {
        match self.calibration {
            Some(cal) => Session::running(self.setup.clone(), cal),
            None => {
                let mut s = Session::new(self.setup.clone());
                s.begin_configuration().expect("fresh session starts in Init");
                s
            }
        }
    }

    /// Serves clients until `max_sessions` have completed (forever if `None`).
    pub fn run(self, max_sessions: Option<usize>) -> io::Result<()> {
        self.listener.set_nonblocking(true)?;
        let busy = Arc::new(AtomicBool::new(false));
        let finished = Arc::new(AtomicUsize::new(0));
        let mut started = 0usize;
        let mut workers = Vec::new();

        loop {
            if let Some(max) = max_sessions {
                if finished.load(Ordering::SeqCst) >= max {
                    break;
                }
            }
            match self.listener.accept() {
                Ok((mut stream, _)) => {
                    stream.set_nonblocking(false)?;
                    let at_limit = max_sessions.is_some_and(|m| started >= m);
                    if at_limit || busy.swap(true, Ordering::SeqCst) {
                        let _ = stream.write_all(b"ERR;busy\n");
                        let _ = stream.shutdown(std::net::Shutdown::Both);
                        continue;
                    }
                    started += 1;
                    let session = self.new_session();
                    let (busy, finished) = (Arc::clone(&busy), Arc::clone(&finished));
                    workers.push(thread::spawn(move || {
                        let _ = serve_connection(stream, session);
                        busy.store(false, Ordering::SeqCst);
                        finished.fetch_add(1, Ordering::SeqCst);
                    }));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                Err(e) => return Err(e),
            }
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }
}

enum Inbound {
    Line(String),
    Oversized,
}

fn read_lines(stream: TcpStream, tx: mpsc::Sender<Inbound>) {
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = match reader
            .by_ref()
            .take(MAX_LINE_BYTES as u64 + 1)
            .read_until(b'\n', &mut buf)
        {
            Ok(n) => n,
            Err(_) => break,
        };
        if n == 0 {
            break;
        }
        let msg = if buf.len() > MAX_LINE_BYTES {
            // discard the rest of the oversized line
            let mut rest = Vec::new();
            if !buf.ends_with(b"\n") && reader.read_until(b'\n', &mut rest).is_err() {
                break;
            }
            Inbound::Oversized
        } else {
            Inbound::Line(String::from_utf8_lossy(&buf).into_owned())
        };
        if tx.send(msg).is_err() {
            break;
        }
    }
}

/// Runs one client to completion.
pub fn serve_connection(stream: TcpStream, mut session: Session) -> io::Result<()> {
    let reader_stream = stream.try_clone()?;
    let (tx, rx) = mpsc::channel();
    let reader = thread::spawn(move || read_lines(reader_stream, tx));
    let mut out = io::BufWriter::new(&stream);

    for msg in rx {
        let replies = match msg {
            Inbound::Line(line) => session.handle_line(&line),
            Inbound::Oversized => vec!["ERR;malformed\n".to_string()],
        };
        for r in replies {
            out.write_all(r.as_bytes())?;
        }
        out.flush()?;
    }
    for r in session.close() {
        out.write_all(r.as_bytes())?;
    }
    out.flush()?;
    drop(out);
    let _ = stream.shutdown(std::net::Shutdown::Both);
    let _ = reader.join();
    Ok(())
}
