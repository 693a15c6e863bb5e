//! TCP front end: one thread per connection, one lock around the manager.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::protocol::{parse_line, ErrCode, Message};
use super::{Manager, ManagerStats, Outcome, EVENT_LOG_HEADER};
use crate::error::{Error, Result};

const POLL: Duration = Duration::from_millis(50);
const HEARTBEAT: Duration = Duration::from_secs(5);
const MAX_LINE: usize = 4096;

struct Shared {
    manager: Manager,
    log: Option<BufWriter<File>>,
    /// Connection that last sent a pose for each vehicle.
    routes: HashMap<String, u64>,
    conns: HashMap<u64, TcpStream>,
}

impl Shared {
    fn send(&mut self, conn: u64, msg: &Message) {
        if let Some(s) = self.conns.get_mut(&conn) {
            if let Err(e) = writeln!(s, "{msg}") {
                log::debug!("write to connection {conn} failed: {e}");
            }
        }
    }

    fn dispatch(&mut self, from: u64, out: Outcome) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            for r in &out.records {
                writeln!(log, "{}", r.log_line()).map_err(Error::Net)?;
            }
        }
        for w in &out.warnings {
            log::info!("warn {} about {} (z_hat {:.4}, t {})", w.target, w.offender, w.z_hat, w.t);
            if let Some(&conn) = self.routes.get(&w.target) {
                self.send(conn, &w.to_message());
            }
        }
        for id in &out.evicted {
            self.routes.remove(id);
        }
        if let Some(reply) = &out.reply {
            self.send(from, reply);
        }
        Ok(())
    }
}

fn lock(shared: &Mutex<Shared>) -> MutexGuard<'_, Shared> {
    shared.lock().unwrap_or_else(|e| e.into_inner())
}

/// Totals reported at shutdown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeSummary {
    pub connections: u64,
    pub stats: ManagerStats,
}

/// A server running on a background thread.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<Result<ServeSummary>>>,
}

impl ServerHandle {
    /// Signals shutdown and waits for the event log to be flushed.
    pub fn shutdown(mut self) -> Result<ServeSummary> {
        self.stop.store(true, Ordering::SeqCst);
        let join = self.join.take().expect("joined once");
        join.join().map_err(|_| Error::Training("server thread panicked".into()))?
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

fn bind(listen: &str) -> Result<TcpListener> {
    let l = TcpListener::bind(listen).map_err(|e| Error::Config(format!("cannot listen on {listen}: {e}")))?;
    l.set_nonblocking(true).map_err(Error::Net)?;
    Ok(l)
}

/// Binds `listen` (port 0 picks a free port) and serves on a new thread.
pub fn spawn(manager: Manager, listen: &str, event_log: Option<&Path>) -> Result<ServerHandle> {
    let listener = bind(listen)?;
    let addr = listener.local_addr().map_err(Error::Net)?;
    let log = open_log(event_log)?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let join = thread::spawn(move || run(listener, manager, log, flag));
    Ok(ServerHandle {
        addr,
        stop,
        join: Some(join),
    })
}

/// Serves on the calling thread until `stop` is set.
pub fn serve(manager: Manager, listen: &str, event_log: Option<&Path>, stop: Arc<AtomicBool>) -> Result<ServeSummary> {
    let listener = bind(listen)?;
    log::info!("listening on {}", listener.local_addr().map_err(Error::Net)?);
    run(listener, manager, open_log(event_log)?, stop)
}

fn open_log(path: Option<&Path>) -> Result<Option<BufWriter<File>>> {
    let Some(path) = path else { return Ok(None) };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "{EVENT_LOG_HEADER}").map_err(|e| Error::io(path, e))?;
    Ok(Some(w))
}

fn run(listener: TcpListener, manager: Manager, log: Option<BufWriter<File>>, stop: Arc<AtomicBool>) -> Result<ServeSummary> {
    let shared = Arc::new(Mutex::new(Shared {
        manager,
        log,
        routes: HashMap::new(),
        conns: HashMap::new(),
    }));
    let mut workers = Vec::new();
    let mut next_id = 0u64;
    let mut beat = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                let id = next_id;
                log::info!("connection {id} from {peer}");
                let _ = stream.set_nodelay(true);
                let writer = stream.try_clone().map_err(Error::Net)?;
                let _ = writer.set_write_timeout(Some(Duration::from_secs(2)));
                lock(&shared).conns.insert(id, writer);
                let sh = Arc::clone(&shared);
                let st = Arc::clone(&stop);
                workers.push(thread::spawn(move || connection(id, stream, &sh, &st)));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => log::warn!("accept failed: {e}"),
        }
        if beat.elapsed() >= HEARTBEAT {
            beat = Instant::now();
            let s = lock(&shared);
            log::info!("heartbeat: {} sessions, {} connections", s.manager.session_count(), s.conns.len());
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
    let mut s = lock(&shared);
    if let Some(log) = s.log.as_mut() {
        log.flush().map_err(Error::Net)?;
    }
    let stats = s.manager.stats;
    log::info!(
        "shutdown: {} poses, {} verdicts, {} warnings, {} dropped",
        stats.poses,
        stats.verdicts,
        stats.warnings,
        stats.dropped
    );
    Ok(ServeSummary {
        connections: next_id,
        stats,
    })
}

fn connection(id: u64, stream: TcpStream, shared: &Mutex<Shared>, stop: &AtomicBool) {
    let _ = stream.set_read_timeout(Some(POLL));
    let mut reader = BufReader::new(stream);
    let mut pending = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match reader.read_until(b'\n', &mut pending) {
            Ok(0) => break,
            Ok(_) if pending.ends_with(b"\n") => {
                pending.pop();
                let line = String::from_utf8_lossy(&pending).into_owned();
                pending.clear();
                if let Err(e) = handle_line(id, &line, shared) {
                    log::error!("connection {id}: {e}");
                    break;
                }
            }
            Ok(_) => break,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {}
            Err(e) => {
                log::debug!("connection {id}: {e}");
                break;
            }
        }
        if pending.len() > MAX_LINE {
            pending.clear();
            lock(shared).send(
                id,
                &Message::Err {
                    code: ErrCode::Parse,
                    text: "line too long".into(),
                },
            );
        }
    }
    let mut s = lock(shared);
    s.conns.remove(&id);
    s.routes.retain(|_, c| *c != id);
    log::info!("connection {id} closed");
}

fn handle_line(id: u64, line: &str, shared: &Mutex<Shared>) -> Result<()> {
    let mut s = lock(shared);
    let msg = match parse_line(line) {
        Ok(m) => m,
        Err(e) => {
            log::debug!("connection {id}: {e}");
            s.send(id, &e.to_message());
            return Ok(());
        }
    };
    if let Message::Pose { vehicle_id, .. } = &msg {
        s.routes.insert(vehicle_id.clone(), id);
    }
    let out = s.manager.handle(msg)?;
    s.dispatch(id, out)
}
