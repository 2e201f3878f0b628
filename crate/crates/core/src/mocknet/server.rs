use std::io::{self, BufReader, Write};
use std::net::{SocketAddr, SocketAddrV4, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::proto::http::{self, Request, Response};

const CONN_STACK: usize = 256 * 1024;
const CONN_TIMEOUT: Duration = Duration::from_secs(10);

/// Connection accounting, optionally shared by many servers.
#[derive(Debug, Default)]
pub struct ConnStats {
    current: AtomicUsize,
    max: AtomicUsize,
    total: AtomicUsize,
    log: Mutex<Vec<SocketAddrV4>>,
}

impl ConnStats {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Highest number of simultaneously open connections seen.
    pub fn max_concurrent(&self) -> usize {
        self.max.load(Ordering::SeqCst)
    }

    /// Connections currently counted as open.
    pub fn open_now(&self) -> usize {
        self.current.load(Ordering::SeqCst)
    }

    pub fn total(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }

    /// Local address of every accepted connection, in accept order.
    pub fn log(&self) -> Vec<SocketAddrV4> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn open(&self, local: SocketAddrV4) {
        self.total.fetch_add(1, Ordering::SeqCst);
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(local);
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.max.fetch_max(now, Ordering::SeqCst);
    }
}

/// An accepted connection. It counts as open until [`Conn::release`] is
/// called or it is dropped.
pub struct Conn {
    pub stream: TcpStream,
    pub local: SocketAddrV4,
    stats: Arc<ConnStats>,
    open: bool,
}

impl Conn {
    /// Stops counting this connection as open. Servers call this before
    /// writing their final reply, so the count never includes a connection
    /// the client may already consider finished.
    pub fn release(&mut self) {
        if std::mem::take(&mut self.open) {
            self.stats.current.fetch_sub(1, Ordering::SeqCst);
        }
    }
}

impl Drop for Conn {
    fn drop(&mut self) {
        self.release();
    }
}

pub type Handler = Arc<dyn Fn(Conn) + Send + Sync>;

/// A listener on loopback with a thread per connection.
pub struct MockServer {
    addr: SocketAddrV4,
    stats: Arc<ConnStats>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn spawn(bind: SocketAddrV4, handler: Handler) -> io::Result<Self> {
        Self::spawn_with_stats(bind, ConnStats::new(), handler)
    }

    pub fn spawn_with_stats(
        bind: SocketAddrV4,
        stats: Arc<ConnStats>,
        handler: Handler,
    ) -> io::Result<Self> {
        let listener = TcpListener::bind(bind)?;
        let addr = match listener.local_addr()? {
            SocketAddr::V4(a) => a,
            SocketAddr::V6(_) => return Err(io::Error::other("bound to IPv6")),
        };
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let stop = stop.clone();
            let stats = stats.clone();
            std::thread::Builder::new()
                .name(format!("mock-{addr}"))
                .stack_size(CONN_STACK)
                .spawn(move || accept_loop(listener, addr, stop, stats, handler))?
        };
        Ok(Self {
            addr,
            stats,
            stop,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddrV4 {
        self.addr
    }

    pub fn stats(&self) -> &Arc<ConnStats> {
        &self.stats
    }

    pub fn shutdown(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the blocking accept.
            let _ = TcpStream::connect_timeout(&SocketAddr::V4(self.addr), Duration::from_secs(1));
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(
    listener: TcpListener,
    addr: SocketAddrV4,
    stop: Arc<AtomicBool>,
    stats: Arc<ConnStats>,
    handler: Handler,
) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let _ = stream.set_read_timeout(Some(CONN_TIMEOUT));
        let _ = stream.set_write_timeout(Some(CONN_TIMEOUT));
        // With a wildcard bind this is the address the client dialled.
        let local = match stream.local_addr() {
            Ok(SocketAddr::V4(a)) => a,
            _ => addr,
        };
        stats.open(local);
        let conn = Conn {
            stream,
            local,
            stats: stats.clone(),
            open: true,
        };
        let handler = handler.clone();
        let spawned = std::thread::Builder::new()
            .stack_size(CONN_STACK)
            .spawn(move || handler(conn));
        if spawned.is_err() {
            // Out of threads: the connection is dropped and the client sees a reset.
            continue;
        }
    }
}

/// Reads one HTTP request and answers it with `respond`.
pub fn serve_http(mut conn: Conn, respond: impl FnOnce(&Request) -> Response) {
    let Ok(read_half) = conn.stream.try_clone() else {
        return;
    };
    let mut reader = BufReader::new(read_half);
    let resp = match http::read_request(&mut reader) {
        Ok(Some(req)) => respond(&req),
        Err(http::HttpError::Malformed(_)) => Response::new(400).with_body("Bad Request"),
        _ => return,
    };
    conn.release();
    let _ = conn.stream.write_all(&resp.to_bytes());
    let _ = conn.stream.flush();
}

/// Finds a loopback port with nothing listening on it.
pub fn closed_port() -> io::Result<SocketAddrV4> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    match listener.local_addr()? {
        SocketAddr::V4(a) => Ok(a),
        SocketAddr::V6(_) => Err(io::Error::other("bound to IPv6")),
    }
}
