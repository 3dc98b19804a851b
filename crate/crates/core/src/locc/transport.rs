//! Newline-delimited message channels: an in-process pair and TCP.

use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// A reliable, ordered line channel. `recv_line` yields `None` once the
/// peer has closed its end.
pub trait Channel: Send {
    fn send_line(&mut self, line: &str) -> Result<()>;
    fn recv_line(&mut self) -> Result<Option<String>>;
    /// Pushes buffered lines to the peer.
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn send_line(&mut self, line: &str) -> Result<()> {
        (**self).send_line(line)
    }
    fn recv_line(&mut self) -> Result<Option<String>> {
        (**self).recv_line()
    }
    fn flush(&mut self) -> Result<()> {
        (**self).flush()
    }
}

fn transport(msg: impl std::fmt::Display) -> Error {
    Error::Transport(msg.to_string())
}

pub struct InProcessChannel {
    tx: SyncSender<String>,
    rx: Receiver<String>,
}

/// Lines buffered per direction before the sender blocks.
const IN_PROCESS_BUFFER: usize = 4096;

/// Two connected in-process endpoints.
pub fn in_process_pair() -> (InProcessChannel, InProcessChannel) {
    let (tx_a, rx_b) = sync_channel(IN_PROCESS_BUFFER);
    let (tx_b, rx_a) = sync_channel(IN_PROCESS_BUFFER);
    (InProcessChannel { tx: tx_a, rx: rx_a }, InProcessChannel { tx: tx_b, rx: rx_b })
}

impl Channel for InProcessChannel {
    fn send_line(&mut self, line: &str) -> Result<()> {
        self.tx
            .send(line.to_string())
            .map_err(|_| transport("peer hung up"))
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        Ok(self.rx.recv().ok())
    }
}

pub struct TcpChannel {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    peer: SocketAddr,
}

impl TcpChannel {
    fn from_stream(stream: TcpStream, timeout: Duration) -> Result<Self> {
        stream.set_nodelay(true).map_err(transport)?;
        stream.set_read_timeout(Some(timeout)).map_err(transport)?;
        stream.set_write_timeout(Some(timeout)).map_err(transport)?;
        let peer = stream.peer_addr().map_err(transport)?;
        let reader = BufReader::new(stream.try_clone().map_err(transport)?);
        Ok(Self {
            reader,
            writer: BufWriter::new(stream),
            peer,
        })
    }

    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self> {
        let addrs: Vec<SocketAddr> = endpoint
            .to_socket_addrs()
            .map_err(|e| transport(format!("cannot resolve {endpoint}: {e}")))?
            .collect();
        let mut last = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(stream) => return Self::from_stream(stream, timeout),
                Err(e) => last = Some(e),
            }
        }
        Err(transport(match last {
            Some(e) => format!("cannot connect to {endpoint}: {e}"),
            None => format!("{endpoint} resolves to no address"),
        }))
    }

    pub fn peer_addr(&self) -> SocketAddr {
        self.peer
    }
}

impl Channel for TcpChannel {
    fn send_line(&mut self, line: &str) -> Result<()> {
        self.writer
            .write_all(line.as_bytes())
            .map_err(|e| transport(format!("send to {}: {e}", self.peer)))
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        self.writer.flush().map_err(transport)?;
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Ok(None),
            Ok(_) if !line.ends_with('\n') => Err(transport(format!("{} closed mid-line", self.peer))),
            Ok(_) => Ok(Some(line)),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                Err(transport(format!("timed out waiting for {}", self.peer)))
            }
            Err(e) => Err(transport(format!("receive from {}: {e}", self.peer))),
        }
    }

    fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(transport)
    }
}

impl Drop for TcpChannel {
    fn drop(&mut self) {
        let _ = self.writer.flush();
    }
}

/// A bound listening endpoint.
pub struct TcpServer {
    listener: TcpListener,
    timeout: Duration,
}

impl TcpServer {
    pub fn bind(endpoint: &str, timeout: Duration) -> Result<Self> {
        let listener = TcpListener::bind(endpoint).map_err(|e| transport(format!("cannot bind {endpoint}: {e}")))?;
        Ok(Self { listener, timeout })
    }

    /// Actual bound address (useful after binding port 0).
    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener.local_addr().map_err(transport)
    }

    /// Waits up to the configured timeout for one connection.
    pub fn accept(&self) -> Result<TcpChannel> {
        self.listener.set_nonblocking(true).map_err(transport)?;
        let deadline = Instant::now() + self.timeout;
        loop {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false).map_err(transport)?;
                    return TcpChannel::from_stream(stream, self.timeout);
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(transport("timed out waiting for a connection"));
                    }
                    thread::sleep(Duration::from_millis(2));
                }
                Err(e) => return Err(transport(e)),
            }
        }
    }

    /// Accepts `sessions` connections and runs `handler` on each in its own
    /// thread; results are returned in accept order.
    pub fn serve<T, F>(&self, sessions: usize, handler: F) -> Vec<Result<T>>
    where
        T: Send,
        F: Fn(TcpChannel) -> Result<T> + Sync,
    {
        thread::scope(|scope| {
            let mut handles = Vec::with_capacity(sessions);
            let mut results: Vec<Option<Result<T>>> = Vec::with_capacity(sessions);
            for _ in 0..sessions {
                match self.accept() {
                    Ok(ch) => {
                        let handler = &handler;
                        handles.push((results.len(), scope.spawn(move || handler(ch))));
                        results.push(None);
                    }
                    Err(e) => results.push(Some(Err(e))),
                }
            }
            for (slot, h) in handles {
                results[slot] = Some(h.join().unwrap_or_else(|_| Err(Error::Protocol("session handler panicked".into()))));
            }
            results.into_iter().map(|r| r.expect("every slot filled")).collect()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Listen,
    Connect,
}

/// Opens one TCP channel: either binds `endpoint` and accepts a single peer,
/// or connects to it.
pub fn tcp_transport(role: Role, endpoint: &str, timeout: Duration) -> Result<TcpChannel> {
    match role {
        Role::Listen => TcpServer::bind(endpoint, timeout)?.accept(),
        Role::Connect => TcpChannel::connect(endpoint, timeout),
    }
}
