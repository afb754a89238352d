//! Client for a model server speaking the newline-delimited protocol over
//! TCP or a child process's standard streams.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;

use super::protocol::{
    codes, Call, DescribeResult, HandshakeResult, LogitsResult, Request, Response, TokenizeResult,
    PROTOCOL_VERSION,
};
use super::trace::Side;
use super::{check_length, LogitProvider, ProviderError};
use crate::types::{Context, LogitVector, TokenId, Vocabulary};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Where a model server lives: `tcp://host:port` or `stdio:<command line>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err("tcp endpoint needs host:port".into());
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err("stdio endpoint needs a command".into());
            }
            Ok(Endpoint::Stdio(argv))
        } else {
            Err(format!("endpoint {s:?} must start with tcp:// or stdio:"))
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(addr) => write!(f, "tcp://{addr}"),
            Endpoint::Stdio(argv) => write!(f, "stdio:{}", argv.join(" ")),
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn transport(e: impl fmt::Display) -> ProviderError {
    ProviderError::Transport(e.to_string())
}

/// One connection to a model server, handshaken and ready for requests.
/// Requests are serialized; concurrent callers wait their turn.
pub struct RemoteClient {
    conn: Mutex<Connection>,
    next_id: AtomicU64,
    timeout: Duration,
    info: HandshakeResult,
    vocab: Vocabulary,
}

impl RemoteClient {
    /// Connects and handshakes. With `expected_n`, a server reporting a
    /// different vocabulary size is rejected.
    pub fn connect(
        endpoint: &Endpoint,
        timeout: Duration,
        expected_n: Option<usize>,
    ) -> Result<Self, ProviderError> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let sock = addr
                    .to_socket_addrs()
                    .map_err(transport)?
                    .next()
                    .ok_or_else(|| transport(format!("{addr} resolves to nothing")))?;
                let stream = TcpStream::connect_timeout(&sock, timeout).map_err(transport)?;
                stream.set_nodelay(true).map_err(transport)?;
                let reader = stream.try_clone().map_err(transport)?;
                Self::from_streams(reader, stream, None, timeout, expected_n)
            }
            Endpoint::Stdio(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(transport)?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Self::from_streams(stdout, stdin, Some(child), timeout, expected_n)
            }
        }
    }

    /// Runs the protocol over an arbitrary byte-stream pair.
    pub fn over<R, W>(
        reader: R,
        writer: W,
        timeout: Duration,
        expected_n: Option<usize>,
    ) -> Result<Self, ProviderError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::from_streams(reader, writer, None, timeout, expected_n)
    }

    fn from_streams<R, W>(
        reader: R,
        writer: W,
        child: Option<Child>,
        timeout: Duration,
        expected_n: Option<usize>,
    ) -> Result<Self, ProviderError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut conn = Connection {
            writer: Box::new(writer),
            lines: rx,
            child,
        };
        let info: HandshakeResult = roundtrip(
            &mut conn,
            0,
            Call::Handshake {
                format_version: PROTOCOL_VERSION,
            },
            timeout,
        )
        .map_err(|e| match e {
            ProviderError::Remote { code, message } if code == codes::UNSUPPORTED_VERSION => {
                ProviderError::ProtocolVersion {
                    expected: PROTOCOL_VERSION,
                    detail: message,
                }
            }
            other => other,
        })?;
        if let Some(v) = info.format_version {
            if v != PROTOCOL_VERSION {
                return Err(ProviderError::ProtocolVersion {
                    expected: PROTOCOL_VERSION,
                    detail: format!("version {v}"),
                });
            }
        }
        if let Some(expected) = expected_n {
            if expected != info.n {
                return Err(ProviderError::VocabMismatch {
                    expected,
                    got: info.n,
                });
            }
        }
        let vocab = Vocabulary::opaque(info.n, info.eos_id)?;
        Ok(Self {
            conn: Mutex::new(conn),
            next_id: AtomicU64::new(1),
            timeout,
            info,
            vocab,
        })
    }

    pub fn info(&self) -> &HandshakeResult {
        &self.info
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn call<T: DeserializeOwned>(&self, call: Call) -> Result<T, ProviderError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| transport("connection poisoned"))?;
        roundtrip(&mut conn, id, call, self.timeout)
    }

    pub fn logits(&self, side: Side, context: &[TokenId]) -> Result<LogitVector, ProviderError> {
        let r: LogitsResult = self.call(Call::Logits {
            side,
            context: context.to_vec(),
        })?;
        check_length(&r.logits, self.vocab.len())?;
        Ok(r.logits)
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, ProviderError> {
        let r: TokenizeResult = self.call(Call::Tokenize {
            text: text.to_string(),
        })?;
        Context::new(r.ids.clone()).validate(self.vocab.len())?;
        Ok(r.ids)
    }

    /// Asks the server to generate (and keep) a description of `image`.
    pub fn describe(&self, image: &str, prompt: &str) -> Result<String, ProviderError> {
        let r: DescribeResult = self.call(Call::Describe {
            image: image.to_string(),
            prompt: prompt.to_string(),
        })?;
        Ok(r.description)
    }
}

fn roundtrip<T: DeserializeOwned>(
    conn: &mut Connection,
    id: u64,
    call: Call,
    timeout: Duration,
) -> Result<T, ProviderError> {
    let mut line = serde_json::to_string(&Request { id, call }).expect("request serializes");
    line.push('\n');
    conn.writer.write_all(line.as_bytes()).map_err(transport)?;
    conn.writer.flush().map_err(transport)?;

    let reply = match conn.lines.recv_timeout(timeout) {
        Ok(Ok(reply)) => reply,
        Ok(Err(e)) => return Err(transport(e)),
        Err(RecvTimeoutError::Timeout) => return Err(ProviderError::Timeout(timeout)),
        Err(RecvTimeoutError::Disconnected) => return Err(transport("connection closed")),
    };
    let response: Response = serde_json::from_str(&reply)
        .map_err(|e| ProviderError::Protocol(format!("unparseable response: {e}")))?;
    if response.id != id {
        return Err(ProviderError::Protocol(format!(
            "response id {} does not match request id {id}",
            response.id
        )));
    }
    match (response.result, response.error) {
        (_, Some(err)) => Err(ProviderError::Remote {
            code: err.code,
            message: err.message,
        }),
        (Some(result), None) => serde_json::from_value(result)
            .map_err(|e| ProviderError::Protocol(format!("unexpected result shape: {e}"))),
        (None, None) => Err(ProviderError::Protocol(
            "response has neither result nor error".into(),
        )),
    }
}

/// One side of a remote model as a [`LogitProvider`].
#[derive(Clone)]
pub struct RemoteProvider {
    client: Arc<RemoteClient>,
    side: Side,
}

impl RemoteProvider {
    pub fn new(client: Arc<RemoteClient>, side: Side) -> Self {
        Self { client, side }
    }

    pub fn client(&self) -> &Arc<RemoteClient> {
        &self.client
    }
}

impl LogitProvider for RemoteProvider {
    fn vocabulary(&self) -> &Vocabulary {
        self.client.vocabulary()
    }

    fn max_context(&self) -> Option<usize> {
        self.client.info.max_context
    }

    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
        self.client.logits(self.side, ctx.token_ids())
    }
}
