//! Client side of the remote surrogate protocol.
//!
//! Newline-delimited JSON over a byte stream (a child process's stdio, or TCP).
//! Every request carries an `id` that increases by one per request, starting at
//! 1; the server answers in order and echoes the id.
//!
//! ```text
//! {"op":"fit","xs":[[...]],"ys":[...],"id":n}  -> {"ok":true,"id":n}
//! {"op":"predict","xs":[[...]],"id":n}        -> {"ok":true,"yhat":[...],"id":n}
//! {"op":"ping","id":n}                        -> {"ok":true,"id":n}
//! failure                                     -> {"ok":false,"error":"...","id":n}
//! ```

use std::fmt;
use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_queries, ContextSet, Predictor, SurrogateError, TargetStats};

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("server closed the connection (last request id {last_id})")]
    Closed { last_id: u64 },
    #[error("malformed response to request {id}: {detail} (line: {line:?})")]
    Malformed { id: u64, detail: String, line: String },
    #[error("response id mismatch: sent {sent}, received {received:?}")]
    IdMismatch { sent: u64, received: Option<u64> },
    #[error("server error for request {id}: {message}")]
    Server { id: u64, message: String },
    #[error("refusing to send non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid transport {0:?}: expected tcp:HOST:PORT or stdio:COMMAND [ARGS...]")]
    BadTransport(String),
}

#[derive(Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum Request<'a> {
    Fit {
        xs: &'a [Vec<f64>],
        ys: &'a [f64],
        id: u64,
    },
    Predict {
        xs: &'a [Vec<f64>],
        id: u64,
    },
    Ping {
        id: u64,
    },
}

#[derive(Deserialize)]
struct Response {
    ok: bool,
    #[serde(default)]
    yhat: Option<Vec<f64>>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    id: Option<u64>,
}

/// Where the server lives.
#[derive(Debug, Clone, PartialEq)]
pub enum Transport {
    Tcp(String),
    Stdio { program: String, args: Vec<String> },
}

impl FromStr for Transport {
    type Err = RemoteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.is_empty() {
                return Err(RemoteError::BadTransport(s.to_string()));
            }
            return Ok(Transport::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace().map(str::to_string);
            let program = parts.next().ok_or_else(|| RemoteError::BadTransport(s.to_string()))?;
            return Ok(Transport::Stdio {
                program,
                args: parts.collect(),
            });
        }
        Err(RemoteError::BadTransport(s.to_string()))
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::Tcp(addr) => write!(f, "tcp:{addr}"),
            Transport::Stdio { program, args } => {
                write!(f, "stdio:{program}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
        }
    }
}

/// Blocking protocol client. One request in flight at a time.
pub struct RemoteClient {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    last_id: u64,
    child: Option<Child>,
}

impl fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteClient").field("last_id", &self.last_id).finish()
    }
}

impl RemoteClient {
    pub fn from_streams(reader: Box<dyn BufRead + Send>, writer: Box<dyn Write + Send>) -> Self {
        Self {
            reader,
            writer,
            last_id: 0,
            child: None,
        }
    }

    pub fn connect(transport: &Transport, timeout: Option<Duration>) -> Result<Self, RemoteError> {
        match transport {
            Transport::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_read_timeout(timeout)?;
                stream.set_nodelay(true)?;
                let reader = BufReader::new(stream.try_clone()?);
                Ok(Self::from_streams(Box::new(reader), Box::new(stream)))
            }
            Transport::Stdio { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut client = Self::from_streams(Box::new(BufReader::new(stdout)), Box::new(stdin));
                client.child = Some(child);
                Ok(client)
            }
        }
    }

    /// Id of the most recent request (0 before the first one).
    pub fn last_id(&self) -> u64 {
        self.last_id
    }

    pub fn ping(&mut self) -> Result<(), RemoteError> {
        let id = self.next_id();
        self.call(&Request::Ping { id }, id).map(|_| ())
    }

    pub fn fit(&mut self, xs: &[Vec<f64>], ys: &[f64]) -> Result<(), RemoteError> {
        if !xs.iter().flatten().all(|v| v.is_finite()) {
            return Err(RemoteError::NonFinite("inputs"));
        }
        if !ys.iter().all(|v| v.is_finite()) {
            return Err(RemoteError::NonFinite("targets"));
        }
        let id = self.next_id();
        self.call(&Request::Fit { xs, ys, id }, id).map(|_| ())
    }

    pub fn predict(&mut self, xs: &[Vec<f64>]) -> Result<Vec<f64>, RemoteError> {
        if !xs.iter().flatten().all(|v| v.is_finite()) {
            return Err(RemoteError::NonFinite("inputs"));
        }
        let id = self.next_id();
        let resp = self.call(&Request::Predict { xs, id }, id)?;
        let yhat = resp.yhat.ok_or_else(|| RemoteError::Malformed {
            id,
            detail: "missing yhat".into(),
            line: String::new(),
        })?;
        if yhat.len() != xs.len() {
            return Err(RemoteError::Malformed {
                id,
                detail: format!("expected {} predictions, got {}", xs.len(), yhat.len()),
                line: String::new(),
            });
        }
        Ok(yhat)
    }

    fn next_id(&mut self) -> u64 {
        self.last_id += 1;
        self.last_id
    }

    fn call(&mut self, request: &Request<'_>, id: u64) -> Result<Response, RemoteError> {
        let mut line = serde_json::to_string(request).expect("requests serialize");
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;

        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(RemoteError::Closed { last_id: id });
        }
        let resp: Response = serde_json::from_str(reply.trim_end()).map_err(|e| RemoteError::Malformed {
            id,
            detail: e.to_string(),
            line: reply.trim_end().to_string(),
        })?;
        if !resp.ok {
            return Err(RemoteError::Server {
                id,
                message: resp.error.unwrap_or_else(|| "unspecified error".into()),
            });
        }
        if resp.id != Some(id) {
            return Err(RemoteError::IdMismatch {
                sent: id,
                received: resp.id,
            });
        }
        Ok(resp)
    }
}

impl Drop for RemoteClient {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Surrogate backed by a [`RemoteClient`]; clones share the connection.
#[derive(Clone, Debug)]
pub struct RemoteSurrogate {
    client: Arc<Mutex<RemoteClient>>,
}

impl RemoteSurrogate {
    pub fn new(client: RemoteClient) -> Self {
        Self {
            client: Arc::new(Mutex::new(client)),
        }
    }

    /// Sends standardized targets; predictions are mapped back on the way out.
    pub fn fit(&self, context: &ContextSet) -> Result<RemoteModel, SurrogateError> {
        let (xs, ys) = context.merged();
        let stats = TargetStats::from_targets(&ys)?;
        let normalized: Vec<f64> = ys.iter().map(|&y| stats.normalize(y)).collect();
        self.client.lock().expect("client lock").fit(&xs, &normalized)?;
        Ok(RemoteModel {
            client: Arc::clone(&self.client),
            stats,
            dim: context.dim(),
        })
    }
}

pub struct RemoteModel {
    client: Arc<Mutex<RemoteClient>>,
    stats: TargetStats,
    dim: usize,
}

impl Predictor for RemoteModel {
    fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>, SurrogateError> {
        check_queries(queries, self.dim)?;
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let raw = self.client.lock().expect("client lock").predict(queries)?;
        Ok(raw.into_iter().map(|y| self.stats.denormalize(y)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;
    use std::sync::mpsc;

    struct Sink(mpsc::Sender<Vec<u8>>);
    impl Write for Sink {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.0.send(buf.to_vec()).unwrap();
            Ok(buf.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    fn scripted(replies: &str) -> (RemoteClient, mpsc::Receiver<Vec<u8>>) {
        let (tx, rx) = mpsc::channel();
        let client = RemoteClient::from_streams(
            Box::new(Cursor::new(replies.as_bytes().to_vec())),
            Box::new(Sink(tx)),
        );
        (client, rx)
    }

    fn sent(rx: &mpsc::Receiver<Vec<u8>>) -> String {
        String::from_utf8(rx.try_iter().flatten().collect()).unwrap()
    }

    #[test]
    fn request_bytes_match_protocol() {
        let (mut c, rx) = scripted("{\"ok\":true,\"id\":1}\n{\"ok\":true,\"id\":2}\n{\"ok\":true,\"yhat\":[0.5],\"id\":3}\n");
        c.ping().unwrap();
        c.fit(&[vec![0.0, 1.5]], &[-2.0]).unwrap();
        assert_eq!(c.predict(&[vec![1.0, 0.25]]).unwrap(), vec![0.5]);
        assert_eq!(
            sent(&rx),
            "{\"op\":\"ping\",\"id\":1}\n\
             {\"op\":\"fit\",\"xs\":[[0.0,1.5]],\"ys\":[-2.0],\"id\":2}\n\
             {\"op\":\"predict\",\"xs\":[[1.0,0.25]],\"id\":3}\n"
        );
    }

    #[test]
    fn server_error_is_reported() {
        let (mut c, _rx) = scripted("{\"ok\":false,\"error\":\"predict before fit\",\"id\":1}\n");
        match c.predict(&[vec![0.0]]) {
            Err(RemoteError::Server { id: 1, message }) => assert_eq!(message, "predict before fit"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_id_is_rejected() {
        let (mut c, _rx) = scripted("{\"ok\":true,\"id\":7}\n");
        assert!(matches!(
            c.ping(),
            Err(RemoteError::IdMismatch { sent: 1, received: Some(7) })
        ));
    }

    #[test]
    fn eof_and_garbage() {
        let (mut c, _rx) = scripted("");
        assert!(matches!(c.ping(), Err(RemoteError::Closed { last_id: 1 })));
        let (mut c, _rx) = scripted("not json\n");
        assert!(matches!(c.ping(), Err(RemoteError::Malformed { .. })));
    }

    #[test]
    fn wrong_prediction_count_is_malformed() {
        let (mut c, _rx) = scripted("{\"ok\":true,\"yhat\":[1.0,2.0],\"id\":1}\n");
        assert!(matches!(c.predict(&[vec![0.0]]), Err(RemoteError::Malformed { .. })));
    }

    #[test]
    fn non_finite_inputs_are_not_sent() {
        let (mut c, rx) = scripted("");
        assert!(matches!(c.fit(&[vec![f64::NAN]], &[1.0]), Err(RemoteError::NonFinite(_))));
        assert!(sent(&rx).is_empty());
        assert_eq!(c.last_id(), 0);
    }

    #[test]
    fn transport_parsing() {
        assert_eq!("tcp:127.0.0.1:9000".parse::<Transport>().unwrap(), Transport::Tcp("127.0.0.1:9000".into()));
        assert_eq!(
            "stdio:python3 server.py --mode echo".parse::<Transport>().unwrap(),
            Transport::Stdio {
                program: "python3".into(),
                args: vec!["server.py".into(), "--mode".into(), "echo".into()]
            }
        );
        assert!("udp:1".parse::<Transport>().is_err());
        assert!("stdio:".parse::<Transport>().is_err());
    }
}
