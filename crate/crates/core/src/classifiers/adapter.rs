//! Line-delimited JSON protocol for out-of-process strong classifiers, the
//! client side (`ExternalStrong`) and an in-process server loop.
//!
//! Requests:
//! `{"op":"hello","m":9}` and `{"op":"predict","id":"s1","features":[..]}`
//! (or `"image"` and `"mask"` paths instead of `"features"`).
//! Responses: `{"op":"hello","ok":true}`,
//! `{"op":"predict","id":"s1","class":3,"confidence":0.9,"probs":[..]}`
//! and `{"op":"error","id":null,"error":"..."}`.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::query::{Assignment, Query};
use super::strong::StrongClassifier;
use crate::datasets::Sample;
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Hello {
        m: usize,
    },
    Predict {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<PathBuf>,
    },
}

impl Request {
    pub fn predict(q: &Query) -> Self {
        let (image, mask, features) = match (q.image, q.mask) {
            (Some(i), Some(m)) => (Some(i.to_path_buf()), Some(m.to_path_buf()), None),
            _ => (None, None, q.features.map(<[f64]>::to_vec)),
        };
        Request::Predict {
            id: q.id.to_string(),
            features,
            image,
            mask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Response {
    Hello {
        ok: bool,
    },
    Predict {
        id: String,
        class: usize,
        confidence: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<f64>>,
    },
    Error {
        id: Option<String>,
        error: String,
    },
}

impl From<Assignment> for Response {
    fn from(a: Assignment) -> Self {
        Response::Predict {
            id: a.id,
            class: a.class,
            confidence: a.confidence,
            probs: a.probs,
        }
    }
}

/// Best-effort id recovery from a line that failed to parse as a request.
fn salvage_id(line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    v.get("id")?.as_str().map(str::to_string)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub requests: usize,
    pub errors: usize,
}

/// Answer requests from `input` until end of input or until `limit`
/// requests have been answered. One response line per request line,
/// flushed immediately.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    classifier: &dyn StrongClassifier,
    m: Option<usize>,
    limit: Option<usize>,
) -> Result<ServeStats> {
    let mut stats = ServeStats::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.requests += 1;
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(Request::Hello { m: asked }) => Response::Hello {
                ok: m.is_none_or(|known| known == asked),
            },
            Ok(Request::Predict {
                id,
                features,
                image,
                mask,
            }) => {
                let q = Query {
                    id: &id,
                    features: features.as_deref(),
                    image: image.as_deref(),
                    mask: mask.as_deref(),
                };
                match classifier.classify(&[q]) {
                    Ok(mut out) if out.len() == 1 => Response::from(out.remove(0)),
                    Ok(_) => Response::Error {
                        id: Some(id.clone()),
                        error: "classifier returned no assignment".into(),
                    },
                    Err(e) => Response::Error {
                        id: Some(id.clone()),
                        error: e.to_string(),
                    },
                }
            }
            Err(e) => Response::Error {
                id: salvage_id(&line),
                error: format!("malformed request: {e}"),
            },
        };
        if matches!(response, Response::Error { .. }) {
            stats.errors += 1;
        }
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
        if limit.is_some_and(|n| stats.requests >= n) {
            break;
        }
    }
    Ok(stats)
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

/// Strong classifier living in another process that speaks the protocol on
/// its standard streams. Training happens outside; `train` only performs
/// the handshake.
pub struct ExternalStrong {
    channel: Mutex<Channel>,
    pub timeout: Duration,
    nominal: Duration,
}

impl ExternalStrong {
    pub fn spawn(program: impl Into<PathBuf>, args: &[String]) -> Result<Self> {
        let program = program.into();
        let mut child = Command::new(&program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot start {}: {e}", program.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(ExternalStrong {
            channel: Mutex::new(Channel {
                child,
                stdin,
                lines: rx,
            }),
            timeout: DEFAULT_TIMEOUT,
            nominal: Duration::ZERO,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_nominal_cost(mut self, cost: Duration) -> Self {
        self.nominal = cost;
        self
    }

    fn exchange(&self, req: &Request, what: &str) -> Result<Response> {
        let mut ch = self.channel.lock().map_err(|_| Error::Adapter("adapter lock poisoned".into()))?;
        let mut line = serde_json::to_string(req)?;
        line.push('\n');
        ch.stdin
            .write_all(line.as_bytes())
            .and_then(|_| ch.stdin.flush())
            .map_err(|e| Error::Adapter(format!("{what}: server not accepting input ({e})")))?;
        match ch.lines.recv_timeout(self.timeout) {
            Ok(Ok(text)) => serde_json::from_str(&text)
                .map_err(|e| Error::Adapter(format!("{what}: unreadable response '{text}': {e}"))),
            Ok(Err(e)) => Err(Error::Adapter(format!("{what}: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Adapter(format!(
                "{what}: no response within {:?}",
                self.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Adapter(format!("{what}: server exited"))),
        }
    }

    pub fn hello(&self, m: usize) -> Result<()> {
        match self.exchange(&Request::Hello { m }, "handshake")? {
            Response::Hello { ok: true } => Ok(()),
            other => Err(Error::Adapter(format!("handshake refused: {other:?}"))),
        }
    }
}

impl StrongClassifier for ExternalStrong {
    fn train(&mut self, _samples: &[&Sample], m: usize) -> Result<()> {
        self.hello(m)
    }

    fn classify(&self, queries: &[Query]) -> Result<Vec<Assignment>> {
        let mut out = Vec::with_capacity(queries.len());
        for q in queries {
            let what = format!("sample '{}'", q.id);
            match self.exchange(&Request::predict(q), &what)? {
                Response::Predict {
                    id,
                    class,
                    confidence,
                    probs,
                } if id == q.id => out.push(Assignment {
                    id,
                    class,
                    confidence,
                    probs,
                }),
                Response::Error { error, .. } => return Err(Error::Adapter(format!("{what}: {error}"))),
                other => return Err(Error::Adapter(format!("{what}: unexpected response {other:?}"))),
            }
        }
        Ok(out)
    }

    fn nominal_cost(&self) -> Duration {
        self.nominal
    }
}

impl Drop for ExternalStrong {
    fn drop(&mut self) {
        if let Ok(ch) = self.channel.get_mut() {
            let _ = ch.child.kill();
            let _ = ch.child.wait();
        }
    }
}
