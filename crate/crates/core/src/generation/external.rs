//! Subprocess models over a line-delimited JSON protocol on stdio.
//!
//! Each request is one JSON object on the child's stdin carrying a string
//! `"id"` and a `"type"` (`score`, `translate` or `gen_context`). The child
//! answers with one object per line on stdout echoing the `"id"`; responses
//! may arrive in any order. An `"error"` field marks a failed request.
//!
//! ```text
//! -> {"id":"1","type":"score","src_doc":[..4],"tgt_doc":[..4]}
//! <- {"id":"1","logprob":-12.5}
//! -> {"id":"2","type":"translate","doc":[..]}
//! <- {"id":"2","doc":[..]}
//! -> {"id":"3","type":"gen_context","last":"...","seed":17}
//! <- {"id":"3","context":[..3]}
//! ```
//!
//! Many requests may be in flight at once from different threads. A response
//! without an `"id"` cannot be routed, so it fails every pending request and
//! poisons the connection, as does the child exiting.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::RngCore;
use serde_json::{json, Map, Value};

use super::{ContextGenerator, ModelError, Scorer, Translator};
use crate::model::{derive_rng, RngStream};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// What the subprocess is expected to answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Generator,
    Translator,
    Scorer,
}

impl Role {
    fn request_type(self) -> &'static str {
        match self {
            Role::Generator => "gen_context",
            Role::Translator => "translate",
            Role::Scorer => "score",
        }
    }
}

type Reply = Result<Map<String, Value>, ModelError>;

#[derive(Default)]
struct Pending {
    waiters: HashMap<String, Sender<Reply>>,
    dead: Option<ModelError>,
}

impl Pending {
    fn fail_all(&mut self, err: ModelError) {
        for (_, tx) in self.waiters.drain() {
            let _ = tx.send(Err(err.clone()));
        }
        self.dead.get_or_insert(err);
    }
}

/// Counters for one subprocess connection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConnectionStats {
    pub requests: u64,
    pub responses: u64,
}

/// A model served by a child process.
pub struct ExternalModel {
    role: Role,
    timeout: Duration,
    child: Mutex<Child>,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Arc<Mutex<Pending>>,
    reader: Option<JoinHandle<()>>,
    next_id: AtomicU64,
    requests: AtomicU64,
    responses: Arc<AtomicU64>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("role", &self.role)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl ExternalModel {
    /// Spawns `command` (split on whitespace; no shell quoting).
    pub fn spawn(command: &str, role: Role, timeout: Duration) -> Result<Self, ModelError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| ModelError::Crashed("empty model command".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(parts);
        Self::from_command(cmd, role, timeout)
    }

    pub fn from_command(mut cmd: Command, role: Role, timeout: Duration) -> Result<Self, ModelError> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ModelError::Crashed(format!("spawn {cmd:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let pending = Arc::new(Mutex::new(Pending::default()));
        let responses = Arc::new(AtomicU64::new(0));
        let reader = {
            let pending = Arc::clone(&pending);
            let responses = Arc::clone(&responses);
            std::thread::spawn(move || read_responses(BufReader::new(stdout), &pending, &responses))
        };

        Ok(Self {
            role,
            timeout,
            child: Mutex::new(child),
            stdin: Mutex::new(Some(stdin)),
            pending,
            reader: Some(reader),
            next_id: AtomicU64::new(1),
            requests: AtomicU64::new(0),
            responses,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn stats(&self) -> ConnectionStats {
        ConnectionStats {
            requests: self.requests.load(Ordering::SeqCst),
            responses: self.responses.load(Ordering::SeqCst),
        }
    }

    /// Sends one request and blocks until its response (or the timeout).
    pub fn request(&self, kind: &str, mut fields: Map<String, Value>) -> Reply {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst).to_string();
        let (tx, rx) = mpsc::channel();
        {
            let mut p = self.pending.lock().expect("pending lock");
            if let Some(err) = &p.dead {
                return Err(err.clone());
            }
            p.waiters.insert(id.clone(), tx);
        }
        fields.insert("id".into(), Value::String(id.clone()));
        fields.insert("type".into(), Value::String(kind.into()));
        let mut line = Value::Object(fields).to_string();
        line.push('\n');

        let written = {
            let mut stdin = self.stdin.lock().expect("stdin lock");
            match stdin.as_mut() {
                Some(w) => w.write_all(line.as_bytes()).and_then(|_| w.flush()),
                None => Err(std::io::Error::other("connection closed")),
            }
        };
        if let Err(e) = written {
            self.forget(&id);
            let err = ModelError::Crashed(format!("write request: {e}"));
            return Err(self.dead_reason().unwrap_or(err));
        }
        self.requests.fetch_add(1, Ordering::SeqCst);

        match rx.recv_timeout(self.timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                self.forget(&id);
                Err(ModelError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => Err(self
                .dead_reason()
                .unwrap_or_else(|| ModelError::Crashed("response channel closed".into()))),
        }
    }

    fn forget(&self, id: &str) {
        self.pending.lock().expect("pending lock").waiters.remove(id);
    }

    fn dead_reason(&self) -> Option<ModelError> {
        self.pending.lock().expect("pending lock").dead.clone()
    }

    fn expect_role(&self, role: Role) -> Result<(), ModelError> {
        if self.role == role {
            Ok(())
        } else {
            Err(ModelError::Contract(format!(
                "model spawned as {:?} cannot serve {} requests",
                self.role,
                role.request_type()
            )))
        }
    }

    /// Closes stdin, waits for the child to exit and returns the counters.
    pub fn shutdown(mut self) -> Result<ConnectionStats, ModelError> {
        self.close(Duration::from_secs(10))?;
        Ok(self.stats())
    }

    fn close(&mut self, grace: Duration) -> Result<(), ModelError> {
        drop(self.stdin.lock().expect("stdin lock").take());
        let mut child = self.child.lock().expect("child lock");
        let deadline = Instant::now() + grace;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(10))
                }
                Ok(None) => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Err(e) => return Err(ModelError::Crashed(format!("wait: {e}"))),
            }
        };
        drop(child);
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
        match status {
            Some(s) if s.success() => Ok(()),
            Some(s) => Err(ModelError::Crashed(format!("exited with {s}"))),
            None => Err(ModelError::Crashed("did not exit after stdin closed; killed".into())),
        }
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        if self.reader.is_some() {
            let _ = self.close(Duration::from_secs(2));
        }
    }
}

fn read_responses<R: BufRead>(reader: R, pending: &Mutex<Pending>, responses: &AtomicU64) {
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                pending
                    .lock()
                    .expect("pending lock")
                    .fail_all(ModelError::Crashed(format!("read response: {e}")));
                return;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let obj = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(obj)) => obj,
            Ok(_) | Err(_) => {
                pending
                    .lock()
                    .expect("pending lock")
                    .fail_all(ModelError::Protocol(format!("not a JSON object: {line:?}")));
                return;
            }
        };
        let id = match obj.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => {
                pending
                    .lock()
                    .expect("pending lock")
                    .fail_all(ModelError::Protocol(format!("response without id: {line:?}")));
                return;
            }
        };
        responses.fetch_add(1, Ordering::SeqCst);
        let reply = match obj.get("error") {
            Some(e) => Err(ModelError::Remote(
                e.as_str().map(str::to_string).unwrap_or_else(|| e.to_string()),
            )),
            None => Ok(obj),
        };
        let waiter = pending.lock().expect("pending lock").waiters.remove(&id);
        match waiter {
            Some(tx) => {
                let _ = tx.send(reply);
            }
            None => log::warn!("dropping response for unknown or expired request id {id:?}"),
        }
    }
    pending
        .lock()
        .expect("pending lock")
        .fail_all(ModelError::Crashed("model process closed its output".into()));
}

fn string_list(obj: &Map<String, Value>, field: &str) -> Result<Vec<String>, ModelError> {
    let arr = obj
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| ModelError::Protocol(format!("response lacks array field {field:?}")))?;
    arr.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| ModelError::Protocol(format!("{field:?} holds a non-string")))
        })
        .collect()
}

fn fields(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("json! object literal"),
    }
}

impl ContextGenerator for ExternalModel {
    fn sample_context(&self, last: &str, rng: &mut RngStream) -> Result<Vec<String>, ModelError> {
        self.expect_role(Role::Generator)?;
        // Keep seeds within 2^53 so that any JSON peer reads them exactly.
        let seed = rng.next_u64() >> 11;
        let reply = self.request("gen_context", fields(json!({ "last": last, "seed": seed })))?;
        string_list(&reply, "context")
    }
}

impl Translator for ExternalModel {
    fn translate(&self, doc: &[String]) -> Result<Vec<String>, ModelError> {
        self.expect_role(Role::Translator)?;
        let reply = self.request("translate", fields(json!({ "doc": doc })))?;
        string_list(&reply, "doc")
    }
}

impl Scorer for ExternalModel {
    fn score(&self, src_doc: &[String], tgt_doc: &[String]) -> Result<f64, ModelError> {
        self.expect_role(Role::Scorer)?;
        let reply = self.request("score", fields(json!({ "src_doc": src_doc, "tgt_doc": tgt_doc })))?;
        reply
            .get("logprob")
            .and_then(Value::as_f64)
            .ok_or_else(|| ModelError::Protocol("response lacks numeric \"logprob\"".into()))
    }
}

/// Models a [`serve`] loop answers with. Unset roles reply with an error.
#[derive(Default)]
pub struct ServedModels<'a> {
    pub generator: Option<&'a dyn ContextGenerator>,
    pub translator: Option<&'a dyn Translator>,
    pub scorer: Option<&'a dyn Scorer>,
}

/// Answers protocol requests read from `input` until EOF, in arrival order.
///
/// Returns the number of requests served. Malformed requests get an
/// `"error"` reply when they carry an id and are skipped otherwise.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    models: &ServedModels<'_>,
) -> std::io::Result<u64> {
    let mut served = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Map<String, Value> = match serde_json::from_str(&line) {
            Ok(Value::Object(m)) => m,
            _ => {
                log::warn!("skipping malformed request {line:?}");
                continue;
            }
        };
        let Some(id) = req.get("id").cloned() else {
            log::warn!("skipping request without id");
            continue;
        };
        let mut reply = match answer(&req, models) {
            Ok(m) => m,
            Err(e) => fields(json!({ "error": e })),
        };
        reply.insert("id".into(), id);
        writeln!(output, "{}", Value::Object(reply))?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}

fn answer(req: &Map<String, Value>, models: &ServedModels<'_>) -> Result<Map<String, Value>, String> {
    let list = |field: &str| -> Result<Vec<String>, String> {
        serde_json::from_value(req.get(field).cloned().unwrap_or(Value::Null))
            .map_err(|e| format!("field {field:?}: {e}"))
    };
    match req.get("type").and_then(Value::as_str) {
        Some("score") => {
            let scorer = models.scorer.ok_or("no scorer served")?;
            let lp = scorer
                .score(&list("src_doc")?, &list("tgt_doc")?)
                .map_err(|e| e.to_string())?;
            Ok(fields(json!({ "logprob": lp })))
        }
        Some("translate") => {
            let bt = models.translator.ok_or("no translator served")?;
            let doc = bt.translate(&list("doc")?).map_err(|e| e.to_string())?;
            Ok(fields(json!({ "doc": doc })))
        }
        Some("gen_context") => {
            let gen = models.generator.ok_or("no generator served")?;
            let last = req
                .get("last")
                .and_then(Value::as_str)
                .ok_or("field \"last\" must be a string")?;
            let seed = req.get("seed").and_then(Value::as_u64).unwrap_or(0);
            let mut rng = derive_rng(seed, last);
            let ctx = gen.sample_context(last, &mut rng).map_err(|e| e.to_string())?;
            Ok(fields(json!({ "context": ctx })))
        }
        other => Err(format!("unknown request type {other:?}")),
    }
}
