//! Client and server sides of the adapter protocol.
//!
//! One JSON object per line in each direction:
//!
//! ```text
//! -> {"op": "hello", "libraries": ["mf", "mt"]}
//! <- {"ok": true, "version": "1"}
//! -> {"id": 7, "op": "eval", "code": "y = mt.abs(x)", "inputs": {"x": ...}}
//! <- {"id": 7, "status": "ok", "value": ...}
//! <- {"id": 7, "status": "error", "message": "..."}
//! ```
//!
//! An adapter that misses the per-evaluation deadline is killed and
//! respawned on the next request.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value as Json};

use crate::program::{Environment, Value};

use super::{Runtime, RuntimeError};

pub const PROTOCOL_VERSION: &str = "1";

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Shell command line that starts the adapter.
    pub command: String,
    pub libraries: Vec<String>,
    pub eval_timeout: Duration,
    pub handshake_timeout: Duration,
}

impl ExternalConfig {
    pub fn new(command: impl Into<String>) -> ExternalConfig {
        ExternalConfig {
            command: command.into(),
            libraries: Vec::new(),
            eval_timeout: Duration::from_secs(10),
            handshake_timeout: Duration::from_secs(30),
        }
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    version: String,
}

impl Process {
    fn spawn(config: &ExternalConfig) -> Result<Process, RuntimeError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&config.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| RuntimeError::Adapter(format!("cannot start `{}`: {e}", config.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut p = Process { child, stdin, lines: rx, version: String::new() };
        let reply = p.request(&json!({"op": "hello", "libraries": config.libraries}), config.handshake_timeout)?;
        if reply.get("ok").and_then(Json::as_bool) != Some(true) {
            p.kill();
            return Err(RuntimeError::Adapter(format!("handshake refused: {reply}")));
        }
        p.version = reply.get("version").and_then(Json::as_str).unwrap_or_default().to_string();
        Ok(p)
    }

    fn request(&mut self, message: &Json, timeout: Duration) -> Result<Json, RuntimeError> {
        let broken = |e: std::io::Error| RuntimeError::Adapter(format!("adapter pipe closed: {e}"));
        writeln!(self.stdin, "{message}").map_err(broken)?;
        self.stdin.flush().map_err(broken)?;
        loop {
            match self.lines.recv_timeout(timeout) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => {
                    return serde_json::from_str(&line)
                        .map_err(|e| RuntimeError::Adapter(format!("malformed adapter reply `{line}`: {e}")))
                }
                Ok(Err(e)) => return Err(broken(e)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(RuntimeError::Adapter("adapter exited".into()))
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(RuntimeError::Timeout(format!(
                        "evaluation exceeded {} ms",
                        timeout.as_millis()
                    )))
                }
            }
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalRuntime {
    config: ExternalConfig,
    state: Mutex<(Option<Process>, u64)>,
}

/// Starts the adapter and performs the handshake.
pub fn spawn_external(config: ExternalConfig) -> Result<ExternalRuntime, RuntimeError> {
    let process = Process::spawn(&config)?;
    Ok(ExternalRuntime { config, state: Mutex::new((Some(process), 0)) })
}

impl ExternalRuntime {
    pub fn version(&self) -> String {
        let state = self.state.lock().expect("adapter lock");
        state.0.as_ref().map(|p| p.version.clone()).unwrap_or_default()
    }
}

impl Drop for ExternalRuntime {
    fn drop(&mut self) {
        if let Ok(mut state) = self.state.lock() {
            if let Some(mut p) = state.0.take() {
                drop(p.stdin);
                let _ = p.child.wait();
            }
        }
    }
}

impl Runtime for ExternalRuntime {
    fn backend(&self) -> &str {
        "external"
    }

    fn eval(&self, code: &str, inputs: &Environment) -> Result<Value, RuntimeError> {
        let mut state = self.state.lock().expect("adapter lock");
        if state.0.is_none() {
            state.0 = Some(Process::spawn(&self.config)?);
        }
        state.1 += 1;
        let id = state.1;
        let payload: serde_json::Map<String, Json> = inputs.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let request = json!({"id": id, "op": "eval", "code": code, "inputs": payload});
        let process = state.0.as_mut().expect("spawned above");
        let reply = match process.request(&request, self.config.eval_timeout) {
            Ok(r) => r,
            Err(e) => {
                process.kill();
                state.0 = None;
                return Err(e);
            }
        };
        if reply.get("id").and_then(Json::as_u64) != Some(id) {
            return Err(RuntimeError::Adapter(format!("reply id mismatch, expected {id}: {reply}")));
        }
        match reply.get("status").and_then(Json::as_str) {
            Some("ok") => {
                let value = reply.get("value").ok_or_else(|| RuntimeError::Adapter("ok reply without value".into()))?;
                Value::from_json(value).map_err(|m| RuntimeError::Adapter(format!("bad value in reply: {m}")))
            }
            Some("error") => Err(RuntimeError::Raised(
                reply.get("message").and_then(Json::as_str).unwrap_or_default().to_string(),
            )),
            _ => Err(RuntimeError::Adapter(format!("reply without status: {reply}"))),
        }
    }
}

/// Answers one request line; `None` for blank lines.
pub fn handle_request(runtime: &dyn Runtime, line: &str) -> Option<Json> {
    if line.trim().is_empty() {
        return None;
    }
    let request: Json = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return Some(json!({"status": "error", "message": format!("malformed request: {e}")})),
    };
    let id = request.get("id").cloned().unwrap_or(Json::Null);
    match request.get("op").and_then(Json::as_str) {
        Some("hello") => Some(json!({"ok": true, "version": PROTOCOL_VERSION})),
        Some("eval") => {
            let code = request.get("code").and_then(Json::as_str).unwrap_or_default();
            let inputs = match request.get("inputs").and_then(Json::as_object) {
                Some(map) => map.iter().map(|(k, v)| Value::from_json(v).map(|v| (k.clone(), v))).collect(),
                None => Ok(Environment::new()),
            };
            let reply = match inputs {
                Err(m) => json!({"id": id, "status": "error", "message": format!("bad input: {m}")}),
                Ok(env) => match runtime.eval(code, &env) {
                    Ok(v) => json!({"id": id, "status": "ok", "value": v.to_json()}),
                    Err(e) => json!({"id": id, "status": "error", "message": e.message()}),
                },
            };
            Some(reply)
        }
        other => Some(json!({"id": id, "status": "error", "message": format!("unknown op {other:?}")})),
    }
}

/// Serves requests from `input` until end of stream, sleeping `delay` before
/// each evaluation reply.
pub fn serve(runtime: &dyn Runtime, input: impl BufRead, mut output: impl Write, delay: Duration) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if let Some(reply) = handle_request(runtime, &line) {
            if !delay.is_zero() && reply.get("id").is_some() {
                thread::sleep(delay);
            }
            writeln!(output, "{reply}")?;
            output.flush()?;
        }
    }
    Ok(())
}
