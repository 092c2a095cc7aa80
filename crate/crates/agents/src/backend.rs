use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    ProgramAnalysis,
    ModuleIsolation,
    Spec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    /// JSON schema of the arguments object.
    pub parameters: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum Message {
    System { content: String },
    User { content: String },
    Assistant { content: String },
    ToolCall { id: String, name: String, arguments: Value },
    ToolResult { id: String, name: String, content: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub session: String,
    pub role: Role,
    pub messages: Vec<Message>,
    pub tools: Vec<ToolSchema>,
}

impl ModelRequest {
    /// SHA-256 of the request's JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelResponse {
    Text { text: String },
    ToolCall { name: String, arguments: Value },
}

/// Produces one response per request. Implementations see the request
/// digest that will be written to the transcript.
pub trait ModelBackend {
    fn respond(&mut self, request: &ModelRequest, digest: &str) -> Result<ModelResponse, AgentError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub seq: usize,
    pub session: String,
    pub request_digest: String,
    pub response: ModelResponse,
}

pub fn transcript_to_jsonl(turns: &[Turn]) -> String {
    let mut out = String::new();
    for t in turns {
        out.push_str(&serde_json::to_string(t).expect("turn serializes"));
        out.push('\n');
    }
    out
}

pub fn transcript_from_jsonl(text: &str) -> Result<Vec<Turn>, AgentError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| AgentError::Transcript(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Plays back a recorded transcript, refusing any request whose digest
/// differs from the recorded one.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    turns: Vec<Turn>,
    pos: usize,
}

impl ReplayBackend {
    pub fn new(turns: Vec<Turn>) -> ReplayBackend {
        ReplayBackend { turns, pos: 0 }
    }

    pub fn load(path: &Path) -> Result<ReplayBackend, AgentError> {
        let text = fs::read_to_string(path).map_err(|e| AgentError::Transcript(format!("{}: {e}", path.display())))?;
        Ok(ReplayBackend::new(transcript_from_jsonl(&text)?))
    }

    pub fn remaining(&self) -> usize {
        self.turns.len() - self.pos
    }
}

impl ModelBackend for ReplayBackend {
    fn respond(&mut self, request: &ModelRequest, digest: &str) -> Result<ModelResponse, AgentError> {
        let Some(turn) = self.turns.get(self.pos) else {
            return Err(AgentError::TranscriptExhausted { turn: self.pos, session: request.session.clone() });
        };
        if turn.request_digest != digest || turn.session != request.session {
            return Err(AgentError::Drift {
                turn: self.pos,
                expected: format!("{} {}", turn.session, turn.request_digest),
                actual: format!("{} {digest}", request.session),
            });
        }
        self.pos += 1;
        Ok(turn.response.clone())
    }
}

/// Canned responses in order, ignoring the requests. Used to author
/// transcripts. String values of the form `{"$include": "path"}` are
/// replaced by the contents of that file, relative to `base`.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    responses: Vec<ModelResponse>,
    pos: usize,
}

#[derive(Deserialize)]
struct Script {
    responses: Vec<Value>,
}

fn resolve_includes(v: Value, base: &Path) -> io::Result<Value> {
    Ok(match v {
        Value::Object(m) if m.len() == 1 && m.contains_key("$include") => {
            let rel = m["$include"].as_str().unwrap_or_default();
            Value::String(fs::read_to_string(base.join(rel))?)
        }
        Value::Object(m) => {
            let mut out = serde_json::Map::new();
            for (k, v) in m {
                out.insert(k, resolve_includes(v, base)?);
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(|v| resolve_includes(v, base)).collect::<io::Result<_>>()?),
        other => other,
    })
}

impl ScriptedBackend {
    pub fn new(responses: Vec<ModelResponse>) -> ScriptedBackend {
        ScriptedBackend { responses, pos: 0 }
    }

    pub fn load(path: &Path, base: &Path) -> Result<ScriptedBackend, AgentError> {
        let bad = |e: String| AgentError::Transcript(format!("{}: {e}", path.display()));
        let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let script: Script = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let mut responses = Vec::new();
        for r in script.responses {
            let r = resolve_includes(r, base).map_err(|e| bad(e.to_string()))?;
            responses.push(serde_json::from_value(r).map_err(|e| bad(e.to_string()))?);
        }
        Ok(ScriptedBackend::new(responses))
    }

    pub fn remaining(&self) -> usize {
        self.responses.len() - self.pos
    }
}

impl ModelBackend for ScriptedBackend {
    fn respond(&mut self, request: &ModelRequest, _digest: &str) -> Result<ModelResponse, AgentError> {
        let r = self
            .responses
            .get(self.pos)
            .cloned()
            .ok_or_else(|| AgentError::TranscriptExhausted { turn: self.pos, session: request.session.clone() })?;
        self.pos += 1;
        Ok(r)
    }
}

/// Chat-completions client for an OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub endpoint: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
}

pub const TEMPERATURE: f64 = 0.0;

impl HttpBackend {
    /// Reads the key from environment variable `key_var`.
    pub fn from_env(endpoint: &str, model: &str, key_var: &str) -> Result<HttpBackend, AgentError> {
        let api_key = std::env::var(key_var).map_err(|_| AgentError::Backend(format!("environment variable {key_var} is not set")))?;
        Ok(HttpBackend { endpoint: endpoint.to_string(), model: model.to_string(), api_key, timeout: Duration::from_secs(300) })
    }

    pub fn request_body(&self, request: &ModelRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| match m {
                Message::System { content } => json!({"role": "system", "content": content}),
                Message::User { content } => json!({"role": "user", "content": content}),
                Message::Assistant { content } => json!({"role": "assistant", "content": content}),
                Message::ToolCall { id, name, arguments } => json!({
                    "role": "assistant",
                    "content": null,
                    "tool_calls": [{"id": id, "type": "function", "function": {"name": name, "arguments": arguments.to_string()}}],
                }),
                Message::ToolResult { id, content, .. } => json!({"role": "tool", "tool_call_id": id, "content": content}),
            })
            .collect();
        let mut body = json!({"model": self.model, "temperature": TEMPERATURE, "messages": messages});
        if !request.tools.is_empty() {
            body["tools"] = request
                .tools
                .iter()
                .map(|t| json!({"type": "function", "function": {"name": t.name, "description": t.description, "parameters": t.parameters}}))
                .collect();
        }
        body
    }

    pub fn parse_response(body: &Value) -> Result<ModelResponse, AgentError> {
        let msg = &body["choices"][0]["message"];
        if let Some(call) = msg["tool_calls"].get(0) {
            let name = call["function"]["name"].as_str().ok_or_else(|| AgentError::Backend("tool call without a name".into()))?;
            let raw = call["function"]["arguments"].as_str().unwrap_or("{}");
            let arguments = serde_json::from_str(raw).map_err(|e| AgentError::Backend(format!("tool arguments are not JSON: {e}")))?;
            return Ok(ModelResponse::ToolCall { name: name.to_string(), arguments });
        }
        match msg["content"].as_str() {
            Some(text) => Ok(ModelResponse::Text { text: text.to_string() }),
            None => Err(AgentError::Backend(format!("response has neither text nor a tool call: {body}"))),
        }
    }
}

impl ModelBackend for HttpBackend {
    fn respond(&mut self, request: &ModelRequest, _digest: &str) -> Result<ModelResponse, AgentError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut resp = agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(self.request_body(request))
            .map_err(|e| AgentError::Backend(e.to_string()))?;
        let body: Value = resp.body_mut().read_json().map_err(|e| AgentError::Backend(e.to_string()))?;
        HttpBackend::parse_response(&body)
    }
}

/// Where transcripts for each stage live under a replay directory.
pub fn transcript_path(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("{stage}.jsonl"))
}
