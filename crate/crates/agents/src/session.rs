//! Conversation state, tool dispatch, the transcript recorder and the
//! audit log.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{Message, ModelBackend, ModelRequest, ModelResponse, Role, ToolSchema, Turn};
use crate::AgentError;

pub const MAX_TOOL_CALLS_PER_TURN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AuditEvent {
    /// Arguments are kept whole, so file writes can be reconstructed.
    ToolCall { session: String, id: String, name: String, arguments: Value, result: String },
    Build { stage: String, iteration: usize, sources_digest: String, success: bool, output: String },
    Check { stage: String, iteration: usize, passed: bool, summary: String },
}

pub fn audit_to_jsonl(events: &[AuditEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Wraps a backend and writes each turn to the transcript as soon as the
/// response arrives, before anything acts on it.
pub struct Recorder<'b> {
    backend: &'b mut dyn ModelBackend,
    pub turns: Vec<Turn>,
    pub audit: Vec<AuditEvent>,
}

impl<'b> Recorder<'b> {
    pub fn new(backend: &'b mut dyn ModelBackend) -> Recorder<'b> {
        Recorder { backend, turns: Vec::new(), audit: Vec::new() }
    }

    pub fn call(&mut self, request: &ModelRequest) -> Result<ModelResponse, AgentError> {
        let digest = request.digest();
        let response = self.backend.respond(request, &digest)?;
        self.turns.push(Turn { seq: self.turns.len(), session: request.session.clone(), request_digest: digest, response: response.clone() });
        Ok(response)
    }
}

/// Tool outcome sent back to the model; `Err` is reported as a failed call.
pub type ToolResult = Result<String, String>;

pub struct AgentSession {
    pub id: String,
    pub role: Role,
    tools: Vec<ToolSchema>,
    messages: Vec<Message>,
    calls: usize,
}

impl AgentSession {
    pub fn new(id: impl Into<String>, role: Role, system: String, tools: Vec<ToolSchema>) -> AgentSession {
        AgentSession { id: id.into(), role, tools, messages: vec![Message::System { content: system }], calls: 0 }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Sends `user` and serves tool calls until the model answers in text.
    /// Calls to tools this session did not register are answered with an
    /// error and never reach `dispatch`.
    pub fn turn(&mut self, rec: &mut Recorder, user: String, dispatch: &mut dyn FnMut(&str, &Value) -> ToolResult) -> Result<String, AgentError> {
        self.messages.push(Message::User { content: user });
        let mut calls_this_turn = 0;
        loop {
            let request = ModelRequest { session: self.id.clone(), role: self.role, messages: self.messages.clone(), tools: self.tools.clone() };
            match rec.call(&request)? {
                ModelResponse::Text { text } => {
                    self.messages.push(Message::Assistant { content: text.clone() });
                    return Ok(text);
                }
                ModelResponse::ToolCall { name, arguments } => {
                    calls_this_turn += 1;
                    if calls_this_turn > MAX_TOOL_CALLS_PER_TURN {
                        return Err(AgentError::ToolLimit { session: self.id.clone(), limit: MAX_TOOL_CALLS_PER_TURN });
                    }
                    let id = format!("call-{}", self.calls);
                    self.calls += 1;
                    let outcome = if self.tools.iter().any(|t| t.name == name) {
                        dispatch(&name, &arguments)
                    } else {
                        Err(format!("unknown tool `{name}`"))
                    };
                    let content = match outcome {
                        Ok(s) => s,
                        Err(e) => format!("error: {e}"),
                    };
                    rec.audit.push(AuditEvent::ToolCall {
                        session: self.id.clone(),
                        id: id.clone(),
                        name: name.clone(),
                        arguments: arguments.clone(),
                        result: content.clone(),
                    });
                    self.messages.push(Message::ToolCall { id: id.clone(), name: name.clone(), arguments });
                    self.messages.push(Message::ToolResult { id, name, content });
                }
            }
        }
    }
}

pub(crate) fn string_arg<'a>(args: &'a Value, key: &str) -> Result<&'a str, String> {
    args.get(key).and_then(Value::as_str).ok_or_else(|| format!("missing string argument `{key}`"))
}
