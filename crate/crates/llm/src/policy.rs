//! Language-model agents plugged into the core agent loop.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cdsim_core::agents::{AgentSpec, ExternalPolicy, Observation, PolicyError};
use cdsim_core::ActionValue;
use serde::{Deserialize, Serialize};

use crate::client::{ChatClient, RetryRecord, Usage};
use crate::config::EndpointConfig;
use crate::prompt::{render_prompt, PromptOptions};
use crate::reply::{parse_agent_reply, ActionBounds, AgentReply};

pub const CORRECTIVE_SUFFIX: &str = "Respond with only the JSON object.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Message,
    Action,
}

/// One prompt/reply exchange, kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round: u32,
    pub agent_id: usize,
    pub phase: Phase,
    /// 1 for the first prompt, 2 for the corrective re-prompt.
    pub attempt: u32,
    pub model: String,
    pub prompt: String,
    pub reply: Option<String>,
    pub latency_ms: u64,
    pub usage: Option<Usage>,
    pub retries: Vec<RetryRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmStats {
    pub requests: usize,
    pub reprompts: usize,
    pub parse_failures: usize,
    pub gateway_failures: usize,
}

pub struct LlmPolicy {
    default: ChatClient,
    overrides: BTreeMap<usize, ChatClient>,
    opts: PromptOptions,
    log: Mutex<Vec<TranscriptEntry>>,
    requests: AtomicUsize,
    reprompts: AtomicUsize,
    parse_failures: AtomicUsize,
    gateway_failures: AtomicUsize,
}

impl LlmPolicy {
    pub fn new(cfg: EndpointConfig, opts: PromptOptions) -> Self {
        Self {
            default: ChatClient::new(cfg),
            overrides: BTreeMap::new(),
            opts,
            log: Mutex::new(Vec::new()),
            requests: AtomicUsize::new(0),
            reprompts: AtomicUsize::new(0),
            parse_failures: AtomicUsize::new(0),
            gateway_failures: AtomicUsize::new(0),
        }
    }

    /// Routes one agent to a different endpoint or model.
    pub fn with_override(mut self, agent_id: usize, cfg: EndpointConfig) -> Self {
        self.overrides.insert(agent_id, ChatClient::new(cfg));
        self
    }

    fn client(&self, agent_id: usize) -> &ChatClient {
        self.overrides.get(&agent_id).unwrap_or(&self.default)
    }

    pub fn stats(&self) -> LlmStats {
        LlmStats {
            requests: self.requests.load(Ordering::SeqCst),
            reprompts: self.reprompts.load(Ordering::SeqCst),
            parse_failures: self.parse_failures.load(Ordering::SeqCst),
            gateway_failures: self.gateway_failures.load(Ordering::SeqCst),
        }
    }

    /// Removes and returns the exchanges logged so far.
    pub fn take_transcript(&self) -> Vec<TranscriptEntry> {
        std::mem::take(&mut *self.log.lock().unwrap_or_else(|e| e.into_inner()))
    }

    fn push(&self, e: TranscriptEntry) {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(e);
    }

    fn exchange(&self, spec: &AgentSpec, obs: &Observation, phase: Phase, attempt: u32, prompt: String) -> Result<String, PolicyError> {
        let client = self.client(spec.agent_id);
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut entry = TranscriptEntry {
            round: obs.round,
            agent_id: spec.agent_id,
            phase,
            attempt,
            model: client.config().model.clone(),
            prompt,
            reply: None,
            latency_ms: 0,
            usage: None,
            retries: Vec::new(),
            error: None,
        };
        match client.complete(&entry.prompt) {
            Ok(c) => {
                entry.reply = Some(c.text.clone());
                entry.latency_ms = c.latency_ms;
                entry.usage = c.usage;
                entry.retries = c.retries;
                self.push(entry);
                Ok(c.text)
            }
            Err(e) => {
                self.gateway_failures.fetch_add(1, Ordering::SeqCst);
                entry.error = Some(e.to_string());
                self.push(entry);
                Err(PolicyError(e.to_string()))
            }
        }
    }

    /// Prompts once and, if the reply cannot be used, once more with a
    /// corrective instruction.
    pub fn query(&self, spec: &AgentSpec, obs: &Observation, phase: Phase) -> Result<AgentReply, PolicyError> {
        let bounds = ActionBounds::for_view(&obs.view);
        let prompt = render_prompt(spec, obs, self.opts);
        let text = self.exchange(spec, obs, phase, 1, prompt.clone())?;
        let err = match parse_agent_reply(&text, bounds) {
            Ok(r) => return Ok(r),
            Err(e) => e,
        };
        log::warn!("agent {} round {}: unusable reply ({err}); re-prompting", spec.agent_id, obs.round);
        self.reprompts.fetch_add(1, Ordering::SeqCst);
        let retry = format!("{prompt}\n\nYour previous reply was:\n{text}\n\nIt could not be used ({err}). {CORRECTIVE_SUFFIX}");
        let text = self.exchange(spec, obs, phase, 2, retry)?;
        parse_agent_reply(&text, bounds).map_err(|e| {
            self.parse_failures.fetch_add(1, Ordering::SeqCst);
            PolicyError(format!("unusable reply after re-prompt: {e}"))
        })
    }
}

impl ExternalPolicy for LlmPolicy {
    fn message(&self, agent: &AgentSpec, obs: &Observation) -> Result<String, PolicyError> {
        self.query(agent, obs, Phase::Message).map(|r| r.message)
    }

    fn action(&self, agent: &AgentSpec, obs: &Observation) -> Result<ActionValue, PolicyError> {
        self.query(agent, obs, Phase::Action).map(|r| r.action)
    }
}
