//! Language-model agents over an OpenAI-compatible chat-completion API.
//!
//! Nothing in the simulator needs this crate; it only supplies an
//! [`ExternalPolicy`](cdsim_core::agents::ExternalPolicy) for runs that use
//! language-model agents.

pub mod client;
pub mod config;
pub mod fake;
pub mod policy;
pub mod prompt;
pub mod reply;

pub use client::{ChatClient, Completion, GatewayError, RetryRecord, Usage};
pub use config::EndpointConfig;
pub use fake::{FakeEndpoint, FakeReply};
pub use policy::{LlmPolicy, LlmStats, Phase, TranscriptEntry};
pub use prompt::{render_prompt, PromptOptions};
pub use reply::{parse_agent_reply, ActionBounds, AgentReply, ParseError};
