//! Chat-completion gateway: prompt templates, structured-output parsing,
//! and the backends that answer requests.

pub mod backend;
pub mod demo;
pub mod gateway;
pub mod http;
pub mod parse;
pub mod select;
pub mod template;

pub use backend::{BackendError, LlmBackend, LlmCall, ReplayBackend, ScriptedBackend};
pub use demo::DemoResponder;
pub use gateway::{Gateway, GatewayConfig, GatewayState, LlmError, LlmRequest, TranscriptEntry};
pub use http::{HttpBackend, HttpConfig};
pub use parse::{CheckResult, OutlineResult, ParseError, ScriptResult};
pub use select::BackendSpec;
pub use template::{Bindings, ChatMessage, DecodeHints, PromptTemplate, SpeakerRole, TemplateId, TemplateSet};
