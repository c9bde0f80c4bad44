pub mod actor;
pub mod director;
pub mod llm;
pub mod retrieval;
pub mod script;
pub mod session;
pub mod util;
