pub mod domain;
pub mod solver;
pub mod store;
pub mod synth;
pub mod llm;
pub mod intent;
pub mod inner_speech;
pub mod fixtures;
pub mod query;
pub mod templates;
pub mod explainer;
pub mod timing;
pub mod engine;
