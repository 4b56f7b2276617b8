//! HTTP service, transcripts and tooling around the advisor engine.

pub mod api;
pub mod bench;
pub mod config;
pub mod golden;
pub mod transcript;

use std::sync::Arc;

use advisor_core::engine::{Backends, Engine};
use advisor_core::fixtures;
use advisor_core::llm::{HttpChatTransport, RemoteModel};
use advisor_core::store::KnowledgeStore;
use advisor_core::templates::Templates;
use anyhow::{Context, Result};

use config::{BackendKind, ServiceConfig};

/// Loads the configured snapshot, or the bundled demo store.
pub fn load_store(config: &ServiceConfig) -> Result<KnowledgeStore> {
    match &config.snapshot {
        Some(path) => KnowledgeStore::load_snapshot(path).with_context(|| format!("loading {}", path.display())),
        None => Ok(fixtures::demo_store()),
    }
}

pub fn build_engine(config: &ServiceConfig, store: KnowledgeStore) -> Engine {
    let backends = match config.backend {
        BackendKind::Deterministic => Backends::deterministic(),
        BackendKind::Remote => {
            let transport = Arc::new(HttpChatTransport::new(&config.llm));
            Backends::remote(RemoteModel::new(transport, config.llm.model.clone()), config.llm.temperatures)
        }
    };
    Engine::new(store.into_shared(), backends, Templates::english(), config.solver.clone())
}
