use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, ValueEnum};
use forcelang::lang::{EmbeddingProvider, HashingProvider, TableProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Table,
    Hashing,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// Embedding source. Defaults to `table` when a table path is known,
    /// otherwise `hashing`.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Embedding table file.
    #[arg(long, env = "FORCELANG_EMBED_TABLE")]
    pub table: Option<PathBuf>,
    /// Seed of the hashing provider.
    #[arg(long, default_value_t = 0)]
    pub embed_seed: u64,
}

impl ProviderArgs {
    /// Whether the user chose a provider explicitly.
    pub fn is_set(&self) -> bool {
        self.provider.is_some() || self.table.is_some()
    }

    pub fn build(&self) -> anyhow::Result<Arc<dyn EmbeddingProvider>> {
        let kind = self.provider.unwrap_or(if self.table.is_some() {
            ProviderKind::Table
        } else {
            ProviderKind::Hashing
        });
        match kind {
            ProviderKind::Hashing => Ok(Arc::new(HashingProvider::new(self.embed_seed))),
            ProviderKind::Table => {
                let Some(path) = &self.table else {
                    return crate::usage("--provider table needs --table or FORCELANG_EMBED_TABLE");
                };
                let table = TableProvider::from_path(path)
                    .with_context(|| format!("loading embedding table {}", path.display()))?;
                log::info!("embedding table {} ({} rows)", path.display(), table.len());
                Ok(Arc::new(table))
            }
        }
    }
}
