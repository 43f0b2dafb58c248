use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{parse_document, DocumentError, UmrDocument, EXEMPLAR_ENTRIES};

/// The UMR prompt draws from exactly this many pre-selected files.
pub const EXEMPLAR_FILE_COUNT: usize = 5;

#[derive(Debug, Error)]
pub enum ExemplarError {
    #[error("expected {EXEMPLAR_FILE_COUNT} exemplar files, got {0}")]
    WrongFileCount(usize),
    #[error("reading exemplar {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("exemplar {id}: {source}")]
    Parse {
        id: String,
        #[source]
        source: DocumentError,
    },
}

/// One draw from the pool: the truncated document and which file it was.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledExemplar {
    pub file_index: usize,
    pub file_id: String,
    pub document: UmrDocument,
}

/// Five parsed exemplar documents, already truncated to their first three
/// entries. Draws are a pure function of `(seed, draw_index)`.
#[derive(Debug, Clone)]
pub struct ExemplarPool {
    documents: Vec<UmrDocument>,
}

impl ExemplarPool {
    pub fn from_files<P: AsRef<Path>>(paths: &[P]) -> Result<Self, ExemplarError> {
        if paths.len() != EXEMPLAR_FILE_COUNT {
            return Err(ExemplarError::WrongFileCount(paths.len()));
        }
        let sources = paths
            .iter()
            .map(|p| {
                let p = p.as_ref();
                let text = std::fs::read_to_string(p).map_err(|source| ExemplarError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                // File names, not full paths, so ids are machine-independent.
                let id = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                Ok((id, text))
            })
            .collect::<Result<Vec<_>, ExemplarError>>()?;
        Self::from_sources(&sources)
    }

    /// Builds the pool from `(file id, file text)` pairs.
    pub fn from_sources<S: AsRef<str>, T: AsRef<str>>(
        sources: &[(S, T)],
    ) -> Result<Self, ExemplarError> {
        if sources.len() != EXEMPLAR_FILE_COUNT {
            return Err(ExemplarError::WrongFileCount(sources.len()));
        }
        let documents = sources
            .iter()
            .map(|(id, text)| {
                parse_document(id.as_ref(), text.as_ref())
                    .map(|d| d.truncate(EXEMPLAR_ENTRIES))
                    .map_err(|source| ExemplarError::Parse {
                        id: id.as_ref().to_string(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { documents })
    }

    pub fn documents(&self) -> &[UmrDocument] {
        &self.documents
    }

    pub fn draw(&self, seed: u64, draw_index: u64) -> SampledExemplar {
        let file_index = draw_file_index(seed, draw_index, self.documents.len());
        let document = self.documents[file_index].clone();
        SampledExemplar {
            file_index,
            file_id: document.source_id.clone(),
            document,
        }
    }
}

/// Uniform index in `0..n`. Each draw gets its own ChaCha stream, so the
/// result depends only on `(seed, draw_index)` and never on call order.
pub fn draw_file_index(seed: u64, draw_index: u64, n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw_index);
    rng.random_range(0..n)
}
