//! Token vocabularies for nouns (objects) and verbs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Joins the words of a multiword entry, e.g. `ice cream` -> `ice_cream`.
pub const BIGRAM_SEPARATOR: char = '_';

/// Lowercases a lemma and replaces runs of internal whitespace with the
/// bigram separator.
pub fn normalize(token: &str) -> String {
    let lower = token.trim().to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for (i, word) in lower.split_whitespace().enumerate() {
        if i > 0 {
            out.push(BIGRAM_SEPARATOR);
        }
        out.push_str(word);
    }
    out
}

/// Bidirectional map between normalized tokens and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VocabIndex {
    entries: Vec<String>,
    id_of: HashMap<String, usize>,
}

impl VocabIndex {
    /// Builds a vocabulary from raw entries. Entries are normalized;
    /// blank entries are skipped and repeats collapsed. Returns the
    /// vocabulary and the number of duplicates dropped.
    pub fn from_entries<I, S>(raw: I) -> (Self, usize)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = VocabIndex::default();
        let mut duplicates = 0;
        for entry in raw {
            let token = normalize(entry.as_ref());
            if token.is_empty() {
                continue;
            }
            if vocab.id_of.contains_key(&token) {
                duplicates += 1;
                continue;
            }
            vocab.id_of.insert(token.clone(), vocab.entries.len());
            vocab.entries.push(token);
        }
        (vocab, duplicates)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Looks up an already-normalized token.
    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.id_of.get(token).copied()
    }

    /// Normalizes `token` before looking it up.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.id_of(&normalize(token))
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    /// True if at least one entry is a merged multiword token.
    pub fn has_multiword(&self) -> bool {
        self.entries.iter().any(|e| e.contains(BIGRAM_SEPARATOR))
    }
}

/// Reads a vocabulary file with one entry per line.
///
/// Returns the vocabulary and the number of duplicate lines collapsed.
pub fn load_vocab(path: impl AsRef<Path>) -> Result<(VocabIndex, usize)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (vocab, duplicates) = VocabIndex::from_entries(text.lines());
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    if duplicates > 0 {
        log::warn!(
            "{}: {} duplicate entries collapsed",
            path.display(),
            duplicates
        );
    }
    Ok((vocab, duplicates))
}
