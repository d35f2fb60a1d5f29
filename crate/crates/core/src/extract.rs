//! Counting verb applications to nouns in dependency parses.
//!
//! A verb *applies* to a noun when the verb is the syntactic head of the
//! noun through an `obj` or `nsubj:pass` relation. Mere co-occurrence in a
//! sentence does not count.

use std::collections::HashMap;

use crate::conllu::{ParsedToken, Sentence};
use crate::error::Result;
use crate::sparse::SparseMatrix;
use crate::vocab::{normalize, VocabIndex, BIGRAM_SEPARATOR};

/// Relations under which the head verb is applied to the dependent noun.
pub const APPLICATION_RELATIONS: [&str; 2] = ["obj", "nsubj:pass"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BigramMode {
    /// Match single lemmas only.
    Off,
    /// Also match `prev_next` against multiword noun entries; a bigram
    /// match takes precedence over the single lemma.
    #[default]
    Merge,
}

/// Integer counts keyed by (noun id, verb id). Partial counters from
/// different workers merge by addition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCounts {
    counts: HashMap<(usize, usize), u64>,
}

impl PairCounts {
    pub fn add_sentence(
        &mut self,
        sentence: &[ParsedToken],
        nouns: &VocabIndex,
        verbs: &VocabIndex,
        mode: BigramMode,
    ) {
        let by_id: HashMap<usize, &ParsedToken> =
            sentence.iter().map(|t| (t.token_id, t)).collect();
        for tok in sentence {
            if !APPLICATION_RELATIONS.contains(&tok.deprel.as_str()) {
                continue;
            }
            let Some(head) = by_id.get(&tok.head) else {
                continue;
            };
            if head.upos != "VERB" {
                continue;
            }
            let Some(verb) = verbs.id_of(&normalize(&head.lemma)) else {
                continue;
            };
            if let Some(noun) = noun_id(tok, &by_id, nouns, mode) {
                *self.counts.entry((noun, verb)).or_insert(0) += 1;
            }
        }
    }

    pub fn merge(&mut self, other: PairCounts) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn into_matrix(self, nouns: VocabIndex, verbs: VocabIndex) -> Result<SparseMatrix> {
        SparseMatrix::from_triplets(
            nouns,
            verbs,
            self.counts.into_iter().map(|((i, j), c)| (i, j, c as f64)),
        )
    }
}

fn noun_id(
    tok: &ParsedToken,
    by_id: &HashMap<usize, &ParsedToken>,
    nouns: &VocabIndex,
    mode: BigramMode,
) -> Option<usize> {
    let lemma = normalize(&tok.lemma);
    if mode == BigramMode::Merge && tok.token_id > 1 {
        if let Some(prev) = by_id.get(&(tok.token_id - 1)) {
            let joined = format!("{}{}{}", normalize(&prev.lemma), BIGRAM_SEPARATOR, lemma);
            if let Some(id) = nouns.id_of(&joined) {
                return Some(id);
            }
        }
    }
    nouns.id_of(&lemma)
}

/// Builds the count matrix M from a stream of parsed sentences.
pub fn extract_pairs<I>(
    sentences: I,
    nouns: &VocabIndex,
    verbs: &VocabIndex,
    mode: BigramMode,
) -> Result<SparseMatrix>
where
    I: IntoIterator<Item = Result<Sentence>>,
{
    let mut counts = PairCounts::default();
    for sentence in sentences {
        counts.add_sentence(&sentence?, nouns, verbs, mode);
    }
    counts.into_matrix(nouns.clone(), verbs.clone())
}
