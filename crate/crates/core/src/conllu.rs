//! Streaming reader for CoNLL-U dependency parses.
//!
//! Only the ID, LEMMA, UPOS, HEAD and DEPREL columns are kept. Multiword
//! token ranges (`3-4`) and empty nodes (`3.1`) are skipped.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedToken {
    pub sentence_id: usize,
    /// 1-based position within the sentence.
    pub token_id: usize,
    pub lemma: String,
    pub upos: String,
    /// Token id of the syntactic head, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

pub type Sentence = Vec<ParsedToken>;

/// Iterator over the sentences of a CoNLL-U stream.
pub struct SentenceReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    next_sentence: usize,
    done: bool,
}

/// Reads sentences from a buffered CoNLL-U stream.
pub fn read_conllu<R: BufRead>(reader: R) -> SentenceReader<R> {
    SentenceReader {
        lines: reader.lines(),
        line_no: 0,
        next_sentence: 0,
        done: false,
    }
}

/// Opens a CoNLL-U file, decompressing it when the name ends in `.gz`.
pub fn open_corpus(path: impl AsRef<Path>) -> Result<SentenceReader<Box<dyn BufRead>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn BufRead> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    Ok(read_conllu(reader))
}

impl<R: BufRead> SentenceReader<R> {
    fn parse_line(&self, line: &str) -> Result<Option<ParsedToken>> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(self.err(format!("expected 10 columns, found {}", cols.len())));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            return Ok(None);
        }
        let token_id: usize = id
            .parse()
            .map_err(|_| self.err(format!("invalid token id {id:?}")))?;
        if token_id == 0 {
            return Err(self.err("token id 0".into()));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| self.err(format!("non-integer HEAD {:?}", cols[6])))?;
        Ok(Some(ParsedToken {
            sentence_id: self.next_sentence,
            token_id,
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        }))
    }

    fn err(&self, msg: String) -> Error {
        Error::Conllu {
            line: self.line_no,
            msg,
        }
    }

    fn finish(&mut self, tokens: Sentence, start_line: usize) -> Result<Sentence> {
        let ids: HashSet<usize> = tokens.iter().map(|t| t.token_id).collect();
        if ids.len() != tokens.len() {
            return Err(Error::Conllu {
                line: start_line,
                msg: "duplicate token id in sentence".into(),
            });
        }
        if let Some(t) = tokens
            .iter()
            .find(|t| t.head != 0 && !ids.contains(&t.head))
        {
            return Err(Error::Conllu {
                line: start_line,
                msg: format!(
                    "token {} has head {} outside the sentence",
                    t.token_id, t.head
                ),
            });
        }
        self.next_sentence += 1;
        Ok(tokens)
    }
}

impl<R: BufRead> Iterator for SentenceReader<R> {
    type Item = Result<Sentence>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut tokens = Sentence::new();
        let mut start_line = 0;
        loop {
            let line = match self.lines.next() {
                Some(Ok(line)) => line,
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                None => {
                    self.done = true;
                    if tokens.is_empty() {
                        return None;
                    }
                    return Some(self.finish(tokens, start_line));
                }
            };
            self.line_no += 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                if tokens.is_empty() {
                    continue;
                }
                return Some(self.finish(tokens, start_line));
            }
            if line.starts_with('#') {
                continue;
            }
            match self.parse_line(line) {
                Ok(Some(tok)) => {
                    if tokens.is_empty() {
                        start_line = self.line_no;
                    }
                    tokens.push(tok);
                }
                Ok(None) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}
