//! Plain-text corpus and content sampling.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TextError;

/// Most lines drawn for the multi-line structure.
pub const MAX_LINES: usize = 3;
/// Most lines a paragraph is wrapped into.
pub const MAX_PARAGRAPH_LINES: usize = 8;

#[derive(Debug, Clone)]
pub struct Corpus {
    lines: Vec<String>,
    tokens: Vec<String>,
}

impl Corpus {
    /// Splits `text` into non-blank lines (inner whitespace collapsed) and
    /// whitespace-separated tokens.
    pub fn from_text(text: &str) -> Result<Self, TextError> {
        let lines: Vec<String> = text
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|l| !l.is_empty())
            .collect();
        let tokens: Vec<String> = lines.iter().flat_map(|l| l.split(' ').map(str::to_string)).collect();
        if tokens.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        Ok(Corpus { lines, tokens })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Corpus::from_text(&text)
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextStructure {
    Word,
    Lines,
    Paragraph,
}

impl TextStructure {
    pub const ALL: [TextStructure; 3] = [TextStructure::Word, TextStructure::Lines, TextStructure::Paragraph];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextContent {
    pub structure: TextStructure,
    pub lines: Vec<String>,
}

impl TextContent {
    /// Whitespace-separated words in reading order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flat_map(|l| l.split_whitespace())
    }
}

/// Greedy word wrap to at most `width` characters per line (a longer single
/// word gets its own line).
pub fn wrap_words<'a>(words: impl IntoIterator<Item = &'a str>, width: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut cur = String::new();
    for w in words {
        if !cur.is_empty() && cur.chars().count() + 1 + w.chars().count() > width {
            out.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(w);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn sample_text<R: Rng + ?Sized>(corpus: &Corpus, structure: TextStructure, rng: &mut R) -> TextContent {
    let lines = match structure {
        TextStructure::Word => vec![corpus.tokens.choose(rng).expect("non-empty corpus").clone()],
        TextStructure::Lines => {
            let count = rng.gen_range(1..=MAX_LINES).min(corpus.lines.len());
            let start = rng.gen_range(0..=corpus.lines.len() - count);
            corpus.lines[start..start + count].to_vec()
        }
        TextStructure::Paragraph => {
            // A contiguous run of tokens, re-wrapped to a random line width.
            let width = rng.gen_range(12..=28);
            let budget = rng.gen_range(6..=24).min(corpus.tokens.len());
            let start = rng.gen_range(0..=corpus.tokens.len() - budget);
            let mut lines = wrap_words(corpus.tokens[start..start + budget].iter().map(String::as_str), width);
            lines.truncate(MAX_PARAGRAPH_LINES);
            lines
        }
    };
    TextContent { structure, lines }
}
