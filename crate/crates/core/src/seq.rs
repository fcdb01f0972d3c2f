//! Token sequences, episodes, datasets and flat parameter vectors.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Vocabulary of `size` ids; the last one is EOS.
///
/// Two out-of-vocabulary ids are reserved above the range: `size` serves both
/// as the prompt/response separator in discriminator inputs and as the
/// begin-of-sequence pad in policy contexts. The two never meet in one
/// alphabet, so they share a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    size: u32,
}

impl Vocab {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::arg("vocabulary needs at least one token plus EOS"));
        }
        Ok(Self { size })
    }

    pub fn size(self) -> usize {
        self.size as usize
    }

    pub fn eos(self) -> TokenId {
        TokenId(self.size - 1)
    }

    pub fn sep(self) -> TokenId {
        TokenId(self.size)
    }

    pub fn bos(self) -> TokenId {
        TokenId(self.size)
    }

    pub fn contains(self, t: TokenId) -> bool {
        t.0 < self.size
    }

    /// Ids that can appear as content (everything except EOS).
    pub fn content_ids(self) -> impl Iterator<Item = TokenId> {
        (0..self.size - 1).map(TokenId)
    }
}

/// Ordered tokens of one prompt or response. EOS, if present, is last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    tokens: Vec<TokenId>,
    vocab: Vocab,
    max_len: usize,
}

impl Sequence {
    pub fn new(tokens: Vec<TokenId>, vocab: Vocab, max_len: usize) -> Result<Self> {
        if tokens.len() > max_len {
            return Err(Error::Capacity { len: tokens.len(), limit: max_len });
        }
        for (i, &t) in tokens.iter().enumerate() {
            if !vocab.contains(t) {
                return Err(Error::InvalidToken { id: t.0, vocab: vocab.size });
            }
            if t == vocab.eos() && i + 1 != tokens.len() {
                return Err(Error::EosNotFinal { position: i });
            }
        }
        Ok(Self { tokens, vocab, max_len })
    }

    pub fn from_ids(ids: &[u32], vocab: Vocab, max_len: usize) -> Result<Self> {
        Self::new(ids.iter().map(|&i| TokenId(i)).collect(), vocab, max_len)
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn ends_with_eos(&self) -> bool {
        self.tokens.last() == Some(&self.vocab.eos())
    }

    pub fn ids(&self) -> Vec<u32> {
        self.tokens.iter().map(|t| t.0).collect()
    }
}

/// Default caps on prompt and response lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqLimits {
    pub prompt: usize,
    pub response: usize,
}

impl Default for SeqLimits {
    fn default() -> Self {
        Self { prompt: 2048, response: 1536 }
    }
}

/// `[x, SEP, y]`, the discriminator's view of a prompt/response pair.
///
/// The separator lies outside the vocabulary, so this is not a [`Sequence`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Joined {
    pub tokens: Vec<TokenId>,
    pub prompt_len: usize,
}

impl Joined {
    pub fn response(&self) -> &[TokenId] {
        &self.tokens[self.prompt_len + 1..]
    }
}

pub fn concat_prompt_response(prompt: &Sequence, response: &Sequence, limits: SeqLimits) -> Result<Joined> {
    let len = prompt.len() + response.len();
    let limit = limits.prompt + limits.response;
    if len > limit {
        return Err(Error::Capacity { len, limit });
    }
    if prompt.vocab() != response.vocab() {
        return Err(Error::arg("prompt and response use different vocabularies"));
    }
    let mut tokens = Vec::with_capacity(len + 1);
    tokens.extend_from_slice(prompt.tokens());
    tokens.push(prompt.vocab().sep());
    tokens.extend_from_slice(response.tokens());
    Ok(Joined { tokens, prompt_len: prompt.len() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub prompt: Sequence,
    pub teacher_response: Sequence,
}

impl Episode {
    pub fn new(prompt: Sequence, teacher_response: Sequence) -> Result<Self> {
        if teacher_response.is_empty() {
            return Err(Error::arg("teacher response is empty"));
        }
        if prompt.vocab() != teacher_response.vocab() {
            return Err(Error::arg("prompt and response use different vocabularies"));
        }
        Ok(Self { prompt, teacher_response })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    episodes: Vec<Episode>,
    vocab: Vocab,
    pub spec_id: String,
    pub seed: u64,
}

impl Dataset {
    pub fn new(episodes: Vec<Episode>, spec_id: impl Into<String>, seed: u64) -> Result<Self> {
        let first = episodes.first().ok_or_else(|| Error::arg("dataset is empty"))?;
        let vocab = first.prompt.vocab();
        if episodes.iter().any(|e| e.prompt.vocab() != vocab) {
            return Err(Error::arg("episodes disagree on vocabulary"));
        }
        Ok(Self { episodes, vocab, spec_id: spec_id.into(), seed })
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn mean_response_len(&self) -> f64 {
        let total: usize = self.episodes.iter().map(|e| e.teacher_response.len()).sum();
        total as f64 / self.episodes.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Flat `f64` parameters with named, contiguous, non-overlapping segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl ParamVector {
    pub fn zeros(layout: &[(&str, usize)]) -> Self {
        let mut segments = Vec::with_capacity(layout.len());
        let mut offset = 0;
        for &(name, len) in layout {
            assert!(segments.iter().all(|s: &Segment| s.name != name), "duplicate segment name {name}");
            segments.push(Segment { name: name.to_string(), offset, len });
            offset += len;
        }
        Self { values: vec![0.0; offset], segments }
    }

    /// Rebuilds from raw parts, checking that segments tile `values` in order.
    pub fn from_parts(values: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        let mut offset = 0;
        for (i, s) in segments.iter().enumerate() {
            if s.offset != offset || segments[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::arg(format!("segment {} does not tile the vector", s.name)));
            }
            offset += s.len;
        }
        if offset != values.len() {
            return Err(Error::ShapeMismatch { expected: offset, actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        Ok(Self { values, segments })
    }

    pub fn zeros_like(&self) -> Self {
        Self { values: vec![0.0; self.values.len()], segments: self.segments.clone() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn find(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.find(name).map(|s| &self.values[s.offset..s.offset + s.len])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let (offset, len) = self.find(name).map(|s| (s.offset, s.len))?;
        Some(&mut self.values[offset..offset + len])
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.segments == other.segments
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &ParamVector) {
        debug_assert!(self.same_layout(other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }
}
