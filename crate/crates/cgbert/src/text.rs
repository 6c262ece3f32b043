//! Vocabulary construction, word-level tokenization, and packing of the
//! intent + utterance pair into the model input layout
//! `[CLS] L1..L_T1 [SEP] X1..X_T2 [SEP]`.

use crate::data::Example;
use std::collections::HashMap;
use thiserror::Error;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const SEP: usize = 3;
pub const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty text after normalization: {0:?}")]
    EmptyText(String),
    #[error("intent {intent:?} occupies {needed} slots, max_len is {max_len}")]
    IntentTooLong {
        intent: String,
        needed: usize,
        max_len: usize,
    },
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },
}

/// Token <-> id mapping. Ids 0..=3 are reserved for the special tokens;
/// corpus tokens are ordered by descending frequency, ties lexicographic.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
}

/// Lowercase + whitespace split.
pub fn normalize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

impl Vocab {
    /// Build from utterances and intent label phrases together, keeping
    /// tokens with frequency >= `min_freq`.
    pub fn build(corpus: &[Example], min_freq: usize) -> Result<Self, TextError> {
        if corpus.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        let mut freq: HashMap<String, usize> = HashMap::new();
        for ex in corpus {
            for tok in normalize(&ex.text).into_iter().chain(normalize(&ex.intent)) {
                *freq.entry(tok).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = freq
            .into_iter()
            .filter(|(tok, n)| *n >= min_freq && !SPECIALS.contains(&tok.as_str()))
            .collect();
        kept.sort_by(|(ta, na), (tb, nb)| nb.cmp(na).then(ta.cmp(tb)));

        let mut id_to_token: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(kept.into_iter().map(|(t, _)| t));
        Ok(Self::from_tokens(id_to_token))
    }

    fn from_tokens(id_to_token: Vec<String>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            id_to_token,
            token_to_id,
        }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id_of(&self, token: &str) -> usize {
        *self.token_to_id.get(token).unwrap_or(&UNK)
    }

    pub fn token(&self, id: usize) -> Result<&str, TextError> {
        self.id_to_token
            .get(id)
            .map(String::as_str)
            .ok_or(TextError::IdOutOfRange {
                id,
                size: self.size(),
            })
    }

    /// One token per line, in id order.
    pub fn to_lines(&self) -> String {
        let mut s = self.id_to_token.join("\n");
        s.push('\n');
        s
    }

    pub fn from_lines(lines: &str) -> Self {
        let tokens: Vec<String> = lines.lines().map(str::to_string).collect();
        Self::from_tokens(tokens)
    }

    fn encode_tokens(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_of(t)).collect()
    }
}

/// The packed pair: `[CLS] intent [SEP] utterance [SEP]` with segment and
/// position ids. `t1_len` counts [CLS] + intent + first [SEP]; `t2_len`
/// counts the utterance + trailing [SEP].
#[derive(Debug, Clone, PartialEq)]
pub struct PackedInput {
    pub token_ids: Vec<usize>,
    pub segment_ids: Vec<usize>,
    pub position_ids: Vec<usize>,
    pub t1_len: usize,
    pub t2_len: usize,
}

impl PackedInput {
    pub fn total_len(&self) -> usize {
        self.token_ids.len()
    }

    /// `(prediction row, target id)` pairs: row t predicts token t+1, and
    /// targets range over the utterance tokens plus the trailing [SEP].
    pub fn prediction_targets(&self) -> Vec<(usize, usize)> {
        (self.t1_len..self.total_len())
            .map(|pos| (pos - 1, self.token_ids[pos]))
            .collect()
    }
}

/// Pack intent text and utterance. The utterance is truncated from the
/// right if the pair exceeds `max_len`; the intent never is.
pub fn encode_pair(
    intent_text: &str,
    utterance: &str,
    vocab: &Vocab,
    max_len: usize,
) -> Result<PackedInput, TextError> {
    let intent_toks = normalize(intent_text);
    if intent_toks.is_empty() {
        return Err(TextError::EmptyText(intent_text.to_string()));
    }
    let utt_toks = normalize(utterance);
    if utt_toks.is_empty() {
        return Err(TextError::EmptyText(utterance.to_string()));
    }
    let t1_len = intent_toks.len() + 2;
    if t1_len + 1 > max_len {
        return Err(TextError::IntentTooLong {
            intent: intent_text.to_string(),
            needed: t1_len + 1,
            max_len,
        });
    }
    let room = max_len - t1_len - 1;
    let kept = utt_toks.len().min(room);

    let mut token_ids = Vec::with_capacity(t1_len + kept + 1);
    token_ids.push(CLS);
    token_ids.extend(vocab.encode_tokens(&intent_toks));
    token_ids.push(SEP);
    token_ids.extend(vocab.encode_tokens(&utt_toks[..kept]));
    token_ids.push(SEP);

    Ok(pack(token_ids, t1_len))
}

/// Pack a single sentence as `[CLS] tokens [SEP]`, all segment 0. Used for
/// classification inputs, where there is no intent sentence.
pub fn encode_single(text: &str, vocab: &Vocab, max_len: usize) -> Result<PackedInput, TextError> {
    let toks = normalize(text);
    if toks.is_empty() {
        return Err(TextError::EmptyText(text.to_string()));
    }
    let kept = toks.len().min(max_len - 2);
    let mut token_ids = Vec::with_capacity(kept + 2);
    token_ids.push(CLS);
    token_ids.extend(vocab.encode_tokens(&toks[..kept]));
    token_ids.push(SEP);
    let t1_len = token_ids.len();
    Ok(pack(token_ids, t1_len))
}

fn pack(token_ids: Vec<usize>, t1_len: usize) -> PackedInput {
    let total = token_ids.len();
    let segment_ids = (0..total).map(|i| usize::from(i >= t1_len)).collect();
    let position_ids = (0..total).collect();
    PackedInput {
        token_ids,
        segment_ids,
        position_ids,
        t1_len,
        t2_len: total - t1_len,
    }
}

/// Join tokens back into a string: specials are stripped, decoding stops at
/// the first [SEP] after `skip` leading positions have been passed over.
pub fn decode_ids(ids: &[usize], vocab: &Vocab) -> Result<String, TextError> {
    let mut words = Vec::new();
    for &id in ids {
        vocab.token(id)?; // range check even for specials
        match id {
            SEP => break,
            PAD | CLS => continue,
            _ => words.push(vocab.token(id)?.to_string()),
        }
    }
    Ok(words.join(" "))
}

/// Decode only the utterance span of a packed sequence.
pub fn decode_utterance(input: &PackedInput, vocab: &Vocab) -> Result<String, TextError> {
    decode_ids(&input.token_ids[input.t1_len..], vocab)
}
