//! Interpolated word-level n-gram language model.
//!
//! The built-in backend for self-contained runs: add-k smoothed counts for
//! every order up to `order`, mixed with interpolation weights λ₁..λ_order
//! (λ_m weights the m-gram component). Training sequences are the speaker
//! prompt tokens followed by the sentence's masked tokens, padded with
//! `<s>`; unseen words map to `<unk>`. Models serialize to a versioned
//! binary file that reproduces bit-identically for identical inputs.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lm::{LossBackend, ScoringRequest, TokenLossSequence};

/// Sequence-start padding token. Never part of the vocabulary: it appears
/// in histories only and is never predicted.
pub const BOS: &str = "<s>";
/// Stand-in for words outside the training vocabulary.
pub const UNK: &str = "<unk>";

const MAGIC: &[u8; 4] = b"RHLM";
const FORMAT_VERSION: u32 = 1;
/// Sentinel id for [`BOS`] in histories; vocabulary ids stay below it.
const BOS_ID: u32 = u32::MAX;

/// Formats the prompt that precedes a speaker's sentences, in training and
/// scoring alike.
pub fn speaker_prompt(display_name: &str) -> String {
    format!("{display_name}:")
}

// ---------- configuration ----------

/// Training-time knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramConfig {
    /// Highest n-gram order (≥ 1).
    pub order: usize,
    /// Add-k smoothing constant. Zero disables smoothing (useful for exact
    /// hand fixtures; unseen events then score infinite loss).
    pub add_k: f64,
    /// Fixed interpolation weights, λ₁..λ_order summing to 1. `None` tunes
    /// them on a held-out split (every tenth sequence), falling back to
    /// uniform weights when the split is empty or `add_k` is zero.
    pub lambdas: Option<Vec<f64>>,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig { order: 3, add_k: 0.01, lambdas: None }
    }
}

impl NgramConfig {
    fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::BadOrder);
        }
        if !self.add_k.is_finite() || self.add_k < 0.0 {
            return Err(Error::BadConfig(format!(
                "add_k must be a nonnegative finite number, got {}",
                self.add_k
            )));
        }
        if let Some(lambdas) = &self.lambdas {
            validate_lambdas(lambdas, self.order)?;
        }
        Ok(())
    }
}

fn validate_lambdas(lambdas: &[f64], order: usize) -> Result<()> {
    let sum: f64 = lambdas.iter().sum();
    if lambdas.len() != order
        || lambdas.iter().any(|&l| !l.is_finite() || l < 0.0)
        || (sum - 1.0).abs() > 1e-9
    {
        return Err(Error::BadLambdas(lambdas.to_vec()));
    }
    Ok(())
}

// ---------- the model ----------

/// A trained interpolated n-gram model.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    add_k: f64,
    /// λ₁..λ_order; λ_m weights the m-gram component.
    lambdas: Vec<f64>,
    /// Token → id, ids assigned in lexicographic token order.
    vocab: BTreeMap<String, u32>,
    /// Id → token (inverse of `vocab`).
    tokens: Vec<String>,
    unk_id: u32,
    /// `grams[m−1]`: m-gram counts keyed by id sequences of length m.
    grams: Vec<BTreeMap<Vec<u32>, u64>>,
    /// `totals[m−1]`: occurrence counts of (m−1)-token histories, i.e. the
    /// per-history sums of `grams[m−1]`.
    totals: Vec<BTreeMap<Vec<u32>, u64>>,
    /// Hash of the run configuration that produced the model, embedded in
    /// the file so downstream stages can refuse stale artifacts.
    config_hash: Option<String>,
}

impl NgramModel {
    /// Trains on a corpus: one sequence per sentence, the speaker prompt
    /// tokens followed by the masked sentence tokens.
    pub fn train(corpus: &Corpus, config: &NgramConfig) -> Result<NgramModel> {
        let sequences: Vec<Vec<String>> = corpus
            .sentences()
            .iter()
            .map(|s| {
                let speaker = corpus
                    .speaker(&s.speaker)
                    .expect("corpus sentences reference known speakers");
                let prompt = speaker_prompt(&speaker.display_name);
                prompt
                    .split_whitespace()
                    .chain(s.masked_text.split_whitespace())
                    .map(str::to_string)
                    .collect()
            })
            .collect();
        Self::train_from_sequences(&sequences, config)
    }

    /// Trains directly on token sequences (the corpus-independent core).
    pub fn train_from_sequences(
        sequences: &[Vec<String>],
        config: &NgramConfig,
    ) -> Result<NgramModel> {
        config.validate()?;
        if sequences.iter().all(|s| s.is_empty()) {
            return Err(Error::NotEnoughData { needed: 1, got: 0 });
        }
        let lambdas = match &config.lambdas {
            Some(fixed) => fixed.clone(),
            None => tune_lambdas(sequences, config)?,
        };

        // Vocabulary over all training tokens, plus the unknown stand-in.
        let mut vocab: BTreeMap<String, u32> = BTreeMap::new();
        for token in sequences.iter().flatten() {
            vocab.entry(token.clone()).or_insert(0);
        }
        vocab.entry(UNK.to_string()).or_insert(0);
        for (next_id, id) in vocab.values_mut().enumerate() {
            *id = next_id as u32;
        }
        let tokens: Vec<String> = vocab.keys().cloned().collect();
        let unk_id = vocab[UNK];

        let mut model = NgramModel {
            order: config.order,
            add_k: config.add_k,
            lambdas,
            vocab,
            tokens,
            unk_id,
            grams: vec![BTreeMap::new(); config.order],
            totals: vec![BTreeMap::new(); config.order],
            config_hash: None,
        };
        model.count_sequences(sequences);
        Ok(model)
    }

    fn count_sequences(&mut self, sequences: &[Vec<String>]) {
        for sequence in sequences {
            if sequence.is_empty() {
                continue;
            }
            let mut ids = vec![BOS_ID; self.order - 1];
            ids.extend(sequence.iter().map(|t| self.vocab[t]));
            for end in (self.order - 1)..ids.len() {
                for m in 1..=self.order {
                    let gram = ids[end + 1 - m..=end].to_vec();
                    *self.grams[m - 1].entry(gram).or_default() += 1;
                    let history = ids[end + 1 - m..end].to_vec();
                    *self.totals[m - 1].entry(history).or_default() += 1;
                }
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Vocabulary size (including `<unk>`, excluding `<s>`).
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.config_hash.as_deref()
    }

    pub fn set_config_hash(&mut self, hash: Option<String>) {
        self.config_hash = hash;
    }

    fn id_of(&self, token: &str) -> u32 {
        self.vocab.get(token).copied().unwrap_or(self.unk_id)
    }

    /// Interpolated conditional probability of id `w` after `history`
    /// (most recent token last; only the final `order − 1` ids are used).
    fn prob_ids(&self, history: &[u32], w: u32) -> f64 {
        let v = self.vocab_size() as f64;
        let mut p = 0.0;
        for m in 1..=self.order {
            let lambda = self.lambdas[m - 1];
            if lambda == 0.0 {
                continue;
            }
            let h = &history[history.len() - (m - 1)..];
            let mut gram = h.to_vec();
            gram.push(w);
            let count = self.grams[m - 1].get(&gram).copied().unwrap_or(0) as f64;
            let total = self.totals[m - 1].get(h).copied().unwrap_or(0) as f64;
            let denominator = total + self.add_k * v;
            if denominator > 0.0 {
                p += lambda * (count + self.add_k) / denominator;
            }
        }
        p
    }

    /// Conditional probability of `token` given history tokens (strings;
    /// out-of-vocabulary words map to `<unk>`, `"<s>"` to the padding id).
    pub fn prob(&self, history: &[&str], token: &str) -> f64 {
        let mut ids = vec![BOS_ID; self.order - 1];
        ids.extend(history.iter().map(|t| self.token_or_bos(t)));
        self.prob_ids(&ids, self.id_of(token))
    }

    fn token_or_bos(&self, token: &str) -> u32 {
        if token == BOS {
            BOS_ID
        } else {
            self.id_of(token)
        }
    }

    // ---------- serialization ----------

    /// Writes the versioned binary format: magic, format version, a JSON
    /// metadata header (order, add-k, λ, vocabulary size, config hash),
    /// the vocabulary in id order, then one section of `(ids…, count)`
    /// rows per order. Identical models produce identical bytes.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let header = serde_json::json!({
            "order": self.order,
            "add_k": self.add_k,
            "lambdas": self.lambdas,
            "vocab_size": self.vocab_size(),
            "config_hash": self.config_hash,
        })
        .to_string();
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        w.write_all(&(self.tokens.len() as u64).to_le_bytes())?;
        for token in &self.tokens {
            w.write_all(&(token.len() as u32).to_le_bytes())?;
            w.write_all(token.as_bytes())?;
        }
        for grams in &self.grams {
            w.write_all(&(grams.len() as u64).to_le_bytes())?;
            for (ids, count) in grams {
                for id in ids {
                    w.write_all(&id.to_le_bytes())?;
                }
                w.write_all(&count.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(Error::write(path))?,
        );
        self.write_to(&mut file).map_err(Error::write(path))?;
        file.flush().map_err(Error::write(path))
    }

    pub fn read_from(mut r: impl Read, label: &str) -> Result<NgramModel> {
        let bad = |reason: String| Error::BadModelFile { path: label.to_string(), reason };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| bad(format!("short read: {e}")))?;
        if &magic != MAGIC {
            return Err(bad("not a model file (bad magic)".to_string()));
        }
        let version = read_u32(&mut r).map_err(|e| bad(e.to_string()))?;
        if version != FORMAT_VERSION {
            return Err(bad(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let header_len = read_u32(&mut r).map_err(|e| bad(e.to_string()))? as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes).map_err(|e| bad(format!("short header: {e}")))?;
        let header: serde_json::Value = serde_json::from_slice(&header_bytes)
            .map_err(|e| bad(format!("bad header JSON: {e}")))?;
        let order = header["order"].as_u64().ok_or_else(|| bad("missing order".into()))? as usize;
        let add_k = header["add_k"].as_f64().ok_or_else(|| bad("missing add_k".into()))?;
        let lambdas: Vec<f64> = header["lambdas"]
            .as_array()
            .ok_or_else(|| bad("missing lambdas".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| bad("non-numeric lambda".into())))
            .collect::<Result<_>>()?;
        let vocab_size =
            header["vocab_size"].as_u64().ok_or_else(|| bad("missing vocab_size".into()))? as usize;
        let config_hash = header["config_hash"].as_str().map(str::to_string);
        if order < 1 {
            return Err(bad("order must be at least 1".into()));
        }
        validate_lambdas(&lambdas, order)
            .map_err(|e| bad(format!("invalid interpolation weights: {e}")))?;

        let token_count = read_u64(&mut r).map_err(|e| bad(e.to_string()))? as usize;
        if token_count != vocab_size {
            return Err(bad(format!(
                "header claims {vocab_size} vocabulary entries, file holds {token_count}"
            )));
        }
        let mut tokens = Vec::with_capacity(token_count);
        for _ in 0..token_count {
            let len = read_u32(&mut r).map_err(|e| bad(e.to_string()))? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(|e| bad(format!("short token: {e}")))?;
            tokens.push(String::from_utf8(buf).map_err(|e| bad(format!("bad token utf8: {e}")))?);
        }
        let vocab: BTreeMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(id, t)| (t.clone(), id as u32))
            .collect();
        if vocab.len() != tokens.len() || !tokens.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("vocabulary is not sorted and unique".into()));
        }
        let unk_id = *vocab.get(UNK).ok_or_else(|| bad(format!("vocabulary lacks {UNK}")))?;

        let mut grams = Vec::with_capacity(order);
        let mut totals = Vec::with_capacity(order);
        for m in 1..=order {
            let entry_count = read_u64(&mut r).map_err(|e| bad(e.to_string()))?;
            let mut section = BTreeMap::new();
            let mut section_totals: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
            for _ in 0..entry_count {
                let mut ids = Vec::with_capacity(m);
                for _ in 0..m {
                    let id = read_u32(&mut r).map_err(|e| bad(e.to_string()))?;
                    if id != BOS_ID && id as usize >= vocab_size {
                        return Err(bad(format!("token id {id} out of range")));
                    }
                    ids.push(id);
                }
                let count = read_u64(&mut r).map_err(|e| bad(e.to_string()))?;
                *section_totals.entry(ids[..m - 1].to_vec()).or_default() += count;
                if section.insert(ids, count).is_some() {
                    return Err(bad("duplicate n-gram entry".into()));
                }
            }
            grams.push(section);
            totals.push(section_totals);
        }
        let mut trailer = [0u8; 1];
        if r.read(&mut trailer).map_err(|e| bad(e.to_string()))? != 0 {
            return Err(bad("trailing bytes after final section".into()));
        }
        Ok(NgramModel {
            order,
            add_k,
            lambdas,
            vocab,
            tokens,
            unk_id,
            grams,
            totals,
            config_hash,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NgramModel> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(Error::read(path))?;
        Self::read_from(std::io::BufReader::new(file), &path.display().to_string())
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

impl LossBackend for NgramModel {
    /// Losses for the target tokens given `context ⧺ prompt` as history:
    /// the prompt sits directly before the target, exactly as the training
    /// sequences render it. Out-of-vocabulary tokens (in history or target)
    /// map to `<unk>`.
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
        let mut history = vec![BOS_ID; self.order - 1];
        history.extend(
            req.context()
                .split_whitespace()
                .chain(req.speaker_prompt().split_whitespace())
                .map(|t| self.id_of(t)),
        );
        let tokens: Vec<String> = req.target().split_whitespace().map(str::to_string).collect();
        let mut losses = Vec::with_capacity(tokens.len());
        for token in &tokens {
            let id = self.id_of(token);
            let p = self.prob_ids(&history, id);
            losses.push(-p.log2());
            history.push(id);
        }
        TokenLossSequence::new(tokens, losses)
    }
}

// ---------- λ tuning ----------

/// Picks interpolation weights by expectation-maximization on a held-out
/// split (every tenth sequence). Component probabilities use the model's
/// own add-k smoothing, so a positive `add_k` keeps every mixture term
/// defined; with `add_k == 0` (or nothing held out) the weights stay
/// uniform.
fn tune_lambdas(sequences: &[Vec<String>], config: &NgramConfig) -> Result<Vec<f64>> {
    let order = config.order;
    let uniform = vec![1.0 / order as f64; order];
    if order == 1 {
        return Ok(vec![1.0]);
    }
    let (train, held_out): (Vec<_>, Vec<_>) = {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (i, s) in sequences.iter().enumerate() {
            if (i + 1) % 10 == 0 {
                held.push(s.clone());
            } else {
                train.push(s.clone());
            }
        }
        (train, held)
    };
    if config.add_k == 0.0
        || held_out.iter().all(|s| s.is_empty())
        || train.iter().all(|s| s.is_empty())
    {
        return Ok(uniform);
    }
    let component_model = NgramModel::train_from_sequences(
        &train,
        &NgramConfig { lambdas: Some(uniform.clone()), ..config.clone() },
    )?;

    let mut lambdas = uniform;
    for _ in 0..50 {
        let mut responsibility = vec![0.0; order];
        for sequence in &held_out {
            let mut ids = vec![BOS_ID; order - 1];
            ids.extend(sequence.iter().map(|t| component_model.id_of(t)));
            for end in (order - 1)..ids.len() {
                let history = &ids[..end];
                let w = ids[end];
                let v = component_model.vocab_size() as f64;
                let components: Vec<f64> = (1..=order)
                    .map(|m| {
                        let h = &history[history.len() - (m - 1)..];
                        let mut gram = h.to_vec();
                        gram.push(w);
                        let count =
                            component_model.grams[m - 1].get(&gram).copied().unwrap_or(0) as f64;
                        let total =
                            component_model.totals[m - 1].get(h).copied().unwrap_or(0) as f64;
                        (count + config.add_k) / (total + config.add_k * v)
                    })
                    .collect();
                let mix: f64 =
                    lambdas.iter().zip(&components).map(|(l, p)| l * p).sum();
                for m in 0..order {
                    responsibility[m] += lambdas[m] * components[m] / mix;
                }
            }
        }
        let total: f64 = responsibility.iter().sum();
        let next: Vec<f64> = responsibility.iter().map(|r| r / total).collect();
        let delta = next
            .iter()
            .zip(&lambdas)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        lambdas = next;
        if delta < 1e-10 {
            break;
        }
    }
    Ok(lambdas)
}
