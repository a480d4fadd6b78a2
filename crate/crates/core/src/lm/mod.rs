//! Per-token losses behind a uniform backend contract.
//!
//! A [`LossBackend`] turns a [`ScoringRequest`] — speaker prompt, preceding
//! context, target sentence — into one loss per target token, always in
//! **bits** (log base 2), so that [`bpc`] is literally bits per character.
//! Two backends ship with the crate: an interpolated word n-gram model
//! ([`NgramModel`]) for self-contained runs, and a [`RemoteBackend`] that
//! speaks the loss-server wire protocol for neural models served elsewhere.
//! Wrappers ([`PromptBlind`], [`ScaleLosses`]) compose with any backend and
//! back the metric's invariance checks.
//!
//! Backends are `Send + Sync`; scoring the same request twice must yield
//! identical losses.

pub mod ngram;
pub mod remote;

pub use ngram::{speaker_prompt, NgramConfig, NgramModel};
pub use remote::{RemoteBackend, RemoteConfig};

use crate::error::{Error, Result};

/// Default context window: the most recent tokens of context kept when
/// scoring. The speaker prompt rides outside this budget.
pub const DEFAULT_WINDOW_TOKENS: usize = 512;

// ---------- requests ----------

/// One scoring call: `speaker_prompt ⧺ context ⧺ target`, where only the
/// target tokens receive losses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoringRequest {
    speaker_prompt: String,
    context: String,
    target: String,
}

impl ScoringRequest {
    /// Validates the invariants: the prompt is nonempty and ends with `:`
    /// (e.g. `"Donald Trump:"`), the target is nonempty.
    pub fn new(
        speaker_prompt: impl Into<String>,
        context: impl Into<String>,
        target: impl Into<String>,
    ) -> Result<ScoringRequest> {
        let speaker_prompt = speaker_prompt.into();
        if speaker_prompt.len() < 2 || !speaker_prompt.ends_with(':') {
            return Err(Error::BadPrompt(speaker_prompt));
        }
        let target = target.into();
        if target.is_empty() {
            return Err(Error::EmptyTarget);
        }
        Ok(ScoringRequest { speaker_prompt, context: context.into(), target })
    }

    pub fn speaker_prompt(&self) -> &str {
        &self.speaker_prompt
    }

    pub fn context(&self) -> &str {
        &self.context
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    /// The same request with the context truncated to its most recent
    /// `window_tokens` whitespace tokens. The prompt is not part of the
    /// window budget.
    pub fn truncate_context(&self, window_tokens: usize) -> ScoringRequest {
        let tokens: Vec<&str> = self.context.split_whitespace().collect();
        let kept = &tokens[tokens.len().saturating_sub(window_tokens)..];
        ScoringRequest {
            speaker_prompt: self.speaker_prompt.clone(),
            context: kept.join(" "),
            target: self.target.clone(),
        }
    }
}

// ---------- losses ----------

/// Per-token losses in bits, covering exactly the target tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLossSequence {
    tokens: Vec<String>,
    losses_bits: Vec<f64>,
}

impl TokenLossSequence {
    /// Validates equal lengths and finite, nonnegative losses.
    pub fn new(tokens: Vec<String>, losses_bits: Vec<f64>) -> Result<TokenLossSequence> {
        if tokens.len() != losses_bits.len() {
            return Err(Error::LengthMismatch(tokens.len(), losses_bits.len()));
        }
        for (index, (token, &loss)) in tokens.iter().zip(&losses_bits).enumerate() {
            if !loss.is_finite() || loss < 0.0 {
                return Err(Error::NonFiniteLoss { token: token.clone(), index });
            }
        }
        Ok(TokenLossSequence { tokens, losses_bits })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn losses_bits(&self) -> &[f64] {
        &self.losses_bits
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Total cross-entropy of the target, in bits.
    pub fn total_bits(&self) -> f64 {
        self.losses_bits.iter().sum()
    }
}

/// Source of per-token losses. Implementations must be deterministic:
/// the same request always yields the same losses.
pub trait LossBackend: Send + Sync {
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence>;
}

impl<B: LossBackend + ?Sized> LossBackend for &B {
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
        (**self).token_losses(req)
    }
}

impl<B: LossBackend + ?Sized> LossBackend for std::sync::Arc<B> {
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
        (**self).token_losses(req)
    }
}

/// Bits per character: total loss over the character count of the raw
/// target sentence (internal spaces included; prompt and context excluded).
pub fn bpc(req: &ScoringRequest, losses: &TokenLossSequence) -> Result<f64> {
    let chars = req.target.chars().count();
    if chars == 0 {
        return Err(Error::EmptyTarget);
    }
    Ok(losses.total_bits() / chars as f64)
}

// ---------- reference backends and wrappers ----------

/// Assigns every target token the same loss, `log2(vocab_size)` bits — the
/// cross-entropy of a uniform distribution. Ignores prompt and context by
/// construction, which makes it the null backend for prompt-sensitivity
/// checks.
#[derive(Debug, Clone, Copy)]
pub struct UniformBackend {
    vocab_size: usize,
}

impl UniformBackend {
    pub fn new(vocab_size: usize) -> UniformBackend {
        assert!(vocab_size >= 1, "a uniform distribution needs a nonempty vocabulary");
        UniformBackend { vocab_size }
    }
}

impl LossBackend for UniformBackend {
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
        let loss = (self.vocab_size as f64).log2();
        let tokens: Vec<String> =
            req.target.split_whitespace().map(str::to_string).collect();
        let losses = vec![loss; tokens.len()];
        TokenLossSequence::new(tokens, losses)
    }
}

/// Delegates to the inner backend with the speaker prompt replaced by a
/// fixed placeholder, making losses independent of who is speaking.
#[derive(Debug, Clone)]
pub struct PromptBlind<B>(pub B);

impl<B: LossBackend> LossBackend for PromptBlind<B> {
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
        let blind = ScoringRequest::new("Speaker:", req.context(), req.target())?;
        self.0.token_losses(&blind)
    }
}

/// Multiplies every loss of the inner backend by a positive factor.
#[derive(Debug, Clone)]
pub struct ScaleLosses<B> {
    inner: B,
    factor: f64,
}

impl<B> ScaleLosses<B> {
    pub fn new(inner: B, factor: f64) -> ScaleLosses<B> {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        ScaleLosses { inner, factor }
    }
}

impl<B: LossBackend> LossBackend for ScaleLosses<B> {
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
        let seq = self.inner.token_losses(req)?;
        let losses = seq.losses_bits().iter().map(|l| l * self.factor).collect();
        TokenLossSequence::new(seq.tokens, losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn req(target: &str) -> ScoringRequest {
        ScoringRequest::new("Donald Trump:", "", target).unwrap()
    }

    #[test]
    fn request_validates_prompt_and_target() {
        assert!(matches!(
            ScoringRequest::new("Donald Trump", "", "x").unwrap_err(),
            Error::BadPrompt(_)
        ));
        assert!(matches!(
            ScoringRequest::new(":", "", "x").unwrap_err(),
            Error::BadPrompt(_)
        ));
        assert!(matches!(
            ScoringRequest::new("A:", "", "").unwrap_err(),
            Error::EmptyTarget
        ));
    }

    #[test]
    fn context_truncation_keeps_the_most_recent_tokens() {
        let r = ScoringRequest::new("A:", "one two three four", "x").unwrap();
        assert_eq!(r.truncate_context(2).context(), "three four");
        assert_eq!(r.truncate_context(0).context(), "");
        assert_eq!(r.truncate_context(99).context(), "one two three four");
        assert_eq!(r.truncate_context(2).target(), "x");
    }

    #[test]
    fn loss_sequence_rejects_mismatch_and_bad_losses() {
        assert!(matches!(
            TokenLossSequence::new(vec!["a".into()], vec![]).unwrap_err(),
            Error::LengthMismatch(1, 0)
        ));
        let err =
            TokenLossSequence::new(vec!["a".into(), "b".into()], vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { index: 1, .. }));
        assert!(matches!(
            TokenLossSequence::new(vec!["a".into()], vec![-0.5]).unwrap_err(),
            Error::NonFiniteLoss { index: 0, .. }
        ));
    }

    #[test]
    fn uniform_backend_charges_log2_vocab_per_token() {
        let backend = UniformBackend::new(4);
        let seq = backend.token_losses(&req("we will win")).unwrap();
        assert_eq!(seq.losses_bits(), &[2.0, 2.0, 2.0]);
        assert_eq!(seq.tokens(), &["we", "will", "win"]);
    }

    #[test]
    fn bpc_is_total_bits_over_raw_chars() {
        // 12-character target, losses [2, 2, 2] → 6/12 = 0.5.
        let r = req("abcd efg hij");
        assert_eq!(r.target().chars().count(), 12);
        let seq = UniformBackend::new(4).token_losses(&r).unwrap();
        assert_abs_diff_eq!(bpc(&r, &seq).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_losses_give_zero_bpc() {
        let r = req("sure thing");
        let seq = TokenLossSequence::new(
            vec!["sure".into(), "thing".into()],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(bpc(&r, &seq).unwrap(), 0.0);
    }

    #[test]
    fn losses_cover_target_tokens_only() {
        let with_context =
            ScoringRequest::new("A:", "a very long preamble goes here", "short target").unwrap();
        let seq = UniformBackend::new(8).token_losses(&with_context).unwrap();
        assert_eq!(seq.len(), 2, "two target tokens, regardless of context length");
    }

    #[test]
    fn prompt_blind_wrapper_erases_speaker_identity() {
        let a = ScoringRequest::new("Alice:", "c", "t").unwrap();
        let b = ScoringRequest::new("Bob:", "c", "t").unwrap();
        let blind = PromptBlind(UniformBackend::new(4));
        assert_eq!(
            blind.token_losses(&a).unwrap(),
            blind.token_losses(&b).unwrap()
        );
    }

    #[test]
    fn scaling_wrapper_multiplies_losses() {
        let r = req("one two");
        let scaled = ScaleLosses::new(UniformBackend::new(4), 3.0);
        let seq = scaled.token_losses(&r).unwrap();
        assert_eq!(seq.losses_bits(), &[6.0, 6.0]);
    }
}
