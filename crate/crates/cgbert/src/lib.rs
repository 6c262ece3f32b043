//! A conditional variational text generator built on a masked transformer,
//! trained from scratch, plus the generalized few-shot intent detection
//! pipeline around it: learn an utterance distribution per intent, generate
//! pseudo-labeled utterances for data-poor intents, and measure the effect
//! on a joint-label-space classifier.

pub mod numerics;
