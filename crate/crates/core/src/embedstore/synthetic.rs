//! Deterministic stand-in for a contextual encoder.
//!
//! Every token vector is drawn from ChaCha8 seeded by a SHA-256 derived hash
//! of `(token, sense_tag, seed, dim)` and scaled to unit length, so the same
//! word under a different sense tag lands somewhere else in the space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{SentenceEmbeddings, WordpieceRecord, SEP_TOKEN};

/// Stable 64-bit hash over length-prefixed byte strings.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"depwsd/v1");
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn token_vector(token: &str, sense_tag: &str, seed: u64, dim: usize) -> Vec<f32> {
    let key = stable_hash(&[
        token.as_bytes(),
        sense_tag.as_bytes(),
        &seed.to_le_bytes(),
        &(dim as u64).to_le_bytes(),
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| (v / norm) as f32).collect()
}

/// One wordpiece per entry of `tokens`; the separator vector uses `[SEP]`
/// with an empty sense tag. `dim` must be positive.
pub fn synthetic_embeddings<S: AsRef<str>>(
    id: impl Into<String>,
    tokens: &[S],
    sense_tag: &str,
    seed: u64,
    dim: usize,
) -> SentenceEmbeddings {
    assert!(dim > 0, "embedding dimension must be positive");
    let pieces = tokens
        .iter()
        .map(|t| WordpieceRecord::new(t.as_ref(), token_vector(t.as_ref(), sense_tag, seed, dim)))
        .collect();
    let sep = token_vector(SEP_TOKEN, "", seed, dim);
    SentenceEmbeddings::new(id, pieces, sep, dim).expect("synthetic pieces must not start with ##")
}
