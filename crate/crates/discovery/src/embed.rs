//! Text embedders.
//!
//! The default embedder hashes character trigrams of normalized text into a
//! fixed number of buckets and L2-normalizes the counts. It needs no model
//! weights and is fully deterministic.

use serde::{Deserialize, Serialize};

use crate::error::DiscoveryError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dot product. Both vectors are unit-norm, so this is their cosine.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum()
}

pub trait Embedder: Send + Sync {
    /// Stable identifier recorded in every index built with this embedder.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, DiscoveryError>;
}

/// Lowercase, map every non-alphanumeric run to one space, trim.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut gap = false;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push(' ');
            }
            gap = false;
            out.push(c);
        } else {
            gap = true;
        }
    }
    out
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dim: usize,
    id: String,
}

impl TrigramEmbedder {
    pub const DEFAULT_DIM: usize = 512;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            id: format!("trigram-{dim}-v1"),
        }
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl Embedder for TrigramEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, DiscoveryError> {
        let norm = normalize_text(text);
        if norm.is_empty() {
            return Err(DiscoveryError::EmptyText);
        }
        // Pad so word boundaries contribute their own trigrams.
        let chars: Vec<char> = format!(" {norm} ").chars().collect();
        let mut counts = vec![0f64; self.dim];
        let mut buf = [0u8; 12];
        for w in chars.windows(3) {
            let mut n = 0;
            for c in w {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            counts[(fnv1a64(&buf[..n]) % self.dim as u64) as usize] += 1.0;
        }
        let l2 = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut counts {
            *c /= l2;
        }
        Ok(EmbeddingVector { values: counts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  RNA-Seq, (transcripts)!  "), "rna seq transcripts");
        assert_eq!(normalize_text("--"), "");
    }

    #[test]
    fn deterministic_unit_vectors() {
        let e = TrigramEmbedder::default();
        let a = e.embed("compare transcript assemblies").unwrap();
        let b = e.embed("compare transcript assemblies").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 512);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(e.id(), "trigram-512-v1");
    }

    #[test]
    fn empty_text_rejected() {
        let e = TrigramEmbedder::default();
        assert_eq!(e.embed(""), Err(DiscoveryError::EmptyText));
        assert_eq!(e.embed(" ,; "), Err(DiscoveryError::EmptyText));
    }

    #[test]
    fn short_text_still_embeds() {
        let e = TrigramEmbedder::default();
        assert!((e.embed("x").unwrap().norm() - 1.0).abs() < 1e-9);
    }
}
