use serde::{Deserialize, Serialize};

/// Unit-normalized embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values` to unit L2 norm. Returns `None` for an empty or
    /// all-zero input.
    pub fn normalized(values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || norm <= 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    /// Wraps values that are already known to be unit length (e.g. loaded from disk).
    pub fn from_unit(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; `None` when dimensions differ.
    pub fn cosine(&self, other: &Self) -> Option<f64> {
        if self.dim() != other.dim() {
            return None;
        }
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return Some(0.0);
        }
        Some((dot / denom).clamp(-1.0, 1.0))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic feature-hashing embedding over word unigrams and bigrams.
///
/// Each gram is hashed with FNV-1a (seeded); the low bits pick a bucket in
/// `0..dim` and the top bit picks the sign. The bucket counts are then
/// L2-normalized. Text without any word characters hashes as a single gram.
pub fn hash_embedding(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    assert!(dim > 0, "embedding dimension must be positive");
    let lowered = text.to_lowercase();
    let tokens: Vec<&str> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect();
    let mut grams: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
    grams.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));

    let mut values = vec![0.0; dim];
    for gram in &grams {
        let h = fnv1a(seed, gram.as_bytes());
        let idx = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        values[idx] += sign;
    }
    EmbeddingVector::normalized(values).unwrap_or_else(|| {
        let mut v = vec![0.0; dim];
        v[(fnv1a(seed, text.as_bytes()) % dim as u64) as usize] = 1.0;
        EmbeddingVector(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deterministic_and_unit() {
        let a = hash_embedding("sofa", 64, 7);
        let b = hash_embedding("sofa", 64, 7);
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() <= 1e-6);
        assert!((a.cosine(&b).unwrap() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn punctuation_only_still_normalized() {
        let v = hash_embedding("!!!", 16, 0);
        assert!((v.norm() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_none() {
        let a = hash_embedding("a", 8, 0);
        let b = hash_embedding("a", 16, 0);
        assert!(a.cosine(&b).is_none());
    }

    proptest! {
        #[test]
        fn cosine_bounded(x in ".{1,40}", y in ".{1,40}") {
            let a = hash_embedding(&x, 32, 3);
            let b = hash_embedding(&y, 32, 3);
            prop_assert!((a.norm() - 1.0).abs() <= 1e-6);
            let c = a.cosine(&b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
