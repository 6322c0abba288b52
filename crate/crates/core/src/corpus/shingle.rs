use xxhash_rust::xxh3::xxh3_64;

/// Sorted, deduplicated 64-bit fingerprints of the word n-grams of a document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShingleSet {
    pub doc_id: String,
    shingles: Vec<u64>,
}

impl ShingleSet {
    pub fn from_fingerprints(doc_id: impl Into<String>, fps: impl IntoIterator<Item = u64>) -> Self {
        let mut shingles: Vec<u64> = fps.into_iter().collect();
        shingles.sort_unstable();
        shingles.dedup();
        Self {
            doc_id: doc_id.into(),
            shingles,
        }
    }

    pub fn fingerprints(&self) -> &[u64] {
        &self.shingles
    }

    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }
}

/// Word n-gram shingles: lowercase, split on whitespace, fingerprint every
/// contiguous window of `n` tokens joined by a single space.
pub fn shingle(doc_id: &str, text: &str, n: usize) -> ShingleSet {
    assert!(n >= 1, "shingle width must be at least 1");
    let lowered = text.to_lowercase();
    let tokens: Vec<&str> = lowered.split_whitespace().collect();
    if tokens.len() < n {
        return ShingleSet::from_fingerprints(doc_id, std::iter::empty());
    }
    let mut key = String::new();
    let fps = tokens.windows(n).map(|w| {
        key.clear();
        for (i, t) in w.iter().enumerate() {
            if i > 0 {
                key.push(' ');
            }
            key.push_str(t);
        }
        fingerprint(&key)
    });
    let fps: Vec<u64> = fps.collect();
    ShingleSet::from_fingerprints(doc_id, fps)
}

pub fn fingerprint(s: &str) -> u64 {
    xxh3_64(s.as_bytes())
}

/// |a ∩ b| / |a ∪ b|. Two empty sets count as identical.
pub fn exact_jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    let (x, y) = (a.fingerprints(), b.fingerprints());
    if x.is_empty() && y.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = x.len() + y.len() - inter;
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(v: &[u64]) -> ShingleSet {
        ShingleSet::from_fingerprints("x", v.iter().copied())
    }

    #[test]
    fn bigrams_of_three_tokens() {
        let s = shingle("d", "a b c", 2);
        let expected: BTreeSet<u64> = [fingerprint("a b"), fingerprint("b c")].into();
        assert_eq!(s.len(), 2);
        assert_eq!(s.fingerprints().iter().copied().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn too_few_tokens_is_empty() {
        assert!(shingle("d", "a b", 9).is_empty());
    }

    #[test]
    fn twelve_tokens_give_four_nine_grams() {
        let text = "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9 t10 t11";
        // enumerate windows by hand
        let toks: Vec<&str> = text.split(' ').collect();
        let mut expected = BTreeSet::new();
        for start in 0..=toks.len() - 9 {
            expected.insert(fingerprint(&toks[start..start + 9].join(" ")));
        }
        assert_eq!(expected.len(), 4);
        let s = shingle("d", text, 9);
        assert_eq!(s.fingerprints().iter().copied().collect::<BTreeSet<_>>(), expected);
    }

    #[test]
    fn normalizes_case_and_whitespace() {
        assert_eq!(
            shingle("a", "The  Quick\tbrown", 2).fingerprints(),
            shingle("b", "the quick\nBROWN", 2).fingerprints()
        );
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(exact_jaccard(&set(&[1, 2, 3]), &set(&[1, 2, 3])), 1.0);
        assert_eq!(exact_jaccard(&set(&[1, 2]), &set(&[3, 4])), 0.0);
        assert!((exact_jaccard(&set(&[1, 2, 3, 4]), &set(&[3, 4, 5, 6])) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(exact_jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(exact_jaccard(&set(&[]), &set(&[1])), 0.0);
    }
}
