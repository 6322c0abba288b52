use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, ShingleSet};

/// Mersenne prime 2^61 - 1; the universal hash family works over this field.
const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub doc_id: String,
    pub sig: Vec<u64>,
}

/// Seeded family of `num_perms` hash functions `h(x) = (a·x + b) mod p`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_perms: usize, seed: u64) -> Self {
        assert!(num_perms >= 1, "num_perms must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_perms)
            .map(|_| (rng.gen_range(1..MERSENNE_61), rng.gen_range(0..MERSENNE_61)))
            .collect();
        Self { coeffs }
    }

    pub fn num_perms(&self) -> usize {
        self.coeffs.len()
    }

    /// Slot-wise minimum over all shingles. Empty sets get `u64::MAX` everywhere.
    pub fn signature(&self, set: &ShingleSet) -> MinHashSignature {
        let mut sig = vec![u64::MAX; self.coeffs.len()];
        for &x in set.fingerprints() {
            let x = reduce(x);
            for (slot, &(a, b)) in sig.iter_mut().zip(&self.coeffs) {
                let h = mul_add_mod(a, x, b);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        MinHashSignature {
            doc_id: set.doc_id.clone(),
            sig,
        }
    }
}

pub fn minhash_signature(set: &ShingleSet, num_perms: usize, seed: u64) -> MinHashSignature {
    MinHasher::new(num_perms, seed).signature(set)
}

fn reduce(x: u64) -> u64 {
    let r = (x & MERSENNE_61) + (x >> 61);
    if r >= MERSENNE_61 {
        r - MERSENNE_61
    } else {
        r
    }
}

fn mul_add_mod(a: u64, x: u64, b: u64) -> u64 {
    let v = a as u128 * x as u128 + b as u128;
    (v % MERSENNE_61 as u128) as u64
}

/// Fraction of slots on which two signatures agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> f64 {
    assert_eq!(a.sig.len(), b.sig.len(), "signature lengths differ");
    let eq = a.sig.iter().zip(&b.sig).filter(|(x, y)| x == y).count();
    eq as f64 / a.sig.len() as f64
}

/// Banded LSH. Returns index pairs `(i, j)` with `i < j` into `signatures`
/// whose signatures agree on every row of at least one band.
pub fn lsh_candidate_indices(
    signatures: &[MinHashSignature],
    bands: usize,
    rows: usize,
) -> Result<BTreeSet<(usize, usize)>, CorpusError> {
    let mut pairs = BTreeSet::new();
    let Some(first) = signatures.first() else {
        return Ok(pairs);
    };
    let num_perms = first.sig.len();
    if bands == 0 || rows == 0 || bands * rows != num_perms {
        return Err(CorpusError::Config(format!(
            "bands ({bands}) x rows ({rows}) must equal num_perms ({num_perms})"
        )));
    }
    if let Some(bad) = signatures.iter().find(|s| s.sig.len() != num_perms) {
        return Err(CorpusError::Config(format!(
            "signature for {} has length {}, expected {num_perms}",
            bad.doc_id,
            bad.sig.len()
        )));
    }
    for band in 0..bands {
        let range = band * rows..(band + 1) * rows;
        let mut buckets: HashMap<&[u64], Vec<usize>> = HashMap::new();
        for (idx, s) in signatures.iter().enumerate() {
            buckets.entry(&s.sig[range.clone()]).or_default().push(idx);
        }
        for members in buckets.values().filter(|m| m.len() > 1) {
            for (k, &i) in members.iter().enumerate() {
                for &j in &members[k + 1..] {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    Ok(pairs)
}

/// Same as [`lsh_candidate_indices`] but keyed by doc id, each pair ordered
/// lexicographically.
pub fn lsh_candidate_pairs(
    signatures: &[MinHashSignature],
    bands: usize,
    rows: usize,
) -> Result<BTreeSet<(String, String)>, CorpusError> {
    Ok(lsh_candidate_indices(signatures, bands, rows)?
        .into_iter()
        .filter(|&(i, j)| signatures[i].doc_id != signatures[j].doc_id)
        .map(|(i, j)| {
            let (a, b) = (&signatures[i].doc_id, &signatures[j].doc_id);
            if a < b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::exact_jaccard;

    fn synth(id: &str, range: std::ops::RangeInclusive<u64>) -> ShingleSet {
        // spread values so the universal hash sees realistic 64-bit inputs
        ShingleSet::from_fingerprints(id, range.map(|v| v.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    }

    #[test]
    fn identical_sets_identical_signatures() {
        let a = synth("a", 1..=50);
        let b = synth("b", 1..=50);
        assert_eq!(minhash_signature(&a, 64, 7).sig, minhash_signature(&b, 64, 7).sig);
    }

    #[test]
    fn empty_set_is_all_sentinel() {
        let s = minhash_signature(&ShingleSet::default(), 16, 1);
        assert!(s.sig.iter().all(|&v| v == u64::MAX));
        assert_eq!(s.sig.len(), 16);
    }

    #[test]
    fn disjoint_sets_estimate_near_zero() {
        let a = synth("a", 1..=10);
        let b = synth("b", 11..=20);
        assert_eq!(exact_jaccard(&a, &b), 0.0);
        let est = estimate_jaccard(&minhash_signature(&a, 128, 3), &minhash_signature(&b, 128, 3));
        assert!(est <= 0.15, "estimate {est}");
    }

    #[test]
    fn half_overlap_estimate_near_exact() {
        let a = synth("a", 1..=10);
        let b = synth("b", 6..=15);
        let est = estimate_jaccard(&minhash_signature(&a, 128, 11), &minhash_signature(&b, 128, 11));
        assert!((est - exact_jaccard(&a, &b)).abs() <= 0.15, "estimate {est}");

        // 10 shared out of 20
        let c = synth("c", 1..=15);
        let d = synth("d", 6..=20);
        assert!((exact_jaccard(&c, &d) - 0.5).abs() < 1e-12);
        let est = estimate_jaccard(&minhash_signature(&c, 128, 11), &minhash_signature(&d, 128, 11));
        assert!((est - 0.5).abs() <= 0.15, "estimate {est}");
    }

    #[test]
    fn band_mismatch_is_config_error() {
        let s = minhash_signature(&synth("a", 1..=3), 128, 0);
        assert!(matches!(
            lsh_candidate_pairs(&[s.clone(), s], 30, 4),
            Err(CorpusError::Config(_))
        ));
    }

    #[test]
    fn identical_pair_emitted_and_distinct_pair_not() {
        let mut a = minhash_signature(&synth("a", 1..=30), 8, 0);
        let mut b = a.clone();
        b.doc_id = "b".into();
        let pairs = lsh_candidate_pairs(&[a.clone(), b], 4, 2).unwrap();
        assert_eq!(pairs.into_iter().collect::<Vec<_>>(), vec![("a".into(), "b".into())]);

        a.sig = (0..8).collect();
        let c = MinHashSignature {
            doc_id: "c".into(),
            sig: (100..108).collect(),
        };
        assert!(lsh_candidate_pairs(&[a, c], 4, 2).unwrap().is_empty());
    }
}
