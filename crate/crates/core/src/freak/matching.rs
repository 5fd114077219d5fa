use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::freak::bits::{FreakDescriptor, CASCADE_BITS, CASCADE_COUNT, DESCRIPTOR_BITS};
use crate::raster::DescriptorRecord;

/// Number of differing bits, `popcount(a XOR b)`.
pub fn hamming_distance(a: &FreakDescriptor, b: &FreakDescriptor) -> u32 {
    a.words().iter().zip(b.words()).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Hamming distance over raw bit slices; both must hold 512 bits.
pub fn hamming_distance_bits(a: &[bool], b: &[bool]) -> Result<u32> {
    if a.len() != DESCRIPTOR_BITS || b.len() != DESCRIPTOR_BITS {
        return Err(Error::contract(format!(
            "descriptor lengths {} and {}, expected {DESCRIPTOR_BITS}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count() as u32)
}

/// Maximum cumulative Hamming distance allowed after each cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchPolicy {
    thresholds: [u32; CASCADE_COUNT],
}

impl MatchPolicy {
    pub fn new(thresholds: [u32; CASCADE_COUNT]) -> Result<Self> {
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config(format!(
                "cascade thresholds must be non-decreasing, got {thresholds:?}"
            )));
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> [u32; CASCADE_COUNT] {
        self.thresholds
    }

    /// Accept/reject by computing all four cumulative distances up front.
    pub fn accepts(&self, a: &FreakDescriptor, b: &FreakDescriptor) -> bool {
        let mut cumulative = 0;
        let mut ok = true;
        for k in 0..CASCADE_COUNT {
            cumulative += cascade_distance(a, b, k);
            ok &= cumulative <= self.thresholds[k];
        }
        ok
    }
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self {
            thresholds: [30, 60, 90, 120],
        }
    }
}

impl fmt::Display for MatchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.thresholds;
        write!(f, "{a},{b},{c},{d}")
    }
}

impl FromStr for MatchPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values: Vec<u32> = s
            .split(',')
            .map(|v| v.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("match policy {s:?}: {e}")))?;
        let thresholds: [u32; CASCADE_COUNT] = values
            .try_into()
            .map_err(|_| Error::Config(format!("match policy {s:?} needs {CASCADE_COUNT} values")))?;
        Self::new(thresholds)
    }
}

fn cascade_distance(a: &FreakDescriptor, b: &FreakDescriptor, k: usize) -> u32 {
    a.cascade(k)
        .iter()
        .zip(b.cascade(k))
        .map(|(x, y)| (x ^ y).count_ones())
        .sum()
}

/// Outcome of a cascaded comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeOutcome {
    pub accepted: bool,
    pub bits_examined: u32,
    /// Cumulative distance over the examined cascades.
    pub distance: u32,
}

/// Compare coarse to fine, stopping at the first cascade whose cumulative
/// distance exceeds its threshold.
pub fn cascade_match(a: &FreakDescriptor, b: &FreakDescriptor, policy: &MatchPolicy) -> CascadeOutcome {
    let mut distance = 0;
    for k in 0..CASCADE_COUNT {
        distance += cascade_distance(a, b, k);
        let bits_examined = ((k + 1) * CASCADE_BITS) as u32;
        if distance > policy.thresholds[k] {
            return CascadeOutcome {
                accepted: false,
                bits_examined,
                distance,
            };
        }
    }
    CascadeOutcome {
        accepted: true,
        bits_examined: DESCRIPTOR_BITS as u32,
        distance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub query: usize,
    pub train: usize,
    pub distance: u32,
}

/// For every query descriptor, the accepted train descriptor with the smallest
/// full distance (lowest index on ties). Queries without an accepted candidate
/// are omitted.
pub fn match_descriptors(query: &[DescriptorRecord], train: &[DescriptorRecord], policy: &MatchPolicy) -> Vec<Match> {
    query
        .iter()
        .enumerate()
        .filter_map(|(qi, q)| {
            train
                .iter()
                .enumerate()
                .filter_map(|(ti, t)| {
                    let out = cascade_match(&q.bits, &t.bits, policy);
                    out.accepted.then_some((out.distance, ti))
                })
                .min()
                .map(|(distance, train)| Match {
                    query: qi,
                    train,
                    distance,
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_descriptor(rng: &mut impl Rng) -> FreakDescriptor {
        FreakDescriptor::from_words(std::array::from_fn(|_| rng.gen()))
    }

    fn naive_distance(a: &FreakDescriptor, b: &FreakDescriptor) -> u32 {
        (0..DESCRIPTOR_BITS).filter(|&j| a.get(j) != b.get(j)).count() as u32
    }

    #[test]
    fn identical_and_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_descriptor(&mut rng);
        assert_eq!(hamming_distance(&d, &d), 0);
        assert_eq!(hamming_distance(&d, &d.complement()), 512);
        let out = cascade_match(&d, &d, &MatchPolicy::default());
        assert!(out.accepted);
        assert_eq!(out.bits_examined, 512);
    }

    #[test]
    fn first_cascade_mismatch_rejects_early() {
        let a = FreakDescriptor::zero();
        let mut b = FreakDescriptor::zero();
        for j in 0..CASCADE_BITS {
            b.set(j, true);
        }
        let policy = MatchPolicy::new([16, 512, 512, 512]).unwrap();
        let out = cascade_match(&a, &b, &policy);
        assert_eq!((out.accepted, out.bits_examined), (false, 128));
    }

    #[test]
    fn bit_slices_need_full_length() {
        let a = vec![false; 512];
        let mut b = vec![false; 512];
        b[3] = true;
        assert_eq!(hamming_distance_bits(&a, &b).unwrap(), 1);
        assert!(hamming_distance_bits(&a, &b[..511]).is_err());
    }

    #[test]
    fn policy_validation_and_parsing() {
        assert!(MatchPolicy::new([10, 5, 20, 30]).is_err());
        let p: MatchPolicy = "1, 2,3,4".parse().unwrap();
        assert_eq!(p.thresholds(), [1, 2, 3, 4]);
        assert_eq!(p.to_string().parse::<MatchPolicy>().unwrap(), p);
        assert!("1,2,3".parse::<MatchPolicy>().is_err());
        assert!("4,3,2,1".parse::<MatchPolicy>().is_err());
    }

    #[test]
    fn early_out_agrees_with_full_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5000 {
            let a = random_descriptor(&mut rng);
            // Correlated partner so both outcomes occur.
            let mut b = a;
            let flips = rng.gen_range(0..200);
            for _ in 0..flips {
                let j = rng.gen_range(0..DESCRIPTOR_BITS);
                b.set(j, !b.get(j));
            }
            let mut t: [u32; 4] = std::array::from_fn(|_| rng.gen_range(0..200));
            t.sort_unstable();
            let policy = MatchPolicy::new(t).unwrap();
            let out = cascade_match(&a, &b, &policy);
            assert_eq!(out.accepted, policy.accepts(&a, &b));
            assert!([128, 256, 384, 512].contains(&out.bits_examined));
        }
    }

    #[test]
    fn matcher_picks_nearest_accepted() {
        use crate::raster::Keypoint;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = |bits| DescriptorRecord {
            keypoint: Keypoint::new(0, 0, 2.0),
            orientation: 0.0,
            bits,
        };
        let train: Vec<_> = (0..5).map(|_| rec(random_descriptor(&mut rng))).collect();
        let mut near = train[3].bits;
        near.set(0, !near.get(0));
        let query = vec![rec(near), rec(random_descriptor(&mut rng))];
        let matches = match_descriptors(&query, &train, &MatchPolicy::default());
        assert_eq!(
            matches,
            vec![Match {
                query: 0,
                train: 3,
                distance: 1
            }]
        );
    }

    proptest! {
        #[test]
        fn metric_properties(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_descriptor(&mut rng), random_descriptor(&mut rng), random_descriptor(&mut rng));
            prop_assert_eq!(hamming_distance(&a, &b), naive_distance(&a, &b));
            prop_assert_eq!(hamming_distance(&a, &b), hamming_distance(&b, &a));
            prop_assert!(hamming_distance(&a, &c) <= hamming_distance(&a, &b) + hamming_distance(&b, &c));
        }
    }
}
