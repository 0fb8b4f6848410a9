//! Fixed-size Bloom filter over cacheline addresses.

pub const BLOOM_BITS: usize = 4096;
pub const BLOOM_HASHES: usize = 2;

#[inline]
fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// 4096-bit filter with two hash functions of the line address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    words: [u64; BLOOM_BITS / 64],
}

impl Default for BloomFilter {
    fn default() -> Self {
        Self { words: [0; BLOOM_BITS / 64] }
    }
}

impl BloomFilter {
    fn positions(addr: u64) -> [usize; BLOOM_HASHES] {
        let line = addr >> 6;
        let h = mix(line);
        let g = mix(line ^ 0x5851_f42d_4c95_7f2d);
        [(h as usize) % BLOOM_BITS, (g as usize) % BLOOM_BITS]
    }

    pub fn insert(&mut self, addr: u64) {
        for p in Self::positions(addr) {
            self.words[p / 64] |= 1 << (p % 64);
        }
    }

    pub fn query(&self, addr: u64) -> bool {
        Self::positions(addr).iter().all(|&p| self.words[p / 64] & (1 << (p % 64)) != 0)
    }

    pub fn reset(&mut self) {
        self.words = [0; BLOOM_BITS / 64];
    }

    pub fn size_bytes(&self) -> usize {
        BLOOM_BITS / 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_filter_reports_nothing() {
        let f = BloomFilter::default();
        assert!(!f.query(0x1000));
        assert_eq!(f.size_bytes(), 512);
    }

    #[test]
    fn inserted_is_found_and_reset_clears() {
        let mut f = BloomFilter::default();
        f.insert(0xabc0);
        assert!(f.query(0xabc0));
        assert!(f.query(0xabff), "same cacheline");
        f.reset();
        assert!(!f.query(0xabc0));
    }

    proptest! {
        #[test]
        fn no_false_negatives(addrs in prop::collection::vec(any::<u64>(), 1..400)) {
            let mut f = BloomFilter::default();
            for &a in &addrs {
                f.insert(a);
            }
            for &a in &addrs {
                prop_assert!(f.query(a));
            }
        }
    }
}
