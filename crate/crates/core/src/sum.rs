//! Deterministic pairwise summation.

const BLOCK: usize = 128;

/// Cascade summation: naive sums over fixed blocks, merged like a binary
/// counter. The result depends only on the order of the terms.
#[derive(Debug, Clone, Default)]
pub struct PairwiseSum {
    levels: Vec<Option<f64>>,
    block: f64,
    filled: usize,
}

impl PairwiseSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        self.block += x;
        self.filled += 1;
        if self.filled == BLOCK {
            let mut carry = std::mem::take(&mut self.block);
            self.filled = 0;
            for slot in self.levels.iter_mut() {
                match slot.take() {
                    Some(v) => carry += v,
                    None => {
                        *slot = Some(carry);
                        return;
                    }
                }
            }
            self.levels.push(Some(carry));
        }
    }

    pub fn total(&self) -> f64 {
        let mut acc = self.block;
        for v in self.levels.iter().flatten() {
            acc += v;
        }
        acc
    }
}

pub fn pairwise_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut s = PairwiseSum::new();
    for x in terms {
        s.add(x);
    }
    s.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_small_sums() {
        assert_eq!(pairwise_sum(Vec::<f64>::new()), 0.0);
        assert_eq!(pairwise_sum((1..=1000).map(|i| i as f64)), 500500.0);
    }

    #[test]
    fn beats_naive_accumulation() {
        let n = 10_000_000;
        let naive: f64 = (0..n).map(|_| 0.1f64).sum();
        let pairwise = pairwise_sum((0..n).map(|_| 0.1f64));
        let exact = 1_000_000.0;
        assert!((pairwise - exact).abs() < (naive - exact).abs());
        assert!((pairwise - exact).abs() < 1e-6);
    }
}
