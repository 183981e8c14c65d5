//! Shared arbitrary-precision helpers: factorials and binomial coefficients.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// `0!, 1!, …, n!`.
pub(crate) fn factorials(n: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = BigUint::one();
    out.push(acc.clone());
    for i in 1..=n {
        acc *= BigUint::from(i);
        out.push(acc.clone());
    }
    out
}

/// Lazily computed rows of Pascal's triangle, one row per `n`.
#[derive(Default)]
pub(crate) struct Binomials {
    rows: HashMap<usize, Vec<BigUint>>,
}

impl Binomials {
    pub fn new() -> Self {
        Binomials::default()
    }

    /// `C(n, k)`, zero when `k > n`.
    pub fn get(&mut self, n: usize, k: usize) -> BigUint {
        if k > n {
            return BigUint::zero();
        }
        let row = self.rows.entry(n).or_insert_with(|| {
            // multiplicative construction keeps every entry exact
            let mut row = Vec::with_capacity(n + 1);
            let mut value = BigUint::one();
            row.push(value.clone());
            for i in 0..n {
                value = value * BigUint::from(n - i) / BigUint::from(i + 1);
                row.push(value.clone());
            }
            row
        });
        row[k].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials_match_factorials() {
        let mut b = Binomials::new();
        let f = factorials(12);
        for n in 0..=12usize {
            for k in 0..=n {
                let expect = &f[n] / (&f[k] * &f[n - k]);
                assert_eq!(b.get(n, k), expect, "C({n},{k})");
            }
        }
        assert_eq!(b.get(5, 9), BigUint::zero());
    }
}
