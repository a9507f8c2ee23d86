//! Ordered integer compositions and the combinatorial weights of the
//! higher-order chain rule.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered tuple `(gamma_1, ..., gamma_l)` of positive integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Composition {
    parts: Vec<u32>,
}

impl Composition {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.is_empty() || parts.iter().any(|&p| p == 0) {
            return Err(Error::invalid(format!(
                "composition parts must be positive, got {parts:?}"
            )));
        }
        Ok(Composition { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Sum of the parts.
    pub fn order(&self) -> u32 {
        self.parts.iter().sum()
    }
}

/// All ordered compositions of `k` into exactly `l` positive parts, in
/// lexicographic order. There are `binomial(k-1, l-1)` of them.
pub fn enumerate_compositions(l: u32, k: u32) -> Result<Vec<Composition>> {
    if l == 0 || k == 0 || l > k {
        return Err(Error::invalid(format!(
            "compositions need 1 <= l <= k, got l = {l}, k = {k}"
        )));
    }
    Ok(compositions_cached(l, k).as_ref().clone())
}

/// Memoized enumeration; the same `(l, k)` tables are hit once per
/// derivative order in every chain-rule contraction.
pub(crate) fn compositions_cached(l: u32, k: u32) -> Arc<Vec<Composition>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Arc<Vec<Composition>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("composition cache poisoned");
    guard
        .entry((l, k))
        .or_insert_with(|| {
            let mut out = Vec::new();
            let mut prefix = Vec::with_capacity(l as usize);
            fill(l, k, &mut prefix, &mut out);
            Arc::new(out)
        })
        .clone()
}

fn fill(l: u32, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Composition>) {
    if l == 1 {
        prefix.push(k);
        out.push(Composition {
            parts: prefix.clone(),
        });
        prefix.pop();
        return;
    }
    // leave at least 1 for each remaining part
    for first in 1..=(k - (l - 1)) {
        prefix.push(first);
        fill(l - 1, k - first, prefix, out);
        prefix.pop();
    }
}

/// Weight `k! / (l! * gamma_1! * ... * gamma_l!)` of one chain-rule term,
/// kept exact as a reduced fraction.
pub fn faa_coefficient(gamma: &Composition) -> Ratio<u64> {
    let k = gamma.order();
    let l = gamma.len() as u32;
    let mut den = factorial(l);
    for &p in gamma.parts() {
        den *= factorial(p);
    }
    Ratio::new(factorial(k), den)
}

pub fn faa_coefficient_scalar<T: Real>(gamma: &Composition) -> T {
    let r = faa_coefficient(gamma);
    T::from_u64(*r.numer()).expect("coefficient numerator") / T::from_u64(*r.denom()).expect("coefficient denominator")
}

fn factorial(n: u32) -> u64 {
    (1..=n as u64).product::<u64>().max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts_are_binomial() {
        // |Gamma(l, k)| = binomial(k - 1, l - 1)
        let binom = |n: u64, r: u64| {
            let mut acc = 1u64;
            for i in 0..r {
                acc = acc * (n - i) / (i + 1);
            }
            acc
        };
        for k in 1..=7u32 {
            for l in 1..=k {
                let got = enumerate_compositions(l, k).unwrap().len() as u64;
                assert_eq!(got, binom(k as u64 - 1, l as u64 - 1), "l={l} k={k}");
            }
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_valid() {
        let cs = enumerate_compositions(2, 4).unwrap();
        let parts: Vec<&[u32]> = cs.iter().map(|c| c.parts()).collect();
        assert_eq!(parts, vec![&[1, 3][..], &[2, 2], &[3, 1]]);
        for c in &cs {
            assert_eq!(c.order(), 4);
            assert_eq!(c.len(), 2);
        }
    }

    #[test]
    fn degenerate_arguments_are_rejected() {
        assert!(enumerate_compositions(0, 3).is_err());
        assert!(enumerate_compositions(4, 3).is_err());
        assert!(Composition::new(vec![1, 0]).is_err());
        assert!(Composition::new(vec![]).is_err());
    }

    #[test]
    fn sample_coefficients_are_exact() {
        // gamma = (1, 2): 3! / (2! 1! 2!) = 6/4 = 3/2
        let g = Composition::new(vec![1, 2]).unwrap();
        assert_eq!(faa_coefficient(&g), Ratio::new(3, 2));
        // gamma = (1, 1, 1): 3! / 3! = 1
        let g = Composition::new(vec![1, 1, 1]).unwrap();
        assert_eq!(faa_coefficient(&g), Ratio::new(1, 1));
        // gamma = (2,): 2! / (1! 2!) = 1
        let g = Composition::new(vec![2]).unwrap();
        assert_eq!(faa_coefficient(&g), Ratio::new(1, 1));
        assert_eq!(faa_coefficient_scalar::<f64>(&Composition::new(vec![1, 2]).unwrap()), 1.5);
    }

    #[test]
    fn grouped_weights_match_partition_multiplicities() {
        // Summing k!/(l! prod gamma_i!) over all orderings of one multiset
        // must equal k! / (prod_j m_j! (j!)^{m_j}) for that multiset, where
        // m_j counts parts equal to j. Checked brute force for k <= 6.
        for k in 1..=6u32 {
            for l in 1..=k {
                let mut grouped: HashMap<Vec<u32>, Ratio<u64>> = HashMap::new();
                for c in enumerate_compositions(l, k).unwrap() {
                    let mut key = c.parts().to_vec();
                    key.sort_unstable();
                    *grouped.entry(key).or_insert_with(|| Ratio::new(0, 1)) +=
                        faa_coefficient(&c);
                }
                for (sorted_parts, total) in grouped {
                    let mut mult: HashMap<u32, u32> = HashMap::new();
                    for p in &sorted_parts {
                        *mult.entry(*p).or_insert(0) += 1;
                    }
                    let mut den = 1u64;
                    for (j, m) in mult {
                        den *= factorial(m) * factorial(j).pow(m);
                    }
                    assert_eq!(total, Ratio::new(factorial(k), den), "k={k} l={l}");
                }
            }
        }
    }
}
