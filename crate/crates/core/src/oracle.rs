//! Exhaustive enumeration oracle and a rejection-sampling baseline.
//!
//! Everything in this module is deliberately naive: it is the reference the
//! dynamic programs are checked against.

use rand::Rng;

use crate::error::{Error, Result};
use crate::markov::{sample_unconstrained, sequence_probability, Chain};

/// Maximum number of words the oracle will enumerate.
pub const ENUMERATION_GUARD: u128 = 10_000_000;

/// Number of words of length `n` over `k` symbols, or an error past `limit`.
pub fn check_enumeration(k: usize, n: usize, limit: u128) -> Result<u128> {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(k as u128);
        if total > limit {
            return Err(Error::GuardExceeded { requested: total, limit });
        }
    }
    Ok(total)
}

/// Iterates over all words of length `n` over `k` symbols in lexicographic
/// order, calling `f` on each.
pub fn for_each_word(k: usize, n: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 || n == 0 {
        return;
    }
    let mut w = vec![0usize; n];
    loop {
        f(&w);
        let mut pos = n;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            w[pos] += 1;
            if w[pos] < k {
                break;
            }
            w[pos] = 0;
        }
    }
}

/// Σ_{w ∈ A^n, pred(w)} P(w), by enumeration.
pub fn oracle_partition<C, P>(chain: &C, n: usize, pred: P) -> Result<f64>
where
    C: Chain + ?Sized,
    P: Fn(&[usize]) -> bool,
{
    chain.check_len(n)?;
    check_enumeration(chain.size(), n, ENUMERATION_GUARD)?;
    let mut z = 0.0;
    for_each_word(chain.size(), n, |w| {
        if pred(w) {
            z += sequence_probability(chain, w).expect("valid word");
        }
    });
    Ok(z)
}

/// `out[t][a] = P(X_t = a | pred)`, positions 0-based.
pub fn oracle_marginals<C, P>(chain: &C, n: usize, pred: P) -> Result<Vec<Vec<f64>>>
where
    C: Chain + ?Sized,
    P: Fn(&[usize]) -> bool,
{
    chain.check_len(n)?;
    check_enumeration(chain.size(), n, ENUMERATION_GUARD)?;
    let k = chain.size();
    let mut table = vec![vec![0.0; k]; n];
    let mut z = 0.0;
    for_each_word(k, n, |w| {
        if pred(w) {
            let p = sequence_probability(chain, w).expect("valid word");
            z += p;
            for (t, &x) in w.iter().enumerate() {
                table[t][x] += p;
            }
        }
    });
    if z <= 0.0 {
        return Err(Error::NullEvent);
    }
    for row in &mut table {
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    Ok(table)
}

/// The full conditional distribution over satisfying words with positive
/// mass, sorted by word.
pub fn oracle_distribution<C, P>(chain: &C, n: usize, pred: P) -> Result<Vec<(Vec<usize>, f64)>>
where
    C: Chain + ?Sized,
    P: Fn(&[usize]) -> bool,
{
    chain.check_len(n)?;
    check_enumeration(chain.size(), n, ENUMERATION_GUARD)?;
    let mut out = Vec::new();
    let mut z = 0.0;
    for_each_word(chain.size(), n, |w| {
        if pred(w) {
            let p = sequence_probability(chain, w).expect("valid word");
            if p > 0.0 {
                z += p;
                out.push((w.to_vec(), p));
            }
        }
    });
    if z <= 0.0 {
        return Err(Error::NullEvent);
    }
    for (_, p) in &mut out {
        *p /= z;
    }
    Ok(out)
}

/// Draws unconstrained samples until one satisfies `pred`. Returns `None`
/// once `max_tries` samples have been rejected.
pub fn rejection_sample<C, P, R>(
    chain: &C,
    n: usize,
    pred: P,
    max_tries: usize,
    rng: &mut R,
) -> Result<Option<Vec<usize>>>
where
    C: Chain + ?Sized,
    P: Fn(&[usize]) -> bool,
    R: Rng + ?Sized,
{
    if max_tries == 0 {
        return Err(Error::Precondition("max_tries must be at least 1".into()));
    }
    for _ in 0..max_tries {
        let w = sample_unconstrained(chain, n, rng)?;
        if pred(&w) {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Total-variation distance between an empirical sample and a reference
/// distribution given as `(word, probability)` pairs.
pub fn total_variation<'a>(samples: impl IntoIterator<Item = &'a Vec<usize>>, reference: &[(Vec<usize>, f64)]) -> f64 {
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<&[usize], f64> = BTreeMap::new();
    let mut total = 0.0;
    for s in samples {
        *counts.entry(s.as_slice()).or_default() += 1.0;
        total += 1.0;
    }
    let mut tv = 0.0;
    for (w, p) in reference {
        let q = counts.remove(w.as_slice()).unwrap_or(0.0) / total;
        tv += (p - q).abs();
    }
    tv += counts.values().map(|c| c / total).sum::<f64>();
    tv / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::fixtures::{m_d, m_u};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partition_fixtures() {
        assert!((oracle_partition(&m_u(), 3, |_| true).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(oracle_partition(&m_u(), 3, |w| w[0] == w[2]).unwrap(), 0.5);
        assert_eq!(oracle_partition(&m_d(), 4, |w| w == [0, 1, 0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn marginal_fixtures() {
        let t = oracle_marginals(&m_u(), 2, |_| true).unwrap();
        assert!(t.iter().flatten().all(|&v| v == 0.5));
        let t = oracle_marginals(&m_u(), 3, |w| w[0] == w[2]).unwrap();
        assert_eq!(t[0][0], 0.5);
        let t = oracle_marginals(&m_d(), 2, |_| true).unwrap();
        assert_eq!(t, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(oracle_marginals(&m_u(), 2, |_| false), Err(Error::NullEvent)));
    }

    #[test]
    fn guard_refuses_large_enumerations() {
        let err = oracle_partition(&m_u(), 30, |_| true).unwrap_err();
        assert!(matches!(err, Error::GuardExceeded { .. }));
    }

    #[test]
    fn rejection_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = rejection_sample(&m_d(), 4, |_| true, 1, &mut rng).unwrap();
        assert_eq!(w, Some(vec![0, 1, 0, 1]));
        let w = rejection_sample(&m_u(), 1, |w| w[0] == 0, 64, &mut rng).unwrap();
        assert_eq!(w, Some(vec![0]));
        assert_eq!(rejection_sample(&m_u(), 3, |_| false, 10, &mut rng).unwrap(), None);
        assert!(rejection_sample(&m_u(), 3, |_| true, 0, &mut rng).is_err());
    }

    #[test]
    fn total_mass_is_one_for_every_length() {
        let m = crate::markov::MarkovModel::from_rows(
            &["a", "b", "c"],
            vec![0.2, 0.3, 0.5],
            &[vec![0.1, 0.6, 0.3], vec![0.0, 0.0, 1.0], vec![0.5, 0.25, 0.25]],
        )
        .unwrap();
        for n in 1..=8 {
            let z = oracle_partition(&m, n, |_| true).unwrap();
            assert!((z - 1.0).abs() < 1e-10, "n={n}: {z}");
            for row in oracle_marginals(&m, n, |_| true).unwrap() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejection_matches_oracle_in_tv() {
        let m = m_u();
        let pred = |w: &[usize]| w[0] == w[3];
        let reference = oracle_distribution(&m, 4, pred).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<Vec<usize>> =
            (0..100_000).map(|_| rejection_sample(&m, 4, pred, 1000, &mut rng).unwrap().unwrap()).collect();
        assert!(total_variation(&samples, &reference) < 0.02);
    }
}
