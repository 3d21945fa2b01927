//! Independent thinning, two-way splitting, and sequential n-way
//! multi-splitting of point configurations.

use crate::error::{Error, Result};
use crate::measure::PointMeasure;
use crate::process::{binomial_per_atom, ProcessModel, RngStream};

/// Retained/deleted halves of a split; they sum to the source exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPair {
    pub retained: PointMeasure,
    pub deleted: PointMeasure,
}

/// An n-way partition of a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitVector {
    pub parts: Vec<PointMeasure>,
}

impl SplitVector {
    pub fn total(&self) -> PointMeasure {
        self.parts
            .iter()
            .fold(PointMeasure::zero(), |acc, p| acc.add(p))
    }
}

/// Landing probabilities for n-way splitting: each entry in (0,1), sum 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RetentionVector {
    q: Vec<f64>,
}

impl RetentionVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::InvalidRetentionVector(format!(
                "need at least 2 parts, got {}",
                q.len()
            )));
        }
        if let Some(bad) = q.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidRetentionVector(format!(
                "entry {bad} outside (0,1)"
            )));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidRetentionVector(format!(
                "entries sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { q })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    /// Sequential thinning probabilities `s_m = q_m / (q_m + ... + q_n)`,
    /// with the last entry exactly 1. Entries needing more than a 1e-12
    /// clamp are rejected as malformed.
    pub fn sequential(&self) -> Result<Vec<f64>> {
        let n = self.q.len();
        let mut s = Vec::with_capacity(n);
        let mut tail: f64 = self.q.iter().sum();
        for (m, qm) in self.q.iter().enumerate() {
            if m == n - 1 {
                s.push(1.0);
                break;
            }
            let raw = qm / tail;
            if raw > 1.0 + 1e-12 || raw < -1e-12 {
                return Err(Error::InvalidRetentionVector(format!(
                    "sequential probability {raw} needs clamping beyond 1e-12"
                )));
            }
            s.push(raw.clamp(0.0, 1.0));
            tail -= qm;
        }
        Ok(s)
    }
}

fn check_probability(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(q))
    }
}

/// Independent q-thinning: each of the `mu({x})` copies at `x` is kept with
/// probability `q`, realized as one binomial draw per atom.
pub fn thin(mu: &PointMeasure, q: f64, rng: &mut RngStream) -> Result<PointMeasure> {
    check_probability(q)?;
    Ok(binomial_per_atom(mu, q, rng))
}

/// Split into (retained, deleted); conservation is exact by construction.
pub fn split(mu: &PointMeasure, q: f64, rng: &mut RngStream) -> Result<SplitPair> {
    let retained = thin(mu, q, rng)?;
    let deleted = mu.subtract(&retained).expect("thin returns a sub-configuration");
    Ok(SplitPair { retained, deleted })
}

/// Sequential n-way split: part m is a thinning of the running remainder
/// with probability `s_m`; the last part is the deterministic remainder
/// (no random draw for it).
pub fn multi_split(
    mu: &PointMeasure,
    q: &RetentionVector,
    rng: &mut RngStream,
) -> Result<SplitVector> {
    let s = q.sequential()?;
    let n = s.len();
    let mut parts = Vec::with_capacity(n);
    let mut remainder = mu.clone();
    for &sm in &s[..n - 1] {
        let kept = thin(&remainder, sm, rng)?;
        remainder = remainder.subtract(&kept).expect("thin returns a sub-configuration");
        parts.push(kept);
    }
    parts.push(remainder);
    Ok(SplitVector { parts })
}

/// Draw a realization of the model, then split it.
pub fn sample_splitting_law(
    model: &ProcessModel,
    q: f64,
    rng: &mut RngStream,
) -> Result<SplitPair> {
    let mu = model.sample(rng)?;
    split(&mu, q, rng)
}

/// Draw a realization of the model, then multi-split it.
pub fn sample_multi_splitting_law(
    model: &ProcessModel,
    q: &RetentionVector,
    rng: &mut RngStream,
) -> Result<SplitVector> {
    let mu = model.sample(rng)?;
    multi_split(&mu, q, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Location;

    fn delta(i: usize) -> PointMeasure {
        PointMeasure::dirac(Location::Atom(i))
    }

    #[test]
    fn invalid_probability_rejected() {
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(thin(&delta(0), 0.0, &mut rng), Err(Error::InvalidProbability(_))));
        assert!(matches!(thin(&delta(0), 1.0, &mut rng), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn thin_of_zero_is_zero() {
        let mut rng = RngStream::new(0, 0);
        assert!(thin(&PointMeasure::zero(), 0.5, &mut rng).unwrap().is_zero());
        let pair = split(&PointMeasure::zero(), 0.3, &mut rng).unwrap();
        assert!(pair.retained.is_zero() && pair.deleted.is_zero());
    }

    #[test]
    fn thin_two_copies_law() {
        // thinning 2*delta_a at q=1/2: kept count distributed (1/4, 1/2, 1/4),
        // oracle: enumeration of the 4 equally likely keep/drop patterns
        let mu = PointMeasure::dirac_scaled(Location::Atom(0), 2);
        let mut rng = RngStream::new(3, 0);
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let t = thin(&mu, 0.5, &mut rng).unwrap();
            assert!(t.is_sub_of(&mu));
            counts[t.total_count() as usize] += 1;
        }
        for (k, expect) in [(0usize, 0.25), (1, 0.5), (2, 0.25)] {
            let p = counts[k] as f64 / n as f64;
            let se = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!((p - expect).abs() < 4.0 * se, "k={k} p={p}");
        }
    }

    #[test]
    fn sequential_probabilities() {
        let third = 1.0 / 3.0;
        let q = RetentionVector::new(vec![third, third, third]).unwrap();
        let s = q.sequential().unwrap();
        assert!((s[0] - third).abs() < 1e-15);
        assert!((s[1] - 0.5).abs() < 1e-15);
        assert_eq!(s[2], 1.0);

        let q = RetentionVector::new(vec![0.5, 0.25, 0.25]).unwrap();
        let s = q.sequential().unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!((s[1] - 0.5).abs() < 1e-15);
        assert_eq!(s[2], 1.0);

        let q = RetentionVector::new(vec![0.3, 0.7]).unwrap();
        let s = q.sequential().unwrap();
        assert!((s[0] - 0.3).abs() < 1e-15);
        assert_eq!(s[1], 1.0);
    }

    #[test]
    fn sequential_product_reproduces_landing_probs() {
        for q in [
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.25; 4],
            vec![0.6, 0.15, 0.25],
        ] {
            let rv = RetentionVector::new(q.clone()).unwrap();
            let s = rv.sequential().unwrap();
            let mut survive = 1.0;
            for (m, qm) in q.iter().enumerate() {
                let landing = survive * s[m];
                assert!((landing - qm).abs() < 1e-12, "part {m}: {landing} vs {qm}");
                survive *= 1.0 - s[m];
            }
        }
    }

    #[test]
    fn retention_vector_validation() {
        assert!(RetentionVector::new(vec![0.5, 0.4]).is_err());
        assert!(RetentionVector::new(vec![0.5]).is_err());
        assert!(RetentionVector::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn two_way_multi_split_is_bit_identical_to_split() {
        let mu = PointMeasure::from_atoms([
            (Location::Atom(0), 3),
            (Location::Atom(1), 2),
            (Location::Atom(2), 1),
        ]);
        let q = 0.37;
        let rv = RetentionVector::new(vec![q, 1.0 - q]).unwrap();
        for seed in 0..20 {
            let mut r1 = RngStream::new(seed, 0);
            let mut r2 = RngStream::new(seed, 0);
            let pair = split(&mu, q, &mut r1).unwrap();
            let vec2 = multi_split(&mu, &rv, &mut r2).unwrap();
            assert_eq!(pair.retained, vec2.parts[0]);
            assert_eq!(pair.deleted, vec2.parts[1]);
        }
    }

    #[test]
    fn conservation_exact() {
        let mu = PointMeasure::from_atoms([(Location::Atom(0), 4), (Location::Atom(1), 3)]);
        let rv = RetentionVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut rng = RngStream::new(9, 0);
        for _ in 0..200 {
            let sv = multi_split(&mu, &rv, &mut rng).unwrap();
            assert_eq!(sv.total(), mu);
            let pair = split(&mu, 0.4, &mut rng).unwrap();
            assert_eq!(pair.retained.add(&pair.deleted), mu);
        }
    }

    #[test]
    fn single_point_lands_uniformly_in_thirds() {
        // multinomial oracle: delta_a lands in each of 3 parts w.p. 1/3
        let mu = delta(0);
        let third = 1.0 / 3.0;
        let rv = RetentionVector::new(vec![third, third, third]).unwrap();
        let mut rng = RngStream::new(21, 0);
        let n = 100_000usize;
        let mut landed = [0usize; 3];
        for _ in 0..n {
            let sv = multi_split(&mu, &rv, &mut rng).unwrap();
            let m = sv.parts.iter().position(|p| !p.is_zero()).unwrap();
            landed[m] += 1;
        }
        let se = (third * (1.0 - third) / n as f64).sqrt();
        for m in 0..3 {
            let p = landed[m] as f64 / n as f64;
            assert!((p - third).abs() < 3.0 * se, "part {m}: {p}");
        }
    }
}
