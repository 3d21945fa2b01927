//! Process families and their samplers: Poisson, Pólya difference, and the
//! two non-Poisson counterexamples used for factorization detection.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{Error, Result};
use crate::intensity::{Density, IntensityMeasure};
use crate::measure::{Location, PointMeasure, Window};

/// A seeded, stream-addressed RNG. Identical `(seed, stream_id)` reproduces
/// identical draws; distinct stream ids give independent parallel streams.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// The process families the experiments sample from.
#[derive(Clone)]
pub enum ProcessModel {
    Poisson(IntensityMeasure),
    /// Pólya difference process on a base configuration, retention odds `z`.
    PolyaDifference { z: f64, base: PointMeasure },
    /// Cox mixture: a random scale applied to a base Poisson intensity.
    MixedPoisson { rho: IntensityMeasure, scales: Vec<(f64, f64)> },
    /// Poisson with every multiplicity doubled (non-simple counterexample).
    DoubledPoisson(IntensityMeasure),
}

impl ProcessModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessModel::Poisson(_) => Ok(()),
            ProcessModel::PolyaDifference { z, .. } => {
                if *z > 0.0 && z.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("polya z must be positive, got {z}")))
                }
            }
            ProcessModel::MixedPoisson { scales, .. } => {
                let total: f64 = scales.iter().map(|(_, p)| p).sum();
                if scales.iter().any(|(s, p)| *s <= 0.0 || *p < 0.0) {
                    return Err(Error::Config("mixture scales and probabilities must be positive".into()));
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "mixture probabilities sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            ProcessModel::DoubledPoisson(_) => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<PointMeasure> {
        match self {
            ProcessModel::Poisson(rho) => sample_poisson(rho, rng),
            ProcessModel::PolyaDifference { z, base } => {
                let q = z / (1.0 + z);
                Ok(binomial_per_atom(base, q, rng))
            }
            ProcessModel::MixedPoisson { rho, scales } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = scales.last().map(|(s, _)| *s).unwrap_or(1.0);
                for (s, p) in scales {
                    acc += p;
                    if u < acc {
                        chosen = *s;
                        break;
                    }
                }
                sample_poisson(&rho.scale(chosen), rng)
            }
            ProcessModel::DoubledPoisson(rho) => {
                Ok(sample_poisson(rho, rng)?.scale_multiplicities(2))
            }
        }
    }

    /// Closed-form first moment measure.
    pub fn first_moment(&self) -> IntensityMeasure {
        match self {
            ProcessModel::Poisson(rho) => rho.clone(),
            ProcessModel::PolyaDifference { z, base } => {
                IntensityMeasure::from_point_measure(base, z / (1.0 + z))
            }
            ProcessModel::MixedPoisson { rho, scales } => {
                let mean: f64 = scales.iter().map(|(s, p)| s * p).sum();
                rho.scale(mean)
            }
            ProcessModel::DoubledPoisson(rho) => rho.scale(2.0),
        }
    }
}

fn poisson_count(mean: f64, rng: &mut RngStream) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    let v: f64 = d.sample(rng);
    v as u32
}

/// Binomial retention per atom; shared by the Pólya sampler and `thin`.
pub(crate) fn binomial_per_atom(mu: &PointMeasure, q: f64, rng: &mut RngStream) -> PointMeasure {
    PointMeasure::from_atoms(mu.atoms().iter().map(|(loc, m)| {
        let kept = Binomial::new(*m as u64, q).expect("valid probability").sample(rng) as u32;
        (loc.clone(), kept)
    }))
}

fn sample_poisson(rho: &IntensityMeasure, rng: &mut RngStream) -> Result<PointMeasure> {
    match rho {
        IntensityMeasure::Discrete { weights } => Ok(PointMeasure::from_atoms(
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| (Location::Atom(i), poisson_count(*w, rng))),
        )),
        IntensityMeasure::Atomic { atoms } => Ok(PointMeasure::from_atoms(
            atoms
                .iter()
                .map(|(loc, w)| (loc.clone(), poisson_count(*w, rng))),
        )),
        IntensityMeasure::Continuous { window, density, bound, total_mass } => {
            let n = poisson_count(*total_mass, rng);
            let mut atoms = Vec::with_capacity(n as usize);
            for _ in 0..n {
                atoms.push((Location::Point(sample_density(window, density, *bound, rng)?), 1));
            }
            Ok(PointMeasure::from_atoms(atoms))
        }
    }
}

/// Rejection sampling of one location against the declared density bound.
fn sample_density(
    window: &Window,
    density: &Density,
    bound: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    loop {
        let x: Vec<f64> = window
            .lower
            .iter()
            .zip(&window.upper)
            .map(|(l, u)| rng.random_range(*l..*u))
            .collect();
        let v = density.eval(&x);
        if v > bound {
            return Err(Error::RejectionBoundViolated { value: v, bound });
        }
        if rng.random::<f64>() * bound < v {
            return Ok(x);
        }
    }
}
