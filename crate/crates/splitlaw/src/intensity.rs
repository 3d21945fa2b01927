//! Intensity (first moment) measures: per-atom weights, located atoms, or a
//! bounded density on a window, with midpoint-rule quadrature for masses.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{Location, PointMeasure, Region, Window};

/// Nonnegative bounded density on a window.
#[derive(Clone)]
pub enum Density {
    Constant(f64),
    /// `intercept + slope . x`, clamped at zero.
    Affine { intercept: f64, slope: Vec<f64> },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl Density {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Density::Constant(c) => *c,
            Density::Affine { intercept, slope } => {
                (intercept + slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>()).max(0.0)
            }
            Density::Custom(f) => f(x),
        }
    }
}

/// Quadrature settings for continuous masses.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub cells_per_axis: usize,
    pub tolerance: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { cells_per_axis: 256, tolerance: 1e-9 }
    }
}

/// A nonnegative intensity measure.
#[derive(Clone)]
pub enum IntensityMeasure {
    /// One weight per atom of a discrete ground space.
    Discrete { weights: Vec<f64> },
    /// Weighted atoms at arbitrary locations (e.g. a scaled point measure).
    Atomic { atoms: Vec<(Location, f64)> },
    /// Bounded density on a window; `total_mass` is fixed at construction.
    Continuous { window: Window, density: Density, bound: f64, total_mass: f64 },
}

impl IntensityMeasure {
    pub fn discrete(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Config("intensity weights must be finite and >= 0".into()));
        }
        Ok(Self::Discrete { weights })
    }

    /// Atomic intensity `c * mu` from a point measure.
    pub fn from_point_measure(mu: &PointMeasure, factor: f64) -> Self {
        Self::Atomic {
            atoms: mu
                .atoms()
                .iter()
                .map(|(loc, m)| (loc.clone(), factor * *m as f64))
                .collect(),
        }
    }

    /// Continuous intensity; the total mass is closed-form for constant
    /// densities and computed by quadrature otherwise.
    pub fn continuous(window: Window, density: Density, bound: f64) -> Result<Self> {
        let total_mass = match &density {
            Density::Constant(c) => c * window.volume(),
            _ => quadrature_mass(&window, &density, &window.clone(), Quadrature::default())?,
        };
        Ok(Self::Continuous { window, density, bound, total_mass })
    }

    pub fn continuous_with_mass(
        window: Window,
        density: Density,
        bound: f64,
        total_mass: f64,
    ) -> Self {
        Self::Continuous { window, density, bound, total_mass }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Discrete { weights } => weights.iter().sum(),
            Self::Atomic { atoms } => atoms.iter().map(|(_, w)| w).sum(),
            Self::Continuous { total_mass, .. } => *total_mass,
        }
    }

    /// Mass of `region`; quadrature within the declared tolerance for the
    /// continuous variant.
    pub fn mass(&self, region: &Region, quad: Quadrature) -> Result<f64> {
        match self {
            Self::Discrete { weights } => Ok(weights
                .iter()
                .enumerate()
                .filter(|(i, _)| region.contains(&Location::Atom(*i)))
                .map(|(_, w)| w)
                .sum()),
            Self::Atomic { atoms } => Ok(atoms
                .iter()
                .filter(|(loc, _)| region.contains(loc))
                .map(|(_, w)| w)
                .sum()),
            Self::Continuous { window, density, .. } => match region {
                Region::All => Ok(self.total_mass()),
                Region::Box { lower, upper } => match window.intersect(lower, upper) {
                    Some(clip) => quadrature_mass(window, density, &clip, quad),
                    None => Ok(0.0),
                },
                Region::Atoms(_) => Ok(0.0),
                Region::Union(_) => Err(Error::Config(
                    "mass of a union region is not supported for densities".into(),
                )),
            },
        }
    }

    /// The scaled measure `factor * rho`.
    pub fn scale(&self, factor: f64) -> IntensityMeasure {
        match self {
            Self::Discrete { weights } => Self::Discrete {
                weights: weights.iter().map(|w| factor * w).collect(),
            },
            Self::Atomic { atoms } => Self::Atomic {
                atoms: atoms.iter().map(|(l, w)| (l.clone(), factor * w)).collect(),
            },
            Self::Continuous { window, density, bound, total_mass } => {
                let inner = density.clone();
                Self::Continuous {
                    window: window.clone(),
                    density: Density::Custom(Arc::new(move |x| factor * inner.eval(x))),
                    bound: factor * bound,
                    total_mass: factor * total_mass,
                }
            }
        }
    }
}

/// Midpoint rule over `clip` on a uniform grid. The error estimate is the
/// difference against the half-resolution grid; exceeding the tolerance is a
/// `QuadratureFailure`.
pub fn quadrature_mass(
    _window: &Window,
    density: &Density,
    clip: &Window,
    quad: Quadrature,
) -> Result<f64> {
    let fine = midpoint_integral(clip, quad.cells_per_axis, |x| density.eval(x));
    let coarse = midpoint_integral(clip, (quad.cells_per_axis / 2).max(1), |x| density.eval(x));
    let estimate = (fine - coarse).abs();
    if estimate > quad.tolerance {
        return Err(Error::QuadratureFailure {
            estimate,
            tolerance: quad.tolerance,
            cells: quad.cells_per_axis,
        });
    }
    Ok(fine)
}

/// Midpoint rule for an arbitrary integrand over a box.
pub fn midpoint_integral(win: &Window, cells: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let d = win.dim();
    let steps: Vec<f64> = win
        .lower
        .iter()
        .zip(&win.upper)
        .map(|(l, u)| (u - l) / cells as f64)
        .collect();
    let cell_vol: f64 = steps.iter().product();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0f64; d];
    let mut sum = 0.0;
    loop {
        for j in 0..d {
            x[j] = win.lower[j] + (idx[j] as f64 + 0.5) * steps[j];
        }
        sum += f(&x);
        // odometer
        let mut j = 0;
        loop {
            if j == d {
                return sum * cell_vol;
            }
            idx[j] += 1;
            if idx[j] < cells {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_mass_lookup() {
        let rho = IntensityMeasure::discrete(vec![0.5, 1.0]).unwrap();
        assert_eq!(rho.mass(&Region::atoms([0]), Quadrature::default()).unwrap(), 0.5);
        assert_eq!(rho.mass(&Region::atoms([]), Quadrature::default()).unwrap(), 0.0);
        assert_eq!(rho.total_mass(), 1.5);
    }

    #[test]
    fn constant_density_exact() {
        let rho = IntensityMeasure::continuous(
            Window::unit_square(),
            Density::Constant(1.0),
            1.0,
        )
        .unwrap();
        let m = rho.mass(&Region::All, Quadrature::default()).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
        let half = rho
            .mass(
                &Region::Box { lower: vec![0.0, 0.0], upper: vec![0.5, 1.0] },
                Quadrature::default(),
            )
            .unwrap();
        assert!((half - 0.5).abs() < 1e-9);
    }

    #[test]
    fn quadrature_failure_surfaces() {
        // a cusp the midpoint rule cannot settle at low resolution
        let d = Density::Custom(Arc::new(|x: &[f64]| (x[0] - 0.371).abs().sqrt()));
        let win = Window::new(vec![0.0], vec![1.0]).unwrap();
        let err = quadrature_mass(&win, &d, &win, Quadrature { cells_per_axis: 4, tolerance: 1e-12 });
        assert!(matches!(err, Err(Error::QuadratureFailure { .. })));
    }
}
