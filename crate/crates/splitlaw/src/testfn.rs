//! Bounded nonnegative test functions with declared support.

use std::sync::Arc;

use crate::measure::{Location, Region};

/// A nonnegative bounded function on the ground space, zero outside its
/// declared support. Evaluation outside the support short-circuits to zero,
/// so the support invariant holds by construction.
#[derive(Clone)]
pub struct TestFunction {
    eval: Arc<dyn Fn(&Location) -> f64 + Send + Sync>,
    bound: f64,
    support: Region,
}

impl TestFunction {
    pub fn new(
        bound: f64,
        support: Region,
        eval: impl Fn(&Location) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { eval: Arc::new(eval), bound, support }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Region::Union(Vec::new()), |_| 0.0)
    }

    /// One value per atom of a discrete ground space; zero elsewhere.
    pub fn discrete(values: Vec<f64>) -> Self {
        let bound = values.iter().cloned().fold(0.0, f64::max);
        let support = Region::atoms(
            values.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, _)| i),
        );
        let vals = values.clone();
        Self::new(bound, support, move |loc| match loc {
            Location::Atom(i) if *i < vals.len() => vals[*i],
            _ => 0.0,
        })
    }

    /// `scale` on `region`, zero elsewhere.
    pub fn indicator(region: Region, scale: f64) -> Self {
        Self::new(scale, region, move |_| scale)
    }

    /// Product tent peaking at `center` with the given half-widths, scaled.
    pub fn tent(center: Vec<f64>, halfwidth: Vec<f64>, scale: f64) -> Self {
        let lower: Vec<f64> =
            center.iter().zip(&halfwidth).map(|(c, h)| c - h).collect();
        let upper: Vec<f64> =
            center.iter().zip(&halfwidth).map(|(c, h)| c + h).collect();
        let support = Region::Box { lower, upper };
        let (c, h) = (center, halfwidth);
        Self::new(scale, support, move |loc| match loc {
            Location::Point(x) => {
                let mut v = scale;
                for ((xi, ci), hi) in x.iter().zip(&c).zip(&h) {
                    v *= (1.0 - (xi - ci).abs() / hi).max(0.0);
                }
                v
            }
            _ => 0.0,
        })
    }

    pub fn eval(&self, loc: &Location) -> f64 {
        if self.support.contains(loc) {
            (self.eval)(loc)
        } else {
            0.0
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn support(&self) -> &Region {
        &self.support
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_forces_zero() {
        let f = TestFunction::new(1.0, Region::atoms([0]), |_| 1.0);
        assert_eq!(f.eval(&Location::Atom(0)), 1.0);
        assert_eq!(f.eval(&Location::Atom(1)), 0.0);
    }

    #[test]
    fn tent_shape() {
        let f = TestFunction::tent(vec![0.5, 0.5], vec![0.25, 0.25], 2.0);
        assert_eq!(f.eval(&Location::point(&[0.5, 0.5])), 2.0);
        assert_eq!(f.eval(&Location::point(&[0.9, 0.5])), 0.0);
        let v = f.eval(&Location::point(&[0.625, 0.5]));
        assert!((v - 1.0).abs() < 1e-12);
    }
}
