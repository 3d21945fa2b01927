//! Laplace transforms, Campbell measures, Mecke residuals, and the exact
//! thinning Papangelou identity check.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::intensity::{midpoint_integral, IntensityMeasure, Quadrature};
use crate::measure::{Location, PointMeasure, Region};
use crate::process::{ProcessModel, RngStream};
use crate::testfn::TestFunction;

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct EstimateWithError {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Streaming first/second moment accumulator; merging two accumulators
/// pools their estimates.
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentAccumulator {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    pub fn estimate(&self) -> EstimateWithError {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sumsq / n) - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        EstimateWithError {
            value: mean,
            stderr: (var / n).sqrt(),
            n_samples: self.n,
        }
    }
}

/// Test function `h(x, mu)` for Campbell-measure functionals.
#[derive(Clone)]
pub struct CampbellTestFunction {
    eval: Arc<dyn Fn(&Location, &PointMeasure) -> f64 + Send + Sync>,
    bound: f64,
}

impl CampbellTestFunction {
    pub fn new(
        bound: f64,
        eval: impl Fn(&Location, &PointMeasure) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { eval: Arc::new(eval), bound }
    }

    /// `h(x, mu) = 1_region(x)`.
    pub fn location_indicator(region: Region) -> Self {
        Self::new(1.0, move |x, _| if region.contains(x) { 1.0 } else { 0.0 })
    }

    pub fn eval(&self, x: &Location, mu: &PointMeasure) -> f64 {
        (self.eval)(x, mu)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Monte Carlo Laplace transform `E[exp(-mu(f))]`.
pub fn laplace_estimate(
    model: &ProcessModel,
    f: &TestFunction,
    n: usize,
    rng: &mut RngStream,
) -> Result<EstimateWithError> {
    let mut acc = MomentAccumulator::default();
    for _ in 0..n {
        let mu = model.sample(rng)?;
        acc.push((-mu.integrate(f)).exp());
    }
    Ok(acc.estimate())
}

/// Closed-form Poisson Laplace transform `exp(-int (1 - e^{-f}) drho)`.
pub fn poisson_laplace_closed_form(
    rho: &IntensityMeasure,
    f: &TestFunction,
    quad: Quadrature,
) -> Result<f64> {
    let integral = match rho {
        IntensityMeasure::Discrete { weights } => weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (1.0 - (-f.eval(&Location::Atom(i))).exp()))
            .sum(),
        IntensityMeasure::Atomic { atoms } => atoms
            .iter()
            .map(|(loc, w)| w * (1.0 - (-f.eval(loc)).exp()))
            .sum(),
        IntensityMeasure::Continuous { window, density, .. } => {
            let integrand = |x: &[f64]| {
                let loc = Location::Point(x.to_vec());
                density.eval(x) * (1.0 - (-f.eval(&loc)).exp())
            };
            let fine = midpoint_integral(window, quad.cells_per_axis, integrand);
            let coarse =
                midpoint_integral(window, (quad.cells_per_axis / 2).max(1), integrand);
            if (fine - coarse).abs() > quad.tolerance {
                return Err(Error::QuadratureFailure {
                    estimate: (fine - coarse).abs(),
                    tolerance: quad.tolerance,
                    cells: quad.cells_per_axis,
                });
            }
            fine
        }
    };
    Ok((-integral).exp())
}

/// The combined test function `v = -log((1-q) e^{-g} + q e^{-f})`.
pub fn v_function(f: &TestFunction, g: &TestFunction, q: f64) -> TestFunction {
    let bound = f.bound().max(g.bound());
    let support = Region::union(f.support().clone(), g.support().clone());
    let (fc, gc) = (f.clone(), g.clone());
    TestFunction::new(bound, support, move |loc| {
        -((1.0 - q) * (-gc.eval(loc)).exp() + q * (-fc.eval(loc)).exp()).ln()
    })
}

/// Both sides of the Poisson factorization Laplace identity:
/// `L_{Pi_rho}(v)` against `L_{Pi_{q rho}}(f) * L_{Pi_{(1-q) rho}}(g)`.
pub fn factorization_laplace_identity_check(
    rho: &IntensityMeasure,
    f: &TestFunction,
    g: &TestFunction,
    q: f64,
    quad: Quadrature,
) -> Result<(f64, f64)> {
    let v = v_function(f, g, q);
    let lhs = poisson_laplace_closed_form(rho, &v, quad)?;
    let rhs = poisson_laplace_closed_form(&rho.scale(q), f, quad)?
        * poisson_laplace_closed_form(&rho.scale(1.0 - q), g, quad)?;
    Ok((lhs, rhs))
}

/// Monte Carlo Campbell functional `E[sum_x mu({x}) h(x, mu)]`.
pub fn campbell_estimate(
    model: &ProcessModel,
    h: &CampbellTestFunction,
    n: usize,
    rng: &mut RngStream,
) -> Result<EstimateWithError> {
    let mut acc = MomentAccumulator::default();
    for _ in 0..n {
        let mu = model.sample(rng)?;
        acc.push(campbell_sum(&mu, h));
    }
    Ok(acc.estimate())
}

fn campbell_sum(mu: &PointMeasure, h: &CampbellTestFunction) -> f64 {
    mu.atoms()
        .iter()
        .map(|(loc, m)| *m as f64 * h.eval(loc, mu))
        .sum()
}

/// Paired Mecke residual `C_P(h) - E[int h(x, mu + delta_x) rho(dx)]`,
/// both terms evaluated on the same draws. `x_cells` sets the per-axis grid
/// for the x-integral when `rho` is a density.
pub fn mecke_residual(
    model: &ProcessModel,
    rho: &IntensityMeasure,
    h: &CampbellTestFunction,
    n: usize,
    rng: &mut RngStream,
    x_cells: usize,
) -> Result<EstimateWithError> {
    let mut acc = MomentAccumulator::default();
    for _ in 0..n {
        let mu = model.sample(rng)?;
        let t1 = campbell_sum(&mu, h);
        let t2 = added_point_integral(rho, &mu, h, x_cells);
        acc.push(t1 - t2);
    }
    Ok(acc.estimate())
}

fn added_point_integral(
    rho: &IntensityMeasure,
    mu: &PointMeasure,
    h: &CampbellTestFunction,
    x_cells: usize,
) -> f64 {
    match rho {
        IntensityMeasure::Discrete { weights } => weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let loc = Location::Atom(i);
                w * h.eval(&loc, &mu.add(&PointMeasure::dirac(loc.clone())))
            })
            .sum(),
        IntensityMeasure::Atomic { atoms } => atoms
            .iter()
            .map(|(loc, w)| w * h.eval(loc, &mu.add(&PointMeasure::dirac(loc.clone()))))
            .sum(),
        IntensityMeasure::Continuous { window, density, .. } => {
            midpoint_integral(window, x_cells, |x| {
                let loc = Location::Point(x.to_vec());
                density.eval(x) * h.eval(&loc, &mu.add(&PointMeasure::dirac(loc.clone())))
            })
        }
    }
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Exact check of the thinning Papangelou identity on a single
/// configuration: enumerates every sub-configuration `kappa <= mu` with its
/// product-binomial probability and returns
/// `(C_{T^mu_q}(h), sum_kappa P(kappa) sum_x (q/(1-q)) (mu-kappa)({x}) h(x, kappa+delta_x))`.
pub fn thinning_papangelou_check(
    mu: &PointMeasure,
    q: f64,
    h: &CampbellTestFunction,
) -> Result<(f64, f64)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidProbability(q));
    }
    let total = mu.total_count();
    if total > 20 {
        return Err(Error::TooLarge { total, cap: 20 });
    }
    let atoms = mu.atoms();
    let mults: Vec<u32> = atoms.iter().map(|(_, m)| *m).collect();
    // per-atom binomial pmfs
    let pmf: Vec<Vec<f64>> = mults
        .iter()
        .map(|&m| {
            (0..=m)
                .map(|k| {
                    binomial_coefficient(m, k)
                        * q.powi(k as i32)
                        * (1.0 - q).powi((m - k) as i32)
                })
                .collect()
        })
        .collect();
    let ratio = q / (1.0 - q);

    let mut kappa = vec![0u32; atoms.len()];
    let (mut lhs, mut rhs) = (0.0f64, 0.0f64);
    loop {
        let prob: f64 = kappa.iter().zip(&pmf).map(|(&k, p)| p[k as usize]).product();
        let kappa_pm = PointMeasure::from_atoms(
            atoms
                .iter()
                .zip(&kappa)
                .map(|((loc, _), &k)| (loc.clone(), k)),
        );
        for (i, (loc, _)) in atoms.iter().enumerate() {
            if kappa[i] > 0 {
                lhs += prob * kappa[i] as f64 * h.eval(loc, &kappa_pm);
            }
            let deleted = mults[i] - kappa[i];
            if deleted > 0 {
                let with_extra = kappa_pm.add(&PointMeasure::dirac(loc.clone()));
                rhs += prob * ratio * deleted as f64 * h.eval(loc, &with_extra);
            }
        }
        // odometer over kappa <= mu
        let mut j = 0;
        loop {
            if j == kappa.len() {
                return Ok((lhs, rhs));
            }
            kappa[j] += 1;
            if kappa[j] <= mults[j] {
                break;
            }
            kappa[j] = 0;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::IntensityMeasure;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn laplace_of_zero_function() {
        let model = ProcessModel::Poisson(IntensityMeasure::discrete(vec![1.0]).unwrap());
        let mut rng = RngStream::new(1, 0);
        let est = laplace_estimate(&model, &TestFunction::zero(), 100, &mut rng).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn poisson_laplace_closed_forms() {
        let quad = Quadrature::default();
        let rho = IntensityMeasure::discrete(vec![1.0]).unwrap();
        assert_eq!(
            poisson_laplace_closed_form(&rho, &TestFunction::zero(), quad).unwrap(),
            1.0
        );
        // f(a) = ln 2 gives 1 - e^{-f} = 1/2
        let f = TestFunction::discrete(vec![LN2]);
        let v = poisson_laplace_closed_form(&rho, &f, quad).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-14);

        let rho2 = IntensityMeasure::discrete(vec![0.5, 1.0]).unwrap();
        let f2 = TestFunction::discrete(vec![LN2, 2.0 * LN2]);
        let v2 = poisson_laplace_closed_form(&rho2, &f2, quad).unwrap();
        assert!((v2 - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn laplace_estimate_matches_closed_form() {
        let rho = IntensityMeasure::discrete(vec![0.8, 0.4]).unwrap();
        let model = ProcessModel::Poisson(rho.clone());
        let f = TestFunction::discrete(vec![0.7, 1.3]);
        let mut rng = RngStream::new(5, 0);
        let est = laplace_estimate(&model, &f, 100_000, &mut rng).unwrap();
        let exact = poisson_laplace_closed_form(&rho, &f, Quadrature::default()).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn v_function_values() {
        let f = TestFunction::discrete(vec![2.0 * LN2]); // ln 4
        let g = TestFunction::discrete(vec![0.0]);
        let v = v_function(&f, &g, 0.5);
        let loc = Location::Atom(0);
        // -log(1/2 + 1/2 * 1/4) = log(8/5)
        assert!((v.eval(&loc) - (8.0f64 / 5.0).ln()).abs() < 1e-14);

        let v2 = v_function(&f, &f, 0.3);
        assert!((v2.eval(&loc) - f.eval(&loc)).abs() < 1e-14);
        let z = v_function(&TestFunction::zero(), &TestFunction::zero(), 0.4);
        assert_eq!(z.eval(&loc), 0.0);
    }

    #[test]
    fn factorization_identity_discrete() {
        let quad = Quadrature::default();
        let rho = IntensityMeasure::discrete(vec![1.0]).unwrap();
        let zero = TestFunction::zero();
        let (l, r) =
            factorization_laplace_identity_check(&rho, &zero, &zero, 0.5, quad).unwrap();
        assert_eq!((l, r), (1.0, 1.0));

        let f = TestFunction::discrete(vec![LN2]);
        let (l, r) = factorization_laplace_identity_check(&rho, &f, &f, 0.3, quad).unwrap();
        assert!((l - (-0.5f64).exp()).abs() < 1e-12);
        assert!((l - r).abs() < 1e-12);

        let rho2 = IntensityMeasure::discrete(vec![0.5, 1.0]).unwrap();
        let f2 = TestFunction::discrete(vec![LN2, 0.0]);
        let g2 = TestFunction::discrete(vec![0.0, 2.0 * LN2]);
        let (l, r) =
            factorization_laplace_identity_check(&rho2, &f2, &g2, 0.3, quad).unwrap();
        assert!((l - r).abs() < 1e-10, "lhs {l} rhs {r}");
    }

    #[test]
    fn campbell_estimates_first_moment() {
        let rho = IntensityMeasure::discrete(vec![0.5, 1.0]).unwrap();
        let model = ProcessModel::Poisson(rho);
        let h = CampbellTestFunction::new(1.0, |_, _| 1.0);
        let mut rng = RngStream::new(8, 0);
        let est = campbell_estimate(&model, &h, 100_000, &mut rng).unwrap();
        assert!((est.value - 1.5).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn mecke_residual_deterministic_case() {
        // model always sampling delta_a with rho = 0: residual is h(a, delta_a)
        let base = PointMeasure::dirac(Location::Atom(0));
        let model = ProcessModel::PolyaDifference { z: 1e12, base };
        let rho = IntensityMeasure::discrete(vec![0.0]).unwrap();
        let h = CampbellTestFunction::new(1.0, |_, mu: &PointMeasure| {
            if mu.total_count() == 1 {
                1.0
            } else {
                0.0
            }
        });
        let mut rng = RngStream::new(2, 0);
        let est = mecke_residual(&model, &rho, &h, 50, &mut rng, 8).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn papangelou_single_point() {
        // mu = delta_a: both sides reduce to q * h(a, delta_a)
        let mu = PointMeasure::dirac(Location::Atom(0));
        let h = CampbellTestFunction::new(3.0, |_, _| 3.0);
        let (l, r) = thinning_papangelou_check(&mu, 0.4, &h).unwrap();
        assert!((l - 1.2).abs() < 1e-15);
        assert!((r - 1.2).abs() < 1e-15);

        let (l0, r0) = thinning_papangelou_check(&PointMeasure::zero(), 0.4, &h).unwrap();
        assert_eq!((l0, r0), (0.0, 0.0));
    }

    #[test]
    fn papangelou_mixed_multiplicities() {
        // mu = 2 delta_a + delta_b, h(x, kappa) = kappa(X)
        let mu = PointMeasure::from_atoms([(Location::Atom(0), 2), (Location::Atom(1), 1)]);
        let h = CampbellTestFunction::new(3.0, |_, mu: &PointMeasure| mu.total_count() as f64);
        let (l, r) = thinning_papangelou_check(&mu, 0.4, &h).unwrap();
        assert!((l - r).abs() < 1e-12, "lhs {l} rhs {r}");
    }

    #[test]
    fn papangelou_too_large() {
        let mu = PointMeasure::dirac_scaled(Location::Atom(0), 25);
        let h = CampbellTestFunction::new(1.0, |_, _| 1.0);
        assert!(matches!(
            thinning_papangelou_check(&mu, 0.5, &h),
            Err(Error::TooLarge { .. })
        ));
    }
}
