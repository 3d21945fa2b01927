//! Brute-force ground truth on small discrete spaces: explicit configuration
//! laws, exact thinning/splitting/multi-splitting pushforwards, Campbell
//! measures, total-variation distances, reduced Palm distributions, and the
//! reduced-Palm representation of the splitting kernel.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::functionals::CampbellTestFunction;
use crate::intensity::IntensityMeasure;
use crate::measure::{Location, PointMeasure};
use crate::process::ProcessModel;
use crate::thinning::RetentionVector;

/// Default cap on dense table entries.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Explicit probability table over configurations `(c_1,..,c_k)` with each
/// `c_i <= cap`. Mass beyond the cap is tracked as `tail_mass` and never
/// silently renormalized.
#[derive(Clone, Debug)]
pub struct ConfigTable {
    k: usize,
    cap: u32,
    probs: Vec<f64>,
    tail_mass: f64,
}

/// Joint table over `n_parts`-tuples of configurations, sparse over the
/// reachable lattice.
#[derive(Clone, Debug)]
pub struct JointConfigTable {
    k: usize,
    cap: u32,
    n_parts: usize,
    probs: BTreeMap<Vec<u32>, f64>,
    tail_mass: f64,
}

/// Lattice total-variation distance together with the worst-case bound that
/// adds both truncation tails.
#[derive(Clone, Copy, Debug)]
pub struct TvDistance {
    pub lattice: f64,
    pub with_tail: f64,
}

fn check_budget(entries: u128, budget: u128) -> Result<()> {
    if entries > budget {
        Err(Error::BudgetExceeded { required: entries, budget })
    } else {
        Ok(())
    }
}

fn table_size(k: usize, cap: u32) -> u128 {
    ((cap + 1) as u128).pow(k as u32)
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Per-count binomial retention weights `B[m][j] = C(m,j) q^j (1-q)^(m-j)`.
fn binomial_channel(cap: u32, q: f64) -> Vec<Vec<f64>> {
    (0..=cap)
        .map(|m| {
            (0..=m)
                .map(|j| {
                    binomial_coefficient(m, j)
                        * q.powi(j as i32)
                        * (1.0 - q).powi((m - j) as i32)
                })
                .collect()
        })
        .collect()
}

fn poisson_pmf(mean: f64, cap: u32) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(cap as usize + 1);
    let mut p = (-mean).exp();
    for j in 0..=cap {
        if j > 0 {
            p *= mean / j as f64;
        }
        pmf.push(p);
    }
    pmf
}

impl ConfigTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn point_mass(k: usize, cap: u32, config: &[u32]) -> Result<Self> {
        check_budget(table_size(k, cap), DEFAULT_BUDGET)?;
        assert_eq!(config.len(), k);
        assert!(config.iter().all(|c| *c <= cap));
        let mut probs = vec![0.0; table_size(k, cap) as usize];
        let idx = Self::index_of(k, cap, config);
        probs[idx] = 1.0;
        Ok(Self { k, cap, probs, tail_mass: 0.0 })
    }

    fn index_of(k: usize, cap: u32, config: &[u32]) -> usize {
        let base = (cap + 1) as usize;
        let mut idx = 0usize;
        for i in (0..k).rev() {
            idx = idx * base + config[i] as usize;
        }
        idx
    }

    pub fn prob(&self, config: &[u32]) -> f64 {
        if config.iter().any(|c| *c > self.cap) {
            return 0.0;
        }
        self.probs[Self::index_of(self.k, self.cap, config)]
    }

    /// Visit every lattice configuration with its probability.
    pub fn for_each(&self, mut f: impl FnMut(&[u32], f64)) {
        let mut config = vec![0u32; self.k];
        for idx in 0..self.probs.len() {
            f(&config, self.probs[idx]);
            let mut j = 0;
            while j < self.k {
                config[j] += 1;
                if config[j] <= self.cap {
                    break;
                }
                config[j] = 0;
                j += 1;
            }
            let _ = idx;
        }
    }

    pub fn lattice_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// First moment per atom over the lattice.
    pub fn first_moment(&self) -> Vec<f64> {
        let mut nu = vec![0.0; self.k];
        self.for_each(|config, p| {
            for (i, c) in config.iter().enumerate() {
                nu[i] += p * *c as f64;
            }
        });
        nu
    }

    /// Exact q-thinning pushforward: an independent binomial channel per
    /// atom, applied axis by axis. The tail mass is carried over unchanged.
    pub fn thin(&self, q: f64) -> Result<ConfigTable> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidProbability(q));
        }
        let channel = binomial_channel(self.cap, q);
        let base = (self.cap + 1) as usize;
        let mut probs = self.probs.clone();
        for axis in 0..self.k {
            let stride = base.pow(axis as u32);
            let mut next = vec![0.0; probs.len()];
            let block = stride * base;
            let mut start = 0;
            while start < probs.len() {
                for lo in 0..stride {
                    for m in 0..base {
                        let src = probs[start + lo + m * stride];
                        if src == 0.0 {
                            continue;
                        }
                        for (j, w) in channel[m].iter().enumerate() {
                            next[start + lo + j * stride] += src * w;
                        }
                    }
                }
                start += block;
            }
            probs = next;
        }
        Ok(ConfigTable { k: self.k, cap: self.cap, probs, tail_mass: self.tail_mass })
    }

    /// Joint law of (retained, deleted) under exact splitting.
    pub fn splitting(&self, q: f64) -> Result<JointConfigTable> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidProbability(q));
        }
        check_budget(table_size(self.k, self.cap).pow(2), DEFAULT_BUDGET)?;
        let channel = binomial_channel(self.cap, q);
        let mut probs = BTreeMap::new();
        self.for_each(|mu, p| {
            if p == 0.0 {
                return;
            }
            // enumerate kappa <= mu
            let mut kappa = vec![0u32; self.k];
            loop {
                let w: f64 = kappa
                    .iter()
                    .zip(mu)
                    .map(|(&kk, &m)| channel[m as usize][kk as usize])
                    .product();
                if w > 0.0 {
                    let mut key = Vec::with_capacity(2 * self.k);
                    key.extend_from_slice(&kappa);
                    key.extend(kappa.iter().zip(mu).map(|(&kk, &m)| m - kk));
                    *probs.entry(key).or_insert(0.0) += p * w;
                }
                let mut j = 0;
                loop {
                    if j == self.k {
                        return;
                    }
                    kappa[j] += 1;
                    if kappa[j] <= mu[j] {
                        break;
                    }
                    kappa[j] = 0;
                    j += 1;
                }
            }
        });
        Ok(JointConfigTable {
            k: self.k,
            cap: self.cap,
            n_parts: 2,
            probs,
            tail_mass: self.tail_mass,
        })
    }

    /// n-way multi-splitting via the per-atom multinomial placement law.
    pub fn multi_splitting(&self, q: &RetentionVector) -> Result<JointConfigTable> {
        let n = q.len();
        let qs = q.as_slice();
        // per-count lists of (composition, weight)
        let comps: Vec<Vec<(Vec<u32>, f64)>> = (0..=self.cap)
            .map(|m| compositions_with_weights(m, qs))
            .collect();
        let mut probs = BTreeMap::new();
        self.for_each(|mu, p| {
            if p == 0.0 {
                return;
            }
            let per_atom: Vec<&Vec<(Vec<u32>, f64)>> =
                mu.iter().map(|&m| &comps[m as usize]).collect();
            let mut choice = vec![0usize; self.k];
            loop {
                let mut w = p;
                for (i, &c) in choice.iter().enumerate() {
                    w *= per_atom[i][c].1;
                }
                if w > 0.0 {
                    let mut key = vec![0u32; n * self.k];
                    for (i, &c) in choice.iter().enumerate() {
                        let comp = &per_atom[i][c].0;
                        for m in 0..n {
                            key[m * self.k + i] = comp[m];
                        }
                    }
                    *probs.entry(key).or_insert(0.0) += w;
                }
                let mut j = 0;
                loop {
                    if j == self.k {
                        return;
                    }
                    choice[j] += 1;
                    if choice[j] < per_atom[j].len() {
                        break;
                    }
                    choice[j] = 0;
                    j += 1;
                }
            }
        });
        Ok(JointConfigTable {
            k: self.k,
            cap: self.cap,
            n_parts: n,
            probs,
            tail_mass: self.tail_mass,
        })
    }

    /// n-way multi-splitting built by the sequential-thinning composition;
    /// must agree with [`multi_splitting`] to floating-point accuracy.
    pub fn multi_splitting_sequential(&self, q: &RetentionVector) -> Result<JointConfigTable> {
        let s = q.sequential()?;
        let n = s.len();
        // state key: parts emitted so far then the running remainder
        let mut state: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        self.for_each(|mu, p| {
            if p > 0.0 {
                state.insert(mu.to_vec(), p);
            }
        });
        for &sm in &s[..n - 1] {
            let channel = binomial_channel(self.cap, sm);
            let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
            for (key, p) in &state {
                let (prefix, rem) = key.split_at(key.len() - self.k);
                let mut kappa = vec![0u32; self.k];
                'kappa: loop {
                    let w: f64 = kappa
                        .iter()
                        .zip(rem)
                        .map(|(&kk, &m)| channel[m as usize][kk as usize])
                        .product();
                    if w > 0.0 {
                        let mut nk = Vec::with_capacity(key.len() + self.k);
                        nk.extend_from_slice(prefix);
                        nk.extend_from_slice(&kappa);
                        nk.extend(kappa.iter().zip(rem).map(|(&kk, &m)| m - kk));
                        *next.entry(nk).or_insert(0.0) += p * w;
                    }
                    let mut j = 0;
                    loop {
                        if j == self.k {
                            break 'kappa;
                        }
                        kappa[j] += 1;
                        if kappa[j] <= rem[j] {
                            break;
                        }
                        kappa[j] = 0;
                        j += 1;
                    }
                }
            }
            state = next;
        }
        Ok(JointConfigTable {
            k: self.k,
            cap: self.cap,
            n_parts: n,
            probs: state,
            tail_mass: self.tail_mass,
        })
    }

    /// Exact Campbell functional `sum_mu p(mu) sum_x mu_x h(x, mu)`.
    pub fn campbell(&self, h: &CampbellTestFunction) -> f64 {
        let mut total = 0.0;
        self.for_each(|config, p| {
            if p == 0.0 {
                return;
            }
            let pm = PointMeasure::from_counts(config);
            for (i, &c) in config.iter().enumerate() {
                if c > 0 {
                    total += p * c as f64 * h.eval(&Location::Atom(i), &pm);
                }
            }
        });
        total
    }

    /// Reduced Palm distribution at the configuration `nu`, with the
    /// ordered-selection factorial weight, normalized over the reachable
    /// lattice.
    pub fn reduced_palm(&self, nu: &[u32]) -> Result<ConfigTable> {
        assert_eq!(nu.len(), self.k);
        let mut probs = vec![0.0; self.probs.len()];
        let mut norm = 0.0;
        let mut config = vec![0u32; self.k];
        'outer: loop {
            // weight = prob(config + nu) * prod (c_i + nu_i)! / c_i!
            if config.iter().zip(nu).all(|(&c, &v)| c + v <= self.cap) {
                let shifted: Vec<u32> =
                    config.iter().zip(nu).map(|(&c, &v)| c + v).collect();
                let p = self.prob(&shifted);
                if p > 0.0 {
                    let mut w = p;
                    for (&c, &v) in config.iter().zip(nu) {
                        for j in 0..v {
                            w *= (c + j + 1) as f64;
                        }
                    }
                    probs[Self::index_of(self.k, self.cap, &config)] = w;
                    norm += w;
                }
            }
            let mut j = 0;
            loop {
                if j == self.k {
                    break 'outer;
                }
                config[j] += 1;
                if config[j] <= self.cap {
                    break;
                }
                config[j] = 0;
                j += 1;
            }
        }
        if norm <= 0.0 {
            return Err(Error::ZeroMassAt(format!("{nu:?}")));
        }
        for p in &mut probs {
            *p /= norm;
        }
        Ok(ConfigTable { k: self.k, cap: self.cap, probs, tail_mass: 0.0 })
    }

    /// Splitting kernel at retained configuration `nu` via the reduced-Palm
    /// representation: reweight `P^!_nu` by `(1-q)^{|mu|}` and normalize.
    pub fn karr_splitting_kernel(&self, q: f64, nu: &[u32]) -> Result<ConfigTable> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidProbability(q));
        }
        let palm = self.reduced_palm(nu)?;
        let mut probs = palm.probs;
        let mut norm = 0.0;
        let mut config = vec![0u32; self.k];
        for idx in 0..probs.len() {
            let total: u32 = config.iter().sum();
            probs[idx] *= (1.0 - q).powi(total as i32);
            norm += probs[idx];
            let mut j = 0;
            while j < self.k {
                config[j] += 1;
                if config[j] <= self.cap {
                    break;
                }
                config[j] = 0;
                j += 1;
            }
        }
        if norm <= 0.0 {
            return Err(Error::ZeroMassAt(format!("{nu:?}")));
        }
        for p in &mut probs {
            *p /= norm;
        }
        Ok(ConfigTable { k: self.k, cap: self.cap, probs, tail_mass: 0.0 })
    }

    /// Conditional law of the deleted configuration given retained = `nu`,
    /// computed directly from the splitting construction.
    pub fn conditional_deleted(&self, q: f64, nu: &[u32]) -> Result<ConfigTable> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidProbability(q));
        }
        let channel = binomial_channel(self.cap, q);
        let mut probs = vec![0.0; self.probs.len()];
        let mut norm = 0.0;
        let mut eta = vec![0u32; self.k];
        'outer: loop {
            if eta.iter().zip(nu).all(|(&e, &v)| e + v <= self.cap) {
                let mu: Vec<u32> = eta.iter().zip(nu).map(|(&e, &v)| e + v).collect();
                let p = self.prob(&mu);
                if p > 0.0 {
                    let mut w = p;
                    for (&m, &v) in mu.iter().zip(nu) {
                        w *= channel[m as usize][v as usize];
                    }
                    probs[Self::index_of(self.k, self.cap, &eta)] = w;
                    norm += w;
                }
            }
            let mut j = 0;
            loop {
                if j == self.k {
                    break 'outer;
                }
                eta[j] += 1;
                if eta[j] <= self.cap {
                    break;
                }
                eta[j] = 0;
                j += 1;
            }
        }
        if norm <= 0.0 {
            return Err(Error::ZeroMassAt(format!("{nu:?}")));
        }
        for p in &mut probs {
            *p /= norm;
        }
        Ok(ConfigTable { k: self.k, cap: self.cap, probs, tail_mass: 0.0 })
    }

    /// Text dump `c_1 .. c_k probability`, deterministic order, for diffing.
    pub fn dump<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "table k={} cap={} tail={:.17e}", self.k, self.cap, self.tail_mass)?;
        let mut rows: Vec<(Vec<u32>, f64)> = Vec::new();
        self.for_each(|c, p| {
            if p != 0.0 {
                rows.push((c.to_vec(), p));
            }
        });
        for (c, p) in rows {
            let cfg: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{} {:.17e}", cfg.join(" "), p)?;
        }
        Ok(())
    }
}

/// All length-n nonnegative integer compositions of `m`, each with its
/// multinomial placement weight under landing probabilities `q`.
fn compositions_with_weights(m: u32, q: &[f64]) -> Vec<(Vec<u32>, f64)> {
    fn ln_factorial(n: u32) -> f64 {
        (1..=n).map(|i| (i as f64).ln()).sum()
    }
    let n = q.len();
    let mut out = Vec::new();
    let mut comp = vec![0u32; n];
    fn rec(
        m_left: u32,
        idx: usize,
        comp: &mut Vec<u32>,
        q: &[f64],
        m: u32,
        out: &mut Vec<(Vec<u32>, f64)>,
    ) {
        if idx == comp.len() - 1 {
            comp[idx] = m_left;
            let mut ln_w = ln_factorial(m);
            for (&c, &qm) in comp.iter().zip(q) {
                ln_w -= ln_factorial(c);
                ln_w += c as f64 * qm.ln();
            }
            out.push((comp.clone(), ln_w.exp()));
            return;
        }
        for c in 0..=m_left {
            comp[idx] = c;
            rec(m_left - c, idx + 1, comp, q, m, out);
        }
    }
    rec(m, 0, &mut comp, q, m, &mut out);
    let _ = n;
    out
}

impl JointConfigTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn prob(&self, key: &[u32]) -> f64 {
        self.probs.get(key).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.probs.iter().map(|(k, v)| (k, *v))
    }

    pub fn lattice_mass(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Marginal law of one part.
    pub fn marginal(&self, part: usize) -> ConfigTable {
        assert!(part < self.n_parts);
        let mut probs = vec![0.0; table_size(self.k, self.cap) as usize];
        for (key, p) in &self.probs {
            let cfg = &key[part * self.k..(part + 1) * self.k];
            probs[ConfigTable::index_of(self.k, self.cap, cfg)] += p;
        }
        ConfigTable { k: self.k, cap: self.cap, probs, tail_mass: self.tail_mass }
    }

    /// Merge parts `part` and `part + 1` by summing their configurations.
    pub fn coalesce(&self, part: usize) -> JointConfigTable {
        assert!(part + 1 < self.n_parts);
        let mut probs = BTreeMap::new();
        let k = self.k;
        for (key, p) in &self.probs {
            let mut nk = Vec::with_capacity(key.len() - k);
            nk.extend_from_slice(&key[..part * k]);
            for i in 0..k {
                nk.push(key[part * k + i] + key[(part + 1) * k + i]);
            }
            nk.extend_from_slice(&key[(part + 2) * k..]);
            *probs.entry(nk).or_insert(0.0) += p;
        }
        JointConfigTable {
            k,
            cap: self.cap,
            n_parts: self.n_parts - 1,
            probs,
            tail_mass: self.tail_mass,
        }
    }
}

/// Enumerate a truncated Poisson law with the given per-atom means.
pub fn enumerate_poisson(weights: &[f64], cap: u32, budget: u128) -> Result<ConfigTable> {
    let k = weights.len();
    check_budget(table_size(k, cap).saturating_mul(k.max(1) as u128), budget)?;
    let pmfs: Vec<Vec<f64>> = weights.iter().map(|&w| poisson_pmf(w.max(0.0), cap)).collect();
    let size = table_size(k, cap) as usize;
    let mut probs = vec![0.0; size];
    let mut config = vec![0u32; k];
    for slot in probs.iter_mut() {
        *slot = config
            .iter()
            .zip(&pmfs)
            .map(|(&c, pmf)| pmf[c as usize])
            .product();
        let mut j = 0;
        while j < k {
            config[j] += 1;
            if config[j] <= cap {
                break;
            }
            config[j] = 0;
            j += 1;
        }
    }
    let lattice: f64 = probs.iter().sum();
    Ok(ConfigTable { k, cap, probs, tail_mass: (1.0 - lattice).max(0.0) })
}

/// Exact law of a process model on a discrete ground space of `k` atoms.
pub fn enumerate_model(model: &ProcessModel, k: usize, cap: u32) -> Result<ConfigTable> {
    enumerate_model_with_budget(model, k, cap, DEFAULT_BUDGET)
}

pub fn enumerate_model_with_budget(
    model: &ProcessModel,
    k: usize,
    cap: u32,
    budget: u128,
) -> Result<ConfigTable> {
    match model {
        ProcessModel::Poisson(IntensityMeasure::Discrete { weights }) => {
            if weights.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "{} weights for {k} atoms",
                    weights.len()
                )));
            }
            enumerate_poisson(weights, cap, budget)
        }
        ProcessModel::PolyaDifference { z, base } => {
            let counts = base.counts(k);
            let q = z / (1.0 + z);
            check_budget(table_size(k, cap), budget)?;
            let pmfs: Vec<Vec<f64>> = counts
                .iter()
                .map(|&m| {
                    (0..=cap)
                        .map(|j| {
                            if j <= m {
                                binomial_coefficient(m, j)
                                    * q.powi(j as i32)
                                    * (1.0 - q).powi((m - j) as i32)
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            let size = table_size(k, cap) as usize;
            let mut probs = vec![0.0; size];
            let mut config = vec![0u32; k];
            for slot in probs.iter_mut() {
                *slot = config
                    .iter()
                    .zip(&pmfs)
                    .map(|(&c, pmf)| pmf[c as usize])
                    .product();
                let mut j = 0;
                while j < k {
                    config[j] += 1;
                    if config[j] <= cap {
                        break;
                    }
                    config[j] = 0;
                    j += 1;
                }
            }
            let lattice: f64 = probs.iter().sum();
            Ok(ConfigTable { k, cap, probs, tail_mass: (1.0 - lattice).max(0.0) })
        }
        ProcessModel::MixedPoisson { rho: IntensityMeasure::Discrete { weights }, scales } => {
            let mut mix: Option<ConfigTable> = None;
            for (s, p) in scales {
                let scaled: Vec<f64> = weights.iter().map(|w| s * w).collect();
                let t = enumerate_poisson(&scaled, cap, budget)?;
                match &mut mix {
                    None => {
                        let mut t0 = t;
                        for v in &mut t0.probs {
                            *v *= p;
                        }
                        t0.tail_mass *= p;
                        mix = Some(t0);
                    }
                    Some(acc) => {
                        for (a, b) in acc.probs.iter_mut().zip(&t.probs) {
                            *a += p * b;
                        }
                        acc.tail_mass += p * t.tail_mass;
                    }
                }
            }
            mix.ok_or_else(|| Error::Config("empty mixture".into()))
        }
        ProcessModel::DoubledPoisson(IntensityMeasure::Discrete { weights }) => {
            let half = enumerate_poisson(weights, cap / 2, budget)?;
            check_budget(table_size(k, cap), budget)?;
            let mut probs = vec![0.0; table_size(k, cap) as usize];
            half.for_each(|config, p| {
                let doubled: Vec<u32> = config.iter().map(|c| 2 * c).collect();
                probs[ConfigTable::index_of(k, cap, &doubled)] += p;
            });
            Ok(ConfigTable { k, cap, probs, tail_mass: half.tail_mass })
        }
        _ => Err(Error::Config(
            "exact enumeration requires a discrete ground space model".into(),
        )),
    }
}

/// Lattice TV distance between two configuration tables.
pub fn tv_tables(a: &ConfigTable, b: &ConfigTable) -> Result<TvDistance> {
    if a.k != b.k {
        return Err(Error::ShapeMismatch(format!("k {} vs {}", a.k, b.k)));
    }
    let cap = a.cap.max(b.cap);
    let mut sum = 0.0;
    let mut config = vec![0u32; a.k];
    'outer: loop {
        sum += (a.prob(&config) - b.prob(&config)).abs();
        let mut j = 0;
        loop {
            if j == a.k {
                break 'outer;
            }
            config[j] += 1;
            if config[j] <= cap {
                break;
            }
            config[j] = 0;
            j += 1;
        }
    }
    Ok(TvDistance {
        lattice: 0.5 * sum,
        with_tail: 0.5 * sum + a.tail_mass + b.tail_mass,
    })
}

/// TV distance between two joint tables over the union of their supports.
pub fn tv_joints(a: &JointConfigTable, b: &JointConfigTable) -> Result<TvDistance> {
    if a.k != b.k || a.n_parts != b.n_parts {
        return Err(Error::ShapeMismatch(format!(
            "k {} vs {}, parts {} vs {}",
            a.k, b.k, a.n_parts, b.n_parts
        )));
    }
    let mut sum = 0.0;
    for (key, p) in &a.probs {
        sum += (p - b.prob(key)).abs();
    }
    for (key, p) in &b.probs {
        if !a.probs.contains_key(key) {
            sum += p.abs();
        }
    }
    Ok(TvDistance {
        lattice: 0.5 * sum,
        with_tail: 0.5 * sum + a.tail_mass + b.tail_mass,
    })
}

/// TV distance between a joint law and the product of the given per-part
/// tables, iterated over the dense cross-product lattice.
pub fn tv_joint_vs_product(
    joint: &JointConfigTable,
    parts: &[ConfigTable],
) -> Result<TvDistance> {
    if parts.len() != joint.n_parts {
        return Err(Error::ShapeMismatch(format!(
            "{} marginals for {} parts",
            parts.len(),
            joint.n_parts
        )));
    }
    for t in parts {
        if t.k != joint.k || t.cap != joint.cap {
            return Err(Error::ShapeMismatch("marginal shape".into()));
        }
    }
    let k = joint.k;
    let cap = joint.cap;
    let n = joint.n_parts;
    let mut key = vec![0u32; n * k];
    let mut sum = 0.0;
    'outer: loop {
        let mut prod = 1.0;
        for (m, t) in parts.iter().enumerate() {
            prod *= t.prob(&key[m * k..(m + 1) * k]);
            if prod == 0.0 {
                break;
            }
        }
        sum += (joint.prob(&key) - prod).abs();
        let mut j = 0;
        loop {
            if j == key.len() {
                break 'outer;
            }
            key[j] += 1;
            if key[j] <= cap {
                break;
            }
            key[j] = 0;
            j += 1;
        }
    }
    let tails: f64 = joint.tail_mass + parts.iter().map(|t| t.tail_mass).sum::<f64>();
    Ok(TvDistance { lattice: 0.5 * sum, with_tail: 0.5 * sum + tails })
}

/// The six displayed values of the Campbell computation for `Gamma_q(P)`:
/// per-realization Campbell sums, the Lemma 1 rewrite, the splitting-law
/// form, the product-law form, and the two first-moment forms. Steps 1-3
/// agree for every process; steps 4-6 join them exactly when the splitting
/// law factorizes.
pub fn campbell_chain(
    table: &ConfigTable,
    q: f64,
    h: &CampbellTestFunction,
) -> Result<[f64; 6]> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidProbability(q));
    }
    let k = table.k;
    let ratio = q / (1.0 - q);
    let channel = binomial_channel(table.cap, q);

    let mut step1 = 0.0;
    let mut step2 = 0.0;
    table.for_each(|mu, p| {
        if p == 0.0 {
            return;
        }
        let mut kappa = vec![0u32; k];
        loop {
            let w: f64 = kappa
                .iter()
                .zip(mu)
                .map(|(&kk, &m)| channel[m as usize][kk as usize])
                .product();
            if w > 0.0 {
                let pm = PointMeasure::from_counts(&kappa);
                for i in 0..k {
                    if kappa[i] > 0 {
                        step1 += p * w * kappa[i] as f64 * h.eval(&Location::Atom(i), &pm);
                    }
                    let deleted = mu[i] - kappa[i];
                    if deleted > 0 {
                        let with_extra =
                            pm.add(&PointMeasure::dirac(Location::Atom(i)));
                        step2 += p
                            * w
                            * ratio
                            * deleted as f64
                            * h.eval(&Location::Atom(i), &with_extra);
                    }
                }
            }
            let mut j = 0;
            loop {
                if j == k {
                    return;
                }
                kappa[j] += 1;
                if kappa[j] <= mu[j] {
                    break;
                }
                kappa[j] = 0;
                j += 1;
            }
        }
    });

    let joint = table.splitting(q)?;
    let mut step3 = 0.0;
    for (key, p) in &joint.probs {
        let (kappa, eta) = key.split_at(k);
        let pm = PointMeasure::from_counts(kappa);
        for i in 0..k {
            if eta[i] > 0 {
                let with_extra = pm.add(&PointMeasure::dirac(Location::Atom(i)));
                step3 += p * ratio * eta[i] as f64 * h.eval(&Location::Atom(i), &with_extra);
            }
        }
    }

    let gamma_q = table.thin(q)?;
    let gamma_rest = table.thin(1.0 - q)?;
    let mut step4 = 0.0;
    gamma_q.for_each(|kappa, pk| {
        if pk == 0.0 {
            return;
        }
        let pm = PointMeasure::from_counts(kappa);
        let mut inner = vec![0.0; k];
        gamma_rest.for_each(|eta, pe| {
            if pe == 0.0 {
                return;
            }
            for i in 0..k {
                inner[i] += pe * eta[i] as f64;
            }
        });
        for i in 0..k {
            if inner[i] > 0.0 {
                let with_extra = pm.add(&PointMeasure::dirac(Location::Atom(i)));
                step4 += pk * ratio * inner[i] * h.eval(&Location::Atom(i), &with_extra);
            }
        }
    });

    let nu_rest = gamma_rest.first_moment();
    let nu_p = table.first_moment();
    let mut step5 = 0.0;
    let mut step6 = 0.0;
    gamma_q.for_each(|kappa, pk| {
        if pk == 0.0 {
            return;
        }
        let pm = PointMeasure::from_counts(kappa);
        for i in 0..k {
            let with_extra = pm.add(&PointMeasure::dirac(Location::Atom(i)));
            let hv = h.eval(&Location::Atom(i), &with_extra);
            step5 += pk * ratio * nu_rest[i] * hv;
            step6 += pk * q * nu_p[i] * hv;
        }
    });

    Ok([step1, step2, step3, step4, step5, step6])
}
