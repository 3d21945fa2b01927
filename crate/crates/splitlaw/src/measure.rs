//! Point measures with multiplicities on a finite discrete space or a
//! bounded rectangular window, plus the regions and elementary operations
//! the rest of the crate is built on.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testfn::TestFunction;

/// Bounded axis-aligned rectangular window in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config("window bounds must have equal, positive dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::Config("window requires finite lower < upper per axis".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit_square() -> Self {
        Self { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (l, u))| *xi >= *l && *xi <= *u)
    }

    /// Intersection with another box, `None` if empty.
    pub fn intersect(&self, lower: &[f64], upper: &[f64]) -> Option<Window> {
        let lo: Vec<f64> = self.lower.iter().zip(lower).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.upper.iter().zip(upper).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(l, u)| l < u) {
            Some(Window { lower: lo, upper: hi })
        } else {
            None
        }
    }
}

/// The ground space: either `k` labelled atoms or a bounded window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Space {
    Discrete { atoms: usize },
    Window(Window),
}

impl Space {
    pub fn contains(&self, loc: &Location) -> bool {
        match (self, loc) {
            (Space::Discrete { atoms }, Location::Atom(i)) => i < atoms,
            (Space::Window(w), Location::Point(x)) => w.contains(x),
            _ => false,
        }
    }
}

/// A point of the ground space.
#[derive(Clone, Debug)]
pub enum Location {
    Atom(usize),
    Point(Vec<f64>),
}

impl Location {
    pub fn point(coords: &[f64]) -> Self {
        Location::Point(coords.to_vec())
    }
}

impl PartialEq for Location {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Location {}

impl PartialOrd for Location {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Location {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Location::Atom(a), Location::Atom(b)) => a.cmp(b),
            (Location::Point(a), Location::Point(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    match x.total_cmp(y) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                a.len().cmp(&b.len())
            }
            (Location::Atom(_), Location::Point(_)) => Ordering::Less,
            (Location::Point(_), Location::Atom(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Atom(i) => write!(f, "atom {i}"),
            Location::Point(x) => {
                let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
                write!(f, "({})", coords.join(", "))
            }
        }
    }
}

/// A measurable region used for counting: everything, an atom subset, or a
/// sub-box (half-open `[lower, upper)` so adjacent boxes tile cleanly).
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    All,
    Atoms(BTreeSet<usize>),
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Union(Vec<Region>),
}

impl Region {
    pub fn atoms<I: IntoIterator<Item = usize>>(ids: I) -> Self {
        Region::Atoms(ids.into_iter().collect())
    }

    pub fn contains(&self, loc: &Location) -> bool {
        match (self, loc) {
            (Region::All, _) => true,
            (Region::Atoms(set), Location::Atom(i)) => set.contains(i),
            (Region::Box { lower, upper }, Location::Point(x)) => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (l, u))| *xi >= *l && *xi < *u),
            (Region::Union(parts), loc) => parts.iter().any(|r| r.contains(loc)),
            _ => false,
        }
    }

    pub fn union(a: Region, b: Region) -> Region {
        Region::Union(vec![a, b])
    }
}

/// A finite point measure with integer multiplicities, kept in canonical
/// (lexicographically sorted, merged) form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PointMeasure {
    atoms: Vec<(Location, u32)>,
}

impl PointMeasure {
    /// The zero measure.
    pub fn zero() -> Self {
        Self { atoms: Vec::new() }
    }

    /// The singleton `delta_x`.
    pub fn dirac(loc: Location) -> Self {
        Self { atoms: vec![(loc, 1)] }
    }

    /// `m * delta_x`.
    pub fn dirac_scaled(loc: Location, multiplicity: u32) -> Self {
        if multiplicity == 0 {
            Self::zero()
        } else {
            Self { atoms: vec![(loc, multiplicity)] }
        }
    }

    /// Build from any atom list; duplicates merge, zero multiplicities drop.
    pub fn from_atoms<I: IntoIterator<Item = (Location, u32)>>(iter: I) -> Self {
        let mut atoms: Vec<(Location, u32)> = iter.into_iter().filter(|(_, m)| *m > 0).collect();
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Location, u32)> = Vec::with_capacity(atoms.len());
        for (loc, m) in atoms {
            match merged.last_mut() {
                Some((last, lm)) if *last == loc => *lm += m,
                _ => merged.push((loc, m)),
            }
        }
        Self { atoms: merged }
    }

    /// Multiplicity vector on a discrete ground space of `k` atoms.
    pub fn from_counts(counts: &[u32]) -> Self {
        Self::from_atoms(
            counts
                .iter()
                .enumerate()
                .filter(|(_, m)| **m > 0)
                .map(|(i, m)| (Location::Atom(i), *m)),
        )
    }

    /// Inverse of [`from_counts`]; panics on non-atom locations.
    pub fn counts(&self, k: usize) -> Vec<u32> {
        let mut out = vec![0u32; k];
        for (loc, m) in &self.atoms {
            match loc {
                Location::Atom(i) => out[*i] += m,
                Location::Point(_) => panic!("counts() requires a discrete-located measure"),
            }
        }
        out
    }

    pub fn atoms(&self) -> &[(Location, u32)] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn multiplicity(&self, loc: &Location) -> u32 {
        self.atoms
            .binary_search_by(|(l, _)| l.cmp(loc))
            .map(|i| self.atoms[i].1)
            .unwrap_or(0)
    }

    /// Total number of points counted with multiplicity, `mu(X)`.
    pub fn total_count(&self) -> u64 {
        self.atoms.iter().map(|(_, m)| *m as u64).sum()
    }

    pub fn add(&self, other: &PointMeasure) -> PointMeasure {
        PointMeasure::from_atoms(
            self.atoms.iter().cloned().chain(other.atoms.iter().cloned()),
        )
    }

    /// `self - other`; errors unless `other` is a sub-configuration.
    pub fn subtract(&self, other: &PointMeasure) -> Result<PointMeasure> {
        let mut out = Vec::with_capacity(self.atoms.len());
        for (loc, m) in &self.atoms {
            let theirs = other.multiplicity(loc);
            if theirs > *m {
                return Err(Error::NotSubconfiguration(loc.to_string()));
            }
            if theirs < *m {
                out.push((loc.clone(), m - theirs));
            }
        }
        // every atom of other must appear in self
        for (loc, m) in &other.atoms {
            if *m > self.multiplicity(loc) {
                return Err(Error::NotSubconfiguration(loc.to_string()));
            }
        }
        Ok(PointMeasure { atoms: out })
    }

    pub fn is_sub_of(&self, other: &PointMeasure) -> bool {
        self.atoms.iter().all(|(loc, m)| *m <= other.multiplicity(loc))
    }

    /// `mu(f) = sum_x mu({x}) f(x)`.
    pub fn integrate(&self, f: &TestFunction) -> f64 {
        self.atoms.iter().map(|(loc, m)| *m as f64 * f.eval(loc)).sum()
    }

    /// Total multiplicity of atoms falling in `region`.
    pub fn count_in(&self, region: &Region) -> u64 {
        self.atoms
            .iter()
            .filter(|(loc, _)| region.contains(loc))
            .map(|(_, m)| *m as u64)
            .sum()
    }

    /// Scale every multiplicity by an integer factor.
    pub fn scale_multiplicities(&self, factor: u32) -> PointMeasure {
        if factor == 0 {
            return PointMeasure::zero();
        }
        PointMeasure {
            atoms: self.atoms.iter().map(|(l, m)| (l.clone(), m * factor)).collect(),
        }
    }
}

impl fmt::Display for PointMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> =
            self.atoms.iter().map(|(loc, m)| format!("{m}x{loc}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}
