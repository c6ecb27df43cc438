//! Finite probability distributions over the real line.
//!
//! [`FiniteDistribution`] is the only representation of a probability law in
//! the crate: sorted distinct atoms with strictly positive masses. Index-valued
//! laws (transition kernels, tree branching laws, noise laws) are stored as
//! [`Categorical`] probability vectors and turned into value distributions with
//! [`Categorical::law_of`], which is the pushforward of the index law under a
//! value table.

use serde::{Deserialize, Serialize};

use crate::error::{record_validation, ensure_finite, Error, Result};

/// Tolerance on the total mass of user supplied probability vectors.
pub const MASS_TOLERANCE: f64 = 1e-9;

// Total masses this close to one are not rescaled.
const NORMALIZED_SLACK: f64 = 1e-12;

/// A discrete law: strictly increasing atoms with positive probabilities
/// summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct FiniteDistribution {
    atoms: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for FiniteDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        record_validation(FiniteDistribution::new(raw.atoms, raw.probs))
    }
}

impl From<FiniteDistribution> for RawDistribution {
    fn from(d: FiniteDistribution) -> Self {
        RawDistribution {
            atoms: d.atoms,
            probs: d.probs,
        }
    }
}

fn check_probability_vector(probs: &[f64]) -> Result<f64> {
    ensure_finite(probs, "probabilities")?;
    if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| **p < 0.0) {
        return Err(Error::NegativeProbability { index, value });
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::MassNotOne { sum });
    }
    Ok(sum)
}

impl FiniteDistribution {
    /// Builds a distribution from possibly unsorted, possibly repeated values.
    ///
    /// Repeated values are merged by summing their probabilities, atoms with
    /// zero mass are dropped, and the masses are renormalized so that they sum
    /// to one up to rounding.
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::LengthMismatch {
                what: "values and probabilities",
                expected: values.len(),
                got: probs.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::LengthMismatch {
                what: "distribution needs at least one atom",
                expected: 1,
                got: 0,
            });
        }
        ensure_finite(&values, "atoms")?;
        let sum = check_probability_vector(&probs)?;
        Ok(Self::from_pairs_unchecked(
            values.into_iter().zip(probs).collect(),
            sum,
        ))
    }

    /// Point mass at `value`.
    pub fn dirac(value: f64) -> Result<Self> {
        Self::new(vec![value], vec![1.0])
    }

    /// Equal weights on the given values.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::new(values.to_vec(), vec![1.0 / n.max(1) as f64; n])
    }

    // Inputs must be finite with nonnegative masses of total `sum` > 0.
    fn from_pairs_unchecked(mut pairs: Vec<(f64, f64)>, sum: f64) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (z, p) in pairs {
            if p == 0.0 {
                continue;
            }
            match atoms.last() {
                Some(&last) if last == z => *probs.last_mut().unwrap() += p,
                _ => {
                    atoms.push(z);
                    probs.push(p);
                }
            }
        }
        // already normalized input passes through untouched, so rebuilding is exact
        if (sum - 1.0).abs() > NORMALIZED_SLACK {
            for p in &mut probs {
                *p /= sum;
            }
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        // The top atom carries the full mass by definition of a cdf.
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        FiniteDistribution {
            atoms,
            probs,
            cumulative,
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Cdf levels `F(z_i)` at each atom.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    /// Right-continuous cdf `P(Z <= z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a <= z);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Left limit `P(Z < z)`.
    pub fn cdf_left(&self, z: f64) -> f64 {
        let idx = self.atoms.partition_point(|&a| a < z);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Law of `map(Z)` where `map` lists the image of each atom in order.
    pub fn pushforward(&self, map: &[f64]) -> Result<Self> {
        if map.len() != self.atoms.len() {
            return Err(Error::LengthMismatch {
                what: "pushforward map",
                expected: self.atoms.len(),
                got: map.len(),
            });
        }
        ensure_finite(map, "pushforward map")?;
        Ok(Self::from_pairs_unchecked(
            map.iter().copied().zip(self.probs.iter().copied()).collect(),
            1.0,
        ))
    }

    /// Law of `Z + c`.
    pub fn shift(&self, c: f64) -> Self {
        let map: Vec<f64> = self.atoms.iter().map(|z| z + c).collect();
        self.pushforward(&map).expect("shift keeps atoms finite")
    }

    /// Law of `c * Z`.
    pub fn scale(&self, c: f64) -> Self {
        let map: Vec<f64> = self.atoms.iter().map(|z| c * z).collect();
        self.pushforward(&map).expect("scale keeps atoms finite")
    }
}

/// Free-function form of [`FiniteDistribution::new`].
pub fn make_distribution(values: Vec<f64>, probs: Vec<f64>) -> Result<FiniteDistribution> {
    FiniteDistribution::new(values, probs)
}

/// Free-function form of [`FiniteDistribution::cdf`].
pub fn cdf(dist: &FiniteDistribution, z: f64) -> f64 {
    dist.cdf(z)
}

/// Free-function form of [`FiniteDistribution::pushforward`].
pub fn pushforward(dist: &FiniteDistribution, map: &[f64]) -> Result<FiniteDistribution> {
    dist.pushforward(map)
}

/// An iid sample together with the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampleBatch")]
pub struct SampleBatch {
    values: Vec<f64>,
    seed: u64,
}

#[derive(Deserialize)]
struct RawSampleBatch {
    values: Vec<f64>,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawSampleBatch> for SampleBatch {
    type Error = Error;

    fn try_from(raw: RawSampleBatch) -> Result<Self> {
        record_validation(SampleBatch::new(raw.values, raw.seed))
    }
}

impl SampleBatch {
    pub fn new(values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        ensure_finite(&values, "sample")?;
        Ok(SampleBatch { values, seed })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Empirical measure `N^-1 sum_i delta_{Z_i}`.
pub fn empirical(samples: &SampleBatch) -> FiniteDistribution {
    empirical_from_values(samples.values())
}

pub(crate) fn empirical_from_values(values: &[f64]) -> FiniteDistribution {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        pairs.push((sorted[i], (j - i) as f64 / n));
        i = j;
    }
    let sum: f64 = pairs.iter().map(|p| p.1).sum();
    FiniteDistribution::from_pairs_unchecked(pairs, sum)
}

/// Probability vector over an index set `0..len` (kernel rows, branching
/// laws, noise laws). Zero entries are kept: the index set is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCategorical", into = "RawCategorical")]
pub struct Categorical {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCategorical {
    probs: Vec<f64>,
}

impl TryFrom<RawCategorical> for Categorical {
    type Error = Error;

    fn try_from(raw: RawCategorical) -> Result<Self> {
        record_validation(Categorical::new(raw.probs))
    }
}

impl From<Categorical> for RawCategorical {
    fn from(c: Categorical) -> Self {
        RawCategorical { probs: c.probs }
    }
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::LengthMismatch {
                what: "probability vector needs at least one entry",
                expected: 1,
                got: 0,
            });
        }
        let sum = check_probability_vector(&probs)?;
        if (sum - 1.0).abs() <= NORMALIZED_SLACK {
            return Ok(Categorical { probs });
        }
        Ok(Categorical {
            probs: probs.into_iter().map(|p| p / sum).collect(),
        })
    }

    /// Unit mass on `index` out of `len` outcomes.
    pub fn point(index: usize, len: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Categorical { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Categorical {
            probs: vec![1.0 / len as f64; len],
        }
    }

    /// Frequencies of the observed indices.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Categorical {
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Distribution of `values[I]` for `I` drawn from this law.
    pub fn law_of(&self, values: &[f64]) -> Result<FiniteDistribution> {
        if values.len() != self.probs.len() {
            return Err(Error::LengthMismatch {
                what: "values indexed by a categorical law",
                expected: self.probs.len(),
                got: values.len(),
            });
        }
        ensure_finite(values, "values")?;
        Ok(FiniteDistribution::from_pairs_unchecked(
            values.iter().copied().zip(self.probs.iter().copied()).collect(),
            1.0,
        ))
    }

    /// Law of the image index `map[I]` on `0..target_len`.
    pub fn pushforward_indices(&self, map: &[usize], target_len: usize) -> Result<Categorical> {
        if map.len() != self.probs.len() {
            return Err(Error::LengthMismatch {
                what: "index map",
                expected: self.probs.len(),
                got: map.len(),
            });
        }
        let mut probs = vec![0.0; target_len];
        for (&j, &p) in map.iter().zip(&self.probs) {
            if j >= target_len {
                return Err(Error::IndexOutOfRange {
                    what: "pushforward target",
                    index: j,
                    len: target_len,
                });
            }
            probs[j] += p;
        }
        Ok(Categorical { probs })
    }

    /// Inverse-transform draw of an index from a uniform variate `u` in [0, 1).
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}
