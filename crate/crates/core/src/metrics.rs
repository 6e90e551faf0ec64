//! Performance maps, confusion counts and Jensen-Shannon divergence.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Conditioning sets smaller than this are flagged low-confidence.
pub const MIN_CONFIDENT_SAMPLES: u64 = 30;

/// Outcome counts split by the prover's true honesty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub honest_accepted: u64,
    pub honest_rejected: u64,
    pub dishonest_accepted: u64,
    pub dishonest_rejected: u64,
}

impl Confusion {
    pub fn record(&mut self, honest: bool, accepted: bool) {
        match (honest, accepted) {
            (true, true) => self.honest_accepted += 1,
            (true, false) => self.honest_rejected += 1,
            (false, true) => self.dishonest_accepted += 1,
            (false, false) => self.dishonest_rejected += 1,
        }
    }

    pub fn honest(&self) -> u64 {
        self.honest_accepted + self.honest_rejected
    }

    pub fn dishonest(&self) -> u64 {
        self.dishonest_accepted + self.dishonest_rejected
    }

    pub fn total(&self) -> u64 {
        self.honest() + self.dishonest()
    }

    /// True-positive rate: accepted among honest provers.
    pub fn reliability(&self) -> Option<f64> {
        conditional_rate(self.honest_accepted, self.honest()).expect("counts are consistent")
    }

    /// True-negative rate: rejected among dishonest provers.
    pub fn security(&self) -> Option<f64> {
        conditional_rate(self.dishonest_rejected, self.dishonest()).expect("counts are consistent")
    }
}

impl AddAssign for Confusion {
    fn add_assign(&mut self, rhs: Self) {
        self.honest_accepted += rhs.honest_accepted;
        self.honest_rejected += rhs.honest_rejected;
        self.dishonest_accepted += rhs.dishonest_accepted;
        self.dishonest_rejected += rhs.dishonest_rejected;
    }
}

impl std::iter::Sum for Confusion {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Confusion::default(), |mut acc, c| {
            acc += c;
            acc
        })
    }
}

/// `successes / trials`, undefined when there were no trials.
pub fn conditional_rate(successes: u64, trials: u64) -> Result<Option<f64>> {
    if successes > trials {
        return Err(Error::InvalidCounts { successes, trials });
    }
    Ok((trials > 0).then(|| successes as f64 / trials as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Reliability,
    Security,
}

impl MapKind {
    pub fn letter(&self) -> char {
        match self {
            MapKind::Reliability => 'r',
            MapKind::Security => 's',
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MapKind::Reliability => "reliability",
            MapKind::Security => "security",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Model,
    Simulation,
    /// Pointwise divergence between two other maps.
    Divergence,
}

/// Values over the `(p_h, p_c)` grid, with the size of the conditioning set
/// behind each value.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceMap {
    pub grid: GridSpec,
    pub kind: MapKind,
    pub source: MapSource,
    pub values: Vec<Option<f64>>,
    pub counts: Vec<u64>,
}

impl PerformanceMap {
    pub fn new(
        grid: GridSpec,
        kind: MapKind,
        source: MapSource,
        values: Vec<Option<f64>>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let n = grid.cell_count();
        if values.len() != n || counts.len() != n {
            return Err(Error::MalformedMap(format!(
                "expected {n} cells, got {} values and {} counts",
                values.len(),
                counts.len()
            )));
        }
        if let Some(v) = values.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::MalformedMap(format!("value {v} outside [0, 1]")));
        }
        Ok(PerformanceMap {
            grid,
            kind,
            source,
            values,
            counts,
        })
    }

    /// Builds the reliability or security map from per-cell confusion counts.
    pub fn from_confusions(
        grid: GridSpec,
        kind: MapKind,
        source: MapSource,
        cells: &[Confusion],
    ) -> Result<Self> {
        let (values, counts) = cells
            .iter()
            .map(|c| match kind {
                MapKind::Reliability => (c.reliability(), c.honest()),
                MapKind::Security => (c.security(), c.dishonest()),
            })
            .unzip();
        Self::new(grid, kind, source, values, counts)
    }

    pub fn get(&self, p_h: f64, p_c: f64) -> Option<f64> {
        let i = self
            .grid
            .index(self.grid.locate(p_h)?, self.grid.locate(p_c)?);
        self.values[i]
    }

    pub fn count_at(&self, p_h: f64, p_c: f64) -> Option<u64> {
        let i = self
            .grid
            .index(self.grid.locate(p_h)?, self.grid.locate(p_c)?);
        Some(self.counts[i])
    }

    pub fn low_confidence(&self, index: usize) -> bool {
        self.counts[index] < MIN_CONFIDENT_SAMPLES
    }

    fn check_comparable(&self, other: &PerformanceMap) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::MapMismatch(format!(
                "cannot compare a {} map with a {} map",
                self.kind.name(),
                other.kind.name()
            )));
        }
        if self.grid != other.grid {
            return Err(Error::MapMismatch(format!(
                "grid of {} divisions vs {}",
                self.grid.divisions(),
                other.grid.divisions()
            )));
        }
        Ok(())
    }
}

fn kl_terms(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

fn check_pmf(p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "entry {x} is not a probability"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "entries sum to {total}"
        )));
    }
    Ok(())
}

/// Jensen-Shannon divergence in bits between two pmfs on the same support.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::InvalidDistribution(format!(
            "support sizes {} and {}",
            p.len(),
            q.len()
        )));
    }
    check_pmf(p)?;
    check_pmf(q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let value = 0.5 * kl_terms(p, &m) + 0.5 * kl_terms(q, &m);
    // rounding can leave a hair outside the bounds
    Ok(value.clamp(0.0, 1.0))
}

/// JSD between `Bernoulli(a)` and `Bernoulli(b)`.
pub fn bernoulli_jsd(a: f64, b: f64) -> Result<f64> {
    jsd(&[a, 1.0 - a], &[b, 1.0 - b])
}

/// Cell-by-cell Bernoulli JSD. Cells undefined in either input stay undefined.
pub fn pointwise_jsd(a: &PerformanceMap, b: &PerformanceMap) -> Result<PerformanceMap> {
    a.check_comparable(b)?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => bernoulli_jsd(*x, *y).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let counts = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(x, y)| *x.min(y))
        .collect();
    PerformanceMap::new(a.grid, a.kind, MapSource::Divergence, values, counts)
}

/// JSD between the two maps after each is divided by its element sum.
///
/// Cells undefined in either map are dropped from both before normalising.
pub fn global_jsd(a: &PerformanceMap, b: &PerformanceMap) -> Result<f64> {
    a.check_comparable(b)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .values
        .iter()
        .zip(&b.values)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    if xs.is_empty() {
        return Err(Error::EmptySupport);
    }
    let normalise = |v: Vec<f64>| -> Result<Vec<f64>> {
        let total: f64 = v.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution(
                "map has zero mass on the shared support".into(),
            ));
        }
        Ok(v.into_iter().map(|x| x / total).collect())
    };
    jsd(&normalise(xs)?, &normalise(ys)?)
}

/// Global and pointwise comparison of one metric between model and simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsdReport {
    pub kind: MapKind,
    pub theta_label: String,
    pub global: f64,
    pub pointwise_csv_path: String,
}
