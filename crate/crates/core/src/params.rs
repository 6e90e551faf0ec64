//! Protocol parameters: threshold, depth and per-level witness counts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acceptance threshold `t` in `(0, 1]`.
///
/// Comparisons of the form `count < t * n` are evaluated exactly. The
/// threshold is held as the rational given by its shortest decimal
/// representation, so `0.1 * 10` is exactly one confirmation rather than
/// whatever binary rounding produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    value: f64,
    ratio: Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ratio {
    /// `numer / 10^digits`
    Decimal { numer: u64, digits: u32 },
    /// `mantissa * 2^-shift`; used when the decimal form is too long to be exact in u64.
    Binary { mantissa: u64, shift: u32 },
}

const MAX_DECIMAL_DIGITS: usize = 18;

impl Threshold {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() || t <= 0.0 || t > 1.0 {
            return Err(Error::InvalidParams(format!(
                "threshold must lie in (0, 1], got {t}"
            )));
        }
        Ok(Threshold {
            value: t,
            ratio: Ratio::from_f64(t),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Smallest integer `k` with `k >= t * n`.
    pub fn min_count(&self, n: u64) -> u64 {
        match self.ratio {
            Ratio::Decimal { numer, digits } => {
                let denom = 10u128.pow(digits);
                (numer as u128 * n as u128).div_ceil(denom) as u64
            }
            Ratio::Binary { mantissa, shift } => {
                let product = mantissa as u128 * n as u128;
                if product == 0 {
                    0
                } else if shift >= 128 {
                    1
                } else {
                    let whole = product >> shift;
                    let rem = product & ((1u128 << shift) - 1);
                    (whole + u128::from(rem != 0)) as u64
                }
            }
        }
    }

    /// `count >= t * n`, i.e. the negation of the protocol's `count < t * n` test.
    pub fn is_met(&self, count: u64, n: u64) -> bool {
        count >= self.min_count(n)
    }
}

impl Ratio {
    fn from_f64(t: f64) -> Self {
        let repr = format!("{t}");
        let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
        if frac_part.len() <= MAX_DECIMAL_DIGITS {
            let digits = frac_part.len() as u32;
            let joined = format!("{int_part}{frac_part}");
            if let Ok(numer) = joined.parse::<u64>() {
                return Ratio::Decimal { numer, digits };
            }
        }
        // t is positive and normal here; decompose the exact binary value.
        let bits = t.to_bits();
        let exponent = ((bits >> 52) & 0x7ff) as i32;
        let fraction = bits & ((1u64 << 52) - 1);
        let (mantissa, exp) = if exponent == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1u64 << 52), exponent - 1075)
        };
        debug_assert!(exp < 0);
        Ratio::Binary {
            mantissa,
            shift: (-exp) as u32,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl TryFrom<f64> for Threshold {
    type Error = Error;
    fn try_from(t: f64) -> Result<Self> {
        Threshold::new(t)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.value
    }
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value)
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let t = f64::deserialize(d)?;
        Threshold::new(t).map_err(serde::de::Error::custom)
    }
}

/// What verification does when an agent is named more than once in a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    /// Repeat namings never count as confirmations and cannot act as parents.
    #[default]
    Discount,
    /// Any repeat naming rejects the prover outright.
    FailProof,
}

/// Protocol parameters `{t, d, w_1..w_d}` plus the duplicate-naming policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct TPoPParams {
    threshold: Threshold,
    witnesses: Vec<u32>,
    duplicate_policy: DuplicatePolicy,
    level_sizes: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    threshold: Threshold,
    witnesses: Vec<u32>,
    #[serde(default)]
    duplicate_policy: DuplicatePolicy,
}

impl TryFrom<RawParams> for TPoPParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        TPoPParams::with_threshold(raw.threshold, raw.witnesses)
            .map(|p| p.with_duplicate_policy(raw.duplicate_policy))
    }
}

impl From<TPoPParams> for RawParams {
    fn from(p: TPoPParams) -> Self {
        RawParams {
            threshold: p.threshold,
            witnesses: p.witnesses,
            duplicate_policy: p.duplicate_policy,
        }
    }
}

impl TPoPParams {
    pub fn new(threshold: f64, witnesses: Vec<u32>) -> Result<Self> {
        Self::with_threshold(Threshold::new(threshold)?, witnesses)
    }

    pub fn with_threshold(threshold: Threshold, witnesses: Vec<u32>) -> Result<Self> {
        if witnesses.is_empty() {
            return Err(Error::InvalidParams("depth must be at least 1".into()));
        }
        if let Some(l) = witnesses.iter().position(|&w| w == 0) {
            return Err(Error::InvalidParams(format!(
                "witness count for level {} must be at least 1",
                l + 1
            )));
        }
        let mut level_sizes = Vec::with_capacity(witnesses.len());
        let mut prev = 1u64;
        let mut total = 1u64;
        for &w in &witnesses {
            prev = prev
                .checked_mul(u64::from(w))
                .ok_or_else(|| Error::InvalidParams("tree size overflows".into()))?;
            total = total
                .checked_add(prev)
                .ok_or_else(|| Error::InvalidParams("tree size overflows".into()))?;
            level_sizes.push(prev);
        }
        if total > u64::from(u32::MAX) {
            return Err(Error::InvalidParams(format!(
                "tree of {total} nodes exceeds the agent id space"
            )));
        }
        Ok(TPoPParams {
            threshold,
            witnesses,
            duplicate_policy: DuplicatePolicy::default(),
            level_sizes,
        })
    }

    pub fn with_duplicate_policy(mut self, policy: DuplicatePolicy) -> Self {
        self.duplicate_policy = policy;
        self
    }

    /// One level of six witnesses, full threshold.
    pub fn flat() -> Self {
        Self::new(1.0, vec![6]).expect("valid preset")
    }

    /// Two levels of two witnesses each, full threshold.
    pub fn deep() -> Self {
        Self::new(1.0, vec![2, 2]).expect("valid preset")
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn depth(&self) -> usize {
        self.witnesses.len()
    }

    /// `w_l` for `l` in `1..=depth`.
    pub fn witnesses_at(&self, level: usize) -> u32 {
        self.witnesses[level - 1]
    }

    pub fn witnesses(&self) -> &[u32] {
        &self.witnesses
    }

    pub fn duplicate_policy(&self) -> DuplicatePolicy {
        self.duplicate_policy
    }

    /// Nominal witness count `n_l` for `l` in `1..=depth`.
    pub fn nominal_size(&self, level: usize) -> u64 {
        self.level_sizes[level - 1]
    }

    /// Total node count of a full tree, root included.
    pub fn tree_size(&self) -> u64 {
        1 + self.level_sizes.iter().sum::<u64>()
    }
}

/// `[n_1, .., n_d]` with `n_0 = 1` and `n_l = w_l * n_{l-1}`.
pub fn level_sizes(params: &TPoPParams) -> Vec<u64> {
    params.level_sizes.clone()
}
