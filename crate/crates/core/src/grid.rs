//! The `(p_h, p_c)` parameter grid and deterministic per-cell fan-out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A square grid over `[0, 1]^2` with `divisions + 1` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    divisions: usize,
}

impl GridSpec {
    pub fn new(divisions: usize) -> Result<Self> {
        if divisions == 0 {
            return Err(Error::InvalidParams(
                "grid needs at least one division".into(),
            ));
        }
        Ok(GridSpec { divisions })
    }

    /// Grid with spacing `step`, which must divide 1 evenly.
    pub fn from_step(step: f64) -> Result<Self> {
        if !step.is_finite() || step <= 0.0 || step > 1.0 {
            return Err(Error::InvalidParams(format!(
                "grid step must lie in (0, 1], got {step}"
            )));
        }
        let divisions = (1.0 / step).round();
        if (divisions * step - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "grid step {step} does not divide 1 evenly"
            )));
        }
        Self::new(divisions as usize)
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn step(&self) -> f64 {
        1.0 / self.divisions as f64
    }

    /// Points per axis.
    pub fn side(&self) -> usize {
        self.divisions + 1
    }

    pub fn cell_count(&self) -> usize {
        self.side() * self.side()
    }

    /// Coordinate of grid line `i`.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.divisions as f64
    }

    /// Row-major index, `p_h` outer and `p_c` inner.
    pub fn index(&self, i_h: usize, i_c: usize) -> usize {
        i_h * self.side() + i_c
    }

    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index / self.side(), index % self.side())
    }

    /// `(p_h, p_c)` of a cell.
    pub fn point(&self, index: usize) -> (f64, f64) {
        let (i_h, i_c) = self.cell(index);
        (self.coord(i_h), self.coord(i_c))
    }

    /// Index of the grid line nearest `p`, if `p` lies on the grid.
    pub fn locate(&self, p: f64) -> Option<usize> {
        let i = (p * self.divisions as f64).round();
        if i < 0.0 || i > self.divisions as f64 || (self.coord(i as usize) - p).abs() > 1e-9 {
            None
        } else {
            Some(i as usize)
        }
    }
}

/// RNG for one grid cell: a ChaCha stream selected by the cell index, so the
/// result never depends on which worker ran the cell.
pub fn cell_rng(master_seed: u64, cell_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(cell_index as u64);
    rng
}

/// Evaluates `f` on every index in `0..n`, in parallel when enabled, and
/// returns results in index order.
pub fn map_cells<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn grid_sizes() {
        assert_eq!(GridSpec::from_step(0.02).unwrap().side(), 51);
        assert_eq!(GridSpec::from_step(0.02).unwrap().cell_count(), 2601);
        assert_eq!(GridSpec::from_step(0.5).unwrap().cell_count(), 9);
        assert_eq!(GridSpec::from_step(0.1).unwrap().side(), 11);
        assert!(GridSpec::from_step(0.3).is_err());
        assert!(GridSpec::from_step(0.0).is_err());
        assert!(GridSpec::from_step(-0.5).is_err());
    }

    #[test]
    fn coordinates_are_exact_at_the_ends() {
        let g = GridSpec::from_step(0.02).unwrap();
        assert_eq!(g.coord(0), 0.0);
        assert_eq!(g.coord(50), 1.0);
        assert_eq!(g.point(g.index(25, 5)), (0.5, 0.1));
        assert_eq!(g.locate(0.1), Some(5));
        assert_eq!(g.locate(0.105), None);
    }

    #[test]
    fn cell_streams_differ() {
        let a = cell_rng(7, 0).next_u64();
        let b = cell_rng(7, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, cell_rng(7, 0).next_u64());
    }
}
