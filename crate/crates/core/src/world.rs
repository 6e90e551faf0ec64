//! Agent-based simulator: mobile agents in a bounded rectangle, committed
//! positions, state-dependent neighbour sets, and per-epoch protocol runs.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentId, AgentState, Position, Velocity};
use crate::error::{Error, Result};
use crate::grid::{cell_rng, map_cells, GridSpec};
use crate::metrics::{Confusion, MapKind, MapSource, PerformanceMap};
use crate::model::StatePriors;
use crate::params::TPoPParams;
use crate::tree::{build_tree, ConfirmationOracle};
use crate::verify::verify;

/// Allowed relative deviation of the configured density from its target.
pub const DENSITY_TOLERANCE: f64 = 0.05;

/// How an honest, non-coerced observer decides whom it sees.
///
/// Every other state is the same under both rules: the observer looks around
/// its true position if honest and its committed position otherwise, and a
/// coerced observer takes committed positions at face value while a
/// non-coerced one only sees true positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SightRule {
    /// The other agent must be in range by both its true and its committed
    /// position.
    #[default]
    Conjunctive,
    /// Only the other agent's true position is checked.
    CoercionAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub width: f64,
    pub height: f64,
    pub n_agents: usize,
    pub range_of_sight: f64,
    pub target_avg_neighbors: f64,
    /// World units per step.
    pub speed: f64,
    pub priors: StatePriors,
    pub seed: u64,
    #[serde(default)]
    pub sight_rule: SightRule,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig::calibrated(1000, 1.0, 50.0, 0.1, StatePriors { p_h: 1.0, p_c: 0.0 }, 0)
    }
}

impl WorldConfig {
    /// Square world sized so that `n * pi * r^2 / area` equals the target.
    pub fn calibrated(
        n_agents: usize,
        range_of_sight: f64,
        target_avg_neighbors: f64,
        speed: f64,
        priors: StatePriors,
        seed: u64,
    ) -> Self {
        let side =
            (n_agents as f64 * PI * range_of_sight * range_of_sight / target_avg_neighbors).sqrt();
        WorldConfig {
            width: side,
            height: side,
            n_agents,
            range_of_sight,
            target_avg_neighbors,
            speed,
            priors,
            seed,
            sight_rule: SightRule::default(),
        }
    }

    /// Expected agents inside one range-of-sight disc, ignoring edges.
    pub fn density(&self) -> f64 {
        self.n_agents as f64 * PI * self.range_of_sight * self.range_of_sight
            / (self.width * self.height)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.width.is_finite()
            && self.height.is_finite()
            && self.width > 0.0
            && self.height > 0.0)
        {
            return bad(format!(
                "world size {} x {} must be positive",
                self.width, self.height
            ));
        }
        if !(self.range_of_sight.is_finite() && self.range_of_sight > 0.0) {
            return bad(format!(
                "range of sight {} must be positive",
                self.range_of_sight
            ));
        }
        if self.width.min(self.height) <= 2.0 * self.range_of_sight {
            return bad("world must be wider than twice the range of sight".into());
        }
        if self.n_agents == 0 || self.n_agents > u32::MAX as usize {
            return bad(format!("agent count {} out of range", self.n_agents));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return bad(format!("speed {} must be non-negative", self.speed));
        }
        StatePriors::new(self.priors.p_h, self.priors.p_c)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if !(self.target_avg_neighbors > 0.0) {
            return bad("target neighbour count must be positive".into());
        }
        let deviation =
            (self.density() - self.target_avg_neighbors).abs() / self.target_avg_neighbors;
        if deviation > DENSITY_TOLERANCE {
            return bad(format!(
                "density {:.2} neighbours per disc is more than {}% off the target {}",
                self.density(),
                DENSITY_TOLERANCE * 100.0,
                self.target_avg_neighbors
            ));
        }
        Ok(())
    }
}

/// Uniform bucket grid over one set of points, stored compactly.
#[derive(Debug, Clone)]
struct SpatialIndex {
    cell: f64,
    cols: usize,
    rows: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl SpatialIndex {
    fn build(
        points: impl Iterator<Item = Position> + Clone,
        width: f64,
        height: f64,
        cell: f64,
    ) -> Self {
        let cols = ((width / cell).ceil() as usize).max(1);
        let rows = ((height / cell).ceil() as usize).max(1);
        let bucket = |p: Position| {
            let c = ((p.x / cell) as usize).min(cols - 1);
            let r = ((p.y / cell) as usize).min(rows - 1);
            r * cols + c
        };
        let mut starts = vec![0u32; cols * rows + 1];
        for p in points.clone() {
            starts[bucket(p) + 1] += 1;
        }
        for i in 1..starts.len() {
            starts[i] += starts[i - 1];
        }
        let mut fill = starts.clone();
        let mut items = vec![0u32; starts[cols * rows] as usize];
        for (i, p) in points.enumerate() {
            let b = bucket(p);
            items[fill[b] as usize] = i as u32;
            fill[b] += 1;
        }
        SpatialIndex {
            cell,
            cols,
            rows,
            starts,
            items,
        }
    }

    /// Indices of every point whose bucket overlaps the square around `p`.
    fn around(&self, p: Position, radius: f64, mut visit: impl FnMut(u32)) {
        let span = |v: f64, n: usize| {
            let lo = ((v - radius) / self.cell).floor().max(0.0) as usize;
            let hi = (((v + radius) / self.cell).floor().max(0.0) as usize).min(n - 1);
            (lo.min(n - 1), hi)
        };
        let (c0, c1) = span(p.x, self.cols);
        let (r0, r1) = span(p.y, self.rows);
        for r in r0..=r1 {
            let row = r * self.cols;
            let (a, b) = (
                self.starts[row + c0] as usize,
                self.starts[row + c1 + 1] as usize,
            );
            self.items[a..b].iter().for_each(|&i| visit(i));
        }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    agents: Vec<AgentState>,
    epoch: u64,
    rng: ChaCha8Rng,
    by_true: SpatialIndex,
    by_claim: SpatialIndex,
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, width: f64, height: f64) -> Position {
    Position::new(rng.random::<f64>() * width, rng.random::<f64>() * height)
}

/// Uniform point in the world farther than `range` from `from`.
fn fake_position<R: Rng + ?Sized>(
    rng: &mut R,
    config: &WorldConfig,
    from: Position,
    range: f64,
) -> Position {
    loop {
        let p = uniform_point(rng, config.width, config.height);
        if p.distance(&from) > range {
            return p;
        }
    }
}

/// Reflects a coordinate back into `[0, limit]`, flipping the velocity
/// component once per bounce.
fn reflect(mut x: f64, mut v: f64, limit: f64) -> (f64, f64) {
    while !(0.0..=limit).contains(&x) {
        if x < 0.0 {
            x = -x;
        } else {
            x = 2.0 * limit - x;
        }
        v = -v;
    }
    (x, v)
}

impl World {
    /// Places agents uniformly, draws their states from the priors, and has
    /// dishonest agents commit fake positions.
    pub fn spawn(config: WorldConfig) -> Result<World> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut agents = Vec::with_capacity(config.n_agents);
        for i in 0..config.n_agents {
            let true_pos = uniform_point(&mut rng, config.width, config.height);
            let honest = rng.random_bool(config.priors.p_h);
            let coerced = rng.random_bool(config.priors.p_c);
            let heading = rng.random::<f64>() * 2.0 * PI;
            agents.push(AgentState {
                id: AgentId(i as u32),
                true_pos,
                claimed_pos: true_pos,
                range_of_sight: config.range_of_sight,
                honest,
                coerced,
                velocity: Velocity::from_heading(heading, config.speed),
            });
        }
        let mut world = World {
            by_true: SpatialIndex::build(std::iter::empty(), 1.0, 1.0, 1.0),
            by_claim: SpatialIndex::build(std::iter::empty(), 1.0, 1.0, 1.0),
            config,
            agents,
            epoch: 0,
            rng,
        };
        world.commit();
        Ok(world)
    }

    /// Commit step: dishonest agents draw fresh fake positions, then the
    /// spatial indexes are rebuilt.
    fn commit(&mut self) {
        for a in self.agents.iter_mut() {
            a.claimed_pos = if a.honest {
                a.true_pos
            } else {
                fake_position(&mut self.rng, &self.config, a.true_pos, a.range_of_sight)
            };
        }
        let cell = self
            .agents
            .iter()
            .map(|a| a.range_of_sight)
            .fold(self.config.range_of_sight, f64::max);
        let (w, h) = (self.config.width, self.config.height);
        self.by_true = SpatialIndex::build(self.agents.iter().map(|a| a.true_pos), w, h, cell);
        self.by_claim = SpatialIndex::build(self.agents.iter().map(|a| a.claimed_pos), w, h, cell);
    }

    /// Moves every agent one step, bouncing off the walls, then recommits.
    pub fn step(&mut self) {
        let (w, h) = (self.config.width, self.config.height);
        for a in self.agents.iter_mut() {
            let (x, dx) = reflect(a.true_pos.x + a.velocity.dx, a.velocity.dx, w);
            let (y, dy) = reflect(a.true_pos.y + a.velocity.dy, a.velocity.dy, h);
            a.true_pos = Position::new(x, y);
            a.velocity = Velocity { dx, dy };
        }
        self.epoch += 1;
        self.commit();
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentState> {
        self.agents.get(id.0 as usize)
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Whether `observer` counts `other` among its neighbours.
    pub fn sees(&self, observer: &AgentState, other: &AgentState) -> bool {
        if observer.id == other.id {
            return false;
        }
        let vantage = observer.vantage();
        let r2 = observer.range_of_sight * observer.range_of_sight;
        let in_range = |p: &Position| p.distance_sq(&vantage) < r2;
        match (observer.honest, observer.coerced, self.config.sight_rule) {
            (_, true, _) => in_range(&other.claimed_pos),
            (true, false, SightRule::Conjunctive) => {
                in_range(&other.true_pos) && in_range(&other.claimed_pos)
            }
            _ => in_range(&other.true_pos),
        }
    }

    /// Neighbour set of agent `id`, in ascending id order.
    pub fn neighbor_set(&self, id: AgentId) -> Result<Vec<AgentId>> {
        let observer = self.agent(id).ok_or(Error::UnknownAgent(id))?;
        let index = if observer.coerced {
            &self.by_claim
        } else {
            &self.by_true
        };
        let mut out = Vec::with_capacity(64);
        index.around(observer.vantage(), observer.range_of_sight, |j| {
            if self.sees(observer, &self.agents[j as usize]) {
                out.push(AgentId(j));
            }
        });
        out.sort_unstable();
        Ok(out)
    }

    /// Every agent proves its position once against the current commitments.
    pub fn run_epoch(&mut self, params: &TPoPParams) -> EpochResult {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng.next_u64());
        let mut oracle = WorldOracle {
            world: self,
            rng: &mut rng,
        };
        let mut result = EpochResult::default();
        for prover in 0..self.agents.len() {
            let prover = AgentId(prover as u32);
            let tree = build_tree(prover, params, &mut oracle).expect("prover exists");
            let outcome = verify(&tree, params, &oracle).expect("tree built from params");
            result
                .confusion
                .record(self.agents[prover.0 as usize].honest, outcome.verdict);
            result.under_filled += u64::from(tree.under_filled());
        }
        result
    }
}

/// Candidates are a fresh shuffle of the neighbour set for every naming;
/// a witness confirms a parent that lies in its own neighbour set.
pub struct WorldOracle<'a, R> {
    pub world: &'a World,
    pub rng: &'a mut R,
}

impl<R: RngCore> ConfirmationOracle for WorldOracle<'_, R> {
    fn candidate_witnesses(&mut self, parent: AgentId, _quota: usize) -> Option<Vec<AgentId>> {
        let mut candidates = self.world.neighbor_set(parent).ok()?;
        candidates.shuffle(self.rng);
        Some(candidates)
    }

    fn confirms(&self, witness: AgentId, parent: AgentId) -> bool {
        match (self.world.agent(witness), self.world.agent(parent)) {
            (Some(w), Some(p)) => self.world.sees(w, p),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochResult {
    pub confusion: Confusion,
    /// Provers whose tree could not be filled.
    pub under_filled: u64,
}

impl EpochResult {
    pub fn reliability(&self) -> Option<f64> {
        self.confusion.reliability()
    }

    pub fn security(&self) -> Option<f64> {
        self.confusion.security()
    }
}

/// `runs` freshly spawned worlds at `priors`, one epoch each.
pub fn simulate_cell<R: RngCore>(
    template: &WorldConfig,
    params: &TPoPParams,
    priors: StatePriors,
    runs: usize,
    rng: &mut R,
) -> Result<Vec<EpochResult>> {
    (0..runs)
        .map(|_| {
            let config = WorldConfig {
                priors,
                seed: rng.next_u64(),
                ..template.clone()
            };
            Ok(World::spawn(config)?.run_epoch(params))
        })
        .collect()
}

/// Result of a world sweep: both maps plus the per-run counts behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSweep {
    pub reliability: PerformanceMap,
    pub security: PerformanceMap,
    /// Per cell (grid order), per run.
    pub runs: Vec<Vec<EpochResult>>,
}

pub fn sweep_world(
    template: &WorldConfig,
    params: &TPoPParams,
    grid: GridSpec,
    runs_per_cell: usize,
    seed: u64,
) -> Result<WorldSweep> {
    if runs_per_cell == 0 {
        return Err(Error::InvalidParams(
            "need at least one run per cell".into(),
        ));
    }
    template.validate()?;
    let runs = map_cells(grid.cell_count(), |index| {
        let (p_h, p_c) = grid.point(index);
        simulate_cell(
            template,
            params,
            StatePriors { p_h, p_c },
            runs_per_cell,
            &mut cell_rng(seed, index),
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let totals: Vec<Confusion> = runs
        .iter()
        .map(|cell| cell.iter().map(|r| r.confusion).sum())
        .collect();
    Ok(WorldSweep {
        reliability: PerformanceMap::from_confusions(
            grid,
            MapKind::Reliability,
            MapSource::Simulation,
            &totals,
        )?,
        security: PerformanceMap::from_confusions(
            grid,
            MapKind::Security,
            MapSource::Simulation,
            &totals,
        )?,
        runs,
    })
}
