//! The stochastic covering process: Model A, Model B and the modified
//! Model A, with seeded keyed randomness and full component history.

mod fenwick;
pub mod io;
pub mod placement;
pub mod population;

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::{Direction, Point, Rect};
use crate::rng::{Purpose, Stream};
use crate::wells::{make_boundary_data, BoundaryData, Matrix2, WellSet};
use fenwick::Fenwick;
pub use placement::{DegenerateRule, Inclusion, Placement, PlacementKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    A,
    B,
    Amod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    MaxSteps(u64),
    MinLength(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub delta: f64,
    /// Probability of direction `e1`.
    pub p: f64,
    pub gamma: f64,
    /// Boundary matrix before normalization, row-major.
    pub m: [f64; 4],
    pub seed: u64,
    pub stop: StopRule,
    pub degenerate_rule: DegenerateRule,
    pub block_depth: u32,
    pub bucket_lambda: f64,
    pub argmin_literal: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            algorithm: Algorithm::A,
            delta: 0.4,
            p: 0.5,
            gamma: 0.5,
            m: [0.939, 0.0, 0.0, 1.064],
            seed: 0,
            stop: StopRule::MaxSteps(10),
            degenerate_rule: DegenerateRule::Original,
            block_depth: 3,
            bucket_lambda: 1.1,
            argmin_literal: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0,1), got {}", self.p)));
        }
        if self.algorithm == Algorithm::Amod && self.p != 0.5 {
            return Err(Error::InvalidParameter("the modified Model A requires p = 1/2".into()));
        }
        if let StopRule::MinLength(l) = self.stop {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("min_length must be positive, got {l}")));
            }
        }
        if !(self.bucket_lambda > 1.0) {
            return Err(Error::InvalidParameter("bucket_lambda must exceed 1".into()));
        }
        self.boundary_data().map(|_| ())
    }

    pub fn wells(&self) -> Result<WellSet> {
        WellSet::new(self.gamma)
    }

    pub fn boundary_data(&self) -> Result<BoundaryData> {
        make_boundary_data(Matrix2::from(self.m), &self.wells()?)
    }

    fn place(&self, d: &Rect, p: Point, dir: Direction) -> Result<Placement> {
        match (self.algorithm, self.degenerate_rule) {
            (Algorithm::Amod, _) => placement::place_amod(d, p, dir, self.delta, self.argmin_literal),
            (_, DegenerateRule::Original) => placement::place_basic(d, p, dir, self.delta, self.argmin_literal),
            (_, DegenerateRule::Change1) => placement::place_change1(d, p, dir, self.delta, self.argmin_literal),
        }
    }

    /// Whether the component can still receive a block under a min-length stop.
    fn is_active(&self, r: &Rect) -> bool {
        match self.stop {
            StopRule::MaxSteps(_) => true,
            StopRule::MinLength(l) => {
                placement::max_block_length(r, self.delta, self.degenerate_rule, self.algorithm == Algorithm::Amod)
                    >= l
            }
        }
    }

    fn draw(&self, stream: &mut Stream, d: &Rect) -> (Point, Direction) {
        let p = loop {
            let q = Point::new(d.x0 + stream.open_uniform() * d.l1(), d.y0 + stream.open_uniform() * d.l2());
            if d.strictly_contains(q) {
                break q;
            }
        };
        let dir = if stream.uniform() < self.p { Direction::E1 } else { Direction::E2 };
        (p, dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub id: u64,
    pub rect: Rect,
    pub parent: Option<u64>,
    /// Step after which the component exists.
    pub born: u64,
    /// Step in which the component was split, if any.
    pub died: Option<u64>,
}

/// An inclusion together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedBlock {
    pub inclusion: Inclusion,
    pub step: u64,
    pub parent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub k: u64,
    pub component_id: u64,
    pub point: [f64; 2],
    pub direction: u8,
    pub placement: PlacementKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub k: u64,
    pub volume: f64,
    pub n_components: usize,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub k: u64,
    /// Ids of the current components in ascending order.
    pub alive: Vec<u64>,
    pub records: Vec<ComponentRecord>,
    pub placed: Vec<PlacedBlock>,
    pub volume: f64,
}

impl SimState {
    pub fn initial() -> Self {
        SimState {
            k: 0,
            alive: vec![0],
            records: vec![ComponentRecord { id: 0, rect: Rect::unit(), parent: None, born: 0, died: None }],
            placed: Vec::new(),
            volume: 1.0,
        }
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentRecord> + '_ {
        self.alive.iter().map(move |&id| &self.records[id as usize])
    }

    /// `|V_k|` recomputed from the component list.
    pub fn audited_volume(&self) -> f64 {
        self.components().map(|c| c.rect.area()).sum()
    }

    pub fn placed_area(&self) -> f64 {
        self.placed.iter().map(|b| b.inclusion.rect.area()).sum()
    }

    fn push_child(&mut self, rect: Rect, parent: u64, born: u64) -> u64 {
        let id = self.records.len() as u64;
        self.records.push(ComponentRecord { id, rect, parent: Some(parent), born, died: None });
        id
    }

    fn alive_at(&self, id: u64, k: u64) -> bool {
        let r = &self.records[id as usize];
        r.born <= k && r.died.map_or(true, |d| d > k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Advanced,
    Converged,
}

/// Simulator holding the state and the Model B sampling tree.
pub struct Simulation {
    pub config: SimConfig,
    pub state: SimState,
    pub events: Vec<SimEvent>,
    pub series: Vec<SeriesRow>,
    tree: Fenwick,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let state = SimState::initial();
        let mut tree = Fenwick::default();
        tree.push(if config.is_active(&state.records[0].rect) { 1.0 } else { 0.0 });
        let series = vec![SeriesRow { k: 0, volume: 1.0, n_components: 1, n_events: 0 }];
        Ok(Simulation { config, state, events: Vec::new(), series, tree })
    }

    fn apply(&mut self, id: u64, p: Point, dir: Direction, k: u64) -> Result<Vec<u64>> {
        let rect = self.state.records[id as usize].rect;
        let pl = self.config.place(&rect, p, dir)?;
        self.state.records[id as usize].died = Some(k);
        self.tree.set(id as usize, 0.0);
        self.state.volume -= pl.inclusion.rect.area();
        self.state.placed.push(PlacedBlock { inclusion: pl.inclusion, step: k, parent: id });
        self.events.push(SimEvent { k, component_id: id, point: [p.x, p.y], direction: dir.index(), placement: pl.kind });
        let mut children = Vec::with_capacity(pl.remainder.len());
        for r in pl.remainder {
            let cid = self.state.push_child(r, id, k);
            let w = if self.config.is_active(&r) { r.area() } else { 0.0 };
            self.tree.push(w);
            children.push(cid);
        }
        Ok(children)
    }

    /// Performs one step of the configured algorithm.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let active_mass = self.tree.total();
        if self.state.alive.is_empty() || active_mass <= 0.0 {
            return Ok(StepOutcome::Converged);
        }
        let k = self.state.k + 1;
        let seed = self.config.seed;
        let n_before = self.events.len();
        match self.config.algorithm {
            Algorithm::A | Algorithm::Amod => {
                let current = std::mem::take(&mut self.state.alive);
                let mut next = Vec::with_capacity(current.len() * 2);
                let mut untouched = Vec::new();
                for id in current {
                    let rect = self.state.records[id as usize].rect;
                    if !self.config.is_active(&rect) {
                        untouched.push(id);
                        continue;
                    }
                    let mut stream = Stream::new(seed, Purpose::Placement, k, id);
                    let (p, dir) = self.config.draw(&mut stream, &rect);
                    next.extend(self.apply(id, p, dir, k)?);
                }
                untouched.extend(next);
                untouched.sort_unstable();
                self.state.alive = untouched;
            }
            Algorithm::B => {
                let mut sel = Stream::new(seed, Purpose::Selection, k, 0);
                let id = self.tree.find(sel.uniform() * active_mass) as u64;
                let rect = self.state.records[id as usize].rect;
                let mut stream = Stream::new(seed, Purpose::Placement, k, id);
                let (p, dir) = self.config.draw(&mut stream, &rect);
                let children = self.apply(id, p, dir, k)?;
                let pos = self.state.alive.binary_search(&id).expect("selected component is alive");
                self.state.alive.remove(pos);
                self.state.alive.extend(children);
            }
        }
        self.state.k = k;
        self.series.push(SeriesRow {
            k,
            volume: self.state.volume,
            n_components: self.state.alive.len(),
            n_events: self.events.len() - n_before,
        });
        Ok(StepOutcome::Advanced)
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        loop {
            if let StopRule::MaxSteps(n) = self.config.stop {
                if self.state.k >= n {
                    return Ok(());
                }
            }
            if self.step()? == StepOutcome::Converged {
                return Ok(());
            }
        }
    }

    pub fn finish(self) -> SimResult {
        SimResult { config: self.config, events: self.events, series: self.series, state: self.state }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub events: Vec<SimEvent>,
    pub series: Vec<SeriesRow>,
    pub state: SimState,
}

/// Per-step contraction of `E|V_k|` for Model A:
/// `max{p + (1-p)(1-δ), (1-p) + p(1-δ)}`.
pub fn contraction_a(p: f64, delta: f64) -> f64 {
    (p + (1.0 - p) * (1.0 - delta)).max((1.0 - p) + p * (1.0 - delta))
}

/// Contraction of `E|V_k|` over the steps `k+1..=2k+1` of Model B:
/// `c_A + (1 - c_A)(1 + e^{-1/2})/2`.
pub fn contraction_b(c_a: f64) -> f64 {
    c_a + (1.0 - c_a) * (1.0 + (-0.5f64).exp()) / 2.0
}

pub fn run(config: &SimConfig) -> Result<SimResult> {
    let mut sim = Simulation::new(config.clone())?;
    sim.run_to_end()?;
    Ok(sim.finish())
}

impl SimResult {
    pub fn volumes(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.volume).collect()
    }

    /// Components alive after step `k` that descend from `id`.
    pub fn descendants(&self, id: u64, k: u64) -> Result<BTreeSet<u64>> {
        let st = &self.state;
        let rec = st
            .records
            .get(id as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown component {id}")))?;
        if rec.born > k {
            return Err(Error::InvalidParameter(format!("component {id} did not exist at step {k}")));
        }
        let mut out = BTreeSet::new();
        for r in &st.records {
            if !st.alive_at(r.id, k) {
                continue;
            }
            let mut cur = Some(r.id);
            while let Some(c) = cur {
                if c == id {
                    out.insert(r.id);
                    break;
                }
                if c < id {
                    break;
                }
                cur = st.records[c as usize].parent;
            }
        }
        Ok(out)
    }

    /// Same set computed from geometric containment.
    pub fn descendants_geometric(&self, id: u64, k: u64) -> BTreeSet<u64> {
        let st = &self.state;
        let anc = st.records[id as usize].rect;
        st.records
            .iter()
            .filter(|r| st.alive_at(r.id, k) && r.id >= id && anc.contains_rect(&r.rect))
            .map(|r| r.id)
            .collect()
    }

    /// Rectangles of the components alive after step `k`.
    pub fn components_at(&self, k: u64) -> Vec<Rect> {
        self.state.records.iter().filter(|r| self.state.alive_at(r.id, k)).map(|r| r.rect).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_a_first_steps() {
        let cfg = SimConfig { seed: 3, stop: StopRule::MaxSteps(2), ..SimConfig::default() };
        let res = run(&cfg).unwrap();
        assert_eq!(res.series[1].n_events, 1);
        assert!(res.series[2].n_events <= 2);
    }

    #[test]
    fn model_b_one_event_per_step() {
        let cfg = SimConfig {
            algorithm: Algorithm::B,
            seed: 9,
            stop: StopRule::MaxSteps(50),
            degenerate_rule: DegenerateRule::Change1,
            ..SimConfig::default()
        };
        let res = run(&cfg).unwrap();
        assert_eq!(res.events.len(), 50);
        assert!(res.series.iter().skip(1).all(|r| r.n_events == 1));
    }

    #[test]
    fn min_length_zero_rejected() {
        let cfg = SimConfig { stop: StopRule::MinLength(0.0), ..SimConfig::default() };
        assert!(run(&cfg).is_err());
    }
}
