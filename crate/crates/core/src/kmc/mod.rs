//! Gillespie direct-method simulation of both mechanisms on `N` sites.
//!
//! The surface is treated as well mixed: a microscopic state is the number of
//! sites held by each adsorbate. Propensities are scaled so that the expected
//! coverages follow the mean-field equations exactly as `N → ∞`:
//!
//! | mechanism | channel | propensity | effect |
//! |-----------|---------|------------|--------|
//! | NO | adsorption | `α(N−n)` | `n += 1` |
//! | NO | desorption | `γn` | `n -= 1` |
//! | NO | reaction | `k·n·((N−n)/N)²` | `n -= 1` |
//! | CO | A adsorption | `α(N−n_A−n_B)` | `n_A += 1` |
//! | CO | A desorption | `γn_A` | `n_A -= 1` |
//! | CO | B₂ adsorption | `βN((N−n_A−n_B)/N)²` | `n_B += 2` |
//! | CO | reaction | `4k_r·n_A·n_B/N` | `n_A -= 1, n_B -= 1` |
//!
//! A B₂ adsorption drawn while fewer than two sites are vacant is rejected:
//! the clock advances and the state is unchanged.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{CoarseState, Model};
use crate::table::{Cell, CsvTable};

/// Adsorbate counts on an `n_sites` surface plus the simulation clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroState {
    n_sites: u64,
    counts: [u64; 2],
    species: usize,
    pub t: f64,
}

impl MicroState {
    pub fn new(n_sites: u64, counts: &[u64], t: f64) -> Result<Self> {
        let species = counts.len();
        if !(1..=2).contains(&species) {
            return Err(Error::InvalidArgument(format!("expected 1 or 2 species, got {species}")));
        }
        if n_sites == 0 {
            return Err(Error::InvalidArgument("lattice must have at least one site".into()));
        }
        let mut c = [0; 2];
        c[..species].copy_from_slice(counts);
        let total: u64 = counts.iter().sum();
        if total > n_sites {
            return Err(Error::Domain(format!("{total} adsorbates on {n_sites} sites")));
        }
        Ok(Self {
            n_sites,
            counts: c,
            species,
            t,
        })
    }

    pub fn n_sites(&self) -> u64 {
        self.n_sites
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts[..self.species]
    }

    pub fn vacant(&self) -> u64 {
        self.n_sites - self.counts().iter().sum::<u64>()
    }
}

/// Stream identity of one replica: reproducible for a given pair on any
/// platform and independent of which thread runs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub master_seed: u64,
    pub replica_index: u64,
}

impl RngSeed {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        Self {
            master_seed,
            replica_index,
        }
    }

    /// ChaCha8 keyed by the master seed, on stream `replica_index`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replica_index);
        rng
    }
}

const MAX_CHANNELS: usize = 4;

#[inline]
fn rates(state: &MicroState, model: &Model) -> ([f64; MAX_CHANNELS], usize) {
    let n = state.n_sites as f64;
    match model {
        Model::No(p) => {
            let occupied = state.counts[0] as f64;
            let vacant = n - occupied;
            let vac_frac = vacant / n;
            (
                [
                    p.alpha * vacant,
                    p.gamma * occupied,
                    p.k * occupied * vac_frac * vac_frac,
                    0.0,
                ],
                3,
            )
        }
        Model::Co(p) => {
            let a = state.counts[0] as f64;
            let b = state.counts[1] as f64;
            let vacant = n - a - b;
            let vac_frac = vacant / n;
            (
                [
                    p.alpha * vacant,
                    p.gamma * a,
                    p.beta * n * vac_frac * vac_frac,
                    4.0 * p.k_r * a * b / n,
                ],
                4,
            )
        }
    }
}

/// Channel propensities at `state` (3 channels for NO, 4 for CO).
pub fn propensities(state: &MicroState, model: &Model) -> Result<Vec<f64>> {
    check_species(state, model)?;
    let (r, len) = rates(state, model);
    Ok(r[..len].to_vec())
}

fn check_species(state: &MicroState, model: &Model) -> Result<()> {
    if state.species == model.dim() {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension {
            expected: model.dim(),
            found: state.species,
        })
    }
}

/// Applies channel `channel`; returns false for a rejected B₂ adsorption.
#[inline]
fn fire(state: &mut MicroState, model: &Model, channel: usize) -> bool {
    match (model, channel) {
        (Model::No(_), 0) | (Model::Co(_), 0) => state.counts[0] += 1,
        (Model::No(_), _) => state.counts[0] -= 1,
        (Model::Co(_), 1) => state.counts[0] -= 1,
        (Model::Co(_), 2) => {
            if state.vacant() < 2 {
                return false;
            }
            state.counts[1] += 2;
        }
        (Model::Co(_), _) => {
            state.counts[0] -= 1;
            state.counts[1] -= 1;
        }
    }
    true
}

/// Event observer; receives the event time, channel id and the post-event state.
pub trait EventSink {
    fn record(&mut self, t: f64, channel: usize, state: &MicroState);
}

/// Discards every event.
pub struct NoTrace;

impl EventSink for NoTrace {
    #[inline]
    fn record(&mut self, _: f64, _: usize, _: &MicroState) {}
}

/// Collects every event as a CSV row `t, channel, counts...`.
pub struct EventTrace {
    table: CsvTable,
}

impl EventTrace {
    pub fn new(model: &Model) -> Self {
        let header: Vec<&str> = match model.dim() {
            1 => vec!["t", "channel", "n"],
            _ => vec!["t", "channel", "n_a", "n_b"],
        };
        Self {
            table: CsvTable::new(header),
        }
    }

    pub fn into_table(self) -> CsvTable {
        self.table
    }
}

impl EventSink for EventTrace {
    fn record(&mut self, t: f64, channel: usize, state: &MicroState) {
        let mut row = vec![Cell::from(t), Cell::from(channel)];
        row.extend(state.counts().iter().map(|&c| Cell::from(c)));
        self.table.push_row(row);
    }
}

/// Advances `state` in place up to exactly `t_end`, drawing from `rng`.
///
/// Exact-time direct method: the last waiting time that would overshoot
/// `t_end` is discarded and the clock is set to `t_end`.
pub fn ssa_advance<R: Rng, S: EventSink>(
    state: &mut MicroState,
    model: &Model,
    t_end: f64,
    rng: &mut R,
    sink: &mut S,
) -> Result<u64> {
    check_species(state, model)?;
    if !(t_end >= state.t) {
        return Err(Error::InvalidArgument(format!(
            "end time {t_end} precedes the current clock {}",
            state.t
        )));
    }
    let mut events = 0;
    loop {
        let (a, len) = rates(state, model);
        let total: f64 = a[..len].iter().sum();
        if total <= 0.0 {
            state.t = t_end;
            return Ok(events);
        }
        // 1 − U lies in (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        let wait = -u.ln() / total;
        if state.t + wait > t_end {
            state.t = t_end;
            return Ok(events);
        }
        state.t += wait;
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut channel = len;
        for (i, &ai) in a[..len].iter().enumerate() {
            acc += ai;
            if target < acc {
                channel = i;
                break;
            }
        }
        if channel == len {
            // rounding put the draw past the last partial sum
            channel = (0..len).rev().find(|&i| a[i] > 0.0).expect("positive total");
        }
        if fire(state, model, channel) {
            events += 1;
            sink.record(state.t, channel, state);
        }
    }
}

/// Runs one replica from `state` to `t_end` on the stream given by `seed`.
pub fn ssa_run(state: &MicroState, model: &Model, t_end: f64, seed: RngSeed) -> Result<MicroState> {
    let mut s = *state;
    let mut rng = seed.rng();
    ssa_advance(&mut s, model, t_end, &mut rng, &mut NoTrace)?;
    Ok(s)
}

/// Microscopic state with `round(θ_i·N)` adsorbates of each species; if the
/// rounded CO counts overfill the lattice the larger count is decremented.
pub fn lift(x: &CoarseState, n_sites: u64) -> Result<MicroState> {
    x.validate(crate::meanfield::DOMAIN_TOL)?;
    let n = n_sites as f64;
    let mut counts: Vec<u64> = x
        .as_slice()
        .iter()
        .map(|&theta| (theta.clamp(0.0, 1.0) * n).round() as u64)
        .collect();
    while counts.iter().sum::<u64>() > n_sites {
        let i = if counts.len() == 2 && counts[1] > counts[0] { 1 } else { 0 };
        counts[i] -= 1;
    }
    MicroState::new(n_sites, &counts, 0.0)
}

/// Coverages `counts / N`.
pub fn restrict(state: &MicroState) -> CoarseState {
    let n = state.n_sites as f64;
    let values: Vec<f64> = state.counts().iter().map(|&c| c as f64 / n).collect();
    CoarseState::from_slice(&values).expect("one or two species")
}
