//! Reproducible Brownian increments on uniform grids.
//!
//! Draws are counter based: the ChaCha20 key is derived from the stream id, the ChaCha
//! stream (nonce) is the path index and the word position is the step index, so the
//! increment `(stream, path, step)` never depends on which other paths were generated
//! or in what order.
//!
//! Increments are stored as integer multiples of [`TICK`] (`2^-48`). Summing ticks is
//! exact, which makes coarsening exactly associative: coarsening by 2 twice gives
//! bit-for-bit the same path as coarsening by 4, and the total of any path is
//! invariant under coarsening.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::normal::{inverse_cdf, open_unit};

/// log2 of the reciprocal increment quantum.
pub const TICK_BITS: i32 = 48;
/// Quantum of stored increments.
pub const TICK: f64 = 1.0 / (1u64 << TICK_BITS) as f64;

/// Uniform grid `t_k = k dt`, `k = 0..=n_steps`, with `n_steps = ceil(T / dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    horizon: f64,
    dt: f64,
    n_steps: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Grid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Grid(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        let raw = libm::ceil(horizon / dt);
        if !(raw < 1e12) {
            return Err(Error::Grid(format!("{raw} steps is too many")));
        }
        let mut n = (raw as usize).max(1);
        while (n as f64) * dt < horizon {
            n += 1;
        }
        while n > 1 && ((n - 1) as f64) * dt >= horizon {
            n -= 1;
        }
        Ok(GridSpec {
            horizon,
            dt,
            n_steps: n,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Same horizon, `factor` times the step.
    pub fn coarsen(&self, factor: usize) -> Result<GridSpec> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::NonDivisible {
                len: self.n_steps,
                factor,
            });
        }
        Ok(GridSpec {
            horizon: self.horizon,
            dt: self.dt * factor as f64,
            n_steps: self.n_steps / factor,
        })
    }
}

/// `coarse / fine` when it is an exact power of two (including 1).
pub fn dyadic_ratio(coarse: f64, fine: f64) -> Result<usize> {
    let ratio = coarse / fine;
    let n = libm::round(ratio);
    let ok = (1.0..9.0e15).contains(&n) && (n as u64).is_power_of_two() && n * fine == coarse;
    if ok {
        Ok(n as usize)
    } else {
        Err(Error::NonDyadic { coarse, fine })
    }
}

/// Identifies a Brownian path: the experiment's stream and the path index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SeedId {
    pub stream: u64,
    pub path: u64,
}

impl SeedId {
    pub const fn new(stream: u64, path: u64) -> Self {
        SeedId { stream, path }
    }
}

const KEY_DOMAIN: &[u8; 24] = b"lamperti brownian v1\0\0\0\0";

fn generator(seed: SeedId) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.stream.to_le_bytes());
    key[8..].copy_from_slice(KEY_DOMAIN);
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(seed.path);
    rng
}

/// The standard normal draw number `step` of path `seed`.
pub fn standard_normal_at(seed: SeedId, step: u64) -> f64 {
    let mut rng = generator(seed);
    // one u64 = two 32-bit words per draw
    rng.set_word_pos(2 * step as u128);
    inverse_cdf(open_unit(rng.next_u64()))
}

/// Sequential standard normal draws of one path.
pub struct NormalStream {
    rng: ChaCha20Rng,
}

impl NormalStream {
    pub fn new(seed: SeedId) -> Self {
        NormalStream {
            rng: generator(seed),
        }
    }
}

impl Iterator for NormalStream {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        Some(inverse_cdf(open_unit(self.rng.next_u64())))
    }
}

/// Increments `dw_{k+1} = w(t_{k+1}) - w(t_k)` on a grid, stored in ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: GridSpec,
    seed: SeedId,
    ticks: Vec<i64>,
}

impl BrownianPath {
    /// Wraps increments given in ticks.
    pub fn from_ticks(grid: GridSpec, seed: SeedId, ticks: Vec<i64>) -> Result<Self> {
        if ticks.len() != grid.n_steps() {
            return Err(Error::Grid(format!(
                "{} increments for a grid of {} steps",
                ticks.len(),
                grid.n_steps()
            )));
        }
        Ok(BrownianPath { grid, seed, ticks })
    }

    /// Rounds real increments to the nearest tick.
    pub fn from_increments(grid: GridSpec, seed: SeedId, increments: &[f64]) -> Result<Self> {
        let ticks = increments
            .iter()
            .map(|&dw| to_ticks(dw))
            .collect::<Result<Vec<_>>>()?;
        Self::from_ticks(grid, seed, ticks)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn seed(&self) -> SeedId {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    #[inline]
    pub fn increment(&self, k: usize) -> f64 {
        self.ticks[k] as f64 * TICK
    }

    pub fn increments(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.ticks.iter().map(|&t| t as f64 * TICK)
    }

    /// `w(t_n) - w(0)`, exact in ticks.
    pub fn total(&self) -> f64 {
        let total: i128 = self.ticks.iter().map(|&t| t as i128).sum();
        total as f64 * TICK
    }

    /// The same path with every increment negated (`-w`).
    pub fn reflected(&self) -> BrownianPath {
        BrownianPath {
            grid: self.grid,
            seed: self.seed,
            ticks: self.ticks.iter().map(|&t| -t).collect(),
        }
    }
}

fn to_ticks(dw: f64) -> Result<i64> {
    let t = libm::round(dw / TICK);
    if t.is_finite() && libm::fabs(t) < 9.0e18 {
        Ok(t as i64)
    } else {
        Err(Error::Grid(format!("increment {dw} cannot be represented")))
    }
}

/// Deterministic path for `(grid, seed)`: `dw_k = sqrt(dt) * z_k` with `z_k` the k-th
/// normal of the seed's counter stream, rounded to the tick grid.
pub fn sample_path(grid: &GridSpec, seed: SeedId) -> BrownianPath {
    let scale = sqrt(grid.dt());
    let ticks = NormalStream::new(seed)
        .take(grid.n_steps())
        // |z| < 9 for 53-bit uniforms, far inside the i64 range
        .map(|z| libm::round(scale * z / TICK) as i64)
        .collect();
    BrownianPath {
        grid: *grid,
        seed,
        ticks,
    }
}

/// Sums consecutive blocks of `factor` increments: coarse increment `j` is the exact sum of
/// fine increments `j*factor .. (j+1)*factor`, on a grid with step `factor * dt`.
pub fn coarsen(path: &BrownianPath, factor: usize) -> Result<BrownianPath> {
    if factor < 1 || !path.len().is_multiple_of(factor) {
        return Err(Error::NonDivisible {
            len: path.len(),
            factor,
        });
    }
    let grid = path.grid.coarsen(factor)?;
    let ticks = path
        .ticks
        .chunks_exact(factor)
        .map(|c| c.iter().sum())
        .collect();
    Ok(BrownianPath {
        grid,
        seed: path.seed,
        ticks,
    })
}
