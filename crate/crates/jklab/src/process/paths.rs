//! Path simulation and Monte-Carlo estimators.
//!
//! Path `i` of an experiment with seed `s` always uses the stream
//! `rng::stream(s, i)`, and per-path results are collected in path order, so
//! estimates are identical for any number of worker threads.

use super::heat::{HeatKernelMatrix, KernelSource, DEFAULT_MATRIX_CAP};
use super::subordinator::SubordinatorSpec;
use super::Generator;
use crate::rng::{stream, StreamRng};
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use std::io::Write;

/// A simulated trajectory: `states[i]` is occupied from `times[i]` on.
/// `times[0] = 0` and `states[0]` is the start.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub seed: u64,
    pub stream: u64,
    pub t_end: f64,
    pub times: Vec<f64>,
    pub states: Vec<usize>,
}

impl PathSample {
    /// State at time `t ∈ [0, t_end]`.
    pub fn state_at(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s <= t);
        self.states[i.saturating_sub(1)]
    }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_err: (var / n).sqrt(),
            samples: values.len(),
        }
    }
}

/// Precomputed jump tables for simulating a generator.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    n: usize,
    escape: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PathSimulator {
    pub fn new(gen: &Generator) -> Result<Self> {
        let n = gen.len();
        if n > DEFAULT_MATRIX_CAP {
            return Err(Error::SizeCap {
                what: "path simulator".into(),
                requested: n,
                cap: DEFAULT_MATRIX_CAP,
            });
        }
        let mut cumulative = vec![0.0; n * n];
        let mut escape = vec![0.0; n];
        for x in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                if y != x {
                    acc += gen.rate(x, y);
                }
                cumulative[x * n + y] = acc;
            }
            escape[x] = acc;
        }
        Ok(Self { n, escape, cumulative })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Holding time at `x` and the next state; `None` for an absorbing state.
    pub fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> Option<(f64, usize)> {
        let rate = self.escape[x];
        if rate <= 0.0 {
            return None;
        }
        let u: f64 = rng.random();
        let hold = -(1.0 - u).ln() / rate;
        let row = &self.cumulative[x * self.n..(x + 1) * self.n];
        let target = rng.random::<f64>() * rate;
        // the first index whose cumulative rate exceeds the target has a
        // positive rate, so it is never the diagonal
        let mut y = row.partition_point(|&c| c <= target);
        if y >= self.n {
            y = (0..self.n).rev().find(|&z| z != x && self.rate_at(x, z) > 0.0)?;
        }
        Some((hold, y))
    }

    fn rate_at(&self, x: usize, y: usize) -> f64 {
        let row = &self.cumulative[x * self.n..(x + 1) * self.n];
        if y == 0 {
            row[0]
        } else {
            row[y] - row[y - 1]
        }
    }

    /// State at time `t` of the chain started at `x`.
    pub fn state_after<R: Rng + ?Sized>(&self, x: usize, t: f64, rng: &mut R) -> usize {
        let mut now = 0.0;
        let mut state = x;
        while let Some((h, y)) = self.step(state, rng) {
            now += h;
            if now > t {
                break;
            }
            state = y;
        }
        state
    }

    /// Full trajectory up to `t_end`.
    pub fn path(&self, start: usize, t_end: f64, seed: u64, index: u64) -> Result<PathSample> {
        self.check_start(start)?;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Domain(format!("path end time must be positive, got {t_end}")));
        }
        let mut rng = stream(seed, index);
        let mut times = vec![0.0];
        let mut states = vec![start];
        let mut now = 0.0;
        let mut state = start;
        while let Some((h, y)) = self.step(state, &mut rng) {
            now += h;
            if now > t_end {
                break;
            }
            if now > *times.last().expect("nonempty") {
                times.push(now);
                states.push(y);
            } else {
                *states.last_mut().expect("nonempty") = y;
            }
            state = y;
        }
        Ok(PathSample {
            seed,
            stream: index,
            t_end,
            times,
            states,
        })
    }

    /// Exit time from the set marked by `inside`, started at `x`.
    pub fn exit_time<R: Rng + ?Sized>(&self, x: usize, inside: &[bool], rng: &mut R) -> f64 {
        let mut now = 0.0;
        let mut state = x;
        while inside[state] {
            match self.step(state, rng) {
                Some((h, y)) => {
                    now += h;
                    state = y;
                }
                None => return f64::INFINITY,
            }
        }
        now
    }

    fn check_start(&self, x: usize) -> Result<()> {
        if x >= self.n {
            return Err(Error::Invalid(format!("start {x} is outside a space of {} points", self.n)));
        }
        Ok(())
    }
}

/// One trajectory of the chain of `gen`.
pub fn simulate_jump_path(gen: &Generator, start: usize, t_end: f64, seed: u64, index: u64) -> Result<PathSample> {
    PathSimulator::new(gen)?.path(start, t_end, seed, index)
}

/// Occupation estimate of `p(t, start, ·)` from `paths` independent paths,
/// with per-cell standard errors.
pub fn monte_carlo_heat_kernel(
    sim: &PathSimulator,
    measure: &[f64],
    start: usize,
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<HeatKernelMatrix> {
    sim.check_start(start)?;
    if paths == 0 {
        return Err(Error::Invalid("at least one path is needed".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let ends: Vec<usize> = (0..paths as u64)
        .into_par_iter()
        .map(|i| sim.state_after(start, t, &mut stream(seed, i)))
        .collect();
    let n = sim.len();
    let mut counts = vec![0usize; n];
    for e in ends {
        counts[e] += 1;
    }
    let m = paths as f64;
    let mut density = vec![0.0; n];
    let mut std_err = vec![0.0; n];
    for y in 0..n {
        let q = counts[y] as f64 / m;
        density[y] = q / measure[y];
        std_err[y] = (q * (1.0 - q) / m).sqrt() / measure[y];
    }
    Ok(HeatKernelMatrix {
        t,
        sources: vec![start],
        points: n,
        density,
        std_err: Some(std_err),
        source: KernelSource::MonteCarlo,
    })
}

/// Monte-Carlo mean exit time from `ball` started at `start`.
pub fn mc_mean_exit_time(sim: &PathSimulator, ball: &[usize], start: usize, paths: usize, seed: u64) -> Result<McEstimate> {
    sim.check_start(start)?;
    let mut inside = vec![false; sim.len()];
    for &x in ball {
        sim.check_start(x)?;
        inside[x] = true;
    }
    if !inside[start] {
        return Err(Error::Invalid(format!("start {start} is not in the ball")));
    }
    if paths == 0 {
        return Err(Error::Invalid("at least one path is needed".into()));
    }
    let times: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|i| sim.exit_time(start, &inside, &mut stream(seed, i)))
        .collect();
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("a path never left the ball".into()));
    }
    Ok(McEstimate::from_values(&times))
}

/// The subordinate chain `Y_t = X_{S_t}` observed on a strictly increasing
/// time grid starting after `0`: `states[i]` is `Y` at `times[i]`, with
/// `times[0] = 0`.
pub fn simulate_subordinate_path(
    base: &PathSimulator,
    sub: &SubordinatorSpec,
    start: usize,
    grid: &[f64],
    seed: u64,
    index: u64,
) -> Result<PathSample> {
    base.check_start(start)?;
    sub.validate()?;
    let mut prev = 0.0;
    for &t in grid {
        if !(t > prev) {
            return Err(Error::Invalid("time grid must be strictly increasing and positive".into()));
        }
        prev = t;
    }
    let mut rng: StreamRng = stream(seed, index);
    let clock = sub.sample_path(grid, &mut rng)?;
    let mut times = vec![0.0];
    let mut states = vec![start];
    let mut state = start;
    // base chain time of the next pending jump
    let mut pending = base.step(state, &mut rng);
    let mut base_now = 0.0;
    for (&t, &s) in grid.iter().zip(&clock) {
        while let Some((h, y)) = pending {
            if base_now + h > s {
                break;
            }
            base_now += h;
            state = y;
            pending = base.step(state, &mut rng);
        }
        if let Some((h, y)) = pending {
            let elapsed = s - base_now;
            pending = Some((h - elapsed, y));
            base_now = s;
        }
        times.push(t);
        states.push(state);
    }
    Ok(PathSample {
        seed,
        stream: index,
        t_end: *grid.last().unwrap_or(&0.0),
        times,
        states,
    })
}

/// CSV with header `seed,stream,time,state`, one row per recorded time.
pub fn write_paths_csv<W: Write>(paths: &[PathSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(["seed", "stream", "time", "state"]).map_err(csv_err)?;
    for p in paths {
        for (t, s) in p.times.iter().zip(&p.states) {
            w.write_record([p.seed.to_string(), p.stream.to_string(), t.to_string(), s.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Generator {
        let mut q = vec![0.0; n * n];
        for x in 0..n {
            q[x * n + (x + 1) % n] = 1.0;
            q[x * n + (x + n - 1) % n] = 1.0;
        }
        Generator::from_rates(n, q, vec![1.0; n]).unwrap()
    }

    #[test]
    fn equal_seeds_give_equal_paths() {
        let g = ring(16);
        let a = simulate_jump_path(&g, 3, 10.0, 42, 5).unwrap();
        let b = simulate_jump_path(&g, 3, 10.0, 42, 5).unwrap();
        let c = simulate_jump_path(&g, 3, 10.0, 42, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn jumps_go_to_neighbours() {
        let g = ring(16);
        let p = simulate_jump_path(&g, 0, 50.0, 1, 0).unwrap();
        for w in p.states.windows(2) {
            let d = (w[0] + 16 - w[1]) % 16;
            assert!(d == 1 || d == 15, "{w:?}");
        }
    }

    #[test]
    fn subordinate_path_is_reproducible() {
        let g = ring(32);
        let sim = PathSimulator::new(&g).unwrap();
        let sub = SubordinatorSpec::new(0.5, 1.5).unwrap();
        let grid: Vec<f64> = (1..=20).map(|k| k as f64 * 0.5).collect();
        let a = simulate_subordinate_path(&sim, &sub, 0, &grid, 9, 1).unwrap();
        let b = simulate_subordinate_path(&sim, &sub, 0, &grid, 9, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states.len(), 21);
    }
}
