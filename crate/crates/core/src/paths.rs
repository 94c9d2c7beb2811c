//! Reproducible Brownian increments and exact coarsening.
//!
//! Every draw is addressed by `(master seed, trial, stream role, step)`:
//! the master seed keys a ChaCha8 generator, `(trial, role)` selects its
//! stream, and the step selects the word position. Normals come from the
//! Box-Muller transform, two per pair of 64-bit words, so each step of an
//! `m`-dimensional increment consumes a fixed `4 * ceil(m / 2)` words and
//! any step can be regenerated without replaying the ones before it.

use std::io::{Read, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{InitialLaw, SdeProblem};

/// Recorded in output metadata so runs can be compared.
pub const NORMAL_METHOD: &str = "chacha8-box-muller";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedLabel {
    pub master: u64,
    pub trial: u64,
}

/// Independent stream families within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Increments = 0,
    Initial = 1,
}

/// Standard normals for one `(master, trial, role)` stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

const TWO_POW_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

impl NormalStream {
    pub fn new(master: u64, trial: u64, role: StreamRole) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        // Trials above 2^62 wrap onto each other; far beyond any run size.
        rng.set_stream((trial << 2) | role as u64);
        Self { rng, spare: None }
    }

    /// Positions the stream at the first draw of `step` for `dim`-vectors.
    pub fn seek_step(&mut self, step: u64, dim: usize) {
        let words_per_step = 4 * dim.div_ceil(2) as u128;
        self.rng.set_word_pos(step as u128 * words_per_step);
        self.spare = None;
    }

    fn pair(&mut self) -> (f64, f64) {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53;
        let u2 = (self.rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53;
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (radius * c, radius * s)
    }

    /// Fills `out` with one step's worth of independent standard normals.
    /// An odd trailing normal is discarded so steps stay word-aligned.
    pub fn fill_step(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for c in &mut chunks {
            let (a, b) = self.pair();
            c[0] = a;
            c[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.pair().0;
        }
    }

    /// Next single normal, using both halves of each pair.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let (a, b) = self.pair();
        self.spare = Some(b);
        a
    }
}

/// Number of grid steps covering `[0, horizon]` at `n` steps per unit time.
/// `n * horizon` within 1e-9 relative of an integer counts as that integer.
pub fn grid_steps(n: u64, horizon: f64) -> (usize, bool) {
    let exact = n as f64 * horizon;
    let rounded = exact.round();
    if (exact - rounded).abs() <= 1e-9 * rounded.max(1.0) && rounded >= 1.0 {
        (rounded as usize, true)
    } else {
        (exact.ceil() as usize, false)
    }
}

/// Brownian increments on the uniform grid `k / n`, `k = 0..steps`.
///
/// When `n * horizon` is not an integer the final step is shortened so the
/// grid ends exactly at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementGrid {
    n: u64,
    horizon: f64,
    noise_dim: usize,
    steps: usize,
    last_step: f64,
    increments: Vec<f64>,
    seed: SeedLabel,
}

impl IncrementGrid {
    /// Builds a grid from explicit increment values (row per step).
    pub fn from_increments(
        n: u64,
        horizon: f64,
        noise_dim: usize,
        increments: Vec<f64>,
        seed: SeedLabel,
    ) -> Result<Self> {
        validate(n, horizon, noise_dim)?;
        let (steps, uniform) = grid_steps(n, horizon);
        if increments.len() != steps * noise_dim {
            return Err(Error::DimensionMismatch {
                expected: steps * noise_dim,
                got: increments.len(),
            });
        }
        let last_step = if uniform {
            1.0 / n as f64
        } else {
            horizon - (steps - 1) as f64 / n as f64
        };
        Ok(Self {
            n,
            horizon,
            noise_dim,
            steps,
            last_step,
            increments,
            seed,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> SeedLabel {
        self.seed
    }

    /// True when every step has length exactly `1/n`.
    pub fn is_uniform(&self) -> bool {
        self.last_step == 1.0 / self.n as f64
    }

    pub fn step_size(&self, k: usize) -> f64 {
        if k + 1 == self.steps {
            self.last_step
        } else {
            1.0 / self.n as f64
        }
    }

    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.noise_dim..(k + 1) * self.noise_dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Sums blocks of `factor` consecutive increments; the result lives on
    /// the grid with `n / factor` steps per unit time.
    pub fn coarsen(&self, factor: u64) -> Result<IncrementGrid> {
        if factor == 0 {
            return Err(Error::InvalidArgument("coarsening factor must be at least 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        if !self.is_uniform() {
            return Err(Error::InvalidArgument(
                "cannot coarsen a grid with a truncated final step".into(),
            ));
        }
        if self.n % factor != 0 {
            return Err(Error::NotDivisible { value: self.n, divisor: factor });
        }
        if self.steps as u64 % factor != 0 {
            return Err(Error::NotDivisible { value: self.steps as u64, divisor: factor });
        }
        let f = factor as usize;
        let m = self.noise_dim;
        let coarse_steps = self.steps / f;
        let mut out = vec![0.0; coarse_steps * m];
        for k in 0..coarse_steps {
            let dst = &mut out[k * m..(k + 1) * m];
            for j in 0..f {
                for (d, s) in dst.iter_mut().zip(self.increment(k * f + j)) {
                    *d += s;
                }
            }
        }
        IncrementGrid::from_increments(self.n / factor, self.horizon, m, out, self.seed)
    }

    /// Little-endian dump: magic `b"INCG"`, then `n: u64`, `horizon: f64`,
    /// `noise_dim: u64`, `master: u64`, `trial: u64`, `steps: u64`, then
    /// `steps * noise_dim` increments as `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"INCG")?;
        w.write_all(&self.n.to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&(self.noise_dim as u64).to_le_bytes())?;
        w.write_all(&self.seed.master.to_le_bytes())?;
        w.write_all(&self.seed.trial.to_le_bytes())?;
        w.write_all(&(self.steps as u64).to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"INCG" {
            return Err(Error::InvalidArgument("not an increment grid dump".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut r)?);
        let horizon = f64::from_le_bytes(next(&mut r)?);
        let noise_dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let master = u64::from_le_bytes(next(&mut r)?);
        let trial = u64::from_le_bytes(next(&mut r)?);
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let len = steps
            .checked_mul(noise_dim)
            .ok_or_else(|| Error::InvalidArgument("corrupt header".into()))?;
        let mut increments = Vec::with_capacity(len);
        for _ in 0..len {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        IncrementGrid::from_increments(n, horizon, noise_dim, increments, SeedLabel { master, trial })
    }
}

fn validate(n: u64, horizon: f64, noise_dim: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if noise_dim == 0 {
        return Err(Error::InvalidArgument("noise dimension must be at least 1".into()));
    }
    Ok(())
}

/// Fine-grid increments for one trial, each `N(0, Δt I_m)`.
pub fn generate(master_seed: u64, trial: u64, n: u64, horizon: f64, noise_dim: usize) -> Result<IncrementGrid> {
    validate(n, horizon, noise_dim)?;
    let (steps, uniform) = grid_steps(n, horizon);
    let mut stream = NormalStream::new(master_seed, trial, StreamRole::Increments);
    let mut increments = vec![0.0; steps * noise_dim];
    let scale = (1.0 / n as f64).sqrt();
    for row in increments.chunks_exact_mut(noise_dim) {
        stream.fill_step(row);
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    if !uniform {
        let last = horizon - (steps - 1) as f64 / n as f64;
        let fix = (last * n as f64).sqrt();
        for v in &mut increments[(steps - 1) * noise_dim..] {
            *v *= fix;
        }
    }
    IncrementGrid::from_increments(n, horizon, noise_dim, increments, SeedLabel { master: master_seed, trial })
}

/// Draws the initial state on a stream independent of the trial's increments.
pub fn sample_initial(master_seed: u64, trial: u64, problem: &SdeProblem) -> Vec<f64> {
    match problem.initial_law() {
        InitialLaw::Point(x) => x.clone(),
        InitialLaw::ScaledNormal { mean, scale } => {
            let mut stream = NormalStream::new(master_seed, trial, StreamRole::Initial);
            let mut z = vec![0.0; mean.len()];
            stream.fill_step(&mut z);
            mean.iter().zip(z).map(|(m, z)| m + scale * z).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_cubic_multiplicative, builtin_linear_ou};

    #[test]
    fn deterministic_and_sized() {
        let a = generate(7, 3, 64, 1.0, 2).unwrap();
        let b = generate(7, 3, 64, 1.0, 2).unwrap();
        assert_eq!(a.increments(), b.increments());
        assert_eq!(generate(1, 0, 4, 1.0, 1).unwrap().steps(), 4);
        assert_ne!(a.increments(), generate(7, 4, 64, 1.0, 2).unwrap().increments());
        assert_ne!(a.increments(), generate(8, 3, 64, 1.0, 2).unwrap().increments());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate(0, 0, 0, 1.0, 1).is_err());
        assert!(generate(0, 0, 4, 0.0, 1).is_err());
        assert!(generate(0, 0, 4, -1.0, 1).is_err());
        assert!(generate(0, 0, 4, 1.0, 0).is_err());
    }

    #[test]
    fn steps_are_addressable() {
        let grid = generate(11, 2, 32, 1.0, 3).unwrap();
        let scale = (1.0f64 / 32.0).sqrt();
        for k in [0usize, 5, 31] {
            let mut s = NormalStream::new(11, 2, StreamRole::Increments);
            s.seek_step(k as u64, 3);
            let mut z = [0.0; 3];
            s.fill_step(&mut z);
            let expect: Vec<f64> = z.iter().map(|v| v * scale).collect();
            assert_eq!(grid.increment(k), expect.as_slice());
        }
    }

    #[test]
    fn increment_variance() {
        let n = 16u64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut count = 0.0;
        for trial in 0..(100_000 / n as u64 + 1) {
            let g = generate(5, trial, n, 1.0, 1).unwrap();
            for v in g.increments() {
                sum += v;
                sum2 += v * v;
                count += 1.0;
            }
        }
        let var = sum2 / count - (sum / count).powi(2);
        let target = 1.0 / n as f64;
        // Var of the sample variance of a normal is 2σ⁴/(N-1).
        let se = (2.0 * target * target / (count - 1.0)).sqrt();
        assert!((var - target).abs() < 3.0 * se, "var={var} target={target} se={se}");
        assert!((sum / count).abs() < 3.0 * (target / count).sqrt());
    }

    #[test]
    fn trials_are_uncorrelated() {
        let n = 100_000u64;
        let a = generate(9, 0, n, 1.0, 1).unwrap();
        let b = generate(9, 1, n, 1.0, 1).unwrap();
        let (xa, xb) = (a.increments(), b.increments());
        let ma = xa.iter().sum::<f64>() / n as f64;
        let mb = xb.iter().sum::<f64>() / n as f64;
        let cov: f64 = xa.iter().zip(xb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = xa.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = xb.iter().map(|y| (y - mb).powi(2)).sum();
        let rho = cov / (va * vb).sqrt();
        assert!(rho.abs() < 0.01, "rho={rho}");
    }

    #[test]
    fn coarsen_sums_blocks() {
        let seed = SeedLabel { master: 0, trial: 0 };
        let g = IncrementGrid::from_increments(4, 1.0, 1, vec![1.0, 2.0, 3.0, 4.0], seed).unwrap();
        let c = g.coarsen(2).unwrap();
        assert_eq!(c.n(), 2);
        assert_eq!(c.increments(), &[3.0, 7.0]);
        assert_eq!(g.coarsen(1).unwrap(), g);
        assert!(matches!(g.coarsen(3), Err(Error::NotDivisible { .. })));
        assert!(g.coarsen(0).is_err());
    }

    #[test]
    fn coarsen_composes() {
        let g = generate(3, 1, 1 << 10, 1.0, 2).unwrap();
        let twice = g.coarsen(2).unwrap().coarsen(2).unwrap();
        let once = g.coarsen(4).unwrap();
        assert_eq!(twice.n(), once.n());
        for (a, b) in twice.increments().iter().zip(once.increments()) {
            assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn truncated_final_step() {
        let g = generate(1, 0, 4, 1.1, 1).unwrap();
        assert_eq!(g.steps(), 5);
        assert!(!g.is_uniform());
        assert!((g.step_size(4) - 0.1).abs() < 1e-12);
        assert_eq!(g.step_size(0), 0.25);
        assert!(g.coarsen(2).is_err());
    }

    #[test]
    fn binary_dump_roundtrip() {
        let g = generate(42, 7, 16, 2.0, 3).unwrap();
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 6 * 8 + 32 * 3 * 8);
        assert_eq!(IncrementGrid::read_binary(buf.as_slice()).unwrap(), g);
        assert!(IncrementGrid::read_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn initial_draws() {
        let ou = builtin_linear_ou(1.0, 0.0, 1.0).unwrap();
        assert_eq!(sample_initial(1, 2, &ou), vec![1.0]);

        let cubic = builtin_cubic_multiplicative();
        assert_eq!(sample_initial(4, 9, &cubic), sample_initial(4, 9, &cubic));
        let count = 100_000;
        let draws: Vec<f64> = (0..count).map(|t| sample_initial(4, t, &cubic)[0]).collect();
        let mean = draws.iter().sum::<f64>() / count as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        let n = count as f64;
        assert!(mean.abs() < 3.0 * (25.0 / n).sqrt(), "mean={mean}");
        assert!((var - 25.0).abs() < 3.0 * (2.0 * 625.0 / (n - 1.0)).sqrt(), "var={var}");
    }

    #[test]
    fn initial_stream_is_independent_of_increments() {
        let cubic = builtin_cubic_multiplicative();
        let count = 100_000u64;
        let mut xs = Vec::with_capacity(count as usize);
        let mut ws = Vec::with_capacity(count as usize);
        for t in 0..count {
            xs.push(sample_initial(6, t, &cubic)[0]);
            ws.push(generate(6, t, 1, 1.0, 1).unwrap().increments()[0]);
        }
        let mx = xs.iter().sum::<f64>() / count as f64;
        let mw = ws.iter().sum::<f64>() / count as f64;
        let cov: f64 = xs.iter().zip(&ws).map(|(x, w)| (x - mx) * (w - mw)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vw: f64 = ws.iter().map(|w| (w - mw).powi(2)).sum();
        assert!((cov / (vx * vw).sqrt()).abs() < 0.01);
    }
}
