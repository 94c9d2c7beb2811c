//! Monotonicity-preserving taming of a superlinear drift.
//!
//! With `f(x) = b(0) - Lx - b(x)` and level `n^α`, the taming radius `s_n`
//! is the first radius where `|f|` reaches the level. The tamed drift is
//!
//! ```text
//! b_n(x) = b(0) - Lx - [t_n(x) f(x) + n^α r_n(x) x]
//! ```
//!
//! where `t_n` ramps from 1 to 0 across `[s_n - 1, s_n]` and `r_n` ramps from
//! 0 to 1 across `[s_n - 2, s_n - 1]`. Inside `|x| <= s_n - 2` it is the
//! original drift; outside `|x| >= s_n` it is the linear pull
//! `b(0) - (L + n^α) x`. It stays strongly monotone with the same `L` and
//! grows at most like `(L + 1) n^α (1 + |x|)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{dot, norm, SdeProblem};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_SEARCH_CAP: f64 = 1e6;
pub const BISECTION_TOL: f64 = 1e-6;
/// Relative tolerance of the monotonicity and growth verifiers.
pub const VERIFY_TOL: f64 = 1e-9;

/// Taming radius `s_n`. `Untamed` means `|f|` never reaches `n^α` within
/// the search cap and `b_n ≡ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TamingRadius {
    Finite(f64),
    Untamed,
}

impl TamingRadius {
    pub fn value(self) -> f64 {
        match self {
            TamingRadius::Finite(s) => s,
            TamingRadius::Untamed => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, TamingRadius::Finite(_))
    }
}

impl fmt::Display for TamingRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TamingRadius::Finite(s) => write!(f, "{s}"),
            TamingRadius::Untamed => f.write_str("inf"),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1/2], got {alpha}")))
    }
}

/// `n^α`.
pub fn taming_level(n: u64, alpha: f64) -> f64 {
    (n as f64).powf(alpha)
}

/// Writes `f(x) = b(0) - Lx - b(x)` into `out`.
pub fn f_eval(problem: &SdeProblem, x: &[f64], out: &mut [f64]) {
    let d = problem.state_dim();
    let origin = vec![0.0; d];
    let mut b0 = vec![0.0; d];
    problem.drift(&origin, &mut b0);
    problem.drift(x, out);
    let l = problem.monotonicity();
    for i in 0..d {
        out[i] = b0[i] - l * x[i] - out[i];
    }
}

/// Default number of probe directions for `d >= 2`.
pub fn default_directions(state_dim: usize) -> usize {
    if state_dim == 1 {
        2
    } else {
        64 * state_dim
    }
}

/// Unit probe directions. In one dimension these are exactly `±1`; in two,
/// equally spaced angles; otherwise the signed coordinate axes followed by
/// normalised Gaussian draws from a fixed seed.
pub fn probe_directions(state_dim: usize, count: usize) -> Vec<Vec<f64>> {
    match state_dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let count = count.max(4);
            (0..count)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / count as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        d => {
            let mut dirs = Vec::with_capacity(count.max(2 * d));
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut u = vec![0.0; d];
                    u[i] = sign;
                    dirs.push(u);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1ec);
            while dirs.len() < count {
                let u: Vec<f64> = (0..d).map(|_| rng.sample(BoxMullerNormal)).collect();
                let r = norm(&u);
                if r > 1e-12 {
                    dirs.push(u.into_iter().map(|v| v / r).collect());
                }
            }
            dirs
        }
    }
}

struct BoxMullerNormal;

impl rand::distr::Distribution<f64> for BoxMullerNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn radial_max(problem: &SdeProblem, dirs: &[Vec<f64>], r: f64, x: &mut [f64], fx: &mut [f64]) -> f64 {
    let mut best: f64 = 0.0;
    for u in dirs {
        for (xi, ui) in x.iter_mut().zip(u) {
            *xi = r * ui;
        }
        f_eval(problem, x, fx);
        let v = norm(fx);
        if v.is_nan() {
            return f64::INFINITY;
        }
        best = best.max(v);
    }
    best
}

/// Locates the taming radius by bisection on `M(r) = max_u |f(r u)|`.
///
/// The result never exceeds the first crossing of `n^α` along the doubling
/// scan `1, 2, 4, ...`; it is the lower end of the final bisection bracket,
/// so every probed point inside it has `|f| < n^α`.
pub fn locate_s_n(
    problem: &SdeProblem,
    n: u64,
    alpha: f64,
    search_cap: f64,
    n_directions: usize,
) -> Result<TamingRadius> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    check_alpha(alpha)?;
    if !(search_cap > 2.0) {
        return Err(Error::InvalidArgument(format!("search cap must exceed 2, got {search_cap}")));
    }
    let d = problem.state_dim();
    let dirs = probe_directions(d, n_directions);
    let level = taming_level(n, alpha);
    let mut x = vec![0.0; d];
    let mut fx = vec![0.0; d];

    let mut lo = 0.0;
    let mut hi = None;
    let mut r: f64 = 1.0;
    loop {
        let probe = r.min(search_cap);
        if radial_max(problem, &dirs, probe, &mut x, &mut fx) >= level {
            hi = Some(probe);
            break;
        }
        lo = probe;
        if probe >= search_cap {
            break;
        }
        r *= 2.0;
    }
    let Some(mut hi) = hi else {
        log::info!(
            "|f| stays below n^alpha = {level} up to radius {search_cap}; using the untamed drift for n = {n}"
        );
        return Ok(TamingRadius::Untamed);
    };
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if radial_max(problem, &dirs, mid, &mut x, &mut fx) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if lo <= 2.0 {
        return Err(Error::SchemeUndefined { n, radius: lo });
    }
    Ok(TamingRadius::Finite(lo))
}

/// `t_n`: 1 inside `s_n - 1`, linear down to 0 at `s_n`.
pub fn ramp_t(norm_x: f64, radius: TamingRadius) -> f64 {
    match radius {
        TamingRadius::Untamed => 1.0,
        TamingRadius::Finite(s) => (s - norm_x).clamp(0.0, 1.0),
    }
}

/// `r_n`: 0 inside `s_n - 2`, linear up to 1 at `s_n - 1`.
pub fn ramp_r(norm_x: f64, radius: TamingRadius) -> f64 {
    match radius {
        TamingRadius::Untamed => 0.0,
        TamingRadius::Finite(s) => (norm_x - s + 2.0).clamp(0.0, 1.0),
    }
}

/// Anything that evaluates a drift vector field.
pub trait DriftField {
    fn state_dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// The tamed drift `b_n` for one `(problem, n, α)`. The radius is located
/// once at construction.
#[derive(Debug, Clone)]
pub struct TamedDrift<'a> {
    problem: &'a SdeProblem,
    n: u64,
    alpha: f64,
    level: f64,
    radius: TamingRadius,
    b0: Vec<f64>,
}

impl<'a> TamedDrift<'a> {
    pub fn new(problem: &'a SdeProblem, n: u64, alpha: f64) -> Result<Self> {
        let dirs = default_directions(problem.state_dim());
        Self::with_search(problem, n, alpha, DEFAULT_SEARCH_CAP, dirs)
    }

    pub fn with_search(
        problem: &'a SdeProblem,
        n: u64,
        alpha: f64,
        search_cap: f64,
        n_directions: usize,
    ) -> Result<Self> {
        let radius = locate_s_n(problem, n, alpha, search_cap, n_directions)?;
        Self::with_radius(problem, n, alpha, radius)
    }

    /// Uses a caller-supplied radius, e.g. a more conservative one.
    pub fn with_radius(problem: &'a SdeProblem, n: u64, alpha: f64, radius: TamingRadius) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        check_alpha(alpha)?;
        if let TamingRadius::Finite(s) = radius {
            if !(s > 2.0) {
                return Err(Error::SchemeUndefined { n, radius: s });
            }
        }
        let d = problem.state_dim();
        let mut b0 = vec![0.0; d];
        problem.drift(&vec![0.0; d], &mut b0);
        Ok(Self {
            problem,
            n,
            alpha,
            level: taming_level(n, alpha),
            radius,
            b0,
        })
    }

    pub fn problem(&self) -> &SdeProblem {
        self.problem
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `n^α`.
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn radius(&self) -> TamingRadius {
        self.radius
    }

    pub fn b0(&self) -> &[f64] {
        &self.b0
    }

    /// Writes `b_n(x)` into `out`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        let t_w = ramp_t(r, self.radius);
        let r_w = ramp_r(r, self.radius);
        if r_w == 0.0 {
            // t_n = 1 here, so b_n = b.
            self.problem.drift(x, out);
            return;
        }
        let l = self.problem.monotonicity();
        if t_w == 0.0 {
            // r_n = 1: pure linear pull, b(x) is not needed.
            for i in 0..x.len() {
                out[i] = self.b0[i] - (l + self.level) * x[i];
            }
            return;
        }
        self.problem.drift(x, out);
        for i in 0..x.len() {
            let f = self.b0[i] - l * x[i] - out[i];
            out[i] = self.b0[i] - l * x[i] - (t_w * f + self.level * r_w * x[i]);
        }
    }

    pub fn eval_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval(x, &mut out);
        out
    }
}

impl DriftField for TamedDrift<'_> {
    fn state_dim(&self) -> usize {
        self.problem.state_dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        TamedDrift::eval(self, x, out)
    }
}

/// Writes the classical tamed drift `b(x) / (1 + n^{-α} |b(x)|)` into `out`.
pub fn classical_tamed_eval(problem: &SdeProblem, n: u64, alpha: f64, x: &[f64], out: &mut [f64]) {
    problem.drift(x, out);
    classical_tame_in_place(out, taming_level(n, alpha));
}

pub(crate) fn classical_tame_in_place(b: &mut [f64], level: f64) {
    let nb = norm(b);
    if nb.is_infinite() {
        // Limit of the formula: direction of b scaled to the level.
        let finite: Vec<f64> = b
            .iter()
            .map(|v| if v.is_infinite() { v.signum() } else { 0.0 })
            .collect();
        let r = norm(&finite);
        for (v, u) in b.iter_mut().zip(finite) {
            *v = level * u / r;
        }
        return;
    }
    let scale = 1.0 / (1.0 + nb / level);
    for v in b.iter_mut() {
        *v *= scale;
    }
}

/// Regions of the monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `|x| < s_n - 2`
    Inner,
    /// `s_n - 2 <= |x| < s_n - 1`
    InnerRamp,
    /// `s_n - 1 <= |x| < s_n`
    OuterRamp,
    /// `|x| >= s_n`
    Outer,
    /// One point from each of two different regions.
    Cross,
    /// Whole ball, used when the drift is untamed.
    Global,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Inner => "inner",
            Region::InnerRamp => "inner-ramp",
            Region::OuterRamp => "outer-ramp",
            Region::Outer => "outer",
            Region::Cross => "cross",
            Region::Global => "global",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub region: Region,
    pub pairs: usize,
    /// Largest `(b_n(x) - b_n(y))(x - y) + L|x - y|²`.
    pub max_violation: f64,
    /// Largest violation divided by `1 + |x - y|²`.
    pub max_normalized: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub regions: Vec<RegionReport>,
    pub tol_rel: f64,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.regions.iter().all(|r| r.pass)
    }

    pub fn max_normalized(&self) -> f64 {
        self.regions.iter().map(|r| r.max_normalized).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_pairs(&self) -> usize {
        self.regions.iter().map(|r| r.pairs).sum()
    }

    /// `region,pairs,max_violation,pass` rows, with header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("region,pairs,max_violation,pass\n");
        for r in &self.regions {
            s.push_str(&format!("{},{},{:e},{}\n", r.region.label(), r.pairs, r.max_violation, r.pass));
        }
        s
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let u: Vec<f64> = (0..d).map(|_| rng.sample(BoxMullerNormal)).collect();
        let r = norm(&u);
        if r > 1e-12 {
            return u.into_iter().map(|v| v / r).collect();
        }
    }
}

fn point_in_shell(rng: &mut ChaCha8Rng, d: usize, inner: f64, outer: f64) -> Vec<f64> {
    let r = if outer > inner { rng.random_range(inner..outer) } else { inner };
    random_unit(rng, d).into_iter().map(|u| u * r).collect()
}

/// Radial shells `[inner, outer)` of the four regions, clipped to `sample_radius`.
fn region_shells(radius: TamingRadius, sample_radius: f64) -> Vec<(Region, f64, f64)> {
    match radius {
        TamingRadius::Untamed => vec![(Region::Global, 0.0, sample_radius)],
        TamingRadius::Finite(s) => {
            let bounds = [
                (Region::Inner, 0.0, s - 2.0),
                (Region::InnerRamp, s - 2.0, s - 1.0),
                (Region::OuterRamp, s - 1.0, s),
                (Region::Outer, s, sample_radius.max(s + 1.0)),
            ];
            bounds
                .into_iter()
                .filter(|&(_, lo, _)| lo < sample_radius || lo == 0.0)
                .map(|(r, lo, hi)| (r, lo, if r == Region::Outer { hi } else { hi.min(sample_radius) }))
                .collect()
        }
    }
}

/// Checks strong monotonicity of an arbitrary drift on pairs stratified by
/// the taming regions of `radius`, plus pairs straddling two regions.
///
/// Half of the within-region pairs are independent draws; the other half
/// are short perturbations, which is where a broken ramp shows up.
pub fn verify_monotonicity_of<F: DriftField + ?Sized>(
    field: &F,
    monotonicity: f64,
    radius: TamingRadius,
    pairs: usize,
    sample_radius: f64,
    seed: u64,
    tol_rel: f64,
) -> MonotonicityReport {
    let d = field.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shells = region_shells(radius, sample_radius);
    let groups = if shells.len() > 1 { shells.len() + 1 } else { 1 };
    let per_group = pairs.div_ceil(groups).max(1);
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut diff_b = vec![0.0; d];
    let mut dxy = vec![0.0; d];

    let mut check = |x: &[f64], y: &[f64], acc: &mut (f64, f64)| {
        field.eval(x, &mut bx);
        field.eval(y, &mut by);
        let mut dxy2 = 0.0;
        for i in 0..d {
            diff_b[i] = bx[i] - by[i];
            dxy[i] = x[i] - y[i];
            dxy2 += dxy[i] * dxy[i];
        }
        let v = dot(&diff_b, &dxy) + monotonicity * dxy2;
        let v = if v.is_nan() { f64::INFINITY } else { v };
        acc.0 = acc.0.max(v);
        acc.1 = acc.1.max(v / (1.0 + dxy2));
    };

    let mut regions = Vec::with_capacity(groups);
    for &(region, lo, hi) in &shells {
        let mut acc = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for k in 0..per_group {
            let x = point_in_shell(&mut rng, d, lo, hi);
            let y = if k % 2 == 0 {
                point_in_shell(&mut rng, d, lo, hi)
            } else {
                let width = (hi - lo).max(1e-3);
                let step = rng.random_range(0.0..0.05) * width;
                let dir = random_unit(&mut rng, d);
                let mut y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + step * u).collect();
                // Keep the perturbed point in the same shell.
                let ny = norm(&y);
                if ny > 0.0 && (ny < lo || ny >= hi) {
                    let target = ny.clamp(lo, hi - 1e-12 * hi.max(1.0));
                    for v in y.iter_mut() {
                        *v *= target / ny;
                    }
                }
                y
            };
            check(&x, &y, &mut acc);
        }
        regions.push(RegionReport {
            region,
            pairs: per_group,
            max_violation: acc.0,
            max_normalized: acc.1,
            pass: acc.1 <= tol_rel,
        });
    }
    if shells.len() > 1 {
        let mut acc = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..per_group {
            let i = rng.random_range(0..shells.len());
            let mut j = rng.random_range(0..shells.len() - 1);
            if j >= i {
                j += 1;
            }
            let (_, lo_a, hi_a) = shells[i];
            let (_, lo_b, hi_b) = shells[j];
            let x = point_in_shell(&mut rng, d, lo_a, hi_a);
            let y = point_in_shell(&mut rng, d, lo_b, hi_b);
            check(&x, &y, &mut acc);
        }
        regions.push(RegionReport {
            region: Region::Cross,
            pairs: per_group,
            max_violation: acc.0,
            max_normalized: acc.1,
            pass: acc.1 <= tol_rel,
        });
    }
    MonotonicityReport { regions, tol_rel }
}

/// Strong monotonicity of `b_n` with the problem's `L`.
pub fn verify_monotonicity(td: &TamedDrift<'_>, pairs: usize, radius: f64, seed: u64) -> MonotonicityReport {
    verify_monotonicity_of(
        td,
        td.problem().monotonicity(),
        td.radius(),
        pairs,
        radius,
        seed,
        VERIFY_TOL,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub points: usize,
    /// Largest `|b_n(x)| / ((L + 1) n^α (1 + |x|))`.
    pub max_ratio: f64,
    /// Threshold the ratio is compared against.
    pub bound: f64,
    /// Set when `|b(0)| > n^α` and the bound was widened to `1 + |b(0)|/n^α`.
    pub adjusted: bool,
    pub pass: bool,
}

impl GrowthReport {
    pub fn to_csv(&self) -> String {
        format!(
            "check,points,max_ratio,bound,adjusted,pass\ngrowth,{},{:e},{},{},{}\n",
            self.points, self.max_ratio, self.bound, self.adjusted, self.pass
        )
    }
}

/// Linear growth bound `|b_n(x)| <= (L + 1) n^α (1 + |x|)` on `|x| <= radius`.
pub fn verify_growth(td: &TamedDrift<'_>, points: usize, radius: f64, seed: u64) -> GrowthReport {
    let d = td.state_dim();
    let l = td.problem().monotonicity();
    let level = td.level();
    let b0 = norm(td.b0());
    let adjusted = b0 > level;
    let bound = if adjusted {
        1.0 + b0 / level + VERIFY_TOL
    } else {
        1.0 + VERIFY_TOL
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; d];
    let mut max_ratio: f64 = 0.0;
    let mut probe = |x: &[f64], max_ratio: &mut f64| {
        td.eval(x, &mut out);
        let ratio = norm(&out) / ((l + 1.0) * level * (1.0 + norm(x)));
        *max_ratio = max_ratio.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
    };
    probe(&vec![0.0; d], &mut max_ratio);
    let mut count = 1;
    if let TamingRadius::Finite(s) = td.radius() {
        for r in [s - 2.0, s - 1.5, s - 1.0, s - 0.5, s] {
            if r <= radius {
                for sign in [1.0, -1.0] {
                    let mut x = vec![0.0; d];
                    x[0] = sign * r;
                    probe(&x, &mut max_ratio);
                    count += 1;
                }
            }
        }
    }
    while count < points {
        let x = point_in_shell(&mut rng, d, 0.0, radius);
        probe(&x, &mut max_ratio);
        count += 1;
    }
    GrowthReport {
        points: count,
        max_ratio,
        bound,
        adjusted,
        pass: max_ratio <= bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRatio {
    /// `(s_n - 2) n^{-α/(l+1)}`
    Ratio(f64),
    /// `s_n = ∞`
    Unbounded,
    /// `s_n <= 2`
    Undefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnLowerBoundReport {
    pub alpha: f64,
    pub l: f64,
    pub entries: Vec<(u64, RadiusRatio)>,
}

impl SnLowerBoundReport {
    /// Smallest finite ratio, if any.
    pub fn min_ratio(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|(_, r)| match r {
                RadiusRatio::Ratio(v) => Some(*v),
                _ => None,
            })
            .reduce(f64::min)
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|(_, r)| match r {
                RadiusRatio::Ratio(v) => Some(*v),
                _ => None,
            })
            .reduce(f64::max)
    }

    /// Every defined entry is bounded below by a strictly positive constant.
    pub fn pass(&self) -> bool {
        self.min_ratio().is_none_or(|m| m > 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,ratio\n");
        for (n, r) in &self.entries {
            let v = match r {
                RadiusRatio::Ratio(v) => format!("{v}"),
                RadiusRatio::Unbounded => "inf".into(),
                RadiusRatio::Undefined => "undefined".into(),
            };
            s.push_str(&format!("{n},{v}\n"));
        }
        s
    }
}

/// Tabulates `(s_n - 2) n^{-α/(l+1)}`, which stays bounded away from zero
/// when the drift has polynomial growth of order `l + 1`.
pub fn sn_lower_bound_report(problem: &SdeProblem, alpha: f64, n_list: &[u64]) -> Result<SnLowerBoundReport> {
    check_alpha(alpha)?;
    let Some(growth) = problem.growth() else {
        return Err(Error::InvalidArgument(
            "growth constants (h, l) are required for the radius lower bound".into(),
        ));
    };
    let dirs = default_directions(problem.state_dim());
    let mut entries = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let entry = match locate_s_n(problem, n, alpha, DEFAULT_SEARCH_CAP, dirs) {
            Ok(TamingRadius::Finite(s)) => RadiusRatio::Ratio((s - 2.0) / taming_level(n, alpha / (growth.l + 1.0))),
            Ok(TamingRadius::Untamed) => RadiusRatio::Unbounded,
            Err(Error::SchemeUndefined { .. }) => RadiusRatio::Undefined,
            Err(e) => return Err(e),
        };
        entries.push((n, entry));
    }
    Ok(SnLowerBoundReport {
        alpha,
        l: growth.l,
        entries,
    })
}
