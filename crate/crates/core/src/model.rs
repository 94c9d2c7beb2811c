//! SDE problems `dX = b(X) dt + σ(X) dW` together with the structural
//! constants the scheme relies on.
//!
//! Coefficients are time-homogeneous: both evaluators are functions of the
//! state only. Vectors are plain `f64` slices; the diffusion matrix is stored
//! row-major with shape `state_dim × noise_dim`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Writes `b(x)` into `out`.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Writes `σ(x)` into `out` (row-major, `d × m`).
pub type MatrixField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Polynomial growth of the drift difference:
/// `|b(x) - b(y)| <= h (1 + |x| + |y|)^l |x - y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub h: f64,
    pub l: f64,
}

/// Data for the constant-diffusion setting: `σ ≡ sigma0` and a Jacobian with
/// `|Db(x) - Db(y)| <= smoothness (1 + |x| + |y|)^(l-1) |x - y|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDiffusion {
    pub smoothness: f64,
    pub sigma0: Vec<f64>,
}

/// Law of the initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Point(Vec<f64>),
    /// `mean + scale * Z` with `Z` standard normal in `R^d`.
    ScaledNormal { mean: Vec<f64>, scale: f64 },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Point(x) => x.len(),
            InitialLaw::ScaledNormal { mean, .. } => mean.len(),
        }
    }
}

#[derive(Clone)]
pub struct SdeProblem {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    drift: VectorField,
    diffusion: MatrixField,
    monotonicity: f64,
    diffusion_lipschitz: Option<f64>,
    growth: Option<GrowthConstants>,
    constant_diffusion: Option<ConstantDiffusion>,
    initial: InitialLaw,
    moment_order: f64,
    horizon: f64,
}

impl fmt::Debug for SdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeProblem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("monotonicity", &self.monotonicity)
            .field("growth", &self.growth)
            .field("constant_diffusion", &self.constant_diffusion)
            .field("initial", &self.initial)
            .field("moment_order", &self.moment_order)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl SdeProblem {
    pub fn builder(name: impl Into<String>, state_dim: usize, noise_dim: usize) -> SdeProblemBuilder {
        SdeProblemBuilder {
            name: name.into(),
            state_dim,
            noise_dim,
            drift: None,
            diffusion: None,
            monotonicity: None,
            diffusion_lipschitz: None,
            growth: None,
            constant_diffusion: None,
            initial: None,
            moment_order: None,
            horizon: 1.0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Strong monotonicity constant `L`.
    pub fn monotonicity(&self) -> f64 {
        self.monotonicity
    }

    /// Declared Lipschitz constant of the diffusion, when known.
    pub fn diffusion_lipschitz(&self) -> Option<f64> {
        self.diffusion_lipschitz
    }

    pub fn growth(&self) -> Option<GrowthConstants> {
        self.growth
    }

    pub fn constant_diffusion(&self) -> Option<&ConstantDiffusion> {
        self.constant_diffusion.as_ref()
    }

    pub fn initial_law(&self) -> &InitialLaw {
        &self.initial
    }

    pub fn moment_order(&self) -> f64 {
        self.moment_order
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn drift_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.drift(x, &mut out);
        out
    }

    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(x, out)
    }

    pub fn diffusion_matrix(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim * self.noise_dim];
        self.diffusion(x, &mut out);
        out
    }

    /// Same coefficients and constants, different initial law.
    pub fn with_initial(mut self, initial: InitialLaw) -> Result<Self> {
        if initial.dim() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: initial.dim(),
            });
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidProblem(format!("horizon must be positive, got {horizon}")));
        }
        self.horizon = horizon;
        Ok(self)
    }
}

pub struct SdeProblemBuilder {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    drift: Option<VectorField>,
    diffusion: Option<MatrixField>,
    monotonicity: Option<f64>,
    diffusion_lipschitz: Option<f64>,
    growth: Option<GrowthConstants>,
    constant_diffusion: Option<ConstantDiffusion>,
    initial: Option<InitialLaw>,
    moment_order: Option<f64>,
    horizon: f64,
}

impl SdeProblemBuilder {
    pub fn drift(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.diffusion = Some(Arc::new(f));
        self
    }

    /// Sets `σ ≡ sigma0` together with the smoothness constant of the drift Jacobian.
    pub fn constant_diffusion(mut self, sigma0: Vec<f64>, smoothness: f64) -> Self {
        let sigma = sigma0.clone();
        self.diffusion = Some(Arc::new(move |_x: &[f64], out: &mut [f64]| out.copy_from_slice(&sigma)));
        self.diffusion_lipschitz = Some(0.0);
        self.constant_diffusion = Some(ConstantDiffusion { smoothness, sigma0 });
        self
    }

    pub fn monotonicity(mut self, l: f64) -> Self {
        self.monotonicity = Some(l);
        self
    }

    pub fn diffusion_lipschitz(mut self, l: f64) -> Self {
        self.diffusion_lipschitz = Some(l);
        self
    }

    pub fn growth(mut self, h: f64, l: f64) -> Self {
        self.growth = Some(GrowthConstants { h, l });
        self
    }

    pub fn initial(mut self, law: InitialLaw) -> Self {
        self.initial = Some(law);
        self
    }

    pub fn moment_order(mut self, p0: f64) -> Self {
        self.moment_order = Some(p0);
        self
    }

    pub fn horizon(mut self, t: f64) -> Self {
        self.horizon = t;
        self
    }

    pub fn build(self) -> Result<SdeProblem> {
        let invalid = |msg: String| Err(Error::InvalidProblem(msg));
        if self.state_dim == 0 || self.noise_dim == 0 {
            return invalid("state_dim and noise_dim must be at least 1".into());
        }
        let Some(drift) = self.drift else {
            return invalid("drift is required".into());
        };
        let Some(diffusion) = self.diffusion else {
            return invalid("diffusion is required".into());
        };
        let Some(monotonicity) = self.monotonicity else {
            return invalid("monotonicity constant L is required".into());
        };
        if !(monotonicity > 0.0 && monotonicity.is_finite()) {
            return invalid(format!("monotonicity constant must be positive, got {monotonicity}"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        let moment_order = self.moment_order.unwrap_or(2.0);
        if !(moment_order > 0.0) {
            return invalid(format!("moment order must be positive, got {moment_order}"));
        }
        if let Some(g) = self.growth {
            if !(g.h > 0.0 && g.l >= 0.0) {
                return invalid(format!("growth constants need h > 0, l >= 0, got h={} l={}", g.h, g.l));
            }
        }
        let initial = self
            .initial
            .unwrap_or_else(|| InitialLaw::Point(vec![0.0; self.state_dim]));
        if initial.dim() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: initial.dim(),
            });
        }

        let origin = vec![0.0; self.state_dim];
        let mut b0 = vec![0.0; self.state_dim];
        drift(&origin, &mut b0);
        let mut s0 = vec![0.0; self.state_dim * self.noise_dim];
        diffusion(&origin, &mut s0);
        if b0.iter().chain(&s0).any(|v| !v.is_finite()) {
            return invalid("drift(0) and diffusion(0) must be finite".into());
        }

        if let Some(cd) = &self.constant_diffusion {
            if cd.sigma0.len() != self.state_dim * self.noise_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.state_dim * self.noise_dim,
                    got: cd.sigma0.len(),
                });
            }
            if !(cd.smoothness > 0.0) {
                return invalid(format!("smoothness constant must be positive, got {}", cd.smoothness));
            }
        }

        Ok(SdeProblem {
            name: self.name,
            state_dim: self.state_dim,
            noise_dim: self.noise_dim,
            drift,
            diffusion,
            monotonicity,
            diffusion_lipschitz: self.diffusion_lipschitz,
            growth: self.growth,
            constant_diffusion: self.constant_diffusion,
            initial,
            moment_order,
            horizon: self.horizon,
        })
    }
}

/// Moment order declared for the built-in cubic problems. The initial law
/// `5η` has every moment; 10 is `3l + 4` for `l = 2`, the threshold for the
/// optimal L² rate.
pub const CUBIC_MOMENT_ORDER: f64 = 10.0;

fn cubic_drift(x: &[f64], out: &mut [f64]) {
    let x = x[0];
    out[0] = 2.0 - 0.1 * x - 0.1 * x * x * x;
}

/// `dX = (2 - X/10 - X³/10) dt + (1 + X) dW`, `X(0) = 5η`, `t ∈ [0, 1]`.
///
/// `L = 1/10`. The growth constant `h = 1/10` with `l = 2` is sharp: the
/// ratio `(1 + x² + xy + y²) / (1 + |x| + |y|)²` never exceeds one and
/// equals one at the origin.
pub fn builtin_cubic_multiplicative() -> SdeProblem {
    SdeProblem::builder("cubic-mult", 1, 1)
        .drift(cubic_drift)
        .diffusion(|x, out| out[0] = 1.0 + x[0])
        .monotonicity(0.1)
        .diffusion_lipschitz(1.0)
        .growth(0.1, 2.0)
        .initial(InitialLaw::ScaledNormal { mean: vec![0.0], scale: 5.0 })
        .moment_order(CUBIC_MOMENT_ORDER)
        .horizon(1.0)
        .build()
        .expect("built-in problem is valid")
}

/// Cubic drift with additive noise `σ ≡ sigma0`. The Jacobian `-0.1 - 0.3x²`
/// has smoothness constant `0.3`.
pub fn builtin_cubic_additive(sigma0: f64) -> SdeProblem {
    SdeProblem::builder("cubic-const", 1, 1)
        .drift(cubic_drift)
        .constant_diffusion(vec![sigma0], 0.3)
        .monotonicity(0.1)
        .growth(0.1, 2.0)
        .initial(InitialLaw::ScaledNormal { mean: vec![0.0], scale: 5.0 })
        .moment_order(CUBIC_MOMENT_ORDER)
        .horizon(1.0)
        .build()
        .expect("built-in problem is valid")
}

/// `dY = (2 - Y/10 - Y³/10) dt + dW`, `Y(0) = 5η`, `t ∈ [0, 1]`.
pub fn builtin_cubic_constant_diffusion() -> SdeProblem {
    builtin_cubic_additive(1.0)
}

/// Ornstein-Uhlenbeck `dX = θ(μ - X) dt + vol dW` started at `X(0) = 1`.
///
/// Linear, so `L = θ` holds with equality and the taming never activates.
pub fn builtin_linear_ou(theta: f64, mu: f64, vol: f64) -> Result<SdeProblem> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if !mu.is_finite() || !vol.is_finite() {
        return Err(Error::InvalidArgument("mu and vol must be finite".into()));
    }
    SdeProblem::builder("ou", 1, 1)
        .drift(move |x, out| out[0] = theta * (mu - x[0]))
        .diffusion(move |_x, out| out[0] = vol)
        .monotonicity(theta)
        .diffusion_lipschitz(0.0)
        .growth(theta, 0.0)
        .initial(InitialLaw::Point(vec![1.0]))
        .moment_order(CUBIC_MOMENT_ORDER)
        .horizon(1.0)
        .build()
}

/// Closed-form mean of the OU solution at time `t` from `x0`.
pub fn ou_mean(theta: f64, mu: f64, x0: f64, t: f64) -> f64 {
    mu + (x0 - mu) * (-theta * t).exp()
}

/// Looks up a built-in problem by its CLI name.
pub fn builtin_by_name(name: &str) -> Option<SdeProblem> {
    match name {
        "cubic-mult" => Some(builtin_cubic_multiplicative()),
        "cubic-const" => Some(builtin_cubic_constant_diffusion()),
        "ou" => builtin_linear_ou(1.0, 3.0, 0.5).ok(),
        _ => None,
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    let s = x.iter().map(|v| v * v).sum::<f64>();
    if (s.is_finite() && s > 1e-300) || s.is_nan() {
        return s.sqrt();
    }
    // Rescale to avoid overflow or underflow of the squares.
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtins() -> Vec<SdeProblem> {
        vec![
            builtin_cubic_multiplicative(),
            builtin_cubic_constant_diffusion(),
            builtin_linear_ou(1.0, 3.0, 0.5).unwrap(),
        ]
    }

    #[test]
    fn cubic_multiplicative_values() {
        let p = builtin_cubic_multiplicative();
        assert_eq!(p.drift_vec(&[0.0]), vec![2.0]);
        assert!((p.drift_vec(&[1.0])[0] - 1.8).abs() < 1e-15);
        assert_eq!(p.monotonicity(), 0.1);
        assert_eq!(p.diffusion_matrix(&[2.0]), vec![3.0]);
        assert_eq!(p.growth().unwrap().l, 2.0);
        assert_eq!(p.moment_order(), 10.0);
        assert_eq!(p.horizon(), 1.0);
        assert!(p.constant_diffusion().is_none());
    }

    #[test]
    fn cubic_constant_values() {
        let p = builtin_cubic_constant_diffusion();
        assert_eq!(p.diffusion_matrix(&[7.3]), vec![1.0]);
        assert!((p.drift_vec(&[-1.0])[0] - 2.2).abs() < 1e-15);
        assert!(p.constant_diffusion().is_some());
        assert_eq!(p.constant_diffusion().unwrap().sigma0, vec![1.0]);
    }

    #[test]
    fn constant_diffusion_is_constant_everywhere() {
        let p = builtin_cubic_constant_diffusion();
        let sigma0 = p.constant_diffusion().unwrap().sigma0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = rng.random_range(-1e3..1e3);
            assert_eq!(p.diffusion_matrix(&[x]), sigma0);
        }
    }

    #[test]
    fn ou_rejects_non_positive_theta() {
        assert!(builtin_linear_ou(0.0, 0.0, 1.0).is_err());
        assert!(builtin_linear_ou(-2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn ou_monotonicity_holds_with_equality() {
        let p = builtin_linear_ou(1.7, 0.3, 0.0).unwrap();
        let (x, y) = (2.5, -1.25);
        let lhs = (p.drift_vec(&[x])[0] - p.drift_vec(&[y])[0]) * (x - y);
        assert!((lhs + 1.7 * (x - y) * (x - y)).abs() < 1e-12);
    }

    #[test]
    fn builder_rejects_bad_constants() {
        let base = || {
            SdeProblem::builder("t", 1, 1)
                .drift(|x, o| o[0] = -x[0])
                .diffusion(|_, o| o[0] = 0.0)
        };
        assert!(base().build().is_err(), "missing L");
        assert!(base().monotonicity(0.0).build().is_err());
        assert!(base().monotonicity(1.0).horizon(0.0).build().is_err());
        assert!(base().monotonicity(1.0).build().is_ok());
        assert!(SdeProblem::builder("t", 0, 1)
            .drift(|_, _| {})
            .diffusion(|_, _| {})
            .monotonicity(1.0)
            .build()
            .is_err());
        let singular = SdeProblem::builder("t", 1, 1)
            .drift(|x, o| o[0] = 1.0 / x[0])
            .diffusion(|_, o| o[0] = 0.0)
            .monotonicity(1.0)
            .build();
        assert!(singular.is_err(), "drift(0) must be finite");
    }

    #[test]
    fn strong_monotonicity_of_builtins() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in builtins() {
            let l = p.monotonicity();
            for _ in 0..10_000 {
                let x = rng.random_range(-100.0..100.0);
                let y = rng.random_range(-100.0..100.0);
                let lhs = (p.drift_vec(&[x])[0] - p.drift_vec(&[y])[0]) * (x - y) + l * (x - y) * (x - y);
                assert!(lhs <= 1e-9 * (1.0 + (x - y) * (x - y)), "{}: x={x} y={y} lhs={lhs}", p.name());
            }
        }
    }

    #[test]
    fn diffusion_lipschitz_of_builtins() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for p in builtins() {
            let ls = p.diffusion_lipschitz().unwrap();
            for _ in 0..10_000 {
                let x = rng.random_range(-100.0..100.0);
                let y = rng.random_range(-100.0..100.0);
                let d = (p.diffusion_matrix(&[x])[0] - p.diffusion_matrix(&[y])[0]).abs();
                assert!(d <= ls * (x - y).abs() * (1.0 + 1e-12) + 1e-12);
            }
        }
        assert_eq!(builtin_cubic_multiplicative().diffusion_lipschitz(), Some(1.0));
    }

    #[test]
    fn coercivity_of_builtins() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in builtins() {
            let l = p.monotonicity();
            let b0 = p.drift_vec(&[0.0])[0];
            for _ in 0..10_000 {
                let x = rng.random_range(-100.0..100.0);
                let bx = p.drift_vec(&[x])[0] * x;
                assert!(bx <= b0 * x - l * x * x + 1e-9 * (1.0 + x * x));
            }
        }
    }

    #[test]
    fn cubic_growth_constant_is_sharp_on_box() {
        // Smallest h with |b(x)-b(y)| <= h (1+|x|+|y|)^2 |x-y| over |x|,|y| <= 1e3.
        let p = builtin_cubic_multiplicative();
        let g = p.growth().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut worst: f64 = 0.0;
        for _ in 0..100_000 {
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let x = rng.random_range(-1.0..1.0) * scale;
            let y = rng.random_range(-1.0..1.0) * scale;
            if x == y {
                continue;
            }
            let num = (p.drift_vec(&[x])[0] - p.drift_vec(&[y])[0]).abs();
            let den = (1.0 + x.abs() + y.abs()).powf(g.l) * (x - y).abs();
            worst = worst.max(num / den);
        }
        assert!(worst <= g.h * (1.0 + 1e-9));
        assert!(worst > 0.99 * g.h, "constant should be nearly attained, got {worst}");
    }

    #[test]
    fn builtin_lookup() {
        for name in ["cubic-mult", "cubic-const", "ou"] {
            assert_eq!(builtin_by_name(name).unwrap().name(), name);
        }
        assert!(builtin_by_name("nope").is_none());
    }

    #[test]
    fn with_initial_checks_dimension() {
        let p = builtin_linear_ou(1.0, 0.0, 0.0).unwrap();
        assert!(p.clone().with_initial(InitialLaw::Point(vec![1.0, 2.0])).is_err());
        let q = p.with_initial(InitialLaw::Point(vec![4.0])).unwrap();
        assert_eq!(q.initial_law(), &InitialLaw::Point(vec![4.0]));
    }
}
