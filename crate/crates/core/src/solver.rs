//! Explicit one-step schemes on the grid `κ_n(t) = [nt]/n`:
//!
//! ```text
//! X_{k+1} = X_k + drift(X_k) Δt + σ(X_k) ΔW_k
//! ```
//!
//! with `drift` the monotone tamed drift, the classical tamed drift, or the
//! plain drift. Both coefficients are evaluated once per step at the left
//! grid point. With constant diffusion this is also the Milstein scheme, so
//! there is no separate branch for it.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{norm, SdeProblem};
use crate::paths::IncrementGrid;
use crate::taming::{check_alpha, classical_tame_in_place, taming_level, TamedDrift};

/// States whose norm exceeds this are treated as blown up.
pub const OVERFLOW_GUARD: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    MonotonePolygonal { alpha: f64 },
    ClassicalTamed { alpha: f64 },
    Vanilla,
}

impl SchemeKind {
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            SchemeKind::MonotonePolygonal { alpha } | SchemeKind::ClassicalTamed { alpha } => Some(alpha),
            SchemeKind::Vanilla => None,
        }
    }

    /// Short name as used on the command line.
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::MonotonePolygonal { .. } => "monotone",
            SchemeKind::ClassicalTamed { .. } => "tamed",
            SchemeKind::Vanilla => "vanilla",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    /// State at the horizon, or the last state reached before a blowup.
    pub endpoint: Vec<f64>,
    /// Largest `|X_k|` over grid points; infinite after a blowup.
    pub sup_norm: f64,
    pub blowup: bool,
    /// Steps completed before stopping.
    pub steps_taken: usize,
}

enum DriftRule<'a> {
    Plain,
    Monotone(TamedDrift<'a>),
    Classical { level: f64 },
}

/// A scheme bound to one problem and one `n`, with the taming radius
/// located up front. Reusable across trials.
pub struct Integrator<'a> {
    problem: &'a SdeProblem,
    scheme: SchemeKind,
    n: u64,
    rule: DriftRule<'a>,
}

impl<'a> Integrator<'a> {
    pub fn new(problem: &'a SdeProblem, scheme: SchemeKind, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        let rule = match scheme {
            SchemeKind::Vanilla => DriftRule::Plain,
            SchemeKind::MonotonePolygonal { alpha } => DriftRule::Monotone(TamedDrift::new(problem, n, alpha)?),
            SchemeKind::ClassicalTamed { alpha } => {
                check_alpha(alpha)?;
                DriftRule::Classical {
                    level: taming_level(n, alpha),
                }
            }
        };
        Ok(Self {
            problem,
            scheme,
            n,
            rule,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    /// The tamed drift, for the monotone scheme.
    pub fn tamed_drift(&self) -> Option<&TamedDrift<'a>> {
        match &self.rule {
            DriftRule::Monotone(td) => Some(td),
            _ => None,
        }
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        match &self.rule {
            DriftRule::Plain => self.problem.drift(x, out),
            DriftRule::Monotone(td) => td.eval(x, out),
            DriftRule::Classical { level } => {
                self.problem.drift(x, out);
                classical_tame_in_place(out, *level);
            }
        }
    }

    pub fn run(&self, grid: &IncrementGrid, x0: &[f64]) -> Result<SimulationOutput> {
        self.run_observed(grid, x0, |_, _, _| {})
    }

    /// Runs the recursion, calling `observer(step, t, state)` at every grid
    /// point reached, starting with `(0, 0.0, x0)`.
    pub fn run_observed<F>(&self, grid: &IncrementGrid, x0: &[f64], mut observer: F) -> Result<SimulationOutput>
    where
        F: FnMut(usize, f64, &[f64]),
    {
        let d = self.problem.state_dim();
        let m = self.problem.noise_dim();
        if grid.n() != self.n {
            return Err(Error::InvalidArgument(format!(
                "grid has n = {}, scheme expects n = {}",
                grid.n(),
                self.n
            )));
        }
        if grid.noise_dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: grid.noise_dim(),
            });
        }
        if x0.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
        }

        let mut x = x0.to_vec();
        let mut b = vec![0.0; d];
        let mut sigma = vec![0.0; d * m];
        let mut sup = norm(&x);
        observer(0, 0.0, &x);
        if !(sup <= OVERFLOW_GUARD) {
            return Ok(SimulationOutput {
                endpoint: x,
                sup_norm: f64::INFINITY,
                blowup: true,
                steps_taken: 0,
            });
        }
        for k in 0..grid.steps() {
            let dt = grid.step_size(k);
            let dw = grid.increment(k);
            self.drift(&x, &mut b);
            self.problem.diffusion(&x, &mut sigma);
            for i in 0..d {
                let row = &sigma[i * m..(i + 1) * m];
                let noise: f64 = row.iter().zip(dw).map(|(s, w)| s * w).sum();
                x[i] += b[i] * dt + noise;
            }
            let t = if k + 1 == grid.steps() {
                grid.horizon()
            } else {
                (k + 1) as f64 / self.n as f64
            };
            let r = norm(&x);
            observer(k + 1, t, &x);
            if !(r <= OVERFLOW_GUARD) {
                return Ok(SimulationOutput {
                    endpoint: x,
                    sup_norm: f64::INFINITY,
                    blowup: true,
                    steps_taken: k + 1,
                });
            }
            sup = sup.max(r);
        }
        Ok(SimulationOutput {
            endpoint: x,
            sup_norm: sup,
            blowup: false,
            steps_taken: grid.steps(),
        })
    }

    /// Streams `step,t,x0,x1,...` rows for one path.
    pub fn write_trajectory_csv<W: Write>(&self, grid: &IncrementGrid, x0: &[f64], mut w: W) -> Result<SimulationOutput> {
        let header: Vec<String> = (0..x0.len()).map(|i| format!("x{i}")).collect();
        writeln!(w, "step,t,{}", header.join(","))?;
        let mut io_err = None;
        let out = self.run_observed(grid, x0, |k, t, x| {
            if io_err.is_some() {
                return;
            }
            let vals: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
            if let Err(e) = writeln!(w, "{k},{t},{}", vals.join(",")) {
                io_err = Some(e);
            }
        })?;
        match io_err {
            Some(e) => Err(e.into()),
            None => Ok(out),
        }
    }
}

/// One path of `scheme` at `n` steps per unit time.
pub fn simulate(
    problem: &SdeProblem,
    scheme: SchemeKind,
    n: u64,
    grid: &IncrementGrid,
    x0: &[f64],
) -> Result<SimulationOutput> {
    Integrator::new(problem, scheme, n)?.run(grid, x0)
}

/// Runs `scheme` at `n_coarse` and at `fine.n()` on the same Wiener path
/// and the same initial state. Returns `(coarse, fine)`.
pub fn simulate_pair(
    problem: &SdeProblem,
    scheme: SchemeKind,
    n_coarse: u64,
    fine: &IncrementGrid,
    x0: &[f64],
) -> Result<(SimulationOutput, SimulationOutput)> {
    if n_coarse == 0 || fine.n() % n_coarse != 0 {
        return Err(Error::NotDivisible {
            value: fine.n(),
            divisor: n_coarse,
        });
    }
    let coarse_grid = fine.coarsen(fine.n() / n_coarse)?;
    let coarse = simulate(problem, scheme, n_coarse, &coarse_grid, x0)?;
    let reference = simulate(problem, scheme, fine.n(), fine, x0)?;
    Ok((coarse, reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_cubic_additive, builtin_cubic_constant_diffusion, builtin_linear_ou};
    use crate::paths::{generate, SeedLabel};

    fn constant_problem(c: f64) -> SdeProblem {
        SdeProblem::builder("const", 1, 1)
            .drift(move |_, o| o[0] = c)
            .diffusion(|_, o| o[0] = 0.0)
            .monotonicity(1.0)
            .build()
            .unwrap()
    }

    fn all_schemes() -> [SchemeKind; 3] {
        [
            SchemeKind::Vanilla,
            SchemeKind::MonotonePolygonal { alpha: 0.5 },
            SchemeKind::ClassicalTamed { alpha: 0.5 },
        ]
    }

    #[test]
    fn zero_coefficients_keep_the_start() {
        let p = constant_problem(0.0);
        let grid = generate(1, 0, 32, 1.0, 1).unwrap();
        for scheme in all_schemes() {
            let out = simulate(&p, scheme, 32, &grid, &[-2.5]).unwrap();
            assert_eq!(out.endpoint, vec![-2.5]);
            assert_eq!(out.sup_norm, 2.5);
            assert!(!out.blowup);
        }
    }

    #[test]
    fn constant_drift_is_exact() {
        let p = constant_problem(1.5);
        for n in [1u64, 3, 64] {
            let grid = generate(1, 0, n, 1.0, 1).unwrap();
            let out = simulate(&p, SchemeKind::Vanilla, n, &grid, &[0.25]).unwrap();
            assert!((out.endpoint[0] - 1.75).abs() < 1e-12);
        }
    }

    #[test]
    fn vanilla_blows_up_from_fifty() {
        let p = builtin_cubic_additive(0.0);
        let grid = generate(0, 0, 16, 1.0, 1).unwrap();
        let integ = Integrator::new(&p, SchemeKind::Vanilla, 16).unwrap();
        let mut path = Vec::new();
        let out = integ.run_observed(&grid, &[50.0], |_, _, x| path.push(x[0])).unwrap();
        // 50 + (2 - 5 - 12500)/16
        assert!((path[1] - (50.0 + (2.0 - 5.0 - 12_500.0) / 16.0)).abs() < 1e-9);
        assert!((path[1] + 731.4375).abs() < 1e-9);
        assert!(path.iter().take(6).any(|x| x.abs() > 1e10));
        assert!(out.blowup);
        assert!(out.sup_norm.is_infinite());
    }

    #[test]
    fn monotone_stays_finite_from_fifty() {
        let p = builtin_cubic_additive(0.0);
        let grid = generate(0, 0, 16, 1.0, 1).unwrap();
        let integ = Integrator::new(&p, SchemeKind::MonotonePolygonal { alpha: 0.5 }, 16).unwrap();
        let mut path = Vec::new();
        let out = integ.run_observed(&grid, &[50.0], |_, _, x| path.push(x[0])).unwrap();
        // 50 + (2 - 4.1 * 50)/16
        assert!((path[1] - 37.3125).abs() < 1e-12);
        assert_eq!(path.len(), 17);
        assert!(path.iter().all(|x| x.abs() <= 100.0));
        assert!(!out.blowup);
        assert_eq!(out.sup_norm, 50.0);
    }

    #[test]
    fn untamed_monotone_equals_vanilla() {
        let p = builtin_linear_ou(1.0, 3.0, 0.5).unwrap();
        let grid = generate(4, 2, 256, 1.0, 1).unwrap();
        let a = simulate(&p, SchemeKind::Vanilla, 256, &grid, &[1.0]).unwrap();
        let b = simulate(&p, SchemeKind::MonotonePolygonal { alpha: 0.5 }, 256, &grid, &[1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pair_with_equal_grids_is_identical() {
        let p = builtin_cubic_constant_diffusion();
        let fine = generate(3, 1, 1024, 1.0, 1).unwrap();
        let scheme = SchemeKind::MonotonePolygonal { alpha: 0.5 };
        let (c, f) = simulate_pair(&p, scheme, 1024, &fine, &[4.0]).unwrap();
        assert_eq!(c, f);
        assert!(simulate_pair(&p, scheme, 3, &fine, &[4.0]).is_err());
    }

    #[test]
    fn coarsened_grid_equals_native_grid_with_same_values() {
        let p = builtin_cubic_constant_diffusion();
        let fine = generate(3, 1, 4096, 1.0, 1).unwrap();
        let coarse = fine.coarsen(16).unwrap();
        let native = IncrementGrid::from_increments(
            256,
            1.0,
            1,
            coarse.increments().to_vec(),
            SeedLabel { master: 99, trial: 99 },
        )
        .unwrap();
        let scheme = SchemeKind::MonotonePolygonal { alpha: 0.5 };
        assert_eq!(
            simulate(&p, scheme, 256, &coarse, &[7.0]).unwrap(),
            simulate(&p, scheme, 256, &native, &[7.0]).unwrap()
        );
    }

    #[test]
    fn mismatches_are_errors() {
        let p = builtin_cubic_constant_diffusion();
        let grid = generate(0, 0, 64, 1.0, 1).unwrap();
        assert!(simulate(&p, SchemeKind::Vanilla, 32, &grid, &[0.0]).is_err());
        assert!(matches!(
            simulate(&p, SchemeKind::Vanilla, 64, &grid, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let grid2 = generate(0, 0, 64, 1.0, 2).unwrap();
        assert!(simulate(&p, SchemeKind::Vanilla, 64, &grid2, &[0.0]).is_err());
        assert!(Integrator::new(&p, SchemeKind::MonotonePolygonal { alpha: 0.9 }, 64).is_err());
        assert!(Integrator::new(&p, SchemeKind::ClassicalTamed { alpha: 0.0 }, 64).is_err());
    }

    #[test]
    fn steep_drift_is_scheme_undefined() {
        let p = SdeProblem::builder("steep", 1, 1)
            .drift(|x, o| o[0] = -x[0] - x[0].powi(9))
            .diffusion(|_, o| o[0] = 0.0)
            .monotonicity(1.0)
            .build()
            .unwrap();
        let grid = generate(0, 0, 16, 1.0, 1).unwrap();
        assert!(matches!(
            simulate(&p, SchemeKind::MonotonePolygonal { alpha: 0.5 }, 16, &grid, &[0.0]),
            Err(Error::SchemeUndefined { .. })
        ));
    }

    #[test]
    fn classical_tamed_stays_finite() {
        let p = builtin_cubic_additive(0.0);
        let grid = generate(0, 0, 16, 1.0, 1).unwrap();
        let out = simulate(&p, SchemeKind::ClassicalTamed { alpha: 0.5 }, 16, &grid, &[50.0]).unwrap();
        assert!(!out.blowup);
        assert!(out.endpoint[0].is_finite());
    }

    #[test]
    fn non_finite_start_is_a_blowup() {
        let p = builtin_cubic_constant_diffusion();
        let grid = generate(0, 0, 8, 1.0, 1).unwrap();
        let out = simulate(&p, SchemeKind::Vanilla, 8, &grid, &[f64::NAN]).unwrap();
        assert!(out.blowup);
        assert_eq!(out.steps_taken, 0);
    }

    #[test]
    fn trajectory_csv() {
        let p = builtin_cubic_additive(0.0);
        let grid = generate(0, 0, 4, 1.0, 1).unwrap();
        let integ = Integrator::new(&p, SchemeKind::Vanilla, 4).unwrap();
        let mut buf = Vec::new();
        integ.write_trajectory_csv(&grid, &[1.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,x0");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("4,1,"));
    }

    #[test]
    fn truncated_grid_reaches_horizon() {
        let p = constant_problem(1.0);
        let grid = generate(0, 0, 4, 1.1, 1).unwrap();
        let out = simulate(&p, SchemeKind::Vanilla, 4, &grid, &[0.0]).unwrap();
        assert!((out.endpoint[0] - 1.1).abs() < 1e-12);
    }
}
