//! Problem definitions from a flat `key = value` text file.
//!
//! ```text
//! # cubic drift, multiplicative noise
//! name = cubic
//! state_dim = 1
//! noise_dim = 1
//! drift.0 = 2 - 0.1*x0 - 0.1*x0^3
//! diffusion.0.0 = 1 + x0
//! monotonicity = 0.1
//! growth_h = 0.1
//! growth_l = 2
//! moment_order = 10
//! horizon = 1
//! initial = normal 5
//! ```
//!
//! Drift components are polynomials: whitespace-separated terms joined by
//! standalone `+` / `-`, each term a `*`-product of a number and factors
//! `x<i>` or `x<i>^<k>`. Diffusion entries use the same syntax but must be
//! affine; entries left out are zero. `initial` is `point a[,b,...]` or
//! `normal <scale> [mean a[,b,...]]`. Optional keys: `growth_h`/`growth_l`
//! (together), `smoothness` (only with constant diffusion),
//! `diffusion_lipschitz` (defaults to the norm of the linear part), `name`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{InitialLaw, SdeProblem};

#[derive(Debug, Clone, PartialEq)]
struct Monomial {
    coef: f64,
    /// `(variable index, power)` pairs.
    factors: Vec<(usize, u32)>,
}

impl Monomial {
    fn degree(&self) -> u32 {
        self.factors.iter().map(|&(_, k)| k).sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.factors
            .iter()
            .fold(self.coef, |acc, &(i, k)| acc * x[i].powi(k as i32))
    }
}

/// A polynomial in the state coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    fn max_variable(&self) -> Option<usize> {
        self.terms.iter().flat_map(|t| t.factors.iter().map(|&(i, _)| i)).max()
    }

    /// Coefficient of `x_i` among degree-one terms.
    fn linear_coef(&self, i: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.degree() == 1 && t.factors.iter().any(|&(j, k)| j == i && k == 1))
            .map(|t| t.coef)
            .sum()
    }

    fn constant(&self) -> f64 {
        self.terms.iter().filter(|t| t.degree() == 0).map(|t| t.coef).sum()
    }
}

fn parse_term(token: &str, sign: f64) -> std::result::Result<Monomial, String> {
    let mut coef = sign;
    let mut factors = Vec::new();
    let (token, negate) = match token.strip_prefix('-') {
        Some(rest) => (rest, true),
        None => (token.strip_prefix('+').unwrap_or(token), false),
    };
    if negate {
        coef = -coef;
    }
    if token.is_empty() {
        return Err("empty term".into());
    }
    for factor in token.split('*') {
        if let Some(var) = factor.strip_prefix('x') {
            let (idx, pow) = match var.split_once('^') {
                Some((i, k)) => (i, k.parse::<u32>().map_err(|_| format!("bad exponent in '{factor}'"))?),
                None => (var, 1),
            };
            let idx = idx.parse::<usize>().map_err(|_| format!("bad variable '{factor}'"))?;
            factors.push((idx, pow));
        } else {
            let v = factor
                .parse::<f64>()
                .map_err(|_| format!("bad factor '{factor}'"))?;
            coef *= v;
        }
    }
    Ok(Monomial { coef, factors })
}

/// Parses `2 - 0.1*x0 - 0.1*x0^3`.
pub fn parse_polynomial(text: &str) -> std::result::Result<Polynomial, String> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut expect_term = true;
    for tok in text.split_whitespace() {
        match tok {
            "+" | "-" if !expect_term => {
                sign = if tok == "-" { -1.0 } else { 1.0 };
                expect_term = true;
            }
            "+" | "-" => return Err(format!("unexpected '{tok}'")),
            _ if expect_term => {
                terms.push(parse_term(tok, sign)?);
                expect_term = false;
            }
            _ => return Err(format!("missing operator before '{tok}'")),
        }
    }
    if expect_term {
        return Err("expression ends without a term".into());
    }
    Ok(Polynomial { terms })
}

/// A parsed problem plus any spot-check warnings.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: SdeProblem,
    pub drift: Vec<Polynomial>,
    pub diffusion: Vec<Polynomial>,
    pub warnings: Vec<String>,
}

pub const SPOT_CHECK_PAIRS: usize = 1000;
const SPOT_CHECK_RADIUS: f64 = 10.0;

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number '{v}'")))
        .collect()
}

fn parse_initial(text: &str, dim: usize) -> std::result::Result<InitialLaw, String> {
    let mut words = text.split_whitespace();
    let law = match words.next() {
        Some("point") => {
            let v = parse_list(&words.collect::<Vec<_>>().join(""))?;
            InitialLaw::Point(v)
        }
        Some("normal") => {
            let scale = words
                .next()
                .ok_or("normal needs a scale")?
                .parse::<f64>()
                .map_err(|_| "bad scale".to_string())?;
            let mean = match words.next() {
                Some("mean") => parse_list(&words.collect::<Vec<_>>().join(""))?,
                Some(other) => return Err(format!("unexpected '{other}'")),
                None => vec![0.0; dim],
            };
            InitialLaw::ScaledNormal { mean, scale }
        }
        _ => return Err("initial must be 'point ...' or 'normal ...'".into()),
    };
    if law.dim() != dim {
        return Err(format!("initial law has dimension {}, expected {dim}", law.dim()));
    }
    Ok(law)
}

/// Parses a problem definition from text.
pub fn parse_problem_config(text: &str) -> Result<LoadedProblem> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim().to_string();
        if entries.contains_key(&key) {
            return Err(Error::Config {
                line: line_no,
                message: format!("duplicate key '{key}'"),
            });
        }
        entries.insert(key, (line_no, value.trim().to_string()));
    }
    if entries.is_empty() {
        return Err(Error::Config {
            line: 0,
            message: "empty configuration".into(),
        });
    }

    let missing = |key: &str| Error::Config {
        line: 0,
        message: format!("missing required key '{key}'"),
    };
    let number = |key: &str| -> Result<Option<f64>> {
        match entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<f64>().map(Some).map_err(|_| Error::Config {
                line: *line,
                message: format!("'{key}' is not a number: '{v}'"),
            }),
        }
    };
    let integer = |key: &str| -> Result<usize> {
        let (line, v) = entries.get(key).ok_or_else(|| missing(key))?;
        v.parse::<usize>().map_err(|_| Error::Config {
            line: *line,
            message: format!("'{key}' must be a positive integer"),
        })
    };

    let d = integer("state_dim")?;
    let m = integer("noise_dim")?;
    if d == 0 || m == 0 {
        return Err(Error::Config {
            line: 0,
            message: "state_dim and noise_dim must be at least 1".into(),
        });
    }

    for (key, (line, _)) in &entries {
        let known = matches!(
            key.as_str(),
            "name"
                | "state_dim"
                | "noise_dim"
                | "monotonicity"
                | "growth_h"
                | "growth_l"
                | "smoothness"
                | "moment_order"
                | "horizon"
                | "initial"
                | "diffusion_lipschitz"
        ) || key.starts_with("drift.")
            || key.starts_with("diffusion.");
        if !known {
            return Err(Error::Config {
                line: *line,
                message: format!("unknown key '{key}'"),
            });
        }
    }

    let poly = |key: &str, line: usize, text: &str| -> Result<Polynomial> {
        let p = parse_polynomial(text).map_err(|message| Error::Config { line, message })?;
        if let Some(v) = p.max_variable() {
            if v >= d {
                return Err(Error::Config {
                    line,
                    message: format!("'{key}' uses x{v} but state_dim is {d}"),
                });
            }
        }
        Ok(p)
    };

    let mut drift = Vec::with_capacity(d);
    for i in 0..d {
        let key = format!("drift.{i}");
        let (line, text) = entries.get(&key).ok_or_else(|| missing(&key))?;
        drift.push(poly(&key, *line, text)?);
    }
    let mut diffusion = vec![Polynomial::default(); d * m];
    for (key, (line, text)) in entries.range("diffusion.".to_string()..) {
        let Some(rest) = key.strip_prefix("diffusion.") else { break };
        let idx = rest
            .split_once('.')
            .and_then(|(i, j)| Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?)));
        let Some((i, j)) = idx.filter(|&(i, j)| i < d && j < m) else {
            return Err(Error::Config {
                line: *line,
                message: format!("'{key}' is not a valid diffusion entry for a {d}x{m} matrix"),
            });
        };
        let p = poly(key, *line, text)?;
        if p.degree() > 1 {
            return Err(Error::Config {
                line: *line,
                message: format!("'{key}' must be affine"),
            });
        }
        diffusion[i * m + j] = p;
    }

    let monotonicity = number("monotonicity")?.ok_or_else(|| missing("monotonicity"))?;
    let moment_order = number("moment_order")?.ok_or_else(|| missing("moment_order"))?;
    let horizon = number("horizon")?.ok_or_else(|| missing("horizon"))?;
    let (init_line, init_text) = entries.get("initial").ok_or_else(|| missing("initial"))?;
    let initial = parse_initial(init_text, d).map_err(|message| Error::Config {
        line: *init_line,
        message,
    })?;
    let name = entries
        .get("name")
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| "config".into());

    let constant = diffusion.iter().all(|p| p.degree() == 0);
    let lipschitz = match number("diffusion_lipschitz")? {
        Some(v) => v,
        None => {
            let mut sum = 0.0;
            for p in &diffusion {
                for k in 0..d {
                    sum += p.linear_coef(k).powi(2);
                }
            }
            sum.sqrt()
        }
    };

    let drift_polys = drift.clone();
    let mut builder = SdeProblem::builder(name, d, m)
        .drift(move |x, out| {
            for (o, p) in out.iter_mut().zip(&drift_polys) {
                *o = p.eval(x);
            }
        })
        .monotonicity(monotonicity)
        .moment_order(moment_order)
        .horizon(horizon)
        .initial(initial);

    match number("smoothness")? {
        Some(s) if constant => {
            let sigma0: Vec<f64> = diffusion.iter().map(Polynomial::constant).collect();
            builder = builder.constant_diffusion(sigma0, s);
        }
        Some(_) => {
            let line = entries["smoothness"].0;
            return Err(Error::Config {
                line,
                message: "'smoothness' requires a constant diffusion".into(),
            });
        }
        None => {
            let diff_polys = diffusion.clone();
            builder = builder
                .diffusion(move |x, out| {
                    for (o, p) in out.iter_mut().zip(&diff_polys) {
                        *o = p.eval(x);
                    }
                })
                .diffusion_lipschitz(lipschitz);
        }
    }

    match (number("growth_h")?, number("growth_l")?) {
        (Some(h), Some(l)) => builder = builder.growth(h, l),
        (None, None) => {}
        _ => {
            return Err(Error::Config {
                line: 0,
                message: "growth_h and growth_l must be given together".into(),
            })
        }
    }

    let problem = builder.build().map_err(|e| Error::Config {
        line: 0,
        message: e.to_string(),
    })?;
    let warnings = spot_check_monotonicity(&problem, SPOT_CHECK_PAIRS, SPOT_CHECK_RADIUS, 0);
    Ok(LoadedProblem {
        problem,
        drift,
        diffusion,
        warnings,
    })
}

/// Reads and parses a problem file.
pub fn load_problem_config(path: impl AsRef<Path>) -> Result<LoadedProblem> {
    let text = std::fs::read_to_string(path)?;
    parse_problem_config(&text)
}

/// Searches for a pair violating the declared `L`. Sampling can only
/// falsify the constant, never certify it.
pub fn spot_check_monotonicity(problem: &SdeProblem, pairs: usize, radius: f64, seed: u64) -> Vec<String> {
    let d = problem.state_dim();
    let l = problem.monotonicity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    for _ in 0..pairs {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..radius)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..radius)).collect();
        problem.drift(&x, &mut bx);
        problem.drift(&y, &mut by);
        let mut inner = 0.0;
        let mut dist2 = 0.0;
        for i in 0..d {
            inner += (bx[i] - by[i]) * (x[i] - y[i]);
            dist2 += (x[i] - y[i]) * (x[i] - y[i]);
        }
        if inner + l * dist2 > 1e-9 * (1.0 + dist2) {
            return vec![format!(
                "declared monotonicity constant L = {l} is violated at x = {x:?}, y = {y:?}"
            )];
        }
    }
    Vec::new()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_cubic_multiplicative;

    pub(crate) const CUBIC_MULT: &str = "\
# cubic drift with multiplicative noise
name = cubic
state_dim = 1
noise_dim = 1
drift.0 = 2 - 0.1*x0 - 0.1*x0^3
diffusion.0.0 = 1 + x0
monotonicity = 0.1
growth_h = 0.1
growth_l = 2
moment_order = 10
horizon = 1
initial = normal 5
";

    #[test]
    fn polynomial_parsing() {
        let p = parse_polynomial("2 - 0.1*x0 - 0.1*x0^3").unwrap();
        assert_eq!(p.degree(), 3);
        assert!((p.eval(&[1.0]) - 1.8).abs() < 1e-15);
        let q = parse_polynomial("-x0 + 3*x1^2*x0 - 1e-3").unwrap();
        assert!((q.eval(&[2.0, 1.0]) - (-2.0 + 6.0 - 1e-3)).abs() < 1e-15);
        for bad in ["", "2 +", "2 3", "+ 2", "x", "2*y0", "x0^a"] {
            assert!(parse_polynomial(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cubic_config_matches_builtin() {
        let loaded = parse_problem_config(CUBIC_MULT).unwrap();
        assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
        let p = &loaded.problem;
        let q = builtin_cubic_multiplicative();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = rng.random_range(-20.0..20.0);
            let (a, b) = (p.drift_vec(&[x])[0], q.drift_vec(&[x])[0]);
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            assert_eq!(p.diffusion_matrix(&[x]), q.diffusion_matrix(&[x]));
        }
        assert_eq!(p.initial_law(), q.initial_law());
        assert_eq!(p.growth(), q.growth());
        assert_eq!(p.diffusion_lipschitz(), Some(1.0));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_problem_config(""), Err(Error::Config { .. })));
        assert!(parse_problem_config("# only a comment\n").is_err());
    }

    #[test]
    fn wrong_l_is_a_warning() {
        let text = CUBIC_MULT.replace("monotonicity = 0.1", "monotonicity = 5");
        let loaded = parse_problem_config(&text).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("L = 5"));
    }

    #[test]
    fn constant_diffusion_with_smoothness() {
        let text = CUBIC_MULT
            .replace("diffusion.0.0 = 1 + x0", "diffusion.0.0 = 1")
            .replace("initial = normal 5", "initial = point 0.5\nsmoothness = 0.3");
        let loaded = parse_problem_config(&text).unwrap();
        let cd = loaded.problem.constant_diffusion().unwrap();
        assert_eq!(cd.sigma0, vec![1.0]);
        assert_eq!(cd.smoothness, 0.3);
        assert_eq!(loaded.problem.initial_law(), &InitialLaw::Point(vec![0.5]));

        let bad = CUBIC_MULT.replace("initial = normal 5", "initial = normal 5\nsmoothness = 0.3");
        assert!(parse_problem_config(&bad).is_err(), "smoothness with non-constant diffusion");
    }

    #[test]
    fn config_errors_carry_lines() {
        let cases = [
            (CUBIC_MULT.replace("horizon = 1", "horizon = soon"), Some(11)),
            (CUBIC_MULT.replace("diffusion.0.0 = 1 + x0", "diffusion.0.0 = x0^2"), Some(6)),
            (CUBIC_MULT.replace("diffusion.0.0", "diffusion.0.3"), Some(6)),
            (CUBIC_MULT.replace("drift.0 = 2 - 0.1*x0 - 0.1*x0^3", "drift.0 = x1"), Some(5)),
            (CUBIC_MULT.replace("initial = normal 5", "initial = uniform"), Some(12)),
            (CUBIC_MULT.replace("growth_l = 2\n", ""), Some(0)),
            (CUBIC_MULT.replace("monotonicity = 0.1\n", ""), Some(0)),
            (format!("{CUBIC_MULT}colour = blue\n"), Some(13)),
            (format!("{CUBIC_MULT}horizon = 2\n"), Some(13)),
            (CUBIC_MULT.replace("monotonicity = 0.1", "monotonicity = -1"), Some(0)),
            (CUBIC_MULT.replace("noise_dim = 1", "noise_dim 1"), Some(4)),
        ];
        for (text, line) in cases {
            match parse_problem_config(&text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(Some(l), line, "{text}"),
                other => panic!("expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_problem_config("/nonexistent/problem.cfg"), Err(Error::Io(_))));
    }

    #[test]
    fn two_dimensional_config() {
        let text = "\
state_dim = 2
noise_dim = 1
drift.0 = -x0 - x0^3
drift.1 = -2*x1
diffusion.1.0 = 0.5*x1 + 1
monotonicity = 1
moment_order = 4
horizon = 2
initial = normal 1 mean 1, -1
";
        let loaded = parse_problem_config(text).unwrap();
        let p = &loaded.problem;
        assert_eq!(p.drift_vec(&[1.0, 2.0]), vec![-2.0, -4.0]);
        assert_eq!(p.diffusion_matrix(&[1.0, 2.0]), vec![0.0, 2.0]);
        assert_eq!(p.diffusion_lipschitz(), Some(0.5));
        assert_eq!(p.horizon(), 2.0);
        assert!(loaded.warnings.is_empty());
    }
}
