//! Monte Carlo harness for the power study: data generation with nonlinear
//! and heteroskedastic additive noise, and accuracy over parameter grids.
//!
//! Model:
//!
//! ```text
//! X ~ N(0, 2), W ~ N(0, 1), U* ~ N(0, 1) independent
//! U = c * sgn(U*) * |(1 + phi(W))^(rho/2) * U*|^q
//! Y = kappa(X, W, tau) + U
//! kappa1 = x + tau x^2 + w
//! kappa2 = x + tau sin(x + pi/2) + w + w^2
//! ```
//!
//! `c` rescales `U` to a target variance.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::classifier::{decide, Outcome, ProblemSpec};
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

pub const GAUSS_HERMITE_NODES: usize = 64;

/// Regression function of the outcome on cause and control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kappa {
    /// `x + tau x^2 + w`
    K1,
    /// `x + tau sin(x + pi/2) + w + w^2`
    K2,
}

impl Kappa {
    pub fn eval(self, x: f64, w: f64, tau: f64) -> f64 {
        match self {
            Kappa::K1 => x + tau * x * x + w,
            Kappa::K2 => x + tau * (x + FRAC_PI_2).sin() + w + w * w,
        }
    }

    fn id(self) -> u8 {
        match self {
            Kappa::K1 => 1,
            Kappa::K2 => 2,
        }
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.id())
    }
}

impl FromStr for Kappa {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "k1" | "1" | "kappa1" => Ok(Kappa::K1),
            "k2" | "2" | "kappa2" => Ok(Kappa::K2),
            other => Err(Error::invalid(format!("unknown kappa `{other}` (use k1 or k2)"))),
        }
    }
}

/// One cell of a simulation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub kappa: Kappa,
    pub tau: f64,
    /// 0 (homoskedastic) or 1.
    pub rho: u8,
    pub q: f64,
    pub n: usize,
    pub target_var: f64,
}

impl Cell {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::invalid(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.rho > 1 {
            return Err(Error::invalid(format!("rho must be 0 or 1, got {}", self.rho)));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::invalid(format!("q must be > 0, got {}", self.q)));
        }
        if self.n < 8 {
            return Err(Error::invalid(format!("n must be >= 8, got {}", self.n)));
        }
        if !(self.target_var.is_finite() && self.target_var > 0.0) {
            return Err(Error::invalid(format!(
                "target variance must be > 0, got {}",
                self.target_var
            )));
        }
        Ok(())
    }

    /// Hash of the cell parameters, stable across runs and platforms.
    fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write(&[self.kappa.id(), self.rho]);
        h.write(&self.tau.to_bits().to_le_bytes());
        h.write(&self.q.to_bits().to_le_bytes());
        h.write(&(self.n as u64).to_le_bytes());
        h.write(&self.target_var.to_bits().to_le_bytes());
        h.finish()
    }
}

/// A grid cell plus the seed of one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpConfig {
    pub cell: Cell,
    pub seed: u64,
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        splitmix64(self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `rep` of `cell`; independent of execution order.
pub fn replicate_seed(base_seed: u64, cell: &Cell, rep: usize) -> u64 {
    let mut h = Fnv64::new();
    h.write(&cell.fingerprint().to_le_bytes());
    h.write(&(rep as u64).to_le_bytes());
    base_seed ^ h.finish()
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Nodes and weights of the physicists' Gauss-Hermite rule (weight `exp(-x^2)`).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // pi^(-1/4)
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let prev = z;
            z = prev - p1 / pp;
            if (z - prev).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(GAUSS_HERMITE_NODES))
}

/// `E[f(W)]` for standard normal `W` by 64-node Gauss-Hermite quadrature.
pub fn normal_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = hermite_rule();
    x.iter()
        .zip(w)
        .map(|(xi, wi)| wi * f(std::f64::consts::SQRT_2 * xi))
        .sum::<f64>()
        / PI.sqrt()
}

/// `E|Z|^(2q) = 2^q Gamma(q + 1/2) / sqrt(pi)` for standard normal `Z`.
pub fn abs_normal_moment(q: f64) -> f64 {
    2f64.powf(q) * gamma(q + 0.5) / PI.sqrt()
}

/// Constant `c` that gives the error term variance `target_var`.
///
/// `Var(U) = c^2 E[(1 + phi(W))^(rho q)] E|U*|^(2q)`, the power `q` acting
/// on the heteroskedastic scale as well as on `U*`.
pub fn variance_constant(rho: u8, q: f64, target_var: f64) -> Result<f64> {
    if rho > 1 {
        return Err(Error::invalid(format!("rho must be 0 or 1, got {rho}")));
    }
    if !(q.is_finite() && q > 0.0) || !(target_var.is_finite() && target_var > 0.0) {
        return Err(Error::invalid("q and target variance must be finite and > 0"));
    }
    let scale_moment = if rho == 0 {
        1.0
    } else {
        let exponent = f64::from(rho) * q;
        normal_expectation(|w| (1.0 + std_normal_pdf(w)).powf(exponent))
    };
    Ok((target_var / (scale_moment * abs_normal_moment(q))).sqrt())
}

/// One draw of the error term from `W` and `U*`; `sgn(0) = 0`.
pub fn error_term(c: f64, rho: u8, q: f64, w: f64, u_star: f64) -> f64 {
    if u_star == 0.0 {
        return 0.0;
    }
    let scaled = (1.0 + std_normal_pdf(w)).powf(f64::from(rho) / 2.0) * u_star;
    c * u_star.signum() * scaled.abs().powf(q)
}

/// Raw draws behind a sample, kept for tests of the generator itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub u_star: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn draw(cfg: &DgpConfig) -> Result<Draws> {
    let cell = &cfg.cell;
    cell.validate()?;
    let c = variance_constant(cell.rho, cell.q, cell.target_var)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cell.n;
    let mut d = Draws {
        x: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        u_star: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
    };
    let sd_x = 2f64.sqrt();
    for _ in 0..n {
        let x = sd_x * rng.sample::<f64, _>(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        let u_star: f64 = rng.sample(StandardNormal);
        let u = error_term(c, cell.rho, cell.q, w, u_star);
        d.y.push(cell.kappa.eval(x, w, cell.tau) + u);
        d.x.push(x);
        d.w.push(w);
        d.u_star.push(u_star);
        d.u.push(u);
    }
    Ok(d)
}

/// Dataset with columns `y`, `x`, `w`; deterministic in the seed.
pub fn draw_sample(cfg: &DgpConfig) -> Result<Dataset> {
    let d = draw(cfg)?;
    Dataset::new(vec![
        Column::continuous("y", d.y),
        Column::continuous("x", d.x),
        Column::continuous("w", d.w),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    /// Replicates that produced a decision.
    pub n_reps: usize,
    pub n_correct: usize,
    pub n_failed: usize,
    /// `n_correct / n_reps`; NaN when every replicate failed.
    pub accuracy: f64,
    /// Summed wall time of the replicates.
    pub seconds: f64,
    /// First failure message, if any.
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    pub reps: usize,
    pub base_seed: u64,
}

/// Runs one replicate: draws, classifies with x as the true cause.
pub fn run_replicate(cell: &Cell, base_seed: u64, rep: usize) -> Result<Outcome> {
    let seed = replicate_seed(base_seed, cell, rep);
    let data = draw_sample(&DgpConfig { cell: *cell, seed })?;
    let spec = ProblemSpec::new("x", "y", &["w"])?.with_seed(splitmix64(seed));
    Ok(decide(&data, &spec)?.outcome)
}

/// Accuracy of the classifier per cell. Replicates run in parallel; results
/// do not depend on scheduling.
pub fn run_grid(grid: &[Cell], reps: usize, base_seed: u64) -> Result<GridResult> {
    if reps == 0 {
        return Err(Error::invalid("reps must be >= 1"));
    }
    for cell in grid {
        cell.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<(usize, Result<Outcome>, f64)> = jobs
        .into_par_iter()
        .map(|(c, r)| {
            let start = Instant::now();
            let out = run_replicate(&grid[c], base_seed, r);
            (c, out, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut cells: Vec<CellResult> = grid
        .iter()
        .map(|cell| CellResult {
            cell: *cell,
            n_reps: 0,
            n_correct: 0,
            n_failed: 0,
            accuracy: f64::NAN,
            seconds: 0.0,
            first_failure: None,
        })
        .collect();
    for (c, out, secs) in outcomes {
        let res = &mut cells[c];
        res.seconds += secs;
        match out {
            Ok(o) => {
                res.n_reps += 1;
                if o == Outcome::CausalXtoY {
                    res.n_correct += 1;
                }
            }
            Err(e) => {
                res.n_failed += 1;
                res.first_failure.get_or_insert_with(|| e.to_string());
            }
        }
    }
    for res in &mut cells {
        if res.n_reps > 0 {
            res.accuracy = res.n_correct as f64 / res.n_reps as f64;
        }
    }
    Ok(GridResult {
        cells,
        reps,
        base_seed,
    })
}

/// Cartesian product in the order kappa, tau, rho, q, n, target variance.
pub fn cartesian_grid(
    kappas: &[Kappa],
    taus: &[f64],
    rhos: &[u8],
    qs: &[f64],
    ns: &[usize],
    target_vars: &[f64],
) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &kappa in kappas {
        for &tau in taus {
            for &rho in rhos {
                for &q in qs {
                    for &n in ns {
                        for &target_var in target_vars {
                            cells.push(Cell {
                                kappa,
                                tau,
                                rho,
                                q,
                                n,
                                target_var,
                            });
                        }
                    }
                }
            }
        }
    }
    cells
}

pub const DEFAULT_TAUS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
pub const DEFAULT_RHOS: [u8; 2] = [0, 1];
pub const DEFAULT_QS: [f64; 3] = [0.5, 1.0, 1.5];
pub const DEFAULT_NS: [usize; 3] = [250, 500, 1000];
pub const FULL_TARGET_VARS: [f64; 3] = [0.8, 1.0, 1.2];
