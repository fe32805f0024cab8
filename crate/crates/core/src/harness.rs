//! Orchestration: single runs, coupling sweeps with convergence fits, pointer
//! position sampling and report output.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::error::{Result, WeakError};
use crate::evolution::{evolve_exact, post_select, PostSelectionResult};
use crate::pointer::{position_wavefunctions, PointerSpec};
use crate::scenario::Scenario;
use crate::weak::{
    correlator_decomposition, extract_joint_fock, extract_joint_spin, pointer_shift_check,
    scenario_weak_value,
};

/// Coefficient `c` of the default tolerance `c * lambda_max^2 * (1 + |A_W|) + ABS_FLOOR`.
pub const TOLERANCE_COEFF: f64 = 3.0;
pub const ABS_FLOOR: f64 = 1e-9;
/// Relative agreement required between the lowering and correlator routes.
pub const ROUTE_IDENTITY_TOL: f64 = 1e-12;

pub const SWEEP_MAX_LAMBDA: f64 = 0.2;
pub const SWEEP_MIN_POINTS: usize = 4;
/// Fock dimension tried when the leakage guard trips during a sweep.
pub const SWEEP_ESCALATED_DIM: usize = 16;
pub const SLOPE_TARGET: f64 = 2.0;
pub const SLOPE_TOL: f64 = 0.3;
/// Errors at or below `ROUNDOFF_FLOOR * (1 + |A_W|)` carry no convergence information.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

pub const GRID_POINTS: usize = 1 << 12;
pub const GRID_MASS_TOL: f64 = 1e-9;

/// Outcome of one scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakValueReport {
    pub scenario: String,
    pub num_pointers: usize,
    /// `"fock"` or `"spin"`.
    pub pointer_kind: String,
    /// Symmetrized oracle.
    pub analytic: C64,
    pub extracted_lowering: Option<C64>,
    pub extracted_correlators: Option<C64>,
    pub extracted_spin: Option<C64>,
    /// `<X>_fi`, `<P>_fi`; single Fock pointer only.
    pub xp_shift: Option<(f64, f64)>,
    pub prob_success: f64,
    pub lambda_max: f64,
    /// `|primary estimate - analytic|`, primary being the lowering route for
    /// Fock pointers and the spin route for spin pointers.
    pub abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl WeakValueReport {
    pub fn method(&self) -> &'static str {
        if self.extracted_spin.is_some() {
            "spin"
        } else {
            "lowering"
        }
    }

    pub fn primary(&self) -> C64 {
        self.extracted_spin
            .or(self.extracted_lowering)
            .unwrap_or(C64::new(f64::NAN, f64::NAN))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Fock dimension override for every Fock pointer.
    pub dim: Option<usize>,
    /// Absolute tolerance replacing the default policy.
    pub tolerance: Option<f64>,
}

impl RunOptions {
    fn apply(&self, s: &Scenario) -> Scenario {
        match self.dim {
            Some(d) => s.with_fock_dim(d),
            None => s.clone(),
        }
    }
}

/// Default tolerance for a scenario with the given oracle value.
pub fn default_tolerance(lambda_max: f64, analytic: C64) -> f64 {
    TOLERANCE_COEFF * lambda_max * lambda_max * (1.0 + analytic.norm()) + ABS_FLOOR
}

/// Evolves, post-selects and runs every applicable extraction route.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<WeakValueReport> {
    let s = opts.apply(s);
    let ctx = |e: WeakError| e.context(format!("scenario '{}'", s.name));
    s.validate().map_err(ctx)?;
    let analytic = scenario_weak_value(&s).map_err(ctx)?;
    let evolved = evolve_exact(&s).map_err(ctx)?;
    let r = post_select(&evolved, &s).map_err(ctx)?;
    let lambda_max = s.lambda_max();

    let (mut lowering, mut correlators, mut spin, mut xp) = (None, None, None, None);
    let kind;
    if s.all_fock() {
        kind = "fock";
        let low = extract_joint_fock(&r, &s).map_err(ctx)?;
        let (_, corr) = correlator_decomposition(&r, &s).map_err(ctx)?;
        if s.num_pointers() == 1 {
            xp = Some(pointer_shift_check(&r, &s).map_err(ctx)?);
        }
        lowering = Some(low);
        correlators = Some(corr);
    } else if s.all_spin() {
        kind = "spin";
        spin = Some(extract_joint_spin(&r, &s).map_err(ctx)?);
    } else {
        return Err(ctx(WeakError::Unsupported(
            "mixed Fock and spin pointers".into(),
        )));
    }

    let primary = spin.or(lowering).expect("one route ran");
    let abs_error = (primary - analytic).norm();
    let tolerance = opts
        .tolerance
        .unwrap_or_else(|| default_tolerance(lambda_max, analytic));
    let routes_agree = match (lowering, correlators) {
        (Some(l), Some(c)) => (l - c).norm() <= ROUTE_IDENTITY_TOL * l.norm().max(1.0),
        _ => true,
    };
    if !routes_agree {
        log::warn!("{}: lowering and correlator routes disagree", s.name);
    }
    Ok(WeakValueReport {
        scenario: s.name.clone(),
        num_pointers: s.num_pointers(),
        pointer_kind: kind.into(),
        analytic,
        extracted_lowering: lowering,
        extracted_correlators: correlators,
        extracted_spin: spin,
        xp_shift: xp,
        prob_success: r.prob_success,
        lambda_max,
        abs_error,
        tolerance,
        pass: abs_error <= tolerance && routes_agree,
    })
}

/// Resolves a catalog name or path and runs it.
pub fn run_experiment(reference: &str) -> Result<WeakValueReport> {
    run_experiment_with(reference, &RunOptions::default())
}

pub fn run_experiment_with(reference: &str, opts: &RunOptions) -> Result<WeakValueReport> {
    run_scenario(&catalog::resolve(reference)?, opts)
}

// --- sweeps ----------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    /// Strictly decreasing.
    pub lambda_grid: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    /// Fock dimension used for every point.
    pub dim: Option<usize>,
    pub reports: Vec<WeakValueReport>,
}

impl SweepResult {
    pub fn slope_ok(&self) -> bool {
        (self.fitted_slope - SLOPE_TARGET).abs() <= SLOPE_TOL
    }
}

/// Parses a comma-separated list of coupling strengths.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>()
                .map_err(|e| WeakError::Precondition(format!("grid entry {i} ('{t}'): {e}")))
        })
        .collect()
}

/// Sorts the grid into strictly decreasing order and checks its range.
pub fn check_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.len() < SWEEP_MIN_POINTS {
        return Err(WeakError::Precondition(format!(
            "sweep needs at least {SWEEP_MIN_POINTS} grid points, got {}",
            grid.len()
        )));
    }
    if let Some(bad) = grid.iter().find(|&&l| !(l > 0.0 && l <= SWEEP_MAX_LAMBDA)) {
        return Err(WeakError::Precondition(format!(
            "grid value {bad} outside (0, {SWEEP_MAX_LAMBDA}]"
        )));
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    if g.windows(2).any(|w| w[0] == w[1]) {
        return Err(WeakError::Precondition(
            "grid values must be distinct".into(),
        ));
    }
    Ok(g)
}

/// Least-squares line through `(x, y)`: returns `(slope, intercept)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn fock_dim(s: &Scenario) -> Option<usize> {
    s.pointers.iter().find_map(|p| match p {
        PointerSpec::Fock(f) => Some(f.dim),
        PointerSpec::Spin(_) => None,
    })
}

fn sweep_points(s: &Scenario, grid: &[f64], opts: &RunOptions) -> Vec<Result<WeakValueReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&l| {
                let point = s.with_lambda(l);
                scope.spawn(move || run_scenario(&point, opts))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

/// Reruns the scenario at each lambda (rescaling gt, holding sigma and d) and
/// fits `log(error)` against `log(lambda)`.
pub fn sweep_scenario(s: &Scenario, grid: &[f64], opts: &RunOptions) -> Result<SweepResult> {
    let grid = check_grid(grid)?;
    let mut s = opts.apply(s);
    let opts = RunOptions { dim: None, ..*opts };
    let mut results = sweep_points(&s, &grid, &opts);
    let leaks = |r: &Result<WeakValueReport>| matches!(r, Err(e) if matches!(e.root(), WeakError::TruncationLeakage { .. }));
    if results.iter().any(leaks)
        && s.all_fock()
        && fock_dim(&s).is_some_and(|d| d < SWEEP_ESCALATED_DIM)
    {
        log::info!(
            "{}: leakage guard tripped, escalating Fock dimension to {SWEEP_ESCALATED_DIM}",
            s.name
        );
        s = s.with_fock_dim(SWEEP_ESCALATED_DIM);
        results = sweep_points(&s, &grid, &opts);
    }
    let mut reports = Vec::with_capacity(grid.len());
    for (l, r) in grid.iter().zip(results) {
        let d = fock_dim(&s).map_or_else(|| "spin".to_string(), |d| d.to_string());
        reports.push(r.map_err(|e| e.context(format!("sweep point lambda = {l}, d = {d}")))?);
    }
    let errors: Vec<f64> = reports.iter().map(|r| r.abs_error).collect();
    let floor = ROUNDOFF_FLOOR * (1.0 + reports[0].analytic.norm());
    if let Some((l, e)) = grid.iter().zip(&errors).find(|(_, &e)| e.is_nan() || e <= floor) {
        return Err(WeakError::Precondition(format!(
            "extraction error {e:.1e} at lambda = {l} is at round-off level; the convergence slope is undefined"
        )));
    }
    let lx: Vec<f64> = grid.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (fitted_slope, fitted_intercept) = fit_line(&lx, &ly);
    Ok(SweepResult {
        scenario: s.name.clone(),
        lambda_grid: grid,
        errors,
        fitted_slope,
        fitted_intercept,
        dim: fock_dim(&s),
        reports,
    })
}

pub fn sweep_lambda(reference: &str, grid: &[f64]) -> Result<SweepResult> {
    sweep_scenario(&catalog::resolve(reference)?, grid, &RunOptions::default())
}

// --- sampling --------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub pointer_index: usize,
    pub positions: Vec<f64>,
    pub n_shots: usize,
    pub seed: u64,
}

impl SampleSet {
    pub fn mean(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.positions.len() as f64
    }

    /// Sample standard deviation over `sqrt(n)`.
    pub fn standard_error(&self) -> f64 {
        let n = self.positions.len() as f64;
        let m = self.mean();
        let var = self
            .positions
            .iter()
            .map(|x| (x - m) * (x - m))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Reduced density matrix of one pointer of the conditioned state.
pub fn reduced_density(r: &PostSelectionResult, pointer_index: usize) -> Result<DMatrix<C64>> {
    let dims = r.conditioned.layout().dims().to_vec();
    if pointer_index >= dims.len() {
        return Err(WeakError::SlotOutOfRange {
            slot: pointer_index,
            factors: dims.len(),
        });
    }
    let d = dims[pointer_index];
    let inner: usize = dims[pointer_index + 1..].iter().product();
    let outer: usize = dims[..pointer_index].iter().product();
    let amps = r.conditioned.amps();
    let mut rho = DMatrix::zeros(d, d);
    for o in 0..outer {
        for i in 0..inner {
            for n in 0..d {
                let a = amps[(o * d + n) * inner + i];
                for m in 0..d {
                    rho[(n, m)] += a * amps[(o * d + m) * inner + i].conj();
                }
            }
        }
    }
    Ok(rho)
}

/// Position grid and density of one Fock pointer of the conditioned state.
pub fn position_density(
    r: &PostSelectionResult,
    pointer_index: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(PointerSpec::Fock(f)) = r.pointers.get(pointer_index) else {
        return Err(WeakError::Unsupported(format!(
            "pointer {pointer_index} is not a Fock pointer"
        )));
    };
    let rho = reduced_density(r, pointer_index)?;
    let half = 6.0 * f.sigma + 4.0 * f.sigma * (f.dim as f64).sqrt();
    let step = 2.0 * half / (GRID_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..GRID_POINTS).map(|k| -half + k as f64 * step).collect();
    let psi = position_wavefunctions(f.sigma, f.dim, &xs);
    // The wavefunctions are real, so only Re(rho) contributes.
    let density = (0..GRID_POINTS)
        .map(|k| {
            let mut v = 0.0;
            for n in 0..f.dim {
                for m in 0..f.dim {
                    v += rho[(n, m)].re * psi[n][k] * psi[m][k];
                }
            }
            v.max(0.0)
        })
        .collect();
    Ok((xs, density))
}

/// Draws `n_shots` pointer positions by inverse-CDF sampling with a
/// ChaCha20 generator seeded from `seed`.
pub fn sample_positions(
    r: &PostSelectionResult,
    pointer_index: usize,
    n_shots: usize,
    seed: u64,
) -> Result<SampleSet> {
    if n_shots == 0 {
        return Err(WeakError::Precondition("n_shots must be positive".into()));
    }
    let (xs, density) = position_density(r, pointer_index)?;
    let mut cdf = Vec::with_capacity(xs.len());
    cdf.push(0.0);
    for k in 1..xs.len() {
        let prev = cdf[k - 1];
        cdf.push(prev + 0.5 * (density[k] + density[k - 1]) * (xs[k] - xs[k - 1]));
    }
    let mass = *cdf.last().expect("grid is nonempty");
    if (1.0 - mass).abs() > GRID_MASS_TOL {
        return Err(WeakError::Grid {
            mass: (1.0 - mass).abs(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let positions = (0..n_shots)
        .map(|_| {
            let u = rng.random::<f64>() * mass;
            let k = cdf.partition_point(|&c| c <= u).clamp(1, xs.len() - 1);
            let (c0, c1) = (cdf[k - 1], cdf[k]);
            let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
            xs[k - 1] + t * (xs[k] - xs[k - 1])
        })
        .collect();
    Ok(SampleSet {
        pointer_index,
        positions,
        n_shots,
        seed,
    })
}

// --- reports ---------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub enum Results<'a> {
    Runs(&'a [WeakValueReport]),
    Sweep(&'a SweepResult),
}

pub const CSV_HEADER: &str =
    "scenario,method,lambda,re_extracted,im_extracted,re_analytic,im_analytic,abs_error,prob_success,pass";

/// Twelve significant digits.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn csv_row(out: &mut String, r: &WeakValueReport) {
    let e = r.primary();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        r.scenario,
        r.method(),
        num(r.lambda_max),
        num(e.re),
        num(e.im),
        num(r.analytic.re),
        num(r.analytic.im),
        num(r.abs_error),
        num(r.prob_success),
        r.pass
    );
}

/// Renders results as CSV or JSON text.
pub fn render(results: &Results<'_>, format: Format) -> Result<String> {
    let empty = match results {
        Results::Runs(r) => r.is_empty(),
        Results::Sweep(s) => s.reports.is_empty(),
    };
    if empty {
        return Err(WeakError::Precondition("no results to report".into()));
    }
    let json = |v: serde_json::Result<String>| v.map_err(|e| WeakError::Numerical(e.to_string()));
    Ok(match (results, format) {
        (Results::Runs(runs), Format::Json) => json(serde_json::to_string_pretty(runs))?,
        (Results::Sweep(s), Format::Json) => json(serde_json::to_string_pretty(s))?,
        (Results::Runs(runs), Format::Csv) => {
            let mut out = format!("{CSV_HEADER}\n");
            for r in runs.iter() {
                csv_row(&mut out, r);
            }
            out
        }
        (Results::Sweep(s), Format::Csv) => {
            let mut out = format!("{CSV_HEADER}\n");
            for r in &s.reports {
                csv_row(&mut out, r);
            }
            // summary: slope and intercept in the extracted columns
            let _ = writeln!(
                out,
                "{},slope_fit,,{},{},,,,,{}",
                s.scenario,
                num(s.fitted_slope),
                num(s.fitted_intercept),
                s.slope_ok()
            );
            out
        }
    })
}

/// Writes rendered results to `destination`, or stdout when `None`.
pub fn emit_report(
    results: &Results<'_>,
    format: Format,
    destination: Option<&Path>,
) -> Result<()> {
    let text = render(results, format)?;
    match destination {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| WeakError::from(e).context(path.display().to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
