//! Multi-start Nelder–Mead maximization of `K3` over the six experiment
//! coordinates, γ sweeps, and the fixed-measurement heat map.
//!
//! Search coordinates are `[θ, φ, θ_m, φ_m, t2, t3 − t2]`. Starting points
//! come from a Halton sequence under a seeded random shift, so a given seed
//! and settings always reproduce the same rows bit for bit.

use std::cell::Cell;
use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::lgi::{self, canonical_angles, LGIConfig, MeasurementDirection};
use crate::nhq::{PTParams, Regime};

/// Number of search coordinates.
pub const DIM: usize = 6;

/// Smallest admissible `t2` and `t3 − t2`, in units of `1/J`.
pub const TIME_FLOOR: f64 = 1e-9;

/// Default time window in units of `1/J`.
pub const DEFAULT_T_MAX: f64 = 50.0;

/// Objective values closer than this count as ties.
pub const TIE_TOL: f64 = 1e-9;

/// Largest allowed gap between the optimizer's value and a fresh evaluation.
pub const REEVALUATION_TOL: f64 = 1e-10;

/// Indices into the coordinate vector.
pub mod coord {
    pub const THETA: usize = 0;
    pub const PHI: usize = 1;
    pub const THETA_M: usize = 2;
    pub const PHI_M: usize = 3;
    pub const T2: usize = 4;
    pub const DT: usize = 5;
}

/// Box bounds plus coordinates held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub t_max: f64,
    /// `Some(v)` pins a coordinate to `v`.
    pub frozen: [Option<f64>; DIM],
}

impl SearchSpace {
    /// All six coordinates free with `t2, t3 − t2 ∈ [TIME_FLOOR/J, t_max]`.
    pub fn new(t_max: f64) -> Result<Self> {
        if !(t_max > TIME_FLOOR) || !t_max.is_finite() {
            return Err(Error::domain(format!(
                "t_max must be finite and positive, got {t_max}"
            )));
        }
        Ok(SearchSpace {
            t_max,
            frozen: [None; DIM],
        })
    }

    /// Window `[0, 50/J]`.
    pub fn default_for(p: PTParams) -> Self {
        SearchSpace {
            t_max: DEFAULT_T_MAX / p.j,
            frozen: [None; DIM],
        }
    }

    pub fn with_frozen(mut self, index: usize, value: f64) -> Self {
        self.frozen[index] = Some(value);
        self
    }

    /// Pins `θ_m, φ_m` to the given direction.
    pub fn with_measurement(self, n: MeasurementDirection) -> Self {
        self.with_frozen(coord::THETA_M, n.theta_m)
            .with_frozen(coord::PHI_M, n.phi_m)
    }

    pub fn bounds(&self, j: f64) -> [(f64, f64); DIM] {
        let floor = TIME_FLOOR / j;
        [
            (0.0, PI),
            (0.0, 2.0 * PI),
            (0.0, PI),
            (0.0, 2.0 * PI),
            (floor, self.t_max),
            (floor, self.t_max),
        ]
    }

    pub fn active(&self) -> Vec<usize> {
        (0..DIM).filter(|&i| self.frozen[i].is_none()).collect()
    }

    fn validate(&self, j: f64) -> Result<()> {
        for (i, (lo, hi)) in self.bounds(j).iter().enumerate() {
            if self.frozen[i].is_none() && !(lo < hi) {
                return Err(Error::domain(format!("empty range for coordinate {i}")));
            }
            if let Some(v) = self.frozen[i] {
                if !v.is_finite() {
                    return Err(Error::NonFinite("frozen coordinate"));
                }
            }
        }
        Ok(())
    }
}

/// Multi-start and simplex controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub n_starts: usize,
    /// Used instead of `n_starts` in the broken phase.
    pub n_starts_broken: usize,
    pub seed: u64,
    /// Simplex diameter at which a run stops.
    pub tol: f64,
    /// Objective evaluations per start.
    pub max_evals: usize,
    /// Initial simplex edge as a fraction of each coordinate's range.
    pub initial_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            n_starts: 64,
            n_starts_broken: 128,
            seed: 0,
            tol: 1e-8,
            max_evals: 20_000,
            initial_step: 0.05,
        }
    }
}

impl OptimizerSettings {
    pub fn starts_for(&self, regime: Regime) -> usize {
        match regime {
            Regime::Broken => self.n_starts_broken,
            _ => self.n_starts,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.n_starts_broken == 0 {
            return Err(Error::domain("n_starts must be at least 1"));
        }
        if !(self.tol > 0.0) || self.max_evals == 0 || !(self.initial_step > 0.0) {
            return Err(Error::domain(
                "tol, max_evals and initial_step must be positive",
            ));
        }
        Ok(())
    }
}

/// Outcome of [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Stopped on the evaluation budget rather than the diameter test.
    pub budget_exhausted: bool,
    /// Best simplex value after each iteration; never decreases.
    pub history: Vec<f64>,
}

/// Reflects `x` back into `[lo, hi]` as often as needed.
pub fn fold_into(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    let y = (x - lo).rem_euclid(2.0 * w);
    lo + if y > w { 2.0 * w - y } else { y }
}

/// Maximizes `objective` over the box `bounds` starting from `x0`.
///
/// Trial points outside the box are folded back by reflection. `steps` sets
/// the initial simplex edge along each coordinate.
pub fn nelder_mead<F>(
    mut objective: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    steps: &[f64],
    tol: f64,
    max_evals: usize,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(bounds.len() == n && steps.len() == n, "dimension mismatch");
    let fold = |x: &mut Vec<f64>| {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = fold_into(*v, lo, hi);
        }
    };
    let evals = Cell::new(0usize);
    // Minimize the negated objective; NaN ranks worst.
    let mut eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let f = objective(x);
        if f.is_nan() {
            f64::INFINITY
        } else {
            -f
        }
    };

    let mut base = x0.to_vec();
    fold(&mut base);
    let mut simplex = vec![base.clone()];
    for i in 0..n {
        let mut v = base.clone();
        v[i] += steps[i];
        fold(&mut v);
        if v[i] == base[i] {
            v[i] = base[i] - steps[i];
            fold(&mut v);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut history = Vec::new();
    let mut exhausted = false;

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        history.push(-values[0]);

        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if diameter < tol {
            break;
        }
        if evals.get() >= max_evals {
            exhausted = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(from)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            fold(&mut p);
            p
        };
        let worst = simplex[n].clone();
        let xr = along(1.0, &worst);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(2.0, &worst);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < values[n] {
            let xc = along(0.5, &worst);
            let fc = eval(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(-0.5, &worst);
            let fc = eval(&xc);
            (xc, fc, fc < values[n])
        };
        if accept {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            let mut v: Vec<f64> = best
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            fold(&mut v);
            values[i] = eval(&v);
            simplex[i] = v;
        }
    }
    NelderMeadResult {
        x: simplex[0].clone(),
        f: -values[0],
        evaluations: evals.get(),
        budget_exhausted: exhausted,
        history,
    }
}

const PRIMES: [u64; DIM] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut x = 0.0;
    while k > 0 {
        x += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    x
}

/// `count` points of the `dim`-dimensional Halton sequence in `[0, 1)^dim`,
/// shifted modulo 1 by a vector drawn from `seed`.
pub fn shifted_halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|k| {
            (0..dim)
                .map(|d| (radical_inverse(k, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

/// One row of a γ scan: the best `K3` and where it was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub gamma: f64,
    pub k3_max: f64,
    pub theta: f64,
    pub phi: f64,
    pub theta_m: f64,
    pub phi_m: f64,
    pub t2: f64,
    pub t3: f64,
}

impl ScanRow {
    pub fn config(&self) -> Result<LGIConfig> {
        LGIConfig::new(
            self.theta,
            self.phi,
            self.theta_m,
            self.phi_m,
            self.t2,
            self.t3,
        )
    }
}

/// Per-start record of [`maximize_k3`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartResult {
    pub index: usize,
    pub start: [f64; DIM],
    pub row: ScanRow,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

/// Best row and every start that led to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub best: ScanRow,
    pub starts: Vec<StartResult>,
}

fn full_coords(space: &SearchSpace, active: &[usize], x: &[f64]) -> [f64; DIM] {
    let mut out = space.frozen.map(|f| f.unwrap_or(0.0));
    for (&i, &v) in active.iter().zip(x) {
        out[i] = v;
    }
    out
}

fn config_of(c: &[f64; DIM]) -> Result<LGIConfig> {
    LGIConfig::new(c[0], c[1], c[2], c[3], c[4], c[4] + c[5])
}

/// `K3` at a coordinate vector, `−∞` where it cannot be evaluated.
fn objective(c: &[f64; DIM], p: PTParams) -> f64 {
    match config_of(c).and_then(|cfg| lgi::k3(&cfg, p)) {
        Ok(r) => r.k3,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Representative of a configuration under the symmetries of `K3`:
/// angles wrapped to `[0, π] × [0, 2π)` and `n → −n` applied so that
/// `φ_m ∈ [0, π)`. Flipping `n` swaps both outcome labels and leaves every
/// correlator unchanged.
pub fn canonical_row(gamma: f64, k3: f64, c: &[f64; DIM]) -> ScanRow {
    let (theta, phi) = canonical_angles(c[0], c[1]);
    let (mut theta_m, mut phi_m) = canonical_angles(c[2], c[3]);
    if phi_m >= PI {
        theta_m = PI - theta_m;
        phi_m -= PI;
    }
    ScanRow {
        gamma,
        k3_max: k3,
        theta,
        phi,
        theta_m,
        phi_m,
        t2: c[4],
        t3: c[4] + c[5],
    }
}

fn better(a: &ScanRow, b: &ScanRow) -> bool {
    if (a.k3_max - b.k3_max).abs() < TIE_TOL {
        a.t3 < b.t3
    } else {
        a.k3_max > b.k3_max
    }
}

/// Maximizes `K3` at fixed `(J, γ)` from `settings.starts_for(regime)`
/// low-discrepancy starts, each polished by Nelder–Mead and restarted once
/// from its optimum. The winning row is re-evaluated through [`lgi::k3`].
pub fn maximize_k3(
    p: PTParams,
    space: &SearchSpace,
    settings: &OptimizerSettings,
) -> Result<Maximum> {
    settings.validate()?;
    space.validate(p.j)?;
    let bounds_all = space.bounds(p.j);
    let active = space.active();
    let bounds: Vec<(f64, f64)> = active.iter().map(|&i| bounds_all[i]).collect();
    let steps: Vec<f64> = bounds
        .iter()
        .map(|(lo, hi)| settings.initial_step * (hi - lo))
        .collect();
    let n_starts = settings.starts_for(p.regime());
    let starts = shifted_halton(active.len(), n_starts, settings.seed);

    let results: Vec<StartResult> = starts
        .par_iter()
        .enumerate()
        .map(|(index, u)| {
            let x0: Vec<f64> = u
                .iter()
                .zip(&bounds)
                .map(|(u, (lo, hi))| lo + u * (hi - lo))
                .collect();
            let f = |x: &[f64]| objective(&full_coords(space, &active, x), p);
            let first = nelder_mead(f, &x0, &bounds, &steps, settings.tol, settings.max_evals);
            let budget = settings.max_evals.saturating_sub(first.evaluations).max(1);
            let small: Vec<f64> = steps.iter().map(|s| 0.1 * s).collect();
            let second = nelder_mead(f, &first.x, &bounds, &small, settings.tol, budget);
            let run = if second.f > first.f { &second } else { &first };
            let c = full_coords(space, &active, &run.x);
            StartResult {
                index,
                start: full_coords(space, &active, &x0),
                row: canonical_row(p.gamma, run.f, &c),
                evaluations: first.evaluations + second.evaluations,
                budget_exhausted: run.budget_exhausted,
            }
        })
        .collect();

    let mut best = results[0].row;
    for r in &results[1..] {
        if better(&r.row, &best) {
            best = r.row;
        }
    }
    let fresh = lgi::k3(&best.config()?, p)?.k3;
    if (fresh - best.k3_max).abs() > REEVALUATION_TOL {
        return Err(Error::InternalInconsistency(format!(
            "re-evaluated K3 {fresh} differs from optimizer value {}",
            best.k3_max
        )));
    }
    best.k3_max = fresh;
    Ok(Maximum {
        best,
        starts: results,
    })
}

/// [`maximize_k3`] for each `γ ∈ (0, 4]`, rows in input order.
pub fn gamma_scan(
    j: f64,
    gammas: &[f64],
    space: &SearchSpace,
    settings: &OptimizerSettings,
) -> Result<Vec<ScanRow>> {
    for &g in gammas {
        if !(g > 0.0 && g <= 4.0 * j) {
            return Err(Error::domain(format!(
                "scan gammas must lie in (0, 4J], got {g}"
            )));
        }
    }
    gammas
        .iter()
        .map(|&g| Ok(maximize_k3(PTParams::new(j, g)?, space, settings)?.best))
        .collect()
}

/// Columns `gamma,k3_max,theta,phi,theta_m,phi_m,t2,t3`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], w: W) -> Result<()> {
    export::write_csv(
        w,
        &[
            "gamma", "k3_max", "theta", "phi", "theta_m", "phi_m", "t2", "t3",
        ],
        rows.iter().map(|r| {
            vec![
                r.gamma, r.k3_max, r.theta, r.phi, r.theta_m, r.phi_m, r.t2, r.t3,
            ]
        }),
    )
}

/// Grid over initial-state angles for [`fixed_measurement_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    /// Points on `θ ∈ [0, π]`, endpoints included.
    pub n_theta: usize,
    /// Points on `φ ∈ [0, 2π)`, upper end excluded.
    pub n_phi: usize,
}

impl Default for AngleGrid {
    /// 51 × 52, so that `θ = π/2` and `φ ∈ {π/2, 3π/2}` are grid points.
    fn default() -> Self {
        AngleGrid {
            n_theta: 51,
            n_phi: 52,
        }
    }
}

impl AngleGrid {
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for i in 0..self.n_theta {
            for k in 0..self.n_phi {
                let th = PI * i as f64 / (self.n_theta - 1) as f64;
                out.push((th, 2.0 * PI * k as f64 / self.n_phi as f64));
            }
        }
        out
    }
}

/// One heat-map cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub theta: f64,
    pub phi: f64,
    pub k3: f64,
}

/// Result of [`fixed_measurement_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedScan {
    pub k3_max: f64,
    pub theta_star: f64,
    pub phi_star: f64,
    pub t2_star: f64,
    pub t3_star: f64,
    pub rows: Vec<HeatmapRow>,
}

/// For each grid point, maximizes `K3` over `t2, t3` only, with the
/// measurement fixed to `n`. Uses `settings.n_starts` time starts per cell.
pub fn fixed_measurement_scan(
    p: PTParams,
    n: MeasurementDirection,
    grid: AngleGrid,
    space: &SearchSpace,
    settings: &OptimizerSettings,
) -> Result<FixedScan> {
    if grid.n_theta < 2 || grid.n_phi < 1 {
        return Err(Error::domain(
            "grid needs at least 2 theta points and 1 phi point",
        ));
    }
    let cells: Vec<Result<ScanRow>> = grid
        .points()
        .par_iter()
        .map(|&(th, ph)| {
            let cell_space = space
                .with_measurement(n)
                .with_frozen(coord::THETA, th)
                .with_frozen(coord::PHI, ph);
            let cell_settings = OptimizerSettings {
                n_starts_broken: settings.n_starts,
                ..*settings
            };
            let mut best = maximize_k3(p, &cell_space, &cell_settings)?.best;
            // Report the grid coordinates rather than their canonical images.
            best.theta = th;
            best.phi = ph;
            Ok(best)
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut best: Option<ScanRow> = None;
    for cell in cells {
        let cell = cell?;
        rows.push(HeatmapRow {
            theta: cell.theta,
            phi: cell.phi,
            k3: cell.k3_max,
        });
        if best.as_ref().is_none_or(|b| better(&cell, b)) {
            best = Some(cell);
        }
    }
    let best = best.expect("non-empty grid");
    Ok(FixedScan {
        k3_max: best.k3_max,
        theta_star: best.theta,
        phi_star: best.phi,
        t2_star: best.t2,
        t3_star: best.t3,
        rows,
    })
}

/// Columns `theta,phi,k3`.
pub fn write_heatmap_csv<W: Write>(rows: &[HeatmapRow], w: W) -> Result<()> {
    export::write_csv(
        w,
        &["theta", "phi", "k3"],
        rows.iter().map(|r| vec![r.theta, r.phi, r.k3]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(gamma: f64) -> PTParams {
        PTParams::new(1.0, gamma).unwrap()
    }

    #[test]
    fn folding() {
        assert_eq!(fold_into(0.5, 0.0, 1.0), 0.5);
        assert_abs_diff_eq!(fold_into(1.2, 0.0, 1.0), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(fold_into(-0.3, 0.0, 1.0), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(fold_into(2.7, 0.0, 1.0), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| -x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>();
        let r = nelder_mead(f, &[0.9; 6], &[(0.0, 1.0); 6], &[0.1; 6], 1e-8, 20_000);
        assert!(!r.budget_exhausted);
        for v in &r.x {
            assert_abs_diff_eq!(*v, 0.3, epsilon = 1e-6);
        }
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        let again = nelder_mead(f, &r.x, &[(0.0, 1.0); 6], &[0.01; 6], 1e-8, 20_000);
        assert!((again.f - r.f).abs() < 1e-8);
    }

    #[test]
    fn budget_flag() {
        let f = |x: &[f64]| -x[0].powi(2) - x[1].powi(2);
        let r = nelder_mead(f, &[0.9, 0.9], &[(-1.0, 1.0); 2], &[0.5; 2], 1e-14, 20);
        assert!(r.budget_exhausted);
        assert!(r.evaluations >= 20);
    }

    #[test]
    fn halton_is_reproducible_and_in_range() {
        let a = shifted_halton(6, 16, 3);
        let b = shifted_halton(6, 16, 3);
        assert_eq!(a, b);
        assert_ne!(a, shifted_halton(6, 16, 4));
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn time_only_search_improves_monotonically() {
        let pp = p(3.0);
        let space = SearchSpace::default_for(pp)
            .with_frozen(coord::THETA, 0.73)
            .with_frozen(coord::PHI, 1.5 * PI)
            .with_frozen(coord::THETA_M, 0.73)
            .with_frozen(coord::PHI_M, 0.5 * PI);
        let active = space.active();
        let bounds: Vec<_> = active.iter().map(|&i| space.bounds(1.0)[i]).collect();
        let r = nelder_mead(
            |x| objective(&full_coords(&space, &active, x), pp),
            &[1.0, 1.0],
            &bounds,
            &[0.5, 0.5],
            1e-8,
            20_000,
        );
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.f > r.history[0]);
    }

    #[test]
    fn canonical_row_preserves_k3() {
        let c = [4.0, 1.0, 2.0, 4.5, 0.7, 1.1];
        let row = canonical_row(1.0, 0.0, &c);
        assert!(row.phi_m < PI && row.theta <= PI);
        let a = lgi::k3(&config_of(&c).unwrap(), p(1.3)).unwrap().k3;
        let b = lgi::k3(&row.config().unwrap(), p(1.3)).unwrap().k3;
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn small_scan_is_deterministic() {
        let settings = OptimizerSettings {
            n_starts: 4,
            n_starts_broken: 4,
            max_evals: 400,
            seed: 9,
            ..Default::default()
        };
        let space = SearchSpace::default_for(p(1.0));
        let a = gamma_scan(1.0, &[0.5, 3.0], &space, &settings).unwrap();
        let b = gamma_scan(1.0, &[0.5, 3.0], &space, &settings).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_scan_csv(&a, &mut ca).unwrap();
        write_scan_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(gamma_scan(1.0, &[0.0], &space, &settings).is_err());
    }

    #[test]
    fn grid_contains_special_angles() {
        let pts = AngleGrid::default().points();
        assert_eq!(pts.len(), 51 * 52);
        assert!(pts
            .iter()
            .any(|&(t, f)| (t - PI / 2.0).abs() < 1e-15 && (f - 1.5 * PI).abs() < 1e-15));
    }

    fn random_configs(count: usize, seed: u64) -> Vec<[f64; DIM]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                [
                    rng.random_range(0.0..PI),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..PI),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.05..5.0),
                    rng.random_range(0.05..5.0),
                ]
            })
            .collect()
    }

    fn k3_at(c: &[f64; DIM], gamma: f64) -> f64 {
        lgi::k3(&config_of(c).unwrap(), p(gamma)).unwrap().k3
    }

    #[test]
    fn x_reflection_and_axis_flip_are_symmetries() {
        for (i, c) in random_configs(100, 17).iter().enumerate() {
            let gamma = [0.0, 0.7, 1.9, 2.0, 3.2][i % 5];
            let k = k3_at(c, gamma);
            let mirrored = [c[0], PI - c[1], c[2], PI - c[3], c[4], c[5]];
            let flipped = [c[0], c[1], PI - c[2], c[3] + PI, c[4], c[5]];
            assert!((k3_at(&mirrored, gamma) - k).abs() < 1e-9);
            assert!((k3_at(&flipped, gamma) - k).abs() < 1e-9);
        }
    }

    #[test]
    fn shifting_both_azimuths_by_pi_is_not_a_symmetry() {
        let worst = random_configs(100, 17)
            .iter()
            .map(|c| {
                let shifted = [c[0], c[1] + PI, c[2], c[3] + PI, c[4], c[5]];
                (k3_at(&shifted, 1.0) - k3_at(c, 1.0)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-2);
    }

    #[test]
    fn freezing_never_helps() {
        let settings = OptimizerSettings {
            n_starts: 6,
            max_evals: 3000,
            seed: 2,
            ..Default::default()
        };
        let pp = p(1.0);
        let space = SearchSpace::default_for(pp);
        let free = maximize_k3(pp, &space, &settings).unwrap().best;
        let frozen = maximize_k3(pp, &space.with_frozen(coord::THETA_M, 0.4), &settings)
            .unwrap()
            .best;
        assert!(frozen.k3_max <= free.k3_max + 1e-9);
    }
}
