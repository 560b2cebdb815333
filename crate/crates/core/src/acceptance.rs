//! The acceptance suite: fourteen numbered criteria plus a mutation check,
//! each reduced to one measured number compared with a pinned bound.
//!
//! [`run`] drives every criterion in order and hands each result to a
//! callback as soon as it is known, so front ends can stream progress.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lgi::{self, observable, LGIConfig, MeasurementDirection};
use crate::lindblad3::{self, EquivalenceGrid, LindbladParams};
use crate::nhq::{self, GeodesicSolution, PTParams, PureState2};
use crate::optimize::{self, AngleGrid, OptimizerSettings, ScanRow, SearchSpace};
use crate::soe;

/// Pinned tolerances, one per quantitative statement.
pub mod tol {
    pub const SPEED_EXTREMES: f64 = 1e-6;
    /// `v_min` at or below this counts as zero.
    pub const ORDER_ZERO: f64 = 1e-6;
    pub const ORDER_SLOPE: f64 = 1e-3;
    pub const LUDERS: f64 = 1e-3;
    pub const BEYOND_LUDERS: f64 = 1e-3;
    pub const NEAR_EP_K3: f64 = 2.5;
    pub const BROKEN_K3: f64 = 2.9;
    pub const THETA_MATCH: f64 = 0.05;
    pub const PATTERN: f64 = 0.05;
    pub const PHASE: f64 = 0.05;
    pub const FIXED_SYMMETRIC: f64 = 2.5;
    pub const FIXED_BROKEN: f64 = 1.5 + 1e-2;
    pub const ORACLE_BLOCH: f64 = 1e-6;
    pub const FIXED_POINT_DRIFT: f64 = 1e-7;
    pub const HEISENBERG: f64 = 1e-9;
    pub const E15: f64 = 1e-7;
    pub const RHO2N: f64 = 1e-9;
    pub const GROUND_FILL: f64 = 1e-4;
    pub const EQUIVALENCE: f64 = 1e-6;
    /// The mutated speed must miss the circle identity by more than this.
    pub const MUTATION: f64 = 1e-6;
}

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    /// The number compared against the bound.
    pub measured: f64,
    pub bound: String,
    pub detail: String,
    pub seconds: f64,
    /// Set when the failure is explained by an independent calculation that
    /// shows the bound itself cannot be met.
    pub known_limitation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub passed: bool,
    pub results: Vec<CriterionResult>,
}

impl AcceptanceReport {
    pub fn failures(&self) -> impl Iterator<Item = &CriterionResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    /// Failures without a [`CriterionResult::known_limitation`].
    pub fn unexplained_failures(&self) -> impl Iterator<Item = &CriterionResult> {
        self.failures().filter(|r| r.known_limitation.is_none())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSettings {
    pub seed: u64,
    pub optimizer: OptimizerSettings,
    /// Time-only starts per heat-map cell.
    pub fixed_scan_starts: usize,
    pub grid: AngleGrid,
}

impl Default for AcceptanceSettings {
    fn default() -> Self {
        AcceptanceSettings {
            seed: 20240601,
            optimizer: OptimizerSettings {
                seed: 20240601,
                ..OptimizerSettings::default()
            },
            fixed_scan_starts: 4,
            grid: AngleGrid::default(),
        }
    }
}

/// Identifier and title of every criterion, in run order.
pub const CRITERIA: [(&str, &str); 15] = [
    ("1", "speed extremes on the geodesic"),
    ("2", "order-parameter kink and slope"),
    ("3", "Lüders bound in the unitary limit"),
    ("4", "violation beyond the Lüders bound"),
    ("5", "near-EP approach to the algebraic bound"),
    ("6", "broken-phase algebraic maximum"),
    ("7", "optimal phases"),
    ("8", "fixed-measurement contrast"),
    ("9", "propagator, ODE and analytic oracles"),
    ("10", "fixed points stay put"),
    ("11", "Hermitian anti-commutator correlators"),
    ("12", "Lindblad closed forms"),
    ("13", "post-selection equivalence"),
    ("14", "determinism of seeded scans"),
    ("mutation", "flipped v3 sign is caught"),
];

struct Outcome {
    passed: bool,
    measured: f64,
    bound: String,
    detail: String,
    known_limitation: Option<String>,
}

struct Context {
    settings: AcceptanceSettings,
    maxima: BTreeMap<u64, ScanRow>,
}

impl Context {
    fn k3_max(&mut self, gamma: f64) -> Result<ScanRow> {
        if let Some(r) = self.maxima.get(&gamma.to_bits()) {
            return Ok(*r);
        }
        let p = PTParams::new(1.0, gamma)?;
        let row =
            optimize::maximize_k3(p, &SearchSpace::default_for(p), &self.settings.optimizer)?.best;
        self.maxima.insert(gamma.to_bits(), row);
        Ok(row)
    }
}

/// Runs the criteria whose ids pass `select`, calling `report` after each.
pub fn run<S, R>(settings: AcceptanceSettings, select: S, mut report: R) -> AcceptanceReport
where
    S: Fn(&str) -> bool,
    R: FnMut(&CriterionResult),
{
    let mut ctx = Context {
        settings,
        maxima: BTreeMap::new(),
    };
    let mut results = Vec::new();
    for (id, title) in CRITERIA {
        if !select(id) {
            continue;
        }
        let start = Instant::now();
        let outcome = evaluate(id, &mut ctx).unwrap_or_else(|e| Outcome {
            passed: false,
            measured: f64::NAN,
            bound: String::new(),
            detail: format!("error: {e}"),
            known_limitation: None,
        });
        let r = CriterionResult {
            id: id.to_string(),
            title: title.to_string(),
            passed: outcome.passed,
            measured: outcome.measured,
            bound: outcome.bound,
            detail: outcome.detail,
            seconds: start.elapsed().as_secs_f64(),
            known_limitation: outcome.known_limitation,
        };
        report(&r);
        results.push(r);
    }
    AcceptanceReport {
        passed: results.iter().all(|r| r.passed),
        results,
    }
}

/// Every criterion with default settings.
pub fn run_all() -> AcceptanceReport {
    run(AcceptanceSettings::default(), |_| true, |_| {})
}

/// One line per result, e.g. `PASS  1  speed extremes ...`.
pub fn format_line(r: &CriterionResult) -> String {
    let mut line = format!(
        "{} {:>8}  {}: measured {:.6e} ({}) [{:.1}s] {}",
        if r.passed { "PASS" } else { "FAIL" },
        r.id,
        r.title,
        r.measured,
        r.bound,
        r.seconds,
        r.detail
    );
    if let Some(why) = &r.known_limitation {
        line.push_str(&format!("\n              known limitation: {why}"));
    }
    line
}

fn evaluate(id: &str, ctx: &mut Context) -> Result<Outcome> {
    match id {
        "1" => speed_extremes(),
        "2" => order_parameter(),
        "3" => luders(ctx),
        "4" => beyond_luders(ctx),
        "5" => near_ep(ctx),
        "6" => broken_phase(ctx),
        "7" => phases(ctx),
        "8" => fixed_measurement(ctx),
        "9" => oracles(ctx.settings.seed),
        "10" => fixed_point_drift(),
        "11" => heisenberg(ctx.settings.seed),
        "12" => lindblad_analytics(),
        "13" => equivalence(),
        "14" => determinism(ctx.settings.seed),
        "mutation" => mutation(),
        _ => unreachable!("unknown criterion {id}"),
    }
}

fn p(gamma: f64) -> Result<PTParams> {
    PTParams::new(1.0, gamma)
}

fn speed_extremes() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for g in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let e = soe::geodesic_extremes(p(g)?, soe::DEFAULT_SAMPLES)?;
        let dev = (e.v_max - (1.0 + g / 2.0))
            .abs()
            .max((e.v_min - (1.0 - g / 2.0).max(0.0)).abs());
        if dev > worst {
            worst = dev;
            at = g;
        }
    }
    Ok(Outcome {
        passed: worst <= tol::SPEED_EXTREMES,
        measured: worst,
        bound: format!("max deviation <= {:e}", tol::SPEED_EXTREMES),
        detail: format!("worst at gamma={at}"),
        known_limitation: None,
    })
}

fn order_parameter() -> Result<Outcome> {
    let gammas: Vec<f64> = (0..=40)
        .map(|k| 0.1 * k as f64)
        .filter(|g| (g - 2.0).abs() > 1e-9)
        .collect();
    let rows = soe::order_parameter_scan(&gammas, PTParams::default())?;
    let above_zero = rows
        .iter()
        .filter(|r| r.gamma > 2.0)
        .all(|r| r.v_min <= tol::ORDER_ZERO);
    let below_positive = rows
        .iter()
        .filter(|r| r.gamma < 2.0)
        .all(|r| r.v_min > tol::ORDER_ZERO);
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.gamma <= 1.8 + 1e-12)
        .map(|r| (r.gamma, r.v_min))
        .collect();
    let n = fit.len() as f64;
    let (mx, my) = (
        fit.iter().map(|f| f.0).sum::<f64>() / n,
        fit.iter().map(|f| f.1).sum::<f64>() / n,
    );
    let sxy: f64 = fit.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = fit.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(Outcome {
        passed: above_zero && below_positive && (slope + 0.5).abs() <= tol::ORDER_SLOPE,
        measured: slope,
        bound: format!(
            "slope = -0.5 +- {:e}, v_min zero above 2 and positive below",
            tol::ORDER_SLOPE
        ),
        detail: format!(
            "zero above EP: {above_zero}, positive below EP: {below_positive}, {} gammas",
            rows.len()
        ),
        known_limitation: None,
    })
}

fn luders(ctx: &mut Context) -> Result<Outcome> {
    let k = ctx.k3_max(0.0)?.k3_max;
    Ok(Outcome {
        passed: (k - 1.5).abs() <= tol::LUDERS,
        measured: k,
        bound: format!("1.5 +- {:e}", tol::LUDERS),
        detail: "gamma=0".into(),
        known_limitation: None,
    })
}

fn beyond_luders(ctx: &mut Context) -> Result<Outcome> {
    let mut lowest = f64::INFINITY;
    let mut parts = Vec::new();
    for g in [0.5, 1.0, 1.5] {
        let k = ctx.k3_max(g)?.k3_max;
        lowest = lowest.min(k);
        parts.push(format!("gamma={g}: {k:.6}"));
    }
    Ok(Outcome {
        passed: lowest > 1.5 + tol::BEYOND_LUDERS,
        measured: lowest,
        bound: format!("min K3 > 1.5 + {:e}", tol::BEYOND_LUDERS),
        detail: parts.join(", "),
        known_limitation: None,
    })
}

fn near_ep(ctx: &mut Context) -> Result<Outcome> {
    let k = ctx.k3_max(1.99)?.k3_max;
    Ok(Outcome {
        passed: k >= tol::NEAR_EP_K3,
        measured: k,
        bound: format!(">= {}", tol::NEAR_EP_K3),
        detail: "gamma=1.99".into(),
        known_limitation: None,
    })
}

fn broken_phase(ctx: &mut Context) -> Result<Outcome> {
    let mut ok = true;
    let mut lowest = f64::INFINITY;
    let mut parts = Vec::new();
    for g in [2.5, 3.0] {
        let row = ctx.k3_max(g)?;
        let table = lgi::k3(&row.config()?, p(g)?)?;
        let worst_prob = table
            .algebraic_bound_violations()
            .into_iter()
            .fold(0.0, f64::max);
        let dtheta = (row.theta - row.theta_m).abs();
        ok &=
            row.k3_max >= tol::BROKEN_K3 && dtheta < tol::THETA_MATCH && worst_prob <= tol::PATTERN;
        lowest = lowest.min(row.k3_max);
        parts.push(format!(
            "gamma={g}: K3={:.6} |dtheta|={dtheta:.2e} max wrong prob={worst_prob:.2e}",
            row.k3_max
        ));
    }
    Ok(Outcome {
        passed: ok,
        measured: lowest,
        bound: format!(
            "K3 >= {}, |theta-theta_m| < {}, wrong-outcome probabilities <= {}",
            tol::BROKEN_K3,
            tol::THETA_MATCH,
            tol::PATTERN
        ),
        detail: parts.join("; "),
        known_limitation: None,
    })
}

fn phases(ctx: &mut Context) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for g in [0.5, 1.0, 1.5, 1.99, 2.5, 3.0] {
        let row = ctx.k3_max(g)?;
        let dev = (row.phi - 1.5 * PI).abs().max((row.phi_m - 0.5 * PI).abs());
        if dev > worst {
            worst = dev;
            at = g;
        }
    }
    Ok(Outcome {
        passed: worst < tol::PHASE,
        measured: worst,
        bound: format!("|phi-3pi/2|, |phi_m-pi/2| < {}", tol::PHASE),
        detail: format!("worst at gamma={at}"),
        known_limitation: None,
    })
}

fn fixed_measurement(ctx: &mut Context) -> Result<Outcome> {
    let s = OptimizerSettings {
        n_starts: ctx.settings.fixed_scan_starts,
        ..ctx.settings.optimizer
    };
    let scan = |g: f64| -> Result<f64> {
        let pp = p(g)?;
        let r = optimize::fixed_measurement_scan(
            pp,
            MeasurementDirection::sigma_y(),
            ctx.settings.grid,
            &SearchSpace::default_for(pp),
            &s,
        )?;
        Ok(r.k3_max)
    };
    let (sym, broken) = (scan(1.99)?, scan(2.01)?);
    Ok(Outcome {
        passed: sym >= tol::FIXED_SYMMETRIC && broken <= tol::FIXED_BROKEN,
        measured: broken,
        bound: format!(
            "gamma=1.99 max >= {}, gamma=2.01 max <= {}",
            tol::FIXED_SYMMETRIC,
            tol::FIXED_BROKEN
        ),
        detail: format!(
            "gamma=1.99: {sym:.6}, gamma=2.01: {broken:.6}, grid {}x{}",
            ctx.settings.grid.n_theta, ctx.settings.grid.n_phi
        ),
        known_limitation: None,
    })
}

fn oracles(seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_prop = 0.0f64;
    for _ in 0..50 {
        let theta = (rng.random::<f64>() * 2.0 - 1.0).acos();
        let phi = rng.random::<f64>() * 2.0 * PI;
        let pp = p(rng.random::<f64>() * 4.0)?;
        let t = rng.random::<f64>() * 10.0;
        let psi = PureState2::from_angles(theta, phi);
        let exact = nhq::evolve_density(&psi.density(), t, pp)?.bloch();
        let ode = nhq::evolve_bloch_at(psi.bloch(), pp, &[t], 1e-10)?.states[0];
        worst_prop = worst_prop.max((exact - ode).norm());
    }
    let mut worst_geo = 0.0f64;
    for _ in 0..50 {
        let alpha = rng.random::<f64>() * 2.0 * PI;
        let pp = p(rng.random::<f64>() * 4.0)?;
        let s0 = soe::geodesic_state(alpha);
        let (sb0, sn0) = nhq::geodesic_components(s0);
        let sol = GeodesicSolution::new(sb0, sn0, pp)?;
        let times: Vec<f64> = (1..=10).map(|k| 0.5 * k as f64).collect();
        let traj = nhq::evolve_bloch_at(s0, pp, &times, 1e-10)?;
        for (t, s) in times.iter().zip(&traj.states) {
            let (sb, sn) = sol.signed_at(*t)?;
            let (ob, on) = nhq::geodesic_components(*s);
            worst_geo = worst_geo.max((sb - ob).abs()).max((sn - on).abs());
        }
    }
    let worst = worst_prop.max(worst_geo);
    Ok(Outcome {
        passed: worst < tol::ORACLE_BLOCH,
        measured: worst,
        bound: format!("< {:e}", tol::ORACLE_BLOCH),
        detail: format!("propagator vs ODE {worst_prop:.2e} (50 cases), geodesic closed form vs ODE {worst_geo:.2e}"),
        known_limitation: None,
    })
}

fn fixed_point_drift() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for g in [1.0, 3.0] {
        let fp = nhq::fixed_points(p(g)?)?;
        for s in [fp.source, fp.sink] {
            let traj = nhq::evolve_bloch_numeric(s, p(g)?, 20.0, 1e-10)?;
            worst = traj
                .states
                .iter()
                .map(|x| (*x - s).norm())
                .fold(worst, f64::max);
        }
    }
    Ok(Outcome {
        passed: worst < tol::FIXED_POINT_DRIFT,
        measured: worst,
        bound: format!("< {:e} over t in [0, 20]", tol::FIXED_POINT_DRIFT),
        detail: "both eigenstates, gamma in {1, 3}, Bloch-equation integration".into(),
        known_limitation: None,
    })
}

fn heisenberg(seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
    let pp = PTParams::default();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let t2 = rng.random_range(0.01..5.0);
        let cfg = LGIConfig::new(
            rng.random_range(0.0..PI),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..PI),
            rng.random_range(0.0..2.0 * PI),
            t2,
            t2 + rng.random_range(0.01..5.0),
        )?;
        let rho = cfg.initial_state().density();
        let obs = observable(cfg.measurement);
        for (a, b) in [(0.0, cfg.t2), (cfg.t2, cfg.t3), (0.0, cfg.t3)] {
            let c = lgi::correlation(&rho, &obs, a, b, pp)?;
            let h = lgi::anticommutator_correlation(&rho, &obs.q, a, b, pp)?;
            worst = worst.max((c - h).abs());
        }
    }
    Ok(Outcome {
        passed: worst < tol::HEISENBERG,
        measured: worst,
        bound: format!("< {:e}", tol::HEISENBERG),
        detail: "50 random configs, gamma=0".into(),
        known_limitation: None,
    })
}

fn lindblad_analytics() -> Result<Outcome> {
    let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    let (mut e15, mut n2) = (0.0f64, 0.0f64);
    let mut fill = Vec::new();
    for g1 in [1.0, 3.9, 4.0, 4.1, 8.0] {
        let lp = LindbladParams::new(1.0, g1)?;
        let traj =
            lindblad3::integrate_trajectory(&lindblad3::e15_initial_state(), &times, lp, 1e-13)?;
        for (t, s) in times.iter().zip(&traj.states) {
            e15 = e15.max(lindblad3::analytic_e15(*t, g1)?.frobenius_distance(s));
            n2 = n2.max(
                lindblad3::rho2n_closed_form(*t, g1)?
                    .frobenius_distance(&lindblad3::postselect(s)?),
            );
        }
        let t_late = 50.0 / g1;
        let late = lindblad3::integrate(
            &lindblad3::e15_initial_state(),
            t_late,
            lp,
            lindblad3::DEFAULT_TOL,
        )?;
        let predicted = 1.0 - lindblad3::analytic_e15(t_late, g1)?.0[2][2].re;
        fill.push((g1, 1.0 - late.0[2][2].re, predicted));
    }
    let fill_ok = fill.iter().all(|f| f.1.abs() < tol::GROUND_FILL);
    let closed_ok = e15 < tol::E15 && n2 < tol::RHO2N;
    // The slowest decay rate of the block is (γ₁ − √(γ₁² − 16))/2 for γ₁ > 4,
    // which falls like 4/γ₁: at large γ₁ a time of 50/γ₁ is too short. Only
    // call that a limitation of the bound when the closed form predicts the
    // same shortfall the integrator shows.
    let misses: Vec<&(f64, f64, f64)> = fill
        .iter()
        .filter(|f| f.1.abs() >= tol::GROUND_FILL)
        .collect();
    let explained = !misses.is_empty()
        && misses.iter().all(|(g1, got, want)| {
            *g1 > 4.0 && want.abs() >= tol::GROUND_FILL && (got - want).abs() < tol::E15
        });
    let known_limitation = (closed_ok && !fill_ok && explained).then(|| {
        misses
            .iter()
            .map(|(g1, got, want)| {
                let rate = 0.5 * (g1 - (g1 * g1 - 16.0).sqrt());
                format!(
                    "gamma1={g1}: 1-rho_gg={got:.3e} at t=50/gamma1, closed form {want:.3e}; slowest decay rate {rate:.3} so the bound needs t >= {:.1}",
                    (4.0 / tol::GROUND_FILL).ln() / rate
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    });
    let fill_detail: Vec<String> = fill
        .iter()
        .map(|(g1, got, _)| format!("{g1}:{got:.1e}"))
        .collect();
    Ok(Outcome {
        passed: closed_ok && fill_ok,
        measured: e15,
        bound: format!("closed form < {:e}, post-selected < {:e}, |rho_gg - 1| < {:e}", tol::E15, tol::RHO2N, tol::GROUND_FILL),
        detail: format!(
            "closed form {e15:.2e}, post-selected block {n2:.2e}, 1-rho_gg(50/gamma1) by gamma1 [{}]",
            fill_detail.join(", ")
        ),
        known_limitation,
    })
}

fn equivalence() -> Result<Outcome> {
    let r = lindblad3::equivalence_sweep(&EquivalenceGrid::new(vec![1.0, 3.0, 4.0, 6.0], 5.0))?;
    Ok(Outcome {
        passed: r.max_deviation < tol::EQUIVALENCE,
        measured: r.max_deviation,
        bound: format!("< {:e}", tol::EQUIVALENCE),
        detail: format!(
            "{} cells, worst at theta={:.3} phi={:.3} gamma1={} t={:.3}",
            r.cells, r.argmax.theta, r.argmax.phi, r.argmax.gamma1, r.argmax.t
        ),
        known_limitation: None,
    })
}

fn determinism(seed: u64) -> Result<Outcome> {
    let settings = OptimizerSettings {
        n_starts: 8,
        n_starts_broken: 8,
        max_evals: 2000,
        seed,
        ..Default::default()
    };
    let produce = || -> Result<Vec<u8>> {
        let space = SearchSpace::new(optimize::DEFAULT_T_MAX)?;
        let rows = optimize::gamma_scan(1.0, &[0.5, 1.99, 3.0], &space, &settings)?;
        let mut out = Vec::new();
        optimize::write_scan_csv(&rows, &mut out)?;
        let pp = p(1.99)?;
        let fixed = optimize::fixed_measurement_scan(
            pp,
            MeasurementDirection::sigma_y(),
            AngleGrid {
                n_theta: 5,
                n_phi: 4,
            },
            &SearchSpace::default_for(pp),
            &OptimizerSettings {
                n_starts: 2,
                ..settings
            },
        )?;
        optimize::write_heatmap_csv(&fixed.rows, &mut out)?;
        Ok(out)
    };
    let first = produce()?;
    let second = produce()?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| crate::Error::InternalInconsistency(e.to_string()))?
        .install(produce)?;
    let same = first == second && first == single;
    Ok(Outcome {
        passed: same,
        measured: if same { 0.0 } else { 1.0 },
        bound: "byte-identical CSV across reruns and thread counts".into(),
        detail: format!("{} bytes compared", first.len()),
        known_limitation: None,
    })
}

fn mutation() -> Result<Outcome> {
    let mut clean = 0.0f64;
    let mut mutated = f64::INFINITY;
    for g in [0.5, 1.5, 3.0] {
        clean = clean.max(soe::geodesic_identity_residual(
            p(g)?,
            360,
            soe::speed_components,
        )?);
        let m = soe::geodesic_identity_residual(p(g)?, 360, soe::speed_components_flipped_v3)?;
        mutated = mutated.min(if m.is_nan() { f64::INFINITY } else { m });
    }
    Ok(Outcome {
        passed: clean < 1e-10 && mutated > tol::MUTATION,
        measured: mutated,
        bound: format!(
            "mutated residual > {:e} while clean residual < 1e-10",
            tol::MUTATION
        ),
        detail: format!("clean residual {clean:.2e}"),
        known_limitation: None,
    })
}
