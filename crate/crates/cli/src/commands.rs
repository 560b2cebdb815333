use std::f64::consts::PI;

use serde::Serialize;

use ptlg::acceptance::{self, AcceptanceSettings};
use ptlg::export;
use ptlg::lgi::{self, LGIConfig, MeasurementDirection};
use ptlg::lindblad3::{self, EquivalenceGrid, LindbladParams, ParametricForm3};
use ptlg::nhq::{self, PTParams, PureState2};
use ptlg::optimize::{self, AngleGrid, OptimizerSettings, SearchSpace};
use ptlg::soe;

use crate::error::CliError;
use crate::manifest::OutputDir;
use crate::options::*;

fn csv<F>(f: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> ptlg::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    csv(|buf| export::write_json(buf, value))
}

#[derive(Serialize)]
struct EvolveRun {
    j: f64,
    gamma: f64,
    theta: f64,
    phi: f64,
    t_end: f64,
    dt_out: f64,
    tol: f64,
}

pub fn evolve(o: EvolveOpts) -> Result<(), CliError> {
    let deg = o.degrees.unwrap_or(false);
    let run = EvolveRun {
        j: o.j.unwrap_or(1.0),
        gamma: o.gamma.unwrap_or(0.0),
        theta: o.theta.map_or(PI / 2.0, |v| angle(v, deg)),
        phi: o.phi.map_or(1.5 * PI, |v| angle(v, deg)),
        t_end: o.t_end.unwrap_or(10.0),
        dt_out: o.dt_out.unwrap_or(0.01),
        tol: o.tol.unwrap_or(1e-10),
    };
    let out = required(o.out, "out")?;
    let p = PTParams::new(run.j, run.gamma)?;
    let s0 = PureState2::from_angles(run.theta, run.phi).bloch();
    let traj = nhq::evolve_bloch_uniform(s0, p, run.t_end, run.dt_out, run.tol)?;
    let speeds = soe::speed_along_trajectory(&traj, p)?;
    let bytes = csv(|buf| {
        export::write_csv(
            buf,
            &["t", "S_x", "S_y", "S_z", "v", "v1_sq", "v2_sq", "v3_sq"],
            traj.iter()
                .zip(&speeds)
                .map(|((t, s), v)| vec![t, s.x, s.y, s.z, v.v, v.v1_sq, v.v2_sq, v.v3_sq]),
        )
    })?;
    let mut dir = OutputDir::create(&out)?;
    dir.write("trajectory.csv", &bytes)?;
    dir.finish("evolve", &run, None)?;
    Ok(())
}

#[derive(Serialize)]
struct SoeScanRun {
    j: f64,
    gamma_min: f64,
    gamma_max: f64,
    gamma_steps: usize,
    samples: usize,
}

pub fn soe_scan(o: SoeScanOpts) -> Result<(), CliError> {
    let run = SoeScanRun {
        j: o.j.unwrap_or(1.0),
        gamma_min: o.gamma_min.unwrap_or(0.0),
        gamma_max: o.gamma_max.unwrap_or(4.0),
        gamma_steps: o.gamma_steps.unwrap_or(81),
        samples: o.samples.unwrap_or(soe::DEFAULT_SAMPLES),
    };
    let out = required(o.out, "out")?;
    let gammas = linspace(run.gamma_min, run.gamma_max, run.gamma_steps)?;
    let rows = soe::order_parameter_scan_with(&gammas, PTParams::new(run.j, 0.0)?, run.samples)?;
    let bytes = csv(|buf| soe::write_order_parameter_csv(&rows, buf))?;
    let mut dir = OutputDir::create(&out)?;
    dir.write("order_parameter.csv", &bytes)?;
    dir.finish("soe-scan", &run, None)?;
    Ok(())
}

#[derive(Serialize)]
struct K3Run {
    j: f64,
    gamma: f64,
    config: LGIConfig,
}

pub fn k3(o: K3Opts) -> Result<(), CliError> {
    let deg = o.degrees.unwrap_or(false);
    let a = |v: Option<f64>, name: &str| required(v, name).map(|v| angle(v, deg));
    let config = LGIConfig::new(
        a(o.theta, "theta")?,
        a(o.phi, "phi")?,
        a(o.theta_m, "theta-m")?,
        a(o.phi_m, "phi-m")?,
        required(o.t2, "t2")?,
        required(o.t3, "t3")?,
    )?;
    let run = K3Run {
        j: o.j.unwrap_or(1.0),
        gamma: o.gamma.unwrap_or(0.0),
        config,
    };
    let out = required(o.out, "out")?;
    let result = lgi::k3(&run.config, PTParams::new(run.j, run.gamma)?)?;
    let mut dir = OutputDir::create(&out)?;
    dir.write("k3.json", &json(&result)?)?;
    dir.finish("k3", &run, None)?;
    Ok(())
}

#[derive(Serialize)]
struct K3ScanRun {
    j: f64,
    gammas: Vec<f64>,
    t_max: f64,
    settings: OptimizerSettings,
}

pub fn k3_scan(o: K3ScanOpts) -> Result<(), CliError> {
    let seed = required(o.seed, "seed")?;
    let j = o.j.unwrap_or(1.0);
    let gammas = match o.gammas {
        Some(g) if !g.is_empty() => g,
        _ => linspace(
            o.gamma_min.unwrap_or(0.25),
            o.gamma_max.unwrap_or(3.0),
            o.gamma_steps.unwrap_or(12),
        )?,
    };
    let d = OptimizerSettings::default();
    let settings = OptimizerSettings {
        n_starts: o.n_starts.unwrap_or(d.n_starts),
        n_starts_broken: o.n_starts_broken.unwrap_or(d.n_starts_broken),
        seed,
        tol: o.simplex_tol.unwrap_or(d.tol),
        max_evals: o.max_evals.unwrap_or(d.max_evals),
        initial_step: d.initial_step,
    };
    let run = K3ScanRun {
        j,
        gammas,
        t_max: o.t_max.unwrap_or(optimize::DEFAULT_T_MAX),
        settings,
    };
    let out = required(o.out, "out")?;
    let space = SearchSpace::new(run.t_max / j)?;
    let rows = optimize::gamma_scan(j, &run.gammas, &space, &run.settings)?;
    let mut dir = OutputDir::create(&out)?;
    dir.write(
        "k3_scan.csv",
        &csv(|buf| optimize::write_scan_csv(&rows, buf))?,
    )?;
    dir.finish("k3-scan", &run, Some(seed))?;
    Ok(())
}

#[derive(Serialize)]
struct FixedScanRun {
    j: f64,
    gamma: f64,
    theta_m: f64,
    phi_m: f64,
    grid: AngleGrid,
    t_max: f64,
    settings: OptimizerSettings,
}

#[derive(Serialize)]
struct FixedScanSummary {
    k3_max: f64,
    theta_star: f64,
    phi_star: f64,
    t2_star: f64,
    t3_star: f64,
}

pub fn fixed_scan(o: FixedScanOpts) -> Result<(), CliError> {
    let seed = required(o.seed, "seed")?;
    let deg = o.degrees.unwrap_or(false);
    let j = o.j.unwrap_or(1.0);
    let d = OptimizerSettings::default();
    let grid = AngleGrid::default();
    let run = FixedScanRun {
        j,
        gamma: required(o.gamma, "gamma")?,
        theta_m: o.theta_m.map_or(PI / 2.0, |v| angle(v, deg)),
        phi_m: o.phi_m.map_or(PI / 2.0, |v| angle(v, deg)),
        grid: AngleGrid {
            n_theta: o.n_theta.unwrap_or(grid.n_theta),
            n_phi: o.n_phi.unwrap_or(grid.n_phi),
        },
        t_max: o.t_max.unwrap_or(optimize::DEFAULT_T_MAX),
        settings: OptimizerSettings {
            n_starts: o.n_starts.unwrap_or(4),
            seed,
            max_evals: o.max_evals.unwrap_or(d.max_evals),
            ..d
        },
    };
    let out = required(o.out, "out")?;
    let p = PTParams::new(j, run.gamma)?;
    let n = MeasurementDirection::new(run.theta_m, run.phi_m)?;
    let scan = optimize::fixed_measurement_scan(
        p,
        n,
        run.grid,
        &SearchSpace::new(run.t_max / j)?,
        &run.settings,
    )?;
    let summary = FixedScanSummary {
        k3_max: scan.k3_max,
        theta_star: scan.theta_star,
        phi_star: scan.phi_star,
        t2_star: scan.t2_star,
        t3_star: scan.t3_star,
    };
    let mut dir = OutputDir::create(&out)?;
    dir.write(
        "heatmap.csv",
        &csv(|buf| optimize::write_heatmap_csv(&scan.rows, buf))?,
    )?;
    dir.write("fixed_scan.json", &json(&summary)?)?;
    dir.finish("fixed-scan", &run, Some(seed))?;
    Ok(())
}

#[derive(Serialize)]
struct LindbladRun {
    params: LindbladParams,
    t_end: f64,
    dt_out: f64,
    initial: Option<(f64, f64)>,
    tol: f64,
    check: Option<Check>,
}

#[derive(Serialize)]
struct CheckReport {
    check: Check,
    gamma1: f64,
    max_deviation: f64,
    threshold: f64,
    passed: bool,
}

/// Exit-code threshold for the equivalence check.
pub const EQUIVALENCE_EXIT_TOL: f64 = 1e-5;
pub const E15_TOL: f64 = 1e-7;

pub fn lindblad(o: LindbladOpts) -> Result<(), CliError> {
    let deg = o.degrees.unwrap_or(false);
    let params = LindbladParams::with_eps_g(
        o.j.unwrap_or(1.0),
        required(o.gamma1, "gamma1")?,
        o.eps_g.unwrap_or(1.0),
    )?;
    let initial = match (o.theta, o.phi) {
        (Some(t), Some(p)) => Some((angle(t, deg), angle(p, deg))),
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "give both theta and phi or neither".into(),
            ))
        }
    };
    let run = LindbladRun {
        params,
        t_end: o.t_end.unwrap_or(5.0),
        dt_out: o.dt_out.unwrap_or(0.05),
        initial,
        tol: o.tol.unwrap_or(lindblad3::DEFAULT_TOL),
        check: o.check,
    };
    let out = required(o.out, "out")?;
    if !(run.t_end >= 0.0 && run.dt_out > 0.0) {
        return Err(CliError::Config("need t-end >= 0 and dt-out > 0".into()));
    }
    let steps = (run.t_end / run.dt_out + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * run.dt_out).collect();
    let rho0 = match initial {
        Some((t, p)) => lindblad3::embed_pure(t, p),
        None => lindblad3::e15_initial_state(),
    };
    let traj = lindblad3::integrate_trajectory(&rho0, &times, params, run.tol)?;

    let mut dir = OutputDir::create(&out)?;
    dir.write("trajectory.csv", &csv(|buf| traj.write_csv(buf))?)?;
    let verdict = match run.check {
        None => None,
        Some(Check::Equivalence) => {
            let mut grid = EquivalenceGrid::new(vec![params.gamma1], run.t_end);
            grid.j = params.j;
            grid.tol = run.tol;
            let report = lindblad3::equivalence_sweep(&grid)?;
            dir.write("equivalence.json", &json(&report)?)?;
            Some((report.max_deviation, EQUIVALENCE_EXIT_TOL))
        }
        Some(check) => {
            if params.j != 1.0 {
                return Err(CliError::Config(
                    "the closed-form checks assume J = 1".into(),
                ));
            }
            let (dev, threshold) = match check {
                Check::E15 => (e15_deviation(params, &times, run.tol)?, E15_TOL),
                _ => {
                    let (theta, phi) = initial.unwrap_or((PI / 2.0, 1.5 * PI));
                    (
                        parametric_deviation(params, theta, phi, &times, run.tol)?,
                        lindblad3::RECONSTRUCTION_TOL,
                    )
                }
            };
            let report = CheckReport {
                check,
                gamma1: params.gamma1,
                max_deviation: dev,
                threshold,
                passed: dev < threshold,
            };
            dir.write("check.json", &json(&report)?)?;
            Some((dev, threshold))
        }
    };
    dir.finish("lindblad", &run, None)?;
    match verdict {
        Some((dev, threshold)) if dev.is_nan() || dev >= threshold => Err(CliError::CheckFailed(format!(
            "max deviation {dev:e} exceeds {threshold:e}"
        ))),
        _ => Ok(()),
    }
}

fn e15_deviation(params: LindbladParams, times: &[f64], tol: f64) -> Result<f64, CliError> {
    let traj =
        lindblad3::integrate_trajectory(&lindblad3::e15_initial_state(), times, params, tol)?;
    let mut worst = 0.0f64;
    for (t, s) in times.iter().zip(&traj.states) {
        worst = worst.max(lindblad3::analytic_e15(*t, params.gamma1)?.frobenius_distance(s));
    }
    Ok(worst)
}

fn parametric_deviation(
    params: LindbladParams,
    theta: f64,
    phi: f64,
    times: &[f64],
    tol: f64,
) -> Result<f64, CliError> {
    let rho0 = ParametricForm3 {
        r3: 0.5,
        theta3: theta,
        phi3: phi,
    }
    .density();
    let traj = lindblad3::integrate_trajectory(&rho0, times, params, tol)?;
    let mut worst = 0.0f64;
    for (t, s) in times.iter().zip(&traj.states) {
        let form = match lindblad3::analytic_parametric(*t, 0.5 * params.gamma1, theta, phi) {
            Ok(f) => f,
            Err(ptlg::Error::TranscriptionMismatch { deviation, .. }) => return Ok(deviation),
            Err(e) => return Err(e.into()),
        };
        worst = worst.max(form.density().frobenius_distance(s));
    }
    Ok(worst)
}

pub fn verify(o: VerifyOpts) -> Result<(), CliError> {
    let as_json = o.json.unwrap_or(false);
    let mut settings = AcceptanceSettings::default();
    if let Some(seed) = o.seed {
        settings.seed = seed;
        settings.optimizer.seed = seed;
    }
    let only = o.only.unwrap_or_default();
    for id in &only {
        if !acceptance::CRITERIA.iter().any(|(c, _)| c == id) {
            return Err(CliError::Config(format!("unknown criterion `{id}`")));
        }
    }
    let report = acceptance::run(
        settings,
        |id| only.is_empty() || only.iter().any(|w| w == id),
        |r| {
            if !as_json {
                println!("{}", acceptance::format_line(r));
            }
        },
    );
    let body = json(&report)?;
    if as_json {
        print!("{}", String::from_utf8_lossy(&body));
    }
    if let Some(out) = o.out {
        let mut dir = OutputDir::create(&out)?;
        dir.write("verify.json", &body)?;
        dir.finish("verify", &settings, Some(settings.seed))?;
    }
    if report.passed {
        Ok(())
    } else {
        let ids: Vec<&str> = report.failures().map(|r| r.id.as_str()).collect();
        Err(CliError::VerifyFailed(ids.join(", ")))
    }
}
