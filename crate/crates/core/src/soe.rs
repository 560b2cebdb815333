//! Speed of evolution of pure states under the normalized dynamics.
//!
//! For a pure state the squared speed splits into three pieces,
//!
//! ```text
//! v² = J²(1 − 4S_x²) + (γ²/4)(1 − 4S_z²) + 2Jγ S_n,
//! ```
//!
//! the variances of `A·σ` and `B·σ` plus a commutator term that may be
//! negative. The sum equals `|dS/dt|²`. On the `S_A = 0` circle,
//! parametrized as `S = (0, −½ sin α, ½ cos α)`, it collapses to
//! `v = |J + (γ/2) sin α|`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::nhq::{self, density_from_bloch, BlochVector, PTParams, Trajectory};
use crate::qmat::Vec3;

/// Negative round-off in `v²` tolerated before it counts as a contract violation.
pub const NEGATIVE_CLAMP: f64 = -1e-10;

/// Tolerance on `|S| = 1/2` accepted by [`speed_components`].
pub const PURITY_TOL: f64 = 1e-7;

/// Time offset of the finite-difference fidelity check.
pub const FIDELITY_DELTA: f64 = 1e-5;

/// Largest disagreement allowed between the fidelity estimate and `v`.
pub const FIDELITY_TOL: f64 = 1e-4;

/// Default number of scan points on the circle.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Speed at one point. `v3_sq` carries the sign of `S_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub t: Option<f64>,
    pub v1_sq: f64,
    pub v2_sq: f64,
    pub v3_sq: f64,
    pub v: f64,
}

/// Extremal speeds on a family of pure states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedExtremes {
    pub v_max: f64,
    pub v_min: f64,
    pub argmax_state: BlochVector,
    pub argmin_state: BlochVector,
}

/// Which states [`geodesic_extremes_on`] searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanDomain {
    /// The `S_A = 0` circle.
    Geodesic,
    /// All pure states.
    FullSphere,
}

fn clamp(x: f64, what: &str) -> Result<f64> {
    if x < NEGATIVE_CLAMP {
        return Err(Error::InternalInconsistency(format!(
            "{what} = {x:e} is negative beyond round-off"
        )));
    }
    Ok(x.max(0.0))
}

/// Speed components of a pure state. `S` is rescaled to `|S| = 1/2` first.
pub fn speed_components(s: BlochVector, p: PTParams) -> Result<SpeedSample> {
    speed_components_signed(s, p, 1.0)
}

fn speed_components_signed(s: BlochVector, p: PTParams, v3_sign: f64) -> Result<SpeedSample> {
    if !s.is_finite() {
        return Err(Error::NonFinite("Bloch vector"));
    }
    let n = s.norm();
    if (n - 0.5).abs() > PURITY_TOL {
        return Err(Error::domain(format!(
            "speed is defined for pure states, got |S| = {n}"
        )));
    }
    let s = (0.5 / n) * s;
    let (j, g) = (p.j, p.gamma);
    let v1_sq = clamp(j * j * (1.0 - 4.0 * s.x * s.x), "v1²")?;
    let v2_sq = clamp(0.25 * g * g * (1.0 - 4.0 * s.z * s.z), "v2²")?;
    let v3_sq = v3_sign * 2.0 * j * g * (-s.y);
    let v = clamp(v1_sq + v2_sq + v3_sq, "v²")?.sqrt();
    Ok(SpeedSample {
        t: None,
        v1_sq,
        v2_sq,
        v3_sq,
        v,
    })
}

/// `|S(t+δ) − S(t−δ)| / 2δ`, which equals `√(1 − F)/δ` for the fidelity
/// `F = |⟨ψ(t−δ)|ψ(t+δ)⟩|²` of pure states, up to `O(δ²)`.
pub fn fidelity_speed(s: BlochVector, p: PTParams, delta: f64) -> Result<f64> {
    let rho = density_from_bloch(s);
    let fwd = nhq::propagate(&rho, delta, p)?.bloch();
    let bwd = nhq::propagate(&rho, -delta, p)?.bloch();
    Ok((fwd - bwd).norm() / (2.0 * delta))
}

/// Pointwise speeds, each cross-checked against [`fidelity_speed`].
pub fn speed_along_trajectory(traj: &Trajectory, p: PTParams) -> Result<Vec<SpeedSample>> {
    traj.iter()
        .map(|(t, s)| {
            let mut sample = speed_components(s, p)?;
            sample.t = Some(t);
            let v_fd = fidelity_speed(s, p, FIDELITY_DELTA)?;
            if (v_fd - sample.v).abs() > FIDELITY_TOL {
                return Err(Error::InternalInconsistency(format!(
                    "speed {} disagrees with fidelity estimate {v_fd} at t = {t}",
                    sample.v
                )));
            }
            Ok(sample)
        })
        .collect()
}

/// Columns `t,v,v1_sq,v2_sq,v3_sq`.
pub fn write_speed_csv<W: Write>(samples: &[SpeedSample], w: W) -> Result<()> {
    export::write_csv(
        w,
        &["t", "v", "v1_sq", "v2_sq", "v3_sq"],
        samples
            .iter()
            .map(|s| vec![s.t.unwrap_or(f64::NAN), s.v, s.v1_sq, s.v2_sq, s.v3_sq]),
    )
}

/// Point on the `S_A = 0` circle at angle `α`.
pub fn geodesic_state(alpha: f64) -> BlochVector {
    let (s, c) = alpha.sin_cos();
    Vec3::new(0.0, -0.5 * s, 0.5 * c)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes `f` on `[a, b]` to an interval narrower than `tol`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Extremal speeds on the `S_A = 0` circle from `n_samples` equispaced
/// angles, with each extremum then polished by golden-section search.
pub fn geodesic_extremes(p: PTParams, n_samples: usize) -> Result<SpeedExtremes> {
    geodesic_extremes_on(p, n_samples, ScanDomain::Geodesic)
}

pub fn geodesic_extremes_on(
    p: PTParams,
    n_samples: usize,
    domain: ScanDomain,
) -> Result<SpeedExtremes> {
    if n_samples < 100 {
        return Err(Error::domain("at least 100 samples are required"));
    }
    match domain {
        ScanDomain::Geodesic => circle_extremes(p, n_samples),
        ScanDomain::FullSphere => sphere_extremes(p, n_samples),
    }
}

fn circle_extremes(p: PTParams, n: usize) -> Result<SpeedExtremes> {
    let speed = |alpha: f64| speed_components(geodesic_state(alpha), p).map(|s| s.v);
    let h = 2.0 * PI / n as f64;
    let mut vs = Vec::with_capacity(n);
    for k in 0..n {
        vs.push(speed(k as f64 * h)?);
    }
    let (k_min, k_max) = argminmax(&vs);
    // Polishing uses |dS/dt|, equal to v but free of the cancellation in
    // v1² + v2² + v3² that flattens v near a zero.
    let v_of = |a: f64| nhq::bloch_rhs(geodesic_state(a), p).norm();
    let a_min = golden_section(
        v_of,
        (k_min as f64 - 1.0) * h,
        (k_min as f64 + 1.0) * h,
        1e-10,
    );
    let a_max = golden_section(
        |a| -v_of(a),
        (k_max as f64 - 1.0) * h,
        (k_max as f64 + 1.0) * h,
        1e-10,
    );
    Ok(SpeedExtremes {
        v_max: speed(a_max)?,
        v_min: speed(a_min)?,
        argmax_state: geodesic_state(a_max),
        argmin_state: geodesic_state(a_min),
    })
}

fn argminmax(vs: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (k, &v) in vs.iter().enumerate() {
        if v < vs[lo] {
            lo = k;
        }
        if v > vs[hi] {
            hi = k;
        }
    }
    (lo, hi)
}

fn sphere_state(theta: f64, phi: f64) -> BlochVector {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(0.5 * st * cp, 0.5 * st * sp, 0.5 * ct)
}

/// Grid scan of all pure states followed by coordinate-wise golden-section
/// sweeps around the best grid points.
fn sphere_extremes(p: PTParams, n: usize) -> Result<SpeedExtremes> {
    let side = (n as f64).sqrt().ceil() as usize;
    let (ht, hp) = (PI / (side - 1) as f64, 2.0 * PI / side as f64);
    let speed = |th: f64, ph: f64| {
        speed_components(sphere_state(th, ph), p)
            .map(|s| s.v)
            .unwrap_or(f64::NAN)
    };
    let mut best_min = (f64::INFINITY, 0.0, 0.0);
    let mut best_max = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..side {
        for k in 0..side {
            let (th, ph) = (i as f64 * ht, k as f64 * hp);
            let v = speed(th, ph);
            if v < best_min.0 {
                best_min = (v, th, ph);
            }
            if v > best_max.0 {
                best_max = (v, th, ph);
            }
        }
    }
    let polish = |sign: f64, (_, mut th, mut ph): (f64, f64, f64)| {
        let f = |a: f64, b: f64| sign * speed(a, b);
        for _ in 0..20 {
            th = golden_section(|a| f(a, ph), (th - ht).max(0.0), (th + ht).min(PI), 1e-10);
            ph = golden_section(|b| f(th, b), ph - hp, ph + hp, 1e-10);
        }
        (th, ph)
    };
    let (tmin, pmin) = polish(1.0, best_min);
    let (tmax, pmax) = polish(-1.0, best_max);
    let (s_min, s_max) = (sphere_state(tmin, pmin), sphere_state(tmax, pmax));
    Ok(SpeedExtremes {
        v_max: speed_components(s_max, p)?.v,
        v_min: speed_components(s_min, p)?.v,
        argmax_state: s_max,
        argmin_state: s_min,
    })
}

/// One row of the order-parameter table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterRow {
    pub gamma: f64,
    pub v_max: f64,
    pub v_min: f64,
}

/// Geodesic extremes for each `γ`, in input order.
pub fn order_parameter_scan(gammas: &[f64], p_base: PTParams) -> Result<Vec<OrderParameterRow>> {
    order_parameter_scan_with(gammas, p_base, DEFAULT_SAMPLES)
}

pub fn order_parameter_scan_with(
    gammas: &[f64],
    p_base: PTParams,
    n_samples: usize,
) -> Result<Vec<OrderParameterRow>> {
    gammas
        .par_iter()
        .map(|&gamma| {
            let p = PTParams::new(p_base.j, gamma)?;
            let e = geodesic_extremes(p, n_samples)?;
            Ok(OrderParameterRow {
                gamma,
                v_max: e.v_max,
                v_min: e.v_min,
            })
        })
        .collect()
}

/// Columns `gamma,v_max,v_min`.
pub fn write_order_parameter_csv<W: Write>(rows: &[OrderParameterRow], w: W) -> Result<()> {
    export::write_csv(
        w,
        &["gamma", "v_max", "v_min"],
        rows.iter().map(|r| vec![r.gamma, r.v_max, r.v_min]),
    )
}

/// Largest deviation of `components(S).v` from `|J + (γ/2) sin α|` over
/// `n` points of the circle.
pub fn geodesic_identity_residual<F>(p: PTParams, n: usize, components: F) -> Result<f64>
where
    F: Fn(BlochVector, PTParams) -> Result<SpeedSample>,
{
    let mut worst = 0.0f64;
    for k in 0..n {
        let alpha = 2.0 * PI * k as f64 / n as f64;
        let v = components(geodesic_state(alpha), p)?.v;
        worst = worst.max((v - (p.j + 0.5 * p.gamma * alpha.sin()).abs()).abs());
    }
    Ok(worst)
}

/// [`speed_components`] with the commutator term negated, for mutation tests.
#[doc(hidden)]
pub fn speed_components_flipped_v3(s: BlochVector, p: PTParams) -> Result<SpeedSample> {
    Ok(speed_components_signed(s, p, -1.0).unwrap_or(SpeedSample {
        t: None,
        v1_sq: f64::NAN,
        v2_sq: f64::NAN,
        v3_sq: f64::NAN,
        v: f64::NAN,
    }))
}
