//! Normalized non-Hermitian qubit dynamics for `H = J σx − i(γ/2) σz`.
//!
//! States are handled either as density matrices propagated by the exact
//! exponential, or as Bloch vectors `S` with `ρ = I/2 + S·σ` obeying
//!
//! ```text
//! dS/dt = 2 A×S − B + 4 (B·S) S,    A = J x̂,  B = (γ/2) ẑ.
//! ```
//!
//! With `n̂ = Â×B̂ = −ŷ` the natural components are `S_A = S_x`, `S_B = S_z`
//! and `S_n = −S_y`. The plane `S_A = 0` is invariant and holds the geodesic
//! used throughout the crate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::ode::{self, OdeOptions};
use crate::qmat::{asinc, c, eig2, expm2, is_finite, sinc, Complex, Mat2, Vec3, ONE};

/// Relative width of the band around `γ = 2J` classified as exceptional.
pub const REGIME_REL_TOL: f64 = 1e-9;

/// Default integrator tolerance for the Bloch equation.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Tolerance on `|S0| = 1/2` for pure-state integrations.
pub const PURE_STATE_TOL: f64 = 1e-9;

/// Largest imaginary residue tolerated in the complex-valued geodesic formulas.
pub const GEODESIC_IMAG_TOL: f64 = 1e-10;

/// Bloch vector `S = tr(ρσ)/2`. Pure states have `|S| = 1/2`.
pub type BlochVector = Vec3;

/// Coupling `J` and gain/loss rate `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PTParams {
    pub j: f64,
    pub gamma: f64,
}

impl Default for PTParams {
    fn default() -> Self {
        PTParams { j: 1.0, gamma: 0.0 }
    }
}

impl PTParams {
    /// Checks `J > 0` and `γ ≥ 0`.
    pub fn new(j: f64, gamma: f64) -> Result<Self> {
        if !j.is_finite() || !gamma.is_finite() {
            return Err(Error::NonFinite("PT parameters"));
        }
        if j <= 0.0 {
            return Err(Error::domain(format!("J must be positive, got {j}")));
        }
        if gamma < 0.0 {
            return Err(Error::domain(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        Ok(PTParams { j, gamma })
    }

    pub fn a_vec(&self) -> Vec3 {
        Vec3::new(self.j, 0.0, 0.0)
    }

    pub fn b_vec(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, 0.5 * self.gamma)
    }

    /// `A² − B² = J² − γ²/4`, the squared eigenvalue of `H`.
    pub fn omega_sq(&self) -> f64 {
        self.j * self.j - 0.25 * self.gamma * self.gamma
    }

    pub fn regime(&self) -> Regime {
        regime(*self)
    }
}

/// Phase of `H`: real spectrum, coalescence, or complex-conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Symmetric,
    Exceptional,
    Broken,
}

pub fn regime(p: PTParams) -> Regime {
    regime_with(p, REGIME_REL_TOL)
}

/// [`regime`] with an explicit relative band `|γ − 2J| ≤ rel_tol·J`.
pub fn regime_with(p: PTParams, rel_tol: f64) -> Regime {
    let eps = rel_tol * p.j;
    let ep = 2.0 * p.j;
    if p.gamma < ep - eps {
        Regime::Symmetric
    } else if p.gamma > ep + eps {
        Regime::Broken
    } else {
        Regime::Exceptional
    }
}

/// Normalized amplitude pair `(c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState2 {
    amplitudes: [Complex; 2],
}

impl PureState2 {
    /// Normalizes `(c0, c1)`; a zero vector is rejected.
    pub fn new(c0: Complex, c1: Complex) -> Result<Self> {
        let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !n.is_finite() {
            return Err(Error::NonFinite("state amplitudes"));
        }
        if n < 1e-300 {
            return Err(Error::domain("zero state vector"));
        }
        Ok(PureState2 {
            amplitudes: [c0 / n, c1 / n],
        })
    }

    /// `[cos(θ/2) e^{iφ}, sin(θ/2)]`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (s, co) = (0.5 * theta).sin_cos();
        PureState2 {
            amplitudes: [Complex::from_polar(co, phi), c(s, 0.0)],
        }
    }

    pub fn amplitudes(&self) -> [Complex; 2] {
        self.amplitudes
    }

    pub fn density(&self) -> Mat2 {
        Mat2::outer(self.amplitudes)
    }

    /// Equals `(sinθ cosφ, −sinθ sinφ, cosθ)/2` for [`PureState2::from_angles`].
    pub fn bloch(&self) -> BlochVector {
        self.density().bloch()
    }
}

/// `ρ = I/2 + S·σ`.
pub fn density_from_bloch(s: BlochVector) -> Mat2 {
    Mat2::identity().scale_re(0.5) + Mat2::pauli_dot(s)
}

/// `(S_B, S_n) = (S_z, −S_y)`.
pub fn geodesic_components(s: BlochVector) -> (f64, f64) {
    (s.z, -s.y)
}

/// Bloch vector in the `S_A = 0` plane with the given `(S_B, S_n)`.
pub fn bloch_from_geodesic(sb: f64, sn: f64) -> BlochVector {
    Vec3::new(0.0, -sn, sb)
}

/// `J σx − i(γ/2) σz`.
pub fn hamiltonian(p: PTParams) -> Mat2 {
    Mat2::sigma_x().scale_re(p.j) - Mat2::sigma_z().scale(c(0.0, 0.5 * p.gamma))
}

/// `e^{−iHt}`, unnormalized.
pub fn propagator(p: PTParams, t: f64) -> Result<Mat2> {
    expm2(&hamiltonian(p).scale(c(0.0, -t)))
}

/// `U ρ U† / tr(U ρ U†)` for any real `t`, without validating `ρ`.
///
/// `ρ` is split into its eigenvectors, each vector is propagated on its own
/// and the weighted projectors are summed again, so the result stays
/// positive by construction.
pub(crate) fn propagate(rho: &Mat2, t: f64, p: PTParams) -> Result<Mat2> {
    if t == 0.0 {
        return Ok(*rho);
    }
    let h = rho.hermitian_part();
    let eig = eig2(&h)?;
    let parts: Vec<(f64, [Complex; 2])> = if eig.degenerate {
        let w = 0.5 * h.trace().re;
        vec![(w, [ONE, c(0.0, 0.0)]), (w, [c(0.0, 0.0), ONE])]
    } else {
        eig.pairs.iter().map(|e| (e.value.re, e.vector)).collect()
    };
    // Weights this small are round-off from building ρ, not populations; the
    // broken-phase flow would otherwise amplify them.
    let floor = RANK_FLOOR * parts.iter().map(|x| x.0.max(0.0)).sum::<f64>();
    let mut evolved = Vec::with_capacity(2);
    for (w, v) in parts {
        if w > floor {
            let (v_t, log_gain) = propagate_vector(v, t, p, 0)?;
            evolved.push((w.ln() + log_gain, v_t));
        }
    }
    let top = evolved
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::EvolutionDegenerate { trace: 0.0 });
    }
    let mut out = Mat2::zeros();
    let mut tr = 0.0;
    for (lw, v) in evolved {
        let w = (lw - top).exp();
        out = out + Mat2::outer(v).scale_re(w);
        tr += w;
    }
    if !(tr > 1e-300) {
        return Err(Error::EvolutionDegenerate { trace: tr });
    }
    Ok(out.scale_re(1.0 / tr))
}

/// Relative eigen-weight of `ρ` below which a component is dropped.
pub const RANK_FLOOR: f64 = 1e-14;

/// Fraction of the scaled propagator's norm a leg may lose to cancellation
/// before the leg is split.
const MIN_LEG_GAIN: f64 = 1e-2;

/// Propagates a unit vector, returning the normalized result and `ln |U v|²`.
///
/// Legs where the state moves toward the repelling eigenstate shrink
/// `|U v|` relative to the entries of `U`; those legs are halved so the digits
/// lost to cancellation stay bounded.
fn propagate_vector(
    v: [Complex; 2],
    t: f64,
    p: PTParams,
    depth: u32,
) -> Result<([Complex; 2], f64)> {
    let split = |v| -> Result<([Complex; 2], f64)> {
        let (mid, g1) = propagate_vector(v, 0.5 * t, p, depth + 1)?;
        let (end, g2) = propagate_vector(mid, 0.5 * t, p, depth + 1)?;
        Ok((end, g1 + g2))
    };
    let u = match propagator(p, t) {
        Ok(u) => u,
        Err(Error::NonFinite(_)) if depth < 64 => return split(v),
        Err(e) => return Err(e),
    };
    let m = u.max_abs();
    let w = u.scale_re(1.0 / m).apply(v);
    let n2 = w[0].norm_sqr() + w[1].norm_sqr();
    if n2 < MIN_LEG_GAIN && depth < 64 {
        return split(v);
    }
    if !(n2 > 1e-300) {
        return Err(Error::EvolutionDegenerate { trace: n2 });
    }
    let n = n2.sqrt();
    Ok(([w[0] / n, w[1] / n], n2.ln() + 2.0 * m.ln()))
}

/// Tolerance used when validating density-matrix arguments.
pub const DENSITY_TOL: f64 = 1e-9;

pub(crate) fn check_density(rho: &Mat2) -> Result<()> {
    if !rho.is_finite() {
        return Err(Error::NonFinite("density matrix"));
    }
    if !rho.is_unit_trace(DENSITY_TOL) {
        return Err(Error::domain("density matrix must have unit trace"));
    }
    if !rho.is_positive_semidefinite(DENSITY_TOL) {
        return Err(Error::domain(
            "density matrix must be Hermitian and positive semidefinite",
        ));
    }
    Ok(())
}

/// Normalized evolution `e^{−iHt} ρ0 e^{iH†t} / tr(·)` for `t ≥ 0`.
pub fn evolve_density(rho0: &Mat2, t: f64, p: PTParams) -> Result<Mat2> {
    check_density(rho0)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::domain(format!(
            "evolution time must be finite and non-negative, got {t}"
        )));
    }
    propagate(rho0, t, p)
}

/// Right-hand side of the Bloch equation for arbitrary `A`, `B`.
pub fn bloch_rhs_general(s: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    2.0 * a.cross(s) - b + (4.0 * b.dot(s)) * s
}

/// `dS/dt = 2 A×S − B + 4 (B·S) S`.
pub fn bloch_rhs(s: BlochVector, p: PTParams) -> Vec3 {
    bloch_rhs_general(s, p.a_vec(), p.b_vec())
}

/// Time derivatives `(dS_A, dS_B, dS_n)` written component by component.
pub fn bloch_rhs_components(s: BlochVector, p: PTParams) -> (f64, f64, f64) {
    let (a, b) = (p.j, 0.5 * p.gamma);
    let (sa, sb, sn) = (s.x, s.z, -s.y);
    let d_sa = 4.0 * b * sa * sb;
    let d_sb = -2.0 * a * sn - b + 4.0 * b * sb * sb;
    let d_sn = 2.0 * a * sb + 4.0 * b * sb * sn;
    (d_sa, d_sb, d_sn)
}

/// How the stored sample times were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeGrid {
    /// Accepted steps of the adaptive integrator.
    Adaptive,
    Uniform {
        dt: f64,
    },
    /// Caller-supplied times.
    Explicit,
}

/// Sampled Bloch trajectory with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    pub grid: TimeGrid,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, BlochVector)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, BlochVector)> + '_ {
        self.times.iter().copied().zip(self.states.iter().copied())
    }

    /// Columns `t,S_x,S_y,S_z`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        export::write_csv(
            w,
            &["t", "S_x", "S_y", "S_z"],
            self.iter().map(|(t, s)| vec![t, s.x, s.y, s.z]),
        )
    }
}

fn check_integration_args(s0: BlochVector, tol: f64) -> Result<()> {
    if !s0.is_finite() || !tol.is_finite() {
        return Err(Error::NonFinite("Bloch integration arguments"));
    }
    if (s0.norm() - 0.5).abs() > PURE_STATE_TOL {
        return Err(Error::domain(format!(
            "initial Bloch vector must have |S| = 1/2, got {}",
            s0.norm()
        )));
    }
    if !(1e-12..=1e-6).contains(&tol) {
        return Err(Error::domain(format!(
            "tolerance must lie in [1e-12, 1e-6], got {tol}"
        )));
    }
    Ok(())
}

fn bloch_options(p: PTParams, tol: f64) -> OdeOptions {
    OdeOptions::with_tol(tol, 0.05 / p.j.max(p.gamma))
}

fn project_to_sphere(y: &mut [f64; 3]) {
    let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    if n > 0.0 {
        let k = 0.5 / n;
        y.iter_mut().for_each(|v| *v *= k);
    }
}

/// Integrates the Bloch equation from a pure state and records every
/// accepted step.
pub fn evolve_bloch_numeric(
    s0: BlochVector,
    p: PTParams,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_integration_args(s0, tol)?;
    if !(t_end >= 0.0) {
        return Err(Error::domain("t_end must be non-negative"));
    }
    let (a, b) = (p.a_vec(), p.b_vec());
    let mut times = vec![0.0];
    let mut states = vec![s0];
    ode::integrate(
        |_, y: &[f64; 3]| bloch_rhs_general(Vec3::from_array(*y), a, b).to_array(),
        0.0,
        s0.to_array(),
        &[t_end],
        &bloch_options(p, tol),
        |t, y| {
            project_to_sphere(y);
            times.push(t);
            states.push(Vec3::from_array(*y));
        },
    )?;
    Ok(Trajectory {
        times,
        states,
        grid: TimeGrid::Adaptive,
    })
}

/// Integrates the Bloch equation and samples it at `times` (strictly
/// increasing, starting at or after 0).
pub fn evolve_bloch_at(
    s0: BlochVector,
    p: PTParams,
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    check_integration_args(s0, tol)?;
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| !(t >= 0.0)) {
        return Err(Error::domain(
            "sample times must be strictly increasing and non-negative",
        ));
    }
    let (a, b) = (p.a_vec(), p.b_vec());
    let (ys, _) = ode::integrate(
        |_, y: &[f64; 3]| bloch_rhs_general(Vec3::from_array(*y), a, b).to_array(),
        0.0,
        s0.to_array(),
        times,
        &bloch_options(p, tol),
        |_, y| project_to_sphere(y),
    )?;
    Ok(Trajectory {
        times: times.to_vec(),
        states: ys.into_iter().map(Vec3::from_array).collect(),
        grid: TimeGrid::Explicit,
    })
}

/// Samples at `0, dt, 2dt, …` up to `t_end`: `floor(t_end/dt) + 1` rows.
pub fn evolve_bloch_uniform(
    s0: BlochVector,
    p: PTParams,
    t_end: f64,
    dt: f64,
    tol: f64,
) -> Result<Trajectory> {
    let times = uniform_grid(t_end, dt)?;
    let mut traj = evolve_bloch_at(s0, p, &times, tol)?;
    traj.grid = TimeGrid::Uniform { dt };
    Ok(traj)
}

pub(crate) fn uniform_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::domain("need dt > 0 and finite t_end >= 0"));
    }
    let n = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

/// Closed-form motion on the `S_A = 0` circle.
///
/// With `Ω = √(A² − B²)` and a complex phase offset `τ0`, let
/// `s = τ·sinc(Ωτ)` at `τ = τ0 + t`. Then
///
/// ```text
/// S_n = −½ (2A s² − 1/(A+B)) / (2B s² + 1/(A+B))
/// S_B = −τ sinc(2Ωτ) / (2B s² + 1/(A+B))
/// ```
///
/// which is the trigonometric solution for real `Ω`, its hyperbolic
/// continuation for imaginary `Ω`, and a rational function of `t` at the
/// exceptional point. Only `Ω²` enters, so no branch on the regime is needed.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicSolution {
    a: f64,
    b: f64,
    omega: Complex,
    tau0: Complex,
    /// Set when the initial point is stationary.
    fixed: Option<(f64, f64)>,
}

impl GeodesicSolution {
    /// Fixes the offset from `(S_B(0), S_n(0))` on the circle of radius 1/2.
    pub fn new(sb0: f64, sn0: f64, p: PTParams) -> Result<Self> {
        if !sb0.is_finite() || !sn0.is_finite() {
            return Err(Error::NonFinite("geodesic initial data"));
        }
        if (sb0 * sb0 + sn0 * sn0 - 0.25).abs() > PURE_STATE_TOL {
            return Err(Error::domain(
                "initial point must satisfy S_B² + S_n² = 1/4",
            ));
        }
        let (a, b) = (p.j, 0.5 * p.gamma);
        let omega = c(a * a - b * b, 0.0).sqrt();
        let denom = 2.0 * a + 4.0 * b * sn0;
        let mut sol = GeodesicSolution {
            a,
            b,
            omega,
            tau0: c(0.0, 0.0),
            fixed: None,
        };
        if denom.abs() < 1e-12 * a {
            sol.fixed = Some((sb0, sn0));
            return Ok(sol);
        }
        let s0_sq = (1.0 - 2.0 * sn0) / ((a + b) * denom);
        let s0 = c(s0_sq, 0.0).sqrt();
        let tau = s0 * asinc(omega * s0);
        let mut best = None;
        for cand in [tau, -tau] {
            let (sb, sn) = sol.eval(cand);
            let dev = (sb.re - sb0).abs().max((sn.re - sn0).abs());
            if best.is_none_or(|(_, d)| dev < d) {
                best = Some((cand, dev));
            }
        }
        let (tau0, dev) = best.expect("two candidates");
        if !(dev <= 1e-8) {
            return Err(Error::domain(format!(
                "no phase offset reproduces the initial point (deviation {dev:e})"
            )));
        }
        sol.tau0 = tau0;
        Ok(sol)
    }

    fn eval(&self, tau: Complex) -> (Complex, Complex) {
        let inv = ONE / (self.a + self.b);
        let s = tau * sinc(self.omega * tau);
        let s2 = s * s;
        let d = inv + s2 * (2.0 * self.b);
        let n = s2 * (2.0 * self.a) - inv;
        let sn = n / d * -0.5;
        let sb = -(tau * sinc(self.omega * tau * 2.0)) / d;
        (sb, sn)
    }

    /// Signed `(S_B, S_n)` at time `t ≥ 0`.
    pub fn signed_at(&self, t: f64) -> Result<(f64, f64)> {
        if let Some(fp) = self.fixed {
            return Ok(fp);
        }
        let (sb, sn) = self.eval(self.tau0 + t);
        if !is_finite(sb) || !is_finite(sn) {
            // Broken phase, far past the transient: the state sits on the sink.
            if self.b > self.a {
                let kappa = (self.b * self.b - self.a * self.a).sqrt();
                return Ok((-kappa / (2.0 * self.b), -self.a / (2.0 * self.b)));
            }
            return Err(Error::NonFinite("geodesic solution"));
        }
        let imag = sb.im.abs().max(sn.im.abs());
        if imag > GEODESIC_IMAG_TOL {
            return Err(Error::InternalInconsistency(format!(
                "geodesic solution left the real axis by {imag:e} at t = {t}"
            )));
        }
        Ok((sb.re, sn.re))
    }

    /// `(|S_B|, S_n)` at time `t`.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        let (sb, sn) = self.signed_at(t)?;
        Ok((sb.abs(), sn))
    }
}

/// `(|S_B(t)|, S_n(t))` from the closed form, see [`GeodesicSolution`].
pub fn analytic_sb_sn(sb0: f64, sn0: f64, t: f64, p: PTParams) -> Result<(f64, f64)> {
    GeodesicSolution::new(sb0, sn0, p)?.at(t)
}

/// `S_n(0)(A + 2B S_n(0))`, equal to `−½ dS_B/dt` at `t = 0` on the circle.
///
/// On the `S_B < 0` half of the circle a negative value means `|S_B|` starts
/// to shrink.
pub fn path_coefficient(sn0: f64, p: PTParams) -> f64 {
    sn0 * (p.j + p.gamma * sn0)
}

/// Stability of the eigenstate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    /// Real spectrum: neighbouring orbits circle the eigenstates.
    Centers,
    /// Coalesced eigenstate, returned twice.
    Degenerate,
    /// Complex pair: one repelling and one attracting eigenstate.
    SourceSink,
}

/// Bloch vectors of the two right eigenstates of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints {
    pub source: BlochVector,
    /// Eigenstate whose eigenvalue has the larger imaginary part.
    pub sink: BlochVector,
    pub kind: FixedPointKind,
}

pub fn fixed_points(p: PTParams) -> Result<FixedPoints> {
    let h = hamiltonian(p);
    if regime(p) == Regime::Exceptional {
        let [[a, _], [_, d]] = h.0;
        let b = h.0[0][1];
        let s = PureState2::new(b, (a + d) * 0.5 - a)?.bloch();
        return Ok(FixedPoints {
            source: s,
            sink: s,
            kind: FixedPointKind::Degenerate,
        });
    }
    let e = eig2(&h)?;
    let [p0, p1] = e.pairs;
    let (src, snk) = if p0.value.im <= p1.value.im {
        (p0, p1)
    } else {
        (p1, p0)
    };
    let kind = match regime(p) {
        Regime::Symmetric => FixedPointKind::Centers,
        _ => FixedPointKind::SourceSink,
    };
    Ok(FixedPoints {
        source: PureState2::new(src.vector[0], src.vector[1])?.bloch(),
        sink: PureState2::new(snk.vector[0], snk.vector[1])?.bloch(),
        kind,
    })
}
