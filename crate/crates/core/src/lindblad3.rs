//! Three-level decay `|f⟩ → |g⟩` under a Lindblad master equation, and the
//! recovery of the non-Hermitian qubit by post-selecting the `|f⟩, |e⟩`
//! block.
//!
//! Basis order is `(f, e, g)`. With
//!
//! ```text
//! H  = J(|f⟩⟨e| + |e⟩⟨f|) − ε_g |g⟩⟨g|,     L₁ = |g⟩⟨f|,
//! dρ/dt = −i[H, ρ] + γ₁ (L₁ρL₁† − ½{L₁†L₁, ρ})
//! ```
//!
//! the `f, e` block evolves under `H_PT − i(γ₁/4)I` with `γ = γ₁/2`, and the
//! scalar shift drops out once the block is normalized.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::ComplexFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::nhq::{self, PTParams, PureState2};
use crate::ode::{self, OdeOptions};
use crate::qmat::{c, sinhc, Complex, Mat2, Mat3, ONE, ZERO};

/// A three-level density matrix in the basis `(f, e, g)`.
pub type Density3 = Mat3;

/// Tolerance for Hermiticity, trace and positivity of inputs.
pub const DENSITY3_TOL: f64 = 1e-8;

/// Default integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-11;

/// Allowed imaginary residue in quantities that must come out real.
pub const IMAG_TOL: f64 = 1e-10;

/// Below this `|ω|` the parametric solution uses its regularized form.
pub const OMEGA_SERIES: f64 = 1e-2;

/// Largest allowed gap between the parametric solution and the exact block
/// propagator.
pub const RECONSTRUCTION_TOL: f64 = 1e-5;

/// Block traces at or below this cannot be post-selected.
pub const POSTSELECT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladParams {
    pub j: f64,
    pub gamma1: f64,
    pub eps_g: f64,
}

impl LindbladParams {
    /// `ε_g = 1`.
    pub fn new(j: f64, gamma1: f64) -> Result<Self> {
        Self::with_eps_g(j, gamma1, 1.0)
    }

    pub fn with_eps_g(j: f64, gamma1: f64, eps_g: f64) -> Result<Self> {
        if !(j.is_finite() && gamma1.is_finite() && eps_g.is_finite()) {
            return Err(Error::NonFinite("Lindblad parameters"));
        }
        if !(j > 0.0) || gamma1 < 0.0 {
            return Err(Error::domain(format!(
                "need J > 0 and gamma1 >= 0, got J={j}, gamma1={gamma1}"
            )));
        }
        Ok(LindbladParams { j, gamma1, eps_g })
    }

    /// The qubit parameters reproduced by post-selection, `γ = γ₁/2`.
    pub fn pt_params(&self) -> PTParams {
        PTParams {
            j: self.j,
            gamma: 0.5 * self.gamma1,
        }
    }

    pub fn hamiltonian(&self) -> Mat3 {
        let j = c(self.j, 0.0);
        Mat3::from_rows([
            [ZERO, j, ZERO],
            [j, ZERO, ZERO],
            [ZERO, ZERO, c(-self.eps_g, 0.0)],
        ])
    }

    /// `L₁ = |g⟩⟨f|`.
    pub fn jump(&self) -> Mat3 {
        let mut l = Mat3::zeros();
        l.0[2][0] = ONE;
        l
    }
}

/// `H − i(γ₁/2) L₁†L₁`.
///
/// Fails with [`Error::InternalInconsistency`] unless the upper block plus
/// `i(γ₁/4)` reproduces `H_PT` at `γ = γ₁/2`.
pub fn heff(p: LindbladParams) -> Result<Mat3> {
    let l = p.jump();
    let h = p.hamiltonian() - l.dagger().matmul(&l).scale(c(0.0, 0.5 * p.gamma1));
    let shifted = h.block2() + Mat2::identity().scale(c(0.0, 0.25 * p.gamma1));
    let dev = shifted.frobenius_distance(&nhq::hamiltonian(p.pt_params()));
    if dev > 1e-12 * (1.0 + p.gamma1 + p.j) {
        return Err(Error::InternalInconsistency(format!(
            "H_eff block differs from H_PT by {dev:e}"
        )));
    }
    Ok(h)
}

/// Right-hand side written out entry by entry.
pub fn lindblad_rhs(rho: &Density3, p: LindbladParams) -> Mat3 {
    let r = |a: usize, b: usize| rho.0[a][b];
    let i = c(0.0, 1.0);
    let (j, g1, eg) = (p.j, p.gamma1, p.eps_g);
    let (f, e, g) = (0, 1, 2);
    let mut d = Mat3::zeros();
    d.0[f][f] = i * j * (r(f, e) - r(e, f)) - g1 * r(f, f);
    d.0[f][e] = -0.5 * g1 * r(f, e) + i * j * (r(f, f) - r(e, e));
    d.0[f][g] = -i * (eg * r(f, g) + j * r(e, g)) - 0.5 * g1 * r(f, g);
    d.0[e][f] = -0.5 * g1 * r(e, f) - i * j * (r(f, f) - r(e, e));
    d.0[e][e] = -i * j * (r(f, e) - r(e, f));
    d.0[e][g] = -i * (j * r(f, g) + eg * r(e, g));
    d.0[g][f] = i * (eg * r(g, f) + j * r(g, e)) - 0.5 * g1 * r(g, f);
    d.0[g][e] = i * (j * r(g, f) + eg * r(g, e));
    d.0[g][g] = g1 * r(f, f);
    d
}

/// `−i[H, ρ] + γ₁ (LρL† − ½{L†L, ρ})`.
pub fn lindblad_rhs_abstract(rho: &Density3, p: LindbladParams) -> Mat3 {
    let (h, l) = (p.hamiltonian(), p.jump());
    let ld = l.dagger();
    let coherent = h.commutator(rho).scale(c(0.0, -1.0));
    let dissipator = l.matmul(rho).matmul(&ld) - ld.matmul(&l).anticommutator(rho).scale_re(0.5);
    coherent + dissipator.scale_re(p.gamma1)
}

/// `−i(H_eff ρ − ρ H_eff†) + γ₁ L ρ L†`: no-jump evolution plus jump term.
pub fn lindblad_rhs_jump(rho: &Density3, p: LindbladParams) -> Result<Mat3> {
    let h = heff(p)?;
    let l = p.jump();
    let nojump = (h.matmul(rho) - rho.matmul(&h.dagger())).scale(c(0.0, -1.0));
    Ok(nojump + l.matmul(rho).matmul(&l.dagger()).scale_re(p.gamma1))
}

fn check_density3(rho: &Density3) -> Result<()> {
    if !rho.is_finite() {
        return Err(Error::NonFinite("density matrix"));
    }
    if !rho.is_hermitian(DENSITY3_TOL)
        || !rho.is_unit_trace(DENSITY3_TOL)
        || !rho.is_positive_semidefinite(DENSITY3_TOL)
    {
        return Err(Error::domain(
            "three-level state must be Hermitian, unit trace and positive",
        ));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-14..=1e-4).contains(&tol) {
        return Err(Error::domain(format!(
            "tolerance must lie in [1e-14, 1e-4], got {tol}"
        )));
    }
    Ok(())
}

/// Integrated three-level states at given times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory3 {
    pub times: Vec<f64>,
    pub states: Vec<Density3>,
}

const ENTRY_NAMES: [&str; 3] = ["f", "e", "g"];

impl Trajectory3 {
    /// Columns `t`, then `re_ab, im_ab` for the nine entries in row order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        for a in ENTRY_NAMES {
            for b in ENTRY_NAMES {
                header.push(format!("re_{a}{b}"));
                header.push(format!("im_{a}{b}"));
            }
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        export::write_csv(
            w,
            &header,
            self.times.iter().zip(&self.states).map(|(t, s)| {
                let mut row = vec![*t];
                row.extend_from_slice(&s.to_reals());
                row
            }),
        )
    }
}

/// Integrates the master equation and samples it at `times` (ascending,
/// non-negative).
///
/// Every accepted step is made Hermitian again and rescaled to unit trace.
/// The largest correction applied is logged at debug level.
pub fn integrate_trajectory(
    rho0: &Density3,
    times: &[f64],
    p: LindbladParams,
    tol: f64,
) -> Result<Trajectory3> {
    check_density3(rho0)?;
    check_tol(tol)?;
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::domain(
            "sample times must be finite and non-negative",
        ));
    }
    let opts = OdeOptions::with_tol(tol, 0.1 / p.j.max(p.gamma1).max(p.eps_g.abs()));
    let mut drift = 0.0f64;
    let (ys, stats) = ode::integrate(
        |_, y: &[f64; 18]| lindblad_rhs(&Mat3::from_reals(y), p).to_reals(),
        0.0,
        rho0.to_reals(),
        times,
        &opts,
        |_, y| {
            let m = Mat3::from_reals(y);
            let h = m.hermitian_part();
            let tr = h.trace().re;
            drift = drift.max(m.frobenius_distance(&h)).max((tr - 1.0).abs());
            *y = h.scale_re(1.0 / tr).to_reals();
        },
    )?;
    log::debug!(
        "lindblad integrate: {} steps, {} rejected, max symmetrization drift {drift:e}",
        stats.accepted,
        stats.rejected
    );
    let states: Vec<Density3> = ys.iter().map(Mat3::from_reals).collect();
    if states.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("integrated state"));
    }
    Ok(Trajectory3 {
        times: times.to_vec(),
        states,
    })
}

/// State at time `t ≥ 0`.
pub fn integrate(rho0: &Density3, t: f64, p: LindbladParams, tol: f64) -> Result<Density3> {
    Ok(integrate_trajectory(rho0, &[t], p, tol)?.states[0])
}

/// Qubit state placed in the `f, e` block, `g` empty.
pub fn embed(rho2: &Mat2) -> Density3 {
    Mat3::embed2(rho2, ZERO)
}

/// [`embed`] of the pure state `|ψ(θ, φ)⟩` in the qubit convention.
pub fn embed_pure(theta: f64, phi: f64) -> Density3 {
    embed(&PureState2::from_angles(theta, phi).density())
}

/// Normalized upper block `ρ₂ / tr ρ₂`.
pub fn postselect(rho3: &Density3) -> Result<Mat2> {
    let block = rho3.block2();
    let tr = block.trace().re;
    if !(tr > POSTSELECT_FLOOR) {
        return Err(Error::PostSelectionImpossible { trace: tr });
    }
    Ok(block.scale_re(1.0 / tr))
}

/// The state `½(|f⟩ + i|e⟩)(⟨f| − i⟨e|)` used for the closed-form solution.
pub fn e15_initial_state() -> Density3 {
    let h = 0.5;
    Mat3::from_rows([
        [c(h, 0.0), c(0.0, -h), ZERO],
        [c(0.0, h), c(h, 0.0), ZERO],
        [ZERO, ZERO, ZERO],
    ])
}

fn real_part(z: Complex, what: &'static str) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return Err(Error::TranscriptionMismatch {
            what,
            deviation: z.im.abs(),
        });
    }
    Ok(z.re)
}

/// `(e^{−γ₁t/2} cosh(kt/2), e^{−γ₁t/2} k sinh(kt/2))` with `k = √(γ₁² − 16)`
/// complex, evaluated without forming the growing exponential alone.
fn damped_hyperbolics(t: f64, gamma1: f64) -> Result<(f64, f64)> {
    let k = c(gamma1 * gamma1 - 16.0, 0.0).sqrt();
    let up = ((k - gamma1) * (0.5 * t)).exp();
    let down = ((-k - gamma1) * (0.5 * t)).exp();
    let ch = real_part(0.5 * (up + down), "damped cosh")?;
    let ksh = real_part(0.5 * k * (up - down), "damped k sinh")?;
    Ok((ch, ksh))
}

/// Closed-form solution from [`e15_initial_state`] with `J = 1`.
pub fn analytic_e15(t: f64, gamma1: f64) -> Result<Density3> {
    if !(t >= 0.0) || !t.is_finite() || !(gamma1 >= 0.0) || !gamma1.is_finite() {
        return Err(Error::domain("need finite t >= 0 and gamma1 >= 0"));
    }
    let (ch, ksh) = damped_hyperbolics(t, gamma1)?;
    let decay = (-0.5 * gamma1 * t).exp();
    let n = 4.0 + gamma1;
    let ff = 0.5 * (4.0 * decay + gamma1 * ch - ksh) / n;
    let ee = 0.5 * (4.0 * decay + gamma1 * ch + ksh) / n;
    let fe = -0.5 * (gamma1 * decay + 4.0 * ch) / n;
    let gg = 1.0 - (4.0 * decay + gamma1 * ch) / n;
    Ok(Mat3::from_rows([
        [c(ff, 0.0), c(0.0, fe), ZERO],
        [c(0.0, -fe), c(ee, 0.0), ZERO],
        [ZERO, ZERO, c(gg, 0.0)],
    ]))
}

/// Closed form of `postselect(analytic_e15(t, γ₁))`.
pub fn rho2n_closed_form(t: f64, gamma1: f64) -> Result<Mat2> {
    if !(t >= 0.0) || !t.is_finite() || !(gamma1 >= 0.0) || !gamma1.is_finite() {
        return Err(Error::domain("need finite t >= 0 and gamma1 >= 0"));
    }
    let k = c(gamma1 * gamma1 - 16.0, 0.0).sqrt();
    let ch = real_part((k * (0.5 * t)).cosh(), "cosh")?;
    let ksh = real_part(k * (k * (0.5 * t)).sinh(), "k sinh")?;
    let k2 = gamma1 * gamma1 - 16.0;
    let diag = ksh / (4.0 + gamma1 * ch);
    let off = 2.0 / (gamma1 - k2 / (gamma1 + 4.0 * ch));
    Ok(Mat2::new(
        c(0.5 * (1.0 - diag), 0.0),
        c(0.0, -off),
        c(0.0, off),
        c(0.5 * (1.0 + diag), 0.0),
    ))
}

/// `(r₃, θ₃, φ₃)` parametrization of a state whose `g` row and column
/// vanish apart from `ρ_gg`:
///
/// ```text
/// ρ_ff = r₃(1 + cos θ₃),  ρ_fe = r₃ sin θ₃ e^{−iφ₃},  ρ_ee = r₃(1 − cos θ₃),  ρ_gg = 1 − 2r₃.
/// ```
///
/// Note the sign of the phase: it is opposite to the qubit convention of
/// [`PureState2::from_angles`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricForm3 {
    pub r3: f64,
    pub theta3: f64,
    pub phi3: f64,
}

impl ParametricForm3 {
    pub fn density(&self) -> Density3 {
        let (r, th, ph) = (self.r3, self.theta3, self.phi3);
        let off = c(0.0, -ph).exp() * (r * th.sin());
        Mat3::from_rows([
            [c(r * (1.0 + th.cos()), 0.0), off, ZERO],
            [off.conj(), c(r * (1.0 - th.cos()), 0.0), ZERO],
            [ZERO, ZERO, c(1.0 - 2.0 * r, 0.0)],
        ])
    }

    /// `√(1/3 − 2r₃ + 4r₃²)`, the length of the Gell-Mann vector `b` in
    /// `ρ = I/3 + b·λ`.
    pub fn bloch_norm(&self) -> f64 {
        (1.0 / 3.0 - 2.0 * self.r3 + 4.0 * self.r3 * self.r3).sqrt()
    }
}

/// `√((tr ρ² − 1/3)/2)`, the Gell-Mann vector length of any 3×3 state.
pub fn gell_mann_norm(rho: &Density3) -> f64 {
    let purity = rho.matmul(rho).trace().re;
    ((purity - 1.0 / 3.0) / 2.0).max(0.0).sqrt()
}

fn parametric_initial(theta: f64, phi: f64) -> Mat2 {
    ParametricForm3 {
        r3: 0.5,
        theta3: theta,
        phi3: phi,
    }
    .density()
    .block2()
}

/// `(r₃, cos θ₃, e^{iφ₃})` from the closed-form expressions with `J = 1`.
fn parametric_raw(t: f64, g: f64, s1: f64, s2: f64, s3: f64) -> (Complex, Complex, Complex) {
    let w = c(g * g - 4.0, 0.0).sqrt();
    let g24 = g * g - 4.0;
    let i = c(0.0, 1.0);
    if w.abs() >= OMEGA_SERIES {
        let ch = (w * t).cosh();
        let sh = (w * t).sinh();
        let r3 = (-g * t).exp() * (2.0 * g * s2 + g * (g - 2.0 * s2) * ch - g * s3 * w * sh - 4.0)
            / (2.0 * g24);
        let x = 2.0 * w * (g * s2 - 2.0) + g * w * (g - 2.0 * s2) * ch - g * g24 * s3 * sh;
        let (ep, em) = ((w * t).exp(), (-w * t).exp());
        let cos =
            g24 * (g * em + 2.0 * s2 * (ep - em) + ep * (s3 * w - g) + s3 * w * em) / (2.0 * x);
        let y = (2.0 * s2 - g) * sh + s3 * w * ch;
        let root = (1.0 - g24 * g24 * y * y / (x * x)).sqrt();
        let b = w * (g * (g * s2 - 2.0) + i * g24 * s1) + 2.0 * w * (g - 2.0 * s2) * ch
            - 2.0 * g24 * s3 * sh;
        (r3, cos, i * x * root / b)
    } else {
        // Same expressions with the ω → 0 singularities divided out:
        // C = 2 sinh²(ωt/2)/ω², S = sinh(ωt)/ω.
        let half = w * (0.5 * t);
        let cc = 0.5 * t * t * sinhc(half) * sinhc(half);
        let ss = t * sinhc(w * t);
        let r = 1.0 + g * (g - 2.0 * s2) * cc - g * s3 * ss;
        let cos = (s3 * (w * t).cosh() + (2.0 * s2 - g) * ss) / r;
        let d = s2 + i * s1 + (2.0 * g - 4.0 * s2) * cc - 2.0 * s3 * ss;
        let root = (1.0 - cos * cos).sqrt();
        ((-g * t).exp() * 0.5 * r, cos, i * r * root / d)
    }
}

/// `(r₃, θ₃, φ₃)` at time `t` for `J = 1`, `γ₁ = 2γ`, starting from
/// `r₃ = ½, θ₃ = θ, φ₃ = φ`.
///
/// `θ₃ ∈ [0, π]` and `φ₃ ∈ [0, 2π)` are principal values. The result is
/// checked against the exact block propagator and a gap above
/// [`RECONSTRUCTION_TOL`] is reported as [`Error::TranscriptionMismatch`].
pub fn analytic_parametric(t: f64, gamma: f64, theta: f64, phi: f64) -> Result<ParametricForm3> {
    if !(t >= 0.0) || !t.is_finite() || !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::domain("need finite t >= 0 and gamma >= 0"));
    }
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::NonFinite("initial angles"));
    }
    let (s1, s2, s3) = (
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    );
    let (r3, cos, phase) = parametric_raw(t, gamma, s1, s2, s3);
    let r3 = real_part(r3, "r3")?;
    let cos = real_part(cos, "cos theta3")?.clamp(-1.0, 1.0);
    let phi3 = if phase.abs() > 0.0 {
        phase.arg().rem_euclid(2.0 * PI)
    } else {
        0.0
    };
    let form = ParametricForm3 {
        r3,
        theta3: cos.acos(),
        phi3,
    };

    let p = PTParams::new(1.0, gamma)?;
    let u = nhq::propagator(p, t)?;
    let block = u
        .matmul(&parametric_initial(theta, phi))
        .matmul(&u.dagger())
        .scale_re((-gamma * t).exp());
    let exact = Mat3::embed2(&block, c(1.0 - block.trace().re, 0.0));
    let deviation = form.density().frobenius_distance(&exact);
    if !(deviation <= RECONSTRUCTION_TOL) {
        return Err(Error::TranscriptionMismatch {
            what: "parametric three-level solution",
            deviation,
        });
    }
    Ok(form)
}

/// [`analytic_parametric`] along ascending `times` with `φ₃` unwrapped by
/// continuity, starting from `φ`.
pub fn analytic_parametric_series(
    times: &[f64],
    gamma: f64,
    theta: f64,
    phi: f64,
) -> Result<Vec<ParametricForm3>> {
    let mut out: Vec<ParametricForm3> = Vec::with_capacity(times.len());
    let mut prev = phi;
    for &t in times {
        let mut f = analytic_parametric(t, gamma, theta, phi)?;
        f.phi3 += 2.0 * PI * ((prev - f.phi3) / (2.0 * PI)).round();
        prev = f.phi3;
        out.push(f);
    }
    Ok(out)
}

/// Grid for [`equivalence_sweep`]: `θ` on `[0, π]` endpoints included, `φ`
/// on `[0, 2π)`, and explicit times and rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceGrid {
    pub j: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub times: Vec<f64>,
    pub gamma1s: Vec<f64>,
    pub tol: f64,
}

impl EquivalenceGrid {
    /// 8 × 8 angles, 10 times on `[0, t_end]`.
    pub fn new(gamma1s: Vec<f64>, t_end: f64) -> Self {
        EquivalenceGrid {
            j: 1.0,
            n_theta: 8,
            n_phi: 8,
            times: (0..10).map(|k| t_end * k as f64 / 9.0).collect(),
            gamma1s,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCell {
    pub theta: f64,
    pub phi: f64,
    pub gamma1: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub grid: EquivalenceGrid,
    pub cells: usize,
    pub max_deviation: f64,
    pub argmax: EquivalenceCell,
}

impl EquivalenceReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        export::write_json(w, self)
    }
}

/// Largest Frobenius gap between the post-selected three-level evolution
/// and the normalized qubit evolution over the grid.
pub fn equivalence_sweep(grid: &EquivalenceGrid) -> Result<EquivalenceReport> {
    if grid.n_theta < 2 || grid.n_phi < 1 || grid.times.is_empty() || grid.gamma1s.is_empty() {
        return Err(Error::domain("equivalence grid is empty"));
    }
    let mut jobs = Vec::new();
    for &g1 in &grid.gamma1s {
        for i in 0..grid.n_theta {
            for k in 0..grid.n_phi {
                let theta = PI * i as f64 / (grid.n_theta - 1) as f64;
                jobs.push((g1, theta, 2.0 * PI * k as f64 / grid.n_phi as f64));
            }
        }
    }
    let per_job: Vec<Result<(f64, EquivalenceCell)>> = jobs
        .par_iter()
        .map(|&(g1, theta, phi)| {
            let lp = LindbladParams::new(grid.j, g1)?;
            let rho2 = PureState2::from_angles(theta, phi).density();
            let traj = integrate_trajectory(&embed(&rho2), &grid.times, lp, grid.tol)?;
            let mut worst = (
                -1.0,
                EquivalenceCell {
                    theta,
                    phi,
                    gamma1: g1,
                    t: grid.times[0],
                },
            );
            for (&t, s) in traj.times.iter().zip(&traj.states) {
                let dev = postselect(s)?.frobenius_distance(&nhq::evolve_density(
                    &rho2,
                    t,
                    lp.pt_params(),
                )?);
                if dev > worst.0 {
                    worst = (
                        dev,
                        EquivalenceCell {
                            theta,
                            phi,
                            gamma1: g1,
                            t,
                        },
                    );
                }
            }
            Ok(worst)
        })
        .collect();
    let mut best: Option<(f64, EquivalenceCell)> = None;
    for r in per_job {
        let r = r?;
        if best.is_none_or(|b| r.0 > b.0) {
            best = Some(r);
        }
    }
    let (max_deviation, argmax) = best.expect("non-empty grid");
    Ok(EquivalenceReport {
        grid: grid.clone(),
        cells: jobs.len() * grid.times.len(),
        max_deviation,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(g1: f64) -> LindbladParams {
        LindbladParams::new(1.0, g1).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng) -> Density3 {
        let mut a = Mat3::zeros();
        for row in a.0.iter_mut() {
            for z in row.iter_mut() {
                *z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let m = a.matmul(&a.dagger());
        m.scale_re(1.0 / m.trace().re)
    }

    #[test]
    fn heff_block_and_jump_operator() {
        let h = heff(lp(0.0)).unwrap();
        assert!(h.is_hermitian(1e-15));
        let p = lp(4.0);
        let l = p.jump();
        assert_eq!(l.dagger().matmul(&l), Mat3::from_diag([ONE, ZERO, ZERO]));
        let b = heff(p).unwrap().block2() + Mat2::identity().scale(c(0.0, 1.0));
        assert_eq!(b, Mat2::new(c(0.0, -1.0), ONE, ONE, c(0.0, 1.0)));
    }

    #[test]
    fn three_forms_of_the_generator_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..100 {
            let p = LindbladParams::with_eps_g(0.7 + 0.01 * k as f64, 0.3 * k as f64 / 10.0, -0.4)
                .unwrap();
            let rho = random_state(&mut rng);
            let a = lindblad_rhs(&rho, p);
            assert!(a.max_abs() > 0.0);
            assert!(a.frobenius_distance(&lindblad_rhs_abstract(&rho, p)) < 1e-12);
            assert!(a.frobenius_distance(&lindblad_rhs_jump(&rho, p).unwrap()) < 1e-12);
            assert!(a.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn dark_state_and_initial_decay_rate() {
        let mut g = Mat3::zeros();
        g.0[2][2] = ONE;
        assert_eq!(lindblad_rhs(&g, lp(3.0)).max_abs(), 0.0);
        let d = lindblad_rhs(&e15_initial_state(), lp(3.0));
        assert_abs_diff_eq!(d.0[2][2].re, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn integrator_basics() {
        let rho = e15_initial_state();
        assert_eq!(integrate(&rho, 0.0, lp(2.0), DEFAULT_TOL).unwrap(), rho);
        let g1 = 3.0;
        let late = integrate(&rho, 50.0 / g1, lp(g1), DEFAULT_TOL).unwrap();
        assert!((late.0[2][2].re - 1.0).abs() < 1e-4);
        let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let traj = integrate_trajectory(&rho, &times, lp(g1), DEFAULT_TOL).unwrap();
        for s in &traj.states {
            for (a, b) in [(0, 2), (1, 2), (2, 0), (2, 1)] {
                assert!(s.0[a][b].norm() < 1e-10);
            }
            assert!((s.trace().re - 1.0).abs() < 1e-9);
            assert!(s.hermitian_eigenvalues()[0] > -1e-8);
        }
    }

    #[test]
    fn unitary_limit_keeps_ground_population() {
        let times = [0.0, 1.0, 2.5];
        let traj =
            integrate_trajectory(&embed_pure(0.4, 1.0), &times, lp(0.0), DEFAULT_TOL).unwrap();
        for s in &traj.states {
            assert!(s.0[2][2].norm() < 1e-12);
        }
    }

    #[test]
    fn e15_matches_integrator() {
        let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        for g1 in [1.0, 3.9, 4.0, 4.1, 8.0] {
            let traj =
                integrate_trajectory(&e15_initial_state(), &times, lp(g1), DEFAULT_TOL).unwrap();
            for (t, s) in times.iter().zip(&traj.states) {
                let a = analytic_e15(*t, g1).unwrap();
                assert!(a.frobenius_distance(s) < 1e-7, "g1={g1} t={t}");
                assert_eq!(a.0[0][1].re, 0.0);
                let n = rho2n_closed_form(*t, g1).unwrap();
                assert!(n.frobenius_distance(&postselect(s).unwrap()) < 1e-9);
            }
        }
        assert_eq!(analytic_e15(0.0, 2.0).unwrap(), e15_initial_state());
    }

    #[test]
    fn parametric_solution_matches_integrator() {
        for gamma in [0.0, 0.5, 1.5, 2.0, 2.0 + 1e-6, 3.0] {
            for (theta, phi) in [(PI / 2.0, 1.5 * PI), (0.4, 1.0), (2.5, 4.0)] {
                let rho0 = ParametricForm3 {
                    r3: 0.5,
                    theta3: theta,
                    phi3: phi,
                }
                .density();
                let times: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
                let traj =
                    integrate_trajectory(&rho0, &times, lp(2.0 * gamma), DEFAULT_TOL).unwrap();
                for (t, s) in times.iter().zip(&traj.states) {
                    let f = analytic_parametric(*t, gamma, theta, phi).unwrap();
                    assert!(
                        f.density().frobenius_distance(s) < 1e-5,
                        "gamma={gamma} t={t}"
                    );
                    assert_abs_diff_eq!(
                        f.bloch_norm(),
                        gell_mann_norm(&f.density()),
                        epsilon = 1e-9
                    );
                }
            }
        }
        let f0 = analytic_parametric(0.0, 1.3, 0.7, 2.2).unwrap();
        assert_abs_diff_eq!(f0.r3, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f0.theta3, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(f0.phi3, 2.2, epsilon = 1e-12);
    }

    #[test]
    fn parametric_phase_unwraps() {
        let times: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
        let s = analytic_parametric_series(&times, 0.3, 1.2, 6.2).unwrap();
        assert!(s.windows(2).all(|w| (w[1].phi3 - w[0].phi3).abs() < 1.0));
        assert_abs_diff_eq!(s[0].phi3, 6.2, epsilon = 1e-12);
    }

    #[test]
    fn postselection() {
        let half = Mat3::from_diag([c(0.5, 0.0), c(0.5, 0.0), ZERO]);
        assert_eq!(postselect(&half).unwrap(), Mat2::identity().scale_re(0.5));
        let mut g = Mat3::zeros();
        g.0[2][2] = ONE;
        assert!(matches!(
            postselect(&g),
            Err(Error::PostSelectionImpossible { .. })
        ));
    }

    #[test]
    fn trace_shift_cancels_after_normalization() {
        let p = lp(3.0);
        let rho = PureState2::from_angles(0.9, 0.4).density();
        let block = heff(p).unwrap().block2();
        let shifted = block + Mat2::identity().scale(c(0.0, 0.75));
        let evolve = |h: Mat2| {
            let u = crate::qmat::expm2(&h.scale(c(0.0, -1.7))).unwrap();
            let r = u.matmul(&rho).matmul(&u.dagger());
            r.scale_re(1.0 / r.trace().re)
        };
        assert!(evolve(block).frobenius_distance(&evolve(shifted)) < 1e-13);
    }

    #[test]
    fn small_equivalence_sweep() {
        let mut grid = EquivalenceGrid::new(vec![1.0, 4.0], 2.0);
        grid.n_theta = 3;
        grid.n_phi = 3;
        let r = equivalence_sweep(&grid).unwrap();
        assert!(r.max_deviation < 1e-6, "{r:?}");
        assert_eq!(r.cells, 2 * 9 * 10);
        let mut json = Vec::new();
        r.write_json(&mut json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert!(v["argmax"]["gamma1"].is_number());
    }

    #[test]
    fn trajectory_csv_shape() {
        let traj =
            integrate_trajectory(&e15_initial_state(), &[0.0, 1.0], lp(1.0), DEFAULT_TOL).unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 19);
        assert!(header.starts_with("t,re_ff,im_ff,re_fe"));
        assert_eq!(text.lines().count(), 3);
    }
}
