//! Dichotomic measurements, two-time correlators and the Leggett–Garg
//! combination `K3 = C12 + C23 − C13` under the normalized dynamics.
//!
//! Each correlator is its own experiment: prepare the state at `t1 = 0`,
//! evolve to `ti`, measure `Q = n·σ` projectively, evolve the collapsed state
//! to `tj` and measure again. `C13` has no measurement at `t2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nhq::{self, PTParams, PureState2};
use crate::qmat::{Mat2, Vec3};

/// Outcome probability below which a collapse branch is dropped.
pub const BRANCH_CUTOFF: f64 = 1e-14;

/// Maps `(θ, φ)` to `θ ∈ [0, π]`, `φ ∈ [0, 2π)` without changing the point
/// on the sphere: `θ → 2π − θ` is compensated by `φ → φ + π`.
pub fn canonical_angles(theta: f64, phi: f64) -> (f64, f64) {
    let mut th = theta.rem_euclid(2.0 * PI);
    let mut ph = phi;
    if th > PI {
        th = 2.0 * PI - th;
        ph += PI;
    }
    (th, wrap_2pi(ph))
}

fn wrap_2pi(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2π.
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Unit vector `n = (sinθ cosφ, sinθ sinφ, cosθ)` of the measured spin component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDirection {
    pub theta_m: f64,
    pub phi_m: f64,
}

impl MeasurementDirection {
    /// Any finite angles; they are brought to canonical form.
    pub fn new(theta_m: f64, phi_m: f64) -> Result<Self> {
        if !theta_m.is_finite() || !phi_m.is_finite() {
            return Err(Error::NonFinite("measurement angles"));
        }
        let (theta_m, phi_m) = canonical_angles(theta_m, phi_m);
        Ok(MeasurementDirection { theta_m, phi_m })
    }

    /// `Q = σ_y`.
    pub fn sigma_y() -> Self {
        MeasurementDirection {
            theta_m: 0.5 * PI,
            phi_m: 0.5 * PI,
        }
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (st, ct) = self.theta_m.sin_cos();
        let (sp, cp) = self.phi_m.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }
}

/// `Q = n·σ` and its spectral projectors `Π± = (I ± Q)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observable {
    pub q: Mat2,
    pub proj_up: Mat2,
    pub proj_down: Mat2,
}

pub fn observable(n: MeasurementDirection) -> Observable {
    let q = Mat2::pauli_dot(n.unit_vector());
    let half_i = Mat2::identity().scale_re(0.5);
    Observable {
        q,
        proj_up: half_i + q.scale_re(0.5),
        proj_down: half_i - q.scale_re(0.5),
    }
}

/// Joint outcome probabilities at two times; `ud` means up first, then down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointProbabilityTable {
    pub p_uu: f64,
    pub p_ud: f64,
    pub p_du: f64,
    pub p_dd: f64,
}

impl JointProbabilityTable {
    pub fn sum(&self) -> f64 {
        self.p_uu + self.p_ud + self.p_du + self.p_dd
    }

    /// `P(↑↑) + P(↓↓) − P(↑↓) − P(↓↑)`.
    pub fn correlation(&self) -> f64 {
        self.p_uu + self.p_dd - self.p_ud - self.p_du
    }
}

/// Collapse-and-evolve joint probabilities of measuring `Q` at `ti` and `tj`.
pub fn joint_probs(
    rho0: &Mat2,
    obs: &Observable,
    ti: f64,
    tj: f64,
    p: PTParams,
) -> Result<JointProbabilityTable> {
    nhq::check_density(rho0)?;
    if !(ti >= 0.0) || !(tj > ti) || !tj.is_finite() {
        return Err(Error::domain(format!(
            "need 0 <= ti < tj, got ti = {ti}, tj = {tj}"
        )));
    }
    joint_probs_unchecked(rho0, obs, ti, tj, p)
}

fn joint_probs_unchecked(
    rho0: &Mat2,
    obs: &Observable,
    ti: f64,
    tj: f64,
    p: PTParams,
) -> Result<JointProbabilityTable> {
    let rho_i = nhq::propagate(rho0, ti, p)?;
    let mut rows = [[0.0; 2]; 2];
    for (a, proj_a) in [obs.proj_up, obs.proj_down].iter().enumerate() {
        let pa = proj_a.matmul(&rho_i).trace().re;
        if pa < BRANCH_CUTOFF {
            continue;
        }
        // A rank-one projection leaves exactly the projector as the post-measurement state.
        let rho_j = nhq::propagate(proj_a, tj - ti, p)?;
        let p_up = obs.proj_up.matmul(&rho_j).trace().re.clamp(0.0, 1.0);
        rows[a] = [pa * p_up, pa * (1.0 - p_up)];
    }
    Ok(JointProbabilityTable {
        p_uu: rows[0][0],
        p_ud: rows[0][1],
        p_du: rows[1][0],
        p_dd: rows[1][1],
    })
}

/// Two-time correlator `C_ij`.
pub fn correlation(rho0: &Mat2, obs: &Observable, ti: f64, tj: f64, p: PTParams) -> Result<f64> {
    Ok(joint_probs(rho0, obs, ti, tj, p)?.correlation())
}

/// `½ tr(ρ0 {Q(ti), Q(tj)})` with Heisenberg-picture `Q(t) = U† Q U`.
/// Only defined for Hermitian dynamics (`γ = 0`).
pub fn anticommutator_correlation(
    rho0: &Mat2,
    q: &Mat2,
    ti: f64,
    tj: f64,
    p: PTParams,
) -> Result<f64> {
    if p.gamma != 0.0 {
        return Err(Error::domain("the anti-commutator form requires gamma = 0"));
    }
    let heis = |t: f64| -> Result<Mat2> {
        let u = nhq::propagator(p, t)?;
        Ok(u.dagger().matmul(q).matmul(&u))
    };
    let (qi, qj) = (heis(ti)?, heis(tj)?);
    Ok(0.5 * rho0.matmul(&qi.anticommutator(&qj)).trace().re)
}

/// The six coordinates of a three-time experiment; `t1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LGIConfig {
    /// Initial state `[cos(θ/2) e^{iφ}, sin(θ/2)]`.
    pub theta: f64,
    pub phi: f64,
    pub measurement: MeasurementDirection,
    pub t2: f64,
    pub t3: f64,
}

impl LGIConfig {
    /// Checks `0 < t2 < t3` and canonicalizes all angles.
    pub fn new(theta: f64, phi: f64, theta_m: f64, phi_m: f64, t2: f64, t3: f64) -> Result<Self> {
        if ![theta, phi, t2, t3].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("LGI configuration"));
        }
        if !(t2 > 0.0 && t3 > t2) {
            return Err(Error::domain(format!(
                "need 0 < t2 < t3, got t2 = {t2}, t3 = {t3}"
            )));
        }
        let (theta, phi) = canonical_angles(theta, phi);
        Ok(LGIConfig {
            theta,
            phi,
            measurement: MeasurementDirection::new(theta_m, phi_m)?,
            t2,
            t3,
        })
    }

    pub fn initial_state(&self) -> PureState2 {
        PureState2::from_angles(self.theta, self.phi)
    }
}

/// `K3` together with everything that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K3Result {
    pub config: LGIConfig,
    pub table_12: JointProbabilityTable,
    pub table_23: JointProbabilityTable,
    pub table_13: JointProbabilityTable,
    pub c12: f64,
    pub c23: f64,
    pub c13: f64,
    pub k3: f64,
}

pub fn k3(config: &LGIConfig, p: PTParams) -> Result<K3Result> {
    if !(config.t2 > 0.0 && config.t3 > config.t2) {
        return Err(Error::domain("need 0 < t2 < t3"));
    }
    let rho0 = config.initial_state().density();
    let obs = observable(config.measurement);
    let table_12 = joint_probs_unchecked(&rho0, &obs, 0.0, config.t2, p)?;
    let table_23 = joint_probs_unchecked(&rho0, &obs, config.t2, config.t3, p)?;
    let table_13 = joint_probs_unchecked(&rho0, &obs, 0.0, config.t3, p)?;
    let (c12, c23, c13) = (
        table_12.correlation(),
        table_23.correlation(),
        table_13.correlation(),
    );
    Ok(K3Result {
        config: *config,
        table_12,
        table_23,
        table_13,
        c12,
        c23,
        c13,
        k3: c12 + c23 - c13,
    })
}

impl K3Result {
    /// The six probabilities that must vanish for `K3 = 3`: the
    /// anti-correlated entries of the 1–2 and 2–3 tables and the correlated
    /// entries of the 1–3 table.
    pub fn algebraic_bound_violations(&self) -> [f64; 6] {
        [
            self.table_12.p_ud,
            self.table_12.p_du,
            self.table_23.p_ud,
            self.table_23.p_du,
            self.table_13.p_uu,
            self.table_13.p_dd,
        ]
    }

    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        crate::export::write_json(w, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nhq::density_from_bloch;
    use crate::nhq::fixed_points;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(gamma: f64) -> PTParams {
        PTParams::new(1.0, gamma).unwrap()
    }

    #[test]
    fn observable_examples() {
        let o = observable(MeasurementDirection::new(0.0, 0.3).unwrap());
        assert!(o.q.frobenius_distance(&Mat2::sigma_z()) < 1e-15);
        let o = observable(MeasurementDirection::new(PI / 2.0, PI / 2.0).unwrap());
        assert!(o.q.frobenius_distance(&Mat2::sigma_y()) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n =
                MeasurementDirection::new(rng.random::<f64>() * PI, rng.random::<f64>() * 2.0 * PI)
                    .unwrap();
            let o = observable(n);
            assert!((o.proj_up - o.proj_down).frobenius_distance(&o.q) < 1e-14);
            assert!((o.proj_up + o.proj_down).frobenius_distance(&Mat2::identity()) < 1e-14);
            assert!(o.proj_up.matmul(&o.proj_up).frobenius_distance(&o.proj_up) < 1e-14);
        }
    }

    #[test]
    fn canonical_angles_preserve_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let (th, ph) = (
                rng.random::<f64>() * 20.0 - 10.0,
                rng.random::<f64>() * 20.0 - 10.0,
            );
            let (ct, cp) = canonical_angles(th, ph);
            assert!((0.0..=PI).contains(&ct) && (0.0..2.0 * PI).contains(&cp));
            let a = MeasurementDirection {
                theta_m: th,
                phi_m: ph,
            }
            .unit_vector();
            let b = MeasurementDirection::new(th, ph).unwrap().unit_vector();
            assert!((a - b).norm() < 1e-12);
            let sa = PureState2::from_angles(th, ph).bloch();
            let sb = PureState2::from_angles(ct, cp).bloch();
            assert!((sa - sb).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_joint_probabilities() {
        let up_y = PureState2::from_angles(PI / 2.0, 3.0 * PI / 2.0).density();
        let obs = observable(MeasurementDirection::sigma_y());
        let t = joint_probs(&up_y, &obs, 0.0, PI / 4.0, p(0.0)).unwrap();
        assert_abs_diff_eq!(t.p_uu, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.p_ud, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.p_du, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.p_dd, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.correlation(), 0.0, epsilon = 1e-12);
        assert!(joint_probs(&up_y, &obs, 1.0, 1.0, p(0.0)).is_err());
        assert!(joint_probs(&up_y, &obs, -1.0, 1.0, p(0.0)).is_err());
    }

    #[test]
    fn repeated_measurement_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let rho =
                PureState2::from_angles(rng.random::<f64>() * PI, rng.random::<f64>() * 2.0 * PI)
                    .density();
            let obs = observable(
                MeasurementDirection::new(rng.random::<f64>() * PI, rng.random::<f64>() * 6.0)
                    .unwrap(),
            );
            let g = rng.random::<f64>() * 4.0;
            let ti = rng.random::<f64>() * 3.0;
            let t = joint_probs(&rho, &obs, ti, ti + 1e-9, p(g)).unwrap();
            assert!(t.p_ud < 1e-6 && t.p_du < 1e-6);
            assert_abs_diff_eq!(t.sum(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn source_state_stays_put_briefly() {
        let pp = p(3.0);
        let src = fixed_points(pp).unwrap().source;
        let n = src.norm();
        let dir = MeasurementDirection::new((src.z / n).acos(), src.y.atan2(src.x)).unwrap();
        let t = joint_probs(&density_from_bloch(src), &observable(dir), 0.0, 0.1, pp).unwrap();
        assert!(t.p_uu > 1.0 - 1e-9);
    }

    #[test]
    fn unitary_k3_closed_form() {
        for tau in [0.2, PI / 6.0, 0.9] {
            let cfg = LGIConfig::new(PI / 2.0, 3.0 * PI / 2.0, PI / 2.0, PI / 2.0, tau, 2.0 * tau)
                .unwrap();
            let r = k3(&cfg, p(0.0)).unwrap();
            let want = 2.0 * (2.0 * tau).cos() - (4.0 * tau).cos();
            assert_abs_diff_eq!(r.k3, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermitian_correlators_match_heisenberg_picture() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let rho =
                PureState2::from_angles(rng.random::<f64>() * PI, rng.random::<f64>() * 2.0 * PI)
                    .density();
            let obs = observable(
                MeasurementDirection::new(rng.random::<f64>() * PI, rng.random::<f64>() * 6.0)
                    .unwrap(),
            );
            let ti = rng.random::<f64>() * 5.0;
            let tj = ti + rng.random::<f64>() * 5.0 + 1e-3;
            let c = correlation(&rho, &obs, ti, tj, p(0.0)).unwrap();
            let oracle = anticommutator_correlation(&rho, &obs.q, ti, tj, p(0.0)).unwrap();
            assert_abs_diff_eq!(c, oracle, epsilon = 1e-9);
        }
        assert!(
            anticommutator_correlation(&Mat2::identity(), &Mat2::sigma_y(), 0.0, 1.0, p(1.0))
                .is_err()
        );
    }

    #[test]
    fn k3_is_bounded_and_tables_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..200 {
            let t2 = rng.random::<f64>() * 10.0 + 1e-6;
            let cfg = LGIConfig::new(
                rng.random::<f64>() * PI,
                rng.random::<f64>() * 6.3,
                rng.random::<f64>() * PI,
                rng.random::<f64>() * 6.3,
                t2,
                t2 + rng.random::<f64>() * 10.0 + 1e-6,
            )
            .unwrap();
            let r = k3(&cfg, p(rng.random::<f64>() * 4.0)).unwrap();
            assert!((-3.0..=3.0).contains(&r.k3));
            for t in [r.table_12, r.table_23, r.table_13] {
                assert_abs_diff_eq!(t.sum(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(LGIConfig::new(1.0, 1.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(LGIConfig::new(1.0, 1.0, 1.0, 1.0, 2.0, 1.0).is_err());
        assert!(LGIConfig::new(f64::NAN, 1.0, 1.0, 1.0, 0.5, 1.0).is_err());
        let c = LGIConfig::new(4.0, -1.0, 7.0, 0.0, 0.5, 1.0).unwrap();
        assert!(c.theta <= PI && c.phi >= 0.0 && c.measurement.theta_m <= PI);
    }

    #[test]
    fn audit_json_layout() {
        let cfg = LGIConfig::new(1.0, 2.0, 1.5, 0.5, 0.3, 0.9).unwrap();
        let mut buf = Vec::new();
        k3(&cfg, p(1.0)).unwrap().write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in [
            "config", "table_12", "table_23", "table_13", "c12", "c23", "c13", "k3",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["table_13"]["p_dd"].is_number());
    }
}
