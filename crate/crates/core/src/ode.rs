//! Adaptive Dormand–Prince 5(4) integration for small fixed-size systems.

use crate::error::{Error, Result};

/// Step-size control for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Steps shorter than this abort with [`Error::Stiffness`].
    pub min_step: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    /// Absolute and relative tolerance both set to `tol`.
    pub fn with_tol(tol: f64, max_step: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            max_step,
            min_step: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

/// Counters reported by [`integrate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * coef * k[i];
        }
    }
    out
}

/// Integrates `dy/dt = rhs(t, y)` from `(t0, y0)` and returns the state at
/// each of `sample_times` (ascending, each ≥ `t0`).
///
/// Steps are shortened to land exactly on every sample time. `post_step` runs
/// on every accepted state and may project it back onto a constraint surface.
pub fn integrate<const N: usize, F, P>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    sample_times: &[f64],
    opts: &OdeOptions,
    mut post_step: P,
) -> Result<(Vec<[f64; N]>, OdeStats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    P: FnMut(f64, &mut [f64; N]),
{
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.first().is_some_and(|&s| s < t0)
    {
        return Err(Error::domain(
            "sample times must be ascending and not precede t0",
        ));
    }
    let mut out = Vec::with_capacity(sample_times.len());
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.max_step.min(1e-3);

    for &target in sample_times {
        while target - t > 1e-14 * t.abs().max(1.0) {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Stiffness { t, step: h });
            }
            let remaining = target - t;
            let mut step = h.min(opts.max_step);
            let lands = step >= remaining;
            if lands {
                step = remaining;
            }
            let k1 = rhs(t, &y);
            let k2 = rhs(t + C2 * step, &lin(&y, step, &[(A21, &k1)]));
            let k3 = rhs(t + C3 * step, &lin(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = rhs(
                t + C4 * step,
                &lin(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = rhs(
                t + C5 * step,
                &lin(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = rhs(
                t + step,
                &lin(
                    &y,
                    step,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = lin(
                &y,
                step,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = rhs(t + step, &y_new);

            let mut err = 0.0;
            for i in 0..N {
                let e = step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("integrator state"));
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if lands { target } else { t + step };
                y = y_new;
                post_step(t, &mut y);
                stats.accepted += 1;
                // A step clipped to hit a sample says nothing about the natural step size.
                if !lands || step >= h {
                    h = (step * factor).min(opts.max_step);
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
                if h < opts.min_step {
                    return Err(Error::Stiffness { t, step: h });
                }
            }
        }
        out.push(y);
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let opts = OdeOptions::with_tol(1e-11, 0.1);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let (ys, _) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            &times,
            &opts,
            |_, _| {},
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-9);
            assert!((y[1] + t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn exponential_decay_hits_samples() {
        let opts = OdeOptions::with_tol(1e-12, 1.0);
        let times = [0.0, 0.1, 0.1, 2.0, 7.5];
        let (ys, stats) = integrate(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            &times,
            &opts,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(ys.len(), times.len());
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-10);
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn rejects_unsorted_samples() {
        let opts = OdeOptions::with_tol(1e-9, 1.0);
        assert!(integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            &[1.0, 0.5],
            &opts,
            |_, _| {}
        )
        .is_err());
    }

    #[test]
    fn stiff_blowup_is_reported() {
        let opts = OdeOptions::with_tol(1e-9, 1.0);
        let r = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            &[2.0],
            &opts,
            |_, _| {},
        );
        assert!(r.is_err());
    }
}
