//! Fixed-size complex linear algebra for qubit (2×2) and qutrit (3×3)
//! operators.
//!
//! Everything here is plain value types over [`Complex64`]. The one piece of
//! real numerics is [`expm2`], the closed-form exponential of a 2×2 matrix via
//! its Pauli decomposition, which stays accurate when the two eigenvalues of
//! the argument coalesce.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Complex = Complex64;

/// Below this |μ| the exponential switches to the series for sinh(μ)/μ.
pub const EXPM_SERIES_THRESHOLD: f64 = 1e-6;

/// |discriminant| below which [`eig2`] reports a coalesced eigenpair.
pub const EIG_DEGENERACY_TOL: f64 = 1e-12;

pub(crate) const ZERO: Complex = Complex::new(0.0, 0.0);
pub(crate) const ONE: Complex = Complex::new(1.0, 0.0);
pub(crate) const I: Complex = Complex::new(0.0, 1.0);

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn is_finite(z: Complex) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// sin(z)/z, with the Taylor series near the origin.
pub(crate) fn sinc(z: Complex) -> Complex {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        ONE - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// sinh(z)/z, with the Taylor series near the origin.
pub(crate) fn sinhc(z: Complex) -> Complex {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        ONE + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    }
}

/// asin(z)/z, with the Taylor series near the origin.
pub(crate) fn asinc(z: Complex) -> Complex {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        ONE + z2 / 6.0 + z2 * z2 * (3.0 / 40.0)
    } else {
        z.asin() / z
    }
}

/// Real 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self * v.x, self * v.y, self * v.z)
    }
}

macro_rules! square_matrix {
    ($name:ident, $n:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name(pub [[Complex; $n]; $n]);

        impl $name {
            pub const DIM: usize = $n;

            pub fn zeros() -> Self {
                $name([[ZERO; $n]; $n])
            }

            pub fn identity() -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    m.0[i][i] = ONE;
                }
                m
            }

            pub fn from_diag(d: [Complex; $n]) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    m.0[i][i] = d[i];
                }
                m
            }

            #[inline]
            pub fn get(&self, i: usize, j: usize) -> Complex {
                self.0[i][j]
            }

            pub fn dagger(&self) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] = self.0[j][i].conj();
                    }
                }
                m
            }

            pub fn trace(&self) -> Complex {
                (0..$n).map(|i| self.0[i][i]).sum()
            }

            pub fn matmul(&self, o: &Self) -> Self {
                let mut m = Self::zeros();
                for i in 0..$n {
                    for k in 0..$n {
                        let a = self.0[i][k];
                        for j in 0..$n {
                            m.0[i][j] += a * o.0[k][j];
                        }
                    }
                }
                m
            }

            pub fn scale(&self, s: Complex) -> Self {
                let mut m = *self;
                m.0.iter_mut().flatten().for_each(|z| *z *= s);
                m
            }

            pub fn scale_re(&self, s: f64) -> Self {
                self.scale(Complex::new(s, 0.0))
            }

            /// Commutator `self·o − o·self`.
            pub fn commutator(&self, o: &Self) -> Self {
                self.matmul(o) - o.matmul(self)
            }

            /// Anticommutator `self·o + o·self`.
            pub fn anticommutator(&self, o: &Self) -> Self {
                self.matmul(o) + o.matmul(self)
            }

            pub fn frobenius_norm(&self) -> f64 {
                self.0
                    .iter()
                    .flatten()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            }

            pub fn frobenius_distance(&self, o: &Self) -> f64 {
                (*self - *o).frobenius_norm()
            }

            /// Largest entry modulus.
            pub fn max_abs(&self) -> f64 {
                self.0
                    .iter()
                    .flatten()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().flatten().all(|z| is_finite(*z))
            }

            pub fn is_hermitian(&self, tol: f64) -> bool {
                self.frobenius_distance(&self.dagger()) <= tol
            }

            pub fn is_unit_trace(&self, tol: f64) -> bool {
                (self.trace() - ONE).norm() <= tol
            }

            /// `(M + M†)/2`.
            pub fn hermitian_part(&self) -> Self {
                (*self + self.dagger()).scale_re(0.5)
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, o: $name) -> $name {
                let mut m = self;
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] += o.0[i][j];
                    }
                }
                m
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, o: $name) -> $name {
                let mut m = self;
                for i in 0..$n {
                    for j in 0..$n {
                        m.0[i][j] -= o.0[i][j];
                    }
                }
                m
            }
        }

        impl Mul for $name {
            type Output = $name;
            fn mul(self, o: $name) -> $name {
                self.matmul(&o)
            }
        }
    };
}

square_matrix!(Mat2, 2);
square_matrix!(Mat3, 3);

impl Mat2 {
    pub const fn new(a: Complex, b: Complex, cc: Complex, d: Complex) -> Self {
        Mat2([[a, b], [cc, d]])
    }

    pub fn sigma_x() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn sigma_y() -> Self {
        Mat2::new(ZERO, -I, I, ZERO)
    }

    pub fn sigma_z() -> Self {
        Mat2::new(ONE, ZERO, ZERO, -ONE)
    }

    /// `v·σ` for a real vector.
    pub fn pauli_dot(v: Vec3) -> Self {
        Mat2::new(c(v.z, 0.0), c(v.x, -v.y), c(v.x, v.y), c(-v.z, 0.0))
    }

    /// `|v⟩⟨v|`.
    pub fn outer(v: [Complex; 2]) -> Self {
        Mat2::new(
            v[0] * v[0].conj(),
            v[0] * v[1].conj(),
            v[1] * v[0].conj(),
            v[1] * v[1].conj(),
        )
    }

    pub fn apply(&self, v: [Complex; 2]) -> [Complex; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn det(&self) -> Complex {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Pauli decomposition `M = c·I + d⃗·σ` with complex coefficients.
    pub fn pauli_components(&self) -> (Complex, [Complex; 3]) {
        let m = &self.0;
        let c0 = (m[0][0] + m[1][1]) * 0.5;
        let dx = (m[0][1] + m[1][0]) * 0.5;
        let dy = I * (m[0][1] - m[1][0]) * 0.5;
        let dz = (m[0][0] - m[1][1]) * 0.5;
        (c0, [dx, dy, dz])
    }

    /// Rebuilds `c·I + d⃗·σ`.
    pub fn from_pauli(c0: Complex, d: [Complex; 3]) -> Self {
        Mat2::new(c0 + d[2], d[0] - I * d[1], d[0] + I * d[1], c0 - d[2])
    }

    /// Both eigenvalues of a Hermitian matrix are ≥ −tol.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol.max(1e-12)) {
            return false;
        }
        let h = self.hermitian_part();
        let tr = h.trace().re;
        let det = h.det().re;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        0.5 * (tr - disc) >= -tol
    }

    /// Real eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let h = self.hermitian_part();
        let tr = h.trace().re;
        let det = h.det().re;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        [0.5 * (tr - disc), 0.5 * (tr + disc)]
    }

    /// Bloch vector of `ρ = I/2 + S·σ`, i.e. `S = tr(ρσ)/2`.
    pub fn bloch(&self) -> Vec3 {
        let m = &self.0;
        Vec3::new(m[0][1].re, -m[0][1].im, 0.5 * (m[0][0].re - m[1][1].re))
    }
}

impl Mat3 {
    pub fn from_rows(rows: [[Complex; 3]; 3]) -> Self {
        Mat3(rows)
    }

    /// Upper-left 2×2 block.
    pub fn block2(&self) -> Mat2 {
        Mat2([[self.0[0][0], self.0[0][1]], [self.0[1][0], self.0[1][1]]])
    }

    /// Embeds `m` in the upper-left block with `corner` at (2,2).
    pub fn embed2(m: &Mat2, corner: Complex) -> Self {
        let mut out = Mat3::zeros();
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = m.0[i][j];
            }
        }
        out.0[2][2] = corner;
        out
    }

    pub fn to_reals(&self) -> [f64; 18] {
        let mut out = [0.0; 18];
        for (k, z) in self.0.iter().flatten().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        out
    }

    pub fn from_reals(r: &[f64; 18]) -> Self {
        let mut m = Mat3::zeros();
        for k in 0..9 {
            m.0[k / 3][k % 3] = c(r[2 * k], r[2 * k + 1]);
        }
        m
    }

    /// Eigenvalues of the Hermitian part, ascending (trigonometric cubic solution).
    pub fn hermitian_eigenvalues(&self) -> [f64; 3] {
        let h = self.hermitian_part();
        let a = |i: usize, j: usize| h.0[i][j];
        let q = h.trace().re / 3.0;
        let p1 = a(0, 1).norm_sqr() + a(0, 2).norm_sqr() + a(1, 2).norm_sqr();
        let d0 = a(0, 0).re - q;
        let d1 = a(1, 1).re - q;
        let d2 = a(2, 2).re - q;
        let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
        if p2 <= 1e-300 {
            return [q, q, q];
        }
        let p = (p2 / 6.0).sqrt();
        let b = (h - Mat3::identity().scale_re(q)).scale_re(1.0 / p);
        let r = (b.det3().re / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut e = [e1, e2, e3];
        e.sort_by(|x, y| x.total_cmp(y));
        e
    }

    pub fn det3(&self) -> Complex {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.is_hermitian(tol.max(1e-12)) && self.hermitian_eigenvalues()[0] >= -tol
    }
}

/// Matrix exponential `e^M` for a 2×2 complex matrix.
///
/// Writes `M = c·I + d⃗·σ`, so `e^M = e^c (cosh μ · I + (sinh μ/μ) d⃗·σ)` with
/// `μ² = d⃗·d⃗` (complex, no conjugation). Both `cosh μ` and `sinh μ/μ` are
/// even in μ, so the branch of the square root is irrelevant. Near `μ = 0`
/// (the eigenvalues of `M` coalesce) the ratio is taken from its series.
pub fn expm2(m: &Mat2) -> Result<Mat2> {
    expm2_with(m, EXPM_SERIES_THRESHOLD)
}

/// [`expm2`] with an explicit series-switch threshold on |μ|.
pub fn expm2_with(m: &Mat2, series_threshold: f64) -> Result<Mat2> {
    if !m.is_finite() {
        return Err(Error::NonFinite("expm2 argument"));
    }
    let (c0, d) = m.pauli_components();
    let mu2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let mu = mu2.sqrt();
    let shc = if mu.norm() < series_threshold {
        ONE + mu2 / 6.0 + mu2 * mu2 / 120.0
    } else {
        mu.sinh() / mu
    };
    let ch = mu.cosh();
    let pre = c0.exp();
    let out = Mat2::from_pauli(
        pre * ch,
        [pre * shc * d[0], pre * shc * d[1], pre * shc * d[2]],
    );
    if !out.is_finite() {
        return Err(Error::NonFinite("expm2 result overflowed"));
    }
    Ok(out)
}

/// One eigenpair of a 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub value: Complex,
    /// Right eigenvector with unit Euclidean norm.
    pub vector: [Complex; 2],
}

/// Result of [`eig2`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub pairs: [EigenPair; 2],
    /// Eigenvalues coalesced; both pairs hold the same vector.
    pub degenerate: bool,
}

/// Eigen-decomposition of a 2×2 matrix from its characteristic polynomial.
pub fn eig2(m: &Mat2) -> Result<Eigen2> {
    eig2_with(m, EIG_DEGENERACY_TOL)
}

/// [`eig2`] with an explicit degeneracy tolerance on the discriminant.
pub fn eig2_with(m: &Mat2, degeneracy_tol: f64) -> Result<Eigen2> {
    if !m.is_finite() {
        return Err(Error::NonFinite("eig2 argument"));
    }
    let [[a, b], [cc, d]] = m.0;
    let half_tr = (a + d) * 0.5;
    // λ = (a+d)/2 ± √disc / 2 with disc = (a−d)² + 4bc.
    let disc = (a - d) * (a - d) + b * cc * 4.0;
    if disc.norm() < degeneracy_tol {
        let v = eigenvector(m, half_tr);
        let p = EigenPair {
            value: half_tr,
            vector: v,
        };
        return Ok(Eigen2 {
            pairs: [p, p],
            degenerate: true,
        });
    }
    let root = disc.sqrt() * 0.5;
    let l1 = half_tr + root;
    let l2 = half_tr - root;
    Ok(Eigen2 {
        pairs: [
            EigenPair {
                value: l1,
                vector: eigenvector(m, l1),
            },
            EigenPair {
                value: l2,
                vector: eigenvector(m, l2),
            },
        ],
        degenerate: false,
    })
}

fn eigenvector(m: &Mat2, lambda: Complex) -> [Complex; 2] {
    let [[a, b], [cc, d]] = m.0;
    // Rows of (M − λI) give two candidate null vectors; keep the better scaled one.
    let v1 = [b, lambda - a];
    let v2 = [lambda - d, cc];
    let n1 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
    let n2 = (v2[0].norm_sqr() + v2[1].norm_sqr()).sqrt();
    let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    if n < 1e-300 {
        // M is a multiple of the identity.
        return [ONE, ZERO];
    }
    [v[0] / n, v[1] / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn taylor_expm(m: &Mat2) -> Mat2 {
        // Scaling and squaring with a 30-term Taylor series.
        let norm = m.frobenius_norm();
        let s = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let a = m.scale_re(0.5f64.powi(s));
        let mut term = Mat2::identity();
        let mut sum = Mat2::identity();
        for k in 1..=30 {
            term = term.matmul(&a).scale_re(1.0 / k as f64);
            sum = sum + term;
        }
        for _ in 0..s {
            sum = sum.matmul(&sum);
        }
        sum
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self
                .0
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        }
        fn mat(&mut self, scale: f64) -> Mat2 {
            let mut m = Mat2::zeros();
            for z in m.0.iter_mut().flatten() {
                *z = c(scale * self.next(), scale * self.next());
            }
            m
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        assert_eq!(expm2(&Mat2::zeros()).unwrap(), Mat2::identity());
    }

    #[test]
    fn expm_of_rotation_generator() {
        let m = Mat2::sigma_x().scale(c(0.0, -PI / 2.0));
        let e = expm2(&m).unwrap();
        let want = Mat2::sigma_x().scale(c(0.0, -1.0));
        assert!(e.frobenius_distance(&want) < 1e-14);
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let mut rng = Lcg(7);
        for _ in 0..1000 {
            let m = rng.mat(1.0);
            let d = expm2(&m).unwrap().frobenius_distance(&taylor_expm(&m));
            assert!(d < 1e-10, "deviation {d}");
        }
    }

    #[test]
    fn expm_matches_oracle_up_to_spectral_radius_five() {
        let mut rng = Lcg(11);
        let mut n = 0;
        while n < 1000 {
            let m = rng.mat(3.0);
            let e = eig2(&m).unwrap();
            let rho = e.pairs[0].value.norm().max(e.pairs[1].value.norm());
            if rho >= 5.0 {
                continue;
            }
            n += 1;
            let want = taylor_expm(&m);
            let d = expm2(&m).unwrap().frobenius_distance(&want);
            assert!(d < 1e-9 * want.frobenius_norm().max(1.0), "deviation {d}");
        }
    }

    #[test]
    fn expm_additive_for_commuting_pairs() {
        let mut rng = Lcg(3);
        for _ in 0..200 {
            let m = rng.mat(1.0);
            let a = 0.3 + rng.next();
            let b = -0.7 + rng.next();
            let lhs = expm2(&(m.scale_re(a) + m.scale_re(b))).unwrap();
            let rhs = expm2(&m.scale_re(a)).unwrap() * expm2(&m.scale_re(b)).unwrap();
            assert!(lhs.frobenius_distance(&rhs) < 1e-10);
        }
    }

    #[test]
    fn expm_continuous_across_series_switch() {
        // Nilpotent part plus a tiny diagonal tilt puts |μ| right at the switch.
        for &scale in &[1.0, 3.0] {
            let nil = Mat2::new(ZERO, c(scale, 0.0), ZERO, ZERO);
            for &eps in &[1e-13, 1e-12] {
                let below = EXPM_SERIES_THRESHOLD - eps;
                let above = EXPM_SERIES_THRESHOLD + eps;
                let lo = expm2(&(nil + Mat2::sigma_z().scale_re(below))).unwrap();
                let hi = expm2(&(nil + Mat2::sigma_z().scale_re(above))).unwrap();
                assert!(lo.frobenius_distance(&hi) < 1e-10);
                let ser = expm2_with(&(nil + Mat2::sigma_z().scale_re(below)), 1.0).unwrap();
                let dir = expm2_with(&(nil + Mat2::sigma_z().scale_re(below)), 0.0).unwrap();
                assert!(ser.frobenius_distance(&dir) < 1e-10);
            }
        }
    }

    #[test]
    fn expm_rejects_non_finite() {
        let m = Mat2::new(c(f64::NAN, 0.0), ZERO, ZERO, ZERO);
        assert!(matches!(expm2(&m), Err(Error::NonFinite(_))));
        assert!(eig2(&m).is_err());
    }

    #[test]
    fn eig_of_sigma_z() {
        let e = eig2(&Mat2::sigma_z()).unwrap();
        assert!(!e.degenerate);
        assert!((e.pairs[0].value - ONE).norm() < 1e-15);
        assert!((e.pairs[1].value + ONE).norm() < 1e-15);
        assert!((e.pairs[0].vector[0].norm() - 1.0).abs() < 1e-15);
        assert!((e.pairs[1].vector[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_of_broken_pt_hamiltonian() {
        // λ² = J² − γ²/4 = 1 − 9/4.
        let h = Mat2::sigma_x() - Mat2::sigma_z().scale(c(0.0, 1.5));
        let e = eig2(&h).unwrap();
        let want = 1.25f64.sqrt();
        let mut ims: Vec<f64> = e.pairs.iter().map(|p| p.value.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + want).abs() < 1e-14 && (ims[1] - want).abs() < 1e-14);
        assert!(e.pairs.iter().all(|p| p.value.re.abs() < 1e-14));
    }

    #[test]
    fn eig_at_exceptional_point() {
        let h = Mat2::sigma_x() - Mat2::sigma_z().scale(c(0.0, 1.0));
        let e = eig2(&h).unwrap();
        assert!(e.degenerate);
        assert!(e.pairs[0].value.norm() < 1e-15);
        let v = e.pairs[0].vector;
        let r = v[1] / v[0];
        assert!((r - I).norm() < 1e-14);
        assert!(((v[0].norm_sqr() + v[1].norm_sqr()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs() {
        let mut rng = Lcg(5);
        for _ in 0..500 {
            let m = rng.mat(2.0);
            let e = eig2(&m).unwrap();
            assert!(!e.degenerate);
            for p in e.pairs {
                let mv = m.apply(p.vector);
                let err =
                    (mv[0] - p.value * p.vector[0]).norm() + (mv[1] - p.value * p.vector[1]).norm();
                assert!(err < 1e-10, "residual {err}");
            }
        }
    }

    #[test]
    fn plumbing_identities() {
        let mut rng = Lcg(9);
        let m = rng.mat(1.0);
        assert_eq!(m.dagger().dagger(), m);
        assert_eq!(Mat3::identity().trace(), c(3.0, 0.0));
        assert_eq!(m.frobenius_distance(&m), 0.0);
        let (c0, d) = m.pauli_components();
        assert!(Mat2::from_pauli(c0, d).frobenius_distance(&m) < 1e-15);
        let s = Vec3::new(0.1, -0.2, 0.3);
        let rho = Mat2::identity().scale_re(0.5) + Mat2::pauli_dot(s);
        assert!((rho.bloch() - s).norm() < 1e-16);
    }

    #[test]
    fn predicates() {
        let rho = Mat2::identity().scale_re(0.5);
        assert!(
            rho.is_hermitian(1e-12)
                && rho.is_unit_trace(1e-12)
                && rho.is_positive_semidefinite(1e-12)
        );
        let bad = Mat2::sigma_z();
        assert!(!bad.is_positive_semidefinite(1e-12));
        let m3 = Mat3::from_diag([c(0.2, 0.0), c(0.3, 0.0), c(0.5, 0.0)]);
        assert!(m3.is_positive_semidefinite(1e-12) && m3.is_unit_trace(1e-12));
        let e = m3.hermitian_eigenvalues();
        assert!((e[0] - 0.2).abs() < 1e-12 && (e[2] - 0.5).abs() < 1e-12);
    }
}
