//! Jones calculus for the polarizer / liquid-crystal cell / polarizer sandwich.
//!
//! Circular states follow R = (1, −i)/√2 and L = (1, +i)/√2 in the (H, V)
//! basis. Angles are radians.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance on |X²+Y²+Z²+W² − 1| accepted by [`JonesMatrix::from_params`].
pub const PARAM_NORM_TOL: f64 = 1e-6;

/// Normalized Jones vector in the (H, V) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    components: [Complex64; 2],
}

impl PolarizationState {
    /// Builds a state from raw components, normalizing them.
    ///
    /// Returns `None` for the zero vector.
    pub fn new(h: Complex64, v: Complex64) -> Option<Self> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Self {
            components: [h / norm, v / norm],
        })
    }

    pub fn horizontal() -> Self {
        Self::linear(0.0)
    }

    pub fn vertical() -> Self {
        Self {
            components: [ZERO, ONE],
        }
    }

    pub fn diagonal() -> Self {
        Self::linear(FRAC_PI_4)
    }

    pub fn antidiagonal() -> Self {
        Self::linear(-FRAC_PI_4)
    }

    pub fn right_circular() -> Self {
        Self {
            components: [
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(0.0, -FRAC_1_SQRT_2),
            ],
        }
    }

    pub fn left_circular() -> Self {
        Self {
            components: [
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(0.0, FRAC_1_SQRT_2),
            ],
        }
    }

    /// Linear polarization at `angle` from horizontal.
    pub fn linear(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            components: [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        }
    }

    pub fn components(&self) -> [Complex64; 2] {
        self.components
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum()
    }

    /// ⟨self|other⟩, conjugating `self`.
    pub fn inner(&self, other: &PolarizationState) -> Complex64 {
        self.components[0].conj() * other.components[0]
            + self.components[1].conj() * other.components[1]
    }
}

/// Ideal polarizer in front of or behind the modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolarizerSpec {
    /// Linear polarizer with its pass axis `angle` radians from horizontal.
    Linear {
        angle: f64,
    },
    CircularRight,
    CircularLeft,
}

impl PolarizerSpec {
    pub const H: PolarizerSpec = PolarizerSpec::Linear { angle: 0.0 };
    pub const V: PolarizerSpec = PolarizerSpec::Linear {
        angle: std::f64::consts::FRAC_PI_2,
    };
    pub const D45: PolarizerSpec = PolarizerSpec::Linear { angle: FRAC_PI_4 };
    pub const R: PolarizerSpec = PolarizerSpec::CircularRight;
    pub const L: PolarizerSpec = PolarizerSpec::CircularLeft;

    pub fn linear_degrees(deg: f64) -> Self {
        PolarizerSpec::Linear {
            angle: deg.to_radians(),
        }
    }

    pub fn pass_state(&self) -> PolarizationState {
        match *self {
            PolarizerSpec::Linear { angle } => PolarizationState::linear(angle),
            PolarizerSpec::CircularRight => PolarizationState::right_circular(),
            PolarizerSpec::CircularLeft => PolarizationState::left_circular(),
        }
    }

    /// Parses `H`, `V`, `D`/`45`, `A`, `R`, `L` or a linear angle in degrees.
    pub fn parse(s: &str) -> Option<Self> {
        let t = s.trim();
        match t.to_ascii_uppercase().as_str() {
            "H" => Some(Self::H),
            "V" => Some(Self::V),
            "D" | "D45" => Some(Self::D45),
            "A" | "A135" => Some(Self::linear_degrees(135.0)),
            "R" => Some(Self::R),
            "L" => Some(Self::L),
            _ => t
                .trim_end_matches("deg")
                .trim_end_matches('°')
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Self::linear_degrees),
        }
    }

    /// Short label, degrees for linear polarizers.
    pub fn label(&self) -> String {
        match *self {
            PolarizerSpec::Linear { angle } => {
                let deg = angle.to_degrees();
                let rounded = deg.round();
                if (deg - rounded).abs() < 1e-9 {
                    format!("{rounded}")
                } else {
                    format!("{deg}")
                }
            }
            PolarizerSpec::CircularRight => "R".to_string(),
            PolarizerSpec::CircularLeft => "L".to_string(),
        }
    }
}

pub type ComplexMatrix2 = [[Complex64; 2]; 2];

/// 2×2 complex Jones matrix. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    entries: ComplexMatrix2,
}

impl JonesMatrix {
    pub fn identity() -> Self {
        Self {
            entries: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    /// Wraps arbitrary entries. No unitarity is implied.
    pub fn from_entries(entries: ComplexMatrix2) -> Self {
        Self { entries }
    }

    /// Lossless modulator matrix
    /// `exp(−iϖ)·[[X−iY, Z−iW], [−Z−iW, X+iY]]`.
    pub fn from_params(x: f64, y: f64, z: f64, w: f64, global_phase: f64) -> Result<Self> {
        let norm_sq = x * x + y * y + z * z + w * w;
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > PARAM_NORM_TOL {
            return Err(Error::InvalidParameters { norm_sq });
        }
        Ok(Self::from_params_unchecked(x, y, z, w, global_phase))
    }

    /// Same formula as [`from_params`](Self::from_params) without the norm check.
    /// The map (X, Y, Z, W) ↦ M is linear, which the calibration Jacobian uses.
    pub fn from_params_unchecked(x: f64, y: f64, z: f64, w: f64, global_phase: f64) -> Self {
        let g = Complex64::from_polar(1.0, -global_phase);
        Self {
            entries: [
                [g * Complex64::new(x, -y), g * Complex64::new(z, -w)],
                [g * Complex64::new(-z, -w), g * Complex64::new(x, y)],
            ],
        }
    }

    /// Rotation-type matrix (Y = W = 0, X = cos θ, Z = sin θ).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::from_params_unchecked(c, 0.0, s, 0.0, 0.0)
    }

    pub fn entries(&self) -> ComplexMatrix2 {
        self.entries
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.entries;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.entries;
        Self {
            entries: [
                [m[0][0].conj(), m[1][0].conj()],
                [m[0][1].conj(), m[1][1].conj()],
            ],
        }
    }

    pub fn matmul(&self, other: &JonesMatrix) -> Self {
        let a = &self.entries;
        let b = &other.entries;
        let mut c = [[ZERO; 2]; 2];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { entries: c }
    }

    pub fn determinant(&self) -> Complex64 {
        let m = &self.entries;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Largest entrywise modulus of `M†M − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().matmul(self).entries;
        let mut worst: f64 = 0.0;
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }
}

impl Add for JonesMatrix {
    type Output = JonesMatrix;

    fn add(self, rhs: JonesMatrix) -> JonesMatrix {
        let mut e = self.entries;
        for (row, rrow) in e.iter_mut().zip(rhs.entries.iter()) {
            for (v, r) in row.iter_mut().zip(rrow.iter()) {
                *v += r;
            }
        }
        JonesMatrix { entries: e }
    }
}

impl Mul<JonesMatrix> for Complex64 {
    type Output = JonesMatrix;

    fn mul(self, rhs: JonesMatrix) -> JonesMatrix {
        let mut e = rhs.entries;
        for v in e.iter_mut().flatten() {
            *v *= self;
        }
        JonesMatrix { entries: e }
    }
}

/// Projector `|v⟩⟨v|` onto the polarizer's pass state.
pub fn polarizer_projector(spec: PolarizerSpec) -> ComplexMatrix2 {
    let v = spec.pass_state().components();
    [
        [v[0] * v[0].conj(), v[0] * v[1].conj()],
        [v[1] * v[0].conj(), v[1] * v[1].conj()],
    ]
}

/// Scalar amplitude `v2† · M · v1` through P1 → cell → P2.
pub fn complex_transmittance(p1: PolarizerSpec, m: &JonesMatrix, p2: PolarizerSpec) -> Complex64 {
    let out = m.apply(p1.pass_state().components());
    let v2 = p2.pass_state().components();
    v2[0].conj() * out[0] + v2[1].conj() * out[1]
}

pub fn irradiance(p1: PolarizerSpec, m: &JonesMatrix, p2: PolarizerSpec) -> f64 {
    complex_transmittance(p1, m, p2).norm_sqr()
}

/// The four basis matrices M_X, M_Y, M_Z, M_W with
/// `M = X·M_X + Y·M_Y + Z·M_Z + W·M_W` (zero global phase).
pub fn parameter_basis() -> [JonesMatrix; 4] {
    [
        JonesMatrix::from_params_unchecked(1.0, 0.0, 0.0, 0.0, 0.0),
        JonesMatrix::from_params_unchecked(0.0, 1.0, 0.0, 0.0, 0.0),
        JonesMatrix::from_params_unchecked(0.0, 0.0, 1.0, 0.0, 0.0),
        JonesMatrix::from_params_unchecked(0.0, 0.0, 0.0, 1.0, 0.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn assert_matrix_eq(a: ComplexMatrix2, b: ComplexMatrix2, eps: f64) {
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (a[i][j] - b[i][j]).norm() <= eps,
                    "entry ({i},{j}): {} vs {}",
                    a[i][j],
                    b[i][j]
                );
            }
        }
    }

    // Plain 2x2 product written out independently of JonesMatrix::matmul.
    fn mul2(a: ComplexMatrix2, b: ComplexMatrix2) -> ComplexMatrix2 {
        let mut c = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    fn unit4() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                [v[0] / n, v[1] / n, v[2] / n, v[3] / n]
            })
    }

    fn any_polarizer() -> impl Strategy<Value = PolarizerSpec> {
        prop_oneof![
            (0.0..PI).prop_map(|a| PolarizerSpec::Linear { angle: a }),
            Just(PolarizerSpec::R),
            Just(PolarizerSpec::L),
        ]
    }

    #[test]
    fn named_states_are_normalized() {
        for s in [
            PolarizationState::horizontal(),
            PolarizationState::vertical(),
            PolarizationState::diagonal(),
            PolarizationState::antidiagonal(),
            PolarizationState::right_circular(),
            PolarizationState::left_circular(),
        ] {
            assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
        }
        let r = PolarizationState::right_circular();
        let l = PolarizationState::left_circular();
        assert!(r.inner(&l).norm() < 1e-15);
    }

    #[test]
    fn identity_from_params() {
        let m = JonesMatrix::from_params(1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_matrix_eq(m.entries(), JonesMatrix::identity().entries(), 0.0);
    }

    #[test]
    fn pure_y_gives_diagonal_phase() {
        let m = JonesMatrix::from_params(0.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_matrix_eq(m.entries(), [[-I, ZERO], [ZERO, I]], 0.0);
    }

    #[test]
    fn unitary_for_partial_params() {
        let m = JonesMatrix::from_params(0.6, 0.8, 0.0, 0.0, 0.0).unwrap();
        let e = m.entries();
        let adj = [
            [e[0][0].conj(), e[1][0].conj()],
            [e[0][1].conj(), e[1][1].conj()],
        ];
        assert_matrix_eq(mul2(adj, e), [[ONE, ZERO], [ZERO, ONE]], 1e-12);
    }

    #[test]
    fn rejects_non_unit_params() {
        let err = JonesMatrix::from_params(1.0, 1.0, 0.0, 0.0, 0.0).unwrap_err();
        match err {
            Error::InvalidParameters { norm_sq } => assert_abs_diff_eq!(norm_sq, 2.0),
            other => panic!("unexpected {other:?}"),
        }
        let e = JonesMatrix::from_params(0.5, 0.0, 0.0, 0.0, 0.0).unwrap_err();
        assert!(e.to_string().contains("X²+Y²+Z²+W² = 0.25"));
    }

    #[test]
    fn projectors() {
        assert_matrix_eq(
            polarizer_projector(PolarizerSpec::H),
            [[ONE, ZERO], [ZERO, ZERO]],
            1e-15,
        );
        let half = Complex64::new(0.5, 0.0);
        assert_matrix_eq(
            polarizer_projector(PolarizerSpec::D45),
            [[half, half], [half, half]],
            1e-15,
        );
        for spec in [
            PolarizerSpec::R,
            PolarizerSpec::L,
            PolarizerSpec::linear_degrees(33.0),
        ] {
            let p = polarizer_projector(spec);
            assert_abs_diff_eq!((p[0][0] + p[1][1]).re, 1.0, epsilon = 1e-12);
            assert_matrix_eq(mul2(p, p), p, 1e-12);
            let adj = [
                [p[0][0].conj(), p[1][0].conj()],
                [p[0][1].conj(), p[1][1].conj()],
            ];
            assert_matrix_eq(adj, p, 1e-12);
        }
    }

    #[test]
    fn transmittance_basics() {
        let id = JonesMatrix::identity();
        assert_abs_diff_eq!(
            complex_transmittance(PolarizerSpec::H, &id, PolarizerSpec::H).re,
            1.0
        );
        assert!(complex_transmittance(PolarizerSpec::H, &id, PolarizerSpec::V).norm() < 1e-16);
        assert_abs_diff_eq!(irradiance(PolarizerSpec::H, &id, PolarizerSpec::H), 1.0);
        assert!(irradiance(PolarizerSpec::H, &id, PolarizerSpec::V) < 1e-30);
    }

    #[test]
    fn transmittance_matches_explicit_chain() {
        // 45° in, diag(−i, i), H out: (1, 0)·diag(−i, i)·(1, 1)/√2 = −i/√2.
        let m = JonesMatrix::from_params(0.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        let t = complex_transmittance(PolarizerSpec::D45, &m, PolarizerSpec::H);
        assert_abs_diff_eq!(t.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.im, -FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn parse_polarizers() {
        assert_eq!(PolarizerSpec::parse("h"), Some(PolarizerSpec::H));
        assert_eq!(PolarizerSpec::parse("R"), Some(PolarizerSpec::R));
        assert_eq!(
            PolarizerSpec::parse("45"),
            Some(PolarizerSpec::linear_degrees(45.0))
        );
        assert_eq!(
            PolarizerSpec::parse("30deg"),
            Some(PolarizerSpec::linear_degrees(30.0))
        );
        assert_eq!(PolarizerSpec::parse("nope"), None);
        assert_eq!(PolarizerSpec::linear_degrees(45.0).label(), "45");
    }

    proptest! {
        #[test]
        fn from_params_is_unitary(p in unit4(), phase in -10.0f64..10.0) {
            let m = JonesMatrix::from_params(p[0], p[1], p[2], p[3], phase).unwrap();
            prop_assert!(m.unitarity_defect() < 1e-10);
            prop_assert!((m.determinant().norm() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn irradiance_ignores_global_phase_and_sign(
            p in unit4(), phase in -10.0f64..10.0,
            p1 in any_polarizer(), p2 in any_polarizer(),
        ) {
            let m0 = JonesMatrix::from_params(p[0], p[1], p[2], p[3], 0.0).unwrap();
            let mp = JonesMatrix::from_params(p[0], p[1], p[2], p[3], phase).unwrap();
            let mn = JonesMatrix::from_params(-p[0], -p[1], -p[2], -p[3], 0.0).unwrap();
            let i0 = irradiance(p1, &m0, p2);
            prop_assert!((irradiance(p1, &mp, p2) - i0).abs() < 1e-12);
            prop_assert!((irradiance(p1, &mn, p2) - i0).abs() < 1e-12);
            prop_assert!((-1e-15..=1.0 + 1e-12).contains(&i0));
        }

        #[test]
        fn energy_is_conserved(p in unit4(), p1 in any_polarizer()) {
            let m = JonesMatrix::from_params(p[0], p[1], p[2], p[3], 0.3).unwrap();
            let total = irradiance(p1, &m, PolarizerSpec::H) + irradiance(p1, &m, PolarizerSpec::V);
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn transmittance_is_linear_in_matrix(
            a in unit4(), b in unit4(),
            alpha in (-2.0f64..2.0, -2.0f64..2.0), beta in (-2.0f64..2.0, -2.0f64..2.0),
            p1 in any_polarizer(), p2 in any_polarizer(),
        ) {
            let ma = JonesMatrix::from_params(a[0], a[1], a[2], a[3], 0.0).unwrap();
            let mb = JonesMatrix::from_params(b[0], b[1], b[2], b[3], 1.1).unwrap();
            let alpha = Complex64::new(alpha.0, alpha.1);
            let beta = Complex64::new(beta.0, beta.1);
            let combo = alpha * ma + beta * mb;
            let lhs = complex_transmittance(p1, &combo, p2);
            let rhs = alpha * complex_transmittance(p1, &ma, p2) + beta * complex_transmittance(p1, &mb, p2);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn irradiance_equals_full_chain(p in unit4(), p1 in any_polarizer(), p2 in any_polarizer()) {
            // Oracle: P2 · M · P1 applied to the P1 pass state, then squared norm of the output.
            let m = JonesMatrix::from_params(p[0], p[1], p[2], p[3], 0.0).unwrap();
            let chain = mul2(polarizer_projector(p2), mul2(m.entries(), polarizer_projector(p1)));
            let v = p1.pass_state().components();
            let out = [chain[0][0] * v[0] + chain[0][1] * v[1], chain[1][0] * v[0] + chain[1][1] * v[1]];
            let oracle = out[0].norm_sqr() + out[1].norm_sqr();
            prop_assert!((irradiance(p1, &m, p2) - oracle).abs() < 1e-12);
        }
    }
}
