//! Uniform-linear-array geometry: steering vectors and far-field patterns.
//!
//! The array lies along one axis with isotropic elements at a fixed pitch;
//! azimuth is measured from broadside, so the visible range is
//! [-pi/2, pi/2]. Element `k` of the steering vector for azimuth `phi` is
//! `exp(j 2 pi (d/lambda) k sin(phi))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half of the visible azimuth range.
const HALF_FOV: f64 = std::f64::consts::FRAC_PI_2;

/// Tolerance on the unit-norm invariant of an [`Awv`].
pub const NORM_TOL: f64 = 1e-12;

/// Uniform linear array described by element count and pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Number of elements (N for the STA, M for the AP).
    pub n_elements: usize,
    /// Inter-element spacing in carrier wavelengths (d/lambda).
    pub spacing: f64,
}

impl ArrayGeometry {
    /// Standard grating-lobe-free spacing.
    pub const HALF_WAVELENGTH: f64 = 0.5;

    pub fn new(n_elements: usize, spacing: f64) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::domain("array needs at least one element"));
        }
        if !(spacing > 0.0) {
            return Err(Error::domain(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            n_elements,
            spacing,
        })
    }

    /// `n_elements` at half-wavelength pitch.
    pub fn half_wavelength(n_elements: usize) -> Result<Self> {
        Self::new(n_elements, Self::HALF_WAVELENGTH)
    }
}

/// Antenna weight vector: unit-norm complex weights applied per element.
///
/// Entries produced by steering or by the evolutionary designer additionally
/// have equal modulus `1/sqrt(N)` (phase-shifter-only hardware).
#[derive(Debug, Clone, PartialEq)]
pub struct Awv {
    weights: Vec<Complex64>,
}

impl Awv {
    /// Wraps weights that are already unit-norm (within [`NORM_TOL`]).
    pub fn new(weights: Vec<Complex64>) -> Result<Self> {
        let norm = l2_norm(&weights);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!(
                "AWV norm is {norm}, expected 1 within {NORM_TOL}"
            )));
        }
        Ok(Self { weights })
    }

    /// Scales arbitrary nonzero weights to unit norm.
    pub fn from_unnormalized(weights: Vec<Complex64>) -> Result<Self> {
        let norm = l2_norm(&weights);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::domain("cannot normalize zero or non-finite AWV"));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / norm).collect(),
        })
    }

    /// Builds the phase-only AWV `exp(j phase_k) / sqrt(N)`.
    pub fn from_phases(phases: &[f64]) -> Self {
        let scale = 1.0 / (phases.len() as f64).sqrt();
        Self {
            weights: phases
                .iter()
                .map(|&p| Complex64::from_polar(scale, p))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// All weights rotated by a common phase; the pattern is unchanged.
    pub fn phase_rotated(&self, psi: f64) -> Self {
        let rot = Complex64::from_polar(1.0, psi);
        Self {
            weights: self.weights.iter().map(|w| w * rot).collect(),
        }
    }

    /// Element-wise product with the steering phases of `angle`, which
    /// shifts the pattern by `sin(angle)` in the sin-azimuth domain.
    pub fn steered_to(&self, geom: &ArrayGeometry, angle: f64) -> Result<Self> {
        let shift = steering_vector(geom, angle)?;
        if shift.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                context: "steered_to",
                expected: shift.len(),
                got: self.weights.len(),
            });
        }
        Ok(Self {
            weights: self
                .weights
                .iter()
                .zip(&shift)
                .map(|(w, s)| w * s)
                .collect(),
        })
    }
}

fn l2_norm(weights: &[Complex64]) -> f64 {
    weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
}

fn check_angle(angle: f64) -> Result<()> {
    if !angle.is_finite() || angle < -HALF_FOV || angle > HALF_FOV {
        return Err(Error::AngleOutOfRange { angle_rad: angle });
    }
    Ok(())
}

/// Array steering vector for azimuth `angle` (unnormalized, unit-modulus
/// entries): element `k` is `exp(j 2 pi spacing k sin(angle))`.
pub fn steering_vector(geom: &ArrayGeometry, angle: f64) -> Result<Vec<Complex64>> {
    check_angle(angle)?;
    let phase_step = 2.0 * std::f64::consts::PI * geom.spacing * angle.sin();
    Ok((0..geom.n_elements)
        .map(|k| Complex64::from_polar(1.0, phase_step * k as f64))
        .collect())
}

/// Steering vector scaled to unit norm (`1/sqrt(N)` per element).
pub fn normalized_steering(geom: &ArrayGeometry, angle: f64) -> Result<Awv> {
    let sv = steering_vector(geom, angle)?;
    let scale = 1.0 / (geom.n_elements as f64).sqrt();
    Ok(Awv {
        weights: sv.into_iter().map(|a| a * scale).collect(),
    })
}

/// Complex pattern amplitude `A(phi) = a(phi)^H w`.
pub fn pattern_response(geom: &ArrayGeometry, awv: &Awv, angle: f64) -> Result<Complex64> {
    if awv.len() != geom.n_elements {
        return Err(Error::DimensionMismatch {
            context: "pattern_response AWV length",
            expected: geom.n_elements,
            got: awv.len(),
        });
    }
    let sv = steering_vector(geom, angle)?;
    Ok(sv
        .iter()
        .zip(awv.weights())
        .map(|(a, w)| a.conj() * w)
        .sum())
}

/// Power pattern `|A(phi)|^2` over a grid of azimuths.
///
/// For `awv = normalized_steering(phi0)` the value at `phi0` equals the
/// element count N (full coherent gain).
pub fn array_pattern(geom: &ArrayGeometry, awv: &Awv, angles: &[f64]) -> Result<Vec<f64>> {
    angles
        .iter()
        .map(|&phi| pattern_response(geom, awv, phi).map(|a| a.norm_sqr()))
        .collect()
}

/// Uniform azimuth grid over [-pi/2, pi/2] with the given step (radians).
/// Both endpoints are included and the grid is exactly symmetric about 0.
pub fn angle_grid(step: f64) -> Vec<f64> {
    assert!(step > 0.0, "grid step must be positive");
    let n = (std::f64::consts::PI / step).round().max(1.0) as usize;
    let mut angles = vec![0.0; n + 1];
    for i in 0..=n / 2 {
        let phi = -HALF_FOV + std::f64::consts::PI * i as f64 / n as f64;
        angles[i] = phi;
        angles[n - i] = -phi;
    }
    angles
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unit_awv(n: usize, seed: u64) -> Awv {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        Awv::from_unnormalized(raw).unwrap()
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        let sv = steering_vector(&geom, 0.0).unwrap();
        for a in sv {
            assert_relative_eq!(a.re, 1.0, epsilon = 1e-14);
            assert_relative_eq!(a.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn steering_endfire_two_elements_alternates_sign() {
        let geom = ArrayGeometry::half_wavelength(2).unwrap();
        let sv = steering_vector(&geom, std::f64::consts::FRAC_PI_2).unwrap();
        assert_relative_eq!(sv[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(sv[1].re, -1.0, epsilon = 1e-12);
        assert!(sv[1].im.abs() < 1e-12);
    }

    #[test]
    fn steering_30_degrees_quarter_turns() {
        // phase step 2*pi*0.5*sin(30 deg) = pi/2 per element
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        let sv = steering_vector(&geom, std::f64::consts::FRAC_PI_6).unwrap();
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (a, e) in sv.iter().zip(&expected) {
            assert_relative_eq!(a.re, e.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, e.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_rejects_out_of_range_angle() {
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        assert!(matches!(
            steering_vector(&geom, 1.8),
            Err(Error::AngleOutOfRange { .. })
        ));
        assert!(matches!(
            steering_vector(&geom, -2.0),
            Err(Error::AngleOutOfRange { .. })
        ));
    }

    #[test]
    fn steering_entries_have_unit_modulus() {
        let geom = ArrayGeometry::half_wavelength(64).unwrap();
        for &phi in &[-1.2, -0.3, 0.0, 0.7, 1.5] {
            for a in steering_vector(&geom, phi).unwrap() {
                assert!((a.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_steering_broadside() {
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        let awv = normalized_steering(&geom, 0.0).unwrap();
        for w in awv.weights() {
            assert_relative_eq!(w.re, 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn normalized_steering_matches_elementwise_formula() {
        let geom = ArrayGeometry::half_wavelength(64).unwrap();
        let phi = 0.1_f64;
        let awv = normalized_steering(&geom, phi).unwrap();
        let scale = 1.0 / 8.0;
        for (k, w) in awv.weights().iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * 0.5 * k as f64 * phi.sin();
            let expected = Complex64::from_polar(scale, phase);
            assert_relative_eq!(w.re, expected.re, epsilon = 1e-12);
            assert_relative_eq!(w.im, expected.im, epsilon = 1e-12);
        }
        assert_relative_eq!(l2_norm(awv.weights()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn aligned_pattern_peak_equals_element_count() {
        let geom = ArrayGeometry::half_wavelength(64).unwrap();
        let awv = normalized_steering(&geom, 0.0).unwrap();
        let p = array_pattern(&geom, &awv, &[0.0]).unwrap()[0];
        assert_relative_eq!(p, 64.0, epsilon = 1e-9);
        assert_relative_eq!(10.0 * p.log10(), 18.06, epsilon = 0.005);
    }

    /// Closed-form Dirichlet-kernel pattern for a steering AWV.
    fn dirichlet_power(n: usize, spacing: f64, u0: f64, u: f64) -> f64 {
        let x = std::f64::consts::PI * spacing * (u0 - u);
        let num = (n as f64 * x).sin();
        let den = x.sin();
        if den.abs() < 1e-12 {
            n as f64 // coherent limit |D|^2/N = N^2/N
        } else {
            (num / den).powi(2) / n as f64
        }
    }

    #[test]
    fn pattern_nulls_at_dft_spacings() {
        // N=8, d/lambda=0.5: nulls at sin(phi) = m/4, m != 0
        let geom = ArrayGeometry::half_wavelength(8).unwrap();
        let awv = normalized_steering(&geom, 0.0).unwrap();
        for m in [-3i32, -2, -1, 1, 2, 3] {
            let phi = (m as f64 / 4.0).asin();
            let p = array_pattern(&geom, &awv, &[phi]).unwrap()[0];
            assert!(p < 1e-10, "expected null at sin(phi)={}, got {}", m, p);
        }
    }

    #[test]
    fn pattern_matches_dirichlet_kernel() {
        let geom = ArrayGeometry::half_wavelength(16).unwrap();
        let phi0 = 0.35_f64;
        let awv = normalized_steering(&geom, phi0).unwrap();
        let angles = angle_grid(0.01);
        let pattern = array_pattern(&geom, &awv, &angles).unwrap();
        for (&phi, &p) in angles.iter().zip(&pattern) {
            let expected = dirichlet_power(16, 0.5, phi0.sin(), phi.sin());
            assert!(
                (p - expected).abs() < 1e-8 * (1.0 + expected),
                "pattern mismatch at {phi}: {p} vs {expected}"
            );
        }
    }

    #[test]
    fn pattern_rejects_length_mismatch() {
        let geom = ArrayGeometry::half_wavelength(8).unwrap();
        let awv = normalized_steering(&ArrayGeometry::half_wavelength(4).unwrap(), 0.0).unwrap();
        assert!(matches!(
            array_pattern(&geom, &awv, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// (1/2) integral of |A(u)|^2 over u in [-1, 1] by trapezoid rule.
    fn beamspace_power(geom: &ArrayGeometry, awv: &Awv, n_intervals: usize) -> f64 {
        let h = 2.0 / n_intervals as f64;
        let mut acc = 0.0;
        for i in 0..=n_intervals {
            let u = -1.0 + i as f64 * h;
            let p = array_pattern(geom, awv, &[u.asin()]).unwrap()[0];
            let w = if i == 0 || i == n_intervals { 0.5 } else { 1.0 };
            acc += w * p;
        }
        0.5 * acc * h
    }

    #[test]
    fn beamspace_power_conserved_for_random_awvs() {
        let geom = ArrayGeometry::half_wavelength(64).unwrap();
        for seed in 0..20 {
            let awv = random_unit_awv(64, seed);
            let total = beamspace_power(&geom, &awv, 4096);
            assert!(
                (total - 1.0).abs() < 1e-6,
                "beamspace power {total} for seed {seed}"
            );
        }
    }

    #[test]
    fn peak_gain_on_fine_grid_is_element_count() {
        // 0.01-degree grid around the steering direction
        let geom = ArrayGeometry::half_wavelength(64).unwrap();
        let phi0 = 0.4_f64;
        let awv = normalized_steering(&geom, phi0).unwrap();
        let step = 0.01_f64.to_radians();
        let mut peak = 0.0_f64;
        let mut phi = phi0 - 200.0 * step;
        while phi <= phi0 + 200.0 * step {
            peak = peak.max(array_pattern(&geom, &awv, &[phi]).unwrap()[0]);
            phi += step;
        }
        assert!((peak - 64.0).abs() / 64.0 < 1e-3);
    }

    #[test]
    fn angle_grid_is_symmetric_with_exact_endpoints() {
        let grid = angle_grid(0.25_f64.to_radians());
        assert_eq!(grid.len(), 721);
        assert_eq!(grid[0], -std::f64::consts::FRAC_PI_2);
        assert_eq!(grid[720], std::f64::consts::FRAC_PI_2);
        for i in 0..grid.len() {
            assert_eq!(grid[i], -grid[grid.len() - 1 - i]);
        }
    }

    #[test]
    fn awv_constructors_enforce_unit_norm() {
        let bad = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(Awv::new(bad.clone()).is_err());
        let fixed = Awv::from_unnormalized(bad).unwrap();
        assert_relative_eq!(l2_norm(fixed.weights()), 1.0, epsilon = 1e-14);
        assert!(Awv::from_unnormalized(vec![Complex64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn from_phases_gives_equal_moduli() {
        let awv = Awv::from_phases(&[0.0, 1.0, -2.0, 0.5]);
        for w in awv.weights() {
            assert_relative_eq!(w.norm(), 0.5, epsilon = 1e-14);
        }
        assert_relative_eq!(l2_norm(awv.weights()), 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn pattern_invariant_under_global_phase(seed in 0u64..200, psi in -3.14f64..3.14) {
            let geom = ArrayGeometry::half_wavelength(16).unwrap();
            let awv = random_unit_awv(16, seed);
            let rotated = awv.phase_rotated(psi);
            for &phi in &[-1.0, -0.2, 0.0, 0.5, 1.3] {
                let p0 = array_pattern(&geom, &awv, &[phi]).unwrap()[0];
                let p1 = array_pattern(&geom, &rotated, &[phi]).unwrap()[0];
                prop_assert!((p0 - p1).abs() <= 1e-9 * (1.0 + p0));
            }
        }

        #[test]
        fn steering_entries_unit_modulus_prop(n in 1usize..100, phi in -1.57f64..1.57) {
            let geom = ArrayGeometry::half_wavelength(n).unwrap();
            for a in steering_vector(&geom, phi).unwrap() {
                prop_assert!((a.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
