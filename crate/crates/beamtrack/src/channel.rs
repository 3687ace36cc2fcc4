//! Rank-1 LOS channel construction, link budget, and instantaneous SNR.
//!
//! The channel is the single line-of-sight tap
//! `H = sqrt(M N) * alpha * a_r(phi_r) a_t(phi_t)^H` with normalized
//! steering vectors, so the strongest singular value is `sqrt(M N) |alpha|`
//! and conjugate steering on both sides attains it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{normalized_steering, ArrayGeometry, Awv};
use crate::error::{Error, Result};

/// Reported SNR is clamped here to keep logs and metrics finite when an
/// AWV lands on a pattern null.
pub const SNR_FLOOR_DB: f64 = -40.0;

/// Transmit power, noise power and carrier for SNR bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Noise power in dBm over the signal bandwidth.
    pub noise_power_dbm: f64,
    /// Carrier wavelength in meters.
    pub carrier_wavelength_m: f64,
    /// Path-loss exponent for the gain law (2 = free space).
    pub path_loss_exponent: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if self.noise_power_dbm >= self.tx_power_dbm {
            return Err(Error::domain(format!(
                "noise power {} dBm must be below tx power {} dBm",
                self.noise_power_dbm, self.tx_power_dbm
            )));
        }
        if !(self.carrier_wavelength_m > 0.0) {
            return Err(Error::domain("carrier wavelength must be positive"));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::domain("path-loss exponent must be positive"));
        }
        Ok(())
    }

    /// Complex channel gain at `distance_m` under this budget's gain law.
    pub fn path_gain(&self, distance_m: f64) -> Result<Complex64> {
        path_gain_with_exponent(
            distance_m,
            self.carrier_wavelength_m,
            self.path_loss_exponent,
        )
    }
}

impl Default for LinkBudget {
    /// 60 GHz defaults: 10 dBm tx, -84 dBm noise (about 1.76 GHz of thermal
    /// noise plus a 10 dB noise figure), free-space loss.
    fn default() -> Self {
        Self {
            tx_power_dbm: 10.0,
            noise_power_dbm: -84.0,
            carrier_wavelength_m: 0.005,
            path_loss_exponent: 2.0,
        }
    }
}

/// Free-space complex path gain: `|alpha| = lambda / (4 pi d)` with the
/// propagation phase `-2 pi d / lambda`.
pub fn path_gain(distance_m: f64, wavelength_m: f64) -> Result<Complex64> {
    path_gain_with_exponent(distance_m, wavelength_m, 2.0)
}

/// Close-in gain law with a 1 m reference distance: amplitude
/// `(lambda / 4 pi) * d^(-n/2)`. Collapses to Friis for `n = 2`.
pub fn path_gain_with_exponent(
    distance_m: f64,
    wavelength_m: f64,
    exponent: f64,
) -> Result<Complex64> {
    if !(distance_m > 0.0) {
        return Err(Error::domain(format!(
            "distance must be positive, got {distance_m} m"
        )));
    }
    if !(wavelength_m > 0.0) {
        return Err(Error::domain("wavelength must be positive"));
    }
    let amplitude =
        wavelength_m / (4.0 * std::f64::consts::PI) * distance_m.powf(-exponent / 2.0);
    let phase = -2.0 * std::f64::consts::PI * distance_m / wavelength_m;
    Ok(Complex64::from_polar(amplitude, phase))
}

/// Rank-1 LOS channel between an AP (transmit, M elements) and an STA
/// (receive, N elements).
#[derive(Debug, Clone)]
pub struct LosChannel {
    /// N x M channel matrix.
    matrix: DMatrix<Complex64>,
    /// Complex gain alpha at the link distance.
    pub gain: Complex64,
    /// Azimuth of departure at the AP, radians.
    pub aod: f64,
    /// Azimuth of arrival at the STA, radians.
    pub aoa: f64,
}

impl LosChannel {
    /// `H = sqrt(M N) alpha a_r(aoa) a_t(aod)^H`.
    pub fn new(
        geom_rx: &ArrayGeometry,
        geom_tx: &ArrayGeometry,
        gain: Complex64,
        aoa: f64,
        aod: f64,
    ) -> Result<Self> {
        let a_r = normalized_steering(geom_rx, aoa)?;
        let a_t = normalized_steering(geom_tx, aod)?;
        let n = geom_rx.n_elements;
        let m = geom_tx.n_elements;
        let scale = ((m * n) as f64).sqrt() * gain;
        let matrix = DMatrix::from_fn(n, m, |r, c| {
            scale * a_r.weights()[r] * a_t.weights()[c].conj()
        });
        Ok(Self {
            matrix,
            gain,
            aod,
            aoa,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Receive-side element count N.
    pub fn n_rx(&self) -> usize {
        self.matrix.nrows()
    }

    /// Transmit-side element count M.
    pub fn n_tx(&self) -> usize {
        self.matrix.ncols()
    }

    /// Beamformed complex amplitude `f_sta^H H f_ap`.
    pub fn beamformed_amplitude(&self, f_sta: &Awv, f_ap: &Awv) -> Result<Complex64> {
        if f_sta.len() != self.n_rx() {
            return Err(Error::DimensionMismatch {
                context: "combiner length vs channel rows",
                expected: self.n_rx(),
                got: f_sta.len(),
            });
        }
        if f_ap.len() != self.n_tx() {
            return Err(Error::DimensionMismatch {
                context: "beamformer length vs channel cols",
                expected: self.n_tx(),
                got: f_ap.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, w_t) in f_ap.weights().iter().enumerate() {
            let mut col = Complex64::new(0.0, 0.0);
            for (r, w_r) in f_sta.weights().iter().enumerate() {
                col += w_r.conj() * self.matrix[(r, c)];
            }
            acc += col * w_t;
        }
        Ok(acc)
    }
}

/// Instantaneous SNR in dB through the given beamformer/combiner pair,
/// clamped at [`SNR_FLOOR_DB`].
pub fn snr_db(f_sta: &Awv, channel: &LosChannel, f_ap: &Awv, budget: &LinkBudget) -> Result<f64> {
    let amp = channel.beamformed_amplitude(f_sta, f_ap)?.norm();
    let gain_db = if amp > 0.0 { 20.0 * amp.log10() } else { f64::NEG_INFINITY };
    let snr = budget.tx_power_dbm + gain_db - budget.noise_power_dbm;
    Ok(snr.max(SNR_FLOOR_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn friis_unity_distance(wavelength: f64) -> f64 {
        wavelength / (4.0 * std::f64::consts::PI)
    }

    #[test]
    fn path_gain_unity_point() {
        let lambda = 0.005;
        let alpha = path_gain(friis_unity_distance(lambda), lambda).unwrap();
        assert_relative_eq!(alpha.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn path_gain_60ghz_5m() {
        let alpha = path_gain(5.0, 0.005).unwrap();
        assert_relative_eq!(alpha.norm(), 7.9577e-5, max_relative = 1e-4);
        assert_relative_eq!(20.0 * alpha.norm().log10(), -81.98, epsilon = 0.01);
    }

    #[test]
    fn path_gain_halves_when_distance_doubles() {
        let a1 = path_gain(3.0, 0.005).unwrap().norm();
        let a2 = path_gain(6.0, 0.005).unwrap().norm();
        assert_relative_eq!(a1 / a2, 2.0, epsilon = 1e-12);
        assert_relative_eq!(20.0 * (a2 / a1).log10(), -6.02, epsilon = 0.01);
    }

    #[test]
    fn path_gain_rejects_nonpositive_distance() {
        assert!(path_gain(0.0, 0.005).is_err());
        assert!(path_gain(-1.0, 0.005).is_err());
    }

    #[test]
    fn path_gain_phase_follows_propagation_delay() {
        let lambda = 0.005;
        let d = 2.34_f64;
        let alpha = path_gain(d, lambda).unwrap();
        let expected = -2.0 * std::f64::consts::PI * d / lambda;
        let diff = (alpha.arg() - expected).rem_euclid(2.0 * std::f64::consts::PI);
        assert!(diff < 1e-9 || (2.0 * std::f64::consts::PI - diff) < 1e-9);
    }

    #[test]
    fn exponent_two_matches_friis() {
        let a = path_gain(4.2, 0.005).unwrap();
        let b = path_gain_with_exponent(4.2, 0.005, 2.0).unwrap();
        assert_relative_eq!(a.norm(), b.norm(), epsilon = 1e-15);
    }

    #[test]
    fn scalar_channel_is_gain() {
        let geom = ArrayGeometry::half_wavelength(1).unwrap();
        let ch = LosChannel::new(&geom, &geom, Complex64::new(1.0, 0.0), 0.0, 0.0).unwrap();
        assert_eq!(ch.matrix().nrows(), 1);
        assert_relative_eq!(ch.matrix()[(0, 0)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_by_two_broadside_all_ones() {
        let geom = ArrayGeometry::half_wavelength(2).unwrap();
        let ch = LosChannel::new(&geom, &geom, Complex64::new(1.0, 0.0), 0.0, 0.0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_relative_eq!(ch.matrix()[(r, c)].re, 1.0, epsilon = 1e-12);
                assert_relative_eq!(ch.matrix()[(r, c)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn channel_is_rank_one_with_expected_singular_value() {
        let rx = ArrayGeometry::half_wavelength(4).unwrap();
        let tx = ArrayGeometry::half_wavelength(64).unwrap();
        let alpha = Complex64::new(3e-4, -2e-4);
        let ch = LosChannel::new(&rx, &tx, alpha, 0.3, -0.7).unwrap();
        let svd = ch.matrix().clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let expected = (256.0_f64).sqrt() * alpha.norm();
        assert_relative_eq!(sv[0], expected, epsilon = 1e-9);
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn frobenius_norm_matches_gain() {
        let rx = ArrayGeometry::half_wavelength(2).unwrap();
        let tx = ArrayGeometry::half_wavelength(8).unwrap();
        let alpha = Complex64::new(1e-3, 5e-4);
        let ch = LosChannel::new(&rx, &tx, alpha, -0.2, 0.9).unwrap();
        let fro: f64 = ch
            .matrix()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert_relative_eq!(fro, 4.0 * alpha.norm(), epsilon = 1e-9);
    }

    #[test]
    fn aligned_snr_hits_full_beamforming_gain() {
        // M=64, N=1, 5 m at 60 GHz: 10 - 81.98 + 18.06 + 84 = 30.08 dB
        let rx = ArrayGeometry::half_wavelength(1).unwrap();
        let tx = ArrayGeometry::half_wavelength(64).unwrap();
        let budget = LinkBudget::default();
        let alpha = budget.path_gain(5.0).unwrap();
        let phi_t = 0.25;
        let ch = LosChannel::new(&rx, &tx, alpha, 0.0, phi_t).unwrap();
        let f_sta = normalized_steering(&rx, 0.0).unwrap();
        let f_ap = normalized_steering(&tx, phi_t).unwrap();
        let snr = snr_db(&f_sta, &ch, &f_ap, &budget).unwrap();
        assert_relative_eq!(snr, 30.08, epsilon = 0.01);
    }

    #[test]
    fn orthogonal_beamformer_reports_floor() {
        // Steering at a DFT null of the departure angle
        let rx = ArrayGeometry::half_wavelength(1).unwrap();
        let tx = ArrayGeometry::half_wavelength(8).unwrap();
        let budget = LinkBudget::default();
        let ch = LosChannel::new(&rx, &tx, Complex64::new(1e-4, 0.0), 0.0, 0.0).unwrap();
        let f_sta = normalized_steering(&rx, 0.0).unwrap();
        let null_angle = (0.25_f64).asin();
        let f_ap = normalized_steering(&tx, null_angle).unwrap();
        let snr = snr_db(&f_sta, &ch, &f_ap, &budget).unwrap();
        assert_relative_eq!(snr, SNR_FLOOR_DB, epsilon = 1e-9);
    }

    #[test]
    fn snr_invariant_to_global_phase() {
        let rx = ArrayGeometry::half_wavelength(2).unwrap();
        let tx = ArrayGeometry::half_wavelength(16).unwrap();
        let budget = LinkBudget::default();
        let ch = LosChannel::new(&rx, &tx, Complex64::new(2e-4, 1e-4), 0.1, -0.4).unwrap();
        let f_sta = normalized_steering(&rx, 0.1).unwrap();
        let f_ap = normalized_steering(&tx, -0.4).unwrap();
        let base = snr_db(&f_sta, &ch, &f_ap, &budget).unwrap();
        let rotated = snr_db(
            &f_sta.phase_rotated(1.1),
            &ch,
            &f_ap.phase_rotated(-2.3),
            &budget,
        )
        .unwrap();
        assert_relative_eq!(base, rotated, epsilon = 1e-9);
    }

    #[test]
    fn misalignment_peaks_at_zero_offset() {
        let rx = ArrayGeometry::half_wavelength(1).unwrap();
        let tx = ArrayGeometry::half_wavelength(64).unwrap();
        let budget = LinkBudget::default();
        let phi_t = 0.2;
        let alpha = budget.path_gain(3.0).unwrap();
        let ch = LosChannel::new(&rx, &tx, alpha, 0.0, phi_t).unwrap();
        let f_sta = normalized_steering(&rx, 0.0).unwrap();
        let aligned = snr_db(
            &f_sta,
            &ch,
            &normalized_steering(&tx, phi_t).unwrap(),
            &budget,
        )
        .unwrap();
        let mut delta = -0.1_f64;
        while delta <= 0.1 {
            if delta.abs() > 1e-12 {
                let snr = snr_db(
                    &f_sta,
                    &ch,
                    &normalized_steering(&tx, phi_t + delta).unwrap(),
                    &budget,
                )
                .unwrap();
                assert!(snr < aligned, "offset {delta} beat aligned SNR");
            }
            delta += 0.002;
        }
    }

    #[test]
    fn snr_rejects_dimension_mismatch() {
        let rx = ArrayGeometry::half_wavelength(2).unwrap();
        let tx = ArrayGeometry::half_wavelength(8).unwrap();
        let budget = LinkBudget::default();
        let ch = LosChannel::new(&rx, &tx, Complex64::new(1e-4, 0.0), 0.0, 0.0).unwrap();
        let short = normalized_steering(&ArrayGeometry::half_wavelength(4).unwrap(), 0.0).unwrap();
        let f_sta = normalized_steering(&rx, 0.0).unwrap();
        assert!(snr_db(&f_sta, &ch, &short, &budget).is_err());
        let f_ap = normalized_steering(&tx, 0.0).unwrap();
        assert!(snr_db(&short, &ch, &f_ap, &budget).is_err());
    }
}
