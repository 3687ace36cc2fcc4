//! Blind beam tracking: a particle filter over angular position and
//! velocity driven by SNR-only observations, plus the drop-triggered TRN
//! sweep baseline and the controller that arbitrates between them.
//!
//! The filter state is `(theta, theta_dot)`. Prediction follows a
//! two-regime motion model: with probability `p_continuous` the velocity
//! performs a Gaussian random walk (angular acceleration), otherwise it is
//! redrawn uniformly (sudden motion change). The update step compares the
//! observed SNR, relative to the reference measured at the last alignment,
//! against the beam pattern's relative gain at each particle angle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::array::{pattern_response, ArrayGeometry, Awv};
use crate::channel::{snr_db, LinkBudget, LosChannel};
use crate::codebook::Codebook;
use crate::error::{Error, Result};

const HALF_FOV: f64 = std::f64::consts::FRAC_PI_2;

/// One weighted hypothesis of the hidden state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    /// Angular position, radians, in [-pi/2, pi/2].
    pub theta: f64,
    /// Angular velocity, radians per second.
    pub theta_dot: f64,
    /// Nonnegative importance weight.
    pub weight: f64,
}

/// Two-regime motion model parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MotionModel {
    /// Probability that the motion continues (velocity random walk).
    pub p_continuous: f64,
    /// Std of the per-step velocity increment, radians/s.
    pub sigma_accel: f64,
    /// Maximum angular speed, radians/s; bounds the uniform redraw.
    pub theta_dot_max: f64,
    /// Prediction step, seconds.
    pub dt: f64,
}

impl MotionModel {
    /// Defaults for a given step: 98% continuous motion, 56 deg/s maximum
    /// angular speed, velocity-walk std `theta_dot_max * dt`.
    pub fn with_dt(dt: f64) -> Self {
        let theta_dot_max = 56.0_f64.to_radians();
        Self {
            p_continuous: 0.98,
            sigma_accel: theta_dot_max * dt,
            theta_dot_max,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_continuous) {
            return Err(Error::domain("p_continuous must be in [0, 1]"));
        }
        if !(self.theta_dot_max > 0.0) {
            return Err(Error::domain("theta_dot_max must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::domain("motion dt must be positive"));
        }
        if !(self.sigma_accel >= 0.0) {
            return Err(Error::domain("sigma_accel must be nonnegative"));
        }
        Ok(())
    }
}

/// Relative-SNR observation model for the update step.
///
/// The likelihood is Gaussian in dB: the observed SNR relative to
/// `reference_snr_db` (measured at the last alignment) is compared with
/// the pattern gain at the particle angle relative to the gain at the
/// current beam center. Distance and transmit power cancel out, which is
/// what keeps the filter blind.
#[derive(Debug, Clone, Copy)]
pub struct ObservationModel<'a> {
    /// SNR observation noise std in dB.
    pub sigma_gamma_db: f64,
    /// AWV the observation was measured through.
    pub current_awv: &'a Awv,
    /// Steering center of that AWV, radians.
    pub beam_center: f64,
    /// SNR measured at the last alignment, dB.
    pub reference_snr_db: f64,
}

/// TRN sweep timing and the drop trigger.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrnConfig {
    /// Time to test one codebook entry, seconds.
    pub trn_interval_s: f64,
    /// Sweep trigger: observed SNR this far below the reference, dB.
    pub drop_threshold_db: f64,
}

impl Default for TrnConfig {
    fn default() -> Self {
        Self {
            trn_interval_s: 0.020,
            drop_threshold_db: 3.0,
        }
    }
}

impl TrnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.trn_interval_s > 0.0) {
            return Err(Error::domain("trn_interval_s must be positive"));
        }
        if !(self.drop_threshold_db > 0.0) {
            return Err(Error::domain("drop_threshold_db must be positive"));
        }
        Ok(())
    }
}

/// Point estimate with its weighted spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    /// Weighted mean angle, radians.
    pub theta: f64,
    /// Weighted standard deviation, radians.
    pub std: f64,
}

/// Weighted particle population plus its own RNG stream.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
}

impl ParticleSet {
    /// Uniform-weight particles with `theta` uniform over
    /// `center +- width/2` (clamped to the field of view) and `theta_dot`
    /// uniform over `+- theta_dot_max`.
    pub fn seeded_around(
        count: usize,
        center: f64,
        width: f64,
        theta_dot_max: f64,
        seed: u64,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::domain("particle count must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = (center - width / 2.0).max(-HALF_FOV);
        let hi = (center + width / 2.0).min(HALF_FOV);
        let weight = 1.0 / count as f64;
        let particles = (0..count)
            .map(|_| Particle {
                theta: if hi > lo { rng.random_range(lo..=hi) } else { lo },
                theta_dot: rng.random_range(-theta_dot_max..=theta_dot_max),
                weight,
            })
            .collect();
        Ok(Self { particles, rng })
    }

    /// Wraps an explicit population (weights are normalized).
    pub fn from_particles(particles: Vec<Particle>, seed: u64) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::domain("particle count must be positive"));
        }
        let mut set = Self {
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        set.normalize_weights();
        Ok(set)
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / sum(w^2)`.
    pub fn effective_sample_size(&self) -> f64 {
        let sum_sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if sum_sq > 0.0 {
            1.0 / sum_sq
        } else {
            0.0
        }
    }

    fn normalize_weights(&mut self) {
        let sum: f64 = self.particles.iter().map(|p| p.weight).sum();
        if sum > 0.0 && sum.is_finite() {
            for p in &mut self.particles {
                p.weight /= sum;
            }
        } else {
            let w = 1.0 / self.particles.len() as f64;
            for p in &mut self.particles {
                p.weight = w;
            }
        }
    }

    /// Prediction step: positions advance by the old velocity, then each
    /// velocity either random-walks (probability `p_continuous`) or is
    /// redrawn uniformly. Positions clamp to the field of view with the
    /// velocity zeroed on contact. Weights are unchanged.
    pub fn predict(&mut self, motion: &MotionModel) {
        let accel = Normal::new(0.0, motion.sigma_accel).expect("sigma_accel >= 0");
        for p in &mut self.particles {
            p.theta += p.theta_dot * motion.dt;
            if self.rng.random::<f64>() < motion.p_continuous {
                p.theta_dot += accel.sample(&mut self.rng);
            } else {
                p.theta_dot = self
                    .rng
                    .random_range(-motion.theta_dot_max..=motion.theta_dot_max);
            }
            if p.theta < -HALF_FOV {
                p.theta = -HALF_FOV;
                p.theta_dot = 0.0;
            } else if p.theta > HALF_FOV {
                p.theta = HALF_FOV;
                p.theta_dot = 0.0;
            }
        }
    }

    /// Update step: weights are multiplied by the Gaussian likelihood of
    /// the observed relative SNR and renormalized. Returns `true` when all
    /// likelihoods underflowed and the weights were reset to uniform
    /// (filter divergence).
    pub fn update(
        &mut self,
        observed_snr_db: f64,
        obs: &ObservationModel<'_>,
        geom: &ArrayGeometry,
    ) -> Result<bool> {
        let center_gain_db = relative_gain_db(geom, obs.current_awv, obs.beam_center)?;
        let delta_observed = observed_snr_db - obs.reference_snr_db;
        let inv_two_var = 0.5 / (obs.sigma_gamma_db * obs.sigma_gamma_db);

        let mut log_lik = Vec::with_capacity(self.particles.len());
        let mut max_ll = f64::NEG_INFINITY;
        for p in &self.particles {
            let delta_model = relative_gain_db(geom, obs.current_awv, p.theta)? - center_gain_db;
            let residual = delta_observed - delta_model;
            let ll = if residual.is_finite() {
                -residual * residual * inv_two_var
            } else {
                f64::NEG_INFINITY
            };
            if ll > max_ll {
                max_ll = ll;
            }
            log_lik.push(ll);
        }

        let mut diverged = false;
        if max_ll == f64::NEG_INFINITY {
            diverged = true;
        } else {
            for (p, ll) in self.particles.iter_mut().zip(&log_lik) {
                p.weight *= (ll - max_ll).exp();
            }
            let sum: f64 = self.particles.iter().map(|p| p.weight).sum();
            if !(sum > 0.0 && sum.is_finite()) {
                diverged = true;
            }
        }
        if diverged {
            let w = 1.0 / self.particles.len() as f64;
            for p in &mut self.particles {
                p.weight = w;
            }
            log::warn!("particle filter divergence: weights reset to uniform");
        } else {
            self.normalize_weights();
        }
        Ok(diverged)
    }

    /// Systematic resampling, executed only when the effective sample size
    /// drops below half the particle count. Returns whether it ran.
    pub fn resample(&mut self) -> bool {
        let n = self.particles.len();
        if self.effective_sample_size() >= n as f64 / 2.0 {
            return false;
        }
        let weights: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        let u0 = self.rng.random::<f64>();
        let indices = systematic_resample_indices(&weights, n, u0);
        let w = 1.0 / n as f64;
        self.particles = indices
            .into_iter()
            .map(|i| Particle {
                weight: w,
                ..self.particles[i]
            })
            .collect();
        true
    }

    /// Weighted mean of `theta` with the weighted std as confidence.
    pub fn estimate(&self) -> Estimate {
        let mean: f64 = self.particles.iter().map(|p| p.weight * p.theta).sum();
        let var: f64 = self
            .particles
            .iter()
            .map(|p| p.weight * (p.theta - mean) * (p.theta - mean))
            .sum();
        Estimate {
            theta: mean,
            std: var.max(0.0).sqrt(),
        }
    }
}

/// Pattern gain at `angle` in dB for the given AWV (only differences of
/// these values are meaningful).
fn relative_gain_db(geom: &ArrayGeometry, awv: &Awv, angle: f64) -> Result<f64> {
    let power = pattern_response(geom, awv, angle)?.norm_sqr();
    Ok(if power > 0.0 {
        10.0 * power.log10()
    } else {
        f64::NEG_INFINITY
    })
}

/// Systematic resampling: offspring counts of parent `i` stay within one
/// of `n_out * weights[i]` for any draw `u0` in [0, 1).
pub fn systematic_resample_indices(weights: &[f64], n_out: usize, u0: f64) -> Vec<usize> {
    let mut indices = Vec::with_capacity(n_out);
    let mut cumulative = 0.0;
    let mut parent = 0usize;
    for j in 0..n_out {
        let target = (u0 + j as f64) / n_out as f64;
        while cumulative + weights[parent] < target && parent < weights.len() - 1 {
            cumulative += weights[parent];
            parent += 1;
        }
        indices.push(parent);
    }
    indices
}

/// Index of the codebook entry whose center is nearest to `theta_hat` in
/// the sin-azimuth domain; ties break to the lower index.
pub fn select_beam(theta_hat: f64, codebook: &Codebook) -> usize {
    let u = theta_hat.clamp(-HALF_FOV, HALF_FOV).sin();
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, e) in codebook.entries().iter().enumerate() {
        let d = (e.center.sin() - u).abs();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    best
}

/// Result of an exhaustive TRN sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepOutcome {
    pub best_index: usize,
    pub best_snr_db: f64,
    /// Time consumed: entries times the TRN slot.
    pub elapsed_s: f64,
}

/// Exhaustive beam sweep: measures the SNR of every codebook entry against
/// the true channel and returns the argmax (ties to the lower index).
pub fn trn_sweep(
    codebook: &Codebook,
    channel: &LosChannel,
    f_sta: &Awv,
    budget: &LinkBudget,
    trn: &TrnConfig,
) -> Result<SweepOutcome> {
    let mut best_index = 0;
    let mut best_snr_db = f64::NEG_INFINITY;
    for (i, e) in codebook.entries().iter().enumerate() {
        let snr = snr_db(f_sta, channel, &e.awv, budget)?;
        if snr > best_snr_db {
            best_snr_db = snr;
            best_index = i;
        }
    }
    Ok(SweepOutcome {
        best_index,
        best_snr_db,
        elapsed_s: codebook.len() as f64 * trn.trn_interval_s,
    })
}

/// Beam management strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// Hold the beam; sweep on SNR drops only.
    TrnOnly,
    /// Track with the particle filter; sweep remains as fallback.
    PfBt,
}

/// Controller decision for one observation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Hold,
    Steer(usize),
    Sweep,
}

/// Drop-triggered beam controller. In PF mode every observation feeds the
/// particle filter and the beam follows the posterior estimate; in both
/// modes an SNR drop below `reference - drop_threshold` requests a sweep.
#[derive(Debug, Clone)]
pub struct Controller {
    mode: TrackingMode,
    geom: ArrayGeometry,
    codebook: Codebook,
    motion: MotionModel,
    trn: TrnConfig,
    sigma_gamma_db: f64,
    n_particles: usize,
    current_beam: usize,
    reference_snr_db: f64,
    particles: Option<ParticleSet>,
    diverged_count: usize,
    reseed_rng: ChaCha8Rng,
}

impl Controller {
    /// Sets up a controller on an established link: `initial_beam` is
    /// already steered and `initial_snr_db` was measured through it.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: TrackingMode,
        geom: ArrayGeometry,
        codebook: Codebook,
        motion: MotionModel,
        trn: TrnConfig,
        sigma_gamma_db: f64,
        n_particles: usize,
        initial_beam: usize,
        initial_snr_db: f64,
        seed: u64,
    ) -> Result<Self> {
        motion.validate()?;
        trn.validate()?;
        if initial_beam >= codebook.len() {
            return Err(Error::domain("initial beam index out of range"));
        }
        if mode == TrackingMode::PfBt {
            if n_particles == 0 {
                return Err(Error::domain("particle count must be positive"));
            }
            if !(sigma_gamma_db > 0.0) {
                return Err(Error::domain("sigma_gamma_db must be positive"));
            }
        }
        let mut ctrl = Self {
            mode,
            geom,
            codebook,
            motion,
            trn,
            sigma_gamma_db,
            n_particles,
            current_beam: initial_beam,
            reference_snr_db: initial_snr_db,
            particles: None,
            diverged_count: 0,
            reseed_rng: ChaCha8Rng::seed_from_u64(seed),
        };
        if mode == TrackingMode::PfBt {
            ctrl.reseed_particles()?;
        }
        Ok(ctrl)
    }

    pub fn current_beam(&self) -> usize {
        self.current_beam
    }

    pub fn current_awv(&self) -> &Awv {
        &self.codebook.entries()[self.current_beam].awv
    }

    pub fn reference_snr_db(&self) -> f64 {
        self.reference_snr_db
    }

    pub fn effective_sample_size(&self) -> Option<f64> {
        self.particles.as_ref().map(|p| p.effective_sample_size())
    }

    pub fn estimate(&self) -> Option<Estimate> {
        self.particles.as_ref().map(|p| p.estimate())
    }

    /// Times the filter signalled divergence.
    pub fn diverged_count(&self) -> usize {
        self.diverged_count
    }

    /// One observation step. A sweep request must be satisfied by the
    /// caller (which owns the channel) via [`Controller::complete_sweep`].
    pub fn step(&mut self, observed_snr_db: f64) -> Result<Action> {
        if observed_snr_db < self.reference_snr_db - self.trn.drop_threshold_db {
            return Ok(Action::Sweep);
        }
        match self.mode {
            TrackingMode::TrnOnly => Ok(Action::Hold),
            TrackingMode::PfBt => {
                let entry = &self.codebook.entries()[self.current_beam];
                let obs = ObservationModel {
                    sigma_gamma_db: self.sigma_gamma_db,
                    current_awv: &entry.awv,
                    beam_center: entry.center,
                    reference_snr_db: self.reference_snr_db,
                };
                let particles = self.particles.as_mut().expect("PF mode has particles");
                particles.predict(&self.motion);
                if particles.update(observed_snr_db, &obs, &self.geom)? {
                    self.diverged_count += 1;
                }
                particles.resample();
                let estimate = particles.estimate();
                let target = select_beam(estimate.theta, &self.codebook);
                if target != self.current_beam {
                    self.current_beam = target;
                    Ok(Action::Steer(target))
                } else {
                    Ok(Action::Hold)
                }
            }
        }
    }

    /// Applies a finished sweep: steer to the winner, reset the reference
    /// SNR, and re-seed the particle filter around the winning center.
    pub fn complete_sweep(&mut self, outcome: &SweepOutcome) -> Result<()> {
        if outcome.best_index >= self.codebook.len() {
            return Err(Error::domain("sweep winner index out of range"));
        }
        self.current_beam = outcome.best_index;
        self.reference_snr_db = outcome.best_snr_db;
        if self.mode == TrackingMode::PfBt {
            self.reseed_particles()?;
        }
        Ok(())
    }

    /// Uniform re-seed over the current beam's width. Pencil entries carry
    /// zero design beamwidth, so the codebook's center spacing stands in.
    fn reseed_particles(&mut self) -> Result<()> {
        let entry = &self.codebook.entries()[self.current_beam];
        let width = if entry.beamwidth > 0.0 {
            entry.beamwidth
        } else {
            self.codebook.center_spacing()
        };
        let seed = self.reseed_rng.random::<u64>();
        self.particles = Some(ParticleSet::seeded_around(
            self.n_particles,
            entry.center,
            width,
            self.motion.theta_dot_max,
            seed,
        )?);
        Ok(())
    }
}
