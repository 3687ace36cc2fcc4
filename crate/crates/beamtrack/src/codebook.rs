//! Beam codebooks: pencil (steering) beams, the SVD beamformer, and the
//! evolutionary flat-top wide-beam designer.
//!
//! The designer searches phase-only weight vectors that hold near-constant
//! gain over a target beamwidth while suppressing sidelobes. Fitness is a
//! weighted sum of three grid means: in-band ripple deviation, out-of-band
//! leakage power, and (negated) in-band power.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{angle_grid, normalized_steering, steering_vector, ArrayGeometry, Awv};
use crate::channel::LosChannel;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

const PI: f64 = std::f64::consts::PI;
const HALF_FOV: f64 = std::f64::consts::FRAC_PI_2;

/// One beam: weights plus the steering center and design beamwidth.
#[derive(Debug, Clone)]
pub struct CodebookEntry {
    pub awv: Awv,
    /// Steering center, radians.
    pub center: f64,
    /// Design beamwidth, radians (0 for pencil beams).
    pub beamwidth: f64,
}

/// Ordered set of beams sharing one array geometry; centers strictly
/// increase.
#[derive(Debug, Clone)]
pub struct Codebook {
    entries: Vec<CodebookEntry>,
    geometry: ArrayGeometry,
}

impl Codebook {
    pub fn new(geometry: ArrayGeometry, entries: Vec<CodebookEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("codebook must have at least one entry"));
        }
        for e in &entries {
            if e.awv.len() != geometry.n_elements {
                return Err(Error::DimensionMismatch {
                    context: "codebook entry length",
                    expected: geometry.n_elements,
                    got: e.awv.len(),
                });
            }
            if e.center < -HALF_FOV - 1e-12 || e.center > HALF_FOV + 1e-12 {
                return Err(Error::AngleOutOfRange {
                    angle_rad: e.center,
                });
            }
        }
        if entries.windows(2).any(|w| w[1].center <= w[0].center) {
            return Err(Error::domain("codebook centers must strictly increase"));
        }
        Ok(Self { entries, geometry })
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Angular spacing between adjacent centers, or the full field of view
    /// for a single-entry codebook.
    pub fn center_spacing(&self) -> f64 {
        if self.entries.len() < 2 {
            PI
        } else {
            self.entries[1].center - self.entries[0].center
        }
    }
}

/// Serialized form of a codebook: degrees outside, weights as (re, im).
#[derive(Debug, Serialize, Deserialize)]
pub struct CodebookFile {
    pub geometry: ArrayGeometry,
    pub entries: Vec<CodebookEntryFile>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CodebookEntryFile {
    pub center_deg: f64,
    pub beamwidth_deg: f64,
    pub weights: Vec<(f64, f64)>,
}

impl Codebook {
    pub fn to_file_model(&self) -> CodebookFile {
        CodebookFile {
            geometry: self.geometry,
            entries: self
                .entries
                .iter()
                .map(|e| CodebookEntryFile {
                    center_deg: e.center.to_degrees(),
                    beamwidth_deg: e.beamwidth.to_degrees(),
                    weights: e.awv.weights().iter().map(|w| (w.re, w.im)).collect(),
                })
                .collect(),
        }
    }

    pub fn from_file_model(file: CodebookFile) -> Result<Self> {
        let entries = file
            .entries
            .into_iter()
            .map(|e| {
                let weights = e
                    .weights
                    .into_iter()
                    .map(|(re, im)| Complex64::new(re, im))
                    .collect();
                Ok(CodebookEntry {
                    awv: Awv::new(weights)?,
                    center: e.center_deg.to_radians(),
                    beamwidth: e.beamwidth_deg.to_radians(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Codebook::new(file.geometry, entries)
    }
}

/// Pencil codebook: steering beams at centers uniform in sin(phi) over
/// [-1, 1) on the DFT-like grid `sin(phi_m) = -1 + 2m/n_beams`.
///
/// For `n_beams == n_elements` at half-wavelength spacing the beams are
/// mutually orthogonal.
pub fn pencil_codebook(geom: &ArrayGeometry, n_beams: usize) -> Result<Codebook> {
    if n_beams == 0 {
        return Err(Error::domain("pencil codebook needs at least one beam"));
    }
    let entries = (0..n_beams)
        .map(|m| {
            let u = -1.0 + 2.0 * m as f64 / n_beams as f64;
            let center = u.asin();
            Ok(CodebookEntry {
                awv: normalized_steering(geom, center)?,
                center,
                beamwidth: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(*geom, entries)
}

/// Weights and window of the wide-beam fitness function.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitnessParams {
    /// Weight on out-of-band leakage power.
    pub beta1: f64,
    /// Weight on in-band power (rewarded).
    pub beta2: f64,
    /// Target beamwidth, radians.
    pub beamwidth: f64,
    /// Beam center, radians.
    pub target_center: f64,
    /// Azimuth grid step, radians.
    pub grid_step: f64,
}

impl FitnessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) {
            return Err(Error::domain("fitness weights must be nonnegative"));
        }
        if !(self.beamwidth > 0.0 && self.beamwidth < PI) {
            return Err(Error::domain(format!(
                "beamwidth must be in (0, pi), got {}",
                self.beamwidth
            )));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= self.beamwidth / 10.0) {
            return Err(Error::domain(
                "grid step must be positive and at most beamwidth/10",
            ));
        }
        // The in-band window must stay inside the visible range.
        if self.target_center - self.beamwidth / 2.0 < -HALF_FOV - 1e-9
            || self.target_center + self.beamwidth / 2.0 > HALF_FOV + 1e-9
        {
            return Err(Error::domain(format!(
                "beam window [{:.4}, {:.4}] rad exceeds [-pi/2, pi/2]",
                self.target_center - self.beamwidth / 2.0,
                self.target_center + self.beamwidth / 2.0
            )));
        }
        Ok(())
    }
}

/// Evolutionary search controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolutionParams {
    /// Population size N_P.
    pub population_size: usize,
    /// Consecutive non-improving iterations before the perturbation
    /// amplitude doubles (N_max).
    pub stagnation_limit: usize,
    /// Termination threshold for the perturbation amplitude (eta_max).
    pub eta_max: f64,
    pub rng_seed: u64,
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::domain("population size must be at least 2"));
        }
        if self.stagnation_limit < 1 {
            return Err(Error::domain("stagnation limit must be at least 1"));
        }
        if !(self.eta_max > 1.0) {
            return Err(Error::domain("eta_max must exceed 1"));
        }
        Ok(())
    }
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            population_size: 100,
            stagnation_limit: 200,
            eta_max: 1e5,
            rng_seed: 0,
        }
    }
}

/// The three fitness terms evaluated on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessTerms {
    /// F1: mean squared deviation of |A| from its in-band mean (ripple).
    pub ripple: f64,
    /// F2: mean out-of-band power |A|^2 (leakage).
    pub leakage: f64,
    /// F3: mean in-band power |A|^2.
    pub in_band_power: f64,
}

impl FitnessTerms {
    /// Combines the terms: `F1 + beta1 * F2 - beta2 * F3`.
    pub fn weighted(&self, beta1: f64, beta2: f64) -> f64 {
        self.ripple + beta1 * self.leakage - beta2 * self.in_band_power
    }

    /// Terms from raw amplitude samples split into the in-band window and
    /// its complement.
    pub fn from_amplitudes(in_band: &[f64], out_band: &[f64]) -> Self {
        let nb = in_band.len().max(1) as f64;
        let mean_amp = in_band.iter().sum::<f64>() / nb;
        let ripple = in_band
            .iter()
            .map(|a| (mean_amp - a) * (mean_amp - a))
            .sum::<f64>()
            / nb;
        let in_band_power = in_band.iter().map(|a| a * a).sum::<f64>() / nb;
        let leakage =
            out_band.iter().map(|a| a * a).sum::<f64>() / out_band.len().max(1) as f64;
        Self {
            ripple,
            leakage,
            in_band_power,
        }
    }
}

/// Grid, window partition and weights fixed for repeated fitness
/// evaluations of one design problem.
///
/// Steering rows are stored for the non-positive half of the symmetric
/// azimuth grid only; the mirror angle's row is the exact conjugate, so
/// one row yields the pattern at both angles. Batches of weight vectors
/// are evaluated through four real matrix products.
pub struct FitnessEvaluator {
    /// Steering real parts, half-grid rows by element columns.
    re_half: DMatrix<f64>,
    /// Steering imaginary parts, same layout.
    im_half: DMatrix<f64>,
    /// Total grid point count (half rows cover indices `i` and `count-1-i`).
    count: usize,
    in_band: Vec<usize>,
    out_band: Vec<usize>,
    beta1: f64,
    beta2: f64,
}

impl FitnessEvaluator {
    pub fn new(geom: &ArrayGeometry, params: &FitnessParams) -> Result<Self> {
        params.validate()?;
        let angles = angle_grid(params.grid_step);
        let count = angles.len();
        let half = count.div_ceil(2);
        let n = geom.n_elements;
        let mut re_half = DMatrix::zeros(half, n);
        let mut im_half = DMatrix::zeros(half, n);
        for h in 0..half {
            // angle_grid stays inside the visible range, so this cannot fail
            let sv = steering_vector(geom, angles[h]).expect("grid angle in range");
            for (k, a) in sv.iter().enumerate() {
                re_half[(h, k)] = a.re;
                im_half[(h, k)] = a.im;
            }
        }
        let window = params.beamwidth / 2.0 + 1e-12;
        let (mut in_band, mut out_band) = (Vec::new(), Vec::new());
        for (i, &phi) in angles.iter().enumerate() {
            if (phi - params.target_center).abs() <= window {
                in_band.push(i);
            } else {
                out_band.push(i);
            }
        }
        if in_band.is_empty() {
            return Err(Error::domain("beam window contains no grid points"));
        }
        Ok(Self {
            re_half,
            im_half,
            count,
            in_band,
            out_band,
            beta1: params.beta1,
            beta2: params.beta2,
        })
    }

    pub fn terms(&self, awv: &Awv) -> FitnessTerms {
        let n = awv.len();
        let mut w_re = DMatrix::zeros(n, 1);
        let mut w_im = DMatrix::zeros(n, 1);
        for (k, w) in awv.weights().iter().enumerate() {
            w_re[(k, 0)] = w.re;
            w_im[(k, 0)] = w.im;
        }
        let mut scratch = BlockScratch::default();
        let mut terms = [FitnessTerms {
            ripple: 0.0,
            leakage: 0.0,
            in_band_power: 0.0,
        }];
        self.eval_block(&w_re, &w_im, &mut scratch, &mut terms);
        terms[0]
    }

    pub fn value(&self, awv: &Awv) -> f64 {
        self.terms(awv).weighted(self.beta1, self.beta2)
    }

    /// Evaluates one block of weight columns: `w_re`/`w_im` are element by
    /// child matrices; writes one [`FitnessTerms`] per child.
    fn eval_block(
        &self,
        w_re: &DMatrix<f64>,
        w_im: &DMatrix<f64>,
        scratch: &mut BlockScratch,
        out: &mut [FitnessTerms],
    ) {
        let half = self.re_half.nrows();
        let block = w_re.ncols();
        debug_assert_eq!(out.len(), block);
        scratch.ensure(half, block, self.count);
        self.re_half.mul_to(w_re, &mut scratch.srr);
        self.im_half.mul_to(w_im, &mut scratch.sii);
        self.re_half.mul_to(w_im, &mut scratch.sri);
        self.im_half.mul_to(w_re, &mut scratch.sir);

        for c in 0..block {
            let srr = scratch.srr.column(c);
            let sii = scratch.sii.column(c);
            let sri = scratch.sri.column(c);
            let sir = scratch.sir.column(c);
            for h in 0..half {
                // A at the stored (non-positive) angle: a^H w
                let (re_c, im_c) = (srr[h] + sii[h], sri[h] - sir[h]);
                scratch.power[h] = re_c * re_c + im_c * im_c;
                let j = self.count - 1 - h;
                if j != h {
                    // mirror angle: steering row is conjugated
                    let (re_d, im_d) = (srr[h] - sii[h], sri[h] + sir[h]);
                    scratch.power[j] = re_d * re_d + im_d * im_d;
                }
            }
            out[c] = self.reduce_terms(&scratch.power);
        }
    }

    fn reduce_terms(&self, power: &[f64]) -> FitnessTerms {
        let nb = self.in_band.len() as f64;
        let mean_amp = self.in_band.iter().map(|&i| power[i].sqrt()).sum::<f64>() / nb;
        let mut ripple = 0.0;
        let mut in_band_power = 0.0;
        for &i in &self.in_band {
            let a = power[i].sqrt();
            ripple += (mean_amp - a) * (mean_amp - a);
            in_band_power += power[i];
        }
        let leakage = self.out_band.iter().map(|&i| power[i]).sum::<f64>()
            / self.out_band.len().max(1) as f64;
        FitnessTerms {
            ripple: ripple / nb,
            leakage,
            in_band_power: in_band_power / nb,
        }
    }
}

/// Per-thread matrices reused across block evaluations.
#[derive(Default)]
struct BlockScratch {
    srr: DMatrix<f64>,
    sii: DMatrix<f64>,
    sri: DMatrix<f64>,
    sir: DMatrix<f64>,
    power: Vec<f64>,
}

impl BlockScratch {
    fn ensure(&mut self, half: usize, block: usize, count: usize) {
        if self.srr.nrows() != half || self.srr.ncols() != block {
            self.srr = DMatrix::zeros(half, block);
            self.sii = DMatrix::zeros(half, block);
            self.sri = DMatrix::zeros(half, block);
            self.sir = DMatrix::zeros(half, block);
        }
        self.power.resize(count, 0.0);
    }
}

/// Wide-beam fitness of a unit-norm AWV (lower is better).
pub fn fitness(geom: &ArrayGeometry, awv: &Awv, params: &FitnessParams) -> Result<f64> {
    Ok(FitnessEvaluator::new(geom, params)?.value(awv))
}

/// Wide-beam fitness split into its terms.
pub fn fitness_terms(
    geom: &ArrayGeometry,
    awv: &Awv,
    params: &FitnessParams,
) -> Result<FitnessTerms> {
    Ok(FitnessEvaluator::new(geom, params)?.terms(awv))
}

/// Output of one evolutionary design run.
#[derive(Debug, Clone)]
pub struct WideBeamDesign {
    pub entry: CodebookEntry,
    /// Fitness terms of the returned unit-norm AWV.
    pub terms: FitnessTerms,
    /// Best fitness after each iteration; non-increasing by elitism.
    pub fitness_trace: Vec<f64>,
    pub iterations: usize,
}

/// Evolutionary flat-top design: a population of phase-only weight vectors
/// is repeatedly rebuilt from Gaussian phase perturbations of the best
/// individual. The perturbation std is `pi / eta`; `eta` doubles after
/// every `stagnation_limit` consecutive non-improving iterations and the
/// search stops once `eta >= eta_max`.
pub fn design_wide_beam(
    geom: &ArrayGeometry,
    params: &FitnessParams,
    evo: &EvolutionParams,
) -> Result<WideBeamDesign> {
    evo.validate()?;
    let evaluator = FitnessEvaluator::new(geom, params)?;
    let n = geom.n_elements;
    let scale = 1.0 / (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(evo.rng_seed);

    let mut population: Vec<Vec<f64>> = (0..evo.population_size)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
        .collect();

    let mut eta = 1.0_f64;
    let mut stagnant = 0usize;
    let mut best_value = f64::INFINITY;
    let mut trace = Vec::new();
    let mut iterations = 0usize;

    // Fixed block size keeps per-child results independent of thread count.
    const EVAL_BLOCK: usize = 32;

    while eta < evo.eta_max {
        iterations += 1;
        let values: Vec<f64> = population
            .par_chunks(EVAL_BLOCK)
            .map_init(BlockScratch::default, |scratch, block| {
                let cols = block.len();
                let mut w_re = DMatrix::zeros(n, cols);
                let mut w_im = DMatrix::zeros(n, cols);
                for (c, phases) in block.iter().enumerate() {
                    for (k, &p) in phases.iter().enumerate() {
                        let (sin, cos) = p.sin_cos();
                        w_re[(k, c)] = scale * cos;
                        w_im[(k, c)] = scale * sin;
                    }
                }
                let mut terms = vec![
                    FitnessTerms {
                        ripple: 0.0,
                        leakage: 0.0,
                        in_band_power: 0.0,
                    };
                    cols
                ];
                evaluator.eval_block(&w_re, &w_im, scratch, &mut terms);
                terms
                    .iter()
                    .map(|t| t.weighted(evaluator.beta1, evaluator.beta2))
                    .collect::<Vec<f64>>()
            })
            .flatten()
            .collect();
        // Full argmin; ties break to the lowest population index.
        let mut best_idx = 0;
        for (i, &v) in values.iter().enumerate() {
            if v < values[best_idx] {
                best_idx = i;
            }
        }
        if values[best_idx] < best_value {
            best_value = values[best_idx];
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant == evo.stagnation_limit {
                eta *= 2.0;
                stagnant = 0;
            }
        }
        trace.push(best_value);

        let incumbent = std::mem::take(&mut population[best_idx]);
        let sigma = PI / eta;
        let child_seed_base = rng.next_u64();
        let mut children: Vec<Vec<f64>> = (1..evo.population_size)
            .into_par_iter()
            .map(|i| {
                let mut child_rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(child_seed_base, i as u64));
                let noise = Normal::new(0.0, sigma).expect("sigma is positive");
                incumbent
                    .iter()
                    .map(|&p| p + noise.sample(&mut child_rng))
                    .collect()
            })
            .collect();
        population.clear();
        population.push(incumbent);
        population.append(&mut children);
    }

    let best_phases = &population[0];
    let awv = Awv::from_phases(best_phases);
    let terms = evaluator.terms(&awv);
    Ok(WideBeamDesign {
        entry: CodebookEntry {
            awv,
            center: params.target_center,
            beamwidth: params.beamwidth,
        },
        terms,
        fitness_trace: trace,
        iterations,
    })
}

/// How [`wide_codebook`] places the designed beam at each center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidePlacement {
    /// Design once at broadside and relocate by element-wise steering
    /// phases (exact pattern shift in the sin-azimuth domain).
    Resteer,
    /// Run the evolutionary design independently at every center.
    PerCenter,
}

/// Wide-beam codebook covering [-pi/2, pi/2] with centers spaced by (at
/// most) the design beamwidth.
///
/// `params.target_center` and `params.beamwidth` are overridden per entry;
/// the weights, grid step and evolution controls are taken as given.
pub fn wide_codebook(
    geom: &ArrayGeometry,
    beamwidth: f64,
    params: &FitnessParams,
    evo: &EvolutionParams,
    placement: WidePlacement,
) -> Result<Codebook> {
    if !(beamwidth > 0.0 && beamwidth < PI) {
        return Err(Error::domain("codebook beamwidth must be in (0, pi)"));
    }
    let n_entries = ((PI / beamwidth) - 1e-9).ceil().max(1.0) as usize;
    let spacing = PI / n_entries as f64;
    let centers: Vec<f64> = (0..n_entries)
        .map(|k| -HALF_FOV + (k as f64 + 0.5) * spacing)
        .collect();

    let entries = match placement {
        WidePlacement::Resteer => {
            let base_params = FitnessParams {
                target_center: 0.0,
                beamwidth,
                ..*params
            };
            let base = design_wide_beam(geom, &base_params, evo)?;
            centers
                .iter()
                .map(|&c| {
                    Ok(CodebookEntry {
                        awv: base.entry.awv.steered_to(geom, c)?,
                        center: c,
                        beamwidth,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        WidePlacement::PerCenter => centers
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let entry_params = FitnessParams {
                    target_center: c,
                    beamwidth,
                    ..*params
                };
                let entry_evo = EvolutionParams {
                    rng_seed: derive_seed(evo.rng_seed, k as u64),
                    ..*evo
                };
                Ok(design_wide_beam(geom, &entry_params, &entry_evo)?.entry)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Codebook::new(*geom, entries)
}

/// Principal singular vectors of the channel: `(f_ap, f_sta)` achieving
/// the strongest singular value `sqrt(M N) |alpha|`.
pub fn svd_beamformer(channel: &LosChannel) -> Result<(Awv, Awv)> {
    let svd = channel.matrix().clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut k = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > svd.singular_values[k] {
            k = i;
        }
    }
    let f_sta = Awv::from_unnormalized(u.column(k).iter().copied().collect())?;
    let f_ap = Awv::from_unnormalized(v_t.row(k).iter().map(|z| z.conj()).collect())?;
    Ok((f_ap, f_sta))
}
