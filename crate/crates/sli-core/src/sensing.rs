//! Acceleration sensing: signal response, Fisher information, noise.
//!
//! An applied acceleration changes the final momentum distribution of an
//! interferometer sequence. The classical Fisher information
//! `F(a) = N_at Σₙ (∂Pₙ/∂a)²/Pₙ` (derivatives by two-point forward
//! difference) and the Cramér-Rao bound `δa = 1/√F` quantify the smallest
//! detectable signal. A population-level noise model (multinomial projection
//! noise, a per-bin imaging background, and Gaussian read noise) stands in
//! for the imaging chain and sets the measurable noise floor.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Normal};

use crate::constants::{BOHR_MAGNETON, RB87_MASS};
use crate::lattice::{
    ground_bloch_state, measure_populations, propagate, LatticeConfig, LatticeError,
    MomentumDistribution,
};
use crate::protocol::ShakingProtocol;

/// Bins with `Pₙ(a)` below this are excluded from the Fisher sum: the `1/Pₙ`
/// weight diverges for empty bins, mirroring the imaging threshold below
/// which atoms are not counted.
pub const POPULATION_FLOOR: f64 = 1e-4;

/// Measured uncertainty band of the coil calibration, (m/s²)/A.
pub const COIL_COEFFICIENT_TOLERANCE: f64 = 0.16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensingError {
    #[error("invalid calibration model: {0}")]
    InvalidCalibration(&'static str),
    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("atom number must be positive, got {0}")]
    InvalidAtomNumber(f64),
    #[error("population vectors differ in length: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("acceleration scan needs at least one value")]
    EmptyScan,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Conversion between a magnetic-field gradient and the effective
/// acceleration it exerts on spin-polarized atoms:
/// `a_eff = G·g_F·m_F·μ_B/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    /// Landé g-factor of the trapped hyperfine state.
    pub lande_g_f: f64,
    /// Magnetic quantum number.
    pub m_f: f64,
    /// Bohr magneton, J/T.
    pub bohr_magneton: f64,
    /// Atom mass, kg.
    pub mass: f64,
    /// Measured coil response, (m/s²) per ampere.
    pub coil_coefficient: f64,
    /// Coil field gradient per ampere, (T/m)/A, from the coil geometry.
    pub coil_gradient_per_amp: f64,
}

impl Default for CalibrationModel {
    /// ⁸⁷Rb in |F, m_F⟩ = |2, 2⟩ with the measured 0.71 (m/s²)/A coil.
    fn default() -> Self {
        Self {
            lande_g_f: 0.5,
            m_f: 2.0,
            bohr_magneton: BOHR_MAGNETON,
            mass: RB87_MASS,
            coil_coefficient: 0.71,
            // chosen to match the measured coil response through the
            // gradient→acceleration conversion
            coil_gradient_per_amp: 0.011048e0,
        }
    }
}

impl CalibrationModel {
    /// Effective acceleration for a field gradient `G` (T/m); exactly linear
    /// and odd in `G`.
    pub fn effective_acceleration(&self, gradient: f64) -> f64 {
        gradient * self.lande_g_f * self.m_f * self.bohr_magneton / self.mass
    }

    /// Coil response predicted from the gradient geometry via the
    /// gradient→acceleration conversion, (m/s²)/A.
    pub fn predicted_coil_coefficient(&self) -> f64 {
        self.effective_acceleration(self.coil_gradient_per_amp)
    }

    /// Effective acceleration at a coil current, using the measured response.
    pub fn acceleration_from_current(&self, amps: f64) -> f64 {
        self.coil_coefficient * amps
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        let positive = self.lande_g_f > 0.0
            && self.m_f > 0.0
            && self.bohr_magneton > 0.0
            && self.mass > 0.0
            && self.coil_gradient_per_amp > 0.0;
        if !positive {
            return Err(SensingError::InvalidCalibration(
                "physical constants must be positive",
            ));
        }
        let defect = (self.coil_coefficient - self.predicted_coil_coefficient()).abs();
        if defect > COIL_COEFFICIENT_TOLERANCE {
            return Err(SensingError::InvalidCalibration(
                "coil coefficient outside the measured uncertainty band",
            ));
        }
        Ok(())
    }
}

/// Population-level imaging noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Atoms per shot for the multinomial projection draw; an infinite value
    /// selects the analytic (projection-noise-free) limit.
    pub atom_number: f64,
    /// Constant imaging background added to every measured bin, population
    /// units.
    pub offset: f64,
    /// Gaussian read noise per bin per shot, population units.
    pub read_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    /// Defaults calibrated so the pure-noise Cramér-Rao floor of the
    /// acceptance pipeline lands near the 0.014 m/s² scale.
    fn default() -> Self {
        Self { atom_number: 1e4, offset: 0.02, read_sigma: 0.01, seed: 0 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), SensingError> {
        if !(self.atom_number > 0.0) {
            return Err(SensingError::InvalidNoise("atom_number must be positive"));
        }
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return Err(SensingError::InvalidNoise("offset must be finite and >= 0"));
        }
        if !(self.read_sigma >= 0.0 && self.read_sigma.is_finite()) {
            return Err(SensingError::InvalidNoise("read_sigma must be finite and >= 0"));
        }
        Ok(())
    }

    /// Deterministic per-draw RNG: one ChaCha stream per `draw_index`, so
    /// draws are reproducible and independent tasks can consume disjoint
    /// indices concurrently.
    fn rng_for(&self, draw_index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(draw_index);
        rng
    }
}

/// One synthetic noisy population measurement.
///
/// A multinomial draw of `atom_number` atoms over the population bins plus
/// the leak channel models projection noise; each measured bin then gains the
/// background offset and Gaussian read noise and is clamped at zero. The same
/// `(seed, draw_index)` pair always yields the same image.
pub fn noisy_measurement(
    p: &MomentumDistribution,
    noise: &NoiseModel,
    draw_index: u64,
) -> Result<MomentumDistribution, SensingError> {
    noise.validate()?;
    let bins = p.populations().len();
    let mut rng = noise.rng_for(draw_index);

    let mut populations: Vec<f64> = if noise.atom_number.is_finite() {
        let shots = noise.atom_number.round().max(1.0) as u64;
        // sequential conditional binomials over (bins…, leak)
        let mut probs: Vec<f64> = p.populations().iter().map(|q| q.max(0.0)).collect();
        probs.push(p.leak.max(0.0));
        let total: f64 = probs.iter().sum();
        let mut counts = vec![0u64; bins];
        if total > 0.0 {
            let mut remaining = shots;
            let mut rest = total;
            for (i, q) in probs.iter().take(bins).enumerate() {
                if remaining == 0 || rest <= 0.0 {
                    break;
                }
                let prob = (q / rest).clamp(0.0, 1.0);
                let draw = Binomial::new(remaining, prob)
                    .map_err(|_| SensingError::InvalidNoise("binomial parameters"))?
                    .sample(&mut rng);
                counts[i] = draw;
                remaining -= draw;
                rest -= q;
            }
        }
        counts.iter().map(|&c| c as f64 / shots as f64).collect()
    } else {
        p.populations().to_vec()
    };

    if noise.read_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.read_sigma)
            .map_err(|_| SensingError::InvalidNoise("read_sigma"))?;
        for q in populations.iter_mut() {
            *q = (*q + noise.offset + normal.sample(&mut rng)).max(0.0);
        }
    } else if noise.offset > 0.0 {
        for q in populations.iter_mut() {
            *q += noise.offset;
        }
    }

    let measured_total: f64 = populations.iter().sum();
    let leak = (1.0 - measured_total).max(0.0);
    Ok(MomentumDistribution::from_parts(populations, noise.atom_number, leak)
        .expect("clamped populations are valid"))
}

/// Momentum distribution after running the full protocol from the ground
/// Bloch state with an applied acceleration.
pub fn run_with_signal(
    config: &LatticeConfig,
    protocol: &ShakingProtocol,
    accel: f64,
) -> Result<MomentumDistribution, SensingError> {
    let start = ground_bloch_state(config)?;
    let end = propagate(config, &start, protocol, accel, protocol.total_duration())?;
    Ok(measure_populations(&end, config.measure_n)?)
}

/// Fisher information of the population measurement about the acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    /// Operating acceleration, m/s².
    pub accel: f64,
    /// Forward-difference step, m/s².
    pub delta_a_step: f64,
    pub atom_number: f64,
    /// `F = N_at Σ Aₙ·Bₙ`, 1/(m/s²)².
    pub fisher_information: f64,
    /// Cramér-Rao bound `1/√F`, m/s²; infinite when no bin carries signal.
    pub min_detectable: f64,
    pub populations_at: Vec<f64>,
    pub populations_stepped: Vec<f64>,
}

impl SensitivityResult {
    pub fn is_resolvable(&self) -> bool {
        self.fisher_information > 0.0
    }
}

/// Classical Fisher information from two population vectors measured at `a`
/// and `a + Δa`.
///
/// `Bₙ = ((Pₙ(a+Δa) - Pₙ(a))/Δa)²`, `Aₙ = 1/Pₙ(a)`; bins with `Pₙ(a)` below
/// [`POPULATION_FLOOR`] are excluded. `F = N_at Σ Aₙ Bₙ` and `δa = 1/√F`,
/// flagged infinite when every bin is floored or flat.
pub fn cfi_from_populations(
    at: &MomentumDistribution,
    stepped: &MomentumDistribution,
    accel: f64,
    delta_a: f64,
    atom_number: f64,
) -> Result<SensitivityResult, SensingError> {
    if !(delta_a > 0.0 && delta_a.is_finite()) {
        return Err(SensingError::InvalidStep(delta_a));
    }
    if !(atom_number > 0.0) {
        return Err(SensingError::InvalidAtomNumber(atom_number));
    }
    let p0 = at.populations();
    let p1 = stepped.populations();
    if p0.len() != p1.len() {
        return Err(SensingError::DimensionMismatch { left: p0.len(), right: p1.len() });
    }
    let mut sum = 0.0;
    for (a, b) in p0.iter().zip(p1) {
        if *a < POPULATION_FLOOR {
            continue;
        }
        let derivative = (b - a) / delta_a;
        sum += derivative * derivative / a;
    }
    let fisher = atom_number * sum;
    let min_detectable = if fisher > 0.0 { 1.0 / fisher.sqrt() } else { f64::INFINITY };
    Ok(SensitivityResult {
        accel,
        delta_a_step: delta_a,
        atom_number,
        fisher_information: fisher,
        min_detectable,
        populations_at: p0.to_vec(),
        populations_stepped: p1.to_vec(),
    })
}

/// Fisher information of a protocol at operating acceleration `a`, from two
/// noiseless propagations at `a` and `a + Δa`.
pub fn classical_fisher_information(
    config: &LatticeConfig,
    protocol: &ShakingProtocol,
    accel: f64,
    delta_a: f64,
    atom_number: f64,
) -> Result<SensitivityResult, SensingError> {
    let at = run_with_signal(config, protocol, accel)?;
    let stepped = run_with_signal(config, protocol, accel + delta_a)?;
    cfi_from_populations(&at, &stepped, accel, delta_a, atom_number)
}

/// One row of an acceleration scan; per-row propagation failures are
/// recorded without aborting the rest of the scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub accel: f64,
    pub result: Result<MomentumDistribution, SensingError>,
}

/// Final momentum populations as a function of the applied acceleration,
/// rows in the order given.
pub fn acceleration_scan(
    config: &LatticeConfig,
    protocol: &ShakingProtocol,
    accels: &[f64],
) -> Result<Vec<ScanRow>, SensingError> {
    if accels.is_empty() {
        return Err(SensingError::EmptyScan);
    }
    Ok(accels
        .iter()
        .map(|&accel| ScanRow { accel, result: run_with_signal(config, protocol, accel) })
        .collect())
}

/// Noise-averaged Fisher estimate with jackknife uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCfi {
    pub fisher_information: f64,
    pub fisher_std_error: f64,
    pub min_detectable: f64,
    pub min_detectable_std_error: f64,
    pub repetitions: usize,
}

/// Estimate the Fisher information from repeated noisy images.
///
/// `repetitions` simulated image pairs are drawn at `a` and `a + Δa`; the
/// population vectors and their forward differences are averaged over the
/// repetitions before entering the Fisher sum (as an experiment averages
/// many absorption images per scan point), and leave-one-out jackknife
/// resampling supplies standard errors. `stream_offset` separates the random
/// streams of independent estimates made against one noise model.
pub fn noisy_cfi_estimate(
    at: &MomentumDistribution,
    stepped: &MomentumDistribution,
    delta_a: f64,
    atom_number: f64,
    noise: &NoiseModel,
    repetitions: usize,
    stream_offset: u64,
) -> Result<NoisyCfi, SensingError> {
    if repetitions < 2 {
        return Err(SensingError::InvalidNoise("need at least 2 repetitions"));
    }
    let bins = at.populations().len();
    let mut draws_at: Vec<Vec<f64>> = Vec::with_capacity(repetitions);
    let mut draws_stepped: Vec<Vec<f64>> = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let idx = stream_offset + 2 * rep as u64;
        draws_at.push(noisy_measurement(at, noise, idx)?.populations().to_vec());
        draws_stepped.push(noisy_measurement(stepped, noise, idx + 1)?.populations().to_vec());
    }

    let mut sum_at = vec![0.0; bins];
    let mut sum_stepped = vec![0.0; bins];
    for rep in 0..repetitions {
        for i in 0..bins {
            sum_at[i] += draws_at[rep][i];
            sum_stepped[i] += draws_stepped[rep][i];
        }
    }

    let fisher_of = |mean_at: &[f64], mean_stepped: &[f64]| -> f64 {
        let mut sum = 0.0;
        for (a, b) in mean_at.iter().zip(mean_stepped) {
            if *a < POPULATION_FLOOR {
                continue;
            }
            let derivative = (b - a) / delta_a;
            sum += derivative * derivative / a;
        }
        atom_number * sum
    };

    let inv = 1.0 / repetitions as f64;
    let mean_at: Vec<f64> = sum_at.iter().map(|s| s * inv).collect();
    let mean_stepped: Vec<f64> = sum_stepped.iter().map(|s| s * inv).collect();
    let fisher = fisher_of(&mean_at, &mean_stepped);

    // leave-one-out jackknife
    let loo = 1.0 / (repetitions - 1) as f64;
    let mut jack_f = Vec::with_capacity(repetitions);
    let mut loo_at = vec![0.0; bins];
    let mut loo_stepped = vec![0.0; bins];
    for rep in 0..repetitions {
        for i in 0..bins {
            loo_at[i] = (sum_at[i] - draws_at[rep][i]) * loo;
            loo_stepped[i] = (sum_stepped[i] - draws_stepped[rep][i]) * loo;
        }
        jack_f.push(fisher_of(&loo_at, &loo_stepped));
    }
    let jack_mean = jack_f.iter().sum::<f64>() * inv;
    let jack_var = jack_f
        .iter()
        .map(|f| (f - jack_mean) * (f - jack_mean))
        .sum::<f64>()
        * (repetitions - 1) as f64
        * inv;
    let fisher_std_error = jack_var.sqrt();

    let delta_of = |f: f64| if f > 0.0 { 1.0 / f.sqrt() } else { f64::INFINITY };
    let min_detectable = delta_of(fisher);
    let jack_d: Vec<f64> = jack_f.iter().map(|&f| delta_of(f)).collect();
    let min_detectable_std_error = if jack_d.iter().all(|d| d.is_finite()) {
        let dm = jack_d.iter().sum::<f64>() * inv;
        (jack_d.iter().map(|d| (d - dm) * (d - dm)).sum::<f64>()
            * (repetitions - 1) as f64
            * inv)
            .sqrt()
    } else {
        f64::INFINITY
    };

    Ok(NoisyCfi {
        fisher_information: fisher,
        fisher_std_error,
        min_detectable,
        min_detectable_std_error,
        repetitions,
    })
}

/// Noise settings for sensitivity estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyEstimation {
    pub model: NoiseModel,
    /// Image pairs averaged per table row.
    pub repetitions: usize,
}

impl Default for NoisyEstimation {
    fn default() -> Self {
        Self { model: NoiseModel::default(), repetitions: 100 }
    }
}

/// One row of the sensitivity-versus-interrogation-time table.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub interrogation_time: f64,
    /// Operating acceleration the derivative was taken at (the bias value
    /// for biased protocols, zero otherwise).
    pub operating_accel: f64,
    pub fisher_information: f64,
    pub min_detectable: f64,
    /// Jackknife standard error of `min_detectable`; zero without noise.
    pub std_error: f64,
    pub resolvable: bool,
}

/// Minimum detectable acceleration per protocol.
///
/// Each entry pairs a protocol with its operating acceleration. With a noise
/// model the estimate averages repeated noisy image pairs
/// ([`noisy_cfi_estimate`]); rows whose Fisher information vanishes are
/// flagged unresolvable and carry an infinite `δa`.
pub fn sensitivity_vs_interrogation(
    config: &LatticeConfig,
    protocols: &[(ShakingProtocol, f64)],
    delta_a: f64,
    atom_number: f64,
    noise: Option<&NoisyEstimation>,
) -> Result<Vec<SensitivityRow>, SensingError> {
    let mut rows = Vec::with_capacity(protocols.len());
    for (index, (protocol, operating)) in protocols.iter().enumerate() {
        let at = run_with_signal(config, protocol, *operating)?;
        let stepped = run_with_signal(config, protocol, *operating + delta_a)?;
        let row = match noise {
            None => {
                let r = cfi_from_populations(&at, &stepped, *operating, delta_a, atom_number)?;
                SensitivityRow {
                    interrogation_time: protocol.total_duration(),
                    operating_accel: *operating,
                    fisher_information: r.fisher_information,
                    min_detectable: r.min_detectable,
                    std_error: 0.0,
                    resolvable: r.is_resolvable(),
                }
            }
            Some(est) => {
                let stream = (index as u64) << 32;
                let r = noisy_cfi_estimate(
                    &at,
                    &stepped,
                    delta_a,
                    atom_number,
                    &est.model,
                    est.repetitions,
                    stream,
                )?;
                SensitivityRow {
                    interrogation_time: protocol.total_duration(),
                    operating_accel: *operating,
                    fisher_information: r.fisher_information,
                    min_detectable: r.min_detectable,
                    std_error: r.min_detectable_std_error,
                    resolvable: r.fisher_information > 0.0,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}
