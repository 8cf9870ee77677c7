//! Experiment configuration: one strict TOML document with explicit sections.
//!
//! Every field has a default, so a minimal file (or none at all) runs the
//! reference ⁸⁷Rb setup; unknown keys are rejected outright to prevent silent
//! misconfiguration. The resolved configuration is re-serialized canonically
//! and hashed, and that hash is embedded in every artifact it produces.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use sli_core::lattice::{LatticeConfig, StepScheme};
use sli_core::optimizer::{OptimizerConfig, SlotMode};
use sli_core::sensing::{NoiseModel, NoisyEstimation};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Global RNG seed; per-stage and per-draw streams derive from it.
    pub seed: u64,
    pub output_dir: String,
    pub lattice: LatticeSection,
    pub optimizer: OptimizerSection,
    pub sensing: SensingSection,
    pub fit: FitSection,
    pub export: ExportSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 9,
            output_dir: "out".into(),
            lattice: LatticeSection::default(),
            optimizer: OptimizerSection::default(),
            sensing: SensingSection::default(),
            fit: FitSection::default(),
            export: ExportSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    /// Lattice wavelength, m.
    pub wavelength: f64,
    /// Depth in recoil energies.
    pub depth: f64,
    /// Atom mass, kg.
    pub mass: f64,
    pub n_max: usize,
    /// Propagator step, s.
    pub dt: f64,
    pub measure_n: usize,
    /// "cf4" (fourth-order commutator-free) or "midpoint".
    pub scheme: String,
}

impl Default for LatticeSection {
    fn default() -> Self {
        let reference = LatticeConfig::rb87();
        Self {
            wavelength: reference.wavelength,
            depth: reference.depth,
            mass: reference.mass,
            n_max: reference.n_max,
            dt: reference.dt,
            measure_n: reference.measure_n,
            scheme: "cf4".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub freq_lo: f64,
    pub freq_hi: f64,
    pub n_freq: usize,
    pub max_super_iterations: usize,
    pub max_evals_per_super: usize,
    pub simplex_tol: f64,
    pub spread_tol: f64,
    /// Per-stage convergence threshold, percent.
    pub target_error: f64,
    pub init_amp: f64,
    /// Acceleration applied during every optimization evaluation, m/s².
    pub bias_accel: f64,
    /// "mirrored" (second half reflects the first) or "individual".
    pub slot_mode: String,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let reference = OptimizerConfig::default();
        Self {
            freq_lo: reference.freq_lo,
            freq_hi: reference.freq_hi,
            n_freq: reference.n_freq,
            max_super_iterations: reference.max_super_iterations,
            max_evals_per_super: reference.max_evals_per_super,
            simplex_tol: reference.simplex_tol,
            spread_tol: reference.spread_tol,
            target_error: reference.target_error,
            init_amp: reference.init_amp,
            bias_accel: reference.bias_accel,
            slot_mode: "mirrored".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingSection {
    /// Atom number entering the Fisher information.
    pub atom_number: f64,
    /// Forward-difference step for noiseless sensitivity, m/s².
    pub delta_a: f64,
    /// Quasimomentum spread of the ensemble, ħk_L units.
    pub q_spread: f64,
    pub ensemble_samples: usize,
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_points: usize,
    pub noise_enabled: bool,
    pub noise_atom_number: f64,
    /// Imaging background per bin, population units.
    pub noise_offset: f64,
    /// Read noise per bin per shot, population units.
    pub noise_read_sigma: f64,
    /// Forward-difference step used with the noise model, m/s².
    pub noise_delta_a: f64,
    pub noise_repetitions: usize,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self {
            atom_number: 1e4,
            delta_a: 0.01,
            q_spread: 0.05,
            ensemble_samples: 64,
            scan_min: -0.5,
            scan_max: 0.5,
            scan_points: 21,
            noise_enabled: false,
            noise_atom_number: 1e4,
            noise_offset: 0.002,
            noise_read_sigma: 0.015,
            noise_delta_a: 0.1,
            noise_repetitions: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// "free" or "fixed".
    pub c_mode: String,
    /// Offset value used in "fixed" mode, m/s².
    pub c_value: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { c_mode: "fixed".into(), c_value: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSection {
    /// Waveform sample rate, Hz.
    pub sample_rate: f64,
    /// Largest exportable signal-generator voltage, V.
    pub awg_voltage_limit: f64,
}

impl Default for ExportSection {
    fn default() -> Self {
        Self { sample_rate: 1e6, awg_voltage_limit: 5.0 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => {
                let config = Self::default();
                config.validate()?;
                Ok(config)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice_config()?.validate()?;
        self.optimizer_config(self.seed)?.validate()?;
        if self.sensing.noise_enabled {
            self.noise_estimation().model.validate()?;
        }
        if !(self.sensing.delta_a > 0.0 && self.sensing.atom_number > 0.0) {
            bail!("sensing.delta_a and sensing.atom_number must be positive");
        }
        if self.sensing.scan_points == 0 || self.sensing.scan_min > self.sensing.scan_max {
            bail!("sensing scan grid must be non-empty with scan_min <= scan_max");
        }
        match self.fit.c_mode.as_str() {
            "free" | "fixed" => {}
            other => bail!("fit.c_mode must be \"free\" or \"fixed\", got {other:?}"),
        }
        if !(self.export.sample_rate > 0.0 && self.export.awg_voltage_limit > 0.0) {
            bail!("export.sample_rate and export.awg_voltage_limit must be positive");
        }
        Ok(())
    }

    pub fn lattice_config(&self) -> Result<LatticeConfig> {
        let scheme = match self.lattice.scheme.as_str() {
            "cf4" => StepScheme::CommutatorFree4,
            "midpoint" => StepScheme::Midpoint,
            other => bail!("lattice.scheme must be \"cf4\" or \"midpoint\", got {other:?}"),
        };
        Ok(LatticeConfig {
            wavelength: self.lattice.wavelength,
            depth: self.lattice.depth,
            mass: self.lattice.mass,
            n_max: self.lattice.n_max,
            dt: self.lattice.dt,
            measure_n: self.lattice.measure_n,
            scheme,
        })
    }

    pub fn optimizer_config(&self, seed: u64) -> Result<OptimizerConfig> {
        let slot_mode = match self.optimizer.slot_mode.as_str() {
            "mirrored" => SlotMode::Mirrored,
            "individual" => SlotMode::Individual,
            other => {
                bail!("optimizer.slot_mode must be \"mirrored\" or \"individual\", got {other:?}")
            }
        };
        Ok(OptimizerConfig {
            freq_lo: self.optimizer.freq_lo,
            freq_hi: self.optimizer.freq_hi,
            n_freq: self.optimizer.n_freq,
            max_super_iterations: self.optimizer.max_super_iterations,
            max_evals_per_super: self.optimizer.max_evals_per_super,
            simplex_tol: self.optimizer.simplex_tol,
            spread_tol: self.optimizer.spread_tol,
            target_error: self.optimizer.target_error,
            init_amp: self.optimizer.init_amp,
            seed,
            bias_accel: self.optimizer.bias_accel,
            slot_mode,
        })
    }

    pub fn noise_estimation(&self) -> NoisyEstimation {
        NoisyEstimation {
            model: NoiseModel {
                atom_number: self.sensing.noise_atom_number,
                offset: self.sensing.noise_offset,
                read_sigma: self.sensing.noise_read_sigma,
                seed: self.seed,
            },
            repetitions: self.sensing.noise_repetitions,
        }
    }

    pub fn scan_grid(&self) -> Vec<f64> {
        let n = self.sensing.scan_points;
        if n == 1 {
            return vec![0.5 * (self.sensing.scan_min + self.sensing.scan_max)];
        }
        (0..n)
            .map(|i| {
                self.sensing.scan_min
                    + (self.sensing.scan_max - self.sensing.scan_min) * i as f64
                        / (n - 1) as f64
            })
            .collect()
    }

    /// SHA-256 of the canonical (resolved, defaults included) serialization.
    pub fn content_hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}
