//! Shaken-lattice physics: Hamiltonian, Bloch ground state, propagation.
//!
//! The atom lives in a 1D optical lattice `V(x, t) = V₀E_r cos²(k_L x - φ(t)/2)`
//! whose phase `φ(t)` is the shaking control. In the plane-wave basis
//! `|n⟩ ∝ exp(i(2n + q)k_L x)` (momentum states spaced by `2ħk_L` at
//! quasimomentum `q`) the Hamiltonian is tridiagonal: kinetic terms
//! `E_r(2n + q)²` on the diagonal plus a constant `V₀E_r/2`, and couplings
//! `(V₀E_r/4)·e^{∓iφ}` between neighbors. A uniform acceleration enters as a
//! linear quasimomentum drift `q(t) = q₀ - m·a·t/(ħk_L)`, which keeps the
//! periodic basis exact.

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::constants::{HBAR, LATTICE_WAVELENGTH, PLANCK, RB87_MASS};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::protocol::{ShakingProtocol, WaveformSegment};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("invalid lattice configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("Hermitian diagonalization failed")]
    Diagonalization,
    #[error("input state is not normalized (norm = {0})")]
    NotNormalized(f64),
    #[error("propagation span must be finite and non-negative, got {0}")]
    InvalidSpan(f64),
    #[error("norm drifted by {drift:e} over {steps} steps; refine the time step")]
    NormDrift { drift: f64, steps: usize },
    #[error("measurement truncation {requested} exceeds basis truncation {available}")]
    MeasurementTruncation { requested: usize, available: usize },
}

/// Time-stepping scheme for the propagator.
///
/// Both schemes apply exact matrix exponentials of sampled Hamiltonians, so
/// norm is preserved to machine precision regardless of step size; the choice
/// sets how fast populations converge as `dt` shrinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepScheme {
    /// One exponential per step with `φ` and `q` sampled at the midpoint
    /// (second order in `dt`).
    Midpoint,
    /// Fourth-order commutator-free scheme: two exponentials per step built
    /// from Gauss-Legendre samples of the Hamiltonian.
    #[default]
    CommutatorFree4,
}

/// Physical and numerical parameters of the simulation arena.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    /// Lattice laser wavelength λ_L, m.
    pub wavelength: f64,
    /// Lattice depth V₀ in recoil energies.
    pub depth: f64,
    /// Atom mass, kg.
    pub mass: f64,
    /// Basis truncation: momentum states n = -n_max..=n_max evolve.
    pub n_max: usize,
    /// Propagator step, s.
    pub dt: f64,
    /// Measurement truncation N: populations are reported for |n| ≤ N.
    pub measure_n: usize,
    pub scheme: StepScheme,
}

impl LatticeConfig {
    /// ⁸⁷Rb in the 852 nm lattice at depth 14 E_r.
    ///
    /// `n_max = 8` keeps leaked probability far below the population errors
    /// of interest while the measurement stays truncated at N = 2.
    pub fn rb87() -> Self {
        Self {
            wavelength: LATTICE_WAVELENGTH,
            depth: 14.0,
            mass: RB87_MASS,
            n_max: 8,
            dt: 1e-7,
            measure_n: 2,
            scheme: StepScheme::default(),
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(LatticeError::InvalidConfig("wavelength must be positive"));
        }
        if !(self.depth.is_finite() && self.depth >= 0.0) {
            return Err(LatticeError::InvalidConfig("depth must be non-negative"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(LatticeError::InvalidConfig("mass must be positive"));
        }
        if self.measure_n < 1 || self.n_max < self.measure_n {
            return Err(LatticeError::InvalidConfig("need n_max >= measure_n >= 1"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(LatticeError::InvalidConfig("dt must be positive"));
        }
        Ok(())
    }

    /// Lattice wavenumber `k_L = 2π/λ_L`, 1/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Recoil energy `E_r = ħ²k_L²/2m`, J.
    pub fn recoil_energy(&self) -> f64 {
        let k = self.wavenumber();
        HBAR * HBAR * k * k / (2.0 * self.mass)
    }

    /// Recoil energy as a frequency, `E_r/h` in Hz.
    pub fn recoil_frequency(&self) -> f64 {
        self.recoil_energy() / PLANCK
    }

    /// Harmonic estimate of the band 0 → 1 transition, `2√(V₀/E_r)·E_r/h` Hz.
    pub fn harmonic_band_frequency(&self) -> f64 {
        2.0 * self.depth.sqrt() * self.recoil_frequency()
    }

    /// Number of retained momentum states, `2 n_max + 1`.
    pub fn basis_dim(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Quasimomentum drift rate under acceleration `a`, in ħk_L per second:
    /// `dq/dt = -m a / (ħ k_L)`.
    pub fn quasimomentum_rate(&self, accel: f64) -> f64 {
        -self.mass * accel / (HBAR * self.wavenumber())
    }
}

/// Wavefunction over the retained momentum states at one quasimomentum.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    /// Index 0 holds n = -n_max.
    amplitudes: Vec<Complex64>,
    /// Quasimomentum in units of ħk_L.
    pub quasimomentum: f64,
    /// Elapsed time, s.
    pub time: f64,
}

impl QuantumState {
    pub fn from_amplitudes(
        amplitudes: Vec<Complex64>,
        quasimomentum: f64,
        time: f64,
    ) -> Result<Self, LatticeError> {
        if amplitudes.is_empty() || amplitudes.len() % 2 == 0 {
            return Err(LatticeError::InvalidConfig("amplitude vector length must be odd"));
        }
        let state = Self { amplitudes, quasimomentum, time };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(LatticeError::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn n_max(&self) -> usize {
        (self.amplitudes.len() - 1) / 2
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Amplitude of the `2nħk_L` momentum state.
    pub fn amplitude(&self, n: i32) -> Complex64 {
        let idx = n + self.n_max() as i32;
        self.amplitudes[idx as usize]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Population `|c_n|²`.
    pub fn population(&self, n: i32) -> f64 {
        self.amplitude(n).norm_sqr()
    }
}

/// Truncated population vector: the measurement outcome.
///
/// Populations are reported without renormalization; `leak` carries the
/// probability outside the measured window so `Σ Pₙ + leak = 1` for a direct
/// measurement. Synthetic noisy images may carry background offsets on top.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    /// Index 0 holds n = -N.
    populations: Vec<f64>,
    /// Total atom number behind this measurement (may be infinite for the
    /// analytic, noise-free limit).
    pub atom_number: f64,
    /// Probability outside |n| ≤ N, a truncation diagnostic.
    pub leak: f64,
}

impl MomentumDistribution {
    pub fn from_parts(
        populations: Vec<f64>,
        atom_number: f64,
        leak: f64,
    ) -> Result<Self, LatticeError> {
        if populations.is_empty() || populations.len() % 2 == 0 {
            return Err(LatticeError::InvalidConfig("population vector length must be odd"));
        }
        if populations.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(LatticeError::InvalidConfig("populations must be finite and >= 0"));
        }
        if atom_number < 0.0 || leak < -1e-12 {
            return Err(LatticeError::InvalidConfig("atom number and leak must be >= 0"));
        }
        Ok(Self { populations, atom_number, leak: leak.max(0.0) })
    }

    pub fn measure_n(&self) -> usize {
        (self.populations.len() - 1) / 2
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// Population of the `2nħk_L` momentum class.
    pub fn population(&self, n: i32) -> f64 {
        let idx = n + self.measure_n() as i32;
        self.populations[idx as usize]
    }

    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    pub fn with_atom_number(mut self, atom_number: f64) -> Self {
        self.atom_number = atom_number;
        self
    }
}

/// Dense Hamiltonian at phase `φ` and quasimomentum `q` (units of ħk_L), in
/// joules.
///
/// Convention: advancing the EOM phase by `φ` shifts the lattice by
/// `φ/(2k_L)`, which puts `(V₀E_r/4)e^{-iφ}` on the lower diagonal
/// `⟨n+1|V|n⟩` and its conjugate above.
pub fn build_hamiltonian(config: &LatticeConfig, phi: f64, q: f64) -> CMatrix {
    let dim = config.basis_dim();
    let e_r = config.recoil_energy();
    let coupling = 0.25 * config.depth * e_r;
    let offset = 0.5 * config.depth * e_r;
    let mut h = CMatrix::zeros(dim);
    for i in 0..dim {
        let n = i as f64 - config.n_max as f64;
        let k_ratio = 2.0 * n + q;
        h.set(i, i, Complex64::new(e_r * k_ratio * k_ratio + offset, 0.0));
    }
    let lower = coupling * Complex64::cis(-phi);
    for i in 0..dim - 1 {
        h.set(i + 1, i, lower);
        h.set(i, i + 1, lower.conj());
    }
    h
}

/// Lowest-band Bloch state at quasimomentum `q`, with the global phase fixed
/// so the n = 0 amplitude is real and positive.
pub fn ground_bloch_state_at(config: &LatticeConfig, q: f64) -> Result<QuantumState, LatticeError> {
    config.validate()?;
    let h = build_hamiltonian(config, 0.0, q);
    let eig = hermitian_eigen(&h).ok_or(LatticeError::Diagonalization)?;
    let mut amps = eig.vectors[0].clone();
    let center = amps[config.n_max];
    if center.norm() > 1e-300 {
        let fix = center.conj() / center.norm();
        amps.iter_mut().for_each(|c| *c *= fix);
    }
    let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|c| *c /= norm);
    QuantumState::from_amplitudes(amps, q, 0.0)
}

/// Ground Bloch state at zero quasimomentum and zero phase.
pub fn ground_bloch_state(config: &LatticeConfig) -> Result<QuantumState, LatticeError> {
    ground_bloch_state_at(config, 0.0)
}

/// Band 0 → 1 transition frequency at q = 0, Hz.
pub fn band_gap_frequency(config: &LatticeConfig) -> Result<f64, LatticeError> {
    config.validate()?;
    let h = build_hamiltonian(config, 0.0, 0.0);
    let eig = hermitian_eigen(&h).ok_or(LatticeError::Diagonalization)?;
    Ok((eig.values[1] - eig.values[0]) / PLANCK)
}

/// Apply `exp(-i·h·(diag, w))` to `psi` by a shifted Taylor series, splitting
/// the step whenever the spectral radius would slow convergence. Exact to
/// machine precision, hence norm-preserving.
fn expm_apply(
    diag: &[f64],
    w: Complex64,
    h: f64,
    psi: &mut [Complex64],
    term: &mut [Complex64],
    next: &mut [Complex64],
) {
    let (mut term, mut next) = (term, next);
    let dim = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in diag {
        lo = lo.min(*d);
        hi = hi.max(*d);
    }
    let shift = 0.5 * (lo + hi);
    let radius = (0.5 * (hi - lo) + 2.0 * w.norm()) * h.abs();
    let splits = (radius / 0.5).ceil().max(1.0);
    let h_sub = h / splits;
    let w_conj = w.conj();
    for _ in 0..splits as usize {
        term.copy_from_slice(psi);
        let mut k = 1.0;
        loop {
            for i in 0..dim {
                let mut acc = Complex64::new(diag[i] - shift, 0.0) * term[i];
                if i + 1 < dim {
                    acc += w_conj * term[i + 1];
                }
                if i > 0 {
                    acc += w * term[i - 1];
                }
                next[i] = Complex64::new(0.0, -h_sub / k) * acc;
            }
            let mut term_norm_sq = 0.0;
            for i in 0..dim {
                psi[i] += next[i];
                term_norm_sq += next[i].norm_sqr();
            }
            core::mem::swap(&mut term, &mut next);
            if term_norm_sq < 1e-36 || k > 120.0 {
                break;
            }
            k += 1.0;
        }
        let rot = Complex64::cis(-shift * h_sub);
        psi.iter_mut().for_each(|c| *c *= rot);
    }
}

/// Evolve `state` for `t_span` under a shaking phase `phase(t)` (a function of
/// absolute time) and a uniform acceleration.
///
/// Steps never exceed `config.dt`; each step applies exact exponentials of
/// sampled Hamiltonians per `config.scheme`, so the norm is conserved. A
/// final-norm drift above 1e-7 is reported as an error.
pub fn propagate_with_phase<F: Fn(f64) -> f64>(
    config: &LatticeConfig,
    state: &QuantumState,
    phase: F,
    accel: f64,
    t_span: f64,
) -> Result<QuantumState, LatticeError> {
    config.validate()?;
    if !t_span.is_finite() || t_span < 0.0 {
        return Err(LatticeError::InvalidSpan(t_span));
    }
    let norm0 = state.norm();
    if (norm0 - 1.0).abs() > 1e-6 {
        return Err(LatticeError::NotNormalized(norm0));
    }
    if state.n_max() != config.n_max {
        return Err(LatticeError::InvalidConfig("state truncation differs from config"));
    }
    if t_span == 0.0 {
        return Ok(state.clone());
    }

    let dim = config.basis_dim();
    let omega_r = config.recoil_energy() / HBAR;
    let coupling_mag = 0.25 * config.depth * omega_r;
    let diag_offset = 0.5 * config.depth * omega_r;
    let n_max = config.n_max as f64;
    let q_rate = config.quasimomentum_rate(accel);
    let q0 = state.quasimomentum;
    let t0 = state.time;

    let fill_diag = |diag: &mut [f64], t_rel: f64| {
        let q = q0 + q_rate * t_rel;
        for (i, d) in diag.iter_mut().enumerate() {
            let k_ratio = 2.0 * (i as f64 - n_max) + q;
            *d = omega_r * k_ratio * k_ratio + diag_offset;
        }
    };
    let coupling_at = |t_rel: f64| coupling_mag * Complex64::cis(-(phase)(t0 + t_rel));

    let n_steps = (t_span / config.dt).ceil().max(1.0) as usize;
    let h = t_span / n_steps as f64;

    let mut psi: Vec<Complex64> = state.amplitudes().to_vec();
    let mut term = vec![Complex64::ZERO; dim];
    let mut next = vec![Complex64::ZERO; dim];
    let mut diag_a = vec![0.0; dim];
    let mut diag_b = vec![0.0; dim];
    let mut diag_mix = vec![0.0; dim];

    // Gauss-Legendre nodes and the commutator-free weights.
    const GAUSS_HALF: f64 = 0.288_675_134_594_812_9; // √3/6
    const CF_ALPHA: f64 = (3.0 - 3.464_101_615_137_754_6) / 12.0; // (3-2√3)/12
    const CF_BETA: f64 = (3.0 + 3.464_101_615_137_754_6) / 12.0; // (3+2√3)/12

    for step in 0..n_steps {
        let t_start = step as f64 * h;
        match config.scheme {
            StepScheme::Midpoint => {
                let t_mid = t_start + 0.5 * h;
                fill_diag(&mut diag_a, t_mid);
                let w = coupling_at(t_mid);
                expm_apply(&diag_a, w, h, &mut psi, &mut term, &mut next);
            }
            StepScheme::CommutatorFree4 => {
                let t1 = t_start + (0.5 - GAUSS_HALF) * h;
                let t2 = t_start + (0.5 + GAUSS_HALF) * h;
                fill_diag(&mut diag_a, t1);
                fill_diag(&mut diag_b, t2);
                let w1 = coupling_at(t1);
                let w2 = coupling_at(t2);
                // exp(-ih(β H₁ + α H₂)) acts first, then exp(-ih(α H₁ + β H₂)).
                for i in 0..dim {
                    diag_mix[i] = CF_BETA * diag_a[i] + CF_ALPHA * diag_b[i];
                }
                let w_first = CF_BETA * w1 + CF_ALPHA * w2;
                expm_apply(&diag_mix, w_first, h, &mut psi, &mut term, &mut next);
                for i in 0..dim {
                    diag_mix[i] = CF_ALPHA * diag_a[i] + CF_BETA * diag_b[i];
                }
                let w_second = CF_ALPHA * w1 + CF_BETA * w2;
                expm_apply(&diag_mix, w_second, h, &mut psi, &mut term, &mut next);
            }
        }
    }

    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let drift = (norm - norm0).abs();
    if drift > 1e-7 {
        return Err(LatticeError::NormDrift { drift, steps: n_steps });
    }
    Ok(QuantumState {
        amplitudes: psi,
        quasimomentum: q0 + q_rate * t_span,
        time: t0 + t_span,
    })
}

/// Evolve `state` for `t_span` under a stitched protocol whose phase is a
/// function of absolute time; shaking is off outside the protocol window.
pub fn propagate(
    config: &LatticeConfig,
    state: &QuantumState,
    protocol: &ShakingProtocol,
    accel: f64,
    t_span: f64,
) -> Result<QuantumState, LatticeError> {
    propagate_with_phase(config, state, |t| protocol.phase_at(t), accel, t_span)
}

/// Evolve through one waveform segment that begins at the state's current
/// time, covering exactly its duration.
pub fn propagate_segment(
    config: &LatticeConfig,
    state: &QuantumState,
    segment: &WaveformSegment,
    accel: f64,
) -> Result<QuantumState, LatticeError> {
    let start = state.time;
    propagate_with_phase(
        config,
        state,
        |t| segment.phase_unchecked(t - start),
        accel,
        segment.duration(),
    )
}

/// Measure truncated momentum populations: `Pₙ = |cₙ|²` for `|n| ≤ N`,
/// unrenormalized, with the out-of-window probability returned in `leak`.
pub fn measure_populations(
    state: &QuantumState,
    measure_n: usize,
) -> Result<MomentumDistribution, LatticeError> {
    let n_max = state.n_max();
    if measure_n > n_max {
        return Err(LatticeError::MeasurementTruncation {
            requested: measure_n,
            available: n_max,
        });
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(LatticeError::NotNormalized(norm));
    }
    let span = measure_n as i32;
    let populations: Vec<f64> = (-span..=span).map(|n| state.population(n)).collect();
    let mut leak = 0.0;
    for n in -(n_max as i32)..=(n_max as i32) {
        if n.unsigned_abs() as usize > measure_n {
            leak += state.population(n);
        }
    }
    MomentumDistribution::from_parts(populations, 1.0, leak)
}

/// Populations averaged over a thermal quasimomentum spread.
///
/// Initial quasimomenta are drawn from a Gaussian of standard deviation
/// `q_spread` (units of ħk_L) with a ChaCha stream seeded by `seed`; each
/// sample starts from its own ground Bloch state, propagates independently
/// through the whole protocol, and the population vectors are averaged.
pub fn ensemble_populations(
    config: &LatticeConfig,
    protocol: &ShakingProtocol,
    accel: f64,
    q_spread: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MomentumDistribution, LatticeError> {
    config.validate()?;
    if !(q_spread.is_finite() && q_spread >= 0.0) {
        return Err(LatticeError::InvalidConfig("q_spread must be >= 0"));
    }
    let span = protocol.total_duration();
    let single = |q: f64| -> Result<MomentumDistribution, LatticeError> {
        let start = ground_bloch_state_at(config, q)?;
        let end = propagate(config, &start, protocol, accel, span)?;
        measure_populations(&end, config.measure_n)
    };
    if q_spread == 0.0 || n_samples <= 1 {
        return single(0.0);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, q_spread)
        .map_err(|_| LatticeError::InvalidConfig("q_spread must be finite"))?;
    let dim = 2 * config.measure_n + 1;
    let mut mean = vec![0.0; dim];
    let mut mean_leak = 0.0;
    for _ in 0..n_samples {
        let q = normal.sample(&mut rng);
        let dist = single(q)?;
        for (m, p) in mean.iter_mut().zip(dist.populations()) {
            *m += p;
        }
        mean_leak += dist.leak;
    }
    let inv = 1.0 / n_samples as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    MomentumDistribution::from_parts(mean, 1.0, mean_leak * inv)
}
