//! Physical constants (CODATA 2018) and apparatus defaults.

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Atomic mass unit, kg.
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Mass of ⁸⁷Rb, kg (86.909 180 u).
pub const RB87_MASS: f64 = 86.909_180_531 * ATOMIC_MASS;

/// Lattice laser wavelength, m. The lattice light is locked near the cesium
/// D2 line at 852 nm.
pub const LATTICE_WAVELENGTH: f64 = 852e-9;

/// EOM phase response to the waveform-generator output, rad/V.
pub const EOM_RAD_PER_VOLT: f64 = 0.746;

/// Voltage amplifier gain between the waveform generator and the EOM.
pub const AMPLIFIER_GAIN: f64 = 40.0;
