//! Physical constants (SI, CODATA 2018).

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054571817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.66053906660e-27;
/// Electron rest mass, kg.
pub const ELECTRON_MASS: f64 = 9.1093837015e-31;
/// Standard gravitational acceleration at the Earth's surface, m/s^2.
pub const G_EARTH: f64 = 9.81;
