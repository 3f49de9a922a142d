//! Default tolerances. Config files may override the ones marked as such.

/// Identities that should hold to rounding (Parseval, path agreement).
pub const EXACT: f64 = 1e-10;
/// Round trips through a single FFT or eigendecomposition.
pub const ROUNDTRIP: f64 = 1e-12;
/// Partition of unity and symbol reconstruction.
pub const PARTITION: f64 = 1e-8;
/// Eigenvalues of a PSD input below `-EIG_CLIP * ||a||` are rejected.
pub const EIG_CLIP: f64 = 1e-10;
/// Scaled slack allowed in operator-inequality fuzzing.
pub const FUZZ_SLACK: f64 = 1e-9;
/// Interpolation-constant accuracy.
pub const INTERP: f64 = 1e-6;
/// Grid interpolation tolerance for kernel comparisons.
pub const GRID_INTERP: f64 = 1e-3;
/// Terms of lacunary sums below this are dropped.
pub const SERIES_TERM: f64 = 1e-14;
/// Certified tail budget for lacunary sums.
pub const SERIES_TAIL: f64 = 1e-12;
