//! Core domain types: frequency grids, sampled frequency responses,
//! pole-residue models, and modal parameters.
//!
//! Conventions used throughout the crate:
//!
//! * grids are stored in Hz; evaluation happens at the Laplace points
//!   `s = i·2πf` (receptance / impedance spectra sampled on the imaginary
//!   axis),
//! * poles and residues are in rad/s,
//! * a "stable" pole has a strictly negative real part,
//! * complex poles always appear together with their conjugates, and the
//!   positive-imaginary member of a pair is the representative.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a pole set is closed under
/// conjugation. Pairs produced by a real eigensolver are exact; the tolerance
/// only absorbs rounding introduced by serialization round-trips.
const CONJUGATE_TOL: f64 = 1e-9;

/// Strictly increasing grid of positive, finite frequencies in Hz.
///
/// The two-point minimum is what every consumer in this crate needs: a
/// single-point "grid" has no bandwidth, so initial-pole placement, windowing
/// and band restriction would all degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    freqs: Vec<f64>,
}

impl FrequencyGrid {
    /// Validates and wraps a list of frequencies in Hz.
    pub fn new(frequencies_hz: Vec<f64>) -> Result<Self> {
        if frequencies_hz.len() < 2 {
            return Err(Error::Data(format!(
                "frequency grid needs at least 2 points, got {}",
                frequencies_hz.len()
            )));
        }
        for (i, &f) in frequencies_hz.iter().enumerate() {
            if !f.is_finite() {
                return Err(Error::Data(format!("non-finite frequency at index {i}")));
            }
            if f <= 0.0 {
                return Err(Error::Data(format!(
                    "frequencies must be positive: {f} at index {i}"
                )));
            }
            if i > 0 && f <= frequencies_hz[i - 1] {
                return Err(Error::Data(format!(
                    "frequencies must be strictly increasing: {f} at index {i} \
                     does not exceed {}",
                    frequencies_hz[i - 1]
                )));
            }
        }
        Ok(Self {
            freqs: frequencies_hz,
        })
    }

    /// Uniform grid of `n` points spanning `[f_lo, f_hi]` inclusive.
    pub fn linspace(f_lo: f64, f_hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!(
                "linspace needs at least 2 points, got {n}"
            )));
        }
        if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo <= 0.0 || f_hi <= f_lo {
            return Err(Error::Config(format!(
                "invalid frequency span [{f_lo}, {f_hi}]"
            )));
        }
        let step = (f_hi - f_lo) / (n - 1) as f64;
        let mut freqs: Vec<f64> = (0..n).map(|i| f_lo + step * i as f64).collect();
        // Pin the endpoint exactly; accumulated rounding must not leak into
        // band checks.
        freqs[n - 1] = f_hi;
        Self::new(freqs)
    }

    /// Grid frequencies in Hz.
    pub fn frequencies_hz(&self) -> &[f64] {
        &self.freqs
    }

    /// Number of grid points (always >= 2).
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    /// Always false; present to satisfy the usual container conventions.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lowest grid frequency in Hz.
    pub fn f_min(&self) -> f64 {
        self.freqs[0]
    }

    /// Highest grid frequency in Hz.
    pub fn f_max(&self) -> f64 {
        *self.freqs.last().expect("grid has at least 2 points")
    }

    /// Laplace evaluation points `s = i·2πf` in rad/s.
    pub fn laplace_points(&self) -> Vec<Complex64> {
        self.freqs
            .iter()
            .map(|&f| Complex64::new(0.0, 2.0 * std::f64::consts::PI * f))
            .collect()
    }
}

/// A complex-valued response sampled on a [`FrequencyGrid`].
///
/// Values are unit-agnostic: the same type carries receptance, electrical
/// impedance, and fitted-model evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl FrequencyResponse {
    /// Pairs a grid with sampled values; lengths must match and every value
    /// must be finite.
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Data(format!(
                "grid has {} points but {} values were supplied",
                grid.len(),
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite response value at index {i} ({} Hz)",
                    grid.frequencies_hz()[i]
                )));
            }
        }
        Ok(Self { grid, values })
    }

    /// The underlying grid.
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Sampled complex values, one per grid point.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false (grids have at least two points).
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Root-mean-square magnitude of the sampled values. Used for relative
    /// error reporting.
    pub fn rms(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum / self.values.len() as f64).sqrt()
    }

    /// Restricts the response to `[f_lo, f_hi]` (inclusive). Errors if fewer
    /// than two grid points survive.
    pub fn restrict_band(&self, f_lo: f64, f_hi: f64) -> Result<Self> {
        if !(f_lo.is_finite() && f_hi.is_finite()) || f_hi <= f_lo {
            return Err(Error::Config(format!("invalid band [{f_lo}, {f_hi}]")));
        }
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        for (i, &f) in self.grid.frequencies_hz().iter().enumerate() {
            if f >= f_lo && f <= f_hi {
                freqs.push(f);
                values.push(self.values[i]);
            }
        }
        if freqs.len() < 2 {
            return Err(Error::Data(format!(
                "band [{f_lo}, {f_hi}] Hz keeps {} of {} grid points; at least 2 are needed",
                freqs.len(),
                self.grid.len()
            )));
        }
        Ok(Self {
            grid: FrequencyGrid::new(freqs)?,
            values,
        })
    }
}

/// Pole-residue transfer-function model
/// `H(s) = Σₙ cₙ/(s − aₙ) + d + s·h`.
///
/// Poles and residues are in rad/s, are pairwise matched by index, and are
/// closed under conjugation (a real pole carries a real residue; a complex
/// pole appears with its conjugate carrying the conjugate residue). All poles
/// are strictly stable. `includes_d` / `includes_h` record whether the
/// constant and linear terms were part of the fit; the excluded term is zero.
///
/// An empty pole set is allowed: the model then degenerates to `d + s·h`,
/// which is still a useful object (constant offsets, pure capacitive lines).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalModel {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    pub d: f64,
    pub h: f64,
    pub includes_d: bool,
    pub includes_h: bool,
}

impl RationalModel {
    /// Builds and validates a model.
    pub fn new(
        poles: Vec<Complex64>,
        residues: Vec<Complex64>,
        d: f64,
        h: f64,
        includes_d: bool,
        includes_h: bool,
    ) -> Result<Self> {
        let model = Self {
            poles,
            residues,
            d,
            h,
            includes_d,
            includes_h,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every structural invariant. Useful after deserialization or
    /// direct field construction.
    pub fn validate(&self) -> Result<()> {
        if self.poles.len() != self.residues.len() {
            return Err(Error::Data(format!(
                "{} poles but {} residues",
                self.poles.len(),
                self.residues.len()
            )));
        }
        if !self.d.is_finite() || !self.h.is_finite() {
            return Err(Error::Data("non-finite d or h term".into()));
        }
        if !self.includes_d && self.d != 0.0 {
            return Err(Error::Data("d term excluded but non-zero".into()));
        }
        if !self.includes_h && self.h != 0.0 {
            return Err(Error::Data("h term excluded but non-zero".into()));
        }
        for (p, r) in self.poles.iter().zip(&self.residues) {
            if !(p.re.is_finite() && p.im.is_finite() && r.re.is_finite() && r.im.is_finite()) {
                return Err(Error::Data("non-finite pole or residue".into()));
            }
            if p.re >= 0.0 {
                return Err(Error::UnstablePole { re: p.re, im: p.im });
            }
        }
        check_conjugate_closure(&self.poles, Some(&self.residues))?;
        Ok(())
    }

    /// Model order (number of poles).
    pub fn order(&self) -> usize {
        self.poles.len()
    }

    /// Evaluates the model on a grid; see [`evaluate_model`].
    pub fn evaluate(&self, grid: &FrequencyGrid) -> Result<FrequencyResponse> {
        evaluate_model(self, grid)
    }
}

/// Verifies that a pole set (and optionally the matching residues) is closed
/// under conjugation. Real poles must carry real residues.
pub(crate) fn check_conjugate_closure(
    poles: &[Complex64],
    residues: Option<&[Complex64]>,
) -> Result<()> {
    let scale = |p: &Complex64| p.norm().max(1.0);
    let mut claimed = vec![false; poles.len()];
    for i in 0..poles.len() {
        let p = poles[i];
        if p.im == 0.0 {
            if let Some(res) = residues {
                if res[i].im != 0.0 {
                    return Err(Error::Data(format!(
                        "real pole {} carries a complex residue {}",
                        p, res[i]
                    )));
                }
            }
            continue;
        }
        if claimed[i] {
            continue;
        }
        let mut partner = None;
        for (j, q) in poles.iter().enumerate() {
            if j == i || claimed[j] || q.im == 0.0 {
                continue;
            }
            if (q - p.conj()).norm() <= CONJUGATE_TOL * scale(&p) {
                if let Some(res) = residues {
                    if (res[j] - res[i].conj()).norm() > CONJUGATE_TOL * scale(&res[i]).max(1.0) {
                        continue;
                    }
                }
                partner = Some(j);
                break;
            }
        }
        match partner {
            Some(j) => {
                claimed[i] = true;
                claimed[j] = true;
            }
            None => {
                return Err(Error::Data(format!(
                    "pole {p} has no conjugate partner: the set is not closed under conjugation"
                )));
            }
        }
    }
    Ok(())
}

/// Evaluates `H(s) = Σ cₙ/(s − aₙ) + d + s·h` at every grid point
/// `s = i·2πf`.
///
/// Errors if an evaluation point coincides with a pole (which cannot happen
/// for a stable model on the imaginary axis, but the guard keeps the function
/// total) or if the result overflows.
pub fn evaluate_model(model: &RationalModel, grid: &FrequencyGrid) -> Result<FrequencyResponse> {
    model.validate()?;
    let mut values = Vec::with_capacity(grid.len());
    for s in grid.laplace_points() {
        let mut acc = Complex64::new(model.d, 0.0) + s * model.h;
        for (p, r) in model.poles.iter().zip(&model.residues) {
            let den = s - p;
            if den.norm() == 0.0 {
                return Err(Error::Numeric(format!(
                    "evaluation point {s} coincides with pole {p}"
                )));
            }
            acc += r / den;
        }
        if !acc.re.is_finite() || !acc.im.is_finite() {
            return Err(Error::Numeric(format!(
                "model evaluation overflowed at s = {s}"
            )));
        }
        values.push(acc);
    }
    FrequencyResponse::new(grid.clone(), values)
}

/// One underdamped mode: natural frequency, viscous damping ratio, and the
/// positive-imaginary pole it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Natural frequency in Hz (`|λ| / 2π`).
    pub frequency_hz: f64,
    /// Viscous damping ratio (`−Re λ / |λ|`), in `[0, 1)`.
    pub damping_ratio: f64,
    /// The pole itself in rad/s, positive-imaginary representative.
    pub pole: Complex64,
}

/// Modal parameters extracted from a stable pole set: one entry per
/// conjugate pair, plus the real poles reported separately as overdamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalParameters {
    /// Underdamped modes, sorted by ascending natural frequency.
    pub modes: Vec<Mode>,
    /// Real (overdamped) poles in rad/s. They carry no oscillation frequency
    /// and are excluded from `modes`.
    pub overdamped: Vec<f64>,
}

impl ModalParameters {
    /// Builds a modal set directly from `(frequency_hz, damping_ratio)`
    /// pairs, synthesizing the corresponding poles
    /// `λ = −ζ·ω₀ + i·ω₀·√(1−ζ²)` with `ω₀ = 2πf`.
    ///
    /// Convenient when the modal data comes from a table rather than a fit.
    pub fn from_freq_damping(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut modes = Vec::with_capacity(pairs.len());
        for &(f, z) in pairs {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Data(format!("mode frequency must be positive: {f}")));
            }
            if !(z.is_finite() && z > 0.0 && z < 1.0) {
                return Err(Error::Data(format!(
                    "damping ratio must lie in (0, 1) for an underdamped mode: {z}"
                )));
            }
            let w0 = 2.0 * std::f64::consts::PI * f;
            let pole = Complex64::new(-z * w0, w0 * (1.0 - z * z).sqrt());
            modes.push(Mode {
                frequency_hz: f,
                damping_ratio: z,
                pole,
            });
        }
        modes.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
        Ok(Self {
            modes,
            overdamped: Vec::new(),
        })
    }
}

/// Converts a stable, conjugate-closed pole set into modal parameters.
///
/// Each conjugate pair `λ = α ± iβ` contributes one mode with
/// `f = |λ|/2π` and `ζ = −α/|λ|`; real poles are collected into the
/// `overdamped` list. Errors on any pole with `Re ≥ 0`.
pub fn poles_to_modal(poles: &[Complex64]) -> Result<ModalParameters> {
    for p in poles {
        if !(p.re.is_finite() && p.im.is_finite()) {
            return Err(Error::Data(format!("non-finite pole {p}")));
        }
        if p.re >= 0.0 {
            return Err(Error::UnstablePole { re: p.re, im: p.im });
        }
    }
    check_conjugate_closure(poles, None)?;
    let mut modes = Vec::new();
    let mut overdamped = Vec::new();
    for p in poles {
        if p.im == 0.0 {
            overdamped.push(p.re);
        } else if p.im > 0.0 {
            let mag = p.norm();
            modes.push(Mode {
                frequency_hz: mag / (2.0 * std::f64::consts::PI),
                damping_ratio: -p.re / mag,
                pole: *p,
            });
        }
        // negative-imaginary members are represented by their conjugates
    }
    modes.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
    overdamped.sort_by(f64::total_cmp);
    Ok(ModalParameters { modes, overdamped })
}
