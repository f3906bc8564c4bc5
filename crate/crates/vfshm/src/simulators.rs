//! Reference simulators used to exercise and validate the fitting pipeline:
//!
//! * a grounded spring–mass–damper chain with analytical poles, receptance
//!   evaluation, and local stiffness/damping edits (damage injection),
//! * a coupled electromechanical impedance model of a piezoelectric wafer
//!   bonded to a host structure (Liang-style single-DOF coupling),
//! * a deterministic complex-noise generator for robustness studies.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{FrequencyGrid, FrequencyResponse};

/// A chain of point masses grounded at both ends.
///
/// With `n` masses there are `n + 1` spring elements and `n + 1` viscous
/// dampers; element `j` connects mass `j-1` to mass `j`, with elements `0`
/// and `n` tied to ground. Stiffness and damping matrices share the chain
/// topology, so uniform `c/k` gives proportional damping.
#[derive(Debug, Clone, PartialEq)]
pub struct MdofSystem {
    masses: Vec<f64>,
    stiffnesses: Vec<f64>,
    dampings: Vec<f64>,
    force_dof: usize,
    response_dof: usize,
}

/// One local modification: element `element` has its stiffness and damping
/// multiplied by the given factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementEdit {
    /// Element index in `0..=n` (ends are the ground connections).
    pub element: usize,
    /// Multiplier applied to the element stiffness (must be positive).
    pub stiffness_factor: f64,
    /// Multiplier applied to the element damping coefficient (must be positive).
    pub damping_factor: f64,
}

impl MdofSystem {
    /// Builds a chain from per-mass and per-element values.
    ///
    /// Requirements: at least one mass, all masses and stiffnesses strictly
    /// positive, dampings non-negative, `stiffnesses.len() == masses.len() + 1`
    /// (same for dampings), and the drive/response indices in range.
    pub fn new(
        masses: Vec<f64>,
        stiffnesses: Vec<f64>,
        dampings: Vec<f64>,
        force_dof: usize,
        response_dof: usize,
    ) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::Config("chain needs at least one mass".into()));
        }
        if stiffnesses.len() != n + 1 || dampings.len() != n + 1 {
            return Err(Error::Config(format!(
                "a grounded chain of {n} masses has {} elements; got {} stiffnesses \
                 and {} dampings",
                n + 1,
                stiffnesses.len(),
                dampings.len()
            )));
        }
        if masses.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(Error::Config("masses must be positive and finite".into()));
        }
        if stiffnesses.iter().any(|&k| !(k.is_finite() && k > 0.0)) {
            return Err(Error::Config(
                "element stiffnesses must be positive and finite".into(),
            ));
        }
        if dampings.iter().any(|&c| !(c.is_finite() && c >= 0.0)) {
            return Err(Error::Config(
                "element dampings must be non-negative and finite".into(),
            ));
        }
        if force_dof >= n || response_dof >= n {
            return Err(Error::Config(format!(
                "drive/response indices ({force_dof}, {response_dof}) out of range for {n} masses"
            )));
        }
        Ok(Self {
            masses,
            stiffnesses,
            dampings,
            force_dof,
            response_dof,
        })
    }

    /// The five-mass reference chain: m = 0.1 kg, k = 200 kN/m, c = 0.05 N·s/m
    /// on every element, driven and observed at the first mass.
    pub fn reference_five_dof() -> Self {
        Self::new(vec![0.1; 5], vec![200e3; 6], vec![0.05; 6], 0, 0)
            .expect("reference chain parameters are valid")
    }

    /// Number of masses.
    pub fn n_dof(&self) -> usize {
        self.masses.len()
    }

    /// Number of connecting elements (`n_dof + 1`).
    pub fn n_elements(&self) -> usize {
        self.stiffnesses.len()
    }

    /// Element stiffness values in N/m.
    pub fn stiffnesses(&self) -> &[f64] {
        &self.stiffnesses
    }

    /// Element damping coefficients in N·s/m.
    pub fn dampings(&self) -> &[f64] {
        &self.dampings
    }

    /// Assembles the symmetric chain matrix for the given element values.
    fn chain_matrix(&self, elems: &[f64]) -> DMatrix<f64> {
        let n = self.n_dof();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = elems[i] + elems[i + 1];
            if i + 1 < n {
                a[(i, i + 1)] = -elems[i + 1];
                a[(i + 1, i)] = -elems[i + 1];
            }
        }
        a
    }
}

/// Receptance (displacement per unit force) of the chain on a grid:
/// `H(iω) = eᵣᵀ (K + iωC − ω²M)⁻¹ e_f`.
pub fn mdof_frf(system: &MdofSystem, grid: &FrequencyGrid) -> Result<FrequencyResponse> {
    let n = system.n_dof();
    let k = system.chain_matrix(&system.stiffnesses);
    let c = system.chain_matrix(&system.dampings);
    let mut values = Vec::with_capacity(grid.len());
    for &f in grid.frequencies_hz() {
        let w = 2.0 * std::f64::consts::PI * f;
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = Complex::new(k[(i, j)] - if i == j { w * w * system.masses[i] } else { 0.0 }, w * c[(i, j)]);
            }
        }
        let mut rhs = DVector::<Complex64>::zeros(n);
        rhs[system.force_dof] = Complex::new(1.0, 0.0);
        let lu = a.lu();
        let x = lu
            .solve(&rhs)
            .ok_or(Error::SingularAtFrequency { frequency_hz: f })?;
        let h = x[system.response_dof];
        if !h.re.is_finite() || !h.im.is_finite() {
            return Err(Error::SingularAtFrequency { frequency_hz: f });
        }
        values.push(h);
    }
    FrequencyResponse::new(grid.clone(), values)
}

/// Analytical poles of the chain in rad/s: eigenvalues of the first-order
/// state matrix `[[0, I], [−M⁻¹K, −M⁻¹C]]`, conjugate-closed and sorted by
/// ascending `|Im|`.
pub fn mdof_poles(system: &MdofSystem) -> Result<Vec<Complex64>> {
    let n = system.n_dof();
    let k = system.chain_matrix(&system.stiffnesses);
    let c = system.chain_matrix(&system.dampings);
    let mut state = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        state[(i, n + i)] = 1.0;
        for j in 0..n {
            state[(n + i, j)] = -k[(i, j)] / system.masses[i];
            state[(n + i, n + j)] = -c[(i, j)] / system.masses[i];
        }
    }
    let eigs = state.complex_eigenvalues();
    let mut poles: Vec<Complex64> = eigs.iter().copied().collect();
    // A real state matrix yields exactly conjugate-paired eigenvalues; order
    // them deterministically as [p, conj(p)] by ascending |Im|, any real
    // eigenvalues first.
    poles.sort_by(|a, b| {
        a.im.abs()
            .total_cmp(&b.im.abs())
            .then(a.re.total_cmp(&b.re))
            .then(b.im.total_cmp(&a.im))
    });
    Ok(poles)
}

/// Returns a copy of the chain with the requested element edits applied.
pub fn apply_damage(system: &MdofSystem, edits: &[ElementEdit]) -> Result<MdofSystem> {
    let mut out = system.clone();
    for e in edits {
        if e.element >= out.n_elements() {
            return Err(Error::Config(format!(
                "element index {} out of range: chain has {} elements",
                e.element,
                out.n_elements()
            )));
        }
        for (name, factor) in [
            ("stiffness", e.stiffness_factor),
            ("damping", e.damping_factor),
        ] {
            if !(factor.is_finite() && factor > 0.0) {
                return Err(Error::Config(format!(
                    "{name} factor must be positive and finite, got {factor}"
                )));
            }
        }
        out.stiffnesses[e.element] *= e.stiffness_factor;
        out.dampings[e.element] *= e.damping_factor;
    }
    Ok(out)
}

/// Material and geometry parameters of a rectangular piezoelectric wafer.
///
/// Complex material constants carry hysteretic loss in their (non-positive)
/// imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PztParams {
    /// Patch width `b` in m.
    pub width_m: f64,
    /// Patch thickness `h` in m.
    pub thickness_m: f64,
    /// Patch length `l` in m.
    pub length_m: f64,
    /// Piezoelectric coupling coefficient `d₁₃` in C/N.
    pub d13: f64,
    /// Complex mechanical compliance at zero electric field `s₁₁ᴱ` in 1/Pa.
    pub s11e: Complex64,
    /// Complex permittivity at zero stress `ε₃₃^σ` in F/m.
    pub eps33: Complex64,
    /// Material density in kg/m³.
    pub density: f64,
}

impl PztParams {
    /// Representative PZT wafer: 12.7 mm square, 0.2 mm thick, with lossy
    /// compliance and permittivity.
    pub fn representative() -> Self {
        Self {
            width_m: 0.0127,
            thickness_m: 0.0002,
            length_m: 0.0127,
            d13: -320e-12,
            s11e: Complex64::new(16.1e-12, -0.322e-12),
            eps33: Complex64::new(3.0104e-8, -4.5156e-10),
            density: 7500.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width_m),
            ("thickness", self.thickness_m),
            ("length", self.length_m),
            ("density", self.density),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "wafer {name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.d13.is_finite() {
            return Err(Error::Config("d13 must be finite".into()));
        }
        for (name, v) in [("s11e", self.s11e), ("eps33", self.eps33)] {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
            if v.re <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} must have a positive real part, got {v}"
                )));
            }
            if v.im > 0.0 {
                return Err(Error::Config(format!(
                    "{name} must have a non-positive imaginary part (loss), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of an electromechanical impedance simulation.
///
/// Grid points where the wafer's axial wavenumber hit a tangent pole (only
/// possible for lossless material constants) are excluded from `response` and
/// listed in `tan_pole_frequencies` so callers can see what was skipped.
#[derive(Debug, Clone)]
pub struct EmiSimulation {
    /// Electrical impedance across the wafer, in ohms.
    pub response: FrequencyResponse,
    /// Grid frequencies skipped because `tan(kl)` is unbounded there.
    pub tan_pole_frequencies: Vec<f64>,
}

/// Electrical impedance of a piezoelectric wafer coupled to a structure:
///
/// `Z(ω) = [ iω·(bl/h)·( (d₁₃²/s₁₁ᴱ)·( (tan kl / kl)·Zₚ/(Zₚ+Z_st) − 1 ) + ε₃₃ ) ]⁻¹`
///
/// with the wafer short-circuit impedance
/// `Zₚ = −i·b·h·l·(s₁₁ᴱ·ω·tan(kl)/kl)⁻¹` and wavenumber
/// `k = ω·√(ρ·s₁₁ᴱ)` (principal branch). `structure_impedance` supplies the
/// mechanical driving-point impedance `Z_st(f)` of the host structure.
///
/// The limit `tan(kl)/kl → 1` is applied for `|kl|` near zero, so `d₁₃ = 0`
/// cleanly reduces to the free-capacitor line `[iω(bl/h)ε₃₃]⁻¹` and a blocked
/// structure (`|Z_st| → ∞`) to `[iω(bl/h)(ε₃₃ − d₁₃²/s₁₁ᴱ)]⁻¹`.
pub fn emi_coupled_impedance(
    params: &PztParams,
    structure_impedance: &dyn Fn(f64) -> Complex64,
    grid: &FrequencyGrid,
) -> Result<EmiSimulation> {
    params.validate()?;
    let b = params.width_m;
    let h = params.thickness_m;
    let l = params.length_m;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut freqs = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for &f in grid.frequencies_hz() {
        let w = 2.0 * std::f64::consts::PI * f;
        let kl = (Complex64::new(params.density, 0.0) * params.s11e).sqrt() * w * l;
        // tan(kl)/(kl), with the analytic limit at kl -> 0
        let t = if kl.norm() < 1e-8 {
            Complex64::new(1.0, 0.0)
        } else {
            // odd multiples of π/2 are poles of tan; reachable only when the
            // compliance is lossless (kl real)
            let m = ((kl.re / half_pi - 1.0) / 2.0).round();
            let nearest_odd = (2.0 * m + 1.0) * half_pi;
            if (kl - Complex64::new(nearest_odd, 0.0)).norm() < 1e-9 {
                skipped.push(f);
                continue;
            }
            kl.tan() / kl
        };
        let z_pzt = Complex64::new(0.0, -1.0) * b * h * l / (params.s11e * w * t);
        let z_st = structure_impedance(f);
        if !z_st.re.is_finite() || !z_st.im.is_finite() {
            return Err(Error::Numeric(format!(
                "structure impedance is non-finite at {f} Hz"
            )));
        }
        let denom = z_pzt + z_st;
        if denom.norm() == 0.0 {
            return Err(Error::Numeric(format!(
                "wafer and structure impedances cancel at {f} Hz"
            )));
        }
        let coupling = params.d13 * params.d13 / params.s11e * (t * (z_pzt / denom) - 1.0)
            + params.eps33;
        let admittance = Complex64::new(0.0, w * b * l / h) * coupling;
        if admittance.norm() == 0.0 {
            return Err(Error::Numeric(format!("zero electrical admittance at {f} Hz")));
        }
        let z = 1.0 / admittance;
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Numeric(format!(
                "impedance evaluation overflowed at {f} Hz"
            )));
        }
        freqs.push(f);
        values.push(z);
    }
    if freqs.len() < 2 {
        return Err(Error::Data(format!(
            "only {} grid points remain after tangent-pole exclusion",
            freqs.len()
        )));
    }
    Ok(EmiSimulation {
        response: FrequencyResponse::new(FrequencyGrid::new(freqs)?, values)?,
        tan_pole_frequencies: skipped,
    })
}

/// Mechanical driving-point impedance of a single mass–spring–damper:
/// `Z(ω) = c + i(ωm − k/ω)`.
pub fn sdof_mechanical_impedance(mass: f64, stiffness: f64, damping: f64) -> impl Fn(f64) -> Complex64 {
    move |f: f64| {
        let w = 2.0 * std::f64::consts::PI * f;
        Complex64::new(damping, w * mass - stiffness / w)
    }
}

/// Adds circular complex Gaussian noise at the requested signal-to-noise
/// ratio (dB, relative to the RMS magnitude of `response`). Deterministic for
/// a given seed.
pub fn add_complex_noise(response: &FrequencyResponse, snr_db: f64, seed: u64) -> FrequencyResponse {
    let sigma = response.rms() * 10f64.powf(-snr_db / 20.0);
    let per_component = sigma / std::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = response
        .values()
        .iter()
        .map(|v| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            v + Complex64::new(re * per_component, im * per_component)
        })
        .collect();
    FrequencyResponse::new(response.grid().clone(), values)
        .expect("noise addition preserves finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::poles_to_modal;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Reference modal parameters of the uniform five-mass chain,
    /// cross-checked against the closed form
    /// `ω_j = 2·√(k/m)·sin(jπ/12)`, `ζ_j = (c/k)·ω_j/2`.
    const UNIFORM_FREQS_HZ: [f64; 5] = [
        116.5095046190,
        225.0790790393,
        318.3098861838,
        389.8484006168,
        434.8193908028,
    ];
    const UNIFORM_ZETAS: [f64; 5] = [
        9.1506350946e-05,
        1.7677669530e-04,
        2.5000000000e-04,
        3.0618621785e-04,
        3.4150635095e-04,
    ];

    /// Modal parameters after scaling element 1 (between the first and
    /// second masses) by 0.75 in stiffness and 1.25 in damping, frozen from
    /// a state-matrix eigensolve of the edited chain.
    const DAMAGED_FREQS_HZ: [f64; 5] = [
        113.4977932793,
        225.0790790393,
        308.6845110588,
        372.5525196378,
        428.5461144063,
    ];
    const DAMAGED_ZETAS: [f64; 5] = [
        1.0086824931e-04,
        1.7677669530e-04,
        2.8455393775e-04,
        3.4597481679e-04,
        3.4958544303e-04,
    ];

    #[test]
    fn chain_construction_is_validated() {
        assert!(MdofSystem::new(vec![], vec![1.0], vec![0.0], 0, 0).is_err());
        assert!(MdofSystem::new(vec![1.0], vec![1.0], vec![0.0, 0.0], 0, 0).is_err());
        assert!(MdofSystem::new(vec![1.0], vec![1.0, 0.0], vec![0.0, 0.0], 0, 0).is_err());
        assert!(MdofSystem::new(vec![1.0], vec![1.0, 1.0], vec![-0.1, 0.0], 0, 0).is_err());
        assert!(MdofSystem::new(vec![1.0], vec![1.0, 1.0], vec![0.0, 0.0], 1, 0).is_err());
        assert!(MdofSystem::new(vec![1.0], vec![1.0, 1.0], vec![0.0, 0.0], 0, 0).is_ok());
    }

    #[test]
    fn reference_chain_matches_closed_form_modal_parameters() {
        let sys = MdofSystem::reference_five_dof();
        let modal = poles_to_modal(&mdof_poles(&sys).unwrap()).unwrap();
        assert_eq!(modal.modes.len(), 5);
        assert!(modal.overdamped.is_empty());
        for (i, m) in modal.modes.iter().enumerate() {
            assert_relative_eq!(m.frequency_hz, UNIFORM_FREQS_HZ[i], max_relative = 1e-9);
            assert_relative_eq!(m.damping_ratio, UNIFORM_ZETAS[i], max_relative = 1e-8);
        }
        // closed form for the uniform grounded chain: ω_j = 2√(k/m)·sin(jπ/12)
        let wn = |j: f64| 2.0 * (200e3f64 / 0.1).sqrt() * (j * std::f64::consts::PI / 12.0).sin();
        for (j, m) in modal.modes.iter().enumerate() {
            assert_relative_eq!(
                m.frequency_hz,
                wn((j + 1) as f64) / (2.0 * std::f64::consts::PI),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn element_edit_shifts_modes_downward_but_fixes_the_node_mode() {
        let sys = MdofSystem::reference_five_dof();
        let damaged = apply_damage(
            &sys,
            &[ElementEdit {
                element: 1,
                stiffness_factor: 0.75,
                damping_factor: 1.25,
            }],
        )
        .unwrap();
        let modal = poles_to_modal(&mdof_poles(&damaged).unwrap()).unwrap();
        assert_eq!(modal.modes.len(), 5);
        for (i, m) in modal.modes.iter().enumerate() {
            assert_relative_eq!(m.frequency_hz, DAMAGED_FREQS_HZ[i], max_relative = 1e-9);
            assert_relative_eq!(m.damping_ratio, DAMAGED_ZETAS[i], max_relative = 1e-7);
            // a stiffness reduction never raises a natural frequency
            assert!(m.frequency_hz <= UNIFORM_FREQS_HZ[i] * (1.0 + 1e-12));
        }
        // mode 2 of the uniform chain has a strain node at element 1, so its
        // frequency is invariant under that element's stiffness change
        assert_relative_eq!(
            modal.modes[1].frequency_hz,
            UNIFORM_FREQS_HZ[1],
            max_relative = 1e-12
        );
    }

    #[test]
    fn damage_edits_are_validated() {
        let sys = MdofSystem::reference_five_dof();
        let bad_index = ElementEdit {
            element: 6,
            stiffness_factor: 0.5,
            damping_factor: 1.0,
        };
        assert!(apply_damage(&sys, &[bad_index]).is_err());
        let bad_factor = ElementEdit {
            element: 0,
            stiffness_factor: 0.0,
            damping_factor: 1.0,
        };
        assert!(apply_damage(&sys, &[bad_factor]).is_err());
        let ok = ElementEdit {
            element: 5,
            stiffness_factor: 0.9,
            damping_factor: 1.1,
        };
        let edited = apply_damage(&sys, &[ok]).unwrap();
        assert_relative_eq!(edited.stiffnesses()[5], 180e3, max_relative = 1e-15);
        assert_relative_eq!(edited.dampings()[5], 0.055, max_relative = 1e-15);
        // original untouched
        assert_eq!(sys.stiffnesses()[5], 200e3);
    }

    #[test]
    fn single_mass_receptance_matches_hand_formula() {
        // one mass, two ground springs: H(iω) = 1/(k_tot − ω²m + iωc_tot)
        let sys = MdofSystem::new(vec![1.0], vec![50.0, 50.0], vec![0.05, 0.05], 0, 0).unwrap();
        let grid = FrequencyGrid::new(vec![1.0, 1.5]).unwrap();
        let frf = mdof_frf(&sys, &grid).unwrap();
        for (i, &f) in grid.frequencies_hz().iter().enumerate() {
            let w = 2.0 * std::f64::consts::PI * f;
            let expect = 1.0 / Complex64::new(100.0 - w * w, 0.1 * w);
            assert_relative_eq!(frf.values()[i].re, expect.re, max_relative = 1e-12);
            assert_relative_eq!(frf.values()[i].im, expect.im, max_relative = 1e-12);
        }
    }

    #[test]
    fn receptance_peaks_near_the_first_natural_frequency() {
        let sys = MdofSystem::reference_five_dof();
        let grid = FrequencyGrid::linspace(110.0, 123.0, 261).unwrap();
        let frf = mdof_frf(&sys, &grid).unwrap();
        let (imax, _) = frf
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let f_peak = grid.frequencies_hz()[imax];
        assert_abs_diff_eq!(f_peak, UNIFORM_FREQS_HZ[0], epsilon = 0.1);
    }

    #[test]
    fn coupled_impedance_reproduces_reference_values() {
        let params = PztParams::representative();
        let z_st = sdof_mechanical_impedance(0.05, 5e8, 200.0);
        let grid = FrequencyGrid::new(vec![30e3, 50e3, 70e3]).unwrap();
        let sim = emi_coupled_impedance(&params, &z_st, &grid).unwrap();
        assert!(sim.tan_pole_frequencies.is_empty());
        assert_eq!(sim.response.len(), 3);
        // frozen high-precision reference at 50 kHz
        let z = sim.response.values()[1];
        assert_relative_eq!(z.re, 4.0484371639057989, max_relative = 1e-12);
        assert_relative_eq!(z.im, -166.1188885044575638, max_relative = 1e-12);
    }

    #[test]
    fn zero_coupling_reduces_to_the_free_capacitor_line() {
        let mut params = PztParams::representative();
        params.d13 = 0.0;
        let z_st = sdof_mechanical_impedance(0.05, 5e8, 200.0);
        let grid = FrequencyGrid::new(vec![50e3, 60e3]).unwrap();
        let sim = emi_coupled_impedance(&params, &z_st, &grid).unwrap();
        let z = sim.response.values()[0];
        assert_relative_eq!(z.re, 1.9662649130659509, max_relative = 1e-12);
        assert_relative_eq!(z.im, -131.08432753773006, max_relative = 1e-12);
        // and the hand formula [iω(bl/h)ε₃₃]⁻¹ agrees
        let w = 2.0 * std::f64::consts::PI * 50e3;
        let hand = (Complex64::new(0.0, w * params.width_m * params.length_m / params.thickness_m)
            * params.eps33)
            .inv();
        assert_relative_eq!(z.re, hand.re, max_relative = 1e-12);
        assert_relative_eq!(z.im, hand.im, max_relative = 1e-12);
    }

    #[test]
    fn blocked_structure_reduces_to_the_clamped_capacitor_line() {
        let params = PztParams::representative();
        let blocked = |_f: f64| Complex64::new(1e30, 0.0);
        let grid = FrequencyGrid::new(vec![50e3, 60e3]).unwrap();
        let sim = emi_coupled_impedance(&params, &blocked, &grid).unwrap();
        let z = sim.response.values()[0];
        assert_relative_eq!(z.re, 4.0484351002447548, max_relative = 1e-9);
        assert_relative_eq!(z.im, -166.11886851898976, max_relative = 1e-9);
    }

    #[test]
    fn lossless_material_flags_tangent_pole_points() {
        let mut params = PztParams::representative();
        params.s11e = Complex64::new(16.1e-12, 0.0);
        params.eps33 = Complex64::new(3.0104e-8, 0.0);
        // kl = π/2 exactly at f* = 1/(4·l·√(ρ·s11)); 56649.06 Hz here
        let f_star = 0.25 / (params.length_m * (params.density * params.s11e.re).sqrt());
        let grid = FrequencyGrid::new(vec![0.9 * f_star, f_star, 1.1 * f_star]).unwrap();
        let z_st = sdof_mechanical_impedance(0.05, 5e8, 200.0);
        let sim = emi_coupled_impedance(&params, &z_st, &grid).unwrap();
        assert_eq!(sim.tan_pole_frequencies, vec![f_star]);
        assert_eq!(sim.response.len(), 2);
        assert_eq!(
            sim.response.grid().frequencies_hz(),
            &[0.9 * f_star, 1.1 * f_star]
        );
    }

    #[test]
    fn wafer_parameters_are_validated() {
        let mut p = PztParams::representative();
        p.thickness_m = 0.0;
        assert!(emi_coupled_impedance(
            &p,
            &|_| Complex64::new(1.0, 0.0),
            &FrequencyGrid::new(vec![1e3, 2e3]).unwrap()
        )
        .is_err());
        let mut p = PztParams::representative();
        p.s11e = Complex64::new(16.1e-12, 0.322e-12); // gain, not loss
        assert!(emi_coupled_impedance(
            &p,
            &|_| Complex64::new(1.0, 0.0),
            &FrequencyGrid::new(vec![1e3, 2e3]).unwrap()
        )
        .is_err());
    }

    #[test]
    fn noise_is_deterministic_and_scales_with_snr() {
        let grid = FrequencyGrid::linspace(100.0, 450.0, 1000).unwrap();
        let sys = MdofSystem::reference_five_dof();
        let clean = mdof_frf(&sys, &grid).unwrap();
        let a = add_complex_noise(&clean, 40.0, 7);
        let b = add_complex_noise(&clean, 40.0, 7);
        assert_eq!(a.values(), b.values());
        let c = add_complex_noise(&clean, 40.0, 8);
        assert_ne!(a.values(), c.values());
        // measured noise level ≈ requested level
        let noise_rms = {
            let sum: f64 = a
                .values()
                .iter()
                .zip(clean.values())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum();
            (sum / clean.len() as f64).sqrt()
        };
        let expected = clean.rms() * 10f64.powf(-40.0 / 20.0);
        assert_relative_eq!(noise_rms, expected, max_relative = 0.15);
    }
}
