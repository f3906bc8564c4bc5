//! Fixed-order rational approximation of sampled frequency responses by
//! iterative pole relocation.
//!
//! The fit alternates two linear least-squares stages:
//!
//! 1. **Pole relocation** — with current poles `aₙ`, a scaling function
//!    `σ(s) = 1 + Σ c̃ₙ/(s − aₙ)` is introduced and `σ(s)·H(s)` is matched by
//!    a rational function sharing the same poles. The zeros of σ, computed as
//!    eigenvalues of the pole matrix minus a rank-one update, become the next
//!    pole estimate.
//! 2. **Residue identification** — with the relocated poles frozen, the
//!    residues and optional constant (`d`) and linear (`h·s`) terms follow
//!    from one more linear solve.
//!
//! Complex poles are treated in conjugate pairs through a real
//! re-parameterization, so every least-squares system is real-valued and a
//! fitted model maps real signals to real signals by construction. Each
//! least-squares system is column-scaled to unit norm and solved by
//! truncated SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{check_conjugate_closure, FrequencyGrid, FrequencyResponse, RationalModel};

/// Options controlling a vector fit.
#[derive(Debug, Clone)]
pub struct VfOptions {
    /// Model order: the number of poles.
    pub order: usize,
    /// Maximum number of relocation iterations.
    pub max_iterations: usize,
    /// Convergence threshold on the relative change of the weighted RMS
    /// error between consecutive iterations.
    pub convergence_tol: f64,
    /// Reflect right-half-plane poles into the left half-plane after each
    /// relocation.
    pub enforce_stability: bool,
    /// Fit a constant offset term `d`.
    pub include_d: bool,
    /// Fit a linear term `h·s`.
    pub include_h: bool,
    /// Optional per-point weights (positive, one per grid point). Uniform
    /// weighting when absent.
    pub weights: Option<Vec<f64>>,
    /// Seed for the randomized restart used when the scaling function
    /// degenerates. Fits are deterministic for a fixed seed.
    pub seed: u64,
}

impl VfOptions {
    /// Default options for the given model order.
    pub fn new(order: usize) -> Self {
        Self {
            order,
            max_iterations: 10,
            convergence_tol: 1e-10,
            enforce_stability: true,
            include_d: true,
            include_h: true,
            weights: None,
            seed: 42,
        }
    }
}

impl Default for VfOptions {
    fn default() -> Self {
        Self::new(2)
    }
}

/// Convergence telemetry of one vector fit.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VfDiagnostics {
    /// Number of completed relocation-plus-refit iterations.
    pub iterations_run: usize,
    /// Weighted RMS error after each iteration (`len == iterations_run`).
    pub rms_error_history: Vec<f64>,
    /// How many poles were reflected to the left half-plane per iteration
    /// (`len == iterations_run`).
    pub poles_flipped_per_iteration: Vec<usize>,
    /// Weighted RMS error of the returned model (the best iterate).
    pub final_rms_error: f64,
    /// Condition estimate (σ_max/σ_min of the column-scaled design matrix)
    /// of the final pole-relocation system.
    pub system_condition_estimate: f64,
    /// Whether the relative-change convergence test fired.
    pub converged: bool,
    /// Whether an odd order forced one real pole into the initial set.
    pub odd_order_real_pole: bool,
    /// Number of randomized restarts taken after scaling-function collapse.
    pub restarts: usize,
    /// Seed the fit ran with.
    pub seed: u64,
}

/// A stable, conjugate-closed pole set reduced to its independent
/// parameters: real poles and one representative per conjugate pair.
#[derive(Debug, Clone, Copy)]
enum PoleGroup {
    Real(f64),
    /// Positive-imaginary representative of a conjugate pair.
    Pair(Complex64),
}

impl PoleGroup {
    /// Number of scalar basis columns this group contributes.
    fn width(&self) -> usize {
        match self {
            PoleGroup::Real(_) => 1,
            PoleGroup::Pair(_) => 2,
        }
    }
}

/// Validates conjugate closure and reduces a pole list to groups, ordered by
/// ascending `|Im|` then real part (deterministic regardless of input order).
fn group_poles(poles: &[Complex64]) -> Result<Vec<PoleGroup>> {
    for p in poles {
        if !p.re.is_finite() || !p.im.is_finite() {
            return Err(Error::Data(format!("non-finite pole {p}")));
        }
    }
    check_conjugate_closure(poles, None)?;
    let mut groups = Vec::new();
    for p in poles {
        if p.im == 0.0 {
            groups.push(PoleGroup::Real(p.re));
        } else if p.im > 0.0 {
            groups.push(PoleGroup::Pair(*p));
        }
    }
    groups.sort_by(|a, b| {
        let key = |g: &PoleGroup| match g {
            PoleGroup::Real(q) => (0.0, *q),
            PoleGroup::Pair(q) => (q.im, q.re),
        };
        let (ia, ra) = key(a);
        let (ib, rb) = key(b);
        ia.total_cmp(&ib).then(ra.total_cmp(&rb))
    });
    Ok(groups)
}

/// Expands groups back into a full conjugate-closed pole list.
fn ungroup(groups: &[PoleGroup]) -> Vec<Complex64> {
    let mut out = Vec::new();
    for g in groups {
        match g {
            PoleGroup::Real(q) => out.push(Complex64::new(*q, 0.0)),
            PoleGroup::Pair(q) => {
                out.push(*q);
                out.push(q.conj());
            }
        }
    }
    out
}

/// Partial-fraction basis columns for the grouped poles at the points `s`:
/// a real pole contributes `1/(s−q)`; a conjugate pair contributes the two
/// real-coefficient combinations `1/(s−q) + 1/(s−q̄)` and
/// `i/(s−q) − i/(s−q̄)`.
fn basis_columns(s: &[Complex64], groups: &[PoleGroup]) -> Vec<Vec<Complex64>> {
    let mut cols = Vec::new();
    for g in groups {
        match g {
            PoleGroup::Real(q) => {
                cols.push(s.iter().map(|&si| (si - q).inv()).collect());
            }
            PoleGroup::Pair(q) => {
                let qc = q.conj();
                let mut c_re = Vec::with_capacity(s.len());
                let mut c_im = Vec::with_capacity(s.len());
                for &si in s {
                    let a = (si - q).inv();
                    let b = (si - qc).inv();
                    c_re.push(a + b);
                    c_im.push(Complex64::i() * (a - b));
                }
                cols.push(c_re);
                cols.push(c_im);
            }
        }
    }
    cols
}

/// Converts a real coefficient slice (one entry per basis column) into
/// per-pole complex residues aligned with [`ungroup`]'s pole order.
fn coeffs_to_residues(groups: &[PoleGroup], coeffs: &[f64]) -> Vec<Complex64> {
    let mut residues = Vec::new();
    let mut j = 0;
    for g in groups {
        match g {
            PoleGroup::Real(_) => {
                residues.push(Complex64::new(coeffs[j], 0.0));
                j += 1;
            }
            PoleGroup::Pair(_) => {
                let r = Complex64::new(coeffs[j], coeffs[j + 1]);
                residues.push(r);
                residues.push(r.conj());
                j += 2;
            }
        }
    }
    residues
}

/// Solves the complex-valued least-squares system `A x ≈ b` for real `x` by
/// stacking real and imaginary parts, with optional per-point row weights
/// and column scaling to unit norm. Returns the solution and the condition
/// estimate (σ_max/σ_min) of the scaled real system.
fn solve_real_ls(
    columns: &[Vec<Complex64>],
    rhs: &[Complex64],
    weights: Option<&[f64]>,
    scale_columns: bool,
) -> Result<(Vec<f64>, f64)> {
    let m = rhs.len();
    let ncols = columns.len();
    let mut a = DMatrix::<f64>::zeros(2 * m, ncols);
    let mut b = DVector::<f64>::zeros(2 * m);
    for i in 0..m {
        let w = weights.map_or(1.0, |ws| ws[i]);
        for (j, col) in columns.iter().enumerate() {
            a[(i, j)] = w * col[i].re;
            a[(m + i, j)] = w * col[i].im;
        }
        b[i] = w * rhs[i].re;
        b[m + i] = w * rhs[i].im;
    }
    let mut scales = vec![1.0; ncols];
    if scale_columns {
        for j in 0..ncols {
            let norm = a.column(j).norm();
            if norm > 0.0 {
                scales[j] = norm;
                for i in 0..2 * m {
                    a[(i, j)] /= norm;
                }
            }
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if smax == 0.0 {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let x = svd
        .solve(&b, smax * 1e-14)
        .map_err(|_| Error::IllConditioned { condition })?;
    let mut out = Vec::with_capacity(ncols);
    for j in 0..ncols {
        let v = x[j] / scales[j];
        if !v.is_finite() {
            return Err(Error::IllConditioned { condition });
        }
        out.push(v);
    }
    Ok((out, condition))
}

/// Reflects right-half-plane poles into the left half-plane in place;
/// returns how many were moved. A pole exactly on the axis is nudged to a
/// strictly stable position.
fn enforce_stable(poles: &mut [Complex64]) -> usize {
    let mut flipped = 0;
    for p in poles.iter_mut() {
        if p.re > 0.0 {
            p.re = -p.re;
            flipped += 1;
        } else if p.re == 0.0 {
            p.re = -1e-12 * p.im.abs().max(1.0);
            flipped += 1;
        }
    }
    flipped
}

struct Relocation {
    new_poles: Vec<Complex64>,
    condition: f64,
    flipped: usize,
    /// False when the fitted scaling function has a near-zero on the grid,
    /// which makes the relocated poles meaningless.
    sigma_nontrivial: bool,
}

fn relocate_detailed(
    response: &FrequencyResponse,
    poles: &[Complex64],
    opts: &VfOptions,
) -> Result<Relocation> {
    let groups = group_poles(poles)?;
    let n: usize = groups.iter().map(PoleGroup::width).sum();
    let s = response.grid().laplace_points();
    let h = response.values();
    let basis = basis_columns(&s, &groups);

    // Columns: [basis | 1? | s? | −H·basis], unknowns
    // [model residues | d? | h? | σ residues].
    let mut columns: Vec<Vec<Complex64>> = basis.clone();
    if opts.include_d {
        columns.push(vec![Complex64::new(1.0, 0.0); s.len()]);
    }
    if opts.include_h {
        columns.push(s.clone());
    }
    for col in &basis {
        columns.push(col.iter().zip(h).map(|(&phi, &hi)| -hi * phi).collect());
    }
    let (x, condition) = solve_real_ls(&columns, h, opts.weights.as_deref(), true)?;
    let sigma_coeffs = &x[x.len() - n..];

    // Scaling function σ(s) = 1 + Σ c̃·φ(s); a near-zero anywhere on the grid
    // signals a degenerate solution.
    let mut sigma_min = f64::INFINITY;
    let mut sigma_max: f64 = 0.0;
    for i in 0..s.len() {
        let mut sigma = Complex64::new(1.0, 0.0);
        for (j, col) in basis.iter().enumerate() {
            sigma += sigma_coeffs[j] * col[i];
        }
        sigma_min = sigma_min.min(sigma.norm());
        sigma_max = sigma_max.max(sigma.norm());
    }
    let sigma_nontrivial = sigma_min > 1e-10 * sigma_max.max(1.0);

    // Zeros of σ: eigenvalues of Λ − b̂·ĉᵀ, where Λ carries the poles in real
    // block form, b̂ the basis normalization, and ĉ the σ residues. The
    // rank-one update couples every block.
    let mut lambda = DMatrix::<f64>::zeros(n, n);
    let mut bvec = DVector::<f64>::zeros(n);
    let mut cvec = DVector::<f64>::zeros(n);
    let mut row = 0;
    for g in &groups {
        match g {
            PoleGroup::Real(q) => {
                lambda[(row, row)] = *q;
                bvec[row] = 1.0;
                cvec[row] = sigma_coeffs[row];
                row += 1;
            }
            PoleGroup::Pair(q) => {
                lambda[(row, row)] = q.re;
                lambda[(row, row + 1)] = q.im;
                lambda[(row + 1, row)] = -q.im;
                lambda[(row + 1, row + 1)] = q.re;
                bvec[row] = 2.0;
                bvec[row + 1] = 0.0;
                cvec[row] = sigma_coeffs[row];
                cvec[row + 1] = sigma_coeffs[row + 1];
                row += 2;
            }
        }
    }
    let a = lambda - &bvec * cvec.transpose();
    let eigs = a.complex_eigenvalues();
    let mut new_poles: Vec<Complex64> = eigs.iter().copied().collect();
    for p in &new_poles {
        if !p.re.is_finite() || !p.im.is_finite() {
            return Err(Error::Numeric("pole relocation produced non-finite eigenvalues".into()));
        }
    }
    let flipped = if opts.enforce_stability {
        enforce_stable(&mut new_poles)
    } else {
        0
    };
    // canonical ordering; eigenvalues of a real matrix are conjugate-closed
    let groups = group_poles(&new_poles)?;
    Ok(Relocation {
        new_poles: ungroup(&groups),
        condition,
        flipped,
        sigma_nontrivial,
    })
}

/// One pole-relocation step: fits the scaling function on the current poles
/// and returns the zeros of σ as the next pole set (reflected into the left
/// half-plane when stability enforcement is on).
///
/// `poles` must be closed under conjugation; the result is conjugate-closed
/// and deterministically ordered by ascending `|Im|`.
pub fn relocate_poles(
    response: &FrequencyResponse,
    poles: &[Complex64],
    opts: &VfOptions,
) -> Result<Vec<Complex64>> {
    validate_problem(response, opts)?;
    Ok(relocate_detailed(response, poles, opts)?.new_poles)
}

/// Residues plus optional d/h terms for frozen poles.
struct FitTerms {
    residues: Vec<Complex64>,
    d: f64,
    h: f64,
}

fn fit_terms(
    response: &FrequencyResponse,
    groups: &[PoleGroup],
    opts: &VfOptions,
) -> Result<FitTerms> {
    let s = response.grid().laplace_points();
    let mut columns = basis_columns(&s, groups);
    let n_basis = columns.len();
    if opts.include_d {
        columns.push(vec![Complex64::new(1.0, 0.0); s.len()]);
    }
    if opts.include_h {
        columns.push(s.clone());
    }
    let (x, _) = solve_real_ls(&columns, response.values(), opts.weights.as_deref(), true)?;
    let residues = coeffs_to_residues(groups, &x[..n_basis]);
    let mut next = n_basis;
    let d = if opts.include_d {
        next += 1;
        x[next - 1]
    } else {
        0.0
    };
    let h = if opts.include_h { x[next] } else { 0.0 };
    Ok(FitTerms { residues, d, h })
}

/// Fits residues and the optional constant/linear terms for a frozen pole
/// set. Poles must be stable and conjugate-closed; the returned model lists
/// them in canonical order (ascending `|Im|`).
pub fn fit_residues(
    response: &FrequencyResponse,
    poles: &[Complex64],
    opts: &VfOptions,
) -> Result<RationalModel> {
    validate_problem(response, opts)?;
    let groups = group_poles(poles)?;
    let terms = fit_terms(response, &groups, opts)?;
    RationalModel::new(
        ungroup(&groups),
        terms.residues,
        terms.d,
        terms.h,
        opts.include_d,
        opts.include_h,
    )
}

/// Evaluates a raw pole/residue set without constructing a validated model
/// (used for error tracking on intermediate, possibly unstable iterates).
fn evaluate_raw(
    s: &[Complex64],
    poles: &[Complex64],
    residues: &[Complex64],
    d: f64,
    h: f64,
) -> Vec<Complex64> {
    s.iter()
        .map(|&si| {
            let mut acc = Complex64::new(d, 0.0) + si * h;
            for (p, r) in poles.iter().zip(residues) {
                acc += r / (si - p);
            }
            acc
        })
        .collect()
}

/// Weighted RMS of the residual `response − model`.
fn weighted_rms(delta: &[Complex64], weights: Option<&[f64]>) -> f64 {
    let sum: f64 = delta
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let w = weights.map_or(1.0, |ws| ws[i]);
            (w * d.norm()).powi(2)
        })
        .sum();
    (sum / delta.len() as f64).sqrt()
}

/// Conjugate pairs linearly spaced over the band with real parts a small
/// fraction of the imaginary parts. Poles far from the data band make the
/// basis columns nearly collinear; large real parts oversmooth — the small
/// negative ratio is the standard compromise.
fn initial_pole_groups(grid: &FrequencyGrid, order: usize, ratios: &[f64]) -> Vec<PoleGroup> {
    let n_pairs = order / 2;
    let mut groups = Vec::new();
    for i in 0..n_pairs {
        let f = if n_pairs == 1 {
            0.5 * (grid.f_min() + grid.f_max())
        } else {
            grid.f_min()
                + (grid.f_max() - grid.f_min()) * i as f64 / (n_pairs - 1) as f64
        };
        let beta = 2.0 * std::f64::consts::PI * f;
        groups.push(PoleGroup::Pair(Complex64::new(-ratios[i] * beta, beta)));
    }
    if order % 2 == 1 {
        let scale = ratios.last().copied().unwrap_or(0.01) / 0.01;
        groups.push(PoleGroup::Real(-2.0 * std::f64::consts::PI * grid.f_min() * scale));
    }
    groups
}

/// Starting poles for a fit of the given order: `order/2` conjugate pairs
/// linearly spaced across the grid band (a single pair sits at the band
/// midpoint), imaginary part `2πf`, real part `−2πf/100`. An odd order adds
/// one real pole at `−2π·f_min`.
pub fn initial_poles(grid: &FrequencyGrid, order: usize) -> Result<Vec<Complex64>> {
    if order == 0 {
        return Err(Error::Config("model order must be at least 1".into()));
    }
    let ratios = vec![0.01; order / 2 + 1];
    Ok(ungroup(&initial_pole_groups(grid, order, &ratios)))
}

fn validate_problem(response: &FrequencyResponse, opts: &VfOptions) -> Result<()> {
    if opts.order == 0 {
        return Err(Error::Config("model order must be at least 1".into()));
    }
    if response.len() < opts.order + 2 {
        return Err(Error::Config(format!(
            "order {} needs at least {} grid points, got {}",
            opts.order,
            opts.order + 2,
            response.len()
        )));
    }
    if opts.max_iterations == 0 {
        return Err(Error::Config("max_iterations must be at least 1".into()));
    }
    if !(opts.convergence_tol.is_finite() && opts.convergence_tol > 0.0) {
        return Err(Error::Config(format!(
            "convergence tolerance must be positive, got {}",
            opts.convergence_tol
        )));
    }
    if let Some(w) = &opts.weights {
        if w.len() != response.len() {
            return Err(Error::Config(format!(
                "{} weights for {} grid points",
                w.len(),
                response.len()
            )));
        }
        if w.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::Config("weights must be positive and finite".into()));
        }
    }
    Ok(())
}

/// Fits a stable pole-residue model of order `opts.order` to the sampled
/// response. Returns the best iterate encountered together with convergence
/// diagnostics.
pub fn vector_fit(
    response: &FrequencyResponse,
    opts: &VfOptions,
) -> Result<(RationalModel, VfDiagnostics)> {
    validate_problem(response, opts)?;
    let s = response.grid().laplace_points();
    let h = response.values();
    let response_rms = response.rms();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut poles = initial_poles(response.grid(), opts.order)?;
    let mut diag = VfDiagnostics {
        iterations_run: 0,
        rms_error_history: Vec::new(),
        poles_flipped_per_iteration: Vec::new(),
        final_rms_error: f64::NAN,
        system_condition_estimate: f64::NAN,
        converged: false,
        odd_order_real_pole: opts.order % 2 == 1,
        restarts: 0,
        seed: opts.seed,
    };
    let mut best: Option<(f64, Vec<Complex64>, FitTerms)> = None;

    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let reloc = relocate_detailed(response, &poles, opts)?;
        if !reloc.sigma_nontrivial {
            diag.restarts += 1;
            if diag.restarts > 3 {
                return Err(Error::Numeric(
                    "scaling function degenerated on every restart; \
                     the response may not admit a rational fit of this order"
                        .into(),
                ));
            }
            // restart from re-randomized pole spreads
            let ratios: Vec<f64> = (0..opts.order / 2 + 1)
                .map(|_| rng.gen_range(0.005..0.02))
                .collect();
            poles = ungroup(&initial_pole_groups(response.grid(), opts.order, &ratios));
            continue;
        }
        diag.system_condition_estimate = reloc.condition;

        let groups = group_poles(&reloc.new_poles)?;
        let terms = fit_terms(response, &groups, opts)?;
        let fitted = evaluate_raw(&s, &reloc.new_poles, &terms.residues, terms.d, terms.h);
        let delta: Vec<Complex64> = h.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let err = weighted_rms(&delta, opts.weights.as_deref());

        diag.rms_error_history.push(err);
        diag.poles_flipped_per_iteration.push(reloc.flipped);
        iterations += 1;

        if best.as_ref().map_or(true, |(e, _, _)| err < *e) {
            best = Some((err, reloc.new_poles.clone(), terms));
        }

        let hist = &diag.rms_error_history;
        if hist.len() >= 2 {
            let prev = hist[hist.len() - 2];
            if (prev - err).abs() <= opts.convergence_tol * prev.max(f64::MIN_POSITIVE) {
                diag.converged = true;
                break;
            }
        }
        // already at the numerical floor: no further iteration can help
        if err <= 1e-13 * response_rms {
            diag.converged = true;
            break;
        }
        poles = reloc.new_poles;
    }

    diag.iterations_run = diag.rms_error_history.len();
    let (err, best_poles, terms) = best.ok_or_else(|| {
        Error::Numeric("no vector-fitting iteration completed".into())
    })?;
    diag.final_rms_error = err;
    let model = RationalModel::new(
        best_poles,
        terms.residues,
        terms.d,
        terms.h,
        opts.include_d,
        opts.include_h,
    )?;
    Ok((model, diag))
}
