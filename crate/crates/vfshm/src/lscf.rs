//! Common-denominator polynomial fitting: the least-squares complex
//! frequency-domain estimator.
//!
//! The response is modeled as a ratio of order-`N` polynomials
//! `H(s) ≈ A(s′)/B(s′)` in the scaled variable `s′ = s/(2π·f_max)`, the
//! highest denominator coefficient is pinned to one, and the linearized
//! normal system `B·H ≈ A` is solved in a single least-squares pass — no
//! iteration, no pole relocation. That directness is the appeal and the
//! weakness: the monomial basis makes the design matrix a Vandermonde-like
//! block whose conditioning explodes with order and bandwidth, which is why
//! the fit quality collapses on wide bands where iterative rational fitting
//! still converges. The solver deliberately applies no column scaling so the
//! reported condition estimate reflects that behavior honestly; a truncated
//! SVD keeps rank-deficient systems solvable (minimum-norm solution) instead
//! of erroring out.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FrequencyGrid, FrequencyResponse};

/// Ratio of real-coefficient polynomials in the scaled Laplace variable
/// `s′ = s / frequency_scale`.
///
/// Coefficients are stored lowest power first. A fitted model has
/// `numerator.len() == denominator.len() == order + 1` and the leading
/// denominator coefficient pinned to `1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    /// Numerator coefficients `a₀ … a_N`.
    pub numerator: Vec<f64>,
    /// Denominator coefficients `b₀ … b_N`, leading coefficient non-zero.
    pub denominator: Vec<f64>,
    /// Scale of the Laplace variable, in rad/s.
    pub frequency_scale: f64,
}

impl PolynomialModel {
    fn validate(&self) -> Result<()> {
        if self.numerator.is_empty() || self.denominator.is_empty() {
            return Err(Error::Data("polynomial model has empty coefficients".into()));
        }
        if self
            .numerator
            .iter()
            .chain(&self.denominator)
            .any(|c| !c.is_finite())
        {
            return Err(Error::Data("non-finite polynomial coefficient".into()));
        }
        if *self.denominator.last().unwrap() == 0.0 {
            return Err(Error::Data(
                "leading denominator coefficient must be non-zero".into(),
            ));
        }
        if !(self.frequency_scale.is_finite() && self.frequency_scale > 0.0) {
            return Err(Error::Data(format!(
                "frequency scale must be positive, got {}",
                self.frequency_scale
            )));
        }
        Ok(())
    }

    /// Evaluates the polynomial ratio at every grid point `s = i·2πf`.
    pub fn evaluate(&self, grid: &FrequencyGrid) -> Result<FrequencyResponse> {
        self.validate()?;
        let horner = |coeffs: &[f64], x: Complex64| {
            coeffs
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
        };
        let mut values = Vec::with_capacity(grid.len());
        for &f in grid.frequencies_hz() {
            let sp = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f / self.frequency_scale);
            let den = horner(&self.denominator, sp);
            if den.norm() == 0.0 {
                return Err(Error::Numeric(format!(
                    "denominator vanishes at {f} Hz"
                )));
            }
            let v = horner(&self.numerator, sp) / den;
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Numeric(format!(
                    "polynomial evaluation overflowed at {f} Hz"
                )));
            }
            values.push(v);
        }
        FrequencyResponse::new(grid.clone(), values)
    }
}

/// Fits an order-`N` common-denominator polynomial model in one linear pass;
/// returns the model and the condition estimate (σ_max/σ_min) of the
/// unscaled design matrix.
///
/// With `b_N = 1` the linearized equations read
/// `Σⱼ aⱼ·s′ʲ − H·Σⱼ<N bⱼ·s′ʲ ≈ H·s′ᴺ`, stacked into a real system over the
/// grid. Rank-deficient systems are solved in the minimum-norm sense rather
/// than rejected, so degenerate-but-consistent data (a constant response, for
/// example) still fits; the condition estimate tells the caller how much to
/// trust the coefficients.
pub fn lscf_fit(response: &FrequencyResponse, order: usize) -> Result<(PolynomialModel, f64)> {
    if order == 0 {
        return Err(Error::Config("model order must be at least 1".into()));
    }
    let m = response.len();
    if m < order + 2 {
        return Err(Error::Config(format!(
            "order {} needs at least {} grid points, got {m}",
            order,
            order + 2
        )));
    }
    let scale = 2.0 * std::f64::consts::PI * response.grid().f_max();
    let sp: Vec<Complex64> = response
        .grid()
        .frequencies_hz()
        .iter()
        .map(|&f| Complex64::new(0.0, f / response.grid().f_max()))
        .collect();
    let h = response.values();

    // powers of s′ up to N, shared by all columns
    let mut powers: Vec<Vec<Complex64>> = Vec::with_capacity(order + 1);
    powers.push(vec![Complex64::new(1.0, 0.0); m]);
    for j in 1..=order {
        let prev = &powers[j - 1];
        powers.push(prev.iter().zip(&sp).map(|(&p, &x)| p * x).collect());
    }

    let ncols = (order + 1) + order; // a₀…a_N, b₀…b_{N−1}
    let mut a = DMatrix::<f64>::zeros(2 * m, ncols);
    let mut b = DVector::<f64>::zeros(2 * m);
    for i in 0..m {
        for j in 0..=order {
            a[(i, j)] = powers[j][i].re;
            a[(m + i, j)] = powers[j][i].im;
        }
        for j in 0..order {
            let v = -h[i] * powers[j][i];
            a[(i, order + 1 + j)] = v.re;
            a[(m + i, order + 1 + j)] = v.im;
        }
        let rhs = h[i] * powers[order][i];
        b[i] = rhs.re;
        b[m + i] = rhs.im;
    }

    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if smax == 0.0 || !smax.is_finite() {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let x = svd
        .solve(&b, smax * 1e-14)
        .map_err(|_| Error::IllConditioned { condition })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { condition });
    }

    let numerator: Vec<f64> = (0..=order).map(|j| x[j]).collect();
    let mut denominator: Vec<f64> = (0..order).map(|j| x[order + 1 + j]).collect();
    denominator.push(1.0);
    Ok((
        PolynomialModel {
            numerator,
            denominator,
            frequency_scale: scale,
        },
        condition,
    ))
}

/// Poles of a polynomial model in rad/s: roots of the denominator, computed
/// as companion-matrix eigenvalues in the scaled variable and multiplied back
/// by `frequency_scale`. Sorted by ascending `|Im|`, then real part.
pub fn polynomial_poles(model: &PolynomialModel) -> Result<Vec<Complex64>> {
    model.validate()?;
    let lead = *model.denominator.last().unwrap();
    let monic: Vec<f64> = model.denominator.iter().map(|&c| c / lead).collect();
    let deg = monic.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 0..deg {
        comp[(i, deg - 1)] = -monic[i];
        if i + 1 < deg {
            comp[(i + 1, i)] = 1.0;
        }
    }
    let eigs = comp.complex_eigenvalues();
    let mut poles: Vec<Complex64> = eigs.iter().map(|e| e * model.frequency_scale).collect();
    if poles.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(Error::Numeric(
            "companion eigensolve produced non-finite roots".into(),
        ));
    }
    poles.sort_by(|a, b| {
        a.im.abs()
            .total_cmp(&b.im.abs())
            .then(a.re.total_cmp(&b.re))
            .then(b.im.total_cmp(&a.im))
    });
    Ok(poles)
}
