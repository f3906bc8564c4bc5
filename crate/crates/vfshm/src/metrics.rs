//! Scalar and windowed damage metrics comparing an investigated impedance
//! spectrum against a baseline on the same grid.
//!
//! Two classics are provided: a baseline-normalized root-sum-of-squares
//! deviation (sensitive to amplitude changes) and one minus the magnitude of
//! the Pearson correlation (sensitive to shape changes, blind to affine
//! rescaling). Both default to comparing the real parts, the conventional
//! choice for electromechanical impedance monitoring; magnitude and
//! full-complex variants are available through [`MetricOptions`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FrequencyResponse;

/// Which scalar series to extract from the complex spectra before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignalComponent {
    /// Real parts (the default for impedance monitoring).
    #[default]
    Real,
    /// Magnitudes.
    Magnitude,
    /// Full complex values.
    Complex,
}

/// How the deviation metric normalizes the squared differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RmsdNormalization {
    /// Each squared difference is divided by the squared baseline value at
    /// the same point.
    #[default]
    PerPoint,
    /// The summed squared differences are divided by the summed squared
    /// baseline values.
    Pooled,
}

/// Metric configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricOptions {
    pub component: SignalComponent,
    /// Affects the deviation metric only.
    pub normalization: RmsdNormalization,
}

/// Which metric a windowed series carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowMetric {
    Rmsd,
    Xcorr,
}

/// One window of a windowed metric series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    /// Center of the window span in Hz.
    pub center_hz: f64,
    /// Metric value, or `None` when the metric was not computable on this
    /// window (see `note`).
    pub value: Option<f64>,
    /// Lower edge of the window span in Hz.
    pub f_lo: f64,
    /// Upper edge of the window span in Hz.
    pub f_hi: f64,
    /// True for a trailing window narrower than the requested width.
    pub partial: bool,
    /// Reason the value is missing, when it is.
    pub note: Option<String>,
}

/// Windowed metric values over consecutive, non-overlapping windows covering
/// the full grid band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedMetricSeries {
    pub metric: WindowMetric,
    pub entries: Vec<WindowEntry>,
}

fn check_grids(investigated: &FrequencyResponse, baseline: &FrequencyResponse) -> Result<()> {
    if investigated.grid() != baseline.grid() {
        return Err(Error::Data(
            "investigated and baseline responses are sampled on different grids".into(),
        ));
    }
    Ok(())
}

/// Baseline-normalized deviation on real series:
/// per-point `√(Σ((xᵢ−bᵢ)/bᵢ)²)`, pooled `√(Σ(xᵢ−bᵢ)²/Σbᵢ²)`.
fn rmsd_real(x: &[f64], b: &[f64], norm: RmsdNormalization) -> Result<f64> {
    match norm {
        RmsdNormalization::PerPoint => {
            let mut sum = 0.0;
            for (i, (&xi, &bi)) in x.iter().zip(b).enumerate() {
                if bi == 0.0 {
                    return Err(Error::Data(format!(
                        "degenerate baseline: zero value at window point {i}"
                    )));
                }
                sum += ((xi - bi) / bi).powi(2);
            }
            Ok(sum.sqrt())
        }
        RmsdNormalization::Pooled => {
            let num: f64 = x.iter().zip(b).map(|(&xi, &bi)| (xi - bi).powi(2)).sum();
            let den: f64 = b.iter().map(|&bi| bi * bi).sum();
            if den == 0.0 {
                return Err(Error::Data("degenerate baseline: zero norm".into()));
            }
            Ok((num / den).sqrt())
        }
    }
}

fn rmsd_complex(x: &[Complex64], b: &[Complex64], norm: RmsdNormalization) -> Result<f64> {
    match norm {
        RmsdNormalization::PerPoint => {
            let mut sum = 0.0;
            for (i, (xi, bi)) in x.iter().zip(b).enumerate() {
                let den = bi.norm_sqr();
                if den == 0.0 {
                    return Err(Error::Data(format!(
                        "degenerate baseline: zero value at window point {i}"
                    )));
                }
                sum += (xi - bi).norm_sqr() / den;
            }
            Ok(sum.sqrt())
        }
        RmsdNormalization::Pooled => {
            let num: f64 = x.iter().zip(b).map(|(xi, bi)| (xi - bi).norm_sqr()).sum();
            let den: f64 = b.iter().map(Complex64::norm_sqr).sum();
            if den == 0.0 {
                return Err(Error::Data("degenerate baseline: zero norm".into()));
            }
            Ok((num / den).sqrt())
        }
    }
}

/// One minus `|Pearson correlation|` of two real series.
fn xcorr_real(x: &[f64], b: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Data(
            "correlation needs at least 2 points per window".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sxb = 0.0;
    let mut sxx = 0.0;
    let mut sbb = 0.0;
    for (&xi, &bi) in x.iter().zip(b) {
        let dx = xi - mx;
        let db = bi - mb;
        sxb += dx * db;
        sxx += dx * dx;
        sbb += db * db;
    }
    if sxx == 0.0 || sbb == 0.0 {
        return Err(Error::Data(
            "degenerate series: constant values have no defined correlation".into(),
        ));
    }
    Ok((1.0 - (sxb.abs() / (sxx * sbb).sqrt())).clamp(0.0, 1.0))
}

/// One minus the magnitude of the complex correlation coefficient.
fn xcorr_complex(x: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Data(
            "correlation needs at least 2 points per window".into(),
        ));
    }
    let n = Complex64::new(x.len() as f64, 0.0);
    let mx = x.iter().sum::<Complex64>() / n;
    let mb = b.iter().sum::<Complex64>() / n;
    let mut sxb = Complex64::new(0.0, 0.0);
    let mut sxx = 0.0;
    let mut sbb = 0.0;
    for (xi, bi) in x.iter().zip(b) {
        let dx = xi - mx;
        let db = bi - mb;
        sxb += dx * db.conj();
        sxx += dx.norm_sqr();
        sbb += db.norm_sqr();
    }
    if sxx == 0.0 || sbb == 0.0 {
        return Err(Error::Data(
            "degenerate series: constant values have no defined correlation".into(),
        ));
    }
    Ok((1.0 - sxb.norm() / (sxx * sbb).sqrt()).clamp(0.0, 1.0))
}

fn real_series(fr: &FrequencyResponse, component: SignalComponent) -> Vec<f64> {
    match component {
        SignalComponent::Real => fr.values().iter().map(|v| v.re).collect(),
        SignalComponent::Magnitude => fr.values().iter().map(|v| v.norm()).collect(),
        SignalComponent::Complex => unreachable!("complex series handled separately"),
    }
}

fn rmsd_slice(
    investigated: &FrequencyResponse,
    baseline: &FrequencyResponse,
    range: std::ops::Range<usize>,
    opts: &MetricOptions,
) -> Result<f64> {
    match opts.component {
        SignalComponent::Complex => rmsd_complex(
            &investigated.values()[range.clone()],
            &baseline.values()[range],
            opts.normalization,
        ),
        _ => {
            let x = real_series(investigated, opts.component);
            let b = real_series(baseline, opts.component);
            rmsd_real(&x[range.clone()], &b[range], opts.normalization)
        }
    }
}

fn xcorr_slice(
    investigated: &FrequencyResponse,
    baseline: &FrequencyResponse,
    range: std::ops::Range<usize>,
    opts: &MetricOptions,
) -> Result<f64> {
    match opts.component {
        SignalComponent::Complex => xcorr_complex(
            &investigated.values()[range.clone()],
            &baseline.values()[range],
        ),
        _ => {
            let x = real_series(investigated, opts.component);
            let b = real_series(baseline, opts.component);
            xcorr_real(&x[range.clone()], &b[range])
        }
    }
}

/// Baseline-normalized deviation over the full band with default options
/// (real parts, per-point normalization).
pub fn rmsd(investigated: &FrequencyResponse, baseline: &FrequencyResponse) -> Result<f64> {
    rmsd_with(investigated, baseline, &MetricOptions::default())
}

/// Baseline-normalized deviation over the full band.
pub fn rmsd_with(
    investigated: &FrequencyResponse,
    baseline: &FrequencyResponse,
    opts: &MetricOptions,
) -> Result<f64> {
    check_grids(investigated, baseline)?;
    rmsd_slice(investigated, baseline, 0..baseline.len(), opts)
}

/// Correlation-loss metric (`1 − |Pearson correlation|`) over the full band
/// with default options (real parts).
pub fn xcorr_metric(
    investigated: &FrequencyResponse,
    baseline: &FrequencyResponse,
) -> Result<f64> {
    xcorr_metric_with(investigated, baseline, &MetricOptions::default())
}

/// Correlation-loss metric over the full band.
pub fn xcorr_metric_with(
    investigated: &FrequencyResponse,
    baseline: &FrequencyResponse,
    opts: &MetricOptions,
) -> Result<f64> {
    check_grids(investigated, baseline)?;
    xcorr_slice(investigated, baseline, 0..baseline.len(), opts)
}

/// Computes the chosen metric over consecutive fixed-width windows with
/// default options.
pub fn windowed_metric(
    investigated: &FrequencyResponse,
    baseline: &FrequencyResponse,
    window_width_hz: f64,
    metric: WindowMetric,
) -> Result<WindowedMetricSeries> {
    windowed_metric_with(
        investigated,
        baseline,
        window_width_hz,
        metric,
        &MetricOptions::default(),
    )
}

/// Computes the chosen metric over consecutive fixed-width windows starting
/// at the grid's lowest frequency.
///
/// Windows partition the band `[f_min, f_max]`; a trailing remainder narrower
/// than the requested width is kept and flagged `partial`. Windows where the
/// metric is not computable (no points, or a degenerate series) yield
/// `value: None` with an explanatory note instead of failing the whole
/// series.
pub fn windowed_metric_with(
    investigated: &FrequencyResponse,
    baseline: &FrequencyResponse,
    window_width_hz: f64,
    metric: WindowMetric,
    opts: &MetricOptions,
) -> Result<WindowedMetricSeries> {
    check_grids(investigated, baseline)?;
    if !(window_width_hz.is_finite() && window_width_hz > 0.0) {
        return Err(Error::Config(format!(
            "window width must be positive, got {window_width_hz}"
        )));
    }
    let grid = baseline.grid();
    let f_min = grid.f_min();
    let f_max = grid.f_max();
    let span = f_max - f_min;
    let n_windows = ((span / window_width_hz) - 1e-9).ceil().max(1.0) as usize;

    // assign each grid point to a window: floor((f − f_min)/w), clamped
    let mut bounds = vec![(0usize, 0usize); n_windows]; // index ranges
    let mut starts = vec![usize::MAX; n_windows];
    let mut ends = vec![0usize; n_windows];
    for (i, &f) in grid.frequencies_hz().iter().enumerate() {
        let k = (((f - f_min) / window_width_hz).floor() as usize).min(n_windows - 1);
        if starts[k] == usize::MAX {
            starts[k] = i;
        }
        ends[k] = i + 1;
    }
    for k in 0..n_windows {
        bounds[k] = if starts[k] == usize::MAX {
            (0, 0)
        } else {
            (starts[k], ends[k])
        };
    }

    let mut entries = Vec::with_capacity(n_windows);
    for (k, &(lo_idx, hi_idx)) in bounds.iter().enumerate() {
        let f_lo = f_min + k as f64 * window_width_hz;
        let is_last = k == n_windows - 1;
        let f_hi = if is_last {
            f_max
        } else {
            f_lo + window_width_hz
        };
        let partial = is_last && (f_hi - f_lo) < window_width_hz * (1.0 - 1e-9);
        let (value, note) = if lo_idx == hi_idx {
            (None, Some("no grid points in window".to_string()))
        } else {
            let r = match metric {
                WindowMetric::Rmsd => rmsd_slice(investigated, baseline, lo_idx..hi_idx, opts),
                WindowMetric::Xcorr => xcorr_slice(investigated, baseline, lo_idx..hi_idx, opts),
            };
            match r {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        entries.push(WindowEntry {
            center_hz: 0.5 * (f_lo + f_hi),
            value,
            f_lo,
            f_hi,
            partial,
            note,
        });
    }
    Ok(WindowedMetricSeries { metric, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FrequencyGrid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn constant(grid: &FrequencyGrid, re: f64, im: f64) -> FrequencyResponse {
        FrequencyResponse::new(grid.clone(), vec![Complex64::new(re, im); grid.len()]).unwrap()
    }

    fn ramp(grid: &FrequencyGrid) -> FrequencyResponse {
        let values = grid
            .frequencies_hz()
            .iter()
            .map(|&f| Complex64::new(f, -0.5 * f))
            .collect();
        FrequencyResponse::new(grid.clone(), values).unwrap()
    }

    #[test]
    fn constant_offset_has_known_deviation() {
        // baseline 1, investigated 2, 100 points: per-point terms are all 1,
        // so the metric is √100 = 10; pooled normalization gives 1.
        let grid = FrequencyGrid::linspace(10.0, 109.0, 100).unwrap();
        let zb = constant(&grid, 1.0, 0.0);
        let zk = constant(&grid, 2.0, 0.0);
        assert_relative_eq!(rmsd(&zk, &zb).unwrap(), 10.0, max_relative = 1e-12);
        let pooled = MetricOptions {
            normalization: RmsdNormalization::Pooled,
            ..Default::default()
        };
        assert_relative_eq!(rmsd_with(&zk, &zb, &pooled).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn identical_inputs_score_zero() {
        let grid = FrequencyGrid::linspace(10.0, 200.0, 64).unwrap();
        let z = ramp(&grid);
        assert_eq!(rmsd(&z, &z).unwrap(), 0.0);
        assert_abs_diff_eq!(xcorr_metric(&z, &z).unwrap(), 0.0, epsilon = 1e-15);
        for m in [WindowMetric::Rmsd, WindowMetric::Xcorr] {
            let series = windowed_metric(&z, &z, 50.0, m).unwrap();
            for e in &series.entries {
                assert!(e.value.unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn deviation_is_asymmetric_in_its_arguments() {
        let grid = FrequencyGrid::linspace(10.0, 109.0, 100).unwrap();
        let zb = constant(&grid, 1.0, 0.0);
        let zk = constant(&grid, 2.0, 0.0);
        let a = rmsd(&zk, &zb).unwrap(); // (2−1)/1 per point
        let b = rmsd(&zb, &zk).unwrap(); // (1−2)/2 per point
        assert_relative_eq!(a, 10.0, max_relative = 1e-12);
        assert_relative_eq!(b, 5.0, max_relative = 1e-12);
    }

    #[test]
    fn correlation_metric_ignores_affine_rescaling() {
        let grid = FrequencyGrid::linspace(10.0, 200.0, 64).unwrap();
        let z = ramp(&grid);
        let scaled = FrequencyResponse::new(
            grid.clone(),
            z.values()
                .iter()
                .map(|v| Complex64::new(3.0 * v.re + 7.0, v.im))
                .collect(),
        )
        .unwrap();
        assert_abs_diff_eq!(xcorr_metric(&scaled, &z).unwrap(), 0.0, epsilon = 1e-12);
        // negative scale flips the sign of the correlation, not the metric
        let negated = FrequencyResponse::new(
            grid.clone(),
            z.values()
                .iter()
                .map(|v| Complex64::new(-2.0 * v.re, v.im))
                .collect(),
        )
        .unwrap();
        assert_abs_diff_eq!(xcorr_metric(&negated, &z).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_component_sees_phase_rotation_that_real_part_misses() {
        let grid = FrequencyGrid::linspace(10.0, 200.0, 64).unwrap();
        let z = ramp(&grid);
        // a global phase rotation is a complex linear map: complex
        // correlation stays perfect while the real parts decorrelate
        let rot = Complex64::from_polar(1.0, 1.3);
        let rotated = FrequencyResponse::new(
            grid.clone(),
            z.values().iter().map(|v| v * rot).collect(),
        )
        .unwrap();
        let complex_opts = MetricOptions {
            component: SignalComponent::Complex,
            ..Default::default()
        };
        assert_abs_diff_eq!(
            xcorr_metric_with(&rotated, &z, &complex_opts).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        // magnitude component also sees no change
        let mag_opts = MetricOptions {
            component: SignalComponent::Magnitude,
            ..Default::default()
        };
        assert_abs_diff_eq!(
            xcorr_metric_with(&rotated, &z, &mag_opts).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let grid = FrequencyGrid::linspace(10.0, 100.0, 10).unwrap();
        let zeros = constant(&grid, 0.0, 0.0);
        let ones = constant(&grid, 1.0, 0.0);
        assert!(rmsd(&ones, &zeros).is_err());
        // constant series: correlation undefined
        assert!(xcorr_metric(&ones, &ones).is_err());
        // mismatched grids
        let other = FrequencyGrid::linspace(10.0, 100.0, 11).unwrap();
        let z2 = constant(&other, 1.0, 0.0);
        assert!(rmsd(&z2, &ones).is_err());
        // bad window width
        assert!(windowed_metric(&ones, &ones, 0.0, WindowMetric::Rmsd).is_err());
    }

    #[test]
    fn windows_partition_the_band_with_a_flagged_remainder() {
        let grid = FrequencyGrid::linspace(100.0, 450.0, 351).unwrap();
        let z = ramp(&grid);
        let series = windowed_metric(&z, &z, 100.0, WindowMetric::Rmsd).unwrap();
        assert_eq!(series.entries.len(), 4);
        let spans: Vec<(f64, f64, bool)> = series
            .entries
            .iter()
            .map(|e| (e.f_lo, e.f_hi, e.partial))
            .collect();
        assert_eq!(
            spans,
            vec![
                (100.0, 200.0, false),
                (200.0, 300.0, false),
                (300.0, 400.0, false),
                (400.0, 450.0, true)
            ]
        );
        assert_abs_diff_eq!(series.entries[3].center_hz, 425.0, epsilon = 1e-9);
        // contiguous coverage
        for w in series.entries.windows(2) {
            assert_abs_diff_eq!(w[0].f_hi, w[1].f_lo, epsilon = 1e-9);
        }
        // exact division leaves no partial window
        let series = windowed_metric(&z, &z, 175.0, WindowMetric::Rmsd).unwrap();
        assert_eq!(series.entries.len(), 2);
        assert!(!series.entries[1].partial);
        assert_eq!(series.entries[1].f_hi, 450.0);
    }

    #[test]
    fn uncomputable_windows_are_flagged_not_fatal() {
        // a grid with a 150–390 Hz hole: the middle windows are empty
        let mut freqs: Vec<f64> = (0..50).map(|i| 100.0 + i as f64).collect();
        freqs.extend((0..50).map(|i| 400.0 + i as f64));
        let grid = FrequencyGrid::new(freqs).unwrap();
        let z = ramp(&grid);
        let series = windowed_metric(&z, &z, 100.0, WindowMetric::Xcorr).unwrap();
        assert_eq!(series.entries.len(), 4); // spans 100–449 → 4 windows of 100
        assert!(series.entries[0].value.is_some());
        assert!(series.entries[1].value.is_none());
        assert!(series.entries[1].note.as_deref().unwrap().contains("no grid points"));
        assert!(series.entries[2].value.is_none());
        assert!(series.entries[3].value.is_some());
        // single-point window: deviation works, correlation is flagged
        let mut freqs: Vec<f64> = (0..50).map(|i| 100.0 + i as f64).collect();
        freqs.push(220.0);
        let grid = FrequencyGrid::new(freqs).unwrap();
        let z = ramp(&grid);
        let series = windowed_metric(&z, &z, 100.0, WindowMetric::Xcorr).unwrap();
        assert!(series.entries[1].value.is_none());
        assert!(series.entries[1].note.is_some());
        let series = windowed_metric(&z, &z, 100.0, WindowMetric::Rmsd).unwrap();
        assert_eq!(series.entries[1].value, Some(0.0));
    }
}
