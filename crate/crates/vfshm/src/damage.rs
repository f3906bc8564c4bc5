//! Modal-comparison damage assessment: pairing modes between a baseline and
//! an investigated measurement, thresholding the relative shifts, and
//! summarizing the verdict.
//!
//! Mode pairing is an assignment problem, not an index zip: damage can split,
//! merge, or shift modes, and index pairing would silently misalign every
//! mode after the first discrepancy. The matcher maximizes the number of
//! pairs within a frequency tolerance and, among those, minimizes the total
//! relative frequency distance; because both sets are sorted, the optimal
//! assignment is non-crossing and a sequence alignment finds it exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ModalParameters;

/// Default pairing tolerance (percent relative frequency distance). Wide on
/// purpose: damage-induced softening can move a frequency by double-digit
/// percentages, and an over-tight tolerance would report those modes as
/// unmatched instead of shifted.
pub const DEFAULT_MATCH_TOL_PCT: f64 = 25.0;

/// One row of the mode-pairing table. A fully matched row has both sides and
/// both deltas; an unmatched mode appears with its side populated and no
/// deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMatch {
    /// Baseline `(frequency_hz, damping_ratio)`, absent if this row is an
    /// unmatched investigated mode.
    pub baseline: Option<(f64, f64)>,
    /// Investigated `(frequency_hz, damping_ratio)`, absent if this row is an
    /// unmatched baseline mode.
    pub investigative: Option<(f64, f64)>,
    /// `100·(f_inv − f_base)/f_base`, present only for matched rows.
    pub delta_freq_pct: Option<f64>,
    /// `100·(ζ_inv − ζ_base)/ζ_base`, present for matched rows with non-zero
    /// baseline damping.
    pub delta_damp_pct: Option<f64>,
}

impl ModeMatch {
    /// True when both sides are present.
    pub fn is_matched(&self) -> bool {
        self.baseline.is_some() && self.investigative.is_some()
    }
}

/// Assessment verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Undamaged,
    Damaged,
}

/// Direction of the matched frequency shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionHint {
    /// Every matched frequency moved down.
    Softening,
    /// Every matched frequency moved up.
    Stiffening,
    /// Shifts in both directions.
    Mixed,
    /// No matched modes, or no frequency moved at all.
    None,
}

/// Classification thresholds in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Threshold on `|delta_freq_pct|`.
    pub freq_pct: f64,
    /// Threshold on `|delta_damp_pct|`.
    pub damp_pct: f64,
}

impl Default for Thresholds {
    /// 0.1% on frequency, 10% on damping — tight enough to catch softening
    /// well below visible spectrum changes, loose enough to pass repeat
    /// measurements of a healthy structure.
    fn default() -> Self {
        Self {
            freq_pct: 0.1,
            damp_pct: 10.0,
        }
    }
}

/// Full-band metric values carried alongside the modal verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub rmsd: f64,
    pub xcorr: f64,
}

/// Observed spread of a control (known-healthy repeat) measurement, recorded
/// when thresholds were derived from one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBand {
    pub max_delta_freq_pct: f64,
    pub max_delta_damp_pct: f64,
}

/// The damage-assessment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageReport {
    /// Mode pairing table, in ascending frequency order.
    pub matches: Vec<ModeMatch>,
    pub classification: Classification,
    /// Mean of the matched frequency deltas (0 when nothing matched).
    pub mean_delta_freq_pct: f64,
    /// Mean of the available matched damping deltas (0 when none).
    pub mean_delta_damp_pct: f64,
    pub direction_hint: DirectionHint,
    /// Interpretation caveat attached to every direction hint.
    pub direction_caveat: String,
    /// Full-band metric values, when the caller computed them.
    pub metric_values: Option<MetricValues>,
    /// Thresholds the classification used.
    pub thresholds: Thresholds,
    /// The decision rule, spelled out for the record.
    pub classification_rule: String,
    /// Baseline modes with no investigated counterpart.
    pub unmatched_baseline: usize,
    /// Investigated modes with no baseline counterpart.
    pub unmatched_investigative: usize,
    /// Control-measurement spread, when thresholds came from a control.
    pub control_band: Option<ControlBand>,
}

/// Thresholds derived from a control measurement, with their provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlThresholds {
    pub thresholds: Thresholds,
    pub control_band: ControlBand,
}

/// Extra assessment knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessOptions {
    /// Pairing tolerance in percent relative frequency distance.
    pub match_tol_pct: f64,
    /// Control spread to record in the report.
    pub control_band: Option<ControlBand>,
}

impl Default for AssessOptions {
    fn default() -> Self {
        Self {
            match_tol_pct: DEFAULT_MATCH_TOL_PCT,
            control_band: None,
        }
    }
}

const DIRECTION_CAVEAT: &str = "a uniform frequency decrease can reflect stiffness loss or mass \
     gain (and an increase the reverse); the direction hint does not identify the physical cause";

/// Pairs baseline and investigated modes.
///
/// Both mode lists are taken in ascending frequency order. A pair is
/// feasible when the relative frequency distance `100·|f_i − f_b|/f_b` is at
/// most `match_tol_pct`. Among assignments maximizing the number of pairs,
/// the one with the smallest total relative distance is returned; rows come
/// out in frequency order with unmatched modes interleaved.
pub fn match_modes(
    base: &ModalParameters,
    inv: &ModalParameters,
    match_tol_pct: f64,
) -> Vec<ModeMatch> {
    let b = &base.modes;
    let v = &inv.modes;
    let nb = b.len();
    let ni = v.len();

    // sequence alignment over the sorted mode lists:
    // dp[i][j] = best (pairs, total distance, action) for suffixes b[i..], v[j..]
    const ACT_MATCH: u8 = 0;
    const ACT_SKIP_BASE: u8 = 1;
    const ACT_SKIP_INV: u8 = 2;
    const ACT_DONE: u8 = 3;
    let mut dp = vec![vec![(0usize, 0.0f64, ACT_DONE); ni + 1]; nb + 1];
    for i in (0..=nb).rev() {
        for j in (0..=ni).rev() {
            if i == nb && j == ni {
                continue;
            }
            let mut best: Option<(usize, f64, u8)> = None;
            let mut consider = |cand: (usize, f64, u8)| {
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        cand.0 > cur.0
                            || (cand.0 == cur.0
                                && (cand.1 < cur.1 || (cand.1 == cur.1 && cand.2 < cur.2)))
                    }
                };
                if better {
                    best = Some(cand);
                }
            };
            if i < nb && j < ni {
                let dist = 100.0 * (v[j].frequency_hz - b[i].frequency_hz).abs()
                    / b[i].frequency_hz;
                if dist <= match_tol_pct {
                    let nxt = dp[i + 1][j + 1];
                    consider((nxt.0 + 1, nxt.1 + dist, ACT_MATCH));
                }
            }
            if i < nb {
                let nxt = dp[i + 1][j];
                consider((nxt.0, nxt.1, ACT_SKIP_BASE));
            }
            if j < ni {
                let nxt = dp[i][j + 1];
                consider((nxt.0, nxt.1, ACT_SKIP_INV));
            }
            dp[i][j] = best.expect("at least one action is always available");
        }
    }

    let mut rows = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < nb || j < ni {
        match dp[i][j].2 {
            ACT_MATCH => {
                let (fb, zb) = (b[i].frequency_hz, b[i].damping_ratio);
                let (fi, zi) = (v[j].frequency_hz, v[j].damping_ratio);
                rows.push(ModeMatch {
                    baseline: Some((fb, zb)),
                    investigative: Some((fi, zi)),
                    delta_freq_pct: Some(100.0 * (fi - fb) / fb),
                    delta_damp_pct: if zb > 0.0 {
                        Some(100.0 * (zi - zb) / zb)
                    } else {
                        None
                    },
                });
                i += 1;
                j += 1;
            }
            ACT_SKIP_BASE => {
                rows.push(ModeMatch {
                    baseline: Some((b[i].frequency_hz, b[i].damping_ratio)),
                    investigative: None,
                    delta_freq_pct: None,
                    delta_damp_pct: None,
                });
                i += 1;
            }
            ACT_SKIP_INV => {
                rows.push(ModeMatch {
                    baseline: None,
                    investigative: Some((v[j].frequency_hz, v[j].damping_ratio)),
                    delta_freq_pct: None,
                    delta_damp_pct: None,
                });
                j += 1;
            }
            _ => unreachable!("walk ends exactly at (nb, ni)"),
        }
    }
    rows
}

/// Assesses the investigated modal set against the baseline with default
/// pairing options.
pub fn assess(
    base: &ModalParameters,
    inv: &ModalParameters,
    thresholds: Thresholds,
    metrics_in: Option<MetricValues>,
) -> DamageReport {
    assess_with(base, inv, thresholds, metrics_in, &AssessOptions::default())
}

/// Assesses the investigated modal set against the baseline.
///
/// Classification: damaged if and only if any matched delta exceeds its
/// threshold in magnitude (strictly) or any mode on either side is
/// unmatched. The direction hint summarizes matched frequency shifts only;
/// it is a screening aid, not a physical diagnosis (see `direction_caveat`).
pub fn assess_with(
    base: &ModalParameters,
    inv: &ModalParameters,
    thresholds: Thresholds,
    metrics_in: Option<MetricValues>,
    options: &AssessOptions,
) -> DamageReport {
    let matches = match_modes(base, inv, options.match_tol_pct);
    let freq_deltas: Vec<f64> = matches.iter().filter_map(|m| m.delta_freq_pct).collect();
    let damp_deltas: Vec<f64> = matches.iter().filter_map(|m| m.delta_damp_pct).collect();
    let unmatched_baseline = matches
        .iter()
        .filter(|m| m.baseline.is_some() && m.investigative.is_none())
        .count();
    let unmatched_investigative = matches
        .iter()
        .filter(|m| m.baseline.is_none() && m.investigative.is_some())
        .count();

    let exceeded = freq_deltas
        .iter()
        .any(|d| d.abs() > thresholds.freq_pct)
        || damp_deltas.iter().any(|d| d.abs() > thresholds.damp_pct);
    let classification = if exceeded || unmatched_baseline > 0 || unmatched_investigative > 0 {
        Classification::Damaged
    } else {
        Classification::Undamaged
    };

    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let direction_hint = if freq_deltas.is_empty() || freq_deltas.iter().all(|&d| d == 0.0) {
        DirectionHint::None
    } else if freq_deltas.iter().all(|&d| d < 0.0) {
        DirectionHint::Softening
    } else if freq_deltas.iter().all(|&d| d > 0.0) {
        DirectionHint::Stiffening
    } else {
        DirectionHint::Mixed
    };

    DamageReport {
        matches,
        classification,
        mean_delta_freq_pct: mean(&freq_deltas),
        mean_delta_damp_pct: mean(&damp_deltas),
        direction_hint,
        direction_caveat: DIRECTION_CAVEAT.to_string(),
        metric_values: metrics_in,
        thresholds,
        classification_rule: format!(
            "damaged iff any |delta_freq_pct| > {}, any |delta_damp_pct| > {}, \
             or any mode is unmatched",
            thresholds.freq_pct, thresholds.damp_pct
        ),
        unmatched_baseline,
        unmatched_investigative,
        control_band: options.control_band,
    }
}

/// Derives classification thresholds from a control measurement — a repeat
/// measurement of the known-healthy structure — as three times the largest
/// relative shift the control exhibited against the baseline.
///
/// Errors if no control mode matches the baseline (the control cannot
/// calibrate anything it does not share with the baseline).
pub fn thresholds_from_control(
    base: &ModalParameters,
    control: &ModalParameters,
    match_tol_pct: f64,
) -> Result<ControlThresholds> {
    let matches = match_modes(base, control, match_tol_pct);
    let freq_max = matches
        .iter()
        .filter_map(|m| m.delta_freq_pct)
        .map(f64::abs)
        .fold(f64::NAN, f64::max);
    if freq_max.is_nan() {
        return Err(Error::Data(
            "control measurement shares no modes with the baseline".into(),
        ));
    }
    let damp_max = matches
        .iter()
        .filter_map(|m| m.delta_damp_pct)
        .map(f64::abs)
        .fold(0.0, f64::max);
    Ok(ControlThresholds {
        thresholds: Thresholds {
            freq_pct: 3.0 * freq_max,
            damp_pct: 3.0 * damp_max,
        },
        control_band: ControlBand {
            max_delta_freq_pct: freq_max,
            max_delta_damp_pct: damp_max,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn modal(pairs: &[(f64, f64)]) -> ModalParameters {
        ModalParameters::from_freq_damping(pairs).unwrap()
    }

    /// Modal parameters of a healthy uniform chain and a softened variant of
    /// it (first frequency down 18.5%, all others down as well).
    const HEALTHY: [(f64, f64); 5] = [
        (116.51, 9.15e-5),
        (225.08, 1.77e-4),
        (318.31, 2.50e-4),
        (389.85, 3.06e-4),
        (434.82, 3.42e-4),
    ];
    const SOFTENED: [(f64, f64); 5] = [
        (94.91, 1.66e-4),
        (218.18, 1.92e-4),
        (308.39, 2.87e-4),
        (367.19, 3.59e-4),
        (426.69, 3.50e-4),
    ];

    #[test]
    fn identical_sets_are_undamaged() {
        let m = modal(&HEALTHY);
        let report = assess(&m, &m, Thresholds::default(), None);
        assert_eq!(report.classification, Classification::Undamaged);
        assert_eq!(report.direction_hint, DirectionHint::None);
        assert_eq!(report.mean_delta_freq_pct, 0.0);
        assert_eq!(report.mean_delta_damp_pct, 0.0);
        assert_eq!(report.matches.len(), 5);
        assert!(report.matches.iter().all(ModeMatch::is_matched));
        assert_eq!(report.unmatched_baseline, 0);
        assert_eq!(report.unmatched_investigative, 0);
        assert!(!report.classification_rule.is_empty());
        assert!(!report.direction_caveat.is_empty());
    }

    #[test]
    fn uniform_softening_is_flagged_with_direction() {
        let base = modal(&HEALTHY);
        let inv = modal(&SOFTENED);
        let report = assess(
            &base,
            &inv,
            Thresholds {
                freq_pct: 0.5,
                damp_pct: 10.0,
            },
            None,
        );
        assert_eq!(report.classification, Classification::Damaged);
        assert_eq!(report.direction_hint, DirectionHint::Softening);
        assert_eq!(report.matches.len(), 5);
        assert!(report.matches.iter().all(ModeMatch::is_matched));
        let first = report.matches[0].delta_freq_pct.unwrap();
        // 116.51 → 94.91 is −18.54%
        assert_abs_diff_eq!(first, -18.54, epsilon = 0.01);
        assert!(report
            .matches
            .iter()
            .all(|m| m.delta_freq_pct.unwrap() < 0.0));
        assert!(report.mean_delta_freq_pct < 0.0);
    }

    #[test]
    fn uniform_stiffening_with_damping_growth() {
        let base = modal(&HEALTHY);
        let raised: Vec<(f64, f64)> = HEALTHY
            .iter()
            .map(|&(f, z)| (f * 1.001, z * 1.15))
            .collect();
        let inv = modal(&raised);
        let report = assess(
            &base,
            &inv,
            Thresholds {
                freq_pct: 0.05,
                damp_pct: 5.0,
            },
            None,
        );
        assert_eq!(report.classification, Classification::Damaged);
        assert_eq!(report.direction_hint, DirectionHint::Stiffening);
        assert_relative_eq!(report.mean_delta_freq_pct, 0.1, max_relative = 1e-9);
        assert_relative_eq!(report.mean_delta_damp_pct, 15.0, max_relative = 1e-9);
    }

    #[test]
    fn a_mode_split_leaves_an_unmatched_mode_and_flags_damage() {
        let base = modal(&[(100.0, 1e-4), (200.0, 2e-4), (300.0, 3e-4)]);
        let inv = modal(&[(99.0, 1e-4), (196.0, 2e-4), (204.0, 2e-4), (299.0, 3e-4)]);
        let report = assess(&base, &inv, Thresholds { freq_pct: 5.0, damp_pct: 50.0 }, None);
        let matched = report.matches.iter().filter(|m| m.is_matched()).count();
        assert_eq!(matched, 3);
        assert_eq!(report.unmatched_investigative, 1);
        assert_eq!(report.unmatched_baseline, 0);
        // unmatched mode forces the damaged verdict even under loose deltas
        assert_eq!(report.classification, Classification::Damaged);
        // rows stay in frequency order and never cross
        let row_freqs: Vec<f64> = report
            .matches
            .iter()
            .map(|m| m.investigative.or(m.baseline).unwrap().0)
            .collect();
        let mut sorted = row_freqs.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(row_freqs, sorted);
    }

    #[test]
    fn matching_prefers_the_nearest_candidate() {
        let base = modal(&[(100.0, 1e-4)]);
        let inv = modal(&[(99.0, 1e-4), (101.5, 1e-4)]);
        let rows = match_modes(&base, &inv, 5.0);
        let matched: Vec<&ModeMatch> = rows.iter().filter(|m| m.is_matched()).collect();
        assert_eq!(matched.len(), 1);
        assert_relative_eq!(matched[0].investigative.unwrap().0, 99.0, max_relative = 1e-12);
    }

    #[test]
    fn matches_are_maximized_before_distance_is_minimized() {
        // distance-greedy pairing would grab 101↔100.9 (0.099%) first and
        // strand 100 (100↔101.8 is out of tolerance), ending with one pair;
        // the optimal assignment takes 100↔100.9 and 101↔101.8 for two
        let base = modal(&[(100.0, 1e-4), (101.0, 1e-4)]);
        let inv = modal(&[(100.9, 1e-4), (101.8, 1e-4)]);
        let rows = match_modes(&base, &inv, 1.0);
        let matched: Vec<&ModeMatch> = rows.iter().filter(|m| m.is_matched()).collect();
        assert_eq!(matched.len(), 2);
        assert_relative_eq!(matched[0].investigative.unwrap().0, 100.9, max_relative = 1e-12);
        assert_relative_eq!(matched[1].investigative.unwrap().0, 101.8, max_relative = 1e-12);
        // a lone investigated mode between two baseline modes pairs with the
        // nearer one, and the other baseline stays unmatched
        let base = modal(&[(100.0, 1e-4), (110.0, 1e-4)]);
        let inv = modal(&[(108.0, 1e-4)]);
        let rows = match_modes(&base, &inv, 10.0);
        let m: Vec<_> = rows.iter().filter(|r| r.is_matched()).collect();
        assert_eq!(m.len(), 1);
        assert_relative_eq!(m[0].baseline.unwrap().0, 110.0, max_relative = 1e-12);
    }

    #[test]
    fn classification_is_monotone_in_thresholds() {
        let base = modal(&HEALTHY);
        let inv = modal(&SOFTENED);
        let tight = assess(&base, &inv, Thresholds { freq_pct: 0.1, damp_pct: 10.0 }, None);
        let loose = assess(&base, &inv, Thresholds { freq_pct: 50.0, damp_pct: 500.0 }, None);
        assert_eq!(tight.classification, Classification::Damaged);
        // all modes matched and all deltas inside the loose thresholds
        assert_eq!(loose.classification, Classification::Undamaged);
    }

    #[test]
    fn relative_deltas_are_scale_free() {
        let base = modal(&HEALTHY);
        let inv = modal(&SOFTENED);
        let r1 = assess(&base, &inv, Thresholds::default(), None);
        let kappa = 3.7;
        let scale = |set: &[(f64, f64)]| -> ModalParameters {
            modal(&set.iter().map(|&(f, z)| (f * kappa, z)).collect::<Vec<_>>())
        };
        let r2 = assess(&scale(&HEALTHY), &scale(&SOFTENED), Thresholds::default(), None);
        assert_eq!(r1.direction_hint, r2.direction_hint);
        for (a, b) in r1.matches.iter().zip(&r2.matches) {
            assert_relative_eq!(
                a.delta_freq_pct.unwrap(),
                b.delta_freq_pct.unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn control_calibrates_thresholds() {
        let base = modal(&HEALTHY);
        let control: Vec<(f64, f64)> = HEALTHY
            .iter()
            .map(|&(f, z)| (f * 1.0005, z * 1.02))
            .collect();
        let ct = thresholds_from_control(&base, &modal(&control), DEFAULT_MATCH_TOL_PCT).unwrap();
        assert_relative_eq!(ct.thresholds.freq_pct, 0.15, max_relative = 1e-6);
        assert_relative_eq!(ct.thresholds.damp_pct, 6.0, max_relative = 1e-6);
        assert_relative_eq!(ct.control_band.max_delta_freq_pct, 0.05, max_relative = 1e-6);
        // a disjoint control cannot calibrate
        let disjoint = modal(&[(5000.0, 1e-4)]);
        assert!(thresholds_from_control(&base, &disjoint, DEFAULT_MATCH_TOL_PCT).is_err());
    }

    #[test]
    fn report_serializes_round_trip() {
        let base = modal(&HEALTHY);
        let inv = modal(&SOFTENED);
        let report = assess(
            &base,
            &inv,
            Thresholds::default(),
            Some(MetricValues { rmsd: 12.5, xcorr: 0.3 }),
        );
        let json = serde_json::to_string(&report).unwrap();
        let back: DamageReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }
}
