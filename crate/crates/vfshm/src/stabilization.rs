//! Stabilization-diagram order sweeps: fitting the same response at a range
//! of model orders and tracking which poles persist.
//!
//! Physical poles reappear at (nearly) the same frequency and damping as the
//! model order grows, while noise-fitting poles wander. The sweep chains
//! poles across adjacent orders — nearest relative frequency first, damping
//! agreement as the admission check — and calls a chain *stable* once it
//! persists through enough consecutive orders.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ModalParameters, Mode, RationalModel};
use crate::types::FrequencyResponse;
use crate::vector_fitting::{vector_fit, VfOptions};

/// Order-sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Lowest model order.
    pub n_min: usize,
    /// Highest model order (inclusive).
    pub n_max: usize,
    /// Order increment.
    pub n_step: usize,
    /// Relative frequency tolerance for chaining poles across orders.
    pub freq_tol: f64,
    /// Relative damping-ratio tolerance for chaining.
    pub damp_tol: f64,
    /// Minimum number of consecutive orders a chain must span to count as
    /// stable.
    pub min_persistence: usize,
}

impl SweepConfig {
    /// Sweep `n_min..=n_max` in steps of 2 with the standard tolerances:
    /// 0.1% on frequency, 5% on damping, three consecutive orders.
    pub fn new(n_min: usize, n_max: usize) -> Self {
        Self {
            n_min,
            n_max,
            n_step: 2,
            freq_tol: 1e-3,
            damp_tol: 0.05,
            min_persistence: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_min == 0 {
            return Err(Error::Config("n_min must be at least 1".into()));
        }
        if self.n_max < self.n_min {
            return Err(Error::Config(format!(
                "n_max ({}) must not be below n_min ({})",
                self.n_max, self.n_min
            )));
        }
        if self.n_step == 0 {
            return Err(Error::Config("n_step must be at least 1".into()));
        }
        for (name, v) in [("freq_tol", self.freq_tol), ("damp_tol", self.damp_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.min_persistence == 0 {
            return Err(Error::Config("min_persistence must be at least 1".into()));
        }
        Ok(())
    }

    /// The order sequence this configuration sweeps.
    pub fn orders(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.n_step).collect()
    }
}

/// One pole observed at one model order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleObservation {
    /// Model order the pole was fitted at.
    pub order: usize,
    /// Positive-imaginary pole in rad/s.
    pub pole: Complex64,
}

/// A chain of poles tracked across orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleCluster {
    /// The member from the highest order in the chain.
    pub representative_pole: Complex64,
    /// Members ordered by ascending model order; every member lies within
    /// the chaining tolerances of the representative.
    pub members: Vec<PoleObservation>,
    /// Whether the chain persisted through at least `min_persistence`
    /// consecutive orders.
    pub stable: bool,
}

/// One successful fit of the sweep.
#[derive(Debug, Clone)]
pub struct OrderFit {
    /// Model order.
    pub order: usize,
    /// The fitted model.
    pub model: RationalModel,
    /// Weighted RMS error of that fit.
    pub final_rms_error: f64,
}

/// Outcome of an order sweep.
#[derive(Debug, Clone)]
pub struct StabilizationResult {
    /// Pole chains, sorted by ascending representative frequency.
    pub clusters: Vec<PoleCluster>,
    /// Every model that fitted successfully, in sweep order.
    pub per_order_models: Vec<OrderFit>,
    /// Orders whose fit failed, with the failure message.
    pub failed_orders: Vec<(usize, String)>,
    /// The configuration the sweep ran with.
    pub config: SweepConfig,
}

/// A pole chain under construction.
struct Chain {
    members: Vec<PoleObservation>,
    /// Sweep position (index into the order sequence) of the last member.
    last_pos: usize,
    freq_hz: f64,
    damping: f64,
    open: bool,
}

fn mode_key(pole: Complex64) -> (f64, f64) {
    let mag = pole.norm();
    (mag / (2.0 * std::f64::consts::PI), -pole.re / mag)
}

/// Fits the response at every order in the sweep and chains the resulting
/// poles across adjacent orders.
///
/// Only oscillatory (complex) poles participate; real poles carry no modal
/// frequency. A failed order is recorded, skipped, and closes all open
/// chains — persistence counts genuinely consecutive observations. The sweep
/// errors only if every order fails.
pub fn order_sweep(
    response: &FrequencyResponse,
    config: &SweepConfig,
    base_options: &VfOptions,
) -> Result<StabilizationResult> {
    config.validate()?;
    let orders = config.orders();
    let mut per_order_models = Vec::new();
    let mut failed_orders: Vec<(usize, String)> = Vec::new();
    let mut chains: Vec<Chain> = Vec::new();

    for (pos, &order) in orders.iter().enumerate() {
        let mut opts = base_options.clone();
        opts.order = order;
        let (model, diag) = match vector_fit(response, &opts) {
            Ok(ok) => ok,
            Err(e) => {
                failed_orders.push((order, e.to_string()));
                for chain in chains.iter_mut() {
                    chain.open = false;
                }
                continue;
            }
        };

        // oscillatory poles of this order, ascending frequency
        let mut poles: Vec<Complex64> = model
            .poles
            .iter()
            .copied()
            .filter(|p| p.im > 0.0)
            .collect();
        poles.sort_by(|a, b| a.norm().total_cmp(&b.norm()));

        // candidate edges between open chains from the previous sweep
        // position and this order's poles, feasible when both tolerances
        // hold; greedy by (frequency distance, damping distance)
        let mut edges: Vec<(f64, f64, usize, usize)> = Vec::new();
        for (ci, chain) in chains.iter().enumerate() {
            if !chain.open || chain.last_pos + 1 != pos {
                continue;
            }
            for (pi, &p) in poles.iter().enumerate() {
                let (f, z) = mode_key(p);
                let fd = (f - chain.freq_hz).abs() / chain.freq_hz;
                if fd > config.freq_tol {
                    continue;
                }
                let zd = if chain.damping > 0.0 {
                    (z - chain.damping).abs() / chain.damping
                } else {
                    (z - chain.damping).abs()
                };
                if zd > config.damp_tol {
                    continue;
                }
                edges.push((fd, zd, ci, pi));
            }
        }
        edges.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        });
        let mut chain_taken = vec![false; chains.len()];
        let mut pole_taken = vec![false; poles.len()];
        for &(_, _, ci, pi) in &edges {
            if chain_taken[ci] || pole_taken[pi] {
                continue;
            }
            chain_taken[ci] = true;
            pole_taken[pi] = true;
            let p = poles[pi];
            let (f, z) = mode_key(p);
            let chain = &mut chains[ci];
            chain.members.push(PoleObservation { order, pole: p });
            chain.last_pos = pos;
            chain.freq_hz = f;
            chain.damping = z;
        }
        // chains not extended at this order are finished
        for (ci, chain) in chains.iter_mut().enumerate() {
            if chain.open && chain.last_pos != pos && !chain_taken[ci] {
                chain.open = false;
            }
        }
        // unmatched poles start new chains
        for (pi, &p) in poles.iter().enumerate() {
            if pole_taken[pi] {
                continue;
            }
            let (f, z) = mode_key(p);
            chains.push(Chain {
                members: vec![PoleObservation { order, pole: p }],
                last_pos: pos,
                freq_hz: f,
                damping: z,
                open: true,
            });
        }

        per_order_models.push(OrderFit {
            order,
            model,
            final_rms_error: diag.final_rms_error,
        });
    }

    if per_order_models.is_empty() {
        let detail = failed_orders
            .first()
            .map(|(n, msg)| format!("first failure at order {n}: {msg}"))
            .unwrap_or_default();
        return Err(Error::Numeric(format!(
            "order sweep failed at every order; {detail}"
        )));
    }

    let mut clusters = Vec::new();
    for chain in chains {
        let rep = chain
            .members
            .last()
            .expect("chains are created non-empty")
            .pole;
        let (rep_f, rep_z) = mode_key(rep);
        // keep the longest suffix in which every member satisfies the
        // tolerances against the representative; chaining admits members
        // stepwise, so cumulative drift can exceed the per-step tolerance
        let violates = |obs: &PoleObservation| {
            let (f, z) = mode_key(obs.pole);
            let fd = (f - rep_f).abs() / rep_f;
            let zd = if rep_z > 0.0 {
                (z - rep_z).abs() / rep_z
            } else {
                (z - rep_z).abs()
            };
            fd > config.freq_tol || zd > config.damp_tol
        };
        let members: Vec<PoleObservation> = match chain.members.iter().rposition(violates) {
            Some(cut) => chain.members[cut + 1..].to_vec(),
            None => chain.members,
        };
        let stable = members.len() >= config.min_persistence;
        clusters.push(PoleCluster {
            representative_pole: rep,
            members,
            stable,
        });
    }
    clusters.sort_by(|a, b| {
        a.representative_pole
            .norm()
            .total_cmp(&b.representative_pole.norm())
    });

    Ok(StabilizationResult {
        clusters,
        per_order_models,
        failed_orders,
        config: config.clone(),
    })
}

/// Extracts the modal parameters of the stable clusters, de-duplicating
/// representatives that fall within the chaining frequency tolerance of each
/// other (the longer chain wins). An empty result is legitimate: it means no
/// pole stabilized.
pub fn stable_modal_set(result: &StabilizationResult) -> Result<ModalParameters> {
    let mut stable: Vec<&PoleCluster> = result.clusters.iter().filter(|c| c.stable).collect();
    stable.sort_by(|a, b| {
        a.representative_pole
            .norm()
            .total_cmp(&b.representative_pole.norm())
    });
    let mut kept: Vec<&PoleCluster> = Vec::new();
    for c in stable {
        match kept.last() {
            Some(prev) => {
                let (fp, _) = mode_key(prev.representative_pole);
                let (fc, _) = mode_key(c.representative_pole);
                if (fc - fp).abs() / fp <= result.config.freq_tol {
                    if c.members.len() > prev.members.len() {
                        *kept.last_mut().unwrap() = c;
                    }
                } else {
                    kept.push(c);
                }
            }
            None => kept.push(c),
        }
    }
    let modes = kept
        .iter()
        .map(|c| {
            let p = c.representative_pole;
            let (f, z) = mode_key(p);
            Mode {
                frequency_hz: f,
                damping_ratio: z,
                pole: p,
            }
        })
        .collect();
    Ok(ModalParameters {
        modes,
        overdamped: Vec::new(),
    })
}
