use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{evaluate, resolve, rotated_half_extents, CostTerms, FitnessWeights, Footprint, KitLayout, PartPlacement};
use crate::error::LayoutError;
use crate::task_model::{PartCatalog, PartId, Tray};

/// Cross-entropy solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeParams {
    #[serde(rename = "samples")]
    pub sample_count: usize,
    #[serde(rename = "elite")]
    pub elite_count: usize,
    #[serde(rename = "max_iters")]
    pub max_iterations: usize,
    /// Stop once every positional standard deviation is below this (mm).
    pub convergence_std_tol: f64,
    /// Added to every variance at each refit.
    pub cov_jitter: f64,
    /// Lower bound on a part's positional standard deviation, as a fraction
    /// of the square root of its area.
    pub min_std_fraction: f64,
    /// Score penalty per mm² of bounding box outside the tray.
    pub containment_penalty_weight: f64,
    /// Largest total overlap (mm²) an accepted layout may have.
    pub overlap_tolerance: f64,
    /// Independent CE runs; the best feasible sample over all of them is
    /// returned. The first run starts with every part in its catalog
    /// orientation, later runs from random orientations.
    pub restarts: usize,
    /// Extra runs allowed when none of the first `restarts` found a feasible sample.
    pub retry_limit: usize,
    pub seed: u64,
}

impl Default for CeParams {
    fn default() -> Self {
        Self {
            sample_count: 200,
            elite_count: 30,
            max_iterations: 100,
            convergence_std_tol: 1.0,
            cov_jitter: 1e-6,
            min_std_fraction: 0.2,
            containment_penalty_weight: 1e3,
            overlap_tolerance: 1e-3,
            restarts: 2,
            retry_limit: 3,
            seed: 0,
        }
    }
}

impl CeParams {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.elite_count == 0 || self.elite_count > self.sample_count {
            return Err(LayoutError::Params(format!(
                "need 0 < elite ({}) <= samples ({})",
                self.elite_count, self.sample_count
            )));
        }
        if self.restarts == 0 {
            return Err(LayoutError::Params("restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(LayoutError::Params("max_iters must be at least 1".into()));
        }
        if !(self.cov_jitter >= 0.0 && self.min_std_fraction >= 0.0 && self.overlap_tolerance >= 0.0 && self.containment_penalty_weight >= 0.0) {
            return Err(LayoutError::Params("jitter, std floor, tolerance and penalty must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of [`arrange_kit`].
#[derive(Debug, Clone)]
pub struct ArrangedKit {
    pub layout: KitLayout,
    /// Kit cost of `layout` (lower is better).
    pub cost: f64,
    pub terms: CostTerms,
    /// Best penalized score seen after each CE iteration, across all attempts.
    pub best_score_trace: Vec<f64>,
    pub attempts: usize,
}

struct Candidate {
    score: f64,
    pose: Vec<f64>,
}

/// Arranges `parts` on `tray` with the cross-entropy method.
///
/// Samples are scored by kit cost plus the containment penalty. The returned
/// layout is the lowest-cost sample seen that lies fully on the tray with total
/// overlap within tolerance, not the final mean.
pub fn arrange_kit(
    parts: &[PartId],
    catalog: &PartCatalog,
    tray: &Tray,
    weights: &FitnessWeights,
    params: &CeParams,
) -> Result<ArrangedKit, LayoutError> {
    params.validate()?;
    if parts.is_empty() {
        return Err(LayoutError::NoParts);
    }
    let mut needed = 0.0;
    for p in parts {
        needed += catalog.area_of(p)?;
    }
    if needed > tray.area() {
        return Err(LayoutError::DoesNotFit {
            needed,
            available: tray.area(),
        });
    }
    let footprints = resolve(parts.iter().map(String::as_str), catalog)?;
    let mut solver = Solver::new(&footprints, tray, weights, params);

    let mut attempts = 0;
    while attempts < params.restarts + params.retry_limit {
        attempts += 1;
        solver.run_attempt(attempts == 1);
        if solver.best_feasible.is_some() && attempts >= params.restarts {
            break;
        }
    }

    let to_layout = |pose: &[f64]| {
        KitLayout::new(
            parts
                .iter()
                .enumerate()
                .map(|(k, id)| PartPlacement::new(id.clone(), pose[3 * k], pose[3 * k + 1], pose[3 * k + 2]))
                .collect(),
            *tray,
        )
    };
    match solver.best_feasible.take() {
        Some(best) => {
            let terms = evaluate(&footprints, &best.pose, tray);
            Ok(ArrangedKit {
                layout: to_layout(&best.pose),
                cost: terms.cost(weights),
                terms,
                best_score_trace: solver.trace,
                attempts,
            })
        }
        None => {
            let best = solver.best_any.expect("at least one sample was scored");
            Err(LayoutError::Infeasible {
                attempts,
                best_cost: best.score,
                best: Box::new(to_layout(&best.pose)),
            })
        }
    }
}

struct Solver<'a> {
    parts: &'a [Footprint],
    tray: &'a Tray,
    weights: &'a FitnessWeights,
    params: &'a CeParams,
    rng: ChaCha8Rng,
    dim: usize,
    best_any: Option<Candidate>,
    best_feasible: Option<Candidate>,
    trace: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(parts: &'a [Footprint], tray: &'a Tray, weights: &'a FitnessWeights, params: &'a CeParams) -> Self {
        Self {
            parts,
            tray,
            weights,
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            dim: parts.len() * 3,
            best_any: None,
            best_feasible: None,
            trace: Vec::new(),
        }
    }

    fn run_attempt(&mut self, aligned: bool) {
        let dim = self.dim;
        let (w, h) = (self.tray.width, self.tray.height);
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for k in 0..self.parts.len() {
            mean[3 * k] = self.rng.random_range(0.0..w);
            mean[3 * k + 1] = self.rng.random_range(0.0..h);
            std[3 * k] = w / 4.0;
            std[3 * k + 1] = h / 4.0;
            if aligned {
                mean[3 * k + 2] = 0.0;
                std[3 * k + 2] = ALIGNED_THETA_STD;
            } else {
                mean[3 * k + 2] = self.rng.random_range(0.0..TAU);
                std[3 * k + 2] = FRAC_PI_2;
            }
        }

        let n = self.params.sample_count;
        let mut samples = vec![0.0; n * dim];
        let mut scores = vec![0.0; n];
        let mut order: Vec<usize> = (0..n).collect();

        for it in 0..self.params.max_iterations {
            // Draw every sample from the single stream before scoring.
            for s in 0..n {
                let row = &mut samples[s * dim..(s + 1) * dim];
                for i in 0..dim {
                    let z: f64 = self.rng.sample(StandardNormal);
                    row[i] = mean[i] + std[i] * z;
                }
                for (k, p) in self.parts.iter().enumerate() {
                    let (hx, hy) = rotated_half_extents(p.width, p.height, row[3 * k + 2]);
                    row[3 * k] = clamp_centre(row[3 * k], hx, w);
                    row[3 * k + 1] = clamp_centre(row[3 * k + 1], hy, h);
                }
            }

            for s in 0..n {
                let pose = &samples[s * dim..(s + 1) * dim];
                let terms = evaluate(self.parts, pose, self.tray);
                let cost = terms.cost(self.weights);
                let score = cost + self.params.containment_penalty_weight * terms.containment;
                scores[s] = score;
                if self.best_any.as_ref().is_none_or(|b| score < b.score) {
                    self.best_any = Some(Candidate { score, pose: pose.to_vec() });
                }
                let feasible = terms.containment == 0.0 && terms.overlap <= self.params.overlap_tolerance;
                if feasible && self.best_feasible.as_ref().is_none_or(|b| cost < b.score) {
                    self.best_feasible = Some(Candidate { score: cost, pose: pose.to_vec() });
                }
            }
            self.trace.push(self.best_any.as_ref().map_or(f64::INFINITY, |b| b.score));

            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
            refit(&samples, dim, &order[..self.params.elite_count], &mut mean, &mut std, self.params.cov_jitter);
            let max_pos_std = (0..self.parts.len())
                .flat_map(|k| [std[3 * k], std[3 * k + 1]])
                .fold(0.0f64, f64::max);
            // The floor shrinks linearly to zero over the iteration budget.
            let decay = 1.0 - (it + 1) as f64 / self.params.max_iterations as f64;
            for (k, p) in self.parts.iter().enumerate() {
                let floor = decay * self.params.min_std_fraction * (p.width * p.height).sqrt();
                std[3 * k] = std[3 * k].max(floor);
                std[3 * k + 1] = std[3 * k + 1].max(floor);
            }
            if max_pos_std < self.params.convergence_std_tol {
                break;
            }
        }
    }
}

/// Initial orientation spread (rad) of the aligned first run.
const ALIGNED_THETA_STD: f64 = 0.05;

/// Keeps a centre far enough from the edges that the envelope stays on the tray,
/// or centres it when the envelope is wider than the tray. The small margin
/// absorbs rounding when the envelope is recomputed from a normalized angle.
fn clamp_centre(c: f64, half: f64, extent: f64) -> f64 {
    let margin = 1e-9 * extent.max(1.0);
    if 2.0 * (half + margin) <= extent {
        c.clamp(half + margin, extent - half - margin)
    } else {
        extent / 2.0
    }
}

/// Maximum-likelihood mean and per-coordinate standard deviation of the elite set.
fn refit(samples: &[f64], dim: usize, elite: &[usize], mean: &mut [f64], std: &mut [f64], jitter: f64) {
    let c = elite.len() as f64;
    for i in 0..dim {
        let m = elite.iter().map(|&e| samples[e * dim + i]).sum::<f64>() / c;
        let var = elite.iter().map(|&e| (samples[e * dim + i] - m).powi(2)).sum::<f64>() / c;
        mean[i] = m;
        std[i] = (var + jitter).sqrt();
    }
}
