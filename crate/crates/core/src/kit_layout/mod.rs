//! Kit arrangement: fitness terms over part placements on the tray and the
//! cross-entropy solver that minimizes them.
//!
//! All geometry is axis-aligned. A part rotated by `theta` occupies the
//! axis-aligned envelope of its rotated `w × h` rectangle, so overlap and tray
//! containment are conservative for non-right angles.

mod ce;
mod export;

pub use ce::{arrange_kit, ArrangedKit, CeParams};
pub use export::{grid_layout, layout_from_json, layout_to_json, layout_to_svg};

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::task_model::{PartCatalog, PartId, Tray};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartPlacement {
    #[serde(rename = "part_id")]
    pub part: PartId,
    #[serde(rename = "x_mm")]
    pub x: f64,
    #[serde(rename = "y_mm")]
    pub y: f64,
    #[serde(rename = "theta_rad")]
    pub theta: f64,
}

impl PartPlacement {
    /// Creates a placement with `theta` wrapped into `[0, 2π)`.
    pub fn new(part: impl Into<PartId>, x: f64, y: f64, theta: f64) -> Self {
        Self {
            part: part.into(),
            x,
            y,
            theta: normalize_angle(theta),
        }
    }
}

pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KitLayout {
    pub placements: Vec<PartPlacement>,
    pub tray: Tray,
}

impl KitLayout {
    pub fn new(placements: Vec<PartPlacement>, tray: Tray) -> Self {
        Self { placements, tray }
    }

    pub fn has_duplicate_parts(&self) -> bool {
        let mut seen = BTreeSet::new();
        !self.placements.iter().all(|p| seen.insert(p.part.as_str()))
    }

    pub fn part_ids(&self) -> impl Iterator<Item = &str> {
        self.placements.iter().map(|p| p.part.as_str())
    }
}

/// Weight of the overlap term in the kit cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessWeights {
    pub w6_overlap: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self { w6_overlap: 10.0 }
    }
}

/// Axis-aligned rectangle in tray coordinates (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn centered(x: f64, y: f64, half_w: f64, half_h: f64) -> Self {
        Self {
            x_min: x - half_w,
            x_max: x + half_w,
            y_min: y - half_h,
            y_max: y + half_h,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }
}

/// Half extents of the axis-aligned envelope of a `w × h` rectangle rotated by `theta`.
pub fn rotated_half_extents(w: f64, h: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (s, c) = (s.abs(), c.abs());
    ((w * c + h * s) / 2.0, (w * s + h * c) / 2.0)
}

pub fn bounding_box(placement: &PartPlacement, catalog: &PartCatalog) -> Result<Rect, ModelError> {
    let t = catalog.part_type_of(&placement.part)?;
    let (hx, hy) = rotated_half_extents(t.bbox_width, t.bbox_height, placement.theta);
    Ok(Rect::centered(placement.x, placement.y, hx, hy))
}

/// Part footprint resolved from the catalog; `kind` indexes the part type.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Footprint {
    pub kind: usize,
    pub width: f64,
    pub height: f64,
}

pub(crate) fn resolve<'a, I>(parts: I, catalog: &PartCatalog) -> Result<Vec<Footprint>, ModelError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut kinds: Vec<&str> = Vec::new();
    parts
        .into_iter()
        .map(|p| {
            let t = catalog.part_type_of(p)?;
            let kind = match kinds.iter().position(|k| *k == t.id) {
                Some(i) => i,
                None => {
                    kinds.push(&t.id);
                    kinds.len() - 1
                }
            };
            Ok(Footprint {
                kind,
                width: t.bbox_width,
                height: t.bbox_height,
            })
        })
        .collect()
}

/// Breakdown of the kit cost terms for one arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostTerms {
    pub d_same: f64,
    pub d_diff: f64,
    pub overlap: f64,
    pub containment: f64,
}

impl CostTerms {
    pub fn cost(&self, weights: &FitnessWeights) -> f64 {
        self.d_same - self.d_diff + weights.w6_overlap * self.overlap
    }
}

/// Evaluates every term for parts at `pose` (x, y, theta triples).
pub(crate) fn evaluate(parts: &[Footprint], pose: &[f64], tray: &Tray) -> CostTerms {
    debug_assert_eq!(pose.len(), parts.len() * 3);
    let mut boxes = Vec::with_capacity(parts.len());
    let mut terms = CostTerms::default();
    let tray_rect = Rect {
        x_min: 0.0,
        x_max: tray.width,
        y_min: 0.0,
        y_max: tray.height,
    };
    for (k, p) in parts.iter().enumerate() {
        let (x, y, th) = (pose[3 * k], pose[3 * k + 1], pose[3 * k + 2]);
        let (hx, hy) = rotated_half_extents(p.width, p.height, th);
        let b = Rect::centered(x, y, hx, hy);
        terms.containment += (b.area() - b.intersection_area(&tray_rect)).max(0.0);
        for (j, q) in parts[..k].iter().enumerate() {
            let dx = x - pose[3 * j];
            let dy = y - pose[3 * j + 1];
            let d = dx.hypot(dy);
            if q.kind == p.kind {
                terms.d_same += d;
            } else {
                terms.d_diff += d;
            }
            terms.overlap += b.intersection_area(&boxes[j]);
        }
        boxes.push(b);
    }
    terms
}

fn pose_of(layout: &KitLayout) -> Vec<f64> {
    layout
        .placements
        .iter()
        .flat_map(|p| [p.x, p.y, p.theta])
        .collect()
}

pub fn cost_terms(layout: &KitLayout, catalog: &PartCatalog) -> Result<CostTerms, ModelError> {
    let parts = resolve(layout.part_ids(), catalog)?;
    Ok(evaluate(&parts, &pose_of(layout), &layout.tray))
}

/// Sums of centroid distances over same-type and different-type unordered pairs,
/// returned as `(d_same, d_diff)`.
pub fn pair_distance_sums(layout: &KitLayout, catalog: &PartCatalog) -> Result<(f64, f64), ModelError> {
    let t = cost_terms(layout, catalog)?;
    Ok((t.d_same, t.d_diff))
}

/// Total pairwise intersection area of the parts' bounding boxes (mm²).
pub fn overlap_area(layout: &KitLayout, catalog: &PartCatalog) -> Result<f64, ModelError> {
    Ok(cost_terms(layout, catalog)?.overlap)
}

/// Bounding-box area lying outside the tray, summed over parts (mm²).
pub fn containment_violation(layout: &KitLayout, catalog: &PartCatalog) -> Result<f64, ModelError> {
    Ok(cost_terms(layout, catalog)?.containment)
}

/// Kit cost minimized by the lower level: `d_same - d_diff + w6 * overlap`.
///
/// Lower is better; the planner's kit fitness is the negation.
pub fn kit_fitness_cost(
    layout: &KitLayout,
    catalog: &PartCatalog,
    weights: &FitnessWeights,
) -> Result<f64, ModelError> {
    Ok(cost_terms(layout, catalog)?.cost(weights))
}
