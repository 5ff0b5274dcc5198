use std::fmt::Write as _;

use super::{bounding_box, KitLayout, PartPlacement};
use crate::error::ModelError;
use crate::task_model::{PartCatalog, PartId, Tray};

/// Deterministic shelf layout: parts grouped by type, placed left to right in rows.
///
/// Rows continue past the tray edge when the parts do not fit.
pub fn grid_layout(parts: &[PartId], catalog: &PartCatalog, tray: &Tray) -> Result<KitLayout, ModelError> {
    let mut sorted = Vec::with_capacity(parts.len());
    for p in parts {
        let t = catalog.part_type_of(p)?;
        sorted.push((t.id.as_str(), p.as_str(), t.bbox_width, t.bbox_height));
    }
    sorted.sort_by(|a, b| a.0.cmp(b.0).then(a.1.cmp(b.1)));

    let (mut x, mut y, mut row_h) = (0.0f64, 0.0f64, 0.0f64);
    let mut placements = Vec::with_capacity(sorted.len());
    for (_, id, w, h) in sorted {
        if x > 0.0 && x + w > tray.width {
            x = 0.0;
            y += row_h;
            row_h = 0.0;
        }
        placements.push(PartPlacement::new(id, x + w / 2.0, y + h / 2.0, 0.0));
        x += w;
        row_h = row_h.max(h);
    }
    Ok(KitLayout::new(placements, *tray))
}

/// JSON array of `{part_id, x_mm, y_mm, theta_rad}`.
pub fn layout_to_json(layout: &KitLayout) -> String {
    serde_json::to_string_pretty(&layout.placements).expect("placements serialize")
}

pub fn layout_from_json(text: &str, tray: Tray) -> Result<KitLayout, serde_json::Error> {
    let placements: Vec<PartPlacement> = serde_json::from_str(text)?;
    Ok(KitLayout::new(placements, tray))
}

pub fn layout_to_svg(layout: &KitLayout, catalog: &PartCatalog) -> Result<String, ModelError> {
    let Tray { width, height } = layout.tray;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="-10 -10 {} {}">"#,
        width + 20.0,
        height + 20.0
    );
    let _ = writeln!(
        svg,
        r##"  <rect x="0" y="0" width="{width}" height="{height}" fill="#f4f4f4" stroke="#333"/>"##
    );
    for p in &layout.placements {
        let t = catalog.part_type_of(&p.part)?;
        let b = bounding_box(p, catalog)?;
        let _ = writeln!(
            svg,
            r##"  <rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#c33" stroke-dasharray="2"/>"##,
            b.x_min,
            b.y_min,
            b.width(),
            b.height()
        );
        let _ = writeln!(
            svg,
            r##"  <rect x="{:.2}" y="{:.2}" width="{}" height="{}" transform="rotate({:.3} {:.2} {:.2})" fill="#6a9" fill-opacity="0.6" stroke="#264"><title>{} ({})</title></rect>"##,
            p.x - t.bbox_width / 2.0,
            p.y - t.bbox_height / 2.0,
            t.bbox_width,
            t.bbox_height,
            p.theta.to_degrees(),
            p.x,
            p.y,
            p.part,
            t.id
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
