//! Horseshoe magnet above an iron sheet, in a box of air.
//!
//! Thirty biquadratic patches on a 5 x 6 grid of rectangles. Patch `c + 5r`
//! covers column `c` (left to right) and row `r` (bottom to top):
//!
//! ```text
//! r5  air   air    air    air    air
//! r4  air   yoke   yoke   yoke   air
//! r3  air   mag+   air    mag-   air
//! r2  air   gap    gap    gap    air
//! r1  air   sheet  sheet  sheet  air
//! r0  air   air    air    air    air
//! ```
//!
//! The two legs carry the same magnet material with opposite orientation,
//! so flux leaves one leg downward, crosses the gap, runs through the sheet
//! and returns through the other leg and the yoke.

use std::collections::BTreeMap;

use crate::assembly::{Interface, MaterialParams, MultipatchDomain, Side};
use crate::error::Result;
use crate::io::{GeometryFile, PatchSpec};

const X_BREAKS: [f64; 6] = [-0.08, -0.03, -0.015, 0.015, 0.03, 0.08];
const Y_BREAKS: [f64; 7] = [-0.06, -0.01, -0.005, 0.0, 0.02, 0.035, 0.08];
const COLS: usize = 5;
const ROWS: usize = 6;
/// Relative positions of the control points across each patch in `x`.
/// Not the Greville fractions, so the map is nonlinear in `u`.
const X_FRACTIONS: [f64; 4] = [0.0, 0.2, 0.7, 1.0];
const Y_FRACTIONS: [f64; 4] = [0.0, 0.25, 0.75, 1.0];
const KNOTS: [f64; 7] = [0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0];

const BUNDLED: &str = include_str!("../../data/horseshoe.geo");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HorseshoeRegion {
    Air,
    Sheet,
    Gap,
    Magnet,
    Yoke,
}

impl HorseshoeRegion {
    fn of_cell(c: usize, r: usize) -> Self {
        let inner = (1..=3).contains(&c);
        match r {
            1 if inner => Self::Sheet,
            2 if inner => Self::Gap,
            3 if c == 1 || c == 3 => Self::Magnet,
            4 if inner => Self::Yoke,
            _ => Self::Air,
        }
    }

    /// Region of a physical point; `None` outside the box.
    pub fn classify(x: [f64; 2]) -> Option<Self> {
        let find = |b: &[f64], v: f64| {
            let tol = 1e-9;
            if v < b[0] - tol || v > b[b.len() - 1] + tol {
                return None;
            }
            Some(b.windows(2).position(|w| v <= w[1]).unwrap_or(b.len() - 2))
        };
        Some(Self::of_cell(
            find(&X_BREAKS, x[0])?,
            find(&Y_BREAKS, x[1])?,
        ))
    }

    /// Region of a patch index.
    pub fn of_patch(patch: usize) -> Self {
        Self::of_cell(patch % COLS, patch / COLS)
    }

    pub fn material(self) -> &'static str {
        match self {
            Self::Sheet | Self::Yoke => "iron",
            Self::Magnet => "magnet",
            Self::Air | Self::Gap => "air",
        }
    }
}

/// Air, iron (`μr = 2000`) and a magnet (`μr = 1.05`, `Br = 1.2 T` along +y).
pub fn horseshoe_materials() -> BTreeMap<String, MaterialParams> {
    let mut m = BTreeMap::new();
    m.insert("air".into(), MaterialParams::default());
    m.insert(
        "iron".into(),
        MaterialParams {
            mu_r: 2000.0,
            br: [0.0; 2],
            jz: 0.0,
        },
    );
    m.insert(
        "magnet".into(),
        MaterialParams {
            mu_r: 1.05,
            br: [0.0, 1.2],
            jz: 0.0,
        },
    );
    m
}

fn generate() -> GeometryFile {
    let mut patches = Vec::with_capacity(COLS * ROWS);
    for r in 0..ROWS {
        for c in 0..COLS {
            let region = HorseshoeRegion::of_cell(c, r);
            let (x0, x1) = (X_BREAKS[c], X_BREAKS[c + 1]);
            let (y0, y1) = (Y_BREAKS[r], Y_BREAKS[r + 1]);
            let points = Y_FRACTIONS
                .iter()
                .flat_map(|&fy| {
                    X_FRACTIONS
                        .iter()
                        .map(move |&fx| [x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)])
                })
                .collect();
            patches.push(PatchSpec {
                material: region.material().into(),
                orientation: if region == HorseshoeRegion::Magnet && c == 3 {
                    -1.0
                } else {
                    1.0
                },
                degrees: (2, 2),
                knots_u: KNOTS.to_vec(),
                knots_v: KNOTS.to_vec(),
                points,
            });
        }
    }
    let mut interfaces = Vec::new();
    for r in 0..ROWS {
        for c in 0..COLS {
            let k = c + COLS * r;
            if c + 1 < COLS {
                interfaces.push(Interface {
                    a: k,
                    side_a: Side::East,
                    b: k + 1,
                    side_b: Side::West,
                    reversed: false,
                });
            }
            if r + 1 < ROWS {
                interfaces.push(Interface {
                    a: k,
                    side_a: Side::North,
                    b: k + COLS,
                    side_b: Side::South,
                    reversed: false,
                });
            }
        }
    }
    GeometryFile {
        patches,
        interfaces,
    }
}

/// The horseshoe geometry in the text geometry format.
pub fn horseshoe_geometry_text() -> String {
    generate().to_text()
}

/// The horseshoe domain read from the bundled geometry file.
pub fn horseshoe_domain(max_levels: usize) -> Result<MultipatchDomain> {
    GeometryFile::parse(BUNDLED, "horseshoe.geo")?.to_domain(&horseshoe_materials(), max_levels)
}

/// The horseshoe domain built directly from the generator.
pub fn horseshoe_domain_from_generator(max_levels: usize) -> Result<MultipatchDomain> {
    generate().to_domain(&horseshoe_materials(), max_levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_matches_generator() {
        if std::env::var_os("THBEZ_REGEN_DATA").is_some() {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/horseshoe.geo");
            std::fs::write(path, horseshoe_geometry_text()).unwrap();
            return;
        }
        assert_eq!(BUNDLED, horseshoe_geometry_text());
    }

    #[test]
    fn layout() {
        let d = horseshoe_domain(2).unwrap();
        assert_eq!(d.num_patches(), 30);
        assert_eq!(d.interfaces.len(), 49);
        assert_eq!(d.num_active_elements(), 120);
        assert_eq!(d.boundary_sides().len(), 22);
        assert_eq!(d.material(16).br, [0.0, 1.2]);
        assert_eq!(d.material(18).br, [0.0, -1.2]);
        assert_eq!(d.patches[17].material, "air");
        assert_eq!(
            HorseshoeRegion::classify([0.0, -0.0025]),
            Some(HorseshoeRegion::Gap)
        );
        assert_eq!(
            HorseshoeRegion::classify([0.0, -0.007]),
            Some(HorseshoeRegion::Sheet)
        );
        assert_eq!(
            HorseshoeRegion::classify([-0.02, 0.01]),
            Some(HorseshoeRegion::Magnet)
        );
        assert_eq!(
            HorseshoeRegion::classify([0.0, 0.01]),
            Some(HorseshoeRegion::Air)
        );
        assert_eq!(
            HorseshoeRegion::classify([0.0, 0.03]),
            Some(HorseshoeRegion::Yoke)
        );
        assert_eq!(HorseshoeRegion::classify([1.0, 0.0]), None);
        for k in 0..30 {
            assert_eq!(
                HorseshoeRegion::of_patch(k).material(),
                d.patches[k].material
            );
        }
    }
}
