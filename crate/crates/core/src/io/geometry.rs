//! Text format for multipatch geometries.
//!
//! ```text
//! # comment
//! patch <material> [orientation]
//! degrees <p> <q>
//! knots_u <values...>
//! knots_v <values...>
//! points <count>
//! <x> <y> [w]          one line per control point, u index fastest
//! interface <a> <side_a> <b> <side_b> <reversed: 0|1>
//! ```
//!
//! Patches are numbered in order of appearance. Sides are `west`, `east`,
//! `south`, `north`. The optional weight column is read and ignored.

use std::collections::BTreeMap;
use std::path::Path;

use crate::assembly::{Interface, MaterialParams, MultipatchDomain, Patch, Side};
use crate::error::{Error, Result};
use crate::spline::{ControlNet, Geometry, KnotVector, TensorSpace2D};

#[derive(Clone, Debug, PartialEq)]
pub struct PatchSpec {
    pub material: String,
    pub orientation: f64,
    pub degrees: (usize, usize),
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct GeometryFile {
    pub patches: Vec<PatchSpec>,
    pub interfaces: Vec<Interface>,
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(vals: &[f64]) -> String {
    vals.iter()
        .map(|&v| fmt_real(v))
        .collect::<Vec<_>>()
        .join(" ")
}

impl GeometryFile {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut out = GeometryFile::default();
        let err = |line: usize, message: String| Error::Parse {
            file: file.to_string(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut current: Option<PatchSpec> = None;
        let finish = |p: Option<PatchSpec>, out: &mut GeometryFile| {
            if let Some(p) = p {
                out.patches.push(p);
            }
        };
        let reals = |line: usize, toks: &[&str]| -> Result<Vec<f64>> {
            toks.iter()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| err(line, format!("'{t}' is not a number")))
                })
                .collect()
        };
        while let Some((ln, l)) = lines.next() {
            let toks: Vec<&str> = l.split_whitespace().collect();
            let need_patch = |c: &Option<PatchSpec>| {
                if c.is_none() {
                    Err(err(ln, format!("'{}' outside a patch block", toks[0])))
                } else {
                    Ok(())
                }
            };
            match toks[0] {
                "patch" => {
                    finish(current.take(), &mut out);
                    let material = toks
                        .get(1)
                        .ok_or_else(|| err(ln, "patch needs a material tag".into()))?
                        .to_string();
                    let orientation = match toks.get(2) {
                        Some(t) => t
                            .parse()
                            .map_err(|_| err(ln, format!("bad orientation '{t}'")))?,
                        None => 1.0,
                    };
                    current = Some(PatchSpec {
                        material,
                        orientation,
                        degrees: (0, 0),
                        knots_u: Vec::new(),
                        knots_v: Vec::new(),
                        points: Vec::new(),
                    });
                }
                "degrees" => {
                    need_patch(&current)?;
                    if toks.len() != 3 {
                        return Err(err(ln, "degrees needs two integers".into()));
                    }
                    let p = toks[1].parse().map_err(|_| err(ln, "bad degree".into()))?;
                    let q = toks[2].parse().map_err(|_| err(ln, "bad degree".into()))?;
                    current.as_mut().unwrap().degrees = (p, q);
                }
                "knots_u" | "knots_v" => {
                    need_patch(&current)?;
                    let v = reals(ln, &toks[1..])?;
                    let c = current.as_mut().unwrap();
                    if toks[0] == "knots_u" {
                        c.knots_u = v;
                    } else {
                        c.knots_v = v;
                    }
                }
                "points" => {
                    need_patch(&current)?;
                    let n: usize = toks
                        .get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(ln, "points needs a count".into()))?;
                    let c = current.as_mut().unwrap();
                    for _ in 0..n {
                        let (pl, pt) = lines
                            .next()
                            .ok_or_else(|| err(ln, "file ends inside a point list".into()))?;
                        let toks: Vec<&str> = pt.split_whitespace().collect();
                        if !(2..=3).contains(&toks.len()) {
                            return Err(err(pl, "a point needs 'x y' or 'x y w'".into()));
                        }
                        let v = reals(pl, &toks)?;
                        c.points.push([v[0], v[1]]);
                    }
                }
                "interface" => {
                    if toks.len() != 6 {
                        return Err(err(
                            ln,
                            "interface needs: a side_a b side_b reversed".into(),
                        ));
                    }
                    let idx = |t: &str| {
                        t.parse::<usize>()
                            .map_err(|_| err(ln, format!("bad patch index '{t}'")))
                    };
                    let side = |t: &str| {
                        Side::parse(t).ok_or_else(|| err(ln, format!("unknown side '{t}'")))
                    };
                    let reversed = match toks[5] {
                        "0" => false,
                        "1" => true,
                        t => {
                            return Err(err(ln, format!("reversed flag must be 0 or 1, got '{t}'")))
                        }
                    };
                    out.interfaces.push(Interface {
                        a: idx(toks[1])?,
                        side_a: side(toks[2])?,
                        b: idx(toks[3])?,
                        side_b: side(toks[4])?,
                        reversed,
                    });
                }
                other => return Err(err(ln, format!("unknown keyword '{other}'"))),
            }
        }
        finish(current, &mut out);
        for (k, p) in out.patches.iter().enumerate() {
            let expect = (p.knots_u.len().saturating_sub(p.degrees.0 + 1))
                * (p.knots_v.len().saturating_sub(p.degrees.1 + 1));
            if p.points.len() != expect {
                return Err(err(
                    0,
                    format!("patch {k} has {} points, expected {expect}", p.points.len()),
                ));
            }
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# multipatch geometry\n");
        for (k, p) in self.patches.iter().enumerate() {
            s.push_str(&format!("# patch {k}\n"));
            if p.orientation == 1.0 {
                s.push_str(&format!("patch {}\n", p.material));
            } else {
                s.push_str(&format!("patch {} {}\n", p.material, p.orientation));
            }
            s.push_str(&format!("degrees {} {}\n", p.degrees.0, p.degrees.1));
            s.push_str(&format!("knots_u {}\n", join(&p.knots_u)));
            s.push_str(&format!("knots_v {}\n", join(&p.knots_v)));
            s.push_str(&format!("points {}\n", p.points.len()));
            for pt in &p.points {
                s.push_str(&format!("{} {}\n", fmt_real(pt[0]), fmt_real(pt[1])));
            }
        }
        for i in &self.interfaces {
            s.push_str(&format!(
                "interface {} {} {} {} {}\n",
                i.a,
                i.side_a,
                i.b,
                i.side_b,
                u8::from(i.reversed)
            ));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Build the domain; each patch's solution space starts from its
    /// geometry space with room for `max_levels` levels.
    pub fn to_domain(
        &self,
        materials: &BTreeMap<String, MaterialParams>,
        max_levels: usize,
    ) -> Result<MultipatchDomain> {
        let patches = self
            .patches
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let wrap = |e: Error| Error::Geometry {
                    patch: k,
                    element: None,
                    message: e.to_string(),
                };
                let ku = KnotVector::new(p.knots_u.clone(), p.degrees.0).map_err(wrap)?;
                let kv = KnotVector::new(p.knots_v.clone(), p.degrees.1).map_err(wrap)?;
                let geo = Geometry::new(
                    TensorSpace2D::from_knots(ku, kv),
                    ControlNet::new(p.points.clone()),
                )
                .map_err(wrap)?;
                Ok(Patch::from_geometry(geo, p.material.clone(), max_levels)?
                    .with_orientation(p.orientation))
            })
            .collect::<Result<Vec<_>>>()?;
        MultipatchDomain::new(patches, self.interfaces.clone(), materials.clone())
    }

    pub fn from_domain(domain: &MultipatchDomain) -> Self {
        let patches = domain
            .patches
            .iter()
            .map(|p| {
                let s = &p.geometry.space;
                PatchSpec {
                    material: p.material.clone(),
                    orientation: p.orientation,
                    degrees: s.degrees(),
                    knots_u: s.u.knot_vector().knots().to_vec(),
                    knots_v: s.v.knot_vector().knots().to_vec(),
                    points: p.geometry.net.points.clone(),
                }
            })
            .collect();
        Self {
            patches,
            interfaces: domain.interfaces.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "\
patch air
degrees 1 1
knots_u 0 0 1 1
knots_v 0 0 1 1
points 4
0 0 1
1 0
0 1
1 1 1
";

    #[test]
    fn parse_minimal_file() {
        let g = GeometryFile::parse(SQUARE, "square").unwrap();
        assert_eq!(g.patches.len(), 1);
        assert_eq!(g.patches[0].points[3], [1.0, 1.0]);
        let mut m = BTreeMap::new();
        m.insert("air".into(), MaterialParams::default());
        let d = g.to_domain(&m, 2).unwrap();
        assert_eq!(d.num_patches(), 1);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut g = GeometryFile::parse(SQUARE, "square").unwrap();
        g.patches[0].points[1] = [1.0 / 3.0, -0.1];
        let back = GeometryFile::parse(&g.to_text(), "again").unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = SQUARE.replace("knots_v 0 0 1 1", "knots_v 0 0 x 1");
        match GeometryFile::parse(&bad, "bad.geo").unwrap_err() {
            Error::Parse { file, line, .. } => {
                assert_eq!(file, "bad.geo");
                assert_eq!(line, 4);
            }
            e => panic!("{e}"),
        }
        let short = SQUARE.replace("1 1 1\n", "");
        assert!(GeometryFile::parse(&short, "s").is_err());
        assert!(GeometryFile::parse("interface 0 up 1 west 0\n", "s").is_err());
    }
}
