mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::random_space;
use proptest::prelude::*;
use thbez::assembly::{DiscreteSolution, Interface, MultipatchDomain, Patch, Side};
use thbez::io::{export_fields, export_mesh, GeometryFile, PatchSpec, RunConfig};
use thbez::physics::horseshoe_geometry_text;
use thbez::spline::Geometry;

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("thbez-io-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thbez"))
}

fn status(cmd: &mut Command) -> i32 {
    let out = cmd.output().unwrap();
    out.status.code().unwrap()
}

fn config_error(text: &str) -> String {
    let dir = scratch("cfg");
    let path = dir.join("c.toml");
    std::fs::write(&path, text).unwrap();
    let e = RunConfig::read(&path).unwrap_err().to_string();
    std::fs::remove_dir_all(&dir).unwrap();
    e
}

#[test]
fn config_breaches_name_their_field() {
    let cases = [
        ("[problem]\nname = \"nonsense\"\n", "problem.name"),
        (
            "[problem]\nname = \"poisson_peak\"\ndegree = 0\n",
            "problem.degree",
        ),
        (
            "[problem]\nname = \"poisson_peak\"\nelements = 0\n",
            "problem.elements",
        ),
        ("[problem]\nname = \"custom\"\n", "problem.geometry"),
        (
            "[problem]\nname = \"custom\"\ngeometry = \"missing.geo\"\n",
            "missing.geo",
        ),
        (
            "[problem]\nname = \"poisson_peak\"\n[adaptivity]\ntheta = 1.5\n",
            "adaptivity.theta",
        ),
        (
            "[problem]\nname = \"poisson_peak\"\n[adaptivity]\nmax_levels = 0\n",
            "adaptivity.max_levels",
        ),
        (
            "[problem]\nname = \"magnetostatic_horseshoe\"\n[materials.iron]\nmu_r = -3.0\n",
            "materials.iron.mu_r",
        ),
        (
            "[problem]\nname = \"poisson_peak\"\n[export]\nresolution = 1\n",
            "export.resolution",
        ),
    ];
    for (text, field) in cases {
        let e = config_error(text);
        assert!(e.contains(field), "{field}: {e}");
    }
    let e = config_error("[problem]\nname = \"poisson_peak\"\n\n[adaptivity]\ntheeta = 0.3\n");
    assert!(e.contains("line 5"), "{e}");
}

#[test]
fn bundled_horseshoe_file_round_trips() {
    let g = GeometryFile::parse(&horseshoe_geometry_text(), "horseshoe.geo").unwrap();
    assert_eq!(g.patches.len(), 30);
    let again = GeometryFile::parse(&g.to_text(), "again").unwrap();
    assert_eq!(again, g);
    assert_eq!(again.to_text(), g.to_text());
}

/// Distinct `(level, parametric segment)` edges of the active cells,
/// counted from the cell bounds alone.
fn recount_edges(d: &MultipatchDomain) -> usize {
    let mut n = 0;
    for p in &d.patches {
        let mut set = BTreeSet::new();
        for (l, e) in p.space.active_element_list() {
            let ((u0, u1), (v0, v1)) = p.space.cell_bounds(l, e);
            let k = |x: f64| (x * 1e9).round() as i64;
            for seg in [
                (k(u0), k(v0), k(u1), k(v0)),
                (k(u0), k(v1), k(u1), k(v1)),
                (k(u0), k(v0), k(u0), k(v1)),
                (k(u1), k(v0), k(u1), k(v1)),
            ] {
                set.insert((l, seg));
            }
        }
        n += set.len();
    }
    n
}

fn mesh_lines(d: &MultipatchDomain) -> usize {
    export_mesh(d)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
}

#[test]
fn mesh_edges_match_recount() {
    let d = MultipatchDomain::unit_square(2, 4, 3).unwrap();
    assert_eq!(mesh_lines(&d), 40);
    // an interior cell keeps its outline through its neighbours
    let one = d.refine(&vec![BTreeSet::from([(0, 5)])]).unwrap();
    assert_eq!(mesh_lines(&one), 52);
    for seed in 0..12 {
        let hs = random_space(seed, 4);
        let geometry = Geometry::rectangle(hs.level(0).space().clone(), (0.0, 1.0), (0.0, 1.0));
        let patch = Patch::new(geometry, "default", hs).unwrap();
        let dom = MultipatchDomain::new(vec![patch], vec![], d.materials.clone()).unwrap();
        assert_eq!(mesh_lines(&dom), recount_edges(&dom), "seed {seed}");
    }
}

#[test]
fn constant_field_export() {
    let d = MultipatchDomain::unit_square(2, 3, 1).unwrap();
    let mut s = DiscreteSolution::zero(&d).unwrap();
    s.coeffs.iter_mut().for_each(|c| *c = 0.25);
    let vtk = export_fields(&s, &d, 3).unwrap();
    let section = |name: &str| -> Vec<f64> {
        let start = vtk
            .lines()
            .position(|l| l.starts_with(&format!("SCALARS {name} ")))
            .unwrap()
            + 2;
        vtk.lines()
            .skip(start)
            .take(9)
            .map(|l| l.trim().parse().unwrap())
            .collect()
    };
    assert!(section("Az").iter().all(|&v| (v - 0.25).abs() < 1e-9));
    for name in ["Bx", "By", "Bmag"] {
        assert!(section(name).iter().all(|&v| v.abs() < 1e-9), "{name}");
    }
}

fn write_geo(dir: &Path, flip: bool) -> PathBuf {
    let xs = if flip {
        [1.0, 0.5, 0.0]
    } else {
        [0.0, 0.5, 1.0]
    };
    let mut s = String::from(
        "patch copper\ndegrees 2 2\nknots_u 0 0 0 1 1 1\nknots_v 0 0 0 1 1 1\npoints 9\n",
    );
    for y in [0.0, 0.5, 1.0] {
        for x in xs {
            s += &format!("{x} {y} 1\n");
        }
    }
    let p = dir.join("square.geo");
    std::fs::write(&p, s).unwrap();
    p
}

#[test]
fn binary_exit_codes() {
    let dir = scratch("bin");
    assert_eq!(status(bin().args(["verify"])), 0);
    assert_eq!(status(bin().args(["verify", "--inject-fault"])), 1);

    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "[problem]\nname = \"unknown\"\n").unwrap();
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.name"));

    assert_eq!(status(bin().arg("run").arg(dir.join("absent.toml"))), 4);

    write_geo(&dir, true);
    let inverted = dir.join("inverted.toml");
    std::fs::write(
        &inverted,
        "[problem]\nname = \"custom\"\ngeometry = \"square.geo\"\n[materials.copper]\njz = 1.0\n",
    )
    .unwrap();
    assert_eq!(status(bin().arg("run").arg(&inverted)), 3);

    let peak = dir.join("peak.toml");
    std::fs::write(
        &peak,
        "[problem]\nname = \"poisson_peak\"\nelements = 4\n[adaptivity]\nmax_iterations = 0\n",
    )
    .unwrap();
    let run_dir = dir.join("peak_out");
    assert_eq!(
        status(bin().arg("run").arg(&peak).arg("--out").arg(&run_dir)),
        0
    );
    let csv = std::fs::read_to_string(run_dir.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(
        csv.lines().next().unwrap(),
        "iter,dofs,elements,l2_error,estimator_total,seconds"
    );

    let before = std::fs::read(run_dir.join("fields.vtk")).unwrap();
    assert_eq!(
        status(
            bin()
                .args(["export", "--what", "fields", "--from"])
                .arg(&run_dir)
        ),
        0
    );
    assert_eq!(std::fs::read(run_dir.join("fields.vtk")).unwrap(), before);
    assert_eq!(
        status(
            bin()
                .args(["export", "--what", "mesh", "--from"])
                .arg(&run_dir)
        ),
        0
    );
    assert!(run_dir.join("mesh.txt").is_file());
    assert_eq!(
        status(
            bin()
                .args(["export", "--what", "mesh", "--from"])
                .arg(dir.join("nowhere"))
        ),
        4
    );

    std::fs::remove_dir_all(&dir).unwrap();
}

fn arb_patch() -> impl Strategy<Value = PatchSpec> {
    (
        1usize..=3,
        1usize..=3,
        1usize..=3,
        1usize..=3,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(p, q, nu, nv, seed, flip)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let knots = |deg: usize, n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
                let mut k = vec![0.0; deg + 1];
                let mut inner: Vec<f64> = (1..n).map(|_| rng.gen_range(0.01..0.99)).collect();
                inner.sort_by(f64::total_cmp);
                inner.dedup();
                k.extend(inner);
                k.extend(std::iter::repeat(1.0).take(deg + 1));
                k
            };
            let ku = knots(p, nu, &mut rng);
            let kv = knots(q, nv, &mut rng);
            let count = (ku.len() - p - 1) * (kv.len() - q - 1);
            let points = (0..count)
                .map(|_| [rng.gen::<f64>() * 1e-3 - 5e-4, rng.gen::<f64>() * 7.0 / 3.0])
                .collect();
            PatchSpec {
                material: if flip { "air".into() } else { "iron".into() },
                orientation: if flip { -1.0 } else { 1.0 },
                degrees: (p, q),
                knots_u: ku,
                knots_v: kv,
                points,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn geometry_round_trip_is_bitwise(patches in prop::collection::vec(arb_patch(), 1..4), rev in any::<bool>()) {
        let interfaces = if patches.len() > 1 {
            vec![Interface { a: 0, side_a: Side::East, b: 1, side_b: Side::West, reversed: rev }]
        } else {
            Vec::new()
        };
        let g = GeometryFile { patches, interfaces };
        let back = GeometryFile::parse(&g.to_text(), "prop").unwrap();
        for (a, b) in g.patches.iter().zip(&back.patches) {
            for (x, y) in a.points.iter().zip(&b.points) {
                prop_assert_eq!(x[0].to_bits(), y[0].to_bits());
                prop_assert_eq!(x[1].to_bits(), y[1].to_bits());
            }
            for (x, y) in a.knots_u.iter().chain(&a.knots_v).zip(b.knots_u.iter().chain(&b.knots_v)) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        prop_assert_eq!(back, g);
    }
}
