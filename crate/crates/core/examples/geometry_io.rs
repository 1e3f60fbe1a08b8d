//! Geometry and config files, a full `run` into an output directory, and
//! re-export from the saved state: a current-carrying conductor next to an
//! air patch, described in the text geometry format.
//!
//! ```text
//! cargo run --example geometry_io
//! ```

use std::fmt::Write as _;

use thbez::io::{cmd_export, cmd_run, summary_table, ExportKind, GeometryFile};
use thbez::Result;

/// Biquadratic patch over a rectangle with one interior knot per direction.
fn rectangle_patch(material: &str, x: (f64, f64), y: (f64, f64)) -> String {
    let fr = [0.0, 0.25, 0.75, 1.0];
    let mut s = format!("patch {material}\ndegrees 2 2\nknots_u 0 0 0 0.5 1 1 1\nknots_v 0 0 0 0.5 1 1 1\npoints 16\n");
    for fy in fr {
        for fx in fr {
            let _ = writeln!(s, "{} {}", x.0 + fx * (x.1 - x.0), y.0 + fy * (y.1 - y.0));
        }
    }
    s
}

pub fn run_example() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("thbez-geometry-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| thbez::Error::io(&dir, e))?;

    let mut geo = String::from("# conductor | air\n");
    geo += &rectangle_patch("copper", (0.0, 0.01), (0.0, 0.02));
    geo += &rectangle_patch("air", (0.01, 0.03), (0.0, 0.02));
    geo += "interface 0 east 1 west 0\n";
    let geo_path = dir.join("conductor.geo");
    std::fs::write(&geo_path, &geo).map_err(|e| thbez::Error::io(&geo_path, e))?;

    let parsed = GeometryFile::read(&geo_path)?;
    println!(
        "{} patches, {} interface(s)",
        parsed.patches.len(),
        parsed.interfaces.len()
    );
    let again = GeometryFile::parse(&parsed.to_text(), "round trip")?;
    println!(
        "write and re-read reproduces the patches exactly: {}",
        again == parsed
    );

    let config = r#"
seed = 3

[problem]
name = "custom"
geometry = "conductor.geo"
elements = 4

[adaptivity]
max_iterations = 3
max_levels = 4

[materials.copper]
jz = 1.0e6

[export]
resolution = 5
"#;
    let cfg_path = dir.join("conductor.toml");
    std::fs::write(&cfg_path, config).map_err(|e| thbez::Error::io(&cfg_path, e))?;

    let out = cmd_run(&cfg_path, None)?;
    print!("\n{}", summary_table(&out.run));
    let mut files: Vec<String> = std::fs::read_dir(&out.directory)
        .map_err(|e| thbez::Error::io(&out.directory, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!(
        "\n{} contains {}",
        out.directory.display(),
        files.join(", ")
    );

    let before =
        std::fs::read(out.directory.join("fields.vtk")).map_err(|e| thbez::Error::io(&dir, e))?;
    let fields = cmd_export(ExportKind::Fields, &out.directory)?;
    let after = std::fs::read(&fields).map_err(|e| thbez::Error::io(&fields, e))?;
    println!("re-exported fields are byte-identical: {}", before == after);
    let mesh = cmd_export(ExportKind::Mesh, &out.directory)?;
    let text = std::fs::read_to_string(&mesh).map_err(|e| thbez::Error::io(&mesh, e))?;
    println!(
        "final mesh: {} edges, first lines:",
        text.lines().count() - 1
    );
    for line in text.lines().take(3) {
        println!("  {}", &line[..line.len().min(100)]);
    }

    std::fs::remove_dir_all(&dir).map_err(|e| thbez::Error::io(&dir, e))?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
