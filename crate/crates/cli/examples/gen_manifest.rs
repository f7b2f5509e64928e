//! Generates a self-contained demo workspace: a 5 x 5 synthetic geometry
//! scan (nine integrals files per point) plus a run config wired to it.
//!
//! Usage: `cargo run --example gen_manifest -- [dir]` (default `demo`),
//! then `cargo run --bin nadyn -- run <dir>/run.toml`.

use std::path::Path;

use nadyn_cli::manifest::write_synthetic_fixture;
use nadyn_core::dynamics::GridSpec;
use nadyn_core::synthetic::TwoSurfaceModel;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "demo".into());
    let dir = Path::new(&dir);
    let fixture = dir.join("fixture");

    let model = TwoSurfaceModel::<f64>::standard();
    let grid = GridSpec::<f64>::standard();
    let rs = linspace(grid.r_min, grid.r_max, 5);
    let thetas = linspace(grid.theta_min, grid.theta_max, 5);
    let manifest =
        write_synthetic_fixture(&fixture, &model, &rs, &thetas, 1e-3).expect("fixture write");

    let config = "\
manifest = \"fixture/manifest.toml\"
output_dir = \"out\"
seed = 7

[grid]
dr = 0.0443
dtheta = 0.0409

[dynamics]
t_total_fs = 16.0
snapshot_times_fs = [0.0, 2.4, 4.8, 8.4]
";
    let config_path = dir.join("run.toml");
    std::fs::write(&config_path, config).expect("config write");
    println!("wrote {}", manifest.display());
    println!("wrote {}", config_path.display());
}
