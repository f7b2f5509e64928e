//! Stage orchestration: surfaces, couplings, interpolation, propagation,
//! plot re-emission.
//!
//! Every stage reads its inputs from disk artifacts and writes its outputs
//! back, even inside a full run. That buys resumability for free: rerunning
//! a later stage against existing files takes exactly the code path a full
//! run took, so the outputs match byte for byte.
//!
//! The electronic scan is the only parallel part. Its work is scheduled so
//! results never depend on thread count: the first stretch row is solved
//! sequentially with each point warm-started from its predecessor, every
//! later row is an order-preserving parallel map warm-started from the row
//! below, and a deterministic rescue pass re-solves points whose objective
//! jumped above the trend of their neighbours.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use nadyn_core::dynamics::{
    ground_wavepacket, propagate, CoupledHamiltonian, DynamicsSetup, GridSpec,
    PropagationConfig, AU_TIME_FS,
};
use nadyn_core::hamiltonian_io::{
    build_fermionic_hamiltonian, jordan_wigner, parse_fcidump, PauliSum,
};
use nadyn_core::nac::{fix_sign_continuity, point_nac, DisplacedSet, PointNac};
use nadyn_core::qsim::AnsatzCircuit;
use nadyn_core::ssvqe::{solve, solve_multistart, SsvqeConfig, SsvqeSolution};
use nadyn_core::surfaces::{assemble, interpolate};
use nadyn_core::{CoreError, Result};

use crate::config::RunConfig;
use crate::io::{
    read_fine_bundle, read_nac_table, read_populations, read_snapshot, read_surface_table,
    write_fine_bundle, write_nac_table, write_plot_snapshot, write_populations, write_snapshot,
    write_surface_table, io_err, NacRow, Provenance, SurfaceRow,
};
use crate::manifest::{Manifest, ManifestPoint};

/// Worker-count override; unset or zero means one thread per core.
pub const WORKERS_ENV: &str = "NADYN_WORKERS";

/// A point is re-solved from fresh starts when its weighted objective lands
/// this far (hartree) above the value extrapolated from its neighbours.
const RESCUE_THRESHOLD: f64 = 5e-3;
const RESCUE_RESTARTS: usize = 3;

/// The pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Surfaces,
    Nac,
    Interp,
    Dynamics,
    PlotData,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Surfaces,
        Stage::Nac,
        Stage::Interp,
        Stage::Dynamics,
        Stage::PlotData,
    ];

    pub fn index(self) -> usize {
        Stage::ALL.iter().position(|&s| s == self).unwrap()
    }

    /// Stages that open the geometry manifest and its integrals files.
    pub fn reads_manifest(self) -> bool {
        matches!(self, Stage::Surfaces | Stage::Nac)
    }

    /// Upstream artifacts this stage consumes. A run starting here must
    /// find them on disk.
    pub fn required_artifacts(self, paths: &RunPaths) -> Vec<PathBuf> {
        match self {
            Stage::Surfaces => vec![],
            Stage::Nac => vec![paths.surfaces()],
            Stage::Interp => vec![paths.surfaces(), paths.nac()],
            Stage::Dynamics => vec![paths.fine()],
            Stage::PlotData => vec![paths.populations()],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Surfaces => "surfaces",
            Stage::Nac => "nac",
            Stage::Interp => "interp",
            Stage::Dynamics => "dynamics",
            Stage::PlotData => "plotdata",
        };
        f.write_str(name)
    }
}

/// Artifact locations under one output directory.
pub struct RunPaths {
    root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        RunPaths {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn surfaces(&self) -> PathBuf {
        self.root.join("surfaces.tsv")
    }

    pub fn nac(&self) -> PathBuf {
        self.root.join("nac.tsv")
    }

    pub fn fine(&self) -> PathBuf {
        self.root.join("fine_surfaces.tsv")
    }

    pub fn populations(&self) -> PathBuf {
        self.root.join("populations.tsv")
    }

    pub fn snapshot_dir(&self) -> PathBuf {
        self.root.join("snapshots")
    }

    pub fn snapshot(&self, index: usize) -> PathBuf {
        self.snapshot_dir().join(format!("snapshot_{:02}.tsv", index))
    }

    pub fn plot_dir(&self) -> PathBuf {
        self.root.join("plot")
    }

    pub fn plot_populations(&self) -> PathBuf {
        self.plot_dir().join("populations.tsv")
    }

    pub fn plot_snapshot(&self, index: usize) -> PathBuf {
        self.plot_dir().join(format!("snapshot_{:02}.tsv", index))
    }

    /// Written when a stage fails so partial outputs are identifiable.
    pub fn failed_marker(&self) -> PathBuf {
        self.root.join("failed_stage.txt")
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        let n: usize = raw.trim().parse().map_err(|_| {
            CoreError::Config(format!("{} must be a number, got {:?}", WORKERS_ENV, raw))
        })?;
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    builder
        .build()
        .map_err(|e| CoreError::Config(format!("worker pool: {}", e)))
}

/// Validates the config and executes its selected stages in order. On a
/// stage failure the partial outputs stay on disk next to a marker naming
/// the failed stage.
pub fn run_stages(cfg: &RunConfig, quiet: bool) -> Result<()> {
    let report = cfg.validate();
    if !quiet {
        for w in &report.warnings {
            eprintln!("warning: {}", w);
        }
    }
    if !report.ok() {
        return Err(CoreError::Config(format!(
            "validation failed:\n  {}",
            report.fatal.join("\n  ")
        )));
    }
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let paths = RunPaths::new(&out);
    let _ = std::fs::remove_file(paths.failed_marker());
    let prov = Provenance {
        config_hash: cfg.hash().to_string(),
        seed: cfg.seed,
    };
    let pool = thread_pool()?;
    let stages = cfg.selected_stages();
    pool.install(|| {
        for &stage in &stages {
            if !quiet {
                eprintln!("stage {}", stage);
            }
            let result = match stage {
                Stage::Surfaces => stage_surfaces(cfg, &paths, &prov, quiet),
                Stage::Nac => stage_nac(cfg, &paths, &prov),
                Stage::Interp => stage_interp(cfg, &paths, &prov),
                Stage::Dynamics => stage_dynamics(cfg, &paths, &prov, quiet),
                Stage::PlotData => stage_plotdata(cfg, &paths, &prov),
            };
            if let Err(e) = result {
                let note = format!("stage {} failed: {}\n", stage, e);
                let _ = std::fs::write(paths.failed_marker(), note);
                return Err(e);
            }
        }
        Ok(())
    })
}

fn load_hamiltonian(path: &Path) -> Result<PauliSum<f64>> {
    jordan_wigner(&build_fermionic_hamiltonian(&parse_fcidump::<f64>(path)?))
}

/// The artifact formats carry exactly the three tracked states.
fn require_three_states(cfg: &SsvqeConfig<f64>) -> Result<()> {
    if cfg.initial_states.len() != 3 {
        return Err(CoreError::Config(format!(
            "the pipeline tracks exactly three states, config lists {}",
            cfg.initial_states.len()
        )));
    }
    Ok(())
}

fn solve_point(
    point: &ManifestPoint,
    manifest: &Manifest,
    cfg: &SsvqeConfig<f64>,
    warm: Option<&[f64]>,
) -> Result<SsvqeSolution<f64>> {
    let h = load_hamiltonian(&manifest.resolve(&point.center))?;
    solve(&h, cfg, warm)
}

/// Linear extrapolation of the weighted objective from up to two earlier
/// points along a scan line; `None` when nothing earlier exists.
fn trend(prev: Option<f64>, prev2: Option<f64>) -> Option<f64> {
    match (prev, prev2) {
        (Some(a), Some(b)) => Some(2.0 * a - b),
        (Some(a), None) => Some(a),
        _ => None,
    }
}

fn stage_surfaces(
    cfg: &RunConfig,
    paths: &RunPaths,
    prov: &Provenance,
    quiet: bool,
) -> Result<()> {
    let manifest = Manifest::load(&cfg.manifest_path())?;
    manifest.require_files()?;
    let grid = manifest.grid()?;
    let base_cfg = cfg.ssvqe_config();
    require_three_states(&base_cfg)?;
    let (n_r, n_t) = (grid.rs.len(), grid.thetas.len());

    // Per-point seeds keep rescue restarts reproducible and independent of
    // the order points happen to be rescued in.
    let rescue_cfg = |flat: usize| {
        let mut c = base_cfg.clone();
        c.seed = base_cfg.seed.wrapping_add(1009 * (flat as u64 + 1));
        c
    };

    let mut solutions: Vec<SsvqeSolution<f64>> = Vec::with_capacity(n_r * n_t);
    for i in 0..n_r {
        let mut row: Vec<SsvqeSolution<f64>> = if i == 0 {
            // First row: sequential, chained warm starts along the row.
            let mut row = Vec::with_capacity(n_t);
            for j in 0..n_t {
                let warm = row.last().map(|s: &SsvqeSolution<f64>| s.params.as_slice());
                row.push(solve_point(grid.points[j], &manifest, &base_cfg, warm)?);
            }
            row
        } else {
            // Later rows: independent columns, warm-started from the row
            // below; the parallel map preserves column order.
            (0..n_t)
                .into_par_iter()
                .map(|j| {
                    let below = &solutions[(i - 1) * n_t + j];
                    solve_point(
                        grid.points[i * n_t + j],
                        &manifest,
                        &base_cfg,
                        Some(&below.params),
                    )
                })
                .collect::<Result<Vec<_>>>()?
        };

        // Rescue pass: a point whose objective sits well above the local
        // trend probably fell into a worse basin; retry from fresh starts
        // and keep the better result.
        for j in 0..n_t {
            let expected = if i == 0 {
                trend(
                    j.checked_sub(1).map(|p| row[p].objective),
                    j.checked_sub(2).map(|p| row[p].objective),
                )
            } else {
                trend(
                    Some(solutions[(i - 1) * n_t + j].objective),
                    i.checked_sub(2).map(|p| solutions[p * n_t + j].objective),
                )
            };
            let anomalous = matches!(expected, Some(e) if row[j].objective > e + RESCUE_THRESHOLD);
            if anomalous {
                let flat = i * n_t + j;
                let h = load_hamiltonian(&manifest.resolve(&grid.points[flat].center))?;
                let retried = solve_multistart(
                    &h,
                    &rescue_cfg(flat),
                    Some(&row[j].params),
                    RESCUE_RESTARTS,
                )?;
                if retried.objective < row[j].objective {
                    row[j] = retried;
                }
            }
        }
        solutions.extend(row);
        if !quiet {
            eprintln!("  scan row {}/{} done", i + 1, n_r);
        }
    }

    let rows: Vec<SurfaceRow> = grid
        .points
        .iter()
        .zip(&solutions)
        .map(|(p, s)| SurfaceRow {
            r: p.r,
            theta: p.theta,
            energies: [s.energies[0], s.energies[1], s.energies[2]],
            converged: s.converged,
            params: s.params.clone(),
        })
        .collect();
    write_surface_table(&paths.surfaces(), prov, &rows)
}

fn stage_nac(cfg: &RunConfig, paths: &RunPaths, prov: &Provenance) -> Result<()> {
    let manifest = Manifest::load(&cfg.manifest_path())?;
    manifest.require_files()?;
    let grid = manifest.grid()?;
    let surface_rows = read_surface_table(&paths.surfaces())?;
    if surface_rows.len() != grid.points.len() {
        return Err(CoreError::Alignment(format!(
            "{} surface rows for a {} point manifest",
            surface_rows.len(),
            grid.points.len()
        )));
    }
    let base_cfg = cfg.ssvqe_config();
    require_three_states(&base_cfg)?;

    let mut points: Vec<PointNac<f64>> = grid
        .points
        .par_iter()
        .zip(surface_rows.par_iter())
        .map(|(point, row)| {
            if point.r != row.r || point.theta != row.theta {
                return Err(CoreError::Alignment(format!(
                    "surface table row at r={} theta={} does not match manifest point {}",
                    row.r,
                    row.theta,
                    point.tag()
                )));
            }
            nac_at_point(point, row, &manifest, &base_cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    fix_sign_continuity(&mut points, grid.rs.len(), grid.thetas.len());

    let rows: Vec<NacRow> = grid
        .points
        .iter()
        .zip(points)
        .map(|(p, out)| NacRow {
            r: p.r,
            theta: p.theta,
            pairs: out.pairs,
        })
        .collect();
    write_nac_table(&paths.nac(), prov, &rows)
}

/// Couplings at one geometry: re-prepare the optimized states from the
/// stored angles, rank them by energy, and differentiate the Hamiltonian
/// through the eight displaced integrals files.
fn nac_at_point(
    point: &ManifestPoint,
    row: &SurfaceRow,
    manifest: &Manifest,
    cfg: &SsvqeConfig<f64>,
) -> Result<PointNac<f64>> {
    let h = load_hamiltonian(&manifest.resolve(&point.center))?;
    let circuit = AnsatzCircuit::brick_wall(h.n_qubits, cfg.depth);
    if circuit.n_parameters() != row.params.len() {
        return Err(CoreError::Arity {
            expected: circuit.n_parameters(),
            got: row.params.len(),
        });
    }
    let mut ranked = cfg
        .initial_states
        .iter()
        .map(|bits| {
            let state = circuit.prepare(&row.params, bits)?;
            Ok((state.expectation(&h), state))
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let states: Vec<_> = ranked.into_iter().map(|(_, s)| s).collect();

    let files = point.files();
    let displaced = files[1..]
        .iter()
        .map(|f| load_hamiltonian(&manifest.resolve(f)))
        .collect::<Result<Vec<_>>>()?;
    let set = DisplacedSet {
        y1: (&displaced[0], &displaced[1]),
        z1: (&displaced[2], &displaced[3]),
        y2: (&displaced[4], &displaced[5]),
        z2: (&displaced[6], &displaced[7]),
    };
    point_nac(
        &states,
        &row.energies,
        &set,
        manifest.delta_r,
        point.theta,
    )
}

fn stage_interp(cfg: &RunConfig, paths: &RunPaths, prov: &Provenance) -> Result<()> {
    let surface_rows = read_surface_table(&paths.surfaces())?;
    let nac_rows = read_nac_table(&paths.nac())?;
    if surface_rows.len() != nac_rows.len() {
        return Err(CoreError::Alignment(format!(
            "{} surface rows but {} coupling rows",
            surface_rows.len(),
            nac_rows.len()
        )));
    }

    // Rebuild the coarse axes from the table itself; both tables were
    // written r-major from one manifest, so the tags must tile exactly.
    let mut rs: Vec<f64> = surface_rows.iter().map(|r| r.r).collect();
    let mut thetas: Vec<f64> = surface_rows.iter().map(|r| r.theta).collect();
    rs.dedup();
    thetas.sort_by(|a, b| a.total_cmp(b));
    thetas.dedup();
    if rs.len() * thetas.len() != surface_rows.len() {
        return Err(CoreError::Alignment(format!(
            "surface table is not a rectangular scan: {} x {} vs {} rows",
            rs.len(),
            thetas.len(),
            surface_rows.len()
        )));
    }
    for (f, (srow, nrow)) in surface_rows.iter().zip(&nac_rows).enumerate() {
        let (i, j) = (f / thetas.len(), f % thetas.len());
        if srow.r != rs[i] || srow.theta != thetas[j] {
            return Err(CoreError::Alignment(format!(
                "surface table row {} is out of r-major order",
                f
            )));
        }
        if nrow.r != srow.r || nrow.theta != srow.theta {
            return Err(CoreError::Alignment(format!(
                "coupling table row {} does not match the surface table",
                f
            )));
        }
    }

    let energies: Vec<Vec<f64>> = surface_rows.iter().map(|r| r.energies.to_vec()).collect();
    let nacs: Vec<PointNac<f64>> = nac_rows
        .into_iter()
        .map(|r| PointNac { pairs: r.pairs })
        .collect();
    let coarse = assemble(&rs, &thetas, &energies, &nacs)?;
    let spec = cfg.grid.spec();
    let fine = interpolate(&coarse, &spec.rs(), &spec.thetas())?;
    write_fine_bundle(&paths.fine(), prov, &fine)
}

fn stage_dynamics(
    cfg: &RunConfig,
    paths: &RunPaths,
    prov: &Provenance,
    quiet: bool,
) -> Result<()> {
    let bundle = read_fine_bundle(&paths.fine())?;
    // The bundle defines the propagation grid; the config sections supply
    // everything that is not geometry.
    let grid = GridSpec {
        n_r: bundle.rs.len(),
        n_theta: bundle.thetas.len(),
        r_min: bundle.rs[0],
        r_max: *bundle.rs.last().unwrap(),
        theta_min: bundle.thetas[0],
        theta_max: *bundle.thetas.last().unwrap(),
    };
    let mass = cfg.mass.resolve()?;
    let setup = DynamicsSetup {
        grid,
        mass,
        v_lower: bundle.e_lower,
        v_upper: bundle.e_upper,
        f_r: bundle.f_r,
        f_theta: bundle.f_theta,
        cap: cfg.cap.spec(),
    };
    let (e_vib, psi0) = ground_wavepacket(&grid, mass, &bundle.e_ground)?;

    // Timing must be fixed before the propagation call so requested
    // femtosecond marks land on definite step indices.
    let h = CoupledHamiltonian::new(&setup)?;
    let dt = match cfg.dynamics.dt {
        Some(d) => d,
        None => 0.9 / h.spectral_radius(),
    };
    let t_total_au = cfg.dynamics.t_total_fs / AU_TIME_FS;
    let n_steps = (t_total_au / dt).ceil().max(1.0) as usize;
    let record_au = cfg.dynamics.record_every_fs / AU_TIME_FS;
    let record_stride = ((record_au / dt).round() as usize).max(1);
    let snapshot_steps: Vec<usize> = cfg
        .dynamics
        .snapshot_times_fs
        .iter()
        .map(|t_fs| (t_fs / AU_TIME_FS / dt).round() as usize)
        .filter(|&s| s <= n_steps)
        .collect();

    let result = propagate(
        &setup,
        &psi0,
        &PropagationConfig {
            dt: Some(dt),
            n_steps,
            record_stride,
            snapshot_steps,
        },
    )?;

    if !quiet {
        eprintln!(
            "  initial packet zero-point energy {:.6} hartree, dt {:.4} au, {} steps",
            e_vib, result.dt, n_steps
        );
    }
    let comments = vec![
        format!("initial_packet_zero_point_hartree {:.17e}", e_vib),
        format!("dt_au {:.17e}", result.dt),
    ];
    write_populations(&paths.populations(), prov, &comments, &result.series)?;

    // Clear stale snapshots so reruns with fewer requested times do not
    // leave orphans behind.
    let snap_dir = paths.snapshot_dir();
    if snap_dir.is_dir() {
        std::fs::remove_dir_all(&snap_dir).map_err(|e| io_err(&snap_dir, e))?;
    }
    if !result.snapshots.is_empty() {
        std::fs::create_dir_all(&snap_dir).map_err(|e| io_err(&snap_dir, e))?;
        for (k, snap) in result.snapshots.iter().enumerate() {
            write_snapshot(&paths.snapshot(k), prov, &bundle.rs, &bundle.thetas, snap)?;
        }
    }
    Ok(())
}

fn stage_plotdata(_cfg: &RunConfig, paths: &RunPaths, prov: &Provenance) -> Result<()> {
    // Parsing is the validation; only artifacts that read back cleanly are
    // re-emitted.
    read_populations(&paths.populations())?;
    let plot_dir = paths.plot_dir();
    std::fs::create_dir_all(&plot_dir).map_err(|e| io_err(&plot_dir, e))?;
    let dst = paths.plot_populations();
    std::fs::copy(paths.populations(), &dst).map_err(|e| io_err(&dst, e))?;

    // Stale plot snapshots from an earlier, longer run would otherwise
    // survive a re-emission.
    for entry in std::fs::read_dir(&plot_dir).map_err(|e| io_err(&plot_dir, e))? {
        let entry = entry.map_err(|e| io_err(&plot_dir, e))?;
        let name = entry.file_name();
        if name.to_string_lossy().starts_with("snapshot_") {
            std::fs::remove_file(entry.path()).map_err(|e| io_err(&entry.path(), e))?;
        }
    }

    let snap_dir = paths.snapshot_dir();
    if snap_dir.is_dir() {
        let mut names: Vec<String> = std::fs::read_dir(&snap_dir)
            .map_err(|e| io_err(&snap_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.starts_with("snapshot_") && n.ends_with(".tsv"))
            .collect();
        names.sort();
        for (k, name) in names.iter().enumerate() {
            let table = read_snapshot(&snap_dir.join(name))?;
            write_plot_snapshot(&paths.plot_snapshot(k), prov, &table)?;
        }
    }
    Ok(())
}
