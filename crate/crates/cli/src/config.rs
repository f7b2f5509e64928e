//! Declarative run configuration.
//!
//! One TOML file drives a whole run: where the geometry manifest lives,
//! where artifacts go, the seed, and optional sections overriding the
//! electronic solver, propagation grid, nuclear mass, edge absorber and
//! time stepping. Absent sections mean the documented defaults; a section
//! that is present only overrides the fields it names.
//!
//! The global `seed` is the only randomness source in a run. It overrides
//! any seed in the `[ssvqe]` section so determinism is single-sourced.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use nadyn_core::dynamics::{CapSpec, GridSpec, MASS_DEUTERIUM, MASS_HYDROGEN};
use nadyn_core::ssvqe::SsvqeConfig;
use nadyn_core::{CoreError, Result};

use crate::io::{config_hash, io_err};
use crate::manifest::{toml_error_line, Manifest};
use crate::pipeline::{RunPaths, Stage};

/// Relative tolerance for user-claimed grid spacings against the spacing
/// derived from range and count.
const SPACING_TOLERANCE: f64 = 5e-5;

#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    /// Geometry manifest path, relative to this config file.
    pub manifest: PathBuf,
    /// Artifact directory, relative to this config file.
    pub output_dir: PathBuf,
    /// Sole randomness source for the run.
    pub seed: u64,
    /// Pipeline stages to execute; absent means all, in order.
    #[serde(default)]
    pub stages: Option<Vec<Stage>>,
    /// Electronic solver settings; absent means the standard setup.
    #[serde(default)]
    pub ssvqe: Option<SsvqeConfig<f64>>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub mass: MassSpec,
    #[serde(default)]
    pub cap: CapSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(skip)]
    base: PathBuf,
    #[serde(skip)]
    hash: String,
}

/// Propagation grid plus optional user-claimed spacings. The claims are
/// redundant (spacing follows from range and count) and exist to be
/// checked: a mismatch is a config error, caught at validation.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub n_r: usize,
    pub n_theta: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub dr: Option<f64>,
    pub dtheta: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::standard();
        GridSection {
            n_r: g.n_r,
            n_theta: g.n_theta,
            r_min: g.r_min,
            r_max: g.r_max,
            theta_min: g.theta_min,
            theta_max: g.theta_max,
            dr: None,
            dtheta: None,
        }
    }
}

impl GridSection {
    pub fn spec(&self) -> GridSpec<f64> {
        GridSpec {
            n_r: self.n_r,
            n_theta: self.n_theta,
            r_min: self.r_min,
            r_max: self.r_max,
            theta_min: self.theta_min,
            theta_max: self.theta_max,
        }
    }
}

/// Nuclear mass: a preset label or an explicit value in electron masses.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MassSpec {
    Named(String),
    Value(f64),
}

impl Default for MassSpec {
    fn default() -> Self {
        MassSpec::Named("H".into())
    }
}

impl MassSpec {
    pub fn resolve(&self) -> Result<f64> {
        match self {
            MassSpec::Named(name) => match name.as_str() {
                "H" | "h" => Ok(MASS_HYDROGEN),
                "D" | "d" => Ok(MASS_DEUTERIUM),
                other => Err(CoreError::Config(format!(
                    "unknown mass label {:?}; use \"H\", \"D\", or a number in electron masses",
                    other
                ))),
            },
            MassSpec::Value(v) => {
                if v.is_finite() && *v > 0.0 {
                    Ok(*v)
                } else {
                    Err(CoreError::Config(format!("mass must be positive, got {}", v)))
                }
            }
        }
    }
}

/// Edge absorber settings; strength zero disables absorption entirely.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct CapSection {
    pub strength: f64,
    /// Ramp widths in grid units (bohr, radians).
    pub width_r: f64,
    pub width_theta: f64,
}

impl Default for CapSection {
    fn default() -> Self {
        let c = CapSpec::standard();
        CapSection {
            strength: c.strength,
            width_r: c.width_r,
            width_theta: c.width_theta,
        }
    }
}

impl CapSection {
    pub fn spec(&self) -> CapSpec<f64> {
        CapSpec {
            strength: self.strength,
            width_r: self.width_r,
            width_theta: self.width_theta,
        }
    }
}

/// Time stepping and output cadence. `dt` is in atomic time units; absent
/// means nine tenths of the stability bound derived from the assembled
/// Hamiltonian's spectral radius. Everything user-facing is femtoseconds.
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct DynamicsSection {
    pub dt: Option<f64>,
    pub t_total_fs: f64,
    pub record_every_fs: f64,
    pub snapshot_times_fs: Vec<f64>,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            dt: None,
            t_total_fs: 16.0,
            record_every_fs: 0.1,
            snapshot_times_fs: vec![0.0, 2.4, 4.8, 8.4],
        }
    }
}

/// Validation outcome: fatal findings block a run, warnings do not.
#[derive(Debug, Default)]
pub struct ValidationReport {
    pub fatal: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.fatal.is_empty()
    }
}

impl RunConfig {
    /// Reads and parses a config file. The raw file bytes are hashed here;
    /// that hash goes into every artifact header.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            line: toml_error_line(&text, &e),
            msg: e.message().to_string(),
        })?;
        cfg.base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        cfg.hash = config_hash(text.as_bytes());
        Ok(cfg)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.base.join(&self.manifest)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base.join(&self.output_dir)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Stage selection in pipeline order, deduplicated.
    pub fn selected_stages(&self) -> Vec<Stage> {
        let mut stages = match &self.stages {
            Some(s) if !s.is_empty() => s.clone(),
            _ => Stage::ALL.to_vec(),
        };
        stages.sort_by_key(|s| s.index());
        stages.dedup();
        stages
    }

    /// Electronic solver settings with the run seed injected.
    pub fn ssvqe_config(&self) -> SsvqeConfig<f64> {
        let mut cfg = match &self.ssvqe {
            Some(c) => c.clone(),
            None => SsvqeConfig::standard(self.seed),
        };
        cfg.seed = self.seed;
        cfg
    }

    /// Checks every statically checkable invariant. Stage-aware: a manifest
    /// problem only blocks a run whose selected stages read the manifest,
    /// and a missing upstream artifact only blocks a resume that needs it.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let stages = self.selected_stages();

        self.check_grid(&mut report);
        self.check_cap(&mut report);
        self.check_dynamics(&mut report);
        if let Err(e) = self.mass.resolve() {
            report.fatal.push(e.to_string());
        }
        if let Some(ssvqe) = &self.ssvqe {
            check_ssvqe(ssvqe, &mut report);
        }
        self.check_stage_chain(&stages, &mut report);
        if stages.iter().any(|s| s.reads_manifest()) {
            self.check_manifest(&stages, &mut report);
        } else if !self.manifest_path().is_file() {
            report.warnings.push(format!(
                "manifest {} does not exist, but no selected stage reads it",
                self.manifest_path().display()
            ));
        }
        report
    }

    fn check_grid(&self, report: &mut ValidationReport) {
        let g = &self.grid;
        if g.n_r < 2 || g.n_theta < 2 {
            report
                .fatal
                .push(format!("grid must be at least 2 x 2, got {} x {}", g.n_r, g.n_theta));
            return;
        }
        for (name, lo, hi) in [("r", g.r_min, g.r_max), ("theta", g.theta_min, g.theta_max)] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                report
                    .fatal
                    .push(format!("grid {} range [{}, {}] is not increasing", name, lo, hi));
                return;
            }
        }
        // Claimed spacings must match the spacing derived from range and
        // count; the message carries the derived value.
        let checks = [
            ("dr", g.dr, (g.r_max - g.r_min) / (g.n_r - 1) as f64),
            ("dtheta", g.dtheta, (g.theta_max - g.theta_min) / (g.n_theta - 1) as f64),
        ];
        for (name, claimed, derived) in checks {
            if let Some(c) = claimed {
                if (c - derived).abs() > SPACING_TOLERANCE {
                    report.fatal.push(format!(
                        "grid {} = {} is inconsistent with the range and count; expected {:.4}",
                        name, c, derived
                    ));
                }
            }
        }
        if g.n_r < 16 || g.n_theta < 16 {
            report.warnings.push(format!(
                "propagation grid {} x {} is coarse; zero-point energies will be rough",
                g.n_r, g.n_theta
            ));
        }
    }

    fn check_cap(&self, report: &mut ValidationReport) {
        let c = &self.cap;
        if !(c.strength.is_finite() && c.strength >= 0.0) {
            report
                .fatal
                .push(format!("absorber strength must be nonnegative, got {}", c.strength));
        }
        if c.strength > 0.0 {
            let g = &self.grid;
            let half_r = 0.5 * (g.r_max - g.r_min);
            let half_t = 0.5 * (g.theta_max - g.theta_min);
            for (name, width, half) in
                [("width_r", c.width_r, half_r), ("width_theta", c.width_theta, half_t)]
            {
                if !(width > 0.0 && width.is_finite()) {
                    report
                        .fatal
                        .push(format!("absorber {} must be positive, got {}", name, width));
                } else if width >= half {
                    report.fatal.push(format!(
                        "absorber {} = {} covers half the axis or more (range {})",
                        name,
                        width,
                        2.0 * half
                    ));
                }
            }
        }
    }

    fn check_dynamics(&self, report: &mut ValidationReport) {
        let d = &self.dynamics;
        if !(d.t_total_fs > 0.0 && d.t_total_fs.is_finite()) {
            report
                .fatal
                .push(format!("total time must be positive, got {} fs", d.t_total_fs));
        }
        if !(d.record_every_fs > 0.0 && d.record_every_fs.is_finite()) {
            report.fatal.push(format!(
                "record interval must be positive, got {} fs",
                d.record_every_fs
            ));
        }
        if let Some(dt) = d.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                report.fatal.push(format!("dt must be positive, got {}", dt));
            }
        }
        for &t in &d.snapshot_times_fs {
            if !(t >= 0.0 && t.is_finite()) {
                report
                    .fatal
                    .push(format!("snapshot time {} fs is not a nonnegative number", t));
            } else if t > d.t_total_fs {
                report.warnings.push(format!(
                    "snapshot time {} fs is beyond the {} fs horizon and will be skipped",
                    t, d.t_total_fs
                ));
            }
        }
    }

    fn check_stage_chain(&self, stages: &[Stage], report: &mut ValidationReport) {
        for w in stages.windows(2) {
            if w[1].index() != w[0].index() + 1 {
                report.fatal.push(format!(
                    "stage selection must be contiguous; {} does not follow {}",
                    w[1], w[0]
                ));
                return;
            }
        }
        // A resume starting mid-chain needs the upstream artifacts on disk.
        let paths = RunPaths::new(&self.output_dir());
        if let Some(first) = stages.first() {
            for artifact in first.required_artifacts(&paths) {
                if !artifact.is_file() {
                    report.fatal.push(format!(
                        "stage {} needs {} from an earlier run, and it does not exist",
                        first,
                        artifact.display()
                    ));
                }
            }
        }
    }

    fn check_manifest(&self, stages: &[Stage], report: &mut ValidationReport) {
        let path = self.manifest_path();
        let manifest = match Manifest::load(&path) {
            Ok(m) => m,
            Err(e) => {
                report.fatal.push(e.to_string());
                return;
            }
        };
        report.fatal.extend(manifest.missing_files());
        let grid = match manifest.grid() {
            Ok(g) => g,
            Err(e) => {
                report.fatal.push(e.to_string());
                return;
            }
        };
        if stages.contains(&Stage::Interp) {
            let g = &self.grid;
            let (r_lo, r_hi) = (grid.rs[0], *grid.rs.last().unwrap());
            let (t_lo, t_hi) = (grid.thetas[0], *grid.thetas.last().unwrap());
            if g.r_min < r_lo || g.r_max > r_hi || g.theta_min < t_lo || g.theta_max > t_hi {
                report.fatal.push(format!(
                    "propagation grid [{}, {}] x [{}, {}] extends outside the scanned \
                     region [{}, {}] x [{}, {}]",
                    g.r_min, g.r_max, g.theta_min, g.theta_max, r_lo, r_hi, t_lo, t_hi
                ));
            }
            if grid.rs.len() < 4 || grid.thetas.len() < 4 {
                report.warnings.push(format!(
                    "coarse grid {} x {} is small; spline resampling quality degrades \
                     below 4 points per axis",
                    grid.rs.len(),
                    grid.thetas.len()
                ));
            }
        }
    }
}

fn check_ssvqe(cfg: &SsvqeConfig<f64>, report: &mut ValidationReport) {
    if cfg.weights.is_empty() || cfg.weights.len() != cfg.initial_states.len() {
        report.fatal.push(format!(
            "{} solver weights for {} reference states",
            cfg.weights.len(),
            cfg.initial_states.len()
        ));
        return;
    }
    if cfg.weights.windows(2).any(|w| w[1] >= w[0]) || cfg.weights[cfg.weights.len() - 1] <= 0.0
    {
        report
            .fatal
            .push("solver weights must be strictly decreasing and positive".into());
    }
    let lengths: std::collections::BTreeSet<usize> =
        cfg.initial_states.iter().map(|s| s.len()).collect();
    if lengths.len() > 1 {
        report
            .fatal
            .push("reference bitstrings must share one length".into());
    }
    for s in &cfg.initial_states {
        if !s.chars().all(|c| c == '0' || c == '1') {
            report
                .fatal
                .push(format!("reference state {:?} is not a bitstring", s));
        }
    }
    if cfg.depth == 0 {
        report.fatal.push("ansatz depth must be at least 1".into());
    }
    if cfg.max_iters == 0 {
        report.fatal.push("optimizer needs at least one iteration".into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("run.toml");
        std::fs::write(&path, body).unwrap();
        path
    }

    fn fixture(dir: &Path) -> String {
        let model = nadyn_core::synthetic::TwoSurfaceModel::standard();
        let path = crate::manifest::write_synthetic_fixture(
            dir,
            &model,
            &[1.6, 2.0, 2.4, 2.8],
            &[1.2, 1.8, 2.4, 3.0],
            1e-3,
        )
        .unwrap();
        path.file_name().unwrap().to_str().unwrap().to_string()
    }

    #[test]
    fn minimal_config_validates_clean() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = fixture(tmp.path());
        let body = format!(
            "manifest = \"{}\"\noutput_dir = \"out\"\nseed = 11\n\n\
             [grid]\nn_r = 32\nn_theta = 32\nr_min = 1.6\nr_max = 2.8\n\
             theta_min = 1.2\ntheta_max = 3.0\n",
            manifest
        );
        let cfg = RunConfig::load(&write_config(tmp.path(), &body)).unwrap();
        let report = cfg.validate();
        assert!(report.ok(), "fatal: {:?}", report.fatal);
        assert_eq!(cfg.selected_stages().len(), 5);
        assert_eq!(cfg.ssvqe_config().seed, 11);
        assert!((cfg.mass.resolve().unwrap() - MASS_HYDROGEN).abs() < 1e-9);
    }

    #[test]
    fn claimed_spacing_mismatch_reports_the_derived_value() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = fixture(tmp.path());
        // The standard grid's angular spacing is 0.0409; claim a wrong one.
        let body = format!(
            "manifest = \"{}\"\noutput_dir = \"out\"\nseed = 0\n\n[grid]\ndtheta = 0.05\n",
            manifest
        );
        let cfg = RunConfig::load(&write_config(tmp.path(), &body)).unwrap();
        let report = cfg.validate();
        let msg = report
            .fatal
            .iter()
            .find(|m| m.contains("dtheta"))
            .expect("expected a dtheta finding");
        assert!(msg.contains("0.0409"), "{}", msg);

        // The paper's rounded value is consistent with the derived spacing.
        let body = format!(
            "manifest = \"{}\"\noutput_dir = \"out\"\nseed = 0\n\n\
             [grid]\ndr = 0.0443\ndtheta = 0.0409\n",
            manifest
        );
        let cfg = RunConfig::load(&write_config(tmp.path(), &body)).unwrap();
        let report = cfg.validate();
        assert!(
            !report.fatal.iter().any(|m| m.contains("dtheta") || m.contains("dr")),
            "{:?}",
            report.fatal
        );
    }

    #[test]
    fn missing_integrals_file_is_fatal_with_the_tag() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = fixture(tmp.path());
        let victim = tmp.path().join("p01_02/z1_minus.fcidump");
        std::fs::remove_file(&victim).unwrap();
        let body = format!("manifest = \"{}\"\noutput_dir = \"out\"\nseed = 0\n", manifest);
        let cfg = RunConfig::load(&write_config(tmp.path(), &body)).unwrap();
        let report = cfg.validate();
        assert!(!report.ok());
        let msg = report.fatal.iter().find(|m| m.contains("z1_minus")).unwrap();
        assert!(msg.contains("r=2.0000 theta=2.4000"), "{}", msg);
    }

    #[test]
    fn stage_chain_rules_are_enforced() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = fixture(tmp.path());
        let body = format!(
            "manifest = \"{}\"\noutput_dir = \"out\"\nseed = 0\n\
             stages = [\"surfaces\", \"interp\"]\n",
            manifest
        );
        let cfg = RunConfig::load(&write_config(tmp.path(), &body)).unwrap();
        let report = cfg.validate();
        assert!(report.fatal.iter().any(|m| m.contains("contiguous")), "{:?}", report.fatal);

        // A mid-chain start without upstream artifacts is fatal; stages that
        // skip the manifest demote its absence to a warning.
        let body = "manifest = \"nowhere.toml\"\noutput_dir = \"out\"\nseed = 0\n\
                    stages = [\"dynamics\"]\n";
        let cfg = RunConfig::load(&write_config(tmp.path(), body)).unwrap();
        let report = cfg.validate();
        assert!(report.fatal.iter().any(|m| m.contains("fine_surfaces")), "{:?}", report.fatal);
        assert!(!report.fatal.iter().any(|m| m.contains("nowhere")));
        assert!(report.warnings.iter().any(|m| m.contains("nowhere")));
    }

    #[test]
    fn masses_resolve_by_label_or_value() {
        assert!((MassSpec::Named("D".into()).resolve().unwrap() - MASS_DEUTERIUM).abs() < 1e-9);
        assert!((MassSpec::Value(2000.0).resolve().unwrap() - 2000.0).abs() < 1e-12);
        assert!(MassSpec::Named("He".into()).resolve().is_err());
        assert!(MassSpec::Value(-5.0).resolve().is_err());
    }

    #[test]
    fn propagation_grid_outside_the_scan_is_fatal() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = fixture(tmp.path());
        let body = format!(
            "manifest = \"{}\"\noutput_dir = \"out\"\nseed = 0\n\n\
             [grid]\nr_min = 1.0\nr_max = 2.8\ntheta_min = 1.2\ntheta_max = 3.0\n",
            manifest
        );
        let cfg = RunConfig::load(&write_config(tmp.path(), &body)).unwrap();
        let report = cfg.validate();
        assert!(
            report.fatal.iter().any(|m| m.contains("outside the scanned")),
            "{:?}",
            report.fatal
        );
    }
}
