//! Geometry manifest: which integrals file belongs to which grid point.
//!
//! The electronic-structure inputs are one FCIDUMP file per geometry, nine
//! geometries per coarse-grid point: the center plus both in-plane Cartesian
//! displacements of each hydrogen. The manifest is a small TOML file listing
//! those paths with their (r, theta) tags and the single global displacement
//! step used to generate them. Paths are resolved relative to the manifest
//! file's own directory so a fixture tree can be moved wholesale.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nadyn_core::synthetic::{
    displaced_geometries, internals, TwoSurfaceModel, DISPLACEMENT_LABELS,
};
use nadyn_core::{CoreError, Result};

use crate::io::io_err;

/// One coarse-grid point and its nine integrals files.
///
/// The file fields mirror [`DISPLACEMENT_LABELS`]: the undisplaced center,
/// then plus/minus displacements of hydrogen 1 along y and z, then the same
/// four for hydrogen 2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestPoint {
    /// Symmetric stretch, bohr.
    pub r: f64,
    /// Bond angle, radians.
    pub theta: f64,
    pub center: String,
    pub y1_plus: String,
    pub y1_minus: String,
    pub z1_plus: String,
    pub z1_minus: String,
    pub y2_plus: String,
    pub y2_minus: String,
    pub z2_plus: String,
    pub z2_minus: String,
}

impl ManifestPoint {
    /// The nine file references in [`DISPLACEMENT_LABELS`] order.
    pub fn files(&self) -> [&str; 9] {
        [
            &self.center,
            &self.y1_plus,
            &self.y1_minus,
            &self.z1_plus,
            &self.z1_minus,
            &self.y2_plus,
            &self.y2_minus,
            &self.z2_plus,
            &self.z2_minus,
        ]
    }

    /// Human-readable geometry tag used in diagnostics.
    pub fn tag(&self) -> String {
        format!("r={:.4} theta={:.4}", self.r, self.theta)
    }
}

/// Parsed manifest plus the directory its relative paths resolve against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    /// Cartesian displacement step shared by every off-center file, bohr.
    pub delta_r: f64,
    pub points: Vec<ManifestPoint>,
    #[serde(skip)]
    base: PathBuf,
}

/// Manifest points reordered onto their rectangular grid.
///
/// `points` is r-major: the point at stretch index `i` and angle index `j`
/// sits at `points[i * thetas.len() + j]`.
#[derive(Debug)]
pub struct ManifestGrid<'a> {
    pub rs: Vec<f64>,
    pub thetas: Vec<f64>,
    pub points: Vec<&'a ManifestPoint>,
}

impl Manifest {
    /// Reads and parses a manifest file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut m: Manifest = toml::from_str(&text).map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            line: toml_error_line(&text, &e),
            msg: e.message().to_string(),
        })?;
        m.base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(m)
    }

    /// Resolves a point's file reference against the manifest directory.
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base.join(relative)
    }

    /// Checks rectangular coverage and returns the points in r-major order.
    ///
    /// Coverage means: with `nr` distinct stretch values and `nt` distinct
    /// angle values, every combination appears exactly once. Tags are
    /// compared bit-exactly; they all come from the same parsed text, so
    /// equal geometries have equal floats.
    pub fn grid(&self) -> Result<ManifestGrid<'_>> {
        if self.points.is_empty() {
            return Err(CoreError::Config("manifest lists no grid points".into()));
        }
        if !(self.delta_r > 0.0) || !self.delta_r.is_finite() {
            return Err(CoreError::Config(format!(
                "displacement step must be positive, got {}",
                self.delta_r
            )));
        }
        let mut rs: Vec<f64> = self.points.iter().map(|p| p.r).collect();
        let mut thetas: Vec<f64> = self.points.iter().map(|p| p.theta).collect();
        rs.sort_by(|a, b| a.total_cmp(b));
        rs.dedup();
        thetas.sort_by(|a, b| a.total_cmp(b));
        thetas.dedup();
        if rs.len() * thetas.len() != self.points.len() {
            return Err(CoreError::Config(format!(
                "manifest is not a rectangular grid: {} distinct r times {} distinct \
                 theta but {} points",
                rs.len(),
                thetas.len(),
                self.points.len()
            )));
        }
        let mut slot: HashMap<(u64, u64), &ManifestPoint> = HashMap::new();
        for p in &self.points {
            if slot.insert((p.r.to_bits(), p.theta.to_bits()), p).is_some() {
                return Err(CoreError::Config(format!("duplicate manifest point at {}", p.tag())));
            }
        }
        let mut points = Vec::with_capacity(self.points.len());
        for &r in &rs {
            for &t in &thetas {
                match slot.get(&(r.to_bits(), t.to_bits())) {
                    Some(p) => points.push(*p),
                    None => {
                        return Err(CoreError::Config(format!(
                            "manifest grid has a hole at r={:.4} theta={:.4}",
                            r, t
                        )))
                    }
                }
            }
        }
        Ok(ManifestGrid { rs, thetas, points })
    }

    /// Lists every referenced file that does not exist on disk.
    ///
    /// Each entry names the geometry tag and displacement label, which is
    /// the form the validator reports.
    pub fn missing_files(&self) -> Vec<String> {
        let mut missing = Vec::new();
        for p in &self.points {
            for (label, file) in DISPLACEMENT_LABELS.iter().zip(p.files()) {
                let full = self.resolve(file);
                if !full.is_file() {
                    missing.push(format!(
                        "missing integrals file for {} ({}): {}",
                        p.tag(),
                        label,
                        full.display()
                    ));
                }
            }
        }
        missing
    }

    /// Errors on the first missing file; used by stages that are past
    /// validation and need a hard stop.
    pub fn require_files(&self) -> Result<()> {
        match self.missing_files().into_iter().next() {
            Some(msg) => Err(CoreError::Config(msg)),
            None => Ok(()),
        }
    }
}

pub(crate) fn toml_error_line(text: &str, err: &toml::de::Error) -> usize {
    match err.span() {
        Some(span) => text[..span.start.min(text.len())].matches('\n').count() + 1,
        None => 0,
    }
}

/// Writes a complete synthetic fixture tree: nine FCIDUMP files per grid
/// point plus the manifest that indexes them. Returns the manifest path.
///
/// Layout under `dir` is one subdirectory per point, `p{i:02}_{j:02}` in
/// r-major order, each holding `<label>.fcidump` for the nine displacement
/// labels.
pub fn write_synthetic_fixture(
    dir: &Path,
    model: &TwoSurfaceModel<f64>,
    rs: &[f64],
    thetas: &[f64],
    delta_r: f64,
) -> Result<PathBuf> {
    let mut points = Vec::with_capacity(rs.len() * thetas.len());
    for (i, &r) in rs.iter().enumerate() {
        for (j, &theta) in thetas.iter().enumerate() {
            let sub = format!("p{:02}_{:02}", i, j);
            let subdir = dir.join(&sub);
            std::fs::create_dir_all(&subdir).map_err(|e| io_err(&subdir, e))?;
            let mut files = Vec::with_capacity(9);
            for (label, geom) in DISPLACEMENT_LABELS
                .iter()
                .zip(displaced_geometries(r, theta, delta_r)?)
            {
                let (r1, r2, ang) = internals(&geom);
                let path = subdir.join(format!("{}.fcidump", label));
                std::fs::write(&path, model.fcidump_text(r1, r2, ang))
                    .map_err(|e| io_err(&path, e))?;
                files.push(format!("{}/{}.fcidump", sub, label));
            }
            points.push(ManifestPoint {
                r,
                theta,
                center: files[0].clone(),
                y1_plus: files[1].clone(),
                y1_minus: files[2].clone(),
                z1_plus: files[3].clone(),
                z1_minus: files[4].clone(),
                y2_plus: files[5].clone(),
                y2_minus: files[6].clone(),
                z2_plus: files[7].clone(),
                z2_minus: files[8].clone(),
            });
        }
    }
    let manifest = Manifest {
        delta_r,
        points,
        base: dir.to_path_buf(),
    };
    let path = dir.join("manifest.toml");
    let text = toml::to_string(&manifest)
        .map_err(|e| CoreError::Config(format!("manifest serialization failed: {}", e)))?;
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_manifest(dir: &Path) -> PathBuf {
        let model = TwoSurfaceModel::standard();
        write_synthetic_fixture(dir, &model, &[1.8, 2.0, 2.2], &[1.6, 2.0], 1e-3).unwrap()
    }

    #[test]
    fn fixture_roundtrip_covers_the_grid() {
        let tmp = tempfile::tempdir().unwrap();
        let path = sample_manifest(tmp.path());
        let m = Manifest::load(&path).unwrap();
        assert_eq!(m.points.len(), 6);
        assert!((m.delta_r - 1e-3).abs() < 1e-15);
        let grid = m.grid().unwrap();
        assert_eq!(grid.rs, vec![1.8, 2.0, 2.2]);
        assert_eq!(grid.thetas, vec![1.6, 2.0]);
        // r-major: second block starts at the middle stretch.
        assert!((grid.points[2].r - 2.0).abs() < 1e-15);
        assert!((grid.points[2].theta - 1.6).abs() < 1e-15);
        assert!(m.missing_files().is_empty());
        m.require_files().unwrap();
    }

    #[test]
    fn missing_file_is_named_by_tag_and_label() {
        let tmp = tempfile::tempdir().unwrap();
        let path = sample_manifest(tmp.path());
        let m = Manifest::load(&path).unwrap();
        std::fs::remove_file(m.resolve(&m.points[1].z2_minus)).unwrap();
        let missing = m.missing_files();
        assert_eq!(missing.len(), 1);
        assert!(missing[0].contains("z2_minus"), "{}", missing[0]);
        assert!(missing[0].contains(&m.points[1].tag()), "{}", missing[0]);
        assert!(m.require_files().is_err());
    }

    #[test]
    fn non_rectangular_grids_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = sample_manifest(tmp.path());
        let mut m = Manifest::load(&path).unwrap();
        let dropped = m.points.pop().unwrap();
        assert!(matches!(m.grid(), Err(CoreError::Config(_))));

        // Duplicate tag: same count as the full grid but a repeated point.
        m.points.push(m.points[0].clone());
        let err = m.grid().unwrap_err();
        assert!(format!("{}", err).contains("duplicate"));

        // Restore the dropped point alongside the duplicate: count mismatch.
        m.points.push(dropped);
        assert!(m.grid().is_err());
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("bad.toml");
        std::fs::write(&path, "delta_r = 0.001\n[[points]]\nr = \"x\"\n").unwrap();
        match Manifest::load(&path) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }
}
