//! Text artifact formats shared by the pipeline stages.
//!
//! Every file is tab-separated text with `#` comment lines, floats printed
//! with 17 significant digits so a read-back is bit-exact, and a common
//! provenance header: artifact kind and format version, package version,
//! config hash, seed. No timestamps anywhere; two runs from the same config
//! and seed must produce byte-identical files.
//!
//! Kinds: `surface-scan` (raw per-point energies and optimizer state),
//! `couplings` (per-pair derivative couplings with residuals and masks),
//! `fine-surfaces` (the propagation-grid bundle: axes plus five field
//! columns), `populations` (time series), `snapshot` (one density field per
//! requested time), and the plot re-emissions.

use std::fmt::Write as _;
use std::path::Path;

use nadyn_core::dynamics::{DensitySnapshot, PopulationSample, AU_TIME_FS};
use nadyn_core::nac::PairNac;
use nadyn_core::surfaces::FineSurfaces;
use nadyn_core::{CoreError, Result};

/// What every artifact header records besides the kind.
#[derive(Debug, Clone)]
pub struct Provenance {
    /// First 16 hex digits of the SHA-256 of the config file bytes.
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self, kind: &str) -> String {
        format!(
            "# nadyn {} v1\n# package {}\n# config {}\n# seed {}\n",
            kind,
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed
        )
    }
}

/// Computes the truncated config hash from the raw config file bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        let _ = write!(out, "{:02x}", b);
    }
    out
}

fn fmt_f(v: f64) -> String {
    format!("{:.17e}", v)
}

pub(crate) fn io_err(path: &Path, err: std::io::Error) -> CoreError {
    CoreError::io(path.display().to_string(), err)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> CoreError {
    CoreError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Data lines of a table file: comment and blank lines stripped, each kept
/// line split on whitespace, paired with its 1-based line number.
fn data_lines(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut values = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_error(path, i + 1, format!("not a number: {:?}", tok)))?;
            values.push(v);
        }
        rows.push((i + 1, values));
    }
    Ok(rows)
}

/// One raw-scan row: energies plus the optimizer state that produced them.
#[derive(Debug, Clone)]
pub struct SurfaceRow {
    pub r: f64,
    pub theta: f64,
    pub energies: [f64; 3],
    pub converged: bool,
    pub params: Vec<f64>,
}

/// Writes the raw surface table, one row per grid point in r-major order:
/// `r theta e0 e1 e2 converged n_params p0 .. p_{n-1}`.
pub fn write_surface_table(path: &Path, prov: &Provenance, rows: &[SurfaceRow]) -> Result<()> {
    let mut out = prov.header("surface-scan");
    out.push_str("# columns: r theta e0 e1 e2 converged n_params params...\n");
    for row in rows {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt_f(row.r),
            fmt_f(row.theta),
            fmt_f(row.energies[0]),
            fmt_f(row.energies[1]),
            fmt_f(row.energies[2]),
            u8::from(row.converged),
            row.params.len()
        );
        for p in &row.params {
            let _ = write!(out, "\t{}", fmt_f(*p));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_surface_table(path: &Path) -> Result<Vec<SurfaceRow>> {
    let mut rows = Vec::new();
    for (line, v) in data_lines(path)? {
        if v.len() < 7 {
            return Err(parse_error(path, line, "surface row needs at least 7 fields"));
        }
        let n_params = v[6] as usize;
        if v.len() != 7 + n_params {
            return Err(parse_error(
                path,
                line,
                format!("expected {} parameters, row has {}", n_params, v.len() - 7),
            ));
        }
        rows.push(SurfaceRow {
            r: v[0],
            theta: v[1],
            energies: [v[2], v[3], v[4]],
            converged: v[5] != 0.0,
            params: v[7..].to_vec(),
        });
    }
    Ok(rows)
}

/// Couplings for every state pair at one grid point.
#[derive(Debug, Clone)]
pub struct NacRow {
    pub r: f64,
    pub theta: f64,
    pub pairs: Vec<PairNac<f64>>,
}

/// Writes the coupling table, aligned row-for-row with the surface table:
/// `r theta` then `f_r f_theta residual_r residual_theta masked` per pair.
pub fn write_nac_table(path: &Path, prov: &Provenance, rows: &[NacRow]) -> Result<()> {
    let mut out = prov.header("couplings");
    if let Some(first) = rows.first() {
        let labels: Vec<String> = first
            .pairs
            .iter()
            .map(|p| format!("{}-{}", p.states.0, p.states.1))
            .collect();
        let _ = writeln!(out, "# pairs {}", labels.join(","));
    }
    out.push_str("# columns: r theta then per pair f_r f_theta residual_r residual_theta masked\n");
    for row in rows {
        let _ = write!(out, "{}\t{}", fmt_f(row.r), fmt_f(row.theta));
        for p in &row.pairs {
            let _ = write!(
                out,
                "\t{}\t{}\t{}\t{}\t{}",
                fmt_f(p.f_r),
                fmt_f(p.f_theta),
                fmt_f(p.residual_r),
                fmt_f(p.residual_theta),
                u8::from(p.masked)
            );
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// Reads the coupling table back. The pair labels come from the `# pairs`
/// header line; the `gap` field is not stored (it is implied by the aligned
/// energy table) and is returned as zero.
pub fn read_nac_table(path: &Path) -> Result<Vec<NacRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut labels: Vec<(usize, usize)> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# pairs ") {
            for part in rest.split(',') {
                let mut it = part.trim().split('-');
                let p = it.next().and_then(|s| s.parse().ok());
                let q = it.next().and_then(|s| s.parse().ok());
                match (p, q) {
                    (Some(p), Some(q)) => labels.push((p, q)),
                    _ => return Err(parse_error(path, 0, format!("bad pair label {:?}", part))),
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(parse_error(path, 0, "missing `# pairs` header"));
    }
    let width = 2 + 5 * labels.len();
    let mut rows = Vec::new();
    for (line, v) in data_lines(path)? {
        if v.len() != width {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, got {}", width, v.len()),
            ));
        }
        let pairs = labels
            .iter()
            .enumerate()
            .map(|(k, &states)| {
                let b = 2 + 5 * k;
                PairNac {
                    states,
                    f_r: v[b],
                    f_theta: v[b + 1],
                    residual_r: v[b + 2],
                    residual_theta: v[b + 3],
                    gap: 0.0,
                    masked: v[b + 4] != 0.0,
                }
            })
            .collect();
        rows.push(NacRow {
            r: v[0],
            theta: v[1],
            pairs,
        });
    }
    Ok(rows)
}

/// The propagation-grid bundle the dynamics stage consumes: both surfaces
/// of the coupled pair, their couplings, and the ground-state surface the
/// initial packet is relaxed on. All fields r-major over `rs` x `thetas`.
#[derive(Debug, Clone)]
pub struct FineBundle {
    pub rs: Vec<f64>,
    pub thetas: Vec<f64>,
    pub e_ground: Vec<f64>,
    pub e_lower: Vec<f64>,
    pub e_upper: Vec<f64>,
    pub f_r: Vec<f64>,
    pub f_theta: Vec<f64>,
}

/// Writes the fine-surface bundle: axes in the header, then one row per
/// grid point with the five field values. The coupled pair is the upper two
/// states; the ground field exists only to seed the initial packet.
pub fn write_fine_bundle(path: &Path, prov: &Provenance, fine: &FineSurfaces<f64>) -> Result<()> {
    if fine.energies.len() < 3 {
        return Err(CoreError::Dimension(format!(
            "fine bundle needs 3 energy fields, got {}",
            fine.energies.len()
        )));
    }
    let k = fine
        .field_index(1, 2)
        .ok_or_else(|| CoreError::Dimension("no coupling field for the upper pair".into()))?;
    let mut out = prov.header("fine-surfaces");
    let _ = writeln!(
        out,
        "# grid {} x {}\n# filled fractions: energy {} nac {}",
        fine.rs.len(),
        fine.thetas.len(),
        fmt_f(fine.filled_energy_fraction),
        fmt_f(fine.filled_nac_fraction)
    );
    for (tag, axis) in [("# r_axis", &fine.rs), ("# theta_axis", &fine.thetas)] {
        out.push_str(tag);
        for v in axis.iter() {
            let _ = write!(out, " {}", fmt_f(*v));
        }
        out.push('\n');
    }
    out.push_str("# columns: e_ground e_lower e_upper f_r f_theta (rows r-major)\n");
    for i in 0..fine.rs.len() * fine.thetas.len() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            fmt_f(fine.energies[0][i]),
            fmt_f(fine.energies[1][i]),
            fmt_f(fine.energies[2][i]),
            fmt_f(fine.nac_r[k][i]),
            fmt_f(fine.nac_theta[k][i])
        );
    }
    write_text(path, &out)
}

fn parse_axis_line(path: &Path, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| parse_error(path, 0, format!("bad axis value {:?}", tok)))
        })
        .collect()
}

pub fn read_fine_bundle(path: &Path) -> Result<FineBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rs = Vec::new();
    let mut thetas = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# r_axis ") {
            rs = parse_axis_line(path, rest)?;
        } else if let Some(rest) = line.strip_prefix("# theta_axis ") {
            thetas = parse_axis_line(path, rest)?;
        }
    }
    if rs.is_empty() || thetas.is_empty() {
        return Err(parse_error(path, 0, "missing axis header lines"));
    }
    let n = rs.len() * thetas.len();
    let mut bundle = FineBundle {
        rs,
        thetas,
        e_ground: Vec::with_capacity(n),
        e_lower: Vec::with_capacity(n),
        e_upper: Vec::with_capacity(n),
        f_r: Vec::with_capacity(n),
        f_theta: Vec::with_capacity(n),
    };
    for (line, v) in data_lines(path)? {
        if v.len() != 5 {
            return Err(parse_error(
                path,
                line,
                format!("expected 5 field columns, got {}", v.len()),
            ));
        }
        bundle.e_ground.push(v[0]);
        bundle.e_lower.push(v[1]);
        bundle.e_upper.push(v[2]);
        bundle.f_r.push(v[3]);
        bundle.f_theta.push(v[4]);
    }
    if bundle.e_ground.len() != n {
        return Err(parse_error(
            path,
            0,
            format!("{} rows for a {} point grid", bundle.e_ground.len(), n),
        ));
    }
    Ok(bundle)
}

/// Writes the population time series. Column names follow the physical
/// states: `P_B` is the upper (initially populated) surface, `P_A` the
/// lower; `absorbed_*` are the per-surface totals taken by the edge
/// absorber. Times are femtoseconds. `comments` become extra header lines,
/// one `#` line each.
pub fn write_populations(
    path: &Path,
    prov: &Provenance,
    comments: &[String],
    series: &[PopulationSample<f64>],
) -> Result<()> {
    let mut out = prov.header("populations");
    for c in comments {
        let _ = writeln!(out, "# {}", c);
    }
    out.push_str("# columns: t_fs p_b p_a absorbed_a absorbed_b total\n");
    for s in series {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            fmt_f(s.time_au * AU_TIME_FS),
            fmt_f(s.p_upper),
            fmt_f(s.p_lower),
            fmt_f(s.absorbed_lower),
            fmt_f(s.absorbed_upper),
            fmt_f(s.total)
        );
    }
    write_text(path, &out)
}

/// Reads a population series back as rows of the six written columns.
pub fn read_populations(path: &Path) -> Result<Vec<[f64; 6]>> {
    let mut rows = Vec::new();
    for (line, v) in data_lines(path)? {
        if v.len() != 6 {
            return Err(parse_error(
                path,
                line,
                format!("expected 6 columns, got {}", v.len()),
            ));
        }
        rows.push([v[0], v[1], v[2], v[3], v[4], v[5]]);
    }
    Ok(rows)
}

/// A density snapshot read back from disk.
#[derive(Debug, Clone)]
pub struct SnapshotTable {
    pub time_fs: f64,
    /// Rows of `r theta density_b density_a`, r-major.
    pub rows: Vec<[f64; 4]>,
}

/// Writes one density snapshot: `r theta density_b density_a` per grid
/// point, the sampling time in the header.
pub fn write_snapshot(
    path: &Path,
    prov: &Provenance,
    rs: &[f64],
    thetas: &[f64],
    snap: &DensitySnapshot<f64>,
) -> Result<()> {
    let mut out = prov.header("snapshot");
    let _ = writeln!(
        out,
        "# time_fs {}\n# time_au {}",
        fmt_f(snap.time_au * AU_TIME_FS),
        fmt_f(snap.time_au)
    );
    out.push_str("# columns: r theta density_b density_a\n");
    for (i, &r) in rs.iter().enumerate() {
        for (j, &t) in thetas.iter().enumerate() {
            let idx = i * thetas.len() + j;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                fmt_f(r),
                fmt_f(t),
                fmt_f(snap.upper[idx]),
                fmt_f(snap.lower[idx])
            );
        }
    }
    write_text(path, &out)
}

/// Writes a snapshot in plot-ready blocked layout: the same four columns,
/// with one blank line between stretch blocks so gridded plotting tools
/// consume it directly.
pub fn write_plot_snapshot(path: &Path, prov: &Provenance, table: &SnapshotTable) -> Result<()> {
    let mut out = prov.header("plot-snapshot");
    let _ = writeln!(out, "# time_fs {}", fmt_f(table.time_fs));
    out.push_str("# columns: r theta density_b density_a\n");
    let mut prev_r: Option<u64> = None;
    for row in &table.rows {
        let bits = row[0].to_bits();
        if prev_r.is_some() && prev_r != Some(bits) {
            out.push('\n');
        }
        prev_r = Some(bits);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            fmt_f(row[0]),
            fmt_f(row[1]),
            fmt_f(row[2]),
            fmt_f(row[3])
        );
    }
    write_text(path, &out)
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotTable> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut time_fs = None;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# time_fs ") {
            time_fs = rest.trim().parse().ok();
        }
    }
    let time_fs =
        time_fs.ok_or_else(|| parse_error(path, 0, "missing or malformed `# time_fs` header"))?;
    let mut rows = Vec::new();
    for (line, v) in data_lines(path)? {
        if v.len() != 4 {
            return Err(parse_error(
                path,
                line,
                format!("expected 4 columns, got {}", v.len()),
            ));
        }
        rows.push([v[0], v[1], v[2], v[3]]);
    }
    Ok(SnapshotTable { time_fs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            config_hash: "0123456789abcdef".into(),
            seed: 7,
        }
    }

    #[test]
    fn surface_table_roundtrips_bit_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("surfaces.tsv");
        let rows = vec![
            SurfaceRow {
                r: 1.9,
                theta: 1.85,
                energies: [-74.3, -73.9, -73.85],
                converged: true,
                params: vec![0.1, -0.25, 3e-17],
            },
            SurfaceRow {
                r: 2.0,
                theta: 1.85,
                energies: [-74.2, -73.8, -73.7],
                converged: false,
                params: vec![],
            },
        ];
        write_surface_table(&path, &prov(), &rows).unwrap();
        let back = read_surface_table(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].params, rows[0].params);
        assert_eq!(back[0].energies, rows[0].energies);
        assert!(back[0].converged && !back[1].converged);
        assert_eq!(back[1].r.to_bits(), rows[1].r.to_bits());
    }

    #[test]
    fn nac_table_roundtrips_pairs_and_masks() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("nac.tsv");
        let pair = |states, f_r: f64, masked| PairNac {
            states,
            f_r,
            f_theta: -0.5 * f_r,
            residual_r: 1e-9,
            residual_theta: 2e-9,
            gap: 0.3,
            masked,
        };
        let rows = vec![NacRow {
            r: 1.9,
            theta: 1.85,
            pairs: vec![
                pair((0, 1), 0.11, false),
                pair((0, 2), 0.07, false),
                pair((1, 2), 1.31, true),
            ],
        }];
        write_nac_table(&path, &prov(), &rows).unwrap();
        let back = read_nac_table(&path).unwrap();
        assert_eq!(back[0].pairs.len(), 3);
        assert_eq!(back[0].pairs[2].states, (1, 2));
        assert!(back[0].pairs[2].masked && !back[0].pairs[0].masked);
        assert_eq!(back[0].pairs[1].f_r.to_bits(), 0.07f64.to_bits());
        // The gap column is not stored.
        assert_eq!(back[0].pairs[0].gap, 0.0);
    }

    #[test]
    fn fine_bundle_roundtrips_axes_and_fields() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("fine.tsv");
        let (rs, thetas) = (vec![1.0, 2.0, 3.0], vec![0.5, 1.5]);
        let n = 6;
        let field = |scale: f64| (0..n).map(|i| scale * i as f64).collect::<Vec<_>>();
        let fine = FineSurfaces {
            rs: rs.clone(),
            thetas: thetas.clone(),
            energies: vec![field(1.0), field(2.0), field(3.0)],
            nac_r: vec![field(0.1), field(0.2), field(0.3)],
            nac_theta: vec![field(0.4), field(0.5), field(0.6)],
            pair_labels: vec![(0, 1), (0, 2), (1, 2)],
            filled_energy_fraction: 0.0,
            filled_nac_fraction: 0.01,
        };
        write_fine_bundle(&path, &prov(), &fine).unwrap();
        let back = read_fine_bundle(&path).unwrap();
        assert_eq!(back.rs, rs);
        assert_eq!(back.thetas, thetas);
        assert_eq!(back.e_upper, field(3.0));
        // The stored coupling is the upper pair's.
        assert_eq!(back.f_r, field(0.3));
        assert_eq!(back.f_theta, field(0.6));
    }

    #[test]
    fn populations_and_snapshots_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let pop_path = tmp.path().join("populations.tsv");
        let series = vec![PopulationSample {
            time_au: 10.0,
            p_lower: 0.25,
            p_upper: 0.7,
            absorbed_lower: 0.04,
            absorbed_upper: 0.01,
            total: 1.0,
            norm_total: 0.95,
        }];
        write_populations(&pop_path, &prov(), &["zero_point 0.02".into()], &series).unwrap();
        let rows = read_populations(&pop_path).unwrap();
        assert!((rows[0][0] - 10.0 * AU_TIME_FS).abs() < 1e-15);
        // Column order: t, P_B (upper), P_A (lower), absorbed_A, absorbed_B.
        assert_eq!(rows[0][1], 0.7);
        assert_eq!(rows[0][2], 0.25);
        assert_eq!(rows[0][3], 0.04);
        assert_eq!(rows[0][4], 0.01);

        let snap_path = tmp.path().join("snap.tsv");
        let snap = DensitySnapshot {
            time_au: 99.2,
            lower: vec![0.0, 0.1, 0.2, 0.3],
            upper: vec![0.4, 0.5, 0.6, 0.7],
        };
        write_snapshot(&snap_path, &prov(), &[1.0, 2.0], &[0.3, 0.6], &snap).unwrap();
        let table = read_snapshot(&snap_path).unwrap();
        assert!((table.time_fs - 99.2 * AU_TIME_FS).abs() < 1e-12);
        assert_eq!(table.rows.len(), 4);
        // Row 3 is (r index 1, theta index 1): upper density column first.
        assert_eq!(table.rows[3], [2.0, 0.6, 0.7, 0.3]);

        // The plot re-emission separates stretch blocks with blank lines.
        let plot_path = tmp.path().join("plot_snap.tsv");
        write_plot_snapshot(&plot_path, &prov(), &table).unwrap();
        let text = std::fs::read_to_string(&plot_path).unwrap();
        assert_eq!(text.matches("\n\n").count(), 1);
        assert!(text.contains("# time_fs"));
    }

    #[test]
    fn headers_never_carry_a_timestamp() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("surfaces.tsv");
        write_surface_table(&path, &prov(), &[]).unwrap();
        let a = std::fs::read(&path).unwrap();
        std::thread::sleep(std::time::Duration::from_millis(30));
        write_surface_table(&path, &prov(), &[]).unwrap();
        let b = std::fs::read(&path).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# nadyn surface-scan v1\n"));
        assert!(text.contains("# config 0123456789abcdef"));
        assert!(text.contains("# seed 7"));
    }

    #[test]
    fn config_hash_is_stable_and_16_hex() {
        let h = config_hash(b"hello");
        assert_eq!(h.len(), 16);
        assert_eq!(h, config_hash(b"hello"));
        assert_ne!(h, config_hash(b"hello "));
        assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("pop.tsv");
        std::fs::write(&path, "# header\n0.0\t1.0\t0.0\t0.0\t0.0\t1.0\n0.1\t0.9\n").unwrap();
        match read_populations(&path) {
            Err(CoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }
}
