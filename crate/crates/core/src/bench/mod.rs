//! Benchmark harness: reference kernels, degradations, scores and reports.

pub mod kernel_file;
pub mod kernels;
pub mod metrics;
pub mod noise;
pub mod synthetic;

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circulant::{reflect_index, Image};
use crate::error::{invalid, Result};
use crate::pipeline::{coefficients_psf, restore_image, RestorationConfig};

pub use kernel_file::{format_kernel, parse_kernel};
pub use kernels::{make_kernel, KernelSpec};
pub use metrics::{psnr, ssd_kernel};
pub use noise::add_awgn;
pub use synthetic::synthetic_image;

pub const CSV_HEADER: &str = "image,kernel,snr_db,psnr_db,ssd,runtime_s,config_hash";

/// Linear convolution with a centered PSF under symmetric boundary
/// extension; output has the input's size.
pub fn blur_symmetric(x: &Image, psf: &Array2<f64>) -> Result<Image> {
    let (kr, kc) = psf.dim();
    if kr == 0 || kc == 0 {
        return invalid("empty psf");
    }
    let (cr, cc) = ((kr / 2) as isize, (kc / 2) as isize);
    let (rows, cols) = x.shape();
    let px = x.pixels();
    Image::new(Array2::from_shape_fn((rows, cols), |(i, j)| {
        let mut acc = 0.0;
        for ((a, b), w) in psf.indexed_iter() {
            if *w != 0.0 {
                let r = reflect_index(i as isize - (a as isize - cr), rows);
                let c = reflect_index(j as isize - (b as isize - cc), cols);
                acc += w * px[[r, c]];
            }
        }
        acc
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub restoration: RestorationConfig,
    pub seed: u64,
    /// Record wall-clock time per cell (makes reports non-reproducible).
    pub timing: bool,
    pub peak: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { restoration: RestorationConfig::default(), seed: 0, timing: false, peak: 255.0 }
    }
}

impl BenchConfig {
    /// Short hex digest of the restoration settings and seed.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_string(&self.restoration).expect("config serializes").as_bytes());
        h.update(self.seed.to_le_bytes());
        h.finalize().iter().take(6).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Seed of one cell, derived from the master seed and the cell's identity.
pub fn cell_seed(master: u64, image: &str, kernel: &str, snr_db: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(image.as_bytes());
    h.update([0]);
    h.update(kernel.as_bytes());
    h.update([0]);
    h.update(snr_db.to_bits().to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub image: String,
    pub kernel: String,
    /// `+∞` for the noiseless case.
    pub snr_db: f64,
    pub psnr_db: f64,
    pub ssd: f64,
    pub runtime_s: Option<f64>,
    pub config_hash: String,
    /// PSNR of the degraded input.
    pub psnr_blurred_db: f64,
    /// SSD of the initial kernel estimate.
    pub ssd_initial: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub kernel: String,
    pub snr_db: f64,
    /// Mean over images of `PSNR(noisy) − PSNR(noiseless)`; negative when
    /// noise costs quality.
    pub mean_psnr_reduction_db: f64,
    pub images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<KernelSummary>,
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.6}")
    }
}

fn json_num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(num(v))
    }
}

/// Per kernel and noise level, the mean PSNR change against the noiseless
/// run of the same image. Pairs where either PSNR is missing or infinite are
/// skipped.
pub fn psnr_reduction(rows: &[BenchRow]) -> Vec<KernelSummary> {
    let mut kernels: Vec<&str> = Vec::new();
    let mut snrs: Vec<f64> = Vec::new();
    for r in rows {
        if !kernels.contains(&r.kernel.as_str()) {
            kernels.push(&r.kernel);
        }
        if r.snr_db.is_finite() && !snrs.contains(&r.snr_db) {
            snrs.push(r.snr_db);
        }
    }
    let ok = |r: &&BenchRow| r.error.is_none() && r.psnr_db.is_finite();
    let mut out = Vec::new();
    for kernel in kernels {
        for &snr in &snrs {
            let diffs: Vec<f64> = rows
                .iter()
                .filter(|r| r.kernel == kernel && r.snr_db == snr)
                .filter(ok)
                .filter_map(|noisy| {
                    rows.iter()
                        .filter(ok)
                        .find(|c| c.kernel == kernel && c.image == noisy.image && c.snr_db == f64::INFINITY)
                        .map(|clean| noisy.psnr_db - clean.psnr_db)
                })
                .collect();
            if !diffs.is_empty() {
                out.push(KernelSummary {
                    kernel: kernel.to_string(),
                    snr_db: snr,
                    mean_psnr_reduction_db: diffs.iter().sum::<f64>() / diffs.len() as f64,
                    images: diffs.len(),
                });
            }
        }
    }
    out
}

impl BenchReport {
    pub fn from_rows(rows: Vec<BenchRow>) -> Self {
        let summary = psnr_reduction(&rows);
        Self { rows, summary }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (psnr, ssd) = if r.error.is_some() { ("error".into(), "error".into()) } else { (num(r.psnr_db), format!("{:.6e}", r.ssd)) };
            let runtime = r.runtime_s.map_or("NA".into(), |t| format!("{t:.3}"));
            let _ = writeln!(out, "{},{},{},{psnr},{ssd},{runtime},{}", r.image, r.kernel, num(r.snr_db), r.config_hash);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "image": r.image,
                    "kernel": r.kernel,
                    "snr_db": json_num(r.snr_db),
                    "psnr_db": json_num(r.psnr_db),
                    "ssd": json_num(r.ssd),
                    "runtime_s": r.runtime_s,
                    "config_hash": r.config_hash,
                    "psnr_blurred_db": json_num(r.psnr_blurred_db),
                    "ssd_initial": json_num(r.ssd_initial),
                    "error": r.error,
                })
            })
            .collect();
        let summary: Vec<serde_json::Value> = self
            .summary
            .iter()
            .map(|s| {
                serde_json::json!({
                    "kernel": s.kernel,
                    "snr_db": json_num(s.snr_db),
                    "mean_psnr_reduction_db": json_num(s.mean_psnr_reduction_db),
                    "images": s.images,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "rows": rows, "summary": summary })).expect("json")
    }
}

struct Cell<'a> {
    image: &'a (String, Image),
    kernel: &'a (String, KernelSpec),
    snr_db: f64,
}

fn run_cell(cell: &Cell, cfg: &BenchConfig, hash: &str) -> BenchRow {
    let (image_id, x) = cell.image;
    let (kernel_id, spec) = cell.kernel;
    let start = Instant::now();
    let mut row = BenchRow {
        image: image_id.clone(),
        kernel: kernel_id.clone(),
        snr_db: cell.snr_db,
        psnr_db: f64::NAN,
        ssd: f64::NAN,
        runtime_s: None,
        config_hash: hash.to_string(),
        psnr_blurred_db: f64::NAN,
        ssd_initial: f64::NAN,
        error: None,
    };
    let scored = (|| -> Result<(f64, f64, f64, f64)> {
        let psf = make_kernel(spec)?;
        let blurred = blur_symmetric(x, &psf)?;
        let noisy = add_awgn(&blurred, cell.snr_db, cell_seed(cfg.seed, image_id, kernel_id, cell.snr_db))?;
        let res = restore_image(&noisy, &cfg.restoration)?;
        let dict = cfg.restoration.dictionary(cfg.restoration.pad_block)?;
        let initial_psf = coefficients_psf(&res.initial, &dict)?;
        Ok((
            psnr(&res.image, x, cfg.peak)?,
            ssd_kernel(&res.psf, &psf),
            psnr(&noisy, x, cfg.peak)?,
            ssd_kernel(&initial_psf, &psf),
        ))
    })();
    match scored {
        Ok((p, s, pb, si)) => {
            row.psnr_db = p;
            row.ssd = s;
            row.psnr_blurred_db = pb;
            row.ssd_initial = si;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    if cfg.timing {
        row.runtime_s = Some(start.elapsed().as_secs_f64());
    }
    row
}

/// Blur, degrade, restore and score every (image, kernel, SNR) cell.
///
/// Rows come out image-major, then kernel, then noise level. A failing
/// cell becomes an error row and the run continues. Use `f64::INFINITY`
/// for the noiseless level.
pub fn run_benchmark(
    images: &[(String, Image)],
    kernels: &[(String, KernelSpec)],
    snrs_db: &[f64],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    cfg.restoration.validate()?;
    if snrs_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
        return invalid("noise levels must be finite or +inf");
    }
    let hash = cfg.config_hash();
    let mut cells = Vec::new();
    for image in images {
        for kernel in kernels {
            for &snr_db in snrs_db {
                cells.push(Cell { image, kernel, snr_db });
            }
        }
    }
    #[cfg(feature = "parallel")]
    let rows: Vec<BenchRow> = {
        use rayon::prelude::*;
        cells.par_iter().map(|c| run_cell(c, cfg, &hash)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<BenchRow> = cells.iter().map(|c| run_cell(c, cfg, &hash)).collect();
    Ok(BenchReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(image: &str, kernel: &str, snr: f64, psnr: f64) -> BenchRow {
        BenchRow {
            image: image.into(),
            kernel: kernel.into(),
            snr_db: snr,
            psnr_db: psnr,
            ssd: 0.0,
            runtime_s: None,
            config_hash: "h".into(),
            psnr_blurred_db: 0.0,
            ssd_initial: 0.0,
            error: None,
        }
    }

    #[test]
    fn summary_matches_hand_computation() {
        let clean = [30.0, 28.5, 25.25, 31.0];
        let noisy = [27.0, 26.0, 24.0, 27.5];
        let mut rows = Vec::new();
        for (k, (c, n)) in clean.iter().zip(&noisy).enumerate() {
            rows.push(row(&format!("img{k}"), "kernel1", f64::INFINITY, *c));
            rows.push(row(&format!("img{k}"), "kernel1", 30.0, *n));
        }
        let s = psnr_reduction(&rows);
        assert_eq!(s.len(), 1);
        // -(3 + 2.5 + 1.25 + 3.5) / 4
        assert!((s[0].mean_psnr_reduction_db + 2.5625).abs() < 1e-12);
        assert_eq!(s[0].images, 4);
    }

    #[test]
    fn csv_layout() {
        let mut r = row("a", "k", f64::INFINITY, f64::INFINITY);
        let mut e = row("a", "k", 30.0, 1.0);
        e.error = Some("boom".into());
        r.ssd = 0.5;
        let csv = BenchReport::from_rows(vec![r, e]).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "a,k,inf,inf,5.000000e-1,NA,h");
        assert_eq!(lines[2], "a,k,30.000000,error,error,NA,h");
        assert!(BenchReport::from_rows(vec![]).to_json().contains("\"rows\": []"));
    }

    #[test]
    fn blur_symmetric_keeps_constants_and_delta() {
        let c = Image::filled(9, 7, 42.0).unwrap();
        let psf = make_kernel(&KernelSpec::table(1).unwrap()).unwrap();
        assert!(blur_symmetric(&c, &psf).unwrap().pixels().iter().all(|v| (v - 42.0).abs() < 1e-12));
        let x = synthetic_image("shapes", 12, 12).unwrap();
        assert_eq!(blur_symmetric(&x, &Array2::from_elem((1, 1), 1.0)).unwrap(), x);
    }

    #[test]
    fn blur_symmetric_is_convolution() {
        // asymmetric psf: out[i][j] = x[i][j-1] away from the border
        let mut psf = Array2::zeros((3, 3));
        psf[[1, 2]] = 1.0;
        let x = synthetic_image("texture", 6, 6).unwrap();
        let y = blur_symmetric(&x, &psf).unwrap();
        assert_eq!(y.pixels()[[2, 3]], x.pixels()[[2, 2]]);
    }

    #[test]
    fn cell_seeds_differ() {
        let a = cell_seed(0, "img", "k1", 30.0);
        assert_eq!(a, cell_seed(0, "img", "k1", 30.0));
        assert_ne!(a, cell_seed(1, "img", "k1", 30.0));
        assert_ne!(a, cell_seed(0, "img", "k2", 30.0));
        assert_ne!(a, cell_seed(0, "img", "k1", f64::INFINITY));
    }

    #[test]
    fn single_cell_report() {
        let cfg = BenchConfig {
            restoration: RestorationConfig { max_iters: 1, gamma_cap: 2.0, max_prox_steps: 20, ..RestorationConfig::default() },
            ..BenchConfig::default()
        };
        let images = vec![("shapes".to_string(), synthetic_image("shapes", 40, 40).unwrap())];
        let kernels = vec![("kernel3".to_string(), KernelSpec::table(3).unwrap())];
        let rep = run_benchmark(&images, &kernels, &[f64::INFINITY], &cfg).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!(rep.rows[0].error.is_none(), "{:?}", rep.rows[0].error);
        assert!(rep.rows[0].ssd >= 0.0);
        assert_eq!(rep.to_csv(), run_benchmark(&images, &kernels, &[f64::INFINITY], &cfg).unwrap().to_csv());
    }
}
