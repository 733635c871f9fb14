use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deblur_core::bench::{self, BenchConfig, KernelSpec};
use deblur_core::dictionary::parse_sigma_grid;
use deblur_core::init::initial_coefficients;
use deblur_core::pipeline::{restore_image, restore_nonblind_psf, write_trace_csv, RestorationConfig};
use deblur_core::{DeblurError, Image};

mod io;

use io::{read_image, write_image, Planes};

#[derive(Parser)]
#[command(name = "deblur", version, about = "Blind deblurring with sparse Gaussian-dictionary kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convolve an image with a PSF (symmetric boundary)
    Blur {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// PSF text file
        #[arg(long, conflicts_with = "spec")]
        kernel: Option<PathBuf>,
        /// Built-in PSF, e.g. kernel1..kernel4, gaussian:2.0, disk:3
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        format: Option<String>,
    },
    /// Add white Gaussian noise at a given SNR
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        format: Option<String>,
    },
    /// Restore a blurred image
    Deblur {
        #[command(subcommand)]
        mode: DeblurMode,
    },
    /// Print estimated blur widths and initial coefficients as JSON
    InitKernel {
        #[arg(long)]
        input: PathBuf,
        /// BPDN error bound relative to the target norm
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
        #[arg(long)]
        sigmas: Option<String>,
    },
    /// Run the benchmark grid and write a report
    Bench(BenchArgs),
    /// Write a built-in PSF to a text file
    MakeKernel {
        /// kernel1..kernel4, disk[:r], binomial, gaussian[:sigma], cauchy[:w], delta
        #[arg(long)]
        spec: String,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum DeblurMode {
    /// Estimate kernel and image jointly
    Blind {
        #[command(flatten)]
        common: DeblurArgs,
        /// Write the consensus PSF here
        #[arg(long)]
        psf_out: Option<PathBuf>,
        /// Write iteration trace CSV here
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write initial, consensus and per-block coefficients as JSON
        #[arg(long)]
        coeffs_out: Option<PathBuf>,
    },
    /// Restore with a known PSF
    Nonblind {
        #[command(flatten)]
        common: DeblurArgs,
        #[arg(long)]
        kernel: PathBuf,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// TOML file with RestorationConfig keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mu_reg: Option<f64>,
    #[arg(long)]
    step_init: Option<f64>,
    #[arg(long)]
    step_floor: Option<f64>,
    #[arg(long)]
    linesearch_beta: Option<f64>,
    #[arg(long)]
    symmetric_kernel: bool,
    /// TV weight (default 0.1 for restoration)
    #[arg(long)]
    delta: Option<f64>,
    /// First splitting penalty of the continuation
    #[arg(long)]
    gamma_split_init: Option<f64>,
    #[arg(long)]
    inner_iters: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Dictionary grid start:stop:step
    #[arg(long)]
    sigmas: Option<String>,
    /// Try every one-hot initial kernel instead of the estimator
    #[arg(long)]
    init_sweep: bool,
}

#[derive(Args)]
struct DeblurArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Synthetic image names
    #[arg(long, value_delimiter = ',', default_value = "texture,shapes,rings,mosaic")]
    images: Vec<String>,
    /// Image files used in addition to the synthetic ones
    #[arg(long, value_delimiter = ',')]
    image_files: Vec<PathBuf>,
    /// Side of the synthetic images
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, value_delimiter = ',', default_value = "kernel1,kernel2,kernel3,kernel4")]
    kernels: Vec<String>,
    /// Noise levels in dB; `inf` for noiseless
    #[arg(long, value_delimiter = ',', default_value = "inf,30")]
    snr: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; `.json` selects JSON, anything else CSV
    #[arg(long)]
    report: PathBuf,
    /// Record wall-clock runtime per cell
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

fn load_config(args: &SolverArgs) -> deblur_core::Result<RestorationConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| DeblurError::InvalidArgument(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| DeblurError::Parse(format!("{}: {e}", path.display())))?
        }
        None => RestorationConfig::default(),
    };
    if let Some(v) = args.mu_reg {
        cfg.mu_reg = Some(v);
    }
    if let Some(v) = args.step_init {
        cfg.step_init = v;
    }
    if let Some(v) = args.step_floor {
        cfg.step_floor = v;
    }
    if let Some(v) = args.linesearch_beta {
        cfg.linesearch_beta = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.gamma_split_init {
        cfg.gamma_init = v;
    }
    if let Some(v) = args.inner_iters {
        cfg.inner_iters = v;
    }
    if let Some(v) = args.max_iters {
        cfg.max_iters = v;
    }
    if let Some(grid) = &args.sigmas {
        cfg.sigmas = parse_sigma_grid(grid)?;
    }
    cfg.symmetric_kernel |= args.symmetric_kernel;
    cfg.init_sweep |= args.init_sweep;
    cfg.validate()?;
    Ok(cfg)
}

fn read_text(path: &Path) -> deblur_core::Result<String> {
    fs::read_to_string(path).map_err(|e| DeblurError::InvalidArgument(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> deblur_core::Result<()> {
    fs::write(path, text).map_err(|e| DeblurError::InvalidArgument(format!("{}: {e}", path.display())))
}

fn map_planes(planes: &Planes, f: impl Fn(&Image) -> deblur_core::Result<Image>) -> deblur_core::Result<Planes> {
    Ok(Planes { channels: planes.channels.iter().map(f).collect::<deblur_core::Result<_>>()? })
}

fn parse_snr(text: &str) -> deblur_core::Result<f64> {
    match text.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|e| DeblurError::Parse(format!("snr '{t}': {e}"))),
    }
}

fn run(cli: Cli) -> deblur_core::Result<()> {
    match cli.command {
        Command::Blur { input, output, kernel, spec, format } => {
            let psf = match (kernel, spec) {
                (Some(path), None) => bench::parse_kernel(&read_text(&path)?)?,
                (None, Some(spec)) => bench::make_kernel(&KernelSpec::parse(&spec)?)?,
                _ => return Err(DeblurError::InvalidArgument("give exactly one of --kernel or --spec".into())),
            };
            let planes = read_image(&input)?;
            write_image(&output, &map_planes(&planes, |c| bench::blur_symmetric(c, &psf))?, format.as_deref())
        }
        Command::Noise { input, output, snr, seed, format } => {
            let planes = read_image(&input)?;
            let noisy = Planes {
                channels: planes
                    .channels
                    .iter()
                    .enumerate()
                    .map(|(k, c)| bench::add_awgn(c, snr, seed.wrapping_add(k as u64)))
                    .collect::<deblur_core::Result<_>>()?,
            };
            write_image(&output, &noisy, format.as_deref())
        }
        Command::Deblur { mode: DeblurMode::Blind { common, psf_out, trace, coeffs_out } } => {
            let cfg = load_config(&common.solver)?;
            let planes = read_image(&common.input)?;
            let result = restore_image(&planes.luma()?, &cfg)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let restored = if planes.is_color() {
                map_planes(&planes, |c| restore_nonblind_psf(c, &result.psf, &cfg))?
            } else {
                Planes { channels: vec![result.image.clone()] }
            };
            write_image(&common.output, &restored, common.format.as_deref())?;
            if let Some(path) = psf_out {
                write_text(&path, &bench::format_kernel(&result.psf))?;
            }
            if let Some(path) = trace {
                let mut buf = Vec::new();
                write_trace_csv(&result.trace, &mut buf).expect("in-memory write");
                write_text(&path, &String::from_utf8(buf).expect("ascii"))?;
            }
            if let Some(path) = coeffs_out {
                let json = serde_json::json!({
                    "initial": result.initial,
                    "consensus": result.coefficients,
                    "blocks": result.blocks,
                    "sigmas": cfg.sigmas,
                });
                write_text(&path, &serde_json::to_string_pretty(&json).expect("json"))?;
            }
            Ok(())
        }
        Command::Deblur { mode: DeblurMode::Nonblind { common, kernel } } => {
            let cfg = load_config(&common.solver)?;
            let psf = bench::parse_kernel(&read_text(&kernel)?)?;
            let planes = read_image(&common.input)?;
            let restored = map_planes(&planes, |c| restore_nonblind_psf(c, &psf, &cfg))?;
            write_image(&common.output, &restored, common.format.as_deref())
        }
        Command::InitKernel { input, tau, sigmas } => {
            let cfg = RestorationConfig {
                sigmas: sigmas.as_deref().map(parse_sigma_grid).transpose()?.unwrap_or(RestorationConfig::default().sigmas),
                ..RestorationConfig::default()
            };
            let dict = cfg.dictionary(cfg.pad_block)?;
            let guess = initial_coefficients(&read_image(&input)?.luma()?, &dict, tau)?;
            let json = serde_json::json!({
                "sigma_h": guess.estimate.as_ref().map(|e| e.sigma_h),
                "sigma_v": guess.estimate.as_ref().map(|e| e.sigma_v),
                "sigmas": dict.sigmas(),
                "alpha": guess.coefficients.alpha,
                "beta": guess.coefficients.beta,
                "fallback": guess.fallback,
                "feasible": guess.feasible,
            });
            println!("{}", serde_json::to_string_pretty(&json).expect("json"));
            Ok(())
        }
        Command::Bench(args) => {
            let restoration = load_config(&args.solver)?;
            let mut images = Vec::new();
            for name in &args.images {
                images.push((name.clone(), bench::synthetic_image(name, args.size, args.size)?));
            }
            for path in &args.image_files {
                let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("file").to_string();
                images.push((id, read_image(path)?.luma()?));
            }
            let kernels = args
                .kernels
                .iter()
                .map(|k| Ok((k.clone(), KernelSpec::parse(k)?)))
                .collect::<deblur_core::Result<Vec<_>>>()?;
            let snrs = args.snr.iter().map(|s| parse_snr(s)).collect::<deblur_core::Result<Vec<_>>>()?;
            let cfg = BenchConfig { restoration, seed: args.seed, timing: args.timing, ..BenchConfig::default() };
            let report = bench::run_benchmark(&images, &kernels, &snrs, &cfg)?;
            let is_json = args.report.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            write_text(&args.report, &if is_json { report.to_json() } else { report.to_csv() })?;
            for s in &report.summary {
                eprintln!("{} @ {} dB: mean PSNR reduction {:.3} dB over {} images", s.kernel, s.snr_db, s.mean_psnr_reduction_db, s.images);
            }
            Ok(())
        }
        Command::MakeKernel { spec, output } => {
            let psf = bench::make_kernel(&KernelSpec::parse(&spec)?)?;
            write_text(&output, &bench::format_kernel(&psf))
        }
    }
}

fn exit_code(e: &DeblurError) -> u8 {
    match e {
        DeblurError::InvalidArgument(_) | DeblurError::Parse(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
