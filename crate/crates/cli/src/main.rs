use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use l3cs::container::Container;
use l3cs::imageio::{encode_pfm, encode_pgm, read_image, write_image};
use l3cs::{
    compress, compress_single, decode, evaluate, init_weights, CodingReport, DisparityMap, Error, ModelConfig,
    StereoPair, View, WeightStore,
};
use serde_json::{json, Map, Value};

/// Lossless stereo image codec.
#[derive(Parser)]
#[command(name = "l3cs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a stereo pair (or one view with --single) into a container.
    Compress {
        left: PathBuf,
        /// Right view; omit together with --single.
        right: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Code the left view alone.
        #[arg(long)]
        single: bool,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
    },
    /// Decode a container back to PPM/PNG views.
    Decompress {
        input: PathBuf,
        left: PathBuf,
        right: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        disparity: DisparityArgs,
    },
    /// Compress to memory, decode and compare, for one or more pairs.
    Verify {
        /// LEFT RIGHT [LEFT RIGHT ...]
        #[arg(required = true, num_args = 2..)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Drop this many bytes from the end of each stream before decoding.
        #[arg(long, hide = true, default_value_t = 0)]
        truncate_stream: usize,
    },
    /// Ideal code length, warped right view quality and disparities.
    Evaluate {
        /// LEFT RIGHT [LEFT RIGHT ...]
        #[arg(required = true, num_args = 2..)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write the warped right view of the first pair here.
        #[arg(long)]
        emit_warped: Option<PathBuf>,
        #[command(flatten)]
        disparity: DisparityArgs,
    },
    /// Write a seeded random weight file.
    InitWeights {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        scales: usize,
        #[arg(long, default_value_t = 5)]
        channels: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long = "K", default_value_t = 10)]
        components: usize,
        #[arg(long, default_value_t = 64)]
        dmax: usize,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Must match the weight file.
    #[arg(long)]
    dmax: Option<usize>,
    /// Must match the weight file.
    #[arg(long = "K")]
    components: Option<usize>,
}

#[derive(Args)]
struct DisparityArgs {
    /// Write one disparity map per scale into this directory.
    #[arg(long)]
    emit_disparity: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DisparityFormat::Pgm)]
    disparity_format: DisparityFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Record,
}

#[derive(Clone, Copy, ValueEnum)]
enum DisparityFormat {
    Pgm,
    Pfm,
}

enum Failure {
    Core(Error),
    Usage(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Core(e) => match e {
                Error::Io(_) => 3,
                Error::Format(_) | Error::UnknownVersion { .. } | Error::Corrupt(_) => 4,
                Error::DigestMismatch { .. } => 5,
                Error::Dimension(_) => 6,
                Error::Crc { .. } => 7,
                Error::Truncated(_) => 8,
                Error::ConfigMismatch(_) | Error::Config(_) => 9,
                _ => 1,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Usage(m) | Failure::Verify(m) => m.clone(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn load_weights(args: &ModelArgs) -> Outcome<WeightStore> {
    let store = WeightStore::load(&args.weights)?;
    let cfg = store.config();
    for (name, wanted, have) in [
        ("--dmax", args.dmax, cfg.max_disparity),
        ("--K", args.components, cfg.components),
    ] {
        if let Some(v) = wanted {
            if v != have {
                return Err(Error::ConfigMismatch(format!("{name} {v} but the weight file has {have}")).into());
            }
        }
    }
    Ok(store)
}

fn read_pair(left: &Path, right: &Path) -> Outcome<StereoPair> {
    Ok(StereoPair::new(read_image(left)?, read_image(right)?)?)
}

fn pairs(images: &[PathBuf]) -> Outcome<Vec<(&Path, &Path)>> {
    if images.len() % 2 != 0 {
        return Err(Failure::Usage("images must come in LEFT RIGHT pairs".into()));
    }
    Ok(images.chunks(2).map(|c| (c[0].as_path(), c[1].as_path())).collect())
}

fn config_record(cfg: &ModelConfig, digest: u64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("scales".into(), json!(cfg.scales));
    m.insert("channels".into(), json!(cfg.channels));
    m.insert("hidden".into(), json!(cfg.hidden));
    m.insert("components".into(), json!(cfg.components));
    m.insert("max_disparity".into(), json!(cfg.max_disparity));
    m.insert("weight_digest".into(), json!(format!("{digest:016x}")));
    m
}

fn report_record(report: &CodingReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("width".into(), json!(report.width));
    m.insert("height".into(), json!(report.height));
    m.insert("segments".into(), json!(report.segments.len()));
    m.insert("ideal_bits".into(), json!(report.ideal_bits(None)));
    m.insert("ideal_bpsp_all".into(), json!(report.ideal_bpsp(None)));
    m.insert("ideal_bpsp_left".into(), json!(report.ideal_bpsp(Some(View::Left))));
    if report.segments.iter().any(|s| s.id.view == View::Right) {
        m.insert("ideal_bpsp_right".into(), json!(report.ideal_bpsp(Some(View::Right))));
        if let Some(b) = report.actual_bpsp(Some(View::Right)) {
            m.insert("bpsp_right".into(), json!(b));
        }
    }
    if let Some(bits) = report.actual_bits(None) {
        m.insert("actual_bits".into(), json!(bits));
        m.insert("bpsp_all".into(), json!(report.actual_bpsp(None)));
        m.insert("bpsp_left".into(), json!(report.actual_bpsp(Some(View::Left))));
    }
    if let Some(b) = report.container_bytes {
        m.insert("container_bytes".into(), json!(b));
        m.insert("container_bpsp".into(), json!(report.container_bpsp()));
    }
    if let Some(q) = &report.quality {
        m.insert(
            "warped_psnr".into(),
            if q.psnr.is_finite() { json!(q.psnr) } else { json!("inf") },
        );
        if let Some(s) = q.ssim {
            m.insert("warped_ssim".into(), json!(s));
        }
    }
    for (i, d) in report.disparity.iter().enumerate() {
        let mean = d.values.iter().map(|&v| v as f64).sum::<f64>() / d.values.len().max(1) as f64;
        m.insert(format!("mean_disparity_s{}", i + 1), json!(mean));
    }
    m
}

fn print_record(fields: Map<String, Value>, format: ReportFormat) {
    match format {
        // serde_json maps are ordered by key
        ReportFormat::Record => println!("{}", Value::Object(fields)),
        ReportFormat::Text => {
            for (k, v) in fields {
                match v {
                    Value::String(s) => println!("{k}={s}"),
                    Value::Number(n) if n.is_f64() => println!("{k}={:.6}", n.as_f64().unwrap()),
                    other => println!("{k}={other}"),
                }
            }
        }
    }
}

fn emit_disparity(maps: &[DisparityMap], args: &DisparityArgs, max_disparity: usize) -> Outcome<()> {
    let Some(dir) = &args.emit_disparity else {
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    for (i, map) in maps.iter().enumerate() {
        let s = i + 1;
        let (bytes, ext) = match args.disparity_format {
            DisparityFormat::Pgm => (encode_pgm(map, (max_disparity >> i).max(1)), "pgm"),
            DisparityFormat::Pfm => (encode_pfm(map), "pfm"),
        };
        fs::write(dir.join(format!("disparity_s{s}.{ext}")), bytes)?;
    }
    Ok(())
}

/// Runs `f` over `items` on `jobs` threads, keeping input order.
fn run_jobs<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Outcome<Vec<R>> {
    use rayon::prelude::*;
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    if jobs == 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn verify_one(left: &Path, right: &Path, store: &WeightStore, truncate: usize) -> Outcome<Map<String, Value>> {
    let pair = read_pair(left, right)?;
    let (container, report) = compress(&pair, store)?;
    let mut bytes = container.to_bytes()?;
    bytes.truncate(bytes.len().saturating_sub(truncate));
    let decoded = Container::from_bytes(&bytes).and_then(|c| l3cs::decompress(&c, store));
    let mut m = report_record(&report);
    m.insert("left".into(), json!(left.display().to_string()));
    m.insert("right".into(), json!(right.display().to_string()));
    match decoded {
        Ok(back) if back == pair => {
            m.insert("result".into(), json!("PASS"));
        }
        Ok(_) => {
            m.insert("result".into(), json!("FAIL"));
            m.insert("error".into(), json!("decoded pair differs"));
        }
        Err(e) => {
            m.insert("result".into(), json!("FAIL"));
            m.insert("error".into(), json!(e.to_string()));
        }
    }
    Ok(m)
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Compress {
            left,
            right,
            output,
            single,
            model,
            report,
        } => {
            let store = load_weights(&model)?;
            let (container, rep) = match (single, right) {
                (true, None) => compress_single(&read_image(&left)?, &store)?,
                (false, Some(right)) => compress(&read_pair(&left, &right)?, &store)?,
                (true, Some(_)) => return Err(Failure::Usage("--single takes one image".into())),
                (false, None) => return Err(Failure::Usage("a right view is required without --single".into())),
            };
            fs::write(&output, container.to_bytes()?)?;
            let mut m = report_record(&rep);
            m.extend(config_record(store.config(), store.digest()));
            print_record(m, report);
        }
        Command::Decompress {
            input,
            left,
            right,
            model,
            disparity,
        } => {
            let store = load_weights(&model)?;
            let container = Container::from_bytes(&fs::read(&input)?)?;
            let decoded = decode(&container, &store)?;
            write_image(&left, &decoded.left)?;
            match (decoded.right, right) {
                (Some(r), Some(path)) => write_image(path, &r)?,
                (Some(_), None) => return Err(Failure::Usage("container holds two views; give a right output path".into())),
                (None, Some(_)) => return Err(Error::Format("container holds a single view".into()).into()),
                (None, None) => {}
            }
            emit_disparity(&decoded.disparity, &disparity, store.config().max_disparity)?;
        }
        Command::Verify {
            images,
            model,
            report,
            jobs,
            truncate_stream,
        } => {
            let store = load_weights(&model)?;
            let list = pairs(&images)?;
            let results = run_jobs(&list, jobs, |(l, r)| verify_one(l, r, &store, truncate_stream))?;
            let mut failed = 0;
            for res in results {
                let m = res?;
                if m["result"] != "PASS" {
                    failed += 1;
                }
                print_record(m, report);
            }
            if failed > 0 {
                return Err(Failure::Verify(format!("{failed} of {} pairs failed verification", list.len())));
            }
        }
        Command::Evaluate {
            images,
            model,
            report,
            jobs,
            emit_warped,
            disparity,
        } => {
            let store = load_weights(&model)?;
            let list = pairs(&images)?;
            let results = run_jobs(&list, jobs, |(l, r)| -> Outcome<CodingReport> {
                Ok(evaluate(&read_pair(l, r)?, &store)?)
            })?;
            for (i, res) in results.into_iter().enumerate() {
                let rep = res?;
                if i == 0 {
                    if let (Some(path), Some(q)) = (&emit_warped, &rep.quality) {
                        write_image(path, &q.warped_right)?;
                    }
                    emit_disparity(&rep.disparity, &disparity, store.config().max_disparity)?;
                }
                let mut m = report_record(&rep);
                m.insert("left".into(), json!(list[i].0.display().to_string()));
                m.insert("right".into(), json!(list[i].1.display().to_string()));
                print_record(m, report);
            }
        }
        Command::InitWeights {
            output,
            seed,
            scales,
            channels,
            hidden,
            components,
            dmax,
            report,
        } => {
            let cfg = ModelConfig {
                scales,
                channels,
                hidden,
                components,
                max_disparity: dmax,
                ..ModelConfig::default()
            };
            let store = init_weights(&cfg, seed)?;
            store.save(&output)?;
            let mut m = config_record(store.config(), store.digest());
            m.insert("seed".into(), json!(seed));
            print_record(m, report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("L3CS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
