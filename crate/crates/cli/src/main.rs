use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tanhpolar::BBox;
use tanhpolar_cli::commands::{self, EvalOptions};
use tanhpolar_cli::config::{parse_size, ENV_PREFIX};
use tanhpolar_cli::formats::grid::DumpDirection;
use tanhpolar_cli::{exit, BBoxSpec, CliError, Config, Result};

/// RoI Tanh-polar warps for face parsing.
///
/// Settings resolve in the order defaults, --config file, TANHPOLAR_*
/// environment variables, flags.
#[derive(Parser, Debug)]
#[command(name = "tanhpolar", version)]
struct Cli {
    /// Tanh-polar raster size, HxW or N.
    #[arg(long, global = true, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    /// Face box as x,y,w,h or a file holding that line.
    #[arg(long, global = true)]
    bbox: Option<String>,
    /// Augmentation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Border policy for warps: zero or replicate.
    #[arg(long, global = true)]
    border: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Warp a PNG image (or class mask) to Tanh-polar space.
    Warp {
        input: PathBuf,
        output: PathBuf,
        /// Treat the input as a class-index mask with this many classes and
        /// write the warped one-hot scores as a raw tensor.
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Map Tanh-polar scores or images back to Cartesian space.
    Unwarp {
        input: PathBuf,
        output: PathBuf,
        /// Original image size, HxW.
        #[arg(long, value_parser = parse_size)]
        orig: (usize, usize),
        /// Also write the argmax mask in palette colors.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Write a sampling grid as raw float32 pairs.
    Griddump {
        output: PathBuf,
        #[arg(long)]
        direction: DumpDirection,
        /// Output image size for the inverse grid, HxW.
        #[arg(long, value_parser = parse_size)]
        orig: Option<(usize, usize)>,
    },
    /// Run invariant suites: geometry, warp, nnkernel, metrics, formats, all.
    Check {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Score predicted masks against ground truth.
    Eval {
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, required = true)]
        gt: Vec<PathBuf>,
        #[arg(long, default_value_t = 11)]
        classes: usize,
        /// face11 or a comma-separated list (default face11 for 11 classes).
        #[arg(long)]
        names: Option<String>,
        /// face11 or name=i,j;name=k.
        #[arg(long)]
        groups: Option<String>,
        /// Include class 0 in the means.
        #[arg(long)]
        include_background: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print augmented boxes for draw indices 0..count.
    Augbox {
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Cross-entropy, Dice and their lambda mix for raw probabilities.
    Loss { probs: PathBuf, gt: PathBuf },
}

fn config(cli: &Cli) -> Result<Config> {
    let vars: BTreeMap<String, String> = std::env::vars().collect();
    let mut cfg = Config::default();
    let file = cli
        .config
        .clone()
        .or_else(|| vars.get(&format!("{ENV_PREFIX}CONFIG")).map(PathBuf::from));
    if let Some(path) = file {
        cfg.apply_file(&path)?;
    }
    cfg.apply_env(&vars)?;
    if let Some((h, w)) = cli.size {
        (cfg.height, cfg.width) = (h, w);
    }
    if let Some(b) = &cli.bbox {
        cfg.bbox = Some(BBoxSpec::parse(b)?);
    }
    if let Some(s) = cli.seed {
        cfg.augment.seed = s;
    }
    if let Some(b) = &cli.border {
        cfg.set("border", b, "--border")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bbox(cfg: &Config) -> Result<BBox> {
    cfg.bbox
        .map(|b| b.0)
        .ok_or_else(|| CliError::Usage(format!("this command needs --bbox or {ENV_PREFIX}BBOX")))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let mut stdout = std::io::stdout().lock();
    let out_err = |e| CliError::io("<stdout>", e);
    match cli.command {
        Command::Warp { input, output, classes } => commands::cmd_warp(&input, &bbox(&cfg)?, &output, &cfg, classes),
        Command::Unwarp {
            input,
            output,
            orig,
            overlay,
        } => commands::cmd_unwarp(&input, &bbox(&cfg)?, orig, &output, &cfg, overlay.as_deref()),
        Command::Griddump {
            output,
            direction,
            orig,
        } => {
            let b = cfg.bbox.map(|b| b.0);
            commands::cmd_griddump(direction, b.as_ref(), &cfg, orig, &output)
        }
        Command::Check { suite } => commands::cmd_check(&suite, &mut stdout),
        Command::Eval {
            pred,
            gt,
            classes,
            names,
            groups,
            include_background,
            report,
        } => {
            let opts = EvalOptions {
                classes,
                names: names.as_deref().or((classes == 11).then_some("face11")),
                groups: groups.as_deref(),
                include_background,
            };
            let text = commands::cmd_eval(&pred, &gt, &opts)?.render();
            match report {
                Some(path) => std::fs::write(&path, text).map_err(|e| CliError::io(path, e)),
                None => stdout.write_all(text.as_bytes()).map_err(out_err),
            }
        }
        Command::Augbox { count } => {
            for (k, b) in commands::cmd_augbox(&bbox(&cfg)?, count, &cfg)?.iter().enumerate() {
                writeln!(stdout, "{k} {},{},{},{}", b.x(), b.y(), b.w(), b.h()).map_err(out_err)?;
            }
            Ok(())
        }
        Command::Loss { probs, gt } => {
            let (ce, dice, combined, clamped) = commands::cmd_loss(&probs, &gt, &cfg)?;
            writeln!(
                stdout,
                "ce={ce}\ndice={dice}\nlambda={}\ncombined={combined}\nclamped_pixels={clamped}",
                cfg.lambda
            )
            .map_err(out_err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::OK as u8 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
