use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use infograph::AnalysisConfig;

#[derive(Debug, Parser)]
#[command(name = "infograph", version, about = "Scene graphs, segments and plans from pose demonstrations")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Analysis parameters. A `--config` file is read first; flags override it.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with AnalysisConfig keys
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Sliding window length (s)
    #[arg(long, global = true, value_name = "S")]
    pub window: Option<f64>,
    /// Histogram bin width (m)
    #[arg(long, global = true, value_name = "M")]
    pub bin_width: Option<f64>,
    #[arg(long, global = true, value_name = "NATS")]
    pub mi_on: Option<f64>,
    #[arg(long, global = true, value_name = "NATS")]
    pub mi_off: Option<f64>,
    #[arg(long, global = true, value_name = "M")]
    pub ho_dist: Option<f64>,
    #[arg(long, global = true, value_name = "M")]
    pub oo_dist: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub trend_n: Option<usize>,
    #[arg(long, global = true, value_name = "X")]
    pub entropy_scale: Option<f64>,
    /// Restrict spatial computations to x and y
    #[arg(long, global = true, value_name = "BOOL")]
    pub planar: Option<bool>,
    #[arg(long, global = true, value_name = "M")]
    pub pos_tol: Option<f64>,
    #[arg(long, global = true, value_name = "S")]
    pub tsa_tol: Option<f64>,
    /// Seed for every random draw
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    pub fn overlay(&self, mut cfg: AnalysisConfig) -> AnalysisConfig {
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(
            window => window_s,
            bin_width => bin_width,
            mi_on => mi_on,
            mi_off => mi_off,
            ho_dist => ho_dist,
            oo_dist => oo_dist,
            trend_n => trend_n,
            entropy_scale => entropy_scale,
            planar => planar,
            pos_tol => pos_tol,
            tsa_tol => tsa_tol
        );
        cfg
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy, MI and distance traces plus the interaction event list
    Analyze {
        demo: PathBuf,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
        /// Also write one plot-ready CSV per trace
        #[arg(long)]
        csv: bool,
    },
    /// Per-frame scene graphs with keyframes
    Graph {
        demo: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Keep only the graphs at topology changes
        #[arg(long)]
        keyframes_only: bool,
    },
    /// Primitive segments and boundaries per hand
    Segment {
        demo: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Behavior-tree plan
    Plan {
        demo: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compare predictions with ground truth and summarize trial logs
    Eval(EvalArgs),
    /// Generate synthetic demonstrations with ground truth
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Demonstrations (.jsonl) or prediction documents (.json); a directory
    /// contributes its .jsonl files
    #[arg(long, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth documents, paired with --pred in order; a directory
    /// contributes its .truth.json files
    #[arg(long, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    /// Trial records, one JSON object per line
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Verification flags, one {"gt": bool, "pred": bool} per line
    #[arg(long)]
    pub verification: Option<PathBuf>,
    /// Weight of the angular term in the combined pose error (m/rad)
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Match each predicted boundary to at most one reference boundary
    #[arg(long)]
    pub tsa_one_to_one: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Exit with status 3 when a threshold is missed
    #[arg(long)]
    pub r#assert: bool,
    #[arg(long, default_value_t = 0.95)]
    pub min_gra: f64,
    #[arg(long, default_value_t = 0.90)]
    pub min_tsa: f64,
    #[arg(long)]
    pub min_pc: Option<f64>,
    #[arg(long)]
    pub min_oa: Option<f64>,
    #[arg(long)]
    pub min_vc: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Template {
    Single,
    Flyby,
    Relocation,
    Stirring,
    LetterR,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Script file (JSON); omit to use --template
    pub script: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "script")]
    pub template: Option<Template>,
    /// Output directory
    #[arg(short, long)]
    pub out: PathBuf,
    /// Number of jittered variants to generate
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Position noise standard deviation (m), overriding the script
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}
