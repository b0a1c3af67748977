//! Per-subcommand options. Every option can come from a flag or from the
//! matching table of a TOML config file; flags take precedence.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Deserialize;

/// Declares an options struct whose fields are all `Option`s, plus a
/// `merge` that keeps flag values and fills gaps from the config file.
macro_rules! options {
    ($(#[$m:meta])* pub struct $name:ident { $( $(#[$fm:meta])* pub $f:ident : Option<$t:ty>, )* }) => {
        $(#[$m])*
        #[derive(Args, Clone, Debug, Default, Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name { $( $(#[$fm])* pub $f: Option<$t>, )* }

        impl $name {
            pub fn merge(self, file: Self) -> Self {
                $name { $( $f: self.$f.or(file.$f), )* }
            }
        }
    };
}

options! {
    pub struct SynthOpts {
        /// Number of nodes (at least 3).
        #[arg(long)]
        pub n: Option<usize>,
        #[arg(long)]
        pub seed: Option<u64>,
        /// Side length of the square the points are drawn from.
        #[arg(long = "box")]
        #[serde(rename = "box")]
        pub box_size: Option<f64>,
        /// Probability that a Delaunay edge becomes two opposed arcs.
        #[arg(long)]
        pub p_bidir: Option<f64>,
        /// Probability that each arc is removed.
        #[arg(long)]
        pub p_prune: Option<f64>,
        /// Demand law: `uniform:<low>:<high>` or `exp:<mean>`.
        #[arg(long)]
        pub demand: Option<String>,
        /// Diameter bound D stored in the instance.
        #[arg(long)]
        pub max_diameter: Option<f64>,
        /// Zone budget m stored in the instance.
        #[arg(long)]
        pub zones: Option<usize>,
        #[arg(short, long)]
        pub output: Option<PathBuf>,
    }
}

options! {
    pub struct IngestOpts {
        /// Trip CSV with header origin_lat,origin_lon,dest_lat,dest_lon[,count].
        #[arg(long)]
        pub trips: Option<PathBuf>,
        /// GeoJSON polygon; trips with an endpoint outside are dropped.
        #[arg(long)]
        pub boundary: Option<PathBuf>,
        /// Dense CSV travel-time matrix over the resulting cells (seconds).
        #[arg(long)]
        pub matrix: Option<PathBuf>,
        /// Trips shorter than this many meters are dropped.
        #[arg(long)]
        pub min_trip_m: Option<f64>,
        /// Hexagon circumradius in meters.
        #[arg(long)]
        pub hex_radius: Option<f64>,
        #[arg(long, requires = "anchor_lon")]
        pub anchor_lat: Option<f64>,
        #[arg(long, requires = "anchor_lat")]
        pub anchor_lon: Option<f64>,
        #[arg(long)]
        pub max_diameter: Option<f64>,
        #[arg(long)]
        pub zones: Option<usize>,
        /// Writes rejected trip rows as CSV (line, reason).
        #[arg(long)]
        pub rejects: Option<PathBuf>,
        #[arg(short, long)]
        pub output: Option<PathBuf>,
    }
}

options! {
    pub struct CliquesOpts {
        #[arg(short, long)]
        pub instance: Option<PathBuf>,
        /// Overrides the instance's diameter bound.
        #[arg(long)]
        pub max_diameter: Option<f64>,
        /// Point-in-hull tolerance.
        #[arg(long)]
        pub eps: Option<f64>,
        /// Abort when more cliques than this are generated.
        #[arg(long)]
        pub cap: Option<usize>,
        /// Keep only cliques that induce a weakly connected subgraph.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        pub connected_only: Option<bool>,
        #[arg(short, long)]
        pub output: Option<PathBuf>,
    }
}

options! {
    pub struct SolveOpts {
        #[arg(short, long)]
        pub instance: Option<PathBuf>,
        #[arg(short, long)]
        pub cliques: Option<PathBuf>,
        /// Overrides the instance's zone budget.
        #[arg(long)]
        pub zones: Option<usize>,
        /// Wall-clock limit in seconds.
        #[arg(long)]
        pub time_limit: Option<f64>,
        /// Relative optimality gap; 0 proves optimality.
        #[arg(long)]
        pub gap: Option<f64>,
        /// Keep candidates strictly contained in another candidate.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        pub no_dominance: Option<bool>,
        /// Use the greedy heuristic instead of the exact search.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        pub greedy: Option<bool>,
        /// Also write the model in CPLEX LP format.
        #[arg(long)]
        pub lp: Option<PathBuf>,
        #[arg(short, long)]
        pub output: Option<PathBuf>,
    }
}

options! {
    pub struct BaselineOpts {
        #[arg(short, long)]
        pub instance: Option<PathBuf>,
        #[arg(long)]
        pub max_diameter: Option<f64>,
        #[arg(long)]
        pub zones: Option<usize>,
        #[arg(short, long)]
        pub output: Option<PathBuf>,
    }
}

options! {
    pub struct ReportOpts {
        /// Node counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        pub n: Option<Vec<usize>>,
        /// Diameter bounds, comma separated.
        #[arg(long = "d", value_delimiter = ',')]
        pub d: Option<Vec<f64>>,
        #[arg(long)]
        pub zones: Option<usize>,
        /// Seeds, comma separated.
        #[arg(long, value_delimiter = ',')]
        pub seeds: Option<Vec<u64>>,
        /// Per-cell solver time limit in seconds.
        #[arg(long)]
        pub time_limit: Option<f64>,
        #[arg(long = "box")]
        #[serde(rename = "box")]
        pub box_size: Option<f64>,
        #[arg(long)]
        pub p_bidir: Option<f64>,
        #[arg(long)]
        pub p_prune: Option<f64>,
        #[arg(long)]
        pub demand: Option<String>,
        #[arg(long)]
        pub cap: Option<usize>,
        /// CSV output; standard output when omitted.
        #[arg(long)]
        pub csv: Option<PathBuf>,
        /// Markdown summary output; standard error when omitted.
        #[arg(long)]
        pub summary: Option<PathBuf>,
    }
}

options! {
    pub struct ExportOpts {
        #[arg(short, long)]
        pub instance: Option<PathBuf>,
        #[arg(short, long)]
        pub solution: Option<PathBuf>,
        #[arg(short, long)]
        pub output: Option<PathBuf>,
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub threads: Option<usize>,
    pub synth: SynthOpts,
    pub ingest: IngestOpts,
    pub cliques: CliquesOpts,
    pub solve: SolveOpts,
    pub baseline: BaselineOpts,
    pub report: ReportOpts,
    pub export_geojson: ExportOpts,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
