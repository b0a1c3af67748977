//! `cliquezone`: batch front end for candidate-zone generation, zone
//! selection, the seed-and-grow baseline and the synthetic sensitivity grid.

mod config;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cliquezone::baseline::simple_zoning;
use cliquezone::cliquegen::{clique_gen, hull_open_cliques, CliqueFile, CliqueGenConfig, DEFAULT_CLIQUE_CAP};
use cliquezone::coverage::{
    build_model, export_lp, greedy_select, solve_exact, ModelOptions, SolutionFile, SolveOptions, SolveStatus,
};
use cliquezone::geojson::zones_to_geojson;
use cliquezone::ingest::{
    ingest_trips, load_distance_matrix, read_trips_csv, Boundary, IngestOptions, LatLon, DEFAULT_HEX_RADIUS_M,
    DEFAULT_MIN_TRIP_M,
};
use cliquezone::synth::{experiment_grid, generate, DemandLaw, GridConfig, SynthParams};
use cliquezone::Instance;

use config::{BaselineOpts, CliquesOpts, ConfigFile, ExportOpts, IngestOpts, ReportOpts, SolveOpts, SynthOpts};

const DEFAULT_ZONES: usize = 4;
const DEFAULT_SYNTH_DIAMETER: f64 = 2.0;

#[derive(Parser, Debug)]
#[command(name = "cliquezone", version, about = "Micro-transit zone design by clique generation and maximum coverage")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with one table per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance on a pruned Delaunay graph.
    Synth(SynthOpts),
    /// Build an instance from trip records binned into hexagons.
    Ingest(IngestOpts),
    /// Enumerate hull-closed candidate zones.
    Cliques(CliquesOpts),
    /// Select zones maximizing served demand.
    Solve(SolveOpts),
    /// Run the seed-and-grow baseline.
    Baseline(BaselineOpts),
    /// Run the synthetic sensitivity grid.
    Report(ReportOpts),
    /// Write zones and node demand as GeoJSON.
    ExportGeojson(ExportOpts),
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.with_context(|| format!("missing required option --{flag}"))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

/// Writes to the file, or standard output when no path is given.
fn with_output(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance> {
    Instance::read_json(open(path)?).with_context(|| format!("reading instance {}", path.display()))
}

fn cmd_synth(o: SynthOpts) -> Result<()> {
    let mut params = SynthParams::new(required(o.n, "n")?, o.seed.unwrap_or(0));
    if let Some(b) = o.box_size {
        params.box_size = b;
    }
    if let Some(p) = o.p_bidir {
        params.p_bidir = p;
    }
    if let Some(p) = o.p_prune {
        params.p_prune = p;
    }
    if let Some(law) = &o.demand {
        params.demand_law = law.parse::<DemandLaw>()?;
    }
    let inst = generate(&params, o.max_diameter.unwrap_or(DEFAULT_SYNTH_DIAMETER), o.zones.unwrap_or(DEFAULT_ZONES))?;
    log::info!("synth: {} nodes, {} arcs (seed {})", inst.num_nodes(), inst.edges().len(), params.seed);
    with_output(o.output.as_deref(), |w| Ok(inst.write_json(w)?))
}

fn cmd_ingest(o: IngestOpts) -> Result<()> {
    let trips_path = required(o.trips, "trips")?;
    let (trips, rejects) = read_trips_csv(open(&trips_path)?)?;
    log::info!("ingest: read {} trip rows, rejected {}", rejects.rows_read, rejects.count());
    if let Some(path) = &o.rejects {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["line", "reason"])?;
        for (line, reason) in &rejects.rejected {
            w.write_record([line.to_string(), reason.clone()])?;
        }
        w.flush()?;
    }
    let boundary = match &o.boundary {
        Some(path) => {
            let value: serde_json::Value = serde_json::from_reader(open(path)?)?;
            Some(Boundary::from_geojson(&value)?)
        }
        None => None,
    };
    let options = IngestOptions {
        boundary,
        min_trip_m: o.min_trip_m.unwrap_or(DEFAULT_MIN_TRIP_M),
        circumradius: o.hex_radius.unwrap_or(DEFAULT_HEX_RADIUS_M),
        anchor: o.anchor_lat.zip(o.anchor_lon).map(|(lat, lon)| LatLon::new(lat, lon)),
    };
    let out = ingest_trips(&trips, &options)?;
    let num_cells = out.aggregation.cells.len();
    let matrix = match &o.matrix {
        Some(path) => Some(load_distance_matrix(open(path)?, num_cells)?),
        None => None,
    };
    let inst = out.into_instance(matrix, required(o.max_diameter, "max-diameter")?, o.zones.unwrap_or(DEFAULT_ZONES))?;
    log::info!("ingest: {} cells, total demand {}", inst.num_nodes(), inst.total_demand());
    with_output(o.output.as_deref(), |w| Ok(inst.write_json(w)?))
}

fn cmd_cliques(o: CliquesOpts) -> Result<()> {
    let mut inst = read_instance(&required(o.instance, "instance")?)?;
    if let Some(d) = o.max_diameter {
        inst.set_max_diameter(d)?;
    }
    let mut cfg = CliqueGenConfig { max_cliques: o.cap.unwrap_or(DEFAULT_CLIQUE_CAP), ..Default::default() };
    if let Some(eps) = o.eps {
        cfg.eps = eps;
    }
    let started = Instant::now();
    let mut list = clique_gen(&inst, &cfg)?;
    if o.connected_only.unwrap_or(false) {
        list = list.retain_connected(&inst);
    }
    let secs = started.elapsed().as_secs_f64();
    let file = CliqueFile::new(&list, inst.max_diameter(), inst.num_nodes(), secs);

    let mut table = String::from("cardinality,count\n");
    for (k, c) in &file.header.count_by_cardinality {
        table.push_str(&format!("{k},{c}\n"));
    }
    table.push_str(&format!("total,{}\n", list.len()));
    log::info!("cliques: {} candidates at D={} in {secs:.3}s", list.len(), inst.max_diameter());
    let open = hull_open_cliques(&list, &inst.positions(), cfg.eps);
    if !open.is_empty() {
        // a hull node sits too far away by network distance to join
        log::warn!("cliques: {} candidates are not hull-closed under the network metric", open.len());
    }
    match o.output {
        Some(path) => {
            with_output(Some(&path), |w| Ok(file.write_json(w)?))?;
            print!("{table}");
        }
        None => {
            with_output(None, |w| Ok(file.write_json(w)?))?;
            eprint!("{table}");
        }
    }
    Ok(())
}

fn cmd_solve(o: SolveOpts) -> Result<()> {
    let mut inst = read_instance(&required(o.instance, "instance")?)?;
    if let Some(m) = o.zones {
        inst.set_num_zones(m)?;
    }
    let cliques_path = required(o.cliques, "cliques")?;
    let file = CliqueFile::read_json(open(&cliques_path)?)
        .with_context(|| format!("reading cliques {}", cliques_path.display()))?;
    if file.header.max_diameter != inst.max_diameter() {
        log::warn!(
            "solve: cliques were generated with D={} but the instance has D={}",
            file.header.max_diameter,
            inst.max_diameter()
        );
    }
    let list = file.to_list(inst.distances())?;
    let opts = ModelOptions { dominance: !o.no_dominance.unwrap_or(false) };
    let model = build_model(&inst, list.cliques(), opts)?;
    log::info!("solve: {} candidates after reduction, {} coverable pairs", model.candidates().len(), model.pairs().len());
    if let Some(path) = &o.lp {
        let w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        export_lp(&model, w)?;
    }
    let solution = if o.greedy.unwrap_or(false) {
        greedy_select(&model)
    } else {
        let time_limit = o.time_limit.unwrap_or(600.0);
        if !(time_limit.is_finite() && time_limit >= 0.0) {
            bail!("--time-limit must be a nonnegative number of seconds");
        }
        let gap = o.gap.unwrap_or(0.0);
        if !(gap.is_finite() && gap >= 0.0) {
            bail!("--gap must be nonnegative");
        }
        solve_exact(&model, &SolveOptions { time_limit: Duration::from_secs_f64(time_limit), gap_tolerance: gap })
    };
    if solution.status == SolveStatus::Timeout {
        log::warn!("solve: time limit reached, gap {:.4}", solution.gap);
    }
    let out = SolutionFile::from_solution(&solution, inst.total_demand());
    let line = format!(
        "status={:?} objective={} served_ratio={:.6} zones={}",
        out.status,
        out.objective,
        out.served_ratio(),
        out.zones.len()
    );
    write_result(o.output.as_deref(), &line, |w| Ok(out.write_json(w)?))
}

/// Writes the result to the file and the one-line summary to standard
/// output, or the result to standard output and the summary to standard error.
fn write_result(path: Option<&Path>, summary: &str, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    with_output(path, write)?;
    if path.is_some() {
        println!("{summary}");
    } else {
        println!();
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_baseline(o: BaselineOpts) -> Result<()> {
    let mut inst = read_instance(&required(o.instance, "instance")?)?;
    if let Some(d) = o.max_diameter {
        inst.set_max_diameter(d)?;
    }
    if let Some(m) = o.zones {
        inst.set_num_zones(m)?;
    }
    let started = Instant::now();
    let result = simple_zoning(&inst);
    let served = inst.served_demand(&result.zones);
    let zones = result.zones.iter().map(|z| z.members().to_vec()).collect();
    let out = SolutionFile::heuristic(zones, served, inst.total_demand(), started.elapsed().as_secs_f64());
    let line = format!("objective={} served_ratio={:.6} zones={}", out.objective, out.served_ratio(), out.zones.len());
    write_result(o.output.as_deref(), &line, |w| Ok(out.write_json(w)?))
}

fn cmd_report(o: ReportOpts) -> Result<()> {
    let mut cfg = GridConfig::default();
    if let Some(n) = o.n {
        cfg.n_values = n;
    }
    if let Some(d) = o.d {
        cfg.d_values = d;
    }
    if let Some(s) = o.seeds {
        cfg.seeds = s;
    }
    if let Some(m) = o.zones {
        cfg.num_zones = m;
    }
    if let Some(t) = o.time_limit {
        cfg.solve.time_limit = Duration::from_secs_f64(t);
    }
    if let Some(b) = o.box_size {
        cfg.template.box_size = b;
    }
    if let Some(p) = o.p_bidir {
        cfg.template.p_bidir = p;
    }
    if let Some(p) = o.p_prune {
        cfg.template.p_prune = p;
    }
    if let Some(law) = &o.demand {
        cfg.template.demand_law = law.parse::<DemandLaw>()?;
    }
    if let Some(cap) = o.cap {
        cfg.cliques.max_cliques = cap;
    }
    if cfg.n_values.is_empty() || cfg.d_values.is_empty() || cfg.seeds.is_empty() {
        bail!("report needs at least one value each for --n, --d and --seeds");
    }
    let report = experiment_grid(&cfg);
    with_output(o.csv.as_deref(), |w| Ok(report.write_csv(w)?))?;
    let summary = report.to_markdown();
    match &o.summary {
        Some(path) => std::fs::write(path, summary).with_context(|| format!("writing {}", path.display()))?,
        None => eprint!("{summary}"),
    }
    if !report.failures.is_empty() {
        log::warn!("report: {} of {} cells failed", report.failures.len(), report.failures.len() + report.rows.len());
    }
    Ok(())
}

fn cmd_export(o: ExportOpts) -> Result<()> {
    let inst = read_instance(&required(o.instance, "instance")?)?;
    let sol_path = required(o.solution, "solution")?;
    let sol = SolutionFile::read_json(open(&sol_path)?).with_context(|| format!("reading {}", sol_path.display()))?;
    let fc = zones_to_geojson(&inst, &sol.zones)?;
    with_output(o.output.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &fc)?;
        writeln!(w)?;
        Ok(())
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).target(env_logger::Target::Stderr).init();

    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(threads) = cli.threads.or(file.threads) {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match cli.command {
        Command::Synth(o) => cmd_synth(o.merge(file.synth)),
        Command::Ingest(o) => cmd_ingest(o.merge(file.ingest)),
        Command::Cliques(o) => cmd_cliques(o.merge(file.cliques)),
        Command::Solve(o) => cmd_solve(o.merge(file.solve)),
        Command::Baseline(o) => cmd_baseline(o.merge(file.baseline)),
        Command::Report(o) => cmd_report(o.merge(file.report)),
        Command::ExportGeojson(o) => cmd_export(o.merge(file.export_geojson)),
    }
}
