//! Sensitivity grid over node count and diameter bound: for every cell and
//! seed, generate the instance, enumerate candidates, solve exactly, run the
//! baseline and record served-demand ratios and timings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, SynthParams};
use crate::baseline::simple_zoning;
use crate::cliquegen::{clique_gen, CliqueGenConfig};
use crate::coverage::{build_model, solve_exact, ModelOptions, SolveOptions, SolveStatus};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub n_values: Vec<usize>,
    pub d_values: Vec<f64>,
    pub num_zones: usize,
    pub seeds: Vec<u64>,
    /// Network and demand settings; `n` and `seed` are overridden per cell.
    pub template: SynthParams,
    pub cliques: CliqueGenConfig,
    pub solve: SolveOptions,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_values: vec![50, 100, 150, 200],
            d_values: vec![1.5, 2.0, 2.5, 3.0],
            num_zones: 4,
            seeds: vec![1],
            template: SynthParams::new(50, 0),
            cliques: CliqueGenConfig::default(),
            solve: SolveOptions::default(),
        }
    }
}

/// One CSV row per (n, D, seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub m: usize,
    pub seed: u64,
    pub num_cliques: usize,
    pub exact_ratio: f64,
    pub baseline_ratio: f64,
    pub clique_time_s: f64,
    pub solve_time_s: f64,
    #[serde(skip)]
    pub exact_status: Option<SolveStatus>,
}

impl GridRow {
    /// `(exact - baseline) / baseline`, or `None` when the baseline serves nothing.
    pub fn relative_improvement(&self) -> Option<f64> {
        (self.baseline_ratio > 0.0).then(|| (self.exact_ratio - self.baseline_ratio) / self.baseline_ratio)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub n: usize,
    pub d: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub failures: Vec<CellFailure>,
}

fn run_instance(config: &GridConfig, n: usize, seed: u64) -> Vec<std::result::Result<GridRow, CellFailure>> {
    let params = SynthParams { n, seed, ..config.template };
    let fail = |d: f64, e: &dyn std::fmt::Display| CellFailure { n, d, seed, message: e.to_string() };
    let base = match generate(&params, config.d_values.first().copied().unwrap_or(1.0), config.num_zones) {
        Ok(inst) => inst,
        Err(e) => return config.d_values.iter().map(|&d| Err(fail(d, &e))).collect(),
    };
    let total = base.total_demand();
    let ratio = |served: f64| if total > 0.0 { served / total } else { 0.0 };
    config
        .d_values
        .iter()
        .map(|&d| {
            let mut inst = base.clone();
            inst.set_max_diameter(d).map_err(|e| fail(d, &e))?;
            let started = Instant::now();
            let list = clique_gen(&inst, &config.cliques).map_err(|e| fail(d, &e))?;
            let clique_time_s = started.elapsed().as_secs_f64();
            let started = Instant::now();
            let model = build_model(&inst, list.cliques(), ModelOptions::default()).map_err(|e| fail(d, &e))?;
            let exact = solve_exact(&model, &config.solve);
            let solve_time_s = started.elapsed().as_secs_f64();
            if exact.status != SolveStatus::Optimal {
                log::warn!("grid cell n={n} D={d} seed={seed}: exact solve ended with {:?}", exact.status);
            }
            let baseline = simple_zoning(&inst);
            let row = GridRow {
                n,
                d,
                m: config.num_zones,
                seed,
                num_cliques: list.len(),
                exact_ratio: ratio(exact.objective),
                baseline_ratio: ratio(inst.served_demand(&baseline.zones)),
                clique_time_s,
                solve_time_s,
                exact_status: Some(exact.status),
            };
            log::info!(
                "n={n} D={d} seed={seed}: |L|={} exact={:.4} baseline={:.4} ({:.2}s + {:.2}s)",
                row.num_cliques,
                row.exact_ratio,
                row.baseline_ratio,
                clique_time_s,
                solve_time_s
            );
            Ok(row)
        })
        .collect()
}

/// Runs every grid cell. A failing cell is recorded and the grid continues.
/// Rows are ordered by `(n, D, seed)`.
pub fn experiment_grid(config: &GridConfig) -> GridReport {
    let jobs: Vec<(usize, u64)> =
        config.n_values.iter().flat_map(|&n| config.seeds.iter().map(move |&s| (n, s))).collect();
    let results: Vec<_> = jobs.par_iter().flat_map_iter(|&(n, seed)| run_instance(config, n, seed)).collect();
    let mut report = GridReport::default();
    for r in results {
        match r {
            Ok(row) => report.rows.push(row),
            Err(f) => {
                log::error!("grid cell n={} D={} seed={} failed: {}", f.n, f.d, f.seed, f.message);
                report.failures.push(f);
            }
        }
    }
    report.rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.d.total_cmp(&b.d)).then(a.seed.cmp(&b.seed)));
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSummary {
    pub cells: usize,
    pub mean_improvement: f64,
    pub max_improvement: f64,
    /// `(n, D)` of the largest improvement.
    pub max_at: Option<(usize, f64)>,
    pub improved_fraction: f64,
    pub dominated_cells: usize,
}

impl GridReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> GridSummary {
        let improvements: Vec<(f64, &GridRow)> =
            self.rows.iter().filter_map(|r| r.relative_improvement().map(|i| (i, r))).collect();
        let mean_improvement = if improvements.is_empty() {
            0.0
        } else {
            improvements.iter().map(|(i, _)| i).sum::<f64>() / improvements.len() as f64
        };
        let best = improvements.iter().max_by(|a, b| a.0.total_cmp(&b.0));
        let improved = self.rows.iter().filter(|r| r.exact_ratio > r.baseline_ratio).count();
        GridSummary {
            cells: self.rows.len(),
            mean_improvement,
            max_improvement: best.map_or(0.0, |b| b.0),
            max_at: best.map(|b| (b.1.n, b.1.d)),
            improved_fraction: if self.rows.is_empty() { 0.0 } else { improved as f64 / self.rows.len() as f64 },
            dominated_cells: self.rows.iter().filter(|r| r.exact_ratio < r.baseline_ratio).count(),
        }
    }

    /// Markdown report: headline statistics plus mean served-ratio tables
    /// (rows = D, columns = n) for both methods and mean clique counts.
    pub fn to_markdown(&self) -> String {
        let s = self.summary();
        let mut out = String::new();
        let _ = writeln!(out, "# Zoning sensitivity report\n");
        let _ = writeln!(out, "- cells: {}", s.cells);
        let _ = writeln!(out, "- mean relative improvement of exact over baseline: {:.2}%", 100.0 * s.mean_improvement);
        if let Some((n, d)) = s.max_at {
            let _ = writeln!(out, "- max improvement: {:.2}% (n={n}, D={d})", 100.0 * s.max_improvement);
        }
        let _ = writeln!(out, "- cells where exact beats baseline: {:.1}%", 100.0 * s.improved_fraction);
        let _ = writeln!(out, "- cells where baseline beats exact: {}", s.dominated_cells);
        if !self.failures.is_empty() {
            let _ = writeln!(out, "- failed cells: {}", self.failures.len());
        }

        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut ds: Vec<f64> = self.rows.iter().map(|r| r.d).collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        let mut cells: BTreeMap<(usize, u64), Vec<&GridRow>> = BTreeMap::new();
        for r in &self.rows {
            cells.entry((r.n, r.d.to_bits())).or_default().push(r);
        }
        let table = |title: &str, value: &dyn Fn(&GridRow) -> f64, fmt: &dyn Fn(f64) -> String| {
            let mut t = format!("\n## {title}\n\n| D |");
            for n in &ns {
                let _ = write!(t, " n={n} |");
            }
            t.push_str("\n|---|");
            t.push_str(&"---|".repeat(ns.len()));
            for d in &ds {
                let _ = write!(t, "\n| {d} |");
                for n in &ns {
                    match cells.get(&(*n, d.to_bits())) {
                        Some(rows) => {
                            let mean = rows.iter().map(|r| value(r)).sum::<f64>() / rows.len() as f64;
                            let _ = write!(t, " {} |", fmt(mean));
                        }
                        None => t.push_str(" - |"),
                    }
                }
            }
            t.push('\n');
            t
        };
        let pct = |v: f64| format!("{:.2}%", 100.0 * v);
        out.push_str(&table("Exact served ratio", &|r| r.exact_ratio, &pct));
        out.push_str(&table("Baseline served ratio", &|r| r.baseline_ratio, &pct));
        out.push_str(&table("Candidate zones", &|r| r.num_cliques as f64, &|v| format!("{v:.0}")));
        out
    }
}

/// Grid settings with a per-cell time limit, as used by the report command.
pub fn with_time_limit(mut config: GridConfig, limit: Duration) -> GridConfig {
    config.solve.time_limit = limit;
    config
}
