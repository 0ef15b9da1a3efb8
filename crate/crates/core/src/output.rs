use crate::config::TruthSource;
use crate::error::Result;
use crate::experiment::RunReport;
use crate::inference::TraceRow;
use crate::levelset::PointSource;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Side-by-side misfits of a thinned and an unthinned run on the same data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThinningComparison {
    pub thinning_misfit: f64,
    pub nothinning_misfit: f64,
}

impl ThinningComparison {
    pub fn nothinning_worse(&self) -> bool {
        self.nothinning_misfit > self.thinning_misfit
    }
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration,relative_error,J,Phi,acceptance_rate\n");
    for row in trace {
        let rel = row
            .relative_error
            .map_or(String::from(""), |r| r.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            row.iteration, rel, row.active_count, row.potential, row.acceptance_rate
        );
    }
    s
}

pub fn scatter_csv(truth: &[TruthSource], sources: &[PointSource]) -> String {
    let mut s = String::from("kind,x,y,intensity\n");
    for t in truth {
        let _ = writeln!(s, "truth,{},{},{}", t.x, t.y, t.intensity);
    }
    for p in sources {
        let _ = writeln!(s, "estimate,{},{},{}", p.x, p.y, p.intensity);
    }
    s
}

fn fmt_point(x: f64, y: f64) -> String {
    format!("({x:7.4}, {y:7.4})")
}

/// Human-readable run summary: matched sources side by side in the layout
/// exact location | exact intensity | reconstructed location |
/// reconstructed intensity, then spurious and missed listings, then the
/// scalar metrics.
pub fn summary_text(report: &RunReport, comparison: Option<&ThinningComparison>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "run:          {}", report.name);
    let _ = writeln!(s, "seed:         {}", report.seed);
    let _ = writeln!(
        s,
        "thinning:     {}",
        if report.thinning { "on" } else { "off" }
    );
    let _ = writeln!(s, "noise sigma:  {:.6e}", report.noise_sigma);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<20}  {:>15}  {:<22}  {:>23}",
        "exact location", "exact intensity", "reconstructed location", "reconstructed intensity"
    );
    for pair in &report.matching.pairs {
        let _ = writeln!(
            s,
            "{:<20}  {:>15.4}  {:<22}  {:>23.4}",
            fmt_point(pair.truth.x, pair.truth.y),
            pair.truth.intensity,
            fmt_point(pair.estimate.x, pair.estimate.y),
            pair.estimate.intensity
        );
    }
    for missed in &report.matching.missed {
        let _ = writeln!(
            s,
            "{:<20}  {:>15.4}  {:<22}  {:>23}",
            fmt_point(missed.x, missed.y),
            missed.intensity,
            "(not recovered)",
            "-"
        );
    }
    for spur in &report.matching.spurious {
        let _ = writeln!(
            s,
            "{:<20}  {:>15}  {:<22}  {:>23.4}",
            "(spurious)",
            "-",
            fmt_point(spur.x, spur.y),
            spur.intensity
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "recovered sources:  {}", report.sources.len());
    let _ = writeln!(s, "relative error:     {:.6}", report.relative_error);
    let _ = writeln!(s, "final misfit:       {:.6}", report.final_misfit);
    let _ = writeln!(s, "final potential:    {:.6}", report.final_potential);
    let _ = writeln!(s, "acceptance rate:    {:.4}", report.mean_acceptance);
    let _ = writeln!(s, "removals:           {}", report.total_removals);
    let _ = writeln!(s, "iterations:         {}", report.trace.len());
    if let Some(cmp) = comparison {
        let _ = writeln!(s);
        let _ = writeln!(s, "thinned run misfit:    {:.6}", cmp.thinning_misfit);
        let _ = writeln!(s, "unthinned run misfit:  {:.6}", cmp.nothinning_misfit);
        let _ = writeln!(
            s,
            "without thinning the final misfit is {}",
            if cmp.nothinning_worse() {
                "WORSE"
            } else {
                "not worse"
            }
        );
    }
    s
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    #[serde(flatten)]
    report: &'a RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<ComparisonJson>,
}

#[derive(Serialize)]
struct ComparisonJson {
    thinning_misfit: f64,
    nothinning_misfit: f64,
    nothinning_worse: bool,
}

/// Write the full output set for one run into `dir`: trace.csv,
/// final_sources.json, summary.txt, summary.json and scatter.csv.
pub fn write_run_outputs(
    dir: &Path,
    report: &RunReport,
    truth: &[TruthSource],
    comparison: Option<&ThinningComparison>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace_csv(&report.trace))?;
    fs::write(
        dir.join("final_sources.json"),
        serde_json::to_string_pretty(&report.sources)?,
    )?;
    fs::write(dir.join("scatter.csv"), scatter_csv(truth, &report.sources))?;
    fs::write(dir.join("summary.txt"), summary_text(report, comparison))?;
    let json = SummaryJson {
        report,
        comparison: comparison.map(|c| ComparisonJson {
            thinning_misfit: c.thinning_misfit,
            nothinning_misfit: c.nothinning_misfit,
            nothinning_worse: c.nothinning_worse(),
        }),
    };
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&json)?,
    )?;
    Ok(())
}

/// Median of a sample; the input order is irrelevant.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub relative_error: f64,
    pub final_misfit: f64,
    pub recovered: usize,
    pub spurious: usize,
    pub missed: usize,
    pub acceptance_rate: f64,
    pub removals: usize,
}

impl SweepRow {
    pub fn from_report(report: &RunReport) -> Self {
        Self {
            seed: report.seed,
            relative_error: report.relative_error,
            final_misfit: report.final_misfit,
            recovered: report.sources.len(),
            spurious: report.matching.spurious.len(),
            missed: report.matching.missed.len(),
            acceptance_rate: report.mean_acceptance,
            removals: report.total_removals,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub name: String,
    pub seeds: usize,
    pub median_relative_error: f64,
    pub median_final_misfit: f64,
    pub exact_recovery_runs: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn from_rows(name: &str, rows: Vec<SweepRow>, truth_count: usize) -> Self {
        let rel: Vec<f64> = rows.iter().map(|r| r.relative_error).collect();
        let mis: Vec<f64> = rows.iter().map(|r| r.final_misfit).collect();
        let exact = rows
            .iter()
            .filter(|r| r.recovered == truth_count && r.spurious == 0 && r.missed == 0)
            .count();
        Self {
            name: name.to_string(),
            seeds: rows.len(),
            median_relative_error: median(&rel),
            median_final_misfit: median(&mis),
            exact_recovery_runs: exact,
            rows,
        }
    }
}

pub fn write_sweep_outputs(dir: &Path, summary: &SweepSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = String::from(
        "seed,relative_error,final_misfit,recovered,spurious,missed,acceptance_rate,removals\n",
    );
    for r in &summary.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.seed,
            r.relative_error,
            r.final_misfit,
            r.recovered,
            r.spurious,
            r.missed,
            r.acceptance_rate,
            r.removals
        );
    }
    fs::write(dir.join("aggregate.csv"), csv)?;
    fs::write(
        dir.join("aggregate.json"),
        serde_json::to_string_pretty(summary)?,
    )?;

    let mut txt = String::new();
    let _ = writeln!(txt, "sweep:                  {}", summary.name);
    let _ = writeln!(txt, "seeds:                  {}", summary.seeds);
    let _ = writeln!(
        txt,
        "median relative error:  {:.6}",
        summary.median_relative_error
    );
    let _ = writeln!(
        txt,
        "median final misfit:    {:.6}",
        summary.median_final_misfit
    );
    let _ = writeln!(
        txt,
        "exact recovery runs:    {}/{}",
        summary.exact_recovery_runs, summary.seeds
    );
    fs::write(dir.join("aggregate.txt"), txt)?;
    Ok(())
}
