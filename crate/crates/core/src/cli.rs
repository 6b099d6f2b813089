//! Command-line front end and run persistence.
//!
//! `explore` writes one artifact directory per run:
//!
//! * `config.json`: the resolved configuration (re-running it reproduces
//!   the archive).
//! * `generations.csv`: `gen,best_f1,best_f2,front0_size,hypervolume`.
//! * `pareto.csv` / `pareto.json`: the final non-dominated set.
//! * `population.json`: the final population.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adc::{LevelMask, MaskLiteral, PrunedAdc};
use crate::area::{estimate_mask_area, AreaEstimate};
use crate::chromosome::{Chromosome, ChromosomeJson, EvalResult, FitnessContext, SearchSettings};
use crate::data::{self, CsvSchema, Dataset, Delimiter, LabelColumn};
use crate::error::{Error, Result};
use crate::netlist::{self, GateKind};
use crate::nsga2::{self, GaParams, GenerationStats, Individual};
use crate::qmlp::ModelJson;

/// JSON Schema every run configuration must satisfy.
pub const RUN_CONFIG_SCHEMA: &str = include_str!("../schemas/run_config.schema.json");

#[derive(Debug, Parser)]
#[command(name = "adcprune", version, about = "Pruned flash ADC and pow2 MLP co-design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the multi-objective search and write a run directory.
    Explore(ExploreArgs),
    /// Train and score one chromosome.
    Evaluate(EvaluateArgs),
    /// Emit the encoder netlist of one mask.
    Netlist(NetlistArgs),
    /// Plot and summarize one or more run directories.
    Report(ReportArgs),
    /// Download known datasets into the data directory.
    Fetch(FetchArgs),
    /// Run the exhaustive function and area oracles.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DatasetArgs {
    /// Dataset name from the manifest, or a CSV path.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Label column: index, header name, or "last".
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    /// Field delimiter: one character, "tab" or "whitespace".
    #[arg(long)]
    pub delimiter: Option<String>,
    /// The CSV has no header row.
    #[arg(long = "no-header")]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Chromosome JSON file.
    #[arg(long)]
    pub chromosome: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetlistFormat {
    Hdl,
    Json,
}

#[derive(Debug, Args)]
pub struct NetlistArgs {
    #[arg(long)]
    pub bits: u32,
    /// Surviving-level mask in hex, bit 0 = level 1.
    #[arg(long)]
    pub mask: String,
    #[arg(long, value_enum, default_value = "hdl")]
    pub format: NetlistFormat,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip simplification.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Also write the summary table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    pub names: Vec<String>,
    #[arg(long)]
    pub all: bool,
    #[arg(long = "data-dir")]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Bitwidth of the exhaustive function check.
    #[arg(long, default_value_t = 3)]
    pub function_bits: u32,
    /// Bitwidth of the exhaustive area check.
    #[arg(long, default_value_t = 4)]
    pub area_bits: u32,
}

/// Where the data comes from; CSV fields apply to plain files only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub source: String,
    #[serde(default)]
    pub label_column: LabelColumn,
    #[serde(default)]
    pub delimiter: Delimiter,
    #[serde(default = "yes")]
    pub header: bool,
    #[serde(default)]
    pub drop_columns: Vec<usize>,
}

fn yes() -> bool {
    true
}

impl DatasetRef {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            label_column: self.label_column.clone(),
            delimiter: self.delimiter,
            header: self.header,
            drop_columns: self.drop_columns.clone(),
        }
    }

    fn apply(&mut self, args: &DatasetArgs) -> Result<()> {
        if let Some(s) = &args.dataset {
            self.source = s.clone();
        }
        if let Some(l) = &args.label_col {
            self.label_column = l.parse()?;
        }
        if let Some(d) = &args.delimiter {
            self.delimiter = d.parse()?;
        }
        if args.no_header {
            self.header = false;
        }
        Ok(())
    }

    pub fn load(&self) -> Result<Dataset> {
        data::resolve(&self.source, &self.schema(), &data::data_dir())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaSection {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
}

impl Default for GaSection {
    fn default() -> Self {
        let d = GaParams::default();
        Self {
            population: d.population,
            generations: d.generations,
            crossover_prob: d.crossover_prob,
            mutation_prob: d.mutation_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetRef,
    /// Seeds the split, the GA and every evaluation.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub search: SearchSettings,
    #[serde(default)]
    pub ga: GaSection,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Evaluation threads; default is the available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn ga_params(&self) -> GaParams {
        GaParams {
            population: self.ga.population,
            generations: self.ga.generations,
            crossover_prob: self.ga.crossover_prob,
            mutation_prob: self.ga.mutation_prob,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.ga_params().validate()?;
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Checks `value` against the published schema, then deserializes and
    /// validates it.
    pub fn from_value(value: Value) -> Result<Self> {
        validate_against_schema(&value)?;
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_value(value)
    }

    /// `out_dir`, else `$ADCPRUNE_OUT_DIR/<dataset>-s<seed>`, else `runs/...`.
    pub fn resolved_out_dir(&self, dataset_name: &str) -> PathBuf {
        if let Some(d) = &self.out_dir {
            return d.clone();
        }
        let root = std::env::var_os("ADCPRUNE_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        root.join(format!("{dataset_name}-s{}", self.seed))
    }
}

pub fn validate_against_schema(value: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(RUN_CONFIG_SCHEMA).expect("embedded schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("embedded schema compiles");
    let errors: Vec<String> =
        validator.iter_errors(value).map(|e| format!("{} at '{}'", e, e.instance_path())).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("config does not match schema: {}", errors.join("; "))))
    }
}

/// One archived design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub id: usize,
    pub chromosome: ChromosomeJson,
    pub f1_acc_miss: f64,
    pub accuracy: f64,
    pub test_accuracy: f64,
    pub f2_area_units: f64,
    pub area_normalized_to_baseline: f64,
    pub per_adc: Vec<AreaEstimate>,
    pub model: Option<ModelJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineInfo {
    pub area_units: f64,
    pub accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvStamp {
    pub tool: String,
    pub version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFile {
    pub dataset: String,
    pub features: usize,
    pub classes: usize,
    pub bitwidth: u32,
    pub baseline: BaselineInfo,
    pub points: Vec<ParetoPoint>,
    pub env: EnvStamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMember {
    pub id: usize,
    pub rank: usize,
    pub objectives: Vec<f64>,
    pub chromosome: ChromosomeJson,
}

/// In-memory result of an exploration run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub pareto: ParetoFile,
    pub population: Vec<PopulationMember>,
    pub history: Vec<GenerationStats>,
}

fn point_from(ind: &Individual<Chromosome, EvalResult>, baseline_area: f64) -> ParetoPoint {
    let info = ind.info.as_ref();
    ParetoPoint {
        id: ind.id,
        chromosome: ind.genome.to_json(),
        f1_acc_miss: ind.objectives[0],
        accuracy: info.map_or(0.0, |r| r.accuracy),
        test_accuracy: info.map_or(0.0, |r| r.test_accuracy),
        f2_area_units: ind.objectives[1],
        area_normalized_to_baseline: if baseline_area > 0.0 { ind.objectives[1] / baseline_area } else { 0.0 },
        per_adc: info.map(|r| r.per_adc.clone()).unwrap_or_default(),
        model: info.map(|r| r.model.to_json()),
    }
}

/// Runs the search. `on_generation` sees every generation record as soon as
/// the generation barrier is passed.
pub fn explore(
    cfg: &RunConfig,
    ds: &Dataset,
    mut on_generation: impl FnMut(&GenerationStats) -> Result<()> + Send,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let ctx = FitnessContext::new(ds, cfg.search.clone(), cfg.seed)?;
    let params = cfg.ga_params();
    let baseline_area = ctx.baseline_area();
    let mut baseline: Option<BaselineInfo> = None;
    let mut sink_error: Option<Error> = None;

    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let result = pool.install(|| {
        nsga2::evolve_with(&ctx, &params, |stats, pop| {
            if stats.generation == 0 {
                // Individual 0 of the seeded population is the conventional design.
                if let Some(b) = pop.iter().find(|p| p.id == 0) {
                    let info = b.info.as_ref();
                    baseline = Some(BaselineInfo {
                        area_units: baseline_area,
                        accuracy: info.map_or(0.0, |r| r.accuracy),
                        test_accuracy: info.map_or(0.0, |r| r.test_accuracy),
                    });
                }
            }
            log::info!(
                "gen {:>4}  best f1 {:.4}  best f2 {:.1}  front0 {}  hv {:.4}",
                stats.generation,
                stats.best_f1,
                stats.best_f2,
                stats.front0_size,
                stats.hypervolume
            );
            if sink_error.is_none() {
                if let Err(e) = on_generation(stats) {
                    sink_error = Some(e);
                }
            }
        })
    })?;
    if let Some(e) = sink_error {
        return Err(e);
    }

    let mut seen = std::collections::HashSet::new();
    let points: Vec<ParetoPoint> = result
        .archive
        .iter()
        .filter(|ind| seen.insert(ind.genome.clone()))
        .map(|ind| point_from(ind, baseline_area))
        .collect();
    let population = result
        .population
        .iter()
        .map(|p| PopulationMember { id: p.id, rank: p.rank, objectives: p.objectives.clone(), chromosome: p.genome.to_json() })
        .collect();
    Ok(RunOutcome {
        pareto: ParetoFile {
            dataset: ds.name.clone(),
            features: ctx.features,
            classes: ctx.classes,
            bitwidth: cfg.search.bitwidth,
            baseline: baseline.expect("generation 0 always reported"),
            points,
            env: EnvStamp { tool: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into(), seed: cfg.seed },
        },
        population,
        history: result.history,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub const GENERATIONS_HEADER: &str = "gen,best_f1,best_f2,front0_size,hypervolume";

pub const PARETO_HEADER: [&str; 10] = [
    "id",
    "f1_acc_miss",
    "accuracy",
    "f2_area_units",
    "area_normalized_to_baseline",
    "masks_hex",
    "weight_bits",
    "activation_bits",
    "batch_size",
    "epochs",
];

pub fn pareto_csv(points: &[ParetoPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PARETO_HEADER)?;
    for p in points {
        let c = &p.chromosome;
        w.write_record([
            p.id.to_string(),
            p.f1_acc_miss.to_string(),
            p.accuracy.to_string(),
            p.f2_area_units.to_string(),
            p.area_normalized_to_baseline.to_string(),
            c.masks.join(";"),
            c.weight_bits.to_string(),
            c.activation_bits.to_string(),
            c.batch_size.to_string(),
            c.epochs.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn generation_line(s: &GenerationStats) -> String {
    format!("{},{},{},{},{}\n", s.generation, s.best_f1, s.best_f2, s.front0_size, s.hypervolume)
}

/// Runs `explore` and writes the artifact directory; returns its path.
pub fn explore_to_dir(cfg: &RunConfig, ds: &Dataset, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file(&out.join("config.json"), to_json_pretty(cfg)?)?;
    let gen_path = out.join("generations.csv");
    let mut gen_file = fs::File::create(&gen_path).map_err(|e| Error::io(&gen_path, e))?;
    writeln!(gen_file, "{GENERATIONS_HEADER}").map_err(|e| Error::io(&gen_path, e))?;
    let outcome = explore(cfg, ds, |s| {
        gen_file.write_all(generation_line(s).as_bytes()).and_then(|_| gen_file.flush()).map_err(|e| Error::io(&gen_path, e))
    })?;
    write_file(&out.join("pareto.csv"), pareto_csv(&outcome.pareto.points)?)?;
    write_file(&out.join("pareto.json"), to_json_pretty(&outcome.pareto)?)?;
    write_file(&out.join("population.json"), to_json_pretty(&outcome.population)?)?;
    Ok(outcome)
}

fn cmd_explore(args: &ExploreArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.dataset.apply(&args.data)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(p) = args.population {
        cfg.ga.population = p;
    }
    if let Some(g) = args.generations {
        cfg.ga.generations = g;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate()?;
    let ds = cfg.dataset.load()?;
    let out = cfg.resolved_out_dir(&ds.name);
    cfg.out_dir = Some(out.clone());
    let outcome = explore_to_dir(&cfg, &ds, &out)?;
    let p = &outcome.pareto;
    println!(
        "{}: {} pareto points, baseline accuracy {:.4}, baseline area {} units",
        p.dataset,
        p.points.len(),
        p.baseline.accuracy,
        p.baseline.area_units
    );
    println!("artifacts in {}", out.display());
    Ok(())
}

/// Human-readable evaluation report.
pub fn evaluation_report(ctx: &FitnessContext, ch: &Chromosome, res: &EvalResult) -> String {
    let baseline = ctx.baseline_area();
    let mut s = String::new();
    let _ = writeln!(s, "dataset: {} ({} features, {} classes)", ctx.dataset_name, ctx.features, ctx.classes);
    let _ = writeln!(s, "accuracy: {:.4}", res.accuracy);
    let _ = writeln!(s, "test accuracy: {:.4}", res.test_accuracy);
    let _ = writeln!(s, "input  mask  comparators  or2  area");
    for (i, (m, a)) in ch.masks.iter().zip(&res.per_adc).enumerate() {
        let _ = writeln!(s, "{i:>5}  {:>4}  {:>11}  {:>3}  {}", m.to_hex(), a.comparators, a.or2_gates, a.total);
    }
    let _ = writeln!(s, "frontend area: {}", res.frontend_area);
    let _ = writeln!(s, "conventional area: {baseline}");
    let norm = if baseline > 0.0 { res.frontend_area / baseline } else { 0.0 };
    let _ = writeln!(s, "normalized area: {norm:.4}");
    s
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig {
            dataset: DatasetRef {
                source: String::new(),
                label_column: LabelColumn::default(),
                delimiter: Delimiter::default(),
                header: true,
                drop_columns: Vec::new(),
            },
            seed: 0,
            search: SearchSettings::default(),
            ga: GaSection::default(),
            out_dir: None,
            workers: None,
        },
    };
    cfg.dataset.apply(&args.data)?;
    if cfg.dataset.source.is_empty() {
        return Err(Error::InvalidConfig("no dataset: pass --dataset or --config".into()));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let text = fs::read_to_string(&args.chromosome).map_err(|e| Error::io(&args.chromosome, e))?;
    let json: ChromosomeJson =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", args.chromosome.display())))?;
    let ch = Chromosome::from_json(&json, cfg.search.bitwidth)?;
    let ds = cfg.dataset.load()?;
    let ctx = FitnessContext::new(&ds, cfg.search.clone(), cfg.seed)?;
    let res = ctx.evaluate(&ch, cfg.seed)?;
    print!("{}", evaluation_report(&ctx, &ch, &res));
    Ok(())
}

fn cmd_netlist(args: &NetlistArgs) -> Result<()> {
    let literal: MaskLiteral = args.mask.parse()?;
    let mask = literal.resolve(args.bits)?;
    let net = if args.raw { netlist::compile_encoder_raw(&mask) } else { netlist::compile_encoder(&mask) };
    let body = match args.format {
        NetlistFormat::Hdl => netlist::emit_hdl(&net, &format!("adc{}_encoder_{}", args.bits, mask.to_hex()))?,
        NetlistFormat::Json => to_json_pretty(&netlist::to_json(&net))?,
    };
    let counts = netlist::count_gates(&net);
    let summary = format!(
        "mask {} ({} bits): {} comparator inputs, OR2 {}, AND2 {}, INV {}",
        mask.to_hex(),
        args.bits,
        net.inputs().len(),
        counts[&GateKind::Or2],
        counts[&GateKind::And2],
        counts[&GateKind::Inv]
    );
    match &args.out {
        Some(path) => {
            write_file(path, body)?;
            println!("{summary}");
        }
        None => {
            print!("{body}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

/// Smallest-area point within `max_loss` of the baseline accuracy.
pub fn best_within_loss(file: &ParetoFile, max_loss: f64) -> Option<&ParetoPoint> {
    file.points
        .iter()
        .filter(|p| p.accuracy >= file.baseline.accuracy - max_loss - 1e-12)
        .min_by(|a, b| a.f2_area_units.total_cmp(&b.f2_area_units).then(b.accuracy.total_cmp(&a.accuracy)))
}

/// Non-dominated `(normalized area, accuracy)` pairs sorted by area; accuracy
/// is non-decreasing along the result.
pub fn staircase(points: &[ParetoPoint]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.area_normalized_to_baseline, p.accuracy)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if out.last().is_none_or(|l| p.1 > l.1) {
            out.push(p);
        }
    }
    out
}

/// Accuracy vs normalized area scatter with the staircase front.
pub fn scatter_svg(file: &ParetoFile) -> String {
    let (w, h, m) = (480.0, 360.0, 50.0);
    let pts: Vec<(f64, f64)> = file.points.iter().map(|p| (p.area_normalized_to_baseline, p.accuracy)).collect();
    let x_max = pts.iter().map(|p| p.0).fold(1.0f64, f64::max) * 1.05;
    let y_lo = pts.iter().map(|p| p.1).chain([file.baseline.accuracy]).fold(1.0f64, f64::min);
    let y_min = (y_lo - 0.05).max(0.0);
    let y_max = 1.0;
    let sx = |x: f64| m + x / x_max * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y_min) / (y_max - y_min).max(1e-9) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        w / 2.0,
        xml_escape(&file.dataset)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        b = h - m,
        r = w - m,
        t = m
    );
    for k in 0..=4 {
        let xv = x_max * k as f64 / 4.0;
        let yv = y_min + (y_max - y_min) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{xv:.2}</text>"#,
            sx(xv),
            h - m + 14.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{yv:.2}</text>"#,
            m - 4.0,
            sy(yv) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">area normalized to conventional ADCs</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">accuracy</text>"#,
        h / 2.0,
        h / 2.0
    );
    let stairs = staircase(&file.points);
    if stairs.len() > 1 {
        let mut d = String::new();
        for (i, (x, y)) in stairs.iter().enumerate() {
            if i == 0 {
                let _ = write!(d, "M{:.1},{:.1}", sx(*x), sy(*y));
            } else {
                let _ = write!(d, " H{:.1} V{:.1}", sx(*x), sy(*y));
            }
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="steelblue" stroke-width="1"/>"#);
    }
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#, sx(*x), sy(*y));
    }
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="{:.1}" width="6" height="6" fill="crimson"><title>conventional</title></rect>"#,
        sx(1.0) - 3.0,
        sy(file.baseline.accuracy) - 3.0
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn load_pareto(run: &Path) -> Result<ParetoFile> {
    let path = run.join("pareto.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

/// Summary table of the best points at 1% and 5% accuracy loss, one row per run.
pub fn summary_table(runs: &[(String, ParetoFile)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:<18} {:>8} {:>6} | {:>8} {:>8} {:>7} | {:>8} {:>8} {:>7}",
        "run", "dataset", "base_acc", "points", "acc@1%", "area@1%", "gain@1%", "acc@5%", "area@5%", "gain@5%"
    );
    for (name, file) in runs {
        let mut row = format!(
            "{:<24} {:<18} {:>8.4} {:>6}",
            name,
            file.dataset,
            file.baseline.accuracy,
            file.points.len()
        );
        for loss in [0.01, 0.05] {
            match best_within_loss(file, loss) {
                Some(p) => {
                    let gain = if p.area_normalized_to_baseline > 0.0 { 1.0 / p.area_normalized_to_baseline } else { f64::INFINITY };
                    let _ = write!(row, " | {:>8.4} {:>8.4} {:>6.2}x", p.accuracy, p.area_normalized_to_baseline, gain);
                }
                None => {
                    let _ = write!(row, " | {:>8} {:>8} {:>7}", "-", "-", "-");
                }
            }
        }
        s.push_str(&row);
        s.push('\n');
    }
    s
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut runs = Vec::new();
    for dir in &args.runs {
        let file = load_pareto(dir)?;
        write_file(&dir.join("pareto.svg"), scatter_svg(&file))?;
        let mut front = String::from("area_normalized,accuracy\n");
        for (x, y) in staircase(&file.points) {
            let _ = writeln!(front, "{x},{y}");
        }
        write_file(&dir.join("front.csv"), front)?;
        let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        runs.push((name, file));
    }
    let table = summary_table(&runs);
    print!("{table}");
    if let Some(out) = &args.out {
        write_file(out, &table)?;
    }
    Ok(())
}

fn cmd_fetch(args: &FetchArgs) -> Result<()> {
    let dir = args.data_dir.clone().unwrap_or_else(data::data_dir);
    let entries = if args.all {
        data::manifest()
    } else {
        if args.names.is_empty() {
            return Err(Error::InvalidConfig("name at least one dataset or pass --all".into()));
        }
        args.names
            .iter()
            .map(|n| data::manifest_entry(n).ok_or_else(|| Error::InvalidConfig(format!("unknown dataset {n:?}"))))
            .collect::<Result<Vec<_>>>()?
    };
    let mut failed = 0;
    for entry in &entries {
        if data::prepared_path(&dir, &entry.name).is_file() {
            println!("{}: prepared file present", entry.name);
            continue;
        }
        match data::fetch(entry, &dir) {
            Ok(path) => println!("{}: {}", entry.name, path.display()),
            Err(e) => {
                eprintln!("{}: {e}", entry.name);
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(Error::Fetch(format!("{failed} of {} dataset(s) unavailable", entries.len())));
    }
    Ok(())
}

/// Result of the exhaustive netlist oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub function_bits: u32,
    pub function_cases: usize,
    pub function_mismatches: usize,
    pub area_bits: u32,
    pub area_masks: usize,
    pub area_mismatches: usize,
    /// Pearson correlation of proxy area and netlist logic gate count.
    pub correlation: f64,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn run_oracles(function_bits: u32, area_bits: u32) -> Result<OracleReport> {
    let mut cases = 0;
    let mut fn_bad = 0;
    for bits in 0..(1u64 << LevelMask::level_count(function_bits)) {
        let mask = LevelMask::from_bits(function_bits, bits)?;
        let adc = PrunedAdc::new(mask);
        let net = netlist::compile_encoder(&mask);
        let levels: Vec<usize> = mask.levels().collect();
        for ones in 0..=levels.len() {
            let therm: Vec<bool> = (0..levels.len()).map(|i| i < ones).collect();
            // Midway between the last passed threshold and the next one.
            let lo = if ones == 0 { 0.0 } else { adc.level_voltage(levels[ones - 1]) };
            let hi = levels.get(ones).map_or(adc.vref(), |&l| adc.level_voltage(l));
            let vin = if ones == 0 { lo - 0.01 } else { (lo + hi) / 2.0 };
            cases += 1;
            if netlist::simulate(&net, &therm)? != adc.digitize(vin) {
                fn_bad += 1;
            }
        }
    }
    let mut area_bad = 0;
    let mut proxy = Vec::new();
    let mut gates = Vec::new();
    let unit = Default::default();
    let n_masks = 1usize << LevelMask::level_count(area_bits);
    for bits in 0..n_masks as u64 {
        let mask = LevelMask::from_bits(area_bits, bits)?;
        let est = estimate_mask_area(&mask, &unit);
        let counts = netlist::count_gates(&netlist::compile_encoder(&mask));
        if est.or2_gates != counts[&GateKind::Or2] {
            area_bad += 1;
        }
        proxy.push(est.total);
        gates.push((est.comparators + netlist::logic_gate_total(&counts)) as f64);
    }
    Ok(OracleReport {
        function_bits,
        function_cases: cases,
        function_mismatches: fn_bad,
        area_bits,
        area_masks: n_masks,
        area_mismatches: area_bad,
        correlation: pearson(&proxy, &gates),
    })
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    for b in [args.function_bits, args.area_bits] {
        if !(1..=4).contains(&b) {
            return Err(Error::InvalidConfig(format!("oracle bitwidth {b} outside 1..=4 (exhaustive sweep)")));
        }
    }
    let r = run_oracles(args.function_bits, args.area_bits)?;
    println!(
        "function: {} cases over all {}-bit masks, {} mismatches",
        r.function_cases, r.function_bits, r.function_mismatches
    );
    println!("area: {} masks at {} bits, {} OR2 count mismatches", r.area_masks, r.area_bits, r.area_mismatches);
    println!("pearson(proxy area, comparators + netlist gates) = {:.4}", r.correlation);
    if r.function_mismatches > 0 || r.area_mismatches > 0 {
        return Err(Error::Dataset("oracle mismatches found".into()));
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Explore(a) => cmd_explore(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Netlist(a) => cmd_netlist(a),
        Command::Report(a) => cmd_report(a),
        Command::Fetch(a) => cmd_fetch(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}
