use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use mushra_core::analysis::{
    cmos_preferences, default_axis, demographics_summary, distributions, fault_rates, pearson,
    revision_rate, sensitivity_grid, spearman, summarize_by, timing, CorrelationMethod,
    DistributionKey, PageTiming, RaterProfile, RatingCube, SensitivityConfig,
};
use mushra_core::dg::DG_TEST_VECTORS_JSON;
use mushra_core::par::Execution;
use mushra_core::protocol::{
    assemble_campaign, make_anchor_x, read_wav, write_wav, AudioCatalog, DirCatalog, TestPlan,
    TestVariant,
};
use mushra_core::scale::bin_of;
use mushra_core::screening::{lambda_sweep, screen, sweep_table, Comparison, ScreeningConfig};
use mushra_core::store::{export_dataset, import_dataset, write_rejects, ColumnMapping, RatingRecord};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::report::CliReport;
use crate::table::{OutputFormat, Table};
use crate::{Cli, CliError, Command, DatasetArgs, DistributionBy, Filters, Global, GroupBy, DEFAULT_SEED, MANGO_MAPPING_JSON};

struct Ctx {
    global: Global,
    seed: u64,
    exec: Execution,
    report: CliReport,
}

impl Ctx {
    fn format(&self) -> OutputFormat {
        if self.global.json {
            OutputFormat::Json
        } else if self.global.csv {
            OutputFormat::Csv
        } else if self
            .global
            .out
            .as_deref()
            .and_then(Path::extension)
            .is_some_and(|e| e == "json")
        {
            OutputFormat::Json
        } else {
            OutputFormat::Csv
        }
    }

    fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.report.add_input(path)
    }

    fn emit(&mut self, table: &Table) -> Result<(), CliError> {
        let format = self.format();
        match self.global.out.clone() {
            Some(path) => {
                let file = create(&path)?;
                table.write(format, file)?;
                self.report.add_output(&path);
                self.finish(Some(&path))
            }
            None => {
                let stdout = std::io::stdout();
                table.write(format, stdout.lock())?;
                self.finish(None)
            }
        }
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(mushra_core::Error::from)? + "\n";
        self.emit_text(&text)
    }

    fn emit_text(&mut self, text: &str) -> Result<(), CliError> {
        match self.global.out.clone() {
            Some(path) => {
                write_file(&path, text.as_bytes())?;
                self.report.add_output(&path);
                self.finish(Some(&path))
            }
            None => {
                std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
                self.finish(None)
            }
        }
    }

    /// Writes the sidecar next to `primary`, or logs the report.
    fn finish(&self, primary: Option<&Path>) -> Result<(), CliError> {
        match primary {
            Some(p) => self.report.write(&CliReport::sidecar_path(p)),
            None => {
                log::info!(
                    "report: {}",
                    serde_json::to_string(&self.report).map_err(mushra_core::Error::from)?
                );
                Ok(())
            }
        }
    }
}

fn create(path: &Path) -> Result<File, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = create(path)?;
    f.write_all(bytes)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let seed = match cli.global.seed {
        Some(s) => s,
        None => {
            log::info!("no --seed given; using default seed {DEFAULT_SEED}");
            DEFAULT_SEED
        }
    };
    let exec = if cli.global.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let exec_name = if exec.is_parallel() { "parallel" } else { "sequential" };
    let mut ctx = Ctx {
        report: CliReport::new(cli.command.name(), seed, exec_name),
        global: cli.global,
        seed,
        exec,
    };
    match cli.command {
        Command::Ingest { data } => ingest(&mut ctx, &data, false),
        Command::Export { data } => ingest(&mut ctx, &data, true),
        Command::Summarize {
            data,
            filters,
            by,
            screen,
        } => summarize_cmd(&mut ctx, &data, &filters, by, screen),
        Command::Screen {
            data,
            filters,
            lambda,
            fraction,
            threshold,
        } => screen_cmd(&mut ctx, &data, &filters, lambda.as_deref(), threshold, fraction),
        Command::Sensitivity {
            data,
            filters,
            grid,
            trials,
            screen,
        } => sensitivity_cmd(&mut ctx, &data, &filters, grid.as_deref(), trials, screen),
        Command::Distributions { data, filters, by } => {
            let records = load(&mut ctx, &data, &filters)?;
            let key = match by {
                DistributionBy::Rater => DistributionKey::Rater,
                DistributionBy::Utterance => DistributionKey::Utterance,
            };
            let table = Table::from_tabular(distributions(&records, key).as_slice());
            ctx.emit(&table)
        }
        Command::Correlate { dataset, x, y, method } => correlate_cmd(&mut ctx, &dataset, &x, &y, method.into()),
        Command::Faults { data, filters } => {
            let records = load(&mut ctx, &data, &filters)?;
            let report = fault_rates(&records);
            if report.systems.is_empty() {
                return Err(CliError::Validation("no DG scoresheets in the selected records".into()));
            }
            let rev = revision_rate(&records);
            log::info!("revision rate {} ({} of {})", rev.rate, rev.revised, rev.total);
            warn_skipped(report.skipped, "without a scoresheet");
            ctx.emit(&Table::from_tabular(&report))
        }
        Command::Cmos { data, filters } => {
            let records = load(&mut ctx, &data, &filters)?;
            let report = cmos_preferences(&records);
            if report.rows.is_empty() {
                return Err(CliError::Validation("no CMOS ratings in the selected records".into()));
            }
            warn_skipped(report.skipped, "without a CMOS value");
            ctx.emit(&Table::from_tabular(&report))
        }
        Command::Timing { dataset } => {
            ctx.input(&dataset)?;
            let pages: Vec<PageTiming> = read_rows(&dataset)?;
            let report = timing(&pages);
            for w in &report.warnings {
                log::warn!("{w}");
            }
            ctx.emit(&Table::from_tabular(&report))
        }
        Command::Demographics { dataset } => {
            ctx.input(&dataset)?;
            let raters: Vec<RaterProfile> = read_rows(&dataset)?;
            ctx.emit(&Table::from_tabular(&demographics_summary(&raters)))
        }
        Command::Anchor { input, output } => anchor_cmd(&mut ctx, &input, &output),
        Command::Assemble {
            plan,
            raters,
            audio_root,
        } => assemble_cmd(&mut ctx, &plan, raters, audio_root.as_deref()),
        Command::Serve { config } => serve_cmd(config.as_deref()),
        Command::DgVectors => ctx.emit_text(DG_TEST_VECTORS_JSON),
    }
}

fn warn_skipped(n: usize, what: &str) {
    if n > 0 {
        log::warn!("skipped {n} records {what}");
    }
}

fn load_mapping(ctx: &mut Ctx, spec: Option<&str>) -> Result<ColumnMapping, CliError> {
    match spec {
        None => Ok(ColumnMapping::canonical()),
        Some("mango") if !Path::new("mango").exists() => Ok(ColumnMapping::from_json(MANGO_MAPPING_JSON)?),
        Some(path) => {
            let path = Path::new(path);
            ctx.input(path)?;
            Ok(ColumnMapping::load(path)?)
        }
    }
}

fn read_dataset(ctx: &mut Ctx, data: &DatasetArgs) -> Result<(Vec<RatingRecord>, Vec<mushra_core::store::Reject>), CliError> {
    ctx.input(&data.dataset)?;
    let mapping = load_mapping(ctx, data.mapping.as_deref())?;
    let outcome = import_dataset(&data.dataset, &mapping)?;
    Ok((outcome.records, outcome.rejects))
}

fn rejects_error(rejects: &[mushra_core::store::Reject]) -> CliError {
    let first = &rejects[0];
    CliError::Validation(format!(
        "{} row(s) rejected; first at line {}: {} (use --allow-rejects to continue)",
        rejects.len(),
        first.line,
        first.reason
    ))
}

/// Imports, checks rejects and applies the filters.
fn load(ctx: &mut Ctx, data: &DatasetArgs, filters: &Filters) -> Result<Vec<RatingRecord>, CliError> {
    let (records, rejects) = read_dataset(ctx, data)?;
    if !rejects.is_empty() {
        if !ctx.global.allow_rejects {
            return Err(rejects_error(&rejects));
        }
        log::warn!("{} row(s) rejected and skipped", rejects.len());
    }
    if records.is_empty() {
        return Err(CliError::Validation(format!("{}: no records", data.dataset.display())));
    }
    let filtered = apply_filters(records, filters)?;
    if filtered.is_empty() {
        return Err(CliError::Usage("the filters matched no records".into()));
    }
    Ok(filtered)
}

fn apply_filters(records: Vec<RatingRecord>, f: &Filters) -> Result<Vec<RatingRecord>, CliError> {
    let variant = match &f.variant {
        Some(v) => Some(TestVariant::parse(v).ok_or_else(|| CliError::Usage(format!("unknown variant {v:?}")))?),
        None => None,
    };
    Ok(records
        .into_iter()
        .filter(|r| f.language.as_ref().is_none_or(|l| &r.language == l))
        .filter(|r| variant.is_none_or(|v| r.variant == v))
        .filter(|r| f.campaign.as_ref().is_none_or(|c| &r.campaign_id == c))
        .filter(|r| f.systems.is_empty() || f.systems.contains(&r.system_id))
        .collect())
}

fn ingest(ctx: &mut Ctx, data: &DatasetArgs, export: bool) -> Result<(), CliError> {
    let (records, rejects) = read_dataset(ctx, data)?;
    let out = ctx.global.out.clone();
    if export && out.is_none() {
        return Err(CliError::Usage("export needs --out <base path>".into()));
    }
    println!("{} records, {} rejects", records.len(), rejects.len());
    if let Some(base) = &out {
        let (csv, jsonl) = export_dataset(&records, base)?;
        ctx.report.add_output(&csv);
        ctx.report.add_output(&jsonl);
        if !rejects.is_empty() {
            let path = sibling(base, "rejects.csv");
            write_rejects(&path, &rejects)?;
            ctx.report.add_output(&path);
        }
        ctx.finish(Some(&csv))?;
    } else {
        ctx.finish(None)?;
    }
    if !rejects.is_empty() && !ctx.global.allow_rejects {
        return Err(rejects_error(&rejects));
    }
    Ok(())
}

/// `dir/name` -> `dir/name.<suffix>`
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    base.with_file_name(name)
}

fn summarize_cmd(ctx: &mut Ctx, data: &DatasetArgs, filters: &Filters, by: GroupBy, screened: bool) -> Result<(), CliError> {
    let mut records = load(ctx, data, filters)?;
    if screened {
        records = screen_records(records)?;
    }
    let (stats, warnings) = summarize_by(&records, |r| match by {
        GroupBy::System => r.system_id.clone(),
        GroupBy::Rater => r.rater_id.clone(),
        GroupBy::Utterance => r.utterance_id.clone(),
        GroupBy::Language => r.language.clone(),
        GroupBy::Variant => r.variant.to_string(),
    });
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut header = vec!["group"];
    header.extend(mushra_core::analysis::Tabular::header(stats.as_slice()).into_iter().skip(1));
    header.push("bin");
    let rows = mushra_core::analysis::Tabular::rows(stats.as_slice())
        .into_iter()
        .zip(&stats)
        .map(|(mut row, s)| {
            row.push(bin_of(s.mean).map(|b| b.label().to_string()).unwrap_or_default());
            row
        })
        .collect();
    ctx.emit(&Table::new(&header, rows))
}

fn screen_records(records: Vec<RatingRecord>) -> Result<Vec<RatingRecord>, CliError> {
    let report = screen(&records, ScreeningConfig::standard())?;
    log::info!(
        "screening retained {} of {} raters",
        report.retained.len(),
        report.raters.len()
    );
    let kept: Vec<RatingRecord> = records
        .into_iter()
        .filter(|r| report.retained.contains(&r.rater_id))
        .collect();
    if kept.is_empty() {
        return Err(CliError::Validation("screening rejected every rater".into()));
    }
    Ok(kept)
}

fn screen_cmd(
    ctx: &mut Ctx,
    data: &DatasetArgs,
    filters: &Filters,
    lambda: Option<&str>,
    threshold: f64,
    fraction: f64,
) -> Result<(), CliError> {
    let records = load(ctx, data, filters)?;
    if let Some(spec) = lambda {
        let lambdas = parse_lambdas(spec)?;
        let sweep = lambda_sweep(&records, &lambdas, ctx.exec)?;
        let (header, rows) = sweep_table(&sweep);
        return ctx.emit(&Table::new(&header, rows));
    }
    let config = ScreeningConfig {
        threshold,
        fraction,
        comparison: Comparison::StrictlyBelow,
    };
    let report = screen(&records, config)?;
    let rows = report
        .raters
        .iter()
        .map(|r| {
            vec![
                r.rater_id.clone(),
                r.items.to_string(),
                r.violations.to_string(),
                r.violation_fraction.map(|f| f.to_string()).unwrap_or_default(),
                serde_json::to_value(r.verdict)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            ]
        })
        .collect();
    log::info!(
        "retained {} of {} raters",
        report.retained.len(),
        report.raters.len()
    );
    ctx.emit(&Table::new(
        &["rater_id", "items", "violations", "violation_fraction", "verdict"],
        rows,
    ))
}

/// `0,10,20` or `start:stop:step` (inclusive).
pub fn parse_lambdas(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad --lambda {spec:?}; use 0,10,20 or 0:100:10"));
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [list] => list.split(',').map(|s| num(s).ok_or_else(bad)).collect(),
        [a, b, step] => {
            let (a, b, step) = (num(a).ok_or_else(bad)?, num(b).ok_or_else(bad)?, num(step).ok_or_else(bad)?);
            if step <= 0.0 || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

/// A comma list of positive counts; `all` means `total`. Empty gives the
/// default axis.
pub fn parse_axis(spec: &str, total: usize) -> Result<Vec<usize>, CliError> {
    if spec.trim().is_empty() {
        return Ok(default_axis(total));
    }
    let mut axis = spec
        .split(',')
        .map(|s| match s.trim() {
            "all" => Ok(total),
            s => s
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| CliError::Usage(format!("bad grid value {s:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    axis.sort_unstable();
    axis.dedup();
    Ok(axis)
}

/// `K_AXIS:M_AXIS`; either side may be empty for the default axis.
pub fn parse_grid(spec: Option<&str>, listeners: usize, utterances: usize) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    let spec = spec.unwrap_or(":");
    let (k, m) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("bad --grid {spec:?}; use K_AXIS:M_AXIS")))?;
    Ok((parse_axis(k, listeners)?, parse_axis(m, utterances)?))
}

fn sensitivity_cmd(
    ctx: &mut Ctx,
    data: &DatasetArgs,
    filters: &Filters,
    grid: Option<&str>,
    trials: usize,
    screened: bool,
) -> Result<(), CliError> {
    let mut records = load(ctx, data, filters)?;
    if screened {
        records = screen_records(records)?;
    }
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let systems = (!filters.systems.is_empty()).then(|| filters.systems.clone());
    let cube = RatingCube::from_records(&records, systems.as_deref());
    let (ks, ms) = parse_grid(grid, cube.raters.len(), cube.utterances.len())?;
    let config = SensitivityConfig {
        trials,
        seed: ctx.seed,
        systems,
        exec: ctx.exec,
    };
    let result = sensitivity_grid(&records, &ks, &ms, &config)?;
    ctx.emit(&Table::from_tabular(&result))
}

fn correlate_cmd(ctx: &mut Ctx, path: &Path, x: &str, y: &str, method: CorrelationMethod) -> Result<(), CliError> {
    ctx.input(path)?;
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(mushra_core::Error::from)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Validation(format!("unknown column {name:?}")))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(mushra_core::Error::from)?;
        let parse = |idx: usize, name: &str| {
            row.get(idx)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Validation(format!("line {}: {name} is not a number", i + 2)))
        };
        xs.push(parse(ix, x)?);
        ys.push(parse(iy, y)?);
    }
    let result = match method {
        CorrelationMethod::Pearson => pearson(&xs, &ys)?,
        CorrelationMethod::Spearman => spearman(&xs, &ys)?,
    };
    let name = match method {
        CorrelationMethod::Pearson => "pearson",
        CorrelationMethod::Spearman => "spearman",
    };
    ctx.emit(&Table::new(
        &["x", "y", "method", "n", "value"],
        vec![vec![
            x.to_string(),
            y.to_string(),
            name.to_string(),
            result.n.to_string(),
            result.value.to_string(),
        ]],
    ))
}

/// Rows of a `.jsonl` or `.csv` file.
fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase();
    match ext.as_str() {
        "csv" => csv::Reader::from_reader(file)
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| CliError::Validation(format!("{}: line {}: {e}", path.display(), i + 2))))
            .collect(),
        "jsonl" | "ndjson" | "json" => BufReader::new(file)
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|(i, line)| {
                let line = line.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&line)
                    .map_err(|e| CliError::Validation(format!("{}: line {}: {e}", path.display(), i + 1)))
            })
            .collect(),
        _ => Err(CliError::Validation(format!(
            "{}: expected a .csv or .jsonl file",
            path.display()
        ))),
    }
}

fn anchor_cmd(ctx: &mut Ctx, input: &Path, output: &Path) -> Result<(), CliError> {
    ctx.input(input)?;
    let (clip, format) = read_wav(input)?;
    let anchor = make_anchor_x(&clip)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    write_wav(output, &anchor, format)?;
    ctx.report.add_output(output);
    println!(
        "{}: {} samples at {} Hz",
        output.display(),
        anchor.samples.len(),
        anchor.sample_rate
    );
    ctx.finish(Some(output))
}

/// Locates every (system, utterance) pair as `system/utterance.wav`.
struct DryRunCatalog;

impl AudioCatalog for DryRunCatalog {
    fn locate(&self, system: &str, utterance: &str) -> Option<String> {
        Some(format!("{system}/{utterance}.wav"))
    }
}

#[derive(Serialize)]
struct AssembledPages<'a> {
    plan: &'a TestPlan,
    seed: u64,
    raters: usize,
    pages: Vec<Vec<mushra_core::protocol::PageSpec>>,
}

fn assemble_cmd(ctx: &mut Ctx, plan_path: &Path, raters: usize, audio_root: Option<&Path>) -> Result<(), CliError> {
    ctx.input(plan_path)?;
    let text = std::fs::read_to_string(plan_path).map_err(|e| CliError::Io(format!("{}: {e}", plan_path.display())))?;
    let plan = TestPlan::from_json(&text)?;
    if raters == 0 {
        return Err(CliError::Usage("--raters must be at least 1".into()));
    }
    let pages = match audio_root {
        Some(root) => assemble_campaign(&plan, &DirCatalog::new(root), ctx.seed, raters, ctx.exec)?,
        None => assemble_campaign(&plan, &DryRunCatalog, ctx.seed, raters, ctx.exec)?,
    };
    let doc = AssembledPages {
        plan: &plan,
        seed: ctx.seed,
        raters,
        pages,
    };
    ctx.emit_json(&doc)
}

fn serve_cmd(config: Option<&Path>) -> Result<(), CliError> {
    let config = mushra_server::Config::load(config)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(format!("starting runtime: {e}")))?;
    runtime.block_on(mushra_server::serve(config))?;
    Ok(())
}
