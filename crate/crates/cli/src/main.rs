//! Command-line driver: extract presence conditions, weigh them with a code
//! metric, and generate configurations by exact MaxSAT, greedy covering,
//! variant swapping, fuzzing, or covering arrays.

mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use maxconf_core::cit;
use maxconf_core::config::{parse_config, to_config_json, to_config_text};
use maxconf_core::extract::{self, PcMap};
use maxconf_core::formula::Assignment;
use maxconf_core::fuzz::{self, Bits, FuzzKind, FuzzParams};
use maxconf_core::generate;
use maxconf_core::manifest::Manifest;
use maxconf_core::metrics::{self, ccu, score_assignment};
use maxconf_core::oracle;
use maxconf_core::solver::SoftConstraint;

use util::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "maxconf",
    version,
    about = "Presence-condition extraction and metric-guided configuration generation",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan preprocessor-conditional sources into a PC manifest
    Extract(ExtractArgs),
    /// Report PC and code-unit coverage of configurations
    Report(ReportArgs),
    /// Generate the single maximal configuration (exact MaxSAT)
    Max(MaxArgs),
    /// Generate a greedy cover reaching 100% nonzero-weight coverage
    Maxi(MaxiArgs),
    /// Generate one-swap variants of the greedy cover
    Maxv(MaxvArgs),
    /// Score-guided configuration fuzzing (cvf, pcf, spcf)
    Fuzz(FuzzArgs),
    /// Covering-array generation and scoring
    #[command(subcommand)]
    Cit(CitCommand),
    /// Cross-check results against brute-force references (small inputs)
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Args)]
struct ExtractArgs {
    /// Source files or directories (.c/.h files are scanned)
    #[arg(required = true)]
    sources: Vec<PathBuf>,
    /// Feature-model file: one formula per line, conjoined
    #[arg(long)]
    feature_model: Option<PathBuf>,
    /// Manifest destination; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Configuration files (.config text or JSON object)
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Warn about unknown variables instead of failing
    #[arg(long)]
    lenient: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FuzzTypeArg {
    Cvf,
    Pcf,
    Spcf,
}

#[derive(Args)]
struct MetricArgs {
    /// Code metric: lcu | absolute | free:K | costs:FILE
    #[arg(long, default_value = "lcu")]
    metric: String,
    /// Root for re-reading sources named in the manifest (free:K metric)
    #[arg(long, default_value = ".")]
    source_root: PathBuf,
}

#[derive(Args)]
struct MaxArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Directory for max.config / max.json
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also export the MaxSAT instance in DIMACS WCNF
    #[arg(long)]
    export_wcnf: Option<PathBuf>,
}

#[derive(Args)]
struct MaxiArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Directory for cover-NN.config / cover.json
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MaxvArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Directory for variant-NN.config / variants.json
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for the variant satisfiability checks
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Search-space encoding
    #[arg(long = "type", value_enum)]
    fuzz_type: FuzzTypeArg,
    /// Mutation cycles; defaults to 25 (pcf/spcf) or 5 (cvf)
    #[arg(long)]
    cycles: Option<u32>,
    /// Number of top configurations to report
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Seed bit-string file (repeatable); all-false when omitted
    #[arg(long)]
    seed_config: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// AFL-style deterministic stage: window lengths {1,2,4} at every offset
    #[arg(long)]
    afl_windows: bool,
    /// Score lcu as the count of distinct enabled conditions
    #[arg(long)]
    lcu_count_unique: bool,
    /// Leave unselected conditions unconstrained instead of negating them
    #[arg(long)]
    pcf_unconstrained: bool,
    /// Output-queue capacity (minimum-score entries evicted)
    #[arg(long, default_value_t = fuzz::DEFAULT_QUEUE_CAP)]
    queue_cap: usize,
    /// Results JSON destination; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CitCommand {
    /// Generate a t-way covering array over the manifest's variables
    Generate(CitGenerateArgs),
    /// Score an imported covering array row by row
    Score(CitScoreArgs),
}

#[derive(Args)]
struct CitGenerateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Interaction strength
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=3))]
    t: u32,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// CSV destination; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CitScoreArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Covering-array CSV (header of variable names, rows of 0/1)
    #[arg(long)]
    array: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    lcu_count_unique: bool,
    /// Results JSON destination; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Compare the MaxSAT optimum with exhaustive enumeration
    Maxsat(VerifyCommonArgs),
    /// Compare the greedy cover size with the exact minimum
    Cover(VerifyCommonArgs),
    /// Compare the scanner against the reference directive walker
    Walk(VerifyWalkArgs),
}

#[derive(Args)]
struct VerifyCommonArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
}

#[derive(Args)]
struct VerifyWalkArgs {
    /// Source file to re-scan with both attributors
    source: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Report(args) => cmd_report(args),
        Command::Max(args) => cmd_max(args),
        Command::Maxi(args) => cmd_maxi(args),
        Command::Maxv(args) => cmd_maxv(args),
        Command::Fuzz(args) => cmd_fuzz(args),
        Command::Cit(CitCommand::Generate(args)) => cmd_cit_generate(args),
        Command::Cit(CitCommand::Score(args)) => cmd_cit_score(args),
        Command::Verify(VerifyCommand::Maxsat(args)) => cmd_verify_maxsat(args),
        Command::Verify(VerifyCommand::Cover(args)) => cmd_verify_cover(args),
        Command::Verify(VerifyCommand::Walk(args)) => cmd_verify_walk(args),
    }
}

fn cmd_extract(args: ExtractArgs) -> CliResult<()> {
    let files = util::collect_sources(&args.sources)?;
    if files.is_empty() {
        eprintln!("warning: no source files found");
    }
    let mut vars = maxconf_core::formula::VarTable::new();
    let mut instances = Vec::new();
    for file in &files {
        instances.extend(extract::scan_file(file, &mut vars).map_err(util::extract_error)?);
    }
    let feature_model = match &args.feature_model {
        Some(path) => extract::load_feature_model(path, &mut vars).map_err(util::extract_error)?,
        None => maxconf_core::formula::PropFormula::True,
    };
    let map = extract::build_pcmap(instances, feature_model, vars);
    let manifest = Manifest::from_pcmap(&map);
    let json = manifest.to_json();
    match &args.output {
        Some(path) => util::write_file(path, &json)?,
        None => print!("{json}"),
    }
    let summary = format!(
        "entries: {}, units: {}, vars: {}",
        map.entries.len(),
        map.total_units(),
        map.vars.len()
    );
    if args.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    if map.entries.is_empty() {
        eprintln!("warning: manifest has no configurable entries");
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let mut all_confs = Vec::new();
    for path in &args.configs {
        let text = util::read_file(path)?;
        let (conf, warnings) = parse_config(&text, &map.vars, args.lenient)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for w in warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        let enabled = extract::enabled_entries(&map, &conf);
        let total_entries = map.entries.len();
        let pc_pct = if total_entries == 0 {
            0.0
        } else {
            100.0 * enabled.len() as f64 / total_entries as f64
        };
        let unit_cov = ccu(&map, std::slice::from_ref(&conf)).map_err(util::metrics_error)?;
        println!(
            "{}: pc-coverage {}/{} ({:.2}%), ccu {}/{} ({:.2}%)",
            path.display(),
            enabled.len(),
            total_entries,
            pc_pct,
            unit_cov.covered,
            unit_cov.total,
            unit_cov.percent()
        );
        all_confs.push(conf);
    }
    if all_confs.len() > 1 {
        let cumulative = ccu(&map, &all_confs).map_err(util::metrics_error)?;
        println!(
            "cumulative ccu: {}/{} ({:.2}%)",
            cumulative.covered,
            cumulative.total,
            cumulative.percent()
        );
    }
    Ok(())
}

fn gen_result_json(map: &PcMap, result: &generate::GenResult) -> serde_json::Value {
    serde_json::json!({
        "config": to_config_json(&result.configuration, &map.vars),
        "score": result.score,
        "enabled": result.enabled.iter().copied().collect::<Vec<_>>(),
        "unsatisfied": result.unsatisfied.iter().copied().collect::<Vec<_>>(),
    })
}

fn cmd_max(args: MaxArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let cost = util::resolve_metric(&args.metric, &map)?;
    if let Some(path) = &args.export_wcnf {
        let weights = metrics::weigh(&map, &cost).weights;
        let soft: Vec<SoftConstraint> = map
            .entries
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0)
            .map(|(e, &w)| SoftConstraint {
                formula: e.pc.clone(),
                weight: w,
            })
            .collect();
        let mut buf = Vec::new();
        maxconf_core::solver::export_wcnf(
            std::slice::from_ref(&map.feature_model),
            &soft,
            &map.vars,
            &mut buf,
        )
        .map_err(|e| CliError::Input(format!("cannot encode wcnf: {e}")))?;
        util::write_file(path, &String::from_utf8(buf).expect("wcnf is utf-8"))?;
    }
    let result = generate::maximal(&map, &cost).map_err(util::gen_error)?;
    println!(
        "score: {} (enabled {}/{} weighted entries)",
        result.score,
        result.enabled.len(),
        result.enabled.len() + result.unsatisfied.len()
    );
    println!(
        "configuration: {}",
        util::enabled_names_line(&result.configuration, &map.vars)
    );
    if let Some(dir) = &args.out_dir {
        util::ensure_dir(dir)?;
        util::write_file(
            &dir.join("max.config"),
            &to_config_text(&result.configuration, &map.vars),
        )?;
        util::write_json(&dir.join("max.json"), &gen_result_json(&map, &result))?;
    }
    Ok(())
}

fn cmd_maxi(args: MaxiArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let cost = util::resolve_metric(&args.metric, &map)?;
    let cover = generate::maximal_iterative(&map, &cost).map_err(util::gen_error)?;
    for (i, config) in cover.configs.iter().enumerate() {
        println!(
            "config {}: score {}, newly-enabled {}, remaining {}",
            i + 1,
            config.score,
            config.enabled.len(),
            config.unsatisfied.len()
        );
    }
    let confs: Vec<Assignment> = cover
        .configs
        .iter()
        .map(|c| c.configuration.clone())
        .collect();
    match ccu(&map, &confs) {
        Ok(report) => println!(
            "cover: {} configs, cumulative ccu {}/{} ({:.2}%)",
            cover.configs.len(),
            report.covered,
            report.total,
            report.percent()
        ),
        Err(_) => println!(
            "cover: {} configs (no configurable units)",
            cover.configs.len()
        ),
    }
    if let Some(dir) = &args.out_dir {
        util::ensure_dir(dir)?;
        for (i, config) in cover.configs.iter().enumerate() {
            util::write_file(
                &dir.join(format!("cover-{:02}.config", i + 1)),
                &to_config_text(&config.configuration, &map.vars),
            )?;
        }
        let mut summary = generate::cover_summary(&cover);
        summary["configs"] = serde_json::Value::Array(
            cover
                .configs
                .iter()
                .map(|c| gen_result_json(&map, c))
                .collect(),
        );
        util::write_json(&dir.join("cover.json"), &summary)?;
    }
    Ok(())
}

fn cmd_maxv(args: MaxvArgs) -> CliResult<()> {
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let map = util::load_manifest(&args.manifest)?;
    let cost = util::resolve_metric(&args.metric, &map)?;
    let cover = generate::maximal_iterative(&map, &cost).map_err(util::gen_error)?;
    let variants = generate::maximal_variants(&map, &cover, args.jobs);
    println!(
        "cover of {} configs yields {} satisfiable variants",
        cover.configs.len(),
        variants.len()
    );
    for (i, variant) in variants.iter().enumerate() {
        let pcs: Vec<String> = variant
            .entries
            .iter()
            .map(|&e| map.entries[e].pc.print(&map.vars))
            .collect();
        println!("variant {}: {{{}}}", i + 1, pcs.join(", "));
    }
    if let Some(dir) = &args.out_dir {
        util::ensure_dir(dir)?;
        let mut rows = Vec::new();
        for (i, variant) in variants.iter().enumerate() {
            util::write_file(
                &dir.join(format!("variant-{:02}.config", i + 1)),
                &to_config_text(&variant.witness, &map.vars),
            )?;
            rows.push(serde_json::json!({
                "entries": variant.entries,
                "pcs": variant.entries.iter().map(|&e| map.entries[e].pc.print(&map.vars)).collect::<Vec<_>>(),
                "witness": to_config_json(&variant.witness, &map.vars),
                "score": score_assignment(&map, &variant.witness, &cost, false),
            }));
        }
        util::write_json(&dir.join("variants.json"), &serde_json::Value::Array(rows))?;
    }
    Ok(())
}

fn cmd_fuzz(args: FuzzArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let cost = util::resolve_metric(&args.metric, &map)?;
    let kind = match args.fuzz_type {
        FuzzTypeArg::Cvf => FuzzKind::ConfVar,
        FuzzTypeArg::Pcf => FuzzKind::PresCond,
        FuzzTypeArg::Spcf => FuzzKind::Selective,
    };
    let mut params = FuzzParams::new(kind);
    if let Some(cycles) = args.cycles {
        params.cycles = cycles;
    }
    params.top = args.top;
    params.rng_seed = args.rng_seed;
    params.afl_windows = args.afl_windows;
    params.lcu_count_unique = args.lcu_count_unique;
    params.negate_unselected = !args.pcf_unconstrained;
    params.queue_cap = args.queue_cap;

    let bit_len = fuzz::Fuzzer::new(&map, &cost, params.clone()).bit_len();
    let seeds: Vec<Bits> = if args.seed_config.is_empty() {
        vec![Bits::zeros(bit_len)]
    } else {
        let mut seeds = Vec::new();
        for path in &args.seed_config {
            seeds.push(util::load_seed(path, kind, &map)?);
        }
        seeds
    };

    let report =
        fuzz::fuzz(&map, &cost, &seeds, params).map_err(|e| CliError::Input(e.to_string()))?;
    println!(
        "checked {} candidates, {} feasible; reporting top {}",
        report.candidates_checked,
        report.feasible,
        report.results.len()
    );
    for (i, result) in report.results.iter().enumerate() {
        println!(
            "#{}: score {} at step {} ({})",
            i + 1,
            result.score,
            result.step,
            util::enabled_names_line(&result.configuration, &map.vars)
        );
    }
    let rows: Vec<serde_json::Value> = report
        .results
        .iter()
        .map(|r| {
            serde_json::json!({
                "config": to_config_json(&r.configuration, &map.vars),
                "score": r.score,
                "step": r.step,
            })
        })
        .collect();
    let doc = serde_json::Value::Array(rows);
    match &args.output {
        Some(path) => util::write_json(path, &doc)?,
        None => println!("{}", serde_json::to_string_pretty(&doc).expect("json")),
    }
    Ok(())
}

fn cmd_cit_generate(args: CitGenerateArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let array = cit::generate_array(&map.vars, args.t, args.rng_seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let csv = cit::write_array_csv(&array, &map.vars);
    eprintln!(
        "generated {}-way array: {} rows over {} variables",
        args.t,
        array.rows.len(),
        map.vars.len()
    );
    match &args.output {
        Some(path) => util::write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_cit_score(args: CitScoreArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let cost = util::resolve_metric(&args.metric, &map)?;
    let text = util::read_file(&args.array)?;
    let array = cit::import_array(&text, &map.vars)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.array.display())))?;
    let score = cit::score_array(&array, &map, &cost, args.lcu_count_unique);
    println!(
        "best score {} first reached at step {} of {}; {} rows violate the feature model",
        score.best_score,
        score.best_step,
        array.rows.len(),
        score.fm_violations
    );
    let doc = serde_json::json!({
        "rows": score
            .rows
            .iter()
            .map(|(step, s)| serde_json::json!({
                "step": step,
                "score": s,
                "config": to_config_json(&array.rows[step - 1], &map.vars),
            }))
            .collect::<Vec<_>>(),
        "best_score": score.best_score,
        "best_step": score.best_step,
        "fm_violations": score.fm_violations,
    });
    match &args.output {
        Some(path) => util::write_json(path, &doc)?,
        None => println!("{}", serde_json::to_string_pretty(&doc).expect("json")),
    }
    Ok(())
}

fn cmd_verify_maxsat(args: VerifyCommonArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let cost = util::resolve_metric(&args.metric, &map)?;
    let weights = metrics::weigh(&map, &cost).weights;
    let soft: Vec<SoftConstraint> = map
        .entries
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0)
        .map(|(e, &w)| SoftConstraint {
            formula: e.pc.clone(),
            weight: w,
        })
        .collect();
    let hard = [map.feature_model.clone()];
    let solved = maxconf_core::solver::max_sat(&hard, &soft, map.vars.len())
        .map_err(|e| CliError::Infeasible(e.to_string()))?;
    let (oracle_weight, optima) =
        oracle::brute_maxsat(&hard, &soft, map.vars.len()).map_err(util::oracle_error)?;
    println!(
        "solver optimum {} | exhaustive optimum {} ({} optimal assignments)",
        solved.total_weight,
        oracle_weight,
        optima.len()
    );
    if solved.total_weight == oracle_weight {
        println!("agreement: yes");
        Ok(())
    } else {
        Err(CliError::Internal(
            "solver and exhaustive optimum disagree".into(),
        ))
    }
}

fn cmd_verify_cover(args: VerifyCommonArgs) -> CliResult<()> {
    let map = util::load_manifest(&args.manifest)?;
    let cost = util::resolve_metric(&args.metric, &map)?;
    let cover = generate::maximal_iterative(&map, &cost).map_err(util::gen_error)?;
    let optimum = oracle::brute_min_cover(&map, &cost).map_err(util::oracle_error)?;
    println!(
        "greedy cover size {} | exact minimum {}",
        cover.configs.len(),
        optimum
    );
    if cover.configs.len() >= optimum {
        println!("greedy is feasible and within its approximation guarantee");
        Ok(())
    } else {
        Err(CliError::Internal(
            "greedy cover is smaller than the exact minimum".into(),
        ))
    }
}

fn cmd_verify_walk(args: VerifyWalkArgs) -> CliResult<()> {
    let text = util::read_file(&args.source)?;
    let label = args.source.display().to_string();
    let mut vars = maxconf_core::formula::VarTable::new();
    let instances = extract::scan_str(&text, &label, &mut vars).map_err(util::extract_error)?;
    let walked =
        oracle::reference_pc_walk_with(&text, &label, &mut vars).map_err(util::extract_error)?;

    let mut scanned = std::collections::BTreeMap::new();
    for instance in &instances {
        for &line in &instance.unit.lines {
            scanned.insert(line, instance.pc.clone());
        }
    }
    let mut disagreements = 0;
    for (line, walk_pc) in &walked {
        let scan_pc = scanned
            .get(line)
            .cloned()
            .unwrap_or(maxconf_core::formula::PropFormula::True);
        if !maxconf_core::formula::semantically_equal(&scan_pc, walk_pc, vars.len()) {
            disagreements += 1;
            println!(
                "line {line}: scanner {} != walker {}",
                scan_pc.print(&vars),
                walk_pc.print(&vars)
            );
        }
    }
    println!(
        "{} lines compared, {} disagreements",
        walked.len(),
        disagreements
    );
    if disagreements == 0 {
        Ok(())
    } else {
        Err(CliError::Internal(
            "scanner disagrees with the reference walker".into(),
        ))
    }
}
