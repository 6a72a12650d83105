use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};

use auso_core::constructions::{
    load_cached, write_cache, Construction, ConstructionError, ConstructionLevel, LevelCache,
};
use auso_core::frames::{FrameError, FrameLibrary};
use auso_core::pivot::{
    run_to_sink, JohnsonState, PivotError, PivotRule, RuleState, RunOptions, SnapshotMode,
};
use auso_core::verify::{
    check_acyclic, check_growth, check_trace_properties, check_uso_exhaustive, check_uso_sampled,
    growth_rows, LevelLength, UsoMode, VerificationReport, VerifyError, DEFAULT_ACYCLIC_CAP,
    DEFAULT_USO_CAP,
};
use auso_core::Family;

use crate::manifest::{ExperimentManifest, LevelRange};
use crate::{BuildArgs, Format, Mode, ReportArgs, RunArgs, UsoCheck, VerifyArgs};

pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_LIMIT: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn violation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VIOLATION,
            message: message.into(),
        }
    }
}

impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        let code = match e {
            FrameError::Invalid(_) => EXIT_VIOLATION,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PivotError> for CliError {
    fn from(e: PivotError) -> Self {
        let code = match e {
            PivotError::StepLimitExceeded { .. } => EXIT_LIMIT,
            _ => EXIT_VIOLATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::Frames(f) => f.into(),
            ConstructionError::Pivot(p) => p.into(),
            ConstructionError::Io { .. } => CliError::usage(e.to_string()),
            other => CliError::violation(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        let code = match e {
            VerifyError::CapExceeded { .. } => EXIT_LIMIT,
            VerifyError::BadParameters(_) => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

pub const DEFAULT_CACHE_DIR: &str = "auso-cache";

pub struct Context {
    pub frames_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Context {
    fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
    }

    fn library(&self, family: Family) -> Result<FrameLibrary, CliError> {
        library(self.frames_dir.as_deref(), family)
    }

    /// Levels `0..=level`, from caches when all are present.
    fn construction(&self, family: Family, level: usize) -> Result<Construction, CliError> {
        let lib = self.library(family)?;
        let dir = self.cache_dir();
        if let Some(c) = load_cached(&dir, &lib, level)? {
            info!("loaded {family} levels 0..={level} from {}", dir.display());
            return Ok(c);
        }
        warn!(
            "no complete cache for {family} level {level} in {}; building in memory",
            dir.display()
        );
        let mut c = Construction::new(lib)?;
        c.realize_up_to(level)?;
        Ok(c)
    }
}

fn library(dir: Option<&Path>, family: Family) -> Result<FrameLibrary, CliError> {
    Ok(match dir {
        Some(d) => FrameLibrary::from_dir(d, family)?,
        None => FrameLibrary::embedded(family),
    })
}

pub fn build(ctx: &Context, args: BuildArgs) -> Result<(), CliError> {
    let manifest = args
        .manifest
        .as_deref()
        .map(ExperimentManifest::load)
        .transpose()
        .map_err(CliError::usage)?;
    let family = args
        .family
        .or(manifest.as_ref().map(|m| m.family))
        .ok_or_else(|| CliError::usage("--family is required"))?;
    let range = args
        .levels
        .or(manifest.as_ref().map(|m| m.levels))
        .ok_or_else(|| CliError::usage("--levels is required"))?;
    let frames_dir = ctx
        .frames_dir
        .clone()
        .or_else(|| manifest.as_ref().and_then(|m| m.frames_dir.clone()));
    let cache_dir = ctx
        .cache_dir
        .clone()
        .or_else(|| manifest.as_ref().and_then(|m| m.cache_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));

    let lib = library(frames_dir.as_deref(), family)?;
    let mut c = Construction::new(lib)?;
    let mut lengths = Vec::new();
    for i in 0..=range.last {
        c.realize_up_to(i)?;
        let level = c.level(i).expect("realized");
        let cache = LevelCache::from_level(level, c.library());
        let written = write_cache(&cache_dir, &cache)?;
        lengths.push(length_of(level));
        if i >= range.first {
            println!(
                "{family} level {i}: n = {}, |P| = {}, {}",
                level.dim(),
                level.path_length,
                if written { "written" } else { "unchanged" }
            );
        }
    }
    if let Some(plan) = manifest.as_ref().and_then(|m| m.verify.clone()) {
        let seeds = if plan.seeds.is_empty() { vec![0] } else { plan.seeds };
        let mut failed = false;
        for i in range.levels() {
            let level = c.level(i).expect("built above");
            for &seed in &seeds {
                let r = check_uso_sampled(level.oracle.as_ref(), plan.samples, plan.max_face_dim, seed)?;
                println!(
                    "{family} level {i}: sampled USO seed {seed}: {}",
                    if r.passed() { "pass" } else { "FAIL" }
                );
                failed |= !r.passed();
            }
        }
        if failed {
            return Err(CliError::violation("sampled verification failed"));
        }
    }
    if let Some(path) = manifest.as_ref().and_then(|m| m.report.clone()) {
        let rows = &lengths[range.first..=range.last];
        fs::write(&path, growth_csv(rows, family)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn length_of(level: &ConstructionLevel) -> LevelLength {
    LevelLength {
        level: level.level,
        dim: level.dim(),
        length: level.path_length,
    }
}

pub fn run(ctx: &Context, args: RunArgs) -> Result<(), CliError> {
    let c = ctx.construction(args.family, args.level)?;
    let level = c.level(args.level).expect("constructed");
    let mut rule = level.rule();
    if args.raw_snapshots {
        if let RuleState::Johnson(_) = rule {
            rule = RuleState::Johnson(JohnsonState::new(level.dim(), 4).with_mode(SnapshotMode::Raw));
        }
    }
    let opts = RunOptions {
        step_limit: args.step_limit,
        ..RunOptions::default()
    };
    let trace = run_to_sink(level.oracle.as_ref(), level.start, &mut rule, opts)?;
    let b = args.family.bundle_size();
    match args.trace.as_deref() {
        Some(p) if p == Path::new("-") => {
            trace
                .write_jsonl(io::stdout().lock(), b)
                .map_err(|e| io_err(p, e))?;
        }
        Some(p) => {
            let f = File::create(p).map_err(|e| io_err(p, e))?;
            let mut w = BufWriter::new(f);
            trace.write_jsonl(&mut w, b).map_err(|e| io_err(p, e))?;
            w.flush().map_err(|e| io_err(p, e))?;
        }
        None => {}
    }
    let summary = serde_json::json!({
        "family": args.family,
        "level": args.level,
        "n": level.dim(),
        "length": trace.len(),
        "sink": trace.end.to_bitstring(level.dim()),
        "final_history": rule.history().to_json(b),
    });
    if args.trace.as_deref() == Some(Path::new("-")) {
        eprintln!("{summary}");
    } else {
        println!("{summary}");
    }
    if trace.len() != level.path_length {
        return Err(CliError::violation(format!(
            "replay length {} differs from the built length {}",
            trace.len(),
            level.path_length
        )));
    }
    Ok(())
}

pub fn verify(ctx: &Context, args: VerifyArgs) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let report = pool.install(|| -> Result<VerificationReport, CliError> {
        if args.all_frames {
            let dir = ctx
                .frames_dir
                .as_deref()
                .ok_or_else(|| CliError::usage("--all-frames needs --frames-dir or AUSO_FRAMES_DIR"))?;
            let mut report = VerificationReport::new("frames");
            for family in Family::ALL {
                report.merge(FrameLibrary::from_dir(dir, family)?.validate());
            }
            return Ok(report);
        }
        let family = args.family.expect("clap requires family");
        let i = args.level.expect("clap requires level");
        let c = ctx.construction(family, i)?;
        let level = c.level(i).expect("constructed");
        let oracle = level.oracle.as_ref();
        let mut report = VerificationReport::new(format!("{family} level {i}"));
        match args.mode {
            Mode::Exhaustive => {
                let mode = match args.uso_check {
                    UsoCheck::GroundTruth => UsoMode::GroundTruth,
                    UsoCheck::Pairwise => UsoMode::Pairwise,
                };
                report.merge(check_uso_exhaustive(oracle, mode, DEFAULT_USO_CAP)?);
                report.merge(check_acyclic(oracle, DEFAULT_ACYCLIC_CAP)?);
            }
            Mode::Sampled => {
                report.merge(check_uso_sampled(oracle, args.samples, args.max_face_dim, args.seed)?);
            }
        }
        let mut rule = level.rule();
        let trace = run_to_sink(oracle, level.start, &mut rule, RunOptions::default())?;
        report.merge(check_trace_properties(level, &trace));
        Ok(report)
    })?;
    for check in &report.checks {
        println!(
            "{} {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
        if let Some(w) = &check.witness {
            println!("     witness: {}", serde_json::to_string(w).expect("witness serializes"));
        }
    }
    println!("{} checks in {} ms", report.checks.len(), report.elapsed_ms);
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(path, text + "\n").map_err(|e| io_err(path, e))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::violation(format!(
            "{} failed checks",
            report.failures().count()
        )))
    }
}

fn growth_csv(rows: &[LevelLength], family: Family) -> String {
    let mut out = String::from("level,n,length,bound,ratio,flagged\n");
    for r in growth_rows(rows, family) {
        let ratio = r.ratio.map(|x| format!("{x:.4}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.level, r.n, r.length, r.bound, ratio, r.flagged
        ));
    }
    out
}

pub fn report(ctx: &Context, args: ReportArgs) -> Result<(), CliError> {
    let LevelRange { first, last } = args.levels;
    let c = ctx.construction(args.family, last)?;
    let lengths: Vec<LevelLength> = (first..=last)
        .map(|i| length_of(c.level(i).expect("constructed")))
        .collect();
    match args.format {
        Format::Csv => print!("{}", growth_csv(&lengths, args.family)),
        Format::Json => {
            let rows = growth_rows(&lengths, args.family);
            println!(
                "{}",
                serde_json::to_string_pretty(&rows).expect("rows serialize")
            );
        }
    }
    let growth = check_growth(&lengths, args.family);
    if growth.passed() {
        Ok(())
    } else {
        Err(CliError::violation("growth bound or recursion violated"))
    }
}
