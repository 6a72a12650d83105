//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use auso_core::constructions::{Construction, LevelCache};
use auso_core::cube::{Direction, Oracle, Vertex};
use auso_core::frames::{shipped_frames_dir, Family, FrameLibrary, LoadedFrame};
use auso_core::pivot::{
    run_to_sink, CunninghamState, JohnsonState, RunOptions, Snapshot, SnapshotMode,
    SnapshotPolicy, ZadehState,
};
use auso_core::verify::{
    check_acyclic, check_growth, check_trace_properties, check_uso_exhaustive, check_uso_sampled,
    LevelLength, UsoMode, VerificationReport,
};

type Outcome = Result<String, String>;

const TOP: [(Family, usize); 3] = [(Family::Cunningham, 5), (Family::Johnson, 5), (Family::Zadeh, 3)];
const SAMPLE_SEED: u64 = 20_240_601;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn failures(r: &VerificationReport) -> String {
    r.failures()
        .map(|c| format!("{}: {} {:?}", c.name, c.detail, c.witness))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Johnson's rule on F1 from the empty vertex: seven pinned rows of vertex, direction and history.
fn criterion_1() -> Outcome {
    let lib = FrameLibrary::embedded(Family::Johnson);
    let f1 = lib.get("F1").map_err(|e| e.to_string())?;
    // (label, direction, h(+1..+4), h(-1..-4)) per row; row 7 is the sink.
    let table: [(&str, Option<i32>, [u64; 8]); 7] = [
        ("box1", Some(1), [1, 0, 0, 0, 1, 1, 1, 1]),
        ("box2", Some(2), [2, 2, 0, 0, 1, 2, 2, 2]),
        ("box3", Some(3), [3, 3, 3, 0, 1, 2, 3, 3]),
        ("box4", Some(4), [4, 4, 4, 4, 1, 2, 3, 4]),
        ("box5", Some(-3), [5, 5, 5, 5, 1, 2, 5, 4]),
        ("R", Some(-2), [6, 6, 5, 6, 1, 6, 6, 4]),
        ("H", None, [7, 6, 5, 7, 1, 7, 7, 4]),
    ];
    let mut rule = JohnsonState::new(4, 4);
    let start = Instant::now();
    let trace = run_to_sink(
        f1.oracle.as_ref(),
        Vertex::EMPTY,
        &mut rule,
        RunOptions::default().with_snapshots(SnapshotPolicy::On),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(trace.len() == 6, || format!("length {} != 6", trace.len()))?;
    let row_h = |h: &Snapshot| -> Vec<u64> {
        (0..4)
            .map(Direction::plus)
            .chain((0..4).map(Direction::minus))
            .map(|d| h.value(d).unwrap_or(u64::MAX))
            .collect()
    };
    for (k, (label, dir, h)) in table.iter().enumerate() {
        let want_v = f1.spec.label(label).map_err(|e| e.to_string())?;
        let (v, d, got_h) = if k < 6 {
            let s = &trace.steps[k];
            (s.vertex, Some(s.dir), row_h(s.history.as_ref().ok_or("missing snapshot")?))
        } else {
            (trace.end, None, row_h(trace.final_history.as_ref().ok_or("missing history")?))
        };
        ensure(v == want_v, || format!("row {}: vertex {} is not {label}", k + 1, v.to_bitstring(4)))?;
        let want_d = dir.map(|x| Direction::in_bundle(0, x, 4));
        ensure(d == want_d, || format!("row {}: direction {d:?} != {want_d:?}", k + 1))?;
        ensure(got_h == h, || format!("row {}: history {got_h:?} != {h:?}", k + 1))?;
    }
    ensure(elapsed < Duration::from_millis(1), || format!("run took {elapsed:?}"))?;
    Ok(format!("7 rows reproduced exactly in {elapsed:?}"))
}

/// Cunningham's rule on A_0 = F3 from {c^2} with L_0.
fn criterion_2() -> Outcome {
    let lib = FrameLibrary::embedded(Family::Cunningham);
    let f3 = lib.get("F3").map_err(|e| e.to_string())?;
    let list: Vec<Direction> = [1, -2, 3, -1, 4, -3, 2, -4]
        .iter()
        .map(|&x| Direction::in_bundle(0, x, 4))
        .collect();
    let mut rule = CunninghamState::new(list).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let trace = run_to_sink(f3.oracle.as_ref(), Vertex::from_coords([1]), &mut rule, RunOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let want: Vec<Direction> = [1, 3, -1, 4, 1]
        .iter()
        .map(|&x| Direction::in_bundle(0, x, 4))
        .collect();
    ensure(trace.directions() == want, || format!("directions {:?}", trace.directions()))?;
    ensure(f3.oracle.outmap(trace.end).is_empty(), || "did not end at the sink".into())?;
    ensure(elapsed < Duration::from_millis(1), || format!("run took {elapsed:?}"))?;
    Ok(format!("(+1, +3, -1, +4, +1), length 5, sink {} in {elapsed:?}", trace.end.to_bitstring(4)))
}

/// Zadeh's rule on A_0 with T_0: labels 1..21 in order, then the balances.
fn criterion_3() -> Outcome {
    let lib = FrameLibrary::embedded(Family::Zadeh);
    let a0 = lib.get("A0").map_err(|e| e.to_string())?;
    let tie: Vec<Direction> = [1, -2, 3, -1, 4, -3, 5, -4, 6, -5, 2, -6]
        .iter()
        .map(|&x| Direction::in_bundle(0, x, 6))
        .collect();
    let mut rule = ZadehState::new(tie).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let trace = run_to_sink(a0.oracle.as_ref(), Vertex::from_coords([1]), &mut rule, RunOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let visited = trace.vertices();
    ensure(visited.len() == 21, || format!("{} vertices visited", visited.len()))?;
    for (k, v) in visited.iter().enumerate() {
        let want = a0.spec.label(&format!("box{}", k + 1)).map_err(|e| e.to_string())?;
        ensure(*v == want, || format!("position {} is {}, not box{}", k + 1, v.to_bitstring(6), k + 1))?;
    }
    for d in Direction::all(6) {
        let want = u64::from(!d.is_positive() && d.coord >= 2);
        let got = rule.balance_of(d, None);
        ensure(got == want, || format!("b({}) = {got}, expected {want}", d.label(6)))?;
    }
    ensure(elapsed < Duration::from_millis(1), || format!("run took {elapsed:?}"))?;
    Ok(format!("boxes 1..21 in order, b(-3..-6) = 1, others 0, in {elapsed:?}"))
}

fn build_all() -> Result<Vec<Construction>, String> {
    TOP.iter()
        .map(|&(family, top)| {
            let mut c = Construction::new(FrameLibrary::embedded(family)).map_err(|e| e.to_string())?;
            c.realize_up_to(top).map_err(|e| format!("{family}: {e}"))?;
            Ok(c)
        })
        .collect()
}

fn criterion_4(built: &[Construction], build_time: Duration) -> Outcome {
    let base = [(Family::Cunningham, 5), (Family::Johnson, 6), (Family::Zadeh, 20)];
    let mut summary = Vec::new();
    for (c, (family, p0)) in built.iter().zip(base) {
        let lengths: Vec<LevelLength> = c
            .levels()
            .iter()
            .map(|l| LevelLength {
                level: l.level,
                dim: l.dim(),
                length: l.path_length,
            })
            .collect();
        ensure(lengths[0].length == p0, || format!("{family}: |P_0| = {} != {p0}", lengths[0].length))?;
        let r = check_growth(&lengths, family);
        ensure(r.passed(), || format!("{family}: {}", failures(&r)))?;
        let last = lengths.last().expect("levels built");
        summary.push(format!("{family} n<={} |P|<={}", last.dim, last.length));
    }
    ensure(build_time < Duration::from_secs(300), || format!("build took {build_time:?}"))?;
    Ok(format!("{} in {build_time:?}", summary.join(", ")))
}

fn criterion_5(built: &[Construction]) -> Outcome {
    let mut counts = [0usize; 3];
    for c in built {
        for level in c.levels() {
            let n = level.dim();
            let o = level.oracle.as_ref();
            let tag = format!("{} level {}", level.family, level.level);
            if n <= 12 {
                let r = check_uso_exhaustive(o, UsoMode::GroundTruth, 12).map_err(|e| e.to_string())?;
                ensure(r.passed(), || format!("{tag}: {}", failures(&r)))?;
                counts[0] += 1;
            }
            if n <= 20 {
                let r = check_acyclic(o, 20).map_err(|e| e.to_string())?;
                ensure(r.passed(), || format!("{tag}: {}", failures(&r)))?;
                counts[1] += 1;
            }
            let r = check_uso_sampled(o, 10_000, 8, SAMPLE_SEED).map_err(|e| e.to_string())?;
            ensure(r.passed(), || format!("{tag}: {}", failures(&r)))?;
            counts[2] += 1;
        }
    }
    Ok(format!(
        "{} exhaustive USO, {} exhaustive acyclic, {} sampled (10^4 faces, dim <= 8, seed {SAMPLE_SEED})",
        counts[0], counts[1], counts[2]
    ))
}

fn criterion_6(built: &[Construction]) -> Outcome {
    let mut rng = common::rng(6);
    let compositions = 1000;
    for k in 0..compositions {
        let n = 2 + k % 9;
        let o = common::random_auso(&mut rng, n);
        let r = check_uso_exhaustive(o.as_ref(), UsoMode::GroundTruth, 10).map_err(|e| e.to_string())?;
        ensure(r.passed(), || format!("composition {k} (n = {n}): {}", failures(&r)))?;
        let r = check_acyclic(o.as_ref(), 10).map_err(|e| e.to_string())?;
        ensure(r.passed(), || format!("composition {k} (n = {n}): {}", failures(&r)))?;
    }
    let mut suites = 0;
    for c in built {
        for level in c.levels() {
            let trace = c.trace(level.level).ok_or("missing trace")?;
            let r = check_trace_properties(level, trace);
            ensure(r.passed(), || format!("{} level {}: {}", level.family, level.level, failures(&r)))?;
            suites += r.checks.len();
        }
    }
    Ok(format!("{compositions} random compositions pass; {suites} trace checks pass"))
}

fn criterion_7(built: &[Construction]) -> Outcome {
    let mut replays = 0;
    for c in built {
        let b = c.family().bundle_size();
        let caches: Vec<LevelCache> = c
            .levels()
            .iter()
            .map(|l| LevelCache::from_level(l, c.library()))
            .collect();
        let mut reloaded = Construction::new(c.library().clone()).map_err(|e| e.to_string())?;
        reloaded.load_caches(&caches).map_err(|e| e.to_string())?;
        for level in c.levels() {
            let original = c.trace(level.level).ok_or("missing trace")?.to_jsonl(b);
            let replay = level.run(RunOptions::default()).map_err(|e| e.to_string())?;
            ensure(replay.to_jsonl(b) == original, || {
                format!("{} level {}: replay differs", level.family, level.level)
            })?;
            let cached = reloaded.level(level.level).ok_or("missing reloaded level")?;
            let replay = cached.run(RunOptions::default()).map_err(|e| e.to_string())?;
            ensure(replay.to_jsonl(b) == original, || {
                format!("{} level {}: replay from cache differs", level.family, level.level)
            })?;
            replays += 2;
        }
        for level in &c.levels()[..2] {
            let n = level.dim();
            let dirs = |mode| -> Result<Vec<Direction>, String> {
                let mut rule = JohnsonState::new(n, b).with_mode(mode);
                let opts = RunOptions::default().with_snapshots(SnapshotPolicy::On);
                run_to_sink(level.oracle.as_ref(), level.start, &mut rule, opts)
                    .map(|t| t.directions())
                    .map_err(|e| e.to_string())
            };
            let (a, r) = (dirs(SnapshotMode::ArrivalUpdate)?, dirs(SnapshotMode::Raw)?);
            ensure(a == r, || {
                format!("{} level {}: snapshot modes diverge", level.family, level.level)
            })?;
        }
    }
    Ok(format!("{replays} byte-identical replays; Johnson snapshot modes agree on levels 0 and 1"))
}

fn criterion_8() -> Outcome {
    let mut checks = 0;
    for family in Family::ALL {
        let embedded = FrameLibrary::embedded(family);
        let r = embedded.validate();
        ensure(r.passed(), || format!("{family}: {}", failures(&r)))?;
        checks += r.checks.len();
        let shipped = FrameLibrary::from_dir(&shipped_frames_dir(), family).map_err(|e| e.to_string())?;
        ensure(shipped.hashes() == embedded.hashes(), || format!("{family}: shipped files differ from embedded frames"))?;
    }
    // A frame that breaks its suite must block construction.
    let mut lib = FrameLibrary::embedded(Family::Cunningham);
    let broken = LoadedFrame::from_text("F1", Family::Cunningham, &lib.get("F3").map_err(|e| e.to_string())?.spec.to_text())
        .map_err(|e| e.to_string())?;
    lib.frames.insert("F1".into(), broken);
    ensure(Construction::new(lib).is_err(), || "an invalid frame did not block the build".into())?;
    Ok(format!("{checks} frame constraints pass; an invalid frame blocks builds"))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |k: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {k} {name}: PASS ({secs:.2}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {k} {name}: FAIL ({secs:.2}s) {detail}");
            }
        }
    };

    report(1, "johnson history table", &mut criterion_1);
    report(2, "cunningham base case", &mut criterion_2);
    report(3, "zadeh base case", &mut criterion_3);

    let start = Instant::now();
    let built = build_all();
    let build_time = start.elapsed();
    let need = |f: fn(&[Construction]) -> Outcome| {
        let built = &built;
        move || match built {
            Ok(b) => f(b),
            Err(e) => Err(format!("construction failed: {e}")),
        }
    };
    report(4, "growth recursions", &mut || match &built {
        Ok(b) => criterion_4(b, build_time),
        Err(e) => Err(format!("construction failed: {e}")),
    });
    report(5, "structural verification", &mut need(criterion_5));
    report(6, "trace property suites", &mut need(criterion_6));
    report(7, "determinism and replay", &mut need(criterion_7));
    report(8, "frame transcription gate", &mut criterion_8);

    if failed == 0 {
        println!("acceptance: 8/8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria FAIL");
        ExitCode::FAILURE
    }
}
