//! Recursive lower-bound constructions: tie lists, starting vertices, the
//! reset AUSO, adversarial frame realization and level caches.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinators::{
    external_outmap_uniform, product, reorient_face, CombinatorError, FrameAssignmentMap,
    FrameLookup, PreconditionCheck, ProductOracle, Uniformity,
};
use crate::cube::{
    full_mask, CubeError, Direction, Face, Oracle, SharedOracle, UniformOracle, Vertex,
};
use crate::frames::{Family, FrameError, FrameLibrary, CUNNINGHAM_PATTERN, ZADEH_PATTERN};
use crate::pivot::{
    run_to_sink, run_with_hook, CunninghamState, JohnsonState, PivotError, RuleState,
    RunOptions, SnapshotPolicy, Trace, ZadehState,
};

/// Gadget faces up to this dimension get an exhaustive precondition check.
pub const EXHAUSTIVE_GADGET_CHECK: usize = 20;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Frames(#[from] FrameError),
    #[error(transparent)]
    Combinator(#[from] CombinatorError),
    #[error(transparent)]
    Pivot(#[from] PivotError),
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("level {level}: inner vertex {inner} holds frame {existing}, adversary demands {demanded}")]
    Conflict {
        level: usize,
        inner: String,
        existing: String,
        demanded: String,
    },
    #[error("level {level}: inner move at unexpected frame position {position}")]
    UnexpectedPosition { level: usize, position: String },
    #[error("{0} has no tie list (it uses the lexicographic order)")]
    NoTieList(Family),
    #[error("level cache mismatch: {0}")]
    StaleCache(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

fn signed_list(pattern: &[i32], bundles: usize, bundle_size: usize) -> Vec<Direction> {
    (0..bundles)
        .flat_map(|j| pattern.iter().map(move |&x| Direction::in_bundle(j, x, bundle_size)))
        .collect()
}

/// `L_i` (Cunningham) or `T_i` (Zadeh): the per-bundle pattern repeated for
/// bundles `0..=i`.
pub fn tie_list(family: Family, i: usize) -> Result<Vec<Direction>, ConstructionError> {
    match family {
        Family::Cunningham => Ok(signed_list(&CUNNINGHAM_PATTERN, i + 1, 4)),
        Family::Zadeh => Ok(signed_list(&ZADEH_PATTERN, i + 1, 6)),
        Family::Johnson => Err(ConstructionError::NoTieList(family)),
    }
}

/// `v_0^i`: `{c_0^2, ..., c_i^2}` for Cunningham and Zadeh, empty for Johnson.
pub fn starting_vertex(family: Family, i: usize) -> Vertex {
    let b = family.bundle_size();
    match family {
        Family::Johnson => Vertex::EMPTY,
        _ => Vertex::from_coords((0..=i).map(|j| j * b + 1)),
    }
}

/// The fresh rule state for level `i` of `family`.
pub fn initial_rule(family: Family, i: usize) -> RuleState {
    let n = family.bundle_size() * (i + 1);
    match family {
        Family::Cunningham => RuleState::Cunningham(
            CunninghamState::new(tie_list(family, i).expect("cunningham list")).expect("permutation"),
        ),
        Family::Johnson => RuleState::Johnson(JohnsonState::new(n, 4)),
        Family::Zadeh => RuleState::Zadeh(
            ZadehState::new(tie_list(family, i).expect("zadeh list")).expect("permutation"),
        ),
    }
}

/// `R_i`, a `4i`-dimensional AUSO.
#[derive(Clone)]
pub struct ResetLevel {
    pub level: usize,
    pub oracle: SharedOracle,
}

/// `R_0` is a point; `R_{k+1}` uses `R_1` at the sink of `R_k` and the
/// uniform frame with sink `{c^1, c^4}` everywhere else.
pub fn build_reset(i: usize, library: &FrameLibrary) -> Result<ResetLevel, ConstructionError> {
    let r1 = library.get("R1")?.shared();
    let mut frames: BTreeMap<String, SharedOracle> = BTreeMap::new();
    frames.insert("R1".into(), r1);
    frames.insert("U14".into(), Arc::new(UniformOracle::new(4, Vertex(0b1001))));
    let mut oracle: SharedOracle = Arc::new(UniformOracle::new(0, Vertex::EMPTY));
    for k in 0..i {
        let mut a = FrameAssignmentMap::uniform(4 * k, "U14");
        a.overrides.insert(Vertex::EMPTY, "R1".into());
        oracle = Arc::new(product(oracle, &frames, &a, 4)?);
    }
    Ok(ResetLevel { level: i, oracle })
}

/// The gadget installed by reorientation at level `i >= 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gadget {
    /// Position of the gadget inside the outer frame.
    pub position: Vertex,
    pub face: Face,
    /// `uniform-to-start` (balance AUSO) or `reset-R<i>`.
    pub replacement: String,
}

/// A frozen level `A_i`.
#[derive(Clone)]
pub struct ConstructionLevel {
    pub family: Family,
    pub level: usize,
    pub oracle: SharedOracle,
    pub start: Vertex,
    /// `L_i`, `T_i`, or the lexicographic order for Johnson.
    pub tie_list: Vec<Direction>,
    pub assignment: FrameAssignmentMap,
    pub gadget: Option<Gadget>,
    pub expected_sink: Vertex,
    pub path_length: usize,
    /// Direction sequence `P_{i-1}` of the previous level (empty at level 0).
    pub inner_path: Vec<Direction>,
}

impl ConstructionLevel {
    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn bundle_size(&self) -> usize {
        self.family.bundle_size()
    }

    /// Dimension of `A_{i-1}` (0 at level 0).
    pub fn inner_dim(&self) -> usize {
        self.assignment.inner_dimension
    }

    pub fn rule(&self) -> RuleState {
        initial_rule(self.family, self.level)
    }

    /// Replays the level's rule from its start vertex.
    pub fn run(&self, opts: RunOptions) -> Result<Trace, PivotError> {
        let mut rule = self.rule();
        run_to_sink(self.oracle.as_ref(), self.start, &mut rule, opts)
    }
}

struct DemandLookup {
    default: usize,
    memo: RefCell<HashMap<u64, usize>>,
    pending: RefCell<HashMap<u64, HashSet<u64>>>,
}

impl FrameLookup for DemandLookup {
    fn frame_index(&self, inner: Vertex, outer: Vertex) -> usize {
        if let Some(&i) = self.memo.borrow().get(&inner.0) {
            return i;
        }
        self.pending
            .borrow_mut()
            .entry(inner.0)
            .or_default()
            .insert(outer.0);
        self.default
    }
}

/// Frame-relevant positions of the outer bundle.
struct Positions {
    box1: Vertex,
    box5: Vertex,
    gadget: Vertex,
    hyper: Option<Vertex>,
}

fn positions(family: Family, library: &FrameLibrary) -> Result<Positions, FrameError> {
    let f1 = &library.get("F1")?.spec;
    Ok(match family {
        Family::Cunningham => Positions {
            box1: f1.label("box1")?,
            box5: f1.label("box5")?,
            gadget: f1.label("B")?,
            hyper: Some(f1.label("H")?),
        },
        Family::Johnson => Positions {
            box1: f1.label("box1")?,
            box5: f1.label("box5")?,
            gadget: f1.label("R")?,
            hyper: Some(f1.label("H")?),
        },
        Family::Zadeh => Positions {
            box1: f1.label("box1")?,
            box5: Vertex::EMPTY,
            gadget: f1.label("B")?,
            hyper: None,
        },
    })
}

fn connecting_frames(family: Family) -> &'static [&'static str] {
    match family {
        Family::Johnson => &["F1", "F2"],
        _ => &["F1", "F2", "F3"],
    }
}

fn default_frame(family: Family) -> &'static str {
    match family {
        Family::Cunningham | Family::Zadeh => "F3",
        Family::Johnson => "F1",
    }
}

/// Frame whose sink becomes the global sink (used at the inner sink).
fn sink_frame(family: Family) -> &'static str {
    default_frame(family)
}

/// What the adversary sees when it is asked to fix a frame.
struct Demand<'a> {
    inner: Vertex,
    outer: Vertex,
    /// `None` at the start vertex, otherwise whether the last move was an inner move.
    after_inner_move: Option<bool>,
    inner_oracle: &'a SharedOracle,
}

fn policy(
    family: Family,
    level: usize,
    pos: &Positions,
    d: &Demand<'_>,
    zadeh: Option<&ZadehState>,
    in_dirs: &[Direction],
) -> Result<Option<&'static str>, ConstructionError> {
    if d.after_inner_move == Some(false) {
        return Ok(None);
    }
    if d.outer == pos.gadget || Some(d.outer) == pos.hyper {
        return Ok(None);
    }
    let inner_out = d.inner_oracle.outmap(d.inner);
    let choice = match family {
        Family::Cunningham | Family::Johnson => {
            if d.after_inner_move.is_none() {
                "F1"
            } else if inner_out.is_empty() {
                sink_frame(family)
            } else if d.outer == pos.box1 {
                "F1"
            } else if d.outer == pos.box5 {
                "F2"
            } else {
                return Err(ConstructionError::UnexpectedPosition {
                    level,
                    position: d.outer.to_bitstring(family.bundle_size()),
                });
            }
        }
        Family::Zadeh => {
            let z = zadeh.expect("zadeh policy needs zadeh state");
            if inner_out.is_empty() {
                "F3"
            } else if z.is_saturated_at(d.inner, inner_out, in_dirs) {
                "F2"
            } else {
                "F1"
            }
        }
    };
    Ok(Some(choice))
}

fn gadget_replacement(
    family: Family,
    level: usize,
    prev: &ConstructionLevel,
    library: &FrameLibrary,
) -> Result<(SharedOracle, String), ConstructionError> {
    Ok(match family {
        Family::Johnson => (build_reset(level, library)?.oracle, format!("reset-R{level}")),
        _ => (
            Arc::new(UniformOracle::new(prev.dim(), prev.start)),
            "uniform-to-start".to_string(),
        ),
    })
}

fn level_zero(family: Family, library: &FrameLibrary) -> Result<(ConstructionLevel, Trace), ConstructionError> {
    let base = library.get(family.base_frame())?;
    let oracle = base.shared();
    let start = starting_vertex(family, 0);
    let mut rule = initial_rule(family, 0);
    let trace = run_to_sink(oracle.as_ref(), start, &mut rule, RunOptions::default())?;
    let level = ConstructionLevel {
        family,
        level: 0,
        start,
        tie_list: tie_order(family, 0),
        assignment: FrameAssignmentMap::uniform(0, family.base_frame()),
        gadget: None,
        expected_sink: trace.end,
        path_length: trace.len(),
        inner_path: Vec::new(),
        oracle,
    };
    Ok((level, trace))
}

fn tie_order(family: Family, i: usize) -> Vec<Direction> {
    match family {
        Family::Johnson => JohnsonState::lexicographic_order(4 * (i + 1), 4),
        _ => tie_list(family, i).expect("list family"),
    }
}

/// Assembles level `i` from `prev` and a fixed assignment.
fn assemble(
    family: Family,
    level: usize,
    prev: &ConstructionLevel,
    library: &FrameLibrary,
    assignment: FrameAssignmentMap,
) -> Result<ConstructionLevel, ConstructionError> {
    let n_in = prev.dim();
    let b = family.bundle_size();
    let pos = positions(family, library)?;
    let frames = library.shared_map();
    let prod = product(prev.oracle.clone(), &frames, &assignment, b)?;
    let face = Face::new(Vertex(pos.gadget.0 << n_in), full_mask(n_in));
    let (replacement, label) = gadget_replacement(family, level, prev, library)?;
    let check = if n_in <= EXHAUSTIVE_GADGET_CHECK {
        PreconditionCheck::Exhaustive {
            cap: EXHAUSTIVE_GADGET_CHECK,
        }
    } else {
        shared_gadget_outmap(&assignment, library, pos.gadget)?;
        PreconditionCheck::Assume
    };
    let oracle = reorient_face(prod, face, replacement, check)?;
    let sink_frame = library.get(sink_frame(family))?;
    let frame_sink = sink_frame
        .spec
        .labels
        .get(if family == Family::Zadeh { "circ12" } else { "H" })
        .copied()
        .ok_or_else(|| FrameError::MissingLabel("sink label".into()))?;
    Ok(ConstructionLevel {
        family,
        level,
        start: starting_vertex(family, level),
        tie_list: tie_order(family, level),
        expected_sink: Vertex(prev.expected_sink.0 | frame_sink.0 << n_in),
        gadget: Some(Gadget {
            position: pos.gadget,
            face,
            replacement: label,
        }),
        assignment,
        path_length: 0,
        inner_path: prev.run(RunOptions::default().with_snapshots(SnapshotPolicy::Off))?.directions(),
        oracle: Arc::new(oracle),
    })
}

/// Every frame used by `assignment` has the same outmap at the gadget
/// position, which implies the reorientation precondition for the product.
fn shared_gadget_outmap(
    assignment: &FrameAssignmentMap,
    library: &FrameLibrary,
    position: Vertex,
) -> Result<(), ConstructionError> {
    let mut names: Vec<&String> = assignment.overrides.values().collect();
    names.push(&assignment.default_frame);
    let reference = library.get(&assignment.default_frame)?.oracle.outmap(position);
    for name in names {
        if library.get(name)?.oracle.outmap(position) != reference {
            return Err(CombinatorError::NotUniform {
                first: position.0,
                second: position.0,
            }
            .into());
        }
    }
    Ok(())
}

/// Runs the rule on the partially determined level `level`, fixing frames
/// on demand, then freezes the assignment.
fn realize_next(
    prev: &ConstructionLevel,
    library: &FrameLibrary,
) -> Result<(ConstructionLevel, Trace), ConstructionError> {
    let family = prev.family;
    let level = prev.level + 1;
    let n_in = prev.dim();
    let pos = positions(family, library)?;
    let names = connecting_frames(family);
    let default = default_frame(family);
    let frame_list: Vec<(String, SharedOracle)> = names
        .iter()
        .map(|n| Ok((n.to_string(), library.get(n)?.shared())))
        .collect::<Result<_, FrameError>>()?;
    let default_idx = names.iter().position(|n| *n == default).expect("default listed");
    let lookup = DemandLookup {
        default: default_idx,
        memo: RefCell::new(HashMap::new()),
        pending: RefCell::new(HashMap::new()),
    };
    let prod = ProductOracle::with_lookup(prev.oracle.clone(), frame_list.clone(), lookup)?;
    let face = Face::new(Vertex(pos.gadget.0 << n_in), full_mask(n_in));
    let (replacement, _) = gadget_replacement(family, level, prev, library)?;
    let oracle = reorient_face(prod, face, replacement, PreconditionCheck::Assume)?;
    let start = starting_vertex(family, level);
    let in_dirs = tie_order(family, prev.level);
    let inner_oracle = prev.oracle.clone();
    let mask = full_mask(n_in);

    let assign = |inner: Vertex, frame: &str| -> Result<(), ConstructionError> {
        let idx = names.iter().position(|n| *n == frame).expect("known frame");
        let lookup = oracle.base().lookup();
        let mut memo = lookup.memo.borrow_mut();
        match memo.get(&inner.0) {
            Some(&have) if have != idx => Err(ConstructionError::Conflict {
                level,
                inner: inner.to_bitstring(n_in),
                existing: names[have].to_string(),
                demanded: frame.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                if let Some(seen) = lookup.pending.borrow().get(&inner.0) {
                    for &w in seen {
                        let a = frame_list[idx].1.outmap(Vertex(w));
                        let d = frame_list[default_idx].1.outmap(Vertex(w));
                        if a != d {
                            return Err(ConstructionError::Conflict {
                                level,
                                inner: inner.to_bitstring(n_in),
                                existing: format!("{default} (demanded earlier)"),
                                demanded: frame.to_string(),
                            });
                        }
                    }
                }
                memo.insert(inner.0, idx);
                Ok(())
            }
        }
    };

    let mut rule = initial_rule(family, level);
    let trace = run_with_hook(
        &oracle,
        start,
        &mut rule,
        RunOptions::default(),
        |v, prev_dir, rule: &RuleState| -> Result<(), ConstructionError> {
            let demand = Demand {
                inner: Vertex(v.0 & mask),
                outer: Vertex(v.0 >> n_in),
                after_inner_move: prev_dir.map(|d| d.coord < n_in),
                inner_oracle: &inner_oracle,
            };
            let zadeh = match rule {
                RuleState::Zadeh(z) => Some(z),
                _ => None,
            };
            if let Some(frame) = policy(family, level, &pos, &demand, zadeh, &in_dirs)? {
                assign(demand.inner, frame)?;
            }
            Ok(())
        },
    )?;

    let memo = oracle.base().lookup().memo.borrow().clone();
    let overrides = memo
        .into_iter()
        .map(|(u, idx)| (Vertex(u), names[idx].to_string()))
        .collect();
    let assignment = FrameAssignmentMap {
        inner_dimension: n_in,
        default_frame: default.to_string(),
        overrides,
    };
    debug!(
        "{family} level {level}: {} steps, {} frame assignments",
        trace.len(),
        assignment.overrides.len()
    );
    let mut frozen = assemble(family, level, prev, library, assignment)?;
    frozen.path_length = trace.len();
    Ok((frozen, trace))
}

/// Bottom-up builder holding every realized level of one family.
pub struct Construction {
    library: FrameLibrary,
    levels: Vec<ConstructionLevel>,
    traces: Vec<Option<Trace>>,
}

impl Construction {
    /// Validates the frames (any failure blocks construction).
    pub fn new(library: FrameLibrary) -> Result<Self, ConstructionError> {
        library.require_valid()?;
        Ok(Construction {
            library,
            levels: Vec::new(),
            traces: Vec::new(),
        })
    }

    pub fn family(&self) -> Family {
        self.library.family
    }

    pub fn library(&self) -> &FrameLibrary {
        &self.library
    }

    /// Realizes levels up to `i` (inclusive) and returns level `i`.
    pub fn realize_up_to(&mut self, i: usize) -> Result<&ConstructionLevel, ConstructionError> {
        while self.levels.len() <= i {
            let (lvl, trace) = match self.levels.last() {
                None => level_zero(self.family(), &self.library)?,
                Some(prev) => realize_next(prev, &self.library)?,
            };
            info!(
                "{} level {}: n = {}, |P| = {}",
                lvl.family,
                lvl.level,
                lvl.dim(),
                lvl.path_length
            );
            self.levels.push(lvl);
            self.traces.push(Some(trace));
        }
        Ok(&self.levels[i])
    }

    pub fn level(&self, i: usize) -> Option<&ConstructionLevel> {
        self.levels.get(i)
    }

    /// Trace of the realizing run (absent for levels loaded from caches).
    pub fn trace(&self, i: usize) -> Option<&Trace> {
        self.traces.get(i).and_then(Option::as_ref)
    }

    pub fn levels(&self) -> &[ConstructionLevel] {
        &self.levels
    }

    /// Rebuilds levels from cache records (levels `0..caches.len()`).
    pub fn load_caches(&mut self, caches: &[LevelCache]) -> Result<(), ConstructionError> {
        self.levels.clear();
        self.traces.clear();
        let hashes = self.library.hashes();
        for (i, cache) in caches.iter().enumerate() {
            if cache.family != self.family() || cache.level != i {
                return Err(ConstructionError::StaleCache(format!(
                    "expected {} level {i}, found {} level {}",
                    self.family(),
                    cache.family,
                    cache.level
                )));
            }
            for (name, hash) in &cache.frames {
                if hashes.get(name) != Some(hash) {
                    return Err(ConstructionError::StaleCache(format!(
                        "frame {name} changed since level {i} was built"
                    )));
                }
            }
            let mut lvl = match self.levels.last() {
                None => level_zero(self.family(), &self.library)?.0,
                Some(prev) => assemble(
                    self.family(),
                    i,
                    prev,
                    &self.library,
                    cache.assignment_map()?,
                )?,
            };
            lvl.path_length = cache.path_length;
            self.levels.push(lvl);
            self.traces.push(None);
        }
        Ok(())
    }
}

/// Realizes `A_0 .. A_i` and returns `A_i` with its realizing trace.
pub fn realize_level(
    family: Family,
    i: usize,
    library: &FrameLibrary,
) -> Result<(ConstructionLevel, Trace), ConstructionError> {
    if library.family != family {
        return Err(FrameError::Invalid(format!(
            "{} frames cannot build a {family} level",
            library.family
        ))
        .into());
    }
    let mut c = Construction::new(library.clone())?;
    c.realize_up_to(i)?;
    let trace = c.trace(i).cloned().expect("realized levels keep traces");
    Ok((c.levels[i].clone(), trace))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetRecord {
    pub position: String,
    pub anchor: String,
    pub free: String,
    pub replacement: String,
}

/// On-disk record of a frozen level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCache {
    pub family: Family,
    pub level: usize,
    pub dim: usize,
    pub start: String,
    pub expected_sink: String,
    pub path_length: usize,
    pub default_frame: String,
    /// Inner-vertex bit string to frame name.
    pub assignments: BTreeMap<String, String>,
    pub gadget: Option<GadgetRecord>,
    /// Frame name to SHA-256 of the frame file.
    pub frames: BTreeMap<String, String>,
}

impl LevelCache {
    pub fn from_level(level: &ConstructionLevel, library: &FrameLibrary) -> Self {
        let n = level.dim();
        let n_in = level.inner_dim();
        LevelCache {
            family: level.family,
            level: level.level,
            dim: n,
            start: level.start.to_bitstring(n),
            expected_sink: level.expected_sink.to_bitstring(n),
            path_length: level.path_length,
            default_frame: level.assignment.default_frame.clone(),
            assignments: level
                .assignment
                .overrides
                .iter()
                .map(|(v, f)| (v.to_bitstring(n_in), f.clone()))
                .collect(),
            gadget: level.gadget.as_ref().map(|g| GadgetRecord {
                position: g.position.to_bitstring(level.bundle_size()),
                anchor: g.face.anchor.to_bitstring(n),
                free: Vertex(g.face.free).to_bitstring(n),
                replacement: g.replacement.clone(),
            }),
            frames: library.hashes(),
        }
    }

    pub fn assignment_map(&self) -> Result<FrameAssignmentMap, ConstructionError> {
        let inner_dimension = self.dim - self.family.bundle_size();
        let mut overrides = BTreeMap::new();
        for (bits, frame) in &self.assignments {
            let (v, w) = Vertex::parse_bitstring(bits)?;
            if w != inner_dimension {
                return Err(ConstructionError::StaleCache(format!(
                    "assignment key {bits} has width {w}, expected {inner_dimension}"
                )));
            }
            overrides.insert(v, frame.clone());
        }
        Ok(FrameAssignmentMap {
            inner_dimension,
            default_frame: self.default_frame.clone(),
            overrides,
        })
    }

    pub fn file_name(family: Family, level: usize) -> String {
        format!("{family}_L{level}.json")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cache serializes") + "\n"
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> ConstructionError {
    ConstructionError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Reads `dir/<family>_L<level>.json`, or `None` if the file is absent.
pub fn read_cache(dir: &Path, family: Family, level: usize) -> Result<Option<LevelCache>, ConstructionError> {
    let path = dir.join(LevelCache::file_name(family, level));
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_error(&path, e)),
    };
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| io_error(&path, e))
}

/// Writes the cache unless an identical file exists; returns whether it wrote.
pub fn write_cache(dir: &Path, cache: &LevelCache) -> Result<bool, ConstructionError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(LevelCache::file_name(cache.family, cache.level));
    let text = cache.to_json();
    if fs::read_to_string(&path).is_ok_and(|old| old == text) {
        return Ok(false);
    }
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(true)
}

/// Loads levels `0..=level` from `dir` if every cache file is present.
pub fn load_cached(
    dir: &Path,
    library: &FrameLibrary,
    level: usize,
) -> Result<Option<Construction>, ConstructionError> {
    let mut caches = Vec::with_capacity(level + 1);
    for i in 0..=level {
        match read_cache(dir, library.family, i)? {
            Some(c) => caches.push(c),
            None => return Ok(None),
        }
    }
    let mut c = Construction::new(library.clone())?;
    c.load_caches(&caches)?;
    Ok(Some(c))
}

/// Checks that a frozen gadget face satisfies the reorientation precondition.
pub fn gadget_uniformity(level: &ConstructionLevel) -> Option<Result<Uniformity, CombinatorError>> {
    let g = level.gadget.as_ref()?;
    Some(external_outmap_uniform(
        level.oracle.as_ref(),
        g.face,
        EXHAUSTIVE_GADGET_CHECK,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_lists() {
        let l0: Vec<String> = tie_list(Family::Cunningham, 0)
            .unwrap()
            .iter()
            .map(|d| d.label(4))
            .collect();
        assert_eq!(l0, ["+0.1", "-0.2", "+0.3", "-0.1", "+0.4", "-0.3", "+0.2", "-0.4"]);
        let t1 = tie_list(Family::Zadeh, 1).unwrap();
        assert_eq!(t1.len(), 24);
        assert!(t1[..12].iter().all(|d| d.coord < 6));
        assert!(tie_list(Family::Johnson, 0).is_err());
    }

    #[test]
    fn starting_vertices() {
        assert_eq!(starting_vertex(Family::Johnson, 3), Vertex::EMPTY);
        assert_eq!(starting_vertex(Family::Cunningham, 1), Vertex::from_coords([1, 5]));
        assert_eq!(starting_vertex(Family::Zadeh, 0), Vertex::from_coords([1]));
    }

    #[test]
    fn reset_levels() {
        let lib = FrameLibrary::embedded(Family::Johnson);
        let r0 = build_reset(0, &lib).unwrap();
        assert_eq!(r0.oracle.dim(), 0);
        let r1 = build_reset(1, &lib).unwrap();
        let f = lib.get("R1").unwrap();
        for v in 0..16 {
            assert_eq!(r1.oracle.outmap(Vertex(v)), f.oracle.outmap(Vertex(v)));
        }
    }
}
