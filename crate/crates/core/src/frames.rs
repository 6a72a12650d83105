//! Storage, loading and validation of the small explicit AUSOs used as
//! connecting frames, base cases and the reset base.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cube::{full_mask, Direction, Face, Oracle, Outmap, SharedOracle, TableOracle, Vertex};
use crate::pivot::{CunninghamState, JohnsonState, PivotRule, ZadehState};
use crate::verify::{
    check_acyclic, check_uso_exhaustive, CheckResult, UsoMode, VerificationReport, Witness,
};

/// Per-bundle Cunningham list pattern.
pub const CUNNINGHAM_PATTERN: [i32; 8] = [1, -2, 3, -1, 4, -3, 2, -4];
/// Per-bundle Zadeh tie-list pattern.
pub const ZADEH_PATTERN: [i32; 12] = [1, -2, 3, -1, 4, -3, 5, -4, 6, -5, 2, -6];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cunningham,
    Johnson,
    Zadeh,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Cunningham, Family::Johnson, Family::Zadeh];

    pub fn bundle_size(self) -> usize {
        match self {
            Family::Cunningham | Family::Johnson => 4,
            Family::Zadeh => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Cunningham => "cunningham",
            Family::Johnson => "johnson",
            Family::Zadeh => "zadeh",
        }
    }

    /// Frame files the family needs.
    pub fn frame_names(self) -> &'static [&'static str] {
        match self {
            Family::Cunningham => &["F1", "F2", "F3"],
            Family::Johnson => &["F1", "F2", "R1"],
            Family::Zadeh => &["F1", "F2", "F3", "A0"],
        }
    }

    /// Frame serving as the base case `A_0`.
    pub fn base_frame(self) -> &'static str {
        match self {
            Family::Cunningham => "F3",
            Family::Johnson => "F1",
            Family::Zadeh => "A0",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = FrameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cunningham" => Ok(Family::Cunningham),
            "johnson" => Ok(Family::Johnson),
            "zadeh" => Ok(Family::Zadeh),
            _ => Err(FrameError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate backward edge")]
    DuplicateEdge { line: usize },
    #[error("line {line}: expected {expected} bits, found {found}")]
    BitWidth {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown label {0}")]
    MissingLabel(String),
    #[error("unknown family {0}")]
    UnknownFamily(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("frame file name {0} is not <family>_<name>.frame")]
    BadFileName(String),
    #[error("frame {family}/{name} not found")]
    MissingFrame { family: Family, name: String },
    #[error("frame transcriptions failed validation: {0}")]
    Invalid(String),
}

/// A small explicitly stored AUSO. Unlisted edges are forward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSpec {
    pub name: String,
    pub family: Family,
    pub dim: usize,
    /// `(v, k)`: edge `v -- v+{k}` points to `v`; `k` is 0-based.
    pub backward_edges: Vec<(Vertex, usize)>,
    pub labels: BTreeMap<String, Vertex>,
}

impl FrameSpec {
    pub fn parse(name: &str, family: Family, text: &str) -> Result<Self, FrameError> {
        let mut dim: Option<usize> = None;
        let mut edges = Vec::new();
        let mut seen = BTreeSet::new();
        let mut labels = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = content.split_whitespace().collect();
            let perr = |msg: &str| FrameError::Parse {
                line,
                msg: msg.to_string(),
            };
            let Some(n) = dim else {
                if parts.len() != 2 || parts[0] != "dim" {
                    return Err(perr("first directive must be `dim <n>`"));
                }
                let n: usize = parts[1].parse().map_err(|_| perr("bad dimension"))?;
                if n == 0 || n > 12 {
                    return Err(perr("frame dimension must be in 1..=12"));
                }
                dim = Some(n);
                continue;
            };
            let bits = |s: &str| -> Result<Vertex, FrameError> {
                let (v, w) = Vertex::parse_bitstring(s).map_err(|e| perr(&e.to_string()))?;
                if w != n {
                    return Err(FrameError::BitWidth {
                        line,
                        expected: n,
                        found: w,
                    });
                }
                Ok(v)
            };
            match parts.as_slice() {
                ["back", b, k] => {
                    let v = bits(b)?;
                    let k: usize = k.parse().map_err(|_| perr("bad coordinate"))?;
                    if k == 0 || k > n {
                        return Err(perr("coordinate out of range"));
                    }
                    if v.contains(k - 1) {
                        return Err(perr("backward edge must start at a vertex without its coordinate"));
                    }
                    if !seen.insert((v, k - 1)) {
                        return Err(FrameError::DuplicateEdge { line });
                    }
                    edges.push((v, k - 1));
                }
                ["label", name, b] => {
                    let v = bits(b)?;
                    if labels.insert(name.to_string(), v).is_some() {
                        return Err(perr("duplicate label"));
                    }
                }
                ["dim", _] => return Err(perr("repeated `dim`")),
                _ => return Err(perr("unknown directive")),
            }
        }
        let dim = dim.ok_or(FrameError::Parse {
            line: 0,
            msg: "missing `dim`".into(),
        })?;
        Ok(FrameSpec {
            name: name.to_string(),
            family,
            dim,
            backward_edges: edges,
            labels,
        })
    }

    /// Canonical text form; parses back to an equal spec.
    pub fn to_text(&self) -> String {
        let mut s = format!("dim {}\n", self.dim);
        for (v, k) in &self.backward_edges {
            s.push_str(&format!("back {} {}\n", v.to_bitstring(self.dim), k + 1));
        }
        for (name, v) in &self.labels {
            s.push_str(&format!("label {name} {}\n", v.to_bitstring(self.dim)));
        }
        s
    }

    pub fn oracle(&self) -> TableOracle {
        let full = full_mask(self.dim);
        let mut t = TableOracle::from_fn(self.dim, |v| Outmap(!v.0 & full))
            .expect("frame dimension is small");
        for (v, k) in &self.backward_edges {
            t.flip_edge(*v, *k);
        }
        t
    }

    pub fn label(&self, name: &str) -> Result<Vertex, FrameError> {
        self.labels
            .get(name)
            .copied()
            .ok_or_else(|| FrameError::MissingLabel(name.to_string()))
    }

    /// A label name, or a literal bit string.
    pub fn resolve(&self, name: &str) -> Result<Vertex, FrameError> {
        if let Some(v) = self.labels.get(name) {
            return Ok(*v);
        }
        match Vertex::parse_bitstring(name) {
            Ok((v, w)) if w == self.dim => Ok(v),
            _ => Err(FrameError::MissingLabel(name.to_string())),
        }
    }

    /// Label of `v` if it has one, otherwise its bit string.
    pub fn describe(&self, v: Vertex) -> String {
        self.labels
            .iter()
            .find(|(_, x)| **x == v)
            .map(|(k, _)| k.clone())
            .unwrap_or_else(|| v.to_bitstring(self.dim))
    }
}

fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// A parsed frame with its oracle and content hash.
#[derive(Clone)]
pub struct LoadedFrame {
    pub spec: FrameSpec,
    pub oracle: Arc<TableOracle>,
    pub hash: String,
}

impl LoadedFrame {
    pub fn from_text(name: &str, family: Family, text: &str) -> Result<Self, FrameError> {
        let spec = FrameSpec::parse(name, family, text)?;
        let oracle = Arc::new(spec.oracle());
        Ok(LoadedFrame {
            spec,
            oracle,
            hash: content_hash(text),
        })
    }

    pub fn shared(&self) -> SharedOracle {
        self.oracle.clone()
    }
}

fn parse_file_name(path: &Path) -> Result<(Family, String), FrameError> {
    let bad = || FrameError::BadFileName(path.display().to_string());
    let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(bad)?;
    let (fam, name) = stem.split_once('_').ok_or_else(bad)?;
    Ok((fam.parse().map_err(|_| bad())?, name.to_string()))
}

/// Reads a `<family>_<name>.frame` file.
pub fn load_frame(path: &Path) -> Result<(FrameSpec, TableOracle), FrameError> {
    let (family, name) = parse_file_name(path)?;
    let text = fs::read_to_string(path).map_err(|e| FrameError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let spec = FrameSpec::parse(&name, family, &text)?;
    let oracle = spec.oracle();
    Ok((spec, oracle))
}

const EMBEDDED: &[(Family, &str, &str)] = &[
    (Family::Cunningham, "F1", include_str!("../frames/cunningham_F1.frame")),
    (Family::Cunningham, "F2", include_str!("../frames/cunningham_F2.frame")),
    (Family::Cunningham, "F3", include_str!("../frames/cunningham_F3.frame")),
    (Family::Johnson, "F1", include_str!("../frames/johnson_F1.frame")),
    (Family::Johnson, "F2", include_str!("../frames/johnson_F2.frame")),
    (Family::Johnson, "R1", include_str!("../frames/johnson_R1.frame")),
    (Family::Zadeh, "F1", include_str!("../frames/zadeh_F1.frame")),
    (Family::Zadeh, "F2", include_str!("../frames/zadeh_F2.frame")),
    (Family::Zadeh, "F3", include_str!("../frames/zadeh_F3.frame")),
    (Family::Zadeh, "A0", include_str!("../frames/zadeh_A0.frame")),
];

/// Directory holding the shipped frame files.
pub fn shipped_frames_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("frames")
}

/// All frames of one family.
#[derive(Clone)]
pub struct FrameLibrary {
    pub family: Family,
    pub frames: BTreeMap<String, LoadedFrame>,
}

impl FrameLibrary {
    /// Frames compiled into the library.
    pub fn embedded(family: Family) -> Self {
        let frames = EMBEDDED
            .iter()
            .filter(|(f, _, _)| *f == family)
            .map(|(f, name, text)| {
                let frame = LoadedFrame::from_text(name, *f, text)
                    .unwrap_or_else(|e| panic!("embedded frame {f}/{name}: {e}"));
                (name.to_string(), frame)
            })
            .collect();
        FrameLibrary { family, frames }
    }

    /// Reads `<family>_<name>.frame` for every frame the family needs.
    pub fn from_dir(dir: &Path, family: Family) -> Result<Self, FrameError> {
        let mut frames = BTreeMap::new();
        for name in family.frame_names() {
            let path = dir.join(format!("{family}_{name}.frame"));
            let text = fs::read_to_string(&path).map_err(|e| FrameError::Io {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?;
            frames.insert(name.to_string(), LoadedFrame::from_text(name, family, &text)?);
        }
        Ok(FrameLibrary { family, frames })
    }

    pub fn get(&self, name: &str) -> Result<&LoadedFrame, FrameError> {
        self.frames.get(name).ok_or_else(|| FrameError::MissingFrame {
            family: self.family,
            name: name.to_string(),
        })
    }

    pub fn shared_map(&self) -> BTreeMap<String, SharedOracle> {
        self.frames
            .iter()
            .map(|(k, f)| (k.clone(), f.shared()))
            .collect()
    }

    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.frames
            .iter()
            .map(|(k, f)| (k.clone(), f.hash.clone()))
            .collect()
    }

    /// Runs every frame's constraint suite.
    pub fn validate(&self) -> VerificationReport {
        let mut report = VerificationReport::new(format!("frames:{}", self.family));
        for name in self.family.frame_names() {
            match self.frames.get(*name) {
                Some(frame) => report.merge(validate_frame(frame, Some(self))),
                None => report.push(CheckResult::fail(
                    format!("{}/{name}", self.family),
                    "frame file missing",
                    Witness::Vertex {
                        vertex: String::new(),
                        detail: format!("{}_{name}.frame", self.family),
                    },
                )),
            }
        }
        report
    }

    /// Fails unless every constraint passes.
    pub fn require_valid(&self) -> Result<(), FrameError> {
        let report = self.validate();
        if report.passed() {
            return Ok(());
        }
        let names: Vec<String> = report.failures().map(|c| c.name.clone()).collect();
        Err(FrameError::Invalid(names.join(", ")))
    }
}

/// One textual claim about a frame, decidable on the frame alone or by a
/// scripted walk. Signed directions are 1-based frame coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameConstraint {
    Uso,
    Acyclic,
    SinkAt(String),
    /// Exact outmap at a label (1-based coordinates).
    OutmapAt { label: String, outmap: Vec<usize> },
    Available { label: String, dirs: Vec<i32> },
    Unavailable { label: String, dirs: Vec<i32> },
    /// A single pass of Cunningham's list from a fresh marker.
    CunninghamPass { from: String, visits: Vec<String> },
    /// A full Cunningham run to the sink with the bundle pattern.
    CunninghamRun { from: String, dirs: Vec<i32>, end: String },
    /// A full Johnson run to the sink with the lexicographic order.
    JohnsonRun { from: String, dirs: Vec<i32>, end: String },
    /// Zadeh walk with the bundle pattern, initial usage and an optional
    /// usage cap and step bound.
    ZadehWalk {
        from: String,
        usage: Vec<(i32, u64)>,
        cap: Option<u64>,
        max_steps: Option<usize>,
        visits: Vec<String>,
    },
    /// Final balances of the full Zadeh run: 1 on `imbalanced`, 0 elsewhere.
    ZadehBalances { from: String, imbalanced: Vec<i32> },
    /// Some interior vertex of the full Zadeh run is saturated, and the sink
    /// is at least two steps past the last one.
    ZadehInteriorSaturation { from: String },
    /// Consecutive labels are neighbours joined by an edge oriented along the path.
    OrientedPath(Vec<String>),
    /// Oriented path whose non-final vertices have exactly one outgoing edge.
    SingleOutgoingPath(Vec<String>),
    /// The path edges are oriented identically in `peer`.
    SharesPathEdges { peer: String, path: Vec<String> },
    /// Every backward edge has both endpoints among these labels.
    BackwardEdgesWithin(Vec<String>),
    /// The backward edges are exactly these `(tail, head)` pairs.
    BackwardEdgesExactly(Vec<(String, String)>),
}

impl fmt::Display for FrameConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FrameConstraint::*;
        match self {
            Uso => write!(f, "uso"),
            Acyclic => write!(f, "acyclic"),
            SinkAt(l) => write!(f, "sink-at {l}"),
            OutmapAt { label, outmap } => write!(f, "outmap {label} = {outmap:?}"),
            Available { label, dirs } => write!(f, "available {label} {dirs:?}"),
            Unavailable { label, dirs } => write!(f, "unavailable {label} {dirs:?}"),
            CunninghamPass { from, .. } => write!(f, "cunningham-pass from {from}"),
            CunninghamRun { from, .. } => write!(f, "cunningham-run from {from}"),
            JohnsonRun { from, .. } => write!(f, "johnson-run from {from}"),
            ZadehWalk { from, .. } => write!(f, "zadeh-walk from {from}"),
            ZadehBalances { from, .. } => write!(f, "zadeh-balances from {from}"),
            ZadehInteriorSaturation { from } => write!(f, "zadeh-interior-saturation from {from}"),
            OrientedPath(p) => write!(f, "oriented-path {}", p.join(">")),
            SingleOutgoingPath(p) => write!(f, "single-outgoing-path {}", p.join(">")),
            SharesPathEdges { peer, .. } => write!(f, "shares-path-edges with {peer}"),
            BackwardEdgesWithin(_) => write!(f, "backward-edges-within-labels"),
            BackwardEdgesExactly(_) => write!(f, "backward-edges-exactly"),
        }
    }
}

fn labels(prefix: &str, range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// The constraint suite for frame `name` of `family`.
pub fn constraint_suite(family: Family, name: &str) -> Vec<FrameConstraint> {
    use FrameConstraint::*;
    let mut c = vec![Uso, Acyclic];
    match (family, name) {
        (Family::Cunningham, _) => {
            c.push(SinkAt("H".into()));
            c.push(OutmapAt {
                label: "B".into(),
                outmap: vec![1],
            });
            c.push(CunninghamPass {
                from: "B".into(),
                visits: strs(&["B", "H"]),
            });
            match name {
                "F1" => c.push(CunninghamPass {
                    from: "box1".into(),
                    visits: labels("box", 1..=5),
                }),
                "F2" => {
                    let mut v = labels("box", 5..=10);
                    v.push("box1".into());
                    c.push(CunninghamPass {
                        from: "box5".into(),
                        visits: v,
                    });
                }
                "F3" => {
                    c.push(CunninghamPass {
                        from: "box1".into(),
                        visits: strs(&["box1", "1100", "box5", "0110", "B"]),
                    });
                    c.push(CunninghamPass {
                        from: "box5".into(),
                        visits: strs(&["box5", "0110", "B"]),
                    });
                    c.push(CunninghamRun {
                        from: "box1".into(),
                        dirs: vec![1, 3, -1, 4, 1],
                        end: "H".into(),
                    });
                }
                _ => {}
            }
        }
        (Family::Johnson, "R1") => {
            c.push(SinkAt("box3".into()));
            c.push(SingleOutgoingPath(labels("box", 1..=3)));
        }
        (Family::Johnson, _) => {
            c.push(SinkAt("H".into()));
            c.push(OutmapAt {
                label: "R".into(),
                outmap: vec![2],
            });
            match name {
                "F1" => {
                    c.push(JohnsonRun {
                        from: "box1".into(),
                        dirs: vec![1, 2, 3, 4, -3, -2],
                        end: "H".into(),
                    });
                    c.push(OrientedPath(labels("box", 1..=5)));
                }
                "F2" => {
                    let mut p = labels("box", 5..=8);
                    p.push("box1".into());
                    c.push(OrientedPath(p));
                }
                _ => {}
            }
        }
        (Family::Zadeh, "A0") => {
            c.push(SinkAt("box21".into()));
            c.push(ZadehWalk {
                from: "box1".into(),
                usage: vec![],
                cap: None,
                max_steps: None,
                visits: labels("box", 1..=21),
            });
            c.push(ZadehBalances {
                from: "box1".into(),
                imbalanced: vec![-3, -4, -5, -6],
            });
            c.push(ZadehInteriorSaturation {
                from: "box1".into(),
            });
        }
        (Family::Zadeh, _) => {
            c.push(OutmapAt {
                label: "B".into(),
                outmap: vec![4, 5, 6],
            });
            let circle_walk = ZadehWalk {
                from: "circ1".into(),
                usage: [1, -2, 3, -1, 4, -3, 5, 6, 2]
                    .iter()
                    .map(|&d| (d, 1))
                    .collect(),
                cap: Some(2),
                max_steps: None,
                visits: labels("circ", 1..=12),
            };
            let mut exit = vec!["B".to_string()];
            exit.extend(labels("circ", 7..=12));
            let exit_walk = ZadehWalk {
                from: "B".into(),
                usage: vec![(1, 1), (3, 1)],
                cap: Some(1),
                max_steps: None,
                visits: exit,
            };
            match name {
                "F1" => {
                    c.push(Available {
                        label: "box12".into(),
                        dirs: vec![-6],
                    });
                    c.push(Available {
                        label: "circ12".into(),
                        dirs: vec![-3],
                    });
                    c.push(BackwardEdgesExactly(vec![
                        ("box12".into(), "box1".into()),
                        ("circ12".into(), "circ1".into()),
                    ]));
                }
                "F2" => {
                    c.push(SinkAt("circ12".into()));
                    c.push(ZadehWalk {
                        from: "box1".into(),
                        usage: vec![],
                        cap: Some(1),
                        max_steps: None,
                        visits: labels("box", 1..=12),
                    });
                    c.push(Unavailable {
                        label: "box12".into(),
                        dirs: vec![-6],
                    });
                    c.push(circle_walk);
                    c.push(Unavailable {
                        label: "circ12".into(),
                        dirs: vec![-3],
                    });
                    c.push(exit_walk);
                    let mut all = labels("box", 1..=12);
                    all.extend(labels("circ", 1..=12));
                    c.push(BackwardEdgesWithin(all));
                }
                "F3" => {
                    c.push(SinkAt("circ12".into()));
                    c.push(circle_walk);
                    c.push(SharesPathEdges {
                        peer: "F2".into(),
                        path: labels("circ", 1..=12),
                    });
                    c.push(BackwardEdgesWithin(labels("circ", 1..=12)));
                    c.push(OutmapAt {
                        label: "box1".into(),
                        outmap: vec![1, 3, 4, 5, 6],
                    });
                    c.push(ZadehWalk {
                        from: "box1".into(),
                        usage: vec![],
                        cap: Some(1),
                        max_steps: Some(2),
                        visits: strs(&["box1", "110000", "B"]),
                    });
                    c.push(exit_walk);
                }
                _ => {}
            }
        }
    }
    c
}

type Check = Result<(), (String, Witness)>;

fn vertex_witness(spec: &FrameSpec, v: Vertex, detail: impl Into<String>) -> (String, Witness) {
    let detail = detail.into();
    (
        detail.clone(),
        Witness::Vertex {
            vertex: spec.describe(v),
            detail,
        },
    )
}

fn missing(e: FrameError) -> (String, Witness) {
    (
        e.to_string(),
        Witness::Vertex {
            vertex: String::new(),
            detail: e.to_string(),
        },
    )
}

fn local_dir(spec: &FrameSpec, x: i32) -> Direction {
    Direction::in_bundle(0, x, spec.dim)
}

fn pattern_dirs(spec: &FrameSpec) -> Vec<Direction> {
    let pattern: &[i32] = if spec.dim == 6 {
        &ZADEH_PATTERN
    } else {
        &CUNNINGHAM_PATTERN
    };
    pattern.iter().map(|&x| local_dir(spec, x)).collect()
}

fn compare_walk(spec: &FrameSpec, got: &[Vertex], want: &[String]) -> Check {
    let want_v: Vec<Vertex> = want
        .iter()
        .map(|s| spec.resolve(s))
        .collect::<Result<_, _>>()
        .map_err(missing)?;
    if got == want_v.as_slice() {
        Ok(())
    } else {
        Err((
            format!("walk visited {} vertices, expected {}", got.len(), want.len()),
            Witness::Walk {
                visited: got.iter().map(|v| spec.describe(*v)).collect(),
            },
        ))
    }
}

fn zadeh_run(spec: &FrameSpec, oracle: &TableOracle, from: &str) -> Result<(Vec<Vertex>, ZadehState), (String, Witness)> {
    let start = spec.resolve(from).map_err(missing)?;
    let mut z = ZadehState::new(pattern_dirs(spec)).expect("pattern is a permutation");
    let mut v = start;
    let mut visited = vec![v];
    let limit = 4usize << spec.dim;
    while let Some(d) = z.choose(v, oracle.outmap(v)) {
        v = v.toggled(d.coord);
        visited.push(v);
        if visited.len() > limit {
            return Err(vertex_witness(spec, v, "walk exceeded step limit"));
        }
    }
    Ok((visited, z))
}

fn check_one(
    spec: &FrameSpec,
    oracle: &TableOracle,
    constraint: &FrameConstraint,
    library: Option<&FrameLibrary>,
) -> Check {
    use FrameConstraint::*;
    let n = spec.dim;
    let structural = |r: VerificationReport| -> Check {
        match r.failures().next() {
            None => Ok(()),
            Some(c) => Err((c.detail.clone(), c.witness.clone().expect("failures carry witnesses"))),
        }
    };
    match constraint {
        Uso => structural(check_uso_exhaustive(oracle, UsoMode::GroundTruth, n).map_err(|e| missing(FrameError::Invalid(e.to_string())))?),
        Acyclic => structural(check_acyclic(oracle, n).map_err(|e| missing(FrameError::Invalid(e.to_string())))?),
        SinkAt(label) => {
            let v = spec.resolve(label).map_err(missing)?;
            let sinks: Vec<Vertex> = Face::whole(n)
                .vertices()
                .filter(|u| oracle.outmap(*u).is_empty())
                .collect();
            if sinks == [v] {
                Ok(())
            } else {
                let at = sinks.first().copied().unwrap_or(v);
                Err(vertex_witness(spec, at, format!("sink is not at {label}")))
            }
        }
        OutmapAt { label, outmap } => {
            let v = spec.resolve(label).map_err(missing)?;
            let want = outmap.iter().fold(0u64, |a, k| a | 1 << (k - 1));
            let got = oracle.outmap(v).0;
            if got == want {
                Ok(())
            } else {
                Err(vertex_witness(
                    spec,
                    v,
                    format!("outmap {} expected {}", Vertex(got).to_bitstring(n), Vertex(want).to_bitstring(n)),
                ))
            }
        }
        Available { label, dirs } | Unavailable { label, dirs } => {
            let want = matches!(constraint, Available { .. });
            let v = spec.resolve(label).map_err(missing)?;
            let out = oracle.outmap(v);
            match dirs.iter().find(|&&x| local_dir(spec, x).available_in(v, out) != want) {
                None => Ok(()),
                Some(x) => Err(vertex_witness(spec, v, format!("direction {x} availability is not {want}"))),
            }
        }
        CunninghamPass { from, visits } => {
            let mut v = spec.resolve(from).map_err(missing)?;
            let list = pattern_dirs(spec);
            let mut visited = vec![v];
            let mut marker: Option<usize> = None;
            loop {
                let out = oracle.outmap(v);
                let begin = marker.map_or(0, |m| m + 1);
                let Some(k) = (begin..list.len()).find(|&k| list[k].available_in(v, out)) else {
                    break;
                };
                marker = Some(k);
                v = v.toggled(list[k].coord);
                visited.push(v);
            }
            compare_walk(spec, &visited, visits)
        }
        CunninghamRun { from, dirs, end } => {
            let start = spec.resolve(from).map_err(missing)?;
            let mut st = CunninghamState::new(pattern_dirs(spec)).expect("pattern is a permutation");
            run_and_compare(spec, oracle, start, &mut st, dirs, end)
        }
        JohnsonRun { from, dirs, end } => {
            let start = spec.resolve(from).map_err(missing)?;
            let mut st = JohnsonState::new(n, n);
            run_and_compare(spec, oracle, start, &mut st, dirs, end)
        }
        ZadehWalk {
            from,
            usage,
            cap,
            max_steps,
            visits,
        } => {
            let mut v = spec.resolve(from).map_err(missing)?;
            let init: Vec<(Direction, u64)> = usage.iter().map(|&(x, u)| (local_dir(spec, x), u)).collect();
            let mut z = ZadehState::new(pattern_dirs(spec))
                .expect("pattern is a permutation")
                .with_usage(&init);
            let mut visited = vec![v];
            let limit = max_steps.unwrap_or(4usize << n);
            while visited.len() <= limit {
                let Some(d) = z.choose_capped(v, oracle.outmap(v), *cap) else {
                    break;
                };
                v = v.toggled(d.coord);
                visited.push(v);
            }
            compare_walk(spec, &visited, visits)
        }
        ZadehBalances { from, imbalanced } => {
            let (visited, z) = zadeh_run(spec, oracle, from)?;
            let end = *visited.last().expect("walk is non-empty");
            let want: Vec<Direction> = imbalanced.iter().map(|&x| local_dir(spec, x)).collect();
            for d in Direction::all(n) {
                let expect = u64::from(want.contains(&d));
                if z.balance_of(d, None) != expect {
                    return Err(vertex_witness(
                        spec,
                        end,
                        format!("balance of {} is {}, expected {expect}", d.label(n), z.balance_of(d, None)),
                    ));
                }
            }
            Ok(())
        }
        ZadehInteriorSaturation { from } => {
            let start = spec.resolve(from).map_err(missing)?;
            let all = Direction::all(n);
            let mut z = ZadehState::new(pattern_dirs(spec)).expect("pattern is a permutation");
            let mut v = start;
            let mut saturated = Vec::new();
            let mut i = 0usize;
            loop {
                let out = oracle.outmap(v);
                if z.is_saturated_at(v, out, &all) {
                    saturated.push(i);
                }
                let Some(d) = z.choose(v, out) else { break };
                v = v.toggled(d.coord);
                i += 1;
            }
            let interior: Vec<usize> = saturated.iter().copied().filter(|&k| k > 0 && k < i).collect();
            match interior.last() {
                Some(&last) if i - last >= 2 => Ok(()),
                _ => Err((
                    format!("saturated positions {saturated:?} of a {i}-step run"),
                    Witness::Walk {
                        visited: saturated.iter().map(|k| k.to_string()).collect(),
                    },
                )),
            }
        }
        OrientedPath(path) | SingleOutgoingPath(path) => {
            let single = matches!(constraint, SingleOutgoingPath(_));
            let vs: Vec<Vertex> = path.iter().map(|l| spec.resolve(l)).collect::<Result<_, _>>().map_err(missing)?;
            for w in vs.windows(2) {
                let diff = w[0].0 ^ w[1].0;
                let out = oracle.outmap(w[0]);
                if diff.count_ones() != 1 || out.0 & diff == 0 {
                    return Err(vertex_witness(spec, w[0], "path edge missing or not oriented along the path"));
                }
                if single && out.0 != diff {
                    return Err(vertex_witness(spec, w[0], "path vertex has more than one outgoing edge"));
                }
            }
            Ok(())
        }
        SharesPathEdges { peer, path } => {
            let lib = library.ok_or_else(|| missing(FrameError::MissingFrame { family: spec.family, name: peer.clone() }))?;
            let other = lib.get(peer).map_err(missing)?;
            for w in path.windows(2) {
                let a = spec.resolve(&w[0]).map_err(missing)?;
                let b = spec.resolve(&w[1]).map_err(missing)?;
                let a2 = other.spec.resolve(&w[0]).map_err(missing)?;
                let b2 = other.spec.resolve(&w[1]).map_err(missing)?;
                let diff = a.0 ^ b.0;
                let here = oracle.outmap(a).0 & diff;
                let there = other.oracle.outmap(a2).0 & diff;
                if a != a2 || b != b2 || here != there || diff.count_ones() != 1 {
                    return Err(vertex_witness(spec, a, format!("edge {}>{} differs from {peer}", w[0], w[1])));
                }
            }
            Ok(())
        }
        BackwardEdgesWithin(names) => {
            let set: BTreeSet<Vertex> = names.iter().map(|l| spec.resolve(l)).collect::<Result<_, _>>().map_err(missing)?;
            match spec
                .backward_edges
                .iter()
                .find(|(v, k)| !set.contains(v) || !set.contains(&v.toggled(*k)))
            {
                None => Ok(()),
                Some((v, k)) => Err(vertex_witness(spec, *v, format!("backward edge on coordinate {} leaves the labelled path", k + 1))),
            }
        }
        BackwardEdgesExactly(pairs) => {
            let mut want = BTreeSet::new();
            for (tail, head) in pairs {
                let t = spec.resolve(tail).map_err(missing)?;
                let h = spec.resolve(head).map_err(missing)?;
                let diff = t.0 ^ h.0;
                if diff.count_ones() != 1 || h.0 & diff != 0 {
                    return Err(vertex_witness(spec, t, format!("{tail}>{head} is not a backward edge")));
                }
                want.insert((h, diff.trailing_zeros() as usize));
            }
            let got: BTreeSet<(Vertex, usize)> = spec.backward_edges.iter().copied().collect();
            if got == want {
                Ok(())
            } else {
                let extra = got.symmetric_difference(&want).next().expect("sets differ");
                Err(vertex_witness(spec, extra.0, "backward edge set differs"))
            }
        }
    }
}

fn run_and_compare<R: PivotRule>(
    spec: &FrameSpec,
    oracle: &TableOracle,
    start: Vertex,
    rule: &mut R,
    dirs: &[i32],
    end: &str,
) -> Check {
    let mut v = start;
    let mut got = Vec::new();
    let mut visited = vec![v];
    while let Some(d) = rule.choose(v, oracle.outmap(v)) {
        got.push(d);
        v = v.toggled(d.coord);
        visited.push(v);
        if got.len() > 4 << spec.dim {
            break;
        }
    }
    let want: Vec<Direction> = dirs.iter().map(|&x| local_dir(spec, x)).collect();
    let end_v = spec.resolve(end).map_err(missing)?;
    if got == want && v == end_v {
        Ok(())
    } else {
        Err((
            format!(
                "directions {:?}",
                got.iter().map(|d| d.label(spec.dim)).collect::<Vec<_>>()
            ),
            Witness::Walk {
                visited: visited.iter().map(|x| spec.describe(*x)).collect(),
            },
        ))
    }
}

/// Runs the family's constraint suite for `frame`. Cross-frame constraints
/// look up peers in `library`.
pub fn validate_frame(frame: &LoadedFrame, library: Option<&FrameLibrary>) -> VerificationReport {
    let spec = &frame.spec;
    let mut report = VerificationReport::new(format!("frame:{}/{}", spec.family, spec.name));
    let start = std::time::Instant::now();
    for constraint in constraint_suite(spec.family, &spec.name) {
        let name = format!("{}/{}: {constraint}", spec.family, spec.name);
        report.push(match check_one(spec, &frame.oracle, &constraint, library) {
            Ok(()) => CheckResult::pass(name, "ok"),
            Err((detail, witness)) => CheckResult::fail(name, detail, witness),
        });
    }
    report.elapsed_ms = start.elapsed().as_millis() as u64;
    report
}
