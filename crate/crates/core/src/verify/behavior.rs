use serde::{Deserialize, Serialize};

use super::{CheckResult, VerificationReport, Witness};
use crate::constructions::ConstructionLevel;
use crate::cube::{Direction, Oracle, Vertex};
use crate::frames::Family;
use crate::pivot::Trace;

/// Path length of one built level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelLength {
    pub level: usize,
    pub dim: usize,
    pub length: usize,
}

/// One row of the growth table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub level: usize,
    pub n: usize,
    pub length: usize,
    /// `floor(2^(n / B))`.
    pub bound: u64,
    /// `length / previous length`.
    pub ratio: Option<f64>,
    /// Set when the row violates the recursion or the bound.
    pub flagged: bool,
}

/// `length >= 2^(n/b)`, compared exactly as `length^b >= 2^n`.
fn meets_bound(length: usize, n: usize, b: usize) -> bool {
    match (length as u128).checked_pow(b as u32) {
        Some(p) => n >= 128 || p >= 1u128 << n,
        None => true,
    }
}

fn doubles(prev: usize, next: usize) -> bool {
    next > 2 * prev
}

pub fn growth_rows(lengths: &[LevelLength], family: Family) -> Vec<GrowthRow> {
    let b = family.bundle_size();
    lengths
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let prev = k.checked_sub(1).map(|p| lengths[p].length);
            GrowthRow {
                level: l.level,
                n: l.dim,
                length: l.length,
                bound: 1u64 << (l.dim / b),
                ratio: prev.map(|p| l.length as f64 / p as f64),
                flagged: !meets_bound(l.length, l.dim, b) || prev.is_some_and(|p| !doubles(p, l.length)),
            }
        })
        .collect()
}

/// `|P_{i+1}| > 2|P_i|` for consecutive levels and `|P_i| >= 2^(n/B)`.
pub fn check_growth(lengths: &[LevelLength], family: Family) -> VerificationReport {
    VerificationReport::timed("growth", |r| {
        let b = family.bundle_size();
        for l in lengths {
            let name = format!("bound level {}", l.level);
            if meets_bound(l.length, l.dim, b) {
                r.push(CheckResult::pass(
                    name,
                    format!("|P| = {} >= 2^({}/{b})", l.length, l.dim),
                ));
            } else {
                r.push(CheckResult::fail(
                    name,
                    format!("|P| = {} < 2^({}/{b})", l.length, l.dim),
                    Witness::Level {
                        level: l.level,
                        detail: format!("length {}", l.length),
                    },
                ));
            }
        }
        for w in lengths.windows(2) {
            let name = format!("recursion {}->{}", w[0].level, w[1].level);
            if w[1].level != w[0].level + 1 {
                r.push(CheckResult::fail(
                    name,
                    "levels are not consecutive",
                    Witness::Level {
                        level: w[1].level,
                        detail: format!("follows level {}", w[0].level),
                    },
                ));
            } else if doubles(w[0].length, w[1].length) {
                r.push(CheckResult::pass(
                    name,
                    format!("{} > 2 * {}", w[1].length, w[0].length),
                ));
            } else {
                r.push(CheckResult::fail(
                    name,
                    format!("{} <= 2 * {}", w[1].length, w[0].length),
                    Witness::Level {
                        level: w[1].level,
                        detail: format!("length {} after {}", w[1].length, w[0].length),
                    },
                ));
            }
        }
    })
}

/// Runs the family's behavioral suite on a trace of `level`.
pub fn check_trace_properties(level: &ConstructionLevel, trace: &Trace) -> VerificationReport {
    VerificationReport::timed("trace-properties", |r| {
        check_common(level, trace, r);
        if level.level > 0 {
            r.push(projection(level, trace));
        }
        match level.family {
            Family::Zadeh => zadeh_properties(level, trace, r),
            Family::Johnson => johnson_properties(level, trace, r),
            Family::Cunningham => {}
        }
    })
}

fn bits(v: Vertex, n: usize) -> String {
    v.to_bitstring(n)
}

fn check_common(level: &ConstructionLevel, trace: &Trace, r: &mut VerificationReport) {
    let n = level.dim();
    let mut bad = None;
    let mut v = level.start;
    if trace.start != level.start {
        bad = Some((0, "trace does not start at the level's start vertex".to_string()));
    }
    for s in &trace.steps {
        if bad.is_some() {
            break;
        }
        let out = level.oracle.outmap(s.vertex);
        if s.vertex != v {
            bad = Some((s.t, "step does not continue from the previous vertex".into()));
        } else if !s.dir.available_in(s.vertex, out) {
            bad = Some((s.t, format!("{} is not outgoing", s.dir.label(level.bundle_size()))));
        }
        v = s.vertex.toggled(s.dir.coord);
    }
    if bad.is_none() && (v != trace.end || !level.oracle.outmap(v).is_empty()) {
        bad = Some((trace.len(), "trace does not end at a sink".into()));
    }
    r.push(match bad {
        None => CheckResult::pass("trace consistency", format!("{} steps", trace.len())),
        Some((step, detail)) => CheckResult::fail(
            "trace consistency",
            detail.clone(),
            Witness::Step { step, detail },
        ),
    });
    let name = "expected sink";
    if trace.end == level.expected_sink {
        r.push(CheckResult::pass(name, bits(trace.end, n)));
    } else {
        r.push(CheckResult::fail(
            name,
            format!("expected {}", bits(level.expected_sink, n)),
            Witness::Vertex {
                vertex: bits(trace.end, n),
                detail: "actual end".into(),
            },
        ));
    }
}

/// The inner-direction subsequence, without moves inside the gadget face,
/// is `P_{i-1}` twice.
fn projection(level: &ConstructionLevel, trace: &Trace) -> CheckResult {
    let n_in = level.inner_dim();
    let face = level.gadget.as_ref().map(|g| g.face);
    let projected: Vec<Direction> = trace
        .steps
        .iter()
        .filter(|s| s.dir.coord < n_in)
        .filter(|s| !face.is_some_and(|f| f.contains(s.vertex)))
        .map(|s| s.dir)
        .collect();
    let p = &level.inner_path;
    let expected: Vec<Direction> = p.iter().chain(p.iter()).copied().collect();
    if projected == expected {
        return CheckResult::pass("projection", format!("P_{} traversed twice", level.level - 1));
    }
    let at = projected
        .iter()
        .zip(&expected)
        .position(|(a, b)| a != b)
        .unwrap_or(projected.len().min(expected.len()));
    CheckResult::fail(
        "projection",
        format!(
            "{} projected inner moves, expected {}",
            projected.len(),
            expected.len()
        ),
        Witness::Step {
            step: at,
            detail: "first mismatching projected move".into(),
        },
    )
}

/// Usage counts before each step (index k: before step k+1), and at the end.
fn usage_prefixes(trace: &Trace) -> Vec<Vec<u64>> {
    let mut u = vec![0u64; 2 * trace.dim];
    let mut out = Vec::with_capacity(trace.len() + 1);
    out.push(u.clone());
    for s in &trace.steps {
        u[s.dir.slot()] += 1;
        out.push(u.clone());
    }
    out
}

fn balances(usage: &[u64]) -> Vec<u64> {
    let max = usage.iter().copied().max().unwrap_or(0);
    usage.iter().map(|&x| max - x).collect()
}

fn zadeh_properties(level: &ConstructionLevel, trace: &Trace, r: &mut VerificationReport) {
    let n = level.dim();
    let b = level.bundle_size();
    let usage = usage_prefixes(trace);
    let vertices = trace.vertices();

    // (iii): exactly the directions -c_j^3..-c_j^6 end with balance 1.
    let fin = balances(usage.last().expect("non-empty"));
    let imbalanced = |d: Direction| !d.is_positive() && d.coord % b >= 2;
    let wrong: Vec<String> = Direction::all(n)
        .into_iter()
        .filter(|d| fin[d.slot()] != u64::from(imbalanced(*d)))
        .map(|d| format!("{}={}", d.label(b), fin[d.slot()]))
        .collect();
    r.push(if wrong.is_empty() {
        CheckResult::pass(
            "zadeh final balances",
            format!("{} negative directions with balance 1", 4 * (level.level + 1)),
        )
    } else {
        CheckResult::fail(
            "zadeh final balances",
            format!("unexpected balances: {}", wrong.join(", ")),
            Witness::Vertex {
                vertex: bits(trace.end, n),
                detail: wrong.join(", "),
            },
        )
    });

    // Saturation at each visited vertex before it is left.
    let saturated: Vec<usize> = (0..trace.len())
        .filter(|&k| {
            let bal = balances(&usage[k]);
            let v = vertices[k];
            let out = level.oracle.outmap(v);
            !Direction::all(n)
                .into_iter()
                .any(|d| bal[d.slot()] > 0 && d.available_in(v, out))
        })
        .collect();
    let end = trace.len();

    // (i): an interior saturated vertex, the last one at least two steps before the sink.
    let interior: Vec<usize> = saturated.iter().copied().filter(|&k| k > 0).collect();
    let name = "zadeh saturated interior";
    match interior.last() {
        Some(&last) if last + 2 <= end => r.push(CheckResult::pass(
            name,
            format!("saturated at positions {saturated:?}, sink at {end}"),
        )),
        Some(&last) => r.push(CheckResult::fail(
            name,
            "last saturated vertex is adjacent to the sink",
            Witness::Step {
                step: last,
                detail: bits(vertices[last], n),
            },
        )),
        None => r.push(CheckResult::fail(
            name,
            "no interior saturated vertex",
            Witness::Walk {
                visited: vertices.iter().map(|v| bits(*v, n)).collect(),
            },
        )),
    }

    // (ii): between consecutive saturated vertices each direction is used at
    // most once among ordinary moves and at most once among balance-gadget moves.
    let gadget = gadget_predicate(level);
    let mut marks = saturated.clone();
    marks.push(end);
    let mut violation = None;
    'segments: for w in marks.windows(2) {
        let mut seen = vec![[false; 2]; 2 * n];
        for s in &trace.steps[w[0]..w[1]] {
            let class = usize::from(gadget(s.vertex, s.dir));
            if std::mem::replace(&mut seen[s.dir.slot()][class], true) {
                violation = Some((s.t, s.dir));
                break 'segments;
            }
        }
    }
    r.push(match violation {
        None => CheckResult::pass(
            "zadeh segment reuse",
            format!("{} saturated segments", marks.len() - 1),
        ),
        Some((step, d)) => CheckResult::fail(
            "zadeh segment reuse",
            format!("{} repeated before the next saturated vertex", d.label(b)),
            Witness::Step {
                step,
                detail: d.label(b),
            },
        ),
    });
}

/// Whether a move at `v` along `d` lies inside the gadget face of some
/// level `1..=i` (inner coordinates, outer bundle at the gadget position).
fn gadget_predicate(level: &ConstructionLevel) -> impl Fn(Vertex, Direction) -> bool {
    let b = level.bundle_size();
    let position = level.gadget.as_ref().map(|g| g.position.0);
    let top = level.level;
    move |v: Vertex, d: Direction| {
        position.is_some_and(|p| {
            (1..=top).any(|j| (v.0 >> (b * j)) & ((1 << b) - 1) == p && d.coord < b * j)
        })
    }
}

/// `h` as the rule sees it when choosing at position `k`, rebuilt from the
/// visited vertices alone.
fn johnson_history(vertices: &[Vertex], n: usize, k: usize) -> Vec<u64> {
    let mut h = vec![0u64; 2 * n];
    for (x, v) in vertices[..=k].iter().enumerate() {
        for c in 0..n {
            let slot = if v.contains(c) { 2 * c } else { 2 * c + 1 };
            h[slot] = x as u64 + 1;
        }
    }
    h
}

fn bundle_mask(j: usize, b: usize) -> u64 {
    ((1u64 << b) - 1) << (j * b)
}

fn prefix_mask(j: usize, b: usize) -> u64 {
    (1u64 << ((j + 1) * b)) - 1
}

/// `{c^1, c^4}` in every bundle `0..=j`.
fn subtoken_sink(j: usize) -> u64 {
    (0..=j).fold(0, |acc, k| acc | 0b1001 << (4 * k))
}

fn johnson_properties(level: &ConstructionLevel, trace: &Trace, r: &mut VerificationReport) {
    let n = level.dim();
    let b = 4;
    let i = level.level;
    let vertices = trace.vertices();
    let dirs = trace.directions();
    let outs: Vec<u64> = vertices.iter().map(|v| level.oracle.outmap(*v).0).collect();

    // Lexicographic sweeps.
    let mut checked = 0;
    let mut fail = None;
    'sweep: for j in 0..=i {
        let lex: Vec<Direction> = (0..4 * (j + 1)).map(Direction::plus).collect();
        let pm = prefix_mask(j, b);
        for (k, v) in vertices.iter().enumerate() {
            if v.0 & pm != 0 {
                continue;
            }
            checked += 1;
            let used: Vec<Direction> = dirs[k..]
                .iter()
                .filter(|d| d.is_positive() && d.coord < 4 * (j + 1))
                .take(lex.len())
                .copied()
                .collect();
            if used != lex {
                fail = Some((k, j));
                break 'sweep;
            }
        }
    }
    r.push(match fail {
        None => CheckResult::pass("johnson lexicographic sweep", format!("{checked} applicable positions")),
        Some((k, j)) => CheckResult::fail(
            "johnson lexicographic sweep",
            format!("positive moves of bundles 0..={j} leave lexicographic order"),
            Witness::Step {
                step: k,
                detail: bits(vertices[k], n),
            },
        ),
    });

    // Four-move bundle blocks.
    let mut checked = 0;
    let mut fail = None;
    'cor4: for bundle in 0..=i {
        let bm = bundle_mask(bundle, b);
        for k in 0..trace.len() {
            let t = vertices[k].0 & bm;
            let active = outs[k] & bm != 0;
            if !active || (t != 0 && t != bm) || (bundle == 0 && k > 0) {
                continue;
            }
            let Some(first) = (k..trace.len()).find(|&x| dirs[x].coord / b == bundle) else {
                continue;
            };
            let positive = t == 0;
            if !positive {
                if bundle == 0 {
                    continue;
                }
                let below = prefix_mask(bundle - 1, b);
                if vertices[first].0 & below == subtoken_sink(bundle - 1) {
                    continue;
                }
            }
            checked += 1;
            let want: Vec<Direction> = (0..4)
                .map(|x| {
                    let c = bundle * b + x;
                    if positive {
                        Direction::plus(c)
                    } else {
                        Direction::minus(c)
                    }
                })
                .collect();
            if dirs.get(first..first + 4) != Some(&want[..]) {
                fail = Some((first, bundle, positive));
                break 'cor4;
            }
        }
    }
    r.push(match fail {
        None => CheckResult::pass("johnson bundle blocks", format!("{checked} applicable positions")),
        Some((step, bundle, positive)) => CheckResult::fail(
            "johnson bundle blocks",
            format!(
                "{} moves of bundle {bundle} are not consecutive",
                if positive { "positive" } else { "negative" }
            ),
            Witness::Step {
                step,
                detail: bits(vertices[step], n),
            },
        ),
    });

    // History when a bundle reaches its sink.
    let mut checked = 0;
    let mut fail = None;
    'history: for j in 0..i {
        let pm = prefix_mask(j, b);
        let sink = subtoken_sink(j);
        let next = bundle_mask(j + 1, b);
        for k in 0..vertices.len() {
            let reached = vertices[k].0 & pm == sink && (k == 0 || vertices[k - 1].0 & pm != sink);
            if !reached || outs[k] & next == 0 {
                continue;
            }
            checked += 1;
            let h = johnson_history(&vertices, n, k);
            let hm = |c: usize| h[Direction::minus(c).slot()];
            for jp in 0..=j {
                let (a, z, w) = (hm(4 * jp), hm(4 * jp + 3), hm(4 * (jp + 1) + 1));
                if !(a < z && z < w) {
                    fail = Some((k, j, jp, a, z, w));
                    break 'history;
                }
            }
        }
    }
    r.push(match fail {
        None => CheckResult::pass("johnson history at sink", format!("{checked} applicable positions")),
        Some((k, j, jp, a, z, w)) => CheckResult::fail(
            "johnson history at sink",
            format!("C_{j}+ not resettable: bundle {jp} has h values {a}, {z}, {w}"),
            Witness::Step {
                step: k,
                detail: bits(vertices[k], n),
            },
        ),
    });

    // Reset: one contiguous run inside the gadget along (-c_0^1, -c_0^4, ...).
    if let Some(g) = level.gadget.as_ref() {
        let inside: Vec<usize> = (0..trace.len())
            .filter(|&k| dirs[k].coord < level.inner_dim() && g.face.contains(vertices[k]))
            .collect();
        let want: Vec<Direction> = (0..i)
            .flat_map(|j| [Direction::minus(4 * j), Direction::minus(4 * j + 3)])
            .collect();
        let got: Vec<Direction> = inside.iter().map(|&k| dirs[k]).collect();
        let contiguous = inside.windows(2).all(|w| w[1] == w[0] + 1);
        r.push(if contiguous && got == want {
            CheckResult::pass("johnson reset", format!("one reset of {} moves", want.len()))
        } else {
            CheckResult::fail(
                "johnson reset",
                format!("{} moves inside the reset face", got.len()),
                Witness::Step {
                    step: inside.first().copied().unwrap_or(0),
                    detail: got.iter().map(|d| d.label(b)).collect::<Vec<_>>().join(" "),
                },
            )
        });
    }
}
