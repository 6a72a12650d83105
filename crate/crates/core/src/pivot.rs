//! History-based pivot rules (Cunningham, Johnson, Zadeh) as deterministic
//! steppers, plus trace recording and history inspectors.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cube::{Direction, Oracle, Outmap, Vertex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PivotError {
    #[error("sink reached")]
    SinkReached,
    #[error("step limit {limit} exceeded")]
    StepLimitExceeded { limit: u64 },
    #[error("oracle inconsistency on coordinate {coord} at vertex {vertex:#b}")]
    OracleInconsistency { vertex: u64, coord: usize },
    #[error("tie list is not a permutation of all {expected} directions")]
    BadTieList { expected: usize },
}

/// History recorded alongside a trace step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Snapshot {
    /// Cunningham: 0-based marker position in the list.
    Marker(usize),
    /// Johnson / Zadeh: one value per direction slot (see [`Direction::slot`]).
    Table(Vec<u64>),
}

impl Snapshot {
    pub fn value(&self, d: Direction) -> Option<u64> {
        match self {
            Snapshot::Table(t) => t.get(d.slot()).copied(),
            Snapshot::Marker(_) => None,
        }
    }

    /// Marker as `{"mu": m}` (1-based) or a table keyed by direction label.
    pub fn to_json(&self, bundle_size: usize) -> Value {
        match self {
            Snapshot::Marker(m) => json!({ "mu": m + 1 }),
            Snapshot::Table(t) => {
                let mut map = Map::new();
                for (slot, val) in t.iter().enumerate() {
                    map.insert(Direction::from_slot(slot).label(bundle_size), json!(val));
                }
                Value::Object(map)
            }
        }
    }
}

/// A deterministic pivot rule with internal history.
pub trait PivotRule {
    /// Picks the next direction at `v` (with outmap `out`), or `None` at the sink.
    fn choose(&mut self, v: Vertex, out: Outmap) -> Option<Direction>;

    /// Current history.
    fn history(&self) -> Snapshot;

    /// History recorded for the step that moved the token to `arrived`.
    fn step_snapshot(&self, _arrived: Vertex) -> Snapshot {
        self.history()
    }

    fn name(&self) -> &'static str;

    /// One move: returns the chosen direction and the new vertex.
    fn step<O: Oracle + ?Sized>(
        &mut self,
        oracle: &O,
        v: Vertex,
    ) -> Result<(Direction, Vertex), PivotError>
    where
        Self: Sized,
    {
        let d = self
            .choose(v, oracle.outmap(v))
            .ok_or(PivotError::SinkReached)?;
        Ok((d, v.toggled(d.coord)))
    }
}

fn rank_table(order: &[Direction], n: usize) -> Result<Vec<usize>, PivotError> {
    let mut rank = vec![usize::MAX; 2 * n];
    if order.len() != 2 * n {
        return Err(PivotError::BadTieList { expected: 2 * n });
    }
    for (i, d) in order.iter().enumerate() {
        if d.coord >= n || rank[d.slot()] != usize::MAX {
            return Err(PivotError::BadTieList { expected: 2 * n });
        }
        rank[d.slot()] = i;
    }
    Ok(rank)
}

/// Cunningham's least-recently-considered rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CunninghamState {
    list: Vec<Direction>,
    marker: usize,
}

impl CunninghamState {
    pub fn new(list: Vec<Direction>) -> Result<Self, PivotError> {
        let n = list.len() / 2;
        rank_table(&list, n)?;
        let marker = list.len() - 1;
        Ok(CunninghamState { list, marker })
    }

    pub fn list(&self) -> &[Direction] {
        &self.list
    }

    /// 0-based marker; `list()[marker()]` is the last direction used.
    pub fn marker(&self) -> usize {
        self.marker
    }
}

impl PivotRule for CunninghamState {
    fn choose(&mut self, v: Vertex, out: Outmap) -> Option<Direction> {
        let len = self.list.len();
        for j in 1..=len {
            let k = (self.marker + j) % len;
            let d = self.list[k];
            if d.available_in(v, out) {
                self.marker = k;
                return Some(d);
            }
        }
        None
    }

    fn history(&self) -> Snapshot {
        Snapshot::Marker(self.marker)
    }

    fn name(&self) -> &'static str {
        "cunningham"
    }
}

/// How Johnson snapshots are recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SnapshotMode {
    /// Apply the update phase at the arrival vertex with the same step number.
    #[default]
    ArrivalUpdate,
    /// Record the table as it stood when the direction was chosen.
    Raw,
}

/// Johnson's least-recently-basic rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JohnsonState {
    h: Vec<u64>,
    t: u64,
    rank: Vec<usize>,
    mode: SnapshotMode,
}

impl JohnsonState {
    /// Lexicographic tie order: smaller bundle first, positive before
    /// negative, smaller index first.
    pub fn lexicographic_order(n: usize, bundle_size: usize) -> Vec<Direction> {
        let mut dirs = Direction::all(n);
        dirs.sort_by_key(|d| {
            (
                d.coord / bundle_size,
                !d.is_positive(),
                d.coord % bundle_size,
            )
        });
        dirs
    }

    pub fn new(n: usize, bundle_size: usize) -> Self {
        Self::with_order(n, &Self::lexicographic_order(n, bundle_size))
            .expect("lexicographic order is a permutation")
    }

    pub fn with_order(n: usize, order: &[Direction]) -> Result<Self, PivotError> {
        Ok(JohnsonState {
            h: vec![0; 2 * n],
            t: 1,
            rank: rank_table(order, n)?,
            mode: SnapshotMode::default(),
        })
    }

    pub fn with_mode(mut self, mode: SnapshotMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn table(&self) -> &[u64] {
        &self.h
    }

    pub fn h(&self, d: Direction) -> u64 {
        self.h[d.slot()]
    }

    pub fn step_counter(&self) -> u64 {
        self.t
    }

    fn update(h: &mut [u64], v: Vertex, t: u64) {
        let n = h.len() / 2;
        for c in 0..n {
            if v.contains(c) {
                h[2 * c] = t;
            } else {
                h[2 * c + 1] = t;
            }
        }
    }
}

impl PivotRule for JohnsonState {
    fn choose(&mut self, v: Vertex, out: Outmap) -> Option<Direction> {
        Self::update(&mut self.h, v, self.t);
        let mut best: Option<Direction> = None;
        for c in out.coords() {
            let d = if v.contains(c) {
                Direction::minus(c)
            } else {
                Direction::plus(c)
            };
            best = match best {
                Some(b)
                    if (self.h[b.slot()], self.rank[b.slot()])
                        <= (self.h[d.slot()], self.rank[d.slot()]) =>
                {
                    Some(b)
                }
                _ => Some(d),
            };
        }
        if best.is_some() {
            self.t += 1;
        }
        best
    }

    fn history(&self) -> Snapshot {
        Snapshot::Table(self.h.clone())
    }

    fn step_snapshot(&self, arrived: Vertex) -> Snapshot {
        let mut h = self.h.clone();
        if self.mode == SnapshotMode::ArrivalUpdate {
            Self::update(&mut h, arrived, self.t - 1);
        }
        Snapshot::Table(h)
    }

    fn name(&self) -> &'static str {
        "johnson"
    }
}

/// Zadeh's least-entered rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZadehState {
    usage: Vec<u64>,
    tie_list: Vec<Direction>,
}

impl ZadehState {
    pub fn new(tie_list: Vec<Direction>) -> Result<Self, PivotError> {
        let n = tie_list.len() / 2;
        rank_table(&tie_list, n)?;
        Ok(ZadehState {
            usage: vec![0; 2 * n],
            tie_list,
        })
    }

    pub fn with_usage(mut self, usage: &[(Direction, u64)]) -> Self {
        for (d, u) in usage {
            self.usage[d.slot()] = *u;
        }
        self
    }

    pub fn usage(&self, d: Direction) -> u64 {
        self.usage[d.slot()]
    }

    pub fn usage_table(&self) -> &[u64] {
        &self.usage
    }

    pub fn tie_list(&self) -> &[Direction] {
        &self.tie_list
    }

    /// `b(d)` relative to the most-used direction of `scope` (all directions by default).
    pub fn balance_of(&self, d: Direction, scope: Option<&[Direction]>) -> u64 {
        let max = match scope {
            Some(s) => s.iter().map(|x| self.usage(*x)).max().unwrap_or(0),
            None => self.usage.iter().copied().max().unwrap_or(0),
        };
        max.saturating_sub(self.usage(d))
    }

    /// True iff no direction of `dirs` with positive balance is available at `v`.
    pub fn is_saturated_at(&self, v: Vertex, out: Outmap, dirs: &[Direction]) -> bool {
        let max = self.usage.iter().copied().max().unwrap_or(0);
        dirs.iter()
            .all(|d| self.usage(*d) >= max || !d.available_in(v, out))
    }

    /// Like [`PivotRule::choose`] but ignores directions whose usage reached `cap`.
    pub fn choose_capped(&mut self, v: Vertex, out: Outmap, cap: Option<u64>) -> Option<Direction> {
        let mut best: Option<Direction> = None;
        for &d in &self.tie_list {
            if !d.available_in(v, out) {
                continue;
            }
            let u = self.usage[d.slot()];
            if cap.is_some_and(|c| u >= c) {
                continue;
            }
            if best.is_none_or(|b| u < self.usage[b.slot()]) {
                best = Some(d);
            }
        }
        if let Some(d) = best {
            self.usage[d.slot()] += 1;
        }
        best
    }
}

impl PivotRule for ZadehState {
    fn choose(&mut self, v: Vertex, out: Outmap) -> Option<Direction> {
        self.choose_capped(v, out, None)
    }

    fn history(&self) -> Snapshot {
        Snapshot::Table(self.usage.clone())
    }

    fn name(&self) -> &'static str {
        "zadeh"
    }
}

pub fn is_saturated<O: Oracle + ?Sized>(
    oracle: &O,
    v: Vertex,
    st: &ZadehState,
    dirs: &[Direction],
) -> bool {
    st.is_saturated_at(v, oracle.outmap(v), dirs)
}

/// Any of the three rules, selected at runtime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleState {
    Cunningham(CunninghamState),
    Johnson(JohnsonState),
    Zadeh(ZadehState),
}

impl PivotRule for RuleState {
    fn choose(&mut self, v: Vertex, out: Outmap) -> Option<Direction> {
        match self {
            RuleState::Cunningham(s) => s.choose(v, out),
            RuleState::Johnson(s) => s.choose(v, out),
            RuleState::Zadeh(s) => s.choose(v, out),
        }
    }

    fn history(&self) -> Snapshot {
        match self {
            RuleState::Cunningham(s) => s.history(),
            RuleState::Johnson(s) => s.history(),
            RuleState::Zadeh(s) => s.history(),
        }
    }

    fn step_snapshot(&self, arrived: Vertex) -> Snapshot {
        match self {
            RuleState::Cunningham(s) => s.step_snapshot(arrived),
            RuleState::Johnson(s) => s.step_snapshot(arrived),
            RuleState::Zadeh(s) => s.step_snapshot(arrived),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            RuleState::Cunningham(s) => s.name(),
            RuleState::Johnson(s) => s.name(),
            RuleState::Zadeh(s) => s.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    /// 1-based step number.
    pub t: usize,
    /// Vertex before the move.
    pub vertex: Vertex,
    pub dir: Direction,
    pub history: Option<Snapshot>,
}

/// The token's path from `start` to the sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub dim: usize,
    pub start: Vertex,
    pub end: Vertex,
    pub steps: Vec<TraceStep>,
    /// History at the sink (after the terminating update for Johnson).
    pub final_history: Option<Snapshot>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.steps.iter().map(|s| s.dir).collect()
    }

    /// Vertices visited, including start and end.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut vs: Vec<Vertex> = self.steps.iter().map(|s| s.vertex).collect();
        vs.push(self.end);
        vs
    }

    /// Writes one JSON record per step and a final record with sink and length.
    pub fn write_jsonl<W: Write>(&self, mut w: W, bundle_size: usize) -> io::Result<()> {
        for s in &self.steps {
            let mut rec = Map::new();
            rec.insert("t".into(), json!(s.t));
            rec.insert("vertex".into(), json!(s.vertex.to_bitstring(self.dim)));
            rec.insert("dir".into(), json!(s.dir.label(bundle_size)));
            if let Some(h) = &s.history {
                rec.insert("h".into(), h.to_json(bundle_size));
            }
            writeln!(w, "{}", Value::Object(rec))?;
        }
        let mut fin = Map::new();
        fin.insert("sink".into(), json!(self.end.to_bitstring(self.dim)));
        fin.insert("length".into(), json!(self.len()));
        if let Some(h) = &self.final_history {
            fin.insert("h".into(), h.to_json(bundle_size));
        }
        writeln!(w, "{}", Value::Object(fin))
    }

    pub fn to_jsonl(&self, bundle_size: usize) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf, bundle_size)
            .expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

/// When to record per-step history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SnapshotPolicy {
    Off,
    On,
    /// On for dimension at most 16.
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Defaults to `4 * 2^n`.
    pub step_limit: Option<u64>,
    pub snapshots: SnapshotPolicy,
}

impl RunOptions {
    pub fn with_snapshots(mut self, policy: SnapshotPolicy) -> Self {
        self.snapshots = policy;
        self
    }

    fn limit(&self, n: usize) -> u64 {
        self.step_limit
            .unwrap_or_else(|| 4u64.saturating_mul(1u64.checked_shl(n as u32).unwrap_or(u64::MAX)))
    }

    fn record(&self, n: usize) -> bool {
        match self.snapshots {
            SnapshotPolicy::Off => false,
            SnapshotPolicy::On => true,
            SnapshotPolicy::Auto => n <= 16,
        }
    }
}

pub fn run_to_sink<O: Oracle + ?Sized, R: PivotRule>(
    oracle: &O,
    start: Vertex,
    rule: &mut R,
    opts: RunOptions,
) -> Result<Trace, PivotError> {
    run_with_hook(oracle, start, rule, opts, |_, _, _| Ok::<(), PivotError>(()))
}

/// Runs `rule` to the sink, calling `hook(v, previous_direction, rule)` on
/// every vertex before it is evaluated.
pub fn run_with_hook<O, R, E, F>(
    oracle: &O,
    start: Vertex,
    rule: &mut R,
    opts: RunOptions,
    mut hook: F,
) -> Result<Trace, E>
where
    O: Oracle + ?Sized,
    R: PivotRule,
    E: From<PivotError>,
    F: FnMut(Vertex, Option<Direction>, &R) -> Result<(), E>,
{
    let n = oracle.dim();
    let limit = opts.limit(n);
    let record = opts.record(n);
    let mut steps = Vec::new();
    let mut v = start;
    let mut prev: Option<Direction> = None;
    loop {
        hook(v, prev, rule)?;
        let out = oracle.outmap(v);
        if let Some(p) = prev {
            if out.contains(p.coord) {
                return Err(PivotError::OracleInconsistency {
                    vertex: v.0,
                    coord: p.coord,
                }
                .into());
            }
        }
        let Some(d) = rule.choose(v, out) else {
            let final_history = record.then(|| rule.history());
            return Ok(Trace {
                dim: n,
                start,
                end: v,
                steps,
                final_history,
            });
        };
        if steps.len() as u64 >= limit {
            return Err(PivotError::StepLimitExceeded { limit }.into());
        }
        let next = v.toggled(d.coord);
        steps.push(TraceStep {
            t: steps.len() + 1,
            vertex: v,
            dir: d,
            history: record.then(|| rule.step_snapshot(next)),
        });
        prev = Some(d);
        v = next;
    }
}

/// Final Zadeh balances keyed by direction label, for reports.
pub fn balances_by_label(st: &ZadehState, bundle_size: usize) -> BTreeMap<String, u64> {
    st.tie_list()
        .iter()
        .map(|d| (d.label(bundle_size), st.balance_of(*d, None)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::UniformOracle;

    #[test]
    fn zadeh_uniform_square_uses_tie_list() {
        let o = UniformOracle::new(2, Vertex::EMPTY);
        let tie = vec![
            Direction::plus(0),
            Direction::minus(0),
            Direction::plus(1),
            Direction::minus(1),
        ];
        let mut z = ZadehState::new(tie).unwrap();
        let tr = run_to_sink(&o, Vertex(0b11), &mut z, RunOptions::default()).unwrap();
        assert_eq!(tr.directions(), vec![Direction::minus(0), Direction::minus(1)]);
        assert_eq!(z.usage_table().iter().sum::<u64>(), 2);
    }

    #[test]
    fn fresh_balances_are_zero() {
        let z = ZadehState::new(Direction::all(3)).unwrap();
        for d in Direction::all(3) {
            assert_eq!(z.balance_of(d, None), 0);
        }
        assert!(z.is_saturated_at(Vertex(5), Outmap(7), &Direction::all(3)));
    }

    #[test]
    fn bad_tie_lists_rejected() {
        assert!(ZadehState::new(vec![Direction::plus(0), Direction::plus(0)]).is_err());
        assert!(CunninghamState::new(vec![Direction::plus(0)]).is_err());
    }

    #[test]
    fn cunningham_marker_tracks_last_direction() {
        let o = UniformOracle::new(3, Vertex::EMPTY);
        let mut c = CunninghamState::new(Direction::all(3)).unwrap();
        assert_eq!(c.marker(), 5);
        let mut v = Vertex(0b111);
        while let Ok((d, u)) = c.step(&o, v) {
            assert_eq!(c.list()[c.marker()], d);
            v = u;
        }
        assert_eq!(v, Vertex::EMPTY);
    }

    #[test]
    fn johnson_sink_signal() {
        let o = UniformOracle::new(2, Vertex::EMPTY);
        let mut j = JohnsonState::new(2, 4);
        assert_eq!(j.step(&o, Vertex::EMPTY), Err(PivotError::SinkReached));
    }

    #[test]
    fn lexicographic_order_layout() {
        let order = JohnsonState::lexicographic_order(8, 4);
        let labels: Vec<String> = order.iter().take(9).map(|d| d.label(4)).collect();
        assert_eq!(
            labels,
            ["+0.1", "+0.2", "+0.3", "+0.4", "-0.1", "-0.2", "-0.3", "-0.4", "+1.1"]
        );
    }

    #[test]
    fn step_limit_is_enforced() {
        let o = UniformOracle::new(3, Vertex::EMPTY);
        let mut z = ZadehState::new(Direction::all(3)).unwrap();
        let opts = RunOptions {
            step_limit: Some(2),
            ..RunOptions::default()
        };
        assert_eq!(
            run_to_sink(&o, Vertex(0b111), &mut z, opts),
            Err(PivotError::StepLimitExceeded { limit: 2 })
        );
    }

    #[test]
    fn jsonl_shape() {
        let o = UniformOracle::new(2, Vertex::EMPTY);
        let mut z = ZadehState::new(Direction::all(2)).unwrap();
        let tr = run_to_sink(&o, Vertex(0b01), &mut z, RunOptions::default()).unwrap();
        let text = tr.to_jsonl(4);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let first: Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["dir"], "-0.1");
        assert_eq!(first["vertex"], "10");
        let last: Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(last["sink"], "00");
        assert_eq!(last["length"], 1);
    }
}
