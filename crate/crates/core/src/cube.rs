//! Hypercube primitives: coordinates, vertices, directions, faces, outmaps
//! and the orientation oracle interface.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported cube dimension (one machine word per vertex).
pub const MAX_DIM: usize = 63;

/// Largest dimension that may be materialized into an explicit table.
pub const MAX_TABLE_DIM: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CubeError {
    #[error("illegal move {dir} at vertex {vertex:#b}")]
    IllegalMove { vertex: u64, dir: String },
    #[error("dimension {0} exceeds the supported maximum")]
    DimensionTooLarge(usize),
    #[error("invalid vertex text {0:?}")]
    BadVertex(String),
    #[error("invalid direction text {0:?}")]
    BadDirection(String),
    #[error("coordinate {coord} outside a {dim}-cube")]
    CoordinateOutOfRange { coord: usize, dim: usize },
}

#[inline]
pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A coordinate `c_j^k` as (bundle j, 1-based index k).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coordinate {
    pub bundle: usize,
    pub index: usize,
}

impl Coordinate {
    pub fn new(bundle: usize, index: usize) -> Self {
        Coordinate { bundle, index }
    }

    pub fn global_id(self, bundle_size: usize) -> usize {
        self.bundle * bundle_size + self.index - 1
    }

    pub fn from_global(id: usize, bundle_size: usize) -> Self {
        Coordinate {
            bundle: id / bundle_size,
            index: id % bundle_size + 1,
        }
    }
}

/// A vertex of the cube, stored as a bit set keyed by global coordinate id.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Vertex(pub u64);

impl Vertex {
    pub const EMPTY: Vertex = Vertex(0);

    pub fn from_coords<I: IntoIterator<Item = usize>>(coords: I) -> Self {
        Vertex(coords.into_iter().fold(0u64, |acc, c| acc | (1u64 << c)))
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn contains(self, c: usize) -> bool {
        (self.0 >> c) & 1 == 1
    }

    #[inline]
    pub fn toggled(self, c: usize) -> Vertex {
        Vertex(self.0 ^ (1u64 << c))
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn coords(self) -> impl Iterator<Item = usize> {
        BitIter(self.0)
    }

    /// Bit string of length `n`; leftmost character is coordinate 0.
    pub fn to_bitstring(self, n: usize) -> String {
        (0..n)
            .map(|c| if self.contains(c) { '1' } else { '0' })
            .collect()
    }

    /// Parses a bit string; returns the vertex and its dimension.
    pub fn parse_bitstring(s: &str) -> Result<(Vertex, usize), CubeError> {
        let s = s.trim();
        if s.len() > MAX_DIM {
            return Err(CubeError::DimensionTooLarge(s.len()));
        }
        let mut bits = 0u64;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << i,
                '0' => {}
                _ => return Err(CubeError::BadVertex(s.to_string())),
            }
        }
        Ok((Vertex(bits), s.len()))
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let c = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(c)
    }
}

/// The set of coordinates on which a vertex has an outgoing edge.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Outmap(pub u64);

impl Outmap {
    #[inline]
    pub fn contains(self, c: usize) -> bool {
        (self.0 >> c) & 1 == 1
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn coords(self) -> impl Iterator<Item = usize> {
        BitIter(self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// A signed coordinate. `+c` adds `c`, `-c` removes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub coord: usize,
    pub sign: Sign,
}

impl Direction {
    pub fn plus(coord: usize) -> Self {
        Direction {
            coord,
            sign: Sign::Plus,
        }
    }

    pub fn minus(coord: usize) -> Self {
        Direction {
            coord,
            sign: Sign::Minus,
        }
    }

    /// `+k` / `-k` with a 1-based index inside bundle `bundle`.
    pub fn in_bundle(bundle: usize, signed_index: i32, bundle_size: usize) -> Self {
        let k = signed_index.unsigned_abs() as usize;
        let coord = Coordinate::new(bundle, k).global_id(bundle_size);
        if signed_index > 0 {
            Direction::plus(coord)
        } else {
            Direction::minus(coord)
        }
    }

    pub fn is_positive(self) -> bool {
        self.sign == Sign::Plus
    }

    /// Dense index in `0..2n`: `2*coord` for `+`, `2*coord+1` for `-`.
    #[inline]
    pub fn slot(self) -> usize {
        2 * self.coord + usize::from(self.sign == Sign::Minus)
    }

    pub fn from_slot(slot: usize) -> Self {
        if slot.is_multiple_of(2) {
            Direction::plus(slot / 2)
        } else {
            Direction::minus(slot / 2)
        }
    }

    /// All `2n` directions in slot order.
    pub fn all(n: usize) -> Vec<Direction> {
        (0..2 * n).map(Direction::from_slot).collect()
    }

    /// Whether this direction is an outgoing edge at `v` under outmap `out`.
    #[inline]
    pub fn available_in(self, v: Vertex, out: Outmap) -> bool {
        out.contains(self.coord) && (v.contains(self.coord) != self.is_positive())
    }

    /// Text form `+j.k` / `-j.k`.
    pub fn label(self, bundle_size: usize) -> String {
        let c = Coordinate::from_global(self.coord, bundle_size);
        let s = if self.is_positive() { '+' } else { '-' };
        format!("{s}{}.{}", c.bundle, c.index)
    }

    pub fn parse(text: &str, bundle_size: usize) -> Result<Self, CubeError> {
        let bad = || CubeError::BadDirection(text.to_string());
        let t = text.trim();
        let (sign, rest) = match t.chars().next() {
            Some('+') => (Sign::Plus, &t[1..]),
            Some('-') => (Sign::Minus, &t[1..]),
            _ => return Err(bad()),
        };
        let (j, k) = rest.split_once('.').ok_or_else(bad)?;
        let bundle: usize = j.parse().map_err(|_| bad())?;
        let index: usize = k.parse().map_err(|_| bad())?;
        if index == 0 || index > bundle_size {
            return Err(bad());
        }
        Ok(Direction {
            coord: Coordinate::new(bundle, index).global_id(bundle_size),
            sign,
        })
    }
}

/// `F(free, anchor)`: all vertices that differ from `anchor` only inside `free`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub anchor: Vertex,
    pub free: u64,
}

impl Face {
    pub fn new(anchor: Vertex, free: u64) -> Self {
        Face {
            anchor: Vertex(anchor.0 & !free),
            free,
        }
    }

    pub fn whole(n: usize) -> Self {
        Face::new(Vertex::EMPTY, full_mask(n))
    }

    pub fn dim(&self) -> usize {
        self.free.count_ones() as usize
    }

    #[inline]
    pub fn contains(&self, v: Vertex) -> bool {
        v.0 & !self.free == self.anchor.0
    }

    /// Enumerates the `2^dim` vertices of the face.
    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        let free = self.free;
        let anchor = self.anchor.0;
        let mut sub = Some(0u64);
        std::iter::from_fn(move || {
            let cur = sub?;
            sub = if cur == free {
                None
            } else {
                Some(cur.wrapping_sub(free) & free)
            };
            Some(Vertex(anchor | cur))
        })
    }
}

/// Packs the bits of `v` at the positions of `mask` into the low bits.
#[inline]
pub fn compress_bits(v: u64, mask: u64) -> u64 {
    if mask & mask.wrapping_add(1) == 0 {
        return v & mask;
    }
    BitIter(mask)
        .enumerate()
        .fold(0u64, |out, (k, c)| out | ((v >> c) & 1) << k)
}

/// Inverse of [`compress_bits`].
#[inline]
pub fn expand_bits(x: u64, mask: u64) -> u64 {
    if mask & mask.wrapping_add(1) == 0 {
        return x & mask;
    }
    let mut out = 0u64;
    for (k, c) in BitIter(mask).enumerate() {
        out |= ((x >> k) & 1) << c;
    }
    out
}

/// Vertex oracle: given a vertex, reveals its outmap.
pub trait Oracle {
    fn dim(&self) -> usize;
    fn outmap(&self, v: Vertex) -> Outmap;
}

pub type SharedOracle = Arc<dyn Oracle + Send + Sync>;

impl<T: Oracle + ?Sized> Oracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn outmap(&self, v: Vertex) -> Outmap {
        (**self).outmap(v)
    }
}

impl<T: Oracle + ?Sized> Oracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn outmap(&self, v: Vertex) -> Outmap {
        (**self).outmap(v)
    }
}

impl<T: Oracle + ?Sized> Oracle for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn outmap(&self, v: Vertex) -> Outmap {
        (**self).outmap(v)
    }
}

pub fn is_available<O: Oracle + ?Sized>(oracle: &O, v: Vertex, d: Direction) -> bool {
    debug_assert!(d.coord < oracle.dim());
    d.available_in(v, oracle.outmap(v))
}

pub fn apply_direction(v: Vertex, d: Direction) -> Result<Vertex, CubeError> {
    if v.contains(d.coord) == d.is_positive() {
        return Err(CubeError::IllegalMove {
            vertex: v.0,
            dir: format!("{}{}", if d.is_positive() { '+' } else { '-' }, d.coord),
        });
    }
    Ok(v.toggled(d.coord))
}

/// Every edge points towards `sink`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniformOracle {
    dim: usize,
    sink: Vertex,
}

impl UniformOracle {
    pub fn new(dim: usize, sink: Vertex) -> Self {
        assert!(dim <= MAX_DIM, "dimension {dim} too large");
        assert!(sink.0 & !full_mask(dim) == 0, "sink outside the cube");
        UniformOracle { dim, sink }
    }

    pub fn sink(&self) -> Vertex {
        self.sink
    }
}

impl Oracle for UniformOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    fn outmap(&self, v: Vertex) -> Outmap {
        Outmap(v.0 ^ self.sink.0)
    }
}

/// An explicitly stored orientation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableOracle {
    dim: usize,
    table: Vec<u64>,
}

impl TableOracle {
    pub fn from_outmaps(dim: usize, table: Vec<u64>) -> Result<Self, CubeError> {
        if dim > MAX_TABLE_DIM {
            return Err(CubeError::DimensionTooLarge(dim));
        }
        assert_eq!(table.len(), 1usize << dim, "table size must be 2^dim");
        Ok(TableOracle { dim, table })
    }

    pub fn from_fn<F: FnMut(Vertex) -> Outmap>(dim: usize, mut f: F) -> Result<Self, CubeError> {
        if dim > MAX_TABLE_DIM {
            return Err(CubeError::DimensionTooLarge(dim));
        }
        let table = (0..1u64 << dim).map(|v| f(Vertex(v)).0).collect();
        Ok(TableOracle { dim, table })
    }

    /// Evaluates `oracle` on every vertex. Only for `n <= 20`.
    pub fn materialize<O: Oracle + ?Sized>(oracle: &O) -> Result<Self, CubeError> {
        Self::from_fn(oracle.dim(), |v| oracle.outmap(v))
    }

    pub fn outmaps(&self) -> &[u64] {
        &self.table
    }

    /// Reverses the edge between `v` and `v ^ {c}`.
    pub fn flip_edge(&mut self, v: Vertex, c: usize) {
        let u = v.toggled(c);
        self.table[v.0 as usize] ^= 1 << c;
        self.table[u.0 as usize] ^= 1 << c;
    }
}

impl Oracle for TableOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    fn outmap(&self, v: Vertex) -> Outmap {
        Outmap(self.table[v.0 as usize])
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FaceSinkError {
    #[error("face (anchor {anchor:#b}, free {free:#b}) has no sink")]
    NoSink { anchor: u64, free: u64 },
    #[error("face (anchor {anchor:#b}, free {free:#b}) has {} sinks", sinks.len())]
    MultipleSinks {
        anchor: u64,
        free: u64,
        sinks: Vec<Vertex>,
    },
}

/// The unique vertex of `face` with no outgoing edge inside the face.
pub fn face_sink<O: Oracle + ?Sized>(oracle: &O, face: Face) -> Result<Vertex, FaceSinkError> {
    let sinks: Vec<Vertex> = face
        .vertices()
        .filter(|&u| oracle.outmap(u).0 & face.free == 0)
        .collect();
    match sinks.len() {
        1 => Ok(sinks[0]),
        0 => Err(FaceSinkError::NoSink {
            anchor: face.anchor.0,
            free: face.free,
        }),
        _ => Err(FaceSinkError::MultipleSinks {
            anchor: face.anchor.0,
            free: face.free,
            sinks,
        }),
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}
