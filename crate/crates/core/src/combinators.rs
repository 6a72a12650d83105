//! Product composition and face reorientation as lazy oracle combinators.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{
    compress_bits, expand_bits, full_mask, Face, Oracle, Outmap, SharedOracle, Vertex, MAX_DIM,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CombinatorError {
    #[error("frame {name} has dimension {found}, expected {expected}")]
    FrameDimension {
        name: String,
        found: usize,
        expected: usize,
    },
    #[error("unknown frame {0}")]
    UnknownFrame(String),
    #[error("combined dimension {0} exceeds the supported maximum")]
    TooLarge(usize),
    #[error("face of dimension {dim} exceeds the enumeration cap {cap}")]
    FaceTooLarge { dim: usize, cap: usize },
    #[error("replacement has dimension {found}, face has dimension {expected}")]
    ReplacementDimension { found: usize, expected: usize },
    #[error("external outmap differs between {first:#b} and {second:#b}")]
    NotUniform { first: u64, second: u64 },
}

/// Which connecting frame each inner vertex uses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAssignmentMap {
    pub inner_dimension: usize,
    pub default_frame: String,
    pub overrides: BTreeMap<Vertex, String>,
}

impl FrameAssignmentMap {
    pub fn uniform(inner_dimension: usize, default_frame: &str) -> Self {
        FrameAssignmentMap {
            inner_dimension,
            default_frame: default_frame.to_string(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn frame_for(&self, inner: Vertex) -> &str {
        self.overrides
            .get(&inner)
            .map(String::as_str)
            .unwrap_or(&self.default_frame)
    }
}

/// Resolves an inner vertex to an index into the product's frame list.
pub trait FrameLookup {
    /// `outer` is the position inside the frame being evaluated.
    fn frame_index(&self, inner: Vertex, outer: Vertex) -> usize;
}

/// Immutable lookup built from a [`FrameAssignmentMap`].
#[derive(Clone, Debug)]
pub struct FrozenLookup {
    default: usize,
    overrides: HashMap<u64, usize>,
}

impl FrozenLookup {
    pub fn new(default: usize, overrides: HashMap<u64, usize>) -> Self {
        FrozenLookup { default, overrides }
    }
}

impl FrameLookup for FrozenLookup {
    #[inline]
    fn frame_index(&self, inner: Vertex, _outer: Vertex) -> usize {
        if self.overrides.is_empty() {
            return self.default;
        }
        *self.overrides.get(&inner.0).unwrap_or(&self.default)
    }
}

/// `s(v) = inner(v ∩ C') ∪ frame_{v ∩ C'}(v \ C')`, with `C'` the low
/// `inner.dim()` coordinates.
pub struct ProductOracle<L = FrozenLookup> {
    inner: SharedOracle,
    inner_dim: usize,
    outer_dim: usize,
    frames: Vec<SharedOracle>,
    lookup: L,
}

impl<L> ProductOracle<L> {
    pub fn inner(&self) -> &SharedOracle {
        &self.inner
    }

    pub fn frames(&self) -> &[SharedOracle] {
        &self.frames
    }

    pub fn lookup(&self) -> &L {
        &self.lookup
    }

    pub fn inner_dim(&self) -> usize {
        self.inner_dim
    }

    pub fn outer_dim(&self) -> usize {
        self.outer_dim
    }
}

impl<L: FrameLookup> ProductOracle<L> {
    /// Builds a product from an indexed frame list and a custom lookup.
    pub fn with_lookup(
        inner: SharedOracle,
        frames: Vec<(String, SharedOracle)>,
        lookup: L,
    ) -> Result<Self, CombinatorError> {
        let outer_dim = frames.first().map(|(_, f)| f.dim()).unwrap_or(0);
        for (name, f) in &frames {
            if f.dim() != outer_dim {
                return Err(CombinatorError::FrameDimension {
                    name: name.clone(),
                    found: f.dim(),
                    expected: outer_dim,
                });
            }
        }
        let inner_dim = inner.dim();
        if inner_dim + outer_dim > MAX_DIM {
            return Err(CombinatorError::TooLarge(inner_dim + outer_dim));
        }
        Ok(ProductOracle {
            inner,
            inner_dim,
            outer_dim,
            frames: frames.into_iter().map(|(_, f)| f).collect(),
            lookup,
        })
    }

    /// The frame oracle in charge of `inner` (as seen from outer position `outer`).
    pub fn frame_at(&self, inner: Vertex, outer: Vertex) -> &SharedOracle {
        &self.frames[self.lookup.frame_index(inner, outer)]
    }
}

/// Product of `inner` with the frames named in `assignment`.
pub fn product(
    inner: SharedOracle,
    frames: &BTreeMap<String, SharedOracle>,
    assignment: &FrameAssignmentMap,
    outer_dim: usize,
) -> Result<ProductOracle<FrozenLookup>, CombinatorError> {
    if inner.dim() != assignment.inner_dimension {
        return Err(CombinatorError::FrameDimension {
            name: "inner".into(),
            found: inner.dim(),
            expected: assignment.inner_dimension,
        });
    }
    let mut names: Vec<&str> = vec![assignment.default_frame.as_str()];
    for name in assignment.overrides.values() {
        if !names.contains(&name.as_str()) {
            names.push(name);
        }
    }
    let mut list = Vec::with_capacity(names.len());
    for name in &names {
        let f = frames
            .get(*name)
            .ok_or_else(|| CombinatorError::UnknownFrame(name.to_string()))?;
        if f.dim() != outer_dim {
            return Err(CombinatorError::FrameDimension {
                name: name.to_string(),
                found: f.dim(),
                expected: outer_dim,
            });
        }
        list.push((name.to_string(), f.clone()));
    }
    let overrides = assignment
        .overrides
        .iter()
        .filter(|(_, name)| **name != assignment.default_frame)
        .map(|(v, name)| (v.0, names.iter().position(|n| n == name).unwrap()))
        .collect();
    ProductOracle::with_lookup(inner, list, FrozenLookup::new(0, overrides))
}

impl<L: FrameLookup> Oracle for ProductOracle<L> {
    fn dim(&self) -> usize {
        self.inner_dim + self.outer_dim
    }

    #[inline]
    fn outmap(&self, v: Vertex) -> Outmap {
        let u = Vertex(v.0 & full_mask(self.inner_dim));
        let w = Vertex(v.0 >> self.inner_dim);
        let inner = self.inner.outmap(u).0;
        let outer = self.frames[self.lookup.frame_index(u, w)].outmap(w).0;
        Outmap(inner | (outer << self.inner_dim))
    }
}

/// Result of an external-outmap uniformity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uniformity {
    /// All vertices share this outmap outside the face's free coordinates.
    Uniform(Outmap),
    /// Two vertices of the face that disagree outside the free coordinates.
    Witness(Vertex, Vertex),
}

pub fn external_outmap_uniform<O: Oracle + ?Sized>(
    oracle: &O,
    face: Face,
    cap: usize,
) -> Result<Uniformity, CombinatorError> {
    if face.dim() > cap {
        return Err(CombinatorError::FaceTooLarge {
            dim: face.dim(),
            cap,
        });
    }
    let ext = !face.free;
    let first = face.anchor;
    let reference = oracle.outmap(first).0 & ext;
    for v in face.vertices() {
        if oracle.outmap(v).0 & ext != reference {
            return Ok(Uniformity::Witness(first, v));
        }
    }
    Ok(Uniformity::Uniform(Outmap(reference)))
}

/// How [`reorient_face`] establishes its precondition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreconditionCheck {
    /// Enumerate the face (up to `cap` free coordinates).
    Exhaustive { cap: usize },
    /// The caller has established uniformity by other means.
    Assume,
}

/// Face reorientation: inside `face` the free coordinates follow `replacement`.
pub struct ReorientedOracle<B> {
    base: B,
    face: Face,
    replacement: SharedOracle,
}

impl<B> ReorientedOracle<B> {
    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn face(&self) -> Face {
        self.face
    }

    pub fn replacement(&self) -> &SharedOracle {
        &self.replacement
    }
}

pub fn reorient_face<B: Oracle>(
    base: B,
    face: Face,
    replacement: SharedOracle,
    check: PreconditionCheck,
) -> Result<ReorientedOracle<B>, CombinatorError> {
    if replacement.dim() != face.dim() {
        return Err(CombinatorError::ReplacementDimension {
            found: replacement.dim(),
            expected: face.dim(),
        });
    }
    if let PreconditionCheck::Exhaustive { cap } = check {
        if let Uniformity::Witness(a, b) = external_outmap_uniform(&base, face, cap)? {
            return Err(CombinatorError::NotUniform {
                first: a.0,
                second: b.0,
            });
        }
    }
    Ok(ReorientedOracle {
        base,
        face,
        replacement,
    })
}

impl<B: Oracle> Oracle for ReorientedOracle<B> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    #[inline]
    fn outmap(&self, v: Vertex) -> Outmap {
        let out = self.base.outmap(v).0;
        if !self.face.contains(v) {
            return Outmap(out);
        }
        let local = Vertex(compress_bits(v.0, self.face.free));
        let repl = expand_bits(self.replacement.outmap(local).0, self.face.free);
        Outmap((out & !self.face.free) | repl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::{TableOracle, UniformOracle};
    use std::sync::Arc;

    fn uni(n: usize, sink: u64) -> SharedOracle {
        Arc::new(UniformOracle::new(n, Vertex(sink)))
    }

    #[test]
    fn product_of_uniform_edges_is_uniform_square() {
        let mut frames = BTreeMap::new();
        frames.insert("U".to_string(), uni(1, 0));
        let p = product(uni(1, 0), &frames, &FrameAssignmentMap::uniform(1, "U"), 1).unwrap();
        let u = UniformOracle::new(2, Vertex::EMPTY);
        for v in 0..4 {
            assert_eq!(p.outmap(Vertex(v)), u.outmap(Vertex(v)));
        }
    }

    #[test]
    fn product_uses_overrides() {
        let mut frames = BTreeMap::new();
        frames.insert("down".to_string(), uni(2, 0));
        frames.insert("up".to_string(), uni(2, 0b11));
        let mut a = FrameAssignmentMap::uniform(1, "down");
        a.overrides.insert(Vertex(1), "up".into());
        let p = product(uni(1, 0), &frames, &a, 2).unwrap();
        assert_eq!(p.outmap(Vertex(0b000)), Outmap(0));
        assert_eq!(p.outmap(Vertex(0b001)), Outmap(0b111));
        assert_eq!(a.frame_for(Vertex(1)), "up");
        assert_eq!(a.frame_for(Vertex(0)), "down");
    }

    #[test]
    fn product_rejects_bad_frames() {
        let mut frames = BTreeMap::new();
        frames.insert("small".to_string(), uni(1, 0));
        let a = FrameAssignmentMap::uniform(1, "small");
        assert!(matches!(
            product(uni(1, 0), &frames, &a, 2),
            Err(CombinatorError::FrameDimension { .. })
        ));
        let b = FrameAssignmentMap::uniform(1, "missing");
        assert!(matches!(
            product(uni(1, 0), &frames, &b, 1),
            Err(CombinatorError::UnknownFrame(_))
        ));
    }

    #[test]
    fn point_face_is_uniform() {
        let o = UniformOracle::new(3, Vertex(0b101));
        let r = external_outmap_uniform(&o, Face::new(Vertex(0b010), 0), 10).unwrap();
        assert_eq!(r, Uniformity::Uniform(Outmap(0b111)));
    }

    #[test]
    fn reorient_flips_one_edge() {
        let base = UniformOracle::new(2, Vertex::EMPTY);
        let face = Face::new(Vertex(0b10), 0b01);
        let r = reorient_face(base, face, uni(1, 1), PreconditionCheck::Exhaustive { cap: 4 })
            .unwrap();
        assert_eq!(r.outmap(Vertex(0b10)), Outmap(0b11));
        assert_eq!(r.outmap(Vertex(0b11)), Outmap(0b10));
        assert_eq!(r.outmap(Vertex(0b00)), Outmap(0));
        assert_eq!(r.outmap(Vertex(0b01)), Outmap(0b01));
    }

    #[test]
    fn reorient_rejects_nonuniform_face() {
        let mut t = TableOracle::materialize(&UniformOracle::new(2, Vertex::EMPTY)).unwrap();
        t.flip_edge(Vertex(0b01), 1);
        let face = Face::new(Vertex(0), 0b01);
        let err = reorient_face(t, face, uni(1, 0), PreconditionCheck::Exhaustive { cap: 4 });
        assert!(matches!(err, Err(CombinatorError::NotUniform { .. })));
    }

    #[test]
    fn reorient_checks_replacement_dim() {
        let base = UniformOracle::new(3, Vertex::EMPTY);
        let face = Face::new(Vertex(0), 0b011);
        assert!(matches!(
            reorient_face(base, face, uni(1, 0), PreconditionCheck::Assume),
            Err(CombinatorError::ReplacementDimension { .. })
        ));
    }

    #[test]
    fn reorient_respects_scattered_free_coordinates() {
        let base = UniformOracle::new(3, Vertex::EMPTY);
        let face = Face::new(Vertex(0b010), 0b101);
        let r = reorient_face(base, face, uni(2, 0b11), PreconditionCheck::Assume).unwrap();
        assert_eq!(r.outmap(Vertex(0b010)), Outmap(0b111));
        assert_eq!(r.outmap(Vertex(0b111)), Outmap(0b010));
        assert_eq!(r.outmap(Vertex(0b001)), Outmap(0b001));
    }
}
