#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use auso_core::combinators::{product, reorient_face, FrameAssignmentMap, PreconditionCheck};
use auso_core::cube::{full_mask, Face, Oracle, SharedOracle, TableOracle, UniformOracle, Vertex};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random AUSO of dimension `n` built from uniform orientations by
/// products and reorientations.
pub fn random_auso(rng: &mut ChaCha8Rng, n: usize) -> SharedOracle {
    let base = if n <= 1 || rng.random_bool(0.2) {
        let sink = Vertex(rng.random::<u64>() & full_mask(n));
        Arc::new(UniformOracle::new(n, sink)) as SharedOracle
    } else {
        random_product(rng, n)
    };
    if n >= 2 && rng.random_bool(0.5) {
        return random_reorientation(rng, base);
    }
    base
}

fn random_product(rng: &mut ChaCha8Rng, n: usize) -> SharedOracle {
    let k = rng.random_range(1..n);
    let inner = random_auso(rng, k);
    let count = rng.random_range(1..=3);
    let frames: BTreeMap<String, SharedOracle> = (0..count)
        .map(|i| (format!("f{i}"), random_auso(rng, n - k)))
        .collect();
    let mut assignment = FrameAssignmentMap::uniform(k, "f0");
    for u in 0..1u64 << k {
        let pick = rng.random_range(0..count);
        if pick > 0 {
            assignment.overrides.insert(Vertex(u), format!("f{pick}"));
        }
    }
    Arc::new(product(inner, &frames, &assignment, n - k).expect("consistent dimensions"))
}

/// Replaces a random face whose external outmap is uniform; otherwise
/// returns `base` unchanged.
pub fn random_reorientation(rng: &mut ChaCha8Rng, base: SharedOracle) -> SharedOracle {
    let n = base.dim();
    for _ in 0..8 {
        let free = rng.random::<u64>() & full_mask(n);
        if free == 0 {
            continue;
        }
        let anchor = Vertex(rng.random::<u64>() & full_mask(n));
        let face = Face::new(anchor, free);
        let replacement = random_auso(rng, face.dim());
        if let Ok(o) = reorient_face(
            base.clone(),
            face,
            replacement,
            PreconditionCheck::Exhaustive { cap: 20 },
        ) {
            return Arc::new(o);
        }
    }
    base
}

/// An arbitrary orientation: every edge directed at random.
pub fn random_orientation(rng: &mut ChaCha8Rng, n: usize) -> TableOracle {
    let mut table = vec![0u64; 1 << n];
    for v in 0..1u64 << n {
        for c in 0..n {
            if v & (1 << c) != 0 {
                continue;
            }
            let w = v | 1 << c;
            if rng.random_bool(0.5) {
                table[v as usize] |= 1 << c;
            } else {
                table[w as usize] |= 1 << c;
            }
        }
    }
    TableOracle::from_outmaps(n, table).expect("valid table")
}
