use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CheckResult, VerificationReport, VerifyError, Witness};
use crate::cube::{full_mask, Face, Oracle, TableOracle, Vertex, MAX_TABLE_DIM};

pub const DEFAULT_USO_CAP: usize = 14;
pub const DEFAULT_ACYCLIC_CAP: usize = 20;
pub const MAX_SAMPLED_FACE_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UsoMode {
    /// Count sinks in every face.
    GroundTruth,
    /// All vertex pairs satisfy `(s(u) ^ s(v)) & (u ^ v) != 0`.
    Pairwise,
}

/// Evaluates every vertex in parallel.
pub fn materialize_par<O: Oracle + Sync + ?Sized>(oracle: &O) -> Result<TableOracle, VerifyError> {
    let n = oracle.dim();
    if n > MAX_TABLE_DIM {
        return Err(VerifyError::CapExceeded {
            dim: n,
            cap: MAX_TABLE_DIM,
        });
    }
    let table: Vec<u64> = (0..1u64 << n)
        .into_par_iter()
        .map(|v| oracle.outmap(Vertex(v)).0)
        .collect();
    Ok(TableOracle::from_outmaps(n, table).expect("size checked"))
}

fn bits(v: u64, n: usize) -> String {
    Vertex(v).to_bitstring(n)
}

fn face_witness(out: &[u64], n: usize, anchor: u64, free: u64) -> Witness {
    let sinks = Face::new(Vertex(anchor), free)
        .vertices()
        .filter(|u| out[u.0 as usize] & free == 0)
        .map(|u| bits(u.0, n))
        .collect();
    Witness::Face {
        anchor: bits(anchor, n),
        free: bits(free, n),
        sinks,
    }
}

fn ground_truth(out: &[u64], n: usize) -> Option<(u64, u64)> {
    let size = 1usize << n;
    (1..size as u64)
        .into_par_iter()
        .map_init(
            || vec![0u8; size],
            |counts, free| {
                for (v, count) in counts.iter_mut().enumerate() {
                    if v as u64 & free == 0 {
                        *count = 0;
                    }
                }
                for (v, &o) in out.iter().enumerate() {
                    if o & free == 0 {
                        let a = v & !(free as usize);
                        counts[a] = counts[a].saturating_add(1);
                    }
                }
                (0..size)
                    .find(|&v| v as u64 & free == 0 && counts[v] != 1)
                    .map(|a| (a as u64, free))
            },
        )
        .find_first(Option::is_some)
        .flatten()
}

fn pairwise(out: &[u64]) -> Option<(u64, u64)> {
    let size = out.len() as u64;
    (0..size).into_par_iter().find_map_first(|u| {
        (u + 1..size)
            .find(|&v| (out[u as usize] ^ out[v as usize]) & (u ^ v) == 0)
            .map(|v| (u, v))
    })
}

/// True iff `u != v` violate the pairwise USO criterion.
pub fn pair_violates<O: Oracle + ?Sized>(oracle: &O, u: Vertex, v: Vertex) -> bool {
    u != v && (oracle.outmap(u).0 ^ oracle.outmap(v).0) & (u.0 ^ v.0) == 0
}

pub fn check_uso_exhaustive<O: Oracle + Sync + ?Sized>(
    oracle: &O,
    mode: UsoMode,
    cap: usize,
) -> Result<VerificationReport, VerifyError> {
    let n = oracle.dim();
    if n > cap {
        return Err(VerifyError::CapExceeded { dim: n, cap });
    }
    let table = materialize_par(oracle)?;
    let out = table.outmaps();
    let label = match mode {
        UsoMode::GroundTruth => "uso-exhaustive-ground-truth",
        UsoMode::Pairwise => "uso-exhaustive-pairwise",
    };
    Ok(VerificationReport::timed(label, |r| {
        let truth = || match ground_truth(out, n) {
            None => CheckResult::pass("uso-face-sinks", format!("all {} faces of the {n}-cube have one sink", 3u64.pow(n as u32))),
            Some((anchor, free)) => CheckResult::fail(
                "uso-face-sinks",
                "face without a unique sink",
                face_witness(out, n, anchor, free),
            ),
        };
        match mode {
            UsoMode::GroundTruth => r.push(truth()),
            UsoMode::Pairwise => {
                let pw = pairwise(out);
                r.push(match pw {
                    None => CheckResult::pass("uso-pairwise", format!("all vertex pairs of the {n}-cube")),
                    Some((u, v)) => CheckResult::fail(
                        "uso-pairwise",
                        "outmaps agree on the differing coordinates",
                        Witness::Pair {
                            first: bits(u, n),
                            second: bits(v, n),
                        },
                    ),
                });
                if n <= 8 {
                    let gt = truth();
                    let agree = gt.passed == pw.is_none();
                    r.push(if agree {
                        CheckResult::pass("uso-cross-validation", "pairwise agrees with face-sink count")
                    } else {
                        CheckResult::fail(
                            "uso-cross-validation",
                            "pairwise and face-sink count disagree",
                            gt.witness.unwrap_or(Witness::Level {
                                level: 0,
                                detail: "pairwise failed, ground truth passed".into(),
                            }),
                        )
                    });
                }
            }
        }
    }))
}

fn find_cycle(out: &[u64], n: usize) -> Option<Vec<u64>> {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let size = out.len();
    let mut color = vec![WHITE; size];
    let mut stack: Vec<(u64, usize)> = Vec::new();
    for root in 0..size as u64 {
        if color[root as usize] != WHITE {
            continue;
        }
        color[root as usize] = GRAY;
        stack.push((root, 0));
        while let Some(top) = stack.last_mut() {
            let (v, c) = *top;
            if c >= n {
                color[v as usize] = BLACK;
                stack.pop();
                continue;
            }
            top.1 += 1;
            if out[v as usize] >> c & 1 == 0 {
                continue;
            }
            let u = v ^ (1 << c);
            match color[u as usize] {
                WHITE => {
                    color[u as usize] = GRAY;
                    stack.push((u, 0));
                }
                GRAY => {
                    let pos = stack.iter().position(|&(x, _)| x == u).expect("gray is on stack");
                    return Some(stack[pos..].iter().map(|&(x, _)| x).collect());
                }
                _ => {}
            }
        }
    }
    None
}

pub fn check_acyclic<O: Oracle + Sync + ?Sized>(
    oracle: &O,
    cap: usize,
) -> Result<VerificationReport, VerifyError> {
    let n = oracle.dim();
    if n > cap {
        return Err(VerifyError::CapExceeded { dim: n, cap });
    }
    let table = materialize_par(oracle)?;
    Ok(VerificationReport::timed("acyclic-exhaustive", |r| {
        r.push(match find_cycle(table.outmaps(), n) {
            None => CheckResult::pass("acyclic", format!("no directed cycle in the {n}-cube")),
            Some(cycle) => CheckResult::fail(
                "acyclic",
                format!("directed cycle of length {}", cycle.len()),
                Witness::Cycle {
                    vertices: cycle.into_iter().map(|v| bits(v, n)).collect(),
                },
            ),
        })
    }))
}

/// Number of faces with dimension in `1..=max_dim`.
pub fn face_population(n: usize, max_dim: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for k in 1..=max_dim.min(n) {
        binom = binom * (n - k + 1) as u128 / k as u128;
        total += binom << (n - k);
    }
    total
}

/// The face drawn for sample `index`: dimension uniform in
/// `1..=min(max_dim, n)`, then free coordinates and anchor uniform.
pub fn sample_face(n: usize, max_dim: usize, seed: u64, index: u64) -> Face {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let k = rng.random_range(1..=max_dim.min(n));
    let free = sample(&mut rng, n, k)
        .into_iter()
        .fold(0u64, |acc, c| acc | (1 << c));
    let anchor = rng.random::<u64>() & full_mask(n) & !free;
    Face::new(Vertex(anchor), free)
}

fn all_faces(n: usize, max_dim: usize) -> Vec<Face> {
    let full = full_mask(n);
    let mut faces = Vec::new();
    for free in 1..=full {
        if free.count_ones() as usize > max_dim {
            continue;
        }
        let rest = full & !free;
        let mut a = 0u64;
        loop {
            faces.push(Face::new(Vertex(a), free));
            if a == rest {
                break;
            }
            a = a.wrapping_sub(rest) & rest;
        }
    }
    faces
}

fn face_fails<O: Oracle + ?Sized>(oracle: &O, f: &Face) -> bool {
    f.vertices()
        .filter(|&u| oracle.outmap(u).0 & f.free == 0)
        .take(2)
        .count()
        != 1
}

/// Checks random faces for a unique sink. When `samples` covers the whole
/// face population, every face is checked instead.
pub fn check_uso_sampled<O: Oracle + Sync + ?Sized>(
    oracle: &O,
    samples: usize,
    max_face_dim: usize,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    let n = oracle.dim();
    if max_face_dim == 0 || max_face_dim > MAX_SAMPLED_FACE_DIM {
        return Err(VerifyError::BadParameters(format!(
            "max_face_dim must be in 1..={MAX_SAMPLED_FACE_DIM}"
        )));
    }
    if n == 0 {
        return Err(VerifyError::BadParameters("0-cube has no faces to sample".into()));
    }
    let exhaustive = n <= MAX_TABLE_DIM && samples as u128 >= face_population(n, max_face_dim);
    let mode = if exhaustive { "uso-sampled-full-coverage" } else { "uso-sampled" };
    Ok(VerificationReport::timed(mode, |r| {
        let (checked, bad) = if exhaustive {
            let faces = all_faces(n, max_face_dim);
            let bad = faces.par_iter().find_first(|f| face_fails(oracle, f)).copied();
            (faces.len(), bad)
        } else {
            let bad = (0..samples as u64)
                .into_par_iter()
                .map(|i| sample_face(n, max_face_dim, seed, i))
                .find_first(|f| face_fails(oracle, f));
            (samples, bad)
        };
        r.push(match bad {
            None => CheckResult::pass(
                "uso-sampled",
                format!("{checked} faces of dim <= {max_face_dim}, seed {seed}"),
            ),
            Some(f) => {
                let sinks = f
                    .vertices()
                    .filter(|&u| oracle.outmap(u).0 & f.free == 0)
                    .map(|u| bits(u.0, n))
                    .collect();
                CheckResult::fail(
                    "uso-sampled",
                    format!("face without a unique sink (seed {seed})"),
                    Witness::Face {
                        anchor: bits(f.anchor.0, n),
                        free: bits(f.free, n),
                        sinks,
                    },
                )
            }
        })
    }))
}
