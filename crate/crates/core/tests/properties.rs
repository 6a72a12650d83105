mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use auso_core::cube::{full_mask, Direction, Face, Oracle, TableOracle, Vertex};
use auso_core::pivot::{
    run_to_sink, CunninghamState, JohnsonState, PivotRule, RunOptions, SnapshotPolicy, ZadehState,
};
use auso_core::verify::{
    check_acyclic, check_uso_exhaustive, check_uso_sampled, face_population, pair_violates,
    UsoMode, Witness,
};

fn shuffled_directions(rng: &mut ChaCha8Rng, n: usize) -> Vec<Direction> {
    let mut dirs = Direction::all(n);
    dirs.shuffle(rng);
    dirs
}

/// A random AUSO with up to `flips` random edges reversed.
fn perturbed(rng: &mut ChaCha8Rng, n: usize, flips: usize) -> TableOracle {
    let mut t = TableOracle::materialize(common::random_auso(rng, n).as_ref()).unwrap();
    for _ in 0..flips {
        let v = Vertex(rng.random::<u64>() & full_mask(n));
        t.flip_edge(v, rng.random_range(0..n));
    }
    t
}

fn parse(bits: &str) -> u64 {
    Vertex::parse_bitstring(bits).unwrap().0 .0
}

fn check_passed(o: &TableOracle, mode: UsoMode, name: &str) -> bool {
    let r = check_uso_exhaustive(o, mode, 10).unwrap();
    r.checks.iter().find(|c| c.name == name).unwrap().passed
}

fn witness_refails(o: &TableOracle, w: &Witness) -> bool {
    match w {
        Witness::Face { anchor, free, .. } => {
            let free = parse(free);
            let face = Face::new(Vertex(parse(anchor)), free);
            face.vertices().filter(|&u| o.outmap(u).0 & free == 0).count() != 1
        }
        Witness::Pair { first, second } => {
            pair_violates(o, Vertex(parse(first)), Vertex(parse(second)))
        }
        Witness::Cycle { vertices } => {
            let vs: Vec<u64> = vertices.iter().map(|s| parse(s)).collect();
            (0..vs.len()).all(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
                let diff = a ^ b;
                diff.count_ones() == 1 && o.outmap(Vertex(a)).0 & diff != 0
            })
        }
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairwise_agrees_with_ground_truth(seed: u64, n in 1usize..=7, flips in 0usize..3) {
        let mut rng = common::rng(seed);
        let o = perturbed(&mut rng, n, flips);
        let gt = check_passed(&o, UsoMode::GroundTruth, "uso-face-sinks");
        let pw = check_passed(&o, UsoMode::Pairwise, "uso-pairwise");
        prop_assert_eq!(gt, pw);
        prop_assert!(check_passed(&o, UsoMode::Pairwise, "uso-cross-validation"));
    }

    #[test]
    fn arbitrary_orientations_agree_too(seed: u64, n in 1usize..=5) {
        let mut rng = common::rng(seed);
        let o = common::random_orientation(&mut rng, n);
        let gt = check_passed(&o, UsoMode::GroundTruth, "uso-face-sinks");
        let pw = check_passed(&o, UsoMode::Pairwise, "uso-pairwise");
        prop_assert_eq!(gt, pw);
    }

    #[test]
    fn full_coverage_sampling_matches_exhaustive(seed: u64, n in 1usize..=6, flips in 0usize..3) {
        let mut rng = common::rng(seed);
        let o = perturbed(&mut rng, n, flips);
        let samples = face_population(n, n) as usize;
        let sampled = check_uso_sampled(&o, samples, n, seed).unwrap();
        prop_assert_eq!(sampled.mode.as_str(), "uso-sampled-full-coverage");
        let exhaustive = check_uso_exhaustive(&o, UsoMode::GroundTruth, 10).unwrap();
        prop_assert_eq!(sampled.passed(), exhaustive.passed());
    }

    #[test]
    fn witnesses_fail_in_isolation(seed: u64, n in 2usize..=6, flips in 1usize..4) {
        let mut rng = common::rng(seed);
        let o = if rng.random_bool(0.5) {
            perturbed(&mut rng, n, flips)
        } else {
            common::random_orientation(&mut rng, n)
        };
        let reports = [
            check_uso_exhaustive(&o, UsoMode::GroundTruth, 10).unwrap(),
            check_uso_exhaustive(&o, UsoMode::Pairwise, 10).unwrap(),
            check_uso_sampled(&o, 500, n.min(4), seed).unwrap(),
            check_acyclic(&o, 10).unwrap(),
        ];
        for r in &reports {
            for c in r.failures() {
                let w = c.witness.as_ref().expect("failures carry witnesses");
                prop_assert!(witness_refails(&o, w), "{} witness {:?} does not reproduce", c.name, w);
            }
        }
    }

    #[test]
    fn composed_orientations_are_ausos(seed: u64, n in 1usize..=8) {
        let mut rng = common::rng(seed);
        let o = common::random_auso(&mut rng, n);
        prop_assert!(check_uso_exhaustive(o.as_ref(), UsoMode::GroundTruth, 10).unwrap().passed());
        prop_assert!(check_acyclic(o.as_ref(), 10).unwrap().passed());
    }

    #[test]
    fn edges_are_consistent(seed: u64, n in 1usize..=8) {
        let mut rng = common::rng(seed);
        let o = common::random_auso(&mut rng, n);
        for v in 0..1u64 << n {
            for c in 0..n {
                let here = o.outmap(Vertex(v)).contains(c);
                let there = o.outmap(Vertex(v ^ 1 << c)).contains(c);
                prop_assert!(here != there, "edge {v:b}/{c} oriented both or neither way");
            }
        }
    }

    #[test]
    fn rules_terminate_within_vertex_count(seed: u64, n in 1usize..=8) {
        let mut rng = common::rng(seed);
        let o = common::random_auso(&mut rng, n);
        let start = Vertex(rng.random::<u64>() & full_mask(n));
        let bound = 1usize << n;
        let mut c = CunninghamState::new(shuffled_directions(&mut rng, n)).unwrap();
        let mut j = JohnsonState::with_order(n, &shuffled_directions(&mut rng, n)).unwrap();
        let mut z = ZadehState::new(shuffled_directions(&mut rng, n)).unwrap();
        let traces = [
            run_to_sink(o.as_ref(), start, &mut c, RunOptions::default()).unwrap(),
            run_to_sink(o.as_ref(), start, &mut j, RunOptions::default()).unwrap(),
            run_to_sink(o.as_ref(), start, &mut z, RunOptions::default()).unwrap(),
        ];
        for t in &traces {
            prop_assert!(t.len() < bound);
            prop_assert!(o.outmap(t.end).is_empty());
        }
    }

    #[test]
    fn runs_are_deterministic(seed: u64, n in 1usize..=8) {
        let mut rng = common::rng(seed);
        let o = common::random_auso(&mut rng, n);
        let start = Vertex(rng.random::<u64>() & full_mask(n));
        let order = shuffled_directions(&mut rng, n);
        let opts = RunOptions::default().with_snapshots(SnapshotPolicy::On);
        let run = || {
            let mut c = CunninghamState::new(order.clone()).unwrap();
            let mut j = JohnsonState::with_order(n, &order).unwrap();
            let mut z = ZadehState::new(order.clone()).unwrap();
            [
                run_to_sink(o.as_ref(), start, &mut c, opts).unwrap().to_jsonl(4),
                run_to_sink(o.as_ref(), start, &mut j, opts).unwrap().to_jsonl(4),
                run_to_sink(o.as_ref(), start, &mut z, opts).unwrap().to_jsonl(4),
            ]
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn zadeh_usage_counts_every_step(seed: u64, n in 1usize..=8) {
        let mut rng = common::rng(seed);
        let o = common::random_auso(&mut rng, n);
        let start = Vertex(rng.random::<u64>() & full_mask(n));
        let mut z = ZadehState::new(shuffled_directions(&mut rng, n)).unwrap();
        let t = run_to_sink(o.as_ref(), start, &mut z, RunOptions::default()).unwrap();
        prop_assert_eq!(z.usage_table().iter().sum::<u64>(), t.len() as u64);
        for d in Direction::all(n) {
            let used = t.directions().iter().filter(|&&x| x == d).count() as u64;
            prop_assert_eq!(z.usage(d), used);
        }
    }

    #[test]
    fn cunningham_marker_tracks_last_move(seed: u64, n in 1usize..=8) {
        let mut rng = common::rng(seed);
        let o = common::random_auso(&mut rng, n);
        let mut v = Vertex(rng.random::<u64>() & full_mask(n));
        let mut c = CunninghamState::new(shuffled_directions(&mut rng, n)).unwrap();
        while !o.outmap(v).is_empty() {
            let before = c.marker();
            let (d, next) = c.step(o.as_ref(), v).unwrap();
            prop_assert_eq!(c.list()[c.marker()], d);
            prop_assert!(d.available_in(v, o.outmap(v)));
            // Every direction strictly between the old and new marker was unavailable.
            let len = c.list().len();
            let mut k = (before + 1) % len;
            while k != c.marker() {
                prop_assert!(!c.list()[k].available_in(v, o.outmap(v)));
                k = (k + 1) % len;
            }
            v = next;
        }
    }
}
