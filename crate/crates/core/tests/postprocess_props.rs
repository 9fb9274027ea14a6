mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use qubo_mapf::postprocess::{
    detect_invalid_move, fix_one_hot_continuity, resolve_clash_wait, vertex_conflicts, TimedPath,
};
use qubo_mapf::{Cell, GridMap};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random walk of `len` moves on `map` from a random free cell.
fn random_walk(rng: &mut impl Rng, map: &GridMap, len: usize) -> Option<Vec<Cell>> {
    let free: Vec<Cell> = map.free_cells().collect();
    let mut cells = vec![*free.choose(rng)?];
    for _ in 0..len {
        let last = *cells.last().unwrap();
        let next = map.adjacent(last).choose(rng).copied().unwrap_or(last);
        cells.push(next);
    }
    Some(cells)
}

proptest! {
    #[test]
    fn continuity_repair_output_is_valid(seed in any::<u64>(), len in 1usize..8) {
        let mut rng = common::rng(seed);
        let map = common::random_map(&mut rng, 4, 4, 0.2);
        let Some(walk) = random_walk(&mut rng, &map, len) else { return Ok(()) };
        if walk.windows(2).any(|w| w[0] == w[1]) {
            return Ok(());
        }
        // sprinkle extra cells into the occupancy
        let free: Vec<Cell> = map.free_cells().collect();
        let occ: Vec<BTreeSet<Cell>> = walk
            .iter()
            .enumerate()
            .map(|(t, &c)| {
                let mut s = BTreeSet::from([c]);
                if t > 0 && rng.gen_bool(0.3) {
                    s.insert(*free.choose(&mut rng).unwrap());
                }
                s
            })
            .collect();
        if let Ok(path) = fix_one_hot_continuity(&occ, walk[0], &map, false) {
            prop_assert_eq!(path.len(), occ.len());
            prop_assert!(detect_invalid_move(&path, &map, false).is_none());
        }
    }

    #[test]
    fn continuity_repair_is_identity_on_valid_paths(seed in any::<u64>(), len in 1usize..8) {
        let mut rng = common::rng(seed);
        let map = common::random_map(&mut rng, 4, 4, 0.2);
        let Some(walk) = random_walk(&mut rng, &map, len) else { return Ok(()) };
        let occ: Vec<BTreeSet<Cell>> = walk.iter().map(|&c| BTreeSet::from([c])).collect();
        prop_assert_eq!(fix_one_hot_continuity(&occ, walk[0], &map, true).unwrap(), walk);
    }

    #[test]
    fn clash_resolution_invariants(seed in any::<u64>(), robots in 2usize..=4, len in 2usize..8) {
        let mut rng = common::rng(seed);
        let map = GridMap::empty(4, 4);
        let mut paths: Vec<TimedPath> = (0..robots)
            .map(|_| TimedPath::new(rng.gen_range(0..3), random_walk(&mut rng, &map, len).unwrap()))
            .collect();
        let starts: BTreeSet<(usize, Cell)> = paths.iter().map(|p| (p.start, p.cells[0])).collect();
        if starts.len() < robots {
            return Ok(());
        }
        let before: Vec<Vec<Cell>> = paths.iter().map(TimedPath::route).collect();
        let conflicts_before = vertex_conflicts(&paths).len();
        let report = resolve_clash_wait(&mut paths, 64);
        let after: Vec<Vec<Cell>> = paths.iter().map(TimedPath::route).collect();
        prop_assert_eq!(before, after);
        let remaining = vertex_conflicts(&paths);
        if report.unresolved.is_empty() {
            prop_assert!(remaining.is_empty());
            let snapshot = paths.clone();
            let again = resolve_clash_wait(&mut paths, 64);
            prop_assert!(again.waits.is_empty());
            prop_assert_eq!(snapshot, paths);
        } else {
            prop_assert!(conflicts_before > 0);
        }
    }
}
