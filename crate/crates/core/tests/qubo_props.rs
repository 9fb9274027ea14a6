mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use qubo_mapf::penalty::raw_admissible;
use qubo_mapf::qubo::decode;
use qubo_mapf::{Assignment, Cell, PenaltyBuilder, QuboModel, VarLayout};

proptest! {
    #[test]
    fn decode_inverts_index(
        rows in 1usize..5, cols in 1usize..5, horizon in 0usize..5, robots in 1usize..4,
        picks in proptest::collection::vec((0usize..4, 0usize..5, 0usize..5, 0usize..5), 0..20),
    ) {
        let layout = VarLayout::new(rows, cols, horizon, robots);
        let triples: BTreeSet<(usize, usize, Cell)> = picks
            .into_iter()
            .filter(|&(r, t, i, j)| r < robots && t <= horizon && i < rows && j < cols)
            .map(|(r, t, i, j)| (r, t, Cell::new(i, j)))
            .collect();
        let x = Assignment::from_ones(triples.iter().map(|&(r, t, c)| layout.index(r, t, c).unwrap()));
        let occ = decode(&x, &layout).unwrap();
        let back: BTreeSet<(usize, usize, Cell)> = occ
            .iter()
            .enumerate()
            .flat_map(|(r, steps)| {
                steps.iter().enumerate().flat_map(move |(t, cells)| cells.iter().map(move |&c| (r, t, c)))
            })
            .collect();
        prop_assert_eq!(back, triples);
    }

    #[test]
    fn symmetric_expansion_matches(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = common::rng(seed);
        let m = common::random_model(&mut rng, n, 0.5);
        let mut sym = vec![vec![0.0; n]; n];
        for (a, b, w) in m.iter() {
            if a == b {
                sym[a][a] += w;
            } else {
                sym[a][b] += w / 2.0;
                sym[b][a] += w / 2.0;
            }
        }
        for k in 0..1u64 << n {
            let x = common::bits(k, n);
            let mut e = m.constant();
            for a in 0..n {
                for b in 0..n {
                    if x[a] && x[b] {
                        e += sym[a][b];
                    }
                }
            }
            prop_assert!((e - m.energy_bits(&x)).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_keeps_argmin(seed in any::<u64>(), n in 1usize..=12, scale in prop::sample::select(vec![1.0, 2.0, 5.0])) {
        let m = common::random_model(&mut common::rng(seed), n, 0.6);
        let (normed, _) = m.normalize(scale);
        let (_, before) = common::brute_force(&m, 1e-9);
        let (_, after) = common::brute_force(&normed, 1e-9);
        prop_assert_eq!(before, after);
    }

    #[test]
    fn built_models_store_no_zeros(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let Some(spec) = common::random_window(&mut rng) else { return Ok(()) };
        let adm = raw_admissible(&spec);
        let model = PenaltyBuilder::new(&spec, &adm).build();
        prop_assert!(model.iter().all(|(_, _, w)| w != 0.0));
    }

    #[test]
    fn triples_round_trip(seed in any::<u64>(), n in 1usize..12) {
        let m = common::random_model(&mut common::rng(seed), n, 0.4);
        let back = QuboModel::from_triples(&m.to_triples()).unwrap();
        prop_assert_eq!(back, m);
    }
}
