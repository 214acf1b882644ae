mod common;

use proptest::prelude::*;

use union_dse::mapping::{check_legality, is_legal, Mapping, Rule};
use union_dse::mapspace::ConstraintSet;
use union_dse::workloads::gemm;
use union_dse::MapSpace;

fn rules(m: &Mapping, a: &union_dse::Architecture) -> Vec<Rule> {
    let p = gemm(8, 8, 8);
    let mut r: Vec<Rule> = check_legality(m, &p, a).unwrap().iter().map(|v| v.rule()).collect();
    r.dedup();
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Growing a child tile past its parent's spatial tile breaks only R1.
    #[test]
    fn oversized_child_tile_is_r1(seed: u64, d in 0usize..3) {
        let p = gemm(8, 8, 8);
        let a = common::three_level(4096, 64);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let mut m = s.sample_at(seed, 0).unwrap();
        let inc = m.incoming(1, &p.sizes())[d];
        m.levels[1].temporal_tiles[d] = 2 * inc;
        m.levels[1].spatial_tiles[d] = 2 * inc;
        prop_assert_eq!(rules(&m, &a), vec![Rule::R1]);
    }

    // Whole dimensions at the PE overflow its buffer and nothing else.
    #[test]
    fn whole_dimensions_at_the_pe_are_r3(seed: u64, skip in 0usize..3) {
        let p = gemm(8, 8, 8);
        let a = common::three_level(4096, 64);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let mut m = s.sample_at(seed, 1).unwrap();
        for d in (0..3).filter(|&d| d != skip) {
            for l in &mut m.levels {
                l.temporal_tiles[d] = 8;
                l.spatial_tiles[d] = 8;
            }
        }
        prop_assert_eq!(rules(&m, &a), vec![Rule::R3]);
    }

    // A spatial tile that no longer divides its temporal tile is R4 only.
    #[test]
    fn non_dividing_spatial_tile_is_r4(seed: u64, pos in 0usize..3, d in 0usize..3) {
        let p = gemm(8, 8, 8);
        let a = common::three_level(4096, 64);
        let s = MapSpace::new(&p, &a, &ConstraintSet::default()).unwrap();
        let mut m = s.sample_at(seed, 2).unwrap();
        m.levels[pos].spatial_tiles[d] = m.levels[pos].temporal_tiles[d] + 1;
        prop_assert_eq!(rules(&m, &a), vec![Rule::R4]);
    }
}

#[test]
fn too_much_parallelism_is_r2() {
    let p = gemm(8, 8, 8);
    let a = common::three_level(4096, 64);
    let mut m = Mapping::unit(&p, 3);
    m.levels[0].temporal_tiles = vec![8, 8, 8];
    m.levels[0].spatial_tiles = vec![2, 2, 8];
    let v = check_legality(&m, &p, &a).unwrap();
    assert_eq!(v.iter().map(|x| x.rule()).collect::<Vec<_>>(), vec![Rule::R2]);
}

#[test]
fn unit_mapping_is_legal_everywhere() {
    for (_, p) in common::instances() {
        for (_, a) in common::archs() {
            assert!(is_legal(&Mapping::unit(&p, a.levels.len()), &p, &a));
        }
    }
}
