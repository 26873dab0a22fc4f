mod common;

use common::*;
use grainseg::watershed::*;
use grainseg::{BinaryVolume, Connectivity, Dims, Error, GreyVolume, LabelVolume, Volume};
use proptest::prelude::*;

/// Topography, sparse seeds (labels 1..=3) and a mask that contains them.
fn scene(max: usize) -> impl Strategy<Value = (GreyVolume, LabelVolume, BinaryVolume)> {
    dims_strategy(max).prop_flat_map(|d| {
        let n = d.len();
        (
            proptest::collection::vec(0u8..6, n),
            proptest::collection::vec(prop_oneof![6 => Just(0u32), 1 => 1u32..4], n),
            proptest::collection::vec(prop_oneof![4 => Just(1u8), 1 => Just(0u8)], n),
            0..n,
        )
            .prop_map(move |(t, mut s, mut m, forced)| {
                if s.iter().all(|&l| l == 0) {
                    s[forced] = 1;
                }
                for (mk, &l) in m.iter_mut().zip(&s) {
                    if l != 0 {
                        *mk = 1;
                    }
                }
                (
                    GreyVolume::from_vec(d, t).unwrap(),
                    LabelVolume::from_vec(d, s).unwrap(),
                    BinaryVolume::from_flags(d, &m).unwrap(),
                )
            })
    })
}

fn wide(t: &GreyVolume) -> Vec<u32> {
    t.data().iter().map(|&v| v as u32).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn flood_matches_oracle((t, s, m) in scene(6), c in connectivity_strategy(), lines in any::<bool>(), masked in any::<bool>()) {
        let mask = masked.then_some(&m);
        let fast = watershed_from_labels(&t, &s, c, mask, lines).unwrap();
        let slow = flood_oracle(&wide(&t), t.dims(), &s, c, mask, lines);
        prop_assert_eq!(fast.data(), &slow[..]);
    }

    #[test]
    fn seeds_kept_and_mask_respected((t, s, m) in scene(6), c in connectivity_strategy(), lines in any::<bool>()) {
        let f = watershed_flood(&t, s.clone(), c, Some(&m), lines).unwrap();
        for i in 0..s.data().len() {
            if s.data()[i] != 0 {
                prop_assert_eq!(f.labels.data()[i], s.data()[i]);
            }
            if !m.get_index(i) {
                prop_assert_eq!(f.labels.data()[i], 0);
            }
        }
        let zeros_in_mask = (0..m.len()).filter(|&i| m.get_index(i) && f.labels.data()[i] == 0).count();
        prop_assert_eq!(zeros_in_mask, f.unreached + f.dams);
        if !lines {
            prop_assert_eq!(f.dams, 0);
        }
    }

    #[test]
    fn unmasked_without_lines_partitions_reachable_space((t, s, _m) in scene(6), c in connectivity_strategy()) {
        // Every voxel connected to a seed gets exactly one seed label.
        let out = watershed_from_labels(&t, &s, c, None, false).unwrap();
        let reach = naive_components(&BinaryVolume::full(t.dims()), c);
        for i in 0..out.data().len() {
            prop_assert!(out.data()[i] != 0 || reach[i] != 0);
        }
        let used: std::collections::BTreeSet<u32> = s.data().iter().copied().filter(|&l| l != 0).collect();
        prop_assert!(out.data().iter().all(|l| used.contains(l)));
    }

    #[test]
    fn relabelling_seeds_relabels_output((t, s, m) in scene(6), c in connectivity_strategy(), lines in any::<bool>()) {
        let perm = |l: u32| if l == 0 { 0 } else { [7, 3, 11][(l - 1) as usize] };
        let s2 = LabelVolume::from_vec(s.dims(), s.data().iter().map(|&l| perm(l)).collect()).unwrap();
        let a = watershed_from_labels(&t, &s, c, Some(&m), lines).unwrap();
        let b = watershed_from_labels(&t, &s2, c, Some(&m), lines).unwrap();
        let mapped: Vec<u32> = a.data().iter().map(|&l| perm(l)).collect();
        prop_assert_eq!(b.data(), &mapped[..]);
    }

    #[test]
    fn levels_flood_agrees_with_grey_flood((t, s, m) in scene(5), c in connectivity_strategy(), lines in any::<bool>()) {
        let topo = Volume::from_vec(t.dims(), wide(&t)).unwrap();
        let a = watershed_flood(&t, s.clone(), c, Some(&m), lines).unwrap();
        let b = watershed_levels(&topo, 6, s, c, Some(&m), lines).unwrap();
        prop_assert_eq!(a.labels, b.labels);
    }
}

#[test]
fn dumbbell_splits_at_the_neck() {
    // Two balls joined by a thin bar; the topography rises towards the neck.
    let d = Dims::new(25, 11, 11).unwrap();
    let left = ball(d, [5.0, 5.0, 5.0], 4.5);
    let right = ball(d, [19.0, 5.0, 5.0], 4.5);
    let bar = BinaryVolume::from_fn(d, |x, y, z| (5..=19).contains(&x) && y == 5 && z == 5);
    let body = left.or(&right).unwrap().or(&bar).unwrap();
    let topo = GreyVolume::from_fn(d, |x, _, _| {
        100 - (x as i32 - 12).unsigned_abs().min(100) as u8 * 5
    });
    let mut seeds = LabelVolume::zeros(d);
    seeds.set(5, 5, 5, 1);
    seeds.set(19, 5, 5, 2);
    let out =
        watershed_from_labels(&topo, &seeds, Connectivity::TwentySix, Some(&body), false).unwrap();
    let second = select_basin(&out, 2).unwrap();
    assert!(right.is_subset_of(&second));
    assert_eq!(second.overlap_count(&left).unwrap(), 0);
    assert_eq!(select_basin(&out, 1).unwrap().or(&second).unwrap(), body);
}

#[test]
fn seed_outside_mask_is_rejected() {
    let d = Dims::new(4, 1, 1).unwrap();
    let t = GreyVolume::filled(d, 0);
    let s = LabelVolume::from_vec(d, vec![1, 0, 0, 2]).unwrap();
    let m = BinaryVolume::from_flags(d, &[1, 1, 1, 0]).unwrap();
    assert!(matches!(
        watershed_from_labels(&t, &s, Connectivity::Six, Some(&m), false),
        Err(Error::SeedOutsideMask { count: 1 })
    ));
}
