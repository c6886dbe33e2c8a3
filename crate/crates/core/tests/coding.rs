use std::collections::{HashSet, VecDeque};

use relwalk::coding::{check_bijection, fellow_travel_time, Automaton};
use relwalk::group::{FactorElement, FreeProduct, GroupElement};
use relwalk::Budget;

/// Sphere sizes by breadth-first search in the graph whose edges are right
/// multiplications by short non-trivial factor elements.
fn bfs_sphere_sizes(group: &FreeProduct, cap: u32, max_n: usize) -> Vec<usize> {
    let gens: Vec<GroupElement> = group
        .factors()
        .iter()
        .flat_map(|f| f.nontrivial_elements(Some(cap)).unwrap())
        .map(GroupElement::single)
        .collect();
    let short = |x: &GroupElement| {
        x.syllables()
            .iter()
            .all(|s| group.factor(s.factor_id()).word_length(s) <= cap)
    };
    let mut seen = HashSet::from([GroupElement::identity()]);
    let mut queue = VecDeque::from([(GroupElement::identity(), 0usize)]);
    let mut sizes = vec![0; max_n + 1];
    while let Some((x, d)) = queue.pop_front() {
        if short(&x) {
            sizes[d] += 1;
        }
        if d == max_n {
            continue;
        }
        for s in &gens {
            let y = group.mul(&x, s);
            if seen.insert(y.clone()) {
                queue.push_back((y, d + 1));
            }
        }
    }
    sizes
}

#[test]
fn bijection_on_small_spheres() {
    let budget = Budget::default();
    for group in [
        FreeProduct::cyclic_product(&[2, 3]).unwrap(),
        FreeProduct::free_group(2).unwrap(),
    ] {
        for cap in 1..=2 {
            let a = Automaton::new(&group, cap).unwrap();
            let bfs = bfs_sphere_sizes(&group, cap, 5);
            for n in 0..=5 {
                let c = check_bijection(&a, n, &budget).unwrap();
                assert!(c.bijective && c.geodesic, "{c:?}");
                assert_eq!(c.paths, bfs[n], "n={n} D={cap}");
                assert_eq!(a.count_paths(n), bfs[n] as f64);
            }
        }
    }
}

#[test]
fn alternating_counts() {
    let g = FreeProduct::cyclic_product(&[2, 3]).unwrap();
    let a = Automaton::new(&g, 1).unwrap();
    let counts: Vec<f64> = (0..5).map(|n| a.count_paths(n)).collect();
    assert_eq!(counts, vec![1.0, 3.0, 4.0, 6.0, 8.0]);

    let f2 = FreeProduct::free_group(2).unwrap();
    let a = Automaton::new(&f2, 1).unwrap();
    for n in 1..8 {
        assert_eq!(a.count_paths(n), 4.0 * 2f64.powi(n as i32 - 1));
    }
    // grouping all paths by total label length recovers the tree's word spheres
    for n in 1..=5usize {
        let a = Automaton::new(&f2, n as u32).unwrap();
        let count: usize = (1..=n)
            .map(|k| {
                a.enumerate_sphere(k, &Budget::default())
                    .unwrap()
                    .iter()
                    .filter(|(_, x)| f2.word_length(x) as usize == n)
                    .count()
            })
            .sum();
        assert_eq!(count, 4 * 3usize.pow(n as u32 - 1));
    }
}

#[test]
fn first_spheres() {
    let f2 = FreeProduct::free_group(2).unwrap();
    let a = Automaton::new(&f2, 2).unwrap();
    let s0 = a.enumerate_sphere(0, &Budget::default()).unwrap();
    assert_eq!(s0.len(), 1);
    assert!(s0[0].1.is_identity());
    let s1 = a.enumerate_sphere(1, &Budget::default()).unwrap();
    let got: Vec<String> = s1.iter().map(|(_, x)| f2.format(x)).collect();
    assert_eq!(got.len(), 8);
    assert!(s1.windows(2).all(|w| w[0].1 < w[1].1));
    for (p, x) in &s1 {
        assert_eq!(a.phi(p).unwrap(), *x);
    }
}

#[test]
fn sphere_enumeration_respects_budget() {
    let f2 = FreeProduct::free_group(2).unwrap();
    let a = Automaton::new(&f2, 3).unwrap();
    let tight = Budget::default().with_max_elements(100);
    assert!(a.enumerate_sphere(4, &tight).is_err());
}

#[test]
fn fellow_travel() {
    let f2 = FreeProduct::free_group(2).unwrap();
    let e = GroupElement::identity();
    let x = f2.parse("0:1 1:1 0:-1 1:2").unwrap();
    let g = f2.rel_geodesic(&e, &x);
    assert_eq!(fellow_travel_time(&f2, &g, &g, 0), g.len() + 1);
    assert_eq!(fellow_travel_time(&f2, &g, &g, 1), fellow_travel_time(&f2, &g, &g, 1));
    let y = f2.parse("1:-1 0:1").unwrap();
    assert_eq!(fellow_travel_time(&f2, &g, &f2.rel_geodesic(&e, &y), 0), 1);
    for k in 0..=3 {
        let z = GroupElement::from_path(
            &[
                x.syllables()[..k].to_vec(),
                vec![FactorElement::lattice(if k == 0 { 1 } else { k % 2 }, &[5]).unwrap()],
            ]
            .concat(),
        );
        let h = f2.rel_geodesic(&e, &z);
        assert_eq!(fellow_travel_time(&f2, &g, &h, 0), k + 1, "k={k}");
    }
    // a fatter neighbourhood can only add points
    let h = f2.rel_geodesic(&e, &y);
    assert!(fellow_travel_time(&f2, &g, &h, 2) >= fellow_travel_time(&f2, &g, &h, 0));
}

#[test]
fn dot_and_csv() {
    let g = FreeProduct::cyclic_product(&[2, 3]).unwrap();
    let a = Automaton::new(&g, 1).unwrap();
    let dot = a.to_dot();
    assert!(dot.starts_with("digraph") && dot.contains("v0 -> v1"));
    assert!(!dot.contains("-> v0"));
    let mut buf = Vec::new();
    a.write_sphere_csv(&mut buf, 3).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("n,D,count"));
    assert!(text.contains("2,1,4"));
}
