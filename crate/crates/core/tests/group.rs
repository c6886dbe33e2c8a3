use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use relwalk::group::*;
use relwalk::Budget;

/// Z/3 * Z/2 with t = "0:1" and s = "1:1".
fn modular() -> FreeProduct {
    FreeProduct::cyclic_product(&[3, 2]).unwrap()
}

/// Letter-by-letter reduction of a word over cyclic factors, `(factor, exponent)`.
fn naive_reduce(word: &[(usize, usize)], orders: &[usize]) -> Vec<(usize, usize)> {
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for &(k, x) in word {
        match stack.last_mut() {
            Some(top) if top.0 == k => {
                top.1 = (top.1 + x) % orders[k];
                if top.1 == 0 {
                    stack.pop();
                }
            }
            _ => {
                if x % orders[k] != 0 {
                    stack.push((k, x % orders[k]));
                }
            }
        }
    }
    stack
}

fn to_text(word: &[(usize, usize)]) -> String {
    if word.is_empty() {
        return "e".into();
    }
    word.iter().map(|(k, x)| format!("{k}:{x}")).collect::<Vec<_>>().join(" ")
}

#[test]
fn spec_examples() {
    let g = modular();
    let p = |w: &str| g.parse(w).unwrap();
    assert_eq!(g.mul(&p("0:1"), &p("0:1")), p("0:2"));
    assert_eq!(g.mul(&p("0:1 1:1"), &p("1:1 0:1")), p("0:2"));
    assert_eq!(g.invert(&p("0:1 1:1")), p("1:1 0:2"));
    assert_eq!(g.invert(&GroupElement::identity()), GroupElement::identity());
    let a = p("0:1 1:1 0:2");
    assert_eq!(g.mul(&a, &g.invert(&a)), GroupElement::identity());
}

#[test]
fn normal_forms_match_naive_reduction() {
    let g = modular();
    let letters = [(0, 1), (0, 2), (1, 1)];
    let mut words: Vec<Vec<(usize, usize)>> = vec![vec![]];
    let mut frontier = words.clone();
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|w| letters.iter().map(move |l| [w.clone(), vec![*l]].concat()))
            .collect();
        words.extend(frontier.iter().cloned());
    }
    for w in &words {
        let expect = g.parse(&to_text(&naive_reduce(w, &[3, 2]))).unwrap();
        for cut in 0..=w.len() {
            // the halves are not reduced; parse them by naive reduction, then multiply
            let left = g.parse(&to_text(&naive_reduce(&w[..cut], &[3, 2]))).unwrap();
            let right = g.parse(&to_text(&naive_reduce(&w[cut..], &[3, 2]))).unwrap();
            assert_eq!(g.mul(&left, &right), expect, "{w:?} at {cut}");
        }
    }
}

/// Breadth-first distances in the Cayley graph with every factor element as a generator.
fn relative_bfs(g: &FreeProduct, radius: usize) -> BTreeMap<GroupElement, usize> {
    let gens: Vec<GroupElement> = g
        .factors()
        .iter()
        .flat_map(|f| f.nontrivial_elements(None).unwrap())
        .map(GroupElement::single)
        .collect();
    let mut dist = BTreeMap::from([(GroupElement::identity(), 0)]);
    let mut queue = VecDeque::from([GroupElement::identity()]);
    while let Some(x) = queue.pop_front() {
        let d = dist[&x];
        if d == radius {
            continue;
        }
        for s in &gens {
            let y = g.mul(&x, s);
            if !dist.contains_key(&y) {
                dist.insert(y.clone(), d + 1);
                queue.push_back(y);
            }
        }
    }
    dist
}

#[test]
fn relative_geodesics_agree_with_bfs() {
    let g = modular();
    let dist = relative_bfs(&g, 3);
    let target = g.parse("0:1 1:1 0:2").unwrap();
    let geo = g.rel_geodesic(&GroupElement::identity(), &target);
    let names: Vec<String> = geo.vertices.iter().map(|v| g.format(v)).collect();
    assert_eq!(names, ["e", "0:1", "0:1 1:1", "0:1 1:1 0:2"]);
    for (x, &d) in &dist {
        assert_eq!(g.rel_dist(&GroupElement::identity(), x), d);
        let geo = g.rel_geodesic(&GroupElement::identity(), x);
        assert_eq!(geo.len(), d);
        for (i, v) in geo.vertices.iter().enumerate() {
            assert_eq!(dist[v], i);
        }
    }
    let f2 = FreeProduct::free_group(2).unwrap();
    let geo = f2.rel_geodesic(&f2.parse("0:-1").unwrap(), &f2.parse("1:1").unwrap());
    assert_eq!(geo.len(), 2);
    assert!(geo.vertices[1].is_identity());
}

#[test]
fn ball_sizes() {
    let b = Budget::default();
    let f2 = FreeProduct::free_group(2).unwrap();
    assert_eq!(ball(&f2, 1, Metric::Word, None, &b).unwrap().len(), 5);
    let layers = word_ball_layers(&f2, 8, &b).unwrap();
    for (n, layer) in layers.iter().enumerate().skip(1) {
        assert_eq!(layer.len(), 4 * 3usize.pow(n as u32 - 1));
    }
    let inv = FreeProduct::cyclic_product(&[2, 2, 2]).unwrap();
    assert_eq!(ball(&inv, 2, Metric::Word, None, &b).unwrap().len(), 10);
    // canonical ordering is deterministic and sorted
    let x = ball(&inv, 3, Metric::Relative, None, &b).unwrap();
    assert!(x.windows(2).all(|w| w[0] < w[1]));
    assert!(matches!(
        ball(&f2, 12, Metric::Word, None, &Budget::default().with_max_elements(1000)),
        Err(relwalk::Error::BudgetExceeded(_))
    ));
}

#[test]
fn metric_axioms_on_small_balls() {
    for g in [modular(), FreeProduct::free_group(2).unwrap()] {
        let radius = if g.has_infinite_factor() { 3 } else { 4 };
        let pts = ball(&g, radius, Metric::Word, None, &Budget::default()).unwrap();
        for x in &pts {
            assert!(g.rel_dist(&GroupElement::identity(), x) as u32 <= g.word_length(x));
            for y in &pts {
                let d = g.dist(x, y);
                assert_eq!(d, g.dist(y, x));
                assert_eq!(d == 0, x == y);
                assert_eq!(g.rel_dist(x, y), g.rel_dist(y, x));
                for z in pts.iter().step_by(3) {
                    assert!(g.dist(x, z) <= d + g.dist(y, z));
                    assert!(g.rel_dist(x, z) <= g.rel_dist(x, y) + g.rel_dist(y, z));
                }
            }
        }
    }
}

/// Z^2 * Z/3 * Z: every factor kind at once.
fn mixed() -> FreeProduct {
    FreeProduct::new(vec![
        FactorSpec::free_abelian(0, 2).unwrap(),
        FactorSpec::finite(1, FiniteGroup::cyclic(3).unwrap()),
        FactorSpec::free_abelian(2, 1).unwrap(),
    ])
    .unwrap()
}

fn element() -> impl Strategy<Value = GroupElement> {
    let letter = prop_oneof![
        (-2i64..=2, -2i64..=2).prop_map(|(a, b)| format!("0:[{a},{b}]")),
        (1usize..3).prop_map(|x| format!("1:{x}")),
        (-3i64..=3).prop_map(|x| format!("2:{x}")),
    ];
    prop::collection::vec(letter, 0..8).prop_map(|ls| {
        let g = mixed();
        ls.iter().fold(GroupElement::identity(), |acc, l| {
            let x = g.parse(l).unwrap();
            g.mul(&acc, &x)
        })
    })
}

proptest! {
    #[test]
    fn group_axioms(a in element(), b in element(), c in element()) {
        let g = mixed();
        prop_assert_eq!(g.mul(&g.mul(&a, &b), &c), g.mul(&a, &g.mul(&b, &c)));
        prop_assert_eq!(g.mul(&a, &g.invert(&a)), GroupElement::identity());
        prop_assert_eq!(g.invert(&g.invert(&a)), a.clone());
        prop_assert_eq!(g.mul(&GroupElement::identity(), &a), a.clone());
        prop_assert!(g.validate(&a).is_ok());
        let syl = a.syllables();
        prop_assert!(syl.windows(2).all(|w| w[0].factor_id() != w[1].factor_id()));
        prop_assert!(syl.iter().all(|s| !s.is_identity()));
    }

    #[test]
    fn metrics_and_geodesics(a in element(), b in element()) {
        let g = mixed();
        prop_assert!(g.rel_dist(&a, &b) as u32 <= g.dist(&a, &b));
        prop_assert!(g.word_length(&g.mul(&a, &b)) <= g.word_length(&a) + g.word_length(&b));
        let geo = g.rel_geodesic(&a, &b);
        prop_assert_eq!(geo.vertices.first().unwrap(), &a);
        prop_assert_eq!(geo.vertices.last().unwrap(), &b);
        for w in geo.vertices.windows(2) {
            prop_assert_eq!(g.rel_dist(&w[0], &w[1]), 1);
        }
        prop_assert_eq!(g.parse(&g.format(&a)).unwrap(), a);
    }
}

#[test]
fn mixed_group_sets_are_consistent() {
    let g = mixed();
    let b = ball(&g, 2, Metric::Word, None, &Budget::default()).unwrap();
    let set: BTreeSet<_> = b.iter().collect();
    assert_eq!(set.len(), b.len());
    assert!(b.iter().all(|x| g.word_length(x) <= 2));
}
