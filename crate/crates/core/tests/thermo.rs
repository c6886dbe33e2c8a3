use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relwalk::coding::Automaton;
use relwalk::green::{i_sums, BallGreen, RadialGreen, RadialGreenOptions};
use relwalk::group::{FactorElement, FreeProduct};
use relwalk::thermo::*;
use relwalk::walk::StepMeasure;
use relwalk::Budget;

fn tree_f(r: f64) -> f64 {
    (4.0 - (16.0 - 12.0 * r * r).max(0.0).sqrt()) / (6.0 * r)
}

fn tree_g(r: f64) -> f64 {
    1.0 / (1.0 - r * tree_f(r))
}

/// Truncated pressure of the tree potential: two factors, symbols `a^{±j}` (j ≤ D)
/// each weighted `F^{2j}`.
fn tree_pressure(r: f64, cap: i32) -> f64 {
    let f2 = tree_f(r).powi(2);
    (2.0 * (1..=cap).map(|j| f2.powi(j)).sum::<f64>()).ln()
}

fn f2_green() -> (FreeProduct, RadialGreen) {
    let g = FreeProduct::free_group(2).unwrap();
    let mu = StepMeasure::simple_random_walk(&g).unwrap();
    let rg = RadialGreen::new(&g, &mu, RadialGreenOptions::default()).unwrap();
    (g, rg)
}

const R_HAT: f64 = 1.1547005383792517;

#[test]
fn potential_on_single_symbols() {
    let (_, rg) = f2_green();
    let p = Potential::new(&rg, 1.0).unwrap();
    let a = FactorElement::lattice(0, &[1]).unwrap();
    let v = p.eval(&[a]).unwrap();
    assert!((v.value - (1.0f64 / 9.0).ln()).abs() < 1e-9, "{}", v.value);
    assert!(p.eval(&[]).is_err());
    assert!(Potential::new(&rg, 0.0).is_err());
}

#[test]
fn sphere_identity() {
    let (g, rg) = f2_green();
    let r = 0.9 * R_HAT;
    let p = Potential::new(&rg, r).unwrap();
    let automaton = Automaton::new(&g, 3).unwrap();
    let m = TransferMatrix::new(&p, &automaton, 3).unwrap();
    let iterates = m.iterate_from_empty(4);
    let (gg, f) = (tree_g(r), tree_f(r));
    for n in 1..=4 {
        // direct summation over the truncated sphere with the closed-form Green function
        let direct: f64 = automaton
            .enumerate_sphere(n, &Budget::default())
            .unwrap()
            .iter()
            .map(|(_, x)| (gg * f.powi(g.word_length(x) as i32)).powi(2))
            .sum();
        let via = iterates[n - 1] * gg * gg;
        assert!((via - direct).abs() / direct < 0.02, "n={n}: {via} vs {direct}");
    }
    assert_eq!(transfer_apply(&m, &vec![0.0; m.len()]).unwrap(), vec![0.0; m.len()]);
    assert!(transfer_apply(&m, &[1.0]).is_err());
    let once = transfer_apply(&m, &m.start).unwrap();
    assert!(once.iter().all(|x| *x >= 0.0));
}

#[test]
fn pressure_matches_tree_and_ladder_approaches_zero() {
    let (_, rg) = f2_green();
    let opts = PressureOptions {
        caps: vec![2, 4, 8],
        ..Default::default()
    };
    let est = pressure(&rg, R_HAT, &opts).unwrap();
    for rung in &est.ladder {
        let want = tree_pressure(R_HAT, rung.cap as i32);
        assert!((rung.pressure - want).abs() < 2e-3, "{} vs {want}", rung.pressure);
        assert!(rung.semisimple && rung.converged);
        assert_eq!(rung.components.iter().filter(|c| c.maximal).count(), 1);
    }
    let d4 = &est.ladder[1];
    assert!((-0.05..=0.01).contains(&d4.pressure));
    assert!(est.ladder.windows(2).all(|w| w[0].pressure < w[1].pressure));
    assert!(est.pressure.abs() < 2e-3, "{:?}", est.ladder.iter().map(|r| r.pressure).collect::<Vec<_>>());

    let mut prev = f64::NEG_INFINITY;
    for s in [0.5, 0.8, 0.9, 1.0] {
        let e = pressure(&rg, s * R_HAT, &PressureOptions::default()).unwrap();
        assert!(e.pressure < 0.0);
        assert!(e.lambda > prev);
        prev = e.lambda;
    }
}

#[test]
fn pressure_times_i1_stays_bounded() {
    let (_, rg) = f2_green();
    let mut products = Vec::new();
    for s in [0.9, 0.95, 0.98] {
        let r = s * R_HAT;
        let p = pressure(&rg, r, &PressureOptions::default()).unwrap();
        let i1 = i_sums(&rg, r, 1e-10).unwrap().i1;
        products.push(p.pressure.abs() * i1);
    }
    let (lo, hi) = products
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 4.0, "{products:?}");
}

#[test]
fn periodic_sums_and_recurrence() {
    let (g, rg) = f2_green();
    let r = 0.9 * R_HAT;
    let p = Potential::new(&rg, r).unwrap();
    let automaton = Automaton::new(&g, 2).unwrap();
    let m = TransferMatrix::new(&p, &automaton, 3).unwrap();
    let rung = pressure_of(&m, 1e-12, 100_000);
    let z = periodic_sums(&p, &automaton, 3, 3).unwrap();
    // two factors alternate, so only even periods carry orbits, and the leading
    // eigenvalue comes with its negative
    let period = rung.components[0].period;
    assert_eq!(period, 2);
    assert_eq!(z[0], 0.0);
    assert_eq!(z[2], 0.0);
    let per_step = (z[1] / period as f64).ln() / 2.0;
    assert!((per_step - rung.lambda.ln()).abs() < 0.1);
    let iterates = m.iterate_from_empty(8);
    let scaled: Vec<f64> = iterates
        .iter()
        .enumerate()
        .map(|(i, x)| x / rung.lambda.powi(i as i32 + 1))
        .collect();
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 2.0, "{scaled:?}");
}

#[test]
fn holder_variation() {
    let (g, rg) = f2_green();
    let p = Potential::new(&rg, 1.0).unwrap();
    let automaton = Automaton::new(&g, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fit = holder_fit(&p, &automaton, 1..=6, 8, 20, &mut rng).unwrap();
    // on the tree the potential depends on the first symbol only
    assert!(fit.exact, "{fit:?}");

    // nearest-neighbour walks factor through cut points, so the potential sees only
    // the first symbol; two-syllable steps make it depend on the tail. The step set
    // must not be invariant under inversion in Z/3, or every continuation of a
    // prefix looks the same to the walk.
    let g = FreeProduct::cyclic_product(&[2, 3]).unwrap();
    let steps: Vec<_> = ["0:1", "1:1", "1:2", "0:1 1:1", "1:2 0:1"]
        .iter()
        .map(|w| g.parse(w).unwrap())
        .collect();
    let mu = StepMeasure::uniform(&g, &steps).unwrap();
    let bg = BallGreen::new(&g, &mu, 16, 1.0116, &Budget::default()).unwrap();
    let p = Potential::new(&bg, 1.0).unwrap();
    let automaton = Automaton::new(&g, 1).unwrap();
    let fit = holder_fit(&p, &automaton, 1..=4, 6, 30, &mut rng).unwrap();
    assert!(!fit.exact && fit.rho < 1.0, "{fit:?}");
    assert!(fit.variation[3].1 < fit.variation[0].1 / 4.0, "{fit:?}");
}
