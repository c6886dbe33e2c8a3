use relwalk::green::{
    first_passage, green_derivative, i_sums, i_sums_generic, parabolic_i_sums, BallGreen,
    DerivativeMode, GreenOracle, RadialGreen, RadialGreenOptions,
};
use relwalk::group::{FactorSpec, FreeProduct, GroupElement};
use relwalk::walk::StepMeasure;
use relwalk::Budget;

/// Closed form for the simple walk on the 4-regular tree.
fn tree_green(r: f64) -> f64 {
    6.0 / (2.0 + (16.0 - 12.0 * r * r).max(0.0).sqrt())
}

fn tree_green_prime(r: f64) -> f64 {
    let h = 1e-6;
    (tree_green(r + h) - tree_green(r - h)) / (2.0 * h)
}

fn f2() -> (FreeProduct, RadialGreen) {
    let g = FreeProduct::free_group(2).unwrap();
    let mu = StepMeasure::simple_random_walk(&g).unwrap();
    let rg = RadialGreen::new(&g, &mu, RadialGreenOptions::default()).unwrap();
    (g, rg)
}

#[test]
fn free_group_radius_matches_kesten() {
    let (_, rg) = f2();
    let est = rg.estimate();
    assert!((est.rho_hat - 3f64.sqrt() / 2.0).abs() < 1e-6, "{}", est.rho_hat);
    assert!(est.consistent && est.exceeds_one());
}

#[test]
fn involution_product_radius() {
    let g = FreeProduct::cyclic_product(&[2, 2, 2]).unwrap();
    let mu = StepMeasure::simple_random_walk(&g).unwrap();
    let rg = RadialGreen::new(&g, &mu, RadialGreenOptions::default()).unwrap();
    let expect = 2.0 * 2f64.sqrt() / 3.0;
    assert!((rg.estimate().rho_hat - expect).abs() < 1e-6);
}

#[test]
fn line_is_amenable() {
    let g = FreeProduct::new(vec![FactorSpec::free_abelian(0, 1).unwrap()]).unwrap();
    let mu = StepMeasure::simple_random_walk(&g).unwrap();
    let rg = RadialGreen::new(&g, &mu, RadialGreenOptions::default()).unwrap();
    assert!((rg.estimate().r_hat - 1.0).abs() < 1e-3);
    let e = GroupElement::identity();
    let v = rg.green(&e, &e, 0.5).unwrap();
    assert!((v.value - 2.0 / 3f64.sqrt()).abs() < 1e-10);
    let d = green_derivative(&rg, &e, &e, 0.5, DerivativeMode::Series).unwrap();
    assert!((d.value - 0.75f64.powf(-1.5)).abs() < 1e-9);
}

#[test]
fn tree_green_values() {
    let (g, rg) = f2();
    let e = GroupElement::identity();
    let a = g.parse("0:1").unwrap();
    assert_eq!(rg.green(&e, &e, 0.0).unwrap().value, 1.0);
    assert!((rg.green(&e, &e, 1.0).unwrap().value - 1.5).abs() < 1e-12);
    assert!((rg.green(&e, &a, 1.0).unwrap().value - 0.5).abs() < 1e-12);
    for q in [0.5, 0.9, 0.99] {
        let r = q * rg.r_hat();
        let v = rg.green(&e, &e, r).unwrap();
        assert!((v.value - tree_green(r)).abs() < 1e-9, "r={r}");
    }
    // at the radius itself the series converges slowly; the tail is reported, not hidden
    let at_r = rg.green(&e, &e, rg.r_hat()).unwrap();
    assert!((at_r.value - tree_green(rg.r_hat())).abs() < 0.02 * tree_green(rg.r_hat()));
    assert!(at_r.tail > 0.0);
}

#[test]
fn beyond_radius_is_divergent() {
    let (_, rg) = f2();
    let e = GroupElement::identity();
    assert!(rg.green(&e, &e, 1.2).is_err());
}

#[test]
fn first_passage_on_the_tree() {
    let (g, rg) = f2();
    let e = GroupElement::identity();
    let a = g.parse("0:1").unwrap();
    let ai = g.parse("0:-1").unwrap();
    let b = g.parse("1:1").unwrap();
    let f = first_passage(&rg, &a, &e, 1.0, 400).unwrap();
    assert!((f.value - 1.0 / 3.0).abs() < 1e-9);
    let f2 = first_passage(&rg, &ai, &b, 1.0, 400).unwrap();
    assert!((f2.value - 1.0 / 9.0).abs() < 1e-9);
    assert_eq!(first_passage(&rg, &a, &a, 0.7, 10).unwrap().value, 1.0);
    // G = F·G(e,e)
    let r = 0.9 * rg.r_hat();
    let f = first_passage(&rg, &e, &b, r, 2000).unwrap().value;
    let ge = rg.green(&e, &e, r).unwrap().value;
    let gb = rg.green(&e, &b, r).unwrap().value;
    assert!((f * ge - gb).abs() < 1e-9);
}

#[test]
fn derivative_modes_agree() {
    let (g, rg) = f2();
    let e = GroupElement::identity();
    for q in [0.0, 0.5, 0.8, 0.9] {
        let r = q * rg.r_hat();
        let s = green_derivative(&rg, &e, &e, r, DerivativeMode::Series).unwrap().value;
        let i = green_derivative(&rg, &e, &e, r, DerivativeMode::Identity).unwrap().value;
        assert!((s - i).abs() < 1e-6 * s, "r={r}: {s} vs {i}");
        let closed = tree_green(r) + r * tree_green_prime(r);
        assert!((s - closed).abs() < 1e-5 * closed);
    }
    let a = g.parse("0:1 1:1").unwrap();
    let r = 0.6 * rg.r_hat();
    let s = green_derivative(&rg, &e, &a, r, DerivativeMode::Series).unwrap().value;
    let i = green_derivative(&rg, &e, &a, r, DerivativeMode::Identity).unwrap().value;
    assert!((s - i).abs() < 1e-4 * s, "{s} vs {i}");
}

#[test]
fn i_sums_match_closed_form_and_generic_sum() {
    let (g, rg) = f2();
    let s0 = i_sums(&rg, 0.0, 1e-10).unwrap();
    assert!((s0.i1 - 1.0).abs() < 1e-12 && (s0.i2 - 1.0).abs() < 1e-12);
    let r = 0.9 * rg.r_hat();
    let s = i_sums(&rg, r, 1e-10).unwrap();
    let i1 = tree_green(r) + r * tree_green_prime(r);
    assert!((s.i1 - i1).abs() < 1e-5 * i1);
    // I2 = G + 2rG' + r²G''/2 on any group
    let h = 1e-4;
    let gpp = (tree_green(r + h) - 2.0 * tree_green(r) + tree_green(r - h)) / (h * h);
    let i2 = tree_green(r) + 2.0 * r * tree_green_prime(r) + 0.5 * r * r * gpp;
    assert!((s.i2 - i2).abs() < 1e-3 * i2, "{} vs {i2}", s.i2);
    // direct double sum at small r
    let r = 0.3;
    let direct = i_sums_generic(&rg, r, 6, 6, 1e-9, &Budget::default()).unwrap();
    let fast = i_sums(&rg, r, 1e-12).unwrap();
    assert!((direct.i1 - fast.i1).abs() < 1e-6 * fast.i1);
    assert!((direct.i2 - fast.i2).abs() < 1e-4 * fast.i2);
    let _ = g;
}

#[test]
fn relative_sphere_sums_stay_bounded_at_the_radius() {
    let (_, rg) = f2();
    let r = rg.r_hat();
    let row = rg.row(r, 200).unwrap();
    let g0 = row.g[0].value;
    let census = relwalk::group::SphereCensus::new(&FreeProduct::free_group(2).unwrap(), 200);
    for m in 1..=8 {
        let s: f64 = (m as u32..=200)
            .map(|u| census.count(m, u) * row.g[u as usize].value.powi(2))
            .sum();
        // every relative sphere carries 2·G(R)² on the tree
        assert!((s - 2.0 * g0 * g0).abs() < 0.05 * s, "m={m}: {s}");
    }
}

#[test]
fn parabolic_sums_are_finite() {
    let (_, rg) = f2();
    let p1 = parabolic_i_sums(&rg, 0, 0.0, 1, 1e-8).unwrap();
    assert!((p1.value - 1.0).abs() < 1e-12);
    let p = parabolic_i_sums(&rg, 0, 1.0, 1, 1e-8).unwrap();
    assert!(p.converged);
    let p2 = parabolic_i_sums(&rg, 0, rg.r_hat(), 2, 1e-6).unwrap();
    assert!(p2.converged && p2.value.is_finite());
}

#[test]
fn killed_ball_agrees_with_radial_engine() {
    let (g, rg) = f2();
    let mu = StepMeasure::simple_random_walk(&g).unwrap();
    let bg = BallGreen::new(&g, &mu, 9, rg.r_hat(), &Budget::default()).unwrap();
    let e = GroupElement::identity();
    let x = g.parse("0:1 1:-1").unwrap();
    for r in [0.5, 1.0] {
        let a = bg.green(&e, &x, r).unwrap();
        let b = rg.green(&e, &x, r).unwrap();
        assert!((a.value - b.value).abs() <= a.tail + 1e-9, "{a:?} vs {b:?}");
    }
}
