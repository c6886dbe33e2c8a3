//! The Green potential on the coded shift, its truncated transfer operator and the
//! pressure.
//!
//! For a path `x` from `v_*`, `φ_r(x) = ln H(e, φ(x)|r) − ln H(e, φ(Tx)|r)` with
//! `H(x, y) = G(x, y) G(y, x)`; summing along a path telescopes, so
//! `(L_r^n 1)(∅) · H(e, e) = Σ_{γ ∈ Ŝ_n} H(e, γ)`.

use std::collections::HashMap;
use std::sync::Mutex;

use petgraph::algo::{has_path_connecting, tarjan_scc};
use petgraph::graph::{DiGraph, NodeIndex};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::coding::Automaton;
use crate::error::{Error, Result};
use crate::green::GreenOracle;
use crate::group::{FactorElement, GroupElement};
use crate::numeric::least_squares;

/// `φ_r` on finite paths, with `ln H(e, γ)` cached per element.
pub struct Potential<'a> {
    oracle: &'a dyn GreenOracle,
    r: f64,
    cache: Mutex<HashMap<GroupElement, (f64, f64)>>,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct PotentialValue {
    pub value: f64,
    /// Absolute error propagated from the Green tails.
    pub tolerance: f64,
}

impl<'a> Potential<'a> {
    pub fn new(oracle: &'a dyn GreenOracle, r: f64) -> Result<Self> {
        if r <= 0.0 {
            return Err(Error::InvalidArgument(
                "the potential needs r > 0 (G(e, γ|0) vanishes off e)".into(),
            ));
        }
        Ok(Potential {
            oracle,
            r,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `ln H(e, γ|r)` and its relative error.
    pub fn log_h(&self, gamma: &GroupElement) -> Result<(f64, f64)> {
        if let Some(v) = self.cache.lock().expect("poisoned").get(gamma) {
            return Ok(*v);
        }
        let there = self.oracle.green_from_origin(gamma, self.r)?;
        let back = self.oracle.green(gamma, &GroupElement::identity(), self.r)?;
        let v = (
            there.value.ln() + back.value.ln(),
            there.tail / there.value + back.tail / back.value,
        );
        self.cache.lock().expect("poisoned").insert(gamma.clone(), v);
        Ok(v)
    }

    /// `φ_r(x)` using `H(e, φ(Tx)) = H(φ(x_1), φ(x))`.
    pub fn eval(&self, path: &[FactorElement]) -> Result<PotentialValue> {
        if path.is_empty() {
            return Err(Error::InvalidArgument("the potential is not defined on the empty word".into()));
        }
        let (a, ea) = self.log_h(&GroupElement::from_path(path))?;
        let (b, eb) = self.log_h(&GroupElement::from_path(&path[1..]))?;
        Ok(PotentialValue {
            value: a - b,
            tolerance: ea + eb,
        })
    }
}

/// With one factor the shift has no infinite paths.
fn two_factors(automaton: &Automaton) -> Result<()> {
    if automaton.group().n_factors() < 2 {
        return Err(Error::InvalidArgument(
            "the coded shift needs at least two factors".into(),
        ));
    }
    Ok(())
}

/// Depth-`m` continuation starting with `s`: after `s`, repeatedly the smallest symbol
/// of the first factor allowed next.
fn representative(automaton: &Automaton, s: FactorElement, depth: usize) -> Vec<FactorElement> {
    let mut w = vec![s];
    while w.len() < depth {
        let last = w.last().expect("non-empty").factor_id();
        let k = (0..automaton.group().n_factors())
            .find(|&k| k != last && !automaton.labels(k).is_empty())
            .expect("at least two factors");
        w.push(automaton.labels(k)[0]);
    }
    w
}

/// Truncated transfer operator: `m[s' · n + s] = exp φ_r(s' · w_s)` when `s'` may precede `s`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TransferMatrix {
    pub r: f64,
    pub cap: u32,
    pub depth: usize,
    #[serde(skip)]
    pub symbols: Vec<FactorElement>,
    pub entries: Vec<f64>,
    /// `exp φ_r((s))`: the operator applied at the empty word.
    pub start: Vec<f64>,
    /// Largest propagated tolerance of an entry, relative.
    pub tolerance: f64,
}

impl TransferMatrix {
    pub fn new(potential: &Potential, automaton: &Automaton, depth: usize) -> Result<Self> {
        two_factors(automaton)?;
        let symbols = automaton.symbols();
        let n = symbols.len();
        let mut entries = vec![0.0; n * n];
        let mut start = vec![0.0; n];
        let mut tolerance: f64 = 0.0;
        for (j, &s) in symbols.iter().enumerate() {
            let v = potential.eval(&[s])?;
            start[j] = v.value.exp();
            let w = representative(automaton, s, depth.max(1));
            for (i, &sp) in symbols.iter().enumerate() {
                if !automaton.allowed(&sp, &s) {
                    continue;
                }
                let mut path = vec![sp];
                path.extend_from_slice(&w);
                let v = potential.eval(&path)?;
                entries[i * n + j] = v.value.exp();
                tolerance = tolerance.max(v.tolerance);
            }
        }
        Ok(TransferMatrix {
            r: potential.r(),
            cap: automaton.cap(),
            depth,
            symbols,
            entries,
            start,
            tolerance,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.len() + to]
    }

    /// `(L^n 1_{E_*})(∅)` for `n = 1..=n_max`: paths are grown at the front.
    pub fn iterate_from_empty(&self, n_max: usize) -> Vec<f64> {
        let n = self.len();
        let mut u = self.start.clone();
        let mut out = Vec::with_capacity(n_max);
        for step in 1..=n_max {
            out.push(u.iter().sum());
            if step == n_max {
                break;
            }
            let mut next = vec![0.0; n];
            for (i, x) in next.iter_mut().enumerate() {
                *x = (0..n).map(|j| self.get(i, j) * u[j]).sum();
            }
            u = next;
        }
        out
    }
}

/// `(L f)[s] = Σ_{s'} exp φ(s' w_s) f[s']`, with functions given on first-symbol cylinders.
pub fn transfer_apply(m: &TransferMatrix, f: &[f64]) -> Result<Vec<f64>> {
    let n = m.len();
    if f.len() != n {
        return Err(Error::InvalidArgument(format!(
            "vector of length {} for an operator on {n} symbols",
            f.len()
        )));
    }
    Ok((0..n)
        .map(|s| (0..n).map(|sp| m.get(sp, s) * f[sp]).sum())
        .collect())
}

/// Leading eigenvalue of a non-negative matrix by power iteration on `A + I`, with the
/// Collatz–Wielandt bracket as stopping rule (the shift removes periodicity).
fn leading_eigenvalue(
    a: &[f64],
    n: usize,
    idx: &[usize],
    tol: f64,
    max_iters: usize,
) -> (f64, usize, bool) {
    let k = idx.len();
    let has_edge = idx.iter().any(|&i| idx.iter().any(|&j| a[i * n + j] > 0.0));
    if !has_edge {
        return (0.0, 0, true);
    }
    let mut v = vec![1.0; k];
    let mut est = 0.0;
    for it in 1..=max_iters {
        let w: Vec<f64> = (0..k)
            .map(|p| v[p] + (0..k).map(|q| a[idx[p] * n + idx[q]] * v[q]).sum::<f64>())
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (x, y) in w.iter().zip(&v) {
            lo = lo.min(x / y);
            hi = hi.max(x / y);
        }
        est = 0.5 * (lo + hi) - 1.0;
        if hi - lo <= tol * hi {
            return (est, it, true);
        }
        let norm = w.iter().copied().fold(0.0, f64::max);
        v = w.iter().map(|x| (x / norm).max(1e-300)).collect();
    }
    (est, max_iters, false)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ComponentPressure {
    /// Indices into the symbol list.
    pub symbols: Vec<usize>,
    pub lambda: f64,
    pub pressure: f64,
    pub maximal: bool,
    /// Gcd of cycle lengths through the component.
    pub period: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PressureRung {
    pub cap: u32,
    pub depth: usize,
    pub symbols: usize,
    pub lambda: f64,
    pub pressure: f64,
    pub components: Vec<ComponentPressure>,
    /// No maximal component reaches another maximal one.
    pub semisimple: bool,
    pub converged: bool,
    pub tolerance: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct PressureEstimate {
    pub r: f64,
    pub ladder: Vec<PressureRung>,
    /// Value of the last rung.
    pub pressure: f64,
    pub lambda: f64,
    /// The last two rungs agree to `stabilization_tol`.
    pub stabilized: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureOptions {
    pub caps: Vec<u32>,
    pub depths: Vec<usize>,
    pub tol: f64,
    pub max_iters: usize,
    pub stabilization_tol: f64,
}

impl Default for PressureOptions {
    fn default() -> Self {
        PressureOptions {
            caps: vec![2, 3, 4, 6, 8],
            depths: vec![3],
            tol: 1e-10,
            max_iters: 100_000,
            stabilization_tol: 1e-2,
        }
    }
}

fn cycle_period(graph: &DiGraph<(), ()>, nodes: &[NodeIndex]) -> usize {
    use std::collections::VecDeque;
    let inside: HashMap<NodeIndex, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    let mut level: HashMap<NodeIndex, i64> = HashMap::from([(nodes[0], 0)]);
    let mut queue = VecDeque::from([nodes[0]]);
    let mut g = 0i64;
    while let Some(u) = queue.pop_front() {
        for v in graph.neighbors(u) {
            if !inside.contains_key(&v) {
                continue;
            }
            match level.get(&v) {
                Some(&lv) => g = num_integer::gcd(g, (level[&u] + 1 - lv).abs()),
                None => {
                    level.insert(v, level[&u] + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    g.max(1) as usize
}

/// Pressure and component structure of one truncated operator.
pub fn pressure_of(m: &TransferMatrix, tol: f64, max_iters: usize) -> PressureRung {
    let n = m.len();
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if m.get(i, j) > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut components = Vec::new();
    let mut converged = true;
    let sccs = tarjan_scc(&graph);
    for scc in &sccs {
        let mut idx: Vec<usize> = scc.iter().map(|x| x.index()).collect();
        idx.sort();
        let (lambda, _, ok) = leading_eigenvalue(&m.entries, n, &idx, tol, max_iters);
        converged &= ok;
        components.push(ComponentPressure {
            symbols: idx,
            lambda,
            pressure: lambda.ln(),
            maximal: false,
            period: cycle_period(&graph, scc),
        });
    }
    let lambda = components.iter().map(|c| c.lambda).fold(0.0, f64::max);
    for c in components.iter_mut() {
        c.maximal = lambda > 0.0 && (c.lambda - lambda).abs() <= 1e-8 * lambda;
    }
    let maximal: Vec<usize> = (0..components.len()).filter(|&i| components[i].maximal).collect();
    let semisimple = maximal.iter().all(|&a| {
        maximal.iter().all(|&b| {
            a == b
                || !has_path_connecting(
                    &graph,
                    nodes[components[a].symbols[0]],
                    nodes[components[b].symbols[0]],
                    None,
                )
        })
    });
    PressureRung {
        cap: m.cap,
        depth: m.depth,
        symbols: n,
        lambda,
        pressure: lambda.ln(),
        components,
        semisimple,
        converged,
        tolerance: m.tolerance,
    }
}

/// Pressure at `r` over the `(D, m)` ladder.
pub fn pressure(oracle: &dyn GreenOracle, r: f64, opts: &PressureOptions) -> Result<PressureEstimate> {
    let potential = Potential::new(oracle, r)?;
    let mut ladder = Vec::new();
    for &cap in &opts.caps {
        let automaton = Automaton::new(oracle.group(), cap)?;
        for &depth in &opts.depths {
            let m = TransferMatrix::new(&potential, &automaton, depth)?;
            ladder.push(pressure_of(&m, opts.tol, opts.max_iters));
        }
    }
    let last = ladder
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty pressure ladder".into()))?;
    let (pressure, lambda) = (last.pressure, last.lambda);
    let stabilized = ladder.len() >= 2
        && (ladder[ladder.len() - 1].pressure - ladder[ladder.len() - 2].pressure).abs()
            <= opts.stabilization_tol;
    Ok(PressureEstimate {
        r,
        ladder,
        pressure,
        lambda,
        stabilized,
    })
}

/// Periodic-orbit sums `Z_n = Σ_{T^n x = x} exp S_n φ(x)` for `n = 1..=n_max`, with each
/// `φ(T^i x)` evaluated on `depth + 1` symbols of the periodic continuation.
pub fn periodic_sums(
    potential: &Potential,
    automaton: &Automaton,
    n_max: usize,
    depth: usize,
) -> Result<Vec<f64>> {
    let symbols = automaton.symbols();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut total = 0.0;
        let mut word = Vec::with_capacity(n);
        cycles(automaton, &symbols, n, &mut word, &mut |w| {
            let mut s = 0.0;
            for i in 0..n {
                let path: Vec<FactorElement> = (0..=depth).map(|j| w[(i + j) % n]).collect();
                s += potential.eval(&path)?.value;
            }
            total += s.exp();
            Ok(())
        })?;
        out.push(total);
    }
    Ok(out)
}

fn cycles(
    automaton: &Automaton,
    symbols: &[FactorElement],
    n: usize,
    word: &mut Vec<FactorElement>,
    f: &mut impl FnMut(&[FactorElement]) -> Result<()>,
) -> Result<()> {
    if word.len() == n {
        if automaton.allowed(&word[n - 1], &word[0]) {
            f(word)?;
        }
        return Ok(());
    }
    for s in symbols {
        if word.last().is_some_and(|l| !automaton.allowed(l, s)) {
            continue;
        }
        word.push(*s);
        cycles(automaton, symbols, n, word, f)?;
        word.pop();
    }
    Ok(())
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct HolderFit {
    /// `(n, max |φ(x) − φ(y)|)` over sampled pairs sharing exactly `n` leading symbols.
    pub variation: Vec<(usize, f64)>,
    pub c: f64,
    pub rho: f64,
    /// All sampled variations vanish to rounding: the potential only sees the first symbol.
    pub exact: bool,
}

/// Samples pairs of paths of length `len` sharing their first `n` symbols and fits
/// `max |Δφ| ≈ C ρ^n`.
pub fn holder_fit(
    potential: &Potential,
    automaton: &Automaton,
    shared: std::ops::RangeInclusive<usize>,
    len: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<HolderFit> {
    two_factors(automaton)?;
    let symbols = automaton.symbols();
    let random_path = |prefix: &[FactorElement], rng: &mut dyn rand::RngCore| {
        let mut p = prefix.to_vec();
        while p.len() < len {
            let options: Vec<&FactorElement> = symbols
                .iter()
                .filter(|s| p.last().is_none_or(|l| automaton.allowed(l, s)))
                .collect();
            p.push(**options.choose(rng).expect("two factors"));
        }
        p
    };
    let mut variation = Vec::new();
    for n in shared {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = random_path(&[], rng);
            let mut y = random_path(&x[..n], rng);
            // force a disagreement right after the shared prefix when possible
            if n < len && y[n] == x[n] {
                y = random_path(&x[..n], rng);
            }
            if n < len && y[n] == x[n] {
                continue;
            }
            let d = (potential.eval(&x)?.value - potential.eval(&y)?.value).abs();
            worst = worst.max(d);
        }
        variation.push((n, worst));
    }
    let exact = variation.iter().all(|(_, v)| *v <= 1e-12);
    let pts: Vec<(f64, f64)> = variation
        .iter()
        .filter(|(_, v)| *v > 1e-12)
        .map(|&(n, v)| (n as f64, v.ln()))
        .collect();
    let (c, rho) = if exact || pts.len() < 2 {
        (variation.iter().map(|v| v.1).fold(0.0, f64::max), 0.0)
    } else {
        let x: Vec<Vec<f64>> = pts.iter().map(|(n, _)| vec![1.0, *n]).collect();
        let y: Vec<f64> = pts.iter().map(|(_, l)| *l).collect();
        match least_squares(&x, &y) {
            Some((coef, _)) => (coef[0].exp(), coef[1].exp()),
            None => (f64::NAN, f64::NAN),
        }
    };
    Ok(HolderFit {
        variation,
        c,
        rho,
        exact,
    })
}
