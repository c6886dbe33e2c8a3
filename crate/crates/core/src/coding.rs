//! The relative automatic structure of a free product.
//!
//! Vertices are a start vertex `v_*` and one vertex per factor ("the last syllable
//! came from factor k"). From every vertex other than `after(k)` there is an edge to
//! `after(k)` for each non-trivial element of `H_k`; paths from `v_*` spell normal
//! forms, one syllable per edge. The edge set is countable for infinite factors, so
//! labels are cut at factor word length `D`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::group::{FactorElement, FreeProduct, GroupElement, RelGeodesic};
use crate::Budget;

pub const START: usize = 0;

#[derive(Clone, Debug)]
pub struct Automaton {
    group: FreeProduct,
    cap: u32,
    /// Edge labels into `after(k)`, sorted.
    labels: Vec<Vec<FactorElement>>,
}

/// Vertex reached after reading a syllable of factor `k`.
pub fn after(k: usize) -> usize {
    k + 1
}

impl Automaton {
    pub fn new(group: &FreeProduct, cap: u32) -> Result<Self> {
        if cap == 0 {
            return Err(Error::InvalidArgument("the syllable cap D must be at least 1".into()));
        }
        let labels = group
            .factors()
            .iter()
            .map(|f| {
                let mut v = f.nontrivial_elements(Some(cap))?;
                v.sort();
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Automaton {
            group: group.clone(),
            cap,
            labels,
        })
    }

    pub fn group(&self) -> &FreeProduct {
        &self.group
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len() + 1
    }

    /// Labels of the edges into `after(k)`.
    pub fn labels(&self, k: usize) -> &[FactorElement] {
        &self.labels[k]
    }

    /// All edge labels, which are also the symbols of the coded shift.
    pub fn symbols(&self) -> Vec<FactorElement> {
        self.labels.iter().flatten().copied().collect()
    }

    /// Targets of the edges leaving `v`.
    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.labels.len()).map(after).filter(move |&w| w != v)
    }

    /// `(target, label)` for every edge leaving `v`.
    pub fn edges_from(&self, v: usize) -> impl Iterator<Item = (usize, FactorElement)> + '_ {
        self.successors(v)
            .flat_map(move |w| self.labels[w - 1].iter().map(move |s| (w, *s)))
    }

    /// Transition matrix of the shift: `s` may be followed by `t` iff they come from
    /// different factors.
    pub fn allowed(&self, s: &FactorElement, t: &FactorElement) -> bool {
        s.factor_id() != t.factor_id()
    }

    /// The element spelled by a path from `v_*`, checking that the path exists.
    pub fn phi(&self, path: &[FactorElement]) -> Result<GroupElement> {
        let mut v = START;
        for s in path {
            let k = s.factor_id();
            if k >= self.labels.len() || v == after(k) || self.labels[k].binary_search(s).is_err() {
                return Err(Error::InvalidArgument(format!(
                    "no edge labelled {s:?} leaves vertex {v}"
                )));
            }
            v = after(k);
        }
        Ok(GroupElement::from_path(path))
    }

    /// Number of paths of length `n` from `v_*`, by dynamic programming over vertices.
    pub fn count_paths(&self, n: usize) -> f64 {
        let m = self.labels.len();
        let sizes: Vec<f64> = self.labels.iter().map(|l| l.len() as f64).collect();
        let mut at = vec![0.0; m + 1];
        at[START] = 1.0;
        for _ in 0..n {
            let mut next = vec![0.0; m + 1];
            for (v, &c) in at.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for w in self.successors(v) {
                    next[w] += c * sizes[w - 1];
                }
            }
            at = next;
        }
        at.iter().sum()
    }

    /// Paths of length `n` from `v_*` and their images, in canonical order of the images.
    pub fn enumerate_sphere(
        &self,
        n: usize,
        budget: &Budget,
    ) -> Result<Vec<(Vec<FactorElement>, GroupElement)>> {
        budget.check(self.count_paths(n).min(usize::MAX as f64) as usize, "relative sphere")?;
        let mut out = Vec::new();
        let mut path = Vec::with_capacity(n);
        self.extend(START, n, &mut path, &mut out);
        out.sort_by(|a, b| a.1.cmp(&b.1));
        Ok(out)
    }

    fn extend(
        &self,
        v: usize,
        n: usize,
        path: &mut Vec<FactorElement>,
        out: &mut Vec<(Vec<FactorElement>, GroupElement)>,
    ) {
        if path.len() == n {
            out.push((path.clone(), GroupElement::from_path(path)));
            return;
        }
        for (w, s) in self.edges_from(v) {
            path.push(s);
            self.extend(w, n, path, out);
            path.pop();
        }
    }

    /// Number of distinct outgoing label sets; every vertex other than `v_*` has its own
    /// (it lacks exactly its own factor), so this is at most the number of factors plus one.
    pub fn distinct_rows(&self) -> usize {
        (0..self.n_vertices())
            .map(|v| self.successors(v).collect::<Vec<_>>())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Graphviz rendering; labels are listed when there are few of them.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph automaton {\n  rankdir=LR;\n  v0 [label=\"v*\", shape=doublecircle];\n");
        for k in 0..self.labels.len() {
            let _ = writeln!(s, "  v{} [label=\"after {k}\"];", after(k));
        }
        for v in 0..self.n_vertices() {
            for w in self.successors(v) {
                let labels = &self.labels[w - 1];
                let text = if labels.len() <= 6 {
                    labels
                        .iter()
                        .map(|x| self.group.format(&GroupElement::single(*x)))
                        .collect::<Vec<_>>()
                        .join(", ")
                } else {
                    format!("{} labels", labels.len())
                };
                let _ = writeln!(s, "  v{v} -> v{w} [label=\"{text}\"];");
            }
        }
        s.push_str("}\n");
        s
    }

    /// CSV `n,D,count` of relative sphere sizes.
    pub fn write_sphere_csv(&self, out: impl Write, max_n: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "D", "count"])?;
        for n in 0..=max_n {
            w.write_record([n.to_string(), self.cap.to_string(), self.count_paths(n).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of checking the path/element correspondence on one sphere.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BijectionCheck {
    pub n: usize,
    pub paths: usize,
    pub distinct_images: usize,
    /// Size of the truncated sphere built independently from alternating factor sequences.
    pub sphere_size: usize,
    /// Every image has exactly `n` syllables.
    pub geodesic: bool,
    pub bijective: bool,
}

pub fn check_bijection(automaton: &Automaton, n: usize, budget: &Budget) -> Result<BijectionCheck> {
    let paths = automaton.enumerate_sphere(n, budget)?;
    let group = automaton.group();
    let images: BTreeSet<&GroupElement> = paths.iter().map(|(_, x)| x).collect();
    let sphere = crate::group::relative_sphere(group, n, Some(automaton.cap()), budget)?;
    let geodesic = paths
        .iter()
        .all(|(p, x)| group.rel_dist(&GroupElement::identity(), x) == p.len() && x.rel_length() == n);
    let same_set = images.len() == sphere.len() && sphere.iter().all(|x| images.contains(x));
    Ok(BijectionCheck {
        n,
        paths: paths.len(),
        distinct_images: images.len(),
        sphere_size: sphere.len(),
        geodesic,
        bijective: same_set && images.len() == paths.len(),
    })
}

/// The factors of the automatic structure: `H'_k = H_k ∖ {e}` (the factors meet only
/// in `e`), and the remainder `H'_0 = {e}`.
#[derive(Clone, Debug)]
pub struct FactorPartition {
    n_factors: usize,
}

impl FactorPartition {
    pub fn new(group: &FreeProduct) -> Self {
        FactorPartition {
            n_factors: group.n_factors(),
        }
    }

    pub fn n_parts(&self) -> usize {
        self.n_factors + 1
    }

    /// `Some(0)` for `e`, `Some(k + 1)` for `x ∈ H'_k`, `None` off the factors.
    pub fn part_of(&self, x: &GroupElement) -> Option<usize> {
        match x.syllables() {
            [] => Some(0),
            [s] => Some(s.factor_id() + 1),
            _ => None,
        }
    }
}

/// Number of distinct group elements within word distance `c` of points on both
/// relative geodesics.
pub fn fellow_travel_time(group: &FreeProduct, g1: &RelGeodesic, g2: &RelGeodesic, c: u32) -> usize {
    let near = |x: &GroupElement, g: &RelGeodesic| g.vertices.iter().any(|v| group.dist(x, v) <= c);
    let mut candidates = BTreeSet::new();
    let offsets = crate::group::word_ball_layers(group, c, &Budget::unlimited())
        .map(|layers| layers.into_iter().flatten().collect::<Vec<_>>())
        .unwrap_or_else(|_| vec![GroupElement::identity()]);
    for v in &g1.vertices {
        for o in &offsets {
            candidates.insert(group.mul(v, o));
        }
    }
    candidates.into_iter().filter(|x| near(x, g1) && near(x, g2)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_cap() {
        let g = FreeProduct::free_group(2).unwrap();
        assert!(Automaton::new(&g, 0).is_err());
    }

    #[test]
    fn no_edge_enters_start_and_all_vertices_reachable() {
        let g = FreeProduct::cyclic_product(&[2, 3, 4]).unwrap();
        let a = Automaton::new(&g, 2).unwrap();
        let mut seen = BTreeSet::from([START]);
        for v in 0..a.n_vertices() {
            for w in a.successors(v) {
                assert_ne!(w, START);
                seen.insert(w);
            }
        }
        assert_eq!(seen.len(), a.n_vertices());
        assert!(a.distinct_rows() <= g.n_factors() + 1);
    }

    #[test]
    fn phi_rejects_non_paths() {
        let g = FreeProduct::free_group(2).unwrap();
        let a = Automaton::new(&g, 1).unwrap();
        let x = FactorElement::lattice(0, &[1]).unwrap();
        assert!(a.phi(&[x, x]).is_err());
        let far = FactorElement::lattice(0, &[2]).unwrap();
        assert!(a.phi(&[far]).is_err());
    }

    #[test]
    fn partition_parts() {
        let g = FreeProduct::free_group(2).unwrap();
        let p = FactorPartition::new(&g);
        assert_eq!(p.part_of(&GroupElement::identity()), Some(0));
        assert_eq!(p.part_of(&g.parse("1:3").unwrap()), Some(2));
        assert_eq!(p.part_of(&g.parse("0:1 1:1").unwrap()), None);
        assert_eq!(p.n_parts(), 3);
    }
}
