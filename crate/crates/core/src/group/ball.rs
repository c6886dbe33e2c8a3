//! Enumeration of balls and spheres, plus an indexed ball used by the numerical engines.

use std::collections::{HashMap, HashSet};

use super::element::{FreeProduct, GroupElement};
use crate::budget::Budget;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Word metric d with respect to the relative generating set S.
    Word,
    /// Relative metric: number of syllables.
    Relative,
}

/// All elements within `radius` of the identity, in canonical order.
///
/// For the relative metric each syllable additionally has word length at most
/// `syllable_cap`; the cap is mandatory when a factor is infinite.
pub fn ball(
    group: &FreeProduct,
    radius: u32,
    metric: Metric,
    syllable_cap: Option<u32>,
    budget: &Budget,
) -> Result<Vec<GroupElement>> {
    let mut out = match metric {
        Metric::Word => word_ball_layers(group, radius, budget)?
            .into_iter()
            .flatten()
            .collect::<Vec<_>>(),
        Metric::Relative => relative_ball(group, radius as usize, syllable_cap, budget)?,
    };
    out.sort();
    Ok(out)
}

/// Word spheres `S_0, ..., S_radius`, each in canonical order.
pub fn word_ball_layers(
    group: &FreeProduct,
    radius: u32,
    budget: &Budget,
) -> Result<Vec<Vec<GroupElement>>> {
    let mut layers = Vec::new();
    let mut total = 0;
    for layer in WordSpheres::new(group).take(radius as usize + 1) {
        total += layer.len();
        budget.check(total, "word ball")?;
        layers.push(layer);
    }
    Ok(layers)
}

/// Lazily generated word spheres `S_0, S_1, ...`, each in canonical order.
///
/// Breadth-first search only needs the previous sphere to recognise old elements,
/// since a generator changes the word length by at most one.
pub struct WordSpheres<'a> {
    group: &'a FreeProduct,
    previous: HashSet<GroupElement>,
    current: Vec<GroupElement>,
    started: bool,
}

impl<'a> WordSpheres<'a> {
    pub fn new(group: &'a FreeProduct) -> Self {
        WordSpheres {
            group,
            previous: HashSet::new(),
            current: vec![GroupElement::identity()],
            started: false,
        }
    }
}

impl Iterator for WordSpheres<'_> {
    type Item = Vec<GroupElement>;

    fn next(&mut self) -> Option<Vec<GroupElement>> {
        if !self.started {
            self.started = true;
            return Some(self.current.clone());
        }
        let here: HashSet<GroupElement> = self.current.iter().cloned().collect();
        let mut next_set = HashSet::new();
        for x in &self.current {
            for s in self.group.generators() {
                let y = self.group.mul(x, s);
                if !here.contains(&y) && !self.previous.contains(&y) {
                    next_set.insert(y);
                }
            }
        }
        let mut next: Vec<GroupElement> = next_set.into_iter().collect();
        next.sort();
        self.previous = here;
        self.current = next.clone();
        if next.is_empty() {
            None
        } else {
            Some(next)
        }
    }
}

/// Elements with exactly `n` syllables, each of word length at most `cap`.
pub fn relative_sphere(
    group: &FreeProduct,
    n: usize,
    syllable_cap: Option<u32>,
    budget: &Budget,
) -> Result<Vec<GroupElement>> {
    let labels = factor_labels(group, syllable_cap)?;
    let mut out = Vec::new();
    let mut factor_seq = Vec::with_capacity(n);
    alternating_sequences(group.n_factors(), n, &mut factor_seq, &mut |seq| {
        let count: usize = seq.iter().map(|&k| labels[k].len()).product();
        budget.check(out.len() + count, "relative sphere")?;
        let mut idx = vec![0usize; n];
        loop {
            let syllables = seq
                .iter()
                .zip(&idx)
                .map(|(&k, &i)| labels[k][i])
                .collect::<Vec<_>>();
            out.push(GroupElement::from_syllables_unchecked(syllables));
            // odometer over the label lists, last position fastest
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Ok(());
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < labels[seq[pos]].len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    })?;
    Ok(out)
}

fn relative_ball(
    group: &FreeProduct,
    radius: usize,
    syllable_cap: Option<u32>,
    budget: &Budget,
) -> Result<Vec<GroupElement>> {
    let mut out = Vec::new();
    for n in 0..=radius {
        out.extend(relative_sphere(group, n, syllable_cap, budget)?);
        budget.check(out.len(), "relative ball")?;
    }
    Ok(out)
}

fn factor_labels(
    group: &FreeProduct,
    syllable_cap: Option<u32>,
) -> Result<Vec<Vec<super::FactorElement>>> {
    group
        .factors()
        .iter()
        .map(|f| f.nontrivial_elements(syllable_cap))
        .collect()
}

/// Calls `f` on every sequence of `n` factor ids with no two equal neighbours,
/// in lexicographic order.
fn alternating_sequences(
    n_factors: usize,
    n: usize,
    seq: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if seq.len() == n {
        return f(seq);
    }
    for k in 0..n_factors {
        if seq.last() == Some(&k) {
            continue;
        }
        seq.push(k);
        alternating_sequences(n_factors, n, seq, f)?;
        seq.pop();
    }
    Ok(())
}

/// A word ball with a dense index, for array-based convolution.
#[derive(Clone, Debug)]
pub struct IndexedBall {
    pub radius: u32,
    elements: Vec<GroupElement>,
    lengths: Vec<u32>,
    index: HashMap<GroupElement, u32>,
}

pub const OUTSIDE: u32 = u32::MAX;

impl IndexedBall {
    pub fn new(group: &FreeProduct, radius: u32, budget: &Budget) -> Result<Self> {
        let layers = word_ball_layers(group, radius, budget)?;
        let mut elements = Vec::new();
        let mut lengths = Vec::new();
        for (w, layer) in layers.into_iter().enumerate() {
            lengths.extend(std::iter::repeat_n(w as u32, layer.len()));
            elements.extend(layer);
        }
        let index = elements
            .iter()
            .enumerate()
            .map(|(i, x)| (x.clone(), i as u32))
            .collect();
        Ok(IndexedBall {
            radius,
            elements,
            lengths,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &GroupElement {
        &self.elements[i]
    }

    pub fn word_length(&self, i: usize) -> u32 {
        self.lengths[i]
    }

    pub fn index_of(&self, x: &GroupElement) -> Option<usize> {
        self.index.get(x).map(|&i| i as usize)
    }

    /// Row-major table `t[i * steps.len() + j] = index(element_i * steps_j)`,
    /// or [`OUTSIDE`] when the product leaves the ball.
    pub fn step_table(&self, group: &FreeProduct, steps: &[GroupElement]) -> Vec<u32> {
        let mut table = Vec::with_capacity(self.len() * steps.len());
        for x in &self.elements {
            for s in steps {
                let y = group.mul(x, s);
                table.push(self.index.get(&y).copied().unwrap_or(OUTSIDE));
            }
        }
        table
    }
}

/// Counts of elements by (syllable count, word length).
///
/// Counts are stored as floats: exact up to 2^53, and spheres of free
/// products outgrow every integer type long before the sums they feed converge.
#[derive(Clone, Debug)]
pub struct SphereCensus {
    /// `counts[m][w]`: elements with `m` syllables and word length `w`.
    pub counts: Vec<Vec<f64>>,
    pub max_word_length: u32,
}

impl SphereCensus {
    pub fn new(group: &FreeProduct, max_word_length: u32) -> Self {
        let wmax = max_word_length as usize;
        let per_factor: Vec<Vec<f64>> = group
            .factors()
            .iter()
            .map(|f| {
                f.length_counts(max_word_length)
                    .into_iter()
                    .map(|c| c as f64)
                    .collect()
            })
            .collect();
        let n = group.n_factors();
        let mut origin = vec![0.0; wmax + 1];
        origin[0] = 1.0;
        let mut counts = vec![origin];
        // last[k][w]: elements with the current syllable count whose last syllable is in factor k
        let mut last = per_factor.clone();
        for _m in 1..=wmax {
            let mut row = vec![0.0; wmax + 1];
            for lk in &last {
                for (w, &c) in lk.iter().enumerate() {
                    row[w] += c;
                }
            }
            if row.iter().all(|&c| c == 0.0) {
                break;
            }
            counts.push(row);
            let mut next = vec![vec![0.0; wmax + 1]; n];
            for k in 0..n {
                for j in (0..n).filter(|&j| j != k) {
                    for (w, &c) in last[j].iter().enumerate().filter(|(_, &c)| c > 0.0) {
                        for (l, &ck) in per_factor[k].iter().enumerate().skip(1) {
                            if w + l > wmax {
                                break;
                            }
                            next[k][w + l] += c * ck;
                        }
                    }
                }
            }
            last = next;
        }
        SphereCensus {
            counts,
            max_word_length,
        }
    }

    /// |S_w| in the word metric.
    pub fn word_sphere(&self, w: u32) -> f64 {
        self.counts.iter().map(|row| row[w as usize]).sum()
    }

    pub fn count(&self, m: usize, w: u32) -> f64 {
        self.counts
            .get(m)
            .and_then(|row| row.get(w as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn max_syllables(&self) -> usize {
        self.counts.len() - 1
    }
}
