use std::cmp::Ordering;

use super::factor::{FactorElement, FactorKind, FactorSpec, FiniteGroup};
use crate::error::{Error, Result};

/// Normal form of an element of a free product: alternating non-trivial syllables.
///
/// The empty word is the identity. Ordering is canonical: syllable count, then
/// the sequence of factor ids, then payloads.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct GroupElement {
    syllables: Vec<FactorElement>,
}

impl GroupElement {
    pub fn identity() -> Self {
        GroupElement::default()
    }

    pub fn syllables(&self) -> &[FactorElement] {
        &self.syllables
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    /// Relative length: the number of syllables.
    pub fn rel_length(&self) -> usize {
        self.syllables.len()
    }

    /// The prefix made of the first `k` syllables.
    pub fn prefix(&self, k: usize) -> GroupElement {
        GroupElement {
            syllables: self.syllables[..k].to_vec(),
        }
    }

    pub(crate) fn from_syllables_unchecked(syllables: Vec<FactorElement>) -> Self {
        GroupElement { syllables }
    }

    /// The element spelled by non-trivial syllables with no two neighbours from the
    /// same factor, which is already a normal form.
    pub fn from_path(path: &[FactorElement]) -> Self {
        debug_assert!(path.iter().all(|s| !s.is_identity()));
        debug_assert!(path.windows(2).all(|w| w[0].factor != w[1].factor));
        GroupElement {
            syllables: path.to_vec(),
        }
    }

    pub fn single(x: FactorElement) -> Self {
        if x.is_identity() {
            GroupElement::identity()
        } else {
            GroupElement { syllables: vec![x] }
        }
    }

    pub fn last_factor(&self) -> Option<usize> {
        self.syllables.last().map(|s| s.factor_id())
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.syllables
            .len()
            .cmp(&other.syllables.len())
            .then_with(|| {
                let a = self.syllables.iter().map(|s| s.factor);
                let b = other.syllables.iter().map(|s| s.factor);
                a.cmp(b)
            })
            .then_with(|| {
                let a = self.syllables.iter().map(|s| s.payload);
                let b = other.syllables.iter().map(|s| s.payload);
                a.cmp(b)
            })
    }
}

/// A free product `H_1 * ... * H_N` of finite groups and lattices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeProduct {
    factors: Vec<FactorSpec>,
    generators: Vec<GroupElement>,
    warnings: Vec<String>,
}

impl FreeProduct {
    pub fn new(factors: Vec<FactorSpec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidSpec("a free product needs at least one factor".into()));
        }
        if factors.len() > u16::MAX as usize {
            return Err(Error::InvalidSpec("too many factors".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.id != i {
                return Err(Error::InvalidSpec(format!(
                    "factor at position {i} has id {}; ids must be 0..N in order",
                    f.id
                )));
            }
        }
        let mut warnings = Vec::new();
        if factors.len() < 2 {
            warnings.push("fewer than two factors: the group is elementary".to_string());
        } else if factors.len() == 2 && factors.iter().all(|f| f.order() == Some(2)) {
            warnings.push("Z/2 * Z/2 is virtually cyclic (elementary)".to_string());
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        let mut generators: Vec<GroupElement> = factors
            .iter()
            .flat_map(|f| f.generators())
            .map(GroupElement::single)
            .collect();
        generators.sort();
        Ok(FreeProduct {
            factors,
            generators,
            warnings,
        })
    }

    /// The free group on `k` generators, as `Z * ... * Z`.
    pub fn free_group(k: usize) -> Result<Self> {
        FreeProduct::new(
            (0..k)
                .map(|i| FactorSpec::free_abelian(i, 1))
                .collect::<Result<_>>()?,
        )
    }

    /// `Z/n_1 * Z/n_2 * ...`.
    pub fn cyclic_product(orders: &[usize]) -> Result<Self> {
        FreeProduct::new(
            orders
                .iter()
                .enumerate()
                .map(|(i, &n)| Ok(FactorSpec::finite(i, FiniteGroup::cyclic(n)?)))
                .collect::<Result<_>>()?,
        )
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn factor(&self, k: usize) -> &FactorSpec {
        &self.factors[k]
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// The relative generating set S: union of the factor generators.
    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_non_elementary(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn has_infinite_factor(&self) -> bool {
        self.factors.iter().any(|f| !f.is_finite())
    }

    /// Checks that `a` is a normal form over this product.
    pub fn validate(&self, a: &GroupElement) -> Result<()> {
        let mut prev: Option<usize> = None;
        for s in &a.syllables {
            let k = s.factor_id();
            let f = self
                .factors
                .get(k)
                .ok_or_else(|| Error::SpecMismatch(format!("unknown factor {k}")))?;
            if !f.contains(s) {
                return Err(Error::SpecMismatch(format!("payload {:?} not in factor {k}", s.payload)));
            }
            if s.is_identity() {
                return Err(Error::SpecMismatch("identity syllable inside a normal form".into()));
            }
            if prev == Some(k) {
                return Err(Error::SpecMismatch("adjacent syllables from the same factor".into()));
            }
            prev = Some(k);
        }
        Ok(())
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(self.mul(a, b))
    }

    /// Normal-form product without validation of the inputs.
    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        let mut out = Vec::with_capacity(a.syllables.len() + b.syllables.len());
        out.extend_from_slice(&a.syllables);
        for s in &b.syllables {
            push_syllable(&self.factors, &mut out, *s);
        }
        GroupElement { syllables: out }
    }

    /// Right multiplication by a single factor element.
    pub fn mul_letter(&self, a: &GroupElement, s: &FactorElement) -> GroupElement {
        let mut out = a.syllables.clone();
        push_syllable(&self.factors, &mut out, *s);
        GroupElement { syllables: out }
    }

    pub fn invert(&self, a: &GroupElement) -> GroupElement {
        GroupElement {
            syllables: a
                .syllables
                .iter()
                .rev()
                .map(|s| self.factors[s.factor_id()].inv(s))
                .collect(),
        }
    }

    /// Word length d(e, a) with respect to S.
    pub fn word_length(&self, a: &GroupElement) -> u32 {
        a.syllables
            .iter()
            .map(|s| self.factors[s.factor_id()].word_length(s))
            .sum()
    }

    pub fn dist(&self, x: &GroupElement, y: &GroupElement) -> u32 {
        self.word_length(&self.mul(&self.invert(x), y))
    }

    /// Relative distance: syllable count of `x^{-1} y`.
    pub fn rel_dist(&self, x: &GroupElement, y: &GroupElement) -> usize {
        self.mul(&self.invert(x), y).rel_length()
    }

    /// The relative geodesic from `x` to `y`: `x` times the syllable prefixes of `x^{-1} y`.
    pub fn rel_geodesic(&self, x: &GroupElement, y: &GroupElement) -> RelGeodesic {
        let z = self.mul(&self.invert(x), y);
        let vertices = (0..=z.rel_length())
            .map(|k| self.mul(x, &z.prefix(k)))
            .collect();
        RelGeodesic { vertices }
    }

    /// Parses `e` or whitespace-separated syllables `k:i` (finite factor) or
    /// `k:n` / `k:[x,y,..]` (lattice factor). Adjacent syllables are reduced.
    pub fn parse(&self, text: &str) -> Result<GroupElement> {
        let text = text.trim();
        if text.is_empty() || text == "e" {
            return Ok(GroupElement::identity());
        }
        let mut out = Vec::new();
        for tok in split_tokens(text) {
            let (k, payload) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("syllable `{tok}` is not of the form k:value")))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad factor index in `{tok}`")))?;
            let f = self
                .factors
                .get(k)
                .ok_or_else(|| Error::SpecMismatch(format!("unknown factor {k} in `{tok}`")))?;
            let payload = payload.trim();
            let x = match &f.kind {
                FactorKind::Finite(g) => {
                    let i: usize = payload
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad element index in `{tok}`")))?;
                    if i >= g.order() {
                        return Err(Error::SpecMismatch(format!(
                            "index {i} out of range for factor {k} of order {}",
                            g.order()
                        )));
                    }
                    FactorElement::finite(k, i)
                }
                FactorKind::FreeAbelian { rank } => {
                    let inner = payload
                        .strip_prefix('[')
                        .and_then(|p| p.strip_suffix(']'))
                        .unwrap_or(payload);
                    let coords: Vec<i64> = inner
                        .split(',')
                        .map(|c| {
                            c.trim()
                                .parse()
                                .map_err(|_| Error::Parse(format!("bad coordinate in `{tok}`")))
                        })
                        .collect::<Result<_>>()?;
                    if coords.len() != *rank {
                        return Err(Error::Parse(format!(
                            "`{tok}` has {} coordinates, factor {k} has rank {rank}",
                            coords.len()
                        )));
                    }
                    FactorElement::lattice(k, &coords)?
                }
            };
            push_syllable(&self.factors, &mut out, x);
        }
        Ok(GroupElement { syllables: out })
    }

    pub fn format(&self, a: &GroupElement) -> String {
        if a.is_identity() {
            return "e".to_string();
        }
        a.syllables
            .iter()
            .map(|s| {
                let k = s.factor_id();
                match &self.factors[k].kind {
                    FactorKind::Finite(_) => format!("{k}:{}", s.payload[0]),
                    FactorKind::FreeAbelian { rank: 1 } => format!("{k}:{}", s.payload[0]),
                    FactorKind::FreeAbelian { rank } => {
                        let c: Vec<String> =
                            s.payload[..*rank].iter().map(|x| x.to_string()).collect();
                        format!("{k}:[{}]", c.join(","))
                    }
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Splits on whitespace that is not inside brackets.
fn split_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = None;
    for (i, ch) in text.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            _ => {}
        }
        if ch.is_whitespace() && depth == 0 {
            if let Some(s) = start.take() {
                out.push(&text[s..i]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

fn push_syllable(factors: &[FactorSpec], out: &mut Vec<FactorElement>, s: FactorElement) {
    if s.is_identity() {
        return;
    }
    match out.last() {
        Some(last) if last.factor == s.factor => {
            let merged = factors[s.factor_id()].mul(last, &s);
            out.pop();
            if !merged.is_identity() {
                out.push(merged);
            }
        }
        _ => out.push(s),
    }
}

/// Vertices of a relative geodesic; consecutive vertices are at relative distance 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelGeodesic {
    pub vertices: Vec<GroupElement>,
}

impl RelGeodesic {
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() <= 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z3_z2() -> FreeProduct {
        FreeProduct::cyclic_product(&[3, 2]).unwrap()
    }

    #[test]
    fn within_factor_fold() {
        let g = z3_z2();
        let t = g.parse("0:1").unwrap();
        assert_eq!(g.multiply(&t, &t).unwrap(), g.parse("0:2").unwrap());
    }

    #[test]
    fn cascade_cancellation() {
        let g = z3_z2();
        let ts = g.parse("0:1 1:1").unwrap();
        let st = g.parse("1:1 0:1").unwrap();
        assert_eq!(g.multiply(&ts, &st).unwrap(), g.parse("0:2").unwrap());
    }

    #[test]
    fn inverse_reverses_syllables() {
        let g = z3_z2();
        let ts = g.parse("0:1 1:1").unwrap();
        assert_eq!(g.invert(&ts), g.parse("1:1 0:2").unwrap());
        assert!(g.invert(&GroupElement::identity()).is_identity());
        assert!(g.mul(&ts, &g.invert(&ts)).is_identity());
    }

    #[test]
    fn validation_rejects_foreign_elements() {
        let g = z3_z2();
        let bad = GroupElement::from_syllables_unchecked(vec![FactorElement::finite(5, 1)]);
        assert!(matches!(g.multiply(&bad, &bad), Err(Error::SpecMismatch(_))));
        let adjacent = GroupElement::from_syllables_unchecked(vec![
            FactorElement::finite(0, 1),
            FactorElement::finite(0, 1),
        ]);
        assert!(g.validate(&adjacent).is_err());
        assert!(g.parse("0:3").is_err());
    }

    #[test]
    fn rel_geodesic_through_identity() {
        let f2 = FreeProduct::free_group(2).unwrap();
        let a_inv = f2.parse("0:-1").unwrap();
        let b = f2.parse("1:1").unwrap();
        let geo = f2.rel_geodesic(&a_inv, &b);
        assert_eq!(geo.vertices, vec![a_inv, GroupElement::identity(), b]);
        assert_eq!(geo.len(), 2);
    }

    #[test]
    fn parse_format_round_trip() {
        let g = FreeProduct::new(vec![
            FactorSpec::free_abelian(0, 2).unwrap(),
            FactorSpec::finite(1, FiniteGroup::cyclic(4).unwrap()),
        ])
        .unwrap();
        let x = g.parse("0:[1,-2] 1:3 0:[0,1]").unwrap();
        assert_eq!(g.parse(&g.format(&x)).unwrap(), x);
        assert_eq!(g.word_length(&x), 3 + 1 + 1);
    }

    #[test]
    fn elementary_products_warn() {
        assert!(!FreeProduct::cyclic_product(&[2, 2]).unwrap().is_non_elementary());
        assert!(!FreeProduct::free_group(1).unwrap().is_non_elementary());
        assert!(FreeProduct::cyclic_product(&[2, 3]).unwrap().is_non_elementary());
    }
}
