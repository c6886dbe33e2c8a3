//! Free factors: finite groups given by a multiplication table, and lattices Z^d.

use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Largest lattice rank a factor may have.
pub const MAX_RANK: usize = 6;

/// Largest order of a finite factor (indices are stored as `i16`).
pub const MAX_FINITE_ORDER: usize = 4096;

/// An element of one free factor.
///
/// For a finite factor only `payload[0]` is used and holds the table index;
/// for `Z^d` the first `d` entries hold the coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct FactorElement {
    pub factor: u16,
    pub payload: [i16; MAX_RANK],
}

impl FactorElement {
    pub fn finite(factor: usize, index: usize) -> Self {
        let mut payload = [0; MAX_RANK];
        payload[0] = index as i16;
        FactorElement {
            factor: factor as u16,
            payload,
        }
    }

    pub fn lattice(factor: usize, coords: &[i64]) -> Result<Self> {
        if coords.len() > MAX_RANK {
            return Err(Error::InvalidArgument(format!(
                "lattice vector of length {} exceeds rank limit {MAX_RANK}",
                coords.len()
            )));
        }
        let mut payload = [0; MAX_RANK];
        for (slot, &c) in payload.iter_mut().zip(coords) {
            *slot = i16::try_from(c)
                .map_err(|_| Error::InvalidArgument(format!("lattice coordinate {c} out of range")))?;
        }
        Ok(FactorElement {
            factor: factor as u16,
            payload,
        })
    }

    pub fn factor_id(&self) -> usize {
        self.factor as usize
    }

    /// Identity of the given factor (all payload entries zero, index 0 for finite factors).
    pub fn identity(factor: usize) -> Self {
        FactorElement {
            factor: factor as u16,
            payload: [0; MAX_RANK],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.payload.iter().all(|&x| x == 0)
    }
}

impl PartialOrd for FactorElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FactorElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.factor
            .cmp(&other.factor)
            .then_with(|| self.payload.cmp(&other.payload))
    }
}

/// A finite group presented by its Cayley table. Element 0 is the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<u16>,
    inverse: Vec<u16>,
    generators: Vec<u16>,
    word_length: Vec<u32>,
}

impl FiniteGroup {
    /// Validates the table and computes inverses and word lengths.
    ///
    /// `declared_lengths`, when given, must agree with the lengths obtained by
    /// breadth-first search from the generators.
    pub fn new(
        table: Vec<Vec<usize>>,
        generators: Vec<usize>,
        declared_lengths: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidSpec("finite factor with empty table".into()));
        }
        if n > MAX_FINITE_ORDER {
            return Err(Error::InvalidSpec(format!(
                "finite factor of order {n} exceeds {MAX_FINITE_ORDER}"
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSpec(format!(
                    "row {i} of the multiplication table has length {}, expected {n}",
                    row.len()
                )));
            }
            for &x in row {
                if x >= n {
                    return Err(Error::InvalidSpec(format!("table entry {x} out of range 0..{n}")));
                }
                flat.push(x as u16);
            }
        }
        let at = |a: usize, b: usize| flat[a * n + b] as usize;
        for a in 0..n {
            if at(0, a) != a || at(a, 0) != a {
                return Err(Error::InvalidSpec("element 0 must be the identity".into()));
            }
        }
        // Each row and column must be a permutation (Latin square).
        for a in 0..n {
            let mut seen_row = vec![false; n];
            let mut seen_col = vec![false; n];
            for b in 0..n {
                seen_row[at(a, b)] = true;
                seen_col[at(b, a)] = true;
            }
            if seen_row.iter().chain(&seen_col).any(|s| !s) {
                return Err(Error::InvalidSpec(format!(
                    "row or column {a} of the table is not a permutation"
                )));
            }
        }
        check_associative(n, &at)?;

        let mut inverse = vec![0u16; n];
        for a in 0..n {
            let inv = (0..n)
                .find(|&b| at(a, b) == 0)
                .ok_or_else(|| Error::InvalidSpec(format!("element {a} has no inverse")))?;
            if at(inv, a) != 0 {
                return Err(Error::InvalidSpec(format!("left and right inverse of {a} differ")));
            }
            inverse[a] = inv as u16;
        }

        let mut gens: Vec<u16> = Vec::new();
        for &g in &generators {
            if g == 0 || g >= n {
                return Err(Error::InvalidSpec(format!(
                    "generator {g} must be a non-identity element index"
                )));
            }
            if !gens.contains(&(g as u16)) {
                gens.push(g as u16);
            }
        }
        for &g in &gens {
            if !gens.contains(&inverse[g as usize]) {
                return Err(Error::InvalidSpec(format!(
                    "generating set is not symmetric: inverse of {g} missing"
                )));
            }
        }
        gens.sort_unstable();

        let mut word_length = vec![u32::MAX; n];
        word_length[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for &g in &gens {
                let b = at(a, g as usize);
                if word_length[b] == u32::MAX {
                    word_length[b] = word_length[a] + 1;
                    queue.push_back(b);
                }
            }
        }
        if let Some(a) = word_length.iter().position(|&l| l == u32::MAX) {
            return Err(Error::InvalidSpec(format!(
                "generators do not generate the factor (element {a} unreachable)"
            )));
        }
        if let Some(declared) = declared_lengths {
            if declared != word_length {
                return Err(Error::InvalidSpec(format!(
                    "declared word lengths {declared:?} disagree with generator lengths {word_length:?}"
                )));
            }
        }

        Ok(FiniteGroup {
            order: n,
            table: flat,
            inverse,
            generators: gens,
            word_length,
        })
    }

    /// Z/n with generators {1, n-1}.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!("cyclic factor needs order >= 2, got {n}")));
        }
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        FiniteGroup::new(table, vec![1, n - 1], None)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b] as usize
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }

    pub fn generators(&self) -> impl Iterator<Item = usize> + '_ {
        self.generators.iter().map(|&g| g as usize)
    }

    pub fn word_length(&self, a: usize) -> u32 {
        self.word_length[a]
    }

    pub fn max_word_length(&self) -> u32 {
        self.word_length.iter().copied().max().unwrap_or(0)
    }

    /// The multiplication table as nested rows.
    pub fn table_rows(&self) -> Vec<Vec<usize>> {
        (0..self.order)
            .map(|a| (0..self.order).map(|b| self.mul(a, b)).collect())
            .collect()
    }
}

fn check_associative(n: usize, at: &impl Fn(usize, usize) -> usize) -> Result<()> {
    let check = |a: usize, b: usize, c: usize| {
        if at(at(a, b), c) != at(a, at(b, c)) {
            Err(Error::InvalidSpec(format!(
                "table is not associative: ({a}*{b})*{c} != {a}*({b}*{c})"
            )))
        } else {
            Ok(())
        }
    };
    if n <= 64 {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    check(a, b, c)?;
                }
            }
        }
    } else {
        // Deterministic spot check for large tables.
        let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % n as u64) as usize
        };
        for _ in 0..200_000 {
            let (a, b, c) = (next(), next(), next());
            check(a, b, c)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Finite(FiniteGroup),
    /// Z^rank with generators the signed unit vectors (word length = l1 norm).
    FreeAbelian { rank: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorSpec {
    pub id: usize,
    pub kind: FactorKind,
}

impl FactorSpec {
    pub fn finite(id: usize, group: FiniteGroup) -> Self {
        FactorSpec {
            id,
            kind: FactorKind::Finite(group),
        }
    }

    pub fn free_abelian(id: usize, rank: usize) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::InvalidSpec(format!(
                "lattice rank must be in 1..={MAX_RANK}, got {rank}"
            )));
        }
        Ok(FactorSpec {
            id,
            kind: FactorKind::FreeAbelian { rank },
        })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, FactorKind::Finite(_))
    }

    /// Number of elements, or `None` for an infinite factor.
    pub fn order(&self) -> Option<usize> {
        match &self.kind {
            FactorKind::Finite(g) => Some(g.order()),
            FactorKind::FreeAbelian { .. } => None,
        }
    }

    pub fn identity(&self) -> FactorElement {
        FactorElement::identity(self.id)
    }

    pub fn contains(&self, x: &FactorElement) -> bool {
        if x.factor_id() != self.id {
            return false;
        }
        match &self.kind {
            FactorKind::Finite(g) => {
                x.payload[0] >= 0
                    && (x.payload[0] as usize) < g.order()
                    && x.payload[1..].iter().all(|&c| c == 0)
            }
            FactorKind::FreeAbelian { rank } => x.payload[*rank..].iter().all(|&c| c == 0),
        }
    }

    pub fn mul(&self, a: &FactorElement, b: &FactorElement) -> FactorElement {
        match &self.kind {
            FactorKind::Finite(g) => FactorElement::finite(
                self.id,
                g.mul(a.payload[0] as usize, b.payload[0] as usize),
            ),
            FactorKind::FreeAbelian { rank } => {
                let mut out = *a;
                for i in 0..*rank {
                    out.payload[i] = a.payload[i]
                        .checked_add(b.payload[i])
                        .expect("lattice coordinate overflow");
                }
                out
            }
        }
    }

    pub fn inv(&self, a: &FactorElement) -> FactorElement {
        match &self.kind {
            FactorKind::Finite(g) => FactorElement::finite(self.id, g.inv(a.payload[0] as usize)),
            FactorKind::FreeAbelian { .. } => {
                let mut out = *a;
                for c in out.payload.iter_mut() {
                    *c = -*c;
                }
                out
            }
        }
    }

    pub fn word_length(&self, a: &FactorElement) -> u32 {
        match &self.kind {
            FactorKind::Finite(g) => g.word_length(a.payload[0] as usize),
            FactorKind::FreeAbelian { rank } => a.payload[..*rank]
                .iter()
                .map(|&c| c.unsigned_abs() as u32)
                .sum(),
        }
    }

    /// Symmetric generating set of the factor.
    pub fn generators(&self) -> Vec<FactorElement> {
        match &self.kind {
            FactorKind::Finite(g) => g
                .generators()
                .map(|i| FactorElement::finite(self.id, i))
                .collect(),
            FactorKind::FreeAbelian { rank } => {
                let mut out = Vec::with_capacity(2 * rank);
                for i in 0..*rank {
                    for sign in [-1i16, 1] {
                        let mut x = self.identity();
                        x.payload[i] = sign;
                        out.push(x);
                    }
                }
                out.sort();
                out
            }
        }
    }

    /// Non-identity elements with word length at most `cap`, in canonical order.
    ///
    /// `cap = None` is only allowed for finite factors.
    pub fn nontrivial_elements(&self, cap: Option<u32>) -> Result<Vec<FactorElement>> {
        match &self.kind {
            FactorKind::Finite(g) => Ok((1..g.order())
                .filter(|&i| cap.is_none_or(|c| g.word_length(i) <= c))
                .map(|i| FactorElement::finite(self.id, i))
                .collect()),
            FactorKind::FreeAbelian { rank } => {
                let cap = cap.ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "factor {} is infinite; a syllable length cap is required",
                        self.id
                    ))
                })?;
                let mut out = Vec::new();
                let mut coords = vec![0i64; *rank];
                lattice_points(&mut coords, 0, cap as i64, &mut |c| {
                    if c.iter().any(|&x| x != 0) {
                        out.push(FactorElement::lattice(self.id, c).expect("rank checked"));
                    }
                });
                out.sort();
                Ok(out)
            }
        }
    }

    /// Number of non-identity elements of each word length `1..=max_len` (index 0 unused).
    pub fn length_counts(&self, max_len: u32) -> Vec<u128> {
        let mut counts = vec![0u128; max_len as usize + 1];
        match &self.kind {
            FactorKind::Finite(g) => {
                for i in 1..g.order() {
                    let l = g.word_length(i);
                    if l <= max_len {
                        counts[l as usize] += 1;
                    }
                }
            }
            FactorKind::FreeAbelian { rank } => {
                // points of Z^d with l1 norm exactly l, by dimension recursion
                let m = max_len as usize;
                let mut by_norm = vec![0u128; m + 1];
                by_norm[0] = 1;
                for _ in 0..*rank {
                    let mut next = vec![0u128; m + 1];
                    for (norm, &c) in by_norm.iter().enumerate() {
                        if c == 0 {
                            continue;
                        }
                        next[norm] += c;
                        for step in 1..=(m - norm) {
                            next[norm + step] += 2 * c;
                        }
                    }
                    by_norm = next;
                }
                counts[1..].copy_from_slice(&by_norm[1..]);
            }
        }
        counts
    }

    /// Representatives of every distinct neighbourhood type, used to certify
    /// properties that depend only on how generators change the word length.
    pub fn length_change_representatives(&self) -> Vec<FactorElement> {
        match &self.kind {
            FactorKind::Finite(g) => (1..g.order())
                .map(|i| FactorElement::finite(self.id, i))
                .collect(),
            FactorKind::FreeAbelian { rank } => {
                // the l1 change under a unit step depends only on coordinate signs,
                // and every sign pattern appears in {-2..2}^d
                let mut out = Vec::new();
                let mut coords = vec![0i64; *rank];
                box_points(&mut coords, 0, 2, &mut |c| {
                    if c.iter().any(|&x| x != 0) {
                        out.push(FactorElement::lattice(self.id, c).expect("rank checked"));
                    }
                });
                out
            }
        }
    }
}

fn lattice_points(coords: &mut Vec<i64>, i: usize, budget: i64, f: &mut impl FnMut(&[i64])) {
    if i == coords.len() {
        f(coords);
        return;
    }
    for c in -budget..=budget {
        coords[i] = c;
        lattice_points(coords, i + 1, budget - c.abs(), f);
    }
    coords[i] = 0;
}

fn box_points(coords: &mut Vec<i64>, i: usize, half: i64, f: &mut impl FnMut(&[i64])) {
    if i == coords.len() {
        f(coords);
        return;
    }
    for c in -half..=half {
        coords[i] = c;
        box_points(coords, i + 1, half, f);
    }
    coords[i] = 0;
}
