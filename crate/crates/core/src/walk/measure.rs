use std::collections::{BTreeMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::group::{word_ball_layers, FreeProduct, GroupElement};
use crate::numeric::rational_to_f64;
use crate::Budget;

/// A finitely supported probability measure on a free product, with exact weights.
#[derive(Clone, Debug)]
pub struct StepMeasure {
    support: Vec<GroupElement>,
    weights: Vec<BigRational>,
    /// Common denominator of all weights.
    denominator: BigUint,
    /// `weights[i] * denominator`.
    numerators: Vec<BigUint>,
    symmetric: bool,
    admissible_declared: bool,
    max_step: u32,
    warnings: Vec<String>,
}

impl StepMeasure {
    /// Builds a measure from explicit weights. Weights must be positive and sum to exactly 1.
    pub fn new(
        group: &FreeProduct,
        weights: Vec<(GroupElement, BigRational)>,
        admissible_declared: bool,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let mut map = BTreeMap::new();
        for (x, w) in weights {
            group.validate(&x)?;
            if !w.is_positive() {
                return Err(Error::InvalidMeasure(format!(
                    "weight {w} at {} is not positive",
                    group.format(&x)
                )));
            }
            if map.insert(x.clone(), w).is_some() {
                return Err(Error::InvalidMeasure(format!(
                    "{} listed twice",
                    group.format(&x)
                )));
            }
        }
        let total: BigRational = map.values().sum();
        if !total.is_one() {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let symmetric = map
            .iter()
            .all(|(x, w)| map.get(&group.invert(x)) == Some(w));
        let denominator = map
            .values()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let numerators = map
            .values()
            .map(|w| {
                (w.numer() * &denominator / w.denom())
                    .to_biguint()
                    .expect("positive")
            })
            .collect();
        let max_step = map.keys().map(|x| group.word_length(x)).max().unwrap_or(0);
        let (support, weights): (Vec<_>, Vec<_>) = map.into_iter().unzip();
        let mut m = StepMeasure {
            support,
            weights,
            denominator: denominator.to_biguint().expect("positive"),
            numerators,
            symmetric,
            admissible_declared,
            max_step,
            warnings: Vec::new(),
        };
        if !m.reaches_ball(group, 3) {
            let msg = "support does not generate the radius-3 ball as a semigroup; the walk may not be admissible".to_string();
            log::warn!("{msg}");
            m.warnings.push(msg);
        }
        Ok(m)
    }

    /// Uniform weights on the given elements.
    pub fn uniform(group: &FreeProduct, elements: &[GroupElement]) -> Result<Self> {
        let n = elements.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let w = BigRational::new(BigInt::one(), BigInt::from(n));
        Self::new(
            group,
            elements.iter().map(|x| (x.clone(), w.clone())).collect(),
            true,
        )
    }

    /// The simple random walk: uniform on the relative generating set S.
    pub fn simple_random_walk(group: &FreeProduct) -> Result<Self> {
        Self::uniform(group, group.generators())
    }

    pub fn support(&self) -> &[GroupElement] {
        &self.support
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, &BigRational)> {
        self.support.iter().zip(&self.weights)
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(rational_to_f64).collect()
    }

    pub fn weight(&self, x: &GroupElement) -> BigRational {
        match self.support.binary_search(x) {
            Ok(i) => self.weights[i].clone(),
            Err(_) => BigRational::zero(),
        }
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denominator
    }

    pub fn numerators(&self) -> &[BigUint] {
        &self.numerators
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn admissible_declared(&self) -> bool {
        self.admissible_declared
    }

    /// Largest word length of a support element.
    pub fn max_step_length(&self) -> u32 {
        self.max_step
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// True when every element of the word ball of `radius` is a product of support elements.
    fn reaches_ball(&self, group: &FreeProduct, radius: u32) -> bool {
        let Ok(layers) = word_ball_layers(group, radius, &Budget::default()) else {
            return false;
        };
        let target: HashSet<GroupElement> = layers.into_iter().flatten().collect();
        // products are allowed to wander a little outside the ball before coming back
        let bound = radius + 2 * self.max_step.max(1);
        let mut seen: HashSet<GroupElement> = HashSet::new();
        let mut frontier: Vec<GroupElement> = self.support.clone();
        seen.extend(frontier.iter().cloned());
        for _ in 0..4 * (radius + 2) {
            if target.iter().all(|x| seen.contains(x)) {
                return true;
            }
            let mut next = Vec::new();
            for x in &frontier {
                for s in &self.support {
                    let y = group.mul(x, s);
                    if group.word_length(&y) <= bound && seen.insert(y.clone()) {
                        next.push(y);
                    }
                }
            }
            if next.is_empty() || seen.len() > 200_000 {
                break;
            }
            frontier = next;
        }
        target.iter().all(|x| seen.contains(x))
    }
}
