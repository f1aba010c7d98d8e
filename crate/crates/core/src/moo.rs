//! Pareto dominance, non-dominated sorting, crowding distance and
//! environmental selection.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::model::NarxModel;
use crate::narx::{DerivationTree, NarxExpression};
pub use crate::objectives::FitnessVector;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MooError {
    #[error("individual {0} has not been evaluated")]
    UnevaluatedIndividual(u64),
    #[error("need {needed} individuals, have {available}")]
    InsufficientPopulation { needed: usize, available: usize },
}

/// A population member. `fitness` is only set together with `model`.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual<T> {
    pub id: u64,
    pub genotype: DerivationTree,
    pub model: Option<NarxModel<T>>,
    pub fitness: Option<FitnessVector<T>>,
    pub diverged: bool,
}

impl<T: Scalar> Individual<T> {
    pub fn new(id: u64, genotype: DerivationTree) -> Self {
        Self { id, genotype, model: None, fitness: None, diverged: false }
    }

    pub fn is_evaluated(&self) -> bool {
        self.fitness.is_some()
    }

    pub fn expression(&self) -> Option<&NarxExpression> {
        self.model.as_ref().map(NarxModel::expression)
    }

    fn fitness_or_err(&self) -> Result<&FitnessVector<T>, MooError> {
        self.fitness.as_ref().ok_or(MooError::UnevaluatedIndividual(self.id))
    }
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates<T: Scalar>(a: &FitnessVector<T>, b: &FitnessVector<T>) -> bool {
    let (a, b) = (a.objectives(), b.objectives());
    a.iter().zip(&b).all(|(x, y)| x <= y) && a.iter().zip(&b).any(|(x, y)| x < y)
}

/// Fronts of `f` as index lists, best first, each in input order.
pub fn sort_fitness<T: Scalar>(f: &[FitnessVector<T>]) -> Vec<Vec<usize>> {
    let n = f.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&f[i], &f[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&f[j], &f[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Fronts of an evaluated population as index lists.
pub fn fast_non_dominated_sort<T: Scalar>(pop: &[Individual<T>]) -> Result<Vec<Vec<usize>>, MooError> {
    let f = pop.iter().map(|i| i.fitness_or_err().copied()).collect::<Result<Vec<_>, _>>()?;
    Ok(sort_fitness(&f))
}

/// Crowding distance of each member of `front`. Per objective, the extreme
/// members get `+∞`; interior members add the normalized gap between their
/// neighbours. Objectives with zero or infinite range add nothing to the
/// interior.
pub fn crowding_distance<T: Scalar>(front: &[FitnessVector<T>]) -> Vec<T> {
    let n = front.len();
    let mut d = vec![T::zero(); n];
    if n <= 2 {
        return vec![T::infinity(); n];
    }
    for m in 0..3 {
        let val = |i: usize| front[i].objectives()[m];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| val(a).partial_cmp(&val(b)).expect("objectives are never NaN"));
        d[order[0]] = T::infinity();
        d[order[n - 1]] = T::infinity();
        let range = val(order[n - 1]) - val(order[0]);
        if !(range.is_finite() && range > T::zero()) {
            continue;
        }
        for w in order.windows(3) {
            d[w[1]] += (val(w[2]) - val(w[0])) / range;
        }
    }
    d
}

/// Selected member with its rank (1 = non-dominated) and crowding distance
/// within its front.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranked<T> {
    pub individual: Individual<T>,
    pub rank: usize,
    pub crowding: T,
}

/// First `m` members of `previous ∪ current` by front, cutting the last
/// admitted front by descending crowding distance.
pub fn select_ranked<T: Scalar>(
    previous: &[Individual<T>],
    current: &[Individual<T>],
    m: usize,
) -> Result<Vec<Ranked<T>>, MooError> {
    let pool: Vec<&Individual<T>> = previous.iter().chain(current).collect();
    if pool.len() < m {
        return Err(MooError::InsufficientPopulation { needed: m, available: pool.len() });
    }
    let f = pool.iter().map(|i| i.fitness_or_err().copied()).collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(m);
    for (r, front) in sort_fitness(&f).into_iter().enumerate() {
        if out.len() >= m {
            break;
        }
        let members: Vec<FitnessVector<T>> = front.iter().map(|&i| f[i]).collect();
        let crowd = crowding_distance(&members);
        let mut idx: Vec<usize> = (0..front.len()).collect();
        if out.len() + front.len() > m {
            idx.sort_by(|&a, &b| crowd[b].partial_cmp(&crowd[a]).expect("crowding is never NaN"));
            idx.truncate(m - out.len());
        }
        for k in idx {
            out.push(Ranked { individual: pool[front[k]].clone(), rank: r + 1, crowding: crowd[k] });
        }
    }
    Ok(out)
}

/// [`select_ranked`] without the ranking information.
pub fn select<T: Scalar>(
    previous: &[Individual<T>],
    current: &[Individual<T>],
    m: usize,
) -> Result<Vec<Individual<T>>, MooError> {
    Ok(select_ranked(previous, current, m)?.into_iter().map(|r| r.individual).collect())
}

/// Non-dominated members of a population, one per distinct expression, and
/// the best member at each complexity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront<T> {
    members: Vec<Individual<T>>,
    by_complexity: BTreeMap<usize, usize>,
}

impl<T: Scalar> ParetoFront<T> {
    pub fn from_population(pop: &[Individual<T>]) -> Result<Self, MooError> {
        let fronts = fast_non_dominated_sort(pop)?;
        let mut seen = HashSet::new();
        let members: Vec<Individual<T>> = fronts
            .first()
            .into_iter()
            .flatten()
            .map(|&i| &pop[i])
            .filter(|ind| seen.insert(ind.expression().map(ToString::to_string)))
            .cloned()
            .collect();
        let mut by_complexity: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, ind) in members.iter().enumerate() {
            let f = ind.fitness.expect("evaluated");
            let better = match by_complexity.get(&f.complexity) {
                None => true,
                Some(&j) => {
                    let g = members[j].fitness.expect("evaluated");
                    (f.rms_simulation, f.rms_prediction) < (g.rms_simulation, g.rms_prediction)
                }
            };
            if better {
                by_complexity.insert(f.complexity, i);
            }
        }
        Ok(Self { members, by_complexity })
    }

    pub fn members(&self) -> &[Individual<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member with the lowest simulation error (then prediction error) at
    /// complexity `c`.
    pub fn best(&self, complexity: usize) -> Option<&Individual<T>> {
        self.by_complexity.get(&complexity).map(|&i| &self.members[i])
    }

    /// `(complexity, best member)` in increasing complexity.
    pub fn best_by_complexity(&self) -> impl Iterator<Item = (usize, &Individual<T>)> {
        self.by_complexity.iter().map(|(&c, &i)| (c, &self.members[i]))
    }
}
