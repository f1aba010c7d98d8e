//! Genetic operators over derivation trees and the multi-objective
//! identification loop.

use std::collections::{HashMap, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::model::{ModelError, NarxModel};
use crate::moo::{select_ranked, MooError, ParetoFront, Ranked};
use crate::narx::{AdjunctionTable, DerivationTree, NarxError, NarxExpression, NodePath};
use crate::objectives::{complexity, evaluate, Evaluation, FitnessVector};
use crate::tag::{Grammar, Symbol};
use crate::moo::Individual;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluating `{expression}`: {source}")]
    Evaluation { expression: String, source: ModelError },
    #[error(transparent)]
    Narx(#[from] NarxError),
    #[error(transparent)]
    Selection(#[from] MooError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Stop once the best errors in the selected population reach these values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_prediction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_simulation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub max_adjunctions: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub seed: u64,
    /// Worker threads for evaluation; results do not depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_stop: Option<EarlyStop>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            iterations: 150,
            max_adjunctions: 150,
            p_crossover: 1.0,
            p_mutation: 0.8,
            seed: 0,
            threads: None,
            early_stop: None,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::Config(m.to_string()));
        if self.population_size == 0 {
            return bad("population_size must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_crossover) {
            return bad("p_crossover must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.p_mutation) {
            return bad("p_mutation must be in [0, 1]");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        Ok(())
    }
}

fn aux_root_label<'a>(table: &AdjunctionTable<'a>, d: &DerivationTree, path: &[usize]) -> Option<&'a Symbol> {
    let id = &d.get(path)?.tree_id;
    Some(table.grammar().tree(id)?.root_label())
}

/// Share of crossover points drawn from internal derivation nodes when the
/// parent has any.
pub const INTERNAL_CROSSOVER_BIAS: f64 = 0.9;

/// Probability of each extra adjunction when mutation regrows a subtree.
pub const REGROWTH_CONTINUE: f64 = 0.3;

/// Swaps a non-root subtree of `a` with a uniformly chosen subtree of `b`
/// whose auxiliary tree has the same root label, then prunes both offspring
/// to the budget. The point in `a` is an internal node with probability
/// [`INTERNAL_CROSSOVER_BIAS`], otherwise any compatible node. Parents come
/// back unchanged when no compatible pair exists.
pub fn crossover<R: Rng + ?Sized>(
    table: &AdjunctionTable<'_>,
    a: &DerivationTree,
    b: &DerivationTree,
    max_adjunctions: usize,
    rng: &mut R,
) -> (DerivationTree, DerivationTree) {
    let labelled = |d: &DerivationTree| -> Vec<(NodePath, &Symbol)> {
        d.nodes()
            .into_iter()
            .filter(|(p, _)| !p.is_empty())
            .filter_map(|(p, _)| aux_root_label(table, d, &p).map(|l| (p, l)))
            .collect()
    };
    let (na, nb) = (labelled(a), labelled(b));
    let mut candidates: Vec<&(NodePath, &Symbol)> =
        na.iter().filter(|(_, l)| nb.iter().any(|(_, m)| m == l)).collect();
    if rng.random_bool(INTERNAL_CROSSOVER_BIAS) {
        let internal: Vec<_> =
            candidates.iter().copied().filter(|(p, _)| a.get(p).is_some_and(|n| !n.children.is_empty())).collect();
        if !internal.is_empty() {
            candidates = internal;
        }
    }
    let Some((pa, label)) = candidates.choose(rng).copied() else {
        return (a.clone(), b.clone());
    };
    let partners: Vec<&NodePath> = nb.iter().filter(|(_, m)| m == label).map(|(p, _)| p).collect();
    let pb = *partners.choose(rng).expect("candidate has a partner");
    let sa = a.get(pa).expect("path resolves").clone();
    let sb = b.get(pb).expect("path resolves").clone();
    let ca = a.with_subtree(pa, &sb);
    let cb = b.with_subtree(pb, &sa);
    (table.prune_to_budget(&ca, max_adjunctions), table.prune_to_budget(&cb, max_adjunctions))
}

/// Deletes the subtree at a uniformly chosen node and regrows a random
/// sub-derivation at the same site. The regrown size is the minimum the
/// site needs plus a geometric number of extra adjunctions (continuation
/// probability [`REGROWTH_CONTINUE`]), capped by the remaining budget.
/// Choosing the root regrows the whole derivation.
pub fn mutate<R: Rng + ?Sized>(
    table: &AdjunctionTable<'_>,
    a: &DerivationTree,
    max_adjunctions: usize,
    rng: &mut R,
) -> DerivationTree {
    let paths: Vec<NodePath> = a.nodes().into_iter().map(|(p, _)| p).collect();
    let path = paths.choose(rng).expect("derivation has a root");
    if path.is_empty() {
        let target = rng.random_range(0..=max_adjunctions);
        return table.grow(&a.bare(), &[], target, rng);
    }
    let site = a.get(path).expect("path resolves").site_address.clone();
    let parent = &path[..path.len() - 1];
    let removed = a.without_subtree(path);
    let remaining = max_adjunctions.saturating_sub(removed.adjunction_count());
    let mut size = usize::from(table.is_mandatory(a, path));
    if remaining < size {
        return a.clone();
    }
    while size < remaining && rng.random_bool(REGROWTH_CONTINUE) {
        size += 1;
    }
    if size == 0 {
        return removed;
    }
    table.grow_at(&removed, parent, &site, size, rng)
}

/// Binary tournament on (rank, crowding distance).
fn tournament<'p, T: Scalar, R: Rng + ?Sized>(pop: &'p [Ranked<T>], rng: &mut R) -> &'p Ranked<T> {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if b.rank < a.rank || (b.rank == a.rank && b.crowding > a.crowding) {
        b
    } else {
        a
    }
}

/// Mating attempts per population slot before repeated offspring are let
/// through.
const NOVELTY_ATTEMPTS: usize = 20;

/// Next generation of genotypes: pairs are either crossed over from two
/// tournament winners (probability `p_crossover`) or copied from consecutive
/// members; each child is then mutated with probability `p_mutation`.
///
/// A child produced by an operator is discarded when its expression is
/// `known` or already proposed in this generation, until
/// `NOVELTY_ATTEMPTS * M` children have been tried. Unchanged copies are
/// always kept.
pub fn propose<T: Scalar, R: Rng + ?Sized>(
    table: &AdjunctionTable<'_>,
    selected: &[Ranked<T>],
    cfg: &GpConfig,
    known: impl Fn(&NarxExpression) -> bool,
    rng: &mut R,
) -> Vec<DerivationTree> {
    let m = cfg.population_size;
    let mut next = Vec::with_capacity(m);
    let mut proposed: HashSet<NarxExpression> = HashSet::new();
    let mut attempts = 0;
    let mut i = 0;
    while next.len() < m {
        let crossed = rng.random_bool(cfg.p_crossover);
        let (c1, c2) = if crossed {
            let a = &tournament(selected, rng).individual.genotype;
            let b = &tournament(selected, rng).individual.genotype;
            crossover(table, a, b, cfg.max_adjunctions, rng)
        } else {
            let n = selected.len();
            (selected[i % n].individual.genotype.clone(), selected[(i + 1) % n].individual.genotype.clone())
        };
        for c in [c1, c2] {
            if next.len() == m {
                break;
            }
            let mutated = rng.random_bool(cfg.p_mutation);
            let c = if mutated { mutate(table, &c, cfg.max_adjunctions, rng) } else { c };
            if crossed || mutated {
                attempts += 1;
                let novel = table.expression(&c).is_ok_and(|e| !known(&e) && proposed.insert(e));
                if !novel && attempts < NOVELTY_ATTEMPTS * m {
                    continue;
                }
            }
            next.push(c);
        }
        i += 2;
    }
    next
}

/// Minimum and mean of each objective over the selected population. Means
/// are taken over finite values and are `+∞` when there are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterationStats<T> {
    pub iteration: usize,
    pub min_rms_prediction: T,
    pub mean_rms_prediction: T,
    pub min_rms_simulation: T,
    pub mean_rms_simulation: T,
    pub min_complexity: usize,
    pub mean_complexity: T,
}

fn min_mean<T: Scalar>(v: impl Iterator<Item = T> + Clone) -> (T, T) {
    let min = v.clone().fold(T::infinity(), T::min);
    let finite: Vec<T> = v.filter(|x| x.is_finite()).collect();
    let mean = if finite.is_empty() {
        T::infinity()
    } else {
        finite.iter().copied().sum::<T>() / T::from_usize_lossy(finite.len())
    };
    (min, mean)
}

impl<T: Scalar> IterationStats<T> {
    fn of(iteration: usize, pop: &[Ranked<T>]) -> Self {
        let f = || pop.iter().map(|r| r.individual.fitness.expect("selected individuals are evaluated"));
        let (min_p, mean_p) = min_mean(f().map(|x| x.rms_prediction));
        let (min_s, mean_s) = min_mean(f().map(|x| x.rms_simulation));
        let (_, mean_c) = min_mean(f().map(|x| T::from_usize_lossy(x.complexity)));
        Self {
            iteration,
            min_rms_prediction: min_p,
            mean_rms_prediction: mean_p,
            min_rms_simulation: min_s,
            mean_rms_simulation: mean_s,
            min_complexity: f().map(|x| x.complexity).min().unwrap_or(0),
            mean_complexity: mean_c,
        }
    }
}

/// Passed to the observer after each selection.
#[derive(Debug)]
pub struct IterationReport<'a, T> {
    pub iteration: usize,
    pub stats: &'a IterationStats<T>,
    /// Selected population with ranks and crowding distances.
    pub population: &'a [Ranked<T>],
    pub front_size: usize,
    /// Distinct expressions fitted so far.
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub front: ParetoFront<T>,
    pub history: Vec<IterationStats<T>>,
    pub population: Vec<Individual<T>>,
    pub evaluations: usize,
}

fn is_candidate_failure(e: &ModelError) -> bool {
    matches!(e, ModelError::SeriesTooShort { .. } | ModelError::NonFiniteRegressor { .. })
}

fn fit<T: Scalar>(
    e: &NarxExpression,
    estimation: &[Dataset<T>],
    validation: &[Dataset<T>],
) -> Result<Evaluation<T>, EvolutionError> {
    match evaluate(e, estimation, validation) {
        Ok(ev) => Ok(ev),
        // Too long a lag or overflowing regressors rule out this candidate
        // only.
        Err(err) if is_candidate_failure(&err) => Ok(Evaluation {
            model: NarxModel::unfitted(e.clone()),
            fitness: FitnessVector::infeasible(complexity(e)),
            diverged: false,
        }),
        Err(source) => Err(EvolutionError::Evaluation { expression: e.to_string(), source }),
    }
}

struct Evaluator<'a, T> {
    table: &'a AdjunctionTable<'a>,
    estimation: &'a [Dataset<T>],
    validation: &'a [Dataset<T>],
    cache: HashMap<NarxExpression, Evaluation<T>>,
    pool: Option<rayon::ThreadPool>,
}

impl<T: Scalar> Evaluator<'_, T> {
    fn evaluate(&mut self, pop: &mut [Individual<T>]) -> Result<(), EvolutionError> {
        let mut exprs = Vec::with_capacity(pop.len());
        let mut todo: Vec<NarxExpression> = Vec::new();
        for ind in pop.iter() {
            let e = self.table.expression(&ind.genotype)?;
            if !self.cache.contains_key(&e) && !todo.contains(&e) {
                todo.push(e.clone());
            }
            exprs.push(e);
        }
        let (est, val) = (self.estimation, self.validation);
        let work = || todo.par_iter().map(|e| fit(e, est, val)).collect::<Vec<_>>();
        let results = match &self.pool {
            Some(p) => p.install(work),
            None => work(),
        };
        for (e, r) in todo.into_iter().zip(results) {
            self.cache.insert(e, r?);
        }
        for (ind, e) in pop.iter_mut().zip(&exprs) {
            let ev = &self.cache[e];
            ind.model = Some(ev.model.clone());
            ind.fitness = Some(ev.fitness);
            ind.diverged = ev.diverged;
        }
        Ok(())
    }
}

fn early_stop_reached<T: Scalar>(stop: &EarlyStop, s: &IterationStats<T>) -> bool {
    let ok = |thr: Option<f64>, v: T| thr.is_none_or(|t| v.to_f64_lossy() <= t);
    (stop.rms_prediction.is_some() || stop.rms_simulation.is_some())
        && ok(stop.rms_prediction, s.min_rms_prediction)
        && ok(stop.rms_simulation, s.min_rms_simulation)
}

/// Runs `cfg.iterations` rounds of evaluate, select and propose, starting
/// from random derivations. All random draws come from one stream seeded
/// by `cfg.seed`, so results do not depend on the number of threads.
pub fn run<T: Scalar>(
    cfg: &GpConfig,
    grammar: &Grammar,
    estimation: &[Dataset<T>],
    validation: &[Dataset<T>],
    mut observer: impl FnMut(&IterationReport<'_, T>),
) -> Result<RunResult<T>, EvolutionError> {
    cfg.validate()?;
    if !grammar.validate().is_empty() {
        return Err(EvolutionError::Config("grammar does not validate".into()));
    }
    let table = AdjunctionTable::new(grammar);
    let pool = match cfg.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EvolutionError::ThreadPool(e.to_string()))?,
        ),
        None => None,
    };
    let mut evaluator = Evaluator { table: &table, estimation, validation, cache: HashMap::new(), pool };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_id = 0u64;
    let mut spawn = |g: DerivationTree| {
        next_id += 1;
        Individual::new(next_id - 1, g)
    };
    let mut current: Vec<Individual<T>> =
        (0..cfg.population_size).map(|_| spawn(table.random(cfg.max_adjunctions, &mut rng))).collect();
    let mut previous: Vec<Individual<T>> = Vec::new();
    let mut history = Vec::with_capacity(cfg.iterations);
    for l in 0..cfg.iterations {
        evaluator.evaluate(&mut current)?;
        let ranked = select_ranked(&previous, &current, cfg.population_size)?;
        let stats = IterationStats::of(l, &ranked);
        observer(&IterationReport {
            iteration: l,
            stats: &stats,
            population: &ranked,
            front_size: ranked.iter().filter(|r| r.rank == 1).count(),
            evaluations: evaluator.cache.len(),
        });
        let stop = cfg.early_stop.as_ref().is_some_and(|s| early_stop_reached(s, &stats));
        history.push(stats);
        let last = l + 1 == cfg.iterations || stop;
        if !last {
            let known = |e: &NarxExpression| evaluator.cache.contains_key(e);
            current = propose(&table, &ranked, cfg, known, &mut rng).into_iter().map(&mut spawn).collect();
        }
        previous = ranked.into_iter().map(|r| r.individual).collect();
        if last {
            break;
        }
    }
    Ok(RunResult {
        front: ParetoFront::from_population(&previous)?,
        history,
        population: previous,
        evaluations: evaluator.cache.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::g_narx;

    fn table_and_trees(n: usize, max: usize, seed: u64) -> (Grammar, Vec<DerivationTree>) {
        let g = g_narx();
        let t = AdjunctionTable::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..n).map(|_| t.random(max, &mut rng)).collect();
        (g, trees)
    }

    #[test]
    fn bare_parents_cross_unchanged() {
        let g = g_narx();
        let t = AdjunctionTable::new(&g);
        let bare = DerivationTree::new(crate::tag::TreeId::new("alpha1"));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(crossover(&t, &bare, &bare, 10, &mut rng), (bare.clone(), bare.clone()));
    }

    #[test]
    fn operators_keep_validity() {
        let (g, trees) = table_and_trees(60, 12, 11);
        let t = AdjunctionTable::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let a = trees.choose(&mut rng).unwrap();
            let b = trees.choose(&mut rng).unwrap();
            let (c, d) = crossover(&t, a, b, 12, &mut rng);
            t.validate(&c, Some(12)).unwrap();
            t.validate(&d, Some(12)).unwrap();
            let m = mutate(&t, a, 12, &mut rng);
            t.validate(&m, Some(12)).unwrap();
        }
        let (c, d) = crossover(&t, &trees[0], &trees[0], 12, &mut rng);
        t.validate(&c, Some(12)).unwrap();
        t.validate(&d, Some(12)).unwrap();
    }

    #[test]
    fn mutation_of_bare_tree_grows_from_root() {
        let g = g_narx();
        let t = AdjunctionTable::new(&g);
        let bare = DerivationTree::new(crate::tag::TreeId::new("alpha1"));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grown = (0..20).map(|_| mutate(&t, &bare, 8, &mut rng)).filter(|d| d.adjunction_count() > 0).count();
        assert!(grown > 10);
    }

    #[test]
    fn exhausted_budget_allows_deletion_only() {
        let (g, trees) = table_and_trees(40, 6, 2);
        let t = AdjunctionTable::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in trees.iter().filter(|d| d.adjunction_count() == 6) {
            for _ in 0..20 {
                let m = mutate(&t, d, 6, &mut rng);
                t.validate(&m, Some(6)).unwrap();
            }
        }
    }

    #[test]
    fn no_op_operators_preserve_population() {
        let (g, trees) = table_and_trees(7, 10, 5);
        let t = AdjunctionTable::new(&g);
        let ranked: Vec<Ranked<f64>> = trees
            .iter()
            .enumerate()
            .map(|(i, d)| Ranked { individual: Individual::new(i as u64, d.clone()), rank: 1, crowding: 0.0 })
            .collect();
        let cfg = GpConfig { population_size: 7, p_crossover: 0.0, p_mutation: 0.0, ..GpConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut next = propose(&t, &ranked, &cfg, |_| true, &mut rng);
        let mut before = trees.clone();
        let key = |d: &DerivationTree| serde_json::to_string(d).unwrap();
        next.sort_by_key(key);
        before.sort_by_key(key);
        assert_eq!(next, before);
    }

    #[test]
    fn proposals_avoid_known_expressions() {
        let (g, trees) = table_and_trees(20, 10, 8);
        let t = AdjunctionTable::new(&g);
        let ranked: Vec<Ranked<f64>> = trees
            .iter()
            .enumerate()
            .map(|(i, d)| Ranked { individual: Individual::new(i as u64, d.clone()), rank: 1, crowding: 0.0 })
            .collect();
        let known: HashSet<NarxExpression> = trees.iter().map(|d| t.expression(d).unwrap()).collect();
        let cfg = GpConfig { population_size: 20, max_adjunctions: 10, ..GpConfig::default() };
        let next = propose(&t, &ranked, &cfg, |e| known.contains(e), &mut ChaCha8Rng::seed_from_u64(2));
        let exprs: Vec<NarxExpression> = next.iter().map(|d| t.expression(d).unwrap()).collect();
        assert!(exprs.iter().all(|e| !known.contains(e)));
        assert_eq!(exprs.iter().collect::<HashSet<_>>().len(), exprs.len());
    }

    #[test]
    fn regrowth_is_mostly_small() {
        let (g, trees) = table_and_trees(200, 30, 9);
        let t = AdjunctionTable::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let grew_a_lot = trees
            .iter()
            .filter(|d| mutate(&t, d, 60, &mut rng).adjunction_count() > d.adjunction_count() + 10)
            .count();
        assert!(grew_a_lot < 20, "{grew_a_lot}");
    }

    #[test]
    fn config_validation() {
        assert!(GpConfig::default().validate().is_ok());
        for bad in [
            GpConfig { population_size: 0, ..GpConfig::default() },
            GpConfig { iterations: 0, ..GpConfig::default() },
            GpConfig { p_crossover: 1.5, ..GpConfig::default() },
            GpConfig { p_mutation: -0.1, ..GpConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        let parsed: GpConfig = serde_json::from_str(r#"{"population_size": 5}"#).unwrap();
        assert_eq!(parsed.iterations, 150);
    }
}
