//! NSGA-II with fast non-dominated sorting and crowding distance.
//!
//! All objectives are minimized. The engine is generic over a [`Problem`]
//! that owns genome representation, variation operators and evaluation.
//! Evaluations run in parallel on the current rayon pool. Every random
//! decision is drawn from one master stream between generation barriers and
//! each evaluation receives the seed `run_seed ^ evaluation_index`, so the
//! outcome does not depend on scheduling.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    /// Probability that a selected pair is recombined.
    pub crossover_prob: f64,
    /// Probability that an offspring is passed through the mutation operator.
    pub mutation_prob: f64,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self { population: 50, generations: 100, crossover_prob: 0.7, mutation_prob: 0.2, seed: 0 }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "population must be even and >= 4, got {}",
                self.population
            )));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Objectives plus problem-specific detail of one successful evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<I> {
    pub objectives: Vec<f64>,
    pub info: I,
}

pub trait Problem: Sync {
    type Genome: Clone + Send + Sync;
    type Info: Clone + Send + Sync;

    fn initial_population(&self, size: usize, rng: &mut ChaCha8Rng) -> Vec<Self::Genome>;

    fn crossover(
        &self,
        a: &Self::Genome,
        b: &Self::Genome,
        rng: &mut ChaCha8Rng,
    ) -> (Self::Genome, Self::Genome);

    fn mutate(&self, genome: &Self::Genome, rng: &mut ChaCha8Rng) -> Self::Genome;

    /// Evaluates one genome. An error marks a broken individual.
    fn evaluate(&self, genome: &Self::Genome, seed: u64) -> std::result::Result<Evaluation<Self::Info>, String>;

    /// Objectives assigned to broken individuals.
    fn failure_objectives(&self) -> Vec<f64>;

    /// Reference point for the per-generation hypervolume log.
    fn reference_point(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual<G, I> {
    pub genome: G,
    pub objectives: Vec<f64>,
    /// `None` when evaluation failed.
    pub info: Option<I>,
    /// Evaluation index; also determines the evaluation seed.
    pub id: usize,
    pub rank: usize,
    pub crowding: f64,
}

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Partitions `objectives` into fronts of indices; front 0 is non-dominated.
pub fn fast_non_dominated_sort(objectives: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objectives[i], &objectives[j]) {
                dominated[i].push(j);
                counts[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominated[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of one front, in input order.
///
/// Boundary members of any objective get `+inf`; an objective with zero
/// range contributes nothing.
pub fn crowding_distance(front: &[&[f64]]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    let mut dist = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| front[a][k].partial_cmp(&front[b][k]).unwrap_or(Ordering::Equal));
        let lo = front[order[0]][k];
        let hi = front[order[n - 1]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range.is_nan() || range <= 0.0 || !range.is_finite() {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]][k] - front[order[w - 1]][k];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Area dominated by `points` and bounded by `reference` (two objectives).
/// Points not strictly better than the reference in both objectives add
/// nothing.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> =
        points.iter().copied().filter(|p| p[0] < reference[0] && p[1] < reference[1]).collect();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap_or(Ordering::Equal).then(a[1].partial_cmp(&b[1]).unwrap_or(Ordering::Equal)));
    let mut hv = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            hv += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    hv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_f1: f64,
    pub best_f2: f64,
    pub front0_size: usize,
    pub hypervolume: f64,
}

#[derive(Debug, Clone)]
pub struct EvolveResult<G, I> {
    pub population: Vec<Individual<G, I>>,
    /// Rank-0 members of the final population, ordered by objectives.
    pub archive: Vec<Individual<G, I>>,
    pub history: Vec<GenerationStats>,
}

/// Assigns rank and crowding in place; returns the fronts.
fn rank_population<G, I>(pop: &mut [Individual<G, I>]) -> Vec<Vec<usize>> {
    let objs: Vec<Vec<f64>> = pop.iter().map(|p| p.objectives.clone()).collect();
    let fronts = fast_non_dominated_sort(&objs);
    for (rank, front) in fronts.iter().enumerate() {
        let members: Vec<&[f64]> = front.iter().map(|&i| objs[i].as_slice()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}

fn better<G, I>(a: &Individual<G, I>, b: &Individual<G, I>) -> Ordering {
    a.rank.cmp(&b.rank).then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

fn tournament<'a, G, I>(pop: &'a [Individual<G, I>], rng: &mut ChaCha8Rng) -> &'a Individual<G, I> {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    match better(a, b) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.random_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

fn evaluate_batch<P: Problem>(
    problem: &P,
    genomes: Vec<P::Genome>,
    first_id: usize,
    run_seed: u64,
) -> Vec<Individual<P::Genome, P::Info>> {
    let failure = problem.failure_objectives();
    genomes
        .into_par_iter()
        .enumerate()
        .map(|(k, genome)| {
            let id = first_id + k;
            let (objectives, info) = match problem.evaluate(&genome, run_seed ^ id as u64) {
                Ok(ev) if ev.objectives.iter().all(|v| v.is_finite()) => (ev.objectives, Some(ev.info)),
                Ok(_) => (failure.clone(), None),
                Err(msg) => {
                    log::debug!("individual {id} failed: {msg}");
                    (failure.clone(), None)
                }
            };
            Individual { genome, objectives, info, id, rank: 0, crowding: 0.0 }
        })
        .collect()
}

fn stats<G, I>(generation: usize, pop: &[Individual<G, I>], reference: &[f64]) -> GenerationStats {
    let front: Vec<[f64; 2]> = pop
        .iter()
        .filter(|p| p.rank == 0)
        .map(|p| [p.objectives[0], p.objectives.get(1).copied().unwrap_or(0.0)])
        .collect();
    let min_of = |k: usize| pop.iter().map(|p| p.objectives.get(k).copied().unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
    GenerationStats {
        generation,
        best_f1: min_of(0),
        best_f2: min_of(1),
        front0_size: front.len(),
        hypervolume: hypervolume_2d(&front, [reference[0], reference.get(1).copied().unwrap_or(0.0)]),
    }
}

fn by_crowding<G, I>(pop: &[Individual<G, I>], mut members: Vec<usize>) -> Vec<usize> {
    members.sort_by(|&x, &y| pop[y].crowding.partial_cmp(&pop[x].crowding).unwrap_or(Ordering::Equal));
    members
}

/// Chooses `k` members of an overflowing rank-0 front.
///
/// Crowding truncation alone can lose dominated area between generations.
/// Here the distinct points inside the reference box are reduced to the
/// `k`-subset of maximum hypervolume (exact dynamic program over the
/// f1-sorted staircase); leftover slots go to the remaining members in
/// crowding order.
fn truncate_first_front(front: &[&[f64]], k: usize, reference: [f64; 2]) -> Vec<usize> {
    let crowd = crowding_distance(front);
    let mut inside: Vec<usize> = (0..front.len())
        .filter(|&i| front[i][0] < reference[0] && front[i][1] < reference[1])
        .collect();
    inside.sort_by(|&a, &b| {
        front[a][0]
            .partial_cmp(&front[b][0])
            .unwrap_or(Ordering::Equal)
            .then(front[a][1].partial_cmp(&front[b][1]).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    inside.dedup_by(|b, a| front[*a] == front[*b]);

    let chosen: Vec<usize> = if inside.len() <= k {
        inside
    } else {
        let m = inside.len();
        let x = |j: usize| front[inside[j]][0];
        let y = |j: usize| front[inside[j]][1];
        // best[c][j]: max area using c + 1 points, the last (largest f1) being j.
        let mut best = vec![vec![f64::NEG_INFINITY; m]; k];
        let mut from = vec![vec![usize::MAX; m]; k];
        for j in 0..m {
            best[0][j] = (reference[0] - x(j)) * (reference[1] - y(j));
        }
        for c in 1..k {
            for j in c..m {
                for i in (c - 1)..j {
                    let v = best[c - 1][i] + (reference[0] - x(j)) * (y(i) - y(j));
                    if v > best[c][j] {
                        best[c][j] = v;
                        from[c][j] = i;
                    }
                }
            }
        }
        let mut j = (k - 1..m).fold(k - 1, |acc, j| if best[k - 1][j] > best[k - 1][acc] { j } else { acc });
        let mut picked = Vec::with_capacity(k);
        for c in (0..k).rev() {
            picked.push(inside[j]);
            if c > 0 {
                j = from[c][j];
            }
        }
        picked
    };

    let mut rest: Vec<usize> = (0..front.len()).filter(|i| !chosen.contains(i)).collect();
    rest.sort_by(|&a, &b| crowd[b].partial_cmp(&crowd[a]).unwrap_or(Ordering::Equal));
    let mut out = chosen;
    out.extend(rest);
    out.truncate(k);
    out
}

pub fn evolve<P: Problem>(problem: &P, params: &GaParams) -> Result<EvolveResult<P::Genome, P::Info>> {
    evolve_with(problem, params, |_, _| {})
}

/// Runs NSGA-II, calling `on_generation` after each generation barrier
/// (including generation 0, the initial population).
pub fn evolve_with<P, F>(problem: &P, params: &GaParams, mut on_generation: F) -> Result<EvolveResult<P::Genome, P::Info>>
where
    P: Problem,
    F: FnMut(&GenerationStats, &[Individual<P::Genome, P::Info>]),
{
    params.validate()?;
    let mu = params.population;
    let reference = problem.reference_point();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut next_id = 0usize;

    let initial = problem.initial_population(mu, &mut rng);
    if initial.len() != mu {
        return Err(Error::InvalidConfig(format!("initial population has {} members, expected {mu}", initial.len())));
    }
    let mut pop = evaluate_batch(problem, initial, next_id, params.seed);
    next_id += mu;
    rank_population(&mut pop);
    let mut history = vec![stats(0, &pop, &reference)];
    on_generation(&history[0], &pop);

    for generation in 1..=params.generations {
        let mut offspring = Vec::with_capacity(mu);
        while offspring.len() < mu {
            let a = tournament(&pop, &mut rng).genome.clone();
            let b = tournament(&pop, &mut rng).genome.clone();
            let (c1, c2) = if rng.random::<f64>() < params.crossover_prob {
                problem.crossover(&a, &b, &mut rng)
            } else {
                (a, b)
            };
            for child in [c1, c2] {
                if offspring.len() == mu {
                    break;
                }
                let child = if rng.random::<f64>() < params.mutation_prob {
                    problem.mutate(&child, &mut rng)
                } else {
                    child
                };
                offspring.push(child);
            }
        }
        let children = evaluate_batch(problem, offspring, next_id, params.seed);
        next_id += mu;

        let mut merged = pop;
        merged.extend(children);
        let fronts = rank_population(&mut merged);
        let mut keep: Vec<usize> = Vec::with_capacity(mu);
        for front in fronts {
            if keep.len() + front.len() <= mu {
                keep.extend(front);
            } else if keep.is_empty() && reference.len() == 2 {
                let objs: Vec<&[f64]> = front.iter().map(|&i| merged[i].objectives.as_slice()).collect();
                keep.extend(truncate_first_front(&objs, mu, [reference[0], reference[1]]).into_iter().map(|k| front[k]));
            } else {
                keep.extend(by_crowding(&merged, front).into_iter().take(mu - keep.len()));
            }
            if keep.len() == mu {
                break;
            }
        }
        keep.sort_unstable();
        let mut slots: Vec<Option<Individual<P::Genome, P::Info>>> = merged.into_iter().map(Some).collect();
        pop = keep.into_iter().filter_map(|i| slots[i].take()).collect();

        let s = stats(generation, &pop, &reference);
        on_generation(&s, &pop);
        history.push(s);
    }

    let mut archive: Vec<_> = pop.iter().filter(|p| p.rank == 0).cloned().collect();
    archive.sort_by(|a, b| {
        a.objectives
            .partial_cmp(&b.objectives)
            .unwrap_or(Ordering::Equal)
            .then(a.id.cmp(&b.id))
    });
    Ok(EvolveResult { population: pop, archive, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_example() {
        let objs = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert_eq!(fast_non_dominated_sort(&objs), vec![vec![0, 1], vec![2], vec![3]]);
        assert_eq!(fast_non_dominated_sort(&[vec![5.0, 5.0]]), vec![vec![0]]);
        let same = vec![vec![1.0, 1.0]; 4];
        assert_eq!(fast_non_dominated_sort(&same), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn crowding_examples() {
        let pts: Vec<&[f64]> = vec![&[0.0, 10.0], &[5.0, 5.0], &[10.0, 0.0]];
        let d = crowding_distance(&pts);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert_eq!(d[1], 2.0);
        assert!(crowding_distance(&[&[1.0, 2.0][..], &[2.0, 1.0][..]]).iter().all(|d| d.is_infinite()));
        let dup: Vec<&[f64]> = vec![&[0.0, 4.0], &[1.0, 1.0], &[1.0, 1.0], &[4.0, 0.0]];
        let d = crowding_distance(&dup);
        assert!(d[1].is_finite() && d[2].is_finite());
        let flat: Vec<&[f64]> = vec![&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]];
        assert_eq!(crowding_distance(&flat)[1], 0.0);
    }

    #[test]
    fn hypervolume_rectangles() {
        assert_eq!(hypervolume_2d(&[[1.0, 1.0]], [2.0, 2.0]), 1.0);
        assert_eq!(hypervolume_2d(&[[0.0, 1.0], [1.0, 0.0]], [2.0, 2.0]), 3.0);
        assert_eq!(hypervolume_2d(&[[0.0, 1.0], [0.5, 1.5], [1.0, 0.0]], [2.0, 2.0]), 3.0);
        assert_eq!(hypervolume_2d(&[[3.0, 0.0]], [2.0, 2.0]), 0.0);
        assert_eq!(hypervolume_2d(&[], [2.0, 2.0]), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(GaParams { population: 5, ..Default::default() }.validate().is_err());
        assert!(GaParams { population: 2, ..Default::default() }.validate().is_err());
        assert!(GaParams { crossover_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(GaParams::default().validate().is_ok());
    }

    struct Parabolas;

    impl Problem for Parabolas {
        type Genome = f64;
        type Info = ();

        fn initial_population(&self, size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
            (0..size).map(|_| rng.random_range(-4.0..6.0)).collect()
        }

        fn crossover(&self, a: &f64, b: &f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
            let t: f64 = rng.random();
            (t * a + (1.0 - t) * b, (1.0 - t) * a + t * b)
        }

        fn mutate(&self, g: &f64, rng: &mut ChaCha8Rng) -> f64 {
            g + rng.random_range(-0.5..0.5)
        }

        fn evaluate(&self, g: &f64, _seed: u64) -> std::result::Result<Evaluation<()>, String> {
            if g.is_nan() {
                return Err("nan genome".into());
            }
            Ok(Evaluation { objectives: vec![g * g, (g - 2.0) * (g - 2.0)], info: () })
        }

        fn failure_objectives(&self) -> Vec<f64> {
            vec![1.0, f64::MAX]
        }

        fn reference_point(&self) -> Vec<f64> {
            vec![4.0, 4.0]
        }
    }

    fn brute_force_fronts(objs: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..objs.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| dominates(&objs[j], &objs[i])))
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn synthetic_run_approaches_analytic_front() {
        let params = GaParams { population: 20, generations: 50, seed: 3, ..Default::default() };
        let res = evolve(&Parabolas, &params).unwrap();
        // f2 = (sqrt(f1) - 2)^2 on [0, 4]; area under it is 8/3, so 16 - 8/3.
        let analytic = 40.0 / 3.0;
        let pts: Vec<[f64; 2]> = res.archive.iter().map(|p| [p.objectives[0], p.objectives[1]]).collect();
        let hv = hypervolume_2d(&pts, [4.0, 4.0]);
        assert!(hv >= 0.95 * analytic, "hv {hv}");
        assert!(res.archive.iter().all(|p| (-0.05..=2.05).contains(&p.genome)));
        assert_eq!(res.history.len(), 51);
    }

    #[test]
    fn same_seed_same_archive() {
        let params = GaParams { population: 20, generations: 15, seed: 11, ..Default::default() };
        let a = evolve(&Parabolas, &params).unwrap();
        let b = evolve(&Parabolas, &params).unwrap();
        assert_eq!(a.archive, b.archive);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn zero_generations_keeps_initial_front() {
        let params = GaParams { population: 8, generations: 0, seed: 1, ..Default::default() };
        let res = evolve(&Parabolas, &params).unwrap();
        let objs: Vec<Vec<f64>> = res.population.iter().map(|p| p.objectives.clone()).collect();
        let front0 = &fast_non_dominated_sort(&objs)[0];
        assert_eq!(res.archive.len(), front0.len());
        assert_eq!(res.history.len(), 1);
    }

    #[test]
    fn failed_evaluations_get_worst_objectives() {
        let out = evaluate_batch(&Parabolas, vec![f64::NAN, 1.0], 0, 0);
        assert_eq!(out[0].objectives, vec![1.0, f64::MAX]);
        assert!(out[0].info.is_none());
        assert_eq!(out[1].objectives, vec![1.0, 1.0]);
    }

    #[test]
    fn front_hypervolume_never_shrinks() {
        for seed in 0..10 {
            let params = GaParams { population: 20, generations: 40, seed, ..Default::default() };
            let res = evolve(&Parabolas, &params).unwrap();
            for w in res.history.windows(2) {
                assert!(w[1].hypervolume >= w[0].hypervolume - 1e-9, "seed {seed}: {:?}", w);
            }
        }
    }

    #[test]
    fn first_front_truncation_is_hypervolume_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(3..10);
            let mut pts: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    let a: f64 = rng.random_range(0.0..5.0);
                    [a, 5.0 - a + rng.random_range(0.0..0.3)]
                })
                .collect();
            let objs: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
            let front0 = &fast_non_dominated_sort(&objs)[0];
            pts = front0.iter().map(|&i| pts[i]).collect();
            let n = pts.len();
            let k = rng.random_range(1..=n);
            let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let picked = truncate_first_front(&refs, k, [6.0, 6.0]);
            assert_eq!(picked.len(), k);
            let hv = hypervolume_2d(&picked.iter().map(|&i| pts[i]).collect::<Vec<_>>(), [6.0, 6.0]);
            let best = (0u32..1 << n)
                .filter(|s| s.count_ones() as usize == k)
                .map(|s| {
                    let sub: Vec<[f64; 2]> = (0..n).filter(|i| s >> i & 1 == 1).map(|i| pts[i]).collect();
                    hypervolume_2d(&sub, [6.0, 6.0])
                })
                .fold(0.0, f64::max);
            assert!((hv - best).abs() < 1e-9, "{hv} vs {best}");
        }
    }

    proptest::proptest! {
        #[test]
        fn sort_matches_brute_force(raw in proptest::collection::vec((0u8..12, 0u8..12), 1..60)) {
            let objs: Vec<Vec<f64>> = raw.iter().map(|&(a, b)| vec![a as f64, b as f64]).collect();
            let mut fast = fast_non_dominated_sort(&objs);
            for f in &mut fast {
                f.sort_unstable();
            }
            proptest::prop_assert_eq!(fast, brute_force_fronts(&objs));
        }
    }
}
