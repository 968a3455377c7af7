//! NSGA-II selection machinery: dominance, nondominated sorting, crowding
//! distance, crowded comparison, tournaments and elitist survivor selection.
//!
//! All objectives are minimized.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvoError {
    #[error("objective vectors have different arity ({0} vs {1})")]
    ArityMismatch(usize, usize),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("cannot select {wanted} survivors from {available} individuals")]
    InsufficientPopulation { wanted: usize, available: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector {
    pub values: Vec<f64>,
}

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        ObjectiveVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(values: Vec<f64>) -> Self {
        ObjectiveVector::new(values)
    }
}

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool, EvoError> {
    if a.len() != b.len() {
        return Err(EvoError::ArityMismatch(a.len(), b.len()));
    }
    Ok(dominates_unchecked(&a.values, &b.values))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub objectives: ObjectiveVector,
    /// Front index, 1-based; 0 until sorted.
    pub rank: usize,
    pub crowding: f64,
    pub parent: Option<String>,
}

impl Individual {
    pub fn new(id: impl Into<String>, objectives: impl Into<ObjectiveVector>) -> Self {
        Individual { id: id.into(), objectives: objectives.into(), rank: 0, crowding: 0.0, parent: None }
    }
}

fn check_arity<'a>(mut vectors: impl Iterator<Item = &'a ObjectiveVector>) -> Result<usize, EvoError> {
    let Some(first) = vectors.next() else { return Err(EvoError::EmptyPopulation) };
    let m = first.len();
    for v in vectors {
        if v.len() != m {
            return Err(EvoError::ArityMismatch(m, v.len()));
        }
    }
    Ok(m)
}

/// Fronts as lists of indices into `objectives`, best front first.
pub fn nondominated_fronts(objectives: &[ObjectiveVector]) -> Result<Vec<Vec<usize>>, EvoError> {
    check_arity(objectives.iter())?;
    let n = objectives.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in (p + 1)..n {
            if dominates_unchecked(&objectives[p].values, &objectives[q].values) {
                dominates_list[p].push(q);
                dominated_by_count[q] += 1;
            } else if dominates_unchecked(&objectives[q].values, &objectives[p].values) {
                dominates_list[q].push(p);
                dominated_by_count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|i| dominated_by_count[*i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominates_list[p] {
                dominated_by_count[q] -= 1;
                if dominated_by_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    Ok(fronts)
}

/// Sorts `pop` into fronts, assigning ranks and per-front crowding distances.
/// Returns index fronts into `pop`.
pub fn fast_nondominated_sort(pop: &mut [Individual]) -> Result<Vec<Vec<usize>>, EvoError> {
    let objectives: Vec<ObjectiveVector> = pop.iter().map(|i| i.objectives.clone()).collect();
    let fronts = nondominated_fronts(&objectives)?;
    for (r, front) in fronts.iter().enumerate() {
        let members: Vec<&ObjectiveVector> = front.iter().map(|i| &objectives[*i]).collect();
        let dist = crowding_distance(&members);
        for (k, &i) in front.iter().enumerate() {
            pop[i].rank = r + 1;
            pop[i].crowding = dist[k];
        }
    }
    Ok(fronts)
}

/// Crowding distance of each member of one front, in input order.
///
/// Boundary points of every objective get `+inf`; interior points accumulate
/// normalized neighbour gaps. Objectives with zero range contribute nothing.
pub fn crowding_distance(front: &[&ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    for obj in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            front[a].values[obj]
                .partial_cmp(&front[b].values[obj])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let lo = front[order[0]].values[obj];
        let hi = front[order[n - 1]].values[obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for k in 1..n - 1 {
            let gap = front[order[k + 1]].values[obj] - front[order[k - 1]].values[obj];
            dist[order[k]] += gap / range;
        }
    }
    dist
}

/// `Less` means `a` is preferred: lower rank, then larger crowding distance,
/// then lexicographically smaller identifier.
pub fn crowded_compare(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
        .then_with(|| a.id.cmp(&b.id))
}

/// `count` binary tournaments (with replacement) under [`crowded_compare`].
/// Returns indices of the winners.
pub fn tournament_selection<R: Rng + ?Sized>(
    pop: &[Individual],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>, EvoError> {
    if pop.is_empty() {
        return Err(EvoError::EmptyPopulation);
    }
    Ok((0..count)
        .map(|_| {
            let a = rng.gen_range(0..pop.len());
            let b = rng.gen_range(0..pop.len());
            if crowded_compare(&pop[a], &pop[b]) == Ordering::Greater {
                b
            } else {
                a
            }
        })
        .collect())
}

/// Elitist truncation of `combined` to `n` individuals.
///
/// Whole fronts are taken best-first; the front that overflows is cut by
/// descending crowding distance. Ranks and distances are (re)assigned.
pub fn survivor_selection(mut combined: Vec<Individual>, n: usize) -> Result<Vec<Individual>, EvoError> {
    if combined.len() < n {
        return Err(EvoError::InsufficientPopulation { wanted: n, available: combined.len() });
    }
    let fronts = fast_nondominated_sort(&mut combined)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
        } else {
            let mut rest = front;
            rest.sort_by(|&a, &b| crowded_compare(&combined[a], &combined[b]));
            rest.truncate(n - chosen.len());
            chosen.extend(rest);
        }
        if chosen.len() == n {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    Ok(chosen.into_iter().map(|i| slots[i].take().expect("each index chosen once")).collect())
}

/// The best `cap` individuals under [`crowded_compare`], or all when `cap`
/// is at least the population size. Returns indices.
pub fn max_parents_cap(pop: &[Individual], cap: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    if cap >= pop.len() {
        return idx;
    }
    idx.sort_by(|&a, &b| crowded_compare(&pop[a], &pop[b]));
    idx.truncate(cap);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec())
    }

    #[test]
    fn dominance_basics() {
        assert!(!dominates(&ov(&[83.945, 26.0]), &ov(&[89.766, 23.0])).unwrap());
        assert!(!dominates(&ov(&[89.766, 23.0]), &ov(&[83.945, 26.0])).unwrap());
        assert!(dominates(&ov(&[0.5, 10.0]), &ov(&[0.6, 12.0])).unwrap());
        assert!(!dominates(&ov(&[0.5, 10.0]), &ov(&[0.5, 10.0])).unwrap());
        assert_eq!(dominates(&ov(&[1.0]), &ov(&[1.0, 2.0])), Err(EvoError::ArityMismatch(1, 2)));
    }

    #[test]
    fn identical_vectors_form_one_front() {
        let v = vec![ov(&[1.0, 1.0]); 5];
        assert_eq!(nondominated_fronts(&v).unwrap(), vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn chain_gives_singleton_fronts() {
        let v: Vec<_> = (0..5).map(|i| ov(&[i as f64, i as f64])).rev().collect();
        let fronts = nondominated_fronts(&v).unwrap();
        assert_eq!(fronts, vec![vec![4], vec![3], vec![2], vec![1], vec![0]]);
    }

    #[test]
    fn crowding_rules() {
        let two = [ov(&[0.0, 1.0]), ov(&[1.0, 0.0])];
        assert_eq!(crowding_distance(&two.iter().collect::<Vec<_>>()), vec![f64::INFINITY; 2]);
        let one = [ov(&[0.0, 1.0])];
        assert_eq!(crowding_distance(&one.iter().collect::<Vec<_>>()), vec![f64::INFINITY]);
        let three = [ov(&[0.0, 5.0]), ov(&[1.0, 5.0]), ov(&[2.0, 5.0])];
        let d = crowding_distance(&three.iter().collect::<Vec<_>>());
        assert_eq!(d[1], 1.0);
        assert!(d[0].is_infinite() && d[2].is_infinite());
    }

    #[test]
    fn crowded_compare_order() {
        let mut a = Individual::new("b", vec![0.0]);
        let mut b = Individual::new("a", vec![0.0]);
        a.rank = 1;
        b.rank = 2;
        assert_eq!(crowded_compare(&a, &b), Ordering::Less);
        b.rank = 1;
        a.crowding = f64::INFINITY;
        b.crowding = 0.3;
        assert_eq!(crowded_compare(&a, &b), Ordering::Less);
        a.crowding = 0.3;
        assert_eq!(crowded_compare(&a, &b), Ordering::Greater);
    }

    #[test]
    fn tournament_edge_cases() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(tournament_selection(&[], 3, &mut r), Err(EvoError::EmptyPopulation));
        let one = vec![Individual::new("x", vec![1.0])];
        assert_eq!(tournament_selection(&one, 4, &mut r).unwrap(), vec![0; 4]);
        let mut two = vec![Individual::new("good", vec![0.0, 0.0]), Individual::new("bad", vec![1.0, 1.0])];
        fast_nondominated_sort(&mut two).unwrap();
        // "bad" can only win when both draws pick it.
        let picks = tournament_selection(&two, 4000, &mut r).unwrap();
        let bad = picks.iter().filter(|w| **w == 1).count() as f64 / 4000.0;
        assert!((bad - 0.25).abs() < 0.03, "{bad}");
    }

    #[test]
    fn tournament_is_replayable() {
        let mut pop: Vec<Individual> =
            (0..10).map(|i| Individual::new(format!("i{i}"), vec![i as f64, (10 - i) as f64 * 0.5])).collect();
        fast_nondominated_sort(&mut pop).unwrap();
        let a = tournament_selection(&pop, 8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = tournament_selection(&pop, 8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn survivor_selection_truncates_by_crowding() {
        // Five points on one front: (0,4) (1,3) (2,2) (3,1) (4,0) plus a (2.1,2.1)
        // perturbation making (2,2) crowded.
        let pts = [[0.0, 4.0], [1.0, 3.0], [1.9, 2.1], [2.0, 2.0], [4.0, 0.0]];
        let pop: Vec<Individual> =
            pts.iter().enumerate().map(|(i, p)| Individual::new(format!("p{i}"), p.to_vec())).collect();
        let out = survivor_selection(pop, 3).unwrap();
        let mut ids: Vec<&str> = out.iter().map(|i| i.id.as_str()).collect();
        ids.sort();
        // Distances: p1 = (1.9-0)/4 + (4-2.1)/4 = 0.95, p2 = (2-1)/4+(3-2)/4 = 0.5,
        // p3 = (4-1.9)/4 + (2.1-0)/4 = 1.05.
        assert_eq!(ids, vec!["p0", "p3", "p4"]);
    }

    #[test]
    fn survivor_selection_sizes() {
        let pop: Vec<Individual> =
            (0..6).map(|i| Individual::new(format!("i{i}"), vec![i as f64, 6.0 - i as f64])).collect();
        assert_eq!(survivor_selection(pop.clone(), 6).unwrap().len(), 6);
        assert!(matches!(survivor_selection(pop, 7), Err(EvoError::InsufficientPopulation { .. })));
    }

    #[test]
    fn parent_cap() {
        let mut pop: Vec<Individual> =
            (0..100).map(|i| Individual::new(format!("i{i:03}"), vec![(i % 10) as f64, (i / 10) as f64])).collect();
        fast_nondominated_sort(&mut pop).unwrap();
        let top = max_parents_cap(&pop, 25);
        assert_eq!(top.len(), 25);
        let worst_in = top.iter().map(|i| pop[*i].rank).max().unwrap();
        let excluded_best = (0..100).filter(|i| !top.contains(i)).map(|i| pop[i].rank).min().unwrap();
        assert!(worst_in <= excluded_best);
        assert_eq!(max_parents_cap(&pop, 100).len(), 100);
        assert_eq!(max_parents_cap(&pop, 1), vec![0]);
    }
}
