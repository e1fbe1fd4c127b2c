//! Finite Markov chains induced on an invariant set, and their closed classes.

use super::DynamicsError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One generator acting on the states: `targets[s]` is the image of state `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMap {
    pub label: usize,
    pub prob: f64,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledChain {
    pub n_states: usize,
    pub maps: Vec<LabeledMap>,
}

/// A closed communicating class with its cyclic structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainClass {
    pub states: Vec<usize>,
    pub period: usize,
    /// `K_1, …, K_p`; `K_1` holds the smallest state and `K_{k+1}` is the image of `K_k`.
    pub cyclic_classes: Vec<Vec<usize>>,
    /// Stationary law restricted to each `K_k` and renormalized, in the state order of `K_k`.
    pub cyclic_measures: Vec<Vec<f64>>,
    /// Stationary law of the class, in the order of `states`.
    pub stationary: Vec<f64>,
}

impl LabeledChain {
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n_states, self.n_states);
        for m in &self.maps {
            for (s, &t) in m.targets.iter().enumerate() {
                p[(s, t)] += m.prob;
            }
        }
        p
    }

    fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut a = vec![vec![false; self.n_states]; self.n_states];
        for m in self.maps.iter().filter(|m| m.prob > 0.0) {
            for (s, &t) in m.targets.iter().enumerate() {
                a[s][t] = true;
            }
        }
        a
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Closed communicating classes of the chain, ordered by smallest state.
pub fn closed_classes(chain: &LabeledChain) -> Result<Vec<ChainClass>, DynamicsError> {
    let n = chain.n_states;
    if n == 0 {
        return Err(DynamicsError::NoFiniteInvariantSet);
    }
    let adj = chain.adjacency();
    // reflexive-transitive closure
    let mut reach = adj.clone();
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let via = reach[k].clone();
                for (r, v) in reach[i].iter_mut().zip(via) {
                    *r |= v;
                }
            }
        }
    }

    let mut seen = vec![false; n];
    let mut classes = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let closed = (0..n).all(|j| !reach[i][j] || reach[j][i]);
        let members: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &members {
            seen[j] = true;
        }
        if closed {
            classes.push(decompose_class(chain, &adj, members)?);
        }
    }
    Ok(classes)
}

fn decompose_class(chain: &LabeledChain, adj: &[Vec<bool>], states: Vec<usize>) -> Result<ChainClass, DynamicsError> {
    let n = chain.n_states;
    let mut level: Vec<Option<usize>> = vec![None; n];
    let base = states[0];
    level[base] = Some(0);
    let mut queue = std::collections::VecDeque::from([base]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if adj[u][v] && level[v].is_none() {
                level[v] = Some(level[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    let mut period = 0;
    for &u in &states {
        for &v in &states {
            if adj[u][v] {
                let (lu, lv) = (level[u].unwrap() as i64, level[v].unwrap() as i64);
                period = gcd(period, (lu + 1 - lv).unsigned_abs() as usize);
            }
        }
    }
    let period = period.max(1);
    let cyclic_classes: Vec<Vec<usize>> =
        (0..period).map(|r| states.iter().copied().filter(|&s| level[s].unwrap() % period == r).collect()).collect();

    let stationary = stationary_on(chain, &states)?;
    let cyclic_measures = cyclic_classes
        .iter()
        .map(|k| {
            let w: Vec<f64> = k.iter().map(|s| stationary[states.iter().position(|t| t == s).unwrap()]).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    Ok(ChainClass { states, period, cyclic_classes, cyclic_measures, stationary })
}

/// Solves `π P = π`, `Σ π = 1` on a closed irreducible set of states.
fn stationary_on(chain: &LabeledChain, states: &[usize]) -> Result<Vec<f64>, DynamicsError> {
    let k = states.len();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let full = chain.transition_matrix();
    let mut a = DMatrix::zeros(k, k);
    for (i, &si) in states.iter().enumerate() {
        for (j, &sj) in states.iter().enumerate() {
            // row j of (Pᵀ − I)
            a[(j, i)] = full[(si, sj)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..k {
        a[(k - 1, i)] = 1.0;
    }
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or(DynamicsError::SingularChain)?;
    Ok(pi.iter().map(|&x| x.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, maps: &[(&[usize], f64)]) -> LabeledChain {
        LabeledChain {
            n_states: n,
            maps: maps.iter().enumerate().map(|(l, (t, p))| LabeledMap { label: l, prob: *p, targets: t.to_vec() }).collect(),
        }
    }

    #[test]
    fn transient_state_is_dropped() {
        // 0 fixed, 1 -> 0, 2 fixed
        let c = chain(3, &[(&[0, 0, 2], 1.0)]);
        let classes = closed_classes(&c).unwrap();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].states, vec![0]);
        assert_eq!(classes[1].states, vec![2]);
    }

    #[test]
    fn rotation_by_one_has_full_period() {
        let c = chain(4, &[(&[1, 2, 3, 0], 1.0)]);
        let cls = &closed_classes(&c).unwrap()[0];
        assert_eq!(cls.period, 4);
        assert_eq!(cls.cyclic_classes, vec![vec![0], vec![1], vec![2], vec![3]]);
        for w in &cls.stationary {
            assert!((w - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_is_fixed_by_the_matrix() {
        let c = chain(5, &[(&[1, 2, 0, 4, 3], 0.3), (&[2, 2, 1, 0, 0], 0.5), (&[0, 0, 0, 0, 0], 0.2)]);
        let p = c.transition_matrix();
        for cls in closed_classes(&c).unwrap() {
            let mut pi = DVector::zeros(5);
            for (i, &s) in cls.states.iter().enumerate() {
                pi[s] = cls.stationary[i];
            }
            let next = p.transpose() * &pi;
            assert!((next - &pi).norm() < 1e-12);
            assert!((pi.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_classes_map_forward() {
        // period 2: {0,1} <-> {2}
        let c = chain(3, &[(&[2, 2, 0], 0.5), (&[2, 2, 1], 0.5)]);
        let cls = &closed_classes(&c).unwrap()[0];
        assert_eq!(cls.period, 2);
        assert_eq!(cls.cyclic_classes[0], vec![0, 1]);
        assert_eq!(cls.cyclic_classes[1], vec![2]);
        assert!((cls.cyclic_measures[0][0] - 0.5).abs() < 1e-12);
        assert!((cls.cyclic_measures[1][0] - 1.0).abs() < 1e-12);
    }
}
