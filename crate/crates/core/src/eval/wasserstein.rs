//! Exact 1-Wasserstein distance between uniform empirical measures.
//!
//! The transportation problem is solved as an integer min-cost flow: with
//! `g = gcd(n, N)` each of the `n` sources supplies `N/g` units and each of
//! the `N` sinks demands `n/g` units, so every unit carries mass `g/(nN)`.
//! Successive shortest paths with node potentials (Dijkstra, stopped at the
//! sink) give the optimum exactly up to floating-point cost sums.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{check_dim, check_finite, Error, Result};

/// Largest `n · N` accepted.
pub const MAX_TRANSPORT_ENTRIES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(i, j, mass)` for every pair carrying positive mass.
    pub entries: Vec<(usize, usize, f64)>,
    pub n_sources: usize,
    pub n_sinks: usize,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_sources];
        for &(i, _, m) in &self.entries {
            s[i] += m;
        }
        s
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_sinks];
        for &(_, j, m) in &self.entries {
            s[j] += m;
        }
        s
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn wasserstein1(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    wasserstein1_with_plan(a, b).map(|(w, _)| w)
}

pub fn wasserstein1_with_plan(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, TransportPlan)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Empty);
    }
    if n.saturating_mul(m) > MAX_TRANSPORT_ENTRIES {
        return Err(Error::TransportTooLarge { n, m });
    }
    let d = a[0].len();
    for p in a.iter().chain(b) {
        check_dim(d, p.len())?;
        check_finite(p, "point")?;
    }
    let g = gcd(n, m);
    let supply_each = (m / g) as u64;
    let demand_each = (n / g) as u64;
    let mut supply = vec![supply_each; n];
    let mut demand = vec![demand_each; m];
    let mut flow = vec![0u64; n * m];
    let costs: Vec<f64> = (0..n * m).map(|k| euclid(&a[k / m], &b[k % m])).collect();
    let cost = |i: usize, j: usize| costs[i * m + j];

    // node ids: left i → i, right j → n + j, sink → n + m
    let sink = n + m;
    let mut pot = vec![0.0f64; n + m + 1];
    let mut remaining = n as u64 * supply_each;
    let mut dist = vec![f64::INFINITY; n + m + 1];
    let mut pred = vec![usize::MAX; n + m + 1];
    let mut done = vec![false; n + m + 1];
    while remaining > 0 {
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        done.fill(false);
        let mut heap = BinaryHeap::new();
        for i in 0..n {
            if supply[i] > 0 {
                // reduced cost of the zero-cost source arc
                dist[i] = (-pot[i]).max(0.0);
                heap.push(Entry(dist[i], i));
            }
        }
        let mut reached = None;
        while let Some(Entry(du, u)) = heap.pop() {
            if done[u] || du > dist[u] {
                continue;
            }
            done[u] = true;
            if u == sink {
                reached = Some(du);
                break;
            }
            let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<Entry>| {
                let nd = du + (w + pot[u] - pot[v]).max(0.0);
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = u;
                    heap.push(Entry(nd, v));
                }
            };
            if u < n {
                for j in 0..m {
                    if !done[n + j] {
                        relax(n + j, cost(u, j), &mut heap);
                    }
                }
            } else {
                let j = u - n;
                if demand[j] > 0 {
                    relax(sink, 0.0, &mut heap);
                }
                for i in 0..n {
                    if flow[i * m + j] > 0 && !done[i] {
                        relax(i, -cost(i, j), &mut heap);
                    }
                }
            }
        }
        let dt = reached.ok_or(Error::NoFiniteObjective)?;
        for v in 0..=sink {
            pot[v] += dist[v].min(dt);
        }
        // walk back from the sink
        let last = pred[sink];
        let mut bottleneck = demand[last - n];
        let mut v = last;
        while pred[v] != usize::MAX {
            let u = pred[v];
            if u >= n {
                // backward arc right u → left v
                bottleneck = bottleneck.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        bottleneck = bottleneck.min(supply[v]);
        supply[v] -= bottleneck;
        demand[last - n] -= bottleneck;
        let mut v = last;
        while pred[v] != usize::MAX {
            let u = pred[v];
            if u < n {
                flow[u * m + (v - n)] += bottleneck;
            } else {
                flow[v * m + (u - n)] -= bottleneck;
            }
            v = u;
        }
        remaining -= bottleneck;
    }

    let total_units = (n as u64 * supply_each) as f64;
    let mut entries = Vec::new();
    let mut w = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0 {
                w += f as f64 * cost(i, j);
                entries.push((i, j, f as f64 / total_units));
            }
        }
    }
    Ok((
        w / total_units,
        TransportPlan {
            entries,
            n_sources: n,
            n_sinks: m,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    /// `∫ |F_a⁻¹(u) − F_b⁻¹(u)| du` by merging the two step quantile functions.
    pub(crate) fn quantile_oracle(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (n, m) = (a.len(), b.len());
        let (mut i, mut j) = (0, 0);
        let mut u = 0.0;
        let mut total = 0.0;
        while i < n && j < m {
            let next_a = (i + 1) as f64 / n as f64;
            let next_b = (j + 1) as f64 / m as f64;
            let next = next_a.min(next_b);
            total += (next - u) * (a[i] - b[j]).abs();
            u = next;
            if next_a <= next {
                i += 1;
            }
            if next_b <= next {
                j += 1;
            }
        }
        total
    }

    #[test]
    fn small_examples() {
        let s = line(&[0.3, -1.0, 2.0]);
        assert_eq!(wasserstein1(&s, &s).unwrap(), 0.0);
        assert_eq!(wasserstein1(&line(&[0.0]), &line(&[1.0])).unwrap(), 1.0);
        assert!((wasserstein1(&line(&[0.0, 1.0]), &line(&[0.0, 2.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(wasserstein1(&[], &s), Err(Error::Empty)));
    }

    #[test]
    fn size_guard() {
        let a = vec![vec![0.0]; 4000];
        let b = vec![vec![0.0]; 3000];
        assert!(matches!(wasserstein1(&a, &b), Err(Error::TransportTooLarge { .. })));
    }

    #[test]
    fn matches_quantile_coupling_in_1d() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.random_range(1..40);
            let m = rng.random_range(1..60);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..4.0)).collect();
            let w = wasserstein1(&line(&a), &line(&b)).unwrap();
            let o = quantile_oracle(&a, &b);
            assert!((w - o).abs() <= 1e-9, "{w} vs {o} ({n}, {m})");
        }
    }

    #[test]
    fn plan_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random(), rng.random()]).collect();
        let b: Vec<Vec<f64>> = (0..18).map(|_| vec![rng.random(), rng.random()]).collect();
        let (w, plan) = wasserstein1_with_plan(&a, &b).unwrap();
        for r in plan.row_sums() {
            assert!((r - 1.0 / 12.0).abs() < 1e-10);
        }
        for c in plan.column_sums() {
            assert!((c - 1.0 / 18.0).abs() < 1e-10);
        }
        let cost: f64 = plan.entries.iter().map(|&(i, j, m)| m * euclid(&a[i], &b[j])).sum();
        assert!((cost - w).abs() < 1e-12);
    }

    #[test]
    fn brute_force_permutations_for_equal_sizes() {
        // with equal sizes an optimal plan is a permutation
        fn permutations(k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(k - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, k - 1);
                    out.push(q);
                }
            }
            out
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random(), rng.random()]).collect();
            let b: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random(), rng.random()]).collect();
            let best = permutations(6)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| euclid(&a[i], &b[j])).sum::<f64>() / 6.0)
                .fold(f64::INFINITY, f64::min);
            let w = wasserstein1(&a, &b).unwrap();
            assert!((w - best).abs() < 1e-12, "{w} vs {best}");
        }
    }

    fn cloud(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 2), 1..max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn metric_axioms(a in cloud(9), b in cloud(9), c in cloud(9)) {
            let ab = wasserstein1(&a, &b).unwrap();
            let ba = wasserstein1(&b, &a).unwrap();
            let bc = wasserstein1(&b, &c).unwrap();
            let ac = wasserstein1(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(ab >= 0.0);
            let mut shuffled = a.clone();
            shuffled.reverse();
            prop_assert!(wasserstein1(&a, &shuffled).unwrap() <= 1e-12);
        }
    }
}
