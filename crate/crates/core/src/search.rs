//! Sphere-decoding tree searches over the triangular system `v = R·d + w`.
//!
//! The tree is built from the last row of `R` (root, symbol `d_{N_t}`) to the
//! first row (leaves, symbol `d_1`). Both searches return every surviving leaf
//! with its distance `‖v − R·d‖²`, together with a log-domain accumulator of
//! the mass `Σ exp(−c)·M_c^{N_t−k}` of all branches cut at depth `k` with cost
//! `c`, and an exact count of the nodes whose cost was evaluated.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{back_substitute, CMatrix};
use crate::logspace::LogSumExp;
use crate::model::{ChannelInstance, Constellation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Fixed-radius depth-first search.
    Dfs,
    /// Breadth-first K-best search.
    Bfs,
}

/// A leaf: symbol indices (in factor order) and its distance `‖v − R·d‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub indices: Vec<usize>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Sorted by distance, ties by lexicographic symbol indices.
    pub candidates: Vec<Candidate>,
    /// `ln` of the pruned-branch mass; `-inf` when nothing was pruned.
    pub log_pruned_mass: f64,
    pub visited_nodes: u64,
    /// `ζ²`; infinite for BFS.
    pub radius_sq: f64,
    pub mode: SearchMode,
    pub n_t: usize,
    pub m_c: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn pruned_mass(&self) -> f64 {
        self.log_pruned_mass.exp()
    }

    /// `M_c^{N_t}` as a float (exact up to 2^53).
    pub fn total_components(&self) -> f64 {
        (self.m_c as f64).powi(self.n_t as i32)
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.candidates.iter().map(|c| c.distance)
    }
}

/// Interference-cancelled residual of `row`: `v_row − Σ_{j≥row} r_{row,j}·a[s_j]`.
/// Every distance in the crate goes through this routine so that partial and
/// full path costs agree bit for bit.
#[inline]
fn residual(r: &CMatrix, v: &[Complex64], alphabet: &[Complex64], sym: &[usize], row: usize) -> Complex64 {
    let mut acc = v[row];
    let rr = r.row(row);
    for j in row..v.len() {
        acc -= rr[j] * alphabet[sym[j]];
    }
    acc
}

/// One step of the cost recursion at depth `k` (1-based).
///
/// `d` is indexed by row; only entries `N_t−k ..` (0-based) are read. The new
/// symbol's own diagonal term is included.
pub fn cost_step(c_prev: f64, v: &[Complex64], r: &CMatrix, k: usize, d: &[Complex64]) -> f64 {
    let n = v.len();
    assert!(k >= 1 && k <= n, "depth {k} out of range 1..={n}");
    let row = n - k;
    let mut acc = v[row];
    let rr = r.row(row);
    for j in row..n {
        acc -= rr[j] * d[j];
    }
    c_prev + acc.norm_sqr()
}

/// `‖v − R·d‖²` accumulated root-to-leaf exactly as the searches do.
pub fn path_cost(v: &[Complex64], r: &CMatrix, alphabet: &[Complex64], indices: &[usize]) -> f64 {
    let mut c = 0.0;
    for row in (0..v.len()).rev() {
        c += residual(r, v, alphabet, indices, row).norm_sqr();
    }
    c
}

/// Zero-forcing anchor in the rotated domain: `R⁻¹·v` quantized per coordinate.
pub fn zf_anchor(v: &[Complex64], r: &CMatrix, alphabet: &[Complex64]) -> Vec<usize> {
    back_substitute(r, v)
        .into_iter()
        .map(|x| Constellation::nearest(alphabet, x))
        .collect()
}

/// Babai / zero-forcing estimate `d₀`: `H†·z` quantized per coordinate to the
/// `√ρ`-scaled constellation. Indices are returned in the channel's factor order.
/// Channels are full rank by construction, so the triangular solve is well posed.
pub fn babai_anchor(
    channel: &ChannelInstance,
    z: &[Complex64],
    constellation: &Constellation,
    rho: f64,
) -> Result<Vec<usize>> {
    let n = channel.n_t();
    if z.len() != n {
        return Err(Error::invalid("received vector length does not match channel"));
    }
    let v = channel.rotate(z);
    Ok(zf_anchor(&v, channel.r(), &constellation.scaled(rho)))
}

fn cmp_candidates(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.distance.total_cmp(&b.distance).then_with(|| a.indices.cmp(&b.indices))
}

/// Fixed-radius depth-first search: every leaf with `‖v − R·d‖² ≤ ζ²`.
///
/// The radius is never shrunk. Iterative, so deep trees do not grow the call stack.
pub fn dfs_search(v: &[Complex64], r: &CMatrix, zeta_sq: f64, alphabet: &[Complex64]) -> CandidateSet {
    let n = v.len();
    let m = alphabet.len();
    let ln_m = (m as f64).ln();
    let mut sym = vec![0usize; n];
    let mut next = vec![0usize; n];
    let mut cost = vec![0.0f64; n + 1];
    let mut candidates = Vec::new();
    let mut pruned = LogSumExp::new();
    let mut visited = 0u64;

    // `level` = number of symbols already fixed; the row being assigned is n-1-level.
    let mut level = 0usize;
    if n > 0 {
        loop {
            if next[level] == m {
                if level == 0 {
                    break;
                }
                level -= 1;
                continue;
            }
            let s = next[level];
            next[level] += 1;
            let row = n - 1 - level;
            sym[row] = s;
            let c = cost[level] + residual(r, v, alphabet, &sym, row).norm_sqr();
            visited += 1;
            if c <= zeta_sq {
                if level + 1 == n {
                    candidates.push(Candidate {
                        indices: sym.clone(),
                        distance: c,
                    });
                } else {
                    cost[level + 1] = c;
                    level += 1;
                    next[level] = 0;
                }
            } else {
                let below = (n - level - 1) as f64;
                pruned.add(-c + below * ln_m);
            }
        }
    }
    candidates.sort_by(cmp_candidates);
    CandidateSet {
        candidates,
        log_pruned_mass: pruned.value(),
        visited_nodes: visited,
        radius_sq: zeta_sq,
        mode: SearchMode::Dfs,
        n_t: n,
        m_c: m,
    }
}

struct Partial {
    sym: Vec<usize>,
    cost: f64,
}

/// Compares partial paths by cost, then by symbol indices read from the root.
fn cmp_partial(a: &Partial, b: &Partial, from_row: usize) -> std::cmp::Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then_with(|| a.sym[from_row..].iter().rev().cmp(b.sym[from_row..].iter().rev()))
}

/// Breadth-first K-best search.
///
/// Each depth expands every survivor into `M_c` children and keeps the `K`
/// cheapest; at the leaf depth all expanded children are returned.
pub fn bfs_search(v: &[Complex64], r: &CMatrix, k: usize, alphabet: &[Complex64]) -> CandidateSet {
    assert!(k >= 1, "K must be at least 1");
    let n = v.len();
    let m = alphabet.len();
    let ln_m = (m as f64).ln();
    let mut survivors = vec![Partial {
        sym: vec![0; n],
        cost: 0.0,
    }];
    let mut pruned = LogSumExp::new();
    let mut visited = 0u64;

    for depth in 1..=n {
        let row = n - depth;
        let mut children = Vec::with_capacity(survivors.len() * m);
        for parent in &survivors {
            for s in 0..m {
                let mut sym = parent.sym.clone();
                sym[row] = s;
                let cost = parent.cost + residual(r, v, alphabet, &sym, row).norm_sqr();
                children.push(Partial { sym, cost });
            }
        }
        visited += children.len() as u64;
        children.sort_by(|a, b| cmp_partial(a, b, row));
        if depth < n && children.len() > k {
            let below = (n - depth) as f64 * ln_m;
            for cut in &children[k..] {
                pruned.add(-cut.cost + below);
            }
            children.truncate(k);
        }
        survivors = children;
    }

    let mut candidates: Vec<Candidate> = survivors
        .into_iter()
        .map(|p| Candidate {
            indices: p.sym,
            distance: p.cost,
        })
        .collect();
    candidates.sort_by(cmp_candidates);
    CandidateSet {
        candidates,
        log_pruned_mass: pruned.value(),
        visited_nodes: visited,
        radius_sq: f64::INFINITY,
        mode: SearchMode::Bfs,
        n_t: n,
        m_c: m,
    }
}

/// `Σ_{k=1}^{n} m^k`, saturating.
pub fn full_tree_nodes(m_c: usize, n_t: usize) -> u128 {
    let m = m_c as u128;
    let mut total = 0u128;
    let mut level = 1u128;
    for _ in 0..n_t {
        level = level.saturating_mul(m);
        total = total.saturating_add(level);
    }
    total
}

/// `max{k : M_c^{k−1} < K}` restricted to `0..=n_t` (0 when `K = 1`).
fn k0_for(k: u128, m_c: u128, n_t: usize) -> usize {
    let mut k0 = 0;
    let mut pow = 1u128; // m^{kk-1}
    for kk in 1..=n_t {
        if pow < k {
            k0 = kk;
        } else {
            break;
        }
        pow = pow.saturating_mul(m_c);
    }
    k0
}

/// Nodes visited by the K-best search:
/// `M_c(1 − M_c^{k₀})/(1 − M_c) + (N_t − k₀)·M_c·K` with `k₀ = max{k : M_c^{k−1} < K}`.
pub fn complexity_c(k: usize, m_c: usize, n_t: usize) -> u128 {
    assert!(k >= 1 && m_c >= 2);
    let (k, m) = (k as u128, m_c as u128);
    let k0 = k0_for(k, m, n_t);
    full_tree_nodes(m_c, k0).saturating_add(((n_t - k0) as u128).saturating_mul(m).saturating_mul(k))
}

/// Largest `K` whose K-best complexity fits the node budget `C₀`.
///
/// Evaluates `⌊(C₀/M_c − (M_c^{k₀} − 1)/(M_c − 1)) / (N_t − k₀)⌋` for each
/// candidate `k₀` and keeps the largest result that is consistent with its own `k₀`.
pub fn k_for_budget(c0: u128, m_c: usize, n_t: usize) -> Result<usize> {
    if m_c < 2 || n_t == 0 {
        return Err(Error::invalid("k_for_budget needs M_c >= 2 and N_t >= 1"));
    }
    let minimum = complexity_c(1, m_c, n_t);
    if c0 < minimum {
        return Err(Error::invalid(format!(
            "node budget {c0} is below the minimum K-best complexity {minimum}"
        )));
    }
    let m = m_c as u128;
    let full_width = m.saturating_pow((n_t - 1) as u32);
    if c0 >= full_tree_nodes(m_c, n_t) {
        return usize::try_from(full_width).map_err(|_| Error::invalid("K does not fit in usize"));
    }
    let mut best: Option<u128> = None;
    for k0 in 0..n_t {
        let head = full_tree_nodes(m_c, k0); // M_c·(M_c^{k0} − 1)/(M_c − 1)
        if c0 < head {
            break;
        }
        let k = (c0 - head) / (m * (n_t - k0) as u128);
        if k == 0 || k0_for(k, m, n_t) != k0 {
            continue;
        }
        best = Some(best.map_or(k, |b| b.max(k)));
    }
    let k = best.ok_or_else(|| Error::invalid(format!("no consistent K for budget {c0}")))?;
    usize::try_from(k).map_err(|_| Error::invalid("K does not fit in usize"))
}

/// A tree-search strategy over the triangular system.
pub trait TreeSearch: Send + Sync + fmt::Debug {
    /// Registry name (`dfs`, `bfs`).
    fn name(&self) -> &'static str;

    /// Parameter echo for reports, e.g. `alpha=1.5`.
    fn params(&self) -> String;

    fn mode(&self) -> SearchMode;

    /// Runs the search. `anchor` is the zero-forcing estimate in factor order.
    fn search(&self, v: &[Complex64], r: &CMatrix, alphabet: &[Complex64], anchor: &[usize]) -> CandidateSet;
}

/// DFS with `ζ² = α·‖v − R·d₀‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthFirst {
    pub alpha: f64,
}

impl DepthFirst {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0) {
            return Err(Error::invalid(format!("alpha must be >= 1, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn radius_sq(&self, v: &[Complex64], r: &CMatrix, alphabet: &[Complex64], anchor: &[usize]) -> f64 {
        if self.alpha.is_infinite() {
            f64::INFINITY
        } else {
            self.alpha * path_cost(v, r, alphabet, anchor)
        }
    }
}

impl TreeSearch for DepthFirst {
    fn name(&self) -> &'static str {
        "dfs"
    }

    fn params(&self) -> String {
        if self.alpha.is_infinite() {
            "alpha=inf".into()
        } else {
            format!("alpha={}", self.alpha)
        }
    }

    fn mode(&self) -> SearchMode {
        SearchMode::Dfs
    }

    fn search(&self, v: &[Complex64], r: &CMatrix, alphabet: &[Complex64], anchor: &[usize]) -> CandidateSet {
        let zeta_sq = self.radius_sq(v, r, alphabet, anchor);
        dfs_search(v, r, zeta_sq, alphabet)
    }
}

/// K-best BFS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KBest {
    pub k: usize,
}

impl KBest {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        Ok(Self { k })
    }
}

impl TreeSearch for KBest {
    fn name(&self) -> &'static str {
        "bfs"
    }

    fn params(&self) -> String {
        format!("K={}", self.k)
    }

    fn mode(&self) -> SearchMode {
        SearchMode::Bfs
    }

    fn search(&self, v: &[Complex64], r: &CMatrix, alphabet: &[Complex64], _anchor: &[usize]) -> CandidateSet {
        bfs_search(v, r, self.k, alphabet)
    }
}

/// Declarative search choice; `BfsBudget` resolves `K` from a node budget
/// once the tree shape is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchSpec {
    Dfs { alpha: f64 },
    Bfs { k: usize },
    BfsBudget { budget: u128 },
}

impl SearchSpec {
    pub fn build(&self, m_c: usize, n_t: usize) -> Result<Box<dyn TreeSearch>> {
        Ok(match *self {
            SearchSpec::Dfs { alpha } => Box::new(DepthFirst::new(alpha)?),
            SearchSpec::Bfs { k } => Box::new(KBest::new(k)?),
            SearchSpec::BfsBudget { budget } => Box::new(KBest::new(k_for_budget(budget, m_c, n_t)?)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fir_channel, make_constellation, ConstellationKind};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn cost_step_first_depth_diagonal() {
        let r = CMatrix::from_diagonal(&[c(2.0), c(3.0)]);
        let v = [c(0.5), c(1.0)];
        let d = [c(0.0), c(-1.0)];
        let got = cost_step(0.0, &v, &r, 1, &d);
        assert!((got - (1.0f64 + 3.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn full_path_cost_matches_direct_norm() {
        let ch = fir_channel(&[1.0, 0.4, -0.3], 5).unwrap();
        let alphabet = make_constellation(ConstellationKind::Qam, 4).unwrap().scaled(2.0);
        let v: Vec<Complex64> = (0..5).map(|i| Complex64::new(0.3 * i as f64, -0.1)).collect();
        let idx = vec![0, 3, 1, 2, 1];
        let d: Vec<Complex64> = idx.iter().map(|&i| alphabet[i]).collect();
        let mut c = 0.0;
        for k in 1..=5 {
            c = cost_step(c, &v, ch.r(), k, &d);
        }
        let rd = ch.r().mul_vec(&d);
        let direct: f64 = v.iter().zip(&rd).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!((c - direct).abs() < 1e-10);
        assert_eq!(c, path_cost(&v, ch.r(), &alphabet, &idx));
    }

    #[test]
    fn noiseless_exact_input_costs_zero() {
        let r = CMatrix::identity(3);
        let alphabet = [c(-1.0), c(1.0)];
        let idx = [1, 0, 1];
        let v: Vec<Complex64> = idx.iter().map(|&i| alphabet[i]).collect();
        assert_eq!(path_cost(&v, &r, &alphabet, &idx), 0.0);
    }

    #[test]
    fn infinite_radius_visits_full_binary_tree() {
        let r = CMatrix::identity(3);
        let v = [c(0.1), c(-0.2), c(0.3)];
        let cs = dfs_search(&v, &r, f64::INFINITY, &[c(-1.0), c(1.0)]);
        assert_eq!(cs.len(), 8);
        assert_eq!(cs.visited_nodes, 14);
        assert_eq!(cs.log_pruned_mass, f64::NEG_INFINITY);
        assert!(cs.candidates.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn unit_alpha_keeps_anchor() {
        let ch = fir_channel(&[1.0, 0.6], 4).unwrap();
        let alphabet = [c(-1.0), c(1.0)];
        let v = [c(0.2), c(-1.3), c(0.05), c(0.9)];
        let anchor = zf_anchor(&v, ch.r(), &alphabet);
        let cs = DepthFirst::new(1.0).unwrap().search(&v, ch.r(), &alphabet, &anchor);
        assert!(cs.candidates.iter().any(|cand| cand.indices == anchor));
    }

    #[test]
    fn babai_on_identity() {
        let ch = fir_channel(&[1.0], 3).unwrap();
        let bin = make_constellation(ConstellationKind::Binary, 2).unwrap();
        let rho = 4.0;
        let z = [c(2.0), c(-2.0), c(0.1)];
        assert_eq!(babai_anchor(&ch, &z, &bin, rho).unwrap(), vec![1, 0, 1]);
        // ρ = 0 collapses the alphabet; ties go to the first point
        assert_eq!(babai_anchor(&ch, &z, &bin, 0.0).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn full_width_bfs_equals_full_dfs() {
        let ch = fir_channel(&[1.0, 0.5, 0.25], 4).unwrap();
        let alphabet = [c(-1.0), c(1.0)];
        let v = [c(0.3), c(-0.7), c(1.1), c(0.2)];
        let bfs = bfs_search(&v, ch.r(), 8, &alphabet);
        let dfs = dfs_search(&v, ch.r(), f64::INFINITY, &alphabet);
        assert_eq!(bfs.len(), 16);
        assert_eq!(bfs.candidates, dfs.candidates);
        assert_eq!(bfs.visited_nodes, dfs.visited_nodes);
        assert_eq!(bfs.log_pruned_mass, f64::NEG_INFINITY);
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(complexity_c(usize::MAX, 2, 11), 4094);
        assert_eq!(full_tree_nodes(2, 11), 4094);
        assert_eq!(complexity_c(50, 2, 11), 626);
        assert_eq!(complexity_c(1, 2, 3), 6);
    }

    #[test]
    fn k_for_budget_examples() {
        assert_eq!(k_for_budget(626, 2, 11).unwrap(), 50);
        let full = full_tree_nodes(2, 11);
        assert!(k_for_budget(full, 2, 11).unwrap() >= 1 << 10);
        assert!(matches!(k_for_budget(5, 2, 3), Err(Error::InvalidArgument(_))));
        assert_eq!(k_for_budget(6, 2, 3).unwrap(), 1);
    }

    #[test]
    fn search_spec_builds_strategies() {
        let s = SearchSpec::BfsBudget { budget: 626 }.build(2, 11).unwrap();
        assert_eq!(s.params(), "K=50");
        assert_eq!(SearchSpec::Dfs { alpha: 1.5 }.build(2, 11).unwrap().name(), "dfs");
        assert!(SearchSpec::Dfs { alpha: 0.5 }.build(2, 3).is_err());
        assert!(SearchSpec::Bfs { k: 0 }.build(2, 3).is_err());
    }
}
