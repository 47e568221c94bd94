//! Density bounds from candidate sets, the Monte-Carlo entropy driver, the
//! exhaustive truth oracle, and the trivial Gaussian / source-entropy bounds.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianPD};
use crate::logspace::{log_add_exp, pairwise_sum, LogSumExp};
use crate::model::{synthesize, ChannelInstance, Constellation, InputVector};
use crate::rng;
use crate::search::{zf_anchor, CandidateSet, SearchMode, TreeSearch};

/// Default cap on the number of mixture components the exhaustive oracle enumerates.
pub const DEFAULT_ORACLE_CAP: u64 = 1 << 20;

/// `N_t·log₂(πe)`, the entropy of `CN(0, I)` noise.
pub fn noise_entropy_bits(n_t: usize) -> f64 {
    n_t as f64 * (PI * std::f64::consts::E).log2()
}

/// `ln((πM_c)^{−N_t})`, the log prior-times-normalizer shared by every component.
pub fn log_component_scale(m_c: usize, n_t: usize) -> f64 {
    -(n_t as f64) * (PI * m_c as f64).ln()
}

/// Natural-log density values derived from one candidate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensityTriple {
    /// Sum over the found components only (a lower bound on the density).
    pub log_f_lower: f64,
    /// Found components plus `(M_c^{N_t} − |found|)·exp(−ζ²)` for the rest. DFS only.
    pub log_f_upper_tail: Option<f64>,
    /// Found components plus the pruned-branch mass.
    pub log_f_upper_pruned: f64,
}

/// `ln(M_c^{N_t} − found)` without forming the power when it exceeds 2^53.
fn log_missing_count(m_c: usize, n_t: usize, found: usize) -> f64 {
    let log_total = n_t as f64 * (m_c as f64).ln();
    let total = log_total.exp();
    if total < 9.0e15 {
        let missing = total.round() - found as f64;
        if missing <= 0.0 {
            f64::NEG_INFINITY
        } else {
            missing.ln()
        }
    } else {
        log_total + (-(found as f64) / total).ln_1p()
    }
}

pub fn log_density_bounds(cs: &CandidateSet) -> LogDensityTriple {
    let scale = log_component_scale(cs.m_c, cs.n_t);
    let mut found = LogSumExp::new();
    for c in &cs.candidates {
        found.add(-c.distance);
    }
    let found = found.value();
    let log_f_lower = scale + found;
    let log_f_upper_pruned = scale + log_add_exp(found, cs.log_pruned_mass);
    let log_f_upper_tail = match cs.mode {
        SearchMode::Dfs => {
            let tail = log_missing_count(cs.m_c, cs.n_t, cs.len()) - cs.radius_sq;
            Some(scale + log_add_exp(found, if tail.is_nan() { f64::NEG_INFINITY } else { tail }))
        }
        SearchMode::Bfs => None,
    };
    LogDensityTriple {
        log_f_lower,
        log_f_upper_tail,
        log_f_upper_pruned,
    }
}

/// Sample mean and standard error of per-trial `−log₂ f` values.
///
/// Trials whose density is zero (`+∞` here) are sentinels: they are counted
/// and excluded from the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMean {
    pub mean: f64,
    pub stderr: f64,
    pub n_used: usize,
    pub n_sentinels: usize,
}

impl SampleMean {
    /// Independent values.
    pub fn from_values(values: &[f64]) -> Self {
        Self::from_grouped(values, 1)
    }

    /// Values laid out in consecutive runs of `group` that share an input
    /// draw. Trials within a run are correlated, so the standard error is
    /// taken from the run means.
    pub fn from_grouped(values: &[f64], group: usize) -> Self {
        let group = group.max(1);
        let used: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n_sentinels = values.len() - used.len();
        let n = used.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n_used: 0,
                n_sentinels,
            };
        }
        let mean = pairwise_sum(&used) / n as f64;
        let run_means: Vec<f64> = values
            .chunks(group)
            .filter_map(|run| {
                let finite: Vec<f64> = run.iter().copied().filter(|v| v.is_finite()).collect();
                (!finite.is_empty()).then(|| pairwise_sum(&finite) / finite.len() as f64)
            })
            .collect();
        let k = run_means.len();
        let stderr = if k > 1 {
            let centre = pairwise_sum(&run_means) / k as f64;
            let sq: Vec<f64> = run_means.iter().map(|v| (v - centre) * (v - centre)).collect();
            (pairwise_sum(&sq) / (k - 1) as f64 / k as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            n_used: n,
            n_sentinels,
        }
    }

    /// Mean of `−log₂ f` for natural-log densities, grouped as in [`SampleMean::from_grouped`].
    pub fn from_log_densities(log_f: impl Iterator<Item = f64>, group: usize) -> Self {
        let bits: Vec<f64> = log_f.map(|l| -l / LN_2).collect();
        Self::from_grouped(&bits, group)
    }
}

/// Monte-Carlo entropy bounds from one search configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    pub n_t: usize,
    /// From the found-only density.
    pub h_up: SampleMean,
    /// From the tail-completed density (DFS only).
    pub h_lo: Option<SampleMean>,
    /// From the pruned-mass-completed density.
    pub h_lo_plus: SampleMean,
    pub n_samples: usize,
    pub mean_visited_nodes: f64,
    /// Trials whose search returned no candidate.
    pub n_empty: usize,
}

impl EntropyEstimate {
    pub fn mi_up(&self) -> f64 {
        self.h_up.mean - noise_entropy_bits(self.n_t)
    }

    pub fn mi_lo(&self) -> Option<f64> {
        self.h_lo.map(|h| h.mean - noise_entropy_bits(self.n_t))
    }

    pub fn mi_lo_plus(&self) -> f64 {
        self.h_lo_plus.mean - noise_entropy_bits(self.n_t)
    }
}

/// A single-valued entropy approximation (exact oracle, SDEA, SA, HD1).
#[derive(Debug, Clone, PartialEq)]
pub struct Approximation {
    pub n_t: usize,
    pub h: SampleMean,
    pub n_samples: usize,
    pub mean_visited_nodes: f64,
    /// Trials that needed a fallback (e.g. empty candidate set in SDEA).
    pub n_fallbacks: usize,
}

impl Approximation {
    pub fn mi(&self) -> f64 {
        self.h.mean - noise_entropy_bits(self.n_t)
    }

    pub(crate) fn from_log_densities(n_t: usize, log_f: &[f64], group: usize, visited: &[u64], n_fallbacks: usize) -> Self {
        Self {
            n_t,
            h: SampleMean::from_log_densities(log_f.iter().copied(), group),
            n_samples: log_f.len(),
            mean_visited_nodes: mean_count(visited),
            n_fallbacks,
        }
    }
}

pub(crate) fn mean_count(v: &[u64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let f: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    pairwise_sum(&f) / v.len() as f64
}

/// One Monte-Carlo trial: input draw `i`, noise draw `j`.
#[derive(Debug, Clone)]
pub struct Trial {
    pub i: usize,
    pub j: usize,
    pub input: InputVector,
    pub z: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

/// `N_d` input draws times `N_n` noise draws, each trial on its own random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub n_d: usize,
    pub n_n: usize,
    pub seed: u64,
}

impl MonteCarlo {
    pub fn new(n_d: usize, n_n: usize, seed: u64) -> Result<Self> {
        if n_d == 0 || n_n == 0 {
            return Err(Error::invalid("N_d and N_n must be at least 1"));
        }
        Ok(Self { n_d, n_n, seed })
    }

    pub fn n_samples(&self) -> usize {
        self.n_d * self.n_n
    }

    pub fn trial(&self, channel: &ChannelInstance, constellation: &Constellation, rho: f64, index: usize) -> Trial {
        let (i, j) = (index / self.n_n, index % self.n_n);
        let input = InputVector::draw(constellation, channel.n_t(), rho, &mut rng::input_stream(self.seed, i));
        let (z, noise) = synthesize(channel, &input, &mut rng::noise_stream(self.seed, i, j));
        Trial { i, j, input, z, noise }
    }

    /// Evaluates `f` on every trial in parallel; results are in trial order.
    pub fn map<T, F>(&self, channel: &ChannelInstance, constellation: &Constellation, rho: f64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&Trial) -> T + Sync,
    {
        (0..self.n_samples())
            .into_par_iter()
            .map(|idx| f(&self.trial(channel, constellation, rho, idx)))
            .collect()
    }
}

/// Per-trial output of a tree-search density evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdSample {
    pub densities: LogDensityTriple,
    pub visited_nodes: u64,
    pub n_candidates: usize,
}

/// Runs `search` on `z` and assembles the density triple.
pub fn sd_sample(channel: &ChannelInstance, alphabet: &[Complex64], search: &dyn TreeSearch, z: &[Complex64]) -> SdSample {
    let v = channel.rotate(z);
    let anchor = zf_anchor(&v, channel.r(), alphabet);
    let cs = search.search(&v, channel.r(), alphabet, &anchor);
    SdSample {
        densities: log_density_bounds(&cs),
        visited_nodes: cs.visited_nodes,
        n_candidates: cs.len(),
    }
}

pub fn mc_sd_samples(
    channel: &ChannelInstance,
    constellation: &Constellation,
    rho: f64,
    search: &dyn TreeSearch,
    mc: &MonteCarlo,
) -> Vec<SdSample> {
    let alphabet = constellation.scaled(rho);
    mc.map(channel, constellation, rho, |t| sd_sample(channel, &alphabet, search, &t.z))
}

/// Entropy bounds by tree search, averaged over `N_d·N_n` trials.
pub fn mc_entropy(
    channel: &ChannelInstance,
    constellation: &Constellation,
    rho: f64,
    search: &dyn TreeSearch,
    mc: &MonteCarlo,
) -> EntropyEstimate {
    let samples = mc_sd_samples(channel, constellation, rho, search, mc);
    summarize_sd(channel.n_t(), search.mode(), &samples, mc.n_n)
}

/// Bounds from per-trial samples in trial order; `group` is `N_n`.
pub fn summarize_sd(n_t: usize, mode: SearchMode, samples: &[SdSample], group: usize) -> EntropyEstimate {
    let visited: Vec<u64> = samples.iter().map(|s| s.visited_nodes).collect();
    EntropyEstimate {
        n_t,
        h_up: SampleMean::from_log_densities(samples.iter().map(|s| s.densities.log_f_lower), group),
        h_lo: match mode {
            SearchMode::Dfs => Some(SampleMean::from_log_densities(
                samples.iter().map(|s| s.densities.log_f_upper_tail.unwrap_or(f64::NEG_INFINITY)),
                group,
            )),
            SearchMode::Bfs => None,
        },
        h_lo_plus: SampleMean::from_log_densities(samples.iter().map(|s| s.densities.log_f_upper_pruned), group),
        n_samples: samples.len(),
        mean_visited_nodes: mean_count(&visited),
        n_empty: samples.iter().filter(|s| s.n_candidates == 0).count(),
    }
}

fn check_cap(m_c: usize, n_t: usize, cap: u64) -> Result<()> {
    let components = (m_c as f64).powi(n_t as i32);
    if components > cap as f64 {
        return Err(Error::OracleTooLarge { components, cap });
    }
    Ok(())
}

/// Exact `ln f(z)` by enumerating all `M_c^{N_t}` components in the received domain.
///
/// Uses `H` directly (no QR), with partial sums `Σ_{j≥k} H_{:,j}·d_j` reused
/// across an odometer over the symbol indices.
pub fn true_log_density(
    h: &CMatrix,
    z: &[Complex64],
    constellation: &Constellation,
    rho: f64,
    cap: u64,
) -> Result<f64> {
    let n = h.cols();
    let m = constellation.size();
    check_cap(m, n, cap)?;
    if z.len() != h.rows() {
        return Err(Error::invalid("received vector length does not match channel"));
    }
    let alphabet = constellation.scaled(rho);
    let rows = h.rows();
    // contrib[j][s] = H[:, j]·a_s
    let contrib: Vec<Vec<Vec<Complex64>>> = (0..n)
        .map(|j| {
            let col = h.column(j);
            alphabet.iter().map(|&a| col.iter().map(|&x| x * a).collect()).collect()
        })
        .collect();
    // partial[k] = Σ_{j≥k} contrib[j][idx[j]]; partial[n] = 0
    let mut idx = vec![0usize; n];
    let mut partial = vec![vec![Complex64::new(0.0, 0.0); rows]; n + 1];
    let refresh = |partial: &mut Vec<Vec<Complex64>>, idx: &[usize], from: usize| {
        for k in (0..=from).rev() {
            let (lo, hi) = partial.split_at_mut(k + 1);
            let src = &hi[0];
            let c = &contrib[k][idx[k]];
            for r in 0..rows {
                lo[k][r] = src[r] + c[r];
            }
        }
    };
    let mut acc = LogSumExp::new();
    if n == 0 {
        acc.add(-crate::linalg::norm_sqr(z));
    } else {
        refresh(&mut partial, &idx, n - 1);
        loop {
            let d: f64 = z.iter().zip(&partial[0]).map(|(a, b)| (a - b).norm_sqr()).sum();
            acc.add(-d);
            // advance the odometer: position 0 fastest
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
            refresh(&mut partial, &idx, k);
        }
    }
    Ok(log_component_scale(m, n) + acc.value())
}

/// Exact densities on the same trial streams as [`mc_entropy`].
pub fn true_log_densities(
    channel: &ChannelInstance,
    constellation: &Constellation,
    rho: f64,
    mc: &MonteCarlo,
    cap: u64,
) -> Result<Vec<f64>> {
    check_cap(constellation.size(), channel.n_t(), cap)?;
    mc.map(channel, constellation, rho, |t| true_log_density(channel.h(), &t.z, constellation, rho, cap))
        .into_iter()
        .collect()
}

/// Monte-Carlo entropy with the exact mixture density.
pub fn true_entropy_oracle(
    channel: &ChannelInstance,
    constellation: &Constellation,
    rho: f64,
    mc: &MonteCarlo,
    cap: u64,
) -> Result<Approximation> {
    let log_f = true_log_densities(channel, constellation, rho, mc, cap)?;
    let m = constellation.size() as f64;
    let visited = (m.powi(channel.n_t() as i32)) as u64;
    Ok(Approximation {
        n_t: channel.n_t(),
        h: SampleMean::from_log_densities(log_f.iter().copied(), mc.n_n),
        n_samples: log_f.len(),
        mean_visited_nodes: visited as f64,
        n_fallbacks: 0,
    })
}

/// `log₂ det(I + ρ·H·Hᴴ)`.
pub fn gaussian_bound_matrix(h: &CMatrix, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::invalid(format!("rho must be nonnegative, got {rho}")));
    }
    Ok(HermitianPD::signal_plus_noise(h, rho)?.logdet() / LN_2)
}

pub fn gaussian_bound(channel: &ChannelInstance, rho: f64) -> Result<f64> {
    gaussian_bound_matrix(channel.h(), rho)
}

/// Source-entropy bound `N_t·log₂ M_c`.
pub fn seb(m_c: usize, n_t: usize) -> f64 {
    n_t as f64 * (m_c as f64).log2()
}

/// The `ρ` at which the Gaussian bound reaches the source-entropy bound.
pub fn rho_c_matrix(h: &CMatrix, m_c: usize) -> Result<f64> {
    if h.frobenius_norm() == 0.0 {
        return Err(Error::NoIntersection("zero channel: the Gaussian bound stays at 0".into()));
    }
    let target = seb(m_c, h.cols());
    let gb = |rho: f64| gaussian_bound_matrix(h, rho);
    let mut hi = 1.0;
    while gb(hi)? < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoIntersection("Gaussian bound did not reach the source entropy".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if gb(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn rho_c(channel: &ChannelInstance, constellation: &Constellation) -> Result<f64> {
    rho_c_matrix(channel.h(), constellation.size())
}

/// `10^{dB/10}`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
