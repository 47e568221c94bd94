//! Benchmark estimators: statistical approximation (SA), Hamming-distance-1
//! neighborhoods (HD1), and forward-recursion trellis rates for FIR channels
//! (full and reduced-state).

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{log_component_scale, noise_entropy_bits, Approximation, MonteCarlo, Trial};
use crate::linalg::HermitianPD;
use crate::logspace::{pairwise_sum, LogSumExp};
use crate::model::{normalize_taps, ChannelInstance, Constellation, InputVector};
use crate::rng::{self, complex_normal};
use crate::search::{path_cost, zf_anchor};

/// Component log densities of the SA / HD1 envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeDensities {
    /// The drawn component alone.
    pub log_f_h: f64,
    /// The HD1 neighborhood sum; `None` for SA.
    pub log_f_m: Option<f64>,
    /// Moment-matched Gaussian `CN(0, ρHHᴴ + I)`.
    pub log_f_l: f64,
}

impl EnvelopeDensities {
    /// The maximum of the available densities.
    pub fn combined(&self) -> f64 {
        self.log_f_h.max(self.log_f_l).max(self.log_f_m.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Shared per-SNR state for the SA and HD1 estimators.
#[derive(Debug, Clone)]
pub struct Envelope<'a> {
    channel: &'a ChannelInstance,
    alphabet: Vec<Complex64>,
    k_z: HermitianPD,
}

impl<'a> Envelope<'a> {
    pub fn new(channel: &'a ChannelInstance, constellation: &Constellation, rho: f64) -> Result<Self> {
        Ok(Self {
            channel,
            alphabet: constellation.scaled(rho),
            k_z: HermitianPD::signal_plus_noise(channel.h(), rho)?,
        })
    }

    fn log_gaussian(&self, z: &[Complex64]) -> f64 {
        -(z.len() as f64) * PI.ln() - self.k_z.logdet() - self.k_z.quad_form(z)
    }

    fn log_drawn(&self, z: &[Complex64], drawn: &InputVector) -> f64 {
        let mean = self.channel.h().mul_vec(&drawn.symbols);
        let d: f64 = z.iter().zip(&mean).map(|(a, b)| (a - b).norm_sqr()).sum();
        log_component_scale(self.alphabet.len(), z.len()) - d
    }

    /// `max{f_h, f_l}`.
    pub fn sa_log_pdf(&self, z: &[Complex64], drawn: &InputVector) -> EnvelopeDensities {
        EnvelopeDensities {
            log_f_h: self.log_drawn(z, drawn),
            log_f_m: None,
            log_f_l: self.log_gaussian(z),
        }
    }

    /// The zero-forcing anchor and all its single-coordinate substitutions, in factor order.
    pub fn hd1_candidates(&self, v: &[Complex64]) -> Vec<Vec<usize>> {
        let anchor = zf_anchor(v, self.channel.r(), &self.alphabet);
        let m = self.alphabet.len();
        let mut out = Vec::with_capacity(1 + anchor.len() * (m - 1));
        out.push(anchor.clone());
        for k in 0..anchor.len() {
            for s in 0..m {
                if s != anchor[k] {
                    let mut c = anchor.clone();
                    c[k] = s;
                    out.push(c);
                }
            }
        }
        out
    }

    /// `max{f_h, f_m, f_l}` with `f_m` summed over the HD1 neighborhood.
    pub fn hd1_log_pdf(&self, z: &[Complex64], drawn: &InputVector) -> EnvelopeDensities {
        let v = self.channel.rotate(z);
        let mut acc = LogSumExp::new();
        for c in self.hd1_candidates(&v) {
            acc.add(-path_cost(&v, self.channel.r(), &self.alphabet, &c));
        }
        EnvelopeDensities {
            log_f_h: self.log_drawn(z, drawn),
            log_f_m: Some(log_component_scale(self.alphabet.len(), z.len()) + acc.value()),
            log_f_l: self.log_gaussian(z),
        }
    }
}

fn envelope_mi(
    channel: &ChannelInstance,
    constellation: &Constellation,
    rho: f64,
    mc: &MonteCarlo,
    nodes: u64,
    f: impl Fn(&Envelope, &Trial) -> f64 + Sync,
) -> Result<Approximation> {
    let env = Envelope::new(channel, constellation, rho)?;
    let log_f = mc.map(channel, constellation, rho, |t| f(&env, t));
    let visited = vec![nodes; log_f.len()];
    Ok(Approximation::from_log_densities(channel.n_t(), &log_f, mc.n_n, &visited, 0))
}

pub fn sa_mi(channel: &ChannelInstance, constellation: &Constellation, rho: f64, mc: &MonteCarlo) -> Result<Approximation> {
    envelope_mi(channel, constellation, rho, mc, 1, |env, t| env.sa_log_pdf(&t.z, &t.input).combined())
}

pub fn hd1_mi(channel: &ChannelInstance, constellation: &Constellation, rho: f64, mc: &MonteCarlo) -> Result<Approximation> {
    let nodes = 1 + channel.n_t() as u64 * (constellation.size() as u64 - 1);
    envelope_mi(channel, constellation, rho, mc, nodes, |env, t| env.hd1_log_pdf(&t.z, &t.input).combined())
}

/// Default refusal threshold for `M_c^L` trellis states.
pub const DEFAULT_STATE_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcjrParams {
    /// Sequence length including the warm-up prefix.
    pub n: usize,
    /// Reduced-state cap; `None` keeps the full trellis.
    pub q: Option<usize>,
    pub seed: u64,
    /// Stages counted for the visited-state report.
    pub count_stages: usize,
    pub state_cap: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcjrEstimate {
    pub mi_per_symbol: f64,
    /// `−(1/n)·log₂ p(zⁿ)` over the counted stages.
    pub h_per_symbol: f64,
    /// Batch-means standard error of `h_per_symbol`.
    pub stderr: f64,
    /// Stages entering the rate average.
    pub n_used: usize,
    /// `Σ M_c·|active_{k−1}|` over the first `count_stages` stages.
    pub visited_states: u64,
}

/// `M_c·(Σ_{k=0}^{q₀} M_c^k + Σ_{k=q₀+1}^{N−1} Q)` with `q₀ = max{k : M_c^k < Q}`:
/// trellis states visited over the first `N` stages when at most `Q` survive.
pub fn rsub_complexity(m_c: usize, q: usize, stages: usize) -> u128 {
    let (m, q) = (m_c as u128, q as u128);
    let mut total = 0u128;
    let mut pow = 1u128;
    for _ in 0..stages {
        total += pow.min(q);
        pow = pow.saturating_mul(m);
    }
    m * total
}

/// Information rate of an FIR channel with i.u.d. inputs by forward recursion.
///
/// The input sequence starts from the all-index-0 state, and the first `4L`
/// stages are excluded from the rate.
pub fn bcjr_mi(g: &[f64], constellation: &Constellation, rho: f64, params: &BcjrParams) -> Result<BcjrEstimate> {
    let g = normalize_taps(g)?;
    let l = g.len() - 1;
    let m = constellation.size();
    let n_states_f = (m as f64).powi(l as i32);
    if n_states_f > params.state_cap as f64 {
        return Err(Error::TrellisTooLarge {
            states: n_states_f,
            cap: params.state_cap,
        });
    }
    let n_states = m.pow(l as u32);
    let warm = 4 * l;
    if params.n <= warm {
        return Err(Error::invalid(format!("sequence length {} must exceed the warm-up {warm}", params.n)));
    }
    if params.q == Some(0) {
        return Err(Error::invalid("Q must be at least 1"));
    }
    let alphabet = constellation.scaled(rho);

    // mean[s·M + x]: noiseless output when state s receives symbol x;
    // state digits are symbol indices, most recent in the least significant place
    let mut mean = vec![Complex64::new(0.0, 0.0); n_states * m];
    for s in 0..n_states {
        let mut tail = Complex64::new(0.0, 0.0);
        let mut rest = s;
        for gl in &g[1..] {
            tail += alphabet[rest % m] * gl;
            rest /= m;
        }
        for x in 0..m {
            mean[s * m + x] = tail + alphabet[x] * g[0];
        }
    }

    // simulate the sequence
    let mut in_rng = rng::stream(params.seed, rng::domain::SEQUENCE, 0);
    let mut noise_rng = rng::stream(params.seed, rng::domain::SEQUENCE, 1);
    let mut state = 0usize;
    let mut z = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let x = rand::Rng::random_range(&mut in_rng, 0..m);
        z.push(mean[state * m + x] + complex_normal(&mut noise_rng));
        state = (state * m + x) % n_states;
    }

    let log_branch = -((m as f64) * PI).ln();
    let mut alpha = vec![f64::NEG_INFINITY; n_states];
    alpha[0] = 0.0;
    let mut active = 1usize;
    let mut next = vec![f64::NEG_INFINITY; n_states];
    let mut sums = vec![LogSumExp::new(); n_states];
    let mut lambdas = Vec::with_capacity(params.n);
    let mut visited = 0u64;
    let mut order: Vec<usize> = Vec::new();

    for (k, zk) in z.iter().enumerate() {
        if k < params.count_stages {
            visited += (m * active) as u64;
        }
        sums.fill(LogSumExp::new());
        for (s_old, &a) in alpha.iter().enumerate() {
            if a == f64::NEG_INFINITY {
                continue;
            }
            for x in 0..m {
                let s_new = (s_old * m + x) % n_states;
                sums[s_new].add(a + log_branch - (zk - mean[s_old * m + x]).norm_sqr());
            }
        }
        let mut total = LogSumExp::new();
        for (slot, acc) in next.iter_mut().zip(&sums) {
            *slot = acc.value();
            total.add(*slot);
        }
        let lambda = total.value();
        lambdas.push(lambda);
        let mut count = next.iter().filter(|v| **v > f64::NEG_INFINITY).count();
        if let Some(q) = params.q {
            if count > q {
                order.clear();
                order.extend((0..n_states).filter(|&s| next[s] > f64::NEG_INFINITY));
                order.sort_by(|&a, &b| next[b].total_cmp(&next[a]).then(a.cmp(&b)));
                for &s in &order[q..] {
                    next[s] = f64::NEG_INFINITY;
                }
                count = q;
            }
        }
        for v in next.iter_mut() {
            *v -= lambda;
        }
        std::mem::swap(&mut alpha, &mut next);
        active = count;
    }

    let used: Vec<f64> = lambdas[warm..].iter().map(|l| -l / LN_2).collect();
    let n_used = used.len();
    let h = pairwise_sum(&used) / n_used as f64;
    let batches = 50.min(n_used);
    let size = n_used / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| pairwise_sum(&used[b * size..(b + 1) * size]) / size as f64)
        .collect();
    let var: f64 = means.iter().map(|x| (x - h) * (x - h)).sum::<f64>() / (batches.max(2) - 1) as f64;
    Ok(BcjrEstimate {
        mi_per_symbol: h - noise_entropy_bits(1),
        h_per_symbol: h,
        stderr: (var / batches as f64).sqrt(),
        n_used,
        visited_states: visited,
    })
}
