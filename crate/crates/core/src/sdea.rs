//! SNR-partitioned enhanced approximation.
//!
//! Streams are split by `λ_k² = |r_kk|²` into a low-SNR block `A`, a
//! medium-SNR block `B`, and a high-SNR block `C`. In factor order
//!
//! ```text
//! v_A = A·d_A + B_A·d_B + C_A·d_C + w_A
//! v_B =          B·d_B + C_B·d_C + w_B
//! v_C =                     C·d_C + w_C
//! ```
//!
//! `d_C` is taken as the drawn input, `d_B` is enumerated by a tree search on
//! `v_B − C_B·d_C`, and `v_A` is modeled as a single Gaussian with covariance
//! `ρ·A·Aᴴ + I`. The result is an approximation that relies on the Monte-Carlo
//! input being known; it is not a bound.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{
    gaussian_bound, log_component_scale, mean_count, noise_entropy_bits, rho_c, seb, Approximation, MonteCarlo,
    SampleMean,
};
use crate::linalg::{CMatrix, HermitianPD};
use crate::logspace::LogSumExp;
use crate::model::{ChannelInstance, Constellation};
use crate::search::{path_cost, zf_anchor, Candidate, TreeSearch};

/// Block sizes and blocks of `R` for one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrPartition {
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
    /// Thresholds after scaling to the current SNR.
    pub gamma_l: f64,
    pub gamma_h: f64,
    pub rho: f64,
    pub a: CMatrix,
    pub b_a: CMatrix,
    pub c_a: CMatrix,
    pub b: CMatrix,
    pub c_b: CMatrix,
    pub c: CMatrix,
    /// `ρ·A·Aᴴ + I`, absent when `N_A = 0`.
    pub k_a: Option<HermitianPD>,
}

/// `(N_A, N_C)` from leading `λ² ≤ γ_l` and trailing `λ² > γ_h` runs.
/// The trailing scan stops where the leading run ended, so blocks never overlap.
pub fn block_sizes(lambda_sq: &[f64], gamma_l: f64, gamma_h: f64) -> (usize, usize) {
    let n_a = lambda_sq.iter().take_while(|&&l| l <= gamma_l).count();
    let n_c = lambda_sq[n_a..].iter().rev().take_while(|&&l| l > gamma_h).count();
    (n_a, n_c)
}

/// Partitions the channel with reference-scale thresholds `γ` applied as `γ·ρ_ref/ρ`.
pub fn partition(channel: &ChannelInstance, gamma_l: f64, gamma_h: f64, rho: f64, rho_ref: f64) -> Result<SnrPartition> {
    if !(gamma_l <= gamma_h) {
        return Err(Error::invalid(format!("need gamma_l <= gamma_h, got {gamma_l} > {gamma_h}")));
    }
    if !(rho > 0.0) || !(rho_ref > 0.0) {
        return Err(Error::invalid("rho and rho_ref must be positive"));
    }
    let scale = rho_ref / rho;
    let (gl, gh) = (gamma_l * scale, gamma_h * scale);
    let (n_a, n_c) = block_sizes(channel.lambda_sq(), gl, gh);
    let n = channel.n_t();
    let n_b = n - n_a - n_c;
    let r = channel.r();
    let (sb, sc) = (n_a, n_a + n_b);
    let a = r.block(0, 0, n_a, n_a);
    let k_a = if n_a > 0 {
        Some(HermitianPD::signal_plus_noise(&a, rho)?)
    } else {
        None
    };
    Ok(SnrPartition {
        n_a,
        n_b,
        n_c,
        gamma_l: gl,
        gamma_h: gh,
        rho,
        b_a: r.block(0, sb, n_a, n_b),
        c_a: r.block(0, sc, n_a, n_c),
        b: r.block(sb, sb, n_b, n_b),
        c_b: r.block(sb, sc, n_b, n_c),
        c: r.block(sc, sc, n_c, n_c),
        a,
        k_a,
    })
}

/// Thresholds chosen around `γ_c` with total width `Δγ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub gamma_l: f64,
    pub gamma_h: f64,
    /// Set when `min λ² = max λ²`; both thresholds then equal `γ_c`.
    pub degenerate: bool,
}

/// `γ_l = γ_c + (λ_min² − γ_c)/(λ_max² − λ_min²)·Δγ`,
/// `γ_h = γ_c + (λ_max² − γ_c)/(λ_max² − λ_min²)·Δγ`, with `γ_c` defaulting to
/// the midpoint of the spectrum.
pub fn choose_thresholds(lambda_sq: &[f64], delta_gamma: f64, gamma_c: Option<f64>) -> Result<Thresholds> {
    if !(delta_gamma >= 0.0) {
        return Err(Error::invalid(format!("delta_gamma must be nonnegative, got {delta_gamma}")));
    }
    if lambda_sq.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    let lo = lambda_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambda_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gc = gamma_c.unwrap_or(0.5 * (lo + hi));
    let width = hi - lo;
    if width == 0.0 {
        return Ok(Thresholds {
            gamma_l: gc,
            gamma_h: gc,
            degenerate: true,
        });
    }
    Ok(Thresholds {
        gamma_l: gc + (lo - gc) / width * delta_gamma,
        gamma_h: gc + (hi - gc) / width * delta_gamma,
        degenerate: false,
    })
}

/// One SDEA density evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeaSample {
    pub log_pdf: f64,
    pub visited_nodes: u64,
    /// The B-block search found nothing and the anchor alone was used.
    pub fallback: bool,
}

fn select(alphabet: &[Complex64], idx: &[usize]) -> Vec<Complex64> {
    idx.iter().map(|&i| alphabet[i]).collect()
}

fn residual(v: &[Complex64], terms: &[(&CMatrix, &[Complex64])]) -> Vec<Complex64> {
    let mut out = v.to_vec();
    for (m, x) in terms {
        if m.cols() == 0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(m.mul_vec(x)) {
            *o -= p;
        }
    }
    out
}

/// `ln f(v)` under the partitioned approximation.
///
/// `v` is the rotated observation `Qᴴz`, `drawn` the Monte-Carlo input
/// indices in factor order (only its C part is used). The search radius is
/// anchored at the quantized zero-forcing solution of the reduced B system.
pub fn sdea_log_pdf(
    v: &[Complex64],
    part: &SnrPartition,
    drawn: &[usize],
    alphabet: &[Complex64],
    search: &dyn TreeSearch,
) -> SdeaSample {
    let m = alphabet.len();
    let (n_a, n_b) = (part.n_a, part.n_b);
    let (sb, sc) = (n_a, n_a + n_b);
    let d_c = select(alphabet, &drawn[sc..]);

    let w_c = residual(&v[sc..], &[(&part.c, &d_c)]);
    let log_c = log_component_scale(m, part.n_c) - crate::linalg::norm_sqr(&w_c);

    // Gaussian factor for the A block given d_B
    let gauss = |d_b: &[Complex64]| -> f64 {
        match &part.k_a {
            None => 0.0,
            Some(k_a) => {
                let x = residual(&v[..n_a], &[(&part.b_a, d_b), (&part.c_a, &d_c)]);
                -(n_a as f64) * std::f64::consts::PI.ln() - k_a.logdet() - k_a.quad_form(&x)
            }
        }
    };

    if n_b == 0 {
        return SdeaSample {
            log_pdf: log_c + gauss(&[]),
            visited_nodes: 0,
            fallback: false,
        };
    }

    let v_b = residual(&v[sb..sc], &[(&part.c_b, &d_c)]);
    let anchor = zf_anchor(&v_b, &part.b, alphabet);
    let cs = search.search(&v_b, &part.b, alphabet, &anchor);
    let fallback = cs.is_empty();
    let candidates = if fallback {
        vec![Candidate {
            distance: path_cost(&v_b, &part.b, alphabet, &anchor),
            indices: anchor,
        }]
    } else {
        cs.candidates
    };
    let mut acc = LogSumExp::new();
    for cand in &candidates {
        if part.k_a.is_some() {
            acc.add(-cand.distance + gauss(&select(alphabet, &cand.indices)));
        } else {
            acc.add(-cand.distance);
        }
    }
    SdeaSample {
        log_pdf: log_c + (log_component_scale(m, n_b) + acc.value()),
        visited_nodes: cs.visited_nodes,
        fallback,
    }
}

/// Threshold settings in reference scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeaThresholds {
    pub gamma_l: f64,
    pub gamma_h: f64,
    /// Reference SNR of the thresholds; `None` means the GB/SEB crossing `ρ_c`.
    pub rho_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeaEstimate {
    pub approx: Approximation,
    /// Unclipped MI in bits per vector.
    pub mi_raw: f64,
    /// `min(raw, GB, SEB)` in bits per vector.
    pub mi: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub n_c: usize,
}

/// Per-trial SDEA samples on the standard Monte-Carlo streams.
pub fn sdea_samples(
    channel: &ChannelInstance,
    constellation: &Constellation,
    rho: f64,
    part: &SnrPartition,
    search: &dyn TreeSearch,
    mc: &MonteCarlo,
) -> Vec<SdeaSample> {
    let alphabet = constellation.scaled(rho);
    mc.map(channel, constellation, rho, |t| {
        let v = channel.rotate(&t.z);
        let drawn = channel.to_factor_order(&t.input.indices);
        sdea_log_pdf(&v, part, &drawn, &alphabet, search)
    })
}

/// Monte-Carlo mutual information under the partitioned approximation.
pub fn sdea_mi(
    channel: &ChannelInstance,
    constellation: &Constellation,
    rho: f64,
    thresholds: &SdeaThresholds,
    search: &dyn TreeSearch,
    mc: &MonteCarlo,
) -> Result<SdeaEstimate> {
    let rho_ref = match thresholds.rho_ref {
        Some(r) => r,
        None => rho_c(channel, constellation)?,
    };
    let part = partition(channel, thresholds.gamma_l, thresholds.gamma_h, rho, rho_ref)?;
    let samples = sdea_samples(channel, constellation, rho, &part, search, mc);
    let log_f: Vec<f64> = samples.iter().map(|s| s.log_pdf).collect();
    let visited: Vec<u64> = samples.iter().map(|s| s.visited_nodes).collect();
    let n_t = channel.n_t();
    let approx = Approximation {
        n_t,
        h: SampleMean::from_log_densities(log_f.iter().copied(), mc.n_n),
        n_samples: log_f.len(),
        mean_visited_nodes: mean_count(&visited),
        n_fallbacks: samples.iter().filter(|s| s.fallback).count(),
    };
    let mi_raw = approx.h.mean - noise_entropy_bits(n_t);
    let cap = gaussian_bound(channel, rho)?.min(seb(constellation.size(), n_t));
    Ok(SdeaEstimate {
        mi: mi_raw.min(cap),
        mi_raw,
        n_a: part.n_a,
        n_b: part.n_b,
        n_c: part.n_c,
        approx,
    })
}
