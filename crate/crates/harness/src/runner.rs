//! SNR sweeps over the configured methods.

use std::time::Instant;

use sdentropy::estimators::db_to_linear;
use sdentropy::{MonteCarlo, Ordering};

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::methods::{fmt_real, full_width, Bfs, Context, Dfs, Method, Registry, Truth};
use crate::output::ResultRow;

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub snr_db: Option<Vec<f64>>,
    /// Keep only methods whose name is listed.
    pub methods: Option<Vec<String>>,
    /// Fill `wall_ms`; off by default so reruns are byte-identical.
    pub wall_clock: bool,
}

impl RunOptions {
    /// The config with seed and SNR overrides applied.
    pub fn apply(&self, config: &ExperimentConfig) -> ExperimentConfig {
        let mut c = config.clone();
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(snr) = &self.snr_db {
            c.snr_db = snr.clone();
        }
        c
    }
}

pub fn build_context(config: &ExperimentConfig) -> Result<Context, HarnessError> {
    let natural = config.build_channel()?;
    let sorted = natural.with_ordering(Ordering::Sorted)?;
    Ok(Context {
        natural,
        sorted,
        constellation: config.build_constellation()?,
        mc: MonteCarlo::new(config.n_d, config.n_n, config.seed).map_err(crate::config::config_err)?,
        fir_taps: config.fir_taps()?,
        oracle_cap: config.oracle_cap,
        seed: config.seed,
    })
}

pub fn build_methods(
    config: &ExperimentConfig,
    registry: &Registry,
    filter: Option<&[String]>,
) -> Result<Vec<Box<dyn Method>>, HarnessError> {
    let mut out = Vec::new();
    for spec in &config.methods {
        let m = registry.build(spec)?;
        if filter.is_none_or(|f| f.iter().any(|n| n == m.name())) {
            out.push(m);
        }
    }
    if let Some(f) = filter {
        if let Some(unknown) = f.iter().find(|n| !registry.names().contains(&n.as_str())) {
            return Err(HarnessError::Config(format!("unknown method `{unknown}` in filter")));
        }
    }
    Ok(out)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(HarnessError::Config("thread count must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

fn evaluate_rows(
    method: &dyn Method,
    ctx: &Context,
    snr_db: f64,
    wall_clock: bool,
) -> Result<Vec<ResultRow>, HarnessError> {
    let start = Instant::now();
    let ev = method.evaluate(ctx, db_to_linear(snr_db))?;
    let wall_ms = wall_clock.then(|| start.elapsed().as_secs_f64() * 1e3);
    let base = method.params();
    for w in &ev.warnings {
        eprintln!("warning: {} [{base}] at {snr_db} dB: {w}", method.name());
    }
    let n_t = ctx.n_t() as f64;
    Ok(ev
        .outcomes
        .into_iter()
        .map(|o| ResultRow {
            snr_db,
            method: method.name().to_string(),
            params: match (&o.note, base.is_empty()) {
                (Some(n), true) => n.clone(),
                (Some(n), false) => format!("{base};{n}"),
                (None, _) => base.clone(),
            },
            mi_bits_per_symbol: o.mi_total.map(|m| m / n_t),
            mi_bits_total: o.mi_total,
            h_bits: o.h_total,
            bound_kind: o.kind,
            mean_visited_nodes: o.visited,
            stderr: o.stderr_total.map(|s| s / n_t),
            n_sentinels: o.n_sentinels,
            wall_ms,
        })
        .collect())
}

/// Runs every method at every SNR, handing each row to `sink` as soon as it
/// is ready. Returns all rows.
pub fn run_experiment(
    config: &ExperimentConfig,
    registry: &Registry,
    opts: &RunOptions,
    sink: &mut dyn FnMut(&ResultRow) -> Result<(), HarnessError>,
) -> Result<Vec<ResultRow>, HarnessError> {
    let config = opts.apply(config);
    config.validate()?;
    let methods = build_methods(&config, registry, opts.methods.as_deref())?;
    let pool = pool(opts.threads)?;
    let mut rows = Vec::new();
    if config.snr_db.is_empty() {
        return Ok(rows);
    }
    let ctx = build_context(&config)?;
    for &snr in &config.snr_db {
        for m in &methods {
            eprintln!("running {} [{}] at {snr} dB", m.name(), m.params());
            let batch = pool.install(|| evaluate_rows(m.as_ref(), &ctx, snr, opts.wall_clock))?;
            for row in batch {
                sink(&row)?;
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    K,
}

impl std::str::FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" => Ok(SweepParam::Alpha),
            "k" => Ok(SweepParam::K),
            _ => Err(HarnessError::Config(format!("sweep parameter must be `alpha` or `k`, got `{s}`"))),
        }
    }
}

/// Bounds along a grid of `α` (depth-first) or `K` (K-best) at the single
/// SNR of the config, followed by the exact value when the oracle fits.
/// For `K`, `inf` stands for the full width `M_c^{N_t−1}`.
pub fn sweep_convergence(
    config: &ExperimentConfig,
    param: SweepParam,
    grid: &[f64],
    opts: &RunOptions,
    sink: &mut dyn FnMut(&ResultRow) -> Result<(), HarnessError>,
) -> Result<Vec<ResultRow>, HarnessError> {
    let config = opts.apply(config);
    config.validate()?;
    let snr = match config.snr_db.as_slice() {
        [s] => *s,
        other => {
            return Err(HarnessError::Config(format!(
                "a sweep needs exactly one SNR point, got {}",
                other.len()
            )))
        }
    };
    if grid.is_empty() {
        return Err(HarnessError::Config("empty sweep grid".into()));
    }
    let ctx = build_context(&config)?;
    let mut methods: Vec<Box<dyn Method>> = Vec::with_capacity(grid.len() + 1);
    for &g in grid {
        methods.push(match param {
            SweepParam::Alpha => Box::new(Dfs::new(g)?),
            SweepParam::K => {
                let full = full_width(ctx.m_c(), ctx.n_t());
                let k = if g.is_infinite() && g > 0.0 {
                    full
                } else if g >= 1.0 && g.fract() == 0.0 {
                    (g as usize).min(full)
                } else {
                    return Err(HarnessError::Config(format!("K must be a positive integer, got {}", fmt_real(g))));
                };
                Box::new(Bfs::new(k)?)
            }
        });
    }
    methods.push(Box::new(Truth {}));
    let pool = pool(opts.threads)?;
    let mut rows = Vec::new();
    for m in &methods {
        eprintln!("running {} [{}] at {snr} dB", m.name(), m.params());
        for row in pool.install(|| evaluate_rows(m.as_ref(), &ctx, snr, opts.wall_clock))? {
            sink(&row)?;
            rows.push(row);
        }
    }
    Ok(rows)
}
