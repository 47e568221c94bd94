//! Estimation methods and the name-keyed registry that builds them from config.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use sdentropy::baselines::{bcjr_mi, hd1_mi, sa_mi, BcjrParams, DEFAULT_STATE_CAP};
use sdentropy::estimators::{db_to_linear, gaussian_bound, mc_entropy, seb, true_entropy_oracle, SampleMean};
use sdentropy::sdea::{choose_thresholds, sdea_mi, SdeaThresholds};
use sdentropy::search::SearchSpec;
use sdentropy::{Approximation, ChannelInstance, Constellation, Error, MonteCarlo};

use crate::error::HarnessError;
use crate::output::BoundKind;

/// Everything a method needs besides the SNR.
#[derive(Debug, Clone)]
pub struct Context {
    /// Channel in column order, used by the oracle and the envelope baselines.
    pub natural: ChannelInstance,
    /// Same matrix with a sorted factorization, used by the tree searches.
    pub sorted: ChannelInstance,
    pub constellation: Constellation,
    pub mc: MonteCarlo,
    /// FIR taps when the channel is a convolution (needed by the trellis).
    pub fir_taps: Option<Vec<f64>>,
    pub oracle_cap: u64,
    pub seed: u64,
}

impl Context {
    pub fn n_t(&self) -> usize {
        self.natural.n_t()
    }

    pub fn m_c(&self) -> usize {
        self.constellation.size()
    }
}

/// One value reported by a method, in per-vector units.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub kind: BoundKind,
    pub mi_total: Option<f64>,
    pub h_total: Option<f64>,
    pub visited: Option<f64>,
    pub stderr_total: Option<f64>,
    pub n_sentinels: usize,
    /// Appended to the params echo.
    pub note: Option<String>,
}

impl Outcome {
    fn from_mean(kind: BoundKind, h: &SampleMean, n_t: usize, visited: f64) -> Self {
        Outcome {
            kind,
            mi_total: Some(h.mean - sdentropy::estimators::noise_entropy_bits(n_t)),
            h_total: Some(h.mean),
            visited: Some(visited),
            stderr_total: Some(h.stderr),
            n_sentinels: h.n_sentinels,
            note: None,
        }
    }

    fn from_approx(a: &Approximation) -> Self {
        Self::from_mean(BoundKind::Approx, &a.h, a.n_t, a.mean_visited_nodes)
    }

    fn trivial(mi_total: f64) -> Self {
        Outcome {
            kind: BoundKind::Trivial,
            mi_total: Some(mi_total),
            h_total: None,
            visited: None,
            stderr_total: Some(0.0),
            n_sentinels: 0,
            note: None,
        }
    }

    fn unavailable(kind: BoundKind, reason: String) -> Self {
        Outcome {
            kind,
            mi_total: None,
            h_total: None,
            visited: None,
            stderr_total: None,
            n_sentinels: 0,
            note: Some(format!("unavailable: {reason}")),
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Evaluation {
    pub outcomes: Vec<Outcome>,
    pub warnings: Vec<String>,
}

impl Evaluation {
    fn single(o: Outcome) -> Self {
        Evaluation {
            outcomes: vec![o],
            warnings: Vec::new(),
        }
    }
}

/// A runnable estimator for one SNR point.
pub trait Method: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn params(&self) -> String;
    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError>;
}

pub type Factory = fn(&Value) -> Result<Box<dyn Method>, HarnessError>;

/// Methods registered by name, selected from config entries at runtime.
#[derive(Clone)]
pub struct Registry {
    entries: Vec<(&'static str, Factory)>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register("truth", |v| Ok(Box::new(parse::<Truth>(v)?)));
        r.register("dfs", |v| Ok(Box::new(parse::<Dfs>(v)?.validated()?)));
        r.register("bfs", |v| Ok(Box::new(parse::<Bfs>(v)?.validated()?)));
        r.register("sdea", |v| Ok(Box::new(parse::<Sdea>(v)?.validated()?)));
        r.register("sa", |v| Ok(Box::new(parse::<Sa>(v)?)));
        r.register("hd1", |v| Ok(Box::new(parse::<Hd1>(v)?)));
        r.register("bcjr", |v| Ok(Box::new(parse::<Bcjr>(v)?.validated()?)));
        r.register("gb", |v| Ok(Box::new(parse::<Gb>(v)?)));
        r.register("seb", |v| Ok(Box::new(parse::<Seb>(v)?)));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: Vec::new() }
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(e) => e.1 = factory,
            None => self.entries.push((name, factory)),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    /// Builds a method from `{"name": ..., <params>}`.
    pub fn build(&self, spec: &Value) -> Result<Box<dyn Method>, HarnessError> {
        let mut obj = spec
            .as_object()
            .cloned()
            .ok_or_else(|| HarnessError::Config(format!("method entry must be an object, got {spec}")))?;
        let name = match obj.remove("name") {
            Some(Value::String(s)) => s,
            _ => return Err(HarnessError::Config(format!("method entry {spec} has no `name`"))),
        };
        let factory = self
            .entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| *f)
            .ok_or_else(|| {
                HarnessError::Config(format!("unknown method `{name}` (known: {})", self.names().join(", ")))
            })?;
        factory(&Value::Object(obj)).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("method `{name}`: {msg}")),
            other => other,
        })
    }
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T, HarnessError> {
    T::deserialize(v).map_err(|e| HarnessError::Config(e.to_string()))
}

fn bad(e: Error) -> HarnessError {
    HarnessError::Config(e.to_string())
}

/// A real number that may also be written as `"inf"` or `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "RealRepr")]
pub struct Real(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum RealRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<RealRepr> for Real {
    type Error = String;

    fn try_from(r: RealRepr) -> Result<Self, String> {
        match r {
            RealRepr::Num(x) => Ok(Real(x)),
            RealRepr::Text(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(Real(f64::INFINITY)),
                "-inf" | "-infinity" => Ok(Real(f64::NEG_INFINITY)),
                _ => s.parse().map(Real).map_err(|_| format!("`{s}` is not a number")),
            },
        }
    }
}

pub fn fmt_real(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {}

impl Method for Truth {
    fn name(&self) -> &'static str {
        "truth"
    }

    fn params(&self) -> String {
        String::new()
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        match true_entropy_oracle(&ctx.natural, &ctx.constellation, rho, &ctx.mc, ctx.oracle_cap) {
            Ok(a) => {
                let mut o = Outcome::from_approx(&a);
                o.kind = BoundKind::Exact;
                Ok(Evaluation::single(o))
            }
            Err(e @ Error::OracleTooLarge { .. }) => Ok(Evaluation {
                outcomes: vec![Outcome::unavailable(BoundKind::Exact, "oracle cap".into())],
                warnings: vec![e.to_string()],
            }),
            Err(e) => Err(e.into()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dfs {
    pub alpha: Real,
}

impl Dfs {
    pub fn new(alpha: f64) -> Result<Self, HarnessError> {
        Dfs { alpha: Real(alpha) }.validated()
    }

    fn validated(self) -> Result<Self, HarnessError> {
        SearchSpec::Dfs { alpha: self.alpha.0 }.build(2, 1).map_err(bad)?;
        Ok(self)
    }
}

fn sd_evaluation(ctx: &Context, rho: f64, spec: SearchSpec) -> Result<Evaluation, HarnessError> {
    let search = spec.build(ctx.m_c(), ctx.n_t())?;
    let est = mc_entropy(&ctx.sorted, &ctx.constellation, rho, search.as_ref(), &ctx.mc);
    let n_t = ctx.n_t();
    let nodes = est.mean_visited_nodes;
    let mut out = Evaluation::default();
    out.outcomes.push(Outcome::from_mean(BoundKind::Upper, &est.h_up, n_t, nodes));
    if let Some(lo) = &est.h_lo {
        out.outcomes.push(Outcome::from_mean(BoundKind::Lower, lo, n_t, nodes));
    }
    out.outcomes.push(Outcome::from_mean(BoundKind::LowerPlus, &est.h_lo_plus, n_t, nodes));
    if est.n_empty > 0 {
        out.warnings.push(format!("{} of {} searches returned no candidate", est.n_empty, est.n_samples));
    }
    let sentinels = est.h_up.n_sentinels;
    if sentinels > 0 {
        out.warnings.push(format!("{sentinels} zero-density samples excluded"));
    }
    Ok(out)
}

impl Method for Dfs {
    fn name(&self) -> &'static str {
        "dfs"
    }

    fn params(&self) -> String {
        format!("alpha={}", fmt_real(self.alpha.0))
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        sd_evaluation(ctx, rho, SearchSpec::Dfs { alpha: self.alpha.0 })
    }
}

/// Either a fixed `k` or a node `budget` from which `K` is derived.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bfs {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub budget: Option<u64>,
}

impl Bfs {
    pub fn new(k: usize) -> Result<Self, HarnessError> {
        Bfs { k: Some(k), budget: None }.validated()
    }

    fn validated(self) -> Result<Self, HarnessError> {
        match (self.k, self.budget) {
            (Some(k), None) => {
                SearchSpec::Bfs { k }.build(2, 1).map_err(bad)?;
            }
            (None, Some(_)) => {}
            _ => return Err(HarnessError::Config("give exactly one of `k` and `budget`".into())),
        }
        Ok(self)
    }

    fn spec(&self) -> SearchSpec {
        match (self.k, self.budget) {
            (Some(k), _) => SearchSpec::Bfs { k },
            (None, Some(b)) => SearchSpec::BfsBudget { budget: b as u128 },
            (None, None) => unreachable!("validated"),
        }
    }
}

impl Method for Bfs {
    fn name(&self) -> &'static str {
        "bfs"
    }

    fn params(&self) -> String {
        match (self.k, self.budget) {
            (Some(k), _) => format!("K={k}"),
            (None, b) => format!("budget={}", b.unwrap_or(0)),
        }
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        let spec = self.spec();
        let mut ev = sd_evaluation(ctx, rho, spec)?;
        if let SearchSpec::BfsBudget { budget } = spec {
            let k = sdentropy::search::k_for_budget(budget, ctx.m_c(), ctx.n_t())?;
            for o in &mut ev.outcomes {
                o.note = Some(format!("K={k}"));
            }
        }
        Ok(ev)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeaSearch {
    #[serde(default)]
    pub alpha: Option<Real>,
    #[serde(default)]
    pub k: Option<usize>,
}

/// Thresholds are given either explicitly in dB or as a width `delta_gamma`
/// around a center (`gamma_c_db`, defaulting to the spectrum midpoint).
/// All are on the scale of `λ²` at the reference SNR `rho_ref_db`, which
/// defaults to the GB/SEB crossing.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sdea {
    pub search: SdeaSearch,
    #[serde(default)]
    pub gamma_l_db: Option<Real>,
    #[serde(default)]
    pub gamma_h_db: Option<Real>,
    #[serde(default)]
    pub delta_gamma: Option<f64>,
    #[serde(default)]
    pub gamma_c_db: Option<Real>,
    #[serde(default)]
    pub rho_ref_db: Option<f64>,
}

impl Sdea {
    fn validated(self) -> Result<Self, HarnessError> {
        self.search_spec()?.build(2, 1).map_err(bad)?;
        match (self.gamma_l_db, self.gamma_h_db, self.delta_gamma) {
            (Some(l), Some(h), None) => {
                if l.0 > h.0 || l.0.is_nan() || h.0.is_nan() {
                    return Err(HarnessError::Config("gamma_l_db must not exceed gamma_h_db".into()));
                }
            }
            (None, None, Some(d)) => {
                if !(d >= 0.0) {
                    return Err(HarnessError::Config("delta_gamma must be nonnegative".into()));
                }
            }
            _ => {
                return Err(HarnessError::Config(
                    "give either gamma_l_db and gamma_h_db, or delta_gamma".into(),
                ))
            }
        }
        if self.gamma_c_db.is_some() && self.delta_gamma.is_none() {
            return Err(HarnessError::Config("gamma_c_db needs delta_gamma".into()));
        }
        Ok(self)
    }

    fn search_spec(&self) -> Result<SearchSpec, HarnessError> {
        match (self.search.alpha, self.search.k) {
            (Some(a), None) => Ok(SearchSpec::Dfs { alpha: a.0 }),
            (None, Some(k)) => Ok(SearchSpec::Bfs { k }),
            _ => Err(HarnessError::Config("search needs exactly one of `alpha` and `k`".into())),
        }
    }

    fn thresholds(&self, ctx: &Context) -> Result<SdeaThresholds, HarnessError> {
        let rho_ref = self.rho_ref_db.map(db_to_linear);
        let (gamma_l, gamma_h) = match (self.gamma_l_db, self.gamma_h_db, self.delta_gamma) {
            (Some(l), Some(h), _) => (db_to_linear(l.0), db_to_linear(h.0)),
            (_, _, Some(d)) => {
                let t = choose_thresholds(ctx.sorted.lambda_sq(), d, self.gamma_c_db.map(|g| db_to_linear(g.0)))?;
                (t.gamma_l, t.gamma_h)
            }
            _ => unreachable!("validated"),
        };
        Ok(SdeaThresholds {
            gamma_l,
            gamma_h,
            rho_ref,
        })
    }
}

impl Method for Sdea {
    fn name(&self) -> &'static str {
        "sdea"
    }

    fn params(&self) -> String {
        let search = match (self.search.alpha, self.search.k) {
            (Some(a), _) => format!("alpha={}", fmt_real(a.0)),
            (_, k) => format!("K={}", k.unwrap_or(0)),
        };
        let gammas = match (self.gamma_l_db, self.gamma_h_db, self.delta_gamma) {
            (Some(l), Some(h), _) => format!("gamma_l_db={};gamma_h_db={}", fmt_real(l.0), fmt_real(h.0)),
            (_, _, d) => {
                let mut s = format!("delta_gamma={}", d.unwrap_or(0.0));
                if let Some(c) = self.gamma_c_db {
                    s += &format!(";gamma_c_db={}", fmt_real(c.0));
                }
                s
            }
        };
        let reference = match self.rho_ref_db {
            Some(r) => format!("rho_ref_db={r}"),
            None => "rho_ref=rho_c".into(),
        };
        format!("{search};{gammas};{reference}")
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        let search = self.search_spec()?.build(ctx.m_c(), ctx.n_t())?;
        let th = self.thresholds(ctx)?;
        let est = sdea_mi(&ctx.sorted, &ctx.constellation, rho, &th, search.as_ref(), &ctx.mc)?;
        let mut o = Outcome::from_approx(&est.approx);
        o.mi_total = Some(est.mi);
        o.note = Some(format!("split={}/{}/{}", est.n_a, est.n_b, est.n_c));
        let mut warnings = Vec::new();
        if est.approx.n_fallbacks > 0 {
            warnings.push(format!(
                "{} of {} searches fell back to the anchor",
                est.approx.n_fallbacks, est.approx.n_samples
            ));
        }
        if est.mi < est.mi_raw {
            warnings.push(format!("clipped {:.4} -> {:.4} bits", est.mi_raw, est.mi));
        }
        Ok(Evaluation {
            outcomes: vec![o],
            warnings,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sa {}

impl Method for Sa {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn params(&self) -> String {
        String::new()
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        let a = sa_mi(&ctx.natural, &ctx.constellation, rho, &ctx.mc)?;
        Ok(Evaluation::single(Outcome::from_approx(&a)))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hd1 {}

impl Method for Hd1 {
    fn name(&self) -> &'static str {
        "hd1"
    }

    fn params(&self) -> String {
        String::new()
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        let a = hd1_mi(&ctx.natural, &ctx.constellation, rho, &ctx.mc)?;
        Ok(Evaluation::single(Outcome::from_approx(&a)))
    }
}

/// Forward-recursion information rate; `q` absent means the full trellis.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bcjr {
    pub n: usize,
    #[serde(default)]
    pub q: Option<usize>,
}

impl Bcjr {
    fn validated(self) -> Result<Self, HarnessError> {
        if self.n == 0 {
            return Err(HarnessError::Config("n must be positive".into()));
        }
        if self.q == Some(0) {
            return Err(HarnessError::Config("Q must be at least 1".into()));
        }
        Ok(self)
    }
}

impl Method for Bcjr {
    fn name(&self) -> &'static str {
        "bcjr"
    }

    fn params(&self) -> String {
        match self.q {
            Some(q) => format!("n={};Q={q}", self.n),
            None => format!("n={};Q=full", self.n),
        }
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        let taps = ctx
            .fir_taps
            .as_ref()
            .ok_or_else(|| HarnessError::Config("bcjr needs an FIR channel".into()))?;
        let kind = if self.q.is_some() { BoundKind::Upper } else { BoundKind::Approx };
        let params = BcjrParams {
            n: self.n,
            q: self.q,
            seed: ctx.seed,
            count_stages: ctx.n_t(),
            state_cap: DEFAULT_STATE_CAP,
        };
        match bcjr_mi(taps, &ctx.constellation, rho, &params) {
            Ok(e) => {
                let n_t = ctx.n_t() as f64;
                Ok(Evaluation::single(Outcome {
                    kind,
                    mi_total: Some(e.mi_per_symbol * n_t),
                    h_total: Some(e.h_per_symbol * n_t),
                    visited: Some(e.visited_states as f64),
                    stderr_total: Some(e.stderr * n_t),
                    n_sentinels: 0,
                    note: None,
                }))
            }
            Err(e @ Error::TrellisTooLarge { .. }) => Ok(Evaluation {
                outcomes: vec![Outcome::unavailable(kind, "state cap".into())],
                warnings: vec![e.to_string()],
            }),
            Err(e) => Err(e.into()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gb {}

impl Method for Gb {
    fn name(&self) -> &'static str {
        "gb"
    }

    fn params(&self) -> String {
        String::new()
    }

    fn evaluate(&self, ctx: &Context, rho: f64) -> Result<Evaluation, HarnessError> {
        Ok(Evaluation::single(Outcome::trivial(gaussian_bound(&ctx.natural, rho)?)))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seb {}

impl Method for Seb {
    fn name(&self) -> &'static str {
        "seb"
    }

    fn params(&self) -> String {
        String::new()
    }

    fn evaluate(&self, ctx: &Context, _rho: f64) -> Result<Evaluation, HarnessError> {
        Ok(Evaluation::single(Outcome::trivial(seb(ctx.m_c(), ctx.n_t()))))
    }
}

/// `M_c^{N_t−1}`, the width at which K-best search keeps the whole tree.
pub fn full_width(m_c: usize, n_t: usize) -> usize {
    let w = (m_c as u128).saturating_pow(n_t.saturating_sub(1) as u32);
    usize::try_from(w).unwrap_or(usize::MAX)
}
