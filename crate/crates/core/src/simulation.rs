//! Stationary Hawkes order flows: Ogata thinning, the branching (cluster)
//! construction, metaorder overlays and seeded substreams.
//!
//! Every stochastic call draws from a ChaCha20 substream derived from the
//! master seed, the replica index and the role of the stream (buy, sell,
//! metaorder), so replicas can run in any order and on any number of threads.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::numerics::stats::{ks_one_sample, KsResult, MeanEstimate};
use crate::output::Table;
use crate::resolvent::CRITICAL_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Buy,
    Sell,
}

impl Side {
    /// `+1` for buys, `−1` for sells.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    #[default]
    Anonymous,
    Metaorder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMethod {
    #[default]
    Thinning,
    Branching,
}

/// A metaorder executed as a Poisson flow of rate `rate` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaorderSpec {
    pub rate: f64,
    pub duration: f64,
    #[serde(default)]
    pub side: Side,
    /// Let metaorder executions excite the same-side anonymous flow. Off by
    /// default; outputs mark runs with feedback as an extension.
    #[serde(default)]
    pub feedback: bool,
}

fn one() -> f64 {
    1.0
}

fn default_cutoff() -> f64 {
    1e-12
}

/// Parameters of a two-sided market simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub kernel: KernelSpec,
    /// Exogenous intensity μ of each side.
    pub mu: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub volume: f64,
    pub horizon: f64,
    /// Simulated time discarded before `t = 0`; defaults to 50 e-folding
    /// times of the kernel.
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub metaorder: Option<MetaorderSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: SimulationMethod,
    /// Thinning drops past events whose kernel contribution falls below this.
    #[serde(default = "default_cutoff")]
    pub history_cutoff: f64,
}

impl MarketConfig {
    pub fn new(kernel: KernelSpec, mu: f64, horizon: f64, seed: u64) -> Self {
        Self {
            kernel,
            mu,
            kappa: 1.0,
            volume: 1.0,
            horizon,
            burn_in: None,
            metaorder: None,
            seed,
            method: SimulationMethod::Thinning,
            history_cutoff: default_cutoff(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let norm = self.kernel.norm();
        if norm >= 1.0 - CRITICAL_TOL {
            return Err(Error::Criticality { norm, context: "a stationary Hawkes flow needs ∫φ < 1".into() });
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("μ must be positive, got {}", self.mu)));
        }
        if let Some(b) = self.burn_in {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::invalid(format!("burn-in must be nonnegative, got {b}")));
            }
        }
        if let Some(m) = &self.metaorder {
            if !(m.rate >= 0.0 && m.rate.is_finite()) {
                return Err(Error::invalid(format!("metaorder rate must be nonnegative, got {}", m.rate)));
            }
            if !(m.duration >= 0.0 && m.duration <= self.horizon) {
                return Err(Error::invalid(format!(
                    "metaorder duration {} must lie in [0, horizon {}]",
                    m.duration, self.horizon
                )));
            }
        }
        if !(self.history_cutoff >= 0.0) {
            return Err(Error::invalid("history cutoff must be nonnegative"));
        }
        Ok(())
    }

    pub fn burn_in_length(&self) -> f64 {
        self.burn_in.unwrap_or_else(|| 50.0 * self.kernel.e_folding_time())
    }

    /// Stationary event rate `μ/(1−∫φ)` of each side.
    pub fn stationary_rate(&self) -> f64 {
        self.mu / (1.0 - self.kernel.norm())
    }

    /// Asymptotic `Var(N_T)/T = μ/(1−∫φ)³`.
    pub fn count_variance_rate(&self) -> f64 {
        self.mu / (1.0 - self.kernel.norm()).powi(3)
    }
}

/// Provenance of a stream's random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub stream: u64,
}

/// Ordered event times of one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub side: Side,
    pub label: Label,
    /// Index of the migrant that started each event's cluster.
    pub cluster_ids: Option<Vec<u64>>,
    /// Generation within the cluster; 0 for migrants.
    pub generations: Option<Vec<u32>>,
    pub seed: SeedRecord,
}

impl EventStream {
    pub fn empty(horizon: f64, side: Side, label: Label, seed: SeedRecord) -> Self {
        Self { horizon, times: Vec::new(), side, label, cluster_ids: None, generations: None, seed }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of events in `(0, t]`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Number of events in `(a, b]`.
    pub fn count_between(&self, a: f64, b: f64) -> usize {
        self.count_until(b) - self.count_until(a)
    }

    /// Checks ordering, range and cluster causality.
    pub fn check_invariants(&self) -> Result<()> {
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("event times must be strictly increasing".into()));
        }
        if self.times.iter().any(|&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(Error::Precondition("event times must lie in [0, horizon]".into()));
        }
        if let (Some(ids), Some(gens)) = (&self.cluster_ids, &self.generations) {
            let mut seen: HashMap<u64, bool> = HashMap::new();
            for (&id, &g) in ids.iter().zip(gens) {
                let root_seen = seen.entry(id).or_insert(false);
                if g == 0 {
                    if *root_seen {
                        return Err(Error::Precondition(format!("cluster {id} has two roots")));
                    }
                    *root_seen = true;
                }
            }
            // A present root must be the first event of its cluster.
            let mut first: HashMap<u64, u32> = HashMap::new();
            for (&id, &g) in ids.iter().zip(gens) {
                first.entry(id).or_insert(g);
            }
            for (&id, &g) in ids.iter().zip(gens) {
                if g == 0 && first[&id] != 0 {
                    return Err(Error::Precondition(format!("cluster {id} root follows a descendant")));
                }
            }
        }
        Ok(())
    }

    pub fn to_table<C: Serialize>(&self, config: &C) -> Result<Table> {
        streams_table(&[self], config)
    }
}

/// Buy, sell and metaorder streams of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub buy: EventStream,
    pub sell: EventStream,
    pub metaorder: EventStream,
}

impl Market {
    /// Total buy and sell flows `(N^a + P, N^b)` or `(N^a, N^b + P)`.
    pub fn total_flows(&self) -> (Vec<f64>, Vec<f64>) {
        let merge = |a: &[f64], b: &[f64]| {
            let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
            v.sort_by(f64::total_cmp);
            v
        };
        match self.metaorder.side {
            Side::Buy => (merge(&self.buy.times, &self.metaorder.times), self.sell.times.clone()),
            Side::Sell => (self.buy.times.clone(), merge(&self.sell.times, &self.metaorder.times)),
        }
    }

    pub fn to_table<C: Serialize>(&self, config: &C) -> Result<Table> {
        streams_table(&[&self.buy, &self.sell, &self.metaorder], config)
    }
}

fn streams_table<C: Serialize>(streams: &[&EventStream], config: &C) -> Result<Table> {
    let seeds: Vec<SeedRecord> = streams.iter().map(|s| s.seed).collect();
    let header = json!({ "kind": "events", "config": config, "seeds": seeds });
    let mut rows: Vec<(f64, Vec<String>)> = Vec::new();
    for s in streams {
        for (i, &t) in s.times.iter().enumerate() {
            let cluster = s.cluster_ids.as_ref().map(|c| c[i].to_string()).unwrap_or_default();
            let side = serde_json::to_value(s.side)?.as_str().unwrap_or_default().to_string();
            let label = serde_json::to_value(s.label)?.as_str().unwrap_or_default().to_string();
            rows.push((t, vec![t.to_string(), side, cluster, label]));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut table = Table::new(&header, &["time", "side", "cluster_id", "label"])?;
    for (_, r) in rows {
        table.push_row(r);
    }
    Ok(table)
}

/// Role of a substream within one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Buy = 0,
    Sell = 1,
    Metaorder = 2,
    Auxiliary = 3,
}

/// Stream index of `(replica, role)`.
pub fn stream_index(replica: u64, role: StreamRole) -> u64 {
    replica * 4 + role as u64
}

/// Independent ChaCha20 substream for `(master, replica, role)`.
pub fn substream(master: u64, replica: u64, role: StreamRole) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream_index(replica, role));
    rng
}

#[inline]
fn exp_sample<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    // 1 − U lies in (0, 1].
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Homogeneous Poisson times on `(start, end]`.
pub fn poisson_times<R: Rng>(rate: f64, start: f64, end: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 || end <= start {
        return out;
    }
    let mut t = start;
    loop {
        t += exp_sample(rng, rate);
        if t > end {
            return out;
        }
        out.push(t);
    }
}

/// Raw simulation output on `[0, end]` before burn-in removal.
struct RawEvents {
    times: Vec<f64>,
    clusters: Option<(Vec<u64>, Vec<u32>)>,
}

/// Excitation `Σ φ(s − t_i)` maintained along increasing times `s`.
enum Excitation<'a> {
    Markov { jump: f64, rate: f64, level: f64, at: f64 },
    History { kernel: &'a KernelSpec, events: VecDeque<f64>, cutoff: f64 },
}

impl<'a> Excitation<'a> {
    fn new(kernel: &'a KernelSpec, cutoff: f64) -> Self {
        match *kernel {
            KernelSpec::Exponential { norm, rate } => Excitation::Markov { jump: norm * rate, rate, level: 0.0, at: 0.0 },
            _ => Excitation::History { kernel, events: VecDeque::new(), cutoff },
        }
    }

    /// Excitation at `s`, including events at `s`. Times must not decrease.
    fn at(&mut self, s: f64) -> f64 {
        match self {
            Excitation::Markov { rate, level, at, .. } => {
                *level *= (-*rate * (s - *at)).exp();
                *at = s;
                *level
            }
            Excitation::History { kernel, events, cutoff } => {
                while let Some(&front) = events.front() {
                    if kernel.value(s - front) < *cutoff {
                        events.pop_front();
                    } else {
                        break;
                    }
                }
                events.iter().map(|&t| kernel.value(s - t)).sum()
            }
        }
    }

    /// Registers an event at `s` (after `at(s)`).
    fn push(&mut self, s: f64) {
        match self {
            Excitation::Markov { jump, level, .. } => *level += *jump,
            Excitation::History { events, .. } => events.push_back(s),
        }
    }
}

fn thinning_raw<R: Rng>(
    kernel: &KernelSpec,
    mu: f64,
    end: f64,
    cutoff: f64,
    exogenous: &[f64],
    rng: &mut R,
) -> Result<RawEvents> {
    if !kernel.is_nonincreasing() {
        return Err(Error::Precondition("thinning with the left-limit bound needs a nonincreasing kernel".into()));
    }
    let mut exc = Excitation::new(kernel, cutoff);
    let mut times = Vec::new();
    let mut s = 0.0;
    let mut next_exo = 0;
    loop {
        let bound = mu + exc.at(s);
        let cand = s + exp_sample(rng, bound);
        if next_exo < exogenous.len() && exogenous[next_exo] <= cand.min(end) {
            // The bound is invalid past an exogenous jump; restart there.
            s = exogenous[next_exo];
            exc.at(s);
            exc.push(s);
            next_exo += 1;
            continue;
        }
        if cand > end {
            break;
        }
        s = cand;
        let lambda = mu + exc.at(s);
        if rng.random::<f64>() * bound <= lambda {
            times.push(s);
            exc.push(s);
        }
    }
    Ok(RawEvents { times, clusters: None })
}

fn branching_raw<R: Rng>(kernel: &KernelSpec, mu: f64, end: f64, exogenous: &[f64], rng: &mut R) -> Result<RawEvents> {
    let norm = kernel.norm();
    let offspring = if norm > 0.0 {
        Some(Poisson::new(norm).map_err(|e| Error::invalid(format!("offspring law: {e}")))?)
    } else {
        None
    };
    let mut events: Vec<(f64, u64, u32)> = Vec::new();
    let mut queue: VecDeque<(f64, u32)> = VecDeque::new();
    let mut grow = |root: f64, emit_root: bool, id: u64, rng: &mut R, events: &mut Vec<(f64, u64, u32)>| {
        if emit_root {
            events.push((root, id, 0));
        }
        queue.clear();
        queue.push_back((root, 0));
        while let Some((t, g)) = queue.pop_front() {
            let Some(law) = &offspring else { break };
            let children = law.sample(rng) as u64;
            for _ in 0..children {
                let child = t + kernel.delay_quantile(rng.random::<f64>());
                if child <= end {
                    events.push((child, id, g + 1));
                    queue.push_back((child, g + 1));
                }
            }
        }
    };
    let migrants = poisson_times(mu, 0.0, end, rng);
    let n_migrants = migrants.len() as u64;
    for (i, &t) in migrants.iter().enumerate() {
        grow(t, true, i as u64, rng, &mut events);
    }
    for (j, &t) in exogenous.iter().enumerate() {
        grow(t, false, n_migrants + j as u64, rng, &mut events);
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    events.dedup_by(|b, a| b.0 == a.0);
    let times = events.iter().map(|e| e.0).collect();
    let ids = events.iter().map(|e| e.1).collect();
    let gens = events.iter().map(|e| e.2).collect();
    Ok(RawEvents { times, clusters: Some((ids, gens)) })
}

fn finish_stream(raw: RawEvents, burn_in: f64, horizon: f64, side: Side, seed: SeedRecord) -> EventStream {
    let start = raw.times.partition_point(|&t| t < burn_in);
    let times: Vec<f64> = raw.times[start..].iter().map(|t| t - burn_in).filter(|&t| t <= horizon).collect();
    let kept = times.len();
    let (cluster_ids, generations) = match raw.clusters {
        Some((ids, gens)) => (Some(ids[start..start + kept].to_vec()), Some(gens[start..start + kept].to_vec())),
        None => (None, None),
    };
    // Shifting by the burn-in can merge neighbours only at the rounding level.
    let mut stream = EventStream { horizon, times, side, label: Label::Anonymous, cluster_ids, generations, seed };
    dedup_stream(&mut stream);
    stream
}

fn dedup_stream(stream: &mut EventStream) {
    let mut keep = vec![true; stream.times.len()];
    for i in 1..stream.times.len() {
        if stream.times[i] <= stream.times[i - 1] {
            keep[i] = false;
        }
    }
    if keep.iter().all(|&k| k) {
        return;
    }
    let filter = |v: &mut Vec<_>| {
        let mut it = keep.iter();
        v.retain(|_| *it.next().unwrap());
    };
    filter(&mut stream.times);
    if let Some(ids) = &mut stream.cluster_ids {
        let mut it = keep.iter();
        ids.retain(|_| *it.next().unwrap());
    }
    if let Some(gens) = &mut stream.generations {
        let mut it = keep.iter();
        gens.retain(|_| *it.next().unwrap());
    }
}

/// One side of the market with an explicit method, side and replica.
pub fn simulate_side(
    config: &MarketConfig,
    method: SimulationMethod,
    side: Side,
    replica: u64,
    exogenous: &[f64],
) -> Result<EventStream> {
    config.validate()?;
    let role = match side {
        Side::Buy => StreamRole::Buy,
        Side::Sell => StreamRole::Sell,
    };
    let mut rng = substream(config.seed, replica, role);
    let burn = config.burn_in_length();
    let end = burn + config.horizon;
    let shifted: Vec<f64> = exogenous.iter().map(|t| t + burn).collect();
    let raw = match method {
        SimulationMethod::Thinning => {
            thinning_raw(&config.kernel, config.mu, end, config.history_cutoff, &shifted, &mut rng)?
        }
        SimulationMethod::Branching => branching_raw(&config.kernel, config.mu, end, &shifted, &mut rng)?,
    };
    let seed = SeedRecord { master: config.seed, stream: stream_index(replica, role) };
    Ok(finish_stream(raw, burn, config.horizon, side, seed))
}

/// Buy-side flow by Ogata thinning.
pub fn simulate_thinning(config: &MarketConfig) -> Result<EventStream> {
    simulate_side(config, SimulationMethod::Thinning, Side::Buy, 0, &[])
}

/// Buy-side flow by the cluster construction, with cluster labels.
pub fn simulate_branching(config: &MarketConfig) -> Result<EventStream> {
    simulate_side(config, SimulationMethod::Branching, Side::Buy, 0, &[])
}

pub fn simulate_market(config: &MarketConfig) -> Result<Market> {
    simulate_market_replica(config, 0)
}

/// Independent buy and sell flows plus the labeled metaorder overlay.
pub fn simulate_market_replica(config: &MarketConfig, replica: u64) -> Result<Market> {
    config.validate()?;
    let meta_seed = SeedRecord { master: config.seed, stream: stream_index(replica, StreamRole::Metaorder) };
    let (meta_side, meta_times, feedback) = match &config.metaorder {
        Some(m) => {
            let mut rng = substream(config.seed, replica, StreamRole::Metaorder);
            (m.side, poisson_times(m.rate, 0.0, m.duration, &mut rng), m.feedback)
        }
        None => (Side::Buy, Vec::new(), false),
    };
    let excite = |side: Side| if feedback && side == meta_side { meta_times.as_slice() } else { &[] };
    let buy = simulate_side(config, config.method, Side::Buy, replica, excite(Side::Buy))?;
    let sell = simulate_side(config, config.method, Side::Sell, replica, excite(Side::Sell))?;
    let mut metaorder = EventStream::empty(config.horizon, meta_side, Label::Metaorder, meta_seed);
    metaorder.times = meta_times;
    Ok(Market { buy, sell, metaorder })
}

/// Runs `f(replica)` for `replica = 0..n` in parallel; results keep replica
/// order, so any aggregation over them is independent of the thread count.
pub fn replicate<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Compensator increments `Λ(t_i) − Λ(t_{i−1})` of a flow that started empty
/// at time 0 (`t_0 = 0`).
pub fn compensator_increments(times: &[f64], kernel: &KernelSpec, mu: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    match *kernel {
        KernelSpec::Exponential { norm, rate } => {
            let mut level = 0.0;
            for &t in times {
                let dt = t - prev;
                out.push(mu * dt + level * -(-rate * dt).exp_m1() / rate);
                level = level * (-rate * dt).exp() + norm * rate;
                prev = t;
            }
        }
        _ => {
            let mut history: VecDeque<f64> = VecDeque::new();
            for &t in times {
                while let Some(&front) = history.front() {
                    if kernel.tail_mass(prev - front) < 1e-15 {
                        history.pop_front();
                    } else {
                        break;
                    }
                }
                let excited: f64 = history.iter().map(|&s| kernel.tail_mass(prev - s) - kernel.tail_mass(t - s)).sum();
                out.push(mu * (t - prev) + excited);
                history.push_back(t);
                prev = t;
            }
        }
    }
    out
}

/// KS test of the rescaled inter-event times against Exp(1).
pub fn time_rescaling_test(times: &[f64], kernel: &KernelSpec, mu: f64, level: f64) -> Result<KsResult> {
    let inc = compensator_increments(times, kernel, mu);
    ks_one_sample(&inc, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() }, level)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn linear(values: &[f64], bins: usize) -> Self {
        if values.is_empty() {
            return Self { edges: Vec::new(), counts: Vec::new() };
        }
        let max = values.iter().fold(0.0_f64, |m, v| m.max(*v));
        let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let i = ((v / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { edges, counts }
    }
}

/// Summary of complete clusters in a labeled stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStatistics {
    /// Clusters whose migrant lies in `[0, horizon − margin]`.
    pub clusters: usize,
    pub margin: f64,
    pub mean_size: Option<MeanEstimate>,
    pub mean_duration: Option<f64>,
    /// `(size, number of clusters)`.
    pub size_histogram: Vec<(usize, usize)>,
    pub duration_histogram: Histogram,
}

/// Cluster sizes and durations. Only clusters whose migrant is in the stream
/// and arrives before `horizon − margin` are counted, so later descendants
/// cut off by the horizon do not bias the sizes.
pub fn cluster_statistics(stream: &EventStream, margin: f64) -> Result<ClusterStatistics> {
    let (Some(ids), Some(gens)) = (&stream.cluster_ids, &stream.generations) else {
        return Err(Error::Precondition("cluster statistics need cluster labels".into()));
    };
    let cutoff = stream.horizon - margin;
    // id -> (size, root time, last time)
    let mut clusters: BTreeMap<u64, (usize, f64, f64)> = BTreeMap::new();
    for ((&t, &id), &g) in stream.times.iter().zip(ids).zip(gens) {
        if g == 0 && t <= cutoff {
            clusters.insert(id, (0, t, t));
        }
    }
    for (&t, &id) in stream.times.iter().zip(ids) {
        if let Some(c) = clusters.get_mut(&id) {
            c.0 += 1;
            c.2 = c.2.max(t);
        }
    }
    let sizes: Vec<f64> = clusters.values().map(|c| c.0 as f64).collect();
    let durations: Vec<f64> = clusters.values().map(|c| c.2 - c.1).collect();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for c in clusters.values() {
        *hist.entry(c.0).or_default() += 1;
    }
    Ok(ClusterStatistics {
        clusters: sizes.len(),
        margin,
        mean_size: (!sizes.is_empty()).then(|| MeanEstimate::from_samples(&sizes)),
        mean_duration: (!durations.is_empty()).then(|| durations.iter().sum::<f64>() / durations.len() as f64),
        size_histogram: hist.into_iter().collect(),
        duration_histogram: Histogram::linear(&durations, 50),
    })
}
