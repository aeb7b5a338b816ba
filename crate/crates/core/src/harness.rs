//! Key generation, oracle verification, benchmarks and selector traces.
//!
//! All randomness comes from [`crate::rng`], so every report is a pure
//! function of the key set and the configuration it prints.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::beta::{rank_oracle, BetaError, BetaStructure};
use crate::gamma::{max_lcp, successor_oracle, BlindTrie, GammaError, GammaNode, KeyStore};
use crate::index::{prefix_range, IndexError, SuccessorIndex};
use crate::machine::{scoped_counts, OpCounts, Width, Word};
use crate::packed::bits_for;
use crate::rng;
use crate::selector::{IndexSequence, SelectorError, SelectorPlan};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error(transparent)]
    Beta(#[from] BetaError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
}

fn usage(msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Uniform,
    /// Keys scattered around a few random centres, sharing long prefixes.
    Clustered,
}

impl FromStr for Distribution {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "clustered" => Ok(Distribution::Clustered),
            other => Err(usage(format!("unknown distribution {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Gamma,
    Beta,
    Index,
}

impl FromStr for Structure {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gamma" => Ok(Structure::Gamma),
            "beta" => Ok(Structure::Beta),
            "index" => Ok(Structure::Index),
            other => Err(usage(format!("unknown structure {other:?}"))),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::Gamma => "gamma",
            Structure::Beta => "beta",
            Structure::Index => "index",
        })
    }
}

/// `count` distinct keys in ascending order.
pub fn generate_keys(count: usize, width: Width, seed: u64, dist: Distribution) -> Result<Vec<Word>, HarnessError> {
    if count == 0 {
        return Err(usage("key count must be at least 1"));
    }
    if width.bits() < 64 && count as u128 > 1u128 << width.bits() {
        return Err(usage(format!(
            "only {} distinct {width}-bit keys exist",
            1u128 << width.bits()
        )));
    }
    let mut g = rng::seeded(seed);
    let mut set = BTreeSet::new();
    match dist {
        Distribution::Uniform => {
            while set.len() < count {
                set.insert(rng::word(&mut g, width));
            }
        }
        Distribution::Clustered => {
            let clusters = ((count as f64).sqrt().ceil() as usize).max(1);
            let spread = (bits_for(count as u64) as usize + 4).min(width.bits());
            let low = Word::from_bits(width, (0..width.bits()).map(|i| i >= width.bits() - spread));
            let centres: Vec<Word> = (0..clusters).map(|_| rng::word(&mut g, width)).collect();
            while set.len() < count {
                let c = &centres[g.gen_range(0..clusters)];
                set.insert(c ^ &(&rng::word(&mut g, width) & &low));
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// One hex word per line.
pub fn format_keys(keys: &[Word]) -> String {
    let mut s = String::new();
    for k in keys {
        let _ = writeln!(s, "{}", k.to_hex());
    }
    s
}

fn width_for_digits(digits: usize) -> Option<Width> {
    Width::ALL.into_iter().find(|w| w.bits() / 4 == digits)
}

/// Parses a key file: one hex word per line, strictly ascending. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_keys(text: &str) -> Result<Vec<Word>, HarnessError> {
    let mut keys: Vec<Word> = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| HarnessError::Parse { line: i + 1, msg };
        let w = match width {
            Some(w) => w,
            None => {
                let w = width_for_digits(line.len())
                    .ok_or_else(|| err(format!("{} hex digits match no supported width", line.len())))?;
                width = Some(w);
                w
            }
        };
        let key = Word::from_hex(w, line).map_err(|e| err(e.to_string()))?;
        if keys.last().is_some_and(|prev| *prev >= key) {
            return Err(err("keys must be sorted and distinct".into()));
        }
        keys.push(key);
    }
    if keys.is_empty() {
        return Err(HarnessError::Parse {
            line: 0,
            msg: "no keys".into(),
        });
    }
    Ok(keys)
}

/// Parses one query word, in hex at the key width.
pub fn parse_word(width: Width, s: &str) -> Result<Word, HarnessError> {
    Word::from_hex(width, s).map_err(|e| usage(format!("query {s:?}: {e}")))
}

#[derive(Debug, Clone)]
pub struct Query {
    pub x: Word,
    /// Prefix length used by weak prefix checks.
    pub prefix_len: usize,
}

fn near(x: &Word, up: bool) -> Word {
    let one = Word::from_u64(x.width(), 1);
    match up {
        true if *x != Word::ones(x.width()) => x.wrapping_add(&one),
        false if !x.is_zero_raw() => x.wrapping_sub(&one),
        _ => x.clone(),
    }
}

/// `count` random queries: uniform words, keys and their neighbours, and
/// words sharing a random-length prefix with a key.
pub fn random_queries(keys: &[Word], count: usize, seed: u64) -> Vec<Query> {
    let width = keys[0].width();
    let w = width.bits();
    let mut g = rng::stream(seed, 1);
    (0..count)
        .map(|_| {
            let key = &keys[g.gen_range(0..keys.len())];
            let x = match g.gen_range(0..4) {
                0 => rng::word(&mut g, width),
                1 => key.clone(),
                2 => near(key, g.gen()),
                _ => {
                    let keep = g.gen_range(0..=w);
                    let tail = Word::from_bits(width, (0..w).map(|i| i >= keep));
                    &(key & &!&tail) | &(&rng::word(&mut g, width) & &tail)
                }
            };
            Query {
                x,
                prefix_len: g.gen_range(0..=w),
            }
        })
        .collect()
}

/// Every key and its two neighbours.
pub fn boundary_queries(keys: &[Word]) -> Vec<Query> {
    let w = keys[0].bits();
    keys.iter()
        .flat_map(|k| [near(k, false), k.clone(), near(k, true)])
        .map(|x| Query { x, prefix_len: w })
        .collect()
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub structure: Structure,
    pub queries: usize,
    pub seed: u64,
    /// Flip one bit of a selector plan's first word before querying.
    pub fault: bool,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub query: String,
    pub check: String,
    pub expected: String,
    pub got: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub structure: String,
    pub width: usize,
    pub keys: usize,
    pub random_queries: usize,
    pub boundary_queries: usize,
    pub seed: u64,
    pub fault: Option<String>,
    pub checks: u64,
    pub mismatches: u64,
    pub fallbacks: Option<u64>,
    pub fallback_rate: Option<f64>,
    pub max_key_probes: u64,
    pub max_iterations: Option<u64>,
    pub multiplications: u64,
    pub counterexample: Option<Counterexample>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "structure        {}", self.structure);
        let _ = writeln!(s, "width            {}", self.width);
        let _ = writeln!(s, "keys             {}", self.keys);
        let _ = writeln!(s, "random queries   {}", self.random_queries);
        let _ = writeln!(s, "boundary queries {}", self.boundary_queries);
        let _ = writeln!(s, "seed             {}", self.seed);
        if let Some(f) = &self.fault {
            let _ = writeln!(s, "fault            {f}");
        }
        let _ = writeln!(s, "checks           {}", self.checks);
        let _ = writeln!(s, "mismatches       {}", self.mismatches);
        if let (Some(n), Some(r)) = (self.fallbacks, self.fallback_rate) {
            let _ = writeln!(s, "fallbacks        {n} (rate {r:.6})");
        }
        let _ = writeln!(s, "max key probes   {}", self.max_key_probes);
        if let Some(i) = self.max_iterations {
            let _ = writeln!(s, "max iterations   {i}");
        }
        let _ = writeln!(s, "multiplications  {}", self.multiplications);
        if let Some(c) = &self.counterexample {
            let _ = writeln!(s, "counterexample   {} x={}", c.check, c.query);
            let _ = writeln!(s, "  expected       {}", c.expected);
            let _ = writeln!(s, "  got            {}", c.got);
        }
        let _ = writeln!(s, "result           {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

#[derive(Debug, Default, Clone)]
struct Tally {
    checks: u64,
    mismatches: u64,
    fallbacks: u64,
    max_key_probes: u64,
    max_iterations: u64,
    multiplications: u64,
    first: Option<(usize, Counterexample)>,
}

impl Tally {
    fn check(&mut self, at: usize, x: &Word, name: &str, expected: String, got: String) {
        self.checks += 1;
        if expected != got {
            self.mismatches += 1;
            if self.first.as_ref().is_none_or(|(i, _)| at < *i) {
                self.first = Some((
                    at,
                    Counterexample {
                        query: x.to_hex(),
                        check: name.into(),
                        expected,
                        got,
                    },
                ));
            }
        }
    }

    fn bound(&mut self, at: usize, x: &Word, name: &str, limit: u64, value: u64) {
        if value > limit {
            self.check(at, x, name, format!("<= {limit}"), value.to_string());
        } else {
            self.checks += 1;
        }
    }

    fn counts(&mut self, c: &OpCounts) {
        self.max_key_probes = self.max_key_probes.max(c.key_probes);
        self.multiplications += c.multiplications;
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.checks += o.checks;
        self.mismatches += o.mismatches;
        self.fallbacks += o.fallbacks;
        self.max_key_probes = self.max_key_probes.max(o.max_key_probes);
        self.max_iterations = self.max_iterations.max(o.max_iterations);
        self.multiplications += o.multiplications;
        self.first = match (self.first, o.first) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn show<T: fmt::Debug>(v: T) -> String {
    format!("{v:?}")
}

fn show_hit(v: &Option<(usize, Word)>) -> String {
    match v {
        Some((r, k)) => format!("rank {r} key {}", k.to_hex()),
        None => "none".into(),
    }
}

/// `⌈log2 k⌉`
fn ceil_log2(k: usize) -> u64 {
    (usize::BITS - k.saturating_sub(1).leading_zeros()) as u64
}

enum Subject {
    Gamma {
        nodes: Vec<GammaNode>,
        tries: Vec<BlindTrie>,
    },
    Beta(Box<BetaStructure>),
    Index(Box<SuccessorIndex>),
}

fn chunk_of(keys: &[Word], x: &Word) -> usize {
    let m = keys[0].width().blocks();
    let chunks = keys.len().div_ceil(m);
    (rank_oracle(keys, x).saturating_sub(1) / m).min(chunks - 1)
}

impl Subject {
    fn run(&self, keys: &[Word], at: usize, q: &Query, t: &mut Tally) {
        let x = &q.x;
        match self {
            Subject::Gamma { nodes, tries } => {
                let m = keys[0].width().blocks();
                let c = chunk_of(keys, x);
                let part = &keys[c * m..(c * m + m).min(keys.len())];
                let (fast, counts) = scoped_counts(|| nodes[c].search(x).expect("width checked"));
                t.counts(&counts);
                let slow = tries[c].blind_search_slow(x);
                t.check(at, x, "fast blind search", show(slow), show(fast.rank));
                let best = part.get(fast.rank.wrapping_sub(1)).map(|k| k.lcp_raw(x));
                t.check(at, x, "longest common prefix", show(Some(max_lcp(part, x))), show(best));
                let iterations = fast.iterations as u64;
                t.max_iterations = t.max_iterations.max(iterations);
                t.bound(at, x, "search iterations", ceil_log2(part.len()) + 1, iterations);
                let (succ, counts) =
                    scoped_counts(|| nodes[c].successor(KeyStore::new(part), x).expect("width checked"));
                t.counts(&counts);
                t.check(
                    at,
                    x,
                    "gamma successor",
                    show_hit(&successor_oracle(part, x)),
                    show_hit(&succ),
                );
                t.bound(at, x, "key probes", 3, counts.key_probes);
            }
            Subject::Beta(beta) => {
                let (out, counts) = scoped_counts(|| beta.query(KeyStore::new(keys), x).expect("width checked"));
                t.counts(&counts);
                t.fallbacks += out.fell_back as u64;
                t.check(at, x, "beta rank", show(rank_oracle(keys, x)), show(out.rank));
            }
            Subject::Index(idx) => {
                let (succ, counts) = scoped_counts(|| idx.successor(x).expect("width checked"));
                t.counts(&counts);
                t.check(
                    at,
                    x,
                    "index successor",
                    show_hit(&successor_oracle(keys, x)),
                    show_hit(&succ),
                );
                let (range, counts) = scoped_counts(|| idx.weak_prefix_search(x, q.prefix_len).expect("width checked"));
                t.counts(&counts);
                let want = prefix_range(keys, x, q.prefix_len);
                t.check(
                    at,
                    x,
                    &format!("weak prefix search len {}", q.prefix_len),
                    show(want),
                    show(range),
                );
            }
        }
    }
}

/// Flips the first set bit of the position mask in the first selector plan.
fn inject_fault(nodes: &mut [GammaNode]) -> Result<String, HarnessError> {
    for (c, node) in nodes.iter_mut().enumerate() {
        if let Some(plan) = node.plan_mut() {
            let mut words = plan.words_mut();
            let mask = &mut words[0];
            let bit = mask.ones_positions()[0];
            mask.set_bit(bit, false);
            return Ok(format!("chunk {c} selector word 0 bit {bit} cleared"));
        }
    }
    Err(usage("no selector plan to corrupt: every chunk holds a single key"))
}

/// Builds the structure and checks it against the oracles on boundary and random queries.
pub fn verify(keys: &[Word], cfg: &VerifyConfig) -> Result<VerifyReport, HarnessError> {
    let width = keys[0].width();
    let m = width.blocks();
    let mut fault = None;
    let subject = match cfg.structure {
        Structure::Gamma => {
            let mut nodes = keys.chunks(m).map(GammaNode::build).collect::<Result<Vec<_>, _>>()?;
            let tries = keys.chunks(m).map(BlindTrie::build).collect::<Result<Vec<_>, _>>()?;
            if cfg.fault {
                fault = Some(inject_fault(&mut nodes)?);
            }
            Subject::Gamma { nodes, tries }
        }
        Structure::Beta => {
            if cfg.fault {
                return Err(usage("fault injection targets selector plans; use gamma or index"));
            }
            Subject::Beta(Box::new(BetaStructure::build(keys, cfg.seed)?))
        }
        Structure::Index => {
            let mut idx = SuccessorIndex::build(keys)?;
            if cfg.fault {
                let chunks = idx.gammas().len();
                let mut nodes: Vec<GammaNode> = (0..chunks).map(|c| idx.gammas()[c].clone()).collect();
                let note = inject_fault(&mut nodes)?;
                for (c, node) in nodes.into_iter().enumerate() {
                    *idx.gamma_mut(c) = node;
                }
                fault = Some(note);
            }
            Subject::Index(Box::new(idx))
        }
    };
    let boundary = match cfg.structure {
        Structure::Beta => Vec::new(),
        _ => boundary_queries(keys),
    };
    let mut queries = boundary.clone();
    queries.extend(random_queries(keys, cfg.queries, cfg.seed));

    let jobs = cfg.jobs.max(1);
    let per = queries.len().div_ceil(jobs).max(1);
    let tally = std::thread::scope(|s| {
        let handles: Vec<_> = queries
            .chunks(per)
            .enumerate()
            .map(|(j, part)| {
                let subject = &subject;
                s.spawn(move || {
                    let mut t = Tally::default();
                    for (i, q) in part.iter().enumerate() {
                        subject.run(keys, j * per + i, q, &mut t);
                    }
                    t
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("verify worker panicked"))
            .fold(Tally::default(), Tally::merge)
    });

    let is_beta = cfg.structure == Structure::Beta;
    Ok(VerifyReport {
        structure: cfg.structure.to_string(),
        width: width.bits(),
        keys: keys.len(),
        random_queries: cfg.queries,
        boundary_queries: boundary.len(),
        seed: cfg.seed,
        fault,
        checks: tally.checks,
        mismatches: tally.mismatches,
        fallbacks: is_beta.then_some(tally.fallbacks),
        fallback_rate: is_beta.then(|| tally.fallbacks as f64 / queries.len().max(1) as f64),
        max_key_probes: tally.max_key_probes,
        max_iterations: (cfg.structure == Structure::Gamma).then_some(tally.max_iterations),
        multiplications: tally.multiplications,
        counterexample: tally.first.map(|(_, c)| c),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSettings {
    pub width: usize,
    pub keys: usize,
    pub queries: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MeanCounts {
    pub shifts: f64,
    pub boolean_ops: f64,
    pub arith_ops: f64,
    pub comparisons: f64,
    pub multiplications: f64,
    pub operations: f64,
    pub index_probes: f64,
    pub key_probes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub name: String,
    pub samples: usize,
    pub mean: MeanCounts,
    pub max: OpCounts,
    pub max_operations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_iterations: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeStats {
    pub key_bits: usize,
    pub index_extra_bits: usize,
    pub index_extra_per_key_log_w: f64,
    pub gamma_nodes: usize,
    pub gamma_max_words: usize,
    pub beta_bits: usize,
    pub beta_per_key_log_w_plus_log_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub name: String,
    pub width: usize,
    pub samples: usize,
    pub mean_operations: f64,
    pub max_operations: u64,
    pub multiplications: u64,
    pub ratio_to_w16: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: BenchSettings,
    pub classes: Vec<ClassStats>,
    pub sizes: SizeStats,
    pub scaling: Vec<ScalingRow>,
}

#[derive(Default)]
struct Acc {
    n: usize,
    sum: OpCounts,
    max: OpCounts,
    max_ops: u64,
    iterations: usize,
    fallbacks: usize,
}

impl Acc {
    fn add(&mut self, c: OpCounts) {
        self.n += 1;
        self.sum += c;
        self.max = self.max.max(&c);
        self.max_ops = self.max_ops.max(c.operations());
    }

    fn mean_ops(&self) -> f64 {
        self.sum.operations() as f64 / self.n.max(1) as f64
    }

    fn finish(self, name: &str, iterations: bool, fallbacks: bool) -> ClassStats {
        let d = self.n.max(1) as f64;
        let s = self.sum;
        ClassStats {
            name: name.into(),
            samples: self.n,
            mean: MeanCounts {
                shifts: s.shifts as f64 / d,
                boolean_ops: s.boolean_ops as f64 / d,
                arith_ops: s.arith_ops as f64 / d,
                comparisons: s.comparisons as f64 / d,
                multiplications: s.multiplications as f64 / d,
                operations: s.operations() as f64 / d,
                index_probes: s.index_probes as f64 / d,
                key_probes: s.key_probes as f64 / d,
            },
            max: self.max,
            max_operations: self.max_ops,
            mean_iterations: iterations.then(|| self.iterations as f64 / d),
            fallback_rate: fallbacks.then(|| self.fallbacks as f64 / d),
        }
    }
}

/// The 16-bit example: `w = 16`, `I = <0, 15, 12, 15>`.
pub fn example_selector() -> (SelectorPlan, Word) {
    let seq = IndexSequence::new(vec![0, 15, 12, 15], Width::W16).expect("valid sequence");
    let plan = SelectorPlan::preprocess(&seq).expect("valid plan");
    (plan, Word::from_bin_str(Width::W16, "1000110111100011"))
}

fn random_sequence(g: &mut impl Rng, width: Width, k: usize) -> IndexSequence {
    let entries = (0..k).map(|_| g.gen_range(0..width.bits())).collect();
    IndexSequence::new(entries, width).expect("in range")
}

/// Mean selector operations on random sequences of length 1..=4, per width.
pub fn selector_scaling(samples: usize, seed: u64) -> Vec<ScalingRow> {
    let mut rows = Vec::new();
    let (plan, x) = example_selector();
    let (_, c) = scoped_counts(|| plan.select(&x).expect("width matches"));
    let mut base = 0.0;
    for (s, width) in [Width::W16, Width::W256].into_iter().enumerate() {
        let mut g = rng::stream(seed, 10 + s as u64);
        let mut acc = Acc::default();
        for i in 0..samples {
            let plan = SelectorPlan::preprocess(&random_sequence(&mut g, width, 1 + i % 4)).expect("valid plan");
            let x = rng::word(&mut g, width);
            acc.add(scoped_counts(|| plan.select(&x).expect("width matches")).1);
        }
        if width == Width::W16 {
            base = acc.mean_ops();
        }
        rows.push(ScalingRow {
            name: "selector k=1..4".into(),
            width: width.bits(),
            samples: acc.n,
            mean_operations: acc.mean_ops(),
            max_operations: acc.max_ops,
            multiplications: acc.sum.multiplications,
            ratio_to_w16: acc.mean_ops() / base,
        });
    }
    rows.insert(
        0,
        ScalingRow {
            name: "example I=<0,15,12,15>".into(),
            width: 16,
            samples: 1,
            mean_operations: c.operations() as f64,
            max_operations: c.operations(),
            multiplications: c.multiplications,
            ratio_to_w16: c.operations() as f64 / base,
        },
    );
    rows
}

/// Instruction and probe statistics for every query class on `keys`.
pub fn bench(keys: &[Word], queries: usize, seed: u64) -> Result<BenchReport, HarnessError> {
    let width = keys[0].width();
    let m = width.blocks();
    let idx = SuccessorIndex::build(keys)?;
    let beta = BetaStructure::build(keys, seed)?;
    let qs = random_queries(keys, queries, seed);
    let store = KeyStore::new(keys);

    let mut sel = Acc::default();
    let mut search = Acc::default();
    let mut succ = Acc::default();
    let mut beta_acc = Acc::default();
    let mut index_acc = Acc::default();
    let mut prefix = Acc::default();
    for q in &qs {
        let x = &q.x;
        let c = chunk_of(keys, x);
        let node = &idx.gammas()[c];
        let part = KeyStore::new(&keys[c * m..(c * m + m).min(keys.len())]);
        if let Some(plan) = node.plan() {
            sel.add(scoped_counts(|| plan.select(x).expect("width matches")).1);
        }
        let (out, cnt) = scoped_counts(|| node.search(x).expect("width matches"));
        search.add(cnt);
        search.iterations += out.iterations;
        succ.add(scoped_counts(|| node.successor(part, x).expect("width matches")).1);
        let (out, cnt) = scoped_counts(|| beta.query(store, x).expect("width matches"));
        beta_acc.add(cnt);
        beta_acc.fallbacks += out.fell_back as usize;
        index_acc.add(scoped_counts(|| idx.successor(x).expect("width matches")).1);
        prefix.add(scoped_counts(|| idx.weak_prefix_search(x, q.prefix_len).expect("width matches")).1);
    }
    let n = keys.len();
    let log_w = width.log() as f64;
    let sizes = SizeStats {
        key_bits: n * width.bits(),
        index_extra_bits: idx.extra_bits(),
        index_extra_per_key_log_w: idx.extra_bits() as f64 / (n as f64 * log_w),
        gamma_nodes: idx.gammas().len(),
        gamma_max_words: idx.gammas().iter().map(|g| g.word_count()).max().unwrap_or(0),
        beta_bits: beta.index_bits(),
        beta_per_key_log_w_plus_log_n: beta.index_bits() as f64 / (n as f64 * (log_w + (n as f64).log2().max(1.0))),
    };
    Ok(BenchReport {
        config: BenchSettings {
            width: width.bits(),
            keys: n,
            queries,
            seed,
        },
        classes: vec![
            sel.finish("selector", false, false),
            search.finish("gamma search", true, false),
            succ.finish("gamma successor", false, false),
            beta_acc.finish("beta rank", false, true),
            index_acc.finish("index successor", false, false),
            prefix.finish("weak prefix search", false, false),
        ],
        sizes,
        scaling: selector_scaling(queries.clamp(1, 2000), seed),
    })
}

impl BenchReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "width {}  keys {}  queries {}  seed {}",
            c.width, c.keys, c.queries, c.seed
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<20} {:>8} {:>10} {:>8} {:>8} {:>8} {:>6} {:>9}",
            "class", "samples", "mean ops", "max ops", "idx prb", "key prb", "mults", "fallback"
        );
        for k in &self.classes {
            let _ = writeln!(
                s,
                "{:<20} {:>8} {:>10.2} {:>8} {:>8.2} {:>8.2} {:>6} {:>9}",
                k.name,
                k.samples,
                k.mean.operations,
                k.max_operations,
                k.mean.index_probes,
                k.mean.key_probes,
                k.max.multiplications,
                k.fallback_rate.map_or("-".into(), |r| format!("{r:.5}"))
            );
        }
        let z = &self.sizes;
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "index extra bits {} ({:.2} per key per log w), {} nodes of at most {} words",
            z.index_extra_bits, z.index_extra_per_key_log_w, z.gamma_nodes, z.gamma_max_words
        );
        let _ = writeln!(
            s,
            "beta bits {} ({:.2} per key per log w + log n)",
            z.beta_bits, z.beta_per_key_log_w_plus_log_n
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<18} {:>6} {:>8} {:>10} {:>8} {:>6} {:>6}",
            "selector scaling", "width", "samples", "mean ops", "max ops", "mults", "ratio"
        );
        for r in &self.scaling {
            let _ = writeln!(
                s,
                "{:<18} {:>6} {:>8} {:>10.2} {:>8} {:>6} {:>6.3}",
                r.name, r.width, r.samples, r.mean_operations, r.max_operations, r.multiplications, r.ratio_to_w16
            );
        }
        s
    }
}

/// Per-phase snapshots of one selector run.
pub fn trace(seq: &IndexSequence, x: &Word) -> Result<String, HarnessError> {
    let plan = SelectorPlan::preprocess(seq)?;
    let (t, counts) = scoped_counts(|| plan.select_traced(x));
    let t = t?;
    let group = x.width().log();
    let mut s = String::new();
    let _ = writeln!(s, "w {}  I {:?}", x.bits(), seq.entries());
    let _ = writeln!(s, "input    {}", x.to_bin_string(group));
    for (phase, (xs, mask)) in t.x.iter().zip(&t.mask).enumerate() {
        let _ = writeln!(s, "phase {phase}  x {}", xs.to_bin_string(group));
        let _ = writeln!(s, "         m {}", mask.to_bin_string(group));
    }
    let _ = writeln!(s, "output   {}", t.output().to_bin_string(group));
    let _ = writeln!(s, "expected {}", seq.extract_naive(x).to_bin_string(group));
    let _ = writeln!(
        s,
        "operations {}  multiplications {}  index probes {}",
        counts.operations(),
        counts.multiplications,
        counts.index_probes
    );
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(structure: Structure, fault: bool, jobs: usize) -> VerifyConfig {
        VerifyConfig {
            structure,
            queries: 400,
            seed: 7,
            fault,
            jobs,
        }
    }

    #[test]
    fn generated_keys_are_sorted_and_repeatable() {
        for dist in [Distribution::Uniform, Distribution::Clustered] {
            let a = generate_keys(500, Width::W256, 3, dist).unwrap();
            assert_eq!(a.len(), 500);
            assert!(a.windows(2).all(|p| p[0] < p[1]));
            assert_eq!(a, generate_keys(500, Width::W256, 3, dist).unwrap());
            assert_eq!(parse_keys(&format_keys(&a)).unwrap(), a);
        }
        assert_eq!(
            generate_keys(1 << 16, Width::W16, 1, Distribution::Uniform)
                .unwrap()
                .len(),
            1 << 16
        );
        assert!(generate_keys((1 << 16) + 1, Width::W16, 1, Distribution::Uniform).is_err());
        assert!(generate_keys(0, Width::W16, 1, Distribution::Uniform).is_err());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = parse_keys("0001\n0003\n0002\n").unwrap_err();
        assert!(matches!(e, HarnessError::Parse { line: 3, .. }));
        let e = parse_keys("# keys\n0001\nzz01\n").unwrap_err();
        assert!(matches!(e, HarnessError::Parse { line: 3, .. }));
        let e = parse_keys("001\n").unwrap_err();
        assert!(matches!(e, HarnessError::Parse { line: 1, .. }));
    }

    #[test]
    fn verify_passes_and_detects_faults() {
        for width in [Width::W16, Width::W256] {
            let keys = generate_keys(300, width, 5, Distribution::Clustered).unwrap();
            for s in [Structure::Gamma, Structure::Beta, Structure::Index] {
                let r = verify(&keys, &cfg(s, false, 1)).unwrap();
                assert!(r.passed(), "{}", r.render());
                assert_eq!(r.multiplications == 0, s != Structure::Beta);
            }
            for s in [Structure::Gamma, Structure::Index] {
                let r = verify(&keys, &cfg(s, true, 1)).unwrap();
                assert!(!r.passed(), "{s} w={width}");
                assert!(r.counterexample.is_some());
            }
            assert!(verify(&keys, &cfg(Structure::Beta, true, 1)).is_err());
        }
    }

    #[test]
    fn sharded_verify_matches_serial() {
        let keys = generate_keys(200, Width::W256, 6, Distribution::Uniform).unwrap();
        for fault in [false, true] {
            let one = verify(&keys, &cfg(Structure::Index, fault, 1)).unwrap();
            let four = verify(&keys, &cfg(Structure::Index, fault, 4)).unwrap();
            assert_eq!(one, four);
        }
    }

    #[test]
    fn bench_is_deterministic() {
        let keys = generate_keys(200, Width::W16, 8, Distribution::Uniform).unwrap();
        let a = bench(&keys, 300, 2).unwrap();
        let b = bench(&keys, 300, 2).unwrap();
        assert_eq!(a.to_toml(), b.to_toml());
        assert_eq!(a.render(), b.render());
        assert!(a.scaling.iter().all(|r| r.multiplications == 0));
        assert!(a
            .classes
            .iter()
            .filter(|c| c.name != "beta rank")
            .all(|c| c.max.multiplications == 0));
    }

    #[test]
    fn trace_of_default_example() {
        let (plan, x) = example_selector();
        let seq = IndexSequence::new(vec![0, 15, 12, 15], Width::W16).unwrap();
        let text = trace(&seq, &x).unwrap();
        assert!(text.contains("output   1101 0000 0000 0000"));
        assert!(text.contains("multiplications 0"));
        assert_eq!(plan.k(), 4);
    }
}
