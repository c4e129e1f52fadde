//! Seeded random generation.
//!
//! [`RandomSource`] wraps ChaCha8 keyed by a 64-bit seed. Substream `k` of a
//! seed uses the same key with the generator's stream counter set to `k`, so
//! replicate `k` of an experiment draws the same numbers no matter which
//! worker runs it or how many workers there are.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chains::TransitionKernel;
use crate::error::{Error, Result};
use crate::space::{ensure_same, Distribution, StateSpace, TargetSet};

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    /// Independent stream `stream` derived from `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Inverse-CDF sampler over canonical index order.
#[derive(Debug, Clone)]
pub struct Categorical {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    pub fn new(mass: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = mass
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = mass.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self { cumulative, last_positive }
    }

    pub fn draw(&self, rng: &mut RandomSource) -> usize {
        let u = rng.uniform();
        let i = self.cumulative.partition_point(|&c| c <= u);
        // u can exceed the rounded total by an ulp
        i.min(self.last_positive)
    }
}

/// Draws `X_1..X_n` together with a provenance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    space: Arc<StateSpace>,
    draws: Vec<usize>,
    origin: String,
    seed: Option<u64>,
}

impl SampleSet {
    pub fn new(space: Arc<StateSpace>, draws: Vec<usize>, origin: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        if let Some(&bad) = draws.iter().find(|&&d| d >= space.size()) {
            return Err(Error::OutOfRange { value: bad as f64, range: format!("[0, {})", space.size()) });
        }
        Ok(Self { space, draws, origin: origin.into(), seed })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn draws(&self) -> &[usize] {
        &self.draws
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Occurrence count of every state.
    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.space.size()];
        self.draws.iter().for_each(|&d| c[d] += 1);
        c
    }

    pub fn hits(&self, a: &TargetSet) -> u64 {
        self.draws.iter().filter(|&&d| a.contains(d)).count() as u64
    }

    /// Concatenation; the origin tags are joined with `+`.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        ensure_same(&self.space, &other.space)?;
        let mut draws = self.draws.clone();
        draws.extend_from_slice(&other.draws);
        Ok(SampleSet { space: self.space.clone(), draws, origin: format!("{}+{}", self.origin, other.origin), seed: None })
    }

    /// Text form: a `#` header carrying `m`, seed and origin, then one state
    /// index per line.
    pub fn to_text(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        let mut out = format!("# m={} seed={} origin={}\n", self.space.size(), seed, self.origin);
        for d in &self.draws {
            out.push_str(&d.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(space: Arc<StateSpace>, text: &str) -> Result<SampleSet> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty sample file".into()))?;
        let header = header.strip_prefix('#').ok_or_else(|| Error::Parse("missing '#' header".into()))?;
        let (mut m, mut seed, mut origin) = (None, None, String::new());
        let mut rest = header.trim();
        // origin is last and may contain spaces
        while let Some((key, tail)) = rest.split_once('=') {
            let key = key.trim();
            if key == "origin" {
                origin = tail.to_string();
                break;
            }
            let (val, after) = tail.split_once(' ').unwrap_or((tail, ""));
            match key {
                "m" => m = Some(val.parse::<usize>().map_err(|e| Error::Parse(format!("m: {e}")))?),
                "seed" if val == "none" => seed = None,
                "seed" => seed = Some(val.parse::<u64>().map_err(|e| Error::Parse(format!("seed: {e}")))?),
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
            rest = after.trim_start();
        }
        if m != Some(space.size()) {
            return Err(Error::Parse(format!("header m = {m:?} does not match space size {}", space.size())));
        }
        let draws = lines
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.parse::<usize>().map_err(|e| Error::Parse(format!("{l:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        SampleSet::new(space, draws, origin, seed)
    }
}

pub fn sample_iid(p: &Distribution, n: usize, rng: &mut RandomSource) -> SampleSet {
    let cat = Categorical::new(p.mass());
    let draws = (0..n).map(|_| cat.draw(rng)).collect();
    SampleSet { space: p.space().clone(), draws, origin: "iid".into(), seed: Some(rng.seed()) }
}

/// Frequency vector of a nonempty sample.
pub fn empirical_distribution(s: &SampleSet) -> Result<Distribution> {
    if s.is_empty() {
        return Err(Error::InvalidDistribution("empty sample".into()));
    }
    let n = s.len() as f64;
    Distribution::new(s.space.clone(), s.counts().into_iter().map(|c| c as f64 / n).collect())
}

/// Row samplers for a kernel, reusable across many trajectories.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    rows: Vec<Categorical>,
    start: Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainOutcome {
    /// `X_{t ∧ T}`.
    pub final_state: usize,
    /// `T` when the target was entered within `t` steps.
    pub hit_time: Option<u64>,
}

impl ChainSampler {
    pub fn new(kernel: &TransitionKernel, start: &Distribution) -> Result<Self> {
        ensure_same(kernel.space(), start.space())?;
        let m = kernel.space().size();
        let rows = (0..m).map(|i| Categorical::new(&kernel.rows().row(i).iter().copied().collect::<Vec<_>>())).collect();
        Ok(Self { rows, start: Categorical::new(start.mass()) })
    }

    pub fn run(&self, t: u64, stop_on: Option<&TargetSet>, rng: &mut RandomSource) -> ChainOutcome {
        let mut x = self.start.draw(rng);
        for step in 0..=t {
            if let Some(a) = stop_on {
                if a.contains(x) {
                    return ChainOutcome { final_state: x, hit_time: Some(step) };
                }
            }
            if step == t {
                break;
            }
            x = self.rows[x].draw(rng);
        }
        ChainOutcome { final_state: x, hit_time: None }
    }
}

/// Draw `X_0 ~ start`, run up to `t` steps, halting on first entry into
/// `stop_on` when given.
pub fn simulate_chain(
    kernel: &TransitionKernel,
    start: &Distribution,
    t: u64,
    stop_on: Option<&TargetSet>,
    rng: &mut RandomSource,
) -> Result<ChainOutcome> {
    if let Some(a) = stop_on {
        ensure_same(kernel.space(), a.space())?;
    }
    Ok(ChainSampler::new(kernel, start)?.run(t, stop_on, rng))
}
