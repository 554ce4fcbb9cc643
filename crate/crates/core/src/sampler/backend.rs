//! Chat backends: the trait the collector drives, plus a seeded mock.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use thiserror::Error;

use crate::corpus::Vad;
use crate::dist::CategoricalDistribution;
use crate::labels::LabelSpace;
use crate::seed::SeedHasher;

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    /// Tuple identity, for backends that key on it (the mock does).
    pub text_id: String,
    pub sample_index: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("no planted response for text {0}")]
    NotPlanted(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend reply: {0}")]
    Reply(String),
}

pub trait ChatBackend: Send + Sync {
    /// Return the assistant message text.
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// What the mock answers for one text.
#[derive(Debug, Clone, PartialEq)]
pub enum Planted {
    /// Each response names one label drawn from the distribution.
    Distribution(CategoricalDistribution),
    /// Each response is this label set verbatim.
    LabelSet(BTreeSet<usize>),
    /// Each response is this triple plus noise of sd `0.25 · temperature`,
    /// clamped to the rating scale.
    Vad(Vad),
}

const CATEGORICAL_GARBAGE: [&str; 6] = [
    "I think the emotion here is joy.",
    "[\"happiness\"]",
    "[]",
    "[\"joy\"",
    "{\"labels\": [\"joy\"]}",
    "",
];

const VAD_GARBAGE: [&str; 5] = [
    "V=3, A=2, D=4",
    "{\"V\": 3.0, \"A\": 2.0}",
    "{\"V\": 7.5, \"A\": 2.0, \"D\": 3.0}",
    "[3.0, 2.0, 4.0]",
    "{\"V\": 3.0, \"A\": 2.0, \"D\":",
];

/// Deterministic stand-in for a model. Every response depends only on
/// `(seed, text_id, temperature, sample_index)`.
pub struct MockBackend {
    seed: u64,
    space: LabelSpace,
    planted: HashMap<String, Planted>,
    garbage_rate: f64,
    transient_failures: usize,
    failures_seen: Mutex<HashMap<(String, u64, u32), usize>>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(seed: u64, space: LabelSpace, planted: HashMap<String, Planted>, garbage_rate: f64) -> Self {
        assert!(
            (0.0..1.0).contains(&garbage_rate),
            "garbage_rate must lie in [0, 1), got {garbage_rate}"
        );
        Self {
            seed,
            space,
            planted,
            garbage_rate,
            transient_failures: 0,
            failures_seen: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Fail the first `n` calls of every tuple with a transport error.
    pub fn with_transient_failures(mut self, n: usize) -> Self {
        self.transient_failures = n;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn render(&self, planted: &Planted, rng: &mut impl Rng, temperature: f64) -> String {
        let names = |set: &mut dyn Iterator<Item = usize>| -> String {
            let names: Vec<&str> = set.map(|k| self.space.name(k).expect("planted label in space")).collect();
            serde_json::to_string(&names).expect("strings serialise")
        };
        match planted {
            Planted::Distribution(d) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = d.argmax();
                for (k, &p) in d.probs().iter().enumerate() {
                    acc += p;
                    if u < acc && p > 0.0 {
                        pick = k;
                        break;
                    }
                }
                names(&mut std::iter::once(pick))
            }
            Planted::LabelSet(set) => names(&mut set.iter().copied()),
            Planted::Vad(v) => {
                let sd = 0.25 * temperature;
                let mut dims = v.dims();
                for x in &mut dims {
                    // Box-Muller; u1 kept away from zero
                    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    let u2: f64 = rng.random();
                    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    *x = (*x + sd * z).clamp(Vad::MIN, Vad::MAX);
                }
                format!("{{\"V\": {:.2}, \"A\": {:.2}, \"D\": {:.2}}}", dims[0], dims[1], dims[2])
            }
        }
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.transient_failures > 0 {
            let key = (request.text_id.clone(), request.temperature.to_bits(), request.sample_index);
            let mut seen = self.failures_seen.lock().expect("mock state lock");
            let count = seen.entry(key).or_insert(0);
            if *count < self.transient_failures {
                *count += 1;
                return Err(BackendError::Transport("planted transient failure".into()));
            }
        }
        let planted = self
            .planted
            .get(&request.text_id)
            .ok_or_else(|| BackendError::NotPlanted(request.text_id.clone()))?;
        let mut rng = SeedHasher::new(self.seed, "mock_backend")
            .str(&request.text_id)
            .f64(request.temperature)
            .u64(u64::from(request.sample_index))
            .rng();
        if rng.random::<f64>() < self.garbage_rate {
            let pool: &[&str] = match planted {
                Planted::Vad(_) => &VAD_GARBAGE,
                _ => &CATEGORICAL_GARBAGE,
            };
            return Ok(pool[rng.random_range(0..pool.len())].to_string());
        }
        Ok(self.render(planted, &mut rng, request.temperature))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::parse::parse_response;
    use crate::sampler::Task;

    fn request(text_id: &str, sample_index: u32) -> ChatRequest {
        ChatRequest {
            model: "mock".into(),
            system: String::new(),
            user: String::new(),
            temperature: 0.7,
            text_id: text_id.into(),
            sample_index,
        }
    }

    #[test]
    fn point_mass_always_joy() {
        let space = LabelSpace::goemotions();
        let planted = HashMap::from([("t".to_string(), Planted::Distribution(CategoricalDistribution::point_mass(28, 17)))]);
        let mock = MockBackend::new(1, space, planted, 0.0);
        for i in 0..50 {
            assert_eq!(mock.complete(&request("t", i)).unwrap(), "[\"joy\"]");
        }
        assert_eq!(mock.calls(), 50);
        assert_eq!(mock.complete(&request("missing", 0)), Err(BackendError::NotPlanted("missing".into())));
    }

    #[test]
    fn garbage_never_parses() {
        let space = LabelSpace::goemotions();
        for g in CATEGORICAL_GARBAGE {
            assert!(!parse_response(g, Task::Categorical, &space).is_success(), "{g}");
        }
        for g in VAD_GARBAGE {
            assert!(!parse_response(g, Task::Vad, &space).is_success(), "{g}");
        }
    }

    #[test]
    fn vad_and_label_sets() {
        let space = LabelSpace::goemotions();
        let planted = HashMap::from([
            ("v".to_string(), Planted::Vad(Vad::new(4.9, 1.0, 3.0))),
            ("s".to_string(), Planted::LabelSet(BTreeSet::from([0, 17]))),
        ]);
        let mock = MockBackend::new(2, space.clone(), planted, 0.0);
        assert_eq!(mock.complete(&request("s", 0)).unwrap(), "[\"admiration\",\"joy\"]");
        for i in 0..20 {
            let raw = mock.complete(&request("v", i)).unwrap();
            assert!(parse_response(&raw, Task::Vad, &space).is_success(), "{raw}");
        }
    }

    #[test]
    fn transient_failures_then_success() {
        let planted = HashMap::from([("t".to_string(), Planted::LabelSet(BTreeSet::from([3])))]);
        let mock = MockBackend::new(0, LabelSpace::goemotions(), planted, 0.0).with_transient_failures(2);
        assert!(mock.complete(&request("t", 0)).is_err());
        assert!(mock.complete(&request("t", 0)).is_err());
        assert!(mock.complete(&request("t", 0)).is_ok());
        assert!(mock.complete(&request("t", 1)).is_err());
    }
}
