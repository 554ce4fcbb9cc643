//! Synthetic inputs for a full offline run: `emodist demo-data --out DIR`
//! writes a corpus, VAD ratings, an external baseline, embeddings, a
//! lexicon and an `emodist.toml` wired to mock backends.
//!
//! Each label gets a cue strength in (0, 1). Texts whose primary label has
//! a strong cue mention the label name more often, and their embeddings sit
//! closer to the label vector, so lexical transparency varies by category.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use emodist::LabelSpace;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_TEXTS: usize = 300;
const N_VAD: usize = 150;
const DIM: usize = 32;
const FILLER: [&str; 12] = [
    "the", "meeting", "ran", "late", "again", "and", "my", "train", "was", "quiet", "today", "honestly",
];

pub fn write_demo(dir: &Path, seed: u64) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let space = LabelSpace::goemotions();
    let labels: Vec<&str> = space.labels().iter().map(String::as_str).collect();
    let k = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);
    let cue: Vec<f64> = {
        let mut c = vec![0.0; k];
        for (rank, &label) in order.iter().enumerate() {
            c[label] = 0.05 + 0.9 * rank as f64 / (k - 1) as f64;
        }
        c
    };
    let label_vecs: Vec<Vec<f64>> = (0..k).map(|_| unit(&mut rng)).collect();

    let mut corpus = String::from("text_id\ttext\tannotator\tlabels\n");
    let mut baseline = format!("text_id,{}\n", labels.join(","));
    let mut embeddings = String::new();
    for i in 0..N_TEXTS {
        let id = format!("t{i:04}");
        let a = rng.random_range(0..k);
        let b = (a + 1 + rng.random_range(0..k - 1)) % k;
        let mut c = rng.random_range(0..k);
        while c == a || c == b {
            c = (c + 1) % k;
        }
        let sets: Vec<Vec<usize>> = match i % 4 {
            0 => vec![vec![a], vec![a], vec![a]],
            1 => vec![vec![a], vec![a, b], vec![a]],
            2 => vec![vec![a, b], vec![a], vec![b]],
            _ => vec![vec![a], vec![b], vec![c]],
        };

        let mut words: Vec<&str> = (0..6).map(|_| FILLER[rng.random_range(0..FILLER.len())]).collect();
        if rng.random::<f64>() < cue[a] {
            let at = rng.random_range(0..=words.len());
            words.insert(at, labels[a]);
        }
        let text = words.join(" ");
        for (j, set) in sets.iter().enumerate() {
            let names: Vec<&str> = set.iter().map(|&l| labels[l]).collect();
            let _ = writeln!(corpus, "{id}\t{text}\tr{j}\t{}", names.join(","));
        }

        // a crude classifier: the annotation counts flattened toward uniform
        let mut counts = vec![0.0; k];
        for set in &sets {
            for &l in set {
                counts[l] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        let probs: Vec<String> =
            counts.iter().map(|c| format!("{:.6}", 0.6 * c / total + 0.4 / k as f64)).collect();
        let _ = writeln!(baseline, "{id},{}", probs.join(","));

        let noise = unit(&mut rng);
        let v: Vec<f64> = (0..DIM).map(|d| cue[a] * label_vecs[a][d] + (1.0 - cue[a]) * noise[d]).collect();
        let _ = writeln!(embeddings, "{}", serde_json::json!({"id": id, "kind": "text", "vector": v}));
    }
    for (l, v) in labels.iter().zip(&label_vecs) {
        let _ = writeln!(embeddings, "{}", serde_json::json!({"id": l, "kind": "label", "vector": v}));
    }

    let mut lexicon = String::new();
    for l in &labels {
        let _ = writeln!(lexicon, "{l}\t{l}\t1");
    }
    for w in FILLER {
        let _ = writeln!(lexicon, "{w}\t{}\t0", labels[0]);
    }

    let mut emobank = String::from("id,text,rater,V,A,D\n");
    for i in 0..N_VAD {
        let spread = [0.1, 0.5, 1.0][i % 3];
        let base: Vec<f64> = (0..3).map(|_| rng.random_range(2.0..4.0)).collect();
        for (j, offset) in [-spread, 0.0, spread].into_iter().enumerate() {
            let r: Vec<String> = base.iter().map(|b| format!("{:.2}", b + offset)).collect();
            let _ = writeln!(emobank, "e{i:04},sentence number {i},r{j},{}", r.join(","));
        }
    }

    let config = format!(
        r#"seed = {seed}
output_dir = "out"

[corpus]
categorical = "corpus.tsv"
vad = "emobank.csv"
tiers = {{ full_agreement = 60, partial = 120, full_disagreement = 60 }}
vad_tiers = {{ high = 40, moderate = 40, low = 40 }}

[sampler]
temperatures = [0.0, 0.3, 0.7, 1.0]
samples_per_temperature = 10

[[models]]
name = "mock-api"
backend = "mock"
group = "api"
mock = {{ mix = 0.25, lean = "neutral" }}

[[models]]
name = "mock-open"
backend = "mock"
group = "open"
mock = {{ mix = 0.45, lean = "joy", garbage_rate = 0.05 }}

[[external]]
name = "baseline"
path = "baseline.csv"

[transparency]
embeddings = "embeddings.jsonl"
lexicon = "lexicon.txt"
min_positive = 5

[calibration]
k = 5

[stats]
bootstrap_iterations = 2000
level = 0.95
"#
    );

    std::fs::write(dir.join("corpus.tsv"), corpus)?;
    std::fs::write(dir.join("emobank.csv"), emobank)?;
    std::fs::write(dir.join("baseline.csv"), baseline)?;
    std::fs::write(dir.join("embeddings.jsonl"), embeddings)?;
    std::fs::write(dir.join("lexicon.txt"), lexicon)?;
    let path = dir.join("emodist.toml");
    std::fs::write(&path, config)?;
    Ok(path)
}

fn unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}
