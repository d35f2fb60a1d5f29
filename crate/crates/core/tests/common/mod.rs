#![allow(dead_code)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use afford_core::synthetic::{conllu_from_counts, planted_affordances, PlantedAffordances};
use flate2::write::GzEncoder;
use serde_json::json;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub struct Project {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
    pub planted: PlantedAffordances,
    pub nouns: Vec<String>,
    pub verbs: Vec<String>,
}

impl Project {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }
}

/// A small planted corpus split over a plain and a gzipped file, with
/// truth table, target table, word vectors and a config.
pub fn project(seed: u64) -> Project {
    let (m, n, d) = (40, 60, 4);
    let planted = planted_affordances(m, n, d, 8, 6, seed);
    let nouns: Vec<String> = (0..m).map(|i| format!("noun{i:02}")).collect();
    let verbs: Vec<String> = (0..n).map(|k| format!("verb{k:02}")).collect();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    fs::write(p.join("nouns.txt"), nouns.join("\n") + "\n").unwrap();
    fs::write(p.join("verbs.txt"), verbs.join("\n") + "\n").unwrap();

    let half = m / 2;
    let first = planted.counts.slice(ndarray::s![..half, ..]).to_owned();
    let second = planted.counts.slice(ndarray::s![half.., ..]).to_owned();
    fs::write(
        p.join("a.conllu"),
        conllu_from_counts(&first, &nouns[..half], &verbs),
    )
    .unwrap();
    let mut gz = GzEncoder::new(
        fs::File::create(p.join("b.conllu.gz")).unwrap(),
        flate2::Compression::default(),
    );
    gz.write_all(conllu_from_counts(&second, &nouns[half..], &verbs).as_bytes())
        .unwrap();
    gz.finish().unwrap();

    let mut truth = String::from("object\tverb\tscore\n");
    for (noun, &h) in nouns.iter().zip(&planted.object_dim) {
        for &k in &planted.dim_verbs[h] {
            truth.push_str(&format!("{noun}\t{}\t1\n", verbs[k]));
        }
    }
    fs::write(p.join("truth.tsv"), truth).unwrap();

    let mut targets = String::from("object\tt0\tt1\n");
    for (noun, &h) in nouns.iter().zip(&planted.object_dim) {
        let t0 = if h < 2 { 1.0 } else { 0.1 };
        let t1 = if h.is_multiple_of(2) { 0.8 } else { 0.05 };
        targets.push_str(&format!("{noun}\t{t0}\t{t1}\n"));
    }
    fs::write(p.join("targets.tsv"), targets).unwrap();

    // vectors: one-hot by verb index / noun index, so the baseline is weak
    let mut vectors = format!("{} 3\n", m + n);
    for (j, w) in nouns.iter().chain(&verbs).enumerate() {
        vectors.push_str(&format!("{w} {} {} {}\n", j % 3, (j + 1) % 2, 1));
    }
    fs::write(p.join("vectors.txt"), vectors).unwrap();

    let config = json!({
        "format_version": "1",
        "seed": seed,
        "paths": {
            "corpus": ["*.conllu", "*.conllu.gz"],
            "nouns": "nouns.txt",
            "verbs": "verbs.txt",
            "targets": "targets.tsv",
            "output_dir": "out"
        },
        "nmf": {"d": 4, "beta": 0.1, "d_list": [3, 4, 5], "beta_list": [0.1],
                "k": 4, "q": 1, "restarts": 2, "max_iter": 300},
        "rank": {"top_n": 5},
        "eval": {
            "datasets": [{"name": "planted", "path": "truth.tsv", "cutoff": 0.5}],
            "baselines": [{"name": "vectors", "path": "vectors.txt"}],
            "histogram_bins": 10
        },
        "regression": {"grid_size": 20}
    });
    let config_path = p.join("config.json");
    fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    Project {
        dir,
        config: config_path,
        planted,
        nouns,
        verbs,
    }
}

pub fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
