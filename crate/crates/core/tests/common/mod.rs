#![allow(dead_code)]

use panelrisk::dataset::{DatasetBuilder, Datum, Schema, VariableKind, VariableSpec};
use panelrisk::{Dataset, QuasiIdentifier};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn worked_example() -> Dataset {
    let schema = Schema::new(vec![
        VariableSpec::new("Age", VariableKind::Integer).with_missing_tokens(["", "."]),
        VariableSpec::new("Gender", VariableKind::Categorical).with_missing_tokens(["", "."]),
    ])
    .unwrap();
    panelrisk::load_csv(fixture("worked_example.csv"), &schema).unwrap()
}

pub fn age_gender() -> QuasiIdentifier {
    QuasiIdentifier::new(["Age", "Gender"]).unwrap()
}

/// Random dataset: even columns integer, odd columns categorical, each with
/// a small domain so that ties and partial matches are common.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, vars: usize, missing_rate: f64) -> Dataset {
    let domains: Vec<i64> = (0..vars).map(|_| rng.gen_range(1..=5)).collect();
    let specs = (0..vars)
        .map(|v| {
            let kind = if v % 2 == 0 {
                VariableKind::Integer
            } else {
                VariableKind::Categorical
            };
            VariableSpec::new(format!("v{v}"), kind)
        })
        .collect();
    let labels: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
    let mut builder = DatasetBuilder::new(Schema::new(specs).unwrap());
    for r in 0..n {
        let cells = (0..vars)
            .map(|v| {
                if rng.gen::<f64>() < missing_rate {
                    Datum::Missing
                } else {
                    let x = rng.gen_range(0..domains[v]);
                    if v % 2 == 0 {
                        Datum::Int(x)
                    } else {
                        Datum::Label(&labels[x as usize])
                    }
                }
            })
            .collect();
        builder.push_row(format!("r{r}"), cells).unwrap();
    }
    builder.finish()
}

pub fn qi_of(vars: usize) -> QuasiIdentifier {
    QuasiIdentifier::new((0..vars).map(|v| format!("v{v}"))).unwrap()
}

/// Anonymity-set size of every row by pairwise comparison of decoded cells.
pub fn brute_force_k(ds: &Dataset, qi: &QuasiIdentifier) -> Vec<usize> {
    let cols = qi.resolve(ds).unwrap();
    let pattern = |r: usize| cols.iter().map(|&c| ds.datum(r, c)).collect::<Vec<_>>();
    (0..ds.n_rows())
        .map(|r| {
            (0..ds.n_rows())
                .filter(|&s| pattern(s) == pattern(r))
                .count()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
