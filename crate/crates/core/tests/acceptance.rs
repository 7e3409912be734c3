//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use panelrisk::anonymity::{anonymity_sets, k_profile, listwise_delete};
use panelrisk::attack_sim::{
    run_simulation, within_tolerance, CategoricalVariable, PopulationSpec, SimulationConfig,
};
use panelrisk::cli::{cmd_assess, cmd_prep, render, RunConfig};
use panelrisk::dataset::{DatasetBuilder, Datum, Schema, VariableKind, VariableSpec};
use panelrisk::matching::{n_match_all, n_match_all_reference, MatchOptions};
use panelrisk::panel_prep::{estimate_birth_month, YearMonth};
use panelrisk::risk::{theta, theta_from_k, theta_from_match, ReliabilityPolicy};
use rand::Rng;

use common::*;

const POLICY: ReliabilityPolicy = ReliabilityPolicy { min_n1: 1 };

type Criterion = (&'static str, Duration, fn() -> Result<String, String>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn worked_example_k_column() -> Result<String, String> {
    let ds = worked_example();
    let qi = age_gender();
    let (kept, deleted) = listwise_delete(&ds, &qi).map_err(|e| e.to_string())?;
    let sizes = anonymity_sets(&kept, &qi)
        .map_err(|e| e.to_string())?
        .sizes();
    let k: Vec<Option<usize>> = ds
        .respondent_ids()
        .iter()
        .map(|id| kept.row_of(id).map(|r| sizes[r]))
        .collect();
    let expected = vec![Some(1), Some(1), None, None, Some(2), Some(2)];
    check(deleted == 2 && k == expected, || {
        format!("k = {k:?}, deleted = {deleted}")
    })?;
    Ok(format!("k = {k:?}"))
}

fn worked_example_n_match() -> Result<String, String> {
    let ds = worked_example();
    let qi = age_gender();
    let literal = n_match_all(&ds, &qi, MatchOptions::default())
        .unwrap()
        .counts;
    check(literal == [3, 1, 5, 3, 3, 3], || {
        format!("literal {literal:?}")
    })?;
    let printed = [3, 1, 4, 2, 3, 3];
    for r in [0, 1, 4, 5] {
        check(literal[r] == printed[r], || {
            format!("row {} differs from printed", r + 1)
        })?;
    }
    let strict = n_match_all(&ds, &qi, MatchOptions::strict())
        .unwrap()
        .counts;
    check(strict == printed, || format!("strict {strict:?}"))?;
    Ok(format!("literal {literal:?}, observed-overlap {strict:?}"))
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = rng(0xACCE_0001);
    let instances = 1000;
    for i in 0..instances {
        let n = rng.gen_range(1..=200);
        let vars = rng.gen_range(1..=6);
        let missing = rng.gen_range(0.0..=0.5);
        let ds = random_dataset(&mut rng, n, vars, missing);
        let qi = qi_of(vars);
        for opts in [MatchOptions::default(), MatchOptions::strict()] {
            let fast = n_match_all(&ds, &qi, opts).unwrap().counts;
            let slow = n_match_all_reference(&ds, &qi, opts).unwrap().counts;
            check(fast == slow, || format!("instance {i} ({opts:?}) differs"))?;
        }
    }
    Ok(format!("{instances} instances, both overlap modes"))
}

fn degeneration() -> Result<String, String> {
    let mut rng = rng(0xACCE_0002);
    let instances = 100;
    for i in 0..instances {
        let n = rng.gen_range(1..=200);
        let vars = rng.gen_range(1..=6);
        let ds = random_dataset(&mut rng, n, vars, 0.0);
        let qi = qi_of(vars);
        let counts = n_match_all(&ds, &qi, MatchOptions::default()).unwrap();
        let sizes = anonymity_sets(&ds, &qi).unwrap().sizes();
        check(counts.counts == sizes, || {
            format!("instance {i}: counts differ from k")
        })?;
        let kp = k_profile(&ds, &qi, n).unwrap();
        let population = (n as u64) * 37 + 11;
        let tk = theta_from_k(&kp, population, POLICY).unwrap();
        let tm = theta_from_match(&counts, n, population, POLICY).unwrap();
        check(tk == tm, || format!("instance {i}: θ {tk:?} vs {tm:?}"))?;
    }
    Ok(format!("{instances} instances"))
}

fn dominance_and_monotonicity() -> Result<String, String> {
    let mut rng = rng(0xACCE_0003);
    let instances = 500;
    for i in 0..instances {
        let n = rng.gen_range(1..=150);
        let vars = rng.gen_range(2..=6);
        let missing = rng.gen_range(0.0..=0.5);
        let ds = random_dataset(&mut rng, n, vars, missing);
        let qi = qi_of(vars);
        let counts = n_match_all(&ds, &qi, MatchOptions::default())
            .unwrap()
            .counts;
        let (kept, _) = listwise_delete(&ds, &qi).unwrap();
        let sizes = anonymity_sets(&kept, &qi).unwrap().sizes();
        for (kr, id) in kept.respondent_ids().iter().enumerate() {
            let r = ds.row_of(id).unwrap();
            check(counts[r] >= sizes[kr], || {
                format!("instance {i}: n_match < k for {id}")
            })?;
        }
        let shorter = qi_of(vars - 1);
        let before = n_match_all(&ds, &shorter, MatchOptions::default())
            .unwrap()
            .counts;
        for r in 0..n {
            check(counts[r] <= before[r], || {
                format!("instance {i}: appending a variable raised row {r}")
            })?;
            check(counts[r] >= 1, || format!("instance {i}: zero count"))?;
        }
    }
    Ok(format!("{instances} instances"))
}

fn theta_spot_checks() -> Result<String, String> {
    let yob = theta(3, 1.0, 10997.0 / 16_500_000.0, POLICY)
        .unwrap()
        .value
        .unwrap();
    check((yob - 0.0010).abs() <= 0.00005, || format!("YoB θ = {yob}"))?;
    check(
        theta(4, 0.0, 0.2, POLICY).unwrap().value == Some(1.0),
        || "n2 = 0".into(),
    )?;
    check(
        theta(0, 3.0, 0.2, POLICY).unwrap().value == Some(0.0),
        || "n1 = 0".into(),
    )?;
    check(
        theta(4, 3.0, 1.0, POLICY).unwrap().value == Some(1.0),
        || "pi = 1".into(),
    )?;
    Ok(format!("YoB θ = {yob:.6}"))
}

fn simulation_vs_formula() -> Result<String, String> {
    let config = SimulationConfig {
        population: PopulationSpec {
            population_size: 50_000,
            variables: (0..3)
                .map(|v| CategoricalVariable::uniform(format!("x{v}"), 20))
                .collect(),
            seed: 20_240_601,
        },
        sampling_fraction: 0.1,
        missing_rates: Default::default(),
        quasi_identifier: None,
        replicates: 30,
        draws: 200_000,
        seed: 99,
        reliability: POLICY,
    };
    let summary = run_simulation(&config).map_err(|e| e.to_string())?;
    let empirical = summary.pooled_empirical_theta.ok_or("no unique matches")?;
    let predicted = summary.mean_predicted_theta.ok_or("θ̂ undefined")?;
    check(within_tolerance(empirical, predicted), || {
        format!("empirical {empirical:.4} vs predicted {predicted:.4}")
    })?;
    Ok(format!(
        "pooled empirical {empirical:.4}, mean θ̂ {predicted:.4}, {} unique matches",
        summary.total_unique_matches
    ))
}

fn birth_month_soundness() -> Result<String, String> {
    let mut rng = rng(0xACCE_0004);
    let (mut eligible, mut contained, mut fired, mut pinned) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let birth_year = rng.gen_range(1930..2000);
        let birth_month: u8 = rng.gen_range(1..=12);
        let birth_day: u8 = rng.gen_range(1..=28);
        let start = YearMonth::new(rng.gen_range(2007..2011), rng.gen_range(1..=12)).unwrap();
        let mut month = start;
        let mut history = Vec::new();
        let mut fill_dates = Vec::new();
        for _ in 0..36 {
            let day: u8 = rng.gen_range(1..=28);
            let before_birthday = (month.month(), day) < (birth_month, birth_day);
            let age = (month.year() - birth_year) as i64 - i64::from(before_birthday);
            history.push((month, Some(age)));
            fill_dates.push((month.year(), month.month(), day));
            month = month.succ();
        }
        let est = estimate_birth_month(&history).map_err(|e| e.to_string())?;
        // A birthday falls strictly after the first fill-in and no later than the last.
        let (first, last) = (fill_dates[0], fill_dates[35]);
        let in_window = (first.0..=last.0).any(|y| {
            let bd = (y, birth_month, birth_day);
            bd > first && bd <= last
        });
        if in_window {
            eligible += 1;
            if est.contains(birth_month) {
                contained += 1;
            }
        }
        if est.len() == 1 {
            fired += 1;
            if est.first() == Some(birth_month) {
                pinned += 1;
            }
        }
    }
    check(contained == eligible, || {
        format!("{contained}/{eligible} contain the true month")
    })?;
    check(pinned == fired, || {
        format!("{pinned}/{fired} pinned correctly")
    })?;
    check(fired > 0, || "the two-month rule never fired".into())?;
    Ok(format!(
        "{contained}/{eligible} contained, {pinned}/{fired} pinned"
    ))
}

fn performance() -> Result<String, String> {
    let mut rng = rng(0xACCE_0005);
    let n = 100_000;
    let domains: [i64; 8] = [2, 3, 5, 9, 12, 17, 60, 3000];
    let specs = (0..8)
        .map(|v| VariableSpec::new(format!("v{v}"), VariableKind::Integer))
        .collect();
    let mut builder = DatasetBuilder::new(Schema::new(specs).unwrap());
    for r in 0..n {
        let cells = domains
            .iter()
            .map(|&d| {
                if rng.gen::<f64>() < 0.2 {
                    Datum::Missing
                } else {
                    Datum::Int(rng.gen_range(0..d))
                }
            })
            .collect();
        builder.push_row(r.to_string(), cells).unwrap();
    }
    let ds = builder.finish();
    let qi = qi_of(8);
    let start = Instant::now();
    let profile = n_match_all(&ds, &qi, MatchOptions::default()).unwrap();
    let elapsed = start.elapsed();
    check(elapsed <= Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{n} rows x 8 variables in {:.2} s ({} unique)",
        elapsed.as_secs_f64(),
        profile.n_unique
    ))
}

fn end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = || -> Result<(Vec<u8>, String), String> {
        let mut config =
            RunConfig::load(&fixture("panel/config.json")).map_err(|e| e.to_string())?;
        let prepared = cmd_prep(&config).map_err(|e| e.to_string())?;
        let mut csv = Vec::new();
        prepared
            .dataset
            .write_csv(&mut csv)
            .map_err(|e| e.to_string())?;
        let path = dir.path().join("prepared.csv");
        std::fs::write(&path, &csv).map_err(|e| e.to_string())?;
        config.input = Some(path);
        let report = cmd_assess(&config).map_err(|e| e.to_string())?;
        Ok((csv, render::json(&report).map_err(|e| e.to_string())?))
    };
    let (csv_a, json_a) = run()?;
    let (csv_b, json_b) = run()?;
    check(csv_a == csv_b && json_a == json_b, || "runs differ".into())?;
    let golden_csv =
        std::fs::read(fixture("panel/expected_prepared.csv")).map_err(|e| e.to_string())?;
    let golden_json = std::fs::read_to_string(fixture("panel/expected_report.json"))
        .map_err(|e| e.to_string())?;
    check(csv_a == golden_csv, || {
        "prepared CSV differs from the frozen fixture".into()
    })?;
    check(json_a == golden_json, || {
        "report JSON differs from the frozen fixture".into()
    })?;
    Ok(format!(
        "{} bytes of JSON, identical across runs and to the frozen copy",
        json_a.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "Worked-example k-column reproduction",
            Duration::from_secs(1),
            worked_example_k_column,
        ),
        (
            "Worked-example n_match reproduction",
            Duration::from_secs(1),
            worked_example_n_match,
        ),
        (
            "Oracle equivalence (indexed = scan)",
            Duration::from_secs(60),
            oracle_equivalence,
        ),
        (
            "Degeneration without missing cells",
            Duration::from_secs(30),
            degeneration,
        ),
        (
            "Dominance and monotonicity",
            Duration::from_secs(60),
            dominance_and_monotonicity,
        ),
        (
            "θ formula spot checks",
            Duration::from_secs(1),
            theta_spot_checks,
        ),
        (
            "Simulation vs formula",
            Duration::from_secs(300),
            simulation_vs_formula,
        ),
        (
            "Month-of-birth soundness",
            Duration::from_secs(10),
            birth_month_soundness,
        ),
        (
            "Performance: 100k x 8 indexed n_match",
            Duration::from_secs(10),
            performance,
        ),
        (
            "End-to-end prep -> assess determinism",
            Duration::from_secs(60),
            end_to_end,
        ),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; exceeded runtime budget {budget:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS  {name} [{:.2} s]: {detail}", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{:.2} s]: {why}", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
