//! Acceptance gate. Runs every criterion, prints one line each, and exits
//! non-zero if any of them fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use gridsync::analysis::{
    band_crossings_between, detect_periodic_deviation, read_frequency_csv, stability_metrics, Band,
};
use gridsync::circuit::{solve_bus_voltage, LoadSet, SourceModel};
use gridsync::engine::{run, ScenarioConfig, Simulation};
use gridsync::SimTrace;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    ScenarioConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run_config(config: &ScenarioConfig) -> SimTrace {
    run(config).expect("scenario runs")
}

fn band() -> Band {
    Band::new(0.98, 1.02).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const DROP_TICK: u64 = 1500;

fn min_rel_from(trace: &SimTrace, start: u64) -> f64 {
    trace
        .rows
        .iter()
        .filter(|r| r.tick >= start)
        .map(|r| r.rel_voltage)
        .fold(f64::INFINITY, f64::min)
}

fn a1_naive_instability() -> Outcome {
    let naive_cfg = scenario("fridge_naive.toml");
    let naive = run_config(&naive_cfg);
    let again = run_config(&naive_cfg);
    let uncontrolled = run_config(&scenario("fridge_uncontrolled.toml"));

    // the first tick after the drop at which agents start postponing
    let reaction = naive
        .rows
        .iter()
        .find(|r| r.tick >= DROP_TICK && r.n_postponed > 0)
        .map(|r| r.tick)
        .ok_or("naive agents never reacted to the drop")?;
    let naive_min = min_rel_from(&naive, reaction);
    let free_min = min_rel_from(&uncontrolled, DROP_TICK);
    let naive_x = band_crossings_between(&naive, band(), DROP_TICK, 4000);
    let free_x = band_crossings_between(&uncontrolled, band(), DROP_TICK, 4000);
    let deterministic = naive.to_csv_string() == again.to_csv_string();
    check(
        naive_min < free_min && naive_x >= 10 && free_x <= 2 && deterministic,
        format!(
            "min rel naive {naive_min:.4} vs uncontrolled {free_min:.4}; crossings naive {naive_x} (>= 10) \
             uncontrolled {free_x} (<= 2); deterministic {deterministic}"
        ),
    )
}

fn a2_randomized_mitigation() -> Outcome {
    let started = Instant::now();
    let base = scenario("fridge_randomized.toml");
    let mut rows = Vec::new();
    let mut any_settled = false;
    let mut naive_settles = true;
    for p in [0.05, 0.1, 0.2, 0.5, 1.0] {
        let mut config = base.clone();
        config.set_param("act_probability", p).unwrap();
        let trace = run_config(&config);
        let report = stability_metrics(&trace, band()).unwrap();
        if let Some(tick) = report.settling_tick {
            let resident = trace
                .rows
                .iter()
                .filter(|r| r.tick >= tick)
                .all(|r| band().contains(r.rel_voltage));
            if p < 1.0 && resident {
                any_settled = true;
            }
        }
        if p == 1.0 {
            naive_settles = report.settling_tick.is_some();
        }
        rows.push(format!(
            "p={p}: {}",
            report.settling_tick.map_or("none".into(), |t| t.to_string())
        ));
    }
    let elapsed = started.elapsed().as_secs_f64();
    check(
        any_settled && !naive_settles && elapsed < 60.0,
        format!("settling ticks [{}]; {elapsed:.1} s", rows.join(", ")),
    )
}

const HIGH_WINDOW: (u64, u64) = (0, 3600);
const LOW_EVENT: (u64, u64) = (3600, 3720);

fn a3_price_spike_and_veto() -> Outcome {
    let free = run_config(&scenario("washer_price.toml"));
    let veto = run_config(&scenario("washer_veto.toml"));
    let free_min = min_rel_from(&free, 0);
    let veto_min = min_rel_from(&veto, 0);
    let in_window = |r: &&gridsync::TraceRow, (a, b): (u64, u64)| r.tick >= a && r.tick < b;
    let pre: Vec<f64> = free
        .rows
        .iter()
        .filter(|r| in_window(r, HIGH_WINDOW))
        .map(|r| r.n_flexible_on as f64)
        .collect();
    let pre_mean = pre.iter().sum::<f64>() / pre.len() as f64;
    // running machines stay on for a job length after the low-price periods
    let spike = free
        .rows
        .iter()
        .filter(|r| in_window(r, (LOW_EVENT.0, LOW_EVENT.1 + 120)))
        .map(|r| r.n_flexible_on)
        .max()
        .unwrap_or(0) as f64;
    check(
        free_min < 0.95 && veto_min >= 0.95 - 0.005 && spike > 5.0 * pre_mean,
        format!(
            "min rel without veto {free_min:.4} (< 0.95), with veto {veto_min:.4} (>= 0.945); \
             spike {spike} vs pre-event mean {pre_mean:.2}"
        ),
    )
}

fn a4_expectation_contraction() -> Outcome {
    let config = scenario("washer_price.toml");
    let lambda = config.policy.ewma_lambda.unwrap();
    let trace = run_config(&config);
    let spread = &trace.expectation_spread;
    let start = HIGH_WINDOW.0 as usize;
    let s0 = spread[start];
    let mut worst: f64 = 0.0;
    for k in 0..(HIGH_WINDOW.1 - HIGH_WINDOW.0) as usize {
        let expected = s0 * (1.0 - lambda).powi(k as i32);
        worst = worst.max((spread[start + k] - expected).abs());
    }
    // a meaningful check needs a spread well above the tolerance at the start
    check(
        worst <= 1e-9 && s0 > 1.0,
        format!(
            "spread {s0:.3} shrinks as (1 - {lambda})^k over {} ticks, max deviation {worst:.2e}",
            HIGH_WINDOW.1 - HIGH_WINDOW.0
        ),
    )
}

fn a5_circuit_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(0..60);
        let base: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..1000.0)).collect();
        let flexible: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..1000.0)).collect();
        let on: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let v_source = rng.random_range(12.0..400.0);
        let r_source = rng.random_range(0.001..2.0);

        let mut loads = LoadSet::from_ohms(&base, &flexible).unwrap();
        for (i, &o) in on.iter().enumerate() {
            loads.set_flexible(i, o);
        }
        let source = SourceModel::new(v_source, r_source, v_source, vec![]).unwrap();
        let got = solve_bus_voltage(&source, 0, &loads);

        // fold resistors pairwise into one equivalent, then divide
        let active = base
            .iter()
            .chain(flexible.iter().zip(&on).filter(|(_, &o)| o).map(|(r, _)| r));
        let r_eq = active.fold(
            f64::INFINITY,
            |acc, &r| if acc.is_infinite() { r } else { acc * r / (acc + r) },
        );
        let expected = if r_eq.is_infinite() {
            v_source
        } else {
            v_source * r_eq / (r_source + r_eq)
        };
        worst = worst.max(((got - expected) / expected).abs());
    }
    check(
        worst <= 1e-12,
        format!("1000 load sets, max relative error {worst:.2e}"),
    )
}

fn shuffled_trace(config: &ScenarioConfig, seed: u64) -> SimTrace {
    let mut sim = Simulation::new(&config.validate().unwrap()).unwrap();
    let mut order: Vec<usize> = (0..sim.n_agents()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while !sim.is_finished() {
        order.shuffle(&mut rng);
        sim.step_in_order(&order);
    }
    sim.trace().clone()
}

fn a6_determinism() -> Outcome {
    let mut failures = Vec::new();
    for name in ["fridge_randomized.toml", "washer_veto.toml"] {
        let config = scenario(name);
        let a = run_config(&config).to_csv_string();
        let b = run_config(&config).to_csv_string();
        let c = shuffled_trace(&config, 99).to_csv_string();
        if a != b {
            failures.push(format!("{name}: reruns differ"));
        }
        if a != c {
            failures.push(format!("{name}: shuffled order differs"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "reruns and shuffled agent order give byte-identical traces".into()
        } else {
            failures.join("; ")
        },
    )
}

fn a7_time_division_safety() -> Outcome {
    let config = scenario("fridge_time_division.toml");
    let permits = config.coordinator.permits_per_tick.unwrap();
    let sim = Simulation::new(&config.validate().unwrap()).unwrap();
    let mut prev = sim.loads().count_on();
    let trace = sim.run_to_end();
    let mut worst = 0i64;
    for row in &trace.rows {
        worst = worst.max(row.n_flexible_on as i64 - prev as i64);
        prev = row.n_flexible_on;
    }
    check(
        worst <= permits as i64,
        format!(
            "largest per-tick increase {worst} with {permits} permits over {} ticks",
            trace.len()
        ),
    )
}

const NOMINAL_HZ: f64 = 50.0;
const DIP_HZ: f64 = 0.05;

/// Two days sampled every 10 s; the first minute of every hour is low.
fn frequency_fixture(dip: f64) -> String {
    let mut text = String::from("timestamp,value\n");
    let start = chrono::NaiveDate::from_ymd_opt(2019, 3, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    for s in (0..2 * 86_400).step_by(10) {
        let t = start + chrono::Duration::seconds(s);
        let value = if s % 3600 < 60 { NOMINAL_HZ - dip } else { NOMINAL_HZ };
        text.push_str(&format!("{},{value}\n", t.format("%Y-%m-%dT%H:%M:%S")));
    }
    text
}

fn a8_profile_analyzer() -> Outcome {
    let profile = read_frequency_csv(frequency_fixture(DIP_HZ).as_bytes(), 60).map_err(|e| e.to_string())?;
    let dipped: Vec<u32> = (0..profile.n_bins())
        .filter(|&i| profile.bins()[i].mean().is_some_and(|m| m < NOMINAL_HZ - DIP_HZ / 2.0))
        .map(|i| profile.bin_start(i))
        .collect();
    let expected_bins: Vec<u32> = (0..24).map(|h| h * 3600).collect();
    let exact = (0..profile.n_bins()).all(|i| {
        let want = if profile.bin_start(i) % 3600 == 0 {
            NOMINAL_HZ - DIP_HZ
        } else {
            NOMINAL_HZ
        };
        profile.bins()[i].mean() == Some(want)
    });
    let score = detect_periodic_deviation(&profile, 3600).map_err(|e| e.to_string())?;
    // 24 of 1440 bins are low: the overall mean sits DIP * 24/1440 below nominal
    let frac = 24.0 / 1440.0;
    let oracle = DIP_HZ * (1.0 - frac) - DIP_HZ * frac;

    let flat = read_frequency_csv(frequency_fixture(0.0).as_bytes(), 60).map_err(|e| e.to_string())?;
    let flat_score = detect_periodic_deviation(&flat, 3600).map_err(|e| e.to_string())?;
    check(
        dipped == expected_bins && exact && score > 0.0 && (score - oracle).abs() < 1e-9 && flat_score.abs() <= 1e-12,
        format!(
            "{} dipped bins at hour boundaries, score {score:.6} (oracle {oracle:.6}), flat score {flat_score:e}",
            dipped.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("A1 naive synchronization instability", a1_naive_instability),
        ("A2 randomized mitigation", a2_randomized_mitigation),
        ("A3 price spike and voltage veto", a3_price_spike_and_veto),
        ("A4 expectation contraction", a4_expectation_contraction),
        ("A5 circuit oracle", a5_circuit_oracle),
        ("A6 determinism and order independence", a6_determinism),
        ("A7 time-division safety", a7_time_division_safety),
        ("A8 profile analyzer", a8_profile_analyzer),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
