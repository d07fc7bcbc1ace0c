//! Acceptance criteria AC1-AC12, run in order on one thread of control so
//! the runtime limits are measured without competing tests.

use std::time::{Duration, Instant};

use clap::Parser;
use gausshardy_cli::{emit, run_experiment, Cli, ExperimentResult};
use serde_json::Value;

fn run(args: &str) -> ExperimentResult {
    let argv = std::iter::once("gausshardy").chain(args.split_whitespace());
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| panic!("bad config '{args}': {e}"));
    run_experiment(&cli).unwrap_or_else(|e| panic!("'{args}' failed: {e}"))
}

fn bytes(args: &str) -> Vec<u8> {
    let argv = std::iter::once("gausshardy").chain(args.split_whitespace());
    let cli = Cli::try_parse_from(argv).expect("config");
    let r = run_experiment(&cli).unwrap_or_else(|e| panic!("'{args}' failed: {e}"));
    emit(&r, cli.format).expect("emit")
}

fn num(r: &ExperimentResult, key: &str) -> f64 {
    r.meta.summary[key]
        .as_f64()
        .unwrap_or_else(|| panic!("{}: summary.{key} missing", r.experiment))
}

fn text(r: &ExperimentResult, key: &str) -> String {
    r.meta.summary[key].as_str().unwrap_or_default().to_string()
}

fn flag(r: &ExperimentResult, key: &str) -> bool {
    r.meta.summary[key].as_bool().unwrap_or(false)
}

struct Check {
    id: &'static str,
    name: &'static str,
    limit: Option<Duration>,
    body: fn() -> (bool, String),
}

fn ac1() -> (bool, String) {
    let r = run("mehler check --t 0.2,0.5,1,2 --grid 3");
    let worst = num(&r, "max_rel_discrepancy");
    (
        worst <= 1e-8 && r.rows.len() == 100,
        format!(
            "max relative discrepancy {worst:.2e} over {} points",
            r.rows.len()
        ),
    )
}

fn ac2() -> (bool, String) {
    let c = run("mehler compose --t 0.2,0.5,1,2 --grid 3");
    let s = run("mehler stochastic --t 0.2,0.5,1,2 --grid 3");
    let (res, dev) = (num(&c, "max_residual"), num(&s, "max_deviation"));
    (
        res <= 1e-6 && dev <= 1e-8,
        format!("compose residual {res:.2e}, stochastic deviation {dev:.2e}"),
    )
}

fn ac3() -> (bool, String) {
    let r = run("impow isometry --u 1 --r 1");
    let dev = num(&r, "max_deviation");
    (
        dev <= 1e-12 && r.rows.len() >= 3,
        format!(
            "max norm deviation {dev:.2e} over {} functions",
            r.rows.len()
        ),
    )
}

fn ac4() -> (bool, String) {
    let a = run("impow action --u 1 --r 1");
    let resolved = text(&a, "resolved");
    let action_err = a
        .rows
        .iter()
        .find(|row| row["normalization"] == Value::String(resolved.clone()))
        .and_then(|row| row["relative_error"].as_f64())
        .unwrap_or(f64::INFINITY);
    let c = run("impow cross --u 1 --r 1");
    let (worst, conj) = (
        num(&c, "max_rel_discrepancy"),
        num(&c, "max_conjugation_deviation"),
    );
    let ok = resolved == "GammaMinusIu"
        && action_err <= 1e-4
        && worst <= 1e-6
        && conj <= 1e-12
        && c.rows.len() == 20;
    (ok, format!("normalization {resolved} (action error {action_err:.2e}), cross {worst:.2e}, conjugation {conj:.2e}"))
}

const LEMMA_H_CEILING: f64 = 1.01;

fn ac5() -> (bool, String) {
    let tol = 1e-10;
    let r = run(&format!("impow lemma --u 1 --tol {tol}"));
    let (min_i, change, max_h) = (
        num(&r, "min_scaled_i"),
        num(&r, "relative_change"),
        num(&r, "max_scaled_h"),
    );
    let ok = min_i >= 10.0 * tol && change < 0.05 && max_h <= LEMMA_H_CEILING && r.rows.len() == 42;
    (ok, format!("min sqrt(a sigma)|I| = {min_i:.4}, change {change:.1e}, max a sqrt(sigma)|H| = {max_h:.4} (ceiling {LEMMA_H_CEILING})"))
}

fn ac6() -> (bool, String) {
    let d = run("diverge --u 1 --r 1 --ys 4,6,8,12,16");
    let (slope, r2) = (num(&d, "slope"), num(&d, "r_squared"));
    let inc = flag(&d, "strictly_increasing");
    let m = run("iinf --kernel mehler --t 1 --ys 4,6,8,12,16");
    let var = num(&m, "relative_variation");
    let ok = inc && slope > 0.0 && r2 >= 0.9 && var < 0.05;
    (
        ok,
        format!(
            "increasing {inc}, slope {slope:.3}, R^2 {r2:.4}; Mehler control variation {var:.2e}"
        ),
    )
}

fn last_rise(r: &ExperimentResult) -> f64 {
    let sups: Vec<f64> = r
        .meta
        .refinement
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|s| s["supremum"].as_f64())
        .collect();
    match sups.as_slice() {
        [.., a, b] => (b - a) / a,
        _ => f64::NAN,
    }
}

fn ac7() -> (bool, String) {
    let k = run("hormander --kernel impow --u 1 --r 1 --refinements 2");
    let c = run("hormander --kernel reciprocal --refinements 2");
    let (kv, cv) = (text(&k, "verdict"), text(&c, "verdict"));
    let rise = last_rise(&k);
    let ok = kv == "plateau" && rise < 0.02 && cv == "growing";
    (
        ok,
        format!(
            "(I+L)^i {kv} (sup {:.4}, last rise {:.2}%), 1/(x-y) {cv} (last rise {:.1}%)",
            num(&k, "supremum"),
            100.0 * rise,
            100.0 * last_rise(&c)
        ),
    )
}

fn implication_ok(r: &ExperimentResult, want_contrapositive: bool) -> bool {
    let imp = &r.meta.summary["implications"];
    let dir_i = imp["direction_i"].as_bool() == Some(true);
    let dir_ii = imp["direction_ii"].as_bool() != Some(false);
    let contra = imp["contrapositive_exhibited"].as_bool() == Some(true);
    dir_i && dir_ii && (!want_contrapositive || contra)
}

fn ac8() -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    for (kernel, contra) in [
        ("impow", true),
        ("mehler", false),
        ("constant", false),
        ("truncated-identity", false),
    ] {
        let r = run(&format!(
            "hardy implications --kernel {kernel} --u 1 --r 1 --t 1 --ys 4,8,16 --refinements 2"
        ));
        let tay = num(&r, "tay_residual");
        let pass =
            implication_ok(&r, contra) && (!matches!(kernel, "impow" | "mehler") || tay <= 1e-6);
        ok &= pass;
        notes.push(format!(
            "{kernel}: {} tay {tay:.1e}",
            if pass { "ok" } else { "fail" }
        ));
    }
    (ok, notes.join(", "))
}

fn ac9() -> (bool, String) {
    let s = run("hardy strict --ys 4,8,16");
    let loc = num(&s, "max_h1loc_bound");
    let growth: Vec<f64> = s.meta.summary["duality_growth"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_f64)
        .collect();
    let b = run("hardy bmo --max-center 50");
    let osc = num(&b, "sup_oscillation");
    let ok = loc <= 1.01 && growth.len() == 2 && growth.iter().all(|&g| g >= 3.0) && osc <= 6.0;
    (
        ok,
        format!("h1 bound {loc:.4}, duality growth {growth:.3?}, sup oscillation of x^2 {osc:.4}"),
    )
}

fn ac10() -> (bool, String) {
    let e = run("tree exactness");
    let worst = num(&e, "max_relative_difference");
    let kernels: std::collections::BTreeSet<String> = e
        .rows
        .iter()
        .filter_map(|r| r["kernel"].as_str().map(String::from))
        .collect();
    let grad = num(&e, "indicator_gradient");
    let l1 = num(&e, "indicator_l1");
    let hand = (grad - (3.0 * 2f64.sqrt() + 6.0)).abs() <= 2.0 * f64::EPSILON * grad && l1 == 4.0;
    let ctrl = run("tree equivalence --q 2 --kernel inverse-sphere");
    let row = &ctrl.rows[0];
    let divergent =
        row["l1"] == "diverging" && row["hormander"] == "diverging" && row["consistent"] == true;
    let ok =
        worst <= 1e-12 && kernels.len() == 10 && hand && flag(&e, "all_consistent") && divergent;
    (ok, format!("{} kernels, max difference {worst:.1e}, gradient {grad}, l1 {l1}, control divergent {divergent}", kernels.len()))
}

const SHELL_FLOOR: f64 = 1.8;

fn ac11() -> (bool, String) {
    let r = run("isoperimetric shell");
    let m = num(&r, "min_ratio");
    (
        m >= SHELL_FLOOR,
        format!(
            "min ratio {m:.4} over {} shells (floor {SHELL_FLOOR})",
            r.rows.len()
        ),
    )
}

const LIGHT_CONFIGS: &[&str] = &[
    "mehler check --t 1 --grid 3",
    "mehler compose --t 1",
    "mehler stochastic --t 0.5,1 --format csv",
    "impow cross",
    "impow action",
    "impow lemma",
    "impow isometry",
    "hormander --kernel mehler --refinements 0",
    "iinf --ys 4,8",
    "diverge --ys 4,6",
    "hardy strict --ys 4",
    "hardy bmo --max-center 5 --format csv",
    "hardy decompose --ys 4 --space h1",
    "hardy images --kernel mehler --ys 4,8",
    "hardy implications --kernel constant --ys 4,8 --refinements 0",
    "tree equivalence --kernel geometric:0.25",
    "tree sums --kernel power:2 --depth 12 --format csv",
    "tree exactness",
    "tree cheeger",
    "isoperimetric shell",
    "isoperimetric doubling --grid 3 --format csv",
];

fn ac12() -> (bool, String) {
    let mut bad = Vec::new();
    for cfg in LIGHT_CONFIGS {
        let one = bytes(&format!("{cfg} --threads 1"));
        let again = bytes(&format!("{cfg} --threads 1"));
        let eight = bytes(&format!("{cfg} --threads 8"));
        if one != again || one != eight {
            bad.push(*cfg);
        }
    }
    (
        bad.is_empty(),
        format!(
            "{} configs at 1 and 8 threads, mismatches {bad:?}",
            LIGHT_CONFIGS.len()
        ),
    )
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let checks = [
        Check {
            id: "AC1",
            name: "Mehler oracle",
            limit: secs(10),
            body: ac1,
        },
        Check {
            id: "AC2",
            name: "semigroup and stochasticity",
            limit: secs(30),
            body: ac2,
        },
        Check {
            id: "AC3",
            name: "spectral isometry",
            limit: secs(5),
            body: ac3,
        },
        Check {
            id: "AC4",
            name: "kernel cross-validation",
            limit: secs(120),
            body: ac4,
        },
        Check {
            id: "AC5",
            name: "lemma witness",
            limit: secs(120),
            body: ac5,
        },
        Check {
            id: "AC6",
            name: "divergence at infinity",
            limit: secs(300),
            body: ac6,
        },
        Check {
            id: "AC7",
            name: "Hormander plateau",
            limit: secs(300),
            body: ac7,
        },
        Check {
            id: "AC8",
            name: "kernel criterion consistency",
            limit: secs(300),
            body: ac8,
        },
        Check {
            id: "AC9",
            name: "strict inclusion",
            limit: secs(120),
            body: ac9,
        },
        Check {
            id: "AC10",
            name: "tree exactness",
            limit: secs(10),
            body: ac10,
        },
        Check {
            id: "AC11",
            name: "isoperimetric shell",
            limit: secs(10),
            body: ac11,
        },
        Check {
            id: "AC12",
            name: "determinism",
            limit: None,
            body: ac12,
        },
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for c in &checks {
        if !filter.is_empty() && !filter.iter().any(|f| f.eq_ignore_ascii_case(c.id)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = (c.body)();
        let elapsed = start.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed <= l);
        let limit = c.limit.map_or("no limit".to_string(), |l| {
            format!("limit {} s", l.as_secs())
        });
        let pass = ok && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {}: {} ({detail}; {:.1} s, {limit})",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
