//! Calibration sweep: runs scenarios at shipped defaults and prints every
//! measurement, criterion, and wall time. Development tool.

use std::time::Instant;

use mkvlab::experiments::{
    run_decay_slope, run_entropy_cost, run_kstar_wasserstein, run_lamb_oseen,
    run_picard_contraction, ContractionParams, DecaySlopeParams, EntropyCostParams,
    ExperimentReport, KstarWassersteinParams, LambOseenParams,
};

fn show(name: &str, started: Instant, report: &ExperimentReport) {
    println!("== {name}: passed={} wall={:?}", report.passed, started.elapsed());
    for m in &report.measurements {
        match m.half_width {
            Some(hw) => println!("   {} = {:.6} +- {:.6}", m.name, m.value, hw),
            None => println!("   {} = {:.6}", m.name, m.value),
        }
    }
    for c in &report.criteria {
        println!(
            "   [{}] {}: {:.6} vs {:.6}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.measured,
            c.bound
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let want = |k: &str| args.is_empty() || args.iter().any(|a| a == k);

    if want("decay23") {
        let t = Instant::now();
        let r = run_decay_slope(&DecaySlopeParams::default()).unwrap();
        show("decay (2,3)", t, &r);
    }
    if want("decay12") {
        let t = Instant::now();
        let params = DecaySlopeParams {
            dim: 1,
            k: 2.0,
            horizon: 1.0 / 16.0,
            grid_half_width: 1.6,
            grid_nodes: 129,
            ..DecaySlopeParams::default()
        };
        let r = run_decay_slope(&params).unwrap();
        show("decay (1,2)", t, &r);
    }
    if want("entropy") {
        let t = Instant::now();
        let r = run_entropy_cost(&EntropyCostParams::default()).unwrap();
        show("entropy_cost", t, &r);
    }
    if want("kstar") {
        let t = Instant::now();
        let r = run_kstar_wasserstein(&KstarWassersteinParams::default()).unwrap();
        show("kstar_wasserstein", t, &r);
    }
    if want("lamb") {
        let t = Instant::now();
        let r = run_lamb_oseen(&LambOseenParams::default()).unwrap();
        show("lamb_oseen", t, &r);
    }
    if want("contraction") {
        let t = Instant::now();
        let r = run_picard_contraction(&ContractionParams::default()).unwrap();
        show("picard_contraction", t, &r);
    }
}
