//! Adaptive refinement on a benchmark with its recommended protocol.
//!
//! Usage: `cargo run --release --example adaptive_study -- [peak|franke|flower|reentrant] [eta1|eta2|eta_res]`

use cutflux::amr::{run_amr, AmrConfig};
use cutflux::estimate::Estimator;
use cutflux::problems;

fn main() -> cutflux::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let problem = problems::by_name(&args.next().unwrap_or_else(|| "peak".into()))?;
    let mut config = AmrConfig::for_problem(&problem);
    if let Some(e) = args.next() {
        config.estimator = e.parse()?;
    }
    let trace = run_amr(&problem, &config)?;
    println!(
        "{:>4} {:>6} {:>11} {:>11} {:>11} {:>11} {:>9} {:>9}",
        "it", "dofs", "eta1", "eta2", "eta_res", "error", "eff1", "cons"
    );
    for r in &trace.iterations {
        let err = r.errors.map(|e| e.energy).unwrap_or(f64::NAN);
        println!(
            "{:>4} {:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>9.3} {:>9.1e}",
            r.iteration,
            r.dofs,
            r.eta1,
            r.eta2,
            r.eta_res,
            err,
            r.efficiency(Estimator::Eta1).unwrap_or(f64::NAN),
            r.conservation
        );
    }
    for e in [Estimator::Eta1, Estimator::Eta2, Estimator::EtaRes] {
        let mean = trace.mean_efficiency(e).map_or("-".to_string(), |m| format!("{m:.3}"));
        let slope = trace.decay_slope(e, 5).map_or("-".to_string(), |s| format!("{s:.3}"));
        println!("{e}: mean efficiency {mean}, slope over last 5 iterations {slope}");
    }
    println!("stopped: {:?}", trace.stop);
    if let Some(f) = &trace.failure {
        println!("failure: {f}");
    }
    Ok(())
}
