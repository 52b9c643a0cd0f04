//! A user-defined problem from a TOML run configuration: an ellipse-like
//! level set expression and a manufactured solution, refined adaptively.
//!
//! Usage: `cargo run --release --example custom_problem -- [config.toml]`

use cutflux::amr::run_amr;
use cutflux::config::RunConfig;
use cutflux::estimate::Estimator;

const DEFAULT: &str = r#"
[problem.custom]
levelset_expr = "((x - 0.5)/0.4)^2 + ((y - 0.5)/0.25)^2 - 1"
u = "exp(-40*(x - 0.35)^2) * y"

[mesh]
cells = 8
pattern = "crossed"

[amr]
fraction = 0.3
max_dofs = 3000
"#;

fn main() -> cutflux::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => RunConfig::from_toml(DEFAULT)?,
    };
    let problem = cfg.problem()?;
    let trace = run_amr(&problem, &cfg.amr_config(&problem))?;
    for r in &trace.iterations {
        let e = r.errors.map_or(f64::NAN, |e| e.energy);
        println!(
            "{:>3} {:>6} eta1 {:.3e} error {:.3e} efficiency {:.3}",
            r.iteration,
            r.dofs,
            r.eta1,
            e,
            r.efficiency(Estimator::Eta1).unwrap_or(f64::NAN)
        );
    }
    println!("stopped: {:?}", trace.stop);
    Ok(())
}
