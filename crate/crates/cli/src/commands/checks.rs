use intff::checks::{ff_reduction_check, gradcheck_suite, oracle_suite, CheckResult};

use crate::error::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per check.
    #[arg(long, default_value_t = 10)]
    instances: usize,
}

#[derive(Debug, clap::Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random models per check.
    #[arg(long, default_value_t = 20)]
    instances: usize,
}

fn report(results: &[CheckResult]) -> CliResult {
    for r in results {
        println!(
            "{} {:<22} instances={:<3} worst={:.3e} threshold={:.0e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.instances,
            r.worst,
            r.threshold
        );
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::numeric(format!("checks failed: {}", failed.join(", "))))
    }
}

pub fn run_gradcheck(args: GradcheckArgs) -> CliResult {
    report(&gradcheck_suite(args.seed, args.instances.max(1))?)
}

pub fn run_oracle(args: OracleArgs) -> CliResult {
    let n = args.instances.max(1);
    report(&[oracle_suite(args.seed, n)?, ff_reduction_check(args.seed, n)?])
}
