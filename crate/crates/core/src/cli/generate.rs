use super::airline::{synthetic_airline, COLUMNS, RESPONSE};
use super::dataset::write_csv;
use super::{CliError, GenerateArgs};
use crate::sim::generate;

pub(super) fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Config("--n must be positive".into()));
    }
    if a.synthetic_airline {
        let shard = synthetic_airline(a.n, a.seed);
        let names: Vec<String> = COLUMNS.iter().map(|c| c.to_string()).collect();
        write_csv(&a.out, &shard, RESPONSE, &names)?;
        println!("wrote {} synthetic airline rows to {}", a.n, a.out.display());
        return Ok(());
    }
    let mut shard = generate(a.family, a.n, &a.beta, a.law, a.seed)?;
    if a.sort_by_covariate_sum {
        // Same ordering as covariate-sum sharding: ascending sum, ties by index.
        let mut order: Vec<usize> = (0..shard.len()).collect();
        let z: Vec<f64> = shard.rows().map(|(_, r)| r.iter().sum()).collect();
        order.sort_by(|&i, &j| z[i].total_cmp(&z[j]).then(i.cmp(&j)));
        shard = shard.select(&order);
    }
    let names: Vec<String> = (1..=shard.dim()).map(|j| format!("x{j}")).collect();
    write_csv(&a.out, &shard, "y", &names)?;
    println!("wrote {} rows to {}", a.n, a.out.display());
    Ok(())
}
