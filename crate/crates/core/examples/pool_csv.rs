//! Writing and reading a candidate pool in the `id,x1..xd,y1..ym` layout.
//!
//! cargo run --example pool_csv

use moccas::synthetic::{make_pool, make_smooth_problem};
use moccas::{Pool, ProblemKind};

fn main() -> moccas::Result<()> {
    let problem = make_smooth_problem(ProblemKind::Blobs, 2, 2, 3)?;
    let pool = make_pool(&problem, 5, 4)?;
    let path = std::env::temp_dir().join("moccas-pool-example.csv");
    pool.write_csv(&path)?;
    print!("{}", std::fs::read_to_string(&path)?);

    let loaded = Pool::load_csv(&path)?;
    println!("loaded {} rows, d={}, m={:?}", loaded.len(), loaded.dim(), loaded.objectives());

    match Pool::from_csv_str("id,x1,y1\nA,0.1,0.2\nB,0.3,oops\n") {
        Err(e) => println!("bad file: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
