//! How many pseudo-orthogonal random hypervectors fit in D dimensions, and
//! where that overtakes a one-hot code.

use snn_hdc::harness::{capacity_table, default_capacity_dims};
use snn_hdc::hdc::{capacity, log10_capacity};

fn main() -> snn_hdc::Result<()> {
    println!("{}", capacity_table(&default_capacity_dims())?);
    for d in [4148, 129_280] {
        println!("D = {d:>7}: about 10^{:.2} vectors", log10_capacity(d));
    }
    // smallest D that fits a 129,280-token vocabulary
    let need = (1..).find(|&d| capacity(d) >= 129_280.0).unwrap();
    println!("129,280 classes need D = {need}");
    Ok(())
}
