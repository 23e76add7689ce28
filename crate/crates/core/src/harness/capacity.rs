use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hdc::{capacity, crossover_dimension, log10_capacity, orthogonality_probability};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRow {
    pub dims: usize,
    /// Probability that two random vectors are pseudo-orthogonal.
    pub probability: f64,
    /// Largest set size that is expected to stay pairwise pseudo-orthogonal;
    /// infinite when it overflows `f64`.
    pub capacity: f64,
    pub log10_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityTable {
    pub rows: Vec<CapacityRow>,
    /// Smallest dimension whose capacity exceeds the dimension itself.
    pub crossover: usize,
}

pub fn capacity_table(dims: &[usize]) -> Result<CapacityTable> {
    let rows = dims
        .iter()
        .map(|&d| {
            if d == 0 {
                return Err(Error::Validation("dimension must be at least 1".into()));
            }
            Ok(CapacityRow {
                dims: d,
                probability: orthogonality_probability(d),
                capacity: capacity(d),
                log10_capacity: log10_capacity(d),
            })
        })
        .collect::<Result<_>>()?;
    Ok(CapacityTable {
        rows,
        crossover: crossover_dimension(),
    })
}

/// The dimensions plotted by default: 500 to 4000 in steps of 250, plus 4148.
pub fn default_capacity_dims() -> Vec<usize> {
    let mut d: Vec<usize> = (2..=16).map(|i| i * 250).collect();
    d.push(4148);
    d
}

fn fmt_capacity(row: &CapacityRow) -> String {
    if row.capacity.is_finite() && row.capacity < 1e15 {
        format!("{}", row.capacity)
    } else {
        format!("1e{:.2}", row.log10_capacity)
    }
}

impl CapacityTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dims,probability,capacity,log10_capacity\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.12},{},{:.6}\n",
                r.dims,
                r.probability,
                fmt_capacity(r),
                r.log10_capacity
            ));
        }
        s
    }
}

impl fmt::Display for CapacityTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8}  {:>14}  {:>14}", "D", "P", "N")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>8}  {:>14.10}  {:>14}",
                r.dims,
                r.probability,
                fmt_capacity(r)
            )?;
        }
        write!(f, "capacity exceeds D from D = {}", self.crossover)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increasing_and_crossover() {
        let t = capacity_table(&default_capacity_dims()).unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].capacity > w[0].capacity));
        assert!(t.to_csv().contains("\n3000,"));
        assert!(capacity_table(&[0]).is_err());
    }
}
