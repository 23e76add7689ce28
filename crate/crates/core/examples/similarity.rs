//! Hamming and cosine similarity on two 10-bit vectors, and how tightly random
//! 1024-bit vectors cluster around orthogonality.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snn_hdc::hdc::{BinaryHypervector, CosineMode};

fn main() -> snn_hdc::Result<()> {
    let a = BinaryHypervector::from_bit_str("0110101100")?;
    let b = BinaryHypervector::from_bit_str("1100100001")?;
    println!("A = {a}\nB = {b}");
    println!("hamming            {}", a.hamming(&b)?);
    println!("normalized hamming {}", a.normalized_hamming(&b)?);
    println!(
        "cosine (binary)    {:.3}",
        a.cosine(&b, CosineMode::Binary)?
    );
    println!(
        "cosine (bipolar)   {:.3}",
        a.cosine(&b, CosineMode::Bipolar)?
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut hist = [0usize; 11];
    let pairs = 10_000;
    for _ in 0..pairs {
        let x = BinaryHypervector::random(1024, &mut rng)?;
        let y = BinaryHypervector::random(1024, &mut rng)?;
        let d = x.normalized_hamming(&y)?;
        hist[(((d - 0.4) / 0.02).floor().clamp(0.0, 10.0)) as usize] += 1;
    }
    println!("\nnormalized distance of {pairs} random pairs at D = 1024:");
    for (i, n) in hist.iter().enumerate() {
        let lo = 0.4 + 0.02 * i as f64;
        println!(
            "  [{lo:.2}, {:.2})  {n:>5}  {}",
            lo + 0.02,
            "#".repeat(n / 100)
        );
    }
    Ok(())
}
