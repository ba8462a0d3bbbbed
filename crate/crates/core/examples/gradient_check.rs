//! Compares analytic LSTM gradients against central finite differences
//! on a few random small networks.
//!
//! cargo run --example gradient_check

use loadcast::lstm::{backward, finite_diff_grad, init_parameters, sequence_forward, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> loadcast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("{:>2} {:>2} {:>2} {:>2} {:>12}  worst entry", "d", "H", "L", "K", "max rel err");
    for seed in 0..6 {
        let (d, h, l, k) = (rng.gen_range(1..=5), rng.gen_range(1..=6), rng.gen_range(1..=8), rng.gen_range(1..=3));
        let (p, head) = init_parameters(seed, d, h, k)?;
        let x = Matrix::from_fn(l, d, |_, _| rng.gen_range(-1.0..1.0));
        let target: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let (_, cache) = sequence_forward(&p, &head, &x)?;
        let analytic = backward(&p, &head, &cache, &target)?;
        let numeric = finite_diff_grad(&p, &head, &x, &target, 1e-5)?;
        let err = analytic.max_relative_error(&numeric, 1e-4);
        let worst = analytic.worst_entry(&numeric, 1e-4).map(|(name, i, a, n)| format!("{name}[{i}] {a:+.6e} vs {n:+.6e}"));
        println!("{d:>2} {h:>2} {l:>2} {k:>2} {err:>12.3e}  {}", worst.unwrap_or_default());
    }
    Ok(())
}
