//! Per-node policy outputs `phi(X(e_j))` from one sparse pass versus one
//! dense pass per masked input, for the MLP and the CNN.
//!
//!     cargo run --release --example sparse_forward

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spde_rl::field::{make_grid, Field};
use spde_rl::policy::{init_params, sparse_forward_pass, Architecture, InitScheme};

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (arch, dim, side) in [(Architecture::mlp(64, 5), 1, 64), (Architecture::cnn(32, 5), 2, 32)] {
        let grid = make_grid(dim, 1.0, side)?;
        let params = init_params(&arch, &mut rng, InitScheme::Rectifier)?;
        let x = Field::new(&grid, (0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect())?;

        let t = Instant::now();
        let sparse = sparse_forward_pass(&params, &x)?;
        let sparse_time = t.elapsed();

        let t = Instant::now();
        let mut worst: f64 = 0.0;
        for (j, out) in sparse.iter().enumerate() {
            let mut masked = vec![0.0; grid.node_count()];
            masked[j] = x.values()[j];
            for (a, b) in out.iter().zip(params.forward_values(&masked)?) {
                worst = worst.max((a - b).abs());
            }
        }
        println!(
            "{}: {} nodes, sparse {:.2?} vs dense {:.2?}, max deviation {worst:.1e}",
            arch.name(),
            grid.node_count(),
            sparse_time,
            t.elapsed()
        );
    }
    Ok(())
}
