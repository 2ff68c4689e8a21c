//! Monte Carlo check of the cylindrical noise scaling: pointwise variance
//! `dt / dx^d` and `Var <f, dW> = dt <f, f>`.
//!
//!     cargo run --release --example noise_calibration -- 20000

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spde_rl::field::{inner_product, make_grid, sample_noise, Field};

fn main() -> anyhow::Result<()> {
    let samples: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let dt = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (dim, extent, points) in [(1, 1.0, 64), (2, 0.25, 32)] {
        let grid = make_grid(dim, extent, points)?;
        let f = Field::from_fn(&grid, |p| (3.0 * p[0] / extent).sin() + p[1] / extent);
        let node = grid.node_count() / 2;
        let (mut pair_sq, mut point_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let dw = sample_noise(&grid, dt, &mut rng);
            pair_sq += dw.pair(&f)?.powi(2);
            point_sq += dw.increment_field()[node].powi(2);
        }
        let n = samples as f64;
        println!(
            "{dim}D: Var<f, dW> = {:.5e} vs dt<f, f> = {:.5e};  Var dW_j = {:.4} vs dt/dx^d = {:.4}",
            pair_sq / n,
            dt * inner_product(&f, &f)?,
            point_sq / n,
            dt / grid.cell_volume()
        );
    }
    Ok(())
}
