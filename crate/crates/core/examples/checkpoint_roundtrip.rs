//! Saves a policy, shows the text manifest and loads it back.
//!
//!     cargo run --release --example checkpoint_roundtrip

use spde_rl::experiment::{initial_policy, preset};
use spde_rl::policy::{read_checkpoint, write_checkpoint};

fn main() -> anyhow::Result<()> {
    let cfg = preset("heat-2d").expect("built-in preset");
    let params = initial_policy(&cfg)?;
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &params)?;
    let end = bytes.windows(4).position(|w| w == b"end\n").map_or(bytes.len(), |p| p + 4);
    print!("{}", String::from_utf8_lossy(&bytes[..end]));
    println!("({} bytes of parameters follow)", bytes.len() - end);
    let back = read_checkpoint(bytes.as_slice())?;
    anyhow::ensure!(back == params, "checkpoint did not round-trip");
    println!("loaded {} parameters, identical to the saved ones", back.len());
    Ok(())
}
