//! Calibrates one `(p1, p2, n)` setting and prints `θ*`, `L*` and the time
//! taken. Usage: `calibrate_table <p1> <p2> <n> <B> [seed]`.

use std::time::Instant;

use fusionspec::inference::{calibrate, CalibrationSpec};
use fusionspec::KernelFn;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let [p1, p2, n, b] = args[..4] else {
        return Err("usage: calibrate_table <p1> <p2> <n> <B> [seed]".into());
    };
    let seed = args.get(4).copied().unwrap_or(1);
    let spec = CalibrationSpec::new(n as usize, p1 as usize, p2 as usize, 0.95, 80, b as usize);
    let start = Instant::now();
    let table = calibrate(&spec, &KernelFn::gaussian(1.0)?, seed)?;
    println!(
        "(p1, p2, n) = ({p1}, {p2}, {n}), B = {b}: theta* = {:.5}, L* = {}, {:.1}s",
        table.theta_star,
        table.l_star,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
