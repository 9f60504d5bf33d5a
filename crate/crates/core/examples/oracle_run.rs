//! One-time oracle run at the pinned seed: prints the raw quantities the
//! frozen verification constants were read from.

use fusionspec::freeprob::{kolmogorov_distance, sigma_matrices, SpectralMeasure};
use fusionspec::inference::{draw_pair, DrawModel};
use fusionspec::kernelgraph::degree_deviation;
use fusionspec::verify::{
    check_edge_cluster, check_rigidity, constants, kernel_product_density, mc_free_conv_oracle, EDGE_ETA,
};
use fusionspec::{FusionKind, KernelFn, Purpose, SeedSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = constants().pinned_seed;
    let k = KernelFn::gaussian(1.0)?;

    let (x, _) = draw_pair(DrawModel::Null, 500, 500, 500, seed, 0)?;
    let r = check_rigidity(&x, &k)?;
    let ratio = r
        .deviations
        .iter()
        .zip(&r.band)
        .map(|(d, b)| d / b)
        .fold(0.0, f64::max);
    println!(
        "rigidity n=500: bulk median {:.5}, i=1 deviation {:.5} (n^-1/9 = {:.4}), worst deviation/band {ratio:.3}, pass {:.3}",
        r.bulk_median,
        r.deviations[0],
        500f64.powf(-1.0 / 9.0),
        r.pass_fraction
    );
    let bx = fusionspec::kernelgraph::build_affinity(&x, &k)?;
    println!(
        "degree deviation {:.5} vs log n / sqrt n = {:.5}",
        degree_deviation(&bx),
        (500f64).ln() / 500f64.sqrt()
    );
    let split = (500f64).powf(5.0 / 6.0 + 0.03) as usize;
    let edge_max = r.deviations[..split].iter().fold(0.0f64, |a, &b| a.max(b));
    let bulk_scaled = r.deviations[split..]
        .iter()
        .enumerate()
        .map(|(o, d)| d * ((split + o + 1) as f64).powf(1.0 / 3.0) / 500f64.powf(1.0 / 12.0 + 0.01))
        .fold(0.0f64, f64::max);
    println!(
        "edge regime max dev {edge_max:.5} => C_edge >= {:.4}; bulk regime C_bulk >= {bulk_scaled:.4}",
        edge_max / 500f64.powf(-1.0 / 9.0 + 0.04)
    );

    for kind in [FusionKind::Ncca, FusionKind::Ad] {
        let (x, y) = draw_pair(DrawModel::Null, 400, 400, 400, seed, 1)?;
        let e = check_edge_cluster(&x, &y, &k, 10, kind)?;
        println!(
            "{kind} edge n=400: prediction {:.5}, gaps {:?}, max {:.4} (=> C >= {:.3}), trivial gap {:.2e}, max imag ratio {:.3e}",
            e.prediction,
            e.gaps.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>(),
            e.max_gap(),
            e.max_gap() / 400f64.powf(-1.0 / 9.0),
            e.trivial_gap,
            e.imaginary_ratios.iter().fold(0.0f64, |a, &b| a.max(b))
        );
    }

    let n = 400;
    let nu = SpectralMeasure::kernel_law(&k, n, n)?;
    let (sx, sy) = sigma_matrices(&nu, &nu, n, n, n, k.varsigma())?;
    let emp = mc_free_conv_oracle(&sx, &sy, 50, SeedSpec::new(seed, 0, Purpose::Haar))?;
    let inv = kernel_product_density(&k, n, n, n, EDGE_ETA)?;
    println!(
        "oracle n=400, 50 trials: Kolmogorov {:.5}, renormalization {:.6}, edges {:?}",
        kolmogorov_distance(&emp, &SpectralMeasure::Grid(inv.density)),
        inv.renormalization,
        inv.edges
    );
    Ok(())
}
