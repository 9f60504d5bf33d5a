use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fusionspec::freeprob::{
    invert_to_density, kolmogorov_distance, sigma_matrices, FreeAddConv, FreeMultConv, InvertedDensity,
    SpectralMeasure,
};
use fusionspec::fusion::{fusion_from_clouds, reduction_chain};
use fusionspec::inference::{
    calibrate as run_calibration, draw_pair, imaginary_ratio_profile, power_curve, run_test, CalibrationSpec,
    CalibrationTable, DrawModel, PowerSpec,
};
use fusionspec::io::{fmt_f64, read_matrix_csv, write_table};
use fusionspec::rngkit::sample_goe;
use fusionspec::spectra::eigenvalues_general;
use fusionspec::verify::{
    check_edge_cluster, check_rigidity, constants, inequality_harness, kernel_product_density, mc_free_conv_oracle,
    EDGE_ETA,
};
use fusionspec::{DataCloud, FusionKind, KernelFn, Purpose, SeedSpec};
use serde::Serialize;

use crate::measure::{parse_grid, parse_measure};
use crate::{CliError, Common, ConvolutionChoice, KernelChoice, VerifyCheck};

type CliResult = Result<(), CliError>;

fn kernel(common: &Common) -> Result<KernelFn, CliError> {
    match common.kernel {
        KernelChoice::Gaussian => Ok(KernelFn::gaussian(common.sigma)?),
    }
}

/// Buffered writer to `path`, or to stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_cloud(path: &Path) -> Result<DataCloud, CliError> {
    Ok(DataCloud::read_csv(File::open(path)?)?)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    common: &Common,
    n: usize,
    p1: usize,
    p2: usize,
    model: DrawModel,
    statistic: FusionKind,
    emit_chain: bool,
    emit_data: bool,
) -> CliResult {
    let k = kernel(common)?;
    let (x, y) = draw_pair(model, n, p1, p2, common.seed, 0)?;
    let spec = fusion_from_clouds(&x, &y, &k, statistic)?.into_scaled().spectrum()?;
    let Some(dir) = common.out.as_deref() else {
        if emit_chain || emit_data {
            log::warn!("--emit-chain and --emit-data need --out; writing the spectrum only");
        }
        let mut out = sink(None)?;
        spec.write_csv(&mut out)?;
        return Ok(out.flush()?);
    };
    fs::create_dir_all(dir)?;
    spec.write_csv(BufWriter::new(File::create(dir.join("spectrum.csv"))?))?;
    let ratios = imaginary_ratio_profile(&spec, spec.len())?;
    write_table(
        BufWriter::new(File::create(dir.join("imag_ratio.csv"))?),
        &["rank", "ratio"],
        ratios.iter().enumerate().map(|(i, r)| [(i + 1).to_string(), fmt_f64(*r)]),
    )?;
    if emit_chain {
        let chain = reduction_chain(&x, &y, &k, SeedSpec::new(common.seed, 0, Purpose::Haar))?;
        for member in &chain {
            let file = File::create(dir.join(format!("chain_{}.csv", member.kind.label())))?;
            member.spectrum()?.write_csv_labeled(BufWriter::new(file), "index")?;
        }
    }
    if emit_data {
        x.write_csv(BufWriter::new(File::create(dir.join("x.csv"))?))?;
        y.write_csv(BufWriter::new(File::create(dir.join("y.csv"))?))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    common: &Common,
    n: usize,
    p1: usize,
    p2: usize,
    alpha: f64,
    l0: usize,
    b: usize,
    statistic: FusionKind,
) -> CliResult {
    let mut spec = CalibrationSpec::new(n, p1, p2, alpha, l0, b);
    spec.statistic = statistic;
    let table = run_calibration(&spec, &kernel(common)?, common.seed)?;
    write_json(common.out.as_deref(), &table)
}

pub fn test(common: &Common, x: &Path, y: &Path, calibration: &Path) -> CliResult {
    let calib = CalibrationTable::from_json(&fs::read_to_string(calibration)?)?;
    let outcome = run_test(&read_cloud(x)?, &read_cloud(y)?, &kernel(common)?, &calib)?;
    write_json(common.out.as_deref(), &outcome)
}

pub fn power(common: &Common, ns: &[usize], p1: usize, p2: usize, spec: &PowerSpec) -> CliResult {
    let settings: Vec<_> = ns.iter().map(|&n| (n, p1, p2)).collect();
    let rows = power_curve(&settings, &kernel(common)?, spec, SeedSpec::new(common.seed, 0, Purpose::Other))?;
    let out = sink(common.out.as_deref())?;
    write_table(
        out,
        &["n", "p1", "p2", "theta_star", "L_star", "rejections", "trials", "power"],
        rows.iter().map(|r| {
            [
                r.n.to_string(),
                r.p1.to_string(),
                r.p2.to_string(),
                fmt_f64(r.theta_star),
                r.l_star.to_string(),
                r.rejections.to_string(),
                r.trials.to_string(),
                fmt_f64(r.power),
            ]
        }),
    )?;
    Ok(())
}

pub fn spectrum(
    common: &Common,
    matrix: Option<&Path>,
    clouds: Option<(&Path, &Path)>,
    statistic: FusionKind,
    scaled: bool,
) -> CliResult {
    let spec = match (matrix, clouds) {
        (Some(m), None) => eigenvalues_general(read_matrix_csv(File::open(m)?)?.as_ref())?,
        (None, Some((x, y))) => {
            let m = fusion_from_clouds(&read_cloud(x)?, &read_cloud(y)?, &kernel(common)?, statistic)?;
            if scaled { m.into_scaled() } else { m }.spectrum()?
        }
        _ => return Err(CliError::Usage("give either --matrix or both --x and --y".into())),
    };
    spec.write_csv(sink(common.out.as_deref())?)?;
    Ok(())
}

fn convolve(a: SpectralMeasure, b: SpectralMeasure, eta: f64, op: ConvolutionChoice) -> Result<InvertedDensity, CliError> {
    let (a0, a1) = a.hull();
    let (b0, b1) = b.hull();
    let (lo, hi) = match op {
        ConvolutionChoice::Mult => (a0 * b0, a1 * b1),
        ConvolutionChoice::Add => (a0 + b0, a1 + b1),
    };
    let bracket = {
        let pad = 0.05 * (hi - lo).max(1e-3);
        (lo - pad, hi + pad)
    };
    Ok(match op {
        ConvolutionChoice::Mult => invert_to_density(&FreeMultConv::new(a, b)?, bracket, eta)?,
        ConvolutionChoice::Add => invert_to_density(&FreeAddConv::new(a, b), bracket, eta)?,
    })
}

pub fn freeconv(common: &Common, a: &str, b: &str, grid: Option<&str>, eta: f64, op: ConvolutionChoice) -> CliResult {
    let a = parse_measure(a)?;
    let b = parse_measure(b)?;
    let grid = grid.map(parse_grid).transpose()?;
    let inv = convolve(a, b, eta, op)?;
    for (x, w) in inv.density.atoms() {
        log::info!("atom at {x} with mass {w}");
    }
    let out = sink(common.out.as_deref())?;
    match grid {
        None => inv.density.write_csv(out)?,
        Some(xs) => write_table(
            out,
            &["x", "density"],
            xs.iter().map(|&x| [fmt_f64(x), fmt_f64(inv.density.density(x))]),
        )?,
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    n: usize,
    p1: usize,
    p2: usize,
    trials: usize,
    kolmogorov: f64,
    bound: f64,
    renormalization: f64,
    edges: (f64, f64),
}

#[derive(Serialize)]
struct InequalitySummary {
    n: usize,
    draws: usize,
    hoffman_wielandt_violations: usize,
    weyl_violations: usize,
    levy_violations: usize,
    max_hw_ratio: f64,
}

pub fn verify(common: &Common, check: VerifyCheck) -> CliResult {
    let out = common.out.as_deref();
    let seed = common.seed;
    match check {
        VerifyCheck::Rigidity { n, p } => {
            let (x, _) = draw_pair(DrawModel::Null, n, p, p, seed, 0)?;
            write_json(out, &check_rigidity(&x, &kernel(common)?)?)
        }
        VerifyCheck::Edge {
            n,
            p1,
            p2,
            l,
            statistic,
        } => {
            let (x, y) = draw_pair(DrawModel::Null, n, p1, p2, seed, 0)?;
            write_json(out, &check_edge_cluster(&x, &y, &kernel(common)?, l, statistic.into())?)
        }
        VerifyCheck::Oracle { n, p1, p2, trials } => {
            let k = kernel(common)?;
            let (p1, p2) = (p1.unwrap_or(n), p2.unwrap_or(n));
            let nu_x = SpectralMeasure::kernel_law(&k, n, p1)?;
            let nu_y = SpectralMeasure::kernel_law(&k, n, p2)?;
            let (sx, sy) = sigma_matrices(&nu_x, &nu_y, n, p1, p2, k.varsigma())?;
            let emp = mc_free_conv_oracle(&sx, &sy, trials, SeedSpec::new(seed, 0, Purpose::Haar))?;
            let inv = kernel_product_density(&k, n, p1, p2, EDGE_ETA)?;
            let report = OracleReport {
                n,
                p1,
                p2,
                trials,
                kolmogorov: kolmogorov_distance(&emp, &SpectralMeasure::Grid(inv.density)),
                bound: constants().mc_kolmogorov_max,
                renormalization: inv.renormalization,
                edges: inv.edges,
            };
            write_json(out, &report)
        }
        VerifyCheck::Inequalities { n, draws } => {
            let mut summary = InequalitySummary {
                n,
                draws,
                hoffman_wielandt_violations: 0,
                weyl_violations: 0,
                levy_violations: 0,
                max_hw_ratio: 0.0,
            };
            for d in 0..draws as u64 {
                let a = sample_goe(n, SeedSpec::new(seed, 2 * d, Purpose::Other))?;
                let b = sample_goe(n, SeedSpec::new(seed, 2 * d + 1, Purpose::Other))?;
                let r = inequality_harness(&a, &b)?;
                summary.hoffman_wielandt_violations += usize::from(!r.hw_ok);
                summary.weyl_violations += r.weyl_violations;
                summary.levy_violations += usize::from(!r.levy_bound_ok);
                summary.max_hw_ratio = summary.max_hw_ratio.max(r.hw_lhs / r.hw_rhs);
            }
            write_json(out, &summary)
        }
    }
}
