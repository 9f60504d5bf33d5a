//! Subordination fixed points for free multiplicative (⊠) and additive (⊞)
//! convolution.
//!
//! ⊠, with `L(w) = M(w)/w = m(w)/(1 + w m(w))`:
//! `Ω_a = z L_a(Ω_b)`, `Ω_b = z L_b(Ω_a)`, `M_{a⊠b}(z) = M_a(Ω_b) = M_b(Ω_a)`.
//!
//! ⊞, with `h(w) = −1/m(w) − w`:
//! `ω_a = z + h_b(ω_b)`, `ω_b = z + h_a(ω_a)`, `m_{a⊞b}(z) = m_a(ω_a)`.
//!
//! The solver runs the damped iteration and switches to Newton once the
//! residual is small or the iteration stalls.

use num_complex::Complex64;
use serde::Serialize;

use super::transforms::{s_transform, StieltjesTransform};
use super::SpectralMeasure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubordinationResult {
    pub omega_a: Complex64,
    pub omega_b: Complex64,
    pub m_conv: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

/// Residual level below which Newton steps take over.
const NEWTON_SWITCH: f64 = 1e-3;
/// Iterations without a halving of the residual before forcing Newton.
const STALL_WINDOW: usize = 25;

type Pair = (Complex64, Complex64);

/// A coupled fixed-point system `Ω = G(Ω)` in two unknowns.
trait System {
    /// `G(Ω)` and the off-diagonal Jacobian entries `∂G₁/∂Ω₂`, `∂G₂/∂Ω₁`.
    fn map(&self, omega: Pair) -> Option<(Pair, Pair)>;
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn defect(omega: Pair, g: Pair) -> f64 {
    let r1 = (omega.0 - g.0).norm() / (1.0 + omega.0.norm());
    let r2 = (omega.1 - g.1).norm() / (1.0 + omega.1.norm());
    r1.max(r2)
}

fn solve_system<S: System>(sys: &S, init: Pair, opts: SolverOptions) -> Result<(Pair, usize, f64)> {
    let mut omega = init;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let Some((g, dg)) = sys.map(omega) else {
            return Err(Error::Subordination {
                iterations: it,
                residual,
            });
        };
        residual = defect(omega, g);
        if residual < opts.tol {
            return Ok((omega, it, residual));
        }
        if residual < 0.5 * best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if residual < NEWTON_SWITCH || since_best >= STALL_WINDOW {
            if let Some(next) = newton_step(sys, omega, g, dg, residual) {
                omega = next;
                continue;
            }
        }
        let d = opts.damping;
        omega = (
            (1.0 - d) * omega.0 + d * g.0,
            (1.0 - d) * omega.1 + d * g.1,
        );
    }
    Err(Error::Subordination {
        iterations: opts.max_iter,
        residual,
    })
}

/// Newton step on `F(Ω) = Ω − G(Ω)` with backtracking; `None` when no step
/// length reduces the residual.
fn newton_step<S: System>(sys: &S, omega: Pair, g: Pair, dg: Pair, residual: f64) -> Option<Pair> {
    let f = (omega.0 - g.0, omega.1 - g.1);
    // J = [[1, −dg.0], [−dg.1, 1]]
    let det = 1.0 - dg.0 * dg.1;
    if det.norm() < 1e-300 || !finite(det) {
        return None;
    }
    let step = ((f.0 + dg.0 * f.1) / det, (f.1 + dg.1 * f.0) / det);
    let mut t = 1.0;
    for _ in 0..30 {
        let cand = (omega.0 - t * step.0, omega.1 - t * step.1);
        if finite(cand.0) && finite(cand.1) {
            if let Some((gc, _)) = sys.map(cand) {
                if defect(cand, gc) < residual {
                    return Some(cand);
                }
            }
        }
        t *= 0.5;
    }
    None
}

fn upper_half_ok(z: Complex64, r: &SubordinationResult) -> bool {
    if z.im <= 0.0 {
        return true;
    }
    let slack = 1e-10 * (1.0 + z.norm());
    r.m_conv.im >= -slack && r.omega_a.im >= -slack && r.omega_b.im >= -slack
}

struct MultSystem<'a> {
    a: &'a SpectralMeasure,
    b: &'a SpectralMeasure,
    z: Complex64,
}

/// `(L(w), L′(w))`.
fn l_and_dl(mu: &SpectralMeasure, w: Complex64) -> Option<(Complex64, Complex64)> {
    if mu.on_support(w) {
        return None;
    }
    let (m, dm) = mu.m_dm_raw(w);
    let q = 1.0 + w * m;
    let l = m / q;
    let dl = (dm - m * m) / (q * q);
    (finite(l) && finite(dl)).then_some((l, dl))
}

impl System for MultSystem<'_> {
    fn map(&self, (oa, ob): Pair) -> Option<(Pair, Pair)> {
        let (la, dla) = l_and_dl(self.a, ob)?;
        let (lb, dlb) = l_and_dl(self.b, oa)?;
        Some(((self.z * la, self.z * lb), (self.z * dla, self.z * dlb)))
    }
}

struct AddSystem<'a> {
    a: &'a SpectralMeasure,
    b: &'a SpectralMeasure,
    z: Complex64,
}

/// `(h(w), h′(w))`.
fn h_and_dh(mu: &SpectralMeasure, w: Complex64) -> Option<(Complex64, Complex64)> {
    if mu.on_support(w) {
        return None;
    }
    let (m, dm) = mu.m_dm_raw(w);
    let h = -1.0 / m - w;
    let dh = dm / (m * m) - 1.0;
    (finite(h) && finite(dh)).then_some((h, dh))
}

impl System for AddSystem<'_> {
    fn map(&self, (wa, wb): Pair) -> Option<(Pair, Pair)> {
        let (hb, dhb) = h_and_dh(self.b, wb)?;
        let (ha, dha) = h_and_dh(self.a, wa)?;
        Some(((self.z + hb, self.z + ha), (dhb, dha)))
    }
}

/// Solves a convolution at `z`, optionally warm-started.
pub trait ConvolutionSolver: Sync {
    fn solve(&self, z: Complex64, init: Option<Pair>) -> Result<SubordinationResult>;

    /// Atoms of the convolution.
    fn atoms(&self) -> Vec<(f64, f64)>;

    /// Interval containing the support.
    fn hull(&self) -> (f64, f64);
}

/// Merges atom candidates `(x, w + v − 1)` keeping positive masses.
fn product_atoms<F: Fn(f64, f64) -> f64>(a: &SpectralMeasure, b: &SpectralMeasure, op: F) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (x, w) in a.atoms() {
        for (y, v) in b.atoms() {
            let mass = w + v - 1.0;
            if mass > 1e-12 {
                out.push((op(x, y), mass));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct FreeMultConv {
    pub a: SpectralMeasure,
    pub b: SpectralMeasure,
    pub options: SolverOptions,
}

impl FreeMultConv {
    /// Both measures must live on `[0, ∞)`.
    pub fn new(a: SpectralMeasure, b: SpectralMeasure) -> Result<Self> {
        for (name, mu) in [("first", &a), ("second", &b)] {
            let lo = mu.hull().0;
            if lo < 0.0 {
                return Err(Error::Domain(format!(
                    "free multiplicative convolution needs nonnegative support; {name} measure starts at {lo}"
                )));
            }
        }
        Ok(Self {
            a,
            b,
            options: SolverOptions::default(),
        })
    }

    fn solve_unchecked(&self, z: Complex64, init: Option<Pair>) -> Result<SubordinationResult> {
        let (lo, hi) = ConvolutionSolver::hull(self);
        if z.im == 0.0 && z.re >= lo.min(0.0) && z.re <= hi {
            return Err(Error::Domain(format!(
                "real z = {} must lie below {} (or be non-real)",
                z.re,
                lo.min(0.0)
            )));
        }
        let sys = MultSystem {
            a: &self.a,
            b: &self.b,
            z,
        };
        let attempt = |start: Pair| -> Result<SubordinationResult> {
            let ((oa, ob), iterations, residual) = solve_system(&sys, start, self.options)?;
            let (m_a, _) = self.a.m_dm_raw(ob);
            let zm = ob * m_a;
            let big_m = zm / (1.0 + zm);
            let m_conv = big_m / (z * (1.0 - big_m));
            let r = SubordinationResult {
                omega_a: oa,
                omega_b: ob,
                m_conv,
                iterations,
                residual,
            };
            if finite(m_conv) && upper_half_ok(z, &r) {
                Ok(r)
            } else {
                Err(Error::Subordination {
                    iterations,
                    residual: f64::NAN,
                })
            }
        };
        match init {
            Some(start) => attempt(start).or_else(|_| attempt((z, z))),
            None => attempt((z, z)),
        }
    }

    /// Checks `S_{a⊠b}(u) = S_a(u)·S_b(u)` at `u = η_{a⊠b}(1) − 1`, where
    /// `η_{a⊠b}⁻¹(1 + u) = 1` is known exactly.
    pub fn s_multiplicativity_defect(&self) -> Result<f64> {
        let r = self.solve_unchecked(Complex64::new(-1.0, 0.0), None)?;
        let u = r.m_conv.re - 1.0;
        let lhs = -(u + 1.0) / u;
        let rhs = s_transform(&self.a, u)? * s_transform(&self.b, u)?;
        Ok((lhs - rhs).abs() / lhs.abs())
    }
}

impl ConvolutionSolver for FreeMultConv {
    fn solve(&self, z: Complex64, init: Option<Pair>) -> Result<SubordinationResult> {
        self.solve_unchecked(z, init)
    }

    fn atoms(&self) -> Vec<(f64, f64)> {
        let mut atoms = product_atoms(&self.a, &self.b, |x, y| x * y);
        // a zero atom of either factor survives with its full mass
        let zero = self.a.mass_at(0.0).max(self.b.mass_at(0.0));
        if zero > 0.0 {
            atoms.retain(|a| a.0 != 0.0);
            atoms.push((0.0, zero));
        }
        atoms
    }

    fn hull(&self) -> (f64, f64) {
        let (a0, a1) = self.a.hull();
        let (b0, b1) = self.b.hull();
        (a0 * b0, a1 * b1)
    }
}

impl StieltjesTransform for FreeMultConv {
    fn m_off_support(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.solve_unchecked(z, None)?.m_conv)
    }

    fn hull(&self) -> (f64, f64) {
        ConvolutionSolver::hull(self)
    }

    fn mass_at_zero(&self) -> f64 {
        self.a.mass_at(0.0).max(self.b.mass_at(0.0))
    }
}

#[derive(Debug, Clone)]
pub struct FreeAddConv {
    pub a: SpectralMeasure,
    pub b: SpectralMeasure,
    pub options: SolverOptions,
}

impl FreeAddConv {
    pub fn new(a: SpectralMeasure, b: SpectralMeasure) -> Self {
        Self {
            a,
            b,
            options: SolverOptions::default(),
        }
    }
}

impl ConvolutionSolver for FreeAddConv {
    fn solve(&self, z: Complex64, init: Option<Pair>) -> Result<SubordinationResult> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!("Im z must be positive, got {z}")));
        }
        let sys = AddSystem {
            a: &self.a,
            b: &self.b,
            z,
        };
        let attempt = |start: Pair| -> Result<SubordinationResult> {
            let ((wa, wb), iterations, residual) = solve_system(&sys, start, self.options)?;
            let m_conv = self.a.m_dm_raw(wa).0;
            let r = SubordinationResult {
                omega_a: wa,
                omega_b: wb,
                m_conv,
                iterations,
                residual,
            };
            if finite(m_conv) && upper_half_ok(z, &r) {
                Ok(r)
            } else {
                Err(Error::Subordination {
                    iterations,
                    residual: f64::NAN,
                })
            }
        };
        match init {
            Some(start) => attempt(start).or_else(|_| attempt((z, z))),
            None => attempt((z, z)),
        }
    }

    fn atoms(&self) -> Vec<(f64, f64)> {
        product_atoms(&self.a, &self.b, |x, y| x + y)
    }

    fn hull(&self) -> (f64, f64) {
        let (a0, a1) = self.a.hull();
        let (b0, b1) = self.b.hull();
        (a0 + b0, a1 + b1)
    }
}

/// `μ_a ⊠ μ_b` at `z` with `Im z > 0`. Debug builds also check S-transform
/// multiplicativity once per call.
pub fn free_mult_convolve(
    a: &SpectralMeasure,
    b: &SpectralMeasure,
    z: Complex64,
) -> Result<SubordinationResult> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("Im z must be positive, got {z}")));
    }
    let conv = FreeMultConv::new(a.clone(), b.clone())?;
    let r = conv.solve(z, None)?;
    #[cfg(debug_assertions)]
    if let Ok(d) = conv.s_multiplicativity_defect() {
        debug_assert!(d < 1e-8, "S-transform multiplicativity defect {d:e}");
    }
    Ok(r)
}

/// `μ_a ⊞ μ_b` at `z` with `Im z > 0`.
pub fn free_add_convolve(
    a: &SpectralMeasure,
    b: &SpectralMeasure,
    z: Complex64,
) -> Result<SubordinationResult> {
    FreeAddConv::new(a.clone(), b.clone()).solve(z, None)
}
