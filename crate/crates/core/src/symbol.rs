//! Scalar phi-functions and diagonal Fourier-multiplier symbols.
//!
//! Every multiplier used by the time steppers is assembled here from four
//! real base symbols:
//!
//! * `Laplacian`   `-|k|^2`
//! * `CNabla`      `c*sqrt(c^2+|k|^2)`
//! * `InvCNabla`   `c/sqrt(c^2+|k|^2)`
//! * `Residual`    `c*sqrt(c^2+|k|^2) - c^2 - |k|^2/2`
//!
//! The residual is the near-degenerate difference between `CNabla` and its
//! leading expansion. Evaluated naively it loses all significant digits for
//! large `c` (at `c = 1e4`, `k = 1` the difference is ~1e-9 against operands
//! of ~1e8), so it is always computed through the equivalent cancellation-free
//! form `-|k|^4 / (2 c^2 (1 + sqrt(1 + |k|^2/c^2))^2)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridKey};

/// Threshold below which phi-functions switch to their Taylor series.
const SERIES_THRESHOLD: f64 = 1e-2;

/// `e^xi - 1` without cancellation for small `xi`.
fn expm1_complex(xi: Complex64) -> Complex64 {
    // e^(a+ib) - 1 = expm1(a) cos b - 2 sin^2(b/2) + i e^a sin b
    let (a, b) = (xi.re, xi.im);
    let half = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * half * half, a.exp() * b.sin())
}

/// `phi_1(xi) = (e^xi - 1)/xi`, entire, with `phi_1(0) = 1`.
///
/// For `|xi| < 1e-2` the truncated Taylor series `sum_{n<8} xi^n/(n+1)!` is
/// used; otherwise the direct formula with an expm1-style numerator.
pub fn phi1(xi: Complex64) -> Complex64 {
    if xi.norm() < SERIES_THRESHOLD {
        // Horner evaluation of sum_{n=0}^{7} xi^n / (n+1)!
        let mut acc = Complex64::new(1.0 / 40320.0, 0.0); // 1/8!
        for inv in [5040.0, 720.0, 120.0, 24.0, 6.0, 2.0, 1.0] {
            acc = acc * xi + 1.0 / inv;
        }
        acc
    } else {
        expm1_complex(xi) / xi
    }
}

/// `Psi_2(xi) = (e^xi - phi_1(xi))/xi`, entire, with `Psi_2(0) = 1/2`.
pub fn psi2(xi: Complex64) -> Complex64 {
    if xi.norm() < SERIES_THRESHOLD {
        // sum_{m=0}^{7} (m+1)/(m+2)! xi^m
        let coeff = |m: f64, fact: f64| m / fact;
        let c = [
            coeff(1.0, 2.0),
            coeff(2.0, 6.0),
            coeff(3.0, 24.0),
            coeff(4.0, 120.0),
            coeff(5.0, 720.0),
            coeff(6.0, 5040.0),
            coeff(7.0, 40320.0),
            coeff(8.0, 362880.0),
        ];
        let mut acc = Complex64::new(c[7], 0.0);
        for k in (0..7).rev() {
            acc = acc * xi + c[k];
        }
        acc
    } else {
        (expm1_complex(xi) + 1.0 - phi1(xi)) / xi
    }
}

/// Base multiplier kinds; all real-valued and even in `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    Laplacian,
    CNabla,
    InvCNabla,
    Residual,
}

/// Speed-of-light-proportional parameter `c > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CParam(f64);

impl CParam {
    pub fn new(c: f64) -> Result<CParam> {
        if c > 0.0 && c.is_finite() {
            Ok(CParam(c))
        } else {
            Err(Error::InvalidParam(format!("c must be positive and finite, got {c}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn squared(self) -> f64 {
        self.0 * self.0
    }
}

/// A diagonal Fourier multiplier: one complex value per grid mode.
#[derive(Clone)]
pub struct Symbol {
    grid_key: GridKey,
    values: Vec<Complex64>,
}

impl Symbol {
    pub fn from_fn(grid: &Grid, f: impl FnMut(usize) -> Complex64) -> Symbol {
        let values = (0..grid.modes()).map(f).collect();
        Symbol { grid_key: grid.key(), values }
    }

    /// Real-valued symbol from per-mode values of `|k|^2`.
    pub fn from_real_fn(grid: &Grid, mut f: impl FnMut(f64) -> f64) -> Symbol {
        let values = grid.k_squared().iter().map(|&k2| Complex64::new(f(k2), 0.0)).collect();
        Symbol { grid_key: grid.key(), values }
    }

    /// The identity multiplier.
    pub fn identity(grid: &Grid) -> Symbol {
        Symbol::from_fn(grid, |_| Complex64::new(1.0, 0.0))
    }

    /// Base multiplier of the given kind. `c` is ignored for `Laplacian`.
    pub fn base(kind: BaseKind, grid: &Grid, c: CParam) -> Symbol {
        let c2 = c.squared();
        match kind {
            BaseKind::Laplacian => Symbol::from_real_fn(grid, |k2| -k2),
            BaseKind::CNabla => Symbol::from_real_fn(grid, |k2| c.value() * (c2 + k2).sqrt()),
            BaseKind::InvCNabla => Symbol::from_real_fn(grid, |k2| c.value() / (c2 + k2).sqrt()),
            BaseKind::Residual => Symbol::from_real_fn(grid, |k2| residual_value(k2, c2)),
        }
    }

    pub fn laplacian(grid: &Grid) -> Symbol {
        Symbol::from_real_fn(grid, |k2| -k2)
    }

    pub fn grid_key(&self) -> GridKey {
        self.grid_key
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Elementwise functional calculus: `values_out(k) = f(values_in(k))`.
    pub fn lift(&self, f: impl Fn(Complex64) -> Complex64) -> Symbol {
        Symbol { grid_key: self.grid_key, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `sum_i alpha_i * s_i + offset`, so every scheme symbol is expressible
    /// as `lift(phi, combine(...))`.
    pub fn combine(terms: &[(Complex64, &Symbol)], offset: Complex64) -> Result<Symbol> {
        let (_, first) = terms.first().ok_or_else(|| {
            Error::InvalidParam("Symbol::combine needs at least one term".into())
        })?;
        let key = first.grid_key;
        let len = first.values.len();
        let mut values = vec![offset; len];
        for (alpha, s) in terms {
            if s.grid_key != key {
                return Err(Error::GridMismatch);
            }
            for (slot, v) in values.iter_mut().zip(&s.values) {
                *slot += alpha * v;
            }
        }
        Ok(Symbol { grid_key: key, values })
    }

    /// Pointwise product of two symbols.
    pub fn product(&self, other: &Symbol) -> Result<Symbol> {
        if self.grid_key != other.grid_key {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Symbol { grid_key: self.grid_key, values })
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `c*sqrt(c^2+k2) - c^2 - k2/2` through the cancellation-free closed form.
fn residual_value(k2: f64, c2: f64) -> f64 {
    let g = (1.0 + k2 / c2).sqrt();
    -(k2 * k2) / (2.0 * c2 * (1.0 + g) * (1.0 + g))
}

/// Real argument vectors for every multiplier appearing in the schemes,
/// expressed exactly through `(c^2, |k|^2, residual)` so that no argument
/// suffers catastrophic cancellation for large `c`.
struct SchemeArgs {
    /// `-|k|^2` (the Laplacian symbol).
    lap: Vec<f64>,
    /// Residual `c<nabla>_c - c^2 + Delta/2`.
    res: Vec<f64>,
    c2: f64,
}

impl SchemeArgs {
    fn new(grid: &Grid, c: CParam) -> SchemeArgs {
        let c2 = c.squared();
        let lap: Vec<f64> = grid.k_squared().iter().map(|&k2| -k2).collect();
        let res: Vec<f64> = grid.k_squared().iter().map(|&k2| residual_value(k2, c2)).collect();
        SchemeArgs { lap, res, c2 }
    }

    /// `c<nabla>_c = c^2 - Delta/2 + residual`.
    fn cnabla(&self, i: usize) -> f64 {
        self.c2 - 0.5 * self.lap[i] + self.res[i]
    }

    /// `c<nabla>_c - Delta/2 = c^2 - Delta + residual`.
    fn a_minus(&self, i: usize) -> f64 {
        self.c2 - self.lap[i] + self.res[i]
    }

    /// `c<nabla>_c + Delta/2 = c^2 + residual`.
    fn a_plus(&self, i: usize) -> f64 {
        self.c2 + self.res[i]
    }
}

fn unitary(grid: &Grid, phase: impl Fn(usize) -> f64) -> Symbol {
    Symbol::from_fn(grid, |i| Complex64::cis(phase(i)))
}

fn phi1_of(grid: &Grid, arg: impl Fn(usize) -> f64) -> Symbol {
    Symbol::from_fn(grid, |i| phi1(Complex64::new(0.0, arg(i))))
}

fn psi2_of(grid: &Grid, arg: impl Fn(usize) -> f64) -> Symbol {
    Symbol::from_fn(grid, |i| psi2(Complex64::new(0.0, arg(i))))
}

fn sub(a: &Symbol, b: &Symbol) -> Symbol {
    Symbol::combine(
        &[(Complex64::new(1.0, 0.0), a), (Complex64::new(-1.0, 0.0), b)],
        Complex64::default(),
    )
    .expect("same-grid symbols")
}

/// Every multiplier needed by one step of any scheme at fixed `(grid, c, tau)`.
///
/// Construction is pure and the struct is immutable, so a single instance can
/// be shared read-only across concurrent trajectories.
pub struct SchemeSymbols {
    pub c: CParam,
    pub tau: f64,

    /// `exp(i tau c<nabla>_c)`.
    pub exp_cnabla: Symbol,
    /// `c <nabla>_c^{-1}` (multiplier `c/sqrt(c^2+|k|^2)`).
    pub inv_cnabla: Symbol,
    /// `exp(+-i tau Delta / 2)`.
    pub exp_half_lap: Symbol,
    pub exp_half_lap_neg: Symbol,
    /// Limit free flow on the twisted variable: `exp(i tau c^2) exp(-i tau Delta/2)`.
    pub exp_limit_u: Symbol,

    /// `phi1(i tau (Delta - c^2))`.
    pub phi1_dm: Symbol,
    /// `phi1(i tau (c<nabla>_c - Delta/2))` and `phi1(-i tau (c<nabla>_c + Delta/2))`.
    pub phi1_am: Symbol,
    pub phi1_ap_neg: Symbol,

    /// `Psi2(i tau (Delta - c^2))`.
    pub psi2_dm: Symbol,
    /// `Psi2(+-i tau ...)` companions of `phi1_am` / `phi1_ap_neg`.
    pub psi2_am: Symbol,
    pub psi2_ap_neg: Symbol,
    /// `phi1(i tau R) * R` with `R = c<nabla>_c - c^2 + Delta/2` (one pass).
    pub phi1_res_res: Symbol,
    /// `Psi2(i tau R)`; `psi2_dm` is its debug-variant replacement.
    pub psi2_res: Symbol,

    /// Difference multipliers of the quadratic u-equation remainder term,
    /// applied to the products `v w` / `v conj(w)`:
    /// `i2_a = phi1(i tau Delta) - phi1(i tau(Delta-c^2))`,
    /// `i2_b = phi1(i tau(Delta-c^2)) - phi1(i tau(Delta-2c^2))`; the
    /// up-shifted debug variants are
    /// `i2_up_a = phi1(i tau(Delta+2c^2)) - phi1(i tau(Delta+c^2))`,
    /// `i2_up_b = phi1(i tau Delta) - phi1(i tau(Delta+c^2))`.
    pub i2_a: Symbol,
    pub i2_b: Symbol,
    pub i2_up_a: Symbol,
    pub i2_up_b: Symbol,
    /// `i3_a = phi1(i tau Delta) - phi1(i tau(Delta-c^2))`,
    /// `i3_b = phi1(i tau(Delta-2c^2)) - phi1(i tau(Delta-c^2))`.
    pub i3_a: Symbol,
    pub i3_b: Symbol,

    /// `j21 = phi1(i tau(c^2+c<nabla>_c-Delta/2)) - phi1(i tau(c<nabla>_c-Delta/2))`.
    pub j21: Symbol,
    /// `j22 = phi1(i tau(c^2-c<nabla>_c-Delta/2)) - phi1(-i tau(c<nabla>_c+Delta/2))`.
    pub j22: Symbol,
    /// `j23 = phi1(i tau(-c^2+c<nabla>_c-Delta/2)) - phi1(i tau(c<nabla>_c-Delta/2))`.
    pub j23: Symbol,
    /// `j24 = phi1(-i tau(c^2+c<nabla>_c+Delta/2)) - phi1(-i tau(c<nabla>_c+Delta/2))`.
    pub j24: Symbol,
    /// `j31 = phi1(i tau(c<nabla>_c-c^2-Delta/2)) - phi1(i tau(c<nabla>_c-Delta/2))`.
    pub j31: Symbol,
    /// `j32 = phi1(i tau(-c<nabla>_c+c^2-Delta/2)) - phi1(-i tau(c<nabla>_c+Delta/2))`.
    pub j32: Symbol,
}

impl SchemeSymbols {
    pub fn build(grid: &Grid, c: CParam, tau: f64) -> SchemeSymbols {
        let args = SchemeArgs::new(grid, c);
        let c2 = args.c2;

        let exp_cnabla = unitary(grid, |i| tau * args.cnabla(i));
        let inv_cnabla = Symbol::base(BaseKind::InvCNabla, grid, c);
        let exp_half_lap = unitary(grid, |i| 0.5 * tau * args.lap[i]);
        let exp_half_lap_neg = unitary(grid, |i| -0.5 * tau * args.lap[i]);
        let exp_limit_u = unitary(grid, |i| tau * (c2 - 0.5 * args.lap[i]));

        let phi1_dm = phi1_of(grid, |i| tau * (args.lap[i] - c2));
        let phi1_am = phi1_of(grid, |i| tau * args.a_minus(i));
        let phi1_ap_neg = phi1_of(grid, |i| -tau * args.a_plus(i));

        let psi2_dm = psi2_of(grid, |i| tau * (args.lap[i] - c2));
        let psi2_am = psi2_of(grid, |i| tau * args.a_minus(i));
        let psi2_ap_neg = psi2_of(grid, |i| -tau * args.a_plus(i));
        let phi1_res_res = Symbol::from_fn(grid, |i| {
            phi1(Complex64::new(0.0, tau * args.res[i])) * args.res[i]
        });
        let psi2_res = psi2_of(grid, |i| tau * args.res[i]);

        let phi1_l = phi1_of(grid, |i| tau * args.lap[i]);
        let phi1_lp2 = phi1_of(grid, |i| tau * (args.lap[i] + 2.0 * c2));
        let phi1_lp1 = phi1_of(grid, |i| tau * (args.lap[i] + c2));
        let phi1_lm2 = phi1_of(grid, |i| tau * (args.lap[i] - 2.0 * c2));

        let i2_a = sub(&phi1_l, &phi1_dm);
        let i2_b = sub(&phi1_dm, &phi1_lm2);
        let i2_up_a = sub(&phi1_lp2, &phi1_lp1);
        let i2_up_b = sub(&phi1_l, &phi1_lp1);
        let i3_a = sub(&phi1_l, &phi1_dm);
        let i3_b = sub(&phi1_lm2, &phi1_dm);

        let j21 = sub(&phi1_of(grid, |i| tau * (c2 + args.a_minus(i))), &phi1_am);
        let j22 = sub(&phi1_of(grid, |i| -tau * args.res[i]), &phi1_ap_neg);
        let j23 = sub(&phi1_of(grid, |i| tau * (args.res[i] - args.lap[i])), &phi1_am);
        let j24 = sub(&phi1_of(grid, |i| -tau * (c2 + args.a_plus(i))), &phi1_ap_neg);
        let j31 = sub(&phi1_of(grid, |i| tau * (args.res[i] - args.lap[i])), &phi1_am);
        let j32 = sub(&phi1_of(grid, |i| -tau * args.res[i]), &phi1_ap_neg);

        SchemeSymbols {
            c,
            tau,
            exp_cnabla,
            inv_cnabla,
            exp_half_lap,
            exp_half_lap_neg,
            exp_limit_u,
            phi1_dm,
            phi1_am,
            phi1_ap_neg,
            psi2_dm,
            psi2_am,
            psi2_ap_neg,
            phi1_res_res,
            psi2_res,
            i2_a,
            i2_b,
            i2_up_a,
            i2_up_b,
            i3_a,
            i3_b,
            j21,
            j22,
            j23,
            j24,
            j31,
            j32,
        }
    }

    /// Shared, memoized construction keyed by the exact bit patterns of
    /// `c` and `tau` (and the grid identity).
    pub fn get(grid: &Grid, c: CParam, tau: f64) -> Arc<SchemeSymbols> {
        type Key = (GridKey, u64, u64);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<SchemeSymbols>>>> = OnceLock::new();
        // enough for any realistic sweep; cleared wholesale when exceeded so
        // unbounded parameter scans cannot grow the cache without limit
        // (outstanding Arcs keep their tables alive)
        const CACHE_CAP: usize = 512;
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (grid.key(), c.value().to_bits(), tau.to_bits());
        if let Some(hit) = cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let built = Arc::new(SchemeSymbols::build(grid, c, tau));
        let mut guard = cache.lock().unwrap();
        if guard.len() >= CACHE_CAP {
            guard.clear();
        }
        guard.entry(key).or_insert_with(|| built.clone()).clone()
    }
}
