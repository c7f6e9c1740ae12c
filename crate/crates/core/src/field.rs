//! Complex scalar fields on a torus grid, stored as Fourier coefficients.
//!
//! Fields are immutable after construction; every operation is a pure
//! function returning a new field, so values can be shared freely across
//! threads.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::symbol::Symbol;

/// A function on the torus represented by its Fourier coefficients.
#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &*self.grid)
            .field("l2", &self.sobolev_norm(0.0))
            .finish()
    }
}

impl Field {
    /// The zero field.
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field { grid: grid.clone(), coeffs: vec![Complex64::default(); grid.modes()] }
    }

    /// Field from raw coefficients in the grid's natural mode ordering.
    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Field> {
        if coeffs.len() != grid.modes() {
            return Err(Error::SizeMismatch { expected: grid.modes(), got: coeffs.len() });
        }
        Ok(Field { grid: grid.clone(), coeffs })
    }

    /// Field with `coeff(k) = f(flat_index)`.
    pub fn from_mode_fn(grid: &Arc<Grid>, f: impl FnMut(usize) -> Complex64) -> Field {
        let coeffs = (0..grid.modes()).map(f).collect();
        Field { grid: grid.clone(), coeffs }
    }

    /// Field from physical samples (inverse of [`Field::to_physical`]).
    pub fn from_physical(grid: &Arc<Grid>, samples: &[Complex64]) -> Result<Field> {
        let coeffs = grid.samples_to_coeffs(samples)?;
        Ok(Field { grid: grid.clone(), coeffs })
    }

    /// Physical samples of the field, `f(x_j) = sum_k c_k e^{i k.x_j}`.
    pub fn to_physical(&self) -> Vec<Complex64> {
        self.grid.coeffs_to_samples(&self.coeffs).expect("coeff length is maintained")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, flat: usize) -> Complex64 {
        self.coeffs[flat]
    }

    /// Coefficient of the mode with the given integer frequencies (1D helper).
    pub fn coeff_at_freq(&self, m: i64) -> Complex64 {
        let n = self.grid.n() as i64;
        let j = m.rem_euclid(n) as usize;
        self.coeffs[j]
    }

    fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.key() == other.grid.key() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Apply a diagonal Fourier multiplier: `coeff_out(k) = s(k) * coeff_in(k)`.
    pub fn apply_symbol(&self, s: &Symbol) -> Result<Field> {
        if s.grid_key() != self.grid.key() {
            return Err(Error::GridMismatch);
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(s.values())
            .map(|(c, v)| c * v)
            .collect();
        Ok(Field { grid: self.grid.clone(), coeffs })
    }

    /// Pointwise product computed in physical space. When the grid has
    /// dealiasing enabled, modes above the 2/3 cutoff are zeroed afterwards.
    pub fn pointwise_product(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let a = self.to_physical();
        let b = other.to_physical();
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let mut out = Field::from_physical(&self.grid, &prod)?;
        if self.grid.dealias() {
            for flat in 0..out.coeffs.len() {
                if self.grid.above_dealias_cutoff(flat) {
                    out.coeffs[flat] = Complex64::default();
                }
            }
        }
        Ok(out)
    }

    /// The complex conjugate function: `coeff_out(k) = conj(coeff_in(-k))`.
    pub fn conj_field(&self) -> Field {
        let mut coeffs = vec![Complex64::default(); self.coeffs.len()];
        for (flat, slot) in coeffs.iter_mut().enumerate() {
            *slot = self.coeffs[self.grid.mirror(flat)].conj();
        }
        Field { grid: self.grid.clone(), coeffs }
    }

    /// Spectral Sobolev norm `sqrt( sum_k (1+|k|^2)^r |c_k|^2 )`; `r = 0` is L2.
    /// The index must be non-negative.
    pub fn sobolev_norm(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "Sobolev index must be non-negative, got {r}");
        let ksq = self.grid.k_squared();
        let mut acc = 0.0;
        if r == 0.0 {
            for c in &self.coeffs {
                acc += c.norm_sqr();
            }
        } else {
            for (c, &k2) in self.coeffs.iter().zip(ksq) {
                acc += (1.0 + k2).powf(r) * c.norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Partial derivative along `axis` (multiplier `i*k_axis`).
    pub fn derivative(&self, axis: usize) -> Field {
        assert!(axis < self.grid.dim(), "axis out of range");
        let n = self.grid.n();
        let wn = self.grid.wavenumbers();
        let mut coeffs = self.coeffs.clone();
        for (flat, c) in coeffs.iter_mut().enumerate() {
            let idx = self.grid.axis_indices(flat);
            *c *= Complex64::new(0.0, wn[idx[axis] % n]);
        }
        Field { grid: self.grid.clone(), coeffs }
    }

    /// Laplacian (multiplier `-|k|^2`).
    pub fn laplacian(&self) -> Field {
        let ksq = self.grid.k_squared();
        let coeffs = self
            .coeffs
            .iter()
            .zip(ksq)
            .map(|(c, &k2)| c * (-k2))
            .collect();
        Field { grid: self.grid.clone(), coeffs }
    }

    /// The commutator `C[f_quad, Delta](v, w) = -Delta(vw) + w Delta(v) + v Delta(w)`,
    /// evaluated spectrally. Identically equal to `-2 grad(v).grad(w)`.
    pub fn commutator_quad(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let vw = self.pointwise_product(other)?;
        let t1 = vw.laplacian();
        let t2 = other.pointwise_product(&self.laplacian())?;
        let t3 = self.pointwise_product(&other.laplacian())?;
        Ok(&(&t2 + &t3) - &t1)
    }

    /// Largest deviation from conjugate symmetry, relative to the field size.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let mut max_dev: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for flat in 0..self.coeffs.len() {
            let dev = (self.coeffs[flat] - self.coeffs[self.grid.mirror(flat)].conj()).norm();
            max_dev = max_dev.max(dev);
            max_abs = max_abs.max(self.coeffs[flat].norm());
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_dev / max_abs
        }
    }

    /// Whether the field represents a real-valued function, up to `tol` (relative).
    pub fn is_real_valued(&self, tol: f64) -> bool {
        self.conjugate_symmetry_defect() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scaled(&self, factor: Complex64) -> Field {
        let coeffs = self.coeffs.iter().map(|c| c * factor).collect();
        Field { grid: self.grid.clone(), coeffs }
    }

    fn zip_with(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Field {
        assert_eq!(
            self.grid.key(),
            other.grid.key(),
            "field arithmetic across different grids"
        );
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field { grid: self.grid.clone(), coeffs }
    }
}

impl std::ops::Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl std::ops::Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a - b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::Symbol;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::new(1, n).unwrap()
    }

    fn single_mode(g: &Arc<Grid>, m: i64, amp: Complex64) -> Field {
        let n = g.n() as i64;
        Field::from_mode_fn(g, |flat| {
            if flat == m.rem_euclid(n) as usize {
                amp
            } else {
                Complex64::default()
            }
        })
    }

    #[test]
    fn zero_mode_is_the_constant() {
        let g = grid(8);
        let f = single_mode(&g, 0, Complex64::new(1.0, 0.0));
        for s in f.to_physical() {
            assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn cosine_splits_into_two_half_modes() {
        let g = grid(8);
        let samples: Vec<Complex64> = (0..8)
            .map(|j| Complex64::new((2.0 * PI * j as f64 / 8.0).cos(), 0.0))
            .collect();
        let f = Field::from_physical(&g, &samples).unwrap();
        assert!((f.coeff_at_freq(1) - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!((f.coeff_at_freq(-1) - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!(f.coeff_at_freq(0).norm() < 1e-13);
        assert!(f.coeff_at_freq(3).norm() < 1e-13);
    }

    #[test]
    fn laplacian_symbol_on_single_mode() {
        let g = grid(16);
        let f = single_mode(&g, 3, Complex64::new(2.0, -1.0));
        let lap = Symbol::laplacian(&g);
        let out = f.apply_symbol(&lap).unwrap();
        assert!((out.coeff_at_freq(3) - Complex64::new(-18.0, 9.0)).norm() < 1e-13);
    }

    #[test]
    fn product_adds_exponents() {
        let g = grid(16);
        let f = single_mode(&g, 1, Complex64::new(1.0, 0.0));
        let h = single_mode(&g, 2, Complex64::new(1.0, 0.0));
        let p = f.pointwise_product(&h).unwrap();
        assert!((p.coeff_at_freq(3) - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        assert!(p.sobolev_norm(0.0) - 1.0 < 1e-13);
    }

    #[test]
    fn product_by_one_is_identity() {
        let g = grid(16);
        let one = single_mode(&g, 0, Complex64::new(1.0, 0.0));
        let f = Field::from_mode_fn(&g, |i| Complex64::new((i as f64).sin(), (i as f64).cos()));
        let p = f.pointwise_product(&one).unwrap();
        for (a, b) in p.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn conj_of_imaginary_mode() {
        let g = grid(8);
        let f = single_mode(&g, 1, Complex64::new(0.0, 1.0));
        let c = f.conj_field();
        assert!((c.coeff_at_freq(-1) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(c.coeff_at_freq(1).norm() < 1e-15);
    }

    #[test]
    fn sobolev_norm_values() {
        let g = grid(8);
        let f0 = single_mode(&g, 0, Complex64::new(1.0, 0.0));
        assert!((f0.sobolev_norm(0.0) - 1.0).abs() < 1e-15);
        assert!((f0.sobolev_norm(3.7) - 1.0).abs() < 1e-15);
        let f1 = single_mode(&g, 1, Complex64::new(1.0, 0.0));
        assert!((f1.sobolev_norm(1.0) - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn commutator_on_single_modes() {
        // v = w = e^{ix}: C(v,w) = 2 e^{2ix}
        let g = grid(16);
        let v = single_mode(&g, 1, Complex64::new(1.0, 0.0));
        let c = v.commutator_quad(&v).unwrap();
        assert!((c.coeff_at_freq(2) - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        // constant v: commutator vanishes
        let k = single_mode(&g, 0, Complex64::new(3.0, 1.0));
        let w = Field::from_mode_fn(&g, |i| Complex64::new((i as f64).cos(), 0.1 * i as f64));
        let c0 = k.commutator_quad(&w).unwrap();
        assert!(c0.sobolev_norm(0.0) < 1e-11 * w.sobolev_norm(0.0));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let f = Field::zeros(&grid(8));
        let h = Field::zeros(&grid(16));
        assert!(matches!(f.pointwise_product(&h), Err(Error::GridMismatch)));
        let s = Symbol::laplacian(&grid(16));
        assert!(matches!(f.apply_symbol(&s), Err(Error::GridMismatch)));
    }

    #[test]
    fn dealias_flag_zeroes_high_modes() {
        let g = Grid::with_options(1, 12, 2.0 * PI, true).unwrap();
        let f = single_mode(&g, 3, Complex64::new(1.0, 0.0));
        let h = single_mode(&g, 2, Complex64::new(1.0, 0.0));
        let p = f.pointwise_product(&h).unwrap();
        // 3 + 2 = 5 > floor(12/3) = 4: removed by the cutoff
        assert!(p.sobolev_norm(0.0) < 1e-14);
    }

    fn arb_field(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn transform_roundtrip(raw in arb_field(16)) {
            let g = grid(16);
            let f = Field::from_mode_fn(&g, |i| Complex64::new(raw[i].0, raw[i].1));
            let back = Field::from_physical(&g, &f.to_physical()).unwrap();
            let num = (&back - &f).sobolev_norm(0.0);
            prop_assert!(num <= 1e-12 * f.sobolev_norm(0.0).max(1e-300));
        }

        #[test]
        fn product_is_bilinear(raw_f in arb_field(16), raw_g in arb_field(16), re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let g = grid(16);
            let alpha = Complex64::new(re, im);
            let f = Field::from_mode_fn(&g, |i| Complex64::new(raw_f[i].0, raw_f[i].1));
            let h = Field::from_mode_fn(&g, |i| Complex64::new(raw_g[i].0, raw_g[i].1));
            let lhs = f.scaled(alpha).pointwise_product(&h).unwrap();
            let rhs = f.pointwise_product(&h).unwrap().scaled(alpha);
            let scale = lhs.sobolev_norm(0.0).max(rhs.sobolev_norm(0.0)).max(1e-300);
            prop_assert!((&lhs - &rhs).sobolev_norm(0.0) <= 1e-12 * scale);
        }

        #[test]
        fn conj_is_an_involution(raw in arb_field(16)) {
            let g = grid(16);
            let f = Field::from_mode_fn(&g, |i| Complex64::new(raw[i].0, raw[i].1));
            let back = f.conj_field().conj_field();
            prop_assert!((&back - &f).sobolev_norm(0.0) < 1e-14);
        }

        #[test]
        fn product_of_real_fields_is_real(raw in arb_field(16)) {
            let g = grid(16);
            let f = Field::from_mode_fn(&g, |i| Complex64::new(raw[i].0, raw[i].1));
            // symmetrize to get a real-valued function
            let re = f.conj_field();
            let real = &f + &re;
            let p = real.pointwise_product(&real).unwrap();
            prop_assert!(p.conjugate_symmetry_defect() < 1e-12);
        }

        #[test]
        fn real_even_symbols_preserve_conjugate_symmetry(raw in arb_field(16)) {
            let g = grid(16);
            let f = Field::from_mode_fn(&g, |i| Complex64::new(raw[i].0, raw[i].1));
            let real = &f + &f.conj_field();
            for kind in [
                crate::symbol::BaseKind::Laplacian,
                crate::symbol::BaseKind::CNabla,
                crate::symbol::BaseKind::InvCNabla,
                crate::symbol::BaseKind::Residual,
            ] {
                let s = Symbol::base(kind, &g, crate::symbol::CParam::new(3.0).unwrap());
                let out = real.apply_symbol(&s).unwrap();
                prop_assert!(out.conjugate_symmetry_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn bilinear_estimate_sampled() {
        // ||fg||_r <= C ||f||_r ||g||_r with a stable fitted constant (r = 1, d = 1)
        use crate::initial_data::{random_sobolev, RegularitySpec};
        let g = Grid::new(1, 128).unwrap();
        let mut fitted: f64 = 0.0;
        for seed in 0..25u64 {
            let f = random_sobolev(&g, &RegularitySpec::new(1.0, 300 + seed, false).unwrap());
            let h = random_sobolev(&g, &RegularitySpec::new(1.0, 400 + seed, false).unwrap());
            let prod = f.pointwise_product(&h).unwrap();
            fitted = fitted.max(prod.sobolev_norm(1.0) / (f.sobolev_norm(1.0) * h.sobolev_norm(1.0)));
        }
        assert!(fitted.is_finite() && fitted > 0.0);
        assert!(fitted < 5.0, "bilinear constant unexpectedly large: {fitted}");
    }

    #[test]
    fn commutator_bound_constant_does_not_grow_with_resolution() {
        // ||C(v,w)||_r <= K ||v||_{r+1} ||w||_{r+1}; the fitted K must not
        // grow as the grid is refined from 64 to 512 points
        use crate::initial_data::{random_sobolev, RegularitySpec};
        let fit = |n: usize| -> f64 {
            let g = Grid::new(1, n).unwrap();
            let mut k1: f64 = 0.0;
            for seed in 0..15u64 {
                let v = random_sobolev(&g, &RegularitySpec::new(2.0, 500 + seed, false).unwrap());
                let w = random_sobolev(&g, &RegularitySpec::new(2.0, 600 + seed, false).unwrap());
                let c = v.commutator_quad(&w).unwrap();
                k1 = k1.max(c.sobolev_norm(1.0) / (v.sobolev_norm(2.0) * w.sobolev_norm(2.0)));
            }
            k1
        };
        let coarse = fit(64);
        for n in [128, 256, 512] {
            let k = fit(n);
            assert!(
                k <= 1.15 * coarse,
                "commutator constant grew: K({n}) = {k} vs K(64) = {coarse}"
            );
        }
    }

    #[test]
    fn real_field_conj_is_identity() {
        let g = grid(16);
        let samples: Vec<Complex64> =
            (0..16).map(|j| Complex64::new((j as f64 * 0.9).sin(), 0.0)).collect();
        let f = Field::from_physical(&g, &samples).unwrap();
        assert!(f.is_real_valued(1e-12));
        let c = f.conj_field();
        assert!((&c - &f).sobolev_norm(0.0) < 1e-13 * f.sobolev_norm(0.0));
    }
}
