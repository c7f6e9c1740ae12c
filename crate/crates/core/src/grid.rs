//! Uniform torus grids and the discrete Fourier transforms living on them.
//!
//! A [`Grid`] fixes the spatial discretisation: `dim` periodic axes, `n`
//! points per axis, period `length` per axis. Spectral data is stored in the
//! transform's natural ordering, i.e. axis index `j` carries the integer
//! frequency `j` for `j < n/2` and `j - n` otherwise, so the frequency range
//! per axis is `[-n/2, n/2 - 1]`.
//!
//! Transforms are "analysis normalized": the coefficient at mode `k` is the
//! amplitude of `exp(i k.x)`, so [`Grid::coeffs_to_samples`] sums
//! `c_k exp(i k.x_j)` and [`Grid::samples_to_coeffs`] divides the forward DFT
//! by the point count. Sample `j` of axis `a` sits at `x = length * j / n`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Cheap structural identity of a grid, used to detect mixed-grid operations.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct GridKey {
    dim: usize,
    n: usize,
    length_bits: u64,
    dealias: bool,
}

/// A periodic tensor grid on the d-dimensional torus, d in {1,2,3}.
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    dealias: bool,
    /// Integer frequency for each axis index (n entries, `[0..n/2, -n/2..-1]`).
    freqs: Vec<i64>,
    /// Physical wavenumber `2*pi*m/length` per axis index.
    wavenumbers: Vec<f64>,
    /// `|k|^2` per flat mode index (n^dim entries).
    k_squared: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .field("dealias", &self.dealias)
            .finish()
    }
}

impl Grid {
    /// Grid with period `2*pi` per axis and dealiasing off.
    pub fn new(dim: usize, n: usize) -> Result<Arc<Self>> {
        Self::with_options(dim, n, 2.0 * PI, false)
    }

    pub fn with_options(dim: usize, n: usize, length: f64, dealias: bool) -> Result<Arc<Self>> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n must be even and >= 4, got {n}")));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        let half = (n / 2) as i64;
        let freqs: Vec<i64> = (0..n as i64).map(|j| if j < half { j } else { j - n as i64 }).collect();
        let scale = 2.0 * PI / length;
        let wavenumbers: Vec<f64> = freqs.iter().map(|&m| scale * m as f64).collect();

        let total = n.pow(dim as u32);
        let mut k_squared = vec![0.0; total];
        for (flat, ksq) in k_squared.iter_mut().enumerate() {
            let mut rest = flat;
            let mut acc = 0.0;
            for _ in 0..dim {
                let idx = rest % n;
                rest /= n;
                acc += wavenumbers[idx] * wavenumbers[idx];
            }
            *ksq = acc;
        }

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(n, FftDirection::Forward);
        let inv = planner.plan_fft(n, FftDirection::Inverse);

        Ok(Arc::new(Grid { dim, n, length, dealias, freqs, wavenumbers, k_squared, fwd, inv }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Whether pointwise products apply the 2/3-rule cutoff.
    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Total number of modes (= grid points), `n^dim`.
    pub fn modes(&self) -> usize {
        self.k_squared.len()
    }

    pub fn key(&self) -> GridKey {
        GridKey {
            dim: self.dim,
            n: self.n,
            length_bits: self.length.to_bits(),
            dealias: self.dealias,
        }
    }

    /// Integer frequency table for one axis.
    pub fn freqs(&self) -> &[i64] {
        &self.freqs
    }

    /// Physical wavenumbers `2*pi*m/length` for one axis.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `|k|^2` per flat mode index.
    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    /// Per-axis indices of a flat mode index (row-major, axis 0 slowest).
    pub fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            out[a] = rest % self.n;
            rest /= self.n;
        }
        out
    }

    /// Flat index of the mirrored mode `-k` (per-axis `j -> (n - j) % n`).
    pub fn mirror(&self, flat: usize) -> usize {
        let idx = self.axis_indices(flat);
        idx[..self.dim]
            .iter()
            .fold(0usize, |acc, &j| acc * self.n + (self.n - j) % self.n)
    }

    /// Flat index of the mode with axis index `idx` on each axis.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        idx.iter().fold(0usize, |acc, &i| acc * self.n + i)
    }

    /// Whether any axis frequency exceeds the 2/3-rule cutoff `floor(n/3)`.
    pub fn above_dealias_cutoff(&self, flat: usize) -> bool {
        let cutoff = (self.n / 3) as i64;
        let idx = self.axis_indices(flat);
        (0..self.dim).any(|a| self.freqs[idx[a]].abs() > cutoff)
    }

    /// In-place unnormalized DFT along every axis.
    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.modes());
        let n = self.n;
        match self.dim {
            1 => {
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(data, &mut scratch);
            }
            _ => {
                let mut line = vec![Complex64::default(); n];
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                let total = data.len();
                // Axis a has stride n^(dim-1-a) in the row-major flat layout.
                for a in 0..self.dim {
                    let stride = n.pow((self.dim - 1 - a) as u32);
                    let block = stride * n;
                    for base in (0..total).step_by(block) {
                        for off in 0..stride {
                            let start = base + off;
                            for (i, slot) in line.iter_mut().enumerate() {
                                *slot = data[start + i * stride];
                            }
                            plan.process_with_scratch(&mut line, &mut scratch);
                            for (i, slot) in line.iter().enumerate() {
                                data[start + i * stride] = *slot;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Spectral coefficients -> physical samples, `f(x_j) = sum_k c_k e^{i k.x_j}`.
    pub fn coeffs_to_samples(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.modes() {
            return Err(Error::SizeMismatch { expected: self.modes(), got: coeffs.len() });
        }
        let mut data = coeffs.to_vec();
        self.transform(&mut data, &self.inv);
        Ok(data)
    }

    /// Physical samples -> spectral coefficients (forward DFT / point count).
    pub fn samples_to_coeffs(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.modes() {
            return Err(Error::SizeMismatch { expected: self.modes(), got: samples.len() });
        }
        let mut data = samples.to_vec();
        self.transform(&mut data, &self.fwd);
        let scale = 1.0 / self.modes() as f64;
        for v in &mut data {
            *v *= scale;
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(0, 8).is_err());
        assert!(Grid::new(4, 8).is_err());
        assert!(Grid::new(1, 2).is_err());
        assert!(Grid::new(1, 7).is_err());
        assert!(Grid::with_options(1, 8, -1.0, false).is_err());
    }

    #[test]
    fn frequency_table_is_symmetric_range() {
        let g = Grid::new(1, 8).unwrap();
        assert_eq!(g.freqs(), &[0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.freqs().iter().filter(|&&m| m == 0).count(), 1);
        // length 2*pi: physical wavenumber equals the integer frequency
        assert_eq!(g.wavenumbers()[3], 3.0);
        let g2 = Grid::with_options(1, 8, 1.0, false).unwrap();
        assert!((g2.wavenumbers()[1] - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn mirror_is_an_involution() {
        let g = Grid::new(2, 8).unwrap();
        for flat in 0..g.modes() {
            assert_eq!(g.mirror(g.mirror(flat)), flat);
        }
        // mode 0 and per-axis Nyquist are self-mirrors
        let g1 = Grid::new(1, 8).unwrap();
        assert_eq!(g1.mirror(0), 0);
        assert_eq!(g1.mirror(4), 4);
    }

    #[test]
    fn single_mode_maps_to_plane_wave() {
        let g = Grid::new(1, 8).unwrap();
        let mut coeffs = vec![Complex64::default(); 8];
        coeffs[1] = Complex64::new(1.0, 0.0);
        let samples = g.coeffs_to_samples(&coeffs).unwrap();
        for (j, s) in samples.iter().enumerate() {
            let x = 2.0 * PI * j as f64 / 8.0;
            assert!((s - Complex64::new(x.cos(), x.sin())).norm() < 1e-14);
        }
    }

    #[test]
    fn transforms_are_inverse_in_2d() {
        let g = Grid::new(2, 8).unwrap();
        let coeffs: Vec<Complex64> = (0..g.modes())
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let samples = g.coeffs_to_samples(&coeffs).unwrap();
        let back = g.samples_to_coeffs(&samples).unwrap();
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
