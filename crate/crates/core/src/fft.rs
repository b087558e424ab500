//! Multi-dimensional FFT over the grid's 2n axes, built by applying 1-D
//! complex transforms along each axis. Used only by the constant-coefficient
//! preconditioner of the Krylov solver.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::grid::GridSpec;

pub struct NdFft {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl NdFft {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.points_per_axis();
        NdFft {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    fn apply_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let np = self.grid.points_per_axis();
        let axes = self.grid.axes();
        let stride = np.pow((axes - 1 - axis) as u32);
        let blocks = self.grid.len() / (np * stride);
        let mut lane = vec![Complex64::new(0.0, 0.0); np];
        for b in 0..blocks {
            for s in 0..stride {
                let base = b * np * stride + s;
                for k in 0..np {
                    lane[k] = data[base + k * stride];
                }
                fft.process(&mut lane);
                for k in 0..np {
                    data[base + k * stride] = lane[k];
                }
            }
        }
    }

    /// Unnormalized forward transform along every axis.
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.grid.len());
        for axis in 0..self.grid.axes() {
            self.apply_axis(data, axis, &self.forward);
        }
    }

    /// Inverse transform along every axis, normalized so that
    /// inverse(forward(x)) == x.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.grid.len());
        for axis in 0..self.grid.axes() {
            self.apply_axis(data, axis, &self.inverse);
        }
        let scale = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}
