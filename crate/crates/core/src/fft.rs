//! Thin wrappers over `rustfft` for the unnormalised 1-D and separable 2-D
//! DFTs used by the structured operator.
//!
//! Convention: the forward kernel is `exp(-j2π ab/n)` and the inverse
//! kernel is its conjugate, neither scaled. A 2-D transform over a
//! `(k1, k2)` grid acts on a block stored with `k2` fastest, which is the
//! action of `U_{k1} ⊗ U_{k2}` on the flattened block.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone)]
pub struct Fft1 {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft1").field("len", &self.len).finish()
    }
}

impl Fft1 {
    pub fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    /// Transforms every consecutive `len`-chunk of `buf` in place.
    pub fn process(&self, dir: Direction, buf: &mut [C64], scratch: &mut Vec<C64>) {
        if self.len <= 1 {
            return;
        }
        let need = self.scratch_len();
        if scratch.len() < need {
            scratch.resize(need, C64::new(0.0, 0.0));
        }
        let scratch = &mut scratch[..need];
        match dir {
            Direction::Forward => self.fwd.process_with_scratch(buf, scratch),
            Direction::Inverse => self.inv.process_with_scratch(buf, scratch),
        }
    }
}

/// Separable 2-D DFT over a `k1 × k2` grid.
#[derive(Clone, Debug)]
pub struct Dft2 {
    k1: usize,
    k2: usize,
    outer: Fft1,
    inner: Fft1,
}

impl Dft2 {
    pub fn new(planner: &mut FftPlanner<f64>, k1: usize, k2: usize) -> Self {
        Self {
            k1,
            k2,
            outer: Fft1::new(planner, k1),
            inner: Fft1::new(planner, k2),
        }
    }

    pub fn len(&self) -> usize {
        self.k1 * self.k2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k1, self.k2)
    }

    /// Applies the transform to every consecutive `k1·k2` block of `buf`.
    pub fn apply(&self, dir: Direction, buf: &mut [C64]) {
        let block = self.len();
        debug_assert_eq!(buf.len() % block, 0);
        let mut scratch = Vec::new();
        // rows along k2 are contiguous, so one call covers every block
        self.inner.process(dir, buf, &mut scratch);
        if self.k1 <= 1 {
            return;
        }
        let mut tmp = vec![C64::new(0.0, 0.0); block];
        for chunk in buf.chunks_exact_mut(block) {
            for a in 0..self.k1 {
                for b in 0..self.k2 {
                    tmp[b * self.k1 + a] = chunk[a * self.k2 + b];
                }
            }
            self.outer.process(dir, &mut tmp, &mut scratch);
            for a in 0..self.k1 {
                for b in 0..self.k2 {
                    chunk[a * self.k2 + b] = tmp[b * self.k1 + a];
                }
            }
        }
    }
}
