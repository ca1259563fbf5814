//! Delay-Doppler sample grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::GridDims;
use crate::{Error, Result, C64};

/// An M x N complex array over (Doppler k, delay l), stored at `k*M + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DDGrid {
    dims: GridDims,
    data: Vec<C64>,
}

impl DDGrid {
    pub fn zeros(dims: GridDims) -> Self {
        Self { dims, data: vec![C64::new(0.0, 0.0); dims.mn()] }
    }

    pub fn from_vec(dims: GridDims, data: Vec<C64>) -> Result<Self> {
        if data.len() != dims.mn() {
            return Err(Error::DimensionMismatch { expected: dims.mn(), got: data.len() });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> C64 {
        self.data[self.dims.index(k, l)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, v: C64) {
        let i = self.dims.index(k, l);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub(crate) fn check_dims(&self, dims: GridDims) -> Result<()> {
        if self.dims != dims {
            return Err(Error::DimensionMismatch { expected: dims.mn(), got: self.dims.mn() });
        }
        Ok(())
    }
}
