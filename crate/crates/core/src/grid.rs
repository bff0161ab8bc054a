//! Dense row-major tables indexed by small integer tuples.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Table2 {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Table2 { rows, cols, data }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] += value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Table3 {
    pub fn zeros(a: usize, b: usize, c: usize) -> Self {
        Table3 {
            dims: (a, b, c),
            data: vec![0.0; a * b * c],
        }
    }

    pub fn from_fn(
        a: usize,
        b: usize,
        c: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(a * b * c);
        for x in 0..a {
            for y in 0..b {
                for z in 0..c {
                    data.push(f(x, y, z));
                }
            }
        }
        Table3 { dims: (a, b, c), data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    fn offset(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims.0 && y < self.dims.1 && z < self.dims.2);
        (x * self.dims.1 + y) * self.dims.2 + z
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.offset(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f64) {
        let o = self.offset(x, y, z);
        self.data[o] = value;
    }

    #[inline]
    pub fn add(&mut self, x: usize, y: usize, z: usize, value: f64) {
        let o = self.offset(x, y, z);
        self.data[o] += value;
    }

    /// The innermost series for a fixed `(x, y)`.
    pub fn series(&self, x: usize, y: usize) -> &[f64] {
        let start = self.offset(x, y, 0);
        &self.data[start..start + self.dims.2]
    }

    pub fn series_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let start = (x * self.dims.1 + y) * self.dims.2;
        let len = self.dims.2;
        &mut self.data[start..start + len]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
