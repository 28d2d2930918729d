/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation over all elements.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.data.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.data.len() as f64).sqrt()
    }
}

/// Result of global z-scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct ZScored {
    pub matrix: Matrix,
    /// Input standard deviation was below 1e-12; output is all zeros.
    pub degenerate: bool,
}

const DEGENERATE_SD: f64 = 1e-12;

/// Normalises to global mean 0 and population sd 1. Returns `true` when the
/// input was degenerate and has been zeroed instead.
pub fn zscore_in_place(values: &mut [f64]) -> bool {
    assert!(!values.is_empty(), "z-score of an empty matrix");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd >= DEGENERATE_SD) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return true;
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    false
}

pub fn zscore_matrix(matrix: &Matrix) -> ZScored {
    let mut out = matrix.clone();
    let degenerate = zscore_in_place(out.as_mut_slice());
    ZScored { matrix: out, degenerate }
}
