/// Dense row-major matrix, just enough for the recurrent cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// out[i] += sum_j self[offset + i][j] * v[j]
    pub fn mul_vec_add(&self, offset: usize, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(offset + i), v);
        }
    }

    /// out[j] += sum_i self[offset + i][j] * d[i]
    pub fn t_mul_vec_add(&self, offset: usize, d: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        for (i, &di) in d.iter().enumerate() {
            if di == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(offset + i)) {
                *o += w * di;
            }
        }
    }

    /// self[offset + i][j] += d[i] * v[j]
    pub fn outer_add(&mut self, offset: usize, d: &[f64], v: &[f64]) {
        let cols = self.cols;
        for (i, &di) in d.iter().enumerate() {
            if di == 0.0 {
                continue;
            }
            let row = &mut self.data[(offset + i) * cols..(offset + i + 1) * cols];
            for (g, x) in row.iter_mut().zip(v) {
                *g += di * x;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
