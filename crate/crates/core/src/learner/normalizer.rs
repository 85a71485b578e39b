//! Running mean / standard deviation per input coordinate.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub count: u64,
    /// Lower bound on the standard deviation.
    pub eps: f64,
    /// Normalized values are clipped to `[-clip, clip]`.
    pub clip: f64,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Normalizer {
    pub fn new(dim: usize, eps: f64, clip: f64) -> Self {
        Normalizer {
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            count: 0,
            eps,
            clip,
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (i, &v) in x.iter().enumerate() {
            self.sum[i] += v;
            self.sum_sq[i] += v * v;
        }
        self.count += 1;
    }

    /// Recomputes mean and std from the accumulated sums.
    pub fn refresh(&mut self) {
        if self.count == 0 {
            return;
        }
        let n = self.count as f64;
        for i in 0..self.dim() {
            let m = self.sum[i] / n;
            let var = (self.sum_sq[i] / n - m * m).max(self.eps * self.eps);
            self.mean[i] = m;
            self.std[i] = var.sqrt();
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = ((x[i] - self.mean[i]) / self.std[i]).clamp(-self.clip, self.clip);
        }
    }

    /// Rebuilds a normalizer from stored statistics.
    pub fn from_parts(sum: Vec<f64>, sum_sq: Vec<f64>, count: u64, eps: f64, clip: f64) -> Self {
        let mut n = Normalizer::new(sum.len(), eps, clip);
        n.sum = sum;
        n.sum_sq = sum_sq;
        n.count = count;
        n.refresh();
        n
    }
}
