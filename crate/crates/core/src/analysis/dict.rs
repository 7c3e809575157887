//! Test-function dictionary: tensor products of coordinate-wise cosines at
//! low frequencies over phase space, each bounded by one with bounded first
//! derivatives. The list is deterministic, so metric values are comparable
//! across runs.

use crate::geom::Vect;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct DictFn {
    pub x_freq: [u32; 3],
    pub v_freq: [u32; 3],
    pub x_center: Vect,
    pub x_halfwidth: f64,
    pub v_halfwidth: f64,
    pub dim: usize,
}

impl DictFn {
    #[inline]
    pub fn eval(&self, x: &Vect, v: &Vect) -> f64 {
        let mut out = 1.0;
        for k in 0..self.dim {
            if self.x_freq[k] > 0 {
                out *= (PI * self.x_freq[k] as f64 * (x[k] - self.x_center[k])
                    / self.x_halfwidth)
                    .cos();
            }
            if self.v_freq[k] > 0 {
                out *= (PI * self.v_freq[k] as f64 * v[k] / self.v_halfwidth).cos();
            }
        }
        out
    }

    /// Gradient in the velocity variables.
    pub fn grad_v(&self, x: &Vect, v: &Vect) -> Vect {
        let mut factors_x = [1.0f64; 3];
        let mut cos_v = [1.0f64; 3];
        let mut dsin_v = [0.0f64; 3];
        for k in 0..self.dim {
            if self.x_freq[k] > 0 {
                factors_x[k] = (PI * self.x_freq[k] as f64 * (x[k] - self.x_center[k])
                    / self.x_halfwidth)
                    .cos();
            }
            if self.v_freq[k] > 0 {
                let w = PI * self.v_freq[k] as f64 / self.v_halfwidth;
                cos_v[k] = (w * v[k]).cos();
                dsin_v[k] = -w * (w * v[k]).sin();
            }
        }
        let mut grad = [0.0; 3];
        for k in 0..self.dim {
            let mut g = dsin_v[k];
            for j in 0..self.dim {
                g *= factors_x[j];
                if j != k {
                    g *= cos_v[j];
                }
            }
            grad[k] = g;
        }
        grad
    }

    /// Uniform bound on |grad_v|, used when scaling martingale estimates.
    pub fn grad_v_sup(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let w = PI * self.v_freq[k] as f64 / self.v_halfwidth;
            s += w * w;
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct TestFunctionDictionary {
    pub fns: Vec<DictFn>,
}

impl TestFunctionDictionary {
    /// `k` lowest-frequency tensor cosines over `2 dim` coordinates, ordered
    /// by total frequency then lexicographically; the zero tuple (a constant)
    /// is skipped so that the leading functions separate point masses.
    pub fn default_for(dim: usize, x_center: Vect, x_halfwidth: f64, v_halfwidth: f64, k: usize) -> Self {
        let slots = 2 * dim;
        let mut tuples: Vec<Vec<u32>> = Vec::new();
        let mut total = 1u32;
        while tuples.len() < k {
            // all tuples over `slots` coordinates summing to `total`
            let mut stack = vec![(Vec::<u32>::new(), total)];
            let mut level: Vec<Vec<u32>> = Vec::new();
            while let Some((prefix, rest)) = stack.pop() {
                if prefix.len() == slots - 1 {
                    let mut t = prefix.clone();
                    t.push(rest);
                    level.push(t);
                    continue;
                }
                for c in (0..=rest).rev() {
                    let mut t = prefix.clone();
                    t.push(c);
                    stack.push((t, rest - c));
                }
            }
            level.sort();
            tuples.extend(level);
            total += 1;
        }
        tuples.truncate(k);
        let fns = tuples
            .into_iter()
            .map(|t| {
                let mut x_freq = [0u32; 3];
                let mut v_freq = [0u32; 3];
                for i in 0..dim {
                    x_freq[i] = t[i];
                    v_freq[i] = t[dim + i];
                }
                DictFn { x_freq, v_freq, x_center, x_halfwidth, v_halfwidth, dim }
            })
            .collect();
        TestFunctionDictionary { fns }
    }

    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }
}
