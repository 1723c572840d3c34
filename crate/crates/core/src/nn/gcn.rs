use ndarray::{Array2, Axis};
use rand::Rng;

use super::features::FeatureMatrix;
use super::params::{Grads, ParamId, ParamStore};
use super::topology::GcnOperator;

/// Two-layer graph convolution: `Â relu(Â X W1 + b1) W2 + b2`.
#[derive(Debug, Clone)]
pub struct GcnEncoder {
    pub(crate) w1: ParamId,
    pub(crate) b1: ParamId,
    pub(crate) w2: ParamId,
    pub(crate) b2: ParamId,
    pub(crate) out_dim: usize,
}

#[derive(Debug)]
pub struct GcnCache {
    z1: Array2<f64>,
    h1: Array2<f64>,
}

fn add_bias(mut z: Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    z += &b.row(0);
    z
}

fn column_sums(g: &Array2<f64>) -> Array2<f64> {
    g.sum_axis(Axis(0)).insert_axis(Axis(0))
}

impl GcnEncoder {
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        prefix: &str,
        dims: (usize, usize, usize),
        rng: &mut R,
    ) -> Self {
        let (input, hidden, out) = dims;
        Self {
            w1: params.add_glorot(format!("{prefix}.w1"), input, hidden, (input, hidden), rng),
            b1: params.add_zeros(format!("{prefix}.b1"), (1, hidden)),
            w2: params.add_glorot(format!("{prefix}.w2"), hidden, out, (hidden, out), rng),
            b2: params.add_zeros(format!("{prefix}.b2"), (1, out)),
            out_dim: out,
        }
    }

    pub fn forward(
        &self,
        params: &ParamStore,
        x: &FeatureMatrix,
        op: &GcnOperator,
    ) -> (Array2<f64>, GcnCache) {
        let z1 = add_bias(op.apply(&x.matmul(params.get(self.w1))), params.get(self.b1));
        let h1 = z1.mapv(|v| v.max(0.0));
        let out = add_bias(op.apply(&h1.dot(params.get(self.w2))), params.get(self.b2));
        (out, GcnCache { z1, h1 })
    }

    pub fn backward(
        &self,
        params: &ParamStore,
        x: &FeatureMatrix,
        op: &GcnOperator,
        cache: &GcnCache,
        d_out: &Array2<f64>,
        grads: &mut Grads,
    ) {
        grads.accumulate(self.b2, &column_sums(d_out));
        let d_hw = op.apply(d_out);
        grads.accumulate(self.w2, &cache.h1.t().dot(&d_hw));
        let mut d_z1 = d_hw.dot(&params.get(self.w2).t());
        ndarray::Zip::from(&mut d_z1)
            .and(&cache.z1)
            .for_each(|d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
        grads.accumulate(self.b1, &column_sums(&d_z1));
        let d_xw = op.apply(&d_z1);
        grads.accumulate(self.w1, &x.t_matmul(&d_xw));
    }
}
