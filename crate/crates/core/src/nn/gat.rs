use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::features::FeatureMatrix;
use super::params::{Grads, ParamId, ParamStore};
use super::topology::AttentionCsr;

pub const LEAKY_SLOPE: f64 = 0.2;

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[derive(Debug, Clone)]
struct Head {
    w: ParamId,
    a_src: ParamId,
    a_dst: ParamId,
}

/// One attention layer. Heads are concatenated or averaged.
#[derive(Debug, Clone)]
struct GatLayer {
    heads: Vec<Head>,
    bias: ParamId,
    concat: bool,
    head_dim: usize,
}

struct HeadCache {
    p: Array2<f64>,
    e: Vec<f64>,
    alpha: Vec<f64>,
}

enum LayerInput<'a> {
    Features(&'a FeatureMatrix),
    Dense(&'a Array2<f64>),
}

impl LayerInput<'_> {
    fn matmul(&self, w: &Array2<f64>) -> Array2<f64> {
        match self {
            LayerInput::Features(x) => x.matmul(w),
            LayerInput::Dense(h) => h.dot(w),
        }
    }

    fn t_matmul(&self, g: &Array2<f64>) -> Array2<f64> {
        match self {
            LayerInput::Features(x) => x.t_matmul(g),
            LayerInput::Dense(h) => h.t().dot(g),
        }
    }
}

fn row_vec(a: &Array2<f64>) -> ArrayView1<'_, f64> {
    a.row(0)
}

/// Attention coefficients of one head, aligned with `csr.targets`: a softmax
/// over each neighbourhood (self included) of `leaky(a_src·p_i + a_dst·p_j)`.
pub fn attention_coefficients(
    p: &Array2<f64>,
    a_src: ArrayView1<'_, f64>,
    a_dst: ArrayView1<'_, f64>,
    csr: &AttentionCsr,
) -> (Vec<f64>, Vec<f64>) {
    let s: Array1<f64> = p.dot(&a_src);
    let t: Array1<f64> = p.dot(&a_dst);
    let mut e = vec![0.0; csr.targets.len()];
    let mut alpha = vec![0.0; csr.targets.len()];
    for i in 0..csr.n_nodes() {
        let r = csr.row(i);
        let mut max = f64::NEG_INFINITY;
        for k in r.clone() {
            e[k] = s[i] + t[csr.targets[k]];
            max = max.max(leaky(e[k]));
        }
        let mut z = 0.0;
        for k in r.clone() {
            alpha[k] = (leaky(e[k]) - max).exp();
            z += alpha[k];
        }
        for k in r {
            alpha[k] /= z;
        }
    }
    (e, alpha)
}

impl GatLayer {
    fn new<R: Rng>(
        params: &mut ParamStore,
        prefix: &str,
        input: usize,
        head_dim: usize,
        n_heads: usize,
        concat: bool,
        rng: &mut R,
    ) -> Self {
        let heads = (0..n_heads)
            .map(|k| Head {
                w: params.add_glorot(
                    format!("{prefix}.head{k}.w"),
                    input,
                    head_dim,
                    (input, head_dim),
                    rng,
                ),
                a_src: params.add_glorot(
                    format!("{prefix}.head{k}.a_src"),
                    2 * head_dim,
                    1,
                    (1, head_dim),
                    rng,
                ),
                a_dst: params.add_glorot(
                    format!("{prefix}.head{k}.a_dst"),
                    2 * head_dim,
                    1,
                    (1, head_dim),
                    rng,
                ),
            })
            .collect();
        let width = if concat { n_heads * head_dim } else { head_dim };
        Self {
            heads,
            bias: params.add_zeros(format!("{prefix}.bias"), (1, width)),
            concat,
            head_dim,
        }
    }

    fn forward(
        &self,
        params: &ParamStore,
        input: &LayerInput<'_>,
        csr: &AttentionCsr,
    ) -> (Array2<f64>, Vec<HeadCache>) {
        let n = csr.n_nodes();
        let d = self.head_dim;
        let k = self.heads.len();
        let width = if self.concat { k * d } else { d };
        let mut out = Array2::<f64>::zeros((n, width));
        let mut caches = Vec::with_capacity(k);
        for (h, head) in self.heads.iter().enumerate() {
            let p = input.matmul(params.get(head.w));
            let (e, alpha) = attention_coefficients(
                &p,
                row_vec(params.get(head.a_src)),
                row_vec(params.get(head.a_dst)),
                csr,
            );
            let (cols, scale) = if self.concat {
                (h * d..(h + 1) * d, 1.0)
            } else {
                (0..d, 1.0 / k as f64)
            };
            for i in 0..n {
                let mut row = out.slice_mut(s![i, cols.clone()]);
                for kk in csr.row(i) {
                    row.scaled_add(scale * alpha[kk], &p.row(csr.targets[kk]));
                }
            }
            caches.push(HeadCache { p, e, alpha });
        }
        out += &params.get(self.bias).row(0);
        (out, caches)
    }

    /// Accumulates parameter gradients; returns the input gradient when the
    /// input is dense.
    fn backward(
        &self,
        params: &ParamStore,
        input: &LayerInput<'_>,
        csr: &AttentionCsr,
        caches: &[HeadCache],
        d_out: &Array2<f64>,
        grads: &mut Grads,
    ) -> Option<Array2<f64>> {
        let n = csr.n_nodes();
        let d = self.head_dim;
        let k = self.heads.len();
        grads.accumulate(self.bias, &d_out.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let mut d_input: Option<Array2<f64>> = None;
        for (h, (head, cache)) in self.heads.iter().zip(caches).enumerate() {
            let d_o = if self.concat {
                d_out.slice(s![.., h * d..(h + 1) * d]).to_owned()
            } else {
                d_out / k as f64
            };
            let p = &cache.p;
            let mut d_p = Array2::<f64>::zeros((n, d));
            let mut d_s = Array1::<f64>::zeros(n);
            let mut d_t = Array1::<f64>::zeros(n);
            let mut d_alpha = vec![0.0; csr.targets.len()];
            for i in 0..n {
                let r = csr.row(i);
                let g_i = d_o.row(i);
                let mut weighted = 0.0;
                for kk in r.clone() {
                    let j = csr.targets[kk];
                    d_alpha[kk] = g_i.dot(&p.row(j));
                    weighted += cache.alpha[kk] * d_alpha[kk];
                    d_p.row_mut(j).scaled_add(cache.alpha[kk], &g_i);
                }
                for kk in r {
                    let dl = cache.alpha[kk] * (d_alpha[kk] - weighted);
                    let de = if cache.e[kk] > 0.0 { dl } else { LEAKY_SLOPE * dl };
                    d_s[i] += de;
                    d_t[csr.targets[kk]] += de;
                }
            }
            let a_src = params.get(head.a_src);
            let a_dst = params.get(head.a_dst);
            grads.accumulate(head.a_src, &d_s.dot(p).insert_axis(Axis(0)));
            grads.accumulate(head.a_dst, &d_t.dot(p).insert_axis(Axis(0)));
            d_p += &d_s.view().insert_axis(Axis(1)).dot(a_src);
            d_p += &d_t.view().insert_axis(Axis(1)).dot(a_dst);
            grads.accumulate(head.w, &input.t_matmul(&d_p));
            if let LayerInput::Dense(_) = input {
                let g = d_p.dot(&params.get(head.w).t());
                match d_input.as_mut() {
                    Some(acc) => *acc += &g,
                    None => d_input = Some(g),
                }
            }
        }
        d_input
    }
}

/// Two attention layers: multi-head with concatenation and ELU, then an
/// output layer whose heads are averaged.
#[derive(Debug, Clone)]
pub struct GatEncoder {
    layer1: GatLayer,
    layer2: GatLayer,
    pub(crate) out_dim: usize,
}

pub struct GatCache {
    heads1: Vec<HeadCache>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    heads2: Vec<HeadCache>,
}

impl std::fmt::Debug for GatCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GatCache").finish_non_exhaustive()
    }
}

impl GatEncoder {
    pub fn new<R: Rng>(
        params: &mut ParamStore,
        prefix: &str,
        dims: (usize, usize, usize),
        heads: usize,
        rng: &mut R,
    ) -> Self {
        let (input, hidden, out) = dims;
        let layer1 = GatLayer::new(params, &format!("{prefix}.l1"), input, hidden, heads, true, rng);
        let layer2 = GatLayer::new(
            params,
            &format!("{prefix}.l2"),
            hidden * heads,
            out,
            heads,
            false,
            rng,
        );
        Self {
            layer1,
            layer2,
            out_dim: out,
        }
    }

    pub fn forward(
        &self,
        params: &ParamStore,
        x: &FeatureMatrix,
        csr: &AttentionCsr,
    ) -> (Array2<f64>, GatCache) {
        let (z1, heads1) = self.layer1.forward(params, &LayerInput::Features(x), csr);
        let h1 = z1.mapv(elu);
        let (out, heads2) = self.layer2.forward(params, &LayerInput::Dense(&h1), csr);
        (
            out,
            GatCache {
                heads1,
                z1,
                h1,
                heads2,
            },
        )
    }

    pub fn backward(
        &self,
        params: &ParamStore,
        x: &FeatureMatrix,
        csr: &AttentionCsr,
        cache: &GatCache,
        d_out: &Array2<f64>,
        grads: &mut Grads,
    ) {
        let d_h1 = self
            .layer2
            .backward(params, &LayerInput::Dense(&cache.h1), csr, &cache.heads2, d_out, grads)
            .expect("dense input yields an input gradient");
        let mut d_z1 = d_h1;
        ndarray::Zip::from(&mut d_z1)
            .and(&cache.z1)
            .for_each(|g, &z| {
                if z <= 0.0 {
                    *g *= z.exp();
                }
            });
        self.layer1
            .backward(params, &LayerInput::Features(x), csr, &cache.heads1, &d_z1, grads);
    }

    /// Attention coefficients of every head in the first layer.
    pub fn layer1_attention(
        &self,
        params: &ParamStore,
        x: &FeatureMatrix,
        csr: &AttentionCsr,
    ) -> Vec<Vec<f64>> {
        let (_, caches) = self.layer1.forward(params, &LayerInput::Features(x), csr);
        caches.into_iter().map(|c| c.alpha).collect()
    }
}
