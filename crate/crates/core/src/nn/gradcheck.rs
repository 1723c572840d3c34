use super::features::FeatureMatrix;
use super::model::{MultiScaleModel, PreparedGraph};
use super::NnError;

pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute terms. Central
/// differences at `FD_STEP` carry roundoff of order `ε·loss/FD_STEP ≈ 1e-11`,
/// which would otherwise dominate structurally-zero gradients.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_analytic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

/// `|a − n| / max(|a|, |n|)`, zero when both vanish; gradients below `floor`
/// in magnitude are compared in absolute terms.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares analytic gradients of the mean cross-entropy over `rows` with
/// central finite differences, one scalar at a time.
pub fn gradient_check(
    model: &MultiScaleModel,
    x: &FeatureMatrix,
    graphs: &[PreparedGraph],
    labels: &[usize],
    rows: &[usize],
) -> Result<GradCheckReport, NnError> {
    let (_, grads) = model.loss_and_grad(x, graphs, labels, rows)?;
    let mut probe = model.clone();
    let mut tensors = Vec::new();
    for (t, name) in model.params.names().iter().enumerate() {
        let mut worst = 0.0f64;
        let mut biggest = 0.0f64;
        for idx in 0..model.params.values()[t].len() {
            let orig = model.params.values()[t].as_slice().expect("standard layout")[idx];
            let set = |p: &mut MultiScaleModel, v: f64| {
                p.params.values_mut()[t].as_slice_mut().expect("standard layout")[idx] = v;
            };
            set(&mut probe, orig + FD_STEP);
            let up = probe.loss(x, graphs, labels, rows)?;
            set(&mut probe, orig - FD_STEP);
            let down = probe.loss(x, graphs, labels, rows)?;
            set(&mut probe, orig);
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.0[t].as_slice().expect("standard layout")[idx];
            worst = worst.max(relative_error(analytic, numeric, ABS_FLOOR));
            biggest = biggest.max(analytic.abs());
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            max_rel_error: worst,
            max_abs_analytic: biggest,
        });
    }
    Ok(GradCheckReport { tensors })
}
