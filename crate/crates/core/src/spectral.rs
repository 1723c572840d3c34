//! Laplacian spectrum, diffusion spectral entropy and heat capacity.
//!
//! With `λ_i` the Laplacian eigenvalues, the trace-normalised heat kernel
//! `e^{-τL} / Tr e^{-τL}` has eigenvalues
//!
//! ```text
//! μ_i(τ) = exp(-τ(λ_i - λ_min)) / Σ_j exp(-τ(λ_j - λ_min))
//! ```
//!
//! Its normalised von Neumann entropy is `S(τ) = -Σ μ_i ln μ_i / ln N`, and
//! the heat capacity is `C(τ) = -dS/d(ln τ)`. Peaks of `C` mark the scales
//! at which diffusion slows down at the boundary of mesoscopic structures.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::LaplacianMatrix;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("eigendecomposition failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("diffusion time must be non-negative, got {0}")]
    NegativeTau(f64),
    #[error("invalid scan range [{tau_min}, {tau_max}] with {points} points")]
    InvalidRange {
        tau_min: f64,
        tau_max: f64,
        points: usize,
    },
    #[error("heat capacity has no peak over the scanned range; widen the tau range")]
    NoPeak,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Eigenpairs of a graph Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<f64>,
}

impl LaplacianSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `k` pairs with `eigenvalues()[k]`.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }

    /// Smallest eigenvalue above `tol` (the spectral gap of a connected graph).
    pub fn spectral_gap(&self, tol: f64) -> Option<f64> {
        self.eigenvalues.iter().copied().find(|&l| l > tol)
    }
}

/// Full dense symmetric eigendecomposition. The smallest eigenvalue is pinned
/// to exactly zero (every Laplacian annihilates the constant vector).
pub fn eigendecompose(l: &LaplacianMatrix) -> Result<LaplacianSpectrum, SpectralError> {
    let (mut eigenvalues, eigenvectors) = crate::linalg::symmetric_eigen(l.values())?;
    if let Some(first) = eigenvalues.first_mut() {
        *first = 0.0;
    }
    Ok(LaplacianSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues of the normalised propagator at diffusion time `tau`.
pub fn propagator_eigenvalues(
    spectrum: &LaplacianSpectrum,
    tau: f64,
) -> Result<Vec<f64>, SpectralError> {
    if tau.is_nan() || tau < 0.0 {
        return Err(SpectralError::NegativeTau(tau));
    }
    Ok(boltzmann_weights(spectrum.eigenvalues(), tau))
}

fn boltzmann_weights(eigenvalues: &[f64], tau: f64) -> Vec<f64> {
    let lambda_min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let mut mu: Vec<f64> = eigenvalues
        .iter()
        .map(|&l| (-tau * (l - lambda_min)).exp())
        .collect();
    let z: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= z);
    mu
}

fn entropy_of(eigenvalues: &[f64], tau: f64) -> f64 {
    let n = eigenvalues.len();
    if tau == 0.0 {
        return 1.0;
    }
    let h: f64 = boltzmann_weights(eigenvalues, tau)
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| -m * m.ln())
        .sum();
    h / (n as f64).ln()
}

/// Normalised von Neumann entropy `S(τ) ∈ [0, 1]`. Requires at least two nodes.
pub fn von_neumann_entropy(spectrum: &LaplacianSpectrum, tau: f64) -> Result<f64, SpectralError> {
    if tau.is_nan() || tau < 0.0 {
        return Err(SpectralError::NegativeTau(tau));
    }
    assert!(spectrum.n() >= 2, "entropy needs at least two nodes");
    Ok(entropy_of(spectrum.eigenvalues(), tau))
}

/// A local maximum of the heat capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub tau: f64,
    pub heat_capacity: f64,
}

#[derive(Debug, Clone)]
pub struct EntropyScan {
    pub taus: Vec<f64>,
    pub entropy: Vec<f64>,
    pub heat_capacity: Vec<f64>,
    /// Sorted by descending heat capacity; may be empty.
    pub characteristic_scales: Vec<Peak>,
}

impl EntropyScan {
    /// The dominant scale, i.e. the highest heat-capacity peak.
    pub fn characteristic_scale(&self) -> Result<Peak, SpectralError> {
        self.characteristic_scales
            .first()
            .copied()
            .ok_or(SpectralError::NoPeak)
    }

    pub fn write_scan_csv(&self, path: impl AsRef<Path>) -> Result<(), SpectralError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "tau,entropy,heat_capacity")?;
        for ((t, s), c) in self.taus.iter().zip(&self.entropy).zip(&self.heat_capacity) {
            writeln!(out, "{t},{s},{c}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_peaks_csv(&self, path: impl AsRef<Path>) -> Result<(), SpectralError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "tau_star,c_value,rank")?;
        for (rank, p) in self.characteristic_scales.iter().enumerate() {
            writeln!(out, "{},{},{}", p.tau, p.heat_capacity, rank + 1)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `points` log-spaced values from `tau_min` to `tau_max`, both endpoints exact.
pub fn log_grid(tau_min: f64, tau_max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (tau_min.ln(), tau_max.ln());
    let step = (b - a) / (points - 1) as f64;
    (0..points)
        .map(|k| match k {
            0 => tau_min,
            k if k == points - 1 => tau_max,
            k => (a + step * k as f64).exp(),
        })
        .collect()
}

/// Evaluates `S` and `C` on a log grid and detects the characteristic scales.
pub fn entropy_scan(
    spectrum: &LaplacianSpectrum,
    tau_min: f64,
    tau_max: f64,
    points: usize,
) -> Result<EntropyScan, SpectralError> {
    if !(tau_min > 0.0 && tau_max > tau_min && tau_max.is_finite()) || points < 8 {
        return Err(SpectralError::InvalidRange {
            tau_min,
            tau_max,
            points,
        });
    }
    let taus = log_grid(tau_min, tau_max, points);
    let eigenvalues = spectrum.eigenvalues();
    let entropy: Vec<f64> = taus
        .par_iter()
        .map(|&t| entropy_of(eigenvalues, t))
        .collect();
    let heat_capacity = log_derivative(&taus, &entropy)
        .into_iter()
        .map(|d| -d)
        .collect::<Vec<_>>();
    let characteristic_scales = match find_peaks(&taus, &heat_capacity) {
        Ok(p) => p,
        Err(SpectralError::NoPeak) => Vec::new(),
        Err(e) => return Err(e),
    };
    Ok(EntropyScan {
        taus,
        entropy,
        heat_capacity,
        characteristic_scales,
    })
}

/// `dy/d(ln τ)`: central differences inside, one-sided at the ends.
fn log_derivative(taus: &[f64], y: &[f64]) -> Vec<f64> {
    let x: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let m = x.len();
    (0..m)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(m - 1));
            (y[hi] - y[lo]) / (x[hi] - x[lo])
        })
        .collect()
}

/// Peaks of the scan's heat capacity.
pub fn detect_peaks(scan: &EntropyScan) -> Result<Vec<Peak>, SpectralError> {
    find_peaks(&scan.taus, &scan.heat_capacity)
}

/// Strict interior local maxima of `c` reaching a quarter of its maximum,
/// refined by a parabola through `(ln τ, C)` at the three surrounding samples
/// and sorted by descending refined value.
pub fn find_peaks(taus: &[f64], c: &[f64]) -> Result<Vec<Peak>, SpectralError> {
    assert_eq!(taus.len(), c.len());
    let c_max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = 0.25 * c_max;
    let mut peaks: Vec<Peak> = (1..c.len().saturating_sub(1))
        .filter(|&k| c[k] > c[k - 1] && c[k] > c[k + 1] && c[k] >= threshold)
        .map(|k| {
            let x = [taus[k - 1].ln(), taus[k].ln(), taus[k + 1].ln()];
            let (x_star, c_star) = parabola_vertex(x, [c[k - 1], c[k], c[k + 1]]);
            Peak {
                tau: x_star.exp(),
                heat_capacity: c_star,
            }
        })
        .collect();
    if peaks.is_empty() {
        return Err(SpectralError::NoPeak);
    }
    peaks.sort_by(|a, b| b.heat_capacity.total_cmp(&a.heat_capacity));
    Ok(peaks)
}

/// Vertex of the parabola through three points with `x0 < x1 < x2` and a
/// strict maximum at the middle sample.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (d0, d1) = (x[1] - x[0], x[2] - x[1]);
    let s0 = (y[1] - y[0]) / d0;
    let s1 = (y[2] - y[1]) / d1;
    let curvature = (s1 - s0) / (x[2] - x[0]);
    if curvature >= 0.0 {
        return (x[1], y[1]);
    }
    // slope of the parabola at x1 is s0 + curvature * d0
    let slope_mid = s0 + curvature * d0;
    let shift = -slope_mid / (2.0 * curvature);
    let x_star = (x[1] + shift).clamp(x[0], x[2]);
    let dx = x_star - x[1];
    (x_star, y[1] + slope_mid * dx + curvature * dx * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, Graph};
    use approx::assert_abs_diff_eq;

    fn spectrum_of(n: usize, edges: &[(usize, usize)]) -> LaplacianSpectrum {
        let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
        eigendecompose(&laplacian(&g)).unwrap()
    }

    #[test]
    fn small_spectra() {
        let k2 = spectrum_of(2, &[(0, 1)]);
        assert_eq!(k2.eigenvalues()[0], 0.0);
        assert_abs_diff_eq!(k2.eigenvalues()[1], 2.0, epsilon = 1e-12);

        let k3 = spectrum_of(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(k3.eigenvalues()[0], 0.0);
        assert_abs_diff_eq!(k3.eigenvalues()[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k3.eigenvalues()[2], 3.0, epsilon = 1e-12);

        // det(L - λI) = -λ(λ - 1)(λ - 3) for the 3-path
        let p3 = spectrum_of(3, &[(0, 1), (1, 2)]);
        assert_abs_diff_eq!(p3.eigenvalues()[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p3.eigenvalues()[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn k2_propagator_eigenvalues() {
        let k2 = spectrum_of(2, &[(0, 1)]);
        assert_eq!(propagator_eigenvalues(&k2, 0.0).unwrap(), vec![0.5, 0.5]);
        let mu = propagator_eigenvalues(&k2, 0.5).unwrap();
        // softmax of [0, -1]
        assert_abs_diff_eq!(mu[0], 0.731_058_578_630_004_9, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 0.268_941_421_369_995_1, epsilon = 1e-12);
        assert!(matches!(
            propagator_eigenvalues(&k2, -1.0),
            Err(SpectralError::NegativeTau(_))
        ));
    }

    #[test]
    fn long_time_limit_is_point_mass() {
        let s = spectrum_of(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let mu = propagator_eigenvalues(&s, 1e6).unwrap();
        assert_abs_diff_eq!(mu[0], 1.0, epsilon = 1e-12);
        assert!(mu[1..].iter().all(|&m| m.abs() < 1e-12));
        assert!(von_neumann_entropy(&s, 1e6).unwrap() < 1e-9);
        assert_eq!(von_neumann_entropy(&s, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn k2_entropy() {
        let k2 = spectrum_of(2, &[(0, 1)]);
        // -(p ln p + q ln q) / ln 2 with p = 1/(1+e^-1)
        assert_abs_diff_eq!(
            von_neumann_entropy(&k2, 0.5).unwrap(),
            0.839_941_537_983_169_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn scan_rejects_bad_ranges() {
        let k2 = spectrum_of(2, &[(0, 1)]);
        for (a, b, m) in [(0.0, 1.0, 20), (1.0, 1.0, 20), (1.0, 0.5, 20), (0.1, 1.0, 7)] {
            assert!(matches!(
                entropy_scan(&k2, a, b, m),
                Err(SpectralError::InvalidRange { .. })
            ));
        }
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = log_grid(1e-2, 1e3, 300);
        assert_eq!(g.len(), 300);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[299], 1e3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    fn synthetic_grid(m: usize) -> Vec<f64> {
        log_grid(1e-2, 1e2, m)
    }

    fn bump(x: f64, centre: f64, height: f64) -> f64 {
        height * (-(x - centre).powi(2) / 0.5).exp()
    }

    #[test]
    fn single_bump_peak() {
        let taus = synthetic_grid(101);
        let c: Vec<f64> = taus.iter().map(|t| bump(t.ln(), 0.3, 1.0)).collect();
        let peaks = find_peaks(&taus, &c).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_abs_diff_eq!(peaks[0].tau.ln(), 0.3, epsilon = 1e-3);
        assert_abs_diff_eq!(peaks[0].heat_capacity, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn secondary_peak_above_threshold_is_kept() {
        let taus = synthetic_grid(201);
        let c: Vec<f64> = taus
            .iter()
            .map(|t| bump(t.ln(), -2.0, 0.3) + bump(t.ln(), 2.0, 1.0))
            .collect();
        let peaks = find_peaks(&taus, &c).unwrap();
        assert_eq!(peaks.len(), 2);
        assert!(peaks[0].heat_capacity > peaks[1].heat_capacity);
        assert_abs_diff_eq!(peaks[0].tau.ln(), 2.0, epsilon = 1e-2);
        assert_abs_diff_eq!(peaks[1].tau.ln(), -2.0, epsilon = 1e-2);

        // a 20% bump falls under the quarter-height threshold
        let c: Vec<f64> = taus
            .iter()
            .map(|t| bump(t.ln(), -2.0, 0.2) + bump(t.ln(), 2.0, 1.0))
            .collect();
        assert_eq!(find_peaks(&taus, &c).unwrap().len(), 1);
    }

    #[test]
    fn monotone_curve_has_no_peak() {
        let taus = synthetic_grid(50);
        let c: Vec<f64> = (0..50).map(|k| 10.0 - k as f64).collect();
        assert!(matches!(find_peaks(&taus, &c), Err(SpectralError::NoPeak)));
        let plateau = vec![1.0; 50];
        assert!(matches!(
            find_peaks(&taus, &plateau),
            Err(SpectralError::NoPeak)
        ));
    }

    #[test]
    fn parabola_vertex_exact_on_quadratics() {
        let f = |x: f64| 2.0 - 3.0 * (x - 0.37).powi(2);
        let x = [0.0, 0.5, 1.2];
        let (xs, ys) = parabola_vertex(x, x.map(f));
        assert_abs_diff_eq!(xs, 0.37, epsilon = 1e-12);
        assert_abs_diff_eq!(ys, 2.0, epsilon = 1e-12);
    }
}
