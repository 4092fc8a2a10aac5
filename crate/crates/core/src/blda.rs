//! Bayesian linear discriminant analysis.
//!
//! Regression of the ±1 class labels onto the features under a Gaussian
//! weight prior of precision `alpha` and Gaussian noise of precision `beta`.
//! The bias weight carries a flat prior: it is integrated out, which is the
//! same as centering features and labels and leaves `N - 1` effective
//! observations. For fixed hyperparameters the posterior mean is
//!
//! ```text
//! w = beta (beta Xc'Xc + alpha I)^-1 Xc'yc,   bias = mean(y) - mean(X) . w
//! ```
//!
//! and the hyperparameters follow the evidence fixed point
//!
//! ```text
//! gamma = sum_i beta l_i / (beta l_i + alpha)   (l_i: eigenvalues of Xc'Xc)
//! alpha = gamma / |w|^2
//! beta  = (N - 1 - gamma) / |yc - Xc w|^2
//! ```
//!
//! Xc'Xc is diagonalized once, so each iteration is linear in the feature count.
//! Noise-free data can be fitted exactly; `beta` is then held at
//! [`MAX_NOISE_PRECISION`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Upper bound on `beta` (labels are ±1, so a noise SD of 1e-5).
pub const MAX_NOISE_PRECISION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BldaConfig {
    pub max_iterations: usize,
    /// Stop once both hyperparameters change by less than this fraction.
    pub tolerance: f64,
    pub initial_alpha: f64,
    pub initial_beta: f64,
    /// Solve once at the initial hyperparameters without re-estimating them.
    pub fixed_hyperparameters: bool,
}

impl Default for BldaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-4,
            initial_alpha: 25.0,
            initial_beta: 1.0,
            fixed_hyperparameters: false,
        }
    }
}

impl BldaConfig {
    /// One solve at the given hyperparameters.
    pub fn frozen(alpha: f64, beta: f64) -> Self {
        Self {
            initial_alpha: alpha,
            initial_beta: beta,
            fixed_hyperparameters: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BldaModel {
    /// Feature weights followed by the bias weight.
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub n_iterations: usize,
    /// Log evidence at each visited hyperparameter pair.
    pub evidence_trace: Vec<f64>,
    pub converged: bool,
}

impl BldaModel {
    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.weights.len() - 1]
    }

    /// `w . x` for an input that already ends in the bias entry.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(invalid(format!(
                "input has {} entries, model expects {}",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(dot(&self.weights, x))
    }

    /// Score of a feature vector without the bias entry.
    pub fn score_features(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n_features() {
            return Err(invalid(format!(
                "feature vector has {} entries, model expects {}",
                values.len(),
                self.n_features()
            )));
        }
        Ok(dot(&self.weights[..values.len()], values) + self.bias())
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() < 2 || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("model weights must be finite with a bias entry"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(invalid("model hyperparameters must be positive"));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Fit {
    weights: DVector<f64>,
    sq_norm: f64,
    sq_error: f64,
    gamma: f64,
}

struct Problem {
    centered: DMatrix<f64>,
    y_centered: DVector<f64>,
    x_mean: DVector<f64>,
    y_mean: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    /// Eigen-basis projection of Xc'yc.
    projection: Vec<f64>,
    n_eff: f64,
}

impl Problem {
    fn fit(&self, alpha: f64, beta: f64) -> Fit {
        let rotated: Vec<f64> = self
            .eigenvalues
            .iter()
            .zip(&self.projection)
            .map(|(l, q)| beta * q / (beta * l + alpha))
            .collect();
        let sq_norm = rotated.iter().map(|v| v * v).sum();
        let weights = &self.eigenvectors * DVector::from_vec(rotated);
        let residual = &self.y_centered - &self.centered * &weights;
        let gamma = self
            .eigenvalues
            .iter()
            .map(|l| beta * l / (beta * l + alpha))
            .sum();
        Fit {
            weights,
            sq_norm,
            sq_error: residual.norm_squared(),
            gamma,
        }
    }

    fn log_evidence(&self, alpha: f64, beta: f64, fit: &Fit) -> f64 {
        let d = self.eigenvalues.len() as f64;
        let log_det: f64 = self.eigenvalues.iter().map(|l| (alpha + beta * l).ln()).sum();
        0.5 * d * alpha.ln() + 0.5 * self.n_eff * beta.ln()
            - 0.5 * beta * fit.sq_error
            - 0.5 * alpha * fit.sq_norm
            - 0.5 * log_det
            - 0.5 * self.n_eff * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Trains on a design matrix whose last column is the constant bias input.
pub fn train(design: &DMatrix<f64>, labels: &[f64], cfg: &BldaConfig) -> Result<BldaModel> {
    let (n, p) = design.shape();
    if p < 2 {
        return Err(invalid("design matrix needs at least one feature column and the bias column"));
    }
    if n < 2 || labels.len() != n {
        return Err(invalid(format!("{} labels for {n} rows", labels.len())));
    }
    if design.iter().chain(labels).any(|v| !v.is_finite()) {
        return Err(invalid("training data contains non-finite values"));
    }
    if design.column(p - 1).iter().any(|v| *v != 1.0) {
        return Err(invalid("last design column must be the bias input of ones"));
    }
    if labels.iter().all(|y| *y == labels[0]) {
        return Err(invalid("training labels contain a single class"));
    }
    if !(cfg.initial_alpha > 0.0 && cfg.initial_beta > 0.0 && cfg.tolerance > 0.0) {
        return Err(invalid("initial hyperparameters and tolerance must be positive"));
    }

    let d = p - 1;
    let features = design.columns(0, d);
    let x_mean = DVector::from_iterator(d, features.column_iter().map(|c| c.mean()));
    let mut centered = features.clone_owned();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let y = DVector::from_column_slice(labels);
    let y_mean = y.mean();
    let y_centered = y.add_scalar(-y_mean);

    let gram = centered.tr_mul(&centered);
    if gram.trace() <= 0.0 {
        return Err(Error::DegenerateTrainingData(
            "every feature is constant across the training rows".into(),
        ));
    }
    let eig = SymmetricEigen::new(gram);
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let xty = centered.tr_mul(&y_centered);
    let projection: Vec<f64> = eig.eigenvectors.tr_mul(&xty).iter().copied().collect();

    let problem = Problem {
        centered,
        y_centered,
        x_mean,
        y_mean,
        eigenvalues,
        eigenvectors: eig.eigenvectors,
        projection,
        n_eff: (n - 1) as f64,
    };

    let (mut alpha, mut beta) = (cfg.initial_alpha, cfg.initial_beta);
    let mut evidence_trace = Vec::new();
    let mut n_iterations = 0;
    let mut converged = false;
    let fit = loop {
        let fit = problem.fit(alpha, beta);
        evidence_trace.push(problem.log_evidence(alpha, beta, &fit));
        if cfg.fixed_hyperparameters || converged || n_iterations == cfg.max_iterations {
            break fit;
        }
        if fit.sq_norm <= 0.0 {
            return Err(Error::DegenerateTrainingData(
                "posterior weights vanished; features carry no label information".into(),
            ));
        }
        let dof = problem.n_eff - fit.gamma;
        if dof <= 0.0 {
            return Err(Error::DegenerateTrainingData(format!(
                "{dof:.3} residual degrees of freedom: more effective parameters than training rows"
            )));
        }
        let next_alpha = fit.gamma / fit.sq_norm;
        // an exact fit sends beta to infinity; hold it at the cap instead
        let next_beta = (dof / fit.sq_error).min(MAX_NOISE_PRECISION);
        converged = ((next_alpha - alpha) / alpha).abs() < cfg.tolerance
            && ((next_beta - beta) / beta).abs() < cfg.tolerance;
        alpha = next_alpha;
        beta = next_beta;
        n_iterations += 1;
    };

    let bias = problem.y_mean - problem.x_mean.dot(&fit.weights);
    let mut weights: Vec<f64> = fit.weights.iter().copied().collect();
    weights.push(bias);
    let model = BldaModel {
        weights,
        alpha,
        beta,
        n_iterations,
        evidence_trace,
        converged: converged || cfg.fixed_hyperparameters,
    };
    model.validate()?;
    Ok(model)
}

/// Builds the bias-augmented design matrix from rows of features.
pub fn design_matrix<'a, I>(rows: I, n_features: usize) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut data = Vec::new();
    let mut n = 0;
    for row in rows {
        if row.len() != n_features {
            return Err(invalid(format!("row {n} has {} features, expected {n_features}", row.len())));
        }
        data.extend_from_slice(row);
        data.push(1.0);
        n += 1;
    }
    Ok(DMatrix::from_row_slice(n, n_features + 1, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn clouds(n: usize, sep: f64, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            rows.push(vec![a * 0.3 + sep * y, b * 0.3 - 0.5 * sep * y]);
            labels.push(y);
        }
        (design_matrix(rows.iter().map(Vec::as_slice), 2).unwrap(), labels)
    }

    #[test]
    fn separable_clouds_fully_classified() {
        let (x, y) = clouds(200, 3.0, 1);
        let model = train(&x, &y, &BldaConfig::default()).unwrap();
        assert!(model.converged);
        for (i, label) in y.iter().enumerate() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            assert_eq!(model.score(&row).unwrap().signum(), *label);
        }
    }

    #[test]
    fn negated_labels_negate_weights() {
        let (x, y) = clouds(120, 0.5, 2);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = train(&x, &y, &BldaConfig::default()).unwrap();
        let b = train(&x, &neg, &BldaConfig::default()).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa + wb).abs() < 1e-9 * (1.0 + wa.abs()));
        }
    }

    #[test]
    fn bias_only_input_scores_bias() {
        let (x, y) = clouds(60, 1.0, 3);
        let m = train(&x, &y, &BldaConfig::default()).unwrap();
        assert_eq!(m.score(&[0.0, 0.0, 1.0]).unwrap(), m.bias());
        assert!(m.score(&[0.0, 1.0]).is_err());
        assert!(m.score_features(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, _) = clouds(10, 1.0, 4);
        assert!(train(&x, &[1.0; 10], &BldaConfig::default()).is_err());
        let mut no_bias = x.clone();
        no_bias[(3, 2)] = 0.5;
        let y: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(train(&no_bias, &y, &BldaConfig::default()).is_err());
        let constant = design_matrix([[2.0, 2.0]; 10].iter().map(|r| r.as_slice()), 2).unwrap();
        assert!(matches!(
            train(&constant, &y, &BldaConfig::default()),
            Err(Error::DegenerateTrainingData(_))
        ));
    }

    #[test]
    fn exact_fit_caps_noise_precision() {
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let rows: Vec<[f64; 2]> = y.iter().map(|v| [3.0 * v + 1.0, -v]).collect();
        let x = design_matrix(rows.iter().map(|r| r.as_slice()), 2).unwrap();
        let m = train(&x, &y, &BldaConfig::default()).unwrap();
        assert_eq!(m.beta, MAX_NOISE_PRECISION);
        for (r, t) in rows.iter().zip(&y) {
            assert!(m.score_features(r).unwrap() * t > 0.0);
        }
    }

    #[test]
    fn evidence_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 30;
        let truth: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..300 {
            let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let s = dot(&row, &truth) + 3.0 * rng.sample::<f64, _>(StandardNormal);
            y.push(if s > 0.0 { 1.0 } else { -1.0 });
            rows.push(row);
        }
        let x = design_matrix(rows.iter().map(Vec::as_slice), d).unwrap();
        let m = train(&x, &y, &BldaConfig::default()).unwrap();
        assert!(m.converged);
        for pair in m.evidence_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-8);
        }
    }
}
