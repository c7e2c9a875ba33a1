//! Ridge regression classifier over feature matrices.
//!
//! Features are standardised (constant columns get σ = 1 and end up with
//! zero weight), classes are encoded as ±1 one-vs-rest targets, and the
//! regularisation strength is picked from a log-spaced grid by closed-form
//! leave-one-out error. The linear algebra runs through a symmetric
//! eigendecomposition of either the Gram matrix `X Xᵀ` (when rows ≤ columns,
//! the usual case with thousands of features) or `Xᵀ X`; both give the same
//! spectrum as an SVD of `X`, and the hat-matrix diagonal needed by the
//! leave-one-out formula falls out of it directly.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureMatrix;

/// Columns with standard deviation below this are treated as constant.
const STD_FLOOR: f64 = 1e-8;

/// Default regularisation grid: 10 points, log-spaced over 10⁻³..10³.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..10)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 9.0))
        .collect()
}

/// A fitted linear classifier: per-class weights over standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// One weight vector per class, in `classes` order.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub alpha: f64,
    /// Summed squared leave-one-out residuals at the chosen alpha.
    pub loo_error: f64,
    pub classes: Vec<String>,
}

impl RidgeModel {
    pub fn num_features(&self) -> usize {
        self.means.len()
    }

    /// Per-class scores for one standardised-on-the-fly feature row.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| {
                let mut s = *b;
                for ((x, m), (sd, wj)) in
                    row.iter().zip(&self.means).zip(self.stds.iter().zip(w))
                {
                    s += wj * (x - m) / sd;
                }
                s
            })
            .collect()
    }
}

/// Standardised copy of `x` plus the (mean, σ-guarded std) per column.
fn standardize(x: &FeatureMatrix) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let (n, m) = (x.rows, x.cols);
    let mut means = vec![0.0; m];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            means[j] += v;
        }
    }
    for mu in &mut means {
        *mu /= n as f64;
    }
    let mut vars = vec![0.0; m];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            let d = v - means[j];
            vars[j] += d * d;
        }
    }
    let stds: Vec<f64> = vars
        .iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s < STD_FLOOR {
                1.0
            } else {
                s
            }
        })
        .collect();
    let mut z = DMatrix::zeros(n, m);
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            z[(i, j)] = (v - means[j]) / stds[j];
        }
    }
    (z, means, stds)
}

/// ±1 one-vs-rest target matrix (n × #classes) and the sorted class list.
fn encode_targets(y: &[&str]) -> (DMatrix<f64>, Vec<String>) {
    let mut classes: Vec<String> = y.iter().map(|s| s.to_string()).collect();
    classes.sort();
    classes.dedup();
    let mut t = DMatrix::from_element(y.len(), classes.len(), -1.0);
    for (i, label) in y.iter().enumerate() {
        let k = classes.binary_search(&label.to_string()).unwrap();
        t[(i, k)] = 1.0;
    }
    (t, classes)
}

/// Spectral pieces shared by every alpha: `u` spans the row space of `z`
/// (n × r), `evals` are the squared singular values, `uty = uᵀ·(y − ȳ)`.
struct Spectrum {
    u: DMatrix<f64>,
    evals: Vec<f64>,
    uty: DMatrix<f64>,
    /// Centered targets, for residual bookkeeping.
    yc: DMatrix<f64>,
    y_mean: Vec<f64>,
    /// Right factor turning dual coefficients into weights: w = v·diag·uty.
    v: Option<DMatrix<f64>>,
    z: DMatrix<f64>,
}

fn decompose(z: DMatrix<f64>, y: &DMatrix<f64>) -> Spectrum {
    let n = z.nrows();
    let m = z.ncols();
    let y_mean: Vec<f64> = (0..y.ncols())
        .map(|k| y.column(k).sum() / n as f64)
        .collect();
    let mut yc = y.clone();
    for k in 0..yc.ncols() {
        for i in 0..n {
            yc[(i, k)] -= y_mean[k];
        }
    }
    if n <= m {
        // Dual: eigendecompose the Gram matrix z·zᵀ.
        let gram = &z * z.transpose();
        let eig = SymmetricEigen::new(gram);
        let evals: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let u = eig.eigenvectors;
        let uty = u.transpose() * &yc;
        Spectrum { u, evals, uty, yc, y_mean, v: None, z }
    } else {
        // Primal: eigendecompose zᵀ·z, then lift to row space via u = z·v.
        let gram = z.transpose() * &z;
        let eig = SymmetricEigen::new(gram);
        let evals: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let v = eig.eigenvectors;
        let u = &z * &v;
        let uty = u.transpose() * &yc;
        Spectrum { u, evals, uty, yc, y_mean, v: Some(v), z }
    }
}

/// Closed-form leave-one-out squared error at one alpha.
///
/// With the hat matrix `H = u · diag(g) · uᵀ`, the leave-one-out residual of
/// row i is `(y_i − ŷ_i) / (1 − H_ii)`; `g` is `λ/(λ+α)` in the dual route
/// and the same quantity reached through `u = z·v` in the primal route.
fn loo_error(spec: &Spectrum, alpha: f64) -> f64 {
    let n = spec.u.nrows();
    let dual = spec.v.is_none();
    // diag factors: dual u columns are orthonormal, primal u columns have
    // squared norm λ, so the hat factor differs.
    let g: Vec<f64> = spec
        .evals
        .iter()
        .map(|&l| if dual { l / (l + alpha) } else { 1.0 / (l + alpha) })
        .collect();
    let mut err = 0.0;
    // ŷ = u · diag(g) · uty ; H_ii = Σ_j g_j · u_ij².
    let mut h = vec![0.0f64; n];
    for (j, &gj) in g.iter().enumerate() {
        for (i, hi) in h.iter_mut().enumerate() {
            let uij = spec.u[(i, j)];
            *hi += gj * uij * uij;
        }
    }
    for k in 0..spec.yc.ncols() {
        for (i, &hi) in h.iter().enumerate() {
            let mut yhat = 0.0;
            for (j, &gj) in g.iter().enumerate() {
                yhat += spec.u[(i, j)] * gj * spec.uty[(j, k)];
            }
            let denom = (1.0 - hi).max(1e-12);
            let e = (spec.yc[(i, k)] - yhat) / denom;
            err += e * e;
        }
    }
    err
}

/// Ridge weights at one alpha, in standardised feature space (m × #classes).
fn weights_at(spec: &Spectrum, alpha: f64) -> DMatrix<f64> {
    let r = spec.evals.len();
    let k = spec.uty.ncols();
    let mut coef = DMatrix::zeros(r, k);
    for j in 0..r {
        let d = 1.0 / (spec.evals[j] + alpha);
        for c in 0..k {
            coef[(j, c)] = d * spec.uty[(j, c)];
        }
    }
    match &spec.v {
        // Primal: w = v · diag(1/(λ+α)) · uᵀyc.
        Some(v) => v * coef,
        // Dual: w = zᵀ · q · diag(1/(λ+α)) · qᵀyc.
        None => spec.z.transpose() * (&spec.u * coef),
    }
}

/// Fit the classifier, selecting alpha from `alphas` by leave-one-out error
/// (ties keep the earliest grid entry).
pub fn ridge_fit(x: &FeatureMatrix, y: &[String], alphas: &[f64]) -> Result<RidgeModel> {
    if x.rows < 2 {
        return Err(Error::Fit(format!(
            "ridge needs at least 2 training rows, got {}",
            x.rows
        )));
    }
    if x.rows != y.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            x.rows,
            y.len()
        )));
    }
    if alphas.is_empty() {
        return Err(Error::InvalidInput("empty alpha grid".into()));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("feature matrix contains non-finite values".into()));
    }
    let refs: Vec<&str> = y.iter().map(String::as_str).collect();
    let (targets, classes) = encode_targets(&refs);
    if classes.len() < 2 {
        return Err(Error::Fit(
            "training data has a single class; classification is undefined".into(),
        ));
    }
    let (z, means, stds) = standardize(x);
    let spec = decompose(z, &targets);

    let mut best = (f64::INFINITY, alphas[0]);
    for &alpha in alphas {
        let e = loo_error(&spec, alpha);
        if e < best.0 {
            best = (e, alpha);
        }
    }
    let (err, alpha) = best;
    let w = weights_at(&spec, alpha);

    let weights: Vec<Vec<f64>> = (0..classes.len())
        .map(|k| w.column(k).iter().copied().collect())
        .collect();
    // Standardised features have mean 0, so each intercept is the target mean.
    let intercepts = spec.y_mean.clone();
    Ok(RidgeModel { means, stds, weights, intercepts, alpha, loo_error: err, classes })
}

/// Predict a label per row: argmax of class scores, ties to the lowest class
/// index.
pub fn ridge_predict(model: &RidgeModel, x: &FeatureMatrix) -> Result<Vec<String>> {
    if x.cols != model.num_features() {
        return Err(Error::Shape(format!(
            "feature matrix has {} columns, model expects {}",
            x.cols,
            model.num_features()
        )));
    }
    let mut out = Vec::with_capacity(x.rows);
    for i in 0..x.rows {
        let scores = model.scores(x.row(i));
        let mut best = 0;
        for (k, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = k;
            }
        }
        out.push(model.classes[best].clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn separable() -> (FeatureMatrix, Vec<String>) {
        let rows = vec![
            vec![0.1, 0.9],
            vec![0.2, 0.8],
            vec![0.15, 0.95],
            vec![0.9, 0.1],
            vec![0.85, 0.2],
            vec![0.95, 0.15],
        ];
        (FeatureMatrix::from_rows(rows), labels(&["a", "a", "a", "b", "b", "b"]))
    }

    #[test]
    fn separable_toy_trains_to_full_accuracy() {
        let (x, y) = separable();
        let model = ridge_fit(&x, &y, &default_alpha_grid()).unwrap();
        let pred = ridge_predict(&model, &x).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn alpha_grid_shape() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 10);
        assert_relative_eq!(g[0], 1e-3, max_relative = 1e-12);
        assert_relative_eq!(g[9], 1e3, max_relative = 1e-12);
        for w in g.windows(2) {
            assert!(w[0] < w[1]);
            assert_relative_eq!(w[1] / w[0], g[1] / g[0], max_relative = 1e-9);
        }
    }

    /// Brute-force reference: solve (ZᵀZ + αI) w = Zᵀ yc on the standardised
    /// centered problem and compare. Exercises both the dual (n ≤ m) and
    /// primal (n > m) routes.
    #[test]
    fn matches_normal_equation_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, m) in [(5usize, 9usize), (9, 5), (20, 20), (16, 50), (50, 16)] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
                .collect();
            let x = FeatureMatrix::from_rows(rows);
            let y: Vec<String> =
                (0..n).map(|i| ["u", "v", "w"][i % 3].to_string()).collect();
            let alpha = 0.37;
            let model = ridge_fit(&x, &y, &[alpha]).unwrap();

            let (z, _, _) = standardize(&x);
            let refs: Vec<&str> = y.iter().map(String::as_str).collect();
            let (t, classes) = encode_targets(&refs);
            let mut yc = t.clone();
            for k in 0..yc.ncols() {
                let mu = t.column(k).sum() / n as f64;
                for i in 0..n {
                    yc[(i, k)] -= mu;
                }
            }
            let a = z.transpose() * &z + DMatrix::identity(m, m) * alpha;
            let b = z.transpose() * &yc;
            let w_ref = a.lu().solve(&b).unwrap();
            for (k, _) in classes.iter().enumerate() {
                for j in 0..m {
                    assert_relative_eq!(
                        model.weights[k][j],
                        w_ref[(j, k)],
                        max_relative = 1e-6,
                        epsilon = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn duplicated_rows_give_same_predictions() {
        let (x, y) = separable();
        let mut rows2: Vec<Vec<f64>> = (0..x.rows).map(|i| x.row(i).to_vec()).collect();
        rows2.extend((0..x.rows).map(|i| x.row(i).to_vec()));
        let x2 = FeatureMatrix::from_rows(rows2);
        let mut y2 = y.clone();
        y2.extend(y.clone());
        let m1 = ridge_fit(&x, &y, &[1.0]).unwrap();
        let m2 = ridge_fit(&x2, &y2, &[1.0]).unwrap();
        let probe = FeatureMatrix::from_rows(vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.3, 0.6],
            vec![0.7, 0.4],
        ]);
        assert_eq!(
            ridge_predict(&m1, &probe).unwrap(),
            ridge_predict(&m2, &probe).unwrap()
        );
    }

    #[test]
    fn constant_column_gets_zero_weight() {
        let rows = vec![
            vec![0.5, 0.1, 0.9],
            vec![0.5, 0.2, 0.8],
            vec![0.5, 0.9, 0.1],
            vec![0.5, 0.8, 0.2],
        ];
        let x = FeatureMatrix::from_rows(rows);
        let y = labels(&["a", "a", "b", "b"]);
        let model = ridge_fit(&x, &y, &default_alpha_grid()).unwrap();
        assert_eq!(model.stds[0], 1.0);
        for w in &model.weights {
            assert_relative_eq!(w[0], 0.0, epsilon = 1e-12);
        }
        let pred = ridge_predict(&model, &x).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn all_zero_row_takes_largest_intercept() {
        // Unbalanced classes make the intercepts differ; a zero row scores
        // exactly the intercepts (after standardisation shifts cancel).
        let rows = vec![
            vec![0.9, 0.6],
            vec![0.8, 0.5],
            vec![0.7, 0.55],
            vec![0.2, 0.1],
        ];
        let x = FeatureMatrix::from_rows(rows);
        let y = labels(&["a", "a", "a", "b"]);
        let model = ridge_fit(&x, &y, &[10.0]).unwrap();
        let k_max = model
            .intercepts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        // Score a row equal to the feature means: the weight terms vanish.
        let mean_row = FeatureMatrix::from_rows(vec![model.means.clone()]);
        let pred = ridge_predict(&model, &mean_row).unwrap();
        assert_eq!(pred[0], model.classes[k_max]);
    }

    #[test]
    fn argmax_invariant_under_affine_score_transform() {
        let (x, y) = separable();
        let model = ridge_fit(&x, &y, &[0.1]).unwrap();
        let mut scaled = model.clone();
        for w in &mut scaled.weights {
            for v in w.iter_mut() {
                *v *= 2.5;
            }
        }
        for b in &mut scaled.intercepts {
            *b = 2.5 * *b + 7.0;
        }
        let probe = FeatureMatrix::from_rows(vec![
            vec![0.1, 0.8],
            vec![0.6, 0.6],
            vec![0.95, 0.05],
        ]);
        assert_eq!(
            ridge_predict(&model, &probe).unwrap(),
            ridge_predict(&scaled, &probe).unwrap()
        );
    }

    #[test]
    fn fit_is_deterministic() {
        let (x, y) = separable();
        let a = ridge_fit(&x, &y, &default_alpha_grid()).unwrap();
        let b = ridge_fit(&x, &y, &default_alpha_grid()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = separable();
        assert!(ridge_fit(&x, &y[..5], &[1.0]).is_err());
        assert!(ridge_fit(&x, &labels(&["a"; 6]), &[1.0]).is_err());
        assert!(ridge_fit(&x, &y, &[]).is_err());
        let one_row = FeatureMatrix::from_rows(vec![vec![1.0, 2.0]]);
        assert!(ridge_fit(&one_row, &labels(&["a"]), &[1.0]).is_err());
        let bad = FeatureMatrix::from_rows(vec![vec![f64::NAN, 0.0], vec![0.0, 1.0]]);
        assert!(ridge_fit(&bad, &labels(&["a", "b"]), &[1.0]).is_err());

        let model = ridge_fit(&x, &y, &[1.0]).unwrap();
        let wrong_cols = FeatureMatrix::from_rows(vec![vec![1.0, 2.0, 3.0]]);
        assert!(ridge_predict(&model, &wrong_cols).is_err());
    }

    #[test]
    fn ties_break_to_lowest_class_index() {
        let model = RidgeModel {
            means: vec![0.0],
            stds: vec![1.0],
            weights: vec![vec![0.0], vec![0.0], vec![1.0]],
            intercepts: vec![0.5, 0.5, -1.0],
            alpha: 1.0,
            loo_error: 0.0,
            classes: vec!["a".into(), "b".into(), "c".into()],
        };
        let x = FeatureMatrix::from_rows(vec![vec![0.0]]);
        assert_eq!(ridge_predict(&model, &x).unwrap(), vec!["a".to_string()]);
    }

    #[test]
    fn three_class_problem_recovers_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let centers = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.9]];
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..12 {
                rows.push(vec![
                    c[0] + 0.05 * (rng.random::<f64>() - 0.5),
                    c[1] + 0.05 * (rng.random::<f64>() - 0.5),
                ]);
                y.push(["left", "mid", "top"][k].to_string());
            }
        }
        let x = FeatureMatrix::from_rows(rows);
        let model = ridge_fit(&x, &y, &default_alpha_grid()).unwrap();
        let pred = ridge_predict(&model, &x).unwrap();
        let correct = pred.iter().zip(&y).filter(|(p, t)| p == t).count();
        assert_eq!(correct, y.len());
    }
}
