use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::softmax;
use super::{ClassTaxonomy, ClassifyError, LinearModel, LossKind, Standardizer, TrainingInfo};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Labelled raw feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub taxonomy: ClassTaxonomy,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(taxonomy: ClassTaxonomy, features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, ClassifyError> {
        if features.len() != labels.len() {
            return Err(ClassifyError::InvalidInput(format!("{} feature rows, {} labels", features.len(), labels.len())));
        }
        if let Some(first) = features.first() {
            if first.is_empty() || features.iter().any(|r| r.len() != first.len()) {
                return Err(ClassifyError::InvalidInput("feature rows must share a non-zero length".into()));
            }
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ClassifyError::InvalidInput("non-finite feature value".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= taxonomy.len()) {
            return Err(ClassifyError::InvalidInput(format!("label index {l} outside the taxonomy")));
        }
        Ok(Self { taxonomy, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.taxonomy.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub loss: LossKind,
    pub l2: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub grad_tol: f64,
    pub min_per_class: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { loss: LossKind::Logistic, l2: 1e-3, max_epochs: 500, seed: 42, grad_tol: 1e-6, min_per_class: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub losses: Vec<f64>,
    pub converged: bool,
}

/// Mean loss plus `l2/2·‖W‖²` (bias unregularized) and its gradient with
/// respect to the flattened parameters `[W row-major, b]`. `x` must already
/// be standardized.
pub fn loss_and_gradient(
    params: &[f64],
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    loss: LossKind,
    l2: f64,
) -> (f64, Vec<f64>) {
    let d = x.first().map_or(0, Vec::len);
    let (w, b) = params.split_at(n_classes * d);
    let n = x.len().max(1) as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; params.len()];
    let mut ds = vec![0.0; n_classes];
    for (xi, &yi) in x.iter().zip(y) {
        let s: Vec<f64> =
            (0..n_classes).map(|k| w[k * d..(k + 1) * d].iter().zip(xi).map(|(a, v)| a * v).sum::<f64>() + b[k]).collect();
        match loss {
            LossKind::Logistic => {
                let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - s[yi];
                let p = softmax(&s);
                for k in 0..n_classes {
                    ds[k] = p[k] - if k == yi { 1.0 } else { 0.0 };
                }
            }
            LossKind::Hinge => {
                ds.iter_mut().for_each(|v| *v = 0.0);
                for k in (0..n_classes).filter(|&k| k != yi) {
                    let m = 1.0 + s[k] - s[yi];
                    if m > 0.0 {
                        total += m * m;
                        ds[k] += 2.0 * m;
                        ds[yi] -= 2.0 * m;
                    }
                }
            }
        }
        for k in 0..n_classes {
            if ds[k] == 0.0 {
                continue;
            }
            for (g, v) in grad[k * d..(k + 1) * d].iter_mut().zip(xi) {
                *g += ds[k] * v / n;
            }
            grad[n_classes * d + k] += ds[k] / n;
        }
    }
    let mut value = total / n;
    for (g, wv) in grad[..n_classes * d].iter_mut().zip(w) {
        value += 0.5 * l2 * wv * wv;
        *g += l2 * wv;
    }
    (value, grad)
}

/// Full-batch gradient descent with Armijo backtracking. Standardization is
/// fitted on the training rows and stored in the model. Identical inputs and
/// seed give bit-identical models.
pub fn train(
    data: &Dataset,
    params: &TrainParams,
    model_id: impl Into<String>,
) -> Result<(LinearModel, TrainingLog), ClassifyError> {
    if !(params.l2 >= 0.0 && params.l2.is_finite()) {
        return Err(ClassifyError::InvalidInput(format!("l2 must be finite and >= 0, got {}", params.l2)));
    }
    if params.max_epochs == 0 {
        return Err(ClassifyError::InvalidInput("max_epochs must be positive".into()));
    }
    let counts = data.class_counts();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(ClassifyError::Training(format!("need at least 2 classes with samples, found {present}")));
    }
    if let Some((k, &c)) = counts.iter().enumerate().find(|(_, &c)| c > 0 && c < params.min_per_class) {
        return Err(ClassifyError::Training(format!(
            "class {:?} has {c} samples, need at least {}",
            data.taxonomy.labels[k], params.min_per_class
        )));
    }

    let standardizer = Standardizer::fit(&data.features)?;
    let x: Vec<Vec<f64>> = data.features.iter().map(|r| standardizer.apply(r)).collect();
    let (k, d) = (data.taxonomy.len(), data.dim());

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut theta: Vec<f64> = (0..k * d).map(|_| 0.01 * normal(&mut rng)).chain(std::iter::repeat_n(0.0, k)).collect();

    let eval = |t: &[f64]| loss_and_gradient(t, &x, &data.labels, k, params.loss, params.l2);
    let (mut f, mut g) = eval(&theta);
    let mut losses = vec![f];
    let mut step: f64 = 1.0;
    let mut converged = false;
    for _ in 0..params.max_epochs {
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2.sqrt() < params.grad_tol {
            converged = true;
            break;
        }
        step = (step * 2.0).min(1e3);
        let mut accepted = None;
        while step > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gv)| t - step * gv).collect();
            let (fc, gc) = eval(&cand);
            if fc.is_finite() && fc <= f - 1e-4 * step * gnorm2 {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            converged = true;
            break;
        };
        theta = cand;
        f = fc;
        g = gc;
        losses.push(f);
    }

    let mut model = LinearModel::zeros(model_id, data.taxonomy.clone(), d);
    model.loss = params.loss;
    model.weights = theta[..k * d].chunks(d).map(<[f64]>::to_vec).collect();
    model.bias = theta[k * d..].to_vec();
    model.standardizer = standardizer;
    model.training = Some(TrainingInfo {
        epochs: losses.len() - 1,
        final_loss: f,
        l2: params.l2,
        seed: params.seed,
        samples: data.len(),
    });
    model.validate()?;
    Ok((model, TrainingLog { losses, converged }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per: usize, k: usize, d: usize, sep: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Vec::new();
        let mut l = Vec::new();
        for c in 0..k {
            for _ in 0..n_per {
                f.push((0..d).map(|j| if j == c % d { sep } else { 0.0 } + normal(&mut rng)).collect());
                l.push(c);
            }
        }
        let tax = if k == 2 { ClassTaxonomy::binary() } else { ClassTaxonomy::multi8() };
        Dataset::new(tax, f, l).unwrap()
    }

    fn finite_difference(theta: &[f64], x: &[Vec<f64>], y: &[usize], k: usize, loss: LossKind) -> Vec<f64> {
        let h = 1e-6;
        (0..theta.len())
            .map(|i| {
                let mut p = theta.to_vec();
                p[i] += h;
                let up = loss_and_gradient(&p, x, y, k, loss, 1e-3).0;
                p[i] -= 2.0 * h;
                let down = loss_and_gradient(&p, x, y, k, loss, 1e-3).0;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
        diff / scale.max(1e-12)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for loss in [LossKind::Logistic, LossKind::Hinge] {
            for trial in 0..20 {
                let k = if trial % 2 == 0 { 2 } else { 8 };
                let d = 4;
                let x: Vec<Vec<f64>> = (0..6).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
                let y: Vec<usize> = (0..6).map(|_| rng.gen_range(0..k)).collect();
                let theta: Vec<f64> = (0..k * d + k).map(|_| 0.5 * normal(&mut rng)).collect();
                let g = loss_and_gradient(&theta, &x, &y, k, loss, 1e-3).1;
                let fd = finite_difference(&theta, &x, &y, k, loss);
                assert!(rel_err(&g, &fd) < 1e-4, "{loss:?} trial {trial}: {}", rel_err(&g, &fd));
            }
        }
    }

    #[test]
    fn separable_blobs_train_to_high_accuracy() {
        let data = blobs(100, 2, 3, 6.0, 1);
        let (model, log) = train(&data, &TrainParams::default(), "t").unwrap();
        let correct = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(f, &l)| model.predict(&model.standardizer.apply(f)).unwrap().argmax() == l)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.99);
        assert!(log.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn hinge_training_also_separates() {
        let data = blobs(50, 8, 8, 8.0, 3);
        let params = TrainParams { loss: LossKind::Hinge, ..Default::default() };
        let (model, _) = train(&data, &params, "h").unwrap();
        let correct = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(f, &l)| model.predict(&model.standardizer.apply(f)).unwrap().argmax() == l)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95);
        assert_eq!(model.loss, LossKind::Hinge);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(30, 2, 4, 2.0, 9);
        let a = train(&data, &TrainParams::default(), "m").unwrap().0;
        let b = train(&data, &TrainParams::default(), "m").unwrap().0;
        assert_eq!(a.to_json(), b.to_json());
        let c = train(&data, &TrainParams { seed: 5, ..Default::default() }, "m").unwrap().0;
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn degenerate_datasets_are_rejected() {
        let one_class = Dataset::new(ClassTaxonomy::binary(), vec![vec![1.0]; 10], vec![0; 10]).unwrap();
        assert!(matches!(train(&one_class, &TrainParams::default(), "x"), Err(ClassifyError::Training(_))));
        let few = Dataset::new(ClassTaxonomy::binary(), vec![vec![1.0]; 8], vec![0, 0, 0, 0, 0, 1, 1, 1]).unwrap();
        assert!(matches!(train(&few, &TrainParams::default(), "x"), Err(ClassifyError::Training(_))));
        assert!(Dataset::new(ClassTaxonomy::binary(), vec![vec![f64::NAN]], vec![0]).is_err());
        assert!(Dataset::new(ClassTaxonomy::binary(), vec![vec![1.0]], vec![2]).is_err());
    }
}
