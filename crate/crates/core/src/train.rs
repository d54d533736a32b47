//! Small deterministic trainers for attack targets.
//!
//! Both trainers use mini-batch SGD with heavy-ball momentum
//! (`v ← μv + g`, `θ ← θ − ηv`) and reshuffle the data every epoch with a
//! ChaCha8 stream seeded from the config.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_io::{write_csv_atomic, Dataset};
use crate::error::{Error, Result};
use crate::models::{dot, Layer, LinearModel, Matrix, ReluNetwork};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l1_lambda: f64,
    pub clamp_nonnegative: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 15,
            l1_lambda: 1e-4,
            clamp_nonnegative: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!("momentum {}", self.momentum)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch size must be >= 1".into()));
        }
        if !(self.l1_lambda >= 0.0 && self.l1_lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("l1 lambda {}", self.l1_lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the mini-batch objectives seen during the epoch.
    pub objective: f64,
    /// Training accuracy at the end of the epoch.
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog(pub Vec<EpochLog>);

impl TrainLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .0
            .iter()
            .map(|e| vec![e.epoch.to_string(), e.objective.to_string(), e.accuracy.to_string()])
            .collect();
        write_csv_atomic(path, &["epoch", "objective", "accuracy"], &rows)
    }

    pub fn first(&self) -> Option<&EpochLog> {
        self.0.first()
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.0.last()
    }
}

fn l1_subgradient(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean squared hinge loss plus `λ‖w‖₁`:
/// `(1/n) Σ max(0, 1 − y(w·x + b))² + λ‖w‖₁`.
pub fn svm_objective(m: &LinearModel, data: &Dataset, lambda: f64) -> Result<f64> {
    let mut loss = 0.0;
    for i in 0..data.len() {
        let y = data.labels[i] as f64;
        let margin = (1.0 - y * m.score(data.row(i))?).max(0.0);
        loss += margin * margin;
    }
    Ok(loss / data.len() as f64 + lambda * m.w.iter().map(|v| v.abs()).sum::<f64>())
}

pub fn linear_accuracy(m: &LinearModel, data: &Dataset) -> Result<f64> {
    let mut hits = 0usize;
    for i in 0..data.len() {
        if i64::from(m.predict(data.row(i))?) == data.labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// L1-regularized squared-hinge SVM on labels `±1`, starting from zero.
/// The L1 subgradient at 0 is taken as 0.
pub fn train_linear_svm(data: &Dataset, cfg: &TrainConfig) -> Result<(LinearModel, TrainLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::DegenerateData("empty training set".into()));
    }
    if let Some(&bad) = data.labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::DegenerateData(format!("svm labels must be -1 or +1, found {bad}")));
    }
    if !(data.labels.contains(&1) && data.labels.contains(&-1)) {
        return Err(Error::DegenerateData("svm training needs both classes".into()));
    }
    let d = data.dim();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut vw, mut vb) = (vec![0.0; d], 0.0);
    let mut gw = vec![0.0; d];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut obj_sum, mut batches) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            let mut loss = 0.0;
            for &i in batch {
                let x = data.row(i);
                let y = data.labels[i] as f64;
                let margin = 1.0 - y * (dot(&w, x) + b);
                if margin > 0.0 {
                    loss += margin * margin;
                    let coef = -2.0 * margin * y;
                    for (g, xi) in gw.iter_mut().zip(x) {
                        *g += coef * xi;
                    }
                    gb += coef;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            obj_sum += loss * scale + cfg.l1_lambda * w.iter().map(|v| v.abs()).sum::<f64>();
            batches += 1;
            for j in 0..d {
                let g = gw[j] * scale + cfg.l1_lambda * l1_subgradient(w[j]);
                vw[j] = cfg.momentum * vw[j] + g;
                w[j] -= cfg.learning_rate * vw[j];
            }
            vb = cfg.momentum * vb + gb * scale;
            b -= cfg.learning_rate * vb;
        }
        if w.iter().chain(std::iter::once(&b)).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData(format!("training diverged in epoch {epoch}")));
        }
        let model = LinearModel::new(w.clone(), b)?;
        let accuracy = linear_accuracy(&model, data)?;
        log.0.push(EpochLog { epoch, objective: obj_sum / batches as f64, accuracy });
    }
    Ok((LinearModel::new(w, b)?, log))
}

pub fn network_accuracy(net: &ReluNetwork, data: &Dataset) -> Result<f64> {
    let mut hits = 0usize;
    for i in 0..data.len() {
        if net.predict(data.row(i))? as i64 == data.labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// Projects every hidden layer's weights and biases onto `≥ 0`.
pub fn clamp_hidden(net: &mut ReluNetwork) {
    let hidden = net.layers().len() - 1;
    for layer in &mut net.layers_mut()[..hidden] {
        for v in layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut()) {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

pub fn hidden_is_nonnegative(net: &ReluNetwork) -> bool {
    let layers = net.layers();
    layers[..layers.len() - 1]
        .iter()
        .all(|l| l.weights.as_slice().iter().chain(&l.bias).all(|&v| v >= 0.0))
}

fn init_network(arch: &[usize], clamp: bool, rng: &mut ChaCha8Rng) -> Result<ReluNetwork> {
    let mut layers = Vec::with_capacity(arch.len() - 1);
    for (idx, pair) in arch.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / fan_in as f64).sqrt();
        let hidden = idx + 2 < arch.len();
        let data = (0..fan_in * fan_out)
            .map(|_| {
                let v: f64 = rng.random_range(-limit..limit);
                if clamp && hidden {
                    v.abs()
                } else {
                    v
                }
            })
            .collect();
        layers.push(Layer::new(Matrix::new(fan_out, fan_in, data)?, vec![0.0; fan_out])?);
    }
    ReluNetwork::new(layers)
}

/// Gradients of one example's cross-entropy, accumulated into `grads`.
/// Returns the example's loss.
fn backprop(net: &ReluNetwork, x: &[f64], label: usize, grads: &mut [Layer]) -> Result<f64> {
    let layers = net.layers();
    let last = layers.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_vec());
    for (i, layer) in layers.iter().enumerate() {
        let mut h = layer.apply(&acts[i])?;
        if i < last {
            h.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        acts.push(h);
    }
    let scores = &acts[layers.len()];
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = -(exps[label] / total).ln();
    let mut delta: Vec<f64> = exps.iter().map(|e| e / total).collect();
    delta[label] -= 1.0;
    for i in (0..layers.len()).rev() {
        let input = &acts[i];
        let g = &mut grads[i];
        for (r, dr) in delta.iter().enumerate() {
            for (gw, inp) in g.weights.row_mut(r).iter_mut().zip(input) {
                *gw += dr * inp;
            }
            g.bias[r] += dr;
        }
        if i == 0 {
            break;
        }
        let w = &layers[i].weights;
        let mut back = vec![0.0; w.cols()];
        for (r, dr) in delta.iter().enumerate() {
            for (b, wv) in back.iter_mut().zip(w.row(r)) {
                *b += dr * wv;
            }
        }
        // ReLU derivative, taken as 0 at 0
        for (b, a) in back.iter_mut().zip(input) {
            if !(*a > 0.0) {
                *b = 0.0;
            }
        }
        delta = back;
    }
    Ok(loss)
}

/// Softmax cross-entropy MLP with layer sizes `arch = [D, h₁, …, K]`.
/// With `clamp_nonnegative`, hidden weights and biases are projected onto
/// `≥ 0` after every step; the output layer is left free.
pub fn train_mlp(data: &Dataset, arch: &[usize], cfg: &TrainConfig) -> Result<(ReluNetwork, TrainLog)> {
    train_mlp_observed(data, arch, cfg, |_| {})
}

/// [`train_mlp`] with a callback run after every optimizer step.
pub fn train_mlp_observed<F>(
    data: &Dataset,
    arch: &[usize],
    cfg: &TrainConfig,
    mut after_step: F,
) -> Result<(ReluNetwork, TrainLog)>
where
    F: FnMut(&ReluNetwork),
{
    cfg.validate()?;
    if arch.len() < 2 {
        return Err(Error::InvalidConfig("architecture needs input and output sizes".into()));
    }
    if data.is_empty() {
        return Err(Error::DegenerateData("empty training set".into()));
    }
    if arch[0] != data.dim() {
        return Err(Error::DimensionMismatch { expected: arch[0], got: data.dim() });
    }
    let k = arch[arch.len() - 1];
    if let Some(&bad) = data.labels.iter().find(|&&y| y < 0 || y as usize >= k) {
        return Err(Error::DegenerateData(format!("label {bad} outside 0..{k}")));
    }
    if data.labels.iter().all(|&y| y == data.labels[0]) {
        return Err(Error::DegenerateData("training needs at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = init_network(arch, cfg.clamp_nonnegative, &mut rng)?;
    let zeros = || -> Vec<Layer> {
        net_shape(arch).into_iter().map(|(r, c)| Layer { weights: Matrix::zeros(r, c), bias: vec![0.0; r] }).collect()
    };
    let mut velocity = zeros();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut obj_sum, mut batches) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = zeros();
            let mut loss = 0.0;
            for &i in batch {
                loss += backprop(&net, data.row(i), data.labels[i] as usize, &mut grads)?;
            }
            let scale = 1.0 / batch.len() as f64;
            obj_sum += loss * scale;
            batches += 1;
            for ((layer, g), v) in net.layers_mut().iter_mut().zip(&grads).zip(&mut velocity) {
                let params = layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut());
                let gs = g.weights.as_slice().iter().chain(&g.bias);
                let vs = v.weights.as_mut_slice().iter_mut().chain(v.bias.iter_mut());
                for ((p, gv), vv) in params.zip(gs).zip(vs) {
                    *vv = cfg.momentum * *vv + gv * scale;
                    *p -= cfg.learning_rate * *vv;
                }
            }
            if cfg.clamp_nonnegative {
                clamp_hidden(&mut net);
            }
            after_step(&net);
        }
        let finite = net.layers().iter().all(|l| l.weights.as_slice().iter().chain(&l.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::DegenerateData(format!("training diverged in epoch {epoch}")));
        }
        let accuracy = network_accuracy(&net, data)?;
        log.0.push(EpochLog { epoch, objective: obj_sum / batches as f64, accuracy });
    }
    Ok((net, log))
}

fn net_shape(arch: &[usize]) -> Vec<(usize, usize)> {
    arch.windows(2).map(|p| (p[1], p[0])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::Domain;
    use crate::data_io::gen_blobs;

    fn clusters_1d() -> Dataset {
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let off = (i % 10) as f64 * 0.1;
            feats.push(vec![-1.0 - off]);
            labels.push(-1);
            feats.push(vec![1.0 + off]);
            labels.push(1);
        }
        Dataset::new(Matrix::from_rows(&feats).unwrap(), labels, Domain::new(-3.0, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn separable_clusters() {
        let data = clusters_1d();
        let cfg = TrainConfig { batch_size: 8, ..TrainConfig::default() };
        let (m, log) = train_linear_svm(&data, &cfg).unwrap();
        assert!(m.w[0] > 0.0);
        assert_eq!(linear_accuracy(&m, &data).unwrap(), 1.0);
        assert!(log.last().unwrap().objective < log.first().unwrap().objective);
        assert_eq!(log.0.len(), 15);
    }

    #[test]
    fn l1_shrinks_weights() {
        let data = clusters_1d();
        let base = TrainConfig { batch_size: 8, l1_lambda: 0.0, ..TrainConfig::default() };
        let (free, _) = train_linear_svm(&data, &base).unwrap();
        let (reg, _) = train_linear_svm(&data, &TrainConfig { l1_lambda: 1e3, learning_rate: 1e-5, ..base.clone() }).unwrap();
        let (free2, _) = train_linear_svm(&data, &TrainConfig { learning_rate: 1e-5, ..base }).unwrap();
        assert!(reg.w[0].abs() < free2.w[0].abs());
        assert!(free.w[0] > 0.0);
    }

    #[test]
    fn svm_rejects_single_class() {
        let data = Dataset::new(
            Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(),
            vec![1, 1],
            Domain::new(0.0, 3.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(train_linear_svm(&data, &TrainConfig::default()), Err(Error::DegenerateData(_))));
        assert!(matches!(train_mlp(&data, &[1, 2], &TrainConfig::default()), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn svm_is_deterministic() {
        let data = clusters_1d();
        let cfg = TrainConfig { batch_size: 7, seed: 3, ..TrainConfig::default() };
        assert_eq!(train_linear_svm(&data, &cfg).unwrap(), train_linear_svm(&data, &cfg).unwrap());
    }

    #[test]
    fn blobs_mlp_clamped_every_step() {
        let data = gen_blobs(100, &[vec![1.0, 1.0], vec![4.0, 4.0]], 0.5, 11).unwrap();
        let cfg = TrainConfig { clamp_nonnegative: true, epochs: 10, batch_size: 16, ..TrainConfig::default() };
        let mut steps = 0;
        let (net, log) = train_mlp_observed(&data, &[2, 8, 8, 2], &cfg, |n| {
            assert!(hidden_is_nonnegative(n));
            steps += 1;
        })
        .unwrap();
        assert_eq!(steps, 10 * 13);
        assert!(network_accuracy(&net, &data).unwrap() >= 0.99);
        assert!(log.last().unwrap().objective < log.first().unwrap().objective);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = init_network(&[3, 4, 3], false, &mut rng).unwrap();
        let x = [0.3, -0.2, 0.9];
        let mut grads: Vec<Layer> =
            net_shape(&[3, 4, 3]).into_iter().map(|(r, c)| Layer { weights: Matrix::zeros(r, c), bias: vec![0.0; r] }).collect();
        backprop(&net, &x, 2, &mut grads).unwrap();
        let loss = |n: &ReluNetwork| {
            let s = n.forward(&x).unwrap().scores;
            let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
            -(s[2] - m) + z.ln()
        };
        let h = 1e-6;
        for (li, idx) in [(0usize, 5usize), (1, 7), (1, 0)] {
            let mut p = net.clone();
            p.layers_mut()[li].weights.as_mut_slice()[idx] += h;
            let mut q = net.clone();
            q.layers_mut()[li].weights.as_mut_slice()[idx] -= h;
            let fd = (loss(&p) - loss(&q)) / (2.0 * h);
            assert!((fd - grads[li].weights.as_slice()[idx]).abs() < 1e-6);
        }
    }
}
