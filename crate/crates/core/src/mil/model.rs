//! Patch encoder, mean pooling, and linear risk head — with analytic
//! gradients for the batch Cox loss.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeds::{child_rng, stream};
use crate::survival::cox::breslow_loglik_score_grad;

/// One affine layer, weights row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Layer widths derived from the architecture knobs: width of layer `i` is
/// `min(round(base * growth^i), max_depth)`.
pub fn encoder_widths(
    n_layers: usize,
    base_depth: usize,
    depth_growth: f64,
    max_depth: usize,
) -> Vec<usize> {
    (0..n_layers)
        .map(|i| {
            let w = libm::round(base_depth as f64 * libm::pow(depth_growth, i as f64)) as usize;
            w.clamp(1, max_depth.max(1))
        })
        .collect()
}

/// Structural description of a model; fixes the flat parameter layout.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelShape {
    pub feature_dim: usize,
    pub widths: Vec<usize>,
}

impl ModelShape {
    pub fn new(feature_dim: usize, widths: Vec<usize>) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "feature_dim must be >= 1"
            )));
        }
        if widths.is_empty() || widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "encoder widths must be nonempty and positive"
            )));
        }
        Ok(Self {
            feature_dim,
            widths,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        *self.widths.last().expect("nonempty widths")
    }

    /// Total flat parameter count: each layer's weights then bias, followed
    /// by the head weights and head bias.
    pub fn param_count(&self) -> usize {
        let mut count = 0;
        let mut prev = self.feature_dim;
        for &w in &self.widths {
            count += w * prev + w;
            prev = w;
        }
        count + prev + 1
    }
}

/// Encoder plus linear Cox head. The rectifier sits between encoder layers;
/// the final layer's output (the patch embedding) is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MilModel {
    pub encoder: Vec<DenseLayer>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

/// Per-bag forward result. With the linear head, the case score is exactly
/// the mean of the patch scores.
#[derive(Debug, Clone, PartialEq)]
pub struct BagForward {
    pub patch_scores: Vec<f64>,
    pub case_score: f64,
}

impl MilModel {
    /// Fan-in-scaled uniform initialization, biases zero.
    pub fn init(shape: &ModelShape, seed: u64) -> MilModel {
        let mut rng = child_rng(seed, stream::TRAIN_INIT, 0);
        let mut encoder = Vec::with_capacity(shape.widths.len());
        let mut prev = shape.feature_dim;
        for &w in &shape.widths {
            let limit = libm::sqrt(3.0 / prev as f64);
            let weights = (0..w * prev)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
                .collect();
            encoder.push(DenseLayer {
                in_dim: prev,
                out_dim: w,
                weights,
                bias: vec![0.0; w],
            });
            prev = w;
        }
        let limit = libm::sqrt(3.0 / prev as f64);
        let head_weights = (0..prev)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit)
            .collect();
        MilModel {
            encoder,
            head_weights,
            head_bias: 0.0,
        }
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            feature_dim: self.encoder.first().map(|l| l.in_dim).unwrap_or(0),
            widths: self.encoder.iter().map(|l| l.out_dim).collect(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.first().map(|l| l.in_dim).unwrap_or(0)
    }

    /// Flatten parameters in the layout fixed by [`ModelShape`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.encoder {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(&self.head_weights);
        out.push(self.head_bias);
        out
    }

    /// Rebuild a model from flat parameters.
    pub fn from_flat(shape: &ModelShape, params: &[f64]) -> Result<MilModel> {
        if params.len() != shape.param_count() {
            return Err(Error::LengthMismatch {
                expected: shape.param_count(),
                got: params.len(),
            });
        }
        let mut encoder = Vec::with_capacity(shape.widths.len());
        let mut prev = shape.feature_dim;
        let mut pos = 0;
        for &w in &shape.widths {
            let weights = params[pos..pos + w * prev].to_vec();
            pos += w * prev;
            let bias = params[pos..pos + w].to_vec();
            pos += w;
            encoder.push(DenseLayer {
                in_dim: prev,
                out_dim: w,
                weights,
                bias,
            });
            prev = w;
        }
        let head_weights = params[pos..pos + prev].to_vec();
        pos += prev;
        let head_bias = params[pos];
        Ok(MilModel {
            encoder,
            head_weights,
            head_bias,
        })
    }

    /// Embedding of a single patch (output of the last encoder layer).
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_dim() {
            return Err(Error::LengthMismatch {
                expected: self.feature_dim(),
                got: x.len(),
            });
        }
        let n_layers = self.encoder.len();
        let mut act = x.to_vec();
        for (l, layer) in self.encoder.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim];
            for (o, n) in next.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.bias[o];
                for (w, a) in row.iter().zip(&act) {
                    z += w * a;
                }
                *n = if l + 1 < n_layers { relu(z) } else { z };
            }
            act = next;
        }
        Ok(act)
    }

    /// Risk score of one patch.
    pub fn patch_score(&self, x: &[f64]) -> Result<f64> {
        let emb = self.embed(x)?;
        let mut y = self.head_bias;
        for (w, e) in self.head_weights.iter().zip(&emb) {
            y += w * e;
        }
        Ok(y)
    }

    /// Score a bag: per-patch scores and their mean as the case score.
    pub fn forward_bag(&self, patches: &[&[f64]]) -> Result<BagForward> {
        if patches.is_empty() {
            return Err(Error::EmptyInput("bag"));
        }
        let mut patch_scores = Vec::with_capacity(patches.len());
        for p in patches {
            patch_scores.push(self.patch_score(p)?);
        }
        let case_score = patch_scores.iter().sum::<f64>() / patch_scores.len() as f64;
        Ok(BagForward {
            patch_scores,
            case_score,
        })
    }

    /// Batch loss (negative Breslow partial log-likelihood plus the L2 term
    /// on weights) and its exact gradient over the flat parameters.
    ///
    /// `bags[i]` holds the sampled patches of case `i`, aligned with
    /// `times[i]` / `events[i]`.
    pub fn batch_loss_and_grad(
        &self,
        bags: &[Vec<&[f64]>],
        times: &[u32],
        events: &[bool],
        l2_weight: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let n = bags.len();
        if n == 0 {
            return Err(Error::EmptyInput("batch"));
        }
        if times.len() != n || events.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: times.len().min(events.len()),
            });
        }

        let mut scores = Vec::with_capacity(n);
        for bag in bags {
            scores.push(self.forward_bag(bag)?.case_score);
        }
        let (ll, dll_ds) = breslow_loglik_score_grad(times, events, &scores).map_err(|e| {
            if e == Error::NoEvents {
                Error::UninformativeBatch
            } else {
                e
            }
        })?;
        let mut loss = -ll;

        let shape = self.shape();
        let mut grad = vec![0.0; shape.param_count()];
        let mut scratch = Scratch::new(&shape);
        for (i, bag) in bags.iter().enumerate() {
            let upstream = -dll_ds[i] / bag.len() as f64;
            for patch in bag {
                self.backprop_patch(patch, upstream, &mut grad, &mut scratch);
            }
        }

        if l2_weight != 0.0 {
            let mut pos = 0;
            for layer in &self.encoder {
                for w in &layer.weights {
                    loss += l2_weight * w * w;
                    grad[pos] += 2.0 * l2_weight * w;
                    pos += 1;
                }
                pos += layer.out_dim; // biases are not penalized
            }
            for w in &self.head_weights {
                loss += l2_weight * w * w;
                grad[pos] += 2.0 * l2_weight * w;
                pos += 1;
            }
        }
        Ok((loss, grad))
    }

    /// Forward one patch storing pre-activations, then accumulate gradients
    /// for an upstream d(loss)/d(patch_score).
    fn backprop_patch(&self, x: &[f64], upstream: f64, grad: &mut [f64], s: &mut Scratch) {
        let n_layers = self.encoder.len();
        s.act[0].clear();
        s.act[0].extend_from_slice(x);
        for (l, layer) in self.encoder.iter().enumerate() {
            let (before, after) = s.act.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            out.clear();
            let z_buf = &mut s.z[l];
            z_buf.clear();
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.bias[o];
                for (w, a) in row.iter().zip(input.iter()) {
                    z += w * a;
                }
                z_buf.push(z);
                out.push(if l + 1 < n_layers { relu(z) } else { z });
            }
        }

        // head
        let emb = &s.act[n_layers];
        let head_offset = grad.len() - self.head_weights.len() - 1;
        for (j, e) in emb.iter().enumerate() {
            grad[head_offset + j] += upstream * e;
        }
        grad[head_offset + self.head_weights.len()] += upstream;

        // d(loss)/d(embedding)
        s.da.clear();
        s.da
            .extend(self.head_weights.iter().map(|w| upstream * w));

        // walk the layers backwards; `offset` tracks each layer's slot in
        // the flat layout
        let mut offsets = Vec::with_capacity(n_layers);
        let mut pos = 0;
        for layer in &self.encoder {
            offsets.push(pos);
            pos += layer.out_dim * layer.in_dim + layer.out_dim;
        }
        for l in (0..n_layers).rev() {
            let layer = &self.encoder[l];
            let input = &s.act[l];
            s.dz.clear();
            if l + 1 < n_layers {
                for (o, da) in s.da.iter().enumerate() {
                    s.dz.push(if s.z[l][o] > 0.0 { *da } else { 0.0 });
                }
            } else {
                s.dz.extend_from_slice(&s.da);
            }
            let base = offsets[l];
            for o in 0..layer.out_dim {
                let dz = s.dz[o];
                if dz != 0.0 {
                    let wrow = base + o * layer.in_dim;
                    for (j, a) in input.iter().enumerate() {
                        grad[wrow + j] += dz * a;
                    }
                }
                grad[base + layer.out_dim * layer.in_dim + o] += dz;
            }
            if l > 0 {
                // da for the previous layer: Wᵀ dz
                s.da.clear();
                s.da.resize(layer.in_dim, 0.0);
                for o in 0..layer.out_dim {
                    let dz = s.dz[o];
                    if dz != 0.0 {
                        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (j, w) in row.iter().enumerate() {
                            s.da[j] += dz * w;
                        }
                    }
                }
            }
        }
    }
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Reusable per-patch buffers for the forward/backward pass.
struct Scratch {
    /// act[0] is the input; act[l+1] the output of layer l.
    act: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
    da: Vec<f64>,
    dz: Vec<f64>,
}

impl Scratch {
    fn new(shape: &ModelShape) -> Self {
        let mut act = Vec::with_capacity(shape.widths.len() + 1);
        act.push(Vec::with_capacity(shape.feature_dim));
        for &w in &shape.widths {
            act.push(Vec::with_capacity(w));
        }
        Scratch {
            act,
            z: shape.widths.iter().map(|&w| Vec::with_capacity(w)).collect(),
            da: Vec::new(),
            dz: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn identity_like_model() -> MilModel {
        // single layer acting as identity on 2 dims, head w = [1, 2], b = 0.5
        MilModel {
            encoder: vec![DenseLayer {
                in_dim: 2,
                out_dim: 2,
                weights: vec![1.0, 0.0, 0.0, 1.0],
                bias: vec![0.0, 0.0],
            }],
            head_weights: vec![1.0, 2.0],
            head_bias: 0.5,
        }
    }

    #[test]
    fn single_patch_linear_score() {
        let m = identity_like_model();
        let x = [3.0, -1.0];
        let f = m.forward_bag(&[&x]).unwrap();
        assert_eq!(f.case_score, 3.0 - 2.0 + 0.5);
        assert_eq!(f.patch_scores, vec![1.5]);
    }

    #[test]
    fn case_score_is_mean_of_patch_scores() {
        let m = identity_like_model();
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let c = [2.0, 2.0];
        let f = m.forward_bag(&[&a, &b, &c]).unwrap();
        let mean = f.patch_scores.iter().sum::<f64>() / 3.0;
        assert_eq!(f.case_score, mean);
    }

    #[test]
    fn identical_patches_equal_single_patch_score() {
        let m = identity_like_model();
        let x = [0.7, 0.9];
        let single = m.forward_bag(&[&x]).unwrap().case_score;
        let repeated = m.forward_bag(&[&x, &x, &x, &x]).unwrap().case_score;
        assert!((single - repeated).abs() < 1e-15);
    }

    #[test]
    fn zero_head_gives_bias() {
        let mut m = identity_like_model();
        m.head_weights = vec![0.0, 0.0];
        m.head_bias = -1.25;
        let x = [5.0, 5.0];
        let y = [0.0, -9.0];
        assert_eq!(m.forward_bag(&[&x, &y]).unwrap().case_score, -1.25);
    }

    #[test]
    fn flat_round_trip() {
        let shape = ModelShape::new(3, vec![4, 2]).unwrap();
        let m = MilModel::init(&shape, 99);
        let flat = m.to_flat();
        assert_eq!(flat.len(), shape.param_count());
        let m2 = MilModel::from_flat(&shape, &flat).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn widths_follow_growth_and_cap() {
        assert_eq!(encoder_widths(3, 8, 2.0, 64), vec![8, 16, 32]);
        assert_eq!(encoder_widths(3, 32, 2.0, 64), vec![32, 64, 64]);
        assert_eq!(encoder_widths(2, 32, 1.5, 256), vec![32, 48]);
        assert_eq!(encoder_widths(1, 16, 1.25, 256), vec![16]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        let shape = ModelShape::new(4, vec![5, 3]).unwrap();
        let model = MilModel::init(&shape, 7);
        let mut rng = crate::seeds::root_rng(13);
        let n_cases = 5;
        let mut storage: Vec<Vec<f64>> = Vec::new();
        for _ in 0..n_cases {
            let n_patches = 1 + rng.random_range(0..4);
            let patch: Vec<f64> = (0..n_patches * 4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            storage.push(patch);
        }
        let bags: Vec<Vec<&[f64]>> = storage
            .iter()
            .map(|s| s.chunks(4).collect::<Vec<_>>())
            .collect();
        let times = [3u32, 1, 4, 1, 5];
        let events = [true, false, true, true, false];
        let l2 = 1e-3;

        let (_, grad) = model
            .batch_loss_and_grad(&bags, &times, &events, l2)
            .unwrap();
        let flat = model.to_flat();
        let eps = 1e-6;
        let mut max_rel = 0.0f64;
        for k in 0..flat.len() {
            let mut plus = flat.clone();
            plus[k] += eps;
            let mut minus = flat.clone();
            minus[k] -= eps;
            let lp = MilModel::from_flat(&shape, &plus)
                .unwrap()
                .batch_loss_and_grad(&bags, &times, &events, l2)
                .unwrap()
                .0;
            let lm = MilModel::from_flat(&shape, &minus)
                .unwrap()
                .batch_loss_and_grad(&bags, &times, &events, l2)
                .unwrap()
                .0;
            let fd = (lp - lm) / (2.0 * eps);
            let abs_err = (grad[k] - fd).abs();
            // coordinates with exactly-zero gradient (shift-invariant biases)
            // only see finite-difference cancellation noise; compare those
            // absolutely
            if abs_err >= 1e-9 {
                max_rel = max_rel.max(abs_err / grad[k].abs().max(fd.abs()));
            }
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn head_bias_gradient_is_zero() {
        // constant score shifts leave the loss unchanged, so d/d(bias) = 0
        let shape = ModelShape::new(3, vec![4]).unwrap();
        let model = MilModel::init(&shape, 21);
        let p1 = [0.3, -0.6, 0.2];
        let p2 = [1.0, 0.4, -0.9];
        let p3 = [-0.2, 0.1, 0.8];
        let bags: Vec<Vec<&[f64]>> = vec![vec![&p1, &p2], vec![&p3], vec![&p1, &p3]];
        let times = [2u32, 5, 9];
        let events = [true, true, false];
        let (_, grad) = model
            .batch_loss_and_grad(&bags, &times, &events, 0.0)
            .unwrap();
        let head_bias_grad = grad[grad.len() - 1];
        assert!(
            head_bias_grad.abs() < 1e-12,
            "head bias gradient {head_bias_grad}"
        );
    }

    #[test]
    fn zero_event_batch_is_uninformative() {
        let shape = ModelShape::new(2, vec![2]).unwrap();
        let model = MilModel::init(&shape, 2);
        let p = [0.1, 0.2];
        let bags: Vec<Vec<&[f64]>> = vec![vec![&p], vec![&p]];
        let err = model
            .batch_loss_and_grad(&bags, &[1, 2], &[false, false], 0.0)
            .unwrap_err();
        assert_eq!(err, Error::UninformativeBatch);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let m = identity_like_model();
        let bad = [1.0, 2.0, 3.0];
        assert!(m.forward_bag(&[&bad]).is_err());
        assert!(m.forward_bag(&[]).is_err());
    }
}

