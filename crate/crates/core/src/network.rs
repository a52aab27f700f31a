//! The detector network: a chain of convolutional layers followed by a
//! single fully connected layer of two log-softmax outputs (cover, stego).
//!
//! Each convolutional layer computes, for each of its kernels,
//! `pool(f(sum_m W_k * F_m + b_k))` where the kernel `W_k` is shared by all
//! incoming maps `F_m`. The final maps are flattened map-major, row-major
//! within a map, and fed to the output layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SplitMix64, Stream};
use crate::tensor::{
    self, conv_output_dims, correlate_into, ActivationKind, ConvGeometry, ImageGrid, Kernel, PoolSpec,
};

pub const OUTPUT_CLASSES: usize = 2;
pub const COVER: usize = 0;
pub const STEGO: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub kernel_count: usize,
    pub kernel_size: usize,
    #[serde(default)]
    pub geom: ConvGeometry,
    pub act: ActivationKind,
    #[serde(default)]
    pub pool: PoolSpec,
}

impl ConvLayerSpec {
    pub fn new(kernel_count: usize, kernel_size: usize, act: ActivationKind) -> Self {
        ConvLayerSpec {
            kernel_count,
            kernel_size,
            geom: ConvGeometry::VALID,
            act,
            pool: PoolSpec::NONE,
        }
    }

    pub fn with_geom(mut self, geom: ConvGeometry) -> Self {
        self.geom = geom;
        self
    }

    pub fn with_pool(mut self, pool: PoolSpec) -> Self {
        self.pool = pool;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_size: usize,
    pub conv_layers: Vec<ConvLayerSpec>,
}

/// Dimensions flowing through one convolutional layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub in_maps: usize,
    pub in_dims: (usize, usize),
    pub conv_dims: (usize, usize),
    pub out_dims: (usize, usize),
}

impl NetworkSpec {
    /// 1 kernel of 3x3, then `kernel_count` kernels as large as the
    /// remaining map allows while still leaving 2x2 outputs; tanh, no pooling.
    pub fn two_layer(input_size: usize, kernel_count: usize) -> Self {
        let second = input_size.saturating_sub(3).max(1);
        NetworkSpec {
            input_size,
            conv_layers: vec![
                ConvLayerSpec::new(1, 3, ActivationKind::Tanh),
                ConvLayerSpec::new(kernel_count, second, ActivationKind::Tanh),
            ],
        }
    }

    /// The full-size detector: 512x512 input, 1x3x3 then 64x509x509.
    pub fn paper() -> Self {
        Self::two_layer(512, 64)
    }

    /// Desk-scale variant on 32x32 inputs: 1x3x3 then 16x29x29.
    pub fn desk() -> Self {
        Self::two_layer(32, 16)
    }

    pub fn layer_shapes(&self) -> Result<Vec<LayerShape>> {
        if self.input_size == 0 {
            return Err(Error::InvalidNetwork {
                layer: 0,
                reason: "input size must be positive".into(),
            });
        }
        let mut dims = (self.input_size, self.input_size);
        let mut maps = 1;
        let mut shapes = Vec::with_capacity(self.conv_layers.len());
        for (l, layer) in self.conv_layers.iter().enumerate() {
            let fail = |reason: String| Error::InvalidNetwork { layer: l, reason };
            if layer.kernel_count == 0 || layer.kernel_size == 0 {
                return Err(fail("kernel count and size must be positive".into()));
            }
            let conv_dims =
                conv_output_dims(dims.0, dims.1, layer.kernel_size, layer.geom).map_err(|e| fail(e.to_string()))?;
            let out_dims = layer
                .pool
                .output_dims(conv_dims.0, conv_dims.1)
                .map_err(|e| fail(e.to_string()))?;
            shapes.push(LayerShape {
                in_maps: maps,
                in_dims: dims,
                conv_dims,
                out_dims,
            });
            dims = out_dims;
            maps = layer.kernel_count;
        }
        Ok(shapes)
    }

    /// Number of values entering the output layer.
    pub fn feature_count(&self) -> Result<usize> {
        let shapes = self.layer_shapes()?;
        Ok(match (shapes.last(), self.conv_layers.last()) {
            (Some(s), Some(l)) => l.kernel_count * s.out_dims.0 * s.out_dims.1,
            _ => self.input_size * self.input_size,
        })
    }
}

/// Trainable parameter counts, computed without allocating the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterCount {
    pub conv: Vec<usize>,
    pub output: usize,
}

impl ParameterCount {
    pub fn total(&self) -> usize {
        self.conv.iter().sum::<usize>() + self.output
    }
}

pub fn parameter_count(spec: &NetworkSpec) -> Result<ParameterCount> {
    let features = spec.feature_count()?;
    Ok(ParameterCount {
        conv: spec
            .conv_layers
            .iter()
            .map(|l| l.kernel_count * (l.kernel_size * l.kernel_size + 1))
            .collect(),
        output: OUTPUT_CLASSES * (features + 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub kernel_size: usize,
    /// `kernel_count` kernels of `kernel_size^2` weights, back to back.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvParams {
    pub fn kernel_count(&self) -> usize {
        self.biases.len()
    }

    pub fn kernel_weights(&self, k: usize) -> &[f64] {
        let n = self.kernel_size * self.kernel_size;
        &self.weights[k * n..(k + 1) * n]
    }

    pub fn kernel(&self, k: usize) -> Kernel {
        Kernel::new(self.kernel_size, self.kernel_weights(k).to_vec(), self.biases[k])
            .expect("stored kernel is well formed")
    }
}

/// All trainable values of a network. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore {
    pub conv: Vec<ConvParams>,
    /// Row `c` (class) holds the weights for every feature, `OUTPUT_CLASSES x features`.
    pub output_weights: Vec<f64>,
    pub output_biases: [f64; OUTPUT_CLASSES],
}

/// A group of parameters that plays one role in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamClass {
    ConvWeights(usize),
    ConvBiases(usize),
    OutputWeights,
    OutputBiases,
}

impl std::fmt::Display for ParamClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamClass::ConvWeights(l) => write!(f, "layer{}-weights", l + 1),
            ParamClass::ConvBiases(l) => write!(f, "layer{}-biases", l + 1),
            ParamClass::OutputWeights => f.write_str("output-weights"),
            ParamClass::OutputBiases => f.write_str("output-biases"),
        }
    }
}

impl std::str::FromStr for ParamClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidValue(format!("unknown parameter class {s:?}"));
        match s {
            "output-weights" => Ok(ParamClass::OutputWeights),
            "output-biases" => Ok(ParamClass::OutputBiases),
            _ => {
                let rest = s.strip_prefix("layer").ok_or_else(bad)?;
                let (num, kind) = rest.split_once('-').ok_or_else(bad)?;
                let l: usize = num.parse().map_err(|_| bad())?;
                if l == 0 {
                    return Err(bad());
                }
                match kind {
                    "weights" => Ok(ParamClass::ConvWeights(l - 1)),
                    "biases" => Ok(ParamClass::ConvBiases(l - 1)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

impl ParameterStore {
    /// All-zero store shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let features = spec.feature_count()?;
        Ok(ParameterStore {
            conv: spec
                .conv_layers
                .iter()
                .map(|l| ConvParams {
                    kernel_size: l.kernel_size,
                    weights: vec![0.0; l.kernel_count * l.kernel_size * l.kernel_size],
                    biases: vec![0.0; l.kernel_count],
                })
                .collect(),
            output_weights: vec![0.0; OUTPUT_CLASSES * features],
            output_biases: [0.0; OUTPUT_CLASSES],
        })
    }

    pub fn zeros_like(&self) -> Self {
        ParameterStore {
            conv: self
                .conv
                .iter()
                .map(|c| ConvParams {
                    kernel_size: c.kernel_size,
                    weights: vec![0.0; c.weights.len()],
                    biases: vec![0.0; c.biases.len()],
                })
                .collect(),
            output_weights: vec![0.0; self.output_weights.len()],
            output_biases: [0.0; OUTPUT_CLASSES],
        }
    }

    pub fn feature_count(&self) -> usize {
        self.output_weights.len() / OUTPUT_CLASSES
    }

    pub fn classes(&self) -> Vec<ParamClass> {
        let mut v = Vec::new();
        for l in 0..self.conv.len() {
            v.push(ParamClass::ConvWeights(l));
            v.push(ParamClass::ConvBiases(l));
        }
        v.push(ParamClass::OutputWeights);
        v.push(ParamClass::OutputBiases);
        v
    }

    pub fn group(&self, class: ParamClass) -> &[f64] {
        match class {
            ParamClass::ConvWeights(l) => &self.conv[l].weights,
            ParamClass::ConvBiases(l) => &self.conv[l].biases,
            ParamClass::OutputWeights => &self.output_weights,
            ParamClass::OutputBiases => &self.output_biases,
        }
    }

    pub fn group_mut(&mut self, class: ParamClass) -> &mut [f64] {
        match class {
            ParamClass::ConvWeights(l) => &mut self.conv[l].weights,
            ParamClass::ConvBiases(l) => &mut self.conv[l].biases,
            ParamClass::OutputWeights => &mut self.output_weights,
            ParamClass::OutputBiases => &mut self.output_biases,
        }
    }

    /// Every parameter group in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.classes().into_iter().map(|c| self.group(c)).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for c in &mut self.conv {
            v.push(&mut c.weights);
            v.push(&mut c.biases);
        }
        v.push(&mut self.output_weights);
        v.push(&mut self.output_biases);
        v
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &ParameterStore) -> bool {
        let a = self.slices();
        let b = other.slices();
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
            && self
                .conv
                .iter()
                .zip(&other.conv)
                .all(|(x, y)| x.kernel_size == y.kernel_size)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ParameterStore) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for dst in self.slices_mut() {
            for d in dst {
                *d *= alpha;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Allocate and initialize parameters for `spec`.
///
/// Weights are uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` where `fan_in`
/// is incoming maps times kernel area (features, for the output layer);
/// biases start at zero. The draw is a pure function of `seed`.
pub fn build_network(spec: &NetworkSpec, seed: u64) -> Result<ParameterStore> {
    let shapes = spec.layer_shapes()?;
    let mut params = ParameterStore::zeros(spec)?;
    for (l, (cp, shape)) in params.conv.iter_mut().zip(&shapes).enumerate() {
        let fan_in = shape.in_maps * cp.kernel_size * cp.kernel_size;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut rng = SplitMix64::derive(seed, Stream::Init, l as u64);
        for w in &mut cp.weights {
            *w = rng.uniform(-bound, bound);
        }
    }
    let bound = 1.0 / (params.feature_count() as f64).sqrt();
    let mut rng = SplitMix64::derive(seed, Stream::Init, shapes.len() as u64);
    for w in &mut params.output_weights {
        *w = rng.uniform(-bound, bound);
    }
    Ok(params)
}

/// Log-probabilities of (cover, stego).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassLogProbs(pub [f64; OUTPUT_CLASSES]);

impl ClassLogProbs {
    pub fn from_logits(logits: [f64; OUTPUT_CLASSES]) -> Self {
        let m = logits[0].max(logits[1]);
        let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
        ClassLogProbs([logits[0] - lse, logits[1] - lse])
    }

    pub fn probs(&self) -> [f64; OUTPUT_CLASSES] {
        [self.0[0].exp(), self.0[1].exp()]
    }

    /// Predicted class; ties go to cover.
    pub fn predict(&self) -> usize {
        if self.0[STEGO] > self.0[COVER] {
            STEGO
        } else {
            COVER
        }
    }
}

/// Negative log-likelihood of `label`.
pub fn loss(probs: &ClassLogProbs, label: usize) -> f64 {
    -probs.0[label]
}

fn check_input(spec: &NetworkSpec, params: &ParameterStore, image: &ImageGrid) -> Result<()> {
    if image.dims() != (spec.input_size, spec.input_size) {
        return Err(Error::Shape(format!(
            "network expects {n}x{n} images, got {}x{}",
            image.height(),
            image.width(),
            n = spec.input_size
        )));
    }
    if params.conv.len() != spec.conv_layers.len()
        || params
            .conv
            .iter()
            .zip(&spec.conv_layers)
            .any(|(p, l)| p.kernel_size != l.kernel_size || p.kernel_count() != l.kernel_count)
        || params.feature_count() != spec.feature_count()?
    {
        return Err(Error::Shape("parameter store does not match network spec".into()));
    }
    Ok(())
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct LayerCache {
    /// Pre-activation maps `C + b`.
    pre: Vec<ImageGrid>,
    /// Activated maps before pooling.
    act: Vec<ImageGrid>,
}

struct ForwardCache {
    /// `inputs[l]` are the maps entering layer `l`; the last entry holds the
    /// maps entering the output layer.
    inputs: Vec<Vec<ImageGrid>>,
    layers: Vec<LayerCache>,
    features: Vec<f64>,
    log_probs: ClassLogProbs,
}

fn forward_cached(params: &ParameterStore, spec: &NetworkSpec, image: &ImageGrid) -> Result<ForwardCache> {
    check_input(spec, params, image)?;
    let shapes = spec.layer_shapes()?;
    let mut inputs = vec![vec![image.clone()]];
    let mut layers = Vec::with_capacity(spec.conv_layers.len());
    for ((layer, cp), shape) in spec.conv_layers.iter().zip(&params.conv).zip(&shapes) {
        let (oh, ow) = shape.conv_dims;
        let maps_in = inputs.last().expect("non-empty");
        let mut pre = Vec::with_capacity(layer.kernel_count);
        let mut act = Vec::with_capacity(layer.kernel_count);
        let mut pooled = Vec::with_capacity(layer.kernel_count);
        for k in 0..layer.kernel_count {
            let mut z = ImageGrid::zeros(oh, ow);
            for m in maps_in {
                correlate_into(
                    m,
                    cp.kernel_weights(k),
                    cp.kernel_size,
                    layer.geom,
                    z.values_mut(),
                    oh,
                    ow,
                );
            }
            let b = cp.biases[k];
            for v in z.values_mut() {
                *v += b;
            }
            let a = z.map(|v| layer.act.apply(v));
            pooled.push(tensor::pool(&a, layer.pool)?);
            pre.push(z);
            act.push(a);
        }
        layers.push(LayerCache { pre, act });
        inputs.push(pooled);
    }
    let features: Vec<f64> = inputs
        .last()
        .expect("non-empty")
        .iter()
        .flat_map(|m| m.values().iter().copied())
        .collect();
    let nf = features.len();
    let mut logits = params.output_biases;
    for (c, logit) in logits.iter_mut().enumerate() {
        *logit += params.output_weights[c * nf..(c + 1) * nf]
            .iter()
            .zip(&features)
            .map(|(w, x)| w * x)
            .sum::<f64>();
    }
    Ok(ForwardCache {
        inputs,
        layers,
        features,
        log_probs: ClassLogProbs::from_logits(logits),
    })
}

pub fn forward(params: &ParameterStore, spec: &NetworkSpec, image: &ImageGrid) -> Result<ClassLogProbs> {
    Ok(forward_cached(params, spec, image)?.log_probs)
}

/// The flattened feature vector fed to the output layer.
pub fn features(params: &ParameterStore, spec: &NetworkSpec, image: &ImageGrid) -> Result<Vec<f64>> {
    Ok(forward_cached(params, spec, image)?.features)
}

/// Result of one forward/backward pass.
#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub grads: ParameterStore,
    pub loss: f64,
    pub log_probs: ClassLogProbs,
}

#[allow(clippy::needless_range_loop)] // parallel index arithmetic over several arrays
pub fn forward_backward(
    params: &ParameterStore,
    spec: &NetworkSpec,
    image: &ImageGrid,
    label: usize,
) -> Result<SampleGradient> {
    if label >= OUTPUT_CLASSES {
        return Err(Error::InvalidValue(format!("label must be 0 or 1, got {label}")));
    }
    let cache = forward_cached(params, spec, image)?;
    let shapes = spec.layer_shapes()?;
    let mut grads = params.zeros_like();

    // d(-log softmax[label]) / d logits = softmax - onehot
    let p = cache.log_probs.probs();
    let dlogits = [p[0] - (label == 0) as u8 as f64, p[1] - (label == 1) as u8 as f64];
    let nf = cache.features.len();
    let mut dfeatures = vec![0.0; nf];
    for c in 0..OUTPUT_CLASSES {
        grads.output_biases[c] = dlogits[c];
        let wrow = &params.output_weights[c * nf..(c + 1) * nf];
        let grow = &mut grads.output_weights[c * nf..(c + 1) * nf];
        for i in 0..nf {
            grow[i] = dlogits[c] * cache.features[i];
            dfeatures[i] += dlogits[c] * wrow[i];
        }
    }

    // Gradient w.r.t. the maps leaving the current layer.
    let mut dmaps: Vec<ImageGrid> = {
        let last = cache.inputs.last().expect("non-empty");
        let mut off = 0;
        last.iter()
            .map(|m| {
                let n = m.len();
                let g = ImageGrid::new(m.height(), m.width(), dfeatures[off..off + n].to_vec())
                    .expect("feature slice matches map");
                off += n;
                g
            })
            .collect()
    };

    for l in (0..spec.conv_layers.len()).rev() {
        let layer = &spec.conv_layers[l];
        let shape = shapes[l];
        let cp = &params.conv[l];
        let lc = &cache.layers[l];
        let maps_in = &cache.inputs[l];
        let (oh, ow) = shape.conv_dims;
        let mut dinputs: Vec<ImageGrid> = if l > 0 {
            maps_in
                .iter()
                .map(|m| ImageGrid::zeros(m.height(), m.width()))
                .collect()
        } else {
            Vec::new()
        };
        let gl = &mut grads.conv[l];
        let kk = cp.kernel_size * cp.kernel_size;
        for k in 0..layer.kernel_count {
            let da = tensor::pool_backward(&lc.act[k], layer.pool, &dmaps[k]);
            let dz: Vec<f64> = da
                .values()
                .iter()
                .zip(lc.pre[k].values())
                .map(|(g, z)| g * layer.act.derivative(*z))
                .collect();
            gl.biases[k] = dz.iter().sum();
            let gw = &mut gl.weights[k * kk..(k + 1) * kk];
            for m in maps_in {
                tensor::weight_grad_into(m, &dz, oh, ow, cp.kernel_size, layer.geom, gw);
            }
            for dm in &mut dinputs {
                tensor::input_grad_into(&dz, oh, ow, cp.kernel_weights(k), cp.kernel_size, layer.geom, dm);
            }
        }
        dmaps = dinputs;
    }

    Ok(SampleGradient {
        grads,
        loss: loss(&cache.log_probs, label),
        log_probs: cache.log_probs,
    })
}

/// Gradient of the loss on one labelled image with respect to every parameter.
pub fn backward(
    params: &ParameterStore,
    spec: &NetworkSpec,
    image: &ImageGrid,
    label: usize,
) -> Result<ParameterStore> {
    Ok(forward_backward(params, spec, image, label)?.grads)
}

/// Outcome of comparing backprop gradients with central differences for one
/// parameter class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCheck {
    pub class: ParamClass,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

impl ClassCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }
}

/// Denominator floor for relative errors, so vanishing gradients are judged
/// on absolute error instead of amplified roundoff.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compare `analytic` against central finite differences of the loss
/// (step `h`) for every parameter. Only `forward` is used for the numeric side.
pub fn finite_difference_check(
    params: &ParameterStore,
    spec: &NetworkSpec,
    image: &ImageGrid,
    label: usize,
    analytic: &ParameterStore,
    h: f64,
) -> Result<Vec<ClassCheck>> {
    if !analytic.same_shape(params) {
        return Err(Error::Shape("gradient store does not mirror parameter store".into()));
    }
    let mut probe = params.clone();
    let mut out = Vec::new();
    for class in params.classes() {
        let mut check = ClassCheck {
            class,
            checked: 0,
            max_rel_err: 0.0,
            worst_index: 0,
        };
        for i in 0..params.group(class).len() {
            let orig = params.group(class)[i];
            probe.group_mut(class)[i] = orig + h;
            let up = loss(&forward(&probe, spec, image)?, label);
            probe.group_mut(class)[i] = orig - h;
            let down = loss(&forward(&probe, spec, image)?, label);
            probe.group_mut(class)[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic.group(class)[i], numeric);
            if err > check.max_rel_err {
                check.max_rel_err = err;
                check.worst_index = i;
            }
            check.checked += 1;
        }
        out.push(check);
    }
    Ok(out)
}

/// Central-difference step used by [`gradient_suite`].
pub const GRADCHECK_STEP: f64 = 1e-5;
/// Largest relative error [`gradient_suite`] accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// The standard gradient check: parameters drawn uniformly from ±0.4, a
/// random input in ±1.5, both labels. Reports the worst of the two labels
/// per parameter class.
///
/// `fault` is a test hook: it adds 1e-2 to the first backprop gradient entry
/// of that class before comparing, which must make the class fail.
pub fn gradient_suite(spec: &NetworkSpec, seed: u64, fault: Option<ParamClass>) -> Result<Vec<ClassCheck>> {
    let mut params = build_network(spec, seed)?;
    randomize(&mut params, seed, 0.4);
    let mut rng = SplitMix64::derive(seed, Stream::Test, 1);
    let image = ImageGrid::from_fn(spec.input_size, spec.input_size, |_, _| rng.uniform(-1.5, 1.5));
    let mut worst: Vec<ClassCheck> = Vec::new();
    for label in [COVER, STEGO] {
        let mut analytic = backward(&params, spec, &image, label)?;
        if let Some(class) = fault {
            if let Some(g) = analytic.group_mut(class).first_mut() {
                *g += 1e-2;
            }
        }
        let checks = finite_difference_check(&params, spec, &image, label, &analytic, GRADCHECK_STEP)?;
        if worst.is_empty() {
            worst = checks;
        } else {
            for (w, c) in worst.iter_mut().zip(checks) {
                if c.max_rel_err > w.max_rel_err {
                    *w = c;
                }
            }
        }
    }
    Ok(worst)
}

/// Fill every parameter with a uniform draw from `[-scale, scale]`.
pub fn randomize(params: &mut ParameterStore, seed: u64, scale: f64) {
    let mut rng = SplitMix64::derive(seed, Stream::Test, 0);
    for s in params.slices_mut() {
        for v in s {
            *v = rng.uniform(-scale, scale);
        }
    }
}
