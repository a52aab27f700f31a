//! Elementary 2D operations on real-valued grids.
//!
//! "Convolution" here is cross-correlation: the kernel is slid over the
//! zero-padded input without being flipped, the convention of every common
//! deep-learning toolkit. Because the kernels are learned, the flipped and
//! unflipped conventions describe the same model family.
//!
//! Output size along each axis is `(input - kernel + 2 * padding) / stride + 1`
//! and must come out as a positive integer; anything else is rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense 2D grid of `f64` in row-major order: an image or a feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} grid needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("grid value at index {i} is not finite")));
        }
        Ok(ImageGrid { height, width, values })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "zero-sized grid");
        ImageGrid {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        let mut g = Self::zeros(height, width);
        g.values.fill(value);
        g
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = Self::zeros(height, width);
        for i in 0..height {
            for j in 0..width {
                g.values[i * width + j] = f(i, j);
            }
        }
        g
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        ImageGrid {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A square kernel with its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
    pub bias: f64,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>, bias: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::Shape("kernel size must be positive".into()));
        }
        if weights.len() != size * size {
            return Err(Error::Shape(format!(
                "{size}x{size} kernel needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidValue("kernel weights and bias must be finite".into()));
        }
        Ok(Kernel { size, weights, bias })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub const VALID: ConvGeometry = ConvGeometry { stride: 1, padding: 0 };

    pub fn new(stride: usize, padding: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidValue("stride must be positive".into()));
        }
        Ok(ConvGeometry { stride, padding })
    }

    /// Output length along one axis, or an error naming all four quantities.
    pub fn output_dim(&self, input: usize, kernel: usize) -> Result<usize> {
        let err = || Error::ConvGeometry {
            input,
            kernel,
            padding: self.padding,
            stride: self.stride,
        };
        if self.stride == 0 || kernel == 0 {
            return Err(err());
        }
        let span = (input + 2 * self.padding).checked_sub(kernel).ok_or_else(err)?;
        if span % self.stride != 0 {
            return Err(err());
        }
        Ok(span / self.stride + 1)
    }
}

impl Default for ConvGeometry {
    fn default() -> Self {
        Self::VALID
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Tanh,
    Relu,
    /// `exp(-x^2) / sigma^2`.
    Gaussian {
        sigma: f64,
    },
}

impl ActivationKind {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(ActivationKind::Gaussian { sigma })
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        activate(x, self)
    }

    /// Derivative with respect to the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Gaussian { sigma } => -2.0 * x * (-x * x).exp() / (sigma * sigma),
        }
    }
}

#[inline]
pub fn activate(x: f64, act: ActivationKind) -> f64 {
    match act {
        ActivationKind::Tanh => x.tanh(),
        ActivationKind::Relu => x.max(0.0),
        ActivationKind::Gaussian { sigma } => (-x * x).exp() / (sigma * sigma),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Mean,
    Max,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub region: usize,
    pub stride: usize,
    pub mode: PoolMode,
}

impl PoolSpec {
    pub const NONE: PoolSpec = PoolSpec {
        region: 1,
        stride: 1,
        mode: PoolMode::None,
    };

    pub fn new(region: usize, stride: usize, mode: PoolMode) -> Result<Self> {
        if region == 0 || stride == 0 {
            return Err(Error::InvalidValue("pool region and stride must be positive".into()));
        }
        Ok(PoolSpec { region, stride, mode })
    }

    fn axis_dim(&self, len: usize) -> Option<usize> {
        let span = len.checked_sub(self.region)?;
        (span % self.stride == 0).then_some(span / self.stride + 1)
    }

    /// Output dimensions for a `height x width` input.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if self.mode == PoolMode::None {
            return Ok((height, width));
        }
        match (self.axis_dim(height), self.axis_dim(width)) {
            (Some(h), Some(w)) if self.region > 0 && self.stride > 0 => Ok((h, w)),
            _ => Err(Error::PoolGeometry {
                region: self.region,
                stride: self.stride,
                height,
                width,
            }),
        }
    }
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self::NONE
    }
}

/// Cross-correlate `input` with `weights` (a `ksize x ksize` kernel) and add
/// the result into `out`, an `oh x ow` row-major buffer.
pub(crate) fn correlate_into(
    input: &ImageGrid,
    weights: &[f64],
    ksize: usize,
    geom: ConvGeometry,
    out: &mut [f64],
    oh: usize,
    ow: usize,
) {
    let (h, w) = input.dims();
    let x = input.values();
    let pad = geom.padding as isize;
    for oi in 0..oh {
        let top = (oi * geom.stride) as isize - pad;
        for oj in 0..ow {
            let left = (oj * geom.stride) as isize - pad;
            let Some((v0, v1)) = clip(left, ksize, w) else {
                continue;
            };
            let mut acc = 0.0;
            for u in 0..ksize {
                let r = top + u as isize;
                if r < 0 || r >= h as isize {
                    continue;
                }
                let row = &x[r as usize * w..(r as usize + 1) * w];
                let krow = &weights[u * ksize..(u + 1) * ksize];
                let c0 = (left + v0 as isize) as usize;
                acc += krow[v0..v1]
                    .iter()
                    .zip(&row[c0..c0 + (v1 - v0)])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            out[oi * ow + oj] += acc;
        }
    }
}

/// Range of kernel columns `v` for which `left + v` lands inside `[0, len)`,
/// or `None` when the window lies entirely in the padding.
#[inline]
fn clip(left: isize, ksize: usize, len: usize) -> Option<(usize, usize)> {
    let lo = (-left).max(0) as usize;
    let hi = ((len as isize - left).max(0) as usize).min(ksize);
    (lo < hi).then_some((lo, hi))
}

/// Accumulate `dL/dW` for one kernel given the layer input and `dL/d(out)`.
pub(crate) fn weight_grad_into(
    input: &ImageGrid,
    grad_out: &[f64],
    oh: usize,
    ow: usize,
    ksize: usize,
    geom: ConvGeometry,
    grad_w: &mut [f64],
) {
    let (h, w) = input.dims();
    let x = input.values();
    let pad = geom.padding as isize;
    for oi in 0..oh {
        let top = (oi * geom.stride) as isize - pad;
        for oj in 0..ow {
            let g = grad_out[oi * ow + oj];
            if g == 0.0 {
                continue;
            }
            let left = (oj * geom.stride) as isize - pad;
            let Some((v0, v1)) = clip(left, ksize, w) else {
                continue;
            };
            for u in 0..ksize {
                let r = top + u as isize;
                if r < 0 || r >= h as isize {
                    continue;
                }
                let c0 = (left + v0 as isize) as usize;
                let row = &x[r as usize * w + c0..r as usize * w + c0 + (v1 - v0)];
                for (gw, xv) in grad_w[u * ksize + v0..u * ksize + v1].iter_mut().zip(row) {
                    *gw += g * xv;
                }
            }
        }
    }
}

/// Accumulate `dL/d(input)` given `dL/d(out)` and the kernel weights.
pub(crate) fn input_grad_into(
    grad_out: &[f64],
    oh: usize,
    ow: usize,
    weights: &[f64],
    ksize: usize,
    geom: ConvGeometry,
    grad_in: &mut ImageGrid,
) {
    let (h, w) = grad_in.dims();
    let gx = grad_in.values_mut();
    let pad = geom.padding as isize;
    for oi in 0..oh {
        let top = (oi * geom.stride) as isize - pad;
        for oj in 0..ow {
            let g = grad_out[oi * ow + oj];
            if g == 0.0 {
                continue;
            }
            let left = (oj * geom.stride) as isize - pad;
            let Some((v0, v1)) = clip(left, ksize, w) else {
                continue;
            };
            for u in 0..ksize {
                let r = top + u as isize;
                if r < 0 || r >= h as isize {
                    continue;
                }
                let c0 = (left + v0 as isize) as usize;
                let row = &mut gx[r as usize * w + c0..r as usize * w + c0 + (v1 - v0)];
                for (gi, wv) in row.iter_mut().zip(&weights[u * ksize + v0..u * ksize + v1]) {
                    *gi += g * wv;
                }
            }
        }
    }
}

/// Output dimensions of convolving a `height x width` grid with a square kernel.
pub fn conv_output_dims(height: usize, width: usize, ksize: usize, geom: ConvGeometry) -> Result<(usize, usize)> {
    Ok((geom.output_dim(height, ksize)?, geom.output_dim(width, ksize)?))
}

/// Cross-correlation of `input` with `kernel`. The kernel bias is *not*
/// added; it belongs to the activation step.
pub fn conv2d(input: &ImageGrid, kernel: &Kernel, geom: ConvGeometry) -> Result<ImageGrid> {
    let (oh, ow) = conv_output_dims(input.height(), input.width(), kernel.size(), geom)?;
    let mut out = ImageGrid::zeros(oh, ow);
    correlate_into(input, kernel.weights(), kernel.size(), geom, out.values_mut(), oh, ow);
    Ok(out)
}

/// One convolutional step over a set of input maps: for each kernel `k`,
/// `f(sum_m conv2d(input_m, kernel_k) + bias_k)`. Every kernel is shared
/// across all input maps, so the layer yields exactly one map per kernel.
pub fn conv_layer_forward(
    inputs: &[ImageGrid],
    kernels: &[Kernel],
    geom: ConvGeometry,
    act: ActivationKind,
) -> Result<Vec<ImageGrid>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::Shape("convolution layer needs at least one input map".into()))?;
    let (h, w) = first.dims();
    if let Some(m) = inputs.iter().position(|g| g.dims() != (h, w)) {
        return Err(Error::Shape(format!(
            "input map {m} is {}x{}, expected {h}x{w}",
            inputs[m].height(),
            inputs[m].width()
        )));
    }
    let Some(ksize) = kernels.first().map(Kernel::size) else {
        return Ok(Vec::new());
    };
    if kernels.iter().any(|k| k.size() != ksize) {
        return Err(Error::Shape("all kernels of a layer must share one size".into()));
    }
    let (oh, ow) = conv_output_dims(h, w, ksize, geom)?;
    Ok(kernels
        .iter()
        .map(|k| {
            let mut out = ImageGrid::zeros(oh, ow);
            for input in inputs {
                correlate_into(input, k.weights(), ksize, geom, out.values_mut(), oh, ow);
            }
            for v in out.values_mut() {
                *v = activate(*v + k.bias, act);
            }
            out
        })
        .collect())
}

/// Mean or max over `region x region` windows placed every `stride` cells.
/// Windows must tile the input exactly.
pub fn pool(input: &ImageGrid, spec: PoolSpec) -> Result<ImageGrid> {
    if spec.mode == PoolMode::None {
        return Ok(input.clone());
    }
    let (oh, ow) = spec.output_dims(input.height(), input.width())?;
    let area = (spec.region * spec.region) as f64;
    Ok(ImageGrid::from_fn(oh, ow, |oi, oj| {
        let window = (0..spec.region)
            .flat_map(|u| (0..spec.region).map(move |v| input.get(oi * spec.stride + u, oj * spec.stride + v)));
        match spec.mode {
            PoolMode::Mean => window.sum::<f64>() / area,
            PoolMode::Max => window.fold(f64::NEG_INFINITY, f64::max),
            PoolMode::None => unreachable!(),
        }
    }))
}

/// Route `grad_out` (shaped like `pool(input)`) back onto the input grid.
/// Max pooling sends each window's gradient to its first maximal cell.
pub(crate) fn pool_backward(input: &ImageGrid, spec: PoolSpec, grad_out: &ImageGrid) -> ImageGrid {
    if spec.mode == PoolMode::None {
        return grad_out.clone();
    }
    let mut grad_in = ImageGrid::zeros(input.height(), input.width());
    let area = (spec.region * spec.region) as f64;
    for oi in 0..grad_out.height() {
        for oj in 0..grad_out.width() {
            let g = grad_out.get(oi, oj);
            let (r0, c0) = (oi * spec.stride, oj * spec.stride);
            match spec.mode {
                PoolMode::Mean => {
                    for u in 0..spec.region {
                        for v in 0..spec.region {
                            let cur = grad_in.get(r0 + u, c0 + v);
                            grad_in.set(r0 + u, c0 + v, cur + g / area);
                        }
                    }
                }
                PoolMode::Max => {
                    let mut best = (r0, c0);
                    for u in 0..spec.region {
                        for v in 0..spec.region {
                            if input.get(r0 + u, c0 + v) > input.get(best.0, best.1) {
                                best = (r0 + u, c0 + v);
                            }
                        }
                    }
                    let cur = grad_in.get(best.0, best.1);
                    grad_in.set(best.0, best.1, cur + g);
                }
                PoolMode::None => unreachable!(),
            }
        }
    }
    grad_in
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn random_grid(rng: &mut SplitMix64, h: usize, w: usize) -> ImageGrid {
        ImageGrid::from_fn(h, w, |_, _| rng.uniform(-1.0, 1.0))
    }

    fn random_kernel(rng: &mut SplitMix64, k: usize) -> Kernel {
        Kernel::new(k, (0..k * k).map(|_| rng.uniform(-1.0, 1.0)).collect(), 0.0).unwrap()
    }

    /// Straight four-loop cross-correlation with explicit zero padding.
    fn oracle_conv(x: &ImageGrid, k: &Kernel, s: usize, p: usize) -> Vec<f64> {
        let (h, w) = x.dims();
        let n = k.size();
        let oh = (h + 2 * p - n) / s + 1;
        let ow = (w + 2 * p - n) / s + 1;
        let mut out = vec![0.0; oh * ow];
        for i in 0..oh {
            for j in 0..ow {
                for u in 0..n {
                    for v in 0..n {
                        let r = (i * s + u) as isize - p as isize;
                        let c = (j * s + v) as isize - p as isize;
                        let xv = if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                            x.get(r as usize, c as usize)
                        } else {
                            0.0
                        };
                        out[i * ow + j] += k.weights()[u * n + v] * xv;
                    }
                }
            }
        }
        out
    }

    fn assert_close(a: &[f64], b: &[f64], rel: f64) {
        assert_eq!(a.len(), b.len());
        let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= rel * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn paper_dimension_chain() {
        let g = ConvGeometry::VALID;
        assert_eq!(g.output_dim(512, 3).unwrap(), 510);
        assert_eq!(g.output_dim(510, 509).unwrap(), 2);
        assert_eq!(ConvGeometry::new(1, 2).unwrap().output_dim(28, 5).unwrap(), 28);
    }

    #[test]
    fn scalar_kernel_scales() {
        let x = ImageGrid::filled(3, 3, 1.0);
        let k = Kernel::new(1, vec![2.0], 0.0).unwrap();
        let y = conv2d(&x, &k, ConvGeometry::VALID).unwrap();
        assert_eq!(y.dims(), (3, 3));
        assert!(y.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn bias_is_not_added_by_conv2d() {
        let x = ImageGrid::filled(2, 2, 1.0);
        let k = Kernel::new(1, vec![1.0], 5.0).unwrap();
        assert_eq!(conv2d(&x, &k, ConvGeometry::VALID).unwrap(), x);
    }

    #[test]
    fn bad_geometry_names_all_quantities() {
        let x = ImageGrid::zeros(6, 6);
        let k = Kernel::new(3, vec![0.0; 9], 0.0).unwrap();
        let err = conv2d(&x, &k, ConvGeometry::new(2, 0).unwrap()).unwrap_err();
        let msg = err.to_string();
        for needle in ["input 6", "kernel 3", "padding 0", "stride 2"] {
            assert!(msg.contains(needle), "{msg}");
        }
        let big = Kernel::new(7, vec![0.0; 49], 0.0).unwrap();
        assert!(matches!(
            conv2d(&x, &big, ConvGeometry::VALID),
            Err(Error::ConvGeometry { .. })
        ));
    }

    #[test]
    fn paper_second_layer_shape() {
        let x = ImageGrid::zeros(510, 510);
        let kernels: Vec<Kernel> = (0..2)
            .map(|_| Kernel::new(509, vec![0.0; 509 * 509], 0.0).unwrap())
            .collect();
        let out = conv_layer_forward(&[x], &kernels, ConvGeometry::VALID, ActivationKind::Tanh).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|m| m.dims() == (2, 2)));
    }

    #[test]
    fn zero_kernels_give_zero_maps_under_tanh() {
        let mut rng = SplitMix64::new(1);
        let x = random_grid(&mut rng, 7, 7);
        let kernels = vec![Kernel::new(3, vec![0.0; 9], 0.0).unwrap(); 4];
        let out = conv_layer_forward(&[x], &kernels, ConvGeometry::VALID, ActivationKind::Tanh).unwrap();
        assert!(out.iter().all(|m| m.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn layer_sums_over_input_maps() {
        let mut rng = SplitMix64::new(2);
        let a = random_grid(&mut rng, 4, 4);
        let b = random_grid(&mut rng, 4, 4);
        let mut k = random_kernel(&mut rng, 3);
        k.bias = 0.3;
        let out = conv_layer_forward(
            &[a.clone(), b.clone()],
            &[k.clone()],
            ConvGeometry::VALID,
            ActivationKind::Tanh,
        )
        .unwrap();
        let ca = oracle_conv(&a, &k, 1, 0);
        let cb = oracle_conv(&b, &k, 1, 0);
        let expected: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| (x + y + 0.3).tanh()).collect();
        assert_close(out[0].values(), &expected, 1e-12);
    }

    #[test]
    fn heterogeneous_inputs_rejected() {
        let k = Kernel::new(1, vec![1.0], 0.0).unwrap();
        let r = conv_layer_forward(
            &[ImageGrid::zeros(3, 3), ImageGrid::zeros(4, 4)],
            &[k],
            ConvGeometry::VALID,
            ActivationKind::Relu,
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn activation_cases() {
        assert_eq!(activate(-3.0, ActivationKind::Relu), 0.0);
        assert_eq!(activate(2.0, ActivationKind::Relu), 2.0);
        assert_eq!(activate(0.0, ActivationKind::Tanh), 0.0);
        assert_eq!(activate(0.0, ActivationKind::gaussian(1.0).unwrap()), 1.0);
        assert_eq!(activate(0.0, ActivationKind::gaussian(2.0).unwrap()), 0.25);
        assert!(ActivationKind::gaussian(0.0).is_err());
    }

    #[test]
    fn activation_derivatives_match_differences() {
        let h = 1e-6;
        for act in [
            ActivationKind::Tanh,
            ActivationKind::Relu,
            ActivationKind::gaussian(0.7).unwrap(),
        ] {
            for x in [-1.3, -0.2, 0.4, 2.1] {
                let fd = (activate(x + h, act) - activate(x - h, act)) / (2.0 * h);
                assert!((fd - act.derivative(x)).abs() < 1e-6, "{act:?} at {x}");
            }
        }
    }

    #[test]
    fn pool_cases() {
        let x = ImageGrid::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let max = pool(&x, PoolSpec::new(2, 2, PoolMode::Max).unwrap()).unwrap();
        let mean = pool(&x, PoolSpec::new(2, 2, PoolMode::Mean).unwrap()).unwrap();
        assert_eq!(max.values(), &[4.0]);
        assert_eq!(mean.values(), &[2.5]);
        let y = pool(&ImageGrid::zeros(28, 28), PoolSpec::new(2, 2, PoolMode::Max).unwrap()).unwrap();
        assert_eq!(y.dims(), (14, 14));
        assert_eq!(pool(&x, PoolSpec::NONE).unwrap(), x);
    }

    #[test]
    fn non_tiling_pool_rejected() {
        let r = pool(&ImageGrid::zeros(5, 5), PoolSpec::new(2, 2, PoolMode::Mean).unwrap());
        assert!(matches!(r, Err(Error::PoolGeometry { .. })));
    }

    #[test]
    fn overlapping_pool_windows() {
        let x = ImageGrid::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let y = pool(&x, PoolSpec::new(2, 1, PoolMode::Max).unwrap()).unwrap();
        assert_eq!(y.values(), &[4.0, 5.0, 7.0, 8.0]);
    }

    proptest! {
        #[test]
        fn conv_matches_oracle(seed in any::<u64>(), h in 1usize..=16, w in 1usize..=16,
                               k in 1usize..=5, s in 1usize..=3, p in 0usize..=2) {
            let mut rng = SplitMix64::new(seed);
            prop_assume!(h + 2 * p >= k && w + 2 * p >= k);
            prop_assume!((h + 2 * p - k) % s == 0 && (w + 2 * p - k) % s == 0);
            let x = random_grid(&mut rng, h, w);
            let kern = random_kernel(&mut rng, k);
            let got = conv2d(&x, &kern, ConvGeometry::new(s, p).unwrap()).unwrap();
            prop_assert_eq!(got.dims(), ((h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1));
            assert_close(got.values(), &oracle_conv(&x, &kern, s, p), 1e-12);
        }

        #[test]
        fn conv_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = SplitMix64::new(seed);
            let x = random_grid(&mut rng, 8, 8);
            let y = random_grid(&mut rng, 8, 8);
            let kern = random_kernel(&mut rng, 3);
            let mix = ImageGrid::from_fn(8, 8, |i, j| a * x.get(i, j) + b * y.get(i, j));
            let lhs = conv2d(&mix, &kern, ConvGeometry::VALID).unwrap();
            let cx = conv2d(&x, &kern, ConvGeometry::VALID).unwrap();
            let cy = conv2d(&y, &kern, ConvGeometry::VALID).unwrap();
            let rhs: Vec<f64> = cx.values().iter().zip(cy.values()).map(|(u, v)| a * u + b * v).collect();
            assert_close(lhs.values(), &rhs, 1e-12);
        }

        #[test]
        fn identity_kernel_is_identity(seed in any::<u64>(), h in 1usize..12, w in 1usize..12) {
            let mut rng = SplitMix64::new(seed);
            let x = random_grid(&mut rng, h, w);
            let id = Kernel::new(1, vec![1.0], 0.0).unwrap();
            prop_assert_eq!(conv2d(&x, &id, ConvGeometry::VALID).unwrap(), x);
        }

        #[test]
        fn pool_orderings(seed in any::<u64>(), c in -5.0f64..5.0) {
            let mut rng = SplitMix64::new(seed);
            let spec_mean = PoolSpec::new(2, 2, PoolMode::Mean).unwrap();
            let spec_max = PoolSpec::new(2, 2, PoolMode::Max).unwrap();
            let constant = ImageGrid::filled(6, 6, c);
            let pooled = pool(&constant, spec_mean).unwrap();
            prop_assert!(pooled.values().iter().all(|&v| (v - c).abs() < 1e-12));
            let x = random_grid(&mut rng, 6, 6);
            let mx = pool(&x, spec_max).unwrap();
            let mn = pool(&x, spec_mean).unwrap();
            prop_assert!(mx.values().iter().zip(mn.values()).all(|(a, b)| a >= b));
        }

        #[test]
        fn activation_shape(x in -10.0f64..10.0, dx in 0.0f64..5.0, sigma in 0.1f64..3.0) {
            prop_assert!(activate(x + dx, ActivationKind::Tanh) >= activate(x, ActivationKind::Tanh));
            prop_assert!(activate(x + dx, ActivationKind::Relu) >= activate(x, ActivationKind::Relu));
            let g = ActivationKind::Gaussian { sigma };
            prop_assert_eq!(activate(x, g), activate(-x, g));
        }
    }
}
