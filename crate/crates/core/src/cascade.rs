//! The regression network: an initial stage (linear map on global features,
//! or a fixed mean shape), T local refinement stages, dropout on feature
//! inputs, and back-propagation of the squared shape error through the whole
//! stack.
//!
//! The local feature extractor is non-differentiable, so its Jacobian enters
//! the backward recurrence as a central-difference approximation supplied by
//! the [`FeatureProvider`].

use ndarray::{s, Array1, Array2};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::features::{
    build_response_maps, extract_global, extract_local, local_jacobian, FeatureJacobian,
    HogConfig, LocalDescriptorConfig, ResponseMaps, LANDMARK_DESCRIPTOR_LEN,
};
use crate::image::GrayImage;
use crate::shapes::{LandmarkLayout, Shape};

/// One linear regressor: `prediction = weights · features + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinearLayer {
            weights: Array2::zeros((rows, cols)),
            bias: Array1::zeros(rows),
        }
    }
}

/// How the cascade produces its initial shape estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStage {
    /// Linear regression from the global image descriptor.
    Global(LinearLayer),
    /// A fixed shape (typically the training-set mean); used by the variant
    /// that drops the global regressor.
    MeanShape(Shape),
}

/// Full parameter set and feature configuration of a cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub init: InitStage,
    pub locals: Vec<LinearLayer>,
    pub hog: HogConfig,
    pub local_cfgs: Vec<LocalDescriptorConfig>,
    /// Probability that a feature dimension is kept by dropout. At inference
    /// the weight matrices act scaled by this value.
    pub dropout_rate: f64,
    pub layout: LandmarkLayout,
}

impl CascadeModel {
    pub fn new(
        init: InitStage,
        locals: Vec<LinearLayer>,
        hog: HogConfig,
        local_cfgs: Vec<LocalDescriptorConfig>,
        dropout_rate: f64,
        layout: LandmarkLayout,
    ) -> Result<Self> {
        let model = CascadeModel {
            init,
            locals,
            hog,
            local_cfgs,
            dropout_rate,
            layout,
        };
        model.validate()?;
        Ok(model)
    }

    /// Zero-initialized model with a global layer.
    pub fn zeroed_global(
        hog: HogConfig,
        local_cfgs: Vec<LocalDescriptorConfig>,
        dropout_rate: f64,
        layout: LandmarkLayout,
    ) -> Result<Self> {
        let rows = 2 * layout.landmark_count();
        let global = LinearLayer::zeros(rows, hog.descriptor_len());
        let locals = local_cfgs
            .iter()
            .map(|_| LinearLayer::zeros(rows, rows / 2 * LANDMARK_DESCRIPTOR_LEN))
            .collect();
        CascadeModel::new(
            InitStage::Global(global),
            locals,
            hog,
            local_cfgs,
            dropout_rate,
            layout,
        )
    }

    /// Zero-initialized model whose initial estimate is a fixed shape.
    pub fn zeroed_mean_shape(
        mean: Shape,
        hog: HogConfig,
        local_cfgs: Vec<LocalDescriptorConfig>,
        dropout_rate: f64,
        layout: LandmarkLayout,
    ) -> Result<Self> {
        let rows = 2 * layout.landmark_count();
        let locals = local_cfgs
            .iter()
            .map(|_| LinearLayer::zeros(rows, rows / 2 * LANDMARK_DESCRIPTOR_LEN))
            .collect();
        CascadeModel::new(
            InitStage::MeanShape(mean),
            locals,
            hog,
            local_cfgs,
            dropout_rate,
            layout,
        )
    }

    pub fn landmark_count(&self) -> usize {
        self.layout.landmark_count()
    }

    /// Number of local refinement stages T.
    pub fn stage_count(&self) -> usize {
        self.locals.len()
    }

    pub fn has_global_layer(&self) -> bool {
        matches!(self.init, InitStage::Global(_))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dropout_rate > 0.0 && self.dropout_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "dropout rate must lie in (0, 1], got {}",
                self.dropout_rate
            )));
        }
        self.hog.validate()?;
        let rows = 2 * self.layout.landmark_count();
        match &self.init {
            InitStage::Global(layer) => {
                if layer.weights.nrows() != rows || layer.bias.len() != rows {
                    return Err(Error::invalid("global layer output dimension mismatch"));
                }
                if layer.weights.ncols() != self.hog.descriptor_len() {
                    return Err(Error::invalid(format!(
                        "global layer expects {} feature columns, config provides {}",
                        layer.weights.ncols(),
                        self.hog.descriptor_len()
                    )));
                }
                if !layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
                    return Err(Error::invalid("global layer has non-finite parameters"));
                }
            }
            InitStage::MeanShape(mean) => {
                if mean.len() != rows {
                    return Err(Error::invalid("mean shape length mismatch"));
                }
            }
        }
        if self.locals.len() != self.local_cfgs.len() {
            return Err(Error::invalid("one descriptor config per local stage required"));
        }
        let local_dim = self.layout.landmark_count() * LANDMARK_DESCRIPTOR_LEN;
        for (t, (layer, cfg)) in self.locals.iter().zip(&self.local_cfgs).enumerate() {
            cfg.validate()?;
            if layer.weights.nrows() != rows || layer.bias.len() != rows {
                return Err(Error::invalid(format!("stage {t} output dimension mismatch")));
            }
            if layer.weights.ncols() != local_dim {
                return Err(Error::invalid(format!(
                    "stage {t} expects {local_dim} feature columns, has {}",
                    layer.weights.ncols()
                )));
            }
            if !layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("stage {t} has non-finite parameters")));
            }
        }
        Ok(())
    }
}

/// Bernoulli keep/drop mask over one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
}

impl DropoutMask {
    /// Samples each dimension as kept with probability `keep_prob`.
    pub fn sample(dim: usize, keep_prob: f64, rng: &mut dyn RngCore) -> Self {
        let keep = (0..dim).map(|_| rng.gen_bool(keep_prob)).collect();
        DropoutMask { keep }
    }

    pub fn all_kept(dim: usize) -> Self {
        DropoutMask {
            keep: vec![true; dim],
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.keep[i]
    }

    /// Copy of `v` with dropped dimensions zeroed.
    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        debug_assert_eq!(self.keep.len(), v.len());
        Array1::from_iter(
            v.iter()
                .zip(&self.keep)
                .map(|(&x, &k)| if k { x } else { 0.0 }),
        )
    }
}

/// Forward-pass mode: training samples dropout masks, inference scales the
/// weight matrices by the keep probability instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Training,
    Inference,
}

/// Masks recorded during a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct TraceMasks {
    pub global: Option<DropoutMask>,
    pub locals: Vec<DropoutMask>,
}

/// Everything one forward pass produced, consumed by the backward pass:
/// per-stage shapes, extracted features, and (in training mode) the masks.
#[derive(Debug, Clone)]
pub struct StageTrace {
    /// `s^0 .. s^T`.
    pub shapes: Vec<Shape>,
    pub global_features: Option<Array1<f64>>,
    /// `φ^1 .. φ^T` (entry t-1 feeds local stage t), unmasked.
    pub local_features: Vec<Array1<f64>>,
    pub masks: Option<TraceMasks>,
}

impl StageTrace {
    pub fn final_shape(&self) -> &Shape {
        self.shapes.last().expect("trace holds at least s^0")
    }
}

/// Gradients of the half-squared shape error with respect to every model
/// parameter, congruent with the model layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub global: Option<(Array2<f64>, Array1<f64>)>,
    pub locals: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(model: &CascadeModel) -> Self {
        let global = match &model.init {
            InitStage::Global(layer) => Some((
                Array2::zeros(layer.weights.raw_dim()),
                Array1::zeros(layer.bias.len()),
            )),
            InitStage::MeanShape(_) => None,
        };
        let locals = model
            .locals
            .iter()
            .map(|l| {
                (
                    Array2::zeros(l.weights.raw_dim()),
                    Array1::zeros(l.bias.len()),
                )
            })
            .collect();
        Gradients { global, locals }
    }

    /// Accumulates `other` into `self`. Shapes must be congruent.
    pub fn add_assign(&mut self, other: &Gradients) {
        match (&mut self.global, &other.global) {
            (Some((w, b)), Some((ow, ob))) => {
                *w += ow;
                *b += ob;
            }
            (None, None) => {}
            _ => panic!("gradient layout mismatch"),
        }
        assert_eq!(self.locals.len(), other.locals.len(), "gradient layout mismatch");
        for ((w, b), (ow, ob)) in self.locals.iter_mut().zip(&other.locals) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn is_finite(&self) -> bool {
        let pair_ok = |w: &Array2<f64>, b: &Array1<f64>| {
            w.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite())
        };
        self.global.iter().all(|(w, b)| pair_ok(w, b))
            && self.locals.iter().all(|(w, b)| pair_ok(w, b))
    }
}

/// Source of image features for one sample. Implementations must be
/// deterministic: repeated calls with the same shape return identical values.
pub trait FeatureProvider {
    /// The global descriptor, when the provider was built for a model with a
    /// global layer.
    fn global_features(&self) -> Option<&Array1<f64>>;
    /// Concatenated per-landmark descriptors feeding local stage `stage`
    /// (0-based), extracted at shape `s`.
    fn local_features(&self, stage: usize, s: &Shape) -> Array1<f64>;
    /// Descriptor Jacobian at shape `s` for local stage `stage`.
    fn local_jacobian(&self, stage: usize, s: &Shape) -> FeatureJacobian;
}

/// [`FeatureProvider`] backed by a real image: HOG for the global layer and
/// response integral maps (one set per distinct blur sigma) for the locals.
pub struct ImageFeatureProvider {
    global: Option<Array1<f64>>,
    maps: Vec<ResponseMaps>,
    stage_map: Vec<usize>,
    local_cfgs: Vec<LocalDescriptorConfig>,
}

impl ImageFeatureProvider {
    pub fn new(
        img: &GrayImage,
        hog: Option<&HogConfig>,
        local_cfgs: &[LocalDescriptorConfig],
    ) -> Result<Self> {
        let global = hog.map(|cfg| extract_global(img, cfg)).transpose()?;
        let mut maps: Vec<ResponseMaps> = Vec::new();
        let mut stage_map = Vec::with_capacity(local_cfgs.len());
        for cfg in local_cfgs {
            cfg.validate()?;
            let found = maps
                .iter()
                .position(|m| m.blur_sigma().to_bits() == cfg.blur_sigma.to_bits());
            match found {
                Some(i) => stage_map.push(i),
                None => {
                    maps.push(build_response_maps(img, cfg.blur_sigma)?);
                    stage_map.push(maps.len() - 1);
                }
            }
        }
        Ok(ImageFeatureProvider {
            global,
            maps,
            stage_map,
            local_cfgs: local_cfgs.to_vec(),
        })
    }

    /// Provider configured for every stage of `model`.
    pub fn for_model(img: &GrayImage, model: &CascadeModel) -> Result<Self> {
        let hog = model.has_global_layer().then_some(&model.hog);
        ImageFeatureProvider::new(img, hog, &model.local_cfgs)
    }
}

impl FeatureProvider for ImageFeatureProvider {
    fn global_features(&self) -> Option<&Array1<f64>> {
        self.global.as_ref()
    }

    fn local_features(&self, stage: usize, s: &Shape) -> Array1<f64> {
        extract_local(&self.maps[self.stage_map[stage]], s, &self.local_cfgs[stage])
    }

    fn local_jacobian(&self, stage: usize, s: &Shape) -> FeatureJacobian {
        local_jacobian(&self.maps[self.stage_map[stage]], s, &self.local_cfgs[stage])
    }
}

/// Initial-stage prediction `s^0 = W^0 (mask ⊙ φ^0) + b^0`, or the
/// inference form with weights scaled by the keep probability when no mask
/// is given.
pub fn global_forward(
    model: &CascadeModel,
    phi0: &Array1<f64>,
    mask: Option<&DropoutMask>,
) -> Result<Shape> {
    let layer = match &model.init {
        InitStage::Global(layer) => layer,
        InitStage::MeanShape(_) => {
            return Err(Error::invalid("model has no global layer"));
        }
    };
    if phi0.len() != layer.weights.ncols() {
        return Err(Error::invalid(format!(
            "global feature length {} does not match {} columns",
            phi0.len(),
            layer.weights.ncols()
        )));
    }
    if let Some(m) = mask {
        if m.len() != phi0.len() {
            return Err(Error::invalid("dropout mask length mismatch"));
        }
    }
    let pred = match mask {
        Some(m) => layer.weights.dot(&m.apply(phi0)) + &layer.bias,
        None => layer.weights.dot(phi0) * model.dropout_rate + &layer.bias,
    };
    Shape::from_array(pred)
}

/// Refinement `s^t = s^{t-1} + W^t (mask ⊙ φ^t) + b^t`; without a mask the
/// weights act scaled by `dropout_rate`.
pub fn local_forward(
    layer: &LinearLayer,
    dropout_rate: f64,
    s_prev: &Shape,
    phi: &Array1<f64>,
    mask: Option<&DropoutMask>,
) -> Result<Shape> {
    if phi.len() != layer.weights.ncols() {
        return Err(Error::invalid(format!(
            "local feature length {} does not match {} columns",
            phi.len(),
            layer.weights.ncols()
        )));
    }
    if s_prev.len() != layer.weights.nrows() {
        return Err(Error::invalid("previous shape length mismatch"));
    }
    if let Some(m) = mask {
        if m.len() != phi.len() {
            return Err(Error::invalid("dropout mask length mismatch"));
        }
    }
    let increment = match mask {
        Some(m) => layer.weights.dot(&m.apply(phi)) + &layer.bias,
        None => layer.weights.dot(phi) * dropout_rate + &layer.bias,
    };
    Shape::from_array(s_prev.coords() + &increment)
}

/// Runs the whole cascade on one sample, recording per-stage shapes and
/// features. Training mode samples one dropout mask per stage from `rng`.
pub fn forward(
    model: &CascadeModel,
    provider: &dyn FeatureProvider,
    mode: ForwardMode,
    rng: &mut dyn RngCore,
) -> Result<StageTrace> {
    match mode {
        ForwardMode::Training => forward_impl(model, provider, Some(rng)),
        ForwardMode::Inference => forward_impl(model, provider, None),
    }
}

/// Inference-mode forward pass; no RNG involved.
pub fn infer(model: &CascadeModel, provider: &dyn FeatureProvider) -> Result<StageTrace> {
    forward_impl(model, provider, None)
}

fn forward_impl(
    model: &CascadeModel,
    provider: &dyn FeatureProvider,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<StageTrace> {
    let training = rng.is_some();
    let mut masks = training.then(|| TraceMasks {
        global: None,
        locals: Vec::with_capacity(model.stage_count()),
    });

    let mut global_features = None;
    let s0 = match &model.init {
        InitStage::Global(_) => {
            let phi0 = provider
                .global_features()
                .ok_or_else(|| Error::invalid("provider supplies no global features"))?;
            let mask = rng.as_deref_mut().map(|r| {
                DropoutMask::sample(phi0.len(), model.dropout_rate, r)
            });
            let s0 = global_forward(model, phi0, mask.as_ref())?;
            if let Some(tm) = masks.as_mut() {
                tm.global = mask;
            }
            global_features = Some(phi0.clone());
            s0
        }
        InitStage::MeanShape(mean) => mean.clone(),
    };

    let mut shapes = Vec::with_capacity(model.stage_count() + 1);
    let mut local_features = Vec::with_capacity(model.stage_count());
    shapes.push(s0);
    for (t, layer) in model.locals.iter().enumerate() {
        let prev = shapes.last().expect("at least s^0");
        let phi = provider.local_features(t, prev);
        let mask = rng
            .as_deref_mut()
            .map(|r| DropoutMask::sample(phi.len(), model.dropout_rate, r));
        let next = local_forward(layer, model.dropout_rate, prev, &phi, mask.as_ref())
            .map_err(|e| match e {
                Error::Numeric(_) => Error::Numeric(format!("non-finite shape after stage {t}")),
                other => other,
            })?;
        if let Some(tm) = masks.as_mut() {
            tm.locals.push(mask.expect("training mode samples a mask"));
        }
        shapes.push(next);
        local_features.push(phi);
    }

    Ok(StageTrace {
        shapes,
        global_features,
        local_features,
        masks,
    })
}

/// Back-propagates the half-squared error `E = ½‖s^T − truth‖²` through the
/// trace, producing gradients for every parameter.
///
/// The recurrence seeds `∂E/∂s^T = s^T − truth` and steps backwards with
/// `∂E/∂s^{t-1} = (I + W^t D_z Ψ^t)^⊤ ∂E/∂s^t`, where `Ψ^t` is the
/// descriptor Jacobian at `s^{t-1}` supplied by the provider and `D_z` the
/// recorded dropout mask; masked feature dimensions contribute neither to the
/// weight gradients nor to the recurrence.
pub fn backward(
    model: &CascadeModel,
    provider: &dyn FeatureProvider,
    trace: &StageTrace,
    truth: &Shape,
) -> Result<Gradients> {
    let masks = trace.masks.as_ref().ok_or_else(|| {
        Error::invalid("backward requires a training-mode trace with recorded masks")
    })?;
    let t_count = model.stage_count();
    if trace.shapes.len() != t_count + 1
        || trace.local_features.len() != t_count
        || masks.locals.len() != t_count
    {
        return Err(Error::invalid("trace does not match model stage count"));
    }
    let rows = 2 * model.landmark_count();
    if truth.len() != rows {
        return Err(Error::invalid("truth shape length mismatch"));
    }

    let mut grads = Gradients::zeros_like(model);
    let mut delta: Array1<f64> = trace.final_shape().coords() - truth.coords();

    for t in (0..t_count).rev() {
        let layer = &model.locals[t];
        let phi = &trace.local_features[t];
        let mask = &masks.locals[t];
        if phi.len() != layer.weights.ncols() || mask.len() != phi.len() {
            return Err(Error::invalid(format!("trace stage {t} dimension mismatch")));
        }

        let masked_phi = mask.apply(phi);
        let (gw, gb) = &mut grads.locals[t];
        for (r, mut row) in gw.rows_mut().into_iter().enumerate() {
            row.scaled_add(delta[r], &masked_phi);
        }
        *gb += &delta;

        // δ^{t-1} is only needed if a trainable stage precedes this one.
        if t > 0 || model.has_global_layer() {
            let u = layer.weights.t().dot(&delta);
            let u_masked = mask.apply(&u);
            let jac = provider.local_jacobian(t, &trace.shapes[t]);
            let mut v = Array1::<f64>::zeros(rows);
            for p in 0..model.landmark_count() {
                let seg = u_masked.slice(s![
                    p * LANDMARK_DESCRIPTOR_LEN..(p + 1) * LANDMARK_DESCRIPTOR_LEN
                ]);
                v[2 * p] = jac.blocks[p].column(0).dot(&seg);
                v[2 * p + 1] = jac.blocks[p].column(1).dot(&seg);
            }
            delta += &v;
        }
    }

    if model.has_global_layer() {
        let phi0 = trace
            .global_features
            .as_ref()
            .ok_or_else(|| Error::invalid("trace lacks global features"))?;
        let mask0 = masks
            .global
            .as_ref()
            .ok_or_else(|| Error::invalid("trace lacks the global dropout mask"))?;
        let masked_phi0 = mask0.apply(phi0);
        let (gw, gb) = grads.global.as_mut().expect("layout congruent with model");
        for (r, mut row) in gw.rows_mut().into_iter().enumerate() {
            row.scaled_add(delta[r], &masked_phi0);
        }
        *gb += &delta;
    }

    Ok(grads)
}

/// Half-squared error between a predicted and a true shape.
pub fn squared_error(pred: &Shape, truth: &Shape) -> f64 {
    pred.coords()
        .iter()
        .zip(truth.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * 0.5
}
