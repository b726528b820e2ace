//! Landmark shape vectors, geometric transforms and the normalized error metric.
//!
//! A shape is the interleaved coordinate vector `[x1, y1, ..., xP, yP]` of P
//! landmarks, in pixel units of the source image. The origin is the center of
//! the top-left pixel, x grows rightward and y grows downward; every module in
//! this crate shares that convention.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Interleaved landmark coordinate vector `[x1, y1, ..., xP, yP]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    coords: Array1<f64>,
}

impl Shape {
    /// Builds a shape from interleaved coordinates. The vector must be
    /// non-empty, of even length and entirely finite.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_array(Array1::from_vec(coords))
    }

    pub fn from_array(coords: Array1<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "shape length must be even and positive, got {}",
                coords.len()
            )));
        }
        if !coords.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("shape contains non-finite coordinates".into()));
        }
        Ok(Shape { coords })
    }

    pub fn landmark_count(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn x(&self, p: usize) -> f64 {
        self.coords[2 * p]
    }

    pub fn y(&self, p: usize) -> f64 {
        self.coords[2 * p + 1]
    }

    pub fn point(&self, p: usize) -> (f64, f64) {
        (self.x(p), self.y(p))
    }

    pub fn coords(&self) -> &Array1<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice().expect("shape storage is contiguous")
    }
}

/// Dataset-level landmark conventions: mirror correspondence and which
/// landmark subsets stand in for the two pupils.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkLayout {
    landmark_count: usize,
    flip_permutation: Vec<usize>,
    left_eye: Vec<usize>,
    right_eye: Vec<usize>,
}

impl LandmarkLayout {
    pub fn new(
        flip_permutation: Vec<usize>,
        left_eye: Vec<usize>,
        right_eye: Vec<usize>,
    ) -> Result<Self> {
        let p = flip_permutation.len();
        if p == 0 {
            return Err(Error::invalid("layout needs at least one landmark"));
        }
        for (i, &j) in flip_permutation.iter().enumerate() {
            if j >= p {
                return Err(Error::invalid(format!(
                    "flip permutation entry {j} out of range for {p} landmarks"
                )));
            }
            if flip_permutation[j] != i {
                return Err(Error::invalid("flip permutation must be an involution"));
            }
        }
        if left_eye.is_empty() || right_eye.is_empty() {
            return Err(Error::invalid("eye index subsets must be non-empty"));
        }
        for &i in left_eye.iter().chain(right_eye.iter()) {
            if i >= p {
                return Err(Error::invalid(format!(
                    "eye index {i} out of range for {p} landmarks"
                )));
            }
        }
        if left_eye.iter().any(|i| right_eye.contains(i)) {
            return Err(Error::invalid("eye index subsets must be disjoint"));
        }
        Ok(LandmarkLayout {
            landmark_count: p,
            flip_permutation,
            left_eye,
            right_eye,
        })
    }

    /// Layout whose mirror correspondence is the identity. Suits synthetic
    /// data where landmarks carry no left/right identity.
    pub fn with_identity_flip(p: usize, left_eye: Vec<usize>, right_eye: Vec<usize>) -> Result<Self> {
        LandmarkLayout::new((0..p).collect(), left_eye, right_eye)
    }

    pub fn landmark_count(&self) -> usize {
        self.landmark_count
    }

    pub fn flip_permutation(&self) -> &[usize] {
        &self.flip_permutation
    }

    pub fn left_eye(&self) -> &[usize] {
        &self.left_eye
    }

    pub fn right_eye(&self) -> &[usize] {
        &self.right_eye
    }
}

/// Mean landmark localization error in units of the inter-pupil distance:
/// the average per-landmark Euclidean distance between `pred` and `truth`,
/// divided by `d_pupils`.
pub fn normalized_error(pred: &Shape, truth: &Shape, d_pupils: f64) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "shape length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if !(d_pupils > 0.0) || !d_pupils.is_finite() {
        return Err(Error::invalid(format!(
            "inter-pupil distance must be positive and finite, got {d_pupils}"
        )));
    }
    let p = pred.landmark_count();
    let mut sum = 0.0;
    for i in 0..p {
        let dx = pred.x(i) - truth.x(i);
        let dy = pred.y(i) - truth.y(i);
        sum += (dx * dx + dy * dy).sqrt();
    }
    Ok(sum / p as f64 / d_pupils)
}

/// Distance between the mean point of the left-eye landmarks and the mean
/// point of the right-eye landmarks.
pub fn interpupil_distance(truth: &Shape, layout: &LandmarkLayout) -> Result<f64> {
    if truth.landmark_count() != layout.landmark_count() {
        return Err(Error::invalid(format!(
            "shape has {} landmarks but layout expects {}",
            truth.landmark_count(),
            layout.landmark_count()
        )));
    }
    let centroid = |indices: &[usize]| {
        let n = indices.len() as f64;
        let (sx, sy) = indices
            .iter()
            .fold((0.0, 0.0), |(ax, ay), &i| (ax + truth.x(i), ay + truth.y(i)));
        (sx / n, sy / n)
    };
    let (lx, ly) = centroid(layout.left_eye());
    let (rx, ry) = centroid(layout.right_eye());
    let d = ((lx - rx) * (lx - rx) + (ly - ry) * (ly - ry)).sqrt();
    if d == 0.0 {
        return Err(Error::DegenerateGeometry(
            "eye centers coincide; sample excluded from metric aggregation".into(),
        ));
    }
    Ok(d)
}

/// Coordinate-wise arithmetic mean of a non-empty, uniform-length set of shapes.
pub fn mean_shape(shapes: &[Shape]) -> Result<Shape> {
    let first = shapes
        .first()
        .ok_or_else(|| Error::invalid("mean of an empty shape list"))?;
    let len = first.len();
    let mut acc = Array1::<f64>::zeros(len);
    for s in shapes {
        if s.len() != len {
            return Err(Error::invalid(format!(
                "shape length mismatch in mean: {} vs {}",
                s.len(),
                len
            )));
        }
        acc += s.coords();
    }
    acc /= shapes.len() as f64;
    Shape::from_array(acc)
}

/// Horizontal mirror of a shape in an image of the given width: landmark p
/// takes the reflected position of its mirror counterpart `π(p)`.
pub fn flip_shape(s: &Shape, image_width: usize, layout: &LandmarkLayout) -> Result<Shape> {
    if s.landmark_count() != layout.landmark_count() {
        return Err(Error::invalid(format!(
            "shape has {} landmarks but layout expects {}",
            s.landmark_count(),
            layout.landmark_count()
        )));
    }
    let w = (image_width - 1) as f64;
    let perm = layout.flip_permutation();
    let p = s.landmark_count();
    let mut coords = vec![0.0; 2 * p];
    for i in 0..p {
        let j = perm[i];
        coords[2 * i] = w - s.x(j);
        coords[2 * i + 1] = s.y(j);
    }
    Shape::new(coords)
}
