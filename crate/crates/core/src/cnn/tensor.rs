use crate::numerics::Matrix;
use crate::{Error, Result};

/// Channel-major activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Dense CHW tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::dims(format!(
                "tensor {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    /// Stacks equally sized planes as channels.
    pub fn from_planes(planes: &[&Matrix]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::invalid("tensor needs at least one plane"))?;
        let (h, w) = first.shape();
        let mut data = Vec::with_capacity(planes.len() * h * w);
        for p in planes {
            if p.shape() != (h, w) {
                return Err(Error::dims(format!(
                    "plane {:?} differs from {:?}",
                    p.shape(),
                    (h, w)
                )));
            }
            data.extend_from_slice(p.as_slice());
        }
        Ok(Self {
            shape: Shape::new(planes.len(), h, w),
            data,
        })
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            shape: Shape::new(1, m.rows(), m.cols()),
            data: m.as_slice().to_vec(),
        }
    }

    /// Multichannel sequence (`channels × timesteps`) laid out for 1-D
    /// convolution: each channel becomes a `timesteps × 1` plane.
    pub fn from_sequence(channels: &Matrix) -> Self {
        Self {
            shape: Shape::new(channels.rows(), channels.cols(), 1),
            data: channels.as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.shape.plane();
        &self.data[c * n..(c + 1) * n]
    }
}

impl Tensor {
    /// Copies channel `c` out as a matrix.
    pub fn plane_matrix(&self, c: usize) -> Matrix {
        Matrix::new(self.shape.height, self.shape.width, self.plane(c).to_vec())
            .expect("plane is finite and well-shaped")
    }
}
