//! Row-major 2-D containers for per-pixel masks, id maps and labels.

use crate::error::{Error, Result};
use crate::tensor_io::{Tensor, TensorData};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Per-pixel binary flag.
pub type Mask = Grid<bool>;

impl<T> Grid<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty grid {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_shape<U>(&self, other: &Grid<U>, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Result<Self> {
        Grid::from_vec(height, width, vec![value; height * width])
    }
}

fn grid_dims(t: &Tensor) -> Result<(usize, usize)> {
    match t.dims() {
        [h, w] => Ok((*h, *w)),
        dims => Err(Error::Shape(format!(
            "expected a 2-D tensor, got dims {dims:?}"
        ))),
    }
}

impl Mask {
    /// uint8 tensor with values 0/1.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.data.iter().map(|&b| b as u8).collect();
        Tensor::new(vec![self.height, self.width], TensorData::Uint8(data))
            .expect("grid dims are valid tensor dims")
    }

    /// Any nonzero value counts as set.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (h, w) = grid_dims(t)?;
        let data = match t.data() {
            TensorData::Uint8(v) => v.iter().map(|&x| x != 0).collect(),
            TensorData::Uint32(v) => v.iter().map(|&x| x != 0).collect(),
            TensorData::Real32(_) => {
                return Err(Error::Format("mask must be an integer tensor".into()))
            }
        };
        Grid::from_vec(h, w, data)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

impl Grid<u32> {
    /// Accepts uint8 or uint32 tensors.
    pub fn from_id_tensor(t: &Tensor) -> Result<Self> {
        let (h, w) = grid_dims(t)?;
        let data = match t.data() {
            TensorData::Uint8(v) => v.iter().map(|&x| x as u32).collect(),
            TensorData::Uint32(v) => v.clone(),
            TensorData::Real32(_) => {
                return Err(Error::Format("id map must be an integer tensor".into()))
            }
        };
        Grid::from_vec(h, w, data)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.height, self.width],
            TensorData::Uint32(self.data.clone()),
        )
        .expect("grid dims are valid tensor dims")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(
            Grid::from_vec(2, 2, vec![0u8; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mask_tensor_round_trip() {
        let m = Grid::from_vec(2, 3, vec![true, false, false, true, true, false]).unwrap();
        let back = Mask::from_tensor(&m.to_tensor()).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.count(), 3);
    }

    #[test]
    fn id_map_from_uint8() {
        let t = Tensor::new(vec![1, 2], TensorData::Uint8(vec![3, 255])).unwrap();
        let ids = Grid::from_id_tensor(&t).unwrap();
        assert_eq!(ids.as_slice(), &[3, 255]);
    }
}
