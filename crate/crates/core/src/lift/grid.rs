use log::warn;
use ndarray::Array2;

use crate::complex::{CombinatorialComplex, ComplexBuilder};
use crate::error::LiftError;

/// An image on a `height × width` pixel grid. `pixels` has one row per pixel
/// (row-major) and one column per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct GridInput {
    pub height: usize,
    pub width: usize,
    pub pixels: Array2<f64>,
}

impl GridInput {
    pub fn new(height: usize, width: usize, pixels: Array2<f64>) -> Result<Self, LiftError> {
        if height == 0 || width == 0 {
            return Err(LiftError::Argument("grid dimensions must be positive".into()));
        }
        if pixels.nrows() != height * width {
            return Err(LiftError::Argument(format!(
                "{} pixel rows for a {height}x{width} grid",
                pixels.nrows()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    /// A single-channel image of zeros.
    pub fn blank(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixels: Array2::zeros((height * width, 1)),
        }
    }
}

/// Pixels at rank 0, 4-connected neighbor pairs at rank 1, and every 2×2
/// window (stride 1) at rank 2. Vertex id of pixel `(r, c)` is `r·width + c`.
pub fn lift_grid(g: &GridInput) -> Result<CombinatorialComplex, LiftError> {
    let (h, w) = (g.height, g.width);
    if h < 2 || w < 2 {
        warn!("{h}x{w} grid has no 2x2 windows; rank 2 will be empty");
    }
    let id = |r: usize, c: usize| r * w + c;
    let mut b = ComplexBuilder::new(h * w);
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                b.add_cell(1, vec![id(r, c), id(r, c + 1)]);
            }
            if r + 1 < h {
                b.add_cell(1, vec![id(r, c), id(r + 1, c)]);
            }
            if r + 1 < h && c + 1 < w {
                b.add_cell(2, vec![id(r, c), id(r, c + 1), id(r + 1, c), id(r + 1, c + 1)]);
            }
        }
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grids() {
        assert_eq!(
            lift_grid(&GridInput::blank(2, 2)).unwrap().counts(),
            vec![(0, 4), (1, 4), (2, 1)]
        );
        assert_eq!(
            lift_grid(&GridInput::blank(3, 3)).unwrap().counts(),
            vec![(0, 9), (1, 12), (2, 4)]
        );
    }

    #[test]
    fn mnist_sized_grid() {
        let cc = lift_grid(&GridInput::blank(28, 28)).unwrap();
        assert_eq!(cc.counts(), vec![(0, 784), (1, 1512), (2, 729)]);
    }

    #[test]
    fn strip_has_no_patches() {
        let cc = lift_grid(&GridInput::blank(1, 5)).unwrap();
        assert_eq!(cc.counts(), vec![(0, 5), (1, 4)]);
    }

    #[test]
    fn pixel_rows_must_match_dimensions() {
        assert!(GridInput::new(2, 2, Array2::zeros((3, 1))).is_err());
    }
}
