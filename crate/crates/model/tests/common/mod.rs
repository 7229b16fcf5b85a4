use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use topounet_core::{CombinatorialComplex, ComplexBuilder, Permutation};

/// Ranks 0..=3 with at most 12 cells each; rank 2 is sometimes skipped so
/// that paths include non-consecutive steps.
pub fn random_complex(rng: &mut ChaCha8Rng) -> CombinatorialComplex {
    let n = rng.random_range(4..=8);
    let mut b = ComplexBuilder::new(n);
    let verts: Vec<usize> = (0..n).collect();
    let skip_two = rng.random_bool(0.3);
    for rank in 1..=3 {
        if rank == 2 && skip_two {
            continue;
        }
        for _ in 0..rng.random_range(1..=6) {
            let size = if rank == 3 { rng.random_range(4..=n) } else { rank + 1 };
            let mut pick = verts.clone();
            pick.shuffle(rng);
            pick.truncate(size);
            b.add_cell(rank, pick);
        }
    }
    b.build().unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

pub fn random_perms(cc: &CombinatorialComplex, rng: &mut ChaCha8Rng) -> BTreeMap<usize, Permutation> {
    cc.active_ranks()
        .into_iter()
        .map(|r| {
            let mut p: Vec<usize> = (0..cc.num_cells(r)).collect();
            p.shuffle(rng);
            (r, Permutation::new(p).unwrap())
        })
        .collect()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
