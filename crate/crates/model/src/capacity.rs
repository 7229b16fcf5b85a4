use nalgebra::DMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topounet_core::{incidence, CombinatorialComplex, Normalization, RankPath};
use topounet_tensor::glorot_uniform;

use crate::error::ModelError;

/// Relative singular-value cutoff for the numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CapacityReport {
    pub injective: bool,
    /// Numerical rank of the input-to-bottleneck map.
    pub encoder_rank: usize,
    /// `n_{s_0} · d_0`
    pub input_dim: usize,
    /// `n_{s_L} · d_L`
    pub bottleneck_dim: usize,
}

/// Numerical rank of the linear encoder `H ↦ B̄ᵀ_L ⋯ B̄ᵀ_1 H W_1 ⋯ W_L`
/// (identity activation, no refinement) with seeded Glorot weights.
/// `dims` gives the width at every path level.
pub fn linear_capacity_probe(
    cc: &CombinatorialComplex,
    path: &RankPath,
    dims: &[usize],
    seed: u64,
) -> Result<CapacityReport, ModelError> {
    path.check(cc)?;
    if dims.len() != path.len() || dims.contains(&0) {
        return Err(ModelError::Config(format!(
            "{} positive widths needed for path {path}",
            path.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranks = path.ranks();
    let mut steps = Vec::new();
    for (i, w) in ranks.windows(2).enumerate() {
        let b = incidence(cc, w[0], w[1], Normalization::Mean)?;
        steps.push((b.upward(), glorot_uniform(dims[i], dims[i + 1], &mut rng)));
    }
    let n0 = cc.num_cells(ranks[0]);
    let input_dim = n0 * dims[0];
    let bottleneck_dim = cc.num_cells(*ranks.last().expect("nonempty path")) * dims[dims.len() - 1];
    let mut jac = DMatrix::<f64>::zeros(input_dim, bottleneck_dim);
    for v in 0..n0 {
        for k in 0..dims[0] {
            let mut h = Array2::<f64>::zeros((n0, dims[0]));
            h[[v, k]] = 1.0;
            for (m, w) in &steps {
                h = m.mul_dense(h.view())?.dot(w);
            }
            for (j, x) in h.iter().enumerate() {
                jac[(v * dims[0] + k, j)] = *x;
            }
        }
    }
    let sv = jac.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let encoder_rank = sv.iter().filter(|&&s| max > 0.0 && s > RANK_TOLERANCE * max).count();
    Ok(CapacityReport {
        injective: encoder_rank == input_dim,
        encoder_rank,
        input_dim,
        bottleneck_dim,
    })
}
