//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use tautgw::{CorrelatorEngine, CorrelatorKey, TargetModel};

pub fn engine(r: usize) -> CorrelatorEngine {
    CorrelatorEngine::new(Arc::new(TargetModel::projective_space(r)))
}

/// `⟨κ_{0,1}^{2n−2}⟩_n` on ℂP¹, the closed-form coefficients.
pub fn cp1_kappa_key(n: u32) -> CorrelatorKey {
    CorrelatorKey::from_lists(&[], &[(0, 1, 2 * n - 2)], n).expect("valid key")
}

/// `⟨τ_0^2 … τ_0^2⟩_d` with `3d − 1` point insertions on ℙ².
pub fn p2_points_key(d: u32) -> CorrelatorKey {
    CorrelatorKey::from_lists(&[(0, 2, 3 * d - 1)], &[], d).expect("valid key")
}
