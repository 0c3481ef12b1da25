use corot_core::{modal_decompose, sobolev_norm, ModalBasis, RadialGrid, SobolevOrder, StatePair};
use corot_profiles::profile_state;

use crate::frame::{to_similarity, SimilarityFrame};
use crate::{Result, SimilarityError};

/// Reusable pieces for measuring the distance to the profile in the rescaled
/// frame: a `ξ` grid, `(Φ, Φ̂)` on it and optionally a modal basis for the
/// Sobolev surrogate.
#[derive(Debug, Clone)]
pub struct DiscrepancyProbe {
    pub xi_grid: RadialGrid,
    pub d: usize,
    pub profile: StatePair,
    pub basis: Option<ModalBasis>,
    pub order: SobolevOrder,
}

impl DiscrepancyProbe {
    /// Sup norms only.
    pub fn new(xi_grid: RadialGrid, d: usize) -> Result<Self> {
        let profile = profile_state(&xi_grid, d)?;
        Ok(Self {
            xi_grid,
            d,
            profile,
            basis: None,
            order: SobolevOrder::diagnostic(1.6, 6),
        })
    }

    /// Also reports `‖·‖` of the difference in the discrete `Ḣ^s ∩ Ḣ^k` norm.
    pub fn with_sobolev(xi_grid: RadialGrid, d: usize, order: SobolevOrder) -> Result<Self> {
        let basis = modal_decompose(&xi_grid, d + 2)?;
        let mut p = Self::new(xi_grid, d)?;
        p.basis = Some(basis);
        p.order = SobolevOrder {
            diagnostic: true,
            ..order
        };
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    /// `sup_ξ |(T̂-t) u(t, (T̂-t)ξ) - Φ(ξ)|`.
    pub sup: f64,
    /// Same over both components of the pair.
    pub sup_pair: f64,
    pub sobolev: Option<f64>,
}

/// Distance of the rescaled physical state to the profile on `[0, ξ_max]`.
pub fn psi_discrepancy(
    state: &StatePair,
    phys: &RadialGrid,
    t: f64,
    t_hat: f64,
    probe: &DiscrepancyProbe,
) -> Result<Discrepancy> {
    if !(t < t_hat) {
        return Err(SimilarityError::Domain(format!(
            "t = {t} is not before T^ = {t_hat}"
        )));
    }
    let frame = SimilarityFrame {
        t_tilde: t_hat,
        xi_grid: probe.xi_grid.clone(),
    };
    let sim = to_similarity(state, phys, t, &frame)?;
    let diff = sim.axpy(-1.0, &probe.profile);
    let sup = diff.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sobolev = match &probe.basis {
        Some(b) => Some(sobolev_norm(&diff, probe.order, b)?.total),
        None => None,
    };
    Ok(Discrepancy {
        sup,
        sup_pair: diff.sup_norm(),
        sobolev,
    })
}
