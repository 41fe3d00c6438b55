//! Zero-forcing precoder and combiner design.
//!
//! Every cross link `i → j` is cancelled either by transmitter `i`
//! (precoder inside the null space of `H^{ij}`) or by receiver `j`
//! (combiner inside the left null space of `H^{ij}`). With full
//! polarimetric antennas each link costs two dimensions, so a node with
//! `M` antennas cancels up to `3M − 1` links and keeps two streams.

mod assignment;
mod closed_form;
mod design;
mod placement;

pub use assignment::{
    assign_nulling, assign_with_capacity, nulling_capacity, nulling_capacity_for,
    NullingAssignment, NullingSide,
};
pub use closed_form::{
    closed_form_rx_dual, closed_form_rx_single, closed_form_tx_dual, closed_form_tx_single,
    dual_column_norm, dual_null_factor, dual_null_gain, dual_null_unnormalized,
    reference_dual_normalization, single_null_gain,
};
pub use design::{
    auto_assignment, design_zf, design_zf_with, effective_channels, nullspace_beamformer,
    recheck_leakage, recheck_leakage_on, rx_null_basis, scenario_capacity, tx_null_basis,
    Beamformer, BeamformerOrigin, ClosedFormGain, ClosedFormKind, DesignOptions, DesignWarning,
    EffectiveChannel, LeakageCheck, LeakageEntry, ZfDesign, LEAKAGE_TOL, STREAMS,
};
pub use placement::{optimal_placement_design, OptimalPlacement};
