//! Two-port scattering: S-matrix simulation with absorption, windowed
//! enhancement-factor estimation and the enhancement-factor theory stack.

pub mod estimate;
pub mod heidelberg;
pub mod quadrature;
pub mod special;
pub mod theory;

pub use estimate::{
    eef_estimate, eef_jackknife_error, eef_window_estimate, total_absorption, transmission_coefficients, AbsorptionBudget,
    AbsorptionInputs, EefCurve, EefEstimate, EefPoint, TransmissionPoint, WindowSpec,
};
pub use heidelberg::{
    simulate_smatrix, Absorption, ChannelCoupling, GammaProfile, HamiltonianSource, HeidelbergModel,
    SMatrix, SMatrixSeries,
};
pub use special::sici;
pub use theory::{b2_form_factor, eef_theory_goe, eef_theory_integral, eef_theory_sp_closed};
