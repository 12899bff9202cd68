//! Quantum-level arithmetic in the magnetic bottle and the cyclotron
//! lineshapes that detector backaction produces.

pub mod analysis;
pub mod jump;
pub mod levels;
pub mod lineshape;

pub use jump::AxialJumpProcess;
pub use levels::{
    axial_shift, backaction_shifts, dispersive_ratio, energy, is_strongly_dispersive, mean_axial_quanta,
    thermal_weight, BottleParams, ModeFrequencies, QuantumState, Spin, ThermalAxial, DISPERSIVE_THRESHOLD,
};
pub use lineshape::{level_dephasing_rate, lineshape_discrete, lineshape_monte_carlo, Lineshape, MonteCarloConfig};
