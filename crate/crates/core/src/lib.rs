//! ADC-aware co-design of printed MLP classifiers.
//!
//! The toolkit searches, per classifier input, which quantization levels of
//! a flash ADC can be removed while the network is trained with power-of-2
//! weights. The search is a two-objective NSGA-II over accuracy miss and a
//! proxy front-end area; a gate-level encoder compiler serves as an
//! independent functional and gate-count reference.
//!
//! Module map:
//!
//! * [`adc`]: flash ADC behavior under level masks.
//! * [`area`]: comparator + OR2 proxy area.
//! * [`netlist`]: encoder netlists, simulation, HDL/JSON emission.
//! * [`qmlp`]: power-of-2 QAT and shift-only inference.
//! * [`nsga2`]: generic NSGA-II engine and 2-D hypervolume.
//! * [`chromosome`]: masks + QAT genes, and the fitness binding them.
//! * [`data`]: CSV ingestion, min-max normalization, stratified splits.
//! * [`cli`]: run configuration, artifacts, and the subcommands.

pub mod adc;
pub mod area;
pub mod netlist;
pub mod qmlp;
pub mod nsga2;
pub mod data;
pub mod chromosome;
pub mod cli;
pub mod error;

pub use error::{Error, Result};
