//! Design-space exploration for hybrid CNN/ViT networks on heterogeneous
//! NPU + compute-in-memory edge accelerators.
//!
//! * [`netir`] – search space, subnet choices, layer IR and workload counting.
//! * [`costmodel`] – analytical NPU and CIM latency/energy models.
//! * [`cimsim`] – input-read deduplication counting for multi-CU CIM macros and the area model.
//! * [`scheduler`] – channel/head-granular NPU/CIM partitioning of a network.
//! * [`search`] – evolutionary multi-objective subnet search and Pareto utilities.

pub mod cimsim;
pub mod costmodel;
pub mod netir;
pub mod scheduler;
pub mod search;
