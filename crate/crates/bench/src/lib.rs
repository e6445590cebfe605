//! Shared fixtures for the benchmarks.

use grace_core::simbench::{build_module_graph, simulate_dataset, Model, SimulationSpec};
use grace_core::{laplacian, Dataset, LaplacianMatrix, WeightedGraph};

pub struct Fixture {
    pub train: Dataset,
    pub graph: WeightedGraph,
    pub laplacian: LaplacianMatrix,
}

/// Standardized training split of the module simulation with `modules` modules.
pub fn fixture(modules: usize, seed: u64) -> Fixture {
    let spec = SimulationSpec::standard(Model::Model1, 0.5).with_modules(modules);
    let data = simulate_dataset(&spec, seed).expect("valid spec");
    let graph = build_module_graph(&spec).expect("valid spec");
    Fixture {
        train: data.train.standardize().expect("simulated columns vary"),
        laplacian: laplacian(&graph),
        graph,
    }
}
