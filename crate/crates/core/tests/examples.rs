//! Every cargo example runs to completion.

mod two_stage_recovery {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/two_stage_recovery.rs"));
}

#[test]
fn two_stage_recovery_runs() {
    two_stage_recovery::run_example().expect("two_stage_recovery example");
}

mod doubly_sparse {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/doubly_sparse.rs"));
}

#[test]
fn doubly_sparse_runs() {
    doubly_sparse::run_example().expect("doubly_sparse example");
}

mod rip_probe {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/rip_probe.rs"));
}

#[test]
fn rip_probe_runs() {
    rip_probe::run_example().expect("rip_probe example");
}

mod minimax_bounds {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/minimax_bounds.rs"));
}

#[test]
fn minimax_bounds_runs() {
    minimax_bounds::run_example().expect("minimax_bounds example");
}

mod packing {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/packing.rs"));
}

#[test]
fn packing_runs() {
    packing::run_example().expect("packing example");
}

mod phase_retrieval {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/phase_retrieval.rs"));
}

#[test]
fn phase_retrieval_runs() {
    phase_retrieval::run_example().expect("phase_retrieval example");
}

mod experiment_grid {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/experiment_grid.rs"));
}

#[test]
fn experiment_grid_runs() {
    experiment_grid::run_example().expect("experiment_grid example");
}

mod save_and_recover {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/save_and_recover.rs"));
}

#[test]
fn save_and_recover_runs() {
    save_and_recover::run_example().expect("save_and_recover example");
}

mod solver_comparison {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/solver_comparison.rs"));
}

#[test]
fn solver_comparison_runs() {
    solver_comparison::run_example().expect("solver_comparison example");
}

mod noise_band {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/noise_band.rs"));
}

#[test]
fn noise_band_runs() {
    noise_band::run_example().expect("noise_band example");
}
