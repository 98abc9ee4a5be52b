//! The acceptance gate as a test target: one test per criterion, each
//! printing its pass/fail line. `mpmfg verify` runs the same checks.
//!
//! Criteria 7 and 8 drive millions of finite-agent steps and together take
//! on the order of an hour of CPU time.

use mpmfg_cli::acceptance::*;

fn check(r: CriterionResult) {
    r.print();
    assert!(r.passed, "criterion {} failed: {}", r.number, r.detail);
}

#[test]
fn criterion_01_exact_solve_converges() {
    check(criterion_1());
}

#[test]
fn criterion_02_linear_rate() {
    check(criterion_2());
}

#[test]
fn criterion_03_mask_rate_ordering() {
    check(criterion_3());
}

#[test]
fn criterion_04_simulator_agreement() {
    check(criterion_4());
}

#[test]
fn criterion_05_neighbor_impact_unbiased() {
    check(criterion_5());
}

#[test]
fn criterion_06_deviation_scaling() {
    check(criterion_6());
}

#[test]
fn criterion_07_ctd_consistency() {
    check(criterion_7());
}

#[test]
fn criterion_08_population_size_effect() {
    check(criterion_8());
}

#[test]
fn criterion_09_oracle_equivalences() {
    check(criterion_9());
}

#[test]
fn criterion_10_byte_identical_reruns() {
    check(criterion_10(std::path::Path::new(env!("CARGO_BIN_EXE_mpmfg"))));
}
