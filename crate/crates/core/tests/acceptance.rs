//! Acceptance suite at full size. Each test prints one PASS/FAIL line; the
//! informational criterion prints its outcome without asserting it.

use martensim::verify::{run_criterion, Faults, Level};

fn check(id: u32) {
    let r = run_criterion(id, Level::Full, &Faults::default()).expect("criterion runs");
    println!("{}", r.line());
    if r.gated {
        assert!(r.passed, "{}\nmeasured: {}", r.line(), r.measured);
    }
}

#[test]
fn c01_packing_exactness() {
    check(1);
}

#[test]
fn c02_model_a_volume_decay() {
    check(2);
}

#[test]
fn c03_model_b_volume_decay() {
    check(3);
}

#[test]
fn c04_modified_model_a_control() {
    check(4);
}

#[test]
fn c05_outer_length_exponents() {
    check(5);
}

#[test]
fn c06_inner_length_exponent() {
    check(6);
}

#[test]
fn c07_combination_law() {
    check(7);
}

#[test]
fn c08_fractional_norms() {
    check(8);
}

#[test]
fn c09_determinism() {
    check(9);
}

#[test]
fn c10_geometry_invariants() {
    check(10);
}

#[test]
fn injected_contraction_fault_is_caught() {
    let faults = Faults { c_tilde_a: Some(0.3) };
    let r = run_criterion(2, Level::Fast, &faults).unwrap();
    println!("{}", r.line());
    assert!(!r.passed);
}
