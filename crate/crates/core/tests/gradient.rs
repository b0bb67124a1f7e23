mod common;

use surgact::seqmodel::{gradient_check_with, CellVariant, Fault, GradCheckOptions};

#[test]
fn analytic_gradients_match_finite_differences() {
    common::check_gradient().assert();
}

#[test]
fn duration_input_and_single_layer_variants() {
    let mut cfg = common::small_model();
    cfg.layers = 1;
    cfg.duration_input = true;
    let err = gradient_check_with(&cfg, 3, GradCheckOptions::default()).unwrap();
    assert!(err < 1e-4, "{err}");
    cfg.cell = CellVariant::Linear;
    let err = gradient_check_with(&cfg, 3, GradCheckOptions::default()).unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn a_broken_forget_gradient_is_detected() {
    let opts = GradCheckOptions { samples: usize::MAX, fault: Some(Fault::ZeroForgetGate), ..Default::default() };
    let err = gradient_check_with(&common::small_model(), 11, opts).unwrap();
    assert!(err > 1e-2, "{err}");
}

#[test]
fn dropout_is_rejected() {
    let mut cfg = common::small_model();
    cfg.dropout_rate = 0.2;
    assert!(gradient_check_with(&cfg, 0, GradCheckOptions::default()).is_err());
}
