use litho_smo::grad::{finite_difference_gradient, max_relative_error};
use litho_smo::harness::synthetic_instance;
use litho_smo::{ParamKind, SmoModel};

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in [11, 12, 13] {
        let inst = synthetic_instance(32, 3, seed).unwrap();
        let model = SmoModel::new(&inst.cfg, &inst.target).unwrap();
        let (_, g) = model.gradient(&inst.theta_j, &inst.theta_m).unwrap();
        let fd_m = finite_difference_gradient(&model, &inst.theta_j, &inst.theta_m, ParamKind::MaskParams, 1e-5, None)
            .unwrap();
        let fd_j = finite_difference_gradient(
            &model,
            &inst.theta_j,
            &inst.theta_m,
            ParamKind::SourceParams,
            1e-5,
            None,
        )
        .unwrap();
        let em = max_relative_error(&g.wrt_mask, &fd_m);
        let ej = max_relative_error(&g.wrt_source, &fd_j);
        println!("seed {seed}: mask {em:.3e} source {ej:.3e}");
        assert!(em < 1e-4 && ej < 1e-4, "seed {seed}: mask {em:e}, source {ej:e}");
    }
}
