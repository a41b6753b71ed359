use adjoint_bench::{desk_config, desk_model, inputs};

#[test]
fn fixtures_match_the_desk_model() {
    let model = desk_model();
    let (x, anc) = inputs(&desk_config());
    assert_eq!(x.shape(), [96, 23]);
    assert_eq!(anc.shape(), [96, 3]);
    assert!(anc.data().iter().all(|&v| v == 0.0 || v == 1.0));
    let y = model.predict(&x, &anc).unwrap();
    assert_eq!(y.len(), 96);
    assert!(y.data().iter().all(|v| v.is_finite() && *v >= 0.0));
}
