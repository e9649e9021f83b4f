use sim_ofdma::output::{format_matrix, format_milp, parse_matrix, parse_milp, read_rows, write_rows, Row};
use sim_ofdma_core::allocation::{solve_branch_and_bound, MilpInstance};
use sim_ofdma_core::nalgebra::DMatrix;

#[test]
fn milp_round_trip() {
    let linear: Vec<f64> = (0..3 * 4).map(|i| 0.1 + i as f64 / 7.0).collect();
    let pair: Vec<f64> = (0..3 * 4).map(|i| (i as f64 * 0.37).sin().abs()).collect();
    let m = MilpInstance::from_costs(3, 4, 2, linear, pair).unwrap();
    let back = parse_milp(&format_milp(&m)).unwrap();
    assert_eq!(back, m);
    assert_eq!(
        solve_branch_and_bound(&back).unwrap().objective,
        solve_branch_and_bound(&m).unwrap().objective
    );
}

#[test]
fn milp_rejects_garbage() {
    for text in ["", "2 2\nc\n", "2 2 1\nc\n1 2\n", "2 2 1\nc\n1 2\n3 4\nd\n0 1 x 1\n"] {
        assert!(parse_milp(text).is_err(), "{text:?}");
    }
}

#[test]
fn matrix_round_trip() {
    let m = DMatrix::from_fn(3, 5, |r, c| (r * 5 + c) as f64 / 3.0);
    let text = format_matrix(&m, 7, "abc");
    assert!(text.starts_with("# seed=7 config_hash=abc"));
    assert_eq!(parse_matrix(&text).unwrap(), m);
    assert!(parse_matrix("1 2\n3\n").is_err());
}

#[test]
fn rows_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let rows = vec![Row {
        scheme: "joint".into(),
        sweep_key: "k_c".into(),
        sweep_value: 10.0,
        seed: u64::MAX,
        metric_name: "nmse".into(),
        metric_value: 0.125,
        config_hash: "ff".into(),
    }];
    write_rows(&path, &rows).unwrap();
    assert_eq!(read_rows(&path).unwrap(), rows);
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("scheme,sweep_key,sweep_value,seed,metric_name,metric_value,config_hash"));
}
