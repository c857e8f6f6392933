use fvqoc::{is_input_error, ou_path, unitary_rows};
use fvqoc_core::config::parse_config;
use fvqoc_core::linalg::C64;
use fvqoc_core::Error;

#[test]
fn config_errors_are_input_errors() {
    let err = parse_config(r#"{"experiment": "optimize", "seed": 1, "extra": 0}"#).unwrap_err();
    assert!(is_input_error(&err));
    assert!(!is_input_error(&Error::Singular));
}

#[test]
fn ou_path_has_matching_lengths() {
    let (x, dw) = ou_path(0.1, 0.2, 0.01, 50, 7, false).unwrap();
    assert_eq!(x.len(), 51);
    assert_eq!(dw.len(), 50);
    assert_eq!(x[0], 0.0);
    assert!(ou_path(-1.0, 0.2, 0.01, 50, 7, false).is_err());
}

#[test]
fn unitary_rows_are_orthonormal() {
    let rows = unitary_rows(3, 4).unwrap();
    for a in &rows {
        for b in &rows {
            let ip: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            let expected = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
            assert!((ip - C64::new(expected, 0.0)).norm() < 1e-12);
        }
    }
}
