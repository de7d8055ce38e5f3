use pmse_core::dataset::{read_csv, to_csv_string, write_csv, DataMatrix};
use pmse_core::PmseError;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(rows in 1usize..30, cols in 1usize..4, seed in any::<u64>()) {
        let values: Vec<f64> = (0..rows * cols)
            .map(|i| ((seed.wrapping_add(i as u64) % 10_007) as f64 - 5000.0) / 7.3)
            .collect();
        let names: Vec<String> = (0..cols).map(|j| format!("c{j}")).collect();
        let x = DataMatrix::from_row_major(values, rows, names).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_csv(&x, &path).unwrap();
        let back = read_csv::<f64>(&path).unwrap();
        prop_assert_eq!(back.column_names(), x.column_names());
        prop_assert_eq!(back.nrows(), rows);
        for (a, b) in back.as_row_major().iter().zip(x.as_row_major()) {
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
        // Writing what was read gives the same text.
        prop_assert_eq!(to_csv_string(&back), to_csv_string(&x));
    }
}

#[test]
fn parse_error_reports_data_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
    match read_csv::<f64>(&path).unwrap_err() {
        PmseError::Parse { row, column, value } => {
            assert_eq!((row, column, value.as_str()), (2, 2, "oops"));
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn missing_file_is_io_error_with_path() {
    let err = read_csv::<f64>("/nonexistent/input.csv").unwrap_err();
    assert!(matches!(err, PmseError::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/input.csv"));
}
