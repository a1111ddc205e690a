#![no_main]

use libfuzzer_sys::fuzz_target;
use revcause::cli::csv_io::read_table;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_table(data, &["x", "y", "w"]) {
        let n = table.dataset.n_rows();
        assert_eq!(table.rows_read, n + table.rows_dropped);
        for column in table.dataset.columns() {
            assert!(column.values().iter().all(|v| v.is_finite()));
        }
    }
    let _ = read_table(data, &[]);
});
