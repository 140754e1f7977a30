#![no_main]

use gdalab_cli::config::Grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(grid) = serde_json::from_slice::<Grid>(data) else {
        return;
    };
    if let (Grid::Range { start, step, .. }, Ok(values)) = (&grid, grid.values()) {
        assert!(!values.is_empty() && values.len() <= 1_000_000);
        assert_eq!(values[0], *start);
        assert!(values.windows(2).all(|w| w[1] > w[0] || *step < f64::EPSILON * w[0].abs()));
    }
});
