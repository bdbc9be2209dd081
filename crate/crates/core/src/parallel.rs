//! Worker-count control for the internal rayon pool.

use std::sync::Once;

pub const THREADS_ENV: &str = "BINARYKIN_THREADS";

static INIT: Once = Once::new();

/// Caps the global pool at `BINARYKIN_THREADS` workers (0 or unset = auto).
/// Only the first call has an effect.
pub fn init_from_env() {
    INIT.call_once(|| {
        let n = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .unwrap_or(0);
        if n > 0 {
            // A pool may already exist when embedded; keeping it is fine.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}
