//! Single-flight memoization: each key is computed at most once, and
//! concurrent first requests for the same key wait for that computation.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

pub(crate) struct Memo<K, V> {
    cells: Mutex<HashMap<K, Arc<OnceLock<Arc<V>>>>>,
    computed: AtomicUsize,
}

impl<K: Eq + Hash + Clone, V> Memo<K, V> {
    pub(crate) fn new() -> Self {
        Self {
            cells: Mutex::new(HashMap::new()),
            computed: AtomicUsize::new(0),
        }
    }

    pub(crate) fn get_or_compute(&self, key: &K, compute: impl FnOnce() -> V) -> Arc<V> {
        let cell = {
            let mut cells = self.cells.lock().unwrap_or_else(|e| e.into_inner());
            Arc::clone(cells.entry(key.clone()).or_default())
        };
        // the map lock is released so other keys proceed in parallel
        Arc::clone(cell.get_or_init(|| {
            self.computed.fetch_add(1, Ordering::Relaxed);
            Arc::new(compute())
        }))
    }

    /// Number of computations run so far.
    #[cfg(test)]
    pub(crate) fn computations(&self) -> usize {
        self.computed.load(Ordering::Relaxed)
    }
}
