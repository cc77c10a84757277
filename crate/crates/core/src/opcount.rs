//! Floating-point operation counter for query-cost instrumentation.
//!
//! Compiled to no-ops unless the `opcount` feature is enabled.

#[cfg(feature = "opcount")]
mod imp {
    use std::cell::Cell;

    thread_local! {
        static OPS: Cell<u64> = const { Cell::new(0) };
    }

    #[inline]
    pub fn add(n: u64) {
        OPS.with(|c| c.set(c.get() + n));
    }

    pub fn reset() {
        OPS.with(|c| c.set(0));
    }

    pub fn get() -> u64 {
        OPS.with(|c| c.get())
    }
}

#[cfg(not(feature = "opcount"))]
mod imp {
    #[inline(always)]
    pub fn add(_n: u64) {}

    pub fn reset() {}

    pub fn get() -> u64 {
        0
    }
}

pub use imp::{add, get, reset};

pub const ENABLED: bool = cfg!(feature = "opcount");
