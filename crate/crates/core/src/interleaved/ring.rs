//! Shared ring of fixed-size slabs with atomic indexes.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::time::Duration;

use super::protocol::may_fill;

/// Keeps each parser's hold on its own cache line.
#[repr(align(64))]
struct Padded(AtomicU64);

struct Slab {
    bytes: UnsafeCell<Box<[u8]>>,
    len: AtomicUsize,
}

pub struct Ring {
    slabs: Box<[Slab]>,
    element_size: usize,
    published: AtomicU64,
    done: AtomicBool,
    poisoned: AtomicBool,
    holds: Box<[Padded]>,
}

// Slab bytes are only written by the single writer for indexes no parser
// holds, and only read by parsers for published indexes they hold.
unsafe impl Sync for Ring {}

impl Ring {
    pub fn new(elements: usize, element_size: usize, parsers: usize) -> Self {
        let slabs = (0..elements)
            .map(|_| Slab {
                bytes: UnsafeCell::new(vec![0u8; element_size].into_boxed_slice()),
                len: AtomicUsize::new(0),
            })
            .collect();
        let holds = (0..parsers).map(|k| Padded(AtomicU64::new(k as u64))).collect();
        Ring {
            slabs,
            element_size,
            published: AtomicU64::new(0),
            done: AtomicBool::new(false),
            poisoned: AtomicBool::new(false),
            holds,
        }
    }

    pub fn elements(&self) -> usize {
        self.slabs.len()
    }

    pub fn parsers(&self) -> usize {
        self.holds.len()
    }

    pub fn element_size(&self) -> usize {
        self.element_size
    }

    /// Bytes held by the slabs.
    pub fn footprint(&self) -> usize {
        self.slabs.len() * self.element_size
    }

    pub fn published(&self) -> u64 {
        self.published.load(Ordering::Acquire)
    }

    pub fn done(&self) -> bool {
        self.done.load(Ordering::Acquire)
    }

    pub fn poison(&self) {
        self.poisoned.store(true, Ordering::Release);
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.load(Ordering::Acquire)
    }

    pub fn may_fill(&self, w: u64) -> bool {
        may_fill(
            w,
            self.slabs.len() as u64,
            self.holds.iter().map(|h| h.0.load(Ordering::Acquire)),
        )
    }

    /// Slab for unwrapped index `w`.
    ///
    /// # Safety
    /// Only the writer may call this, and only after `may_fill(w)` returned
    /// true and before publishing `w`.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn slab_mut(&self, w: u64) -> &mut [u8] {
        &mut *self.slabs[(w % self.slabs.len() as u64) as usize].bytes.get()
    }

    /// Makes index `w` (holding `len` bytes) readable.
    pub fn publish(&self, w: u64, len: usize) {
        self.slabs[(w % self.slabs.len() as u64) as usize].len.store(len, Ordering::Relaxed);
        self.published.store(w + 1, Ordering::Release);
    }

    pub fn finish(&self) {
        self.done.store(true, Ordering::Release);
    }

    /// Valid bytes of published index `i`.
    ///
    /// # Safety
    /// `i` must be below [`Ring::published`] and at or above the caller's
    /// published hold for the whole lifetime of the returned slice.
    pub unsafe fn slab(&self, i: u64) -> &[u8] {
        let slab = &self.slabs[(i % self.slabs.len() as u64) as usize];
        let len = slab.len.load(Ordering::Relaxed);
        let bytes: &Box<[u8]> = &*slab.bytes.get();
        &bytes[..len]
    }

    pub fn set_hold(&self, k: usize, hold: u64) {
        self.holds[k].0.store(hold, Ordering::Release);
    }
}

/// Spin, then yield, then nap.
#[derive(Default)]
pub struct Backoff {
    round: u32,
}

impl Backoff {
    pub fn reset(&mut self) {
        self.round = 0;
    }

    pub fn wait(&mut self) {
        if self.round < 8 {
            for _ in 0..1 << self.round {
                std::hint::spin_loop();
            }
        } else if self.round < 24 {
            std::thread::yield_now();
        } else {
            std::thread::sleep(Duration::from_micros(50));
        }
        self.round = self.round.saturating_add(1);
    }
}
