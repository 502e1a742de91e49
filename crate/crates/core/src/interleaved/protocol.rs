//! Index protocol of the ring, independent of threads and memory.
//!
//! All indexes are unwrapped (slab = index mod N). The writer publishes a
//! count `W`: slabs below `W` are readable. Every parser publishes a hold
//! `H_k`, the lowest index it may still read. The writer fills index `w`
//! only when `w < H_k + N` for all `k`, so a held slab is never
//! overwritten.
//!
//! Parser `k` of `K` owns the indexes `k, k+K, k+2K, …`. It parses an owned
//! slab from its first anchor, and when a cell is still open at the slab
//! end it keeps reading the following slabs (stopping at the first tag
//! outside that cell) before moving on to its next owned slab. Owned slabs
//! met while extending are parsed in full without restarting. The hold is
//! always the next index the parser will read, so it only grows.

/// Whether the writer may fill unwrapped index `w` of a ring of `n` slabs.
pub fn may_fill(w: u64, n: u64, holds: impl IntoIterator<Item = u64>) -> bool {
    holds.into_iter().all(|h| w < h.saturating_add(n))
}

/// What a parser should do next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Next {
    /// Its next slab is not published yet.
    Wait,
    Read {
        index: u64,
        /// The slab is owned: parse all of it (limit = slab length).
        /// Otherwise the parser is finishing a cell (limit = 0).
        owned: bool,
        /// Start from a fresh scanner (only for owned slabs not reached by
        /// extension).
        fresh: bool,
    },
    /// No slab left; `extending` tells whether the document ended while the
    /// parser was still inside a construct it started.
    Finish { extending: bool },
}

/// Position of one parser in its stagger sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParserCursor {
    k: u64,
    stride: u64,
    pos: u64,
    extending: bool,
}

impl ParserCursor {
    pub fn new(k: usize, parsers: usize) -> Self {
        assert!(k < parsers, "parser id out of range");
        ParserCursor {
            k: k as u64,
            stride: parsers as u64,
            pos: k as u64,
            extending: false,
        }
    }

    /// Lowest index this parser may still read.
    pub fn hold(&self) -> u64 {
        self.pos
    }

    pub fn extending(&self) -> bool {
        self.extending
    }

    fn owns(&self, index: u64) -> bool {
        index % self.stride == self.k
    }

    /// Decides the next action given the published count and whether the
    /// writer has finished (`done` must be read before `published`).
    pub fn next(&self, published: u64, done: bool) -> Next {
        if self.pos < published {
            let owned = self.owns(self.pos);
            Next::Read {
                index: self.pos,
                owned,
                fresh: owned && !self.extending,
            }
        } else if done {
            Next::Finish {
                extending: self.extending,
            }
        } else {
            Next::Wait
        }
    }

    /// Records the outcome of reading the current slab: `stopped` when the
    /// scanner halted at a tag belonging to a later owner.
    pub fn advance(&mut self, stopped: bool) {
        if stopped {
            self.extending = false;
            let next_round = self.pos - self.pos % self.stride + self.k;
            self.pos = if next_round > self.pos {
                next_round
            } else {
                next_round + self.stride
            };
        } else {
            self.extending = true;
            self.pos += 1;
        }
    }
}
