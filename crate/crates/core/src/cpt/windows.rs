//! Sliding windows over one traversal path.
//!
//! Pointer simulation over 1-based inclusive positions:
//!
//! ```text
//! l <- 1, r <- 1
//! while r <= n:
//!     if size(p[l..r]) <= L: r <- r + 1
//!     else: emit p[l..r-1]; move l; r <- l
//! ```
//!
//! `overlap_one` moves `l` to `r - 1` so the next window starts at the last
//! file of the emitted one. `step_one` moves `l` by one. Two situations need
//! rules the bare loop lacks:
//!
//! * `p[l..r-1]` is empty because file `l` alone exceeds `L`. The file is
//!   emitted truncated and `l` moves past it.
//! * `p[l..r-1]` is the single file `l`. Moving `l` to `r - 1` would not
//!   advance, so `l` moves to `r`.
//!
//! A window lying inside the previously emitted one adds no new adjacency and
//! is skipped. With `emit_tail_window` the window still open when the loop
//! ends is emitted too.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointerMode {
    #[default]
    OverlapOne,
    StepOne,
}

impl std::str::FromStr for PointerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overlap_one" => Ok(PointerMode::OverlapOne),
            "step_one" => Ok(PointerMode::StepOne),
            other => Err(format!("unknown pointer mode `{other}` (expected overlap_one or step_one)")),
        }
    }
}

/// A window as 0-based inclusive positions into the path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub truncated: bool,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn within(&self, other: &Window) -> bool {
        other.start <= self.start && self.end <= other.end
    }
}

/// Runs the pointer simulation over per-file sizes.
pub fn plan_windows(sizes: &[usize], limit: usize, mode: PointerMode, emit_tail: bool) -> Vec<Window> {
    let n = sizes.len();
    let mut out: Vec<Window> = Vec::new();
    let emit = |out: &mut Vec<Window>, w: Window| {
        if w.truncated || !out.last().is_some_and(|prev| w.within(prev)) {
            out.push(w);
        }
    };
    // 1-based pointers, matching the loop above.
    let (mut l, mut r) = (1usize, 1usize);
    let mut total = 0usize;
    while r <= n {
        if total + sizes[r - 1] <= limit {
            total += sizes[r - 1];
            r += 1;
            continue;
        }
        if r == l {
            emit(&mut out, Window { start: l - 1, end: l - 1, truncated: true });
            l += 1;
        } else {
            emit(&mut out, Window { start: l - 1, end: r - 2, truncated: false });
            l = match mode {
                PointerMode::OverlapOne => (r - 1).max(l + 1),
                PointerMode::StepOne => l + 1,
            };
        }
        r = l;
        total = 0;
    }
    if emit_tail && l <= n {
        emit(&mut out, Window { start: l - 1, end: n - 1, truncated: false });
    }
    out
}
