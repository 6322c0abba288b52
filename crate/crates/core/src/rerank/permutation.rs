use std::sync::LazyLock;

use regex::Regex;

static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d+)\]").unwrap());

/// Turns an arbitrary sequence of 0-based positions into a permutation of
/// `0..n`: out-of-range and repeated positions are dropped (first mention
/// wins) and unmentioned positions are appended in their original order.
pub fn repair_permutation(raw: impl IntoIterator<Item = i64>, n: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for p in raw {
        if p < 0 || p as u64 >= n as u64 {
            continue;
        }
        let p = p as usize;
        if !seen[p] {
            seen[p] = true;
            out.push(p);
        }
    }
    out.extend((0..n).filter(|&i| !seen[i]));
    out
}

/// Parses listwise model output such as `[2] > [1] > [3]` (1-based
/// identifiers) into a repaired 0-based permutation of the window.
pub fn parse_permutation(raw: &str, window_size: usize) -> Vec<usize> {
    let mentions = BRACKETED.captures_iter(raw).map(|c| {
        c[1].parse::<i64>().map(|v| v - 1).unwrap_or(-1)
    });
    repair_permutation(mentions, window_size)
}
