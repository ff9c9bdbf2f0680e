//! Brute-force reference computations of EC, EQ and RED, written without
//! the measures module so the two can check each other.

/// One event: `None` for success, `Some((error_type, error_count))` for a
/// failure.
pub type Event<'a> = Option<(&'a str, usize)>;

pub fn ec(events: &[Event<'_>]) -> u64 {
    events.iter().flatten().map(|&(_, c)| c as u64).sum()
}

/// EQ as an exact fraction (numerator, denominator) with weights 8 and 3.
/// Returns (0, 1) when there are no pairs.
pub fn eq_fraction(events: &[Event<'_>]) -> (u64, u64) {
    if events.len() < 2 {
        return (0, 1);
    }
    let mut num = 0u64;
    for i in 1..events.len() {
        if let (Some((a, _)), Some((b, _))) = (events[i - 1], events[i]) {
            num += if a == b { 11 } else { 8 };
        }
    }
    (num, 11 * (events.len() as u64 - 1))
}

pub fn eq(events: &[Event<'_>]) -> f64 {
    let (num, den) = eq_fraction(events);
    num as f64 / den as f64
}

/// Repetition counts of maximal same-type failure blocks of length >= 2,
/// found by checking every interval for maximality.
pub fn repeat_counts(events: &[Event<'_>]) -> Vec<usize> {
    let n = events.len();
    let same_block = |i: usize, j: usize| -> bool {
        let Some((t, _)) = events[i] else {
            return false;
        };
        (i..=j).all(|k| matches!(events[k], Some((u, _)) if u == t))
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !same_block(i, j) {
                continue;
            }
            let left_max = i == 0 || !same_block(i - 1, j);
            let right_max = j + 1 == n || !same_block(i, j + 1);
            if left_max && right_max {
                out.push(j - i);
            }
        }
    }
    out
}

pub fn red(events: &[Event<'_>]) -> f64 {
    repeat_counts(events)
        .into_iter()
        .map(|r| (r * r) as f64 / (r + 1) as f64)
        .sum()
}
