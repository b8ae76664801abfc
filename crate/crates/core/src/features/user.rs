use crate::data::UserProfile;

/// `ceil(log10(max(c, 1)))`, exactly.
fn ceil_log10(c: u64) -> i32 {
    let c = u128::from(c.max(1));
    let mut k = 0;
    let mut p: u128 = 1;
    while p < c {
        p *= 10;
        k += 1;
    }
    k
}

/// `floor(log10(a / b))` for positive integers, exactly.
fn floor_log10_ratio(a: u64, b: u64) -> i32 {
    let (a, b) = (u128::from(a.max(1)), u128::from(b.max(1)));
    if a >= b {
        let mut k = 0;
        let mut scaled = b;
        while scaled * 10 <= a {
            scaled *= 10;
            k += 1;
        }
        k
    } else {
        let mut m = 0;
        let mut scaled = a;
        while scaled < b {
            scaled *= 10;
            m += 1;
        }
        -m
    }
}

/// `[tweet count, listed count, follow ratio, verified]` on log10 scales.
///
/// Counts use `ceil(log10(max(c, 1)))`; the follow ratio uses
/// `floor(log10(max(followers, 1) / max(following, 1)))`.
pub fn user_features(u: &UserProfile) -> [f64; 4] {
    [
        f64::from(ceil_log10(u.tweet_count)),
        f64::from(ceil_log10(u.listed_count)),
        f64::from(floor_log10_ratio(u.followers, u.following)),
        if u.verified { 1.0 } else { 0.0 },
    ]
}
