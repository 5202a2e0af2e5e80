//! Small numeric helpers shared with the companion IO crate.

use alloc::format;
use alloc::string::String;

/// Formats a float with 17 significant digits, enough to reproduce the exact
/// bit pattern when parsed back.
pub fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

/// Converts a duration in seconds to a whole number of frames (nearest).
pub fn seconds_to_frames(seconds: f64, frame_rate_hz: f64) -> usize {
    let t = seconds * frame_rate_hz;
    if t <= 0.0 {
        return 0;
    }
    libm::round(t) as usize
}

/// Converts a duration to the nearest odd window length, at least 1.
///
/// Majority-vote smoothing needs an odd window; when the rounded frame count
/// is even the nearer odd neighbour wins, ties going up.
pub fn odd_window_frames(seconds: f64, frame_rate_hz: f64) -> usize {
    let t = seconds * frame_rate_hz;
    if t <= 1.0 {
        return 1;
    }
    let k = libm::round(t) as usize;
    if k % 2 == 1 {
        return k;
    }
    let down = (k - 1) as f64;
    let up = (k + 1) as f64;
    if t - down < up - t {
        k - 1
    } else {
        k + 1
    }
}
