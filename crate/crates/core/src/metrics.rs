//! Per-session metrics computed from a [`SessionLog`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::SessionLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub ego_speed_std: f64,
    pub platoon_speed_std: f64,
    pub braking_instances: u32,
    pub jam_lifetime: f64,
    pub jam_dissipated: bool,
    pub throughput: f64,
    pub min_gap_after_failure: Option<f64>,
    pub collision: bool,
    /// Mean ego gap over the 100 s before the failure (or the end), m.
    pub late_mean_gap: f64,
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
pub fn sample_std(xs: impl IntoIterator<Item = f64>) -> f64 {
    // Welford
    let (mut n, mut mean, mut m2) = (0u64, 0.0, 0.0);
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        0.0
    } else {
        (m2 / (n - 1) as f64).sqrt()
    }
}

/// Row range `[lo, hi)` whose times fall in `[start, end)`.
fn window_rows(log: &SessionLog, start: f64, end: f64) -> Result<(usize, usize)> {
    let half = 0.5 * log.config.dt;
    let covered = match (log.time.first(), log.time.last()) {
        (Some(&first), Some(&last)) => first <= start + half && last + log.config.dt >= end - half,
        _ => false,
    };
    if !covered || !(start < end) {
        return Err(Error::WindowOutsideLog {
            start,
            end,
            log_end: log.time.last().copied().unwrap_or(0.0) + log.config.dt,
        });
    }
    let lo = log.time.partition_point(|&t| t < start - half);
    let hi = log.time.partition_point(|&t| t < end - half);
    Ok((lo, hi))
}

/// Default stability window: after the transient, before the failure time.
pub fn stability_window(log: &SessionLog) -> (f64, f64) {
    (log.config.transient, log.config.duration)
}

pub fn ego_speed_std(log: &SessionLog, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window_rows(log, window.0, window.1)?;
    Ok(sample_std(log.ego.speed[lo..hi].iter().copied()))
}

pub fn platoon_speed_std(log: &SessionLog, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window_rows(log, window.0, window.1)?;
    let n = log.speeds.len();
    let total: f64 = log
        .speeds
        .iter()
        .map(|s| sample_std(s[lo..hi].iter().copied()))
        .sum();
    Ok(total / n as f64)
}

/// Rising edges of a pedal signal through `threshold`, merging edges closer
/// than `debounce` seconds to the previous counted one.
pub fn count_presses(time: &[f64], signal: &[f64], threshold: f64, debounce: f64) -> u32 {
    let mut count = 0;
    let mut last: Option<f64> = None;
    let mut above = false;
    for (&t, &s) in time.iter().zip(signal) {
        let now = s >= threshold;
        if now && !above && last.is_none_or(|l| t - l >= debounce - 1e-9) {
            count += 1;
            last = Some(t);
        }
        above = now;
    }
    count
}

/// Ego brake presses over `[0, duration)`.
pub fn braking_instances(log: &SessionLog) -> u32 {
    let m = log.config.metrics;
    let hi = log.time.partition_point(|&t| t < log.config.duration - 0.5 * log.config.dt);
    count_presses(&log.time[..hi], &log.ego.s_brake[..hi], m.brake_threshold, m.brake_debounce)
}

/// Time from the end of the transient until no car is standing, capped.
pub fn jam_lifetime(log: &SessionLog) -> f64 {
    let cfg = &log.config;
    let cap = cfg.metrics.jam_lifetime_cap;
    let eps = cfg.metrics.standstill_speed;
    let half = 0.5 * cfg.dt;
    for (k, &t) in log.time.iter().enumerate() {
        if t < cfg.transient - half {
            continue;
        }
        if t > cfg.duration + half {
            break;
        }
        if log.speeds.iter().all(|s| s[k] > eps) {
            return (t - cfg.transient).clamp(0.0, cap);
        }
    }
    cap
}

/// Front-bumper crossings of the ring origin over `[0, duration]`, per minute.
pub fn throughput(log: &SessionLog) -> f64 {
    if log.is_empty() {
        return 0.0;
    }
    let cfg = &log.config;
    let last = log.time.partition_point(|&t| t <= cfg.duration + 0.5 * cfg.dt) - 1;
    let c = log.circumference;
    let crossings: f64 = log
        .positions
        .iter()
        .map(|p| (p[last] / c).floor() - (p[0] / c).floor())
        .sum();
    crossings / cfg.metrics.throughput_minutes
}

/// Smallest ego gap within the failure window; zero after a collision.
pub fn min_gap_after_failure(log: &SessionLog) -> Result<f64> {
    let t_fail = log.failure_time().ok_or(Error::NoFailureEvent)?;
    if log.collided() {
        return Ok(0.0);
    }
    let end = t_fail + log.config.failure_window;
    let half = 0.5 * log.config.dt;
    let lo = log.time.partition_point(|&t| t < t_fail - half);
    let hi = log.time.partition_point(|&t| t <= end + half);
    Ok(log.ego.gap[lo..hi]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(0.0))
}

/// Mean ego gap over `[end − 100 s, end)` where `end` is the failure time.
pub fn late_mean_gap(log: &SessionLog) -> f64 {
    let end = log.config.duration.min(log.time.last().copied().unwrap_or(0.0));
    let start = (end - 100.0).max(0.0);
    let lo = log.time.partition_point(|&t| t < start);
    let hi = log.time.partition_point(|&t| t < end);
    let gaps = &log.ego.gap[lo..hi];
    if gaps.is_empty() {
        return 0.0;
    }
    gaps.iter().sum::<f64>() / gaps.len() as f64
}

/// All session metrics. When a collision ends the log before the failure
/// time, the stability window is truncated at the collision; if it ends
/// before the transient is over, the speed deviations are NaN.
pub fn compute_metrics(log: &SessionLog) -> Result<SessionMetrics> {
    let (start, mut end) = stability_window(log);
    if let Some(&last) = log.time.last() {
        end = end.min(last + log.config.dt);
    }
    let window = (start, end);
    let (ego_std, platoon_std) = if end > start {
        (ego_speed_std(log, window)?, platoon_speed_std(log, window)?)
    } else {
        (f64::NAN, f64::NAN)
    };
    let jam = jam_lifetime(log);
    Ok(SessionMetrics {
        ego_speed_std: ego_std,
        platoon_speed_std: platoon_std,
        braking_instances: braking_instances(log),
        jam_lifetime: jam,
        jam_dissipated: jam < log.config.metrics.jam_lifetime_cap,
        throughput: throughput(log),
        min_gap_after_failure: if log.config.condition.has_failure() {
            Some(min_gap_after_failure(log)?)
        } else {
            None
        },
        collision: log.collided(),
        late_mean_gap: late_mean_gap(log),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::log::{EndReason, EventKind};
    use crate::pedal::Condition;
    use approx::assert_abs_diff_eq;

    /// Synthetic log of `rows` steps at 10 ms for `n` vehicles.
    fn synthetic(rows: usize, n: usize, speed: impl Fn(usize, f64) -> f64) -> SessionLog {
        let cfg = ScenarioConfig::default();
        let c = 263.893_782_9;
        let mut log = SessionLog::new(cfg, c, vec![4.5; n]);
        let mut pos = vec![0.0; n];
        for (i, p) in pos.iter_mut().enumerate() {
            *p = -(i as f64) * c / n as f64;
        }
        for k in 0..rows {
            let t = k as f64 * 0.01;
            log.time.push(t);
            for (i, p) in pos.iter_mut().enumerate() {
                let v = speed(i, t);
                log.speeds[i].push(v);
                log.positions[i].push(*p);
                *p += v * 0.01;
            }
            log.ego.speed.push(speed(0, t));
            log.ego.s_brake.push(0.0);
            log.ego.gap.push(10.0);
        }
        log
    }

    #[test]
    fn sample_std_basics() {
        assert_eq!(sample_std([4.0; 10]), 0.0);
        assert_abs_diff_eq!(sample_std([1.0, 2.0, 3.0, 4.0]), 1.290_994_448_7, epsilon = 1e-9);
        let alt = (0..40_000).map(|k| if k % 2 == 0 { 3.0 } else { 5.0 });
        assert_abs_diff_eq!(sample_std(alt), 1.0, epsilon = 1e-4);
        let shifted = (0..40_000).map(|k| if k % 2 == 0 { 13.0 } else { 15.0 });
        assert_abs_diff_eq!(sample_std(shifted), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn speed_std_window() {
        let log = synthetic(48_000, 3, |_, _| 4.0);
        assert_eq!(ego_speed_std(&log, (75.0, 480.0)).unwrap(), 0.0);
        assert_eq!(platoon_speed_std(&log, (75.0, 480.0)).unwrap(), 0.0);
        assert!(ego_speed_std(&log, (75.0, 500.0)).is_err());
    }

    #[test]
    fn platoon_average_of_one_oscillator() {
        let osc = |i: usize, t: f64| {
            if i == 5 {
                if ((t * 100.0).round() as i64) % 2 == 0 { 3.0 } else { 5.0 }
            } else {
                4.0
            }
        };
        let log = synthetic(48_000, 21, osc);
        let single = sample_std(log.speeds[5][7500..48_000].iter().copied());
        let p = platoon_speed_std(&log, (75.0, 480.0)).unwrap();
        assert_abs_diff_eq!(p, single / 21.0, epsilon = 1e-12);

        let mut permuted = log.clone();
        permuted.speeds.swap(5, 11);
        assert_abs_diff_eq!(platoon_speed_std(&permuted, (75.0, 480.0)).unwrap(), p, epsilon = 1e-15);
    }

    #[test]
    fn press_counting() {
        let time: Vec<f64> = (0..300).map(|k| k as f64 * 0.01).collect();
        assert_eq!(count_presses(&time, &[0.0; 300], 0.02, 0.2), 0);
        let hold: Vec<f64> = (0..300).map(|k| if (50..200).contains(&k) { 0.5 } else { 0.0 }).collect();
        assert_eq!(count_presses(&time, &hold, 0.02, 0.2), 1);
        // two presses starting 0.1 s apart
        let double: Vec<f64> = (0..300)
            .map(|k| if (50..55).contains(&k) || (60..90).contains(&k) { 0.5 } else { 0.0 })
            .collect();
        assert_eq!(count_presses(&time, &double, 0.02, 0.2), 1);
        let apart: Vec<f64> = (0..300)
            .map(|k| if (50..80).contains(&k) || (150..180).contains(&k) { 0.5 } else { 0.0 })
            .collect();
        assert_eq!(count_presses(&time, &apart, 0.02, 0.2), 2);
    }

    #[test]
    fn jam_lifetime_cases() {
        let moving = synthetic(48_000, 3, |_, _| 4.0);
        assert_eq!(jam_lifetime(&moving), 0.0);
        let stuck = synthetic(48_000, 3, |i, _| if i == 1 { 0.0 } else { 4.0 });
        assert_eq!(jam_lifetime(&stuck), 405.0);
        let late = synthetic(48_000, 3, |i, t| if i == 2 && t < 200.0 { 0.0 } else { 4.0 });
        assert_abs_diff_eq!(jam_lifetime(&late), 125.0, epsilon = 1e-9);
    }

    #[test]
    fn throughput_steady_platoon() {
        let still = synthetic(48_001, 21, |_, _| 0.0);
        assert_eq!(throughput(&still), 0.0);
        let log = synthetic(48_001, 21, |_, _| 4.0);
        let expected = 21.0 * (4.0 * 480.0 / 263.893_782_9) / 8.0;
        assert!((throughput(&log) - expected).abs() <= 21.0 / 8.0, "{} vs {expected}", throughput(&log));
        assert_abs_diff_eq!(expected, 19.1, epsilon = 0.05);
    }

    #[test]
    fn min_gap_cases() {
        let mut log = synthetic(49_500, 2, |_, _| 4.0);
        log.config = log.config.clone().with_condition(Condition::Haptic);
        assert!(matches!(min_gap_after_failure(&log), Err(Error::NoFailureEvent)));

        log.push_event(480.0, EventKind::FailureOnset);
        for (k, g) in log.ego.gap.iter_mut().enumerate() {
            let t = k as f64 * 0.01;
            // V shape with its minimum 1.7 m at t = 486
            *g = 1.7 + (t - 486.0).abs();
        }
        assert_abs_diff_eq!(min_gap_after_failure(&log).unwrap(), 1.7, epsilon = 1e-9);

        for (k, g) in log.ego.gap.iter_mut().enumerate() {
            *g = 3.0 + k as f64 * 1e-4;
        }
        assert_abs_diff_eq!(min_gap_after_failure(&log).unwrap(), log.ego.gap[48_000], epsilon = 1e-12);

        log.end_reason = EndReason::Collision;
        assert_eq!(min_gap_after_failure(&log).unwrap(), 0.0);
    }
}
