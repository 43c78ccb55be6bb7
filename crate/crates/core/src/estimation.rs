//! Power-law fit of afterpulse decay, half-life extraction and jitter FWHM.
//!
//! The decay model is `APP(t) = A0 * (t / t_ref)^-lambda + d`. After the
//! offset `d` is removed, every series is a straight line in
//! `(ln t, ln(APP - d))`. All series share one slope and differ only in
//! intercept, so each series is centred on its own centroid, the centred
//! points are stacked, and the dominant right singular vector of the stack
//! gives the common direction. That direction minimises the summed squared
//! orthogonal distances of all points to their series' line.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::experiments::AppSeries;

/// Reference time at which amplitudes and the half-life are anchored.
pub const DEFAULT_REFERENCE_TIME_US: f64 = 1.0;

/// Minimum series length for the tail-quartile offset estimate.
pub const MIN_OFFSET_POINTS: usize = 6;

const MAX_OFFSET_ITERATIONS: usize = 20_000;
const OFFSET_TOLERANCE: f64 = 1e-14;

/// Fitted parameters of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub label: String,
    /// A0, the excess APP at the reference time.
    pub amplitude: f64,
    /// d, the background offset that was subtracted.
    pub offset: f64,
    /// Points dropped because `APP - d <= 0`.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    /// Shared decay exponent.
    pub lambda: f64,
    pub series: Vec<SeriesFit>,
    /// Root of the summed squared orthogonal distances in log-log space.
    pub residual_norm: f64,
    pub reference_time_us: f64,
}

impl PowerLawFit {
    pub fn half_life_us(&self) -> Result<f64> {
        half_life(self.lambda, self.reference_time_us)
    }

    /// Model prediction for series `index` at hold-off `t_us`.
    pub fn predict(&self, index: usize, t_us: f64) -> f64 {
        let s = &self.series[index];
        s.amplitude * (t_us / self.reference_time_us).powf(-self.lambda) + s.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwhmResult {
    pub fwhm_ps: f64,
    pub peak_bin: usize,
    /// Left and right half-maximum crossings, in ps.
    pub half_max_crossings_ps: (f64, f64),
}

fn tail_len(n: usize) -> usize {
    n.div_ceil(4)
}

fn sorted_points(series: &AppSeries) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = series.points.iter().map(|p| (p.holdoff_us, p.app)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

/// Background offset as the mean APP of the longest-hold-off quartile,
/// clamped at zero.
///
/// Where the power law has not yet decayed at the longest hold-off this
/// overestimates `d`; [`fit_power_law`] uses it only as an upper bound.
pub fn estimate_offset(series: &AppSeries) -> Result<f64> {
    let n = series.points.len();
    if n < MIN_OFFSET_POINTS {
        return Err(Error::InsufficientData(format!(
            "series `{}` has {n} points, offset estimate needs {MIN_OFFSET_POINTS}",
            series.label
        )));
    }
    let pts = sorted_points(series);
    let tail = &pts[n - tail_len(n)..];
    let mean = tail.iter().map(|p| p.1).sum::<f64>() / tail.len() as f64;
    Ok(mean.max(0.0))
}

/// Orthogonal shared-slope line fit in log-log space, offsets given.
pub fn shared_slope_fit(
    series: &[AppSeries],
    offsets: &[f64],
    reference_time_us: f64,
) -> Result<PowerLawFit> {
    if series.is_empty() {
        return Err(Error::InsufficientData("no series to fit".into()));
    }
    if offsets.len() != series.len() {
        return Err(Error::InvalidArgument(format!(
            "{} offsets for {} series",
            offsets.len(),
            series.len()
        )));
    }
    if !(reference_time_us > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference time {reference_time_us} us must be > 0"
        )));
    }
    let log_ref = reference_time_us.ln();

    let mut centroids = Vec::with_capacity(series.len());
    let mut dropped = Vec::with_capacity(series.len());
    let mut rows: Vec<[f64; 2]> = Vec::new();
    for (s, &d) in series.iter().zip(offsets) {
        let mut pts = Vec::with_capacity(s.points.len());
        for p in &s.points {
            let excess = p.app - d;
            if excess > 0.0 && p.holdoff_us > 0.0 {
                pts.push([(p.holdoff_us).ln() - log_ref, excess.ln()]);
            }
        }
        dropped.push(s.points.len() - pts.len());
        if pts.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "series `{}` keeps {} points with APP above its offset, need 2",
                s.label,
                pts.len()
            )));
        }
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        let spread = pts.iter().map(|p| (p[0] - cx).abs() + (p[1] - cy).abs()).sum::<f64>();
        if spread == 0.0 {
            return Err(Error::Rank(format!(
                "all points of series `{}` coincide",
                s.label
            )));
        }
        rows.extend(pts.iter().map(|p| [p[0] - cx, p[1] - cy]));
        centroids.push((cx, cy));
    }

    let m = DMatrix::from_fn(rows.len(), 2, |r, c| rows[r][c]);
    let svd = m.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Rank("singular value decomposition did not converge".into()))?;
    let (major, minor) = if svd.singular_values[0] >= svd.singular_values[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let (dx, dy) = (v_t[(major, 0)], v_t[(major, 1)]);
    if dx.abs() <= 1e-12 * dy.abs() {
        return Err(Error::Rank(
            "points are spread only along APP; hold-offs do not vary".into(),
        ));
    }
    let slope = dy / dx;
    if !(slope < 0.0) {
        return Err(Error::NonDecaying { slope });
    }
    let lambda = -slope;

    let fits = series
        .iter()
        .zip(offsets)
        .zip(centroids.iter().zip(dropped))
        .map(|((s, &d), (&(cx, cy), dropped))| SeriesFit {
            label: s.label.clone(),
            // Intercept of the line through the centroid, at log t_ref = 0.
            amplitude: (cy + lambda * cx).exp(),
            offset: d,
            dropped,
        })
        .collect();

    Ok(PowerLawFit {
        lambda,
        series: fits,
        residual_norm: svd.singular_values[minor],
        reference_time_us,
    })
}

/// Two-stage fit with self-consistent offsets.
///
/// Offsets start at zero and are repeatedly replaced by the mean residual
/// `APP - A0 (t/t_ref)^-lambda` over each series' longest-hold-off quartile,
/// bounded above by [`estimate_offset`]. Starting from the lower bound the
/// iteration climbs monotonically to the smallest consistent offset.
pub fn fit_power_law(series: &[AppSeries], reference_time_us: f64) -> Result<PowerLawFit> {
    let upper = series.iter().map(estimate_offset).collect::<Result<Vec<_>>>()?;
    let sorted: Vec<Vec<(f64, f64)>> = series.iter().map(sorted_points).collect();

    let mut offsets = vec![0.0; series.len()];
    let mut fit = shared_slope_fit(series, &offsets, reference_time_us)?;
    for _ in 0..MAX_OFFSET_ITERATIONS {
        let mut change = 0.0f64;
        for (k, pts) in sorted.iter().enumerate() {
            let tail = &pts[pts.len() - tail_len(pts.len())..];
            let resid = tail
                .iter()
                .map(|&(t, app)| app - (fit.predict(k, t) - fit.series[k].offset))
                .sum::<f64>()
                / tail.len() as f64;
            let next = resid.clamp(0.0, upper[k]);
            change = change.max((next - offsets[k]).abs());
            offsets[k] = next;
        }
        fit = shared_slope_fit(series, &offsets, reference_time_us)?;
        if change <= OFFSET_TOLERANCE {
            break;
        }
    }
    Ok(fit)
}

/// Time at which the power law falls to half its value at `reference_time_us`.
pub fn half_life(lambda: f64, reference_time_us: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(reference_time_us > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "half-life needs lambda > 0 and t_ref > 0, got {lambda} and {reference_time_us}"
        )));
    }
    Ok(reference_time_us * 2f64.powf(1.0 / lambda))
}

/// Full width at half maximum of a binned response.
///
/// Bin `i` sits at `i * bin_width_ps`; heights beyond either end count as
/// zero, so a single occupied bin has width `bin_width_ps`. Crossings are
/// the outermost half-maximum intersections, linearly interpolated.
pub fn fwhm(histogram: &[f64], bin_width_ps: f64) -> Result<FwhmResult> {
    if !(bin_width_ps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bin width {bin_width_ps} ps must be > 0"
        )));
    }
    let (peak_bin, peak) = histogram
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, h)| if h > acc.1 { (i, h) } else { acc });
    if histogram.is_empty() || !(peak > 0.0) {
        return Err(Error::EmptyData("histogram has no positive bin".into()));
    }
    let half = peak / 2.0;
    let height = |i: isize| -> f64 {
        if i < 0 || i as usize >= histogram.len() {
            0.0
        } else {
            histogram[i as usize]
        }
    };
    // Interpolated crossing between bins `a` (below half) and `b` (at or above).
    let cross = |a: isize, b: isize| -> f64 {
        let (ha, hb) = (height(a), height(b));
        let frac = (half - ha) / (hb - ha);
        (a as f64 + frac * (b - a) as f64) * bin_width_ps
    };

    let first = histogram.iter().position(|&h| h >= half).unwrap() as isize;
    let last = histogram.iter().rposition(|&h| h >= half).unwrap() as isize;
    let left = cross(first - 1, first);
    let right = cross(last + 1, last);
    Ok(FwhmResult {
        fwhm_ps: right - left,
        peak_bin,
        half_max_crossings_ps: (left, right),
    })
}

/// [`fwhm`] over integer bin counts.
pub fn fwhm_counts(histogram: &[u64], bin_width_ps: f64) -> Result<FwhmResult> {
    let h: Vec<f64> = histogram.iter().map(|&c| c as f64).collect();
    fwhm(&h, bin_width_ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::AppPoint;
    use proptest::prelude::*;

    fn series(label: &str, t: &[f64], app: impl Fn(f64) -> f64) -> AppSeries {
        AppSeries {
            label: label.into(),
            points: t
                .iter()
                .map(|&t| AppPoint {
                    holdoff_us: t,
                    app: app(t),
                    app_sigma: 0.0,
                })
                .collect(),
        }
    }

    fn log_spaced(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn offset_of_pure_power_law_is_its_tail() {
        let t = log_spaced(12, 1.0, 1000.0);
        let s = series("a", &t, |t| 0.5 * t.powf(-0.916));
        let d = estimate_offset(&s).unwrap();
        // Largest tail value bounds the estimate.
        assert!(d > 0.0 && d <= 0.5 * t[8].powf(-0.916));
    }

    #[test]
    fn offset_of_constant_series() {
        let t = log_spaced(8, 1.0, 100.0);
        let s = series("a", &t, |_| 0.01);
        assert!((estimate_offset(&s).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn offset_tail_quartile_by_hand() {
        // 12 points -> the 3 longest hold-offs: 100^(9/11), 100^(10/11), 100.
        let t = log_spaced(12, 1.0, 100.0);
        let s = series("a", &t, |t| 0.5 * t.powf(-0.916) + 0.005);
        let by_hand = [9.0, 10.0, 11.0]
            .iter()
            .map(|k| 0.5 * 100f64.powf(k / 11.0).powf(-0.916) + 0.005)
            .sum::<f64>()
            / 3.0;
        let d = estimate_offset(&s).unwrap();
        assert!((d - by_hand).abs() < 1e-15);
        assert!((d - 0.01634).abs() < 1e-4);
    }

    #[test]
    fn offset_needs_six_points() {
        let s = series("a", &[1.0, 2.0, 3.0, 4.0, 5.0], |_| 0.1);
        assert!(matches!(estimate_offset(&s), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn offset_clamps_at_zero() {
        let s = series("a", &log_spaced(6, 1.0, 10.0), |_| -0.02);
        assert_eq!(estimate_offset(&s).unwrap(), 0.0);
    }

    #[test]
    fn exact_parallel_lines() {
        let t = log_spaced(12, 1.0, 100.0);
        let a = series("4ns", &t, |t| 0.507 * t.powf(-0.916));
        let b = series("2ns", &t, |t| 0.399 * t.powf(-0.916));
        let fit = shared_slope_fit(&[a, b], &[0.0, 0.0], 1.0).unwrap();
        assert!((fit.lambda - 0.916).abs() < 1e-12);
        assert!((fit.series[0].amplitude - 0.507).abs() < 1e-12);
        assert!((fit.series[1].amplitude - 0.399).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn two_point_line() {
        let s = series("a", &[1.0, 10.0], |t| 1.0 / t);
        let fit = shared_slope_fit(&[s], &[0.0], 1.0).unwrap();
        assert!((fit.lambda - 1.0).abs() < 1e-12);
        assert!((fit.series[0].amplitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn points_below_offset_are_dropped_and_reported() {
        let t = [1.0, 2.0, 4.0, 8.0];
        let s = series("a", &t, |t| if t > 5.0 { 0.001 } else { 0.5 / t });
        let fit = shared_slope_fit(&[s], &[0.01], 1.0).unwrap();
        assert_eq!(fit.series[0].dropped, 1);
    }

    #[test]
    fn degenerate_and_rising_data_are_rejected() {
        let s = series("a", &[2.0, 2.0, 2.0], |_| 0.3);
        assert!(matches!(
            shared_slope_fit(&[s], &[0.0], 1.0),
            Err(Error::Rank(_))
        ));
        let s = series("a", &[1.0, 10.0, 100.0], |t| 0.01 * t);
        assert!(matches!(
            shared_slope_fit(&[s], &[0.0], 1.0),
            Err(Error::NonDecaying { .. })
        ));
        let s = series("a", &[1.0], |_| 0.3);
        assert!(matches!(
            shared_slope_fit(&[s], &[0.0], 1.0),
            Err(Error::InsufficientData(_))
        ));
    }

    /// Summed squared orthogonal distance of all series' points to lines
    /// with common slope `m` and intercepts `b`.
    fn orthogonal_cost(pts: &[Vec<(f64, f64)>], m: f64, b: &[f64]) -> f64 {
        let norm = 1.0 + m * m;
        pts.iter()
            .zip(b)
            .map(|(s, &b)| s.iter().map(|&(x, y)| (y - m * x - b).powi(2) / norm).sum::<f64>())
            .sum()
    }

    #[test]
    fn noisy_fit_matches_grid_search() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let t = log_spaced(12, 1.0, 100.0);
        let mk = |label: &str, a0: f64, rng: &mut rand_chacha::ChaCha8Rng| AppSeries {
            label: label.into(),
            points: t
                .iter()
                .map(|&t| AppPoint {
                    holdoff_us: t,
                    app: a0 * t.powf(-0.916) * (1.0 + noise.sample(rng)),
                    app_sigma: 0.0,
                })
                .collect(),
        };
        let data = [mk("4ns", 0.507, &mut rng), mk("2ns", 0.399, &mut rng)];
        let fit = shared_slope_fit(&data, &[0.0, 0.0], 1.0).unwrap();
        assert!((fit.lambda - 0.916).abs() < 0.05);
        assert!((fit.series[0].amplitude / 0.507 - 1.0).abs() < 0.1);
        assert!((fit.series[1].amplitude / 0.399 - 1.0).abs() < 0.1);

        // Brute force over slope and each intercept independently.
        let pts: Vec<Vec<(f64, f64)>> = data
            .iter()
            .map(|s| s.points.iter().map(|p| (p.holdoff_us.ln(), p.app.ln())).collect())
            .collect();
        let mut best = (f64::INFINITY, 0.0, vec![0.0; 2]);
        for i in 0..=600 {
            let lambda = 0.75 + 0.3 * i as f64 / 600.0;
            let m = -lambda;
            let mut b = vec![0.0; 2];
            for k in 0..2 {
                let mut bk = (f64::INFINITY, 0.0);
                for j in 0..=800 {
                    let cand = -1.4 + 0.8 * j as f64 / 800.0;
                    let c = orthogonal_cost(&pts[k..k + 1], m, &[cand]);
                    if c < bk.0 {
                        bk = (c, cand);
                    }
                }
                b[k] = bk.1;
            }
            let c = orthogonal_cost(&pts, m, &b);
            if c < best.0 {
                best = (c, lambda, b);
            }
        }
        assert!((fit.lambda - best.1).abs() <= 1e-3, "{} vs {}", fit.lambda, best.1);
        for k in 0..2 {
            assert!((fit.series[k].amplitude.ln() - best.2[k]).abs() <= 2e-3);
        }
        assert!(fit.residual_norm.powi(2) <= best.0 + 1e-12);
    }

    #[test]
    fn self_consistent_offset_recovers_truth() {
        let t = log_spaced(12, 1.0, 100.0);
        let a = series("4ns", &t, |t| 0.507 * t.powf(-0.916) + 0.005);
        let b = series("2ns", &t, |t| 0.399 * t.powf(-0.916) + 0.005);
        let fit = fit_power_law(&[a, b], 1.0).unwrap();
        assert!((fit.lambda - 0.916).abs() < 1e-6, "{}", fit.lambda);
        for (s, a0) in fit.series.iter().zip([0.507, 0.399]) {
            assert!((s.amplitude - a0).abs() < 1e-6);
            assert!((s.offset - 0.005).abs() < 1e-7);
        }
    }

    #[test]
    fn half_life_examples() {
        assert!((half_life(1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((half_life(0.5, 1.0).unwrap() - 4.0).abs() < 1e-15);
        let h = half_life(0.916, 1.0).unwrap();
        assert!((h - 2f64.powf(1.0 / 0.916)).abs() < 1e-15);
        assert!((h - 2.13).abs() < 0.005);
        assert!(half_life(0.0, 1.0).is_err());
        assert!(half_life(1.0, -1.0).is_err());
    }

    #[test]
    fn fwhm_of_triangle() {
        let r = fwhm(&[1.0, 2.0, 3.0, 2.0, 1.0], 55.0).unwrap();
        assert_eq!(r.peak_bin, 2);
        assert!((r.half_max_crossings_ps.0 - 27.5).abs() < 1e-12);
        assert!((r.half_max_crossings_ps.1 - 192.5).abs() < 1e-12);
        assert!((r.fwhm_ps - 165.0).abs() < 1e-12);
    }

    #[test]
    fn fwhm_of_single_bin() {
        let r = fwhm_counts(&[0, 0, 40, 0], 55.0).unwrap();
        assert!((r.fwhm_ps - 55.0).abs() < 1e-12);
        let r = fwhm_counts(&[7], 55.0).unwrap();
        assert!((r.fwhm_ps - 55.0).abs() < 1e-12);
    }

    #[test]
    fn fwhm_uses_outermost_crossings() {
        // Noise dip below half max inside the peak region.
        let r = fwhm(&[0.0, 10.0, 4.0, 9.0, 0.0], 10.0).unwrap();
        assert!((r.half_max_crossings_ps.0 - 5.0).abs() < 1e-12);
        // Between bin 3 (height 9) and the zero at bin 4.
        assert!((r.half_max_crossings_ps.1 - (40.0 - 10.0 * 5.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn fwhm_rejects_empty() {
        assert!(matches!(fwhm_counts(&[0, 0, 0], 55.0), Err(Error::EmptyData(_))));
        assert!(fwhm(&[], 55.0).is_err());
    }

    #[test]
    fn fwhm_of_gaussian_samples() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let g = Normal::new(2000.0, 127.0).unwrap();
        let mut h = vec![0u64; 80];
        for _ in 0..100_000 {
            let x: f64 = g.sample(&mut rng);
            h[(x / 55.0).floor() as usize] += 1;
        }
        let r = fwhm_counts(&h, 55.0).unwrap();
        let ideal = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * 127.0;
        assert!((ideal - 299.06).abs() < 0.01);
        assert!((r.fwhm_ps - ideal).abs() < 30.0, "{}", r.fwhm_ps);
    }

    proptest! {
        #[test]
        fn fit_is_scale_equivariant(c in 0.05f64..20.0, lambda in 0.3f64..2.0, a0 in 0.01f64..2.0) {
            let t = log_spaced(9, 1.0, 100.0);
            let mk = |scale: f64| vec![
                series("a", &t.iter().map(|x| x * scale).collect::<Vec<_>>(), |s| a0 * (s / scale).powf(-lambda)),
                series("b", &t.iter().map(|x| x * scale).collect::<Vec<_>>(), |s| 0.6 * a0 * (s / scale).powf(-lambda)),
            ];
            let base = shared_slope_fit(&mk(1.0), &[0.0, 0.0], 1.0).unwrap();
            let scaled = shared_slope_fit(&mk(c), &[0.0, 0.0], 1.0).unwrap();
            prop_assert!((base.lambda - scaled.lambda).abs() < 1e-9);
            for (b, s) in base.series.iter().zip(&scaled.series) {
                let expect = b.amplitude * c.powf(base.lambda);
                prop_assert!((s.amplitude - expect).abs() <= 1e-9 * expect);
            }
        }

        #[test]
        fn noiseless_data_is_recovered_exactly(
            lambda in 0.2f64..3.0,
            a in 0.001f64..5.0,
            b in 0.001f64..5.0,
            n in 2usize..20,
        ) {
            let t = log_spaced(n, 1.0, 100.0);
            let data = [series("a", &t, |t| a * t.powf(-lambda)), series("b", &t, |t| b * t.powf(-lambda))];
            let fit = shared_slope_fit(&data, &[0.0, 0.0], 1.0).unwrap();
            prop_assert!(fit.residual_norm < 1e-9);
            prop_assert!((fit.lambda - lambda).abs() <= 1e-9 * lambda);
            prop_assert!((fit.series[0].amplitude - a).abs() <= 1e-9 * a);
            prop_assert!((fit.series[1].amplitude - b).abs() <= 1e-9 * b);
        }

        #[test]
        fn series_order_is_irrelevant(lambda in 0.3f64..2.0, noise in prop::collection::vec(-0.05f64..0.05, 16)) {
            let t = log_spaced(8, 1.0, 50.0);
            let a = AppSeries { label: "a".into(), points: t.iter().zip(&noise[..8]).map(|(&t, e)| AppPoint { holdoff_us: t, app: 0.5 * t.powf(-lambda) * (1.0 + e), app_sigma: 0.0 }).collect() };
            let b = AppSeries { label: "b".into(), points: t.iter().zip(&noise[8..]).map(|(&t, e)| AppPoint { holdoff_us: t, app: 0.2 * t.powf(-lambda) * (1.0 + e), app_sigma: 0.0 }).collect() };
            let ab = shared_slope_fit(&[a.clone(), b.clone()], &[0.0, 0.0], 1.0).unwrap();
            let ba = shared_slope_fit(&[b, a], &[0.0, 0.0], 1.0).unwrap();
            prop_assert!((ab.lambda - ba.lambda).abs() < 1e-12);
            prop_assert!((ab.series[0].amplitude - ba.series[1].amplitude).abs() < 1e-12);
            prop_assert_eq!(&ab.series[1].label, &ba.series[0].label);
        }

        #[test]
        fn half_life_scales_and_decreases(l1 in 0.1f64..5.0, l2 in 0.1f64..5.0, t in 0.01f64..100.0) {
            prop_assert!((half_life(l1, 2.0 * t).unwrap() - 2.0 * half_life(l1, t).unwrap()).abs() < 1e-9 * half_life(l1, 2.0 * t).unwrap());
            if l1 < l2 {
                prop_assert!(half_life(l1, t).unwrap() > half_life(l2, t).unwrap());
            }
        }

        #[test]
        fn fwhm_ignores_height_scale(h in prop::collection::vec(0.0f64..100.0, 1..40), k in 0.01f64..1e3) {
            prop_assume!(h.iter().any(|&x| x > 0.0));
            let a = fwhm(&h, 55.0).unwrap();
            let scaled: Vec<f64> = h.iter().map(|x| x * k).collect();
            let b = fwhm(&scaled, 55.0).unwrap();
            prop_assert!((a.fwhm_ps - b.fwhm_ps).abs() < 1e-9 * a.fwhm_ps.max(1.0));
            prop_assert!(a.half_max_crossings_ps.0 <= a.peak_bin as f64 * 55.0);
            prop_assert!(a.half_max_crossings_ps.1 >= a.peak_bin as f64 * 55.0);
        }
    }
}
