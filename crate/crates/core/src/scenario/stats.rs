//! Throughput statistics aggregated UE -> run -> category.
//!
//! Each UE gets a mean and a sample standard deviation (n - 1) over its
//! post-warmup samples. A run averages its UEs' means and SDs; a category
//! averages its runs.

use thiserror::Error;

use crate::domain::SimTime;
use crate::ran::ThroughputSample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least 2 samples after the warmup cutoff, got {0}")]
    TooFewSamples(usize),
    #[error("no UE statistics to aggregate")]
    NoUes,
    #[error("no runs to aggregate")]
    NoRuns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeStats {
    pub mean: f64,
    pub sd: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryStats {
    pub category: String,
    pub run_means: Vec<f64>,
    pub run_sds: Vec<f64>,
    pub avg_mean: f64,
    pub avg_sd: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Welford running mean and sum of squared deviations. Exact for constant
/// input, so a flat series has an SD of exactly zero.
fn welford(xs: &[f64]) -> (f64, f64) {
    let mut m = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - m;
        m += delta / (i + 1) as f64;
        m2 += delta * (x - m);
    }
    (m, m2)
}

/// Sample standard deviation with the n - 1 denominator.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let (_, m2) = welford(xs);
    (m2 / (xs.len() as f64 - 1.0)).sqrt()
}

/// Statistics of one UE's series, using only samples at or after `cutoff`.
pub fn per_ue_stats<'a, I>(series: I, cutoff: SimTime) -> Result<UeStats, StatsError>
where
    I: IntoIterator<Item = &'a ThroughputSample>,
{
    let values: Vec<f64> = series
        .into_iter()
        .filter(|s| s.time >= cutoff)
        .map(|s| s.throughput_mbps)
        .collect();
    stats_of(&values)
}

pub fn stats_of(values: &[f64]) -> Result<UeStats, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFewSamples(values.len()));
    }
    let (m, m2) = welford(values);
    Ok(UeStats {
        mean: m,
        sd: (m2 / (values.len() as f64 - 1.0)).sqrt(),
        samples: values.len(),
    })
}

pub fn run_stats<'a, I>(per_ue: I) -> Result<RunStats, StatsError>
where
    I: IntoIterator<Item = &'a UeStats>,
{
    let (means, sds): (Vec<f64>, Vec<f64>) = per_ue.into_iter().map(|s| (s.mean, s.sd)).unzip();
    if means.is_empty() {
        return Err(StatsError::NoUes);
    }
    Ok(RunStats {
        mean: mean(&means),
        sd: mean(&sds),
    })
}

pub fn category_stats(label: &str, runs: &[RunStats]) -> Result<CategoryStats, StatsError> {
    if runs.is_empty() {
        return Err(StatsError::NoRuns);
    }
    let run_means: Vec<f64> = runs.iter().map(|r| r.mean).collect();
    let run_sds: Vec<f64> = runs.iter().map(|r| r.sd).collect();
    Ok(CategoryStats {
        category: label.to_owned(),
        avg_mean: mean(&run_means),
        avg_sd: mean(&run_sds),
        run_means,
        run_sds,
    })
}

/// Percentage by which `cmf` lowers the average SD relative to `no_cm`,
/// rounded to one decimal. `None` when the baseline SD is zero.
pub fn sd_reduction(no_cm: &CategoryStats, cmf: &CategoryStats) -> Option<f64> {
    if no_cm.avg_sd <= 0.0 {
        return None;
    }
    let pct = 100.0 * (1.0 - cmf.avg_sd / no_cm.avg_sd);
    Some((pct * 10.0).round() / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Vec<ThroughputSample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| ThroughputSample {
                time: i as SimTime * 1_000,
                ue_id: "ue-0".into(),
                slice: "A".into(),
                throughput_mbps: v,
            })
            .collect()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ue_stats_use_sample_sd() {
        let s = per_ue_stats(&series(&[10.0, 24.0, 10.0, 24.0]), 0).unwrap();
        assert_eq!(s.mean, 17.0);
        // sqrt(4 * 49 / 3)
        assert!(close(s.sd, 8.082_903_768_654_761, 1e-12), "{}", s.sd);

        let s = per_ue_stats(&series(&[15.0, 15.0, 15.0]), 0).unwrap();
        assert_eq!((s.mean, s.sd), (15.0, 0.0));
    }

    #[test]
    fn flat_series_has_exactly_zero_sd() {
        for v in [13.05, 18.9, 0.1 + 0.2] {
            let s = stats_of(&vec![v; 300]).unwrap();
            assert_eq!((s.mean, s.sd), (v, 0.0));
        }
    }

    proptest::proptest! {
        #[test]
        fn matches_two_pass_oracle(xs in proptest::collection::vec(0.0f64..50.0, 2..200)) {
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let s = stats_of(&xs).unwrap();
            proptest::prop_assert!((s.mean - m).abs() < 1e-9);
            proptest::prop_assert!((s.sd - sd).abs() < 1e-9);
            proptest::prop_assert!((sample_sd(&xs) - sd).abs() < 1e-9);
        }
    }

    #[test]
    fn cutoff_is_inclusive() {
        let s = per_ue_stats(&series(&[100.0, 1.0, 3.0]), 1_000).unwrap();
        assert_eq!((s.mean, s.samples), (2.0, 2));
        assert_eq!(
            per_ue_stats(&series(&[1.0, 2.0]), 1_000),
            Err(StatsError::TooFewSamples(1))
        );
    }

    #[test]
    fn square_wave_sd_tends_to_half_swing() {
        let (a, b) = (18.90, 22.50);
        let wave: Vec<f64> = (0..300)
            .map(|i| if (i / 5) % 2 == 0 { a } else { b })
            .collect();
        let s = stats_of(&wave).unwrap();
        let closed_form: f64 = (a - b) / 2.0;
        assert!((s.sd - closed_form.abs()).abs() / closed_form.abs() < 0.01);
    }

    #[test]
    fn run_level_aggregation() {
        let ue = |mean, sd| UeStats {
            mean,
            sd,
            samples: 300,
        };
        let r = run_stats(&[ue(13.05, 0.0), ue(18.90, 0.0), ue(13.05, 0.0)]).unwrap();
        assert!(close(r.mean, 15.0, 1e-12));
        assert_eq!(r.sd, 0.0);
        let r = run_stats(&[ue(13.05, 0.9), ue(18.90, 1.8), ue(13.05, 0.9)]).unwrap();
        assert!(close(r.sd, 1.2, 1e-12));
        let one = run_stats(&[ue(7.0, 0.5)]).unwrap();
        assert_eq!((one.mean, one.sd), (7.0, 0.5));
        assert_eq!(run_stats(&[]), Err(StatsError::NoUes));
    }

    #[test]
    fn category_of_one_run() {
        let c = category_stats("CMF", &[RunStats { mean: 3.0, sd: 1.0 }]).unwrap();
        assert_eq!((c.avg_mean, c.avg_sd), (3.0, 1.0));
        assert_eq!(category_stats("CMF", &[]), Err(StatsError::NoRuns));
    }

    #[test]
    fn reduction_edge_cases() {
        let cat = |sd| category_stats("x", &[RunStats { mean: 1.0, sd }]).unwrap();
        assert_eq!(sd_reduction(&cat(2.0), &cat(2.0)), Some(0.0));
        assert_eq!(sd_reduction(&cat(0.0), &cat(0.0)), None);
        assert_eq!(sd_reduction(&cat(2.964), &cat(0.649)), Some(78.1));
    }
}
