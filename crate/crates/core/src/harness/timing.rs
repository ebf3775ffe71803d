use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::metrics::MeanStd;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleTiming {
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl SampleTiming {
    pub fn of(durations: &[Duration]) -> Option<Self> {
        let ms: Vec<f64> = durations.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        MeanStd::of(&ms).map(|s| SampleTiming {
            mean_ms: s.mean,
            std_ms: s.std,
        })
    }
}

/// Run `phase` on every item one at a time and report per-item wall time.
pub fn time_per_sample<T, R, F>(batch: &[T], mut phase: F) -> Result<(Vec<R>, SampleTiming)>
where
    F: FnMut(&T) -> Result<R>,
{
    if batch.is_empty() {
        return Err(Error::Validation("cannot time an empty batch".into()));
    }
    let mut out = Vec::with_capacity(batch.len());
    let mut times = Vec::with_capacity(batch.len());
    for item in batch {
        let t0 = Instant::now();
        out.push(phase(item)?);
        times.push(t0.elapsed());
    }
    let timing = SampleTiming::of(&times).expect("non-empty batch");
    Ok((out, timing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::wait_until;

    #[test]
    fn single_item_has_zero_std() {
        let (_, t) = time_per_sample(&[1], |x| Ok(x + 1)).unwrap();
        assert_eq!(t.std_ms, 0.0);
    }

    #[test]
    fn delay_floor() {
        let (_, t) = time_per_sample(&[(); 4], |_| {
            wait_until(Instant::now(), Duration::from_millis(2));
            Ok(())
        })
        .unwrap();
        assert!(t.mean_ms >= 2.0);
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(time_per_sample(&[] as &[u8], |_| Ok(())).is_err());
    }
}
