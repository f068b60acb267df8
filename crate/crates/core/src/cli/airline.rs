//! A synthetic stand-in with the airline study's schema. The real data are
//! not bundled; these rows only mimic the column layout, rough marginal
//! scales, and a drift across years so that year-ordered storage is
//! non-random.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::glm::DataShard;
use crate::rng::{stream_rng, DATA_STREAM};

pub const RESPONSE: &str = "Delayed";
pub const COLUMNS: [&str; 5] = ["Year", "DepTime", "CRSArrTime", "ActualElapsedTime", "Distance"];
const FIRST_YEAR: u32 = 1987;
const YEARS: u32 = 21;

/// `n` rows in ascending year order. Covariates are in `COLUMNS` order.
pub fn synthetic_airline(n: usize, seed: u64) -> DataShard {
    let mut rng = stream_rng(seed, DATA_STREAM);
    let dep = Normal::<f64>::new(1350.0, 477.0).expect("valid normal");
    let dist = LogNormal::<f64>::new(6.3, 0.7).expect("valid log-normal");
    let noise = Normal::new(0.0, 15.0).expect("valid normal");
    let (mut y, mut x) = (Vec::with_capacity(n), Vec::with_capacity(n * COLUMNS.len()));
    for i in 0..n {
        let year_idx = (i as u64 * u64::from(YEARS) / n.max(1) as u64) as u32;
        let t = f64::from(year_idx) / f64::from(YEARS - 1);
        let dep_time: f64 = dep.sample(&mut rng).clamp(1.0, 2359.0);
        let distance: f64 = dist.sample(&mut rng).clamp(30.0, 4500.0);
        // Flights get slower over the years for the same distance.
        let elapsed = (25.0 + distance / 7.5 + 20.0 * t + noise.sample(&mut rng)).max(15.0);
        let arr = (dep_time + elapsed * 100.0 / 60.0 + rng.random_range(-30.0..30.0)).rem_euclid(2400.0);
        // The delay mechanism itself shifts with the year.
        let eta = -3.44 + 0.00096 * dep_time - 0.00028 * arr + (0.058 - 0.02 * t) * elapsed - 0.00683 * distance
            + 1.5 * (0.5 - t);
        let p = 1.0 / (1.0 + (-eta).exp());
        y.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        x.extend([f64::from(FIRST_YEAR + year_idx), dep_time, arr, elapsed, distance]);
    }
    DataShard::from_rows(y, x, COLUMNS.len()).expect("generated shapes are consistent")
}
