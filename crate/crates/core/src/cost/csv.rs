use super::{AccessCounts, Counter, CostReport};
use crate::scalar::Scalar;

/// Column order of [`report_csv_row`].
pub const CSV_HEADER: &str = "latency_cycles,latency_seconds,energy,edp,utilization,utilized_pes,total_pes,bound,compute_cycles,fills,reads,updates,writebacks";

fn totals(c: &AccessCounts) -> [u64; 4] {
    Counter::ALL.map(|k| c.total(k))
}

/// One CSV row, no trailing newline. Floats use Rust's shortest round-trip
/// formatting, so rows are stable across runs and platforms.
pub fn report_csv_row<T: Scalar>(r: &CostReport<T>) -> String {
    let [f, rd, u, w] = totals(&r.counts);
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.latency_cycles.to_f64_lossy(),
        r.latency_seconds.to_f64_lossy(),
        r.energy.to_f64_lossy(),
        r.edp.to_f64_lossy(),
        r.utilization.to_f64_lossy(),
        r.utilized_pes,
        r.total_pes,
        r.bound,
        r.compute_cycles,
        f,
        rd,
        u,
        w
    )
}
