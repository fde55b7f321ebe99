//! Closed-form values printed by `dapes-sim oracle`.

use dapes_core::analysis::{data_fetch_time, expected_transmit_delay, rpf_effectiveness, DomainError, FetchMode};
use dapes_core::collection::metadata_subnames_bytes;

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    /// Bytes of `n` subnames with the given field widths.
    MetadataSize { n: u64, index: u64, digest: u64, framing: u64 },
    /// Rarest-first effectiveness for `n` packets and `k` peers.
    Eta { n: u64, k: u32 },
    /// Mean pre-transmission delay for `slots` slots in `groups` groups.
    TDelay { slots: u32, groups: u32, tau: f64 },
    /// Time left for data in an encounter of `delta_t`.
    FetchTime { delta_t: f64, t_delay: f64, d: f64, b: u32, mode: FetchMode },
}

pub fn evaluate(q: &Query) -> Result<String, DomainError> {
    Ok(match *q {
        Query::MetadataSize { n, index, digest, framing } => metadata_subnames_bytes(n, index, digest, framing).to_string(),
        Query::Eta { n, k } => format!("{:.10}", rpf_effectiveness::<f64>(n, k)?),
        Query::TDelay { slots, groups, tau } => format!("{:.10}", expected_transmit_delay(slots, groups, tau)?),
        Query::FetchTime { delta_t, t_delay, d, b, mode } => {
            format!("{:.10}", data_fetch_time(delta_t, t_delay, d, b, mode)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let q = Query::MetadataSize { n: 1000, index: 4, digest: 20, framing: 8 };
        assert_eq!(evaluate(&q).unwrap(), "32000");
        let eta: f64 = evaluate(&Query::Eta { n: 5000, k: 1 }).unwrap().parse().unwrap();
        assert!((eta - 0.99830).abs() < 1e-5);
        let t: f64 = evaluate(&Query::TDelay { slots: 16, groups: 2, tau: 0.001 }).unwrap().parse().unwrap();
        assert!((t - 0.00125).abs() < 1e-12);
        assert!(evaluate(&Query::TDelay { slots: 1, groups: 2, tau: 0.001 }).is_err());
    }
}
