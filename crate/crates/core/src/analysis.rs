//! Closed-form estimates: bitmap transmission delay under prioritized
//! backoff, time left for data fetching, and rarest-first effectiveness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

fn domain(msg: impl Into<String>) -> DomainError {
    DomainError(msg.into())
}

/// `L` slots split into `k` priority groups of `floor(L/k)` slots each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotContention<T: Scalar> {
    pub slots: u32,
    pub groups: u32,
    pub slot_duration: T,
}

impl<T: Scalar> SlotContention<T> {
    pub fn new(slots: u32, groups: u32, slot_duration: T) -> Result<Self, DomainError> {
        if groups == 0 || slots < groups {
            return Err(domain(format!("need L >= k >= 1, got L={slots} k={groups}")));
        }
        if slot_duration < T::zero() || !slot_duration.is_finite() {
            return Err(domain("slot duration must be finite and nonnegative"));
        }
        Ok(Self {
            slots,
            groups,
            slot_duration,
        })
    }

    pub fn slots_per_group(&self) -> u32 {
        self.slots / self.groups
    }

    /// `(n - 1) / 2` for `n` slots per group.
    pub fn average_window(&self) -> T {
        let n = T::of_usize(self.slots_per_group() as usize);
        (n - T::one()) / T::of_usize(2)
    }

    /// `((L_avg - 1) / 2) * tau`, clamped at zero where the formula turns
    /// negative (`n <= 2`).
    pub fn expected_delay(&self) -> T {
        let two = T::of_usize(2);
        let d = (self.average_window() - T::one()) / two * self.slot_duration;
        d.max(T::zero())
    }
}

pub fn expected_transmit_delay<T: Scalar>(slots: u32, groups: u32, tau: T) -> Result<T, DomainError> {
    Ok(SlotContention::new(slots, groups, tau)?.expected_delay())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FetchMode {
    BitmapsFirst,
    Interleaved,
}

/// Encounter of length `delta_t` in which each bitmap costs
/// `t_delay + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FetchBudget<T: Scalar> {
    pub delta_t: T,
    pub t_delay: T,
    pub d: T,
}

impl<T: Scalar> FetchBudget<T> {
    pub fn new(delta_t: T, t_delay: T, d: T) -> Result<Self, DomainError> {
        for (v, what) in [(delta_t, "delta_t"), (t_delay, "t_delay"), (d, "d")] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(domain(format!("{what} must be finite and nonnegative")));
            }
        }
        Ok(Self { delta_t, t_delay, d })
    }

    fn per_bitmap(&self) -> T {
        self.t_delay + self.d
    }

    /// Largest `b` allowed in interleaved mode, `None` when unbounded.
    pub fn max_interleaved_bitmaps(&self) -> Option<u64> {
        let per = self.per_bitmap();
        if per <= T::zero() {
            None
        } else {
            (self.delta_t / per).floor().to_u64()
        }
    }

    pub fn fetch_time(&self, b: u32, mode: FetchMode) -> Result<T, DomainError> {
        let per = self.per_bitmap();
        let spent = per * T::of_usize(b as usize);
        match mode {
            FetchMode::BitmapsFirst => Ok(if spent < self.delta_t {
                self.delta_t - spent
            } else {
                T::zero()
            }),
            FetchMode::Interleaved => {
                if let Some(max) = self.max_interleaved_bitmaps() {
                    if b as u64 > max {
                        return Err(domain(format!("interleaved needs b <= {max}, got {b}")));
                    }
                }
                Ok(if per < self.delta_t {
                    (self.delta_t - spent).max(T::zero())
                } else {
                    T::zero()
                })
            }
        }
    }
}

pub fn data_fetch_time<T: Scalar>(
    delta_t: T,
    t_delay: T,
    d: T,
    b: u32,
    mode: FetchMode,
) -> Result<T, DomainError> {
    FetchBudget::new(delta_t, t_delay, d)?.fetch_time(b, mode)
}

/// `1 - (ln N / N)^k`, zero for isolated peers (`k = 0`).
pub fn rpf_effectiveness<T: Scalar>(n: u64, k: u32) -> Result<T, DomainError> {
    if n < 2 {
        return Err(domain(format!("need N >= 2, got {n}")));
    }
    if k == 0 {
        return Ok(T::zero());
    }
    let n = T::of_f64(n as f64);
    Ok(T::one() - (n.ln() / n).powi(k as i32))
}
