//! When a peer sends its bitmap: a linear timer that favors peers with more
//! to offer, and prioritized exponential backoff (PEBA) after collisions.

use rand::{Rng, RngCore};

use crate::advertisement::Bitmap;
use crate::analysis::DomainError;
use crate::name::Name;
use crate::scalar::Scalar;

pub const DEFAULT_WINDOW: f64 = 0.020;

/// `window / (100 * fraction)`: a peer offering everything waits
/// `window / 100`, one offering 1% waits the whole window.
pub fn bitmap_timer_linear<T: Scalar>(window: T, share_fraction: T) -> Result<T, DomainError> {
    if !(share_fraction > T::zero()) || share_fraction > T::one() {
        return Err(DomainError(format!("share fraction must be in (0, 1], got {share_fraction}")));
    }
    Ok(window / (T::of_usize(100) * share_fraction))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    FirstBitmap,
    Subsequent,
}

/// Per-encounter record of which packets the transmitted bitmaps cover.
#[derive(Debug, Clone)]
pub struct PrioritizationState {
    pub window: f64,
    heard: Bitmap,
    heard_count: u32,
}

impl PrioritizationState {
    pub fn new(window: f64, collection: Name, len: usize) -> Self {
        Self {
            window,
            heard: Bitmap::new(collection, len),
            heard_count: 0,
        }
    }

    /// Starts from the requester's bitmap, which is the first one on air.
    pub fn with_requester(window: f64, requester: &Bitmap) -> Self {
        let mut s = Self::new(window, requester.collection().clone(), requester.len());
        s.heard.union_with(requester);
        s
    }

    pub fn phase(&self) -> Phase {
        if self.heard_count == 0 {
            Phase::FirstBitmap
        } else {
            Phase::Subsequent
        }
    }

    pub fn heard(&self) -> &Bitmap {
        &self.heard
    }

    pub fn bitmaps_heard(&self) -> u32 {
        self.heard_count
    }

    pub fn on_heard(&mut self, b: &Bitmap) {
        self.heard.union_with(b);
        self.heard_count += 1;
    }

    /// Packets `own` holds that no transmitted bitmap covers.
    pub fn contribution(&self, own: &Bitmap) -> usize {
        own.count_and_not(&self.heard)
    }

    /// Packets no transmitted bitmap covers.
    pub fn missing(&self) -> usize {
        self.heard.missing_count()
    }

    /// Share used by the linear timer, `None` when `own` adds nothing.
    pub fn share_fraction(&self, own: &Bitmap) -> Option<f64> {
        let (num, den) = match self.phase() {
            Phase::FirstBitmap => (own.have_count(), own.len()),
            Phase::Subsequent => (self.contribution(own), self.missing()),
        };
        if num == 0 || den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    }

    pub fn timer(&self, own: &Bitmap) -> Option<f64> {
        let f = self.share_fraction(own)?;
        bitmap_timer_linear(self.window, f).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PebaState {
    pub collision_round: u32,
    pub groups: u32,
    pub slot_duration: f64,
}

impl PebaState {
    pub fn new(groups: u32, slot_duration: f64) -> Self {
        Self {
            collision_round: 0,
            groups: groups.max(1),
            slot_duration,
        }
    }

    /// `2^round`: two slots after the first collision, doubling after each
    /// further one.
    pub fn slot_count(&self) -> u32 {
        1u32 << self.collision_round.min(20)
    }

    pub fn on_collision(&mut self) {
        self.collision_round += 1;
    }

    pub fn reset(&mut self) {
        self.collision_round = 0;
    }

    pub fn slots_per_group(&self) -> u32 {
        self.slot_count() / self.groups
    }
}

/// Priority group for a peer holding `contribution` of the `total_missing`
/// packets: `k - 1 - floor(contribution * k / total_missing)`, clamped.
/// With `k = 2` this puts peers with at least half the missing packets in
/// group 0.
pub fn peba_group(contribution: usize, total_missing: usize, groups: u32) -> u32 {
    let k = groups.max(1) as u64;
    if total_missing == 0 {
        return 0;
    }
    let level = (contribution as u64 * k) / total_missing as u64;
    (k - 1).saturating_sub(level) as u32
}

/// Chooses a slot uniformly inside the peer's priority group.
pub fn peba_assign_slot(
    st: &PebaState,
    contribution: usize,
    total_missing: usize,
    rng: &mut dyn RngCore,
) -> Result<u32, DomainError> {
    let l = st.slot_count();
    if l < st.groups {
        return Err(DomainError(format!("{l} slots cannot hold {} groups", st.groups)));
    }
    let n = l / st.groups;
    let j = peba_group(contribution, total_missing, st.groups);
    Ok(j * n + rng.gen_range(0..n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_timer_examples() {
        let w = 0.020f64;
        assert!((bitmap_timer_linear(w, 1.0).unwrap() - 0.0002).abs() < 1e-15);
        assert!((bitmap_timer_linear(w, 0.5).unwrap() - 0.0004).abs() < 1e-15);
        assert_eq!(bitmap_timer_linear(w, 0.3).unwrap(), bitmap_timer_linear(w, 0.3).unwrap());
        assert!(bitmap_timer_linear(w, 0.0).is_err());
        assert!((bitmap_timer_linear(0.020f32, 1.0).unwrap() - 0.0002).abs() < 1e-8);
    }

    fn bits(len: usize, set: &[usize]) -> Bitmap {
        let mut b = Bitmap::new(Name::parse("/c").unwrap(), len);
        for g in set {
            b.set(*g);
        }
        b
    }

    /// A misses packets 0..6; C holds 3 of them, B 2, D 1.
    #[test]
    fn collision_walkthrough() {
        let a = bits(6, &[]);
        let c = bits(6, &[0, 1, 2]);
        let b = bits(6, &[3, 4]);
        let d = bits(6, &[5]);
        let mut prio = PrioritizationState::with_requester(DEFAULT_WINDOW, &a);
        let mut st = PebaState::new(2, 0.001);
        st.on_collision();
        assert_eq!(st.slot_count(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let slot = |p: &PrioritizationState, own: &Bitmap, st: &PebaState, rng: &mut ChaCha8Rng| {
            peba_assign_slot(st, p.contribution(own), p.missing(), rng).unwrap()
        };
        assert_eq!(slot(&prio, &c, &st, &mut rng), 0);
        assert_eq!(slot(&prio, &b, &st, &mut rng), 1);
        assert_eq!(slot(&prio, &d, &st, &mut rng), 1);

        prio.on_heard(&c);
        assert_eq!(prio.missing(), 3);
        st.on_collision();
        assert_eq!(st.slot_count(), 4);
        for _ in 0..100 {
            assert!(slot(&prio, &b, &st, &mut rng) < 2);
            assert!((2..4).contains(&slot(&prio, &d, &st, &mut rng)));
        }
    }

    #[test]
    fn single_group_is_plain_backoff() {
        let mut st = PebaState::new(1, 0.001);
        st.on_collision();
        st.on_collision();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [false; 4];
        for _ in 0..200 {
            seen[peba_assign_slot(&st, 1, 10, &mut rng).unwrap() as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
        let st = PebaState::new(2, 0.001);
        assert!(peba_assign_slot(&st, 1, 2, &mut rng).is_err());
    }

    #[test]
    fn share_fraction_phases() {
        let own = bits(4, &[0, 1]);
        let mut p = PrioritizationState::new(DEFAULT_WINDOW, Name::parse("/c").unwrap(), 4);
        assert_eq!(p.share_fraction(&own), Some(0.5));
        p.on_heard(&bits(4, &[0]));
        assert_eq!(p.share_fraction(&own), Some(1.0 / 3.0));
        p.on_heard(&bits(4, &[1]));
        assert_eq!(p.share_fraction(&own), None);
    }

    proptest! {
        #[test]
        fn larger_contribution_never_in_later_group(
            a in 0usize..200, b in 0usize..200, extra in 0usize..200, k in 1u32..6,
        ) {
            let total = a.max(b) + extra;
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assume!(total > 0);
            prop_assert!(peba_group(hi, total, k) <= peba_group(lo, total, k));
            prop_assert!(peba_group(lo, total, k) < k);
        }

        #[test]
        fn group_slot_ranges_disjoint_and_ordered(round in 1u32..8, k in 1u32..5, c in 0usize..50, seed in any::<u64>()) {
            let mut st = PebaState::new(k, 0.001);
            for _ in 0..round { st.on_collision(); }
            prop_assume!(st.slot_count() >= k);
            let n = st.slots_per_group();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = peba_assign_slot(&st, c, 50, &mut rng).unwrap();
            let j = peba_group(c, 50, k);
            prop_assert!(s >= j * n && s < (j + 1) * n);
        }
    }
}
