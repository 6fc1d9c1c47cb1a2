//! Per-gate store of plausible reset states.

use std::collections::VecDeque;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;

use crate::quadsim::{QuadParams, QuadState};
use crate::track::Track;

/// A stored reset state and the number of gates already passed in it.
#[derive(Clone, Debug, PartialEq)]
pub struct BufferEntry {
    pub state: QuadState,
    pub passed: u64,
}

/// One ring buffer per gate; slot `g` holds states whose next gate is `g`.
#[derive(Clone, Debug)]
pub struct InitialStateBuffer {
    slots: Vec<VecDeque<BufferEntry>>,
    capacity: usize,
}

impl InitialStateBuffer {
    /// Fills every slot with `capacity` copies of its seed state: the drone
    /// in the center of the previous gate flying forward at `speed`. The
    /// first gate of an acyclic track is seeded from the start pose.
    pub fn new(track: &Track, params: &QuadParams, capacity: usize, speed: f64) -> Self {
        let capacity = capacity.max(1);
        let slots = (0..track.n_gates())
            .map(|g| {
                let seed = seed_entry(track, params, g, speed);
                std::iter::repeat_n(seed, capacity).collect()
            })
            .collect();
        Self { slots, capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, gate: usize) -> &VecDeque<BufferEntry> {
        &self.slots[gate]
    }

    /// Uniform slot, then uniform entry within it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &BufferEntry {
        let slot = &self.slots[rng.random_range(0..self.slots.len())];
        &slot[rng.random_range(0..slot.len())]
    }

    /// Adds an entry to `gate`'s slot, evicting the oldest when full.
    pub fn insert(&mut self, gate: usize, entry: BufferEntry) {
        let slot = &mut self.slots[gate];
        if slot.len() == self.capacity {
            slot.pop_front();
        }
        slot.push_back(entry);
    }
}

/// Seed state for buffer slot `gate`.
pub fn seed_entry(track: &Track, params: &QuadParams, gate: usize, speed: f64) -> BufferEntry {
    let n = track.n_gates();
    let (position, heading) = if gate == 0 && !track.cyclic {
        (track.start.position, track.start.yaw_deg.to_radians())
    } else {
        let prev = &track.gates[(gate + n - 1) % n];
        let fwd = prev.forward();
        (prev.center, fwd.y.atan2(fwd.x))
    };
    let mut state = QuadState::hovering(position, params);
    state.orientation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), heading);
    state.velocity = state.orientation * Vector3::new(speed, 0.0, 0.0);
    BufferEntry { state, passed: gate as u64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::Gate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn track(cyclic: bool) -> Track {
        let gates = (0..3).map(|i| Gate::new(Vector3::new(5.0 * i as f64, 0.0, 2.0), 0.0, 1.5, 0.2)).collect();
        Track::new("t", gates, cyclic, None).unwrap()
    }

    #[test]
    fn seeds_sit_in_previous_gate() {
        let p = QuadParams::default();
        let b = InitialStateBuffer::new(&track(true), &p, 10, 2.0);
        assert_eq!(b.n_slots(), 3);
        let e = &b.slot(1)[0];
        assert_eq!(e.state.position, Vector3::new(0.0, 0.0, 2.0));
        assert!((e.state.velocity - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(e.passed, 1);
        // Cyclic slot 0 starts in the last gate.
        assert_eq!(b.slot(0)[0].state.position, Vector3::new(10.0, 0.0, 2.0));
        let acyclic = InitialStateBuffer::new(&track(false), &p, 10, 2.0);
        assert!((acyclic.slot(0)[0].state.position - Vector3::new(-3.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn capacity_is_never_exceeded() {
        let p = QuadParams::default();
        let mut b = InitialStateBuffer::new(&track(true), &p, 10, 2.0);
        for k in 0..25u64 {
            let mut e = b.slot(2)[0].clone();
            e.passed = 100 + k;
            b.insert(2, e);
            assert!(b.slot(2).len() <= 10);
        }
        // Oldest evicted first.
        assert_eq!(b.slot(2).front().unwrap().passed, 115);
        assert_eq!(b.slot(2).back().unwrap().passed, 124);
    }

    #[test]
    fn sampling_visits_every_slot() {
        let p = QuadParams::default();
        let b = InitialStateBuffer::new(&track(true), &p, 10, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            seen[b.sample(&mut rng).passed as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800), "{seen:?}");
    }
}
