//! Structural checksum over a trial, recorded per replicate so it is
//! auditable that all estimators consumed the same data.

use crate::data::TrialData;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Clone, Copy)]
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(FNV_OFFSET)
    }
    fn byte(&mut self, b: u8) {
        self.0 ^= u64::from(b);
        self.0 = self.0.wrapping_mul(FNV_PRIME);
    }
    fn u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.byte(b);
        }
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn bytes(&mut self, bs: &[u8]) {
        for &b in bs {
            self.byte(b);
        }
    }
}

/// FNV-1a hash of a string (used to tag cluster ids into seed paths).
pub fn hash_str(s: &str) -> u64 {
    let mut h = Fnv::new();
    h.bytes(s.as_bytes());
    h.0
}

/// FNV-1a checksum of every observed field of the trial, in order.
pub fn trial_checksum(data: &TrialData) -> u64 {
    let mut h = Fnv::new();
    h.u64(data.j() as u64);
    for c in &data.clusters {
        h.bytes(c.id.as_bytes());
        h.f64(c.e1c);
        h.f64(c.e2c);
        h.byte(c.a);
        h.u64(c.n() as u64);
        for r in &c.individuals {
            h.f64(r.w1);
            h.byte(r.w2);
            h.byte(r.w3);
            h.byte(r.delta);
            h.byte(r.y1);
            h.byte(r.y2);
            h.f64(r.l.unwrap_or(f64::NEG_INFINITY));
        }
    }
    h.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate_trial, SimParams};

    #[test]
    fn checksum_distinguishes_trials() {
        let params = SimParams { j: 4, ..SimParams::default() };
        let t1 = generate_trial(&params, 1).unwrap();
        let t2 = generate_trial(&params, 2).unwrap();
        assert_eq!(trial_checksum(&t1), trial_checksum(&t1));
        assert_ne!(trial_checksum(&t1), trial_checksum(&t2));
    }
}
