//! Deterministic counter-based random streams.
//!
//! Every stochastic quantity in the simulator draws from a stream derived
//! from (master seed, scan index, point index, shot index), so results are
//! bit-identical across reruns and across any parallel execution order.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, the standard 64-bit mixer.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha8 stream from a master seed and a path of
/// indices (scan, point, shot, ...).
pub fn derive_stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = master;
    let mut mixed = splitmix64(&mut state);
    for &idx in path {
        state ^= idx.wrapping_mul(0xd134_2543_de82_ef95).wrapping_add(mixed);
        mixed = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Poisson sample by CDF inversion; exact for the photon-count means used
/// here (≲ a few hundred). Larger means split into independent halves.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    assert!(mean >= 0.0 && mean.is_finite());
    if mean == 0.0 {
        return 0;
    }
    if mean > 500.0 {
        return poisson(rng, mean / 2.0) + poisson(rng, mean / 2.0);
    }
    let u: f64 = rng.random();
    let mut cumulative = (-mean).exp();
    let mut pmf = cumulative;
    let mut k = 0u64;
    while u > cumulative && k < 100_000 {
        k += 1;
        pmf *= mean / k as f64;
        cumulative += pmf;
    }
    k
}

/// Binomial sample as a sum of Bernoulli draws; shot counts are small.
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u32, p: f64) -> u32 {
    assert!((0.0..=1.0).contains(&p));
    (0..n).filter(|_| rng.random::<f64>() < p).count() as u32
}
