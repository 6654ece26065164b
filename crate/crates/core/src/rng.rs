//! Seeded randomness keyed by `(seed, index, purpose)`.
//!
//! Every consumer gets its own ChaCha stream, so generating instance 7 never
//! depends on how many numbers instance 6 drew.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::vector::Vector;

/// FNV-1a over the tag bytes, folded with the index through splitmix64.
fn stream_id(index: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h ^ splitmix64(index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn keyed_rng(seed: u64, index: u64, tag: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(index, tag));
    rng
}

/// Uniform point of the cube `[-radius, radius]^dim`.
pub fn point_in_box<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    Vector::from_raw((0..dim).map(|_| rng.gen_range(-radius..=radius)).collect())
}

/// Uniform point of the closed Euclidean ball of the given radius.
pub fn point_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    let dir = unit_vector(rng, dim);
    let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
    dir.scale(r)
}

/// Uniformly distributed unit vector (Gaussian direction via Box–Muller).
pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let coords: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let v = Vector::from_raw(coords);
        let n = v.norm();
        if n > 1e-12 {
            return v.scale(1.0 / n);
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seeded sample of point pairs from a box; used by the operator checks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PairSample {
    pub seed: u64,
    pub radius: f64,
    pub count: usize,
    #[serde(skip)]
    pub pairs: Vec<(Vector, Vector)>,
}

impl PairSample {
    pub fn draw(seed: u64, dim: usize, radius: f64, count: usize) -> Self {
        let mut rng = keyed_rng(seed, dim as u64, "pairs");
        let pairs = (0..count)
            .map(|_| (point_in_box(&mut rng, dim, radius), point_in_box(&mut rng, dim, radius)))
            .collect();
        PairSample {
            seed,
            radius,
            count,
            pairs,
        }
    }
}
