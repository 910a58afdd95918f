use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Matrix, Vector};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based random stream identified by `(seed, stream_index)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent
/// sequences for the same seed. Sub-streams for tasks, replicates or grid
/// points are obtained with [`Rng::derive`], so the data any unit of work
/// sees depends only on its index and never on scheduling.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Fresh child stream keyed by `key`. Independent of how far `self`
    /// has been advanced.
    pub fn derive(&self, key: u64) -> Rng {
        let stream = splitmix64(self.stream_index ^ splitmix64(key.wrapping_add(GOLDEN_GAMMA)));
        Rng::new(self.seed, stream)
    }

    /// Child stream keyed by a path of indices, e.g. `[tag, grid, replicate]`.
    pub fn derive_path(&self, path: &[u64]) -> Rng {
        path.iter().fold(self.clone(), |rng, &k| rng.derive(k))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn coin_flip(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `rows x cols` matrix of i.i.d. standard normals, drawn in row-major order.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let entries: Vec<f64> = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    Matrix::from_row_slice(rows, cols, &entries)
}

pub fn gaussian_vector(rng: &mut Rng, dim: usize) -> Vector {
    Vector::from_iterator(dim, (0..dim).map(|_| rng.standard_normal()))
}
